//! Exact reference implementation of the CCR algebra.
//!
//! Elements are linear combinations of words in the generators Φ(e_i) with
//! complex rational coefficients, kept in normal order (nondecreasing index)
//! using only the defining relation Φ(e_a)Φ(e_b) = Φ(e_b)Φ(e_a) + iσ_ab 𝟙.
//! Symmetric monomials enter through the Weyl-ordering identity
//! x_i ⊙ f = ½(Φ(e_i)·f + f·Φ(e_i)), never through the Moyal formula, so this
//! module is an independent check on [`AlgebraElement::product`].

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use super::{AlgebraElement, PhaseSpace};
use crate::error::{Error, Result};

/// Complex rational number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QComplex {
    pub re: BigRational,
    pub im: BigRational,
}

impl QComplex {
    pub fn zero() -> Self {
        Self { re: BigRational::zero(), im: BigRational::zero() }
    }

    pub fn int(re: i64, im: i64) -> Self {
        Self { re: BigRational::from_integer(BigInt::from(re)), im: BigRational::from_integer(BigInt::from(im)) }
    }

    /// Exact conversion of a finite double.
    pub fn from_f64(re: f64, im: f64) -> Result<Self> {
        let conv = |v: f64| BigRational::from_f64(v).ok_or_else(|| Error::Parse(format!("non-finite {v}")));
        Ok(Self { re: conv(re)?, im: conv(im)? })
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn add_assign(&mut self, o: &QComplex) {
        self.re += &o.re;
        self.im += &o.im;
    }

    pub fn mul(&self, o: &QComplex) -> QComplex {
        QComplex { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }

    fn times_i_sigma(&self, s: i64) -> QComplex {
        // (re + i im)·(i s) = −s im + i s re
        let s = BigRational::from_integer(BigInt::from(s));
        QComplex { re: -(&self.im * &s), im: &self.re * &s }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64().unwrap_or(f64::NAN), self.im.to_f64().unwrap_or(f64::NAN))
    }

    pub fn abs_upper(&self) -> f64 {
        self.re.abs().to_f64().unwrap_or(f64::INFINITY) + self.im.abs().to_f64().unwrap_or(f64::INFINITY)
    }
}

/// Normal-ordered element of the word algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct WordElement {
    space: PhaseSpace,
    terms: BTreeMap<Vec<u32>, QComplex>,
}

impl WordElement {
    pub fn zero(space: PhaseSpace) -> Self {
        Self { space, terms: BTreeMap::new() }
    }

    pub fn unit(space: PhaseSpace) -> Self {
        let mut e = Self::zero(space);
        e.terms.insert(Vec::new(), QComplex::int(1, 0));
        e
    }

    pub fn generator(space: PhaseSpace, i: u32) -> Self {
        let mut e = Self::zero(space);
        e.terms.insert(vec![i], QComplex::int(1, 0));
        e
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, QComplex> {
        &self.terms
    }

    fn insert_ordered(&mut self, word: Vec<u32>, c: QComplex) {
        let sigma = |a: u32, b: u32| -> i64 { self.space.sigma(a, b) as i64 };
        let mut stack = vec![(word, c)];
        let mut done: Vec<(Vec<u32>, QComplex)> = Vec::new();
        while let Some((w, c)) = stack.pop() {
            match w.windows(2).position(|p| p[0] > p[1]) {
                None => done.push((w, c)),
                Some(k) => {
                    let s = sigma(w[k], w[k + 1]);
                    if s != 0 {
                        let mut short = w.clone();
                        short.drain(k..k + 2);
                        stack.push((short, c.times_i_sigma(s)));
                    }
                    let mut swapped = w;
                    swapped.swap(k, k + 1);
                    stack.push((swapped, c));
                }
            }
        }
        for (w, c) in done {
            self.terms.entry(w).or_insert_with(QComplex::zero).add_assign(&c);
        }
        self.terms.retain(|_, v| !v.is_zero());
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.terms.entry(w.clone()).or_insert_with(QComplex::zero).add_assign(c);
        }
        out.terms.retain(|_, v| !v.is_zero());
        out
    }

    pub fn scale(&self, c: &QComplex) -> Self {
        let mut out = Self::zero(self.space);
        for (w, v) in &self.terms {
            let p = v.mul(c);
            if !p.is_zero() {
                out.terms.insert(w.clone(), p);
            }
        }
        out
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.space);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let mut w = a.clone();
                w.extend_from_slice(b);
                out.insert_ordered(w, ca.mul(cb));
            }
        }
        out
    }

    /// Largest coefficient difference, as a double.
    pub fn distance(&self, other: &Self) -> f64 {
        let mut keys: Vec<&Vec<u32>> = self.terms.keys().chain(other.terms.keys()).collect();
        keys.sort();
        keys.dedup();
        let zero = QComplex::zero();
        keys.into_iter()
            .map(|k| {
                let a = self.terms.get(k).unwrap_or(&zero);
                let b = other.terms.get(k).unwrap_or(&zero);
                let d = QComplex { re: &a.re - &b.re, im: &a.im - &b.im };
                let (re, im) = d.to_f64();
                re.hypot(im)
            })
            .fold(0.0, f64::max)
    }
}

/// Converts symmetric monomials into normal-ordered words, memoized.
pub struct WeylConverter {
    space: PhaseSpace,
    memo: HashMap<Vec<u32>, WordElement>,
}

impl WeylConverter {
    pub fn new(space: PhaseSpace) -> Self {
        Self { space, memo: HashMap::new() }
    }

    /// Word-algebra image of the symmetric monomial with sorted indices `m`.
    pub fn monomial(&mut self, m: &[u32]) -> WordElement {
        if let Some(w) = self.memo.get(m) {
            return w.clone();
        }
        let w = if m.is_empty() {
            WordElement::unit(self.space)
        } else {
            let rest = self.monomial(&m[1..]);
            let g = WordElement::generator(self.space, m[0]);
            let half = QComplex { re: BigRational::new(BigInt::one(), BigInt::from(2)), im: BigRational::zero() };
            g.product(&rest).add(&rest.product(&g)).scale(&half)
        };
        self.memo.insert(m.to_vec(), w.clone());
        w
    }

    /// Exact image of a floating-point element (coefficients read exactly).
    pub fn convert(&mut self, a: &AlgebraElement) -> Result<WordElement> {
        if a.space() != self.space {
            return Err(Error::SpaceMismatch);
        }
        let mut out = WordElement::zero(self.space);
        for (m, c) in a.terms() {
            let q = QComplex::from_f64(c.re, c.im)?;
            out = out.add(&self.monomial(m).scale(&q));
        }
        Ok(out)
    }

    /// Image of a symmetric polynomial with exact coefficients.
    pub fn convert_exact(&mut self, terms: &[(Vec<u32>, QComplex)]) -> WordElement {
        let mut out = WordElement::zero(self.space);
        for (m, c) in terms {
            let mut m = m.clone();
            m.sort_unstable();
            out = out.add(&self.monomial(&m).scale(c));
        }
        out
    }
}
