use std::collections::BTreeSet;

use lcqft::lattice::{
    causally_disjoint, causally_precedes, compose, domain_of_dependence, multi_diamond, Cell, LatticeMorphism,
    LatticeSpacetime, LocObject, Region, SiteInterval,
};
use proptest::prelude::*;

fn st(n: usize, steps: usize) -> LatticeSpacetime {
    LatticeSpacetime::new(n, steps, 0.5, "1:1".parse().unwrap()).unwrap()
}

/// Every morphism between a few small objects, found by trying all shifts.
fn morphisms(st: &LatticeSpacetime) -> Vec<LatticeMorphism> {
    let n = st.n_sites();
    let mut objects = vec![LocObject::cylinder(st), LocObject::slab(st, 2), LocObject::slab(st, 4)];
    for (slice, start, len) in [(2, 0, 1), (2, 1, 3), (3, 0, 5)] {
        objects.push(LocObject::region(st, domain_of_dependence(slice, SiteInterval::new(start, len), st).unwrap()));
    }
    let mut out = Vec::new();
    for a in &objects {
        for b in &objects {
            for dt in -2..=2 {
                for dx in 0..n as i64 {
                    if let Ok(m) = LatticeMorphism::new(a.clone(), b.clone(), dt, dx) {
                        out.push(m);
                    }
                }
            }
        }
    }
    out
}

#[test]
fn category_laws_hold_exhaustively() {
    let s = st(6, 8);
    let ms = morphisms(&s);
    assert!(ms.len() > 50);
    for f in &ms {
        let left = compose(&LatticeMorphism::identity(f.target().clone()), f).unwrap();
        let right = compose(f, &LatticeMorphism::identity(f.source().clone())).unwrap();
        assert_eq!(&left, f);
        assert_eq!(&right, f);
    }
    let mut triples = 0;
    for h in &ms {
        for g in ms.iter().filter(|g| g.target() == h.source()) {
            let hg = compose(h, g).unwrap();
            for f in ms.iter().filter(|f| f.target() == g.source()).take(4) {
                assert_eq!(compose(&hg, f).unwrap(), compose(h, &compose(g, f).unwrap()).unwrap());
                triples += 1;
            }
        }
    }
    assert!(triples > 100);
}

#[test]
fn composition_checks_domains() {
    let s = st(6, 8);
    let a = LatticeMorphism::cauchy_extension(&s, 2, 4).unwrap();
    assert!(compose(&a, &a).is_err());
}

/// Whether every causal path between two region cells stays inside.
fn is_causally_convex(r: &Region, n: usize) -> bool {
    let cells: Vec<Cell> = r.cells().iter().copied().collect();
    for &a in &cells {
        for &b in &cells {
            if a.0 >= b.0 || !causally_precedes(a, b, n) {
                continue;
            }
            // breadth-first over unit-slope steps from a that can still reach b
            let mut layer: BTreeSet<Cell> = [a].into();
            for t in a.0 + 1..=b.0 {
                let mut next = BTreeSet::new();
                for &(_, x) in &layer {
                    for dx in [-1i64, 0, 1] {
                        let y = (x as i64 + dx).rem_euclid(n as i64) as usize;
                        let c = (t, y);
                        if causally_precedes(c, b, n) {
                            if !r.contains(c) {
                                return false;
                            }
                            next.insert(c);
                        }
                    }
                }
                layer = next;
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diamonds_are_causally_convex(n in 4usize..10, start in 0usize..10, len in 1usize..9, slice in -3i64..6) {
        let s = st(n, 8);
        prop_assume!(len < n);
        let r = domain_of_dependence(slice, SiteInterval::new(start % n, len), &s).unwrap();
        prop_assert!(is_causally_convex(&r, n));
        prop_assert!(r.translated(2, 3).cells().len() == r.cells().len());
    }

    #[test]
    fn multi_diamond_components_are_disjoint(n in 8usize..14, a in 1usize..4, b in 1usize..4, gap in 1usize..4, dslice in 0i64..2) {
        let s = st(n, 8);
        prop_assume!(a + b + 2 * gap <= n);
        let comps = [(2, SiteInterval::new(0, a)), (2 + dslice, SiteInterval::new(a + gap, b))];
        match multi_diamond(&comps, &s) {
            Ok(r) => {
                prop_assert!(causally_disjoint(&r.component_cells(0), &r.component_cells(1), n));
                prop_assert!(is_causally_convex(&r, n));
            }
            Err(_) => {
                let (x, y) = (domain_of_dependence(comps[0].0, comps[0].1, &s).unwrap(), domain_of_dependence(comps[1].0, comps[1].1, &s).unwrap());
                prop_assert!(!causally_disjoint(x.cells(), y.cells(), n) || gap == 0);
            }
        }
    }
}
