//! Finite category of lattice spacetimes.
//!
//! Objects are periodic 1+1 lattices (spatial circle of `n_sites` sites,
//! spacing 1) and causally convex regions inside them. Causal structure uses
//! a lattice lightspeed of one site per step, independent of `dt`, so all
//! causal bookkeeping is integer-exact.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible time step.
pub const MAX_DT: f64 = 0.9;
/// Smallest admissible spatial circle.
pub const MIN_SITES: usize = 4;

/// Ordered list of `(mass, multiplicity)` pairs with strictly increasing masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, usize)>", into = "Vec<(f64, usize)>")]
pub struct MassSpectrum {
    entries: Vec<(f64, usize)>,
}

impl MassSpectrum {
    pub fn new(entries: Vec<(f64, usize)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidSpectrum("no species".into()));
        }
        for &(m, k) in &entries {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidSpectrum(format!("mass {m} is not a nonnegative real")));
            }
            if k == 0 {
                return Err(Error::InvalidSpectrum(format!("mass {m} has zero multiplicity")));
            }
        }
        for w in entries.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidSpectrum(format!(
                    "masses must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, usize)] {
        &self.entries
    }

    /// |ν|
    pub fn total_species(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// ν(0)
    pub fn massless_count(&self) -> usize {
        match self.entries.first() {
            Some(&(m, k)) if m == 0.0 => k,
            _ => 0,
        }
    }

    pub fn multiplicity(&self, mass: f64) -> Option<usize> {
        self.entries.iter().find(|e| e.0 == mass).map(|e| e.1)
    }

    /// Mass of every species, in block order.
    pub fn species_masses(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|&(m, k)| std::iter::repeat_n(m, k))
            .collect()
    }

    /// Species index range occupied by each mass block.
    pub fn blocks(&self) -> Vec<(f64, std::ops::Range<usize>)> {
        let mut start = 0;
        self.entries
            .iter()
            .map(|&(m, k)| {
                let r = start..start + k;
                start += k;
                (m, r)
            })
            .collect()
    }

    pub fn block_of(&self, mass: f64) -> Result<std::ops::Range<usize>> {
        self.blocks()
            .into_iter()
            .find(|(m, _)| *m == mass)
            .map(|(_, r)| r)
            .ok_or(Error::MassNotInSpectrum(mass))
    }

    /// Σ_m ν(m)(ν(m)−1)/2, the dimension of ⊕_m so(ν(m)).
    pub fn orthogonal_algebra_dim(&self) -> usize {
        self.entries.iter().map(|&(_, k)| k * (k - 1) / 2).sum()
    }
}

impl TryFrom<Vec<(f64, usize)>> for MassSpectrum {
    type Error = Error;
    fn try_from(v: Vec<(f64, usize)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MassSpectrum> for Vec<(f64, usize)> {
    fn from(s: MassSpectrum) -> Self {
        s.entries
    }
}

/// Parses `"m:mult,m:mult"`, e.g. `"0:1,1.0:2"`.
impl FromStr for MassSpectrum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (m, k) = part
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("expected 'mass:multiplicity', got '{part}'")))?;
            let m: f64 = m
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad mass '{m}'")))?;
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad multiplicity '{k}'")))?;
            entries.push((m, k));
        }
        Self::new(entries)
    }
}

impl fmt::Display for MassSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|(m, k)| format!("{m}:{k}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Periodic spatial lattice with a finite time window of `n_steps` slices
/// `t = 0, …, n_steps − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpacetime {
    n_sites: usize,
    n_steps: usize,
    dt: f64,
    spectrum: MassSpectrum,
}

impl LatticeSpacetime {
    pub fn new(n_sites: usize, n_steps: usize, dt: f64, spectrum: MassSpectrum) -> Result<Self> {
        if n_sites < MIN_SITES {
            return Err(Error::InvalidSpacetime(format!("n_sites = {n_sites} < {MIN_SITES}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidSpacetime("n_steps must be positive".into()));
        }
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(Error::InvalidSpacetime(format!("dt = {dt} outside (0, {MAX_DT}]")));
        }
        // Verlet stability for the stiffest mode, λ_max = m_max² + 4.
        let m_max = spectrum.entries().last().map(|e| e.0).unwrap_or(0.0);
        if dt * dt * (m_max * m_max + 4.0) >= 4.0 {
            return Err(Error::InvalidSpacetime(format!(
                "dt = {dt} unstable for mass {m_max}: need dt²(m²+4) < 4"
            )));
        }
        let st = Self { n_sites, n_steps, dt, spectrum };
        st.check_mass_separation()?;
        Ok(st)
    }

    fn check_mass_separation(&self) -> Result<()> {
        let masses: Vec<f64> = self.spectrum.entries().iter().map(|e| e.0).collect();
        for (i, &a) in masses.iter().enumerate() {
            for &b in &masses[i + 1..] {
                for k in 0..self.n_sites {
                    let wa = lattice_frequency(a, k, self.n_sites, self.dt);
                    let wb = lattice_frequency(b, k, self.n_sites, self.dt);
                    if (wa - wb).abs() < 1e-9 {
                        return Err(Error::MassCollision(a, b));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spectrum(&self) -> &MassSpectrum {
        &self.spectrum
    }

    pub fn species_count(&self) -> usize {
        self.spectrum.total_species()
    }

    /// Real dimension of the Cauchy-data space, 2·|ν|·N.
    pub fn phase_dim(&self) -> usize {
        2 * self.species_count() * self.n_sites
    }

    /// Index of the canonical basis vector for `(species, component, site)`;
    /// component 0 is the field value, 1 the momentum.
    #[inline]
    pub fn index(&self, species: usize, component: usize, site: usize) -> usize {
        (species * 2 + component) * self.n_sites + site
    }

    /// Inverse of [`index`](Self::index).
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let site = idx % self.n_sites;
        let sc = idx / self.n_sites;
        (sc / 2, sc % 2, site)
    }

    /// The same lattice with a different time window.
    pub fn with_steps(&self, n_steps: usize) -> Result<Self> {
        Self::new(self.n_sites, n_steps, self.dt, self.spectrum.clone())
    }

    pub fn wrap(&self, x: i64) -> usize {
        x.rem_euclid(self.n_sites as i64) as usize
    }
}

/// Angular frequency ω of lattice mode `k` under one kick-drift-kick step,
/// cos(ω dt) = 1 − dt²λ/2 with λ = m² + 4 sin²(πk/N).
pub fn lattice_frequency(mass: f64, k: usize, n_sites: usize, dt: f64) -> f64 {
    let lambda = mode_eigenvalue(mass, k, n_sites);
    (1.0 - 0.5 * dt * dt * lambda).clamp(-1.0, 1.0).acos() / dt
}

/// λ_k = m² + 4 sin²(πk/N), the eigenvalue of −Δ + m² on mode k.
pub fn mode_eigenvalue(mass: f64, k: usize, n_sites: usize) -> f64 {
    let s = (std::f64::consts::PI * k as f64 / n_sites as f64).sin();
    mass * mass + 4.0 * s * s
}

/// Contiguous range of sites on the spatial circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteInterval {
    pub start: usize,
    pub len: usize,
}

impl SiteInterval {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    /// Inclusive range `[first, last]`.
    pub fn inclusive(first: usize, last: usize) -> Self {
        Self { start: first, len: last + 1 - first }
    }

    pub fn sites(&self, n_sites: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).map(move |i| (self.start + i) % n_sites)
    }

    /// Circular gap in sites between two disjoint intervals (0 if they overlap
    /// or touch).
    fn separation(&self, other: &SiteInterval, n_sites: usize) -> usize {
        let mine: BTreeSet<usize> = self.sites(n_sites).collect();
        let theirs: BTreeSet<usize> = other.sites(n_sites).collect();
        let mut best = usize::MAX;
        for &a in &mine {
            for &b in &theirs {
                let d = a.abs_diff(b);
                best = best.min(d.min(n_sites - d));
            }
        }
        best.saturating_sub(1)
    }
}

/// A lattice spacetime point `(t, x)`; `t` may lie outside the time window.
pub type Cell = (i64, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiamondComponent {
    pub base_slice: i64,
    pub base: SiteInterval,
}

/// Union of causally disjoint discrete diamonds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    n_sites: usize,
    components: Vec<DiamondComponent>,
    cells: BTreeSet<Cell>,
}

impl Region {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn components(&self) -> &[DiamondComponent] {
        &self.components
    }

    pub fn cells(&self) -> &BTreeSet<Cell> {
        &self.cells
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.cells.contains(&cell)
    }

    /// Cells of one component.
    pub fn component_cells(&self, i: usize) -> BTreeSet<Cell> {
        let c = &self.components[i];
        diamond_cells(c.base_slice, c.base, self.n_sites)
    }

    /// Index of the component containing `cell`.
    pub fn component_of(&self, cell: Cell) -> Option<usize> {
        (0..self.components.len()).find(|&i| self.component_cells(i).contains(&cell))
    }

    pub fn within_window(&self, n_steps: usize) -> bool {
        self.cells.iter().all(|&(t, _)| t >= 0 && (t as usize) < n_steps)
    }

    /// The region moved by `(dt, dx)`.
    pub fn translated(&self, dt: i64, dx: i64) -> Region {
        let n = self.n_sites as i64;
        Region {
            n_sites: self.n_sites,
            components: self
                .components
                .iter()
                .map(|c| DiamondComponent {
                    base_slice: c.base_slice + dt,
                    base: SiteInterval {
                        start: (c.base.start as i64 + dx).rem_euclid(n) as usize,
                        len: c.base.len,
                    },
                })
                .collect(),
            cells: self
                .cells
                .iter()
                .map(|&(t, x)| (t + dt, (x as i64 + dx).rem_euclid(n) as usize))
                .collect(),
        }
    }
}

fn diamond_cells(base_slice: i64, base: SiteInterval, n_sites: usize) -> BTreeSet<Cell> {
    let mut cells = BTreeSet::new();
    let mut delta = 0usize;
    while 2 * delta < base.len {
        let width = base.len - 2 * delta;
        for i in 0..width {
            let x = (base.start + delta + i) % n_sites;
            cells.insert((base_slice + delta as i64, x));
            cells.insert((base_slice - delta as i64, x));
        }
        delta += 1;
    }
    cells
}

/// Discrete domain of dependence of a base interval on slice `base_slice`:
/// every point whose unit-slope light cone meets the slice only inside the
/// interval.
pub fn domain_of_dependence(
    base_slice: i64,
    base: SiteInterval,
    spacetime: &LatticeSpacetime,
) -> Result<Region> {
    let n = spacetime.n_sites();
    if base.len == 0 {
        return Err(Error::EmptyInterval);
    }
    if base.len >= n {
        return Err(Error::IntervalWrapsWholeCircle { len: base.len, n_sites: n });
    }
    let base = SiteInterval { start: base.start % n, len: base.len };
    Ok(Region {
        n_sites: n,
        components: vec![DiamondComponent { base_slice, base }],
        cells: diamond_cells(base_slice, base, n),
    })
}

/// Multi-diamond: components on arbitrary slices, pairwise causally disjoint.
pub fn multi_diamond(
    components: &[(i64, SiteInterval)],
    spacetime: &LatticeSpacetime,
) -> Result<Region> {
    let n = spacetime.n_sites();
    let mut parts = Vec::with_capacity(components.len());
    for &(slice, interval) in components {
        parts.push(domain_of_dependence(slice, interval, spacetime)?);
    }
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            let (a, b) = (&parts[i].components[0], &parts[j].components[0]);
            if a.base_slice == b.base_slice && a.base.separation(&b.base, n) == 0 {
                return Err(Error::ComponentsNotDisjoint(format!(
                    "base intervals {:?} and {:?} overlap or touch",
                    a.base, b.base
                )));
            }
            if !causally_disjoint(&parts[i].cells, &parts[j].cells, n) {
                return Err(Error::ComponentsNotDisjoint(format!(
                    "components {i} and {j} are causally connected"
                )));
            }
        }
    }
    let mut cells = BTreeSet::new();
    let mut comps = Vec::new();
    for p in parts {
        cells.extend(p.cells);
        comps.extend(p.components);
    }
    Ok(Region { n_sites: n, components: comps, cells })
}

/// `b` lies in the closed causal future of `a` on the periodic lattice.
pub fn causally_precedes(a: Cell, b: Cell, n_sites: usize) -> bool {
    let dt = b.0 - a.0;
    if dt < 0 {
        return false;
    }
    let d = a.1.abs_diff(b.1);
    let circ = d.min(n_sites - d) as i64;
    circ <= dt
}

pub fn causally_disjoint(a: &BTreeSet<Cell>, b: &BTreeSet<Cell>, n_sites: usize) -> bool {
    a.iter().all(|&p| {
        b.iter()
            .all(|&q| !causally_precedes(p, q, n_sites) && !causally_precedes(q, p, n_sites))
    })
}

/// What a morphism's source or target is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ObjectKind {
    /// The full cylinder ℤ × ℤ_N (translations act as automorphisms).
    Cylinder,
    /// Time window `t ∈ [0, steps)`; contains a Cauchy surface.
    Slab { steps: usize },
    /// Causally convex region.
    Region(Region),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocObject {
    pub n_sites: usize,
    pub spectrum: MassSpectrum,
    pub kind: ObjectKind,
}

impl LocObject {
    pub fn cylinder(st: &LatticeSpacetime) -> Self {
        Self { n_sites: st.n_sites(), spectrum: st.spectrum().clone(), kind: ObjectKind::Cylinder }
    }

    pub fn slab(st: &LatticeSpacetime, steps: usize) -> Self {
        Self {
            n_sites: st.n_sites(),
            spectrum: st.spectrum().clone(),
            kind: ObjectKind::Slab { steps },
        }
    }

    pub fn region(st: &LatticeSpacetime, region: Region) -> Self {
        Self {
            n_sites: st.n_sites(),
            spectrum: st.spectrum().clone(),
            kind: ObjectKind::Region(region),
        }
    }

    fn contains_cell(&self, cell: Cell) -> bool {
        match &self.kind {
            ObjectKind::Cylinder => true,
            ObjectKind::Slab { steps } => cell.0 >= 0 && (cell.0 as usize) < *steps,
            ObjectKind::Region(r) => r.contains(cell),
        }
    }

    /// Whether `self` shifted by `(dt, dx)` lies inside `other`.
    fn embeds_into(&self, other: &LocObject, dt: i64, dx: i64) -> bool {
        let n = self.n_sites as i64;
        match (&self.kind, &other.kind) {
            (_, ObjectKind::Cylinder) => true,
            (ObjectKind::Cylinder, _) => false,
            (ObjectKind::Slab { steps }, ObjectKind::Slab { steps: outer }) => {
                dt >= 0 && (dt as usize) + steps <= *outer
            }
            (ObjectKind::Slab { .. }, ObjectKind::Region(_)) => false,
            (ObjectKind::Region(r), _) => r
                .cells()
                .iter()
                .all(|&(t, x)| other.contains_cell((t + dt, (x as i64 + dx).rem_euclid(n) as usize))),
        }
    }
}

/// Classification of a morphism by its shape.
#[derive(Debug, Clone, PartialEq)]
pub enum MorphismKind {
    Translation { dt: i64, dx: i64 },
    RegionInclusion(Region),
    CauchyExtension { source_steps: usize, target_steps: usize },
    /// Composite that is none of the generating kinds (e.g. a translated inclusion).
    Embedding,
}

/// Embedding `source → target` acting on points as `(t, x) ↦ (t + dt, x + dx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeMorphism {
    source: LocObject,
    target: LocObject,
    dt: i64,
    dx: i64,
}

impl LatticeMorphism {
    pub fn new(source: LocObject, target: LocObject, dt: i64, dx: i64) -> Result<Self> {
        if source.n_sites != target.n_sites || source.spectrum != target.spectrum {
            return Err(Error::DomainMismatch("objects live on different lattices".into()));
        }
        let dx = dx.rem_euclid(source.n_sites as i64);
        if !source.embeds_into(&target, dt, dx) {
            return Err(Error::DomainMismatch(format!(
                "source shifted by ({dt}, {dx}) is not contained in the target"
            )));
        }
        Ok(Self { source, target, dt, dx })
    }

    pub fn translation(st: &LatticeSpacetime, dt: i64, dx: i64) -> Self {
        let obj = LocObject::cylinder(st);
        Self::new(obj.clone(), obj, dt, dx).expect("cylinder translations always embed")
    }

    pub fn identity(obj: LocObject) -> Self {
        Self { source: obj.clone(), target: obj, dt: 0, dx: 0 }
    }

    pub fn region_inclusion(st: &LatticeSpacetime, region: Region) -> Self {
        Self::new(LocObject::region(st, region), LocObject::cylinder(st), 0, 0)
            .expect("regions embed in the cylinder")
    }

    /// Inclusion of one region in another.
    pub fn inclusion(st: &LatticeSpacetime, inner: Region, outer: Region) -> Result<Self> {
        Self::new(LocObject::region(st, inner), LocObject::region(st, outer), 0, 0)
    }

    pub fn cauchy_extension(
        st: &LatticeSpacetime,
        source_steps: usize,
        target_steps: usize,
    ) -> Result<Self> {
        Self::new(LocObject::slab(st, source_steps), LocObject::slab(st, target_steps), 0, 0)
    }

    pub fn source(&self) -> &LocObject {
        &self.source
    }

    pub fn target(&self) -> &LocObject {
        &self.target
    }

    pub fn shift(&self) -> (i64, i64) {
        (self.dt, self.dx)
    }

    pub fn kind(&self) -> MorphismKind {
        match (&self.source.kind, &self.target.kind) {
            (ObjectKind::Cylinder, ObjectKind::Cylinder) => {
                MorphismKind::Translation { dt: self.dt, dx: self.dx }
            }
            (ObjectKind::Slab { steps: s }, ObjectKind::Slab { steps: t })
                if self.dt == 0 && self.dx == 0 =>
            {
                MorphismKind::CauchyExtension { source_steps: *s, target_steps: *t }
            }
            (ObjectKind::Region(r), ObjectKind::Cylinder) if self.dt == 0 && self.dx == 0 => {
                MorphismKind::RegionInclusion(r.clone())
            }
            _ => MorphismKind::Embedding,
        }
    }

    /// Whether the image contains a Cauchy surface of the target.
    pub fn is_cauchy(&self) -> bool {
        matches!(
            (&self.source.kind, &self.target.kind),
            (ObjectKind::Cylinder, ObjectKind::Cylinder)
                | (ObjectKind::Slab { .. }, ObjectKind::Slab { .. })
                | (ObjectKind::Slab { .. }, ObjectKind::Cylinder)
        )
    }
}

/// `f ∘ g`: first `g`, then `f`.
pub fn compose(f: &LatticeMorphism, g: &LatticeMorphism) -> Result<LatticeMorphism> {
    if g.target != f.source {
        return Err(Error::DomainMismatch("codomain of g differs from domain of f".into()));
    }
    LatticeMorphism::new(g.source.clone(), f.target.clone(), g.dt + f.dt, g.dx + f.dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(n: usize, steps: usize) -> LatticeSpacetime {
        LatticeSpacetime::new(n, steps, 0.5, "1:1".parse().unwrap()).unwrap()
    }

    #[test]
    fn spectrum_parsing() {
        let s: MassSpectrum = "0:1,1.0:2".parse().unwrap();
        assert_eq!(s.total_species(), 3);
        assert_eq!(s.massless_count(), 1);
        assert_eq!(s.species_masses(), vec![0.0, 1.0, 1.0]);
        assert_eq!(s.orthogonal_algebra_dim(), 1);
        assert!("1:0".parse::<MassSpectrum>().is_err());
        assert!("2:1,1:1".parse::<MassSpectrum>().is_err());
        assert!("-1:1".parse::<MassSpectrum>().is_err());
        assert!("1".parse::<MassSpectrum>().is_err());
        assert!("".parse::<MassSpectrum>().is_err());
        assert_eq!("1:2,2:3".parse::<MassSpectrum>().unwrap().to_string(), "1:2,2:3");
    }

    #[test]
    fn spacetime_validation() {
        let s: MassSpectrum = "1:1".parse().unwrap();
        assert!(LatticeSpacetime::new(3, 8, 0.5, s.clone()).is_err());
        assert!(LatticeSpacetime::new(8, 8, 0.95, s.clone()).is_err());
        assert!(LatticeSpacetime::new(8, 0, 0.5, s.clone()).is_err());
        // m = 2 needs dt < 1/√2.
        assert!(LatticeSpacetime::new(8, 8, 0.8, "2:1".parse().unwrap()).is_err());
        assert!(LatticeSpacetime::new(8, 8, 0.5, "1:2,2:3".parse().unwrap()).is_ok());
    }

    #[test]
    fn diamond_example() {
        let st = st(11, 20);
        let d = domain_of_dependence(0, SiteInterval::inclusive(3, 7), &st).unwrap();
        let top = d.cells().iter().map(|c| c.0).max().unwrap();
        let bottom = d.cells().iter().map(|c| c.0).min().unwrap();
        assert_eq!((top, bottom), (2, -2));
        assert!(d.contains((2, 5)) && d.contains((-2, 5)));
        assert!(!d.contains((2, 4)));
        assert_eq!(d.cells().len(), 5 + 2 * 3 + 2 * 1);
    }

    #[test]
    fn diamond_errors() {
        let st = st(8, 8);
        assert_eq!(
            domain_of_dependence(0, SiteInterval::new(0, 8), &st),
            Err(Error::IntervalWrapsWholeCircle { len: 8, n_sites: 8 })
        );
        assert_eq!(domain_of_dependence(0, SiteInterval::new(0, 0), &st), Err(Error::EmptyInterval));
    }

    #[test]
    fn single_site_diamond() {
        let st = st(8, 8);
        let d = domain_of_dependence(3, SiteInterval::new(6, 1), &st).unwrap();
        assert_eq!(d.cells().iter().copied().collect::<Vec<_>>(), vec![(3, 6)]);
    }

    #[test]
    fn translation_composition() {
        let st = st(16, 8);
        let f = LatticeMorphism::translation(&st, 1, 2);
        let g = LatticeMorphism::translation(&st, 2, 3);
        assert_eq!(compose(&f, &g).unwrap().kind(), MorphismKind::Translation { dt: 3, dx: 5 });
        let id = LatticeMorphism::identity(LocObject::cylinder(&st));
        assert_eq!(compose(&f, &id).unwrap(), f);
        assert_eq!(compose(&id, &f).unwrap(), f);
    }

    #[test]
    fn inclusion_transitivity() {
        let st = st(12, 8);
        let d1 = domain_of_dependence(2, SiteInterval::inclusive(2, 9), &st).unwrap();
        let d2 = domain_of_dependence(2, SiteInterval::inclusive(4, 6), &st).unwrap();
        let f = LatticeMorphism::region_inclusion(&st, d1.clone());
        let g = LatticeMorphism::inclusion(&st, d2.clone(), d1.clone()).unwrap();
        assert_eq!(compose(&f, &g).unwrap().kind(), MorphismKind::RegionInclusion(d2.clone()));
        // The bigger diamond is not inside the smaller one.
        assert!(LatticeMorphism::inclusion(&st, d1.clone(), d2).is_err());
        // Mismatched composition.
        assert!(compose(&g, &f).is_err());
    }

    #[test]
    fn cauchy_extension_rules() {
        let st = st(8, 8);
        let e = LatticeMorphism::cauchy_extension(&st, 4, 8).unwrap();
        assert!(e.is_cauchy());
        assert_eq!(e.kind(), MorphismKind::CauchyExtension { source_steps: 4, target_steps: 8 });
        assert!(LatticeMorphism::cauchy_extension(&st, 8, 4).is_err());
        let other = LatticeSpacetime::new(10, 8, 0.5, "1:1".parse().unwrap()).unwrap();
        assert!(LatticeMorphism::new(LocObject::slab(&st, 4), LocObject::slab(&other, 8), 0, 0).is_err());
    }

    #[test]
    fn multi_diamond_rejects_touching_components() {
        let st = st(12, 8);
        assert!(multi_diamond(&[(0, SiteInterval::new(0, 3)), (0, SiteInterval::new(3, 3))], &st).is_err());
        let r = multi_diamond(&[(0, SiteInterval::new(0, 3)), (0, SiteInterval::new(5, 3))], &st).unwrap();
        assert_eq!(r.components().len(), 2);
        assert_eq!(r.component_of((0, 6)), Some(1));
        assert_eq!(r.component_of((0, 4)), None);
    }
}
