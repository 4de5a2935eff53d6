//! The verification suites. Each takes its own seeded generator and returns a
//! finalized [`SuiteReport`]; an error from the core library becomes a failed
//! `error` check rather than aborting the run.

use std::collections::BTreeSet;
use std::sync::Arc;

use lcqft::ccr::oracle::WeylConverter;
use lcqft::ccr::{AlgebraElement, AlgebraMap, PhaseSpace};
use lcqft::classical::{
    propagate_test_function, rce_derivative, rce_matrix, relative_cauchy_evolution, symplectic_form,
    symplectic_matrix, translation_matrix, Profile, Solution, TestFunction, C64,
};
use lcqft::classifier::{classify as run_classifier, mode_count_commutant_dimension};
use lcqft::gauge::{ell_functional, massless_species, GaugeElement};
use lcqft::lattice::{causally_disjoint, domain_of_dependence, multi_diamond, LatticeSpacetime, SiteInterval};
use lcqft::linalg::max_abs;
use lcqft::observables::{central_elements, generator_sample, invariant_projection_check, species_bilinear, Bilinear};
use lcqft::sampling;
use lcqft::state::{wick_word, QuasifreeState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, Suite};
use crate::report::{Check, ClassificationJson, SuiteReport};

type St = Arc<LatticeSpacetime>;

pub fn run(suite: Suite, cfg: &RunConfig, st: &St, rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut r = SuiteReport::new(suite.name());
    let out = match suite {
        Suite::Ccr => ccr(cfg, st, rng, &mut r),
        Suite::Gauge => gauge(cfg, st, rng, &mut r),
        Suite::Rce => rce(cfg, st, rng, &mut r),
        Suite::Classify => classify(cfg, st, rng, &mut r),
        Suite::State => state(cfg, st, rng, &mut r),
        Suite::Observables => observables(cfg, st, rng, &mut r),
        Suite::All => unreachable!("expanded by RunConfig"),
    };
    if let Err(e) = out {
        r.findings.push(format!("error: {e}"));
        r.check(Check::below("error", 1.0, 0.0));
    }
    r.finalize()
}

/// ‖a − b‖ relative to the size of `a`, floored at 1.
fn rel(a: &AlgebraElement, b: &AlgebraElement) -> lcqft::Result<f64> {
    Ok(a.distance(b)? / a.max_abs().max(1.0))
}

fn ccr(cfg: &RunConfig, st: &St, rng: &mut ChaCha8Rng, r: &mut SuiteReport) -> lcqft::Result<()> {
    let space = PhaseSpace::of(st);
    let mut relations: f64 = 0.0;
    for _ in 0..200 {
        let (a, b) = (sampling::complex_solution(rng, st), sampling::complex_solution(rng, st));
        let (fa, fb) = (AlgebraElement::field(&a), AlgebraElement::field(&b));
        let want = AlgebraElement::constant(space, C64::new(0.0, 1.0) * symplectic_form(&a, &b)?);
        relations = relations.max(rel(&want, &fa.commutator(&fb)?)?);
        relations = relations.max(rel(&AlgebraElement::field(&a.conj()), &fa.star())?);
        let c = C64::new(sampling::normal(rng), sampling::normal(rng));
        let lin = AlgebraElement::field(&a.add(&b.scale(c))?);
        relations = relations.max(rel(&lin, &fa.add(&fb.scale(c))?)?);
    }
    r.check(Check::below("ccr.relations", relations, cfg.tolerance("ccr.relations")));

    let pool = sampling::contraction_pool(st);
    let mut conv = WeylConverter::new(space);
    let mut assoc: f64 = 0.0;
    for _ in 0..50 {
        let (a, ea) = sampling::integer_element(rng, space, &pool, 3, 3);
        let (b, eb) = sampling::integer_element(rng, space, &pool, 3, 3);
        let (c, ec) = sampling::integer_element(rng, space, &pool, 3, 3);
        let exact = conv.convert_exact(&ea).product(&conv.convert_exact(&eb)).product(&conv.convert_exact(&ec));
        let left = a.product(&b)?.product(&c)?;
        let right = a.product(&b.product(&c)?)?;
        assoc = assoc.max(conv.convert(&left)?.distance(&exact)).max(conv.convert(&right)?.distance(&exact));
    }
    r.check(Check::below("ccr.associativity", assoc, cfg.tolerance("ccr.associativity")));
    r.dimensions.insert("pairs".into(), 200);
    r.dimensions.insert("triples".into(), 50);
    r.dimensions.insert("phase_dim".into(), st.phase_dim() as i64);
    Ok(())
}

fn gauge(cfg: &RunConfig, st: &St, rng: &mut ChaCha8Rng, r: &mut SuiteReport) -> lcqft::Result<()> {
    let space = PhaseSpace::of(st);
    let spectrum = st.spectrum();
    let mut hom: f64 = 0.0;
    for _ in 0..100 {
        let g = GaugeElement::random(rng, spectrum, true);
        let h = GaugeElement::random(rng, spectrum, true);
        let a = sampling::element(rng, space, 3, 4);
        let (zg, zh, zgh) = (g.quantum_map(st)?, h.quantum_map(st)?, g.compose(&h)?.quantum_map(st)?);
        let composed = zgh.apply(&a)?;
        hom = hom.max(rel(&composed, &zg.apply(&zh.apply(&a)?)?)?);
        let inv = g.inverse().quantum_map(st)?;
        hom = hom.max(rel(&a, &inv.apply(&zg.apply(&a)?)?)?);
    }
    r.check(Check::below("gauge.homomorphism", hom, cfg.tolerance("gauge.homomorphism")));

    // every spatial shift, and time shifts within two steps
    let (mut spatial, mut temporal): (f64, f64) = (0.0, 0.0);
    let mut translations = 0;
    for dt in -2i64..=2 {
        for dx in 0..st.n_sites() as i64 {
            let t = AlgebraMap::lift(st, &translation_matrix(st, dt, dx), 1e-10)?;
            let z = GaugeElement::random(rng, spectrum, true).quantum_map(st)?;
            let a = sampling::element(rng, space, 3, 4);
            let lhs = z.apply(&t.apply(&a)?)?;
            let res = rel(&lhs, &t.apply(&z.apply(&a)?)?)?;
            if dt == 0 {
                spatial = spatial.max(res);
            } else {
                temporal = temporal.max(res);
            }
            translations += 1;
        }
    }
    r.check(Check::below("gauge.naturality.spatial", spatial, cfg.tolerance("gauge.naturality")));
    r.check(Check::below("gauge.naturality.temporal", temporal, cfg.tolerance("gauge.naturality")));
    r.dimensions.insert("translations".into(), translations);

    let n = st.n_sites();
    let mut violations = 0i64;
    for _ in 0..5 {
        let (start, len) = (rng.random_range(0..n), rng.random_range(1..n));
        let region = domain_of_dependence(0, SiteInterval::new(start, len), st)?;
        let inside: Vec<u32> =
            (0..st.phase_dim()).filter(|&i| region.contains((0, st.unindex(i).2))).map(|i| i as u32).collect();
        let (a, _) = sampling::integer_element(rng, space, &inside, 3, 4);
        let z = GaugeElement::random(rng, spectrum, true).quantum_map(st)?;
        if !z.apply(&a)?.support().iter().all(|i| inside.contains(i)) {
            violations += 1;
        }
    }
    r.expect_eq("gauge.locality_violations", violations, 0);
    r.dimensions.insert("diamonds".into(), 5);
    Ok(())
}

fn rce(cfg: &RunConfig, st: &St, rng: &mut ChaCha8Rng, r: &mut SuiteReport) -> lcqft::Result<()> {
    let space = PhaseSpace::of(st);
    let perts: Vec<_> = [false, true, true].iter().map(|&stiff| (stiff, sampling::random_perturbation(rng, st, stiff))).collect();
    let j = symplectic_matrix(st);
    let massless = massless_species(st);
    let (mut sympl, mut inter, mut charge, mut mass_drift): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for (stiff, v) in &perts {
        let m = rce_matrix(st, v)?;
        sympl = sympl.max(max_abs(&(m.transpose() * &j * &m - &j)));
        let lifted = AlgebraMap::lift(st, &m, 1e-10)?;
        for _ in 0..20 {
            let z = GaugeElement::random(rng, st.spectrum(), false).quantum_map(st)?;
            let a = sampling::element(rng, space, 3, 3);
            let lhs = z.apply(&lifted.apply(&a)?)?;
            inter = inter.max(rel(&lhs, &lifted.apply(&z.apply(&a)?)?)?);
        }
        if !massless.is_empty() {
            let ell: Vec<f64> = massless.iter().map(|_| sampling::normal(rng)).collect();
            let phi = sampling::complex_solution(rng, st);
            let moved = relative_cauchy_evolution(&phi, v)?;
            let drift = (ell_functional(&ell, &moved)? - ell_functional(&ell, &phi)?).norm();
            if *stiff {
                charge = charge.max(drift);
            } else {
                mass_drift = mass_drift.max(drift);
            }
        }
    }
    r.check(Check::below("rce.symplectic", sympl, cfg.tolerance("rce.symplectic")));
    r.check(Check::below("rce.intertwining", inter, cfg.tolerance("rce.intertwining")));
    if !massless.is_empty() {
        r.check(Check::below("rce.charge.stiffness", charge, cfg.tolerance("rce.charge")));
        r.findings.push(format!(
            "a mass shift on a massless species moves the affine charge <l, phi> by up to {mass_drift:.3e}; link stiffness keeps it"
        ));
    }

    // a mass bump in the middle of the window, probed by point sources that
    // are causally disjoint from its support
    let (n, nt) = (st.n_sites(), st.n_steps());
    let bump = sampling::bump_perturbation(st, nt / 2, 0, 1, 0.5, false);
    let supp: BTreeSet<(i64, usize)> = bump.support().into_iter().map(|(t, x)| (t as i64, x)).collect();
    let mut loc: f64 = 0.0;
    let mut sources = 0i64;
    for t in 1..nt - 1 {
        for x in 0..n {
            if !causally_disjoint(&[(t as i64, x)].into(), &supp, n) {
                continue;
            }
            let phi = propagate_test_function(&TestFunction::point(st, rng.random_range(0..st.species_count()), t, x, C64::new(1.0, 0.0))?)?;
            loc = loc.max(relative_cauchy_evolution(&phi, &bump)?.max_abs_diff(&phi));
            sources += 1;
        }
    }
    r.dimensions.insert("localization.sources".into(), sources);
    if sources == 0 {
        r.findings.push("no point source fits causally disjoint from the perturbation on this lattice".into());
    } else {
        r.check(Check::below("rce.localization", loc, cfg.tolerance("rce.localization")));
    }

    let mut skew: f64 = 0.0;
    for (_, v) in &perts {
        for _ in 0..5 {
            let (a, b) = (sampling::real_solution(rng, st), sampling::real_solution(rng, st));
            let (ab, ba) = (rce_derivative(v, &a, &b)?, rce_derivative(v, &b, &a)?);
            skew = skew.max((ab - ba).norm() / ab.norm().max(1.0));
        }
    }
    r.check(Check::below("rce.skew", skew, cfg.tolerance("rce.skew")));
    r.dimensions.insert("perturbations".into(), perts.len() as i64);
    Ok(())
}

fn classify(cfg: &RunConfig, st: &St, rng: &mut ChaCha8Rng, r: &mut SuiteReport) -> lcqft::Result<()> {
    let mut reports = Vec::new();
    for _ in 0..5 {
        let mut sub = ChaCha8Rng::seed_from_u64(rng.random());
        reports.push(run_classifier(&mut sub, st, true)?);
    }
    let first = &reports[0];
    r.expect_eq("dimension", first.dimension as i64, st.spectrum().orthogonal_algebra_dim() as i64);
    r.expect_eq("commutant_dimension", first.commutant_dimension as i64, mode_count_commutant_dimension(st) as i64);
    r.dimensions.insert("zero_mode_quarantined".into(), first.zero_mode_quarantined as i64);
    let dims: BTreeSet<usize> = reports.iter().map(|c| c.dimension).collect();
    r.expect_eq("distinct_dimensions_over_seeds", dims.len() as i64, 1);
    let all_matched = reports.iter().all(|c| c.matched);
    r.flags.insert("match".into(), all_matched);
    r.expect_eq("matched", all_matched as i64, 1);
    if !all_matched {
        r.findings.push(format!("nullspace dimensions {dims:?} do not match the orthogonal generators"));
    }
    let soundness = reports.iter().map(|c| c.soundness.max().max(c.reflections.max())).fold(0.0, f64::max);
    r.check(Check::below("classify.soundness", soundness, cfg.tolerance("classify.soundness")));
    if !first.affine.is_empty() {
        let affine = reports.iter().flat_map(|c| &c.affine).map(|a| a.homomorphism.max(a.one_parameter)).fold(0.0, f64::max);
        r.check(Check::below("classify.affine", affine, cfg.tolerance("classify.affine")));
    }
    if first.zero_mode_quarantined > 0 {
        r.findings.push(format!(
            "{} commutant directions acting on the massless zero mode are quarantined",
            first.zero_mode_quarantined
        ));
    }
    r.dimensions.insert("seeds".into(), reports.len() as i64);
    r.classification = Some(ClassificationJson::from(first));
    Ok(())
}

fn state(cfg: &RunConfig, st: &St, rng: &mut ChaCha8Rng, r: &mut SuiteReport) -> lcqft::Result<()> {
    let w = QuasifreeState::vacuum(st);
    let space = w.space();
    let mut min_pos = f64::INFINITY;
    for _ in 0..500 {
        let a = sampling::element(rng, space, 2, 4);
        min_pos = min_pos.min(w.evaluate(&a.star().product(&a)?)?.re);
    }
    let tol = cfg.tolerance("state.positivity");
    r.check(Check::above("state.positivity", min_pos, -tol));

    let mut inv: f64 = 0.0;
    for _ in 0..200 {
        let a = sampling::element(rng, space, 4, 4);
        let g = GaugeElement::random(rng, st.spectrum(), false);
        let pulled = w.pull_back(&g.quantum_map(st)?)?;
        inv = inv.max((pulled.evaluate(&a)? - w.evaluate(&a)?).norm());
    }
    r.check(Check::below("state.invariance", inv, cfg.tolerance("state.invariance")));

    let k = st.spectrum().massless_count();
    if k > 0 {
        let mut one: f64 = 0.0;
        for _ in 0..50 {
            let ell: Vec<f64> = (0..k).map(|_| sampling::normal(rng)).collect();
            let phi = sampling::complex_solution(rng, st);
            let z = GaugeElement::shift(st.spectrum(), ell.clone())?.quantum_map(st)?;
            let got = w.pull_back(&z)?.evaluate(&AlgebraElement::field(&phi))?;
            one = one.max((got - ell_functional(&ell, &phi)?).norm());
        }
        r.check(Check::below("state.one_point", one, cfg.tolerance("state.one_point")));
        r.findings.push(format!("{} massless zero modes use the reference two-point function", w.reference_modes().len()));
    } else {
        r.findings.push("no massless species: affine one-point check skipped".into());
    }

    let mut wick: f64 = 0.0;
    for _ in 0..50 {
        let word: Vec<usize> = (0..4).map(|_| rng.random_range(0..st.phase_dim())).collect();
        let mut prod = AlgebraElement::unit(space);
        for &i in &word {
            prod = prod.product(&AlgebraElement::field(&Solution::basis(st, i)))?;
        }
        wick = wick.max((w.evaluate(&prod)? - wick_word(&w, &word)).norm());
    }
    r.check(Check::below("state.wick", wick, cfg.tolerance("state.wick")));
    r.flags.insert("time_invariant".into(), w.is_time_invariant());
    r.dimensions.insert("reference_modes".into(), w.reference_modes().len() as i64);
    Ok(())
}

fn random_profile(rng: &mut ChaCha8Rng, n: usize) -> Profile {
    let q: Vec<f64> = (0..n).map(|_| sampling::normal(rng)).collect();
    let p: Vec<f64> = (0..n).map(|_| sampling::normal(rng)).collect();
    Profile::real(&q, &p)
}

fn observables(cfg: &RunConfig, st: &St, rng: &mut ChaCha8Rng, r: &mut SuiteReport) -> lcqft::Result<()> {
    let tol = cfg.tolerance("observables.invariance");
    let generators = generator_sample(st)?;
    let mut inv: f64 = 0.0;
    for g in &generators {
        let c = invariant_projection_check(rng, st, g, 2)?;
        inv = inv.max(c.group_residual.max(c.affine_derivative) / g.max_abs().max(1.0));
    }
    r.check(Check::below("observables.invariance", inv, tol));
    r.dimensions.insert("generators".into(), generators.len() as i64);

    // products of generators stay invariant
    let mut closure: f64 = 0.0;
    for _ in 0..20 {
        let (a, b) = (&generators[rng.random_range(0..generators.len())], &generators[rng.random_range(0..generators.len())]);
        let prod = a.product(b)?.add(&a.star())?;
        let c = invariant_projection_check(rng, st, &prod, 2)?;
        closure = closure.max(c.group_residual.max(c.affine_derivative) / prod.max_abs().max(1.0));
    }
    r.check(Check::below("observables.closure", closure, tol));

    let n = st.n_sites();
    let blocks = st.spectrum().blocks();
    if blocks.len() >= 2 {
        let mut mixing = f64::INFINITY;
        for _ in 0..10 {
            let a = blocks[0].1.start + rng.random_range(0..blocks[0].1.len());
            let i = rng.random_range(1..blocks.len());
            let b = blocks[i].1.start + rng.random_range(0..blocks[i].1.len());
            let (f, g) = (random_profile(rng, n), random_profile(rng, n));
            let el = species_bilinear(st, a, &f, b, &g)?;
            mixing = mixing.min(invariant_projection_check(rng, st, &el, 5)?.group_residual);
        }
        r.check(Check::above("observables.mixing", mixing, cfg.tolerance("observables.mixing")));
    } else {
        r.findings.push("single mass: no mass-mixing bilinears to test".into());
    }

    match central_elements(st) {
        Ok(central) => {
            let comm = central.iter().map(|c| c.max_commutator).fold(0.0, f64::max);
            r.check(Check::below("observables.central", comm, cfg.tolerance("observables.central")));
            for c in &central {
                let nonzero = c.element.max_abs();
                r.check(Check::above(&format!("central.s{}.norm", c.species), nonzero, 0.5));
                r.flags.insert(format!("central.s{}.fixed_by_affine", c.species), c.fixed_by_affine);
                r.flags.insert(format!("central.s{}.fixed_by_orthogonal", c.species), c.fixed_by_orthogonal);
            }
            r.findings.push(format!(
                "{} nonzero central elements Phi(chi) commute with every generator: the constant solutions obstruct a trivial centre",
                central.len()
            ));
            r.findings.push("<l, chi> = 0 for every l, so each Phi(chi) is fixed by the affine shifts".into());
        }
        Err(lcqft::Error::NoMasslessSpecies) => r.findings.push("no massless species: no central elements".into()),
        Err(e) => return Err(e),
    }

    // two diamonds on opposite sides of the circle
    if n >= 6 {
        let region = multi_diamond(&[(0, SiteInterval::new(0, 2)), (0, SiteInterval::new(n / 2, 2))], st)?;
        let bump = |x: usize| {
            let mut q = vec![0.0; n];
            q[x] = 1.0;
            Profile::real(&q, &vec![0.0; n])
        };
        let b = Bilinear::in_region(st, &region, blocks[0].0, &bump(0), &bump(n / 2))?;
        let c = invariant_projection_check(rng, st, &b.element, 5)?;
        r.check(Check::below("observables.cross_component", c.group_residual.max(c.affine_derivative), tol));
        r.flags.insert("cross_component.in_true_algebra".into(), b.in_true_algebra());
        r.expect_eq("cross_component.flagged", (!b.in_true_algebra()) as i64, 1);
    }
    Ok(())
}
