use std::sync::Arc;

use lcqft::ccr::oracle::WeylConverter;
use lcqft::ccr::{AlgebraElement, AlgebraMap, PhaseSpace};
use lcqft::classical::{rce_matrix, relative_cauchy_evolution, symplectic_form, translation_matrix, Solution, C64};
use lcqft::gauge::{ell_functional, GaugeElement};
use lcqft::lattice::{domain_of_dependence, LatticeSpacetime, SiteInterval};
use lcqft::sampling;
use lcqft::state::{wick_word, QuasifreeState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn st(spec: &str, n: usize, steps: usize) -> Arc<LatticeSpacetime> {
    Arc::new(LatticeSpacetime::new(n, steps, 0.5, spec.parse().unwrap()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn field_relations(seed in any::<u64>()) {
        let s = st("1:2", 8, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (sampling::complex_solution(&mut rng, &s), sampling::complex_solution(&mut rng, &s));
        let (fa, fb) = (AlgebraElement::field(&a), AlgebraElement::field(&b));
        let want = AlgebraElement::constant(fa.space(), C64::new(0.0, 1.0) * symplectic_form(&a, &b).unwrap());
        prop_assert!(fa.commutator(&fb).unwrap().distance(&want).unwrap() < 1e-12);
        prop_assert!(fa.star().distance(&AlgebraElement::field(&a.conj())).unwrap() < 1e-15);
        let c = C64::new(sampling::normal(&mut rng), sampling::normal(&mut rng));
        let lin = AlgebraElement::field(&a.add(&b.scale(c)).unwrap());
        prop_assert!(lin.distance(&fa.add(&fb.scale(c)).unwrap()).unwrap() < 1e-13);
    }

    #[test]
    fn product_is_associative_against_exact_oracle(seed in any::<u64>()) {
        let s = st("1:2", 8, 16);
        let space = PhaseSpace::of(&s);
        let pool = sampling::contraction_pool(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, ea) = sampling::integer_element(&mut rng, space, &pool, 3, 3);
        let (b, eb) = sampling::integer_element(&mut rng, space, &pool, 3, 3);
        let (c, ec) = sampling::integer_element(&mut rng, space, &pool, 3, 3);
        let mut conv = WeylConverter::new(space);
        let exact = conv.convert_exact(&ea).product(&conv.convert_exact(&eb)).product(&conv.convert_exact(&ec));
        let left = a.product(&b).unwrap().product(&c).unwrap();
        let right = a.product(&b.product(&c).unwrap()).unwrap();
        prop_assert!(conv.convert(&left).unwrap().distance(&exact) < 1e-10);
        prop_assert!(conv.convert(&right).unwrap().distance(&exact) < 1e-10);
        // star is an antihomomorphism
        let ab = a.product(&b).unwrap().star();
        prop_assert!(ab.distance(&b.star().product(&a.star()).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn gauge_action_is_a_homomorphism(seed in any::<u64>()) {
        let s = st("0:2,1:2", 6, 8);
        let space = PhaseSpace::of(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GaugeElement::random(&mut rng, s.spectrum(), true);
        let h = GaugeElement::random(&mut rng, s.spectrum(), true);
        let a = sampling::element(&mut rng, space, 3, 4);
        let (zg, zh, zgh) = (g.quantum_map(&s).unwrap(), h.quantum_map(&s).unwrap(), g.compose(&h).unwrap().quantum_map(&s).unwrap());
        let seq = zg.apply(&zh.apply(&a).unwrap()).unwrap();
        prop_assert!(seq.distance(&zgh.apply(&a).unwrap()).unwrap() < 1e-11 * a.max_abs().max(1.0));
        let b = sampling::element(&mut rng, space, 2, 3);
        let lhs = zg.apply(&a.product(&b).unwrap()).unwrap();
        let rhs = zg.apply(&a).unwrap().product(&zg.apply(&b).unwrap()).unwrap();
        prop_assert!(lhs.distance(&rhs).unwrap() < 1e-10 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn gauge_action_is_natural(seed in any::<u64>(), dx in 0i64..6, dt in -2i64..3) {
        let s = st("1:3", 6, 8);
        let space = PhaseSpace::of(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = GaugeElement::random(&mut rng, s.spectrum(), false).quantum_map(&s).unwrap();
        let a = sampling::element(&mut rng, space, 3, 4);
        let spatial = AlgebraMap::lift(&s, &translation_matrix(&s, 0, dx), 1e-12).unwrap();
        let lhs = z.apply(&spatial.apply(&a).unwrap()).unwrap();
        prop_assert!(lhs.distance(&spatial.apply(&z.apply(&a).unwrap()).unwrap()).unwrap() < 1e-14 * lhs.max_abs().max(1.0));
        let temporal = AlgebraMap::lift(&s, &translation_matrix(&s, dt, 0), 1e-10).unwrap();
        let lhs = z.apply(&temporal.apply(&a).unwrap()).unwrap();
        prop_assert!(lhs.distance(&temporal.apply(&z.apply(&a).unwrap()).unwrap()).unwrap() < 1e-10 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn gauge_action_preserves_diamond_subalgebras(seed in any::<u64>(), start in 0usize..8, len in 1usize..6) {
        let s = st("0:1,1:2", 8, 8);
        let region = domain_of_dependence(0, SiteInterval::new(start, len), &s).unwrap();
        let inside: Vec<u32> = (0..s.phase_dim()).filter(|&i| region.contains((0, s.unindex(i).2))).map(|i| i as u32).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, _) = sampling::integer_element(&mut rng, PhaseSpace::of(&s), &inside, 3, 4);
        let z = GaugeElement::random(&mut rng, s.spectrum(), true).quantum_map(&s).unwrap();
        prop_assert!(z.apply(&a).unwrap().support().iter().all(|i| inside.contains(i)));
    }

    #[test]
    fn vacuum_is_positive(seed in any::<u64>()) {
        let s = st("0.8:2", 6, 8);
        let w = QuasifreeState::vacuum(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = sampling::element(&mut rng, w.space(), 2, 4);
        let v = w.evaluate(&a.star().product(&a).unwrap()).unwrap();
        prop_assert!(v.re >= -1e-9 && v.im.abs() < 1e-10 * v.re.abs().max(1.0), "{v}");
    }

    #[test]
    fn vacuum_is_rotation_invariant(seed in any::<u64>()) {
        let s = st("1:2,2:1", 6, 8);
        let w = QuasifreeState::vacuum(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = sampling::element(&mut rng, w.space(), 4, 4);
        let g = GaugeElement::random(&mut rng, s.spectrum(), false);
        let pulled = w.pull_back(&g.quantum_map(&s).unwrap()).unwrap();
        prop_assert!((pulled.evaluate(&a).unwrap() - w.evaluate(&a).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn shifted_one_point_function(seed in any::<u64>()) {
        let s = st("0:2,1:1", 6, 8);
        let w = QuasifreeState::vacuum(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ell = vec![sampling::normal(&mut rng), sampling::normal(&mut rng)];
        let phi = sampling::complex_solution(&mut rng, &s);
        let z = GaugeElement::shift(s.spectrum(), ell.clone()).unwrap().quantum_map(&s).unwrap();
        let got = w.pull_back(&z).unwrap().evaluate(&AlgebraElement::field(&phi)).unwrap();
        prop_assert!((got - ell_functional(&ell, &phi).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn hafnian_matches_ordered_wick(seed in any::<u64>()) {
        let s = st("0.6:1,1.1:1", 4, 8);
        let w = QuasifreeState::vacuum(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let word: Vec<usize> = (0..4).map(|_| rng.random_range(0..s.phase_dim())).collect();
        let mut prod = AlgebraElement::unit(w.space());
        for &i in &word {
            prod = prod.product(&AlgebraElement::field(&Solution::basis(&s, i))).unwrap();
        }
        prop_assert!((w.evaluate(&prod).unwrap() - wick_word(&w, &word)).norm() < 1e-13);
    }
}

#[test]
fn rce_intertwines_rotations_in_the_algebra() {
    let s = st("0:1,1:2", 6, 10);
    let space = PhaseSpace::of(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for stiffness in [false, true, true] {
        let v = sampling::random_perturbation(&mut rng, &s, stiffness);
        let m = rce_matrix(&s, &v).unwrap();
        let lifted = AlgebraMap::lift(&s, &m, 1e-10).unwrap();
        for _ in 0..20 {
            let z = GaugeElement::random(&mut rng, s.spectrum(), false).quantum_map(&s).unwrap();
            let a = sampling::element(&mut rng, space, 3, 3);
            let lhs = z.apply(&lifted.apply(&a).unwrap()).unwrap();
            let rhs = lifted.apply(&z.apply(&a).unwrap()).unwrap();
            assert!(lhs.distance(&rhs).unwrap() < 1e-9 * lhs.max_abs().max(1.0));
            let phi = sampling::complex_solution(&mut rng, &s);
            let ell = [sampling::normal(&mut rng)];
            let moved = relative_cauchy_evolution(&phi, &v).unwrap();
            let drift = (ell_functional(&ell, &moved).unwrap() - ell_functional(&ell, &phi).unwrap()).norm();
            // link stiffness leaves constants as solutions, a mass shift does not
            if stiffness {
                assert!(drift < 1e-9, "{drift}");
            }
        }
    }
}

#[test]
fn mass_shift_moves_the_massless_charge() {
    let s = st("0:1", 6, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = sampling::bump_perturbation(&s, 5, 2, 1, 0.5, false);
    let phi = sampling::real_solution(&mut rng, &s);
    let moved = relative_cauchy_evolution(&phi, &v).unwrap();
    assert!((ell_functional(&[1.0], &moved).unwrap() - ell_functional(&[1.0], &phi).unwrap()).norm() > 1e-3);
}

#[test]
fn gauge_action_is_faithful() {
    let s = st("0:1,1:2", 6, 8);
    let acts_trivially = |g: &GaugeElement| {
        let z = g.quantum_map(&s).unwrap();
        (0..s.phase_dim()).all(|i| {
            let f = AlgebraElement::field(&Solution::basis(&s, i));
            z.apply(&f).unwrap().distance(&f).unwrap() < 1e-14
        })
    };
    assert!(acts_trivially(&GaugeElement::identity(s.spectrum())));
    let id = |k| nalgebra::DMatrix::<f64>::identity(k, k);
    let mut gens = vec![GaugeElement::shift(s.spectrum(), vec![1.0]).unwrap()];
    gens.push(GaugeElement::new(s.spectrum(), vec![-id(1), id(2)], vec![0.0]).unwrap());
    let swap = nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    gens.push(GaugeElement::new(s.spectrum(), vec![id(1), swap], vec![0.0]).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        gens.push(GaugeElement::random(&mut rng, s.spectrum(), true));
    }
    for g in &gens {
        assert!(!acts_trivially(g), "{g:?}");
    }
}
