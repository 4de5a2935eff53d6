//! Browser bindings: causal propagation heat map, diamond masks and the
//! symmetry classifier. The `*_impl` functions hold the logic so it can be
//! tested natively.

use std::sync::Arc;

use lcqft::classical::{propagate_test_function, trajectory, TestFunction, C64};
use lcqft::classifier::classify;
use lcqft::lattice::{domain_of_dependence, LatticeSpacetime, SiteInterval};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn spacetime(spectrum: &str, n_sites: usize, n_steps: usize, dt: f64) -> Result<Arc<LatticeSpacetime>, String> {
    let spectrum = spectrum.parse().map_err(|e| format!("{e}"))?;
    LatticeSpacetime::new(n_sites, n_steps, dt, spectrum).map(Arc::new).map_err(|e| format!("{e}"))
}

/// E f for a unit point source at `(t0, x0)` of species 0, as row-major
/// `n_steps × n_sites` field values.
pub fn propagate_point_impl(spectrum: &str, n_sites: usize, n_steps: usize, dt: f64, t0: usize, x0: usize) -> Result<Vec<f64>, String> {
    let st = spacetime(spectrum, n_sites, n_steps, dt)?;
    let f = TestFunction::point(&st, 0, t0, x0, C64::new(1.0, 0.0)).map_err(|e| format!("{e}"))?;
    let sol = propagate_test_function(&f).map_err(|e| format!("{e}"))?;
    Ok(trajectory(&sol).into_iter().flat_map(|slice| slice[0].iter().map(|c| c.re).collect::<Vec<_>>()).collect())
}

/// 1 for cells of the diamond over `[start, start + len)` on `slice`, row-major
/// over the time window.
pub fn diamond_mask_impl(n_sites: usize, n_steps: usize, slice: i64, start: usize, len: usize) -> Result<Vec<u8>, String> {
    let st = spacetime("1:1", n_sites, n_steps, 0.5)?;
    let region = domain_of_dependence(slice, SiteInterval::new(start % n_sites.max(1), len), &st).map_err(|e| format!("{e}"))?;
    Ok((0..n_steps as i64)
        .flat_map(|t| (0..n_sites).map(move |x| (t, x)))
        .map(|c| region.contains(c) as u8)
        .collect())
}

/// Classifier summary as JSON: dimension, expected, match.
pub fn classify_impl(spectrum: &str, n_sites: usize, seed: u64) -> Result<String, String> {
    let st = spacetime(spectrum, n_sites, 2 * n_sites, 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = classify(&mut rng, &st, false).map_err(|e| format!("{e}"))?;
    Ok(serde_json::json!({
        "dimension": r.dimension,
        "expected": r.expected,
        "match": r.matched,
        "commutant_dimension": r.commutant_dimension,
        "zero_mode_quarantined": r.zero_mode_quarantined,
        "soundness": r.soundness.max(),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn propagate_point(spectrum: &str, n_sites: usize, n_steps: usize, dt: f64, t0: usize, x0: usize) -> Result<Vec<f64>, JsValue> {
    propagate_point_impl(spectrum, n_sites, n_steps, dt, t0, x0).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn diamond_mask(n_sites: usize, n_steps: usize, slice: i32, start: usize, len: usize) -> Result<Vec<u8>, JsValue> {
    diamond_mask_impl(n_sites, n_steps, slice as i64, start, len).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn classify_spectrum(spectrum: &str, n_sites: usize, seed: u32) -> Result<String, JsValue> {
    classify_impl(spectrum, n_sites, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_source_stays_in_its_light_cone() {
        let (n, nt) = (12, 10);
        let v = propagate_point_impl("1:1", n, nt, 0.5, 5, 3).unwrap();
        assert_eq!(v.len(), n * nt);
        for t in 0..nt {
            for x in 0..n {
                let d = (x as i64 - 3).rem_euclid(n as i64).min((3 - x as i64).rem_euclid(n as i64));
                if d > (t as i64 - 5).abs() {
                    assert_eq!(v[t * n + x], 0.0, "({t}, {x})");
                }
            }
        }
        assert!(v.iter().any(|&q| q != 0.0));
    }

    #[test]
    fn diamond_mask_shape() {
        let m = diamond_mask_impl(8, 6, 2, 1, 3).unwrap();
        let row = |t: usize| m[t * 8..(t + 1) * 8].to_vec();
        assert_eq!(row(2), vec![0, 1, 1, 1, 0, 0, 0, 0]);
        assert_eq!(row(3), vec![0, 0, 1, 0, 0, 0, 0, 0]);
        assert_eq!(row(1), row(3));
        assert!(row(5).iter().all(|&c| c == 0));
        assert!(diamond_mask_impl(8, 6, 2, 0, 8).is_err());
    }

    #[test]
    fn classify_reports_so2() {
        let v: serde_json::Value = serde_json::from_str(&classify_impl("1:2", 6, 1).unwrap()).unwrap();
        assert_eq!(v["dimension"], 1);
        assert_eq!(v["match"], true);
        assert!(classify_impl("2:1,1:1", 6, 1).is_err());
    }
}
