use std::f64::consts::PI;
use std::path::PathBuf;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use spinlight_core::couplings::{
    cesium_faraday_factor, coupling_set, dimensionless_polarizabilities, hyperfine_polarizabilities,
    photon_budget, relative_scattering_cross_section, sigma_from_faraday_factor, static_moments, stretched_state_pi_weights,
    AtomicData,
};
use spinlight_core::{BeamGeometry, HalfInt};

fn cesium() -> AtomicData {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/cs133_d2.json");
    AtomicData::from_file(&path).unwrap()
}

fn geometry() -> BeamGeometry {
    BeamGeometry {
        cross_section: 1e-6,
        linear_density: 1e9,
        sample_length: 0.01,
        photon_flux: 1e12,
        pulse_duration: 1e-3,
        larmor: 0.0,
        carrier: cesium().carrier(),
    }
}

// β/σ̃ on a detuning grid, with the three γ/Δ_F ratios.
fn cesium_samples() -> Vec<(f64, [f64; 3], f64)> {
    let data = cesium();
    let geom = geometry();
    (0..20)
        .map(|i| {
            let delta = 2.0 * PI * (600e6 + 60e6 * i as f64);
            let spec = data.hyperfine_spec(delta);
            let pol = hyperfine_polarizabilities(&spec).unwrap();
            let (a1, a2) = dimensionless_polarizabilities(pol.alpha1, pol.alpha2, &geom).unwrap();
            let cs = coupling_set(a1, a2, data.f0, &geom, false).unwrap();
            let sigma = relative_scattering_cross_section(&spec).unwrap();
            let x: Vec<f64> = spec.levels.iter().map(|l| spec.gamma / l.detuning).collect();
            (cs.beta / sigma, [x[0], x[1], x[2]], sigma)
        })
        .collect()
}

#[test]
fn cesium_levels_are_ordered() {
    let spec = cesium().hyperfine_spec(2.0 * PI * 1e9);
    let d: Vec<f64> = spec.levels.iter().map(|l| l.detuning / (2.0 * PI)).collect();
    assert_relative_eq!(d[1] - d[0], 251.0917e6, max_relative = 1e-12);
    assert_relative_eq!(d[2] - d[0], 452.3788e6, max_relative = 1e-12);
}

#[test]
fn cesium_pi_weights() {
    let w = stretched_state_pi_weights(&cesium().hyperfine_spec(2.0 * PI * 1e9)).unwrap();
    assert_relative_eq!(w[0], 0.3, epsilon = 1e-14);
    assert_relative_eq!(w[1], 0.7, epsilon = 1e-14);
    assert!(w[2].abs() < 1e-15);
}

#[test]
fn cesium_faraday_numerator_fit() {
    let samples = cesium_samples();
    let a = DMatrix::from_fn(samples.len(), 3, |r, c| samples[r].1[c]);
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.0 * s.2));
    let coef = a.clone().svd(true, true).solve(&b, 1e-15).unwrap();
    let ratio = [coef[1] / coef[0], coef[2] / coef[0]];
    assert_relative_eq!(ratio[0], -(7.0 / 320.0) / (11.0 / 60.0), max_relative = 1e-9);
    assert_relative_eq!(ratio[1], -(7.0 / 192.0) / (11.0 / 60.0), max_relative = 1e-9);
}

#[test]
fn cesium_factor_matches_coupling_chain() {
    let samples = cesium_samples();
    let k: Vec<f64> = samples
        .iter()
        .map(|(g, x, _)| g / cesium_faraday_factor(1.0, 1.0 / x[0], 1.0 / x[1], 1.0 / x[2]).unwrap())
        .collect();
    for v in &k {
        assert_relative_eq!(*v, k[0], max_relative = 1e-9);
    }
}

#[test]
fn equal_detuning_numerator() {
    let sum: f64 = 11.0 / 60.0 - 7.0 / 320.0 - 7.0 / 192.0;
    assert!((sum - 0.125).abs() < 1e-15);
    let f = cesium_faraday_factor(1.0, 1e6, 1e6, 1e6).unwrap();
    assert_relative_eq!(f, 0.125 * 1e6, max_relative = 1e-12);
}

#[test]
fn faraday_chain_reproduces_variance_slope() {
    // 2ηf·βJ = 2β²Ξ̄₃TJ̄ₓ once N_ph = ηS₀/σ and f = βS₀/σ
    let (beta, s0, f, eta, jx) = (2e-7, 1e-6, 40.0, 0.1, 3e5);
    let sigma = sigma_from_faraday_factor(beta, s0, f).unwrap();
    let budget = photon_budget(eta, s0, sigma, jx, 0.2).unwrap();
    let lhs = 2.0 * eta * f * beta * jx;
    let rhs = 2.0 * beta * beta * budget.photons * jx;
    assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
}

#[test]
fn spin_half_alignment_free() {
    let geom = geometry();
    let cs = coupling_set(1e-6, 3e-7, HalfInt::HALF, &geom, true).unwrap();
    assert_eq!(cs.epsilon, 0.0);
    assert_eq!(cs.kappa2, 0.0);
    assert_eq!(cs.omega2, 0.0);
    assert_eq!(static_moments(HalfInt::HALF).unwrap().0, 0.0);
}

