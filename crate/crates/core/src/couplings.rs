//! Atomic polarizabilities and the coupling constants of the linearized
//! light/spin equations.
//!
//! Polarizabilities are returned as polarizability volumes (m³, i.e. the
//! Gaussian-unit polarizability), so that the dimensionless form is
//! `ᾱ = 4π ω̄ α / (S₀ c)` without further constants.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::angular::{clebsch_gordan, wigner_6j, HalfInt};
use crate::error::{Error, Result};
use crate::units::{EPSILON_0, HBAR, SPEED_OF_LIGHT};

/// Below this `|Δ|/γ` the far-detuned treatment is only advisory.
pub const DETUNING_ADVISORY_RATIO: f64 = 20.0;

/// Default upper bound on the incoherent loss fraction `N σ_Δ / S₀`.
pub const DEFAULT_LOSS_BOUND: f64 = 0.2;

/// A single `j0 -> j` optical transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub j0: HalfInt,
    pub j: HalfInt,
    /// `|d_{j0 j}|²`, (C m)².
    pub reduced_dipole_sq: f64,
    /// `Δ = ω̄ - ω_{j j0}`, rad/s.
    pub detuning: f64,
    /// Excited-state decay rate, rad/s.
    pub gamma: f64,
}

impl TransitionSpec {
    /// Hard errors for unusable input; advisory warnings are returned.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.j0.check_momentum()?;
        self.j.check_momentum()?;
        check_transition_inputs(self.reduced_dipole_sq, self.gamma)?;
        check_detuning("detuning", self.detuning, self.gamma)
    }
}

fn check_transition_inputs(reduced_dipole_sq: f64, gamma: f64) -> Result<()> {
    if !(reduced_dipole_sq >= 0.0 && reduced_dipole_sq.is_finite()) {
        return Err(Error::Domain(format!(
            "reduced_dipole_sq must be finite and non-negative, got {reduced_dipole_sq}"
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

fn check_detuning(name: &str, detuning: f64, gamma: f64) -> Result<Vec<String>> {
    if detuning == 0.0 || !detuning.is_finite() {
        return Err(Error::Domain(format!("{name} must be finite and nonzero, got {detuning}")));
    }
    let mut warnings = Vec::new();
    if detuning.abs() / gamma < DETUNING_ADVISORY_RATIO {
        let msg = format!(
            "{name}: |Δ|/γ = {:.2} is below {DETUNING_ADVISORY_RATIO}; far-detuned approximation is marginal",
            detuning.abs() / gamma
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(warnings)
}

/// Rank-0/1/2 polarizabilities, m³.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polarizabilities {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

// |d|²/(-ħΔ) expressed as a polarizability volume.
fn dipole_over_detuning(reduced_dipole_sq: f64, detuning: f64) -> f64 {
    reduced_dipole_sq / (4.0 * PI * EPSILON_0) / (-HBAR * detuning)
}

fn rank_factors(j0: HalfInt, j: HalfInt) -> Result<(f64, f64, f64)> {
    let one = HalfInt::ONE;
    let two = HalfInt::from_int(2);
    let r0 = 1.0 / (3.0 * f64::from(j0.multiplicity()).sqrt());
    let r1 = (j + j0).phase()? * std::f64::consts::FRAC_1_SQRT_2 * wigner_6j(one, one, one, j0, j0, j)?;
    let r2 = -(j + j0).phase()? * wigner_6j(one, one, two, j0, j0, j)?;
    Ok((r0, r1, r2))
}

/// Isotropic, orientational and alignment polarizabilities of a bare transition.
pub fn polarizabilities(spec: &TransitionSpec) -> Result<Polarizabilities> {
    spec.validate()?;
    let base = dipole_over_detuning(spec.reduced_dipole_sq, spec.detuning);
    let (r0, r1, r2) = rank_factors(spec.j0, spec.j)?;
    Ok(Polarizabilities {
        alpha0: r0 * base,
        alpha1: r1 * base,
        alpha2: r2 * base,
    })
}

/// Probe beam and sample geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    /// `S₀`, m².
    pub cross_section: f64,
    /// `n₀`, atoms per metre.
    pub linear_density: f64,
    /// `L`, m.
    pub sample_length: f64,
    /// `Ξ̄₃ = Ξ̄₀`, photons per second.
    pub photon_flux: f64,
    /// `T`, s.
    pub pulse_duration: f64,
    /// `Ω₀`, rad/s.
    pub larmor: f64,
    /// `ω̄`, rad/s.
    pub carrier: f64,
}

impl BeamGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cross_section", self.cross_section),
            ("sample_length", self.sample_length),
            ("pulse_duration", self.pulse_duration),
            ("carrier", self.carrier),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("linear_density", self.linear_density), ("photon_flux", self.photon_flux)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.larmor.is_finite() {
            return Err(Error::Domain("larmor frequency must be finite".into()));
        }
        Ok(())
    }

    /// Atom number `N_a = n₀ L`.
    pub fn atom_number(&self) -> f64 {
        self.linear_density * self.sample_length
    }

    /// Photon number `N_ph = Ξ̄₀ T`.
    pub fn photon_number(&self) -> f64 {
        self.photon_flux * self.pulse_duration
    }
}

/// `ᾱ_i = 4π ω̄ α_i / (S₀ c)`.
pub fn dimensionless_polarizabilities(alpha1: f64, alpha2: f64, geom: &BeamGeometry) -> Result<(f64, f64)> {
    geom.validate()?;
    let scale = 4.0 * PI * geom.carrier / (geom.cross_section * SPEED_OF_LIGHT);
    Ok((scale * alpha1, scale * alpha2))
}

/// Mean alignment `T̄_xy` and orientation `T̄_x` of a level fully polarized along x.
pub fn static_moments(j0: HalfInt) -> Result<(f64, f64)> {
    j0.check_momentum()?;
    if j0.twice() < 1 {
        return Err(Error::Domain("static moments need j0 >= 1/2".into()));
    }
    let j = j0.value();
    let txy = (15.0 * j * (2.0 * j - 1.0)).sqrt()
        / (2.0 * (2.0 * (j + 1.0) * (2.0 * j + 1.0) * (2.0 * j + 3.0)).sqrt());
    let tx = (3.0 * j).sqrt() / ((j + 1.0) * (2.0 * j + 1.0)).sqrt();
    Ok((txy, tx))
}

/// The dimensionless coefficients driving the coupled field/spin equations.
///
/// `jx_density` is the mean spin per unit length, `𝒥̄ₓ = n₀ j₀`; `jx_bar`
/// its integral over the sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    pub j0: HalfInt,
    pub alpha1_bar: f64,
    pub alpha2_bar: f64,
    /// Faraday angle per spin flip.
    pub beta: f64,
    /// Ellipticity per spin flip.
    pub epsilon: f64,
    /// Birefringence, 1/m.
    pub kappa2: f64,
    /// Light shift, rad/s.
    pub omega2: f64,
    /// External Larmor frequency, rad/s.
    pub omega0: f64,
    /// Precession frequency used in the dynamics, rad/s.
    pub omega: f64,
    pub theta_y: f64,
    pub theta_z: f64,
    pub jx_bar: f64,
    pub jx_density: f64,
    /// Mean photon flux, 1/s.
    pub xi3_bar: f64,
    pub txy_bar: f64,
    pub tx_bar: f64,
    /// Sample length, m.
    pub length: f64,
    /// Pulse duration, s.
    pub duration: f64,
}

fn faraday_prefactor(j: f64) -> f64 {
    3f64.sqrt() / (2.0 * (j * (j + 1.0) * (2.0 * j + 1.0)).sqrt())
}

fn ellipticity_prefactor(j: f64) -> f64 {
    (15.0 * (2.0 * j - 1.0)).sqrt() / (2.0 * (2.0 * j * (j + 1.0) * (2.0 * j + 1.0) * (2.0 * j + 3.0)).sqrt())
}

/// Assembles every coupling constant from the dimensionless polarizabilities.
///
/// The light shift is computed but only added to `omega` when
/// `include_light_shift` is set.
pub fn coupling_set(
    alpha1_bar: f64,
    alpha2_bar: f64,
    j0: HalfInt,
    geom: &BeamGeometry,
    include_light_shift: bool,
) -> Result<CouplingSet> {
    geom.validate()?;
    let (txy, tx) = static_moments(j0)?;
    let j = j0.value();
    let beta = faraday_prefactor(j) * alpha1_bar;
    let epsilon = ellipticity_prefactor(j) * alpha2_bar;
    let kappa2 = alpha2_bar * txy * geom.linear_density;
    let omega2 = 2.0 * ellipticity_prefactor(j) * alpha2_bar * geom.photon_flux;
    let omega = if include_light_shift {
        geom.larmor + omega2
    } else {
        geom.larmor
    };
    let jx_density = geom.linear_density * j;
    Ok(CouplingSet {
        j0,
        alpha1_bar,
        alpha2_bar,
        beta,
        epsilon,
        kappa2,
        omega2,
        omega0: geom.larmor,
        omega,
        theta_y: epsilon,
        theta_z: beta,
        jx_bar: jx_density * geom.sample_length,
        jx_density,
        xi3_bar: geom.photon_flux,
        txy_bar: txy,
        tx_bar: tx,
        length: geom.sample_length,
        duration: geom.pulse_duration,
    })
}

impl CouplingSet {
    /// A coupling set with every interaction switched off.
    pub fn uncoupled(jx_bar: f64, xi3_bar: f64, length: f64, duration: f64) -> Self {
        CouplingSet {
            j0: HalfInt::HALF,
            alpha1_bar: 0.0,
            alpha2_bar: 0.0,
            beta: 0.0,
            epsilon: 0.0,
            kappa2: 0.0,
            omega2: 0.0,
            omega0: 0.0,
            omega: 0.0,
            theta_y: 0.0,
            theta_z: 0.0,
            jx_bar,
            jx_density: jx_bar / length,
            xi3_bar,
            txy_bar: 0.0,
            tx_bar: std::f64::consts::FRAC_1_SQRT_2,
            length,
            duration,
        }
    }

    /// Photon number `Ξ̄₃ T`.
    pub fn photon_number(&self) -> f64 {
        self.xi3_bar * self.duration
    }

    /// Optical activity `β J̄ₓ`.
    pub fn optical_activity(&self) -> f64 {
        self.beta * self.jx_bar
    }
}

/// Ground and excited hyperfine structure of a single fine-structure line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperfineSpec {
    pub nuclear_spin: HalfInt,
    pub j0: HalfInt,
    pub j: HalfInt,
    pub f0: HalfInt,
    pub levels: Vec<HyperfineLevel>,
    /// Fine-structure `|d_{j0 j}|²`, (C m)².
    pub reduced_dipole_sq: f64,
    /// rad/s.
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperfineLevel {
    pub f: HalfInt,
    /// `Δ_F = ω̄ - ω_{F F0}`, rad/s.
    pub detuning: f64,
}

fn triangle_ok(a: HalfInt, b: HalfInt, c: HalfInt) -> bool {
    let (a, b, c) = (a.twice(), b.twice(), c.twice());
    c <= a + b && c >= (a - b).abs() && (a + b + c) % 2 == 0
}

impl HyperfineSpec {
    pub fn validate(&self) -> Result<Vec<String>> {
        for x in [self.nuclear_spin, self.j0, self.j, self.f0] {
            x.check_momentum()?;
        }
        check_transition_inputs(self.reduced_dipole_sq, self.gamma)?;
        if self.levels.is_empty() {
            return Err(Error::Domain("hyperfine level list is empty".into()));
        }
        if !triangle_ok(self.nuclear_spin, self.j0, self.f0) {
            return Err(Error::Domain(format!(
                "ground level F0 = {} is incompatible with I = {}, j0 = {}",
                self.f0, self.nuclear_spin, self.j0
            )));
        }
        let mut warnings = Vec::new();
        for level in &self.levels {
            level.f.check_momentum()?;
            if !triangle_ok(self.nuclear_spin, self.j, level.f) || !triangle_ok(HalfInt::ONE, self.f0, level.f) {
                return Err(Error::Domain(format!(
                    "excited level F = {} violates the triangle rules (I, j, F) or (1, F0, F)",
                    level.f
                )));
            }
            warnings.extend(check_detuning(&format!("detuning of F = {}", level.f), level.detuning, self.gamma)?);
        }
        Ok(warnings)
    }

    /// Relative line strength `(2F+1)(2F0+1){I j F; 1 F0 j0}²` of `F0 -> F`.
    pub fn line_strength(&self, f: HalfInt) -> Result<f64> {
        let six = wigner_6j(self.nuclear_spin, self.j, f, HalfInt::ONE, self.f0, self.j0)?;
        Ok(f64::from(f.multiplicity()) * f64::from(self.f0.multiplicity()) * six * six)
    }

    /// Same structure with every detuning shifted by `shift` (rad/s).
    pub fn shifted(&self, shift: f64) -> HyperfineSpec {
        let mut out = self.clone();
        for level in &mut out.levels {
            level.detuning += shift;
        }
        out
    }
}

/// Effective polarizabilities of the ground hyperfine level `F0` after summing
/// over the excited hyperfine manifold, m³.
///
/// Every `F0 -> F` channel contributes the bare-transition expression with
/// `(j0, j) -> (F0, F)` and `|d|² -> (2F+1)(2F0+1){I j F; 1 F0 j0}² |d|²`.
/// For the rank-2 part this is the hyperfine sum that vanishes for equal
/// detunings when the electronic `j0 = 1/2`.
pub fn hyperfine_polarizabilities(spec: &HyperfineSpec) -> Result<Polarizabilities> {
    spec.validate()?;
    let mut out = Polarizabilities {
        alpha0: 0.0,
        alpha1: 0.0,
        alpha2: 0.0,
    };
    for level in &spec.levels {
        let base = dipole_over_detuning(spec.reduced_dipole_sq * spec.line_strength(level.f)?, level.detuning);
        let (r0, r1, r2) = rank_factors(spec.f0, level.f)?;
        out.alpha0 += r0 * base;
        out.alpha1 += r1 * base;
        out.alpha2 += r2 * base;
    }
    Ok(out)
}

/// Fractions of the π-polarized excitation strength from the stretched
/// ground state `|F0, M = F0>` carried by each excited level (quantization
/// along the atomic orientation, which is the probe polarization). The
/// fractions sum to one over the listed levels.
pub fn stretched_state_pi_weights(spec: &HyperfineSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let m0 = spec.f0;
    let mut weights = Vec::with_capacity(spec.levels.len());
    for level in &spec.levels {
        let cg = if m0.twice() <= level.f.twice() {
            clebsch_gordan(spec.f0, m0, HalfInt::ONE, HalfInt::ZERO, level.f, m0)?
        } else {
            0.0
        };
        let six = wigner_6j(spec.nuclear_spin, spec.j, level.f, HalfInt::ONE, spec.f0, spec.j0)?;
        weights.push(f64::from(spec.f0.multiplicity()) * six * six * cg * cg);
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::Domain("no excited level is reachable by π light".into()));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Relative off-resonant scattering cross-section of the stretched state,
/// `Σ_F w_F (γ/Δ_F)²` with the weights of [`stretched_state_pi_weights`].
pub fn relative_scattering_cross_section(spec: &HyperfineSpec) -> Result<f64> {
    let weights = stretched_state_pi_weights(spec)?;
    Ok(spec
        .levels
        .iter()
        .zip(weights)
        .map(|(level, w)| w * (spec.gamma / level.detuning).powi(2))
        .sum())
}

/// Faraday angle per photon-loss budget for the Cs D2 line,
/// `f = β S₀ / σ_Δ`, as a function of `γ/Δ_F` for `F = 5, 4, 3`.
pub fn cesium_faraday_factor(gamma: f64, delta5: f64, delta4: f64, delta3: f64) -> Result<f64> {
    for (name, d) in [("delta5", delta5), ("delta4", delta4), ("delta3", delta3)] {
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite and nonzero")));
        }
    }
    let (x5, x4, x3) = (gamma / delta5, gamma / delta4, gamma / delta3);
    let numerator = 11.0 / 60.0 * x5 - 7.0 / 320.0 * x4 - 7.0 / 192.0 * x3;
    let denominator = 3.0 / 10.0 * x5 * x5 + 7.0 / 10.0 * x4 * x4;
    if denominator == 0.0 || !denominator.is_finite() {
        return Err(Error::Domain("vanishing denominator in the Faraday factor".into()));
    }
    Ok(numerator / denominator)
}

/// Inverts `f = β S₀ / σ_Δ` for the off-resonant cross-section `σ_Δ`.
pub fn sigma_from_faraday_factor(beta: f64, cross_section: f64, f: f64) -> Result<f64> {
    if f == 0.0 || !f.is_finite() {
        return Err(Error::Domain(format!("Faraday factor must be finite and nonzero, got {f}")));
    }
    let sigma = beta * cross_section / f;
    if sigma <= 0.0 {
        return Err(Error::Domain(format!(
            "β = {beta:e} and f = {f:e} have opposite signs; σ_Δ would be non-positive"
        )));
    }
    Ok(sigma)
}

/// Photon number allowed by an incoherent-loss fraction and its feasibility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonBudget {
    pub photons: f64,
    /// `N_a N_ph σ_Δ/S₀ / N_a`: fraction of atoms lost.
    pub atom_loss: f64,
    /// `N_a N_ph σ_Δ/S₀ / N_ph`: fraction of photons lost.
    pub photon_loss: f64,
    pub feasible: bool,
}

/// `N_ph = η S₀/σ_Δ`, feasible when both loss fractions stay below `loss_bound`.
pub fn photon_budget(eta: f64, cross_section: f64, sigma_delta: f64, atoms: f64, loss_bound: f64) -> Result<PhotonBudget> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!("η must lie in (0, 1), got {eta}")));
    }
    if !(sigma_delta > 0.0) || !(cross_section > 0.0) {
        return Err(Error::Domain("σ_Δ and S₀ must be positive".into()));
    }
    let capacity = cross_section / sigma_delta;
    let photons = eta * capacity;
    let atom_loss = photons / capacity;
    let photon_loss = atoms / capacity;
    Ok(PhotonBudget {
        photons,
        atom_loss,
        photon_loss,
        feasible: atom_loss <= loss_bound && photon_loss <= loss_bound,
    })
}

/// Atomic reference data file: one fine-structure line with its excited
/// hyperfine manifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomicData {
    pub species: String,
    /// Where the numbers come from.
    #[serde(default)]
    pub source: String,
    pub gamma_hz: f64,
    pub wavelength_m: f64,
    pub nuclear_spin: HalfInt,
    pub j0: HalfInt,
    pub j: HalfInt,
    pub f0: HalfInt,
    /// Fine-structure reduced dipole matrix element, C m.
    pub reduced_dipole_cm: f64,
    /// Level whose detuning is quoted as the probe detuning.
    pub reference_level: HalfInt,
    pub levels: Vec<AtomicLevel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomicLevel {
    pub f: HalfInt,
    /// Energy offset from the reference level, Hz.
    pub offset_hz: f64,
}

impl AtomicData {
    pub fn from_file(path: &Path) -> Result<AtomicData> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<AtomicData> {
        let data: AtomicData =
            serde_json::from_str(text).map_err(|e| Error::Input(format!("atomic data: {e}")))?;
        if !data.levels.iter().any(|l| l.f == data.reference_level) {
            return Err(Error::Input(format!(
                "reference level F = {} is not in the level list",
                data.reference_level
            )));
        }
        Ok(data)
    }

    /// Carrier angular frequency, rad/s.
    pub fn carrier(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.wavelength_m
    }

    /// Hyperfine spec for a probe detuned by `detuning` (rad/s) from the reference level.
    pub fn hyperfine_spec(&self, detuning: f64) -> HyperfineSpec {
        let reference = self
            .levels
            .iter()
            .find(|l| l.f == self.reference_level)
            .map(|l| l.offset_hz)
            .unwrap_or(0.0);
        HyperfineSpec {
            nuclear_spin: self.nuclear_spin,
            j0: self.j0,
            j: self.j,
            f0: self.f0,
            levels: self
                .levels
                .iter()
                .map(|l| HyperfineLevel {
                    f: l.f,
                    detuning: detuning - 2.0 * PI * (l.offset_hz - reference),
                })
                .collect(),
            reduced_dipole_sq: self.reduced_dipole_cm * self.reduced_dipole_cm,
            gamma: 2.0 * PI * self.gamma_hz,
        }
    }
}
