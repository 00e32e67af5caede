//! Scenario configuration files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinlight_core::couplings::{
    cesium_faraday_factor, dimensionless_polarizabilities, hyperfine_polarizabilities, polarizabilities, AtomicData,
    TransitionSpec, DEFAULT_LOSS_BOUND,
};
use spinlight_core::moments::KernelQuadrature;
use spinlight_core::units::{Dimension, Quantity, SPEED_OF_LIGHT};
use spinlight_core::{BeamGeometry, Engine, Grid, HalfInt, NoiseSpec, SweepScenario};

use crate::Failure;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub label: String,
    pub atom: AtomConfig,
    pub geometry: GeometryConfig,
    #[serde(default = "coherent_noise")]
    pub noise: NoiseSpec,
    pub budget: BudgetConfig,
    pub sweep: SweepConfig,
    pub engine: Engine,
    pub grid: Grid,
    #[serde(default)]
    pub kernel_quadrature: KernelQuadrature,
    #[serde(default)]
    pub include_light_shift: bool,
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn coherent_noise() -> NoiseSpec {
    NoiseSpec::coherent(0.0, 0.0)
}

/// Where the polarizabilities come from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AtomConfig {
    /// Atomic data file, path relative to the config file. The Faraday
    /// factor defaults to the Cs D2 formula when the level structure matches.
    DataFile {
        path: PathBuf,
        #[serde(default)]
        faraday_factor: Option<f64>,
    },
    /// A bare `j0 -> j` transition.
    Transition {
        j0: HalfInt,
        j: HalfInt,
        reduced_dipole: Quantity,
        linewidth: Quantity,
        wavelength: Quantity,
        faraday_factor: f64,
    },
    /// Dimensionless polarizabilities given directly; no detuning dependence.
    Dimensionless {
        j0: HalfInt,
        alpha1_bar: f64,
        alpha2_bar: f64,
        faraday_factor: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub cross_section: Quantity,
    pub sample_length: Quantity,
    pub pulse_duration: Quantity,
    #[serde(default)]
    pub larmor: Option<Quantity>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    /// Incoherent-loss fraction `η`.
    pub eta: f64,
    #[serde(default)]
    pub photon_number: Option<f64>,
    #[serde(default)]
    pub loss_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub detunings: Vec<Quantity>,
    pub beta_j: BetaJ,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaJ {
    List(Vec<f64>),
    Range(BetaJRange),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaJRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl BetaJ {
    pub fn values(&self) -> Vec<f64> {
        match self {
            BetaJ::List(v) => v.clone(),
            BetaJ::Range(r) if r.count == 1 => vec![r.start],
            BetaJ::Range(r) => (0..r.count)
                .map(|i| r.start + (r.stop - r.start) * i as f64 / (r.count - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    #[serde(default)]
    pub kernel_dump: Option<KernelDump>,
}

/// Kernel values written next to the curves.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDump {
    pub beta_j: f64,
    pub z: Vec<Quantity>,
    pub t: Vec<Quantity>,
    #[serde(default)]
    pub integrated: bool,
}

/// A problem with one config field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// A scenario ready to run, with its file stem and advisory warnings.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub slug: String,
    pub scenario: SweepScenario,
    pub warnings: Vec<Diagnostic>,
}

pub fn load(path: &Path) -> Result<(ScenarioConfig, Vec<u8>), Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    let cfg = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::Validation(vec![Diagnostic::new("config", format!("{}: {e}", path.display()))]))?;
    Ok((cfg, bytes))
}

fn quantity(q: &Quantity, dim: Dimension, field: &str, errors: &mut Vec<Diagnostic>) -> f64 {
    match q.to_si(dim) {
        Ok(v) => v,
        Err(e) => {
            errors.push(Diagnostic::new(field, e.to_string()));
            f64::NAN
        }
    }
}

/// `--z 5mm` or `--z "5 mm"`; a bare number is taken as SI.
pub fn parse_si(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    if let Ok(v) = text.parse::<f64>() {
        return Ok(v);
    }
    let split = (1..text.len())
        .rev()
        .filter(|&i| text.is_char_boundary(i))
        .find(|&i| text[..i].trim_end().parse::<f64>().is_ok())
        .ok_or_else(|| format!("cannot parse quantity {text:?}"))?;
    let q = Quantity::new(text[..split].trim_end().parse().expect("checked"), text[split..].trim());
    q.to_si(dim).map_err(|e| e.to_string())
}

fn is_cesium_d2(data: &AtomicData) -> bool {
    let mut fs: Vec<i32> = data.levels.iter().map(|l| l.f.twice()).collect();
    fs.sort_unstable();
    data.nuclear_spin == HalfInt::from_twice(7)
        && data.j0 == HalfInt::HALF
        && data.j == HalfInt::from_twice(3)
        && data.f0 == HalfInt::from_int(4)
        && data.reference_level == HalfInt::from_int(5)
        && fs == [6, 8, 10]
}

fn slug(label: &str, detuning_hz: Option<f64>) -> String {
    let base: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    match detuning_hz {
        Some(d) => format!("{base}_d{}MHz", format_mhz(d / 1e6)),
        None => base,
    }
}

fn format_mhz(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.replace('-', "m").replace('.', "p")
}

impl ScenarioConfig {
    /// Builds one scenario per detuning (or a single one in dimensionless
    /// mode); every problem is reported with the field it came from.
    pub fn prepare(&self, base_dir: &Path) -> Result<Vec<Prepared>, Vec<Diagnostic>> {
        let mut errors = Vec::new();
        let g = &self.geometry;
        let cross_section = quantity(&g.cross_section, Dimension::Area, "geometry.cross_section", &mut errors);
        let length = quantity(&g.sample_length, Dimension::Length, "geometry.sample_length", &mut errors);
        let duration = quantity(&g.pulse_duration, Dimension::Time, "geometry.pulse_duration", &mut errors);
        let larmor = g
            .larmor
            .as_ref()
            .map(|q| quantity(q, Dimension::Frequency, "geometry.larmor", &mut errors))
            .unwrap_or(0.0);
        for (field, v) in [
            ("geometry.cross_section", cross_section),
            ("geometry.sample_length", length),
            ("geometry.pulse_duration", duration),
        ] {
            if v.is_finite() && v <= 0.0 {
                errors.push(Diagnostic::new(field, "must be positive"));
            }
        }
        if !(self.budget.eta > 0.0 && self.budget.eta < 1.0) {
            errors.push(Diagnostic::new("budget.eta", format!("must lie in (0, 1), got {}", self.budget.eta)));
        }
        if let Some(n) = self.budget.photon_number {
            if !(n > 0.0 && n.is_finite()) {
                errors.push(Diagnostic::new("budget.photon_number", "must be positive"));
            }
        }
        let loss_bound = self.budget.loss_bound.unwrap_or(DEFAULT_LOSS_BOUND);
        if !(loss_bound > 0.0) {
            errors.push(Diagnostic::new("budget.loss_bound", "must be positive"));
        }
        let beta_j = self.sweep.beta_j.values();
        if beta_j.is_empty() {
            errors.push(Diagnostic::new("sweep.beta_j", "no βJ values"));
        }
        for (i, b) in beta_j.iter().enumerate() {
            if !(*b >= 0.0 && b.is_finite()) {
                errors.push(Diagnostic::new(format!("sweep.beta_j[{i}]"), "must be finite and non-negative"));
            }
        }
        if let Err(e) = self.grid.validate() {
            errors.push(Diagnostic::new("grid", e.to_string()));
        }
        if let Err(e) = self.noise.validate() {
            errors.push(Diagnostic::new("noise", e.to_string()));
        }
        if let Engine::MonteCarlo { realizations } = self.engine {
            if realizations < 2 {
                errors.push(Diagnostic::new("engine.realizations", "needs at least two realizations"));
            }
        }
        let mut detunings = Vec::new();
        for (i, q) in self.sweep.detunings.iter().enumerate() {
            let field = format!("sweep.detunings[{i}]");
            let d = quantity(q, Dimension::Frequency, &field, &mut errors);
            if d == 0.0 || d.is_infinite() {
                errors.push(Diagnostic::new(field, "detuning must be finite and nonzero"));
            }
            detunings.push(d);
        }

        let geometry = |carrier: f64| BeamGeometry {
            cross_section,
            linear_density: 0.0,
            sample_length: length,
            photon_flux: 0.0,
            pulse_duration: duration,
            larmor,
            carrier,
        };
        // (alpha1_bar, alpha2_bar, f, detuning_hz, j0, carrier, warnings) per scenario
        let mut atoms: Vec<(f64, f64, f64, Option<f64>, HalfInt, f64, Vec<Diagnostic>)> = Vec::new();
        match &self.atom {
            AtomConfig::Dimensionless {
                j0,
                alpha1_bar,
                alpha2_bar,
                faraday_factor,
            } => {
                if !self.sweep.detunings.is_empty() {
                    errors.push(Diagnostic::new("sweep.detunings", "not used with dimensionless polarizabilities"));
                }
                if *faraday_factor == 0.0 || !faraday_factor.is_finite() {
                    errors.push(Diagnostic::new("atom.faraday_factor", "must be finite and nonzero"));
                }
                atoms.push((*alpha1_bar, *alpha2_bar, *faraday_factor, None, *j0, 1.0, Vec::new()));
            }
            AtomConfig::Transition {
                j0,
                j,
                reduced_dipole,
                linewidth,
                wavelength,
                faraday_factor,
            } => {
                let dipole = quantity(reduced_dipole, Dimension::Dipole, "atom.reduced_dipole", &mut errors);
                let gamma = quantity(linewidth, Dimension::Frequency, "atom.linewidth", &mut errors);
                let lambda = quantity(wavelength, Dimension::Length, "atom.wavelength", &mut errors);
                if self.sweep.detunings.is_empty() {
                    errors.push(Diagnostic::new("sweep.detunings", "at least one detuning is required"));
                }
                if errors.is_empty() {
                    let carrier = 2.0 * PI * SPEED_OF_LIGHT / lambda;
                    for (i, &d) in detunings.iter().enumerate() {
                        let spec = TransitionSpec {
                            j0: *j0,
                            j: *j,
                            reduced_dipole_sq: dipole * dipole,
                            detuning: d,
                            gamma,
                        };
                        let field = format!("sweep.detunings[{i}]");
                        let warnings = match spec.validate() {
                            Ok(w) => w.into_iter().map(|m| Diagnostic::new(field.clone(), m)).collect(),
                            Err(e) => {
                                errors.push(Diagnostic::new("atom", e.to_string()));
                                continue;
                            }
                        };
                        match polarizabilities(&spec)
                            .and_then(|p| dimensionless_polarizabilities(p.alpha1, p.alpha2, &geometry(carrier)))
                        {
                            Ok((a1, a2)) => atoms.push((a1, a2, *faraday_factor, Some(d / (2.0 * PI)), *j0, carrier, warnings)),
                            Err(e) => errors.push(Diagnostic::new(field, e.to_string())),
                        }
                    }
                }
            }
            AtomConfig::DataFile { path, faraday_factor } => {
                let full = base_dir.join(path);
                match AtomicData::from_file(&full) {
                    Err(e) => errors.push(Diagnostic::new("atom.path", e.to_string())),
                    Ok(data) => {
                        if self.sweep.detunings.is_empty() {
                            errors.push(Diagnostic::new("sweep.detunings", "at least one detuning is required"));
                        }
                        let cesium = is_cesium_d2(&data);
                        if faraday_factor.is_none() && !cesium {
                            errors.push(Diagnostic::new(
                                "atom.faraday_factor",
                                "required unless the data describe the Cs D2 line from F0 = 4",
                            ));
                        }
                        if errors.is_empty() {
                            let carrier = data.carrier();
                            for (i, &d) in detunings.iter().enumerate() {
                                let field = format!("sweep.detunings[{i}]");
                                let spec = data.hyperfine_spec(d);
                                let warnings = match spec.validate() {
                                    Ok(w) => w.into_iter().map(|m| Diagnostic::new(field.clone(), m)).collect(),
                                    Err(e) => {
                                        errors.push(Diagnostic::new(field, e.to_string()));
                                        continue;
                                    }
                                };
                                let f = match faraday_factor {
                                    Some(f) => Ok(*f),
                                    None => {
                                        let by_f = |f: i32| {
                                            spec.levels.iter().find(|l| l.f == HalfInt::from_int(f)).map(|l| l.detuning).unwrap_or(f64::NAN)
                                        };
                                        cesium_faraday_factor(spec.gamma, by_f(5), by_f(4), by_f(3))
                                    }
                                };
                                let result = hyperfine_polarizabilities(&spec)
                                    .and_then(|p| dimensionless_polarizabilities(p.alpha1, p.alpha2, &geometry(carrier)))
                                    .and_then(|a| f.map(|f| (a, f)));
                                match result {
                                    Ok(((a1, a2), f)) => atoms.push((a1, a2, f, Some(d / (2.0 * PI)), data.f0, carrier, warnings)),
                                    Err(e) => errors.push(Diagnostic::new(field, e.to_string())),
                                }
                            }
                        }
                    }
                }
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }

        let mut out = Vec::new();
        for (a1, a2, f, detuning_hz, j0, carrier, mut warnings) in atoms {
            let scenario = SweepScenario {
                label: self.label.clone(),
                detuning_hz,
                alpha1_bar: a1,
                alpha2_bar: a2,
                j0,
                faraday_factor: f,
                eta: self.budget.eta,
                photon_number: self.budget.photon_number,
                reference_jx: 1e6,
                noise: self.noise,
                geometry: geometry(carrier),
                include_light_shift: self.include_light_shift,
                grid: self.grid,
                engine: self.engine.clone(),
                kernel_quadrature: self.kernel_quadrature.clone(),
                seed: self.seed,
                loss_bound,
            };
            let slug = slug(&self.label, detuning_hz);
            match scenario.beta_epsilon() {
                Ok((beta, _)) if beta == 0.0 && self.budget.photon_number.is_none() => {
                    errors.push(Diagnostic::new(
                        "budget.photon_number",
                        format!("{slug}: β vanishes, so the photon number must be given"),
                    ));
                }
                Ok(_) => {}
                Err(e) => errors.push(Diagnostic::new("atom", format!("{slug}: {e}"))),
            }
            if self.budget.eta > loss_bound {
                warnings.push(Diagnostic::new(
                    "budget.eta",
                    format!("incoherent-loss fraction exceeds recommended bound ({} > {loss_bound})", self.budget.eta),
                ));
            }
            out.push(Prepared { slug, scenario, warnings });
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        Ok(out)
    }
}
