//! `validate`, `couplings show` and `kernels eval`.

use std::path::Path;

use serde::Serialize;
use spinlight_core::units::Dimension;

use crate::config::{self, parse_si, Diagnostic};
use crate::run::{kernel_record, load_prepared, KernelRecord};
use crate::Failure;

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub config: String,
    pub valid: bool,
    pub scenarios: Vec<String>,
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

/// Checks a config without running it. I/O failures are still errors of
/// the command; everything else lands in the report.
pub fn validate(path: &Path) -> Result<ValidationReport, Failure> {
    let mut report = ValidationReport {
        config: path.display().to_string(),
        valid: false,
        scenarios: vec![],
        errors: vec![],
        warnings: vec![],
    };
    let cfg = match config::load(path) {
        Ok((cfg, _)) => cfg,
        Err(Failure::Validation(d)) => {
            report.errors = d;
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    match cfg.prepare(path.parent().unwrap_or(Path::new(""))) {
        Ok(prepared) => {
            report.valid = true;
            for p in prepared {
                report.scenarios.push(p.slug);
                for w in p.warnings {
                    if !report.warnings.contains(&w) {
                        report.warnings.push(w);
                    }
                }
            }
        }
        Err(errors) => report.errors = errors,
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct CouplingPoint {
    pub beta_j: f64,
    pub atoms: f64,
    pub photons: f64,
    pub feasible: bool,
}

#[derive(Debug, Serialize)]
pub struct CouplingReport {
    pub scenario: String,
    pub detuning_hz: Option<f64>,
    pub alpha1_bar: f64,
    pub alpha2_bar: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub epsilon_over_beta: Option<f64>,
    pub faraday_factor: f64,
    /// `σ_Δ = βS₀/f`, m².
    pub sigma_delta: f64,
    pub points: Vec<CouplingPoint>,
}

/// Coupling constants and per-point budgets of every scenario.
pub fn couplings(path: &Path) -> Result<Vec<CouplingReport>, Failure> {
    let (cfg, _, prepared) = load_prepared(path)?;
    let beta_j = cfg.sweep.beta_j.values();
    prepared
        .iter()
        .map(|p| {
            let s = &p.scenario;
            let (beta, epsilon) = s.beta_epsilon().map_err(|e| Failure::from_core(&p.slug, e))?;
            let points = beta_j
                .iter()
                .map(|&b| {
                    let (_, atoms, photons) = s.coupling_at(b).map_err(|e| Failure::from_core(&p.slug, e))?;
                    let capacity = photons / s.eta;
                    Ok(CouplingPoint {
                        beta_j: b,
                        atoms,
                        photons,
                        feasible: s.eta <= s.loss_bound && atoms / capacity <= s.loss_bound,
                    })
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            Ok(CouplingReport {
                scenario: p.slug.clone(),
                detuning_hz: s.detuning_hz,
                alpha1_bar: s.alpha1_bar,
                alpha2_bar: s.alpha2_bar,
                beta,
                epsilon,
                epsilon_over_beta: (beta != 0.0).then(|| epsilon / beta),
                faraday_factor: s.faraday_factor,
                sigma_delta: beta.abs() * s.geometry.cross_section / s.faraday_factor.abs(),
                points,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct KernelQuery {
    pub z: Vec<String>,
    pub t: Vec<String>,
    pub scenario: Option<String>,
    pub beta_j: f64,
    pub integrated: bool,
}

/// Kernels on the cartesian product of the requested `z` and `t` values.
pub fn kernels(path: &Path, q: &KernelQuery) -> Result<Vec<KernelRecord>, Failure> {
    let (_, _, prepared) = load_prepared(path)?;
    let mut errors = Vec::new();
    let mut parse = |vals: &[String], dim, flag: &str| -> Vec<f64> {
        vals.iter()
            .filter_map(|v| {
                parse_si(v, dim)
                    .map_err(|e| errors.push(Diagnostic::new(flag, format!("`{v}`: {e}"))))
                    .ok()
            })
            .collect()
    };
    let zs = parse(&q.z, Dimension::Length, "--z");
    let ts = parse(&q.t, Dimension::Time, "--t");
    if zs.is_empty() && q.z.is_empty() {
        errors.push(Diagnostic::new("--z", "at least one position is required"));
    }
    if ts.is_empty() && q.t.is_empty() {
        errors.push(Diagnostic::new("--t", "at least one time is required"));
    }
    let selected: Vec<_> = match &q.scenario {
        Some(name) => prepared.iter().filter(|p| &p.slug == name).collect(),
        None => prepared.iter().collect(),
    };
    if selected.is_empty() {
        let known: Vec<_> = prepared.iter().map(|p| p.slug.as_str()).collect();
        errors.push(Diagnostic::new("--scenario", format!("unknown scenario; known: {}", known.join(", "))));
    }
    if !errors.is_empty() {
        return Err(Failure::Validation(errors));
    }
    let mut out = Vec::new();
    for p in selected {
        for &z in &zs {
            for &t in &ts {
                out.push(kernel_record(p, q.beta_j, z, t, q.integrated)?);
            }
        }
    }
    Ok(out)
}
