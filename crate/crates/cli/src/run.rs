//! `run`: sweeps, result files and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use spinlight_core::kernels::{integrated_kernels, kernel_time_domain};
use spinlight_core::moments::assemble_curve;
use spinlight_core::units::Dimension;
use spinlight_core::{CurvePoint, VarianceCurve};

use crate::config::{self, Diagnostic, Prepared, ScenarioConfig};
use crate::{io, sha256_hex, Failure, OUTPUT_ROOT_VAR};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Replaces `output.directory` from the config.
    pub output: Option<PathBuf>,
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointFailure {
    pub beta_j: f64,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioRecord {
    pub slug: String,
    pub detuning_hz: Option<f64>,
    pub points: usize,
    pub warnings: Vec<String>,
    pub infeasible_beta_j: Vec<f64>,
    pub failures: Vec<PointFailure>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub config: String,
    pub config_sha256: String,
    pub started: String,
    pub finished: String,
    pub jobs: usize,
    pub complete: bool,
    pub scenarios: Vec<ScenarioRecord>,
    pub files: Vec<ManifestFile>,
}

#[derive(Serialize)]
struct CurveFile<'a> {
    slug: &'a str,
    curve: &'a VarianceCurve,
    failures: &'a [PointFailure],
}

/// Output directory: the override, else the config entry; relative paths
/// are resolved against `SPINLIGHT_OUTPUT_ROOT` when it is set.
pub fn output_dir(cfg: &ScenarioConfig, opts: &RunOptions) -> PathBuf {
    let dir = opts.output.clone().unwrap_or_else(|| cfg.output.directory.clone());
    if dir.is_absolute() {
        return dir;
    }
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if !root.is_empty() => Path::new(&root).join(dir),
        _ => dir,
    }
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io(dir.display(), e))?;
    tmp.write_all(bytes).map_err(|e| io(path.display(), e))?;
    tmp.as_file().sync_all().map_err(|e| io(path.display(), e))?;
    tmp.persist(path).map_err(|e| io(path.display(), e.error))?;
    Ok(())
}

pub(crate) fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Failure::Validation(vec![Diagnostic::new("--jobs", "must be at least 1")]));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Failure::Io(format!("cannot start worker pool: {e}")))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub(crate) fn load_prepared(path: &Path) -> Result<(ScenarioConfig, Vec<u8>, Vec<Prepared>), Failure> {
    let (cfg, bytes) = config::load(path)?;
    let prepared = cfg.prepare(&base_dir(path)).map_err(Failure::Validation)?;
    Ok((cfg, bytes, prepared))
}

struct Recorder {
    dir: PathBuf,
    files: Vec<ManifestFile>,
}

impl Recorder {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.push(ManifestFile {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

/// Runs every scenario of a config. Point failures are recorded and the
/// remaining points still written; the returned manifest says whether the
/// run is complete.
pub fn run(path: &Path, opts: &RunOptions) -> Result<RunManifest, Failure> {
    let started = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let (cfg, bytes, prepared) = load_prepared(path)?;
    let dir = output_dir(&cfg, opts);
    std::fs::create_dir_all(&dir).map_err(|e| io(dir.display(), e))?;
    let pool = thread_pool(opts.jobs)?;
    let beta_j = cfg.sweep.beta_j.values();

    let tasks: Vec<(usize, f64)> = (0..prepared.len())
        .flat_map(|s| beta_j.iter().map(move |&b| (s, b)))
        .collect();
    let results: Vec<spinlight_core::Result<CurvePoint>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(s, b)| prepared[s].scenario.point(b))
            .collect()
    });

    let mut rec = Recorder { dir: dir.clone(), files: Vec::new() };
    let mut records = Vec::new();
    let mut engine_failed = None;
    let mut results = results.into_iter();
    for p in &prepared {
        let mut points = Vec::new();
        let mut failures = Vec::new();
        for &b in &beta_j {
            match results.next().expect("one result per task") {
                Ok(point) => points.push(point),
                Err(e) if e.is_numerical() => {
                    log::error!("{} βJ = {b}: {e}", p.slug);
                    engine_failed.get_or_insert_with(|| format!("{} βJ = {b}: {e}", p.slug));
                    failures.push(PointFailure { beta_j: b, error: e.to_string() });
                }
                Err(e) => return Err(Failure::from_core(&format!("{} βJ = {b}", p.slug), e)),
            }
        }
        let curve = assemble_curve(&p.scenario, points).map_err(|e| Failure::from_core(&p.slug, e))?;
        log::info!("{}: {} points, {} failed", p.slug, curve.points.len(), failures.len());
        rec.write(&format!("{}.csv", p.slug), curve.to_csv().as_bytes())?;
        rec.write(
            &format!("{}.json", p.slug),
            &json_bytes(&CurveFile {
                slug: &p.slug,
                curve: &curve,
                failures: &failures,
            }),
        )?;
        let mut warnings: Vec<String> = p.warnings.iter().map(|d| d.to_string()).collect();
        warnings.extend(curve.metadata.warnings.iter().cloned());
        records.push(ScenarioRecord {
            slug: p.slug.clone(),
            detuning_hz: p.scenario.detuning_hz,
            points: curve.points.len(),
            warnings,
            infeasible_beta_j: curve.points.iter().filter(|x| !x.feasible).map(|x| x.beta_j).collect(),
            failures,
        });
    }

    if let Some(dump) = &cfg.output.kernel_dump {
        let bytes = pool.install(|| kernel_dump(&prepared, dump))?;
        rec.write("kernels.json", &bytes)?;
    }

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: path.display().to_string(),
        config_sha256: sha256_hex(&bytes),
        started,
        finished: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        jobs: pool.current_num_threads(),
        complete: engine_failed.is_none(),
        scenarios: records,
        files: rec.files,
    };
    write_atomic(&dir.join(MANIFEST_NAME), &json_bytes(&manifest))?;
    if let Some(msg) = engine_failed {
        return Err(Failure::Engine(format!("{msg} (partial results in {})", dir.display())));
    }
    Ok(manifest)
}

#[derive(Serialize)]
pub struct KernelRecord {
    pub scenario: String,
    pub beta_j: f64,
    pub z_m: f64,
    pub t_s: f64,
    pub integrated: bool,
    pub m: [[f64; 2]; 2],
    pub n: [[f64; 2]; 2],
    pub f: [[f64; 2]; 2],
    pub g: [[f64; 2]; 2],
    pub m_time_impulse: [[f64; 2]; 2],
    pub n_space_impulse: [[f64; 2]; 2],
}

pub(crate) fn rows(m: &TimeKernelsMatrix) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

type TimeKernelsMatrix = nalgebra::Matrix2<f64>;

/// Kernels of one scenario at `(z, t)` for optical activity `beta_j`.
pub fn kernel_record(p: &Prepared, beta_j: f64, z: f64, t: f64, integrated: bool) -> Result<KernelRecord, Failure> {
    let (cs, _, _) = p.scenario.coupling_at(beta_j).map_err(|e| Failure::from_core(&p.slug, e))?;
    let quad = &p.scenario.kernel_quadrature.inversion;
    let k = if integrated {
        integrated_kernels(z, t, &cs, quad)
    } else {
        kernel_time_domain(z, t, &cs, quad)
    }
    .map_err(|e| Failure::from_core(&format!("{} z = {z} t = {t}", p.slug), e))?;
    Ok(KernelRecord {
        scenario: p.slug.clone(),
        beta_j,
        z_m: z,
        t_s: t,
        integrated,
        m: rows(&k.m),
        n: rows(&k.n),
        f: rows(&k.f),
        g: rows(&k.g),
        m_time_impulse: rows(&k.m_time_impulse),
        n_space_impulse: rows(&k.n_space_impulse),
    })
}

fn kernel_dump(prepared: &[Prepared], dump: &config::KernelDump) -> Result<Vec<u8>, Failure> {
    let mut errors = Vec::new();
    let parse = |qs: &[spinlight_core::units::Quantity], dim, name: &str, errors: &mut Vec<Diagnostic>| -> Vec<f64> {
        qs.iter()
            .enumerate()
            .filter_map(|(i, q)| match q.to_si(dim) {
                Ok(v) => Some(v),
                Err(e) => {
                    errors.push(Diagnostic::new(format!("output.kernel_dump.{name}[{i}]"), e.to_string()));
                    None
                }
            })
            .collect()
    };
    let zs = parse(&dump.z, Dimension::Length, "z", &mut errors);
    let ts = parse(&dump.t, Dimension::Time, "t", &mut errors);
    if !errors.is_empty() {
        return Err(Failure::Validation(errors));
    }
    let mut jobs = Vec::new();
    for s in 0..prepared.len() {
        for &z in &zs {
            for &t in &ts {
                jobs.push((s, z, t));
            }
        }
    }
    let records: Vec<KernelRecord> = jobs
        .par_iter()
        .map(|&(s, z, t)| kernel_record(&prepared[s], dump.beta_j, z, t, dump.integrated))
        .collect::<Result<_, _>>()?;
    Ok(json_bytes(&records))
}
