//! Second-moment propagation of the discretized linear field/spin system,
//! a Monte-Carlo oracle on the same discrete scheme, a kernel-quadrature
//! variance engine and the optical-activity sweeps.
//!
//! State vector: `[J_z(1..Nz), J_y(1..Nz), Y₁, Y₂]` with cell-integrated
//! spins `J(k) = 𝒥·Δz` and output accumulators `Y_i = ∫₀ᵗ Ξ_i(L, t') dt'`.
//! Fields are treated as instantaneous in `z` (no `1/c ∂t`). One time step is
//! a half precession, a Heun predictor/corrector for the field-driven kicks,
//! and another half precession; the precession is applied exactly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::HalfInt;
use crate::couplings::{coupling_set, BeamGeometry, CouplingSet, DEFAULT_LOSS_BOUND};
use crate::error::{Error, Result};
use crate::kernels::{integrated_kernels, QuadratureConfig};
use crate::quadrature::GaussLegendre;

/// Space/time discretization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub nz: usize,
    pub nt: usize,
}

impl Grid {
    pub fn new(nz: usize, nt: usize) -> Result<Grid> {
        let g = Grid { nz, nt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nz == 0 || self.nt == 0 {
            return Err(Error::Input(format!("grid needs nz, nt >= 1, got {self:?}")));
        }
        Ok(())
    }

    pub fn refined(&self) -> Grid {
        Grid {
            nz: 2 * self.nz,
            nt: 2 * self.nt,
        }
    }

    /// Length of the state vector.
    pub fn state_len(&self) -> usize {
        2 * self.nz + 2
    }

    pub fn y1(&self) -> usize {
        2 * self.nz
    }

    pub fn y2(&self) -> usize {
        2 * self.nz + 1
    }
}

/// Input noise: white boundary Stokes noise and a coherent spin state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub xi1_in: f64,
    pub xi2_in: f64,
    /// `⟨J_z²⟩ = ⟨J_y²⟩` of the whole sample; `None` means `J̄ₓ/2`.
    #[serde(default)]
    pub spin_variance_total: Option<f64>,
}

impl NoiseSpec {
    pub fn coherent(xi1_in: f64, xi2_in: f64) -> Self {
        NoiseSpec {
            xi1_in,
            xi2_in,
            spin_variance_total: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.xi1_in < -1.0 || self.xi2_in < -1.0 || !self.xi1_in.is_finite() || !self.xi2_in.is_finite() {
            return Err(Error::Domain("input Mandel parameters must be finite and >= -1".into()));
        }
        if let Some(v) = self.spin_variance_total {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain("spin variance must be non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn spin_variance(&self, cs: &CouplingSet) -> f64 {
        self.spin_variance_total.unwrap_or(cs.jx_bar / 2.0)
    }

    /// Covariance of the boundary noise integrated over one step.
    fn step_noise(&self, cs: &CouplingSet, dt: f64) -> [f64; 2] {
        [cs.xi3_bar * (1.0 + self.xi1_in) * dt, cs.xi3_bar * (1.0 + self.xi2_in) * dt]
    }
}

fn check_inputs(cs: &CouplingSet, grid: &Grid) -> Result<()> {
    grid.validate()?;
    if !(cs.length > 0.0) || !(cs.duration > 0.0) {
        return Err(Error::Domain("sample length and pulse duration must be positive".into()));
    }
    Ok(())
}

/// Stokes fluctuations along the sample for a given spin profile.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldProfile {
    /// `(Ξ₁, Ξ₂)` at the `Nz + 1` cell edges, boundary first.
    pub edges: Vec<[f64; 2]>,
    /// `(Ξ₁, Ξ₂)` at the cell midpoints.
    pub midpoints: Vec<[f64; 2]>,
}

#[inline]
fn rot(c: f64, s: f64, v: [f64; 2]) -> [f64; 2] {
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

// Sweep across the cells. `scale` multiplies the spin sources (dt for
// time-integrated fields, 1 for instantaneous ones). Returns the field at the
// far boundary and writes midpoint values into `mid`.
fn sweep_cells(cs: &CouplingSet, dz: f64, jz: &[f64], jy: &[f64], boundary: [f64; 2], scale: f64, mid: &mut [[f64; 2]], mut edges: Option<&mut Vec<[f64; 2]>>) -> [f64; 2] {
    let (s1, c1) = (cs.kappa2 * dz).sin_cos();
    let (sh, ch) = (cs.kappa2 * dz / 2.0).sin_cos();
    let b1 = 2.0 * cs.beta * cs.xi3_bar * scale;
    let b2 = -2.0 * cs.epsilon * cs.xi3_bar * scale;
    let mut w = boundary;
    if let Some(e) = edges.as_deref_mut() {
        e.push(w);
    }
    for k in 0..jz.len() {
        let src = [b1 * jz[k], b2 * jy[k]];
        let half = rot(ch, sh, w);
        mid[k] = [half[0] + 0.5 * src[0], half[1] + 0.5 * src[1]];
        let full = rot(c1, s1, w);
        let rs = rot(ch, sh, src);
        w = [full[0] + rs[0], full[1] + rs[1]];
        if let Some(e) = edges.as_deref_mut() {
            e.push(w);
        }
    }
    w
}

/// Instantaneous Stokes profile driven by cell-integrated spins `(jz, jy)`
/// and boundary values `Ξ(0)`; the birefringent rotation within a cell is exact.
pub fn step_fields(jz: &[f64], jy: &[f64], boundary: [f64; 2], cs: &CouplingSet, grid: &Grid) -> Result<FieldProfile> {
    check_inputs(cs, grid)?;
    if jz.len() != grid.nz || jy.len() != grid.nz {
        return Err(Error::Input("spin profile length differs from grid.nz".into()));
    }
    let dz = cs.length / grid.nz as f64;
    let mut mid = vec![[0.0; 2]; grid.nz];
    let mut edges = Vec::with_capacity(grid.nz + 1);
    sweep_cells(cs, dz, jz, jy, boundary, 1.0, &mut mid, Some(&mut edges));
    Ok(FieldProfile { edges, midpoints: mid })
}

fn precess(jz: &mut [f64], jy: &mut [f64], angle: f64) {
    let (s, c) = angle.sin_cos();
    for (a, b) in jz.iter_mut().zip(jy.iter_mut()) {
        let (z, y) = (*a, *b);
        *a = c * z + s * y;
        *b = -s * z + c * y;
    }
}

/// One spin update of length `dt` with the given midpoint fields: half
/// precession, field-driven kick, half precession.
pub fn step_spins(jz: &mut [f64], jy: &mut [f64], fields: &[[f64; 2]], cs: &CouplingSet, dt: f64, grid: &Grid) -> Result<()> {
    check_inputs(cs, grid)?;
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    if jz.len() != grid.nz || jy.len() != grid.nz || fields.len() != grid.nz {
        return Err(Error::Input("profile length differs from grid.nz".into()));
    }
    let dz = cs.length / grid.nz as f64;
    let weight = cs.jx_density * dz * dt;
    precess(jz, jy, cs.omega * dt / 2.0);
    for k in 0..grid.nz {
        jz[k] -= cs.theta_y * weight * fields[k][0];
        jy[k] += cs.theta_z * weight * fields[k][1];
    }
    precess(jz, jy, cs.omega * dt / 2.0);
    Ok(())
}

/// The discrete time step shared by every engine.
#[derive(Clone, Debug)]
pub struct Stepper {
    cs: CouplingSet,
    grid: Grid,
    dz: f64,
    dt: f64,
}

/// Scratch buffers for [`Stepper::step`].
#[derive(Clone, Debug)]
pub struct Scratch {
    mid: Vec<[f64; 2]>,
    mid2: Vec<[f64; 2]>,
    jz: Vec<f64>,
    jy: Vec<f64>,
}

impl Stepper {
    pub fn new(cs: &CouplingSet, grid: &Grid) -> Result<Stepper> {
        check_inputs(cs, grid)?;
        Ok(Stepper {
            cs: cs.clone(),
            grid: *grid,
            dz: cs.length / grid.nz as f64,
            dt: cs.duration / grid.nt as f64,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scratch(&self) -> Scratch {
        let nz = self.grid.nz;
        Scratch {
            mid: vec![[0.0; 2]; nz],
            mid2: vec![[0.0; 2]; nz],
            jz: vec![0.0; nz],
            jy: vec![0.0; nz],
        }
    }

    /// Advances `state` by one step with integrated boundary noise `w`.
    pub fn step(&self, state: &mut [f64], w: [f64; 2], scratch: &mut Scratch) {
        let nz = self.grid.nz;
        let cs = &self.cs;
        let half = cs.omega * self.dt / 2.0;
        let weight = cs.jx_density * self.dz;
        let (ky, kz) = (-cs.theta_y * weight, cs.theta_z * weight);
        let (spins, acc) = state.split_at_mut(2 * nz);
        let (jz, jy) = spins.split_at_mut(nz);
        precess(jz, jy, half);

        let out1 = sweep_cells(cs, self.dz, jz, jy, w, self.dt, &mut scratch.mid, None);
        for k in 0..nz {
            scratch.jz[k] = jz[k] + ky * scratch.mid[k][0];
            scratch.jy[k] = jy[k] + kz * scratch.mid[k][1];
        }
        let out2 = sweep_cells(cs, self.dz, &scratch.jz, &scratch.jy, w, self.dt, &mut scratch.mid2, None);
        for k in 0..nz {
            jz[k] += 0.5 * ky * (scratch.mid[k][0] + scratch.mid2[k][0]);
            jy[k] += 0.5 * kz * (scratch.mid[k][1] + scratch.mid2[k][1]);
        }
        acc[0] += 0.5 * (out1[0] + out2[0]);
        acc[1] += 0.5 * (out1[1] + out2[1]);

        precess(jz, jy, half);
    }

    /// Matrix form `x' = Φx + Γw` of one step.
    pub fn linear_maps(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.grid.state_len();
        let mut phi = DMatrix::zeros(n, n);
        let mut gamma = DMatrix::zeros(n, 2);
        let mut scratch = self.scratch();
        let mut x = vec![0.0; n];
        for i in 0..n {
            x.iter_mut().for_each(|v| *v = 0.0);
            x[i] = 1.0;
            self.step(&mut x, [0.0, 0.0], &mut scratch);
            phi.set_column(i, &DVector::from_column_slice(&x));
        }
        for j in 0..2 {
            x.iter_mut().for_each(|v| *v = 0.0);
            let mut w = [0.0, 0.0];
            w[j] = 1.0;
            self.step(&mut x, w, &mut scratch);
            gamma.set_column(j, &DVector::from_column_slice(&x));
        }
        (phi, gamma)
    }
}

/// Second moments at `t = T`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceState {
    pub grid: Grid,
    /// Full covariance of `[J_z, J_y, Y₁, Y₂]`.
    pub matrix: DMatrix<f64>,
    /// Contribution of the initial spin fluctuations alone.
    pub spin_part: DMatrix<f64>,
    /// Contribution of the boundary Stokes noise alone.
    pub field_part: DMatrix<f64>,
}

impl CovarianceState {
    pub fn var_y1(&self) -> f64 {
        let i = self.grid.y1();
        self.matrix[(i, i)]
    }

    pub fn var_y2(&self) -> f64 {
        let i = self.grid.y2();
        self.matrix[(i, i)]
    }

    /// Total `⟨J_z²⟩` and `⟨J_y²⟩` of the sample.
    pub fn spin_totals(&self) -> (f64, f64) {
        let nz = self.grid.nz;
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..nz {
            for j in 0..nz {
                a += self.matrix[(i, j)];
                b += self.matrix[(nz + i, nz + j)];
            }
        }
        (a, b)
    }

    /// Checks symmetry and the eigenvalue floor `λ_min ≥ -1e-9·trace`.
    pub fn check(&self) -> Result<()> {
        let m = &self.matrix;
        let scale = m.amax().max(f64::MIN_POSITIVE);
        if (m - m.transpose()).amax() > 1e-10 * scale {
            return Err(Error::Precondition("covariance matrix is not symmetric".into()));
        }
        let trace = m.trace();
        let sym = (m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let min = eig.eigenvalues.min();
        if min < -1e-9 * trace {
            return Err(Error::Precondition(format!("covariance has eigenvalue {min:e} below floor")));
        }
        Ok(())
    }
}

// Φ^k and Σ_{j<k} Φ^j Q Φ^jᵀ by binary doubling.
fn power_and_sum(phi: &DMatrix<f64>, q: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = phi.nrows();
    let mut acc_p = DMatrix::identity(n, n);
    let mut acc_s = DMatrix::zeros(n, n);
    let mut base_p = phi.clone();
    let mut base_s = q.clone();
    let mut k = k;
    while k > 0 {
        if k & 1 == 1 {
            // apply acc first, then base
            acc_s = &base_p * &acc_s * base_p.transpose() + &base_s;
            acc_p = &base_p * &acc_p;
        }
        k >>= 1;
        if k > 0 {
            base_s = &base_p * &base_s * base_p.transpose() + &base_s;
            base_p = &base_p * &base_p;
        }
    }
    (acc_p, acc_s)
}

/// `Φ^k` for the one-step map.
pub fn step_power(phi: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = phi.nrows();
    power_and_sum(phi, &DMatrix::zeros(n, n), k).0
}

fn initial_covariance(cs: &CouplingSet, grid: &Grid, noise: &NoiseSpec) -> DMatrix<f64> {
    let n = grid.state_len();
    let per_cell = noise.spin_variance(cs) / grid.nz as f64;
    let mut c0 = DMatrix::zeros(n, n);
    for i in 0..2 * grid.nz {
        c0[(i, i)] = per_cell;
    }
    c0
}

/// Exact second moments of the discrete scheme at `t = T`.
pub fn propagate_covariance(cs: &CouplingSet, grid: &Grid, noise: &NoiseSpec) -> Result<CovarianceState> {
    noise.validate()?;
    let stepper = Stepper::new(cs, grid)?;
    let (phi, gamma) = stepper.linear_maps();
    let qd = noise.step_noise(cs, stepper.dt());
    let q = &gamma * DMatrix::from_diagonal(&DVector::from_vec(qd.to_vec())) * gamma.transpose();
    let (pn, field_part) = power_and_sum(&phi, &q, grid.nt);
    let c0 = initial_covariance(cs, grid, noise);
    let spin_part = &pn * c0 * pn.transpose();
    Ok(CovarianceState {
        grid: *grid,
        matrix: &spin_part + &field_part,
        spin_part,
        field_part,
    })
}

/// Same as [`propagate_covariance`] but by explicit step-by-step recursion.
pub fn propagate_covariance_sequential(cs: &CouplingSet, grid: &Grid, noise: &NoiseSpec) -> Result<DMatrix<f64>> {
    noise.validate()?;
    let stepper = Stepper::new(cs, grid)?;
    let (phi, gamma) = stepper.linear_maps();
    let qd = noise.step_noise(cs, stepper.dt());
    let q = &gamma * DMatrix::from_diagonal(&DVector::from_vec(qd.to_vec())) * gamma.transpose();
    let mut c = initial_covariance(cs, grid, noise);
    for _ in 0..grid.nt {
        c = &phi * c * phi.transpose() + &q;
    }
    Ok(c)
}

/// `ξ_i = Var[Y_i]/(Ξ̄₃T) - 1`.
pub fn output_mandel(cov: &CovarianceState, cs: &CouplingSet) -> Result<(f64, f64)> {
    let shot = cs.photon_number();
    if !(shot > 0.0) {
        return Err(Error::Domain("photon number Ξ̄₃T must be positive".into()));
    }
    Ok((cov.var_y1() / shot - 1.0, cov.var_y2() / shot - 1.0))
}

/// Monte-Carlo estimates with jackknife standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub realizations: usize,
    pub var_y1: f64,
    pub var_y2: f64,
    pub se_y1: f64,
    pub se_y2: f64,
}

impl MonteCarloEstimate {
    pub fn mandel(&self, cs: &CouplingSet) -> Result<(f64, f64)> {
        let shot = cs.photon_number();
        if !(shot > 0.0) {
            return Err(Error::Domain("photon number Ξ̄₃T must be positive".into()));
        }
        Ok((self.var_y1 / shot - 1.0, self.var_y2 / shot - 1.0))
    }
}

// Sample variance and its leave-one-out jackknife standard error.
fn variance_jackknife(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let s1: f64 = x.iter().sum();
    let s2: f64 = x.iter().map(|v| v * v).sum();
    let var = (s2 - s1 * s1 / n) / (n - 1.0);
    let m = n - 1.0;
    let loo: Vec<f64> = x
        .iter()
        .map(|v| {
            let a = s1 - v;
            let b = s2 - v * v;
            (b - a * a / m) / (m - 1.0)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n;
    let se = ((n - 1.0) / n * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt();
    (var, se)
}

/// Samples the discrete scheme with Gaussian inputs. Realization `i` draws
/// from ChaCha8 stream `i` of `seed`, so output is reproducible and
/// independent of the thread count.
pub fn monte_carlo(cs: &CouplingSet, grid: &Grid, noise: &NoiseSpec, realizations: usize, seed: u64) -> Result<MonteCarloEstimate> {
    noise.validate()?;
    if realizations < 2 {
        return Err(Error::Input("Monte Carlo needs at least two realizations".into()));
    }
    let stepper = Stepper::new(cs, grid)?;
    let qd = noise.step_noise(cs, stepper.dt());
    let wsd = [qd[0].sqrt(), qd[1].sqrt()];
    let ssd = (noise.spin_variance(cs) / grid.nz as f64).sqrt();
    let n = grid.state_len();
    let samples: Vec<(f64, f64)> = (0..realizations)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut x = vec![0.0; n];
            for v in x.iter_mut().take(2 * grid.nz) {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v = ssd * g;
            }
            let mut scratch = stepper.scratch();
            for _ in 0..grid.nt {
                let g1: f64 = StandardNormal.sample(&mut rng);
                let g2: f64 = StandardNormal.sample(&mut rng);
                stepper.step(&mut x, [wsd[0] * g1, wsd[1] * g2], &mut scratch);
            }
            (x[grid.y1()], x[grid.y2()])
        })
        .collect();
    let y1: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let y2: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (var_y1, se_y1) = variance_jackknife(&y1);
    let (var_y2, se_y2) = variance_jackknife(&y2);
    Ok(MonteCarloEstimate {
        realizations,
        var_y1,
        var_y2,
        se_y1,
        se_y2,
    })
}

/// Output variances from the time-integrated kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelVariance {
    pub var_y1: f64,
    pub var_y2: f64,
    /// Initial-spin contribution to `Var Y₁`.
    pub spin_part_y1: f64,
    /// Boundary-noise contribution to `Var Y₁`.
    pub field_part_y1: f64,
}

/// Settings of the kernel-quadrature variance engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelQuadrature {
    pub nodes: usize,
    pub panels: usize,
    pub inversion: QuadratureConfig,
}

impl Default for KernelQuadrature {
    fn default() -> Self {
        KernelQuadrature {
            nodes: 16,
            panels: 4,
            inversion: QuadratureConfig::default(),
        }
    }
}

/// `Var Y_i = Σ_j Ξ̄₃(1+ξ_j) ∫₀ᵀ A^ℳ_ij(L,τ)² dτ + (⟨J²⟩/L) Σ_ν ∫₀ᴸ A^ℱ_iν(u,T)² du`,
/// with `A` the time integral of a kernel.
pub fn kernel_variance(cs: &CouplingSet, noise: &NoiseSpec, quad: &KernelQuadrature) -> Result<KernelVariance> {
    noise.validate()?;
    if !(cs.length > 0.0) || !(cs.duration > 0.0) {
        return Err(Error::Domain("sample length and pulse duration must be positive".into()));
    }
    let gl = GaussLegendre::new(quad.nodes);
    let (l, t) = (cs.length, cs.duration);
    let time_pts = gl.composite_points(0.0, t, quad.panels);
    let space_pts = gl.composite_points(0.0, l, quad.panels);

    let m_terms: Vec<[f64; 4]> = time_pts
        .par_iter()
        .map(|&(tau, w)| {
            let k = integrated_kernels(l, tau, cs, &quad.inversion)?;
            let a = k.m + k.m_time_impulse;
            Ok([w * a[(0, 0)].powi(2), w * a[(0, 1)].powi(2), w * a[(1, 0)].powi(2), w * a[(1, 1)].powi(2)])
        })
        .collect::<Result<_>>()?;
    let f_terms: Vec<[f64; 2]> = space_pts
        .par_iter()
        .map(|&(u, w)| {
            let k = integrated_kernels(u, t, cs, &quad.inversion)?;
            let a = k.f;
            Ok([w * (a[(0, 0)].powi(2) + a[(0, 1)].powi(2)), w * (a[(1, 0)].powi(2) + a[(1, 1)].powi(2))])
        })
        .collect::<Result<_>>()?;

    let n1 = cs.xi3_bar * (1.0 + noise.xi1_in);
    let n2 = cs.xi3_bar * (1.0 + noise.xi2_in);
    let sum = |i: usize| m_terms.iter().map(|v| v[i]).sum::<f64>();
    let field_y1 = n1 * sum(0) + n2 * sum(1);
    let field_y2 = n1 * sum(2) + n2 * sum(3);
    let density = noise.spin_variance(cs) / l;
    let spin_y1 = density * f_terms.iter().map(|v| v[0]).sum::<f64>();
    let spin_y2 = density * f_terms.iter().map(|v| v[1]).sum::<f64>();
    Ok(KernelVariance {
        var_y1: field_y1 + spin_y1,
        var_y2: field_y2 + spin_y2,
        spin_part_y1: spin_y1,
        field_part_y1: field_y1,
    })
}

/// Which engine computes the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Engine {
    Covariance,
    MonteCarlo { realizations: usize },
    Kernels,
}

impl Engine {
    pub fn id(&self) -> &'static str {
        match self {
            Engine::Covariance => "covariance",
            Engine::MonteCarlo { .. } => "monte_carlo",
            Engine::Kernels => "kernels",
        }
    }
}

/// One scenario of the optical-activity sweep.
///
/// At each `βJ` the atom number is scaled so that `|β| J̄ₓ = βJ` while the
/// photon number follows the loss budget, `N_ph = ηf/|β|`, unless
/// `photon_number` overrides it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepScenario {
    pub label: String,
    /// Probe detuning from the reference transition, Hz (metadata only).
    pub detuning_hz: Option<f64>,
    pub alpha1_bar: f64,
    pub alpha2_bar: f64,
    /// Ground level whose orientation carries the spin.
    pub j0: HalfInt,
    /// `f = βS₀/σ_Δ`.
    pub faraday_factor: f64,
    pub eta: f64,
    #[serde(default)]
    pub photon_number: Option<f64>,
    /// `J̄ₓ` per unit `βJ` when `β = 0`.
    #[serde(default = "default_reference_jx")]
    pub reference_jx: f64,
    pub noise: NoiseSpec,
    pub geometry: BeamGeometry,
    pub include_light_shift: bool,
    pub grid: Grid,
    pub engine: Engine,
    #[serde(default)]
    pub kernel_quadrature: KernelQuadrature,
    pub seed: u64,
    #[serde(default = "default_loss_bound")]
    pub loss_bound: f64,
}

fn default_reference_jx() -> f64 {
    1e6
}

fn default_loss_bound() -> f64 {
    DEFAULT_LOSS_BOUND
}

/// One point of a [`VarianceCurve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub beta_j: f64,
    pub xi1: f64,
    pub xi2: f64,
    /// `ξ₁_in + 2ηf·βJ`.
    pub xi1_faraday: f64,
    /// Initial-spin contribution to `Var Y₁`, in units of `Ξ̄₃T`.
    pub xi1_atomic_term: f64,
    /// Boundary-noise contribution to `Var Y₁`, in units of `Ξ̄₃T`, minus one.
    pub xi1_field_term: f64,
    pub atoms: f64,
    pub photons: f64,
    pub feasible: bool,
    /// Monte-Carlo standard errors of `ξ₁`, `ξ₂`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub label: String,
    pub detuning_hz: Option<f64>,
    pub eta: f64,
    pub faraday_factor: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub grid: Grid,
    pub engine: String,
    pub seed: u64,
    pub xi1_in: f64,
    pub xi2_in: f64,
    pub include_light_shift: bool,
    pub warnings: Vec<String>,
}

/// `ξ₁(βJ)`, `ξ₂(βJ)` with companion series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCurve {
    pub points: Vec<CurvePoint>,
    pub metadata: CurveMetadata,
}

impl VarianceCurve {
    pub const CSV_HEADER: &'static str = "betaJ,xi1,xi2,xi1_faraday,xi1_atomic_term";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                p.beta_j, p.xi1, p.xi2, p.xi1_faraday, p.xi1_atomic_term
            ));
        }
        out
    }
}

impl SweepScenario {
    pub fn beta_epsilon(&self) -> Result<(f64, f64)> {
        let probe = BeamGeometry {
            linear_density: 0.0,
            photon_flux: 0.0,
            ..self.geometry.clone()
        };
        let cs = coupling_set(self.alpha1_bar, self.alpha2_bar, self.j0, &probe, false)?;
        Ok((cs.beta, cs.epsilon))
    }

    /// Coupling set realizing optical activity `beta_j`.
    pub fn coupling_at(&self, beta_j: f64) -> Result<(CouplingSet, f64, f64)> {
        if !(beta_j >= 0.0 && beta_j.is_finite()) {
            return Err(Error::Domain(format!("βJ must be finite and non-negative, got {beta_j}")));
        }
        let (beta, _) = self.beta_epsilon()?;
        let photons = match self.photon_number {
            Some(n) => n,
            None if beta != 0.0 => self.eta * self.faraday_factor.abs() / beta.abs(),
            None => {
                return Err(Error::Input(
                    "β vanishes: the photon number must be given explicitly".into(),
                ))
            }
        };
        let jx = if beta != 0.0 { beta_j / beta.abs() } else { beta_j * self.reference_jx };
        let j = self.j0.value();
        let l = self.geometry.sample_length;
        let geom = BeamGeometry {
            linear_density: jx / (j * l),
            photon_flux: photons / self.geometry.pulse_duration,
            ..self.geometry.clone()
        };
        let cs = coupling_set(self.alpha1_bar, self.alpha2_bar, self.j0, &geom, self.include_light_shift)?;
        Ok((cs, jx / j, photons))
    }

    /// One curve point at optical activity `beta_j`.
    pub fn point(&self, beta_j: f64) -> Result<CurvePoint> {
        let (cs, atoms, photons) = self.coupling_at(beta_j)?;
        let shot = cs.photon_number();
        let cov = propagate_covariance(&cs, &self.grid, &self.noise)?;
        let y1 = self.grid.y1();
        let mut atomic = cov.spin_part[(y1, y1)] / shot;
        let mut field = cov.field_part[(y1, y1)] / shot - 1.0;
        let (xi1, xi2, se) = match &self.engine {
            Engine::Covariance => {
                let (a, b) = output_mandel(&cov, &cs)?;
                (a, b, None)
            }
            Engine::MonteCarlo { realizations } => {
                let mc = monte_carlo(&cs, &self.grid, &self.noise, *realizations, self.seed)?;
                let (a, b) = mc.mandel(&cs)?;
                (a, b, Some([mc.se_y1 / shot, mc.se_y2 / shot]))
            }
            Engine::Kernels => {
                let kv = kernel_variance(&cs, &self.noise, &self.kernel_quadrature)?;
                atomic = kv.spin_part_y1 / shot;
                field = kv.field_part_y1 / shot - 1.0;
                (kv.var_y1 / shot - 1.0, kv.var_y2 / shot - 1.0, None)
            }
        };
        let capacity = if self.eta > 0.0 { photons / self.eta } else { f64::INFINITY };
        let feasible = self.eta <= self.loss_bound && atoms / capacity <= self.loss_bound;
        Ok(CurvePoint {
            beta_j,
            xi1,
            xi2,
            xi1_faraday: self.noise.xi1_in + 2.0 * self.eta * self.faraday_factor * beta_j,
            xi1_atomic_term: atomic,
            xi1_field_term: field,
            atoms,
            photons,
            feasible,
            standard_errors: se,
        })
    }
}

/// Runs every `βJ` point of a scenario; points are computed in parallel and
/// returned in input order.
pub fn sweep(scenario: &SweepScenario, beta_j_values: &[f64]) -> Result<VarianceCurve> {
    if beta_j_values.is_empty() {
        return Err(Error::Input("βJ list is empty".into()));
    }
    scenario.grid.validate()?;
    scenario.noise.validate()?;
    let points: Vec<CurvePoint> = beta_j_values.par_iter().map(|&b| scenario.point(b)).collect::<Result<_>>()?;
    assemble_curve(scenario, points)
}

/// Wraps computed points with the scenario metadata and budget warnings.
pub fn assemble_curve(scenario: &SweepScenario, points: Vec<CurvePoint>) -> Result<VarianceCurve> {
    let (beta, epsilon) = scenario.beta_epsilon()?;
    let mut warnings = Vec::new();
    if scenario.eta > scenario.loss_bound {
        warnings.push(format!(
            "incoherent-loss fraction exceeds recommended bound: η = {} > {}",
            scenario.eta, scenario.loss_bound
        ));
    }
    for p in points.iter().filter(|p| !p.feasible) {
        warnings.push(format!("βJ = {}: photon budget infeasible (N_a = {:.3e})", p.beta_j, p.atoms));
    }
    for w in &warnings {
        log::warn!("{}: {w}", scenario.label);
    }
    Ok(VarianceCurve {
        points,
        metadata: CurveMetadata {
            label: scenario.label.clone(),
            detuning_hz: scenario.detuning_hz,
            eta: scenario.eta,
            faraday_factor: scenario.faraday_factor,
            beta,
            epsilon,
            grid: scenario.grid,
            engine: scenario.engine.id().to_string(),
            seed: scenario.seed,
            xi1_in: scenario.noise.xi1_in,
            xi2_in: scenario.noise.xi2_in,
            include_light_shift: scenario.include_light_shift,
            warnings,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn faraday(beta: f64) -> CouplingSet {
        let mut cs = CouplingSet::uncoupled(1e4, 1e4, 1.0, 1.0);
        cs.beta = beta;
        cs.theta_z = beta;
        cs
    }

    fn general() -> CouplingSet {
        let mut cs = faraday(2e-3);
        cs.epsilon = -4e-4;
        cs.theta_y = -4e-4;
        cs.kappa2 = 0.3;
        cs.omega = 0.5;
        cs
    }

    #[test]
    fn uncoupled_fields_are_constant() {
        let cs = CouplingSet::uncoupled(1.0, 1.0, 1.0, 1.0);
        let g = Grid::new(5, 1).unwrap();
        let prof = step_fields(&[1.0; 5], &[2.0; 5], [0.3, -0.2], &cs, &g).unwrap();
        assert!(prof.edges.iter().all(|e| *e == [0.3, -0.2]));
    }

    #[test]
    fn birefringence_quarter_turn() {
        let mut cs = CouplingSet::uncoupled(1.0, 1.0, 1.0, 1.0);
        cs.kappa2 = std::f64::consts::FRAC_PI_2;
        let g = Grid::new(7, 1).unwrap();
        let prof = step_fields(&[0.0; 7], &[0.0; 7], [1.0, 0.0], &cs, &g).unwrap();
        let end = prof.edges[7];
        assert!(end[0].abs() < 1e-15 && (end[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_faraday_profile() {
        let cs = faraday(1e-3);
        let g = Grid::new(4, 1).unwrap();
        let jz = [0.5; 4];
        let prof = step_fields(&jz, &[0.0; 4], [0.1, 0.0], &cs, &g).unwrap();
        assert_relative_eq!(prof.edges[4][0], 0.1 + 2.0 * cs.beta * cs.xi3_bar * 2.0, max_relative = 1e-14);
    }

    #[test]
    fn precession_by_pi_negates() {
        let mut cs = CouplingSet::uncoupled(1.0, 1.0, 1.0, 1.0);
        cs.omega = std::f64::consts::PI;
        let g = Grid::new(2, 1).unwrap();
        let (mut jz, mut jy) = (vec![1.0, -2.0], vec![0.5, 3.0]);
        step_spins(&mut jz, &mut jy, &[[0.0; 2]; 2], &cs, 1.0, &g).unwrap();
        assert!((jz[0] + 1.0).abs() < 1e-15 && (jy[1] + 3.0).abs() < 1e-15);
    }

    #[test]
    fn spin_source_grows_linearly() {
        let cs = faraday(1e-3);
        let g = Grid::new(1, 1).unwrap();
        let (mut jz, mut jy) = (vec![0.0], vec![0.0]);
        step_spins(&mut jz, &mut jy, &[[0.0, 2.0]], &cs, 0.5, &g).unwrap();
        let first = jy[0];
        step_spins(&mut jz, &mut jy, &[[0.0, 2.0]], &cs, 0.5, &g).unwrap();
        assert_relative_eq!(jy[0], 2.0 * first, max_relative = 1e-15);
        assert_relative_eq!(first, cs.theta_z * cs.jx_density * 0.5 * 2.0, max_relative = 1e-15);
    }

    #[test]
    fn doubling_matches_sequential() {
        let cs = general();
        let g = Grid::new(6, 13).unwrap();
        let noise = NoiseSpec::coherent(0.2, -0.1);
        let a = propagate_covariance(&cs, &g, &noise).unwrap();
        let b = propagate_covariance_sequential(&cs, &g, &noise).unwrap();
        assert!((&a.matrix - &b).amax() < 1e-10 * b.amax());
        a.check().unwrap();
    }

    #[test]
    fn pure_faraday_is_exact() {
        let cs = faraday(1e-3);
        let noise = NoiseSpec::coherent(0.3, 0.2);
        let n = cs.photon_number();
        let expected = n * (1.0 + 0.3) + (2.0 * cs.beta * n).powi(2) * cs.jx_bar / 2.0;
        for g in [Grid::new(1, 1).unwrap(), Grid::new(5, 9).unwrap()] {
            let cov = propagate_covariance(&cs, &g, &noise).unwrap();
            assert_relative_eq!(cov.var_y1(), expected, max_relative = 1e-12);
            let (_, xi2) = output_mandel(&cov, &cs).unwrap();
            assert_relative_eq!(xi2, 0.2, max_relative = 1e-12);
        }
    }

    #[test]
    fn rotation_preserves_spin_covariance() {
        let mut cs = CouplingSet::uncoupled(100.0, 10.0, 1.0, 1.0);
        cs.omega = 3.7;
        let g = Grid::new(3, 11).unwrap();
        let cov = propagate_covariance(&cs, &g, &NoiseSpec::coherent(0.0, 0.0)).unwrap();
        let (a, b) = cov.spin_totals();
        assert_relative_eq!(a, 50.0, max_relative = 1e-13);
        assert_relative_eq!(b, 50.0, max_relative = 1e-13);
        let (xi1, xi2) = output_mandel(&cov, &cs).unwrap();
        assert!(xi1.abs() < 1e-13 && xi2.abs() < 1e-13);
    }

    #[test]
    fn jackknife_of_known_sample() {
        let (v, se) = variance_jackknife(&[1.0, 2.0, 3.0, 4.0]);
        assert_relative_eq!(v, 5.0 / 3.0, max_relative = 1e-14);
        assert!(se > 0.0);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let cs = general();
        let g = Grid::new(3, 5).unwrap();
        let noise = NoiseSpec::coherent(0.0, 0.0);
        let a = monte_carlo(&cs, &g, &noise, 200, 7).unwrap();
        let b = monte_carlo(&cs, &g, &noise, 200, 7).unwrap();
        assert_eq!(a, b);
        assert!(monte_carlo(&cs, &g, &noise, 1, 7).is_err());
    }

    #[test]
    fn csv_format() {
        let curve = VarianceCurve {
            points: vec![CurvePoint {
                beta_j: 0.5,
                xi1: 1.0,
                xi2: 0.0,
                xi1_faraday: 1.0,
                xi1_atomic_term: 1.0,
                xi1_field_term: 0.0,
                atoms: 1.0,
                photons: 1.0,
                feasible: true,
                standard_errors: None,
            }],
            metadata: CurveMetadata {
                label: "x".into(),
                detuning_hz: None,
                eta: 0.1,
                faraday_factor: 1.0,
                beta: 0.0,
                epsilon: 0.0,
                grid: Grid { nz: 1, nt: 1 },
                engine: "covariance".into(),
                seed: 0,
                xi1_in: 0.0,
                xi2_in: 0.0,
                include_light_shift: false,
                warnings: vec![],
            },
        };
        let csv = curve.to_csv();
        assert_eq!(csv.lines().next().unwrap(), VarianceCurve::CSV_HEADER);
        assert_eq!(csv.lines().nth(1).unwrap(), "5.000000000000e-1,1.000000000000e0,0.000000000000e0,1.000000000000e0,1.000000000000e0");
    }
}
