//! Laplace-space transfer matrices of the linear field/spin system and their
//! inversion to space-time kernels.
//!
//! The images are rational in `(p, s)` with a determinant quadratic in `p`,
//! so the spatial inversion is done in closed form and only the temporal
//! inversion is numerical. Impulsive parts are returned separately:
//! `ℳ` carries `δ(t)·R(κ₂z)` (birefringent rotation of the boundary signal)
//! and `𝒩` carries `δ(z)·P(Ωt)` (free precession of the local spin).

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::couplings::CouplingSet;
use crate::error::{Error, Result};

type C = Complex64;

/// Below this `|Δ|` a Laplace image is reported as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-300;

/// A point in the `(p, s)` Laplace domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplacePoint {
    /// Spatial variable, 1/m.
    pub p: C,
    /// Temporal variable, 1/s.
    pub s: C,
}

impl LaplacePoint {
    pub fn new(p: C, s: C) -> Self {
        LaplacePoint { p, s }
    }
}

/// The four transfer matrices: `ℳ` field→field, `𝒩` spin→spin,
/// `ℱ` spin→field, `𝒢` field→spin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelMatrices {
    pub m: Matrix2<C>,
    pub n: Matrix2<C>,
    pub f: Matrix2<C>,
    pub g: Matrix2<C>,
}

impl KernelMatrices {
    pub fn zeros() -> Self {
        let z = Matrix2::zeros();
        KernelMatrices { m: z, n: z, f: z, g: z }
    }

    /// `[[ℳ, ℱ], [𝒢, 𝒩]]`, the inverse of [`system_matrix`].
    pub fn block(&self) -> Matrix4<C> {
        let mut out = Matrix4::zeros();
        out.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.m);
        out.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.f);
        out.fixed_view_mut::<2, 2>(2, 0).copy_from(&self.g);
        out.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.n);
        out
    }

    fn scaled_add(&mut self, other: &KernelMatrices, k: C) {
        self.m += other.m * k;
        self.n += other.n * k;
        self.f += other.f * k;
        self.g += other.g * k;
    }
}

// Coefficients of w p² + u p + v.
#[derive(Clone, Copy, Debug)]
struct PPoly {
    w: C,
    u: C,
    v: C,
}

impl PPoly {
    fn lin(u: C, v: C) -> Self {
        PPoly { w: C::new(0.0, 0.0), u, v }
    }

    fn eval(&self, p: C) -> C {
        (self.w * p + self.u) * p + self.v
    }
}

// Numerators of ℳ, 𝒩, ℱ, 𝒢 and the determinant as polynomials in p at fixed s.
struct Images {
    a: C,
    b: C,
    c: C,
    // index: [matrix][row][col], matrix order m, n, f, g
    num: [[[PPoly; 2]; 2]; 4],
}

fn images(s: C, cs: &CouplingSet) -> Images {
    let (beta, eps, kap, om) = (cs.beta, cs.epsilon, cs.kappa2, cs.omega);
    let (ty, tz) = (cs.theta_y, cs.theta_z);
    let x = cs.xi3_bar;
    let j = cs.jx_density;
    let jx = j * x;
    let q = s * s + om * om;
    let zero = C::new(0.0, 0.0);

    let a = q;
    let b = s * (2.0 * (eps * tz + beta * ty) * jx);
    let c = q * (kap * kap) + (-2.0 * (eps * ty + beta * tz) * jx * om * kap + 4.0 * beta * eps * tz * ty * jx * jx);

    let pk = kap * kap;
    let m = [
        [
            PPoly::lin(q, s * (2.0 * eps * tz * jx)),
            PPoly::lin(zero, -q * kap + 2.0 * beta * tz * jx * om),
        ],
        [
            PPoly::lin(zero, q * kap - 2.0 * eps * ty * jx * om),
            PPoly::lin(q, s * (2.0 * beta * ty * jx)),
        ],
    ];
    let n = [
        [
            PPoly { w: s, u: C::from(2.0 * eps * tz * jx), v: s * pk },
            PPoly {
                w: C::from(om),
                u: zero,
                v: C::from(om * pk - 2.0 * eps * ty * jx * kap),
            },
        ],
        [
            PPoly {
                w: C::from(-om),
                u: zero,
                v: C::from(-om * pk + 2.0 * beta * tz * jx * kap),
            },
            PPoly { w: s, u: C::from(2.0 * beta * ty * jx), v: s * pk },
        ],
    ];
    let f = [
        [
            PPoly::lin(s * (2.0 * x * beta), C::from(-2.0 * x * eps * kap * om + 4.0 * beta * eps * tz * j * x * x)),
            PPoly::lin(C::from(2.0 * x * beta * om), s * (2.0 * x * eps * kap)),
        ],
        [
            PPoly::lin(C::from(2.0 * x * eps * om), s * (2.0 * x * beta * kap)),
            PPoly::lin(s * (-2.0 * x * eps), C::from(2.0 * x * beta * kap * om - 4.0 * beta * eps * ty * j * x * x)),
        ],
    ];
    let g = [
        [
            PPoly::lin(s * (-j * ty), C::from(j * tz * kap * om - 2.0 * eps * ty * tz * j * j * x)),
            PPoly::lin(C::from(j * tz * om), s * (j * ty * kap)),
        ],
        [
            PPoly::lin(C::from(j * ty * om), s * (j * tz * kap)),
            PPoly::lin(s * (j * tz), C::from(-j * ty * kap * om + 2.0 * beta * ty * tz * j * j * x)),
        ],
    ];
    Images { a, b, c, num: [m, n, f, g] }
}

fn from_entries(e: [[[C; 2]; 2]; 4]) -> KernelMatrices {
    let mk = |k: usize| Matrix2::new(e[k][0][0], e[k][0][1], e[k][1][0], e[k][1][1]);
    KernelMatrices { m: mk(0), n: mk(1), f: mk(2), g: mk(3) }
}

/// `Δ(p, s)`, the determinant of the Laplace-domain linear system.
pub fn determinant(pt: LaplacePoint, cs: &CouplingSet) -> C {
    let im = images(pt.s, cs);
    (im.a * pt.p + im.b) * pt.p + im.c
}

/// The Laplace-domain linear system on `(Ξ₁, Ξ₂, 𝒥_z, 𝒥_y)` whose right-hand
/// side is `(Ξ₁^in(s), Ξ₂^in(s), 𝒥_z^in(p), 𝒥_y^in(p))`.
pub fn system_matrix(pt: LaplacePoint, cs: &CouplingSet) -> Matrix4<C> {
    let (p, s) = (pt.p, pt.s);
    let x = cs.xi3_bar;
    let j = cs.jx_density;
    let r = |v: f64| C::from(v);
    Matrix4::new(
        p,
        r(cs.kappa2),
        r(-2.0 * cs.beta * x),
        r(0.0),
        r(-cs.kappa2),
        p,
        r(0.0),
        r(2.0 * cs.epsilon * x),
        r(cs.theta_y * j),
        r(0.0),
        s,
        r(-cs.omega),
        r(0.0),
        r(-cs.theta_z * j),
        r(cs.omega),
        s,
    )
}

/// The transfer matrices at one Laplace point.
pub fn kernel_images(pt: LaplacePoint, cs: &CouplingSet) -> Result<KernelMatrices> {
    let im = images(pt.s, cs);
    let det = (im.a * pt.p + im.b) * pt.p + im.c;
    if !(det.norm() >= SINGULAR_THRESHOLD) {
        return Err(Error::NearSingular {
            p: pt.p,
            s: pt.s,
            magnitude: det.norm(),
        });
    }
    let mut e = [[[C::new(0.0, 0.0); 2]; 2]; 4];
    for (k, mat) in im.num.iter().enumerate() {
        for r in 0..2 {
            for col in 0..2 {
                e[k][r][col] = mat[r][col].eval(pt.p) / det;
            }
        }
    }
    Ok(from_entries(e))
}

/// Pole structure of the images in `p` at fixed `s`.
#[derive(Clone, Debug, PartialEq)]
pub enum PoleStructure {
    /// `Σ± R± / (p - p±)`.
    Simple { roots: [C; 2], residues: [KernelMatrices; 2] },
    /// `R₁/(p - p₀) + R₂/(p - p₀)²`.
    Double { root: C, first: KernelMatrices, second: KernelMatrices },
}

/// Partial-fraction form of the images in `p`; `direct` is the
/// `p`-independent part (non-zero only for `𝒩`).
#[derive(Clone, Debug, PartialEq)]
pub struct PartialFraction {
    pub s: C,
    pub poles: PoleStructure,
    pub direct: KernelMatrices,
}

impl PartialFraction {
    /// Re-evaluates the images at `p` from the pole expansion.
    pub fn eval(&self, p: C) -> KernelMatrices {
        let mut out = self.direct;
        match &self.poles {
            PoleStructure::Simple { roots, residues } => {
                for (r, res) in roots.iter().zip(residues) {
                    out.scaled_add(res, 1.0 / (p - r));
                }
            }
            PoleStructure::Double { root, first, second } => {
                out.scaled_add(first, 1.0 / (p - root));
                out.scaled_add(second, 1.0 / ((p - root) * (p - root)));
            }
        }
        out
    }

    /// Spatial inverse at `z > 0`, excluding the `δ(z)` term carried by `direct`.
    pub fn invert(&self, z: f64) -> KernelMatrices {
        let mut out = KernelMatrices::zeros();
        match &self.poles {
            PoleStructure::Simple { roots, residues } => {
                for (r, res) in roots.iter().zip(residues) {
                    out.scaled_add(res, (r * z).exp());
                }
            }
            PoleStructure::Double { root, first, second } => {
                let e = (root * z).exp();
                out.scaled_add(first, e);
                out.scaled_add(second, e * z);
            }
        }
        out
    }
}

/// Relative root separation below which the roots are treated as double.
const DOUBLE_ROOT_TOLERANCE: f64 = 1e-10;

fn quadratic_roots(a: C, b: C, c: C) -> [C; 2] {
    let disc = (b * b - 4.0 * a * c).sqrt();
    // choose the sign that avoids cancellation
    let q = if (b.conj() * disc).re >= 0.0 { -0.5 * (b + disc) } else { -0.5 * (b - disc) };
    if q.norm() == 0.0 {
        return [C::new(0.0, 0.0); 2];
    }
    [q / a, c / q]
}

/// Roots of `Δ(·, s) = 0` and the residues of every image entry.
pub fn p_partial_fraction(s: C, cs: &CouplingSet) -> Result<PartialFraction> {
    let im = images(s, cs);
    let scale = s.norm_sqr() + cs.omega * cs.omega;
    if !(im.a.norm() > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Contour {
            s,
            reason: "leading coefficient s² + Ω² vanishes".into(),
        });
    }
    let roots = quadratic_roots(im.a, im.b, im.c);
    let root_scale = roots[0].norm().max(roots[1].norm());
    let double = (roots[0] - roots[1]).norm() <= DOUBLE_ROOT_TOLERANCE * root_scale || root_scale == 0.0;

    let mut direct = [[[C::new(0.0, 0.0); 2]; 2]; 4];
    let mut reduced = [[[(C::new(0.0, 0.0), C::new(0.0, 0.0)); 2]; 2]; 4];
    for k in 0..4 {
        for r in 0..2 {
            for col in 0..2 {
                let poly = im.num[k][r][col];
                let w = poly.w / im.a;
                direct[k][r][col] = w;
                reduced[k][r][col] = (poly.u - w * im.b, poly.v - w * im.c);
            }
        }
    }
    let build = |f: &dyn Fn(C, C) -> C| {
        let mut e = [[[C::new(0.0, 0.0); 2]; 2]; 4];
        for k in 0..4 {
            for r in 0..2 {
                for col in 0..2 {
                    let (u, v) = reduced[k][r][col];
                    e[k][r][col] = f(u, v);
                }
            }
        }
        from_entries(e)
    };
    let poles = if double {
        let root = 0.5 * (roots[0] + roots[1]);
        PoleStructure::Double {
            root,
            first: build(&|u, _| u / im.a),
            second: build(&|u, v| (u * root + v) / im.a),
        }
    } else {
        let (p1, p2) = (roots[0], roots[1]);
        PoleStructure::Simple {
            roots,
            residues: [
                build(&|u, v| (u * p1 + v) / (im.a * (p1 - p2))),
                build(&|u, v| (u * p2 + v) / (im.a * (p2 - p1))),
            ],
        }
    };
    Ok(PartialFraction {
        s,
        poles,
        direct: from_entries(direct),
    })
}

/// Roots in `s` of `Δ(p, ·) = 0` at fixed `p` (polariton dispersion).
pub fn dispersion_s_roots(p: C, cs: &CouplingSet) -> Result<[C; 2]> {
    let jx = cs.jx_density * cs.xi3_bar;
    let (beta, eps, kap, om) = (cs.beta, cs.epsilon, cs.kappa2, cs.omega);
    let (ty, tz) = (cs.theta_y, cs.theta_z);
    let pk = p * p + kap * kap;
    let a = pk;
    let b = p * (2.0 * (eps * tz + beta * ty) * jx);
    let c = pk * (om * om) + (-2.0 * (eps * ty + beta * tz) * jx * om * kap + 4.0 * beta * eps * tz * ty * jx * jx);
    if a.norm() == 0.0 {
        return Err(Error::Domain(format!("dispersion is degenerate at p = {p}")));
    }
    Ok(quadratic_roots(a, b, c))
}

/// Roots in `p` of `Δ(·, s) = 0` at fixed `s`.
pub fn dispersion_p_roots(s: C, cs: &CouplingSet) -> Result<[C; 2]> {
    let im = images(s, cs);
    if im.a.norm() == 0.0 {
        return Err(Error::Contour {
            s,
            reason: "leading coefficient s² + Ω² vanishes".into(),
        });
    }
    Ok(quadratic_roots(im.a, im.b, im.c))
}

/// Numerical inverse Laplace transform used for the time variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionMethod {
    /// Damped trapezoid on a vertical Bromwich line, Euler-accelerated.
    Euler,
    /// Fixed Talbot contour.
    Talbot,
}

/// Settings of the numerical time inversion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub method: InversionMethod,
    /// Damping `A`; the Bromwich abscissa is `s₀ = A/(2t)`.
    pub euler_damping: f64,
    /// Number of trapezoid terms before Euler summation.
    pub euler_terms: usize,
    /// Binomial order of the Euler summation.
    pub euler_order: usize,
    /// Talbot node count.
    pub talbot_nodes: usize,
    /// Rightward shift of the Talbot contour, 1/s.
    pub talbot_shift: f64,
    /// Largest accepted relative change between two refinement levels.
    pub tolerance: f64,
    /// Evaluate a refined rule and compare.
    pub refine: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            method: InversionMethod::Euler,
            euler_damping: 18.4,
            euler_terms: 15,
            euler_order: 11,
            talbot_nodes: 32,
            talbot_shift: 0.0,
            tolerance: 1e-6,
            refine: true,
        }
    }
}

impl QuadratureConfig {
    fn refined(&self) -> QuadratureConfig {
        QuadratureConfig {
            euler_damping: self.euler_damping + 4.6,
            euler_terms: 2 * self.euler_terms,
            euler_order: self.euler_order + 4,
            talbot_nodes: self.talbot_nodes + self.talbot_nodes / 2,
            refine: false,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.euler_damping > 0.0) || self.euler_terms == 0 || self.talbot_nodes < 2 || !(self.tolerance > 0.0) {
            return Err(Error::Input("invalid quadrature configuration".into()));
        }
        Ok(())
    }
}

const NV: usize = 16;

fn binomial_weights(order: usize) -> Vec<f64> {
    let mut w = vec![1.0; order + 1];
    for k in 1..=order {
        w[k] = w[k - 1] * (order + 1 - k) as f64 / k as f64;
    }
    let total = 2f64.powi(order as i32);
    w.iter().map(|x| x / total).collect()
}

fn invert_euler<F>(t: f64, quad: &QuadratureConfig, image: &F) -> Result<[f64; NV]>
where
    F: Fn(C) -> Result<[C; NV]>,
{
    let a = quad.euler_damping;
    let n = quad.euler_terms;
    let order = quad.euler_order;
    let pre = (a / 2.0).exp() / t;
    let mut partial = [0.0; NV];
    let first = image(C::new(a / (2.0 * t), 0.0))?;
    for (acc, v) in partial.iter_mut().zip(first.iter()) {
        *acc = 0.5 * v.re;
    }
    let mut sums = Vec::with_capacity(order + 1);
    for k in 1..=(n + order) {
        let s = C::new(a, 2.0 * std::f64::consts::PI * k as f64) / (2.0 * t);
        let v = image(s)?;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (acc, x) in partial.iter_mut().zip(v.iter()) {
            *acc += sign * x.re;
        }
        if k >= n {
            sums.push(partial);
        }
    }
    let weights = binomial_weights(order);
    let mut out = [0.0; NV];
    for (w, s) in weights.iter().zip(&sums) {
        for (o, x) in out.iter_mut().zip(s.iter()) {
            *o += w * x;
        }
    }
    for o in &mut out {
        *o *= pre;
    }
    Ok(out)
}

// Euler summation for a complex-valued original: both halves of the
// Bromwich line are needed.
fn invert_euler_complex<F>(t: f64, quad: &QuadratureConfig, image: &F) -> Result<[C; NV]>
where
    F: Fn(C) -> Result<[C; NV]>,
{
    let a = quad.euler_damping;
    let n = quad.euler_terms;
    let order = quad.euler_order;
    let pre = (a / 2.0).exp() / t;
    let mut partial = image(C::new(a / (2.0 * t), 0.0))?.map(|v| 0.5 * v);
    let mut sums = Vec::with_capacity(order + 1);
    for k in 1..=(n + order) {
        let w = 2.0 * std::f64::consts::PI * k as f64;
        let up = image(C::new(a, w) / (2.0 * t))?;
        let down = image(C::new(a, -w) / (2.0 * t))?;
        let sign = if k % 2 == 0 { 0.5 } else { -0.5 };
        for i in 0..NV {
            partial[i] += sign * (up[i] + down[i]);
        }
        if k >= n {
            sums.push(partial);
        }
    }
    let weights = binomial_weights(order);
    let mut out = [C::new(0.0, 0.0); NV];
    for (w, s) in weights.iter().zip(&sums) {
        for (o, x) in out.iter_mut().zip(s.iter()) {
            *o += w * x;
        }
    }
    Ok(out.map(|o| o * pre))
}

fn invert_talbot<F>(t: f64, quad: &QuadratureConfig, image: &F, omega: f64) -> Result<[f64; NV]>
where
    F: Fn(C) -> Result<[C; NV]>,
{
    let m = quad.talbot_nodes;
    let r = 2.0 * m as f64 / (5.0 * t);
    let shift = quad.talbot_shift;
    // the contour must pass to the right of the singularities at ±iΩ
    let theta_star = omega.abs() / r;
    let encloses = omega == 0.0 || (theta_star < std::f64::consts::PI && shift + omega.abs() / theta_star.tan() > 0.0);
    if !encloses {
        return Err(Error::Contour {
            s: C::new(0.0, omega),
            reason: format!("Talbot contour with r = {r:e} does not enclose ±iΩ; increase nodes or shift"),
        });
    }
    let mut out = [0.0; NV];
    let v0 = image(C::new(r + shift, 0.0))?;
    let e0 = ((r + shift) * t).exp();
    for (o, v) in out.iter_mut().zip(v0.iter()) {
        *o = 0.5 * (v * e0).re;
    }
    for k in 1..m {
        let theta = k as f64 * std::f64::consts::PI / m as f64;
        let cot = 1.0 / theta.tan();
        let s = C::new(r * theta * cot + shift, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let factor = (s * t).exp() * C::new(1.0, sigma);
        let v = image(s)?;
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += (x * factor).re;
        }
    }
    for o in &mut out {
        *o *= r / m as f64;
    }
    Ok(out)
}

fn invert_once<F>(t: f64, quad: &QuadratureConfig, image: &F, omega: f64) -> Result<[f64; NV]>
where
    F: Fn(C) -> Result<[C; NV]>,
{
    match quad.method {
        InversionMethod::Euler => invert_euler(t, quad, image),
        InversionMethod::Talbot => invert_talbot(t, quad, image, omega),
    }
}

// Relative change per matrix against that matrix's largest entry; changes
// below the absolute roundoff level `noise` count as zero.
fn refinement_change(a: &[f64; NV], b: &[f64; NV], noise: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..4 {
        let block = 4 * k..4 * k + 4;
        let scale = b[block.clone()].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let diff = block.clone().fold(0.0f64, |m, i| m.max((a[i] - b[i]).abs()));
        if diff <= noise {
            continue;
        }
        let rel = if scale > 1e-300 { diff / scale } else { f64::INFINITY };
        worst = worst.max(rel);
    }
    worst
}

// Amplification of image roundoff by the inversion sum at time `t`.
fn roundoff_gain(t: f64, quad: &QuadratureConfig) -> f64 {
    let terms = (quad.euler_terms + quad.euler_order + quad.talbot_nodes) as f64;
    let growth = match quad.method {
        InversionMethod::Euler => (quad.euler_damping / 2.0).exp() / t,
        InversionMethod::Talbot => (2.0 * quad.talbot_nodes as f64 / 5.0 + quad.talbot_shift * t).exp() * quad.talbot_nodes as f64 / t,
    };
    growth * terms * f64::EPSILON
}

/// `reference` is the magnitude of any O(1) part subtracted from the images
/// before inversion; it sets the roundoff floor together with the images.
fn invert<F>(z: f64, t: f64, quad: &QuadratureConfig, image: &F, omega: f64, reference: f64) -> Result<[f64; NV]>
where
    F: Fn(C) -> Result<[C; NV]>,
{
    quad.validate()?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!(
            "numerical time inversion needs t > 0, got {t}; the t = 0 response is carried by the impulse parts"
        )));
    }
    let largest = std::cell::Cell::new(reference);
    let tracked = |s: C| {
        let v = image(s)?;
        let m = v.iter().fold(largest.get(), |m, x| m.max(x.norm()));
        largest.set(m);
        Ok(v)
    };
    let coarse = invert_once(t, quad, &tracked, omega)?;
    if !quad.refine {
        return Ok(coarse);
    }
    let refined = quad.refined();
    let fine = invert_once(t, &refined, &tracked, omega)?;
    let noise = roundoff_gain(t, &refined) * largest.get();
    let change = refinement_change(&coarse, &fine, noise);
    if !(change <= quad.tolerance) {
        return Err(Error::Accuracy {
            z,
            t,
            change,
            tolerance: quad.tolerance,
        });
    }
    Ok(fine)
}

fn flatten(k: &KernelMatrices) -> [C; NV] {
    let mut out = [C::new(0.0, 0.0); NV];
    for (i, m) in [k.m, k.n, k.f, k.g].iter().enumerate() {
        out[4 * i] = m[(0, 0)];
        out[4 * i + 1] = m[(0, 1)];
        out[4 * i + 2] = m[(1, 0)];
        out[4 * i + 3] = m[(1, 1)];
    }
    out
}

fn unflatten(v: &[f64; NV]) -> [Matrix2<f64>; 4] {
    let mk = |i: usize| Matrix2::new(v[4 * i], v[4 * i + 1], v[4 * i + 2], v[4 * i + 3]);
    [mk(0), mk(1), mk(2), mk(3)]
}

/// Rotation `[[cos x, -sin x], [sin x, cos x]]`.
pub fn rotation(x: f64) -> Matrix2<f64> {
    let (s, c) = x.sin_cos();
    Matrix2::new(c, -s, s, c)
}

// sinh(dz)/d and cosh(dz) from d², branch free.
fn sinhc_cosh(d2: C, z: f64) -> (C, C) {
    let x = d2 * (z * z);
    if x.norm() < 1e-3 {
        let c = 1.0 + x * (0.5 + x * (1.0 / 24.0 + x * (1.0 / 720.0 + x / 40320.0)));
        let s = z * (1.0 + x * (1.0 / 6.0 + x * (1.0 / 120.0 + x * (1.0 / 5040.0 + x / 362880.0))));
        (s, c)
    } else {
        let d = d2.sqrt();
        let dz = d * z;
        (dz.sinh() / d, dz.cosh())
    }
}

/// Images inverted in `p` at distance `z`, with the `δ(z)` part of `𝒩` and
/// the `s → ∞` limit `R(κ₂z)` of `ℳ` removed.
pub fn spatial_inverse(z: f64, s: C, cs: &CouplingSet) -> Result<KernelMatrices> {
    let im = images(s, cs);
    if !(im.a.norm() > 0.0) {
        return Err(Error::Contour {
            s,
            reason: "leading coefficient s² + Ω² vanishes".into(),
        });
    }
    let m = -im.b / (2.0 * im.a);
    let d2 = (im.b * im.b - 4.0 * im.a * im.c) / (4.0 * im.a * im.a);
    let (sh, ch) = sinhc_cosh(d2, z);
    let e = (m * z).exp();
    let mut out = [[[C::new(0.0, 0.0); 2]; 2]; 4];
    for k in 0..4 {
        for r in 0..2 {
            for col in 0..2 {
                let poly = im.num[k][r][col];
                let w = poly.w / im.a;
                let u = poly.u - w * im.b;
                let v = poly.v - w * im.c;
                out[k][r][col] = e * ((u * m + v) * sh + u * ch) / im.a;
            }
        }
    }
    let rot = rotation(cs.kappa2 * z);
    for r in 0..2 {
        for col in 0..2 {
            out[0][r][col] -= rot[(r, col)];
        }
    }
    let result = from_entries(out);
    let flat = flatten(&result);
    if flat.iter().any(|x| !x.is_finite()) {
        return Err(Error::Contour {
            s,
            reason: format!("spatial inverse overflowed at z = {z}"),
        });
    }
    Ok(result)
}

/// Real space-time kernels at one `(z, t)`.
///
/// `m`, `n`, `f`, `g` are the regular parts. The full `ℳ` also contains
/// `δ(t)·m_time_impulse` and the full `𝒩` contains `δ(z)·n_space_impulse`.
/// For [`integrated_kernels`] every field holds its time integral over `[0, t]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeKernels {
    pub z: f64,
    pub t: f64,
    pub m: Matrix2<f64>,
    pub n: Matrix2<f64>,
    pub f: Matrix2<f64>,
    pub g: Matrix2<f64>,
    pub m_time_impulse: Matrix2<f64>,
    pub n_space_impulse: Matrix2<f64>,
}

impl TimeKernels {
    fn from_values(z: f64, t: f64, v: &[f64; NV], m_imp: Matrix2<f64>, n_imp: Matrix2<f64>) -> Self {
        let [m, n, f, g] = unflatten(v);
        TimeKernels {
            z,
            t,
            m,
            n,
            f,
            g,
            m_time_impulse: m_imp,
            n_space_impulse: n_imp,
        }
    }

    fn zero(z: f64, t: f64) -> Self {
        let zero = Matrix2::zeros();
        TimeKernels {
            z,
            t,
            m: zero,
            n: zero,
            f: zero,
            g: zero,
            m_time_impulse: zero,
            n_space_impulse: zero,
        }
    }
}

fn precession(omega: f64, t: f64) -> Matrix2<f64> {
    let (s, c) = (omega * t).sin_cos();
    Matrix2::new(c, s, -s, c)
}

fn precession_integral(omega: f64, t: f64) -> Matrix2<f64> {
    let x = omega * t;
    let (si, co) = if x.abs() < 1e-6 {
        (t * (1.0 - x * x / 6.0), t * (x / 2.0 - x * x * x / 24.0))
    } else {
        (x.sin() / omega, (1.0 - x.cos()) / omega)
    };
    Matrix2::new(si, co, -co, si)
}

fn check_zt(z: f64, t: f64) -> Result<()> {
    if !(z >= 0.0 && z.is_finite()) || !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("kernels need z, t >= 0, got z = {z}, t = {t}")));
    }
    Ok(())
}

/// Space-time kernels at `(z, t)`, `t > 0`, inverted analytically in `p`
/// and numerically in `s`.
pub fn kernel_time_domain(z: f64, t: f64, cs: &CouplingSet, quad: &QuadratureConfig) -> Result<TimeKernels> {
    check_zt(z, t)?;
    let image = |s: C| spatial_inverse(z, s, cs).map(|k| flatten(&k));
    let v = invert(z, t, quad, &image, cs.omega, 1.0)?;
    Ok(TimeKernels::from_values(z, t, &v, rotation(cs.kappa2 * z), precession(cs.omega, t)))
}

/// Time integrals `∫₀ᵗ K(z, t') dt'` of every kernel, impulse parts included
/// in their own fields.
pub fn integrated_kernels(z: f64, t: f64, cs: &CouplingSet, quad: &QuadratureConfig) -> Result<TimeKernels> {
    check_zt(z, t)?;
    if t == 0.0 {
        let mut k = TimeKernels::zero(z, t);
        k.m_time_impulse = rotation(cs.kappa2 * z);
        return Ok(k);
    }
    let image = |s: C| {
        spatial_inverse(z, s, cs).map(|k| {
            let mut f = flatten(&k);
            for x in &mut f {
                *x /= s;
            }
            f
        })
    };
    let v = invert(z, t, quad, &image, cs.omega, 1.0)?;
    Ok(TimeKernels::from_values(z, t, &v, rotation(cs.kappa2 * z), precession_integral(cs.omega, t)))
}

/// Kernels in retarded time: evaluated at `t - z/c`; all zero before the
/// probe wavefront reaches `z`. Pair with rotated initial profiles.
pub fn kernel_time_domain_retarded(z: f64, t: f64, cs: &CouplingSet, quad: &QuadratureConfig) -> Result<TimeKernels> {
    check_zt(z, t)?;
    let tau = t - z / crate::units::SPEED_OF_LIGHT;
    if tau <= 0.0 {
        return Ok(TimeKernels::zero(z, t));
    }
    let mut k = kernel_time_domain(z, tau, cs, quad)?;
    k.t = t;
    Ok(k)
}

/// Kernels over a set of `(z, t)` points, evaluated in parallel.
pub fn kernel_grid(points: &[(f64, f64)], cs: &CouplingSet, quad: &QuadratureConfig, integrated: bool) -> Result<Vec<TimeKernels>> {
    points
        .par_iter()
        .map(|&(z, t)| {
            if integrated {
                integrated_kernels(z, t, cs, quad)
            } else {
                kernel_time_domain(z, t, cs, quad)
            }
        })
        .collect()
}

/// Slow cross-check: both transforms inverted numerically (Euler in `p`
/// with abscissa `A/(2z)`, then in `s`). Needs `z > 0`.
pub fn kernel_time_domain_2d(z: f64, t: f64, cs: &CouplingSet, quad: &QuadratureConfig) -> Result<TimeKernels> {
    check_zt(z, t)?;
    if z <= 0.0 {
        return Err(Error::Domain("two-dimensional inversion needs z > 0".into()));
    }
    let inner = QuadratureConfig {
        method: InversionMethod::Euler,
        refine: false,
        ..quad.clone()
    };
    let kap = cs.kappa2;
    let image = |s: C| -> Result<[C; NV]> {
        let im = images(s, cs);
        let p_image = |p: C| -> Result<[C; NV]> {
            let det = (im.a * p + im.b) * p + im.c;
            if !(det.norm() >= SINGULAR_THRESHOLD) {
                return Err(Error::NearSingular { p, s, magnitude: det.norm() });
            }
            let rot_den = p * p + kap * kap;
            let rot = [[p / rot_den, -kap / rot_den], [kap / rot_den, p / rot_den]];
            let mut out = [C::new(0.0, 0.0); NV];
            for k in 0..4 {
                for r in 0..2 {
                    for col in 0..2 {
                        let poly = im.num[k][r][col];
                        let w = poly.w / im.a;
                        let mut val = ((poly.u - w * im.b) * p + (poly.v - w * im.c)) / det;
                        if k == 0 {
                            val -= rot[r][col];
                        }
                        out[4 * k + 2 * r + col] = val;
                    }
                }
            }
            Ok(out)
        };
        invert_euler_complex(z, &inner, &p_image)
    };
    let outer = QuadratureConfig {
        method: InversionMethod::Euler,
        ..quad.clone()
    };
    let v = invert(z, t, &outer, &image, cs.omega, 1.0)?;
    Ok(TimeKernels::from_values(z, t, &v, rotation(kap * z), precession(cs.omega, t)))
}
