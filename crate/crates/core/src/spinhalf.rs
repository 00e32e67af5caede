//! Closed-form input/output maps for the alignment-free case
//! (`ε = κ₂ = θ_y = Ω₂ = 0`), used as the reference model for the
//! general engines.

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::units::SPEED_OF_LIGHT;

/// Parameters of the alignment-free problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinHalfScenario {
    pub beta: f64,
    /// Mean photon flux, 1/s.
    pub xi3_bar: f64,
    /// Total mean spin `J̄ₓ`.
    pub jx_bar: f64,
    /// rad/s.
    pub omega0: f64,
    /// Pulse duration, s.
    pub duration: f64,
    /// Sample length, m.
    pub length: f64,
    pub xi1_in: f64,
    pub xi2_in: f64,
}

impl SpinHalfScenario {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(Error::Domain("beta must be finite".into()));
        }
        for (name, v) in [
            ("xi3_bar", self.xi3_bar),
            ("jx_bar", self.jx_bar),
            ("duration", self.duration),
            ("length", self.length),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.xi1_in < -1.0 || self.xi2_in < -1.0 {
            return Err(Error::Domain("input Mandel parameters must be >= -1".into()));
        }
        Ok(())
    }
}

/// Variable order used by the 4×4 maps.
pub const IO_ORDER: [&str; 4] = ["Y1", "Y2", "Jz", "Jy"];

/// Zero-field map on `(Y₁, Y₂, J_z, J_y)`, where `Y_i = ∫₀ᵀ Ξ_i dt`.
///
/// Row `r` gives output variable `r` as a combination of the inputs.
pub fn io_map_zero_field(scn: &SpinHalfScenario) -> Result<Matrix4<f64>> {
    scn.validate()?;
    if scn.omega0 != 0.0 {
        return Err(Error::Precondition(format!(
            "zero-field map requested with Ω₀ = {}",
            scn.omega0
        )));
    }
    let mut m = Matrix4::identity();
    m[(0, 2)] = 2.0 * scn.beta * scn.xi3_bar * scn.duration;
    m[(3, 1)] = scn.beta * scn.jx_bar;
    Ok(m)
}

/// Equal-time commutator matrix `C` with `[x_a, x_b] = i C_ab` for
/// `(Y₁, Y₂, J_z, J_y)`: `[Y₁, Y₂] = 2iΞ̄₃T`, `[J_z, J_y] = -iJ̄ₓ`.
pub fn commutator_form(scn: &SpinHalfScenario) -> Matrix4<f64> {
    let a = 2.0 * scn.xi3_bar * scn.duration;
    let b = scn.jx_bar;
    Matrix4::new(
        0.0, a, 0.0, 0.0, //
        -a, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, -b, //
        0.0, 0.0, b, 0.0,
    )
}

/// Variance of `∫₀ᵀ Ξ₁^out dt` from the zero-field map with white input
/// noise and a coherent spin state.
pub fn zero_field_output_variance(scn: &SpinHalfScenario) -> Result<f64> {
    let m = io_map_zero_field(scn)?;
    let n = scn.xi3_bar * scn.duration;
    let input = Matrix4::from_diagonal(&nalgebra::Vector4::new(
        n * (1.0 + scn.xi1_in),
        n * (1.0 + scn.xi2_in),
        scn.jx_bar / 2.0,
        scn.jx_bar / 2.0,
    ));
    Ok((m * input * m.transpose())[(0, 0)])
}

/// Time-dependent input/output map with a static magnetic field.
#[derive(Clone, Debug, PartialEq)]
pub struct MagneticMap {
    pub omega0: f64,
    pub beta_jx: f64,
    pub two_beta_xi3: f64,
    pub t: f64,
}

pub fn io_map_magnetic(scn: &SpinHalfScenario, t: f64) -> Result<MagneticMap> {
    scn.validate()?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be non-negative, got {t}")));
    }
    Ok(MagneticMap {
        omega0: scn.omega0,
        beta_jx: scn.beta * scn.jx_bar,
        two_beta_xi3: 2.0 * scn.beta * scn.xi3_bar,
        t,
    })
}

impl MagneticMap {
    /// `(J_z, J_y)(t) = R (J_z, J_y)^in + ...`.
    pub fn spin_rotation(&self) -> Matrix2<f64> {
        let (s, c) = (self.omega0 * self.t).sin_cos();
        Matrix2::new(c, s, -s, c)
    }

    /// Kernels multiplying `Ξ₂^in(t')` in `(J_z, J_y)(t)`.
    pub fn spin_memory(&self, t_prime: f64) -> (f64, f64) {
        if t_prime > self.t {
            return (0.0, 0.0);
        }
        let (s, c) = (self.omega0 * (self.t - t_prime)).sin_cos();
        (self.beta_jx * s, self.beta_jx * c)
    }

    /// `∫₀ᵗ` of [`Self::spin_memory`], i.e. the response to a constant unit input.
    pub fn spin_memory_integrated(&self) -> (f64, f64) {
        let w = self.omega0;
        let t = self.t;
        if (w * t).abs() < 1e-8 {
            return (self.beta_jx * w * t * t / 2.0, self.beta_jx * t);
        }
        (self.beta_jx * (1.0 - (w * t).cos()) / w, self.beta_jx * (w * t).sin() / w)
    }

    /// Coefficients of `(J_z^in, J_y^in)` in `Ξ₁^out(t)`.
    pub fn xi1_spin_coefficients(&self) -> (f64, f64) {
        let (s, c) = (self.omega0 * self.t).sin_cos();
        (self.two_beta_xi3 * c, self.two_beta_xi3 * s)
    }

    /// Kernel multiplying `Ξ₂^in(t')` in `Ξ₁^out(t)`.
    pub fn xi1_self_kernel(&self, t_prime: f64) -> f64 {
        if t_prime > self.t {
            return 0.0;
        }
        self.two_beta_xi3 * self.beta_jx * (self.omega0 * (self.t - t_prime)).sin()
    }
}

/// Space-resolved solution kernels at `(z, t)`; spin quantities are densities.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialSolution {
    pub z: f64,
    pub t: f64,
    pub omega0: f64,
    pub beta: f64,
    pub xi3_bar: f64,
    /// `𝒥̄ₓ = J̄ₓ / L`.
    pub jx_density: f64,
    /// Propagation delay per unit length, `1/c` or zero when retardation is off.
    pub inverse_speed: f64,
}

pub fn spatial_solution(scn: &SpinHalfScenario, z: f64, t: f64, retarded: bool) -> Result<SpatialSolution> {
    scn.validate()?;
    if !(0.0..=scn.length).contains(&z) {
        return Err(Error::Domain(format!("z = {z} outside [0, {}]", scn.length)));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be non-negative, got {t}")));
    }
    if scn.length == 0.0 {
        return Err(Error::Domain("sample length must be positive".into()));
    }
    Ok(SpatialSolution {
        z,
        t,
        omega0: scn.omega0,
        beta: scn.beta,
        xi3_bar: scn.xi3_bar,
        jx_density: scn.jx_bar / scn.length,
        inverse_speed: if retarded { 1.0 / SPEED_OF_LIGHT } else { 0.0 },
    })
}

impl SpatialSolution {
    /// Argument at which the boundary signals enter at this point.
    pub fn boundary_time(&self) -> f64 {
        self.t - self.z * self.inverse_speed
    }

    /// Coefficients of `(𝒥_z^in(z), 𝒥_y^in(z))` in `(𝒥_z, 𝒥_y)(z, t)`.
    pub fn spin_rotation(&self) -> Matrix2<f64> {
        let (s, c) = (self.omega0 * self.t).sin_cos();
        Matrix2::new(c, s, -s, c)
    }

    /// Kernels multiplying `Ξ₂^in(t' - z/c)` in `(𝒥_z, 𝒥_y)(z, t)`.
    pub fn spin_memory(&self, t_prime: f64) -> (f64, f64) {
        if t_prime > self.t {
            return (0.0, 0.0);
        }
        let (s, c) = (self.omega0 * (self.t - t_prime)).sin_cos();
        let k = self.beta * self.jx_density;
        (k * s, k * c)
    }

    /// Kernels multiplying `(𝒥_z^in(z'), 𝒥_y^in(z'))` in `Ξ₁(z, t)`, `0 ≤ z' ≤ z`.
    pub fn xi1_spin_kernel(&self, z_prime: f64) -> (f64, f64) {
        if z_prime > self.z {
            return (0.0, 0.0);
        }
        let phase = self.omega0 * (self.t - (self.z - z_prime) * self.inverse_speed);
        let k = 2.0 * self.beta * self.xi3_bar;
        (k * phase.cos(), k * phase.sin())
    }

    /// Kernel multiplying `Ξ₂^in(t' - z'/c)` in `Ξ₁(z, t)`.
    pub fn xi1_self_kernel(&self, z_prime: f64, t_prime: f64) -> f64 {
        let upper = self.t - (self.z - z_prime) * self.inverse_speed;
        if z_prime > self.z || t_prime > upper {
            return 0.0;
        }
        2.0 * self.beta * self.beta * self.xi3_bar * self.jx_density * (self.omega0 * (upper - t_prime)).sin()
    }

    /// `Ξ₁(z, t)` for given input signals, with `n`-point Gauss–Legendre
    /// quadrature on each integral.
    pub fn evaluate_xi1(
        &self,
        xi1_in: impl Fn(f64) -> f64,
        xi2_in: impl Fn(f64) -> f64,
        jz_in: impl Fn(f64) -> f64,
        jy_in: impl Fn(f64) -> f64,
        n: usize,
    ) -> f64 {
        let gl = GaussLegendre::new(n);
        let mut out = xi1_in(self.boundary_time());
        out += gl.integrate(0.0, self.z, |zp| {
            let (a, b) = self.xi1_spin_kernel(zp);
            a * jz_in(zp) + b * jy_in(zp)
        });
        out += gl.integrate(0.0, self.z, |zp| {
            let upper = self.t - (self.z - zp) * self.inverse_speed;
            gl.integrate(0.0, upper.max(0.0), |tp| {
                self.xi1_self_kernel(zp, tp) * xi2_in(tp - zp * self.inverse_speed)
            })
        });
        out
    }
}

/// Faraday-only Mandel parameter `ξ₁(J) = ξ₁ + 2ηf·βJ`; returns `(ξ₁(J), κ²)`.
pub fn faraday_xi(xi1_in: f64, eta: f64, f: f64, beta_j: f64) -> Result<(f64, f64)> {
    if !(beta_j >= 0.0) {
        return Err(Error::Precondition(format!("βJ must be non-negative, got {beta_j}")));
    }
    let kappa_sq = 2.0 * eta * f * beta_j;
    Ok((xi1_in + kappa_sq, kappa_sq))
}

/// Rotates initial spin profiles sampled at `z` by the precession that
/// happens before the probe wavefront arrives.
pub fn retarded_initial(jz: &[f64], jy: &[f64], z: &[f64], omega0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if jz.len() != z.len() || jy.len() != z.len() {
        return Err(Error::Input("profile and coordinate lengths differ".into()));
    }
    let mut out_z = Vec::with_capacity(z.len());
    let mut out_y = Vec::with_capacity(z.len());
    for ((&a, &b), &zz) in jz.iter().zip(jy).zip(z) {
        let (s, c) = (omega0 * zz / SPEED_OF_LIGHT).sin_cos();
        out_z.push(c * a + s * b);
        out_y.push(-s * a + c * b);
    }
    Ok((out_z, out_y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scn() -> SpinHalfScenario {
        SpinHalfScenario {
            beta: 3e-7,
            xi3_bar: 2e13,
            jx_bar: 5e6,
            omega0: 0.0,
            duration: 1e-3,
            length: 0.02,
            xi1_in: 0.0,
            xi2_in: 0.0,
        }
    }

    #[test]
    fn zero_field_coefficients() {
        let s = scn();
        let m = io_map_zero_field(&s).unwrap();
        assert_eq!(m[(0, 2)], 2.0 * s.beta * s.xi3_bar * s.duration);
        assert_eq!(m[(3, 1)], s.beta * s.jx_bar);
        let mut s0 = s.clone();
        s0.beta = 0.0;
        assert_eq!(io_map_zero_field(&s0).unwrap(), Matrix4::identity());
        s0.omega0 = 1.0;
        assert!(matches!(io_map_zero_field(&s0), Err(Error::Precondition(_))));
    }

    #[test]
    fn zero_field_map_is_symplectic() {
        let s = scn();
        let m = io_map_zero_field(&s).unwrap();
        assert!((m.determinant() - 1.0).abs() < 1e-12);
        let c = commutator_form(&s);
        let diff = m * c * m.transpose() - c;
        assert!(diff.abs().max() <= 1e-12 * c.abs().max());
    }

    #[test]
    fn zero_field_variance_matches_faraday_line() {
        let s = scn();
        let n = s.xi3_bar * s.duration;
        let v = zero_field_output_variance(&s).unwrap();
        assert_relative_eq!(v, n * (1.0 + 2.0 * s.beta * s.beta * n * s.jx_bar), max_relative = 1e-13);
    }

    #[test]
    fn magnetic_map_limits() {
        let mut s = scn();
        s.omega0 = 2.0 * std::f64::consts::PI * 1e3;
        let m0 = io_map_magnetic(&s, 0.0).unwrap();
        assert_eq!(m0.spin_rotation(), Matrix2::identity());
        let t = std::f64::consts::FRAC_PI_2 / s.omega0;
        let m = io_map_magnetic(&s, t).unwrap();
        let r = m.spin_rotation();
        assert!((r - Matrix2::new(0.0, 1.0, -1.0, 0.0)).abs().max() < 1e-15);
        let gl = GaussLegendre::new(30);
        let qz = gl.integrate(0.0, t, |tp| m.spin_memory(tp).0);
        let qy = gl.integrate(0.0, t, |tp| m.spin_memory(tp).1);
        let (cz, cy) = m.spin_memory_integrated();
        assert_relative_eq!(qz, cz, max_relative = 1e-13);
        assert_relative_eq!(qy, cy, max_relative = 1e-13);
    }

    #[test]
    fn magnetic_map_reduces_to_zero_field() {
        let s = scn();
        let m = io_map_magnetic(&s, s.duration).unwrap();
        let zf = io_map_zero_field(&s).unwrap();
        let (_, cy) = m.spin_memory_integrated();
        assert_relative_eq!(cy, zf[(3, 1)] * s.duration, max_relative = 1e-15);
        let gl = GaussLegendre::new(8);
        let y1_from_jz = gl.integrate(0.0, s.duration, |t| io_map_magnetic(&s, t).unwrap().xi1_spin_coefficients().0);
        assert_relative_eq!(y1_from_jz, zf[(0, 2)], max_relative = 1e-14);
        assert_eq!(m.xi1_self_kernel(0.3 * s.duration), 0.0);
    }

    #[test]
    fn spatial_boundary_and_kernels() {
        let mut s = scn();
        s.omega0 = 3e3;
        let sol = spatial_solution(&s, 0.0, 1e-4, false).unwrap();
        let v = sol.evaluate_xi1(|t| 7.0 + t, |_| 1.0, |_| 1.0, |_| 1.0, 10);
        assert_relative_eq!(v, 7.0 + 1e-4, max_relative = 1e-15);
        let sol = spatial_solution(&s, 0.01, 2e-4, true).unwrap();
        let (a, b) = sol.xi1_spin_kernel(0.004);
        let phase = s.omega0 * (2e-4 - 0.006 / SPEED_OF_LIGHT);
        assert_relative_eq!(a, 2.0 * s.beta * s.xi3_bar * phase.cos(), max_relative = 1e-14);
        assert_relative_eq!(b, 2.0 * s.beta * s.xi3_bar * phase.sin(), max_relative = 1e-14);
        assert!(spatial_solution(&s, 0.03, 0.0, false).is_err());
    }

    #[test]
    fn spatial_without_coupling_is_rotation() {
        let mut s = scn();
        s.beta = 0.0;
        s.omega0 = 1e3;
        let sol = spatial_solution(&s, 0.01, 1e-3, false).unwrap();
        assert_eq!(sol.spin_memory(0.5e-3), (0.0, 0.0));
        assert_eq!(sol.xi1_spin_kernel(0.0), (0.0, 0.0));
        let (sn, cs) = 1f64.sin_cos();
        assert!((sol.spin_rotation() - Matrix2::new(cs, sn, -sn, cs)).abs().max() < 1e-15);
    }

    #[test]
    fn faraday_line() {
        assert_eq!(faraday_xi(0.3, 0.1, 20.0, 0.0).unwrap(), (0.3, 0.0));
        assert_eq!(faraday_xi(0.0, 0.5, 1.0, 1.0).unwrap().0, 1.0);
        assert!(faraday_xi(0.0, 0.1, 1.0, -1.0).is_err());
    }

    #[test]
    fn retarded_initial_rotation() {
        let z = [0.0, 1.0, 2.0];
        let jz = [1.0, 2.0, -3.0];
        let jy = [0.5, -1.0, 4.0];
        let (a, b) = retarded_initial(&jz, &jy, &z, 0.0).unwrap();
        assert_eq!((a.as_slice(), b.as_slice()), (&jz[..], &jy[..]));
        let (a, b) = retarded_initial(&jz, &jy, &z, 4e8).unwrap();
        assert_eq!((a[0], b[0]), (jz[0], jy[0]));
        for i in 0..3 {
            assert_relative_eq!(a[i].hypot(b[i]), jz[i].hypot(jy[i]), max_relative = 1e-15);
        }
    }
}
