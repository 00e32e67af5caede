//! Workloads shared by the benchmarks and their smoke test.

use spinlight_core::angular::wigner_6j;
use spinlight_core::kernels::{kernel_time_domain, QuadratureConfig, TimeKernels};
use spinlight_core::moments::propagate_covariance;
use spinlight_core::{CouplingSet, CovarianceState, Grid, HalfInt, NoiseSpec, Result};

/// A generic coupling set with every interaction switched on.
pub fn coupled() -> CouplingSet {
    let mut cs = CouplingSet::uncoupled(4e3, 2e3, 1.0, 1.0);
    cs.j0 = HalfInt::from_int(4);
    cs.beta = 1.5e-4;
    cs.theta_z = cs.beta;
    cs.epsilon = -2e-5;
    cs.theta_y = cs.epsilon;
    cs.kappa2 = 0.3;
    cs.omega = 1.2;
    cs
}

pub fn large_6j() -> Result<f64> {
    let j = HalfInt::from_twice;
    wigner_6j(j(24), j(20), j(16), j(22), j(18), j(24))
}

pub fn kernel_point(cs: &CouplingSet, z: f64, t: f64) -> Result<TimeKernels> {
    kernel_time_domain(z, t, cs, &QuadratureConfig::default())
}

pub fn covariance(cs: &CouplingSet, nz: usize, nt: usize) -> Result<CovarianceState> {
    propagate_covariance(cs, &Grid::new(nz, nt)?, &NoiseSpec::coherent(0.0, 0.0))
}
