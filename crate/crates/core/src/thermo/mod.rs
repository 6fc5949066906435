//! Induced potential, transfer operator, pressure.

pub mod potential;
pub mod pressure;
pub mod spectral;
pub mod table;

pub use potential::{birkhoff_sum, fiber_series, induced_potential, omega, omega_depth, Potential};
pub use pressure::{
    bernoulli_lower_bound, cross_millefeuille_pressure, holder_constants_estimate, pressure_curve,
    pressure_root, run_pressure, solve_pressure_root, tail_bound, zc_estimate, CaseReport,
    Comparison, HolderEstimate, PressureCase, PressureOptions, PressureRun, ZcEstimate,
    APPROACH_FAR, APPROACH_NEAR, CASE_MARGIN, DIVERGENCE_RATIO, ROOT_TOL,
};
pub use spectral::{
    distortion_ratios, free_energy, kac_integrals, spectral_solve, KacIntegrals, SpectralData,
    DEFAULT_MAX_ITER, RESIDUAL_TOL,
};
pub use table::{InducedTable, DEFAULT_GRID, DEFAULT_SERIES_TOL};

#[cfg(test)]
mod tests;
