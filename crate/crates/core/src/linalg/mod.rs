//! Dense kernels: matrices, Riccati and Lyapunov solvers, the normal CDF.

mod lyapunov;
mod matrix;
mod normal;
mod riccati;

pub use lyapunov::solve_dlyap;
pub use matrix::{Lu, Matrix};
pub use normal::{inverse_normal_cdf, normal_cdf, normal_pdf};
pub use riccati::{dare_gain, riccati_map, solve_dare, DareProblem};

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Matrix) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    match m.rows() {
        0 => 0.0,
        1 => m[(0, 0)].abs(),
        _ => m
            .to_nalgebra()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
    }
}
