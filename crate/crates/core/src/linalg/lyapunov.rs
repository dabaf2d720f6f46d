use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, Matrix};

const KRONECKER_MAX_DIM: usize = 20;
const STABILITY_MARGIN: f64 = 1e-12;

/// Stationary solution of `Ψ = M Ψ Mᵀ + W`.
///
/// Small systems are solved directly through `(I − M⊗M) vec Ψ = vec W`;
/// larger ones by squared Smith iteration.
pub fn solve_dlyap(m: &Matrix, w: &Matrix) -> Result<Matrix> {
    if !m.is_square() || m.shape() != w.shape() {
        return Err(Error::Dimension(format!(
            "dlyap with M {:?} and W {:?}",
            m.shape(),
            w.shape()
        )));
    }
    let radius = spectral_radius(m);
    if radius >= 1.0 - STABILITY_MARGIN {
        return Err(Error::UnstableM { radius });
    }
    let psi = if m.rows() <= KRONECKER_MAX_DIM {
        kronecker(m, w)?
    } else {
        smith(m, w)?
    };
    Ok(psi.symmetrize())
}

fn kronecker(m: &Matrix, w: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    // Row-major vec: vec(M Ψ Mᵀ) = (M ⊗ M) vec(Ψ).
    let sys = &Matrix::identity(n * n) - &m.kron(m);
    let rhs = Matrix::column(w.as_slice());
    let sol = sys.solve(&rhs)?;
    Matrix::new(n, n, sol.as_slice().to_vec())
}

fn smith(m: &Matrix, w: &Matrix) -> Result<Matrix> {
    let mut psi = w.symmetrize();
    let mut mk = m.clone();
    for _ in 0..64 {
        let inc = &(&mk * &psi) * &mk.transpose();
        psi = (&psi + &inc).symmetrize();
        mk = &mk * &mk;
        if inc.norm_inf() <= 1e-15 * (1.0 + psi.norm_inf()) {
            return Ok(psi);
        }
    }
    Err(Error::NonConvergence {
        iterations: 64,
        last_step: mk.norm_inf(),
    })
}
