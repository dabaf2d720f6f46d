use crate::error::{Error, Result};
use crate::linalg::Matrix;

const STEP_TOL: f64 = 1e-12;
const MAX_ITER: usize = 1_000_000;

/// Generalized discrete algebraic Riccati equation
///
/// `Aᵀ X A − Eᵀ X E − (Aᵀ X B + S)(Bᵀ X B + R)⁻¹(Aᵀ X B + S)ᵀ + Q = 0`
///
/// with `A = state_t`, `B = input_t`, `Q = state_cost`, `R = input_cost`,
/// `S = cross`, `E = scaling`. Control problems pass `(A, B)` directly;
/// estimation problems pass the transposed pair `(Aᵀ, Cᵀ)`.
#[derive(Debug, Clone)]
pub struct DareProblem {
    pub state_t: Matrix,
    pub input_t: Matrix,
    pub state_cost: Matrix,
    pub input_cost: Matrix,
    pub cross: Matrix,
    pub scaling: Matrix,
}

impl DareProblem {
    pub fn new(state_t: Matrix, input_t: Matrix, state_cost: Matrix, input_cost: Matrix) -> Self {
        let (n, q) = input_t.shape();
        Self {
            state_t,
            input_t,
            state_cost,
            input_cost,
            cross: Matrix::zeros(n, q),
            scaling: Matrix::identity(n),
        }
    }

    pub fn with_cross(mut self, cross: Matrix) -> Self {
        self.cross = cross;
        self
    }

    pub fn with_scaling(mut self, scaling: Matrix) -> Self {
        self.scaling = scaling;
        self
    }

    fn check(&self) -> Result<()> {
        let n = self.state_t.rows();
        let q = self.input_t.cols();
        let shapes = [
            ("state_t", self.state_t.shape(), (n, n)),
            ("input_t", self.input_t.shape(), (n, q)),
            ("state_cost", self.state_cost.shape(), (n, n)),
            ("input_cost", self.input_cost.shape(), (q, q)),
            ("cross", self.cross.shape(), (n, q)),
            ("scaling", self.scaling.shape(), (n, n)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::Dimension(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        Ok(())
    }
}

/// One application of the Riccati map `X ↦ E⁻ᵀ f(X) E⁻¹`.
pub fn riccati_map(p: &DareProblem, x: &Matrix) -> Result<Matrix> {
    let a = &p.state_t;
    let b = &p.input_t;
    let at = a.transpose();
    let atxb = &(&(&at * x) * b) + &p.cross;
    let inner = &(&(&b.transpose() * x) * b) + &p.input_cost;
    let gain = inner
        .lu()
        .map_err(|_| Error::SingularInnerTerm)?
        .solve(&atxb.transpose())?;
    let fx = &(&(&(&at * x) * a) + &p.state_cost) - &(&atxb * &gain);
    let fx = if p.scaling == Matrix::identity(p.scaling.rows()) {
        fx
    } else {
        let e_inv = p.scaling.inverse()?;
        &(&e_inv.transpose() * &fx) * &e_inv
    };
    if !fx.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(fx.symmetrize())
}

/// Solve the DARE by iterating the Riccati difference equation from
/// `X₀ = state_cost` until successive iterates agree to `1e−12·(1+‖X‖∞)`.
pub fn solve_dare(p: &DareProblem) -> Result<Matrix> {
    p.check()?;
    let mut x = p.state_cost.symmetrize();
    let mut last_step = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let next = riccati_map(p, &x)?;
        last_step = (&next - &x).norm_inf();
        x = next;
        if last_step <= STEP_TOL * (1.0 + x.norm_inf()) {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITER,
        last_step,
    })
}

/// Feedback gain `(Bᵀ X B + R)⁻¹ (Aᵀ X B + S)ᵀ` associated with a DARE
/// solution.
pub fn dare_gain(p: &DareProblem, x: &Matrix) -> Result<Matrix> {
    let b = &p.input_t;
    let inner = &(&(&b.transpose() * x) * b) + &p.input_cost;
    let atxb = &(&(&p.state_t.transpose() * x) * b) + &p.cross;
    inner
        .lu()
        .map_err(|_| Error::SingularInnerTerm)?
        .solve(&atxb.transpose())
}
