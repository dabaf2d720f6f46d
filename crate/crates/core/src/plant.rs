//! Plant and cost data, LQ gain synthesis and model checks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dare_gain, solve_dare, spectral_radius, DareProblem, Matrix};

/// `x⁺ = A x + B u + w`, `y = C x + v`, with `w ~ N(0, Q)`, `v ~ N(0, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub q: Matrix,
    pub r: Matrix,
}

impl PlantModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        let p = Self { a, b, c, q, r };
        p.check_dims()?;
        Ok(p)
    }

    /// Single-input single-output plant from scalars.
    pub fn scalar(a: f64, b: f64, c: f64, q: f64, r: f64) -> Self {
        Self {
            a: Matrix::scalar(a),
            b: Matrix::scalar(b),
            c: Matrix::scalar(c),
            q: Matrix::scalar(q),
            r: Matrix::scalar(r),
        }
    }

    pub fn states(&self) -> usize {
        self.a.rows()
    }

    pub fn inputs(&self) -> usize {
        self.b.cols()
    }

    pub fn outputs(&self) -> usize {
        self.c.rows()
    }

    pub fn check_dims(&self) -> Result<()> {
        let n = self.a.rows();
        let p = self.b.cols();
        let m = self.c.rows();
        let want = [
            ("A", self.a.shape(), (n, n)),
            ("B", self.b.shape(), (n, p)),
            ("C", self.c.shape(), (m, n)),
            ("Q", self.q.shape(), (n, n)),
            ("R", self.r.shape(), (m, m)),
        ];
        for (name, got, exp) in want {
            if got != exp {
                return Err(Error::Dimension(format!("{name} is {got:?}, expected {exp:?}")));
            }
        }
        Ok(())
    }
}

/// Quadratic cost `xᵀ Qc x + uᵀ Rc u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub qc: Matrix,
    pub rc: Matrix,
}

impl CostWeights {
    pub fn scalar(qc: f64, rc: f64) -> Self {
        Self {
            qc: Matrix::scalar(qc),
            rc: Matrix::scalar(rc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LqgGain {
    pub k: Matrix,
    pub closed_loop: Matrix,
}

/// Infinite-horizon LQ state feedback `u = −K x`.
pub fn lqr_gain(plant: &PlantModel, weights: &CostWeights) -> Result<LqgGain> {
    plant.check_dims()?;
    let problem = DareProblem::new(plant.a.clone(), plant.b.clone(), weights.qc.clone(), weights.rc.clone());
    let p = solve_dare(&problem)?;
    let k = dare_gain(&problem, &p)?;
    let closed_loop = &plant.a - &(&plant.b * &k);
    let radius = spectral_radius(&closed_loop);
    if radius >= 1.0 {
        return Err(Error::Unstabilizable { radius });
    }
    Ok(LqgGain { k, closed_loop })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Severity {
    Info,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub check: &'static str,
    pub passed: bool,
    pub severity: Severity,
    pub message: String,
}

impl Finding {
    pub(crate) fn new(check: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        let detail = detail.into();
        let message = if passed {
            format!("{check} holds")
        } else if detail.is_empty() {
            format!("{check} violated")
        } else {
            format!("{check} violated: {detail}")
        };
        Self {
            check,
            passed,
            severity: if passed { Severity::Info } else { Severity::Error },
            message,
        }
    }
}

const RANK_TOL: f64 = 1e-10;

fn unstable_eigenvalues(a: &Matrix) -> Vec<Complex64> {
    if a.rows() == 0 {
        return Vec::new();
    }
    a.to_nalgebra()
        .complex_eigenvalues()
        .iter()
        .copied()
        .filter(|z| z.norm() >= 1.0 - 1e-12)
        .collect()
}

fn numeric_rank(m: &DMatrix<Complex64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

fn complexify(m: &Matrix) -> DMatrix<Complex64> {
    m.to_nalgebra().map(|v| Complex64::new(v, 0.0))
}

/// PBH test: `rank [λI − A, X] = n` for every eigenvalue with `|λ| ≥ 1`.
pub fn is_stabilizable(a: &Matrix, x: &Matrix) -> bool {
    let n = a.rows();
    let ac = complexify(a);
    let xc = complexify(x);
    unstable_eigenvalues(a).into_iter().all(|lambda| {
        let mut pencil = DMatrix::<Complex64>::zeros(n, n + x.cols());
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
                pencil[(i, j)] = id - ac[(i, j)];
            }
            for j in 0..x.cols() {
                pencil[(i, n + j)] = xc[(i, j)];
            }
        }
        numeric_rank(&pencil) == n
    })
}

/// Dual PBH test: `rank [λI − A; X] = n` for every eigenvalue with `|λ| ≥ 1`.
pub fn is_detectable(a: &Matrix, x: &Matrix) -> bool {
    is_stabilizable(&a.transpose(), &x.transpose())
}

/// Checks the standing assumptions of the LQG and ergodicity results.
pub fn validate_model(plant: &PlantModel, weights: &CostWeights) -> Vec<Finding> {
    let mut out = Vec::new();
    let n = plant.states();
    let dims = plant.check_dims().and_then(|_| {
        if weights.qc.shape() != (n, n) || weights.rc.shape() != (plant.inputs(), plant.inputs()) {
            Err(Error::Dimension("cost weights do not match the plant".into()))
        } else {
            Ok(())
        }
    });
    if let Err(e) = dims {
        out.push(Finding::new("dimensions consistent", false, e.to_string()));
        return out;
    }
    out.push(Finding::new("dimensions consistent", true, ""));
    out.push(Finding::new("Q>=0", plant.q.is_psd(1e-12), ""));
    out.push(Finding::new("R>0", plant.r.is_positive_definite(), ""));
    out.push(Finding::new("Qc>=0", weights.qc.is_psd(1e-12), ""));
    out.push(Finding::new("Rc>0", weights.rc.is_positive_definite(), ""));
    out.push(Finding::new(
        "[A,Qc] detectable",
        is_detectable(&plant.a, &weights.qc),
        "",
    ));
    out.push(Finding::new(
        "[A,Q] stabilizable",
        is_stabilizable(&plant.a, &plant.q),
        "",
    ));
    out.push(Finding::new(
        "[A,B] stabilizable",
        is_stabilizable(&plant.a, &plant.b),
        "",
    ));
    out.push(Finding::new("[A,C] detectable", is_detectable(&plant.a, &plant.c), ""));
    out
}

pub fn all_passed(findings: &[Finding]) -> bool {
    findings.iter().all(|f| f.passed)
}
