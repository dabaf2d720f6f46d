//! Kalman filters matched to the three coding strategies.
//!
//! The time-varying recursions (`kf_step_*`) follow the covariance
//! propagation exactly and exist mainly to validate [`steady_state`]. The
//! closed-loop simulator runs [`SteadyFilter`], which freezes the limiting
//! gains.

use serde::Serialize;

use crate::codec::{DecodedMeasurement, NoiseLevels, StrategyConfig, StrategyKind};
use crate::error::{Error, Result};
use crate::linalg::{solve_dare, DareProblem, Matrix};
use crate::plant::PlantModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(t: u64) -> Self {
        if t.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    fn name(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

/// Estimator state between measurements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterState {
    /// `x̂_{t|t−1}`
    pub x_pred: Vec<f64>,
    /// `x̂_{t−1|t−1}`, the estimate used for the last control.
    pub x_filt: Vec<f64>,
    /// `Σ_{t|t−1}` at the next measurement time. For the period-two
    /// strategies this is frozen across the odd step.
    pub sigma_pred: Matrix,
    /// Phase of the next measurement.
    pub parity: Parity,
    /// `(x̂_{2k|2k−1}, x̂_{2k|2k})` retained between the two phases.
    pub even_hold: Option<(Vec<f64>, Vec<f64>)>,
    /// `Σ′_{2k+1|2k}` of the last Strategy III odd step.
    pub sigma_prime: Option<Matrix>,
}

impl FilterState {
    /// `x̂_{0|−1} = 0`, `Σ_{0|−1} = Q`.
    pub fn initial(plant: &PlantModel) -> Self {
        Self::with_prior(vec![0.0; plant.states()], plant.q.clone())
    }

    pub fn with_prior(x_pred: Vec<f64>, sigma_pred: Matrix) -> Self {
        Self {
            x_filt: vec![0.0; x_pred.len()],
            x_pred,
            sigma_pred,
            parity: Parity::Even,
            even_hold: None,
            sigma_prime: None,
        }
    }

    fn expect(&self, want: Parity) -> Result<()> {
        if self.parity != want {
            return Err(Error::Parity {
                expected: self.parity.name(),
            });
        }
        Ok(())
    }
}

fn noise_plus(r: &Matrix, s: f64) -> Matrix {
    r + &Matrix::identity(r.rows()).scale(s)
}

/// `Σ Cᵀ (C Σ Cᵀ + R + s I)⁻¹`.
pub fn kalman_gain(sigma: &Matrix, c: &Matrix, r: &Matrix, s: f64) -> Result<Matrix> {
    let sct = sigma * &c.transpose();
    let innov = &(c * &sct) + &noise_plus(r, s);
    let gain_t = innov
        .lu()
        .map_err(|_| Error::SingularInnovation)?
        .solve(&sct.transpose())?;
    Ok(gain_t.transpose())
}

/// `Σ − Σ Cᵀ (C Σ Cᵀ + R + s I)⁻¹ C Σ`.
pub fn filtered_covariance(sigma: &Matrix, c: &Matrix, r: &Matrix, s: f64) -> Result<Matrix> {
    let l = kalman_gain(sigma, c, r, s)?;
    Ok((sigma - &(&(&l * c) * sigma)).symmetrize())
}

/// `A Σ Aᵀ − A L C Σ Aᵀ + Q` with `L` the gain for noise level `s`.
fn predict_covariance(plant: &PlantModel, sigma: &Matrix, s: f64) -> Result<Matrix> {
    let filt = filtered_covariance(sigma, &plant.c, &plant.r, s)?;
    Ok((&(&(&plant.a * &filt) * &plant.a.transpose()) + &plant.q).symmetrize())
}

fn mv(m: &Matrix, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.rows()];
    m.mul_vec_into(x, &mut out);
    out
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `x + L (p − C x)`.
fn correct(x: &[f64], l: &Matrix, c: &Matrix, p: &[f64]) -> Vec<f64> {
    let cx = mv(c, x);
    let innov: Vec<f64> = p.iter().zip(&cx).map(|(a, b)| a - b).collect();
    let mut out = x.to_vec();
    l.mul_vec_acc(&innov, &mut out);
    out
}

fn control_term(plant: &PlantModel, k: &Matrix, x: &[f64]) -> Vec<f64> {
    mv(&(&plant.b * k), x)
}

fn check_measurement(plant: &PlantModel, p: &[f64]) -> Result<()> {
    if p.len() != plant.outputs() {
        return Err(Error::Dimension(format!(
            "measurement has {} entries, plant has {} outputs",
            p.len(),
            plant.outputs()
        )));
    }
    Ok(())
}

/// Strategy I: one measurement update at noise `R + S_b` and prediction
/// under `u = −K x̂_{t|t}`.
pub fn kf_step_i(state: &FilterState, p: &[f64], plant: &PlantModel, k: &Matrix, s_b: f64) -> Result<FilterState> {
    check_measurement(plant, p)?;
    let l = kalman_gain(&state.sigma_pred, &plant.c, &plant.r, s_b)?;
    let x_filt = correct(&state.x_pred, &l, &plant.c, p);
    let closed = &plant.a - &(&plant.b * k);
    Ok(FilterState {
        x_pred: mv(&closed, &x_filt),
        x_filt,
        sigma_pred: predict_covariance(plant, &state.sigma_pred, s_b)?,
        parity: state.parity,
        even_hold: None,
        sigma_prime: None,
    })
}

/// Even-phase update shared by Strategies II and III.
fn even_step(state: &FilterState, p: &[f64], plant: &PlantModel, k: &Matrix, s_b: f64) -> Result<FilterState> {
    state.expect(Parity::Even)?;
    check_measurement(plant, p)?;
    let l = kalman_gain(&state.sigma_pred, &plant.c, &plant.r, s_b)?;
    let x_filt = correct(&state.x_pred, &l, &plant.c, p);
    let closed = &plant.a - &(&plant.b * k);
    Ok(FilterState {
        x_pred: mv(&closed, &x_filt),
        x_filt: x_filt.clone(),
        sigma_pred: state.sigma_pred.clone(),
        parity: Parity::Odd,
        even_hold: Some((state.x_pred.clone(), x_filt)),
        sigma_prime: None,
    })
}

/// Strategy II. Even phase: `p_{2k}` at noise `S_b`. Odd phase: the fine
/// reconstruction of `y_{2k}` re-updates `x̂_{2k|2k−1}` at noise `S_{2b}`
/// and the two-step covariance update is applied.
pub fn kf_step_ii(
    state: &FilterState,
    decoded: &DecodedMeasurement,
    plant: &PlantModel,
    k: &Matrix,
    s_b: f64,
    s_2b: f64,
) -> Result<FilterState> {
    kf_step_ii_vec(state, Parity::of(decoded.t), &[decoded.p], plant, k, s_b, s_2b)
}

/// [`kf_step_ii`] for vector measurements.
pub fn kf_step_ii_vec(
    state: &FilterState,
    phase: Parity,
    p: &[f64],
    plant: &PlantModel,
    k: &Matrix,
    s_b: f64,
    s_2b: f64,
) -> Result<FilterState> {
    if phase == Parity::Even {
        return even_step(state, p, plant, k, s_b);
    }
    state.expect(Parity::Odd)?;
    check_measurement(plant, p)?;
    let (x_prior, x_even) = state.even_hold.as_ref().ok_or(Error::Parity { expected: "even" })?;
    let sigma = &state.sigma_pred;
    let l = kalman_gain(sigma, &plant.c, &plant.r, s_2b)?;
    let refined = correct(x_prior, &l, &plant.c, p);
    let mut x_filt = mv(&plant.a, &refined);
    axpy(&mut x_filt, -1.0, &control_term(plant, k, x_even));
    let closed = &plant.a - &(&plant.b * k);
    let a2 = &plant.a * &plant.a;
    let filt = filtered_covariance(sigma, &plant.c, &plant.r, s_2b)?;
    let two_step_noise = &(&(&plant.a * &plant.q) * &plant.a.transpose()) + &plant.q;
    let sigma_next = (&(&(&a2 * &filt) * &a2.transpose()) + &two_step_noise).symmetrize();
    Ok(FilterState {
        x_pred: mv(&closed, &x_filt),
        x_filt,
        sigma_pred: sigma_next,
        parity: Parity::Even,
        even_hold: None,
        sigma_prime: None,
    })
}

/// Strategy III. Even phase as Strategy II. Odd phase: the refined even
/// sample `p′_{2k}` (noise `S_{b+r}`) updates `x̂_{2k|2k−1}` and is
/// propagated to `x̂′_{2k+1|2k}`, then the odd sample `p_{2k+1}` (noise
/// `S_{b−r}`) is applied.
pub fn kf_step_iii(
    state: &FilterState,
    decoded: &DecodedMeasurement,
    plant: &PlantModel,
    k: &Matrix,
    levels: &NoiseLevels,
) -> Result<FilterState> {
    let phase = Parity::of(decoded.t);
    let p_prime = decoded.p_prime.map(|v| vec![v]);
    kf_step_iii_vec(state, phase, &[decoded.p], p_prime.as_deref(), plant, k, levels)
}

/// [`kf_step_iii`] for vector measurements.
pub fn kf_step_iii_vec(
    state: &FilterState,
    phase: Parity,
    p: &[f64],
    p_prime: Option<&[f64]>,
    plant: &PlantModel,
    k: &Matrix,
    levels: &NoiseLevels,
) -> Result<FilterState> {
    let (s_fine, s_odd) = match (levels.refined, levels.odd) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Config("strategy III needs refined and odd noise levels".into())),
    };
    if phase == Parity::Even {
        return even_step(state, p, plant, k, levels.even);
    }
    state.expect(Parity::Odd)?;
    check_measurement(plant, p)?;
    let p_prime = p_prime.ok_or_else(|| Error::Config("odd step needs the refined even sample".into()))?;
    check_measurement(plant, p_prime)?;
    let (x_prior, x_even) = state.even_hold.as_ref().ok_or(Error::Parity { expected: "even" })?;
    let sigma = &state.sigma_pred;

    let l_fine = kalman_gain(sigma, &plant.c, &plant.r, s_fine)?;
    let mut x_mid = mv(&plant.a, &correct(x_prior, &l_fine, &plant.c, p_prime));
    axpy(&mut x_mid, -1.0, &control_term(plant, k, x_even));
    let sigma_mid = predict_covariance(plant, sigma, s_fine)?;

    let l_odd = kalman_gain(&sigma_mid, &plant.c, &plant.r, s_odd)?;
    let x_filt = correct(&x_mid, &l_odd, &plant.c, p);
    let closed = &plant.a - &(&plant.b * k);
    Ok(FilterState {
        x_pred: mv(&closed, &x_filt),
        x_filt,
        sigma_pred: predict_covariance(plant, &sigma_mid, s_odd)?,
        parity: Parity::Even,
        even_hold: None,
        sigma_prime: Some(sigma_mid),
    })
}

/// Limiting gains for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FilterGains {
    Single {
        l: Matrix,
    },
    TwoPhase {
        even: Matrix,
        odd: Matrix,
    },
    ThreePhase {
        even: Matrix,
        odd_refine: Matrix,
        odd: Matrix,
    },
}

impl FilterGains {
    /// Gain applied at even times (every time for Strategy I).
    pub fn primary(&self) -> &Matrix {
        match self {
            FilterGains::Single { l } => l,
            FilterGains::TwoPhase { even, .. } => even,
            FilterGains::ThreePhase { even, .. } => even,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateGains {
    pub kind: StrategyKind,
    /// Limit of `Σ_{t|t−1}` (Strategy I) or `Σ_{2k|2k−1}` (II, III).
    pub sigma_pred: Matrix,
    pub sigma_filt_even: Matrix,
    pub sigma_filt_odd: Matrix,
    /// Strategy III: limit of `Σ′_{2k+1|2k}`.
    pub sigma_pred_odd: Option<Matrix>,
    /// Strategy III: even filtered covariance evaluated at `S_{b+r}`
    /// instead of the `S_b` used by the even gain.
    pub sigma_filt_even_refined: Option<Matrix>,
    /// Strategy III: odd filtered covariance evaluated from `Σ_{2k|2k−1}`
    /// rather than from `Σ′_{2k+1|2k}`.
    pub sigma_filt_odd_from_even_prior: Option<Matrix>,
    pub gains: FilterGains,
}

fn lifted_problem(plant: &PlantModel, levels: &NoiseLevels) -> Result<DareProblem> {
    let a = &plant.a;
    let c = &plant.c;
    let q = &plant.q;
    let r = &plant.r;
    let a2t = (a * a).transpose();
    let two_step_noise = (&(&(a * q) * &a.transpose()) + q).symmetrize();
    let problem = match (levels.refined, levels.odd) {
        (None, _) => DareProblem::new(a.transpose(), c.transpose(), q.clone(), noise_plus(r, levels.even)),
        (Some(s2), None) => DareProblem::new(a2t, c.transpose(), two_step_noise, noise_plus(r, s2)),
        (Some(s_fine), Some(s_odd)) => {
            let m = plant.outputs();
            let n = plant.states();
            let input_t = Matrix::hstack(&[c.transpose(), (c * a).transpose()])?;
            let cqc = &(&(c * q) * &c.transpose()) + &noise_plus(r, s_odd);
            let input_cost = Matrix::from_blocks(&[
                vec![noise_plus(r, s_fine), Matrix::zeros(m, m)],
                vec![Matrix::zeros(m, m), cqc],
            ])?;
            let cross = Matrix::hstack(&[Matrix::zeros(n, m), &(a * q) * &c.transpose()])?;
            DareProblem::new(a2t, input_t, two_step_noise, input_cost)
                .with_cross(cross)
                .with_scaling(Matrix::identity(n))
        }
    };
    Ok(problem)
}

/// Limiting covariances and gains of the strategy's filter.
pub fn steady_state(plant: &PlantModel, cfg: &StrategyConfig) -> Result<SteadyStateGains> {
    cfg.validate()?;
    plant.check_dims()?;
    steady_state_for_levels(plant, cfg.kind, &cfg.noise_levels())
}

pub fn steady_state_for_levels(
    plant: &PlantModel,
    kind: StrategyKind,
    levels: &NoiseLevels,
) -> Result<SteadyStateGains> {
    let (c, r) = (&plant.c, &plant.r);
    let sigma = solve_dare(&lifted_problem(plant, levels)?)?;
    let even_filt = filtered_covariance(&sigma, c, r, levels.even)?;
    let l_even = kalman_gain(&sigma, c, r, levels.even)?;
    let out = match kind {
        StrategyKind::I => SteadyStateGains {
            kind,
            sigma_filt_odd: even_filt.clone(),
            sigma_filt_even: even_filt,
            sigma_pred: sigma,
            sigma_pred_odd: None,
            sigma_filt_even_refined: None,
            sigma_filt_odd_from_even_prior: None,
            gains: FilterGains::Single { l: l_even },
        },
        StrategyKind::II => {
            let s2 = levels.refined.ok_or_else(|| Error::Config("missing S_2b".into()))?;
            SteadyStateGains {
                kind,
                sigma_filt_odd: filtered_covariance(&sigma, c, r, s2)?,
                sigma_filt_even: even_filt,
                gains: FilterGains::TwoPhase {
                    even: l_even,
                    odd: kalman_gain(&sigma, c, r, s2)?,
                },
                sigma_pred: sigma,
                sigma_pred_odd: None,
                sigma_filt_even_refined: None,
                sigma_filt_odd_from_even_prior: None,
            }
        }
        StrategyKind::III => {
            let (s_fine, s_odd) = match (levels.refined, levels.odd) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::Config("missing S_(b+r) or S_(b-r)".into())),
            };
            let sigma_mid = predict_covariance(plant, &sigma, s_fine)?;
            SteadyStateGains {
                kind,
                sigma_filt_odd: filtered_covariance(&sigma_mid, c, r, s_odd)?,
                sigma_filt_even: even_filt,
                sigma_filt_even_refined: Some(filtered_covariance(&sigma, c, r, s_fine)?),
                sigma_filt_odd_from_even_prior: Some(filtered_covariance(&sigma, c, r, s_odd)?),
                gains: FilterGains::ThreePhase {
                    even: l_even,
                    odd_refine: kalman_gain(&sigma, c, r, s_fine)?,
                    odd: kalman_gain(&sigma_mid, c, r, s_odd)?,
                },
                sigma_pred: sigma,
                sigma_pred_odd: Some(sigma_mid),
            }
        }
    };
    Ok(out)
}

/// Steady-state filter with frozen gains and preallocated buffers.
#[derive(Debug, Clone)]
pub struct SteadyFilter {
    kind: StrategyKind,
    a: Matrix,
    bk: Matrix,
    c: Matrix,
    closed: Matrix,
    l_even: Matrix,
    l_refine: Option<Matrix>,
    l_odd: Option<Matrix>,
    x_pred: Vec<f64>,
    x_filt: Vec<f64>,
    hold_prior: Vec<f64>,
    hold_even: Vec<f64>,
    scratch_n: Vec<f64>,
    scratch_n2: Vec<f64>,
    scratch_m: Vec<f64>,
}

impl SteadyFilter {
    pub fn new(plant: &PlantModel, k: &Matrix, gains: &SteadyStateGains) -> Self {
        let n = plant.states();
        let m = plant.outputs();
        let bk = &plant.b * k;
        let (l_even, l_refine, l_odd) = match &gains.gains {
            FilterGains::Single { l } => (l.clone(), None, None),
            FilterGains::TwoPhase { even, odd } => (even.clone(), Some(odd.clone()), None),
            FilterGains::ThreePhase { even, odd_refine, odd } => {
                (even.clone(), Some(odd_refine.clone()), Some(odd.clone()))
            }
        };
        Self {
            kind: gains.kind,
            a: plant.a.clone(),
            closed: &plant.a - &bk,
            bk,
            c: plant.c.clone(),
            l_even,
            l_refine,
            l_odd,
            x_pred: vec![0.0; n],
            x_filt: vec![0.0; n],
            hold_prior: vec![0.0; n],
            hold_even: vec![0.0; n],
            scratch_n: vec![0.0; n],
            scratch_n2: vec![0.0; n],
            scratch_m: vec![0.0; m],
        }
    }

    pub fn estimate(&self) -> &[f64] {
        &self.x_filt
    }

    pub fn prediction(&self) -> &[f64] {
        &self.x_pred
    }

    /// `x ← x + L (p − C x)` in place.
    #[inline]
    fn correct_in_place(x: &mut [f64], l: &Matrix, c: &Matrix, p: &[f64], innov: &mut [f64]) {
        c.mul_vec_into(x, innov);
        for (i, pi) in innov.iter_mut().zip(p) {
            *i = pi - *i;
        }
        l.mul_vec_acc(innov, x);
    }

    /// Consume the measurements for time `t` and return `x̂_{t|t}`.
    /// `p_prime` is the Strategy III refined even sample at odd times.
    #[inline]
    pub fn update(&mut self, t: u64, p: &[f64], p_prime: &[f64]) -> &[f64] {
        let even = t.is_multiple_of(2);
        match (self.kind, even) {
            (StrategyKind::I, _) => {
                self.x_filt.copy_from_slice(&self.x_pred);
                Self::correct_in_place(&mut self.x_filt, &self.l_even, &self.c, p, &mut self.scratch_m);
            }
            (_, true) => {
                self.hold_prior.copy_from_slice(&self.x_pred);
                self.x_filt.copy_from_slice(&self.x_pred);
                Self::correct_in_place(&mut self.x_filt, &self.l_even, &self.c, p, &mut self.scratch_m);
                self.hold_even.copy_from_slice(&self.x_filt);
            }
            (StrategyKind::II, false) => {
                let l = self.l_refine.as_ref().expect("two-phase gains");
                self.scratch_n.copy_from_slice(&self.hold_prior);
                Self::correct_in_place(&mut self.scratch_n, l, &self.c, p, &mut self.scratch_m);
                self.a.mul_vec_into(&self.scratch_n, &mut self.x_filt);
                self.bk.mul_vec_into(&self.hold_even, &mut self.scratch_n2);
                for (x, u) in self.x_filt.iter_mut().zip(&self.scratch_n2) {
                    *x -= u;
                }
            }
            (StrategyKind::III, false) => {
                let l1 = self.l_refine.as_ref().expect("three-phase gains");
                let l2 = self.l_odd.as_ref().expect("three-phase gains");
                self.scratch_n.copy_from_slice(&self.hold_prior);
                Self::correct_in_place(&mut self.scratch_n, l1, &self.c, p_prime, &mut self.scratch_m);
                self.a.mul_vec_into(&self.scratch_n, &mut self.x_filt);
                self.bk.mul_vec_into(&self.hold_even, &mut self.scratch_n2);
                for (x, u) in self.x_filt.iter_mut().zip(&self.scratch_n2) {
                    *x -= u;
                }
                Self::correct_in_place(&mut self.x_filt, l2, &self.c, p, &mut self.scratch_m);
            }
        }
        self.closed.mul_vec_into(&self.x_filt, &mut self.x_pred);
        &self.x_filt
    }
}
