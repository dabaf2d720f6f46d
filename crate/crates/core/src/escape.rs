//! Escape-time analysis and the search for the quantizer bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::codec::{NoiseLevels, StrategyConfig, StrategyKind};
use crate::error::{Error, Result};
use crate::filters::{steady_state, steady_state_for_levels};
use crate::linalg::{inverse_normal_cdf, normal_cdf, spectral_radius, Matrix};
use crate::performance::{compute_performance, compute_performance_for_levels, output_covariance_with_dither};
use crate::plant::{lqr_gain, CostWeights, Finding, PlantModel};

pub const DAMPING: f64 = 0.5;
pub const MAX_ITERATIONS: usize = 200;
const POLISH_STEPS: usize = 20;
/// Samples used for the orthant probability when the output is a vector.
pub const ORTHANT_SAMPLES: usize = 1_000_000;
const ORTHANT_SEED: u64 = 0x5eed_0e5c;

/// Mean of the geometric first-exit law with per-step probability `β`.
pub fn expected_escape_time(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Domain(format!("escape probability {beta} not in (0, 1]")));
    }
    Ok(1.0 / beta)
}

/// `P(|z| > ζ)` for `z ~ N(0, Z)`.
pub fn escape_probability(zeta: f64, z: f64) -> f64 {
    if zeta <= 0.0 {
        return 1.0;
    }
    2.0 * normal_cdf(-zeta / z.sqrt())
}

fn orthant_sample(cov: &Matrix, samples: usize, seed: u64) -> Vec<f64> {
    let root = cov.psd_sqrt();
    let m = cov.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = vec![0.0; m];
    let mut z = vec![0.0; m];
    (0..samples)
        .map(|_| {
            for v in e.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            root.mul_vec_into(&e, &mut z);
            -z.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Monte Carlo estimate of `P(z ≤ −ζ·1)` for `z ~ N(0, cov)`.
pub fn orthant_probability(zeta: f64, cov: &Matrix, samples: usize, seed: u64) -> f64 {
    let w = orthant_sample(cov, samples, seed);
    w.iter().filter(|&&v| v >= zeta).count() as f64 / samples as f64
}

/// Bound `ζ` with `P(z ≤ −ζ·1) = tail` for `z ~ N(0, cov)`.
pub fn orthant_bound(tail: f64, cov: &Matrix, samples: usize, seed: u64) -> f64 {
    if cov.rows() == 1 {
        return -cov[(0, 0)].sqrt() * inverse_normal_cdf(tail).unwrap_or(f64::NAN);
    }
    let mut w = orthant_sample(cov, samples, seed);
    w.sort_by(f64::total_cmp);
    let idx = ((1.0 - tail) * samples as f64).floor() as usize;
    w[idx.min(samples - 1)]
}

/// State-space model `ξ⁺ = Fξ + G[w; v]`, `y = Hξ + J v` of the closed-loop
/// output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopRealization {
    pub f: Matrix,
    pub g: Matrix,
    pub h: Matrix,
    pub j: Matrix,
}

impl ClosedLoopRealization {
    pub fn new(plant: &PlantModel, k: &Matrix, l: &Matrix) -> Result<Self> {
        let (n, m) = (plant.states(), plant.outputs());
        let (a, c) = (&plant.a, &plant.c);
        let bk = &plant.b * k;
        let lca = &(l * c) * a;
        Ok(Self {
            f: Matrix::from_blocks(&[vec![a.clone(), -&bk], vec![lca.clone(), &(a - &bk) - &lca]])?,
            g: Matrix::from_blocks(&[vec![Matrix::identity(n), Matrix::zeros(n, m)], vec![l * c, l.clone()]])?,
            h: Matrix::hstack(&[c.clone(), Matrix::zeros(m, n)])?,
            j: Matrix::identity(m),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicityCheck {
    pub realization: ClosedLoopRealization,
    pub radius: f64,
    pub finding: Finding,
}

/// Stability of the closed-loop output model and nondegeneracy of its
/// measurement noise.
pub fn check_ergodicity(plant: &PlantModel, k: &Matrix, l: &Matrix) -> Result<ErgodicityCheck> {
    let realization = ClosedLoopRealization::new(plant, k, l)?;
    let radius = spectral_radius(&realization.f);
    let jr = &(&realization.j * &plant.r) * &realization.j.transpose();
    let stable = radius < 1.0;
    let definite = jr.is_positive_definite();
    let detail = match (stable, definite) {
        (true, true) => String::new(),
        (false, _) => format!("spectral radius {radius:.6} >= 1"),
        (true, false) => "JRJ^T not positive definite".into(),
    };
    Ok(ErgodicityCheck {
        realization,
        radius,
        finding: Finding::new("output ergodic", stable && definite, detail),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EscapeTarget {
    MeanEscape(f64),
    Probability(f64),
}

impl EscapeTarget {
    pub fn beta(&self) -> Result<f64> {
        match *self {
            EscapeTarget::MeanEscape(tau) if tau > 1.0 && tau.is_finite() => Ok(1.0 / tau),
            EscapeTarget::Probability(beta) if beta > 0.0 && beta < 1.0 => Ok(beta),
            t => Err(Error::Domain(format!("invalid escape target {t:?}"))),
        }
    }
}

/// The bound of `strategy` is ignored and solved for.
#[derive(Debug, Clone, Copy)]
pub struct EscapeQuery<'a> {
    pub target: EscapeTarget,
    pub strategy: StrategyConfig,
    pub plant: &'a PlantModel,
    pub weights: &'a CostWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeSolution {
    pub zeta: f64,
    pub beta: f64,
    pub tau_analytic: f64,
    /// Output variance (first diagonal entry for vector outputs) at the
    /// solution.
    pub z: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn zero_levels(kind: StrategyKind) -> NoiseLevels {
    NoiseLevels {
        even: 0.0,
        refined: (kind != StrategyKind::I).then_some(0.0),
        odd: (kind == StrategyKind::III).then_some(0.0),
    }
}

/// A few undamped steps past the stopping rule so that `ζ` and `Z(ζ)` agree
/// to rounding.
fn polish(
    query: &EscapeQuery,
    k: &Matrix,
    mut zeta: f64,
    mut z: f64,
    next: &impl Fn(&Matrix) -> f64,
) -> Result<(f64, f64)> {
    for _ in 0..POLISH_STEPS {
        let cfg = query.strategy.with_bound(zeta);
        let gains = steady_state(query.plant, &cfg)?;
        let report = compute_performance(query.plant, query.weights, k, &cfg, &gains)?;
        let cov = output_covariance_with_dither(&report, query.plant, cfg.dither_variance());
        let fresh = next(&cov);
        z = cov[(0, 0)];
        let done = (fresh - zeta).abs() <= 1e-13 * (1.0 + zeta);
        zeta = fresh;
        if done {
            break;
        }
    }
    Ok((zeta, z))
}

/// Damped fixed point `ζ ← ½ζ + ½ζ_new(Z(ζ))` for the target escape rate.
pub fn solve_zeta(query: &EscapeQuery) -> Result<EscapeSolution> {
    let beta = query.target.beta()?;
    let tail = beta / 2.0;
    let plant = query.plant;
    let k = lqr_gain(plant, query.weights)?.k;
    let next = |cov: &Matrix| orthant_bound(tail, cov, ORTHANT_SAMPLES, ORTHANT_SEED);

    let kind = query.strategy.kind;
    let levels = zero_levels(kind);
    let gains = steady_state_for_levels(plant, kind, &levels)?;
    let report = compute_performance_for_levels(plant, query.weights, &k, &levels, &gains)?;
    let mut zeta = next(&output_covariance_with_dither(&report, plant, 0.0));

    for it in 1..=MAX_ITERATIONS {
        let cfg = query.strategy.with_bound(zeta);
        let gains = steady_state(plant, &cfg)?;
        let report = compute_performance(plant, query.weights, &k, &cfg, &gains)?;
        let cov = output_covariance_with_dither(&report, plant, cfg.dither_variance());
        let fresh = next(&cov);
        if !fresh.is_finite() || fresh <= 0.0 {
            return Err(Error::NonFinite);
        }
        if (fresh - zeta).abs() <= 1e-6 * (1.0 + zeta) {
            let (zeta, z) = polish(query, &k, fresh, cov[(0, 0)], &next)?;
            return Ok(EscapeSolution {
                zeta,
                beta,
                tau_analytic: 1.0 / beta,
                z,
                iterations: it,
                converged: true,
            });
        }
        zeta = (1.0 - DAMPING) * zeta + DAMPING * fresh;
    }
    let cfg = query.strategy.with_bound(zeta);
    let gains = steady_state(plant, &cfg)?;
    let report = compute_performance(plant, query.weights, &k, &cfg, &gains)?;
    Ok(EscapeSolution {
        zeta,
        beta,
        tau_analytic: 1.0 / beta,
        z: output_covariance_with_dither(&report, plant, cfg.dither_variance())[(0, 0)],
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}
