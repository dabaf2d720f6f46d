//! Stationary second moments and LQ cost from lifted two-step realizations.

use serde::Serialize;

use crate::codec::{NoiseLevels, StrategyConfig, StrategyKind};
use crate::error::{Error, Result};
use crate::filters::{FilterGains, SteadyStateGains};
use crate::linalg::{solve_dlyap, spectral_radius, Matrix};
use crate::plant::{CostWeights, PlantModel};

/// `s⁺ = M s + N e`, `cov(e) = P`, with `n×n` blocks.
///
/// * Strategy I: `s = [x_t; x̂_{t|t}]`,
///   `e = [w_{t−1}; v_t; q_t]`.
/// * Strategy II: `s = [x_{2k}; x̂_{2k|2k}; x_{2k+1}; x̂_{2k+1|2k+1}]`,
///   `e = [w_{2k−1}; w_{2k}; v_{2k}+q_{b}; v_{2k}+q_{2b}]`.
/// * Strategy III: `s = [x_{2k+1}; x̂_{2k+1|2k+1}; x_{2k}; x̂_{2k|2k}]`,
///   `e = [w_{2k−1}; w_{2k}; v_{2k}+q_{b}; v_{2k}+q_{b+r}; v_{2k+1}+q_{b−r}]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoStepRealization {
    pub m: Matrix,
    pub n: Matrix,
    pub p: Matrix,
    pub block_dim: usize,
}

impl TwoStepRealization {
    pub fn noise_covariance(&self) -> Matrix {
        (&(&self.n * &self.p) * &self.n.transpose()).symmetrize()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceReport {
    pub strategy: StrategyKind,
    pub psi: Matrix,
    pub cost: f64,
    /// Diagonal `n×n` blocks of `Ψ` in layout order.
    pub blocks: Vec<Matrix>,
}

impl PerformanceReport {
    /// Stationary state covariance seen by the output: `Ψ(1,1)` for
    /// Strategy I, the mean of the two state blocks otherwise.
    pub fn state_covariance(&self) -> Matrix {
        match self.strategy {
            StrategyKind::I => self.blocks[0].clone(),
            _ => (&self.blocks[0] + &self.blocks[2]).scale(0.5),
        }
    }
}

fn z(r: usize, c: usize) -> Matrix {
    Matrix::zeros(r, c)
}

fn eye(n: usize) -> Matrix {
    Matrix::identity(n)
}

fn plus_noise(r: &Matrix, s: f64) -> Matrix {
    r + &eye(r.rows()).scale(s)
}

fn realization_i(plant: &PlantModel, k: &Matrix, l: &Matrix, s_b: f64) -> Result<TwoStepRealization> {
    let (n, m) = (plant.states(), plant.outputs());
    let (a, c) = (&plant.a, &plant.c);
    let bk = &plant.b * k;
    let lc = l * c;
    let m1 = Matrix::from_blocks(&[vec![a.clone(), -&bk], vec![&lc * a, &(&(&eye(n) - &lc) * a) - &bk]])?;
    let n1 = Matrix::from_blocks(&[vec![eye(n), z(n, m), z(n, m)], vec![lc.clone(), l.clone(), l.clone()]])?;
    let p1 = Matrix::from_blocks(&[
        vec![plant.q.clone(), z(n, m), z(n, m)],
        vec![z(m, n), plant.r.clone(), z(m, m)],
        vec![z(m, n), z(m, m), eye(m).scale(s_b)],
    ])?;
    Ok(TwoStepRealization {
        m: m1,
        n: n1,
        p: p1,
        block_dim: n,
    })
}

fn realization_ii(
    plant: &PlantModel,
    k: &Matrix,
    l_even: &Matrix,
    l_odd: &Matrix,
    s_b: f64,
    s_2b: f64,
) -> Result<TwoStepRealization> {
    let (n, m) = (plant.states(), plant.outputs());
    let (a, c) = (&plant.a, &plant.c);
    let bk = &plant.b * k;
    let closed = a - &bk;
    let f1 = Matrix::from_blocks(&[
        vec![z(n, n), z(n, n), z(n, n), closed],
        vec![z(n, n), z(n, n), a.clone(), -&bk],
    ])?;
    let f2 = Matrix::from_blocks(&[
        vec![eye(n), z(n, n)],
        vec![z(n, n), eye(n)],
        vec![&eye(n) - &(l_even * c), l_even * c],
    ])?;
    let f3 = Matrix::from_blocks(&[
        vec![z(n, n), eye(n), z(n, n)],
        vec![z(n, n), z(n, n), eye(n)],
        vec![&eye(n) - &(l_odd * c), l_odd * c, z(n, n)],
    ])?;
    let f4 = Matrix::from_blocks(&[
        vec![eye(n), z(n, n), z(n, n)],
        vec![z(n, n), eye(n), z(n, n)],
        vec![a.clone(), -&bk, z(n, n)],
        vec![z(n, n), -&bk, a.clone()],
    ])?;
    let g1 = Matrix::vstack(&[z(n, n), eye(n)])?;
    let g2 = Matrix::vstack(&[z(n, m), z(n, m), l_even.clone()])?;
    let g3 = Matrix::vstack(&[z(n, m), z(n, m), l_odd.clone()])?;
    let g4 = Matrix::vstack(&[z(n, n), z(n, n), eye(n), z(n, n)])?;
    let f43 = &f4 * &f3;
    let m2 = &(&f43 * &f2) * &f1;
    // Columns follow the noise vector [w_{2k−1}; w_{2k}; v+q_b; v+q_2b].
    let n2 = Matrix::hstack(&[&(&f43 * &f2) * &g1, g4, &f43 * &g2, &f4 * &g3])?;
    let rb = plus_noise(&plant.r, s_b);
    let r2b = plus_noise(&plant.r, s_2b);
    let p2 = Matrix::from_blocks(&[
        vec![plant.q.clone(), z(n, n), z(n, m), z(n, m)],
        vec![z(n, n), plant.q.clone(), z(n, m), z(n, m)],
        vec![z(m, n), z(m, n), rb, r2b.clone()],
        vec![z(m, n), z(m, n), r2b.clone(), r2b],
    ])?;
    Ok(TwoStepRealization {
        m: m2,
        n: n2,
        p: p2,
        block_dim: n,
    })
}

#[allow(clippy::too_many_arguments)]
fn realization_iii(
    plant: &PlantModel,
    k: &Matrix,
    l_even: &Matrix,
    l_refine: &Matrix,
    l_odd: &Matrix,
    s_b: f64,
    s_fine: f64,
    s_odd: f64,
) -> Result<TwoStepRealization> {
    let (n, m) = (plant.states(), plant.outputs());
    let (a, c) = (&plant.a, &plant.c);
    let bk = &plant.b * k;
    let f1 = Matrix::from_blocks(&[
        vec![a.clone(), -&bk, z(n, n), z(n, n)],
        vec![z(n, n), a - &bk, z(n, n), z(n, n)],
    ])?;
    let f2 = Matrix::from_blocks(&[
        vec![eye(n), z(n, n)],
        vec![l_even * c, &eye(n) - &(l_even * c)],
        vec![l_refine * c, &eye(n) - &(l_refine * c)],
    ])?;
    let f3 = Matrix::from_blocks(&[
        vec![a.clone(), -&bk, z(n, n)],
        vec![z(n, n), z(n, n), eye(n)],
        vec![eye(n), z(n, n), z(n, n)],
        vec![z(n, n), eye(n), z(n, n)],
    ])?;
    let keep = &eye(n) - &(l_odd * c);
    let f4 = Matrix::from_blocks(&[
        vec![eye(n), z(n, n), z(n, n), z(n, n)],
        vec![l_odd * c, &keep * a, z(n, n), -&(&keep * &bk)],
        vec![z(n, n), z(n, n), eye(n), z(n, n)],
        vec![z(n, n), z(n, n), z(n, n), eye(n)],
    ])?;
    let g1 = Matrix::vstack(&[eye(n), z(n, n)])?;
    let g2 = Matrix::from_blocks(&[
        vec![z(n, m), z(n, m)],
        vec![l_even.clone(), z(n, m)],
        vec![z(n, m), l_refine.clone()],
    ])?;
    let g3 = Matrix::vstack(&[eye(n), z(n, n), z(n, n), z(n, n)])?;
    let g4 = Matrix::vstack(&[z(n, m), l_odd.clone(), z(n, m), z(n, m)])?;
    let f43 = &f4 * &f3;
    let m3 = &(&f43 * &f2) * &f1;
    let n3 = Matrix::hstack(&[&(&f43 * &f2) * &g1, &f4 * &g3, &f43 * &g2, g4])?;
    let rb = plus_noise(&plant.r, s_b);
    let rf = plus_noise(&plant.r, s_fine);
    let ro = plus_noise(&plant.r, s_odd);
    let p3 = Matrix::from_blocks(&[
        vec![plant.q.clone(), z(n, n), z(n, m), z(n, m), z(n, m)],
        vec![z(n, n), plant.q.clone(), z(n, m), z(n, m), z(n, m)],
        vec![z(m, n), z(m, n), rb, rf.clone(), z(m, m)],
        vec![z(m, n), z(m, n), rf.clone(), rf, z(m, m)],
        vec![z(m, n), z(m, n), z(m, m), z(m, m), ro],
    ])?;
    Ok(TwoStepRealization {
        m: m3,
        n: n3,
        p: p3,
        block_dim: n,
    })
}

/// Lifted closed-loop realization of the strategy with frozen gains.
pub fn build_realization(
    plant: &PlantModel,
    k: &Matrix,
    gains: &SteadyStateGains,
    cfg: &StrategyConfig,
) -> Result<TwoStepRealization> {
    if gains.kind != cfg.kind {
        return Err(Error::Config(format!(
            "gains computed for strategy {} used with strategy {}",
            gains.kind, cfg.kind
        )));
    }
    build_realization_for_levels(plant, k, gains, &cfg.noise_levels())
}

/// [`build_realization`] with explicit quantization noise levels.
pub fn build_realization_for_levels(
    plant: &PlantModel,
    k: &Matrix,
    gains: &SteadyStateGains,
    s: &NoiseLevels,
) -> Result<TwoStepRealization> {
    plant.check_dims()?;
    if k.shape() != (plant.inputs(), plant.states()) {
        return Err(Error::Dimension(format!("gain K is {:?}", k.shape())));
    }
    let missing = || Error::Config("noise levels do not match the filter gains".into());
    let real = match &gains.gains {
        FilterGains::Single { l } => realization_i(plant, k, l, s.even)?,
        FilterGains::TwoPhase { even, odd } => {
            realization_ii(plant, k, even, odd, s.even, s.refined.ok_or_else(missing)?)?
        }
        FilterGains::ThreePhase { even, odd_refine, odd } => realization_iii(
            plant,
            k,
            even,
            odd_refine,
            odd,
            s.even,
            s.refined.ok_or_else(missing)?,
            s.odd.ok_or_else(missing)?,
        )?,
    };
    let radius = spectral_radius(&real.m);
    if radius >= 1.0 {
        return Err(Error::UnstableLift { radius });
    }
    Ok(real)
}

/// Solve for `Ψ` and evaluate the strategy's LQ cost.
pub fn compute_performance(
    plant: &PlantModel,
    weights: &CostWeights,
    k: &Matrix,
    cfg: &StrategyConfig,
    gains: &SteadyStateGains,
) -> Result<PerformanceReport> {
    let real = build_realization(plant, k, gains, cfg)?;
    performance_of(&real, weights, k, cfg.kind)
}

/// Cost and `Ψ` for explicit noise levels, e.g. the quantization-free case.
pub fn compute_performance_for_levels(
    plant: &PlantModel,
    weights: &CostWeights,
    k: &Matrix,
    levels: &NoiseLevels,
    gains: &SteadyStateGains,
) -> Result<PerformanceReport> {
    let real = build_realization_for_levels(plant, k, gains, levels)?;
    performance_of(&real, weights, k, gains.kind)
}

fn performance_of(
    real: &TwoStepRealization,
    weights: &CostWeights,
    k: &Matrix,
    strategy: StrategyKind,
) -> Result<PerformanceReport> {
    let w = real.noise_covariance();
    let scale = w.max_abs().max(1.0);
    let min_eig = w.min_eigenvalue_sym();
    if min_eig < -1e-9 * scale {
        return Err(Error::IndefiniteNoise {
            min_eigenvalue: min_eig,
        });
    }
    let psi = solve_dlyap(&real.m, &w)?;
    let n = real.block_dim;
    let blocks: Vec<Matrix> = (0..psi.rows() / n).map(|i| psi.block(i * n, i * n, n, n)).collect();
    let ctrl = &(&k.transpose() * &weights.rc) * k;
    let state_cost = |b: &Matrix| (&weights.qc * b).trace();
    let input_cost = |b: &Matrix| (&ctrl * b).trace();
    let cost = match strategy {
        StrategyKind::I => state_cost(&blocks[0]) + input_cost(&blocks[1]),
        _ => {
            0.5 * (state_cost(&blocks[0]) + state_cost(&blocks[2]))
                + 0.5 * (input_cost(&blocks[1]) + input_cost(&blocks[3]))
        }
    };
    Ok(PerformanceReport {
        strategy,
        psi,
        cost,
        blocks,
    })
}

/// Covariance of the quantizer input `z = y + d`.
pub fn output_covariance(report: &PerformanceReport, plant: &PlantModel, cfg: &StrategyConfig) -> Matrix {
    output_covariance_with_dither(report, plant, cfg.dither_variance())
}

pub fn output_covariance_with_dither(report: &PerformanceReport, plant: &PlantModel, dither_variance: f64) -> Matrix {
    let c = &plant.c;
    let y = &(&(c * &report.state_covariance()) * &c.transpose()) + &plant.r;
    (&y + &eye(plant.outputs()).scale(dither_variance)).symmetrize()
}

/// Scalar-output form of [`output_covariance`].
pub fn output_variance(report: &PerformanceReport, plant: &PlantModel, cfg: &StrategyConfig) -> f64 {
    output_covariance(report, plant, cfg)[(0, 0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::steady_state;
    use crate::plant::lqr_gain;

    fn scalar_plant() -> PlantModel {
        PlantModel::scalar(0.9999, 1.0, 1.0, 1.0, 1.0)
    }

    fn setup(rc: f64, cfg: StrategyConfig) -> (Matrix, SteadyStateGains) {
        let k = lqr_gain(&scalar_plant(), &CostWeights::scalar(1.0, rc)).unwrap().k;
        (k, steady_state(&scalar_plant(), &cfg).unwrap())
    }

    #[test]
    fn strategy_i_scalar_entries() {
        let cfg = StrategyConfig::new(StrategyKind::I, 3, 5.68);
        let (k, g) = setup(1.0, cfg);
        let r = build_realization(&scalar_plant(), &k, &g, &cfg).unwrap();
        let (a, kk, l) = (0.9999, k[(0, 0)], g.gains.primary()[(0, 0)]);
        let want = [a, -kk, l * a, (1.0 - l) * a - kk];
        for (got, want) in r.m.as_slice().iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn no_measurement_gain_is_block_triangular() {
        let cfg = StrategyConfig::new(StrategyKind::I, 3, 5.68);
        let (k, mut g) = setup(1.0, cfg);
        g.gains = FilterGains::Single { l: Matrix::scalar(0.0) };
        let r = build_realization(&scalar_plant(), &k, &g, &cfg).unwrap();
        assert_eq!(r.m[(1, 0)], 0.0);
        let mut eig = [r.m[(0, 0)], r.m[(1, 1)]];
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - (0.9999 - k[(0, 0)])).abs() < 1e-15 && eig[1] == 0.9999);
    }

    #[test]
    fn lifted_maps_stable_on_table_rows() {
        for rc in [1e5, 1e4, 1e3, 100.0, 10.0, 1.0, 0.1] {
            for cfg in [
                StrategyConfig::new(StrategyKind::II, 3, 10.0),
                StrategyConfig::strategy_iii(3, 1, 10.0),
            ] {
                let (k, g) = setup(rc, cfg);
                let r = build_realization(&scalar_plant(), &k, &g, &cfg).unwrap();
                assert!(spectral_radius(&r.m) < 1.0);
            }
        }
    }

    #[test]
    fn lyapunov_residual_and_symmetry() {
        for cfg in [
            StrategyConfig::new(StrategyKind::I, 3, 9.15),
            StrategyConfig::new(StrategyKind::II, 3, 9.15),
            StrategyConfig::strategy_iii(3, 1, 9.15),
        ] {
            let (k, g) = setup(100.0, cfg);
            let r = build_realization(&scalar_plant(), &k, &g, &cfg).unwrap();
            let rep = compute_performance(&scalar_plant(), &CostWeights::scalar(1.0, 100.0), &k, &cfg, &g).unwrap();
            let psi = &rep.psi;
            let res = (&(&(&(&r.m * psi) * &r.m.transpose()) + &r.noise_covariance()) - psi).norm_inf();
            assert!(res <= 1e-9 * (1.0 + psi.norm_inf()));
            assert!(psi.asymmetry() < 1e-12);
            assert!(rep.blocks.iter().all(|b| b.is_psd(1e-9)));
            assert!(rep.cost > 0.0);
        }
    }

    #[test]
    fn vanishing_quantization_recovers_classical_lqg() {
        let plant = scalar_plant();
        let weights = CostWeights::scalar(1.0, 1.0);
        let k = lqr_gain(&plant, &weights).unwrap().k;
        // Classical LQG oracle: estimator error and estimate dynamics with
        // the plain Kalman filter.
        let sigma = crate::linalg::solve_dare(&crate::linalg::DareProblem::new(
            plant.a.transpose(),
            plant.c.transpose(),
            plant.q.clone(),
            plant.r.clone(),
        ))
        .unwrap();
        let l = crate::filters::kalman_gain(&sigma, &plant.c, &plant.r, 0.0).unwrap();
        let real = realization_i(&plant, &k, &l, 0.0).unwrap();
        let psi = solve_dlyap(&real.m, &real.noise_covariance()).unwrap();
        let classical = psi[(0, 0)] + k[(0, 0)].powi(2) * psi[(1, 1)];
        let cfg = StrategyConfig::new(StrategyKind::I, 30, 5.0);
        let g = steady_state(&plant, &cfg).unwrap();
        let rep = compute_performance(&plant, &weights, &k, &cfg, &g).unwrap();
        assert!((rep.cost - classical).abs() < 1e-9 * classical);
    }

    #[test]
    fn cost_non_increasing_in_bits() {
        let plant = scalar_plant();
        let weights = CostWeights::scalar(1.0, 10.0);
        let k = lqr_gain(&plant, &weights).unwrap().k;
        let mut last = f64::INFINITY;
        for b in 1..12 {
            let cfg = StrategyConfig::new(StrategyKind::I, b, 8.0);
            let g = steady_state(&plant, &cfg).unwrap();
            let j = compute_performance(&plant, &weights, &k, &cfg, &g).unwrap().cost;
            assert!(j <= last + 1e-12);
            last = j;
        }
    }

    #[test]
    fn output_variance_without_output_matrix() {
        let mut plant = scalar_plant();
        plant.c = Matrix::scalar(0.0);
        let cfg = StrategyConfig::new(StrategyKind::I, 3, 4.0);
        let weights = CostWeights::scalar(1.0, 1.0);
        let k = lqr_gain(&plant, &weights).unwrap().k;
        let g = steady_state(&plant, &cfg).unwrap();
        let rep = compute_performance(&plant, &weights, &k, &cfg, &g).unwrap();
        let z = output_variance(&rep, &plant, &cfg);
        assert!((z - (1.0 + cfg.even_quantizer().error_variance())).abs() < 1e-15);
    }

    #[test]
    fn frozen_scalar_costs() {
        let plant = scalar_plant();
        let w = CostWeights::scalar(1.0, 1.0);
        let k = lqr_gain(&plant, &w).unwrap().k;
        let cases = [
            (StrategyConfig::new(StrategyKind::I, 3, 5.68), 2.30845, 3.02946),
            (StrategyConfig::new(StrategyKind::II, 3, 5.68), 2.89332, 3.44897),
            (StrategyConfig::strategy_iii(3, 1, 5.68), 2.39148, 3.30153),
        ];
        for (cfg, j, z) in cases {
            let g = steady_state(&plant, &cfg).unwrap();
            let rep = compute_performance(&plant, &w, &k, &cfg, &g).unwrap();
            assert!((rep.cost - j).abs() < 1e-4, "{} {}", cfg.kind, rep.cost);
            assert!((output_variance(&rep, &plant, &cfg) - z).abs() < 1e-4);
        }
    }

    #[test]
    fn mismatched_gains_rejected() {
        let cfg = StrategyConfig::new(StrategyKind::II, 3, 5.0);
        let (k, g) = setup(1.0, StrategyConfig::new(StrategyKind::I, 3, 5.0));
        assert!(matches!(
            build_realization(&scalar_plant(), &k, &g, &cfg),
            Err(Error::Config(_))
        ));
    }
}
