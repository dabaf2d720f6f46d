//! Closed-loop Monte Carlo: plant, encoder, channel, decoder, filter and
//! control stepped in lockstep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{Receiver, Reception, StrategyConfig, Transmission, Transmitter};
use crate::error::{Error, Result};
use crate::filters::{steady_state, SteadyFilter, SteadyStateGains};
use crate::linalg::Matrix;
use crate::plant::{lqr_gain, CostWeights, PlantModel};
use crate::stats;

/// Extra bits given to the quantizer when saturation is disabled; the range
/// grows by `2^7` at the same step.
pub const SATURATION_OFF_HEADROOM: u32 = 7;
pub const COST_BURN_IN: usize = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub plant: PlantModel,
    pub weights: CostWeights,
    /// `bound` is the nominal `ζ`; headroom is set from `saturation_enabled`.
    pub strategy: StrategyConfig,
    pub k: Matrix,
    pub gains: SteadyStateGains,
    pub horizon: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub saturation_enabled: bool,
    pub dither: bool,
    pub initial_state: Option<Vec<f64>>,
}

impl SimConfig {
    /// LQR gain and steady-state filter gains for the nominal bound.
    pub fn design(plant: &PlantModel, weights: &CostWeights, strategy: StrategyConfig) -> Result<Self> {
        let k = lqr_gain(plant, weights)?.k;
        let gains = steady_state(plant, &strategy)?;
        Ok(Self {
            plant: plant.clone(),
            weights: weights.clone(),
            strategy,
            k,
            gains,
            horizon: 5000,
            runs: 1,
            base_seed: 0,
            saturation_enabled: true,
            dither: true,
            initial_state: None,
        })
    }

    pub fn with_runs(mut self, horizon: usize, runs: usize) -> Self {
        self.horizon = horizon;
        self.runs = runs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_saturation(mut self, enabled: bool) -> Self {
        self.saturation_enabled = enabled;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if let Some(x0) = &self.initial_state {
            if x0.len() != self.plant.states() {
                return Err(Error::Dimension(format!("initial state has length {}", x0.len())));
            }
        }
        self.quantizing_strategy().validate()
    }

    fn quantizing_strategy(&self) -> StrategyConfig {
        let headroom = if self.saturation_enabled {
            0
        } else {
            SATURATION_OFF_HEADROOM
        };
        self.strategy.with_headroom(headroom)
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.base_seed ^ run as u64
    }
}

/// One simulated step as seen by an observer.
#[derive(Debug, Clone, Default)]
pub struct StepRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub y: Vec<f64>,
    /// Quantizer input `y + d`; repeats the even value at Strategy II odd
    /// times, where nothing is quantized.
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub payloads: Vec<u64>,
    pub p: Vec<f64>,
    pub saturated: bool,
    pub escaped: bool,
    pub cost: f64,
}

/// Single closed-loop realization.
pub struct ClosedLoop<'a> {
    cfg: &'a SimConfig,
    noise: ChaCha8Rng,
    q_root: Matrix,
    r_root: Matrix,
    tx: Transmitter,
    rx: Receiver,
    filter: SteadyFilter,
    tr: Transmission,
    rc: Reception,
    rec: StepRecord,
    e_n: Vec<f64>,
    e_m: Vec<f64>,
    buf_n: Vec<f64>,
    next_t: usize,
}

impl<'a> ClosedLoop<'a> {
    pub fn new(cfg: &'a SimConfig, run: usize) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.run_seed(run);
        let strategy = cfg.quantizing_strategy();
        let (n, m, p) = (cfg.plant.states(), cfg.plant.outputs(), cfg.plant.inputs());
        let dither_seed = cfg.dither.then_some(seed);
        let mut noise = ChaCha8Rng::seed_from_u64(seed);
        noise.set_stream(0);
        let rec = StepRecord {
            x: cfg.initial_state.clone().unwrap_or_else(|| vec![0.0; n]),
            x_hat: vec![0.0; n],
            y: vec![0.0; m],
            z: vec![0.0; m],
            u: vec![0.0; p],
            ..StepRecord::default()
        };
        Ok(Self {
            cfg,
            noise,
            q_root: cfg.plant.q.psd_sqrt(),
            r_root: cfg.plant.r.psd_sqrt(),
            tx: Transmitter::new(strategy, m, dither_seed)?,
            rx: Receiver::new(strategy, m, dither_seed)?,
            filter: SteadyFilter::new(&cfg.plant, &cfg.k, &cfg.gains),
            tr: Transmission::default(),
            rc: Reception::default(),
            rec,
            e_n: vec![0.0; n],
            e_m: vec![0.0; m],
            buf_n: vec![0.0; n],
            next_t: 0,
        })
    }

    fn gaussian(rng: &mut ChaCha8Rng, root: &Matrix, e: &mut [f64], out: &mut [f64]) {
        for v in e.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        root.mul_vec_into(e, out);
    }

    /// Advance one step; the record holds `x_t` and the signals derived
    /// from it.
    pub fn step(&mut self) -> Result<&StepRecord> {
        let cfg = self.cfg;
        let plant = &cfg.plant;
        let rec = &mut self.rec;
        rec.t = self.next_t;
        self.next_t += 1;

        Self::gaussian(&mut self.noise, &self.r_root, &mut self.e_m, &mut rec.y);
        plant.c.mul_vec_acc(&rec.x, &mut rec.y);

        self.tx.transmit(&rec.y, &mut self.tr)?;
        if !self.tr.z.is_empty() {
            rec.z.copy_from_slice(&self.tr.z);
        }
        rec.saturated = self.tr.saturated;
        rec.escaped = rec.z.iter().any(|z| z.abs() > cfg.strategy.bound);
        rec.payloads.clear();
        rec.payloads.extend(self.tr.messages.iter().map(|m| m.payload));

        self.rx.receive(&self.tr.messages, &mut self.rc)?;
        rec.p.clone_from(&self.rc.p);
        let x_hat = self.filter.update(rec.t as u64, &self.rc.p, &self.rc.p_prime);
        rec.x_hat.copy_from_slice(x_hat);
        cfg.k.mul_vec_into(&rec.x_hat, &mut rec.u);
        rec.u.iter_mut().for_each(|u| *u = -*u);
        rec.cost = cfg.weights.qc.quad_form(&rec.x) + cfg.weights.rc.quad_form(&rec.u);
        Ok(&self.rec)
    }

    /// `x_{t+1} = A x_t + B u_t + w_t`.
    pub fn advance(&mut self) {
        let plant = &self.cfg.plant;
        let rec = &mut self.rec;
        Self::gaussian(&mut self.noise, &self.q_root, &mut self.e_n, &mut self.buf_n);
        plant.a.mul_vec_acc(&rec.x, &mut self.buf_n);
        plant.b.mul_vec_acc(&rec.u, &mut self.buf_n);
        rec.x.copy_from_slice(&self.buf_n);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimTrace {
    pub x: Vec<Vec<f64>>,
    pub x_hat: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub messages: Vec<Vec<u64>>,
    pub p: Vec<Vec<f64>>,
    pub saturation_events: Vec<usize>,
    /// Index of the first sample with `|z| > ζ`.
    pub first_escape: Option<usize>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Number of samples up to and including the first escape.
    pub fn escape_time(&self) -> Option<usize> {
        self.first_escape.map(|t| t + 1)
    }

    /// First output component over time.
    pub fn output(&self) -> Vec<f64> {
        self.y.iter().map(|y| y[0]).collect()
    }
}

/// Full trace of run `run`.
pub fn run_closed_loop(cfg: &SimConfig, run: usize) -> Result<SimTrace> {
    let mut sim = ClosedLoop::new(cfg, run)?;
    let mut trace = SimTrace::default();
    for t in 0..cfg.horizon {
        let r = sim.step()?;
        trace.x.push(r.x.clone());
        trace.x_hat.push(r.x_hat.clone());
        trace.y.push(r.y.clone());
        trace.z.push(r.z.clone());
        trace.u.push(r.u.clone());
        trace.messages.push(r.payloads.clone());
        trace.p.push(r.p.clone());
        if r.saturated {
            trace.saturation_events.push(t);
        }
        if r.escaped && trace.first_escape.is_none() {
            trace.first_escape = Some(t);
        }
        sim.advance();
    }
    Ok(trace)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub run_count: usize,
    pub horizon: usize,
    pub base_seed: u64,
    /// Time-and-run average of `xᵀQc x + uᵀRc u` after burn-in.
    pub empirical_cost: Option<f64>,
    /// Standard error of the cost across runs.
    pub cost_std_error: Option<f64>,
    /// Mean escape time over runs that escaped.
    pub empirical_mean_escape: Option<f64>,
    /// Mean escape time with unescaped runs counted at the horizon.
    pub censored_mean_escape: Option<f64>,
    pub censored_fraction: Option<f64>,
    pub saturation_rate: Option<f64>,
}

fn par_runs<T: Send>(cfg: &SimConfig, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..cfg.runs).into_par_iter().map(f).collect()
}

fn summarize_escapes(summary: &mut MonteCarloSummary, escapes: &[Option<usize>], horizon: usize) {
    let hit: Vec<f64> = escapes.iter().flatten().map(|&t| t as f64).collect();
    let censored: Vec<f64> = escapes.iter().map(|t| t.unwrap_or(horizon) as f64).collect();
    summary.empirical_mean_escape = (!hit.is_empty()).then(|| stats::mean(&hit));
    summary.censored_mean_escape = Some(stats::mean(&censored));
    summary.censored_fraction = Some(1.0 - hit.len() as f64 / escapes.len() as f64);
}

/// First-escape statistics. Runs stop at their first escape.
pub fn empirical_escape_time(cfg: &SimConfig) -> Result<MonteCarloSummary> {
    cfg.validate()?;
    let escapes = par_runs(cfg, |run| {
        let mut sim = ClosedLoop::new(cfg, run)?;
        for t in 0..cfg.horizon {
            if sim.step()?.escaped {
                return Ok(Some(t + 1));
            }
            sim.advance();
        }
        Ok(None)
    })?;
    let mut summary = MonteCarloSummary {
        run_count: cfg.runs,
        horizon: cfg.horizon,
        base_seed: cfg.base_seed,
        ..Default::default()
    };
    summarize_escapes(&mut summary, &escapes, cfg.horizon);
    Ok(summary)
}

/// Average running cost with the first [`COST_BURN_IN`] steps discarded.
pub fn empirical_cost(cfg: &SimConfig) -> Result<MonteCarloSummary> {
    cfg.validate()?;
    if cfg.horizon <= COST_BURN_IN {
        return Err(Error::Config(format!(
            "horizon must exceed the {COST_BURN_IN}-step burn-in"
        )));
    }
    let per_run = par_runs(cfg, |run| {
        let mut sim = ClosedLoop::new(cfg, run)?;
        let (mut cost, mut saturated) = (0.0, 0usize);
        let mut escape = None;
        for t in 0..cfg.horizon {
            let r = sim.step()?;
            if t >= COST_BURN_IN {
                cost += r.cost;
            }
            saturated += r.saturated as usize;
            if r.escaped && escape.is_none() {
                escape = Some(t + 1);
            }
            sim.advance();
        }
        Ok((cost / (cfg.horizon - COST_BURN_IN) as f64, saturated, escape))
    })?;
    let costs: Vec<f64> = per_run.iter().map(|r| r.0).collect();
    let escapes: Vec<Option<usize>> = per_run.iter().map(|r| r.2).collect();
    let mut summary = MonteCarloSummary {
        run_count: cfg.runs,
        horizon: cfg.horizon,
        base_seed: cfg.base_seed,
        empirical_cost: Some(stats::mean(&costs)),
        cost_std_error: (cfg.runs > 1).then(|| stats::std_error(&costs)),
        saturation_rate: Some(per_run.iter().map(|r| r.1).sum::<usize>() as f64 / (cfg.runs * cfg.horizon) as f64),
        ..Default::default()
    };
    summarize_escapes(&mut summary, &escapes, cfg.horizon);
    Ok(summary)
}

/// First exit of iid `N(0, σ²)` samples from `[−ζ, ζ]`, as a reference for
/// the geometric law.
pub fn iid_escape_time(zeta: f64, sigma: f64, horizon: usize, runs: usize, seed: u64) -> MonteCarloSummary {
    let escapes: Vec<Option<usize>> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ run as u64);
            (1..=horizon).find(|_| (sigma * rng.sample::<f64, _>(StandardNormal)).abs() > zeta)
        })
        .collect();
    let mut summary = MonteCarloSummary {
        run_count: runs,
        horizon,
        base_seed: seed,
        ..Default::default()
    };
    summarize_escapes(&mut summary, &escapes, horizon);
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::StrategyKind;
    use crate::escape::escape_probability;
    use crate::performance::compute_performance;

    fn scalar_plant() -> PlantModel {
        PlantModel::scalar(0.9999, 1.0, 1.0, 1.0, 1.0)
    }

    fn cfg(kind: StrategyKind, rc: f64, zeta: f64) -> SimConfig {
        let strategy = match kind {
            StrategyKind::III => StrategyConfig::strategy_iii(3, 1, zeta),
            k => StrategyConfig::new(k, 3, zeta),
        };
        SimConfig::design(&scalar_plant(), &CostWeights::scalar(1.0, rc), strategy).unwrap()
    }

    #[test]
    fn identical_seeds_identical_traces() {
        for kind in StrategyKind::ALL {
            let c = cfg(kind, 1.0, 5.68).with_runs(2000, 1).with_seed(17);
            assert_eq!(run_closed_loop(&c, 3).unwrap(), run_closed_loop(&c, 3).unwrap());
            assert_ne!(run_closed_loop(&c, 3).unwrap(), run_closed_loop(&c, 4).unwrap());
        }
    }

    #[test]
    fn trace_lengths_and_escape_consistency() {
        let c = cfg(StrategyKind::I, 1.0, 3.0).with_runs(3000, 1);
        let tr = run_closed_loop(&c, 0).unwrap();
        assert_eq!(tr.len(), 3000);
        assert_eq!(tr.z.len(), 3000);
        assert_eq!(tr.messages.len(), 3000);
        let first = tr.first_escape.expect("small bound escapes");
        assert!(tr.z[..first].iter().all(|z| z[0].abs() <= 3.0));
        assert!(tr.z[first][0].abs() > 3.0);
        assert_eq!(tr.escape_time(), Some(first + 1));
    }

    #[test]
    fn noise_free_loop_stays_near_zero() {
        let plant = PlantModel::scalar(0.9999, 1.0, 1.0, 0.0, 0.0);
        let strategy = StrategyConfig::new(StrategyKind::I, 3, 1.0);
        let mut c = SimConfig::design(&plant, &CostWeights::scalar(1.0, 1.0), strategy)
            .unwrap()
            .with_runs(500, 1);
        c.dither = false;
        let tr = run_closed_loop(&c, 0).unwrap();
        let half_step = strategy.even_quantizer().step() / 2.0;
        assert_eq!(tr.p[0][0], half_step);
        assert!(tr
            .y
            .iter()
            .all(|y| y[0].abs() <= 2.0 * half_step / (1.0 - 0.9999f64 + c.k[(0, 0)])));
    }

    #[test]
    fn zero_state_weight_and_gain_cost_nothing() {
        let plant = scalar_plant();
        let strategy = StrategyConfig::new(StrategyKind::I, 3, 5.0);
        let mut c = SimConfig::design(&plant, &CostWeights::scalar(0.0, 1.0), strategy)
            .unwrap()
            .with_runs(3000, 2);
        c.k = Matrix::scalar(0.0);
        assert_eq!(empirical_cost(&c).unwrap().empirical_cost, Some(0.0));
    }

    #[test]
    fn summaries_deterministic_across_thread_schedules() {
        let c = cfg(StrategyKind::II, 1.0, 4.0).with_runs(2000, 16).with_seed(9);
        assert_eq!(empirical_escape_time(&c).unwrap(), empirical_escape_time(&c).unwrap());
        assert_eq!(empirical_cost(&c).unwrap(), empirical_cost(&c).unwrap());
    }

    #[test]
    fn strategy_two_odd_samples_repeat_even_input() {
        let c = cfg(StrategyKind::II, 1.0, 5.68).with_runs(100, 1);
        let tr = run_closed_loop(&c, 0).unwrap();
        for t in (0..100).step_by(2) {
            assert_eq!(tr.z[t], tr.z[t + 1]);
        }
    }

    #[test]
    fn unsaturated_cost_near_analytic() {
        let c = cfg(StrategyKind::I, 1.0, 5.68)
            .with_runs(200_000, 4)
            .with_saturation(false);
        let mc = empirical_cost(&c).unwrap();
        let j = compute_performance(&c.plant, &c.weights, &c.k, &c.strategy, &c.gains)
            .unwrap()
            .cost;
        assert!((mc.empirical_cost.unwrap() - j).abs() < 0.03 * j, "{mc:?} vs {j}");
        assert_eq!(mc.saturation_rate, Some(0.0));
    }

    #[test]
    fn saturation_rate_tracks_escape_probability() {
        let c = cfg(StrategyKind::I, 0.1, 4.0).with_runs(100_000, 4);
        let mc = empirical_cost(&c).unwrap();
        let j = compute_performance(&c.plant, &c.weights, &c.k, &c.strategy, &c.gains).unwrap();
        let z = crate::performance::output_variance(&j, &c.plant, &c.strategy);
        let beta = escape_probability(4.0, z);
        let n = (c.runs * c.horizon) as f64;
        let rate = mc.saturation_rate.unwrap();
        assert!(
            (rate - beta).abs() < 3.0 * (beta * (1.0 - beta) / n).sqrt() + 0.1 * beta,
            "{rate} vs {beta}"
        );
    }

    #[test]
    fn iid_geometric_mean() {
        let s = iid_escape_time(2.575829, 1.0, 5000, 20_000, 1);
        let mean = s.censored_mean_escape.unwrap();
        assert!((mean - 100.0).abs() < 5.0, "{mean}");
        assert_eq!(s.censored_fraction, Some(0.0));
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = cfg(StrategyKind::I, 1.0, 5.0).with_runs(10, 0);
        assert!(empirical_escape_time(&c).is_err());
        c.runs = 1;
        c.initial_state = Some(vec![0.0, 1.0]);
        assert!(run_closed_loop(&c, 0).is_err());
        assert!(empirical_cost(&c.clone().with_runs(10, 1)).is_err());
    }
}
