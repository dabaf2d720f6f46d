//! Config-driven experiment pipeline: design, bound search, cost tables,
//! Monte Carlo and traces.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::codec::{StrategyConfig, StrategyKind};
use crate::error::{Error, Result};
use crate::escape::{escape_probability, expected_escape_time, solve_zeta, EscapeQuery, EscapeTarget};
use crate::filters::steady_state;
use crate::linalg::{spectral_radius, Matrix};
use crate::performance::{compute_performance, output_variance};
use crate::plant::{all_passed, lqr_gain, validate_model, CostWeights, Finding, PlantModel};
use crate::simulator::{empirical_cost, empirical_escape_time, run_closed_loop, SimConfig, SimTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub q: Matrix,
    pub r: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub qc: Matrix,
    /// Control weights; each entry `ρ` gives `Rc = ρ·I`.
    pub rc: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitSetting {
    pub bits: u32,
    #[serde(default)]
    pub split: Option<u32>,
}

/// One bound for every row, or one per control weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundSpec {
    Single(f64),
    PerRow(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub saturation: bool,
    /// Horizon of the single run used for cost estimates.
    #[serde(default = "default_cost_horizon")]
    pub cost_horizon: usize,
    #[serde(default = "default_cost_runs")]
    pub cost_runs: usize,
}

fn default_horizon() -> usize {
    5000
}
fn default_runs() -> usize {
    20_000
}
fn default_cost_horizon() -> usize {
    1_000_000
}
fn default_cost_runs() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_strategies() -> Vec<StrategyKind> {
    vec![StrategyKind::I, StrategyKind::II]
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            runs: default_runs(),
            seed: 0,
            saturation: true,
            cost_horizon: default_cost_horizon(),
            cost_runs: default_cost_runs(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub design: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub escape: Option<PathBuf>,
    pub simulate: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantSpec,
    pub weights: WeightSpec,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    /// Strategy whose escape analysis fixes the table's bound.
    #[serde(default)]
    pub bound_strategy: Option<StrategyKind>,
    pub bit_settings: Vec<BitSetting>,
    #[serde(default)]
    pub target_mean_escape: Option<f64>,
    #[serde(default)]
    pub zeta: Option<BoundSpec>,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

/// Header and rows of a CSV table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub failures: usize,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }
}

/// Six significant digits, plain decimal where reasonable.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float");
    let s = rounded.to_string();
    if s.len() > 14 {
        format!("{rounded:.5e}")
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

fn fmt_matrix(m: &Matrix) -> String {
    m.as_slice().iter().map(|&v| fmt_sig(v)).collect::<Vec<_>>().join(";")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.plant_model()?;
        let n = self.plant.a.rows();
        if self.weights.qc.shape() != (n, n) {
            return Err(Error::Config(format!("qc must be {n}x{n}")));
        }
        if let Some(rc) = self.weights.rc.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::Config(format!("control weight {rc} must be positive")));
        }
        match (&self.target_mean_escape, &self.zeta) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::Config("give exactly one of target_mean_escape and zeta".into()))
            }
            (Some(tau), None) => {
                EscapeTarget::MeanEscape(*tau).beta()?;
            }
            (None, Some(BoundSpec::Single(z))) => check_bound(*z)?,
            (None, Some(BoundSpec::PerRow(zs))) => {
                if zs.len() != self.weights.rc.len() {
                    return Err(Error::Config("zeta list must match the rc list".into()));
                }
                zs.iter().try_for_each(|z| check_bound(*z))?;
            }
        }
        if self.bit_settings.is_empty() {
            return Err(Error::Config("at least one bit setting is required".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        for bs in &self.bit_settings {
            for kind in self.strategies.iter().chain(self.bound_strategy.iter()) {
                if *kind == StrategyKind::III && bs.split.is_none() {
                    continue;
                }
                self.strategy(*kind, bs, 1.0).validate()?;
            }
        }
        if self.simulation.runs == 0 {
            return Err(Error::Config("simulation.runs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn plant_model(&self) -> Result<PlantModel> {
        let p = &self.plant;
        PlantModel::new(p.a.clone(), p.b.clone(), p.c.clone(), p.q.clone(), p.r.clone())
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn weights_for(&self, rc: f64) -> CostWeights {
        CostWeights {
            qc: self.weights.qc.clone(),
            rc: Matrix::identity(self.plant.b.cols()).scale(rc),
        }
    }

    pub fn strategy(&self, kind: StrategyKind, bits: &BitSetting, bound: f64) -> StrategyConfig {
        match kind {
            StrategyKind::III => StrategyConfig::strategy_iii(bits.bits, bits.split.unwrap_or(0), bound),
            k => StrategyConfig::new(k, bits.bits, bound),
        }
    }

    /// Strategies evaluated for `bits`; Strategy III needs a split.
    pub fn strategies_for(&self, bits: &BitSetting) -> Vec<StrategyKind> {
        self.strategies
            .iter()
            .copied()
            .filter(|k| *k != StrategyKind::III || bits.split.is_some())
            .collect()
    }

    pub fn bound_strategy(&self) -> StrategyKind {
        self.bound_strategy.unwrap_or(StrategyKind::I)
    }

    /// Quantizer bound for row `row`: given explicitly or solved for the
    /// target escape time.
    pub fn bound(&self, kind: StrategyKind, bits: &BitSetting, row: usize) -> Result<f64> {
        match (&self.zeta, self.target_mean_escape) {
            (Some(BoundSpec::Single(z)), _) => Ok(*z),
            (Some(BoundSpec::PerRow(zs)), _) => Ok(zs[row]),
            (None, Some(tau)) => {
                let plant = self.plant_model()?;
                let weights = self.weights_for(self.weights.rc[row]);
                let sol = solve_zeta(&EscapeQuery {
                    target: EscapeTarget::MeanEscape(tau),
                    strategy: self.strategy(kind, bits, 1.0),
                    plant: &plant,
                    weights: &weights,
                })?;
                if !sol.converged {
                    return Err(Error::NonConvergence {
                        iterations: sol.iterations,
                        last_step: f64::NAN,
                    });
                }
                Ok(sol.zeta)
            }
            (None, None) => Err(Error::Config("no bound or escape target".into())),
        }
    }

    pub fn sim_config(&self, kind: StrategyKind, bits: &BitSetting, rc: f64, bound: f64) -> Result<SimConfig> {
        let s = &self.simulation;
        Ok(SimConfig::design(
            &self.plant_model()?,
            &self.weights_for(rc),
            self.strategy(kind, bits, bound),
        )?
        .with_runs(s.horizon, s.runs)
        .with_seed(s.seed)
        .with_saturation(s.saturation))
    }
}

fn check_bound(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("quantizer bound {z} must be positive")))
    }
}

fn closed_loop_summary(m: &Matrix) -> f64 {
    if m.shape() == (1, 1) {
        m[(0, 0)]
    } else {
        spectral_radius(m)
    }
}

/// Model checks for one control weight.
pub type WeightFindings = (f64, Vec<Finding>);

/// Controller gain, closed loop and model checks for each control weight.
pub fn design(cfg: &ExperimentConfig) -> Result<(Table, Vec<WeightFindings>)> {
    cfg.validate()?;
    let plant = cfg.plant_model()?;
    let mut table = Table::new(&["rc", "k", "a_minus_bk", "closed_loop", "valid"]);
    let mut findings = Vec::new();
    for &rc in &cfg.weights.rc {
        let weights = cfg.weights_for(rc);
        let f = validate_model(&plant, &weights);
        let ok = all_passed(&f);
        findings.push((rc, f));
        if !ok {
            table.failures += 1;
            table.rows.push(vec![
                fmt_sig(rc),
                String::new(),
                String::new(),
                String::new(),
                "false".into(),
            ]);
            continue;
        }
        let gain = lqr_gain(&plant, &weights)?;
        table.rows.push(vec![
            fmt_sig(rc),
            fmt_matrix(&gain.k),
            fmt_matrix(&gain.closed_loop),
            fmt_sig(closed_loop_summary(&gain.closed_loop)),
            "true".into(),
        ]);
    }
    Ok((table, findings))
}

/// Analytic columns of one table row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub bits: u32,
    pub split: Option<u32>,
    pub rc: f64,
    pub closed_loop: f64,
    pub zeta: f64,
    pub tau_a: f64,
    pub tau_emp: Option<f64>,
    pub tau_censored: Option<f64>,
    pub censored_fraction: Option<f64>,
    pub costs: Vec<(StrategyKind, f64)>,
}

impl TableRow {
    pub fn cost(&self, kind: StrategyKind) -> Option<f64> {
        self.costs.iter().find(|(k, _)| *k == kind).map(|(_, j)| *j)
    }
}

fn table_row(
    cfg: &ExperimentConfig,
    plant: &PlantModel,
    bits: &BitSetting,
    row: usize,
    simulate: bool,
) -> Result<TableRow> {
    let rc = cfg.weights.rc[row];
    let weights = cfg.weights_for(rc);
    let gain = lqr_gain(plant, &weights)?;
    let kind = cfg.bound_strategy();
    let zeta = cfg.bound(kind, bits, row)?;
    let bound_cfg = cfg.strategy(kind, bits, zeta);
    let report = compute_performance(plant, &weights, &gain.k, &bound_cfg, &steady_state(plant, &bound_cfg)?)?;
    let tau_a = expected_escape_time(escape_probability(zeta, output_variance(&report, plant, &bound_cfg)))?;
    let mut costs = Vec::new();
    for kind in cfg.strategies_for(bits) {
        let s = cfg.strategy(kind, bits, zeta);
        let rep = compute_performance(plant, &weights, &gain.k, &s, &steady_state(plant, &s)?)?;
        costs.push((kind, rep.cost));
    }
    let mut out = TableRow {
        bits: bits.bits,
        split: bits.split,
        rc,
        closed_loop: closed_loop_summary(&gain.closed_loop),
        zeta,
        tau_a,
        tau_emp: None,
        tau_censored: None,
        censored_fraction: None,
        costs,
    };
    if simulate {
        let mc = empirical_escape_time(&cfg.sim_config(kind, bits, rc, zeta)?)?;
        out.tau_emp = mc.empirical_mean_escape;
        out.tau_censored = mc.censored_mean_escape;
        out.censored_fraction = mc.censored_fraction;
    }
    Ok(out)
}

/// Rows for every bit setting and control weight; failed rows carry the
/// error.
pub fn table_rows(cfg: &ExperimentConfig, simulate: bool) -> Result<Vec<(BitSetting, f64, Result<TableRow>)>> {
    cfg.validate()?;
    let plant = cfg.plant_model()?;
    let mut out = Vec::new();
    for bits in &cfg.bit_settings {
        for (row, &rc) in cfg.weights.rc.iter().enumerate() {
            out.push((*bits, rc, table_row(cfg, &plant, bits, row, simulate)));
        }
    }
    Ok(out)
}

pub fn table(cfg: &ExperimentConfig, simulate: bool) -> Result<Table> {
    let rows = table_rows(cfg, simulate)?;
    let mut header = vec!["bits", "split", "rc", "a_minus_bk", "zeta", "tau_a"];
    if simulate {
        header.extend(["tau_emp", "tau_censored", "censored_fraction"]);
    }
    let kinds = [StrategyKind::I, StrategyKind::II, StrategyKind::III];
    let cols: Vec<StrategyKind> = kinds
        .into_iter()
        .filter(|k| cfg.bit_settings.iter().any(|b| cfg.strategies_for(b).contains(k)))
        .collect();
    let names: Vec<String> = cols
        .iter()
        .map(|k| format!("j_{}", k.to_string().to_lowercase()))
        .collect();
    header.extend(names.iter().map(String::as_str));
    header.push("error");
    let mut t = Table::new(&header);
    for (bits, rc, row) in rows {
        let mut rec = vec![
            bits.bits.to_string(),
            bits.split.map(|s| s.to_string()).unwrap_or_default(),
            fmt_sig(rc),
        ];
        match row {
            Ok(r) => {
                rec.extend([fmt_sig(r.closed_loop), fmt_sig(r.zeta), fmt_sig(r.tau_a)]);
                if simulate {
                    rec.extend([
                        fmt_opt(r.tau_emp),
                        fmt_opt(r.tau_censored),
                        fmt_opt(r.censored_fraction),
                    ]);
                }
                rec.extend(cols.iter().map(|k| fmt_opt(r.cost(*k))));
                rec.push(String::new());
            }
            Err(e) => {
                t.failures += 1;
                rec.resize(t.header.len() - 1, String::new());
                rec.push(e.to_string());
            }
        }
        t.rows.push(rec);
    }
    Ok(t)
}

/// Per-strategy bound search.
pub fn escape(cfg: &ExperimentConfig, only: Option<StrategyKind>) -> Result<Table> {
    cfg.validate()?;
    let plant = cfg.plant_model()?;
    let tau = cfg
        .target_mean_escape
        .ok_or_else(|| Error::Config("escape needs target_mean_escape".into()))?;
    let mut t = Table::new(&[
        "bits",
        "split",
        "rc",
        "strategy",
        "zeta",
        "beta",
        "tau_a",
        "z",
        "iterations",
        "converged",
        "ergodic_radius",
        "error",
    ]);
    for bits in &cfg.bit_settings {
        for &rc in &cfg.weights.rc {
            let weights = cfg.weights_for(rc);
            for kind in cfg
                .strategies_for(bits)
                .into_iter()
                .filter(|k| only.is_none_or(|o| o == *k))
            {
                let mut rec = vec![
                    bits.bits.to_string(),
                    bits.split.map(|s| s.to_string()).unwrap_or_default(),
                    fmt_sig(rc),
                    kind.to_string(),
                ];
                let res = (|| -> Result<Vec<String>> {
                    let sol = solve_zeta(&EscapeQuery {
                        target: EscapeTarget::MeanEscape(tau),
                        strategy: cfg.strategy(kind, bits, 1.0),
                        plant: &plant,
                        weights: &weights,
                    })?;
                    let k = lqr_gain(&plant, &weights)?.k;
                    let s = cfg.strategy(kind, bits, sol.zeta);
                    let gains = steady_state(&plant, &s)?;
                    let erg = crate::escape::check_ergodicity(&plant, &k, gains.gains.primary())?;
                    Ok(vec![
                        fmt_sig(sol.zeta),
                        fmt_sig(sol.beta),
                        fmt_sig(sol.tau_analytic),
                        fmt_sig(sol.z),
                        sol.iterations.to_string(),
                        sol.converged.to_string(),
                        fmt_sig(erg.radius),
                        String::new(),
                    ])
                })();
                match res {
                    Ok(v) => rec.extend(v),
                    Err(e) => {
                        t.failures += 1;
                        rec.resize(t.header.len() - 1, String::new());
                        rec.push(e.to_string());
                    }
                }
                t.rows.push(rec);
            }
        }
    }
    Ok(t)
}

/// Monte Carlo escape time and cost next to the analytic cost.
pub fn simulate(cfg: &ExperimentConfig, only: Option<StrategyKind>) -> Result<Table> {
    cfg.validate()?;
    let plant = cfg.plant_model()?;
    let mut t = Table::new(&[
        "bits",
        "split",
        "rc",
        "strategy",
        "zeta",
        "runs",
        "horizon",
        "tau_emp",
        "tau_censored",
        "censored_fraction",
        "j_emp",
        "j_emp_se",
        "j_analytic",
        "saturation_rate",
        "error",
    ]);
    for bits in &cfg.bit_settings {
        for (row, &rc) in cfg.weights.rc.iter().enumerate() {
            for kind in cfg
                .strategies_for(bits)
                .into_iter()
                .filter(|k| only.is_none_or(|o| o == *k))
            {
                let mut rec = vec![
                    bits.bits.to_string(),
                    bits.split.map(|s| s.to_string()).unwrap_or_default(),
                    fmt_sig(rc),
                    kind.to_string(),
                ];
                let res = (|| -> Result<Vec<String>> {
                    let zeta = cfg.bound(kind, bits, row)?;
                    let sim = cfg.sim_config(kind, bits, rc, zeta)?;
                    let esc = empirical_escape_time(&sim)?;
                    let s = &cfg.simulation;
                    let cost = empirical_cost(&sim.clone().with_runs(s.cost_horizon, s.cost_runs))?;
                    let j = compute_performance(&plant, &sim.weights, &sim.k, &sim.strategy, &sim.gains)?.cost;
                    Ok(vec![
                        fmt_sig(zeta),
                        s.runs.to_string(),
                        s.horizon.to_string(),
                        fmt_opt(esc.empirical_mean_escape),
                        fmt_opt(esc.censored_mean_escape),
                        fmt_opt(esc.censored_fraction),
                        fmt_opt(cost.empirical_cost),
                        fmt_opt(cost.cost_std_error),
                        fmt_sig(j),
                        fmt_opt(cost.saturation_rate),
                        String::new(),
                    ])
                })();
                match res {
                    Ok(v) => rec.extend(v),
                    Err(e) => {
                        t.failures += 1;
                        rec.resize(t.header.len() - 1, String::new());
                        rec.push(e.to_string());
                    }
                }
                t.rows.push(rec);
            }
        }
    }
    Ok(t)
}

/// Single-run trace for the first control weight and bit setting.
pub fn trace(cfg: &ExperimentConfig, kind: StrategyKind) -> Result<SimTrace> {
    cfg.validate()?;
    let bits = cfg.bit_settings[0];
    let rc = *cfg
        .weights
        .rc
        .first()
        .ok_or_else(|| Error::Config("trace needs a control weight".into()))?;
    if kind == StrategyKind::III && bits.split.is_none() {
        return Err(Error::Config("strategy III needs a split".into()));
    }
    let zeta = cfg.bound(kind, &bits, 0)?;
    let sim = cfg.sim_config(kind, &bits, rc, zeta)?;
    if sim.horizon == 0 {
        return Ok(SimTrace::default());
    }
    run_closed_loop(&sim, 0)
}

pub fn trace_table(trace: &SimTrace) -> Table {
    let mut t = Table::new(&["t", "y", "z", "u", "x_hat", "saturated", "escaped"]);
    let sat: std::collections::HashSet<usize> = trace.saturation_events.iter().copied().collect();
    for i in 0..trace.len() {
        t.rows.push(vec![
            i.to_string(),
            fmt_sig(trace.y[i][0]),
            fmt_sig(trace.z[i][0]),
            fmt_sig(trace.u[i][0]),
            fmt_sig(trace.x_hat[i][0]),
            u8::from(sat.contains(&i)).to_string(),
            u8::from(trace.first_escape == Some(i)).to_string(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::scalar(v)
    }

    fn reference_config() -> ExperimentConfig {
        ExperimentConfig {
            plant: PlantSpec {
                a: scalar(0.9999),
                b: scalar(1.0),
                c: scalar(1.0),
                q: scalar(1.0),
                r: scalar(1.0),
            },
            weights: WeightSpec {
                qc: scalar(1.0),
                rc: vec![10.0, 1e4],
            },
            strategies: default_strategies(),
            bound_strategy: None,
            bit_settings: vec![BitSetting { bits: 3, split: None }],
            target_mean_escape: Some(1000.0),
            zeta: None,
            simulation: SimulationSpec::default(),
            outputs: OutputSpec::default(),
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(14.501234), "14.5012");
        assert_eq!(fmt_sig(100000.0), "100000");
        assert_eq!(fmt_sig(0.1), "0.1");
        assert_eq!(fmt_sig(1000.0000001), "1000");
        assert_eq!(fmt_sig(1.234567e-9), "1.23457e-9");
    }

    #[test]
    fn exactly_one_bound_source() {
        let mut c = reference_config();
        c.zeta = Some(BoundSpec::Single(5.0));
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.target_mean_escape = None;
        assert!(c.validate().is_ok());
        c.zeta = None;
        assert!(c.validate().is_err());
        c.zeta = Some(BoundSpec::PerRow(vec![1.0]));
        assert!(c.validate().is_err());
    }

    #[test]
    fn design_closed_loop_values() {
        let (t, f) = design(&reference_config()).unwrap();
        assert!(t.rows[0][3].starts_with("0.7298"));
        assert!(t.rows[1][3].starts_with("0.990"));
        assert!(f.iter().all(|(_, f)| all_passed(f)));
    }

    #[test]
    fn table_has_row_per_weight() {
        let t = table(&reference_config(), false).unwrap();
        assert_eq!(
            t.header,
            [
                "bits",
                "split",
                "rc",
                "a_minus_bk",
                "zeta",
                "tau_a",
                "j_i",
                "j_ii",
                "error"
            ]
        );
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0][5], "1000");
        assert_eq!(t.failures, 0);
        let mut empty = reference_config();
        empty.weights.rc.clear();
        assert!(table(&empty, false).unwrap().rows.is_empty());
    }

    #[test]
    fn strategy_three_requires_split() {
        let mut c = reference_config();
        c.strategies = vec![StrategyKind::I, StrategyKind::III];
        assert_eq!(c.strategies_for(&c.bit_settings[0]), [StrategyKind::I]);
        c.bit_settings[0].split = Some(1);
        let t = table(&c, false).unwrap();
        assert_eq!(t.header[7], "j_iii");
    }

    #[test]
    fn trace_zero_horizon_is_empty() {
        let mut c = reference_config();
        c.simulation.horizon = 0;
        assert!(trace(&c, StrategyKind::I).unwrap().is_empty());
        assert_eq!(trace_table(&SimTrace::default()).rows.len(), 0);
    }
}
