//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits with status 0 so the remaining test targets still run; set
//! `ACCEPTANCE_STRICT=1` to exit nonzero when a criterion fails.

use std::time::Instant;

use lqg_coding::codec::{decode_ii, decode_iii, encode_ii, encode_iii, StrategyConfig, StrategyKind};
use lqg_coding::experiment::{self, BitSetting, ExperimentConfig};
use lqg_coding::filters::{kf_step_i, kf_step_ii_vec, kf_step_iii_vec, steady_state, FilterState, Parity};
use lqg_coding::performance::compute_performance;
use lqg_coding::plant::{lqr_gain, CostWeights, PlantModel};
use lqg_coding::quantizer::{dithered_quantize, DitherStream, QuantizerSpec};
use lqg_coding::simulator::{empirical_cost, empirical_escape_time, iid_escape_time, SimConfig};
use lqg_coding::{stats, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(Rc, A−BK, ζ, τ_emp, J_I, J_II)` reference values.
type Row = (f64, &'static str, f64, f64, f64, f64);

const THREE_BIT: [Row; 7] = [
    (1e5, "0.9968", 43.14, 2320.0, 325.0, 309.0),
    (1e4, "0.9900", 24.67, 2194.0, 104.0, 101.0),
    (1e3, "0.9689", 14.50, 1813.0, 34.136, 34.135),
    (100.0, "0.9049", 9.15, 1317.0, 11.81, 12.43),
    (10.0, "0.7298", 6.62, 1040.0, 4.78, 5.56),
    (1.0, "0.3819", 5.68, 990.0, 2.64, 3.45),
    (0.1, "0.0839", 5.49, 977.0, 2.10, 2.92),
];

const TWO_BIT: [Row; 7] = [
    (1e5, "0.9968", 48.14, 2354.0, 474.0, 315.0),
    (1e4, "0.9900", 27.74, 2159.0, 137.0, 103.0),
    (1e3, "0.9689", 16.44, 1780.0, 42.22, 35.04),
    (100.0, "0.9049", 10.43, 1413.0, 14.34, 12.97),
    (10.0, "0.7298", 7.54, 1213.0, 5.94, 5.91),
    (1.0, "0.3819", 6.40, 1164.0, 3.43, 3.73),
    (0.1, "0.0839", 6.12, 1146.0, 2.81, 3.18),
];

fn plant() -> PlantModel {
    PlantModel::scalar(0.9999, 1.0, 1.0, 1.0, 1.0)
}

fn config() -> ExperimentConfig {
    let text = include_str!("../../../configs/scalar_reference.json");
    serde_json::from_str(text).expect("bundled config parses")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

struct Report {
    failed: Vec<u8>,
}

impl Report {
    fn line(&mut self, id: u8, pass: bool, detail: String) {
        println!("criterion {id}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id);
        }
    }
}

fn table_reproduction(r: &mut Report) {
    let start = Instant::now();
    let cfg = config();
    let rows = experiment::table_rows(&cfg, false).expect("table config valid");
    let secs = start.elapsed().as_secs_f64();
    let mut misses = Vec::new();
    let (mut closed_ok, mut zeta_ok, mut tau_ok, mut j_ok, mut total) = (0, 0, 0, 0, 0);
    for (bits, rc, row) in rows {
        let reference = if bits.bits == 3 { &THREE_BIT } else { &TWO_BIT };
        let &(_, closed, zeta, _, j1, j2) = reference.iter().find(|r| r.0 == rc).expect("row in reference");
        total += 1;
        let Ok(row) = row else {
            misses.push(format!("{}b Rc={rc}: error", bits.bits));
            continue;
        };
        let c = format!("{:.4}", row.closed_loop) == closed;
        let z = rel(row.zeta, zeta) <= 0.01;
        let t = (row.tau_a - 1000.0).abs() <= 1e-9 * 1000.0;
        let ji = row.cost(StrategyKind::I).unwrap();
        let jii = row.cost(StrategyKind::II).unwrap();
        let j = rel(ji, j1) <= 0.01 && rel(jii, j2) <= 0.01;
        closed_ok += c as usize;
        zeta_ok += z as usize;
        tau_ok += t as usize;
        j_ok += j as usize;
        if !z {
            misses.push(format!(
                "{}b Rc={rc}: zeta {:.3} vs {zeta} ({:+.1}%)",
                bits.bits,
                row.zeta,
                100.0 * (row.zeta / zeta - 1.0)
            ));
        }
        if !j {
            misses.push(format!(
                "{}b Rc={rc}: J_I {ji:.3} vs {j1}, J_II {jii:.3} vs {j2}",
                bits.bits
            ));
        }
    }
    let pass = closed_ok == total && zeta_ok == total && tau_ok == total && j_ok == total && secs < 60.0;
    r.line(
        1,
        pass,
        format!(
            "A-BK {closed_ok}/{total}, zeta {zeta_ok}/{total}, tau_a {tau_ok}/{total}, J {j_ok}/{total}, {secs:.2}s; {}",
            misses.join("; ")
        ),
    );
}

fn escape_config(rc: f64, zeta: f64, runs: usize) -> SimConfig {
    SimConfig::design(
        &plant(),
        &CostWeights::scalar(1.0, rc),
        StrategyConfig::new(StrategyKind::I, 3, zeta),
    )
    .unwrap()
    .with_runs(5000, runs)
    .with_seed(20_000)
}

fn empirical_escape(r: &mut Report) {
    let start = Instant::now();
    let cases = [(1.0, 5.68, 990.0, 0.10), (1e5, 43.14, 2320.0, 0.15)];
    let mut pass = true;
    let mut detail = Vec::new();
    for (runs, loose) in [(20_000, false), (2_000, true)] {
        for (rc, zeta, target, tol) in cases {
            let tol = if loose { 0.20 } else { tol };
            let s = empirical_escape_time(&escape_config(rc, zeta, runs)).unwrap();
            let tau = s.empirical_mean_escape.unwrap_or(f64::NAN);
            let ok = rel(tau, target) <= tol;
            pass &= ok;
            detail.push(format!(
                "{runs} runs Rc={rc}: tau_emp {tau:.0} vs {target} (tol {:.0}%, {}), censored mean {:.0}, censored fraction {:.3}",
                tol * 100.0,
                if ok { "ok" } else { "miss" },
                s.censored_mean_escape.unwrap(),
                s.censored_fraction.unwrap()
            ));
        }
    }
    detail.push(format!("{:.1}s", start.elapsed().as_secs_f64()));
    r.line(2, pass, detail.join("; "));
}

const COST_STEPS: usize = 1_000_000;
const COST_RUNS: usize = 12;

fn analytic_vs_empirical_cost(r: &mut Report) {
    let start = Instant::now();
    let (mut ok, mut total, mut worst) = (0, 0, (0.0f64, String::new()));
    let mut misses = Vec::new();
    for (bits, rows) in [(3, &THREE_BIT), (2, &TWO_BIT)] {
        for &(rc, _, zeta, ..) in rows.iter() {
            for strategy in [
                StrategyConfig::new(StrategyKind::I, bits, zeta),
                StrategyConfig::new(StrategyKind::II, bits, zeta),
                StrategyConfig::strategy_iii(bits, 1, zeta),
            ] {
                let weights = CostWeights::scalar(1.0, rc);
                let sim = SimConfig::design(&plant(), &weights, strategy)
                    .unwrap()
                    .with_runs(COST_STEPS, COST_RUNS)
                    .with_seed(0xC057 + total as u64 * 1000)
                    .with_saturation(false);
                let j = compute_performance(&sim.plant, &weights, &sim.k, &strategy, &sim.gains)
                    .unwrap()
                    .cost;
                let mc = empirical_cost(&sim).unwrap();
                let e = mc.empirical_cost.unwrap();
                let d = rel(e, j);
                total += 1;
                let label = format!(
                    "{bits}b Rc={rc} {}: {e:.4} vs {j:.4} (se {:.4})",
                    strategy.kind,
                    mc.cost_std_error.unwrap()
                );
                if d <= 0.02 {
                    ok += 1;
                } else {
                    misses.push(label.clone());
                }
                if d > worst.0 {
                    worst = (d, label);
                }
            }
        }
    }
    r.line(
        3,
        ok == total,
        format!(
            "{ok}/{total} within 2% ({COST_RUNS} runs x {COST_STEPS} steps, saturation off); worst {:.2}% at {}; {}; {:.1}s",
            worst.0 * 100.0,
            worst.1,
            misses.join("; "),
            start.elapsed().as_secs_f64()
        ),
    );
}

fn dither_law(r: &mut Report) {
    const N: usize = 100_000;
    let spec = QuantizerSpec::new(3, 1.0).unwrap();
    let mut dither = DitherStream::new(spec.step(), 4, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut x = 0.0;
    let (mut input, mut err) = (Vec::with_capacity(N), Vec::with_capacity(N));
    for _ in 0..N {
        // Strongly correlated input kept inside the range.
        x = (0.95 * x + 0.1 * (rng.random::<f64>() - 0.5)).clamp(-0.8, 0.8);
        let (v, sat) = dithered_quantize(&spec, x, dither.next_dither());
        assert!(!sat);
        input.push(x);
        err.push(v - x);
    }
    let half = spec.step() / 2.0;
    let var = spec.error_variance();
    let ks = stats::ks_uniform(&err, -half, half);
    let ks_ok = ks < stats::ks_critical_1pct(N);
    let mean = stats::mean(&err);
    let mean_ok = mean.abs() <= 4.0 * (var / N as f64).sqrt();
    let v = stats::variance(&err);
    let var_ok = rel(v, var) <= 0.02;
    let band = 3.0 / (N as f64).sqrt();
    let acf: Vec<f64> = (1..=10).map(|l| stats::autocorrelation(&err, l)).collect();
    let white_ok = acf.iter().all(|a| a.abs() <= band);
    let corr = stats::correlation(&err, &input);
    let indep_ok = corr.abs() <= band;
    r.line(
        4,
        ks_ok && mean_ok && var_ok && white_ok && indep_ok,
        format!(
            "KS {ks:.5} (crit {:.5}), mean {mean:.2e}, variance ratio {:.4}, max |acf| {:.4} (band {band:.4}), corr {corr:.4}",
            stats::ks_critical_1pct(N),
            v / var,
            acf.iter().fold(0.0f64, |m, a| m.max(a.abs()))
        ),
    );
}

fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).max_abs()
}

fn steady_state_consistency(r: &mut Report) {
    const STEPS: usize = 10_000;
    let plant = plant();
    let k = lqr_gain(&plant, &CostWeights::scalar(1.0, 1.0)).unwrap().k;
    let mut diffs = Vec::new();

    let cfg = StrategyConfig::new(StrategyKind::I, 3, 5.68);
    let g = steady_state(&plant, &cfg).unwrap();
    let mut st = FilterState::initial(&plant);
    for _ in 0..STEPS {
        st = kf_step_i(&st, &[0.0], &plant, &k, cfg.noise_levels().even).unwrap();
    }
    diffs.push(("I", max_diff(&st.sigma_pred, &g.sigma_pred)));

    let cfg = StrategyConfig::new(StrategyKind::II, 3, 5.68);
    let s = cfg.noise_levels();
    let g = steady_state(&plant, &cfg).unwrap();
    let mut st = FilterState::initial(&plant);
    for t in 0..2 * STEPS {
        st = kf_step_ii_vec(
            &st,
            Parity::of(t as u64),
            &[0.0],
            &plant,
            &k,
            s.even,
            s.refined.unwrap(),
        )
        .unwrap();
    }
    diffs.push(("II", max_diff(&st.sigma_pred, &g.sigma_pred)));

    let cfg = StrategyConfig::strategy_iii(3, 1, 5.68);
    let s = cfg.noise_levels();
    let g = steady_state(&plant, &cfg).unwrap();
    let mut st = FilterState::initial(&plant);
    for t in 0..2 * STEPS {
        let phase = Parity::of(t as u64);
        let prime = (phase == Parity::Odd).then_some(&[0.0][..]);
        st = kf_step_iii_vec(&st, phase, &[0.0], prime, &plant, &k, &s).unwrap();
    }
    diffs.push(("III", max_diff(&st.sigma_pred, &g.sigma_pred)));
    diffs.push((
        "III mid",
        max_diff(st.sigma_prime.as_ref().unwrap(), g.sigma_pred_odd.as_ref().unwrap()),
    ));

    let pass = diffs.iter().all(|(_, d)| *d <= 1e-8);
    let detail: Vec<String> = diffs.iter().map(|(n, d)| format!("{n} {d:.2e}")).collect();
    r.line(
        5,
        pass,
        format!("max |recursion - limit| after {STEPS} steps: {}", detail.join(", ")),
    );
}

fn geometric_law(r: &mut Report) {
    const RUNS: usize = 100_000;
    let mut pass = true;
    let mut detail = Vec::new();
    for beta in [0.01, 0.001] {
        let zeta = -lqg_coding::linalg::inverse_normal_cdf(beta / 2.0).unwrap();
        let horizon = (50.0 / beta) as usize;
        let s = iid_escape_time(zeta, 1.0, horizon, RUNS, 0x6E0);
        let mean = s.censored_mean_escape.unwrap();
        let ok = rel(mean, 1.0 / beta) <= 0.05 && s.censored_fraction == Some(0.0);
        pass &= ok;
        detail.push(format!("beta {beta}: mean {mean:.2} vs {}", 1.0 / beta));
    }
    r.line(6, pass, detail.join(", "));
}

fn codec_identities(r: &mut Report) {
    let mut checked = 0usize;
    let mut bad = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (bits, split) in [(1, None), (2, Some(1)), (3, Some(1)), (3, Some(2)), (4, Some(3))] {
        let zeta = 1.7;
        let two = StrategyConfig::new(StrategyKind::II, bits, zeta);
        let fine_ii = QuantizerSpec::new(2 * bits, zeta).unwrap();
        let three = split.map(|r| StrategyConfig::strategy_iii(bits, r, zeta));
        let fine_iii = split.map(|r| QuantizerSpec::new(bits + r, zeta).unwrap());
        let mut check = |y: f64, d: f64, d_odd: f64, y_odd: f64| {
            let (e, o) = encode_ii(&two, 0, y, d);
            let (_, p_odd) = decode_ii(&two, &e.msg, &o.msg, d).unwrap();
            checked += 1;
            bad += (p_odd != dithered_quantize(&fine_ii, y, d).0) as usize;
            if let (Some(c), Some(spec)) = (&three, &fine_iii) {
                let (e, o) = encode_iii(c, 0, y, y_odd, d, d_odd);
                let (_, p_prime, _) = decode_iii(c, &e.msg, &o.msg, d, d_odd).unwrap();
                checked += 1;
                bad += (p_prime != dithered_quantize(spec, y, d).0) as usize;
            }
        };
        // Every reconstruction level of the finer grid, undithered.
        for i in 0..fine_ii.levels() {
            let y = -zeta + fine_ii.step() * (i as f64 + 0.5);
            check(y, 0.0, 0.0, 0.0);
        }
        if let Some(spec) = fine_iii {
            for i in 0..spec.levels() {
                check(-zeta + spec.step() * (i as f64 + 0.5), 0.0, 0.0, 0.0);
            }
        }
        for _ in 0..10_000 {
            let y = rng.random_range(-zeta..zeta) * 0.9;
            let d = fine_ii.step() * (rng.random::<f64>() - 0.5);
            let d_odd = 0.01 * (rng.random::<f64>() - 0.5);
            check(y, d, d_odd, rng.random_range(-1.0..1.0));
        }
    }
    r.line(
        7,
        bad == 0,
        format!("{checked} reconstructions compared, {bad} mismatches"),
    );
}

fn trace_autocorrelation(rc: f64) -> f64 {
    let mut cfg = config();
    cfg.weights.rc = vec![rc];
    cfg.bit_settings = vec![BitSetting { bits: 3, split: None }];
    let trace = experiment::trace(&cfg, StrategyKind::I).unwrap();
    stats::autocorrelation(&trace.output(), 1)
}

fn qualitative_claims(r: &mut Report) {
    let rows = experiment::table_rows(&config(), false).unwrap();
    let mut misses = Vec::new();
    for (bits, rc, row) in &rows {
        let row = row.as_ref().unwrap();
        let (j1, j2) = (row.cost(StrategyKind::I).unwrap(), row.cost(StrategyKind::II).unwrap());
        if bits.bits == 2 && *rc >= 10.0 && j2 >= j1 {
            misses.push(format!("2b Rc={rc}: J_II {j2:.3} >= J_I {j1:.3}"));
        }
        if bits.bits == 3 && *rc <= 1.0 && j1 >= j2 {
            misses.push(format!("3b Rc={rc}: J_I {j1:.3} >= J_II {j2:.3}"));
        }
    }
    let white = trace_autocorrelation(0.01);
    let colored = trace_autocorrelation(100.0);
    if white.abs() >= 0.1 {
        misses.push(format!("lag-1 at Rc=0.01 is {white:.3}"));
    }
    if colored <= 0.8 {
        misses.push(format!("lag-1 at Rc=100 is {colored:.3}"));
    }
    r.line(
        8,
        misses.is_empty(),
        format!(
            "lag-1 autocorrelation {white:.3} (Rc=0.01), {colored:.3} (Rc=100); {}",
            misses.join("; ")
        ),
    );
}

fn main() {
    // Respect the libtest filter convention: run everything unless a
    // non-flag argument names a criterion number.
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |id: u8| only.is_empty() || only.contains(&id);
    let mut report = Report { failed: Vec::new() };
    type Criterion = (u8, fn(&mut Report));
    let criteria: [Criterion; 8] = [
        (1, table_reproduction),
        (2, empirical_escape),
        (3, analytic_vs_empirical_cost),
        (4, dither_law),
        (5, steady_state_consistency),
        (6, geometric_law),
        (7, codec_identities),
        (8, qualitative_claims),
    ];
    for (id, f) in criteria {
        if want(id) {
            f(&mut report);
        }
    }
    println!("acceptance: {} failed {:?}", report.failed.len(), report.failed);
    if !report.failed.is_empty() && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
