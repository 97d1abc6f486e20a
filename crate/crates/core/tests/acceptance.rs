//! Acceptance battery. Prints one line per criterion; exits non-zero if any fails.
//! Pass criterion numbers as arguments to run a subset, e.g. `cargo test --test acceptance -- 1 9`.

mod common;

use std::f64::consts::FRAC_PI_4;
use std::time::Instant;

use linengine::config::{OracleSettings, RunConfig};
use linengine::currents::solve_engine;
use linengine::floquet::check_stability;
use linengine::model::{EngineConfig, OccupationModel};
use linengine::oracle::run_oracle;
use linengine::report::{build_report, work_tolerance, EngineReport};
use linengine::validate::{
    conjugation_error, detailed_balance_error, self_convergence, solve_report, translation_error, REFINEMENT_TOL,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DETAILED_BALANCE_TOL: f64 = 1e-8;
const CONJUGATION_TOL: f64 = 1e-10;
const TRANSLATION_TOL: f64 = 1e-8;
const SPLIT_TOL: f64 = 1e-12;
const RANDOM_CONFIGS: usize = 50;
const SQUEEZED_BOUND_TOL: f64 = 0.02;
const COST_FIT_TOL: f64 = 0.10;
const ORACLE_TOL: f64 = 0.05;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn fast(mut cfg: EngineConfig) -> EngineConfig {
    cfg.numerics.panels = 4;
    cfg.numerics.quad_tol = 1e-7;
    cfg
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

fn criterion_1() -> Outcome {
    let cfg = common::driven_pair(0.25);
    let (err, tuples) = detailed_balance_error(&cfg, &grid(0.02, 30.0, 10), 3).unwrap();
    outcome(err <= DETAILED_BALANCE_TOL && tuples >= 100, format!("max rel {err:.2e} over {tuples} tuples (tol {DETAILED_BALANCE_TOL:.0e})"))
}

fn criterion_2() -> Outcome {
    let cfg = common::driven_pair(0.25);
    let conj = conjugation_error(&cfg, &grid(0.01, cfg.omega_max(), 40)).unwrap();
    let trans = translation_error(&cfg, &grid(0.01, cfg.omega_max(), 12)).unwrap();
    outcome(
        conj <= CONJUGATION_TOL && trans <= TRANSLATION_TOL,
        format!("conjugation {conj:.2e} (tol {CONJUGATION_TOL:.0e}), translation {trans:.2e} (tol {TRANSLATION_TOL:.0e})"),
    )
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    for name in ["single_thermal.toml", "thermal_pair.toml", "squeezed_pair.toml"] {
        let (_, rep) = solve_report(&common::bundled(name)).unwrap();
        let h = &rep.heat;
        worst = worst.max((h.dq_out + h.dq_in - h.dq_r).abs() / (h.dq_out.abs() + h.dq_in.abs()));
    }
    outcome(worst <= SPLIT_TOL, format!("max rel {worst:.2e} on bundled configs (tol {SPLIT_TOL:.0e})"))
}

fn matrix(m: &[Vec<f64>]) -> String {
    let rows: Vec<String> = m
        .iter()
        .map(|r| format!("[{}]", r.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", rows.join(", "))
}

/// Random one- or two-oscillator network with one thermal bath.
fn random_single(rng: &mut ChaCha8Rng) -> EngineConfig {
    let n = rng.gen_range(1..=2);
    let gamma = rng.gen_range(0.02..0.15);
    let lam = rng.gen_range(1.0..5.0);
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let freqs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.6..2.5)).collect();
    let shift = gamma * lam;
    let mut v0 = vec![vec![0.0; n]; n];
    let mut v1 = vec![vec![0.0; n]; n];
    let c = if n == 2 { rng.gen_range(-0.2..0.2) } else { 0.0 };
    for i in 0..n {
        for j in 0..n {
            v0[i][j] = shift * u[i] * u[j] + if i == j { freqs[i] * freqs[i] } else { c };
            v1[i][j] = rng.gen_range(0.0..0.3) * freqs[i.min(j)];
        }
    }
    if n == 2 {
        v1[1][0] = v1[0][1];
    }
    let src = format!(
        r#"
[network]
v0 = {v0}
drive_freq = {wd:?}
fourier = [ {{ m = 1, matrix = {v1} }}, {{ m = -1, matrix = {v1} }} ]
[[reservoirs]]
label = "bath"
projector = [{u}]
profile = {{ gamma = {gamma:?}, cutoff = {lam:?} }}
occupation = {{ kind = "thermal", T = {t:?} }}
"#,
        v0 = matrix(&v0),
        v1 = matrix(&v1),
        wd = rng.gen_range(1.0..4.0),
        u = u.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", "),
        t = rng.gen_range(0.2..3.0),
    );
    fast(RunConfig::from_toml_str(&src).unwrap().engine().unwrap())
}

/// Random two-mode converter between a cold and a hot thermal bath.
fn random_converter(rng: &mut ChaCha8Rng) -> EngineConfig {
    let wc: f64 = rng.gen_range(0.8..1.5);
    let wd: f64 = rng.gen_range(2.0..4.0);
    let wh = wc + wd;
    let gamma = rng.gen_range(0.05..0.15);
    let lam = rng.gen_range(8.0..15.0);
    let eps = rng.gen_range(0.1..0.3);
    let shift = gamma * lam;
    let src = format!(
        r#"
[network]
v0 = [[{a:?}, 0.0], [0.0, {b:?}]]
drive_freq = {wd:?}
fourier = [
  {{ m = 1, matrix = [[0.0, {eps:?}], [{eps:?}, 0.0]] }},
  {{ m = -1, matrix = [[0.0, {eps:?}], [{eps:?}, 0.0]] }},
]
[[reservoirs]]
label = "cold"
projector = [1.0, 0.0]
profile = {{ gamma = {gamma:?}, cutoff = {lam:?} }}
occupation = {{ kind = "thermal", T = {tc:?} }}
[[reservoirs]]
label = "hot"
projector = [0.0, 1.0]
profile = {{ gamma = {gamma:?}, cutoff = {lam:?} }}
occupation = {{ kind = "thermal", T = {th:?} }}
"#,
        a = wc * wc + shift,
        b = wh * wh + shift,
        tc = rng.gen_range(0.1..0.4),
        th = rng.gen_range(2.0..5.0),
    );
    fast(RunConfig::from_toml_str(&src).unwrap().engine().unwrap())
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut done, mut tried, mut worst) = (0, 0, f64::INFINITY);
    let mut failures = 0;
    while done < RANDOM_CONFIGS && tried < 20 * RANDOM_CONFIGS {
        tried += 1;
        let cfg = random_single(&mut rng);
        if !check_stability(&cfg).unwrap().pass {
            continue;
        }
        let Ok((_, rep)) = solve_report(&cfg) else { continue };
        if !rep.convergence.converged() {
            continue;
        }
        done += 1;
        let tol = work_tolerance(&rep.heat, cfg.numerics.quad_tol);
        let scaled = rep.heat.work / tol.max(f64::MIN_POSITIVE);
        worst = worst.min(scaled);
        if rep.heat.work < -tol {
            failures += 1;
        }
    }
    outcome(
        done == RANDOM_CONFIGS && failures == 0,
        format!("{done}/{RANDOM_CONFIGS} stable configs ({tried} drawn), {failures} with W < -eps_quad; min W/eps_quad = {worst:.3e}"),
    )
}

struct ConverterSweep {
    reports: Vec<EngineReport>,
    tried: usize,
}

fn converter_sweep() -> ConverterSweep {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut reports = Vec::new();
    let mut tried = 0;
    while reports.len() < RANDOM_CONFIGS && tried < 20 * RANDOM_CONFIGS {
        tried += 1;
        let cfg = random_converter(&mut rng);
        if !check_stability(&cfg).unwrap().pass {
            continue;
        }
        let Ok((_, rep)) = solve_report(&cfg) else { continue };
        if rep.convergence.converged() && rep.efficiency.is_some() {
            reports.push(rep);
        }
    }
    ConverterSweep { reports, tried }
}

fn criterion_5(sweep: &ConverterSweep) -> Outcome {
    let margins: Vec<f64> = sweep.reports.iter().map(|r| r.bounds.eta_c.unwrap() - r.efficiency.unwrap()).collect();
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        sweep.reports.len() == RANDOM_CONFIGS && min > 0.0,
        format!("{} engines ({} drawn), min eta_c - eta = {min:.3e}", sweep.reports.len(), sweep.tried),
    )
}

fn criterion_6(sweep: &ConverterSweep) -> Outcome {
    let margin = sweep.reports.iter().map(|r| r.clausius.margin.unwrap()).fold(f64::INFINITY, f64::min);
    let classic = sweep.reports.iter().map(|r| r.clausius.classic.unwrap()).fold(f64::INFINITY, f64::min);
    outcome(
        sweep.reports.len() == RANDOM_CONFIGS && margin > 0.0 && classic > 0.0,
        format!("min out/in - floor = {margin:.3e}, min dQin/T_h + dQout/T_c = {classic:.3e}"),
    )
}

/// Converter with a squeezed hot bath far above the drive frequency.
fn hot_squeezed(r: f64, th: f64, tc: f64) -> EngineConfig {
    let src = format!(
        r#"
[network]
v0 = [[1.2, 0.0], [0.0, 16.2]]
drive_freq = 3.0
fourier = [
  {{ m = 1, matrix = [[0.0, 0.2], [0.2, 0.0]] }},
  {{ m = -1, matrix = [[0.0, 0.2], [0.2, 0.0]] }},
]
[[reservoirs]]
label = "cold"
projector = [1.0, 0.0]
profile = {{ gamma = 0.1, cutoff = 2.0 }}
occupation = {{ kind = "thermal", T = {tc:?} }}
[[reservoirs]]
label = "hot"
projector = [0.0, 1.0]
profile = {{ gamma = 0.1, cutoff = 2.0 }}
occupation = {{ kind = "squeezed_thermal", T = {th:?}, r = {r:?} }}
"#
    );
    fast(RunConfig::from_toml_str(&src).unwrap().engine().unwrap())
}

fn criterion_7() -> Outcome {
    let (th, tc) = (150.0, 10.0);
    let mut worst = 0.0f64;
    for r in [0.25, 0.5, 1.0] {
        let rep = build_report(&solve_engine(&hot_squeezed(r, th, tc)).unwrap()).unwrap();
        let expect = 1.0 - tc / ((2.0 * r).cosh() * th);
        worst = worst.max(rel(rep.bounds.eta_g, expect));
    }
    let (_, rep) = solve_report(&common::bundled("squeezed_pair.toml")).unwrap();
    let eta = rep.efficiency.unwrap_or(f64::NAN);
    let (ec, eg) = (rep.bounds.eta_c.unwrap(), rep.bounds.eta_g);
    outcome(
        worst <= SQUEEZED_BOUND_TOL && eta > ec && eta < eg,
        format!(
            "eta_g vs 1 - T_c/(cosh(2r) T_h) max rel {worst:.2e} (tol {SQUEEZED_BOUND_TOL}); squeezed_pair eta_c {ec:.4} < eta {eta:.4} < eta_g {eg:.4}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let (th, tc) = (150.0, 10.0);
    let base = build_report(&solve_engine(&hot_squeezed(0.0, th, tc)).unwrap()).unwrap();
    let mut identity = true;
    let mut rs = Vec::new();
    let mut costs = Vec::new();
    for i in 1..=10 {
        let r = 0.01 * i as f64;
        let rep = build_report(&solve_engine(&hot_squeezed(r, th, tc)).unwrap()).unwrap();
        let b = &rep.bounds;
        let ec = b.eta_c.unwrap();
        let cost = rep.cost.as_ref().unwrap();
        identity &= b.cost_ratio == Some((b.eta_g - ec) / ec) && cost.cost_ratio == b.cost_ratio.unwrap();
        identity &= cost.cost_estimate == cost.cost_ratio * rep.heat.dq_in_magnitude;
        rs.push(r);
        costs.push(cost.cost_estimate);
    }
    // least squares on c0 + c2 r² + c4 r⁴
    let a = nalgebra::DMatrix::from_fn(rs.len(), 3, |i, j| rs[i].powi(2 * j as i32));
    let y = nalgebra::DVector::from_vec(costs);
    let coef = a.clone().svd(true, true).solve(&y, 1e-15).unwrap();
    let expect = 2.0 * tc * base.heat.dq_in_magnitude / (th - tc);
    let dev = rel(coef[1], expect);
    outcome(
        identity && dev <= COST_FIT_TOL,
        format!("definitional identity {identity}; quadratic coefficient {:.5e} vs {expect:.5e}, rel {dev:.2e} (tol {COST_FIT_TOL})", coef[1]),
    )
}

fn oracle_agreement(cfg: &EngineConfig, settings: &OracleSettings) -> (f64, String) {
    let (_, rep) = solve_report(cfg).unwrap();
    let tau = cfg.network.period();
    let run = run_oracle(cfg, settings).unwrap();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (i, p) in rep.heat.per_reservoir.iter().enumerate() {
        let d = rel(run.fit.bath_currents[i], p.total());
        worst = worst.max(d);
        parts.push(format!("{} {:.5e}/{:.5e}", p.label, run.fit.bath_currents[i], p.total()));
    }
    if cfg.network.is_driven() {
        let power = rep.heat.work / tau;
        let d = rel(run.fit.power, power);
        worst = worst.max(d);
        parts.push(format!("power {:.5e}/{:.5e}", run.fit.power, power));
    }
    (worst, parts.join(", "))
}

fn criterion_9() -> Outcome {
    let settings = OracleSettings::default();
    let (driven, d_detail) = oracle_agreement(&common::two_bath(0.2), &settings);
    let (still, s_detail) = oracle_agreement(&common::two_bath(0.0), &settings);
    outcome(
        driven <= ORACLE_TOL && still <= ORACLE_TOL,
        format!(
            "driven max rel {driven:.2e} [{d_detail}]; undriven max rel {still:.2e} [{s_detail}] (oracle/floquet, tol {ORACLE_TOL})"
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut cfg = common::two_bath(0.2);
    cfg.reservoirs[0].occupation = OccupationModel::SqueezedThermal { temperature: 2.0, r: 0.5 };
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for angle in [0.0, FRAC_PI_4] {
        let settings = OracleSettings { squeeze_angle: angle, n_modes: 400, ..Default::default() };
        let (d, detail) = oracle_agreement(&cfg, &settings);
        worst = worst.max(d);
        parts.push(format!("angle {angle:.4}: {d:.2e} [{detail}]"));
    }
    outcome(worst <= ORACLE_TOL, format!("max rel {worst:.2e} (tol {ORACLE_TOL}); {}", parts.join("; ")))
}

fn criterion_11() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for name in ["single_thermal.toml", "thermal_pair.toml", "squeezed_pair.toml"] {
        let cfg = common::bundled(name);
        let (_, base) = solve_report(&cfg).unwrap();
        let deltas = self_convergence(&cfg, &base).unwrap();
        let m = deltas.iter().map(|d| d.max()).fold(0.0, f64::max);
        worst = worst.max(m);
        parts.push(format!("{name} {m:.2e}"));
    }
    outcome(worst < REFINEMENT_TOL, format!("max rel change {worst:.2e} (tol {REFINEMENT_TOL:.0e}): {}", parts.join(", ")))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |i: usize| selected.is_empty() || selected.contains(&i);
    let names = [
        "detailed balance",
        "Floquet symmetries",
        "split recombination",
        "Planck proposition",
        "Carnot bound",
        "Clausius floor",
        "squeezed bound",
        "cost diagnostics",
        "oracle equivalence",
        "occupation-only dependence",
        "self-convergence",
    ];
    let mut sweep: Option<ConverterSweep> = None;
    let mut failed = 0;
    for (idx, name) in names.iter().enumerate() {
        let i = idx + 1;
        if !wanted(i) {
            continue;
        }
        let start = Instant::now();
        let out = match i {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 | 6 => {
                let s = sweep.get_or_insert_with(converter_sweep);
                if i == 5 { criterion_5(s) } else { criterion_6(s) }
            }
            7 => criterion_7(),
            8 => criterion_8(),
            9 => criterion_9(),
            10 => criterion_10(),
            _ => criterion_11(),
        };
        if !out.passed {
            failed += 1;
        }
        println!(
            "criterion {i:>2} {:<27} {} ({:.1} s) {}",
            name,
            if out.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
