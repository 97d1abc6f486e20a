//! Invariant batteries over a configuration.

use serde::{Deserialize, Serialize};

use crate::analysis::PlanckVerdict;
use crate::currents::{solve_engine, transition_rate, RateTable};
use crate::error::Result;
use crate::floquet::{check_stability, FloquetSolver};
use crate::model::EngineConfig;
use crate::report::{report_from_table, EngineReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value <= limit, value, limit, detail: detail.into() }
    }

    fn flag(name: &str, passed: bool, value: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value, limit: 0.0, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Relative change of the cycle quantities under one refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementDelta {
    pub refinement: String,
    /// (quantity, relative change)
    pub changes: Vec<(String, f64)>,
}

impl RefinementDelta {
    pub fn max(&self) -> f64 {
        self.changes.iter().map(|c| c.1).fold(0.0, f64::max)
    }
}

fn sample_frequencies(config: &EngineConfig, count: usize) -> Vec<f64> {
    let top = 0.5 * config.omega_max();
    (0..count).map(|i| top * (i as f64 + 0.37) / count as f64).collect()
}

/// max_n ‖Ã_n(iω) − conj(Ã_{−n}(−iω))‖ / ‖Ã_n‖ over the sample.
pub fn conjugation_error(config: &EngineConfig, omegas: &[f64]) -> Result<f64> {
    let solver = FloquetSolver::new(config);
    let n = config.numerics.n_max as i32;
    let mut worst = 0.0f64;
    for &w in omegas {
        let plus = solver.solve(w)?;
        let minus = solver.solve(-w)?;
        for k in -n..=n {
            let a = plus.coeff(k).expect("stored");
            let b = minus.coeff(-k).expect("stored").map(|z| z.conj());
            let norm = a.norm();
            if norm > 0.0 {
                worst = worst.max((a - b).norm() / norm);
            }
        }
    }
    Ok(worst)
}

/// max ‖Ã_n(iω) − Ã_{−n}ᵀ(iω + inω_d)‖ / ‖Ã_n‖ for |n| ≤ n_max − 1.
pub fn translation_error(config: &EngineConfig, omegas: &[f64]) -> Result<f64> {
    let solver = FloquetSolver::new(config);
    let wd = config.network.drive_freq;
    let n = config.numerics.n_max as i32 - 1;
    let mut worst = 0.0f64;
    for &w in omegas {
        let base = solver.solve(w)?;
        let scale = base.coeff(0).expect("stored").norm();
        for k in -n..=n {
            let a = base.coeff(k).expect("stored");
            let shifted = solver.solve(w + k as f64 * wd)?;
            let b = shifted.coeff(-k).expect("stored").transpose();
            let norm = a.norm();
            // harmonics far below the leading one are compared against it
            if norm > 0.0 {
                worst = worst.max((a - b).norm() / norm.max(1e-6 * scale));
            }
        }
    }
    Ok(worst)
}

/// max |p^{(−k)}_{βα}(ω + kω_d) − p^{(k)}_{αβ}(ω)| / max p over sampled tuples; returns (error, tuples).
pub fn detailed_balance_error(config: &EngineConfig, omegas: &[f64], k_top: usize) -> Result<(f64, usize)> {
    let solver = FloquetSolver::new(config);
    let wd = config.network.drive_freq;
    let r = config.reservoirs.len();
    let mut pairs = Vec::new();
    for &w in omegas {
        let base = solver.solve(w)?;
        for k in 1..=k_top.min(config.numerics.n_max) {
            let shifted = solver.solve(w + k as f64 * wd)?;
            for a in 0..r {
                for b in 0..r {
                    let fwd = transition_rate(config, &base, k as i32, a, b)?;
                    let rev = transition_rate(config, &shifted, -(k as i32), b, a)?;
                    pairs.push((fwd, rev));
                }
            }
        }
    }
    let peak = pairs.iter().map(|p| p.0.max(p.1)).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok((0.0, pairs.len()));
    }
    let worst = pairs.iter().map(|p| (p.0 - p.1).abs()).fold(0.0, f64::max) / peak;
    Ok((worst, pairs.len()))
}

fn rel_change(a: f64, b: f64, scale: f64) -> f64 {
    let denom = a.abs().max(1e-9 * scale);
    if denom == 0.0 {
        0.0
    } else {
        (a - b).abs() / denom
    }
}

fn quantities(rep: &EngineReport) -> Vec<(&'static str, f64)> {
    vec![
        ("dq_nr", rep.heat.dq_nr),
        ("dq_r", rep.heat.dq_r),
        ("dq_in", rep.heat.dq_in),
        ("dq_out", rep.heat.dq_out),
        ("work", rep.heat.work),
    ]
}

pub fn solve_report(config: &EngineConfig) -> Result<(RateTable, EngineReport)> {
    let sol = solve_engine(config)?;
    let table = RateTable::from_solution(&sol)?;
    let rep = report_from_table(&sol, &table)?;
    Ok((table, rep))
}

/// Doubles N_max (and with it K_max), doubles the initial panels, halves σ.
pub fn self_convergence(config: &EngineConfig, base: &EngineReport) -> Result<Vec<RefinementDelta>> {
    let mut variants: Vec<(String, EngineConfig)> = Vec::new();
    let mut c = config.clone();
    c.numerics.n_max *= 2;
    c.numerics.n_cap = c.numerics.n_cap.max(c.numerics.n_max);
    c.numerics.k_max = config.numerics.k_max.map(|k| 2 * k);
    variants.push(("n_max and k_max doubled".into(), c));
    let mut c = config.clone();
    c.numerics.panels *= 2;
    c.numerics.max_panels *= 2;
    variants.push(("quadrature panels doubled".into(), c));
    let mut c = config.clone();
    c.numerics.sigma = Some(0.5 * config.sigma());
    variants.push(("sigma halved".into(), c));

    let scale = base.heat.dq_nr.abs() + base.heat.dq_in_magnitude + base.heat.dq_out;
    let mut out = Vec::new();
    for (name, cfg) in variants {
        let (_, rep) = solve_report(&cfg)?;
        let changes = quantities(base)
            .into_iter()
            .zip(quantities(&rep))
            .map(|((q, a), (_, b))| (q.to_string(), rel_change(a, b, scale)))
            .collect();
        out.push(RefinementDelta { refinement: name, changes });
    }
    Ok(out)
}

/// Self-convergence limit on every reported cycle quantity.
pub const REFINEMENT_TOL: f64 = 1e-3;

pub fn run_suite(config: &EngineConfig, quick: bool) -> Result<ValidationReport> {
    let mut cfg = config.clone();
    if quick {
        cfg.numerics.quad_tol = cfg.numerics.quad_tol.max(1e-6);
        cfg.numerics.panels = cfg.numerics.panels.min(4);
    }
    let mut checks = Vec::new();
    let stab = check_stability(&cfg)?;
    checks.push(Check::flag(
        "stability",
        stab.pass,
        stab.margin,
        format!("min ||g(i n w_d)||^-1 = {:.6e} vs sum ||V_m|| = {:.6e}", stab.lhs, stab.rhs),
    ));
    let samples = sample_frequencies(&cfg, if quick { 3 } else { 8 });
    checks.push(Check::at_most("floquet_conjugation", conjugation_error(&cfg, &samples)?, 1e-10, "relative"));
    checks.push(Check::at_most("floquet_translation", translation_error(&cfg, &samples[..samples.len().min(4)])?, 1e-8, "relative"));
    let (db, tuples) = detailed_balance_error(&cfg, &samples, 3)?;
    checks.push(Check::at_most("detailed_balance", db, 1e-8, format!("{tuples} tuples")));

    let (table, rep) = solve_report(&cfg)?;
    let h = &rep.heat;
    checks.push(Check::flag("rates_nonnegative", table.all_nonnegative(), 0.0, ""));
    let split = (h.dq_out + h.dq_in - h.dq_r).abs();
    checks.push(Check::at_most("split_recombination", split, 1e-12 * (h.dq_out.abs() + h.dq_in.abs()).max(f64::MIN_POSITIVE), "absolute"));
    let driven = cfg.network.is_driven();
    checks.push(Check::flag(
        "nonresonant_positive",
        h.dq_nr > 0.0 || (!driven && h.dq_nr == 0.0),
        h.dq_nr,
        if driven { "driven" } else { "undriven" },
    ));
    let st_sum: f64 = h.per_reservoir.iter().map(|p| p.static_current).sum();
    let st_abs: f64 = h.per_reservoir.iter().map(|p| p.static_current.abs()).sum();
    checks.push(Check::at_most("static_balance", st_sum.abs(), 1e-10 * st_abs, "sum of static currents"));
    let tau = cfg.network.period();
    let res_sum: f64 = h.per_reservoir.iter().map(|p| p.nonresonant + p.resonant).sum::<f64>() * tau;
    let total = h.dq_nr + h.dq_r;
    checks.push(Check::at_most(
        "reservoir_sum",
        (res_sum - total).abs(),
        1e-10 * (h.dq_nr.abs() + h.dq_in_magnitude + h.dq_out),
        "tau * sum_a (Q_nr + Q_r) vs dQ_nr + dQ_r",
    ));
    checks.push(Check::flag(
        "clausius",
        rep.clausius.holds && rep.clausius.classic_holds.unwrap_or(true),
        rep.clausius.margin.unwrap_or(0.0),
        format!("ratio {:?} vs floor {:.6e}", rep.clausius.ratio, rep.clausius.floor),
    ));
    if let Some(eta) = rep.efficiency {
        checks.push(Check::flag("efficiency_below_eta_g", eta < rep.bounds.eta_g, rep.bounds.eta_g - eta, format!("eta = {eta:.6e}")));
        if cfg.reservoirs.iter().all(|r| r.occupation.is_thermal()) {
            if let Some(ec) = rep.bounds.eta_c {
                checks.push(Check::flag("efficiency_below_carnot", eta < ec, ec - eta, format!("eta_c = {ec:.6e}")));
            }
        }
    }
    if let Some(ratio) = rep.bounds.cost_ratio {
        let ok = ratio >= -1e-12 && rep.bounds.cost_ceiling.map_or(true, |c| rep.bounds.eta_g > 1.0 || ratio <= c + 1e-12);
        checks.push(Check::flag("cost_range", ok, ratio, "0 <= cost ratio <= T_c/(T_h - T_c)"));
    }
    match &rep.planck {
        PlanckVerdict::Satisfied { work } => checks.push(Check::flag("planck", true, *work, "W >= 0")),
        PlanckVerdict::Violated { work } => checks.push(Check::flag("planck", false, *work, "W < 0 with monotone occupation")),
        PlanckVerdict::Informational { work, .. } => checks.push(Check::flag("planck", true, *work, "non-monotone occupation, informational")),
        PlanckVerdict::NotApplicable => {}
    }
    let conv = &rep.convergence;
    checks.push(Check::flag(
        "convergence",
        conv.converged(),
        conv.max_tail,
        format!(
            "floquet {} (max tail {:.2e}), quadrature {}, k tail {:.2e}",
            conv.floquet_converged, conv.max_tail, conv.quadrature_converged, conv.k_tail
        ),
    ));
    if !quick {
        for d in self_convergence(&cfg, &rep)? {
            checks.push(Check::at_most(&format!("refinement: {}", d.refinement), d.max(), REFINEMENT_TOL, "max relative change"));
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { checks, passed })
}

