//! Report assembly and serialization.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    bounds, clausius_check, planck_verdict, preparation_cost, BoundsReport, ClausiusVerdict, CostReport,
    PlanckVerdict,
};
use crate::currents::{labels, EngineSolution, HeatReport, RateTable};
use crate::error::Result;
use crate::floquet::StabilityReport;

/// 17 significant digits, enough to round-trip any f64.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceInfo {
    pub stability: StabilityReport,
    pub floquet_converged: bool,
    pub max_tail: f64,
    pub max_truncation_used: usize,
    pub quadrature_converged: bool,
    pub resonant_nodes: usize,
    pub nonresonant_nodes: usize,
    pub resonant_error: f64,
    pub nonresonant_error: f64,
    pub k_max: usize,
    pub k_tail: f64,
    pub k_converged: bool,
    pub sigma: f64,
}

impl ConvergenceInfo {
    pub fn converged(&self) -> bool {
        self.floquet_converged && self.quadrature_converged && self.k_converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineReport {
    pub heat: HeatReport,
    pub bounds: BoundsReport,
    pub clausius: ClausiusVerdict,
    pub efficiency: Option<f64>,
    /// Present when T_c < T_h anchors exist.
    pub cost: Option<CostReport>,
    pub planck: PlanckVerdict,
    pub convergence: ConvergenceInfo,
}

/// Tolerance used for sign verdicts on the work per cycle.
pub fn work_tolerance(heat: &HeatReport, quad_tol: f64) -> f64 {
    10.0 * quad_tol * (heat.dq_nr.abs() + heat.dq_in_magnitude + heat.dq_out)
}

pub fn build_report(sol: &EngineSolution) -> Result<EngineReport> {
    let table = RateTable::from_solution(sol)?;
    report_from_table(sol, &table)
}

pub fn report_from_table(sol: &EngineSolution, table: &RateTable) -> Result<EngineReport> {
    let config = &sol.config;
    let heat = HeatReport::from_table(table, config.network.period(), config.numerics.k_tail_tol, &labels(config));
    let b = bounds(config, table, &heat)?;
    let clausius = clausius_check(config, &heat, &b);
    let cost = preparation_cost(&b, &heat).ok();
    let planck = planck_verdict(config, &heat, work_tolerance(&heat, config.numerics.quad_tol))?;
    let nodes = sol.resonant.nodes.iter().chain(&sol.nonresonant.nodes);
    let convergence = ConvergenceInfo {
        stability: sol.stability.clone(),
        floquet_converged: sol.floquet_converged(),
        max_tail: sol.max_tail(),
        max_truncation_used: nodes.map(|n| n.payload.n_used).max().unwrap_or(0),
        quadrature_converged: sol.quadrature_converged(),
        resonant_nodes: sol.resonant.nodes.len(),
        nonresonant_nodes: sol.nonresonant.nodes.len(),
        resonant_error: sol.resonant.error,
        nonresonant_error: sol.nonresonant.error,
        k_max: heat.k_max,
        k_tail: heat.k_tail,
        k_converged: heat.k_converged,
        sigma: sol.sigma,
    };
    Ok(EngineReport { efficiency: b.eta, heat, bounds: b, clausius, cost, planck, convergence })
}

/// ω-resolved rates: one row per (grid, node, k, α, β).
pub fn rates_csv(table: &RateTable, labels: &[String]) -> String {
    let mut s = String::from("grid,omega,weight,k,alpha,beta,rate\n");
    let r = table.n_res;
    for node in &table.resonant {
        for a in 0..r {
            for b in 0..r {
                let _ = writeln!(
                    s,
                    "static,{},{},0,{},{},{}",
                    sig17(node.omega),
                    sig17(node.weight),
                    labels[a],
                    labels[b],
                    sig17(node.static_rate[a * r + b])
                );
            }
        }
        for k in 1..=table.k_max {
            for a in 0..r {
                for b in 0..r {
                    let _ = writeln!(
                        s,
                        "resonant,{},{},{k},{},{},{}",
                        sig17(node.omega),
                        sig17(node.weight),
                        labels[a],
                        labels[b],
                        sig17(table.p(node, k, a, b))
                    );
                }
            }
        }
    }
    for node in &table.nonresonant {
        for k in 1..=table.k_max {
            if node.omega >= k as f64 * table.drive_freq {
                continue;
            }
            for a in 0..r {
                for b in 0..r {
                    let _ = writeln!(
                        s,
                        "nonresonant,{},{},{k},{},{},{}",
                        sig17(node.omega),
                        sig17(node.weight),
                        labels[a],
                        labels[b],
                        sig17(table.p_tilde(node, k, a, b))
                    );
                }
            }
        }
    }
    s
}

/// Per-channel breakdown of the cycle heat.
pub fn channels_csv(heat: &HeatReport) -> String {
    let mut s = String::from("k,dq_nr,dq_r,dq_in,dq_out\n");
    for c in &heat.channels {
        let _ = writeln!(s, "{},{},{},{},{}", c.k, sig17(c.dq_nr), sig17(c.dq_r), sig17(c.dq_in), sig17(c.dq_out));
    }
    s
}

/// Scalar summary as `quantity,value` rows.
pub fn summary_csv(rep: &EngineReport) -> String {
    let mut rows: Vec<(String, Option<f64>)> = vec![
        ("dq_nr".into(), Some(rep.heat.dq_nr)),
        ("dq_r".into(), Some(rep.heat.dq_r)),
        ("dq_in".into(), Some(rep.heat.dq_in)),
        ("dq_out".into(), Some(rep.heat.dq_out)),
        ("work".into(), Some(rep.heat.work)),
        ("eta".into(), rep.efficiency),
        ("eta_g".into(), Some(rep.bounds.eta_g)),
        ("eta_c".into(), rep.bounds.eta_c),
        ("m".into(), Some(rep.bounds.m)),
        ("big_m".into(), Some(rep.bounds.big_m)),
        ("clausius_floor".into(), Some(rep.bounds.clausius_floor)),
        ("clausius_ratio".into(), rep.clausius.ratio),
        ("cost_ratio".into(), rep.bounds.cost_ratio),
        ("cost_estimate".into(), rep.cost.as_ref().map(|c| c.cost_estimate)),
    ];
    for p in &rep.heat.per_reservoir {
        rows.push((format!("qdot_st[{}]", p.label), Some(p.static_current)));
        rows.push((format!("qdot_nr[{}]", p.label), Some(p.nonresonant)));
        rows.push((format!("qdot_r[{}]", p.label), Some(p.resonant)));
    }
    let mut s = String::from("quantity,value\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{}", v.map(sig17).unwrap_or_default());
    }
    s
}
