//! Clausius floor, efficiency, generalized Carnot bound and preparation cost.

use serde::{Deserialize, Serialize};

use crate::currents::{HeatReport, RateTable};
use crate::error::{Error, Result};
use crate::model::{EngineConfig, OccupationModel};

/// (m, M): extrema of Ω_β(ω)/Ω_α(ω + kω_d) over rate-supported nodes.
pub fn omega_ratio_extrema(config: &EngineConfig, table: &RateTable) -> Result<(f64, f64)> {
    let r = table.n_res;
    let peak = table.resonant.iter().flat_map(|n| n.rate.iter().copied()).fold(0.0, f64::max);
    let floor = config.numerics.support_threshold * peak;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for node in &table.resonant {
        let w = node.omega;
        for k in 1..=table.k_max {
            let shifted = w + k as f64 * table.drive_freq;
            for a in 0..r {
                for b in 0..r {
                    let p = table.p(node, k, a, b);
                    if !(p > floor) || peak == 0.0 {
                        continue;
                    }
                    let ob = config.reservoirs[b].occupation.characteristic_frequency(w)?;
                    let oa = config.reservoirs[a].occupation.characteristic_frequency(shifted)?;
                    let ratio = ob / oa;
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                }
            }
        }
    }
    if lo.is_infinite() {
        // no resonant transport at all: the bound degenerates to the trivial one
        return Ok((1.0, 1.0));
    }
    Ok((lo, hi))
}

/// Coldest and hottest temperature parameters over thermal and squeezed reservoirs.
pub fn thermal_anchors(config: &EngineConfig) -> Option<(f64, f64)> {
    let ts: Vec<f64> = config.reservoirs.iter().filter_map(|r| r.occupation.temperature()).collect();
    if ts.is_empty() {
        return None;
    }
    let tc = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let th = ts.iter().copied().fold(0.0, f64::max);
    Some((tc, th))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub m: f64,
    pub big_m: f64,
    pub clausius_floor: f64,
    /// Present only in the engine regime.
    pub eta: Option<f64>,
    pub eta_g: f64,
    pub eta_c: Option<f64>,
    pub t_cold: Option<f64>,
    pub t_hot: Option<f64>,
    /// (η_g − η_c)/η_c.
    pub cost_ratio: Option<f64>,
    /// |W̄|(η_g − η_c)/(η_g η_c).
    pub cost_lower_bound_given_work: Option<f64>,
    /// T_c/(T_h − T_c).
    pub cost_ceiling: Option<f64>,
}

pub fn bounds(config: &EngineConfig, table: &RateTable, report: &HeatReport) -> Result<BoundsReport> {
    let (m, big_m) = omega_ratio_extrema(config, table)?;
    let clausius_floor = m.min(1.0 / big_m);
    let eta_g = 1.0 - clausius_floor;
    let eta = efficiency(report).ok();
    let anchors = thermal_anchors(config).filter(|(tc, th)| th > tc);
    let eta_c = anchors.map(|(tc, th)| 1.0 - tc / th);
    let cost_ratio = eta_c.map(|ec| (eta_g - ec) / ec);
    let cost_lower_bound_given_work = match (eta_c, report.work < 0.0) {
        (Some(ec), true) => Some(report.work.abs() * (eta_g - ec) / (eta_g * ec)),
        _ => None,
    };
    Ok(BoundsReport {
        m,
        big_m,
        clausius_floor,
        eta,
        eta_g,
        eta_c,
        t_cold: anchors.map(|a| a.0),
        t_hot: anchors.map(|a| a.1),
        cost_ratio,
        cost_lower_bound_given_work,
        cost_ceiling: anchors.map(|(tc, th)| tc / (th - tc)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClausiusVerdict {
    /// ΔQ^R_{ℰ←𝒮}/|ΔQ^R_{ℰ→𝒮}|; absent when nothing flows in.
    pub ratio: Option<f64>,
    pub floor: f64,
    pub margin: Option<f64>,
    pub holds: bool,
    /// ΔQ^R_{ℰ→𝒮}/T_h + ΔQ^R_{ℰ←𝒮}/T_c, for all-thermal configurations.
    pub classic: Option<f64>,
    pub classic_holds: Option<bool>,
}

pub fn clausius_check(config: &EngineConfig, report: &HeatReport, bounds: &BoundsReport) -> ClausiusVerdict {
    let ratio = (report.dq_in_magnitude > 0.0).then(|| report.dq_out / report.dq_in_magnitude);
    let all_thermal = config.reservoirs.iter().all(|r| r.occupation.is_thermal());
    let classic = match (all_thermal, bounds.t_cold, bounds.t_hot) {
        (true, Some(tc), Some(th)) => Some(report.dq_in / th + report.dq_out / tc),
        _ => None,
    };
    ClausiusVerdict {
        ratio,
        floor: bounds.clausius_floor,
        margin: ratio.map(|r| r - bounds.clausius_floor),
        holds: ratio.map_or(true, |r| r > bounds.clausius_floor),
        classic,
        classic_holds: classic.map(|c| c > 0.0),
    }
}

/// η = (|ΔQ_in| − ΔQ_out − ΔQ^{NR})/|ΔQ_in|, defined only when W̄_𝒮 < 0.
pub fn efficiency(report: &HeatReport) -> Result<f64> {
    let q = report.dq_in_magnitude;
    if !(report.work < 0.0) || !(q > 0.0) {
        return Err(Error::NotAnEngine {
            work: report.work,
            dq_in: q,
            dq_out: report.dq_out,
            dq_nr: report.dq_nr,
        });
    }
    Ok((q - report.dq_out - report.dq_nr) / q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub cost_ratio: f64,
    /// cost_ratio · |ΔQ^R_{ℰ→𝒮}|, an estimate of the preparation energy per cycle.
    pub cost_estimate: f64,
    pub lower_bound_given_work: Option<f64>,
    pub ceiling: f64,
    pub low_cost_regime: bool,
}

pub fn preparation_cost(bounds: &BoundsReport, report: &HeatReport) -> Result<CostReport> {
    let (tc, th) = match (bounds.t_cold, bounds.t_hot) {
        (Some(tc), Some(th)) if th > tc => (tc, th),
        _ => return Err(Error::UndefinedCost("needs two distinct temperature anchors with T_c < T_h".into())),
    };
    let cost_ratio = bounds.cost_ratio.expect("anchors present");
    Ok(CostReport {
        cost_ratio,
        cost_estimate: cost_ratio * report.dq_in_magnitude,
        lower_bound_given_work: bounds.cost_lower_bound_given_work,
        ceiling: tc / (th - tc),
        low_cost_regime: th > 2.0 * tc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PlanckVerdict {
    /// Monotone occupation and W̄ ≥ −tol.
    Satisfied { work: f64 },
    Violated { work: f64 },
    /// Non-monotone occupation: the sign is reported, not asserted.
    Informational { work: f64, work_extracted: bool },
    /// Several reservoirs with different occupations.
    NotApplicable,
}

fn strictly_decreasing(o: &OccupationModel, lo: f64, hi: f64) -> Result<bool> {
    match o {
        OccupationModel::Thermal { .. } | OccupationModel::SqueezedThermal { .. } => Ok(true),
        OccupationModel::Tabulated { table } => {
            let (a, b) = table.range();
            let (lo, hi) = (lo.max(a), hi.min(b));
            let n = 2000;
            let mut prev = o.occupation(lo.max(f64::MIN_POSITIVE))?;
            for i in 1..=n {
                let w = lo + (hi - lo) * i as f64 / n as f64;
                let v = o.occupation(w)?;
                if v >= prev {
                    return Ok(false);
                }
                prev = v;
            }
            Ok(true)
        }
    }
}

/// Work sign check for a single reservoir, or for reservoirs sharing one occupation.
pub fn planck_verdict(config: &EngineConfig, report: &HeatReport, tol: f64) -> Result<PlanckVerdict> {
    let first = &config.reservoirs[0].occupation;
    if config.reservoirs.iter().any(|r| &r.occupation != first) {
        return Ok(PlanckVerdict::NotApplicable);
    }
    let hi = config.omega_max() + config.numerics.k_max() as f64 * config.network.drive_freq;
    let work = report.work;
    if strictly_decreasing(first, 1e-3 * config.network.drive_freq, hi)? {
        if work >= -tol {
            Ok(PlanckVerdict::Satisfied { work })
        } else {
            Ok(PlanckVerdict::Violated { work })
        }
    } else {
        Ok(PlanckVerdict::Informational { work, work_extracted: work < 0.0 })
    }
}
