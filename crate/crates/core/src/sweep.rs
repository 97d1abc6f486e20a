//! One-dimensional parameter sweeps.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EngineConfig, OccupationModel, SpectralProfile};
use crate::report::sig17;
use crate::validate::solve_report;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AxisTarget {
    /// `label.T`, `label.r`, `label.gamma`, `label.cutoff`.
    Reservoir { label: String, param: String },
    /// `drive.scale`: multiplies every V_m.
    DriveScale,
    /// `drive.freq`.
    DriveFreq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub target: AxisTarget,
    pub values: Vec<f64>,
}

/// Parses `target=start:stop:count` or `target=value`.
pub fn parse_axis(spec: &str) -> Result<Axis> {
    let bad = |m: &str| Error::Config(format!("axis {spec:?}: {m}"));
    let (name, range) = spec.split_once('=').ok_or_else(|| bad("expected target=start:stop:count"))?;
    let (head, param) = name.rsplit_once('.').ok_or_else(|| bad("target must look like label.param"))?;
    let target = match (head, param) {
        ("drive", "scale") => AxisTarget::DriveScale,
        ("drive", "freq") => AxisTarget::DriveFreq,
        (label, p @ ("T" | "r" | "gamma" | "cutoff")) => AxisTarget::Reservoir { label: label.into(), param: p.into() },
        _ => return Err(bad("unknown parameter; use T, r, gamma, cutoff, drive.scale or drive.freq")),
    };
    let parts: Vec<&str> = range.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("{s:?} is not a number")));
    let values = match parts.as_slice() {
        [v] => vec![num(v)?],
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| bad("count must be a positive integer"))?;
            match n {
                0 => return Err(bad("count must be positive")),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }
        }
        _ => return Err(bad("expected start:stop:count")),
    };
    Ok(Axis { name: name.into(), target, values })
}

pub fn apply(config: &EngineConfig, target: &AxisTarget, value: f64) -> Result<EngineConfig> {
    let mut c = config.clone();
    match target {
        AxisTarget::DriveScale => c.network = config.network.with_drive_scaled(value),
        AxisTarget::DriveFreq => c.network.drive_freq = value,
        AxisTarget::Reservoir { label, param } => {
            let idx = c
                .reservoir_index(label)
                .ok_or_else(|| Error::Config(format!("no reservoir labelled {label:?}")))?;
            let res = &mut c.reservoirs[idx];
            match param.as_str() {
                "gamma" | "cutoff" => {
                    let SpectralProfile::OhmicExponential { gamma, cutoff } = res.density.profile;
                    res.density.profile = if param == "gamma" {
                        SpectralProfile::OhmicExponential { gamma: value, cutoff }
                    } else {
                        SpectralProfile::OhmicExponential { gamma, cutoff: value }
                    };
                }
                "T" => match &mut res.occupation {
                    OccupationModel::Thermal { temperature } | OccupationModel::SqueezedThermal { temperature, .. } => {
                        *temperature = value
                    }
                    OccupationModel::Tabulated { .. } => {
                        return Err(Error::Config(format!("reservoir {label:?} is tabulated; it has no T")))
                    }
                },
                "r" => {
                    let t = res
                        .occupation
                        .temperature()
                        .ok_or_else(|| Error::Config(format!("reservoir {label:?} is tabulated; it has no r")))?;
                    res.occupation = OccupationModel::SqueezedThermal { temperature: t, r: value };
                }
                _ => unreachable!("validated by parse_axis"),
            }
        }
    }
    c.validate()?;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub eta: Option<f64>,
    pub eta_g: Option<f64>,
    pub eta_c: Option<f64>,
    pub cost_ratio: Option<f64>,
    pub work: Option<f64>,
    pub dq_in: Option<f64>,
    pub status: String,
}

pub fn run_sweep(config: &EngineConfig, axis: &Axis) -> Result<Vec<SweepRow>> {
    axis.values
        .par_iter()
        .map(|&v| {
            let cfg = apply(config, &axis.target, v)?;
            Ok(match solve_report(&cfg) {
                Ok((_, rep)) => SweepRow {
                    value: v,
                    eta: rep.efficiency,
                    eta_g: Some(rep.bounds.eta_g),
                    eta_c: rep.bounds.eta_c,
                    cost_ratio: rep.bounds.cost_ratio,
                    work: Some(rep.heat.work),
                    dq_in: Some(rep.heat.dq_in_magnitude),
                    status: if !rep.convergence.stability.pass {
                        "unstable".into()
                    } else if rep.convergence.converged() {
                        "ok".into()
                    } else {
                        "unconverged".into()
                    },
                },
                Err(e) => SweepRow {
                    value: v,
                    eta: None,
                    eta_g: None,
                    eta_c: None,
                    cost_ratio: None,
                    work: None,
                    dq_in: None,
                    status: format!("error: {e}").replace(',', ";"),
                },
            })
        })
        .collect()
}

pub fn sweep_csv(axis: &Axis, rows: &[SweepRow]) -> String {
    let f = |v: Option<f64>| v.map(sig17).unwrap_or_default();
    let mut s = format!("{},eta,eta_g,eta_c,cost_ratio,work,dq_in,status\n", axis.name);
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            sig17(r.value),
            f(r.eta),
            f(r.eta_g),
            f(r.eta_c),
            f(r.cost_ratio),
            f(r.work),
            f(r.dq_in),
            r.status
        );
    }
    s
}
