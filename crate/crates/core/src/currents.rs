//! Emission/transition rates and the per-cycle heat and work balance.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{check_stability, CMat, FloquetNode, FloquetSolution, FloquetSolver, StabilityReport};
use crate::model::EngineConfig;
use crate::quadrature::{adaptive_grid, PanelGrid};

/// Reservoir projectors as columns, U = [u_1 … u_R].
fn projector_matrix(config: &EngineConfig) -> CMat {
    let n = config.network.n_osc;
    let r = config.reservoirs.len();
    CMat::from_fn(n, r, |i, a| Complex64::new(config.reservoirs[a].density.projector[i], 0.0))
}

/// (π/2) J_α(w_a) J_β(w_b) |u_αᵀ A u_β|² for all (α, β), row-major in α.
fn rate_block(config: &EngineConfig, u: &CMat, a: &CMat, w_a: f64, w_b: f64, out: &mut Vec<f64>) {
    let b = u.transpose() * a * u;
    let r = config.reservoirs.len();
    for al in 0..r {
        let ja = config.reservoirs[al].density.j(w_a);
        for be in 0..r {
            let jb = config.reservoirs[be].density.j(w_b);
            out.push(FRAC_PI_2 * ja * jb * b[(al, be)].norm_sqr());
        }
    }
}

fn coeff(node: &FloquetNode, k: i32) -> Result<&CMat> {
    node.coeff(k).ok_or_else(|| {
        Error::Domain(format!("harmonic {k} not stored (n_max = {})", node.n_max()))
    })
}

/// p̃^{(k)}_{αβ}(ω) = (π/2) tr[I_α(kω_d − ω) Ã_{−k}(iω) I_β(ω) Ã_{−k}^†(iω)] at ω = `node.omega`.
pub fn emission_rate(
    config: &EngineConfig,
    node: &FloquetNode,
    k: usize,
    alpha: usize,
    beta: usize,
) -> Result<f64> {
    let w = node.omega;
    let top = k as f64 * config.network.drive_freq;
    if k == 0 || !(w > 0.0 && w < top) {
        return Err(Error::Domain(format!("emission rate needs 0 < omega < k omega_d, got omega = {w}, k = {k}")));
    }
    let a = coeff(node, -(k as i32))?;
    Ok(pair_rate(config, a, alpha, beta, top - w, w))
}

/// p^{(k)}_{αβ}(ω) = (π/2) tr[I_α(ω + kω_d) Ã_k(iω) I_β(ω) Ã_k^†(iω)] at ω = `node.omega`.
pub fn transition_rate(
    config: &EngineConfig,
    node: &FloquetNode,
    k: i32,
    alpha: usize,
    beta: usize,
) -> Result<f64> {
    let w = node.omega;
    let shifted = w + k as f64 * config.network.drive_freq;
    if !(w > 0.0 && shifted > 0.0) {
        return Err(Error::Domain(format!(
            "transition rate needs omega > 0 and omega + k omega_d > 0, got omega = {w}, k = {k}"
        )));
    }
    let a = coeff(node, k)?;
    Ok(pair_rate(config, a, alpha, beta, shifted, w))
}

fn pair_rate(config: &EngineConfig, a: &CMat, alpha: usize, beta: usize, w_a: f64, w_b: f64) -> f64 {
    let ua = &config.reservoirs[alpha].density.projector;
    let ub = &config.reservoirs[beta].density.projector;
    let mut z = Complex64::new(0.0, 0.0);
    for i in 0..ua.len() {
        for j in 0..ub.len() {
            z += a[(i, j)] * (ua[i] * ub[j]);
        }
    }
    FRAC_PI_2 * config.reservoirs[alpha].density.j(w_a) * config.reservoirs[beta].density.j(w_b) * z.norm_sqr()
}

/// Rates and occupations at one node of the resonant grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonantNode {
    pub omega: f64,
    pub weight: f64,
    /// p^{(0)}_{αβ}(ω), R×R row-major.
    pub static_rate: Vec<f64>,
    /// p^{(k)}_{αβ}(ω) for k = 1..=K, each R×R row-major.
    pub rate: Vec<f64>,
    /// n_β(ω).
    pub occ: Vec<f64>,
    /// n_α(ω + kω_d) for k = 1..=K.
    pub occ_shift: Vec<f64>,
}

/// Rates and occupations at one node of the nonresonant grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionNode {
    pub omega: f64,
    pub weight: f64,
    /// p̃^{(k)}_{αβ}(ω) for k = 1..=K (zero when ω ≥ kω_d).
    pub rate: Vec<f64>,
    pub occ: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub n_res: usize,
    pub k_max: usize,
    pub drive_freq: f64,
    pub resonant: Vec<ResonantNode>,
    pub nonresonant: Vec<EmissionNode>,
}

impl RateTable {
    fn idx(&self, k: usize, a: usize, b: usize) -> usize {
        ((k - 1) * self.n_res + a) * self.n_res + b
    }

    pub fn p(&self, node: &ResonantNode, k: usize, a: usize, b: usize) -> f64 {
        node.rate[self.idx(k, a, b)]
    }

    pub fn p_tilde(&self, node: &EmissionNode, k: usize, a: usize, b: usize) -> f64 {
        node.rate[self.idx(k, a, b)]
    }

    pub fn occ_shift(&self, node: &ResonantNode, k: usize, a: usize) -> f64 {
        node.occ_shift[(k - 1) * self.n_res + a]
    }

    pub fn build(config: &EngineConfig, resonant: &[(FloquetNode, f64)], nonresonant: &[(FloquetNode, f64)], k_max: usize) -> Result<Self> {
        let res = resonant.iter().map(|(n, w)| resonant_node(config, n, *w, k_max)).collect::<Result<_>>()?;
        let nr = nonresonant.iter().map(|(n, w)| emission_node(config, n, *w, k_max)).collect::<Result<_>>()?;
        Ok(Self {
            n_res: config.reservoirs.len(),
            k_max,
            drive_freq: config.network.drive_freq,
            resonant: res,
            nonresonant: nr,
        })
    }

    pub fn from_solution(sol: &EngineSolution) -> Result<Self> {
        let res: Vec<(FloquetNode, f64)> =
            sol.resonant.nodes.iter().map(|n| (n.payload.clone(), n.weight)).collect();
        let nr: Vec<(FloquetNode, f64)> =
            sol.nonresonant.nodes.iter().map(|n| (n.payload.clone(), n.weight)).collect();
        Self::build(&sol.config, &res, &nr, sol.k_max)
    }

    /// Every stored rate is nonnegative and finite.
    pub fn all_nonnegative(&self) -> bool {
        let ok = |v: &f64| v.is_finite() && *v >= 0.0;
        self.resonant.iter().all(|n| n.rate.iter().all(ok) && n.static_rate.iter().all(ok))
            && self.nonresonant.iter().all(|n| n.rate.iter().all(ok))
    }
}

fn occupations(config: &EngineConfig, w: f64) -> Result<Vec<f64>> {
    config.reservoirs.iter().map(|r| r.occupation.occupation(w)).collect()
}

fn resonant_node(config: &EngineConfig, node: &FloquetNode, weight: f64, k_max: usize) -> Result<ResonantNode> {
    let u = projector_matrix(config);
    let w = node.omega;
    let wd = config.network.drive_freq;
    let mut static_rate = Vec::new();
    rate_block(config, &u, coeff(node, 0)?, w, w, &mut static_rate);
    let mut rate = Vec::new();
    let mut occ_shift = Vec::new();
    for k in 1..=k_max {
        let shifted = w + k as f64 * wd;
        rate_block(config, &u, coeff(node, k as i32)?, shifted, w, &mut rate);
        occ_shift.extend(occupations(config, shifted)?);
    }
    Ok(ResonantNode { omega: w, weight, static_rate, rate, occ: occupations(config, w)?, occ_shift })
}

fn emission_node(config: &EngineConfig, node: &FloquetNode, weight: f64, k_max: usize) -> Result<EmissionNode> {
    let u = projector_matrix(config);
    let w = node.omega;
    let wd = config.network.drive_freq;
    let r = config.reservoirs.len();
    let mut rate = Vec::new();
    for k in 1..=k_max {
        let top = k as f64 * wd;
        if w < top {
            rate_block(config, &u, coeff(node, -(k as i32))?, top - w, w, &mut rate);
        } else {
            rate.extend(std::iter::repeat(0.0).take(r * r));
        }
    }
    Ok(EmissionNode { omega: w, weight, rate, occ: occupations(config, w)? })
}

/// Floquet coefficients on the two adaptive quadrature grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineSolution {
    pub config: EngineConfig,
    pub stability: StabilityReport,
    pub k_max: usize,
    pub sigma: f64,
    /// Grid on [0, ω_max] for static and resonant terms.
    pub resonant: PanelGrid<FloquetNode>,
    /// Grid on [0, Kω_d] for nonresonant terms.
    pub nonresonant: PanelGrid<FloquetNode>,
}

impl EngineSolution {
    pub fn resonant_floquet(&self) -> FloquetSolution {
        grid_solution(&self.resonant, self.config.numerics.n_max, self.sigma)
    }

    pub fn nonresonant_floquet(&self) -> FloquetSolution {
        grid_solution(&self.nonresonant, self.config.numerics.n_max, self.sigma)
    }

    pub fn floquet_converged(&self) -> bool {
        self.resonant.nodes.iter().chain(&self.nonresonant.nodes).all(|n| n.payload.converged)
    }

    pub fn max_tail(&self) -> f64 {
        self.resonant.nodes.iter().chain(&self.nonresonant.nodes).map(|n| n.payload.tail).fold(0.0, f64::max)
    }

    pub fn quadrature_converged(&self) -> bool {
        self.resonant.converged && self.nonresonant.converged
    }
}

fn grid_solution(grid: &PanelGrid<FloquetNode>, n_max: usize, sigma: f64) -> FloquetSolution {
    FloquetSolution {
        omega_grid: grid.nodes.iter().map(|n| n.omega).collect(),
        nodes: grid.nodes.iter().map(|n| n.payload.clone()).collect(),
        n_max,
        sigma,
    }
}

/// Builds both quadrature grids adaptively, solving the Floquet system at every node.
pub fn solve_engine(config: &EngineConfig) -> Result<EngineSolution> {
    config.validate()?;
    let stability = check_stability(config)?;
    let solver = FloquetSolver::new(config);
    let k_max = config.numerics.k_max();
    let num = &config.numerics;
    let wd = config.network.drive_freq;
    let r = config.reservoirs.len();
    let tau = config.network.period();

    let resonant = adaptive_grid(&[0.0, config.omega_max()], num.panels, num.max_panels, num.quad_tol, |w| {
        let node = solver.solve(w)?;
        let rn = resonant_node(config, &node, 0.0, k_max)?;
        let mut c = vec![0.0; k_max + 2 + r];
        for k in 1..=k_max {
            for a in 0..r {
                let shifted = rn.occ_shift[(k - 1) * r + a];
                for b in 0..r {
                    let p = rn.rate[((k - 1) * r + a) * r + b];
                    let d = rn.occ[b] - shifted;
                    c[k - 1] += tau * k as f64 * wd * p * d;
                    if d > 0.0 {
                        c[k_max] += tau * (w + k as f64 * wd) * p * d;
                        c[k_max + 1] -= tau * w * p * d;
                    } else if d < 0.0 {
                        c[k_max] -= tau * w * p * d;
                        c[k_max + 1] += tau * (w + k as f64 * wd) * p * d;
                    }
                }
            }
        }
        for a in 0..r {
            for b in 0..r {
                c[k_max + 2 + a] += tau * w * rn.static_rate[a * r + b] * (rn.occ[b] - rn.occ[a]);
            }
        }
        Ok((node, c))
    })?;

    let mut bps: Vec<f64> = (0..=k_max).map(|k| k as f64 * wd).collect();
    bps.dedup();
    let nonresonant = adaptive_grid(&bps, num.panels, num.max_panels, num.quad_tol, |w| {
        let node = solver.solve(w)?;
        let en = emission_node(config, &node, 0.0, k_max)?;
        let mut c = vec![0.0; k_max];
        for k in 1..=k_max {
            for a in 0..r {
                for b in 0..r {
                    c[k - 1] += 2.0 * PI * k as f64 * en.rate[((k - 1) * r + a) * r + b] * (en.occ[b] + 0.5);
                }
            }
        }
        Ok((node, c))
    })?;

    Ok(EngineSolution { config: config.clone(), stability, k_max, sigma: solver.sigma(), resonant, nonresonant })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirCurrents {
    pub label: String,
    /// Q̇^{ST}_α, energy gained per unit time by the reservoir.
    pub static_current: f64,
    pub nonresonant: f64,
    pub resonant: f64,
}

impl ReservoirCurrents {
    pub fn total(&self) -> f64 {
        self.static_current + self.nonresonant + self.resonant
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelHeat {
    pub k: usize,
    pub dq_nr: f64,
    pub dq_r: f64,
    pub dq_in: f64,
    pub dq_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatReport {
    /// ΔQ^{NR} ≥ 0.
    pub dq_nr: f64,
    /// ΔQ^{R}.
    pub dq_r: f64,
    /// ΔQ^R_{ℰ→𝒮} ≤ 0.
    pub dq_in: f64,
    /// |ΔQ^R_{ℰ→𝒮}|.
    pub dq_in_magnitude: f64,
    /// ΔQ^R_{ℰ←𝒮} ≥ 0.
    pub dq_out: f64,
    /// W̄_𝒮 = ΔQ^{NR} + ΔQ^{R}; negative when work is extracted.
    pub work: f64,
    pub per_reservoir: Vec<ReservoirCurrents>,
    pub channels: Vec<ChannelHeat>,
    pub k_max: usize,
    /// Last channel's share of Σ_k (|ΔQ^{NR}_k| + |ΔQ^{R}_k|).
    pub k_tail: f64,
    pub k_converged: bool,
}

impl HeatReport {
    pub fn from_table(table: &RateTable, period: f64, k_tail_tol: f64, labels: &[String]) -> Self {
        let r = table.n_res;
        let kk = table.k_max;
        let wd = table.drive_freq;
        let mut channels: Vec<ChannelHeat> =
            (1..=kk).map(|k| ChannelHeat { k, dq_nr: 0.0, dq_r: 0.0, dq_in: 0.0, dq_out: 0.0 }).collect();
        let mut st = vec![0.0; r];
        let mut nr = vec![0.0; r];
        let mut res = vec![0.0; r];

        for node in &table.nonresonant {
            let w = node.omega;
            for k in 1..=kk {
                let kw = k as f64 * wd;
                if w >= kw {
                    continue;
                }
                for a in 0..r {
                    for b in 0..r {
                        let p = table.p_tilde(node, k, a, b);
                        channels[k - 1].dq_nr += period * node.weight * kw * p * (node.occ[b] + 0.5);
                        nr[a] += node.weight * (kw - w) * p * (node.occ[b] + 0.5);
                        nr[b] += node.weight * w * p * (node.occ[b] + 0.5);
                    }
                }
            }
        }
        for node in &table.resonant {
            let w = node.omega;
            for a in 0..r {
                for b in 0..r {
                    st[a] += node.weight * w * node.static_rate[a * r + b] * (node.occ[b] - node.occ[a]);
                }
            }
            for k in 1..=kk {
                let kw = k as f64 * wd;
                let ch = &mut channels[k - 1];
                for a in 0..r {
                    let na_shift = table.occ_shift(node, k, a);
                    for b in 0..r {
                        let p = table.p(node, k, a, b);
                        let d = node.occ[b] - na_shift;
                        let hi = period * node.weight * (w + kw) * p * d;
                        let lo = period * node.weight * w * p * d;
                        ch.dq_r += period * node.weight * kw * p * d;
                        if d > 0.0 {
                            ch.dq_out += hi;
                            ch.dq_in -= lo;
                        } else if d < 0.0 {
                            ch.dq_out -= lo;
                            ch.dq_in += hi;
                        }
                        // (ω + kω_d) enters α, ω leaves β
                        res[a] += node.weight * (w + kw) * p * d;
                        res[b] -= node.weight * w * p * d;
                    }
                }
            }
        }
        let dq_nr: f64 = channels.iter().map(|c| c.dq_nr).sum();
        let dq_r: f64 = channels.iter().map(|c| c.dq_r).sum();
        let dq_in: f64 = channels.iter().map(|c| c.dq_in).sum();
        let dq_out: f64 = channels.iter().map(|c| c.dq_out).sum();
        let total: f64 = channels.iter().map(|c| c.dq_nr.abs() + c.dq_r.abs()).sum();
        let last = channels.last().map(|c| c.dq_nr.abs() + c.dq_r.abs()).unwrap_or(0.0);
        let k_tail = if total > 0.0 { last / total } else { 0.0 };
        let per_reservoir = (0..r)
            .map(|a| ReservoirCurrents {
                label: labels.get(a).cloned().unwrap_or_else(|| format!("reservoir{a}")),
                static_current: st[a],
                nonresonant: nr[a],
                resonant: res[a],
            })
            .collect();
        Self {
            dq_nr,
            dq_r,
            dq_in,
            dq_in_magnitude: -dq_in,
            dq_out,
            work: dq_nr + dq_r,
            per_reservoir,
            channels,
            k_max: kk,
            k_tail,
            k_converged: k_tail <= k_tail_tol,
        }
    }

    pub fn from_solution(sol: &EngineSolution) -> Result<Self> {
        let table = RateTable::from_solution(sol)?;
        Ok(Self::from_table(&table, sol.config.network.period(), sol.config.numerics.k_tail_tol, &labels(&sol.config)))
    }
}

pub fn labels(config: &EngineConfig) -> Vec<String> {
    config.reservoirs.iter().map(|r| r.label.clone()).collect()
}

pub fn delta_q_nr(report: &HeatReport) -> f64 {
    report.dq_nr
}

pub fn delta_q_r(report: &HeatReport) -> f64 {
    report.dq_r
}

/// (|ΔQ^R_{ℰ→𝒮}|, ΔQ^R_{ℰ←𝒮}).
pub fn split_heat(report: &HeatReport) -> (f64, f64) {
    (report.dq_in_magnitude, report.dq_out)
}

pub fn per_reservoir_currents(report: &HeatReport) -> &[ReservoirCurrents] {
    &report.per_reservoir
}

pub fn average_work(report: &HeatReport) -> f64 {
    report.work
}

/// Occupation-independent check matrix used by tests: (π/2) tr[I_a A I_b A†].
pub fn trace_rate(i_a: &DMatrix<f64>, a: &CMat, i_b: &DMatrix<f64>) -> f64 {
    let ia = i_a.map(|v| Complex64::new(v, 0.0));
    let ib = i_b.map(|v| Complex64::new(v, 0.0));
    FRAC_PI_2 * (ia * a * ib * a.adjoint()).trace().re
}
