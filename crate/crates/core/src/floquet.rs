//! Laplace–Floquet coefficients Ã_n(s) of the dressed Green's function.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EngineConfig, SpectralProfile};
use crate::quadrature::integrate_complex;

pub type CMat = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn complexify(m: &DMatrix<f64>) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Φ(s) = ∫₀^W [J(ω)/ω] s/(s²+ω²) dω.
///
/// Each partial fraction ½/(x + i(y ∓ ω)) has the density subtracted at its
/// pole (clamped into the range) and added back through the exact logarithm.
pub fn kernel_scalar(profile: &SpectralProfile, s: Complex64, tol: f64) -> Result<Complex64> {
    let (x, y) = (s.re, s.im);
    if !(x >= 0.0) || !x.is_finite() || !y.is_finite() {
        return Err(Error::Domain(format!("kernel needs Re s >= 0, got {s}")));
    }
    if x == 0.0 && y == 0.0 {
        return Err(Error::Domain("kernel undefined at s = 0".into()));
    }
    if profile.strength() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let top = profile.span();
    let a_plus = y.clamp(0.0, top);
    let a_minus = (-y).clamp(0.0, top);
    let w_plus = profile.weight(a_plus);
    let w_minus = profile.weight(a_minus);
    let log_plus = I * (Complex64::new(x, y - top).ln() - s.ln());
    let log_minus = -I * (Complex64::new(x, y + top).ln() - s.ln());
    let analytic = 0.5 * (w_plus * log_plus + w_minus * log_minus);

    let integrand = |w: f64| {
        let wt = profile.weight(w);
        0.5 * ((wt - w_plus) / Complex64::new(x, y - w) + (wt - w_minus) / Complex64::new(x, y + w))
    };
    let mut bps = vec![0.0, a_plus, a_minus, top];
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let scale = analytic.norm() + profile.static_shift() / s.norm().max(f64::MIN_POSITIVE) * 1e-3;
    let est = integrate_complex(integrand, &bps, tol * scale, tol, 4000)?;
    Ok(analytic + est.value)
}

/// Assembles g̃⁻¹(s) = M s² + ω_r² + s γ̃(s), grouping reservoirs that share a profile shape.
#[derive(Debug, Clone)]
pub struct GreenInverse {
    mass: CMat,
    stiffness: CMat,
    groups: Vec<(SpectralProfile, CMat)>,
    tol: f64,
}

impl GreenInverse {
    pub fn new(config: &EngineConfig) -> Self {
        let mut groups: Vec<(SpectralProfile, DMatrix<f64>)> = Vec::new();
        for r in &config.reservoirs {
            let shape = r.density.profile.unit_shape();
            let u = &r.density.projector;
            let p = u * u.transpose() * r.density.profile.strength();
            match groups.iter_mut().find(|(g, _)| *g == shape) {
                Some((_, acc)) => *acc += p,
                None => groups.push((shape, p)),
            }
        }
        Self {
            mass: complexify(&config.network.mass),
            stiffness: complexify(&config.renormalized_stiffness()),
            groups: groups.into_iter().map(|(g, p)| (g, complexify(&p))).collect(),
            tol: config.numerics.kernel_tol,
        }
    }

    pub fn kernel(&self, s: Complex64) -> Result<CMat> {
        let n = self.mass.nrows();
        let mut k = CMat::zeros(n, n);
        for (shape, p) in &self.groups {
            let phi = kernel_scalar(shape, s, self.tol)?;
            k += p * phi;
        }
        Ok(k)
    }

    pub fn eval(&self, s: Complex64) -> Result<CMat> {
        Ok(&self.mass * (s * s) + &self.stiffness + self.kernel(s)? * s)
    }
}

pub fn dissipation_kernel_laplace(config: &EngineConfig, s: Complex64) -> Result<CMat> {
    GreenInverse::new(config).kernel(s)
}

pub fn static_green_inverse(config: &EngineConfig, s: Complex64) -> Result<CMat> {
    GreenInverse::new(config).eval(s)
}

/// Floquet coefficients at a single frequency, with truncation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetNode {
    pub omega: f64,
    /// Truncation actually used (≥ the stored range).
    pub n_used: usize,
    /// max ‖Ã_{±N}‖_F / ‖Ã_0‖_F at the used truncation.
    pub tail: f64,
    pub converged: bool,
    pub condition: f64,
    /// Ã_n for n = −n_max..=n_max.
    pub coeffs: Vec<CMat>,
}

impl FloquetNode {
    pub fn n_max(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn coeff(&self, n: i32) -> Option<&CMat> {
        let idx = n + self.n_max() as i32;
        if idx < 0 {
            None
        } else {
            self.coeffs.get(idx as usize)
        }
    }
}

pub struct FloquetSolver<'a> {
    config: &'a EngineConfig,
    green: GreenInverse,
    sigma: f64,
}

impl<'a> FloquetSolver<'a> {
    pub fn new(config: &'a EngineConfig) -> Self {
        Self { config, green: GreenInverse::new(config), sigma: config.sigma() }
    }

    pub fn with_sigma(config: &'a EngineConfig, sigma: f64) -> Self {
        Self { config, green: GreenInverse::new(config), sigma }
    }

    pub fn green(&self) -> &GreenInverse {
        &self.green
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Solves for Ã_n(σ + iω), escalating the truncation ×2 until the tail
    /// meets `tail_tol` or `n_cap` is reached.
    pub fn solve(&self, omega: f64) -> Result<FloquetNode> {
        let num = &self.config.numerics;
        let net = &self.config.network;
        let dim = net.n_osc;
        let s0 = Complex64::new(self.sigma, omega);
        let mut diag: HashMap<i32, CMat> = HashMap::new();
        let mut trunc = num.n_max;
        loop {
            for m in -(trunc as i32)..=(trunc as i32) {
                if !diag.contains_key(&m) {
                    let s = s0 + I * (m as f64 * net.drive_freq);
                    diag.insert(m, self.green.eval(s)?);
                }
            }
            let (coeffs, condition) = self.solve_truncated(omega, trunc, &diag)?;
            let norm0 = coeffs[trunc].norm();
            let tail = if norm0 > 0.0 {
                coeffs[0].norm().max(coeffs[2 * trunc].norm()) / norm0
            } else {
                0.0
            };
            let converged = tail <= num.tail_tol;
            if converged || trunc >= num.n_cap {
                let keep = num.n_max;
                let stored = coeffs[trunc - keep..=trunc + keep].to_vec();
                debug_assert_eq!(stored[keep].nrows(), dim);
                return Ok(FloquetNode { omega, n_used: trunc, tail, converged, condition, coeffs: stored });
            }
            trunc = (2 * trunc).min(num.n_cap);
        }
    }

    fn solve_truncated(
        &self,
        omega: f64,
        trunc: usize,
        diag: &HashMap<i32, CMat>,
    ) -> Result<(Vec<CMat>, f64)> {
        let net = &self.config.network;
        let d = net.n_osc;
        let blocks = 2 * trunc + 1;
        let size = blocks * d;
        let mut a = CMat::zeros(size, size);
        let harmonics: Vec<(i32, CMat)> =
            net.v_fourier.iter().map(|(&m, v)| (m, complexify(v))).collect();
        for bi in 0..blocks {
            let m = bi as i32 - trunc as i32;
            a.view_mut((bi * d, bi * d), (d, d)).copy_from(&diag[&m]);
            for (h, v) in &harmonics {
                let n = m - h;
                if n.unsigned_abs() as usize <= trunc {
                    let bj = (n + trunc as i32) as usize;
                    a.view_mut((bi * d, bj * d), (d, d)).copy_from(v);
                }
            }
        }
        let mut rhs = CMat::zeros(size, d);
        for i in 0..d {
            rhs[(trunc * d + i, i)] = Complex64::new(1.0, 0.0);
        }
        let lu = a.lu();
        let u = lu.u();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..size {
            let v = u[(i, i)].norm();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= self.config.numerics.max_condition) {
            return Err(Error::Singular { omega, condition });
        }
        let x = lu.solve(&rhs).ok_or(Error::Singular { omega, condition })?;
        let coeffs = (0..blocks).map(|b| x.rows(b * d, d).into_owned()).collect();
        Ok((coeffs, condition))
    }
}

pub fn solve_floquet(config: &EngineConfig, omega: f64) -> Result<FloquetNode> {
    FloquetSolver::new(config).solve(omega)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetSolution {
    pub omega_grid: Vec<f64>,
    pub nodes: Vec<FloquetNode>,
    pub n_max: usize,
    pub sigma: f64,
}

impl FloquetSolution {
    pub fn solve(config: &EngineConfig, omega_grid: &[f64]) -> Result<Self> {
        let solver = FloquetSolver::new(config);
        let nodes = omega_grid.par_iter().map(|&w| solver.solve(w)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            omega_grid: omega_grid.to_vec(),
            nodes,
            n_max: config.numerics.n_max,
            sigma: solver.sigma(),
        })
    }

    pub fn coeff(&self, index: usize, n: i32) -> Option<&CMat> {
        self.nodes.get(index).and_then(|node| node.coeff(n))
    }

    pub fn convergence_report(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.tail).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.nodes.iter().all(|n| n.converged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// min_{|n| ≤ N} σ_min(g̃⁻¹(inω_d)) = min ‖g̃(inω_d)‖⁻¹.
    pub lhs: f64,
    /// Σ_{m≠0} ‖V_m‖₂.
    pub rhs: f64,
    pub margin: f64,
    pub worst_harmonic: i32,
    pub stiffness_positive: bool,
    pub pass: bool,
    /// Passing with less than 5% headroom.
    pub marginal: bool,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Diagonal-dominance test for the block operator.
pub fn check_stability(config: &EngineConfig) -> Result<StabilityReport> {
    let green = GreenInverse::new(config);
    let net = &config.network;
    let stiffness = config.renormalized_stiffness();
    let sym = (&stiffness + stiffness.transpose()) * 0.5;
    let stiffness_positive = sym.clone().cholesky().is_some();
    let mut lhs = sym.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &v| a.min(v.abs()));
    let mut worst = 0;
    let n = config.numerics.n_max as i32;
    for h in (-n..=n).filter(|&h| h != 0) {
        let g = green.eval(I * (h as f64 * net.drive_freq))?;
        let smin = g.svd(false, false).singular_values.min();
        if smin < lhs {
            lhs = smin;
            worst = h;
        }
    }
    let rhs: f64 = net.v_fourier.values().map(spectral_norm).sum();
    let margin = lhs - rhs;
    let pass = stiffness_positive && margin > 0.0;
    Ok(StabilityReport {
        lhs,
        rhs,
        margin,
        worst_harmonic: worst,
        stiffness_positive,
        pass,
        marginal: pass && margin < 0.05 * lhs,
    })
}
