//! Brute-force validator: Gaussian covariance dynamics of the network coupled to
//! finitely many bath modes, evolved in the interaction picture of the free baths.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::OracleSettings;
use crate::error::{Error, Result};
use crate::model::{EngineConfig, OccupationModel, ReservoirSpec};
use crate::report::sig17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathMode {
    pub omega: f64,
    /// c_j, one entry per oscillator of the network.
    pub coupling: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedBath {
    pub label: String,
    pub modes: Vec<BathMode>,
    pub span: (f64, f64),
    pub spacing: f64,
    /// Time after which the discrete bath starts to revive: 2π/Δω, or π/Δω when
    /// squeezing adds correlations rotating at 2ω_j.
    pub horizon: f64,
    /// The band reaches the one-quantum drive frequency.
    pub covers_drive_band: bool,
}

impl DiscretizedBath {
    /// Σ_j c_j c_jᵀ/ω_j², the bath-induced static shift of the potential.
    pub fn static_shift(&self, n: usize) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(n, n);
        for m in &self.modes {
            let c = DVector::from_column_slice(&m.coupling);
            s += &c * c.transpose() / (m.omega * m.omega);
        }
        s
    }
}

/// Equally spaced midpoint modes on `span` with c_j = u·sqrt(J(ω_j) ω_j Δω).
pub fn build_bath(spec: &ReservoirSpec, n_modes: usize, span: (f64, f64), drive_freq: f64) -> Result<DiscretizedBath> {
    let (lo, hi) = span;
    if n_modes < 2 {
        return Err(Error::Domain(format!("a bath needs at least two modes, got {n_modes}")));
    }
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Domain(format!("invalid bath span [{lo}, {hi}]")));
    }
    let dw = (hi - lo) / n_modes as f64;
    let squeezed = matches!(spec.occupation, OccupationModel::SqueezedThermal { r, .. } if r != 0.0);
    let modes = (0..n_modes)
        .map(|j| {
            let w = lo + (j as f64 + 0.5) * dw;
            let g = (spec.density.j(w) * w * dw).sqrt();
            BathMode { omega: w, coupling: spec.density.projector.iter().map(|u| u * g).collect() }
        })
        .collect();
    Ok(DiscretizedBath {
        label: spec.label.clone(),
        modes,
        span,
        spacing: dw,
        horizon: if squeezed { PI / dw } else { 2.0 * PI / dw },
        covers_drive_band: hi >= drive_freq,
    })
}

/// Network plus discretized baths; state ordering is (X, P, Q_1, Π_1, Q_2, Π_2, …).
#[derive(Debug, Clone)]
pub struct OracleModel {
    pub n: usize,
    pub minv: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    /// Bare static potential, chosen so that V_0 − Σ c cᵀ/ω² equals the
    /// renormalized stiffness of the continuum model.
    pub v0: DMatrix<f64>,
    pub harmonics: Vec<(i32, DMatrix<f64>)>,
    pub drive_freq: f64,
    pub omegas: Vec<f64>,
    /// n × N, column j holds c_j.
    pub coupling: DMatrix<f64>,
    pub baths: Vec<Range<usize>>,
    pub labels: Vec<String>,
    pub horizon: f64,
}

impl OracleModel {
    pub fn new(config: &EngineConfig, baths: &[DiscretizedBath]) -> Result<Self> {
        let n = config.network.n_osc;
        let total: usize = baths.iter().map(|b| b.modes.len()).sum();
        let mut omegas = Vec::with_capacity(total);
        let mut coupling = DMatrix::zeros(n, total);
        let mut ranges = Vec::new();
        let mut shift = DMatrix::zeros(n, n);
        for b in baths {
            let start = omegas.len();
            for m in &b.modes {
                for i in 0..n {
                    coupling[(i, omegas.len())] = m.coupling[i];
                }
                omegas.push(m.omega);
            }
            ranges.push(start..omegas.len());
            shift += b.static_shift(n);
        }
        let minv = config
            .network
            .mass
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidModel("singular mass matrix".into()))?;
        Ok(Self {
            n,
            minv,
            mass: config.network.mass.clone(),
            v0: config.renormalized_stiffness() + shift,
            harmonics: config.network.v_fourier.iter().map(|(&m, v)| (m, v.clone())).collect(),
            drive_freq: config.network.drive_freq,
            omegas,
            coupling,
            baths: ranges,
            labels: baths.iter().map(|b| b.label.clone()).collect(),
            horizon: baths.iter().map(|b| b.horizon).fold(f64::INFINITY, f64::min),
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 2 * self.omegas.len()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.drive_freq
    }

    pub fn potential(&self, t: f64) -> DMatrix<f64> {
        let mut v = self.v0.clone();
        for (m, vm) in &self.harmonics {
            v += vm * (*m as f64 * self.drive_freq * t).cos();
        }
        v
    }

    pub fn potential_rate(&self, t: f64) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(self.n, self.n);
        for (m, vm) in &self.harmonics {
            let w = *m as f64 * self.drive_freq;
            v -= vm * (w * (w * t).sin());
        }
        v
    }

    /// Highest frequency the integrator has to resolve.
    pub fn top_frequency(&self) -> f64 {
        let bath = self.omegas.iter().copied().fold(0.0, f64::max);
        let mut k = self.v0.clone();
        for (_, vm) in &self.harmonics {
            k += vm.abs();
        }
        let sys = (&self.minv * k).complex_eigenvalues().iter().map(|z| z.norm().sqrt()).fold(0.0, f64::max);
        bath.max(sys).max(self.drive_freq)
    }

    /// a_i(t): P_i feels −a_iᵀz from the baths.
    fn a_vec(&self, i: usize, t: f64, out: &mut DVector<f64>) {
        let o = 2 * self.n;
        out.fill(0.0);
        for (j, &w) in self.omegas.iter().enumerate() {
            let (s, c) = (w * t).sin_cos();
            let cj = self.coupling[(i, j)];
            out[o + 2 * j] = cj * c;
            out[o + 2 * j + 1] = cj * s / w;
        }
    }

    /// b_i(t): bath rows receive b_i X_i.
    fn b_vec(&self, i: usize, t: f64, out: &mut DVector<f64>) {
        let o = 2 * self.n;
        out.fill(0.0);
        for (j, &w) in self.omegas.iter().enumerate() {
            let (s, c) = (w * t).sin_cos();
            let cj = self.coupling[(i, j)];
            out[o + 2 * j] = cj * s / w;
            out[o + 2 * j + 1] = -cj * c;
        }
    }

    /// Left factors W(t) of the generator A(t) = Σ_r w_r ρ_rᵀ with ρ = (e_X, e_P, a(t)).
    fn left_factors(&self, t: f64) -> DMatrix<f64> {
        let n = self.n;
        let d = self.dim();
        let v = self.potential(t);
        let mut w = DMatrix::zeros(d, 3 * n);
        let mut tmp = DVector::zeros(d);
        for k in 0..n {
            self.b_vec(k, t, &mut tmp);
            w.set_column(k, &tmp);
            for i in 0..n {
                w[(n + i, k)] -= v[(i, k)];
                w[(i, n + k)] = self.minv[(i, k)];
            }
            w[(n + k, 2 * n + k)] = -1.0;
        }
        w
    }

    fn right_factors(&self, t: f64) -> DMatrix<f64> {
        let n = self.n;
        let d = self.dim();
        let mut r = DMatrix::zeros(d, 3 * n);
        let mut tmp = DVector::zeros(d);
        for k in 0..n {
            r[(k, k)] = 1.0;
            r[(n + k, n + k)] = 1.0;
            self.a_vec(k, t, &mut tmp);
            r.set_column(2 * n + k, &tmp);
        }
        r
    }

    /// Dense lab-frame generator, for small validation runs.
    pub fn lab_generator(&self, t: f64) -> DMatrix<f64> {
        let n = self.n;
        let d = self.dim();
        let o = 2 * n;
        let v = self.potential(t);
        let mut a = DMatrix::zeros(d, d);
        for i in 0..n {
            for k in 0..n {
                a[(i, n + k)] = self.minv[(i, k)];
                a[(n + i, k)] = -v[(i, k)];
            }
        }
        for (j, &w) in self.omegas.iter().enumerate() {
            a[(o + 2 * j, o + 2 * j + 1)] = 1.0;
            a[(o + 2 * j + 1, o + 2 * j)] = -w * w;
            for i in 0..n {
                let c = self.coupling[(i, j)];
                a[(n + i, o + 2 * j)] = -c;
                a[(o + 2 * j + 1, i)] = -c;
            }
        }
        a
    }

    /// Symplectic map from interaction-picture to lab-frame coordinates at time t.
    pub fn to_lab(&self, t: f64) -> DMatrix<f64> {
        let d = self.dim();
        let o = 2 * self.n;
        let mut f = DMatrix::identity(d, d);
        for (j, &w) in self.omegas.iter().enumerate() {
            let (s, c) = (w * t).sin_cos();
            let q = o + 2 * j;
            f[(q, q)] = c;
            f[(q, q + 1)] = s / w;
            f[(q + 1, q)] = -w * s;
            f[(q + 1, q + 1)] = c;
        }
        f
    }

    pub fn symplectic_form(&self) -> DMatrix<f64> {
        let d = self.dim();
        let n = self.n;
        let o = 2 * n;
        let mut j = DMatrix::zeros(d, d);
        for i in 0..n {
            j[(i, n + i)] = 1.0;
            j[(n + i, i)] = -1.0;
        }
        for k in 0..self.omegas.len() {
            j[(o + 2 * k, o + 2 * k + 1)] = 1.0;
            j[(o + 2 * k + 1, o + 2 * k)] = -1.0;
        }
        j
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    /// σ_ij = ½⟨{z_i, z_j}⟩ in interaction-picture coordinates.
    pub sigma: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub time: f64,
}

impl CovarianceState {
    /// Smallest eigenvalue of σ + (i/2)J; nonnegative for physical states.
    pub fn physicality(&self, model: &OracleModel) -> f64 {
        let j = model.symplectic_form();
        let h = DMatrix::from_fn(self.sigma.nrows(), self.sigma.ncols(), |a, b| {
            Complex64::new(self.sigma[(a, b)], 0.5 * j[(a, b)])
        });
        h.symmetric_eigenvalues().min()
    }

    pub fn bath_energy(&self, model: &OracleModel, bath: usize) -> f64 {
        let o = 2 * model.n;
        model.baths[bath]
            .clone()
            .map(|j| {
                let w = model.omegas[j];
                0.5 * (self.sigma[(o + 2 * j + 1, o + 2 * j + 1)] + w * w * self.sigma[(o + 2 * j, o + 2 * j)])
            })
            .sum()
    }
}

/// Ground state of the static network, baths in (possibly squeezed) thermal states.
pub fn initial_covariance(model: &OracleModel, config: &EngineConfig, squeeze_angle: f64) -> Result<CovarianceState> {
    let n = model.n;
    let d = model.dim();
    let o = 2 * n;
    let mut sigma = DMatrix::zeros(d, d);

    // H_S = PᵀM⁻¹P/2 + XᵀKX/2 with K the renormalized stiffness
    let k = config.renormalized_stiffness();
    let mh = model.mass.clone().symmetric_eigen();
    if mh.eigenvalues.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidModel("mass matrix is not positive definite".into()));
    }
    let m_half = &mh.eigenvectors * DMatrix::from_diagonal(&mh.eigenvalues.map(f64::sqrt)) * mh.eigenvectors.transpose();
    let m_mhalf = &mh.eigenvectors * DMatrix::from_diagonal(&mh.eigenvalues.map(|v| 1.0 / v.sqrt())) * mh.eigenvectors.transpose();
    let dyn_mat = &m_mhalf * &k * &m_mhalf;
    let eig = ((&dyn_mat + dyn_mat.transpose()) * 0.5).symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidModel("static network is not stable; no ground state".into()));
    }
    let freqs = eig.eigenvalues.map(f64::sqrt);
    let vv = &eig.eigenvectors;
    let xx = &m_mhalf * vv * DMatrix::from_diagonal(&freqs.map(|w| 0.5 / w)) * vv.transpose() * &m_mhalf;
    let pp = &m_half * vv * DMatrix::from_diagonal(&freqs.map(|w| 0.5 * w)) * vv.transpose() * &m_half;
    sigma.view_mut((0, 0), (n, n)).copy_from(&xx);
    sigma.view_mut((n, n), (n, n)).copy_from(&pp);

    let (sa, ca) = squeeze_angle.sin_cos();
    for (b, range) in model.baths.iter().enumerate() {
        let spec = &config.reservoirs[b];
        for j in range.clone() {
            let w = model.omegas[j];
            let (nth, r) = match spec.occupation {
                OccupationModel::Thermal { temperature } => (1.0 / (w / temperature).exp_m1(), 0.0),
                OccupationModel::SqueezedThermal { temperature, r } => (1.0 / (w / temperature).exp_m1(), r),
                OccupationModel::Tabulated { .. } => (spec.occupation.occupation(w)?, 0.0),
            };
            if !(nth >= 0.0) {
                return Err(Error::Domain(format!("negative occupation {nth} at omega = {w}")));
            }
            // scaled quadratures (√ω Q, Π/√ω): (n+½) R diag(e^{-2r}, e^{2r}) Rᵀ
            let f = nth + 0.5;
            let (em, ep) = ((-2.0 * r).exp(), (2.0 * r).exp());
            let s_qq = f * (ca * ca * em + sa * sa * ep);
            let s_pp = f * (sa * sa * em + ca * ca * ep);
            let s_qp = f * ca * sa * (em - ep);
            let q = o + 2 * j;
            sigma[(q, q)] = s_qq / w;
            sigma[(q + 1, q + 1)] = s_pp * w;
            sigma[(q, q + 1)] = s_qp;
            sigma[(q + 1, q)] = s_qp;
        }
    }
    Ok(CovarianceState { sigma, mean: DVector::zeros(d), time: 0.0 })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Per bath, ⟨H_{ℰ_α}⟩ at every sample.
    pub bath_energy: Vec<Vec<f64>>,
    pub system_energy: Vec<f64>,
    pub interaction_energy: Vec<f64>,
    /// tr[V̇ σ_XX]/2.
    pub power: Vec<f64>,
    pub labels: Vec<String>,
    pub dt: f64,
}

impl Trajectory {
    pub fn total_energy(&self, i: usize) -> f64 {
        self.system_energy[i] + self.interaction_energy[i] + self.bath_energy.iter().map(|b| b[i]).sum::<f64>()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for l in &self.labels {
            let _ = write!(s, ",E_{l}");
        }
        s.push_str(",E_total\n");
        for i in 0..self.times.len() {
            s.push_str(&sig17(self.times[i]));
            for b in &self.bath_energy {
                s.push(',');
                s.push_str(&sig17(b[i]));
            }
            s.push(',');
            s.push_str(&sig17(self.total_energy(i)));
            s.push('\n');
        }
        s
    }
}

fn record(model: &OracleModel, state: &CovarianceState, y: &DMatrix<f64>, traj: &mut Trajectory) {
    let n = model.n;
    let t = state.time;
    let sxx = state.sigma.view((0, 0), (n, n));
    let spp = state.sigma.view((n, n), (n, n));
    let v = model.potential(t);
    let vdot = model.potential_rate(t);
    let h_s = 0.5 * ((&model.minv * spp).trace() + (&v * sxx).trace());
    let h_se: f64 = (0..n).map(|i| y[(i, i)]).sum();
    traj.times.push(t);
    for (b, series) in traj.bath_energy.iter_mut().enumerate() {
        series.push(state.bath_energy(model, b));
    }
    traj.system_energy.push(h_s);
    traj.interaction_energy.push(h_se);
    traj.power.push(0.5 * (&vdot * sxx).trace());
}

/// Integrates σ̇ = Aσ + σAᵀ with classic RK4. In the bath interaction picture
/// A(t) has rank 3n, so every stage is a low-rank correction of the step's
/// starting covariance and the update costs one rank-24n product.
pub struct Integrator<'a> {
    model: &'a OracleModel,
}

impl<'a> Integrator<'a> {
    pub fn new(model: &'a OracleModel) -> Self {
        Self { model }
    }

    /// σ R(t) for the columns (e_X, e_P, a(t)).
    fn base_columns(&self, sigma: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.model.n;
        let r = self.model.right_factors(t);
        let mut u = DMatrix::zeros(sigma.nrows(), 3 * n);
        u.columns_mut(0, 2 * n).copy_from(&sigma.columns(0, 2 * n));
        let mut col = DVector::zeros(sigma.nrows());
        for k in 0..n {
            col.gemv(1.0, sigma, &r.column(2 * n + k), 0.0);
            u.set_column(2 * n + k, &col);
        }
        (u, r)
    }

    /// One RK4 step. When `traj` is given, the state at the step start is recorded.
    pub fn step(&self, state: &mut CovarianceState, h: f64, traj: Option<&mut Trajectory>) {
        let t = state.time;
        let n = self.model.n;
        let times = [t, t + 0.5 * h, t + 0.5 * h, t + h];
        let coef = [0.0, 0.5 * h, 0.5 * h, h];
        let weights = [h / 6.0, h / 3.0, h / 3.0, h / 6.0];
        let (base_mid, r_mid) = self.base_columns(&state.sigma, times[1]);
        let mut us: Vec<DMatrix<f64>> = Vec::with_capacity(4);
        let mut ws: Vec<DMatrix<f64>> = Vec::with_capacity(4);
        for s in 0..4 {
            let (mut u, r) = if s == 1 || s == 2 {
                (base_mid.clone(), r_mid.clone())
            } else {
                self.base_columns(&state.sigma, times[s])
            };
            if s > 0 {
                // (σ + c(W Uᵀ + U Wᵀ)) R
                let (wp, up) = (&ws[s - 1], &us[s - 1]);
                let c = coef[s];
                u += wp * (up.transpose() * &r) * c + up * (wp.transpose() * &r) * c;
            }
            ws.push(self.model.left_factors(times[s]));
            us.push(u);
        }
        if let Some(traj) = traj {
            let y = us[0].view((0, 2 * n), (n, n)).into_owned();
            record(self.model, state, &y, traj);
        }
        let d = state.sigma.nrows();
        let k = 3 * n;
        let mut left = DMatrix::zeros(d, 8 * k);
        let mut right = DMatrix::zeros(d, 8 * k);
        for s in 0..4 {
            left.columns_mut(s * k, k).copy_from(&(&ws[s] * weights[s]));
            right.columns_mut(s * k, k).copy_from(&us[s]);
            left.columns_mut((4 + s) * k, k).copy_from(&(&us[s] * weights[s]));
            right.columns_mut((4 + s) * k, k).copy_from(&ws[s]);
        }
        state.sigma.gemm(1.0, &left, &right.transpose(), 1.0);
        state.time = t + h;
    }
}

fn new_trajectory(model: &OracleModel, dt: f64) -> Trajectory {
    Trajectory {
        bath_energy: vec![Vec::new(); model.baths.len()],
        labels: model.labels.clone(),
        dt,
        ..Default::default()
    }
}

/// Evolves `steps` fixed steps of size `dt`, recording the state before every step.
pub fn evolve(model: &OracleModel, state: &mut CovarianceState, dt: f64, steps: usize) -> Result<Trajectory> {
    let t_final = state.time + dt * steps as f64;
    if t_final > model.horizon {
        return Err(Error::StaleWindow(format!(
            "final time {t_final:.4} exceeds the bath recurrence horizon {:.4}",
            model.horizon
        )));
    }
    let limit = 0.05 * 2.0 * PI / model.top_frequency();
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("step {dt} does not resolve the top frequency (need <= {limit})")));
    }
    let integ = Integrator::new(model);
    let mut traj = new_trajectory(model, dt);
    for _ in 0..steps {
        integ.step(state, dt, Some(&mut traj));
    }
    Ok(traj)
}

/// Relative max-norm difference between one and two half steps over `steps` steps.
pub fn step_halving_error(model: &OracleModel, state: &CovarianceState, dt: f64, steps: usize) -> f64 {
    let integ = Integrator::new(model);
    let mut coarse = state.clone();
    let mut fine = state.clone();
    for _ in 0..steps {
        integ.step(&mut coarse, dt, None);
        integ.step(&mut fine, 0.5 * dt, None);
        integ.step(&mut fine, 0.5 * dt, None);
    }
    (&coarse.sigma - &fine.sigma).amax() / fine.sigma.amax()
}

/// Dense lab-frame RK4 for the fundamental matrix Φ̇ = A(t)Φ.
pub fn fundamental_matrix(model: &OracleModel, t0: f64, t1: f64, steps: usize) -> DMatrix<f64> {
    let d = model.dim();
    let h = (t1 - t0) / steps as f64;
    let mut phi = DMatrix::identity(d, d);
    for i in 0..steps {
        let t = t0 + h * i as f64;
        let a0 = model.lab_generator(t);
        let am = model.lab_generator(t + 0.5 * h);
        let a1 = model.lab_generator(t + h);
        let k1 = &a0 * &phi;
        let k2 = &am * (&phi + &k1 * (0.5 * h));
        let k3 = &am * (&phi + &k2 * (0.5 * h));
        let k4 = &a1 * (&phi + &k3 * h);
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    phi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedCurrents {
    pub labels: Vec<String>,
    /// Least-squares slope of the period-averaged bath energy, per bath.
    pub bath_currents: Vec<f64>,
    /// Standard error of each slope.
    pub bath_stderr: Vec<f64>,
    /// Window average of the injected power.
    pub power: f64,
    /// |curvature|·window / |slope| scale from a quadratic fit, per bath.
    pub curvature: Vec<f64>,
    /// Period average of d⟨H_S + H_SE⟩/dt over the window (vanishes when stationary).
    pub system_drift: f64,
    pub window: (f64, f64),
    pub periods: usize,
}

fn polyfit(x: &[f64], y: &[f64], degree: usize) -> (DVector<f64>, f64) {
    let a = DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&b, 1e-14).expect("svd solve");
    let resid = (&a * &coef - &b).norm_squared();
    let dof = (x.len() as f64 - (degree + 1) as f64).max(1.0);
    let ata_inv = (a.transpose() * &a).try_inverse().unwrap_or_else(|| DMatrix::zeros(degree + 1, degree + 1));
    let se = (resid / dof * ata_inv[(1, 1)]).sqrt();
    (coef, se)
}

/// Slopes of per-period bath-energy averages over the last `window` periods.
pub fn fit_currents(traj: &Trajectory, steps_per_period: usize, skip_periods: usize, window: usize, stale_tol: f64) -> Result<FittedCurrents> {
    let spp = steps_per_period;
    let available = traj.times.len() / spp;
    if available < skip_periods + window || window < 3 {
        return Err(Error::Domain(format!(
            "trajectory holds {available} periods; need {} (transient {skip_periods} + window {window}, window >= 3)",
            skip_periods + window
        )));
    }
    let periods: Vec<usize> = (skip_periods..skip_periods + window).collect();
    let mean_over = |series: &[f64], p: usize| series[p * spp..(p + 1) * spp].iter().sum::<f64>() / spp as f64;
    let centers: Vec<f64> = periods.iter().map(|&p| mean_over(&traj.times, p)).collect();
    let t_mid = 0.5 * (centers[0] + centers[centers.len() - 1]);
    let span = centers[centers.len() - 1] - centers[0];
    let x: Vec<f64> = centers.iter().map(|t| (t - t_mid) / span).collect();

    let mut bath_currents = Vec::new();
    let mut bath_stderr = Vec::new();
    let mut curvature = Vec::new();
    for series in &traj.bath_energy {
        let y: Vec<f64> = periods.iter().map(|&p| mean_over(series, p)).collect();
        let (lin, se) = polyfit(&x, &y, 1);
        let (quad, _) = polyfit(&x, &y, 2);
        bath_currents.push(lin[1] / span);
        bath_stderr.push(se / span);
        curvature.push(quad[2]);
    }
    let lo_i = skip_periods * spp;
    let hi_i = (skip_periods + window) * spp;
    let held = (lo_i..hi_i).map(|i| (traj.system_energy[i] + traj.interaction_energy[i]).abs()).sum::<f64>() / (hi_i - lo_i) as f64;
    let level = traj.bath_energy.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    let scale = (bath_currents.iter().fold(0.0f64, |a, b| a.max(b.abs())) * span).max(held).max(1e-12 * level);
    for (i, c) in curvature.iter_mut().enumerate() {
        *c = if scale > 0.0 { c.abs() / scale } else { 0.0 };
        if *c > stale_tol {
            return Err(Error::StaleWindow(format!(
                "bath {:?} energy is not linear over the window (curvature ratio {:.3e})",
                traj.labels[i], c
            )));
        }
    }
    let lo = skip_periods * spp;
    let hi = (skip_periods + window) * spp;
    let power = traj.power[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    let inner: Vec<f64> = (0..traj.times.len()).map(|i| traj.system_energy[i] + traj.interaction_energy[i]).collect();
    let first = skip_periods;
    let last = skip_periods + window - 1;
    let system_drift = (mean_over(&inner, last) - mean_over(&inner, first)) / (centers[centers.len() - 1] - centers[0]);
    Ok(FittedCurrents {
        labels: traj.labels.clone(),
        bath_currents,
        bath_stderr,
        power,
        curvature,
        system_drift,
        window: (traj.times[lo], traj.times[hi - 1] + traj.dt),
        periods: window,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRun {
    pub settings: OracleSettings,
    pub baths: Vec<DiscretizedBath>,
    pub dt: f64,
    pub steps_per_period: usize,
    pub step_error: f64,
    pub trajectory: Trajectory,
    pub fit: FittedCurrents,
}

pub fn build_model(config: &EngineConfig, settings: &OracleSettings) -> Result<(OracleModel, Vec<DiscretizedBath>)> {
    let baths = config
        .reservoirs
        .iter()
        .map(|r| {
            let lam = r.density.profile.cutoff();
            build_bath(r, settings.n_modes, (settings.span[0] * lam, settings.span[1] * lam), config.network.drive_freq)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((OracleModel::new(config, &baths)?, baths))
}

/// Full oracle run: discretize, prepare, check the step, evolve, fit.
pub fn run_oracle(config: &EngineConfig, settings: &OracleSettings) -> Result<OracleRun> {
    let (model, baths) = build_model(config, settings)?;
    let tau = model.period();
    let spp = match settings.dt {
        Some(dt) => (tau / dt).round().max(1.0) as usize,
        None => {
            let needed = (tau * model.top_frequency() / (0.05 * 2.0 * PI)).ceil() as usize;
            settings.steps_per_period.max(needed)
        }
    };
    let dt = tau / spp as f64;
    let skip = (settings.transient_frac * settings.periods as f64).ceil() as usize;
    let total = skip + settings.periods;
    let mut state = initial_covariance(&model, config, settings.squeeze_angle)?;
    if total as f64 * tau > model.horizon {
        return Err(Error::StaleWindow(format!(
            "{total} periods ({:.4}) exceed the bath recurrence horizon {:.4}",
            total as f64 * tau,
            model.horizon
        )));
    }
    let step_error = step_halving_error(&model, &state, dt, spp);
    if step_error > settings.step_tol {
        return Err(Error::Accuracy(format!(
            "step halving changes the covariance by {step_error:.3e} over one period (tolerance {:.1e})",
            settings.step_tol
        )));
    }
    let trajectory = evolve(&model, &mut state, dt, total * spp)?;
    let fit = fit_currents(&trajectory, spp, skip, settings.periods, STALE_TOL)?;
    Ok(OracleRun { settings: settings.clone(), baths, dt, steps_per_period: spp, step_error, trajectory, fit })
}

/// Largest tolerated |quadratic term| relative to the linear change across the window.
pub const STALE_TOL: f64 = 0.1;
