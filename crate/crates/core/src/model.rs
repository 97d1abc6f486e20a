//! Working medium, reservoirs, spectral densities and occupations (ħ = k_b = 1).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Pchip;

/// Upper integration limit for bath integrals, in units of the cutoff.
pub const CUTOFF_SPAN: f64 = 60.0;

fn symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= tol * scale
}

/// Oscillator network with periodic potential V(t) = V_0 + Σ_{m≠0} V_m e^{imω_d t}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub n_osc: usize,
    pub mass: DMatrix<f64>,
    pub v0: DMatrix<f64>,
    pub v_fourier: BTreeMap<i32, DMatrix<f64>>,
    pub drive_freq: f64,
}

impl NetworkModel {
    pub fn new(
        mass: DMatrix<f64>,
        v0: DMatrix<f64>,
        v_fourier: BTreeMap<i32, DMatrix<f64>>,
        drive_freq: f64,
    ) -> Result<Self> {
        let model = Self { n_osc: mass.nrows(), mass, v0, v_fourier, drive_freq };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_osc;
        if n == 0 {
            return Err(Error::InvalidModel("network needs at least one oscillator".into()));
        }
        if !(self.drive_freq.is_finite() && self.drive_freq > 0.0) {
            return Err(Error::InvalidModel(format!(
                "drive frequency must be positive, got {}",
                self.drive_freq
            )));
        }
        let square = |name: &str, m: &DMatrix<f64>| -> Result<()> {
            if m.shape() != (n, n) {
                return Err(Error::InvalidModel(format!(
                    "{name} has shape {:?}, expected ({n}, {n})",
                    m.shape()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("{name} has non-finite entries")));
            }
            if !symmetric(m, 1e-12) {
                return Err(Error::InvalidModel(format!("{name} is not symmetric")));
            }
            Ok(())
        };
        square("mass", &self.mass)?;
        square("v0", &self.v0)?;
        if self.mass.clone().cholesky().is_none() {
            return Err(Error::InvalidModel("mass matrix is not positive definite".into()));
        }
        for (&m, vm) in &self.v_fourier {
            if m == 0 {
                return Err(Error::InvalidModel(
                    "static part belongs in v0, not in the Fourier components".into(),
                ));
            }
            square(&format!("V_{m}"), vm)?;
            match self.v_fourier.get(&-m) {
                None => {
                    return Err(Error::InvalidModel(format!(
                        "V_{m} given without its partner V_{}",
                        -m
                    )))
                }
                Some(partner) => {
                    let scale = vm.amax().max(partner.amax()).max(1e-300);
                    if (vm - partner).amax() > 1e-12 * scale {
                        return Err(Error::InvalidModel(format!(
                            "V_{m} differs from V_{}; the drive must satisfy V(t) = V(-t)",
                            -m
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.drive_freq
    }

    /// V_m, with V_0 for m = 0 and zero for absent harmonics.
    pub fn harmonic(&self, m: i32) -> Option<&DMatrix<f64>> {
        if m == 0 {
            Some(&self.v0)
        } else {
            self.v_fourier.get(&m)
        }
    }

    pub fn is_driven(&self) -> bool {
        self.v_fourier.values().any(|v| v.amax() > 0.0)
    }

    /// V(t) = V_0 + Σ V_m cos(mω_d t) (real since V_{-m} = V_m).
    pub fn potential_at(&self, t: f64) -> DMatrix<f64> {
        let mut v = self.v0.clone();
        for (&m, vm) in &self.v_fourier {
            v += vm * (m as f64 * self.drive_freq * t).cos();
        }
        v
    }

    pub fn potential_rate_at(&self, t: f64) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(self.n_osc, self.n_osc);
        for (&m, vm) in &self.v_fourier {
            let w = m as f64 * self.drive_freq;
            v -= vm * (w * (w * t).sin());
        }
        v
    }

    /// Scales every nonzero harmonic by `factor`.
    pub fn with_drive_scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in out.v_fourier.values_mut() {
            *v *= factor;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralProfile {
    /// J(ω) = γ ω e^{-ω/Λ}.
    OhmicExponential { gamma: f64, cutoff: f64 },
}

impl SpectralProfile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SpectralProfile::OhmicExponential { gamma, cutoff } => {
                if !(gamma.is_finite() && gamma >= 0.0) {
                    return Err(Error::InvalidModel(format!("coupling strength {gamma} must be >= 0")));
                }
                if !(cutoff.is_finite() && cutoff > 0.0) {
                    return Err(Error::InvalidModel(format!("cutoff {cutoff} must be positive")));
                }
                Ok(())
            }
        }
    }

    pub fn j(&self, w: f64) -> f64 {
        match *self {
            SpectralProfile::OhmicExponential { gamma, cutoff } => {
                if w <= 0.0 {
                    0.0
                } else {
                    gamma * w * (-w / cutoff).exp()
                }
            }
        }
    }

    /// J(ω)/ω, the density entering the dissipation kernel.
    pub fn weight(&self, w: f64) -> f64 {
        match *self {
            SpectralProfile::OhmicExponential { gamma, cutoff } => gamma * (-w / cutoff).exp(),
        }
    }

    pub fn strength(&self) -> f64 {
        match *self {
            SpectralProfile::OhmicExponential { gamma, .. } => gamma,
        }
    }

    pub fn cutoff(&self) -> f64 {
        match *self {
            SpectralProfile::OhmicExponential { cutoff, .. } => cutoff,
        }
    }

    /// Same shape with unit strength; the kernel is linear in the strength.
    pub fn unit_shape(&self) -> Self {
        match *self {
            SpectralProfile::OhmicExponential { cutoff, .. } => {
                SpectralProfile::OhmicExponential { gamma: 1.0, cutoff }
            }
        }
    }

    /// Upper limit of the bath frequency integrals.
    pub fn span(&self) -> f64 {
        CUTOFF_SPAN * self.cutoff()
    }

    /// ∫₀^span J(ω)/ω dω.
    pub fn static_shift(&self) -> f64 {
        match *self {
            SpectralProfile::OhmicExponential { gamma, cutoff } => {
                gamma * cutoff * -(-CUTOFF_SPAN).exp_m1()
            }
        }
    }
}

/// I(ω) = J(ω) u uᵀ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub profile: SpectralProfile,
    pub projector: DVector<f64>,
}

impl SpectralDensity {
    pub fn new(profile: SpectralProfile, projector: DVector<f64>) -> Result<Self> {
        let d = Self { profile, projector };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if self.projector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("projector has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn j(&self, w: f64) -> f64 {
        self.profile.j(w)
    }

    pub fn value(&self, w: f64) -> Result<DMatrix<f64>> {
        if !(w >= 0.0) {
            return Err(Error::Domain(format!("spectral density needs omega >= 0, got {w}")));
        }
        Ok(&self.projector * self.projector.transpose() * self.profile.j(w))
    }
}

pub fn spectral_density_value(d: &SpectralDensity, w: f64) -> Result<DMatrix<f64>> {
    d.value(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableData", into = "TableData")]
pub struct OccupationTable(Pchip);

#[derive(Serialize, Deserialize)]
struct TableData {
    omega: Vec<f64>,
    n: Vec<f64>,
}

impl TryFrom<TableData> for OccupationTable {
    type Error = Error;
    fn try_from(t: TableData) -> Result<Self> {
        OccupationTable::new(t.omega, t.n)
    }
}

impl From<OccupationTable> for TableData {
    fn from(t: OccupationTable) -> Self {
        TableData { omega: t.0.x().to_vec(), n: t.0.y().to_vec() }
    }
}

impl OccupationTable {
    pub fn new(omega: Vec<f64>, n: Vec<f64>) -> Result<Self> {
        if n.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidModel("tabulated occupations must be >= 0".into()));
        }
        if omega.first().is_some_and(|&w| w < 0.0) {
            return Err(Error::InvalidModel("tabulated frequencies must be >= 0".into()));
        }
        Ok(Self(Pchip::new(omega, n)?))
    }

    pub fn range(&self) -> (f64, f64) {
        self.0.range()
    }

    pub fn eval(&self, w: f64) -> Result<f64> {
        let (lo, hi) = self.0.range();
        self.0
            .eval(w)
            .map(|v| v.max(0.0))
            .ok_or(Error::OutOfRange { what: "omega", value: w, lo, hi })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OccupationModel {
    Thermal { temperature: f64 },
    /// 2n + 1 = cosh(2r) coth(ω/2T).
    SqueezedThermal { temperature: f64, r: f64 },
    Tabulated { table: OccupationTable },
}

impl OccupationModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OccupationModel::Thermal { temperature } => check_temperature(temperature),
            OccupationModel::SqueezedThermal { temperature, r } => {
                check_temperature(temperature)?;
                if !(r.is_finite() && r >= 0.0) {
                    return Err(Error::InvalidModel(format!("squeezing {r} must be >= 0")));
                }
                Ok(())
            }
            OccupationModel::Tabulated { .. } => Ok(()),
        }
    }

    /// Temperature parameter, for thermal and squeezed reservoirs.
    pub fn temperature(&self) -> Option<f64> {
        match *self {
            OccupationModel::Thermal { temperature }
            | OccupationModel::SqueezedThermal { temperature, .. } => Some(temperature),
            OccupationModel::Tabulated { .. } => None,
        }
    }

    pub fn is_thermal(&self) -> bool {
        matches!(self, OccupationModel::Thermal { .. })
    }

    pub fn occupation(&self, w: f64) -> Result<f64> {
        if !(w > 0.0) {
            return Err(Error::Domain(format!("occupation needs omega > 0, got {w}")));
        }
        Ok(match self {
            OccupationModel::Thermal { temperature } => bose(w, *temperature),
            OccupationModel::SqueezedThermal { temperature, r } => {
                let nth = bose(w, *temperature);
                let s = r.sinh();
                nth + s * s * (2.0 * nth + 1.0)
            }
            OccupationModel::Tabulated { table } => table.eval(w)?,
        })
    }

    /// Ω(ω) defined by coth(ω/Ω) = 2n(ω) + 1, i.e. Ω = 2ω / ln(1 + 1/n).
    pub fn characteristic_frequency(&self, w: f64) -> Result<f64> {
        match *self {
            OccupationModel::Thermal { temperature }
            | OccupationModel::SqueezedThermal { temperature, r: 0.0 } => {
                if !(w > 0.0) {
                    return Err(Error::Domain(format!("omega must be > 0, got {w}")));
                }
                Ok(2.0 * temperature)
            }
            _ => {
                let n = self.occupation(w)?;
                if !(n > 0.0) {
                    return Err(Error::DegenerateOccupation { omega: w });
                }
                Ok(2.0 * w / (1.0 / n).ln_1p())
            }
        }
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("temperature {t} must be positive")))
    }
}

fn bose(w: f64, t: f64) -> f64 {
    1.0 / (w / t).exp_m1()
}

pub fn occupation(model: &OccupationModel, w: f64) -> Result<f64> {
    model.occupation(w)
}

pub fn characteristic_frequency(model: &OccupationModel, w: f64) -> Result<f64> {
    model.characteristic_frequency(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSpec {
    pub label: String,
    pub density: SpectralDensity,
    pub occupation: OccupationModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    /// Stored Floquet harmonics |n| ≤ n_max.
    pub n_max: usize,
    /// Largest drive channel k; defaults to n_max.
    pub k_max: Option<usize>,
    /// Hard cap for automatic truncation escalation.
    pub n_cap: usize,
    /// Initial quadrature panels per grid segment.
    pub panels: usize,
    pub max_panels: usize,
    pub omega_max_mult: f64,
    /// Regularization Re s; defaults to 1e-6 ω_d.
    pub sigma: Option<f64>,
    pub tail_tol: f64,
    pub quad_tol: f64,
    pub kernel_tol: f64,
    pub k_tail_tol: f64,
    pub support_threshold: f64,
    pub max_condition: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            n_max: 8,
            k_max: None,
            n_cap: 64,
            panels: 8,
            max_panels: 4096,
            omega_max_mult: 10.0,
            sigma: None,
            tail_tol: 1e-12,
            quad_tol: 1e-8,
            kernel_tol: 1e-13,
            k_tail_tol: 1e-6,
            support_threshold: 1e-14,
            max_condition: 1e13,
        }
    }
}

impl NumericsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.n_max == 0 {
            return bad("n_max must be >= 1".into());
        }
        if self.n_cap < self.n_max {
            return bad(format!("n_cap {} below n_max {}", self.n_cap, self.n_max));
        }
        if let Some(k) = self.k_max {
            if k == 0 || k > self.n_max {
                return bad(format!("k_max {k} must lie in 1..=n_max ({})", self.n_max));
            }
        }
        if self.panels == 0 || self.max_panels < self.panels {
            return bad("panel counts must be positive and max_panels >= panels".into());
        }
        for (name, v) in [
            ("omega_max_mult", self.omega_max_mult),
            ("tail_tol", self.tail_tol),
            ("quad_tol", self.quad_tol),
            ("kernel_tol", self.kernel_tol),
            ("k_tail_tol", self.k_tail_tol),
            ("support_threshold", self.support_threshold),
            ("max_condition", self.max_condition),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(s) = self.sigma {
            if !(s.is_finite() && s > 0.0) {
                return bad(format!("sigma must be positive, got {s}"));
            }
        }
        Ok(())
    }

    pub fn k_max(&self) -> usize {
        self.k_max.unwrap_or(self.n_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub network: NetworkModel,
    pub reservoirs: Vec<ReservoirSpec>,
    pub numerics: NumericsConfig,
}

impl EngineConfig {
    pub fn new(
        network: NetworkModel,
        reservoirs: Vec<ReservoirSpec>,
        numerics: NumericsConfig,
    ) -> Result<Self> {
        let c = Self { network, reservoirs, numerics };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.numerics.validate()?;
        if self.reservoirs.is_empty() {
            return Err(Error::InvalidModel("at least one reservoir is required".into()));
        }
        for (i, r) in self.reservoirs.iter().enumerate() {
            if r.label.is_empty() {
                return Err(Error::InvalidModel(format!("reservoir {i} has an empty label")));
            }
            if self.reservoirs[..i].iter().any(|o| o.label == r.label) {
                return Err(Error::InvalidModel(format!("duplicate reservoir label {:?}", r.label)));
            }
            if r.density.projector.len() != self.network.n_osc {
                return Err(Error::InvalidModel(format!(
                    "reservoir {:?}: projector length {} != n_osc {}",
                    r.label,
                    r.density.projector.len(),
                    self.network.n_osc
                )));
            }
            r.density.validate()?;
            r.occupation.validate()?;
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.numerics.sigma.unwrap_or(1e-6 * self.network.drive_freq)
    }

    pub fn max_cutoff(&self) -> f64 {
        self.reservoirs.iter().map(|r| r.density.profile.cutoff()).fold(0.0, f64::max)
    }

    pub fn omega_max(&self) -> f64 {
        self.numerics.omega_max_mult * self.max_cutoff()
    }

    /// ω_r² = V_0 − Σ_α γ_α(0) u_α u_αᵀ.
    pub fn renormalized_stiffness(&self) -> DMatrix<f64> {
        let mut k = self.network.v0.clone();
        for r in &self.reservoirs {
            let u = &r.density.projector;
            k -= u * u.transpose() * r.density.profile.static_shift();
        }
        k
    }

    pub fn reservoir_index(&self, label: &str) -> Option<usize> {
        self.reservoirs.iter().position(|r| r.label == label)
    }
}
