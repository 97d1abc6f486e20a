//! Strict TOML run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    EngineConfig, NetworkModel, NumericsConfig, OccupationModel, OccupationTable, ReservoirSpec,
    SpectralDensity, SpectralProfile,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierEntry {
    pub m: i32,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// Full mass matrix; alternatively `masses` for a diagonal one.
    pub mass: Option<Vec<Vec<f64>>>,
    pub masses: Option<Vec<f64>>,
    pub v0: Vec<Vec<f64>>,
    #[serde(default)]
    pub fourier: Vec<FourierEntry>,
    pub drive_freq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    #[serde(default = "ohmic")]
    pub kind: String,
    pub gamma: f64,
    pub cutoff: f64,
}

fn ohmic() -> String {
    "ohmic_exponential".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationSection {
    pub kind: String,
    #[serde(rename = "T")]
    pub temperature: Option<f64>,
    pub r: Option<f64>,
    /// Two-column CSV (omega, n), relative to the config file.
    pub table: Option<String>,
    pub omega: Option<Vec<f64>>,
    pub n: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirSection {
    pub label: String,
    pub profile: ProfileSection,
    pub projector: Vec<f64>,
    pub occupation: OccupationSection,
}

/// Discretized-bath validation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub n_modes: usize,
    /// Mode band in units of each bath's cutoff.
    pub span: [f64; 2],
    /// Fixed step; defaults to one period / `steps_per_period`, raised if needed to resolve the top mode.
    pub dt: Option<f64>,
    pub steps_per_period: usize,
    /// Length of the fitting window in drive periods.
    pub periods: usize,
    /// Transient discarded before the window, as a fraction of it.
    pub transient_frac: f64,
    pub squeeze_angle: f64,
    pub step_tol: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            n_modes: 300,
            span: [0.01, 6.0],
            dt: None,
            steps_per_period: 64,
            periods: 50,
            transient_frac: 0.3,
            squeeze_angle: 0.0,
            step_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkSection,
    pub reservoirs: Vec<ReservoirSection>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub oracle: OracleSettings,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Config(format!("{name}: empty matrix")));
    }
    let m = rows[0].len();
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Config(format!("{name}: ragged rows")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read occupation table {}: {e}", path.display())))?;
    let mut omega = Vec::new();
    let mut n = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
        match parsed.as_deref() {
            Some([w, v]) => {
                omega.push(*w);
                n.push(*v);
            }
            _ if omega.is_empty() => continue,
            _ => {
                return Err(Error::Config(format!(
                    "{}:{}: expected two numeric columns",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok((omega, n))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn engine(&self) -> Result<EngineConfig> {
        let net = &self.network;
        let v0 = matrix("network.v0", &net.v0)?;
        let n = v0.nrows();
        let mass = match (&net.mass, &net.masses) {
            (Some(m), None) => matrix("network.mass", m)?,
            (None, Some(d)) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            (None, None) => DMatrix::identity(n, n),
            (Some(_), Some(_)) => {
                return Err(Error::Config("network: give either `mass` or `masses`, not both".into()))
            }
        };
        let mut vf = BTreeMap::new();
        for e in &net.fourier {
            let v = matrix(&format!("network.fourier (m = {})", e.m), &e.matrix)?;
            if vf.insert(e.m, v).is_some() {
                return Err(Error::Config(format!("network.fourier: harmonic m = {} given twice", e.m)));
            }
        }
        let network = NetworkModel::new(mass, v0, vf, net.drive_freq)
            .map_err(|e| Error::Config(format!("network: {e}")))?;
        let mut reservoirs = Vec::new();
        for r in &self.reservoirs {
            let ctx = |e: Error| Error::Config(format!("reservoir {:?}: {e}", r.label));
            if r.profile.kind != "ohmic_exponential" {
                return Err(ctx(Error::Config(format!("unknown profile kind {:?}", r.profile.kind))));
            }
            let profile = SpectralProfile::OhmicExponential { gamma: r.profile.gamma, cutoff: r.profile.cutoff };
            let density = SpectralDensity::new(profile, DVector::from_column_slice(&r.projector)).map_err(ctx)?;
            let occupation = self.occupation(&r.occupation).map_err(ctx)?;
            reservoirs.push(ReservoirSpec { label: r.label.clone(), density, occupation });
        }
        EngineConfig::new(network, reservoirs, self.numerics.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    fn occupation(&self, o: &OccupationSection) -> Result<OccupationModel> {
        let need_t = || o.temperature.ok_or_else(|| Error::Config(format!("occupation kind {:?} needs T", o.kind)));
        let model = match o.kind.as_str() {
            "thermal" => {
                if o.r.is_some() || o.table.is_some() || o.omega.is_some() {
                    return Err(Error::Config("thermal occupation takes only T".into()));
                }
                OccupationModel::Thermal { temperature: need_t()? }
            }
            "squeezed_thermal" => {
                if o.table.is_some() || o.omega.is_some() {
                    return Err(Error::Config("squeezed_thermal occupation takes T and r".into()));
                }
                let r = o.r.ok_or_else(|| Error::Config("squeezed_thermal needs r".into()))?;
                OccupationModel::SqueezedThermal { temperature: need_t()?, r }
            }
            "tabulated" => {
                if o.temperature.is_some() || o.r.is_some() {
                    return Err(Error::Config("tabulated occupation takes a table, not T or r".into()));
                }
                let (omega, n) = match (&o.table, &o.omega, &o.n) {
                    (Some(path), None, None) => {
                        let p = match &self.base_dir {
                            Some(dir) => dir.join(path),
                            None => PathBuf::from(path),
                        };
                        read_table(&p)?
                    }
                    (None, Some(w), Some(n)) => (w.clone(), n.clone()),
                    _ => return Err(Error::Config("tabulated occupation needs `table` or both `omega` and `n`".into())),
                };
                OccupationModel::Tabulated { table: OccupationTable::new(omega, n)? }
            }
            other => return Err(Error::Config(format!("unknown occupation kind {other:?}"))),
        };
        model.validate()?;
        Ok(model)
    }
}
