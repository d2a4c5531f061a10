//! System definition files and JSON/CSV reports.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::classify::{ClassifySettings, DEFAULT_EIG_TOL};
use crate::error::{Error, Result};
use crate::grid::{Caps, GridSpec};
use crate::integrate::StepControl;
use crate::matrix::ExprMatrix;
use crate::system::LtvSystem;
use crate::transforms::FeedbackGain;
use crate::verify::{Scenario, VerifySettings, DEFAULT_SLACK_TOL};

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn ser_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for row in matrix_rows(m) {
        seq.serialize_element(&row)?;
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    /// times on which theorem hypotheses are fitted
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyp_t: Option<GridSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub eig_tol: f64,
    pub slack_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let ctl = StepControl::default();
        Tolerances { rtol: ctl.rtol, atol: ctl.atol, eig_tol: DEFAULT_EIG_TOL, slack_tol: DEFAULT_SLACK_TOL }
    }
}

/// Optional overrides; missing fields keep the file's (or default) value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eig_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack_tol: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, mut t: Tolerances) -> Tolerances {
        t.rtol = self.rtol.unwrap_or(t.rtol);
        t.atol = self.atol.unwrap_or(t.atol);
        t.eig_tol = self.eig_tol.unwrap_or(t.eig_tol);
        t.slack_tol = self.slack_tol.unwrap_or(t.slack_tol);
        t
    }
}

/// A `*.system.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub name: String,
    pub n: usize,
    #[serde(default)]
    pub p: usize,
    #[serde(default)]
    pub m: usize,
    pub domain: [f64; 2],
    #[serde(rename = "A")]
    pub a: ExprMatrix,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<ExprMatrix>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<ExprMatrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gains: Vec<FeedbackGain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grids: Option<GridsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<Caps>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceOverrides>,
    /// pinned hypothesis constants
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hypotheses: BTreeMap<String, Vec<f64>>,
}

pub const DEFAULT_SIGMA_GRID: [f64; 3] = [0.5, 1.0, 2.0];
pub const DEFAULT_T_COUNT: usize = 7;

/// Command-line overrides of a file's settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub t_grid: Option<GridSpec>,
    pub sigma_grid: Option<Vec<f64>>,
    pub caps: Option<Caps>,
    pub tolerances: ToleranceOverrides,
}

/// Everything a command needs, resolved from a file plus overrides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    #[serde(skip)]
    pub system: LtvSystem,
    #[serde(skip)]
    pub scenario: Scenario,
    pub t_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub hyp_t: Vec<f64>,
    pub caps: Caps,
    pub tolerances: Tolerances,
}

impl Resolved {
    pub fn step_control(&self) -> StepControl {
        StepControl { rtol: self.tolerances.rtol, atol: self.tolerances.atol, ..StepControl::default() }
    }

    pub fn classify_settings(&self) -> ClassifySettings {
        ClassifySettings { t_grid: self.t_grid.clone(), sigma_grid: self.sigma_grid.clone(), caps: self.caps, eig_tol: self.tolerances.eig_tol }
    }

    pub fn verify_settings(&self) -> VerifySettings {
        VerifySettings {
            t_grid: self.t_grid.clone(),
            sigma_grid: self.sigma_grid.clone(),
            hyp_t: self.hyp_t.clone(),
            caps: self.caps,
            eig_tol: self.tolerances.eig_tol,
            slack_tol: self.tolerances.slack_tol,
        }
    }
}

impl SystemFile {
    pub fn from_json(text: &str) -> Result<SystemFile> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<SystemFile> {
        SystemFile::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system files serialize")
    }

    pub fn system(&self) -> Result<LtvSystem> {
        let sys = LtvSystem::new(self.name.clone(), self.a.clone(), self.b.clone(), self.c.clone(), (self.domain[0], self.domain[1]))?;
        if sys.n() != self.n || sys.p() != self.p || sys.m() != self.m {
            return Err(Error::Dimension(format!(
                "`{}` declares n={}, p={}, m={} but its matrices give n={}, p={}, m={}",
                self.name,
                self.n,
                self.p,
                self.m,
                sys.n(),
                sys.p(),
                sys.m()
            )));
        }
        for g in &self.gains {
            let want = g.expected_shape(&sys);
            if g.entries.shape() != want {
                return Err(Error::Dimension(format!("{:?} gain of `{}` must be {}x{}", g.role, self.name, want.0, want.1)));
            }
        }
        sys.validate(64)?;
        Ok(sys)
    }

    pub fn resolve(&self, over: &Overrides) -> Result<Resolved> {
        let system = self.system()?;
        let grids = self.grids.clone().unwrap_or(GridsSpec { t: None, sigma: None, hyp_t: None });
        let sigma_grid = over.sigma_grid.clone().or(grids.sigma).unwrap_or_else(|| DEFAULT_SIGMA_GRID.to_vec());
        if sigma_grid.is_empty() || sigma_grid.iter().any(|s| !(*s > 0.0)) || sigma_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sigma grid must be positive and strictly increasing"));
        }
        let (lo, hi) = system.domain;
        let smax = sigma_grid[sigma_grid.len() - 1];
        // a domain shorter than the widest σ still resolves; commands that need
        // t + σ inside the domain report it
        let t_spec = over.t_grid.or(grids.t).unwrap_or(GridSpec { lo, hi: (hi - smax).max(lo), count: DEFAULT_T_COUNT });
        for g in std::iter::once(&t_spec).chain(grids.hyp_t.as_ref()) {
            if g.count == 0 || !(g.lo <= g.hi) || !g.lo.is_finite() || !g.hi.is_finite() {
                return Err(Error::invalid(format!("grid {}:{}:{} needs lo <= hi and count >= 1", g.lo, g.hi, g.count)));
            }
        }
        let t_grid = t_spec.points();
        let hyp_t = grids.hyp_t.map(|g| g.points()).unwrap_or_else(|| t_grid.clone());
        let tolerances = over.tolerances.apply(self.tolerances.unwrap_or_default().apply(Tolerances::default()));
        if [tolerances.rtol, tolerances.atol, tolerances.eig_tol, tolerances.slack_tol].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("tolerances must be finite and nonnegative"));
        }
        Ok(Resolved {
            scenario: Scenario { gains: self.gains.clone(), pinned: self.hypotheses.clone() },
            system,
            t_grid,
            sigma_grid,
            hyp_t,
            caps: over.caps.or(self.caps).unwrap_or_default(),
            tolerances,
        })
    }
}

/// A JSON report: a deterministic section plus a footer with wall time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub deterministic: Deterministic,
    pub footer: Footer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deterministic {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub settings: serde_json::Value,
    pub results: serde_json::Value,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Footer {
    pub wall_time_s: f64,
    pub workers: usize,
}

impl Report {
    pub fn new(command: impl Into<String>, settings: serde_json::Value, results: serde_json::Value, exit_code: i32) -> Report {
        Report {
            deterministic: Deterministic { tool: "ltvkit", version: env!("CARGO_PKG_VERSION"), command: command.into(), settings, results, exit_code },
            footer: Footer { wall_time_s: 0.0, workers: rayon::current_num_threads() },
        }
    }

    pub fn deterministic_json(&self) -> String {
        serde_json::to_string_pretty(&self.deterministic).expect("reports serialize")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// One line of a `(t, σ)` surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceRow {
    pub t: f64,
    pub sigma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub bound_lower: f64,
    pub bound_upper: f64,
}

pub const CSV_HEADER: &str = "t,sigma,lambda_min,lambda_max,bound_lower,bound_upper";

pub fn surface_csv(rows: &[SurfaceRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{:e},{:e},{:e},{:e},{:e},{:e}\n", r.t, r.sigma, r.lambda_min, r.lambda_max, r.bound_lower, r.bound_upper));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const S2: &str = r#"{
        "name": "S2", "n": 1, "p": 1, "m": 1, "domain": [-5, 5],
        "A": [["-1"]], "B": [["1"]], "C": [["1"]],
        "grids": {"t": {"lo": -3, "hi": 3, "count": 7}, "sigma": [1, 2]}
    }"#;

    #[test]
    fn parse_and_resolve() {
        let f = SystemFile::from_json(S2).unwrap();
        let r = f.resolve(&Overrides::default()).unwrap();
        assert_eq!(r.t_grid.len(), 7);
        assert_eq!(r.sigma_grid, vec![1.0, 2.0]);
        assert_eq!(r.hyp_t, r.t_grid);
        assert_eq!(r.tolerances, Tolerances::default());
        let back = SystemFile::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = S2.replacen("\"n\": 1", "\"n\": 1, \"extra\": 0", 1);
        assert!(SystemFile::from_json(&bad).is_err());
        let bad = S2.replacen("\"sigma\"", "\"sigmas\"", 1);
        assert!(SystemFile::from_json(&bad).is_err());
    }

    #[test]
    fn declared_dimensions_checked() {
        let bad = S2.replacen("\"m\": 1", "\"m\": 2", 1);
        assert!(SystemFile::from_json(&bad).unwrap().system().is_err());
    }

    #[test]
    fn overrides_win() {
        let f = SystemFile::from_json(S2).unwrap();
        let over = Overrides {
            sigma_grid: Some(vec![0.5]),
            tolerances: ToleranceOverrides { rtol: Some(1e-6), ..Default::default() },
            ..Default::default()
        };
        let r = f.resolve(&over).unwrap();
        assert_eq!(r.sigma_grid, vec![0.5]);
        assert_eq!(r.tolerances.rtol, 1e-6);
        assert_eq!(r.step_control().rtol, 1e-6);
    }

    #[test]
    fn csv_layout() {
        let s = surface_csv(&[SurfaceRow { t: 0.0, sigma: 1.0, lambda_min: 0.5, lambda_max: 0.5, bound_lower: 0.1, bound_upper: 2.0 }]);
        assert!(s.starts_with("t,sigma,lambda_min,lambda_max,bound_lower,bound_upper\n0e0,1e0,"));
    }
}
