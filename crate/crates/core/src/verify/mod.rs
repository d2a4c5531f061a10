//! Numerical checks of the identities, lemmas and theorems.
//!
//! Every check fits its hypothesis constants on a hypothesis window (or checks
//! pinned constants there), gates on strictly positive margins, then compares
//! the asserted bounds with computed quantities on the conclusion grid.

pub mod ctrl;
pub mod detect;
pub mod duality;
pub mod feedback_obs;
pub mod perturbation;
pub mod stability;
pub mod two_of_three;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifySettings, Side, Verdict, VerdictStatus, DEFAULT_EIG_TOL};
use crate::envelope::{
    check_envelope, fit_envelope, fit_function_envelope, matrix_norm_samples, Envelope, EnvelopeKind, FunctionEnvelope, PairGrid, Trend,
};
use crate::error::{Error, Result};
use crate::grid::Caps;
use crate::matrix::ExprMatrix;
use crate::transforms::{FeedbackGain, GainRole};
use crate::transition::TransitionEvaluator;

pub use ctrl::{verify_feedback_controllability, verify_stabilizability_implies_nucc};
pub use detect::{detect_constants, verify_detectability_implies_nuco, DetectConstants};
pub use duality::{verify_gramian_duality, DUALITY_TOL};
pub use feedback_obs::{corridor_bounds, phi, psi, verify_feedback_observability, PhiCase};
pub use perturbation::verify_perturbation_lemma;
pub use stability::{nues_status, verify_stability_equivalence};
pub use two_of_three::verify_two_of_three;

pub const DEFAULT_SLACK_TOL: f64 = 1e-7;
/// Prefactors within this of 1 count as 1 when judging `β = 0` fits.
pub const UNIT_PREFACTOR_TOL: f64 = 1e-7;
pub const RECHECK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    #[serde(rename = "GRAMIAN-DUALITY")]
    GramianDuality,
    #[serde(rename = "PERTURB-LEMMA")]
    PerturbLemma,
    #[serde(rename = "FEEDBACK-OBS")]
    FeedbackObs,
    #[serde(rename = "DETECT-IMPLIES-NUCO")]
    DetectImpliesNuco,
    #[serde(rename = "FEEDBACK-CTRL")]
    FeedbackCtrl,
    #[serde(rename = "STAB-EQUIV")]
    StabEquiv,
    #[serde(rename = "STAB-IMPLIES-NUCC")]
    StabImpliesNucc,
    #[serde(rename = "TWO-OF-THREE-OBS")]
    TwoOfThreeObs,
    #[serde(rename = "TWO-OF-THREE-CTRL")]
    TwoOfThreeCtrl,
    #[serde(rename = "TWO-OF-THREE-UNIFORM-OBS")]
    TwoOfThreeUniformObs,
    #[serde(rename = "TWO-OF-THREE-UNIFORM-CTRL")]
    TwoOfThreeUniformCtrl,
}

impl TheoremId {
    pub const ALL: [TheoremId; 11] = [
        TheoremId::GramianDuality,
        TheoremId::PerturbLemma,
        TheoremId::FeedbackObs,
        TheoremId::DetectImpliesNuco,
        TheoremId::FeedbackCtrl,
        TheoremId::StabEquiv,
        TheoremId::StabImpliesNucc,
        TheoremId::TwoOfThreeObs,
        TheoremId::TwoOfThreeCtrl,
        TheoremId::TwoOfThreeUniformObs,
        TheoremId::TwoOfThreeUniformCtrl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::GramianDuality => "GRAMIAN-DUALITY",
            TheoremId::PerturbLemma => "PERTURB-LEMMA",
            TheoremId::FeedbackObs => "FEEDBACK-OBS",
            TheoremId::DetectImpliesNuco => "DETECT-IMPLIES-NUCO",
            TheoremId::FeedbackCtrl => "FEEDBACK-CTRL",
            TheoremId::StabEquiv => "STAB-EQUIV",
            TheoremId::StabImpliesNucc => "STAB-IMPLIES-NUCC",
            TheoremId::TwoOfThreeObs => "TWO-OF-THREE-OBS",
            TheoremId::TwoOfThreeCtrl => "TWO-OF-THREE-CTRL",
            TheoremId::TwoOfThreeUniformObs => "TWO-OF-THREE-UNIFORM-OBS",
            TheoremId::TwoOfThreeUniformCtrl => "TWO-OF-THREE-UNIFORM-CTRL",
        }
    }

    pub fn parse(text: &str) -> Option<TheoremId> {
        TheoremId::ALL.into_iter().find(|id| id.as_str().eq_ignore_ascii_case(text))
    }
}

impl std::fmt::Display for TheoremId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportStatus {
    Pass,
    Fail,
    HypothesisViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margin {
    pub name: String,
    pub value: f64,
}

/// One conclusion check: `observed` against `bound` on the given side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlackRow {
    /// `prefix.formula`; the formula part tells [`TheoremReport::recheck`]
    /// how to rebuild `bound` from the stored constants.
    pub group: String,
    pub t: f64,
    /// `σ`, or the second time argument for envelope rows.
    pub second: f64,
    pub observed: f64,
    pub bound: f64,
    pub side: Side,
    pub slack: f64,
}

impl SlackRow {
    pub fn new(group: impl Into<String>, t: f64, second: f64, observed: f64, bound: f64, side: Side) -> SlackRow {
        SlackRow { group: group.into(), t, second, observed, bound, side, slack: log_slack(observed, bound, side) }
    }
}

/// `ln observed − ln bound` for lower bounds, the negative for upper bounds.
pub fn log_slack(observed: f64, bound: f64, side: Side) -> f64 {
    let ln = |x: f64| x.max(f64::MIN_POSITIVE).ln();
    match side {
        Side::Lower => ln(observed) - ln(bound),
        Side::Upper => ln(bound) - ln(observed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub index: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedEnvelope {
    pub name: String,
    pub envelope: Envelope,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<VerdictStatus>,
}

/// Fitted (or pinned and checked) hypothesis constants.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HypothesisSet {
    pub envelopes: BTreeMap<String, Envelope>,
    pub functions: BTreeMap<String, FunctionEnvelope>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub theorem: TheoremId,
    pub system: String,
    pub status: ReportStatus,
    pub margins: Vec<Margin>,
    pub hypotheses: HypothesisSet,
    pub constants: BTreeMap<String, f64>,
    pub tables: BTreeMap<String, Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub phi_cases: Vec<PhiCase>,
    pub rows: Vec<SlackRow>,
    pub min_slack: Option<f64>,
    pub stages: Vec<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub envelopes: Vec<NamedEnvelope>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
}

impl TheoremReport {
    pub fn new(theorem: TheoremId, system: &str) -> TheoremReport {
        TheoremReport {
            theorem,
            system: system.to_string(),
            status: ReportStatus::Fail,
            margins: Vec::new(),
            hypotheses: HypothesisSet::default(),
            constants: BTreeMap::new(),
            tables: BTreeMap::new(),
            phi_cases: Vec::new(),
            rows: Vec::new(),
            min_slack: None,
            stages: Vec::new(),
            failed_stage: None,
            envelopes: Vec::new(),
            verdicts: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.margins.iter().all(|m| m.value > 0.0)
    }

    pub fn violated_margins(&self) -> Vec<&Margin> {
        self.margins.iter().filter(|m| !(m.value > 0.0)).collect()
    }

    pub fn stage(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        let index = self.stages.len();
        self.stages.push(Stage { index, name: name.to_string(), passed, detail: detail.into() });
    }

    /// Sets `status` from margins, stages and row slacks.
    pub fn finish(mut self, slack_tol: f64) -> TheoremReport {
        self.min_slack = self.rows.iter().map(|r| r.slack).min_by(f64::total_cmp);
        self.status = if !self.hypotheses_hold() {
            ReportStatus::HypothesisViolated
        } else if self.stages.iter().any(|s| !s.passed) || self.min_slack.is_some_and(|s| !(s >= -slack_tol)) {
            ReportStatus::Fail
        } else {
            ReportStatus::Pass
        };
        if self.failed_stage.is_none() {
            self.failed_stage = self.stages.iter().find(|s| !s.passed).map(|s| s.index);
        }
        self
    }

    fn table_at(&self, key: &str, sigma: f64) -> Option<f64> {
        self.tables.get(key)?.iter().find(|(s, _)| *s == sigma).map(|&(_, v)| v)
    }

    /// Rebuilds one row's bound from the stored constants, when the row's
    /// formula is known.
    pub fn recompute_bound(&self, row: &SlackRow) -> Option<f64> {
        let (prefix, formula) = match row.group.rfind('.') {
            Some(i) => (&row.group[..=i], &row.group[i + 1..]),
            None => ("", row.group.as_str()),
        };
        let c = |k: &str| self.constants.get(&format!("{prefix}{k}")).copied();
        match formula {
            "nubg" => {
                let (k0, a, p, eps) = (c("K0")?, c("a")?, c("calP")?, c("epsilon")?);
                Some((k0.ln() + (a + k0 * p) * (row.t - row.second).abs() + eps * row.second.abs()).exp())
            }
            "floor" => Some(c("theta0")? * (-2.0 * c("alpha")? * row.t.abs()).exp()),
            "corridor" => {
                let key = |k: &str| format!("{prefix}{k}");
                let s = row.second;
                let (nu0, nu1) = (c("nu0")?, c("nu1")?);
                let (th0, th1) = (self.table_at(&key("theta0"), s)?, self.table_at(&key("theta1"), s)?);
                let (ph, ps) = (self.table_at(&key("phi"), s)?, self.table_at(&key("psi"), s)?);
                let (lower, upper) = corridor_bounds(th0, th1, ph, ps, nu0, nu1, row.t);
                Some(match row.side {
                    Side::Lower => lower,
                    Side::Upper => upper,
                })
            }
            _ => None,
        }
    }

    /// Re-evaluates every stored slack (and every bound with a known formula)
    /// and returns the largest discrepancy.
    pub fn recheck(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let bound = match self.recompute_bound(row) {
                Some(b) => {
                    worst = worst.max((b - row.bound).abs() / row.bound.abs().max(f64::MIN_POSITIVE));
                    b
                }
                None => row.bound,
            };
            worst = worst.max((log_slack(row.observed, bound, row.side) - row.slack).abs());
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySettings {
    /// conclusion grid
    pub t_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    /// times on which hypotheses are fitted
    pub hyp_t: Vec<f64>,
    pub caps: Caps,
    pub eig_tol: f64,
    pub slack_tol: f64,
}

impl VerifySettings {
    pub fn new(t_grid: Vec<f64>, sigma_grid: Vec<f64>, hyp_t: Vec<f64>) -> VerifySettings {
        VerifySettings { t_grid, sigma_grid, hyp_t, caps: Caps::default(), eig_tol: DEFAULT_EIG_TOL, slack_tol: DEFAULT_SLACK_TOL }
    }

    pub fn classify_settings(&self) -> ClassifySettings {
        ClassifySettings { t_grid: self.t_grid.clone(), sigma_grid: self.sigma_grid.clone(), caps: self.caps, eig_tol: self.eig_tol }
    }
}

/// Gains and pinned constants a theorem check may use.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub gains: Vec<FeedbackGain>,
    /// Hypothesis name to constants: envelopes `[pref, rate, nu]`, functions `[pref, rate]`.
    #[serde(default)]
    pub pinned: BTreeMap<String, Vec<f64>>,
}

impl Scenario {
    pub fn gain(&self, role: GainRole, theorem: TheoremId) -> Result<&FeedbackGain> {
        self.gains
            .iter()
            .find(|g| g.role == role)
            .ok_or_else(|| Error::invalid(format!("{theorem} needs a {role:?} gain")))
    }
}

/// Collects hypothesis fits and margins for one report.
pub(crate) struct Hyp<'a> {
    pub settings: &'a VerifySettings,
    pinned: &'a BTreeMap<String, Vec<f64>>,
    pub set: HypothesisSet,
    pub margins: Vec<Margin>,
    pub constants: BTreeMap<String, f64>,
}

impl<'a> Hyp<'a> {
    pub fn new(settings: &'a VerifySettings, scenario: &'a Scenario) -> Hyp<'a> {
        Hyp { settings, pinned: &scenario.pinned, set: HypothesisSet::default(), margins: Vec::new(), constants: BTreeMap::new() }
    }

    pub fn margin(&mut self, name: &str, value: f64) {
        self.margins.push(Margin { name: name.to_string(), value });
    }

    pub fn constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.to_string(), value);
    }

    /// Fits `kind` on pairs of `ts` (or checks the pinned constants there).
    pub fn envelope(&mut self, ev: &TransitionEvaluator, key: &str, kind: EnvelopeKind, ts: &[f64]) -> Result<Envelope> {
        let grid = PairGrid::for_kind(kind, ts);
        let env = match self.pinned.get(key) {
            Some(v) => {
                let [pref, rate, nu] = v[..] else {
                    return Err(Error::invalid(format!("pinned `{key}` needs [pref, rate, nu]")));
                };
                let mut env = Envelope::with_constants(kind, pref, rate, nu);
                let rep = check_envelope(ev, &env, &grid)?;
                env.slack = rep.min_slack;
                env.binding = rep.argmin;
                self.margin(&format!("{key} pinned constants hold"), rep.min_slack + self.settings.slack_tol);
                env
            }
            None => fit_envelope(ev, kind, &grid, &self.settings.caps.rate_grid(), &self.settings.caps.nu_grid(), self.log_cap())?,
        };
        self.set.envelopes.insert(key.to_string(), env.clone());
        Ok(env)
    }

    /// Fits `‖m(t)‖ ≤ pref·e^{∓rate|t|}` on `ts` (or checks pinned constants).
    pub fn function(&mut self, key: &str, m: &ExprMatrix, ts: &[f64], trend: Trend) -> Result<FunctionEnvelope> {
        let samples = matrix_norm_samples(m, ts)?;
        let env = match self.pinned.get(key) {
            Some(v) => {
                let [pref, rate] = v[..] else {
                    return Err(Error::invalid(format!("pinned `{key}` needs [pref, rate]")));
                };
                let mut env = FunctionEnvelope { trend, prefactor: pref, rate, slack: 0.0, binding_t: f64::NAN };
                let (slack, t) = env.slack_on(&samples);
                env.slack = slack;
                env.binding_t = t;
                self.margin(&format!("{key} pinned constants hold"), slack + self.settings.slack_tol);
                env
            }
            None => fit_function_envelope(&samples, trend, &self.settings.caps.rate_grid())?,
        };
        self.set.functions.insert(key.to_string(), env);
        Ok(env)
    }

    pub fn log_cap(&self) -> f64 {
        self.settings.caps.log_pref()
    }

    /// Moves the collected hypotheses into `report`.
    pub fn into_report(self, report: &mut TheoremReport) {
        report.margins.extend(self.margins);
        report.hypotheses.envelopes.extend(self.set.envelopes);
        report.hypotheses.functions.extend(self.set.functions);
        report.constants.extend(self.constants);
    }
}

pub fn verify(ev: &TransitionEvaluator, id: TheoremId, scenario: &Scenario, settings: &VerifySettings) -> Result<TheoremReport> {
    match id {
        TheoremId::GramianDuality => verify_gramian_duality(ev, settings),
        TheoremId::PerturbLemma => verify_perturbation_lemma(ev, scenario.gain(GainRole::Perturbation, id)?, scenario, settings),
        TheoremId::FeedbackObs => verify_feedback_observability(ev, scenario.gain(GainRole::OutputInjection, id)?, scenario, settings),
        TheoremId::DetectImpliesNuco => verify_detectability_implies_nuco(ev, scenario.gain(GainRole::Observer, id)?, scenario, settings),
        TheoremId::FeedbackCtrl => verify_feedback_controllability(ev, scenario.gain(GainRole::StateFeedback, id)?, scenario, settings),
        TheoremId::StabEquiv => verify_stability_equivalence(ev, settings),
        TheoremId::StabImpliesNucc => verify_stabilizability_implies_nucc(ev, scenario.gain(GainRole::StateFeedback, id)?, scenario, settings),
        TheoremId::TwoOfThreeObs | TheoremId::TwoOfThreeCtrl | TheoremId::TwoOfThreeUniformObs | TheoremId::TwoOfThreeUniformCtrl => {
            verify_two_of_three(ev, id, settings)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem_ids_round_trip() {
        for id in TheoremId::ALL {
            assert_eq!(TheoremId::parse(id.as_str()), Some(id));
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{}\"", id.as_str()));
        }
        assert_eq!(TheoremId::parse("nope"), None);
    }

    #[test]
    fn slack_signs() {
        assert!(log_slack(2.0, 1.0, Side::Lower) > 0.0);
        assert!(log_slack(2.0, 1.0, Side::Upper) < 0.0);
        assert_eq!(log_slack(0.0, 1.0, Side::Upper), -f64::MIN_POSITIVE.ln());
    }

    #[test]
    fn finish_gates_on_margins() {
        let mut r = TheoremReport::new(TheoremId::StabEquiv, "x");
        r.margins.push(Margin { name: "m".into(), value: 0.0 });
        r.rows.push(SlackRow::new("g", 0.0, 0.0, 1.0, 2.0, Side::Upper));
        assert_eq!(r.finish(1e-7).status, ReportStatus::HypothesisViolated);

        let mut r = TheoremReport::new(TheoremId::StabEquiv, "x");
        r.rows.push(SlackRow::new("g", 0.0, 0.0, 2.0, 1.0, Side::Upper));
        assert_eq!(r.finish(1e-7).status, ReportStatus::Fail);

        let mut r = TheoremReport::new(TheoremId::StabEquiv, "x");
        r.stage("only", false, "");
        let r = r.finish(1e-7);
        assert_eq!((r.status, r.failed_stage), (ReportStatus::Fail, Some(0)));
    }
}
