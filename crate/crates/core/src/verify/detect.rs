use serde::Serialize;

use super::{Hyp, Scenario, SlackRow, TheoremId, TheoremReport, VerifySettings};
use crate::classify::{classify, gramian_table, Property, Side, VerdictStatus};
use crate::envelope::{EnvelopeKind, Trend};
use crate::error::Result;
use crate::gramian::GramianKind;
use crate::transforms::{observer_error_system, FeedbackGain};
use crate::transition::TransitionEvaluator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectConstants {
    pub w: f64,
    pub theta0: f64,
}

/// Pairs must reach at least this far past zero.
pub const MIN_OVERLAP: f64 = 0.01;

/// `w = 1/√(2(α+ℓ−μ)) + 1/√(2|α−ℓ+μ|)` and `ϑ₀ = 1/(9(K𝓛w)²)`.
pub fn detect_constants(k: f64, big_l: f64, alpha: f64, mu: f64, ell: f64) -> DetectConstants {
    let w = 1.0 / (2.0 * (alpha + ell - mu)).sqrt() + 1.0 / (2.0 * (alpha - ell + mu).abs()).sqrt();
    let kl = k * big_l * w;
    DetectConstants { w, theta0: 1.0 / (9.0 * kl * kl) }
}

/// Window length from which the proof's first term is at most a third.
pub fn script_a(k: f64, ke: f64, alpha: f64, mu: f64, alpha_e: f64, mu_e: f64, t: f64) -> f64 {
    let d = alpha - mu + alpha_e;
    (3.0 * k * ke).ln() / d + (mu + mu_e) * t.abs() / d
}

/// A detectable plant with a decaying observer gain is NUCO. Besides the
/// verdict, the proof's floor `λ_min(M_{A−LC}(t,t+σ)) ≥ ϑ₀e^{−2α|t|}` is
/// checked on pairs with `σ ≥ 𝒜(t)` and `t + σ ≥ 0.01`.
pub fn verify_detectability_implies_nuco(ev: &TransitionEvaluator, l: &FeedbackGain, scenario: &Scenario, settings: &VerifySettings) -> Result<TheoremReport> {
    let sys = ev.system();
    let c = sys.require_c()?.clone();
    let err = ev.with_system(observer_error_system(sys, l)?);
    let mut report = TheoremReport::new(TheoremId::DetectImpliesNuco, &sys.name);

    let mut hyp = Hyp::new(settings, scenario);
    let ts = &settings.hyp_t;
    let nubg = hyp.envelope(ev, "nubg", EnvelopeKind::Nubg, ts)?;
    let back = hyp.envelope(ev, "nues_backward", EnvelopeKind::NuesBackward, ts)?;
    let fwd = hyp.envelope(&err, "error_forward", EnvelopeKind::NuesForward, ts)?;
    let lf = hyp.function("observer", &l.entries, ts, Trend::Decay)?;
    let cf = hyp.function("output", &c, ts, Trend::Growth)?;
    let (alpha, mu, ell, gamma, eps) = (back.rate, back.nu, lf.rate, cf.rate, nubg.nu);
    let log_cap = hyp.log_cap();
    hyp.margin("NUBG within caps", log_cap - nubg.log_prefactor);
    // the NUES margins also go non-positive when the fit leaves the caps
    hyp.margin("alpha - mu", (alpha - mu).min(log_cap - back.log_prefactor));
    hyp.margin("alpha_e", fwd.rate.min(log_cap - fwd.log_prefactor));
    hyp.margin("ell - (alpha + mu)", ell - (alpha + mu));
    hyp.margin("ell - (gamma + epsilon)", ell - (gamma + eps));
    hyp.margin("C envelope within caps", log_cap - cf.prefactor.ln());
    let dc = detect_constants(back.prefactor, lf.prefactor, alpha, mu, ell);
    for (name, v) in [
        ("K0", nubg.prefactor),
        ("a", nubg.rate),
        ("epsilon", eps),
        ("K", back.prefactor),
        ("alpha", alpha),
        ("mu", mu),
        ("K_e", fwd.prefactor),
        ("alpha_e", fwd.rate),
        ("mu_e", fwd.nu),
        ("calL", lf.prefactor),
        ("ell", ell),
        ("calC", cf.prefactor),
        ("gamma", gamma),
        ("w", dc.w),
        ("theta0", dc.theta0),
    ] {
        hyp.constant(name, v);
    }
    hyp.into_report(&mut report);
    if !report.hypotheses_hold() {
        return Ok(report.finish(settings.slack_tol));
    }

    let verdict = classify(ev, Property::NUCO, &settings.classify_settings())?;
    report.stage("classify NUCO", verdict.status == VerdictStatus::CertifiedOnWindow, format!("{:?}", verdict.status));
    report.verdicts.push(verdict);

    let table = gramian_table(&err, GramianKind::M, &settings.t_grid, &settings.sigma_grid)?;
    let mut a_tab = Vec::new();
    for (i, &t) in settings.t_grid.iter().enumerate() {
        let a_t = script_a(back.prefactor, fwd.prefactor, alpha, mu, fwd.rate, fwd.nu, t);
        a_tab.push((t, a_t));
        for (j, &sigma) in settings.sigma_grid.iter().enumerate() {
            if sigma >= a_t.max(MIN_OVERLAP - t) {
                let bound = dc.theta0 * (-2.0 * alpha * t.abs()).exp();
                report.rows.push(SlackRow::new("floor", t, sigma, table.lambda_min[i][j], bound, Side::Lower));
            }
        }
    }
    report.tables.insert("script_A".into(), a_tab);
    if report.rows.is_empty() {
        report.notes.push("no grid pair satisfies sigma >= A(t) and t + sigma >= 0.01; the floor check is vacuous".into());
    }
    let floor_ok = report.rows.iter().all(|r| r.slack >= -settings.slack_tol);
    report.stage("proof floor", floor_ok, format!("{} pairs", report.rows.len()));
    Ok(report.finish(settings.slack_tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_a_example() {
        let a = script_a(1.0, 1.0, 2.0, 0.0, 1.0, 0.0, 7.0);
        assert!((a - 3f64.ln() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn w_and_theta0_example() {
        let dc = detect_constants(1.0, 1.0, 2.0, 0.0, 3.0);
        let w = 1.0 / 10f64.sqrt() + 1.0 / 2f64.sqrt();
        assert!((dc.w - w).abs() < 1e-15);
        assert!((dc.w - 1.0234).abs() < 1e-4);
        assert!((dc.theta0 - 1.0 / (9.0 * w * w)).abs() < 1e-15);
        assert!((dc.theta0 - 0.1061).abs() < 1e-4);
    }
}
