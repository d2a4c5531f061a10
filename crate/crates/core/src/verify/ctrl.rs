use super::{nues_status, verify_detectability_implies_nuco, Hyp, ReportStatus, Scenario, TheoremId, TheoremReport, VerifySettings};
use crate::classify::{classify, Property, VerdictStatus};
use crate::envelope::{fit_envelope, EnvelopeKind, PairGrid, Trend};
use crate::error::Result;
use crate::system::LtvSystem;
use crate::transforms::{dual, dual_plant, reflect_domain, state_feedback, FeedbackGain, GainRole};
use crate::transition::TransitionEvaluator;

fn reflect(ts: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = ts.iter().map(|t| -t).collect();
    r.sort_by(f64::total_cmp);
    r
}

/// A decaying state feedback does not change the NUCC verdict.
pub fn verify_feedback_controllability(ev: &TransitionEvaluator, f: &FeedbackGain, scenario: &Scenario, settings: &VerifySettings) -> Result<TheoremReport> {
    let sys = ev.system();
    let b = sys.require_b()?.clone();
    let closed = ev.with_system(state_feedback(sys, f)?);
    let mut report = TheoremReport::new(TheoremId::FeedbackCtrl, &sys.name);

    let mut hyp = Hyp::new(settings, scenario);
    let ts = &settings.hyp_t;
    let nubg = hyp.envelope(ev, "nubg", EnvelopeKind::Nubg, ts)?;
    let ff = hyp.function("feedback", &f.entries.transpose(), ts, Trend::Decay)?;
    let bf = hyp.function("input", &b.transpose(), ts, Trend::Growth)?;
    for (name, v) in [("K0", nubg.prefactor), ("a", nubg.rate), ("epsilon", nubg.nu), ("L_c", ff.prefactor), ("ell_c", ff.rate), ("B_c", bf.prefactor), ("beta_c", bf.rate)] {
        hyp.constant(name, v);
    }
    hyp.margin("NUBG within caps", hyp.log_cap() - nubg.log_prefactor);
    hyp.margin("B envelope within caps", hyp.log_cap() - bf.prefactor.ln());
    hyp.margin("ell_c - (beta_c + epsilon)", ff.rate - (bf.rate + nubg.nu));
    hyp.into_report(&mut report);
    if !report.hypotheses_hold() {
        return Ok(report.finish(settings.slack_tol));
    }

    let cs = settings.classify_settings();
    let open = classify(ev, Property::NUCC, &cs)?;
    let shut = classify(&closed, Property::NUCC, &cs)?;
    report.stage("same NUCC verdict", open.status == shut.status, format!("open loop {:?}, closed loop {:?}", open.status, shut.status));
    report.verdicts.push(open);
    report.verdicts.push(shut);
    Ok(report.finish(settings.slack_tol))
}

/// Stabilizability with a decaying feedback implies NUCC, run as the proof
/// chain: hypotheses, backward decay of the dual plant, the detectability
/// theorem on the dual pair with observer `Fᵀ(−t)`, and the NUCC verdict.
pub fn verify_stabilizability_implies_nucc(ev: &TransitionEvaluator, f: &FeedbackGain, scenario: &Scenario, settings: &VerifySettings) -> Result<TheoremReport> {
    let sys = ev.system();
    let b = sys.require_b()?.clone();
    let closed = ev.with_system(state_feedback(sys, f)?);
    let mut report = TheoremReport::new(TheoremId::StabImpliesNucc, &sys.name);

    let mut hyp = Hyp::new(settings, scenario);
    let ts = &settings.hyp_t;
    let nubg = hyp.envelope(ev, "nubg", EnvelopeKind::Nubg, ts)?;
    let back = hyp.envelope(ev, "nues_backward", EnvelopeKind::NuesBackward, ts)?;
    let cl = hyp.envelope(&closed, "closed_loop_forward", EnvelopeKind::NuesForward, ts)?;
    let ff = hyp.function("feedback", &f.entries.transpose(), ts, Trend::Decay)?;
    let bf = hyp.function("input", &b.transpose(), ts, Trend::Growth)?;
    let (alpha, mu, eps) = (back.rate, back.nu, nubg.nu);
    let log_cap = hyp.log_cap();
    for (name, v) in [
        ("K0", nubg.prefactor),
        ("a", nubg.rate),
        ("epsilon", eps),
        ("K", back.prefactor),
        ("alpha", alpha),
        ("mu", mu),
        ("K_cl", cl.prefactor),
        ("beta_cl", cl.rate),
        ("L_c", ff.prefactor),
        ("ell_c", ff.rate),
        ("B_c", bf.prefactor),
        ("beta_c", bf.rate),
    ] {
        hyp.constant(name, v);
    }
    hyp.margin("NUBG within caps", log_cap - nubg.log_prefactor);
    hyp.margin("alpha - mu", (alpha - mu).min(log_cap - back.log_prefactor));
    hyp.margin("closed-loop beta", cl.rate.min(log_cap - cl.log_prefactor));
    hyp.margin("ell_c - (alpha + mu)", ff.rate - (alpha + mu));
    hyp.margin("ell_c - (beta_c + epsilon)", ff.rate - (bf.rate + eps));
    hyp.margin("B envelope within caps", log_cap - bf.prefactor.ln());
    hyp.into_report(&mut report);
    let held = report.hypotheses_hold();
    let violated: Vec<String> = report.violated_margins().iter().map(|m| m.name.clone()).collect();
    report.stage("hypotheses", held, if held { "all margins positive".to_string() } else { format!("violated: {}", violated.join(", ")) });
    if !held {
        report.failed_stage = Some(0);
        return Ok(report.finish(settings.slack_tol));
    }

    // stage 1: the dual plant decays backward
    let dplant = ev.with_system(LtvSystem::new(format!("dual({})", sys.name), dual_plant(&sys.a), None, None, reflect_domain(sys.domain))?);
    let hyp_r = reflect(&settings.hyp_t);
    let denv = fit_envelope(&dplant, EnvelopeKind::NuesBackward, &PairGrid::for_kind(EnvelopeKind::NuesBackward, &hyp_r), &settings.caps.rate_grid(), &settings.caps.nu_grid(), settings.caps.log_pref())?;
    let dstatus = nues_status(&denv, log_cap);
    report.hypotheses.envelopes.insert("dual_backward".into(), denv);
    let ok1 = dstatus == VerdictStatus::CertifiedOnWindow;
    report.stage("dual plant NUES backward", ok1, format!("{dstatus:?}"));

    // stage 2: detectability theorem on the dual pair
    let dsys = ev.with_system(dual(sys)?);
    let observer = FeedbackGain::new(GainRole::Observer, f.entries.transpose().reflect_time());
    let mut dsettings = settings.clone();
    dsettings.t_grid = reflect(&settings.t_grid);
    dsettings.hyp_t = hyp_r;
    let dscenario = Scenario {
        gains: vec![],
        pinned: scenario.pinned.iter().filter_map(|(k, v)| k.strip_prefix("detect.").map(|k| (k.to_string(), v.clone()))).collect(),
    };
    let sub = verify_detectability_implies_nuco(&dsys, &observer, &dscenario, &dsettings)?;
    let ok2 = sub.status == ReportStatus::Pass;
    report.stage("detectability on the dual pair", ok2, format!("{:?}", sub.status));
    merge(&mut report, sub, "detect");

    // stage 3: the conclusion
    let verdict = classify(ev, Property::NUCC, &settings.classify_settings())?;
    report.stage("classify NUCC", verdict.status == VerdictStatus::CertifiedOnWindow, format!("{:?}", verdict.status));
    report.verdicts.push(verdict);
    Ok(report.finish(settings.slack_tol))
}

fn merge(report: &mut TheoremReport, sub: TheoremReport, prefix: &str) {
    for mut m in sub.margins {
        m.name = format!("{prefix}: {}", m.name);
        report.margins.push(m);
    }
    for (k, v) in sub.constants {
        report.constants.insert(format!("{prefix}.{k}"), v);
    }
    for (k, v) in sub.tables {
        report.tables.insert(format!("{prefix}.{k}"), v);
    }
    for (k, v) in sub.hypotheses.envelopes {
        report.hypotheses.envelopes.insert(format!("{prefix}.{k}"), v);
    }
    for (k, v) in sub.hypotheses.functions {
        report.hypotheses.functions.insert(format!("{prefix}.{k}"), v);
    }
    for mut r in sub.rows {
        r.group = format!("{prefix}.{}", r.group);
        report.rows.push(r);
    }
    report.verdicts.extend(sub.verdicts);
    report.notes.extend(sub.notes.into_iter().map(|n| format!("{prefix}: {n}")));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::linspace;
    use crate::matrix::ExprMatrix;

    fn scalar(a: &str, b: &str) -> TransitionEvaluator {
        let p = |s: &str| ExprMatrix::parse(&[vec![s]]).unwrap();
        TransitionEvaluator::new(LtvSystem::new("s", p(a), Some(p(b)), None, (-6.0, 6.0)).unwrap(), Default::default())
    }

    fn gain(f: &str) -> FeedbackGain {
        FeedbackGain::new(GainRole::StateFeedback, ExprMatrix::parse(&[vec![f]]).unwrap())
    }

    fn settings() -> VerifySettings {
        VerifySettings::new(linspace(-3.0, 3.0, 7), vec![1.0, 2.0], linspace(-3.0, 3.0, 13))
    }

    #[test]
    fn zero_feedback_same_verdicts() {
        let r = verify_feedback_controllability(&scalar("0", "1"), &gain("0"), &Scenario::default(), &settings()).unwrap();
        assert_eq!(r.status, ReportStatus::Pass);
        assert_eq!(r.verdicts[0], r.verdicts[1].clone());
    }

    #[test]
    fn decaying_feedback_keeps_nucc() {
        let r = verify_feedback_controllability(&scalar("0", "1"), &gain("0.2*exp(-abs(t))"), &Scenario::default(), &settings()).unwrap();
        assert_eq!(r.status, ReportStatus::Pass);
        assert!(r.verdicts.iter().all(|v| v.status == VerdictStatus::CertifiedOnWindow));
    }

    #[test]
    fn constant_feedback_is_gated() {
        let r = verify_feedback_controllability(&scalar("0", "1"), &gain("1"), &Scenario::default(), &settings()).unwrap();
        assert_eq!(r.status, ReportStatus::HypothesisViolated);
        assert!(r.verdicts.is_empty());
    }

    #[test]
    fn stable_plant_fails_backward_gate() {
        let r = verify_stabilizability_implies_nucc(&scalar("-1", "1"), &gain("0"), &Scenario::default(), &settings()).unwrap();
        assert_eq!(r.status, ReportStatus::HypothesisViolated);
        assert_eq!(r.failed_stage, Some(0));
        assert!(r.violated_margins().iter().any(|m| m.name == "alpha - mu"));
    }
}
