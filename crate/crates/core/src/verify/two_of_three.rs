use super::{TheoremId, TheoremReport, VerifySettings};
use crate::classify::{two_of_three, ComponentCheck, TwoOfThree};
use crate::error::{Error, Result};
use crate::transition::TransitionEvaluator;

fn headroom(c: &ComponentCheck, log_cap: f64) -> f64 {
    let used = match (&c.gramian_fit, &c.growth) {
        (Some(f), _) => f.log_ratio.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max),
        (_, Some(e)) => e.log_prefactor,
        _ => f64::INFINITY,
    };
    let h = log_cap - used;
    if c.certified { h } else { h.min(0.0) }
}

/// Given two of {left Gramian corridor, right Gramian corridor, growth
/// bound} certified on the window, the third must certify too.
pub fn verify_two_of_three(ev: &TransitionEvaluator, id: TheoremId, settings: &VerifySettings) -> Result<TheoremReport> {
    let which = match id {
        TheoremId::TwoOfThreeObs => TwoOfThree::Obs,
        TheoremId::TwoOfThreeCtrl => TwoOfThree::Ctrl,
        TheoremId::TwoOfThreeUniformObs => TwoOfThree::UniformObs,
        TheoremId::TwoOfThreeUniformCtrl => TwoOfThree::UniformCtrl,
        other => return Err(Error::invalid(format!("{other} is not a two-of-three theorem"))),
    };
    let rep = two_of_three(ev, which, &settings.classify_settings())?;
    let log_cap = settings.caps.log_pref();
    let mut report = TheoremReport::new(id, &ev.system().name);
    for c in &rep.given {
        report.margins.push(super::Margin { name: format!("{} certified", c.name), value: headroom(c, log_cap) });
    }
    if report.hypotheses_hold() {
        let d = &rep.derived;
        report.stage(&format!("derived {}", d.name), d.certified, format!("log headroom {}", headroom(d, log_cap)));
    } else {
        report.notes.push("input properties not certified on the window".into());
    }
    for c in rep.given.iter().chain(std::iter::once(&rep.derived)) {
        if let Some(e) = &c.growth {
            report.envelopes.push(super::NamedEnvelope { name: c.name.clone(), envelope: e.clone(), status: None });
        }
        if let Some(f) = &c.gramian_fit {
            report.constants.insert(format!("{:?}.nu0", f.kind), f.exponents.0);
            report.constants.insert(format!("{:?}.nu1", f.kind), f.exponents.1);
            for key in ["floor", "ceiling"] {
                let vals = if key == "floor" { &f.floors } else { &f.ceilings };
                report.tables.insert(format!("{:?}.{key}", f.kind), vals.iter().map(|v| (v.sigma, v.value)).collect());
            }
        }
    }
    Ok(report.finish(settings.slack_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::linspace;
    use crate::matrix::ExprMatrix;
    use crate::system::LtvSystem;
    use crate::verify::ReportStatus;

    #[test]
    fn identity_plant_bounded_growth() {
        let sys = LtvSystem::new("z", ExprMatrix::zeros(2, 2), Some(ExprMatrix::identity(2)), None, (-5.0, 5.0)).unwrap();
        let ev = TransitionEvaluator::new(sys, Default::default());
        let s = VerifySettings::new(linspace(-3.0, 3.0, 7), vec![1.0], vec![]);
        let r = verify_two_of_three(&ev, TheoremId::TwoOfThreeUniformCtrl, &s).unwrap();
        assert_eq!(r.status, ReportStatus::Pass);
        let e = &r.envelopes[0].envelope;
        assert_eq!((e.prefactor, e.rate), (1.0, 0.0));
    }

    #[test]
    fn missing_input_is_gated() {
        // C ≡ 0 leaves the M corridor uncertified
        let p = |s: &str| ExprMatrix::parse(&[vec![s]]).unwrap();
        let sys = LtvSystem::new("z", p("-1"), None, Some(p("0")), (-5.0, 5.0)).unwrap();
        let ev = TransitionEvaluator::new(sys, Default::default());
        let s = VerifySettings::new(linspace(-2.0, 2.0, 5), vec![1.0], vec![]);
        let r = verify_two_of_three(&ev, TheoremId::TwoOfThreeUniformObs, &s).unwrap();
        assert_eq!(r.status, ReportStatus::HypothesisViolated);
        assert!(r.stages.is_empty());
    }
}
