use super::{NamedEnvelope, TheoremId, TheoremReport, VerifySettings, UNIT_PREFACTOR_TOL};
use crate::classify::VerdictStatus;
use crate::envelope::{fit_envelope, Envelope, EnvelopeKind, PairGrid};
use crate::error::Result;
use crate::system::LtvSystem;
use crate::transforms::{adjoint_plant, dual_plant, reflect_domain};
use crate::transition::TransitionEvaluator;

/// Reads a tightest NUES fit as a verdict. Decay needs `β > 0` within the
/// prefactor cap; a tightest fit with `β = 0` and prefactor above 1 means no
/// decaying envelope beats it on the window, while prefactor 1 is the neutral
/// boundary case.
pub fn nues_status(env: &Envelope, log_cap: f64) -> VerdictStatus {
    if env.log_prefactor > log_cap {
        VerdictStatus::FalsifiedUnderCaps
    } else if env.rate > 0.0 {
        VerdictStatus::CertifiedOnWindow
    } else if env.log_prefactor > UNIT_PREFACTOR_TOL {
        VerdictStatus::FalsifiedUnderCaps
    } else {
        VerdictStatus::Inconclusive
    }
}

/// Forward decay of `V`, backward decay of `−Vᵀ` and forward decay of
/// `Vᵀ(−t)` must stand or fall together. All three are fitted on `t_grid`
/// joined with its reflection: on a one-sided window the `e^{ν|s|}` factor
/// can absorb the growth of a transformed plant, since the transformations
/// move the non-uniform weight to the other time argument.
pub fn verify_stability_equivalence(ev: &TransitionEvaluator, settings: &VerifySettings) -> Result<TheoremReport> {
    let sys = ev.system();
    let mut report = TheoremReport::new(TheoremId::StabEquiv, &sys.name);
    let adj = ev.with_system(LtvSystem::new(format!("adjoint({})", sys.name), adjoint_plant(&sys.a), None, None, sys.domain)?);
    let dua = ev.with_system(LtvSystem::new(format!("dual({})", sys.name), dual_plant(&sys.a), None, None, reflect_domain(sys.domain))?);
    let mut window: Vec<f64> = settings.t_grid.iter().flat_map(|&t| [t, -t]).map(|t| if t == 0.0 { 0.0 } else { t }).collect();
    window.sort_by(f64::total_cmp);
    window.dedup();
    let (rates, nus) = (settings.caps.rate_grid(), settings.caps.nu_grid());
    let log_cap = settings.caps.log_pref();
    let cases = [
        ("forward", ev, EnvelopeKind::NuesForward),
        ("adjoint backward", &adj, EnvelopeKind::NuesBackward),
        ("dual forward", &dua, EnvelopeKind::NuesForward),
    ];
    for (name, e, kind) in cases {
        let env = fit_envelope(e, kind, &PairGrid::for_kind(kind, &window), &rates, &nus, log_cap)?;
        let status = nues_status(&env, log_cap);
        report.envelopes.push(NamedEnvelope { name: name.into(), envelope: env, status: Some(status) });
    }
    let statuses: Vec<VerdictStatus> = report.envelopes.iter().filter_map(|e| e.status).collect();
    let agree = statuses.windows(2).all(|w| w[0] == w[1]);
    report.stage("three fits agree", agree, format!("{statuses:?}"));
    Ok(report.finish(settings.slack_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::linspace;
    use crate::matrix::ExprMatrix;
    use crate::verify::ReportStatus;

    fn run(v: &str) -> TheoremReport {
        let sys = LtvSystem::new("v", ExprMatrix::parse(&[vec![v]]).unwrap(), None, None, (-6.0, 6.0)).unwrap();
        let ev = TransitionEvaluator::new(sys, Default::default());
        verify_stability_equivalence(&ev, &VerifySettings::new(linspace(0.0, 5.0, 11), vec![], vec![])).unwrap()
    }

    fn statuses(r: &TheoremReport) -> Vec<VerdictStatus> {
        r.envelopes.iter().map(|e| e.status.unwrap()).collect()
    }

    #[test]
    fn decay_agrees() {
        let r = run("-1");
        assert_eq!(r.status, ReportStatus::Pass);
        assert_eq!(statuses(&r), vec![VerdictStatus::CertifiedOnWindow; 3]);
        assert_eq!(r.envelopes[0].envelope.rate, 1.0);
    }

    #[test]
    fn growth_agrees() {
        let r = run("1");
        assert_eq!(r.status, ReportStatus::Pass);
        assert_eq!(statuses(&r), vec![VerdictStatus::FalsifiedUnderCaps; 3]);
    }

    #[test]
    fn neutral_is_inconclusive() {
        let r = run("0");
        assert_eq!(statuses(&r), vec![VerdictStatus::Inconclusive; 3]);
    }
}
