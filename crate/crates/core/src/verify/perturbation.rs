use super::{Hyp, NamedEnvelope, Scenario, SlackRow, TheoremId, TheoremReport, VerifySettings};
use crate::classify::Side;
use crate::envelope::{sample_log_norms, slack_on_samples, Envelope, EnvelopeKind, PairGrid, Trend};
use crate::error::Result;
use crate::transforms::{perturbed, FeedbackGain};
use crate::transition::TransitionEvaluator;

/// The perturbed plant `A + P` keeps bounded growth with constants
/// `(K₀, a + K₀𝒫, ε)` when `‖P(t)‖ ≤ 𝒫e^{−p|t|}` and `p > ε`.
pub fn verify_perturbation_lemma(ev: &TransitionEvaluator, p: &FeedbackGain, scenario: &Scenario, settings: &VerifySettings) -> Result<TheoremReport> {
    let sys = ev.system();
    let pert = ev.with_system(perturbed(sys, p)?);
    let mut report = TheoremReport::new(TheoremId::PerturbLemma, &sys.name);

    let mut hyp = Hyp::new(settings, scenario);
    let nubg = hyp.envelope(ev, "nubg", EnvelopeKind::Nubg, &settings.hyp_t)?;
    let pf = hyp.function("perturbation", &p.entries, &settings.hyp_t, Trend::Decay)?;
    let (k0, a, eps) = (nubg.prefactor, nubg.rate, nubg.nu);
    hyp.constant("K0", k0);
    hyp.constant("a", a);
    hyp.constant("epsilon", eps);
    hyp.constant("calP", pf.prefactor);
    hyp.constant("p", pf.rate);
    hyp.margin("NUBG within caps", hyp.log_cap() - nubg.log_prefactor);
    hyp.margin("p - epsilon", pf.rate - eps);
    hyp.into_report(&mut report);
    if !report.hypotheses_hold() {
        return Ok(report.finish(settings.slack_tol));
    }

    let predicted = Envelope::with_constants(EnvelopeKind::Nubg, k0, a + k0 * pf.prefactor, eps);
    report.constants.insert("predicted_rate".into(), predicted.rate);
    let grid = PairGrid::for_kind(EnvelopeKind::Nubg, &settings.t_grid);
    let logs = sample_log_norms(&pert, &grid.pairs)?;
    report.rows = grid
        .pairs
        .iter()
        .zip(&logs)
        .map(|(&(t, s), &l)| SlackRow::new("nubg", t, s, l.exp(), predicted.log_bound(t, s).exp(), Side::Upper))
        .collect();
    let mut checked = predicted.clone();
    let rep = slack_on_samples(&predicted, &grid.pairs, &logs);
    checked.slack = rep.min_slack;
    checked.binding = rep.argmin;
    report.envelopes.push(NamedEnvelope { name: "predicted".into(), envelope: checked, status: None });
    Ok(report.finish(settings.slack_tol))
}
