use serde::Serialize;

use super::{Hyp, Scenario, SlackRow, TheoremId, TheoremReport, VerifySettings};
use crate::classify::{classify, gramian_table, GramianEnvelopeFit, Property, Side, VerdictStatus};
use crate::envelope::{EnvelopeKind, Trend};
use crate::error::Result;
use crate::gramian::GramianKind;
use crate::transforms::{output_injection, FeedbackGain};
use crate::transition::TransitionEvaluator;

/// `φ(σ) = K₀𝒦𝒞² e^{2(a+δ−ε)σ} / (4(a+δ−ε)²)`
pub fn phi(k0: f64, gain: f64, out: f64, a: f64, delta: f64, eps: f64, sigma: f64) -> f64 {
    let r = a + delta - eps;
    k0 * gain * out * out * (2.0 * r * sigma).exp() / (4.0 * r * r)
}

/// `ψ(σ) = ϑ₁(σ) K₀𝒦𝒞² e^{2(a+K₀𝒦𝒞+δ−ε)σ} / (4(a+K₀𝒦𝒞+δ−ε)²)`
pub fn psi(theta1: f64, k0: f64, gain: f64, out: f64, a: f64, delta: f64, eps: f64, sigma: f64) -> f64 {
    let r = a + k0 * gain * out + delta - eps;
    theta1 * k0 * gain * out * out * (2.0 * r * sigma).exp() / (4.0 * r * r)
}

/// Lower and upper corridor for the closed-loop Gramian at time `t`.
pub fn corridor_bounds(theta0: f64, theta1: f64, phi: f64, psi: f64, nu0: f64, nu1: f64, t: f64) -> (f64, f64) {
    let denom = if phi > 1.0 { theta1.max((phi - 1.0) * theta0) } else { theta1 };
    let lower = theta0 * theta0 / (4.0 * denom) * (-(4.0 * nu0 + 2.0 * nu1) * t.abs()).exp();
    let upper = 4.0 * (theta1 + psi) * (2.0 * nu1 * t.abs()).exp();
    (lower, upper)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiCase {
    pub direction: String,
    pub sigma: f64,
    pub phi: f64,
    /// `a` for φ = 1, `b` for φ > 1, `c` for φ < 1
    pub case: char,
}

fn phi_case(phi: f64) -> char {
    if (phi - 1.0).abs() <= 1e-12 {
        'a'
    } else if phi > 1.0 {
        'b'
    } else {
        'c'
    }
}

struct Direction {
    name: &'static str,
    ev: TransitionEvaluator,
    gain: FeedbackGain,
    fit: Option<GramianEnvelopeFit>,
}

/// Closed-loop observability Gramians of `A − KC` stay in the corridor built
/// from the open-loop fit and the hypothesis constants. Both directions are
/// checked: `(A, K)` and `(A − KC, −K)`, with hypotheses fitted for each.
pub fn verify_feedback_observability(ev: &TransitionEvaluator, k: &FeedbackGain, scenario: &Scenario, settings: &VerifySettings) -> Result<TheoremReport> {
    let sys = ev.system();
    let mut report = TheoremReport::new(TheoremId::FeedbackObs, &sys.name);
    let closed = output_injection(sys, k)?;
    let mut dirs = vec![
        Direction { name: "forward", ev: ev.clone(), gain: k.clone(), fit: None },
        Direction { name: "reverse", ev: ev.with_system(closed), gain: k.neg(), fit: None },
    ];
    let mut hyp = Hyp::new(settings, scenario);
    for d in &mut dirs {
        let c = d.ev.system().require_c()?.clone();
        let key = |s: &str| format!("{}.{s}", d.name);
        let nubg = hyp.envelope(&d.ev, &key("nubg"), EnvelopeKind::Nubg, &settings.hyp_t)?;
        let gain = hyp.function(&key("gain"), &d.gain.entries, &settings.hyp_t, Trend::Decay)?;
        let out = hyp.function(&key("output"), &c, &settings.hyp_t, Trend::Growth)?;
        for (name, v) in [
            ("K0", nubg.prefactor),
            ("a", nubg.rate),
            ("epsilon", nubg.nu),
            ("calK", gain.prefactor),
            ("delta", gain.rate),
            ("calC", out.prefactor),
            ("gamma", out.rate),
        ] {
            hyp.constant(&key(name), v);
        }
        hyp.margin(&format!("{}: NUBG within caps", d.name), hyp.log_cap() - nubg.log_prefactor);
        hyp.margin(&format!("{}: C envelope within caps", d.name), hyp.log_cap() - out.prefactor.ln());
        hyp.margin(&format!("{}: delta - (gamma + epsilon)", d.name), gain.rate - (out.rate + nubg.nu));
        let verdict = classify(&d.ev, Property::NUCO, &settings.classify_settings())?;
        let fit = verdict.fits.first().cloned();
        let headroom = fit.as_ref().map(|f| hyp.log_cap() - f.log_ratio.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max));
        let headroom = match (verdict.status, headroom) {
            (VerdictStatus::CertifiedOnWindow, Some(h)) => h,
            (_, Some(h)) => h.min(0.0),
            _ => 0.0,
        };
        hyp.margin(&format!("{}: open-loop NUCO certified", d.name), headroom);
        if verdict.status == VerdictStatus::CertifiedOnWindow {
            if let Some(f) = &fit {
                hyp.constant(&key("nu0"), f.exponents.0);
                hyp.constant(&key("nu1"), f.exponents.1);
            }
            d.fit = fit;
        }
        report.verdicts.push(verdict);
    }
    hyp.into_report(&mut report);
    if !report.hypotheses_hold() {
        return Ok(report.finish(settings.slack_tol));
    }

    for d in &dirs {
        let fit = d.fit.as_ref().expect("certified");
        let c = |s: &str| report.constants[&format!("{}.{s}", d.name)];
        let (k0, a, eps, gk, delta, cc) = (c("K0"), c("a"), c("epsilon"), c("calK"), c("delta"), c("calC"));
        let (nu0, nu1) = fit.exponents;
        let closed = d.ev.with_system(output_injection(d.ev.system(), &d.gain)?);
        let table = gramian_table(&closed, GramianKind::M, &settings.t_grid, &settings.sigma_grid)?;
        let mut tabs: [Vec<(f64, f64)>; 4] = Default::default();
        for (j, &sigma) in settings.sigma_grid.iter().enumerate() {
            let (Some(th0), Some(th1)) = (fit.floor_at(sigma), fit.ceiling_at(sigma)) else {
                report.notes.push(format!("{}: no open-loop corridor at sigma = {sigma}", d.name));
                continue;
            };
            let ph = phi(k0, gk, cc, a, delta, eps, sigma);
            let ps = psi(th1, k0, gk, cc, a, delta, eps, sigma);
            for (tab, v) in tabs.iter_mut().zip([th0, th1, ph, ps]) {
                tab.push((sigma, v));
            }
            report.phi_cases.push(PhiCase { direction: d.name.into(), sigma, phi: ph, case: phi_case(ph) });
            for (i, &t) in settings.t_grid.iter().enumerate() {
                if !fit.sigma0[i].sigma0.is_some_and(|s0| sigma >= s0) {
                    continue;
                }
                let (lower, upper) = corridor_bounds(th0, th1, ph, ps, nu0, nu1, t);
                let group = format!("{}.corridor", d.name);
                report.rows.push(SlackRow::new(group.clone(), t, sigma, table.lambda_min[i][j], lower, Side::Lower));
                report.rows.push(SlackRow::new(group, t, sigma, table.lambda_max[i][j], upper, Side::Upper));
            }
        }
        for (name, tab) in ["theta0", "theta1", "phi", "psi"].iter().zip(tabs) {
            report.tables.insert(format!("{}.{name}", d.name), tab);
        }
    }
    Ok(report.finish(settings.slack_tol))
}
