//! Adjoint, dual and closed-loop systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ExprMatrix;
use crate::system::LtvSystem;
use crate::transition::{relative_residual, TransitionEvaluator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainRole {
    /// `u = −F y`, `F` is p×m; acts on the plant through `K = B F`.
    OutputFeedback,
    /// `K`, n×m.
    OutputInjection,
    /// Observer gain `L`, n×m.
    Observer,
    /// `u = −F x + v`, `F` is p×n.
    StateFeedback,
    /// Additive plant perturbation `P`, n×n.
    Perturbation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackGain {
    pub role: GainRole,
    pub entries: ExprMatrix,
}

impl FeedbackGain {
    pub fn new(role: GainRole, entries: ExprMatrix) -> FeedbackGain {
        FeedbackGain { role, entries }
    }

    pub fn neg(&self) -> FeedbackGain {
        FeedbackGain { role: self.role, entries: self.entries.neg() }
    }

    /// The shape this gain must have for `sys`.
    pub fn expected_shape(&self, sys: &LtvSystem) -> (usize, usize) {
        let (n, p, m) = (sys.n(), sys.p(), sys.m());
        match self.role {
            GainRole::OutputFeedback => (p, m),
            GainRole::OutputInjection | GainRole::Observer => (n, m),
            GainRole::StateFeedback => (p, n),
            GainRole::Perturbation => (n, n),
        }
    }

    fn check_shape(&self, sys: &LtvSystem) -> Result<()> {
        let want = self.expected_shape(sys);
        if self.entries.shape() != want {
            return Err(Error::Dimension(format!(
                "{:?} gain is {}x{}, system `{}` needs {}x{}",
                self.role,
                self.entries.rows(),
                self.entries.cols(),
                sys.name,
                want.0,
                want.1
            )));
        }
        Ok(())
    }

    fn require_role(&self, allowed: &[GainRole], op: &str) -> Result<()> {
        if allowed.contains(&self.role) {
            Ok(())
        } else {
            Err(Error::invalid(format!("{op} does not accept a {:?} gain", self.role)))
        }
    }
}

/// Plant `−Aᵀ(t)`, input `−Cᵀ(t)`, output `−Bᵀ(t)` (when present).
pub fn adjoint(sys: &LtvSystem) -> Result<LtvSystem> {
    if sys.b.is_none() && sys.c.is_none() {
        return Err(Error::MissingMatrix { system: sys.name.clone(), matrix: "C" });
    }
    LtvSystem::new(
        format!("adjoint({})", sys.name),
        adjoint_plant(&sys.a),
        sys.c.as_ref().map(|c| c.transpose().neg()),
        sys.b.as_ref().map(|b| b.transpose().neg()),
        sys.domain,
    )
}

pub fn adjoint_plant(a: &ExprMatrix) -> ExprMatrix {
    a.transpose().neg()
}

/// Plant `Aᵀ(−t)`, input `Cᵀ(−t)`, output `Bᵀ(−t)` on the reflected domain.
pub fn dual(sys: &LtvSystem) -> Result<LtvSystem> {
    if sys.b.is_none() && sys.c.is_none() {
        return Err(Error::MissingMatrix { system: sys.name.clone(), matrix: "C" });
    }
    let flip = |m: &ExprMatrix| m.transpose().reflect_time();
    LtvSystem::new(
        format!("dual({})", sys.name),
        dual_plant(&sys.a),
        sys.c.as_ref().map(flip),
        sys.b.as_ref().map(flip),
        reflect_domain(sys.domain),
    )
}

pub fn dual_plant(a: &ExprMatrix) -> ExprMatrix {
    a.transpose().reflect_time()
}

pub fn reflect_domain((lo, hi): (f64, f64)) -> (f64, f64) {
    (-hi, -lo)
}

/// Plant `A − K C` with `C` kept and no input. An output-feedback gain `F`
/// enters as `K = B F`.
pub fn output_injection(sys: &LtvSystem, gain: &FeedbackGain) -> Result<LtvSystem> {
    gain.require_role(&[GainRole::OutputInjection, GainRole::OutputFeedback, GainRole::Observer], "output injection")?;
    let c = sys.require_c()?;
    gain.check_shape(sys)?;
    let k = match gain.role {
        GainRole::OutputFeedback => sys.require_b()?.mul(&gain.entries)?,
        _ => gain.entries.clone(),
    };
    LtvSystem::new(format!("{}-KC", sys.name), sys.a.sub(&k.mul(c)?)?, None, Some(c.clone()), sys.domain)
}

/// Error dynamics `A − L C` of a Luenberger observer.
pub fn observer_error_system(sys: &LtvSystem, l: &FeedbackGain) -> Result<LtvSystem> {
    l.require_role(&[GainRole::Observer], "observer error system")?;
    let mut e = output_injection(sys, l)?;
    e.name = format!("{}-LC", sys.name);
    Ok(e)
}

/// Plant `A − B F` with `B` (and `C`) kept.
pub fn state_feedback(sys: &LtvSystem, f: &FeedbackGain) -> Result<LtvSystem> {
    f.require_role(&[GainRole::StateFeedback], "state feedback")?;
    let b = sys.require_b()?;
    f.check_shape(sys)?;
    LtvSystem::new(format!("{}-BF", sys.name), sys.a.sub(&b.mul(&f.entries)?)?, Some(b.clone()), sys.c.clone(), sys.domain)
}

/// Plant `A + P`.
pub fn perturbed(sys: &LtvSystem, p: &FeedbackGain) -> Result<LtvSystem> {
    p.require_role(&[GainRole::Perturbation], "perturbation")?;
    p.check_shape(sys)?;
    LtvSystem::new(format!("{}+P", sys.name), sys.a.add(&p.entries)?, sys.b.clone(), sys.c.clone(), sys.domain)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionIdentityReport {
    /// max ‖Ψᵃ(t,τ) − Φᵀ(τ,t)‖ / max(1, ‖Φ‖)
    pub adjoint_residual: f64,
    pub adjoint_worst: (f64, f64),
    /// max ‖Ψᵈ(t,τ) − Φᵀ(−τ,−t)‖ / max(1, ‖Φ‖)
    pub dual_residual: f64,
    pub dual_worst: (f64, f64),
}

/// Compares adjoint and dual transition matrices with transposed original
/// ones, every matrix from its own integration.
pub fn verify_adjoint_dual_transitions(ev: &TransitionEvaluator, grid: &[(f64, f64)]) -> Result<TransitionIdentityReport> {
    let sys = ev.system();
    let adj = ev.with_system(LtvSystem::new("adjoint plant", adjoint_plant(&sys.a), None, None, sys.domain)?);
    let dua = ev.with_system(LtvSystem::new("dual plant", dual_plant(&sys.a), None, None, reflect_domain(sys.domain))?);
    let mut rep = TransitionIdentityReport { adjoint_residual: 0.0, adjoint_worst: (0.0, 0.0), dual_residual: 0.0, dual_worst: (0.0, 0.0) };
    if grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    for &(t, tau) in grid {
        let phi = ev.transition(tau, t)?.transpose();
        let r = relative_residual(&adj.transition(t, tau)?, &phi);
        if r >= rep.adjoint_residual {
            rep.adjoint_residual = r;
            rep.adjoint_worst = (t, tau);
        }
        let phi = ev.transition(-tau, -t)?.transpose();
        let r = relative_residual(&dua.transition(t, tau)?, &phi);
        if r >= rep.dual_residual {
            rep.dual_residual = r;
            rep.dual_worst = (t, tau);
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::TimeExpr;

    fn p(rows: &[&[&str]]) -> ExprMatrix {
        ExprMatrix::parse(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn samples() -> impl Iterator<Item = f64> {
        (0..20).map(|k| -3.0 + 0.31 * k as f64)
    }

    fn same(a: &ExprMatrix, b: &ExprMatrix) -> bool {
        samples().all(|t| (a.eval(t).unwrap() - b.eval(t).unwrap()).abs().max() <= 1e-12)
    }

    #[test]
    fn adjoint_examples() {
        let sys = LtvSystem::new("s", p(&[&["-1"]]), None, Some(p(&[&["1"]])), (0.0, 1.0)).unwrap();
        let adj = adjoint(&sys).unwrap();
        assert_eq!(adj.a.eval(0.0).unwrap()[(0, 0)], 1.0);
        assert_eq!(adj.b.as_ref().unwrap().eval(0.0).unwrap()[(0, 0)], -1.0);
        let a = p(&[&["t", "2"], &["sin(t)", "0"]]);
        let sys = LtvSystem::new("s", a.clone(), None, Some(ExprMatrix::identity(2)), (0.0, 1.0)).unwrap();
        let adj = adjoint(&sys).unwrap();
        for t in samples() {
            let (x, y) = (adj.a.eval(t).unwrap(), a.eval(t).unwrap());
            assert_eq!(x, -y.transpose());
        }
        assert!(adjoint(&LtvSystem::new("s", a, None, None, (0.0, 1.0)).unwrap()).is_err());
    }

    #[test]
    fn dual_examples() {
        let sys = LtvSystem::new("s", p(&[&["t"]]), None, Some(p(&[&["2"]])), (-1.0, 3.0)).unwrap();
        let d = dual(&sys).unwrap();
        assert_eq!(d.domain, (-3.0, 1.0));
        assert_eq!(d.a.eval(2.0).unwrap()[(0, 0)], -2.0);
        let s1 = LtvSystem::new("s1", p(&[&["-t*sin(t)"]]), None, Some(p(&[&["1"]])), (-5.0, 5.0)).unwrap();
        let d = dual(&s1).unwrap();
        // −t sin t is even
        assert!(same(&d.a, &s1.a));
    }

    #[test]
    fn involutions() {
        let a = p(&[&["t", "exp(-t)"], &["cos(t)", "-2"]]);
        let b = p(&[&["1"], &["t"]]);
        let c = p(&[&["0", "sin(t)"]]);
        let sys = LtvSystem::new("s", a, Some(b), Some(c), (-4.0, 4.0)).unwrap();
        let back = adjoint(&adjoint(&sys).unwrap()).unwrap();
        assert!(same(&back.a, &sys.a));
        assert!(same(back.b.as_ref().unwrap(), sys.b.as_ref().unwrap()));
        assert!(same(back.c.as_ref().unwrap(), sys.c.as_ref().unwrap()));
        let back = dual(&dual(&sys).unwrap()).unwrap();
        assert_eq!(back.domain, sys.domain);
        assert!(same(&back.a, &sys.a));
        assert!(same(back.c.as_ref().unwrap(), sys.c.as_ref().unwrap()));
    }

    #[test]
    fn output_injection_examples() {
        let sys = LtvSystem::new("s", p(&[&["0"]]), None, Some(p(&[&["1"]])), (-3.0, 3.0)).unwrap();
        let k = FeedbackGain::new(GainRole::OutputInjection, p(&[&["1"]]));
        assert_eq!(output_injection(&sys, &k).unwrap().a.eval(0.0).unwrap()[(0, 0)], -1.0);
        let zero = FeedbackGain::new(GainRole::OutputInjection, p(&[&["0"]]));
        assert!(same(&output_injection(&sys, &zero).unwrap().a, &sys.a));

        let sys = LtvSystem::new("s", p(&[&["-1"]]), Some(p(&[&["1"]])), Some(p(&[&["1"]])), (-3.0, 3.0)).unwrap();
        let k = FeedbackGain::new(GainRole::OutputInjection, p(&[&["exp(-2*abs(t))"]]));
        let cl = output_injection(&sys, &k).unwrap();
        assert!(cl.b.is_none());
        for t in samples() {
            let want = -1.0 - (-2.0 * t.abs()).exp();
            assert!((cl.a.eval(t).unwrap()[(0, 0)] - want).abs() < 1e-15);
        }
        let l = FeedbackGain::new(GainRole::Observer, p(&[&["exp(-2*abs(t))"]]));
        assert!(same(&observer_error_system(&sys, &l).unwrap().a, &cl.a));
        assert!(observer_error_system(&sys, &k).is_err());

        // symmetric remark: A = Ã − (−K) C
        let back = output_injection(&cl, &k.neg()).unwrap();
        assert!(same(&back.a, &sys.a));

        // output feedback enters through K = B F
        let f = FeedbackGain::new(GainRole::OutputFeedback, p(&[&["exp(-2*abs(t))"]]));
        assert!(same(&output_injection(&sys, &f).unwrap().a, &cl.a));
        let bad = FeedbackGain::new(GainRole::OutputInjection, p(&[&["1", "2"]]));
        assert!(matches!(output_injection(&sys, &bad), Err(Error::Dimension(_))));
    }

    #[test]
    fn state_feedback_examples() {
        let sys = LtvSystem::new("s", p(&[&["1"]]), Some(p(&[&["1"]])), None, (-3.0, 3.0)).unwrap();
        let f = FeedbackGain::new(GainRole::StateFeedback, p(&[&["2"]]));
        let cl = state_feedback(&sys, &f).unwrap();
        assert_eq!(cl.a.eval(0.0).unwrap()[(0, 0)], -1.0);
        assert_eq!(cl.b.as_ref().unwrap().eval(0.0).unwrap()[(0, 0)], 1.0);
        let zero = FeedbackGain::new(GainRole::StateFeedback, p(&[&["0"]]));
        assert!(same(&state_feedback(&sys, &zero).unwrap().a, &sys.a));

        let sys = LtvSystem::new("s", p(&[&["0"]]), Some(p(&[&["exp(t/2)"]])), None, (-3.0, 3.0)).unwrap();
        let f = FeedbackGain::new(GainRole::StateFeedback, p(&[&["exp(-3*abs(t))"]]));
        let cl = state_feedback(&sys, &f).unwrap();
        for t in samples() {
            let want = -(t / 2.0).exp() * (-3.0 * t.abs()).exp();
            assert!((cl.a.eval(t).unwrap()[(0, 0)] - want).abs() < 1e-15);
        }
        let noinput = LtvSystem::new("s", p(&[&["0"]]), None, None, (-3.0, 3.0)).unwrap();
        assert!(state_feedback(&noinput, &f).is_err());
    }

    #[test]
    fn transition_identities() {
        let sys = LtvSystem::new("z", ExprMatrix::zeros(2, 2), None, Some(ExprMatrix::identity(2)), (-3.0, 3.0)).unwrap();
        let ev = TransitionEvaluator::new(sys, Default::default());
        let r = verify_adjoint_dual_transitions(&ev, &[(1.0, 0.0), (-2.0, 2.5)]).unwrap();
        assert!(r.adjoint_residual <= 1e-10 && r.dual_residual <= 1e-10);

        let sys = LtvSystem::new("s", p(&[&["-1"]]), None, Some(p(&[&["1"]])), (-3.0, 3.0)).unwrap();
        let ev = TransitionEvaluator::new(sys, Default::default());
        let adj = ev.with_system(LtvSystem::new("a", adjoint_plant(&ev.system().a), None, None, (-3.0, 3.0)).unwrap());
        assert!((adj.transition(1.0, 0.0).unwrap()[(0, 0)] - 1f64.exp()).abs() < 1e-8);
        let r = verify_adjoint_dual_transitions(&ev, &[(1.0, 0.0)]).unwrap();
        assert!(r.adjoint_residual <= 1e-8);

        let s1 = LtvSystem::new("s1", ExprMatrix::scalar(-TimeExpr::time() * TimeExpr::call(crate::expr::Func::Sin, &TimeExpr::time())), None, Some(p(&[&["1"]])), (-3.0, 3.0)).unwrap();
        let ev = TransitionEvaluator::new(s1, Default::default());
        let pts: Vec<f64> = (0..5).map(|k| -3.0 + 1.5 * k as f64).collect();
        let grid: Vec<(f64, f64)> = pts.iter().flat_map(|&t| pts.iter().map(move |&s| (t, s))).collect();
        let r = verify_adjoint_dual_transitions(&ev, &grid).unwrap();
        assert!(r.adjoint_residual <= 1e-6 && r.dual_residual <= 1e-6, "{r:?}");
    }
}
