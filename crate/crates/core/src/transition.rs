use std::collections::{HashMap, HashSet};
use std::sync::RwLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::integrate::{dopri5, Rescale, Sample};
use crate::linalg::spectral_norm;
use crate::system::LtvSystem;

pub use crate::integrate::StepControl as IntegratorSettings;

/// Transition matrix in scaled form: `Φ = 2^log2_scale · mantissa`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMatrix {
    pub mantissa: DMatrix<f64>,
    pub log2_scale: i32,
}

impl ScaledMatrix {
    pub fn value(&self) -> DMatrix<f64> {
        &self.mantissa * 2f64.powi(self.log2_scale)
    }

    /// `ln ‖Φ‖₂` without overflow or underflow.
    pub fn log_norm(&self) -> f64 {
        spectral_norm(&self.mantissa).ln() + self.log2_scale as f64 * std::f64::consts::LN_2
    }

    fn from_sample(sample: &Sample, n: usize) -> ScaledMatrix {
        ScaledMatrix { mantissa: DMatrix::from_column_slice(n, n, &sample.y), log2_scale: sample.log2_scale }
    }
}

/// Computes `Φ(t, s)` for one system by adaptive integration.
///
/// Results for pairs of published grid nodes are cached; any other query
/// integrates afresh, so a value never depends on the order of earlier calls.
#[derive(Debug)]
pub struct TransitionEvaluator {
    system: LtvSystem,
    settings: IntegratorSettings,
    published: RwLock<HashSet<u64>>,
    cache: RwLock<HashMap<(u64, u64), ScaledMatrix>>,
}

impl Clone for TransitionEvaluator {
    fn clone(&self) -> Self {
        TransitionEvaluator::new(self.system.clone(), self.settings)
    }
}

impl TransitionEvaluator {
    pub fn new(system: LtvSystem, settings: IntegratorSettings) -> TransitionEvaluator {
        TransitionEvaluator {
            system,
            settings,
            published: RwLock::new(HashSet::new()),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn system(&self) -> &LtvSystem {
        &self.system
    }

    pub fn settings(&self) -> &IntegratorSettings {
        &self.settings
    }

    /// An evaluator for another system with the same settings.
    pub fn with_system(&self, system: LtvSystem) -> TransitionEvaluator {
        TransitionEvaluator::new(system, self.settings)
    }

    /// Marks `nodes` as grid nodes whose pairwise transitions may be cached.
    pub fn publish_grid(&self, nodes: &[f64]) {
        let mut set = self.published.write().expect("cache lock poisoned");
        set.extend(nodes.iter().map(|t| t.to_bits()));
    }

    pub fn cached_pairs(&self) -> usize {
        self.cache.read().expect("cache lock poisoned").len()
    }

    pub fn transition(&self, t: f64, s: f64) -> Result<DMatrix<f64>> {
        Ok(self.transition_scaled(t, s)?.value())
    }

    /// `‖Φ(t, s)‖₂`.
    pub fn norm(&self, t: f64, s: f64) -> Result<f64> {
        Ok(self.log_norm(t, s)?.exp())
    }

    pub fn log_norm(&self, t: f64, s: f64) -> Result<f64> {
        Ok(self.transition_scaled(t, s)?.log_norm())
    }

    pub fn transition_scaled(&self, t: f64, s: f64) -> Result<ScaledMatrix> {
        self.system.check_time(t)?;
        self.system.check_time(s)?;
        let n = self.system.n();
        if t == s {
            return Ok(ScaledMatrix { mantissa: DMatrix::identity(n, n), log2_scale: 0 });
        }
        let key = (t.to_bits(), s.to_bits());
        let cacheable = {
            let set = self.published.read().expect("cache lock poisoned");
            set.contains(&key.0) && set.contains(&key.1)
        };
        if cacheable {
            if let Some(hit) = self.cache.read().expect("cache lock poisoned").get(&key) {
                return Ok(hit.clone());
            }
        }
        let value = self.integrate(s, &[t])?.pop().expect("one output");
        if cacheable {
            self.cache.write().expect("cache lock poisoned").entry(key).or_insert_with(|| value.clone());
        }
        Ok(value)
    }

    /// `Φ(t, s)` for every `t` in `ts` using one forward and one backward pass
    /// from `s`. Not cached.
    pub fn transitions_from(&self, s: f64, ts: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        Ok(self.integrate(s, ts)?.into_iter().map(|m| m.value()).collect())
    }

    /// Scaled `Φ(t, s)` for every `t` in `ts`; see [`Self::transitions_from`].
    pub fn transitions_from_scaled(&self, s: f64, ts: &[f64]) -> Result<Vec<ScaledMatrix>> {
        self.integrate(s, ts)
    }

    fn integrate(&self, s: f64, ts: &[f64]) -> Result<Vec<ScaledMatrix>> {
        self.system.check_time(s)?;
        for &t in ts {
            self.system.check_time(t)?;
        }
        let n = self.system.n();
        let mut result = vec![None; ts.len()];
        for dir in [1.0, -1.0] {
            let mut idx: Vec<usize> = (0..ts.len()).filter(|&i| (ts[i] - s) * dir > 0.0).collect();
            idx.sort_by(|&i, &j| ((ts[i] - s) * dir).total_cmp(&((ts[j] - s) * dir)));
            if idx.is_empty() {
                continue;
            }
            let taus: Vec<f64> = idx.iter().map(|&i| (ts[i] - s) * dir).collect();
            let eye = DMatrix::<f64>::identity(n, n);
            let samples = dopri5(
                matrix_rhs(&self.system, s, dir),
                0.0,
                eye.as_slice(),
                &taus,
                &self.settings,
                Rescale::Homogeneous(n * n),
            )?;
            for (k, &i) in idx.iter().enumerate() {
                result[i] = Some(ScaledMatrix::from_sample(&samples[k], n));
            }
        }
        Ok(result
            .into_iter()
            .map(|m| m.unwrap_or_else(|| ScaledMatrix { mantissa: DMatrix::identity(n, n), log2_scale: 0 }))
            .collect())
    }
}

/// Right-hand side of `dX/dτ = dir·A(origin + dir·τ)·X` on a column-major `n×n` state.
pub(crate) fn matrix_rhs(sys: &LtvSystem, origin: f64, dir: f64) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> + '_ {
    let n = sys.n();
    let mut a = DMatrix::zeros(n, n);
    move |tau, y, dy| {
        sys.a.eval_into(origin + dir * tau, &mut a)?;
        left_multiply(&a, dir, y, &mut dy[..n * n], n);
        Ok(())
    }
}

/// `out = sign · A · Y` where `Y` is the first `n·n` entries of `y`, column-major.
pub(crate) fn left_multiply(a: &DMatrix<f64>, sign: f64, y: &[f64], out: &mut [f64], n: usize) {
    for j in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[(i, k)] * y[k + n * j];
            }
            out[i + n * j] = sign * acc;
        }
    }
}

/// Relative distance `‖X − Y‖ / max(1, ‖Y‖)` in the spectral norm.
pub fn relative_residual(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    spectral_norm(&(x - y)) / spectral_norm(y).max(1.0)
}

/// Checks that `ts` is inside the system domain.
pub fn check_grid(sys: &LtvSystem, ts: &[f64]) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    ts.iter().try_for_each(|&t| sys.check_time(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ExprMatrix;
    use std::f64::consts::PI;

    fn scalar_system(a: &str, domain: (f64, f64)) -> LtvSystem {
        LtvSystem::new("s", ExprMatrix::parse(&[vec![a]]).unwrap(), None, None, domain).unwrap()
    }

    fn s1_oracle(t: f64, s: f64) -> f64 {
        let g = |x: f64| x * x.cos() - x.sin();
        (g(t) - g(s)).exp()
    }

    #[test]
    fn identity_is_exact() {
        let ev = TransitionEvaluator::new(scalar_system("-t*sin(t)", (-10.0, 10.0)), Default::default());
        assert_eq!(ev.transition(1.234, 1.234).unwrap()[(0, 0)], 1.0);
        let ev = TransitionEvaluator::new(
            LtvSystem::new("z", ExprMatrix::zeros(2, 2), None, None, (0.0, 5.0)).unwrap(),
            Default::default(),
        );
        assert_eq!(ev.transition(4.0, 1.0).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn closed_form_examples() {
        let ev = TransitionEvaluator::new(scalar_system("-1", (-5.0, 5.0)), Default::default());
        assert!((ev.transition(1.0, 0.0).unwrap()[(0, 0)] - (-1f64).exp()).abs() < 1e-8);
        assert!((ev.transition(0.0, 1.0).unwrap()[(0, 0)] - 1f64.exp()).abs() < 1e-8);

        let ev = TransitionEvaluator::new(scalar_system("-t*sin(t)", (-35.0, 35.0)), Default::default());
        let (t, s) = (2.0 * PI, 1.5 * PI);
        let v = ev.transition(t, s).unwrap()[(0, 0)];
        let exact = (2.0 * PI - 1.0).exp();
        assert!((v / exact - 1.0).abs() < 1e-6, "{v} vs {exact}");
        assert!((s1_oracle(t, s) / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_generator() {
        let a = ExprMatrix::parse(&[vec!["0", "1"], vec!["-1", "0"]]).unwrap();
        let ev = TransitionEvaluator::new(LtvSystem::new("rot", a, None, None, (-10.0, 10.0)).unwrap(), Default::default());
        let phi = ev.transition(3.0, -1.0).unwrap();
        let (c, s) = (4f64.cos(), 4f64.sin());
        let exact = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        assert!((phi - exact).abs().max() < 1e-8);
    }

    #[test]
    fn cache_only_for_published_nodes() {
        let ev = TransitionEvaluator::new(scalar_system("-t*sin(t)", (-10.0, 10.0)), Default::default());
        ev.transition(1.0, 2.0).unwrap();
        assert_eq!(ev.cached_pairs(), 0);
        ev.publish_grid(&[1.0, 2.0]);
        let first = ev.transition(1.0, 2.0).unwrap();
        assert_eq!(ev.cached_pairs(), 1);
        assert_eq!(ev.transition(1.0, 2.0).unwrap(), first);
        let fresh = TransitionEvaluator::new(ev.system().clone(), *ev.settings()).transition(1.0, 2.0).unwrap();
        assert_eq!(fresh, first);
    }

    #[test]
    fn multi_output_agrees_with_single() {
        let ev = TransitionEvaluator::new(scalar_system("-t*sin(t)", (-10.0, 10.0)), Default::default());
        let ts = [-9.0, -2.5, 0.0, 1.0, 7.5];
        let many = ev.transitions_from(1.0, &ts).unwrap();
        for (t, m) in ts.iter().zip(&many) {
            let exact = s1_oracle(*t, 1.0);
            assert!((m[(0, 0)] / exact - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn outside_domain_rejected() {
        let ev = TransitionEvaluator::new(scalar_system("-1", (0.0, 1.0)), Default::default());
        assert!(matches!(ev.transition(2.0, 0.0), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn log_norm_survives_extreme_scales() {
        let ev = TransitionEvaluator::new(scalar_system("-100", (0.0, 10.0)), Default::default());
        let ln = ev.log_norm(10.0, 0.0).unwrap();
        assert!((ln + 1000.0).abs() < 1e-5, "{ln}");
    }
}
