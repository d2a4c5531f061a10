//! Exponential envelopes for `‖Φ(t,s)‖` and for time functions such as gain norms.
//!
//! Every template is affine in the log domain,
//!
//! ```text
//! ln ‖Φ(t,s)‖ ≤ ln pref + rate·g₁(t,s) + nu·g₂(t,s)
//! ```
//!
//! | kind          | g₁        | g₂   | pairs  |
//! |---------------|-----------|------|--------|
//! | `UBG`         | \|t − s\| | 0    | all    |
//! | `NUBG`        | \|t − s\| | \|s\| | all    |
//! | `NUKalman`    | \|t − s\| | s    | all    |
//! | `NuesForward` | −(t − s)  | \|s\| | t ≥ s  |
//! | `NuesBackward`| t − s     | \|s\| | t ≤ s  |
//!
//! For fixed `(rate, nu)` the smallest admissible prefactor is the largest
//! residual over the samples. Among the search grid the fit keeps the pair
//! whose envelope is lowest on average over the samples (ties: smaller `nu`,
//! then the rate giving the lower average template).

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ExprMatrix;
use crate::linalg::spectral_norm;
use crate::transition::TransitionEvaluator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvelopeKind {
    #[serde(rename = "UBG")]
    Ubg,
    #[serde(rename = "NUBG")]
    Nubg,
    #[serde(rename = "NUKalman")]
    NuKalman,
    NuesForward,
    NuesBackward,
}

impl EnvelopeKind {
    pub const ALL: [EnvelopeKind; 5] =
        [EnvelopeKind::Ubg, EnvelopeKind::Nubg, EnvelopeKind::NuKalman, EnvelopeKind::NuesForward, EnvelopeKind::NuesBackward];

    pub fn g1(self, t: f64, s: f64) -> f64 {
        match self {
            EnvelopeKind::Ubg | EnvelopeKind::Nubg | EnvelopeKind::NuKalman => (t - s).abs(),
            EnvelopeKind::NuesForward => -(t - s),
            EnvelopeKind::NuesBackward => t - s,
        }
    }

    pub fn g2(self, _t: f64, s: f64) -> f64 {
        match self {
            EnvelopeKind::Ubg => 0.0,
            EnvelopeKind::NuKalman => s,
            EnvelopeKind::Nubg | EnvelopeKind::NuesForward | EnvelopeKind::NuesBackward => s.abs(),
        }
    }

    pub fn admits(self, t: f64, s: f64) -> bool {
        match self {
            EnvelopeKind::NuesForward => t >= s,
            EnvelopeKind::NuesBackward => t <= s,
            _ => true,
        }
    }

    pub fn is_nues(self) -> bool {
        matches!(self, EnvelopeKind::NuesForward | EnvelopeKind::NuesBackward)
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvelopeKind::Ubg => "UBG",
            EnvelopeKind::Nubg => "NUBG",
            EnvelopeKind::NuKalman => "NUKalman",
            EnvelopeKind::NuesForward => "NuesForward",
            EnvelopeKind::NuesBackward => "NuesBackward",
        }
    }

    pub fn parse(text: &str) -> Option<EnvelopeKind> {
        EnvelopeKind::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(text))
    }
}

/// Ordered `(t, s)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairGrid {
    pub pairs: Vec<(f64, f64)>,
}

impl PairGrid {
    /// Every `(t, s)` from `ts × ts` that the kind admits.
    pub fn for_kind(kind: EnvelopeKind, ts: &[f64]) -> PairGrid {
        PairGrid::product(kind, ts, ts)
    }

    pub fn product(kind: EnvelopeKind, ts: &[f64], ss: &[f64]) -> PairGrid {
        let pairs = ts.iter().flat_map(|&t| ss.iter().map(move |&s| (t, s))).filter(|&(t, s)| kind.admits(t, s)).collect();
        PairGrid { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn check(&self, kind: EnvelopeKind) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::invalid("empty envelope grid"));
        }
        if let Some(&(t, s)) = self.pairs.iter().find(|&&(t, s)| !kind.admits(t, s)) {
            return Err(Error::invalid(format!("pair ({t}, {s}) violates the {} ordering", kind.name())));
        }
        Ok(())
    }
}

/// `ln ‖Φ(t, s)‖` for each pair, one integration pass per distinct `s`.
pub fn sample_log_norms(ev: &TransitionEvaluator, pairs: &[(f64, f64)]) -> Result<Vec<f64>> {
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut index: HashMap<u64, usize> = HashMap::new();
    for (i, &(_, s)) in pairs.iter().enumerate() {
        let g = *index.entry(s.to_bits()).or_insert_with(|| {
            groups.push((s, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(i);
    }
    let columns: Vec<Vec<f64>> = groups
        .par_iter()
        .map(|(s, idx)| {
            let ts: Vec<f64> = idx.iter().map(|&i| pairs[i].0).collect();
            Ok(ev.transitions_from_scaled(*s, &ts)?.iter().map(|m| m.log_norm()).collect())
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; pairs.len()];
    for ((_, idx), col) in groups.iter().zip(columns) {
        for (&i, v) in idx.iter().zip(col) {
            out[i] = v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t_min: f64,
    pub t_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub pairs: usize,
}

impl Window {
    fn of(pairs: &[(f64, f64)]) -> Window {
        let fold = |f: fn(&(f64, f64)) -> f64| {
            pairs.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let (t_min, t_max) = fold(|p| p.0);
        let (s_min, s_max) = fold(|p| p.1);
        Window { t_min, t_max, s_min, s_max, pairs: pairs.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub prefactor: f64,
    pub log_prefactor: f64,
    pub rate: f64,
    pub nu: f64,
    /// min over the fit window of `ln bound − ln ‖Φ‖`
    pub slack: f64,
    /// the pair where the slack is attained
    pub binding: (f64, f64),
    pub window: Option<Window>,
}

impl Envelope {
    /// An envelope with given constants, not yet checked against any data.
    pub fn with_constants(kind: EnvelopeKind, prefactor: f64, rate: f64, nu: f64) -> Envelope {
        Envelope { kind, prefactor, log_prefactor: prefactor.ln(), rate, nu, slack: f64::NAN, binding: (f64::NAN, f64::NAN), window: None }
    }

    pub fn template(&self, t: f64, s: f64) -> f64 {
        self.rate * self.kind.g1(t, s) + self.nu * self.kind.g2(t, s)
    }

    pub fn log_bound(&self, t: f64, s: f64) -> f64 {
        self.log_prefactor + self.template(t, s)
    }
}

#[derive(Debug, Clone, Copy)]
struct Choice {
    rate: f64,
    nu: f64,
    log_pref: f64,
    objective: f64,
    tight: f64,
}

impl Choice {
    fn key_cmp(&self, other: &Choice) -> std::cmp::Ordering {
        self.objective
            .total_cmp(&other.objective)
            .then(self.nu.total_cmp(&other.nu))
            .then(self.tight.total_cmp(&other.tight))
            .then(self.rate.total_cmp(&other.rate))
    }
}

/// Sample point for the fit: `(ln value, g₁, g₂)`.
type Point = (f64, f64, f64);

/// Tightest choice among those with `ln K ≤ log_cap`; when none qualifies,
/// the one with the smallest prefactor.
fn fit_core(points: &[Point], rates: &[f64], nus: &[f64], floor: Option<f64>, log_cap: f64) -> Result<Choice> {
    if points.is_empty() {
        return Err(Error::invalid("no samples to fit"));
    }
    if rates.is_empty() || nus.is_empty() {
        return Err(Error::invalid("empty search grid"));
    }
    if points.iter().any(|p| p.0.is_nan() || p.0 == f64::INFINITY) {
        return Err(Error::invalid("non-finite samples"));
    }
    let count = points.len() as f64;
    let mean_g1 = points.iter().map(|p| p.1).sum::<f64>() / count;
    let mean_g2 = points.iter().map(|p| p.2).sum::<f64>() / count;
    let combos: Vec<(f64, f64)> = nus.iter().flat_map(|&nu| rates.iter().map(move |&r| (r, nu))).collect();
    let best = combos
        .par_iter()
        .map(|&(rate, nu)| {
            let mut log_pref = points.iter().map(|&(l, g1, g2)| l - (rate * g1 + nu * g2)).fold(f64::NEG_INFINITY, f64::max);
            if let Some(f) = floor {
                log_pref = log_pref.max(f);
            }
            Choice { rate, nu, log_pref, objective: log_pref + rate * mean_g1 + nu * mean_g2, tight: rate * mean_g1 }
        })
        .min_by(|a, b| {
            let (fa, fb) = (a.log_pref <= log_cap, b.log_pref <= log_cap);
            match (fa, fb) {
                (true, true) => a.key_cmp(b),
                (false, false) => a.log_pref.total_cmp(&b.log_pref).then(a.key_cmp(b)),
                _ => fb.cmp(&fa),
            }
        })
        .expect("nonempty grid");
    Ok(best)
}

/// Slack of `env` on sampled log-norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlackReport {
    pub min_slack: f64,
    pub argmin: (f64, f64),
    pub violated: bool,
}

/// `ln pref − (ln ‖Φ‖ − template)` minimised over the samples. Written this
/// way the slack of a fitted envelope is never negative on its own samples.
pub fn slack_on_samples(env: &Envelope, pairs: &[(f64, f64)], log_norms: &[f64]) -> SlackReport {
    let mut min_slack = f64::INFINITY;
    let mut argmin = (f64::NAN, f64::NAN);
    for (&(t, s), &l) in pairs.iter().zip(log_norms) {
        let slack = env.log_prefactor - (l - env.template(t, s));
        if slack < min_slack || argmin.0.is_nan() {
            min_slack = slack;
            argmin = (t, s);
        }
    }
    SlackReport { min_slack, argmin, violated: min_slack < 0.0 }
}

pub fn fit_on_samples(kind: EnvelopeKind, grid: &PairGrid, log_norms: &[f64], rates: &[f64], nus: &[f64], log_cap: f64) -> Result<Envelope> {
    grid.check(kind)?;
    let nus: &[f64] = if kind == EnvelopeKind::Ubg { &[0.0] } else { nus };
    let points: Vec<Point> = grid.pairs.iter().zip(log_norms).map(|(&(t, s), &l)| (l, kind.g1(t, s), kind.g2(t, s))).collect();
    let floor = kind.is_nues().then_some(0.0);
    let c = fit_core(&points, rates, nus, floor, log_cap)?;
    let mut env = Envelope {
        kind,
        prefactor: c.log_pref.exp(),
        log_prefactor: c.log_pref,
        rate: c.rate,
        nu: c.nu,
        slack: 0.0,
        binding: (f64::NAN, f64::NAN),
        window: Some(Window::of(&grid.pairs)),
    };
    let rep = slack_on_samples(&env, &grid.pairs, log_norms);
    env.slack = rep.min_slack;
    env.binding = rep.argmin;
    Ok(env)
}

/// Fits the tightest envelope of `kind` over the search grids, preferring
/// prefactors within `log_cap`.
pub fn fit_envelope(ev: &TransitionEvaluator, kind: EnvelopeKind, grid: &PairGrid, rates: &[f64], nus: &[f64], log_cap: f64) -> Result<Envelope> {
    grid.check(kind)?;
    let log_norms = sample_log_norms(ev, &grid.pairs)?;
    fit_on_samples(kind, grid, &log_norms, rates, nus, log_cap)
}

/// Slack of `env` against freshly sampled `‖Φ‖` on `grid`.
pub fn check_envelope(ev: &TransitionEvaluator, env: &Envelope, grid: &PairGrid) -> Result<SlackReport> {
    grid.check(env.kind)?;
    let log_norms = sample_log_norms(ev, &grid.pairs)?;
    Ok(slack_on_samples(env, &grid.pairs, &log_norms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessStatus {
    FalsifiedUnderCap,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KalmanValue {
    pub t: f64,
    pub s: f64,
    pub norm: f64,
    pub log_norm: f64,
}

/// `‖Φ(tᵢ, tᵢ − width)‖` along anchors; any bound of the form `α(|t − s|)`
/// must dominate the largest of them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KalmanWitness {
    pub width: f64,
    pub cap: f64,
    pub values: Vec<KalmanValue>,
    pub status: WitnessStatus,
    /// index of the first value above the cap
    pub first_exceeding: Option<usize>,
}

pub fn falsify_uniform(ev: &TransitionEvaluator, width: f64, anchors: &[f64], cap: f64) -> Result<KalmanWitness> {
    if anchors.is_empty() {
        return Err(Error::invalid("no anchors"));
    }
    if !(width >= 0.0) || !(cap > 0.0) {
        return Err(Error::invalid("width must be nonnegative and cap positive"));
    }
    let pairs: Vec<(f64, f64)> = anchors.iter().map(|&t| (t, t - width)).collect();
    let log_norms: Vec<f64> = pairs.par_iter().map(|&(t, s)| ev.log_norm(t, s)).collect::<Result<_>>()?;
    let values: Vec<KalmanValue> =
        pairs.iter().zip(&log_norms).map(|(&(t, s), &l)| KalmanValue { t, s, norm: l.exp(), log_norm: l }).collect();
    let log_cap = cap.ln();
    let first_exceeding = values.iter().position(|v| v.log_norm > log_cap);
    let status = if first_exceeding.is_some() { WitnessStatus::FalsifiedUnderCap } else { WitnessStatus::Inconclusive };
    Ok(KalmanWitness { width, cap, values, status, first_exceeding })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    /// `‖f(t)‖ ≤ pref·e^{−rate|t|}`
    Decay,
    /// `‖f(t)‖ ≤ pref·e^{rate|t|}`
    Growth,
}

impl Trend {
    fn g(self, t: f64) -> f64 {
        match self {
            Trend::Decay => -t.abs(),
            Trend::Growth => t.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionEnvelope {
    pub trend: Trend,
    pub prefactor: f64,
    pub rate: f64,
    pub slack: f64,
    pub binding_t: f64,
}

impl FunctionEnvelope {
    pub fn log_bound(&self, t: f64) -> f64 {
        self.prefactor.ln() + self.rate * self.trend.g(t)
    }

    /// `ln pref − (ln value − rate·g(t))` minimised over samples; `+∞` when
    /// every sample is zero.
    pub fn slack_on(&self, samples: &[(f64, f64)]) -> (f64, f64) {
        let lp = self.prefactor.ln();
        let mut best = (f64::INFINITY, f64::NAN);
        for &(t, v) in samples {
            let slack = if v == 0.0 { f64::INFINITY } else { lp - (v.ln() - self.rate * self.trend.g(t)) };
            if slack < best.0 || best.1.is_nan() {
                best = (slack, t);
            }
        }
        best
    }
}

/// Spectral norms of `m(t)` on `ts`.
pub fn matrix_norm_samples(m: &ExprMatrix, ts: &[f64]) -> Result<Vec<(f64, f64)>> {
    ts.iter().map(|&t| Ok((t, spectral_norm(&m.eval(t)?)))).collect()
}

/// Tightest `pref·e^{∓rate|t|}` over `samples` of `(t, value ≥ 0)`.
pub fn fit_function_envelope(samples: &[(f64, f64)], trend: Trend, rates: &[f64]) -> Result<FunctionEnvelope> {
    if samples.iter().any(|&(_, v)| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid("function samples must be finite and nonnegative"));
    }
    let points: Vec<Point> = samples.iter().map(|&(t, v)| (v.ln(), trend.g(t), 0.0)).collect();
    let c = fit_core(&points, rates, &[0.0], None, f64::INFINITY)?;
    let mut env = FunctionEnvelope { trend, prefactor: c.log_pref.exp(), rate: c.rate, slack: 0.0, binding_t: f64::NAN };
    let (slack, t) = env.slack_on(samples);
    env.slack = slack;
    env.binding_t = t;
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{linspace, Caps};
    use crate::matrix::ExprMatrix;
    use crate::system::LtvSystem;
    use proptest::prelude::*;

    fn scalar_ev(a: &str, domain: (f64, f64)) -> TransitionEvaluator {
        let sys = LtvSystem::new("s", ExprMatrix::parse(&[vec![a]]).unwrap(), None, None, domain).unwrap();
        TransitionEvaluator::new(sys, Default::default())
    }

    #[test]
    fn nues_forward_decay() {
        let ev = scalar_ev("-1", (0.0, 5.0));
        let caps = Caps::default();
        let grid = PairGrid::for_kind(EnvelopeKind::NuesForward, &linspace(0.0, 5.0, 11));
        let env = fit_envelope(&ev, EnvelopeKind::NuesForward, &grid, &caps.rate_grid(), &caps.nu_grid(), f64::INFINITY).unwrap();
        assert_eq!(env.rate, 1.0);
        assert_eq!(env.nu, 0.0);
        assert!((env.prefactor - 1.0).abs() < 1e-8);
        assert!(env.slack >= 0.0);
    }

    #[test]
    fn ubg_identity() {
        let sys = LtvSystem::new("z", ExprMatrix::zeros(2, 2), None, None, (-2.0, 2.0)).unwrap();
        let ev = TransitionEvaluator::new(sys, Default::default());
        let caps = Caps::default();
        let grid = PairGrid::for_kind(EnvelopeKind::Ubg, &linspace(-2.0, 2.0, 9));
        let env = fit_envelope(&ev, EnvelopeKind::Ubg, &grid, &caps.rate_grid(), &caps.nu_grid(), f64::INFINITY).unwrap();
        assert_eq!((env.prefactor, env.rate, env.nu), (1.0, 0.0, 0.0));
    }

    #[test]
    fn halved_prefactor_is_caught() {
        let ev = scalar_ev("-t*sin(t)", (-5.0, 5.0));
        let caps = Caps::default();
        let grid = PairGrid::for_kind(EnvelopeKind::Nubg, &linspace(-5.0, 5.0, 15));
        let env = fit_envelope(&ev, EnvelopeKind::Nubg, &grid, &caps.rate_grid(), &caps.nu_grid(), f64::INFINITY).unwrap();
        let ok = check_envelope(&ev, &env, &grid).unwrap();
        assert!(ok.min_slack >= 0.0 && !ok.violated);
        let mut half = env.clone();
        half.prefactor /= 2.0;
        half.log_prefactor = half.prefactor.ln();
        let bad = check_envelope(&ev, &half, &grid).unwrap();
        assert!(bad.violated);
        assert!((bad.min_slack + 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cap_steers_the_fit() {
        // on [−4π, 4π] the loosest-on-average NUBG fit needs K ≈ e^12.6
        let ev = scalar_ev("-t*sin(t)", (-35.0, 35.0));
        let caps = Caps::default();
        let pi = std::f64::consts::PI;
        let grid = PairGrid::for_kind(EnvelopeKind::Nubg, &linspace(-4.0 * pi, 4.0 * pi, 33));
        let free = fit_envelope(&ev, EnvelopeKind::Nubg, &grid, &caps.rate_grid(), &caps.nu_grid(), f64::INFINITY).unwrap();
        let capped = fit_envelope(&ev, EnvelopeKind::Nubg, &grid, &caps.rate_grid(), &caps.nu_grid(), caps.log_pref()).unwrap();
        assert!(free.log_prefactor > caps.log_pref());
        assert!(capped.log_prefactor <= caps.log_pref());
        assert!(capped.slack >= 0.0 && capped.rate + capped.nu > 0.0);
        // an unreachable cap falls back to the smallest prefactor
        let tiny = fit_envelope(&ev, EnvelopeKind::Nubg, &grid, &caps.rate_grid(), &caps.nu_grid(), -1.0).unwrap();
        assert!(tiny.log_prefactor <= capped.log_prefactor);
    }

    #[test]
    fn ordering_is_enforced() {
        let ev = scalar_ev("-1", (0.0, 5.0));
        let grid = PairGrid { pairs: vec![(0.0, 1.0)] };
        assert!(fit_envelope(&ev, EnvelopeKind::NuesForward, &grid, &[1.0], &[0.0], f64::INFINITY).is_err());
        assert!(fit_envelope(&ev, EnvelopeKind::Ubg, &PairGrid { pairs: vec![] }, &[1.0], &[0.0], f64::INFINITY).is_err());
    }

    #[test]
    fn kalman_falsifier() {
        let ev = scalar_ev("-t*sin(t)", (-35.0, 35.0));
        let pi = std::f64::consts::PI;
        let anchors: Vec<f64> = (1..=5).map(|n| 2.0 * n as f64 * pi).collect();
        let w = falsify_uniform(&ev, pi / 2.0, &anchors, (2.0 * pi * 5.0 - 1.0).exp() * 0.99).unwrap();
        assert_eq!(w.status, WitnessStatus::FalsifiedUnderCap);
        for (n, v) in w.values.iter().enumerate() {
            let exact = 2.0 * (n + 1) as f64 * pi - 1.0;
            assert!((v.log_norm - exact).abs() < 1e-6, "{} vs {exact}", v.log_norm);
        }
        assert_eq!(w.first_exceeding, Some(4));

        let ev = scalar_ev("-1", (-10.0, 10.0));
        let w = falsify_uniform(&ev, pi / 2.0, &[0.0, 2.0, 4.0], 10f64.exp()).unwrap();
        assert_eq!(w.status, WitnessStatus::Inconclusive);
        assert!(w.values.iter().all(|v| (v.norm - (-pi / 2.0).exp()).abs() < 1e-9));
    }

    #[test]
    fn function_envelopes() {
        let ts = linspace(-3.0, 3.0, 61);
        let rates = Caps::default().rate_grid();
        let l: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 5.0 * (-3.0 * t.abs()).exp())).collect();
        let f = fit_function_envelope(&l, Trend::Decay, &rates).unwrap();
        assert_eq!(f.rate, 3.0);
        assert!((f.prefactor - 5.0).abs() < 1e-12);
        assert!(f.slack >= 0.0);
        let one: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 1.0)).collect();
        let g = fit_function_envelope(&one, Trend::Growth, &rates).unwrap();
        assert_eq!((g.prefactor, g.rate), (1.0, 0.0));
        let zero: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 0.0)).collect();
        let z = fit_function_envelope(&zero, Trend::Decay, &rates).unwrap();
        assert_eq!((z.prefactor, z.rate), (0.0, 5.0));
        assert_eq!(z.slack, f64::INFINITY);
    }

    fn synthetic() -> impl Strategy<Value = (EnvelopeKind, Vec<(f64, f64)>, Vec<f64>)> {
        (0usize..5, prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0, -6.0f64..6.0), 1..40)).prop_filter_map("pairs", |(k, raw)| {
            let kind = EnvelopeKind::ALL[k];
            let kept: Vec<_> = raw.into_iter().filter(|&(t, s, _)| kind.admits(t, s)).collect();
            if kept.is_empty() {
                return None;
            }
            Some((kind, kept.iter().map(|&(t, s, _)| (t, s)).collect(), kept.iter().map(|p| p.2).collect()))
        })
    }

    proptest! {
        #[test]
        fn fit_is_sound_and_minimal((kind, pairs, logs) in synthetic()) {
            let grid = PairGrid { pairs };
            let rates = crate::grid::step_grid(2.0, 4);
            let nus = crate::grid::step_grid(1.0, 4);
            let env = fit_on_samples(kind, &grid, &logs, &rates, &nus, f64::INFINITY).unwrap();
            prop_assert!(env.slack >= 0.0);
            let rep = slack_on_samples(&env, &grid.pairs, &logs);
            prop_assert!(rep.min_slack >= 0.0);
            // unless clamped at M = 1, shrinking the prefactor breaks the bound
            if !(kind.is_nues() && env.log_prefactor == 0.0) {
                let mut smaller = env.clone();
                smaller.log_prefactor += 0.99f64.ln();
                prop_assert!(slack_on_samples(&smaller, &grid.pairs, &logs).violated);
            }
        }

        #[test]
        fn larger_grid_never_lowers_prefactor((kind, pairs, logs) in synthetic(), extra in -6.0f64..6.0) {
            let env = fit_on_samples(kind, &PairGrid { pairs: pairs.clone() }, &logs, &[0.5], &[0.25], f64::INFINITY).unwrap();
            let (t, s) = pairs[0];
            let mut p2 = pairs.clone();
            p2.push((t, s));
            let mut l2 = logs.clone();
            l2.push(extra);
            let bigger = fit_on_samples(kind, &PairGrid { pairs: p2 }, &l2, &[0.5], &[0.25], f64::INFINITY).unwrap();
            prop_assert!(bigger.log_prefactor >= env.log_prefactor);
        }

        #[test]
        fn ubg_rechecked_as_nubg((_k, pairs, logs) in synthetic()) {
            let grid = PairGrid { pairs };
            let env = fit_on_samples(EnvelopeKind::Ubg, &grid, &logs, &crate::grid::step_grid(2.0, 4), &[0.0], f64::INFINITY).unwrap();
            let mut as_nubg = env.clone();
            as_nubg.kind = EnvelopeKind::Nubg;
            as_nubg.nu = 0.0;
            let a = slack_on_samples(&env, &grid.pairs, &logs);
            let b = slack_on_samples(&as_nubg, &grid.pairs, &logs);
            prop_assert!((a.min_slack - b.min_slack).abs() <= 1e-12);
        }
    }
}
