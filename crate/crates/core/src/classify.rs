//! Tri-valued observability/controllability verdicts on finite `(t, σ)` grids.
//!
//! Gramian corridors are judged by a scale-free criterion: for each `σ` the
//! weighted ceiling over the weighted floor must stay below the prefactor cap.
//! With zero exponents this is the uniform definition; with exponents
//! `(e₀, e₁)` the eigenvalues are weighted by `e^{2e₀w(t)}` and `e^{−2e₁w(t)}`,
//! `w(t) = |t|` for observability and `w(t) = t` for controllability.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{falsify_uniform, fit_envelope, EnvelopeKind, Envelope, KalmanWitness, PairGrid, WitnessStatus};
use crate::error::{Error, Result};
use crate::gramian::{gramian, gramians_from, GramianKind};
use crate::grid::Caps;
use crate::transition::TransitionEvaluator;

pub const DEFAULT_EIG_TOL: f64 = 1e-10;

#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Property {
    CO,
    UCO,
    NUCO,
    CC,
    UCC,
    NUCC,
}

impl Property {
    pub fn is_observability(self) -> bool {
        matches!(self, Property::CO | Property::UCO | Property::NUCO)
    }

    /// Left- and right-anchored Gramians for this property.
    pub fn gramians(self) -> (GramianKind, GramianKind) {
        if self.is_observability() {
            (GramianKind::M, GramianKind::N)
        } else {
            (GramianKind::W, GramianKind::K)
        }
    }

    pub fn weight(self) -> TimeWeight {
        if self.is_observability() {
            TimeWeight::Abs
        } else {
            TimeWeight::Signed
        }
    }

    pub fn parse(text: &str) -> Option<Property> {
        Some(match text.to_ascii_uppercase().as_str() {
            "CO" => Property::CO,
            "UCO" => Property::UCO,
            "NUCO" => Property::NUCO,
            "CC" => Property::CC,
            "UCC" => Property::UCC,
            "NUCC" => Property::NUCC,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeWeight {
    /// `|t|`
    Abs,
    /// `t`
    Signed,
}

impl TimeWeight {
    pub fn w(self, t: f64) -> f64 {
        match self {
            TimeWeight::Abs => t.abs(),
            TimeWeight::Signed => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictStatus {
    CertifiedOnWindow,
    FalsifiedUnderCaps,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifySettings {
    pub t_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub caps: Caps,
    pub eig_tol: f64,
}

impl ClassifySettings {
    pub fn new(t_grid: Vec<f64>, sigma_grid: Vec<f64>) -> ClassifySettings {
        ClassifySettings { t_grid, sigma_grid, caps: Caps::default(), eig_tol: DEFAULT_EIG_TOL }
    }
}

/// Extreme eigenvalues of `kind(t, t+σ)`; rows follow `t_grid`, columns `sigma_grid`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramianTable {
    pub kind: GramianKind,
    pub t_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub lambda_min: Vec<Vec<f64>>,
    pub lambda_max: Vec<Vec<f64>>,
}

impl GramianTable {
    /// Smallest grid `σ` from which on `λ_min > eig_tol`.
    pub fn sigma0(&self, eig_tol: f64) -> Vec<Option<f64>> {
        self.lambda_min
            .iter()
            .map(|row| {
                let mut first = None;
                for (j, &l) in row.iter().enumerate().rev() {
                    if l > eig_tol {
                        first = Some(self.sigma_grid[j]);
                    } else {
                        break;
                    }
                }
                first
            })
            .collect()
    }
}

pub fn gramian_table(ev: &TransitionEvaluator, kind: GramianKind, t_grid: &[f64], sigma_grid: &[f64]) -> Result<GramianTable> {
    if t_grid.is_empty() || sigma_grid.is_empty() {
        return Err(Error::invalid("empty classification grid"));
    }
    if sigma_grid.windows(2).any(|w| w[1] <= w[0]) || sigma_grid[0] <= 0.0 {
        return Err(Error::invalid("sigma grid must be positive and strictly increasing"));
    }
    let sys = ev.system();
    for &t in t_grid {
        sys.check_time(t)?;
        sys.check_time(t + sigma_grid[sigma_grid.len() - 1])?;
    }
    let rows: Vec<(Vec<f64>, Vec<f64>)> = t_grid
        .par_iter()
        .map(|&t| {
            let ends: Vec<f64> = sigma_grid.iter().map(|&s| t + s).collect();
            let samples = match kind {
                GramianKind::W | GramianKind::M => gramians_from(ev, kind, t, &ends)?,
                GramianKind::K | GramianKind::N => ends.iter().map(|&b| gramian(ev, kind, t, b)).collect::<Result<_>>()?,
            };
            Ok((samples.iter().map(|g| g.lambda_min).collect(), samples.iter().map(|g| g.lambda_max).collect()))
        })
        .collect::<Result<_>>()?;
    let (lambda_min, lambda_max) = rows.into_iter().unzip();
    Ok(GramianTable { kind, t_grid: t_grid.to_vec(), sigma_grid: sigma_grid.to_vec(), lambda_min, lambda_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaValue {
    pub sigma: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sigma0 {
    pub t: f64,
    pub sigma0: Option<f64>,
}

/// Corridor `e^{−2e₀w(t)} floor(σ) ≤ λ(G(t,t+σ)) ≤ e^{2e₁w(t)} ceiling(σ)` on
/// the active cells `σ ≥ σ₀(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramianEnvelopeFit {
    pub kind: GramianKind,
    pub weight: TimeWeight,
    pub exponents: (f64, f64),
    pub floors: Vec<SigmaValue>,
    pub ceilings: Vec<SigmaValue>,
    pub log_ratio: Vec<SigmaValue>,
    pub sigma0: Vec<Sigma0>,
    /// smallest log margin of any active cell inside the corridor
    pub slack: f64,
    pub feasible: bool,
}

impl GramianEnvelopeFit {
    pub fn floor_at(&self, sigma: f64) -> Option<f64> {
        self.floors.iter().find(|v| v.sigma == sigma).map(|v| v.value)
    }

    pub fn ceiling_at(&self, sigma: f64) -> Option<f64> {
        self.ceilings.iter().find(|v| v.sigma == sigma).map(|v| v.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type")]
pub enum Witness {
    /// growth of `‖Φ(t, t − width)‖` at fixed width beyond the cap
    Kalman(KalmanWitness),
    /// the Gramian corridor at this σ exceeds the cap; `t` attains the violated side
    Gramian { kind: GramianKind, t: f64, sigma: f64, eigenvalue: f64, side: Side, log_ratio: f64 },
    /// no grid σ makes the Gramian positive definite at `t`
    NoSigma0 { kind: GramianKind, t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub property: Property,
    pub status: VerdictStatus,
    pub fits: Vec<GramianEnvelopeFit>,
    pub tables: Vec<GramianTable>,
    pub witness: Option<Witness>,
    pub kalman: Option<KalmanWitness>,
    pub t_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub caps: Caps,
    pub eig_tol: f64,
    pub notes: Vec<String>,
}

/// Corridor of `table` for exponents `(e0, e1)`.
pub fn corridor(table: &GramianTable, weight: TimeWeight, exponents: (f64, f64), eig_tol: f64, log_cap: f64) -> GramianEnvelopeFit {
    let sigma0 = table.sigma0(eig_tol);
    let (e0, e1) = exponents;
    let mut floors = Vec::new();
    let mut ceilings = Vec::new();
    let mut log_ratio = Vec::new();
    let mut slack = f64::INFINITY;
    let mut feasible = sigma0.iter().all(Option::is_some);
    for (j, &sigma) in table.sigma_grid.iter().enumerate() {
        let active: Vec<usize> = (0..table.t_grid.len()).filter(|&i| sigma0[i].is_some_and(|s0| sigma >= s0)).collect();
        if active.is_empty() {
            continue;
        }
        let lo = |i: usize| table.lambda_min[i][j].ln() + 2.0 * e0 * weight.w(table.t_grid[i]);
        let hi = |i: usize| table.lambda_max[i][j].ln() - 2.0 * e1 * weight.w(table.t_grid[i]);
        let floor = active.iter().map(|&i| lo(i)).fold(f64::INFINITY, f64::min);
        let ceiling = active.iter().map(|&i| hi(i)).fold(f64::NEG_INFINITY, f64::max);
        for &i in &active {
            slack = slack.min(lo(i) - floor).min(ceiling - hi(i));
        }
        floors.push(SigmaValue { sigma, value: floor.exp() });
        ceilings.push(SigmaValue { sigma, value: ceiling.exp() });
        log_ratio.push(SigmaValue { sigma, value: ceiling - floor });
        if !(ceiling - floor <= log_cap) {
            feasible = false;
        }
    }
    if floors.is_empty() {
        feasible = false;
    }
    GramianEnvelopeFit {
        kind: table.kind,
        weight,
        exponents,
        floors,
        ceilings,
        log_ratio,
        sigma0: table.t_grid.iter().zip(&sigma0).map(|(&t, &s)| Sigma0 { t, sigma0: s }).collect(),
        slack,
        feasible,
    }
}

/// Smallest feasible exponents, in order of `(e₀ + e₁, e₀, e₁)`.
pub fn search_exponents(table: &GramianTable, weight: TimeWeight, nus: &[f64], eig_tol: f64, log_cap: f64, allow_zero: bool) -> Option<GramianEnvelopeFit> {
    let mut pairs: Vec<(f64, f64)> = nus.iter().flat_map(|&a| nus.iter().map(move |&b| (a, b))).collect();
    pairs.retain(|&(a, b)| allow_zero || a > 0.0 || b > 0.0);
    pairs.sort_by(|x, y| (x.0 + x.1).total_cmp(&(y.0 + y.1)).then(x.0.total_cmp(&y.0)).then(x.1.total_cmp(&y.1)));
    pairs.into_iter().map(|e| corridor(table, weight, e, eig_tol, log_cap)).find(|f| f.feasible)
}

fn gramian_witness(fit: &GramianEnvelopeFit, table: &GramianTable) -> Witness {
    if let Some(s) = fit.sigma0.iter().find(|s| s.sigma0.is_none()) {
        return Witness::NoSigma0 { kind: fit.kind, t: s.t };
    }
    let worst = fit.log_ratio.iter().copied().fold(None::<SigmaValue>, |acc, v| match acc {
        Some(a) if a.value >= v.value => Some(a),
        _ => Some(v),
    });
    let worst = worst.expect("active cells exist when every t has a σ₀");
    let j = table.sigma_grid.iter().position(|&s| s == worst.sigma).expect("sigma on grid");
    let (e0, _) = fit.exponents;
    let sigma0: Vec<Option<f64>> = fit.sigma0.iter().map(|s| s.sigma0).collect();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..table.t_grid.len() {
        if !sigma0[i].is_some_and(|s0| worst.sigma >= s0) {
            continue;
        }
        let v = table.lambda_min[i][j].ln() + 2.0 * e0 * fit.weight.w(table.t_grid[i]);
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    let (i, _) = best.expect("active cell");
    Witness::Gramian {
        kind: fit.kind,
        t: table.t_grid[i],
        sigma: worst.sigma,
        eigenvalue: table.lambda_min[i][j],
        side: Side::Lower,
        log_ratio: worst.value,
    }
}

/// Runs the fixed-width growth test for every σ of the grid. Returns the first
/// width whose sequence exceeds the cap, or else the one with the largest value.
pub fn kalman_check(ev: &TransitionEvaluator, settings: &ClassifySettings) -> Result<Option<KalmanWitness>> {
    let lo = ev.system().domain.0;
    let mut fallback: Option<KalmanWitness> = None;
    for &width in &settings.sigma_grid {
        let anchors: Vec<f64> = settings.t_grid.iter().copied().filter(|&t| t - width >= lo).collect();
        if anchors.is_empty() {
            continue;
        }
        let w = falsify_uniform(ev, width, &anchors, settings.caps.pref)?;
        if w.status == WitnessStatus::FalsifiedUnderCap {
            return Ok(Some(w));
        }
        let peak = |k: &KalmanWitness| k.values.iter().map(|v| v.log_norm).fold(f64::NEG_INFINITY, f64::max);
        if fallback.as_ref().is_none_or(|f| peak(&w) > peak(f)) {
            fallback = Some(w);
        }
    }
    Ok(fallback)
}

pub fn classify(ev: &TransitionEvaluator, property: Property, settings: &ClassifySettings) -> Result<Verdict> {
    let sys = ev.system();
    if property.is_observability() {
        sys.require_c()?;
    } else {
        sys.require_b()?;
    }
    let (left, right) = property.gramians();
    let weight = property.weight();
    let log_cap = settings.caps.log_pref();
    let eig_tol = settings.eig_tol;
    let mut verdict = Verdict {
        property,
        status: VerdictStatus::Inconclusive,
        fits: Vec::new(),
        tables: Vec::new(),
        witness: None,
        kalman: None,
        t_grid: settings.t_grid.clone(),
        sigma_grid: settings.sigma_grid.clone(),
        caps: settings.caps,
        eig_tol,
        notes: Vec::new(),
    };

    if matches!(property, Property::CO | Property::CC) {
        let table = gramian_table(ev, left, &settings.t_grid, &settings.sigma_grid)?;
        let fit = corridor(&table, weight, (0.0, 0.0), eig_tol, f64::INFINITY);
        if let Some(s) = fit.sigma0.iter().find(|s| s.sigma0.is_none()) {
            verdict.witness = Some(Witness::NoSigma0 { kind: left, t: s.t });
        } else {
            verdict.status = VerdictStatus::CertifiedOnWindow;
        }
        verdict.fits.push(fit);
        verdict.tables.push(table);
        return Ok(verdict);
    }

    let (tl, tr) = rayon::join(
        || gramian_table(ev, left, &settings.t_grid, &settings.sigma_grid),
        || gramian_table(ev, right, &settings.t_grid, &settings.sigma_grid),
    );
    let tables = [tl?, tr?];
    verdict.tables = tables.to_vec();
    let kalman = kalman_check(ev, settings)?;
    let kalman_exceeded = kalman.as_ref().is_some_and(|k| k.status == WitnessStatus::FalsifiedUnderCap);
    verdict.kalman = kalman.clone();
    if property == Property::NUCC && settings.t_grid.iter().any(|&t| t < 0.0) {
        verdict.notes.push(
            "controllability exponents weight the Gramians by e^{∓2μt} with signed t; for t < 0 the weighting differs from the |t| used for observability".into(),
        );
    }
    let missing = tables.iter().find_map(|tab| {
        tab.sigma0(eig_tol).iter().zip(&tab.t_grid).find(|(s, _)| s.is_none()).map(|(_, &t)| Witness::NoSigma0 { kind: tab.kind, t })
    });

    match property {
        Property::UCO | Property::UCC => {
            let fits: Vec<GramianEnvelopeFit> = tables.iter().map(|tab| corridor(tab, weight, (0.0, 0.0), eig_tol, log_cap)).collect();
            let infeasible = fits.iter().zip(&tables).find(|(f, _)| !f.feasible);
            if kalman_exceeded {
                verdict.status = VerdictStatus::FalsifiedUnderCaps;
                verdict.witness = kalman.map(Witness::Kalman);
            } else if let Some(w) = missing {
                verdict.witness = Some(w);
            } else if let Some((f, tab)) = infeasible {
                verdict.status = VerdictStatus::FalsifiedUnderCaps;
                verdict.witness = Some(gramian_witness(f, tab));
            } else {
                verdict.status = VerdictStatus::CertifiedOnWindow;
            }
            verdict.fits = fits;
        }
        Property::NUCO | Property::NUCC => {
            if let Some(w) = missing {
                verdict.witness = Some(w);
                verdict.fits = tables.iter().map(|tab| corridor(tab, weight, (0.0, 0.0), eig_tol, log_cap)).collect();
                return Ok(verdict);
            }
            let nus = settings.caps.nu_grid();
            let found: Vec<Option<GramianEnvelopeFit>> =
                tables.iter().map(|tab| search_exponents(tab, weight, &nus, eig_tol, log_cap, !kalman_exceeded)).collect();
            if found.iter().all(Option::is_some) {
                verdict.status = VerdictStatus::CertifiedOnWindow;
                verdict.fits = found.into_iter().flatten().collect();
            } else {
                verdict.status = VerdictStatus::FalsifiedUnderCaps;
                let top = settings.caps.nu_grid().last().copied().unwrap_or(0.0);
                let widest: Vec<GramianEnvelopeFit> = tables.iter().map(|tab| corridor(tab, weight, (top, top), eig_tol, log_cap)).collect();
                let k = found.iter().position(Option::is_none).expect("one search failed");
                verdict.witness = Some(gramian_witness(&widest[k], &tables[k]));
                verdict.fits = widest;
            }
        }
        Property::CO | Property::CC => unreachable!(),
    }
    Ok(verdict)
}

/// The third property that two-of-three derives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TwoOfThree {
    /// NUCO corridor of `M` plus the non-uniform Kalman condition give the corridor of `N`.
    Obs,
    /// NUCC corridor of `W` plus the non-uniform Kalman condition give the corridor of `K`.
    Ctrl,
    /// uniform `M` bounds plus uniform bounded growth give uniform `N` bounds.
    UniformObs,
    /// uniform `W` and `K` bounds give uniform bounded growth.
    UniformCtrl,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentCheck {
    pub name: String,
    pub certified: bool,
    pub gramian_fit: Option<GramianEnvelopeFit>,
    pub growth: Option<Envelope>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoOfThreeReport {
    pub which: TwoOfThree,
    pub given: Vec<ComponentCheck>,
    pub derived: ComponentCheck,
}

impl TwoOfThreeReport {
    pub fn inputs_certified(&self) -> bool {
        self.given.iter().all(|c| c.certified)
    }

    pub fn passed(&self) -> bool {
        self.inputs_certified() && self.derived.certified
    }
}

pub fn two_of_three(ev: &TransitionEvaluator, which: TwoOfThree, settings: &ClassifySettings) -> Result<TwoOfThreeReport> {
    let log_cap = settings.caps.log_pref();
    let nus = settings.caps.nu_grid();
    let uniform = matches!(which, TwoOfThree::UniformObs | TwoOfThree::UniformCtrl);
    let property = match which {
        TwoOfThree::Obs => Property::NUCO,
        TwoOfThree::UniformObs => Property::UCO,
        TwoOfThree::Ctrl => Property::NUCC,
        TwoOfThree::UniformCtrl => Property::UCC,
    };
    let (left, right) = property.gramians();
    let weight = property.weight();

    let gramian_check = |kind: GramianKind| -> Result<ComponentCheck> {
        let table = gramian_table(ev, kind, &settings.t_grid, &settings.sigma_grid)?;
        let fit = if uniform {
            Some(corridor(&table, weight, (0.0, 0.0), settings.eig_tol, log_cap)).filter(|f| f.feasible)
        } else {
            search_exponents(&table, weight, &nus, settings.eig_tol, log_cap, true)
        };
        let name = format!("{kind:?} corridor{}", if uniform { " (uniform)" } else { "" });
        let fit = fit.unwrap_or_else(|| corridor(&table, weight, (0.0, 0.0), settings.eig_tol, log_cap));
        Ok(ComponentCheck { name, certified: fit.feasible, gramian_fit: Some(fit), growth: None })
    };
    let growth_check = || -> Result<ComponentCheck> {
        let kind = if uniform { EnvelopeKind::Ubg } else { EnvelopeKind::NuKalman };
        let grid = PairGrid::for_kind(kind, &settings.t_grid);
        let env = fit_envelope(ev, kind, &grid, &settings.caps.rate_grid(), &nus, log_cap)?;
        let certified = env.log_prefactor <= log_cap && env.slack >= 0.0;
        Ok(ComponentCheck { name: kind.name().to_string(), certified, gramian_fit: None, growth: Some(env) })
    };
    let (given, derived) = match which {
        TwoOfThree::Obs | TwoOfThree::Ctrl | TwoOfThree::UniformObs => (vec![gramian_check(left)?, growth_check()?], gramian_check(right)?),
        TwoOfThree::UniformCtrl => (vec![gramian_check(left)?, gramian_check(right)?], growth_check()?),
    };
    Ok(TwoOfThreeReport { which, given, derived })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::linspace;
    use crate::matrix::ExprMatrix;
    use crate::system::LtvSystem;

    fn ev(a: &str, b: Option<&str>, c: Option<&str>, domain: (f64, f64)) -> TransitionEvaluator {
        let p = |s: &str| ExprMatrix::parse(&[vec![s]]).unwrap();
        TransitionEvaluator::new(LtvSystem::new("s", p(a), b.map(p), c.map(p), domain).unwrap(), Default::default())
    }

    #[test]
    fn scalar_cc() {
        let e = ev("-1", Some("1"), None, (0.0, 6.0));
        let v = classify(&e, Property::CC, &ClassifySettings::new(linspace(0.0, 5.0, 6), vec![1.0])).unwrap();
        assert_eq!(v.status, VerdictStatus::CertifiedOnWindow);
        assert!(v.fits[0].slack >= 0.0);
    }

    #[test]
    fn constant_gramian_ucc() {
        let sys = LtvSystem::new("s0", ExprMatrix::zeros(2, 2), Some(ExprMatrix::identity(2)), None, (-5.0, 5.0)).unwrap();
        let e = TransitionEvaluator::new(sys, Default::default());
        let v = classify(&e, Property::UCC, &ClassifySettings::new(linspace(-3.0, 3.0, 7), vec![1.0])).unwrap();
        assert_eq!(v.status, VerdictStatus::CertifiedOnWindow);
        assert!((v.fits[0].floor_at(1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((v.fits[0].ceiling_at(1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_matrix_is_an_error() {
        let e = ev("-1", Some("1"), None, (0.0, 6.0));
        assert!(classify(&e, Property::NUCO, &ClassifySettings::new(vec![0.0], vec![1.0])).is_err());
    }

    #[test]
    fn zero_output_is_inconclusive() {
        let e = ev("-1", None, Some("0"), (0.0, 6.0));
        let v = classify(&e, Property::CO, &ClassifySettings::new(vec![0.0, 1.0], vec![1.0])).unwrap();
        assert_eq!(v.status, VerdictStatus::Inconclusive);
        assert!(matches!(v.witness, Some(Witness::NoSigma0 { .. })));
    }

    #[test]
    fn sigma0_table() {
        let table = GramianTable {
            kind: GramianKind::M,
            t_grid: vec![0.0, 1.0],
            sigma_grid: vec![1.0, 2.0, 3.0],
            lambda_min: vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0]],
            lambda_max: vec![vec![1.0; 3]; 2],
        };
        assert_eq!(table.sigma0(1e-10), vec![Some(2.0), Some(3.0)]);
    }

    #[test]
    fn growing_floor_needs_exponent() {
        // λ = e^{−2|t|}: infeasible at zero exponents under a tight cap, fine at e₀ = 1
        let ts = linspace(-4.0, 4.0, 9);
        let table = GramianTable {
            kind: GramianKind::M,
            t_grid: ts.clone(),
            sigma_grid: vec![1.0],
            lambda_min: ts.iter().map(|t| vec![(-2.0 * t.abs()).exp()]).collect(),
            lambda_max: ts.iter().map(|t| vec![(-2.0 * t.abs()).exp()]).collect(),
        };
        let log_cap = 1.0;
        assert!(!corridor(&table, TimeWeight::Abs, (0.0, 0.0), 1e-10, log_cap).feasible);
        let fit = search_exponents(&table, TimeWeight::Abs, &crate::grid::step_grid(3.0, 20), 1e-10, log_cap, true).unwrap();
        assert!(fit.feasible && fit.slack >= 0.0);
        assert!(fit.exponents.0 + fit.exponents.1 <= 1.0 + 1e-12);
    }
}
