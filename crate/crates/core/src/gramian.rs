//! The four Gramians, each integrated from its own definition:
//!
//! ```text
//! W(a,b) = ∫ Φ(a,s) B Bᵀ Φᵀ(a,s) ds      K(a,b) = ∫ Φ(b,s) B Bᵀ Φᵀ(b,s) ds
//! M(a,b) = ∫ Φᵀ(s,a) Cᵀ C Φ(s,a) ds      N(a,b) = ∫ Φᵀ(s,b) Cᵀ C Φ(s,b) ds
//! ```
//!
//! The transition factor and the accumulator share one adaptive pass; no
//! transition matrix is ever inverted.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{dopri5, Rescale};
use crate::linalg::{extreme_eigenvalues, spectral_norm, symmetrize};
use crate::matrix::ExprMatrix;
use crate::transition::{left_multiply, TransitionEvaluator};

const ASYMMETRY_WARN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum GramianKind {
    W,
    K,
    M,
    N,
}

impl GramianKind {
    pub fn is_controllability(self) -> bool {
        matches!(self, GramianKind::W | GramianKind::K)
    }

    pub fn parse(text: &str) -> Option<GramianKind> {
        match text {
            "W" | "w" => Some(GramianKind::W),
            "K" | "k" => Some(GramianKind::K),
            "M" | "m" => Some(GramianKind::M),
            "N" | "n" => Some(GramianKind::N),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramianSample {
    pub kind: GramianKind,
    pub a: f64,
    pub b: f64,
    #[serde(serialize_with = "crate::report::ser_matrix")]
    pub value: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl GramianSample {
    fn new(kind: GramianKind, a: f64, b: f64, raw: DMatrix<f64>) -> GramianSample {
        let (value, asym) = symmetrize(&raw);
        let scale = spectral_norm(&value).max(f64::MIN_POSITIVE);
        if asym > ASYMMETRY_WARN * scale.max(1.0) {
            warn!("{kind:?}({a}, {b}) asymmetric by {asym:e} before symmetrization");
        }
        let (lambda_min, lambda_max) = extreme_eigenvalues(&value);
        GramianSample { kind, a, b, value, lambda_min, lambda_max }
    }
}

pub fn min_eig(g: &GramianSample) -> f64 {
    crate::linalg::min_eig(&g.value)
}

/// `kind(a, b)` with `a <= b`.
pub fn gramian(ev: &TransitionEvaluator, kind: GramianKind, a: f64, b: f64) -> Result<GramianSample> {
    Ok(gramian_pass(ev, kind, a, &[b])?.pop().expect("one output"))
}

/// `kind(a, b)` for several right endpoints. For `W` and `M` (anchored at
/// `a`) this is a single pass; `K` and `N` need one pass per endpoint.
pub fn gramians_from(ev: &TransitionEvaluator, kind: GramianKind, a: f64, bs: &[f64]) -> Result<Vec<GramianSample>> {
    match kind {
        GramianKind::W | GramianKind::M => {
            let mut order: Vec<usize> = (0..bs.len()).collect();
            order.sort_by(|&i, &j| bs[i].total_cmp(&bs[j]));
            let sorted: Vec<f64> = order.iter().map(|&i| bs[i]).collect();
            let samples = gramian_pass(ev, kind, a, &sorted)?;
            let mut out = vec![None; bs.len()];
            for (k, s) in order.into_iter().zip(samples) {
                out[k] = Some(s);
            }
            Ok(out.into_iter().map(|s| s.expect("filled")).collect())
        }
        GramianKind::K | GramianKind::N => bs.iter().map(|&b| gramian(ev, kind, a, b)).collect(),
    }
}

fn gramian_pass(ev: &TransitionEvaluator, kind: GramianKind, a: f64, bs: &[f64]) -> Result<Vec<GramianSample>> {
    let sys = ev.system();
    sys.check_time(a)?;
    for &b in bs {
        sys.check_time(b)?;
        if b < a {
            return Err(Error::invalid(format!("Gramian interval [{a}, {b}] is reversed")));
        }
    }
    if kind == GramianKind::K || kind == GramianKind::N {
        assert_eq!(bs.len(), 1, "right-anchored Gramians take one endpoint per pass");
    }
    let weight: &ExprMatrix = if kind.is_controllability() { sys.require_b()? } else { sys.require_c()? };
    let n = sys.n();
    let nn = n * n;
    let zero = DMatrix::<f64>::zeros(n, n);
    if bs.iter().all(|&b| b == a) {
        return Ok(bs.iter().map(|&b| GramianSample::new(kind, a, b, zero.clone())).collect());
    }

    let mut am = DMatrix::zeros(n, n);
    let mut wm = DMatrix::zeros(weight.rows(), weight.cols());
    let right = bs[bs.len() - 1];
    // s(τ) and the sign in front of A in dX/dτ
    let (origin, dir) = match kind {
        GramianKind::W | GramianKind::M => (a, 1.0),
        GramianKind::K | GramianKind::N => (right, -1.0),
    };
    let rhs = |tau: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let s = origin + dir * tau;
        sys.a.eval_into(s, &mut am)?;
        weight.eval_into(s, &mut wm)?;
        let x = &y[..nn];
        let (dx, dg) = dy.split_at_mut(nn);
        match kind {
            // dΦ(s,a)/ds = A Φ(s,a)
            GramianKind::M => left_multiply(&am, 1.0, x, dx, n),
            // dΦ(s,b)/dτ = −A(b−τ) Φ(s,b)
            GramianKind::N => left_multiply(&am, -1.0, x, dx, n),
            // dΦ(a,s)/ds = −Φ(a,s) A(s)
            GramianKind::W => right_multiply(&am, -1.0, x, dx, n),
            // dΦ(b,s)/dτ = Φ(b,s) A(b−τ)
            GramianKind::K => right_multiply(&am, 1.0, x, dx, n),
        }
        let xm = DMatrix::from_column_slice(n, n, x);
        let integrand = if kind.is_controllability() {
            let p = xm * &wm;
            &p * p.transpose()
        } else {
            let q = &wm * xm;
            q.transpose() * q
        };
        dg.copy_from_slice(integrand.as_slice());
        Ok(())
    };
    let mut y0 = DMatrix::<f64>::identity(n, n).as_slice().to_vec();
    y0.extend(zero.as_slice());
    let taus: Vec<f64> = match kind {
        GramianKind::W | GramianKind::M => bs.iter().map(|&b| b - a).collect(),
        GramianKind::K | GramianKind::N => vec![right - a],
    };
    let samples = dopri5(rhs, 0.0, &y0, &taus, ev.settings(), Rescale::Homogeneous(nn))?;
    Ok(samples
        .iter()
        .zip(bs)
        .map(|(smp, &b)| {
            let y = smp.unscaled(nn);
            GramianSample::new(kind, a, b, DMatrix::from_column_slice(n, n, &y[nn..]))
        })
        .collect())
}

/// `out = sign · Y · A` on column-major `n×n` storage.
fn right_multiply(a: &DMatrix<f64>, sign: f64, y: &[f64], out: &mut [f64], n: usize) {
    for j in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += y[i + n * k] * a[(k, j)];
            }
            out[i + n * j] = sign * acc;
        }
    }
}

/// Relative residuals of the four relations between the Gramians.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RelationResiduals {
    /// `K(a,b) = Φ(b,a) W(a,b) Φᵀ(b,a)`
    pub k_from_w: Option<f64>,
    /// `W(a,b) = Φ(a,b) K(a,b) Φᵀ(a,b)`
    pub w_from_k: Option<f64>,
    /// `N(a,b) = Φᵀ(a,b) M(a,b) Φ(a,b)`
    pub n_from_m: Option<f64>,
    /// `M(a,b) = Φᵀ(b,a) N(a,b) Φ(b,a)`
    pub m_from_n: Option<f64>,
}

impl RelationResiduals {
    pub fn max(&self) -> f64 {
        [self.k_from_w, self.w_from_k, self.n_from_m, self.m_from_n].into_iter().flatten().fold(0.0, f64::max)
    }
}

/// `‖X − Y‖ / ‖Y‖`, or `‖X‖` when `Y = 0`.
pub fn relative_error(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let d = spectral_norm(&(x - y));
    let s = spectral_norm(y);
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

/// Checks the Gramian relations on `[a, b]` with all four Gramians and both
/// transition matrices computed independently.
pub fn check_gramian_relations(ev: &TransitionEvaluator, a: f64, b: f64) -> Result<RelationResiduals> {
    let sys = ev.system();
    if sys.b.is_none() && sys.c.is_none() {
        return Err(Error::MissingMatrix { system: sys.name.clone(), matrix: "B or C" });
    }
    let fwd = ev.transition(b, a)?;
    let bwd = ev.transition(a, b)?;
    let mut r = RelationResiduals::default();
    if sys.b.is_some() {
        let w = gramian(ev, GramianKind::W, a, b)?.value;
        let k = gramian(ev, GramianKind::K, a, b)?.value;
        r.k_from_w = Some(relative_error(&(&fwd * &w * fwd.transpose()), &k));
        r.w_from_k = Some(relative_error(&(&bwd * &k * bwd.transpose()), &w));
    }
    if sys.c.is_some() {
        let m = gramian(ev, GramianKind::M, a, b)?.value;
        let nm = gramian(ev, GramianKind::N, a, b)?.value;
        r.n_from_m = Some(relative_error(&(bwd.transpose() * &m * &bwd), &nm));
        r.m_from_n = Some(relative_error(&(fwd.transpose() * &nm * &fwd), &m));
    }
    Ok(r)
}
