use rayon::prelude::*;

use super::{SlackRow, TheoremId, TheoremReport, VerifySettings};
use crate::classify::Side;
use crate::error::Result;
use crate::gramian::{gramian, relative_error, GramianKind};
use crate::transforms::{adjoint, dual};
use crate::transition::TransitionEvaluator;

pub const DUALITY_TOL: f64 = 1e-6;

/// `M(t,t+σ) = Wᵃ(t,t+σ) = Kᵈ(−t−σ,−t)` and `N(t,t+σ) = Kᵃ(t,t+σ) = Wᵈ(−t−σ,−t)`,
/// every Gramian from its own definition.
pub fn verify_gramian_duality(ev: &TransitionEvaluator, settings: &VerifySettings) -> Result<TheoremReport> {
    let sys = ev.system();
    sys.require_c()?;
    let adj = ev.with_system(adjoint(sys)?);
    let dua = ev.with_system(dual(sys)?);
    let cells: Vec<(f64, f64)> = settings.t_grid.iter().flat_map(|&t| settings.sigma_grid.iter().map(move |&s| (t, s))).collect();
    let rows: Vec<Vec<SlackRow>> = cells
        .par_iter()
        .map(|&(t, s)| {
            let (a, b) = (t, t + s);
            let m = gramian(ev, GramianKind::M, a, b)?.value;
            let n = gramian(ev, GramianKind::N, a, b)?.value;
            let wa = gramian(&adj, GramianKind::W, a, b)?.value;
            let ka = gramian(&adj, GramianKind::K, a, b)?.value;
            let kd = gramian(&dua, GramianKind::K, -b, -a)?.value;
            let wd = gramian(&dua, GramianKind::W, -b, -a)?.value;
            let row = |g: &str, x, y| SlackRow::new(g, t, s, relative_error(x, y), DUALITY_TOL, Side::Upper);
            Ok(vec![row("M=W_adj", &wa, &m), row("M=K_dual", &kd, &m), row("N=K_adj", &ka, &n), row("N=W_dual", &wd, &n)])
        })
        .collect::<Result<_>>()?;
    let mut report = TheoremReport::new(TheoremId::GramianDuality, &sys.name);
    report.rows = rows.into_iter().flatten().collect();
    let worst = report.rows.iter().map(|r| r.observed).fold(0.0, f64::max);
    report.constants.insert("max_residual".into(), worst);
    report.constants.insert("tolerance".into(), DUALITY_TOL);
    Ok(report.finish(settings.slack_tol))
}
