mod common;

use common::*;
use ltvkit::gramian::{gramian, relative_error, GramianKind};
use ltvkit::verify::duality::verify_gramian_duality;
use ltvkit::verify::{ReportStatus, VerifySettings};
use ltvkit::{ExprMatrix, IntegratorSettings, LtvSystem, TransitionEvaluator};
use nalgebra::{dmatrix, DMatrix};

fn p(rows: &[&[&str]]) -> ExprMatrix {
    ExprMatrix::parse(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn ev(a: ExprMatrix, b: Option<ExprMatrix>, c: Option<ExprMatrix>) -> TransitionEvaluator {
    let sys = LtvSystem::new("t", a, b, c, (-6.0, 6.0)).unwrap();
    TransitionEvaluator::new(sys, IntegratorSettings::default())
}

/// `e^{A τ}` for `A = [[-1, 1], [0, -2]]`.
fn expm(tau: f64) -> DMatrix<f64> {
    let (e1, e2) = ((-tau).exp(), (-2.0 * tau).exp());
    dmatrix![e1, e1 - e2; 0.0, e2]
}

#[test]
fn nonsymmetric_constant_gramians_match_quadrature() {
    let e = ev(p(&[&["-1", "1"], &["0", "-2"]]), Some(p(&[&["0"], &["1"]])), Some(p(&[&["1", "0"]])));
    let c = dmatrix![1.0, 0.0];
    let b = dmatrix![0.0; 1.0];
    let (a0, b0) = (-0.5, 1.5);
    let k = 2000;
    let m_want = DMatrix::from_fn(2, 2, |i, j| {
        simpson(|s| { let f = c.clone() * expm(s - a0); f[(0, i)] * f[(0, j)] }, a0, b0, k)
    });
    let w_want = DMatrix::from_fn(2, 2, |i, j| {
        simpson(|s| { let f = expm(a0 - s) * b.clone(); f[(i, 0)] * f[(j, 0)] }, a0, b0, k)
    });
    let m = gramian(&e, GramianKind::M, a0, b0).unwrap().value;
    let w = gramian(&e, GramianKind::W, a0, b0).unwrap().value;
    assert!(relative_error(&m, &m_want) < 1e-8, "{m} {m_want}");
    assert!(relative_error(&w, &w_want) < 1e-8, "{w} {w_want}");
}

#[test]
fn duality_on_nonsymmetric_time_varying_plant() {
    let e = ev(
        p(&[&["-1", "sin(t)"], &["0.5*cos(2*t)", "-2 + 0.3*t"]]),
        Some(p(&[&["1"], &["exp(-t^2)"]])),
        Some(p(&[&["1", "cos(t)"]])),
    );
    let st = VerifySettings::new(vec![-2.0, 0.0, 1.5], vec![0.5, 2.0], vec![]);
    let r = verify_gramian_duality(&e, &st).unwrap();
    assert_eq!(r.status, ReportStatus::Pass);
    let worst = r.constants["max_residual"];
    assert!(worst <= 1e-6 && worst > 0.0, "{worst:e}");
    assert!(r.recheck() <= 1e-12);
}

#[test]
fn tampered_row_fails_recheck() {
    let e = ev(p(&[&["-1"]]), None, Some(p(&[&["1"]])));
    let mut r = verify_gramian_duality(&e, &VerifySettings::new(vec![0.0], vec![1.0], vec![])).unwrap();
    assert!(r.recheck() <= 1e-12);
    r.rows[0].slack += 1.0;
    assert!(r.recheck() >= 0.5);
}
