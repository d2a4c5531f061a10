//! Analytic test systems with expected verdicts and theorem scenarios.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::classify::{classify, Property, Verdict, VerdictStatus, Witness};
use crate::error::{Error, Result};
use crate::expr::TimeExpr;
use crate::grid::GridSpec;
use crate::matrix::ExprMatrix;
use crate::report::{GridsSpec, Overrides, SystemFile};
use crate::transforms::{FeedbackGain, GainRole};
use crate::transition::TransitionEvaluator;
use crate::verify::{verify, ReportStatus, TheoremId, TheoremReport};

/// Expected growth witness: first exceeding width and `(anchor, ‖Φ(t, t−width)‖)` values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedWitness {
    pub width: f64,
    pub values: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub description: &'static str,
    pub file: SystemFile,
    /// `Φ(t, s) = diag(exp(gᵢ(t) − gᵢ(s)))`
    pub oracle: Option<Vec<TimeExpr>>,
    pub verdicts: Vec<(Property, VerdictStatus)>,
    pub witness: Option<ExpectedWitness>,
    pub theorems: Vec<(TheoremId, ReportStatus)>,
}

impl CatalogEntry {
    pub fn oracle_transition(&self, t: f64, s: f64) -> Option<Result<DMatrix<f64>>> {
        let g = self.oracle.as_ref()?;
        let diag: Result<Vec<f64>> = g.iter().map(|gi| Ok((gi.eval(t)? - gi.eval(s)?).exp())).collect();
        Some(diag.map(|d| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))))
    }

    pub fn evaluator(&self, over: &Overrides) -> Result<TransitionEvaluator> {
        let r = self.file.resolve(over)?;
        let ctl = r.step_control();
        Ok(TransitionEvaluator::new(r.system, ctl))
    }
}

fn m(rows: &[&[&str]]) -> ExprMatrix {
    let v: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
    ExprMatrix::parse(&v).expect("catalog expressions parse")
}

fn g(lo: f64, hi: f64, count: usize) -> GridSpec {
    GridSpec { lo, hi, count }
}

struct Draft {
    name: &'static str,
    a: ExprMatrix,
    b: Option<ExprMatrix>,
    c: Option<ExprMatrix>,
    domain: [f64; 2],
    gains: Vec<FeedbackGain>,
    t: GridSpec,
    sigma: Vec<f64>,
    hyp_t: Option<GridSpec>,
}

impl Draft {
    fn file(self) -> SystemFile {
        let n = self.a.rows();
        SystemFile {
            name: self.name.to_string(),
            n,
            p: self.b.as_ref().map_or(0, ExprMatrix::cols),
            m: self.c.as_ref().map_or(0, ExprMatrix::rows),
            domain: self.domain,
            a: self.a,
            b: self.b,
            c: self.c,
            gains: self.gains,
            grids: Some(GridsSpec { t: Some(self.t), sigma: Some(self.sigma), hyp_t: self.hyp_t }),
            caps: None,
            tolerances: None,
            hypotheses: BTreeMap::new(),
        }
    }
}

fn oracle(exprs: &[&str]) -> Option<Vec<TimeExpr>> {
    Some(exprs.iter().map(|e| crate::expr::parse_expr(e).expect("oracle parses")).collect())
}

fn gain(role: GainRole, rows: &[&[&str]]) -> FeedbackGain {
    FeedbackGain::new(role, m(rows))
}

pub fn load_catalog() -> Vec<CatalogEntry> {
    use Property::*;
    use VerdictStatus::*;
    let cert = |ps: &[Property]| ps.iter().map(|&p| (p, CertifiedOnWindow)).collect::<Vec<_>>();
    let pass = |ids: &[TheoremId]| ids.iter().map(|&id| (id, ReportStatus::Pass)).collect::<Vec<_>>();
    let sigma = vec![0.5, 1.0, 2.0];
    let scalar = |e: &str| m(&[&[e]]);
    let one = || Some(scalar("1"));
    let mut entries = Vec::new();

    entries.push(CatalogEntry {
        id: "S0",
        description: "free plant: A = 0, B = C = I, n = 2",
        file: Draft {
            name: "S0",
            a: ExprMatrix::zeros(2, 2),
            b: Some(ExprMatrix::identity(2)),
            c: Some(ExprMatrix::identity(2)),
            domain: [-5.0, 5.0],
            gains: vec![gain(GainRole::StateFeedback, &[&["0.2*exp(-abs(t))", "0"], &["0", "0.2*exp(-abs(t))"]])],
            t: g(-3.0, 3.0, 7),
            sigma: sigma.clone(),
            hyp_t: Some(g(-3.0, 3.0, 13)),
        }
        .file(),
        oracle: oracle(&["0", "0"]),
        verdicts: cert(&[CO, UCO, NUCO, CC, UCC, NUCC]),
        witness: None,
        theorems: pass(&[TheoremId::GramianDuality, TheoremId::TwoOfThreeUniformCtrl, TheoremId::FeedbackCtrl]),
    });

    let four_pi = 4.0 * PI;
    entries.push(CatalogEntry {
        id: "S1",
        description: "a(t) = -t sin t, C = 1: bounded growth that is not uniform",
        file: Draft {
            name: "S1",
            a: scalar("-t*sin(t)"),
            b: None,
            c: one(),
            domain: [-15.0, 15.0],
            gains: vec![],
            t: g(-four_pi, four_pi, 33),
            sigma: vec![0.5, PI / 2.0, 2.0],
            hyp_t: None,
        }
        .file(),
        oracle: oracle(&["t*cos(t) - sin(t)"]),
        verdicts: vec![(CO, CertifiedOnWindow), (UCO, FalsifiedUnderCaps), (NUCO, CertifiedOnWindow)],
        witness: Some(ExpectedWitness { width: PI / 2.0, values: (1..=2).map(|n| (2.0 * n as f64 * PI, (2.0 * n as f64 * PI - 1.0).exp())).collect() }),
        theorems: pass(&[TheoremId::GramianDuality]),
    });

    entries.push(CatalogEntry {
        id: "S2",
        description: "scalar A = -1, B = C = 1",
        file: Draft { name: "S2", a: scalar("-1"), b: one(), c: one(), domain: [-5.0, 5.0], gains: vec![], t: g(-3.0, 3.0, 7), sigma: sigma.clone(), hyp_t: None }
            .file(),
        oracle: oracle(&["-t"]),
        verdicts: cert(&[UCO, UCC, NUCO, NUCC]),
        witness: None,
        theorems: pass(&[TheoremId::GramianDuality, TheoremId::TwoOfThreeUniformObs]),
    });

    entries.push(CatalogEntry {
        id: "S3",
        description: "scalar A = 2, C = 1 with observer L = 5 exp(-3|t|)",
        file: Draft {
            name: "S3",
            a: scalar("2"),
            b: None,
            c: one(),
            domain: [-5.0, 5.0],
            gains: vec![gain(GainRole::Observer, &[&["5*exp(-3*abs(t))"]])],
            t: g(-3.0, 3.0, 13),
            sigma: sigma.clone(),
            hyp_t: Some(g(-0.5, 0.5, 11)),
        }
        .file(),
        oracle: oracle(&["2*t"]),
        verdicts: cert(&[NUCO]),
        witness: None,
        theorems: pass(&[TheoremId::DetectImpliesNuco, TheoremId::TwoOfThreeObs]),
    });

    entries.push(CatalogEntry {
        id: "S4",
        description: "scalar A = 2, B = 1 with state feedback F = 5 exp(-3|t|)",
        file: Draft {
            name: "S4",
            a: scalar("2"),
            b: one(),
            c: None,
            domain: [-5.0, 5.0],
            gains: vec![gain(GainRole::StateFeedback, &[&["5*exp(-3*abs(t))"]])],
            t: g(-3.0, 3.0, 13),
            sigma: sigma.clone(),
            hyp_t: Some(g(-0.5, 0.5, 11)),
        }
        .file(),
        oracle: oracle(&["2*t"]),
        verdicts: cert(&[NUCC]),
        witness: None,
        theorems: pass(&[TheoremId::StabImpliesNucc, TheoremId::TwoOfThreeCtrl]),
    });

    entries.push(CatalogEntry {
        id: "S5",
        description: "S2 with output injection K = 0.1 exp(-3|t|)",
        file: Draft {
            name: "S5",
            a: scalar("-1"),
            b: one(),
            c: one(),
            domain: [-5.0, 5.0],
            gains: vec![gain(GainRole::OutputInjection, &[&["0.1*exp(-3*abs(t))"]])],
            t: g(-3.0, 3.0, 7),
            sigma: vec![1.0, 2.0],
            hyp_t: Some(g(-5.0, 5.0, 21)),
        }
        .file(),
        oracle: oracle(&["-t"]),
        verdicts: cert(&[NUCO]),
        witness: None,
        theorems: pass(&[TheoremId::FeedbackObs]),
    });

    entries.push(CatalogEntry {
        id: "S6",
        description: "S0 with plant perturbation P = 0.5 exp(-|t|) I",
        file: Draft {
            name: "S6",
            a: ExprMatrix::zeros(2, 2),
            b: Some(ExprMatrix::identity(2)),
            c: Some(ExprMatrix::identity(2)),
            domain: [-7.0, 7.0],
            gains: vec![gain(GainRole::Perturbation, &[&["0.5*exp(-abs(t))", "0"], &["0", "0.5*exp(-abs(t))"]])],
            t: g(-5.0, 5.0, 20),
            sigma: sigma.clone(),
            hyp_t: None,
        }
        .file(),
        oracle: oracle(&["0", "0"]),
        verdicts: cert(&[UCC]),
        witness: None,
        theorems: pass(&[TheoremId::PerturbLemma]),
    });

    for (id, v, g_expr, description) in [
        ("S7", "-1", "-t", "plant V = -1"),
        ("S8", "1", "t", "plant V = +1"),
        ("S9", "0", "0", "plant V = 0"),
    ] {
        entries.push(CatalogEntry {
            id,
            description,
            file: Draft { name: id, a: scalar(v), b: None, c: None, domain: [-6.0, 6.0], gains: vec![], t: g(0.0, 5.0, 11), sigma: vec![1.0], hyp_t: None }.file(),
            oracle: oracle(&[g_expr]),
            verdicts: vec![],
            witness: None,
            theorems: pass(&[TheoremId::StabEquiv]),
        });
    }
    entries
}

pub fn find(id: &str) -> Result<CatalogEntry> {
    load_catalog()
        .into_iter()
        .find(|e| e.id.eq_ignore_ascii_case(id))
        .ok_or_else(|| Error::invalid(format!("no catalog entry `{id}`")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub got: String,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryRun {
    pub id: String,
    pub verdicts: Vec<Verdict>,
    pub theorems: Vec<TheoremReport>,
    pub checks: Vec<Check>,
}

impl EntryRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

pub const WITNESS_RTOL: f64 = 1e-6;

fn witness_check(verdict: &Verdict, want: &ExpectedWitness) -> Check {
    let expected = format!("width {} with values {:?}", want.width, want.values);
    let Some(Witness::Kalman(k)) = &verdict.witness else {
        return Check { name: "UCO witness".into(), expected, got: format!("{:?}", verdict.witness), ok: false };
    };
    let mut ok = (k.width - want.width).abs() <= 1e-12;
    let mut got = Vec::new();
    for &(t, value) in &want.values {
        match k.values.iter().find(|v| (v.t - t).abs() <= 1e-9) {
            Some(v) => {
                ok &= ((v.norm - value) / value).abs() <= WITNESS_RTOL;
                got.push((v.t, v.norm));
            }
            None => ok = false,
        }
    }
    Check { name: "UCO witness".into(), expected, got: format!("width {} with values {got:?}", k.width), ok }
}

/// Runs the expected verdicts and theorem checks of one entry.
pub fn run_entry(entry: &CatalogEntry, over: &Overrides) -> Result<EntryRun> {
    let r = entry.file.resolve(over)?;
    let ev = TransitionEvaluator::new(r.system.clone(), r.step_control());
    let cs = r.classify_settings();
    let vs = r.verify_settings();
    let mut run = EntryRun { id: entry.id.to_string(), verdicts: vec![], theorems: vec![], checks: vec![] };
    for &(property, want) in &entry.verdicts {
        let v = classify(&ev, property, &cs)?;
        run.checks.push(Check { name: format!("{property:?}"), expected: format!("{want:?}"), got: format!("{:?}", v.status), ok: v.status == want });
        if property == Property::UCO {
            if let Some(w) = &entry.witness {
                run.checks.push(witness_check(&v, w));
            }
        }
        run.verdicts.push(v);
    }
    for &(id, want) in &entry.theorems {
        let rep = verify(&ev, id, &r.scenario, &vs)?;
        run.checks.push(Check { name: id.to_string(), expected: format!("{want:?}"), got: format!("{:?}", rep.status), ok: rep.status == want });
        run.theorems.push(rep);
    }
    Ok(run)
}
