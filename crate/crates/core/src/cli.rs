//! `ltvkit` command line.
//!
//! Exit codes: 0 pass or certified, 2 fail or falsified, 3 inconclusive or
//! hypotheses violated, 1 error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::catalog::{self, CatalogEntry};
use crate::classify::{classify, Property, Verdict, VerdictStatus};
use crate::envelope::{fit_envelope, Envelope, EnvelopeKind, PairGrid};
use crate::error::{Error, Result};
use crate::gramian::{check_gramian_relations, gramian, relative_error, GramianKind};
use crate::grid::{parse_list, Caps, GridSpec};
use crate::linalg::sym_eigenvalues;
use crate::report::{matrix_rows, surface_csv, Overrides, Report, Resolved, SurfaceRow, SystemFile, ToleranceOverrides};
use crate::transition::{relative_residual, TransitionEvaluator};
use crate::verify::stability::nues_status;
use crate::verify::{verify, ReportStatus, TheoremId, TheoremReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

/// Tolerance of the cocycle self-check printed by `transition`.
pub const COCYCLE_TOL: f64 = 1e-7;
/// Tolerance of the Gramian relation residuals printed by `gramian`.
pub const RELATION_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "ltvkit", version, about = "Observability and controllability analysis of linear time-varying systems")]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalOpts {
    /// relative integrator tolerance
    #[arg(long, global = true)]
    pub rtol: Option<f64>,
    /// absolute integrator tolerance
    #[arg(long, global = true)]
    pub atol: Option<f64>,
    /// Gramian eigenvalue threshold
    #[arg(long, global = true)]
    pub eig_tol: Option<f64>,
    /// slack tolerance of theorem checks
    #[arg(long, global = true)]
    pub slack_tol: Option<f64>,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// t grid as lo:hi:count
    #[arg(long, global = true, value_parser = parse_grid, allow_hyphen_values = true)]
    pub t_grid: Option<GridSpec>,
    /// σ grid as v1,v2,...
    #[arg(long, global = true, value_parser = parse_sigma)]
    pub sigma_grid: Option<SigmaList>,
    /// caps as rate:nu:pref
    #[arg(long, global = true, value_parser = parse_caps)]
    pub caps: Option<Caps>,
    /// directory for report.json and CSV tables
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> std::result::Result<GridSpec, String> {
    GridSpec::parse(s).map_err(|e| e.to_string())
}

/// A comma-separated σ list (a newtype so clap takes it as one value).
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaList(pub Vec<f64>);

fn parse_sigma(s: &str) -> std::result::Result<SigmaList, String> {
    parse_list(s).map(SigmaList).map_err(|e| e.to_string())
}

fn parse_caps(s: &str) -> std::result::Result<Caps, String> {
    Caps::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Φ(t, s) with identity, inverse and cocycle self-checks
    #[command(allow_negative_numbers = true)]
    Transition { system: String, t: f64, s: f64 },
    /// One Gramian (W, K, M or N) on [a, b] with eigenvalues and relation residuals
    #[command(allow_negative_numbers = true)]
    Gramian { system: String, kind: String, a: f64, b: f64 },
    /// Classify CO, UCO, NUCO, CC, UCC or NUCC on the window
    Classify { system: String, property: String },
    /// Fit a growth envelope (UBG, NUBG, NUKalman, NuesForward, NuesBackward)
    FitEnvelope { system: String, kind: String },
    /// Check one theorem on a concrete system
    Verify { system: String, theorem: String },
    /// Built-in test systems
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum CatalogAction {
    List,
    /// Run one entry, or `all`
    Run { id: String },
    /// Print (or write under --out) an entry as a system file
    Export { id: String },
}

/// A finished command: the report plus extra files for `--out`.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<(String, String)>,
    pub summary: String,
    /// printed on stdout instead of the report when there is no `--out`
    pub plain: Option<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.report.deterministic.exit_code
    }
}

impl GlobalOpts {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            t_grid: self.t_grid,
            sigma_grid: self.sigma_grid.as_ref().map(|l| l.0.clone()),
            caps: self.caps,
            tolerances: ToleranceOverrides { rtol: self.rtol, atol: self.atol, eig_tol: self.eig_tol, slack_tol: self.slack_tol },
        }
    }
}

/// A path to a system file, or a catalog id.
fn load_system(arg: &str) -> Result<(SystemFile, Option<CatalogEntry>)> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok((SystemFile::load(path)?, None));
    }
    match catalog::find(arg) {
        Ok(e) => Ok((e.file.clone(), Some(e))),
        Err(_) => Err(Error::invalid(format!("`{arg}` is neither a readable file nor a catalog id"))),
    }
}

fn settings_json(r: &Resolved) -> Value {
    serde_json::to_value(r).expect("settings serialize")
}

fn status_code(s: VerdictStatus) -> i32 {
    match s {
        VerdictStatus::CertifiedOnWindow => EXIT_OK,
        VerdictStatus::FalsifiedUnderCaps => EXIT_FAIL,
        VerdictStatus::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn report_code(s: ReportStatus) -> i32 {
    match s {
        ReportStatus::Pass => EXIT_OK,
        ReportStatus::Fail => EXIT_FAIL,
        ReportStatus::HypothesisViolated => EXIT_INCONCLUSIVE,
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn cmd_transition(opts: &GlobalOpts, system: &str, t: f64, s: f64) -> Result<Outcome> {
    let (file, entry) = load_system(system)?;
    let r = file.resolve(&opts.overrides())?;
    let ev = TransitionEvaluator::new(r.system.clone(), r.step_control());
    let n = r.system.n();
    let id = DMatrix::<f64>::identity(n, n);
    let phi = ev.transition(t, s)?;
    let back = ev.transition(s, t)?;
    let mid = 0.5 * (t + s);
    let cocycle = relative_error(&(ev.transition(t, mid)? * ev.transition(mid, s)?), &phi);
    let inverse = relative_residual(&(&phi * &back), &id);
    let identity = relative_residual(&ev.transition(t, t)?, &id);
    let worst = cocycle.max(inverse).max(identity);
    let mut results = json!({
        "t": t, "s": s, "phi": matrix_rows(&phi),
        "checks": {"identity": identity, "inverse": inverse, "cocycle": cocycle, "midpoint": mid, "tolerance": COCYCLE_TOL},
    });
    if let Some(Ok(o)) = entry.as_ref().and_then(|e| e.oracle_transition(t, s)) {
        results["oracle"] = json!({"phi": matrix_rows(&o), "relative_error": relative_error(&phi, &o)});
    }
    let code = if worst <= COCYCLE_TOL { EXIT_OK } else { EXIT_FAIL };
    let summary = format!("Phi({t}, {s}) = {:?}; self-check residual {worst:e}", matrix_rows(&phi));
    Ok(Outcome { report: Report::new(format!("transition {system} {t} {s}"), settings_json(&r), results, code), files: vec![], summary, plain: None })
}

fn cmd_gramian(opts: &GlobalOpts, system: &str, kind: &str, a: f64, b: f64) -> Result<Outcome> {
    let k = GramianKind::parse(kind).ok_or_else(|| Error::invalid(format!("unknown Gramian `{kind}` (W, K, M, N)")))?;
    if a > b {
        return Err(Error::invalid(format!("interval [{a}, {b}] is reversed")));
    }
    let (file, _) = load_system(system)?;
    let r = file.resolve(&opts.overrides())?;
    let ev = TransitionEvaluator::new(r.system.clone(), r.step_control());
    let g = gramian(&ev, k, a, b)?;
    let rel = check_gramian_relations(&ev, a, b)?;
    let results = json!({"gramian": to_value(&g), "eigenvalues": sym_eigenvalues(&g.value), "relations": to_value(&rel), "tolerance": RELATION_TOL});
    let code = if rel.max() <= RELATION_TOL { EXIT_OK } else { EXIT_FAIL };
    let summary = format!("{k:?}({a}, {b}): lambda in [{:e}, {:e}]; relation residual {:e}", g.lambda_min, g.lambda_max, rel.max());
    Ok(Outcome { report: Report::new(format!("gramian {system} {kind} {a} {b}"), settings_json(&r), results, code), files: vec![], summary, plain: None })
}

/// `(t, σ)` eigenvalue surfaces of a verdict with the fitted corridor.
pub fn verdict_surfaces(v: &Verdict) -> Vec<(String, String)> {
    let weight = v.property.weight();
    v.tables
        .iter()
        .map(|tab| {
            let fit = v.fits.iter().find(|f| f.kind == tab.kind);
            let mut rows = Vec::new();
            for (i, &t) in tab.t_grid.iter().enumerate() {
                for (j, &sigma) in tab.sigma_grid.iter().enumerate() {
                    let (lo, hi) = match fit {
                        Some(f) => {
                            let (e0, e1) = f.exponents;
                            let w = weight.w(t);
                            (
                                f.floor_at(sigma).map_or(f64::NAN, |fl| (fl - 2.0 * e0 * w).exp()),
                                f.ceiling_at(sigma).map_or(f64::NAN, |c| (c + 2.0 * e1 * w).exp()),
                            )
                        }
                        None => (f64::NAN, f64::NAN),
                    };
                    rows.push(SurfaceRow { t, sigma, lambda_min: tab.lambda_min[i][j], lambda_max: tab.lambda_max[i][j], bound_lower: lo, bound_upper: hi });
                }
            }
            (format!("{:?}.csv", tab.kind), surface_csv(&rows))
        })
        .collect()
}

fn cmd_classify(opts: &GlobalOpts, system: &str, property: &str) -> Result<Outcome> {
    let p = Property::parse(property).ok_or_else(|| Error::invalid(format!("unknown property `{property}`")))?;
    let (file, _) = load_system(system)?;
    let r = file.resolve(&opts.overrides())?;
    let ev = TransitionEvaluator::new(r.system.clone(), r.step_control());
    let v = classify(&ev, p, &r.classify_settings())?;
    let files = verdict_surfaces(&v);
    let summary = format!("{} {p:?}: {:?}", file.name, v.status);
    let report = Report::new(format!("classify {system} {p:?}"), settings_json(&r), to_value(&v), status_code(v.status));
    Ok(Outcome { report, files, summary, plain: None })
}

/// Status of a fitted envelope: NUES fits are read as decay verdicts, the
/// others only need to fit under the prefactor cap.
pub fn envelope_status(env: &Envelope, log_cap: f64) -> VerdictStatus {
    if env.kind.is_nues() {
        nues_status(env, log_cap)
    } else if env.log_prefactor <= log_cap {
        VerdictStatus::CertifiedOnWindow
    } else {
        VerdictStatus::FalsifiedUnderCaps
    }
}

fn cmd_fit_envelope(opts: &GlobalOpts, system: &str, kind: &str) -> Result<Outcome> {
    let k = EnvelopeKind::parse(kind).ok_or_else(|| Error::invalid(format!("unknown envelope kind `{kind}`")))?;
    let (file, _) = load_system(system)?;
    let r = file.resolve(&opts.overrides())?;
    let ev = TransitionEvaluator::new(r.system.clone(), r.step_control());
    let env = fit_envelope(&ev, k, &PairGrid::for_kind(k, &r.t_grid), &r.caps.rate_grid(), &r.caps.nu_grid(), r.caps.log_pref())?;
    let status = envelope_status(&env, r.caps.log_pref());
    let summary = format!("{} {}: K = {:e}, rate = {}, nu = {}, slack = {:e}; {status:?}", file.name, k.name(), env.prefactor, env.rate, env.nu, env.slack);
    let results = json!({"envelope": to_value(&env), "status": to_value(&status)});
    Ok(Outcome { report: Report::new(format!("fit-envelope {system} {}", k.name()), settings_json(&r), results, status_code(status)), files: vec![], summary, plain: None })
}

/// Slack rows as CSV, plus a `(t, σ)` surface for each group of eigenvalue bounds.
pub fn theorem_tables(rep: &TheoremReport) -> Vec<(String, String)> {
    use crate::classify::Side;
    let mut out = Vec::new();
    if rep.rows.is_empty() {
        return out;
    }
    let mut rows = String::from("group,t,second,observed,bound,side,slack\n");
    for r in &rep.rows {
        rows.push_str(&format!("{},{:e},{:e},{:e},{:e},{:?},{:e}\n", r.group, r.t, r.second, r.observed, r.bound, r.side, r.slack));
    }
    out.push(("rows.csv".into(), rows));
    let mut groups: Vec<&str> = Vec::new();
    for r in rep.rows.iter().filter(|r| r.side == Side::Lower) {
        if !groups.contains(&r.group.as_str()) {
            groups.push(&r.group);
        }
    }
    for g in groups {
        let mut surface: Vec<SurfaceRow> = Vec::new();
        for r in rep.rows.iter().filter(|r| r.group == g) {
            let idx = match surface.iter().position(|s| s.t == r.t && s.sigma == r.second) {
                Some(i) => i,
                None => {
                    surface.push(SurfaceRow { t: r.t, sigma: r.second, lambda_min: f64::NAN, lambda_max: f64::NAN, bound_lower: f64::NAN, bound_upper: f64::NAN });
                    surface.len() - 1
                }
            };
            let s = &mut surface[idx];
            match r.side {
                Side::Lower => (s.lambda_min, s.bound_lower) = (r.observed, r.bound),
                Side::Upper => (s.lambda_max, s.bound_upper) = (r.observed, r.bound),
            }
        }
        out.push((format!("{g}.csv"), surface_csv(&surface)));
    }
    out
}

fn cmd_verify(opts: &GlobalOpts, system: &str, theorem: &str) -> Result<Outcome> {
    let id = TheoremId::parse(theorem).ok_or_else(|| Error::invalid(format!("unknown theorem id `{theorem}`")))?;
    let (file, _) = load_system(system)?;
    let r = file.resolve(&opts.overrides())?;
    let ev = TransitionEvaluator::new(r.system.clone(), r.step_control());
    let rep = verify(&ev, id, &r.scenario, &r.verify_settings())?;
    let mut summary = format!("{} {id}: {:?}", file.name, rep.status);
    for m in rep.violated_margins() {
        summary.push_str(&format!("\n  hypothesis `{}` violated (margin {:e})", m.name, m.value));
    }
    if let Some(i) = rep.failed_stage {
        summary.push_str(&format!("\n  failed at stage {i} `{}`", rep.stages[i].name));
    }
    let files = theorem_tables(&rep);
    Ok(Outcome { report: Report::new(format!("verify {system} {id}"), settings_json(&r), to_value(&rep), report_code(rep.status)), files, summary, plain: None })
}

fn cmd_catalog(opts: &GlobalOpts, action: &CatalogAction) -> Result<Outcome> {
    match action {
        CatalogAction::List => {
            let entries = catalog::load_catalog();
            let list: Vec<Value> = entries
                .iter()
                .map(|e| {
                    json!({
                        "id": e.id,
                        "description": e.description,
                        "verdicts": e.verdicts.iter().map(|(p, s)| json!([to_value(p), to_value(s)])).collect::<Vec<_>>(),
                        "theorems": e.theorems.iter().map(|(t, s)| json!([t.as_str(), to_value(s)])).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let summary = entries.iter().map(|e| format!("{:<4}{}", e.id, e.description)).collect::<Vec<_>>().join("\n");
            Ok(Outcome { report: Report::new("catalog list", json!({}), Value::Array(list), EXIT_OK), files: vec![], summary, plain: None })
        }
        CatalogAction::Export { id } => {
            let e = catalog::find(id)?;
            let text = e.file.to_json();
            let files = vec![(format!("{}.system.json", e.id), text.clone())];
            Ok(Outcome { report: Report::new(format!("catalog export {}", e.id), json!({}), to_value(&e.file), EXIT_OK), files, summary: format!("{} exported", e.id), plain: Some(text) })
        }
        CatalogAction::Run { id } => {
            let entries = if id.eq_ignore_ascii_case("all") { catalog::load_catalog() } else { vec![catalog::find(id)?] };
            let over = opts.overrides();
            let mut runs = Vec::new();
            let mut summary = Vec::new();
            for e in &entries {
                info!("catalog entry {}", e.id);
                let run = catalog::run_entry(e, &over)?;
                for c in &run.checks {
                    summary.push(format!("{} {} {}: expected {}, got {}", if c.ok { "PASS" } else { "FAIL" }, e.id, c.name, c.expected, c.got));
                }
                runs.push(run);
            }
            let code = if runs.iter().all(|r| r.passed()) { EXIT_OK } else { EXIT_FAIL };
            let settings = json!({"overrides": {
                "t_grid": to_value(&over.t_grid), "sigma_grid": to_value(&over.sigma_grid),
                "caps": to_value(&over.caps), "tolerances": to_value(&over.tolerances),
            }});
            Ok(Outcome { report: Report::new(format!("catalog run {id}"), settings, to_value(&runs), code), files: vec![], summary: summary.join("\n"), plain: None })
        }
    }
}

/// Runs a parsed command without touching stdout or the filesystem.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let start = Instant::now();
    let opts = &cli.opts;
    let mut out = match &cli.command {
        Command::Transition { system, t, s } => cmd_transition(opts, system, *t, *s),
        Command::Gramian { system, kind, a, b } => cmd_gramian(opts, system, kind, *a, *b),
        Command::Classify { system, property } => cmd_classify(opts, system, property),
        Command::FitEnvelope { system, kind } => cmd_fit_envelope(opts, system, kind),
        Command::Verify { system, theorem } => cmd_verify(opts, system, theorem),
        Command::Catalog { action } => cmd_catalog(opts, action),
    }?;
    out.report.footer.wall_time_s = start.elapsed().as_secs_f64();
    Ok(out)
}

fn write_out(dir: &Path, out: &Outcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), out.report.to_json())?;
    for (name, text) in &out.files {
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}

/// Parses `args` (program name first), runs, prints, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.opts.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return EXIT_ERROR;
        }
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(&cli) {
        Ok(out) => {
            eprintln!("{}", out.summary);
            match &cli.opts.out {
                Some(dir) => {
                    if let Err(e) = write_out(dir, &out) {
                        eprintln!("error: {e}");
                        return EXIT_ERROR;
                    }
                }
                None => println!("{}", out.plain.clone().unwrap_or_else(|| out.report.to_json())),
            }
            out.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
