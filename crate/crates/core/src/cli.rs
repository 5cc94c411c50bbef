//! Command-line front end: `solve`, `verify`, `eig` and `sweep`.
//!
//! Exit codes: 0 when everything passed, 1 on solver non-convergence or a
//! failed verdict, 2 on usage or configuration errors.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::{DomainSpec, Prepared, RunConfig};
use crate::elliptic::{
    analytic_box_eigenvalues, check_spectral_condition, dirichlet_eigenpairs, discrete_box_eigenvalues, smallest_eigenvalue,
    solve_split_u, SpectralCheck, EIG_TOL,
};
use crate::error::{KgmError, Result};
use crate::field_io::{write_csv, write_vtk};
use crate::functional::Regime;
use crate::grid::{l2_norm, ScalarField};
use crate::harness::{certify, run_all, scenario_set, Certificate, HarnessConfig, Verdict, CERT_RESIDUAL, DEFAULT_GRID};
use crate::optimize::{find_negative_endpoint, minimize, mountain_pass, multiplicity_probe, CriticalPoint};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kgmvar", version, about = "Reduction solver for electrostatic Klein-Gordon-Maxwell systems on boxes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration (solve, sweep) or harness settings (verify)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// interior nodes per axis, overriding the configured grid
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured problem and write a report with field dumps.
    Solve,
    /// Run a named scenario set: dichotomy, mix, nonlin, qlimit or all.
    Verify {
        #[arg(default_value = "all")]
        set: String,
    },
    /// Print the lowest Dirichlet eigenvalues of the box.
    Eig {
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// dimension of the unit box used without --config
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
    /// Solve the configured problem for each value of one parameter.
    Sweep {
        #[arg(long, value_enum)]
        axis: SweepAxis,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Q,
    Omega,
    M,
    Grid,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct HistorySummary {
    pub initial: f64,
    pub last: f64,
    pub steps: usize,
    pub monotone: bool,
}

impl HistorySummary {
    fn of(h: &[f64]) -> Self {
        Self {
            initial: h.first().copied().unwrap_or(f64::NAN),
            last: h.last().copied().unwrap_or(f64::NAN),
            steps: h.len().saturating_sub(1),
            monotone: h.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)),
        }
    }
}

/// Self-contained record of one `solve` run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub lambda1: f64,
    /// spectral condition for the Dirichlet regimes
    pub spectral: Option<SpectralCheck>,
    /// `min (m² - Φ²)` over the nodes
    pub potential_margin: f64,
    pub warnings: Vec<String>,
    pub histories: Vec<HistorySummary>,
    pub certificates: Vec<Certificate>,
    pub verdicts: Vec<Verdict>,
    pub timings: BTreeMap<String, f64>,
    pub error: Option<String>,
    pub exit_code: i32,
}

fn exit_code_for(e: &KgmError) -> i32 {
    match e {
        KgmError::Config(_) | KgmError::Parse(_) | KgmError::InvalidDomain(_) | KgmError::DomainMismatch(_) => EXIT_USAGE,
        _ => EXIT_SOLVER,
    }
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| KgmError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(n) = cli.grid {
        cfg.domain = cfg.domain.with_grid(n);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Configures the global thread pool from `KGMVAR_THREADS`.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("KGMVAR_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| KgmError::Config(format!("KGMVAR_THREADS={v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| KgmError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Solve => cmd_solve(cli),
        Command::Verify { set } => cmd_verify(cli, set),
        Command::Eig { k, dim } => cmd_eig(cli, *k, *dim),
        Command::Sweep { axis, values } => cmd_sweep(cli, *axis, values),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

struct Solved {
    points: Vec<CriticalPoint>,
    lambda1: f64,
    spectral: Option<SpectralCheck>,
}

/// Lift, reduce, optimize: minimizer for the linear regimes, mountain pass
/// (and optionally the multiplicity probe) for the nonlinear one.
fn solve_prepared(cfg: &RunConfig, p: &Prepared) -> Result<Solved> {
    let ctx = &p.context;
    let d = &p.domain;
    let (lambda1, e1) = smallest_eigenvalue(d, EIG_TOL)?;
    let spectral = (cfg.regime != Regime::Mixed).then(|| check_spectral_condition(&cfg.params, &p.zeta, lambda1));
    let points = match cfg.regime {
        Regime::Dirichlet | Regime::Mixed => {
            let start = if cfg.regime == Regime::Mixed && p.h.is_zero() {
                // φ_v is undefined at u = 0 without a matter trace
                e1.scaled(0.1)
            } else {
                ScalarField::zeros(d)
            };
            vec![minimize(ctx, &start, &cfg.solver.descent)?]
        }
        Regime::Nonlinear => {
            if cfg.solver.probe_multiplicity {
                let mut mcfg = cfg.solver.multiplicity;
                mcfg.seed = cfg.seed;
                multiplicity_probe(ctx, &mcfg)?.points
            } else {
                let end = find_negative_endpoint(ctx, &e1, &cfg.solver.mountain_pass)?;
                vec![mountain_pass(ctx, &end, &cfg.solver.mountain_pass)?]
            }
        }
    };
    Ok(Solved { points, lambda1, spectral })
}

fn pot_data(cfg: &RunConfig, p: &Prepared) -> crate::grid::BoundaryData {
    if cfg.regime == Regime::Mixed {
        p.theta.clone()
    } else {
        p.zeta.clone()
    }
}

fn write_fields(dir: &Path, tag: &str, fields: &[(String, ScalarField)], title: &str) -> Result<()> {
    if fields.is_empty() {
        return Ok(());
    }
    let refs: Vec<(&str, &ScalarField)> = fields.iter().map(|(n, f)| (n.as_str(), f)).collect();
    write_csv(&dir.join(format!("{tag}.csv")), &refs)?;
    write_vtk(&dir.join(format!("{tag}.vtk")), &refs, title)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| KgmError::Parse(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn cmd_solve(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    let started = Instant::now();
    let mut warnings = cfg.warnings();
    let prepared = cfg.prepare()?;
    let mut timings = BTreeMap::new();
    timings.insert("lift".to_string(), started.elapsed().as_secs_f64());
    let mut report = RunReport {
        config: cfg.clone(),
        lambda1: f64::NAN,
        spectral: None,
        potential_margin: prepared.context.potential_margin(),
        warnings: Vec::new(),
        histories: Vec::new(),
        certificates: Vec::new(),
        verdicts: Vec::new(),
        timings,
        error: None,
        exit_code: EXIT_OK,
    };
    let pot = pot_data(&cfg, &prepared);
    let mut fields = Vec::new();
    let t = Instant::now();
    match solve_prepared(&cfg, &prepared) {
        Ok(s) => {
            report.lambda1 = s.lambda1;
            report.spectral = s.spectral;
            for (k, cp) in s.points.iter().enumerate() {
                let cert = certify(&prepared.context, &format!("solution {}", k + 1), &cp.v, &cp.phi_v, &prepared.h, &pot, cp.converged)?;
                if !cert.holds(CERT_RESIDUAL) {
                    report.exit_code = EXIT_SOLVER;
                }
                report.histories.push(HistorySummary::of(&cp.j_history));
                report.certificates.push(cert);
                fields.push((format!("u{}", k + 1), cp.v.add(prepared.context.u_lift())));
                fields.push((format!("phi{}", k + 1), cp.phi_v.add(prepared.context.potential())));
            }
            if s.points.is_empty() {
                report.exit_code = EXIT_SOLVER;
                report.error = Some("no critical point found".into());
            }
        }
        Err(e) => {
            report.exit_code = exit_code_for(&e);
            report.error = Some(e.to_string());
        }
    }
    report.timings.insert("solve".to_string(), t.elapsed().as_secs_f64());
    if let Some(h) = report.spectral {
        if !h.holds {
            let gap = cfg.params.omega.powi(2) - cfg.params.m.powi(2);
            let spectrum = discrete_box_eigenvalues(&prepared.domain, 10.min(prepared.domain.num_interior()));
            let avoids = spectrum.iter().all(|l| (gap - l).abs() > 1e-6);
            let mut w = format!("spectral condition fails (margin {:.6e})", h.margin);
            if avoids {
                w.push_str("; omega^2 - m^2 avoids the spectrum, existence is open");
            }
            warnings.push(w);
        }
    }
    report.warnings = warnings;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("report.json"), &report)?;
        write_fields(dir, "fields", &fields, "kgmvar solve")?;
    }
    say(cli.quiet, format!("lambda1 = {:.10e}", report.lambda1));
    for (c, h) in report.certificates.iter().zip(&report.histories) {
        say(
            cli.quiet,
            format!(
                "{}: J = {:.10e}  |u| = {:.6e}  residual = {:.3e}  steps = {}",
                c.label, c.j_value, c.u_norm, c.total_residual, h.steps
            ),
        );
    }
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    Ok(report.exit_code)
}

fn cmd_verify(cli: &Cli, set: &str) -> Result<i32> {
    let scenarios = scenario_set(set, cli.grid.unwrap_or(DEFAULT_GRID))?;
    let mut hcfg = match &cli.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| KgmError::Parse(e.to_string()))?,
        None => HarnessConfig::default(),
    };
    if let Some(s) = cli.seed {
        hcfg.seed = s;
    }
    let started = Instant::now();
    let results = run_all(&scenarios, &hcfg);
    let elapsed = started.elapsed().as_secs_f64();
    let mut all_pass = true;
    say(cli.quiet, format!("{:<22} {:<16} {:<6} notes", "scenario", "expected", "result"));
    for (s, r) in scenarios.iter().zip(&results) {
        let (tag, note) = match r {
            Ok(v) if v.informational() => ("INFO", v.notes.join("; ")),
            Ok(v) if v.pass => ("PASS", String::new()),
            Ok(v) => ("FAIL", v.notes.join("; ")),
            Err(e) => ("FAIL", e.to_string()),
        };
        all_pass &= tag != "FAIL";
        say(cli.quiet, format!("{:<22} {:<16} {:<6} {}", s.name, format!("{:?}", s.expected), tag, note));
    }
    say(cli.quiet, format!("{} scenarios in {:.1} s", scenarios.len(), elapsed));
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        for (s, r) in scenarios.iter().zip(&results) {
            match r {
                Ok(v) => {
                    write_json(&dir.join(format!("{}.json", s.name)), v)?;
                    write_fields(dir, &s.name, &v.fields, &s.name)?;
                }
                Err(e) => write_json(&dir.join(format!("{}.json", s.name)), &serde_json::json!({
                    "scenario": s.name,
                    "pass": false,
                    "error": e.to_string(),
                }))?,
            }
        }
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_SOLVER })
}

/// `(index, computed, closed form, analytic, relative error against
/// analytic, multiplicity)`.
pub type EigenRow = (usize, f64, f64, f64, f64, usize);

pub fn eigen_table(d: &crate::grid::Domain, k: usize, seed: u64) -> Result<Vec<EigenRow>> {
    if k == 0 || k > 10 {
        return Err(KgmError::Config(format!("k must lie in 1..=10, got {k}")));
    }
    let pairs = dirichlet_eigenpairs(d, k, 1e-10, seed)?;
    let discrete = discrete_box_eigenvalues(d, k);
    let analytic = analytic_box_eigenvalues(d, k);
    let mut rows = Vec::new();
    for (j, (lam, _)) in pairs.iter().enumerate() {
        let mult = pairs.iter().filter(|(l, _)| (l - lam).abs() <= 1e-6 * lam.abs()).count();
        rows.push((j + 1, *lam, discrete[j], analytic[j], (lam - analytic[j]).abs() / analytic[j], mult));
    }
    Ok(rows)
}

fn cmd_eig(cli: &Cli, k: usize, dim: usize) -> Result<i32> {
    let spec = match &cli.config {
        Some(_) => load_config(cli)?.domain,
        None => {
            if !(2..=3).contains(&dim) {
                return Err(KgmError::Config(format!("dim must be 2 or 3, got {dim}")));
            }
            DomainSpec::cube(dim, 1.0, cli.grid.unwrap_or(DEFAULT_GRID))
        }
    };
    let d = spec.build()?;
    let rows = eigen_table(&d, k, cli.seed.unwrap_or(0))?;
    say(cli.quiet, format!("{:>3} {:>24} {:>24} {:>24} {:>10} {:>4}", "k", "computed", "closed form", "continuum", "rel.err", "mult"));
    for (j, lam, disc, ana, err, mult) in &rows {
        say(cli.quiet, format!("{j:>3} {lam:>24.16e} {disc:>24.16e} {ana:>24.16e} {err:>10.3e} {mult:>4}"));
    }
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        let mut text = String::from("k,computed,closed_form,continuum,relative_error,multiplicity\n");
        for (j, lam, disc, ana, err, mult) in &rows {
            text.push_str(&format!("{j},{lam:.16e},{disc:.16e},{ana:.16e},{err:.16e},{mult}\n"));
        }
        fs::write(dir.join("eigenvalues.csv"), text)?;
    }
    Ok(EXIT_OK)
}

/// One row of a parameter sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub lambda1: f64,
    /// spectral margin in the Dirichlet regimes, potential margin otherwise
    pub margin: f64,
    pub j: f64,
    pub u_norm: f64,
    pub residual: f64,
    /// `‖u_q/(√(4π)q) - u_0‖₂` against the uncoupled matter problem
    /// (Dirichlet regime)
    pub limit_error: f64,
    /// `|λ₁ - λ₁^continuum| / λ₁^continuum` on boxes
    pub lambda1_error: f64,
    pub status: String,
}

fn sweep_row(base: &RunConfig, axis: SweepAxis, value: f64) -> Result<SweepRow> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::Q => cfg.params.q = value,
        SweepAxis::Omega => cfg.params.omega = value,
        SweepAxis::M => cfg.params.m = value,
        SweepAxis::Grid => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(KgmError::Config(format!("grid sweep values must be positive integers, got {value}")));
            }
            cfg.domain = cfg.domain.with_grid(value as usize);
        }
    }
    let mut row = SweepRow {
        value,
        lambda1: f64::NAN,
        margin: f64::NAN,
        j: f64::NAN,
        u_norm: f64::NAN,
        residual: f64::NAN,
        limit_error: f64::NAN,
        lambda1_error: f64::NAN,
        status: "ok".into(),
    };
    let prepared = match cfg.prepare() {
        Ok(p) => p,
        Err(e) => {
            row.status = format!("error: {e}");
            return Ok(row);
        }
    };
    let d = &prepared.domain;
    let (lambda1, _) = smallest_eigenvalue(d, EIG_TOL)?;
    row.lambda1 = lambda1;
    row.lambda1_error = (lambda1 - analytic_box_eigenvalues(d, 1)[0]).abs() / analytic_box_eigenvalues(d, 1)[0];
    row.margin = match cfg.regime {
        Regime::Mixed => prepared.context.potential_margin(),
        _ => check_spectral_condition(&cfg.params, &prepared.zeta, lambda1).margin,
    };
    match solve_prepared(&cfg, &prepared) {
        Ok(s) => {
            if let Some(cp) = s.points.first() {
                let cert = certify(&prepared.context, "sweep", &cp.v, &cp.phi_v, &prepared.h, &pot_data(&cfg, &prepared), cp.converged)?;
                row.j = cp.j_value;
                row.u_norm = cert.u_norm;
                row.residual = cert.total_residual;
                if !cert.holds(CERT_RESIDUAL) {
                    row.status = "not certified".into();
                }
                if cfg.regime == Regime::Dirichlet && cfg.params.q != 0.0 {
                    if let Ok(u0) = solve_split_u(d, cfg.params.m, cfg.params.omega, &prepared.h) {
                        let u = cp.v.add(prepared.context.u_lift()).scaled(1.0 / ((4.0 * PI).sqrt() * cfg.params.q));
                        row.limit_error = l2_norm(&u.sub(&u0));
                    }
                }
            }
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    Ok(row)
}

fn csv_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn cmd_sweep(cli: &Cli, axis: SweepAxis, values: &[f64]) -> Result<i32> {
    let cfg = load_config(cli)?;
    let mut text = String::from("value,lambda1,margin,j,u_norm,residual,limit_error,lambda1_error,status\n");
    let mut code = EXIT_OK;
    for &value in values {
        let row = sweep_row(&cfg, axis, value)?;
        if row.status != "ok" {
            code = EXIT_SOLVER;
        }
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_num(row.value),
            csv_num(row.lambda1),
            csv_num(row.margin),
            csv_num(row.j),
            csv_num(row.u_norm),
            csv_num(row.residual),
            csv_num(row.limit_error),
            csv_num(row.lambda1_error),
            row.status.replace(',', ";")
        ));
    }
    if !cli.quiet {
        print!("{text}");
    }
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("sweep.csv"), &text)?;
    }
    Ok(code)
}
