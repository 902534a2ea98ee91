//! Command-line front end. Every command reads one JSON config and writes
//! its reports into `--out-dir`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::cell::{homogenized_tensor, CellError, MicroStrategy};
use crate::config::{Config, ConfigError};
use crate::mesh::Mesh;
use crate::pipeline::{
    build_homogenized_field, convergence_study, multiscale_check, solve_epsilon_vi, solve_homogenized_vi,
    ObstacleSolution, PipelineError, StudyReport,
};
use crate::tensor::SmallMat;
use crate::vi::KktReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;

/// Header line of every CSV output.
pub const CSV_SCHEMA: &str = "# schema=1";

#[derive(Parser, Debug)]
#[command(name = "homogvi", version, about = "Reiterated homogenization of obstacle problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Io {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Micro and meso correctors and A* at the cell anchor (cell.json).
    Cell(Io),
    /// ε-obstacle problem on the fine mesh (solution.csv, kkt.json).
    SolveEps(Io),
    /// Homogenized obstacle problem on the macro mesh (solution.csv, kkt.json).
    SolveHom(Io),
    /// Convergence study over the ε list (study.csv, study.json).
    Study(Io),
    /// Oscillatory-integral table I_ε against its mean-value limit (mscheck.csv).
    Mscheck(Io),
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Pipeline(PipelineError),
    Output(std::io::Error),
    Assertion(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(ConfigError::Invalid(e)) | Failure::Pipeline(e) if !e.is_input_error() => EXIT_SOLVER,
            Failure::Config(_) | Failure::Pipeline(_) => EXIT_CONFIG,
            Failure::Output(_) => EXIT_SOLVER,
            Failure::Assertion(_) => EXIT_ASSERTION,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Config(ConfigError::Schema(_)) => "schema",
            Failure::Config(ConfigError::Io(_)) => "config_io",
            Failure::Config(ConfigError::Missing(_)) => "schema",
            Failure::Config(ConfigError::Invalid(e)) | Failure::Pipeline(e) => match e {
                PipelineError::Resolution { .. } => "resolution_guard",
                PipelineError::Study { source, .. } if matches!(**source, PipelineError::Resolution { .. }) => {
                    "resolution_guard"
                }
                _ if e.is_input_error() => "invalid_input",
                _ => "solver",
            },
            Failure::Output(_) => "output_io",
            Failure::Assertion(_) => "assertion",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(e) => e.to_string(),
            Failure::Pipeline(e) => e.to_string(),
            Failure::Output(e) => format!("cannot write output: {e}"),
            Failure::Assertion(m) => m.clone(),
        }
    }

    /// One-line JSON written to stderr.
    fn to_json(&self) -> String {
        json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.message(),
        })
        .to_string()
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

impl From<CellError> for Failure {
    fn from(e: CellError) -> Self {
        Failure::Pipeline(e.into())
    }
}

impl From<crate::mesh::MeshError> for Failure {
    fn from(e: crate::mesh::MeshError) -> Self {
        Failure::Pipeline(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Output(e)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("{}", f.to_json());
            f.exit_code()
        }
    }
}

fn execute(command: &Command) -> Result<(), Failure> {
    let io = match command {
        Command::Cell(io)
        | Command::SolveEps(io)
        | Command::SolveHom(io)
        | Command::Study(io)
        | Command::Mscheck(io) => io,
    };
    let config = Config::from_path(&io.config)?;
    fs::create_dir_all(&io.out_dir)?;
    match command {
        Command::Cell(_) => cmd_cell(&config, &io.out_dir),
        Command::SolveEps(_) => cmd_solve_eps(&config, &io.out_dir),
        Command::SolveHom(_) => cmd_solve_hom(&config, &io.out_dir),
        Command::Study(_) => cmd_study(&config, &io.out_dir),
        Command::Mscheck(_) => cmd_mscheck(&config, &io.out_dir),
    }
}

/// Fixed float formatting: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    // `+ 0.0` folds −0 into 0
    format!("{:.16e}", v + 0.0)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Output(e.into()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct CorrectorOut {
    subdivisions: usize,
    period: f64,
    /// Nodal values on the periodic dofs, one column per unit gradient.
    columns: Vec<Vec<f64>>,
    cg_iterations: usize,
}

#[derive(Serialize)]
struct CellOut<'a> {
    anchor: Vec<f64>,
    a_star: &'a SmallMat,
    approximation: &'a Option<crate::cell::Approximation>,
    strategy: MicroStrategy,
    micro_solves: usize,
    micro_energy_gap: f64,
    meso_energy_gap: f64,
    /// Ã at the meso cell centroids.
    a_tilde: &'a [SmallMat],
    chi: Option<CorrectorOut>,
    theta: CorrectorOut,
}

fn cmd_cell(config: &Config, out: &Path) -> Result<(), Failure> {
    let coeff = config.coefficient()?;
    let (lo, hi) = config.domain();
    let anchor = config
        .cell
        .anchor
        .clone()
        .unwrap_or_else(|| lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect());
    if anchor.len() != coeff.dim() {
        return Err(ConfigError::Invalid(PipelineError::Invalid("cell anchor needs one entry per dimension".into())).into());
    }
    let report = homogenized_tensor(&coeff, &anchor, &config.cell.resolutions(), &config.cell.options())?;
    let corrector = |s: &crate::cell::CellSolution| CorrectorOut {
        subdivisions: s.corrector.subdivisions,
        period: s.corrector.period,
        columns: s.corrector.columns.clone(),
        cg_iterations: s.cg_iterations,
    };
    let doc = CellOut {
        anchor,
        a_star: &report.tensor.matrix,
        approximation: &report.tensor.approximation,
        strategy: report.strategy,
        micro_solves: report.micro_solves,
        micro_energy_gap: report.micro_energy_gap,
        meso_energy_gap: report.meso_energy_gap,
        a_tilde: &report.meso_samples,
        chi: report.micro.as_ref().map(corrector),
        theta: corrector(&report.meso),
    };
    write_json(&out.join("cell.json"), &doc)
}

/// Nodal solution table: coordinates, u, active flag.
pub fn solution_csv(mesh: &Mesh, sol: &ObstacleSolution) -> String {
    let mut s = String::new();
    s.push_str(CSV_SCHEMA);
    s.push('\n');
    for d in 0..mesh.dim() {
        let _ = write!(s, "x{},", d + 1);
    }
    s.push_str("u,active\n");
    for v in 0..mesh.n_vertices() {
        for x in mesh.vertex(v) {
            s.push_str(&fmt_f64(*x));
            s.push(',');
        }
        let _ = writeln!(s, "{},{}", fmt_f64(sol.u[v]), u8::from(sol.active[v]));
    }
    s
}

#[derive(Serialize)]
struct KktOut<'a> {
    kkt: &'a KktReport,
    iterations: usize,
    active_volume: f64,
    warnings: &'a [String],
}

fn write_solution(out: &Path, mesh: &Mesh, sol: &ObstacleSolution) -> Result<(), Failure> {
    fs::write(out.join("solution.csv"), solution_csv(mesh, sol))?;
    write_json(
        &out.join("kkt.json"),
        &KktOut {
            kkt: &sol.kkt,
            iterations: sol.iterations,
            active_volume: sol.active_volume(mesh),
            warnings: &sol.warnings,
        },
    )
}

fn cubic_mesh(config: &Config, n: usize) -> Result<Mesh, Failure> {
    let (lo, hi) = config.domain();
    Ok(Mesh::build(&lo, &hi, &vec![n; config.dimension])?)
}

fn cmd_solve_eps(config: &Config, out: &Path) -> Result<(), Failure> {
    let coeff = config.coefficient()?;
    let obstacle = config.obstacle()?;
    let f = config.load()?;
    let e = config.epsilon.as_ref().ok_or(ConfigError::Missing("epsilon"))?;
    let mesh = cubic_mesh(config, e.subdivisions)?;
    let sol = solve_epsilon_vi(&coeff, e.eps, &f, &obstacle, &mesh, &config.solver.method(), e.formulation, e.guard)?;
    for w in &sol.warnings {
        eprintln!("{}", json!({ "warning": w }));
    }
    write_solution(out, &mesh, &sol)
}

fn cmd_solve_hom(config: &Config, out: &Path) -> Result<(), Failure> {
    let coeff = config.coefficient()?;
    let obstacle = config.obstacle()?;
    let f = config.load()?;
    let mesh = cubic_mesh(config, config.macro_mesh.subdivisions)?;
    let (field, _) = build_homogenized_field(&coeff, &mesh, &config.cell.resolutions(), &config.cell.options())?;
    let sol = solve_homogenized_vi(&field, &f, &obstacle, &mesh, &config.solver.method())?;
    write_solution(out, &mesh, &sol)
}

/// Study table with the versioned column set.
pub fn study_csv(report: &StudyReport) -> String {
    let mut s = format!("{CSV_SCHEMA}\neps,h,l2_error,h1_seminorm,active_volume_eps,active_volume_hom,iters,seconds\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.eps),
            fmt_f64(r.h),
            fmt_f64(r.l2_error),
            fmt_f64(r.h1_seminorm),
            fmt_f64(r.active_volume_eps),
            fmt_f64(r.active_volume_hom),
            r.iters,
            fmt_f64(r.seconds),
        );
    }
    s
}

#[derive(Serialize)]
struct StudySummary<'a> {
    complete: bool,
    strictly_decreasing: bool,
    error_floor: f64,
    decreasing_to_floor: bool,
    final_ratio: f64,
    bounded: bool,
    formulation_gap: Option<f64>,
    u0_kkt: &'a Option<KktReport>,
    u0_min_gap: Option<f64>,
    a_star: Vec<&'a SmallMat>,
    micro_solves: usize,
    rows: &'a [crate::pipeline::StudyRow],
    warnings: &'a [String],
}

fn write_study(out: &Path, names: (&str, &str), report: &StudyReport, complete: bool) -> Result<(), Failure> {
    fs::write(out.join(names.0), study_csv(report))?;
    let a_star = if report.homogenized.shared {
        report.homogenized.tensors.iter().take(1).map(|t| &t.matrix).collect()
    } else {
        report.homogenized.tensors.iter().map(|t| &t.matrix).collect()
    };
    write_json(
        &out.join(names.1),
        &StudySummary {
            complete,
            strictly_decreasing: report.strictly_decreasing,
            error_floor: report.error_floor,
            decreasing_to_floor: report.decreasing_to_floor,
            final_ratio: report.final_ratio,
            bounded: report.bounded,
            formulation_gap: report.formulation_gap,
            u0_kkt: &report.u0_kkt,
            u0_min_gap: report.u0_min_gap,
            a_star,
            micro_solves: report.homogenized.micro_solves,
            rows: &report.rows,
            warnings: &report.warnings,
        },
    )
}

fn cmd_study(config: &Config, out: &Path) -> Result<(), Failure> {
    let coeff = config.coefficient()?;
    let obstacle = config.obstacle()?;
    let f = config.load()?;
    let spec = config.study_spec()?;
    let block = config.study.as_ref().ok_or(ConfigError::Missing("study"))?;
    let names = (block.csv.as_str(), block.json.as_str());
    let (lo, hi) = config.domain();
    let method = config.solver.method();
    match convergence_study(&coeff, &f, &obstacle, &lo, &hi, &method, &spec, &config.cell.options()) {
        Ok(report) => {
            write_study(out, names, &report, true)?;
            if report.decreasing_to_floor {
                Ok(())
            } else {
                let errors: Vec<f64> = report.rows.iter().map(|r| r.l2_error).collect();
                Err(Failure::Assertion(format!(
                    "L2 errors are not decreasing (floor {:.3e}): {errors:?}",
                    report.error_floor
                )))
            }
        }
        Err(PipelineError::Study { eps, source, partial }) => {
            write_study(out, names, &partial, false)?;
            Err(PipelineError::Study { eps, source, partial }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_mscheck(config: &Config, out: &Path) -> Result<(), Failure> {
    let spec = config.mscheck_spec()?;
    let csv = &config.mscheck.as_ref().ok_or(ConfigError::Missing("mscheck"))?.csv;
    let (lo, hi) = config.domain();
    let (ay, az) = config.algebras();
    let rows = multiscale_check(&lo, &hi, &spec, &ay, &az)?;
    let mut s = format!("{CSV_SCHEMA}\neps,integral,limit,gap\n");
    for r in &rows {
        let _ = writeln!(s, "{},{},{},{}", fmt_f64(r.eps), fmt_f64(r.integral), fmt_f64(r.limit), fmt_f64(r.gap));
    }
    fs::write(out.join(csv), s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-3.0), "-3.0000000000000000e0");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn exit_codes_by_failure() {
        let schema = Failure::Config(Config::from_json("{").unwrap_err());
        assert_eq!((schema.exit_code(), schema.kind()), (EXIT_CONFIG, "schema"));
        let guard = Failure::Pipeline(PipelineError::Resolution {
            eps: 0.1,
            period: 0.01,
            elements_per_period: 1.0,
            required: 8.0,
        });
        assert_eq!((guard.exit_code(), guard.kind()), (EXIT_CONFIG, "resolution_guard"));
        let solver = Failure::Pipeline(PipelineError::Vi(crate::vi::ViError::Cycling { iterations: 3, last: vec![], previous: vec![1] }));
        assert_eq!(solver.exit_code(), EXIT_SOLVER);
        assert_eq!(Failure::Assertion("x".into()).exit_code(), EXIT_ASSERTION);
        let parsed: serde_json::Value = serde_json::from_str(&schema.to_json()).unwrap();
        assert_eq!(parsed["exit_code"], 2);
    }

    #[test]
    fn missing_subcommand_is_config_error() {
        assert_eq!(run(["homogvi"]), EXIT_CONFIG);
        assert_eq!(run(["homogvi", "cell", "--config", "/nonexistent.json", "--out-dir", "/tmp"]), EXIT_CONFIG);
    }
}
