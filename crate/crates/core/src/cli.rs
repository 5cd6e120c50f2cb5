//! Command-line driver.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::acceptance;
use crate::analysis::suites::run_all;
use crate::config::{OutputFormat, RunConfig};
use crate::error::{Result, SdfemError};
use crate::experiment::{solve_case, sweep};
use crate::mesh::{build_mesh, MeshParams, Subdomain};
use crate::problem::problem_by_name;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "sdfem",
    version,
    about = "Streamline-diffusion FEM on Shishkin triangular meshes"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Replace the N list with a single value.
    #[arg(long = "N", global = true)]
    pub n: Option<usize>,
    /// Replace the epsilon list with a single value.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Stabilisation constant; negative values are accepted for adversarial runs.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub cstar: Option<f64>,
    /// GMRES relative residual tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Enable or disable postprocessing.
    #[arg(long, global = true)]
    pub post: Option<bool>,
    /// Output directory (stdout if absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_format)]
    pub format: Option<OutputFormat>,
    /// Worker threads (1 = serial).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a single (N, epsilon) case and write the nodal solution.
    Solve {
        /// Write the system matrix in MatrixMarket format.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
    /// Convergence sweep over the configured N and epsilon lists.
    Converge,
    /// Run the numerical property suites.
    Verify {
        /// Print the details of passing suites too.
        #[arg(long)]
        verbose: bool,
    },
    /// Evaluate the acceptance criteria.
    Accept,
    /// Print mesh nodes and subdomain areas.
    Mesh,
}

fn parse_format(s: &str) -> std::result::Result<OutputFormat, String> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "markdown" | "md" => Ok(OutputFormat::Markdown),
        "both" => Ok(OutputFormat::Both),
        other => Err(format!("unknown format '{other}' (csv, markdown, both)")),
    }
}

impl Overrides {
    pub fn apply(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(n) = self.n {
            cfg.ns = vec![n];
        }
        if let Some(e) = self.eps {
            cfg.epsilons = vec![e];
        }
        if let Some(c) = self.cstar {
            cfg.c_star = c;
        }
        if let Some(t) = self.tol {
            cfg.solver.tol = t;
        }
        if let Some(p) = self.post {
            cfg.enable_postprocess = p;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        Ok(cfg)
    }
}

pub fn exit_code(err: &SdfemError) -> i32 {
    match err {
        SdfemError::Config(_) | SdfemError::Parse(_) | SdfemError::Json(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

fn emit(cfg: &RunConfig, name: &str, contents: &str) -> Result<()> {
    match &cfg.output {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, contents)?;
            log::info!("wrote {}", path.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())?;
        }
    }
    Ok(())
}

fn install_thread_pool(threads: usize) {
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::warn!("could not configure {threads} threads: {e}");
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let mut cfg = cli.overrides.apply()?;
    install_thread_pool(cfg.threads);
    match cli.command {
        Command::Solve { dump_matrix } => {
            // A single solve never postprocesses.
            cfg.enable_postprocess = false;
            cfg.validate()?;
            cmd_solve(&cfg, dump_matrix.as_deref())
        }
        Command::Converge => {
            cfg.validate()?;
            cfg.validate_doubling()?;
            cmd_converge(&cfg)
        }
        Command::Verify { verbose } => {
            cfg.validate()?;
            cmd_verify(&cfg, verbose)
        }
        Command::Accept => {
            cfg.validate()?;
            cmd_accept(&cfg)
        }
        Command::Mesh => {
            cfg.enable_postprocess = false;
            cfg.validate()?;
            cmd_mesh(&cfg)
        }
    }
}

fn single_case(cfg: &RunConfig) -> Result<(usize, f64)> {
    match (cfg.ns.as_slice(), cfg.epsilons.as_slice()) {
        ([n], [e]) => Ok((*n, *e)),
        _ => Err(SdfemError::Config(
            "this command needs exactly one N and one epsilon (use --N and --eps)".into(),
        )),
    }
}

pub fn cmd_solve(cfg: &RunConfig, dump_matrix: Option<&Path>) -> Result<i32> {
    let (n, eps) = single_case(cfg)?;
    let solved = solve_case(n, eps, &cfg.case_settings())?;
    if let Some(path) = dump_matrix {
        let file = fs::File::create(path)?;
        solved
            .system
            .matrix
            .write_matrix_market(std::io::BufWriter::new(file))?;
    }
    let converged = solved.stats.converged;
    let mut values = String::new();
    if !converged {
        values.push_str("# WARNING: GMRES did not converge; values are the best iterate\n");
    }
    values.push_str("node,x,y,value\n");
    for (id, v) in solved.solution.values.iter().enumerate() {
        let [x, y] = solved.mesh.node_coords(id);
        values.push_str(&format!("{id},{x:e},{y:e},{v:e}\n"));
    }
    let stats = serde_json::to_string_pretty(&solved.stats)?;
    if cfg.output.is_some() {
        emit(cfg, "solution.csv", &values)?;
        emit(cfg, "stats.json", &format!("{stats}\n"))?;
    } else {
        emit(cfg, "", &values)?;
        eprintln!("{stats}");
    }
    Ok(if converged { EXIT_OK } else { EXIT_SOLVER })
}

pub fn cmd_converge(cfg: &RunConfig) -> Result<i32> {
    let report = sweep(
        &cfg.ns,
        &cfg.epsilons,
        &cfg.case_settings(),
        cfg.threads != 1,
    )?;
    if matches!(cfg.format, OutputFormat::Csv | OutputFormat::Both) {
        emit(cfg, "report.csv", &report.to_csv())?;
    }
    if matches!(cfg.format, OutputFormat::Markdown | OutputFormat::Both) {
        emit(cfg, "report.md", &report.to_markdown())?;
    }
    let failures = report.failures();
    for f in &failures {
        eprintln!(
            "N = {}, epsilon = {:e}: {}",
            f.n,
            f.epsilon,
            f.error.as_deref().unwrap_or("GMRES did not converge")
        );
    }
    Ok(if failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_SOLVER
    })
}

pub fn cmd_verify(cfg: &RunConfig, verbose: bool) -> Result<i32> {
    let report = run_all(&cfg.verify_settings())?;
    let text = report.render(verbose);
    emit(cfg, "verify.txt", &text)?;
    if cfg.output.is_some() {
        print!("{text}");
    }
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_VERIFY
    })
}

pub fn cmd_accept(cfg: &RunConfig) -> Result<i32> {
    let start = Instant::now();
    let outcome = acceptance::run(cfg)?;
    let elapsed = start.elapsed();
    let mut text = outcome.render();
    let runtime = acceptance::runtime_criterion(elapsed, &outcome);
    text.push_str(&runtime.line());
    text.push('\n');
    emit(cfg, "acceptance.txt", &text)?;
    if cfg.output.is_some() {
        print!("{text}");
        emit(cfg, "acceptance.csv", &outcome.report.to_csv())?;
    }
    Ok(if outcome.passed() && runtime.passed {
        EXIT_OK
    } else {
        EXIT_VERIFY
    })
}

pub fn cmd_mesh(cfg: &RunConfig) -> Result<i32> {
    let (n, eps) = single_case(cfg)?;
    let problem = problem_by_name(&cfg.problem, eps)?;
    let mesh = build_mesh(&MeshParams::with_rho(
        n,
        eps,
        problem.beta1,
        problem.beta2,
        cfg.rho,
    )?)?;
    let mut text = format!(
        "# N={n} epsilon={eps:e} lambda_x={:e} lambda_y={:e}\n",
        mesh.lambda_x, mesh.lambda_y
    );
    for s in Subdomain::ALL {
        text.push_str(&format!(
            "# area {} = {:e}\n",
            s.name(),
            mesh.subdomain_area(s)
        ));
    }
    text.push_str("node,i,j,x,y,boundary\n");
    for id in 0..mesh.num_nodes() {
        let (i, j) = mesh.node_indices(id);
        let [x, y] = mesh.node_coords(id);
        text.push_str(&format!(
            "{id},{i},{j},{x:e},{y:e},{}\n",
            mesh.is_boundary_node(id) as u8
        ));
    }
    emit(cfg, "mesh.csv", &text)?;
    Ok(EXIT_OK)
}
