//! Command-line front end: one subcommand per experiment, CSV output only.
//!
//! Every CSV starts with a `# config: {…}` line holding the resolved
//! configuration as JSON. Output is byte-identical for a given config and
//! seed at any thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bsde::solve_reflected;
use crate::config::{preset_names, preset_source, RunConfig};
use crate::error::{Error, Result};
use crate::estimator::{sweep_surface, sweep_time};
use crate::euler::{auxiliary_boundary_experiment, bessel_vsm_paths, euler_vsm_paths};

#[derive(Debug, Parser)]
#[command(name = "optarb", version, about = "Optimal relative arbitrage in volatility-stabilized markets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// u(T, x) over a mesh of (x1, x2); writes surface.csv.
    Surface(RunArgs),
    /// u(T - t, X(t)) along one trajectory; writes upath.csv.
    Upath(RunArgs),
    /// Boundary hitting of the auxiliary process; writes boundary.csv and trajectories.csv.
    Boundary(RunArgs),
    /// Failure fractions of Euler and Bessel paths; writes euler_compare.csv.
    EulerCompare(RunArgs),
    /// Regression BSDE with penalization ladder; writes bsde.csv and k_trace.csv.
    Bsde(RunArgs),
    /// Lists bundled presets, or prints one.
    Presets { name: Option<String> },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled preset (see `optarb presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl RunArgs {
    pub fn load(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let src = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                RunConfig::from_toml(&src)?
            }
            (None, Some(name)) => RunConfig::from_preset(name)?,
            (None, None) => return Err(Error::Config("either --config or --preset is required".into())),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

/// Process exit code for an error: 2 configuration, 3 numerical, 1 I/O.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Domain { .. } => 2,
        Error::Io(_) => 1,
        Error::SingularMatrix { .. }
        | Error::BudgetExceeded { .. }
        | Error::RegressionIllConditioned { .. }
        | Error::PartialFailure { .. }
        | Error::NonFinite { .. } => 3,
    }
}

#[derive(Serialize)]
struct Header<'a> {
    command: &'a str,
    #[serde(flatten)]
    config: &'a RunConfig,
}

struct Csv {
    preamble: String,
    writer: csv::Writer<Vec<u8>>,
    footer: String,
}

impl Csv {
    fn new(command: &str, cfg: &RunConfig, header: &str) -> Self {
        let json = serde_json::to_string(&Header { command, config: cfg }).expect("config is serializable");
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header.split(',')).expect("in-memory write");
        Csv {
            preamble: format!("# config: {json}\n"),
            writer,
            footer: String::new(),
        }
    }

    fn row(&mut self, fields: &[String]) {
        self.writer.write_record(fields).expect("in-memory write");
    }

    fn comment(&mut self, text: &str) {
        let _ = writeln!(self.footer, "# {text}");
    }

    fn write(self, dir: &Path, name: &str) -> Result<PathBuf> {
        let body = self
            .writer
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))?;
        let mut bytes = self.preamble.into_bytes();
        bytes.extend(body);
        bytes.extend(self.footer.into_bytes());
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        Ok(path)
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Runs one command and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let args = match &cli.command {
        Command::Presets { name } => {
            match name {
                Some(n) => print!("{}", preset_source(n)?),
                None => preset_names().for_each(|n| println!("{n}")),
            }
            return Ok(Vec::new());
        }
        Command::Surface(a)
        | Command::Upath(a)
        | Command::Boundary(a)
        | Command::EulerCompare(a)
        | Command::Bsde(a) => a,
    };
    let cfg = args.load()?;
    fs::create_dir_all(&args.out)?;
    let job = || dispatch(&cli.command, &cfg, &args.out);
    match args.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

fn dispatch(command: &Command, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    match command {
        Command::Surface(_) => cmd_surface(cfg, out),
        Command::Upath(_) => cmd_upath(cfg, out),
        Command::Boundary(_) => cmd_boundary(cfg, out),
        Command::EulerCompare(_) => cmd_euler_compare(cfg, out),
        Command::Bsde(_) => cmd_bsde(cfg, out),
        Command::Presets { .. } => Ok(Vec::new()),
    }
}

pub fn cmd_surface(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let vsm = cfg.vsm()?;
    let sim = cfg.sim()?;
    let surface = sweep_surface(&vsm, &cfg.mesh()?, &cfg.fixed_coords, &sim)?;
    let mut csv = Csv::new("surface", cfg, "x1,x2,u,std_err,n_paths,seed");
    for node in &surface.nodes {
        let (u, se) = node
            .estimate
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |e| (e.mean, e.std_error));
        csv.row(&[num(node.x1), num(node.x2), num(u), num(se), sim.n_paths.to_string(), node.seed.to_string()]);
    }
    let path = csv.write(out, "surface.csv")?;
    let failed = surface.failures();
    if failed > 0 {
        let first = surface.nodes.iter().find_map(|n| n.failure.clone()).unwrap_or_default();
        return Err(Error::PartialFailure {
            failed,
            total: surface.nodes.len(),
            first,
        });
    }
    Ok(vec![path])
}

pub fn cmd_upath(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let vsm = cfg.vsm()?;
    let sim = cfg.sim()?;
    let path = sweep_time(&vsm, &sim, cfg.driving_seed.unwrap_or(cfg.seed))?;
    let mut csv = Csv::new("upath", cfg, "t,u,std_err");
    for (t, e) in path.times.iter().zip(&path.estimates) {
        csv.row(&[num(*t), num(e.mean), num(e.std_error)]);
    }
    Ok(vec![csv.write(out, "upath.csv")?])
}

pub fn cmd_boundary(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let bc = cfg.boundary()?;
    let report = auxiliary_boundary_experiment(&bc)?;
    let mut csv = Csv::new("boundary", cfg, "path_id,hit,hit_time");
    for (id, hit) in report.hit_times.iter().enumerate() {
        csv.row(&[id.to_string(), hit.is_some().to_string(), hit.map(num).unwrap_or_default()]);
    }
    let (lo, hi) = report.ci(0.99);
    csv.comment(&format!(
        "fraction_hit={},std_error={},ci99_lo={},ci99_hi={}",
        report.fraction_hit, report.std_error, lo, hi
    ));
    let coords: Vec<String> = (1..=bc.x0.len()).map(|i| format!("z{i}")).collect();
    let mut traj = Csv::new("boundary", cfg, &format!("path_id,hit,t,{}", coords.join(",")));
    for (id, states) in report.trajectories.iter().enumerate() {
        let hit = report.hit_times[id].is_some().to_string();
        for (k, z) in states.iter().enumerate() {
            let mut row = vec![id.to_string(), hit.clone(), num(k as f64 * bc.dt)];
            row.extend(z.iter().map(|v| num(*v)));
            traj.row(&row);
        }
    }
    Ok(vec![csv.write(out, "boundary.csv")?, traj.write(out, "trajectories.csv")?])
}

pub fn cmd_euler_compare(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let vsm = cfg.vsm()?;
    let sim = cfg.sim()?;
    let (_, euler) = euler_vsm_paths(&vsm, &sim, cfg.eps_pos)?;
    let (_, bessel) = bessel_vsm_paths(&vsm, &sim, cfg.eps_pos)?;
    let mut csv = Csv::new("euler-compare", cfg, "method,fail_fraction,n_paths");
    csv.row(&["euler".into(), num(euler.fail_fraction), euler.n_paths.to_string()]);
    csv.row(&["bessel".into(), num(bessel.fail_fraction), bessel.n_paths.to_string()]);
    Ok(vec![csv.write(out, "euler_compare.csv")?])
}

pub fn cmd_bsde(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let vsm = cfg.vsm()?;
    let bc = cfg.bsde()?;
    let ladder = solve_reflected(&vsm, cfg.horizon, &cfg.x0, &bc)?;
    if let Some(w) = &ladder.warning {
        eprintln!("warning: non-monotone penalization ladder: {w}");
    }
    let mut csv = Csv::new("bsde", cfg, "lambda,y0,std_err");
    let mut trace = Csv::new("bsde", cfg, "lambda,step,t,k");
    let dt = cfg.horizon / bc.n_time_steps as f64;
    for rung in &ladder.rungs {
        csv.row(&[num(rung.lambda), num(rung.y0), num(rung.y0_se)]);
        for (j, k) in rung.k_trace.iter().enumerate() {
            trace.row(&[num(rung.lambda), j.to_string(), num(j as f64 * dt), num(*k)]);
        }
    }
    Ok(vec![csv.write(out, "bsde.csv")?, trace.write(out, "k_trace.csv")?])
}
