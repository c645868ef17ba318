use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tsp::domains::DomainShape;
use tsp::estimators::{harmonic_measure, mean_exit_time, TargetSet};
use tsp::kernels::{
    char_exponent_psi, compute_r0, constant_a, constant_b, expected_exit_time_ball, green_constant, poisson_constant,
    r0_quadrature, stable_green_ball, stable_poisson_ball, ProcessParams,
};
use tsp::quadrature::QuadratureConfig;
use tsp::simulator::{batch_reduce, Engine, SimConfig};
use tsp::verify::{run_scenario, write_atomic, Experiment, Report, Scenario};
use tsp::{Error, Result};

#[derive(Parser)]
#[command(name = "tsp", version, about = "Truncated stable processes: kernels, simulation and checks")]
struct Cli {
    /// Seed for every random stream (overrides scenario seeds).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Deterministic kernel evaluations as CSV rows.
    Kernels {
        #[command(subcommand)]
        which: KernelCmd,
    },
    /// Exit records of individual paths.
    Simulate(SimArgs),
    /// Monte Carlo estimates with standard errors.
    Estimate {
        #[command(subcommand)]
        which: EstimateCmd,
    },
    /// Run the shipped scenario of a named experiment.
    Verify {
        experiment: String,
        /// Override the number of paths.
        #[arg(long)]
        n: Option<u64>,
    },
    /// Run a scenario file.
    Run { path: PathBuf },
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<ProcessParams> {
        ProcessParams::new(self.d, self.alpha)
    }
}

#[derive(Subcommand)]
enum KernelCmd {
    /// Characteristic exponent at `|ξ| = xi`.
    Psi {
        #[command(flatten)]
        p: ParamArgs,
        #[arg(long, allow_negative_numbers = true)]
        xi: f64,
    },
    /// Poisson kernel of `B(0, radius)`.
    Poisson {
        #[command(flatten)]
        p: ParamArgs,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        z: Vec<f64>,
    },
    /// Green function of `B(0, radius)`.
    Green {
        #[command(flatten)]
        p: ParamArgs,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        y: Vec<f64>,
    },
    /// Mean exit time of `B(0, radius)` by quadrature of the Green function.
    ExitTime {
        #[command(flatten)]
        p: ParamArgs,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    /// Radius `r0` of the Green function comparison.
    R0 {
        #[command(flatten)]
        p: ParamArgs,
    },
    /// The constants A, B, the Poisson constant and the Green constant.
    Constants {
        #[command(flatten)]
        p: ParamArgs,
    },
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    p: ParamArgs,
    /// Domain as JSON, e.g. '{"type":"ball","center":[0,0],"radius":0.1}'.
    #[arg(long)]
    domain: String,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    start: Vec<f64>,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    h: f64,
    #[arg(long, default_value_t = 10)]
    paths: u64,
    /// Shrink Gaussian steps near the boundary.
    #[arg(long)]
    refine: bool,
}

#[derive(Subcommand)]
enum EstimateCmd {
    /// `E_x τ_D`.
    ExitTime(SimArgs),
    /// `P_x(Y_τ ∈ target)`.
    Harmonic {
        #[command(flatten)]
        sim: SimArgs,
        /// Target set as JSON, e.g. '{"type":"annulus","center":[0,0],"r_inner":0.5,"r_outer":1}'.
        #[arg(long)]
        target: String,
    },
}

fn parse_json<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Config(format!("{what}: {e}")))
}

fn sim_setup(a: &SimArgs, seed: u64) -> Result<(ProcessParams, DomainShape, SimConfig)> {
    let p = a.p.params()?;
    let dom: DomainShape = parse_json("domain", &a.domain)?;
    dom.validate()?;
    let mut cfg = SimConfig::new(a.epsilon, a.h, seed)?;
    cfg.boundary_refine = a.refine;
    Ok((p, dom, cfg))
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, body.as_bytes()),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn kernels(which: &KernelCmd) -> Result<String> {
    let q = QuadratureConfig::default();
    Ok(match which {
        KernelCmd::Psi { p, xi } => {
            let pp = p.params()?;
            let v = char_exponent_psi(&pp, *xi, &q)?;
            format!("d,alpha,xi,value,est_error\n{},{},{},{:e},{:e}\n", p.d, p.alpha, xi, v.value, v.est_error)
        }
        KernelCmd::Poisson { p, radius, x, z } => {
            let pp = p.params()?;
            let v = stable_poisson_ball(&pp, &vec![0.0; pp.d], *radius, x, z)?;
            format!("d,alpha,radius,value\n{},{},{},{:e}\n", p.d, p.alpha, radius, v)
        }
        KernelCmd::Green { p, radius, x, y } => {
            let pp = p.params()?;
            let v = stable_green_ball(&pp, &vec![0.0; pp.d], *radius, x, y)?;
            format!("d,alpha,radius,value,est_error\n{},{},{},{:e},{:e}\n", p.d, p.alpha, radius, v.value, v.est_error)
        }
        KernelCmd::ExitTime { p, radius, x } => {
            let pp = p.params()?;
            let v = expected_exit_time_ball(&pp, *radius, x, &q)?;
            format!("d,alpha,radius,value,est_error\n{},{},{},{:e},{:e}\n", p.d, p.alpha, radius, v.value, v.est_error)
        }
        KernelCmd::R0 { p } => {
            let pp = p.params()?;
            let v = compute_r0(&pp, &r0_quadrature())?;
            format!("d,alpha,r0\n{},{},{}\n", p.d, p.alpha, v)
        }
        KernelCmd::Constants { p } => {
            let pp = p.params()?;
            format!(
                "d,alpha,A,B,poisson_constant,green_constant\n{},{},{:e},{:e},{:e},{:e}\n",
                p.d,
                p.alpha,
                constant_a(&pp),
                constant_b(&pp),
                poisson_constant(&pp),
                green_constant(&pp)
            )
        }
    })
}

fn simulate(a: &SimArgs, seed: u64) -> Result<String> {
    let (p, dom, cfg) = sim_setup(a, seed)?;
    if !dom.contains(&a.start)? {
        return Err(Error::PointNotInterior);
    }
    let eng = Engine::new(&p, &cfg)?;
    let rows = batch_reduce(
        seed,
        a.paths,
        Vec::new,
        |acc: &mut Vec<(u64, tsp::simulator::ExitRecord)>, i, rng| {
            acc.push((i, eng.run(&dom, &a.start, rng, |_, _| {})));
        },
        |a, b| a.extend(b),
    );
    let coords: Vec<String> = (0..p.d).map(|i| format!("exit_{i}")).collect();
    let mut s = format!("path,{},exit_time,by_jump,censored\n", coords.join(","));
    for (i, r) in rows {
        let xs: Vec<String> = r.exit_position.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&format!("{i},{},{:e},{},{}\n", xs.join(","), r.exit_time, r.by_jump, r.censored));
    }
    Ok(s)
}

fn estimate(which: &EstimateCmd, seed: u64, n: u64) -> Result<String> {
    let header = "quantity,mean,stderr,n,censored_fraction\n";
    let (name, e) = match which {
        EstimateCmd::ExitTime(a) => {
            let (p, dom, cfg) = sim_setup(a, seed)?;
            ("exit_time", mean_exit_time(&p, &dom, &a.start, n.max(a.paths), &cfg)?)
        }
        EstimateCmd::Harmonic { sim, target } => {
            let (p, dom, cfg) = sim_setup(sim, seed)?;
            let t: TargetSet = parse_json("target", target)?;
            ("harmonic_measure", harmonic_measure(&p, &dom, &sim.start, &t, n.max(sim.paths), &cfg)?)
        }
    };
    Ok(format!("{header}{name},{:e},{:e},{},{}\n", e.mean, e.stderr, e.n, e.censored_fraction))
}

fn summary(r: &Report) -> String {
    let mut s = String::new();
    for c in r.failures() {
        s.push_str(&format!("FAIL {} lhs={:e} rhs={:e} tol={:e}\n", c.check_id, c.lhs, c.rhs, c.tolerance));
    }
    for n in &r.notes {
        s.push_str(&format!("note: {n}\n"));
    }
    let failed = r.failures().count();
    s.push_str(&format!(
        "{} {}: {}/{} checks passed in {:.1} s\n",
        if r.passed { "PASS" } else { "FAIL" },
        r.scenario.name.as_str(),
        r.checks.len() - failed,
        r.checks.len(),
        r.wall_time
    ));
    s
}

fn report(cli: &Cli, sc: Scenario) -> Result<ExitCode> {
    let r = run_scenario(&sc, cli.seed)?;
    let csv = cli.format == Some(Format::Csv);
    match &cli.out {
        Some(path) => {
            r.write_atomic(path, csv)?;
            eprint!("{}", summary(&r));
        }
        None if cli.format.is_some() => print!("{}", if csv { r.to_csv() } else { r.to_json() }),
        None => print!("{}", summary(&r)),
    }
    Ok(if r.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("threads: {e}")))?;
    }
    let seed = cli.seed.unwrap_or(0);
    match &cli.cmd {
        Cmd::Kernels { which } => emit(&cli.out, &kernels(which)?)?,
        Cmd::Simulate(a) => emit(&cli.out, &simulate(a, seed)?)?,
        Cmd::Estimate { which } => emit(&cli.out, &estimate(which, seed, 0)?)?,
        Cmd::Verify { experiment, n } => {
            let mut sc = Experiment::parse(experiment)?.default_scenario()?;
            if let Some(n) = n {
                sc.estimate.n = *n;
            }
            return report(cli, sc);
        }
        Cmd::Run { path } => return report(cli, Scenario::from_path(path)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
