//! `tempsync` command line. Exit codes: 0 on success, 2 when a certificate or
//! scenario predicate fails (its report is still written), 1 on usage and IO
//! errors.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use tempsync_core::{
    check_cluster_sync, check_full_sync, coupled_comparison_check, pullback_trajectory, static_hypothesis,
    static_threshold, suggest_bound_m, CertError, CertParams, ClusterSpec, CoupledRhs, NetworkSystem,
    SolverConfig, WindowGrid,
};

use crate::config::{RunConfig, ThresholdConfig};
use crate::io::{self, certificate_json, cluster_certificate_json, h2_witness_json};
use crate::scenarios::{self, estimate_rho, Metrics, RunReport};

#[derive(Debug, Parser)]
#[command(name = "tempsync", version, about = "Synchronization certificates for temporal networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "t-end", global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Global coupling strength.
    #[arg(long, global = true)]
    pub c: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long = "bound-M", global = true)]
    pub bound_m: Option<f64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "SYNC_TOOLKIT_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a network and write trajectory and error CSVs.
    Simulate,
    /// Certificate of synchronization up to a constant for the whole network.
    Certify,
    /// Certificate for a cluster of nodes.
    ClusterCertify {
        /// 1-based node indices, comma separated (overrides the config).
        #[arg(long, value_delimiter = ',')]
        cluster: Option<Vec<usize>>,
    },
    /// Coupling threshold of a static network with identical nodes.
    Threshold,
    /// Run one of the example networks.
    Scenario {
        name: ScenarioName,
        /// Number of consecutive seeds to run, starting at `--seed`.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Coupled comparison check and pullback estimate.
    PullbackCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioName {
    Vdp,
    Ring,
    Fhn,
    LorenzStar,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    if let Some(w) = cli.workers {
        if w == 0 {
            bail!("--workers must be positive");
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match &cli.command {
        Command::Simulate => simulate(cli),
        Command::Certify => certify(cli, None),
        Command::ClusterCertify { cluster } => certify(cli, Some(cluster.clone())),
        Command::Threshold => threshold(cli),
        Command::Scenario { name, seeds } => scenario(cli, *name, *seeds),
        Command::PullbackCheck => pullback(cli),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| anyhow!("this command needs --config <file>"))?;
    let mut cfg: RunConfig = io::read_json(path)?;
    if let Some(t) = cli.t_end {
        cfg.t_end = t;
    }
    if let Some(dt) = cli.dt {
        cfg.dt = dt;
    }
    if let Some(c) = cli.c {
        cfg.c = c;
    }
    if let Some(e) = cli.epsilon {
        cfg.epsilon = e;
    }
    if cli.bound_m.is_some() {
        cfg.bound_m = cli.bound_m;
    }
    Ok(cfg)
}

fn initial_state(cfg: &RunConfig, dim: usize, seed: u64) -> Result<Vec<f64>> {
    match &cfg.x0 {
        Some(x) if x.len() == dim => Ok(x.clone()),
        Some(x) => bail!("x0 has {} entries, the network state has {dim}", x.len()),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..dim).map(|_| rng.gen_range(-cfg.x0_scale..cfg.x0_scale)).collect())
        }
    }
}

fn solver(cfg: &RunConfig) -> SolverConfig {
    let stride = (cfg.record_every / cfg.dt).round().max(1.0) as usize;
    SolverConfig::rk4(cfg.dt).with_stride(stride)
}

struct Simulated {
    system: NetworkSystem,
    report: RunReport,
}

fn run_network(cli: &Cli, cfg: &RunConfig, name: &str) -> Result<Simulated> {
    let system = cfg.network.build(cfg.c)?;
    let x0 = initial_state(cfg, system.dim(), cli.seed)?;
    let traj = tempsync_core::integrate(&system, 0.0, &x0, cfg.t_end, &solver(cfg))?;
    let errors = tempsync_core::pairwise_errors(&traj);
    let metrics = Metrics::from_errors(&errors, cfg.tail_fraction, cfg.epsilon);
    let report = RunReport {
        scenario: name.into(),
        seed: cli.seed,
        params: serde_json::to_value(cfg)?,
        metrics,
        predicate: scenarios::Predicate {
            name: "integration completed".into(),
            passed: true,
        },
        details: Value::Null,
        certificate: None,
        paths: Default::default(),
        trajectory: traj,
        errors,
    };
    Ok(Simulated { system, report })
}

fn simulate(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    let mut sim = run_network(cli, &cfg, "simulate")?;
    sim.report.write_outputs(&cli.out)?;
    println!("wrote {}", cli.out.display());
    Ok(0)
}

fn certify(cli: &Cli, cluster_arg: Option<Option<Vec<usize>>>) -> Result<i32> {
    let cfg = load_config(cli)?;
    let mut sim = run_network(cli, &cfg, if cluster_arg.is_some() { "cluster-certify" } else { "certify" })?;
    let rho = cfg.rho.unwrap_or_else(|| estimate_rho(&sim.report.trajectory));
    let bounds = cfg.network.bounds(rho)?;
    let grid = WindowGrid::new(0.0, cfg.t_end, cfg.grid_step);
    let n = sim.system.n_nodes();
    let probe = |m: f64| CertParams::new(grid, m, cfg.epsilon);

    let (cert_json, passes) = match cluster_arg {
        None => {
            let m = match cfg.bound_m {
                Some(m) => m,
                None => {
                    let p = check_full_sync(&sim.system, &bounds, &probe(f64::MAX))?;
                    suggest_bound_m(p.mu1, p.gamma_bar.max(1e-9))
                }
            };
            let cert = check_full_sync(&sim.system, &bounds, &probe(m))?;
            (certificate_json(&cert), cert.verdict.passes())
        }
        Some(arg) => {
            let idx = arg
                .or_else(|| cfg.cluster.clone())
                .ok_or_else(|| anyhow!("cluster-certify needs --cluster or a \"cluster\" entry in the config"))?;
            if idx.iter().any(|&i| i == 0 || i > n) {
                bail!("cluster indices are 1-based and must lie in 1..={n}");
            }
            let spec = ClusterSpec::new(idx.iter().map(|i| i - 1).collect(), n)?;
            let m = match cfg.bound_m {
                Some(m) => m,
                None => {
                    let p = check_cluster_sync(&sim.system, &bounds, &spec, &probe(f64::MAX))?;
                    suggest_bound_m(p.combined_mu, p.gamma_bar_j.max(1e-9))
                }
            };
            let cert = check_cluster_sync(&sim.system, &bounds, &spec, &probe(m))?;
            (cluster_certificate_json(&cert), cert.verdict.passes())
        }
    };
    println!("verdict: {}", cert_json["verdict"].as_str().unwrap_or("?"));
    sim.report.predicate = scenarios::Predicate {
        name: "certificate verdict passes".into(),
        passed: passes,
    };
    sim.report.details = json!({ "rho": rho });
    sim.report.certificate = Some(cert_json);
    sim.report.write_outputs(&cli.out)?;
    Ok(if passes { 0 } else { 2 })
}

fn threshold(cli: &Cli) -> Result<i32> {
    let path = cli.config.as_ref().ok_or_else(|| anyhow!("threshold needs --config <file>"))?;
    let cfg: ThresholdConfig = io::read_json(path)?;
    let a = cfg
        .matrix()
        .ok_or_else(|| anyhow!("{}: \"A\" must be a rectangular matrix", path.display()))?;
    let hypothesis: Vec<Value> = static_hypothesis(&a)
        .into_iter()
        .map(|((i, j), h)| json!({ "pair": [i + 1, j + 1], "value": h }))
        .collect();
    let (doc, code) = match static_threshold(&a, cfg.l_rho) {
        Ok(c) => {
            println!("c_bar = {c}");
            (json!({ "feasible": true, "c_bar": c, "l_rho": cfg.l_rho, "hypothesis": hypothesis }), 0)
        }
        Err(CertError::Infeasible { pair, value }) => {
            println!("infeasible: pair ({}, {}) has value {value}", pair.0 + 1, pair.1 + 1);
            (
                json!({
                    "feasible": false,
                    "c_bar": null,
                    "failing_pair": [pair.0 + 1, pair.1 + 1],
                    "l_rho": cfg.l_rho,
                    "hypothesis": hypothesis,
                }),
                2,
            )
        }
        Err(e) => return Err(e).with_context(|| path.display().to_string()),
    };
    io::write_json(&cli.out.join("threshold.json"), &doc)?;
    Ok(code)
}

fn scenario_params<T: serde::de::DeserializeOwned + Default>(cli: &Cli) -> Result<T> {
    match &cli.config {
        Some(p) => Ok(io::read_json(p)?),
        None => Ok(T::default()),
    }
}

fn run_one(cli: &Cli, name: ScenarioName, seed: u64) -> Result<RunReport> {
    let r = match name {
        ScenarioName::Vdp => {
            let mut p: scenarios::VdpParams = scenario_params(cli)?;
            p.seed = seed;
            if let Some(t) = cli.t_end {
                p.horizon = t;
            }
            if let Some(dt) = cli.dt {
                p.dt = dt;
            }
            if let Some(c) = cli.c {
                p.c = c;
            }
            scenarios::run_vdp(&p)?
        }
        ScenarioName::Ring => {
            let mut p: scenarios::RingParams = scenario_params(cli)?;
            p.seed = seed;
            if let Some(t) = cli.t_end {
                p.horizon = t;
            }
            if let Some(dt) = cli.dt {
                p.dt = dt;
            }
            scenarios::run_ring_contrarian(&p)?
        }
        ScenarioName::Fhn => {
            let mut p: scenarios::FhnParams = scenario_params(cli)?;
            p.seed = seed;
            if let Some(t) = cli.t_end {
                p.horizon = t;
            }
            if let Some(dt) = cli.dt {
                p.dt = dt;
            }
            scenarios::run_fhn_clusters(&p)?
        }
        ScenarioName::LorenzStar => {
            let mut p: scenarios::LorenzStarParams = scenario_params(cli)?;
            p.seed = seed;
            if let Some(t) = cli.t_end {
                p.horizon = t;
            }
            if let Some(dt) = cli.dt {
                p.dt = dt;
            }
            if let Some(c) = cli.c {
                p.c = c;
            }
            scenarios::run_lorenz_star(&p)?
        }
    };
    Ok(r)
}

fn scenario(cli: &Cli, name: ScenarioName, seeds: u64) -> Result<i32> {
    if seeds == 0 {
        bail!("--seeds must be positive");
    }
    let dir_for = |seed: u64| -> PathBuf {
        if seeds == 1 {
            cli.out.clone()
        } else {
            cli.out.join(format!("seed_{seed}"))
        }
    };
    let results: Vec<Result<bool>> = (cli.seed..cli.seed + seeds)
        .into_par_iter()
        .map(|seed| {
            let mut r = run_one(cli, name, seed)?;
            r.write_outputs(&dir_for(seed))?;
            println!(
                "seed {seed}: {} ({})",
                if r.predicate.passed { "passed" } else { "failed" },
                r.predicate.name
            );
            Ok(r.predicate.passed)
        })
        .collect();
    let mut all = true;
    for r in results {
        all &= r?;
    }
    Ok(if all { 0 } else { 2 })
}

fn pullback(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    let system = cfg.network.build(cfg.c)?;
    let node = cfg.network.node();
    let x0 = initial_state(&cfg, system.dim(), cli.seed)?;
    let rho = cfg.rho.unwrap_or(1.0);
    let l = move |_: f64| node.rate(rho);
    let rates: Vec<&dyn Fn(f64) -> f64> = (0..system.n_nodes()).map(|_| &l as &dyn Fn(f64) -> f64).collect();
    let grid = WindowGrid::new(0.0, cfg.t_end, cfg.grid_step).coarse_times();
    let w = coupled_comparison_check(&system, &rates, &grid)?;
    let witness = h2_witness_json(&w, (0.0, cfg.t_end));
    io::write_json(&cli.out.join("h2_witness.json"), &witness)?;

    let t = cfg.pullback_time.unwrap_or(cfg.t_end);
    let mut rhs = CoupledRhs::new(&system);
    let est = pullback_trajectory(
        |s, x, o| {
            // a non-finite state shows up in the gap and the converged flag
            if rhs.eval(s, x, o).is_err() {
                o.fill(f64::NAN);
            }
        },
        t,
        cfg.s_max,
        &x0,
        &solver(&cfg),
    )?;
    let doc = json!({
        "witness": witness,
        "pullback": {
            "t": t,
            "state": est.state,
            "gap": est.gap,
            "depth": est.depth,
            "converged": est.converged,
        },
    });
    write_report(&cli.out, &doc)?;
    println!("H2 witness: {}", if w.verdict { "holds" } else { "fails" });
    Ok(if w.verdict { 0 } else { 2 })
}

fn write_report(dir: &Path, doc: &Value) -> Result<()> {
    io::write_json(&dir.join("report.json"), doc)?;
    Ok(())
}
