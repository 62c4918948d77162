//! Command-line front end: generate networks, simulate oscillators, infer
//! wiring, run sweeps and render reports.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use netinf::ccm::{ccm_scores, scores_to_network, CcmParams, CcmScores};
use netinf::dynsim::{
    impulse_forcing, random_initial_state, CouplingMode, KuramotoParams, MassSpringParams, Model, ModelKind, System, SystemState, Trajectory,
};
use netinf::granger::{gc_infer_network, OrderSelection};
use netinf::harness::{
    render_heatmap, run_sweep, summarize, splitmix, parse_results, EndTime, ExperimentConfig, GraphSpec, GraphType, GroupKey, PerturbOrder,
};
use netinf::network::DirectedNetwork;
use netinf::pci::{pci_infer, PerturbationParams, SimulatedCascade};

#[derive(Parser)]
#[command(name = "netinf", version, about = "Causal network inference for coupled oscillators")]
struct Cli {
    /// Seed for anything random (overrides a config's master_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (or directory for `report`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random directed network.
    Generate(GenerateArgs),
    /// Integrate a network's dynamics and write the trajectory.
    Simulate(SimulateArgs),
    /// Reconstruct a network with PCI, Granger causality or CCM.
    Infer(InferArgs),
    /// Run a parameter sweep from a config file.
    Experiment(ExperimentArgs),
    /// Summarize a results file and render heatmaps.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "er")]
    graph: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    p_conn: f64,
    #[arg(long, default_value_t = 8)]
    clique: usize,
    #[arg(long, default_value_t = 2)]
    ba_m: usize,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Ground-truth network file.
    #[arg(long)]
    network: PathBuf,
    #[arg(long, default_value = "mass-spring")]
    model: String,
    /// Spring constant k or Kuramoto coupling K.
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 0.25)]
    damping: f64,
    /// Use the literal `k·adj·x` coupling instead of Hooke springs.
    #[arg(long)]
    literal: bool,
    #[arg(long, default_value_t = 1.0)]
    omega_std: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
}

impl ModelArgs {
    fn system(&self, seed: u64) -> Result<(DirectedNetwork, System)> {
        let net = DirectedNetwork::load(&self.network).with_context(|| format!("reading {}", self.network.display()))?;
        let model = match self.model.parse::<ModelKind>()? {
            ModelKind::MassSpring => Model::MassSpring(MassSpringParams {
                mass: self.mass,
                damping: self.damping,
                mode: if self.literal { CouplingMode::Literal } else { CouplingMode::Laplacian },
                ..MassSpringParams::new(self.coupling)
            }),
            ModelKind::Kuramoto => Model::Kuramoto(KuramotoParams::with_random_omega(net.n(), self.coupling, self.omega_std, seed)),
        };
        Ok((net.clone(), System::new(net, model)?))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 20.0)]
    t_end: f64,
    /// Half-width of the uniform initial-state draw (0 starts at rest).
    #[arg(long, default_value_t = 0.0)]
    init_scale: f64,
    /// Node receiving a rectangular pulse.
    #[arg(long)]
    pulse_node: Option<usize>,
    #[arg(long, default_value_t = 50.0)]
    force: f64,
    #[arg(long, default_value_t = 0.0)]
    pulse_start: f64,
    #[arg(long, default_value_t = 0.5)]
    pulse_duration: f64,
    /// Keep every STEP-th integration sample.
    #[arg(long, default_value_t = 1)]
    sample_step: usize,
    /// Standard deviation of Gaussian observation noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Pci,
    Gc,
    Ccm,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalArg {
    States,
    Rates,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Trajectory files (GC, CCM).
    #[arg(long = "trajectory", num_args = 1..)]
    trajectories: Vec<PathBuf>,
    /// Which trajectory columns to use (GC, CCM).
    #[arg(long, value_enum, default_value = "states")]
    signal: SignalArg,
    /// VAR order, or `auto` for AIC selection (GC).
    #[arg(long, default_value = "auto")]
    order: String,
    #[arg(long, default_value_t = 5)]
    max_order: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Keep only the first SECONDS of each trajectory (GC).
    #[arg(long)]
    window: Option<f64>,
    #[arg(long, default_value_t = 3)]
    embed_dim: usize,
    #[arg(long, default_value_t = 1)]
    tau: usize,
    #[arg(long, default_value_t = 0.7)]
    rho: f64,
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
    /// Ground truth to perturb (PCI).
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long, default_value = "mass-spring")]
    model: String,
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    #[arg(long, default_value_t = 1.0)]
    omega_std: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value = "random")]
    perturb_order: String,
    /// Number of nodes to kick; all when omitted.
    #[arg(long)]
    perturb_count: Option<usize>,
    #[arg(long, default_value_t = 50.0)]
    force: f64,
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    #[arg(long, default_value_t = 2.0)]
    gap_factor: f64,
    /// Observation window after each kick; automatic when omitted.
    #[arg(long)]
    observe: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long, default_value = "coupling")]
    x: String,
    #[arg(long, default_value = "n")]
    y: String,
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// `<out>` with its extension replaced by `suffix`, e.g. `net.json` → `net.stats.csv`.
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let spec = GraphSpec {
        kind: a.graph.parse::<GraphType>()?,
        p_conn: a.p_conn,
        clique: a.clique,
        ba_m: a.ba_m,
    };
    let net = spec.generate(a.n, cli.seed.unwrap_or(0))?;
    write_output(cli.out.as_deref(), &(net.to_json() + "\n"))
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let (net, system) = a.model.system(seed)?;
    let initial = if a.init_scale > 0.0 {
        random_initial_state(system.kind(), net.n(), a.init_scale, splitmix(seed))?
    } else {
        SystemState::zeros(net.n())
    };
    let forcings = match a.pulse_node {
        Some(node) => vec![impulse_forcing(node, a.force, a.pulse_start, a.pulse_duration)?],
        None => Vec::new(),
    };
    let traj = system
        .simulate(&initial, &forcings, a.t_end, a.model.dt)?
        .decimate(a.sample_step)
        .with_observation_noise(a.noise, splitmix(seed ^ 4))?;
    write_output(cli.out.as_deref(), &traj.to_csv())
}

fn load_series(a: &InferArgs) -> Result<Vec<DMatrix<f64>>> {
    if a.trajectories.is_empty() {
        bail!("--trajectory is required for this method");
    }
    a.trajectories
        .iter()
        .map(|p| {
            let mut traj = Trajectory::load(p).with_context(|| format!("reading {}", p.display()))?;
            if let Some(w) = a.window {
                let t0 = traj.times.first().copied().unwrap_or(0.0);
                traj = traj.window(t0, t0 + w);
            }
            Ok(match a.signal {
                SignalArg::States => traj.states,
                SignalArg::Rates => traj.rates,
            })
        })
        .collect()
}

fn infer_gc(cli: &Cli, a: &InferArgs) -> Result<()> {
    let series = load_series(a)?;
    let order = if a.order == "auto" {
        OrderSelection::Auto { max: a.max_order }
    } else {
        OrderSelection::Fixed(a.order.parse().context("--order must be `auto` or a positive integer")?)
    };
    let (net, res) = gc_infer_network(&series, order, a.alpha)?;
    let mut stats = String::from("source,target,F,p,significant\n");
    for t in 0..net.n() {
        for s in 0..net.n() {
            if s != t {
                stats.push_str(&format!(
                    "{s},{t},{:.6},{:.6},{}\n",
                    res.f_stat[(t, s)],
                    res.p_values[(t, s)],
                    res.significant.has_edge(s, t)
                ));
            }
        }
    }
    eprintln!("VAR order {} on {} samples", res.order, res.sample_count);
    emit_network(cli, &net, "stats.csv", &stats)
}

fn infer_ccm(cli: &Cli, a: &InferArgs) -> Result<()> {
    let series = load_series(a)?;
    let params = CcmParams {
        dim: a.embed_dim,
        tau: a.tau,
        rho_threshold: a.rho,
        margin: a.margin,
        seed: cli.seed.unwrap_or(0),
    };
    let n = series[0].nrows();
    let mut sum = CcmScores {
        full: DMatrix::zeros(n, n),
        small: DMatrix::zeros(n, n),
    };
    for s in &series {
        if s.nrows() != n {
            bail!("trajectories have different node counts");
        }
        let sc = ccm_scores(s, &params)?;
        sum.full += sc.full;
        sum.small += sc.small;
    }
    sum.full /= series.len() as f64;
    sum.small /= series.len() as f64;
    let net = scores_to_network(&sum, &params);
    let mut table = String::from("source,target,rho_full,rho_min\n");
    for t in 0..n {
        for s in 0..n {
            if s != t {
                table.push_str(&format!("{s},{t},{:.6},{:.6}\n", sum.full[(t, s)], sum.small[(t, s)]));
            }
        }
    }
    emit_network(cli, &net, "rho.csv", &table)
}

fn infer_pci(cli: &Cli, a: &InferArgs) -> Result<()> {
    let Some(path) = &a.network else { bail!("--network (the system to perturb) is required for PCI") };
    let seed = cli.seed.unwrap_or(0);
    let margs = ModelArgs {
        network: path.clone(),
        model: a.model.clone(),
        coupling: a.coupling,
        mass: 1.0,
        damping: 0.25,
        literal: false,
        omega_std: a.omega_std,
        dt: a.dt,
    };
    let (truth, system) = margs.system(splitmix(seed ^ 1))?;
    let n = truth.n();
    let mut cfg = ExperimentConfig::new(system.kind(), netinf::harness::Method::Pci);
    cfg.sim.dt = a.dt;
    let cell = netinf::harness::Cell {
        endtime: a.observe.map(EndTime::Seconds).unwrap_or(EndTime::Auto),
        ..netinf::harness::single_cell(n, a.coupling, a.force)
    };
    let rest = match system.kind() {
        ModelKind::MassSpring => SystemState::zeros(n),
        ModelKind::Kuramoto => {
            let init = random_initial_state(ModelKind::Kuramoto, n, std::f64::consts::PI, splitmix(seed ^ 2))?;
            system.settle(&init, cfg.sim.settle_tol, cfg.sim.settle_t_max, a.dt)?.state
        }
    };
    let params = PerturbationParams {
        force: a.force,
        pulse_duration: cfg.sim.pulse_duration,
        window: netinf::harness::perturbation_window(&cfg, &cell),
        dt: a.dt,
        eta: a.eta,
        gap_factor: a.gap_factor,
    };
    let order = a.perturb_order.parse::<PerturbOrder>()?.schedule(&truth, splitmix(seed ^ 3));
    let mut cascade = SimulatedCascade::new(&system, rest, params);
    let out = pci_infer(&mut cascade, &order, a.perturb_count.unwrap_or(n).min(n))?;
    for (node, err) in &out.failures {
        eprintln!("perturbation of node {node} skipped: {err}");
    }
    eprintln!(
        "{} perturbations used, accuracy against the supplied network {:.4}",
        out.used,
        netinf::harness::accuracy(&truth, &out.network)?
    );
    emit_network(cli, &out.network, "probs.csv", &out.probs.to_csv())
}

/// Network JSON to `--out` (or stdout) and the side table next to it (or to
/// stderr when printing to stdout).
fn emit_network(cli: &Cli, net: &DirectedNetwork, suffix: &str, table: &str) -> Result<()> {
    match cli.out.as_deref() {
        Some(out) => {
            write_output(Some(out), &(net.to_json() + "\n"))?;
            let side = sidecar(out, suffix);
            fs::write(&side, table).with_context(|| format!("writing {}", side.display()))
        }
        None => {
            println!("{}", net.to_json());
            eprint!("{table}");
            Ok(())
        }
    }
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config).with_context(|| format!("loading {}", a.config.display()))?;
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    let threads = cli.threads.unwrap_or(cfg.threads);
    let report = match cli.out.as_deref() {
        Some(p) => {
            let mut file = io::BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?);
            run_sweep(&cfg, threads, Some(&mut file))?
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            run_sweep(&cfg, threads, Some(&mut lock))?
        }
    };
    eprintln!("{}", report.footer());
    Ok(())
}

fn report(cli: &Cli, a: &ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.results).with_context(|| format!("reading {}", a.results.display()))?;
    let records = parse_results(&text)?;
    let x: GroupKey = a.x.parse()?;
    let y: GroupKey = a.y.parse()?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;

    let full = summarize(&records, &[GroupKey::Method, GroupKey::Model, y, x])?;
    fs::write(dir.join("summary.csv"), full.to_csv())?;

    let mut pairs: Vec<(String, String)> = Vec::new();
    for r in &records {
        let key = (r.method.as_str().to_string(), r.model.as_str().to_string());
        if !pairs.contains(&key) {
            pairs.push(key);
        }
    }
    for (method, model) in pairs {
        let subset: Vec<_> = records
            .iter()
            .filter(|r| r.method.as_str() == method && r.model.as_str() == model)
            .cloned()
            .collect();
        let table = summarize(&subset, &[y, x])?;
        let svg = render_heatmap(&table, x, y, &format!("{method} accuracy, {model}"))?;
        let path = dir.join(format!("heatmap_{method}_{model}.svg"));
        fs::write(&path, svg)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate(a) => generate(&cli, a),
        Command::Simulate(a) => simulate(&cli, a),
        Command::Infer(a) => match a.method {
            MethodArg::Gc => infer_gc(&cli, a),
            MethodArg::Pci => infer_pci(&cli, a),
            MethodArg::Ccm => infer_ccm(&cli, a),
        },
        Command::Experiment(a) => experiment(&cli, a),
        Command::Report(a) => report(&cli, a),
    }
}
