use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{splitmix, Cell, EndTime, ExperimentConfig, GraphType, Method, PerturbCount, PerturbOrder};
use super::metrics::{accuracy, spectral_distance};
use crate::ccm::{ccm_scores, scores_to_network, CcmParams, CcmScores};
use crate::dynsim::{random_initial_state, KuramotoParams, MassSpringParams, Model, ModelKind, System, SystemState};
use crate::error::{Error, Result};
use crate::granger::{gc_infer_network, OrderSelection};
use crate::network::DirectedNetwork;
use crate::pci::{pci_infer, PerturbationParams, SimulatedCascade};

/// Results-file header, in column order.
pub const RESULTS_HEADER: &str =
    "model,graph_type,n,coupling,force,endtime,method,perturb_order,perturb_count,trial,seed,accuracy,spectral_distance,wall_secs,status";

/// Sub-seed purposes. GRAPH, OMEGA, INITIAL and NOISE derive from the
/// system seed, ORDER and CCM from the trial seed.
const GRAPH: u64 = 0;
const OMEGA: u64 = 1;
const INITIAL: u64 = 2;
const ORDER: u64 = 3;
const NOISE: u64 = 4;
const CCM: u64 = 5;

fn sub_seed(seed: u64, purpose: u64) -> u64 {
    if purpose == GRAPH {
        seed
    } else {
        splitmix(seed ^ purpose.wrapping_mul(0xd6e8_feb8_6659_fd93))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialStatus {
    Ok,
    Failed(String),
}

impl TrialStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, TrialStatus::Ok)
    }
}

/// One scored trial. `accuracy` and `spectral_distance` are NaN for failed
/// trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub model: ModelKind,
    pub graph_type: GraphType,
    pub method: Method,
    pub cell: Cell,
    pub trial: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub spectral_distance: f64,
    pub wall_secs: f64,
    pub status: TrialStatus,
    /// Perturbations (PCI, CCM) or runs (GC) that entered the inference.
    pub used: usize,
    /// Perturbations or runs that had to be skipped.
    pub skipped: usize,
}

fn fmt_metric(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

impl ExperimentRecord {
    pub fn to_csv_row(&self) -> String {
        let c = &self.cell;
        let status = match &self.status {
            TrialStatus::Ok => "ok".to_string(),
            TrialStatus::Failed(msg) => format!("failed: {}", msg.replace([',', '\n', '\r'], ";")),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{}",
            self.model.as_str(),
            self.graph_type.as_str(),
            c.n,
            c.coupling,
            c.force,
            c.endtime,
            self.method.as_str(),
            c.perturb_order.as_str(),
            c.perturb_count,
            self.trial,
            self.seed,
            fmt_metric(self.accuracy),
            fmt_metric(self.spectral_distance),
            self.wall_secs,
            status
        )
    }

    /// Parses one data row of a results file. Diagnostics that are not part of
    /// the file come back as zero.
    pub fn from_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.splitn(15, ',').collect();
        if f.len() != 15 {
            return Err(Error::Parse(format!("results row has {} fields, expected 15", f.len())));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            if s.is_empty() {
                Ok(f64::NAN)
            } else {
                s.parse::<f64>().map_err(|_| Error::Parse(format!("bad {what} '{s}'")))
            }
        };
        let int = |s: &str, what: &str| -> Result<u64> { s.parse::<u64>().map_err(|_| Error::Parse(format!("bad {what} '{s}'"))) };
        let status = match f[14] {
            "ok" => TrialStatus::Ok,
            other => TrialStatus::Failed(other.strip_prefix("failed: ").unwrap_or(other).to_string()),
        };
        Ok(Self {
            model: f[0].parse()?,
            graph_type: f[1].parse()?,
            method: f[6].parse()?,
            cell: Cell {
                n: int(f[2], "n")? as usize,
                coupling: num(f[3], "coupling")?,
                force: num(f[4], "force")?,
                endtime: f[5].parse()?,
                perturb_order: f[7].parse()?,
                perturb_count: f[8].parse()?,
            },
            trial: int(f[9], "trial")? as usize,
            seed: int(f[10], "seed")?,
            accuracy: num(f[11], "accuracy")?,
            spectral_distance: num(f[12], "spectral distance")?,
            wall_secs: num(f[13], "wall seconds")?,
            status,
            used: 0,
            skipped: 0,
        })
    }
}

/// Parses a whole results file, header included.
pub fn parse_results(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == RESULTS_HEADER => {}
        _ => return Err(Error::Parse("results file must start with the standard header".into())),
    }
    lines.map(ExperimentRecord::from_csv_row).collect()
}

struct Inference {
    network: DirectedNetwork,
    used: usize,
    skipped: usize,
}

/// Everything a trial needs besides the method itself.
pub(crate) struct TrialSetup {
    pub truth: DirectedNetwork,
    pub system: System,
    pub seed: u64,
    pub world: u64,
}

impl TrialSetup {
    pub(crate) fn new(cfg: &ExperimentConfig, cell: &Cell, seed: u64, world: u64) -> Result<Self> {
        let truth = cfg.graph.generate(cell.n, sub_seed(world, GRAPH))?;
        let model = match cfg.model {
            ModelKind::MassSpring => Model::MassSpring(MassSpringParams {
                mass: cfg.sim.mass,
                damping: cfg.sim.damping,
                ..MassSpringParams::new(cell.coupling)
            }),
            ModelKind::Kuramoto => Model::Kuramoto(KuramotoParams::with_random_omega(
                cell.n,
                cell.coupling,
                cfg.sim.omega_std,
                sub_seed(world, OMEGA),
            )),
        };
        let system = System::new(truth.clone(), model)?;
        Ok(Self { truth, system, seed, world })
    }

    /// State every perturbation starts from.
    fn rest_state(&self, cfg: &ExperimentConfig) -> Result<SystemState> {
        let n = self.truth.n();
        match cfg.model {
            ModelKind::MassSpring => Ok(SystemState::zeros(n)),
            ModelKind::Kuramoto => {
                let init = random_initial_state(ModelKind::Kuramoto, n, std::f64::consts::PI, sub_seed(self.world, INITIAL))?;
                Ok(self.system.settle(&init, cfg.sim.settle_tol, cfg.sim.settle_t_max, cfg.sim.dt)?.state)
            }
        }
    }

    fn cascade_params(&self, cfg: &ExperimentConfig, cell: &Cell) -> PerturbationParams {
        PerturbationParams {
            force: cell.force,
            pulse_duration: cfg.sim.pulse_duration,
            window: perturbation_window(cfg, cell),
            dt: cfg.sim.dt,
            eta: cfg.pci.eta,
            gap_factor: cfg.pci.gap_factor,
        }
    }

    fn schedule(&self, cell: &Cell) -> (Vec<usize>, usize) {
        let order = cell.perturb_order.schedule(&self.truth, sub_seed(self.seed, ORDER));
        let count = cell.perturb_count.resolve(self.truth.n());
        (order, count)
    }
}

/// Observation window after each kick: the grid value, or the pulse plus
/// the expected transient (`20 / K` for Kuramoto, the 1% ring-down time of
/// the damping envelope for mass-spring), capped at `sim.max_window`.
pub fn perturbation_window(cfg: &ExperimentConfig, cell: &Cell) -> f64 {
    match cell.endtime {
        EndTime::Seconds(s) => s,
        EndTime::Auto => {
            let transient = match cfg.model {
                ModelKind::Kuramoto => 20.0 / cell.coupling,
                ModelKind::MassSpring if cfg.sim.damping > 0.0 => 2.0 * cfg.sim.mass / cfg.sim.damping * 100f64.ln(),
                ModelKind::MassSpring => f64::INFINITY,
            };
            (cfg.sim.pulse_duration + transient).min(cfg.sim.max_window)
        }
    }
}

/// GC observation window: the grid value, `4.5 n / K` for Kuramoto, or the
/// configured mass-spring default.
pub fn gc_window(cfg: &ExperimentConfig, cell: &Cell) -> f64 {
    match cell.endtime {
        EndTime::Seconds(s) => s,
        EndTime::Auto => match cfg.model {
            ModelKind::Kuramoto => 4.5 * cell.n as f64 / cell.coupling,
            ModelKind::MassSpring => cfg.gc.mass_spring_window,
        },
    }
}

fn run_pci(cfg: &ExperimentConfig, cell: &Cell, setup: &TrialSetup) -> Result<Inference> {
    let rest = setup.rest_state(cfg)?;
    let mut cascade = SimulatedCascade::new(&setup.system, rest, setup.cascade_params(cfg, cell));
    let (order, count) = setup.schedule(cell);
    let out = pci_infer(&mut cascade, &order, count)?;
    if count > 0 && out.used == 0 {
        let (node, err) = out.failures.into_iter().next().expect("a failure was recorded");
        return Err(Error::Parameter(format!("every perturbation failed; first at node {node}: {err}")));
    }
    Ok(Inference {
        network: out.network,
        used: out.used,
        skipped: out.failures.len(),
    })
}

/// Observation series for GC: positions or unwrapped phases from `runs`
/// random starts, thinned and corrupted by Gaussian noise.
pub(crate) fn gc_series(cfg: &ExperimentConfig, cell: &Cell, setup: &TrialSetup) -> Result<Vec<DMatrix<f64>>> {
    let n = cell.n;
    let window = gc_window(cfg, cell);
    let noise = Normal::new(0.0, cfg.gc.noise).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(setup.world, NOISE));
    let init_base = sub_seed(setup.world, INITIAL);
    let mut blocks = Vec::with_capacity(cfg.gc.runs);
    for run in 0..cfg.gc.runs {
        let run_seed = splitmix(init_base.wrapping_add(run as u64));
        let init = match cfg.model {
            ModelKind::Kuramoto => random_initial_state(ModelKind::Kuramoto, n, std::f64::consts::PI, run_seed)?,
            ModelKind::MassSpring => {
                let x = random_initial_state(ModelKind::MassSpring, n, cfg.gc.init_scale, run_seed)?.x;
                let v = random_initial_state(ModelKind::MassSpring, n, cfg.gc.init_scale, splitmix(run_seed))?.x;
                SystemState { x, v }
            }
        };
        let traj = setup.system.simulate(&init, &[], window, cfg.sim.dt)?.decimate(cfg.gc.sample_step);
        let block = DMatrix::from_fn(n, traj.len(), |i, c| traj.states[(i, c)] + noise.sample(&mut rng));
        blocks.push(block);
    }
    Ok(blocks)
}

fn run_gc(cfg: &ExperimentConfig, cell: &Cell, setup: &TrialSetup) -> Result<Inference> {
    let blocks = gc_series(cfg, cell, setup)?;
    let (network, _) = gc_infer_network(&blocks, OrderSelection::Auto { max: cfg.gc.max_order }, cfg.gc.alpha)?;
    Ok(Inference {
        network,
        used: blocks.len(),
        skipped: 0,
    })
}

/// CCM over the same kicked trajectories PCI would see. Cross-map skills are
/// averaged over the perturbation records before thresholding. Kuramoto
/// nodes are represented by their phase velocities, mass-spring nodes by
/// their displacements.
fn run_ccm(cfg: &ExperimentConfig, cell: &Cell, setup: &TrialSetup) -> Result<Inference> {
    let n = cell.n;
    let rest = setup.rest_state(cfg)?;
    let cascade = SimulatedCascade::new(&setup.system, rest, setup.cascade_params(cfg, cell));
    let (order, count) = setup.schedule(cell);
    let params = CcmParams {
        dim: cfg.ccm.dim,
        tau: cfg.ccm.tau,
        rho_threshold: cfg.ccm.rho,
        margin: cfg.ccm.margin,
        seed: sub_seed(setup.seed, CCM),
    };
    let mut sum = CcmScores {
        full: DMatrix::zeros(n, n),
        small: DMatrix::zeros(n, n),
    };
    let (mut used, mut skipped) = (0, 0);
    let mut last_err = None;
    for &node in &order[..count] {
        let scored = cascade.kick(node).and_then(|traj| {
            let traj = traj.decimate(cfg.ccm.sample_step);
            let series = match cfg.model {
                ModelKind::Kuramoto => traj.rates,
                ModelKind::MassSpring => traj.states,
            };
            ccm_scores(&series, &params)
        });
        match scored {
            Ok(s) => {
                sum.full += s.full;
                sum.small += s.small;
                used += 1;
            }
            Err(e) => {
                skipped += 1;
                last_err = Some(e);
            }
        }
    }
    if used == 0 {
        return Err(last_err.unwrap_or_else(|| Error::Parameter("no perturbations scheduled for CCM".into())));
    }
    sum.full /= used as f64;
    sum.small /= used as f64;
    Ok(Inference {
        network: scores_to_network(&sum, &params),
        used,
        skipped,
    })
}

/// Runs one trial of one cell. Failures (divergence, singular fits, ...)
/// produce a record with a failed status instead of an error.
pub fn run_trial(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> ExperimentRecord {
    let seed = super::config::trial_seed(cfg.master_seed, cell, trial);
    let start = Instant::now();
    let world = super::config::system_seed(cfg.master_seed, cell.n, trial);
    let outcome = TrialSetup::new(cfg, cell, seed, world).and_then(|setup| {
        let inf = match cfg.method {
            Method::Pci => run_pci(cfg, cell, &setup)?,
            Method::Gc => run_gc(cfg, cell, &setup)?,
            Method::Ccm => run_ccm(cfg, cell, &setup)?,
        };
        let acc = accuracy(&setup.truth, &inf.network)?;
        let spec = spectral_distance(&setup.truth, &inf.network)?;
        Ok((acc, spec, inf.used, inf.skipped))
    });
    let wall_secs = if cfg.record_timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let (accuracy, spectral_distance, used, skipped, status) = match outcome {
        Ok((a, s, u, k)) => (a, s, u, k, TrialStatus::Ok),
        Err(e) => (f64::NAN, f64::NAN, 0, 0, TrialStatus::Failed(e.to_string())),
    };
    ExperimentRecord {
        model: cfg.model,
        graph_type: cfg.graph.kind,
        method: cfg.method,
        cell: *cell,
        trial,
        seed,
        accuracy,
        spectral_distance,
        wall_secs,
        status,
        used,
        skipped,
    }
}

/// Convenience for a single cell with default perturbation settings.
pub fn single_cell(n: usize, coupling: f64, force: f64) -> Cell {
    Cell {
        n,
        coupling,
        force,
        endtime: EndTime::Auto,
        perturb_order: PerturbOrder::Random,
        perturb_count: PerturbCount::All,
    }
}
