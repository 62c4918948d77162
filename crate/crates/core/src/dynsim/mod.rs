//! Forced oscillator networks: a damped mass-spring lattice and the Kuramoto
//! phase model, both integrated with fixed-step RK4.
//!
//! Mass-spring nodes obey
//!
//! ```text
//! m x_i'' = k (Σ_j adj[i][j] (x_j - x_i) - w_i x_i) - c x_i' + f_i(t)
//! ```
//!
//! where `w_i` counts the wall springs on node `i` (nodes `0` and `n - 1`).
//! [`CouplingMode::Literal`] swaps the Hooke term for the raw `k · adj · x`.
//!
//! Kuramoto phases obey
//!
//! ```text
//! θ_i' = ω_i + (K / n) Σ_j adj[i][j] sin(θ_j - θ_i) + f_i(t)
//! ```

pub mod rk4;
mod trajectory;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use trajectory::Trajectory;

use crate::error::{param, Error, Result};
use crate::network::DirectedNetwork;
use rk4::{rk4_step, Rk4Scratch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    MassSpring,
    Kuramoto,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::MassSpring => "mass-spring",
            ModelKind::Kuramoto => "kuramoto",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mass-spring" => Ok(ModelKind::MassSpring),
            "kuramoto" => Ok(ModelKind::Kuramoto),
            other => param(format!("unknown model '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    /// Hooke springs pulling `x_i` toward each driver `x_j`.
    #[default]
    Laplacian,
    /// `k · adj · x` taken at face value. Unstable for most graphs.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassSpringParams {
    pub mass: f64,
    pub damping: f64,
    pub stiffness: f64,
    /// Wall springs on node 0 and node n - 1.
    pub walls: [bool; 2],
    pub mode: CouplingMode,
}

impl MassSpringParams {
    /// Unit mass, damping 0.25 and both walls attached.
    pub fn new(stiffness: f64) -> Self {
        Self {
            mass: 1.0,
            damping: 0.25,
            stiffness,
            walls: [true, true],
            mode: CouplingMode::Laplacian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !(self.damping >= 0.0) || !(self.stiffness > 0.0) {
            return param(format!(
                "mass-spring needs m > 0, c >= 0, k > 0 (got m = {}, c = {}, k = {})",
                self.mass, self.damping, self.stiffness
            ));
        }
        Ok(())
    }

    fn wall_springs(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n];
        if self.walls[0] {
            w[0] += 1.0;
        }
        if self.walls[1] {
            w[n - 1] += 1.0;
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KuramotoParams {
    pub coupling: f64,
    pub omega: Vec<f64>,
}

impl KuramotoParams {
    /// Natural frequencies drawn i.i.d. from `N(0, omega_std²)`.
    pub fn with_random_omega(n: usize, coupling: f64, omega_std: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                omega_std * z
            })
            .collect();
        Self { coupling, omega }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.coupling >= 0.0) || !self.coupling.is_finite() {
            return param(format!("Kuramoto coupling must be finite and >= 0, got {}", self.coupling));
        }
        if self.omega.len() != n {
            return param(format!("expected {n} natural frequencies, got {}", self.omega.len()));
        }
        if self.omega.iter().any(|w| !w.is_finite()) {
            return param("natural frequencies must be finite");
        }
        Ok(())
    }
}

/// Rectangular pulse on one node: `magnitude` on `[t_start, t_start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forcing {
    pub node: usize,
    pub magnitude: f64,
    pub t_start: f64,
    pub duration: f64,
}

impl Forcing {
    pub fn value_at(&self, t: f64) -> f64 {
        if t >= self.t_start && t < self.t_start + self.duration {
            self.magnitude
        } else {
            0.0
        }
    }
}

pub fn impulse_forcing(node: usize, magnitude: f64, t_start: f64, duration: f64) -> Result<Forcing> {
    if !(duration > 0.0) {
        return param(format!("pulse duration must be positive, got {duration}"));
    }
    if !(t_start >= 0.0) {
        return param(format!("pulse start must be >= 0, got {t_start}"));
    }
    Ok(Forcing {
        node,
        magnitude,
        t_start,
        duration,
    })
}

/// Positions and rates of every node. For Kuramoto `x` holds phases and `v`
/// the instantaneous phase velocities (ignored as simulation input).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl SystemState {
    pub fn zeros(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// State at the last sample of a trajectory.
    pub fn last_of(traj: &Trajectory) -> Self {
        let c = traj.len() - 1;
        Self {
            x: traj.states.column(c).iter().copied().collect(),
            v: traj.rates.column(c).iter().copied().collect(),
        }
    }
}

/// Seeded uniform draws on `[-scale, scale]` with zero velocities. Kuramoto
/// phases are wrapped into `[0, 2π)` when `scale` exceeds π.
pub fn random_initial_state(kind: ModelKind, n: usize, scale: f64, seed: u64) -> Result<SystemState> {
    if !(scale >= 0.0) {
        return param(format!("initial-state scale must be >= 0, got {scale}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wrap = kind == ModelKind::Kuramoto && scale > std::f64::consts::PI;
    let x = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let v = scale * (2.0 * u - 1.0);
            if wrap {
                v.rem_euclid(std::f64::consts::TAU)
            } else {
                v
            }
        })
        .collect();
    Ok(SystemState { x, v: vec![0.0; n] })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    MassSpring(MassSpringParams),
    Kuramoto(KuramotoParams),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::MassSpring(_) => ModelKind::MassSpring,
            Model::Kuramoto(_) => ModelKind::Kuramoto,
        }
    }
}

/// A network together with the dynamics running on it.
#[derive(Debug, Clone)]
pub struct System {
    net: DirectedNetwork,
    model: Model,
    drivers: Vec<Vec<usize>>,
    walls: Vec<f64>,
}

impl System {
    pub fn new(net: DirectedNetwork, model: Model) -> Result<Self> {
        let n = net.n();
        let walls = match &model {
            Model::MassSpring(p) => {
                p.validate()?;
                p.wall_springs(n)
            }
            Model::Kuramoto(p) => {
                p.validate(n)?;
                vec![0.0; n]
            }
        };
        let drivers = net.in_neighbors();
        Ok(Self {
            net,
            model,
            drivers,
            walls,
        })
    }

    pub fn network(&self) -> &DirectedNetwork {
        &self.net
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn n(&self) -> usize {
        self.net.n()
    }

    fn dim(&self) -> usize {
        match self.model {
            Model::MassSpring(_) => 2 * self.n(),
            Model::Kuramoto(_) => self.n(),
        }
    }

    fn pack(&self, state: &SystemState) -> Result<Vec<f64>> {
        let n = self.n();
        if state.x.len() != n {
            return param(format!("initial state has {} entries, expected {n}", state.x.len()));
        }
        match self.model {
            Model::MassSpring(_) => {
                if state.v.len() != n {
                    return param(format!("initial velocity has {} entries, expected {n}", state.v.len()));
                }
                Ok(state.x.iter().chain(state.v.iter()).copied().collect())
            }
            Model::Kuramoto(_) => Ok(state.x.clone()),
        }
    }

    fn derivative(&self, t: f64, y: &[f64], dy: &mut [f64], forcings: &[Forcing]) {
        let n = self.n();
        match &self.model {
            Model::MassSpring(p) => {
                let (x, v) = y.split_at(n);
                let (dx, dv) = dy.split_at_mut(n);
                dx.copy_from_slice(v);
                for i in 0..n {
                    let spring = match p.mode {
                        CouplingMode::Laplacian => {
                            self.drivers[i].iter().map(|&j| x[j] - x[i]).sum::<f64>() - self.walls[i] * x[i]
                        }
                        CouplingMode::Literal => self.drivers[i].iter().map(|&j| x[j]).sum::<f64>(),
                    };
                    dv[i] = (p.stiffness * spring - p.damping * v[i]) / p.mass;
                }
                for f in forcings {
                    if f.node < n {
                        dv[f.node] += f.value_at(t) / p.mass;
                    }
                }
            }
            Model::Kuramoto(p) => {
                let scale = p.coupling / n as f64;
                for i in 0..n {
                    let pull: f64 = self.drivers[i].iter().map(|&j| (y[j] - y[i]).sin()).sum();
                    dy[i] = p.omega[i] + scale * pull;
                }
                for f in forcings {
                    if f.node < n {
                        dy[f.node] += f.value_at(t);
                    }
                }
            }
        }
    }

    /// Instantaneous rates at `(t, state)`.
    pub fn rates(&self, t: f64, state: &SystemState, forcings: &[Forcing]) -> Result<Vec<f64>> {
        let y = self.pack(state)?;
        let mut dy = vec![0.0; y.len()];
        self.derivative(t, &y, &mut dy, forcings);
        Ok(match self.model {
            Model::MassSpring(_) => dy[..self.n()].to_vec(),
            Model::Kuramoto(_) => dy,
        })
    }

    fn sample_rates(&self, t: f64, y: &[f64], forcings: &[Forcing], buf: &mut [f64]) {
        match self.model {
            Model::MassSpring(_) => buf[..self.n()].copy_from_slice(&y[self.n()..]),
            Model::Kuramoto(_) => self.derivative(t, y, buf, forcings),
        }
    }

    /// Integrates from `t = 0` to `t_end` with step `dt`, sampling every step.
    pub fn simulate(&self, initial: &SystemState, forcings: &[Forcing], t_end: f64, dt: f64) -> Result<Trajectory> {
        if !(dt > 0.0) || !dt.is_finite() {
            return param(format!("time step must be positive, got {dt}"));
        }
        if !(t_end >= dt * (1.0 - 1e-9)) {
            return param(format!("end time {t_end} shorter than one step {dt}"));
        }
        for f in forcings {
            if f.node >= self.n() {
                return param(format!("forcing targets node {} but n = {}", f.node, self.n()));
            }
        }
        let n = self.n();
        let steps = (t_end / dt).round() as usize;
        let mut y = self.pack(initial)?;
        let mut scratch = Rk4Scratch::new(y.len());
        let mut states = nalgebra::DMatrix::zeros(n, steps + 1);
        let mut rates = nalgebra::DMatrix::zeros(n, steps + 1);
        let mut buf = vec![0.0; self.dim()];
        let mut record = |c: usize, t: f64, y: &[f64], buf: &mut [f64]| {
            self.sample_rates(t, y, forcings, buf);
            for i in 0..n {
                states[(i, c)] = y[i];
                rates[(i, c)] = buf[i];
            }
        };
        record(0, 0.0, &y, &mut buf);
        for s in 0..steps {
            let t = s as f64 * dt;
            rk4_step(&mut y, t, dt, &mut scratch, |t, y, dy| self.derivative(t, y, dy, forcings));
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    step: s + 1,
                    time: (s + 1) as f64 * dt,
                });
            }
            record(s + 1, (s + 1) as f64 * dt, &y, &mut buf);
        }
        let times = (0..=steps).map(|i| i as f64 * dt).collect();
        Trajectory::new(times, states, rates)
    }

    /// Runs unforced until the settle criterion has held for `hold` seconds or
    /// `t_max` elapses.
    pub fn settle(&self, initial: &SystemState, tol: f64, t_max: f64, dt: f64) -> Result<SettleOutcome> {
        if !(tol > 0.0) {
            return param(format!("settle tolerance must be positive, got {tol}"));
        }
        if !(dt > 0.0) {
            return param(format!("time step must be positive, got {dt}"));
        }
        let n = self.n();
        let kind = self.kind();
        let hold_steps = (SETTLE_HOLD / dt).round().max(1.0) as usize;
        let max_steps = (t_max / dt).round() as usize;
        let mut y = self.pack(initial)?;
        let mut scratch = Rk4Scratch::new(y.len());
        let mut buf = vec![0.0; self.dim()];
        let mut streak = 0usize;
        let mut step = 0usize;
        loop {
            let t = step as f64 * dt;
            self.sample_rates(t, &y, &[], &mut buf);
            if is_settled(kind, &y[..n], &buf[..n], tol) {
                streak += 1;
            } else {
                streak = 0;
            }
            let settled = streak > hold_steps;
            if settled || step >= max_steps {
                return Ok(SettleOutcome {
                    state: SystemState {
                        x: y[..n].to_vec(),
                        v: buf[..n].to_vec(),
                    },
                    time: t,
                    settled,
                });
            }
            rk4_step(&mut y, t, dt, &mut scratch, |t, y, dy| self.derivative(t, y, dy, &[]));
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { step: step + 1, time: t + dt });
            }
            step += 1;
        }
    }
}

/// How long the settle criterion must keep holding before a run counts as
/// settled.
pub const SETTLE_HOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SettleOutcome {
    pub state: SystemState,
    pub time: f64,
    pub settled: bool,
}

fn is_settled(kind: ModelKind, x: &[f64], rates: &[f64], tol: f64) -> bool {
    match kind {
        ModelKind::MassSpring => x.iter().chain(rates).all(|v| v.abs() < tol),
        ModelKind::Kuramoto => {
            let (lo, hi) = rates
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
            hi - lo < tol
        }
    }
}

pub fn simulate_mass_spring(
    net: &DirectedNetwork,
    params: &MassSpringParams,
    forcings: &[Forcing],
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let sys = System::new(net.clone(), Model::MassSpring(params.clone()))?;
    let state = SystemState {
        x: x0.to_vec(),
        v: v0.to_vec(),
    };
    sys.simulate(&state, forcings, t_end, dt)
}

pub fn simulate_kuramoto(
    net: &DirectedNetwork,
    params: &KuramotoParams,
    forcings: &[Forcing],
    theta0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let sys = System::new(net.clone(), Model::Kuramoto(params.clone()))?;
    let state = SystemState {
        x: theta0.to_vec(),
        v: vec![0.0; theta0.len()],
    };
    sys.simulate(&state, forcings, t_end, dt)
}

/// Earliest time after which the settle criterion holds for every remaining
/// sample; `f64::INFINITY` when the last sample still violates it.
pub fn estimate_transient_time(traj: &Trajectory, kind: ModelKind, tol: f64) -> Result<f64> {
    if traj.is_empty() {
        return param("cannot estimate a transient on an empty trajectory");
    }
    let n = traj.n();
    let mut x = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut first_settled = None;
    for c in (0..traj.len()).rev() {
        for i in 0..n {
            x[i] = traj.states[(i, c)];
            r[i] = traj.rates[(i, c)];
        }
        if is_settled(kind, &x, &r, tol) {
            first_settled = Some(c);
        } else {
            break;
        }
    }
    Ok(match first_settled {
        Some(c) => traj.times[c] - traj.times[0],
        None => f64::INFINITY,
    })
}

/// Magnitude of the mean unit phasor.
pub fn order_parameter(phases: &[f64]) -> f64 {
    let n = phases.len() as f64;
    let (s, c) = phases.iter().fold((0.0, 0.0), |(s, c), p| (s + p.sin(), c + p.cos()));
    (s * s + c * c).sqrt() / n
}

/// Kinetic plus spring energy. Only meaningful for symmetric networks, where
/// each undirected pair is one spring.
pub fn mechanical_energy(net: &DirectedNetwork, params: &MassSpringParams, x: &[f64], v: &[f64]) -> f64 {
    let n = net.n();
    let kinetic: f64 = 0.5 * params.mass * v.iter().map(|v| v * v).sum::<f64>();
    let mut potential = 0.0;
    for (s, t) in net.edges() {
        if s < t {
            potential += 0.5 * params.stiffness * (x[s] - x[t]).powi(2);
        }
    }
    for (i, w) in params.wall_springs(n).iter().enumerate() {
        potential += 0.5 * params.stiffness * w * x[i] * x[i];
    }
    kinetic + potential
}
