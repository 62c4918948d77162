use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dynsim::ModelKind;
use crate::error::{param, Error, Result};
use crate::network::{barabasi_albert, erdos_renyi, erdos_renyi_with_clique, outcloseness_order, outdegree_order, DirectedNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pci,
    Gc,
    Ccm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pci => "pci",
            Method::Gc => "gc",
            Method::Ccm => "ccm",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pci" => Ok(Method::Pci),
            "gc" => Ok(Method::Gc),
            "ccm" => Ok(Method::Ccm),
            other => param(format!("unknown method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphType {
    #[serde(rename = "er")]
    ErdosRenyi,
    #[serde(rename = "er-clique")]
    ErdosRenyiClique,
    #[serde(rename = "ba")]
    BarabasiAlbert,
}

impl GraphType {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphType::ErdosRenyi => "er",
            GraphType::ErdosRenyiClique => "er-clique",
            GraphType::BarabasiAlbert => "ba",
        }
    }
}

impl FromStr for GraphType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "er" => Ok(GraphType::ErdosRenyi),
            "er-clique" => Ok(GraphType::ErdosRenyiClique),
            "ba" => Ok(GraphType::BarabasiAlbert),
            other => param(format!("unknown graph type '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbOrder {
    Random,
    Outdegree,
    Outcloseness,
}

impl PerturbOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            PerturbOrder::Random => "random",
            PerturbOrder::Outdegree => "outdegree",
            PerturbOrder::Outcloseness => "outcloseness",
        }
    }

    /// Node schedule for `net`; `seed` only matters for the random order.
    pub fn schedule(self, net: &DirectedNetwork, seed: u64) -> Vec<usize> {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        match self {
            PerturbOrder::Random => {
                let mut order: Vec<usize> = (0..net.n()).collect();
                order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                order
            }
            PerturbOrder::Outdegree => outdegree_order(net),
            PerturbOrder::Outcloseness => outcloseness_order(net),
        }
    }
}

impl FromStr for PerturbOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(PerturbOrder::Random),
            "outdegree" => Ok(PerturbOrder::Outdegree),
            "outcloseness" => Ok(PerturbOrder::Outcloseness),
            other => param(format!("unknown perturbation order '{other}'")),
        }
    }
}

/// A grid value that is either a number or the keyword given by `W`.
#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum NumberOrWord {
    Number(f64),
    Word(String),
}

/// Observation length: a fixed number of seconds or a method default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndTime {
    Auto,
    Seconds(f64),
}

impl fmt::Display for EndTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EndTime::Auto => f.write_str("auto"),
            EndTime::Seconds(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for EndTime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(EndTime::Auto);
        }
        s.parse::<f64>()
            .map(EndTime::Seconds)
            .map_err(|_| Error::Parse(format!("bad end time '{s}'")))
    }
}

impl Serialize for EndTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EndTime::Auto => s.serialize_str("auto"),
            EndTime::Seconds(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for EndTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match NumberOrWord::deserialize(d)? {
            NumberOrWord::Number(v) => Ok(EndTime::Seconds(v)),
            NumberOrWord::Word(w) if w == "auto" => Ok(EndTime::Auto),
            NumberOrWord::Word(w) => Err(serde::de::Error::custom(format!("end time must be a number or \"auto\", got \"{w}\""))),
        }
    }
}

/// How many nodes of the schedule get kicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbCount {
    All,
    Count(usize),
}

impl PerturbCount {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            PerturbCount::All => n,
            PerturbCount::Count(c) => c.min(n),
        }
    }
}

impl fmt::Display for PerturbCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbCount::All => f.write_str("all"),
            PerturbCount::Count(c) => write!(f, "{c}"),
        }
    }
}

impl FromStr for PerturbCount {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(PerturbCount::All);
        }
        s.parse::<usize>()
            .map(PerturbCount::Count)
            .map_err(|_| Error::Parse(format!("bad perturbation count '{s}'")))
    }
}

impl Serialize for PerturbCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PerturbCount::All => s.serialize_str("all"),
            PerturbCount::Count(c) => s.serialize_u64(*c as u64),
        }
    }
}

impl<'de> Deserialize<'de> for PerturbCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match NumberOrWord::deserialize(d)? {
            NumberOrWord::Number(v) if v >= 0.0 && v.fract() == 0.0 => Ok(PerturbCount::Count(v as usize)),
            NumberOrWord::Word(w) if w == "all" => Ok(PerturbCount::All),
            _ => Err(serde::de::Error::custom("perturbation count must be a non-negative integer or \"all\"")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(rename = "type")]
    pub kind: GraphType,
    pub p_conn: f64,
    pub clique: usize,
    pub ba_m: usize,
}

impl Default for GraphSpec {
    fn default() -> Self {
        Self {
            kind: GraphType::ErdosRenyi,
            p_conn: 0.5,
            clique: 8,
            ba_m: 2,
        }
    }
}

impl GraphSpec {
    pub fn generate(&self, n: usize, seed: u64) -> Result<DirectedNetwork> {
        match self.kind {
            GraphType::ErdosRenyi => erdos_renyi(n, self.p_conn, seed),
            GraphType::ErdosRenyiClique => erdos_renyi_with_clique(n, self.p_conn, self.clique, seed),
            GraphType::BarabasiAlbert => barabasi_albert(n, self.ba_m, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub n: Vec<usize>,
    pub coupling: Vec<f64>,
    pub force: Vec<f64>,
    pub endtime: Vec<EndTime>,
    pub perturb_order: Vec<PerturbOrder>,
    pub perturb_count: Vec<PerturbCount>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            n: vec![5],
            coupling: vec![1.0],
            force: vec![50.0],
            endtime: vec![EndTime::Auto],
            perturb_order: vec![PerturbOrder::Random],
            perturb_count: vec![PerturbCount::All],
        }
    }
}

/// Integrator and model constants shared by all methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub pulse_duration: f64,
    pub mass: f64,
    pub damping: f64,
    pub omega_std: f64,
    pub settle_tol: f64,
    pub settle_t_max: f64,
    /// Upper bound on automatically chosen observation windows.
    pub max_window: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 0.01,
            pulse_duration: 0.5,
            mass: 1.0,
            damping: 0.25,
            omega_std: 1.0,
            settle_tol: 1e-3,
            settle_t_max: 200.0,
            max_window: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PciSettings {
    pub eta: f64,
    pub gap_factor: f64,
}

impl Default for PciSettings {
    fn default() -> Self {
        Self {
            eta: 0.05,
            gap_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcSettings {
    /// Independent runs from random initial conditions, pooled per graph.
    pub runs: usize,
    /// Keep every `sample_step`-th integrator step.
    pub sample_step: usize,
    /// Standard deviation of additive Gaussian observation noise.
    pub noise: f64,
    pub max_order: usize,
    pub alpha: f64,
    /// Half-width of the uniform initial displacement/velocity draw.
    pub init_scale: f64,
    /// Automatic mass-spring window; Kuramoto uses `4.5 n / K`.
    pub mass_spring_window: f64,
}

impl Default for GcSettings {
    fn default() -> Self {
        Self {
            runs: 10,
            sample_step: 10,
            noise: 0.01,
            max_order: 5,
            alpha: 0.05,
            init_scale: 1.0,
            mass_spring_window: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcmSettings {
    pub dim: usize,
    pub tau: usize,
    pub rho: f64,
    pub margin: f64,
    pub sample_step: usize,
}

impl Default for CcmSettings {
    fn default() -> Self {
        Self {
            dim: 3,
            tau: 1,
            rho: 0.7,
            margin: 0.05,
            sample_step: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub method: Method,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads; 0 picks the available parallelism.
    #[serde(default)]
    pub threads: usize,
    /// Store measured wall-clock seconds; otherwise 0 is written so that
    /// result files are reproducible byte for byte.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub graph: GraphSpec,
    #[serde(default)]
    pub sweep: SweepGrid,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub pci: PciSettings,
    #[serde(default)]
    pub gc: GcSettings,
    #[serde(default)]
    pub ccm: CcmSettings,
}

fn default_trials() -> usize {
    20
}

impl ExperimentConfig {
    pub fn new(model: ModelKind, method: Method) -> Self {
        Self {
            model,
            method,
            trials: default_trials(),
            master_seed: 0,
            threads: 0,
            record_timing: false,
            graph: GraphSpec::default(),
            sweep: SweepGrid::default(),
            sim: SimSettings::default(),
            pci: PciSettings::default(),
            gc: GcSettings::default(),
            ccm: CcmSettings::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        if self.trials == 0 {
            return param("trials must be at least 1");
        }
        if s.n.is_empty()
            || s.coupling.is_empty()
            || s.force.is_empty()
            || s.endtime.is_empty()
            || s.perturb_order.is_empty()
            || s.perturb_count.is_empty()
        {
            return param("every sweep grid needs at least one value");
        }
        if s.n.iter().any(|&n| n < 2) {
            return param("network sizes must be at least 2");
        }
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            match v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                Some(bad) => param(format!("{name} grid values must be positive, got {bad}")),
                None => Ok(()),
            }
        };
        positive("coupling", &s.coupling)?;
        positive("force", &s.force)?;
        for e in &s.endtime {
            if let EndTime::Seconds(v) = e {
                positive("endtime", &[*v])?;
            }
        }
        if !(0.0..=1.0).contains(&self.graph.p_conn) {
            return param(format!("p_conn must lie in [0, 1], got {}", self.graph.p_conn));
        }
        for &n in &s.n {
            match self.graph.kind {
                GraphType::ErdosRenyiClique if self.graph.clique == 0 || self.graph.clique > n => {
                    return param(format!("clique size {} does not fit n = {n}", self.graph.clique));
                }
                GraphType::BarabasiAlbert if self.graph.ba_m == 0 || self.graph.ba_m >= n => {
                    return param(format!("BA attachment {} needs 1 <= m < n = {n}", self.graph.ba_m));
                }
                _ => {}
            }
        }
        let sim = &self.sim;
        for (name, v) in [
            ("dt", sim.dt),
            ("pulse_duration", sim.pulse_duration),
            ("mass", sim.mass),
            ("settle_tol", sim.settle_tol),
            ("settle_t_max", sim.settle_t_max),
            ("max_window", sim.max_window),
        ] {
            positive(name, &[v])?;
        }
        if !(sim.damping >= 0.0) || !(sim.omega_std >= 0.0) {
            return param("damping and omega_std must be non-negative");
        }
        if !(self.pci.eta > 0.0 && self.pci.eta < 1.0) || !(self.pci.gap_factor > 1.0) {
            return param("pci.eta must lie in (0, 1) and pci.gap_factor must exceed 1");
        }
        let gc = &self.gc;
        if gc.runs == 0 || gc.sample_step == 0 || gc.max_order == 0 {
            return param("gc.runs, gc.sample_step and gc.max_order must be at least 1");
        }
        if !(gc.noise >= 0.0) || !(gc.alpha > 0.0 && gc.alpha < 1.0) || !(gc.mass_spring_window > 0.0) {
            return param("gc.noise must be >= 0, gc.alpha in (0, 1), gc.mass_spring_window > 0");
        }
        if self.ccm.dim == 0 || self.ccm.tau == 0 || self.ccm.sample_step == 0 {
            return param("ccm.dim, ccm.tau and ccm.sample_step must be at least 1");
        }
        Ok(())
    }

    /// Cartesian product of the sweep grids, last grid varying fastest.
    pub fn cells(&self) -> Vec<Cell> {
        let s = &self.sweep;
        let mut out = Vec::new();
        for &n in &s.n {
            for &coupling in &s.coupling {
                for &force in &s.force {
                    for &endtime in &s.endtime {
                        for &perturb_order in &s.perturb_order {
                            for &perturb_count in &s.perturb_count {
                                out.push(Cell {
                                    n,
                                    coupling,
                                    force,
                                    endtime,
                                    perturb_order,
                                    perturb_count,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub coupling: f64,
    pub force: f64,
    pub endtime: EndTime,
    pub perturb_order: PerturbOrder,
    pub perturb_count: PerturbCount,
}

/// Stable 64-bit seed for one trial of one cell.
///
/// FNV-1a over a fixed byte encoding, then a SplitMix64 finalizer. Grid
/// values enter by content, so adding cells never changes existing seeds.
pub fn trial_seed(master_seed: u64, cell: &Cell, trial: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&master_seed.to_le_bytes());
    eat(&(cell.n as u64).to_le_bytes());
    eat(&cell.coupling.to_bits().to_le_bytes());
    eat(&cell.force.to_bits().to_le_bytes());
    match cell.endtime {
        EndTime::Auto => eat(b"auto"),
        EndTime::Seconds(s) => eat(&s.to_bits().to_le_bytes()),
    }
    eat(cell.perturb_order.as_str().as_bytes());
    match cell.perturb_count {
        PerturbCount::All => eat(b"all"),
        PerturbCount::Count(c) => eat(&(c as u64).to_le_bytes()),
    }
    eat(&(trial as u64).to_le_bytes());
    splitmix(h)
}

/// Seed for everything a trial shares with other cells of the same size:
/// the ground-truth graph, natural frequencies, initial conditions and
/// observation noise. Cells that differ only in coupling, force, window or
/// perturbation schedule are therefore compared on the same systems.
pub fn system_seed(master_seed: u64, n: usize, trial: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in master_seed
        .to_le_bytes()
        .into_iter()
        .chain(b"system".iter().copied())
        .chain((n as u64).to_le_bytes())
        .chain((trial as u64).to_le_bytes())
    {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(h)
}

/// SplitMix64 output function; also used to derive per-purpose sub-seeds.
pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
