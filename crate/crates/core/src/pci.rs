//! Perturbation cascade inference.
//!
//! Kicking node `p` sends a cascade through the network: nodes at directed
//! distance `k` from `p` react before nodes at distance `k + 1`. Sorting nodes
//! by activation time therefore estimates the distance shells `D_k(p)`, and
//! each set of shells updates a matrix of edge beliefs `P(x → y)`:
//!
//! - `x` unreachable from `p`: nothing is learned about `x → y`;
//! - `y` two or more shells beyond `x`, or unreachable: `x → y` cannot exist,
//!   so its probability is divided by ten;
//! - `y` exactly one shell beyond `x`: some member of `x`'s shell drives `y`,
//!   and Bayes' rule gives `P(x → y) / (1 - Π_v (1 - P(v → y)))` over that
//!   shell.
//!
//! Every update of one perturbation reads from a snapshot taken before the
//! perturbation, so the result does not depend on the visiting order.

use nalgebra::DMatrix;

use crate::dynsim::{impulse_forcing, ModelKind, System, SystemState, Trajectory};
use crate::error::{param, Error, Result};
use crate::network::{bfs_distance_sets, DirectedNetwork, DistanceSets};

/// Factor dividing the belief in edges ruled out by a cascade.
pub const PENALTY: f64 = 10.0;
/// Beliefs strictly above this become edges.
pub const THRESHOLD: f64 = 0.5;

/// `P(source → target)`, stored row = source. Off-diagonal entries stay in
/// `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProbabilities {
    probs: DMatrix<f64>,
}

impl EdgeProbabilities {
    /// Uninformative prior: every edge at exactly 0.5.
    pub fn new(n: usize) -> Self {
        let mut probs = DMatrix::from_element(n, n, 0.5);
        probs.fill_diagonal(0.0);
        Self { probs }
    }

    pub fn from_matrix(probs: DMatrix<f64>) -> Result<Self> {
        if !probs.is_square() {
            return param("edge probability matrix must be square");
        }
        let n = probs.nrows();
        for s in 0..n {
            for t in 0..n {
                if s != t && !(probs[(s, t)] > 0.0 && probs[(s, t)] <= 1.0) {
                    return param(format!("P({s} -> {t}) = {} outside (0, 1]", probs[(s, t)]));
                }
            }
        }
        Ok(Self { probs })
    }

    pub fn n(&self) -> usize {
        self.probs.nrows()
    }

    pub fn get(&self, source: usize, target: usize) -> f64 {
        self.probs[(source, target)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.probs
    }

    /// Edges whose belief is strictly above [`THRESHOLD`].
    pub fn threshold(&self) -> DirectedNetwork {
        let n = self.n();
        let mut net = DirectedNetwork::empty(n).expect("n >= 1");
        for s in 0..n {
            for t in 0..n {
                if s != t && self.probs[(s, t)] > THRESHOLD {
                    net.add_edge(s, t).expect("in range");
                }
            }
        }
        net
    }

    /// Comma-separated rows (row = source), six decimals, zero diagonal.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for s in 0..self.n() {
            let row: Vec<String> = (0..self.n()).map(|t| format!("{:.6}", self.probs[(s, t)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// One Bayesian sweep for the cascade observed after kicking `perturbed`.
pub fn pci_update(probs: &EdgeProbabilities, perturbed: usize, shells: &DistanceSets) -> Result<EdgeProbabilities> {
    let n = probs.n();
    if shells.source != perturbed {
        return param(format!(
            "distance sets are rooted at {} but node {perturbed} was perturbed",
            shells.source
        ));
    }
    shells.validate(n)?;
    let prior = &probs.probs;
    let mut next = prior.clone();
    let dist = shells.distances(n);

    for x in 0..n {
        let Some(k) = dist[x] else { continue };
        for y in 0..n {
            if y == x {
                continue;
            }
            match dist[y] {
                Some(m) if m == k + 1 => {
                    // log-space product keeps the denominator accurate when
                    // the beliefs are tiny
                    let log_none: f64 = shells.shell(k).iter().map(|&v| (-prior[(v, y)]).ln_1p()).sum();
                    let some = -log_none.exp_m1();
                    let updated = if some > 0.0 { prior[(x, y)] / some } else { 1.0 };
                    next[(x, y)] = updated.min(1.0);
                }
                Some(m) if m > k + 1 => next[(x, y)] = (prior[(x, y)] / PENALTY).max(f64::MIN_POSITIVE),
                None => next[(x, y)] = (prior[(x, y)] / PENALTY).max(f64::MIN_POSITIVE),
                _ => {}
            }
        }
    }
    Ok(EdgeProbabilities { probs: next })
}

/// Activation times after a kick, measured from the pulse onset.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRecord {
    pub perturbed: usize,
    /// `f64::INFINITY` for nodes that never cross the threshold.
    pub times: Vec<f64>,
    pub window: f64,
}

/// Pre-pulse reference: positions and rates just before the kick.
pub type Baseline = SystemState;

/// Response signal of each node relative to the pre-pulse baseline. For
/// Kuramoto phases the common drift `Ω · t` is removed as well, with `Ω` the
/// mean pre-pulse frequency (the synchronized frequency once locked).
pub fn response_signal(traj: &Trajectory, baseline: &Baseline, kind: ModelKind) -> DMatrix<f64> {
    let n = traj.n();
    let t0 = traj.times.first().copied().unwrap_or(0.0);
    let drift = match kind {
        ModelKind::Kuramoto if !baseline.v.is_empty() => baseline.v.iter().sum::<f64>() / baseline.v.len() as f64,
        _ => 0.0,
    };
    DMatrix::from_fn(n, traj.len(), |i, c| {
        let dev = traj.states[(i, c)] - baseline.x[i];
        match kind {
            ModelKind::MassSpring => dev.abs(),
            ModelKind::Kuramoto => (dev - drift * (traj.times[c] - t0)).abs(),
        }
    })
}

/// First time each node's response exceeds `eta` times the peak response of
/// the perturbed node.
pub fn detect_activation_times(
    traj: &Trajectory,
    baseline: &Baseline,
    perturbed: usize,
    eta: f64,
    kind: ModelKind,
) -> Result<ActivationRecord> {
    if traj.is_empty() {
        return param("cannot detect activations on an empty trajectory");
    }
    let n = traj.n();
    if perturbed >= n {
        return param(format!("perturbed node {perturbed} out of range for n = {n}"));
    }
    if baseline.x.len() != n || (kind == ModelKind::Kuramoto && baseline.v.len() != n) {
        return param("baseline does not match trajectory size");
    }
    let signal = response_signal(traj, baseline, kind);
    let peak = signal.row(perturbed).max();
    if !(peak > 0.0) {
        return Err(Error::DegeneratePulse { node: perturbed });
    }
    let level = eta * peak;
    let t0 = traj.times[0];
    let times = (0..n)
        .map(|i| {
            if i == perturbed {
                0.0
            } else {
                (0..traj.len())
                    .find(|&c| signal[(i, c)] > level)
                    .map(|c| traj.times[c] - t0)
                    .unwrap_or(f64::INFINITY)
            }
        })
        .collect();
    Ok(ActivationRecord {
        perturbed,
        times,
        window: traj.times[traj.len() - 1] - t0,
    })
}

/// Clusters activation times into distance shells.
///
/// The earliest activated node (other than the perturbed one) opens the first
/// shell. Walking up the sorted times, a new shell opens whenever the gap to
/// the previous time exceeds `gap_factor` times the reference gap, the lower
/// median of the positive consecutive gaps among activated nodes.
pub fn build_distance_sets(rec: &ActivationRecord, gap_factor: f64) -> Result<DistanceSets> {
    if !(gap_factor > 1.0) {
        return param(format!("gap factor must exceed 1, got {gap_factor}"));
    }
    let n = rec.times.len();
    if rec.perturbed >= n {
        return param("perturbed node out of range");
    }
    let mut active: Vec<usize> = (0..n)
        .filter(|&v| v != rec.perturbed && rec.times[v].is_finite())
        .collect();
    active.sort_by(|&a, &b| rec.times[a].total_cmp(&rec.times[b]).then(a.cmp(&b)));
    let unreachable: Vec<usize> = (0..n)
        .filter(|&v| v != rec.perturbed && !rec.times[v].is_finite())
        .collect();

    let mut gaps: Vec<f64> = active
        .windows(2)
        .map(|w| rec.times[w[1]] - rec.times[w[0]])
        .filter(|&g| g > 0.0)
        .collect();
    gaps.sort_by(f64::total_cmp);
    let reference = if gaps.is_empty() { f64::INFINITY } else { gaps[(gaps.len() - 1) / 2] };

    let mut shells: Vec<Vec<usize>> = Vec::new();
    let mut prev = f64::NAN;
    for &v in &active {
        let t = rec.times[v];
        if shells.is_empty() || t - prev > gap_factor * reference {
            shells.push(Vec::new());
        }
        shells.last_mut().expect("shell opened").push(v);
        prev = t;
    }
    for s in &mut shells {
        s.sort_unstable();
    }
    Ok(DistanceSets {
        source: rec.perturbed,
        shells,
        unreachable,
    })
}

/// Something that can be kicked at a node and report the resulting shells.
pub trait CascadeSource {
    fn n(&self) -> usize;
    fn observe(&mut self, node: usize) -> Result<DistanceSets>;
}

/// Exact shells from breadth-first search on a known network.
pub struct OracleCascade<'a> {
    pub net: &'a DirectedNetwork,
}

impl CascadeSource for OracleCascade<'_> {
    fn n(&self) -> usize {
        self.net.n()
    }

    fn observe(&mut self, node: usize) -> Result<DistanceSets> {
        if node >= self.net.n() {
            return param(format!("node {node} out of range"));
        }
        Ok(bfs_distance_sets(self.net, node))
    }
}

/// Knobs of a simulated perturbation experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationParams {
    pub force: f64,
    pub pulse_duration: f64,
    /// Observation length after pulse onset.
    pub window: f64,
    pub dt: f64,
    pub eta: f64,
    pub gap_factor: f64,
}

/// Kicks a simulated system from a fixed settled state and detects the
/// cascade.
pub struct SimulatedCascade<'a> {
    pub system: &'a System,
    pub rest: Baseline,
    pub params: PerturbationParams,
    /// Every trajectory observed so far, in perturbation order.
    pub records: Vec<(usize, Trajectory)>,
    pub keep_records: bool,
}

impl<'a> SimulatedCascade<'a> {
    pub fn new(system: &'a System, rest: Baseline, params: PerturbationParams) -> Self {
        Self {
            system,
            rest,
            params,
            records: Vec::new(),
            keep_records: false,
        }
    }

    pub fn kick(&self, node: usize) -> Result<Trajectory> {
        let p = &self.params;
        let pulse = impulse_forcing(node, p.force, 0.0, p.pulse_duration)?;
        self.system.simulate(&self.rest, &[pulse], p.window, p.dt)
    }
}

impl CascadeSource for SimulatedCascade<'_> {
    fn n(&self) -> usize {
        self.system.n()
    }

    fn observe(&mut self, node: usize) -> Result<DistanceSets> {
        let traj = self.kick(node)?;
        let rec = detect_activation_times(&traj, &self.rest, node, self.params.eta, self.system.kind())?;
        let shells = build_distance_sets(&rec, self.params.gap_factor)?;
        if self.keep_records {
            self.records.push((node, traj));
        }
        Ok(shells)
    }
}

#[derive(Debug)]
pub struct PciOutcome {
    pub network: DirectedNetwork,
    pub probs: EdgeProbabilities,
    /// Perturbations that could not be evaluated, with the reason.
    pub failures: Vec<(usize, Error)>,
    pub used: usize,
}

/// Kicks the first `count` nodes of `order` in turn, updating the edge
/// beliefs after each cascade, and thresholds the result.
pub fn pci_infer<C: CascadeSource>(source: &mut C, order: &[usize], count: usize) -> Result<PciOutcome> {
    let n = source.n();
    if count > n || count > order.len() {
        return param(format!("{count} perturbations requested for {n} nodes"));
    }
    let mut probs = EdgeProbabilities::new(n);
    let mut failures = Vec::new();
    let mut used = 0;
    for &p in &order[..count] {
        match source.observe(p).and_then(|shells| pci_update(&probs, p, &shells)) {
            Ok(next) => {
                probs = next;
                used += 1;
            }
            Err(e) => failures.push((p, e)),
        }
    }
    Ok(PciOutcome {
        network: probs.threshold(),
        probs,
        failures,
        used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsim::{MassSpringParams, Model};

    fn diamond() -> DirectedNetwork {
        // 0->1, 0->2, 1->3, 2->3
        DirectedNetwork::from_edges(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn four_node_first_update() {
        let net = diamond();
        let a = pci_update(&EdgeProbabilities::new(4), 0, &bfs_distance_sets(&net, 0)).unwrap();
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(0, 2), 1.0);
        assert!((a.get(1, 3) - 2.0 / 3.0).abs() < 1e-12);
        assert!((a.get(2, 3) - 2.0 / 3.0).abs() < 1e-12);
        assert!((a.get(0, 3) - 0.05).abs() < 1e-15);
        // same-shell and backward pairs untouched
        assert_eq!(a.get(1, 2), 0.5);
        assert_eq!(a.get(3, 0), 0.5);
    }

    #[test]
    fn case_one_only_leaves_matrix() {
        let a = EdgeProbabilities::new(3);
        let d = DistanceSets {
            source: 0,
            shells: vec![],
            unreachable: vec![1, 2],
        };
        let b = pci_update(&a, 0, &d).unwrap();
        // only the perturbed node's outgoing beliefs are penalized
        assert_eq!(b.get(1, 2), 0.5);
        assert_eq!(b.get(2, 1), 0.5);
        assert!((b.get(0, 1) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn single_cause_certainty() {
        let mut m = DMatrix::from_element(3, 3, 0.5);
        m[(1, 2)] = 0.2;
        let a = EdgeProbabilities::from_matrix(m).unwrap();
        let d = DistanceSets {
            source: 0,
            shells: vec![vec![1], vec![2]],
            unreachable: vec![],
        };
        let b = pci_update(&a, 0, &d).unwrap();
        assert_eq!(b.get(1, 2), 1.0);
    }

    #[test]
    fn malformed_partitions_rejected() {
        let a = EdgeProbabilities::new(3);
        let wrong_root = bfs_distance_sets(&DirectedNetwork::complete(3).unwrap(), 1);
        assert!(pci_update(&a, 0, &wrong_root).is_err());
        let broken = DistanceSets {
            source: 0,
            shells: vec![vec![1]],
            unreachable: vec![],
        };
        assert!(pci_update(&a, 0, &broken).is_err());
    }

    #[test]
    fn gap_clustering() {
        let rec = ActivationRecord {
            perturbed: 0,
            times: vec![0.0, 1.0, 1.05, 2.1, f64::INFINITY],
            window: 5.0,
        };
        let d = build_distance_sets(&rec, 2.0).unwrap();
        assert_eq!(d.shells, vec![vec![1, 2], vec![3]]);
        assert_eq!(d.unreachable, vec![4]);

        let flat = ActivationRecord {
            perturbed: 2,
            times: vec![0.7, 0.7, 0.0, 0.7],
            window: 1.0,
        };
        assert_eq!(build_distance_sets(&flat, 2.0).unwrap().shells, vec![vec![0, 1, 3]]);

        let alone = ActivationRecord {
            perturbed: 1,
            times: vec![f64::INFINITY, 0.0, f64::INFINITY],
            window: 1.0,
        };
        let d = build_distance_sets(&alone, 2.0).unwrap();
        assert!(d.shells.is_empty());
        assert_eq!(d.unreachable, vec![0, 2]);
        assert!(build_distance_sets(&alone, 1.0).is_err());
    }

    fn chain_system() -> System {
        let net = DirectedNetwork::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        System::new(net, Model::MassSpring(MassSpringParams::new(1.0))).unwrap()
    }

    #[test]
    fn chain_activation_order() {
        let sys = chain_system();
        let pulse = impulse_forcing(0, 10.0, 0.0, 0.5).unwrap();
        let traj = sys.simulate(&SystemState::zeros(3), &[pulse], 20.0, 0.01).unwrap();
        let rec = detect_activation_times(&traj, &SystemState::zeros(3), 0, 0.05, ModelKind::MassSpring).unwrap();
        assert_eq!(rec.times[0], 0.0);
        assert!(rec.times[0] < rec.times[1] && rec.times[1] < rec.times[2], "{:?}", rec.times);
        assert!(rec.times[2] <= rec.window);
    }

    #[test]
    fn unreachable_node_never_activates() {
        let net = DirectedNetwork::from_edges(3, &[(0, 1)]).unwrap();
        let sys = System::new(net, Model::MassSpring(MassSpringParams::new(1.0))).unwrap();
        let pulse = impulse_forcing(0, 10.0, 0.0, 0.5).unwrap();
        let traj = sys.simulate(&SystemState::zeros(3), &[pulse], 10.0, 0.01).unwrap();
        let rec = detect_activation_times(&traj, &SystemState::zeros(3), 0, 0.05, ModelKind::MassSpring).unwrap();
        assert_eq!(rec.times[2], f64::INFINITY);
    }

    #[test]
    fn zero_pulse_is_degenerate() {
        let sys = chain_system();
        let traj = sys.simulate(&SystemState::zeros(3), &[], 2.0, 0.01).unwrap();
        let err = detect_activation_times(&traj, &SystemState::zeros(3), 0, 0.05, ModelKind::MassSpring).unwrap_err();
        assert!(matches!(err, Error::DegeneratePulse { node: 0 }));
    }

    #[test]
    fn prior_only_when_nothing_perturbed() {
        let net = diamond();
        let out = pci_infer(&mut OracleCascade { net: &net }, &[0, 1, 2, 3], 0).unwrap();
        assert_eq!(out.network.edge_count(), 0);
        assert!(out.probs.as_matrix().iter().enumerate().all(|(i, &p)| i % 5 == 0 || p == 0.5));
        assert!(pci_infer(&mut OracleCascade { net: &net }, &[0, 1, 2, 3], 5).is_err());
    }

    #[test]
    fn probability_csv_format() {
        let csv = EdgeProbabilities::new(2).to_csv();
        assert_eq!(csv, "0.000000,0.500000\n0.500000,0.000000\n");
    }
}
