//! Directed networks: random generators, centrality orderings and BFS
//! distance shells.

use std::collections::VecDeque;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Boolean adjacency with `adj[target][source]` layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DirectedNetwork {
    n: usize,
    adj: Vec<bool>,
}

impl DirectedNetwork {
    /// Edgeless network on `n` nodes.
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return param("network needs at least one node");
        }
        Ok(Self {
            n,
            adj: vec![false; n * n],
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut net = Self::empty(n)?;
        for t in 0..n {
            for s in 0..n {
                if s != t {
                    net.adj[t * n + s] = true;
                }
            }
        }
        Ok(net)
    }

    /// Build from `(source, target)` pairs.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut net = Self::empty(n)?;
        for &(s, t) in edges {
            net.add_edge(s, t)?;
        }
        Ok(net)
    }

    /// Build from a row-major `adj[target][source]` matrix. The diagonal must
    /// be false.
    pub fn from_adjacency(rows: &[Vec<bool>]) -> Result<Self> {
        let n = rows.len();
        let mut net = Self::empty(n)?;
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n {
                return param(format!("adjacency row {t} has length {}, expected {n}", row.len()));
            }
            for (s, &e) in row.iter().enumerate() {
                if e {
                    net.add_edge(s, t)?;
                }
            }
        }
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `true` when `source` drives `target`.
    pub fn has_edge(&self, source: usize, target: usize) -> bool {
        self.adj[target * self.n + source]
    }

    pub fn add_edge(&mut self, source: usize, target: usize) -> Result<()> {
        if source >= self.n || target >= self.n {
            return param(format!("edge {source}->{target} out of range for n = {}", self.n));
        }
        if source == target {
            return param(format!("self-loop on node {source}"));
        }
        self.adj[target * self.n + source] = true;
        Ok(())
    }

    pub fn remove_edge(&mut self, source: usize, target: usize) {
        self.adj[target * self.n + source] = false;
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&e| e).count()
    }

    /// All edges as `(source, target)`, sorted by source then target.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for s in 0..self.n {
            for t in 0..self.n {
                if self.has_edge(s, t) {
                    out.push((s, t));
                }
            }
        }
        out
    }

    pub fn out_degree(&self, node: usize) -> usize {
        (0..self.n).filter(|&t| self.has_edge(node, t)).count()
    }

    pub fn in_degree(&self, node: usize) -> usize {
        (0..self.n).filter(|&s| self.has_edge(s, node)).count()
    }

    /// Sources feeding each node, indexed by target.
    pub fn in_neighbors(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|t| (0..self.n).filter(|&s| self.has_edge(s, t)).collect())
            .collect()
    }

    /// Targets of each node, indexed by source.
    pub fn out_neighbors(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|s| (0..self.n).filter(|&t| self.has_edge(s, t)).collect())
            .collect()
    }

    /// Relabel nodes: node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return param("permutation length does not match node count");
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || seen[p] {
                return param("not a permutation");
            }
            seen[p] = true;
        }
        let mut out = Self::empty(self.n)?;
        for (s, t) in self.edges() {
            out.adj[perm[t] * self.n + perm[s]] = true;
        }
        Ok(out)
    }

    /// Dense 0/1 matrix in `adj[target][source]` layout.
    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |t, s| if self.has_edge(s, t) { 1.0 } else { 0.0 })
    }

    /// `true` when every edge has its reverse.
    pub fn is_symmetric(&self) -> bool {
        self.edges().iter().all(|&(s, t)| self.has_edge(t, s))
    }

    pub fn to_file_format(&self) -> NetworkFile {
        NetworkFile {
            n: self.n,
            edges: self.edges().into_iter().map(|(s, t)| [s, t]).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file_format()).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_network()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk network: `{"n": 4, "edges": [[source, target], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl NetworkFile {
    pub fn into_network(self) -> Result<DirectedNetwork> {
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        DirectedNetwork::from_edges(self.n, &edges)
    }
}

// ---------------------------------------------------------------------------
// generators

/// Each ordered off-diagonal pair is present independently with
/// probability `p_conn`.
pub fn erdos_renyi(n: usize, p_conn: f64, seed: u64) -> Result<DirectedNetwork> {
    if !(0.0..=1.0).contains(&p_conn) {
        return param(format!("connection probability {p_conn} outside [0, 1]"));
    }
    let mut net = DirectedNetwork::empty(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..n {
        for s in 0..n {
            if s != t && rng.random_bool(p_conn) {
                net.adj[t * n + s] = true;
            }
        }
    }
    Ok(net)
}

/// Erdős–Rényi graph with a bidirectionally complete clique planted on
/// `clique_size` randomly chosen nodes.
pub fn erdos_renyi_with_clique(n: usize, p_conn: f64, clique_size: usize, seed: u64) -> Result<DirectedNetwork> {
    if clique_size == 0 || clique_size > n {
        return param(format!("clique size {clique_size} must lie in [1, {n}]"));
    }
    let mut net = erdos_renyi(n, p_conn, seed)?;
    let members = clique_members(n, clique_size, seed);
    for &a in &members {
        for &b in &members {
            if a != b {
                net.adj[a * n + b] = true;
            }
        }
    }
    Ok(net)
}

/// Nodes that [`erdos_renyi_with_clique`] turns into a clique for this seed.
pub fn clique_members(n: usize, clique_size: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(&mut rng);
    let mut members = labels[..clique_size.min(n)].to_vec();
    members.sort_unstable();
    members
}

/// Preferential attachment grown from a complete seed on `m_attach` nodes.
/// Every attachment is stored in both directions; attachment weights are
/// the undirected degree.
pub fn barabasi_albert(n: usize, m_attach: usize, seed: u64) -> Result<DirectedNetwork> {
    if m_attach == 0 || m_attach >= n {
        return param(format!("attachment count {m_attach} must lie in [1, {})", n));
    }
    let mut net = DirectedNetwork::empty(n)?;
    let mut degree = vec![0usize; n];
    let link = |net: &mut DirectedNetwork, degree: &mut [usize], a: usize, b: usize| {
        net.adj[a * n + b] = true;
        net.adj[b * n + a] = true;
        degree[a] += 1;
        degree[b] += 1;
    };
    for a in 0..m_attach {
        for b in (a + 1)..m_attach {
            link(&mut net, &mut degree, a, b);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for new in m_attach..n {
        let mut chosen: Vec<usize> = Vec::with_capacity(m_attach);
        while chosen.len() < m_attach {
            let candidates: Vec<usize> = (0..new).filter(|v| !chosen.contains(v)).collect();
            let total: usize = candidates.iter().map(|&v| degree[v]).sum();
            let pick = if total == 0 {
                candidates[rng.random_range(0..candidates.len())]
            } else {
                let mut r = rng.random_range(0..total);
                let mut pick = candidates[candidates.len() - 1];
                for &v in &candidates {
                    if r < degree[v] {
                        pick = v;
                        break;
                    }
                    r -= degree[v];
                }
                pick
            };
            chosen.push(pick);
        }
        for v in chosen {
            link(&mut net, &mut degree, new, v);
        }
    }
    Ok(net)
}

// ---------------------------------------------------------------------------
// centrality

/// Nodes by decreasing outdegree, ties by ascending index.
pub fn outdegree_order(net: &DirectedNetwork) -> Vec<usize> {
    let mut order: Vec<usize> = (0..net.n()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(net.out_degree(v)), v));
    order
}

/// Out-closeness: `r² / ((n - 1) · Σ dist)` over the `r` nodes reachable
/// from `node`; zero when nothing is reachable.
pub fn outcloseness(net: &DirectedNetwork, node: usize) -> f64 {
    let shells = bfs_distance_sets(net, node);
    let reachable: usize = shells.shells.iter().map(Vec::len).sum();
    if reachable == 0 {
        return 0.0;
    }
    let total: usize = shells.shells.iter().enumerate().map(|(k, s)| (k + 1) * s.len()).sum();
    (reachable * reachable) as f64 / ((net.n() - 1) * total) as f64
}

/// Nodes by decreasing out-closeness, ties by ascending index.
pub fn outcloseness_order(net: &DirectedNetwork) -> Vec<usize> {
    let scores: Vec<f64> = (0..net.n()).map(|v| outcloseness(net, v)).collect();
    let mut order: Vec<usize> = (0..net.n()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

// ---------------------------------------------------------------------------
// distance shells

/// Partition of the nodes other than `source` by shortest directed distance
/// from `source`. `shells[0]` holds distance 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceSets {
    pub source: usize,
    pub shells: Vec<Vec<usize>>,
    pub unreachable: Vec<usize>,
}

impl DistanceSets {
    /// Distance of `v` from the source: `Some(0)` for the source itself,
    /// `None` for unreachable nodes.
    pub fn distance(&self, v: usize) -> Option<usize> {
        if v == self.source {
            return Some(0);
        }
        self.shells.iter().position(|s| s.contains(&v)).map(|k| k + 1)
    }

    /// Per-node distance table; `None` marks unreachable.
    pub fn distances(&self, n: usize) -> Vec<Option<usize>> {
        let mut d = vec![None; n];
        if self.source < n {
            d[self.source] = Some(0);
        }
        for (k, shell) in self.shells.iter().enumerate() {
            for &v in shell {
                if v < n {
                    d[v] = Some(k + 1);
                }
            }
        }
        d
    }

    /// Members at distance `k`, with distance 0 being the source alone.
    pub fn shell(&self, k: usize) -> &[usize] {
        if k == 0 {
            std::slice::from_ref(&self.source)
        } else {
            self.shells.get(k - 1).map(Vec::as_slice).unwrap_or(&[])
        }
    }

    /// Checks that shells, unreachable and source partition `0..n`, with
    /// every shell non-empty.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.source >= n {
            return param(format!("source {} out of range for n = {n}", self.source));
        }
        let mut seen = vec![false; n];
        seen[self.source] = true;
        for (k, shell) in self.shells.iter().enumerate() {
            if shell.is_empty() {
                return param(format!("distance shell {} is empty", k + 1));
            }
        }
        for &v in self.shells.iter().flatten().chain(self.unreachable.iter()) {
            if v >= n {
                return param(format!("node {v} out of range for n = {n}"));
            }
            if seen[v] {
                return param(format!("node {v} appears twice in the distance partition"));
            }
            seen[v] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return param(format!("node {missing} missing from the distance partition"));
        }
        Ok(())
    }
}

/// Exact breadth-first shells along directed edges out of `source`.
pub fn bfs_distance_sets(net: &DirectedNetwork, source: usize) -> DistanceSets {
    let n = net.n();
    let out = net.out_neighbors();
    let mut dist = vec![usize::MAX; n];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in &out[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let depth = dist.iter().filter(|&&d| d != usize::MAX).max().copied().unwrap_or(0);
    let mut shells = vec![Vec::new(); depth];
    let mut unreachable = Vec::new();
    for (v, &d) in dist.iter().enumerate() {
        match d {
            0 => {}
            usize::MAX => unreachable.push(v),
            d => shells[d - 1].push(v),
        }
    }
    DistanceSets {
        source,
        shells,
        unreachable,
    }
}
