use netinf::network::{bfs_distance_sets, DirectedNetwork, DistanceSets};
use netinf::pci::{pci_infer, pci_update, EdgeProbabilities, OracleCascade, PENALTY};
use proptest::prelude::*;

fn graph(n: usize, bits: &[bool]) -> DirectedNetwork {
    let mut g = DirectedNetwork::empty(n).unwrap();
    let mut it = bits.iter();
    for s in 0..n {
        for t in 0..n {
            if s != t && *it.next().unwrap() {
                g.add_edge(s, t).unwrap();
            }
        }
    }
    g
}

fn arb_graph() -> impl Strategy<Value = DirectedNetwork> {
    (2usize..=7).prop_flat_map(|n| prop::collection::vec(any::<bool>(), n * (n - 1)).prop_map(move |b| graph(n, &b)))
}

/// Shells built from arbitrary distance labels (0 = unreachable), compacted
/// so that no shell is empty.
fn shells_from_labels(source: usize, labels: &[usize]) -> DistanceSets {
    let n = labels.len();
    let mut shells = vec![Vec::new(); n];
    let mut unreachable = Vec::new();
    for (v, &d) in labels.iter().enumerate() {
        if v == source {
            continue;
        }
        if d == 0 {
            unreachable.push(v);
        } else {
            shells[d - 1].push(v);
        }
    }
    shells.retain(|s: &Vec<usize>| !s.is_empty());
    DistanceSets { source, shells, unreachable }
}

fn arb_sequence() -> impl Strategy<Value = (usize, Vec<(usize, Vec<usize>)>)> {
    (2usize..=6).prop_flat_map(|n| {
        let step = (0..n, prop::collection::vec(0..n, n));
        (Just(n), prop::collection::vec(step, 1..12))
    })
}

proptest! {
    #[test]
    fn entries_stay_in_unit_interval((n, steps) in arb_sequence()) {
        let mut a = EdgeProbabilities::new(n);
        for (p, labels) in steps {
            let d = shells_from_labels(p, &labels);
            let b = pci_update(&a, p, &d).unwrap();
            let dist = d.distances(n);
            for x in 0..n {
                for y in (0..n).filter(|&y| y != x) {
                    let (old, new) = (a.get(x, y), b.get(x, y));
                    prop_assert!(new > 0.0 && new <= 1.0);
                    match (dist[x], dist[y]) {
                        (Some(k), Some(m)) if m == k + 1 => prop_assert!(new >= old),
                        (Some(k), Some(m)) if m > k + 1 => prop_assert_eq!(new, old / PENALTY),
                        (Some(_), None) => prop_assert_eq!(new, old / PENALTY),
                        _ => prop_assert_eq!(new, old),
                    }
                }
            }
            a = b;
        }
    }

    /// Relabeling nodes before the update is the same as relabeling after,
    /// so the update reads only the prior snapshot, never a half-updated one.
    #[test]
    fn update_is_label_equivariant((n, steps) in arb_sequence(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let relabel = |d: &DistanceSets| DistanceSets {
            source: perm[d.source],
            shells: d.shells.iter().map(|s| { let mut s: Vec<usize> = s.iter().map(|&v| perm[v]).collect(); s.sort(); s }).collect(),
            unreachable: { let mut u: Vec<usize> = d.unreachable.iter().map(|&v| perm[v]).collect(); u.sort(); u },
        };
        let mut a = EdgeProbabilities::new(n);
        let mut b = EdgeProbabilities::new(n);
        for (p, labels) in steps {
            let d = shells_from_labels(p, &labels);
            a = pci_update(&a, p, &d).unwrap();
            b = pci_update(&b, perm[p], &relabel(&d)).unwrap();
        }
        for x in 0..n {
            for y in (0..n).filter(|&y| y != x) {
                // shell order changes the summation order, so allow rounding
                prop_assert!((a.get(x, y) - b.get(perm[x], perm[y])).abs() < 1e-12);
            }
        }
    }

    /// With exact shells every true edge ends at probability 1 (up to
    /// rounding), so the reconstruction never misses an edge.
    #[test]
    fn oracle_shells_recover_every_edge(g in arb_graph()) {
        let order: Vec<usize> = (0..g.n()).collect();
        let out = pci_infer(&mut OracleCascade { net: &g }, &order, g.n()).unwrap();
        for (s, t) in g.edges() {
            prop_assert!(out.probs.get(s, t) > 1.0 - 1e-12);
            prop_assert!(out.network.has_edge(s, t));
        }
        prop_assert!(out.failures.is_empty());
    }

    #[test]
    fn bfs_shells_are_partitions(g in arb_graph(), root in 0usize..7) {
        let root = root % g.n();
        let d = bfs_distance_sets(&g, root);
        prop_assert!(d.validate(g.n()).is_ok());
        for (s, t) in g.edges() {
            if let Some(ds) = d.distance(s) {
                let dt = d.distance(t);
                prop_assert!(dt.is_some_and(|dt| dt <= ds + 1));
            }
        }
    }
}

#[test]
fn acyclic_reconstruction_is_exact() {
    // a layered DAG in which no edge skips a layer
    let g = DirectedNetwork::from_edges(6, &[(0, 1), (0, 2), (1, 3), (2, 3), (2, 4), (3, 5), (4, 5)]).unwrap();
    let order: Vec<usize> = (0..6).collect();
    let out = pci_infer(&mut OracleCascade { net: &g }, &order, 6).unwrap();
    assert_eq!(out.network, g);
}

#[test]
fn one_kick_on_a_path() {
    let g = DirectedNetwork::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
    let out = pci_infer(&mut OracleCascade { net: &g }, &[0], 1).unwrap();
    assert_eq!(out.used, 1);
    // consecutive shells are single nodes, so each link is certain
    assert_eq!(out.network, g);
    // pointing back toward the kicked node is never evidence either way
    for (x, y) in [(2, 0), (2, 1), (3, 1), (1, 0)] {
        assert_eq!(out.probs.get(x, y), 0.5);
    }
    assert!((out.probs.get(0, 3) - 0.05).abs() < 1e-15);
}
