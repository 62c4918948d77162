use netinf::dynsim::{
    impulse_forcing, mechanical_energy, order_parameter, KuramotoParams, MassSpringParams, Model, System, SystemState, Trajectory,
};
use netinf::network::{erdos_renyi, DirectedNetwork};
use proptest::prelude::*;

fn symmetric(n: usize, seed: u64) -> DirectedNetwork {
    let mut g = erdos_renyi(n, 0.5, seed).unwrap();
    for (s, t) in g.edges() {
        g.add_edge(t, s).unwrap();
    }
    g
}

fn settled_pair(x0: f64) -> SystemState {
    SystemState { x: vec![x0, -x0], v: vec![0.0, 0.0] }
}

#[test]
fn energy_never_increases_with_damping() {
    let g = symmetric(6, 3);
    let params = MassSpringParams::new(2.0);
    let sys = System::new(g.clone(), Model::MassSpring(params.clone())).unwrap();
    let init = SystemState {
        x: vec![0.5, -0.2, 0.1, 0.9, -0.7, 0.3],
        v: vec![0.0, 0.4, -0.1, 0.0, 0.2, -0.3],
    };
    let traj = sys.simulate(&init, &[], 10.0, 1e-3).unwrap();
    let energy: Vec<f64> = (0..traj.len())
        .map(|c| {
            let x: Vec<f64> = traj.states.column(c).iter().copied().collect();
            let v: Vec<f64> = traj.rates.column(c).iter().copied().collect();
            mechanical_energy(&g, &params, &x, &v)
        })
        .collect();
    assert!(energy.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    assert!(energy.last().unwrap() < &(0.5 * energy[0]));
}

#[test]
fn undamped_energy_is_conserved() {
    let g = symmetric(4, 8);
    let params = MassSpringParams {
        damping: 0.0,
        ..MassSpringParams::new(1.0)
    };
    let sys = System::new(g.clone(), Model::MassSpring(params.clone())).unwrap();
    let init = SystemState { x: vec![0.3, -0.1, 0.0, 0.2], v: vec![0.0; 4] };
    let traj = sys.simulate(&init, &[], 20.0, 1e-2).unwrap();
    let e0 = mechanical_energy(&g, &params, &init.x, &init.v);
    let end = SystemState::last_of(&traj);
    assert!((mechanical_energy(&g, &params, &end.x, &end.v) - e0).abs() < 1e-6 * e0.max(1.0));
}

#[test]
fn pulse_moves_only_its_downstream() {
    // 0 -> 1, node 2 isolated; walls are on nodes 0 and 2
    let g = DirectedNetwork::from_edges(3, &[(0, 1)]).unwrap();
    let sys = System::new(g, Model::MassSpring(MassSpringParams::new(1.0))).unwrap();
    let f = impulse_forcing(0, 5.0, 0.0, 0.5).unwrap();
    let traj = sys.simulate(&SystemState::zeros(3), &[f], 5.0, 0.01).unwrap();
    let peak = |i: usize| traj.states.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak(0) > 0.1);
    assert!(peak(1) > 1e-3);
    assert_eq!(peak(2), 0.0);
}

#[test]
fn strong_coupling_synchronizes_complete_graph() {
    let g = DirectedNetwork::complete(6).unwrap();
    let sys = System::new(g, Model::Kuramoto(KuramotoParams::with_random_omega(6, 10.0, 0.5, 1))).unwrap();
    let init = SystemState { x: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], v: vec![0.0; 6] };
    let traj = sys.simulate(&init, &[], 30.0, 0.01).unwrap();
    let last = SystemState::last_of(&traj);
    assert!(order_parameter(&last.x) > 0.95);
}

#[test]
fn symmetric_masses_mirror() {
    // antisymmetric start on a symmetric pair stays antisymmetric
    let g = DirectedNetwork::from_edges(2, &[(0, 1), (1, 0)]).unwrap();
    let sys = System::new(g, Model::MassSpring(MassSpringParams::new(1.5))).unwrap();
    let traj = sys.simulate(&settled_pair(0.4), &[], 8.0, 0.01).unwrap();
    for c in 0..traj.len() {
        assert!((traj.states[(0, c)] + traj.states[(1, c)]).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trajectory_csv_round_trips(seed in any::<u64>(), n in 1usize..5, k in 0.1f64..5.0) {
        let sys = System::new(erdos_renyi(n, 0.5, seed).unwrap(), Model::MassSpring(MassSpringParams::new(k))).unwrap();
        let init = SystemState { x: (0..n).map(|i| (i as f64 * 0.37 + seed as f64 * 1e-3).sin()).collect(), v: vec![0.0; n] };
        let traj = sys.simulate(&init, &[], 1.0, 0.01).unwrap();
        prop_assert_eq!(Trajectory::from_csv(&traj.to_csv()).unwrap(), traj);
    }

    #[test]
    fn decimation_keeps_every_step(step in 1usize..20) {
        let sys = System::new(DirectedNetwork::complete(2).unwrap(), Model::MassSpring(MassSpringParams::new(1.0))).unwrap();
        let traj = sys.simulate(&settled_pair(0.1), &[], 2.0, 0.01).unwrap();
        let d = traj.decimate(step);
        prop_assert_eq!(d.len(), traj.len().div_ceil(step));
        for (i, &t) in d.times.iter().enumerate() {
            prop_assert_eq!(t, traj.times[i * step]);
        }
    }
}
