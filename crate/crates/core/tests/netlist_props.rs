mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rlck_mor::freq::{evaluate_tf, FrequencyGrid};
use rlck_mor::gen::{generate, Benchmark};
use rlck_mor::netlist::Assembly;
use rlck_mor::{assemble_mna, parse_netlist, DescriptorSystem};

fn assemble(text: &str) -> Assembly {
    assemble_mna(&parse_netlist(text).unwrap()).unwrap()
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    m == &m.transpose()
}

fn assert_structure(sys: &DescriptorSystem) {
    let (n, m) = (sys.n, sys.m);
    let big_n = n + m;
    assert_eq!(sys.g.shape(), (big_n, big_n));
    let gn = -sys.g.view((0, 0), (n, n)).into_owned();
    let cn = sys.c.view((0, 0), (n, n)).into_owned();
    let mm = sys.c.view((n, n), (m, m)).into_owned();
    assert!(is_symmetric(&gn) && is_symmetric(&cn) && is_symmetric(&mm));
    let psd_floor = |x: &DMatrix<f64>| -1e-12 * x.norm();
    assert!(gn.clone().symmetric_eigen().eigenvalues.min() >= psd_floor(&gn));
    assert!(cn.clone().symmetric_eigen().eigenvalues.min() >= psd_floor(&cn));
    if m > 0 {
        assert!(mm.clone().cholesky().is_some(), "M must be positive definite");
        assert!(sys.c.view((0, n), (n, m)).iter().all(|&v| v == 0.0));
        assert!(sys.c.view((n, 0), (m, n)).iter().all(|&v| v == 0.0));
        // G = -[[Gn, E], [-Eᵀ, 0]]
        let e = -sys.g.view((0, n), (n, m)).into_owned();
        assert!(e.iter().all(|&v| v == 0.0 || v == 1.0 || v == -1.0));
        assert_eq!(sys.g.view((n, 0), (m, n)).into_owned(), e.transpose());
        assert!(sys.g.view((n, n), (m, m)).iter().all(|&v| v == 0.0));
    }
    assert!(sys.b.rows(n, m).iter().all(|&v| v == 0.0));
    assert!(sys.l.columns(n, m).iter().all(|&v| v == 0.0));
    assert_eq!(sys.l, sys.b.transpose());
}

#[test]
fn generated_systems_have_descriptor_structure() {
    for (_, sys) in desk_suite() {
        assert_structure(&sys);
    }
}

#[test]
fn transfer_function_is_symmetric() {
    let grid = FrequencyGrid::linear(1e8, 1e10, 7).unwrap();
    for (_, sys) in desk_suite().into_iter().filter(|(_, s)| s.b.ncols() > 1) {
        for h in evaluate_tf(&sys, &grid).unwrap().samples {
            assert!((&h - h.transpose()).norm() <= 1e-10 * h.norm());
        }
    }
}

/// Permutation taking the states of `from` to the states of `to`, matched by
/// node name and branch id.
fn state_map(from: &Assembly, from_nl: &[String], to: &Assembly, to_nl: &[String]) -> Vec<usize> {
    let n = from_nl.len();
    let mut map = Vec::with_capacity(from.system.g.nrows());
    for name in from_nl {
        map.push(to_nl.iter().position(|x| x == name).unwrap());
    }
    for id in &from.branch_ids {
        map.push(n + to.branch_ids.iter().position(|x| x == id).unwrap());
    }
    map
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn element_order_does_not_change_stamps(seed in any::<u64>(), kind in 0usize..3) {
        let bench = match kind {
            0 => Benchmark::Ladder { sections: 6, ports: 2 },
            1 => Benchmark::Mesh { rows: 2, cols: 3, ports: 2 },
            _ => Benchmark::CoupledLines { lines: 3, sections: 4, density: 0.8 },
        };
        let text = generate(bench, seed % 1000).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.shuffle(&mut rng(seed));
        let shuffled = lines.join("\n");

        let (nl_a, nl_b) = (parse_netlist(&text).unwrap(), parse_netlist(&shuffled).unwrap());
        let (a, b) = (assemble_mna(&nl_a).unwrap(), assemble_mna(&nl_b).unwrap());
        let map = state_map(&a, &nl_a.node_names, &b, &nl_b.node_names);
        let port_map: Vec<usize> = a
            .system
            .port_names
            .iter()
            .map(|p| b.system.port_names.iter().position(|x| x == p).unwrap())
            .collect();
        let big_n = map.len();
        for i in 0..big_n {
            for j in 0..big_n {
                prop_assert_eq!(a.system.g[(i, j)], b.system.g[(map[i], map[j])]);
                prop_assert_eq!(a.system.c[(i, j)], b.system.c[(map[i], map[j])]);
            }
            for (k, &pk) in port_map.iter().enumerate() {
                prop_assert_eq!(a.system.b[(i, k)], b.system.b[(map[i], pk)]);
            }
        }
    }

    #[test]
    fn order_is_nodes_plus_branches(sections in 1usize..30, ports in 1usize..4, seed in any::<u64>()) {
        let ports = ports.min(sections + 1);
        let nl = parse_netlist(&generate(Benchmark::Ladder { sections, ports }, seed).unwrap()).unwrap();
        let sys = assemble_mna(&nl).unwrap().system;
        prop_assert_eq!(sys.n, nl.node_count());
        prop_assert_eq!(sys.m, nl.inductors().count());
        prop_assert_eq!(sys.g.nrows(), sys.n + sys.m);
        assert_structure(&sys);
    }
}

#[test]
fn rl_series_incidence() {
    let asm = assemble("R1 1 2 10\nL1 2 0 1e-9\nC1 1 0 1e-12\nC2 2 0 1e-12\nP1 port 1\n");
    let sys = &asm.system;
    assert_eq!((sys.n, sys.m), (2, 1));
    // E(node 2, branch 1) = +1 appears as G(2, 3) = -1 and G(3, 2) = +1.
    assert_eq!(sys.g[(1, 2)], -1.0);
    assert_eq!(sys.g[(2, 1)], 1.0);
    assert_structure(sys);
}
