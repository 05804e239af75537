//! Synthetic RLCk benchmark netlists.
//!
//! Every generator is deterministic for a given seed. Element values are
//! drawn uniformly within ±20 % of a nominal value:
//!
//! | element                 | nominal  |
//! |-------------------------|----------|
//! | series inductance       | 0.5 nH   |
//! | node capacitance        | 0.2 pF   |
//! | node leakage resistance | 200 Ω    |
//! | series resistance       | 20 Ω     |
//! | port termination        | 50 Ω     |
//!
//! Every node has a capacitor and a resistor to ground, so `C` is
//! nonsingular, `G` is nonsingular and every mode is damped. Mutual
//! couplings in `coupled_lines` are drawn from `0.05..0.4` and accepted only
//! while each inductor's total `Σ|k|` stays at or below 0.9, which keeps the
//! inductance matrix diagonally dominant after scaling and hence positive
//! definite.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MorError, Result};

const L_NOM: f64 = 0.5e-9;
const C_NOM: f64 = 0.2e-12;
const R_LEAK_NOM: f64 = 200.0;
const R_SERIES_NOM: f64 = 20.0;
const R_PORT: f64 = 50.0;
const K_RANGE: (f64, f64) = (0.05, 0.4);
const K_BUDGET: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Benchmark {
    /// Chain of `sections` series inductors between `sections + 1` nodes.
    Ladder { sections: usize, ports: usize },
    /// `rows × cols` grid; each edge is a series resistor, a middle node
    /// and a series inductor.
    Mesh { rows: usize, cols: usize, ports: usize },
    /// `lines` parallel chains of series R–L sections, a port at both ends
    /// of each line and inductive coupling between neighbouring lines.
    /// `density` is the fraction of candidate inductor pairs that receive a
    /// coupling.
    CoupledLines { lines: usize, sections: usize, density: f64 },
}

impl Benchmark {
    /// State count `n + m` of the assembled system.
    pub fn order(&self) -> usize {
        match *self {
            Benchmark::Ladder { sections, .. } => 2 * sections + 1,
            Benchmark::Mesh { rows, cols, .. } => {
                let edges = rows * (cols - 1) + cols * (rows - 1);
                rows * cols + 2 * edges
            }
            Benchmark::CoupledLines { lines, sections, .. } => lines * (3 * sections + 1),
        }
    }

    pub fn ports(&self) -> usize {
        match *self {
            Benchmark::Ladder { ports, .. } | Benchmark::Mesh { ports, .. } => ports,
            Benchmark::CoupledLines { lines, .. } => 2 * lines,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(MorError::validation(msg.to_string()));
        match *self {
            Benchmark::Ladder { sections, ports } => {
                if sections == 0 {
                    return bad("ladder needs at least one section");
                }
                if ports == 0 || ports > sections + 1 {
                    return bad("ladder ports must be between 1 and sections + 1");
                }
            }
            Benchmark::Mesh { rows, cols, ports } => {
                if rows == 0 || cols == 0 || rows * cols < 2 {
                    return bad("mesh needs at least two grid nodes");
                }
                if ports == 0 || ports > rows * cols {
                    return bad("mesh ports must be between 1 and rows * cols");
                }
            }
            Benchmark::CoupledLines { lines, sections, density } => {
                if lines == 0 || sections == 0 {
                    return bad("coupled lines need at least one line and one section");
                }
                if !(0.0..=1.0).contains(&density) {
                    return bad("coupling density must lie in [0, 1]");
                }
            }
        }
        Ok(())
    }
}

struct Writer {
    rng: ChaCha8Rng,
    text: String,
    counts: [usize; 5],
}

impl Writer {
    fn new(seed: u64, header: String) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            text: header,
            counts: [0; 5],
        }
    }

    fn jitter(&mut self, nominal: f64) -> f64 {
        nominal * self.rng.random_range(0.8..=1.2)
    }

    fn next_id(&mut self, slot: usize) -> usize {
        self.counts[slot] += 1;
        self.counts[slot]
    }

    fn resistor(&mut self, a: &str, b: &str, ohms: f64) {
        let id = self.next_id(0);
        let _ = writeln!(self.text, "R{id} {a} {b} {ohms:e}");
    }

    fn capacitor(&mut self, a: &str, b: &str, farads: f64) {
        let id = self.next_id(1);
        let _ = writeln!(self.text, "C{id} {a} {b} {farads:e}");
    }

    /// Returns the inductor's branch id.
    fn inductor(&mut self, a: &str, b: &str, henries: f64) -> String {
        let id = self.next_id(2);
        let _ = writeln!(self.text, "L{id} {a} {b} {henries:e}");
        format!("L{id}")
    }

    fn coupling(&mut self, li: &str, lj: &str, k: f64) {
        let id = self.next_id(3);
        let _ = writeln!(self.text, "K{id} {li} {lj} {k:e}");
    }

    fn port(&mut self, node: &str) {
        let id = self.next_id(4);
        self.resistor(node, "0", R_PORT);
        let _ = writeln!(self.text, "P{id} port {node}");
    }

    /// Shunt capacitor and leakage resistor to ground.
    fn shunt(&mut self, node: &str) {
        let c = self.jitter(C_NOM);
        self.capacitor(node, "0", c);
        let r = self.jitter(R_LEAK_NOM);
        self.resistor(node, "0", r);
    }

    /// `a`–R–`mid`–L–`b` with a shunt at `mid`; returns the inductor id.
    fn series_rl(&mut self, a: &str, mid: &str, b: &str) -> String {
        let r = self.jitter(R_SERIES_NOM);
        self.resistor(a, mid, r);
        self.shunt(mid);
        let l = self.jitter(L_NOM);
        self.inductor(mid, b, l)
    }
}

/// `count` distinct indices spread evenly over `0..n`.
fn spread(n: usize, count: usize) -> Vec<usize> {
    if count == 1 {
        return vec![0];
    }
    (0..count).map(|k| k * (n - 1) / (count - 1)).collect()
}

/// Generates a netlist for `bench`, deterministic in `seed`.
pub fn generate(bench: Benchmark, seed: u64) -> Result<String> {
    bench.validate()?;
    let header = format!("* {bench:?} seed={seed}\n");
    let mut w = Writer::new(seed, header);
    match bench {
        Benchmark::Ladder { sections, ports } => {
            let nodes: Vec<String> = (1..=sections + 1).map(|i| format!("n{i}")).collect();
            for node in &nodes {
                w.shunt(node);
            }
            for pair in nodes.windows(2) {
                let l = w.jitter(L_NOM);
                w.inductor(&pair[0], &pair[1], l);
            }
            for i in spread(nodes.len(), ports) {
                w.port(&nodes[i]);
            }
        }
        Benchmark::Mesh { rows, cols, ports } => {
            let name = |r: usize, c: usize| format!("g{r}_{c}");
            for r in 0..rows {
                for c in 0..cols {
                    w.shunt(&name(r, c));
                }
            }
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    if c + 1 < cols {
                        edges.push((name(r, c), name(r, c + 1)));
                    }
                    if r + 1 < rows {
                        edges.push((name(r, c), name(r + 1, c)));
                    }
                }
            }
            for (e, (a, b)) in edges.iter().enumerate() {
                w.series_rl(a, &format!("e{e}"), b);
            }
            for i in spread(rows * cols, ports) {
                w.port(&name(i / cols, i % cols));
            }
        }
        Benchmark::CoupledLines { lines, sections, density } => {
            let mut inductors: Vec<Vec<String>> = Vec::with_capacity(lines);
            for line in 0..lines {
                let nodes: Vec<String> = (0..=sections).map(|i| format!("w{line}_{i}")).collect();
                for node in &nodes {
                    w.shunt(node);
                }
                let mut ids = Vec::with_capacity(sections);
                for (i, pair) in nodes.windows(2).enumerate() {
                    ids.push(w.series_rl(&pair[0], &format!("m{line}_{i}"), &pair[1]));
                }
                inductors.push(ids);
                w.port(&nodes[0]);
                w.port(&nodes[sections]);
            }
            // Candidates: same and adjacent sections on neighbouring lines.
            let mut budget = vec![vec![0.0f64; sections]; lines];
            for line in 0..lines.saturating_sub(1) {
                for s in 0..sections {
                    for t in s.saturating_sub(1)..(s + 2).min(sections) {
                        if !w.rng.random_bool(density) {
                            continue;
                        }
                        let k = w.rng.random_range(K_RANGE.0..K_RANGE.1);
                        if budget[line][s] + k > K_BUDGET || budget[line + 1][t] + k > K_BUDGET {
                            continue;
                        }
                        budget[line][s] += k;
                        budget[line + 1][t] += k;
                        let (li, lj) = (inductors[line][s].clone(), inductors[line + 1][t].clone());
                        w.coupling(&li, &lj, k);
                    }
                }
            }
        }
    }
    Ok(w.text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{assemble_mna, parse_netlist, Element};

    fn build(bench: Benchmark, seed: u64) -> crate::system::DescriptorSystem {
        let nl = parse_netlist(&generate(bench, seed).unwrap()).unwrap();
        assemble_mna(&nl).unwrap().system
    }

    #[test]
    fn ladder_three_sections_has_order_seven() {
        let bench = Benchmark::Ladder { sections: 3, ports: 1 };
        let sys = build(bench, 1);
        assert_eq!((sys.n, sys.m, sys.g.nrows()), (4, 3, 7));
        assert_eq!(bench.order(), 7);
    }

    #[test]
    fn predicted_orders_match() {
        for bench in [
            Benchmark::Ladder { sections: 10, ports: 3 },
            Benchmark::Mesh { rows: 3, cols: 4, ports: 2 },
            Benchmark::CoupledLines { lines: 3, sections: 5, density: 0.5 },
        ] {
            let sys = build(bench, 9);
            assert_eq!(sys.g.nrows(), bench.order(), "{bench:?}");
            assert_eq!(sys.b.ncols(), bench.ports(), "{bench:?}");
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let bench = Benchmark::CoupledLines { lines: 2, sections: 8, density: 0.3 };
        assert_eq!(generate(bench, 5).unwrap(), generate(bench, 5).unwrap());
        assert_ne!(generate(bench, 5).unwrap(), generate(bench, 6).unwrap());
    }

    #[test]
    fn couplings_are_admissible() {
        let bench = Benchmark::CoupledLines { lines: 4, sections: 30, density: 1.0 };
        let nl = parse_netlist(&generate(bench, 3).unwrap()).unwrap();
        let ks: Vec<f64> = nl
            .elements
            .iter()
            .filter_map(|e| match e {
                Element::MutualCoupling { k, .. } => Some(*k),
                _ => None,
            })
            .collect();
        assert!(!ks.is_empty());
        assert!(ks.iter().all(|k| k.abs() < 1.0));
        assemble_mna(&nl).unwrap();
    }

    #[test]
    fn rejects_bad_sizes() {
        for bench in [
            Benchmark::Ladder { sections: 0, ports: 1 },
            Benchmark::Ladder { sections: 2, ports: 4 },
            Benchmark::Mesh { rows: 1, cols: 1, ports: 1 },
            Benchmark::CoupledLines { lines: 2, sections: 3, density: 1.5 },
        ] {
            assert!(matches!(generate(bench, 0), Err(MorError::Validation(_))));
        }
    }
}
