#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlck_mor::gen::{generate, Benchmark};
use rlck_mor::{assemble_mna, parse_netlist, DescriptorSystem};

pub fn build(bench: Benchmark, seed: u64) -> DescriptorSystem {
    let text = generate(bench, seed).expect("generator");
    assemble_mna(&parse_netlist(&text).expect("parse")).expect("assemble").system
}

/// Twenty generated RLCk systems with `N ≤ 200`.
pub fn desk_suite() -> Vec<(String, DescriptorSystem)> {
    let benches = [
        Benchmark::Ladder { sections: 3, ports: 1 },
        Benchmark::Ladder { sections: 8, ports: 2 },
        Benchmark::Ladder { sections: 15, ports: 1 },
        Benchmark::Ladder { sections: 25, ports: 3 },
        Benchmark::Ladder { sections: 40, ports: 2 },
        Benchmark::Ladder { sections: 60, ports: 4 },
        Benchmark::Mesh { rows: 2, cols: 3, ports: 2 },
        Benchmark::Mesh { rows: 3, cols: 3, ports: 1 },
        Benchmark::Mesh { rows: 3, cols: 4, ports: 3 },
        Benchmark::Mesh { rows: 4, cols: 4, ports: 2 },
        Benchmark::Mesh { rows: 4, cols: 5, ports: 4 },
        Benchmark::Mesh { rows: 5, cols: 5, ports: 2 },
        Benchmark::CoupledLines { lines: 1, sections: 6, density: 0.0 },
        Benchmark::CoupledLines { lines: 2, sections: 5, density: 0.3 },
        Benchmark::CoupledLines { lines: 2, sections: 12, density: 0.5 },
        Benchmark::CoupledLines { lines: 2, sections: 20, density: 0.3 },
        Benchmark::CoupledLines { lines: 3, sections: 8, density: 0.7 },
        Benchmark::CoupledLines { lines: 3, sections: 15, density: 0.3 },
        Benchmark::CoupledLines { lines: 4, sections: 10, density: 1.0 },
        Benchmark::CoupledLines { lines: 2, sections: 30, density: 0.2 },
    ];
    benches
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let sys = build(*b, 100 + i as u64);
            assert!(sys.g.nrows() <= 200, "{b:?}");
            (format!("{b:?}"), sys)
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        // Box-Muller
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    })
}

/// Random matrix shifted left past its Gershgorin discs, hence stable.
pub fn random_stable(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let mut a = gaussian_matrix(rng, k, k);
    let radius = (0..k)
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let shift = radius + rng.random_range(0.1..1.0);
    for i in 0..k {
        a[(i, i)] -= shift;
    }
    a
}

/// Solves `A X + X Aᵀ = −W` through the `k² × k²` Kronecker system.
pub fn lyapunov_kronecker(a: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let k = a.nrows();
    let eye = DMatrix::<f64>::identity(k, k);
    let op = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(k * k, 1, w.as_slice());
    let x = op.lu().solve(&rhs).expect("nonsingular Kronecker operator");
    DMatrix::from_column_slice(k, k, x.as_slice())
}

pub fn rel_fro(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
