mod common;

use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rlck_mor::freq::{
    evaluate_at, evaluate_tf, export_sweep, h_to_s, max_relative_error, parse_csv,
    parse_touchstone, ExportFormat, FrequencyGrid, FrequencySweep, Spacing, SweepKind,
};
use rlck_mor::gen::Benchmark;
use rlck_mor::{assemble_mna, parse_netlist, MorError};

fn sweep(points: Vec<f64>, samples: Vec<DMatrix<Complex64>>, kind: SweepKind) -> FrequencySweep {
    FrequencySweep {
        grid: FrequencyGrid::from_points(points).unwrap(),
        samples,
        kind,
    }
}

#[test]
fn conjugate_symmetry_at_negative_frequencies() {
    let sys = build(Benchmark::CoupledLines { lines: 2, sections: 6, density: 0.5 }, 9);
    for f in [1e7, 3.3e8, 4e9, 2.5e10] {
        let pos = evaluate_at(&sys, f).unwrap();
        let neg = evaluate_at(&sys, -f).unwrap();
        assert!((neg - pos.conjugate()).norm() <= 1e-12 * pos.norm());
    }
}

#[test]
fn parallel_tank_peaks_at_resonance() {
    let (l, c) = (1e-9f64, 1e-12f64);
    let text = format!("R1 1 0 1k\nL1 1 0 {l:e}\nC1 1 0 {c:e}\nP1 port 1\n");
    let sys = assemble_mna(&parse_netlist(&text).unwrap()).unwrap().system;
    let f_res = 1.0 / (2.0 * std::f64::consts::PI * (l * c).sqrt());
    let grid = FrequencyGrid::linear(1e9, 1e10, 91).unwrap();
    let step = grid.points()[1] - grid.points()[0];
    let h = evaluate_tf(&sys, &grid).unwrap();
    let peak = (0..grid.len())
        .max_by(|&a, &b| h.samples[a][(0, 0)].norm().total_cmp(&h.samples[b][(0, 0)].norm()))
        .unwrap();
    assert!((grid.points()[peak] - f_res).abs() <= step);
}

#[test]
fn scattering_of_passive_fixtures_is_contractive() {
    let grid = FrequencyGrid::new(1e7, 1e11, 40, Spacing::Logarithmic).unwrap();
    for (label, sys) in desk_suite() {
        let s = h_to_s(&evaluate_tf(&sys, &grid).unwrap(), 50.0).unwrap();
        for m in &s.samples {
            let top = m.clone().svd(false, false).singular_values[0];
            assert!(top <= 1.0 + 1e-6, "{label}: {top}");
        }
    }
}

#[test]
fn scaled_sweep_error() {
    let sys = build(Benchmark::Ladder { sections: 5, ports: 2 }, 1);
    let a = evaluate_tf(&sys, &FrequencyGrid::linear(1e8, 1e10, 20).unwrap()).unwrap();
    let mut b = a.clone();
    for m in &mut b.samples {
        *m *= Complex64::new(1.01, 0.0);
    }
    assert!((max_relative_error(&a, &b).unwrap() - 0.01).abs() <= 1e-12);
    assert_eq!(max_relative_error(&a, &a).unwrap(), 0.0);
    let other = evaluate_tf(&sys, &FrequencyGrid::linear(1e8, 1e10, 21).unwrap()).unwrap();
    assert!(matches!(max_relative_error(&a, &other), Err(MorError::GridMismatch)));
}

fn golden_sweep() -> FrequencySweep {
    let samples = [0.25, 0.5]
        .iter()
        .map(|&im| DMatrix::from_fn(3, 3, |i, j| Complex64::new((3 * i + j + 1) as f64 / 8.0, -im)))
        .collect();
    sweep(vec![1e9, 2e9], samples, SweepKind::Scattering { z0: 50.0 })
}

#[test]
fn three_port_touchstone_matches_golden_file() {
    let golden = include_str!("fixtures/three_port.s3p");
    assert_eq!(export_sweep(&golden_sweep(), ExportFormat::Touchstone).unwrap(), golden);
    let back = parse_touchstone(golden, 3).unwrap();
    assert_eq!(back.samples, golden_sweep().samples);
}

#[test]
fn five_port_rows_wrap_after_four_pairs() {
    let s = DMatrix::from_fn(5, 5, |i, j| Complex64::new(i as f64, j as f64));
    let sw = sweep(vec![1e9], vec![s.clone()], SweepKind::Scattering { z0: 50.0 });
    let text = export_sweep(&sw, ExportFormat::Touchstone).unwrap();
    let data: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(data.len(), 10);
    let pairs: Vec<usize> = data.iter().map(|l| l.split_whitespace().count() / 2).collect();
    assert_eq!(pairs, vec![4, 1, 4, 1, 4, 1, 4, 1, 4, 1]);
    assert!(data[0].starts_with("1e9 "));
    assert_eq!(parse_touchstone(&text, 5).unwrap().samples[0], s);
}

#[test]
fn impedance_sweep_is_rejected_by_touchstone() {
    let sys = build(Benchmark::Ladder { sections: 2, ports: 1 }, 1);
    let h = evaluate_tf(&sys, &FrequencyGrid::linear(1e8, 1e9, 2).unwrap()).unwrap();
    assert!(export_sweep(&h, ExportFormat::Touchstone).is_err());
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e12f64..1e12, -1e-9f64..1e-9, Just(0.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exports_round_trip(
        ports in 1usize..6,
        npts in 1usize..5,
        vals in proptest::collection::vec((finite(), finite()), 150),
        z0 in 1.0f64..200.0,
    ) {
        let points: Vec<f64> = (0..npts).map(|k| 1e8 * (k as f64 + 1.0) + 0.123).collect();
        let mut it = vals.iter().cycle();
        let samples: Vec<DMatrix<Complex64>> = (0..npts)
            .map(|_| DMatrix::from_fn(ports, ports, |_, _| {
                let (re, im) = it.next().unwrap();
                Complex64::new(*re, *im)
            }))
            .collect();
        let s = sweep(points.clone(), samples.clone(), SweepKind::Scattering { z0 });
        let ts = parse_touchstone(&export_sweep(&s, ExportFormat::Touchstone).unwrap(), ports).unwrap();
        prop_assert_eq!(&ts.samples, &samples);
        prop_assert_eq!(ts.grid.points(), &points[..]);
        prop_assert_eq!(ts.kind, SweepKind::Scattering { z0 });
        for kind in [SweepKind::Impedance, SweepKind::Scattering { z0 }] {
            let sw = sweep(points.clone(), samples.clone(), kind);
            let back = parse_csv(&export_sweep(&sw, ExportFormat::Csv).unwrap()).unwrap();
            prop_assert_eq!(&back.samples, &samples);
            prop_assert_eq!(back.kind, kind);
        }
    }
}
