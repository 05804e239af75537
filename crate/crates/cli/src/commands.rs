use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use rlck_mor::bt::{hankel_singular_values, solve_gramians_dense};
use rlck_mor::bundle::{load_model, write_atomic, write_rom, Model};
use rlck_mor::freq::{evaluate_tf, h_to_s, max_relative_error, relative_errors, to_long_csv};
use rlck_mor::gen::{generate, Benchmark};
use rlck_mor::linalg::spectral_norm;
use rlck_mor::{
    assemble_mna, parse_netlist, reduce_dense, reduce_eksm, regularize, DescriptorSystem, LinearModel,
    OrderRequest, Rom,
};

use crate::config::{Method, RunConfig, RunFlags};
use crate::report::Report;
use crate::CliError;

/// Largest state count accepted by `hsv`, which always takes the dense path.
pub const DENSE_MAX_ORDER: usize = 4000;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

/// A directory is read as a matrix bundle, anything else as a netlist.
fn load_input(path: &Path, cfg: &RunConfig) -> Result<Model, CliError> {
    let model = if path.is_dir() {
        load_model(path)?
    } else {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let netlist = parse_netlist(&text)?;
        let assembly = assemble_mna(&netlist)?;
        if !assembly.floating_nodes.is_empty() {
            eprintln!(
                "warning: nodes without a DC path to ground: {}",
                assembly.floating_nodes.join(", ")
            );
        }
        Model::Full(assembly.system)
    };
    match (model, cfg.c_min) {
        (Model::Full(sys), Some(c_min)) => Ok(Model::Full(regularize(&sys, c_min)?)),
        (model, _) => Ok(model),
    }
}

/// Full systems as-is; a ROM becomes an `r`-state system with no branches.
fn into_descriptor(model: Model) -> Result<DescriptorSystem, CliError> {
    match model {
        Model::Full(sys) => Ok(sys),
        Model::Reduced(rom) => {
            let r = rom.order();
            Ok(DescriptorSystem::from_matrices(rom.g, rom.c, rom.b, rom.l, r, 0, rom.port_names)?)
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(|e| io_err(path, e))
}

fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_report(dir: &Path, stem: &str, report: &Report) -> Result<(), CliError> {
    write_text(&dir.join(format!("{stem}.txt")), &report.to_text())?;
    write_text(&dir.join(format!("{stem}.json")), &report.to_json())
}

pub fn reduce(input: &Path, flags: &RunFlags) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(flags)?;
    let sys = into_descriptor(load_input(input, &cfg)?)?;
    let grid = cfg.grid()?;

    let start = Instant::now();
    let (rom, trace): (Rom, _) = match cfg.method {
        Method::Dense => (reduce_dense(&sys, OrderRequest::TargetError(cfg.target_error))?, None),
        Method::Eksm => {
            let red = reduce_eksm(&sys, &cfg.eksm())?;
            (red.rom, Some(red.trace))
        }
    };
    let wall = start.elapsed().as_secs_f64();

    let full = evaluate_tf(&sys, &grid)?;
    let reduced = evaluate_tf(&rom, &grid)?;
    let error = max_relative_error(&full, &reduced)?;

    let order = sys.order();
    let (iterations, stop_reason, peak_p, peak_q) = match &trace {
        Some(t) => (
            t.iterations(),
            t.stop_reason.as_str(),
            t.records.iter().map(|r| r.basis_p).max().unwrap_or(0),
            t.records.iter().map(|r| r.basis_q).max().unwrap_or(0),
        ),
        None => (0, "none", order, order),
    };

    let mut report = Report::new();
    report
        .put("input", input.display().to_string())
        .put("method", cfg.method.as_str())
        .put("N", order)
        .put("n", sys.n)
        .put("m", sys.m)
        .put("p", sys.inputs())
        .put("q", sys.outputs())
        .put("r", rom.order())
        .put("iterations", iterations)
        .put("stop_reason", stop_reason)
        .put("basis_p_peak", peak_p)
        .put("basis_q_peak", peak_q)
        .put_f64("tol", cfg.tol)
        .put_f64("target_error", cfg.target_error)
        .put_f64("apriori_bound", rom.apriori_bound)
        .put_f64("max_relative_error", error)
        .put_f64("wall_time_s", wall);

    prepare_out_dir(&cfg.out_dir)?;
    write_rom(&cfg.out_dir.join("rom"), &rom)?;
    if let Some(t) = &trace {
        write_text(&cfg.out_dir.join("trace.csv"), &t.to_csv())?;
    }
    write_report(&cfg.out_dir, "summary", &report)?;
    print!("{}", report.to_text());
    Ok(())
}

pub fn compare(path_a: &Path, path_b: &Path, flags: &RunFlags) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(flags)?;
    let a = load_input(path_a, &cfg)?;
    let b = load_input(path_b, &cfg)?;
    let (la, lb) = (a.as_linear(), b.as_linear());
    if (la.inputs(), la.outputs()) != (lb.inputs(), lb.outputs()) {
        return Err(CliError::usage(format!(
            "port mismatch: {} has {}x{} ports, {} has {}x{}",
            path_a.display(),
            la.outputs(),
            la.inputs(),
            path_b.display(),
            lb.outputs(),
            lb.inputs()
        )));
    }
    let grid = cfg.grid()?;
    let ha = evaluate_tf(la, &grid)?;
    let hb = evaluate_tf(lb, &grid)?;
    let rel = relative_errors(&ha, &hb)?;
    let error = rel.iter().copied().fold(0.0, f64::max);
    let sa = h_to_s(&ha, cfg.z0)?;
    let sb = h_to_s(&hb, cfg.z0)?;

    // Worst single S-entry deviation: linear magnitude of the difference,
    // plus the largest |dB| and phase gaps over all entries.
    let mut worst = (0.0f64, 0.0, 0, 0);
    let mut worst_db = 0.0f64;
    let mut worst_phase = 0.0f64;
    let mut table = String::from("f_hz,norm_h_a,norm_diff,relative_error,s_max_abs_deviation\n");
    let mut norm_min = f64::INFINITY;
    for (k, &f) in grid.points().iter().enumerate() {
        let norm_a = spectral_norm(&ha.samples[k]);
        norm_min = norm_min.min(norm_a);
        let diff = spectral_norm(&(&ha.samples[k] - &hb.samples[k]));
        let (x, y) = (&sa.samples[k], &sb.samples[k]);
        let mut row_worst = 0.0f64;
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                let dev = (x[(i, j)] - y[(i, j)]).norm();
                row_worst = row_worst.max(dev);
                if dev > worst.0 {
                    worst = (dev, f, i + 1, j + 1);
                }
                let db = 20.0 * (x[(i, j)].norm().log10() - y[(i, j)].norm().log10());
                if db.is_finite() {
                    worst_db = worst_db.max(db.abs());
                }
                let mut phase = (x[(i, j)].arg() - y[(i, j)].arg()).to_degrees().abs();
                if phase > 180.0 {
                    phase = 360.0 - phase;
                }
                worst_phase = worst_phase.max(phase);
            }
        }
        let _ = writeln!(table, "{f:e},{norm_a:e},{diff:e},{:e},{row_worst:e}", rel[k]);
    }

    let mut report = Report::new();
    report
        .put("model_a", path_a.display().to_string())
        .put("model_b", path_b.display().to_string())
        .put("order_a", la.order())
        .put("order_b", lb.order())
        .put("points", grid.len())
        .put_f64("z0", cfg.z0)
        .put_f64("max_relative_error", error)
        .put_f64("s_max_abs_deviation", worst.0)
        .put_f64("s_worst_f_hz", worst.1)
        .put("s_worst_i", worst.2)
        .put("s_worst_j", worst.3)
        .put_f64("s_max_db_deviation", worst_db)
        .put_f64("s_max_phase_deviation_deg", worst_phase);
    if let Model::Reduced(rom) = &b {
        // The a-priori bound holds pointwise in absolute terms, so dividing
        // by the smallest reference norm bounds the relative metric.
        let relative_bound = rom.apriori_bound / norm_min;
        report
            .put_f64("apriori_bound", rom.apriori_bound)
            .put_f64("min_norm_h_a", norm_min)
            .put_f64("relative_bound", relative_bound)
            .put_f64("bound_slack", relative_bound / cfg.target_error);
    }

    prepare_out_dir(&cfg.out_dir)?;
    write_text(&cfg.out_dir.join("comparison.csv"), &table)?;
    write_text(&cfg.out_dir.join("s_a.csv"), &to_long_csv(&sa))?;
    write_text(&cfg.out_dir.join("s_b.csv"), &to_long_csv(&sb))?;
    write_report(&cfg.out_dir, "comparison", &report)?;
    print!("{}", report.to_text());
    print!("{table}");
    Ok(())
}

pub fn hsv(input: &Path, flags: &RunFlags) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(flags)?;
    let sys = into_descriptor(load_input(input, &cfg)?)?;
    if sys.order() > DENSE_MAX_ORDER {
        return Err(CliError::usage(format!(
            "hsv uses dense Gramians; N = {} exceeds the limit of {DENSE_MAX_ORDER}",
            sys.order()
        )));
    }
    let spectrum = hankel_singular_values(&solve_gramians_dense(&sys)?)?;
    let mut csv = String::from("r,sigma,tail_bound\n");
    for (k, s) in spectrum.sigmas().iter().enumerate() {
        let _ = writeln!(csv, "{},{s:e},{:e}", k + 1, spectrum.bound(k + 1));
    }
    prepare_out_dir(&cfg.out_dir)?;
    write_text(&cfg.out_dir.join("hsv.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GenKind {
    Ladder,
    Mesh,
    CoupledLines,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    kind: GenKind,
    /// Sections per ladder or line.
    #[arg(long, default_value_t = 10)]
    sections: usize,
    /// Ports on a ladder or mesh (coupled lines always have two per line).
    #[arg(long, default_value_t = 1)]
    ports: usize,
    #[arg(long, default_value_t = 4)]
    rows: usize,
    #[arg(long, default_value_t = 4)]
    cols: usize,
    #[arg(long, default_value_t = 2)]
    lines: usize,
    /// Fraction of candidate inductor pairs that get a mutual coupling.
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn gen(args: &GenArgs) -> Result<(), CliError> {
    let bench = match args.kind {
        GenKind::Ladder => Benchmark::Ladder { sections: args.sections, ports: args.ports },
        GenKind::Mesh => Benchmark::Mesh { rows: args.rows, cols: args.cols, ports: args.ports },
        GenKind::CoupledLines => Benchmark::CoupledLines {
            lines: args.lines,
            sections: args.sections,
            density: args.density,
        },
    };
    let text = generate(bench, args.seed)?;
    match &args.output {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
