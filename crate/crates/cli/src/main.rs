//! `dqd` — experiment driver for the double-dot charge qubit toolkit.
//!
//! Every verb reads one flat JSON run configuration, writes plain CSV /
//! state files plus a `manifest.json` (config echo, code version, wall
//! time) into the output directory, and prints a one-line summary.
//! Plotting is left to the emitted gnuplot scripts.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use dqd_core::bench::{bit_identity_gate, run_bench, BackendChoice};
use dqd_core::control::{self, PulseKind, PulseSpec};
use dqd_core::error::{DqdError, Result};
use dqd_core::grid::Grid;
use dqd_core::potential::calibrate_lambda;
use dqd_core::propagator::{max_stable_dt, ObserverSpec, Propagator};
use dqd_core::qubit_basis::{self, Device, QubitBasis};
use dqd_core::stationary;
use dqd_core::units::UEV_PER_MEV;
use dqd_core::wavefunction::Wavefunction;

use config::{linspace, steprange, RunConfig};

#[derive(Parser)]
#[command(name = "dqd", version, about = "double-dot charge qubit experiments")]
struct Cli {
    /// Run-configuration file (flat JSON); defaults describe the
    /// reference device.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for data files and the run manifest.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,

    /// Single-worker deterministic mode (the path golden tests pin).
    #[arg(long, global = true)]
    serial: bool,

    /// Sweep worker threads; 0 keeps the library default.
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    workers: usize,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Sweep the bias slope and write the two lowest levels.
    Eigens,
    /// Fit the detuning constant λ and report the splitting Δ.
    Calibrate,
    /// Build the qubit basis, D map, and localisation curves.
    Basis,
    /// Locate the state-preparation optimum (t_p, A).
    Prepare,
    /// Map the Rabi oscillation amplitude over pulse detunings.
    Sweep,
    /// Reconstruct one pulse's Bloch rotation, or certify a scan.
    Tomography,
    /// Convert right-dot probabilities into qubit populations.
    Readout {
        /// A single measured probability P_R.
        #[arg(long = "p-r", value_name = "P", conflicts_with = "trace")]
        p_r: Option<f64>,
        /// A stored trace CSV with `p_right` (and optionally `time_ps`)
        /// columns, e.g. prepare_trace.csv.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
    },
    /// Time the kernel backends after a bit-identity check.
    Bench,
}

impl Verb {
    fn name(&self) -> &'static str {
        match self {
            Verb::Eigens => "eigens",
            Verb::Calibrate => "calibrate",
            Verb::Basis => "basis",
            Verb::Prepare => "prepare",
            Verb::Sweep => "sweep",
            Verb::Tomography => "tomography",
            Verb::Readout { .. } => "readout",
            Verb::Bench => "bench",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    let workers = if cli.serial {
        1
    } else if cli.workers != 0 {
        cli.workers
    } else {
        cfg.workers
    };
    if workers != 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| DqdError::Config(format!("thread pool: {e}")))?;
    }
    fs::create_dir_all(&cli.out)?;

    let t0 = Instant::now();
    let outputs = match &cli.verb {
        Verb::Eigens => cmd_eigens(&cfg, &cli.out)?,
        Verb::Calibrate => cmd_calibrate(&cfg, &cli.out)?,
        Verb::Basis => cmd_basis(&cfg, &cli.out)?,
        Verb::Prepare => cmd_prepare(&cfg, &cli.out)?,
        Verb::Sweep => cmd_sweep(&cfg, &cli.out)?,
        Verb::Tomography => cmd_tomography(&cfg, &cli.out)?,
        Verb::Readout { p_r, trace } => cmd_readout(&cfg, &cli.out, *p_r, trace.as_deref())?,
        Verb::Bench => cmd_bench(&cfg, &cli.out)?,
    };
    write_manifest(&cli.out, cli.verb.name(), &cfg, t0.elapsed().as_secs_f64(), &outputs)
}

// -----------------------------------------------------------------------
// shared plumbing
// -----------------------------------------------------------------------

fn write_manifest(
    out: &Path,
    verb: &str,
    cfg: &RunConfig,
    wall_s: f64,
    outputs: &[String],
) -> Result<()> {
    let manifest = serde_json::json!({
        "verb": verb,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_s": wall_s,
        "outputs": outputs,
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| DqdError::Config(format!("manifest serialisation: {e}")))?;
    fs::write(out.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn write_json(out: &Path, name: &str, value: &serde_json::Value) -> Result<String> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| DqdError::Config(format!("{name}: {e}")))?;
    fs::write(out.join(name), text + "\n")?;
    Ok(name.to_string())
}

fn write_text(out: &Path, name: &str, text: &str) -> Result<String> {
    fs::write(out.join(name), text)?;
    Ok(name.to_string())
}

/// State file: whitespace-separated (x, Re ψ, Im ψ) rows.
fn write_state(out: &Path, name: &str, psi: &Wavefunction, grid: &Grid) -> Result<String> {
    let mut s = String::from("# x_nm re im\n");
    for m in 0..grid.n_points {
        s += &format!("{} {} {}\n", grid.x(m), psi.re[m], psi.im[m]);
    }
    write_text(out, name, &s)
}

/// Eigensolve-grid device (n_points); the grid's dt slot is unused by the
/// stationary solvers.
fn eigen_device(cfg: &RunConfig) -> Result<(Device, f64)> {
    let grid = Grid::symmetric(cfg.half_width_nm, cfg.n_points, 1.0)?;
    let units = cfg.units();
    let report =
        calibrate_lambda(&cfg.params(), &units, &grid, cfg.calibration_span_mev, cfg.calibration_samples)?;
    let dev = Device::new(cfg.params(), grid, units, report.lambda)?;
    Ok((dev, report.max_residual))
}

struct PropSetup {
    dev: Device,
    basis: QubitBasis,
    prop: Propagator,
    dt: f64,
}

/// Propagation-grid device, basis, propagator, and the stable step for a
/// run whose detuning never exceeds `worst_eps_uev` in magnitude. λ is
/// recalibrated on the coarse grid so the pulse → slope conversion is
/// self-consistent with the propagated Hamiltonian.
fn propagation_setup(cfg: &RunConfig, worst_eps_uev: f64) -> Result<PropSetup> {
    let p = cfg.params();
    let units = cfg.units();
    let grid = Grid::symmetric(cfg.half_width_nm, cfg.propagation_n_points, 1.0)?;
    let report =
        calibrate_lambda(&p, &units, &grid, cfg.calibration_span_mev, cfg.calibration_samples)?;
    let dev = Device::new(p, grid.clone(), units, report.lambda)?;
    let basis = qubit_basis::qubit_basis(&dev)?;
    let worst_slope = dev.slope_for(worst_eps_uev.abs()).abs();
    let est = max_stable_dt(&p, worst_slope, &grid, &units);
    let prop = Propagator::dqd(&p, &grid, &units);
    Ok(PropSetup { dev, basis, prop, dt: est.dt_ps * cfg.dt_scale })
}

// -----------------------------------------------------------------------
// eigens
// -----------------------------------------------------------------------

fn cmd_eigens(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let p = cfg.params();
    let units = cfg.units();
    let grid = Grid::symmetric(cfg.half_width_nm, cfg.n_points, 1.0)?;
    let slopes = linspace(-cfg.eigens_slope_span_mev, cfg.eigens_slope_span_mev, cfg.eigens_samples);

    let rows: Vec<Result<(f64, f64, f64)>> = slopes
        .par_iter()
        .map(|&v| {
            let h = stationary::build_hamiltonian(&p, v, &grid, &units);
            let pair = stationary::lowest_eigenpairs(&h, 2, &grid)?;
            Ok((v, pair[0].energy, pair[1].energy))
        })
        .collect();

    let mut csv = String::from("v_slope_mev,e_b_mev,e_ab_mev\n");
    let mut written = 0usize;
    let mut last_err = None;
    let mut min_split = f64::INFINITY;
    let mut min_split_at = f64::NAN;
    for (v, row) in slopes.iter().zip(rows) {
        match row {
            Ok((v, e_b, e_ab)) => {
                if e_ab - e_b < min_split {
                    min_split = e_ab - e_b;
                    min_split_at = v;
                }
                csv += &format!("{v},{e_b},{e_ab}\n");
                written += 1;
            }
            Err(e) => {
                eprintln!("error: {}: v_slope = {v}: {e}", e.kind());
                last_err = Some(e);
            }
        }
    }
    if written == 0 {
        return Err(last_err.expect("no rows implies at least one error"));
    }

    let gp = "\
# gnuplot: the two lowest levels against the bias slope
set datafile separator ','
set xlabel 'v_{slope} (meV)'
set ylabel 'E (meV)'
plot 'eigens.csv' skip 1 using 1:2 with lines title 'E_B', \\
     'eigens.csv' skip 1 using 1:3 with lines title 'E_{AB}'
";
    let files = vec![
        write_text(out, "eigens.csv", &csv)?,
        write_text(out, "eigens.gp", gp)?,
    ];
    println!(
        "eigens: {written} points, minimal splitting {:.4} ueV at v_slope = {:.6} meV",
        min_split * UEV_PER_MEV,
        min_split_at
    );
    Ok(files)
}

// -----------------------------------------------------------------------
// calibrate
// -----------------------------------------------------------------------

fn cmd_calibrate(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let grid = Grid::symmetric(cfg.half_width_nm, cfg.n_points, 1.0)?;
    let report = calibrate_lambda(
        &cfg.params(),
        &cfg.units(),
        &grid,
        cfg.calibration_span_mev,
        cfg.calibration_samples,
    )?;

    let mut csv = String::from("v_slope_mev,eps_mev\n");
    for &(v, eps) in &report.samples {
        csv += &format!("{v},{eps}\n");
    }
    let summary = serde_json::json!({
        "lambda": report.lambda,
        "max_residual": report.max_residual,
        "delta_mev": report.delta_mev,
        "delta_uev": report.delta_mev * UEV_PER_MEV,
    });
    let files = vec![
        write_text(out, "calibration.csv", &csv)?,
        write_json(out, "calibration.json", &summary)?,
    ];
    println!(
        "calibrate: lambda = {:.6} (residual {:.3e}), delta = {:.4} ueV",
        report.lambda,
        report.max_residual,
        report.delta_mev * UEV_PER_MEV
    );
    Ok(files)
}

// -----------------------------------------------------------------------
// basis
// -----------------------------------------------------------------------

fn cmd_basis(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let (dev, _) = eigen_device(cfg)?;
    let mut basis = qubit_basis::qubit_basis(&dev)?;
    let range = qubit_basis::operating_range(
        &dev,
        &basis,
        cfg.range_threshold,
        cfg.range_eps_max_uev,
        cfg.range_samples,
    )?;
    basis.operating_range_uev = Some(range);

    let eps = linspace(-cfg.d_map_eps_max_uev, cfg.d_map_eps_max_uev, cfg.d_map_samples);
    let map = qubit_basis::d_map(&dev, &eps)?;
    let optimal = qubit_basis::d_map_optimal_column(&eps, &map);

    // long-format D map; a blank line between rows keeps gnuplot's pm3d happy
    let mut d_csv = String::from("eps_i_uev,eps_j_uev,d\n");
    for (i, row) in map.iter().enumerate() {
        for (j, d) in row.iter().enumerate() {
            d_csv += &format!("{},{},{}\n", eps[i], eps[j], d);
        }
        d_csv.push('\n');
    }

    let pairs: Vec<qubit_basis::LocalizedPair> = eps
        .par_iter()
        .map(|&e| qubit_basis::localized_pair(&dev, e))
        .collect::<Result<_>>()?;
    let mut loc_csv = String::from("eps_uev,alpha,beta,p_right\n");
    for pair in &pairs {
        loc_csv += &format!(
            "{},{},{},{}\n",
            pair.detuning_uev, pair.alpha, pair.beta, pair.p_right
        );
    }

    let summary = serde_json::json!({
        "lambda": dev.lambda,
        "delta_uev": basis.delta_uev,
        "alpha0": basis.alpha0,
        "p0": basis.p0,
        "p1": basis.p1,
        "operating_range_uev": range,
        "d_optimal_eps_uev": eps[optimal],
    });

    let gp = "\
# gnuplot: localisation curves and the D map
set datafile separator ','
set xlabel 'detuning (ueV)'
set ylabel 'P_R of the localised state'
plot 'localization.csv' skip 1 using 1:4 with linespoints title 'P_R(R_e)'
pause -1
set view map
set xlabel 'eps_i (ueV)'
set ylabel 'eps_j (ueV)'
splot 'd_map.csv' skip 1 using 1:2:3 with pm3d title 'D'
";

    let files = vec![
        write_state(out, "psi0.dat", &basis.psi0, &dev.grid)?,
        write_state(out, "psi1.dat", &basis.psi1, &dev.grid)?,
        write_text(out, "d_map.csv", &d_csv)?,
        write_text(out, "localization.csv", &loc_csv)?,
        write_json(out, "basis.json", &summary)?,
        write_text(out, "basis.gp", gp)?,
    ];
    println!(
        "basis: alpha0 = {:.8}, delta = {:.4} ueV, P0 = {:.6}, P1 = {:.6}, \
         range = ({:.1}, {:.1}) ueV, D minimum at eps = {} ueV",
        basis.alpha0,
        basis.delta_uev,
        basis.p0,
        basis.p1,
        range.0,
        range.1,
        eps[optimal]
    );
    Ok(files)
}

// -----------------------------------------------------------------------
// prepare
// -----------------------------------------------------------------------

fn cmd_prepare(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let worst = [
        cfg.baseline_uev,
        cfg.baseline_uev + cfg.prepare_amp_min_uev,
        cfg.baseline_uev + cfg.prepare_amp_max_uev,
    ]
    .into_iter()
    .map(f64::abs)
    .fold(0.0, f64::max);
    let setup = propagation_setup(cfg, worst)?;

    let t_p = linspace(cfg.prepare_t_p_min_ps, cfg.prepare_t_p_max_ps, cfg.prepare_t_p_steps);
    let amps = linspace(cfg.prepare_amp_min_uev, cfg.prepare_amp_max_uev, cfg.prepare_amp_steps);
    let res = control::prepare_qubit(
        &setup.prop,
        &setup.dev,
        &setup.basis,
        cfg.baseline_uev,
        cfg.tau_ps,
        &t_p,
        &amps,
        setup.dt,
        cfg.prepare_refine_rounds,
    )?;

    // replay the optimum once with observers for the trajectory file
    let spec = PulseSpec::trapezoid(cfg.baseline_uev, res.amplitude_uev, res.t_p_ps, cfg.tau_ps);
    let schedule = spec.to_schedule(setup.dev.lambda)?;
    let ground = setup.dev.eigenpairs_at(cfg.baseline_uev, 1)?.remove(0).state;
    let observer = ObserverSpec { stride_ps: 1.0, projections: vec![&setup.basis.psi0] };
    let run = setup.prop.run(&ground, &schedule, spec.duration_ps(), setup.dt, Some(&observer))?;
    let mut trace = String::from("time_ps,norm,p_left,p_right,f_psi0\n");
    for row in &run.trace {
        trace += &format!(
            "{},{},{},{},{}\n",
            row.time_ps,
            row.norm,
            row.p_left,
            row.p_right,
            row.projections[0].norm_sqr()
        );
    }

    let summary = serde_json::json!({
        "t_p_ps": res.t_p_ps,
        "amplitude_uev": res.amplitude_uev,
        "plateau_uev": cfg.baseline_uev + res.amplitude_uev,
        "infidelity": res.infidelity,
        "coarse": {"t_p_ps": res.coarse.0, "amplitude_uev": res.coarse.1, "infidelity": res.coarse.2},
        "evaluations": res.evaluations,
    });
    let gp = "\
# gnuplot: preparation trajectory of the optimal pulse
set datafile separator ','
set xlabel 't (ps)'
set ylabel 'probability'
plot 'prepare_trace.csv' skip 1 using 1:5 with lines title '|<psi0|psi>|^2', \\
     'prepare_trace.csv' skip 1 using 1:4 with lines title 'P_R'
";
    let files = vec![
        write_json(out, "prepare.json", &summary)?,
        write_text(out, "prepare_trace.csv", &trace)?,
        write_text(out, "prepare.gp", gp)?,
    ];
    println!(
        "prepare: S = {:.3e} at t_p = {:.2} ps, A = {:.3} ueV (plateau {:.3} ueV, {} runs)",
        res.infidelity,
        res.t_p_ps,
        res.amplitude_uev,
        cfg.baseline_uev + res.amplitude_uev,
        res.evaluations
    );
    Ok(files)
}

// -----------------------------------------------------------------------
// sweep
// -----------------------------------------------------------------------

fn sweep_template(cfg: &RunConfig, kind: PulseKind, t_p: f64) -> PulseSpec {
    match kind {
        PulseKind::Trapezoid => PulseSpec::trapezoid(cfg.baseline_uev, 0.0, t_p, cfg.tau_ps),
        PulseKind::SpinEcho => PulseSpec::spin_echo(cfg.baseline_uev, 0.0, 0.0, t_p, cfg.tau_ps),
    }
}

/// Worst |ε| any cell of a sweep can reach, for the stability estimate.
fn sweep_worst_eps(cfg: &RunConfig, kind: PulseKind) -> f64 {
    let b = cfg.baseline_uev;
    let extremes = match kind {
        // trapezoid plateaus are offsets from the baseline
        PulseKind::Trapezoid => {
            vec![b, b + cfg.sweep_plateau_min_uev, b + cfg.sweep_plateau_max_uev]
        }
        // spin-echo corner and hold detunings are absolute
        PulseKind::SpinEcho => vec![
            b,
            cfg.sweep_counter_min_uev,
            cfg.sweep_counter_max_uev,
            cfg.sweep_plateau_min_uev,
            cfg.sweep_plateau_max_uev,
        ],
    };
    extremes.into_iter().map(f64::abs).fold(0.0, f64::max)
}

fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let kind = cfg.sweep_kind.to_kind();
    if kind == PulseKind::SpinEcho && cfg.sweep_t_p_min_ps < 4.0 * cfg.tau_ps {
        return Err(DqdError::PulseSpec(format!(
            "spin-echo scan start {} ps is shorter than the 4τ = {} ps of ramps",
            cfg.sweep_t_p_min_ps,
            4.0 * cfg.tau_ps
        )));
    }
    let setup = propagation_setup(cfg, sweep_worst_eps(cfg, kind))?;
    let counters =
        linspace(cfg.sweep_counter_min_uev, cfg.sweep_counter_max_uev, cfg.sweep_counter_steps);
    let plateaus =
        linspace(cfg.sweep_plateau_min_uev, cfg.sweep_plateau_max_uev, cfg.sweep_plateau_steps);
    let t_p_values = steprange(cfg.sweep_t_p_min_ps, cfg.sweep_t_p_max_ps, cfg.sweep_t_p_step_ps);
    let template = sweep_template(cfg, kind, cfg.sweep_t_p_max_ps);

    let grid = control::amplitude_sweep(
        &setup.prop,
        &setup.basis,
        setup.dev.lambda,
        &template,
        &counters,
        &plateaus,
        &t_p_values,
        setup.dt,
    )?;

    let mut csv = String::from("counter_uev,plateau_uev,amplitude,p1_min,p1_max\n");
    for (i, _) in grid.counter_values_uev.iter().enumerate() {
        for (j, _) in grid.plateau_values_uev.iter().enumerate() {
            let c = grid.cell(i, j);
            csv += &format!(
                "{},{},{},{},{}\n",
                c.counter_uev, c.plateau_uev, c.amplitude, c.p1_min, c.p1_max
            );
        }
        csv.push('\n');
    }

    let best = grid.cells.iter().max_by(|a, b| a.amplitude.total_cmp(&b.amplitude)).unwrap();
    let flattest = grid.cells.iter().min_by(|a, b| a.amplitude.total_cmp(&b.amplitude)).unwrap();

    let gp = "\
# gnuplot: oscillation-amplitude map
set datafile separator ','
set view map
set xlabel 'counter detuning (ueV)'
set ylabel 'hold detuning (ueV)'
splot 'sweep.csv' skip 1 using 1:2:3 with pm3d title 'amplitude'
";
    let files = vec![
        write_text(out, "sweep.csv", &csv)?,
        write_text(out, "sweep.gp", gp)?,
    ];
    println!(
        "sweep: {} cells; amplitude peaks at {:.4} for (counter, hold) = ({:.1}, {:.1}) ueV, \
         flattest {:.4} at ({:.1}, {:.1}) ueV",
        grid.cells.len(),
        best.amplitude,
        best.counter_uev,
        best.plateau_uev,
        flattest.amplitude,
        flattest.counter_uev,
        flattest.plateau_uev
    );
    Ok(files)
}

// -----------------------------------------------------------------------
// tomography
// -----------------------------------------------------------------------

fn cmd_tomography(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let kind = cfg.tomography_kind.to_kind();
    let single = match kind {
        PulseKind::Trapezoid => PulseSpec::trapezoid(
            cfg.baseline_uev,
            cfg.tomography_plateau_uev,
            cfg.tomography_t_p_ps,
            cfg.tau_ps,
        ),
        PulseKind::SpinEcho => PulseSpec::spin_echo(
            cfg.baseline_uev,
            cfg.tomography_counter_uev,
            cfg.tomography_plateau_uev,
            cfg.tomography_t_p_ps,
            cfg.tau_ps,
        ),
    };
    single.validate()?;
    let worst =
        single.nodes_uev()?.iter().map(|&(_, eps)| eps.abs()).fold(0.0, f64::max);
    let setup = propagation_setup(cfg, worst)?;

    if cfg.tomography_scan_samples == 0 {
        // one pulse, one rotation
        let est = control::tomography(&setup.prop, &setup.basis, &single, setup.dev.lambda, setup.dt)?;
        let r = &est.rotation;
        let summary = serde_json::json!({
            "rotation": [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            "axis": [est.axis[0], est.axis[1], est.axis[2]],
            "angle_rad": est.angle,
            "leakage": est.leakage,
            "residual": est.residual,
        });
        let files = vec![write_json(out, "rotation.json", &summary)?];
        println!(
            "tomography: angle = {:.6} rad about ({:.4}, {:.4}, {:.4}), leakage {:.2e}, residual {:.2e}",
            est.angle, est.axis[0], est.axis[1], est.axis[2], est.leakage, est.residual
        );
        return Ok(files);
    }

    // scan mode: dense amplitude read-off plus sparse tomography samples
    if kind == PulseKind::SpinEcho && cfg.sweep_t_p_min_ps < 4.0 * cfg.tau_ps {
        return Err(DqdError::PulseSpec(format!(
            "spin-echo scan start {} ps is shorter than the 4τ = {} ps of ramps",
            cfg.sweep_t_p_min_ps,
            4.0 * cfg.tau_ps
        )));
    }
    let mut template = single;
    template.t_p_ps = cfg.sweep_t_p_max_ps;
    let dense = steprange(cfg.sweep_t_p_min_ps, cfg.sweep_t_p_max_ps, cfg.sweep_t_p_step_ps);
    let cell_grid = control::amplitude_sweep(
        &setup.prop,
        &setup.basis,
        setup.dev.lambda,
        &template,
        &[cfg.tomography_counter_uev],
        &[cfg.tomography_plateau_uev],
        &dense,
        setup.dt,
    )?;
    let oscillation = cell_grid.cells[0].amplitude;

    let t_scan = linspace(cfg.sweep_t_p_min_ps, cfg.sweep_t_p_max_ps, cfg.tomography_scan_samples);
    let cert = control::certify_rotation(
        &setup.prop,
        &setup.basis,
        setup.dev.lambda,
        &template,
        &t_scan,
        oscillation,
        cfg.tomography_target.to_target(),
        setup.dt,
    )?;

    let mut csv = String::from("t_p_ps,angle_rad,axis_x,axis_y,axis_z,leakage,residual\n");
    for (tp, est) in &cert.estimates {
        csv += &format!(
            "{},{},{},{},{},{},{}\n",
            tp, est.angle, est.axis[0], est.axis[1], est.axis[2], est.leakage, est.residual
        );
    }
    let fam = &cert.family;
    let summary = serde_json::json!({
        "target": cfg.tomography_target,
        "passed": cert.passed,
        "oscillation_amplitude": cert.oscillation_amplitude,
        "axis": [fam.axis[0], fam.axis[1], fam.axis[2]],
        "rate_rad_per_ps": fam.rate_rad_per_ps,
        "phase_rad": fam.phase_rad,
        "family_residual_rad": fam.residual_rad,
        "axis_deviation_deg": cert.axis_deviation_deg,
        "phase_deviation_deg": cert.phase_deviation_deg,
    });
    let files = vec![
        write_text(out, "certification.csv", &csv)?,
        write_json(out, "tomography.json", &summary)?,
    ];
    println!(
        "tomography: {} — amplitude {:.4}, axis off by {:.3} deg, kappa = {:.6} rad/ps, theta0 = {:.4} rad",
        if cert.passed { "PASS" } else { "FAIL" },
        cert.oscillation_amplitude,
        cert.axis_deviation_deg,
        fam.rate_rad_per_ps,
        fam.phase_rad
    );
    Ok(files)
}

// -----------------------------------------------------------------------
// readout
// -----------------------------------------------------------------------

/// Pull (time, p_right) rows out of a stored trace CSV.
fn read_trace(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| DqdError::Config(format!("{}: empty trace file", path.display())))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let p_col = cols
        .iter()
        .position(|&c| c == "p_right" || c == "p_r")
        .ok_or_else(|| {
            DqdError::Config(format!("{}: no p_right column in '{header}'", path.display()))
        })?;
    let t_col = cols.iter().position(|&c| c == "time_ps");

    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |col: usize| -> Result<f64> {
            fields
                .get(col)
                .and_then(|f| f.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    DqdError::Config(format!("{}: bad row {}: '{line}'", path.display(), k + 2))
                })
        };
        let t = match t_col {
            Some(c) => parse(c)?,
            None => k as f64,
        };
        rows.push((t, parse(p_col)?));
    }
    if rows.is_empty() {
        return Err(DqdError::Config(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

fn cmd_readout(
    cfg: &RunConfig,
    out: &Path,
    p_r: Option<f64>,
    trace: Option<&Path>,
) -> Result<Vec<String>> {
    let rows = match (p_r, trace) {
        (Some(v), None) => vec![(0.0, v)],
        (None, Some(path)) => read_trace(path)?,
        _ => {
            return Err(DqdError::Config(
                "readout needs exactly one of --p-r or --trace".to_string(),
            ))
        }
    };

    let (dev, _) = eigen_device(cfg)?;
    let basis = qubit_basis::qubit_basis(&dev)?;

    let mut csv = String::from("time_ps,p_r,alpha_sq,beta_sq\n");
    let mut last = (0.0, 0.0);
    for &(t, p) in &rows {
        let (alpha_sq, beta_sq) = qubit_basis::readout_coefficients(p, &basis)?;
        csv += &format!("{t},{p},{alpha_sq},{beta_sq}\n");
        last = (alpha_sq, beta_sq);
    }
    let files = vec![write_text(out, "readout.csv", &csv)?];
    println!(
        "readout: {} rows against P0 = {:.6}, P1 = {:.6}; final |alpha|^2 = {:.6}, |beta|^2 = {:.6}",
        rows.len(),
        basis.p0,
        basis.p1,
        last.0,
        last.1
    );
    Ok(files)
}

// -----------------------------------------------------------------------
// bench
// -----------------------------------------------------------------------

fn cmd_bench(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let units = cfg.units();
    let choices = [BackendChoice::Serial, BackendChoice::Threaded(0)];
    bit_identity_gate(&choices, &units)?;
    println!("bench: bit-identity gate passed for {} backends", choices.len());

    let reports = run_bench(&choices, &cfg.bench_sizes, cfg.bench_steps, &units)?;
    let mut csv = String::from("backend,n_points,steps,wall_s,steps_per_s,norm_drift,valid\n");
    for r in &reports {
        csv += &format!(
            "{},{},{},{},{},{},{}\n",
            r.backend, r.n_points, r.steps, r.wall_s, r.steps_per_s, r.norm_drift, r.valid
        );
        println!(
            "bench: {:>8} n = {:>6} {:>10.0} steps/s drift {:.1e}{}",
            r.backend,
            r.n_points,
            r.steps_per_s,
            r.norm_drift,
            if r.valid { "" } else { "  INVALID" }
        );
    }
    // headline speedup at the largest size
    if let Some(&n_max) = cfg.bench_sizes.iter().max() {
        let rate = |name: &str| {
            reports
                .iter()
                .find(|r| r.backend == name && r.n_points == n_max && r.valid)
                .map(|r| r.steps_per_s)
        };
        if let (Some(serial), Some(threaded)) = (rate("serial"), rate("threaded")) {
            println!(
                "bench: threaded/serial speedup at n = {}: {:.2}x with {} workers",
                n_max,
                threaded / serial,
                rayon::current_num_threads()
            );
        }
    }
    Ok(vec![write_text(out, "bench.csv", &csv)?])
}
