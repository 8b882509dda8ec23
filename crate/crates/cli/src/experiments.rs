//! The two experiments: sequential stepper vs ParaExp against a reference.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use paraexp::fitwave::{build_wave_system, WaveProblem, WaveSourceConfig, EPS0, MU0};
use paraexp::{
    dormand_prince, integrate_on_grid, paraexp_solve, rlc_system, AdaptiveOptions, ClosedForm, FitGrid,
    LinearOdeSystem, ParaexpRun, RunMetadata, SampledSolution,
};

use crate::config::{Experiment, RunConfig};
use crate::report::{fmt_num, CsvTable, ErrorReport};
use crate::CliError;

const REL_NOTE: &str = "relative error = |q - q_ref| / max |q_ref|";

/// Adaptive Dormand–Prince solution (rtol 1e-10, atol 1e-14) at `times`.
pub fn reference_solution(sys: &LinearOdeSystem, times: &[f64]) -> Result<SampledSolution, CliError> {
    Ok(dormand_prince(sys, times, &AdaptiveOptions::default())?)
}

#[derive(Debug, Clone)]
pub struct RlcOutcome {
    pub rk4: ErrorReport,
    pub paraexp: ErrorReport,
    /// `None` when the sequential error is exactly zero.
    pub error_ratio: Option<f64>,
    pub metadata: RunMetadata,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct WaveOutcome {
    pub sequential: ErrorReport,
    pub paraexp: ErrorReport,
    pub times: Vec<f64>,
    pub w_reference: Vec<f64>,
    pub w_sequential: Vec<f64>,
    pub w_paraexp: Vec<f64>,
    /// End of the first interval.
    pub t1: f64,
    pub metadata: RunMetadata,
    pub files: Vec<PathBuf>,
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Config echo plus the CFL estimate; identical across repeated runs.
fn header_comments(cfg: &RunConfig, meta: &RunMetadata) -> Vec<(String, String)> {
    let mut c = cfg.echo();
    c.push(("cfl_omega_max".into(), format!("{:e}", meta.cfl.omega_max)));
    c.push(("cfl_dt_omega".into(), format!("{:e}", meta.cfl.dt_omega)));
    c.push(("cfl_limit".into(), format!("{:e}", meta.cfl.limit)));
    c
}

/// Wall-clock figures go here rather than into the CSV files, which stay
/// bitwise reproducible.
fn write_metadata(
    cfg: &RunConfig,
    meta: &RunMetadata,
    timings: &[(&str, Duration)],
    path: &Path,
) -> Result<(), CliError> {
    let mut s = String::new();
    for (k, v) in header_comments(cfg, meta) {
        let _ = writeln!(s, "{k} = {v}");
    }
    for w in &meta.warnings {
        let _ = writeln!(s, "warning = {w}");
    }
    for r in &meta.workers {
        let _ = writeln!(
            s,
            "worker {} = v_{} and w_{}, {:.6} s",
            r.worker,
            r.particular,
            r.homogeneous,
            r.wall_clock.as_secs_f64()
        );
    }
    for (name, d) in timings {
        let _ = writeln!(s, "{name}_wall_clock = {:.6} s", d.as_secs_f64());
    }
    write_text(path, &s)
}

fn summary_table(cfg: &RunConfig, meta: &RunMetadata, names: [&str; 2], reports: [&ErrorReport; 2]) -> CsvTable {
    let mut t = CsvTable::new(&["metric", "value"]);
    t.comments(&header_comments(cfg, meta)).comment(REL_NOTE);
    for (name, r) in names.iter().zip(reports) {
        for (metric, v) in [("max_abs", r.max_abs), ("max_rel", r.max_rel), ("l2", r.l2)] {
            t.row(vec![Some(format!("{name} {metric}")), Some(fmt_num(v))]);
        }
    }
    t
}

/// Sequential RK4 and ParaExp on the RLC circuit, compared with the
/// closed-form current.
///
/// Writes `trajectory.csv`, `errors.csv`, `decomposition.csv`,
/// `summary.csv` and `metadata.txt` under the output directory.
pub fn run_rlc(cfg: &RunConfig) -> Result<RlcOutcome, CliError> {
    if cfg.experiment != Experiment::Rlc {
        return Err(CliError::Config("run_rlc needs experiment = rlc".into()));
    }
    cfg.validate()?;
    let sys = rlc_system(&cfg.rlc)?;
    let exact = ClosedForm::new(&cfg.rlc)?;

    let started = Instant::now();
    let run = paraexp_solve(&sys, cfg.t_end, cfg.p, cfg.dt, cfg.stepper, cfg.expm)?;
    let paraexp_time = started.elapsed();
    let times = run.total.times.clone();
    let started = Instant::now();
    let seq = integrate_on_grid(&sys, sys.u0(), &times, cfg.stepper)?;
    let sequential_time = started.elapsed();

    let i_exact: Vec<f64> = times.iter().map(|&t| exact.current(t)).collect();
    let i_seq = seq.component(0);
    let i_par = run.total.component(0);
    let rk4 = ErrorReport::from_series(&times, &i_seq, &i_exact)?;
    let par = ErrorReport::from_series(&times, &i_par, &i_exact)?;
    let error_ratio = (rk4.max_abs > 0.0).then(|| par.max_abs / rk4.max_abs);

    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let comments = header_comments(cfg, &run.metadata);
    let seq_name = cfg.stepper.to_string();
    let mut files = Vec::new();

    let mut traj = CsvTable::with_header(vec![
        "time".into(),
        "i_exact".into(),
        format!("i_{seq_name}"),
        "i_paraexp".into(),
    ]);
    traj.comments(&comments).comment("current in A, time in s");
    for k in 0..times.len() {
        traj.numeric_row(&[times[k], i_exact[k], i_seq[k], i_par[k]]);
    }
    files.push(dir.join("trajectory.csv"));
    traj.write(files.last().unwrap())?;

    let mut errs = CsvTable::with_header(vec![
        "time".into(),
        format!("abs_{seq_name}"),
        format!("rel_{seq_name}"),
        "abs_paraexp".into(),
        "rel_paraexp".into(),
    ]);
    errs.comments(&comments).comment(REL_NOTE);
    for k in 0..times.len() {
        errs.numeric_row(&[times[k], rk4.abs_error[k], rk4.rel_error[k], par.abs_error[k], par.rel_error[k]]);
    }
    files.push(dir.join("errors.csv"));
    errs.write(files.last().unwrap())?;

    files.push(dir.join("decomposition.csv"));
    decomposition_table(&run, &comments).write(files.last().unwrap())?;

    let mut summary = summary_table(cfg, &run.metadata, [&seq_name, "paraexp"], [&rk4, &par]);
    summary.row(vec![
        Some(format!("paraexp/{seq_name} max-error ratio")),
        Some(error_ratio.map_or_else(|| "undefined".to_string(), fmt_num)),
    ]);
    files.push(dir.join("summary.csv"));
    summary.write(files.last().unwrap())?;

    files.push(dir.join("metadata.txt"));
    write_metadata(
        cfg,
        &run.metadata,
        &[("paraexp", paraexp_time), ("sequential", sequential_time)],
        files.last().unwrap(),
    )?;

    Ok(RlcOutcome {
        rk4,
        paraexp: par,
        error_ratio,
        metadata: run.metadata,
        files,
    })
}

/// Current of every `v_j` and `w_i` on the global grid; cells outside a
/// piece's time range are empty.
fn decomposition_table(run: &ParaexpRun, comments: &[(String, String)]) -> CsvTable {
    let p = run.partition.p();
    let mut header = vec!["time".to_string()];
    header.extend((1..=p).map(|j| format!("v_{j}")));
    header.extend((1..=p).map(|i| format!("w_{i}")));
    header.push("total".into());
    let mut t = CsvTable::with_header(header);
    t.comments(comments).comment("current component in A");
    let lookup = |s: &SampledSolution, time: f64| -> Option<String> {
        s.times
            .binary_search_by(|x| x.total_cmp(&time))
            .ok()
            .map(|k| fmt_num(s.states[k][0]))
    };
    for (k, &time) in run.total.times.iter().enumerate() {
        let mut row = vec![Some(fmt_num(time))];
        row.extend(run.particular.iter().map(|v| lookup(v, time)));
        row.extend(run.homogeneous.iter().map(|w| lookup(w, time)));
        row.push(Some(fmt_num(run.total.states[k][0])));
        t.row(row);
    }
    t
}

/// The PEC cavity for `cfg.grid` with unit spacing and the centered pulse.
pub fn wave_problem(cfg: &RunConfig) -> Result<WaveProblem, CliError> {
    let g = cfg.grid;
    let grid = FitGrid::new(g.nx, g.ny, g.nz, 1.0, 1.0, 1.0)?;
    Ok(build_wave_system(&grid, &WaveSourceConfig::centered(&grid), EPS0, MU0)?)
}

/// Sequential stepper and ParaExp on the cavity, compared through the
/// energy `W(t)` with the adaptive reference.
///
/// Writes `energy.csv`, `summary.csv`, `metadata.txt` and, when a snapshot
/// time is set, `snapshot_ez.csv`.
pub fn run_wave(cfg: &RunConfig) -> Result<WaveOutcome, CliError> {
    if cfg.experiment != Experiment::Wave {
        return Err(CliError::Config("run_wave needs experiment = wave".into()));
    }
    cfg.validate()?;
    let wp = wave_problem(cfg)?;
    let sys = &wp.system;

    let started = Instant::now();
    let run = paraexp_solve(sys, cfg.t_end, cfg.p, cfg.dt, cfg.stepper, cfg.expm)?;
    let paraexp_time = started.elapsed();
    let times = run.total.times.clone();
    let snapshot_index = match cfg.snapshot_time {
        Some(ts) => Some(
            times
                .iter()
                .position(|&t| (t - ts).abs() <= 1e-9 * cfg.dt)
                .ok_or_else(|| CliError::Config(format!("snapshot time {ts:e} is not an output sample")))?,
        ),
        None => None,
    };
    let started = Instant::now();
    let seq = integrate_on_grid(sys, sys.u0(), &times, cfg.stepper)?;
    let sequential_time = started.elapsed();
    let started = Instant::now();
    let reference = reference_solution(sys, &times)?;
    let reference_time = started.elapsed();

    let energy = |s: &SampledSolution| -> Result<Vec<f64>, CliError> {
        s.states.iter().map(|u| Ok(wp.energy(u)?)).collect()
    };
    let w_ref = energy(&reference)?;
    let w_seq = energy(&seq)?;
    let w_par = energy(&run.total)?;
    let seq_report = ErrorReport::from_series(&times, &w_seq, &w_ref)?;
    let par_report = ErrorReport::from_series(&times, &w_par, &w_ref)?;

    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let comments = header_comments(cfg, &run.metadata);
    let seq_name = cfg.stepper.to_string();
    let mut files = Vec::new();

    let mut table = CsvTable::with_header(vec![
        "time".into(),
        "w_reference".into(),
        format!("w_{seq_name}"),
        "w_paraexp".into(),
        format!("rel_{seq_name}"),
        "rel_paraexp".into(),
    ]);
    table
        .comments(&comments)
        .comment("energy in J, time in s")
        .comment(REL_NOTE);
    for k in 0..times.len() {
        table.numeric_row(&[
            times[k],
            w_ref[k],
            w_seq[k],
            w_par[k],
            seq_report.rel_error[k],
            par_report.rel_error[k],
        ]);
    }
    files.push(dir.join("energy.csv"));
    table.write(files.last().unwrap())?;

    if let Some(k) = snapshot_index {
        let mut snap = CsvTable::new(&["ix", "iy", "iz", "ez_volts_per_m"]);
        snap.comments(&comments)
            .comment(format!("paraexp e_z at t = {}", fmt_num(times[k])));
        for (ix, iy, iz, ez) in wp.ez_snapshot(&run.total.states[k])? {
            snap.row(vec![
                Some(ix.to_string()),
                Some(iy.to_string()),
                Some(iz.to_string()),
                Some(fmt_num(ez)),
            ]);
        }
        files.push(dir.join("snapshot_ez.csv"));
        snap.write(files.last().unwrap())?;
    }

    files.push(dir.join("summary.csv"));
    summary_table(cfg, &run.metadata, [&seq_name, "paraexp"], [&seq_report, &par_report])
        .write(files.last().unwrap())?;

    files.push(dir.join("metadata.txt"));
    write_metadata(
        cfg,
        &run.metadata,
        &[
            ("paraexp", paraexp_time),
            ("sequential", sequential_time),
            ("reference", reference_time),
        ],
        files.last().unwrap(),
    )?;

    Ok(WaveOutcome {
        sequential: seq_report,
        paraexp: par_report,
        times,
        w_reference: w_ref,
        w_sequential: w_seq,
        w_paraexp: w_par,
        t1: run.partition.boundaries()[1],
        metadata: run.metadata,
        files,
    })
}
