//! Run configuration: built-in defaults, then a `key = value` file, then
//! command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use paraexp::expm::AUTO_TAYLOR_ORDER;
use paraexp::{ExpmConfig, RlcParams, StepperKind};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Rlc,
    Wave,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Rlc => "rlc",
            Experiment::Wave => "wave",
        })
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        <Self as ValueEnum>::from_str(s, true).map_err(|_| CliError::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExpmKind {
    Dense,
    Taylor,
}

/// Cavity size in nodes; spacing is 1 m on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSize {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub p: usize,
    pub dt: f64,
    pub t_end: f64,
    pub stepper: StepperKind,
    pub expm: ExpmConfig,
    pub output_dir: PathBuf,
    pub snapshot_time: Option<f64>,
    pub rlc: RlcParams,
    pub grid: GridSize,
}

impl RunConfig {
    /// RLC: 3 workers, dt = 1e-5 s to 3e-3 s, dense exponential.
    /// Wave: 3 workers, dt = 2e-9 s to 6e-8 s, Taylor action, snapshot at 4.4e-8 s.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            p: 3,
            dt: 1e-5,
            t_end: 3e-3,
            stepper: StepperKind::Rk4,
            expm: ExpmConfig::Dense,
            output_dir: PathBuf::from("out"),
            snapshot_time: None,
            rlc: RlcParams::default(),
            grid: GridSize { nx: 21, ny: 21, nz: 2 },
        };
        match experiment {
            Experiment::Rlc => base,
            Experiment::Wave => Self {
                dt: 2e-9,
                t_end: 6e-8,
                expm: ExpmConfig::TaylorAuto,
                snapshot_time: Some(4.4e-8),
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.p == 0 {
            return bad("--workers must be at least 1".into());
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("--dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("--t-end must be positive, got {}", self.t_end));
        }
        if self.dt > self.t_end {
            return bad(format!("--dt {} exceeds --t-end {}", self.dt, self.t_end));
        }
        if let Some(ts) = self.snapshot_time {
            if !(0.0..=self.t_end).contains(&ts) {
                return bad(format!("--snapshot-time {ts} lies outside [0, {}]", self.t_end));
            }
        }
        if self.experiment == Experiment::Rlc && self.stepper == StepperKind::Leapfrog {
            return bad("leapfrog needs the staggered wave system; use --stepper rk4 for rlc".into());
        }
        if self.grid.nx < 3 || self.grid.ny < 3 || self.grid.nz < 2 {
            return bad("the cavity needs nx, ny >= 3 and nz >= 2".into());
        }
        self.expm.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.rlc.validate().map_err(|e| CliError::Config(e.to_string()))
    }

    /// Deterministic `key = value` echo, one entry per line.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("experiment".to_string(), self.experiment.to_string()),
            ("workers".into(), self.p.to_string()),
            ("dt".into(), format!("{:e}", self.dt)),
            ("t_end".into(), format!("{:e}", self.t_end)),
            ("stepper".into(), self.stepper.to_string()),
            ("expm".into(), self.expm.to_string()),
        ];
        if let Some(ts) = self.snapshot_time {
            out.push(("snapshot_time".into(), format!("{ts:e}")));
        }
        match self.experiment {
            Experiment::Rlc => {
                let r = &self.rlc;
                for (k, v) in [
                    ("r", r.r),
                    ("l", r.l),
                    ("c", r.c),
                    ("u0_amp", r.u0_amp),
                    ("omega0", r.omega0),
                    ("u_l0", r.u_l0),
                ] {
                    out.push((k.into(), format!("{v:e}")));
                }
            }
            Experiment::Wave => {
                for (k, v) in [("nx", self.grid.nx), ("ny", self.grid.ny), ("nz", self.grid.nz)] {
                    out.push((k.into(), v.to_string()));
                }
            }
        }
        out
    }
}

/// Flags shared by the binary and the tests.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Which experiment to run.
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    /// Number of parallel workers (time intervals).
    #[arg(long, env = "PARAEXP_WORKERS")]
    pub workers: Option<usize>,
    /// Time step in seconds.
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    /// End of the time horizon in seconds.
    #[arg(long, allow_hyphen_values = true)]
    pub t_end: Option<f64>,
    /// Time stepper for the particular problems and the sequential baseline.
    #[arg(long, value_parser = parse_stepper)]
    pub stepper: Option<StepperKind>,
    /// Matrix exponential backend.
    #[arg(long, value_enum)]
    pub expm: Option<ExpmKind>,
    /// Taylor degree m (with --expm taylor).
    #[arg(long)]
    pub taylor_m: Option<usize>,
    /// Taylor scaling steps s (with --expm taylor).
    #[arg(long)]
    pub taylor_s: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Time of the e_z snapshot (wave only).
    #[arg(long, allow_hyphen_values = true)]
    pub snapshot_time: Option<f64>,
    /// `key = value` file; flags take precedence over its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_stepper(s: &str) -> Result<StepperKind, String> {
    s.parse::<StepperKind>().map_err(|e| e.to_string())
}

/// Reads a `key = value` file. Blank lines and `#` comments are skipped.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", no + 1)))?;
        let key = k.trim().replace('-', "_");
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key `{key}`", no + 1)));
        }
    }
    Ok(map)
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::Config(format!("invalid value `{raw}` for `{key}`")))
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut file = match &self.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        let experiment = match (self.experiment, file.remove("experiment")) {
            (Some(e), _) => e,
            (None, Some(raw)) => raw.parse()?,
            (None, None) => return Err(CliError::Config("--experiment is required".into())),
        };
        let mut cfg = RunConfig::defaults(experiment);
        let mut expm_kind = None;
        let (mut taylor_m, mut taylor_s) = (None, None);
        for (key, raw) in &file {
            match key.as_str() {
                "workers" => cfg.p = parse_value(key, raw)?,
                "dt" => cfg.dt = parse_value(key, raw)?,
                "t_end" => cfg.t_end = parse_value(key, raw)?,
                "stepper" => cfg.stepper = parse_value(key, raw).map_err(|_| CliError::Config(format!("unknown stepper `{raw}`")))?,
                "expm" => {
                    expm_kind = Some(
                        <ExpmKind as ValueEnum>::from_str(raw, true)
                            .map_err(|_| CliError::Config(format!("unknown expm `{raw}`")))?,
                    )
                }
                "taylor_m" => taylor_m = Some(parse_value(key, raw)?),
                "taylor_s" => taylor_s = Some(parse_value(key, raw)?),
                "out" => cfg.output_dir = PathBuf::from(raw),
                "snapshot_time" => cfg.snapshot_time = Some(parse_value(key, raw)?),
                "r" => cfg.rlc.r = parse_value(key, raw)?,
                "l" => cfg.rlc.l = parse_value(key, raw)?,
                "c" => cfg.rlc.c = parse_value(key, raw)?,
                "u0_amp" => cfg.rlc.u0_amp = parse_value(key, raw)?,
                "omega0" => cfg.rlc.omega0 = parse_value(key, raw)?,
                "u_l0" => cfg.rlc.u_l0 = parse_value(key, raw)?,
                "nx" => cfg.grid.nx = parse_value(key, raw)?,
                "ny" => cfg.grid.ny = parse_value(key, raw)?,
                "nz" => cfg.grid.nz = parse_value(key, raw)?,
                other => return Err(CliError::Config(format!("unknown config key `{other}`"))),
            }
        }
        if let Some(p) = self.workers {
            cfg.p = p;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(t) = self.t_end {
            cfg.t_end = t;
        }
        if let Some(k) = self.stepper {
            cfg.stepper = k;
        }
        if let Some(dir) = &self.out {
            cfg.output_dir = dir.clone();
        }
        if let Some(ts) = self.snapshot_time {
            cfg.snapshot_time = Some(ts);
        }
        expm_kind = self.expm.or(expm_kind);
        taylor_m = self.taylor_m.or(taylor_m);
        taylor_s = self.taylor_s.or(taylor_s);
        if taylor_m.is_some() || taylor_s.is_some() {
            if expm_kind == Some(ExpmKind::Dense) {
                return Err(CliError::Config("--taylor-m/--taylor-s need --expm taylor".into()));
            }
            expm_kind = Some(ExpmKind::Taylor);
        }
        match expm_kind {
            Some(ExpmKind::Dense) => cfg.expm = ExpmConfig::Dense,
            Some(ExpmKind::Taylor) => {
                cfg.expm = match (taylor_m, taylor_s) {
                    (None, None) => ExpmConfig::TaylorAuto,
                    (Some(m), Some(s)) => ExpmConfig::Taylor { m, s },
                    (m, None) => {
                        return Err(CliError::Config(format!(
                            "--taylor-m {} needs --taylor-s (auto selection uses m = {AUTO_TAYLOR_ORDER})",
                            m.unwrap()
                        )))
                    }
                    (None, Some(_)) => return Err(CliError::Config("--taylor-s needs --taylor-m".into())),
                }
            }
            None => {}
        }
        if cfg.experiment == Experiment::Rlc && self.snapshot_time.is_some() {
            return Err(CliError::Config("--snapshot-time applies to the wave experiment only".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(experiment: Experiment) -> RunArgs {
        RunArgs {
            experiment: Some(experiment),
            ..RunArgs::default()
        }
    }

    #[test]
    fn defaults_per_experiment() {
        let rlc = args(Experiment::Rlc).resolve().unwrap();
        assert_eq!((rlc.p, rlc.dt, rlc.t_end), (3, 1e-5, 3e-3));
        assert_eq!(rlc.expm, ExpmConfig::Dense);
        assert_eq!(rlc.snapshot_time, None);
        let wave = args(Experiment::Wave).resolve().unwrap();
        assert_eq!((wave.dt, wave.t_end, wave.snapshot_time), (2e-9, 6e-8, Some(4.4e-8)));
        assert_eq!(wave.expm, ExpmConfig::TaylorAuto);
    }

    #[test]
    fn config_text_parsing() {
        let map = parse_config_text("# comment\n dt = 2e-5 \n\nt-end=1e-3 # trailing\n").unwrap();
        assert_eq!(map["dt"], "2e-5");
        assert_eq!(map["t_end"], "1e-3");
        assert!(parse_config_text("dt 2").is_err());
        assert!(parse_config_text("dt = 1\ndt = 2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "experiment = rlc\nworkers = 2\ndt = 2e-5\nu_l0 = 0\nexpm = taylor\n").unwrap();
        let a = RunArgs {
            config: Some(path.clone()),
            dt: Some(5e-6),
            ..RunArgs::default()
        };
        let cfg = a.resolve().unwrap();
        assert_eq!(cfg.experiment, Experiment::Rlc);
        assert_eq!(cfg.p, 2);
        assert_eq!(cfg.dt, 5e-6);
        assert_eq!(cfg.rlc.u_l0, 0.0);
        assert_eq!(cfg.expm, ExpmConfig::TaylorAuto);

        std::fs::write(&path, "experiment = rlc\nbogus = 1\n").unwrap();
        assert!(matches!(
            RunArgs { config: Some(path), ..RunArgs::default() }.resolve(),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn taylor_flags() {
        let mut a = args(Experiment::Wave);
        a.taylor_m = Some(12);
        a.taylor_s = Some(500);
        assert_eq!(a.resolve().unwrap().expm, ExpmConfig::Taylor { m: 12, s: 500 });
        a.taylor_s = None;
        assert!(a.resolve().is_err());
        a.expm = Some(ExpmKind::Dense);
        a.taylor_s = Some(3);
        assert!(a.resolve().is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for edit in [
            |a: &mut RunArgs| a.workers = Some(0),
            |a: &mut RunArgs| a.dt = Some(-1.0),
            |a: &mut RunArgs| a.stepper = Some(StepperKind::Leapfrog),
            |a: &mut RunArgs| a.snapshot_time = Some(1.0),
        ] {
            let mut a = args(Experiment::Rlc);
            edit(&mut a);
            assert!(matches!(a.resolve(), Err(CliError::Config(_))));
        }
        assert!(RunArgs::default().resolve().is_err());
    }
}
