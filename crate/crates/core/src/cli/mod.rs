//! Command-line front end: simulate data, filter it, or run the exact
//! Kalman filter, reading a JSON or TOML run configuration and writing
//! line-delimited JSON (see `docs/formats.md`).

mod format;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use nalgebra::DVector;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub use format::{
    Header, KalmanRecord, Record, RecordFile, SummaryRecord, TrackRecord, DATASET_FORMAT, FORMAT_VERSION,
    RESULT_FORMAT,
};

use crate::inference::{particle_filter, posterior_stream, FilterConfig};
use crate::model::{run_ssm, GraphMode, ObservationSchedule};
use crate::mot::{extract_tracks, steps, GlobalParams, MotModel, TrackPath};
use crate::scalar_ssm::{kalman_filter, run_example, simulate_lgssm, LinearGaussianSSMSpec, NonlinearSSMSpec};
use crate::{Error, Result, Stream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Lgssm,
    Nonlinear,
    Mot,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    #[default]
    Filter,
    Kalman,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Filter => "filter",
            Mode::Kalman => "kalman",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    #[default]
    Delayed,
    Eager,
}

impl From<GraphKind> for GraphMode {
    fn from(g: GraphKind) -> Self {
        match g {
            GraphKind::Delayed => GraphMode::Delayed,
            GraphKind::Eager => GraphMode::Eager,
        }
    }
}

fn default_steps() -> usize {
    100
}

fn default_particles() -> usize {
    1024
}

fn default_threshold() -> f64 {
    0.5
}

/// Everything one run needs. Paths and the thread count are not echoed into
/// output headers, so output bytes depend only on the model, the data, and
/// the seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default)]
    pub mode: Mode,
    /// Time steps to simulate. Filtering uses the dataset's length.
    #[serde(default = "default_steps", alias = "T")]
    pub steps: usize,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_threshold")]
    pub resample_threshold: f64,
    #[serde(default)]
    pub seed: u64,
    /// Delayed sampling or plain forward simulation inside each particle.
    #[serde(default)]
    pub graph: GraphKind,
    #[serde(default, skip_serializing)]
    pub threads: usize,
    #[serde(default)]
    pub lgssm: LinearGaussianSSMSpec,
    #[serde(default)]
    pub nonlinear: NonlinearSSMSpec,
    #[serde(default)]
    pub mot: GlobalParams,
    /// Input dataset for `filter` and `kalman`.
    #[serde(default, skip_serializing)]
    pub dataset: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

impl RunConfig {
    /// Reads a `.toml` file as TOML and anything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if self.particles == 0 {
            return bad("particles must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return bad(format!("resample_threshold {} outside [0, 1]", self.resample_threshold));
        }
        let cfg = |e: Error| match e {
            Error::InvalidParameter(m) => Error::Config(m),
            other => other,
        };
        match self.model {
            ModelKind::Lgssm => self.lgssm.validate().map_err(cfg),
            ModelKind::Nonlinear => self.nonlinear.noise.validate().map_err(cfg),
            ModelKind::Mot => self.mot.validate(),
        }
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            particles: self.particles,
            resample_threshold: self.resample_threshold,
            threads: self.threads,
            seed: self.seed,
        }
    }

    fn header(&self, format: &str, steps: usize) -> Header {
        Header {
            format: format.into(),
            version: FORMAT_VERSION,
            model: self.model,
            mode: self.mode.name().into(),
            seed: self.seed,
            steps,
            config: self.clone(),
        }
    }
}

/// Command-line flags. Flags override fields of the configuration file.
#[derive(Clone, Debug, Parser)]
#[command(name = "delayppl", version, about = "Delayed-sampling particle filters for state-space models")]
pub struct Cli {
    /// JSON or TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub particles: Option<usize>,
    /// Output file (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Worker threads for the particle loop; 0 uses every core.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Dataset to filter.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
}

impl Cli {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(p) = self.particles {
            config.particles = p;
        }
        if let Some(o) = &self.out {
            config.out = Some(o.clone());
        }
        if let Some(m) = self.mode {
            config.mode = m;
        }
        if let Some(t) = self.threads {
            config.threads = t;
        }
        if let Some(d) = &self.dataset {
            config.dataset = Some(d.clone());
        }
        if let Some(m) = self.model {
            config.model = m;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => 2,
        Error::Degenerate { .. } => 3,
        Error::Io(_) | Error::Format(_) => 4,
        _ => 1,
    }
}

fn track_record(path: &TrackPath, domain_dim: usize) -> TrackRecord {
    TrackRecord {
        id: path.id,
        birth_time: path.birth_time,
        positions: path
            .positions(domain_dim)
            .iter()
            .map(|p| p.iter().copied().collect())
            .collect(),
        associations: path.associations.clone(),
    }
}

/// Simulated dataset with ground truth.
pub fn cmd_simulate(config: &RunConfig) -> Result<RecordFile> {
    config.validate()?;
    let mut rng = Stream::seed_from_u64(config.seed);
    let t = config.steps;
    let mut records = Vec::new();
    match config.model {
        ModelKind::Lgssm => {
            let sample = simulate_lgssm(&config.lgssm, t, &mut rng)?;
            records.push(Record::Parameter { theta: sample.theta });
            for (i, (x, y)) in sample.xs.iter().zip(&sample.ys).enumerate() {
                records.push(Record::Observation {
                    t: i + 1,
                    y: *y,
                    x: Some(*x),
                });
            }
        }
        ModelKind::Nonlinear => {
            let spec = Arc::new(config.nonlinear.clone());
            let mut exec = run_ssm(spec, Arc::new(ObservationSchedule::empty()), t, GraphMode::Eager)?;
            exec.run_to_end(&mut rng)?;
            let ids: Vec<_> = exec.model().path().iter().map(|s| (s.state, s.obs)).collect();
            let theta = match exec.model().theta().copied() {
                Some(crate::scalar_ssm::ThetaValue::Fixed(c)) => c,
                Some(crate::scalar_ssm::ThetaValue::Node(id)) => exec.arena_mut().realize_real(id, &mut rng)?,
                None => return Err(Error::Model("simulation produced no parameter".into())),
            };
            records.push(Record::Parameter { theta });
            for (i, (x, y)) in ids.into_iter().enumerate() {
                let x = exec.arena_mut().realize_real(x, &mut rng)?;
                let y = exec.arena_mut().realize_real(y, &mut rng)?;
                records.push(Record::Observation { t: i + 1, y, x: Some(x) });
            }
        }
        ModelKind::Mot => {
            let model = Arc::new(MotModel::new(config.mot.clone())?);
            let mut exec = run_ssm(model, Arc::new(ObservationSchedule::empty()), t, GraphMode::Delayed)?;
            exec.run_to_end(&mut rng)?;
            for (i, (_, obs)) in steps(&exec).iter().enumerate() {
                let points = obs
                    .simulated
                    .as_ref()
                    .ok_or_else(|| Error::Model("simulation step without observations".into()))?;
                records.push(Record::Scan {
                    t: i + 1,
                    points: points.iter().map(|p| p.iter().copied().collect()).collect(),
                });
            }
            let dim = config.mot.domain_dim();
            for path in extract_tracks(&mut exec, &mut rng)? {
                records.push(Record::Track(track_record(&path, dim)));
            }
        }
    }
    Ok(RecordFile {
        header: config.header(DATASET_FORMAT, t),
        records,
    })
}

fn scalar_observations(dataset: &RecordFile) -> Vec<f64> {
    let mut ys: Vec<(usize, f64)> = dataset
        .records
        .iter()
        .filter_map(|r| match r {
            Record::Observation { t, y, .. } => Some((*t, *y)),
            _ => None,
        })
        .collect();
    ys.sort_by_key(|(t, _)| *t);
    ys.into_iter().map(|(_, y)| y).collect()
}

fn scans(dataset: &RecordFile) -> Vec<Vec<DVector<f64>>> {
    let mut scans: Vec<(usize, Vec<DVector<f64>>)> = dataset
        .records
        .iter()
        .filter_map(|r| match r {
            Record::Scan { t, points } => {
                Some((*t, points.iter().map(|p| DVector::from_column_slice(p)).collect()))
            }
            _ => None,
        })
        .collect();
    scans.sort_by_key(|(t, _)| *t);
    scans.into_iter().map(|(_, s)| s).collect()
}

fn check_dataset(config: &RunConfig, dataset: &RecordFile) -> Result<()> {
    if dataset.header.model != config.model {
        return Err(Error::Format(format!(
            "dataset holds a {:?} model, configuration asks for {:?}",
            dataset.header.model, config.model
        )));
    }
    Ok(())
}

/// Particle filter over a dataset; the result holds the evidence estimate,
/// the ESS trace, and one posterior path.
pub fn cmd_filter(config: &RunConfig, dataset: &RecordFile) -> Result<RecordFile> {
    config.validate()?;
    check_dataset(config, dataset)?;
    let fc = config.filter_config();
    let mut records = Vec::new();
    let steps_run;
    match config.model {
        ModelKind::Lgssm | ModelKind::Nonlinear => {
            let ys = scalar_observations(dataset);
            if ys.is_empty() {
                return Err(Error::Format("dataset has no observations".into()));
            }
            steps_run = ys.len();
            let spec = match config.model {
                ModelKind::Lgssm => NonlinearSSMSpec::from(config.lgssm.clone()),
                _ => config.nonlinear.clone(),
            };
            let report = run_example(&spec, &ys, config.graph.into(), &fc)?;
            records.push(Record::Summary(SummaryRecord {
                log_z: report.log_z,
                per_step_log_increments: report.per_step_log_increments,
                ess: report.ess,
                resampled: report.resampled,
            }));
            records.push(Record::Parameter { theta: report.theta });
            for (i, x) in report.xs.iter().enumerate() {
                records.push(Record::State { t: i + 1, x: *x });
            }
        }
        ModelKind::Mot => {
            let data = scans(dataset);
            if data.is_empty() {
                return Err(Error::Format("dataset has no scans".into()));
            }
            steps_run = data.len();
            let model = Arc::new(MotModel::new(config.mot.clone())?);
            let proto = run_ssm(
                model,
                Arc::new(ObservationSchedule::fully_observed(data)),
                steps_run,
                config.graph.into(),
            )?;
            let out = particle_filter(&proto, &fc)?;
            records.push(Record::Summary(SummaryRecord {
                log_z: out.evidence.log_z,
                per_step_log_increments: out.evidence.per_step_log_increments,
                ess: out.ess,
                resampled: out.resampled,
            }));
            let mut exec = out.posterior.execution;
            let dim = config.mot.domain_dim();
            for path in extract_tracks(&mut exec, &mut posterior_stream(config.seed))? {
                records.push(Record::Track(track_record(&path, dim)));
            }
        }
    }
    let mut header = config.header(RESULT_FORMAT, steps_run);
    header.mode = Mode::Filter.name().into();
    Ok(RecordFile { header, records })
}

/// Exact Kalman filter; only for the linear-Gaussian model with a fixed
/// coefficient.
pub fn cmd_kalman(config: &RunConfig, dataset: &RecordFile) -> Result<RecordFile> {
    config.validate()?;
    if config.model != ModelKind::Lgssm {
        return Err(Error::Config("the Kalman filter applies only to the lgssm model".into()));
    }
    if config.lgssm.theta.fixed().is_none() {
        return Err(Error::Config("the Kalman filter needs a fixed theta".into()));
    }
    check_dataset(config, dataset)?;
    let ys = scalar_observations(dataset);
    if ys.is_empty() {
        return Err(Error::Format("dataset has no observations".into()));
    }
    let oracle = kalman_filter(&config.lgssm, &ys)?;
    let mut records = vec![Record::Summary(SummaryRecord {
        log_z: oracle.log_likelihood,
        per_step_log_increments: oracle.steps.iter().map(|s| s.log_increment).collect(),
        ess: Vec::new(),
        resampled: Vec::new(),
    })];
    for (i, s) in oracle.steps.iter().enumerate() {
        records.push(Record::Kalman(KalmanRecord {
            t: i + 1,
            predicted_mean: s.predicted_mean,
            predicted_var: s.predicted_var,
            filtered_mean: s.filtered_mean,
            filtered_var: s.filtered_var,
            log_increment: s.log_increment,
        }));
    }
    let mut header = config.header(RESULT_FORMAT, ys.len());
    header.mode = Mode::Kalman.name().into();
    Ok(RecordFile { header, records })
}

pub fn read_dataset(path: &Path) -> Result<RecordFile> {
    RecordFile::read(BufReader::new(File::open(path)?), DATASET_FORMAT)
}

pub fn read_result(path: &Path) -> Result<RecordFile> {
    RecordFile::read(BufReader::new(File::open(path)?), RESULT_FORMAT)
}

/// Runs the configured mode and writes its output.
pub fn run(config: &RunConfig) -> Result<()> {
    let file = match config.mode {
        Mode::Simulate => cmd_simulate(config)?,
        Mode::Filter | Mode::Kalman => {
            let path = config
                .dataset
                .as_ref()
                .ok_or_else(|| Error::Config("filter and kalman modes need a dataset".into()))?;
            let dataset = read_dataset(path)?;
            if config.mode == Mode::Filter {
                cmd_filter(config, &dataset)?
            } else {
                cmd_kalman(config, &dataset)?
            }
        }
    };
    match &config.out {
        Some(path) => file.write(BufWriter::new(File::create(path)?)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            file.write(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

/// Entry point shared by the binary: parse flags, run, map errors to exit
/// codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.resolve().and_then(|c| run(&c)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
