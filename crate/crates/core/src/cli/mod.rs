//! Config-driven runs: tracking, MAP-MTA baseline tracking and the
//! verification suite. Each run writes its artifacts and a manifest holding
//! the fully resolved config, which can be fed back in to replay the run.

pub mod config;
pub mod verify;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::Serialize;
use serde_json::{json, Value};

use crate::association::{map_mta, mta_posterior, mta_state_estimate, TrackSet};
use crate::error::{Error, Result};
use crate::glmb_filter::{
    estimate_states, joint_update_gibbs, predict, update, BirthModel, BirthTrack, GlmbFilterState, Truncation,
};
use crate::labeled::{glmb_cardinality, Label, LabeledState, LabeledStateSet};
use crate::metrics::{ospa, write_ospa_csv, OspaParams, OspaRow};
use crate::models::{predict_density, BoxRegion, GaussianDensity, MotionModel, SensorModel, UniformClutter};
use crate::sim::{
    simulate, stream_rng, write_frames_jsonl, write_provenance_jsonl, Frame, Scenario, ScheduledBirth, Stream,
};

pub use config::Config;
pub use verify::{CheckRecord, VerifyParams};

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    GlmbExhaustive,
    GlmbGibbs,
    MapMtaTracker,
}

impl FilterKind {
    fn parse(name: &str) -> Result<Self> {
        match name {
            "glmb-exhaustive" => Ok(Self::GlmbExhaustive),
            "glmb-gibbs" => Ok(Self::GlmbGibbs),
            "map-mta-tracker" => Ok(Self::MapMtaTracker),
            other => Err(Error::config(
                "run.filter",
                format!("unknown filter `{other}` (expected glmb-exhaustive, glmb-gibbs or map-mta-tracker)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub steps: usize,
    pub ospa: Vec<f64>,
}

impl RunSummary {
    pub fn mean_ospa(&self) -> f64 {
        self.ospa.iter().sum::<f64>() / self.ospa.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOutcome {
    pub out_dir: PathBuf,
    pub passed: bool,
    pub records: Vec<CheckRecord>,
}

impl VerifyOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.passed)
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<Config> {
    let mut cfg = Config::from_path(path)?;
    if let Some(seed) = overrides.seed {
        cfg.set("run.seed", Value::from(seed));
    }
    if let Some(out) = &overrides.out_dir {
        cfg.set("run.out_dir", Value::from(out.display().to_string()));
    }
    Ok(cfg)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(io_err(&path))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let path = dir.join(name);
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).and_then(|_| out.flush()).map_err(io_err(&path))
}

fn prepare_out_dir(cfg: &mut Config) -> Result<PathBuf> {
    let dir = PathBuf::from(cfg.string("run.out_dir", Some("out"))?);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

fn region(cfg: &mut Config, prefix: &str, default: Option<&BoxRegion>) -> Result<BoxRegion> {
    let lower_key = format!("{prefix}.lower");
    let upper_key = format!("{prefix}.upper");
    let lower = cfg.vector(&lower_key, default.map(|r| r.lower.clone()))?;
    let upper = cfg.vector(&upper_key, default.map(|r| r.upper.clone()))?;
    BoxRegion::new(lower.iter().copied().collect(), upper.iter().copied().collect())
        .map_err(|e| Error::config(lower_key, e.to_string()))
}

struct Models {
    motion: MotionModel,
    sensor: SensorModel,
    region: BoxRegion,
    /// State indices compared by OSPA.
    positions: Vec<usize>,
}

fn models(cfg: &mut Config) -> Result<Models> {
    let region = region(cfg, "scenario.region", None)?;
    let ps = cfg.f64("motion.p_s", Some(0.99))?;
    let (motion, default_h) = if cfg.contains("motion.F") {
        let f = cfg.matrix("motion.F", None)?;
        let q = cfg.matrix("motion.Q", None)?;
        let motion = MotionModel::new(f, q, ps).map_err(|e| Error::config("motion.F", e.to_string()))?;
        (motion, None)
    } else {
        let dims = cfg.usize("motion.dims", Some(region.dim()))?;
        let dt = cfg.f64("motion.dt", Some(1.0))?;
        let q = cfg.f64("motion.q", Some(0.1))?;
        let motion =
            MotionModel::constant_velocity(dims, dt, q, ps).map_err(|e| Error::config("motion.q", e.to_string()))?;
        let h = DMatrix::from_fn(dims, 2 * dims, |i, j| if j == 2 * i { 1.0 } else { 0.0 });
        (motion, Some(h))
    };
    let h = cfg.matrix("sensor.H", default_h.as_ref())?;
    let r = cfg.matrix("sensor.R", Some(&DMatrix::identity(h.nrows(), h.nrows())))?;
    let pd = cfg.f64("sensor.p_d", Some(0.95))?;
    let rate = cfg.f64("sensor.clutter_rate", Some(1.0))?;
    let clutter_region = self::region(cfg, "sensor.clutter_region", Some(&region))?;
    let clutter = match cfg.optional_f64("sensor.clutter_density")? {
        Some(c) => UniformClutter::with_density(clutter_region, rate, c),
        None => UniformClutter::new(clutter_region, rate),
    }
    .map_err(|e| Error::config("sensor.clutter_rate", e.to_string()))?;
    let sensor = SensorModel::new(h.clone(), r, pd, clutter).map_err(|e| Error::config("sensor.H", e.to_string()))?;
    let default_positions: Vec<usize> = (0..motion.dim())
        .filter(|&j| (0..h.nrows()).any(|i| h[(i, j)] != 0.0))
        .collect();
    let positions = cfg.usize_list("ospa.position_indices", Some(default_positions))?;
    if let Some(&bad) = positions.iter().find(|&&i| i >= motion.dim()) {
        return Err(Error::config(
            "ospa.position_indices",
            format!("index {bad} exceeds the state dimension"),
        ));
    }
    Ok(Models {
        motion,
        sensor,
        region,
        positions,
    })
}

fn scenario(cfg: &mut Config, m: &Models, seed: u64) -> Result<Scenario> {
    let steps = cfg.usize("scenario.steps", None)?;
    let raw = cfg.raw("scenario.births", None)?;
    let list = raw
        .as_array()
        .ok_or_else(|| Error::config("scenario.births", "expected a list of {time, state} objects"))?;
    let mut births = Vec::new();
    let mut per_time: std::collections::BTreeMap<u64, u64> = Default::default();
    for item in list {
        let time = item
            .get("time")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::config("scenario.births", "each birth needs an integer `time`"))?;
        let state = config::parse_vector("scenario.births", item.get("state").unwrap_or(&Value::Null))?;
        let index = per_time.entry(time).or_insert(0);
        *index += 1;
        births.push(ScheduledBirth {
            time: time as usize,
            state,
            label: Label::new(time, *index)?,
        });
    }
    Scenario::new(
        steps,
        births,
        m.motion.clone(),
        m.sensor.clone(),
        m.region.clone(),
        seed,
    )
    .map_err(|e| Error::config("scenario.births", e.to_string()))
}

fn gaussian(key: &str, item: &Value) -> Result<GaussianDensity> {
    let mean = config::parse_vector(key, item.get("mean").unwrap_or(&Value::Null))?;
    let cov = config::parse_matrix(key, item.get("cov").unwrap_or(&Value::Null))?;
    GaussianDensity::new(mean, cov).map_err(|e| Error::config(key, e.to_string()))
}

fn birth_model(cfg: &mut Config, dim: usize) -> Result<BirthModel> {
    let raw = cfg.raw("filter.births", None)?;
    let cap = cfg.usize("filter.max_births_per_step", Some(8))?;
    let list = raw
        .as_array()
        .ok_or_else(|| Error::config("filter.births", "expected a list of {existence, mean, cov} objects"))?;
    if list.len() > cap {
        return Err(Error::config(
            "filter.births",
            format!(
                "{} births per step exceed filter.max_births_per_step = {cap}",
                list.len()
            ),
        ));
    }
    let tracks = list
        .iter()
        .map(|item| {
            let existence = item
                .get("existence")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::config("filter.births", "each birth needs a numeric `existence`"))?;
            let density = gaussian("filter.births", item)?;
            if density.dim() != dim {
                return Err(Error::config("filter.births", "birth density has the wrong dimension"));
            }
            Ok(BirthTrack { existence, density })
        })
        .collect::<Result<Vec<_>>>()?;
    BirthModel::new(tracks).map_err(|e| Error::config("filter.births", e.to_string()))
}

fn ospa_params(cfg: &mut Config) -> Result<OspaParams> {
    let c = cfg.f64("ospa.cutoff", Some(10.0))?;
    let p = cfg.f64("ospa.order", Some(1.0))?;
    OspaParams::new(c, p).map_err(|e| Error::config("ospa.cutoff", e.to_string()))
}

fn select(x: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| x[i]))
}

fn estimates_json(est: &LabeledStateSet) -> Value {
    Value::from(
        est.iter()
            .map(|e| json!({"x": e.x.iter().copied().collect::<Vec<f64>>(), "label": e.label}))
            .collect::<Vec<_>>(),
    )
}

fn write_lines(dir: &Path, name: &str, lines: &[Value]) -> Result<()> {
    let path = dir.join(name);
    let mut out = create(dir, name)?;
    for l in lines {
        writeln!(out, "{l}").map_err(io_err(&path))?;
    }
    out.flush().map_err(io_err(&path))
}

fn write_scenario_outputs(dir: &Path, frames: &[Frame]) -> Result<()> {
    let mut out = create(dir, "frames.jsonl")?;
    write_frames_jsonl(&mut out, frames)?;
    out.flush().map_err(io_err(&dir.join("frames.jsonl")))?;
    let mut out = create(dir, "provenance.jsonl")?;
    write_provenance_jsonl(&mut out, frames)?;
    out.flush().map_err(io_err(&dir.join("provenance.jsonl")))
}

fn ospa_rows(
    frames: &[Frame],
    estimates: &[LabeledStateSet],
    positions: &[usize],
    params: &OspaParams,
) -> Vec<OspaRow> {
    frames
        .iter()
        .zip(estimates)
        .map(|(f, e)| {
            let truth: Vec<_> = f.truth.iter().map(|t| select(&t.x, positions)).collect();
            let est: Vec<_> = e.iter().map(|t| select(&t.x, positions)).collect();
            OspaRow {
                k: f.k,
                ospa: ospa(&truth, &est, params),
                cardinality_truth: truth.len(),
                cardinality_est: est.len(),
            }
        })
        .collect()
}

fn write_ospa(dir: &Path, rows: &[OspaRow]) -> Result<()> {
    let path = dir.join("ospa.csv");
    let mut out = create(dir, "ospa.csv")?;
    write_ospa_csv(&mut out, rows)
        .and_then(|_| out.flush())
        .map_err(io_err(&path))
}

/// Simulates the configured scenario and runs the selected filter over it.
/// Writes frames.jsonl, provenance.jsonl, trace.jsonl, estimates.jsonl,
/// ospa.csv and manifest.json.
pub fn run_track(config_path: &Path, overrides: &Overrides) -> Result<RunSummary> {
    let mut cfg = load(config_path, overrides)?;
    let kind = FilterKind::parse(&cfg.string("run.filter", Some("glmb-gibbs"))?)?;
    if kind == FilterKind::MapMtaTracker {
        return mta_map(cfg);
    }
    let seed = cfg.u64("run.seed", Some(0))?;
    let dir = prepare_out_dir(&mut cfg)?;
    let m = models(&mut cfg)?;
    let sc = scenario(&mut cfg, &m, seed)?;
    let birth = birth_model(&mut cfg, m.motion.dim())?;
    let caps = Truncation {
        max_components: cfg.usize("filter.max_components", Some(100))?,
        weight_floor: cfg.f64("filter.weight_floor", Some(1e-10))?,
    };
    if caps.max_components == 0 {
        return Err(Error::config("filter.max_components", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&caps.weight_floor) {
        return Err(Error::config("filter.weight_floor", "must lie in [0, 1)"));
    }
    let sweeps = match kind {
        FilterKind::GlmbGibbs => {
            let s = cfg.usize("filter.gibbs_sweeps", Some(500))?;
            if s == 0 {
                return Err(Error::config("filter.gibbs_sweeps", "must be at least 1"));
            }
            s
        }
        _ => 0,
    };
    let params = ospa_params(&mut cfg)?;
    let manifest = cfg.finish()?;

    let frames = simulate(&sc)?;
    let mut st = GlmbFilterState::initial();
    let mut trace = Vec::new();
    let mut estimates = Vec::new();
    for f in &frames {
        let zs = f.measurements.as_slice();
        let dropped = match kind {
            FilterKind::GlmbExhaustive => {
                let (p, rp) = predict(&st, sc.motion(), &birth, caps)?;
                let (u, ru) = update(&p, zs, sc.sensor(), caps)?;
                st = u;
                rp.pruned.dropped_mass + ru.pruned.dropped_mass
            }
            _ => {
                let step_seed = stream_rng(seed, Stream::Gibbs, f.k).next_u64();
                let (u, r) = joint_update_gibbs(&st, zs, sc.motion(), &birth, sc.sensor(), sweeps, step_seed, caps)?;
                st = u;
                r.step.pruned.dropped_mass
            }
        };
        let est = estimate_states(&st);
        trace.push(json!({
            "k": f.k,
            "components": st.distribution().len(),
            "cardinality": glmb_cardinality(st.distribution()),
            "estimates": estimates_json(&est),
            "dropped_mass": dropped,
        }));
        estimates.push(est);
    }
    finish_tracking(
        &dir,
        &frames,
        &estimates,
        Some(&trace),
        &m.positions,
        &params,
        &manifest,
    )
}

fn finish_tracking(
    dir: &Path,
    frames: &[Frame],
    estimates: &[LabeledStateSet],
    trace: Option<&[Value]>,
    positions: &[usize],
    params: &OspaParams,
    manifest: &impl Serialize,
) -> Result<RunSummary> {
    write_scenario_outputs(dir, frames)?;
    if let Some(t) = trace {
        write_lines(dir, "trace.jsonl", t)?;
    }
    let est_lines: Vec<Value> = frames
        .iter()
        .zip(estimates)
        .map(|(f, e)| json!({"k": f.k, "estimates": estimates_json(e)}))
        .collect();
    write_lines(dir, "estimates.jsonl", &est_lines)?;
    let rows = ospa_rows(frames, estimates, positions, params);
    write_ospa(dir, &rows)?;
    write_json(dir, "manifest.json", manifest)?;
    Ok(RunSummary {
        out_dir: dir.to_path_buf(),
        steps: frames.len(),
        ospa: rows.iter().map(|r| r.ospa).collect(),
    })
}

/// Baseline tracker with a fixed set of tracks: each frame predicts every
/// track, picks the MAP association under a uniform MTA prior and
/// Kalman-updates the detected tracks. Tracks are never created or removed.
pub fn run_mta_map(config_path: &Path, overrides: &Overrides) -> Result<RunSummary> {
    let mut cfg = load(config_path, overrides)?;
    if cfg.contains("run.filter") {
        cfg.string("run.filter", None)?;
    }
    mta_map(cfg)
}

fn mta_map(mut cfg: Config) -> Result<RunSummary> {
    let seed = cfg.u64("run.seed", Some(0))?;
    let dir = prepare_out_dir(&mut cfg)?;
    let m = models(&mut cfg)?;
    let sc = scenario(&mut cfg, &m, seed)?;
    let raw = cfg.raw("mta.tracks", None)?;
    let mut tracks = raw
        .as_array()
        .ok_or_else(|| Error::config("mta.tracks", "expected a list of {mean, cov} objects"))?
        .iter()
        .map(|item| gaussian("mta.tracks", item))
        .collect::<Result<Vec<_>>>()?;
    if tracks.is_empty() {
        return Err(Error::config("mta.tracks", "needs at least one track"));
    }
    if tracks.iter().any(|t| t.dim() != m.motion.dim()) {
        return Err(Error::config(
            "mta.tracks",
            "track dimension does not match the motion model",
        ));
    }
    let params = ospa_params(&mut cfg)?;
    let manifest = cfg.finish()?;

    let frames = simulate(&sc)?;
    let labels: Vec<Label> = (1..=tracks.len() as u64)
        .map(|i| Label::new(0, i))
        .collect::<Result<_>>()?;
    let mut estimates = Vec::new();
    for f in &frames {
        let zs = f.measurements.as_slice();
        tracks = tracks
            .iter()
            .map(|t| predict_density(t, sc.motion()))
            .collect::<Result<_>>()?;
        let ts = TrackSet::new(tracks.clone());
        let posterior = mta_posterior(zs, &ts, sc.sensor(), None)?;
        let (_, best) = map_mta(&posterior)?;
        for (i, d) in mta_state_estimate(&best, zs, &ts, sc.sensor())? {
            tracks[i] = d;
        }
        estimates.push(LabeledStateSet::new(
            tracks
                .iter()
                .zip(&labels)
                .map(|(t, l)| LabeledState::new(t.mean().clone(), *l))
                .collect(),
        )?);
    }
    finish_tracking(&dir, &frames, &estimates, None, &m.positions, &params, &manifest)
}

/// Runs the verification suite and writes verify_report.json.
pub fn run_verify(config_path: &Path, overrides: &Overrides) -> Result<VerifyOutcome> {
    let mut cfg = load(config_path, overrides)?;
    let seed = cfg.u64("run.seed", Some(0))?;
    let dir = prepare_out_dir(&mut cfg)?;
    let defaults = VerifyParams::default();
    let params = VerifyParams {
        seed: cfg.u64("verify.seed", Some(seed))?,
        instances: cfg.usize("verify.instances", Some(defaults.instances))?,
        grid_points: cfg.usize("verify.grid_points", Some(defaults.grid_points))?,
        tolerance: cfg.f64("verify.tolerance", Some(defaults.tolerance))?,
        clutter_lower: cfg.f64("verify.clutter_region.lower", Some(defaults.clutter_lower))?,
        clutter_upper: cfg.f64("verify.clutter_region.upper", Some(defaults.clutter_upper))?,
        clutter_density: cfg.optional_f64("verify.clutter_density")?,
        noise_var: cfg.f64("verify.noise_var", Some(defaults.noise_var))?,
    };
    if params.grid_points < 2 {
        return Err(Error::config("verify.grid_points", "needs at least 2 points"));
    }
    if params.clutter_lower >= params.clutter_upper {
        return Err(Error::config(
            "verify.clutter_region.lower",
            "must be below verify.clutter_region.upper",
        ));
    }
    let manifest = cfg.finish()?;
    let records = verify::run_suite(&params)?;
    let passed = records.iter().all(|r| r.passed);
    write_json(
        &dir,
        "verify_report.json",
        &json!({"passed": passed, "records": records}),
    )?;
    write_json(&dir, "manifest.json", &manifest)?;
    Ok(VerifyOutcome {
        out_dir: dir,
        passed,
        records,
    })
}
