//! Scenario simulation: labeled truth trajectories and measurement scans
//! made of target detections plus Poisson clutter.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::labeled::{Label, LabeledState, LabeledStateSet};
use crate::models::{BoxRegion, GaussianDensity, Measurement, MotionModel, SensorModel, StateVector};
use crate::rfs::MeasurementSet;

/// A target that appears at `time` (1-based step) with a given state.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledBirth {
    pub time: usize,
    pub state: StateVector,
    pub label: Label,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    steps: usize,
    births: Vec<ScheduledBirth>,
    motion: MotionModel,
    sensor: SensorModel,
    region: BoxRegion,
    seed: u64,
}

/// Named random streams; each (stream, frame) pair gets its own
/// independent ChaCha sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Truth = 1,
    Detections = 2,
    Clutter = 3,
    Gibbs = 4,
}

pub fn stream_rng(seed: u64, stream: Stream, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 32) | k as u64);
    rng
}

impl Scenario {
    /// The surveillance `region` bounds the observed position H·x: births
    /// must lie inside it and targets that leave it die.
    pub fn new(
        steps: usize,
        births: Vec<ScheduledBirth>,
        motion: MotionModel,
        sensor: SensorModel,
        region: BoxRegion,
        seed: u64,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter("scenario needs at least one step".into()));
        }
        if motion.dim() != sensor.state_dim() {
            return Err(Error::Dimension(
                "motion and sensor models disagree on the state dimension".into(),
            ));
        }
        if region.dim() != sensor.measurement_dim() {
            return Err(Error::Dimension(
                "surveillance region must have the measurement dimension".into(),
            ));
        }
        let mut labels: Vec<Label> = births.iter().map(|b| b.label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateLabel(w[0].to_string()));
        }
        for b in &births {
            if b.time == 0 || b.time > steps {
                return Err(Error::InvalidParameter(format!(
                    "birth of {} at step {} outside 1..={steps}",
                    b.label, b.time
                )));
            }
            if b.state.len() != motion.dim() {
                return Err(Error::Dimension(format!(
                    "birth state of {} has the wrong dimension",
                    b.label
                )));
            }
            if !region.contains(&(sensor.observation() * &b.state)) {
                return Err(Error::InvalidParameter(format!(
                    "birth of {} lies outside the surveillance region",
                    b.label
                )));
            }
        }
        Ok(Self {
            steps,
            births,
            motion,
            sensor,
            region,
            seed,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn births(&self) -> &[ScheduledBirth] {
        &self.births
    }

    pub fn motion(&self) -> &MotionModel {
        &self.motion
    }

    pub fn sensor(&self) -> &SensorModel {
        &self.sensor
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Labeled truth for steps 1..=K.
pub fn generate_truth(sc: &Scenario) -> Vec<LabeledStateSet> {
    let mut alive: Vec<LabeledState> = Vec::new();
    let mut frames = Vec::with_capacity(sc.steps);
    for k in 1..=sc.steps {
        let mut rng = stream_rng(sc.seed, Stream::Truth, k);
        let h = sc.sensor.observation();
        alive = alive
            .into_iter()
            .map(|t| LabeledState::new(sc.motion.propagate(&t.x, &mut rng), t.label))
            .filter(|t| sc.region.contains(&(h * &t.x)))
            .collect();
        for b in sc.births.iter().filter(|b| b.time == k) {
            alive.push(LabeledState::new(b.state.clone(), b.label));
        }
        alive.sort_by_key(|t| t.label);
        frames.push(LabeledStateSet::new(alive.clone()).expect("scenario labels are distinct"));
    }
    frames
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Clutter,
    Target(Label),
}

/// One scan. `provenance[j]` is the origin of `measurements.as_slice()[j]`
/// and is simulator ground truth only.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub k: usize,
    pub truth: LabeledStateSet,
    pub measurements: MeasurementSet,
    pub provenance: Vec<Origin>,
}

/// Each target is detected independently with probability p_D and
/// produces H·x plus noise; detections falling outside the clutter
/// region (the sensor's field of view) are lost. Clutter count is
/// Poisson(λ) with points drawn uniformly over the region.
pub fn generate_measurements<R: Rng + ?Sized>(
    k: usize,
    truth: &LabeledStateSet,
    s: &SensorModel,
    detections: &mut R,
    clutter: &mut R,
) -> Result<Frame> {
    let mut tagged: Vec<(Measurement, Origin)> = Vec::new();
    let noise = GaussianDensity::new(Measurement::zeros(s.measurement_dim()), s.noise().clone())?;
    let fov = &s.clutter().region;
    for t in truth.iter() {
        s.check_state(&t.x)?;
        if detections.random::<f64>() < s.detection() {
            let z = s.observation() * &t.x + noise.sample(detections);
            if fov.contains(&z) {
                tagged.push((z, Origin::Target(t.label)));
            }
        }
    }
    let rate = s.clutter().rate;
    let count = if rate > 0.0 {
        Poisson::new(rate)
            .map_err(|e| Error::InvalidParameter(format!("clutter rate: {e}")))?
            .sample(clutter) as usize
    } else {
        0
    };
    for _ in 0..count {
        tagged.push((fov.sample(clutter), Origin::Clutter));
    }
    tagged.sort_by(|a, b| {
        a.0.iter()
            .zip(b.0.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let provenance = tagged.iter().map(|(_, o)| *o).collect();
    let measurements = MeasurementSet::new(tagged.into_iter().map(|(z, _)| z).collect())?;
    Ok(Frame {
        k,
        truth: truth.clone(),
        measurements,
        provenance,
    })
}

/// Truth and measurements for every step, each drawn from its own stream.
pub fn simulate(sc: &Scenario) -> Result<Vec<Frame>> {
    generate_truth(sc)
        .into_iter()
        .enumerate()
        .map(|(i, truth)| {
            let k = i + 1;
            let mut det = stream_rng(sc.seed, Stream::Detections, k);
            let mut clu = stream_rng(sc.seed, Stream::Clutter, k);
            generate_measurements(k, &truth, &sc.sensor, &mut det, &mut clu)
        })
        .collect()
}

fn vec_of(x: &StateVector) -> Vec<f64> {
    x.iter().copied().collect()
}

/// `{k, truth: [{x, label}], measurements: [[z...]]}` per line.
pub fn write_frames_jsonl(mut out: impl Write, frames: &[Frame]) -> Result<()> {
    for f in frames {
        let truth: Vec<_> = f
            .truth
            .iter()
            .map(|t| json!({"x": vec_of(&t.x), "label": t.label}))
            .collect();
        let zs: Vec<Vec<f64>> = f.measurements.iter().map(vec_of).collect();
        let line = json!({"k": f.k, "truth": truth, "measurements": zs});
        writeln!(out, "{line}").map_err(|e| Error::Io {
            path: "frames".into(),
            source: e,
        })?;
    }
    Ok(())
}

/// `{k, origins: ["clutter" | {"target": [k, i]}]}` per line, aligned with
/// the measurement order of the frames file.
pub fn write_provenance_jsonl(mut out: impl Write, frames: &[Frame]) -> Result<()> {
    for f in frames {
        let line = json!({"k": f.k, "origins": f.provenance});
        writeln!(out, "{line}").map_err(|e| Error::Io {
            path: "provenance".into(),
            source: e,
        })?;
    }
    Ok(())
}
