//! Text formats: model parameters and controller configs as JSON, episode
//! traces and sweep results as CSV, and the JSON training run log.

use std::io::{Read, Write};

use pendulum_core::env::EpisodeTrace;
use pendulum_core::training::{SweepCell, SweepRow, TrainingConfig};
use pendulum_core::ModelParameters;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Invalid(#[from] pendulum_core::Error),
    #[error("{0} is empty")]
    Empty(&'static str),
}

/// On-disk form of [`ModelParameters`]. Identical except that the angle
/// limit is in degrees. Missing keys take the default plant values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParametersFile {
    pub b_p: f64,
    pub b_eq: f64,
    pub g: f64,
    pub i_p: f64,
    pub j_p: f64,
    pub j_m: f64,
    pub k_g: f64,
    pub k_t: f64,
    pub k_m: f64,
    pub l_p: f64,
    pub m_cart: f64,
    pub m_p: f64,
    pub r_m: f64,
    pub r_mp: f64,
    pub h: f64,
    pub track_half_length: f64,
    pub alpha_limit_deg: f64,
}

impl Default for ModelParametersFile {
    fn default() -> Self {
        ModelParameters::default().into()
    }
}

impl From<ModelParameters> for ModelParametersFile {
    fn from(p: ModelParameters) -> Self {
        ModelParametersFile {
            b_p: p.b_p,
            b_eq: p.b_eq,
            g: p.g,
            i_p: p.i_p,
            j_p: p.j_p,
            j_m: p.j_m,
            k_g: p.k_g,
            k_t: p.k_t,
            k_m: p.k_m,
            l_p: p.l_p,
            m_cart: p.m_cart,
            m_p: p.m_p,
            r_m: p.r_m,
            r_mp: p.r_mp,
            h: p.h,
            track_half_length: p.track_half_length,
            alpha_limit_deg: p.alpha_limit.to_degrees(),
        }
    }
}

impl From<ModelParametersFile> for ModelParameters {
    fn from(f: ModelParametersFile) -> Self {
        ModelParameters {
            b_p: f.b_p,
            b_eq: f.b_eq,
            g: f.g,
            i_p: f.i_p,
            j_p: f.j_p,
            j_m: f.j_m,
            k_g: f.k_g,
            k_t: f.k_t,
            k_m: f.k_m,
            l_p: f.l_p,
            m_cart: f.m_cart,
            m_p: f.m_p,
            r_m: f.r_m,
            r_mp: f.r_mp,
            h: f.h,
            track_half_length: f.track_half_length,
            alpha_limit: f.alpha_limit_deg.to_radians(),
        }
    }
}

pub fn read_model_parameters<R: Read>(input: R) -> Result<ModelParameters, FormatError> {
    let file: ModelParametersFile = serde_json::from_reader(input)?;
    let params = ModelParameters::from(file);
    params.validate()?;
    Ok(params)
}

pub fn write_model_parameters<W: Write>(mut out: W, params: &ModelParameters) -> Result<(), FormatError> {
    serde_json::to_writer_pretty(&mut out, &ModelParametersFile::from(*params))?;
    writeln!(out)?;
    Ok(())
}

/// Reads any JSON config type.
pub fn read_json<T: serde::de::DeserializeOwned, R: Read>(input: R) -> Result<T, FormatError> {
    Ok(serde_json::from_reader(input)?)
}

pub const TRACE_HEADER: [&str; 7] = [
    "t_s",
    "x_mm",
    "x_dot_mm_s",
    "alpha_deg",
    "alpha_dot_deg_s",
    "voltage_V",
    "reward",
];

/// One trace row: the state after step `i`, the voltage applied during it
/// and the reward it earned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub x_mm: f64,
    pub x_dot_mm_s: f64,
    pub alpha_deg: f64,
    pub alpha_dot_deg_s: f64,
    #[serde(rename = "voltage_V")]
    pub voltage_v: f64,
    pub reward: f64,
}

pub fn trace_rows(trace: &EpisodeTrace, params: &ModelParameters) -> Vec<TraceRow> {
    trace
        .post_states()
        .enumerate()
        .map(|(i, s)| TraceRow {
            t_s: (i + 1) as f64 * params.h,
            x_mm: s.x * 1000.0,
            x_dot_mm_s: s.x_dot * 1000.0,
            alpha_deg: s.alpha.to_degrees(),
            alpha_dot_deg_s: s.alpha_dot.to_degrees(),
            voltage_v: trace.voltages[i],
            reward: trace.rewards[i],
        })
        .collect()
}

/// Shortest decimal that reads back to `v`, with integral values written
/// without a fractional part (`0`, `1`, `-3`).
pub fn format_float(v: f64) -> String {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

pub fn write_trace<W: Write>(out: W, trace: &EpisodeTrace, params: &ModelParameters) -> Result<(), FormatError> {
    if trace.is_empty() {
        return Err(FormatError::Empty("trace"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace_rows(trace, params) {
        let fields = [r.t_s, r.x_mm, r.x_dot_mm_s, r.alpha_deg, r.alpha_dot_deg_s, r.voltage_v, r.reward];
        w.write_record(fields.map(format_float))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, FormatError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub const SWEEP_HEADER: [&str; 6] = ["gamma", "learning_rate", "seed", "succeeded", "trials", "wall_time_s"];

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(SWEEP_HEADER)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep<R: Read>(input: R) -> Result<Vec<SweepRow>, FormatError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// A sweep grid file: either the two axes of a full product, or an explicit
/// list of cells.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridFile {
    Axes { gamma: Vec<f64>, learning_rate: Vec<f64> },
    Cells(Vec<SweepCell>),
}

impl GridFile {
    pub fn cells(&self) -> Vec<SweepCell> {
        match self {
            GridFile::Axes { gamma, learning_rate } => gamma
                .iter()
                .flat_map(|&g| {
                    learning_rate.iter().map(move |&lr| SweepCell {
                        gamma: g,
                        learning_rate: lr,
                    })
                })
                .collect(),
            GridFile::Cells(c) => c.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneLog {
    pub learning_rate: f64,
    pub episodes: usize,
    pub seed: u64,
    pub episode_lengths: Vec<usize>,
}

/// Everything needed to reproduce and judge one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config: TrainingConfig,
    pub model_parameters: ModelParametersFile,
    pub succeeded: bool,
    pub diverged: bool,
    pub trials_used: usize,
    pub episode_lengths: Vec<usize>,
    pub fine_tune: Option<FineTuneLog>,
    pub wall_time_s: f64,
    pub created_unix_s: u64,
}

impl RunLog {
    /// The log with the clock-dependent fields zeroed, for comparing runs.
    pub fn without_timing(&self) -> RunLog {
        RunLog {
            wall_time_s: 0.0,
            created_unix_s: 0,
            ..self.clone()
        }
    }
}

pub fn write_run_log<W: Write>(mut out: W, log: &RunLog) -> Result<(), FormatError> {
    serde_json::to_writer_pretty(&mut out, log)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_run_log<R: Read>(input: R) -> Result<RunLog, FormatError> {
    Ok(serde_json::from_reader(input)?)
}

/// Seconds since the Unix epoch, or 0 if the clock is before it.
pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
