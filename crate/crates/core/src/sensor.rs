//! Raw tri-axial sensor streams and fixed-duration windowing.
//!
//! Streams are segmented by sample count, not wall clock: a window of `d`
//! seconds at `r` Hz always holds `round(d * r)` magnitudes. Trailing partial
//! windows are dropped.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 50.0;
pub const DEFAULT_WINDOW_S: f64 = 6.0;

/// A consecutive-sample spacing above this multiple of the nominal period
/// marks a gap inside a window.
const GAP_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Phone,
    Watch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Accelerometer,
    Gyroscope,
}

impl Device {
    pub const ALL: [Device; 2] = [Device::Phone, Device::Watch];

    pub fn as_str(self) -> &'static str {
        match self {
            Device::Phone => "phone",
            Device::Watch => "watch",
        }
    }
}

impl SensorKind {
    pub const ALL: [SensorKind; 2] = [SensorKind::Accelerometer, SensorKind::Gyroscope];

    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Accelerometer => "accelerometer",
            SensorKind::Gyroscope => "gyroscope",
        }
    }

    /// Short prefix used in feature slot names (`acc`, `gyr`).
    pub fn short(self) -> &'static str {
        match self {
            SensorKind::Accelerometer => "acc",
            SensorKind::Gyroscope => "gyr",
        }
    }
}

impl std::str::FromStr for Device {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "phone" | "smartphone" => Ok(Device::Phone),
            "watch" | "smartwatch" => Ok(Device::Watch),
            other => Err(Error::validation("device", format!("unknown device `{other}`"))),
        }
    }
}

impl std::str::FromStr for SensorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "accelerometer" | "acc" => Ok(SensorKind::Accelerometer),
            "gyroscope" | "gyr" | "gyro" => Ok(SensorKind::Gyroscope),
            other => Err(Error::validation("sensor", format!("unknown sensor `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SensorSample {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        SensorSample { t, x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Euclidean norm of the three axes.
pub fn magnitude(sample: &SensorSample) -> Result<f64> {
    if !sample.is_finite() {
        return Err(Error::validation("sample", "non-finite component"));
    }
    Ok((sample.x * sample.x + sample.y * sample.y + sample.z * sample.z).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorStream {
    pub device: Device,
    pub sensor: SensorKind,
    pub sample_rate_hz: f64,
    samples: Vec<SensorSample>,
}

impl SensorStream {
    pub fn new(
        device: Device,
        sensor: SensorKind,
        sample_rate_hz: f64,
        samples: Vec<SensorSample>,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::validation(
                "sample_rate_hz",
                format!("must be positive, got {sample_rate_hz}"),
            ));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::validation("samples", format!("sample {i} is not finite")));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::validation(
                    "samples",
                    format!("timestamps must strictly increase (sample {i}, t={})", s.t),
                ));
            }
        }
        Ok(SensorStream {
            device,
            sensor,
            sample_rate_hz,
            samples,
        })
    }

    pub fn samples(&self) -> &[SensorSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        // Samples are validated finite on construction.
        self.samples
            .iter()
            .map(|s| (s.x * s.x + s.y * s.y + s.z * s.z).sqrt())
            .collect()
    }
}

/// A fixed-length run of magnitudes cut from one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub index: usize,
    pub duration_s: f64,
    pub start_t: f64,
    pub end_t: f64,
    /// True when the samples inside the window are not contiguous at the
    /// nominal rate.
    pub has_gap: bool,
    pub magnitudes: Vec<f64>,
}

impl Window {
    /// Builds a window directly from magnitudes, assuming contiguous samples.
    pub fn from_magnitudes(index: usize, sample_rate_hz: f64, magnitudes: Vec<f64>) -> Self {
        let n = magnitudes.len();
        Window {
            index,
            duration_s: n as f64 / sample_rate_hz,
            start_t: 0.0,
            end_t: (n.saturating_sub(1)) as f64 / sample_rate_hz,
            has_gap: false,
            magnitudes,
        }
    }

    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }
}

/// Number of samples in a window of `duration_s` at `sample_rate_hz`.
pub fn window_len(duration_s: f64, sample_rate_hz: f64) -> Result<usize> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::validation(
            "duration_s",
            format!("must be positive, got {duration_s}"),
        ));
    }
    let len = (duration_s * sample_rate_hz).round();
    if len < 1.0 {
        return Err(Error::validation(
            "duration_s",
            format!("{duration_s} s holds no samples at {sample_rate_hz} Hz"),
        ));
    }
    Ok(len as usize)
}

/// Cuts consecutive, non-overlapping windows.
pub fn segment(stream: &SensorStream, duration_s: f64) -> Result<Vec<Window>> {
    segment_with_hop(stream, duration_s, duration_s)
}

/// Cuts windows of `duration_s` starting every `hop_s` seconds.
pub fn segment_with_hop(stream: &SensorStream, duration_s: f64, hop_s: f64) -> Result<Vec<Window>> {
    let len = window_len(duration_s, stream.sample_rate_hz)?;
    let hop = window_len(hop_s, stream.sample_rate_hz).map_err(|_| {
        Error::validation("hop_s", format!("must be positive, got {hop_s}"))
    })?;
    if stream.is_empty() {
        return Ok(Vec::new());
    }
    let samples = stream.samples();
    let max_step = GAP_FACTOR / stream.sample_rate_hz;
    let mut windows = Vec::new();
    let mut start = 0;
    while start + len <= samples.len() {
        let chunk = &samples[start..start + len];
        let has_gap = chunk.windows(2).any(|p| p[1].t - p[0].t > max_step);
        windows.push(Window {
            index: windows.len(),
            duration_s: len as f64 / stream.sample_rate_hz,
            start_t: chunk[0].t,
            end_t: chunk[len - 1].t,
            has_gap,
            magnitudes: chunk
                .iter()
                .map(|s| (s.x * s.x + s.y * s.y + s.z * s.z).sqrt())
                .collect(),
        });
        start += hop;
    }
    Ok(windows)
}

/// One row of the ingestion format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRow {
    pub device: Device,
    pub sensor: SensorKind,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// All streams recorded for one session, keyed by (device, sensor).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensorRecording {
    streams: BTreeMap<(Device, SensorKind), SensorStream>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorFormat {
    Csv,
    Jsonl,
}

impl SensorFormat {
    /// Picks a format from a file extension, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => SensorFormat::Jsonl,
            _ => SensorFormat::Csv,
        }
    }
}

impl SensorRecording {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, stream: SensorStream) {
        self.streams.insert((stream.device, stream.sensor), stream);
    }

    pub fn get(&self, device: Device, sensor: SensorKind) -> Option<&SensorStream> {
        self.streams.get(&(device, sensor))
    }

    pub fn streams(&self) -> impl Iterator<Item = &SensorStream> {
        self.streams.values()
    }

    pub fn has_device(&self, device: Device) -> bool {
        SensorKind::ALL.iter().all(|&s| self.get(device, s).is_some())
    }

    pub fn from_rows(rows: impl IntoIterator<Item = SensorRow>, sample_rate_hz: f64) -> Result<Self> {
        let mut grouped: BTreeMap<(Device, SensorKind), Vec<SensorSample>> = BTreeMap::new();
        for row in rows {
            grouped
                .entry((row.device, row.sensor))
                .or_default()
                .push(SensorSample::new(row.t, row.x, row.y, row.z));
        }
        let mut rec = SensorRecording::new();
        for ((device, sensor), samples) in grouped {
            rec.insert(SensorStream::new(device, sensor, sample_rate_hz, samples)?);
        }
        Ok(rec)
    }

    pub fn rows(&self) -> impl Iterator<Item = SensorRow> + '_ {
        self.streams.values().flat_map(|s| {
            s.samples().iter().map(move |p| SensorRow {
                device: s.device,
                sensor: s.sensor,
                t: p.t,
                x: p.x,
                y: p.y,
                z: p.z,
            })
        })
    }

    pub fn read<R: BufRead>(reader: R, format: SensorFormat, sample_rate_hz: f64) -> Result<Self> {
        let rows = match format {
            SensorFormat::Csv => read_csv_rows(reader)?,
            SensorFormat::Jsonl => read_jsonl_rows(reader)?,
        };
        Self::from_rows(rows, sample_rate_hz)
    }

    pub fn write<W: Write>(&self, writer: W, format: SensorFormat) -> Result<()> {
        match format {
            SensorFormat::Csv => {
                let mut w = csv::Writer::from_writer(writer);
                for row in self.rows() {
                    w.serialize(row)?;
                }
                w.flush()?;
            }
            SensorFormat::Jsonl => {
                let mut w = std::io::BufWriter::new(writer);
                for row in self.rows() {
                    serde_json::to_writer(&mut w, &row)?;
                    w.write_all(b"\n")?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}

fn read_csv_rows<R: BufRead>(reader: R) -> Result<Vec<SensorRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<SensorRow>().enumerate() {
        rows.push(rec.map_err(|e| Error::Parse {
            location: format!("csv row {}", i + 2),
            reason: e.to_string(),
        })?);
    }
    Ok(rows)
}

fn read_jsonl_rows<R: BufRead>(reader: R) -> Result<Vec<SensorRow>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            location: format!("jsonl line {}", i + 1),
            reason: e.to_string(),
        })?);
    }
    Ok(rows)
}
