//! Per-window time and frequency statistics and the feature vector layouts
//! built from them.
//!
//! Nine statistics are computed for every sensor window. Production vectors
//! keep seven of them per sensor (`Ran` and `Peak2_f` are left out), giving
//! 14 slots per device and 28 when phone and watch are combined.

use std::cell::RefCell;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::context::ContextLabel;
use crate::error::{Error, Result};
use crate::sensor::{Device, SensorKind, Window};

pub const DEVICE_DIM: usize = 14;
pub const COMBINED_DIM: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    Mean,
    Var,
    Max,
    Min,
    Ran,
    Peak,
    PeakF,
    Peak2,
    Peak2F,
}

impl FeatureKind {
    pub const CANDIDATES: [FeatureKind; 9] = [
        FeatureKind::Mean,
        FeatureKind::Var,
        FeatureKind::Max,
        FeatureKind::Min,
        FeatureKind::Ran,
        FeatureKind::Peak,
        FeatureKind::PeakF,
        FeatureKind::Peak2,
        FeatureKind::Peak2F,
    ];

    pub const PRODUCTION: [FeatureKind; 7] = [
        FeatureKind::Mean,
        FeatureKind::Var,
        FeatureKind::Max,
        FeatureKind::Min,
        FeatureKind::Peak,
        FeatureKind::PeakF,
        FeatureKind::Peak2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Mean => "mean",
            FeatureKind::Var => "var",
            FeatureKind::Max => "max",
            FeatureKind::Min => "min",
            FeatureKind::Ran => "ran",
            FeatureKind::Peak => "peak",
            FeatureKind::PeakF => "peak_f",
            FeatureKind::Peak2 => "peak2",
            FeatureKind::Peak2F => "peak2_f",
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::CANDIDATES
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::validation("feature", format!("unknown feature `{s}`")))
    }
}

/// Names one position of a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureSlot {
    pub device: Device,
    pub sensor: SensorKind,
    pub feature: FeatureKind,
}

impl fmt::Display for FeatureSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}_{}_{}",
            self.device.as_str(),
            self.sensor.short(),
            self.feature.as_str()
        )
    }
}

impl FromStr for FeatureSlot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.splitn(3, '_');
        let (Some(d), Some(sn), Some(f)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::validation("feature slot", format!("malformed name `{s}`")));
        };
        Ok(FeatureSlot {
            device: d.parse()?,
            sensor: sn.parse()?,
            feature: f.parse()?,
        })
    }
}

/// Slot layout for one device over the given feature kinds, accelerometer first.
pub fn device_layout(device: Device, kinds: &[FeatureKind]) -> Vec<FeatureSlot> {
    SensorKind::ALL
        .iter()
        .flat_map(|&sensor| {
            kinds.iter().map(move |&feature| FeatureSlot {
                device,
                sensor,
                feature,
            })
        })
        .collect()
}

pub fn production_layout(device: Device) -> Vec<FeatureSlot> {
    device_layout(device, &FeatureKind::PRODUCTION)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeFeatures {
    pub mean: f64,
    pub var: f64,
    pub max: f64,
    pub min: f64,
    pub ran: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqFeatures {
    pub peak: f64,
    pub peak_f: f64,
    pub peak2: f64,
    pub peak2_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBin {
    pub frequency_hz: f64,
    pub amplitude: f64,
}

/// All nine candidate statistics of one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFeatures {
    pub mean: f64,
    pub var: f64,
    pub max: f64,
    pub min: f64,
    pub ran: f64,
    pub peak: f64,
    pub peak_f: f64,
    pub peak2: f64,
    pub peak2_f: f64,
}

impl WindowFeatures {
    pub fn from_parts(t: TimeFeatures, f: FreqFeatures) -> Self {
        WindowFeatures {
            mean: t.mean,
            var: t.var,
            max: t.max,
            min: t.min,
            ran: t.ran,
            peak: f.peak,
            peak_f: f.peak_f,
            peak2: f.peak2,
            peak2_f: f.peak2_f,
        }
    }

    pub fn get(&self, kind: FeatureKind) -> f64 {
        match kind {
            FeatureKind::Mean => self.mean,
            FeatureKind::Var => self.var,
            FeatureKind::Max => self.max,
            FeatureKind::Min => self.min,
            FeatureKind::Ran => self.ran,
            FeatureKind::Peak => self.peak,
            FeatureKind::PeakF => self.peak_f,
            FeatureKind::Peak2 => self.peak2,
            FeatureKind::Peak2F => self.peak2_f,
        }
    }
}

/// Mean, population variance, extrema and range.
pub fn time_features(values: &[f64]) -> Result<TimeFeatures> {
    if values.is_empty() {
        return Err(Error::validation("window", "empty window"));
    }
    let n = values.len() as f64;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut sum = 0.0;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    // Rounding can push the mean of a near-constant series an ulp outside
    // its extrema.
    let mean = (sum / n).clamp(min, max);
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(TimeFeatures {
        mean,
        var,
        max,
        min,
        ran: max - min,
    })
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// One-sided amplitude spectrum, DC excluded.
///
/// Bin `k` (1 ≤ k ≤ n/2) sits at `k·rate/n` Hz with amplitude `2|X_k|/n`, so
/// a bin-centred sinusoid of amplitude `A` reads `A`. No taper is applied.
pub fn spectrum(values: &[f64], sample_rate_hz: f64) -> Result<Vec<SpectrumBin>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::validation("window", format!("spectrum needs ≥ 2 samples, got {n}")));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::validation("sample_rate_hz", "must be positive"));
    }
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n).process(&mut buf));

    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Roundoff floor of the transform; below it a bin is indistinguishable from 0.
    let floor = 1e-12 * scale;
    Ok((1..=n / 2)
        .map(|k| {
            let amp = 2.0 * buf[k].norm() / n as f64;
            SpectrumBin {
                frequency_hz: k as f64 * sample_rate_hz / n as f64,
                amplitude: if amp <= floor { 0.0 } else { amp },
            }
        })
        .collect())
}

/// Main and secondary spectral peaks. Ties go to the lower frequency. A
/// single-bin spectrum reports `peak2 = 0` at the main frequency.
pub fn freq_features(spectrum: &[SpectrumBin]) -> Result<FreqFeatures> {
    if spectrum.is_empty() {
        return Err(Error::validation("spectrum", "empty spectrum"));
    }
    let better = |a: &SpectrumBin, b: &SpectrumBin| {
        a.amplitude > b.amplitude || (a.amplitude == b.amplitude && a.frequency_hz < b.frequency_hz)
    };
    let mut first = 0;
    for (i, bin) in spectrum.iter().enumerate().skip(1) {
        if better(bin, &spectrum[first]) {
            first = i;
        }
    }
    let second = spectrum
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != first)
        .fold(None::<usize>, |best, (i, bin)| match best {
            Some(b) if !better(bin, &spectrum[b]) => Some(b),
            _ => Some(i),
        });
    let main = spectrum[first];
    Ok(match second {
        Some(s) => FreqFeatures {
            peak: main.amplitude,
            peak_f: main.frequency_hz,
            peak2: spectrum[s].amplitude,
            peak2_f: spectrum[s].frequency_hz,
        },
        None => FreqFeatures {
            peak: main.amplitude,
            peak_f: main.frequency_hz,
            peak2: 0.0,
            peak2_f: main.frequency_hz,
        },
    })
}

pub fn window_features(window: &Window, sample_rate_hz: f64) -> Result<WindowFeatures> {
    let t = time_features(&window.magnitudes)?;
    let f = freq_features(&spectrum(&window.magnitudes, sample_rate_hz)?)?;
    Ok(WindowFeatures::from_parts(t, f))
}

/// An ordered feature vector together with the name of every slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Vec<FeatureSlot>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, layout: Vec<FeatureSlot>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::dimension("feature vector", layout.len(), values.len()));
        }
        Ok(FeatureVector { values, layout })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn device_vector(
    device: Device,
    acc: &Window,
    gyr: &Window,
    sample_rate_hz: f64,
    kinds: &[FeatureKind],
) -> Result<FeatureVector> {
    if acc.index != gyr.index {
        return Err(Error::validation(
            "window index",
            format!("accelerometer window {} vs gyroscope window {}", acc.index, gyr.index),
        ));
    }
    let fa = window_features(acc, sample_rate_hz)?;
    let fg = window_features(gyr, sample_rate_hz)?;
    let values = [fa, fg]
        .iter()
        .flat_map(|f| kinds.iter().map(move |&k| f.get(k)))
        .collect();
    FeatureVector::new(values, device_layout(device, kinds))
}

/// The 14-slot production vector of one device:
/// `[mean, var, max, min, peak, peak_f, peak2]` for accelerometer then gyroscope.
pub fn device_features(
    device: Device,
    acc: &Window,
    gyr: &Window,
    sample_rate_hz: f64,
) -> Result<FeatureVector> {
    device_vector(device, acc, gyr, sample_rate_hz, &FeatureKind::PRODUCTION)
}

/// All nine candidates per sensor (18 slots), for selection analysis.
pub fn candidate_features(
    device: Device,
    acc: &Window,
    gyr: &Window,
    sample_rate_hz: f64,
) -> Result<FeatureVector> {
    device_vector(device, acc, gyr, sample_rate_hz, &FeatureKind::CANDIDATES)
}

/// `[phone, watch]` when the watch is present, otherwise the phone vector.
pub fn auth_vector(phone: &FeatureVector, watch: Option<&FeatureVector>) -> Result<FeatureVector> {
    check_device_vector(phone, Device::Phone)?;
    let Some(watch) = watch else {
        return Ok(phone.clone());
    };
    check_device_vector(watch, Device::Watch)?;
    let mut values = phone.values.clone();
    values.extend_from_slice(&watch.values);
    let mut layout = phone.layout.clone();
    layout.extend_from_slice(&watch.layout);
    FeatureVector::new(values, layout)
}

fn check_device_vector(v: &FeatureVector, device: Device) -> Result<()> {
    if v.dim() != DEVICE_DIM {
        return Err(Error::dimension(
            format!("{} feature vector", device.as_str()),
            DEVICE_DIM,
            v.dim(),
        ));
    }
    if v.layout.iter().any(|s| s.device != device) {
        return Err(Error::validation(
            "layout",
            format!("expected {} slots", device.as_str()),
        ));
    }
    Ok(())
}

/// One row of a feature file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub window: usize,
    pub user_id: u32,
    pub context: Option<ContextLabel>,
    pub values: Vec<f64>,
}

/// A feature file: shared layout plus one row per window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub layout: Vec<FeatureSlot>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(layout: Vec<FeatureSlot>) -> Self {
        FeatureTable {
            layout,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: FeatureRow) -> Result<()> {
        if row.values.len() != self.layout.len() {
            return Err(Error::dimension("feature row", self.layout.len(), row.values.len()));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Column indices of `slots` within this table's layout.
    pub fn columns(&self, slots: &[FeatureSlot]) -> Result<Vec<usize>> {
        slots
            .iter()
            .map(|s| {
                self.layout
                    .iter()
                    .position(|l| l == s)
                    .ok_or_else(|| Error::validation("layout", format!("missing column {s}")))
            })
            .collect()
    }

    pub fn append(&mut self, other: FeatureTable) -> Result<()> {
        if other.layout != self.layout {
            return Err(Error::validation("layout", "feature files have different columns"));
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    /// CSV columns: `window`, the slot names, `user_id`, `context`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["window".to_string()];
        header.extend(self.layout.iter().map(|s| s.to_string()));
        header.push("user_id".into());
        header.push("context".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.window.to_string()];
            rec.extend(row.values.iter().map(|v| format!("{v:?}")));
            rec.push(row.user_id.to_string());
            rec.push(row.context.map(|c| c.as_str().to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let n = header.len();
        if n < 3 || &header[0] != "window" || &header[n - 2] != "user_id" || &header[n - 1] != "context"
        {
            return Err(Error::Parse {
                location: "feature csv header".into(),
                reason: "expected window,<slots...>,user_id,context".into(),
            });
        }
        let layout = header
            .iter()
            .skip(1)
            .take(n - 3)
            .map(str::parse)
            .collect::<Result<Vec<FeatureSlot>>>()?;
        let mut table = FeatureTable::new(layout);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let loc = || format!("feature csv row {}", i + 2);
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse {
                    location: loc(),
                    reason: format!("bad number `{s}`"),
                })
            };
            let window = rec[0].parse().map_err(|_| Error::Parse {
                location: loc(),
                reason: "bad window index".into(),
            })?;
            let values = (1..n - 2).map(|j| num(&rec[j])).collect::<Result<Vec<_>>>()?;
            let user_id = rec[n - 2].parse().map_err(|_| Error::Parse {
                location: loc(),
                reason: "bad user_id".into(),
            })?;
            let context = match &rec[n - 1] {
                "" => None,
                c => Some(c.parse()?),
            };
            table.push(FeatureRow {
                window,
                user_id,
                context,
                values,
            })?;
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const RATE: f64 = 50.0;

    fn sinusoid(n: usize, amp: f64, freq: f64, offset: f64) -> Vec<f64> {
        (0..n)
            .map(|i| offset + amp * (2.0 * PI * freq * i as f64 / RATE).sin())
            .collect()
    }

    #[test]
    fn time_features_examples() {
        let c = time_features(&[7.5; 20]).unwrap();
        assert_eq!((c.mean, c.var, c.max, c.min, c.ran), (7.5, 0.0, 7.5, 7.5, 0.0));
        let t = time_features(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((t.mean, t.var, t.max, t.min, t.ran), (2.5, 1.25, 4.0, 1.0, 3.0));
        assert!(time_features(&[]).is_err());
    }

    #[test]
    fn spectrum_of_constant_is_zero() {
        let s = spectrum(&[9.81; 300], RATE).unwrap();
        assert_eq!(s.len(), 150);
        assert!(s.iter().all(|b| b.amplitude == 0.0));
        assert_eq!(s[0].frequency_hz, 1.0 / 6.0);
        assert_eq!(s.last().unwrap().frequency_hz, 25.0);
        assert!(spectrum(&[1.0], RATE).is_err());
    }

    #[test]
    fn spectrum_recovers_bin_centred_amplitudes() {
        // 300 samples at 50 Hz: bins are 1/6 Hz apart; 2 Hz is bin 12, 3.5 Hz bin 21.
        let a = sinusoid(300, 2.0, 2.0, 9.8);
        let b = sinusoid(300, 1.0, 3.5, 0.0);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let s = spectrum(&sum, RATE).unwrap();
        assert!((s[11].amplitude - 2.0).abs() < 1e-9);
        assert!((s[20].amplitude - 1.0).abs() < 1e-9);
        let f = freq_features(&s).unwrap();
        assert!((f.peak_f - 2.0).abs() < 1e-12);
        assert!((f.peak2_f - 3.5).abs() < 1e-12);
    }

    #[test]
    fn freq_features_ordering_and_ties() {
        let bins = [
            SpectrumBin { frequency_hz: 1.0, amplitude: 5.0 },
            SpectrumBin { frequency_hz: 2.0, amplitude: 3.0 },
        ];
        let f = freq_features(&bins).unwrap();
        assert_eq!((f.peak, f.peak_f, f.peak2, f.peak2_f), (5.0, 1.0, 3.0, 2.0));

        let flat: Vec<_> = (1..=5)
            .map(|k| SpectrumBin { frequency_hz: k as f64, amplitude: 1.0 })
            .collect();
        let f = freq_features(&flat).unwrap();
        assert_eq!((f.peak_f, f.peak2_f), (1.0, 2.0));
        assert!(freq_features(&[]).is_err());
    }

    #[test]
    fn device_features_constant_windows() {
        let acc = Window::from_magnitudes(3, RATE, vec![2.0; 300]);
        let gyr = Window::from_magnitudes(3, RATE, vec![0.5; 300]);
        let v = device_features(Device::Phone, &acc, &gyr, RATE).unwrap();
        let f_min = RATE / 300.0;
        assert_eq!(
            v.values,
            vec![2.0, 0.0, 2.0, 2.0, 0.0, f_min, 0.0, 0.5, 0.0, 0.5, 0.5, 0.0, f_min, 0.0]
        );
        let names: Vec<String> = v.layout.iter().map(|s| s.to_string()).collect();
        assert_eq!(names[0], "phone_acc_mean");
        assert_eq!(names[6], "phone_acc_peak2");
        assert_eq!(names[13], "phone_gyr_peak2");
        assert_eq!(names.len(), DEVICE_DIM);
    }

    #[test]
    fn device_features_rejects_mismatched_index() {
        let acc = Window::from_magnitudes(0, RATE, vec![1.0; 30]);
        let gyr = Window::from_magnitudes(1, RATE, vec![1.0; 30]);
        assert!(device_features(Device::Phone, &acc, &gyr, RATE).is_err());
    }

    #[test]
    fn device_features_is_composition() {
        let acc = Window::from_magnitudes(0, RATE, sinusoid(300, 1.3, 1.5, 9.0));
        let gyr = Window::from_magnitudes(0, RATE, sinusoid(300, 0.4, 2.5, 1.0));
        let v = device_features(Device::Watch, &acc, &gyr, RATE).unwrap();
        let mut expected = Vec::new();
        for w in [&acc, &gyr] {
            let t = time_features(&w.magnitudes).unwrap();
            let f = freq_features(&spectrum(&w.magnitudes, RATE).unwrap()).unwrap();
            expected.extend([t.mean, t.var, t.max, t.min, f.peak, f.peak_f, f.peak2]);
        }
        assert_eq!(v.values, expected);
    }

    #[test]
    fn auth_vector_concatenates() {
        let acc = Window::from_magnitudes(0, RATE, sinusoid(300, 1.0, 2.0, 9.0));
        let gyr = Window::from_magnitudes(0, RATE, sinusoid(300, 0.5, 1.0, 1.0));
        let sp = device_features(Device::Phone, &acc, &gyr, RATE).unwrap();
        let sw = device_features(Device::Watch, &gyr, &acc, RATE).unwrap();
        let both = auth_vector(&sp, Some(&sw)).unwrap();
        assert_eq!(both.dim(), COMBINED_DIM);
        assert_eq!(&both.values[..14], &sp.values[..]);
        assert_eq!(&both.values[14..], &sw.values[..]);
        let mut layout = sp.layout.clone();
        layout.extend(sw.layout.clone());
        assert_eq!(both.layout, layout);
        assert_eq!(auth_vector(&sp, None).unwrap(), sp);
        assert!(auth_vector(&sw, None).is_err());
        let short = FeatureVector::new(vec![1.0], vec![sp.layout[0]]).unwrap();
        assert!(auth_vector(&short, None).is_err());
    }

    #[test]
    fn slot_names_round_trip() {
        for slot in device_layout(Device::Watch, &FeatureKind::CANDIDATES) {
            assert_eq!(slot.to_string().parse::<FeatureSlot>().unwrap(), slot);
        }
    }

    #[test]
    fn feature_table_csv() {
        let mut t = FeatureTable::new(production_layout(Device::Phone));
        t.push(FeatureRow {
            window: 0,
            user_id: 4,
            context: Some(ContextLabel::Moving),
            values: (0..14).map(|i| i as f64 * 0.1).collect(),
        })
        .unwrap();
        t.push(FeatureRow { window: 1, user_id: 4, context: None, values: vec![1.0 / 3.0; 14] })
            .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = FeatureTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn window() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.0f64..20.0, 4..120)
        }

        fn close(a: f64, b: f64) -> bool {
            (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
        }

        proptest! {
            #[test]
            fn scale_equivariance(values in window(), s in 0.01f64..100.0) {
                let scaled: Vec<f64> = values.iter().map(|v| v * s).collect();
                let a = window_features(&Window::from_magnitudes(0, RATE, values.clone()), RATE).unwrap();
                let b = window_features(&Window::from_magnitudes(0, RATE, scaled.clone()), RATE).unwrap();
                for (x, y) in [(a.mean, b.mean), (a.max, b.max), (a.min, b.min), (a.ran, b.ran), (a.peak, b.peak), (a.peak2, b.peak2)] {
                    prop_assert!(close(x * s, y), "{} vs {}", x * s, y);
                }
                prop_assert!(close(a.var * s * s, b.var));
                // Frequencies are only comparable when the top amplitudes are not near-tied.
                let mut amps: Vec<f64> = spectrum(&values, RATE).unwrap().iter().map(|b| b.amplitude).collect();
                amps.sort_by(|x, y| y.total_cmp(x));
                amps.push(0.0);
                amps.push(0.0);
                let gap = (amps[0] - amps[1]).min(amps[1] - amps[2]);
                prop_assume!(gap > 1e-6 * (1.0 + amps[0]));
                prop_assert_eq!((a.peak_f, a.peak2_f), (b.peak_f, b.peak2_f));
            }

            #[test]
            fn main_peak_dominates(values in window()) {
                let f = freq_features(&spectrum(&values, RATE).unwrap()).unwrap();
                prop_assert!(f.peak >= f.peak2);
            }

            #[test]
            fn fast_spectrum_matches_naive_dft(values in window()) {
                let n = values.len();
                let fast = spectrum(&values, RATE).unwrap();
                let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (k, bin) in (1..=n / 2).zip(&fast) {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (t, v) in values.iter().enumerate() {
                        let a = -2.0 * PI * (k * t % n) as f64 / n as f64;
                        re += v * a.cos();
                        im += v * a.sin();
                    }
                    let naive = 2.0 * re.hypot(im) / n as f64;
                    prop_assert!((bin.amplitude - naive).abs() <= 1e-9 * (1.0 + scale));
                }
            }
        }
    }
}
