//! Synthetic multi-user, multi-device motion streams.
//!
//! This is a sinusoid-plus-noise gait model chosen because its spectral
//! content is known exactly. It makes no claim of physiological realism and
//! results on it are not comparable to measurements on real people.
//!
//! Every axis of every sensor follows
//!
//! ```text
//! s(t) = offset + axis · (A1(e)·sin θ(t) + A2(e)·sin(2θ(t) + φ2)) + noise
//! ```
//!
//! where the phase `θ` advances at the frequency `f(e)`. Frequency and
//! amplitudes are redrawn around the profile values once per one-second
//! epoch `e` (relative jitter), so a user's windows vary from one to the next
//! and longer windows average that variation out. The accelerometer offset is
//! gravity; the gyroscope offset is a small sensor bias. Stationary contexts
//! use tremor-sized amplitudes.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::context::ContextLabel;
use crate::error::{Error, Result};
use crate::sensor::{Device, SensorKind, SensorRecording, SensorSample, SensorStream};

pub const GRAVITY: f64 = 9.81;
/// Length of one parameter epoch in seconds.
pub const EPOCH_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub frequency_hz: f64,
    pub amp_primary: f64,
    pub amp_secondary: f64,
    /// Phase of the second harmonic relative to the first.
    pub phase_secondary: f64,
    /// Unit direction of the oscillation.
    pub axis: [f64; 3],
    pub offset: [f64; 3],
    pub noise_std: f64,
    /// Relative per-epoch standard deviation of the frequency.
    pub freq_jitter: f64,
    /// Relative per-epoch standard deviation of both amplitudes.
    pub amp_jitter: f64,
}

impl MotionParams {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let nyquist = sample_rate_hz / 2.0;
        if !(self.frequency_hz > 0.0 && 2.0 * self.frequency_hz < nyquist) {
            return Err(Error::validation(
                "frequency_hz",
                format!("{} Hz and its harmonic must lie in (0, {nyquist}) Hz", self.frequency_hz),
            ));
        }
        let scalars = [
            ("amp_primary", self.amp_primary),
            ("amp_secondary", self.amp_secondary),
            ("noise_std", self.noise_std),
            ("freq_jitter", self.freq_jitter),
            ("amp_jitter", self.amp_jitter),
        ];
        for (name, v) in scalars {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("must be finite and ≥ 0, got {v}")));
            }
        }
        let norm = self.axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::validation("axis", "must be a unit vector"));
        }
        if self.offset.iter().chain([&self.phase_secondary]).any(|v| !v.is_finite()) {
            return Err(Error::validation("offset", "must be finite"));
        }
        Ok(())
    }

    /// `(1−λ)·self + λ·other`, with the axis renormalised.
    pub fn blend(&self, other: &MotionParams, lambda: f64) -> MotionParams {
        // Endpoints are returned verbatim; renormalising the axis would
        // perturb the last bit.
        if lambda == 0.0 {
            return *self;
        }
        if lambda == 1.0 {
            return *other;
        }
        let mix = |a: f64, b: f64| (1.0 - lambda) * a + lambda * b;
        let mix3 = |a: [f64; 3], b: [f64; 3]| [mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2])];
        let mut axis = mix3(self.axis, other.axis);
        let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            axis.iter_mut().for_each(|a| *a /= norm);
        } else {
            axis = other.axis;
        }
        MotionParams {
            frequency_hz: mix(self.frequency_hz, other.frequency_hz),
            amp_primary: mix(self.amp_primary, other.amp_primary),
            amp_secondary: mix(self.amp_secondary, other.amp_secondary),
            phase_secondary: mix(self.phase_secondary, other.phase_secondary),
            axis,
            offset: mix3(self.offset, other.offset),
            noise_std: mix(self.noise_std, other.noise_std),
            freq_jitter: mix(self.freq_jitter, other.freq_jitter),
            amp_jitter: mix(self.amp_jitter, other.amp_jitter),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextParams {
    pub stationary: MotionParams,
    pub moving: MotionParams,
}

impl ContextParams {
    pub fn get(&self, context: ContextLabel) -> &MotionParams {
        match context {
            ContextLabel::Stationary => &self.stationary,
            ContextLabel::Moving => &self.moving,
        }
    }

    fn blend(&self, other: &ContextParams, lambda: f64) -> ContextParams {
        ContextParams {
            stationary: self.stationary.blend(&other.stationary, lambda),
            moving: self.moving.blend(&other.moving, lambda),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub acc: ContextParams,
    pub gyr: ContextParams,
}

impl DeviceProfile {
    pub fn get(&self, sensor: SensorKind) -> &ContextParams {
        match sensor {
            SensorKind::Accelerometer => &self.acc,
            SensorKind::Gyroscope => &self.gyr,
        }
    }

    fn blend(&self, other: &DeviceProfile, lambda: f64) -> DeviceProfile {
        DeviceProfile {
            acc: self.acc.blend(&other.acc, lambda),
            gyr: self.gyr.blend(&other.gyr, lambda),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: u32,
    pub phone: DeviceProfile,
    pub watch: DeviceProfile,
    /// Drives phases and noise; two profiles with equal seeds and
    /// parameters produce identical streams.
    pub seed: u64,
}

impl UserProfile {
    pub fn device(&self, device: Device) -> &DeviceProfile {
        match device {
            Device::Phone => &self.phone,
            Device::Watch => &self.watch,
        }
    }

    pub fn params(&self, device: Device, sensor: SensorKind, context: ContextLabel) -> &MotionParams {
        self.device(device).get(sensor).get(context)
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        for d in Device::ALL {
            for s in SensorKind::ALL {
                for c in ContextLabel::ALL {
                    self.params(d, s, c).validate(sample_rate_hz)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub context: ContextLabel,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionScript {
    pub segments: Vec<Segment>,
}

impl SessionScript {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let s = SessionScript { segments };
        s.validate()?;
        Ok(s)
    }

    /// Alternating Stationary/Moving blocks of `block_s` seconds until each
    /// context has `per_context_s` seconds.
    pub fn alternating(per_context_s: f64, block_s: f64) -> Result<Self> {
        if !(block_s > 0.0 && per_context_s > 0.0) {
            return Err(Error::validation("duration_s", "must be positive"));
        }
        let blocks = (per_context_s / block_s).ceil() as usize;
        let mut segments = Vec::with_capacity(2 * blocks);
        for _ in 0..blocks {
            for context in ContextLabel::ALL {
                segments.push(Segment { context, duration_s: block_s });
            }
        }
        Self::new(segments)
    }

    pub fn single(context: ContextLabel, duration_s: f64) -> Result<Self> {
        Self::new(vec![Segment { context, duration_s }])
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::validation("script", "no segments"));
        }
        if let Some(s) = self.segments.iter().find(|s| !(s.duration_s > 0.0 && s.duration_s.is_finite())) {
            return Err(Error::validation("duration_s", format!("must be positive, got {}", s.duration_s)));
        }
        Ok(())
    }

    pub fn total_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    /// Context at sample `i`.
    fn context_at(&self, starts: &[usize], i: usize) -> ContextLabel {
        let seg = starts.partition_point(|&s| s <= i).saturating_sub(1);
        self.segments[seg].context
    }

    fn sample_starts(&self, sample_rate_hz: f64) -> Vec<usize> {
        let mut acc = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let start = (acc * sample_rate_hz).round() as usize;
                acc += s.duration_s;
                start
            })
            .collect()
    }

    /// Context of each complete window, `None` when a window straddles a
    /// segment boundary.
    pub fn window_contexts(&self, window_s: f64, sample_rate_hz: f64) -> Result<Vec<Option<ContextLabel>>> {
        let n = crate::sensor::window_len(window_s, sample_rate_hz)?;
        let total = (self.total_s() * sample_rate_hz).round() as usize;
        let starts = self.sample_starts(sample_rate_hz);
        Ok((0..total / n)
            .map(|k| {
                let first = self.context_at(&starts, k * n);
                let last = self.context_at(&starts, (k + 1) * n - 1);
                let first_seg = starts.partition_point(|&s| s <= k * n);
                let last_seg = starts.partition_point(|&s| s < (k + 1) * n);
                (first_seg == last_seg && first == last).then_some(first)
            })
            .collect())
    }
}

fn stream_index(device: Device, sensor: SensorKind) -> u64 {
    let d = match device {
        Device::Phone => 0,
        Device::Watch => 1,
    };
    let s = match sensor {
        SensorKind::Accelerometer => 0,
        SensorKind::Gyroscope => 1,
    };
    2 * d + s + 1
}

/// Phone and watch streams (accelerometer and gyroscope each) for a script.
pub fn generate_user(profile: &UserProfile, script: &SessionScript, sample_rate_hz: f64) -> Result<SensorRecording> {
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(Error::validation("sample_rate_hz", "must be positive"));
    }
    profile.validate(sample_rate_hz)?;
    script.validate()?;
    let mut rec = SensorRecording::new();
    for device in Device::ALL {
        for sensor in SensorKind::ALL {
            let stream = generate_stream(profile, device, sensor, script, sample_rate_hz)?;
            rec.insert(stream);
        }
    }
    Ok(rec)
}

/// One sensor stream. Uses its own random stream so devices and sensors are
/// mutually independent given the seed.
pub fn generate_stream(
    profile: &UserProfile,
    device: Device,
    sensor: SensorKind,
    script: &SessionScript,
    sample_rate_hz: f64,
) -> Result<SensorStream> {
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    rng.set_stream(stream_index(device, sensor));
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let starts = script.sample_starts(sample_rate_hz);
    let total = (script.total_s() * sample_rate_hz).round() as usize;
    let epoch_len = ((EPOCH_S * sample_rate_hz).round() as usize).max(1);
    let dt = 1.0 / sample_rate_hz;

    let mut theta: f64 = rng.random_range(0.0..TAU);
    let mut samples = Vec::with_capacity(total);
    let (mut f, mut a1, mut a2) = (0.0, 0.0, 0.0);
    let mut epoch_context = None;
    for i in 0..total {
        let context = script.context_at(&starts, i);
        let p = profile.params(device, sensor, context);
        if i % epoch_len == 0 || epoch_context != Some(context) {
            let fj = 1.0 + p.freq_jitter * std_normal.sample(&mut rng);
            let aj = 1.0 + p.amp_jitter * std_normal.sample(&mut rng);
            f = (p.frequency_hz * fj).clamp(1e-3, sample_rate_hz / 4.0);
            a1 = (p.amp_primary * aj).max(0.0);
            a2 = (p.amp_secondary * aj).max(0.0);
            epoch_context = Some(context);
        }
        let osc = a1 * theta.sin() + a2 * (2.0 * theta + p.phase_secondary).sin();
        let mut v = [0.0; 3];
        for j in 0..3 {
            let noise = if p.noise_std > 0.0 {
                p.noise_std * std_normal.sample(&mut rng)
            } else {
                0.0
            };
            v[j] = p.offset[j] + p.axis[j] * osc + noise;
        }
        samples.push(SensorSample::new(i as f64 * dt, v[0], v[1], v[2]));
        theta = (theta + TAU * f * dt) % TAU;
    }
    SensorStream::new(device, sensor, sample_rate_hz, samples)
}

/// Attacker whose parameters move toward the victim's by `lambda`; the
/// attacker keeps their own seed and hence their own noise realisation.
pub fn inject_mimicry(attacker: &UserProfile, victim: &UserProfile, lambda: f64) -> Result<UserProfile> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::validation("lambda", format!("must be in [0, 1], got {lambda}")));
    }
    Ok(UserProfile {
        user_id: attacker.user_id,
        phone: attacker.phone.blend(&victim.phone, lambda),
        watch: attacker.watch.blend(&victim.watch, lambda),
        seed: attacker.seed,
    })
}

/// Ranges from which user parameters are drawn. Between-user spread versus
/// within-user jitter controls how separable a population is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetParams {
    /// Moving-context fundamental frequency range (Hz).
    pub gait_hz: (f64, f64),
    pub acc_amp: (f64, f64),
    pub gyr_amp: (f64, f64),
    /// Secondary amplitude as a fraction of the primary.
    pub secondary_ratio: (f64, f64),
    /// Half-width of the per-user deviation of |offset| from its nominal value.
    pub acc_offset_spread: f64,
    pub gyr_offset: (f64, f64),
    pub tremor_hz: (f64, f64),
    pub acc_tremor_amp: (f64, f64),
    pub gyr_tremor_amp: (f64, f64),
    pub acc_noise: (f64, f64),
    pub gyr_noise: (f64, f64),
    pub freq_jitter: f64,
    pub amp_jitter: f64,
    /// Maximum tilt of the oscillation axis away from the offset direction (rad).
    pub max_tilt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Users differ clearly relative to their own window-to-window variation.
    Separable,
    /// Narrow parameter ranges and heavier jitter; users overlap.
    Overlapping,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "separable" => Ok(Preset::Separable),
            "overlapping" => Ok(Preset::Overlapping),
            other => Err(Error::validation("preset", format!("unknown preset `{other}`"))),
        }
    }
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Separable => "separable",
            Preset::Overlapping => "overlapping",
        }
    }

    pub fn params(self) -> PresetParams {
        match self {
            Preset::Separable => PresetParams {
                gait_hz: (1.4, 2.4),
                acc_amp: (1.0, 4.0),
                gyr_amp: (0.4, 1.6),
                secondary_ratio: (0.1, 0.6),
                acc_offset_spread: 0.4,
                gyr_offset: (0.02, 0.3),
                tremor_hz: (0.3, 1.5),
                acc_tremor_amp: (0.02, 0.2),
                gyr_tremor_amp: (0.01, 0.08),
                acc_noise: (0.05, 0.2),
                gyr_noise: (0.01, 0.05),
                freq_jitter: 0.12,
                amp_jitter: 0.45,
                max_tilt: 1.0,
            },
            Preset::Overlapping => PresetParams {
                gait_hz: (1.85, 1.95),
                acc_amp: (2.2, 2.4),
                gyr_amp: (0.85, 0.95),
                secondary_ratio: (0.33, 0.37),
                acc_offset_spread: 0.02,
                gyr_offset: (0.07, 0.08),
                tremor_hz: (0.7, 0.8),
                acc_tremor_amp: (0.09, 0.11),
                gyr_tremor_amp: (0.035, 0.045),
                acc_noise: (0.15, 0.2),
                gyr_noise: (0.03, 0.04),
                freq_jitter: 0.12,
                amp_jitter: 0.45,
                max_tilt: 0.2,
            },
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// A unit vector `tilt` radians from `base` (unit) in a random azimuth.
fn tilted(rng: &mut ChaCha8Rng, base: [f64; 3], tilt: f64) -> [f64; 3] {
    let helper = if base[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot: f64 = helper.iter().zip(&base).map(|(a, b)| a * b).sum();
    let mut u = [0.0; 3];
    for j in 0..3 {
        u[j] = helper[j] - dot * base[j];
    }
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    u.iter_mut().for_each(|a| *a /= nu);
    let v = [
        base[1] * u[2] - base[2] * u[1],
        base[2] * u[0] - base[0] * u[2],
        base[0] * u[1] - base[1] * u[0],
    ];
    let phi = rng.random_range(0.0..TAU);
    let mut out = [0.0; 3];
    for j in 0..3 {
        out[j] = tilt.cos() * base[j] + tilt.sin() * (phi.cos() * u[j] + phi.sin() * v[j]);
    }
    out
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi = rng.random_range(0.0..TAU);
    let r = (1.0 - z * z).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

fn sensor_params(rng: &mut ChaCha8Rng, p: &PresetParams, sensor: SensorKind, gait_hz: f64) -> ContextParams {
    let (offset_dir, offset_mag, amp, tremor_amp, noise) = match sensor {
        SensorKind::Accelerometer => (
            random_unit(rng),
            GRAVITY + uniform(rng, (-p.acc_offset_spread, p.acc_offset_spread)),
            p.acc_amp,
            p.acc_tremor_amp,
            p.acc_noise,
        ),
        SensorKind::Gyroscope => (random_unit(rng), uniform(rng, p.gyr_offset), p.gyr_amp, p.gyr_tremor_amp, p.gyr_noise),
    };
    let offset = offset_dir.map(|v| v * offset_mag);
    let noise_std = uniform(rng, noise);
    let moving_amp = uniform(rng, amp);
    let tilt = rng.random_range(0.0..p.max_tilt.max(1e-9));
    let moving = MotionParams {
        frequency_hz: gait_hz,
        amp_primary: moving_amp,
        amp_secondary: moving_amp * uniform(rng, p.secondary_ratio),
        phase_secondary: rng.random_range(0.0..TAU),
        axis: tilted(rng, offset_dir, tilt),
        offset,
        noise_std,
        freq_jitter: p.freq_jitter,
        amp_jitter: p.amp_jitter,
    };
    let tremor = uniform(rng, tremor_amp);
    let stationary = MotionParams {
        frequency_hz: uniform(rng, p.tremor_hz),
        amp_primary: tremor,
        amp_secondary: tremor * uniform(rng, p.secondary_ratio),
        phase_secondary: rng.random_range(0.0..TAU),
        axis: tilted(rng, offset_dir, tilt),
        offset,
        noise_std: noise_std * 0.5,
        freq_jitter: p.freq_jitter,
        amp_jitter: p.amp_jitter,
    };
    ContextParams { stationary, moving }
}

fn device_profile(rng: &mut ChaCha8Rng, p: &PresetParams) -> DeviceProfile {
    let gait_hz = uniform(rng, p.gait_hz);
    DeviceProfile {
        acc: sensor_params(rng, p, SensorKind::Accelerometer, gait_hz),
        gyr: sensor_params(rng, p, SensorKind::Gyroscope, gait_hz),
    }
}

/// A random profile drawn from `params`; phone and watch parameters are
/// drawn independently of each other.
pub fn random_profile(user_id: u32, params: &PresetParams, seed: u64) -> UserProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(user_id) + 1);
    let phone = device_profile(&mut rng, params);
    let watch = device_profile(&mut rng, params);
    UserProfile {
        user_id,
        phone,
        watch,
        seed: rng.random(),
    }
}

/// `n_users` profiles with ids `first_id..first_id + n_users`.
pub fn population(preset: Preset, n_users: usize, first_id: u32, seed: u64) -> Vec<UserProfile> {
    population_with(&preset.params(), n_users, first_id, seed)
}

pub fn population_with(params: &PresetParams, n_users: usize, first_id: u32, seed: u64) -> Vec<UserProfile> {
    (0..n_users as u32)
        .map(|i| random_profile(first_id + i, params, seed))
        .collect()
}

/// Ground truth for one generated window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRow {
    pub user_id: u32,
    pub window: usize,
    pub context: Option<ContextLabel>,
}

pub fn ground_truth(
    user_id: u32,
    script: &SessionScript,
    window_s: f64,
    sample_rate_hz: f64,
) -> Result<Vec<TruthRow>> {
    Ok(script
        .window_contexts(window_s, sample_rate_hz)?
        .into_iter()
        .enumerate()
        .map(|(window, context)| TruthRow { user_id, window, context })
        .collect())
}

/// Writes truth rows as CSV (`user_id,window,context`, empty context for
/// windows straddling a context switch).
pub fn write_truth<W: std::io::Write>(rows: &[TruthRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth<R: std::io::Read>(reader: R) -> Result<Vec<TruthRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                location: format!("truth csv row {}", i + 2),
                reason: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{window_features, FeatureKind};
    use crate::sensor::segment;

    fn pure_tone(freq: f64) -> UserProfile {
        let m = MotionParams {
            frequency_hz: freq,
            amp_primary: 1.0,
            amp_secondary: 0.0,
            phase_secondary: 0.0,
            axis: [0.0, 0.0, 1.0],
            offset: [0.0, 0.0, GRAVITY],
            noise_std: 0.0,
            freq_jitter: 0.0,
            amp_jitter: 0.0,
        };
        let c = ContextParams { stationary: m, moving: m };
        let d = DeviceProfile { acc: c, gyr: c };
        UserProfile { user_id: 0, phone: d, watch: d, seed: 3 }
    }

    #[test]
    fn noiseless_single_harmonic_peaks_at_gait_frequency() {
        for freq in [1.5, 2.0, 2.5] {
            let p = pure_tone(freq);
            let script = SessionScript::single(ContextLabel::Moving, 12.0).unwrap();
            let rec = generate_user(&p, &script, 50.0).unwrap();
            let s = rec.get(Device::Phone, SensorKind::Accelerometer).unwrap();
            for w in segment(s, 6.0).unwrap() {
                let f = window_features(&w, 50.0).unwrap();
                assert_eq!(f.get(FeatureKind::PeakF), freq);
            }
        }
    }

    #[test]
    fn stationary_variance_far_below_moving() {
        let p = random_profile(1, &Preset::Separable.params(), 9);
        let script = SessionScript::new(vec![
            Segment { context: ContextLabel::Stationary, duration_s: 60.0 },
            Segment { context: ContextLabel::Moving, duration_s: 60.0 },
        ])
        .unwrap();
        let rec = generate_user(&p, &script, 50.0).unwrap();
        let windows = segment(rec.get(Device::Phone, SensorKind::Accelerometer).unwrap(), 6.0).unwrap();
        let var = |w: &crate::sensor::Window| window_features(w, 50.0).unwrap().var;
        let still: f64 = windows[..10].iter().map(var).sum::<f64>() / 10.0;
        let moving: f64 = windows[10..].iter().map(var).sum::<f64>() / 10.0;
        assert!(still * 20.0 < moving, "{still} vs {moving}");
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let p = random_profile(4, &Preset::Separable.params(), 1);
        let script = SessionScript::alternating(12.0, 6.0).unwrap();
        let a = generate_user(&p, &script, 50.0).unwrap();
        let b = generate_user(&p, &script, 50.0).unwrap();
        assert_eq!(a, b);
        let mut q = p.clone();
        q.seed ^= 1;
        assert_ne!(a, generate_user(&q, &script, 50.0).unwrap());
    }

    #[test]
    fn mimicry_endpoints() {
        let params = Preset::Separable.params();
        let victim = random_profile(1, &params, 5);
        let attacker = random_profile(2, &params, 5);
        let same = inject_mimicry(&attacker, &victim, 0.0).unwrap();
        assert_eq!(same, attacker);
        let full = inject_mimicry(&attacker, &victim, 1.0).unwrap();
        assert_eq!(full.phone, victim.phone);
        assert_eq!(full.seed, attacker.seed);
        assert!(inject_mimicry(&attacker, &victim, 1.5).is_err());
    }

    #[test]
    fn invalid_frequency_rejected() {
        let mut p = pure_tone(2.0);
        p.phone.acc.moving.frequency_hz = 30.0;
        let script = SessionScript::single(ContextLabel::Moving, 6.0).unwrap();
        assert!(matches!(generate_user(&p, &script, 50.0), Err(Error::Validation { .. })));
        p.phone.acc.moving.frequency_hz = 0.0;
        assert!(generate_user(&p, &script, 50.0).is_err());
    }

    #[test]
    fn window_contexts_flag_straddling_windows() {
        let script = SessionScript::new(vec![
            Segment { context: ContextLabel::Stationary, duration_s: 9.0 },
            Segment { context: ContextLabel::Moving, duration_s: 12.0 },
        ])
        .unwrap();
        let ctx = script.window_contexts(6.0, 50.0).unwrap();
        assert_eq!(
            ctx,
            vec![Some(ContextLabel::Stationary), None, Some(ContextLabel::Moving)]
        );
    }

    #[test]
    fn profile_parameters_valid() {
        for preset in [Preset::Separable, Preset::Overlapping] {
            for p in population(preset, 20, 0, 11) {
                p.validate(50.0).unwrap();
            }
        }
    }

    #[test]
    fn truth_csv_round_trip() {
        let script = SessionScript::alternating(30.0, 9.0).unwrap();
        let rows = ground_truth(7, &script, 6.0, 50.0).unwrap();
        assert!(rows.iter().any(|r| r.context.is_none()));
        let mut buf = Vec::new();
        write_truth(&rows, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("user_id,window,context\n7,0,stationary"));
        assert_eq!(read_truth(buf.as_slice()).unwrap(), rows);
    }
}
