//! Cross-validated FRR/FAR/accuracy, device and context ablations, parameter
//! sweeps and masquerade (mimicry) survival curves.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context::{ConfusionMatrix, ContextDetector, ContextLabel};
use crate::error::{Error, Result};
use crate::features::{device_features, production_layout, FeatureRow, FeatureTable, FeatureVector};
use crate::forest::ForestParams;
use crate::krr::{KrrLearner, Learner, Verdict};
use crate::pipeline::{
    authenticate_vectors, train_auth_model, BankEntry, DeviceSet, ImpostorPool, ModelBank,
};
use crate::sensor::{segment, Device, SensorKind, SensorRecording, DEFAULT_SAMPLE_RATE_HZ, DEFAULT_WINDOW_S};
use crate::stats::{wilson, Interval, Z95};
use crate::synth::{generate_user, inject_mimicry, population_with, Preset, PresetParams, SessionScript, UserProfile};

/// One labelled window with per-device production vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub user_id: u32,
    pub k: usize,
    pub context: ContextLabel,
    /// Output of a context detector, when one has been applied.
    pub detected: Option<ContextLabel>,
    pub phone: Vec<f64>,
    pub watch: Option<Vec<f64>>,
}

impl WindowRecord {
    /// Context used to pick a model: the detected one if present.
    pub fn routed_context(&self) -> ContextLabel {
        self.detected.unwrap_or(self.context)
    }

    pub fn features(&self, device_set: DeviceSet) -> Option<Vec<f64>> {
        match device_set {
            DeviceSet::PhoneOnly => Some(self.phone.clone()),
            DeviceSet::PhoneAndWatch => self.watch.as_ref().map(|w| {
                let mut v = self.phone.clone();
                v.extend_from_slice(w);
                v
            }),
        }
    }

    pub fn phone_vector(&self) -> FeatureVector {
        FeatureVector {
            values: self.phone.clone(),
            layout: production_layout(Device::Phone),
        }
    }

    pub fn watch_vector(&self) -> Option<FeatureVector> {
        self.watch.as_ref().map(|w| FeatureVector {
            values: w.clone(),
            layout: production_layout(Device::Watch),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub window_s: f64,
    pub sample_rate_hz: f64,
    pub records: Vec<WindowRecord>,
}

/// Feature records of one recording. Windows without a known context or
/// with a phone-side gap are dropped; a watch-side gap drops only the watch.
pub fn extract_records(
    user_id: u32,
    rec: &SensorRecording,
    contexts: &[Option<ContextLabel>],
    window_s: f64,
) -> Result<Vec<WindowRecord>> {
    let windows = |d: Device, s: SensorKind| -> Result<Option<Vec<crate::sensor::Window>>> {
        rec.get(d, s).map(|st| segment(st, window_s)).transpose()
    };
    let rate = rec
        .get(Device::Phone, SensorKind::Accelerometer)
        .map_or(DEFAULT_SAMPLE_RATE_HZ, |s| s.sample_rate_hz);
    let pa = windows(Device::Phone, SensorKind::Accelerometer)?
        .ok_or_else(|| Error::InsufficientData("no phone accelerometer stream".into()))?;
    let pg = windows(Device::Phone, SensorKind::Gyroscope)?
        .ok_or_else(|| Error::InsufficientData("no phone gyroscope stream".into()))?;
    let wa = windows(Device::Watch, SensorKind::Accelerometer)?;
    let wg = windows(Device::Watch, SensorKind::Gyroscope)?;
    let n = pa.len().min(pg.len()).min(contexts.len());
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let Some(context) = contexts[k] else { continue };
        if pa[k].has_gap || pg[k].has_gap {
            continue;
        }
        let phone = device_features(Device::Phone, &pa[k], &pg[k], rate)?.values;
        let watch = match (&wa, &wg) {
            (Some(a), Some(g)) if k < a.len() && k < g.len() && !a[k].has_gap && !g[k].has_gap => {
                Some(device_features(Device::Watch, &a[k], &g[k], rate)?.values)
            }
            _ => None,
        };
        out.push(WindowRecord { user_id, k, context, detected: None, phone, watch });
    }
    Ok(out)
}

impl Dataset {
    /// Generates and extracts every profile in parallel; records are kept in
    /// profile order.
    pub fn generate(profiles: &[UserProfile], script: &SessionScript, window_s: f64, sample_rate_hz: f64) -> Result<Self> {
        let contexts = script.window_contexts(window_s, sample_rate_hz)?;
        let per_user: Vec<Vec<WindowRecord>> = profiles
            .par_iter()
            .map(|p| {
                let rec = generate_user(p, script, sample_rate_hz)?;
                extract_records(p.user_id, &rec, &contexts, window_s)
            })
            .collect::<Result<_>>()?;
        Ok(Dataset {
            window_s,
            sample_rate_hz,
            records: per_user.into_iter().flatten().collect(),
        })
    }

    pub fn users(&self) -> Vec<u32> {
        let mut u: Vec<u32> = self.records.iter().map(|r| r.user_id).collect();
        u.sort_unstable();
        u.dedup();
        u
    }

    pub fn contexts(&self) -> Vec<ContextLabel> {
        ContextLabel::ALL
            .into_iter()
            .filter(|c| self.records.iter().any(|r| r.context == *c))
            .collect()
    }

    /// Fills `detected` on every record.
    pub fn apply_detector(&mut self, detector: &ContextDetector) -> Result<()> {
        let detected: Vec<ContextLabel> = self
            .records
            .par_iter()
            .map(|r| detector.detect_values(&r.phone).map(|d| d.context))
            .collect::<Result<_>>()?;
        for (r, d) in self.records.iter_mut().zip(detected) {
            r.detected = Some(d);
        }
        Ok(())
    }

    /// Phone vectors with their true contexts, for detector training.
    pub fn context_examples(&self) -> Vec<(FeatureVector, ContextLabel)> {
        self.records.iter().map(|r| (r.phone_vector(), r.context)).collect()
    }

    /// Production feature table: phone slots, then watch slots when every
    /// record has a watch vector.
    pub fn to_table(&self) -> Result<FeatureTable> {
        let with_watch = !self.records.is_empty() && self.records.iter().all(|r| r.watch.is_some());
        let mut layout = production_layout(Device::Phone);
        if with_watch {
            layout.extend(production_layout(Device::Watch));
        }
        let mut table = FeatureTable::new(layout);
        for r in &self.records {
            let mut values = r.phone.clone();
            if with_watch {
                values.extend_from_slice(r.watch.as_deref().unwrap_or_default());
            }
            table.push(FeatureRow { window: r.k, user_id: r.user_id, context: Some(r.context), values })?;
        }
        Ok(table)
    }

    /// Records from a production feature table. Phone columns are required,
    /// watch columns optional; rows without a context are rejected.
    pub fn from_table(table: &FeatureTable, window_s: f64, sample_rate_hz: f64) -> Result<Self> {
        let phone = table.columns(&production_layout(Device::Phone))?;
        let watch = table.columns(&production_layout(Device::Watch)).ok();
        let pick = |row: &FeatureRow, cols: &[usize]| cols.iter().map(|&c| row.values[c]).collect::<Vec<f64>>();
        let records = table
            .rows
            .iter()
            .map(|row| {
                let context = row.context.ok_or_else(|| {
                    Error::validation("context", format!("window {} of user {} has no context", row.window, row.user_id))
                })?;
                Ok(WindowRecord {
                    user_id: row.user_id,
                    k: row.window,
                    context,
                    detected: None,
                    phone: pick(row, &phone),
                    watch: watch.as_ref().map(|w| pick(row, w)),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Dataset { window_s, sample_rate_hz, records })
    }
}

pub fn train_context_detector(lab: &Dataset, params: &ForestParams) -> Result<ContextDetector> {
    ContextDetector::train(&lab.context_examples(), params)
}

/// Confusion of `detector` on a dataset's true contexts.
pub fn context_confusion(detector: &ContextDetector, test: &Dataset) -> Result<ConfusionMatrix> {
    detector.confusion(&test.context_examples())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    ContextFree,
    ContextAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub folds: usize,
    pub iterations: usize,
    /// Training set size per model, half legitimate and half impostor.
    pub data_size: usize,
    pub rho: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 10,
            iterations: 50,
            data_size: 800,
            rho: 1.0,
            threshold: 0.0,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::validation("folds", "need at least 2"));
        }
        if self.iterations == 0 {
            return Err(Error::validation("iterations", "need at least 1"));
        }
        if self.data_size < 2 {
            return Err(Error::validation("data_size", "need at least 2"));
        }
        if !(self.rho > 0.0) {
            return Err(Error::validation("rho", "must be positive"));
        }
        Ok(())
    }
}

/// Raw error counts behind the rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub legit: u64,
    pub false_rejects: u64,
    pub impostor: u64,
    pub false_accepts: u64,
}

impl Counts {
    pub fn add(&mut self, o: &Counts) {
        self.legit += o.legit;
        self.false_rejects += o.false_rejects;
        self.impostor += o.impostor;
        self.false_accepts += o.false_accepts;
    }

    pub fn swapped(&self) -> Counts {
        Counts {
            legit: self.impostor,
            false_rejects: self.false_accepts,
            impostor: self.legit,
            false_accepts: self.false_rejects,
        }
    }

    pub fn rates(&self) -> Rates {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let total = self.legit + self.impostor;
        let correct = total - self.false_rejects - self.false_accepts;
        Rates {
            frr: ratio(self.false_rejects, self.legit),
            far: ratio(self.false_accepts, self.impostor),
            accuracy: ratio(correct, total),
            frr_ci: wilson(self.false_rejects, self.legit, Z95),
            far_ci: wilson(self.false_accepts, self.impostor, Z95),
            accuracy_ci: wilson(correct, total, Z95),
            counts: *self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub frr: f64,
    pub far: f64,
    pub accuracy: f64,
    pub frr_ci: Interval,
    pub far_ci: Interval,
    pub accuracy_ci: Interval,
    pub counts: Counts,
}

fn mix(parts: &[u64]) -> u64 {
    // splitmix64 over the parts; only used to derive sub-seeds.
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// A random ordering of `0..n` that depends only on `(seed, n)`, so both
/// classes are treated identically whatever their role.
fn permutation(seed: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, n as u64]));
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}

/// One iteration of stratified k-fold cross-validation of a two-class
/// problem. Each class is split into `folds` folds; every fold is tested
/// against a model trained on at most `data_size / 2` vectors per class
/// drawn from the remaining folds.
pub fn crossval_binary(
    legit: &[Vec<f64>],
    impostor: &[Vec<f64>],
    learner: &dyn Learner,
    folds: usize,
    data_size: usize,
    threshold: f64,
    seed: u64,
) -> Result<Counts> {
    if legit.len() < folds || impostor.len() < folds {
        return Err(Error::validation(
            "dataset",
            format!(
                "need at least {folds} windows per class, got {} legitimate and {} impostor",
                legit.len(),
                impostor.len()
            ),
        ));
    }
    let per_class = (data_size / 2).max(1);
    let pl = permutation(seed, legit.len());
    let pi = permutation(seed, impostor.len());
    let mut counts = Counts::default();
    for f in 0..folds {
        let train_idx = |perm: &[usize]| -> Vec<usize> {
            perm.iter()
                .enumerate()
                .filter(|(j, _)| j % folds != f)
                .map(|(_, &i)| i)
                .take(per_class)
                .collect()
        };
        let test_idx = |perm: &[usize]| -> Vec<usize> {
            perm.iter()
                .enumerate()
                .filter(|(j, _)| j % folds == f)
                .map(|(_, &i)| i)
                .collect()
        };
        let tl = train_idx(&pl);
        let ti = train_idx(&pi);
        let rows: Vec<&[f64]> = tl
            .iter()
            .map(|&i| legit[i].as_slice())
            .chain(ti.iter().map(|&i| impostor[i].as_slice()))
            .collect();
        let labels: Vec<f64> = std::iter::repeat_n(1.0, tl.len())
            .chain(std::iter::repeat_n(-1.0, ti.len()))
            .collect();
        let scorer = learner.fit(&rows, &labels)?;
        for i in test_idx(&pl) {
            counts.legit += 1;
            if scorer.classify(&legit[i], threshold)? == Verdict::Reject {
                counts.false_rejects += 1;
            }
        }
        for i in test_idx(&pi) {
            counts.impostor += 1;
            if scorer.classify(&impostor[i], threshold)? == Verdict::Accept {
                counts.false_accepts += 1;
            }
        }
    }
    Ok(counts)
}

/// Repeats [`crossval_binary`] over `iterations` reshufflings and pools the
/// counts. Because every iteration tests each vector exactly once, pooled
/// rates equal the iteration average.
pub fn crossval(
    legit: &[Vec<f64>],
    impostor: &[Vec<f64>],
    learner: &dyn Learner,
    cfg: &EvalConfig,
) -> Result<Rates> {
    cfg.validate()?;
    let parts: Vec<Counts> = (0..cfg.iterations)
        .into_par_iter()
        .map(|it| {
            crossval_binary(
                legit,
                impostor,
                learner,
                cfg.folds,
                cfg.data_size,
                cfg.threshold,
                mix(&[cfg.seed, it as u64]),
            )
        })
        .collect::<Result<_>>()?;
    let mut total = Counts::default();
    parts.iter().for_each(|c| total.add(c));
    Ok(total.rates())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub device_set: DeviceSet,
    pub context_mode: ContextMode,
    pub learner: String,
    pub rates: Rates,
    /// Per routed context (context-aware cells only).
    pub per_context: Vec<(ContextLabel, Rates)>,
}

/// Wall-clock figures; kept apart so reports compare equal across runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub cells: Vec<CellReport>,
    pub metadata: RunMetadata,
}

impl EvalReport {
    pub fn cell(&self, device_set: DeviceSet, mode: ContextMode) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.device_set == device_set && c.context_mode == mode)
    }

    /// The report without its metadata, for reproducibility comparisons.
    pub fn without_metadata(&self) -> EvalReport {
        EvalReport {
            metadata: RunMetadata::default(),
            ..self.clone()
        }
    }
}

/// Vectors of `user` and a role-balanced impostor sample, per group.
struct VictimData {
    legit: Vec<Vec<f64>>,
    impostor: Vec<Vec<f64>>,
}

fn victim_groups(
    ds: &Dataset,
    user: u32,
    device_set: DeviceSet,
    mode: ContextMode,
    seed: u64,
) -> Vec<(Option<ContextLabel>, VictimData)> {
    let groups: Vec<Option<ContextLabel>> = match mode {
        ContextMode::ContextFree => vec![None],
        ContextMode::ContextAware => ContextLabel::ALL.into_iter().map(Some).collect(),
    };
    groups
        .into_iter()
        .filter_map(|g| {
            let in_group = |r: &&WindowRecord| g.is_none_or(|c| r.routed_context() == c);
            let legit: Vec<Vec<f64>> = ds
                .records
                .iter()
                .filter(|r| r.user_id == user)
                .filter(in_group)
                .filter_map(|r| r.features(device_set))
                .collect();
            let others: Vec<Vec<f64>> = ds
                .records
                .iter()
                .filter(|r| r.user_id != user)
                .filter(in_group)
                .filter_map(|r| r.features(device_set))
                .collect();
            if legit.is_empty() || others.is_empty() {
                return None;
            }
            let ctx = g.map_or(2, |c| c.index() as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, u64::from(user), ctx]));
            let mut idx: Vec<usize> = (0..others.len()).collect();
            idx.shuffle(&mut rng);
            idx.truncate(legit.len());
            idx.sort_unstable();
            let impostor = idx.into_iter().map(|i| others[i].clone()).collect();
            Some((g, VictimData { legit, impostor }))
        })
        .collect()
}

/// Cross-validation of one (device set, context mode) cell, every user in
/// turn acting as the legitimate owner against the others.
pub fn evaluate_cell(
    ds: &Dataset,
    learner: &dyn Learner,
    device_set: DeviceSet,
    mode: ContextMode,
    cfg: &EvalConfig,
) -> Result<CellReport> {
    cfg.validate()?;
    let users = ds.users();
    if users.len() < 2 {
        return Err(Error::validation("dataset", "need at least 2 users"));
    }
    let work: Vec<(u32, Option<ContextLabel>, VictimData)> = users
        .iter()
        .flat_map(|&u| {
            victim_groups(ds, u, device_set, mode, cfg.seed)
                .into_iter()
                .map(move |(g, d)| (u, g, d))
        })
        .collect();
    if work.is_empty() {
        return Err(Error::InsufficientData(format!("no {device_set} vectors")));
    }
    let results: Vec<(Option<ContextLabel>, Counts)> = work
        .par_iter()
        .map(|(u, g, d)| {
            let ctx = g.map_or(2, |c| c.index() as u64);
            let sub = EvalConfig {
                seed: mix(&[cfg.seed, u64::from(*u), ctx]),
                ..*cfg
            };
            let parts: Vec<Counts> = (0..cfg.iterations)
                .map(|it| {
                    crossval_binary(
                        &d.legit,
                        &d.impostor,
                        learner,
                        cfg.folds,
                        cfg.data_size,
                        cfg.threshold,
                        mix(&[sub.seed, it as u64]),
                    )
                })
                .collect::<Result<_>>()?;
            let mut c = Counts::default();
            parts.iter().for_each(|p| c.add(p));
            Ok((*g, c))
        })
        .collect::<Result<_>>()?;
    let mut total = Counts::default();
    let mut per: BTreeMap<ContextLabel, Counts> = BTreeMap::new();
    for (g, c) in &results {
        total.add(c);
        if let Some(ctx) = g {
            per.entry(*ctx).or_default().add(c);
        }
    }
    Ok(CellReport {
        device_set,
        context_mode: mode,
        learner: learner.name().to_string(),
        rates: total.rates(),
        per_context: per.into_iter().map(|(c, n)| (c, n.rates())).collect(),
    })
}

pub fn evaluate(
    ds: &Dataset,
    learner: &dyn Learner,
    cells: &[(DeviceSet, ContextMode)],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let start = Instant::now();
    let cells = cells
        .iter()
        .map(|&(d, m)| evaluate_cell(ds, learner, d, m, cfg))
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        config: *cfg,
        cells,
        metadata: RunMetadata {
            elapsed_s: start.elapsed().as_secs_f64(),
        },
    })
}

pub const ABLATION_CELLS: [(DeviceSet, ContextMode); 4] = [
    (DeviceSet::PhoneOnly, ContextMode::ContextFree),
    (DeviceSet::PhoneOnly, ContextMode::ContextAware),
    (DeviceSet::PhoneAndWatch, ContextMode::ContextFree),
    (DeviceSet::PhoneAndWatch, ContextMode::ContextAware),
];

/// The 2×2 grid of device sets and context modes with KRR.
pub fn ablation(ds: &Dataset, cfg: &EvalConfig) -> Result<EvalReport> {
    evaluate(ds, &KrrLearner::new(cfg.rho), &ABLATION_CELLS, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub rates: Rates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub parameter: String,
    pub device_set: DeviceSet,
    pub context_mode: ContextMode,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            self.parameter.as_str(),
            "frr",
            "far",
            "accuracy",
            "frr_lo",
            "frr_hi",
            "far_lo",
            "far_hi",
            "accuracy_lo",
            "accuracy_hi",
        ])?;
        for p in &self.points {
            let r = &p.rates;
            let vals = [
                p.x,
                r.frr,
                r.far,
                r.accuracy,
                r.frr_ci.lo,
                r.frr_ci.hi,
                r.far_ci.lo,
                r.far_ci.hi,
                r.accuracy_ci.lo,
                r.accuracy_ci.hi,
            ];
            wr.write_record(vals.iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Least-squares slope of FRR and FAR against `x` over points with `x ≥ from`.
    pub fn tail_slopes(&self, from: f64) -> (f64, f64) {
        let tail: Vec<&CurvePoint> = self.points.iter().filter(|p| p.x >= from).collect();
        let xs: Vec<f64> = tail.iter().map(|p| p.x).collect();
        let frr: Vec<f64> = tail.iter().map(|p| p.rates.frr).collect();
        let far: Vec<f64> = tail.iter().map(|p| p.rates.far).collect();
        (crate::stats::slope(&xs, &frr), crate::stats::slope(&xs, &far))
    }
}

/// Regenerates the population at each window size and evaluates one cell.
/// Contexts are routed by ground truth, since a detector is tied to one
/// window length.
pub fn sweep_window_size(
    profiles: &[UserProfile],
    script: &SessionScript,
    sizes_s: &[f64],
    sample_rate_hz: f64,
    device_set: DeviceSet,
    mode: ContextMode,
    cfg: &EvalConfig,
) -> Result<Curve> {
    let learner = KrrLearner::new(cfg.rho);
    let points = sizes_s
        .iter()
        .map(|&w| {
            let ds = Dataset::generate(profiles, script, w, sample_rate_hz)?;
            let cell = evaluate_cell(&ds, &learner, device_set, mode, cfg)?;
            log::info!("window {w} s: accuracy {:.4}", cell.rates.accuracy);
            Ok(CurvePoint { x: w, rates: cell.rates })
        })
        .collect::<Result<_>>()?;
    Ok(Curve {
        parameter: "window_s".into(),
        device_set,
        context_mode: mode,
        points,
    })
}

pub fn sweep_data_size(
    ds: &Dataset,
    sizes: &[usize],
    device_set: DeviceSet,
    mode: ContextMode,
    cfg: &EvalConfig,
) -> Result<Curve> {
    let learner = KrrLearner::new(cfg.rho);
    let points = sizes
        .iter()
        .map(|&n| {
            let c = EvalConfig { data_size: n, ..*cfg };
            let cell = evaluate_cell(ds, &learner, device_set, mode, &c)?;
            log::info!("data size {n}: accuracy {:.4}", cell.rates.accuracy);
            Ok(CurvePoint { x: n as f64, rates: cell.rates })
        })
        .collect::<Result<_>>()?;
    Ok(Curve {
        parameter: "data_size".into(),
        device_set,
        context_mode: mode,
        points,
    })
}

/// Trains an owner's bank (both contexts, both device sets) on records routed
/// by `routed_context`, with balanced impostor samples from other users.
/// Returns the bank and the impostor pool for later retraining.
pub fn train_bank(
    ds: &Dataset,
    owner: u32,
    detector: ContextDetector,
    data_size: usize,
    rho: f64,
    seed: u64,
) -> Result<(ModelBank, ImpostorPool)> {
    let per_class = (data_size / 2).max(1);
    let mut entries = Vec::new();
    let mut pool = ImpostorPool::default();
    for context in ContextLabel::ALL {
        for device_set in DeviceSet::ALL {
            let vecs = |own: bool| -> Vec<FeatureVector> {
                ds.records
                    .iter()
                    .filter(|r| (r.user_id == owner) == own && r.routed_context() == context)
                    .filter_map(|r| {
                        let phone = r.phone_vector();
                        match device_set {
                            DeviceSet::PhoneOnly => Some(phone),
                            DeviceSet::PhoneAndWatch => r
                                .watch_vector()
                                .and_then(|w| crate::features::auth_vector(&phone, Some(&w)).ok()),
                        }
                    })
                    .collect()
            };
            let legit = vecs(true);
            let others = vecs(false);
            if legit.len() < 2 || others.is_empty() {
                continue;
            }
            let legit: Vec<FeatureVector> = legit.into_iter().take(per_class).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, u64::from(owner), context.index() as u64]));
            let mut idx: Vec<usize> = (0..others.len()).collect();
            idx.shuffle(&mut rng);
            let chosen: Vec<FeatureVector> = idx.iter().take(legit.len()).map(|&i| others[i].clone()).collect();
            let model = train_auth_model(&legit, &chosen, rho, Some(context))?;
            entries.push(BankEntry { context, device_set, model });
            pool.vectors.insert((context, device_set), others);
        }
    }
    Ok((ModelBank::new(owner, detector, entries)?, pool))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasqueradeConfig {
    pub lambdas: Vec<f64>,
    /// Windows per attacker.
    pub horizon: usize,
    pub context: ContextLabel,
    pub window_s: f64,
    pub sample_rate_hz: f64,
    pub threshold: f64,
}

impl Default for MasqueradeConfig {
    fn default() -> Self {
        MasqueradeConfig {
            lambdas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            horizon: 10,
            context: ContextLabel::Moving,
            window_s: DEFAULT_WINDOW_S,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            threshold: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    /// Number of windows elapsed.
    pub n: usize,
    /// Fraction of attackers with every one of the first `n` windows accepted.
    pub survival: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasqueradeCurve {
    pub lambda: f64,
    pub n_attackers: usize,
    /// Pooled per-window accept rate over all attacker windows.
    pub p_hat: f64,
    pub points: Vec<SurvivalPoint>,
    /// Fraction of attackers rejected at least once within 3 windows.
    pub locked_within_3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasqueradeReport {
    pub victim: u32,
    pub curves: Vec<MasqueradeCurve>,
}

impl MasqueradeReport {
    pub fn all_within_tolerance(&self) -> bool {
        self.curves
            .iter()
            .all(|c| c.points.iter().all(|p| p.within_tolerance))
    }
}

/// `sessions` independent recordings of each profile: same parameters,
/// fresh seeds. A cohort built from one profile has a common per-window
/// accept probability, which is what the independence model assumes.
pub fn attacker_cohort(profiles: &[UserProfile], sessions: usize, seed: u64) -> Vec<UserProfile> {
    profiles
        .iter()
        .flat_map(|p| {
            (0..sessions).map(move |s| UserProfile {
                seed: mix(&[seed, p.seed, s as u64]),
                ..p.clone()
            })
        })
        .collect()
}

/// Binomial 3σ band around `pⁿ` for `trials` independent attackers.
pub fn survival_tolerance(p_n: f64, trials: usize) -> f64 {
    3.0 * (p_n * (1.0 - p_n) / trials as f64).sqrt()
}

/// Per-window verdicts of attackers imitating `victim` at fidelity `lambda`.
pub fn attacker_verdicts(
    bank: &ModelBank,
    victim: &UserProfile,
    attackers: &[UserProfile],
    lambda: f64,
    cfg: &MasqueradeConfig,
) -> Result<Vec<Vec<Verdict>>> {
    let script = SessionScript::single(cfg.context, cfg.horizon as f64 * cfg.window_s)?;
    let contexts = vec![Some(cfg.context); cfg.horizon];
    attackers
        .par_iter()
        .map(|a| {
            let mimic = inject_mimicry(a, victim, lambda)?;
            let rec = generate_user(&mimic, &script, cfg.sample_rate_hz)?;
            let recs = extract_records(a.user_id, &rec, &contexts, cfg.window_s)?;
            recs.iter()
                .map(|r| {
                    let watch = r.watch_vector();
                    authenticate_vectors(bank, r.k, &r.phone_vector(), watch.as_ref(), cfg.threshold)
                        .map(|d| d.verdict)
                })
                .collect()
        })
        .collect()
}

/// Survival curves and their fit to the independent-windows model `p̂ⁿ`.
pub fn masquerade_eval(
    bank: &ModelBank,
    victim: &UserProfile,
    attackers: &[UserProfile],
    cfg: &MasqueradeConfig,
) -> Result<MasqueradeReport> {
    if cfg.horizon < 3 {
        return Err(Error::validation("horizon", "must be at least 3 windows"));
    }
    if attackers.is_empty() {
        return Err(Error::validation("n_attackers", "need at least one attacker"));
    }
    let curves = cfg
        .lambdas
        .iter()
        .map(|&lambda| {
            let verdicts = attacker_verdicts(bank, victim, attackers, lambda, cfg)?;
            Ok(survival_curve(lambda, &verdicts))
        })
        .collect::<Result<_>>()?;
    Ok(MasqueradeReport {
        victim: victim.user_id,
        curves,
    })
}

/// Survival statistics from per-attacker verdict sequences.
pub fn survival_curve(lambda: f64, verdicts: &[Vec<Verdict>]) -> MasqueradeCurve {
    let n_att = verdicts.len();
    let horizon = verdicts.iter().map(Vec::len).min().unwrap_or(0);
    let accepts: usize = verdicts
        .iter()
        .map(|v| v[..horizon].iter().filter(|x| **x == Verdict::Accept).count())
        .sum();
    let p_hat = accepts as f64 / (n_att * horizon).max(1) as f64;
    let points = (1..=horizon)
        .map(|n| {
            let alive = verdicts
                .iter()
                .filter(|v| v[..n].iter().all(|x| *x == Verdict::Accept))
                .count();
            let survival = alive as f64 / n_att as f64;
            let predicted = p_hat.powi(n as i32);
            let tolerance = survival_tolerance(predicted, n_att);
            SurvivalPoint {
                n,
                survival,
                predicted,
                tolerance,
                within_tolerance: (survival - predicted).abs() <= tolerance + 1e-12,
            }
        })
        .collect();
    let locked = verdicts
        .iter()
        .filter(|v| v.iter().take(3).any(|x| *x == Verdict::Reject))
        .count();
    MasqueradeCurve {
        lambda,
        n_attackers: n_att,
        p_hat,
        points,
        locked_within_3: locked as f64 / n_att as f64,
    }
}

/// Everything a standard experiment needs: an owner population, a disjoint
/// "lab" population for the context detector, and their datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    /// Replaces the preset's parameter ranges when set.
    #[serde(default)]
    pub custom: Option<PresetParams>,
    pub n_users: usize,
    pub lab_users: usize,
    /// Seconds of data per context per user.
    pub per_context_s: f64,
    /// Length of each alternating context block.
    pub block_s: f64,
    pub window_s: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
    pub forest: ForestParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: Preset::Separable,
            custom: None,
            n_users: 10,
            lab_users: 6,
            per_context_s: 3000.0,
            block_s: 300.0,
            window_s: DEFAULT_WINDOW_S,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            seed: 0,
            forest: ForestParams::default(),
        }
    }
}

/// First id of the lab population, kept clear of owner ids.
pub const LAB_ID_BASE: u32 = 10_000;

pub struct Experiment {
    pub profiles: Vec<UserProfile>,
    pub lab_profiles: Vec<UserProfile>,
    pub script: SessionScript,
    pub dataset: Dataset,
    pub detector: ContextDetector,
}

impl Experiment {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let params = cfg.custom.unwrap_or_else(|| cfg.preset.params());
        let profiles = population_with(&params, cfg.n_users, 0, cfg.seed);
        let lab_profiles = population_with(&params, cfg.lab_users, LAB_ID_BASE, cfg.seed ^ 0x1AB);
        let script = SessionScript::alternating(cfg.per_context_s, cfg.block_s)?;
        let lab_script = SessionScript::alternating((cfg.per_context_s / 4.0).max(cfg.block_s), cfg.block_s)?;
        let lab = Dataset::generate(&lab_profiles, &lab_script, cfg.window_s, cfg.sample_rate_hz)?;
        let detector = train_context_detector(
            &lab,
            &ForestParams {
                seed: cfg.seed,
                ..cfg.forest
            },
        )?;
        let mut dataset = Dataset::generate(&profiles, &script, cfg.window_s, cfg.sample_rate_hz)?;
        dataset.apply_detector(&detector)?;
        Ok(Experiment {
            profiles,
            lab_profiles,
            script,
            dataset,
            detector,
        })
    }
}
