//! Streaming authentication: features → context → per-context KRR decision,
//! plus the response policy and the confidence-score retraining loop.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::{ContextDetector, ContextLabel};
use crate::error::{Error, Result};
use crate::features::{auth_vector, device_features, FeatureVector};
use crate::krr::{train_primal, verdict, AuthModel, TrainingSet, Verdict};
use crate::sensor::{segment, Device, SensorKind, SensorRecording, Window};

/// Version written into model files; loaders reject anything newer.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceSet {
    PhoneOnly,
    PhoneAndWatch,
}

impl DeviceSet {
    pub const ALL: [DeviceSet; 2] = [DeviceSet::PhoneOnly, DeviceSet::PhoneAndWatch];

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceSet::PhoneOnly => "phone_only",
            DeviceSet::PhoneAndWatch => "phone_and_watch",
        }
    }
}

impl fmt::Display for DeviceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeviceSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "phone_only" | "phone" => Ok(DeviceSet::PhoneOnly),
            "phone_and_watch" | "combined" | "both" => Ok(DeviceSet::PhoneAndWatch),
            other => Err(Error::validation("device_set", format!("unknown device set `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub context: ContextLabel,
    pub device_set: DeviceSet,
    pub model: AuthModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchivedModel {
    pub bank_version: u32,
    pub entry: BankEntry,
}

/// Per-owner authentication models keyed by (context, device set), together
/// with the shared context detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBank {
    pub schema_version: u32,
    pub owner_id: u32,
    pub version: u32,
    pub context_model: ContextDetector,
    pub models: Vec<BankEntry>,
    #[serde(default)]
    pub archive: Vec<ArchivedModel>,
}

impl ModelBank {
    pub fn new(owner_id: u32, context_model: ContextDetector, models: Vec<BankEntry>) -> Result<Self> {
        let mut bank = ModelBank {
            schema_version: SCHEMA_VERSION,
            owner_id,
            version: 1,
            context_model,
            models: Vec::new(),
            archive: Vec::new(),
        };
        for e in models {
            bank.insert(e)?;
        }
        bank.validate()?;
        Ok(bank)
    }

    fn insert(&mut self, entry: BankEntry) -> Result<()> {
        let expected = match entry.device_set {
            DeviceSet::PhoneOnly => crate::features::DEVICE_DIM,
            DeviceSet::PhoneAndWatch => crate::features::COMBINED_DIM,
        };
        if entry.model.dim() != expected {
            return Err(Error::dimension(
                format!("{} model", entry.device_set),
                expected,
                entry.model.dim(),
            ));
        }
        self.models
            .retain(|e| !(e.context == entry.context && e.device_set == entry.device_set));
        self.models.push(entry);
        self.models.sort_by_key(|e| (e.context, e.device_set));
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version > SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                supported: SCHEMA_VERSION,
            });
        }
        let complete = DeviceSet::ALL
            .iter()
            .any(|&ds| ContextLabel::ALL.iter().all(|&c| self.has(c, ds)));
        if !complete {
            return Err(Error::validation(
                "model bank",
                "needs models for both contexts for at least one device set",
            ));
        }
        Ok(())
    }

    pub fn has(&self, context: ContextLabel, device_set: DeviceSet) -> bool {
        self.models
            .iter()
            .any(|e| e.context == context && e.device_set == device_set)
    }

    pub fn get(&self, context: ContextLabel, device_set: DeviceSet) -> Result<&AuthModel> {
        self.models
            .iter()
            .find(|e| e.context == context && e.device_set == device_set)
            .map(|e| &e.model)
            .ok_or(Error::NoModel { context, device_set })
    }

    /// Replaces some models, archiving the old ones and bumping the version.
    pub fn replace(&self, entries: Vec<BankEntry>) -> Result<ModelBank> {
        let mut next = self.clone();
        for e in entries {
            if let Some(old) = self
                .models
                .iter()
                .find(|o| o.context == e.context && o.device_set == e.device_set)
            {
                next.archive.push(ArchivedModel {
                    bank_version: self.version,
                    entry: old.clone(),
                });
            }
            next.insert(e)?;
        }
        next.version += 1;
        next.validate()?;
        Ok(next)
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(r)?;
        check_schema(&value)?;
        let bank: ModelBank = serde_json::from_value(value)?;
        bank.validate()?;
        Ok(bank)
    }
}

/// Writes a standalone model (an [`AuthModel`] or [`ContextDetector`]) with
/// a `schema_version` field alongside its own fields.
pub fn write_versioned<T: Serialize, W: Write>(model: &T, w: W) -> Result<()> {
    let mut value = serde_json::to_value(model)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::validation("model", "expected a JSON object"))?;
    obj.insert("schema_version".into(), SCHEMA_VERSION.into());
    serde_json::to_writer_pretty(w, &value)?;
    Ok(())
}

/// Reads a file written by [`write_versioned`], rejecting newer schemas.
pub fn read_versioned<T: serde::de::DeserializeOwned, R: Read>(r: R) -> Result<T> {
    let mut value: serde_json::Value = serde_json::from_reader(r)?;
    check_schema(&value)?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("schema_version");
    }
    Ok(serde_json::from_value(value)?)
}

/// Rejects JSON documents written by a newer schema before full parsing.
pub fn check_schema(value: &serde_json::Value) -> Result<()> {
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::validation("schema_version", "missing"))? as u32;
    if found > SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found,
            supported: SCHEMA_VERSION,
        });
    }
    Ok(())
}

/// KRR model for one context from legitimate and impostor vectors.
pub fn train_auth_model(
    legit: &[FeatureVector],
    impostor: &[FeatureVector],
    rho: f64,
    context: Option<ContextLabel>,
) -> Result<AuthModel> {
    let ts = TrainingSet::from_feature_vectors(legit, impostor)?;
    let mut model = train_primal(&ts, rho)?;
    model.context = context;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub k: usize,
    pub context: ContextLabel,
    pub vote_fraction: f64,
    pub cs: f64,
    pub verdict: Verdict,
    pub device_set: DeviceSet,
    /// Seconds spent on this window; excluded from serialized logs.
    #[serde(skip)]
    pub latency_s: f64,
}

/// One decision from already-extracted device vectors. Falls back to the
/// phone-only model when the watch vector is absent or the bank has no
/// combined model for the detected context.
pub fn authenticate_vectors(
    bank: &ModelBank,
    k: usize,
    phone: &FeatureVector,
    watch: Option<&FeatureVector>,
    threshold: f64,
) -> Result<Decision> {
    let start = Instant::now();
    let detection = bank.context_model.detect(phone)?;
    let context = detection.context;
    let device_set = match watch {
        Some(_) if bank.has(context, DeviceSet::PhoneAndWatch) => DeviceSet::PhoneAndWatch,
        _ => DeviceSet::PhoneOnly,
    };
    let model = bank.get(context, device_set)?;
    let x = match device_set {
        DeviceSet::PhoneAndWatch => auth_vector(phone, watch)?,
        DeviceSet::PhoneOnly => phone.clone(),
    };
    let cs = model.score_vector(&x)?;
    Ok(Decision {
        k,
        context,
        vote_fraction: detection.vote_fraction,
        cs,
        verdict: verdict(cs, threshold),
        device_set,
        latency_s: start.elapsed().as_secs_f64(),
    })
}

/// Phone and optional watch windows for one index `k`.
#[derive(Debug, Clone, Copy)]
pub struct WindowSet<'a> {
    pub phone_acc: &'a Window,
    pub phone_gyr: &'a Window,
    pub watch: Option<(&'a Window, &'a Window)>,
}

/// Full per-window path from magnitude windows to a decision; the recorded
/// latency covers feature extraction, detection and scoring.
pub fn authenticate_window(
    bank: &ModelBank,
    windows: WindowSet<'_>,
    sample_rate_hz: f64,
    threshold: f64,
) -> Result<(Decision, FeatureVector)> {
    let start = Instant::now();
    let phone = device_features(Device::Phone, windows.phone_acc, windows.phone_gyr, sample_rate_hz)?;
    let watch = windows
        .watch
        .map(|(a, g)| device_features(Device::Watch, a, g, sample_rate_hz))
        .transpose()?;
    let mut d = authenticate_vectors(bank, windows.phone_acc.index, &phone, watch.as_ref(), threshold)?;
    let x = match d.device_set {
        DeviceSet::PhoneAndWatch => auth_vector(&phone, watch.as_ref())?,
        DeviceSet::PhoneOnly => phone,
    };
    d.latency_s = start.elapsed().as_secs_f64();
    Ok((d, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseAction {
    Lock,
    DenySensitive,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponsePolicy {
    pub lockout_after_rejections: u32,
    pub action: ResponseAction,
}

impl Default for ResponsePolicy {
    fn default() -> Self {
        ResponsePolicy {
            lockout_after_rejections: 1,
            action: ResponseAction::Lock,
        }
    }
}

impl ResponsePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.lockout_after_rejections == 0 {
            return Err(Error::validation("lockout_after", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrainConfig {
    pub epsilon_cs: f64,
    pub t_windows: usize,
}

impl Default for RetrainConfig {
    fn default() -> Self {
        RetrainConfig {
            epsilon_cs: 0.2,
            t_windows: 100,
        }
    }
}

impl RetrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_cs > 0.0 && self.epsilon_cs.is_finite()) {
            return Err(Error::validation("epsilon_cs", "must be positive"));
        }
        if self.t_windows == 0 {
            return Err(Error::validation("t_windows", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrainTrigger {
    pub k: usize,
}

/// Fires iff the last `t_windows` decisions all have `0 < CS < ε`.
pub fn monitor_cs(decisions: &[Decision], cfg: &RetrainConfig) -> Option<RetrainTrigger> {
    if decisions.len() < cfg.t_windows {
        return None;
    }
    let recent = &decisions[decisions.len() - cfg.t_windows..];
    recent
        .iter()
        .all(|d| d.cs > 0.0 && d.cs < cfg.epsilon_cs)
        .then(|| RetrainTrigger {
            k: recent.last().map_or(0, |d| d.k),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Lockout {
        k: usize,
        consecutive_rejects: u32,
        action: ResponseAction,
    },
    Reinstated {
        k: usize,
    },
    RetrainTrigger {
        k: usize,
    },
    Retrained {
        k: usize,
        bank_version: u32,
        models: Vec<(ContextLabel, DeviceSet)>,
    },
    RetrainDeferred {
        k: usize,
        reason: String,
    },
    Gap {
        k: usize,
        device: Device,
        sensor: SensorKind,
    },
}

/// Impostor vectors per (context, device set) used when retraining.
#[derive(Debug, Clone, Default)]
pub struct ImpostorPool {
    pub vectors: BTreeMap<(ContextLabel, DeviceSet), Vec<FeatureVector>>,
}

#[derive(Debug, Clone)]
pub struct Retrainer {
    pub rho: f64,
    /// Total training size per model, half legitimate and half impostor.
    pub data_size: usize,
    pub impostors: ImpostorPool,
    pub seed: u64,
}

/// Retrains every model that has at least `data_size / 2` recent legitimate
/// vectors. Returns the bank unchanged-version error when no model qualifies.
pub fn retrain(
    bank: &ModelBank,
    recent: &BTreeMap<(ContextLabel, DeviceSet), Vec<FeatureVector>>,
    retrainer: &Retrainer,
) -> Result<ModelBank> {
    let need = (retrainer.data_size / 2).max(1);
    let mut entries = Vec::new();
    for (&(context, device_set), legit) in recent {
        if legit.len() < need || !bank.has(context, device_set) {
            continue;
        }
        let legit = &legit[legit.len() - need..];
        let pool = retrainer
            .impostors
            .vectors
            .get(&(context, device_set))
            .filter(|p| !p.is_empty())
            .ok_or_else(|| {
                Error::InsufficientData(format!("no impostor vectors for {context}/{device_set}"))
            })?;
        let mut rng = ChaCha8Rng::seed_from_u64(retrainer.seed ^ u64::from(bank.version));
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(need);
        idx.sort_unstable();
        let impostor: Vec<FeatureVector> = idx.into_iter().map(|i| pool[i].clone()).collect();
        let model = train_auth_model(legit, &impostor, retrainer.rho, Some(context))?;
        entries.push(BankEntry {
            context,
            device_set,
            model,
        });
    }
    if entries.is_empty() {
        return Err(Error::InsufficientData(format!(
            "fewer than {need} recent legitimate windows for every model"
        )));
    }
    bank.replace(entries)
}

/// Called after a lockout with the window index; `true` means the user
/// passed explicit authentication and access is restored.
pub type ReinstateHook = Box<dyn FnMut(usize) -> bool + Send>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StreamOutput {
    pub decisions: Vec<Decision>,
    pub events: Vec<Event>,
}

/// Stateful single-consumer processor for one user's windows.
pub struct StreamRunner {
    bank: ModelBank,
    pub policy: ResponsePolicy,
    pub retrain_cfg: RetrainConfig,
    pub threshold: f64,
    retrainer: Option<Retrainer>,
    reinstate: Option<ReinstateHook>,
    consecutive_rejects: u32,
    locked: bool,
    history: VecDeque<Decision>,
    accepted: BTreeMap<(ContextLabel, DeviceSet), VecDeque<FeatureVector>>,
    next_k: Option<usize>,
}

impl StreamRunner {
    pub fn new(bank: ModelBank, policy: ResponsePolicy, retrain_cfg: RetrainConfig) -> Result<Self> {
        policy.validate()?;
        retrain_cfg.validate()?;
        Ok(StreamRunner {
            bank,
            policy,
            retrain_cfg,
            threshold: 0.0,
            retrainer: None,
            reinstate: None,
            consecutive_rejects: 0,
            locked: false,
            history: VecDeque::new(),
            accepted: BTreeMap::new(),
            next_k: None,
        })
    }

    pub fn with_retrainer(mut self, retrainer: Retrainer) -> Self {
        self.retrainer = Some(retrainer);
        self
    }

    pub fn with_reinstate_hook(mut self, hook: ReinstateHook) -> Self {
        self.reinstate = Some(hook);
        self
    }

    pub fn bank(&self) -> &ModelBank {
        &self.bank
    }

    pub fn is_locked(&self) -> bool {
        self.locked
    }

    /// Processes one window's device vectors. Windows must arrive in
    /// increasing index order.
    pub fn process(
        &mut self,
        k: usize,
        phone: &FeatureVector,
        watch: Option<&FeatureVector>,
        events: &mut Vec<Event>,
    ) -> Result<Decision> {
        if self.next_k.is_some_and(|n| k < n) {
            return Err(Error::validation("window index", format!("window {k} arrived out of order")));
        }
        self.next_k = Some(k + 1);
        let start = Instant::now();
        let mut d = authenticate_vectors(&self.bank, k, phone, watch, self.threshold)?;
        d.latency_s = start.elapsed().as_secs_f64();
        self.respond(&d, events);
        if d.verdict == Verdict::Accept {
            let x = match d.device_set {
                DeviceSet::PhoneAndWatch => auth_vector(phone, watch)?,
                DeviceSet::PhoneOnly => phone.clone(),
            };
            let cap = self.retrainer.as_ref().map_or(0, |r| (r.data_size / 2).max(1));
            let buf = self.accepted.entry((d.context, d.device_set)).or_default();
            buf.push_back(x);
            while buf.len() > cap {
                buf.pop_front();
            }
        }
        self.history.push_back(d.clone());
        while self.history.len() > self.retrain_cfg.t_windows {
            self.history.pop_front();
        }
        self.monitor(k, events);
        Ok(d)
    }

    fn respond(&mut self, d: &Decision, events: &mut Vec<Event>) {
        if d.verdict == Verdict::Accept {
            self.consecutive_rejects = 0;
            return;
        }
        self.consecutive_rejects += 1;
        if self.locked || self.consecutive_rejects < self.policy.lockout_after_rejections {
            return;
        }
        events.push(Event::Lockout {
            k: d.k,
            consecutive_rejects: self.consecutive_rejects,
            action: self.policy.action,
        });
        self.consecutive_rejects = 0;
        if self.policy.action == ResponseAction::Log {
            return;
        }
        self.locked = true;
        if let Some(hook) = self.reinstate.as_mut() {
            if hook(d.k) {
                self.locked = false;
                events.push(Event::Reinstated { k: d.k });
            }
        }
    }

    fn monitor(&mut self, k: usize, events: &mut Vec<Event>) {
        let history: Vec<Decision> = self.history.iter().cloned().collect();
        if monitor_cs(&history, &self.retrain_cfg).is_none() {
            return;
        }
        events.push(Event::RetrainTrigger { k });
        self.history.clear();
        let Some(retrainer) = &self.retrainer else {
            events.push(Event::RetrainDeferred {
                k,
                reason: "no retrainer configured".into(),
            });
            return;
        };
        let recent: BTreeMap<_, Vec<FeatureVector>> = self
            .accepted
            .iter()
            .map(|(key, v)| (*key, v.iter().cloned().collect()))
            .collect();
        match retrain(&self.bank, &recent, retrainer) {
            Ok(bank) => {
                let models = bank
                    .archive
                    .iter()
                    .filter(|a| a.bank_version == self.bank.version)
                    .map(|a| (a.entry.context, a.entry.device_set))
                    .collect();
                self.bank = bank;
                self.accepted.clear();
                events.push(Event::Retrained {
                    k,
                    bank_version: self.bank.version,
                    models,
                });
            }
            Err(e) => {
                log::info!("retraining deferred at window {k}: {e}");
                events.push(Event::RetrainDeferred { k, reason: e.to_string() });
            }
        }
    }
}

/// Segments a recording and runs every window through `runner` in index
/// order. Windows with a phone-side gap are skipped; a watch-side gap or a
/// missing watch window falls back to the phone-only model.
pub fn run_stream(runner: &mut StreamRunner, recording: &SensorRecording, window_s: f64) -> Result<StreamOutput> {
    let phone_acc = stream_windows(recording, Device::Phone, SensorKind::Accelerometer, window_s)?;
    let phone_gyr = stream_windows(recording, Device::Phone, SensorKind::Gyroscope, window_s)?;
    let watch_acc = stream_windows(recording, Device::Watch, SensorKind::Accelerometer, window_s).ok();
    let watch_gyr = stream_windows(recording, Device::Watch, SensorKind::Gyroscope, window_s).ok();
    let rate = recording
        .get(Device::Phone, SensorKind::Accelerometer)
        .map(|s| s.sample_rate_hz)
        .unwrap_or(crate::sensor::DEFAULT_SAMPLE_RATE_HZ);
    let n = phone_acc.len().min(phone_gyr.len());
    if n == 0 {
        return Err(Error::InsufficientData("streams do not cover one full window".into()));
    }
    let mut out = StreamOutput::default();
    for k in 0..n {
        let (pa, pg) = (&phone_acc[k], &phone_gyr[k]);
        let mut skip = false;
        for (w, s) in [(pa, SensorKind::Accelerometer), (pg, SensorKind::Gyroscope)] {
            if w.has_gap {
                out.events.push(Event::Gap { k, device: Device::Phone, sensor: s });
                skip = true;
            }
        }
        if skip {
            continue;
        }
        let mut watch = match (&watch_acc, &watch_gyr) {
            (Some(a), Some(g)) if k < a.len() && k < g.len() => Some((&a[k], &g[k])),
            _ => None,
        };
        if let Some((a, g)) = watch {
            if a.has_gap || g.has_gap {
                let sensor = if a.has_gap { SensorKind::Accelerometer } else { SensorKind::Gyroscope };
                out.events.push(Event::Gap { k, device: Device::Watch, sensor });
                watch = None;
            }
        }
        let phone = device_features(Device::Phone, pa, pg, rate)?;
        let watch = watch
            .map(|(a, g)| device_features(Device::Watch, a, g, rate))
            .transpose()?;
        let d = runner.process(k, &phone, watch.as_ref(), &mut out.events)?;
        out.decisions.push(d);
    }
    Ok(out)
}

fn stream_windows(rec: &SensorRecording, device: Device, sensor: SensorKind, window_s: f64) -> Result<Vec<Window>> {
    let stream = rec.get(device, sensor).ok_or_else(|| {
        Error::InsufficientData(format!("no {} {} stream", device.as_str(), sensor.as_str()))
    })?;
    segment(stream, window_s)
}

/// One JSONL decision-log line: the decision plus events raised at its window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub k: usize,
    pub context: ContextLabel,
    pub cs: f64,
    pub verdict: Verdict,
    pub device_set: DeviceSet,
    pub events: Vec<Event>,
}

/// Groups events by window into log lines; gap events for skipped windows
/// get their own line-less entries appended to the next decision.
pub fn decision_log(out: &StreamOutput) -> Vec<LogLine> {
    let mut lines: Vec<LogLine> = out
        .decisions
        .iter()
        .map(|d| LogLine {
            k: d.k,
            context: d.context,
            cs: d.cs,
            verdict: d.verdict,
            device_set: d.device_set,
            events: Vec::new(),
        })
        .collect();
    for e in &out.events {
        let k = event_window(e);
        if let Some(line) = lines.iter_mut().find(|l| l.k >= k) {
            line.events.push(e.clone());
        } else if let Some(line) = lines.last_mut() {
            line.events.push(e.clone());
        }
    }
    lines
}

pub fn event_window(e: &Event) -> usize {
    match e {
        Event::Lockout { k, .. }
        | Event::Reinstated { k }
        | Event::RetrainTrigger { k }
        | Event::Retrained { k, .. }
        | Event::RetrainDeferred { k, .. }
        | Event::Gap { k, .. } => *k,
    }
}
