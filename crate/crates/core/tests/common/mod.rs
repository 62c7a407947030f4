#![allow(dead_code)]

use implicit_auth::context::ContextLabel;
use implicit_auth::eval::{
    train_bank, Dataset, Experiment, ExperimentConfig, WindowRecord,
};
use implicit_auth::pipeline::{
    authenticate_vectors, Decision, Event, ImpostorPool, ModelBank, ResponsePolicy, RetrainConfig,
    Retrainer, StreamRunner,
};
use implicit_auth::synth::{inject_mimicry, SessionScript, UserProfile};

pub const RATE: f64 = 50.0;
pub const WINDOW_S: f64 = 6.0;

pub fn experiment(seed: u64) -> Experiment {
    Experiment::build(&ExperimentConfig { seed, ..Default::default() }).unwrap()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Windows of `profile` in one context, scored against `bank`.
pub fn session(profile: &UserProfile, context: ContextLabel, secs: f64) -> Vec<WindowRecord> {
    let script = SessionScript::single(context, secs).unwrap();
    Dataset::generate(std::slice::from_ref(profile), &script, WINDOW_S, RATE)
        .unwrap()
        .records
}

pub fn scores(bank: &ModelBank, records: &[WindowRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| {
            authenticate_vectors(bank, r.k, &r.phone_vector(), r.watch_vector().as_ref(), 0.0)
                .unwrap()
                .cs
        })
        .collect()
}

fn for_each_motion(p: &mut UserProfile, mut f: impl FnMut(&mut implicit_auth::synth::MotionParams)) {
    for d in [&mut p.phone, &mut p.watch] {
        for s in [&mut d.acc, &mut d.gyr] {
            f(&mut s.stationary);
            f(&mut s.moving);
        }
    }
}

/// A user whose gait barely varies between epochs, so their scores are
/// tightly clustered.
pub fn steady(p: &UserProfile, factor: f64) -> UserProfile {
    let mut q = p.clone();
    for_each_motion(&mut q, |m| {
        m.freq_jitter *= factor;
        m.amp_jitter *= factor;
        m.noise_std *= factor;
    });
    q
}

/// Gait parameters moved a fraction `delta` toward `target`, keeping the
/// original variability.
pub fn drifted(p: &UserProfile, target: &UserProfile, delta: f64) -> UserProfile {
    let mut q = inject_mimicry(p, target, delta).unwrap();
    let mut orig = Vec::new();
    let mut src = p.clone();
    for_each_motion(&mut src, |m| orig.push((m.freq_jitter, m.amp_jitter, m.noise_std)));
    let mut it = orig.into_iter();
    for_each_motion(&mut q, |m| {
        let (f, a, n) = it.next().unwrap();
        m.freq_jitter = f;
        m.amp_jitter = a;
        m.noise_std = n;
    });
    q
}

pub struct DriftScenario {
    pub bank: ModelBank,
    pub pool: ImpostorPool,
    pub owner: UserProfile,
    pub drifted: UserProfile,
    pub attacker: UserProfile,
    pub delta: f64,
    pub seed: u64,
}

/// Owner 0 made steady; drift strength chosen by bisection so the drifted
/// owner's mean score sits at `target_cs`.
pub fn drift_scenario(seed: u64, target_cs: f64) -> DriftScenario {
    let exp = experiment(seed);
    let mut profiles = exp.profiles.clone();
    profiles[0] = steady(&profiles[0], 0.03);
    let mut ds = Dataset::generate(&profiles, &exp.script, WINDOW_S, RATE).unwrap();
    ds.apply_detector(&exp.detector).unwrap();
    let (bank, pool) = train_bank(&ds, 0, exp.detector.clone(), 800, 1.0, seed).unwrap();
    let owner = profiles[0].clone();
    let probe = |p: &UserProfile| mean(&scores(&bank, &session(p, ContextLabel::Moving, 120.0)));
    let target = (1..profiles.len())
        .find(|&t| probe(&drifted(&owner, &profiles[t], 1.0)) < 0.0)
        .expect("some user scores negative against the owner");
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if probe(&drifted(&owner, &profiles[target], mid)) > target_cs {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    let drifted = UserProfile {
        seed: owner.seed ^ 5,
        ..drifted(&owner, &profiles[target], delta)
    };
    DriftScenario {
        bank,
        pool,
        attacker: profiles[target].clone(),
        owner,
        drifted,
        delta,
        seed,
    }
}

pub struct StreamResult {
    pub decisions: Vec<Decision>,
    pub events: Vec<Event>,
}

pub fn run_records(sc: &DriftScenario, records: &[WindowRecord]) -> StreamResult {
    let mut runner = StreamRunner::new(sc.bank.clone(), ResponsePolicy::default(), RetrainConfig::default())
        .unwrap()
        .with_retrainer(Retrainer {
            rho: 1.0,
            data_size: 800,
            impostors: sc.pool.clone(),
            seed: sc.seed,
        });
    let mut events = Vec::new();
    let decisions = records
        .iter()
        .enumerate()
        .map(|(k, r)| runner.process(k, &r.phone_vector(), r.watch_vector().as_ref(), &mut events).unwrap())
        .collect();
    StreamResult { decisions, events }
}

pub fn retrain_windows(events: &[Event]) -> Vec<usize> {
    events
        .iter()
        .filter_map(|e| match e {
            Event::Retrained { k, .. } => Some(*k),
            _ => None,
        })
        .collect()
}

pub fn trigger_count(events: &[Event]) -> usize {
    events.iter().filter(|e| matches!(e, Event::RetrainTrigger { .. })).count()
}
