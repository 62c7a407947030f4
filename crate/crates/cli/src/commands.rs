use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use implicit_auth::config::Config;
use implicit_auth::context::{ContextDetector, ContextLabel};
use implicit_auth::eval::{
    ablation, attacker_cohort, masquerade_eval, sweep_data_size, sweep_window_size, train_bank, train_context_detector,
    ContextMode, Curve, Dataset, EvalConfig, Experiment, ExperimentConfig, MasqueradeConfig,
};
use implicit_auth::features::{
    candidate_features, device_features, device_layout, FeatureKind, FeatureRow, FeatureTable, FeatureVector,
};
use implicit_auth::forest::ForestParams;
use implicit_auth::pipeline::{
    decision_log, read_versioned, run_stream, write_versioned, DeviceSet, Event, ModelBank, StreamRunner,
};
use implicit_auth::sensor::{segment, Device, SensorFormat, SensorKind, SensorRecording, Window};
use implicit_auth::synth::{generate_user, ground_truth, population, read_truth, write_truth, SessionScript};
use implicit_auth::Error;

use crate::{Cli, Command, Format, Mode, Overrides, PopulationArgs, SweepKind};

pub fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(cli.config.as_deref(), &cli.overrides, cli.results_dir)?;
    log::debug!("effective config:\n{}", cfg.to_toml());
    match cli.command {
        Command::Generate { out, preset, users, first_id, per_context_s, block_s, format } => {
            let out = out.unwrap_or_else(|| cfg.paths.data_dir.clone());
            generate(&cfg, &out, preset, users, first_id, per_context_s, block_s, format)
        }
        Command::Extract { inputs, truth, user_id, candidates, out } => {
            extract(&cfg, &inputs, truth.as_deref(), user_id, candidates, &out)
        }
        Command::Select { features, out } => select(&cfg, &features, &out),
        Command::TrainContext { features, out, trees } => {
            let out = out.unwrap_or_else(|| cfg.paths.model_dir.join("context.json"));
            train_context(&cfg, &features, &out, trees)
        }
        Command::TrainAuth { features, context_model, owner, context, device_set, out } => {
            let context_model = context_model.unwrap_or_else(|| cfg.paths.model_dir.join("context.json"));
            let out = out.unwrap_or_else(|| {
                cfg.paths.model_dir.join(match context {
                    Some(c) => format!("{c}_{device_set}.json"),
                    None => "bank.json".into(),
                })
            });
            train_auth(&cfg, &features, &context_model, owner, context, device_set, &out)
        }
        Command::Run { bank, input, out } => {
            let mut bank = bank.unwrap_or_else(|| cfg.paths.model_dir.clone());
            if bank.is_dir() {
                bank.push("bank.json");
            }
            run_log(&cfg, &bank, &input, out.as_deref())
        }
        Command::Evaluate { population, iterations, folds, min_accuracy } => {
            evaluate(&cfg, &population, iterations, folds, min_accuracy)
        }
        Command::Sweep { kind, values, population, device_set, mode, iterations, folds } => {
            sweep(&cfg, kind, &values, &population, device_set, mode, iterations, folds)
        }
        Command::Masquerade { population, victim, sessions, lambdas, horizon } => {
            masquerade(&cfg, &population, victim, sessions, lambdas, horizon)
        }
    }
}

/// Defaults, then the file, then the environment/flags.
fn load_config(path: Option<&Path>, o: &Overrides, results_dir: Option<PathBuf>) -> Result<Config> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => {$(if let Some(v) = o.$f { cfg.$f = v; })*};
    }
    set!(seed, sample_rate_hz, window_s, data_size, rho, alpha, corr_threshold, epsilon_cs, t_windows, lockout_after);
    if let Some(d) = results_dir {
        cfg.paths.results_dir = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// A standalone model file, tagged with the schema version.
fn write_model<T: serde::Serialize>(path: &Path, model: &T) -> Result<()> {
    let mut w = create(path)?;
    write_versioned(model, &mut w)?;
    w.write_all(b"\n")?;
    w.flush()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn read_table(path: &Path) -> Result<FeatureTable> {
    FeatureTable::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_recording(cfg: &Config, path: &Path) -> Result<SensorRecording> {
    SensorRecording::read(open(path)?, SensorFormat::from_path(path), cfg.sample_rate_hz)
        .with_context(|| format!("reading {}", path.display()))
}

fn eval_config(cfg: &Config, iterations: usize, folds: usize) -> Result<EvalConfig> {
    let e = EvalConfig {
        folds,
        iterations,
        data_size: cfg.data_size,
        rho: cfg.rho,
        threshold: 0.0,
        seed: cfg.seed,
    };
    e.validate()?;
    Ok(e)
}

fn experiment(cfg: &Config, p: &PopulationArgs) -> Result<Experiment> {
    if p.users < 2 {
        return Err(Error::validation("users", "need at least 2 users").into());
    }
    log::info!("building {} population of {} users", p.preset.as_str(), p.users);
    Ok(Experiment::build(&ExperimentConfig {
        preset: p.preset,
        custom: None,
        n_users: p.users,
        lab_users: p.lab_users,
        per_context_s: p.per_context_s,
        block_s: p.block_s,
        window_s: cfg.window_s,
        sample_rate_hz: cfg.sample_rate_hz,
        seed: cfg.seed,
        forest: ForestParams::default(),
    })?)
}

#[allow(clippy::too_many_arguments)]
fn generate(
    cfg: &Config,
    out: &Path,
    preset: implicit_auth::synth::Preset,
    users: usize,
    first_id: u32,
    per_context_s: f64,
    block_s: f64,
    format: Format,
) -> Result<ExitCode> {
    if users == 0 {
        return Err(Error::validation("users", "need at least 1 user").into());
    }
    let script = SessionScript::alternating(per_context_s, block_s)?;
    let profiles = population(preset, users, first_id, cfg.seed);
    let (sensor_format, ext) = match format {
        Format::Csv => (SensorFormat::Csv, "csv"),
        Format::Jsonl => (SensorFormat::Jsonl, "jsonl"),
    };
    let mut truth = Vec::new();
    for p in &profiles {
        let rec = generate_user(p, &script, cfg.sample_rate_hz)?;
        let path = out.join(format!("user_{}.{ext}", p.user_id));
        let mut w = create(&path)?;
        rec.write(&mut w, sensor_format)?;
        w.flush()?;
        truth.extend(ground_truth(p.user_id, &script, cfg.window_s, cfg.sample_rate_hz)?);
        log::info!("wrote {}", path.display());
    }
    let mut w = create(&out.join("truth.csv"))?;
    write_truth(&truth, &mut w)?;
    w.flush()?;
    write_json(&out.join("profiles.json"), &profiles)?;
    println!("{} users, {} windows each, in {}", users, truth.len() / users, out.display());
    Ok(ExitCode::SUCCESS)
}

fn user_id_of(path: &Path) -> Option<u32> {
    path.file_stem()?.to_str()?.strip_prefix("user_")?.parse().ok()
}

fn windows_of(rec: &SensorRecording, device: Device, sensor: SensorKind, window_s: f64) -> Result<Option<Vec<Window>>> {
    Ok(rec.get(device, sensor).map(|s| segment(s, window_s)).transpose()?)
}

fn extract(
    cfg: &Config,
    inputs: &[PathBuf],
    truth: Option<&Path>,
    user_id: Option<u32>,
    candidates: bool,
    out: &Path,
) -> Result<ExitCode> {
    if user_id.is_some() && inputs.len() > 1 {
        return Err(Error::validation("user_id", "only valid with a single input").into());
    }
    let mut contexts: BTreeMap<(u32, usize), Option<ContextLabel>> = BTreeMap::new();
    if let Some(t) = truth {
        for row in read_truth(open(t)?).with_context(|| format!("reading {}", t.display()))? {
            contexts.insert((row.user_id, row.window), row.context);
        }
    }
    let mut recordings = Vec::with_capacity(inputs.len());
    for path in inputs {
        let id = user_id.or_else(|| user_id_of(path)).ok_or_else(|| {
            Error::validation("user_id", format!("cannot tell the user of {}; pass --user-id", path.display()))
        })?;
        recordings.push((id, read_recording(cfg, path)?));
    }
    let with_watch = recordings.iter().all(|(_, r)| r.has_device(Device::Watch));
    let kinds: &[FeatureKind] = if candidates { &FeatureKind::CANDIDATES } else { &FeatureKind::PRODUCTION };
    let mut layout = device_layout(Device::Phone, kinds);
    if with_watch {
        layout.extend(device_layout(Device::Watch, kinds));
    }
    let features = |d, a: &Window, g: &Window| -> Result<FeatureVector> {
        Ok(if candidates {
            candidate_features(d, a, g, cfg.sample_rate_hz)?
        } else {
            device_features(d, a, g, cfg.sample_rate_hz)?
        })
    };
    let mut table = FeatureTable::new(layout);
    let mut skipped = 0usize;
    for (id, rec) in &recordings {
        let w = |d, s| windows_of(rec, d, s, cfg.window_s);
        let (Some(pa), Some(pg)) = (w(Device::Phone, SensorKind::Accelerometer)?, w(Device::Phone, SensorKind::Gyroscope)?)
        else {
            bail!("user {id}: recording has no phone accelerometer and gyroscope streams");
        };
        let watch = if with_watch {
            Some((w(Device::Watch, SensorKind::Accelerometer)?.unwrap_or_default(), w(Device::Watch, SensorKind::Gyroscope)?.unwrap_or_default()))
        } else {
            None
        };
        for k in 0..pa.len().min(pg.len()) {
            if pa[k].has_gap || pg[k].has_gap {
                skipped += 1;
                continue;
            }
            let mut values = features(Device::Phone, &pa[k], &pg[k])?.values;
            if let Some((wa, wg)) = &watch {
                match (wa.get(k), wg.get(k)) {
                    (Some(a), Some(g)) if !a.has_gap && !g.has_gap => {
                        values.extend(features(Device::Watch, a, g)?.values)
                    }
                    _ => {
                        skipped += 1;
                        continue;
                    }
                }
            }
            let context = contexts.get(&(*id, k)).copied().flatten();
            table.push(FeatureRow { window: k, user_id: *id, context, values })?;
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} windows with sensor gaps");
    }
    let mut w = create(out)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    println!("{} windows x {} features -> {}", table.rows.len(), table.layout.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn select(cfg: &Config, features: &Path, out: &Path) -> Result<ExitCode> {
    let table = read_table(features)?;
    let report = implicit_auth::selection::analyze(&table, &cfg.selection())?;
    write_json(out, &report)?;
    println!("kept: {}", report.kept.join(","));
    Ok(ExitCode::SUCCESS)
}

fn labelled(cfg: &Config, features: &Path) -> Result<Dataset> {
    let table = read_table(features)?;
    Dataset::from_table(&table, cfg.window_s, cfg.sample_rate_hz)
        .with_context(|| format!("{} needs production columns and a context on every row", features.display()))
}

fn train_context(cfg: &Config, features: &Path, out: &Path, trees: usize) -> Result<ExitCode> {
    if trees == 0 {
        return Err(Error::validation("trees", "need at least 1").into());
    }
    let ds = labelled(cfg, features)?;
    let params = ForestParams { n_trees: trees, seed: cfg.seed, ..ForestParams::default() };
    let detector = train_context_detector(&ds, &params)?;
    let fit = detector.confusion(&ds.context_examples())?.accuracy();
    write_model(out, &detector)?;
    println!("context detector on {} windows, training accuracy {fit:.4}", ds.records.len());
    Ok(ExitCode::SUCCESS)
}

fn train_auth(
    cfg: &Config,
    features: &Path,
    context_model: &Path,
    owner: u32,
    context: Option<ContextLabel>,
    device_set: DeviceSet,
    out: &Path,
) -> Result<ExitCode> {
    let mut ds = labelled(cfg, features)?;
    if !ds.users().contains(&owner) {
        return Err(Error::validation("owner", format!("user {owner} has no windows in {}", features.display())).into());
    }
    let detector: ContextDetector =
        read_versioned(open(context_model)?).with_context(|| format!("loading {}", context_model.display()))?;
    ds.apply_detector(&detector)?;
    let (bank, _) = train_bank(&ds, owner, detector, cfg.data_size, cfg.rho, cfg.seed)?;
    match context {
        Some(c) => {
            let model = bank.get(c, device_set)?;
            write_model(out, model)?;
            println!("{c}/{device_set} model for user {owner}: {} training vectors", model.train_meta.n_train);
        }
        None => {
            let mut w = create(out)?;
            bank.to_writer(&mut w)?;
            w.write_all(b"\n")?;
            w.flush()?;
            let names: Vec<String> = bank.models.iter().map(|e| format!("{}/{}", e.context, e.device_set)).collect();
            println!("bank for user {owner}: {}", names.join(", "));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_log(cfg: &Config, bank: &Path, input: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let bank = ModelBank::from_reader(open(bank)?).with_context(|| format!("loading {}", bank.display()))?;
    let rec = read_recording(cfg, input)?;
    let mut runner = StreamRunner::new(bank, cfg.response(), cfg.retrain())?;
    let output = run_stream(&mut runner, &rec, cfg.window_s)?;
    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    for line in decision_log(&output) {
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let lockouts = output.events.iter().filter(|e| matches!(e, Event::Lockout { .. })).count();
    log::info!("{} windows, {} lockouts", output.decisions.len(), lockouts);
    Ok(ExitCode::SUCCESS)
}

fn results_path(cfg: &Config, name: &str) -> PathBuf {
    cfg.paths.results_dir.join(name)
}

fn write_curve(cfg: &Config, stem: &str, curve: &Curve) -> Result<()> {
    let path = results_path(cfg, &format!("{stem}.csv"));
    let mut w = create(&path)?;
    curve.write_csv(&mut w)?;
    w.flush()?;
    write_json(&results_path(cfg, &format!("{stem}.json")), curve)
}

fn evaluate(cfg: &Config, p: &PopulationArgs, iterations: usize, folds: usize, min_accuracy: f64) -> Result<ExitCode> {
    if !(0.0..=1.0).contains(&min_accuracy) {
        return Err(Error::validation("min_accuracy", "must lie in [0, 1]").into());
    }
    let ecfg = eval_config(cfg, iterations, folds)?;
    let exp = experiment(cfg, p)?;
    let report = ablation(&exp.dataset, &ecfg)?;
    let stem = format!("evaluate_{}", p.preset.as_str());
    write_json(&results_path(cfg, &format!("{stem}.json")), &report)?;

    let mut table = String::from("device_set,context_mode,accuracy,frr,far,legit,impostor\n");
    for c in &report.cells {
        let r = &c.rates;
        table.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.device_set,
            mode_name(c.context_mode),
            r.accuracy,
            r.frr,
            r.far,
            r.counts.legit,
            r.counts.impostor
        ));
    }
    let csv_path = results_path(cfg, &format!("{stem}.csv"));
    let mut w = create(&csv_path)?;
    w.write_all(table.as_bytes())?;
    w.flush()?;
    print!("{table}");

    let best = report
        .cell(DeviceSet::PhoneAndWatch, ContextMode::ContextAware)
        .map(|c| c.rates.accuracy)
        .unwrap_or(0.0);
    if best < min_accuracy {
        eprintln!("error: accuracy {best:.4} of phone_and_watch/context_aware is below min_accuracy {min_accuracy}");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn mode_name(m: ContextMode) -> &'static str {
    match m {
        ContextMode::ContextFree => "context_free",
        ContextMode::ContextAware => "context_aware",
    }
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    cfg: &Config,
    kind: SweepKind,
    values: &[f64],
    p: &PopulationArgs,
    device_set: DeviceSet,
    mode: Mode,
    iterations: usize,
    folds: usize,
) -> Result<ExitCode> {
    let ecfg = eval_config(cfg, iterations, folds)?;
    let mode = match mode {
        Mode::Aware => ContextMode::ContextAware,
        Mode::Free => ContextMode::ContextFree,
    };
    let curve = match kind {
        SweepKind::Window => {
            if let Some(w) = values.iter().find(|w| !(**w > 0.0 && **w <= 60.0)) {
                return Err(Error::validation("values", format!("window length {w} outside (0, 60]")).into());
            }
            let profiles = population(p.preset, p.users, 0, cfg.seed);
            let script = SessionScript::alternating(p.per_context_s, p.block_s)?;
            sweep_window_size(&profiles, &script, values, cfg.sample_rate_hz, device_set, mode, &ecfg)?
        }
        SweepKind::Data => {
            let sizes = values
                .iter()
                .map(|&v| {
                    if v >= 2.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(Error::validation("values", format!("data size {v} is not an integer of at least 2")))
                    }
                })
                .collect::<implicit_auth::Result<Vec<usize>>>()?;
            let exp = experiment(cfg, p)?;
            sweep_data_size(&exp.dataset, &sizes, device_set, mode, &ecfg)?
        }
    };
    let stem = match kind {
        SweepKind::Window => "sweep_window",
        SweepKind::Data => "sweep_data",
    };
    write_curve(cfg, stem, &curve)?;
    for pt in &curve.points {
        println!("{}={} frr={:.4} far={:.4} accuracy={:.4}", curve.parameter, pt.x, pt.rates.frr, pt.rates.far, pt.rates.accuracy);
    }
    Ok(ExitCode::SUCCESS)
}

fn masquerade(
    cfg: &Config,
    p: &PopulationArgs,
    victim: u32,
    sessions: usize,
    lambdas: Vec<f64>,
    horizon: usize,
) -> Result<ExitCode> {
    if let Some(l) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::validation("lambdas", format!("{l} outside [0, 1]")).into());
    }
    if sessions == 0 {
        return Err(Error::validation("sessions", "need at least 1").into());
    }
    let exp = experiment(cfg, p)?;
    let Some(victim_profile) = exp.profiles.iter().find(|q| q.user_id == victim) else {
        return Err(Error::validation("victim", format!("no user {victim} among {} users", p.users)).into());
    };
    let (bank, _) = train_bank(&exp.dataset, victim, exp.detector.clone(), cfg.data_size, cfg.rho, cfg.seed)?;
    let others: Vec<_> = exp.profiles.iter().filter(|q| q.user_id != victim).cloned().collect();
    let attackers = attacker_cohort(&others, sessions, cfg.seed);
    let mcfg = MasqueradeConfig {
        lambdas,
        horizon,
        window_s: cfg.window_s,
        sample_rate_hz: cfg.sample_rate_hz,
        ..MasqueradeConfig::default()
    };
    let report = masquerade_eval(&bank, victim_profile, &attackers, &mcfg)?;
    write_json(&results_path(cfg, "masquerade.json"), &report)?;

    let mut table = String::from("lambda,n,survival,predicted,tolerance,within_tolerance\n");
    for c in &report.curves {
        for pt in &c.points {
            table.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.lambda, pt.n, pt.survival, pt.predicted, pt.tolerance, pt.within_tolerance
            ));
        }
    }
    let mut w = create(&results_path(cfg, "masquerade.csv"))?;
    w.write_all(table.as_bytes())?;
    w.flush()?;
    for c in &report.curves {
        println!(
            "lambda={} p_hat={:.4} locked_within_3={:.4} attackers={}",
            c.lambda, c.p_hat, c.locked_within_3, c.n_attackers
        );
    }
    if !report.all_within_tolerance() {
        eprintln!("error: survival departs from p_hat^n by more than the 3-sigma tolerance");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
