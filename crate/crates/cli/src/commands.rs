use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use icad::conformal::{calibrate_with, Backbone, DetectorConfig, Method, Pipeline, VaeCalibration};
use icad::episodes::{
    benchmark_timing, diagnostics_csv, episode_csv, metrics_csv, run_suite, timing_csv, tune, tune_csv, SceneGenerator,
    SuiteConfig, TuneGrid,
};
use icad::models::{pretrain_autoencoder_then_copy, train_svdd, train_vae, SvddModel, TrainConfig, VaeModel};
use icad::nonconformity::{Bandwidth, Scorer};
use icad::persistence::{
    atomic_write, load_calibration_for, load_dataset, load_model, save_calibration, save_dataset, save_model, Dataset,
    KeyValueConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::*;

pub enum Outcome {
    Clean,
    Alarm,
}

pub fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::GenData(a) => gen_data(a),
        Command::TrainVae(a) => train_vae_cmd(a),
        Command::TrainSvdd(a) => train_svdd_cmd(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Detect(a) => detect(a),
        Command::Simulate(a) => simulate(a),
        Command::Tune(a) => tune_cmd(a),
        Command::Bench(a) => bench(a),
    }
    .map(|alarm| if alarm { Outcome::Alarm } else { Outcome::Clean })
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".config");
    out.with_file_name(name)
}

fn write_sidecar(path: &Path, cfg: &KeyValueConfig) -> Result<()> {
    cfg.save(path).with_context(|| format!("writing {}", path.display()))
}

fn resolved(command: &str) -> KeyValueConfig {
    let mut cfg = KeyValueConfig::new();
    cfg.set("command", command);
    cfg
}

fn side_of(dim: usize) -> Result<usize> {
    let side = (dim as f64).sqrt().round() as usize;
    if side < 2 || side * side != dim {
        bail!("dimension {dim} is not a perfect square of at least 4");
    }
    Ok(side)
}

fn method_of(m: MethodArg) -> Method {
    match m {
        MethodArg::Vae => Method::Vae,
        MethodArg::Svdd => Method::Svdd,
    }
}

fn gen_data(a: GenData) -> Result<bool> {
    if a.count == 0 {
        bail!("--count must be at least 1");
    }
    let gen = SceneGenerator::with_side(side_of(a.dim)?, a.seed);
    let (examples, r) = gen.generate_dataset(a.count, (a.r_min, a.r_max))?;
    save_dataset(&a.out, &Dataset { examples, r: Some(r) })?;
    let mut cfg = resolved("gen-data");
    cfg.set("out", a.out.display())
        .set("count", a.count)
        .set("dim", a.dim)
        .set("r_min", a.r_min)
        .set("r_max", a.r_max)
        .set("seed", a.seed);
    write_sidecar(&sidecar_path(&a.out), &cfg)?;
    Ok(false)
}

fn train_config(c: &TrainCommon) -> TrainConfig {
    TrainConfig {
        epochs: c.epochs,
        learning_rate: c.lr,
        fine_tune_epochs: c.fine_tune_epochs,
        fine_tune_learning_rate: c.lr2,
        batch_size: c.batch_size,
        seed: c.seed,
    }
}

fn common_config(command: &str, c: &TrainCommon) -> KeyValueConfig {
    let mut cfg = resolved(command);
    cfg.set("data", c.data.display())
        .set("out", c.out.display())
        .set("epochs", c.epochs)
        .set("fine_tune_epochs", c.fine_tune_epochs)
        .set("lr", c.lr)
        .set("lr2", c.lr2)
        .set("batch_size", c.batch_size)
        .set("seed", c.seed)
        .set("hidden", join(&c.hidden));
    cfg
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn curve_path(c: &TrainCommon) -> PathBuf {
    c.curve.clone().unwrap_or_else(|| {
        let mut name = c.out.file_name().unwrap_or_default().to_os_string();
        name.push(".loss.csv");
        c.out.with_file_name(name)
    })
}

fn train_vae_cmd(a: TrainVae) -> Result<bool> {
    let c = &a.common;
    let data = load_dataset(&c.data)?.examples;
    let dim = data[0].dim();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let model = VaeModel::random(dim, &c.hidden, a.latent, &mut rng)?;
    let out = train_vae(model, &data, &train_config(c))?;
    save_model(&c.out, &Backbone::Vae(out.model))?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in out.loss_curve.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", i + 1, l);
    }
    atomic_write(&curve_path(c), csv.as_bytes())?;
    let mut cfg = common_config("train-vae", c);
    cfg.set("latent", a.latent).set("curve", curve_path(c).display());
    write_sidecar(&sidecar_path(&c.out), &cfg)?;
    Ok(false)
}

fn train_svdd_cmd(a: TrainSvdd) -> Result<bool> {
    let c = &a.common;
    let data = load_dataset(&c.data)?.examples;
    let dim = data[0].dim();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let model = SvddModel::random(dim, &c.hidden, a.rep, a.lambda, &mut rng)?;
    let pre_cfg = train_config(c);
    let (model, pre_curve) = pretrain_autoencoder_then_copy(model, &data, &pre_cfg, a.pretrain)?;
    let svdd_cfg = TrainConfig {
        epochs: a.svdd_epochs.unwrap_or(c.epochs),
        fine_tune_epochs: a.svdd_fine_tune_epochs.unwrap_or(c.fine_tune_epochs),
        ..pre_cfg
    };
    let out = train_svdd(model, &data, &svdd_cfg)?;
    save_model(&c.out, &Backbone::Svdd(out.model))?;
    let mut csv = String::from("phase,epoch,loss,distance\n");
    for (i, l) in pre_curve.iter().enumerate() {
        let _ = writeln!(csv, "pretrain,{},{},", i + 1, l);
    }
    for (i, (l, d)) in out.loss_curve.iter().zip(&out.distance_curve).enumerate() {
        let _ = writeln!(csv, "svdd,{},{},{}", i + 1, l, d);
    }
    atomic_write(&curve_path(c), csv.as_bytes())?;
    let mut cfg = common_config("train-svdd", c);
    cfg.set("rep", a.rep)
        .set("lambda", a.lambda)
        .set("pretrain", a.pretrain)
        .set("svdd_epochs", svdd_cfg.epochs)
        .set("svdd_fine_tune_epochs", svdd_cfg.fine_tune_epochs)
        .set("curve", curve_path(c).display());
    write_sidecar(&sidecar_path(&c.out), &cfg)?;
    Ok(false)
}

fn calibrate(a: Calibrate) -> Result<bool> {
    let scorer = match a.scorer {
        ScorerArg::Vae | ScorerArg::Svdd => {
            let path = a
                .model
                .as_ref()
                .ok_or_else(|| anyhow!("--model is required for this scorer"))?;
            let backbone = load_model(path)?;
            let wanted = if a.scorer == ScorerArg::Vae {
                Method::Vae
            } else {
                Method::Svdd
            };
            if backbone.method() != wanted {
                bail!("{} holds a {} model", path.display(), backbone.method().name());
            }
            backbone.into_scorer()?
        }
        ScorerArg::Knn | ScorerArg::Kde => {
            let path = a
                .train_data
                .as_ref()
                .ok_or_else(|| anyhow!("--train-data is required for this scorer"))?;
            let train = load_dataset(path)?.examples;
            if a.scorer == ScorerArg::Knn {
                Scorer::knn(train, a.k)?
            } else {
                let dim = train[0].dim();
                let bw = a.bandwidth.map(|h| Bandwidth::uniform(h, dim)).transpose()?;
                Scorer::kde(train, bw)?
            }
        }
    };
    let cal_data = load_dataset(&a.cal_data)?.examples;
    let mode = match a.cal_samples {
        Some(0) => bail!("--cal-samples must be at least 1"),
        Some(samples) => VaeCalibration::Sampled { samples, seed: a.seed },
        None => VaeCalibration::MeanReconstruction,
    };
    let cal = calibrate_with(&scorer, &cal_data, mode)?;
    save_calibration(&a.out, &cal)?;
    let mut cfg = resolved("calibrate");
    cfg.set("scorer", scorer.kind().name())
        .set("cal_data", a.cal_data.display())
        .set("out", a.out.display())
        .set("seed", a.seed)
        .set("calibration_size", cal.len());
    if let Some(m) = &a.model {
        cfg.set("model", m.display());
    }
    if let Some(t) = &a.train_data {
        cfg.set("train_data", t.display());
    }
    match scorer {
        Scorer::Knn { k, .. } => {
            cfg.set("k", k);
        }
        Scorer::Kde { ref bandwidth, .. } => {
            cfg.set("bandwidth", join(bandwidth.values()));
        }
        _ => {}
    }
    if let Some(s) = a.cal_samples {
        cfg.set("cal_samples", s);
    }
    write_sidecar(&sidecar_path(&a.out), &cfg)?;
    Ok(false)
}

fn load_pipeline(method: Method, model: &Path, cal: &Path) -> Result<Pipeline> {
    let backbone = load_model(model)?;
    if backbone.method() != method {
        bail!("{} holds a {} model", model.display(), backbone.method().name());
    }
    let scorer = backbone.clone().into_scorer()?;
    let cal = load_calibration_for(cal, &scorer)?;
    Ok(Pipeline::new(backbone, cal)?)
}

fn detect(a: Detect) -> Result<bool> {
    let method = method_of(a.method);
    let pipeline = load_pipeline(method, &a.model, &a.cal)?;
    let data = load_dataset(&a.input)?;
    let cfg = DetectorConfig {
        n: a.n as usize,
        delta: a.delta,
        tau: a.tau,
        seed: a.seed,
    };
    let mut monitor = pipeline.monitor(&cfg)?;
    let mut records = Vec::with_capacity(data.examples.len());
    for z in &data.examples {
        records.push(monitor.step(z)?);
    }
    let first_alarm = records.iter().find(|r| r.alarm).map(|r| r.step);
    let r_values = data.r.as_ref();
    let csv = diagnostics_csv(records.iter().enumerate().map(|(i, rec)| (r_values.map(|r| r[i]), rec)));
    atomic_write(&a.out, csv.as_bytes())?;
    let mut side = resolved("detect");
    side.set("method", method.name())
        .set("model", a.model.display())
        .set("cal", a.cal.display())
        .set("input", a.input.display())
        .set("N", a.n)
        .set("delta", a.delta)
        .set("tau", a.tau)
        .set("seed", a.seed)
        .set("out", a.out.display())
        .set(
            "alarm_step",
            first_alarm.map_or_else(|| "none".to_string(), |s| s.to_string()),
        );
    write_sidecar(&sidecar_path(&a.out), &side)?;
    match first_alarm {
        Some(s) => eprintln!("alarm at step {s}"),
        None => eprintln!("no alarm in {} steps", records.len()),
    }
    Ok(first_alarm.is_some())
}

/// Episode settings after merging flags, the config file and defaults.
struct EpisodeSettings {
    method: Method,
    model: PathBuf,
    cal: PathBuf,
    n: usize,
    seed: u64,
    max_steps: u64,
    file: KeyValueConfig,
}

impl EpisodeSettings {
    fn resolve(a: &EpisodeArgs) -> Result<Self> {
        let file = match &a.config {
            Some(p) => KeyValueConfig::load(p)?,
            None => KeyValueConfig::new(),
        };
        let method = match a.method {
            Some(m) => method_of(m),
            None => file
                .parsed::<Method>("method")?
                .ok_or_else(|| anyhow!("--method is required (flag or config)"))?,
        };
        let path = |flag: &Option<PathBuf>, key: &str| -> Result<PathBuf> {
            flag.clone()
                .or_else(|| file.get(key).map(PathBuf::from))
                .ok_or_else(|| anyhow!("--{key} is required (flag or config)"))
        };
        let n = pick(a.n, &file, "N", 10)?;
        if n == 0 {
            bail!("N must be at least 1");
        }
        Ok(Self {
            method,
            model: path(&a.model, "model")?,
            cal: path(&a.cal, "cal")?,
            n,
            seed: pick(a.seed, &file, "seed", 0)?,
            max_steps: pick(a.max_steps, &file, "max_steps", 160)?,
            file,
        })
    }

    fn pipeline(&self) -> Result<(SceneGenerator, Pipeline)> {
        let pipeline = load_pipeline(self.method, &self.model, &self.cal)?;
        let gen = SceneGenerator::with_side(side_of(pipeline.input_dim())?, self.seed);
        Ok((gen, pipeline))
    }

    fn suite(&self, episodes: Option<usize>) -> Result<SuiteConfig> {
        let total = pick(episodes, &self.file, "episodes", 50)?;
        if total == 0 {
            bail!("--episodes must be at least 1");
        }
        Ok(SuiteConfig {
            in_dist: total / 2,
            ood: total - total / 2,
            max_steps: self.max_steps,
            seed: self.seed,
        })
    }

    fn record(&self, cfg: &mut KeyValueConfig) {
        cfg.set("method", self.method.name())
            .set("model", self.model.display())
            .set("cal", self.cal.display())
            .set("N", self.n)
            .set("seed", self.seed)
            .set("max_steps", self.max_steps);
    }
}

fn pick<T>(flag: Option<T>, file: &KeyValueConfig, key: &str, default: T) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(v),
        None => Ok(file.parsed(key)?.unwrap_or(default)),
    }
}

fn simulate(a: Simulate) -> Result<bool> {
    let s = EpisodeSettings::resolve(&a.episode)?;
    let (gen, pipeline) = s.pipeline()?;
    let suite = s.suite(a.episodes)?;
    let cfg = DetectorConfig {
        n: s.n,
        delta: pick(a.delta, &s.file, "delta", 6.0)?,
        tau: pick(a.tau, &s.file, "tau", 14.0)?,
        seed: s.seed,
    };
    let report = run_suite(&gen, &pipeline, &cfg, &suite)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    atomic_write(
        &a.out.join("metrics.csv"),
        metrics_csv(std::slice::from_ref(&report.metrics)).as_bytes(),
    )?;
    let mut summary = String::from("episode,label,r0,t0,t1,beta,onset_step,alarm_step,verdict,delay\n");
    let opt = |v: Option<u64>| v.map_or_else(String::new, |x| x.to_string());
    for (spec, out) in report.specs.iter().zip(&report.outcomes) {
        let res = &out.result;
        let sch = &spec.schedule;
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{},{}",
            spec.index,
            if res.onset_step.is_some() { "ood" } else { "in_dist" },
            sch.r0,
            sch.t0,
            sch.t1,
            sch.beta,
            opt(res.onset_step),
            opt(res.alarm_step),
            res.verdict.name(),
            opt(res.delay_frames),
        );
        let path = a.out.join(format!("episode_{:03}.csv", spec.index));
        atomic_write(&path, episode_csv(&out.rows).as_bytes())?;
    }
    atomic_write(&a.out.join("episodes.csv"), summary.as_bytes())?;
    let mut side = resolved("simulate");
    s.record(&mut side);
    side.set("delta", cfg.delta)
        .set("tau", cfg.tau)
        .set("in_dist", suite.in_dist)
        .set("ood", suite.ood)
        .set("out", a.out.display());
    write_sidecar(&a.out.join("run.config"), &side)?;
    let m = &report.metrics;
    eprintln!(
        "false positives {}, false negatives {}, mean delay {}",
        m.false_positive_cell(),
        m.false_negative_cell(),
        m.delay_cell()
    );
    Ok(false)
}

fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(vec![v.trim().parse()?]),
        [lo, hi, count] => Ok(TuneGrid::linspace(
            lo.trim().parse()?,
            hi.trim().parse()?,
            count.trim().parse()?,
        )),
        _ => bail!("expected value or lo:hi:count, got {spec:?}"),
    }
}

fn parse_grid(spec: &str) -> Result<TuneGrid> {
    let mut grid = TuneGrid {
        deltas: vec![0.0],
        taus: Vec::new(),
    };
    for part in spec.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("grid entries look like delta=lo:hi:count, got {part:?}"))?;
        let values = parse_range(value).with_context(|| format!("grid entry {part:?}"))?;
        match key.trim() {
            "delta" => grid.deltas = values,
            "tau" => grid.taus = values,
            other => bail!("unknown grid axis {other:?}"),
        }
    }
    if grid.taus.is_empty() || grid.deltas.is_empty() {
        bail!("grid needs at least one tau and one delta");
    }
    Ok(grid)
}

fn tune_cmd(a: Tune) -> Result<bool> {
    let s = EpisodeSettings::resolve(&a.episode)?;
    let grid = parse_grid(&a.grid)?;
    let (gen, pipeline) = s.pipeline()?;
    let suite = s.suite(a.episodes)?;
    let report = tune(&gen, &pipeline, s.n, &suite, &grid)?;
    atomic_write(&a.out, tune_csv(&report).as_bytes())?;
    let best = report.best();
    let mut side = resolved("tune");
    s.record(&mut side);
    side.set("grid", &a.grid)
        .set("in_dist", suite.in_dist)
        .set("ood", suite.ood)
        .set("out", a.out.display())
        .set("delta", best.delta)
        .set("tau", best.tau)
        .set("false_positive", best.metrics.false_positive_cell())
        .set("false_negative", best.metrics.false_negative_cell())
        .set("average_delay", best.metrics.delay_cell());
    write_sidecar(&sidecar_path(&a.out), &side)?;
    eprintln!(
        "selected delta={} tau={}: false positives {}, false negatives {}, mean delay {}",
        best.delta,
        best.tau,
        best.metrics.false_positive_cell(),
        best.metrics.false_negative_cell(),
        best.metrics.delay_cell()
    );
    Ok(false)
}

fn bench(a: Bench) -> Result<bool> {
    let s = EpisodeSettings::resolve(&a.episode)?;
    if a.n_list.is_empty() || a.n_list.contains(&0) {
        bail!("--N-list needs positive window sizes");
    }
    let (gen, pipeline) = s.pipeline()?;
    let rows = benchmark_timing(&gen, &pipeline, a.steps, &a.n_list, s.seed)?;
    atomic_write(&a.out, timing_csv(&rows).as_bytes())?;
    let mut side = resolved("bench");
    s.record(&mut side);
    side.set("N_list", join(&a.n_list))
        .set("steps", a.steps)
        .set("out", a.out.display());
    write_sidecar(&sidecar_path(&a.out), &side)?;
    Ok(false)
}
