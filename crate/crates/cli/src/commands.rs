use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::info;
use narlab_core::autodiff::Checkpoint;
use narlab_core::eval::{
    bridge_pair_probe, evaluate, evaluate_oracle, generate_pairs, interpolate, uniform_grid,
    write_interpolation_csv, ModelPredictor, RandomPredictor, EVAL_BATCH,
};
use narlab_core::fixtures::{generate_fixtures, verify_fixtures};
use narlab_core::taskgen::{generate_split, read_shard, shard_path, write_shard, GraphGenerator};
use narlab_core::trainer::{train as run_training, RunOptions, TrainConfig, TrainData};
use narlab_core::{
    DatasetConfig, Model, ModelConfig, ParamSet, PositionEncoding, Preset, ProcessorConfig, Rng,
    Split, TaskId,
};
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::{EvalArgs, FixtureAction, FixtureArgs, GenArgs, InterpArgs, ProbeArgs, TrainArgs};

/// Error with the process exit code it maps to.
pub struct CliError {
    pub code: u8,
    pub source: anyhow::Error,
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

fn user(e: impl Into<anyhow::Error>) -> CliError {
    CliError {
        code: 2,
        source: e.into(),
    }
}

fn internal(e: impl Into<anyhow::Error>) -> CliError {
    CliError {
        code: 1,
        source: e.into(),
    }
}

impl From<narlab_core::Error> for CliError {
    fn from(e: narlab_core::Error) -> Self {
        use narlab_core::Error as E;
        match e {
            E::Shape { .. } | E::Generation(_) => internal(e),
            _ => user(e),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        internal(e)
    }
}

fn parse<T: std::str::FromStr<Err = narlab_core::Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(user)
}

fn print_json<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(internal)?;
    println!("{text}");
    if let Some(path) = out {
        fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))
            .map_err(user)?;
    }
    Ok(())
}

fn tasks_arg(s: &str) -> CliResult<Vec<TaskId>> {
    if s == "all" {
        Ok(TaskId::ALL.to_vec())
    } else {
        s.split(',').map(|t| parse(t.trim())).collect()
    }
}

fn apply_dataset_overrides(d: &mut DatasetConfig, a: &GenArgs) -> CliResult {
    if let Some(v) = a.train_size {
        d.train_size = v;
    }
    if let Some(v) = a.valtest_size {
        d.valtest_size = v;
    }
    if let Some(v) = a.train_len {
        d.train_len = v;
    }
    if let Some(v) = a.test_len {
        d.test_len = v;
    }
    if let Some(k) = a.k {
        d.generator = GraphGenerator::KRegular;
        d.k_train = Some(k);
        d.k_test = Some(a.k_test.unwrap_or(k));
    } else if let Some(k) = a.k_test {
        d.k_test = Some(k);
    }
    if let Some(e) = &a.encoding {
        d.encoding = parse(e)?;
    }
    d.validate()?;
    Ok(())
}

pub fn gen(a: &GenArgs, argv: &[String]) -> CliResult {
    let preset: Preset = parse(&a.preset)?;
    let tasks = tasks_arg(&a.task)?;
    let mut cfg = DatasetConfig::preset(preset);
    cfg.tasks = tasks.clone();
    apply_dataset_overrides(&mut cfg, a)?;
    let mpath = a.out.join(preset.name()).join("manifest.json");
    let mut manifest = RunManifest::new(argv, serde_json::to_value(&cfg).map_err(internal)?, a.seed);
    manifest.write(&mpath).map_err(user)?;
    for task in tasks {
        for split in Split::ALL {
            let insts = generate_split(&cfg, task, split, a.seed)?;
            let path = shard_path(&a.out, preset.name(), task, split);
            write_shard(&insts, &path)?;
            let n = insts.first().map(|i| i.n()).unwrap_or(0);
            println!("{task} {}: {} instances, n={n} -> {}", split.name(), insts.len(), path.display());
            manifest.artifacts.push(path);
        }
    }
    manifest.finish(&mpath).map_err(internal)?;
    Ok(())
}

fn resolve_train_config(a: &TrainArgs) -> CliResult<TrainConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(user)?;
            serde_json::from_str::<TrainConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(user)?
        }
        None => {
            let task = a
                .task
                .as_deref()
                .ok_or_else(|| user(anyhow!("--task is required without --config")))?;
            let processor: ProcessorConfig = parse(a.processor.as_deref().unwrap_or("mpnn"))?;
            TrainConfig::full_scale(parse(task)?, processor)
        }
    };
    if a.config.is_some() {
        if let Some(t) = &a.task {
            cfg.task = parse(t)?;
        }
        if let Some(p) = &a.processor {
            cfg.processor = parse(p)?;
            cfg.batch_size = cfg.processor.default_batch_size();
        }
    }
    if let Some(e) = &a.encoding {
        cfg.encoding = parse::<PositionEncoding>(e)?;
    }
    if let Some(p) = &a.preset {
        cfg.dataset = DatasetConfig::preset(parse(p)?);
    }
    if a.desk_scale {
        cfg.apply_desk_scale();
    }
    if let Some(v) = a.steps {
        cfg.steps = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.clip {
        cfg.clip = v;
    }
    if let Some(v) = a.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = a.processor_steps {
        cfg.processor_steps = v;
    }
    if let Some(v) = a.eval_every {
        cfg.eval_every = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    cfg.dataset.encoding = cfg.encoding;
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(a: &TrainArgs, argv: &[String]) -> CliResult {
    let cfg = resolve_train_config(a)?;
    let run_id = a.run_id.clone().unwrap_or_else(|| {
        format!("{}-{}-{}-s{}", cfg.task, cfg.processor, cfg.encoding, cfg.seed)
    });
    let run_dir = a.runs.join(&run_id);
    let mpath = run_dir.join("manifest.json");
    let mut manifest = RunManifest::new(argv, serde_json::to_value(&cfg).map_err(internal)?, cfg.seed);
    manifest.write(&mpath).map_err(user)?;
    if a.dry_run {
        let cpath = run_dir.join("config.json");
        let text = serde_json::to_string_pretty(&cfg).map_err(internal)?;
        fs::write(&cpath, text).with_context(|| format!("writing {}", cpath.display())).map_err(user)?;
        println!("{}", cpath.display());
        return Ok(());
    }

    let data = match &a.data {
        Some(root) => TrainData::load(root, cfg.dataset.name.name(), cfg.task)?,
        None => TrainData::generate(&cfg)?,
    };
    let resume = match &a.resume {
        Some(p) => Some(Checkpoint::load(p)?),
        None => None,
    };
    let opts = RunOptions {
        run_dir: Some(run_dir.clone()),
        resume,
        stop_at: None,
    };
    let out = run_training(&cfg, &data, &opts)?;
    let sel = out.selected_point();
    manifest.artifacts.push(run_dir.join("metrics.csv"));
    manifest.artifacts.push(run_dir.join("config.json"));
    manifest.artifacts.extend(out.evals.iter().filter_map(|e| e.checkpoint.clone()));
    manifest.finish(&mpath).map_err(internal)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        run_dir: &'a Path,
        selected_step: u64,
        selected_checkpoint: Option<&'a PathBuf>,
        val_node_acc: f64,
        test_node_acc: f64,
    }
    print_json(
        &Summary {
            run_dir: &run_dir,
            selected_step: sel.step,
            selected_checkpoint: sel.checkpoint.as_ref(),
            val_node_acc: sel.val.node_acc,
            test_node_acc: sel.test.node_acc,
        },
        None,
    )
}

/// Loads a checkpoint together with the `model.json` written next to it.
pub fn load_model(ckpt: &Path) -> CliResult<(Model, String)> {
    let dir = ckpt.parent().unwrap_or(Path::new("."));
    let mpath = dir.join("model.json");
    let text = fs::read_to_string(&mpath)
        .with_context(|| format!("reading {}", mpath.display()))
        .map_err(user)?;
    let config: ModelConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", mpath.display()))
        .map_err(user)?;
    let ck = Checkpoint::load(ckpt)?;
    if ck.config_hash != config.architecture_hash() {
        return Err(user(anyhow!(
            "{} does not match the architecture in {}",
            ckpt.display(),
            mpath.display()
        )));
    }
    let params = ParamSet::from_parts(ck.names, ck.params)?;
    Ok((Model::from_params(config, params)?, ck.config_hash))
}

pub fn eval(a: &EvalArgs) -> CliResult {
    let insts = read_shard(&a.shard)?;
    let scores = if a.oracle {
        evaluate_oracle(&insts)?
    } else {
        let ckpt = a.ckpt.as_ref().ok_or_else(|| user(anyhow!("--ckpt is required")))?;
        let (model, _) = load_model(ckpt)?;
        evaluate(&model.config, &model.params, &insts, EVAL_BATCH)?
    };
    print_json(&scores, a.out.as_deref())
}

pub fn interp(a: &InterpArgs) -> CliResult {
    let (ma, ha) = load_model(&a.ckpt_a)?;
    let (mb, hb) = load_model(&a.ckpt_b)?;
    if ha != hb {
        return Err(user(anyhow!(
            "config hash mismatch: {} has {ha}, {} has {hb}",
            a.ckpt_a.display(),
            a.ckpt_b.display()
        )));
    }
    let id = read_shard(&a.id_shard)?;
    let ood = read_shard(&a.ood_shard)?;
    let grid = uniform_grid(a.grid);
    let points = interpolate(&ma.config, &ma.params, &mb.params, &grid, &id, &ood, EVAL_BATCH)?;
    println!("lambda,id_acc,ood_acc");
    for p in &points {
        println!("{},{},{}", p.lambda, p.id_acc, p.ood_acc);
    }
    if let Some(out) = &a.out {
        write_interpolation_csv(out, &points)?;
    }
    Ok(())
}

pub fn bridge_probe(a: &ProbeArgs) -> CliResult {
    let pairs = generate_pairs(a.pairs, a.seed)?;
    let report = if a.random_baseline {
        let mut p = RandomPredictor(Rng::new(a.seed ^ 0x5eed));
        bridge_pair_probe(&mut p, &pairs, PositionEncoding::Scalar)?
    } else {
        let ckpt = a.ckpt.as_ref().ok_or_else(|| user(anyhow!("--ckpt is required")))?;
        let (model, _) = load_model(ckpt)?;
        if model.config.task != TaskId::Bridges {
            return Err(user(anyhow!("bridge probe needs a bridges checkpoint, got {}", model.config.task)));
        }
        let mut p = ModelPredictor {
            config: &model.config,
            params: &model.params,
            batch_size: EVAL_BATCH,
        };
        bridge_pair_probe(&mut p, &pairs, model.config.encoding)?
    };
    print_json(&report, a.out.as_deref())
}

pub fn fixtures(a: &FixtureArgs) -> CliResult {
    match &a.action {
        FixtureAction::Generate { out, per_task, seed } => {
            let n = generate_fixtures(out, *per_task, *seed)?;
            info!("wrote {n} fixtures to {}", out.display());
            Ok(())
        }
        FixtureAction::Verify { dir } => {
            let report = verify_fixtures(dir)?;
            print_json(&report, None)?;
            if report.checked == 0 {
                return Err(user(anyhow!("no fixtures under {}", dir.display())));
            }
            if !report.ok() {
                return Err(internal(anyhow!("{} fixture mismatches", report.mismatches.len())));
            }
            Ok(())
        }
    }
}
