use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use serde_json::{json, Value};
use vfhand::demogen::{collect_demos, config_hash, CollectConfig, DatasetMeta, DemoDataset, DomainTag};
use vfhand::dpol::{cotrain, DiffusionPolicy, Preset};
use vfhand::error::{DataError, FormatError, GeometryError, NeuroError, PolicyError, TaskError};
use vfhand::eval::{
    ablate_real_amount, compare_presets, export_trajectory, run_eval, Controller, ExperimentData, Metrics, RunManifest,
};
use vfhand::geometry::builtin_shape;
use vfhand::neuro::Checkpoint;
use vfhand::rl::{train_exploration_policy, ActorPolicy, LearningRecord};
use vfhand::Shape;

use crate::config::RunConfig;
use crate::{Cli, Command};

pub fn verb(c: &Command) -> &'static str {
    match c {
        Command::TrainRl(_) => "train-rl",
        Command::Collect(_) => "collect",
        Command::TrainDp(_) => "train-dp",
        Command::Eval(_) => "eval",
        Command::AblateReal(_) => "ablate-real",
        Command::ComparePresets(_) => "compare-presets",
        Command::ExportTraj(_) => "export-traj",
    }
}

/// One JSON object on stderr describing the failure.
pub fn report_error(kind: &str, message: &str, command: Option<&str>) {
    let rec = json!({ "error": { "kind": kind, "command": command, "message": message } });
    eprintln!("{rec}");
}

/// Kind of the innermost recognised cause.
pub fn classify(e: &anyhow::Error) -> &'static str {
    let chain: Vec<_> = e.chain().collect();
    for cause in chain.into_iter().rev() {
        let io = matches!(cause.downcast_ref::<NeuroError>(), Some(NeuroError::Io(_)))
            || matches!(cause.downcast_ref::<DataError>(), Some(DataError::Io(_)));
        if io || cause.is::<std::io::Error>() {
            return "io";
        }
        if cause.is::<FormatError>() || cause.is::<DataError>() {
            return "data";
        }
        if cause.is::<NeuroError>() {
            return "checkpoint";
        }
        if cause.is::<GeometryError>() {
            return "shape";
        }
        if cause.is::<TaskError>() || cause.is::<PolicyError>() {
            return "config";
        }
        if cause.is::<toml::de::Error>() || cause.is::<serde_json::Error>() {
            return "config";
        }
    }
    "failure"
}

struct Run {
    cfg: RunConfig,
    shape: Arc<Shape>,
    out: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.manifest.artifacts.push(name.to_string());
        Ok(p)
    }

    fn finish(mut self, results: Value) -> anyhow::Result<()> {
        self.manifest.finish(results.clone());
        let p = self.path("manifest.json");
        self.manifest.write(&p).with_context(|| format!("writing {}", p.display()))?;
        println!("{}", json!({ "command": self.manifest.command, "out": self.out, "results": results }));
        Ok(())
    }
}

pub fn run(cli: Cli, argv: Vec<String>) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let name = verb(&cli.command);
    if let Command::TrainRl(a) = &cli.command {
        if let Some(n) = a.steps {
            cfg.rl.total_steps = n;
        }
        if a.no_her {
            cfg.rl.td3.her_k = 0;
        }
    }
    cfg.validate()?;
    let shape = Arc::new(builtin_shape(&cfg.shape)?);
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let manifest = RunManifest::start(name, argv, serde_json::to_value(&cfg)?, vec![cfg.seed]);
    let mut run = Run { cfg, shape, out: cli.out, manifest };
    let results = match cli.command {
        Command::TrainRl(_) => train_rl(&mut run)?,
        Command::Collect(a) => collect(&mut run, &a.policy, &a.domain, a.count)?,
        Command::TrainDp(a) => train_dp(&mut run, &a.data.sim, &a.data.real, &a.preset)?,
        Command::Eval(a) => eval(&mut run, &a.policy)?,
        Command::AblateReal(a) => ablate(&mut run, &a.data.sim, &a.data.real, &a.amounts)?,
        Command::ComparePresets(a) => compare(&mut run, &a.data.sim, &a.data.real, a.real_amount)?,
        Command::ExportTraj(a) => export(&mut run, &a.policy, a.eval_seed, a.trial)?,
    };
    run.finish(results)
}

fn train_rl(run: &mut Run) -> anyhow::Result<Value> {
    let task = run.cfg.task_for(DomainTag::Sim);
    let mut log = |r: &LearningRecord| {
        eprintln!("step {:>7}  train {:.2}  eval {:.2}  ({:.0}s)", r.env_steps, r.train_success, r.eval_success, r.wall_secs)
    };
    let rep = train_exploration_policy(&task, &run.shape, &run.cfg.rl, run.cfg.seed, Some(&mut log))?;
    let meta = json!({ "shape": run.cfg.shape, "seed": run.cfg.seed, "best_at_step": rep.best_at_step }).to_string();
    let best = rep.best.to_checkpoint(meta.clone()).to_bytes();
    run.write("actor.ck", best)?;
    run.write("actor_last.ck", rep.last.to_checkpoint(meta).to_bytes())?;
    run.write("learning_curve.csv", rep.curve_csv())?;
    Ok(json!({
        "best_eval": rep.best_eval,
        "best_at_step": rep.best_at_step,
        "env_steps": rep.env_steps,
        "episodes": rep.episodes,
    }))
}

fn load_actor(path: &Path) -> anyhow::Result<ActorPolicy> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(ActorPolicy::from_checkpoint(&ck)?)
}

fn collect(run: &mut Run, policy: &Path, domain: &str, count: usize) -> anyhow::Result<Value> {
    let tag = match domain {
        "sim" => DomainTag::Sim,
        "real" => DomainTag::Real,
        other => bail!("unknown domain {other:?}; expected sim or real"),
    };
    let actor = load_actor(policy)?;
    let cc = CollectConfig { seed: run.cfg.seed, ..run.cfg.collect.clone() };
    let task = run.cfg.task_for(tag);
    let (kept, summary, report) = collect_demos(&actor, &task, &run.shape, tag, count, &cc)?;
    let meta = DatasetMeta {
        shape: run.cfg.shape.clone(),
        domain: tag,
        generator: format!("{}", policy.display()),
        config_hash: config_hash(&run.manifest.config.to_string()),
    };
    let ds = DemoDataset::new(meta, kept)?;
    let name = format!("demos_{}.vfd", tag.name());
    run.write(&name, ds.to_bytes())?;
    Ok(json!({
        "dataset": name,
        "trajectories": ds.len(),
        "pairs": ds.num_pairs(),
        "collected": summary.collected,
        "acceptance_rate": summary.acceptance_rate,
        "rollout_failures": report.failures.len(),
    }))
}

fn load_data(sim: &Path, real: &Path) -> anyhow::Result<ExperimentData> {
    let load = |p: &Path| DemoDataset::load(p).with_context(|| format!("loading {}", p.display()));
    let (sim, real) = (load(sim)?, load(real)?);
    if sim.meta.domain != DomainTag::Sim || real.meta.domain != DomainTag::Real {
        bail!("--sim must hold sim demonstrations and --real real ones");
    }
    Ok(ExperimentData::new(sim, real)?)
}

fn parse_preset(s: &str) -> anyhow::Result<Preset> {
    Preset::parse(s).with_context(|| format!("unknown preset {s:?}; expected cotrain, simonly, realonly or finetune"))
}

fn train_dp(run: &mut Run, sim: &Path, real: &Path, preset: &str) -> anyhow::Result<Value> {
    let preset = parse_preset(preset)?;
    let data = load_data(sim, real)?;
    let mut log = |r: &vfhand::dpol::LossRecord| eprintln!("step {:>6}  loss {:.4}  sim {:.2}  ({:.0}s)", r.step, r.loss, r.sim_fraction, r.wall_secs);
    let rep = cotrain(&data.sim, &data.real, &data.stats, preset, &run.cfg.cotrain, run.cfg.seed, Some(&mut log))?;
    let meta = json!({ "preset": preset.name(), "seed": run.cfg.seed, "steps": rep.steps }).to_string();
    let name = format!("policy_{}.ck", preset.name());
    run.write(&name, rep.policy.to_checkpoint(meta).to_bytes())?;
    let mut csv = String::from("step,loss,sim_fraction,lr,wall_secs\n");
    for r in &rep.curve {
        csv.push_str(&format!("{},{},{},{},{}\n", r.step, r.loss, r.sim_fraction, r.lr, r.wall_secs));
    }
    run.write(&format!("loss_{}.csv", preset.name()), csv)?;
    Ok(json!({
        "checkpoint": name,
        "preset": preset.name(),
        "steps": rep.steps,
        "final_loss": rep.curve.last().map(|r| r.loss),
        "sim_fraction": rep.sim_elements as f64 / rep.total_elements.max(1) as f64,
    }))
}

fn load_controller(path: &Path) -> anyhow::Result<Box<dyn Controller>> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    if ck.kind == ActorPolicy::KIND {
        Ok(Box::new(ActorPolicy::from_checkpoint(&ck)?))
    } else {
        Ok(Box::new(DiffusionPolicy::from_checkpoint(&ck)?))
    }
}

fn metrics_json(m: &Metrics) -> Value {
    json!({
        "success_mean": m.success_mean,
        "success_std": m.success_std,
        "per_seed_success": m.per_seed_success,
        "pos_err_mm": m.pos_err_mm,
        "rot_err_deg": m.rot_err_deg,
    })
}

fn episodes_csv(rows: &[(String, &Metrics)]) -> String {
    let mut s = String::from("run,seed,trial,success,steps,status,start_x,start_y,start_theta,x,y,theta,goal_x,goal_y,goal_theta,pos_err_mm,rot_err_deg\n");
    for (label, m) in rows {
        for e in &m.episodes {
            let (a, f, g) = (e.start, e.final_pose, e.goal.pose);
            s.push_str(&format!(
                "{label},{},{},{},{},{:?},{},{},{},{},{},{},{},{},{},{},{}\n",
                e.seed, e.trial, e.success, e.steps, e.status, a.x, a.y, a.theta, f.x, f.y, f.theta, g.x, g.y, g.theta, e.pos_err_mm, e.rot_err_deg
            ));
        }
    }
    s
}

fn eval(run: &mut Run, policy: &Path) -> anyhow::Result<Value> {
    let mut ctrl = load_controller(policy)?;
    let m = run_eval(&run.cfg.eval, ctrl.as_mut(), &run.cfg.eval_task(), &run.shape)?;
    eprintln!("{}", m.summary());
    run.write("episodes.csv", episodes_csv(&[("eval".into(), &m)]))?;
    let res = metrics_json(&m);
    run.write("metrics.json", serde_json::to_string_pretty(&res)?)?;
    Ok(res)
}

fn ablate(run: &mut Run, sim: &Path, real: &Path, amounts: &[usize]) -> anyhow::Result<Value> {
    let mut data = load_data(sim, real)?;
    if let Some(&m) = amounts.iter().max() {
        if m > data.real.len() {
            bail!("ablation needs {m} real demonstrations, the dataset holds {}", data.real.len());
        }
    }
    let base = run.cfg.eval_task();
    let res = ablate_real_amount(&mut data, amounts, &run.cfg.cotrain, &run.cfg.eval, &base, &run.shape, run.cfg.seed)?;
    let rows: Vec<Value> = res
        .rows
        .iter()
        .map(|r| {
            eprintln!("{:>4} {:<9} {}", r.amount, r.variant.name(), r.metrics.summary());
            json!({ "amount": r.amount, "variant": r.variant.name(), "metrics": metrics_json(&r.metrics) })
        })
        .collect();
    let labelled: Vec<(String, &Metrics)> = res.rows.iter().map(|r| (format!("{}-{}", r.variant.name(), r.amount), &r.metrics)).collect();
    run.write("episodes.csv", episodes_csv(&labelled))?;
    let out = json!({ "rows": rows, "skipped": res.skipped });
    run.write("ablation.json", serde_json::to_string_pretty(&out)?)?;
    Ok(out)
}

fn compare(run: &mut Run, sim: &Path, real: &Path, amount: usize) -> anyhow::Result<Value> {
    let mut data = load_data(sim, real)?;
    let base = run.cfg.eval_task();
    let rows = compare_presets(&mut data, amount, &run.cfg.cotrain, &run.cfg.eval, &base, &run.shape, run.cfg.seed)?;
    let mut out = Vec::new();
    for r in &rows {
        eprintln!("{:<9} {}", r.preset.name(), r.metrics.summary());
        let policy = data.cache.get(&(r.preset, amount)).expect("trained policy is cached");
        let name = format!("policy_{}.ck", r.preset.name());
        let meta = json!({ "preset": r.preset.name(), "seed": run.cfg.seed, "real_amount": amount }).to_string();
        run.write(&name, policy.to_checkpoint(meta).to_bytes())?;
        out.push(json!({ "preset": r.preset.name(), "checkpoint": name, "metrics": metrics_json(&r.metrics) }));
    }
    let labelled: Vec<(String, &Metrics)> = rows.iter().map(|r| (r.preset.name().to_string(), &r.metrics)).collect();
    run.write("episodes.csv", episodes_csv(&labelled))?;
    let out = json!({ "real_amount": amount, "rows": out });
    run.write("presets.json", serde_json::to_string_pretty(&out)?)?;
    Ok(out)
}

fn export(run: &mut Run, policy: &Path, seed: u64, trial: u64) -> anyhow::Result<Value> {
    let mut ctrl = load_controller(policy)?;
    let name = format!("trajectory_s{seed}_t{trial}.csv");
    let path = run.path(&name);
    let rows = export_trajectory(ctrl.as_mut(), &run.cfg.eval, &run.cfg.eval_task(), &run.shape, seed, trial, &path)?;
    run.manifest.artifacts.push(name.clone());
    run.manifest.seeds = vec![seed];
    Ok(json!({ "file": name, "rows": rows }))
}
