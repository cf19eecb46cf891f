use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vfhand::error::PolicyError;
use vfhand::eval::*;
use vfhand::geometry::{builtin_shape, StepStatus};
use vfhand::rl::{Agent, Td3Config};
use vfhand::task::*;
use vfhand::{Action, Pose};

fn cube() -> Arc<vfhand::Shape> {
    Arc::new(builtin_shape("cube").unwrap())
}

/// Never moves the fingers.
struct Still(ObsMode);

impl Controller for Still {
    fn obs_mode(&self) -> ObsMode {
        self.0
    }

    fn act(&mut self, _: &Observation, _: &mut ChaCha8Rng) -> Result<Action, PolicyError> {
        Ok(Action::from_degrees(0, 0.0))
    }
}

/// Random actions drawn from the policy stream, so paired runs only agree
/// when the streams do.
struct Noisy;

impl Controller for Noisy {
    fn obs_mode(&self) -> ObsMode {
        ObsMode::Il
    }

    fn act(&mut self, _: &Observation, rng: &mut ChaCha8Rng) -> Result<Action, PolicyError> {
        Ok(Action::from_degrees(rng.random_range(0..6), rng.random_range(0.0..10.0)))
    }
}

fn record(seed: u64, trial: u64, success: bool) -> EpisodeRecord {
    let p = Pose::new(0.0, 0.06, 0.0);
    EpisodeRecord {
        seed,
        trial,
        success,
        steps: 3,
        status: StepStatus::Ok,
        start: p,
        final_pose: p,
        goal: Goal::new(p),
        pos_err_mm: 1.0 + trial as f64,
        rot_err_deg: 0.5 * seed as f64,
    }
}

#[test]
fn goal_at_start_with_a_still_controller_scores_full_marks() {
    // the stub "teleports" by being handed goals equal to the start pose
    let exp = ExperimentConfig::default();
    let task = exp.task(&TaskConfig::default());
    let mut records = Vec::new();
    for &s in &exp.seeds {
        let mut env = Env::new(task.clone(), cube(), ObsMode::Il, eval_env_seed(s));
        for t in 0..exp.trials as u64 {
            let mut init = env.prepare_episode(t).unwrap();
            init.goal = Goal::new(init.state.object_pose);
            let mut rng = trial_rng(s, t);
            records.push(record_episode(&mut env, init, &mut Still(ObsMode::Il), &mut rng, s, t).unwrap());
        }
    }
    let m = Metrics::from_records(records);
    assert_eq!(m.success_mean, 100.0);
    assert_eq!(m.success_std, 0.0);
    assert_eq!(m.pos_err_mm.unwrap().0, 0.0);
    assert_eq!(m.rot_err_deg.unwrap().0, 0.0);
}

#[test]
fn still_controller_never_succeeds_and_leaves_errors_empty() {
    let exp = ExperimentConfig::default();
    let task = exp.task(&TaskConfig::default());
    let mut records = Vec::new();
    for &s in &exp.seeds {
        let mut env = Env::new(task.clone(), cube(), ObsMode::Rl, eval_env_seed(s));
        for t in 0..exp.trials as u64 {
            let mut init = env.prepare_episode(t).unwrap();
            let p = init.state.object_pose;
            init.goal = Goal::new(Pose::new(p.x + 0.01, p.y, p.theta));
            records.push(record_episode(&mut env, init, &mut Still(ObsMode::Rl), &mut trial_rng(s, t), s, t).unwrap());
        }
    }
    let m = Metrics::from_records(records);
    assert_eq!(m.success_mean, 0.0);
    assert!(m.pos_err_mm.is_none() && m.rot_err_deg.is_none());
    assert_eq!(m.episodes.len(), 30);

    // with sampled goals the still controller only wins where the start already qualifies
    let m = run_eval(&exp, &mut Still(ObsMode::Rl), &TaskConfig::default(), &cube()).unwrap();
    for e in &m.episodes {
        assert_eq!(e.final_pose, e.start);
        assert_eq!(e.success, e.pos_err_mm < 5.0 && e.rot_err_deg < 0.1f64.to_degrees());
    }
}

#[test]
fn seed_level_aggregation() {
    let mut recs = Vec::new();
    for (s, k) in [(0u64, 8), (1, 7), (2, 6)] {
        for t in 0..10 {
            recs.push(record(s, t, t < k));
        }
    }
    let m = Metrics::from_records(recs);
    assert!((m.success_mean - 70.0).abs() < 1e-12);
    assert!((m.success_std - 10.0).abs() < 1e-12);
    assert_eq!(m.per_seed_success, vec![80.0, 70.0, 60.0]);
    // errors over the 21 successes only
    let want = (0..3).map(|s| (0..[8, 7, 6][s]).map(|t| 1.0 + t as f64).sum::<f64>()).sum::<f64>() / 21.0;
    assert!((m.pos_err_mm.unwrap().0 - want).abs() < 1e-12);
}

#[test]
fn metrics_are_a_function_of_the_records() {
    let exp = ExperimentConfig { trials: 6, ..Default::default() };
    let m = run_eval(&exp, &mut Noisy, &TaskConfig::default(), &cube()).unwrap();
    assert_eq!(Metrics::from_records(m.episodes.clone()), m);
    let again = run_eval(&exp, &mut Noisy, &TaskConfig::default(), &cube()).unwrap();
    assert_eq!(again, m);
}

#[test]
fn paired_runs_share_starts_and_goals() {
    let exp = ExperimentConfig { trials: 5, ..Default::default() };
    let a = run_eval(&exp, &mut Noisy, &TaskConfig::default(), &cube()).unwrap();
    let b = run_eval(&exp, &mut Still(ObsMode::Rl), &TaskConfig::default(), &cube()).unwrap();
    for (x, y) in a.episodes.iter().zip(&b.episodes) {
        assert_eq!((x.start, x.goal), (y.start, y.goal));
    }
}

#[test]
fn export_matches_run_eval_and_parses() {
    let dir = tempfile::tempdir().unwrap();
    let exp = ExperimentConfig { trials: 4, seeds: vec![3], ..Default::default() };
    let base = TaskConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = Td3Config { hidden: vec![16, 16], ..Default::default() };
    let mut actor = Agent::new(cfg, &mut rng).unwrap().policy;
    let m = run_eval(&exp, &mut actor, &base, &cube()).unwrap();
    let n = run_eval(&exp, &mut Noisy, &base, &cube()).unwrap();
    for (ctrl, metrics) in [(&mut actor as &mut dyn Controller, &m), (&mut Noisy, &n)] {
        for ep in &metrics.episodes {
            let path = dir.path().join(format!("t{}.csv", ep.trial));
            let rows = export_trajectory(ctrl, &exp, &base, &cube(), 3, ep.trial, &path).unwrap();
            assert_eq!(rows, ep.steps as usize + 1);
            let parsed = parse_trajectory_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
            assert_eq!(parsed.len(), rows);
            let last = &parsed[rows - 1];
            let pose: Vec<f64> = last[5..8].iter().map(|v| v.parse().unwrap()).collect();
            assert_eq!(pose, vec![ep.final_pose.x, ep.final_pose.y, ep.final_pose.theta]);
            assert_eq!(parsed[0][11], "start");
        }
    }
    assert!(parse_trajectory_csv("step,mode\n1,2\n").is_err());
    let bad = format!("{}\n1,2,3\n", TRAJECTORY_COLUMNS.join(","));
    assert!(parse_trajectory_csv(&bad).is_err());
}

#[test]
fn experiment_config_rejects_empty_protocols() {
    assert!(ExperimentConfig { trials: 0, ..Default::default() }.validate().is_err());
    assert!(ExperimentConfig { seeds: vec![], ..Default::default() }.validate().is_err());
    assert!(ExperimentConfig::default().validate().is_ok());
}

fn tiny_data() -> ExperimentData {
    use vfhand::demogen::*;
    let cfg = Td3Config { hidden: vec![16, 16], ..Default::default() };
    let policy = Agent::new(cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap().policy;
    let mut sets = Vec::new();
    for tag in [DomainTag::Sim, DomainTag::Real] {
        let task = TaskConfig { domain: DomainParams::new(tag.required_domain()), ..Default::default() };
        let cc = CollectConfig { seed: 5, explore: true, ..Default::default() };
        let (kept, _, _) = collect_demos(&policy, &task, &cube(), tag, 6, &cc).unwrap();
        let meta = DatasetMeta { shape: "cube".into(), domain: tag, generator: "test".into(), config_hash: 1 };
        sets.push(DemoDataset::new(meta, kept).unwrap());
    }
    let real = sets.pop().unwrap();
    ExperimentData::new(sets.pop().unwrap(), real).unwrap()
}

#[test]
fn ablation_table_shape_and_presets() {
    use vfhand::dpol::{CoTrainConfig, Preset};
    let mut data = tiny_data();
    let train = CoTrainConfig { epochs: 1.0, batch_size: 8, hidden: vec![8], diffusion_steps: 4, ..Default::default() };
    let exp = ExperimentConfig { trials: 2, seeds: vec![0], ..Default::default() };
    let amounts = [0, 2, 4, 6];
    let out = ablate_real_amount(&mut data, &amounts, &train, &exp, &TaskConfig::default(), &cube(), 1).unwrap();
    assert_eq!(out.rows.len(), amounts.len() * 2 - out.skipped.len());
    assert_eq!(out.skipped.len(), 1);
    assert_eq!((out.skipped[0].amount, out.skipped[0].variant), (0, Preset::RealOnly));
    // amount 0 co-training is the sim-only preset, so both share one cached policy
    assert!(data.cache.contains_key(&(Preset::SimOnly, 0)) && !data.cache.contains_key(&(Preset::Cotrain, 0)));
    let sim_only = data.policy(Preset::SimOnly, 0, &train, 1).unwrap();
    let m = run_eval(&exp, &mut sim_only.clone(), &TaskConfig::default(), &cube()).unwrap();
    assert_eq!(m, out.rows[0].metrics);
    assert!(ablate_real_amount(&mut data, &[7], &train, &exp, &TaskConfig::default(), &cube(), 1).is_err());

    let rows = compare_presets(&mut data, 4, &train, &exp, &TaskConfig::default(), &cube(), 1).unwrap();
    assert_eq!(rows.iter().map(|r| r.preset).collect::<Vec<_>>(), Preset::ALL.to_vec());
    for r in &rows {
        assert_eq!(r.metrics.episodes.len(), 2);
        assert_eq!(r.metrics.episodes[1].goal, rows[0].metrics.episodes[1].goal);
    }
}
