mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vfhand::action::max_delta;
use vfhand::geometry::builtin_shape;
use vfhand::rl::*;
use vfhand::task::*;

fn cube_env(seed: u64) -> Env {
    let task = TaskConfig { domain: DomainParams::new(DomainKind::RandomizedSim), ..Default::default() };
    Env::new(task, Arc::new(builtin_shape("cube").unwrap()), ObsMode::Rl, seed)
}

fn small_cfg() -> Td3Config {
    Td3Config { hidden: vec![12, 12], batch_size: 16, buffer_capacity: 1000, ..Default::default() }
}

fn filled_buffer(n_episodes: usize, seed: u64) -> ReplayBuffer {
    let mut env = cube_env(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = ReplayBuffer::new(1000);
    for _ in 0..n_episodes {
        for t in common::random_episode(&mut env, &mut rng) {
            buf.push(t);
        }
    }
    buf
}

#[test]
fn her_with_zero_copies_is_identity() {
    let mut env = cube_env(1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let task = env.config().clone();
    for _ in 0..20 {
        let ep = common::random_episode(&mut env, &mut rng);
        assert_eq!(her_relabel(&ep, 0, &mut rng, &task), ep);
    }
}

#[test]
fn relabelled_copies_keep_observations_and_recompute_rewards() {
    let mut env = cube_env(2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let task = env.config().clone();
    let goal_slots = idx::GOAL..OBS_DIM;
    let mut copies = 0;
    for _ in 0..100 {
        let ep = common::random_episode(&mut env, &mut rng);
        let out = her_relabel(&ep, 4, &mut rng, &task);
        assert_eq!(out.len(), ep.len() * 5);
        for (i, r) in out[ep.len()..].iter().enumerate() {
            let t = &ep[i / 4];
            assert_eq!(r.action, t.action);
            assert_eq!(r.achieved, t.achieved);
            for j in 0..goal_slots.start {
                assert_eq!(r.obs.0[j], t.obs.0[j]);
                assert_eq!(r.next_obs.0[j], t.next_obs.0[j]);
            }
            // the new goal is an achieved pose of this or a later step
            assert!(ep[i / 4..].iter().any(|u| u.achieved == r.goal.pose));
            let want = reward(&t.achieved, t.status, &r.goal, &task.hand, &task.reward);
            assert_eq!(r.reward, want);
            assert_eq!(r.done, !t.status.is_ok() || is_success(&t.achieved, &r.goal, &task.reward));
            let fresh = observe(
                [r.next_obs.0[idx::Q], r.next_obs.0[idx::Q + 1]],
                &t.next_obs_pose,
                &r.goal,
                None,
                None,
                ObsMode::Rl,
            );
            for j in goal_slots.clone() {
                assert!((fresh.0[j] - r.next_obs.0[j]).abs() < 1e-12);
            }
            copies += 1;
        }
    }
    assert!(copies > 400);
}

#[test]
fn relabelling_with_own_outcome_succeeds() {
    let mut env = cube_env(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let task = env.config().clone();
    let mut checked = 0;
    for _ in 0..600 {
        let ep = common::random_episode(&mut env, &mut rng);
        let last = ep.last().unwrap();
        if !last.status.is_ok() {
            continue;
        }
        // k copies of the final step can only draw its own achieved pose
        let out = her_relabel(std::slice::from_ref(last), 3, &mut rng, &task);
        for r in &out[1..] {
            assert_eq!(pose_errors(&r.achieved, &r.goal, &task.reward), (0.0, 0.0));
            assert!(is_success(&r.achieved, &r.goal, &task.reward));
            assert!(r.done);
            assert_eq!(r.reward, task.reward.c1);
        }
        checked += 1;
    }
    assert!(checked > 30, "{checked}");
}

#[test]
fn terminal_targets_equal_rewards() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let agent = Agent::new(small_cfg(), &mut rng).unwrap();
    let mut batch = filled_buffer(20, 4).sample(32, &mut rng);
    batch.dones.iter_mut().for_each(|d| *d = true);
    assert_eq!(agent.compute_targets(&batch, &mut rng), batch.rewards);
}

/// Target values recomputed by hand: greedy target action without
/// smoothing noise, naive forward passes of both target critics.
#[test]
fn targets_match_hand_computation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = Td3Config { target_noise: 0.0, gamma: 0.98, ..small_cfg() };
    let agent = Agent::new(cfg, &mut rng).unwrap();
    let batch = filled_buffer(20, 5).sample(32, &mut rng);
    let got = agent.compute_targets(&batch, &mut rng);
    for i in 0..batch.size {
        // normalizer is still at its identity state apart from the clip
        let o: Vec<f64> = batch.next_obs[i * OBS_DIM..(i + 1) * OBS_DIM].iter().map(|v| v.clamp(-5.0, 5.0)).collect();
        let (a, _) = common::naive_forward(&agent.actor_target, &o);
        let mode = (1..7).max_by(|&x, &y| a[x].partial_cmp(&a[y]).unwrap()).unwrap() - 1;
        let delta = 0.5 * (a[0].tanh() + 1.0) * max_delta::<f64>();
        let mut x = o.clone();
        x.extend((0..6).map(|m| if m == mode { 1.0 } else { 0.0 }));
        x.push(2.0 * delta / max_delta::<f64>() - 1.0);
        let q1 = common::naive_forward(&agent.critic_targets[0], &x).0[0];
        let q2 = common::naive_forward(&agent.critic_targets[1], &x).0[0];
        let want = if batch.dones[i] { batch.rewards[i] } else { batch.rewards[i] + 0.98 * q1.min(q2) };
        assert!((got[i] - want).abs() < 1e-10, "{} vs {}", got[i], want);
    }
}

#[test]
fn critic_order_does_not_change_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let agent = Agent::new(small_cfg(), &mut rng).unwrap();
    let mut swapped = agent.clone();
    swapped.critic_targets.swap(0, 1);
    let batch = filled_buffer(20, 6).sample(64, &mut rng);
    let a = agent.compute_targets(&batch, &mut ChaCha8Rng::seed_from_u64(9));
    let b = swapped.compute_targets(&batch, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(a, b);
}

#[test]
fn target_networks_are_polyak_averaged() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = Td3Config { policy_delay: 1, tau: 0.05, ..small_cfg() };
    let mut agent = Agent::new(cfg, &mut rng).unwrap();
    let buf = filled_buffer(20, 7);
    // decouple targets from the online nets first
    for _ in 0..5 {
        agent.update(&buf.sample(16, &mut rng), &mut rng);
    }
    let old_actor = agent.actor_target.params().to_vec();
    let old_critics: Vec<Vec<f64>> = agent.critic_targets.iter().map(|c| c.params().to_vec()).collect();
    let stats = agent.update(&buf.sample(16, &mut rng), &mut rng);
    assert!(stats.actor_loss.is_some());
    let check = |old: &[f64], new_src: &[f64], target: &[f64]| {
        for i in 0..old.len() {
            let want = 0.05 * new_src[i] + 0.95 * old[i];
            assert!((target[i] - want).abs() <= 1e-15 * want.abs().max(1.0));
        }
    };
    check(&old_actor, agent.policy.actor.params(), agent.actor_target.params());
    for c in 0..2 {
        check(&old_critics[c], agent.critics[c].params(), agent.critic_targets[c].params());
    }
}

#[test]
fn actor_update_is_delayed() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut agent = Agent::new(Td3Config { policy_delay: 3, ..small_cfg() }, &mut rng).unwrap();
    let buf = filled_buffer(10, 8);
    let flags: Vec<bool> = (0..6).map(|_| agent.update(&buf.sample(16, &mut rng), &mut rng).actor_loss.is_some()).collect();
    assert_eq!(flags, [false, false, true, false, false, true]);
}

#[test]
fn checkpoint_round_trip_preserves_actions() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut agent = Agent::new(small_cfg(), &mut rng).unwrap();
    let buf = filled_buffer(10, 10);
    for t in buf.iter() {
        agent.policy.norm.update(&t.obs.0);
    }
    let back = ActorPolicy::from_checkpoint(
        &vfhand::neuro::Checkpoint::from_bytes(&agent.policy.to_checkpoint("{}".into()).to_bytes()).unwrap(),
    )
    .unwrap();
    assert_eq!(back, agent.policy);
    assert!(ActorPolicy::from_checkpoint(&vfhand::neuro::Checkpoint::new("other")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_action_is_in_range(seed in any::<u64>(), scale in 0.0f64..50.0, explore in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agent = Agent::new(small_cfg(), &mut rng).unwrap();
        let obs: Vec<Observation> = (0..32)
            .map(|i| Observation(std::array::from_fn(|j| scale * (((i * 31 + j * 17) % 23) as f64 / 11.0 - 1.0))))
            .collect();
        for a in agent.policy.act(&obs, explore.then_some(&agent.cfg), &mut rng) {
            prop_assert!(a.validate().is_ok());
            prop_assert!(a.delta >= 0.0 && a.delta <= max_delta::<f64>());
        }
    }
}
