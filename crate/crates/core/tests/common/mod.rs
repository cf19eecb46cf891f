#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vfhand::action::MAX_DELTA_DEG;
use vfhand::geometry::{apply_action, apply_action_traced, builtin_shape, Side, StepStatus, Substep, SHAPE_NAMES};
use vfhand::{Action, Hand, Pose, Shape, State};

#[derive(Debug, Default)]
pub struct BatteryReport {
    pub cases: usize,
    pub ok_outcomes: usize,
    pub slide_substeps: usize,
    pub pivot_substeps: usize,
    pub refinement_pairs: usize,
    pub max_slide_drift: f64,
    pub max_pivot_chord_err: f64,
    pub max_pivot_stick_err: f64,
    pub max_clearance: f64,
    pub max_refinement_err: f64,
    pub wrap_violations: usize,
    pub determinism_violations: usize,
    pub statuses: [usize; 5],
}

impl BatteryReport {
    pub fn passes(&self) -> bool {
        self.max_slide_drift < 1e-9
            && self.max_pivot_chord_err < 1e-9
            && self.max_pivot_stick_err < 1e-9
            && self.max_clearance < 1e-6
            && self.max_refinement_err < 1e-4
            && self.wrap_violations == 0
            && self.determinism_violations == 0
    }
}

pub fn shapes() -> Vec<Arc<Shape>> {
    SHAPE_NAMES.iter().map(|n| Arc::new(builtin_shape(n).unwrap())).collect()
}

/// A held state reached from a random placement by up to two random actions.
pub fn random_state(rng: &mut impl Rng, shape: &Arc<Shape>) -> State {
    loop {
        let pose = Pose::new(
            rng.random_range(-0.03..0.03),
            rng.random_range(0.02..0.10),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let Ok(mut state) = State::held(shape.clone(), Hand::default(), pose) else { continue };
        for _ in 0..rng.random_range(0..3) {
            let o = apply_action(&state, &random_action(rng)).unwrap();
            if o.status.is_ok() {
                state = o.new_state;
            }
        }
        return state;
    }
}

pub fn random_action(rng: &mut impl Rng) -> Action {
    Action::from_degrees(rng.random_range(0..6), rng.random_range(0.0..=MAX_DELTA_DEG))
}

fn wrapped(theta: f64) -> bool {
    theta > -std::f64::consts::PI && theta <= std::f64::consts::PI
}

/// Randomized invariant battery over all catalog shapes. Every
/// `refine_every`-th case is re-run with half the substep size.
pub fn sim_battery(n: usize, seed: u64, refine_every: usize) -> BatteryReport {
    let shapes = shapes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = BatteryReport::default();
    for case in 0..n {
        let shape = &shapes[case % shapes.len()];
        let state = random_state(&mut rng, shape);
        let action = random_action(&mut rng);
        let mut subs = Vec::new();
        let out = apply_action_traced(&state, &action, &mut |s| subs.push(s)).unwrap();
        rep.cases += 1;
        rep.statuses[out.status.code() as usize] += 1;

        for s in &subs {
            match s {
                Substep::Slide { before, after, .. } => {
                    rep.slide_substeps += 1;
                    let e = (before.position() - after.position()).norm().max(before.angle_error(after).abs());
                    rep.max_slide_drift = rep.max_slide_drift.max(e);
                }
                Substep::Pivot { anchors, q, pose } => {
                    rep.pivot_substeps += 1;
                    let hand = &state.params;
                    let mut finger = [vfhand::Vec2::zero(); 2];
                    for side in Side::BOTH {
                        let (b, s) = anchors[side.index()];
                        finger[side.index()] = hand.surface_point(side, q[side.index()], s);
                        let e = (finger[side.index()] - pose.transform(b)).norm();
                        rep.max_pivot_stick_err = rep.max_pivot_stick_err.max(e);
                    }
                    let chord = (anchors[0].0 - anchors[1].0).norm();
                    let e = ((finger[0] - finger[1]).norm() - chord).abs();
                    rep.max_pivot_chord_err = rep.max_pivot_chord_err.max(e);
                }
            }
        }

        let st = &out.new_state;
        if !wrapped(st.object_pose.theta) {
            rep.wrap_violations += 1;
        }
        if out.status == StepStatus::Ok {
            rep.ok_outcomes += 1;
            for side in Side::BOTH {
                rep.max_clearance = rep.max_clearance.max(st.clearance(side).abs());
            }
        }
        if apply_action(&state, &action).unwrap() != out {
            rep.determinism_violations += 1;
        }
        if refine_every > 0 && case % refine_every == 0 && out.status.is_ok() {
            let mut fine = state.clone();
            fine.params.max_substep = state.params.max_substep / 2.0;
            let o2 = apply_action(&fine, &action).unwrap();
            if o2.status.is_ok() {
                rep.refinement_pairs += 1;
                let a = &out.new_state.object_pose;
                let b = &o2.new_state.object_pose;
                let e = (a.position() - b.position()).norm().max(a.angle_error(b).abs());
                rep.max_refinement_err = rep.max_refinement_err.max(e);
            }
        }
    }
    rep
}

/// Independent forward pass returning every pre-activation, for kink
/// detection and as a cross-check of the library forward.
pub fn naive_forward(net: &vfhand::neuro::Mlp<f64>, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    use vfhand::neuro::Activation;
    let spec = net.spec();
    let mut cur = x.to_vec();
    let mut pre = Vec::new();
    for l in 0..spec.layers() {
        let (w, b) = net.layer(l);
        let (fi, fo) = (spec.widths[l], spec.widths[l + 1]);
        let mut z = b.to_vec();
        for i in 0..fi {
            for j in 0..fo {
                z[j] += cur[i] * w[i * fo + j];
            }
        }
        pre.push(z.clone());
        let act = if l + 1 == spec.layers() { spec.output } else { spec.hidden[l] };
        cur = match act {
            Activation::Identity => z,
            Activation::Relu => z.iter().map(|v| v.max(0.0)).collect(),
            Activation::Tanh => z.iter().map(|v| v.tanh()).collect(),
        };
    }
    (cur, pre)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_err: f64,
}

fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-7 {
        (a - n).abs() / 1e-7
    } else {
        (a - n).abs() / scale
    }
}

/// Central differences (h = 1e-5) of `L = sum_i c_i y_i(x)` against the
/// analytic parameter and input gradients. Inputs are redrawn until no ReLU
/// pre-activation lies within 1e-4 of its kink; a step of h moves any
/// pre-activation by about h times an activation, well inside that margin. At most `max_params`
/// parameters are checked (evenly strided).
pub fn grad_check(net: &vfhand::neuro::Mlp<f64>, rng: &mut impl Rng, max_params: usize) -> GradCheck {
    let spec = net.spec().clone();
    let (w_in, w_out) = (spec.input_width(), spec.output_width());
    let x = loop {
        let x: Vec<f64> = (0..w_in).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, pre) = naive_forward(net, &x);
        let relu = |l: usize| l < spec.hidden.len() && spec.hidden[l] == vfhand::neuro::Activation::Relu;
        if pre.iter().enumerate().filter(|(l, _)| relu(*l)).flat_map(|(_, z)| z).all(|z| z.abs() > 1e-4) {
            break x;
        }
    };
    let c: Vec<f64> = (0..w_out).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |net: &vfhand::neuro::Mlp<f64>, x: &[f64]| -> f64 {
        net.forward_slice(x, 1).unwrap().iter().zip(&c).map(|(y, c)| y * c).sum()
    };
    let cache = net.forward_cached(&x, 1).unwrap();
    let (naive_out, _) = naive_forward(net, &x);
    for (a, b) in cache.output().iter().zip(&naive_out) {
        assert!((a - b).abs() < 1e-12, "forward disagrees with the naive oracle");
    }
    let g = net.backward(&cache, &c).unwrap();
    let h = 1e-5;
    let mut rep = GradCheck::default();
    let n = net.params().len();
    let stride = n.div_ceil(max_params).max(1);
    let mut probe = net.clone();
    for i in (0..n).step_by(stride) {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let lp = loss(&probe, &x);
        probe.params_mut()[i] = orig - h;
        let lm = loss(&probe, &x);
        probe.params_mut()[i] = orig;
        rep.max_rel_err = rep.max_rel_err.max(rel_err(g.params[i], (lp - lm) / (2.0 * h)));
        rep.checked += 1;
    }
    for i in 0..w_in {
        let mut xp = x.clone();
        xp[i] += h;
        let mut xm = x.clone();
        xm[i] -= h;
        rep.max_rel_err = rep.max_rel_err.max(rel_err(g.input[i], (loss(net, &xp) - loss(net, &xm)) / (2.0 * h)));
        rep.checked += 1;
    }
    rep
}

/// One episode of uniformly random actions recorded as replay transitions.
pub fn random_episode(env: &mut vfhand::task::Env, rng: &mut impl Rng) -> Vec<vfhand::rl::Transition> {
    let mut obs = env.reset().unwrap();
    let mut pose = env.tracked_pose();
    let goal = env.goal().unwrap();
    let mut out = Vec::new();
    loop {
        let a = random_action(rng);
        let r = env.step(&a).unwrap();
        out.push(vfhand::rl::Transition {
            obs,
            action: a,
            reward: r.reward,
            next_obs: r.obs,
            done: r.terminal,
            achieved: r.info.pose,
            goal,
            status: r.info.status,
            obs_pose: pose,
            next_obs_pose: r.info.tracked,
        });
        obs = r.obs;
        pose = r.info.tracked;
        if r.done {
            return out;
        }
    }
}

/// Result of the two-mode toy diffusion oracle.
#[derive(Debug, Clone, Copy)]
pub struct ToyMixture {
    /// Fraction of samples nearest to each mode.
    pub coverage: [f64; 2],
    /// Distance between each mode and the mean of its samples.
    pub mean_error: [f64; 2],
    pub final_loss: f64,
    pub secs: f64,
}

/// Trains an unconditioned denoiser on a mixture of two Gaussians at
/// +-(0.6, 0.6) with std 0.05 and samples from it.
pub fn toy_mixture(steps: usize, samples: usize, seed: u64) -> ToyMixture {
    use rand_distr::{Distribution, Normal};
    use vfhand::dpol::*;
    use vfhand::neuro::{Adam, AdamConfig};
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schedule = NoiseSchedule::default();
    let mut net = EpsNet::new(0, &[128, 128, 128], schedule.steps(), &mut rng).unwrap();
    let mut opt = Adam::new(net.net.params().len(), AdamConfig { lr: 1e-3, ..Default::default() });
    let noise = Normal::new(0.0, 0.05).unwrap();
    let batch = 256;
    let mut final_loss = 0.0;
    for s in 0..steps {
        let a0: Vec<f64> = (0..batch)
            .flat_map(|_| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                [sign * 0.6 + noise.sample(&mut rng), sign * 0.6 + noise.sample(&mut rng)]
            })
            .collect();
        let out = diffusion_loss(&net, &[], &a0, &schedule, &mut rng).unwrap();
        opt.config.lr = 1e-3 * 0.5 * (1.0 + (std::f64::consts::PI * s as f64 / steps as f64).cos());
        opt.step(net.net.params_mut(), &out.grads);
        final_loss = 0.98 * final_loss + 0.02 * out.loss;
    }
    let x = sample_codes(&net, &[], samples, &schedule, &mut rng).unwrap();
    let mut count = [0usize; 2];
    let mut sum = [[0.0; 2]; 2];
    for p in x.chunks_exact(2) {
        let m = if p[0] + p[1] > 0.0 { 0 } else { 1 };
        count[m] += 1;
        sum[m][0] += p[0];
        sum[m][1] += p[1];
    }
    let mut r = ToyMixture { coverage: [0.0; 2], mean_error: [f64::INFINITY; 2], final_loss, secs: 0.0 };
    for m in 0..2 {
        let target = if m == 0 { 0.6 } else { -0.6 };
        r.coverage[m] = count[m] as f64 / samples as f64;
        if count[m] > 0 {
            let c = count[m] as f64;
            r.mean_error[m] = ((sum[m][0] / c - target).powi(2) + (sum[m][1] / c - target).powi(2)).sqrt();
        }
    }
    r.secs = start.elapsed().as_secs_f64();
    r
}
