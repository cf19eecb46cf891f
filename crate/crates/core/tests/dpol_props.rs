mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vfhand::action::max_delta;
use vfhand::dpol::*;
use vfhand::neuro::Mlp;
use vfhand::Action;

#[test]
fn codec_examples() {
    assert_eq!(encode_action(&Action::new(0, 0.0)), [-1.0, -1.0]);
    assert_eq!(decode_action(&[-1.0, -1.0]), Action::new(0, 0.0));
    assert_eq!(encode_action(&Action::new(5, max_delta())), [1.0, 1.0]);
    let a = decode_action(&[0.05, 0.0]);
    assert_eq!(a.mode, 3);
    assert!((a.delta.to_degrees() - 9.45).abs() < 1e-12);
}

#[test]
fn oracle_noise_gives_zero_loss() {
    // A denoiser whose last layer copies the true noise: condition = eps,
    // so with a hidden ReLU pair per sign it can represent eps exactly.
    let schedule = NoiseSchedule::default();
    let spec = vfhand::neuro::MlpSpec::new(2 + 2 + EMBED_DIM, &[4], 2, vfhand::neuro::Activation::Relu, vfhand::neuro::Activation::Identity);
    let mut net = Mlp::<f64>::zeros(spec).unwrap();
    {
        let (w, _) = net.layer_mut(0);
        // inputs 0,1 carry eps; hidden = [relu(e0), relu(-e0), relu(e1), relu(-e1)]
        w[0 * 4] = 1.0;
        w[0 * 4 + 1] = -1.0;
        w[1 * 4 + 2] = 1.0;
        w[1 * 4 + 3] = -1.0;
    }
    {
        let (w, _) = net.layer_mut(1);
        w.copy_from_slice(&[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
    }
    let eps_net = EpsNet::from_net(net, schedule.steps()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 64;
    let eps: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
    let a0: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ks: Vec<usize> = (0..n).map(|_| rng.random_range(1..=50)).collect();
    let out = diffusion_loss_with(&eps_net, &eps, &a0, &ks, &eps, &schedule).unwrap();
    assert_eq!(out.loss, 0.0);
    assert!(out.grads.iter().all(|g| *g == 0.0));
}

#[test]
fn untrained_loss_is_near_the_noise_dimension() {
    let schedule = NoiseSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net = EpsNet::new(25, &[64, 64], schedule.steps(), &mut rng).unwrap();
    // a freshly initialized output layer scaled towards zero
    let last = net.net.spec().layers() - 1;
    let (w, b) = net.net.layer_mut(last);
    w.iter_mut().for_each(|v| *v *= 0.01);
    b.iter_mut().for_each(|v| *v = 0.0);
    let n = 10_000;
    let cond: Vec<f64> = (0..n * 25).map(|_| rng.sample(StandardNormal)).collect();
    let a0: Vec<f64> = (0..n * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let out = diffusion_loss(&net, &cond, &a0, &schedule, &mut rng).unwrap();
    assert!((out.loss - 2.0).abs() < 0.2, "{}", out.loss);
}

#[test]
fn fixed_batch_loss_decreases() {
    let schedule = NoiseSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut net = EpsNet::new(25, &[64, 64], schedule.steps(), &mut rng).unwrap();
    let n = 512;
    let cond: Vec<f64> = (0..n * 25).map(|_| rng.sample(StandardNormal)).collect();
    let a0: Vec<f64> = (0..n * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ks: Vec<usize> = (0..n).map(|_| rng.random_range(1..=50)).collect();
    let eps: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
    let cfg = vfhand::neuro::AdamConfig { lr: 1e-4, ..Default::default() };
    let mut opt = vfhand::neuro::Adam::new(net.net.params().len(), cfg);
    let mut windows = Vec::new();
    let mut acc = 0.0;
    for s in 0..500 {
        let out = diffusion_loss_with(&net, &cond, &a0, &ks, &eps, &schedule).unwrap();
        acc += out.loss;
        if s % 50 == 49 {
            windows.push(acc / 50.0);
            acc = 0.0;
        }
        opt.step(net.net.params_mut(), &out.grads);
    }
    assert!(windows.windows(2).all(|w| w[1] < w[0]), "{windows:?}");
}

#[test]
fn reverse_step_inverts_the_first_forward_step() {
    // eps_hat returned by a net that ignores its input: zero weights and
    // bias equal to the noise used in the forward step
    let schedule = NoiseSchedule::default();
    let e = [0.7, -1.1];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut net = EpsNet::new(25, &[8], 50, &mut rng).unwrap();
    net.net.params_mut().iter_mut().for_each(|v| *v = 0.0);
    let last = net.net.spec().layers() - 1;
    net.net.layer_mut(last).1.copy_from_slice(&e);
    let a0 = [0.25, -0.6];
    let x1 = forward_diffuse(&a0, 1, &e, &schedule).unwrap();
    let back = reverse_step(&net, &x1, &[0.0; 25], 1, &schedule, &mut rng).unwrap();
    assert!((back[0] - a0[0]).abs() < 1e-12 && (back[1] - a0[1]).abs() < 1e-12);
    assert!(reverse_step(&net, &x1, &[0.0; 25], 0, &schedule, &mut rng).is_err());
    assert!(forward_diffuse(&a0, 51, &e, &schedule).is_err());

    // zero eps_hat and zero sigma: pure rescaling
    net.net.layer_mut(last).1.copy_from_slice(&[0.0, 0.0]);
    let r = reverse_step(&net, &[1.0, 2.0], &[0.0; 25], 1, &schedule, &mut rng).unwrap();
    let s = schedule.alpha(1).unwrap().sqrt();
    assert!((r[0] - 1.0 / s).abs() < 1e-15 && (r[1] - 2.0 / s).abs() < 1e-15);
}

#[test]
fn sampling_is_seeded_and_in_range() {
    let schedule = NoiseSchedule::default();
    let net = EpsNet::new(25, &[16], 50, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let o = [0.3; 25];
    let a = sample_action(&net, &o, &schedule, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let b = sample_action(&net, &o, &schedule, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn toy_mixture_recovers_both_modes() {
    let r = common::toy_mixture(4000, 2000, 11);
    println!("{r:?}");
    for m in 0..2 {
        assert!(r.coverage[m] >= 0.3, "{r:?}");
        assert!(r.mean_error[m] < 0.05, "{r:?}");
    }
}

#[test]
fn cotrain_mixing_fraction() {
    let cfg = CoTrainConfig::default();
    let s = SourceSampler::new(Preset::Cotrain, &cfg, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 1_000_000;
    let sim = (0..n).filter(|_| s.pick(0, &mut rng) == vfhand::demogen::DomainTag::Sim).count();
    assert!((sim as f64 / n as f64 - 0.5).abs() < 0.003);
    let ft = SourceSampler::new(Preset::Finetune, &cfg, 100);
    assert_eq!(ft.pick(49, &mut rng), vfhand::demogen::DomainTag::Sim);
    assert_eq!(ft.pick(50, &mut rng), vfhand::demogen::DomainTag::Real);
}

proptest! {
    #[test]
    fn decode_respects_bounds(m in proptest::num::f64::ANY, d in proptest::num::f64::ANY) {
        let a = decode_action(&[m, d]);
        prop_assert!(a.validate().is_ok());
    }

    #[test]
    fn codec_round_trip(mode in 0u8..6, delta in 0.0f64..=1.0) {
        let a = Action::new(mode, delta * max_delta::<f64>());
        let b = decode_action(&encode_action(&a));
        prop_assert_eq!(a.mode, b.mode);
        prop_assert!((a.delta - b.delta).abs() < 1e-9);
    }
}
