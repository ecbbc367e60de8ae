//! Backpropagated gradients against central finite differences.

use busched::ppo::{ppo_loss_grad, reinforce_loss_grad, Architecture, PolicyNet, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-4;

fn random_batch(arch: &Architecture, net: &PolicyNet, rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| {
            let state: Vec<f64> = (0..arch.input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut mask: Vec<bool> = (0..arch.n_actions).map(|_| rng.gen_bool(0.7)).collect();
            let action = rng.gen_range(0..arch.n_actions);
            mask[action] = true;
            let p = busched::ppo::policy_forward(net, &state, &mask).unwrap()[action];
            // keep the ratio clear of the clip boundaries so the loss is smooth around it
            let ratio = [0.5, 0.8, 1.05, 1.3][rng.gen_range(0..4)];
            Sample {
                state,
                mask,
                action,
                behavior_prob: p / ratio,
                ret: rng.gen_range(-5.0..5.0),
                advantage: rng.gen_range(-3.0..3.0),
            }
        })
        .collect()
}

fn numeric<F: Fn(&PolicyNet) -> f64>(net: &PolicyNet, loss: F) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.n_params())
        .map(|i| {
            let p = probe.params()[i];
            probe.params_mut()[i] = p + H;
            let up = loss(&probe);
            probe.params_mut()[i] = p - H;
            let down = loss(&probe);
            probe.params_mut()[i] = p;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn worst_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Fresh layers start with zero biases, which can park a pre-activation exactly on the ReLU
/// kink; randomising every parameter keeps the check on differentiable points.
fn random_net(arch: Architecture, rng: &mut ChaCha8Rng) -> PolicyNet {
    let params = (0..PolicyNet::zeros(arch).n_params()).map(|_| rng.gen_range(-0.5..0.5)).collect();
    PolicyNet::from_params(arch, params).unwrap()
}

fn arch(rng: &mut ChaCha8Rng) -> Architecture {
    Architecture {
        input_dim: rng.gen_range(3..12),
        hidden: [rng.gen_range(3..10), rng.gen_range(3..8), rng.gen_range(2..6)],
        n_actions: rng.gen_range(2..6),
    }
}

#[test]
fn ppo_gradient_matches_finite_differences() {
    for case in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let arch = arch(&mut rng);
        let net = random_net(arch, &mut rng);
        let batch = random_batch(&arch, &net, &mut rng, 6);
        let refs: Vec<&Sample> = batch.iter().collect();
        let (_, grad) = ppo_loss_grad(&net, &refs, 0.1, 1.0).unwrap();
        let fd = numeric(&net, |n| ppo_loss_grad(n, &refs, 0.1, 1.0).unwrap().0.loss);
        let err = worst_relative_error(&grad, &fd);
        assert!(err < 1e-4, "case {case}: relative error {err:e}");
    }
}

#[test]
fn reinforce_gradient_matches_finite_differences() {
    for case in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
        let arch = arch(&mut rng);
        let net = random_net(arch, &mut rng);
        let batch = random_batch(&arch, &net, &mut rng, 6);
        let refs: Vec<&Sample> = batch.iter().collect();
        let (_, grad) = reinforce_loss_grad(&net, &refs).unwrap();
        let fd = numeric(&net, |n| reinforce_loss_grad(n, &refs).unwrap().0.loss);
        let err = worst_relative_error(&grad, &fd);
        assert!(err < 1e-4, "case {case}: relative error {err:e}");
    }
}
