//! Quick numerical self-checks exposed through the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::nn::{Activation, Mlp};
use crate::rlfd::gaussian_kl;
use crate::tabular::{
    bellman_operator_apply, operator_fixed_point, policy_q, stepwise_kl_sum, sup_distance, trajectory_kl_enumerated,
    TabularMdp,
};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Worst relative error between backprop and central differences of `sum(w * f(x))`.
pub fn gradient_error(net: &Mlp, x: &[f64], batch: usize, weights: &[f64], h: f64) -> f64 {
    let tape = net.forward_batch(x, batch).expect("shapes match");
    let g = net.backward(&tape, weights).expect("shapes match");
    let objective = |n: &Mlp| -> f64 {
        let t = n.forward_batch(x, batch).expect("shapes match");
        t.output().iter().zip(weights).map(|(o, w)| o * w).sum()
    };
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for i in 0..net.num_params() {
        let p = net.params()[i];
        probe.params_mut()[i] = p + h;
        let up = objective(&probe);
        probe.params_mut()[i] = p - h;
        let down = objective(&probe);
        probe.params_mut()[i] = p;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - g.params[i]).abs() / (fd.abs().max(g.params[i].abs()).max(1e-6)));
    }
    worst
}

fn gradient_checks(rng: &mut ChaCha8Rng) -> Check {
    let mut worst: f64 = 0.0;
    for (dims, act) in [
        (vec![6, 30, 2], Activation::Tanh),
        (vec![8, 16, 16, 1], Activation::Linear),
        (vec![8, 12, 12, 6], Activation::Linear),
    ] {
        for _ in 0..5 {
            let net = Mlp::init(&dims, act, None, rng).expect("valid dims");
            let batch = 3;
            let x: Vec<f64> = (0..dims[0] * batch).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..dims[dims.len() - 1] * batch).map(|_| rng.random_range(-1.0..1.0)).collect();
            worst = worst.max(gradient_error(&net, &x, batch, &w, 1e-6));
        }
    }
    check("backprop vs finite differences", worst < 1e-4, format!("max relative error {worst:.3e}"))
}

fn kl_checks(rng: &mut ChaCha8Rng) -> Check {
    let mut worst_z: f64 = 0.0;
    let samples = 20_000;
    for _ in 0..5 {
        let mu_a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mu_b: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let va: Vec<f64> = (0..2).map(|_| rng.random_range(0.3..2.0)).collect();
        let vb: Vec<f64> = (0..2).map(|_| rng.random_range(0.3..2.0)).collect();
        let exact = gaussian_kl(&mu_a, &va, &mu_b, &vb).expect("valid");
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..samples {
            let mut lr = 0.0;
            for i in 0..2 {
                let z: f64 = rng.sample(StandardNormal);
                let x = mu_a[i] + va[i].sqrt() * z;
                let la = -0.5 * ((x - mu_a[i]).powi(2) / va[i] + va[i].ln());
                let lb = -0.5 * ((x - mu_b[i]).powi(2) / vb[i] + vb[i].ln());
                lr += la - lb;
            }
            sum += lr;
            sq += lr * lr;
        }
        let mean = sum / samples as f64;
        let se = ((sq / samples as f64 - mean * mean) / samples as f64).sqrt();
        worst_z = worst_z.max((mean - exact).abs() / se.max(1e-12));
    }
    let zero = gaussian_kl(&[0.1, 0.2], &[1.5, 0.5], &[0.1, 0.2], &[1.5, 0.5]).expect("valid");
    check(
        "gaussian kl vs monte carlo",
        worst_z < 3.0 && zero == 0.0,
        format!("max deviation {worst_z:.2} standard errors, identical pair {zero}"),
    )
}

fn tabular_checks(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mdp = TabularMdp::random(5, 3, 0.9, rng).expect("valid mdp");
    let pe = mdp.random_policy(rng);
    let pt = mdp.random_policy(rng);
    let mut modulus: f64 = 0.0;
    for _ in 0..100 {
        let qa: Vec<f64> = (0..15).map(|_| rng.random_range(-5.0..5.0)).collect();
        let qb: Vec<f64> = (0..15).map(|_| rng.random_range(-5.0..5.0)).collect();
        let num = sup_distance(
            &bellman_operator_apply(&mdp, &pe, &pt, &qa),
            &bellman_operator_apply(&mdp, &pe, &pt, &qb),
        );
        modulus = modulus.max(num / sup_distance(&qa, &qb));
    }
    let truth = policy_q(&mdp, &pt).expect("solvable");
    let mut q = vec![0.0; 15];
    for _ in 0..300 {
        q = bellman_operator_apply(&mdp, &pt, &pt, &q);
    }
    let conv = sup_distance(&q, &truth);
    let bias = sup_distance(&operator_fixed_point(&mdp, &pe, &pt).expect("solvable"), &truth);
    let kl_gap = (trajectory_kl_enumerated(&mdp, 0, &pe, &pt, 4) - stepwise_kl_sum(&mdp, 0, &pe, &pt, 4)).abs();
    vec![
        check("operator contraction", modulus <= 0.9, format!("measured modulus {modulus:.6}")),
        check("convergence to policy values", conv < 1e-8, format!("sup error {conv:.3e}")),
        check("mismatch bias", bias > 1e-3, format!("sup error {bias:.3e}")),
        check("trajectory kl decomposition", kl_gap < 1e-12, format!("gap {kl_gap:.3e}")),
    ]
}

pub fn run_all() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut out = vec![gradient_checks(&mut rng), kl_checks(&mut rng)];
    out.extend(tabular_checks(&mut rng));
    out
}
