//! Exact finite-MDP oracle for the expert-data Bellman operator.
//!
//! The operator evaluates the agent policy `pi_theta` while next states are
//! generated by the expert `pi_e`. For a stored pair `(s, a)` the executed
//! action is coupled to `a` maximally: it stays `a` with probability
//! `min(1, pi_e(a|s) / pi_theta(a|s))` and is otherwise drawn from the part of
//! `pi_e` not covered by `pi_theta`. Marginally the executed action follows
//! `pi_e`, and the kernel reduces to `P(s'|s, a)` exactly when the policies agree.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `p[(s * n_actions + a) * n_states + s']`.
    pub p: Vec<f64>,
    /// `r[s * n_actions + a]`.
    pub r: Vec<f64>,
    pub gamma: f64,
}

/// Row-stochastic `n_states x n_actions` table.
pub type TabularPolicy = Vec<f64>;
/// `q[s * n_actions + a]`.
pub type QTable = Vec<f64>;

fn random_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

impl TabularMdp {
    pub fn new(n_states: usize, n_actions: usize, p: Vec<f64>, r: Vec<f64>, gamma: f64) -> Result<Self> {
        if p.len() != n_states * n_actions * n_states || r.len() != n_states * n_actions {
            return Err(Error::Dimension {
                context: "tabular mdp",
                expected: n_states * n_actions * n_states,
                got: p.len(),
            });
        }
        for row in p.chunks_exact(n_states) {
            let total: f64 = row.iter().sum();
            if row.iter().any(|x| *x < 0.0) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter {
                    key: "transition".into(),
                    msg: format!("row sums to {total}"),
                });
            }
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParameter {
                key: "gamma".into(),
                msg: format!("{gamma} outside [0, 1)"),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            p,
            r,
            gamma,
        })
    }

    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, gamma: f64, rng: &mut R) -> Result<Self> {
        let mut p = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            p.extend(random_simplex(n_states, rng));
        }
        let r = (0..n_states * n_actions).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self::new(n_states, n_actions, p, r, gamma)
    }

    pub fn random_policy<R: Rng + ?Sized>(&self, rng: &mut R) -> TabularPolicy {
        (0..self.n_states).flat_map(|_| random_simplex(self.n_actions, rng)).collect()
    }

    fn next(&self, s: usize, a: usize) -> &[f64] {
        let i = (s * self.n_actions + a) * self.n_states;
        &self.p[i..i + self.n_states]
    }

    /// `P(s'|s, a)` with the executed action coupled to `pi_e` as described above.
    pub fn behavior_kernel(&self, pi_e: &[f64], pi_theta: &[f64], s: usize, a: usize) -> Vec<f64> {
        let na = self.n_actions;
        let pe = &pi_e[s * na..(s + 1) * na];
        let pt = &pi_theta[s * na..(s + 1) * na];
        let excess: Vec<f64> = pe.iter().zip(pt).map(|(e, t)| (e - t).max(0.0)).collect();
        let tv: f64 = excess.iter().sum();
        let keep = if tv <= 0.0 || pe[a] >= pt[a] { 1.0 } else { pe[a] / pt[a] };
        let mut out: Vec<f64> = self.next(s, a).iter().map(|p| keep * p).collect();
        if keep < 1.0 {
            for (b, w) in excess.iter().enumerate() {
                let mass = (1.0 - keep) * w / tv;
                for (o, p) in out.iter_mut().zip(self.next(s, b)) {
                    *o += mass * p;
                }
            }
        }
        out
    }
}

/// `(T Q)(s, a) = R(s, a) + gamma * E_{s' ~ P(.|s, pi_e), a' ~ pi_theta}[Q(s', a')]`.
pub fn bellman_operator_apply(mdp: &TabularMdp, pi_e: &[f64], pi_theta: &[f64], q: &[f64]) -> QTable {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let v: Vec<f64> = (0..ns)
        .map(|s| (0..na).map(|a| pi_theta[s * na + a] * q[s * na + a]).sum())
        .collect();
    let mut out = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let k = mdp.behavior_kernel(pi_e, pi_theta, s, a);
            let ev: f64 = k.iter().zip(&v).map(|(p, v)| p * v).sum();
            out[s * na + a] = mdp.r[s * na + a] + mdp.gamma * ev;
        }
    }
    out
}

/// Fixed point of the operator by a dense linear solve of `(I - gamma M) Q = R`.
pub fn operator_fixed_point(mdp: &TabularMdp, pi_e: &[f64], pi_theta: &[f64]) -> Result<QTable> {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let n = ns * na;
    let mut m = DMatrix::<f64>::identity(n, n);
    for s in 0..ns {
        for a in 0..na {
            let k = mdp.behavior_kernel(pi_e, pi_theta, s, a);
            for (s2, p) in k.iter().enumerate() {
                for a2 in 0..na {
                    m[(s * na + a, s2 * na + a2)] -= mdp.gamma * p * pi_theta[s2 * na + a2];
                }
            }
        }
    }
    let rhs = DVector::from_column_slice(&mdp.r);
    m.lu()
        .solve(&rhs)
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::InvalidParameter {
            key: "mdp".into(),
            msg: "singular policy-evaluation system".into(),
        })
}

/// True action values of `pi`: `Q = R + gamma P pi Q`.
pub fn policy_q(mdp: &TabularMdp, pi: &[f64]) -> Result<QTable> {
    operator_fixed_point(mdp, pi, pi)
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn categorical_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * (p / q).ln())
        .sum()
}

/// `KL(p(tau_e) || p(tau_theta))` over `depth` steps by enumerating every trajectory.
pub fn trajectory_kl_enumerated(mdp: &TabularMdp, s0: usize, pi_e: &[f64], pi_theta: &[f64], depth: usize) -> f64 {
    fn walk(
        mdp: &TabularMdp,
        s: usize,
        pi_e: &[f64],
        pi_theta: &[f64],
        left: usize,
        prob: f64,
        log_ratio: f64,
    ) -> f64 {
        if left == 0 {
            return prob * log_ratio;
        }
        let na = mdp.n_actions;
        let mut total = 0.0;
        for a in 0..na {
            let (pe, pt) = (pi_e[s * na + a], pi_theta[s * na + a]);
            if pe == 0.0 {
                continue;
            }
            for (s2, p) in mdp.next(s, a).iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                // dynamics factors cancel in the ratio
                total += walk(mdp, s2, pi_e, pi_theta, left - 1, prob * pe * p, log_ratio + (pe / pt).ln());
            }
        }
        total
    }
    walk(mdp, s0, pi_e, pi_theta, depth, 1.0, 0.0)
}

/// `sum_k E_{s_k ~ p_e}[KL(pi_e(.|s_k) || pi_theta(.|s_k))]` by propagating the expert's state distribution.
pub fn stepwise_kl_sum(mdp: &TabularMdp, s0: usize, pi_e: &[f64], pi_theta: &[f64], depth: usize) -> f64 {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let mut dist = vec![0.0; ns];
    dist[s0] = 1.0;
    let mut total = 0.0;
    for _ in 0..depth {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if dist[s] == 0.0 {
                continue;
            }
            total += dist[s] * categorical_kl(&pi_e[s * na..(s + 1) * na], &pi_theta[s * na..(s + 1) * na]);
            for a in 0..na {
                for (s2, p) in mdp.next(s, a).iter().enumerate() {
                    next[s2] += dist[s] * pi_e[s * na + a] * p;
                }
            }
        }
        dist = next;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (TabularMdp, TabularPolicy, TabularPolicy, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = TabularMdp::random(5, 3, 0.9, &mut rng).unwrap();
        let pe = mdp.random_policy(&mut rng);
        let pt = mdp.random_policy(&mut rng);
        (mdp, pe, pt, rng)
    }

    #[test]
    fn zero_discount_returns_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mdp = TabularMdp::random(4, 2, 0.5, &mut rng).unwrap();
        mdp.gamma = 0.0;
        let pi = mdp.random_policy(&mut rng);
        let q: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert_eq!(bellman_operator_apply(&mdp, &pi, &pi, &q), mdp.r);
    }

    #[test]
    fn kernel_is_stochastic_and_marginally_expert() {
        let (mdp, pe, pt, _) = setup(2);
        for s in 0..5 {
            let mut marginal = vec![0.0; 5];
            let mut expert = vec![0.0; 5];
            for a in 0..3 {
                let k = mdp.behavior_kernel(&pe, &pt, s, a);
                assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for s2 in 0..5 {
                    marginal[s2] += pt[s * 3 + a] * k[s2];
                    expert[s2] += pe[s * 3 + a] * mdp.next(s, a)[s2];
                }
            }
            assert!(sup_distance(&marginal, &expert) < 1e-12);
        }
    }

    #[test]
    fn same_policy_kernel_is_the_dynamics() {
        let (mdp, pe, _, _) = setup(3);
        for s in 0..5 {
            for a in 0..3 {
                assert_eq!(mdp.behavior_kernel(&pe, &pe, s, a), mdp.next(s, a).to_vec());
            }
        }
    }

    #[test]
    fn iteration_converges_to_linear_solve() {
        let (mdp, pe, _, _) = setup(4);
        let exact = policy_q(&mdp, &pe).unwrap();
        let mut q = vec![0.0; 15];
        for _ in 0..300 {
            q = bellman_operator_apply(&mdp, &pe, &pe, &q);
        }
        assert!(sup_distance(&q, &exact) < 1e-8);
    }

    #[test]
    fn contraction_modulus() {
        let (mdp, pe, pt, mut rng) = setup(5);
        for _ in 0..100 {
            let qa: Vec<f64> = (0..15).map(|_| rng.random_range(-5.0..5.0)).collect();
            let qb: Vec<f64> = (0..15).map(|_| rng.random_range(-5.0..5.0)).collect();
            let lhs = sup_distance(
                &bellman_operator_apply(&mdp, &pe, &pt, &qa),
                &bellman_operator_apply(&mdp, &pe, &pt, &qb),
            );
            assert!(lhs <= 0.9 * sup_distance(&qa, &qb) + 1e-12);
        }
    }

    #[test]
    fn mismatch_biases_the_fixed_point() {
        let (mdp, pe, pt, _) = setup(6);
        let biased = operator_fixed_point(&mdp, &pe, &pt).unwrap();
        let truth = policy_q(&mdp, &pt).unwrap();
        assert!(sup_distance(&biased, &truth) > 1e-3);
    }

    #[test]
    fn trajectory_kl_decomposes() {
        let (mdp, pe, pt, _) = setup(7);
        for depth in 1..=4 {
            let a = trajectory_kl_enumerated(&mdp, 0, &pe, &pt, depth);
            let b = stepwise_kl_sum(&mdp, 0, &pe, &pt, depth);
            assert!((a - b).abs() < 1e-12, "depth {depth}: {a} vs {b}");
        }
        assert!(trajectory_kl_enumerated(&mdp, 0, &pe, &pe, 3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(TabularMdp::new(1, 1, vec![0.5], vec![0.0], 0.9).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![0.0], 1.0).is_err());
    }
}
