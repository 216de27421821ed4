//! Seeded random discrete models with nontrivial bridge strata.
//!
//! Covariate values are split into groups that share a bridge score at every
//! mediator value. In the default family each group member has its own
//! latent law `P(u | x)` and a mediator kernel obtained from the group's
//! mixture by a rank-one perturbation that leaves the mixture unchanged; the
//! outcome table depends on `(group, u, m)` only. In the decoupled family the
//! latent law is shared by all covariate values, group members share the
//! mediator kernel, and the outcome table varies freely with `x`.

use rand::Rng;

use super::model::DiscreteModel;
use crate::seed::{purpose, substream};

fn simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let floor = 0.05 / k as f64;
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|r| floor + (1.0 - k as f64 * floor) * r / total).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

fn centered<R: Rng>(rng: &mut R, weights: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = weights.iter().map(|_| rng.random::<f64>() - 0.5).collect();
    let mean: f64 = raw.iter().zip(weights).map(|(r, w)| r * w).sum();
    raw.iter().map(|r| r - mean).collect()
}

/// Kernel `P(m | u) = g(m) + t s(m) w(u)` with `sum_m s = 0` and
/// `sum_u p_u w = 0`, so that `sum_u p_u P(m | u) = g(m)`.
fn perturbed_kernel<R: Rng>(rng: &mut R, target: &[f64], p_u: &[f64]) -> Vec<Vec<f64>> {
    let nm = target.len();
    let s = centered(rng, &vec![1.0 / nm as f64; nm]);
    let w = centered(rng, p_u);
    let mut t_max = f64::INFINITY;
    for (m, sm) in s.iter().enumerate() {
        for wu in &w {
            let prod = (sm * wu).abs();
            if prod > 0.0 {
                t_max = t_max.min(0.9 * target[m] / prod);
            }
        }
    }
    let t = if t_max.is_finite() {
        rng.random_range(0.2..1.0) * t_max
    } else {
        0.0
    };
    w.iter()
        .map(|wu| target.iter().zip(&s).map(|(g, sm)| g + t * sm * wu).collect())
        .collect()
}

/// Group label per covariate value; every label in `0..groups` is used.
fn group_labels<R: Rng>(rng: &mut R, nx: usize) -> Vec<usize> {
    let groups = rng.random_range(1..=nx);
    (0..nx)
        .map(|x| if x < groups { x } else { rng.random_range(0..groups) })
        .collect()
}

pub fn random_model<R: Rng>(rng: &mut R, decoupled: bool) -> DiscreteModel {
    let nx = rng.random_range(1..=4);
    let nu = rng.random_range(2..=5);
    let nm = rng.random_range(2..=4);
    let labels = group_labels(rng, nx);
    let groups = labels.iter().max().map_or(0, |g| g + 1);

    let p_x = simplex(rng, nx);
    let shared_u = simplex(rng, nu);
    let p_u_given_x: Vec<Vec<f64>> = (0..nx)
        .map(|_| if decoupled { shared_u.clone() } else { simplex(rng, nu) })
        .collect();

    let mut p_m_given_axu = vec![vec![Vec::new(); nx]; 2];
    for g in 0..groups {
        let members: Vec<usize> = (0..nx).filter(|&x| labels[x] == g).collect();
        let proto = members[0];
        for kernels in p_m_given_axu.iter_mut() {
            let proto_kernel: Vec<Vec<f64>> = (0..nu).map(|_| simplex(rng, nm)).collect();
            let target: Vec<f64> = (0..nm)
                .map(|m| (0..nu).map(|u| p_u_given_x[proto][u] * proto_kernel[u][m]).sum())
                .collect();
            for &x in &members[1..] {
                kernels[x] = if decoupled {
                    proto_kernel.clone()
                } else {
                    perturbed_kernel(rng, &target, &p_u_given_x[x])
                };
            }
            kernels[proto] = proto_kernel;
        }
    }

    let group_outcome: Vec<Vec<Vec<f64>>> = (0..groups)
        .map(|_| (0..nu).map(|_| (0..nm).map(|_| rng.random::<f64>()).collect()).collect())
        .collect();
    let outcome_mean = (0..nx)
        .map(|x| {
            if decoupled {
                (0..nu).map(|_| (0..nm).map(|_| rng.random::<f64>()).collect()).collect()
            } else {
                group_outcome[labels[x]].clone()
            }
        })
        .collect();

    let mut u_support: Vec<f64> = (0..nu).map(|_| rng.random::<f64>()).collect();
    // distinct, but not sorted by index
    u_support.iter_mut().enumerate().for_each(|(i, v)| *v += i as f64 * 1e-9);

    DiscreteModel {
        x_support: (0..nx).map(|x| x as f64).collect(),
        u_support,
        m_support: (0..nm).map(|m| m as f64).collect(),
        p_x,
        p_u_given_x,
        p_m_given_axu,
        outcome_mean,
    }
}

/// Model `index` of the corpus rooted at `seed`. Odd indices are decoupled.
pub fn fuzz_model(seed: u64, index: usize) -> DiscreteModel {
    let mut rng = substream(seed, &[purpose::FUZZ_MODEL, index as u64]);
    random_model(&mut rng, index % 2 == 1)
}
