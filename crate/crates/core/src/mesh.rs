//! Nonuniform time meshes: graded initial segments, random tails, the adaptive
//! step controller and the AssG mesh-quality check.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Strictly increasing time levels `t_0 = 0 < t_1 < ... < t_N`.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct TimeMesh {
    nodes: Vec<f64>,
}

impl TimeMesh {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<TimeMesh> {
        // a single node [0.0] is the degenerate zero-step mesh
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("mesh needs at least one node".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mesh must start at t = 0, got {}",
                nodes[0]
            )));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "mesh nodes not strictly increasing at t = {}",
                    w[0]
                )));
            }
        }
        Ok(TimeMesh { nodes })
    }

    /// Number of steps N.
    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Node `t_k`, `0 <= k <= N`.
    pub fn node(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    /// Step `tau_k = t_k - t_{k-1}`, `1 <= k <= N`.
    pub fn tau(&self, k: usize) -> f64 {
        self.nodes[k] - self.nodes[k - 1]
    }

    /// Final time `t_N`.
    pub fn final_time(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Maximum step `tau = max_k tau_k`.
    pub fn tau_max(&self) -> f64 {
        (1..=self.n_steps())
            .map(|k| self.tau(k))
            .fold(0.0, f64::max)
    }

    pub fn tau_min(&self) -> f64 {
        (1..=self.n_steps())
            .map(|k| self.tau(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Maximum local step ratio `rho = max_k tau_k / tau_{k+1}`.
    pub fn rho_max(&self) -> f64 {
        (1..self.n_steps())
            .map(|k| self.tau(k) / self.tau(k + 1))
            .fold(0.0, f64::max)
    }
}

/// Parameters of the adaptive step controller
/// `tau = min{max{tau_min, tol/(1 + beta*change)}, tau_max}`.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveParams {
    pub tol: f64,
    pub beta: f64,
    pub tau_min: f64,
    pub tau_max: f64,
}

impl AdaptiveParams {
    pub fn new(tol: f64, beta: f64, tau_min: f64, tau_max: f64) -> Result<AdaptiveParams> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("adapt.tol = {tol} <= 0")));
        }
        if !(beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("adapt.beta = {beta} < 0")));
        }
        if !(tau_min > 0.0 && tau_min <= tau_max) {
            return Err(Error::InvalidParameter(format!(
                "adaptive bounds must satisfy 0 < tau_min <= tau_max, got [{tau_min}, {tau_max}]"
            )));
        }
        Ok(AdaptiveParams {
            tol,
            beta,
            tau_min,
            tau_max,
        })
    }
}

/// Graded mesh `t_k = T0 (k/N0)^gamma` on `[0, T0]`.
pub fn graded_mesh(t0: f64, n0: usize, gamma: f64) -> Result<TimeMesh> {
    if n0 == 0 {
        return Err(Error::InvalidParameter("graded mesh needs N0 >= 1".into()));
    }
    if !(gamma >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "grading parameter gamma = {gamma} < 1"
        )));
    }
    if !(t0 > 0.0) {
        return Err(Error::InvalidParameter(format!("T0 = {t0} <= 0")));
    }
    let nodes = (0..=n0)
        .map(|k| {
            let frac = k as f64 / n0 as f64;
            if gamma == 1.0 {
                t0 * frac
            } else {
                t0 * frac.powf(gamma)
            }
        })
        .collect();
    TimeMesh::from_nodes(nodes)
}

/// Random steps filling `[T0, T]`: `tau_k = (T - T0) eps_k / sum eps`, with
/// `eps_k` uniform in (0,1) from a seeded ChaCha8 stream. The last step closes
/// the interval so the steps sum to `T - T0` bit-exactly.
pub fn random_tail_mesh(t0: f64, t_final: f64, n1: usize, seed: u64) -> Result<Vec<f64>> {
    if !(t_final > t0) {
        return Err(Error::InvalidParameter(format!(
            "random tail needs T > T0, got T = {t_final}, T0 = {t0}"
        )));
    }
    if n1 == 0 {
        return Err(Error::InvalidParameter("random tail needs N1 >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eps = vec![0.0f64; n1];
    for e in eps.iter_mut() {
        *e = loop {
            let v: f64 = rng.gen();
            if v > 0.0 {
                break v;
            }
        };
    }
    let total: f64 = eps.iter().sum();
    let span = t_final - t0;
    let mut steps: Vec<f64> = eps.iter().map(|e| span * e / total).collect();
    let partial: f64 = steps[..n1 - 1].iter().sum();
    steps[n1 - 1] = span - partial;
    Ok(steps)
}

/// Append a step sequence to a mesh ending at `T0`.
pub fn concat_mesh(head: &TimeMesh, tail_steps: &[f64]) -> Result<TimeMesh> {
    let mut nodes = head.nodes().to_vec();
    let mut t = head.final_time();
    for (i, &s) in tail_steps.iter().enumerate() {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tail step {i} is not positive: {s}"
            )));
        }
        t += s;
        nodes.push(t);
    }
    TimeMesh::from_nodes(nodes)
}

/// Next step from the observed solution change; always lands in `[tau_min, tau_max]`.
pub fn adaptive_next_step(change_inf: f64, p: &AdaptiveParams) -> f64 {
    debug_assert!(change_inf >= 0.0);
    (p.tol / (1.0 + p.beta * change_inf))
        .max(p.tau_min)
        .min(p.tau_max)
}

/// Outcome of the AssG mesh-quality check.
#[derive(Debug, Clone, Copy)]
pub struct AssgReport {
    pub holds: bool,
    /// First violating step index, if any.
    pub worst_k: Option<usize>,
}

/// Checks `tau_k <= C tau min{1, t_k^{1-1/gamma}}` for `1 <= k <= N` and
/// `t_k <= C t_{k-1}` for `2 <= k <= N`.
pub fn check_assg(mesh: &TimeMesh, gamma: f64, c_gamma: f64) -> AssgReport {
    debug_assert!(c_gamma > 0.0);
    let tau = mesh.tau_max();
    let n = mesh.n_steps();
    for k in 1..=n {
        let cap = c_gamma * tau * mesh.node(k).powf(1.0 - 1.0 / gamma).min(1.0);
        if mesh.tau(k) > cap {
            return AssgReport {
                holds: false,
                worst_k: Some(k),
            };
        }
        if k >= 2 && mesh.node(k) > c_gamma * mesh.node(k - 1) {
            return AssgReport {
                holds: false,
                worst_k: Some(k),
            };
        }
    }
    AssgReport {
        holds: true,
        worst_k: None,
    }
}
