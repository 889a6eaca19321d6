//! Exponentially weighted history of backward differences.
//!
//! Per SOE mode `l` and spatial degree of freedom, the scalar
//! `H^l(t_k) = e^{-theta_l tau_k} H^l(t_{k-1}) + b^{(k,l)} (v^k - v^{k-1})`
//! carries the entire convolution tail, so each step costs O(N_q) per dof
//! instead of O(k).

use super::kernels::history_coeff;
use super::soe::SoeApprox;

/// History scalars for every (mode, dof) pair; mode-major storage.
#[derive(Debug, Clone)]
pub struct HistoryState {
    level: usize,
    n_dof: usize,
    h: Vec<f64>,
}

impl HistoryState {
    /// State at `t_0`: all history scalars start at zero.
    pub fn new(n_modes: usize, n_dof: usize) -> HistoryState {
        HistoryState {
            level: 0,
            n_dof,
            h: vec![0.0; n_modes * n_dof],
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    /// Advances from `t_{k-1}` to `t_k` with the per-dof differences
    /// `diff[i] = v_i^k - v_i^{k-1}` over step `tau_k`.
    pub fn advance(&mut self, soe: &SoeApprox, diff: &[f64], tau_k: f64) {
        assert_eq!(diff.len(), self.n_dof);
        for (l, &theta) in soe.thetas.iter().enumerate() {
            let x = theta * tau_k;
            let decay = (-x).exp();
            let b = history_coeff(x);
            let row = &mut self.h[l * self.n_dof..(l + 1) * self.n_dof];
            for (h, &d) in row.iter_mut().zip(diff) {
                *h = decay * *h + b * d;
            }
        }
        self.level += 1;
    }

    /// Accumulates the history term `sum_l w_l e^{-theta_l tau_next} H^l`
    /// of the next level into `out`.
    pub fn weighted_term(&self, soe: &SoeApprox, tau_next: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.n_dof);
        out.fill(0.0);
        for (l, (&theta, &w)) in soe.thetas.iter().zip(&soe.weights).enumerate() {
            let c = w * (-theta * tau_next).exp();
            let row = &self.h[l * self.n_dof..(l + 1) * self.n_dof];
            for (o, &h) in out.iter_mut().zip(row) {
                *o += c * h;
            }
        }
    }
}

/// Fast L1 value for a scalar signal:
/// `a_0 dv_n + sum_l w_l e^{-theta_l tau_n} H^l(t_{n-1})`.
pub fn fast_l1_apply(
    state: &HistoryState,
    soe: &SoeApprox,
    a0: f64,
    dv_n: f64,
    tau_n: f64,
) -> f64 {
    debug_assert_eq!(state.n_dof, 1);
    let mut hist = [0.0f64];
    state.weighted_term(soe, tau_n, &mut hist);
    a0 * dv_n + hist[0]
}
