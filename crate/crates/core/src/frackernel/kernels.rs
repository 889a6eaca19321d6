//! Discrete L1 convolution kernels on nonuniform meshes: direct rows
//! `a_{n-k}^{(n)}`, SOE-compressed rows `A_{n-k}^{(n)}` and the complementary
//! kernels `p_{n-j}^{(n)}` of the discrete fractional Gronwall inequality.

use super::gamma::{gamma, omega};
use super::soe::SoeApprox;
use super::FracOrder;
use crate::error::{Error, Result};
use crate::mesh::TimeMesh;

/// Local kernel weight `a_0^{(n)} = tau_n^{-alpha} / Gamma(2-alpha)`.
pub fn a0_coeff(tau_n: f64, alpha: FracOrder) -> f64 {
    tau_n.powf(-alpha.value()) / gamma(2.0 - alpha.value())
}

/// `(1 - e^{-x})/x`, the positive history coefficient; series branch for
/// tiny arguments to avoid cancellation.
pub fn history_coeff(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 1e-8 {
        1.0 - x / 2.0 + x * x / 6.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// One row of direct L1 kernels; `values[i] = a_i^{(n)}` for `i = n - k`.
#[derive(Debug, Clone)]
pub struct DirectKernelRow {
    pub n: usize,
    pub values: Vec<f64>,
}

/// `a_{n-k}^{(n)} = [omega_{2-alpha}(t_n - t_{k-1}) - omega_{2-alpha}(t_n - t_k)] / tau_k`,
/// the exact cell average of `omega_{1-alpha}(t_n - s)`.
pub fn direct_kernel_row(mesh: &TimeMesh, alpha: FracOrder, n: usize) -> DirectKernelRow {
    assert!(n >= 1 && n <= mesh.n_steps(), "level {n} out of range");
    DirectKernelRow {
        n,
        values: direct_kernel_row_nodes(mesh.nodes(), alpha, n),
    }
}

/// Row computation on a bare node slice; lets the marching driver grow an
/// adaptive mesh without rebuilding a validated mesh each level.
pub(crate) fn direct_kernel_row_nodes(nodes: &[f64], alpha: FracOrder, n: usize) -> Vec<f64> {
    let a = alpha.value();
    let tn = nodes[n];
    let mut values = vec![0.0; n];
    for k in 1..n {
        let upper = omega(2.0 - a, tn - nodes[k - 1]);
        let lower = omega(2.0 - a, tn - nodes[k]);
        values[n - k] = (upper - lower) / (nodes[k] - nodes[k - 1]);
    }
    values[0] = a0_coeff(tn - nodes[n - 1], alpha);
    values
}

/// Direct L1 value `sum_{k=1}^{n} a_{n-k}^{(n)} (v^k - v^{k-1})`; the O(N^2)
/// oracle for the fast path. `diffs[k-1]` holds the backward difference at
/// level `k`; its length sets `n`.
pub fn direct_l1_apply(mesh: &TimeMesh, alpha: FracOrder, diffs: &[f64]) -> f64 {
    let n = diffs.len();
    let row = direct_kernel_row(mesh, alpha, n);
    diffs
        .iter()
        .enumerate()
        .map(|(i, &dv)| row.values[n - (i + 1)] * dv)
        .sum()
}

/// One row of fast (SOE) kernels; same layout as [`DirectKernelRow`].
#[derive(Debug, Clone)]
pub struct FastKernelRow {
    pub n: usize,
    pub values: Vec<f64>,
}

/// `A_0^{(n)} = a_0^{(n)}`; for `k < n` each SOE mode contributes its exact
/// cell integral `(w/(theta tau_k)) (e^{-theta(t_n-t_k)} - e^{-theta(t_n-t_{k-1})})`.
pub fn fast_kernel_row(
    mesh: &TimeMesh,
    soe: &SoeApprox,
    alpha: FracOrder,
    n: usize,
) -> FastKernelRow {
    assert!(n >= 1 && n <= mesh.n_steps(), "level {n} out of range");
    let tn = mesh.node(n);
    let mut values = vec![0.0; n];
    values[0] = a0_coeff(mesh.tau(n), alpha);
    for k in 1..n {
        let tau_k = mesh.tau(k);
        let gap = tn - mesh.node(k);
        let mut acc = 0.0;
        for (&th, &w) in soe.thetas.iter().zip(&soe.weights) {
            let e = th * gap;
            if e < 745.0 {
                acc += w * (-e).exp() * history_coeff(th * tau_k);
            }
        }
        values[n - k] = acc;
    }
    FastKernelRow { n, values }
}

/// All fast rows for levels `1..=n_max`.
pub fn fast_kernel_rows(
    mesh: &TimeMesh,
    soe: &SoeApprox,
    alpha: FracOrder,
    n_max: usize,
) -> Vec<FastKernelRow> {
    (1..=n_max)
        .map(|n| fast_kernel_row(mesh, soe, alpha, n))
        .collect()
}

/// Triangular table of complementary kernels; `rows[n-1][i] = p_i^{(n)}`.
#[derive(Debug, Clone)]
pub struct ComplementaryKernels {
    pub rows: Vec<Vec<f64>>,
}

impl ComplementaryKernels {
    /// `p_{n-j}^{(n)}` with 1-based level `n` and `1 <= j <= n`.
    pub fn p(&self, n: usize, j: usize) -> f64 {
        self.rows[n - 1][n - j]
    }

    pub fn n_levels(&self) -> usize {
        self.rows.len()
    }
}

/// Builds the complementary kernels from kernel rows satisfying the
/// monotone/positive assumptions:
/// `p_0^{(n)} = 1/A_0^{(n)}`,
/// `p_{n-j}^{(n)} = (1/A_0^{(j)}) sum_{k=j+1}^{n} (A_{k-j-1}^{(k)} - A_{k-j}^{(k)}) p_{n-k}^{(n)}`.
pub fn complementary_kernels(rows: &[FastKernelRow]) -> Result<ComplementaryKernels> {
    for row in rows {
        for w in row.values.windows(2) {
            // values are ordered a_0, a_1, ..: decreasing in history index
            if !(w[0] > w[1]) || !(w[1] > 0.0) {
                return Err(Error::AssumptionViolated(format!(
                    "kernel row {} is not positive and decreasing",
                    row.n
                )));
            }
        }
    }
    let n_max = rows.len();
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut p = vec![0.0; n];
        p[0] = 1.0 / rows[n - 1].values[0];
        for j in (1..n).rev() {
            let mut acc = 0.0;
            for k in (j + 1)..=n {
                let a = &rows[k - 1].values;
                acc += (a[k - j - 1] - a[k - j]) * p[n - k];
            }
            p[n - j] = acc / rows[j - 1].values[0];
        }
        table.push(p);
    }
    Ok(ComplementaryKernels { rows: table })
}

/// Max over `1 <= k <= n <= N` of `|sum_{j=k}^{n} p_{n-j}^{(n)} A_{j-k}^{(j)} - 1|`.
pub fn identity_pa_deviation(rows: &[FastKernelRow], comp: &ComplementaryKernels) -> f64 {
    let n_max = comp.n_levels();
    let mut worst = 0.0f64;
    for n in 1..=n_max {
        for k in 1..=n {
            let s: f64 = (k..=n)
                .map(|j| comp.p(n, j) * rows[j - 1].values[j - k])
                .sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    worst
}

/// Max over `n` of `sum_j p_{n-j}^{(n)} omega_{1+m alpha-alpha}(t_j) - pi_a omega_{1+m alpha}(t_n)`
/// with `pi_a = 3/2`; non-positive when the kernel bound holds.
pub fn p_bound_slack(
    comp: &ComplementaryKernels,
    mesh: &TimeMesh,
    alpha: FracOrder,
    m: u32,
) -> f64 {
    let a = alpha.value();
    let mu_lhs = 1.0 + m as f64 * a - a;
    let mu_rhs = 1.0 + m as f64 * a;
    let mut worst = f64::NEG_INFINITY;
    for n in 1..=comp.n_levels() {
        let lhs: f64 = (1..=n)
            .map(|j| comp.p(n, j) * omega(mu_lhs, mesh.node(j)))
            .sum();
        worst = worst.max(lhs - 1.5 * omega(mu_rhs, mesh.node(n)));
    }
    worst
}
