//! Verification harness: convergence orders, maximum-principle and energy
//! monitors, the Gronwall kernel identity suite, the kernel positivity probe
//! and the initial-singularity slope fit.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frackernel::kernels::{
    complementary_kernels, direct_kernel_row, fast_kernel_rows, identity_pa_deviation,
    p_bound_slack,
};
use crate::frackernel::soe::SoeApprox;
use crate::frackernel::FracOrder;
use crate::mesh::{concat_mesh, graded_mesh, random_tail_mesh, TimeMesh};
use crate::schemes::RunRecord;
use crate::spatial::Field;

/// One row of a temporal convergence table.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub n: usize,
    pub tau: f64,
    pub error: f64,
    /// Defined from the second row on.
    pub order: Option<f64>,
}

/// `Order = log(e(N)/e(2N)) / log(tau(N)/tau(2N))` for one refinement pair.
pub fn convergence_order(coarse: (f64, f64), fine: (f64, f64)) -> Result<f64> {
    let (tau_c, e_c) = coarse;
    let (tau_f, e_f) = fine;
    if tau_c == tau_f {
        return Err(Error::DegenerateOrder(tau_c));
    }
    Ok((e_c / e_f).ln() / (tau_c / tau_f).ln())
}

/// Fills the `order` column of a table sorted by decreasing `tau`.
pub fn fill_orders(rows: &mut [ConvergenceRow]) -> Result<()> {
    for i in 1..rows.len() {
        let order = convergence_order(
            (rows[i - 1].tau, rows[i - 1].error),
            (rows[i].tau, rows[i].error),
        )?;
        rows[i].order = Some(order);
    }
    Ok(())
}

/// Max-norm distance between a field and an exact solution at time `t`.
pub fn field_error_inf(u: &Field, t: f64, exact: &dyn Fn(f64, f64, f64) -> f64) -> f64 {
    let g = u.grid;
    let mut worst = 0.0f64;
    for j in 0..g.m2 {
        for i in 0..g.m1 {
            worst = worst.max((u.at(i, j) - exact(g.x(i), g.y(j), t)).abs());
        }
    }
    worst
}

/// Outcome of the discrete maximum-principle check `|u^n| <= 1 + 1e-12`.
#[derive(Debug, Clone, Copy)]
pub struct MaxPrincipleReport {
    pub max_norm: f64,
    pub first_violation: Option<usize>,
}

pub const MAX_PRINCIPLE_TOL: f64 = 1e-12;

pub fn max_principle_monitor(records: &[RunRecord]) -> MaxPrincipleReport {
    let mut max_norm = 0.0f64;
    let mut first_violation = None;
    for rec in records {
        max_norm = max_norm.max(rec.unorm);
        if first_violation.is_none() && rec.unorm > 1.0 + MAX_PRINCIPLE_TOL {
            first_violation = Some(rec.level);
        }
    }
    MaxPrincipleReport {
        max_norm,
        first_violation,
    }
}

/// Observational energy monitor: counts increases beyond `1e-10`.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    pub increases: usize,
    pub max_increase: f64,
    pub first_increase: Option<usize>,
}

pub const ENERGY_INCREASE_TOL: f64 = 1e-10;

pub fn energy_monitor(records: &[RunRecord]) -> EnergyReport {
    let mut increases = 0;
    let mut max_increase = 0.0f64;
    let mut first_increase = None;
    for w in records.windows(2) {
        let jump = w[1].energy - w[0].energy;
        if jump > ENERGY_INCREASE_TOL {
            increases += 1;
            max_increase = max_increase.max(jump);
            if first_increase.is_none() {
                first_increase = Some(w[1].level);
            }
        }
    }
    EnergyReport {
        increases,
        max_increase,
        first_increase,
    }
}

/// Exploratory probe of the L1 quadratic form: minimum eigenvalue of the
/// symmetrized kernel matrix `B_{kj} = a_{k-j}^{(k)}`. The sign on general
/// nonuniform meshes is an open question, so nothing is asserted here.
#[derive(Debug, Clone)]
pub struct PsdReport {
    pub mesh_min_eig: f64,
    /// (trial index, min eigenvalue) of the worst random mesh probed.
    pub worst_random: Option<(usize, f64)>,
}

pub fn psd_probe(mesh: &TimeMesh, alpha: FracOrder, trials: usize, seed: u64) -> PsdReport {
    let mesh_min_eig = kernel_matrix_min_eig(mesh, alpha);
    let mut worst_random: Option<(usize, f64)> = None;
    let n = mesh.n_steps();
    let t_final = mesh.final_time();
    for trial in 0..trials {
        let steps = random_tail_mesh(0.0, t_final, n, seed.wrapping_add(trial as u64))
            .expect("valid random mesh parameters");
        let head = TimeMesh::from_nodes(vec![0.0]).expect("trivial head");
        let random_mesh = concat_mesh(&head, &steps).expect("positive steps");
        let eig = kernel_matrix_min_eig(&random_mesh, alpha);
        if worst_random.is_none_or(|(_, w)| eig < w) {
            worst_random = Some((trial, eig));
        }
    }
    PsdReport {
        mesh_min_eig,
        worst_random,
    }
}

fn kernel_matrix_min_eig(mesh: &TimeMesh, alpha: FracOrder) -> f64 {
    let n = mesh.n_steps();
    assert!(n <= 512, "dense eigensolve capped at N = 512");
    let mut b = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        let row = direct_kernel_row(mesh, alpha, k);
        for j in 1..=k {
            b[(k - 1, j - 1)] = row.values[k - j];
        }
    }
    let sym = (&b + b.transpose()) * 0.5;
    nalgebra::SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Result of the complementary-kernel identity suite.
#[derive(Debug, Clone, Copy)]
pub struct GronwallReport {
    pub n: usize,
    pub pa_deviation: f64,
    pub m0_slack: f64,
    pub m1_slack: f64,
}

pub const PA_IDENTITY_TOL: f64 = 1e-12;

impl GronwallReport {
    pub fn passed(&self) -> bool {
        self.pa_deviation <= PA_IDENTITY_TOL && self.m0_slack <= 0.0 && self.m1_slack <= 0.0
    }
}

/// Builds all fast rows and complementary kernels on `mesh` and evaluates the
/// inverse identity and the `pi_a = 3/2` kernel bound for `m = 0, 1`.
pub fn gronwall_suite(mesh: &TimeMesh, alpha: FracOrder, soe: &SoeApprox) -> Result<GronwallReport> {
    let n = mesh.n_steps();
    let rows = fast_kernel_rows(mesh, soe, alpha, n);
    let comp = complementary_kernels(&rows)?;
    Ok(GronwallReport {
        n,
        pa_deviation: identity_pa_deviation(&rows, &comp),
        m0_slack: p_bound_slack(&comp, mesh, alpha, 0),
        m1_slack: p_bound_slack(&comp, mesh, alpha, 1),
    })
}

/// Log-log pairs and least-squares slope of the difference quotient
/// `|u^k - u^{k-1}|_inf / tau_k` versus the midpoint time, fitted over the
/// first `window_decades` decades of t.
#[derive(Debug, Clone)]
pub struct SingularityReport {
    /// (log10 midpoint time, log10 quotient) for every level with a positive
    /// quotient
    pub pairs: Vec<(f64, f64)>,
    pub slope: f64,
    pub window: (f64, f64),
    pub points_in_window: usize,
}

pub fn singularity_probe(records: &[RunRecord], window_decades: f64) -> Result<SingularityReport> {
    let mut pairs = Vec::new();
    for rec in records {
        let quotient = rec.change_inf / rec.tau;
        if quotient > 0.0 {
            let mid = rec.t - rec.tau / 2.0;
            pairs.push((mid.log10(), quotient.log10()));
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidParameter(
            "no positive difference quotients to fit".into(),
        ));
    }
    let t_lo = pairs[0].0;
    let t_hi = t_lo + window_decades;
    let in_window: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|(lt, _)| *lt <= t_hi)
        .collect();
    if in_window.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "singularity window [{t_lo}, {t_hi}] (log10) holds fewer than two levels"
        )));
    }
    // least squares slope
    let n = in_window.len() as f64;
    let sx: f64 = in_window.iter().map(|p| p.0).sum();
    let sy: f64 = in_window.iter().map(|p| p.1).sum();
    let sxx: f64 = in_window.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = in_window.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(SingularityReport {
        pairs,
        slope,
        window: (t_lo, t_hi),
        points_in_window: in_window.len(),
    })
}

/// Random nonuniform mesh helper shared by verification sweeps.
pub fn random_mesh_with_seed(n: usize, t_final: f64, seed: u64) -> TimeMesh {
    let steps = random_tail_mesh(0.0, t_final, n, seed).expect("valid parameters");
    let head = TimeMesh::from_nodes(vec![0.0]).expect("trivial head");
    concat_mesh(&head, &steps).expect("positive steps")
}

/// The three mesh families of the kernel identity criteria.
pub fn mesh_families(n: usize, t_final: f64, seed: u64) -> Vec<(String, TimeMesh)> {
    let uniform = graded_mesh(t_final, n, 1.0).expect("uniform mesh");
    let graded = graded_mesh(t_final, n, 3.0).expect("graded mesh");
    let random = random_mesh_with_seed(n, t_final, seed);
    vec![
        ("uniform".into(), uniform),
        ("graded-3".into(), graded),
        ("random".into(), random),
    ]
}
