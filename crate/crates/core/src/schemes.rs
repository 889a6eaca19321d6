//! Time-stepping schemes: fully implicit backward Euler with Picard iteration
//! and the stabilized semi-implicit scheme, plus the marching driver that owns
//! the SOE history state, adaptive step control, snapshots and diagnostics.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::frackernel::history::HistoryState;
use crate::frackernel::kernels::{a0_coeff, direct_kernel_row_nodes};
use crate::frackernel::soe::{build_soe, SoeApprox};
use crate::frackernel::{gamma, omega, FracOrder};
use crate::mesh::{adaptive_next_step, AdaptiveParams, TimeMesh};
use crate::spatial::{
    discrete_energy, inf_norm, inf_norm_slice, shifted_apply, Field, HelmholtzSolver, SolveMethod,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    BackwardEuler,
    Stabilized,
}

/// How the convolution history is evaluated during marching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryMode {
    /// O(N_q) exponential recursion (production path).
    Fast,
    /// O(n) direct kernels per level; the quadratic-cost oracle.
    Direct,
}

#[derive(Debug, Clone, Copy)]
pub struct SchemeConfig {
    pub alpha: FracOrder,
    pub eps2: f64,
    pub kind: SchemeKind,
    /// Stabilization scalar S; the maximum-principle guarantee needs S >= 2.
    pub stab: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub soe_eps: f64,
    pub solver_tol: f64,
    pub history: HistoryMode,
    pub solve_method: SolveMethod,
    /// Re-evaluate the discrete equation after each accepted step.
    pub check_residual: bool,
}

impl SchemeConfig {
    pub fn new(alpha: FracOrder, eps2: f64, kind: SchemeKind) -> SchemeConfig {
        SchemeConfig {
            alpha,
            eps2,
            kind,
            stab: if kind == SchemeKind::Stabilized { 2.0 } else { 0.0 },
            picard_tol: 1e-12,
            picard_max_iter: 200,
            soe_eps: 1e-12,
            solver_tol: 1e-13,
            history: HistoryMode::Fast,
            solve_method: SolveMethod::Fourier,
            check_residual: false,
        }
    }

    /// Step bound of the backward-Euler maximum principle,
    /// `tau <= Gamma(2-alpha)^{-1/alpha}`.
    pub fn max_principle_step_bound(&self) -> f64 {
        let a = self.alpha.value();
        gamma(2.0 - a).powf(-1.0 / a)
    }
}

/// Per-level diagnostics of a run.
#[derive(Debug, Clone, Copy)]
pub struct RunRecord {
    pub level: usize,
    pub t: f64,
    pub tau: f64,
    pub unorm: f64,
    pub energy: f64,
    pub iters: usize,
    /// max-norm of the accepted update `u^n - u^{n-1}`
    pub change_inf: f64,
    /// wall-clock seconds spent on this level
    pub wall: f64,
}

/// Time axis of a run: a fixed mesh, or a graded head with the adaptive
/// controller filling `[head end, t_end]`.
#[derive(Debug, Clone)]
pub enum TimeStepping {
    Fixed(TimeMesh),
    Adaptive {
        head: TimeMesh,
        params: AdaptiveParams,
        t_end: f64,
    },
}

impl TimeStepping {
    fn soe_cutoff(&self) -> f64 {
        match self {
            TimeStepping::Fixed(m) => m.tau_min(),
            TimeStepping::Adaptive { head, params, .. } => head.tau_min().min(params.tau_min),
        }
    }

    fn final_time(&self) -> f64 {
        match self {
            TimeStepping::Fixed(m) => m.final_time(),
            TimeStepping::Adaptive { t_end, .. } => *t_end,
        }
    }
}

pub struct MarchOutput {
    pub field: Field,
    pub records: Vec<RunRecord>,
    pub snapshots: Vec<(f64, Field)>,
    /// Realized time nodes (equals the fixed mesh, or head + controller steps).
    pub nodes: Vec<f64>,
    pub soe_modes: usize,
    pub soe_max_deviation: f64,
    pub warnings: Vec<String>,
}

/// Time-dependent source sampled once per level.
pub type SourceTimeFn = dyn Fn(f64) -> Field + Sync;

/// Adaptive steps may at most double between consecutive levels.
pub const STEP_GROWTH_CAP: f64 = 2.0;

/// One backward-Euler level: solves
/// `a0 u - eps^2 D_h u + u^3 - u = a0 u_prev - hterm + g`
/// by Picard iteration seeded with `u_prev`.
#[allow(clippy::too_many_arguments)]
pub fn backward_euler_step(
    solver: &mut HelmholtzSolver,
    cfg: &SchemeConfig,
    u_prev: &Field,
    hterm: &Field,
    a0: f64,
    g: Option<&Field>,
    level: usize,
    t: f64,
) -> Result<(Field, usize)> {
    let n = u_prev.values().len();
    let mut rhs0: Vec<f64> = u_prev
        .values()
        .iter()
        .zip(hterm.values())
        .map(|(&u, &h)| a0 * u - h)
        .collect();
    if let Some(g) = g {
        for (r, &gv) in rhs0.iter_mut().zip(g.values()) {
            *r += gv;
        }
    }
    let mut v = u_prev.clone();
    let mut v_next = Field::zeros(u_prev.grid);
    let mut b = vec![0.0; n];
    let mut increment = f64::INFINITY;
    for it in 1..=cfg.picard_max_iter {
        for ((bi, &r), &vi) in b.iter_mut().zip(&rhs0).zip(v.values()) {
            *bi = r - vi * vi * vi + vi;
        }
        solver.solve_into(a0, cfg.eps2, &b, v_next.values_mut())?;
        increment = max_abs_diff(v_next.values(), v.values());
        std::mem::swap(&mut v, &mut v_next);
        if increment <= cfg.picard_tol {
            return Ok((v, it));
        }
    }
    Err(Error::PicardDiverged {
        level,
        t,
        iters: cfg.picard_max_iter,
        increment,
    })
}

/// One stabilized semi-implicit level: a single solve of
/// `(a0 + S) u - eps^2 D_h u = (a0 + S) u_prev - f(u_prev) - hterm + g`.
pub fn stabilized_step(
    solver: &mut HelmholtzSolver,
    cfg: &SchemeConfig,
    u_prev: &Field,
    hterm: &Field,
    a0: f64,
    g: Option<&Field>,
) -> Result<Field> {
    let s = cfg.stab;
    let mut b: Vec<f64> = u_prev
        .values()
        .iter()
        .zip(hterm.values())
        .map(|(&ui, &h)| (a0 + s) * ui - (ui * ui * ui - ui) - h)
        .collect();
    if let Some(g) = g {
        for (bi, &gv) in b.iter_mut().zip(g.values()) {
            *bi += gv;
        }
    }
    let mut out = Field::zeros(u_prev.grid);
    solver.solve_into(a0 + s, cfg.eps2, &b, out.values_mut())?;
    Ok(out)
}

/// Exact-solution source of the manufactured problem
/// `u = omega_{1+sigma}(t) sin(2 pi x) sin(2 pi y)` with `eps^2 = 1/(8 pi^2)`:
/// `g = omega_{1+sigma-alpha}(t) phi + (omega_{1+sigma}(t) phi)^3`.
pub fn manufactured_source(alpha: FracOrder, sigma: f64, x: f64, y: f64, t: f64) -> f64 {
    let phi = (2.0 * std::f64::consts::PI * x).sin() * (2.0 * std::f64::consts::PI * y).sin();
    omega(1.0 + sigma - alpha.value(), t) * phi + (omega(1.0 + sigma, t) * phi).powi(3)
}

/// The manufactured exact solution itself.
pub fn manufactured_exact(sigma: f64, x: f64, y: f64, t: f64) -> f64 {
    omega(1.0 + sigma, t) * (2.0 * std::f64::consts::PI * x).sin()
        * (2.0 * std::f64::consts::PI * y).sin()
}

/// The interface parameter of the manufactured problem, `1/(8 pi^2)`.
pub fn manufactured_eps2() -> f64 {
    1.0 / (8.0 * std::f64::consts::PI * std::f64::consts::PI)
}

/// Marches from `t_0` to the final time, building the SOE once with cutoff
/// `dt = min step`, advancing the history each level and recording per-level
/// diagnostics. `observe` is called after every accepted step.
pub fn march(
    cfg: &SchemeConfig,
    stepping: &TimeStepping,
    u0: &Field,
    source: Option<&SourceTimeFn>,
    snapshot_times: &[f64],
    mut observe: impl FnMut(usize, f64, &Field),
) -> Result<MarchOutput> {
    if !u0.values().iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter(
            "initial data contains non-finite values".into(),
        ));
    }
    let grid = u0.grid;
    let ndof = grid.n_points();
    let t_end = stepping.final_time();
    let mut warnings = Vec::new();

    if cfg.kind == SchemeKind::Stabilized && cfg.stab < 2.0 {
        warnings.push(format!(
            "stabilization S = {} < 2: discrete maximum principle not guaranteed",
            cfg.stab
        ));
    }

    let zero_steps = match stepping {
        TimeStepping::Fixed(m) => m.n_steps() == 0,
        TimeStepping::Adaptive { head, t_end, .. } => {
            head.n_steps() == 0 && *t_end <= head.final_time()
        }
    };
    if zero_steps {
        return Ok(MarchOutput {
            field: u0.clone(),
            records: Vec::new(),
            snapshots: Vec::new(),
            nodes: vec![0.0],
            soe_modes: 0,
            soe_max_deviation: 0.0,
            warnings,
        });
    }

    let soe: Option<SoeApprox> = match cfg.history {
        HistoryMode::Fast => Some(build_soe(
            cfg.alpha.value(),
            cfg.soe_eps,
            stepping.soe_cutoff(),
            t_end,
        )?),
        HistoryMode::Direct => None,
    };
    let mut state = soe
        .as_ref()
        .map(|s| HistoryState::new(s.n_modes(), ndof));
    // direct mode keeps every accepted difference
    let mut diffs: Vec<Vec<f64>> = Vec::new();

    let mut solver = HelmholtzSolver::new(grid, cfg.solve_method, cfg.solver_tol);
    let mut u = u0.clone();
    let mut hterm = Field::zeros(grid);
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut snap_times: Vec<f64> = snapshot_times.to_vec();
    snap_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut snap_idx = 0;

    let step_bound = cfg.max_principle_step_bound();
    let mut warned_step_bound = false;

    let mut nodes = vec![0.0f64];
    let mut t = 0.0f64;
    let mut level = 0usize;
    let mut last_change = 0.0f64;
    let mut last_tau = f64::INFINITY;

    loop {
        // next step size
        let tau = match stepping {
            TimeStepping::Fixed(mesh) => {
                if level == mesh.n_steps() {
                    break;
                }
                let tk = mesh.node(level + 1);
                let tau = tk - t;
                t = tk;
                tau
            }
            TimeStepping::Adaptive {
                head,
                params,
                t_end,
            } => {
                if t >= *t_end {
                    break;
                }
                if level < head.n_steps() {
                    let tk = head.node(level + 1);
                    let tau = tk - t;
                    t = tk;
                    tau
                } else {
                    let mut tau = adaptive_next_step(last_change, params);
                    // ramp limiter: the causal controller reacts one level
                    // late, so an unchecked jump from the refined head to
                    // tau_max overshoots the dynamics and shows up as an
                    // energy transient
                    tau = tau.min(STEP_GROWTH_CAP * last_tau).max(params.tau_min);
                    // close the interval once the remainder is within one
                    // controller step plus its lower bound
                    if t + tau + params.tau_min >= *t_end {
                        tau = *t_end - t;
                        t = *t_end;
                    } else {
                        t += tau;
                    }
                    tau
                }
            }
        };
        level += 1;
        nodes.push(t);
        last_tau = tau;
        let started = Instant::now();

        if cfg.kind == SchemeKind::BackwardEuler && !warned_step_bound && tau > step_bound {
            warnings.push(format!(
                "step {tau:.3e} exceeds the maximum-principle bound {step_bound:.3e} at level {level}"
            ));
            warned_step_bound = true;
        }

        let a0 = a0_coeff(tau, cfg.alpha);

        // history term of this level
        match (&soe, &mut state) {
            (Some(soe), Some(state)) => state.weighted_term(soe, tau, hterm.values_mut()),
            _ => {
                // direct kernels over the accumulated nodes
                let row = direct_kernel_row_nodes(&nodes, cfg.alpha, level);
                hterm.values_mut().fill(0.0);
                for (k, diff) in diffs.iter().enumerate() {
                    let w = row[level - (k + 1)];
                    for (h, &d) in hterm.values_mut().iter_mut().zip(diff) {
                        *h += w * d;
                    }
                }
            }
        }

        let g_field = source.map(|s| s(t));
        let (u_next, iters) = match cfg.kind {
            SchemeKind::BackwardEuler => backward_euler_step(
                &mut solver,
                cfg,
                &u,
                &hterm,
                a0,
                g_field.as_ref(),
                level,
                t,
            )?,
            SchemeKind::Stabilized => (
                stabilized_step(&mut solver, cfg, &u, &hterm, a0, g_field.as_ref())?,
                1,
            ),
        };

        let diff: Vec<f64> = u_next
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| a - b)
            .collect();
        last_change = inf_norm_slice(&diff);

        if cfg.check_residual {
            check_step_residual(
                cfg, &u, &u_next, &hterm, a0, g_field.as_ref(), &diff, level,
            )?;
        }

        if let (Some(soe), Some(state)) = (&soe, &mut state) {
            state.advance(soe, &diff, tau);
        } else {
            diffs.push(diff);
        }
        u = u_next;

        records.push(RunRecord {
            level,
            t,
            tau,
            unorm: inf_norm(&u),
            energy: discrete_energy(&u, cfg.eps2),
            iters,
            change_inf: last_change,
            wall: started.elapsed().as_secs_f64(),
        });
        observe(level, t, &u);

        while snap_idx < snap_times.len() && t >= snap_times[snap_idx] - 1e-12 {
            snapshots.push((t, u.clone()));
            snap_idx += 1;
        }
    }

    Ok(MarchOutput {
        field: u,
        records,
        snapshots,
        nodes,
        soe_modes: soe.as_ref().map_or(0, |s| s.n_modes()),
        soe_max_deviation: soe.as_ref().map_or(0.0, |s| s.max_deviation),
        warnings,
    })
}

/// Recomputes the discrete equation of the accepted level and rejects the step
/// if its residual exceeds the combined Picard/solver budget.
#[allow(clippy::too_many_arguments)]
fn check_step_residual(
    cfg: &SchemeConfig,
    u_prev: &Field,
    u: &Field,
    hterm: &Field,
    a0: f64,
    g: Option<&Field>,
    diff: &[f64],
    level: usize,
) -> Result<()> {
    let grid = u.grid;
    let n = grid.n_points();
    let mut lap = vec![0.0; n];
    shifted_apply(grid, 0.0, -1.0, u.values(), &mut lap); // lap = D_h u
    let mut res = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        let ui = u.values()[i];
        let gv = g.map_or(0.0, |g| g.values()[i]);
        let r = match cfg.kind {
            SchemeKind::BackwardEuler => {
                a0 * diff[i] + hterm.values()[i] - cfg.eps2 * lap[i] + ui * ui * ui - ui - gv
            }
            SchemeKind::Stabilized => {
                let up = u_prev.values()[i];
                a0 * diff[i] + hterm.values()[i] - cfg.eps2 * lap[i] + up * up * up
                    - up
                    - gv
                    + cfg.stab * diff[i]
            }
        };
        res = res.max(r.abs());
        scale = scale.max((a0 + cfg.stab) * ui.abs() + gv.abs() + 2.0);
    }
    let budget = match cfg.kind {
        SchemeKind::BackwardEuler => 10.0 * (cfg.picard_tol + cfg.solver_tol * scale),
        SchemeKind::Stabilized => 10.0 * cfg.solver_tol * scale,
    };
    if res > budget {
        return Err(Error::AssumptionViolated(format!(
            "scheme residual {res:.3e} exceeds budget {budget:.3e} at level {level}"
        )));
    }
    Ok(())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
