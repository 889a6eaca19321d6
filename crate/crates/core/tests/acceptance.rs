//! Acceptance suite: every criterion below drives the complete stack through
//! the public API at the tolerances fixed in the experiment design, printing
//! one pass/fail line per criterion.
//!
//! Run with `cargo test -p tfac --test acceptance -- --nocapture` to watch
//! the lines stream; unattended `cargo test` prints them for failures only.

use std::sync::OnceLock;
use std::time::Instant;

use tfac::cli::{cmd_convergence, RunConfig, TableColumn};
use tfac::frackernel::soe::{build_soe, scan_max_deviation};
use tfac::frackernel::{
    a0_coeff, direct_l1_apply, fast_l1_apply, gamma, FracOrder, HistoryState,
};
use tfac::mesh::TimeMesh;
use tfac::schemes::{march, RunRecord, SchemeKind, TimeStepping};
use tfac::spatial::Field;
use tfac::verify::{
    energy_monitor, gronwall_suite, max_principle_monitor, mesh_families, singularity_probe,
    ENERGY_INCREASE_TOL,
};

fn ensure(criterion: u32, ok: bool, detail: &str) {
    if !ok {
        println!("criterion {criterion}: FAIL — {detail}");
        panic!("criterion {criterion} failed: {detail}");
    }
}

fn pass(criterion: u32, detail: &str) {
    println!("criterion {criterion}: PASS — {detail}");
}

fn run_table(preset: &str) -> Vec<TableColumn> {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut cfg = RunConfig::preset(preset).expect("preset");
    cfg.out_dir = dir.path().to_path_buf();
    cmd_convergence(&cfg).expect("convergence run")
}

fn orders(col: &TableColumn) -> Vec<f64> {
    col.rows.iter().filter_map(|r| r.order).collect()
}

/// Criterion 1: backward-Euler Table-1 reproduction at alpha = sigma = 0.8,
/// M = 256: orders of the two finest refinement pairs within +-0.2 of the
/// printed table (the N = 128 pair is a single pre-asymptotic draw of the
/// random tail and is reported, not asserted), errors within a factor 3 for
/// every row, wall time within five minutes.
#[test]
fn criterion_1_table1_backward_euler() {
    let printed_orders = [
        (1.25, [0.91, 1.04, 0.97]),
        (1.5, [1.15, 1.17, 1.17]),
        (2.0, [1.07, 1.18, 1.19]),
    ];
    let printed_errors = [
        (1.25, [3.57e-3, 1.83e-3, 9.18e-4, 4.59e-4]),
        (1.5, [2.65e-3, 1.24e-3, 5.68e-4, 2.59e-4]),
        (2.0, [2.33e-3, 9.79e-4, 4.32e-4, 1.94e-4]),
    ];
    let started = Instant::now();
    let columns = run_table("table1");
    let elapsed = started.elapsed().as_secs_f64();
    for (col, ((g1, want_orders), (g2, want_errors))) in columns
        .iter()
        .zip(printed_orders.iter().zip(printed_errors.iter()))
    {
        assert_eq!(col.gamma, *g1);
        assert_eq!(col.gamma, *g2);
        let got = orders(col);
        println!(
            "criterion 1: gamma {} orders {:?} (printed {:?})",
            col.gamma, got, want_orders
        );
        for (row, (o, w)) in got.iter().zip(want_orders).enumerate().skip(1) {
            ensure(
                1,
                (o - w).abs() <= 0.2,
                &format!(
                    "gamma {} order row {}: {:.3} vs printed {} (tolerance 0.2)",
                    col.gamma, row, o, w
                ),
            );
        }
        for (row, w) in col.rows.iter().zip(want_errors) {
            let ratio = row.error / w;
            ensure(
                1,
                (1.0 / 3.0..=3.0).contains(&ratio),
                &format!(
                    "gamma {} N {}: error {:.3e} vs printed {:.3e} (factor {:.2})",
                    col.gamma, row.n, row.error, w, ratio
                ),
            );
        }
    }
    ensure(
        1,
        elapsed <= 300.0,
        &format!("table took {elapsed:.1} s > 300 s"),
    );
    let last: Vec<String> = columns
        .iter()
        .map(|c| format!("gamma {} final order {:.2}", c.gamma, *orders(c).last().unwrap()))
        .collect();
    pass(1, &format!("{} in {elapsed:.0} s", last.join(", ")));
}

/// Criterion 2: Table-2 reproduction at sigma = 0.4; final orders near 0.8
/// (gamma 2) and 1.2 (gamma 3, 4).
#[test]
fn criterion_2_table2_low_regularity() {
    let columns = run_table("table2");
    let targets = [(2.0, 0.8), (3.0, 1.2), (4.0, 1.2)];
    let mut summary = Vec::new();
    for (col, (g, want)) in columns.iter().zip(targets.iter()) {
        assert_eq!(col.gamma, *g);
        let got = *orders(col).last().unwrap();
        ensure(
            2,
            (got - want).abs() <= 0.2,
            &format!("gamma {g}: final order {got:.3} vs target {want} (tolerance 0.2)"),
        );
        summary.push(format!("gamma {g}: {got:.2}"));
    }
    pass(2, &summary.join(", "));
}

/// Criterion 3: stabilized-scheme Tables 3 and 4; final orders near
/// min(gamma sigma, 1), plus the printed reference cell of Table 4.
#[test]
fn criterion_3_tables_3_4_stabilized() {
    let mut summary = Vec::new();
    for preset in ["table3", "table4"] {
        let columns = run_table(preset);
        let cfg = RunConfig::preset(preset).unwrap();
        for col in &columns {
            let want = (col.gamma * cfg.sigma).min(1.0);
            let got = *orders(col).last().unwrap();
            ensure(
                3,
                (got - want).abs() <= 0.2,
                &format!(
                    "{preset} gamma {}: final order {got:.3} vs min(gamma*sigma,1) = {want} \
                     (tolerance 0.2)",
                    col.gamma
                ),
            );
            summary.push(format!("{preset} gamma {}: {got:.2}", col.gamma));
            if preset == "table4" && col.gamma == 2.5 {
                let e512 = col.rows.last().unwrap().error;
                let ratio = e512 / 1.94e-3;
                ensure(
                    3,
                    (1.0 / 3.0..=3.0).contains(&ratio),
                    &format!("table4 gamma 2.5 N=512: error {e512:.3e} vs printed 1.94e-3"),
                );
            }
        }
    }
    pass(3, &summary.join(", "));
}

struct BubbleRun {
    kind: SchemeKind,
    alpha: f64,
    records: Vec<RunRecord>,
    snap30: Option<Field>,
}

/// The six coarsening runs at the published settings, shared by criteria
/// 4, 9 and 10.
fn bubble_runs() -> &'static Vec<BubbleRun> {
    static CACHE: OnceLock<Vec<BubbleRun>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let mut runs = Vec::new();
        for (kind, scheme_line) in [
            (SchemeKind::BackwardEuler, "scheme = backward-euler"),
            (SchemeKind::Stabilized, "scheme = stabilized"),
        ] {
            for alpha in [0.4, 0.7, 0.9] {
                let text = format!("experiment = bubbles\n{scheme_line}\nalpha = {alpha}\n");
                let cfg = RunConfig::load_str(&text, "bubbles").expect("bubble config");
                let sc = cfg.scheme_config().expect("scheme config");
                let stepping = cfg.stepping().expect("stepping");
                let u0 = cfg.initial_field().expect("initial field");
                let out = march(&sc, &stepping, &u0, None, &[30.0], |_, _, _| {})
                    .expect("bubble march");
                runs.push(BubbleRun {
                    kind,
                    alpha,
                    snap30: out.snapshots.first().map(|(_, f)| f.clone()),
                    records: out.records,
                });
            }
        }
        runs
    })
}

/// Criterion 4: discrete maximum principle on every bubble run, both schemes,
/// alpha in {0.4, 0.7, 0.9}, hard 1 + 1e-12 bound at every level.
#[test]
fn criterion_4_maximum_principle() {
    let mut worst: f64 = 0.0;
    for run in bubble_runs() {
        let rep = max_principle_monitor(&run.records);
        ensure(
            4,
            rep.first_violation.is_none(),
            &format!(
                "{:?} alpha {}: |u| = {:.15} violates at level {:?}",
                run.kind, run.alpha, rep.max_norm, rep.first_violation
            ),
        );
        worst = worst.max(rep.max_norm);
    }
    pass(
        4,
        &format!("6 runs, max over all levels |u| = {worst:.12} <= 1 + 1e-12"),
    );
}

/// Criterion 9: initial-singularity slope of the backward-Euler alpha = 0.7
/// bubble run; the fit over the first decade lands within 0.1 of alpha - 1.
#[test]
fn criterion_9_singularity_slope() {
    let run = bubble_runs()
        .iter()
        .find(|r| r.kind == SchemeKind::BackwardEuler && r.alpha == 0.7)
        .unwrap();
    let rep = singularity_probe(&run.records, 1.0).expect("slope fit");
    ensure(
        9,
        (rep.slope - (-0.3)).abs() <= 0.1,
        &format!(
            "slope {:.4} vs alpha - 1 = -0.3 (tolerance 0.1, {} points)",
            rep.slope, rep.points_in_window
        ),
    );
    pass(
        9,
        &format!(
            "slope {:.4} ~ alpha - 1 = -0.3 over log10 t in [{:.2}, {:.2}]",
            rep.slope, rep.window.0, rep.window.1
        ),
    );
}

/// Criterion 10: observational energy record; no increase above 1e-10 in any
/// bubble run.
#[test]
fn criterion_10_energy_observation() {
    let mut max_jump: f64 = 0.0;
    for run in bubble_runs() {
        let rep = energy_monitor(&run.records);
        ensure(
            10,
            rep.increases == 0,
            &format!(
                "{:?} alpha {}: {} energy increases (max {:.3e} > {ENERGY_INCREASE_TOL:.0e}) \
                 first at level {:?}",
                run.kind, run.alpha, rep.increases, rep.max_increase, rep.first_increase
            ),
        );
        max_jump = max_jump.max(rep.max_increase);
    }
    pass(10, "6 runs, zero energy increases above 1e-10");
}

/// Larger fractional order coalesces faster: the neck between the bubbles is
/// further filled at t = 30 for alpha 0.9 than for alpha 0.4.
#[test]
fn bubbles_coalescence_order_in_alpha() {
    let neck_mean = |f: &Field| {
        let g = f.grid;
        let mut acc = 0.0;
        let mut count = 0;
        for j in 0..g.m2 {
            for i in 0..g.m1 {
                let (x, y) = (g.x(i), g.y(j));
                if x.abs() <= 0.2 && (0.7..=1.1).contains(&y.abs()) {
                    acc += f.at(i, j);
                    count += 1;
                }
            }
        }
        acc / count as f64
    };
    let run = |alpha: f64| {
        bubble_runs()
            .iter()
            .find(|r| r.kind == SchemeKind::BackwardEuler && r.alpha == alpha)
            .and_then(|r| r.snap30.as_ref())
            .expect("t = 30 snapshot")
    };
    let slow = neck_mean(run(0.4));
    let fast = neck_mean(run(0.9));
    assert!(
        fast > slow,
        "neck fill at t = 30: alpha 0.9 -> {fast:.4}, alpha 0.4 -> {slow:.4}"
    );
}

/// Criterion 5: marching N = 128 with the fast and the direct history
/// evaluators on three mesh families; solutions agree to 1e5 * eps.
#[test]
fn criterion_5_fast_vs_direct() {
    let budget = 1e5 * 1e-12;
    let mut worst: f64 = 0.0;
    for (name, mesh) in mesh_families(128, 1.0, 1) {
        let diff = run_both_histories(&mesh);
        ensure(
            5,
            diff <= budget,
            &format!("mesh {name}: fast/direct difference {diff:.3e} > {budget:.1e}"),
        );
        worst = worst.max(diff);
    }
    pass(
        5,
        &format!("max fast/direct difference {worst:.3e} <= 1e-7 on three mesh families"),
    );
}

fn run_both_histories(mesh: &TimeMesh) -> f64 {
    use tfac::schemes::{HistoryMode, SchemeConfig};
    use tfac::spatial::Grid2D;
    let grid = Grid2D::square(32, 0.0, 1.0).unwrap();
    let u0 = Field::from_fn(grid, |x, y| {
        0.4 * (2.0 * std::f64::consts::PI * x).sin() * (2.0 * std::f64::consts::PI * y).sin()
            + 0.3 * (2.0 * std::f64::consts::PI * y).cos()
    });
    let run = |history: HistoryMode| {
        let mut sc = SchemeConfig::new(
            FracOrder::new(0.5).unwrap(),
            0.01,
            SchemeKind::BackwardEuler,
        );
        sc.history = history;
        let mut fields = Vec::new();
        march(
            &sc,
            &TimeStepping::Fixed(mesh.clone()),
            &u0,
            None,
            &[],
            |_, _, u| fields.push(u.clone()),
        )
        .unwrap();
        fields
    };
    let fast = run(HistoryMode::Fast);
    let direct = run(HistoryMode::Direct);
    let mut worst = 0.0f64;
    for (a, b) in fast.iter().zip(&direct) {
        for (x, y) in a.values().iter().zip(b.values()) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

/// Criterion 6: complementary-kernel identities on three mesh families,
/// N = 128, alpha in {0.3, 0.5, 0.8}.
#[test]
fn criterion_6_kernel_identity_suite() {
    let mut worst_pa: f64 = 0.0;
    for &alpha in &[0.3, 0.5, 0.8] {
        let frac = FracOrder::new(alpha).unwrap();
        for (name, mesh) in mesh_families(128, 1.0, 1) {
            let soe = build_soe(alpha, 1e-12, mesh.tau_min(), mesh.final_time()).unwrap();
            let rep = gronwall_suite(&mesh, frac, &soe).unwrap();
            ensure(
                6,
                rep.pa_deviation <= 1e-12,
                &format!(
                    "alpha {alpha} mesh {name}: inverse identity deviation {:.3e} > 1e-12",
                    rep.pa_deviation
                ),
            );
            ensure(
                6,
                rep.m0_slack <= 0.0 && rep.m1_slack <= 0.0,
                &format!(
                    "alpha {alpha} mesh {name}: kernel bound exceeded (m=0: {:.3e}, m=1: {:.3e})",
                    rep.m0_slack, rep.m1_slack
                ),
            );
            worst_pa = worst_pa.max(rep.pa_deviation);
        }
    }
    pass(
        6,
        &format!("9 mesh/alpha combinations, worst identity deviation {worst_pa:.3e}"),
    );
}

/// Criterion 7: SOE certification on the stated parameter pairs, 10^4-point
/// log-grid scan within the absolute tolerance.
#[test]
fn criterion_7_soe_certification() {
    let mut summary = Vec::new();
    for (alpha, eps, dt, t_final) in [(0.5, 1e-12, 1e-6, 1.0), (0.8, 1e-12, 1e-7, 100.0)] {
        let soe = build_soe(alpha, eps, dt, t_final).expect("SOE build");
        let dev = scan_max_deviation(&soe, 10_000);
        ensure(
            7,
            dev <= eps,
            &format!(
                "alpha {alpha}, dt {dt:.0e}, T {t_final}: deviation {dev:.3e} > {eps:.0e} \
                 (Nq = {})",
                soe.n_modes()
            ),
        );
        summary.push(format!(
            "alpha {alpha}: Nq = {}, dev = {dev:.2e}",
            soe.n_modes()
        ));
    }
    pass(7, &summary.join("; "));
}

/// Criterion 8: the L1 operators reproduce the Caputo derivative of v(t) = t
/// exactly (1e-12 relative) at every level on all mesh families.
#[test]
fn criterion_8_l1_exactness_on_linear() {
    let mut worst: f64 = 0.0;
    for &alpha in &[0.3, 0.7] {
        let frac = FracOrder::new(alpha).unwrap();
        for (name, mesh) in mesh_families(64, 1.0, 2) {
            let soe = build_soe(alpha, 1e-12, mesh.tau_min(), mesh.final_time()).unwrap();
            let mut state = HistoryState::new(soe.n_modes(), 1);
            let mut diffs = Vec::new();
            for n in 1..=mesh.n_steps() {
                let tau = mesh.tau(n);
                diffs.push(tau);
                let want = mesh.node(n).powf(1.0 - alpha) / gamma(2.0 - alpha);
                let direct = direct_l1_apply(&mesh, frac, &diffs);
                let fast = fast_l1_apply(&state, &soe, a0_coeff(tau, frac), tau, tau);
                let rel_d = ((direct - want) / want).abs();
                let rel_f = ((fast - want) / want).abs();
                ensure(
                    8,
                    rel_d <= 1e-12 && rel_f <= 1e-12,
                    &format!(
                        "alpha {alpha} mesh {name} level {n}: direct rel {rel_d:.3e}, \
                         fast rel {rel_f:.3e}"
                    ),
                );
                worst = worst.max(rel_d.max(rel_f));
                state.advance(&soe, &[tau], tau);
            }
        }
    }
    pass(
        8,
        &format!("both operators exact on v = t, worst relative error {worst:.3e}"),
    );
}

/// Degenerate zero-step march returns the initial state untouched (used by
/// the error harness contract).
#[test]
fn zero_step_error_is_zero() {
    let cfg = RunConfig::load_str("grid.M = 8\n", "table1").unwrap();
    let sc = cfg.scheme_config().unwrap();
    let u0 = cfg.initial_field().unwrap();
    let mesh = TimeMesh::from_nodes(vec![0.0]).unwrap();
    let mut max_err = 0.0f64;
    let out = march(&sc, &TimeStepping::Fixed(mesh), &u0, None, &[], |_, t, u| {
        max_err = max_err.max(tfac::verify::field_error_inf(u, t, &|x, y, tt| {
            tfac::schemes::manufactured_exact(0.8, x, y, tt)
        }));
    })
    .unwrap();
    assert_eq!(out.records.len(), 0);
    assert_eq!(max_err, 0.0);
}
