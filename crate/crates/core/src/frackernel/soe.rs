//! Sum-of-exponentials compression of the kernel `omega_{1-alpha}(t)` on `[dt, T]`.
//!
//! The kernel is written through its Laplace-type representation
//! `omega_{1-alpha}(t) = (1/(Gamma(alpha) Gamma(1-alpha))) int_0^inf e^{-st} s^{alpha-1} ds`
//! and the integral is discretized by Gauss-Jacobi quadrature on `[0, 2^{j0}]`
//! (absorbing the `s^{alpha-1}` endpoint singularity) plus composite
//! Gauss-Legendre rules on dyadic blocks `[2^j, 2^{j+1}]` up to
//! `s_max ~ log(1/eps)/dt`. Per-block orders are raised until an a-posteriori
//! scan of the deviation passes the requested absolute tolerance.
//!
//! Rules are generated and certified in double-double arithmetic, then the
//! final nodes and weights are rounded once to f64; the certified deviation is
//! the true deviation of the shipped f64 mode set.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};

use super::dd::Dd;
use crate::error::{Error, Result};

/// Positive exponents/weights with `|omega_{1-alpha}(t) - sum w e^{-theta t}| <= eps`
/// on `[dt, t_final]`, verified by a dense scan at construction.
#[derive(Debug, Clone)]
pub struct SoeApprox {
    pub alpha: f64,
    pub eps: f64,
    pub dt: f64,
    pub t_final: f64,
    pub thetas: Vec<f64>,
    pub weights: Vec<f64>,
    /// Max deviation achieved on the construction scan grid.
    pub max_deviation: f64,
}

impl SoeApprox {
    pub fn n_modes(&self) -> usize {
        self.thetas.len()
    }

    /// Evaluates the exponential sum at `t` (plain f64; production path).
    pub fn eval(&self, t: f64) -> f64 {
        self.thetas
            .iter()
            .zip(&self.weights)
            .map(|(&th, &w)| w * (-th * t).exp())
            .sum()
    }
}

pub const DEFAULT_MODE_CAP: usize = 512;

/// Builds the SOE approximation with the default 512-mode cap.
pub fn build_soe(alpha: f64, eps: f64, dt: f64, t_final: f64) -> Result<SoeApprox> {
    build_soe_capped(alpha, eps, dt, t_final, DEFAULT_MODE_CAP)
}

pub fn build_soe_capped(
    alpha: f64,
    eps: f64,
    dt: f64,
    t_final: f64,
    cap: usize,
) -> Result<SoeApprox> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fractional order alpha = {alpha} outside (0,1)"
        )));
    }
    if !(dt > 0.0 && dt < t_final) {
        return Err(Error::InvalidParameter(format!(
            "SOE cutoff needs 0 < dt < T, got dt = {dt}, T = {t_final}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("SOE eps = {eps} <= 0")));
    }
    // Floor of reachable absolute deviation: the f64 rounding of a few
    // hundred positive weights alone perturbs the sum near t = dt by a small
    // multiple of ulp(omega(dt)), so tighter requests are not representable.
    // Meshes graded as hard as gamma = 4 at N = 512 hit this with the default
    // 1e-12 while omega(dt) ~ 1e6.
    let floor = 0.04 * f64::EPSILON * super::gamma::omega(1.0 - alpha, dt);
    let eps = eps.max(floor);

    let mut best = f64::INFINITY;
    // a-posteriori ladder. The dither shifts all block boundaries by a tiny
    // common factor: near the cutoff the deviation is dominated by the f64
    // rounding of a few hundred positive weights, and a boundary shift
    // re-rolls that rounding without changing the quadrature quality. Order
    // bumps handle genuinely unconverged blocks.
    for bump in (0..=6).step_by(2) {
        for dither in 0..6 {
            let (thetas, weights) = assemble(alpha, eps, dt, t_final, bump, dither);
            if thetas.len() > cap {
                return Err(Error::ToleranceUnachievable {
                    eps,
                    dt,
                    t_final,
                    cap,
                    best,
                });
            }
            let dev = scan_deviation(alpha, &thetas, &weights, dt, t_final, 4096);
            best = best.min(dev);
            // accept at 3/4 of the budget so excursions between scan points
            // and on finer certification grids stay inside eps
            if dev <= 0.75 * eps {
                return Ok(SoeApprox {
                    alpha,
                    eps,
                    dt,
                    t_final,
                    thetas,
                    weights,
                    max_deviation: dev,
                });
            }
        }
    }
    Err(Error::ToleranceUnachievable {
        eps,
        dt,
        t_final,
        cap,
        best,
    })
}

/// Max of `|omega_{1-alpha}(t) - sum w e^{-theta t}|` over a log grid of
/// `[dt, t_final]`, evaluated in double-double so the measurement resolves
/// deviations far below f64 noise at small `t`. This is the certification
/// oracle for a mode set.
pub fn scan_max_deviation(soe: &SoeApprox, npoints: usize) -> f64 {
    scan_deviation(
        soe.alpha,
        &soe.thetas,
        &soe.weights,
        soe.dt,
        soe.t_final,
        npoints,
    )
}

fn scan_deviation(
    alpha: f64,
    thetas: &[f64],
    weights: &[f64],
    dt: f64,
    t_final: f64,
    npoints: usize,
) -> f64 {
    let gamma_1ma = Dd::from(1.0 - alpha).gamma();
    let neg_alpha = Dd::from(-alpha);
    let ratio = (t_final / dt).ln();
    let mut worst = 0.0f64;
    for i in 0..npoints {
        let t = dt * (ratio * i as f64 / (npoints - 1) as f64).exp();
        let t = t.min(t_final);
        let om = Dd::from(t).powf(neg_alpha).div(gamma_1ma);
        let mut sum = Dd::ZERO;
        for (&th, &w) in thetas.iter().zip(weights) {
            if -th * t > -745.0 {
                // the exponent theta * t must be formed in dd: its f64
                // rounding alone would swamp the deviation budget
                sum = sum.add(Dd::from(th).mul_f64(-t).exp().mul_f64(w));
            }
        }
        let dev = om.sub(sum).to_f64().abs();
        if dev > worst {
            worst = dev;
        }
    }
    worst
}

/// One construction attempt: rounds the dd modes once to f64 and prunes
/// negligible contributors.
fn assemble(
    alpha: f64,
    eps: f64,
    dt: f64,
    t_final: f64,
    bump: usize,
    dither: usize,
) -> (Vec<f64>, Vec<f64>) {
    let (thetas, weights) = assemble_dd(alpha, eps, dt, t_final, bump, dither);
    let n_total = thetas.len();
    let mut th_out = Vec::with_capacity(n_total);
    let mut w_out = Vec::with_capacity(n_total);
    for (th, w) in thetas.into_iter().zip(weights) {
        let th_f = th.to_f64();
        let w_f = w.to_f64();
        if w_f * (-th_f * dt).exp() > eps * 1e-4 / n_total as f64 {
            th_out.push(th_f);
            w_out.push(w_f);
        }
    }
    (th_out, w_out)
}

/// Builds the quadrature modes in double-double, already scaled by
/// `1/(Gamma(alpha) Gamma(1-alpha))`.
fn assemble_dd(
    alpha: f64,
    eps: f64,
    dt: f64,
    t_final: f64,
    bump: usize,
    dither: usize,
) -> (Vec<Dd>, Vec<Dd>) {
    let alpha_dd = Dd::from(alpha);
    let gg = alpha_dd.gamma().mul(Dd::from(1.0 - alpha).gamma());
    let gg_f = gg.to_f64();
    let boundary_scale = 1.0 + dither as f64 * 2f64.powi(-10);

    // upper cutoff from the integrand tail at t = dt
    let tail_budget = eps * gg_f * 0.25;
    let mut x = 30.0f64;
    for _ in 0..60 {
        let smax = x / dt;
        x = (smax.powf(alpha - 1.0) / (dt * tail_budget)).max(2.0).ln();
    }
    let s_max = x / dt;

    let j0 = (1.0 / t_final).log2().floor() as i32 + 1;
    let j1 = (s_max.log2().ceil() as i32).max(j0);
    let n_blocks = (j1 - j0) as usize;

    // log-spaced sample times for the per-block tuners
    let samples: Vec<f64> = (0..25)
        .map(|i| dt * ((t_final / dt).ln() * i as f64 / 24.0).exp())
        .collect();

    let mut thetas: Vec<Dd> = Vec::new();
    let mut weights: Vec<Dd> = Vec::new();

    // Gauss-Jacobi block [0, c0]: absorbs the s^{alpha-1} weight exactly
    let c0 = 2.0f64.powi(j0) * boundary_scale;
    let jacobi = JacobiRecurrence::new(0.0, alpha - 1.0);
    let jac_budget = eps * gg_f * 0.125;
    let jac_rule = |n: usize| -> (Vec<Dd>, Vec<Dd>) {
        let (xs, ws) = gauss_rule(&jacobi, n);
        let half = Dd::from(c0 / 2.0);
        let scale = half.powf(alpha_dd);
        let s: Vec<Dd> = xs
            .iter()
            .map(|x| half.mul(x.add(Dd::ONE)))
            .collect();
        let w: Vec<Dd> = ws.iter().map(|w| w.mul(scale)).collect();
        (s, w)
    };
    let mut nj = 4;
    while nj < 64 && rule_distance(&jac_rule(nj), &jac_rule(nj + 8), &samples) > jac_budget {
        nj += 2;
    }
    let (s, w) = jac_rule(nj + bump);
    thetas.extend(s);
    weights.extend(w);

    // Gauss-Legendre dyadic blocks [2^j, 2^{j+1}]
    let legendre = JacobiRecurrence::new(0.0, 0.0);
    let mut leg_cache: HashMap<usize, (Vec<Dd>, Vec<Dd>)> = HashMap::new();
    let blk_budget = eps * gg_f * 0.5 / n_blocks.max(1) as f64;
    let exp_m1 = Dd::from(alpha - 1.0);
    for j in j0..j1 {
        let a = 2.0f64.powi(j) * boundary_scale;
        let b = 2.0 * a;
        let mid = Dd::from((a + b) / 2.0);
        let half = Dd::from((b - a) / 2.0);
        let mut block_rule = |n: usize| -> (Vec<Dd>, Vec<Dd>) {
            let (xs, ws) = leg_cache
                .entry(n)
                .or_insert_with(|| gauss_rule(&legendre, n))
                .clone();
            let s: Vec<Dd> = xs.iter().map(|x| mid.add(half.mul(*x))).collect();
            let w: Vec<Dd> = ws
                .iter()
                .zip(&s)
                .map(|(w, s)| w.mul(half).mul(s.powf(exp_m1)))
                .collect();
            (s, w)
        };
        let mut n = 4;
        while n < 48 && rule_distance(&block_rule(n), &block_rule(n + 8), &samples) > blk_budget {
            n += 2;
        }
        let (s, w) = block_rule(n + bump);
        thetas.extend(s);
        weights.extend(w);
    }

    let weights = weights.into_iter().map(|w| w.div(gg)).collect();
    (thetas, weights)
}

/// Max over sample times of the dd difference between two quadrature rules.
fn rule_distance(r1: &(Vec<Dd>, Vec<Dd>), r2: &(Vec<Dd>, Vec<Dd>), samples: &[f64]) -> f64 {
    let eval = |r: &(Vec<Dd>, Vec<Dd>), t: f64| -> Dd {
        let mut acc = Dd::ZERO;
        for (s, w) in r.0.iter().zip(&r.1) {
            let e = -s.to_f64() * t;
            if e > -745.0 {
                acc = acc.add(s.mul_f64(-t).exp().mul(*w));
            }
        }
        acc
    };
    samples
        .iter()
        .map(|&t| eval(r1, t).sub(eval(r2, t)).to_f64().abs())
        .fold(0.0, f64::max)
}

/// Three-term recurrence of monic Jacobi polynomials for weight
/// `(1-x)^a (1+x)^b` on `[-1, 1]`.
struct JacobiRecurrence {
    a: f64,
    b: f64,
}

impl JacobiRecurrence {
    fn new(a: f64, b: f64) -> Self {
        JacobiRecurrence { a, b }
    }

    fn mu0(&self) -> Dd {
        // 2^{a+b+1} Gamma(a+1) Gamma(b+1) / Gamma(a+b+2)
        Dd::from(2.0)
            .powf(Dd::from(self.a + self.b + 1.0))
            .mul(Dd::from(self.a + 1.0).gamma())
            .mul(Dd::from(self.b + 1.0).gamma())
            .div(Dd::from(self.a + self.b + 2.0).gamma())
    }

    fn alpha_k(&self, k: usize) -> Dd {
        let (a, b) = (self.a, self.b);
        if a == b {
            return Dd::ZERO;
        }
        if k == 0 {
            Dd::from(b - a).div(Dd::from(a + b + 2.0))
        } else {
            let kk = k as f64;
            let den = (2.0 * kk + a + b) * (2.0 * kk + a + b + 2.0);
            Dd::from(b * b - a * a).div(Dd::from(den))
        }
    }

    fn beta_k(&self, k: usize) -> Dd {
        let (a, b) = (self.a, self.b);
        match k {
            0 => self.mu0(),
            1 => Dd::from(4.0 * (1.0 + a) * (1.0 + b))
                .div(Dd::from((2.0 + a + b) * (2.0 + a + b)).mul(Dd::from(3.0 + a + b))),
            _ => {
                let kk = k as f64;
                let s = 2.0 * kk + a + b;
                Dd::from(4.0 * kk * (kk + a) * (kk + b) * (kk + a + b))
                    .div(Dd::from(s * s).mul(Dd::from((s + 1.0) * (s - 1.0))))
            }
        }
    }
}

/// Gauss rule on [-1,1]: f64 Golub-Welsch eigenvalues polished by dd Newton
/// iterations on the orthonormal polynomial; weights from the Christoffel sum.
fn gauss_rule(rec: &JacobiRecurrence, n: usize) -> (Vec<Dd>, Vec<Dd>) {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        m[(k, k)] = rec.alpha_k(k).to_f64();
    }
    for k in 1..n {
        let s = rec.beta_k(k).to_f64().sqrt();
        m[(k, k - 1)] = s;
        m[(k - 1, k)] = s;
    }
    let mut seeds: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    seeds.sort_by(|p, q| p.partial_cmp(q).unwrap());

    let alphas: Vec<Dd> = (0..n).map(|k| rec.alpha_k(k)).collect();
    let sqrt_betas: Vec<Dd> = (0..=n).map(|k| rec.beta_k(k).sqrt()).collect();
    let p0 = sqrt_betas[0].recip();

    // orthonormal recurrence values p_0..p_n and derivatives at x
    let eval = |x: Dd| -> (Vec<Dd>, Dd) {
        let mut p = Vec::with_capacity(n + 1);
        p.push(p0);
        let mut dp_prev = Dd::ZERO;
        let mut dp_cur = Dd::ZERO;
        let mut p_prev = Dd::ZERO;
        for k in 0..n {
            let xm = x.sub(alphas[k]);
            let p_next = xm.mul(p[k]).sub(sqrt_betas[k].mul(p_prev)).div(sqrt_betas[k + 1]);
            let dp_next = xm
                .mul(dp_cur)
                .add(p[k])
                .sub(sqrt_betas[k].mul(dp_prev))
                .div(sqrt_betas[k + 1]);
            p_prev = p[k];
            p.push(p_next);
            dp_prev = dp_cur;
            dp_cur = dp_next;
        }
        (p, dp_cur)
    };

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for seed in seeds {
        let mut x = Dd::from(seed);
        for _ in 0..4 {
            let (p, dp) = eval(x);
            x = x.sub(p[n].div(dp));
        }
        let (p, _) = eval(x);
        let mut chris = Dd::ZERO;
        for pk in p.iter().take(n) {
            chris = chris.add(pk.mul(*pk));
        }
        nodes.push(x);
        weights.push(chris.recip());
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frackernel::gamma::omega;

    #[test]
    #[ignore = "diagnostic profile of the hard certification case"]
    fn soe_hard_case_profile() {
        let (alpha, eps, dt, t_final) = (0.8f64, 1e-12f64, 1e-7f64, 100.0f64);
        let scan_dd = |th: &[Dd], w: &[Dd]| {
            let gamma_1ma = Dd::from(1.0 - alpha).gamma();
            let ratio = (t_final / dt).ln();
            let mut worst = (0.0f64, 0.0f64);
            for i in 0..2048 {
                let t = dt * (ratio * i as f64 / 2047.0).exp();
                let om = Dd::from(t).powf(Dd::from(-alpha)).div(gamma_1ma);
                let mut sum = Dd::ZERO;
                for (thj, wj) in th.iter().zip(w) {
                    let e = -thj.to_f64() * t;
                    if e > -745.0 {
                        sum = sum.add(thj.mul_f64(-t).exp().mul(*wj));
                    }
                }
                let dev = om.sub(sum).to_f64().abs();
                if dev > worst.0 {
                    worst = (dev, t);
                }
            }
            worst
        };
        for dither in 0..3 {
            let (th_dd, w_dd) = assemble_dd(alpha, eps, dt, t_final, 0, dither);
            let quad = scan_dd(&th_dd, &w_dd);
            let th_r: Vec<Dd> = th_dd.iter().map(|t| Dd::from(t.to_f64())).collect();
            let w_r: Vec<Dd> = w_dd.iter().map(|w| Dd::from(w.to_f64())).collect();
            let rounded = scan_dd(&th_r, &w_r);
            println!(
                "dither {dither}: Nq = {}, quadrature dev = {:.3e} at t = {:.3e}, \
                 rounded dev = {:.3e} at t = {:.3e}",
                th_dd.len(),
                quad.0,
                quad.1,
                rounded.0,
                rounded.1
            );
        }
    }

    #[test]
    fn gauss_legendre_rule_integrates_polynomials() {
        let leg = JacobiRecurrence::new(0.0, 0.0);
        let (x, w) = gauss_rule(&leg, 6);
        // degree-11 exactness: int x^10 = 2/11, int x^11 = 0
        let mut even = Dd::ZERO;
        let mut odd = Dd::ZERO;
        for (xi, wi) in x.iter().zip(&w) {
            let mut p = Dd::ONE;
            for _ in 0..10 {
                p = p.mul(*xi);
            }
            even = even.add(p.mul(*wi));
            odd = odd.add(p.mul(*xi).mul(*wi));
        }
        assert!((even.to_f64() - 2.0 / 11.0).abs() < 1e-28);
        assert!(odd.to_f64().abs() < 1e-28);
    }

    #[test]
    fn gauss_jacobi_rule_matches_moment() {
        // int_{-1}^1 (1+x)^{alpha-1} dx = 2^alpha / alpha
        let alpha = 0.6;
        let rec = JacobiRecurrence::new(0.0, alpha - 1.0);
        let (_, w) = gauss_rule(&rec, 8);
        let total: f64 = w.iter().map(|w| w.to_f64()).sum();
        assert!((total - 2f64.powf(alpha) / alpha).abs() < 1e-14);
    }

    #[test]
    fn soe_meets_tolerance_alpha_half() {
        let soe = build_soe(0.5, 1e-12, 1e-6, 1.0).unwrap();
        assert!(soe.max_deviation <= 1e-12, "dev {}", soe.max_deviation);
        assert!(soe.n_modes() <= DEFAULT_MODE_CAP);
        assert!(soe.thetas.iter().all(|&t| t > 0.0));
        assert!(soe.weights.iter().all(|&w| w > 0.0));
        // spot check against omega in the easy range
        for &t in &[1e-3, 0.1, 1.0] {
            assert!((soe.eval(t) - omega(0.5, t)).abs() < 2e-12);
        }
    }

    #[test]
    fn soe_mode_count_shrinks_with_loose_tolerance() {
        let tight = build_soe(0.5, 1e-12, 1e-6, 1.0).unwrap();
        let loose = build_soe(0.5, 1e-2, 1e-6, 1.0).unwrap();
        assert!(loose.n_modes() < tight.n_modes());
        assert!(loose.max_deviation <= 1e-2);
    }

    #[test]
    fn soe_rejects_bad_inputs() {
        assert!(build_soe(1.2, 1e-10, 1e-6, 1.0).is_err());
        assert!(build_soe(0.5, 1e-10, 1.0, 1.0).is_err());
        assert!(build_soe(0.5, -1.0, 1e-6, 1.0).is_err());
    }

    #[test]
    fn scan_detects_injected_weight_fault() {
        let mut soe = build_soe(0.5, 1e-10, 1e-4, 1.0).unwrap();
        assert!(scan_max_deviation(&soe, 2000) <= 1e-10);
        // corrupt one mid-range weight; the certification scan must see it
        let mid = soe.weights.len() / 2;
        soe.weights[mid] *= 1.0 + 1e-6;
        assert!(scan_max_deviation(&soe, 2000) > 1e-10);
    }

    #[test]
    fn unreachable_tolerance_reports_error() {
        match build_soe_capped(0.5, 1e-12, 1e-9, 100.0, 16) {
            Err(Error::ToleranceUnachievable { cap, .. }) => assert_eq!(cap, 16),
            other => panic!("expected ToleranceUnachievable, got {other:?}"),
        }
    }
}
