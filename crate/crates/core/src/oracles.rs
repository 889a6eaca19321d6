//! Test-only quadrature oracle: tanh-sinh integration tolerating integrable
//! endpoint singularities. Used to validate kernels and the manufactured
//! source independently of the L1 machinery.
//!
//! The integrand receives the endpoint distances `(x - a, b - x)` computed
//! without cancellation; singular factors must be built from those distances,
//! otherwise the mass inside the last f64 ulp of an endpoint is lost.

/// Integrates `f(x, x - a, b - x)` over `[a, b]`, refining until two
/// consecutive levels agree to `tol` (mixed absolute/relative).
pub fn tanh_sinh(f: impl Fn(f64, f64, f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let d = 0.5 * (b - a);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut prev = f64::NAN;
    for level in 3..=12 {
        let h = 1.0 / f64::powi(2.0, level);
        let n = (6.0 / h) as i64;
        let mut sum = 0.0;
        for k in -n..=n {
            let u = k as f64 * h;
            let sh = half_pi * u.sinh();
            let w = half_pi * u.cosh() / sh.cosh().powi(2);
            if !(w > 1e-290) {
                continue;
            }
            // endpoint distances via the logistic form of 1 +- tanh(sh)
            let dist_a = 2.0 * d / (1.0 + (-2.0 * sh).exp());
            let dist_b = 2.0 * d / (1.0 + (2.0 * sh).exp());
            if dist_a <= 0.0 || dist_b <= 0.0 {
                continue;
            }
            let x = if sh <= 0.0 { a + dist_a } else { b - dist_b };
            sum += w * f(x, dist_a, dist_b);
        }
        let integral = sum * d * h;
        if (integral - prev).abs() <= tol * integral.abs().max(1.0) {
            return integral;
        }
        prev = integral;
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_integrand() {
        let got = tanh_sinh(|x, _, _| x.sin(), 0.0, std::f64::consts::PI, 1e-13);
        assert!((got - 2.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        // int_0^1 x^{-1/2} dx = 2
        let got = tanh_sinh(|_, xa, _| 1.0 / xa.sqrt(), 0.0, 1.0, 1e-13);
        assert!((got - 2.0).abs() < 1e-11, "{got}");
    }

    #[test]
    fn both_endpoints_singular() {
        // int_0^1 x^{-0.3} (1-x)^{-0.6} dx = B(0.7, 0.4)
        let want = crate::frackernel::gamma(0.7) * crate::frackernel::gamma(0.4)
            / crate::frackernel::gamma(1.1);
        let got = tanh_sinh(
            |_, xa, bx| xa.powf(-0.3) * bx.powf(-0.6),
            0.0,
            1.0,
            1e-13,
        );
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}
