//! Fractional-derivative machinery: L1 kernels, sum-of-exponentials
//! compression, the fast history recursion, complementary Gronwall kernels
//! and the Mittag-Leffler function.

mod dd;
mod gamma;
pub mod history;
pub mod kernels;
pub mod mittag;
pub mod soe;

pub use gamma::{gamma, ln_gamma, omega};
pub use history::{fast_l1_apply, HistoryState};
pub use kernels::{
    a0_coeff, complementary_kernels, direct_kernel_row, direct_l1_apply, fast_kernel_row,
    fast_kernel_rows, identity_pa_deviation, p_bound_slack, ComplementaryKernels, DirectKernelRow,
    FastKernelRow,
};
pub use mittag::mittag_leffler;
pub use soe::{build_soe, build_soe_capped, scan_max_deviation, SoeApprox};

use crate::error::{Error, Result};

/// Extended-precision direct kernel row, immune to the cancellation that the
/// plain-f64 omega differences suffer on tiny cells. Verification use only.
pub fn dd_direct_kernel_row(nodes: &[f64], alpha: f64, n: usize) -> Vec<f64> {
    use dd::Dd;
    let g2 = Dd::from(2.0 - alpha).gamma();
    let one_m_alpha = Dd::from(1.0 - alpha);
    let tn = Dd::from(nodes[n]);
    let omega2 = |gap: Dd| gap.powf(one_m_alpha).div(g2);
    let mut values = vec![0.0; n];
    for k in 1..n {
        let tau = Dd::from(nodes[k]).sub(Dd::from(nodes[k - 1]));
        let upper = omega2(tn.sub(Dd::from(nodes[k - 1])));
        let lower = omega2(tn.sub(Dd::from(nodes[k])));
        values[n - k] = upper.sub(lower).div(tau).to_f64();
    }
    let tau_n = Dd::from(nodes[n]).sub(Dd::from(nodes[n - 1]));
    values[0] = tau_n.powf(Dd::from(-alpha)).div(Dd::from(2.0 - alpha).gamma()).to_f64();
    values
}

/// Validated fractional order `alpha` in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(alpha: f64) -> Result<FracOrder> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(FracOrder(alpha))
        } else {
            Err(Error::InvalidParameter(format!(
                "fractional order alpha = {alpha} outside (0,1)"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}
