//! Double-double arithmetic for the kernel-compression verification path.
//!
//! The sum-of-exponentials certification compares `omega_{1-alpha}(t)` against
//! a few hundred exponential terms whose total can exceed 1e5 while the target
//! deviation is 1e-12; plain f64 evaluation noise alone is larger than that
//! budget, so quadrature rules and the deviation scan are computed in ~31-digit
//! double-double arithmetic. None of this runs in the time-stepping path.

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, f64::mul_add(a, b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319_046_813_846_299_6e-17,
    };
    const HALF_LN_2PI: Dd = Dd {
        hi: 0.918_938_533_204_672_8,
        lo: -3.878_294_158_067_241_4e-17,
    };

    #[inline]
    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, b: Dd) -> Dd {
        self.add(Dd {
            hi: -b.hi,
            lo: -b.lo,
        })
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + self.hi * b.lo + self.lo * b.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p1, p2 + self.lo * b);
        Dd { hi, lo }
    }

    pub fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self.sub(b.mul_f64(q1));
        let q2 = r.hi / b.hi;
        let r = r.sub(b.mul_f64(q2));
        let q3 = r.hi / b.hi;
        let (s, e) = quick_two_sum(q1, q2);
        let (hi, lo) = quick_two_sum(s, e + q3);
        Dd { hi, lo }
    }

    pub fn recip(self) -> Dd {
        Dd::ONE.div(self)
    }

    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        let y = Dd::from(self.hi.sqrt());
        // one dd Newton step doubles the f64 seed's digits twice over
        y.add(self.div(y)).mul_f64(0.5)
    }

    /// exp(x) for |x| <= ~745; underflows to zero below that.
    pub fn exp(self) -> Dd {
        let x = self.to_f64();
        if x < -745.0 {
            return Dd::ZERO;
        }
        let k = (x / std::f64::consts::LN_2).round();
        let r = self.sub(Dd::LN2.mul_f64(k));
        // Taylor on |r| <= ln2/2; 26 terms reach the dd roundoff floor.
        // Powers and factorials are kept in dd (factorials stay exact there).
        let mut rp = r;
        let mut fact = Dd::ONE;
        let mut sum = Dd::ONE.add(r);
        for n in 2..=26 {
            rp = rp.mul(r);
            fact = fact.mul_f64(n as f64);
            sum = sum.add(rp.div(fact));
        }
        let scale = f64::powi(2.0, k as i32);
        Dd {
            hi: sum.hi * scale,
            lo: sum.lo * scale,
        }
    }

    /// ln(x) for x > 0: one dd Newton correction of the f64 logarithm.
    pub fn ln(self) -> Dd {
        debug_assert!(self.hi > 0.0);
        let y = Dd::from(self.to_f64().ln());
        y.add(self.mul(y.neg().exp())).sub(Dd::ONE)
    }

    /// x^p for x > 0.
    pub fn powf(self, p: Dd) -> Dd {
        self.ln().mul(p).exp()
    }

    /// Gamma(z) for 0 < z <= ~40: argument shift to w >= 30.5 plus the
    /// Stirling series with Bernoulli corrections through B_34.
    pub fn gamma(self) -> Dd {
        // B_{2k} as exact integer ratios, k = 1..17
        const BERN: [(f64, f64); 17] = [
            (1.0, 6.0),
            (-1.0, 30.0),
            (1.0, 42.0),
            (-1.0, 30.0),
            (5.0, 66.0),
            (-691.0, 2730.0),
            (7.0, 6.0),
            (-3617.0, 510.0),
            (43867.0, 798.0),
            (-174611.0, 330.0),
            (854513.0, 138.0),
            (-236364091.0, 2730.0),
            (8553103.0, 6.0),
            (-23749461029.0, 870.0),
            (8615841276005.0, 14322.0),
            (-7709321041217.0, 510.0),
            (2577687858367.0, 6.0),
        ];
        debug_assert!(self.hi > 0.0);
        let shift = ((30.5 - self.hi).ceil()).max(0.0) as usize;
        let w = self.add(Dd::from(shift as f64));
        // ln Gamma(w) = (w - 1/2) ln w - w + ln(2 pi)/2 + sum B_2k/(2k(2k-1) w^{2k-1})
        let lnw = w.ln();
        let mut lg = w.sub(Dd::from(0.5)).mul(lnw).sub(w).add(Dd::HALF_LN_2PI);
        let w2 = w.mul(w).recip();
        let mut wpow = w.recip();
        for (k, (num, den)) in BERN.iter().enumerate() {
            let two_k = 2.0 * (k + 1) as f64;
            lg = lg.add(
                Dd::from(*num)
                    .div(Dd::from(*den * two_k * (two_k - 1.0)))
                    .mul(wpow),
            );
            wpow = wpow.mul(w2);
        }
        let mut g = lg.exp();
        for i in 0..shift {
            g = g.div(self.add(Dd::from(i as f64)));
        }
        g
    }
}
