//! Test-only extended precision: complex fixed point with 90 decimal digits.

#![allow(dead_code)]

use dysonprop::C64;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

fn scale() -> BigInt {
    num_traits::pow(BigInt::from(10), 90)
}

#[derive(Clone, Debug)]
pub struct Fx {
    re: BigInt,
    im: BigInt,
}

fn real_from_f64(x: f64) -> BigInt {
    assert!(x.is_finite());
    if x == 0.0 {
        return BigInt::zero();
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    let m = BigInt::from(mant) * scale();
    let v = if e >= 0 { m << (e as usize) } else { m >> ((-e) as usize) };
    v * sign
}

fn real_to_f64(x: &BigInt) -> f64 {
    // 30 significant digits are plenty to round to f64.
    let shift = num_traits::pow(BigInt::from(10), 60);
    let q = x / &shift;
    q.to_f64().unwrap() / 1e30
}

impl Fx {
    pub fn from_c64(z: C64) -> Self {
        Fx { re: real_from_f64(z.re), im: real_from_f64(z.im) }
    }

    pub fn zero() -> Self {
        Fx { re: BigInt::zero(), im: BigInt::zero() }
    }

    pub fn one() -> Self {
        Fx { re: scale(), im: BigInt::zero() }
    }

    pub fn to_c64(&self) -> C64 {
        C64::new(real_to_f64(&self.re), real_to_f64(&self.im))
    }

    pub fn add(&self, o: &Fx) -> Fx {
        Fx { re: &self.re + &o.re, im: &self.im + &o.im }
    }

    pub fn sub(&self, o: &Fx) -> Fx {
        Fx { re: &self.re - &o.re, im: &self.im - &o.im }
    }

    pub fn mul(&self, o: &Fx) -> Fx {
        let s = scale();
        Fx {
            re: (&self.re * &o.re - &self.im * &o.im) / &s,
            im: (&self.re * &o.im + &self.im * &o.re) / &s,
        }
    }

    pub fn div(&self, o: &Fx) -> Fx {
        let s = scale();
        let den = (&o.re * &o.re + &o.im * &o.im) / &s;
        assert!(!den.is_zero(), "division by zero in oracle");
        let num_re = (&self.re * &o.re + &self.im * &o.im) / &s;
        let num_im = (&self.im * &o.re - &self.re * &o.im) / &s;
        Fx { re: num_re * &s / &den, im: num_im * &s / &den }
    }

    pub fn div_int(&self, k: u64) -> Fx {
        Fx { re: &self.re / k, im: &self.im / k }
    }

    fn negligible(&self) -> bool {
        let tol = num_traits::pow(BigInt::from(10), 2);
        self.re.abs() < tol && self.im.abs() < tol
    }

    /// exp(w) by Taylor series.
    pub fn exp(&self) -> Fx {
        let mut sum = Fx::one();
        let mut term = Fx::one();
        for k in 1..2000u64 {
            term = term.mul(self).div_int(k);
            sum = sum.add(&term);
            if term.negligible() && k > 5 {
                break;
            }
        }
        sum
    }
}

/// exp(-i z t) in extended precision.
pub fn phase(z: &Fx, t: f64) -> Fx {
    let minus_it = Fx::from_c64(C64::new(0.0, -t));
    minus_it.mul(z).exp()
}

/// Partial-fraction divided difference of exp(-i E t) for distinct nodes.
pub fn dd_phase_oracle(nodes: &[C64], t: f64) -> C64 {
    let z: Vec<Fx> = nodes.iter().map(|&w| Fx::from_c64(w)).collect();
    let mut sum = Fx::zero();
    for i in 0..z.len() {
        let mut den = Fx::one();
        for j in 0..z.len() {
            if i != j {
                den = den.mul(&z[i].sub(&z[j]));
            }
        }
        sum = sum.add(&phase(&z[i], t).div(&den));
    }
    sum.to_c64()
}

#[test]
fn oracle_reproduces_exp() {
    let v = phase(&Fx::from_c64(C64::new(1.0, 0.0)), 1.0).to_c64();
    assert!((v - C64::new(1f64.cos(), -1f64.sin())).norm() < 1e-16);
    let _ = BigInt::one();
}
