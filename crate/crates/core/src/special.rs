//! Complex exponential integral `E1(z) = int_z^inf e^{-s}/s ds` (principal
//! branch), used for the analytic high-energy tail of Fourier integrals.

use crate::C64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub(crate) fn expint_e1(z: C64) -> C64 {
    assert!(z != C64::new(0.0, 0.0), "E1 is singular at the origin");
    if z.norm() <= 2.0 {
        series(z)
    } else {
        continued_fraction(z)
    }
}

fn series(z: C64) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    let mut term = C64::new(1.0, 0.0);
    for k in 1..200 {
        term *= -z / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.norm() < 1e-17 * sum.norm().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - z.ln() - sum
}

/// Modified Lentz evaluation of
/// `E1(z) = e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...)))`.
fn continued_fraction(z: C64) -> C64 {
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = C64::new(1.0 / tiny, 0.0);
    let mut d = C64::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 1..100_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = C64::new(1.0, 0.0) / (d * an + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn imaginary_axis_matches_sine_cosine_integrals() {
        // E1(ix) = -Ci(x) + i (Si(x) - pi/2)
        let si10 = 1.658_347_594_218_874;
        let ci10 = -0.045_456_433_004_455_37;
        let v = expint_e1(C64::new(0.0, 10.0));
        let expected = C64::new(-ci10, si10 - std::f64::consts::FRAC_PI_2);
        assert!((v - expected).norm() < 1e-14, "{v} vs {expected}");
    }

    #[test]
    fn real_axis_value() {
        // E1(1) = 0.219383934395520...
        assert!((expint_e1(C64::new(1.0, 0.0)).re - 0.219_383_934_395_520_3).abs() < 1e-15);
        // E1(3) = 0.013048381094197...
        assert!((expint_e1(C64::new(3.0, 0.0)).re - 0.013_048_381_094_197_04).abs() < 1e-16);
    }

    #[test]
    fn branches_agree_near_switch() {
        for &(re, im) in &[(-0.1, 2.0), (0.1, -2.0), (1.4, 1.4)] {
            let z = C64::new(re, im);
            let a = series(z);
            let b = continued_fraction(z);
            assert!((a - b).norm() < 1e-12, "{z}: {a} vs {b}");
        }
    }
}
