//! Gauss-Legendre and trapezoid rules on finite intervals.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    GaussLegendre,
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub a: f64,
    pub b: f64,
    pub npoints: usize,
    pub rule: Rule,
}

impl QuadratureSpec {
    pub fn new(a: f64, b: f64, npoints: usize, rule: Rule) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(invalid(format!("quadrature interval [{a}, {b}] must be finite and non-empty")));
        }
        if npoints < 2 {
            return Err(invalid("quadrature needs at least 2 points"));
        }
        Ok(Self { a, b, npoints, rule })
    }

    pub fn gauss(a: f64, b: f64, npoints: usize) -> Result<Self> {
        Self::new(a, b, npoints, Rule::GaussLegendre)
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Nodes and weights mapped onto `[a, b]`, nodes ascending.
    pub fn nodes_weights(&self) -> (Vec<f64>, Vec<f64>) {
        match self.rule {
            Rule::GaussLegendre => {
                let (x, w) = gauss_legendre(self.npoints);
                let half = 0.5 * (self.b - self.a);
                let mid = 0.5 * (self.b + self.a);
                (
                    x.iter().map(|xi| mid + half * xi).collect(),
                    w.iter().map(|wi| half * wi).collect(),
                )
            }
            Rule::Trapezoid => {
                let n = self.npoints;
                let h = (self.b - self.a) / (n - 1) as f64;
                let x = (0..n).map(|k| self.a + h * k as f64).collect();
                let w = (0..n)
                    .map(|k| if k == 0 || k == n - 1 { 0.5 * h } else { h })
                    .collect();
                (x, w)
            }
        }
    }
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs n >= 1");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        // degree 9 is the highest exact degree for 5 points
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((integral - 2.0 / 9.0).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn large_rule_is_accurate() {
        let q = QuadratureSpec::gauss(0.0, 200.0, 2000).unwrap();
        let (x, w) = q.nodes_weights();
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * (-0.1 * x).exp() * x.cos()).sum();
        // int_0^200 e^{-0.1x} cos x dx = 0.1/(0.01+1) (1 - tail)
        let exact = (0.1 + (-20.0_f64).exp() * (200f64.sin() - 0.1 * 200f64.cos())) / 1.01;
        assert!((integral - exact).abs() < 1e-13, "{integral} vs {exact}");
    }

    #[test]
    fn trapezoid_weights() {
        let q = QuadratureSpec::new(0.0, 1.0, 3, Rule::Trapezoid).unwrap();
        let (x, w) = q.nodes_weights();
        assert_eq!(x, vec![0.0, 0.5, 1.0]);
        assert_eq!(w, vec![0.25, 0.5, 0.25]);
        assert!(QuadratureSpec::new(1.0, 0.0, 3, Rule::Trapezoid).is_err());
        assert!(QuadratureSpec::new(0.0, 1.0, 1, Rule::Trapezoid).is_err());
    }
}
