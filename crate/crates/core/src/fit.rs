//! Polynomial least squares on Chebyshev nodes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Chebyshev-Gauss nodes mapped onto `[lo, hi]`, ascending.
pub fn chebyshev_nodes(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let t = ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos();
            lo + (hi - lo) * (1.0 - t) / 2.0
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Monomial coefficients, lowest order first.
    pub coefficients: Vec<f64>,
    pub rms_residual: f64,
    pub max_residual: f64,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<PolyFit> {
    if x.len() != y.len() {
        return Err(Error::LinearAlgebra("sample arrays differ in length"));
    }
    if x.len() <= degree {
        return Err(Error::param(
            "nodes",
            x.len() as f64,
            "need more samples than the polynomial degree",
        ));
    }
    // Fit in x / scale so the Vandermonde columns stay O(1).
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(x.len(), degree + 1, |i, j| (x[i] / scale).powi(j as i32));
    let b = DVector::from_column_slice(y);
    let qr = a.clone().qr();
    let r = qr.r();
    if (0..=degree).any(|k| r[(k, k)].abs() < 1e-13) {
        return Err(Error::LinearAlgebra("rank-deficient fit"));
    }
    let qtb = qr.q().transpose() * &b;
    let c = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::LinearAlgebra("triangular solve failed"))?;

    let coefficients: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(k, ck)| ck / scale.powi(k as i32))
        .collect();
    let residuals = &b - &a * &c;
    let rms_residual = (residuals.norm_squared() / x.len() as f64).sqrt();
    let max_residual = residuals.amax();
    Ok(PolyFit {
        coefficients,
        rms_residual,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nodes_inside_interval() {
        let n = chebyshev_nodes(12, 0.0, 0.25);
        assert_eq!(n.len(), 12);
        assert!(n.windows(2).all(|w| w[0] < w[1]));
        assert!(n[0] > 0.0 && n[11] < 0.25);
        // Symmetric about the midpoint.
        assert!((n[0] + n[11] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn too_few_nodes() {
        assert!(polyfit(&[0.0, 1.0], &[1.0, 2.0], 3).is_err());
        assert!(polyfit(&[0.0, 1.0], &[1.0], 0).is_err());
    }

    proptest! {
        #[test]
        fn recovers_exact_polynomials(
            coeffs in proptest::collection::vec(-1e3f64..1e3, 1..7),
            hi in 0.05f64..2.0,
        ) {
            let degree = 6;
            let x = chebyshev_nodes(20, 0.0, hi);
            let y: Vec<f64> = x.iter().map(|&v| coeffs.iter().rev().fold(0.0, |a, c| a * v + c)).collect();
            let fit = polyfit(&x, &y, degree).unwrap();
            let ymax = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(fit.rms_residual <= 1e-10 * ymax);
            for (k, c) in coeffs.iter().enumerate() {
                let tol = 1e-7 * ymax / hi.powi(k as i32);
                prop_assert!((fit.coefficients[k] - c).abs() <= tol,
                    "k={} got {} want {}", k, fit.coefficients[k], c);
            }
        }
    }
}
