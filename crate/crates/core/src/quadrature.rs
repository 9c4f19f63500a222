//! Gauss-Legendre quadrature and the endpoint-regularized integral used for
//! half-periods and barrier actions.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use crate::error::Result;

/// Order of the fixed Gauss-Legendre rule used throughout the crate.
pub const GAUSS_ORDER: usize = 64;

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, refined by Newton on P_n.
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared 64-point rule.
    pub fn standard() -> &'static Self {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(GAUSS_ORDER))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.try_integrate(a, b, |x| Ok(f(x))).expect("infallible integrand")
    }

    pub fn try_integrate<F>(&self, a: f64, b: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * t)?;
        }
        Ok(sum * half)
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Value of an endpoint-regularized integral with its relative error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub relative_error: f64,
}

/// Integrates `f` over `[a, b]` after the substitution `x = a + (b - a) sin²θ`.
///
/// `f` receives the physical coordinate and returns the integrand; the
/// Jacobian `(b - a) sin 2θ` is applied here, which cancels inverse square
/// root behavior at both endpoints. The value is the two-panel 64-point
/// result; the error estimate compares it with the single-panel rule.
pub fn sin2_endpoint<F>(a: f64, b: f64, mut f: F) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    let rule = GaussLegendre::standard();
    let width = b - a;
    let mut integrand = |theta: f64| -> Result<f64> {
        let s = theta.sin();
        let x = a + width * s * s;
        Ok(f(x)? * width * (2.0 * theta).sin())
    };
    let coarse = rule.try_integrate(0.0, FRAC_PI_2, &mut integrand)?;
    let fine = rule.try_integrate(0.0, 0.5 * FRAC_PI_2, &mut integrand)?
        + rule.try_integrate(0.5 * FRAC_PI_2, FRAC_PI_2, &mut integrand)?;
    let relative_error = if fine != 0.0 {
        ((coarse - fine) / fine).abs()
    } else {
        (coarse - fine).abs()
    };
    Ok(Estimate {
        value: fine,
        relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [1, 2, 5, 16, 64] {
            let rule = GaussLegendre::new(n);
            let sum: f64 = rule.weights().iter().sum();
            assert_relative_eq!(sum, 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = GaussLegendre::new(8);
        for degree in 0..16 {
            let exact = (1.0f64.powi(degree + 1) - 0.0) / (degree as f64 + 1.0);
            let got = rule.integrate(0.0, 1.0, |x| x.powi(degree));
            assert_relative_eq!(got, exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let rule = GaussLegendre::standard();
        assert_eq!(rule.order(), 64);
        for w in rule.nodes().windows(2) {
            assert!(w[0] < w[1]);
        }
        for (a, b) in rule.nodes().iter().zip(rule.nodes().iter().rev()) {
            assert!((a + b).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_square_root_endpoints_are_absorbed() {
        // ∫_{-1}^{1} dx / sqrt(1 - x²) = π
        let est = sin2_endpoint(-1.0, 1.0, |x| Ok(1.0 / (1.0 - x * x).sqrt())).unwrap();
        assert_relative_eq!(est.value, std::f64::consts::PI, max_relative = 1e-12);
        assert!(est.relative_error < 1e-12);
    }
}
