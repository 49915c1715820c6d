//! Quadrature nodes and the Faddeeva function on the real axis.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Dawson's integral F(x) = exp(-x²) ∫₀ˣ exp(t²) dt.
pub fn dawson(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 0.2 {
        // F(x) = Σ (-1)^k 2^k x^(2k+1) / (2k+1)!!
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        for k in 1..20 {
            term *= -2.0 * x2 / (2 * k + 1) as f64;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    // Rybicki's sampling sum; aliasing error ~ exp(-(π/2h)²).
    const H: f64 = 0.2;
    const REACH: f64 = 7.0;
    let n_lo = ((ax - REACH) / H).floor() as i64;
    let n_hi = ((ax + REACH) / H).ceil() as i64;
    let mut sum = 0.0;
    for n in n_lo..=n_hi {
        if n % 2 == 0 {
            continue;
        }
        let d = ax - n as f64 * H;
        sum += (-d * d).exp() / n as f64;
    }
    // Terms with |n h| beyond the Gaussian reach contribute below 1e-21.
    let f = sum / PI.sqrt();
    f.copysign(x)
}

/// Faddeeva function w(x) = exp(-x²) erfc(-ix) for real x.
pub fn faddeeva_real(x: f64) -> Complex64 {
    Complex64::new((-x * x).exp(), 2.0 / PI.sqrt() * dawson(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(8);
        // degree 15 is the exactness limit for 8 nodes
        let integral: f64 = gl.on_interval(0.0, 2.0).map(|(t, w)| w * t.powi(15)).sum();
        assert!((integral - 2f64.powi(16) / 16.0).abs() < 1e-10);
        let total: f64 = gl.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_64_gaussian_area() {
        let gl = GaussLegendre::new(64);
        let area: f64 = gl
            .on_interval(-8.0, 8.0)
            .map(|(t, w)| w * (-t * t / 2.0).exp())
            .sum();
        assert!((area - (2.0 * PI).sqrt()).abs() < 1e-13);
    }

    fn dawson_by_quadrature(x: f64) -> f64 {
        // exp(-x²)∫₀ˣ exp(t²)dt = ∫₀ˣ exp((t-x)(t+x)) dt, split into panels
        let gl = GaussLegendre::new(40);
        let panels = 40;
        let mut acc = 0.0;
        for p in 0..panels {
            let a = x * p as f64 / panels as f64;
            let b = x * (p + 1) as f64 / panels as f64;
            acc += gl
                .on_interval(a, b)
                .map(|(t, w)| w * ((t - x) * (t + x)).exp())
                .sum::<f64>();
        }
        acc
    }

    #[test]
    fn dawson_matches_quadrature() {
        for &x in &[1e-4, 0.05, 0.19, 0.21, 0.5, 0.92413, 1.5, 2.7, 4.0, 7.5, 12.0, -3.3] {
            let a = dawson(x);
            let b = dawson_by_quadrature(x);
            assert!(
                (a - b).abs() <= 1e-13 * b.abs().max(1e-300),
                "x = {x}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn dawson_asymptotic_tail() {
        let x: f64 = 40.0;
        let asym = 1.0 / (2.0 * x) * (1.0 + 1.0 / (2.0 * x * x) + 3.0 / (4.0 * x.powi(4)) + 15.0 / (8.0 * x.powi(6)));
        assert!((dawson(x) - asym).abs() < 1e-12, "{} vs {asym}", dawson(x));
    }

    #[test]
    fn dawson_is_odd() {
        for &x in &[0.1, 0.3, 1.0, 5.0] {
            assert_eq!(dawson(-x), -dawson(x));
        }
    }
}
