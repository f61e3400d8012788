//! Gauss–Legendre quadrature and Legendre polynomials.

use crate::error::{LatticeError, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Legendre polynomial `P_l(x)` by the three-term recurrence.
pub fn legendre(l: usize, x: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=l {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// Fixed-order Gauss–Legendre rule on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| w * f(c + h * x))
        .sum::<f64>()
        * h
}

/// Integral over `[0, 1]` of a function that may carry an algebraic
/// singularity at `0`, using panels `[2^{-k-1}, 2^{-k}]` graded toward the
/// origin. Each panel uses an `n`-point rule; the result is compared against a
/// `2n`-point evaluation and rejected if the two disagree beyond `tol`.
pub fn integrate_unit_graded<F: Fn(f64) -> f64>(f: F, n: usize, tol: f64) -> Result<f64> {
    let panels = 120;
    let run = |n: usize| {
        let (x, w) = gauss_legendre(n);
        let mut sum = 0.0;
        let mut b = 1.0f64;
        for _ in 0..panels {
            let a = 0.5 * b;
            sum += integrate(&f, a, b, &x, &w);
            b = a;
        }
        sum
    };
    let coarse = run(n);
    let fine = run(2 * n);
    let diff = (coarse - fine).abs();
    if !(diff <= tol) || !fine.is_finite() {
        return Err(LatticeError::Numerical(format!(
            "quadrature did not converge: {n}-point and {}-point panel rules differ by {diff:e} (tolerance {tol:e})",
            2 * n
        )));
    }
    Ok(fine)
}
