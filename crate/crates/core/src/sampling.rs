//! Exact samplers for the white-noise field, the Gibbs spin chain and Haar
//! rotations, together with the densities they sample from.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{LatticeError, Result};
use crate::lattice::{ALField, Beta, Mat3, Rotation, RngStream, SpinField, Vec3, Window};
use crate::quadrature::{integrate_unit_graded, legendre};

const UNIT_TOL: f64 = 1e-10;

/// Density of the white-noise measure at one site with respect to area,
/// `(1+2β)/π · (1+|α|²)^{−(2+2β)}`.
pub fn white_noise_density(alpha: Complex64, beta: Beta) -> f64 {
    let b = beta.value();
    (1.0 + 2.0 * b) / PI * (1.0 + alpha.norm_sqr()).powf(-(2.0 + 2.0 * b))
}

/// CDF of `|α|²` under the white-noise measure.
pub fn white_noise_abs2_cdf(y: f64, beta: Beta) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    1.0 - (1.0 + y).powf(-(1.0 + 2.0 * beta.value()))
}

/// One site of white noise from two uniforms.
fn white_noise_site(beta: Beta, rng: &mut RngStream) -> Complex64 {
    let u = rng.uniform_open();
    let v = rng.uniform_open();
    let w = u.powf(1.0 / (1.0 + 2.0 * beta.value()));
    let r = (1.0 / w - 1.0).max(0.0).sqrt();
    Complex64::from_polar(r, TAU * v)
}

pub fn sample_white_noise(beta: Beta, w: Window, rng: &mut RngStream) -> ALField {
    let values = (0..w.len()).map(|_| white_noise_site(beta, rng)).collect();
    ALField::new(w, values).expect("sampled values are finite")
}

fn check_unit(v: &Vec3, what: &str) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > UNIT_TOL || !n.is_finite() {
        return Err(LatticeError::Domain(format!("{what} has norm {n}, expected 1")));
    }
    Ok(())
}

/// Gibbs transition density `p(s,σ) = (1+2β)/(4π) · ((1+s·σ)/2)^{2β}`.
pub fn gibbs_transition_density(s: &Vec3, sigma: &Vec3, beta: Beta) -> Result<f64> {
    check_unit(s, "s")?;
    check_unit(sigma, "sigma")?;
    let b = beta.value();
    let c = s.dot(sigma).clamp(-1.0, 1.0);
    Ok((1.0 + 2.0 * b) / (4.0 * PI) * (0.5 * (1.0 + c)).powf(2.0 * b))
}

/// Orthonormal pair completing the unit vector `s`, from the Householder
/// reflection sending `e₃` to `±s`.
pub fn complete_frame(s: &Vec3) -> (Vec3, Vec3) {
    let e3 = Vec3::z();
    // pick the reflection vector with the larger norm
    let v = if s.z >= 0.0 { e3 + s } else { e3 - s };
    let vv = v.norm_squared();
    let h = |e: Vec3| e - v * (2.0 * v.dot(&e) / vv);
    (h(Vec3::x()), h(Vec3::y()))
}

/// Draws `σ` from `p(s, ·)`.
pub fn sample_gibbs_step(s: &Vec3, beta: Beta, rng: &mut RngStream) -> Vec3 {
    let u = rng.uniform_open().powf(1.0 / (1.0 + 2.0 * beta.value()));
    let cos_phi = 2.0 * u - 1.0;
    let sin_phi = (1.0 - cos_phi * cos_phi).max(0.0).sqrt();
    let psi = TAU * rng.uniform_open();
    let (b1, b2) = complete_frame(s);
    let sigma = s * cos_phi + (b1 * psi.cos() + b2 * psi.sin()) * sin_phi;
    sigma / sigma.norm()
}

/// Stationary Gibbs chain on `w`: uniform first spin, then kernel steps.
pub fn sample_gibbs_chain(beta: Beta, w: Window, rng: &mut RngStream) -> SpinField {
    let mut values = Vec::with_capacity(w.len());
    let mut s = rng.unit_vector();
    values.push(s);
    for _ in 1..w.len() {
        s = sample_gibbs_step(&s, beta, rng);
        values.push(s);
    }
    SpinField::new(w, values).expect("sampled spins are unit")
}

/// Haar-random rotation from a normalized Gaussian quaternion.
pub fn sample_haar_rotation(rng: &mut RngStream) -> Rotation {
    let mut q = [0.0f64; 4];
    let norm = loop {
        for x in q.iter_mut() {
            *x = rng.normal();
        }
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            break n;
        }
    };
    let [w, x, y, z] = q.map(|c| c / norm);
    let m = Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    );
    let (r, _) = Rotation::from_matrix_unchecked(m).reorthonormalized();
    r
}

/// The scalar `(1−|α|²)/(1+|α|²)`, which under white noise has the law of
/// `s·σ` under the Gibbs kernel.
pub fn pushforward_cosine(alpha: Complex64) -> f64 {
    let m = alpha.norm_sqr();
    if m.is_infinite() {
        return -1.0;
    }
    (1.0 - m) / (1.0 + m)
}

/// Eigenvalues of the Gibbs transfer operator on spherical harmonics of
/// degree `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct GibbsKernelSpectrum {
    beta: Beta,
    eigenvalues: Vec<f64>,
}

impl GibbsKernelSpectrum {
    pub fn beta(&self) -> Beta {
        self.beta
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Spectral gap `1 − max_{l≥1} |λ_l|`.
    pub fn gap(&self) -> f64 {
        1.0 - self.eigenvalues[1..].iter().fold(0.0f64, |m, l| m.max(l.abs()))
    }
}

/// Funk–Hecke coefficients `λ_l = ∫₀¹ (1+2β) u^{2β} P_l(2u−1) du`, where
/// `u = (1+s·σ)/2`.
pub fn kernel_spectrum(beta: Beta, l_max: usize) -> Result<GibbsKernelSpectrum> {
    if l_max < 1 {
        return Err(LatticeError::Parameter("l_max must be at least 1".into()));
    }
    let b = beta.value();
    let order = 24 + l_max;
    let mut eigenvalues = Vec::with_capacity(l_max + 1);
    for l in 0..=l_max {
        let f = |u: f64| (1.0 + 2.0 * b) * u.powf(2.0 * b) * legendre(l, 2.0 * u - 1.0);
        eigenvalues.push(integrate_unit_graded(f, order, 1e-12)?);
    }
    if (eigenvalues[0] - 1.0).abs() > 1e-10 {
        return Err(LatticeError::Numerical(format!(
            "kernel normalization {} differs from 1",
            eigenvalues[0]
        )));
    }
    Ok(GibbsKernelSpectrum { beta, eigenvalues })
}
