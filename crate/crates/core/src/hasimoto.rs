//! The discrete Hasimoto transform in both of its forms: the curvature and
//! torsion angles `(θ, γ)` with `α_n = tan(θ_n/2) e^{−iΓ(n)}`, and the
//! parallel-frame recursion `P_{n+1} = P_n Q(α_n)`, `S_n = P_n e₃`.
//!
//! Window bookkeeping: spins on `[lo, hi]` give `θ` and `α` on `[lo, hi−1]`.
//! The torsion `γ_n` needs three spins, so `γ_lo` is not determined by the
//! spins; it is stored as `0`, which fixes the global phase of `α`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{LatticeError, Result};
use crate::lattice::{gram_schmidt, ALField, FrameSequence, Mat3, Rotation, SpinField, Vec3, Window};

/// Minimum `sin²θ` accepted by the angle transform.
pub const EPS_PARALLEL: f64 = 1e-12;
/// Minimum `1 + S_n·S_{n+1}` accepted by the frame transform.
pub const EPS_ANTIPARALLEL: f64 = 1e-12;
/// Frames are re-orthonormalized after this many multiplications.
pub const REORTHONORMALIZE_EVERY: usize = 64;

const RECONSTRUCT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaGamma {
    window: Window,
    theta: Vec<f64>,
    gamma: Vec<f64>,
}

impl ThetaGamma {
    pub fn new(window: Window, theta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if theta.len() != window.len() || gamma.len() != window.len() {
            return Err(LatticeError::Window(format!(
                "window {window} has {} sites but got {} angles θ and {} angles γ",
                window.len(),
                theta.len(),
                gamma.len()
            )));
        }
        for (i, &t) in theta.iter().enumerate() {
            if !(t > 0.0 && t < PI) {
                return Err(LatticeError::Range(format!("θ at site {} is {t}, outside (0, π)", window.site(i))));
            }
        }
        for (i, &g) in gamma.iter().enumerate() {
            if !(g > -PI && g <= PI) {
                return Err(LatticeError::Range(format!("γ at site {} is {g}, outside (−π, π]", window.site(i))));
            }
        }
        Ok(Self { window, theta, gamma })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn theta_at(&self, n: i64) -> Option<f64> {
        self.window.offset(n).map(|i| self.theta[i])
    }

    pub fn gamma_at(&self, n: i64) -> Option<f64> {
        self.window.offset(n).map(|i| self.gamma[i])
    }

    /// `Γ(n) = Σ_{lo ≤ ℓ ≤ n} γ_ℓ`.
    pub fn big_gamma(&self) -> Vec<f64> {
        self.gamma
            .iter()
            .scan(0.0, |acc, g| {
                *acc += g;
                Some(*acc)
            })
            .collect()
    }
}

fn degenerate(site: i64, reason: impl Into<String>) -> LatticeError {
    LatticeError::Degeneracy { site, reason: reason.into() }
}

/// `(cos θ, sin θ)` of the angle between two unit vectors.
fn cos_sin(a: &Vec3, b: &Vec3) -> (f64, f64) {
    (a.dot(b), a.cross(b).norm())
}

pub fn theta_gamma_from_spins(s: &SpinField) -> Result<ThetaGamma> {
    let w = s.window();
    if w.len() < 2 {
        return Err(LatticeError::Window(format!("need at least two spins, window {w} has {}", w.len())));
    }
    let v = s.values();
    let out = Window::new(w.lo(), w.hi() - 1)?;
    let mut theta = Vec::with_capacity(out.len());
    let mut gamma = Vec::with_capacity(out.len());
    for i in 0..out.len() {
        let (c, sn) = cos_sin(&v[i], &v[i + 1]);
        if sn * sn <= EPS_PARALLEL || 1.0 - c * c <= EPS_PARALLEL {
            let what = if c > 0.0 { "parallel" } else { "antiparallel" };
            return Err(degenerate(w.site(i), format!("spins at {} and {} are {what}", w.site(i), w.site(i + 1))));
        }
        theta.push(sn.atan2(c));
        if i == 0 {
            gamma.push(0.0);
        } else {
            let u = v[i - 1].cross(&v[i]);
            let x = v[i].cross(&v[i + 1]);
            let g = v[i - 1].dot(&x).atan2(u.dot(&x));
            // atan2 returns [−π, π]; map −π to π
            gamma.push(if g <= -PI { PI } else { g });
        }
    }
    ThetaGamma::new(out, theta, gamma)
}

pub fn alpha_from_theta_gamma(tg: &ThetaGamma) -> ALField {
    let values = tg
        .theta
        .iter()
        .zip(tg.big_gamma())
        .map(|(&t, g)| Complex64::from_polar((0.5 * t).tan(), -g))
        .collect();
    ALField::new(tg.window, values).expect("angles are finite")
}

/// `S_{n+1}` from `S_{n−1}`, `S_n` and the angles `θ_{n−1}`, `θ_n`, `γ_n`.
fn step_forward(prev: &Vec3, cur: &Vec3, theta_prev: f64, theta: f64, gamma: f64) -> Vec3 {
    let u = prev.cross(cur);
    let r = theta.sin() / theta_prev.sin();
    let next = cur * theta.cos() + (u * gamma.sin() + u.cross(cur) * gamma.cos()) * r;
    next / next.norm()
}

/// `S_{n−1}` from `S_n`, `S_{n+1}` and the angles `θ_{n−1}`, `θ_n`, `γ_n`.
fn step_backward(cur: &Vec3, next: &Vec3, theta_prev: f64, theta: f64, gamma: f64) -> Vec3 {
    let v = cur.cross(next);
    let r = theta_prev.sin() / theta.sin();
    let prev = cur * theta_prev.cos() + (v * gamma.sin() - v.cross(cur) * gamma.cos()) * r;
    prev / prev.norm()
}

fn check_pair(a: &Vec3, b: &Vec3, theta: f64, site: i64) -> Result<()> {
    for (v, name) in [(a, "first"), (b, "second")] {
        if (v.norm() - 1.0).abs() > RECONSTRUCT_TOL {
            return Err(LatticeError::Domain(format!("{name} seed spin is not a unit vector")));
        }
    }
    let c = a.dot(b);
    if (c - theta.cos()).abs() > RECONSTRUCT_TOL {
        return Err(LatticeError::Consistency(format!(
            "seed spins have dot product {c} but cos θ_{site} = {}",
            theta.cos()
        )));
    }
    Ok(())
}

/// Rebuilds spins on `[lo, hi+1]` from `S_lo`, `S_{lo+1}` and angles on
/// `[lo, hi]`, using the forward recursion.
pub fn reconstruct_spins(s0: &Vec3, s1: &Vec3, tg: &ThetaGamma) -> Result<SpinField> {
    let w = tg.window;
    check_pair(s0, s1, tg.theta[0], w.lo())?;
    let mut out = Vec::with_capacity(w.len() + 1);
    out.push(*s0);
    out.push(*s1);
    for i in 1..w.len() {
        let next = step_forward(&out[i - 1], &out[i], tg.theta[i - 1], tg.theta[i], tg.gamma[i]);
        out.push(next);
    }
    SpinField::normalized(w.extend_hi(1), out)
}

/// Rebuilds spins on `[lo, hi+1]` from the last two spins `S_hi`, `S_{hi+1}`,
/// using the backward recursion.
pub fn reconstruct_spins_backward(s_hi: &Vec3, s_last: &Vec3, tg: &ThetaGamma) -> Result<SpinField> {
    let w = tg.window;
    let m = w.len();
    check_pair(s_hi, s_last, tg.theta[m - 1], w.hi())?;
    let mut out = vec![Vec3::zeros(); m + 1];
    out[m] = *s_last;
    out[m - 1] = *s_hi;
    for i in (1..m).rev() {
        out[i - 1] = step_backward(&out[i], &out[i + 1], tg.theta[i - 1], tg.theta[i], tg.gamma[i]);
    }
    SpinField::normalized(w.extend_hi(1), out)
}

/// The antisymmetric generator `q(z)` with `exp(q(z)) = Q(z)`.
pub fn q_matrix(z: Complex64) -> Mat3 {
    let r = z.norm();
    let (a, b) = if r == 0.0 {
        (0.0, 0.0)
    } else {
        let s = 2.0 * r.atan() / r;
        (s * z.re, s * z.im)
    };
    Mat3::new(0.0, 0.0, a, 0.0, 0.0, -b, -a, b, 0.0)
}

/// `Q(z)`, the rotation by angle `2 arctan|z|` whose third column is the
/// inverse stereographic image of `z`.
pub fn rotation_from_alpha(z: Complex64) -> Rotation {
    Rotation::from_matrix_unchecked(q_rotation_matrix(z))
}

pub(crate) fn q_rotation_matrix(z: Complex64) -> Mat3 {
    let m = z.norm_sqr();
    if !m.is_finite() {
        // limit |z| → ∞ along the direction of z
        let u = z / z.norm();
        let z2 = u * u;
        return Mat3::new(-z2.re, z2.im, 0.0, z2.im, z2.re, 0.0, 0.0, 0.0, -1.0);
    }
    let z2 = z * z;
    let d = 1.0 / (1.0 + m);
    Mat3::new(
        (1.0 - z2.re) * d,
        z2.im * d,
        2.0 * z.re * d,
        z2.im * d,
        (1.0 + z2.re) * d,
        -2.0 * z.im * d,
        -2.0 * z.re * d,
        2.0 * z.im * d,
        (1.0 - m) * d,
    )
}

/// `Q(z)e₃ = (2 Re z, −2 Im z, 1 − |z|²)/(1 + |z|²)`.
pub fn stereographic_inverse(z: Complex64) -> Vec3 {
    let m = z.norm_sqr();
    Vec3::new(2.0 * z.re, -2.0 * z.im, 1.0 - m) / (1.0 + m)
}

/// Rodrigues' formula for the exponential of an antisymmetric matrix.
pub fn so3_exp(a: &Mat3) -> Mat3 {
    let w = Vec3::new(a[(2, 1)], a[(0, 2)], a[(1, 0)]);
    let t = w.norm();
    if t < 1e-8 {
        return Mat3::identity() + a + a * a * 0.5;
    }
    Mat3::identity() + a * (t.sin() / t) + a * a * ((1.0 - t.cos()) / (t * t))
}

/// Solves `Pᵀ S_{n+1} = Q(α)e₃` for `α`.
fn alpha_from_step(p: &Mat3, next: &Vec3, site: i64) -> Result<Complex64> {
    let v = p.transpose() * next;
    let d = 1.0 + v.z;
    if d <= EPS_ANTIPARALLEL {
        return Err(degenerate(site, format!("spins at {site} and {} are antiparallel", site + 1)));
    }
    Ok(Complex64::new(v.x / d, -v.y / d))
}

/// Frame transform: spins on `[lo, hi]` and `P_lo` give `α` on `[lo, hi−1]`
/// and frames on `[lo, hi]`.
pub fn alphas_from_spins_frame(s: &SpinField, p0: &Rotation) -> Result<(ALField, FrameSequence)> {
    let w = s.window();
    if w.len() < 2 {
        return Err(LatticeError::Window(format!("need at least two spins, window {w} has {}", w.len())));
    }
    let v = s.values();
    let mismatch = (p0.e3() - v[0]).amax();
    if mismatch > RECONSTRUCT_TOL {
        return Err(LatticeError::Consistency(format!(
            "initial frame sends e₃ to a vector {mismatch:e} away from the spin at {}",
            w.lo()
        )));
    }
    let mut p = *p0.matrix();
    let mut alphas = Vec::with_capacity(w.len() - 1);
    let mut frames = Vec::with_capacity(w.len());
    frames.push(p0.clone());
    for i in 0..w.len() - 1 {
        let a = alpha_from_step(&p, &v[i + 1], w.site(i))?;
        alphas.push(a);
        p *= q_rotation_matrix(a);
        if (i + 1) % REORTHONORMALIZE_EVERY == 0 {
            p = gram_schmidt(&p);
        }
        frames.push(Rotation::from_matrix_unchecked(p));
    }
    let aw = Window::new(w.lo(), w.hi() - 1)?;
    Ok((ALField::new(aw, alphas)?, FrameSequence::new(w, frames)?))
}

/// Frames `P_n` on `[lo, hi+1]` from `α` on `[lo, hi]` and `P_lo = o`, with
/// the largest orthogonality defect removed by re-orthonormalization.
pub fn frames_from_alphas(a: &ALField, o: &Rotation) -> (FrameSequence, f64) {
    let w = a.window();
    let mut p = *o.matrix();
    let mut frames = Vec::with_capacity(w.len() + 1);
    frames.push(o.clone());
    let mut drift = 0.0f64;
    for (i, &z) in a.values().iter().enumerate() {
        p *= q_rotation_matrix(z);
        if (i + 1) % REORTHONORMALIZE_EVERY == 0 {
            let (r, d) = Rotation::from_matrix_unchecked(p).reorthonormalized();
            drift = drift.max(d);
            p = *r.matrix();
        }
        frames.push(Rotation::from_matrix_unchecked(p));
    }
    let fs = FrameSequence::new(w.extend_hi(1), frames).expect("one frame per site");
    (fs, drift)
}

/// Inverse frame transform: `α` on `[lo, hi]` and `P_lo = o` give spins and
/// frames on `[lo, hi+1]`.
pub fn spins_from_alphas(a: &ALField, o: &Rotation) -> (SpinField, FrameSequence) {
    let (frames, _) = frames_from_alphas(a, o);
    (frames.spins(), frames)
}

/// Left side of the geometric identity
/// `(S_{n−1}×S_n)·(S_n×S_{n+1}) + i S_{n−1}·(S_n×S_{n+1})`.
pub fn torsion_product(prev: &Vec3, cur: &Vec3, next: &Vec3) -> Complex64 {
    let x = cur.cross(next);
    Complex64::new(prev.cross(cur).dot(&x), prev.dot(&x))
}

/// Right side of the same identity,
/// `4 ᾱ_n α_{n−1} / ((1+|α_n|²)(1+|α_{n−1}|²))`.
pub fn torsion_product_alpha(a_prev: Complex64, a: Complex64) -> Complex64 {
    4.0 * a.conj() * a_prev / ((1.0 + a.norm_sqr()) * (1.0 + a_prev.norm_sqr()))
}

/// Largest violation of `S_n·S_{n+1} = (1−|α_n|²)/(1+|α_n|²)` and of the
/// torsion identity over the window of `a` (spins must cover one more site).
pub fn frame_consistency_residual(s: &SpinField, a: &ALField) -> Result<(f64, f64)> {
    let aw = a.window();
    if !s.window().contains_window(&aw.extend_hi(1)) {
        return Err(LatticeError::Window(format!("spins on {} do not cover {}", s.window(), aw.extend_hi(1))));
    }
    let sp = |n: i64| *s.get(n).expect("checked above");
    let mut r1 = 0.0f64;
    let mut r2 = 0.0f64;
    for n in aw.sites() {
        let z = a.get(n);
        r1 = r1.max((sp(n).dot(&sp(n + 1)) - (1.0 - z.norm_sqr()) / (1.0 + z.norm_sqr())).abs());
        if n > aw.lo() {
            let lhs = torsion_product(&sp(n - 1), &sp(n), &sp(n + 1));
            r2 = r2.max((lhs - torsion_product_alpha(a.get(n - 1), z)).norm());
        }
    }
    Ok((r1, r2))
}
