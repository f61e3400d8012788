//! Shared domain types: lattice windows, complex and spin fields, rotations,
//! frames, trajectories, and the seeded random streams everything else draws
//! from.
//!
//! Infinite-lattice objects are always represented by a finite [`Window`]
//! together with the zero-extension convention: an amplitude outside the
//! window is `0`.

mod io;
mod rng;

pub use io::{
    read_trajectory, read_trajectory_file, record_line, to_json_string, write_csv_diagnostics, write_trajectory,
    write_trajectory_file, DiagnosticRow, StateKind, TrajectoryRecord, TrajectoryState,
};
pub use rng::RngStream;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{LatticeError, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on `| |S_n| - 1 |` accepted by [`SpinField`].
pub const SPIN_NORM_TOL: f64 = 1e-12;
/// Tolerance on `‖mᵀm − I‖_max` accepted by [`Rotation`].
pub const ROTATION_TOL: f64 = 1e-10;

/// Inclusive integer interval `lo..=hi` of lattice sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    lo: i64,
    hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(LatticeError::Range(format!("empty window {lo}..{hi}")));
        }
        Ok(Self { lo, hi })
    }

    /// The symmetric window `{-k, ..., k}`.
    pub fn symmetric(k: u32) -> Self {
        Self {
            lo: -(k as i64),
            hi: k as i64,
        }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: i64) -> bool {
        self.lo <= n && n <= self.hi
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Storage offset of site `n`, if it lies in the window.
    pub fn offset(&self, n: i64) -> Option<usize> {
        self.contains(n).then(|| (n - self.lo) as usize)
    }

    pub fn site(&self, offset: usize) -> i64 {
        self.lo + offset as i64
    }

    pub fn sites(&self) -> impl DoubleEndedIterator<Item = i64> {
        self.lo..=self.hi
    }

    pub fn union(&self, other: &Window) -> Window {
        Window {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Window extended by `k` sites at the top end.
    pub fn extend_hi(&self, k: i64) -> Window {
        Window {
            lo: self.lo,
            hi: self.hi + k,
        }
    }

    /// Window shortened by one site at the top end, if possible.
    pub fn shrink_hi(&self) -> Result<Window> {
        Window::new(self.lo, self.hi - 1)
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

impl std::str::FromStr for Window {
    type Err = LatticeError;

    /// Parses `LO..HI` (inclusive).
    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once("..")
            .ok_or_else(|| LatticeError::Parse(format!("window `{s}` is not of the form LO..HI")))?;
        let lo = lo
            .trim()
            .parse::<i64>()
            .map_err(|e| LatticeError::Parse(format!("window lower bound: {e}")))?;
        let hi = hi
            .trim()
            .parse::<i64>()
            .map_err(|e| LatticeError::Parse(format!("window upper bound: {e}")))?;
        Window::new(lo, hi)
    }
}

/// Inverse temperature, strictly positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Beta(f64);

impl Beta {
    pub fn new(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(LatticeError::Parameter(format!(
                "inverse temperature must be positive and finite, got {value}"
            )));
        }
        Ok(Self(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// `β/(1+β)`: the first nontrivial eigenvalue of the Gibbs kernel.
    pub fn lambda1(&self) -> f64 {
        self.0 / (1.0 + self.0)
    }
}

/// Complex amplitudes `α_n` of the Ablowitz–Ladik lattice on a window.
#[derive(Clone, Debug, PartialEq)]
pub struct ALField {
    window: Window,
    values: Vec<Complex64>,
}

impl ALField {
    pub fn new(window: Window, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != window.len() {
            return Err(LatticeError::Range(format!(
                "window {window} has {} sites but {} values were given",
                window.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(LatticeError::Domain(format!(
                "non-finite amplitude at site {}",
                window.site(i)
            )));
        }
        Ok(Self { window, values })
    }

    pub fn zeros(window: Window) -> Self {
        Self {
            window,
            values: vec![Complex64::new(0.0, 0.0); window.len()],
        }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Amplitude at site `n` with zero extension outside the window.
    pub fn get(&self, n: i64) -> Complex64 {
        self.window
            .offset(n)
            .map(|i| self.values[i])
            .unwrap_or_default()
    }

    /// Multiplies every amplitude by `e^{iφ}`.
    pub fn rotate_phase(&self, phi: f64) -> ALField {
        let u = Complex64::from_polar(1.0, phi);
        ALField {
            window: self.window,
            values: self.values.iter().map(|z| z * u).collect(),
        }
    }
}

/// Unit spins `S_n ∈ S²` on a window.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinField {
    window: Window,
    values: Vec<Vec3>,
}

impl SpinField {
    pub fn new(window: Window, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != window.len() {
            return Err(LatticeError::Range(format!(
                "window {window} has {} sites but {} spins were given",
                window.len(),
                values.len()
            )));
        }
        for (i, s) in values.iter().enumerate() {
            let dev = (s.norm() - 1.0).abs();
            if !(dev <= SPIN_NORM_TOL) {
                return Err(LatticeError::Domain(format!(
                    "spin at site {} has | |S| - 1 | = {dev:e}",
                    window.site(i)
                )));
            }
        }
        Ok(Self { window, values })
    }

    /// Builds a field after projecting every vector onto the sphere.
    pub fn normalized(window: Window, values: Vec<Vec3>) -> Result<Self> {
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let r = v.norm();
                if r.is_finite() && r > 0.0 {
                    Ok(v / r)
                } else {
                    Err(LatticeError::Domain(format!(
                        "cannot normalize spin at site {}",
                        window.site(i)
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(window, values)
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Vec3> {
        self.values
    }

    pub fn get(&self, n: i64) -> Option<&Vec3> {
        self.window.offset(n).map(|i| &self.values[i])
    }

    /// Applies a rigid rotation to every spin.
    pub fn rotate(&self, r: &Rotation) -> SpinField {
        SpinField {
            window: self.window,
            values: self.values.iter().map(|s| r.matrix() * s).collect(),
        }
    }
}

/// An element of SO(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn new(m: Mat3) -> Result<Self> {
        let dev = orthogonality_defect(&m);
        if !(dev <= ROTATION_TOL) {
            return Err(LatticeError::Domain(format!(
                "matrix is not orthogonal: ‖mᵀm − I‖_max = {dev:e}"
            )));
        }
        if m.determinant() <= 0.0 {
            return Err(LatticeError::Domain("matrix has non-positive determinant".into()));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Wraps a matrix already known to be in SO(3) up to rounding.
    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    /// Third column, `R e₃`.
    pub fn e3(&self) -> Vec3 {
        self.0.column(2).into_owned()
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.0)
    }

    /// Re-orthonormalizes the columns by modified Gram–Schmidt, returning the
    /// corrected rotation and the size of the correction (max-norm).
    pub fn reorthonormalized(&self) -> (Rotation, f64) {
        let m = gram_schmidt(&self.0);
        let drift = (m - self.0).amax();
        (Rotation(m), drift)
    }
}

/// `‖mᵀm − I‖_max`.
pub fn orthogonality_defect(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).amax()
}

/// Modified Gram–Schmidt on the columns.
pub fn gram_schmidt(m: &Mat3) -> Mat3 {
    let mut c0: Vec3 = m.column(0).into_owned();
    c0 /= c0.norm();
    let mut c1: Vec3 = m.column(1).into_owned();
    c1 -= c0 * c0.dot(&c1);
    c1 /= c1.norm();
    let mut c2: Vec3 = m.column(2).into_owned();
    c2 -= c0 * c0.dot(&c2);
    c2 -= c1 * c1.dot(&c2);
    c2 /= c2.norm();
    Mat3::from_columns(&[c0, c1, c2])
}

/// Sequence of parallel frames `P_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    window: Window,
    frames: Vec<Rotation>,
}

impl FrameSequence {
    pub fn new(window: Window, frames: Vec<Rotation>) -> Result<Self> {
        if frames.len() != window.len() {
            return Err(LatticeError::Range(format!(
                "window {window} has {} sites but {} frames were given",
                window.len(),
                frames.len()
            )));
        }
        Ok(Self { window, frames })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn frames(&self) -> &[Rotation] {
        &self.frames
    }

    pub fn get(&self, n: i64) -> Option<&Rotation> {
        self.window.offset(n).map(|i| &self.frames[i])
    }

    /// The spins `S_n = P_n e₃` carried by the frames.
    pub fn spins(&self) -> SpinField {
        let values = self.frames.iter().map(|p| p.e3()).collect();
        SpinField::normalized(self.window, values).expect("frames are rotations")
    }
}

/// Time-indexed sequence of states sharing one window.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    times: Vec<f64>,
    states: Vec<T>,
}

/// Anything that lives on a window.
pub trait Windowed {
    fn window(&self) -> Window;
}

impl Windowed for ALField {
    fn window(&self) -> Window {
        self.window
    }
}

impl Windowed for SpinField {
    fn window(&self) -> Window {
        self.window
    }
}

impl Windowed for FrameSequence {
    fn window(&self) -> Window {
        self.window
    }
}

impl<T: Windowed> Trajectory<T> {
    pub fn new(times: Vec<f64>, states: Vec<T>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(LatticeError::Range(format!(
                "trajectory needs equally many (≥ 1) times and states, got {} and {}",
                times.len(),
                states.len()
            )));
        }
        let increasing = times.windows(2).all(|w| w[0] < w[1]);
        let decreasing = times.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(LatticeError::Range("trajectory times must be strictly monotone".into()));
        }
        let w = states[0].window();
        if states.iter().any(|s| s.window() != w) {
            return Err(LatticeError::Range("trajectory states must share one window".into()));
        }
        Ok(Self { times, states })
    }
}

impl<T> Trajectory<T> {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[T] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &T)> {
        self.times.iter().copied().zip(self.states.iter())
    }

    pub fn last(&self) -> (f64, &T) {
        let i = self.times.len() - 1;
        (self.times[i], &self.states[i])
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<T>) {
        (self.times, self.states)
    }
}

/// Restriction of a field to a sub-window.
pub trait Restrict: Sized {
    fn restrict(&self, w: Window) -> Result<Self>;
}

fn check_restrict(outer: Window, inner: Window) -> Result<(usize, usize)> {
    if !outer.contains_window(&inner) {
        return Err(LatticeError::Range(format!(
            "window {inner} is not contained in {outer}"
        )));
    }
    let a = (inner.lo() - outer.lo()) as usize;
    Ok((a, a + inner.len()))
}

impl Restrict for ALField {
    fn restrict(&self, w: Window) -> Result<Self> {
        let (a, b) = check_restrict(self.window, w)?;
        Ok(ALField {
            window: w,
            values: self.values[a..b].to_vec(),
        })
    }
}

impl Restrict for SpinField {
    fn restrict(&self, w: Window) -> Result<Self> {
        let (a, b) = check_restrict(self.window, w)?;
        Ok(SpinField {
            window: w,
            values: self.values[a..b].to_vec(),
        })
    }
}

/// Copies the values of `f` on `w`.
pub fn window_restrict<F: Restrict>(f: &F, w: Window) -> Result<F> {
    f.restrict(w)
}

/// `⟨n⟩ = √(1+n²)`.
pub fn japanese_bracket(n: i64) -> f64 {
    let n = n as f64;
    (1.0 + n * n).sqrt()
}

/// `Σ_n e^{−c⟨n⟩} |a_n − b_n|²` over the union of the two windows, with
/// amplitudes outside a field's window taken as zero.
pub fn weighted_sup_norm(a: &ALField, b: &ALField, c: f64) -> Result<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(LatticeError::Parameter(format!("weight exponent must be positive, got {c}")));
    }
    let (wa, wb) = (a.window(), b.window());
    if !(wa.contains_window(&wb) || wb.contains_window(&wa)) {
        return Err(LatticeError::Range(format!(
            "windows {wa} and {wb} are not nested"
        )));
    }
    let w = wa.union(&wb);
    Ok(w.sites()
        .map(|n| (-c * japanese_bracket(n)).exp() * (a.get(n) - b.get(n)).norm_sqr())
        .sum())
}
