//! Ablowitz–Ladik, lattice Heisenberg (LHM) and classical Heisenberg flows on
//! finite windows, their conserved quantities, and the frame evolution that
//! carries Ablowitz–Ladik solutions to LHM solutions.
//!
//! Free boundary means a missing neighbour contributes nothing, which for the
//! Ablowitz–Ladik field is the same as extending `α` by zero.

mod diagnostics;
mod frames;
pub mod ode;

use num_complex::Complex64;

pub use diagnostics::{
    flux_residual, good_solution_diagnostics_al, good_solution_diagnostics_spins, truncation_gap_curve,
    GoodSolutionParams, GoodSolutionReport,
};
pub use frames::{
    a_matrix, frame_evolution, integrate_al_with_frame, lhm_residual, spins_from_frame_traj, zero_curvature_residual,
    zero_curvature_rhs, FrameEvolution,
};
pub use ode::{IntegrationStats, OdeSystem};

use crate::error::{LatticeError, Result};
use crate::hasimoto::EPS_ANTIPARALLEL;
use crate::lattice::{ALField, SpinField, Trajectory, Vec3, Window};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
}

impl IntegratorConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, max_step: f64) -> Result<Self> {
        let cfg = Self { rel_tol, abs_tol, max_step };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol), ("max_step", self.max_step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(LatticeError::Parameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.rel_tol < 1e-14 {
            return Err(LatticeError::Parameter(format!("rel_tol must be at least 1e-14, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_step: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Free,
    /// Wrap-around neighbours; used only to validate the integrator against
    /// closed-form plane waves.
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Boundary::Free),
            "periodic" => Ok(Boundary::Periodic),
            _ => Err(LatticeError::Parse(format!("unknown boundary '{s}' (expected free or periodic)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Al,
    Lhm,
    Heis,
}

impl std::str::FromStr for Model {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "al" => Ok(Model::Al),
            "lhm" => Ok(Model::Lhm),
            "heis" => Ok(Model::Heis),
            _ => Err(LatticeError::Parse(format!("unknown model '{s}' (expected al, lhm or heis)"))),
        }
    }
}

/// Spin-side models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpinModel {
    Lhm,
    Heis,
}

/// Equally spaced output times `0, T/N, …, T`; a zero final time gives `[0]`.
pub fn sample_times(t_final: f64, samples: usize) -> Vec<f64> {
    if t_final == 0.0 || samples == 0 {
        return vec![0.0];
    }
    (0..=samples).map(|k| t_final * k as f64 / samples as f64).collect()
}

fn neighbours<T: Copy>(v: &[T], i: usize, boundary: Boundary) -> (Option<T>, Option<T>) {
    let n = v.len();
    let left = if i > 0 {
        Some(v[i - 1])
    } else if boundary == Boundary::Periodic {
        Some(v[n - 1])
    } else {
        None
    };
    let right = if i + 1 < n {
        Some(v[i + 1])
    } else if boundary == Boundary::Periodic {
        Some(v[0])
    } else {
        None
    };
    (left, right)
}

/// `i dα_n/dt = −(1+|α_n|²)(α_{n+1}+α_{n−1}) + 2α_n` on interleaved
/// `(re, im)` storage.
fn al_rhs(a: &[f64], boundary: Boundary, out: &mut [f64]) {
    let n = a.len() / 2;
    let at = |i: usize| Complex64::new(a[2 * i], a[2 * i + 1]);
    let zero = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let l = if i > 0 {
            at(i - 1)
        } else if boundary == Boundary::Periodic {
            at(n - 1)
        } else {
            zero
        };
        let r = if i + 1 < n {
            at(i + 1)
        } else if boundary == Boundary::Periodic {
            at(0)
        } else {
            zero
        };
        let z = at(i);
        let rhs = -(1.0 + z.norm_sqr()) * (l + r) + 2.0 * z;
        out[2 * i] = rhs.im;
        out[2 * i + 1] = -rhs.re;
    }
}

pub fn al_vector_field(a: &ALField, boundary: Boundary) -> ALField {
    let y = flatten_al(&[a]);
    let mut out = vec![0.0; y.len()];
    al_rhs(&y, boundary, &mut out);
    ALField::new(a.window(), unflatten(&out)).expect("finite input gives finite output")
}

fn lhm_site(s: &Vec3, l: Option<Vec3>, r: Option<Vec3>, site: i64) -> Result<Vec3> {
    let mut field = Vec3::zeros();
    for nb in [l, r].into_iter().flatten() {
        let d = 1.0 + s.dot(&nb);
        if d <= EPS_ANTIPARALLEL {
            return Err(LatticeError::Degeneracy { site, reason: format!("neighbouring spins at {site} are antiparallel") });
        }
        field += nb * (2.0 / d);
    }
    Ok(-s.cross(&field))
}

fn heis_site(s: &Vec3, l: Option<Vec3>, r: Option<Vec3>) -> Vec3 {
    let field = l.unwrap_or_else(Vec3::zeros) + r.unwrap_or_else(Vec3::zeros);
    -s.cross(&field)
}

/// `dS_n/dt = −S_n × (2S_{n+1}/(1+S_n·S_{n+1}) + 2S_{n−1}/(1+S_n·S_{n−1}))`.
pub fn lhm_vector_field(s: &SpinField, boundary: Boundary) -> Result<Vec<Vec3>> {
    let v = s.values();
    let w = s.window();
    (0..v.len())
        .map(|i| {
            let (l, r) = neighbours(v, i, boundary);
            lhm_site(&v[i], l, r, w.site(i))
        })
        .collect()
}

/// `dS_n/dt = −S_n × (S_{n+1} + S_{n−1})`.
pub fn heis_vector_field(s: &SpinField, boundary: Boundary) -> Vec<Vec3> {
    let v = s.values();
    (0..v.len())
        .map(|i| {
            let (l, r) = neighbours(v, i, boundary);
            heis_site(&v[i], l, r)
        })
        .collect()
}

/// `Σ_n 2 log(1+|α_n|²)`.
pub fn h_lhm_alpha(a: &ALField) -> f64 {
    a.values().iter().map(|z| 2.0 * z.norm_sqr().ln_1p()).sum()
}

/// `Σ_n −Re(ᾱ_n α_{n+1}) + Σ_n log(1+|α_n|²)`, the coupling sum running over
/// neighbouring pairs inside the window (plus the wrap pair if periodic).
pub fn h_al(a: &ALField, boundary: Boundary) -> f64 {
    let v = a.values();
    let mut h: f64 = v.iter().map(|z| z.norm_sqr().ln_1p()).sum();
    for i in 0..v.len().saturating_sub(1) {
        h -= (v[i].conj() * v[i + 1]).re;
    }
    if boundary == Boundary::Periodic && v.len() > 1 {
        h -= (v[v.len() - 1].conj() * v[0]).re;
    }
    h
}

/// `Σ_n 2|α_n|²/(1+|α_n|²)`.
pub fn h_heis_alpha(a: &ALField) -> f64 {
    a.values().iter().map(|z| 2.0 * z.norm_sqr() / (1.0 + z.norm_sqr())).sum()
}

fn spin_pairs(s: &SpinField, boundary: Boundary) -> Vec<(usize, usize)> {
    let n = s.values().len();
    let mut pairs: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if boundary == Boundary::Periodic && n > 1 {
        pairs.push((n - 1, 0));
    }
    pairs
}

/// `Σ_n −2 log(1 − ¼|S_n − S_{n+1}|²)` over neighbouring pairs.
pub fn h_lhm_spins(s: &SpinField, boundary: Boundary) -> Result<f64> {
    let v = s.values();
    let mut h = 0.0;
    for (i, j) in spin_pairs(s, boundary) {
        let d2 = (v[i] - v[j]).norm_squared();
        if 1.0 - 0.25 * d2 <= 0.5 * EPS_ANTIPARALLEL {
            return Err(LatticeError::Degeneracy {
                site: s.window().site(i),
                reason: "antiparallel neighbours make the energy infinite".into(),
            });
        }
        h -= 2.0 * (-0.25 * d2).ln_1p();
    }
    Ok(h)
}

/// `Σ_n ½|S_n − S_{n+1}|²` over neighbouring pairs.
pub fn h_heis_spins(s: &SpinField, boundary: Boundary) -> f64 {
    let v = s.values();
    spin_pairs(s, boundary).into_iter().map(|(i, j)| 0.5 * (v[i] - v[j]).norm_squared()).sum()
}

/// Conserved quantities along a trajectory: their initial values, full time
/// series and relative drift `max_t |H(t) − H(0)| / max(1, |H(0)|)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservedReport {
    pub names: Vec<String>,
    pub initial: Vec<f64>,
    pub drift: Vec<f64>,
    pub times: Vec<f64>,
    /// `series[k][j]` is quantity `k` at time `j`.
    pub series: Vec<Vec<f64>>,
}

impl ConservedReport {
    fn build(names: &[&str], times: Vec<f64>, series: Vec<Vec<f64>>) -> Self {
        let initial: Vec<f64> = series.iter().map(|s| s[0]).collect();
        let drift = series
            .iter()
            .map(|s| {
                let h0 = s[0];
                s.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max) / h0.abs().max(1.0)
            })
            .collect();
        Self { names: names.iter().map(|s| s.to_string()).collect(), initial, drift, times, series }
    }

    pub fn drift_of(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.drift[i])
    }

    pub fn rows(&self) -> Vec<crate::lattice::DiagnosticRow> {
        let mut rows = Vec::new();
        for (j, &t) in self.times.iter().enumerate() {
            for (k, name) in self.names.iter().enumerate() {
                rows.push(crate::lattice::DiagnosticRow { t, name: name.clone(), value: self.series[k][j] });
            }
        }
        rows
    }
}

pub fn conserved_report_al(traj: &Trajectory<ALField>, boundary: Boundary) -> ConservedReport {
    let lhm = traj.states().iter().map(h_lhm_alpha).collect();
    let al = traj.states().iter().map(|a| h_al(a, boundary)).collect();
    ConservedReport::build(&["H_LHM", "H_AL"], traj.times().to_vec(), vec![lhm, al])
}

pub fn conserved_report_spins(traj: &Trajectory<SpinField>, model: SpinModel, boundary: Boundary) -> Result<ConservedReport> {
    let series = match model {
        SpinModel::Lhm => (
            "H_LHM",
            traj.states().iter().map(|s| h_lhm_spins(s, boundary)).collect::<Result<Vec<_>>>()?,
        ),
        SpinModel::Heis => ("H_Heis", traj.states().iter().map(|s| h_heis_spins(s, boundary)).collect()),
    };
    Ok(ConservedReport::build(&[series.0], traj.times().to_vec(), vec![series.1]))
}

/// One or more independent Ablowitz–Ladik fields integrated as a single
/// system, so that all of them share one step sequence.
pub(crate) struct AlSystem {
    blocks: Vec<(usize, usize, i64)>,
    boundary: Boundary,
    dim: usize,
}

impl AlSystem {
    pub(crate) fn new(windows: &[Window], boundary: Boundary) -> Self {
        let mut blocks = Vec::with_capacity(windows.len());
        let mut off = 0;
        for w in windows {
            blocks.push((off, w.len(), w.lo()));
            off += w.len();
        }
        Self { blocks, boundary, dim: 2 * off }
    }
}

pub(crate) fn unflatten(y: &[f64]) -> Vec<Complex64> {
    y.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

pub(crate) fn flatten_al(fields: &[&ALField]) -> Vec<f64> {
    fields.iter().flat_map(|a| a.values().iter().flat_map(|z| [z.re, z.im])).collect()
}

impl OdeSystem for AlSystem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        for &(off, len, _) in &self.blocks {
            let r = 2 * off..2 * (off + len);
            al_rhs(&y[r.clone()], self.boundary, &mut dy[r]);
        }
        Ok(())
    }

    fn site_of(&self, component: usize) -> Option<i64> {
        let c = component / 2;
        self.blocks.iter().find(|(off, len, _)| c >= *off && c < off + len).map(|(off, _, lo)| lo + (c - off) as i64)
    }
}

struct SpinSystem {
    lo: i64,
    len: usize,
    model: SpinModel,
    boundary: Boundary,
}

fn spin_at(y: &[f64], i: usize) -> Vec3 {
    Vec3::new(y[3 * i], y[3 * i + 1], y[3 * i + 2])
}

impl OdeSystem for SpinSystem {
    fn dim(&self) -> usize {
        3 * self.len
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.len;
        for i in 0..n {
            let s = spin_at(y, i);
            let l = if i > 0 {
                Some(spin_at(y, i - 1))
            } else if self.boundary == Boundary::Periodic {
                Some(spin_at(y, n - 1))
            } else {
                None
            };
            let r = if i + 1 < n {
                Some(spin_at(y, i + 1))
            } else if self.boundary == Boundary::Periodic {
                Some(spin_at(y, 0))
            } else {
                None
            };
            let d = match self.model {
                SpinModel::Lhm => lhm_site(&s, l, r, self.lo + i as i64)?,
                SpinModel::Heis => heis_site(&s, l, r),
            };
            dy[3 * i..3 * i + 3].copy_from_slice(d.as_slice());
        }
        Ok(())
    }

    fn project(&self, y: &mut [f64]) -> Option<f64> {
        let mut worst = 0.0f64;
        for c in y.chunks_exact_mut(3) {
            let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            worst = worst.max((r - 1.0).abs());
            c.iter_mut().for_each(|x| *x /= r);
        }
        Some(worst)
    }

    fn site_of(&self, component: usize) -> Option<i64> {
        Some(self.lo + (component / 3) as i64)
    }
}

fn unflatten_al(w: Window, y: &[f64]) -> Result<ALField> {
    ALField::new(w, unflatten(y))
}

pub fn integrate_al(
    a: &ALField,
    boundary: Boundary,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Trajectory<ALField>, IntegrationStats)> {
    let (mut trajs, stats) = integrate_al_blocks(&[a], boundary, times, cfg)?;
    Ok((trajs.pop().expect("one block"), stats))
}

/// Integrates several fields jointly with one shared step sequence.
pub fn integrate_al_blocks(
    fields: &[&ALField],
    boundary: Boundary,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Vec<Trajectory<ALField>>, IntegrationStats)> {
    let windows: Vec<Window> = fields.iter().map(|a| a.window()).collect();
    let sys = AlSystem::new(&windows, boundary);
    let y0 = flatten_al(fields);
    let (ys, stats) = ode::solve(&sys, 0.0, &y0, times, cfg)?;
    let mut out = Vec::with_capacity(fields.len());
    for &(off, len, _) in &sys.blocks {
        let w = windows[out.len()];
        let states = ys.iter().map(|y| unflatten_al(w, &y[2 * off..2 * (off + len)])).collect::<Result<Vec<_>>>()?;
        out.push(Trajectory::new(times.to_vec(), states)?);
    }
    Ok((out, stats))
}

pub fn integrate_spins(
    s: &SpinField,
    model: SpinModel,
    boundary: Boundary,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Trajectory<SpinField>, IntegrationStats)> {
    let w = s.window();
    let sys = SpinSystem { lo: w.lo(), len: w.len(), model, boundary };
    let y0: Vec<f64> = s.values().iter().flat_map(|v| [v.x, v.y, v.z]).collect();
    let (ys, stats) = ode::solve(&sys, 0.0, &y0, times, cfg)?;
    let states = ys
        .iter()
        .map(|y| SpinField::normalized(w, (0..w.len()).map(|i| spin_at(y, i)).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok((Trajectory::new(times.to_vec(), states)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleaved_storage_round_trip() {
        let y = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(unflatten(&y), vec![Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)]);
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(1e-15, 1e-12, 0.1).is_err());
        assert!(IntegratorConfig::new(1e-10, 0.0, 0.1).is_err());
        assert!(IntegratorConfig::new(1e-10, 1e-12, f64::INFINITY).is_err());
        assert!(IntegratorConfig::default().validate().is_ok());
    }

    #[test]
    fn sample_time_grid() {
        assert_eq!(sample_times(0.0, 10), vec![0.0]);
        assert_eq!(sample_times(1.0, 4), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
