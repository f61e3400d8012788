//! Parallel frames along an Ablowitz–Ladik solution. The anchor frame at the
//! left end of the window solves `dP_lo/dt = P_lo A_lo`, the others follow from
//! `P_{n+1} = P_n Q(α_n)`, and `S_n = P_n e₃` then solves the free-boundary
//! LHM chain on `[lo, hi+1]`.

use num_complex::Complex64;

use super::ode::{self, hermite, IntegrationStats, OdeSystem};
use super::{al_vector_field, flatten_al, lhm_vector_field, AlSystem, Boundary, IntegratorConfig};
use crate::error::{LatticeError, Result};
use crate::hasimoto::{frames_from_alphas, q_rotation_matrix};
use crate::lattice::{gram_schmidt, ALField, FrameSequence, Mat3, Rotation, SpinField, Trajectory};

fn a_matrix_from(an: Complex64, prev: Complex64) -> Mat3 {
    let c = 2.0 * (an.conj() * prev).re;
    let d = an - prev;
    Mat3::new(
        0.0,
        -c,
        -2.0 * d.im,
        c,
        0.0,
        -2.0 * d.re,
        2.0 * d.im,
        2.0 * d.re,
        0.0,
    )
}

/// The generator `A_n` built from `α_n` and `α_{n−1}` (zero outside the window).
pub fn a_matrix(a: &ALField, n: i64) -> Mat3 {
    a_matrix_from(a.get(n), a.get(n - 1))
}

/// `Q_n A_{n+1} − A_n Q_n`, which equals `dQ_n/dt` along the flow.
pub fn zero_curvature_rhs(a: &ALField, n: i64) -> Mat3 {
    let q = q_rotation_matrix(a.get(n));
    q * a_matrix(a, n + 1) - a_matrix(a, n) * q
}

fn mat_from_slice(y: &[f64]) -> Mat3 {
    Mat3::from_row_slice(&y[..9])
}

fn write_mat(m: &Mat3, out: &mut [f64]) {
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = m[(i, j)];
        }
    }
}

fn project_frame(y: &mut [f64]) -> f64 {
    let m = mat_from_slice(y);
    let g = gram_schmidt(&m);
    write_mat(&g, y);
    (g - m).amax()
}

/// Frames along a trajectory plus the bookkeeping of the anchor integration.
#[derive(Clone, Debug)]
pub struct FrameEvolution {
    pub frames: Trajectory<FrameSequence>,
    /// Largest Gram–Schmidt correction applied to the anchor frame.
    pub anchor_drift: f64,
    /// Largest re-orthonormalization correction inside the `Q` recursion.
    pub recursion_drift: f64,
    pub stats: IntegrationStats,
}

struct AnchorSystem<'a> {
    times: &'a [f64],
    alpha: Vec<Complex64>,
    dalpha: Vec<Complex64>,
}

impl AnchorSystem<'_> {
    fn alpha_at(&self, t: f64) -> Complex64 {
        let ts = self.times;
        let increasing = ts.len() < 2 || ts[1] > ts[0];
        // index k with t between ts[k] and ts[k+1]
        let k = if increasing {
            ts.partition_point(|&s| s <= t)
        } else {
            ts.partition_point(|&s| s >= t)
        };
        let k = k.saturating_sub(1).min(ts.len().saturating_sub(2));
        if ts.len() < 2 {
            return self.alpha[0];
        }
        let (y0, y1) = (self.alpha[k], self.alpha[k + 1]);
        let (d0, d1) = (self.dalpha[k], self.dalpha[k + 1]);
        let mut out = [0.0; 2];
        hermite(ts[k], ts[k + 1], &[y0.re, y0.im], &[d0.re, d0.im], &[y1.re, y1.im], &[d1.re, d1.im], t, &mut out);
        Complex64::new(out[0], out[1])
    }
}

impl OdeSystem for AnchorSystem<'_> {
    fn dim(&self) -> usize {
        9
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let a = a_matrix_from(self.alpha_at(t), Complex64::new(0.0, 0.0));
        write_mat(&(mat_from_slice(y) * a), dy);
        Ok(())
    }

    fn project(&self, y: &mut [f64]) -> Option<f64> {
        Some(project_frame(y))
    }
}

fn frames_at(states: &[ALField], anchors: &[Mat3]) -> (Vec<FrameSequence>, f64) {
    let mut drift = 0.0f64;
    let frames = states
        .iter()
        .zip(anchors)
        .map(|(a, p)| {
            let (fs, d) = frames_from_alphas(a, &Rotation::from_matrix_unchecked(*p));
            drift = drift.max(d);
            fs
        })
        .collect();
    (frames, drift)
}

/// Frames along a sampled free-boundary Ablowitz–Ladik trajectory. Between
/// samples `α_lo(t)` is reconstructed by cubic Hermite interpolation using the
/// exact time derivative, so the sample spacing must not exceed
/// `cfg.max_step`.
pub fn frame_evolution(a_traj: &Trajectory<ALField>, o: &Rotation, cfg: &IntegratorConfig) -> Result<FrameEvolution> {
    let times = a_traj.times();
    if let Some(gap) = times.windows(2).map(|w| (w[1] - w[0]).abs()).reduce(f64::max) {
        if gap > cfg.max_step * (1.0 + 1e-9) {
            return Err(LatticeError::Resolution(format!(
                "trajectory samples are {gap} apart, more than the largest integrator step {}",
                cfg.max_step
            )));
        }
    }
    let lo = a_traj.states()[0].window().lo();
    let sys = AnchorSystem {
        times,
        alpha: a_traj.states().iter().map(|a| a.get(lo)).collect(),
        dalpha: a_traj.states().iter().map(|a| al_vector_field(a, Boundary::Free).get(lo)).collect(),
    };
    let mut y0 = [0.0; 9];
    write_mat(o.matrix(), &mut y0);
    let (ys, stats) = ode::solve(&sys, times[0], &y0, times, cfg)?;
    let anchors: Vec<Mat3> = ys.iter().map(|y| mat_from_slice(y)).collect();
    let (frames, recursion_drift) = frames_at(a_traj.states(), &anchors);
    Ok(FrameEvolution {
        frames: Trajectory::new(times.to_vec(), frames)?,
        anchor_drift: stats.max_projection,
        recursion_drift,
        stats,
    })
}

struct AlFrameSystem {
    al: AlSystem,
    n: usize,
}

impl OdeSystem for AlFrameSystem {
    fn dim(&self) -> usize {
        2 * self.n + 9
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let m = 2 * self.n;
        self.al.rhs(t, &y[..m], &mut dy[..m])?;
        let a = a_matrix_from(Complex64::new(y[0], y[1]), Complex64::new(0.0, 0.0));
        write_mat(&(mat_from_slice(&y[m..]) * a), &mut dy[m..]);
        Ok(())
    }

    fn project(&self, y: &mut [f64]) -> Option<f64> {
        Some(project_frame(&mut y[2 * self.n..]))
    }

    fn site_of(&self, component: usize) -> Option<i64> {
        self.al.site_of(component)
    }
}

/// Integrates the free-boundary Ablowitz–Ladik field together with the
/// anchor frame, so no interpolation is involved.
pub fn integrate_al_with_frame(
    a: &ALField,
    o: &Rotation,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Trajectory<ALField>, FrameEvolution)> {
    let w = a.window();
    let sys = AlFrameSystem { al: AlSystem::new(&[w], Boundary::Free), n: w.len() };
    let mut y0 = flatten_al(&[a]);
    let mut p = [0.0; 9];
    write_mat(o.matrix(), &mut p);
    y0.extend_from_slice(&p);
    let (ys, stats) = ode::solve(&sys, 0.0, &y0, times, cfg)?;
    let m = 2 * w.len();
    let states = ys
        .iter()
        .map(|y| ALField::new(w, super::unflatten(&y[..m])))
        .collect::<Result<Vec<_>>>()?;
    let anchors: Vec<Mat3> = ys.iter().map(|y| mat_from_slice(&y[m..])).collect();
    let (frames, recursion_drift) = frames_at(&states, &anchors);
    let evo = FrameEvolution {
        frames: Trajectory::new(times.to_vec(), frames)?,
        anchor_drift: stats.max_projection,
        recursion_drift,
        stats,
    };
    Ok((Trajectory::new(times.to_vec(), states)?, evo))
}

pub fn spins_from_frame_traj(f: &Trajectory<FrameSequence>) -> Trajectory<SpinField> {
    let states = f.states().iter().map(|fs| fs.spins()).collect();
    Trajectory::new(f.times().to_vec(), states).expect("same times and window")
}

/// Largest entry of `(S(t_{k+1}) − S(t_{k−1}))/(t_{k+1} − t_{k−1}) − RHS(S(t_k))`
/// over interior samples and sites, for the LHM chain.
pub fn lhm_residual(s_traj: &Trajectory<SpinField>, boundary: Boundary) -> Result<f64> {
    let (ts, ss) = (s_traj.times(), s_traj.states());
    let mut worst = 0.0f64;
    for k in 1..ts.len().saturating_sub(1) {
        let dt = ts[k + 1] - ts[k - 1];
        let rhs = lhm_vector_field(&ss[k], boundary)?;
        for (i, r) in rhs.iter().enumerate() {
            let fd = (ss[k + 1].values()[i] - ss[k - 1].values()[i]) / dt;
            worst = worst.max((fd - r).amax());
        }
    }
    Ok(worst)
}

/// Largest entry of `ΔQ_n/Δt − (Q_n A_{n+1} − A_n Q_n)` with central
/// differences over interior samples, for every `n` in the window.
pub fn zero_curvature_residual(a_traj: &Trajectory<ALField>) -> f64 {
    let (ts, st) = (a_traj.times(), a_traj.states());
    let mut worst = 0.0f64;
    for k in 1..ts.len().saturating_sub(1) {
        let dt = ts[k + 1] - ts[k - 1];
        for n in st[k].window().sites() {
            let fd = (q_rotation_matrix(st[k + 1].get(n)) - q_rotation_matrix(st[k - 1].get(n))) / dt;
            worst = worst.max((fd - zero_curvature_rhs(&st[k], n)).amax());
        }
    }
    worst
}
