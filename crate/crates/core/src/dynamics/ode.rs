//! Dormand–Prince 5(4) with PI step-size control. Steps are clipped so that
//! every requested output time is hit exactly; no interpolation is involved
//! in producing samples.

use crate::error::{LatticeError, Result};

use super::IntegratorConfig;

/// A first-order system `dy/dt = f(t, y)` on a flat real state vector.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Maps an accepted state back onto the constraint manifold and returns
    /// the size of the correction. `None` when the system has no constraint.
    fn project(&self, _y: &mut [f64]) -> Option<f64> {
        None
    }

    /// Lattice site owning a state component, for error messages.
    fn site_of(&self, _component: usize) -> Option<i64> {
        None
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest correction applied by the projection over all accepted steps.
    pub max_projection: f64,
}

impl IntegrationStats {
    pub fn merge(&mut self, other: &IntegrationStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.evaluations += other.evaluations;
        self.max_projection = self.max_projection.max(other.max_projection);
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const MAX_STEPS: usize = 50_000_000;

struct Failure {
    time: f64,
    site: Option<i64>,
    reason: String,
}

impl Failure {
    fn into_error(self) -> LatticeError {
        LatticeError::Integration { time: self.time, site: self.site, reason: self.reason }
    }
}

fn error_norm(y0: &[f64], y1: &[f64], err: &[f64], cfg: &IntegratorConfig) -> (f64, usize) {
    let mut sum = 0.0;
    let mut worst = (0.0f64, 0usize);
    for i in 0..y0.len() {
        let sk = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / sk;
        sum += r * r;
        if r.abs() > worst.0 {
            worst = (r.abs(), i);
        }
    }
    ((sum / y0.len().max(1) as f64).sqrt(), worst.1)
}

fn initial_step<S: OdeSystem>(sys: &S, t: f64, y: &[f64], f0: &[f64], dir: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let n = y.len().max(1) as f64;
    let sk = |i: usize| cfg.abs_tol + cfg.rel_tol * y[i].abs();
    let d0 = (y.iter().enumerate().map(|(i, v)| (v / sk(i)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().enumerate().map(|(i, v)| (v / sk(i)).powi(2)).sum::<f64>() / n).sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(cfg.max_step);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + dir * h * b).collect();
    let mut f1 = vec![0.0; y.len()];
    sys.rhs(t + dir * h, &y1, &mut f1)?;
    let d2 = (f1.iter().zip(f0).enumerate().map(|(i, (a, b))| ((a - b) / sk(i)).powi(2)).sum::<f64>() / n).sqrt() / h;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / dm).powf(0.2) };
    Ok((100.0 * h).min(h1).min(cfg.max_step))
}

/// Integrates from `(t0, y0)` and returns the state at each of `times`, which
/// must be monotone and lie on one side of `t0` (a time equal to `t0` is
/// allowed and returns `y0`).
pub fn solve<S: OdeSystem>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Vec<Vec<f64>>, IntegrationStats)> {
    cfg.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(LatticeError::Range(format!("state has {} components, system expects {n}", y0.len())));
    }
    if times.iter().any(|t| !t.is_finite()) || !t0.is_finite() {
        return Err(LatticeError::Parameter("output times must be finite".into()));
    }
    let forward = times.iter().all(|&t| t >= t0);
    let backward = times.iter().all(|&t| t <= t0);
    if !(forward || backward) {
        return Err(LatticeError::Parameter("output times must lie on one side of the start time".into()));
    }
    let dir = if forward { 1.0 } else { -1.0 };
    if times.windows(2).any(|w| dir * (w[1] - w[0]) < 0.0) {
        return Err(LatticeError::Parameter("output times must be monotone".into()));
    }

    let mut stats = IntegrationStats::default();
    let mut out = Vec::with_capacity(times.len());
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ystage = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];

    let eval = |t: f64, y: &[f64], dy: &mut [f64], stats: &mut IntegrationStats| {
        stats.evaluations += 1;
        sys.rhs(t, y, dy)
    };

    eval(t, &y, &mut k[0], &mut stats).map_err(|e| Failure { time: t, site: None, reason: e.to_string() }.into_error())?;
    let mut h: Option<f64> = None;
    let mut facold = 1e-4f64;
    let mut last_rejected = false;
    let mut steps = 0usize;

    for &target in times {
        while dir * (target - t) > 0.0 {
            let hh = match h {
                Some(h) => h,
                None => initial_step(sys, t, &y, &k[0], dir, cfg).unwrap_or(1e-6),
            };
            let remaining = (target - t).abs();
            // clip to land exactly on the target; avoid a tiny trailing step
            let (step, lands) = if hh >= remaining {
                (remaining, true)
            } else if hh > 0.5 * remaining {
                (0.5 * remaining, false)
            } else {
                (hh, false)
            };
            let hmin = 1e-13 * t.abs().max(1.0);
            if step < hmin && !lands {
                return Err(Failure {
                    time: t,
                    site: None,
                    reason: format!("step size {step:e} underflowed"),
                }
                .into_error());
            }
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Failure { time: t, site: None, reason: "step budget exhausted".into() }.into_error());
            }
            let hs = dir * step;

            let mut stage_failure: Option<LatticeError> = None;
            for s in 1..7 {
                ystage.copy_from_slice(&y);
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = hs * A[s][j];
                    if a != 0.0 {
                        ystage.iter_mut().zip(kj).for_each(|(v, d)| *v += a * d);
                    }
                }
                if let Err(e) = eval(t + C[s] * hs, &ystage, &mut k[s], &mut stats) {
                    stage_failure = Some(e);
                    break;
                }
                if s == 6 {
                    ynew.copy_from_slice(&ystage);
                }
            }
            if let Some(e) = stage_failure {
                stats.rejected += 1;
                last_rejected = true;
                let next = 0.25 * step;
                if next < hmin {
                    let site = match &e {
                        LatticeError::Degeneracy { site, .. } => Some(*site),
                        _ => None,
                    };
                    return Err(Failure { time: t, site, reason: format!("step size underflow near a singular state: {e}") }
                        .into_error());
                }
                h = Some(next);
                continue;
            }
            err.iter_mut().for_each(|e| *e = 0.0);
            for (j, kj) in k.iter().enumerate() {
                let a = hs * E[j];
                if a != 0.0 {
                    err.iter_mut().zip(kj).for_each(|(e, d)| *e += a * d);
                }
            }
            let (en, worst) = error_norm(&y, &ynew, &err, cfg);
            if !en.is_finite() {
                stats.rejected += 1;
                last_rejected = true;
                h = Some(0.1 * step);
                if 0.1 * step < hmin {
                    return Err(Failure { time: t, site: sys.site_of(worst), reason: "non-finite error estimate".into() }
                        .into_error());
                }
                continue;
            }
            let expo1 = 0.2 - BETA * 0.75;
            let fac11 = en.powf(expo1);
            if en <= 1.0 {
                let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                facold = en.max(1e-4);
                let mut hnew = (step / fac).min(cfg.max_step);
                if last_rejected {
                    hnew = hnew.min(step);
                }
                last_rejected = false;
                stats.accepted += 1;
                t = if lands { target } else { t + hs };
                std::mem::swap(&mut y, &mut ynew);
                if let Some(corr) = sys.project(&mut y) {
                    stats.max_projection = stats.max_projection.max(corr);
                    eval(t, &y, &mut k[0], &mut stats)
                        .map_err(|e| Failure { time: t, site: None, reason: e.to_string() }.into_error())?;
                } else {
                    let last = k[6].clone();
                    k[0] = last;
                }
                // keep the controller's proposal unless the step was clipped
                h = Some(if lands && step < hh { hnew.max(hh).min(cfg.max_step) } else { hnew });
            } else {
                stats.rejected += 1;
                last_rejected = true;
                let next = step / (fac11 / SAFE).min(1.0 / FAC_MIN);
                if next < hmin {
                    return Err(Failure {
                        time: t,
                        site: sys.site_of(worst),
                        reason: format!("step size {next:e} underflowed (error estimate {en:e})"),
                    }
                    .into_error());
                }
                h = Some(next);
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

/// Cubic Hermite interpolation on `[t0, t1]` from values and derivatives at
/// both ends, component-wise.
pub fn hermite(t0: f64, t1: f64, y0: &[f64], d0: &[f64], y1: &[f64], d1: &[f64], t: f64, out: &mut [f64]) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * d0[i] + h01 * y1[i] + h11 * h * d1[i];
    }
}
