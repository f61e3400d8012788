//! The spin bracket `{F, G} = Σ_n ∇_n F · (S_n × ∇_n G)` evaluated with
//! finite-difference gradients, and the numeric check of the θ/γ, Γ and α
//! bracket tables against it.

use std::f64::consts::{PI, TAU};

use super::{BracketTable, Generator};
use crate::error::{LatticeError, Result};
use crate::hasimoto::{alpha_from_theta_gamma, theta_gamma_from_spins};
use crate::lattice::{Beta, RngStream, SpinField, Vec3, Window};
use crate::sampling::{complete_frame, sample_gibbs_chain};

const STEPS: [f64; 2] = [1e-5, 1e-6];

fn wrap(d: f64) -> f64 {
    // differences beyond π can only come from an angle crossing its branch cut
    if d > PI {
        d - TAU
    } else if d < -PI {
        d + TAU
    } else {
        d
    }
}

/// Tangential gradients of every component of `f` at every site:
/// `out[j][i]` is `∇_{S_i} f_j`. Derivatives along great circles, central
/// differences at two steps combined by Richardson extrapolation.
pub fn spin_gradients<F>(s: &SpinField, f: F) -> Result<Vec<Vec<Vec3>>>
where
    F: Fn(&SpinField) -> Result<Vec<f64>>,
{
    let n = s.values().len();
    let mut out: Option<Vec<Vec<Vec3>>> = None;
    for i in 0..n {
        let si = s.values()[i];
        let (e1, e2) = complete_frame(&si);
        for e in [e1, e2] {
            let mut d = Vec::with_capacity(2);
            for h in STEPS {
                let mut plus = s.values().to_vec();
                let mut minus = plus.clone();
                plus[i] = si * h.cos() + e * h.sin();
                minus[i] = si * h.cos() - e * h.sin();
                let fp = f(&SpinField::normalized(s.window(), plus)?)?;
                let fm = f(&SpinField::normalized(s.window(), minus)?)?;
                d.push(fp.iter().zip(&fm).map(|(a, b)| wrap(a - b) / (2.0 * h)).collect::<Vec<f64>>());
            }
            let r = (STEPS[0] / STEPS[1]).powi(2);
            let grads = out.get_or_insert_with(|| vec![vec![Vec3::zeros(); n]; d[0].len()]);
            for (j, g) in grads.iter_mut().enumerate() {
                g[i] += e * ((r * d[1][j] - d[0][j]) / (r - 1.0));
            }
        }
    }
    Ok(out.unwrap_or_default())
}

pub fn bracket_from_gradients(s: &SpinField, gf: &[Vec3], gg: &[Vec3]) -> f64 {
    s.values().iter().zip(gf).zip(gg).map(|((sn, a), b)| a.dot(&sn.cross(b))).sum()
}

pub fn spin_bracket_numeric<F, G>(f: F, g: G, s: &SpinField) -> Result<f64>
where
    F: Fn(&SpinField) -> Result<f64>,
    G: Fn(&SpinField) -> Result<f64>,
{
    let grads = spin_gradients(s, |x| Ok(vec![f(x)?, g(x)?]))?;
    Ok(bracket_from_gradients(s, &grads[0], &grads[1]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub name: String,
    pub max_discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableReport {
    pub samples: usize,
    /// Configurations discarded because some `sin θ_n` fell below the cutoff.
    pub resampled: usize,
    pub rows: Vec<TableRow>,
}

impl TableReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.rows.iter().map(|r| r.max_discrepancy).fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.rows.iter().all(|r| r.max_discrepancy <= tol)
    }
}

/// Spins on `[0, SPINS−1]`, angles on `[0, SPINS−2]`.
const SPINS: i64 = 14;
const SITES: usize = (SPINS - 1) as usize;
const CENTER: i64 = 6;
/// Configurations with some `sin θ_n` below this are redrawn; the closed
/// forms contain `cosec θ` and `cot θ`.
pub const MIN_SIN_THETA: f64 = 0.1;

enum Feature {
    Theta(i64),
    Gamma(i64),
    BigGamma(i64),
    Re(i64),
    Im(i64),
}

fn feature_index(f: Feature) -> usize {
    let (block, k) = match f {
        Feature::Theta(k) => (0, k),
        Feature::Gamma(k) => (1, k),
        Feature::BigGamma(k) => (2, k),
        Feature::Re(k) => (3, k),
        Feature::Im(k) => (4, k),
    };
    block * SITES + k as usize
}

fn features(s: &SpinField) -> Result<Vec<f64>> {
    let tg = theta_gamma_from_spins(s)?;
    let a = alpha_from_theta_gamma(&tg);
    let mut v = Vec::with_capacity(5 * SITES);
    v.extend_from_slice(tg.theta());
    v.extend_from_slice(tg.gamma());
    v.extend(tg.big_gamma());
    v.extend(a.values().iter().map(|z| z.re));
    v.extend(a.values().iter().map(|z| z.im));
    Ok(v)
}

type Closed = Box<dyn Fn(&[f64], &[f64], &crate::lattice::ALField) -> f64>;

struct Row {
    name: String,
    f: usize,
    g: usize,
    rhs: Closed,
}

fn row(name: impl Into<String>, f: Feature, g: Feature, rhs: Closed) -> Row {
    Row { name: name.into(), f: feature_index(f), g: feature_index(g), rhs }
}

fn at(v: &[f64], k: i64) -> f64 {
    v[k as usize]
}

fn csc(x: f64) -> f64 {
    1.0 / x.sin()
}

fn cot(x: f64) -> f64 {
    x.cos() / x.sin()
}

fn zero() -> Closed {
    Box::new(|_, _, _| 0.0)
}

fn rows() -> Vec<Row> {
    use Feature::*;
    let n = CENTER;
    let mut r = vec![
        row("{γ_{n-1}, θ_n}", Gamma(n - 1), Theta(n), Box::new(move |t, g, _| -csc(at(t, n - 1)) * at(g, n).cos())),
        row("{θ_{n-1}, θ_n}", Theta(n - 1), Theta(n), Box::new(move |_, g, _| at(g, n).sin())),
        row(
            "{γ_n, θ_n}",
            Gamma(n),
            Theta(n),
            Box::new(move |t, g, _| cot(at(t, n) / 2.0) + cot(at(t, n - 1)) * at(g, n).cos()),
        ),
        row("{θ_n, θ_n}", Theta(n), Theta(n), zero()),
        row(
            "{γ_{n+1}, θ_n}",
            Gamma(n + 1),
            Theta(n),
            Box::new(move |t, g, _| -cot(at(t, n) / 2.0) - cot(at(t, n + 1)) * at(g, n + 1).cos()),
        ),
        row("{θ_{n+1}, θ_n}", Theta(n + 1), Theta(n), Box::new(move |_, g, _| -at(g, n + 1).sin())),
        row("{γ_{n+2}, θ_n}", Gamma(n + 2), Theta(n), Box::new(move |t, g, _| csc(at(t, n + 1)) * at(g, n + 1).cos())),
        row("{θ_{n+2}, θ_n}", Theta(n + 2), Theta(n), zero()),
        row("{θ_{n-2}, θ_n}", Theta(n - 2), Theta(n), zero()),
        row("{γ_{n+3}, θ_n}", Gamma(n + 3), Theta(n), zero()),
        row("{γ_{n-2}, θ_n}", Gamma(n - 2), Theta(n), zero()),
        row(
            "{γ_{n-2}, γ_n}",
            Gamma(n - 2),
            Gamma(n),
            Box::new(move |t, g, _| -at(g, n - 1).sin() * csc(at(t, n - 2)) * csc(at(t, n - 1))),
        ),
        row(
            "{γ_{n-1}, γ_n}",
            Gamma(n - 1),
            Gamma(n),
            Box::new(move |t, g, _| {
                (cot(at(t, n - 2)) * at(g, n - 1).sin() + cot(at(t, n)) * at(g, n).sin()) * csc(at(t, n - 1))
            }),
        ),
        row("{γ_n, γ_n}", Gamma(n), Gamma(n), zero()),
        row(
            "{γ_{n+1}, γ_n}",
            Gamma(n + 1),
            Gamma(n),
            Box::new(move |t, g, _| {
                -(cot(at(t, n - 1)) * at(g, n).sin() + cot(at(t, n + 1)) * at(g, n + 1).sin()) * csc(at(t, n))
            }),
        ),
        row(
            "{γ_{n+2}, γ_n}",
            Gamma(n + 2),
            Gamma(n),
            Box::new(move |t, g, _| at(g, n + 1).sin() * csc(at(t, n)) * csc(at(t, n + 1))),
        ),
        row("{γ_{n+3}, γ_n}", Gamma(n + 3), Gamma(n), zero()),
        row("{γ_{n-3}, γ_n}", Gamma(n - 3), Gamma(n), zero()),
    ];

    let k = CENTER;
    let tan_prev = move |t: &[f64], g: &[f64]| -(at(t, k - 1) / 2.0).tan() * at(g, k).cos();
    for d in [3, 2] {
        r.push(row(
            format!("{{Γ(k+{d}), θ_k}}"),
            BigGamma(k + d),
            Theta(k),
            Box::new(move |t, g, _| tan_prev(t, g) + (at(t, k + 1) / 2.0).tan() * at(g, k + 1).cos()),
        ));
    }
    r.push(row(
        "{Γ(k+1), θ_k}",
        BigGamma(k + 1),
        Theta(k),
        Box::new(move |t, g, _| tan_prev(t, g) - cot(at(t, k + 1)) * at(g, k + 1).cos()),
    ));
    r.push(row(
        "{Γ(k), θ_k}",
        BigGamma(k),
        Theta(k),
        Box::new(move |t, g, _| tan_prev(t, g) + cot(at(t, k) / 2.0)),
    ));
    r.push(row(
        "{Γ(k-1), θ_k}",
        BigGamma(k - 1),
        Theta(k),
        Box::new(move |t, g, _| -csc(at(t, k - 1)) * at(g, k).cos()),
    ));
    r.push(row("{Γ(k-2), θ_k}", BigGamma(k - 2), Theta(k), zero()));

    let m = CENTER;
    r.push(row(
        "{Γ(m+1), Γ(m)}",
        BigGamma(m + 1),
        BigGamma(m),
        Box::new(move |t, g, _| {
            ((at(t, m - 1) / 2.0).tan() * at(g, m).sin() - cot(at(t, m + 1)) * at(g, m + 1).sin()) * csc(at(t, m))
        }),
    ));
    for d in [2, 4] {
        r.push(row(
            format!("{{Γ(m+{d}), Γ(m)}}"),
            BigGamma(m + d),
            BigGamma(m),
            Box::new(move |t, g, _| {
                ((at(t, m - 1) / 2.0).tan() * at(g, m).sin() + (at(t, m + 1) / 2.0).tan() * at(g, m + 1).sin())
                    * csc(at(t, m))
            }),
        ));
    }

    let w = Window::new(0, SITES as i64 - 1).expect("valid window");
    let poly_row = |name: String, f: Feature, g: Feature, gf: Generator, gg: Generator| {
        let p = BracketTable::Alpha.generator_bracket(gf, gg, w).expect("interior sites");
        row(name, f, g, Box::new(move |_, _, a| p.eval(a)))
    };
    for d in -3..=3i64 {
        r.push(poly_row(
            format!("{{Re α_(m{d:+}), Im α_m}}"),
            Re(m + d),
            Im(m),
            Generator::re(m + d),
            Generator::im(m),
        ));
    }
    for d in 1..=3i64 {
        r.push(poly_row(format!("{{Re α_(m+{d}), Re α_m}}"), Re(m + d), Re(m), Generator::re(m + d), Generator::re(m)));
        r.push(poly_row(format!("{{Im α_(m+{d}), Im α_m}}"), Im(m + d), Im(m), Generator::im(m + d), Generator::im(m)));
    }
    r
}

/// Compares spin-level brackets of θ, γ, Γ and the α coordinates with their
/// closed forms at `n_samples` Gibbs configurations (β = 1) on 14 spins.
pub fn verify_bracket_tables(n_samples: usize, rng: &mut RngStream) -> Result<TableReport> {
    if n_samples == 0 {
        return Err(LatticeError::Parameter("need at least one sample".into()));
    }
    let rows = rows();
    let mut worst = vec![0.0f64; rows.len()];
    let beta = Beta::new(1.0)?;
    let w = Window::new(0, SPINS - 1)?;
    let (mut done, mut resampled) = (0, 0);
    while done < n_samples {
        if resampled > 1000 * n_samples {
            return Err(LatticeError::Numerical(format!("{resampled} degenerate configurations drawn")));
        }
        let s = sample_gibbs_chain(beta, w, rng);
        let Ok(tg) = theta_gamma_from_spins(&s) else {
            resampled += 1;
            continue;
        };
        if tg.theta().iter().any(|t| t.sin() < MIN_SIN_THETA) {
            resampled += 1;
            continue;
        }
        let a = alpha_from_theta_gamma(&tg);
        let grads = spin_gradients(&s, features)?;
        for (row, worst) in rows.iter().zip(worst.iter_mut()) {
            let lhs = bracket_from_gradients(&s, &grads[row.f], &grads[row.g]);
            let rhs = (row.rhs)(tg.theta(), tg.gamma(), &a);
            let d = (lhs - rhs).abs();
            *worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
        }
        done += 1;
    }
    Ok(TableReport {
        samples: n_samples,
        resampled,
        rows: rows.into_iter().zip(worst).map(|(r, m)| TableRow { name: r.name, max_discrepancy: m }).collect(),
    })
}
