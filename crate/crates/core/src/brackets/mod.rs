//! Both Poisson structures on the Ablowitz–Ladik variables as exact
//! polynomial algebra, the Jacobi and compatibility identities, the
//! Hamiltonian origin of the flow, and numeric spin-level brackets.
//!
//! Convention: `dF/dt = {F, H}` for both brackets. With this reading the
//! standard bracket is `{x_n, y_n}₀ = 1 + x_n² + y_n²` and the α bracket has
//! the half-weights of its table.

mod poly;
mod spin;

use std::collections::BTreeSet;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use poly::{generators, rational, BracketPoly, Generator, Part};
pub use spin::{
    bracket_from_gradients, spin_bracket_numeric, spin_gradients, verify_bracket_tables, TableReport, TableRow,
};

use crate::error::{LatticeError, Result};
use crate::lattice::Window;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BracketTable {
    /// The infinite-range bracket induced from the spin chain.
    Alpha,
    /// The zero-range bracket `{x_n, y_n}₀ = 1 + |α_n|²`.
    Standard,
}

fn p_x(w: Window, n: i64) -> BracketPoly {
    BracketPoly::x(w, n).expect("site checked")
}

fn p_y(w: Window, n: i64) -> BracketPoly {
    BracketPoly::y(w, n).expect("site checked")
}

fn p_w(w: Window, n: i64) -> BracketPoly {
    BracketPoly::weight(w, n).expect("site checked")
}

fn half() -> num_rational::BigRational {
    rational(1, 2)
}

fn interior(w: Window, margin: i64) -> (i64, i64) {
    (w.lo() + margin, w.hi() - margin)
}

fn check_sites<'a>(sites: impl IntoIterator<Item = &'a i64>, w: Window, margin: i64) -> Result<()> {
    let (lo, hi) = interior(w, margin);
    for &n in sites {
        if n < lo || n > hi {
            return Err(LatticeError::Window(format!(
                "site {n} is within {margin} of the edge of window {w}; neighbour generators are undefined"
            )));
        }
    }
    Ok(())
}

/// `{x_n, y_m}` in the α table.
fn alpha_re_im(w: Window, n: i64, m: i64) -> BracketPoly {
    let h = half();
    if n >= m + 2 {
        -&(&p_w(w, m).scale(&h) * &(&p_y(w, n) * &(&p_y(w, m - 1) - &p_y(w, m + 1))))
    } else if n == m + 1 {
        let inner = &(&p_y(w, n) * &(&p_y(w, m - 1) - &p_y(w, m + 1))) + &p_w(w, n).scale(&h);
        -&(&p_w(w, m).scale(&h) * &inner)
    } else if n == m {
        let re = &(&p_x(w, n) * &p_x(w, n - 1)) + &(&p_y(w, n) * &p_y(w, n - 1));
        let wn = p_w(w, n).scale(&h);
        &wn - &(&wn * &re)
    } else if n == m - 1 {
        let inner = &(&p_x(w, m) * &(&p_x(w, n - 1) - &p_x(w, n + 1))) + &p_w(w, m).scale(&h);
        -&(&p_w(w, n).scale(&h) * &inner)
    } else {
        -&(&p_w(w, n).scale(&h) * &(&p_x(w, m) * &(&p_x(w, n - 1) - &p_x(w, n + 1))))
    }
}

/// `{x_n, x_m}` in the α table; stated for `n > m`, the rest by anti-symmetry.
fn alpha_re_re(w: Window, n: i64, m: i64) -> BracketPoly {
    if n == m {
        BracketPoly::zero(w)
    } else if n < m {
        -&alpha_re_re(w, m, n)
    } else {
        -&(&p_w(w, m).scale(&half()) * &(&p_y(w, n) * &(&p_x(w, m - 1) - &p_x(w, m + 1))))
    }
}

/// `{y_n, y_m}` in the α table.
fn alpha_im_im(w: Window, n: i64, m: i64) -> BracketPoly {
    if n == m {
        BracketPoly::zero(w)
    } else if n < m {
        -&alpha_im_im(w, m, n)
    } else {
        &p_w(w, m).scale(&half()) * &(&p_x(w, n) * &(&p_y(w, m - 1) - &p_y(w, m + 1)))
    }
}

impl BracketTable {
    /// `{g, h}` as a polynomial over `w`. Both sites must keep one site of
    /// margin to the window edge.
    pub fn generator_bracket(&self, g: Generator, h: Generator, w: Window) -> Result<BracketPoly> {
        check_sites([&g.site, &h.site], w, 1)?;
        Ok(match self {
            BracketTable::Alpha => match (g.part, h.part) {
                (Part::Re, Part::Im) => alpha_re_im(w, g.site, h.site),
                (Part::Im, Part::Re) => -&alpha_re_im(w, h.site, g.site),
                (Part::Re, Part::Re) => alpha_re_re(w, g.site, h.site),
                (Part::Im, Part::Im) => alpha_im_im(w, g.site, h.site),
            },
            BracketTable::Standard => {
                if g.site != h.site {
                    BracketPoly::zero(w)
                } else {
                    match (g.part, h.part) {
                        (Part::Re, Part::Im) => p_w(w, g.site),
                        (Part::Im, Part::Re) => -&p_w(w, g.site),
                        _ => BracketPoly::zero(w),
                    }
                }
            }
        })
    }
}

/// `{f, g}` by bilinearity and the Leibniz rule:
/// `Σ_{a,b} ∂_a f ∂_b g {a, b}`.
pub fn bracket(f: &BracketPoly, g: &BracketPoly, t: BracketTable) -> Result<BracketPoly> {
    let w = f.window();
    if g.window() != w {
        return Err(LatticeError::Window(format!("windows {w} and {} differ", g.window())));
    }
    let (sf, sg) = (f.support(), g.support());
    check_sites(sf.iter().chain(&sg).map(|x| &x.site), w, 1)?;
    let df: Vec<(Generator, BracketPoly)> = sf.iter().map(|&a| (a, f.derivative(a))).collect();
    let dg: Vec<(Generator, BracketPoly)> = sg.iter().map(|&b| (b, g.derivative(b))).collect();
    let mut out = BracketPoly::zero(w);
    for (a, pa) in &df {
        for (b, pb) in &dg {
            let ab = t.generator_bracket(*a, *b, w)?;
            if ab.is_zero() {
                continue;
            }
            out = &out + &(&(pa * pb) * &ab);
        }
    }
    Ok(out)
}

fn check_margin2(fs: &[&BracketPoly]) -> Result<()> {
    let w = fs[0].window();
    let sites: BTreeSet<i64> = fs.iter().flat_map(|p| p.support_sites()).collect();
    check_sites(&sites, w, 2)
}

/// `{f,{g,h}} + {g,{h,f}} + {h,{f,g}}`.
pub fn jacobi_residual(f: &BracketPoly, g: &BracketPoly, h: &BracketPoly, t: BracketTable) -> Result<BracketPoly> {
    check_margin2(&[f, g, h])?;
    let a = bracket(f, &bracket(g, h, t)?, t)?;
    let b = bracket(g, &bracket(h, f, t)?, t)?;
    let c = bracket(h, &bracket(f, g, t)?, t)?;
    Ok(&(&a + &b) + &c)
}

/// Mixed cyclic sum `Σ {F,{G,H}₀} + {F,{G,H}}₀`, zero iff the two brackets
/// are compatible on this triple.
pub fn compatibility_residual(f: &BracketPoly, g: &BracketPoly, h: &BracketPoly) -> Result<BracketPoly> {
    check_margin2(&[f, g, h])?;
    let (al, st) = (BracketTable::Alpha, BracketTable::Standard);
    let mut out = BracketPoly::zero(f.window());
    for (a, b, c) in [(f, g, h), (g, h, f), (h, f, g)] {
        out = &out + &bracket(a, &bracket(b, c, st)?, al)?;
        out = &out + &bracket(a, &bracket(b, c, al)?, st)?;
    }
    Ok(out)
}

/// Outcome of checking an identity on every generator triple of a range.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleReport {
    pub window: Window,
    pub radius: u32,
    pub triples_checked: usize,
    pub failures: Vec<[Generator; 3]>,
}

impl TripleReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn triples(radius: u32) -> (Window, Vec<[Generator; 3]>) {
    let gens = generators(Window::symmetric(radius));
    let mut out = Vec::new();
    for i in 0..gens.len() {
        for j in i..gens.len() {
            for k in j..gens.len() {
                out.push([gens[i], gens[j], gens[k]]);
            }
        }
    }
    (Window::symmetric(radius + 2), out)
}

fn check_all<F>(radius: u32, residual: F) -> Result<TripleReport>
where
    F: Fn(&BracketPoly, &BracketPoly, &BracketPoly) -> Result<BracketPoly> + Sync,
{
    let (w, ts) = triples(radius);
    let results: Vec<Result<Option<[Generator; 3]>>> = ts
        .par_iter()
        .map(|t| {
            let p: Vec<BracketPoly> = t.iter().map(|&g| BracketPoly::generator(w, g)).collect::<Result<_>>()?;
            let r = residual(&p[0], &p[1], &p[2])?;
            Ok(if r.is_zero() { None } else { Some(*t) })
        })
        .collect();
    let mut failures = Vec::new();
    for r in results {
        if let Some(t) = r? {
            failures.push(t);
        }
    }
    Ok(TripleReport { window: w, radius, triples_checked: ts.len(), failures })
}

/// Jacobi identity on every multiset of three generators with `|n| ≤ radius`.
pub fn jacobi_all(t: BracketTable, radius: u32) -> Result<TripleReport> {
    check_all(radius, |f, g, h| jacobi_residual(f, g, h, t))
}

/// Compatibility on every multiset of three generators with `|n| ≤ radius`.
pub fn compatibility_all(radius: u32) -> Result<TripleReport> {
    check_all(radius, compatibility_residual)
}

/// A complex-valued polynomial `re + i·im`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexPoly {
    pub re: BracketPoly,
    pub im: BracketPoly,
}

impl ComplexPoly {
    fn zero(w: Window) -> Self {
        Self { re: BracketPoly::zero(w), im: BracketPoly::zero(w) }
    }

    fn alpha(w: Window, n: i64) -> Self {
        Self { re: p_x(w, n), im: p_y(w, n) }
    }

    fn scale_real(&self, p: &BracketPoly) -> Self {
        Self { re: &self.re * p, im: &self.im * p }
    }

    fn add(&self, o: &Self) -> Self {
        Self { re: &self.re + &o.re, im: &self.im + &o.im }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

/// `(1+|α_k|²) · i{α_n, 2 log(1+|α_k|²)} = 2i{α_n, x_k² + y_k²}`, exactly.
pub fn weighted_log_bracket(n: i64, k: i64, w: Window) -> Result<ComplexPoly> {
    check_sites([&n, &k], w, 1)?;
    let m = &(&p_x(w, k) * &p_x(w, k)) + &(&p_y(w, k) * &p_y(w, k));
    let bx = bracket(&p_x(w, n), &m, BracketTable::Alpha)?;
    let by = bracket(&p_y(w, n), &m, BracketTable::Alpha)?;
    let two = BracketPoly::int(w, 2);
    // 2i(bx + i by) = −2 by + 2i bx
    Ok(ComplexPoly { re: -&(&two * &by), im: &two * &bx })
}

/// The five-case polynomial value of `i{α_n, 2 log(1+|α_k|²)}`.
pub fn log_bracket_case(n: i64, k: i64, w: Window) -> Result<ComplexPoly> {
    check_sites([&n, &k], w, 1)?;
    let r = &(&p_x(w, k) * &(&p_x(w, k - 1) - &p_x(w, k + 1))) + &(&p_y(w, k) * &(&p_y(w, k - 1) - &p_y(w, k + 1)));
    let m2 = BracketPoly::int(w, -2);
    let an = ComplexPoly::alpha(w, n);
    let ak = ComplexPoly::alpha(w, k);
    let wn = p_w(w, n);
    Ok(if n >= k + 2 {
        an.scale_real(&(&m2 * &r))
    } else if n == k + 1 {
        an.scale_real(&(&m2 * &r)).add(&ak.scale_real(&-&wn))
    } else if n == k {
        let re_prev = &(&p_x(w, k) * &p_x(w, k - 1)) + &(&p_y(w, k) * &p_y(w, k - 1));
        an.scale_real(&(&(&m2 * &re_prev) + &BracketPoly::int(w, 2)))
    } else if n == k - 1 {
        ak.scale_real(&-&wn)
    } else {
        ComplexPoly::zero(w)
    })
}

/// `−(1+|α_n|²)(α_{n+1}+α_{n−1}) + 2α_n`.
pub fn al_rhs_poly(n: i64, w: Window) -> Result<ComplexPoly> {
    check_sites([&n], w, 1)?;
    let nb = ComplexPoly::alpha(w, n + 1).add(&ComplexPoly::alpha(w, n - 1));
    Ok(nb.scale_real(&-&p_w(w, n)).add(&ComplexPoly::alpha(w, n).scale_real(&BracketPoly::int(w, 2))))
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonReport {
    pub window: Window,
    pub cases_checked: usize,
    /// `(n, k)` where the bracket differs from its five-case value.
    pub case_failures: Vec<(i64, i64)>,
    pub sums_checked: usize,
    /// `n` where the summed vector field differs from the flow.
    pub sum_failures: Vec<i64>,
}

impl HamiltonReport {
    pub fn passed(&self) -> bool {
        self.case_failures.is_empty() && self.sum_failures.is_empty()
    }
}

/// Checks the five-case bracket table for every admissible `(n, k)` and that
/// `Σ_k i{α_n, 2log(1+|α_k|²)}` reproduces the Ablowitz–Ladik field.
///
/// On a window the sum runs over `k ∈ [lo+1, hi−1]` and the `n ≥ k+2` terms
/// telescope to a leftover `−2 Re(ᾱ_{lo+1} α_lo) α_n`, which vanishes as the
/// window grows for square-summable data; it is added explicitly.
pub fn hamilton_check(w: Window) -> Result<HamiltonReport> {
    if w.len() < 5 {
        return Err(LatticeError::Window(format!("need at least 5 sites, window {w} has {}", w.len())));
    }
    let (klo, khi) = interior(w, 1);
    let pairs: Vec<(i64, i64)> = (klo..=khi).flat_map(|n| (klo..=khi).map(move |k| (n, k))).collect();
    let case_results: Vec<Result<Option<(i64, i64)>>> = pairs
        .par_iter()
        .map(|&(n, k)| {
            let lhs = weighted_log_bracket(n, k, w)?;
            let rhs = log_bracket_case(n, k, w)?.scale_real(&p_w(w, k));
            Ok(if lhs == rhs { None } else { Some((n, k)) })
        })
        .collect();
    let mut case_failures = Vec::new();
    for r in case_results {
        if let Some(p) = r? {
            case_failures.push(p);
        }
    }
    let a = klo;
    let leftover = &(&p_x(w, a) * &p_x(w, a - 1)) + &(&p_y(w, a) * &p_y(w, a - 1));
    let mut sum_failures = Vec::new();
    let (nlo, nhi) = interior(w, 2);
    for n in nlo..=nhi {
        let mut total = ComplexPoly::zero(w);
        for k in klo..=khi {
            total = total.add(&log_bracket_case(n, k, w)?);
        }
        let expect = al_rhs_poly(n, w)?
            .add(&ComplexPoly::alpha(w, n).scale_real(&(&BracketPoly::int(w, -2) * &leftover)));
        if total != expect {
            sum_failures.push(n);
        }
    }
    Ok(HamiltonReport {
        window: w,
        cases_checked: pairs.len(),
        case_failures,
        sums_checked: (nhi - nlo + 1).max(0) as usize,
        sum_failures,
    })
}

/// SHA-256 of both generator tables written out on a small window, so that
/// builds with different tables are distinguishable.
pub fn table_fingerprint() -> String {
    let w = Window::new(-4, 4).expect("valid window");
    let gens = generators(Window::new(-3, 3).expect("valid window"));
    let mut hasher = Sha256::new();
    for t in [BracketTable::Alpha, BracketTable::Standard] {
        for &g in &gens {
            for &h in &gens {
                let p = t.generator_bracket(g, h, w).expect("interior sites");
                hasher.update(format!("{t:?} {g} {h} {p}\n").as_bytes());
            }
        }
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
