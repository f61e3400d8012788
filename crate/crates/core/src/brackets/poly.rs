//! Sparse polynomials with exact rational coefficients in the real
//! generators `x_n = Re α_n`, `y_n = Im α_n` of a fixed window.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{LatticeError, Result};
use crate::lattice::{ALField, Window};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    Re,
    Im,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Generator {
    pub site: i64,
    pub part: Part,
}

impl Generator {
    pub fn re(site: i64) -> Self {
        Self { site, part: Part::Re }
    }

    pub fn im(site: i64) -> Self {
        Self { site, part: Part::Im }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.part {
            Part::Re => write!(f, "x[{}]", self.site),
            Part::Im => write!(f, "y[{}]", self.site),
        }
    }
}

/// All generators of a window, `x` before `y` at each site.
pub fn generators(w: Window) -> Vec<Generator> {
    w.sites().flat_map(|n| [Generator::re(n), Generator::im(n)]).collect()
}

fn index(w: Window, g: Generator) -> Option<usize> {
    w.offset(g.site).map(|i| 2 * i + if g.part == Part::Im { 1 } else { 0 })
}

fn generator_at(w: Window, i: usize) -> Generator {
    let site = w.site(i / 2);
    if i % 2 == 0 {
        Generator::re(site)
    } else {
        Generator::im(site)
    }
}

/// Exponent vector over the generators of the window.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Monomial(Vec<u16>);

impl Monomial {
    fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BracketPoly {
    window: Window,
    terms: BTreeMap<Monomial, BigRational>,
}

impl BracketPoly {
    pub fn zero(window: Window) -> Self {
        Self { window, terms: BTreeMap::new() }
    }

    pub fn constant(window: Window, c: BigRational) -> Self {
        let mut p = Self::zero(window);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(2 * window.len()), c);
        }
        p
    }

    pub fn int(window: Window, c: i64) -> Self {
        Self::constant(window, rational(c, 1))
    }

    pub fn generator(window: Window, g: Generator) -> Result<Self> {
        let i = index(window, g).ok_or_else(|| LatticeError::Window(format!("{g} is outside window {window}")))?;
        let mut m = Monomial::one(2 * window.len());
        m.0[i] = 1;
        let mut p = Self::zero(window);
        p.terms.insert(m, BigRational::one());
        Ok(p)
    }

    pub fn x(window: Window, n: i64) -> Result<Self> {
        Self::generator(window, Generator::re(n))
    }

    pub fn y(window: Window, n: i64) -> Result<Self> {
        Self::generator(window, Generator::im(n))
    }

    /// `1 + x_n² + y_n²`.
    pub fn weight(window: Window, n: i64) -> Result<Self> {
        let (x, y) = (Self::x(window, n)?, Self::y(window, n)?);
        Ok(&(&Self::int(window, 1) + &(&x * &x)) + &(&y * &y))
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.0.iter().map(|&e| e as u32).sum()).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.window);
        }
        Self { window: self.window, terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    /// Generators appearing with positive exponent.
    pub fn support(&self) -> BTreeSet<Generator> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    out.insert(generator_at(self.window, i));
                }
            }
        }
        out
    }

    pub fn support_sites(&self) -> BTreeSet<i64> {
        self.support().into_iter().map(|g| g.site).collect()
    }

    pub fn derivative(&self, g: Generator) -> Self {
        let Some(i) = index(self.window, g) else {
            return Self::zero(self.window);
        };
        let mut out = Self::zero(self.window);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm.0[i] -= 1;
            out.add_term(dm, c * BigRational::from_integer(BigInt::from(e)));
        }
        out
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                if !c.is_zero() {
                    v.insert(c);
                }
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Value at a field, reading amplitudes outside its window as zero.
    pub fn eval(&self, a: &ALField) -> f64 {
        let vals: Vec<f64> = (0..2 * self.window.len())
            .map(|i| {
                let z = a.get(self.window.site(i / 2));
                if i % 2 == 0 {
                    z.re
                } else {
                    z.im
                }
            })
            .collect();
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut t = c.to_f64().unwrap_or(f64::NAN);
                for (v, &e) in vals.iter().zip(&m.0) {
                    if e > 0 {
                        t *= v.powi(e as i32);
                    }
                }
                t
            })
            .sum()
    }

    /// Exact value with `values[g]` supplying each generator.
    pub fn eval_rational(&self, values: &BTreeMap<Generator, BigRational>) -> BigRational {
        let mut total = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    let g = generator_at(self.window, i);
                    let v = values.get(&g).cloned().unwrap_or_else(BigRational::zero);
                    t *= num_traits::pow(v, e as usize);
                }
            }
            total += t;
        }
        total
    }

    fn check_window(&self, other: &Self) {
        assert_eq!(self.window, other.window, "polynomials over different windows");
    }
}

impl Add for &BracketPoly {
    type Output = BracketPoly;
    fn add(self, rhs: &BracketPoly) -> BracketPoly {
        self.check_window(rhs);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &BracketPoly {
    type Output = BracketPoly;
    fn sub(self, rhs: &BracketPoly) -> BracketPoly {
        self.check_window(rhs);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &BracketPoly {
    type Output = BracketPoly;
    fn mul(self, rhs: &BracketPoly) -> BracketPoly {
        self.check_window(rhs);
        let mut out = BracketPoly::zero(self.window);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &BracketPoly {
    type Output = BracketPoly;
    fn neg(self) -> BracketPoly {
        self.scale(&-BigRational::one())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr for BracketPoly {
            type Output = BracketPoly;
            fn $f(self, rhs: BracketPoly) -> BracketPoly {
                (&self).$f(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for BracketPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let sign = if c.is_negative() { "-" } else if k > 0 { "+" } else { "" };
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{sign}")?;
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", c.abs())?;
            for (i, &e) in m.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*{}", generator_at(self.window, i))?,
                    _ => write!(f, "*{}^{e}", generator_at(self.window, i))?,
                }
            }
        }
        Ok(())
    }
}
