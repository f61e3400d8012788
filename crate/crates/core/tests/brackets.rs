use std::collections::BTreeMap;

use lattice_hasimoto::brackets::*;
use lattice_hasimoto::hasimoto::theta_gamma_from_spins;
use lattice_hasimoto::lattice::{ALField, Beta, RngStream, SpinField, Vec3, Window};
use lattice_hasimoto::sampling::sample_gibbs_chain;
use lattice_hasimoto::LatticeError;
use num_complex::Complex64;
use proptest::prelude::*;

fn win() -> Window {
    Window::symmetric(5)
}

fn g(p: Generator, w: Window) -> BracketPoly {
    BracketPoly::generator(w, p).unwrap()
}

fn int(w: Window, c: i64) -> BracketPoly {
    BracketPoly::int(w, c)
}

fn random_field(w: Window, seed: u64) -> ALField {
    let mut rng = RngStream::new(seed, 3);
    ALField::new(w, w.sites().map(|_| Complex64::new(rng.normal() * 0.6, rng.normal() * 0.6)).collect()).unwrap()
}

#[test]
fn self_brackets_vanish() {
    let w = win();
    for t in [BracketTable::Alpha, BracketTable::Standard] {
        for n in -3..=3 {
            for p in [Generator::re(n), Generator::im(n)] {
                assert!(bracket(&g(p, w), &g(p, w), t).unwrap().is_zero());
            }
        }
    }
}

#[test]
fn standard_table_diagonal() {
    let w = win();
    let b = bracket(&g(Generator::re(1), w), &g(Generator::im(1), w), BracketTable::Standard).unwrap();
    let x = BracketPoly::x(w, 1).unwrap();
    let y = BracketPoly::y(w, 1).unwrap();
    assert_eq!(b, &(&int(w, 1) + &(&x * &x)) + &(&y * &y));
    assert!(bracket(&x, &BracketPoly::y(w, 2).unwrap(), BracketTable::Standard).unwrap().is_zero());
}

#[test]
fn alpha_table_diagonal_row() {
    // ½(1+x_n²+y_n²) − ½(1+x_n²+y_n²)(x_n x_{n−1} + y_n y_{n−1})
    let w = win();
    let n = 0;
    let x = |k| BracketPoly::x(w, k).unwrap();
    let y = |k| BracketPoly::y(w, k).unwrap();
    let wn = &(&int(w, 1) + &(&x(n) * &x(n))) + &(&y(n) * &y(n));
    let half = wn.scale(&rational(1, 2));
    let expect = &half - &(&half * &(&(&x(n) * &x(n - 1)) + &(&y(n) * &y(n - 1))));
    let b = bracket(&x(n), &y(n), BracketTable::Alpha).unwrap();
    assert_eq!(b, expect);
}

#[test]
fn antisymmetry_of_tables() {
    let w = win();
    let gens = generators(Window::symmetric(4));
    for t in [BracketTable::Alpha, BracketTable::Standard] {
        for &a in &gens {
            for &b in &gens {
                let ab = t.generator_bracket(a, b, w).unwrap();
                let ba = t.generator_bracket(b, a, w).unwrap();
                assert!((&ab + &ba).is_zero(), "{a} {b}");
            }
        }
    }
}

#[test]
fn edge_support_is_rejected() {
    let w = win();
    let edge = BracketPoly::x(w, 5).unwrap();
    let inner = BracketPoly::y(w, 0).unwrap();
    assert!(matches!(bracket(&edge, &inner, BracketTable::Alpha), Err(LatticeError::Window(_))));
    let near = BracketPoly::x(w, 4).unwrap();
    assert!(matches!(
        jacobi_residual(&near, &inner, &inner, BracketTable::Alpha),
        Err(LatticeError::Window(_))
    ));
}

#[test]
fn jacobi_small_cases() {
    let w = win();
    let (x0, y0, x1) = (g(Generator::re(0), w), g(Generator::im(0), w), g(Generator::re(1), w));
    assert!(jacobi_residual(&x0, &y0, &x1, BracketTable::Standard).unwrap().is_zero());
    assert!(jacobi_residual(&x0, &y0, &y0, BracketTable::Alpha).unwrap().is_zero());
    assert!(compatibility_residual(&x0, &y0, &x0).unwrap().is_zero());
}

#[test]
fn jacobi_and_compatibility_on_all_triples() {
    for t in [BracketTable::Alpha, BracketTable::Standard] {
        let r = jacobi_all(t, 3).unwrap();
        assert_eq!(r.triples_checked, 560);
        assert!(r.passed(), "{t:?}: {:?}", &r.failures[..r.failures.len().min(5)]);
    }
    let c = compatibility_all(3).unwrap();
    assert!(c.passed(), "{:?}", &c.failures[..c.failures.len().min(5)]);
}

// Independent floating-point transcription of both generator tables.
fn table_f64(alpha: bool, a: Generator, b: Generator, z: &dyn Fn(i64) -> Complex64) -> f64 {
    let w = |k: i64| 1.0 + z(k).norm_sqr();
    let (n, m) = (a.site, b.site);
    if !alpha {
        return match (a.part, b.part) {
            (Part::Re, Part::Im) if n == m => w(n),
            (Part::Im, Part::Re) if n == m => -w(n),
            _ => 0.0,
        };
    }
    let re_im = |n: i64, m: i64| -> f64 {
        let d = n - m;
        if d >= 2 {
            -w(m) / 2.0 * z(n).im * (z(m - 1) - z(m + 1)).im
        } else if d == 1 {
            -w(m) / 2.0 * (z(n).im * (z(m - 1) - z(m + 1)).im + w(n) / 2.0)
        } else if d == 0 {
            w(n) / 2.0 - w(n) / 2.0 * (z(n) * z(n - 1).conj()).re
        } else if d == -1 {
            -w(n) / 2.0 * (z(m).re * (z(n - 1) - z(n + 1)).re + w(m) / 2.0)
        } else {
            -w(n) / 2.0 * z(m).re * (z(n - 1) - z(n + 1)).re
        }
    };
    let re_re = |n: i64, m: i64| -w(m) / 2.0 * z(n).im * (z(m - 1) - z(m + 1)).re;
    let im_im = |n: i64, m: i64| w(m) / 2.0 * z(n).re * (z(m - 1) - z(m + 1)).im;
    match (a.part, b.part) {
        (Part::Re, Part::Im) => re_im(n, m),
        (Part::Im, Part::Re) => -re_im(m, n),
        (Part::Re, Part::Re) if n > m => re_re(n, m),
        (Part::Re, Part::Re) if n < m => -re_re(m, n),
        (Part::Im, Part::Im) if n > m => im_im(n, m),
        (Part::Im, Part::Im) if n < m => -im_im(m, n),
        _ => 0.0,
    }
}

fn shifted(a: &ALField, p: Generator, h: f64) -> ALField {
    let mut v = a.values().to_vec();
    let i = a.window().offset(p.site).unwrap();
    match p.part {
        Part::Re => v[i].re += h,
        Part::Im => v[i].im += h,
    }
    ALField::new(a.window(), v).unwrap()
}

/// `{f, {g, h}_inner}_outer` for generators, the inner bracket differentiated
/// by central differences.
fn nested(outer: bool, inner: bool, f: Generator, gg: Generator, hh: Generator, a: &ALField) -> f64 {
    let h = 1e-5;
    let inner_at = |x: &ALField| table_f64(inner, gg, hh, &|k| x.get(k));
    let mut total = 0.0;
    for b in generators(a.window()) {
        let d = (inner_at(&shifted(a, b, h)) - inner_at(&shifted(a, b, -h))) / (2.0 * h);
        if d != 0.0 {
            total += d * table_f64(outer, f, b, &|k| a.get(k));
        }
    }
    total
}

#[test]
fn numeric_oracle_for_jacobi_and_compatibility() {
    let w = win();
    let gens = generators(Window::symmetric(3));
    let mut rng = RngStream::new(17, 0);
    for trial in 0..60 {
        let pick = |r: &mut RngStream| gens[(r.next_u64() % gens.len() as u64) as usize];
        let (f, gg, hh) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let a = random_field(w, trial);
        let cyc = [(f, gg, hh), (gg, hh, f), (hh, f, gg)];
        let jac: f64 = cyc.iter().map(|&(p, q, r)| nested(true, true, p, q, r, &a)).sum();
        let compat: f64 =
            cyc.iter().map(|&(p, q, r)| nested(true, false, p, q, r, &a) + nested(false, true, p, q, r, &a)).sum();
        assert!(jac.abs() < 1e-6, "{f} {gg} {hh}: {jac}");
        assert!(compat.abs() < 1e-6, "{f} {gg} {hh}: {compat}");
        // the exact generator tables agree with the transcription
        let exact = BracketTable::Alpha.generator_bracket(f, gg, w).unwrap().eval(&a);
        assert!((exact - table_f64(true, f, gg, &|k| a.get(k))).abs() < 1e-12);
    }
}

#[test]
fn jacobi_residual_vanishes_at_rational_points() {
    let w = win();
    let (x0, y1, x2) = (g(Generator::re(0), w), g(Generator::im(1), w), g(Generator::re(2), w));
    let f = &x0 * &y1;
    let r = jacobi_residual(&f, &x2, &y1, BracketTable::Alpha).unwrap();
    let mut pt = BTreeMap::new();
    for (i, p) in generators(w).into_iter().enumerate() {
        pt.insert(p, rational(i as i64 - 7, 3));
    }
    assert_eq!(r.eval_rational(&pt), rational(0, 1));
    assert!(r.is_zero());
}

#[test]
fn hamilton_five_cases() {
    let w = Window::symmetric(4);
    let n = 0;
    // k = n + 1: i{α_n, 2log(1+|α_{n+1}|²)} = −(1+|α_n|²)α_{n+1}
    let c = log_bracket_case(n, n + 1, w).unwrap();
    let x = |k| BracketPoly::x(w, k).unwrap();
    let y = |k| BracketPoly::y(w, k).unwrap();
    let wn = &(&int(w, 1) + &(&x(n) * &x(n))) + &(&y(n) * &y(n));
    assert_eq!(c.re, -&(&wn * &x(n + 1)));
    assert_eq!(c.im, -&(&wn * &y(n + 1)));
    // the bracket itself, multiplied out, equals the case value times the weight
    let lhs = weighted_log_bracket(n, n + 1, w).unwrap();
    let wk = &(&int(w, 1) + &(&x(n + 1) * &x(n + 1))) + &(&y(n + 1) * &y(n + 1));
    assert_eq!(lhs.re, &c.re * &wk);
    assert!(log_bracket_case(n, n + 2, w).unwrap().is_zero());
    assert!(weighted_log_bracket(n, n + 2, w).unwrap().is_zero());
}

#[test]
fn hamilton_check_reproduces_flow() {
    let r = hamilton_check(Window::symmetric(4)).unwrap();
    assert!(r.passed(), "{r:?}");
    assert_eq!(r.cases_checked, 49);
    assert_eq!(r.sums_checked, 5);
    assert!(matches!(hamilton_check(Window::new(0, 3).unwrap()), Err(LatticeError::Window(_))));
}

#[test]
fn hamilton_sum_matches_numeric_flow() {
    // summed cases equal −(1+|α_n|²)(α_{n+1}+α_{n−1}) + 2α_n − 2Re(ᾱ_{lo+1}α_lo)α_n
    let w = Window::symmetric(4);
    let a = random_field(w, 5);
    for n in -2..=2 {
        let mut re = 0.0;
        let mut im = 0.0;
        for k in -3..=3 {
            let c = log_bracket_case(n, k, w).unwrap();
            re += c.re.eval(&a);
            im += c.im.eval(&a);
        }
        let z = |k| a.get(k);
        let expect = -(1.0 + z(n).norm_sqr()) * (z(n + 1) + z(n - 1)) + 2.0 * z(n)
            - 2.0 * (z(-3).conj() * z(-4)).re * z(n);
        assert!((Complex64::new(re, im) - expect).norm() < 1e-12);
    }
}

#[test]
fn spin_bracket_of_linear_functions() {
    let s = sample_gibbs_chain(Beta::new(1.0).unwrap(), Window::new(0, 4).unwrap(), &mut RngStream::new(2, 0));
    let a = Vec3::new(0.3, -1.2, 0.5);
    let b = Vec3::new(-0.7, 0.1, 2.0);
    let v = spin_bracket_numeric(|x: &SpinField| Ok(a.dot(&x.values()[2])), |x: &SpinField| Ok(b.dot(&x.values()[2])), &s)
        .unwrap();
    assert!((v - a.dot(&s.values()[2].cross(&b))).abs() < 1e-8);
    let off =
        spin_bracket_numeric(|x: &SpinField| Ok(a.dot(&x.values()[1])), |x: &SpinField| Ok(b.dot(&x.values()[3])), &s)
            .unwrap();
    assert!(off.abs() < 1e-8);
}

#[test]
fn cos_theta_brackets() {
    let mut rng = RngStream::new(3, 0);
    let w = Window::new(0, 6).unwrap();
    for _ in 0..100 {
        let s = sample_gibbs_chain(Beta::new(1.0).unwrap(), w, &mut rng);
        let tg = theta_gamma_from_spins(&s).unwrap();
        let (t, ga) = (tg.theta(), tg.gamma());
        let cos_t = |k: usize| move |x: &SpinField| Ok(x.values()[k].dot(&x.values()[k + 1]));
        let n = 2usize;
        for m in 0..5usize {
            let v = spin_bracket_numeric(cos_t(m), cos_t(n), &s).unwrap();
            let expect = if m == n + 1 {
                -t[n].sin() * t[n + 1].sin() * ga[n + 1].sin()
            } else if m + 1 == n {
                t[m].sin() * t[m + 1].sin() * ga[m + 1].sin()
            } else {
                0.0
            };
            assert!((v - expect).abs() < 1e-8, "m = {m}: {v} vs {expect}");
        }
    }
}

#[test]
fn bracket_tables_match_spin_brackets() {
    let r = verify_bracket_tables(100, &mut RngStream::new(11, 0)).unwrap();
    for row in &r.rows {
        assert!(row.max_discrepancy <= 1e-6, "{}: {}", row.name, row.max_discrepancy);
    }
    assert_eq!(r.samples, 100);
    assert!(verify_bracket_tables(0, &mut RngStream::new(1, 0)).is_err());
}

#[test]
fn fingerprint_is_stable() {
    let a = table_fingerprint();
    assert_eq!(a.len(), 64);
    assert_eq!(a, table_fingerprint());
}

fn small_poly(w: Window) -> impl Strategy<Value = BracketPoly> {
    let gens = generators(Window::symmetric(2));
    prop::collection::vec((-3i64..=3, prop::collection::vec(0usize..gens.len(), 0..=3)), 1..4).prop_map(move |terms| {
        let mut p = BracketPoly::zero(w);
        for (c, idx) in terms {
            let mut m = int(w, c);
            for i in idx {
                m = &m * &BracketPoly::generator(w, gens[i]).unwrap();
            }
            p = &p + &m;
        }
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn leibniz_and_antisymmetry(f in small_poly(win()), gp in small_poly(win()), h in small_poly(win())) {
        for t in [BracketTable::Alpha, BracketTable::Standard] {
            let lhs = bracket(&(&f * &gp), &h, t).unwrap();
            let rhs = &(&f * &bracket(&gp, &h, t).unwrap()) + &(&bracket(&f, &h, t).unwrap() * &gp);
            prop_assert_eq!(lhs, rhs);
            let ab = bracket(&f, &h, t).unwrap();
            let ba = bracket(&h, &f, t).unwrap();
            prop_assert!((&ab + &ba).is_zero());
        }
    }
}
