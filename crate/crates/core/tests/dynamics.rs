use std::f64::consts::{LN_2, TAU};

use lattice_hasimoto::dynamics::*;
use lattice_hasimoto::hasimoto::{alphas_from_spins_frame, spins_from_alphas};
use lattice_hasimoto::lattice::{ALField, Beta, RngStream, Rotation, SpinField, Trajectory, Vec3, Window};
use lattice_hasimoto::sampling::{sample_gibbs_chain, sample_haar_rotation, sample_white_noise};
use lattice_hasimoto::LatticeError;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn white_noise(k: u32, seed: u64) -> ALField {
    sample_white_noise(Beta::new(1.0).unwrap(), Window::symmetric(k), &mut RngStream::new(seed, 0))
}

fn random_spins(len: i64, seed: u64) -> SpinField {
    let mut rng = RngStream::new(seed, 7);
    SpinField::new(Window::new(0, len - 1).unwrap(), (0..len).map(|_| rng.unit_vector()).collect()).unwrap()
}

fn tight() -> IntegratorConfig {
    IntegratorConfig::new(1e-12, 1e-14, 0.05).unwrap()
}

fn max_diff_al(a: &ALField, b: &ALField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn max_diff_spins(a: &SpinField, b: &SpinField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

#[test]
fn al_field_zero_and_single_site() {
    let w = Window::symmetric(3);
    let z = al_vector_field(&ALField::zeros(w), Boundary::Free);
    assert!(z.values().iter().all(|v| *v == c(0.0, 0.0)));

    let x = 0.7;
    let mut v = vec![c(0.0, 0.0); 7];
    v[3] = c(x, 0.0);
    let d = al_vector_field(&ALField::new(w, v).unwrap(), Boundary::Free);
    assert!((d.get(0) - c(0.0, -2.0 * x)).norm() < 1e-15);
    assert!((d.get(1) - c(0.0, x)).norm() < 1e-15);
    assert!((d.get(-1) - c(0.0, x)).norm() < 1e-15);
    assert_eq!(d.get(2), c(0.0, 0.0));
}

#[test]
fn al_free_boundary_drops_missing_neighbour() {
    let w = Window::new(0, 1).unwrap();
    let a = ALField::new(w, vec![c(0.3, 0.1), c(-0.2, 0.5)]).unwrap();
    let d = al_vector_field(&a, Boundary::Free);
    // oracle: i dα_0/dt = −(1+|α_0|²) α_1 + 2α_0
    let a0 = a.get(0);
    let a1 = a.get(1);
    let expect0 = -Complex64::i() * (-(1.0 + a0.norm_sqr()) * a1 + 2.0 * a0);
    let expect1 = -Complex64::i() * (-(1.0 + a1.norm_sqr()) * a0 + 2.0 * a1);
    assert!((d.get(0) - expect0).norm() < 1e-15);
    assert!((d.get(1) - expect1).norm() < 1e-15);
}

#[test]
fn plane_wave_is_eigenmode_of_periodic_field() {
    let (k, amp) = (TAU / 16.0, 0.5);
    let w = Window::new(0, 15).unwrap();
    let a = ALField::new(w, (0..16).map(|n| Complex64::from_polar(amp, k * n as f64)).collect()).unwrap();
    let omega = 2.0 - 2.0 * (1.0 + amp * amp) * k.cos();
    let d = al_vector_field(&a, Boundary::Periodic);
    for n in w.sites() {
        // i dα/dt = ω α
        assert!((Complex64::i() * d.get(n) - omega * a.get(n)).norm() < 1e-14);
    }
}

#[test]
fn plane_wave_evolution_matches_dispersion() {
    let (k, amp, t_final) = (TAU / 16.0, 0.5, 5.0);
    let w = Window::new(0, 15).unwrap();
    let a = ALField::new(w, (0..16).map(|n| Complex64::from_polar(amp, k * n as f64)).collect()).unwrap();
    let omega = 2.0 - 2.0 * (1.0 + amp * amp) * k.cos();
    let times = sample_times(t_final, 50);
    let (traj, _) = integrate_al(&a, Boundary::Periodic, &times, &IntegratorConfig::default()).unwrap();
    let mut err = 0.0f64;
    for (t, st) in traj.iter() {
        for n in w.sites() {
            let exact = Complex64::from_polar(amp, k * n as f64 - omega * t);
            err = err.max((st.get(n) - exact).norm());
        }
    }
    assert!(err <= 1e-6, "plane wave error {err}");
}

#[test]
fn zero_final_time_returns_initial_state() {
    let a = white_noise(4, 1);
    let (traj, stats) = integrate_al(&a, Boundary::Free, &[0.0], &IntegratorConfig::default()).unwrap();
    assert_eq!(traj.len(), 1);
    assert_eq!(traj.states()[0], a);
    assert_eq!(stats.accepted, 0);
}

#[test]
fn lhm_and_heis_fields_small_cases() {
    let w = Window::new(0, 1).unwrap();
    let s = SpinField::new(w, vec![Vec3::z(), Vec3::x()]).unwrap();
    let d = lhm_vector_field(&s, Boundary::Free).unwrap();
    assert!((d[0] - Vec3::new(0.0, -2.0, 0.0)).amax() < 1e-15);
    assert!((d[1] - Vec3::new(0.0, 2.0, 0.0)).amax() < 1e-15);
    let h = heis_vector_field(&s, Boundary::Free);
    assert!((h[0] - Vec3::new(0.0, -1.0, 0.0)).amax() < 1e-15);

    let same = SpinField::new(Window::new(0, 4).unwrap(), vec![Vec3::new(0.6, 0.0, 0.8); 5]).unwrap();
    assert!(lhm_vector_field(&same, Boundary::Free).unwrap().iter().all(|v| v.amax() == 0.0));
    assert!(heis_vector_field(&same, Boundary::Periodic).iter().all(|v| v.amax() == 0.0));

    let anti = SpinField::new(w, vec![Vec3::z(), -Vec3::z()]).unwrap();
    assert!(matches!(lhm_vector_field(&anti, Boundary::Free), Err(LatticeError::Degeneracy { .. })));
}

#[test]
fn spin_fields_are_tangent() {
    let s = random_spins(40, 3);
    for (v, d) in s.values().iter().zip(lhm_vector_field(&s, Boundary::Free).unwrap()) {
        assert!(v.dot(&d).abs() <= 1e-14 * d.norm().max(1.0));
    }
    for (v, d) in s.values().iter().zip(heis_vector_field(&s, Boundary::Periodic)) {
        assert!(v.dot(&d).abs() <= 1e-14 * d.norm().max(1.0));
    }
}

#[test]
fn hamiltonian_values() {
    let w = Window::symmetric(2);
    let z = ALField::zeros(w);
    assert_eq!(h_lhm_alpha(&z), 0.0);
    assert_eq!(h_al(&z, Boundary::Free), 0.0);
    let one = ALField::new(Window::new(0, 0).unwrap(), vec![c(1.0, 0.0)]).unwrap();
    assert!((h_lhm_alpha(&one) - 2.0 * LN_2).abs() < 1e-15);
    assert!((h_al(&one, Boundary::Free) - LN_2).abs() < 1e-15);
}

#[test]
fn h_lhm_agrees_across_transform() {
    for seed in 0..10 {
        let a = white_noise(20, seed);
        let o = sample_haar_rotation(&mut RngStream::new(seed, 99));
        let (s, _) = spins_from_alphas(&a, &o);
        let lhs = h_lhm_alpha(&a);
        let rhs = h_lhm_spins(&s, Boundary::Free).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1.0), "{lhs} vs {rhs}");
    }
}

#[test]
fn h_lhm_is_stationary_along_lhm_field() {
    // directional derivative of H by symmetric differences along the field
    let s = sample_gibbs_chain(Beta::new(1.0).unwrap(), Window::new(0, 15).unwrap(), &mut RngStream::new(5, 0));
    let d = lhm_vector_field(&s, Boundary::Free).unwrap();
    let h = 1e-5;
    let shift = |eps: f64| {
        let v = s.values().iter().zip(&d).map(|(x, y)| x + eps * y).collect();
        SpinField::normalized(s.window(), v).unwrap()
    };
    let dh = (h_lhm_spins(&shift(h), Boundary::Free).unwrap() - h_lhm_spins(&shift(-h), Boundary::Free).unwrap())
        / (2.0 * h);
    let scale: f64 = d.iter().map(|v| v.norm()).sum();
    assert!(dh.abs() < 1e-6 * scale.max(1.0), "dH/dt = {dh}");
}

#[test]
fn al_conservation_k64() {
    let a = white_noise(64, 11);
    let times = sample_times(10.0, 100);
    let (traj, _) = integrate_al(&a, Boundary::Free, &times, &IntegratorConfig::default()).unwrap();
    let rep = conserved_report_al(&traj, Boundary::Free);
    let (d_lhm, d_al) = (rep.drift_of("H_LHM").unwrap(), rep.drift_of("H_AL").unwrap());
    assert!(d_lhm <= 1e-8 && d_al <= 1e-8, "drifts {d_lhm} {d_al}");

    let cfg = IntegratorConfig::new(1e-11, 1e-13, 0.05).unwrap();
    let (tighter, _) = integrate_al(&a, Boundary::Free, &times, &cfg).unwrap();
    let rep2 = conserved_report_al(&tighter, Boundary::Free);
    assert!(rep2.drift_of("H_LHM").unwrap() < d_lhm.max(1e-14));
}

#[test]
fn heis_conservation_and_spin_norm() {
    let s = random_spins(65, 4);
    let times = sample_times(10.0, 100);
    let (traj, stats) =
        integrate_spins(&s, SpinModel::Heis, Boundary::Free, &times, &IntegratorConfig::default()).unwrap();
    let rep = conserved_report_spins(&traj, SpinModel::Heis, Boundary::Free).unwrap();
    assert!(rep.drift_of("H_Heis").unwrap() <= 1e-8);
    assert!(stats.max_projection <= 1e-10, "renormalization {}", stats.max_projection);
    for st in traj.states() {
        assert!(st.values().iter().all(|v| (v.norm() - 1.0).abs() <= 1e-8));
    }
}

#[test]
fn lhm_conservation() {
    let s = sample_gibbs_chain(Beta::new(1.0).unwrap(), Window::new(0, 32).unwrap(), &mut RngStream::new(8, 0));
    let times = sample_times(2.0, 40);
    let cfg = IntegratorConfig::default();
    let (traj, stats) = integrate_spins(&s, SpinModel::Lhm, Boundary::Free, &times, &cfg).unwrap();
    let rep = conserved_report_spins(&traj, SpinModel::Lhm, Boundary::Free).unwrap();
    assert!(rep.drift_of("H_LHM").unwrap() <= 10.0 * cfg.rel_tol * 100.0);
    assert!(stats.max_projection <= 1e-10);
}

#[test]
fn time_reversibility() {
    let a = white_noise(16, 21);
    let cfg = IntegratorConfig::default();
    let (fwd, _) = integrate_al(&a, Boundary::Free, &[0.0, 1.0], &cfg).unwrap();
    let (back, _) = integrate_al(fwd.last().1, Boundary::Free, &[0.0, -1.0], &cfg).unwrap();
    let err = max_diff_al(back.last().1, &a);
    let scale = a.values().iter().map(|v| v.norm()).fold(1.0, f64::max);
    assert!(err <= 100.0 * cfg.rel_tol * scale, "reversibility error {err}");
}

#[test]
fn degenerate_lhm_names_site() {
    let w = Window::new(0, 2).unwrap();
    let s = SpinField::new(w, vec![Vec3::z(), Vec3::x(), Vec3::new(0.0, 0.0, -1.0)]).unwrap();
    let s2 = SpinField::new(w, vec![Vec3::z(), -Vec3::z(), Vec3::x()]).unwrap();
    assert!(integrate_spins(&s, SpinModel::Lhm, Boundary::Free, &[0.0, 0.1], &IntegratorConfig::default()).is_ok());
    let err = integrate_spins(&s2, SpinModel::Lhm, Boundary::Free, &[0.0, 0.1], &IntegratorConfig::default());
    assert!(matches!(err, Err(LatticeError::Degeneracy { site: 0, .. }) | Err(LatticeError::Integration { .. })));
}

#[test]
fn a_matrix_is_antisymmetric() {
    let a = white_noise(6, 2);
    for n in -7..=7 {
        let m = a_matrix(&a, n);
        assert_eq!(m + m.transpose(), lattice_hasimoto::lattice::Mat3::zeros());
    }
}

#[test]
fn zero_trajectory_keeps_frame() {
    let w = Window::symmetric(3);
    let times = sample_times(1.0, 20);
    let traj = Trajectory::new(times.clone(), vec![ALField::zeros(w); times.len()]).unwrap();
    let o = sample_haar_rotation(&mut RngStream::new(1, 1));
    let evo = frame_evolution(&traj, &o, &IntegratorConfig::default()).unwrap();
    for fs in evo.frames.states() {
        assert!((fs.frames()[0].matrix() - o.matrix()).amax() < 1e-14);
    }
    let spins = spins_from_frame_traj(&evo.frames);
    for st in spins.states() {
        assert!(max_diff_spins(st, &spins.states()[0]) < 1e-14);
    }
}

#[test]
fn frame_evolution_rejects_coarse_samples() {
    let w = Window::symmetric(2);
    let traj = Trajectory::new(vec![0.0, 1.0], vec![ALField::zeros(w); 2]).unwrap();
    let err = frame_evolution(&traj, &Rotation::identity(), &IntegratorConfig::default());
    assert!(matches!(err, Err(LatticeError::Resolution(_))));
}

fn residual_at(dt: f64, t_final: f64, k: u32) -> (f64, f64, f64) {
    let a = white_noise(k, 31);
    let times = sample_times(t_final, (t_final / dt).round() as usize);
    let (traj, _) = integrate_al(&a, Boundary::Free, &times, &tight()).unwrap();
    (zero_curvature_residual(&traj), flux_residual(&traj, Boundary::Free), {
        let evo = frame_evolution(&traj, &Rotation::identity(), &tight()).unwrap();
        lhm_residual(&spins_from_frame_traj(&evo.frames), Boundary::Free).unwrap()
    })
}

#[test]
fn flux_and_lhm_residuals_are_second_order() {
    let (_, fl1, lhm1) = residual_at(1e-3, 1.0, 16);
    let (_, fl2, lhm2) = residual_at(5e-4, 1.0, 16);
    assert!(fl1 / fl2 > 3.5, "flux ratio {}", fl1 / fl2);
    assert!(lhm1 <= 1e-4, "LHM residual {lhm1}");
    assert!(lhm1 / lhm2 > 3.5, "LHM ratio {}", lhm1 / lhm2);
}

#[test]
fn zero_curvature_residual_is_small_and_second_order() {
    let (zc1, _, _) = residual_at(1e-4, 0.1, 16);
    let (zc2, _, _) = residual_at(5e-5, 0.1, 16);
    assert!(zc2 <= 1e-6, "zero-curvature residual {zc2}");
    assert!(zc1 / zc2 > 3.5, "zero-curvature ratio {}", zc1 / zc2);
}

#[test]
fn frame_evolved_spins_match_direct_lhm_integration() {
    let a = white_noise(16, 41);
    let times = sample_times(1.0, 100);
    let o = sample_haar_rotation(&mut RngStream::new(3, 3));
    let (traj, evo) = integrate_al_with_frame(&a, &o, &times, &tight()).unwrap();
    assert!(evo.anchor_drift <= 1e-8);
    let spins = spins_from_frame_traj(&evo.frames);
    let (direct, _) = integrate_spins(&spins.states()[0], SpinModel::Lhm, Boundary::Free, &times, &tight()).unwrap();
    for (x, y) in spins.states().iter().zip(direct.states()) {
        assert!(max_diff_spins(x, y) < 1e-7, "{}", max_diff_spins(x, y));
    }
    let rep = conserved_report_spins(&spins, SpinModel::Lhm, Boundary::Free).unwrap();
    assert!(rep.drift_of("H_LHM").unwrap() <= 1e-6);
    let h0 = h_lhm_alpha(&traj.states()[0]);
    assert!((rep.initial[0] - h0).abs() <= 1e-10 * h0.max(1.0));
}

#[test]
fn gauge_equivariance_of_frame_pipeline() {
    let a = white_noise(12, 51);
    let times = sample_times(0.5, 100);
    let (traj, _) = integrate_al(&a, Boundary::Free, &times, &tight()).unwrap();
    let o = sample_haar_rotation(&mut RngStream::new(4, 4));
    let id = frame_evolution(&traj, &Rotation::identity(), &tight()).unwrap();
    let rot = frame_evolution(&traj, &o, &tight()).unwrap();
    let (s_id, s_rot) = (spins_from_frame_traj(&id.frames), spins_from_frame_traj(&rot.frames));
    for ((a_t, x), y) in traj.states().iter().zip(s_id.states()).zip(s_rot.states()) {
        assert!(max_diff_spins(&x.rotate(&o), y) < 1e-8);
        assert_eq!(y.window(), Window::new(a_t.window().lo(), a_t.window().hi() + 1).unwrap());
    }
    // frames at time t are the transform of α(t) from the evolved anchor
    for (fs, a_t) in rot.frames.states().iter().zip(traj.states()) {
        let (s, _) = spins_from_alphas(a_t, &fs.frames()[0]);
        assert!(max_diff_spins(&s, &fs.spins()) < 1e-8);
        let (back, _) = alphas_from_spins_frame(&fs.spins(), &fs.frames()[0]).unwrap();
        assert!(max_diff_al(&back, a_t) < 1e-8);
    }
    // interpolated anchor agrees with the jointly integrated one
    let (_, joint) = integrate_al_with_frame(&a, &o, &times, &tight()).unwrap();
    let s_joint = spins_from_frame_traj(&joint.frames);
    for (x, y) in s_joint.states().iter().zip(s_rot.states()) {
        assert!(max_diff_spins(x, y) < 1e-8, "{}", max_diff_spins(x, y));
    }
}

#[test]
fn diagnostics_of_zero_data() {
    let w = Window::symmetric(4);
    let times = sample_times(1.0, 20);
    let traj = Trajectory::new(times.clone(), vec![ALField::zeros(w); times.len()]).unwrap();
    let p = GoodSolutionParams::default();
    let r = good_solution_diagnostics_al(&traj, &p).unwrap();
    assert_eq!((r.hyp1, r.hyp2), (0.0, 0.0));
    let frames = frame_evolution(&traj, &Rotation::identity(), &IntegratorConfig::default()).unwrap();
    let rs = good_solution_diagnostics_spins(&spins_from_frame_traj(&frames.frames), &p).unwrap();
    assert_eq!((rs.hyp1_centered, rs.hyp2_centered), (0.0, 0.0));
    // raw spin integrands: (1+1)^{-p} and 1/2 at every pair
    let pairs: Vec<f64> = w.sites().map(|n| (1.0 + (n * n) as f64).sqrt()).collect();
    let expect1: f64 = pairs.iter().map(|j| j.powf(-1.5) * 0.25).sum();
    let expect2: f64 = pairs.iter().map(|j| (-4.0 * j).exp() * 0.5).sum();
    assert!((rs.hyp1 - expect1).abs() < 1e-14);
    assert!((rs.hyp2 - expect2).abs() < 1e-14);
}

#[test]
fn diagnostics_parameter_checks() {
    let traj = Trajectory::new(vec![0.0], vec![ALField::zeros(Window::symmetric(1))]).unwrap();
    for p in [
        GoodSolutionParams { p: 1.2, q: 1.5, c: 4.0 },
        GoodSolutionParams { p: 2.0, q: 1.0, c: 4.0 },
        GoodSolutionParams { p: 2.0, q: 1.5, c: 0.0 },
    ] {
        assert!(matches!(good_solution_diagnostics_al(&traj, &p), Err(LatticeError::Parameter(_))));
    }
}

#[test]
fn spin_diagnostics_match_alpha_side() {
    // (2/(1+S·S))^p − 1 = (1+|α|²)^p − 1 and 2/(1+S·S) − 1 = |α|²
    let a = white_noise(10, 61);
    let times = sample_times(0.2, 20);
    let (traj, evo) = integrate_al_with_frame(&a, &Rotation::identity(), &times, &tight()).unwrap();
    let p = GoodSolutionParams::default();
    let rs = good_solution_diagnostics_spins(&spins_from_frame_traj(&evo.frames), &p).unwrap();
    let ra = good_solution_diagnostics_al(&traj, &p).unwrap();
    assert!((rs.hyp2_centered - ra.hyp2).abs() <= 1e-9 * ra.hyp2.max(1e-300));
    let mut oracle = Vec::new();
    for st in traj.states() {
        let s: f64 = st
            .window()
            .sites()
            .map(|n| (1.0 + (n * n) as f64).powf(-0.75) * ((1.0 + st.get(n).norm_sqr()).powi(2) - 1.0))
            .sum();
        oracle.push(s);
    }
    let dt = 0.01;
    let integral: f64 = oracle.windows(2).map(|w| 0.5 * dt * (w[0] + w[1])).sum();
    assert!((rs.hyp1_centered - integral).abs() <= 1e-8 * integral.max(1.0));
}

#[test]
fn diagnostics_invariance() {
    let a = white_noise(12, 71);
    let times = sample_times(0.3, 30);
    let (traj, evo) = integrate_al_with_frame(&a, &Rotation::identity(), &times, &tight()).unwrap();
    let p = GoodSolutionParams::default();
    let base = good_solution_diagnostics_al(&traj, &p).unwrap();
    let phased = Trajectory::new(times.clone(), traj.states().iter().map(|s| s.rotate_phase(1.234)).collect()).unwrap();
    let r = good_solution_diagnostics_al(&phased, &p).unwrap();
    assert!((r.hyp1 - base.hyp1).abs() <= 1e-13 * base.hyp1);
    assert!((r.hyp2 - base.hyp2).abs() <= 1e-13 * base.hyp2);

    let spins = spins_from_frame_traj(&evo.frames);
    let o = sample_haar_rotation(&mut RngStream::new(9, 9));
    let rotated = Trajectory::new(times, spins.states().iter().map(|s| s.rotate(&o)).collect()).unwrap();
    let s0 = good_solution_diagnostics_spins(&spins, &p).unwrap();
    let s1 = good_solution_diagnostics_spins(&rotated, &p).unwrap();
    for (x, y) in [(s0.hyp1, s1.hyp1), (s0.hyp2, s1.hyp2), (s0.hyp1_centered, s1.hyp1_centered)] {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-12), "{x} vs {y}");
    }
}

#[test]
fn truncation_gap_decays() {
    let big = white_noise(128, 81);
    let times = sample_times(1.0, 20);
    let mut sups = Vec::new();
    for k in [8u32, 16, 32, 64] {
        let small = lattice_hasimoto::lattice::window_restrict(&big, Window::symmetric(k)).unwrap();
        let large = lattice_hasimoto::lattice::window_restrict(&big, Window::symmetric(2 * k)).unwrap();
        let (trajs, _) = integrate_al_blocks(&[&small, &large], Boundary::Free, &times, &IntegratorConfig::default()).unwrap();
        let curve = truncation_gap_curve(&trajs[0], &trajs[1], 4.0).unwrap();
        assert_eq!(curve[0], (Window::symmetric(2 * k).sites())
            .filter(|n| n.abs() > k as i64)
            .map(|n| (-4.0 * (1.0 + (n * n) as f64).sqrt()).exp() * big.get(n).norm_sqr())
            .sum::<f64>());
        sups.push(curve.iter().cloned().fold(0.0, f64::max));
    }
    for w in sups.windows(2) {
        assert!(w[1] < 0.5 * w[0], "{sups:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flux_identity_holds_pointwise(seed in 0u64..1000, n in -5i64..=5) {
        // d/dt log(1+|α_n|²) = 2 Re(ᾱ_n dα_n/dt)/(1+|α_n|²)
        let a = white_noise(5, seed);
        let d = al_vector_field(&a, Boundary::Free);
        let lhs = 2.0 * (a.get(n).conj() * d.get(n)).re / (1.0 + a.get(n).norm_sqr());
        let rhs = -2.0 * (a.get(n).conj() * a.get(n + 1)).im + 2.0 * (a.get(n - 1).conj() * a.get(n)).im;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + a.get(n).norm_sqr()) * (1.0 + lhs.abs()));
    }

    #[test]
    fn zero_curvature_matches_derivative_of_q(seed in 0u64..1000, n in -4i64..=4) {
        // dQ_n/dt by the chain rule with a tiny symmetric step in α_n
        let a = white_noise(4, seed);
        let d = al_vector_field(&a, Boundary::Free);
        let h = 1e-6;
        let q = |z: Complex64| lattice_hasimoto::hasimoto::q_matrix(z);
        let qe = |z: Complex64| lattice_hasimoto::hasimoto::so3_exp(&q(z));
        let fd = (qe(a.get(n) + h * d.get(n)) - qe(a.get(n) - h * d.get(n))) / (2.0 * h);
        let scale = 1.0 + d.get(n).norm() * (1.0 + a.get(n).norm_sqr());
        prop_assert!((fd - zero_curvature_rhs(&a, n)).amax() <= 1e-6 * scale);
    }
}
