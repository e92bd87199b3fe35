mod common;

use std::f64::consts::PI;

use circharm::baseline::{correlation_score, harris, kitchen_rosenfeld, ls_template, slepian_template};
use circharm::harmonic::{build_template, hermitian_form, reconstruct, s_aux, steer};
use circharm::kernel_bank::{basis_filter, build_bank, gamma_coeff};
use circharm::pnm::{decode_pgm, encode_pgm};
use circharm::spectrum::{compute_spectrum, direct_spectrum, max_relative_difference};
use circharm::synth::{auc_from_points, roc_from_scores, roc_run, sample_scene, trial_rng, DetectorKind, DetectorSettings, FrameDetector};
use circharm::wedge::{orientation_sweep, score_map, z_statistic};
use circharm::{BankParams, Complex64, DetectorConfig, GrayImage, Spectrum};
use common::*;
use proptest::prelude::*;

fn default_bank() -> circharm::KernelBank {
    build_bank(BankParams::default()).unwrap()
}

fn spectrum_strategy(max_order: usize) -> impl Strategy<Value = Spectrum> {
    (any::<u64>()).prop_map(move |seed| random_spectrum(&mut rng(seed), max_order))
}

fn argmax(g: &GrayImage) -> (usize, usize) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for r in 0..g.height() {
        for c in 0..g.width() {
            if g.get(c, r) > best.2 {
                best = (c, r, g.get(c, r));
            }
        }
    }
    (best.0, best.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn separable_components_rebuild_the_polar_filter(lambda in 1.0f64..5.0, k in 3usize..15, l_max in 0usize..9) {
        let p = BankParams::new(lambda, k, l_max).unwrap();
        let bank = build_bank(p).unwrap();
        for l in 0..=l_max {
            let polar = basis_filter(l, &p).unwrap();
            let sep = bank.separable_filter(l);
            let scale = polar.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for (a, b) in polar.values.iter().zip(&sep.values) {
                prop_assert!((a - b).norm() <= 1e-12 * scale);
            }
            prop_assert!(rel(sep.energy(), polar.energy()) < 1e-12);
        }
    }

    #[test]
    fn basis_filters_have_reflection_parity(lambda in 1.0f64..5.0, k in 1usize..15, l in 0usize..9) {
        let p = BankParams::new(lambda, k, 8).unwrap();
        let f = basis_filter(l, &p).unwrap();
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let kk = k as isize;
        for my in -kk..=kk {
            for mx in -kk..=kk {
                let d = f.get(-mx, -my) - f.get(mx, my) * sign;
                prop_assert!(d.norm() <= 1e-12 * f.get(mx, my).norm().max(1e-300));
            }
        }
    }

    #[test]
    fn grid_sum_vanishes_off_the_square_symmetric_orders(lambda in 1.0f64..5.0, k in 1usize..15, l in 1usize..13) {
        prop_assume!(l % 4 != 0);
        let p = BankParams::new(lambda, k, 12).unwrap();
        let f = basis_filter(l, &p).unwrap();
        let scale = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(f.sum().norm() <= 1e-12 * scale);
    }

    #[test]
    fn gamma_rows_sum_to_powers_of_two(l in 0i64..40) {
        let total: f64 = (0..=l).map(|k| gamma_coeff(l, k).unwrap().norm()).sum();
        prop_assert_eq!(total, 2f64.powi(l as i32));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn separable_matches_direct(seed in any::<u64>(), w in 25usize..40, h in 25usize..40) {
        let bank = default_bank();
        let img = noise_image(w, h, seed);
        let fast = compute_spectrum(&img, &bank).unwrap();
        let slow = direct_spectrum(&img, &bank).unwrap();
        prop_assert!(max_relative_difference(&fast, &slow, 12) < 1e-9);
    }

    #[test]
    fn spectrum_is_linear(s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let bank = default_bank();
        let (i1, i2) = (noise_image(30, 28, s1), noise_image(30, 28, s2));
        let mix = GrayImage::from_fn(30, 28, |c, r| a * i1.get(c, r) + b * i2.get(c, r));
        let (f1, f2, fm) = (
            compute_spectrum(&i1, &bank).unwrap(),
            compute_spectrum(&i2, &bank).unwrap(),
            compute_spectrum(&mix, &bank).unwrap(),
        );
        let scale = f1.plane(0).iter().chain(f2.plane(0)).map(|v| v.norm()).fold(0.0, f64::max);
        for l in 0..=6 {
            for i in 0..30 * 28 {
                let expect = f1.plane(l)[i] * a + f2.plane(l)[i] * b;
                prop_assert!((fm.plane(l)[i] - expect).norm() <= 1e-12 * scale * (a.abs() + b.abs() + 1.0));
            }
        }
    }

    #[test]
    fn spectrum_is_translation_equivariant(seed in any::<u64>(), dx in 0usize..8, dy in 0usize..8) {
        let bank = default_bank();
        let big = noise_image(40, 40, seed);
        let (w, h) = (30, 30);
        let crop = GrayImage::from_fn(w, h, |c, r| big.get(c + dx, r + dy));
        let fb = compute_spectrum(&big, &bank).unwrap();
        let fc = compute_spectrum(&crop, &bank).unwrap();
        for (c, r) in circharm::image::interior(w, h, 12) {
            for l in 0..=6 {
                prop_assert_eq!(fc.get(l, c, r), fb.get(l, c + dx, r + dy));
            }
        }
    }

    #[test]
    fn quarter_turn_steers_every_order(seed in any::<u64>(), n in 25usize..36) {
        let bank = default_bank();
        let img = noise_image(n, n, seed);
        let f = compute_spectrum(&img, &bank).unwrap();
        let g = compute_spectrum(&img.rotate_ccw(), &bank).unwrap();
        let scale = f.plane(0).iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (c, r) in circharm::image::interior(n, n, 12) {
            // rotated(c', r') = original(n - 1 - r', c')
            let (oc, or) = (n - 1 - r, c);
            for l in 0..=6 {
                let phase = Complex64::from_polar(1.0, -(l as f64) * PI / 2.0);
                prop_assert!((g.get(l, c, r) - f.get(l, oc, or) * phase).norm() <= 1e-12 * scale);
            }
        }
    }
}

#[test]
fn spectrum_is_independent_of_thread_count() {
    let bank = default_bank();
    let img = noise_image(70, 50, 7);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| compute_spectrum(&img, &bank).unwrap());
    let b = four.install(|| compute_spectrum(&img, &bank).unwrap());
    assert_eq!(a, b);
    let cfg = DetectorConfig::for_width(PI / 2.0, 6).unwrap();
    let za = one.install(|| score_map(&a, &cfg).unwrap());
    let zb = four.install(|| score_map(&b, &cfg).unwrap());
    assert_eq!(za, zb);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction_is_real(s in spectrum_strategy(6), theta in -10.0f64..10.0) {
        let v = s.reconstruct_complex(theta);
        prop_assert!(v.im.abs() < 1e-12 * v.re.abs().max(1.0));
    }

    #[test]
    fn steering_rotates_the_reconstruction(s in spectrum_strategy(6), alpha in -7.0f64..7.0, theta in -7.0f64..7.0) {
        let a = reconstruct(&steer(&s, alpha), theta);
        let b = reconstruct(&s, theta + alpha);
        prop_assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        let back = steer(&steer(&s, alpha), -alpha);
        for (x, y) in back.coeffs().iter().zip(s.coeffs()) {
            prop_assert!((x - y).norm() < 1e-13 * y.norm().max(1.0));
        }
    }

    #[test]
    fn s_aux_is_even(l in 0isize..40, phi in 0.0f64..PI) {
        prop_assert_eq!(s_aux(-l, phi), s_aux(l, phi));
    }

    #[test]
    fn full_circle_power_is_steering_invariant(s in spectrum_strategy(6), alpha in -7.0f64..7.0) {
        let dim = 13isize;
        let full: Vec<f64> = (0..dim).flat_map(|m| (0..dim).map(move |n| s_aux(m - n, PI))).collect();
        let p0 = hermitian_form(&full, &s);
        let p1 = hermitian_form(&full, &steer(&s, alpha));
        prop_assert!(rel(p1.re, p0.re) < 1e-12);
        let parseval: f64 = 2.0 * PI * s.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>();
        prop_assert!(rel(p0.re, parseval) < 1e-12);
    }

    #[test]
    fn inner_and_outer_tables_tile_the_circle(phi in 0.05f64..3.0) {
        let t = build_template(phi, 0.0, 0.0, 6).unwrap();
        let dim = t.dim() as isize;
        for m in 0..dim {
            for n in 0..dim {
                let i = (m * dim + n) as usize;
                prop_assert!((t.big_s1[i] + t.big_s0[i] - s_aux(m - n, PI)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn z_flips_sign_with_the_image(s in spectrum_strategy(6), theta in 0.0f64..6.3, w in 0usize..5) {
        let t = build_template(WIDTHS_DEG[w].to_radians() / 2.0, WIDTHS_DEG[w].to_radians() / 6.0, 255.0 * 255.0, 6).unwrap();
        let z = z_statistic(&s, &t, theta).unwrap();
        let zn = z_statistic(&s.scale(-1.0), &t, theta).unwrap();
        prop_assert!((z + zn).abs() < 1e-12 * z.abs().max(1.0));
    }

    #[test]
    fn z_is_affine_invariant_without_a_floor(s in spectrum_strategy(6), a in 0.01f64..50.0, b in -500.0f64..500.0, theta in 0.0f64..6.3) {
        let t = build_template(PI / 4.0, PI / 12.0, 0.0, 6).unwrap();
        let mut c = s.nonneg().iter().map(|v| v * a).collect::<Vec<_>>();
        c[0] += b;
        let z0 = z_statistic(&s, &t, theta).unwrap();
        let z1 = z_statistic(&Spectrum::extend(&c), &t, theta).unwrap();
        prop_assert!((z0 - z1).abs() < 1e-8 * z0.abs().max(1.0));
    }

    #[test]
    fn z_grows_with_contrast_under_a_floor(s in spectrum_strategy(6), a in 0.01f64..10.0, gain in 1.0f64..4.0, theta in 0.0f64..6.3) {
        let t = build_template(PI / 3.0, PI / 9.0, 255.0 * 255.0, 6).unwrap();
        let z1 = z_statistic(&s.scale(a), &t, theta).unwrap();
        let z2 = z_statistic(&s.scale(a * gain), &t, theta).unwrap();
        prop_assert!(z2.abs() >= z1.abs() * (1.0 - 1e-12));
    }

    #[test]
    fn sweep_is_steering_equivariant(s in spectrum_strategy(6), w in 0usize..5) {
        let cfg = DetectorConfig::for_width(WIDTHS_DEG[w].to_radians(), 6).unwrap();
        let (z0, th0) = orientation_sweep(&s, &cfg).unwrap();
        let step = 2.0 * PI / cfg.theta_steps as f64;
        for j in 0..cfg.theta_steps {
            let (z, th) = orientation_sweep(&steer(&s, j as f64 * step), &cfg).unwrap();
            prop_assert!((z - z0).abs() < 1e-12 * z0.abs().max(1.0));
            let shift = (th - th0 + j as f64 * step).rem_euclid(2.0 * PI);
            prop_assert!(shift.min(2.0 * PI - shift) < 1e-9);
        }
    }

    #[test]
    fn finer_grid_never_lowers_the_sweep(s in spectrum_strategy(6), w in 0usize..5) {
        let coarse = DetectorConfig::for_width(WIDTHS_DEG[w].to_radians(), 6).unwrap();
        let mut fine = coarse.clone();
        fine.theta_steps = 10 * coarse.theta_steps;
        let (zc, _) = orientation_sweep(&s, &coarse).unwrap();
        let (zf, _) = orientation_sweep(&s, &fine).unwrap();
        prop_assert!(zf >= zc);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn score_maps_rotate_with_the_image(seed in any::<u64>()) {
        let bank = default_bank();
        let n = 31;
        let img = noise_image(n, n, seed);
        let cfg = DetectorConfig::for_width(PI / 2.0, 6).unwrap();
        let a = score_map(&compute_spectrum(&img, &bank).unwrap(), &cfg).unwrap();
        let b = score_map(&compute_spectrum(&img.rotate_ccw(), &bank).unwrap(), &cfg).unwrap();
        for (c, r) in circharm::image::interior(n, n, 12) {
            let (oc, or) = (n - 1 - r, c);
            let (za, zb) = (a.z_at(oc, or), b.z_at(c, r));
            prop_assert!((za - zb).abs() < 1e-9 * za.abs().max(1.0));
            let shift = (b.theta_at(c, r) - a.theta_at(oc, or) - PI / 2.0).rem_euclid(2.0 * PI);
            prop_assert!(shift.min(2.0 * PI - shift) < 1e-9);
        }
    }

    #[test]
    fn correlation_ignores_contrast_gain(seed in any::<u64>(), a in 0.1f64..10.0, w in 0usize..5) {
        let bank = default_bank();
        let img = noise_image(25, 25, seed);
        let scaled = img.map(|v| a * v);
        let phi = WIDTHS_DEG[w].to_radians() / 2.0;
        for t in [ls_template(phi, 6).unwrap(), slepian_template(phi, 6).unwrap()] {
            let s0 = Spectrum::extend(&compute_spectrum(&img, &bank).unwrap().coeffs_at(12, 12));
            let s1 = Spectrum::extend(&compute_spectrum(&scaled, &bank).unwrap().coeffs_at(12, 12));
            let (c0, _) = correlation_score(&s0, &t, 24).unwrap();
            let (c1, _) = correlation_score(&s1, &t, 24).unwrap();
            prop_assert!((c0 - c1).abs() < 1e-12);
        }
    }

    #[test]
    fn correlation_ignores_the_mean_coefficient(s in spectrum_strategy(6), b in -500.0f64..500.0, w in 0usize..5) {
        let t = ls_template(WIDTHS_DEG[w].to_radians() / 2.0, 6).unwrap();
        let mut c = s.nonneg().to_vec();
        c[0] += b;
        let (x, _) = correlation_score(&s, &t, 24).unwrap();
        let (y, _) = correlation_score(&Spectrum::extend(&c), &t, 24).unwrap();
        prop_assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn corner_responses_ignore_offsets(seed in any::<u64>(), b in -100i32..100) {
        let img = noise_image(30, 30, seed);
        let shifted = img.map(|v| v + b as f64);
        prop_assert_eq!(harris(&img, 3.0, 0.04).unwrap(), harris(&shifted, 3.0, 0.04).unwrap());
        prop_assert_eq!(kitchen_rosenfeld(&img, 3.0).unwrap(), kitchen_rosenfeld(&shifted, 3.0).unwrap());
    }

    #[test]
    fn corner_peaks_survive_contrast_gain(seed in any::<u64>(), a in 0.1f64..10.0) {
        let img = noise_image(30, 30, seed);
        let scaled = img.map(|v| a * v);
        prop_assert_eq!(argmax(&harris(&img, 3.0, 0.04).unwrap()), argmax(&harris(&scaled, 3.0, 0.04).unwrap()));
        prop_assert_eq!(argmax(&kitchen_rosenfeld(&img, 3.0).unwrap()), argmax(&kitchen_rosenfeld(&scaled, 3.0).unwrap()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn slepian_concentration_grows_with_domain_and_order(phi in 0.1f64..2.9, dphi in 0.0f64..0.2, l in 1usize..8) {
        let conc = |p: f64, l: usize| slepian_template(p, l).unwrap().concentration.unwrap();
        prop_assert!(conc(phi + dphi, l) >= conc(phi, l) - 1e-12);
        prop_assert!(conc(phi, l + 1) >= conc(phi, l) - 1e-12);
    }

    #[test]
    fn auc_is_rank_invariant(raw in prop::collection::vec((-1000i32..1000, any::<bool>()), 2..200)) {
        prop_assume!(raw.iter().any(|r| r.1) && raw.iter().any(|r| !r.1));
        let a: Vec<(f64, bool)> = raw.iter().map(|&(s, l)| (s as f64 / 10.0, l)).collect();
        let b: Vec<(f64, bool)> = a.iter().map(|&(s, l)| ((s / 50.0).exp() + s.powi(3), l)).collect();
        let area = |v: &[(f64, bool)]| {
            let (_, pf, pd) = roc_from_scores(v).unwrap();
            auc_from_points(&pf.into_iter().zip(pd).collect::<Vec<_>>())
        };
        prop_assert_eq!(area(&a), area(&b));
    }

    #[test]
    fn roc_points_are_monotone(raw in prop::collection::vec((-50i32..50, any::<bool>()), 2..200)) {
        prop_assume!(raw.iter().any(|r| r.1) && raw.iter().any(|r| !r.1));
        let v: Vec<(f64, bool)> = raw.iter().map(|&(s, l)| (s as f64, l)).collect();
        let (t, pf, pd) = roc_from_scores(&v).unwrap();
        for i in 1..t.len() {
            prop_assert!(t[i] > t[i - 1]);
            prop_assert!(pf[i] <= pf[i - 1] && pd[i] <= pd[i - 1]);
        }
    }

    #[test]
    fn trial_streams_are_reproducible(seed in any::<u64>(), i in 0u64..100_000) {
        let a = sample_scene(&mut trial_rng(seed, i));
        prop_assert_eq!(a, sample_scene(&mut trial_rng(seed, i)));
        prop_assert_ne!(a, sample_scene(&mut trial_rng(seed, i + 1)));
    }

    #[test]
    fn pgm_round_trip_is_bit_exact(w in 1usize..40, h in 1usize..40, seed in any::<u64>()) {
        let mut r = rng(seed);
        let bytes: Vec<u8> = (0..w * h).map(|_| rand::Rng::random(&mut r)).collect();
        let file = encode_pgm(w, h, &bytes);
        let img = decode_pgm(&file, std::path::Path::new("mem.pgm")).unwrap();
        let back: Vec<u8> = img.data().iter().map(|&v| v as u8).collect();
        prop_assert_eq!(&back, &bytes);
        prop_assert_eq!(encode_pgm(w, h, &back), file);
    }
}

#[test]
fn roc_runs_are_bit_reproducible() {
    for kind in DetectorKind::ALL {
        let d = FrameDetector::new(kind, PI / 2.0, DetectorSettings::default()).unwrap();
        let a = roc_run(&d, PI / 2.0, 150, 42, 2).unwrap();
        let b = roc_run(&d, PI / 2.0, 150, 42, 2).unwrap();
        assert_eq!(a, b, "{kind}");
        for i in 1..a.thresholds.len() {
            assert!(a.pf[i] <= a.pf[i - 1] && a.pd[i] <= a.pd[i - 1]);
        }
        assert!((0.0..=1.0).contains(&a.auc));
    }
}

#[test]
fn wedge_auc_survives_monotone_remap() {
    let d = FrameDetector::new(DetectorKind::A, PI / 2.0, DetectorSettings::default()).unwrap();
    let mut scores = Vec::new();
    for i in 0..300u64 {
        let scene = sample_scene(&mut trial_rng(3, i));
        let frame = circharm::synth::render_wedge(&scene, 2).unwrap();
        let z = d.score_at(&frame, 12, 12).unwrap();
        scores.push((z, circharm::synth::truth_label(&scene, PI / 2.0)));
    }
    let area = |v: &[(f64, bool)]| {
        let (_, pf, pd) = roc_from_scores(v).unwrap();
        auc_from_points(&pf.into_iter().zip(pd).collect::<Vec<_>>())
    };
    let remapped: Vec<_> = scores.iter().map(|&(z, l)| (z.atan() * 7.0 + 3.0, l)).collect();
    assert_eq!(area(&scores), area(&remapped));
}
