use han_core::analysis::{
    classify_convergence, distance_matrix, pca_embed, plasticity_series, spectrum, Verdict,
    WeightTrajectory,
};
use proptest::prelude::*;
use std::f64::consts::PI;

fn naive_dft_amplitude(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * t) as f64 / n as f64;
                re += (v - m) * a.cos();
                im += (v - m) * a.sin();
            }
            let s = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
            s * re.hypot(im) / n as f64
        })
        .collect()
}

fn traj(points: &[Vec<f64>]) -> WeightTrajectory {
    let mut t = WeightTrajectory::single_layer(points[0].len());
    for (i, p) in points.iter().enumerate() {
        t.push(i as u64, p.clone()).unwrap();
    }
    t
}

proptest! {
    #[test]
    fn spectrum_matches_naive_dft(x in prop::collection::vec(-5.0f64..5.0, 8..90)) {
        let s = spectrum(&x, 20.0).unwrap();
        let want = naive_dft_amplitude(&x);
        prop_assert_eq!(s.magnitudes.len(), want.len());
        for (a, b) in s.magnitudes.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert!((s.resolution() - 20.0 / x.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn classification_ignores_positive_scale(
        series in prop::collection::vec(0.0f64..10.0, 2..200), scale in 1e-3f64..1e3,
    ) {
        let a = classify_convergence(&series, 0.9, 0.05).unwrap();
        let scaled: Vec<f64> = series.iter().map(|v| v * scale).collect();
        let b = classify_convergence(&scaled, 0.9, 0.05).unwrap();
        if a.mean_early >= 1e-9 {
            prop_assert_eq!(a.verdict, b.verdict);
        }
    }

    #[test]
    fn distance_matrix_is_a_metric(pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 3..12)) {
        let d = distance_matrix(&traj(&pts), 1).unwrap();
        let n = pts.len();
        for p in 0..n {
            prop_assert_eq!(d[p][p], 0.0);
            for q in 0..n {
                prop_assert_eq!(d[p][q], d[q][p]);
                for r in 0..n {
                    prop_assert!(d[p][r] <= d[p][q] + d[q][r] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn pca_ratios_are_ordered(pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 5), 4..30)) {
        let e = pca_embed(&traj(&pts), 3).unwrap();
        let r = &e.explained_variance_ratio;
        prop_assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(r.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        prop_assert!(r.iter().sum::<f64>() <= 1.0 + 1e-9);
    }

    #[test]
    fn plasticity_series_scales_with_snapshots(
        pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 2..20), alpha in -5.0f64..5.0,
    ) {
        let base = plasticity_series(&traj(&pts)).unwrap();
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v * alpha).collect()).collect();
        let s = plasticity_series(&traj(&scaled)).unwrap();
        prop_assert_eq!(base.len(), pts.len() - 1);
        for (a, b) in base.iter().zip(&s) {
            prop_assert!((b - alpha.abs() * a).abs() <= 1e-9 * (1.0 + a));
        }
    }
}

#[test]
fn decaying_and_oscillating_series() {
    let decay: Vec<f64> = (0..1000).map(|t| (-(t as f64) / 50.0).exp()).collect();
    assert_eq!(classify_convergence(&decay, 0.9, 0.05).unwrap().verdict, Verdict::FixedPoint);
    let osc: Vec<f64> = (0..1000).map(|t| (2.0 * PI * 4.0 * t as f64 / 20.0 + 0.3).sin().abs()).collect();
    assert_eq!(classify_convergence(&osc, 0.9, 0.05).unwrap().verdict, Verdict::LimitCycle);
    let mut bad = decay.clone();
    bad[500] = f64::INFINITY;
    assert_eq!(classify_convergence(&bad, 0.9, 0.05).unwrap().verdict, Verdict::Diverged);
}

#[test]
fn pure_and_two_tone_spectra() {
    let tone = |f: f64, t: usize| (2.0 * PI * f * t as f64 / 20.0).sin();
    let one: Vec<f64> = (0..200).map(|t| tone(4.0, t)).collect();
    let s = spectrum(&one, 20.0).unwrap();
    assert!((s.dominant_frequency().unwrap() - 4.0).abs() <= 0.1);
    let two: Vec<f64> = (0..200).map(|t| tone(4.0, t) + 0.7 * tone(8.0, t)).collect();
    let mut peaks = spectrum(&two, 20.0).unwrap().peaks(2);
    peaks.sort_by(f64::total_cmp);
    assert!((peaks[0] - 4.0).abs() <= 0.1 && (peaks[1] - 8.0).abs() <= 0.1);
    let flat = spectrum(&[3.0; 64], 20.0).unwrap();
    assert!(flat.magnitudes.iter().all(|&m| m < 1e-12));
    assert_eq!(flat.dominant_frequency(), None);
    assert!(spectrum(&[1.0; 7], 20.0).is_err());
}

#[test]
fn pca_of_line_and_circle() {
    let line: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.1, i as f64 * 0.2]).collect();
    let e = pca_embed(&traj(&line), 1).unwrap();
    assert!(e.explained_variance_ratio[0] >= 1.0 - 1e-9);
    // largest loading positive
    assert!(e.components[0][1] > 0.0);

    // circle in the span of two orthonormal directions of R^10
    let u: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { 0.0 } / 5f64.sqrt()).collect();
    let v: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / 10f64.sqrt()).collect();
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    let v: Vec<f64> = v.iter().zip(&u).map(|(b, a)| b - dot * a).collect();
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let circle: Vec<Vec<f64>> = (0..100)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / 100.0;
            (0..10).map(|i| 3.0 * th.cos() * u[i] + 3.0 * th.sin() * v[i] / vn + 1.0).collect()
        })
        .collect();
    let e = pca_embed(&traj(&circle), 2).unwrap();
    assert!(e.explained_variance_ratio.iter().sum::<f64>() >= 0.999);
    assert_eq!(e.points.len(), 100);
}

#[test]
fn pca_is_rotation_invariant() {
    let pts: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let t = i as f64;
            vec![t.sin() * 2.0, (0.3 * t).cos(), 0.05 * t]
        })
        .collect();
    let (c, s) = (0.6f64, 0.8f64);
    let rotated: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| vec![c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]])
        .collect();
    let a = pca_embed(&traj(&pts), 3).unwrap();
    let b = pca_embed(&traj(&rotated), 3).unwrap();
    for (x, y) in a.explained_variance_ratio.iter().zip(&b.explained_variance_ratio) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn return_to_attractor_has_small_block_distance() {
    let attractor = vec![0.5, -0.25, 1.0, 0.0];
    let mut pts = Vec::new();
    for t in 0..300 {
        let kick = if (100..130).contains(&t) {
            (-(t as f64 - 100.0) / 8.0).exp()
        } else if t >= 130 {
            (-(t as f64 - 100.0) / 8.0).exp() * 1e-3
        } else {
            0.0
        };
        pts.push(attractor.iter().map(|a| a + kick).collect());
    }
    let d = distance_matrix(&traj(&pts), 10).unwrap();
    // strided index 5 is step 50 (before the kick), 25 is step 250 (after)
    assert!(d[5][25] < 1e-6);
    assert!(d[5][10] > 0.5);
}
