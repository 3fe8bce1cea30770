mod common;

use common::*;
use num_complex::Complex64;
use opsample::channel::*;
use opsample::gabor::*;
use opsample::reconstruct::recover_known;
use opsample::sparse::mmv_omp;
use opsample::support::*;
use proptest::prelude::*;

fn small_support() -> impl Strategy<Value = CellSupport> {
    (1usize..=3, 2usize..=4)
        .prop_flat_map(|(l, p)| {
            let n = (l * p) as i64;
            (Just(l), Just(p), prop::collection::btree_set((-n..2 * n, -n..2 * n), 0..24))
        })
        .prop_map(|(l, p, sub)| CellSupport::from_subcells(1.0, l, p, sub).unwrap())
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn folding_preserves_count(s in small_support()) {
        prop_assert_eq!(fundamental_count(&s).total(), s.len() as u64);
        prop_assert_eq!(periodization_count(&s).total(), s.len() as u64);
    }

    #[test]
    fn identifiability_is_monotone(s in small_support(), drop in 0usize..24) {
        if check_identifiable(&s) && !s.is_empty() {
            let victim = *s.subcells().iter().nth(drop % s.len()).unwrap();
            let smaller = CellSupport::from_subcells(
                s.t(), s.l(), s.p(), s.subcells().iter().copied().filter(|&c| c != victim)).unwrap();
            prop_assert!(check_identifiable(&smaller));
        }
    }

    #[test]
    fn rectification_classes_cover_the_support(s in small_support()) {
        if let Ok(r) = rectify(&s) {
            let p = s.p();
            let mut rebuilt = std::collections::BTreeSet::new();
            for c in &r.classes {
                for &(u, v) in &c.points {
                    for &(q, m) in &c.gamma {
                        rebuilt.insert((u + q * p, v + m * p));
                    }
                }
            }
            let folded: std::collections::BTreeSet<_> = s.subcells().iter().map(|&(i, j)| s.fold(i, j)).collect();
            prop_assert_eq!(rebuilt, folded);
            let points: usize = r.classes.iter().map(|c| c.points.len()).sum();
            prop_assert_eq!(points, p * p);
        }
    }

    #[test]
    fn gabor_columns_are_phased_time_frequency_shifts(seed in 0u64..1000, l in 1usize..=5) {
        let w = random_window(l, l, &mut rng(seed));
        let g = build_gabor_matrix(&w);
        for q in 0..l {
            for m in 0..l {
                let mt = modulate(&translate(&w.weights, q as i64), m as i64);
                let tm = translate(&modulate(&w.weights, m as i64), q as i64);
                let phase = unit_root((q * m) as i64, l);
                for ((a, b), c) in g.column(q, m).iter().zip(&mt).zip(&tm) {
                    prop_assert!((a - b).norm() < 1e-12);
                    prop_assert!((a - phase * c).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gabor_system_is_a_tight_frame(seed in 0u64..1000, l in 1usize..=5) {
        let w = random_window(l, l, &mut rng(seed));
        let g = build_gabor_matrix(&w);
        let e = g.entries();
        let frame = e * e.adjoint();
        let c = (l as f64) * w.norm_sqr();
        for a in 0..l {
            for b in 0..l {
                let expect = if a == b { c } else { 0.0 };
                prop_assert!((frame[(a, b)] - Complex64::new(expect, 0.0)).norm() < 1e-10 * c.max(1.0));
            }
        }
    }

    #[test]
    fn forward_model_is_linear(seed in 0u64..1000, a in complex(), b in complex()) {
        let s = triangle_mosaic_support(1.0, 3).unwrap();
        let (e1, e2) = (random_eta(&s, seed), random_eta(&s, seed + 1));
        let g = IdentifierTrain::new(1.0, random_window(3, 3, &mut rng(seed)));
        let mix = e1.combine(a, &e2, b).unwrap();
        let h1 = apply_channel(&e1, &g).unwrap();
        let h2 = apply_channel(&e2, &g).unwrap();
        let hm = apply_channel(&mix, &g).unwrap();
        let expect: Vec<Complex64> = h1.samples.iter().zip(&h2.samples).map(|(x, y)| a * x + b * y).collect();
        prop_assert!(max_abs_diff(&hm.samples, &expect) < 1e-12);
    }

    #[test]
    fn zak_scales_norm_by_p(seed in 0u64..1000, l in 1usize..=3, p in 1usize..=5) {
        let grid = Grid::new(1.0, l, p).unwrap();
        let mut f = ChannelResponse::zeros(grid);
        let mut r = rng(seed);
        for x in f.samples.iter_mut() {
            *x = random_window(1, 1, &mut r).weights[0];
        }
        let z = zak_transform(&f, l as f64).unwrap();
        prop_assert!((z.norm().powi(2) - p as f64 * f.norm().powi(2)).abs() < 1e-10 * f.norm().powi(2));
    }

    #[test]
    fn recovery_inverts_the_forward_model(seed in 0u64..1000, shift in -6i64..6) {
        let s = staircase_support(1.0, 3).unwrap().shifted(shift, -shift);
        let w = full_spark_window(3, seed);
        let eta = random_eta(&s, seed);
        let (_, z) = simulate(&eta, &IdentifierTrain::new(1.0, w.clone()));
        let rep = recover_known(&z, &build_gabor_matrix(&w), &s).unwrap();
        prop_assert!(rep.eta_hat.relative_error(&eta) < 1e-10);
    }

    #[test]
    fn pursuit_ignores_measurement_scaling(seed in 0u64..200, scale in 0.01..100.0f64) {
        let l = 4;
        let w = full_spark_window(l, seed);
        let g = build_gabor_matrix(&w);
        let mut r = rng(seed);
        let coef = nalgebra::DMatrix::from_fn(2, 6, |_, _| random_window(1, 1, &mut r).weights[0]);
        let a = g.restricted(&[(0, 1), (2, 3)]);
        let y = &a * coef;
        let e1 = mmv_omp(&y, &g, 2, 1e-9).unwrap();
        let e2 = mmv_omp(&(y * Complex64::new(scale, 0.0)), &g, 2, 1e-9).unwrap();
        prop_assert_eq!(&e1.gamma_hat, &e2.gamma_hat);
        prop_assert_eq!(e1.gamma_hat, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn support_file_round_trip(s in small_support(), di in -5i64..5, dj in -5i64..5) {
        let s = s.shifted(di, dj);
        let file = SupportFile::from_support(&s);
        let json = serde_json::to_string(&file).unwrap();
        let back: SupportFile = serde_json::from_str(&json).unwrap();
        let t = back.to_support().unwrap();
        prop_assert_eq!(t.subcells(), s.subcells());
    }
}
