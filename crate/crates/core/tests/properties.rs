use hitl_core::acquisition::{dominates, non_dominated_sort, ucb_from_predictions};
use hitl_core::analysis::{analyze, shapley_values, AnalysisConfig};
use hitl_core::bundled;
use hitl_core::dataset::{feature_matrix, training_records, Feature, FeatureScaler, Target};
use hitl_core::sampling::{lhc_sample, SurrogateSpaceSpec};
use hitl_core::surrogate::linalg::Cholesky;
use hitl_core::surrogate::{ForestModel, ForestParams, GpConfig, GpModel, KernelFamily, KernelSpec, Prediction, PriorMean};
use proptest::prelude::*;

fn rows(n: std::ops::Range<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, d), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sorted_fronts_respect_dominance(pts in prop::collection::vec(prop::collection::vec(0i32..6, 2), 1..40)) {
        let objs: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|&v| v as f64).collect()).collect();
        let fronts = non_dominated_sort(&objs);
        let mut rank = vec![usize::MAX; objs.len()];
        for (r, f) in fronts.iter().enumerate() {
            for &i in f {
                prop_assert_eq!(rank[i], usize::MAX);
                rank[i] = r;
            }
        }
        prop_assert!(rank.iter().all(|&r| r != usize::MAX));
        for i in 0..objs.len() {
            for j in 0..objs.len() {
                if dominates(&objs[i], &objs[j]) {
                    prop_assert!(rank[i] < rank[j]);
                }
            }
            if rank[i] > 0 {
                prop_assert!(fronts[rank[i] - 1].iter().any(|&j| dominates(&objs[j], &objs[i])));
            }
        }
    }

    #[test]
    fn kernel_matrices_are_positive_semidefinite(
        x in rows(2..25, 3),
        ls in 0.1f64..5.0,
        matern in any::<bool>(),
    ) {
        let k = if matern { KernelSpec::matern32(ls) } else { KernelSpec::rbf(vec![ls]) };
        let n = x.len();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = k.eval(&x[i], &x[j]).unwrap();
            }
        }
        for i in 0..n {
            prop_assert!((m[i * n + i] - 1.0).abs() < 1e-15);
            for j in 0..n {
                prop_assert_eq!(m[i * n + j], m[j * n + i]);
                prop_assert!(m[i * n + j] >= 0.0 && m[i * n + j] <= 1.0 + 1e-15);
            }
        }
        // duplicated rows make K singular, so test with a small ridge
        for i in 0..n {
            m[i * n + i] += 1e-8;
        }
        prop_assert!(Cholesky::factor(&m, n).is_some());
    }

    #[test]
    fn scaler_round_trip(x in rows(2..30, 4)) {
        let Ok(s) = FeatureScaler::fit(&x) else { return Ok(()); };
        let z = s.transform(&x).unwrap();
        let n = z.len() as f64;
        for j in 0..4 {
            let mean = z.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = z.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
        let back = s.inverse(&z).unwrap();
        for (a, b) in back.iter().flatten().zip(x.iter().flatten()) {
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn forest_predictions_within_target_range(
        x in rows(3..40, 2),
        seed in 0u64..1000,
    ) {
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[0] - 2.0 * r[1]).collect();
        let f = ForestModel::fit(&x, &y, &ForestParams::default(), seed).unwrap();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let probe: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 - 10.0, 10.0 - i as f64]).collect();
        for p in f.predict(&probe).unwrap() {
            prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
        }
    }

    #[test]
    fn shapley_rows_sum_to_sampled_gap(
        bg in rows(2..10, 3),
        ex in rows(1..5, 3),
        seed in 0u64..100,
    ) {
        let f = |p: &[Vec<f64>]| Ok(p.iter().map(|r| r[0] * r[1] + r[2].sin()).collect());
        let sv = shapley_values(f, &bg, &ex, 7, seed).unwrap();
        for (phi, gap) in sv.values.iter().zip(&sv.sampled_gap) {
            prop_assert!((phi.iter().sum::<f64>() - gap).abs() < 1e-9);
        }
    }

    #[test]
    fn gp_std_at_training_points_bounded_by_noise(
        x in rows(2..15, 2),
        alpha in 1e-6f64..0.5,
    ) {
        let y: Vec<f64> = x.iter().map(|r| r[0].cos() + r[1]).collect();
        let cfg = GpConfig::fixed(KernelSpec::matern32(1.0), alpha);
        let m = GpModel::fit_with_scaler(&x, &y, FeatureScaler::identity(2), &cfg, 0).unwrap();
        for p in m.predict(&x).unwrap() {
            prop_assert!(p.std <= m.noise_alpha().sqrt() + 1e-6);
        }
    }

    #[test]
    fn ucb_is_monotone_in_kappa(mean in -10.0f64..10.0, std in 0.0f64..5.0, k1 in 0.0f64..4.0, k2 in 0.0f64..4.0) {
        let p = [Prediction { mean, std }];
        let a = ucb_from_predictions(&p, k1.min(k2)).unwrap()[0];
        let b = ucb_from_predictions(&p, k1.max(k2)).unwrap()[0];
        prop_assert!(a <= b);
    }
}

#[test]
fn lhc_points_stay_feasible_for_every_bundled_space() {
    for mut spec in bundled::spaces().unwrap() {
        spec.n_points = 500;
        let pts = lhc_sample(&spec, 3).unwrap();
        assert_eq!(pts.len(), 500);
        assert!(pts.iter().all(|p| spec.contains(&p.coords())), "space {}", spec.label);
    }
}

#[test]
fn tight_space_is_infeasible() {
    let mut spec: SurrogateSpaceSpec = bundled::space("A").unwrap();
    spec.min_delta_t = 500.0;
    assert_eq!(lhc_sample(&spec, 0).unwrap_err().code(), "infeasible");
}

fn exact_shapley(f: impl Fn(&[f64]) -> f64, x: &[f64], z: &[f64]) -> Vec<f64> {
    let d = x.len();
    let fact = |n: usize| (1..=n).product::<usize>() as f64;
    let mut phi = vec![0.0; d];
    for j in 0..d {
        for mask in 0u32..(1 << d) {
            if mask & (1 << j) != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact(s) * fact(d - s - 1) / fact(d);
            let mut with: Vec<f64> = z.to_vec();
            for k in 0..d {
                if mask & (1 << k) != 0 {
                    with[k] = x[k];
                }
            }
            let without = f(&with);
            with[j] = x[j];
            phi[j] += w * (f(&with) - without);
        }
    }
    phi
}

#[test]
fn interacting_model_matches_enumeration_with_single_baseline() {
    let model = |r: &[f64]| r[0] * r[1] + 2.0 * r[2] - r[3] * r[3] + r[0] * r[2] * r[3];
    let z = vec![0.5, -1.0, 2.0, 0.0];
    let x = vec![1.5, 2.0, -1.0, 1.0];
    let exact = exact_shapley(model, &x, &z);
    let sv = shapley_values(
        |p: &[Vec<f64>]| Ok(p.iter().map(|r| model(r)).collect()),
        &[z.clone()],
        &[x.clone()],
        4000,
        5,
    )
    .unwrap();
    for (a, b) in sv.values[0].iter().zip(&exact) {
        assert!((a - b).abs() < 0.08, "{a} vs {b}");
    }
    let total: f64 = exact.iter().sum();
    assert!((total - (model(&x) - model(&z))).abs() < 1e-12);
}

#[test]
fn symmetric_features_get_equal_shares() {
    let model = |r: &Vec<f64>| (r[0] + r[1]).powi(2);
    let sv = shapley_values(
        |p: &[Vec<f64>]| Ok(p.iter().map(model).collect()),
        &[vec![0.0, 0.0]],
        &[vec![1.0, 1.0]],
        200,
        1,
    )
    .unwrap();
    let exact = exact_shapley(|r| (r[0] + r[1]).powi(2), &[1.0, 1.0], &[0.0, 0.0]);
    assert_eq!(exact, vec![2.0, 2.0]);
    // each permutation credits (1, 3) or (3, 1); the standard error at 200 draws is 0.07
    let phi = &sv.values[0];
    assert!((phi[0] + phi[1] - 4.0).abs() < 1e-12);
    assert!((phi[0] - phi[1]).abs() < 0.6, "{phi:?}");
}

#[test]
fn zero_prior_reverts_to_zero() {
    let x = vec![vec![0.0], vec![1.0], vec![2.0]];
    let y = vec![10.0, 12.0, 11.0];
    let cfg = GpConfig {
        prior_mean: PriorMean::Zero,
        ..GpConfig::fixed(KernelSpec::rbf(vec![0.5]), 1e-8)
    };
    let m = GpModel::fit_with_scaler(&x, &y, FeatureScaler::identity(1), &cfg, 0).unwrap();
    let far = m.predict(&[vec![100.0]]).unwrap()[0];
    assert!(far.mean.abs() < 1e-9);
    let near = m.predict(&[vec![1.0]]).unwrap()[0];
    assert!((near.mean - 12.0).abs() < 1e-4);
}

#[test]
fn matern_family_is_default_and_isotropic() {
    let cfg = GpConfig::default();
    assert_eq!(cfg.kernel.family, KernelFamily::Matern32);
    assert!(cfg.kernel.is_isotropic());
}

#[test]
fn random_control_ranks_no_higher_than_median() {
    let recs = training_records(&bundled::records().unwrap());
    let x = feature_matrix(&recs, &Feature::ALL);
    let y: Vec<f64> = recs.iter().map(|r| Target::FinalMg.value(r)).collect();
    let names: Vec<&str> = Feature::ALL.iter().map(|f| f.name()).collect();
    let rep = analyze(&x, &names, "final_mg", &y, &[], &AnalysisConfig::default(), 0).unwrap();
    let mut vals: Vec<f64> = rep.importance.features.iter().map(|f| f.mean_abs).collect();
    vals.sort_by(f64::total_cmp);
    let median = vals[vals.len() / 2];
    let control = rep.importance.get("random_control").unwrap();
    assert!(control.mean_abs <= median, "control {} > median {median}", control.mean_abs);
}
