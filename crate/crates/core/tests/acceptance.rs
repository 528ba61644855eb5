//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a criterion fails that is not listed in `KNOWN_RED`.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use hitl_core::acquisition::{dominates, hypervolume_2d, non_dominated_sort, nsga2, rank_midpoints, Nsga2Config, Problem};
use hitl_core::analysis::{pearson_matrix, shapley_importance, shapley_values};
use hitl_core::bundled;
use hitl_core::campaign::{run_script, Campaign, CampaignConfig, CampaignState, Store};
use hitl_core::dataset::{label_grade, load_dataset, training_records, Feature, FeatureScaler, GradeSpec};
use hitl_core::replication::{run_study, PoolKind, Policy};
use hitl_core::sampling::{lhc_sample, Dim, SurrogateSpaceSpec, N_DIMS};
use hitl_core::surrogate::{gpc_fit, GpConfig, GpModel, KernelSpec};
use hitl_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail on the bundled data; see the README.
const KNOWN_RED: &[&str] = &["campaign_replay"];

/// Pearson r(t_cold, final_mg) over the 77 table rows, from Python's
/// `statistics.correlation`.
const R_TCOLD_FINAL_MG: f64 = -0.036319877081701916;

struct Outcome {
    pass: bool,
    detail: String,
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn dataset_fidelity() -> Result<Outcome> {
    let file = std::fs::File::open(data_dir().join("table_s4.csv"))?;
    let records = load_dataset(file)?;
    let grade = GradeSpec::default();
    let label = |id: u32| {
        records
            .iter()
            .find(|r| r.exp_id == id)
            .map(|r| label_grade(&r.product, &grade))
    };
    let (l38, l39) = (label(38), label(39));
    Ok(Outcome {
        pass: records.len() == 77 && l38 == Some(true) && l39 == Some(false) && !grade.k_enforced,
        detail: format!("{} records, exp 38 -> {l38:?}, exp 39 -> {l39:?}", records.len()),
    })
}

fn correlation_sign() -> Result<Outcome> {
    let recs = training_records(&bundled::records()?);
    let m: Vec<Vec<f64>> = recs.iter().map(|r| vec![r.controls.t_cold, r.product.mg]).collect();
    let r = pearson_matrix(&m, &["t_cold", "final_mg"])?.get("t_cold", "final_mg").unwrap();
    Ok(Outcome {
        pass: r < 0.0 && (r - R_TCOLD_FINAL_MG).abs() < 1e-12,
        detail: format!("r = {r:.10} (oracle {R_TCOLD_FINAL_MG:.10}, tol 1e-12)"),
    })
}

fn gp_correctness() -> Result<Outcome> {
    // hand-solved two-point posterior with RBF, unit signal variance and a
    // constant mean equal to the target average
    let (ell, alpha) = (0.7f64, 0.1f64);
    let x = vec![vec![0.0], vec![1.0]];
    let y = [1.0, 3.0];
    let m = GpModel::fit_with_scaler(&x, &y, FeatureScaler::identity(1), &GpConfig::fixed(KernelSpec::rbf(vec![ell]), alpha), 0)?;
    let rbf = |d: f64| (-d * d / (2.0 * ell * ell)).exp();
    let k = rbf(1.0);
    let a = 1.0 + alpha;
    let det = a * a - k * k;
    let inv = [[a / det, -k / det], [-k / det, a / det]];
    let r = [y[0] - 2.0, y[1] - 2.0];
    let w = [inv[0][0] * r[0] + inv[0][1] * r[1], inv[1][0] * r[0] + inv[1][1] * r[1]];
    let mut worst = 0.0f64;
    for xs in [0.4, -0.3, 2.5] {
        let ks = [rbf(xs), rbf(xs - 1.0)];
        let mean = 2.0 + ks[0] * w[0] + ks[1] * w[1];
        let quad = ks[0] * (inv[0][0] * ks[0] + inv[0][1] * ks[1]) + ks[1] * (inv[1][0] * ks[0] + inv[1][1] * ks[1]);
        let std = (1.0 - quad).sqrt();
        let p = m.predict(&[vec![xs]])?[0];
        worst = worst.max((p.mean - mean).abs()).max((p.std - std).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xt: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
    let yt: Vec<f64> = xt.iter().map(|p| p[0].sin() * 4.0 + p[1]).collect();
    let mut std_ok = true;
    for alpha in [1e-4, 0.06, 0.5] {
        let g = GpModel::fit_with_scaler(&xt, &yt, FeatureScaler::identity(2), &GpConfig::fixed(KernelSpec::matern32(0.8), alpha), 0)?;
        std_ok &= g.predict(&xt)?.iter().all(|p| p.std <= alpha.sqrt() + 1e-6);
    }

    let ell = 1.7;
    let matern = KernelSpec::matern32(ell).eval(&[0.0, 0.0], &[ell, 0.0])?;
    let s3 = 3f64.sqrt();
    let matern_err = (matern - (1.0 + s3) * (-s3).exp()).abs();
    Ok(Outcome {
        pass: worst < 1e-8 && std_ok && matern_err < 1e-12,
        detail: format!("2x2 max err {worst:.1e}, train std bound {std_ok}, Matern err {matern_err:.1e}"),
    })
}

/// Ranks by peeling off the non-dominated set, straight from the definition.
fn brute_force_ranks(objs: &[Vec<f64>]) -> Vec<usize> {
    let mut rank = vec![usize::MAX; objs.len()];
    let mut r = 0;
    while rank.contains(&usize::MAX) {
        let open: Vec<usize> = (0..objs.len()).filter(|&i| rank[i] == usize::MAX).collect();
        let layer: Vec<usize> = open
            .iter()
            .copied()
            .filter(|&i| !open.iter().any(|&j| dominates(&objs[j], &objs[i])))
            .collect();
        for i in layer {
            rank[i] = r;
        }
        r += 1;
    }
    rank
}

fn sorting_oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut mismatches = 0;
    for inst in 0..1000 {
        let n = rng.gen_range(1..=200);
        let m = rng.gen_range(2..=3);
        // coarse integers on half the instances to force ties
        let coarse = inst % 2 == 0;
        let objs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| if coarse { rng.gen_range(0..8) as f64 } else { rng.gen::<f64>() })
                    .collect()
            })
            .collect();
        let mut rank = vec![usize::MAX; n];
        for (r, front) in non_dominated_sort(&objs).iter().enumerate() {
            for &i in front {
                rank[i] = r;
            }
        }
        if rank != brute_force_ranks(&objs) {
            mismatches += 1;
        }
    }
    Ok(Outcome {
        pass: mismatches == 0,
        detail: format!("{mismatches} mismatching instances of 1000"),
    })
}

struct Quadratics;

impl Problem for Quadratics {
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(-10.0, 10.0)]
    }
    fn evaluate(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(xs.iter().map(|x| vec![x[0] * x[0], (x[0] - 2.0).powi(2)]).collect())
    }
}

fn nsga2_front() -> Result<Outcome> {
    // front f2 = (2 - sqrt f1)^2 on f1 in [0, 4]; reference (4, 4)
    let exact = 16.0 - (16.0 - 64.0 / 3.0 + 8.0);
    let cfg = Nsga2Config {
        population: 100,
        generations: 200,
        ..Nsga2Config::default()
    };
    let mut worst = f64::INFINITY;
    for seed in 1..=5 {
        let out = nsga2(&Quadratics, &cfg, seed)?;
        let front: Vec<Vec<f64>> = out.front.iter().map(|&i| out.objectives[i].clone()).collect();
        worst = worst.min(hypervolume_2d(&front, [4.0, 4.0]) / exact);
    }
    Ok(Outcome {
        pass: worst >= 0.98,
        detail: format!("worst HV ratio over 5 seeds {worst:.4} (exact {exact:.4})"),
    })
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, first);
            out.push(p);
        }
    }
    out
}

fn shapley_estimator() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let w = [3.0, -1.5, 0.5];
    let bg: Vec<Vec<f64>> = (0..300).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let explain = &bg[..100];
    let linear = |p: &[Vec<f64>]| Ok(p.iter().map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum()).collect());
    let rep = shapley_importance(linear, &bg, explain, &["a", "b", "c"], 2000, 4)?;
    let means: Vec<f64> = (0..3).map(|j| bg.iter().map(|r| r[j]).sum::<f64>() / bg.len() as f64).collect();
    let mut worst_rel = 0.0f64;
    for j in 0..3 {
        let analytic = explain.iter().map(|r| (w[j] * (r[j] - means[j])).abs()).sum::<f64>() / explain.len() as f64;
        worst_rel = worst_rel.max((rep.features[j].mean_abs - analytic).abs() / analytic);
    }

    // four interacting features against one baseline: exact values and the
    // per-permutation spread come from enumerating all 24 orderings
    let model = |r: &[f64]| r[0] * r[1] + 2.0 * r[2] - r[3] * r[3] + r[0] * r[2] * r[3];
    let z = vec![0.5, -1.0, 2.0, 0.0];
    let x = vec![1.5, 2.0, -1.0, 1.0];
    let perms = permutations(&[0, 1, 2, 3]);
    let mut contrib = vec![Vec::new(); 4];
    for order in &perms {
        let mut cur = z.clone();
        for &j in order {
            let before = model(&cur);
            cur[j] = x[j];
            contrib[j].push(model(&cur) - before);
        }
    }
    let n_perm = 2000;
    let mc = shapley_values(|p: &[Vec<f64>]| Ok(p.iter().map(|r| model(r)).collect()), &[z.clone()], &[x.clone()], n_perm, 9)?;
    let mut inside = true;
    for j in 0..4 {
        let exact = contrib[j].iter().sum::<f64>() / perms.len() as f64;
        let var = contrib[j].iter().map(|c| (c - exact).powi(2)).sum::<f64>() / perms.len() as f64;
        let half = 3.89 * (var / n_perm as f64).sqrt() + 1e-12;
        inside &= (mc.values[0][j] - exact).abs() <= half;
    }
    Ok(Outcome {
        pass: worst_rel < 0.05 && inside,
        detail: format!("linear worst rel err {:.2}%, enumeration within 99.99% CI {inside}", worst_rel * 100.0),
    })
}

fn lhc_stratification() -> Result<Outcome> {
    let free = SurrogateSpaceSpec {
        max_element_sum: 1e12,
        ..SurrogateSpaceSpec::from_bounds(
            "free",
            1000,
            [
                (10.0, 40.0),
                (50.0, 90.0),
                (0.5, 6.0),
                (1.5, 10.0),
                (0.0, 1000.0),
                (0.0, 1000.0),
                (0.0, 1000.0),
                (0.0, 1000.0),
                (0.0, 1000.0),
            ],
            0.0,
        )
    };
    let pts = lhc_sample(&free, 21)?;
    let bounds = free.bounds();
    let mut strata_ok = pts.len() == 1000;
    for d in 0..N_DIMS {
        let mut counts = vec![0usize; 1000];
        for p in &pts {
            let (lo, hi) = bounds[d];
            let bin = ((p.coords()[d] - lo) / (hi - lo) * 1000.0).floor() as usize;
            counts[bin.min(999)] += 1;
        }
        strata_ok &= counts.iter().all(|&c| c == 1);
    }

    let mut a = bundled::space("A")?;
    a.n_points = 10_000;
    let constrained = lhc_sample(&a, 22)?;
    let violations = constrained
        .iter()
        .filter(|p| {
            let c = p.coords();
            c[Dim::THot.index()] < c[Dim::TCold.index()] + a.min_delta_t || p.initial.element_sum() > a.max_element_sum
        })
        .count();
    Ok(Outcome {
        pass: strata_ok && violations == 0 && constrained.len() == 10_000,
        detail: format!("one point per stratum {strata_ok}; {violations} violations in {} points of space A", constrained.len()),
    })
}

fn boundary_midpoints() -> Result<Outcome> {
    let xs = vec![vec![0.0], vec![10.0], vec![2.0]];
    let labels = [false, false, true];
    let clf = gpc_fit(&xs, &labels, KernelSpec::rbf(vec![1.0]), 0.06, 0)?;
    let mids = rank_midpoints(
        &xs[..2],
        &xs[2..],
        &FeatureScaler::fit(&xs)?,
        |p| clf.predict_proba(p),
        |p| Some(p.to_vec()),
        10,
    )?;
    let mut points: Vec<f64> = mids.iter().map(|m| m.point[0]).collect();
    let first = points.first().copied();
    points.sort_by(f64::total_cmp);
    Ok(Outcome {
        pass: points == vec![1.0, 6.0] && first == Some(1.0),
        detail: format!(
            "midpoints {points:?}, first {first:?}, scores {:?}",
            mids.iter().map(|m| (m.score * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    })
}

fn replication_ordering() -> Result<Outcome> {
    let cfg = bundled::study_config()?;
    let result = run_study(&cfg)?;
    let rate = |policy, space| result.rate(policy, space);
    let iu = rate(Policy::Ucb, PoolKind::Informed);
    let ir = rate(Policy::Random, PoolKind::Informed);
    let uu = rate(Policy::Ucb, PoolKind::Uninformed);
    let ur = rate(Policy::Random, PoolKind::Uninformed);

    let mut small = cfg.clone();
    small.pool_size = 4000;
    small.n_instances = 8;
    let deterministic = run_study(&small)? == run_study(&small)?;
    Ok(Outcome {
        pass: iu > ir && ir >= uu && uu > ur && (0.45..=0.85).contains(&iu) && ur < 0.10 && deterministic,
        detail: format!(
            "IU {iu:.2} IR {ir:.2} UU {uu:.2} UR {ur:.2} at {} instances, pool {}; deterministic {deterministic}",
            cfg.n_instances, cfg.pool_size
        ),
    })
}

fn campaign_replay() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("replay");
    let records = bundled::records()?;
    let (c, _) = run_script(
        &bundled::campaign_script()?,
        &records,
        CampaignConfig::default(),
        bundled::spaces()?,
        Some(&path),
    )?;
    let log = Store::create(&path)?.read_log()?;
    let replayed = CampaignState::replay(log.into_iter().map(|e| e.event))?;
    let reopened = Campaign::open(&path)?;
    let identical = &replayed == c.state() && reopened.state() == c.state();

    let walk = c
        .state()
        .iterations
        .iter()
        .find(|it| it.strategy == hitl_core::acquisition::Strategy::RandomWalkVerification);
    let rank = walk
        .and_then(|it| it.report.analysis_for("final_mg"))
        .and_then(|a| a.sensitivity.rank_of(Feature::TCold.name()));
    Ok(Outcome {
        pass: identical && walk.is_some() && rank.is_some_and(|r| r <= 2),
        detail: format!(
            "{} iterations, {} records; log replay identical {identical}; t_cold sensitivity rank on the walk analysis {rank:?} (needs <= 2)",
            c.state().iteration,
            c.state().records.len()
        ),
    })
}

type Criterion = (&'static str, Duration, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("dataset_fidelity", Duration::from_secs(1), dataset_fidelity),
        ("correlation_sign", Duration::from_secs(1), correlation_sign),
        ("gp_correctness", Duration::from_secs(1), gp_correctness),
        ("non_dominated_sorting", Duration::from_secs(10), sorting_oracle),
        ("nsga2_analytic_front", Duration::from_secs(30), nsga2_front),
        ("shapley_estimator", Duration::from_secs(30), shapley_estimator),
        ("lhc_stratification", Duration::from_secs(5), lhc_stratification),
        ("boundary_midpoints", Duration::from_secs(1), boundary_midpoints),
        ("replication_ordering", Duration::from_secs(600), replication_ordering),
        ("campaign_replay", Duration::from_secs(300), campaign_replay),
    ];
    let only: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut unexpected = Vec::new();
    for (name, limit, run) in criteria {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(o) => (o.pass && took <= limit, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {detail} [{:.2}s, limit {}s]", took.as_secs_f64(), limit.as_secs());
        if !pass && !KNOWN_RED.contains(&name) {
            unexpected.push(name);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
