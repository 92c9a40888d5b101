use prepost_core::rng::derive_seed;
use prepost_core::sim::{
    coverage_replicate, coverage_study, gen_prepost, permutation_pvalue, CoverageReport, CoverageSettings,
    SimModel,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn generator_moments() {
    let big = SimModel {
        n_per_group: 1_000_000,
        seed: 1,
        ..SimModel::appendix()
    };
    let s = gen_prepost(&big).unwrap();
    for (x, y, mu) in [(&s.x_c, &s.y_c, 100.0), (&s.x_t, &s.y_t, 110.0)] {
        assert!((correlation(x, y) - 0.8).abs() < 0.002);
        assert!((mean(x) - 100.0).abs() < 0.01);
        assert!((mean(y) - mu).abs() < 0.01);
    }
    let flat = SimModel { rho: 0.0, ..big };
    let s = gen_prepost(&flat).unwrap();
    assert!(correlation(&s.x_c, &s.y_c).abs() < 0.01);
    assert!(correlation(&s.x_t, &s.y_t).abs() < 0.01);
}

#[test]
fn equal_multisets_give_pvalue_one() {
    let a: Vec<f64> = (0..30).map(|i| (i * 7 % 13) as f64).collect();
    let mut b = a.clone();
    b.reverse();
    assert_eq!(permutation_pvalue(&a, &b, 50_000, 2).unwrap(), 1.0);
}

/// Kolmogorov–Smirnov distance from U(0, 1).
fn ks_uniform(mut p: Vec<f64>) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn null_pvalues_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let p: Vec<f64> = (0..10_000u64)
        .map(|i| {
            let a: Vec<f64> = (0..20).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..20).map(|_| StandardNormal.sample(&mut rng)).collect();
            permutation_pvalue(&a, &b, 999, derive_seed(404, i)).unwrap()
        })
        .collect();
    let d = ks_uniform(p);
    assert!(d < 0.02, "KS distance {d}");
}

#[test]
fn replicates_do_not_depend_on_order() {
    let model = SimModel {
        mu_t: 100.0,
        seed: 77,
        ..SimModel::appendix()
    };
    let settings = CoverageSettings {
        nodes: 20,
        ..CoverageSettings::default()
    };
    let forward: Vec<_> = (0..40)
        .map(|i| coverage_replicate(&model, &settings, i).unwrap())
        .collect();
    let mut backward: Vec<_> = (0..40)
        .rev()
        .map(|i| coverage_replicate(&model, &settings, i).unwrap())
        .collect();
    backward.reverse();
    assert_eq!(forward, backward);
    let report = CoverageReport::from_outcomes(&forward, 10, 0.95).unwrap();
    assert_eq!(report, coverage_study(&model, 40, &settings).unwrap());
}

#[test]
fn coverage_report_invariants() {
    let model = SimModel {
        mu_t: 100.0,
        seed: 3,
        ..SimModel::appendix()
    };
    let settings = CoverageSettings {
        nodes: 20,
        buckets: 5,
        ..CoverageSettings::default()
    };
    let report = coverage_study(&model, 300, &settings).unwrap();
    assert_eq!(report.total(), 300);
    assert_eq!(report.buckets.len(), 5);
    for b in &report.buckets {
        for c in [b.post_coverage(), b.prepost_coverage()].into_iter().flatten() {
            assert!((0.0..=1.0).contains(&c));
        }
        for m in [b.post_mse(), b.prepost_mse()].into_iter().flatten() {
            assert!(m >= 0.0);
        }
    }
}
