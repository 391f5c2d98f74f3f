// End-to-end flows through the public API.

use mmd_core::asymptotics::{
    alt_limit, estimate_null_eigenvalues, null_quantile, rhos, sample_null_limit, SpectralModel,
};
use mmd_core::estimators::{mmd_unbiased, mmd_unbiased_streaming, EstimatorKind};
use mmd_core::genustat::{degeneracy_order, mmd_zeta_table, sen_variance, DegeneracyOrder};
use mmd_core::kernels::{gram_blocks, gram_matrix, KernelSpec};
use mmd_core::oracle::{brute_force_moments, population_functionals, DiscreteDistribution};
use mmd_core::permtest::{permutation_test, rejection_rate, SimulationConfig, TestResult};
use mmd_core::sim::{draw_samples, SampleDistribution};
use mmd_core::stats::{ks_one_sided_excess, variance};
use mmd_core::tuner::{log_grid, snr_objective, tune, TuneConfig};
use mmd_core::variance::{mmd_unbiased_variance, plugin_report, plugin_zetas};
use mmd_core::{Matrix, SampleSet};

fn gaussian(l: f64) -> KernelSpec {
    KernelSpec::gaussian(l).unwrap()
}

fn discrete_pair() -> (DiscreteDistribution, DiscreteDistribution) {
    (
        DiscreteDistribution::new(Matrix::column(&[0.0, 0.8, 2.0]), vec![0.3, 0.4, 0.3]).unwrap(),
        DiscreteDistribution::new(Matrix::column(&[0.4, 1.7]), vec![0.55, 0.45]).unwrap(),
    )
}

#[test]
fn exact_variance_three_ways() {
    let (p, q) = discrete_pair();
    for spec in [gaussian(0.7), KernelSpec::linear(), KernelSpec::triangle()] {
        let f = population_functionals(&p, &q, &spec).unwrap();
        for (nx, ny) in [(2, 3), (4, 2), (3, 3)] {
            let closed = mmd_unbiased_variance(&f, nx, ny).unwrap().total;
            let sen = sen_variance(&mmd_zeta_table(&f), &[nx, ny]).unwrap();
            let enumerated = brute_force_moments(&p, &q, &spec, nx, ny, EstimatorKind::Unbiased)
                .unwrap()
                .variance;
            assert!((closed - enumerated).abs() <= 1e-10 * enumerated, "{closed} vs {enumerated}");
            assert!((sen - enumerated).abs() <= 1e-10 * enumerated);
        }
    }
}

#[test]
fn monte_carlo_variance_agrees_with_closed_form() {
    let (p, q) = discrete_pair();
    let spec = gaussian(1.0);
    let f = population_functionals(&p, &q, &spec).unwrap();
    let (nx, ny, reps) = (12, 7, 20_000);
    let (pd, qd) = (SampleDistribution::Discrete(p), SampleDistribution::Discrete(q));
    let values: Vec<f64> = (0..reps)
        .map(|r| {
            let s = draw_samples(&pd, &qd, nx, ny, 17, r).unwrap();
            mmd_unbiased(&gram_blocks(&spec, &s).unwrap()).unwrap().value
        })
        .collect();
    let mean = values.iter().sum::<f64>() / reps as f64;
    let exact = mmd_unbiased_variance(&f, nx, ny).unwrap().total;
    assert!((mean - f.mmd_sq).abs() < 4.0 * (exact / reps as f64).sqrt());
    // Sample variance of 20000 draws: relative error well under 5%.
    assert!((variance(&values) / exact - 1.0).abs() < 0.05);
}

#[test]
fn null_p_values_are_super_uniform() {
    let config = SimulationConfig {
        p: SampleDistribution::normal(0.0, 1.0),
        q: SampleDistribution::normal(0.0, 1.0),
        kernel: gaussian(1.0),
        alpha: 0.05,
        permutations: 39,
        reps: 1,
        n_x: vec![15],
        n_y: 9,
        seed: 2,
    };
    let p_values: Vec<f64> = (0..400u64)
        .map(|r| {
            let s = draw_samples(&config.p, &config.q, 15, 9, 21, r).unwrap();
            permutation_test(&s, &config.kernel, 0.05, 39, r).unwrap().p_value
        })
        .collect();
    // Pr(p <= t) <= t: the empirical cdf may not exceed the uniform cdf by
    // more than the one-sided KS critical value at level 0.01.
    let excess = ks_one_sided_excess(&p_values, |t| t.clamp(0.0, 1.0));
    assert!(excess < 1.52 / (p_values.len() as f64).sqrt(), "{excess}");
    let curve = rejection_rate(&SimulationConfig { reps: 1, ..config }).unwrap();
    assert!(curve[0].rate == 0.0 || curve[0].rate == 1.0);
}

#[test]
fn test_result_json_round_trip() {
    let s = draw_samples(
        &SampleDistribution::normal(0.0, 1.0),
        &SampleDistribution::normal(1.0, 1.0),
        20,
        30,
        4,
        0,
    )
    .unwrap();
    let r = permutation_test(&s, &gaussian(1.0), 0.05, 99, 8).unwrap();
    let back: TestResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(r, back);
    assert!(r.p_value >= 1.0 / 100.0 && r.p_value <= 1.0);
    assert_eq!(r.reject, r.p_value <= r.alpha);
}

#[test]
fn spectral_model_tracks_min_scaled_null() {
    let p = SampleDistribution::laplace(0.0, std::f64::consts::FRAC_1_SQRT_2);
    let spec = gaussian(1.0);
    let z = p.sample(400, &mut mmd_core::rng::stream_rng(5, &[])).unwrap();
    let eig = estimate_null_eigenvalues(&gram_matrix(&spec, &z).unwrap(), 64).unwrap();
    let (nx, ny) = (300, 60);
    let model = SpectralModel::for_sizes(eig, nx, ny).unwrap();
    let (rx, ry) = rhos(nx, ny).unwrap();
    assert_eq!((model.rho_x(), model.rho_y()), (rx, ry));
    let limit = sample_null_limit(&model, 20_000, 3);
    let lim_var = variance(&limit);
    assert!((lim_var / model.variance() - 1.0).abs() < 0.1);
    let stats: Vec<f64> = (0..300u64)
        .map(|r| {
            let s = draw_samples(&p, &p, nx, ny, 6, r).unwrap();
            ny as f64 * mmd_unbiased_streaming(&spec, &s).unwrap().value
        })
        .collect();
    // Same scale: empirical variance within a factor 1.5 of the limit's.
    let ratio = variance(&stats) / lim_var;
    assert!(ratio > 0.66 && ratio < 1.5, "{ratio}");
    let c = null_quantile(&model, 0.05, 20_000, 3).unwrap();
    let above = stats.iter().filter(|t| **t > c).count() as f64 / stats.len() as f64;
    assert!(above < 0.12, "{above}");
}

#[test]
fn plugin_sigma_matches_alternative_spread() {
    let p = SampleDistribution::normal(0.0, 1.0);
    let q = SampleDistribution::normal(1.0, 1.0);
    let spec = gaussian(1.0);
    let reference = draw_samples(&p, &q, 1500, 1500, 30, 0).unwrap();
    let blocks = gram_blocks(&spec, &reference).unwrap();
    let (zx, zy) = plugin_zetas(&blocks);
    let (nx, ny) = (200, 50);
    let (rx, ry) = rhos(nx, ny).unwrap();
    let law = alt_limit(zx, zy, rx, ry, mmd_unbiased(&blocks).unwrap().value).unwrap();
    let values: Vec<f64> = (0..400u64)
        .map(|r| {
            let s = draw_samples(&p, &q, nx, ny, 31, r).unwrap();
            (ny as f64).sqrt() * mmd_unbiased_streaming(&spec, &s).unwrap().value
        })
        .collect();
    let ratio = variance(&values) / law.variance;
    assert!(ratio > 0.75 && ratio < 1.33, "{ratio}");
    let report = plugin_report(&blocks);
    assert_eq!(report.total, report.leading);
}

#[test]
fn tuning_then_testing_on_disjoint_halves() {
    let p = SampleDistribution::normal(0.0, 1.0);
    let q = SampleDistribution::normal(0.0, 2.0);
    let data = draw_samples(&p, &q, 120, 80, 40, 0).unwrap();
    let config = TuneConfig {
        refine_steps: 4,
        seed: 1,
        ..TuneConfig::gaussian(log_grid(0.1, 50.0, 9))
    };
    let result = tune(&data, &config).unwrap();
    assert!(result.train_x.iter().all(|i| !result.test_x.contains(i)));
    assert!(result.train_y.iter().all(|i| !result.test_y.contains(i)));
    let train = SampleSet::new(data.x().select_rows(&result.train_x), data.y().select_rows(&result.train_y)).unwrap();
    let recomputed = snr_objective(&train, &result.best_spec, config.lambda_reg).unwrap();
    assert!((recomputed - result.objective).abs() <= 1e-12 * recomputed.abs().max(1.0));
    let grid_points = log_grid(0.1, 50.0, 9).len();
    assert!(result.trace.len() >= grid_points);
}

#[test]
fn first_order_degenerate_pair() {
    let p = DiscreteDistribution::uniform_1d(&[1.0, 2.0]).unwrap();
    let q = DiscreteDistribution::uniform_1d(&[3.0, 4.0]).unwrap();
    let f = population_functionals(&p, &q, &KernelSpec::triangle()).unwrap();
    assert_eq!(degeneracy_order(&mmd_zeta_table(&f), 1e-12), DegeneracyOrder::Finite(1));
    let (p2, q2) = discrete_pair();
    let g = population_functionals(&p2, &q2, &gaussian(1.0)).unwrap();
    assert_eq!(degeneracy_order(&mmd_zeta_table(&g), 1e-12), DegeneracyOrder::Finite(0));
}
