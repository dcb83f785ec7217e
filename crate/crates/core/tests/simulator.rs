mod common;

use common::*;
use mmbm_core::regenerative::{expected_sojourn, regen_cdf, rho_limit};
use mmbm_core::simulator::*;
use mmbm_core::stationary::stationary_standard;
use mmbm_core::{BoundaryVariant, Error, Level, MmbmModel, RowVector};
use proptest::prelude::*;

fn config(variant: BoundaryVariant, lambda: f64, horizon: f64, seed: u64) -> SimConfig {
    SimConfig {
        lambda,
        variant,
        q: 1.0,
        horizon,
        seed,
        grid: (0..=60).map(|i| i as f64 * 0.05).collect(),
        replications: 1,
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn same_seed_same_law() {
    let model = reference();
    for variant in reference_variants() {
        let mut cfg = config(variant, 1e3, 300.0, 42);
        cfg.replications = 3;
        let a = simulate(&cfg, &model).unwrap();
        let b = simulate(&cfg, &model).unwrap();
        assert_eq!(a, b);
        cfg.seed = 43;
        assert_ne!(a, simulate(&cfg, &model).unwrap());
    }
}

#[test]
fn replications_use_distinct_streams() {
    let model = reference();
    let cfg = config(BoundaryVariant::Standard, 1e3, 100.0, 5);
    let a = run_replication(&cfg, &model, 0).unwrap();
    let b = run_replication(&cfg, &model, 1).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, run_replication(&cfg, &model, 0).unwrap());
}

#[test]
fn pooled_law_is_order_independent_sum() {
    let model = reference();
    let mut cfg = config(sticky(&[1.0, 2.0]), 1e3, 200.0, 9);
    cfg.replications = 4;
    let tallies: Vec<Tally> = (0..4).map(|r| run_replication(&cfg, &model, r).unwrap()).collect();
    let pooled = aggregate(&cfg, &tallies).unwrap();
    assert_eq!(pooled, simulate(&cfg, &model).unwrap());
    let total: f64 = tallies.iter().map(|t| t.observed_time).sum();
    assert!((pooled.observed_time - total).abs() < 1e-9);
}

#[test]
fn regulated_scalar_brownian_motion() {
    // G(x) = 1 − e^{−2x} for μ = −1, σ = 1.
    let model = scalar(-1.0, 1.0);
    let emp = simulate(&config(BoundaryVariant::Standard, 1e4, 1e4, 1), &model).unwrap();
    let worst =
        emp.grid.iter().zip(&emp.occupation).map(|(x, o)| (o[0] - (1.0 - (-2.0 * x).exp())).abs()).fold(0.0, f64::max);
    assert!(worst <= 0.02, "KS {worst}");
}

#[test]
fn sticky_scalar_spends_half_the_time_at_zero() {
    let model = scalar(-1.0, 1.0);
    let emp = simulate(&config(sticky(&[1.0]), 1e4, 1e4, 2), &model).unwrap();
    assert!((emp.zero_fraction[0] - 0.5).abs() <= 0.01, "{}", emp.zero_fraction[0]);
}

#[test]
fn sticky_scalar_cycle_length() {
    let model = scalar(-1.0, 1.0);
    let spec = sticky(&[1.0]);
    let mut cfg = config(spec.clone(), 1e4, 1e4, 3);
    cfg.q = 1.5;
    let emp = simulate(&cfg, &model).unwrap();
    let law = expected_sojourn(&spec, &model, 1.5).unwrap();
    assert!((law.mean_cycle() - 0.8).abs() < 1e-12);
    let report = regen_stats_compare(&emp, &law).unwrap();
    assert!(report.cycle_dev.abs() <= 3.0 * report.cycle_se, "{report:?}");
}

#[test]
fn one_phase_regenerates_in_its_only_phase() {
    let model = scalar(-1.0, 1.0);
    let emp = simulate(&config(BoundaryVariant::Standard, 1e3, 2e3, 4), &model).unwrap();
    assert_eq!(emp.regen_phase_freq[0], 1.0);
    let law = expected_sojourn(&BoundaryVariant::Standard, &model, 1.0).unwrap();
    let report = regen_stats_compare(&emp, &law).unwrap();
    assert_eq!(report.freq_dev[0], 0.0);
}

#[test]
fn two_phase_regeneration_frequencies() {
    let model = reference();
    let emp = simulate(&config(BoundaryVariant::Standard, 1e4, 2e4, 5), &model).unwrap();
    let rho = rho_limit(&BoundaryVariant::Standard, &model, 1.0).unwrap();
    for i in 0..2 {
        let dev = emp.regen_phase_freq[i] - rho[i];
        assert!(dev.abs() <= 3.0 * emp.regen_freq_se[i], "phase {i}: {dev} vs {}", emp.regen_freq_se[i]);
    }
}

#[test]
fn too_few_cycles_is_an_error() {
    let model = reference();
    let emp = simulate(&config(BoundaryVariant::Standard, 1e3, 50.0, 6), &model).unwrap();
    let law = expected_sojourn(&BoundaryVariant::Standard, &model, 1.0).unwrap();
    assert!(matches!(regen_stats_compare(&emp, &law), Err(Error::InsufficientCycles { .. })));
}

fn synthetic(levels: &[f64], rows: Vec<RowVector>) -> EmpiricalLaw {
    let m = rows[0].len();
    EmpiricalLaw {
        grid: levels.to_vec(),
        phase_marginal: rows.last().unwrap().clone(),
        occupation: rows,
        zero_fraction: RowVector::zeros(m),
        regen_phase_freq: RowVector::from_element(m, 1.0 / m as f64),
        n_regenerations: 0,
        mean_cycle: 0.0,
        n_cycles: 0,
        regen_freq_se: RowVector::zeros(m),
        mean_cycle_se: 0.0,
        regen_freq_se_iid: RowVector::zeros(m),
        mean_cycle_se_iid: 0.0,
        observed_time: 1.0,
    }
}

#[test]
fn ks_of_the_law_itself_is_zero() {
    let model = reference();
    let law = stationary_standard(&model).unwrap().law;
    let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
    let levels: Vec<Level> = xs.iter().map(|x| Level::At(*x)).collect();
    let exact = table(&law, &levels);
    let emp = synthetic(&xs, exact.rows.clone());
    let ks = ks_distance(&emp, &exact).unwrap();
    assert_eq!(ks.per_phase, vec![0.0, 0.0]);
    assert_eq!(ks.total, 0.0);

    let mut bumped = exact.rows.clone();
    bumped[7][1] += 0.01;
    let ks = ks_distance(&synthetic(&xs, bumped), &exact).unwrap();
    assert_eq!(ks.per_phase[0], 0.0);
    assert!((ks.per_phase[1] - 0.01).abs() < 1e-15);
    assert!((ks.total - 0.01).abs() < 1e-15);
    assert_eq!(ks_against(&emp, &law).unwrap().per_phase, vec![0.0, 0.0]);
}

#[test]
fn ks_rejects_other_grids() {
    let model = reference();
    let law = stationary_standard(&model).unwrap().law;
    let xs = [0.0, 0.5, 1.0];
    let emp = synthetic(&xs, table(&law, &[Level::At(0.0), Level::At(0.5), Level::At(1.0)]).rows);
    let other = table(&law, &[Level::At(0.0), Level::At(0.6), Level::At(1.0)]);
    assert!(matches!(ks_distance(&emp, &other), Err(Error::GridMismatch(_))));
    let short = table(&law, &[Level::At(0.0), Level::At(0.5)]);
    assert!(matches!(ks_distance(&emp, &short), Err(Error::GridMismatch(_))));
}

#[test]
fn invalid_configs() {
    let model = reference();
    let ok = config(BoundaryVariant::Standard, 1e3, 10.0, 0);
    ok.validate(&model).unwrap();

    let mut c = ok.clone();
    c.horizon = 0.0;
    assert!(matches!(simulate(&c, &model), Err(Error::Domain { .. })));
    let mut c = ok.clone();
    c.horizon = -1.0;
    assert!(simulate(&c, &model).is_err());
    let mut c = ok.clone();
    // threshold is max (μ/σ)² = 2.25
    c.lambda = 2.0;
    assert!(matches!(simulate(&c, &model), Err(Error::LambdaTooSmall { .. })));
    let mut c = ok.clone();
    c.q = 0.0;
    assert!(simulate(&c, &model).is_err());
    let mut c = ok.clone();
    c.variant = sticky(&[1.0]);
    assert!(simulate(&c, &model).is_err());
    let mut c = ok.clone();
    c.grid = vec![0.0, 1.0, 0.5];
    assert!(simulate(&c, &model).is_err());
    let mut c = ok.clone();
    c.grid = vec![-0.1, 1.0];
    assert!(simulate(&c, &model).is_err());
    let mut c = ok;
    c.replications = 0;
    assert!(simulate(&c, &model).is_err());
}

#[test]
fn regenerative_law_matches_simulation_at_scale_down() {
    // A cheap cross-check of all three variants against the regeneration law.
    let model = reference();
    for (n, variant) in reference_variants().into_iter().enumerate() {
        let emp = simulate(&config(variant.clone(), 1e4, 5e3, 20 + n as u64), &model).unwrap();
        let ks = ks_against(&emp, &regen_cdf(&variant, &model, 1.0).unwrap()).unwrap();
        assert!(ks.total <= 0.03, "{ks:?}");
    }
}

fn ks_mean(model: &MmbmModel, lambda: f64, horizon: f64, seeds: std::ops::Range<u64>) -> (f64, f64) {
    let law = regen_cdf(&BoundaryVariant::Standard, model, 1.0).unwrap();
    let ks: Vec<f64> = seeds
        .map(|s| {
            let emp = simulate(&config(BoundaryVariant::Standard, lambda, horizon, s), model).unwrap();
            ks_against(&emp, &law).unwrap().total
        })
        .collect();
    mean_and_se(&ks)
}

#[test]
fn longer_horizons_do_not_worsen_the_fit() {
    let model = reference();
    let (short, se_short) = ks_mean(&model, 1e3, 200.0, 0..10);
    let (long, se_long) = ks_mean(&model, 1e3, 400.0, 100..110);
    assert!(long <= short + se_short.max(se_long), "{long} vs {short} ± {se_short}");
}

#[test]
fn larger_lambda_fits_better() {
    let model = reference();
    let (coarse, _) = ks_mean(&model, 1e2, 500.0, 0..10);
    let (fine, _) = ks_mean(&model, 1e4, 500.0, 0..10);
    assert!(fine <= coarse, "{fine} vs {coarse}");
}

#[test]
#[ignore = "about a minute per case; run with --ignored"]
fn scalar_examples_at_full_scale() {
    let model = scalar(-1.0, 1.0);
    let emp = simulate(&config(BoundaryVariant::Standard, 1e4, 1e6, 1), &model).unwrap();
    let worst =
        emp.grid.iter().zip(&emp.occupation).map(|(x, o)| (o[0] - (1.0 - (-2.0 * x).exp())).abs()).fold(0.0, f64::max);
    assert!(worst <= 0.02, "KS {worst}");
    let emp = simulate(&config(sticky(&[1.0]), 1e4, 1e6, 2), &model).unwrap();
    assert!((emp.zero_fraction[0] - 0.5).abs() <= 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn occupation_is_a_sub_cdf(seed in any::<u64>(), which in 0usize..3, lambda in 20.0f64..400.0) {
        let model = reference();
        let variant = reference_variants().swap_remove(which);
        let mut cfg = config(variant, lambda, 50.0, seed);
        // tall enough to cover every visited level
        cfg.grid = (0..=40).map(|i| i as f64 * 0.25).chain([1e6]).collect();
        let emp = simulate(&cfg, &model).unwrap();
        let tol = 1e-9;
        prop_assert!((emp.phase_marginal.sum() - 1.0).abs() < tol);
        for i in 0..2 {
            prop_assert!(emp.zero_fraction[i] >= 0.0);
            prop_assert!(emp.occupation[0][i] >= emp.zero_fraction[i] - tol);
            for w in emp.occupation.windows(2) {
                prop_assert!(w[1][i] >= w[0][i] - tol, "{} {}", w[0][i], w[1][i]);
            }
            for row in &emp.occupation {
                prop_assert!(row[i] >= -tol && row[i] <= 1.0 + tol);
            }
            prop_assert!((emp.occupation.last().unwrap()[i] - emp.phase_marginal[i]).abs() < tol);
        }
        if emp.n_regenerations > 0 {
            prop_assert!((emp.regen_phase_freq.sum() - 1.0).abs() < 1e-12);
        }
    }
}
