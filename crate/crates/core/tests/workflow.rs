use bartlab::compare::{bridge_sample, loo, pointwise_loglik, BridgeConfig};
use bartlab::data::{load_csv, save_csv, synth_george, Condition, Dataset, SynthConfig};
use bartlab::infer::{fit, fit_model, mcse_mean, parameter_recovery, Design, RecoveryTruth, SamplerConfig};
use bartlab::model::{BartModel, ConjugateHarness, PriorSpec, SubjectParams};

fn quick() -> SamplerConfig {
    SamplerConfig {
        warmup: 1000,
        samples: 1000,
        thin: 2,
        ..SamplerConfig::default()
    }
}

#[test]
fn recovery_intervals_cover_the_truth() {
    let truth = RecoveryTruth::Shared(SubjectParams::new(1.2, 0.8).unwrap());
    let report = parameter_recovery(
        BartModel::Flat,
        &truth,
        &Design::default(),
        100,
        PriorSpec::new(10.0).unwrap(),
        &quick(),
    )
    .unwrap();
    for p in &report.params {
        assert!((0.80..=0.97).contains(&p.coverage), "{} coverage {}", p.name, p.coverage);
    }
}

#[test]
fn large_designs_recover_the_truth_closely() {
    let truth = SubjectParams::new(1.2, 0.8).unwrap();
    let design = Design {
        trials_per_condition: 3000,
        ..Design::default()
    };
    let report = parameter_recovery(
        BartModel::Flat,
        &RecoveryTruth::Shared(truth),
        &design,
        1,
        PriorSpec::new(10.0).unwrap(),
        &quick(),
    )
    .unwrap();
    for p in &report.params {
        assert!((p.mean_estimate / p.truth - 1.0).abs() < 0.05, "{p:?}");
    }
}

#[test]
fn zero_data_fit_returns_the_prior() {
    let data = Dataset::new(vec![Condition::new("empty", 0.1).unwrap()], Vec::new()).unwrap();
    let f = fit_model(BartModel::Flat, &data, PriorSpec::new(10.0).unwrap(), &quick()).unwrap();
    for i in 0..2 {
        let se = mcse_mean(&f.samples.param_chains(i)).unwrap();
        assert!((f.samples.mean(i) - 5.0).abs() < 3.0 * se, "{} {}", f.samples.mean(i), se);
    }
}

#[test]
fn bridge_estimate_ignores_draw_order() {
    let harness = ConjugateHarness::binomial(12, 4);
    let cfg = SamplerConfig {
        warmup: 1000,
        samples: 2000,
        thin: 1,
        ..SamplerConfig::default()
    };
    let f = fit(&harness, &cfg).unwrap();
    let a = bridge_sample(&f.samples, &harness, &BridgeConfig::default()).unwrap();
    let mut shuffled = f.samples.clone();
    for chain in &mut shuffled.chains {
        chain.unconstrained.reverse();
        chain.constrained.reverse();
        chain.log_density.reverse();
    }
    shuffled.chains.rotate_left(1);
    let b = bridge_sample(&shuffled, &harness, &BridgeConfig::default()).unwrap();
    let se = a.log_ml_se().hypot(b.log_ml_se());
    assert!((a.log_ml - b.log_ml).abs() < 3.0 * se, "{} vs {} (se {se})", a.log_ml, b.log_ml);
}

#[test]
fn saved_dataset_fits_identically() {
    let data = synth_george(&SynthConfig::george(8)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    save_csv(&data, &path).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(data, back);

    let prior = PriorSpec::new(10.0).unwrap();
    let a = fit_model(BartModel::Flat, &data, prior, &quick()).unwrap();
    let b = fit_model(BartModel::Flat, &back, prior, &quick()).unwrap();
    assert_eq!(a, b);

    let ll = pointwise_loglik(&a.samples, &data).unwrap();
    assert_eq!(ll.n_obs, data.n_decisions());
    let l = loo(&a.samples, &data).unwrap();
    assert!(l.elpd_loo < 0.0 && l.max_pareto_k() < 0.7);
}
