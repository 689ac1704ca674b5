use mmtrust_core::human::{sample_cohort, CohortConfig};
use mmtrust_core::scenario::shipped_scenario;
use mmtrust_core::study::{
    parse_records_csv, records_to_csv, run_study, shipped_study, Group, HypothesisOutcome, StudyConfig, SubjectRecord,
    CSV_HEADER,
};
use mmtrust_core::trust::LikelihoodKernel;
use mmtrust_core::Error;
use proptest::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn coffee_study() -> (StudyConfig, mmtrust_core::Scenario) {
    (shipped_study("coffee").unwrap().unwrap(), shipped_scenario("coffee").unwrap().unwrap())
}

fn p_value(outcome: &HypothesisOutcome) -> f64 {
    match outcome {
        HypothesisOutcome::Tested { result, .. } => result.p_value,
        HypothesisOutcome::NotApplicable { reason } => panic!("not applicable: {reason}"),
    }
}

#[test]
fn coffee_study_moves_every_subject_in_the_designed_direction() {
    let (config, scenario) = coffee_study();
    let started = std::time::Instant::now();
    let outcome = run_study(&config, &scenario).unwrap();
    assert!(started.elapsed().as_secs_f64() < 10.0);
    let pos: Vec<&SubjectRecord> = outcome.records.iter().filter(|r| r.group == Group::Positive).collect();
    let neg: Vec<&SubjectRecord> = outcome.records.iter().filter(|r| r.group == Group::Negative).collect();
    assert_eq!((pos.len(), neg.len()), (21, 21));
    assert!(pos.iter().all(|r| r.delta > 0.0));
    assert!(neg.iter().all(|r| r.delta < 0.0));
    assert!(p_value(&outcome.summary.h1.outcome) < 0.01);
    assert!(p_value(&outcome.summary.h2.outcome) < 0.01);
    assert!(p_value(&outcome.summary.h3.outcome) < 0.01);
    let ids: Vec<u32> = outcome.records.iter().map(|r| r.subject_id).collect();
    assert_eq!(ids, (1..=42).collect::<Vec<_>>());
}

/// Closed-form reports: eliminating a set renormalizes the surviving
/// weights, and with a Boltzmann kernel p = sum w_i e^{-beta C_i}.
#[test]
fn coffee_study_matches_per_subject_enumeration() {
    let (config, scenario) = coffee_study();
    let outcome = run_study(&config, &scenario).unwrap();
    let costs = [5.0, f64::INFINITY, 8.0, 12.0];
    let mut seeds = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = outcome.records.iter();
    for group in &config.groups {
        let cohort = sample_cohort(
            &scenario.human(0.0, 0),
            &CohortConfig {
                n: group.cohort.n,
                beta_log_mean: group.cohort.beta_log_mean,
                beta_log_sd: group.cohort.beta_log_sd,
                concentration: group.cohort.concentration,
                noise_sigma: 0.0,
                seed: seeds.next_u64(),
            },
        )
        .unwrap();
        let survivors: &[usize] = match group.group {
            Group::Positive => &[0, 2],
            Group::Negative => &[1, 3],
        };
        for human in cohort {
            let LikelihoodKernel::Boltzmann { beta } = human.kernel else { panic!("coffee uses boltzmann") };
            let k: Vec<f64> = costs.iter().map(|c: &f64| if c.is_finite() { (-beta * c).exp() } else { 0.0 }).collect();
            let w = human.ensemble.weights();
            let before: f64 = (0..4).map(|i| w[i] * k[i]).sum();
            let mass: f64 = survivors.iter().map(|&i| w[i]).sum();
            let after: f64 = survivors.iter().map(|&i| w[i] * k[i]).sum::<f64>() / mass;
            let r = records.next().unwrap();
            assert!((r.trust_before - 10.0 * before).abs() <= 1e-6, "{} vs {}", r.trust_before, 10.0 * before);
            assert!((r.trust_after - 10.0 * after).abs() <= 1e-6);
        }
    }
}

#[test]
fn shipped_studies_run_and_are_directional() {
    for name in ["coffee", "door", "box"] {
        let config = shipped_study(name).unwrap().unwrap();
        let scenario = shipped_scenario(name).unwrap().unwrap();
        let outcome = run_study(&config, &scenario).unwrap();
        let summary = &outcome.summary.groups;
        assert_eq!(summary[0].increased, 21, "{name}");
        assert_eq!(summary[1].decreased, 21, "{name}");
    }
}

#[test]
fn empty_messages_make_h1_not_applicable() {
    let (mut config, scenario) = coffee_study();
    for g in &mut config.groups {
        g.messages.clear();
    }
    let outcome = run_study(&config, &scenario).unwrap();
    assert!(outcome.records.iter().all(|r| r.delta == 0.0));
    assert!(matches!(outcome.summary.h1.outcome, HypothesisOutcome::NotApplicable { .. }));
}

#[test]
fn same_seed_gives_identical_csv() {
    let (config, scenario) = coffee_study();
    let a = records_to_csv(&run_study(&config, &scenario).unwrap().records).unwrap();
    let b = records_to_csv(&run_study(&config, &scenario).unwrap().records).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with(&(CSV_HEADER.join(",") + "\n")));
    assert!(a.ends_with('\n'));
}

#[test]
fn invalid_message_designs_are_rejected() {
    let (mut config, scenario) = coffee_study();
    config.groups[0].messages = vec![mmtrust_core::Observation::eliminate(["M1"])];
    assert!(matches!(run_study(&config, &scenario), Err(Error::Validation { .. })));

    let (mut config, scenario) = coffee_study();
    config.groups[1].messages = vec![mmtrust_core::Observation::eliminate(["M1"])];
    assert!(matches!(run_study(&config, &scenario), Err(Error::Validation { .. })));

    let (mut config, scenario) = coffee_study();
    config.groups.pop();
    assert!(matches!(run_study(&config, &scenario), Err(Error::Validation { .. })));
}

#[test]
fn contradictions_abort_with_subject_and_message() {
    let (mut config, scenario) = coffee_study();
    // Valid for the design rules, but the second message leaves no model.
    config.groups[1].messages.push(mmtrust_core::Observation::eliminate(["M2", "M4", "M1", "M3"]));
    match run_study(&config, &scenario) {
        Err(Error::StudyAborted { subject_id, message_index, source }) => {
            assert_eq!(subject_id, 22);
            assert_eq!(message_index, 1);
            assert_eq!(*source, Error::Contradiction);
        }
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn csv_round_trips(rows in prop::collection::vec((any::<bool>(), -20.0f64..20.0, -20.0f64..20.0, 0.0f64..1.0, 0.0f64..1.0), 0..30)) {
        let records: Vec<SubjectRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (pos, b, a, pb, pa))| {
                SubjectRecord::new(i as u32 + 1, if pos { Group::Positive } else { Group::Negative }, b, a, pb, pa)
            })
            .collect();
        let text = records_to_csv(&records).unwrap();
        prop_assert_eq!(parse_records_csv(&text).unwrap(), records);
    }

    #[test]
    fn noiseless_studies_are_directional_for_any_seed(seed in any::<u64>(), sd in 0.0f64..0.8, concentration in 2.0f64..200.0) {
        let (mut config, scenario) = coffee_study();
        config.seed = seed;
        for g in &mut config.groups {
            g.cohort.n = 5;
            g.cohort.beta_log_sd = sd;
            g.cohort.concentration = concentration;
        }
        let outcome = run_study(&config, &scenario).unwrap();
        for r in &outcome.records {
            match r.group {
                Group::Positive => prop_assert!(r.delta > 0.0, "{:?}", r),
                Group::Negative => prop_assert!(r.delta < 0.0, "{:?}", r),
            }
        }
    }
}
