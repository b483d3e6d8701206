use covbai::bench::{self, AlgoKind, BenchConfig, CSV_HEADER};
use covbai::complexity::{lower_bound_gaussian, upper_bounds};
use covbai::environments::scenario;
use covbai::{BanditInstance, Error};
use proptest::prelude::*;

const INSTANCE_JSON: &str = r#"{
  "kind": "Gaussian",
  "means": [0.0, 0.4, 0.1],
  "covariance": [[1.0, 0.8, 0.0], [0.8, 1.0, 0.0], [0.0, 0.0, 1.0]],
  "label": "file"
}"#;

fn small_cfg(scenarios: Vec<String>) -> BenchConfig {
    BenchConfig {
        scenarios,
        algos: vec![AlgoKind::PairwiseNoOversample, AlgoKind::Hoeffding],
        trials: 5,
        seed: 3,
        ..BenchConfig::default()
    }
}

#[test]
fn json_instance_file_is_a_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    std::fs::write(&path, INSTANCE_JSON).unwrap();
    let name = path.to_str().unwrap().to_string();
    let inst = scenario(&name).unwrap();
    assert_eq!(inst.arms(), 3);
    assert_eq!(inst.best().0, 1);

    let rows = bench::run_bench(&small_cfg(vec![name.clone()])).unwrap();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.scenario == name && r.true_best == 2));
}

#[test]
fn instance_json_round_trip() {
    let inst = BanditInstance::from_json_str(INSTANCE_JSON).unwrap();
    let back = BanditInstance::from_json_str(&inst.to_json_string().unwrap()).unwrap();
    assert_eq!(inst, back);
    let bern = scenario("toy3-0.2").unwrap();
    let json = bern.to_json_string().unwrap();
    assert_eq!(BanditInstance::from_json_str(&json).unwrap(), bern);
}

#[test]
fn csv_file_parses_back() {
    let rows = bench::run_bench(&small_cfg(vec!["toy2-0.1".into(), "fig1-rho-0.9".into()])).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    bench::write_csv(&rows, std::fs::File::create(&path).unwrap()).unwrap();

    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, CSV_HEADER);
    let records: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), rows.len());
    for (rec, row) in records.iter().zip(&rows) {
        assert_eq!(&rec[0], row.scenario);
        assert_eq!(&rec[1], row.algo);
        assert_eq!(rec[8].parse::<u64>().unwrap(), row.total_queries);
        assert_eq!(&rec[7], if row.correct { "true" } else { "false" });
    }
}

#[test]
fn rows_sorted_and_seed_sensitive() {
    let cfg = small_cfg(vec!["toy3-0.2".into(), "toy2-0.1".into()]);
    let rows = bench::run_bench(&cfg).unwrap();
    let keys: Vec<_> = rows.iter().map(|r| (r.scenario.clone(), r.algo.clone(), r.trial)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);

    let other = bench::run_bench(&BenchConfig { seed: 4, ..cfg }).unwrap();
    let q = |rs: &[bench::BenchRow]| rs.iter().map(|r| r.total_queries).collect::<Vec<_>>();
    assert_ne!(q(&rows), q(&other));
}

#[test]
fn unknown_names_are_reported() {
    assert!(matches!(scenario("fig2-rho-0"), Err(Error::UnknownScenario(_))));
    assert!(matches!("ucb".parse::<AlgoKind>(), Err(Error::UnknownAlgo(_))));
    let err = bench::run_bench(&small_cfg(vec!["nope".into()])).unwrap_err();
    assert!(matches!(err, Error::UnknownScenario(_)));
}

fn instance_strategy() -> impl Strategy<Value = BanditInstance> {
    (2usize..6).prop_flat_map(|k| {
        (
            proptest::collection::vec(-1.0f64..1.0, k),
            proptest::collection::vec(-1.0f64..1.0, k * k),
        )
            .prop_filter_map("distinct means", move |(means, a)| {
                let mut cov = vec![vec![0.0; k]; k];
                for i in 0..k {
                    for j in 0..k {
                        cov[i][j] = (0..k).map(|m| a[i * k + m] * a[j * k + m]).sum::<f64>() + if i == j { 0.1 } else { 0.0 };
                    }
                }
                BanditInstance::gaussian("p", means, cov).ok()
            })
    })
}

proptest! {
    #[test]
    fn oversampling_bound_never_exceeds_direct_bound(inst in instance_strategy()) {
        let ub = upper_bounds(&inst, 0.1).unwrap();
        prop_assert!(ub.b1 <= ub.b2 * (1.0 + 1e-12));
        prop_assert!(ub.g1.is_finite() && ub.g2 >= 0.0);
    }

    #[test]
    fn gaussian_lower_bound_decreases_in_delta(gap in 0.01f64..3.0, v in 0.01f64..4.0, d in 0.001f64..0.24) {
        let lo = lower_bound_gaussian(&[gap, 0.0], &[0.0, v], d).unwrap();
        let hi = lower_bound_gaussian(&[gap, 0.0], &[0.0, v], d * 0.5).unwrap();
        prop_assert!(lo >= 0.0);
        prop_assert!(hi >= lo);
    }
}
