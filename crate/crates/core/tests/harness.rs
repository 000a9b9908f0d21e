use switchdetect::harness::tables::{mean_mixture, reproduce_table, variance_mixture, ReproduceOptions, Verdict};
use switchdetect::harness::{calibrate, run_power, run_trials, CalibrationStore};
use switchdetect::Error;

#[test]
fn calibration_round_trip_through_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = CalibrationStore::new(dir.path().join("c.jsonl"));
    let exp = mean_mixture(0.1, 2.0);
    for n in [200, 800] {
        for e in calibrate(&exp, n, 300, &[0.95], 17).unwrap() {
            assert!(store.append(&e).unwrap());
        }
    }
    let fp = exp.fingerprint();
    assert_eq!(fp, mean_mixture(0.0, 0.0).fingerprint());
    let exact = store.threshold(&fp, 200, 0.95).unwrap();
    assert!(exact.exact);
    let mid = store.threshold(&fp, 400, 0.95).unwrap();
    assert!(!mid.exact);
    let c800 = store.threshold(&fp, 800, 0.95).unwrap().c;
    assert!(mid.c < exact.c && mid.c > c800);

    let other = variance_mixture(3.0, 0.05);
    assert!(matches!(
        run_power(&other, 200, exact.entry.as_ref().unwrap(), 10, 1),
        Err(Error::FingerprintMismatch { .. })
    ));
}

#[test]
fn trials_do_not_depend_on_scheduling() {
    let exp = mean_mixture(0.1, 2.0);
    let a = run_trials(&exp, 150, 64, 99).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_trials(&exp, 150, 64, 99).unwrap());
    assert_eq!(a, b);
}

#[test]
fn table_one_reproduction_is_deterministic() {
    let opts = ReproduceOptions { trials: Some(200), seed: 7 };
    let a = reproduce_table(1, opts).unwrap();
    let b = reproduce_table(1, opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cells.len(), 18);
    assert!(a.cells.iter().all(|c| c.verdict != Verdict::Info));
    assert!(reproduce_table(11, ReproduceOptions::default()).is_err());
}
