use std::fs;

use tte_estimand::data::validate_dataset;
use tte_estimand::io::{load_dataset, read_dataset, read_ices, write_dataset, write_ices, CsvOptions};
use tte_estimand::simulate::{simulate_trial, DgpConfig};
use tte_estimand::{Dataset, Error};

fn trial(synthetic_l: bool) -> tte_estimand::simulate::SimulatedTrial<f64> {
    simulate_trial(&DgpConfig { k: 12, synthetic_l, ..Default::default() }).unwrap()
}

#[test]
fn four_hundred_by_twelve_round_trip() {
    let sim = trial(false);
    let mut buf = Vec::new();
    write_dataset(&sim.dataset, &mut buf, &CsvOptions::default()).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 401);
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 1 + 2 + 12 + 12 + 12);

    let back: Dataset = read_dataset(text.as_bytes(), &CsvOptions::default()).unwrap();
    assert_eq!(back, sim.dataset);
    // NA cells are exactly the censored follow-ups.
    for s in back.subjects() {
        for t in 1..=12 {
            assert_eq!(s.y_at(t).is_na(), s.c[t - 1].is_censored());
        }
    }
    assert!(back.subjects().iter().any(|s| s.has_na()));
}

#[test]
fn time_varying_covariates_round_trip_through_a_file() {
    let sim = trial(true);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trial.csv");
    let mut f = fs::File::create(&path).unwrap();
    write_dataset(&sim.dataset, &mut f, &CsvOptions::default()).unwrap();
    drop(f);
    let back: Dataset = load_dataset(&path, &CsvOptions::default()).unwrap();
    assert_eq!(back, sim.dataset);
    assert!(validate_dataset(&back).is_empty());

    let mut buf = Vec::new();
    write_ices(&sim.ices, &mut buf).unwrap();
    assert_eq!(read_ices(buf.as_slice()).unwrap(), sim.ices);
}

#[test]
fn load_conforms_and_rejects_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.csv");
    // a: C(0) censored but Y(1) recorded; b: event at 1 then 0 at 2.
    let body = "id,A0,A1,C0,C1,Y1,Y2\na,0,0,1,0,0,NA\nb,1,1,0,0,1,0\n";
    fs::write(&path, body).unwrap();

    let raw: Dataset = read_dataset(body.as_bytes(), &CsvOptions::default()).unwrap();
    assert_eq!(validate_dataset(&raw).len(), 4);
    let conformed: Dataset = load_dataset(&path, &CsvOptions::default()).unwrap();
    assert!(validate_dataset(&conformed).is_empty());
    assert!(conformed.subject("a").unwrap().y.iter().all(|y| y.is_na()));
    assert_eq!(conformed.subject("b").unwrap().event_time(), Some(1));

    fs::write(&path, "id,A0,A1,C0,C1,Y1,Y2\nc,0,0,1,1,NA,1\n").unwrap();
    assert!(matches!(load_dataset::<f64>(&path, &CsvOptions::default()), Err(Error::ConventionConflict { .. })));
}
