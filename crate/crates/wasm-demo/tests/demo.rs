use detect_wasm::{fit_csv, score, synth};

#[test]
fn planted_round_trip() {
    let csv = synth("shift", 7).unwrap();
    let out: serde_json::Value = serde_json::from_str(&fit_csv(&csv, "f1", 0, 24).unwrap()).unwrap();
    assert!(out["rules"].as_str().unwrap().contains("signal <="));
    assert!(out["svg"].as_str().unwrap().starts_with("<svg"));
    assert!(out["distributions"].as_str().unwrap().starts_with("time,"));
}

#[test]
fn anomaly_marks_step() {
    let csv = synth("anomaly", 2).unwrap();
    let out: serde_json::Value = serde_json::from_str(&fit_csv(&csv, "f2", 4, 24).unwrap()).unwrap();
    assert!(out["svg"].as_str().unwrap().contains("class=\"mark\""));
}

#[test]
fn scores() {
    assert_eq!(score("40, 40, 40, 10, 10, 10", "f1", 0), Ok(30.0));
    assert_eq!(score("5 5 20 5 5", "f2", 3), Ok(15.0));
    assert!(score("1 2", "f1", 0).unwrap_err().contains("at least 3"));
    assert!(score("1 x 2", "f1", 0).is_err());
    assert!(fit_csv("nonsense", "f1", 0, 1).is_err());
}
