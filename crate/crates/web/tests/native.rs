use homogvi_web::{compare_json, homogenize_json, mscheck_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn homogenize_separable_coefficient() {
    let out = homogenize_json(
        r#"{"dimension": 1,
            "coefficient": {"entries": [["(2 + sin(2*pi*y1)) * (2 + sin(2*pi*z1))"]], "alpha": 1, "beta": 9},
            "cell": {"n_micro": 64, "n_meso": 64}}"#,
    )
    .unwrap();
    let v = parse(&out);
    let a = v["a_star"][0][0].as_f64().unwrap();
    assert!((a - 3.0).abs() < 5e-3, "{a}");
    assert_eq!(v["a_tilde"].as_array().unwrap().len(), 64);
    assert_eq!(v["meso_points"].as_array().unwrap().len(), 64);
}

#[test]
fn compare_shows_convergence_inputs() {
    let out = compare_json(
        r#"{"dimension": 1,
            "coefficient": {"entries": [["2 + sin(2*pi*y1)"]], "alpha": 1, "beta": 3},
            "obstacle": {"psi0": "-0.05"},
            "load": "-4",
            "cell": {"n_micro": 32, "n_meso": 64},
            "macro": {"subdivisions": 256},
            "epsilon": {"eps": 0.0625, "subdivisions": 512}}"#,
    )
    .unwrap();
    let v = parse(&out);
    assert_eq!(v["x"].as_array().unwrap().len(), 513);
    assert_eq!(v["u0"].as_array().unwrap().len(), 257);
    assert!(v["l2_error"].as_f64().unwrap() < 1e-2);
    assert!(v["active_eps"].as_array().unwrap().iter().any(|a| a == true));
}

#[test]
fn errors_are_messages() {
    assert!(homogenize_json("{").is_err());
    let e = homogenize_json(r#"{"dimension": 1}"#).unwrap_err();
    assert!(e.contains("coefficient"));
    let e = compare_json(r#"{"dimension": 2, "coefficient": {"entries": [["1","0"],["0","1"]], "alpha": 1, "beta": 1}}"#)
        .unwrap_err();
    assert!(e.contains("dimension 1"));
}

#[test]
fn mscheck_rows() {
    let out = mscheck_json(
        r#"{"dimension": 1, "mscheck": {"w": "1", "phi": "sin(2*pi*y1)", "v": "sin(2*pi*y1)", "eps": [0.25, 0.0625]}}"#,
    )
    .unwrap();
    let rows = parse(&out);
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert!((rows[0]["limit"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}
