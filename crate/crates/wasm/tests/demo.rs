use cpte_wasm::{compare_json, estimate_json, learn_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn compare_reports_both_directions() {
    let v = parse(compare_json("lexicographic", "1,-1", "1, 2.0", "1, 3.0").unwrap());
    assert_eq!(v["forward"], 1.0);
    assert_eq!(v["backward"], 0.0);
    assert_eq!(v["tie_aware"], true);
    let v = parse(compare_json("pns", "", "0.5", "0.5").unwrap());
    assert_eq!(v["forward"], 0.0);
    assert!(compare_json("median", "", "1", "0").is_err());
    assert!(compare_json("pns", "", "x", "0").is_err());
}

#[test]
fn estimate_separates_modifier_groups() {
    let v = parse(estimate_json(2000, 3, 0).unwrap());
    let g = v["groups"].as_array().unwrap();
    let (off, on) = (&g[0], &g[1]);
    assert!(off["oracle_q_w"].as_f64().unwrap() < 0.5);
    assert!(on["oracle_q_w"].as_f64().unwrap() > 0.5);
    assert!(on["knn_q_w"].as_f64().unwrap() > off["knn_q_w"].as_f64().unwrap());
    assert!(estimate_json(5, 3, 0).is_err());
}

#[test]
fn learn_recovers_most_of_the_optimal_value() {
    let v = parse(learn_json(1500, 4, 1).unwrap());
    let opt = v["optimal_value"].as_f64().unwrap();
    assert!(v["oracle_value"].as_f64().unwrap() > opt - 0.05, "{v}");
    assert!(v["policy"].as_str().unwrap().contains("x8"), "{v}");
    assert_eq!(learn_json(1500, 4, 1).unwrap(), learn_json(1500, 4, 1).unwrap());
    assert!(learn_json(1500, 4, 3).is_err());
}
