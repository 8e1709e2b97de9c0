use std::path::PathBuf;

use mpp_core::scenario::Scenario;
use mpp_core::sim::{empirical_multinomial_residual, simulate, SimulationPlan};
use mpp_core::verify::{verify, Role, Verdict};

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    Scenario::load(&path).unwrap()
}

fn small(mut s: Scenario, paths: u64) -> Scenario {
    s.apply_overrides(None, Some(paths)).unwrap();
    s
}

#[test]
fn shipped_examples_pass() {
    for name in ["example_3_2", "example_3_3"] {
        let report = verify(&scenario(name), None).unwrap();
        assert!(report.pass, "{}", report.to_text());
        assert!(report.records.iter().all(|r| r.role != Role::Control));
        for tag in ["i", "ii", "iii", "iv"] {
            assert!(report.records.iter().any(|r| r.assertion_tag.as_str() == tag && r.role == Role::Gating));
        }
    }
}

#[test]
fn control_passes_only_as_a_control() {
    let control = scenario("erlang_control");
    let report = verify(&control, None).unwrap();
    assert!(report.pass, "{}", report.to_text());
    let rec = report.record("iv.identity.control").unwrap();
    assert_eq!(rec.verdict, Verdict::FailedAsDesigned);
    assert!(rec.statistic > 5.0);

    let mut plain = control;
    plain.control = false;
    let report = verify(&plain, None).unwrap();
    assert!(!report.pass);
    assert_eq!(report.record("iv.identity.empirical").unwrap().verdict, Verdict::Fail);
    assert_eq!(report.record("assumption.positivity").unwrap().verdict, Verdict::Fail);
}

#[test]
fn control_that_passes_fails_the_suite() {
    // a mixed Poisson scenario declared as a control: its identities hold, so the control passes
    let mut s = small(scenario("example_3_2"), 20_000);
    s.control = true;
    let report = verify(&s, None).unwrap();
    assert_eq!(report.record("iv.identity.control").unwrap().verdict, Verdict::ControlPassed);
    assert!(!report.pass);
}

#[test]
fn reports_are_deterministic() {
    let s = small(scenario("example_3_3"), 20_000);
    let a = verify(&s, Some(1)).unwrap();
    let b = verify(&s, Some(3)).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_text(), b.to_text());
    let mut other = s.clone();
    other.apply_overrides(Some(999), None).unwrap();
    assert_ne!(verify(&other, None).unwrap().to_csv(), a.to_csv());
}

#[test]
fn csv_has_fixed_columns() {
    let report = verify(&small(scenario("example_3_2"), 5_000), None).unwrap();
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "check_id,assertion_tag,statistic,threshold,verdict");
    assert!(lines.all(|l| l.split(',').count() == 5));
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["records"].as_array().unwrap().len(), report.records.len());
}

#[test]
fn control_power_grows_with_paths() {
    let control = scenario("erlang_control");
    let q = &control.battery.multinomial[0];
    let median_z = |paths: u64| {
        let mut zs: Vec<f64> = (0..10u64)
            .map(|seed| {
                let plan = SimulationPlan { num_paths: paths, master_seed: 500 + seed, ..control.plan().unwrap() };
                let p = simulate(&plan, None).unwrap();
                empirical_multinomial_residual(&p, &q.times, &q.counts).unwrap().z_score().abs()
            })
            .collect();
        zs.sort_by(f64::total_cmp);
        (zs[4] + zs[5]) / 2.0
    };
    let (a, b) = (median_z(5_000), median_z(10_000));
    assert!(b >= a, "median |z| {a} at 5000 paths, {b} at 10000");
}
