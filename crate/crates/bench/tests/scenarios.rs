use safe_bench::{run, write_csv, Params, Row, Scenario};

fn without_latency(rows: Vec<Row>) -> Vec<Row> {
    rows.into_iter().map(|r| Row { latency_us: 0, ..r }).collect()
}

#[test]
fn same_seed_gives_the_same_rows() {
    for s in Scenario::ALL {
        let a = without_latency(run(s, &Params::small(3)).unwrap());
        let b = without_latency(run(s, &Params::small(3)).unwrap());
        assert!(!a.is_empty(), "{} produced no rows", s.name());
        assert_eq!(a, b, "{}", s.name());
    }
}

#[test]
fn different_seeds_change_the_workload() {
    let a = without_latency(run(Scenario::LinkingGranularity, &Params::small(3)).unwrap());
    let b = without_latency(run(Scenario::LinkingGranularity, &Params::small(4)).unwrap());
    assert_ne!(a, b);
}

#[test]
fn csv_has_the_documented_header() {
    let rows = run(Scenario::UpdateMix, &Params::small(1)).unwrap();
    let mut out = Vec::new();
    write_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,variant,index,x,rep,allowed,steps,context_sets,context_statements,fetches,refreshes,latency_us,answer_digest"
    );
    assert_eq!(lines.count(), rows.len());
}

#[test]
fn scenario_names_round_trip() {
    for s in Scenario::ALL {
        assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
    }
    assert!("nope".parse::<Scenario>().is_err());
}

#[test]
fn cli_writes_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rows.csv");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_safe-bench"))
        .args(["attestation", "--seed", "5", "--small", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().skip(1).all(|l| l.starts_with("attestation,")));
    assert!(text.lines().count() > 1);
}
