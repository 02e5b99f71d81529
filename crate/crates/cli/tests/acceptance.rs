//! Runs every acceptance criterion through the binary and prints one line per
//! criterion. Criterion 10 compares two complete runs byte for byte.

use std::io::Write;
use std::process::Command;

const SEED: &str = "42";
const CRITERIA: usize = 10;

fn run_suite() -> (Option<i32>, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_eofkit"))
        .args(["verify", "--suite", "all", "--seed", SEED])
        .output()
        .expect("binary runs");
    (out.status.code(), String::from_utf8(out.stdout).unwrap())
}

/// `(id, passed, title)` from the `criterion N PASS|FAIL: title` lines.
fn verdicts(report: &str) -> Vec<(usize, bool, String)> {
    report
        .lines()
        .filter_map(|line| {
            let rest = line.strip_prefix("criterion ")?;
            let (id, rest) = rest.split_once(' ')?;
            let (verdict, title) = rest.split_once(": ")?;
            Some((id.parse().ok()?, verdict == "PASS", title.to_string()))
        })
        .collect()
}

#[test]
fn acceptance() {
    let (first_code, first) = run_suite();
    let (second_code, second) = run_suite();
    print!("{first}");

    let mut results = verdicts(&first);
    let in_process = results.iter().any(|(id, passed, _)| *id == CRITERIA && *passed);
    results.retain(|(id, _, _)| *id < CRITERIA);
    let reproducible = in_process && first_code == Some(0) && second_code == Some(0) && first == second;
    results.push((CRITERIA, reproducible, "determinism in process and across two full runs".into()));

    // Straight to stderr: the summary shows even when the harness captures output.
    let mut err = std::io::stderr().lock();
    for (id, passed, title) in &results {
        writeln!(err, "acceptance criterion {id:>2}: {} {title}", if *passed { "PASS" } else { "FAIL" }).unwrap();
    }
    let ids: Vec<usize> = results.iter().map(|r| r.0).collect();
    assert_eq!(ids, (1..=CRITERIA).collect::<Vec<_>>(), "missing criteria in the report");
    assert!(results.iter().all(|r| r.1), "acceptance failures");
}
