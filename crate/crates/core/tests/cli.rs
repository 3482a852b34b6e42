use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chargeshare"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

#[test]
fn unknown_flag_prints_usage_and_exits_2() {
    let out = run(&["fig-beta", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(run(&["fig-nothing"]).status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["validate", "fig-wait-uav", "fig-wait-ev", "fig-coverage", "fig-beta", "fig-economics", "oracle"] {
        assert!(text.contains(sub), "help lists {sub}");
    }
}

#[test]
fn bad_override_is_a_usage_error() {
    assert_eq!(run(&["validate", "--set", "not_a_key=1"]).status.code(), Some(2));
    assert_eq!(run(&["validate", "--set", "c_slots"]).status.code(), Some(2));
}

#[test]
fn validate_passes_on_defaults() {
    let out = run(&["validate"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    assert!(lines.len() >= 10);
    assert!(lines.iter().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn validate_reports_unstable_queue_with_exit_1() {
    let out = run(&["validate", "--set", "mu_e=0.2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL params"));
}

#[test]
fn fig_beta_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for run_dir in ["a", "b"] {
        let out_dir = dir.path().join(run_dir);
        let out = run(&[
            "fig-beta",
            "--policy",
            "thinning",
            "--seed",
            "7",
            "--quick",
            "--realizations",
            "1",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(fs::read(out_dir.join("fig-beta.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs.remove(0)).unwrap();
    assert!(text.starts_with("policy,beta,"));
    assert!(text.lines().skip(1).all(|l| l.starts_with("thinning,")));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for jobs in ["1", "3"] {
        let out_dir = dir.path().join(jobs);
        let out = run(&["fig-wait-ev", "--quick", "--realizations", "1", "--jobs", jobs, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(fs::read(out_dir.join("fig-wait-ev.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn manifest_reproduces_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let out = run(&[
        "fig-wait-ev",
        "--quick",
        "--realizations",
        "1",
        "--seed",
        "11",
        "--set",
        "c_slots=3",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("fig-wait-ev.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "fig-wait-ev");
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["params"]["station"]["c_slots"], 3);
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outputs.contains(&"fig-wait-ev.csv"));
    for o in &outputs {
        assert!(first.join(o).exists(), "{o} listed and present");
    }

    // Replay the recorded command from inside the output directory.
    let command = manifest["command"].as_str().unwrap();
    let mut words: Vec<&str> = command.split_whitespace().skip(1).collect();
    words.extend(["--out", "replay"]);
    let out = run_in(&first, &words);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(first.join("fig-wait-ev.csv")).unwrap(), fs::read(first.join("replay/fig-wait-ev.csv")).unwrap());
}
