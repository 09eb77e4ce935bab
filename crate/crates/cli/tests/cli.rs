use simlab_cli::compare::compare;
use simlab_cli::config::{Scenario, ScenarioConfig};
use simlab_cli::suite::{base_key, SuiteOutcome};
use simlab_cli::{output, presets};
use simlab_core::{InequalityReport, PaperEq, Relation};
use std::path::Path;
use std::process::Command;

const SMALL_OU: &str = r#"
name = "small_ou"
output_dir = "out/small_ou"

[model]
n = 1
beta = 0.0
basis = "dirichlet"
grid_factor = 2
eigenvalues = [-1.0]
r = [1.0]

[drift]
kind = "zero"
zeta_F = 0.0
zeta_R = -1.0

[sim]
dt = 0.001
horizon = 0.1
seed = 3

[sampler]
kind = "gaussian"
count = 5000

[outputs]
trajectory = false
"#;

fn simlab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_simlab"))
        .args(args)
        .output()
        .expect("simlab runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(key: &str, lhs: f64, rhs: f64) -> InequalityReport {
    InequalityReport::new(
        key,
        PaperEq::Poincare,
        (lhs, 0.0),
        (rhs, 0.0),
        Relation::Le,
        3.0,
        0.0,
        1,
    )
}

#[test]
fn empty_check_list_exits_zero_with_empty_report() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL_OU.replace(
        "output_dir = \"out/small_ou\"",
        "output_dir = \"out/small_ou\"\nchecks = []",
    );
    let cfg = write(tmp.path(), "s.toml", &text);
    let out = tmp.path().join("o");
    let (code, _, err) = simlab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(output::read_reports(&out.join("report.json"))
        .unwrap()
        .is_empty());
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
    assert!(
        summary.starts_with("check,paper_eq,scenario,lhs,lhs_se,rhs,rhs_se,margin,verdict,seed")
    );
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.toml", "name = ".to_string()),
        ("unknown.toml", format!("{SMALL_OU}\nbogus_key = 1\n")),
        (
            "not_dissipative.toml",
            SMALL_OU.replace("eigenvalues = [-1.0]", "eigenvalues = [1.0]"),
        ),
        (
            "bad_check.toml",
            format!("{SMALL_OU}\n[[checks]]\nkind = \"supercontractivity\"\nlambda = [-1.0]\n"),
        ),
    ];
    for (name, text) in cases {
        let cfg = write(tmp.path(), name, &text);
        let (code, _, err) =
            simlab(&["run", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
        assert_eq!(code, 2, "{name}: {err}");
        assert!(err.starts_with("error:"), "{name}: {err}");
    }
    assert_eq!(simlab(&["run", "/nonexistent/file.toml"]).0, 2);
    assert_eq!(simlab(&["run", "--preset", "nope"]).0, 2);
    assert_eq!(simlab(&["presets", "nope"]).0, 2);
    assert_eq!(simlab(&["ll-test", "--eps-grid", "-0.1"]).0, 2);
}

#[test]
fn unexpected_pass_of_expected_failure_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL_OU.replace(
        "output_dir = \"out/small_ou\"",
        "output_dir = \"out/small_ou\"\nexpected_failures = [\"poincare\"]",
    ) + "\n[[checks]]\nkind = \"poincare\"\n";
    let cfg = write(tmp.path(), "x.toml", &text);
    let out = tmp.path().join("o");
    let (code, stdout, err) = simlab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1, "{err}");
    assert!(stdout.contains("XPASS"));
    let reports = output::read_reports(&out.join("report.json")).unwrap();
    assert!(reports.iter().all(|r| r.expected_failure));
}

#[test]
fn exit_code_reports_degraded_runs() {
    let mut outcome = SuiteOutcome::default();
    outcome.reports.push(report("a[x=1]", 1.0, 2.0));
    assert_eq!(outcome.exit_code(), 0);
    outcome
        .reports
        .push(report("b[x=1]", 1.0, 2.0).degrade("nothing resolvable"));
    assert_eq!(outcome.exit_code(), 3);
    outcome.reports.push(report("c[x=1]", 3.0, 2.0));
    assert_eq!(outcome.exit_code(), 1);
    let mut xfail = report("d[x=1]", 3.0, 2.0);
    xfail.expected_failure = true;
    let only_xfail = SuiteOutcome {
        reports: vec![xfail],
        ..Default::default()
    };
    assert_eq!(only_xfail.exit_code(), 0);
}

#[test]
fn base_key_strips_parameters() {
    assert_eq!(base_key("fernique[norm=r;lambda=0.05]"), "fernique");
    assert_eq!(
        base_key("ultrabounded_a[t=1;lambda=0.25]"),
        "ultrabounded_a"
    );
    assert_eq!(base_key("plain"), "plain");
}

#[test]
fn compare_identical_reports_is_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let reports = vec![report("a[x=1]", 1.0, 2.0), report("b[x=2]", 3.0, 2.0)];
    let path = tmp.path().join("r.json");
    output::write_reports(&path, &reports).unwrap();
    let doc = compare(&reports, &reports).unwrap();
    assert!(doc.entries.is_empty());
    assert_eq!(doc.flips, 0);
    let p = path.to_str().unwrap();
    let (code, stdout, _) = simlab(&["compare", p, p]);
    assert_eq!(code, 0);
    let parsed: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(parsed["entries"].as_array().unwrap().len(), 0);
}

#[test]
fn compare_flags_flips_and_key_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let a = vec![report("a[x=1]", 1.0, 2.0), report("b[x=2]", 1.0, 2.0)];
    let b = vec![report("a[x=1]", 1.5, 2.0), report("b[x=2]", 3.0, 2.0)];
    let doc = compare(&a, &b).unwrap();
    assert_eq!(doc.entries.len(), 2);
    assert_eq!(doc.flips, 1);
    let flipped = doc.entries.iter().find(|e| e.flipped).unwrap();
    assert_eq!(flipped.check, "b[x=2]");
    assert_eq!(flipped.delta, -2.0);

    let pa = tmp.path().join("a.json");
    let pb = tmp.path().join("b.json");
    output::write_reports(&pa, &a).unwrap();
    output::write_reports(&pb, &b).unwrap();
    let diff = tmp.path().join("diff.json");
    let (code, _, _) = simlab(&[
        "compare",
        pa.to_str().unwrap(),
        pb.to_str().unwrap(),
        "--out",
        diff.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(diff.exists());

    let c = vec![report("a[x=1]", 1.0, 2.0)];
    assert!(compare(&a, &c).is_err());
    let pc = tmp.path().join("c.json");
    output::write_reports(&pc, &c).unwrap();
    assert_eq!(
        simlab(&["compare", pa.to_str().unwrap(), pc.to_str().unwrap()]).0,
        2
    );
    let dup = vec![report("a[x=1]", 1.0, 2.0), report("a[x=1]", 1.0, 2.0)];
    assert!(compare(&dup, &dup).is_err());
}

#[test]
fn presets_round_trip_through_toml() {
    for (name, _) in presets::PRESETS {
        let cfg = presets::preset(name).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg, "{name}");
        Scenario::from_config(back).unwrap_or_else(|e| panic!("{name}: {e}"));
        let (code, stdout, _) = simlab(&["presets", name]);
        assert_eq!(code, 0);
        assert_eq!(stdout, text);
    }
    let (code, stdout, _) = simlab(&["presets"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), presets::PRESETS.len());
}

#[test]
fn repeated_checks_get_distinct_keys() {
    let text =
        format!("{SMALL_OU}\n[[checks]]\nkind = \"poincare\"\n\n[[checks]]\nkind = \"poincare\"\n");
    let scenario = Scenario::from_toml(&text).unwrap();
    let outcome = simlab_cli::run_scenario(&scenario).unwrap();
    let mut keys: Vec<&str> = outcome.reports.iter().map(|r| r.check.as_str()).collect();
    let n = keys.len();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), n);
    assert!(compare(&outcome.reports, &outcome.reports)
        .unwrap()
        .entries
        .is_empty());
}

#[test]
fn summary_rows_follow_reports() {
    let reports = vec![report("a[x=1]", 1.0, 2.0), report("b[x=2]", 3.0, 2.0)];
    let mut buf = Vec::new();
    output::write_summary(&mut buf, &reports).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("a[x=1],poincare,"));
    assert!(rows[2].ends_with(",fail,1"));
    assert_eq!(
        output::file_stem("fernique[norm=r;lambda=0.05]"),
        "fernique_norm_r_lambda_0.05"
    );
}
