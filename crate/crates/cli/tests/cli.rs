use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const RULES: &str = "attr a. attr b. hypo h1. hypo h2.\n\
                     rule r1: IF a THEN h1 (0.3).\n\
                     rule r2: IF b THEN h2 (0.7).\n";

fn cfrefine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfrefine")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture { dir: TempDir::new().unwrap() };
        f.file("rb.txt", RULES);
        f.file("err.txt", "case e1: a=1 => h1=0.8\n");
        f.file("ref.txt", "case ok1: b=1 => h2=0.7\n");
        f
    }

    fn file(&self, name: &str, text: &str) -> String {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

#[test]
fn infer_prints_a_row_per_case() {
    let f = Fixture::new();
    f.file("cases.txt", "case c1: a=1 => h1=0.3\ncase c2: a=0.5, b=1 =>\n");
    let out = cfrefine(&["infer", &f.arg("rb.txt"), &f.arg("cases.txt")]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "case\th1\th2\nc1\t0.300000000\t0.00000000\nc2\t0.00000000\t0.700000000\n");

    // 0.5 * 0.3 falls under the cutoff unless thresholding is off
    let off = cfrefine(&["infer", &f.arg("rb.txt"), &f.arg("cases.txt"), "--no-threshold"]);
    assert!(stdout(&off).contains("c2\t0.150000000\t0.700000000"));
}

#[test]
fn diagnose_reports_knowledge_error() {
    let f = Fixture::new();
    let out = cfrefine(&["diagnose", &f.arg("rb.txt"), &f.arg("err.txt"), "--reference", &f.arg("ref.txt")]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("triple\tF S S\noutcome\tO5\naction\trevise_kb\n"), "{text}");
    assert!(text.contains("test1\tkb\tF"));
}

#[test]
fn diagnose_deadlock_exits_2() {
    let f = Fixture::new();
    f.file("bad.txt", "case e1: a=1 => h1=0.8\ncase e2: a=1 => h1=-0.8\n");
    let out = cfrefine(&["diagnose", &f.arg("rb.txt"), &f.arg("bad.txt"), "--max-epochs", "30"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("outcome\tO8"));
}

#[test]
fn revise_writes_rulebase_and_report() {
    let f = Fixture::new();
    let out = cfrefine(&[
        "revise",
        &f.arg("rb.txt"),
        &f.arg("err.txt"),
        "--reference",
        &f.arg("ref.txt"),
        "-o",
        &f.arg("out.txt"),
        "--report",
        &f.arg("report.txt"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let revised = fs::read_to_string(f.path("out.txt")).unwrap();
    let rb = cfrefine::parse_rulebase(&revised).unwrap();
    assert!((rb.rule("r1").unwrap().strength - 0.8).abs() <= 0.05);
    let report = fs::read_to_string(f.path("report.txt")).unwrap();
    assert!(report.starts_with("CHANGED\nr1\t0.300000000\t"));
    for section in ["DELETED", "DATA-DELETED", "SUGGEST"] {
        assert!(report.lines().any(|l| l == section));
    }
}

#[test]
fn revise_needs_preference_when_ambiguous() {
    let f = Fixture::new();
    f.file("over.txt", "case e1: b=1 => h2=0.4\n");
    let args = ["revise", &f.arg("rb.txt"), &f.arg("over.txt"), "-o", &f.arg("out.txt")];
    let out = cfrefine(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--prefer"));
    assert!(!Path::new(&f.path("out.txt")).exists());

    let out = cfrefine(&[&args[..], &["--prefer", "data", "--cases-output", &f.arg("cases.txt")]].concat());
    assert!(out.status.success());
    let cases = fs::read_to_string(f.path("cases.txt")).unwrap();
    assert!(cases.starts_with("case e1:"));
}

#[test]
fn train_prints_summary_and_dump() {
    let f = Fixture::new();
    let out = cfrefine(&["train", &f.arg("rb.txt"), &f.arg("err.txt"), "--clamp", "data", "-o", &f.arg("t.txt")]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("resolved\ttrue\nepochs\t22\n"), "{text}");
    assert!(text.contains("conn "));
    assert!(fs::read_to_string(f.path("t.txt")).unwrap().contains("rule r1"));
}

#[test]
fn ttest_reads_columns() {
    let f = Fixture::new();
    f.file("a.txt", "0 10 10 15 15\n15 25 25 25 30\n");
    f.file("b.txt", &"0\n".repeat(10));
    let out = cfrefine(&["ttest", &f.arg("a.txt"), &f.arg("b.txt")]);
    assert_eq!(stdout(&out), "t\t5.85010121\ndf\t9\nsignificant_0.05\ttrue\nsignificant_0.01\ttrue\n");
}

#[test]
fn experiment_is_deterministic() {
    let args = ["experiment", "--seed", "7", "--experiments", "3"];
    let a = cfrefine(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&cfrefine(&args)));
    let text = stdout(&a);
    assert!(text.starts_with("experiment\tbad_before\tbad_after\tacc_before\tacc_after\timprovement\n"));
    assert!(text.lines().any(|l| l.starts_with("Average\t")));
}

#[test]
fn parse_errors_exit_1_with_location() {
    let f = Fixture::new();
    f.file("broken.txt", "attr a.\nhypo h.\nrule r1: IF a THEN h 0.5.\n");
    let out = cfrefine(&["infer", &f.arg("broken.txt"), &f.arg("err.txt")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("3:22: syntax error"));
}
