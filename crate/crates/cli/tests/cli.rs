use std::path::Path;
use std::process::{Command, Output};

fn nbcc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbcc")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nbcc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_validate_encode_decode() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("code.txt");
    ok(&["build", "--m-s", "5", "--p", "4", "--seed", "3", "-o", s(&code)]);
    ok(&["validate", s(&code), "--n", "20"]);

    let info = dir.path().join("info.txt");
    let mut text = String::from("4 20\n");
    for i in 0..20 {
        text.push_str(&format!("{}\n", i * 7 % 16));
    }
    std::fs::write(&info, &text).unwrap();
    let cw = dir.path().join("cw.txt");
    let out = ok(&["encode", "--code", s(&code), "--info", s(&info), "-o", s(&cw)]);
    assert!(out.contains("rate 2/5"), "{out}");

    let dec = dir.path().join("dec.txt");
    ok(&["decode", "--code", s(&code), "--codeword", s(&cw), "--ebn0", "8", "-o", s(&dec)]);
    assert_eq!(std::fs::read_to_string(&dec).unwrap(), text);
    ok(&["decode", "--code", s(&code), "--codeword", s(&cw), "--ebn0", "8", "--window", "2", "-o", s(&dec)]);
    assert_eq!(std::fs::read_to_string(&dec).unwrap(), text);
}

#[test]
fn malformed_code_file_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("bad.txt");
    std::fs::write(&code, "4 5 2 4 1 2 6 19 0\n1 2\n").unwrap();
    let out = nbcc(&["validate", s(&code)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn simulate_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ber.csv");
    let args = [
        "simulate", "--m-s", "5", "--p", "4", "--n", "50", "--ebn0", "1,4", "--min-frame-errors", "3",
        "--max-frames", "40", "--max-info-bits", "100000", "-o", s(&csv),
    ];
    let stdout = ok(&args);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(stdout, text);
    assert!(text.starts_with("ebn0_db,frames,bit_errors,frame_errors,ber,fer,mean_iters\n"));
    assert_eq!(text.lines().count(), 3);
    assert!(csv.with_extension("json").exists());

    // worker count does not change results
    let one = Command::new(env!("CARGO_BIN_EXE_nbcc")).args(args).env("NBCC_WORKERS", "1").output().unwrap();
    assert_eq!(String::from_utf8(one.stdout).unwrap(), text);
}

#[test]
fn instances_need_two_seeds() {
    let out = nbcc(&["instances", "--m-s", "5", "--p", "4", "--n", "20", "--seeds", "1"]);
    assert!(!out.status.success());
}

#[test]
fn threshold_and_shannon() {
    let t = ok(&["threshold", "--ensemble", "bc", "--j", "3", "--k", "6", "--p", "1,2"]);
    let lines: Vec<&str> = t.lines().collect();
    assert_eq!(lines[0], "ensemble,J,K,p,L,threshold");
    assert!(lines[1].starts_with("BC,3,6,1,0,0.4294"));
    assert!(lines[2].starts_with("BC,3,6,2,0,0.4234"));
    let sh = ok(&["shannon", "--rate", "1/2,3/4"]);
    assert_eq!(sh, "rate,ebn0_db\n1/2,0.187\n3/4,1.626\n");
}
