use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spin2_ramsey::fit::harmonic_spectrum;
use spin2_ramsey::io::read_scan;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spin2-ramsey"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn table(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn json(path: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_error_line(o: &Output, code: i32, kind: &str) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("error[")).collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error[{kind}]: ")), "{err}");
}

#[test]
fn help_and_version_exit_zero() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("kHz"));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn bad_usage_exits_one() {
    assert_error_line(&run(&["no-such-command"]), 1, "usage");
    assert_error_line(&run(&[]), 1, "usage");
    assert_error_line(
        &run(&[
            "simulate-fringe",
            "--f-start-khz",
            "200",
            "--f-stop-khz",
            "190",
        ]),
        1,
        "usage",
    );
    assert_error_line(&run(&["simulate-fringe", "--initial", "+3"]), 1, "usage");
    assert_error_line(&run(&["simulate-fringe", "--noise", "0.05"]), 1, "usage");
}

#[test]
fn rabi_single_row_at_zero() {
    let o = run(&["simulate-rabi", "--t-stop-us", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "t_us,p_p2,p_p1,p_0,p_m1,p_m2\n0.0,1.0,0.0,0.0,0.0,0.0\n"
    );
}

#[test]
fn rabi_first_full_transfer_near_57_us() {
    let o = run(&["simulate-rabi", "--t-step-us", "0.1"]);
    let rows = table(&stdout(&o));
    let first = rows
        .iter()
        .filter(|r| r[0] < 100.0)
        .max_by(|a, b| a[5].total_cmp(&b[5]))
        .unwrap();
    assert!(first[5] > 0.9999);
    assert!((first[0] - 56.82).abs() < 0.1, "{}", first[0]);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let o = run(&["simulate-rabi", "--out", "/nonexistent-dir/x.csv"]);
    assert_error_line(&o, 1, "io");
}

#[test]
fn phase_scan_from_plus_one_has_four_fringes() {
    let o = run(&[
        "simulate-fringe",
        "--vs-phase",
        "--initial=+1",
        "--phase-points",
        "64",
    ]);
    let rows = table(&stdout(&o));
    let phases: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let m0: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    assert_eq!(harmonic_spectrum(&phases, &m0).unwrap().dominant, 4);
}

fn write_noisy_scan(dir: &TempDir, name: &str, f0: &str, t: &str, seed: &str) -> String {
    let path = p(dir, name);
    let o = run(&[
        "simulate-fringe",
        "--f0-khz",
        f0,
        "--t-us",
        t,
        "--noise",
        "0.05",
        "--seed",
        seed,
        "--out",
        &path,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    path
}

#[test]
fn fit_recovers_noiseless_generator() {
    let dir = TempDir::new().unwrap();
    let scan = p(&dir, "scan.csv");
    assert!(run(&[
        "simulate-fringe",
        "--f0-khz",
        "192",
        "--t-us",
        "574",
        "--phi",
        "-0.4",
        "--out",
        &scan
    ])
    .status
    .success());
    let report = p(&dir, "fit.json");
    let o = run(&[
        "fit", &scan, "--f0-khz", "194", "--t-us", "600", "--out", &report,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&report);
    assert!((v["fit"]["params"]["f0_khz"].as_f64().unwrap() - 192.0).abs() < 1e-5);
    assert!((v["fit"]["params"]["t_us"].as_f64().unwrap() - 574.0).abs() < 1e-4);
    assert!((v["fit"]["params"]["phi"].as_f64().unwrap() + 0.4).abs() < 1e-5);
    assert_eq!(v["scan"]["grid_step_khz"].as_f64(), Some(0.25));
    assert_eq!(v["fit"]["converged"], true);

    // Overlay beside the report, same frequencies and header as the scan.
    let overlay = fs::read_to_string(dir.path().join("fit.overlay.csv")).unwrap();
    let original = fs::read_to_string(&scan).unwrap();
    assert_eq!(overlay.lines().next(), original.lines().next());
    assert_eq!(overlay.lines().count(), original.lines().count());
}

#[test]
fn fit_report_keys_in_stable_order() {
    let dir = TempDir::new().unwrap();
    let scan = write_noisy_scan(&dir, "s.csv", "195", "290", "1");
    let report = p(&dir, "fit.json");
    run(&[
        "fit", &scan, "--f0-khz", "195", "--t-us", "290", "--out", &report,
    ]);
    let text = fs::read_to_string(&report).unwrap();
    let at = |k: &str| text.find(&format!("\"{k}\":")).unwrap();
    assert!(at("mode") < at("scan") && at("scan") < at("fit") && at("fit") < at("t_check"));
    assert!(at("f0_khz") < at("t_us") && at("t_us") < at("delta_khz"));
}

#[test]
fn nominal_t_discrepancy_is_flagged() {
    let dir = TempDir::new().unwrap();
    let scan = write_noisy_scan(&dir, "s.csv", "207", "143", "11");
    let report = p(&dir, "fit.json");
    let o = run(&[
        "fit",
        &scan,
        "--f0-khz",
        "207",
        "--t-us",
        "152",
        "--nominal-t-us",
        "152",
        "--out",
        &report,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&report);
    assert_eq!(v["t_check"]["discrepancy"], true);
    let t = v["t_check"]["fitted_t_us"].as_f64().unwrap();
    assert!((t - 143.0).abs() / 143.0 < 0.03, "{t}");

    let o = run(&[
        "fit",
        &scan,
        "--f0-khz",
        "207",
        "--t-us",
        "143",
        "--nominal-t-us",
        "143",
        "--out",
        &report,
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&report)["t_check"]["discrepancy"], false);
}

#[test]
fn under_determined_fit_is_invalid_argument() {
    let dir = TempDir::new().unwrap();
    let scan = p(&dir, "s.csv");
    assert!(run(&[
        "simulate-fringe",
        "--f-start-khz",
        "194",
        "--f-stop-khz",
        "194.5",
        "--out",
        &scan
    ])
    .status
    .success());
    let o = run(&[
        "fit",
        &scan,
        "--f0-khz",
        "195",
        "--t-us",
        "290",
        "--free-delta",
    ]);
    assert_error_line(&o, 1, "invalid-argument");
}

#[test]
fn malformed_scan_reports_line() {
    let dir = TempDir::new().unwrap();
    let scan = p(&dir, "bad.csv");
    fs::write(
        &scan,
        "f_khz,p_p2,p_p1,p_0,p_m1,p_m2\n1,1,0,0,0,0\n2,1,0,zero,0,0\n",
    )
    .unwrap();
    let o = run(&["fit", &scan, "--f0-khz", "195", "--t-us", "290"]);
    assert_error_line(&o, 1, "parse");
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn ill_conditioned_fit_exits_two_with_report() {
    let dir = TempDir::new().unwrap();
    let scan = p(&dir, "flat.csv");
    let mut text = String::from("f_khz,p_p2,p_p1,p_0,p_m1,p_m2\n");
    for i in 0..40 {
        text.push_str(&format!("{},0.2,0.2,0.2,0.2,0.2\n", 180.0 + i as f64 * 0.5));
    }
    fs::write(&scan, text).unwrap();
    let report = p(&dir, "fit.json");
    let o = run(&[
        "fit", &scan, "--f0-khz", "195", "--t-us", "290", "--out", &report,
    ]);
    assert_error_line(&o, 2, "non-converged");
    assert_eq!(json(&report)["fit"]["ill_conditioned"], true);
}

#[test]
fn sensitivity_pipeline() {
    let dir = TempDir::new().unwrap();
    let scan = write_noisy_scan(&dir, "s.csv", "195", "290", "5");
    assert_error_line(
        &run(&["sensitivity", &scan, "--f0-khz", "195", "--t-us", "290"]),
        1,
        "usage",
    );

    let out = p(&dir, "sens.json");
    let o = run(&[
        "sensitivity",
        &scan,
        "--f0-khz",
        "197",
        "--t-us",
        "300",
        "--window",
        "3",
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let avg = json(&out)["sensitivity"]["average_phase"].as_f64().unwrap();
    assert!((0.3..=1.2).contains(&avg), "{avg}");

    assert_error_line(
        &run(&[
            "sensitivity",
            &scan,
            "--f0-khz",
            "195",
            "--t-us",
            "290",
            "--window",
            "2",
        ]),
        1,
        "invalid-argument",
    );
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = p(dir, name);
    fs::write(&path, text).unwrap();
    path
}

fn populations(out: &Output) -> Vec<f64> {
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    v["populations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn sequence_two_quarter_turns() {
    let dir = TempDir::new().unwrap();
    let seq = write(&dir, "s.seq", "model f0=195\npulse angle=pi/2 f=195 phase=0\ndelay T=0 phi=0\npulse angle=pi/2 f=195 phase=0\n");
    let o = run(&["sequence", &seq]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pops = populations(&o);
    for (got, want) in pops.iter().zip([0.0, 0.0, 0.0, 0.0, 1.0]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn sequence_echo_ignores_offsets() {
    let dir = TempDir::new().unwrap();
    let seq = write(
        &dir,
        "echo.seq",
        "model f0=195 delta=25\ninitial state=+2\npulse angle=pi/2 f=195\ndelay T=145 phi=0.14\npulse angle=pi f=195\ndelay T=145\npulse angle=pi/2 f=195\n",
    );
    let base = populations(&run(&["sequence", &seq]));
    for off in ["-2", "-0.7", "0.3", "2"] {
        let o = run(&["sequence", &seq, "--offset-khz", off]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        for (a, b) in populations(&o).iter().zip(&base) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn long_delay_ensemble_spreads_population() {
    let dir = TempDir::new().unwrap();
    let seq = write(
        &dir,
        "r.seq",
        "model f0=195\npulse angle=pi/2 f=195\ndelay T=5000\npulse angle=pi/2 f=195\n",
    );
    let args = [
        "sequence",
        seq.as_str(),
        "--gradient-khz",
        "2",
        "--samples",
        "400",
        "--seed",
        "3",
    ];
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pops = populations(&o);
    assert!(pops.iter().all(|p| *p > 0.03), "{pops:?}");
    assert_eq!(run(&args).stdout, o.stdout);

    assert_error_line(&run(&["sequence", &seq, "--gradient-khz", "2"]), 1, "usage");
}

#[test]
fn malformed_sequence_reports_step() {
    let dir = TempDir::new().unwrap();
    let seq = write(
        &dir,
        "bad.seq",
        "model f0=195\npulse angle=pi/2\ndelay T=oops\n",
    );
    let o = run(&["sequence", &seq]);
    assert_error_line(&o, 1, "sequence-parse");
    assert!(stderr(&o).contains("step 2"));
}

#[test]
fn config_file_drives_a_run() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "rabi.csv");
    let cfg = write(
        &dir,
        "run.toml",
        &format!("mode = \"simulate-rabi\"\nout = {out:?}\n[simulate-rabi]\nt-stop-us = 10.0\nt-step-us = 5.0\n"),
    );
    let o = run(&["--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 4);

    // Command-line flags override the file.
    let o = run(&["--config", &cfg, "simulate-rabi", "--t-stop-us", "20"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 6);

    let bad = write(
        &dir,
        "bad.toml",
        "mode = \"simulate-rabi\"\n[simulate-rabi]\nt-end = 3\n",
    );
    assert_error_line(&run(&["--config", &bad]), 1, "parse");
}

#[test]
fn simulated_scan_reads_back() {
    let dir = TempDir::new().unwrap();
    let scan = p(&dir, "s.csv");
    assert!(
        run(&["simulate-fringe", "--stddev", "0.02", "--out", &scan])
            .status
            .success()
    );
    let parsed = read_scan(fs::File::open(Path::new(&scan)).unwrap()).unwrap();
    assert_eq!(parsed.len(), 141);
    assert!(parsed.has_stddev());
}
