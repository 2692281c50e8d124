use std::fs;
use std::path::Path;

use gridgame::cli::{parse_args, run, CliConfig, Parsed, Plan, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
use gridgame::error::Error;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["gridgame"];
    argv.extend(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn resolve(args: &[&str]) -> Result<CliConfig, String> {
    let mut argv = vec!["gridgame"];
    argv.extend(args);
    match parse_args(argv)? {
        Parsed::Run(c) => Ok(c),
        Parsed::Info(text) => Err(text),
    }
}

fn small(out: &Path) -> Vec<String> {
    [
        "--l",
        "12",
        "--rounds",
        "60",
        "--window",
        "10",
        "--replicates",
        "3",
        "--seed",
        "7",
        "--out",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([out.display().to_string()])
    .collect()
}

fn with(cmd: &str, extra: &[&str], out: &Path) -> Vec<String> {
    let mut args = vec![cmd.to_string()];
    args.extend(small(out));
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn invoke_owned(args: &[String]) -> (i32, String, String) {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    invoke(&refs)
}

#[test]
fn empty_argv_prints_usage_and_fails() {
    let (code, out, err) = invoke(&[]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
    assert!(err.contains("Usage"));
}

#[test]
fn help_succeeds() {
    let (code, out, _) = invoke(&["--help"]);
    assert_eq!(code, EXIT_OK);
    for name in [
        "simulate",
        "sweep-b",
        "invade",
        "cluster",
        "sweep-rho0",
        "sweep-n",
        "compare-rules",
        "meanfield",
        "fit",
    ] {
        assert!(out.contains(name), "{name} missing from help");
    }
}

#[test]
fn unknown_command_and_flag_are_usage_errors() {
    assert_eq!(invoke(&["bogus"]).0, EXIT_USAGE);
    assert_eq!(invoke(&["simulate", "--temperature", "3"]).0, EXIT_USAGE);
    assert_eq!(invoke(&["simulate", "--b"]).0, EXIT_USAGE);
}

#[test]
fn range_error_cites_interval() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let (code, _, err) = invoke(&["simulate", "--b", "2.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("(1, 2]"), "{err}");
    assert!(!out.exists(), "validation must precede any output");
}

#[test]
fn file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "b=1.10\nl=20\n").unwrap();
    let c = resolve(&["simulate", "--config", cfg.to_str().unwrap(), "--b", "1.20"]).unwrap();
    assert_eq!(c.real("b").unwrap(), 1.20);
    assert_eq!(c.count("l").unwrap(), 20);
    let c = resolve(&["simulate", "--config", cfg.to_str().unwrap()]).unwrap();
    assert_eq!(c.real("b").unwrap(), 1.10);
}

#[test]
fn config_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let dup = dir.path().join("dup.cfg");
    fs::write(&dup, "b=1.1\nb=1.2\n").unwrap();
    let err = resolve(&["simulate", "--config", dup.to_str().unwrap()]).unwrap_err();
    assert!(err.contains("duplicate key `b`"), "{err}");

    let unknown = dir.path().join("unknown.cfg");
    fs::write(&unknown, "temperature=3\n").unwrap();
    let err = resolve(&["simulate", "--config", unknown.to_str().unwrap()]).unwrap_err();
    assert!(err.contains("unknown config key `temperature`"), "{err}");

    let missing = dir.path().join("absent.cfg");
    let err = resolve(&["simulate", "--config", missing.to_str().unwrap()]).unwrap_err();
    assert!(err.contains("does not exist"), "{err}");

    let typed = dir.path().join("typed.cfg");
    fs::write(&typed, "replicates=many\n").unwrap();
    let c = resolve(&["simulate", "--config", typed.to_str().unwrap()]).unwrap();
    assert!(matches!(
        Plan::from_config(&c),
        Err(Error::TypeError { ref key, .. }) if key == "replicates"
    ));

    let ranged = dir.path().join("ranged.cfg");
    fs::write(&ranged, "b=2.5\n").unwrap();
    let c = resolve(&["simulate", "--config", ranged.to_str().unwrap()]).unwrap();
    match Plan::from_config(&c).unwrap_err() {
        Error::RangeError { key, range, .. } => assert_eq!((key.as_str(), range), ("b", "(1, 2]")),
        other => panic!("unexpected {other:?}"),
    }

    let other = dir.path().join("other.cfg");
    fs::write(&other, "command=meanfield\n").unwrap();
    assert!(resolve(&["simulate", "--config", other.to_str().unwrap()]).is_err());
}

#[test]
fn simulate_writes_series_snapshots_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let (code, stdout, err) = invoke_owned(&with("simulate", &["--snapshots", "0,20,60"], &out));
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(stdout.contains("rho_mean="));
    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    let lines: Vec<&str> = series.lines().collect();
    assert_eq!(lines[0], "t,rho");
    assert_eq!(lines.len(), 62);
    assert!(series.ends_with('\n') && !series.contains('\r'));
    for round in ["0000", "0020", "0060"] {
        let pgm = fs::read_to_string(out.join(format!("snapshot_t{round}.pgm"))).unwrap();
        assert!(pgm.starts_with("P2\n12 12\n255\n"));
    }
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("command=simulate\n"));
    assert!(manifest.contains("seed=7\n"));
}

#[test]
fn entropy_seed_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let c = resolve(&["simulate", "--out", out.to_str().unwrap()]).unwrap();
    let seed = c.seed().unwrap();
    assert!(c.manifest().contains(&format!("seed={seed}\n")));
}

fn directory_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.txt")
        .map(|e| {
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn manifest_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let (code, _, err) = invoke(&[
        "cluster",
        "--l",
        "16",
        "--rounds",
        "40",
        "--window",
        "10",
        "--replicates",
        "2",
        "--snapshots",
        "0,40",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let manifest = first.join("manifest.txt");
    let (code, _, err) = invoke(&[
        "cluster",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let a = directory_contents(&first);
    assert!(a.len() >= 4);
    assert_eq!(a, directory_contents(&second));
}

#[test]
fn sweep_b_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let (code, _, err) = invoke_owned(&with(
        "sweep-b",
        &["--b-start", "1.02", "--b-end", "1.40", "--b-step", "0.04"],
        &out,
    ));
    assert_eq!(code, EXIT_OK, "{err}");
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("b,rho_mean,rho_sd,U_C,U_D\n"));
    assert_eq!(sweep.lines().count(), 11);

    let fit_dir = dir.path().join("fit");
    let (code, stdout, err) = invoke(&[
        "fit",
        "--input",
        out.join("sweep.csv").to_str().unwrap(),
        "--starts",
        "5",
        "--seed",
        "1",
        "--out",
        fit_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(stdout.contains("family,parameters,rmse,R"));
    let report = fs::read_to_string(fit_dir.join("fit.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 4);
    let families: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    for f in ["power-law", "quadratic", "trigonometric"] {
        assert!(families.contains(&f));
    }
    let rmse: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(rmse.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn fit_with_missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = invoke(&[
        "fit",
        "--input",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("does not exist"));
}

#[test]
fn malformed_fit_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "b,rho_mean\n1.1,abc\n").unwrap();
    let (code, _, err) = invoke(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_RUNTIME, "{err}");
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let (code, _, _) = invoke(&["meanfield", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code, EXIT_RUNTIME);
}

#[test]
fn meanfield_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mf");
    let (code, _, err) = invoke(&[
        "meanfield",
        "--horizon",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let text = fs::read_to_string(out.join("meanfield.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,rho");
    assert_eq!(lines[1], "0,0.5");
    assert_eq!(lines.len(), 102);
}

#[test]
fn remaining_commands_produce_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str], &str, &str); 4] = [
        (
            "invade",
            &["--snapshots", "60"],
            "invasion.csv",
            "fraction,block",
        ),
        ("sweep-rho0", &[], "rho0.csv", "rho0,rho_mean,rho_sd"),
        (
            "compare-rules",
            &[],
            "rules.csv",
            "rule,rho_mean,rho_sd,rho_se",
        ),
        (
            "sweep-n",
            &["--sides", "5,8"],
            "population.csv",
            "L,N,rho_mean,rho_sd",
        ),
    ];
    for (cmd, extra, file, header) in cases {
        let out = dir.path().join(cmd);
        let mut args = with(cmd, extra, &out);
        if cmd == "sweep-n" {
            // sweep-n takes sides instead of a single lattice size.
            let at = args.iter().position(|a| a == "--l").unwrap();
            args.drain(at..at + 2);
        }
        let (code, _, err) = invoke_owned(&args);
        assert_eq!(code, EXIT_OK, "{cmd}: {err}");
        let text = fs::read_to_string(out.join(file)).unwrap();
        assert!(text.starts_with(header), "{cmd}: {text}");
    }
    let rules = fs::read_to_string(dir.path().join("compare-rules/rules.csv")).unwrap();
    let names: Vec<&str> = rules
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(names, ["mc", "ui", "rd", "fermi"]);
}

#[test]
fn outputs_stay_inside_out_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("only");
    let (code, stdout, _) = invoke_owned(&with("simulate", &["--snapshots", "0"], &out));
    assert_eq!(code, EXIT_OK);
    for line in stdout.lines().filter_map(|l| l.strip_prefix("wrote ")) {
        assert!(Path::new(line).starts_with(&out), "{line}");
    }
    let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
}
