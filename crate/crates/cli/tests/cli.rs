use gaheights::boundary::ClemensReport;
use gaheights::census::{EquiReport, PoissonCheck};
use gaheights::catalog::ModelDescription;
use gaheights::{CountTable, DecayReport};
use gaheights_cli::{run, DensityOutput, FitOutput, ThetaOutput, ZetaOutput};
use serde::de::DeserializeOwned;

fn exec(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["gaheights".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn parsed<T: DeserializeOwned>(args: &[&str]) -> T {
    let (code, out, err) = exec(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    serde_json::from_str(&out).unwrap_or_else(|e| panic!("{args:?}: {e}\n{out}"))
}

#[test]
fn count_csv_row() {
    let (code, out, _) = exec(&["count", "--model", "E1", "--S", "inf", "--B", "10", "--format", "csv"]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("B,N,V,N/B/logpow,fit"));
    assert!(lines.next().unwrap().starts_with("10.0,21,"));
}

#[test]
fn theta_and_clemens_examples() {
    let t: ThetaOutput = parsed(&["theta", "--model", "E4", "--S", "inf"]);
    assert_eq!(t.report.b, 2);
    assert!((t.report.theta - 24.0 / std::f64::consts::PI.powi(2)).abs() < 1e-3);
    let c: ClemensReport = parsed(&["clemens", "--model", "E5", "--place", "real"]);
    assert_eq!(c.faces, vec![vec![1], vec![2], vec![1, 2]]);
}

#[test]
fn every_json_output_round_trips() {
    fn check<T: DeserializeOwned + serde::Serialize>(args: &[&str]) {
        let (code, out, err) = exec(args);
        assert_eq!(code, 0, "{args:?}: {err}");
        let v: T = serde_json::from_str(&out).unwrap();
        assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", out, "{args:?}");
    }
    check::<ZetaOutput>(&["zeta-local", "--place", "5", "--s", "1,2+1i"]);
    check::<DecayReport>(&["osc", "--place", "3", "--phi", "ball", "--grid", "1:4:1"]);
    check::<ClemensReport>(&["clemens", "--model", "E3"]);
    check::<DensityOutput>(&["density", "--model", "E2", "--place", "3", "--s", "1.5,2"]);
    check::<DensityOutput>(&["density", "--model", "E4", "--S", "inf,5", "--s", "1.5", "--truncation", "1000"]);
    check::<ThetaOutput>(&["theta", "--model", "E1", "--S", "inf,5", "--truncation", "1000"]);
    check::<CountTable>(&["count", "--model", "E5", "--grid", "1:3:0.5"]);
    check::<FitOutput>(&["fit", "--model", "E3", "--grid", "2:4:0.5"]);
    check::<PoissonCheck>(&["poisson", "--model", "E1", "--cutoff", "10"]);
    check::<EquiReport>(&["equi", "--model", "E3", "--B", "1000", "--samples", "1000"]);
    check::<ModelDescription>(&["model", "describe", "--model", "E6"]);
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let args = ["fit", "--model", "E4", "--grid", "2:4:0.5"];
    let base = exec(&args).1;
    for t in ["1", "3", "8"] {
        let mut a = args.to_vec();
        a.extend(["--threads", t]);
        assert_eq!(exec(&a).1, base);
    }
    let equi = ["equi", "--model", "E5", "--B", "2000", "--samples", "5000", "--seed", "7"];
    let first = exec(&equi).1;
    assert_eq!(exec(&[&equi[..], &["--threads", "2"]].concat()).1, first);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# counting run\ncommand = count\nmodel = E3\nS = inf\nB = 50\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let t: CountTable = parsed(&["--config", cfg]);
    assert_eq!(t.rows[0].n, 225);
    let t: CountTable = parsed(&["count", "--config", cfg, "--B", "100"]);
    assert_eq!(t.rows[0].n, 441);
}

#[test]
fn out_directory_gets_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out, _) = exec(&["fit", "--model", "E1", "--grid", "2:4:0.5", "--out", d]);
    assert_eq!(code, 0);
    assert!(out.contains("theta_hat"));
    for f in ["fit.json", "fit.csv", "fit.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(exec(&["count", "--model", "E9"]).0, 2);
    assert_eq!(exec(&["count", "--model", "E1", "--S", "5"]).0, 2);
    assert_eq!(exec(&["count", "--model", "E1", "--bogus"]).0, 2);
    assert_eq!(exec(&["count", "--model", "E1", "--B", "1e7", "--node-cap", "100"]).0, 3);
    assert_eq!(exec(&["density", "--model", "E2", "--place", "3", "--s", "0.5"]).0, 4);
    assert_eq!(exec(&["--config", "/nonexistent/file"]).0, 2);
    assert_eq!(exec(&["--help"]).0, 0);
}
