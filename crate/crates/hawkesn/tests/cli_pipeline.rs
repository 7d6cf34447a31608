//! End-to-end checks of the command-line pipeline: determinism under seeds,
//! pipeline closure (every output re-ingests downstream), exit codes, and
//! the documented interchange formats.

use std::path::{Path, PathBuf};
use std::process::Command;

use hawkesn::cli::run_from;

fn run_ok(args: &[&str]) {
    let code = run_from(args.iter().map(|s| s.to_string()));
    assert_eq!(code, 0, "command failed: {args:?}");
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hawkesn-cli-{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn manifest_without_run_fields(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(path).unwrap()).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("created_unix_secs");
    obj.get_mut("config").and_then(|c| c.as_object_mut()).map(|c| c.remove("out_dir"));
    v
}

#[test]
fn simulate_is_byte_identical_under_a_seed() {
    let dir_a = tmp("sim-a");
    let dir_b = tmp("sim-b");
    for dir in [&dir_a, &dir_b] {
        run_ok(&[
            "hawkesn", "simulate",
            "--family", "exp",
            "--beta", "2.5",
            "--gamma", "0.5",
            "--population", "200",
            "--runs", "3",
            "--seed", "7",
            "--out-dir", dir.to_str().unwrap(),
        ]);
    }
    let a = std::fs::read(dir_a.join("realizations.csv")).unwrap();
    let b = std::fs::read(dir_b.join("realizations.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    // manifests agree up to the timestamp and output location
    assert_eq!(
        manifest_without_run_fields(&dir_a.join("manifest.json")),
        manifest_without_run_fields(&dir_b.join("manifest.json"))
    );

    // a different seed changes the data
    let dir_c = tmp("sim-c");
    run_ok(&[
        "hawkesn", "simulate",
        "--family", "exp",
        "--beta", "2.5",
        "--gamma", "0.5",
        "--population", "200",
        "--runs", "3",
        "--seed", "8",
        "--out-dir", dir_c.to_str().unwrap(),
    ]);
    let c = std::fs::read(dir_c.join("realizations.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn simulate_output_reloads_as_realizations_and_cascades() {
    let dir = tmp("sim-reload");
    run_ok(&[
        "hawkesn", "simulate",
        "--family", "powerlaw",
        "--beta", "2.0",
        "--theta", "1.2",
        "--c", "2.0",
        "--population", "60",
        "--runs", "2",
        "--seed", "3",
        "--marked",
        "--out-dir", dir.to_str().unwrap(),
    ]);
    let path = dir.join("realizations.csv");
    let reals = hawkesn::cascades::load_realizations(&path).unwrap();
    assert_eq!(reals.len(), 2);
    assert!(reals.iter().any(|(_, r)| r.infections().iter().any(|e| e.mark > 1.0)));
    // the same file doubles as a plain cascade CSV
    let cascades = hawkesn::cascades::load_cascades(&path).unwrap();
    assert_eq!(cascades.len(), 2);
    assert_eq!(cascades[0].len(), reals[0].1.len());
}

#[test]
fn convert_prints_the_documented_json() {
    let bin = env!("CARGO_BIN_EXE_hawkesn");
    let out = Command::new(bin)
        .args(["convert", "--family", "exp", "--kappa", "2", "--theta", "1.5", "--to", "sir"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), r#"{"beta":3.0,"gamma":1.5}"#);

    // inverse direction recovers the kernel
    let out = Command::new(bin)
        .args(["convert", "--family", "exp", "--beta", "3", "--gamma", "1.5", "--to", "kernel"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["family"], "exp");
    assert_eq!(v["kappa"], 2.0);
    assert_eq!(v["theta"], 1.5);

    // unknown flags: usage text, exit 1
    let out = Command::new(bin).args(["convert", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_on_an_empty_csv_exits_one() {
    let dir = tmp("fit-empty");
    let empty = dir.join("empty.csv");
    std::fs::write(&empty, "cascade_id,time,mark\n").unwrap();
    let code = run_from([
        "hawkesn".to_string(),
        "fit".to_string(),
        "--cascades".to_string(),
        empty.to_str().unwrap().to_string(),
        "--out-dir".to_string(),
        dir.join("out").to_str().unwrap().to_string(),
    ]);
    assert_eq!(code, 1);
}

/// simulate -> fit (two models) -> gof -> holdout -> predict -> size-dist,
/// every stage consuming the previous stage's files.
#[test]
fn full_pipeline_closure() {
    let dir = tmp("pipeline");
    run_ok(&[
        "hawkesn", "simulate",
        "--family", "exp",
        "--beta", "2.5",
        "--gamma", "0.5",
        "--population", "80",
        "--runs", "40",
        "--seed", "21",
        "--out-dir", dir.to_str().unwrap(),
    ]);
    let cascades = dir.join("realizations.csv");

    let fit_exp = dir.join("fit_exp");
    run_ok(&[
        "hawkesn", "fit",
        "--cascades", cascades.to_str().unwrap(),
        "--family", "exp",
        "--observe-fraction", "0.5",
        "--restarts", "3",
        "--seed", "1",
        "--out-dir", fit_exp.to_str().unwrap(),
    ]);
    let fit_pl = dir.join("fit_pl");
    run_ok(&[
        "hawkesn", "fit",
        "--cascades", cascades.to_str().unwrap(),
        "--family", "powerlaw",
        "--pin-c", "2",
        "--observe-fraction", "0.5",
        "--restarts", "3",
        "--seed", "1",
        "--out-dir", fit_pl.to_str().unwrap(),
    ]);
    for out in [&fit_exp, &fit_pl] {
        assert!(out.join("summary.csv").exists());
        assert!(out.join("fits.json").exists());
        assert!(out.join("manifest.json").exists());
        let fits: serde_json::Value =
            serde_json::from_reader(std::fs::File::open(out.join("fits.json")).unwrap()).unwrap();
        assert!(!fits.as_array().unwrap().is_empty());
    }

    let gof_dir = dir.join("gof");
    run_ok(&[
        "hawkesn", "gof",
        "--cascades", cascades.to_str().unwrap(),
        "--fits", fit_exp.join("summary.csv").to_str().unwrap(),
        "--fits", fit_pl.join("summary.csv").to_str().unwrap(),
        "--out-dir", gof_dir.to_str().unwrap(),
    ]);
    let mut gof_rows = 0;
    let mut reader = csv::Reader::from_path(gof_dir.join("gof.csv")).unwrap();
    for record in reader.records() {
        let record = record.unwrap();
        let ks_d: f64 = record.get(3).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&ks_d));
        gof_rows += 1;
    }
    assert!(gof_rows > 0);
    assert!(gof_dir.join("comparisons.csv").exists());

    // free-population fits may declare holdout events impossible (the
    // fitted N can undershoot the eventual size); the CSV records those as
    // inf. A fit with the population pinned above the final sizes scores
    // every row finitely.
    let holdout_dir = dir.join("holdout");
    run_ok(&[
        "hawkesn", "holdout",
        "--cascades", cascades.to_str().unwrap(),
        "--fits", fit_exp.join("summary.csv").to_str().unwrap(),
        "--split", "0.4",
        "--out-dir", holdout_dir.to_str().unwrap(),
    ]);
    let mut reader = csv::Reader::from_path(holdout_dir.join("holdout.csv")).unwrap();
    let mut holdout_rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let _nll: f64 = record.get(4).unwrap().parse().unwrap();
        holdout_rows += 1;
    }
    assert!(holdout_rows > 0);

    let fit_pinned = dir.join("fit_pinned");
    run_ok(&[
        "hawkesn", "fit",
        "--cascades", cascades.to_str().unwrap(),
        "--family", "exp",
        "--observe-fraction", "0.5",
        "--pin-population", "160",
        "--restarts", "3",
        "--seed", "1",
        "--out-dir", fit_pinned.to_str().unwrap(),
    ]);
    let holdout_pinned = dir.join("holdout_pinned");
    run_ok(&[
        "hawkesn", "holdout",
        "--cascades", cascades.to_str().unwrap(),
        "--fits", fit_pinned.join("summary.csv").to_str().unwrap(),
        "--split", "0.4",
        "--out-dir", holdout_pinned.to_str().unwrap(),
    ]);
    let mut reader = csv::Reader::from_path(holdout_pinned.join("holdout.csv")).unwrap();
    let mut finite_rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let nll: f64 = record.get(4).unwrap().parse().unwrap();
        assert!(nll.is_finite(), "pinned-population holdout must be finite");
        finite_rows += 1;
    }
    assert!(finite_rows > 0);

    let predict_dir = dir.join("predict");
    run_ok(&[
        "hawkesn", "predict",
        "--cascades", cascades.to_str().unwrap(),
        "--fits", fit_exp.join("summary.csv").to_str().unwrap(),
        "--fits", fit_pl.join("summary.csv").to_str().unwrap(),
        "--horizon", "3",
        "--seed", "2",
        "--export-features",
        "--out-dir", predict_dir.to_str().unwrap(),
    ]);
    let mut reader = csv::Reader::from_path(predict_dir.join("predictions.csv")).unwrap();
    let mut combined = 0;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        rows += 1;
        if record.get(1).unwrap() == "combined" {
            combined += 1;
            let are: f64 = record.get(7).unwrap().parse().unwrap();
            assert!(are.is_finite() && are >= 0.0);
        }
    }
    assert!(rows > 0 && combined > 0, "{rows} rows, {combined} combined");
    assert!(predict_dir.join("features_exp.csv").exists());
    assert!(predict_dir.join("features_powerlaw.csv").exists());

    let sd_dir = dir.join("sizedist");
    run_ok(&[
        "hawkesn", "size-dist",
        "--family", "exp",
        "--beta", "2.5",
        "--gamma", "0.5",
        "--population", "80",
        "--runs", "500",
        "--seed", "4",
        "--out-dir", sd_dir.to_str().unwrap(),
    ]);
    let mut reader = csv::Reader::from_path(sd_dir.join("sizedist.csv")).unwrap();
    let mut last_cdf = 0.0;
    let mut total_p = 0.0;
    for record in reader.records() {
        let record = record.unwrap();
        let p: f64 = record.get(2).unwrap().parse().unwrap();
        let cdf: f64 = record.get(3).unwrap().parse().unwrap();
        assert!(cdf >= last_cdf);
        last_cdf = cdf;
        total_p += p;
    }
    assert!((last_cdf - 1.0).abs() < 1e-9);
    assert!((total_p - 1.0).abs() < 1e-6);
}

#[test]
fn joint_fit_writes_a_wildcard_row_that_gof_applies_to_all() {
    let dir = tmp("joint");
    run_ok(&[
        "hawkesn", "simulate",
        "--family", "exp",
        "--beta", "2.0",
        "--gamma", "0.5",
        "--population", "60",
        "--runs", "8",
        "--seed", "9",
        "--out-dir", dir.to_str().unwrap(),
    ]);
    let cascades = dir.join("realizations.csv");
    let fit_dir = dir.join("fit");
    run_ok(&[
        "hawkesn", "fit",
        "--cascades", cascades.to_str().unwrap(),
        "--family", "exp",
        "--joint",
        "--restarts", "3",
        "--seed", "1",
        "--out-dir", fit_dir.to_str().unwrap(),
    ]);
    let summary = std::fs::read_to_string(fit_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2); // header + one joint row
    assert!(summary.lines().nth(1).unwrap().starts_with("*,exp,"));

    let gof_dir = dir.join("gof");
    run_ok(&[
        "hawkesn", "gof",
        "--cascades", cascades.to_str().unwrap(),
        "--fits", fit_dir.join("summary.csv").to_str().unwrap(),
        "--out-dir", gof_dir.to_str().unwrap(),
    ]);
    let gof = std::fs::read_to_string(gof_dir.join("gof.csv")).unwrap();
    assert!(gof.lines().count() > 2, "joint params should cover several cascades");
}

#[test]
fn spec_file_feeds_simulate_and_flags_override_it() {
    let dir = tmp("specfile");
    let spec_path = dir.join("spec.json");
    std::fs::write(
        &spec_path,
        r#"{"beta": 2.0, "recovery": {"family": "exp", "theta": 0.5}, "population": 40.0, "rho": 0.0}"#,
    )
    .unwrap();
    run_ok(&[
        "hawkesn", "simulate",
        "--spec", spec_path.to_str().unwrap(),
        "--runs", "2",
        "--seed", "5",
        "--out-dir", dir.join("a").to_str().unwrap(),
    ]);
    // --beta on top of the file changes the outcome
    run_ok(&[
        "hawkesn", "simulate",
        "--spec", spec_path.to_str().unwrap(),
        "--beta", "0.0",
        "--runs", "2",
        "--seed", "5",
        "--out-dir", dir.join("b").to_str().unwrap(),
    ]);
    let a = hawkesn::cascades::load_realizations(dir.join("a/realizations.csv")).unwrap();
    let b = hawkesn::cascades::load_realizations(dir.join("b/realizations.csv")).unwrap();
    assert!(a.iter().map(|(_, r)| r.len()).sum::<usize>() > 2);
    assert_eq!(b.iter().map(|(_, r)| r.len()).sum::<usize>(), 2); // beta = 0
}
