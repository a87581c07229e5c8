use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use mortcast::agestruct::{peak_age, SimpleModelParams};
use mortcast::dataio::read_output_json;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mortcast"));
    c.env("RUST_LOG", "warn");
    c
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic-wonder")
}

fn small_fit_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    fs::write(&path, "n_a = 240\ndelta_a = 0.5\ndelta_t = 0.5\nensemble_size = 60\n").unwrap();
    path
}

fn run_ok(cmd: &mut Command) {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_writes_profiles_and_consistent_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    fs::write(&cfg, "times = [0.0, 0.1, 2.0, 4.5]\npeak_horizon = 1.0\n").unwrap();
    run_ok(bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path()));

    let text = fs::read_to_string(dir.path().join("profiles.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "age,n_t0,n_t0.1,n_t2,n_t4.5");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| r[1] == 0.0));
    for col in 2..5 {
        let values: Vec<f64> = rows.iter().map(|r| r[col]).collect();
        let top = values.iter().cloned().fold(f64::MIN, f64::max);
        let argmax = values.iter().position(|v| *v == top).unwrap();
        assert!(argmax > 0 && argmax < 999, "interior maximum in column {col}");
    }

    let params = SimpleModelParams::new(0.08, 0.2).unwrap();
    let peaks = fs::read_to_string(dir.path().join("peak_ages.csv")).unwrap();
    for line in peaks.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v[1], peak_age(v[0], &params).unwrap());
    }
}

#[test]
fn twin_runs_with_a_small_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("twin.toml");
    fs::write(&cfg, "n_a = 100\ndelta_a = 1.2\nhorizon = 1.0\n").unwrap();
    run_ok(
        bin()
            .args(["twin", "--ensemble-size", "30", "--format", "json", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path()),
    );
    let run = read_output_json(&dir.path().join("twin.json")).unwrap();
    assert_eq!(run.records.len(), 11);
    assert_eq!(run.metadata.seed, 0);
    assert!(run.metadata.config.contains("ensemble_size = 30"));
    assert!(dir.path().join("twin_bands.csv").exists());
}

#[test]
fn fit_predicts_every_year_and_keeps_parameters_positive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_fit_config(dir.path());
    run_ok(
        bin()
            .args(["fit", "--format", "json", "--config"])
            .arg(&cfg)
            .arg("--data")
            .arg(data_dir())
            .arg("--out")
            .arg(dir.path()),
    );
    let run = read_output_json(&dir.path().join("fit.json")).unwrap();
    let predicted: Vec<f64> = run.records.iter().filter(|r| r.predicted_mean.is_some()).map(|r| r.time).collect();
    assert_eq!(predicted, (2..=23).map(f64::from).collect::<Vec<_>>());
    assert!(run.records.iter().all(|r| r.parameter_mean.iter().all(|v| *v > 0.0)));
    assert!(run.metadata.data_provenance[0].contains("sha256:"));

    let plot = fs::read_to_string(dir.path().join("fit_plot.csv")).unwrap();
    assert_eq!(plot.lines().count(), 1 + 22 * 22);
    assert!(plot.lines().skip(1).all(|l| l.ends_with(",3.0")));
}

#[test]
fn forecast_follows_the_last_observed_year_with_two_sigma_bands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_fit_config(dir.path());
    run_ok(bin().arg("forecast").arg("--config").arg(&cfg).arg("--data").arg(data_dir()).arg("--out").arg(dir.path()));
    let plot = fs::read_to_string(dir.path().join("forecast_plot.csv")).unwrap();
    let years: Vec<&str> = plot.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(years.len(), 4 * 22);
    assert_eq!(years[0], "2020");
    assert_eq!(years[22], "2021");
    assert_eq!(years[87], "2023");
    assert!(plot.lines().skip(23).all(|l| l.split(',').nth(4) == Some("")));
    assert!(plot.lines().skip(1).all(|l| l.ends_with(",2.0")));
}

#[test]
fn reruns_are_bit_identical_and_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_fit_config(dir.path());
    let input = data_dir().join("overdose_1999_2020.txt");
    let before = fs::read(&input).unwrap();
    for sub in ["a", "b"] {
        run_ok(
            bin()
                .args(["forecast", "--seed", "9", "--config"])
                .arg(&cfg)
                .arg("--data")
                .arg(data_dir())
                .arg("--out")
                .arg(dir.path().join(sub)),
        );
    }
    for f in ["forecast.csv", "forecast_plot.csv"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
    assert_eq!(fs::read(&input).unwrap(), before);
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "ensemble_sise = 10\n").unwrap();
    let code = |cmd: &mut Command| cmd.output().unwrap().status.code();

    assert_eq!(code(bin().args(["twin", "--config"]).arg(&bad_cfg)), Some(2));
    assert_eq!(code(bin().args(["fit", "--out"]).arg(dir.path())), Some(2));

    let bad_data = dir.path().join("bad.txt");
    fs::write(&bad_data, "\"Notes\"\t\"Year\"\t\"Five-Year Age Groups\"\t\"Deaths\"\n\t\"2001\"\t\"Teens\"\t4\n").unwrap();
    assert_eq!(code(bin().arg("fit").arg("--data").arg(&bad_data).arg("--out").arg(dir.path())), Some(3));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    assert_eq!(code(bin().arg("simulate").arg("--out").arg(blocker.join("sub"))), Some(5));
}
