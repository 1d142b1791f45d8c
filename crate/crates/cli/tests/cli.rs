//! Black-box tests of the `rabilitho` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rabilitho::config::ExperimentConfig;
use rabilitho::io::{parse_frame, SWEEP_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rabilitho"))
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Writes a preset config into `dir` and returns its path.
fn write_preset(dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    let o = exec(&["preset", name, "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    path
}

fn run_into(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    exec(&args)
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn presets_parse_back() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["fig1c", "fig2", "fig3"] {
        let path = write_preset(tmp.path(), name);
        let cfg = ExperimentConfig::load(&path, &[]).unwrap();
        assert!(cfg.sweep.is_some(), "{name}");
    }
}

#[test]
fn unknown_preset_is_an_input_error() {
    let o = exec(&["preset", "fig9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fig9"), "{}", stderr(&o));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_preset(tmp.path(), "fig2");
    let out = tmp.path().join("o");
    let mut trees = Vec::new();
    for _ in 0..2 {
        let o = run_into(&cfg, &out, &["--shots", "3", "--seed", "9", "--set", "shots.phase_jitter_rms_rad=0.3"]);
        assert!(o.status.success(), "{}", stderr(&o));
        trees.push(read_tree(&out));
        fs::remove_dir_all(&out).unwrap();
    }
    let (ta, tb) = (&trees[0], &trees[1]);
    assert!(ta.iter().any(|(p, _)| p == Path::new("frame_average.csv")));
    assert!(ta.iter().any(|(p, _)| p == Path::new("report.txt")));
    assert_eq!(ta, tb);
}

#[test]
fn dotted_override_changes_the_pattern() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_preset(tmp.path(), "fig2");
    let out = tmp.path().join("o");
    let o = run_into(&cfg, &out, &["--shots", "1", "--set", "sequence.0.area_in_pi=3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echoed = ExperimentConfig::load(&out.join("config.toml"), &[]).unwrap();
    let text = echoed.to_toml().unwrap();
    assert!(text.contains("area_in_pi = 3"), "{text}");
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("peak_count: 3\n"), "{report}");
}

#[test]
fn missing_config_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let o = run_into(&tmp.path().join("absent.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_reported_with_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_preset(tmp.path(), "fig2");
    let mut text = fs::read_to_string(&cfg).unwrap();
    let line = text.lines().position(|l| l.starts_with("peak_od")).unwrap() + 1;
    text = text.replacen("peak_od", "peak_odd", 1);
    fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("o");
    let o = run_into(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(&format!(":{line}:")), "expected line {line}: {err}");
    assert!(err.contains("peak_odd"), "{err}");
    assert!(!out.exists());
}

#[test]
fn bad_override_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_preset(tmp.path(), "fig2");
    let o = run_into(&cfg, &tmp.path().join("o"), &["--set", "cloud.no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn empty_sweep_prints_only_the_header() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_preset(tmp.path(), "fig2");
    let o = exec(&["sweep", "--config", cfg.to_str().unwrap(), "--values", ""]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim_end(), SWEEP_HEADER);
}

#[test]
fn sweeping_a_non_numeric_field_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_preset(tmp.path(), "fig2");
    let out = tmp.path().join("o");
    let o = exec(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--param",
        "output.dir",
        "--values",
        "1,2",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn analyze_reproduces_the_run_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_preset(tmp.path(), "fig2");
    let out = tmp.path().join("o");
    assert!(run_into(&cfg, &out, &["--shots", "2"]).status.success());
    let o = exec(&[
        "analyze",
        out.join("frame_average.csv").to_str().unwrap(),
        "--config",
        out.join("config.toml").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), fs::read_to_string(out.join("report.txt")).unwrap());
}

#[test]
fn dark_frame_has_no_peaks_and_no_visibility() {
    let tmp = tempfile::tempdir().unwrap();
    let mut text = String::from("# rabilitho frame v1\n# shot: average\n# clock_us: 0\n# config_digest: none\n# saturated: \npixel_center_um,od\n");
    for i in -60..60 {
        text.push_str(&format!("{},0\n", i as f64 * 1.649));
    }
    let path = tmp.path().join("dark.csv");
    fs::write(&path, text).unwrap();
    let o = exec(&["analyze", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    assert!(report.contains("peak_count: 0\n"), "{report}");
    assert!(report.contains("visibility: undefined\n"), "{report}");
}

#[test]
fn malformed_frame_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.csv");
    fs::write(
        &path,
        "# rabilitho frame v1\n# shot: average\npixel_center_um,od\n0,0.1\n1,oops\n",
    )
    .unwrap();
    let o = exec(&["analyze", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.csv:5:"), "{}", stderr(&o));
}

#[test]
fn jitter_sweep_lowers_visibility() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_preset(tmp.path(), "fig2");
    let o = exec(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--shots",
        "200",
        "--set",
        "cloud.sigma_axial_um=100000",
        "--set",
        "cloud.grid_half_width_um=150",
        "--param",
        "shots.phase_jitter_rms_rad",
        "--values",
        "0,0.3,0.6",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    let v: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(v.len(), 3, "{table}");
    assert!(v[0] > v[1] && v[1] > v[2], "{table}");
}

#[test]
fn extending_the_shot_count_keeps_earlier_shots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_preset(tmp.path(), "fig2");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let common = ["--seed", "4", "--set", "output.per_shot=true", "--set", "shots.phase_jitter_rms_rad=0.4"];
    let mut args = common.to_vec();
    args.extend(["--shots", "2"]);
    assert!(run_into(&cfg, &a, &args).status.success());
    let mut args = common.to_vec();
    args.extend(["--shots", "4"]);
    assert!(run_into(&cfg, &b, &args).status.success());
    for k in 0..2 {
        let name = format!("shots/shot_{k:04}.csv");
        let fa = fs::read(a.join(&name)).unwrap();
        assert_eq!(fa, fs::read(b.join(&name)).unwrap(), "{name}");
        parse_frame(&String::from_utf8(fa).unwrap(), &name).unwrap();
    }
    assert!(b.join("shots/shot_0003.csv").exists());
}
