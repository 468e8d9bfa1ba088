// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

fn irdrop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irdrop"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = irdrop(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .parse()
        .unwrap()
}

fn ir_values(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

fn small_corpus(dir: &Path, designs: &str, extra: &[&str]) {
    let mut args = vec![
        "gen",
        "--out",
        "c",
        "--designs",
        designs,
        "--slices",
        "4",
        "--instances",
        "150",
        "--width",
        "30",
        "--length",
        "30",
        "--vias",
        "6",
        "--cycles",
        "8",
        "--steps-per-cycle",
        "5",
        "--seed",
        "5",
    ];
    args.extend_from_slice(extra);
    ok(dir, &args);
}

#[test]
fn eval_of_golden_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_corpus(dir, "1", &["--toggle-rate", "0.3"]);
    ok(dir, &["golden", "--corpus", "c"]);
    let text = ok(
        dir,
        &[
            "eval", "--corpus", "c", "--design", "synth0", "--pred", "c/labels", "--out", "e",
        ],
    );
    assert_eq!(field(&text, "rmse_volts"), 0.0);
    assert_eq!(field(&text, "max_abs_error_volts"), 0.0);
    assert_eq!(field(&text, "accuracy_1x1"), 1.0);
    assert_eq!(field(&text, "f1_6x6"), 1.0);
    assert!(dir.join("e/report.txt").exists() && dir.join("e/manifest.txt").exists());
}

#[test]
fn planted_rule_is_learned_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_corpus(dir, "3", &[]);
    ok(dir, &["golden", "--corpus", "c", "--planted"]);
    ok(
        dir,
        &[
            "train",
            "--corpus",
            "c",
            "--out",
            "m.w",
            "--held-out",
            "synth2",
            "--encoder",
            "4,8,16,16",
            "--decoder",
            "16,8,8",
            "--head-bias",
            "--augment",
            "--lr",
            "1e-3",
            "--lambda",
            "1e-6",
            "--epochs",
            "300",
            "--patience",
            "60",
        ],
    );
    ok(
        dir,
        &[
            "infer",
            "--corpus",
            "c",
            "--weights",
            "m.w",
            "--design",
            "synth2",
            "--out",
            "p",
        ],
    );
    let text = ok(
        dir,
        &[
            "eval", "--corpus", "c", "--design", "synth2", "--pred", "p", "--out", "e",
        ],
    );

    let golden: Vec<f64> = (0..4)
        .flat_map(|k| ir_values(&dir.join(format!("c/labels/synth2/slice_{k}.csv"))))
        .collect();
    let range = golden.iter().cloned().fold(f64::MIN, f64::max) - golden.iter().cloned().fold(f64::MAX, f64::min);
    let rmse = field(&text, "rmse_volts");
    assert!(rmse < 0.02 * range, "rmse {rmse} vs range {range}");

    let m = std::fs::read_to_string(dir.join("m.w.manifest.txt")).unwrap();
    assert!(m.contains("command=train\n") && m.contains("seed=") && m.contains("config_hash="));
    assert!(m.contains("held_out=synth2\n") && m.contains("epochs=300\n"));
}

#[test]
fn missing_required_setting_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = irdrop(dir, &["gen", "--designs", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));
    assert_eq!(std::fs::read_dir(dir).unwrap().count(), 0);

    let out = irdrop(dir, &["bogus"]);
    assert!(!out.status.success());
}

#[test]
fn config_file_supplies_settings_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("run.toml"),
        "seed = 11\n[gen]\nout = \"c\"\ndesigns = 2\nslices = 1\ninstances = 20\nwidth = 20.0\nlength = 20.0\n\
         vias = 4\ncycles = 4\nsteps_per_cycle = 2\n",
    )
    .unwrap();
    ok(dir, &["--config", "run.toml", "gen", "--designs", "1"]);
    let m = std::fs::read_to_string(dir.join("c/manifest.txt")).unwrap();
    assert!(m.contains("seed=11\n") && m.contains("designs=1\n") && m.contains("instances=20\n"));
    assert!(dir.join("c/synth0.design").exists() && !dir.join("c/synth1.design").exists());

    std::fs::write(dir.join("bad.toml"), "[gen]\ndesigns = \"many\"\n").unwrap();
    let out = irdrop(dir, &["--config", "bad.toml", "gen"]);
    assert!(!out.status.success());
}
