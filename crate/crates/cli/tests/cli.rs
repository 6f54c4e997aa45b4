use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn giant_atom(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_giant-atom"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = giant_atom(args, cwd);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn preset_run_is_reproducible_and_manifested() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["run", "fig2a", "--horizon-gamma-t", "10", "--out", "a"], dir.path());
    assert!(stdout.contains("OneMode"), "{stdout}");
    ok(&["run", "preset", "--preset", "fig2a", "--horizon-gamma-t", "10", "--out", "b"], dir.path());

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for name in ["dynamics.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.join("dynamics.csv")).unwrap();
    assert!(csv.starts_with("t_over_tau0,re_eps,im_eps,abs2\n0,1,0,1\n"));

    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["preset"], "fig2a");
    assert_eq!(manifest["config_sha256"], json(&b.join("manifest.json"))["config_sha256"]);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);

    let summary = json(&a.join("summary.json"));
    let plateau = summary["closed_form_plateau"].as_f64().unwrap();
    assert!((plateau - 1.0 / (1.0 + 14.0 * 0.05 * std::f64::consts::PI).powi(2)).abs() < 1e-12);
}

#[test]
fn poles_of_two_mode_preset() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["run", "poles", "--preset", "fig6a", "--out", "p"], dir.path());
    let poles = json(&dir.path().join("p/poles.json"));
    assert_eq!(poles["case_label"], "TwoMode");
    let ks: Vec<i64> = poles["modes"].as_array().unwrap().iter().map(|m| m["k"].as_i64().unwrap()).collect();
    assert_eq!(ks, vec![23, 26]);
}

#[test]
fn uncoupled_atom_stays_excited() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("free.toml"),
        "n_points = 3\nomega0_tau0_pi = 2.0\ngamma_tau0_pi = 0.0\n[run]\nhorizon_gamma_t = 4\n",
    )
    .unwrap();
    ok(&["run", "dynamics", "--config", "free.toml", "--out", "z"], dir.path());
    let csv = fs::read_to_string(dir.path().join("z/dynamics.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let abs2: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((abs2 - 1.0).abs() < 1e-14, "{line}");
    }
}

#[test]
fn ensemble_depends_only_on_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str, seed: &'static str| {
        ["run", "ensemble", "--preset", "fig11a", "--ntraj", "8", "--horizon-gamma-t", "3", "--seed", seed, "--out", out]
    };
    ok(&args("a", "5"), dir.path());
    ok(&args("b", "5"), dir.path());
    ok(&args("c", "6"), dir.path());
    let read = |o: &str| fs::read(dir.path().join(o).join("ensemble.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert_eq!(json(&dir.path().join("a/manifest.json"))["seed"], 5);
}

#[test]
fn field_map_and_snapshot_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("grid.toml"),
        "n_points = 3\nomega0_tau0_pi = 2.0\ngamma_tau0_pi = 0.05\n[run]\nhorizon_gamma_t = 2\n[field]\nnx = 13\nnt = 5\n",
    )
    .unwrap();
    ok(&["run", "field-map", "--config", "grid.toml", "--out", "f"], dir.path());
    let csv = fs::read_to_string(dir.path().join("f/field_map.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 14);
    let meta = json(&dir.path().join("f/field_map_meta.json"));
    assert_eq!(meta["norm_series"][0], 1.0);

    ok(&["run", "snapshot", "--config", "grid.toml", "--out", "s"], dir.path());
    let snap = fs::read_to_string(dir.path().join("s/snapshot.csv")).unwrap();
    assert!(snap.starts_with("x_over_x0,intensity\n"));
    assert_eq!(snap.lines().count(), 14);
}

#[test]
fn multi_atom_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("pair.toml"),
        "omega0_tau0_pi = 2.0\ngamma_tau0_pi = 0.05\ncoupling_mode = \"full-cross-coupling\"\n\
         [run]\nhorizon_gamma_t = 1\n\
         [[atoms]]\nn_points = 2\ninitial_re = 1.0\n\
         [[atoms]]\nn_points = 2\n",
    )
    .unwrap();
    ok(&["run", "multi-atom", "--config", "pair.toml", "--out", "m"], dir.path());
    let csv = fs::read_to_string(dir.path().join("m/multi_atom.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t_over_tau0,abs2_1,abs2_2,total");
    assert_eq!(lines.next().unwrap(), "0,1,0,1");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| giant_atom(args, dir.path()).status.code();

    assert_eq!(code(&["run", "nope"]), Some(2));
    assert_eq!(code(&["run", "dynamics", "--config", "missing.toml"]), Some(2));
    fs::write(dir.path().join("bad.toml"), "n_points = 3\nomega0_tau0_pi = 2.0\nunknown = 1\n").unwrap();
    assert_eq!(code(&["run", "dynamics", "--config", "bad.toml"]), Some(2));
    fs::write(dir.path().join("neg.toml"), "n_points = 3\nomega0_tau0_pi = 2.0\ngamma_tau0_pi = -1.0\n").unwrap();
    assert_eq!(code(&["run", "dynamics", "--config", "neg.toml"]), Some(2));
    assert_eq!(code(&["run", "fig2a", "--steps-per-tau0", "10"]), Some(2));

    fs::write(dir.path().join("occupied"), "a file, not a directory").unwrap();
    assert_eq!(code(&["run", "fig2a", "--horizon-gamma-t", "1", "--out", "occupied"]), Some(4));
}

#[test]
fn scan_classifies_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let presets: Value = serde_json::from_str(&ok(&["presets", "--json"], dir.path())).unwrap();
    let fig9a = presets.as_array().unwrap().iter().find(|p| p["name"] == "fig9a").unwrap();
    let w = format!("{}", fig9a["omega0_tau0_pi"].as_f64().unwrap());
    let g = format!("{}", fig9a["gamma_tau0_pi"].as_f64().unwrap());
    ok(&["scan", "--n", "5", "--omega-pi", &w, "--gamma-pi", &g, "--out", "three"], dir.path());
    let three = fs::read_to_string(dir.path().join("three/scan.csv")).unwrap();
    assert!(three.lines().nth(1).unwrap().contains(",ThreeMode,3,"), "{three}");

    let scan = ["scan", "--n", "3", "--omega-pi", "1.8:2.2:9", "--gamma-pi", "0.05", "--chunk-size", "2", "--out", "s"];
    ok(&scan, dir.path());
    let table = dir.path().join("s/scan.csv");
    let first = fs::read_to_string(&table).unwrap();
    assert_eq!(first.lines().count(), 10);
    assert!(first.contains("\n3,2,0.05,OneMode,1,Cond2kPi:1:2\n"), "{first}");

    fs::remove_file(dir.path().join("s/scan_chunks/chunk_00002.csv")).unwrap();
    let mut resumed = scan.to_vec();
    resumed.push("--resume");
    let stdout = ok(&resumed, dir.path());
    assert!(stdout.contains("5 chunks (4 reused)"), "{stdout}");
    assert_eq!(fs::read_to_string(&table).unwrap(), first);

    let mut other = resumed.clone();
    other[5] = "0.06";
    assert_eq!(giant_atom(&other, dir.path()).status.code(), Some(2));
}

#[test]
fn presets_table_lists_every_panel() {
    let dir = tempfile::tempdir().unwrap();
    let table = ok(&["presets"], dir.path());
    for name in ["fig2a", "fig6a", "fig9b", "fig12d", "fig16b"] {
        assert!(table.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}
