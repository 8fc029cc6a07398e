use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gibbsflock"));
    c.env("GIBBSFLOCK_LOG", "error");
    c
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run_cmd(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FULL: &str = r#"
name = "explicit"
seed = 1
dt = 0.15
steps = 5

[robot]
r_coll = 0.1
v_max = 0.4
u_max = 0.7
k_neighbors = 3

[params]
k_a = 0.8
r_a = 0.3
k_align = 0.2
k_l = 4.0
k_o = 1.0
d_beta = 0.2
h = 0.3333333333333333
k_acc = 10.0
k_c = 7.0
k_d = 15.0
k_vel = 0.07
k_v = 2.0
t_p = 0.15
k_ro = 5.0
k_ri = 10.0
r_sen = 0.5
n_a = 6
delta_u = 0.16666666666666666
alpha = 0.9

[placement]
kind = "line"
count = 3
start = [0.0, 0.0]
spacing = 0.5
"#;

fn write_scenario(dir: &TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("scenario.toml");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn narrow_passage_writes_four_outputs() {
    let out = TempDir::new().unwrap();
    let scenario = scenarios().join("sim1_narrow_passage.toml");
    let o = run_cmd(&[
        "run",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["manifest.json", "metrics.csv", "plot_data.dat", "trajectory.csv"]
    );
    let traj = fs::read_to_string(out.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("t,id,px,py,vx,vy,ux,uy"));
    assert_eq!(traj.lines().count(), 1 + 2000 * 6);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["steps"], 2000);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn same_seed_gives_identical_files() {
    let scenario = scenarios().join("disk_pattern.toml");
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    for d in &dirs {
        let o = run_cmd(&[
            "run",
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            d.path().to_str().unwrap(),
            "--seed",
            "9",
            "--steps",
            "60",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["trajectory.csv", "metrics.csv", "plot_data.dat"] {
        let a = fs::read(dirs[0].path().join(f)).unwrap();
        let b = fs::read(dirs[1].path().join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    let hash = |d: &TempDir| {
        let m: serde_json::Value =
            serde_json::from_slice(&fs::read(d.path().join("manifest.json")).unwrap()).unwrap();
        m["config_hash"].clone()
    };
    assert_eq!(hash(&dirs[0]), hash(&dirs[1]));
}

#[test]
fn other_seed_changes_random_placement() {
    let scenario = scenarios().join("disk_pattern.toml");
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    for (d, seed) in dirs.iter().zip(["1", "2"]) {
        let o = run_cmd(&[
            "run",
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            d.path().to_str().unwrap(),
            "--seed",
            seed,
            "--steps",
            "2",
        ]);
        assert!(o.status.success());
    }
    let a = fs::read(dirs[0].path().join("trajectory.csv")).unwrap();
    let b = fs::read(dirs[1].path().join("trajectory.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn bundled_scenarios_validate() {
    for entry in fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let o = run_cmd(&["validate", "--scenario", path.to_str().unwrap()]);
            assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
        }
    }
}

#[test]
fn fully_specified_scenario_needs_no_preset() {
    let dir = TempDir::new().unwrap();
    let path = write_scenario(&dir, FULL);
    let o = run_cmd(&["validate", "--scenario", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn missing_gain_is_named() {
    let dir = TempDir::new().unwrap();
    let path = write_scenario(&dir, &FULL.replace("k_a = 0.8\n", ""));
    for cmd in ["validate", "run"] {
        let mut args = vec![cmd, "--scenario", path.to_str().unwrap()];
        let out = dir.path().join("out");
        if cmd == "run" {
            args.extend(["--out", out.to_str().unwrap()]);
        }
        let o = run_cmd(&args);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(stderr(&o).contains("k_a"), "{cmd}: {}", stderr(&o));
        assert!(!out.exists());
    }
}

#[test]
fn alpha_above_one_is_rejected() {
    let dir = TempDir::new().unwrap();
    let path = write_scenario(&dir, &FULL.replace("alpha = 0.9", "alpha = 1.5"));
    let o = run_cmd(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("alpha") && err.contains("(0, 1]"), "{err}");
}

#[test]
fn bump_width_of_one_is_rejected() {
    let dir = TempDir::new().unwrap();
    let path = write_scenario(&dir, &FULL.replace("h = 0.3333333333333333", "h = 1.0"));
    let o = run_cmd(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("h"), "{}", stderr(&o));
}

#[test]
fn parse_errors_exit_two_with_location() {
    let dir = TempDir::new().unwrap();
    let path = write_scenario(&dir, &format!("{FULL}\nbogus_key = 3\n"));
    let o = run_cmd(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus_key"), "{}", stderr(&o));

    let o = run_cmd(&["validate", "--scenario", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rasterize_unit_square() {
    let dir = TempDir::new().unwrap();
    let outline = dir.path().join("square.toml");
    fs::write(
        &outline,
        "[polygon]\nouter = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]\n",
    )
    .unwrap();
    let out = dir.path().join("square.pat");
    let args = [
        "rasterize",
        "--outline",
        outline.to_str().unwrap(),
        "--cell-size",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ];
    let o = run_cmd(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "4");
    let first = fs::read(&out).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert!(text.starts_with("# gibbsflock pattern v1\n"));
    assert!(text.contains("cells 4\n"));

    let o = run_cmd(&args);
    assert!(o.status.success());
    assert_eq!(fs::read(&out).unwrap(), first);
}

#[test]
fn rasterize_butterfly_near_reference_count() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("butterfly.pat");
    let outline = scenarios().join("patterns/butterfly.toml");
    let o = run_cmd(&[
        "rasterize",
        "--outline",
        outline.to_str().unwrap(),
        "--cell-size",
        "0.032",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let n: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert!((n - 9752.0).abs() / 9752.0 <= 0.05, "{n}");
}

#[test]
fn empty_rasterization_exits_two() {
    let dir = TempDir::new().unwrap();
    let outline = dir.path().join("tiny.toml");
    fs::write(&outline, "[disk]\nradius = 0.01\n").unwrap();
    let out = dir.path().join("tiny.pat");
    let o = run_cmd(&[
        "rasterize",
        "--outline",
        outline.to_str().unwrap(),
        "--cell-size",
        "1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}
