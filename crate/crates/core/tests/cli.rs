use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mmtwin");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN).arg("--out-dir").arg(out).args(args).current_dir(fixture("")).output().expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = run(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

/// Compares against the committed golden file; `MMTWIN_BLESS=1` rewrites it.
fn golden(actual: &Path, name: &str) {
    let path = fixture("golden").join(name);
    if std::env::var_os("MMTWIN_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::copy(actual, &path).unwrap();
    }
    assert!(read(actual) == read(&path), "{name} differs from its golden file");
}

const TRACE: &[&str] = &["--config", "run.toml", "--seed", "7", "trace", "--scene", "shoebox.ply", "--snapshots", "poses.csv"];
const PREDICT: &[&str] = &["--config", "run.toml", "--seed", "7", "predict", "--scene", "shoebox.ply", "--snapshots", "poses.csv"];

fn with_threads<'a>(n: &'a str, args: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["--threads", n];
    v.extend_from_slice(args);
    v
}

#[test]
fn predict_and_trace_match_golden_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    for threads in ["1", "8"] {
        for rep in 0..2 {
            let out = dir.path().join(format!("run_{threads}_{rep}"));
            ok(&out, &with_threads(threads, TRACE));
            golden(&out.join("paths.txt"), "paths.txt");
            golden(&out.join("mpcs.csv"), "mpcs.csv");
            ok(&out, &with_threads(threads, PREDICT));
            golden(&out.join("predicted.csv"), "predicted.csv");
            golden(&out.join("metrics.csv"), "metrics.csv");
        }
        let a = read(dir.path().join(format!("run_{threads}_0/manifest.json")));
        let b = read(dir.path().join(format!("run_{threads}_1/manifest.json")));
        assert_eq!(a, b, "manifest must be reproducible");
    }
}

#[test]
fn manifest_records_inputs_outputs_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), PREDICT);
    let m: serde_json::Value = serde_json::from_str(&read(dir.path().join("manifest.json"))).unwrap();
    assert_eq!(m["command"], "predict");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["trace"]["n_rays"], 20000);
    let inputs = m["inputs"].as_object().unwrap();
    for f in ["run.toml", "shoebox.ply", "shoebox.ply.regions", "poses.csv"] {
        let digest = inputs.get(f).unwrap_or_else(|| panic!("missing digest for {f}"));
        assert_eq!(digest.as_str().unwrap().len(), 64);
    }
    assert!(m["outputs"].get("predicted.csv").is_some() && m["outputs"].get("metrics.csv").is_some());
    let t: serde_json::Value = serde_json::from_str(&read(dir.path().join("timings.json"))).unwrap();
    assert!(t["total"].as_f64().unwrap() >= 0.0);
}

#[test]
fn calibrate_without_snapshots_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["calibrate", "--scene", "shoebox.ply", "--snapshots", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(record["command"], "calibrate");
    assert_eq!(record["error"], "usage");

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, read(fixture("poses.csv")).lines().next().unwrap()).unwrap();
    let o = run(dir.path(), &["calibrate", "--scene", "shoebox.ply", "--snapshots", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["predict"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["teleport"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["--threads", "0", "beamsweep", "--snapshots", "poses.csv"]).status.code(), Some(2));
    let o = run(dir.path(), &["predict", "--scene", "missing.ply", "--snapshots", "poses.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let record: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(record["error"], "io");
    let o = run(dir.path(), &["predict", "--scene", "shoebox.ply", "--materials", "poses.toml", "--snapshots", "poses.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_on_identical_tables_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("p");
    ok(&pred, PREDICT);
    let table = pred.join("predicted.csv");
    let out = dir.path().join("r");
    ok(&out, &["report", "--predicted", table.to_str().unwrap(), "--snapshots", table.to_str().unwrap()]);
    let errors = read(out.join("errors.csv"));
    let mut lines = errors.lines();
    assert_eq!(
        lines.next().unwrap(),
        "snapshot,path_loss_error_db,tau_rms_error_ns,angular_spread_error_deg,k_factor_error_db,matched_clusters,missed_clusters,false_clusters"
    );
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        for v in &f[1..5] {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{line}");
        }
        assert_eq!(f[6], "0");
        assert_eq!(f[7], "0");
    }
    for line in read(out.join("error_cdf.csv")).lines().skip(1) {
        assert!(line.split(',').skip(2).all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
    }
    let clusters = read(out.join("clusters.csv"));
    assert!(clusters.lines().skip(1).all(|l| l.split(',').skip(3).all(|v| v.parse::<f64>().unwrap() == 0.0)));
}

#[test]
fn ingest_assigns_vision_materials() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ingest", "--scene", "shoebox.ply", "--semantics", "semantics.txt", "--texts", "texts.txt"]);
    let table = read(dir.path().join("materials.csv"));
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][2], "plasterboard");
    assert_eq!(rows[1][2], "floorboard");
    assert_eq!(rows[2][2], "ceiling board");
    assert!(rows.iter().all(|r| r[6] == "vision"));
    assert!(dir.path().join("scene.ply").exists());
}

#[test]
fn calibrate_beamsweep_and_dynamics_run() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("p");
    ok(&pred, PREDICT);
    let measured = pred.join("predicted.csv");

    let cal = dir.path().join("c");
    ok(
        &cal,
        &[
            "--config",
            "run.toml",
            "--seed",
            "7",
            "calibrate",
            "--scene",
            "shoebox.ply",
            "--snapshots",
            measured.to_str().unwrap(),
            "--iterations",
            "3",
        ],
    );
    let summary: serde_json::Value = serde_json::from_str(&read(cal.join("calibration.json"))).unwrap();
    assert_eq!(summary["snapshots"], 4);
    // Measured data predicted from the same materials: already at the optimum.
    assert!(summary["final_loss"].as_f64().unwrap() < 1e-6, "{summary}");
    assert!(read(cal.join("materials.csv")).contains("calibrated"));
    assert!(cal.join("loss_history.csv").exists() && cal.join("params.csv").exists());

    // The calibrated table feeds back into prediction.
    let again = dir.path().join("p2");
    let materials = cal.join("materials.csv");
    ok(
        &again,
        &[
            "--config",
            "run.toml",
            "--seed",
            "7",
            "predict",
            "--scene",
            "shoebox.ply",
            "--materials",
            materials.to_str().unwrap(),
            "--snapshots",
            "poses.csv",
        ],
    );

    let beams = dir.path().join("b");
    ok(&beams, &["beamsweep", "--snapshots", measured.to_str().unwrap()]);
    let table = read(beams.join("beams.csv"));
    assert_eq!(table.lines().count(), 5);

    let dyn_dir = dir.path().join("d");
    ok(
        &dyn_dir,
        &["--config", "run.toml", "dynamics", "--scene", "shoebox.ply", "--trajectory", "walk.csv", "--tx", "1,2,1.2", "--rx", "5,2,1.2"],
    );
    let sweep = read(dyn_dir.join("shadow_loss.csv"));
    let sl: Vec<f64> = sweep.lines().skip(1).map(|l| l.split(',').nth(5).unwrap().parse().unwrap()).collect();
    assert_eq!(sl.len(), 5);
    // Deepest fade with the body on the line of sight; the room's reflections
    // keep it far shallower than in open space.
    assert!(sl.iter().all(|&v| v <= sl[2]) && sl[2] > 3.0, "{sl:?}");
}
