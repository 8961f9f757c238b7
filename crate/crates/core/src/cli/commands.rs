use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use mmtwin::beamsel::{select_beam, write_selection_csv};
use mmtwin::calibration::{
    calibrate, read_snapshots_csv, trace_snapshots, write_loss_history_csv, write_param_table_csv, write_snapshots_csv, Snapshot,
};
use mmtwin::channel::synthesize;
use mmtwin::dynamics::{read_trajectory_csv, shadow_loss_sweep, write_sweep_csv, Pose, ProxyObject};
use mmtwin::geometry::{load_mesh, load_mesh_with_regions, write_ascii_ply, Scene, Vec3};
use mmtwin::materials::{MaterialDb, ReadoutWeights};
use mmtwin::metrics::{cluster_match, snapshot_metrics, write_cluster_csv, write_metrics_csv, AngleSide, SnapshotMetrics};
use mmtwin::semantics::{assign_regions, read_semantic_export, read_text_embeddings, MaterialSource, RegionAssignment, RegionMaterial};
use mmtwin::tracer::path_record;
use mmtwin::util::quantile_sorted;
use mmtwin::Error;

use super::config::RunConfig;
use super::manifest::Recorder;
use super::{Cli, CliError, CliResult, Command, SceneArgs};

pub fn dispatch(cli: &Cli, config: &RunConfig) -> CliResult<()> {
    let g = &cli.global;
    let config_json = serde_json::to_value(config).expect("config serialises");
    let mut rec = Recorder::new(cli.command.name(), config.trace.rng_seed, g.threads, config_json, &g.out_dir);
    if let Some(p) = &g.config {
        rec.input(p)?;
    }
    match &cli.command {
        Command::Ingest { scene, regions, semantics, texts, materials } => {
            ingest(&mut rec, config, scene, regions.as_deref(), semantics, texts, materials.as_deref())?
        }
        Command::Trace { scene, snapshots } => trace(&mut rec, config, scene, snapshots)?,
        Command::Predict { scene, snapshots } => predict(&mut rec, config, scene, snapshots)?,
        Command::Calibrate { scene, snapshots, .. } => calibrate_cmd(&mut rec, config, scene, snapshots)?,
        Command::Dynamics { scene, trajectory, tx, rx, proxy_material } => {
            dynamics(&mut rec, config, scene, trajectory, *tx, *rx, proxy_material)?
        }
        Command::Beamsweep { snapshots } => beamsweep(&mut rec, config, snapshots)?,
        Command::Report { predicted, snapshots } => report(&mut rec, config, predicted, snapshots)?,
    }
    rec.finish()?;
    Ok(())
}

fn weights(config: &RunConfig) -> ReadoutWeights {
    ReadoutWeights::canonical(config.embedding_dim)
}

fn load_scene(rec: &mut Recorder, mesh: &Path, regions: Option<&Path>) -> CliResult<Scene> {
    rec.input(mesh)?;
    let (scene, report) = match regions {
        Some(map) => {
            rec.input(map)?;
            load_mesh_with_regions(mesh, map)?
        }
        None => {
            let mut companion = mesh.as_os_str().to_owned();
            companion.push(".regions");
            let companion = PathBuf::from(companion);
            if companion.is_file() {
                rec.input(&companion)?;
            }
            load_mesh(mesh)?
        }
    };
    log::info!("{}: {} triangles, {} regions", mesh.display(), report.triangles, report.regions);
    Ok(scene)
}

fn load_db(rec: &mut Recorder, path: Option<&Path>) -> CliResult<MaterialDb> {
    match path {
        Some(p) => {
            rec.input(p)?;
            Ok(MaterialDb::load(p)?)
        }
        None => Ok(MaterialDb::default_60ghz()),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Per-region materials: an assignment table as-is, or a database lookup of
/// every region label.
fn resolve_materials(rec: &mut Recorder, config: &RunConfig, scene: &Scene, path: Option<&Path>) -> CliResult<RegionAssignment> {
    let w = weights(config);
    let assignment = match path {
        Some(p) if is_csv(p) => {
            rec.input(p)?;
            RegionAssignment::read_csv(p, &w)?
        }
        _ => {
            let db = load_db(rec, path)?;
            let rows = (0..scene.region_count() as u32)
                .map(|r| {
                    let label = scene.region_label(r).unwrap_or_default().to_string();
                    let m = db.lookup_at(&label, config.frequency_hz)?;
                    let p = m.nominal_params();
                    Ok(RegionMaterial {
                        region: r,
                        region_label: label,
                        material: m.label.clone(),
                        sigma: p.sigma,
                        eps_r: p.eps_r,
                        scattering: p.scattering,
                        source: MaterialSource::Manual,
                        points: 0,
                    })
                })
                .collect::<mmtwin::Result<Vec<_>>>()?;
            RegionAssignment::from_records(rows, &w)?
        }
    };
    if assignment.regions.len() < scene.region_count() {
        return Err(
            Error::InvalidInput(format!("material table covers {} of {} regions", assignment.regions.len(), scene.region_count())).into()
        );
    }
    Ok(assignment)
}

fn read_snapshots(rec: &mut Recorder, path: &Path, what: &str) -> CliResult<Vec<Snapshot>> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("{what} table {} does not exist", path.display())));
    }
    rec.input(path)?;
    let snaps = read_snapshots_csv(path)?;
    if snaps.is_empty() {
        return Err(CliError::Usage(format!("{what} table {} holds no snapshots", path.display())));
    }
    Ok(snaps)
}

fn ingest(
    rec: &mut Recorder,
    config: &RunConfig,
    mesh: &Path,
    regions: Option<&Path>,
    semantics: &Path,
    texts: &Path,
    materials: Option<&Path>,
) -> CliResult<()> {
    let scene = load_scene(rec, mesh, regions)?;
    rec.input(semantics)?;
    rec.input(texts)?;
    let db = load_db(rec, materials)?;
    let points = read_semantic_export(semantics)?;
    let texts = read_text_embeddings(texts)?;
    rec.stage("load");
    let assignment = assign_regions(&scene, &points, &texts, &db, &weights(config), &config.assign_config())?;
    for w in &assignment.warnings {
        log::warn!("{w}");
    }
    rec.stage("assign");
    assignment.write_csv(rec.output_path("materials.csv"))?;
    rec.output("materials.csv")?;
    write_ascii_ply(&scene, rec.output_path("scene.ply"))?;
    rec.output("scene.ply")?;
    Ok(())
}

fn trace(rec: &mut Recorder, config: &RunConfig, args: &SceneArgs, snapshots: &Path) -> CliResult<()> {
    let scene = load_scene(rec, &args.scene, args.regions.as_deref())?;
    let materials = resolve_materials(rec, config, &scene, args.materials.as_deref())?.params();
    let poses = read_snapshots(rec, snapshots, "pose")?;
    rec.stage("load");
    let paths = trace_snapshots(&scene, &poses, &config.trace)?;
    rec.stage("trace");
    let mut text = String::new();
    let mut predicted = Vec::with_capacity(poses.len());
    for (s, ps) in poses.iter().zip(&paths) {
        writeln!(text, "# snapshot {} paths {}", s.id, ps.len()).unwrap();
        for p in ps {
            text.push_str(&path_record(p));
            text.push('\n');
        }
        let (mpcs, _) = synthesize(ps, &materials, s.freq_hz, 1.0, None)?;
        predicted.push(Snapshot::new(s.id, s.tx, s.rx, s.freq_hz, mpcs));
    }
    let out = rec.output_path("paths.txt");
    std::fs::write(&out, text).map_err(|e| Error::Io { path: out, source: e })?;
    rec.output("paths.txt")?;
    write_snapshots_csv(&predicted, rec.output_path("mpcs.csv"))?;
    rec.output("mpcs.csv")?;
    Ok(())
}

fn metrics_rows(snaps: &[Snapshot]) -> CliResult<Vec<(usize, SnapshotMetrics)>> {
    Ok(snaps
        .iter()
        .map(|s| Ok((s.id, snapshot_metrics(&s.mpcs, s.los_index(), AngleSide::Arrival)?)))
        .collect::<mmtwin::Result<Vec<_>>>()?)
}

fn predict(rec: &mut Recorder, config: &RunConfig, args: &SceneArgs, snapshots: &Path) -> CliResult<()> {
    let scene = load_scene(rec, &args.scene, args.regions.as_deref())?;
    let materials = resolve_materials(rec, config, &scene, args.materials.as_deref())?.params();
    let poses = read_snapshots(rec, snapshots, "pose")?;
    rec.stage("load");
    let paths = trace_snapshots(&scene, &poses, &config.trace)?;
    rec.stage("trace");
    let predicted = poses
        .iter()
        .zip(&paths)
        .map(|(s, ps)| Ok(Snapshot::new(s.id, s.tx, s.rx, s.freq_hz, synthesize(ps, &materials, s.freq_hz, 1.0, None)?.0)))
        .collect::<mmtwin::Result<Vec<_>>>()?;
    rec.stage("synthesize");
    write_snapshots_csv(&predicted, rec.output_path("predicted.csv"))?;
    rec.output("predicted.csv")?;
    write_metrics_csv(&metrics_rows(&predicted)?, rec.output_path("metrics.csv"))?;
    rec.output("metrics.csv")?;
    Ok(())
}

#[derive(Serialize)]
struct CalibrationSummary {
    snapshots: usize,
    steps: usize,
    converged: bool,
    initial_loss: f64,
    final_loss: f64,
    scale: f64,
}

fn calibrate_cmd(rec: &mut Recorder, config: &RunConfig, args: &SceneArgs, snapshots: &Path) -> CliResult<()> {
    let scene = load_scene(rec, &args.scene, args.regions.as_deref())?;
    let start = resolve_materials(rec, config, &scene, args.materials.as_deref())?;
    let measured = read_snapshots(rec, snapshots, "measured")?;
    rec.stage("load");
    let w = weights(config);
    let outcome = calibrate(&scene, &w, &start.embeddings, &measured, &config.calibration, &config.trace)?;
    rec.stage("calibrate");

    let mut regions = start.regions.clone();
    for (r, p) in regions.iter_mut().zip(&outcome.params) {
        r.sigma = p.sigma;
        r.eps_r = p.eps_r;
        r.scattering = p.scattering;
        r.source = MaterialSource::Calibrated;
    }
    RegionAssignment::from_records(regions, &w)?.write_csv(rec.output_path("materials.csv"))?;
    rec.output("materials.csv")?;
    write_loss_history_csv(&outcome.history, rec.output_path("loss_history.csv"))?;
    rec.output("loss_history.csv")?;
    let labels: Vec<String> = start.regions.iter().map(|r| r.region_label.clone()).collect();
    write_param_table_csv(&labels, &start.params(), &outcome.params, rec.output_path("params.csv"))?;
    rec.output("params.csv")?;
    let summary = CalibrationSummary {
        snapshots: measured.len(),
        steps: outcome.steps,
        converged: outcome.converged,
        initial_loss: outcome.history.first().map_or(f64::NAN, |h| h.loss),
        final_loss: outcome.final_loss(),
        scale: outcome.scale.scale,
    };
    write_json(rec, "calibration.json", &summary)
}

fn write_json(rec: &mut Recorder, name: &str, value: &impl Serialize) -> CliResult<()> {
    let path = rec.output_path(name);
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
    rec.output(name)?;
    Ok(())
}

fn dynamics(
    rec: &mut Recorder,
    config: &RunConfig,
    args: &SceneArgs,
    trajectory: &Path,
    tx: [f64; 3],
    rx: [f64; 3],
    proxy_material: &str,
) -> CliResult<()> {
    let scene = load_scene(rec, &args.scene, args.regions.as_deref())?;
    let materials = resolve_materials(rec, config, &scene, args.materials.as_deref())?.params();
    let db = match args.materials.as_deref() {
        Some(p) if !is_csv(p) => MaterialDb::load(p)?,
        _ => MaterialDb::default_60ghz(),
    };
    let body = db.lookup_at(proxy_material, config.frequency_hz)?.nominal_params();
    rec.input(trajectory)?;
    let walk = read_trajectory_csv(trajectory)?;
    rec.flag("tx", format!("{},{},{}", tx[0], tx[1], tx[2]));
    rec.flag("rx", format!("{},{},{}", rx[0], rx[1], rx[2]));
    rec.flag("proxy_material", proxy_material);
    rec.stage("load");
    let link = (Vec3::from(tx), Vec3::from(rx));
    let proxy = ProxyObject::human(Pose::at(Vec3::zeros()));
    let steps = shadow_loss_sweep(&scene, &proxy, body, &walk, link, &materials, config.frequency_hz, &config.trace, |_, _, _| Ok(()))?;
    rec.stage("sweep");
    write_sweep_csv(&steps, rec.output_path("shadow_loss.csv"))?;
    rec.output("shadow_loss.csv")?;
    Ok(())
}

fn beamsweep(rec: &mut Recorder, config: &RunConfig, snapshots: &Path) -> CliResult<()> {
    let snaps = read_snapshots(rec, snapshots, "snapshot")?;
    let rows = snaps
        .iter()
        .map(|s| Ok((s.id, select_beam(&s.mpcs, &config.codebook, &config.link_budget, s.phased)?)))
        .collect::<mmtwin::Result<Vec<_>>>()?;
    rec.stage("select");
    write_selection_csv(&rows, &config.codebook, rec.output_path("beams.csv"))?;
    rec.output("beams.csv")?;
    Ok(())
}

#[derive(Serialize)]
struct ErrorRow {
    snapshot: usize,
    path_loss_error_db: f64,
    tau_rms_error_ns: f64,
    angular_spread_error_deg: f64,
    k_factor_error_db: Option<f64>,
    matched_clusters: usize,
    missed_clusters: usize,
    false_clusters: usize,
}

#[derive(Serialize)]
struct QuantileRow {
    metric: &'static str,
    count: usize,
    q10: f64,
    q25: f64,
    q50: f64,
    q75: f64,
    q90: f64,
}

fn report(rec: &mut Recorder, config: &RunConfig, predicted: &Path, measured: &Path) -> CliResult<()> {
    let pred = read_snapshots(rec, predicted, "predicted")?;
    let meas = read_snapshots(rec, measured, "measured")?;
    let pred: BTreeMap<usize, &Snapshot> = pred.iter().map(|s| (s.id, s)).collect();
    let mut rows = Vec::new();
    let mut clusters = Vec::new();
    for m in &meas {
        let p = pred.get(&m.id).ok_or_else(|| Error::InvalidInput(format!("no prediction for snapshot {}", m.id)))?;
        let a = snapshot_metrics(&p.mpcs, p.los_index(), AngleSide::Arrival)?;
        let b = snapshot_metrics(&m.mpcs, m.los_index(), AngleSide::Arrival)?;
        let c = cluster_match(&p.mpcs, &m.mpcs, &config.clusters)?;
        rows.push(ErrorRow {
            snapshot: m.id,
            path_loss_error_db: a.path_loss_db - b.path_loss_db,
            tau_rms_error_ns: (a.tau_rms - b.tau_rms) * 1e9,
            angular_spread_error_deg: a.angular_spread_deg() - b.angular_spread_deg(),
            k_factor_error_db: a.k_factor_db.zip(b.k_factor_db).map(|(x, y)| x - y),
            matched_clusters: c.pairs.len(),
            missed_clusters: c.misses,
            false_clusters: c.false_alarms,
        });
        clusters.push((m.id, c));
    }
    rec.stage("compare");

    let path = rec.output_path("errors.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Parse { context: path.display().to_string(), message: e.to_string() })?;
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Parse { context: path.display().to_string(), message: e.to_string() })?;
    }
    w.flush().map_err(|e| Error::Io { path: path.clone(), source: e })?;
    rec.output("errors.csv")?;

    let columns: [(&'static str, Vec<f64>); 4] = [
        ("path_loss_db", rows.iter().map(|r| r.path_loss_error_db).collect()),
        ("tau_rms_ns", rows.iter().map(|r| r.tau_rms_error_ns).collect()),
        ("angular_spread_deg", rows.iter().map(|r| r.angular_spread_error_deg).collect()),
        ("k_factor_db", rows.iter().filter_map(|r| r.k_factor_error_db).collect()),
    ];
    let path = rec.output_path("error_cdf.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Parse { context: path.display().to_string(), message: e.to_string() })?;
    for (metric, values) in columns {
        let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let q = |p: f64| if abs.is_empty() { f64::NAN } else { quantile_sorted(&abs, p) };
        let row = QuantileRow { metric, count: abs.len(), q10: q(0.1), q25: q(0.25), q50: q(0.5), q75: q(0.75), q90: q(0.9) };
        w.serialize(row).map_err(|e| Error::Parse { context: path.display().to_string(), message: e.to_string() })?;
    }
    w.flush().map_err(|e| Error::Io { path: path.clone(), source: e })?;
    rec.output("error_cdf.csv")?;

    write_cluster_csv(&clusters, rec.output_path("clusters.csv"))?;
    rec.output("clusters.csv")?;
    Ok(())
}
