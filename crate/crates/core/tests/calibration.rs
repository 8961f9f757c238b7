mod common;

use common::*;
use mmtwin::calibration::*;
use mmtwin::channel::{synthesize, CirSpec};
use mmtwin::geometry::{SceneBuilder, Vec3};
use mmtwin::materials::{embedding_from_params, params_from_embedding, MaterialEmbedding, MaterialParams, ReadoutWeights};
use mmtwin::metrics::{tap_features, TapFeatures};
use mmtwin::tracer::{trace_paths, PropagationPath};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn feat(power: f64, delay_spread: f64) -> TapFeatures {
    TapFeatures { power, mean_tap: 0.0, delay_spread }
}

fn embeddings_for(params: &[MaterialParams], w: &ReadoutWeights) -> Vec<MaterialEmbedding> {
    params.iter().map(|p| embedding_from_params(*p, w).unwrap().0).collect()
}

/// Forward chain through the public pipeline, independent of the gradient code.
fn forward_loss(
    snaps: &[(&Snapshot, &[PropagationPath])],
    emb: &[MaterialEmbedding],
    w: &ReadoutWeights,
    scale: f64,
    cfg: &CalibrationConfig,
) -> f64 {
    let params: Vec<_> = emb.iter().map(|e| params_from_embedding(e, w).unwrap()).collect();
    let mut pred = Vec::new();
    let mut meas = Vec::new();
    for (s, paths) in snaps {
        let (_, cir) = synthesize(paths, &params, s.freq_hz, scale, Some(&cfg.cir)).unwrap();
        pred.push(tap_features(&cir.unwrap()).unwrap());
        meas.push(s.features(&cfg.cir).unwrap());
    }
    smape_loss(&pred, &meas, cfg.lambda_p, cfg.lambda_tau).unwrap()
}

#[test]
fn smape_examples() {
    let f = feat(2.0, 3e-9);
    assert_eq!(smape_loss(&[f], &[f], 1.0, 1.0).unwrap(), 0.0);
    let l = smape_loss(&[feat(1.0, 3e-9)], &[feat(3.0, 3e-9)], 1.0, 1.0).unwrap();
    assert!((l - 0.5).abs() < 1e-15);
    assert_eq!(smape_loss(&[feat(1.0, 0.0)], &[feat(1.0, 0.0)], 1.0, 1.0).unwrap(), 0.0);
    assert!(smape_loss(&[feat(0.0, 1.0)], &[feat(1.0, 1.0)], 1.0, 1.0).is_err());
    assert!(smape_loss(&[], &[], 1.0, 1.0).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let (a, b) = (feat(rng.gen_range(1e-9..1.0), rng.gen_range(0.0..1e-7)), feat(rng.gen_range(1e-9..1.0), rng.gen_range(0.0..1e-7)));
        let (lp, lt) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
        let l = smape_loss(&[a], &[b], lp, lt).unwrap();
        assert!((0.0..=lp + lt).contains(&l));
        assert!((l - smape_loss(&[b], &[a], lp, lt).unwrap()).abs() < 1e-15);
        let c = rng.gen_range(0.1..10.0);
        let scaled = smape_loss(&[feat(a.power * c, a.delay_spread)], &[feat(b.power * c, b.delay_spread)], lp, lt).unwrap();
        assert!((l - scaled).abs() < 1e-12);
    }
}

#[test]
fn config_validation() {
    assert!(CalibrationConfig::default().validate().is_ok());
    let bad = [
        CalibrationConfig { lambda_p: 0.0, lambda_tau: 0.0, ..Default::default() },
        CalibrationConfig { lambda_p: -1.0, ..Default::default() },
        CalibrationConfig { batch: Some(0), ..Default::default() },
        CalibrationConfig { learning_rate: 0.0, ..Default::default() },
        CalibrationConfig { ema_beta: 1.0, ..Default::default() },
    ];
    for c in bad {
        assert!(c.validate().is_err(), "{c:?}");
    }
}

fn gradient_fixture(seed: u64) -> (mmtwin::geometry::Scene, Snapshot, Vec<PropagationPath>, ReadoutWeights, Vec<MaterialEmbedding>) {
    let scene = shoebox();
    let cfg = trace_config(20_000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tx, rx) = random_link(&mut rng);
    let snap = synthetic_snapshot(&scene, &truth(), 0, tx, rx, &cfg);
    let paths = trace_paths(&scene, tx, rx, &cfg).unwrap();
    let w = ReadoutWeights::orthonormal(8, 11);
    let init: Vec<_> = truth()
        .iter()
        .map(|p| {
            MaterialParams::new(
                p.sigma * rng.gen_range(0.5..1.5),
                1.0 + (p.eps_r - 1.0) * rng.gen_range(0.5..1.5),
                p.scattering * rng.gen_range(0.5..1.5),
            )
        })
        .collect();
    let emb = embeddings_for(&init, &w);
    (scene, snap, paths, w, emb)
}

#[test]
fn gradients_match_central_differences() {
    let cfg = CalibrationConfig::default();
    for seed in 0..3 {
        let (_, snap, paths, w, emb) = gradient_fixture(seed);
        let batch = [(&snap, paths.as_slice())];
        let g = gradients(&batch, &emb, &w, 1.0, &cfg).unwrap();
        let l0 = forward_loss(&batch, &emb, &w, 1.0, &cfg);
        assert!((g.loss - l0).abs() < 1e-14, "{} vs {}", g.loss, l0);
        let h = 1e-5;
        let gmax = g.d_embeddings.iter().flat_map(|d| d.iter()).fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(gmax > 0.0);
        for r in 0..emb.len() {
            for k in 0..w.dim() {
                let mut plus = emb.clone();
                let mut minus = emb.clone();
                plus[r].v[k] += h;
                minus[r].v[k] -= h;
                let fd = (forward_loss(&batch, &plus, &w, 1.0, &cfg) - forward_loss(&batch, &minus, &w, 1.0, &cfg)) / (2.0 * h);
                let a = g.d_embeddings[r][k];
                let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6 * gmax);
                assert!(err < 1e-4, "seed {seed} region {r} coord {k}: analytic {a:e} vs fd {fd:e}");
            }
        }
        // scale derivative
        let fd = (forward_loss(&batch, &emb, &w, 1.0 + h, &cfg) - forward_loss(&batch, &emb, &w, 1.0 - h, &cfg)) / (2.0 * h);
        assert!((g.d_scale - fd).abs() <= 1e-4 * g.d_scale.abs().max(fd.abs()).max(1e-8), "{} vs {fd}", g.d_scale);
    }
}

#[test]
fn untouched_region_has_zero_gradient() {
    // region 3 sits outside the room and is never reached
    let mut b = SceneBuilder::new();
    b.add_box(Vec3::zeros(), Vec3::new(6.0, 4.0, 3.0), [0, 0, 0, 0, 1, 2]);
    b.add_triangle(Vec3::new(0.0, 0.0, -5.0), Vec3::new(1.0, 0.0, -5.0), Vec3::new(0.0, 1.0, -5.0), 3);
    let (scene, _) = b.build().unwrap();
    let cfg = trace_config(20_000);
    let mut params = truth();
    params.push(MaterialParams::new(0.5, 4.0, 0.2));
    let snap = synthetic_snapshot(&scene, &params, 0, Vec3::new(1.0, 1.0, 1.5), Vec3::new(5.0, 3.0, 1.2), &cfg);
    let paths = trace_paths(&scene, snap.tx, snap.rx, &cfg).unwrap();
    let w = ReadoutWeights::orthonormal(8, 1);
    params[0].eps_r = 8.0;
    let g = gradients(&[(&snap, paths.as_slice())], &embeddings_for(&params, &w), &w, 1.0, &CalibrationConfig::default()).unwrap();
    assert!(g.d_embeddings[3].iter().all(|&x| x == 0.0));
    assert!(g.d_embeddings[0].norm() > 0.0);
}

#[test]
fn loss_weight_linearity() {
    let (_, snap, paths, w, emb) = gradient_fixture(4);
    let batch = [(&snap, paths.as_slice())];
    let one = CalibrationConfig { lambda_p: 1.0, lambda_tau: 0.0, ..Default::default() };
    let two = CalibrationConfig { lambda_p: 2.0, lambda_tau: 0.0, ..Default::default() };
    let g1 = gradients(&batch, &emb, &w, 1.0, &one).unwrap();
    let g2 = gradients(&batch, &emb, &w, 1.0, &two).unwrap();
    for (a, b) in g1.d_embeddings.iter().zip(&g2.d_embeddings) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(2.0 * x, *y);
        }
    }
    assert_eq!(2.0 * g1.loss, g2.loss);
}

#[test]
fn small_gradient_steps_descend() {
    let scene = shoebox();
    let tcfg = trace_config(10_000);
    let cfg = CalibrationConfig::default();
    let w = ReadoutWeights::orthonormal(8, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let links: Vec<_> = (0..4).map(|_| random_link(&mut rng)).collect();
    let snaps: Vec<_> = links.iter().enumerate().map(|(i, (t, r))| synthetic_snapshot(&scene, &truth(), i, *t, *r, &tcfg)).collect();
    let paths: Vec<_> = snaps.iter().map(|s| trace_paths(&scene, s.tx, s.rx, &tcfg).unwrap()).collect();
    let batch: Vec<_> = snaps.iter().zip(&paths).map(|(s, p)| (s, p.as_slice())).collect();
    let mut passed = 0;
    for _ in 0..100 {
        let init: Vec<_> = truth()
            .iter()
            .map(|p| {
                MaterialParams::new(
                    p.sigma * rng.gen_range(0.3..3.0),
                    1.0 + (p.eps_r - 1.0) * rng.gen_range(0.3..3.0),
                    (p.scattering * rng.gen_range(0.3..2.0)).min(0.95),
                )
            })
            .collect();
        let mut emb = embeddings_for(&init, &w);
        let g = gradients(&batch, &emb, &w, 1.0, &cfg).unwrap();
        let norm: f64 = g.d_embeddings.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt();
        let lr = 1e-4 / norm.max(1e-12);
        for (e, d) in emb.iter_mut().zip(&g.d_embeddings) {
            e.v -= d * lr;
        }
        if forward_loss(&batch, &emb, &w, 1.0, &cfg) <= g.loss {
            passed += 1;
        }
    }
    assert!(passed >= 99, "{passed}/100 steps descended");
}

#[test]
fn true_initialisation_takes_no_steps() {
    let scene = shoebox();
    let tcfg = trace_config(10_000);
    let w = ReadoutWeights::orthonormal(8, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let snaps: Vec<_> = (0..3)
        .map(|i| {
            let (t, r) = random_link(&mut rng);
            synthetic_snapshot(&scene, &truth(), i, t, r, &tcfg)
        })
        .collect();
    let out = calibrate(&scene, &w, &embeddings_for(&truth(), &w), &snaps, &CalibrationConfig::default(), &tcfg).unwrap();
    assert_eq!(out.steps, 0);
    assert!(out.converged);
    assert_eq!(out.history.len(), 1);
}

#[test]
fn calibration_reduces_loss_and_stays_physical() {
    let scene = shoebox();
    let tcfg = trace_config(10_000);
    let w = ReadoutWeights::orthonormal(8, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let snaps: Vec<_> = (0..6)
        .map(|i| {
            let (t, r) = random_link(&mut rng);
            synthetic_snapshot(&scene, &truth(), i, t, r, &tcfg)
        })
        .collect();
    let init: Vec<_> = truth().iter().map(|p| MaterialParams::new(p.sigma * 1.4, p.eps_r * 0.7, p.scattering * 1.3)).collect();
    for optimizer in [OptimizerKind::Adam, OptimizerKind::Gd] {
        let cfg = CalibrationConfig {
            max_iterations: 60,
            optimizer,
            learning_rate: if optimizer == OptimizerKind::Gd { 1.0 } else { 1e-2 },
            batch: Some(4),
            ..Default::default()
        };
        let out = calibrate(&scene, &w, &embeddings_for(&init, &w), &snaps, &cfg, &tcfg).unwrap();
        assert!(out.params.iter().all(MaterialParams::is_physical));
        assert!(out.final_loss() < out.history[0].loss, "{optimizer:?}: {} -> {}", out.history[0].loss, out.final_loss());
        assert!((out.scale.scale - 1.0).abs() < 1e-9);
        let again = calibrate(&scene, &w, &embeddings_for(&init, &w), &snaps, &cfg, &tcfg).unwrap();
        assert_eq!(out.history, again.history);
    }
    assert!(calibrate(&scene, &w, &embeddings_for(&init, &w), &[], &CalibrationConfig::default(), &tcfg).is_err());
}

#[test]
fn snapshot_csv_round_trip() {
    let scene = shoebox();
    let tcfg = trace_config(5_000);
    let mut s = synthetic_snapshot(&scene, &truth(), 4, Vec3::new(1.0, 1.0, 1.0), Vec3::new(4.0, 2.0, 1.5), &tcfg);
    let pose_only = Snapshot::new(9, Vec3::new(2.0, 2.0, 2.0), Vec3::new(3.0, 1.0, 1.0), 28e9, Vec::new());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snaps.csv");
    write_snapshots_csv(&[s.clone(), pose_only.clone()], &path).unwrap();
    let back = read_snapshots_csv(&path).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[1], pose_only);
    assert_eq!(back[0].mpcs.len(), s.mpcs.len());
    assert_eq!(back[0].los_index(), s.los_index());
    let spec = CirSpec::default();
    let (a, b) = (s.features(&spec).unwrap(), back[0].features(&spec).unwrap());
    assert!((a.power - b.power).abs() < 1e-9 * a.power);

    s.phased = false;
    write_snapshots_csv(&[s], &path).unwrap();
    assert!(!read_snapshots_csv(&path).unwrap()[0].phased);

    std::fs::write(&path, "snapshot,tx_x,tx_y,tx_z,rx_x,rx_y,rx_z,freq_ghz,delay_ns,aod_az_deg,aod_el_deg,aoa_az_deg,aoa_el_deg,pathloss_db,phase_deg,kind\n0,0,0,0,1,1,1,60.5,1,0,0,0,0,80,,\n0,0,0,0,1,1,2,60.5,1,0,0,0,0,80,,\n").unwrap();
    assert!(read_snapshots_csv(&path).is_err());
}
