//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{bbox, bounce_sequence, brute_force_min_cost, chi2_4_quantile, fixture, run_cli};
use mottrack::assignment::{solve, CostMatrix};
use mottrack::association::{GateConfig, CHI2_95_4DOF};
use mottrack::kalman::{KalmanFilter, Matrix8};
use mottrack::metrics::{evaluate_sequence, idf1, prepare_frames, MetricRow};
use mottrack::model::{Detection, Embedding, Measurement};
use mottrack::motio::{
    encode_embeddings, parse_config, parse_embeddings, read_config, read_detections,
    read_embeddings, read_ground_truth, read_results, write_config, write_detections,
    write_embeddings, write_ground_truth, write_results, Config, DetectionSet, EmbeddingRecord,
    EmbeddingSidecar, GroundTruth, GtRecord,
};
use mottrack::tracker::{run_sequence, FrameOutput, TrackRecord, TrackerConfig};
use mottrack::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn assignment_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut worst_real = 0.0f64;
    for k in 0..500 {
        let rows = rng.random_range(1..=7usize);
        let cols = rng.random_range(1..=7usize);
        let integer = k % 2 == 0;
        let data: Vec<Vec<f64>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| {
                        if integer {
                            f64::from(rng.random_range(0..20u32))
                        } else {
                            rng.random_range(-50.0..50.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let costs = CostMatrix::from_rows(&data);
        let a = solve(&costs);
        ensure(a.matches.len() == rows.min(cols), || {
            format!("matrix {k}: {} pairs for {rows}x{cols}", a.matches.len())
        })?;
        let got = a.total_cost(&costs);
        let want = brute_force_min_cost(&data);
        if integer {
            ensure(got == want, || {
                format!("matrix {k}: cost {got} vs optimum {want}")
            })?;
        } else {
            worst_real = worst_real.max((got - want).abs());
            ensure((got - want).abs() <= 1e-9, || {
                format!("matrix {k}: cost {got} vs optimum {want}")
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "500 matrices up to 7x7 optimal (integer exact, real max error {worst_real:.1e}) in {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn kalman_invariants() -> Outcome {
    let kf = KalmanFilter::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut worst_eig = f64::INFINITY;
    let check = |p: &Matrix8, what: &str, seq: usize| -> Result<f64, String> {
        let scale = p.amax().max(1.0);
        let asym = (p - p.transpose()).amax();
        ensure(asym <= 1e-12 * scale, || {
            format!("sequence {seq}: {what} asymmetry {asym}")
        })?;
        let sym = (p + p.transpose()) * 0.5;
        let min = sym.symmetric_eigenvalues().min();
        ensure(min >= -1e-9, || {
            format!("sequence {seq}: {what} eigenvalue {min}")
        })?;
        Ok(min)
    };
    for seq in 0..1000 {
        let h = rng.random_range(10.0..400.0);
        let mut z = Measurement::new(
            rng.random_range(0.0..1920.0),
            rng.random_range(0.0..1080.0),
            rng.random_range(0.2..1.5),
            h,
        );
        let mut state = kf.initiate(&z);
        worst_eig = worst_eig.min(check(&state.covariance, "initiate", seq)?);
        for _ in 0..20 {
            state = kf.predict(&state);
            worst_eig = worst_eig.min(check(&state.covariance, "predict", seq)?);

            let (projected, _) = kf.project(&state);
            let same = kf.update(&state, &projected).map_err(|e| e.to_string())?;
            let drift = (same.mean.0 - state.mean.0).amax();
            ensure(drift <= 1e-9, || {
                format!("sequence {seq}: zero-innovation drift {drift}")
            })?;

            let step = z[3] * 0.05;
            z += Measurement::new(
                rng.random_range(-step..step),
                rng.random_range(-step..step),
                rng.random_range(-0.02..0.02),
                rng.random_range(-step..step),
            );
            z[2] = z[2].max(0.1);
            z[3] = z[3].max(5.0);
            state = kf.update(&state, &z).map_err(|e| e.to_string())?;
            worst_eig = worst_eig.min(check(&state.covariance, "update", seq)?);
        }
    }
    Ok(format!(
        "1000 sequences x 20 steps symmetric PSD (min eigenvalue {worst_eig:.3e}), zero innovation leaves mean fixed"
    ))
}

fn gate_constant() -> Outcome {
    let q = chi2_4_quantile(0.95);
    let configured = GateConfig::default().gating_chi2_threshold;
    ensure(configured == CHI2_95_4DOF, || {
        format!("default gate {configured}")
    })?;
    ensure((configured - q).abs() <= 1e-3, || {
        format!("configured {configured} vs quantile {q}")
    })?;
    Ok(format!(
        "configured {configured} vs numeric 0.95 quantile {q:.6}"
    ))
}

fn evaluate_files(gt: &Path, res: &Path) -> Result<mottrack::metrics::MetricsSummary, String> {
    let gt = read_ground_truth(gt).map_err(|e| e.to_string())?;
    let hyp = read_results(res).map_err(|e| e.to_string())?;
    evaluate_sequence(&gt, &hyp, 0.5).map_err(|e| e.to_string())
}

fn metrics_toy_oracle() -> Outcome {
    let toy = evaluate_files(
        &fixture("metrics_toy/toy5_gt.txt"),
        &fixture("metrics_toy/toy5_results.txt"),
    )?;
    let counts = (
        toy.num_gt,
        toy.false_negatives,
        toy.false_positives,
        toy.id_switches,
    );
    ensure(counts == (10, 2, 1, 1), || format!("toy counts {counts:?}"))?;
    let row = MetricRow::from_summary("toy", &toy);
    ensure(row.values[0] == 60.0 && toy.mota() == 0.6, || {
        format!("toy MOTA {}", toy.mota())
    })?;

    let gt = read_ground_truth(&fixture("metrics_toy/split_gt.txt")).map_err(|e| e.to_string())?;
    let hyp = read_results(&fixture("metrics_toy/split_results.txt")).map_err(|e| e.to_string())?;
    let frames = prepare_frames(&gt, &hyp, 0.5).map_err(|e| e.to_string())?;
    let id = idf1(&frames, 0.5).map_err(|e| e.to_string())?;
    ensure(
        (id.idtp, id.idfp, id.idfn) == (6, 4, 4) && id.idf1() == 0.6,
        || format!("split identity {id:?}"),
    )?;
    Ok("toy5 MOTA = 60.00 (FN 2, FP 1, IDs 1 of 10); split identity IDF1 = 0.60 (IDTP 6)".into())
}

fn perfect_score() -> Outcome {
    for rel in ["synth50/gt.txt", "metrics_toy/toy5_gt.txt"] {
        let s = evaluate_files(&fixture(rel), &fixture(rel))?;
        let row = MetricRow::from_summary("gt", &s);
        let want = [100.0, 100.0, 100.0, 0.0, 0.0, 100.0, 0.0, 0.0];
        ensure(row.values == want, || format!("{rel}: {:?}", row.values))?;
    }
    Ok("gt scored against itself: MOTA/MOTP/IDF1 100.00, IDs/FP/FN 0, MT 100%, ML 0%".into())
}

fn lifecycle() -> Outcome {
    let (with_app, gt) = bounce_sequence(true);
    let out = run_sequence(&with_app, &TrackerConfig::default()).map_err(|e| e.to_string())?;
    let s = evaluate_sequence(&gt, &out, 0.5).map_err(|e| e.to_string())?;
    let ids: std::collections::BTreeSet<u64> = out
        .iter()
        .flat_map(|o| o.records.iter().map(|r| r.id))
        .collect();
    ensure(s.id_switches == 0 && ids.len() == 2, || {
        format!("appearance run: {} switches, ids {ids:?}", s.id_switches)
    })?;

    let (no_app, _) = bounce_sequence(false);
    let tight = TrackerConfig {
        gate: GateConfig {
            max_iou_distance: 0.3,
            ..GateConfig::default()
        },
        ..TrackerConfig::default()
    };
    let sort_out = run_sequence(&no_app, &tight).map_err(|e| e.to_string())?;
    let sort = evaluate_sequence(&gt, &sort_out, 0.5).map_err(|e| e.to_string())?;
    ensure(sort.id_switches >= 1, || {
        "IoU-only run kept both identities".into()
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for k in 0..3 {
        let path = dir.path().join(format!("run{k}.txt"));
        let out = run_sequence(&with_app, &TrackerConfig::default()).map_err(|e| e.to_string())?;
        write_results(&path, &out).map_err(|e| e.to_string())?;
        files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(files.windows(2).all(|w| w[0] == w[1]), || {
        "result files differ between runs".into()
    })?;
    Ok(format!(
        "bounce: appearance keeps 2 ids with 0 switches; IoU-only with ceiling 0.3 gives {} switches; 3 runs byte-identical",
        sort.id_switches
    ))
}

fn format_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let err = |e: Error| e.to_string();

    let mut dets = DetectionSet::default();
    let mut gt = GroundTruth::default();
    let mut outputs = Vec::new();
    let mut records = Vec::new();
    for frame in 1..=20u32 {
        let n = rng.random_range(0..6usize);
        let mut frame_dets = Vec::new();
        let mut frame_gt = Vec::new();
        let mut frame_out = Vec::new();
        for i in 0..n {
            let b = bbox(
                rng.random_range(-50.0..1900.0),
                rng.random_range(-50.0..1000.0),
                rng.random_range(1.0..200.0),
                rng.random_range(1.0..400.0),
            );
            frame_dets
                .push(Detection::new(frame, b, rng.random_range(0.0..1.0)).with_source_index(i));
            frame_gt.push(GtRecord {
                frame,
                id: i as u64 + 1,
                bbox: b,
                flag: 1,
                class: 1,
                visibility: rng.random_range(0.0..1.0),
            });
            frame_out.push(TrackRecord {
                id: i as u64 + 1,
                bbox: b,
            });
            let v: Vec<f32> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
            records.push(EmbeddingRecord {
                frame,
                det_index: i as u32,
                vector: Embedding::normalize(&v).map_err(err)?,
            });
        }
        if n > 0 {
            dets.frames.insert(frame, frame_dets);
            gt.frames.insert(frame, frame_gt);
            outputs.push(FrameOutput {
                frame,
                records: frame_out,
            });
        }
    }

    let p = dir.path().join("det.txt");
    write_detections(&p, &dets).map_err(err)?;
    ensure(read_detections(&p).map_err(err)? == dets, || {
        "detections differ".into()
    })?;

    let p = dir.path().join("gt.txt");
    write_ground_truth(&p, &gt).map_err(err)?;
    ensure(read_ground_truth(&p).map_err(err)? == gt, || {
        "ground truth differs".into()
    })?;

    let p = dir.path().join("res.txt");
    write_results(&p, &outputs).map_err(err)?;
    let back = read_results(&p).map_err(err)?;
    let mut worst = 0.0f64;
    for (a, b) in outputs.iter().zip(&back) {
        for (x, y) in a.records.iter().zip(&b.records) {
            ensure(x.id == y.id, || "result ids differ".into())?;
            for (u, v) in [
                (x.bbox.left(), y.bbox.left()),
                (x.bbox.top(), y.bbox.top()),
                (x.bbox.width(), y.bbox.width()),
                (x.bbox.height(), y.bbox.height()),
            ] {
                worst = worst.max((u - v).abs());
            }
        }
    }
    ensure(back.len() == outputs.len() && worst <= 0.005 + 1e-9, || {
        format!("results error {worst}")
    })?;

    let sidecar = EmbeddingSidecar { dim: 32, records };
    let p = dir.path().join("emb.bin");
    write_embeddings(&p, &sidecar).map_err(err)?;
    let emb = read_embeddings(&p).map_err(err)?;
    ensure(emb == sidecar, || "sidecar differs".into())?;

    let mut config = Config::default();
    config.tracker.max_age = 45;
    config.tracker.gate.max_cosine_distance = 0.35;
    config.tracker.noise.std_weight_velocity = 1.0 / 120.0;
    let p = dir.path().join("tracker.cfg");
    write_config(&p, &config).map_err(err)?;
    ensure(read_config(&p).map_err(err)? == config, || {
        "config differs".into()
    })?;

    // error classes
    let bad = dir.path().join("bad.txt");
    std::fs::write(
        &bad,
        "1,-1,1,1,5,5,0.9,-1,-1,-1\n1,-1,1,x,5,5,0.9,-1,-1,-1\n",
    )
    .map_err(|e| e.to_string())?;
    ensure(
        matches!(read_detections(&bad), Err(Error::Parse { line: 2, .. })),
        || "parse error class".into(),
    )?;
    std::fs::write(&bad, "1,3,0,0,5,5,1,1,1\n1,3,1,1,5,5,1,1,1\n").map_err(|e| e.to_string())?;
    ensure(
        matches!(read_ground_truth(&bad), Err(Error::InputFormat(_))),
        || "duplicate gt class".into(),
    )?;
    ensure(
        matches!(parse_config("n_init = 0"), Err(Error::Config { .. })),
        || "config range class".into(),
    )?;
    ensure(
        matches!(parse_config("colour = red"), Err(Error::Config { .. })),
        || "config key class".into(),
    )?;
    let bytes = encode_embeddings(&sidecar).map_err(err)?;
    let path = Path::new("emb.bin");
    let mut wrong_magic = bytes.clone();
    wrong_magic[0] = b'N';
    ensure(
        matches!(
            parse_embeddings(&wrong_magic, path),
            Err(Error::Format { .. })
        ),
        || "magic class".into(),
    )?;
    ensure(
        matches!(
            parse_embeddings(&bytes[..bytes.len() - 3], path),
            Err(Error::Format { .. })
        ),
        || "truncation class".into(),
    )?;
    let mut half = bytes.clone();
    let second = 16 + (8 + 4 * 32) + 8;
    for k in 0..32 {
        let x = f32::from_le_bytes(half[second + 4 * k..second + 4 * k + 4].try_into().unwrap());
        half[second + 4 * k..second + 4 * k + 4].copy_from_slice(&(x * 0.5).to_le_bytes());
    }
    ensure(
        matches!(
            parse_embeddings(&half, path),
            Err(Error::Data { record: 1, .. })
        ),
        || "norm gate class".into(),
    )?;

    Ok(format!(
        "det/gt/sidecar/config exact, results within {worst:.4} px; parse, input-format, config, format and data errors raised"
    ))
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let results = dir.path().join("synth50_results.txt");
    let csv = dir.path().join("synth50.csv");
    let s = |p: &Path| p.to_str().unwrap().to_string();

    let start = Instant::now();
    let (code, _, stderr) = run_cli(&[
        "track",
        "--detections",
        &s(&fixture("synth50/det.txt")),
        "--embeddings",
        &s(&fixture("synth50/emb.bin")),
        "--seqinfo",
        &s(&fixture("synth50/seqinfo.ini")),
        "--output",
        &s(&results),
    ]);
    ensure(code == 0, || format!("track exited {code}: {stderr}"))?;
    let (code, _, stderr) = run_cli(&[
        "evaluate",
        "--gt",
        &s(&fixture("synth50/gt.txt")),
        "--results",
        &s(&results),
        "--csv",
        &s(&csv),
        "--name",
        "synth50",
    ]);
    ensure(code == 0, || format!("evaluate exited {code}: {stderr}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;

    let got = std::fs::read_to_string(&csv).map_err(|e| e.to_string())?;
    let want =
        std::fs::read_to_string(fixture("synth50/expected.csv")).map_err(|e| e.to_string())?;
    ensure(got == want, || {
        format!("row mismatch:\n{got}expected:\n{want}")
    })?;
    let row = got.lines().nth(1).unwrap_or_default().to_string();
    Ok(format!("{row} in {:.2}s", elapsed.as_secs_f64()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("assignment oracle", assignment_oracle),
        ("kalman invariants", kalman_invariants),
        ("gate constant", gate_constant),
        ("metrics toy oracle", metrics_toy_oracle),
        ("perfect-score identity", perfect_score),
        ("lifecycle properties", lifecycle),
        ("format round-trips", format_round_trips),
        ("end-to-end pipeline", end_to_end),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
