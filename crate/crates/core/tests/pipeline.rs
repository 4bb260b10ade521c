use inwlr::metrics::{clean_foreground, iou, mssim_per_frame, support};
use inwlr::pipeline::{build_weights, initialize, run, run_batch, run_partitioned, PipelineConfig};
use inwlr::selector::{epsilon1, score_frames, select_background_frames, SelectionConfig};
use inwlr::synth::{generate, SynthSpec};
use inwlr::{BatchPartition, FrameGeometry, Rank, VideoSequence, WlrConfig};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn static_video(n: usize) -> (VideoSequence, DMatrix<f64>) {
    let g = FrameGeometry::new(24, 20).unwrap();
    let frame = DMatrix::from_fn(g.pixels(), 1, |i, _| 0.2 + 0.6 * ((i * 37 % 101) as f64 / 101.0));
    let truth = DMatrix::from_fn(g.pixels(), n, |i, _| frame[i]);
    (VideoSequence::new(truth.clone(), g).unwrap(), truth)
}

#[test]
fn single_batch_uses_own_svt_split() {
    let out = generate(&SynthSpec::default()).unwrap();
    let cfg = PipelineConfig {
        batches: 1,
        ..PipelineConfig::default()
    };
    let res = run(&out.video, &cfg).unwrap();
    assert_eq!(res.batches.len(), 1);
    let b = &res.batches[0];
    assert_eq!(b.columns, 0..60);
    assert_eq!(b.k_used.0, 3);

    // prior indices come from scoring the SVT foreground of the same batch
    let split = initialize(out.video.data(), cfg.tau_rel).unwrap();
    let (_, _, chosen) = select_background_frames(&split.foreground, &cfg.selection).unwrap();
    assert_eq!(b.prior_indices, chosen);
}

#[test]
fn static_rank_one_video_is_recovered() {
    let (video, truth) = static_video(30);
    let res = run(&video, &PipelineConfig::default()).unwrap();
    let ssim = mssim_per_frame(&res.background_full, &truth, video.geometry()).unwrap();
    let mean = ssim.iter().sum::<f64>() / ssim.len() as f64;
    assert!(mean >= 0.99, "MSSIM {mean}");
}

#[test]
fn problem_width_is_bounded() {
    let spec = SynthSpec::default().with_frames(120);
    let out = generate(&spec).unwrap();
    for p in [2, 4, 6] {
        let cfg = PipelineConfig {
            batches: p,
            ..PipelineConfig::default()
        };
        let res = run(&out.video, &cfg).unwrap();
        let bound = 120usize.div_ceil(p) + cfg.selection.k_max;
        assert!(res.max_problem_width() <= bound);
        assert!(res.batches.iter().all(|b| b.k_used.0 <= cfg.selection.k_max));
    }
}

#[test]
fn deterministic_given_seed() {
    let out = generate(&SynthSpec::default()).unwrap();
    let cfg = PipelineConfig {
        seed: 11,
        ..PipelineConfig::default()
    };
    let a = run(&out.video, &cfg).unwrap();
    let b = run(&out.video, &cfg).unwrap();
    assert_eq!(a.background_full, b.background_full);
    assert_eq!(a.foreground_full, b.foreground_full);
    for (x, y) in a.batches.iter().zip(&b.batches) {
        assert_eq!(x.objective_trace, y.objective_trace);
        assert_eq!(x.prior_indices, y.prior_indices);
    }
}

#[test]
fn background_plus_foreground_reconstructs_input() {
    let out = generate(&SynthSpec::default()).unwrap();
    let res = run(&out.video, &PipelineConfig::default()).unwrap();
    let a = out.video.data();
    let tol = 4.0 * f64::EPSILON * a.amax();
    assert!((&res.background_full + &res.foreground_full - a).amax() <= tol);
}

#[test]
fn unequal_partition() {
    let out = generate(&SynthSpec::default()).unwrap();
    let part = BatchPartition::from_sizes(&[25, 15, 20]).unwrap();
    let res = run_partitioned(&out.video, &part, &PipelineConfig::default()).unwrap();
    let cols: Vec<_> = res.batches.iter().map(|b| b.columns.clone()).collect();
    assert_eq!(cols, vec![0..25, 25..40, 40..60]);
    let bad = BatchPartition::from_sizes(&[25, 15]).unwrap();
    assert!(run_partitioned(&out.video, &bad, &PipelineConfig::default()).is_err());
}

#[test]
fn more_batches_than_frames_is_rejected() {
    let (video, _) = static_video(4);
    let cfg = PipelineConfig {
        batches: 5,
        ..PipelineConfig::default()
    };
    assert!(matches!(run(&video, &cfg), Err(inwlr::Error::Config(_))));
}

#[test]
fn synthetic_batch_support_overlaps_truth() {
    // prior: object-free frames; batch: frames that all contain the object
    let out = generate(&SynthSpec::default()).unwrap();
    let a = out.video.data();
    let prior = a.select_columns([10usize, 13, 16].iter());
    let batch = a.columns(20, 10).into_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let w = build_weights(a.nrows(), 3, 10.0, 100.0, &mut rng).unwrap();
    let res = run_batch(&prior, &batch, &w, Rank(3), &WlrConfig::default()).unwrap();
    let eps1 = epsilon1(&res.foreground, 2.0).unwrap();
    let pred = support(&clean_foreground(&res.foreground, eps1));
    let truth = out.masks.columns(20, 10).into_owned();
    let score = iou(pred.iter(), truth.iter());
    assert!(score >= 0.7, "IoU {score}");
}

#[test]
fn frames_without_object_score_lowest() {
    let mut spec = SynthSpec::default().with_frames(10);
    spec.trajectory = (0..10)
        .map(|t| if t == 3 || t == 7 { None } else { Some((10 + t, 5 * t)) })
        .collect();
    let out = generate(&spec).unwrap();
    let split = initialize(out.video.data(), 0.05).unwrap();
    let eps1 = epsilon1(&split.foreground, 2.0).unwrap();
    let scores = score_frames(&split.foreground, eps1);
    let (_, _, chosen) = select_background_frames(
        &split.foreground,
        &SelectionConfig {
            k_max: 2,
            ..SelectionConfig::default()
        },
    )
    .unwrap();
    assert_eq!(chosen, vec![3, 7]);
    let worst_clean = scores[3].score.max(scores[7].score);
    for s in scores.iter().filter(|s| s.index != 3 && s.index != 7) {
        assert!(s.score > worst_clean, "frame {} scored {}", s.index, s.score);
    }
}

#[test]
fn large_frame_run_fits_width_bound() {
    // 600 frames at 144x176 in six batches of 100
    let g = FrameGeometry::new(144, 176).unwrap();
    let spec = SynthSpec {
        geometry: g,
        object_size: (20, 20),
        ..SynthSpec::default()
    }
    .with_frames(600);
    let out = generate(&spec).unwrap();
    let cfg = PipelineConfig {
        batches: 6,
        ..PipelineConfig::default()
    };
    let res = run(&out.video, &cfg).unwrap();
    assert_eq!(res.batches.len(), 6);
    assert!(res.max_problem_width() <= 100 + cfg.selection.k_max);
    assert_eq!(res.background_full.shape(), (144 * 176, 600));
}
