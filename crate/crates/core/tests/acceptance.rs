//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use mcstain::colorize::{collapse_output, expand_target, fit_adversarial, LinearBackend, TrainConfig, TrainingPair};
use mcstain::features::{
    angular_distance, cluster_centroid, kmeans_fit, kmeans_fit_detailed, learning_subset, FeatureSet, KMeansConfig,
    LearnMeta,
};
use mcstain::formats::{
    decode_cube, decode_feature_set, decode_stack, encode_cube, encode_feature_set, encode_stack, write_loss_curves,
};
use mcstain::imaging::{patchify, stitch, ChannelLabel, Plane, RgbImage};
use mcstain::metrics::{psnr, psnr_from_rmse};
use mcstain::phantom::{orthogonal_spec, render_phantom, shape_coded_spec, three_shape_spec, BlobLayout, PhantomSpec};
use mcstain::study::{channel_array, enumerate_combinations, run_c_study, run_k_study, CombinationId, StudyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

// Published (PSNR dB, RMSE) score pairs and the agreement tolerance.
const PUBLISHED_SCORES: [(f64, f64); 7] = [
    (22.92, 18.22),
    (23.03, 17.99),
    (22.99, 18.06),
    (22.50, 19.13),
    (22.40, 19.35),
    (19.92, 25.74),
    (17.83, 32.71),
];
const PSNR_TOL_DB: f64 = 0.01;
const NOISELESS_RECOVERY: f64 = 1e-6;
const NOISY_RECOVERY: f64 = 0.05;
const NOISY_SNR_DB: f64 = 20.0;
const NOISY_TRIALS: u64 = 100;
const NOISY_MIN_PASSES: usize = 95;
const INVARIANCE_CASES: usize = 1000;
const SCALE_TOL: f64 = 1e-12;
const PINV_TOL: f64 = 1e-6;
const STITCH_TOL: f64 = 1e-6;
const MIN_BEST_SSIM: f64 = 0.95;
const EXPECTED_K: usize = 3;
const LEARNING_RATE: f64 = 0.0002;
const MAX_EPOCHS: usize = 200;

type Check = std::result::Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// `sin` of the angle between two vectors via the Lagrange identity,
/// independent of the library's cosine-based path.
fn sin_angle(a: &[f64], b: &[f64]) -> f64 {
    let (mut aa, mut bb, mut cross) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        aa += a[i] * a[i];
        bb += b[i] * b[i];
        for j in 0..i {
            let t = a[i] * b[j] - a[j] * b[i];
            cross += t * t;
        }
    }
    (cross / (aa * bb)).sqrt().min(1.0)
}

/// Largest over the basis of the distance to its nearest centroid, requiring
/// a one-to-one match.
fn recovery_error(basis: &[Vec<f64>], centroids: &[Vec<f64>]) -> f64 {
    let mut used = vec![false; centroids.len()];
    let mut worst: f64 = 0.0;
    for b in basis {
        let (j, d) = centroids
            .iter()
            .enumerate()
            .map(|(j, c)| (j, sin_angle(b, c)))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if used[j] {
            return f64::INFINITY;
        }
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn c1_table_arithmetic() -> Check {
    for (p, r) in PUBLISHED_SCORES {
        let ours = psnr_from_rmse(r);
        ensure!((ours - p).abs() <= PSNR_TOL_DB, "RMSE {r}: {ours:.4} dB vs printed {p}");
    }
    // The image-level metric follows the same definition: a uniform offset d
    // gives RMSE d.
    let a = RgbImage::filled(8, 8, [100, 100, 100]);
    let b = RgbImage::filled(8, 8, [118, 118, 118]);
    let got = psnr(&a, &b).map_err(|e| e.to_string())?;
    ensure!((got - 20.0 * (255.0f64 / 18.0).log10()).abs() < 1e-12, "image PSNR {got}");
    Ok(())
}

fn c2_combination_counts() -> Check {
    let array = |k: u8| {
        let mut v = vec![ChannelLabel::Nr532, ChannelLabel::Nr266, ChannelLabel::R266];
        v.extend((1..=k).map(ChannelLabel::Feature));
        v
    };
    let n63 = enumerate_combinations(&array(3)).map_err(|e| e.to_string())?.len();
    let n31 = enumerate_combinations(&array(2)).map_err(|e| e.to_string())?.len();
    ensure!(n63 == 63 && n31 == 31, "got {n63} and {n31}");
    Ok(())
}

fn c3_feature_recovery() -> Check {
    let cfg = KMeansConfig::default();
    for k in [2, 3, 4] {
        let p = render_phantom(&orthogonal_spec(k, 96, 96, k as u64)).map_err(|e| e.to_string())?;
        let subset = learning_subset(&p.cube, 1.0, 0).map_err(|e| e.to_string())?;
        let k_fit = k.max(cfg.k_min);
        let fs = kmeans_fit(&subset, k_fit, &cfg).map_err(|e| e.to_string())?;
        let err = recovery_error(&p.basis, fs.centroids());
        ensure!(err < NOISELESS_RECOVERY, "K = {k}: noiseless recovery error {err:e}");
    }
    let mut passes = 0;
    for seed in 0..NOISY_TRIALS {
        let spec = PhantomSpec {
            noise_snr_db: NOISY_SNR_DB,
            layout: BlobLayout { max_blobs: 12, min_radius: 4.0, max_radius: 7.0, spacing: 14.0, attempts: 4000 },
            ..orthogonal_spec(3, 48, 48, 1000 + seed)
        };
        let p = render_phantom(&spec).map_err(|e| e.to_string())?;
        let subset = learning_subset(&p.cube, 1.0, seed).map_err(|e| e.to_string())?;
        let fs = kmeans_fit(&subset, 3, &KMeansConfig { seed, ..cfg }).map_err(|e| e.to_string())?;
        if recovery_error(&p.basis, fs.centroids()) < NOISY_RECOVERY {
            passes += 1;
        }
    }
    ensure!(passes >= NOISY_MIN_PASSES, "{passes}/{NOISY_TRIALS} noisy trials recovered");
    println!("    noisy recovery: {passes}/{NOISY_TRIALS}");
    Ok(())
}

fn c4_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..INVARIANCE_CASES {
        let n = rng.random_range(2..12);
        let x = random_vec(&mut rng, n);
        let y = random_vec(&mut rng, n);
        let base = angular_distance(&x, &y).map_err(|e| e.to_string())?;
        let s = rng.random_range(1e-3..1e3) * if rng.random::<bool>() { -1.0 } else { 1.0 };
        let t = rng.random_range(1e-3..1e3) * if rng.random::<bool>() { -1.0 } else { 1.0 };
        let xs: Vec<f64> = x.iter().map(|v| v * s).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * t).collect();
        let scaled = angular_distance(&xs, &ys).map_err(|e| e.to_string())?;
        ensure!((scaled - base).abs() <= SCALE_TOL, "case {case}: distance {base} became {scaled}");

        let members: Vec<Vec<f64>> = (0..rng.random_range(2..8)).map(|_| random_vec(&mut rng, n)).collect();
        let flipped: Vec<Vec<f64>> = members
            .iter()
            .map(|m| if rng.random::<bool>() { m.iter().map(|v| -v).collect() } else { m.clone() })
            .collect();
        let c0 = cluster_centroid(&members).map_err(|e| e.to_string())?;
        let c1 = cluster_centroid(&flipped).map_err(|e| e.to_string())?;
        let d = sin_angle(&c0, &c1);
        ensure!(d < 1e-6, "case {case}: centroid moved by {d:e} under member inversion");

        let k = rng.random_range(2..5);
        let signals: Vec<Vec<f64>> = (0..rng.random_range(k + 3..30)).map(|_| random_vec(&mut rng, n)).collect();
        let scaled: Vec<Vec<f64>> = signals
            .iter()
            .map(|s| {
                let a = rng.random_range(0.1..10.0) * if rng.random::<bool>() { -1.0 } else { 1.0 };
                s.iter().map(|v| v * a).collect()
            })
            .collect();
        let cfg = KMeansConfig { seed: case as u64, ..KMeansConfig::default() };
        let f0 = kmeans_fit_detailed(&signals, k, &cfg).map_err(|e| e.to_string())?;
        let f1 = kmeans_fit_detailed(&scaled, k, &cfg).map_err(|e| e.to_string())?;
        ensure!(f0.assignments == f1.assignments, "case {case}: assignments changed under per-signal scaling");
        for w in f0.distortion_history.windows(2) {
            ensure!(w[1] <= w[0] * (1.0 + 1e-12), "case {case}: distortion rose {} -> {}", w[0], w[1]);
        }
    }
    Ok(())
}

fn c5_pseudo_inverse() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..200 {
        let n = rng.random_range(4..40);
        let k = rng.random_range(1..n.min(7));
        let cols: Vec<Vec<f64>> = (0..k).map(|_| random_vec(&mut rng, n)).collect();
        let fs = FeatureSet::from_centroids(cols, LearnMeta { seed: 0, iterations: 0, distortion: 0.0 }).map_err(|e| e.to_string())?;
        let coef = random_vec(&mut rng, k);
        let s = fs.synthesize(&coef);
        let back = fs.synthesize(&fs.amplitudes(&s));
        let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = s.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / norm;
        ensure!(err < PINV_TOL, "case {case}: in-span reconstruction error {err:e}");

        let s = random_vec(&mut rng, n);
        let fit = fs.synthesize(&fs.amplitudes(&s));
        let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        for c in fs.centroids() {
            let dot: f64 = s.iter().zip(&fit).zip(c).map(|((a, b), ci)| (a - b) * ci).sum();
            ensure!(dot.abs() < PINV_TOL * norm, "case {case}: residual . centroid = {dot:e}");
        }
    }
    Ok(())
}

fn c6_round_trips() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (h, w) = (301, 257);
    let plane = Plane::new(h, w, (0..h * w).map(|_| rng.random::<f32>() * 100.0).collect()).map_err(|e| e.to_string())?;
    let grid = patchify(&plane, 64, 32).map_err(|e| e.to_string())?;
    let back = stitch(&grid).map_err(|e| e.to_string())?;
    let worst = plane.data.iter().zip(&back.data).map(|(a, b)| (a - b).abs() as f64).fold(0.0, f64::max);
    ensure!(worst <= STITCH_TOL * 100.0, "stitch error {worst:e} on values up to 100");

    let rgb = RgbImage::new(17, 23, std::array::from_fn(|_| (0..17 * 23).map(|_| rng.random()).collect()))
        .map_err(|e| e.to_string())?;
    for n in 3..9 {
        let again = collapse_output(&expand_target(&rgb, n).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure!(again == rgb, "expand/collapse not exact at N = {n}");
    }

    let p = render_phantom(&PhantomSpec { height: 24, width: 20, ..shape_coded_spec(6) }).map_err(|e| e.to_string())?;
    let bytes = encode_cube(&p.cube).map_err(|e| e.to_string())?;
    let cube = decode_cube(&bytes).map_err(|e| e.to_string())?;
    ensure!(cube == p.cube && encode_cube(&cube).map_err(|e| e.to_string())? == bytes, "PTDC round trip differs");

    let bytes = encode_stack(&p.truth).map_err(|e| e.to_string())?;
    let stack = decode_stack(&bytes).map_err(|e| e.to_string())?;
    ensure!(stack == p.truth && encode_stack(&stack).map_err(|e| e.to_string())? == bytes, "PCHS round trip differs");

    let subset = learning_subset(&p.cube, 1.0, 0).map_err(|e| e.to_string())?;
    let fs = kmeans_fit(&subset, 3, &KMeansConfig::default()).map_err(|e| e.to_string())?;
    let bytes = encode_feature_set(&fs).map_err(|e| e.to_string())?;
    let again = encode_feature_set(&decode_feature_set(&bytes).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure!(again == bytes, "PFST round trip differs");
    Ok(())
}

/// C-study on the shape-coded phantom; returns the table CSV.
fn c7_run() -> std::result::Result<Vec<u8>, String> {
    let p = render_phantom(&shape_coded_spec(7)).map_err(|e| e.to_string())?;
    let cfg = StudyConfig::default();
    let subset = learning_subset(&p.cube, cfg.learn_fraction, cfg.subset_seed).map_err(|e| e.to_string())?;
    let fs = kmeans_fit(&subset, 3, &cfg.kmeans).map_err(|e| e.to_string())?;
    let stack = channel_array(&p.cube, &fs, cfg.clip_fraction).map_err(|e| e.to_string())?;
    let table = run_c_study(&stack, &p.stain, &LinearBackend, &cfg).map_err(|e| e.to_string())?;
    ensure!(table.rows.len() == 63, "{} rows", table.rows.len());
    print!("{}", indent(&table.summary()));

    let conventional: CombinationId = "NR532+NR266+R266".parse().map_err(|e: mcstain::Error| e.to_string())?;
    let conv = table.row(&conventional).ok_or("conventional row missing")?;
    let conv_ssim = conv.metrics.ok_or("conventional row failed")?.ssim;
    let better = table
        .rows
        .iter()
        .filter(|r| r.combination.has_feature() && r.metrics.is_some_and(|m| m.ssim > conv_ssim))
        .count();
    ensure!(better >= 1, "no feature-bearing combination beats the conventional SSIM {conv_ssim}");
    let best_of = |single: bool| {
        table
            .rows
            .iter()
            .filter(|r| (r.combination.len() == 1) == single)
            .filter_map(|r| r.metrics.map(|m| m.ssim))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (single, multi) = (best_of(true), best_of(false));
    ensure!(single < multi, "best single-channel SSIM {single} >= best multi-channel {multi}");
    let best = table.rows[0].metrics.ok_or("best row failed")?.ssim;
    ensure!(best >= MIN_BEST_SSIM, "best SSIM {best}");
    println!(
        "    {better} feature combinations beat the conventional SSIM {conv_ssim:.4} (rank {}); best single {single:.4} < best multi {multi:.4}",
        conv.rank_ssim
    );
    let mut csv = Vec::new();
    table.write_csv(&mut csv).map_err(|e| e.to_string())?;
    Ok(csv)
}

fn c8_run() -> std::result::Result<Vec<u8>, String> {
    let p = render_phantom(&three_shape_spec(8)).map_err(|e| e.to_string())?;
    let ks = run_k_study(&p.cube, &p.stain, &LinearBackend, &StudyConfig::default()).map_err(|e| e.to_string())?;
    let line: Vec<String> = ks.reports.iter().map(|r| format!("K={} {:.4}", r.k, r.report.ssim)).collect();
    println!("    SSIM per K: {}", line.join(", "));
    ensure!(ks.best_k == EXPECTED_K, "selected K = {}", ks.best_k);
    let mut csv = Vec::new();
    ks.write_csv(&mut csv).map_err(|e| e.to_string())?;
    Ok(csv)
}

const TRAIN_TOML: &str = r#"
learning_rate = 0.0002
max_epochs = 200
patience = 10
split = 0.7
patch_size = 32
inference_overlap = 0.5
cycle_weight = 10.0
seed = 9
"#;

fn c9_run() -> std::result::Result<Vec<u8>, String> {
    let spec = PhantomSpec {
        height: 64,
        width: 64,
        layout: BlobLayout { max_blobs: 40, min_radius: 4.0, max_radius: 8.0, spacing: 12.0, attempts: 5000 },
        ..shape_coded_spec(9)
    };
    let p = render_phantom(&spec).map_err(|e| e.to_string())?;
    let subset = learning_subset(&p.cube, 0.5, 0).map_err(|e| e.to_string())?;
    let fs = kmeans_fit(&subset, 2, &KMeansConfig::default()).map_err(|e| e.to_string())?;
    let stack = channel_array(&p.cube, &fs, 0.01).map_err(|e| e.to_string())?;
    ensure!(stack.len() == 5, "N = {}", stack.len());

    let config: TrainConfig = toml::from_str(TRAIN_TOML).map_err(|e| e.to_string())?;
    let stride = config.patch_size / 2;
    let src = patchify(&stack, config.patch_size, stride).map_err(|e| e.to_string())?;
    let tgt = patchify(&p.stain, config.patch_size, stride).map_err(|e| e.to_string())?;
    let pairs: Vec<TrainingPair> = src
        .patches
        .into_iter()
        .zip(tgt.patches)
        .map(|(a, b)| TrainingPair::new(a, b))
        .collect::<mcstain::Result<_>>()
        .map_err(|e| e.to_string())?;

    let model = fit_adversarial(&pairs, &config).map_err(|e| e.to_string())?;
    let pred = mcstain::colorize::virtual_stain(&stack, &model, config.patch_size, config.inference_overlap)
        .map_err(|e| e.to_string())?;
    ensure!(pred.dims() == (64, 64), "stained image is {:?}", pred.dims());
    let r = model.report();
    ensure!(r.records.len() >= 50, "stopped at epoch {}", r.stopped_epoch);
    let (first, fiftieth) = (r.records[0], r.records[49]);
    ensure!(fiftieth.g_loss < first.g_loss, "g_loss {} -> {}", first.g_loss, fiftieth.g_loss);
    ensure!(fiftieth.cycle_l1 < first.cycle_l1, "cycle L1 {} -> {}", first.cycle_l1, fiftieth.cycle_l1);
    let meta = r.metadata();
    let get = |k: &str| meta.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone()).unwrap_or_default();
    ensure!(get("learning_rate") == LEARNING_RATE.to_string(), "metadata learning_rate {}", get("learning_rate"));
    ensure!(get("split") == "70/30", "metadata split {}", get("split"));
    ensure!((r.train_pairs, r.validation_pairs) == (6, 3), "split {} / {}", r.train_pairs, r.validation_pairs);
    println!(
        "    epoch 1 -> 50: g_loss {:.3} -> {:.3}, cycle L1 {:.4} -> {:.4}; lr {}, split {}",
        first.g_loss,
        fiftieth.g_loss,
        first.cycle_l1,
        fiftieth.cycle_l1,
        get("learning_rate"),
        get("split")
    );

    // A frozen model cannot improve its validation loss.
    let plateau = TrainConfig { learning_rate: 1e-12, ..config.clone() };
    let frozen = fit_adversarial(&pairs, &plateau).map_err(|e| e.to_string())?;
    let fr = frozen.report();
    ensure!(
        fr.early_stopped && fr.stopped_epoch < MAX_EPOCHS && fr.stopped_epoch == plateau.patience + 1,
        "plateau run stopped at {} (early: {})",
        fr.stopped_epoch,
        fr.early_stopped
    );
    println!("    plateaued run stopped at epoch {} of {MAX_EPOCHS}", fr.stopped_epoch);
    let mut csv = Vec::new();
    write_loss_curves(&mut csv, &r.records).map_err(|e| e.to_string())?;
    Ok(csv)
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("    {l}\n")).collect()
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(()) => {
            println!("criterion {id:>2}: PASS  {name} ({secs:.1}s)");
            true
        }
        Err(msg) => {
            println!("criterion {id:>2}: FAIL  {name} ({secs:.1}s): {msg}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut outputs: [Option<Vec<u8>>; 3] = Default::default();
    let mut keep = |slot: usize, r: std::result::Result<Vec<u8>, String>| -> Check {
        outputs[slot] = Some(r?);
        Ok(())
    };
    let mut ok = true;
    ok &= run(1, "published PSNR/RMSE arithmetic", c1_table_arithmetic);
    ok &= run(2, "combination counts 63 / 31", c2_combination_counts);
    ok &= run(3, "feature recovery (noiseless and 20 dB)", c3_feature_recovery);
    ok &= run(4, "invariance suite", c4_invariance);
    ok &= run(5, "pseudo-inverse exactness", c5_pseudo_inverse);
    ok &= run(6, "pipeline round trips", c6_round_trips);
    ok &= run(7, "C-study on the shape-coded phantom", || keep(0, c7_run()));
    ok &= run(8, "K-study selects K = 3", || keep(1, c8_run()));
    ok &= run(9, "adversarial mechanism smoke test", || keep(2, c9_run()));
    ok &= run(10, "determinism of criteria 7-9", || {
        let again = [c7_run()?, c8_run()?, c9_run()?];
        for (i, (first, second)) in outputs.iter().zip(&again).enumerate() {
            let first = first.as_ref().ok_or(format!("criterion {} produced no output", i + 7))?;
            ensure!(first == second, "criterion {} CSV differs between runs", i + 7);
        }
        Ok(())
    });
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
