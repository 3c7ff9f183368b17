use std::path::{Path, PathBuf};
use std::time::Instant;

use mcstain::colorize::{
    fit_adversarial, fit_linear_colorizer, tile_pairs, virtual_stain, TrainConfig, TrainingPair, TranslationModel,
};
use mcstain::features::{extract_features, kmeans_fit, learning_subset, KMeansConfig};
use mcstain::formats::{
    append_metric_row, read_control_points, read_cube, read_feature_set, read_linear, read_png, read_stack,
    write_cube, write_feature_set, write_gray_png, write_linear, write_loss_curves, write_png, write_stack,
};
use mcstain::imaging::{warp_with_control_points, ChannelLabel, ChannelStack, RgbImage};
use mcstain::metrics::evaluate_pair;
use mcstain::phantom::{render_phantom, shape_coded_spec, three_shape_spec, PhantomSpec};
use mcstain::signal::{extract_conventional_channels, ExtractConfig};
use mcstain::study::{preprocess_stack, run_c_study, run_k_study, CombinationId, SpatialSplit, StudyConfig, StudyMeta, StudyTable};
use serde::Serialize;

use crate::config::{require_input, to_toml, BackendKind, RunConfig};
use crate::sidecar::RunRecord;
use crate::{
    CStudyArgs, CliError, EvaluateArgs, ExtractArgs, FeaturesArgs, KStudyArgs, LearnArgs, Preset, Region, ReportArgs,
    SimulateArgs, StainArgs, StudyInputs, TrainArgs,
};

type Result<T> = std::result::Result<T, CliError>;

fn timed<T>(stage: &str, f: impl FnOnce() -> mcstain::Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.context(stage))?;
    log::info!("{stage}: {:.2}s", start.elapsed().as_secs_f64());
    Ok(out)
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| mcstain::Error::io(dir, e).into())
        }
        _ => Ok(()),
    }
}

/// Truth image, registered onto the stack grid when control points are given.
fn load_truth(path: &Path, control_points: Option<&Path>, dims: (usize, usize)) -> Result<RgbImage> {
    let mut truth = read_png(path)?;
    if let Some(cp) = control_points {
        let points = read_control_points(cp)?;
        truth = timed("register truth", || warp_with_control_points(&truth, &points))?;
    }
    if truth.dims() != dims {
        return Err(mcstain::Error::Shape(format!(
            "truth {} is {:?} but the channels are {:?}",
            path.display(),
            truth.dims(),
            dims
        ))
        .into());
    }
    Ok(truth)
}

/// Apply shared study flags to the config and resolve the truth inputs.
fn study_inputs(inputs: StudyInputs, cfg: &mut RunConfig) -> Result<(PathBuf, Option<PathBuf>)> {
    if let Some(b) = inputs.backend {
        cfg.backend = b;
    }
    if let Some(s) = inputs.seed {
        cfg.study.kmeans.seed = s;
        cfg.study.subset_seed = s;
        cfg.train.seed = s;
    }
    let truth = require_input(inputs.truth, &cfg.paths.truth, "truth")?;
    let cp = match inputs.control_points.or(cfg.paths.control_points.clone()) {
        Some(p) => Some(require_input(Some(p), &None, "control_points")?),
        None => None,
    };
    cfg.validate()?;
    Ok((truth, cp))
}

fn record_truth(rec: &mut RunRecord, truth: &Path, cp: Option<&Path>) -> Result<()> {
    rec.input("truth", truth)?;
    if let Some(cp) = cp {
        rec.input("control_points", cp)?;
    }
    Ok(())
}

pub fn simulate(a: SimulateArgs, cfg: RunConfig) -> Result<()> {
    let mut spec: PhantomSpec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| mcstain::Error::io(path, e))?;
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("phantom spec {}: {e}", path.display())))?
        }
        None => match a.preset {
            Preset::ShapeCoded => shape_coded_spec(0),
            Preset::ThreeShape => three_shape_spec(0),
        },
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(h) = a.height {
        spec.height = h;
    }
    if let Some(w) = a.width {
        spec.width = w;
    }
    if let Some(snr) = a.snr_db {
        spec.noise_snr_db = snr;
    }
    let spec_toml = to_toml(&spec)?;
    if a.dump_spec {
        print!("{spec_toml}");
        return Ok(());
    }
    let out = a.out.or(cfg.paths.out_dir).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(|e| mcstain::Error::io(&out, e))?;
    let mut rec = RunRecord::new("simulate", spec_toml);
    if let Some(path) = &a.spec {
        rec.input("spec", path)?;
    }
    rec.seed("phantom", spec.seed);
    let p = timed("render phantom", || render_phantom(&spec))?;
    let files = [out.join("cube.ptdc"), out.join("truth.pchs"), out.join("stain.png"), out.join("labels.png")];
    timed("write phantom", || {
        write_cube(&files[0], &p.cube)?;
        write_stack(&files[1], &p.truth)?;
        write_png(&files[2], &p.stain)?;
        write_gray_png(&files[3], spec.height, spec.width, &p.labels)
    })?;
    for f in &files {
        rec.output(f);
    }
    rec.result("classes", spec.classes.iter().map(|c| c.name.as_str()).collect::<Vec<_>>());
    rec.finish(&out.join("simulate"))?;
    Ok(())
}

pub fn extract(a: ExtractArgs, cfg: RunConfig) -> Result<()> {
    let clip = a.clip.unwrap_or(cfg.study.clip_fraction);
    let cube_path = require_input(a.cube, &cfg.paths.cube, "cube")?;
    #[derive(Serialize)]
    struct Params {
        clip_fraction: f64,
        with_scatter: bool,
    }
    let mut rec = RunRecord::new("extract", to_toml(&Params { clip_fraction: clip, with_scatter: a.with_scatter })?);
    rec.input("cube", &cube_path)?;
    let cube = timed("read cube", || read_cube(&cube_path))?;
    let all = timed("conventional channels", || extract_conventional_channels(&cube, ExtractConfig::default()))?;
    let mut wanted = vec![ChannelLabel::Nr532, ChannelLabel::Nr266];
    if cube.r266.is_some() {
        wanted.push(ChannelLabel::R266);
    } else {
        log::warn!("{} carries no R266 plane; writing NR channels only", cube_path.display());
    }
    if a.with_scatter {
        wanted.push(ChannelLabel::Scatter);
    }
    let stack = timed("preprocess", || preprocess_stack(&all.select(&wanted)?, clip))?;
    create_parent(&a.out)?;
    write_stack(&a.out, &stack)?;
    rec.output(&a.out);
    rec.result("channels", stack.labels().iter().map(|l| l.to_string()).collect::<Vec<_>>());
    rec.finish(&a.out)?;
    Ok(())
}

pub fn learn(a: LearnArgs, mut cfg: RunConfig) -> Result<()> {
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(f) = a.fraction {
        cfg.study.learn_fraction = f;
    }
    if let Some(s) = a.seed {
        cfg.study.subset_seed = s;
        cfg.study.kmeans.seed = s;
    }
    cfg.validate()?;
    let cube_path = require_input(a.cube, &cfg.paths.cube, "cube")?;
    #[derive(Serialize)]
    struct Params {
        k: usize,
        learn_fraction: f64,
        subset_seed: u64,
        kmeans: KMeansConfig,
    }
    let params = Params { k: cfg.k, learn_fraction: cfg.study.learn_fraction, subset_seed: cfg.study.subset_seed, kmeans: cfg.study.kmeans };
    let mut rec = RunRecord::new("learn", to_toml(&params)?);
    rec.input("cube", &cube_path)?;
    rec.seed("subset", cfg.study.subset_seed);
    rec.seed("kmeans", cfg.study.kmeans.seed);
    let cube = timed("read cube", || read_cube(&cube_path))?;
    let subset = timed("learning subset", || learning_subset(&cube, cfg.study.learn_fraction, cfg.study.subset_seed))?;
    log::info!("learning {} features from {} traces", cfg.k, subset.len());
    let fs = timed("k-means", || kmeans_fit(&subset, cfg.k, &cfg.study.kmeans))?;
    create_parent(&a.out)?;
    write_feature_set(&a.out, &fs)?;
    rec.output(&a.out);
    rec.result("iterations", fs.meta().iterations);
    rec.result("distortion", fs.meta().distortion);
    rec.result("traces", subset.len());
    rec.finish(&a.out)?;
    Ok(())
}

pub fn features(a: FeaturesArgs, cfg: RunConfig) -> Result<()> {
    let clip = a.clip.unwrap_or(cfg.study.clip_fraction);
    let cube_path = require_input(a.cube, &cfg.paths.cube, "cube")?;
    let fs_path = require_input(a.features, &cfg.paths.features, "features")?;
    let stack_path = match a.stack.or(cfg.paths.stack.clone()) {
        Some(p) => Some(require_input(Some(p), &None, "stack")?),
        None => None,
    };
    #[derive(Serialize)]
    struct Params {
        clip_fraction: f64,
    }
    let mut rec = RunRecord::new("features", to_toml(&Params { clip_fraction: clip })?);
    rec.input("cube", &cube_path)?;
    rec.input("features", &fs_path)?;
    let cube = timed("read cube", || read_cube(&cube_path))?;
    let fs = read_feature_set(&fs_path)?;
    let images = timed("feature images", || extract_features(&cube, &fs)?.to_stack())?;
    let images = timed("preprocess", || preprocess_stack(&images, clip))?;
    let stack = match &stack_path {
        Some(p) => {
            rec.input("stack", p)?;
            let mut stack = read_stack(p)?;
            for (label, plane) in images.channels() {
                stack.push(*label, plane.clone())?;
            }
            stack
        }
        None => images,
    };
    create_parent(&a.out)?;
    write_stack(&a.out, &stack)?;
    rec.output(&a.out);
    rec.result("channels", stack.labels().iter().map(|l| l.to_string()).collect::<Vec<_>>());
    rec.finish(&a.out)?;
    Ok(())
}

#[derive(Serialize)]
struct StudyParams<'a> {
    backend: BackendKind,
    study: &'a StudyConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    train: Option<&'a TrainConfig>,
}

impl<'a> StudyParams<'a> {
    fn of(cfg: &'a RunConfig) -> Self {
        let train = (cfg.backend == BackendKind::Adversarial).then_some(&cfg.train);
        Self { backend: cfg.backend, study: &cfg.study, train }
    }
}

pub fn kstudy(a: KStudyArgs, mut cfg: RunConfig) -> Result<()> {
    if let Some(k) = a.k_min {
        cfg.study.kmeans.k_min = k;
    }
    if let Some(k) = a.k_max {
        cfg.study.kmeans.k_max = k;
    }
    let cube_path = require_input(a.cube, &cfg.paths.cube, "cube")?;
    let (truth_path, cp) = study_inputs(a.inputs, &mut cfg)?;
    let mut rec = RunRecord::new("kstudy", to_toml(&StudyParams::of(&cfg))?);
    rec.input("cube", &cube_path)?;
    record_truth(&mut rec, &truth_path, cp.as_deref())?;
    rec.seed("subset", cfg.study.subset_seed);
    rec.seed("kmeans", cfg.study.kmeans.seed);
    let cube = timed("read cube", || read_cube(&cube_path))?;
    let truth = load_truth(&truth_path, cp.as_deref(), (cube.height(), cube.width()))?;
    let backend = cfg.backend();
    let ks = timed("K-study", || run_k_study(&cube, &truth, backend.as_ref(), &cfg.study))?;
    create_parent(&a.out)?;
    let file = std::fs::File::create(&a.out).map_err(|e| mcstain::Error::io(&a.out, e))?;
    ks.write_csv(std::io::BufWriter::new(file))?;
    rec.output(&a.out);
    rec.result("best_k", ks.best_k);
    rec.result("backend", backend.name());
    rec.finish(&a.out)?;
    for r in &ks.reports {
        println!("K={}  SSIM {:.4}  PSNR {:.2} dB  RMSE {:.2}", r.k, r.report.ssim, r.report.psnr, r.report.rmse);
    }
    println!("best K = {}", ks.best_k);
    Ok(())
}

pub fn cstudy(a: CStudyArgs, mut cfg: RunConfig) -> Result<()> {
    let stack_path = require_input(a.stack, &cfg.paths.stack, "stack")?;
    let (truth_path, cp) = study_inputs(a.inputs, &mut cfg)?;
    let mut rec = RunRecord::new("cstudy", to_toml(&StudyParams::of(&cfg))?);
    rec.input("stack", &stack_path)?;
    record_truth(&mut rec, &truth_path, cp.as_deref())?;
    if cfg.backend == BackendKind::Adversarial {
        rec.seed("train", cfg.train.seed);
    }
    let stack = read_stack(&stack_path)?;
    let truth = load_truth(&truth_path, cp.as_deref(), stack.dims())?;
    let backend = cfg.backend();
    log::info!("training {} combinations on {} threads", (1usize << stack.len()) - 1, rayon::current_num_threads());
    let table = timed("C-study", || run_c_study(&stack, &truth, backend.as_ref(), &cfg.study))?;
    create_parent(&a.out)?;
    let file = std::fs::File::create(&a.out).map_err(|e| mcstain::Error::io(&a.out, e))?;
    table.write_csv(std::io::BufWriter::new(file))?;
    rec.output(&a.out);
    rec.result("meta", &table.meta);
    rec.result("best", table.rows.first().map(|r| r.combination.to_string()));
    rec.finish(&a.out)?;
    print!("{}", table.summary());
    Ok(())
}

fn select(stack: ChannelStack, combination: Option<&str>) -> Result<ChannelStack> {
    match combination {
        Some(text) => {
            let combo: CombinationId = text.parse()?;
            Ok(stack.select(combo.labels())?)
        }
        None => Ok(stack),
    }
}

pub fn train(a: TrainArgs, mut cfg: RunConfig) -> Result<()> {
    if let Some(lr) = a.learning_rate {
        cfg.train.learning_rate = lr;
    }
    if let Some(e) = a.max_epochs {
        cfg.train.max_epochs = e;
    }
    let stack_path = require_input(a.stack, &cfg.paths.stack, "stack")?;
    let (truth_path, cp) = study_inputs(a.inputs, &mut cfg)?;
    #[derive(Serialize)]
    struct Params<'a> {
        combination: Option<&'a str>,
        #[serde(flatten)]
        study: StudyParams<'a>,
    }
    let params = Params { combination: a.combination.as_deref(), study: StudyParams::of(&cfg) };
    let mut rec = RunRecord::new("train", to_toml(&params)?);
    rec.input("stack", &stack_path)?;
    record_truth(&mut rec, &truth_path, cp.as_deref())?;
    let stack = select(read_stack(&stack_path)?, a.combination.as_deref())?;
    let truth = load_truth(&truth_path, cp.as_deref(), stack.dims())?;
    let split = SpatialSplit::new(stack.height(), stack.width(), cfg.study.train_fraction)?;
    let pair = TrainingPair::new(split.train_stack(&stack), split.train_rgb(&truth))?;
    create_parent(&a.out)?;
    let (model, patch, overlap): (Box<dyn TranslationModel>, usize, f64) = match cfg.backend {
        BackendKind::Linear => {
            let model = timed("fit linear colorizer", || fit_linear_colorizer(&[pair]))?;
            write_linear(&a.out, &model)?;
            (Box::new(model), cfg.study.patch_size, cfg.study.overlap)
        }
        BackendKind::Adversarial => {
            rec.seed("train", cfg.train.seed);
            let tiles = tile_pairs(&[pair], cfg.train.patch_size)?;
            let model = timed("adversarial training", || fit_adversarial(&tiles, &cfg.train))?;
            let file = std::fs::File::create(&a.out).map_err(|e| mcstain::Error::io(&a.out, e))?;
            write_loss_curves(std::io::BufWriter::new(file), &model.report().records)?;
            for (k, v) in model.report().metadata() {
                rec.result(&k, v);
            }
            (Box::new(model), cfg.train.patch_size, cfg.train.inference_overlap)
        }
    };
    rec.output(&a.out);
    if let Some(path) = &a.stain_out {
        let rgb = timed("virtual stain", || virtual_stain(&stack, model.as_ref(), patch, overlap))?;
        create_parent(path)?;
        write_png(path, &rgb)?;
        rec.output(path);
    }
    rec.result("channels", stack.labels().iter().map(|l| l.to_string()).collect::<Vec<_>>());
    rec.finish(&a.out)?;
    Ok(())
}

pub fn stain(a: StainArgs, cfg: RunConfig) -> Result<()> {
    let patch = a.patch_size.unwrap_or(cfg.study.patch_size);
    let overlap = a.overlap.unwrap_or(cfg.study.overlap);
    let stack_path = require_input(a.stack, &cfg.paths.stack, "stack")?;
    let model_path = require_input(a.model, &cfg.paths.model, "model")?;
    #[derive(Serialize)]
    struct Params {
        patch_size: usize,
        overlap: f64,
    }
    let mut rec = RunRecord::new("stain", to_toml(&Params { patch_size: patch, overlap })?);
    rec.input("stack", &stack_path)?;
    rec.input("model", &model_path)?;
    let model = read_linear(&model_path)?;
    let stack = read_stack(&stack_path)?.select(model.labels())?;
    let rgb = timed("virtual stain", || virtual_stain(&stack, &model, patch, overlap))?;
    create_parent(&a.out)?;
    write_png(&a.out, &rgb)?;
    rec.output(&a.out);
    rec.finish(&a.out)?;
    Ok(())
}

pub fn evaluate(a: EvaluateArgs, cfg: RunConfig) -> Result<()> {
    let sigma = a.sigma.unwrap_or(cfg.study.blur_sigma);
    let pred_path = require_input(Some(a.pred), &None, "pred")?;
    let truth_path = require_input(a.truth, &cfg.paths.truth, "truth")?;
    let cp = match a.control_points.or(cfg.paths.control_points.clone()) {
        Some(p) => Some(require_input(Some(p), &None, "control_points")?),
        None => None,
    };
    #[derive(Serialize)]
    struct Params {
        blur_sigma: f64,
        region: &'static str,
        train_fraction: f64,
    }
    let region = match a.region {
        Region::All => "all",
        Region::Test => "test",
    };
    let params = Params { blur_sigma: sigma, region, train_fraction: cfg.study.train_fraction };
    let mut rec = RunRecord::new("evaluate", to_toml(&params)?);
    rec.input("pred", &pred_path)?;
    record_truth(&mut rec, &truth_path, cp.as_deref())?;
    let mut pred = read_png(&pred_path)?;
    let mut truth = load_truth(&truth_path, cp.as_deref(), pred.dims())?;
    if a.region == Region::Test {
        let split = SpatialSplit::new(pred.dims().0, pred.dims().1, cfg.study.train_fraction)?;
        pred = split.test_rgb(&pred);
        truth = split.test_rgb(&truth);
    }
    let report = timed("evaluate", || evaluate_pair(&pred, &truth, sigma))?;
    println!("ssim {:.6}  psnr_db {:.4}  rmse {:.4}", report.ssim, report.psnr, report.rmse);
    rec.result("ssim", report.ssim);
    rec.result("psnr_db", report.psnr);
    rec.result("rmse", report.rmse);
    let primary = match &a.out {
        Some(out) => {
            let label = a.label.clone().unwrap_or_else(|| {
                pred_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
            });
            create_parent(out)?;
            append_metric_row(out, &label, &report)?;
            rec.output(out);
            out.clone()
        }
        None => pred_path.with_extension("evaluate"),
    };
    rec.finish(&primary)?;
    Ok(())
}

pub fn report(a: ReportArgs, _cfg: RunConfig) -> Result<()> {
    let table_path = require_input(Some(a.table), &None, "table")?;
    let mut meta = StudyMeta { backend: "unknown".into(), k: None, seed: 0, blur_sigma: f64::NAN };
    let mut sidecar = table_path.clone().into_os_string();
    sidecar.push(".run.json");
    if let Ok(text) = std::fs::read_to_string(&sidecar) {
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| mcstain::Error::Format(format!("{}: {e}", Path::new(&sidecar).display())))?;
        let m = &v["results"]["meta"];
        meta.backend = m["backend"].as_str().unwrap_or("unknown").to_string();
        meta.k = m["k"].as_u64().map(|k| k as usize);
        meta.seed = m["seed"].as_u64().unwrap_or(0);
        meta.blur_sigma = m["blur_sigma"].as_f64().unwrap_or(f64::NAN);
    }
    let file = std::fs::File::open(&table_path).map_err(|e| mcstain::Error::io(&table_path, e))?;
    let table = StudyTable::read_csv(file, meta)?;
    let m = &table.meta;
    println!(
        "{} combinations, backend {}, K {}, blur sigma {}",
        table.rows.len(),
        m.backend,
        m.k.map(|k| k.to_string()).unwrap_or_else(|| "?".into()),
        m.blur_sigma
    );
    print!("{}", table.summary());
    Ok(())
}
