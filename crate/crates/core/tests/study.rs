use mcstain::colorize::{ColorizerBackend, LinearBackend, TrainingPair, TranslationModel};
use mcstain::features::KMeansConfig;
use mcstain::imaging::{ChannelLabel, ChannelStack, Plane, RgbImage};
use mcstain::phantom::{render_phantom, shape_coded_spec, three_shape_spec, BlobLayout, PhantomSpec};
use mcstain::study::{run_c_study, run_k_study, select_best, RowStatus, StudyConfig};
use mcstain::{Error, Result};

/// Stack whose NR532 and NR266 planes are identical, plus an R266 plane and
/// a truth image coloured from both.
fn tied_stack() -> (ChannelStack, RgbImage) {
    let (h, w) = (32, 40);
    let a: Vec<f32> = (0..h * w).map(|i| ((i * 37 % 101) as f32) / 100.0).collect();
    let b: Vec<f32> = (0..h * w).map(|i| ((i * 53 % 89) as f32) / 88.0).collect();
    let stack = ChannelStack::from_channels(vec![
        (ChannelLabel::Nr532, Plane::new(h, w, a.clone()).unwrap()),
        (ChannelLabel::Nr266, Plane::new(h, w, a.clone()).unwrap()),
        (ChannelLabel::R266, Plane::new(h, w, b.clone()).unwrap()),
    ])
    .unwrap();
    let mut rgb = RgbImage::filled(h, w, [0; 3]);
    for i in 0..h * w {
        let v = |x: f32| (x * 200.0 + 20.0).round() as u8;
        rgb.set_pixel(i / w, i % w, [v(a[i]), v(b[i]), v(0.5 * (a[i] + b[i]))]);
    }
    (stack, rgb)
}

fn small_config() -> StudyConfig {
    StudyConfig { patch_size: 16, blur_sigma: 1.0, ..StudyConfig::default() }
}

#[test]
fn duplicated_channels_tie_and_keep_canonical_order() {
    let (stack, truth) = tied_stack();
    let table = run_c_study(&stack, &truth, &LinearBackend, &small_config()).unwrap();
    assert_eq!(table.rows.len(), 7);
    let row = |s: &str| table.row(&s.parse().unwrap()).unwrap().clone();
    let (nr532, nr266) = (row("NR532"), row("NR266"));
    assert_eq!(nr532.metrics, nr266.metrics);
    assert_eq!((nr532.rank_ssim, nr532.rank_psnr), (nr266.rank_ssim, nr266.rank_psnr));
    let pos = |s: &str| table.rows.iter().position(|r| r.combination.to_string() == s).unwrap();
    assert!(pos("NR532") < pos("NR266"));
    // Adding a copy of a channel changes nothing but the channel count, so
    // the smaller combination sorts first.
    assert_eq!(row("NR532+R266").metrics.unwrap().ssim, row("NR532+NR266+R266").metrics.unwrap().ssim);
    assert!(pos("NR532+R266") < pos("NR532+NR266+R266"));
    assert_eq!(select_best(&table).unwrap().to_string(), "NR532+R266");
}

/// Fails whenever R266 is among the inputs.
struct NoR266;

impl ColorizerBackend for NoR266 {
    fn name(&self) -> &'static str {
        "no-r266"
    }

    fn fit(&self, pairs: &[TrainingPair]) -> Result<Box<dyn TranslationModel>> {
        if pairs[0].source.get(ChannelLabel::R266).is_some() {
            return Err(Error::Numerical("refusing R266".into()));
        }
        LinearBackend.fit(pairs)
    }
}

#[test]
fn failures_are_isolated_per_row() {
    let (stack, truth) = tied_stack();
    let table = run_c_study(&stack, &truth, &NoR266, &small_config()).unwrap();
    assert_eq!(table.rows.len(), 7);
    let (ok, failed): (Vec<_>, Vec<_>) = table.rows.iter().partition(|r| r.status == RowStatus::Ok);
    assert_eq!((ok.len(), failed.len()), (3, 4));
    for r in &failed {
        assert!(r.combination.labels().contains(&ChannelLabel::R266));
        assert!(r.metrics.is_none());
        assert_eq!(r.rank_ssim, 4);
        match &r.status {
            RowStatus::Failed(msg) => assert!(msg.contains("refusing R266") && msg.contains(&r.combination.to_string())),
            RowStatus::Ok => unreachable!(),
        }
    }
    assert!(table.rows[..3].iter().all(|r| r.status == RowStatus::Ok));
    let mut csv = Vec::new();
    table.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().matches(",failed: ").count(), 4);
    assert_eq!(table.meta.backend, "no-r266");
}

#[test]
fn c_study_is_deterministic_across_thread_counts() {
    let spec = PhantomSpec {
        height: 64,
        width: 64,
        layout: BlobLayout { max_blobs: 30, min_radius: 4.0, max_radius: 8.0, spacing: 12.0, attempts: 4000 },
        ..shape_coded_spec(2)
    };
    let p = render_phantom(&spec).unwrap();
    let stack = p.truth.select(&[ChannelLabel::Nr532, ChannelLabel::R266, ChannelLabel::Feature(1), ChannelLabel::Feature(2)]).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let table = pool.install(|| run_c_study(&stack, &p.stain, &LinearBackend, &small_config())).unwrap();
        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        csv
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
    assert_eq!(String::from_utf8(one).unwrap().lines().count(), 16);
}

#[test]
fn k_study_with_a_single_k() {
    let spec = PhantomSpec { height: 96, width: 96, ..three_shape_spec(4) };
    let p = render_phantom(&spec).unwrap();
    let cfg = StudyConfig { kmeans: KMeansConfig { k_min: 2, k_max: 2, ..KMeansConfig::default() }, ..small_config() };
    let ks = run_k_study(&p.cube, &p.stain, &LinearBackend, &cfg).unwrap();
    assert_eq!(ks.best_k, 2);
    assert_eq!(ks.reports.len(), 1);

    let bad = StudyConfig { kmeans: KMeansConfig { k_min: 3, k_max: 2, ..KMeansConfig::default() }, ..small_config() };
    assert!(matches!(run_k_study(&p.cube, &p.stain, &LinearBackend, &bad), Err(Error::Parameter(_))));
}

#[test]
fn k_study_needs_the_radiative_plane() {
    let spec = PhantomSpec { height: 24, width: 24, ..three_shape_spec(4) };
    let mut p = render_phantom(&spec).unwrap();
    p.cube.r266 = None;
    assert!(matches!(run_k_study(&p.cube, &p.stain, &LinearBackend, &small_config()), Err(Error::Data(_))));
}
