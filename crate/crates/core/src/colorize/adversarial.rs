//! Tiny cycle-consistent adversarial backend.
//!
//! Generators are 1x1 convolutions (per-pixel affine maps): `G: A -> B` ends
//! in a sigmoid so outputs live in `[0, 1]`, `F: B -> A` is affine. Both
//! discriminators are logistic regressions on a single pixel. Losses are
//! least-squares GAN terms plus `lambda` times the L1 cycle error both ways.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::colorize::adapt::{expand_target, quantize};
use crate::colorize::model::{check_labels, common_labels, ColorizerBackend, TrainingPair, TranslationModel};
use crate::error::{Error, Result};
use crate::imaging::{patchify, ChannelLabel, ChannelStack, RgbImage};

const ADAM_BETA1: f64 = 0.5;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const VALIDATION_PIXELS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    /// Fraction of pairs used for training; the rest validate.
    pub split: f64,
    pub patch_size: usize,
    pub inference_overlap: f64,
    pub cycle_weight: f64,
    pub batch_size: usize,
    pub steps_per_epoch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            max_epochs: 200,
            patience: 10,
            min_delta: 1e-6,
            split: 0.7,
            patch_size: 256,
            inference_overlap: 0.5,
            cycle_weight: 10.0,
            batch_size: 64,
            steps_per_epoch: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad(format!("split must be in (0, 1), got {}", self.split));
        }
        if !(self.cycle_weight >= 0.0 && self.cycle_weight.is_finite()) {
            return bad(format!("cycle_weight must be >= 0, got {}", self.cycle_weight));
        }
        if !(0.0..1.0).contains(&self.inference_overlap) {
            return bad(format!("inference_overlap must be in [0, 1), got {}", self.inference_overlap));
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.steps_per_epoch == 0 || self.patch_size == 0 {
            return bad("max_epochs, batch_size, steps_per_epoch and patch_size must be positive".into());
        }
        if !(self.min_delta >= 0.0) {
            return bad(format!("min_delta must be >= 0, got {}", self.min_delta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub g_loss: f64,
    pub d_loss: f64,
    pub cycle_l1: f64,
    pub val_g_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub records: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub early_stopped: bool,
    pub train_pairs: usize,
    pub validation_pairs: usize,
}

impl TrainReport {
    /// Key/value lines describing the run.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let c = &self.config;
        vec![
            ("backend".into(), "adversarial".into()),
            ("learning_rate".into(), c.learning_rate.to_string()),
            ("max_epochs".into(), c.max_epochs.to_string()),
            ("patience".into(), c.patience.to_string()),
            ("min_delta".into(), c.min_delta.to_string()),
            ("batch_size".into(), c.batch_size.to_string()),
            ("steps_per_epoch".into(), c.steps_per_epoch.to_string()),
            ("optimizer".into(), format!("adam(beta1={ADAM_BETA1}, beta2={ADAM_BETA2}, eps={ADAM_EPS})")),
            ("split".into(), format!("{}/{}", pct(c.split), 100 - pct(c.split))),
            ("cycle_weight".into(), c.cycle_weight.to_string()),
            ("seed".into(), c.seed.to_string()),
            ("train_pairs".into(), self.train_pairs.to_string()),
            ("validation_pairs".into(), self.validation_pairs.to_string()),
            ("stopped_epoch".into(), self.stopped_epoch.to_string()),
            ("early_stopped".into(), self.early_stopped.to_string()),
        ]
    }
}

fn pct(f: f64) -> u32 {
    (f * 100.0).round() as u32
}

/// Row-major `n x n` weights plus bias.
#[derive(Debug, Clone, PartialEq)]
struct Affine {
    n: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Affine {
    fn near_identity(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = (0..n * n)
            .map(|k| if k / n == k % n { 1.0 } else { 0.0 } + rng.random_range(-0.05..0.05))
            .collect();
        Self { n, w, b: vec![0.0; n] }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.w[i * self.n..(i + 1) * self.n];
            *o = self.b[i] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    fn zeros_like(&self) -> Self {
        Self { n: self.n, w: vec![0.0; self.w.len()], b: vec![0.0; self.n] }
    }

    /// `grad += dy (x)^T`, `gb += dy`; returns `W^T dy`.
    fn backward(&self, grad: &mut Affine, x: &[f64], dy: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut dx = vec![0.0; n];
        for i in 0..n {
            grad.b[i] += dy[i];
            for j in 0..n {
                grad.w[i * n + j] += dy[i] * x[j];
                dx[j] += self.w[i * n + j] * dy[i];
            }
        }
        dx
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w.iter_mut().chain(self.b.iter_mut())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.w.iter().chain(self.b.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Logistic {
    u: Vec<f64>,
    c: f64,
}

impl Logistic {
    fn new(n: usize, rng: &mut ChaCha8Rng) -> Self {
        Self { u: (0..n).map(|_| rng.random_range(-0.1..0.1)).collect(), c: 0.0 }
    }

    fn prob(&self, x: &[f64]) -> f64 {
        sigmoid(self.c + self.u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
    }

    fn zeros_like(&self) -> Self {
        Self { u: vec![0.0; self.u.len()], c: 0.0 }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.u.iter_mut().chain(std::iter::once(&mut self.c))
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.u.iter().chain(std::iter::once(&self.c))
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(len: usize, lr: f64) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0, lr }
    }

    fn step<'a>(&mut self, params: impl Iterator<Item = &'a mut f64>, grads: impl Iterator<Item = &'a f64>) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (((p, g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

struct Nets {
    g: Affine,
    f: Affine,
    d_a: Logistic,
    d_b: Logistic,
}

#[derive(Default, Clone, Copy)]
struct Losses {
    g: f64,
    d: f64,
    cycle: f64,
}

impl Nets {
    fn g_forward(&self, a: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.g.n];
        self.g.apply(a, &mut z);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        z
    }

    fn f_forward(&self, b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.f.n];
        self.f.apply(b, &mut y);
        y
    }

    /// Generator objective over a batch; fills gradients when asked.
    fn generator_pass(
        &self,
        a_batch: &[&[f64]],
        b_batch: &[&[f64]],
        lambda: f64,
        mut grads: Option<(&mut Affine, &mut Affine)>,
    ) -> (f64, f64) {
        let n = self.g.n as f64;
        let bs = a_batch.len() as f64;
        let mut adv = 0.0;
        let mut cyc = 0.0;
        for (a, b) in a_batch.iter().zip(b_batch) {
            // A -> B -> A
            let fake_b = self.g_forward(a);
            let rec_a = self.f_forward(&fake_b);
            let p = self.d_b.prob(&fake_b);
            adv += (p - 1.0).powi(2) / bs;
            let cyc_a: f64 = rec_a.iter().zip(a.iter()).map(|(r, x)| (r - x).abs()).sum::<f64>() / (n * bs);
            // B -> A -> B
            let fake_a = self.f_forward(b);
            let rec_b = self.g_forward(&fake_a);
            let q = self.d_a.prob(&fake_a);
            adv += (q - 1.0).powi(2) / bs;
            let cyc_b: f64 = rec_b.iter().zip(b.iter()).map(|(r, x)| (r - x).abs()).sum::<f64>() / (n * bs);
            cyc += 0.5 * (cyc_a + cyc_b);

            if let Some((gg, gf)) = grads.as_mut() {
                let s = lambda / (n * bs);
                let d_rec_a: Vec<f64> = rec_a.iter().zip(a.iter()).map(|(r, x)| s * sign(r - x)).collect();
                let mut d_fake_b = self.f.backward(gf, &fake_b, &d_rec_a);
                let k = 2.0 * (p - 1.0) * p * (1.0 - p) / bs;
                for (d, u) in d_fake_b.iter_mut().zip(&self.d_b.u) {
                    *d += k * u;
                }
                let dz: Vec<f64> = d_fake_b.iter().zip(&fake_b).map(|(d, y)| d * y * (1.0 - y)).collect();
                self.g.backward(gg, a, &dz);

                let d_rec_b: Vec<f64> = rec_b.iter().zip(b.iter()).map(|(r, x)| s * sign(r - x)).collect();
                let dz2: Vec<f64> = d_rec_b.iter().zip(&rec_b).map(|(d, y)| d * y * (1.0 - y)).collect();
                let mut d_fake_a = self.g.backward(gg, &fake_a, &dz2);
                let k = 2.0 * (q - 1.0) * q * (1.0 - q) / bs;
                for (d, u) in d_fake_a.iter_mut().zip(&self.d_a.u) {
                    *d += k * u;
                }
                self.f.backward(gf, b, &d_fake_a);
            }
        }
        (adv + lambda * 2.0 * cyc, cyc)
    }

    /// Discriminator objective over a batch, updating gradients.
    fn discriminator_pass(&self, a_batch: &[&[f64]], b_batch: &[&[f64]], ga: &mut Logistic, gb: &mut Logistic) -> f64 {
        let bs = a_batch.len() as f64;
        let mut loss = 0.0;
        let mut term = |d: &Logistic, g: &mut Logistic, x: &[f64], target: f64| {
            let p = d.prob(x);
            loss += 0.5 * (p - target).powi(2) / bs;
            let k = (p - target) * p * (1.0 - p) / bs;
            for (gu, xi) in g.u.iter_mut().zip(x) {
                *gu += k * xi;
            }
            g.c += k;
        };
        for (a, b) in a_batch.iter().zip(b_batch) {
            let fake_b = self.g_forward(a);
            let fake_a = self.f_forward(b);
            term(&self.d_b, gb, b, 1.0);
            term(&self.d_b, gb, &fake_b, 0.0);
            term(&self.d_a, ga, a, 1.0);
            term(&self.d_a, ga, &fake_a, 0.0);
        }
        loss
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-pixel source vectors and expanded target vectors.
fn pixel_pools(pairs: &[&TrainingPair], n: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut src = Vec::new();
    let mut tgt = Vec::new();
    for p in pairs {
        let expanded = expand_target(&p.target, n)?;
        let pixels = p.source.height() * p.source.width();
        let mut x = Vec::with_capacity(n);
        for idx in 0..pixels {
            x.clear();
            p.source.pixel_into(idx, &mut x);
            src.push(x.clone());
            tgt.push(expanded.iter().map(|pl| pl.data[idx] as f64).collect());
        }
    }
    Ok((src, tgt))
}

/// The trained generator `G`, with the run's loss curves.
#[derive(Debug, Clone)]
pub struct AdversarialModel {
    labels: Vec<ChannelLabel>,
    g: Affine,
    report: TrainReport,
}

impl AdversarialModel {
    pub fn report(&self) -> &TrainReport {
        &self.report
    }
}

impl TranslationModel for AdversarialModel {
    fn input_labels(&self) -> &[ChannelLabel] {
        &self.labels
    }

    fn predict(&self, patch: &ChannelStack) -> Result<RgbImage> {
        check_labels(&self.labels, patch)?;
        let (h, w) = patch.dims();
        let n = self.labels.len();
        let mut planes: [Vec<u8>; 3] = std::array::from_fn(|_| Vec::with_capacity(h * w));
        let mut x = Vec::with_capacity(n);
        let mut z = vec![0.0; n];
        for idx in 0..h * w {
            x.clear();
            patch.pixel_into(idx, &mut x);
            self.g.apply(&x, &mut z);
            // Duplicated B channels beyond the third are discarded.
            for c in 0..3 {
                planes[c].push(quantize(sigmoid(z[c])));
            }
        }
        RgbImage::new(h, w, planes)
    }

    fn backend_name(&self) -> &'static str {
        "adversarial"
    }
}

/// Train the tiny cycle-consistent model. Sources need at least three
/// channels so the RGB target fits inside the adapted width.
pub fn fit_adversarial(pairs: &[TrainingPair], config: &TrainConfig) -> Result<AdversarialModel> {
    config.validate()?;
    let labels = common_labels(pairs)?;
    let n = labels.len();
    if n < 3 {
        return Err(Error::Parameter(format!(
            "adversarial backend needs at least 3 input channels, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let n_train = (pairs.len() as f64 * config.split).round() as usize;
    if n_train == 0 || n_train == pairs.len() {
        return Err(Error::Data(format!(
            "{} pairs leave an empty partition at split {}",
            pairs.len(),
            config.split
        )));
    }
    let mut train_idx = order[..n_train].to_vec();
    let mut val_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    let train: Vec<&TrainingPair> = train_idx.iter().map(|&i| &pairs[i]).collect();
    let val: Vec<&TrainingPair> = val_idx.iter().map(|&i| &pairs[i]).collect();
    let (train_a, train_b) = pixel_pools(&train, n)?;
    let (val_a, val_b) = pixel_pools(&val, n)?;
    if train_a.is_empty() || val_a.is_empty() {
        return Err(Error::Data("a training partition has no pixels".into()));
    }

    // Fixed validation sample: source and target drawn independently.
    let val_count = val_a.len().min(VALIDATION_PIXELS);
    let val_sa: Vec<&[f64]> = rand::seq::index::sample(&mut rng, val_a.len(), val_count)
        .into_iter()
        .map(|i| val_a[i].as_slice())
        .collect();
    let val_sb: Vec<&[f64]> = rand::seq::index::sample(&mut rng, val_b.len(), val_count)
        .into_iter()
        .map(|i| val_b[i].as_slice())
        .collect();

    let mut nets = Nets {
        g: Affine::near_identity(n, &mut rng),
        f: Affine::near_identity(n, &mut rng),
        d_a: Logistic::new(n, &mut rng),
        d_b: Logistic::new(n, &mut rng),
    };
    let gen_len = 2 * (n * n + n);
    let disc_len = 2 * (n + 1);
    let mut opt_g = Adam::new(gen_len, config.learning_rate);
    let mut opt_d = Adam::new(disc_len, config.learning_rate);

    let mut records = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let mut early_stopped = false;
    let bs = config.batch_size;
    for epoch in 1..=config.max_epochs {
        let mut sum = Losses::default();
        for _ in 0..config.steps_per_epoch {
            let a: Vec<&[f64]> = (0..bs).map(|_| train_a[rng.random_range(0..train_a.len())].as_slice()).collect();
            let b: Vec<&[f64]> = (0..bs).map(|_| train_b[rng.random_range(0..train_b.len())].as_slice()).collect();

            let mut gg = nets.g.zeros_like();
            let mut gf = nets.f.zeros_like();
            let (g_loss, cyc) = nets.generator_pass(&a, &b, config.cycle_weight, Some((&mut gg, &mut gf)));
            opt_g.step(
                nets.g.params_mut().chain(nets.f.params_mut()),
                gg.params().chain(gf.params()),
            );

            let mut ga = nets.d_a.zeros_like();
            let mut gb = nets.d_b.zeros_like();
            let d_loss = nets.discriminator_pass(&a, &b, &mut ga, &mut gb);
            opt_d.step(
                nets.d_a.params_mut().chain(nets.d_b.params_mut()),
                ga.params().chain(gb.params()),
            );
            sum.g += g_loss;
            sum.d += d_loss;
            sum.cycle += cyc;
        }
        let steps = config.steps_per_epoch as f64;
        let (val_g, _) = nets.generator_pass(&val_sa, &val_sb, config.cycle_weight, None);
        let rec = EpochRecord {
            epoch,
            g_loss: sum.g / steps,
            d_loss: sum.d / steps,
            cycle_l1: sum.cycle / steps,
            val_g_loss: val_g,
        };
        log::debug!("epoch {epoch}: g {:.6} d {:.6} cyc {:.6} val {:.6}", rec.g_loss, rec.d_loss, rec.cycle_l1, rec.val_g_loss);
        records.push(rec);
        if !val_g.is_finite() {
            return Err(Error::Numerical(format!("validation loss diverged at epoch {epoch}")));
        }
        if val_g < best - config.min_delta {
            best = val_g;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                early_stopped = true;
                break;
            }
        }
    }
    let stopped_epoch = records.len();
    Ok(AdversarialModel {
        labels,
        g: nets.g,
        report: TrainReport {
            config: config.clone(),
            records,
            stopped_epoch,
            early_stopped,
            train_pairs: train.len(),
            validation_pairs: val.len(),
        },
    })
}

#[derive(Debug, Clone, Default)]
pub struct AdversarialBackend {
    pub config: TrainConfig,
}

impl ColorizerBackend for AdversarialBackend {
    fn name(&self) -> &'static str {
        "adversarial"
    }

    fn fit(&self, pairs: &[TrainingPair]) -> Result<Box<dyn TranslationModel>> {
        let tiles = tile_pairs(pairs, self.config.patch_size)?;
        Ok(Box::new(fit_adversarial(&tiles, &self.config)?))
    }
}

/// Cut each pair into half-overlapping square tiles of side
/// `min(patch_size, h, w)` so a single registered image still yields a
/// train/validation split. Pairs that fit one tile pass through.
pub fn tile_pairs(pairs: &[TrainingPair], patch_size: usize) -> Result<Vec<TrainingPair>> {
    let mut out = Vec::new();
    for pair in pairs {
        let (h, w) = pair.source.dims();
        let p = patch_size.min(h).min(w);
        if h <= p && w <= p {
            out.push(pair.clone());
            continue;
        }
        let stride = (p / 2).max(1);
        let src = patchify(&pair.source, p, stride)?;
        let tgt = patchify(&pair.target, p, stride)?;
        for (s, t) in src.patches.into_iter().zip(tgt.patches) {
            out.push(TrainingPair::new(s, t)?);
        }
    }
    Ok(out)
}
