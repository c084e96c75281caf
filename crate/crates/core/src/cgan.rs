//! Label-conditioned GAN over dense networks.
//!
//! Both networks receive the class label as a one-hot vector concatenated to
//! their input: the generator sees `[z | onehot(y)]`, the discriminator sees
//! `[x | onehot(y)]`. Discriminator probabilities are clamped to
//! `[PROB_CLAMP, 1 - PROB_CLAMP]` before any logarithm so both objectives stay
//! finite for every parameter value.

use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{
    backward, forward, AdamState, Direction, ForwardCache, MlpArch, OutputActivation, ParamVector,
};

/// Lower/upper clamp applied to discriminator outputs.
pub const PROB_CLAMP: f64 = 1e-7;

/// Which generator objective the G step descends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeneratorLoss {
    /// `log(1 - D(G(z|y')|y'))`, descended.
    #[default]
    Saturating,
    /// `-log D(G(z|y')|y')`, descended.
    NonSaturating,
}

/// Where the conditional labels `y'` of fake samples come from during local
/// training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelSampling {
    /// Uniform over all classes.
    Uniform,
    /// Drawn from the labels of the client's own shard.
    #[default]
    Shard,
}

/// Per-client training knobs that do not change the model shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LocalTraining {
    pub generator_loss: GeneratorLoss,
    pub label_sampling: LabelSampling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub generator_loss: GeneratorLoss,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            latent_dim: 4,
            gen_hidden: vec![64, 64],
            disc_hidden: vec![64, 64],
            leaky_slope: 0.2,
            generator_loss: GeneratorLoss::Saturating,
        }
    }
}

/// Generator and discriminator parameters with their architectures.
#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub gen_arch: MlpArch,
    pub disc_arch: MlpArch,
    pub gen_params: ParamVector,
    pub disc_params: ParamVector,
    latent_dim: usize,
    n_classes: usize,
    data_dim: usize,
}

impl GanModel {
    /// Freshly initialised model for `data_dim`-dimensional samples over
    /// `n_classes` labels.
    pub fn new<R: Rng + ?Sized>(
        config: &GanConfig,
        data_dim: usize,
        n_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let (gen_arch, disc_arch) = Self::architectures(config, data_dim, n_classes)?;
        let gen_params = gen_arch.init(rng);
        let disc_params = disc_arch.init(rng);
        Ok(GanModel {
            gen_arch,
            disc_arch,
            gen_params,
            disc_params,
            latent_dim: config.latent_dim,
            n_classes,
            data_dim,
        })
    }

    /// Model with every parameter zero.
    pub fn zeros(config: &GanConfig, data_dim: usize, n_classes: usize) -> Result<Self> {
        let (gen_arch, disc_arch) = Self::architectures(config, data_dim, n_classes)?;
        Ok(GanModel {
            gen_params: ParamVector::zeros(gen_arch.manifest()),
            disc_params: ParamVector::zeros(disc_arch.manifest()),
            gen_arch,
            disc_arch,
            latent_dim: config.latent_dim,
            n_classes,
            data_dim,
        })
    }

    fn architectures(
        config: &GanConfig,
        data_dim: usize,
        n_classes: usize,
    ) -> Result<(MlpArch, MlpArch)> {
        if config.latent_dim == 0 {
            return Err(Error::config("latent_dim", "must be >= 1"));
        }
        if n_classes == 0 {
            return Err(Error::config("classes", "must be >= 1"));
        }
        if data_dim == 0 {
            return Err(Error::config("dim", "must be >= 1"));
        }
        let mut gw = vec![config.latent_dim + n_classes];
        gw.extend(&config.gen_hidden);
        gw.push(data_dim);
        let mut dw = vec![data_dim + n_classes];
        dw.extend(&config.disc_hidden);
        dw.push(1);
        Ok((
            MlpArch::new(gw, config.leaky_slope, OutputActivation::Tanh)?,
            MlpArch::new(dw, config.leaky_slope, OutputActivation::Sigmoid)?,
        ))
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn data_dim(&self) -> usize {
        self.data_dim
    }
}

/// A minibatch of real samples with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::Contract(
                "batch must hold at least one sample".into(),
            ));
        }
        if features.nrows() != labels.len() {
            return Err(Error::Contract(format!(
                "batch has {} rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::Contract(format!(
                "label {y} out of range for {n_classes} classes"
            )));
        }
        if features.iter().any(|v| v.is_nan() || v.abs() > 1.0 + 1e-9) {
            return Err(Error::Contract("batch features must lie in [-1, 1]".into()));
        }
        Ok(Batch { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Latent noise and conditioning labels for `m` generated samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub z: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Latent {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Draws `z ~ N(0, I)` of shape `m x latent_dim` and labels uniform over
/// `0..n_classes`.
pub fn sample_latent<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    latent_dim: usize,
    n_classes: usize,
) -> Latent {
    let z = Array2::from_shape_simple_fn((m, latent_dim), || StandardNormal.sample(rng));
    let labels = (0..m).map(|_| rng.random_range(0..n_classes)).collect();
    Latent { z, labels }
}

/// Like [`sample_latent`], but with labels drawn uniformly from `pool` (so
/// following the pool's empirical class frequencies) when one is given.
pub fn sample_latent_from<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    latent_dim: usize,
    n_classes: usize,
    pool: Option<&[usize]>,
) -> Latent {
    match pool {
        Some(pool) if !pool.is_empty() => {
            let z = Array2::from_shape_simple_fn((m, latent_dim), || StandardNormal.sample(rng));
            let labels = (0..m)
                .map(|_| pool[rng.random_range(0..pool.len())])
                .collect();
            Latent { z, labels }
        }
        _ => sample_latent(rng, m, latent_dim, n_classes),
    }
}

/// `[x | onehot(labels)]`.
pub fn concat_one_hot(x: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize) -> Array2<f64> {
    let (m, d) = x.dim();
    let mut out = Array2::zeros((m, d + n_classes));
    out.slice_mut(s![.., ..d]).assign(&x);
    for (row, &y) in labels.iter().enumerate() {
        out[[row, d + y]] = 1.0;
    }
    out
}

fn check_latent(model: &GanModel, latent: &Latent) -> Result<()> {
    if latent.z.ncols() != model.latent_dim || latent.z.nrows() != latent.labels.len() {
        return Err(Error::Dimension {
            layer: 0,
            expected: format!("latent m x {}", model.latent_dim),
            got: format!("{:?} with {} labels", latent.z.dim(), latent.labels.len()),
        });
    }
    if let Some(&y) = latent.labels.iter().find(|&&y| y >= model.n_classes) {
        return Err(Error::Contract(format!(
            "conditional label {y} out of range"
        )));
    }
    Ok(())
}

fn generate_cached(model: &GanModel, latent: &Latent) -> Result<(Array2<f64>, ForwardCache)> {
    check_latent(model, latent)?;
    let input = concat_one_hot(latent.z.view(), &latent.labels, model.n_classes);
    forward(&model.gen_arch, &model.gen_params, input.view())
}

/// `G(z|y')`: fake samples in `(-1, 1)`.
pub fn generate(model: &GanModel, latent: &Latent) -> Result<Array2<f64>> {
    Ok(generate_cached(model, latent)?.0)
}

fn discriminate_cached(
    model: &GanModel,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<(Vec<f64>, ForwardCache)> {
    if x.ncols() != model.data_dim || x.nrows() != labels.len() {
        return Err(Error::Dimension {
            layer: 0,
            expected: format!("m x {} samples with m labels", model.data_dim),
            got: format!("{:?} with {} labels", x.dim(), labels.len()),
        });
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= model.n_classes) {
        return Err(Error::Contract(format!("label {y} out of range")));
    }
    let input = concat_one_hot(x, labels, model.n_classes);
    let (out, cache) = forward(&model.disc_arch, &model.disc_params, input.view())?;
    Ok((out.column(0).to_vec(), cache))
}

/// `D(x|y)` clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub fn discriminate(
    model: &GanModel,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<Vec<f64>> {
    let (p, _) = discriminate_cached(model, x, labels)?;
    Ok(p.into_iter().map(clamp_prob).collect())
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn in_clamp_interior(p: f64) -> bool {
    p > PROB_CLAMP && p < 1.0 - PROB_CLAMP
}

fn check_pair(real: &Batch, latent: &Latent) -> Result<()> {
    if real.len() != latent.len() {
        return Err(Error::Contract(format!(
            "real batch has {} samples but latent batch has {}",
            real.len(),
            latent.len()
        )));
    }
    Ok(())
}

/// Discriminator objective `(1/m) sum [log D(x|y) + log(1 - D(G(z|y')|y'))]`.
pub fn d_objective(model: &GanModel, real: &Batch, latent: &Latent) -> Result<f64> {
    check_pair(real, latent)?;
    let fake = generate(model, latent)?;
    let p_real = discriminate(model, real.features.view(), &real.labels)?;
    let p_fake = discriminate(model, fake.view(), &latent.labels)?;
    let m = real.len() as f64;
    let real_term: f64 = p_real.iter().map(|p| p.ln()).sum();
    let fake_term: f64 = p_fake.iter().map(|p| (1.0 - p).ln()).sum();
    Ok((real_term + fake_term) / m)
}

/// Discriminator objective and its gradient with respect to `disc_params`.
pub fn d_objective_grad(
    model: &GanModel,
    real: &Batch,
    latent: &Latent,
) -> Result<(f64, ParamVector)> {
    check_pair(real, latent)?;
    let m = real.len() as f64;
    let fake = generate(model, latent)?;
    let (p_real, cache_real) = discriminate_cached(model, real.features.view(), &real.labels)?;
    let (p_fake, cache_fake) = discriminate_cached(model, fake.view(), &latent.labels)?;

    let mut real_term = 0.0;
    let mut g_real = Array2::zeros((p_real.len(), 1));
    for (i, &raw) in p_real.iter().enumerate() {
        let p = clamp_prob(raw);
        real_term += p.ln();
        if in_clamp_interior(raw) {
            g_real[[i, 0]] = 1.0 / (m * p);
        }
    }
    let mut fake_term = 0.0;
    let mut g_fake = Array2::zeros((p_fake.len(), 1));
    for (i, &raw) in p_fake.iter().enumerate() {
        let p = clamp_prob(raw);
        fake_term += (1.0 - p).ln();
        if in_clamp_interior(raw) {
            g_fake[[i, 0]] = -1.0 / (m * (1.0 - p));
        }
    }
    let mut grads = backward(
        &model.disc_arch,
        &model.disc_params,
        &cache_real,
        g_real.view(),
    )?
    .grads;
    let fake_grads = backward(
        &model.disc_arch,
        &model.disc_params,
        &cache_fake,
        g_fake.view(),
    )?
    .grads;
    grads
        .values_mut()
        .iter_mut()
        .zip(fake_grads.values())
        .for_each(|(a, b)| *a += b);
    Ok(((real_term + fake_term) / m, grads))
}

/// Generator objective `(1/m) sum log(1 - D(G(z|y')|y'))`.
pub fn g_objective(model: &GanModel, latent: &Latent) -> Result<f64> {
    generator_loss(model, latent, GeneratorLoss::Saturating)
}

/// Value of the chosen generator loss (the quantity a G step descends).
pub fn generator_loss(model: &GanModel, latent: &Latent, kind: GeneratorLoss) -> Result<f64> {
    if latent.is_empty() {
        return Err(Error::Contract(
            "latent batch must hold at least one sample".into(),
        ));
    }
    let fake = generate(model, latent)?;
    let p = discriminate(model, fake.view(), &latent.labels)?;
    let sum: f64 = match kind {
        GeneratorLoss::Saturating => p.iter().map(|p| (1.0 - p).ln()).sum(),
        GeneratorLoss::NonSaturating => p.iter().map(|p| -p.ln()).sum(),
    };
    Ok(sum / latent.len() as f64)
}

/// Generator loss and its gradient with respect to `gen_params`.
pub fn generator_loss_grad(
    model: &GanModel,
    latent: &Latent,
    kind: GeneratorLoss,
) -> Result<(f64, ParamVector)> {
    if latent.is_empty() {
        return Err(Error::Contract(
            "latent batch must hold at least one sample".into(),
        ));
    }
    let m = latent.len() as f64;
    let (fake, gen_cache) = generate_cached(model, latent)?;
    let (p_fake, disc_cache) = discriminate_cached(model, fake.view(), &latent.labels)?;

    let mut value = 0.0;
    let mut g_out = Array2::zeros((p_fake.len(), 1));
    for (i, &raw) in p_fake.iter().enumerate() {
        let p = clamp_prob(raw);
        let interior = in_clamp_interior(raw);
        match kind {
            GeneratorLoss::Saturating => {
                value += (1.0 - p).ln();
                if interior {
                    g_out[[i, 0]] = -1.0 / (m * (1.0 - p));
                }
            }
            GeneratorLoss::NonSaturating => {
                value -= p.ln();
                if interior {
                    g_out[[i, 0]] = -1.0 / (m * p);
                }
            }
        }
    }
    let through_d = backward(
        &model.disc_arch,
        &model.disc_params,
        &disc_cache,
        g_out.view(),
    )?;
    let d_fake = through_d
        .input_grad
        .slice(s![.., ..model.data_dim])
        .to_owned();
    let grads = backward(
        &model.gen_arch,
        &model.gen_params,
        &gen_cache,
        d_fake.view(),
    )?
    .grads;
    Ok((value / m, grads))
}

/// One Adam ascent step on the discriminator objective. Fake labels come from
/// `label_pool` when given, else uniformly. Returns the objective value at
/// the pre-step parameters.
pub fn train_step_d<R: Rng + ?Sized>(
    model: &mut GanModel,
    real: &Batch,
    rng: &mut R,
    adam_d: &mut AdamState,
    label_pool: Option<&[usize]>,
) -> Result<f64> {
    let latent = sample_latent_from(
        rng,
        real.len(),
        model.latent_dim,
        model.n_classes,
        label_pool,
    );
    let (value, grads) = d_objective_grad(model, real, &latent)?;
    if !value.is_finite() {
        return Err(Error::Numeric(format!(
            "discriminator objective is {value}"
        )));
    }
    adam_d.step(&mut model.disc_params, &grads, Direction::Ascend)?;
    Ok(value)
}

/// One Adam descent step on the generator loss with `m` fresh latent draws.
/// Returns the loss at the pre-step parameters.
pub fn train_step_g<R: Rng + ?Sized>(
    model: &mut GanModel,
    m: usize,
    rng: &mut R,
    adam_g: &mut AdamState,
    kind: GeneratorLoss,
    label_pool: Option<&[usize]>,
) -> Result<f64> {
    let latent = sample_latent_from(rng, m, model.latent_dim, model.n_classes, label_pool);
    let (value, grads) = generator_loss_grad(model, &latent, kind)?;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("generator loss is {value}")));
    }
    adam_g.step(&mut model.gen_params, &grads, Direction::Descend)?;
    Ok(value)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochStats {
    pub d_steps: usize,
    pub g_steps: usize,
    pub batch_sizes: Vec<usize>,
    pub mean_d_objective: f64,
    pub mean_g_loss: f64,
}

/// One pass over `shard` in shuffled minibatches of `batch_size`; the last
/// short batch is kept. Each batch gets one D step followed by one G step.
pub fn local_epoch<R: Rng + ?Sized>(
    model: &mut GanModel,
    shard: &LabeledDataset,
    rng: &mut R,
    adam_d: &mut AdamState,
    adam_g: &mut AdamState,
    batch_size: usize,
    options: LocalTraining,
) -> Result<EpochStats> {
    if shard.is_empty() {
        return Err(Error::config(
            "shard",
            "local epoch needs a non-empty shard",
        ));
    }
    if batch_size == 0 {
        return Err(Error::config("batch_size", "must be >= 1"));
    }
    if shard.dim() != model.data_dim || shard.n_classes() != model.n_classes {
        return Err(Error::Contract(format!(
            "shard ({} dims, {} classes) does not fit model ({} dims, {} classes)",
            shard.dim(),
            shard.n_classes(),
            model.data_dim,
            model.n_classes
        )));
    }
    let mut order: Vec<usize> = (0..shard.len()).collect();
    order.shuffle(rng);

    let pool = match options.label_sampling {
        LabelSampling::Uniform => None,
        LabelSampling::Shard => Some(shard.labels()),
    };
    let kind = options.generator_loss;
    let mut stats = EpochStats::default();
    for chunk in order.chunks(batch_size) {
        let batch = shard.batch(chunk)?;
        stats.mean_d_objective += train_step_d(model, &batch, rng, adam_d, pool)?;
        stats.d_steps += 1;
        stats.mean_g_loss += train_step_g(model, chunk.len(), rng, adam_g, kind, pool)?;
        stats.g_steps += 1;
        stats.batch_sizes.push(chunk.len());
    }
    stats.mean_d_objective /= stats.d_steps as f64;
    stats.mean_g_loss /= stats.g_steps as f64;
    Ok(stats)
}

/// Worst finite-difference disagreement for one randomized model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientFidelity {
    pub d_error: f64,
    pub g_error: f64,
}

/// Builds `instances` small random cGANs and checks both analytic objective
/// gradients against central finite differences.
pub fn gradient_fidelity(instances: usize, seed: u64) -> Result<Vec<GradientFidelity>> {
    use crate::nn::{grad_check, FD_STEP};
    use crate::rng::{derive, Stream};

    (0..instances)
        .map(|i| {
            let mut rng = derive(seed, Stream::Init, i as u64, 0);
            let n_classes = rng.random_range(2..=4);
            let data_dim = rng.random_range(2..=3);
            let config = GanConfig {
                latent_dim: rng.random_range(2..=4),
                gen_hidden: vec![rng.random_range(4..=8), rng.random_range(3..=6)],
                disc_hidden: vec![rng.random_range(4..=8), rng.random_range(3..=6)],
                ..GanConfig::default()
            };
            let model = GanModel::new(&config, data_dim, n_classes, &mut rng)?;
            let m = 4;
            let features =
                Array2::from_shape_simple_fn((m, data_dim), || rng.random_range(-1.0..=1.0));
            let labels = (0..m).map(|_| rng.random_range(0..n_classes)).collect();
            let real = Batch::new(features, labels, n_classes)?;
            let latent = sample_latent(&mut rng, m, config.latent_dim, n_classes);

            let (_, d_grad) = d_objective_grad(&model, &real, &latent)?;
            let d_check = grad_check(
                |p| {
                    let mut probe = model.clone();
                    probe.disc_params = p.clone();
                    d_objective(&probe, &real, &latent).unwrap_or(f64::NAN)
                },
                &model.disc_params,
                &d_grad,
                FD_STEP,
            )?;
            let (_, g_grad) = generator_loss_grad(&model, &latent, GeneratorLoss::Saturating)?;
            let g_check = grad_check(
                |p| {
                    let mut probe = model.clone();
                    probe.gen_params = p.clone();
                    g_objective(&probe, &latent).unwrap_or(f64::NAN)
                },
                &model.gen_params,
                &g_grad,
                FD_STEP,
            )?;
            Ok(GradientFidelity {
                d_error: d_check.max_rel_error,
                g_error: g_check.max_rel_error,
            })
        })
        .collect()
}
