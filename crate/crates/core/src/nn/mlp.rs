use ndarray::{linalg::general_mat_mul, Array2, ArrayView2, Axis};
use rand::Rng;

use super::params::{LayerShape, ParamVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputActivation {
    Tanh,
    Sigmoid,
    Softmax,
    Identity,
}

/// Architecture of a dense network: LeakyReLU on every hidden layer and a
/// configurable output activation.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpArch {
    widths: Vec<usize>,
    leaky_slope: f64,
    output: OutputActivation,
}

impl MlpArch {
    /// `widths` lists input, hidden and output widths in order.
    pub fn new(widths: Vec<usize>, leaky_slope: f64, output: OutputActivation) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::config(
                "widths",
                format!("need input, at least one hidden and an output width, got {widths:?}"),
            ));
        }
        if widths.contains(&0) {
            return Err(Error::config(
                "widths",
                format!("widths must be >= 1, got {widths:?}"),
            ));
        }
        if !(leaky_slope > 0.0 && leaky_slope < 1.0) {
            return Err(Error::config(
                "leaky_slope",
                format!("slope must lie in (0,1), got {leaky_slope}"),
            ));
        }
        Ok(MlpArch {
            widths,
            leaky_slope,
            output,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated non-empty")
    }

    pub fn leaky_slope(&self) -> f64 {
        self.leaky_slope
    }

    pub fn output(&self) -> OutputActivation {
        self.output
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn manifest(&self) -> Vec<LayerShape> {
        self.widths
            .windows(2)
            .enumerate()
            .map(|(layer, w)| LayerShape {
                layer,
                rows: w[0],
                cols: w[1],
                bias: w[1],
            })
            .collect()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut params = ParamVector::zeros(self.manifest());
        for layer in 0..self.n_layers() {
            let (mut w, _) = params.layer_mut(layer);
            let (fan_in, fan_out) = w.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.iter_mut()
                .for_each(|x| *x = rng.random_range(-limit..=limit));
        }
        params
    }

    pub fn check_params(&self, params: &ParamVector) -> Result<()> {
        let expected = self.manifest();
        if let Some(layer) = super::params::first_divergent_layer(&expected, params.manifest()) {
            return Err(Error::Dimension {
                layer,
                expected: format!("{:?}", expected.get(layer)),
                got: format!("{:?}", params.manifest().get(layer)),
            });
        }
        Ok(())
    }
}

/// Activations recorded by [`forward`] for use by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }
}

/// Gradients produced by [`backward`]: parameters and network input.
#[derive(Debug, Clone)]
pub struct Backward {
    pub grads: ParamVector,
    pub input_grad: Array2<f64>,
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Largest `f64` below one. Saturating outputs are pinned here so tanh stays
/// in `(-1, 1)` and sigmoid in `(0, 1)`.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

fn tanh(x: f64) -> f64 {
    x.tanh().clamp(-BELOW_ONE, BELOW_ONE)
}

fn apply_output(act: OutputActivation, pre: &Array2<f64>) -> Array2<f64> {
    match act {
        OutputActivation::Identity => pre.clone(),
        OutputActivation::Tanh => pre.mapv(tanh),
        OutputActivation::Sigmoid => pre.mapv(sigmoid),
        OutputActivation::Softmax => {
            let mut out = pre.clone();
            for mut row in out.rows_mut() {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row.mapv_inplace(|v| (v - max).exp());
                let sum = row.sum();
                row.mapv_inplace(|v| v / sum);
            }
            out
        }
    }
}

/// Evaluates the network on a batch (one sample per row).
pub fn forward(
    arch: &MlpArch,
    params: &ParamVector,
    input: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, ForwardCache)> {
    arch.check_params(params)?;
    if input.ncols() != arch.input_width() {
        return Err(Error::Dimension {
            layer: 0,
            expected: format!("input width {}", arch.input_width()),
            got: format!("input width {}", input.ncols()),
        });
    }
    let n_layers = arch.n_layers();
    let mut inputs = Vec::with_capacity(n_layers);
    let mut pre = Vec::with_capacity(n_layers);
    let mut x = input.to_owned();
    for layer in 0..n_layers {
        let mut a = x.dot(&params.weights(layer));
        a += &params.bias(layer);
        let next = if layer + 1 == n_layers {
            apply_output(arch.output, &a)
        } else {
            a.mapv(|v| leaky(v, arch.leaky_slope))
        };
        inputs.push(x);
        pre.push(a);
        x = next;
    }
    let cache = ForwardCache {
        fingerprint: params.fingerprint(),
        inputs,
        pre,
        output: x.clone(),
    };
    Ok((x, cache))
}

/// Back-propagates `output_grad` (dL/d output, one row per sample) through the
/// network. Parameter gradients are summed over the batch; callers fold any
/// `1/m` normalisation into `output_grad`.
pub fn backward(
    arch: &MlpArch,
    params: &ParamVector,
    cache: &ForwardCache,
    output_grad: ArrayView2<'_, f64>,
) -> Result<Backward> {
    arch.check_params(params)?;
    if cache.fingerprint != params.fingerprint() || cache.pre.len() != arch.n_layers() {
        return Err(Error::Contract(
            "forward cache was produced with different parameters".into(),
        ));
    }
    if output_grad.dim() != cache.output.dim() {
        return Err(Error::Dimension {
            layer: arch.n_layers() - 1,
            expected: format!("output grad {:?}", cache.output.dim()),
            got: format!("output grad {:?}", output_grad.dim()),
        });
    }

    let n_layers = arch.n_layers();
    let mut grads = params.zeros_like();

    let mut delta = match arch.output {
        OutputActivation::Identity => output_grad.to_owned(),
        OutputActivation::Tanh => {
            let mut d = output_grad.to_owned();
            d.zip_mut_with(&cache.output, |g, &y| *g *= 1.0 - y * y);
            d
        }
        OutputActivation::Sigmoid => {
            let mut d = output_grad.to_owned();
            d.zip_mut_with(&cache.output, |g, &y| *g *= y * (1.0 - y));
            d
        }
        OutputActivation::Softmax => {
            let mut d = output_grad.to_owned();
            for (mut g, s) in d.rows_mut().into_iter().zip(cache.output.rows()) {
                let dot = g.dot(&s);
                g.zip_mut_with(&s, |gi, &si| *gi = si * (*gi - dot));
            }
            d
        }
    };

    for layer in (0..n_layers).rev() {
        if layer + 1 < n_layers {
            let slope = arch.leaky_slope;
            delta.zip_mut_with(&cache.pre[layer], |g, &a| {
                if a <= 0.0 {
                    *g *= slope
                }
            });
        }
        let x = &cache.inputs[layer];
        let next_delta = delta.dot(&params.weights(layer).t());
        let (mut dw, mut db) = grads.layer_mut(layer);
        general_mat_mul(1.0, &x.t(), &delta, 0.0, &mut dw);
        db.assign(&delta.sum_axis(Axis(0)));
        delta = next_delta;
    }

    Ok(Backward {
        grads,
        input_grad: delta,
    })
}
