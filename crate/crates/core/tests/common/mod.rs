#![allow(dead_code)]

use fedgan::cgan::{GanConfig, GanModel};
use fedgan::metrics::{argmax, Oracle};
use fedgan::nn::ParamVector;
use fedgan::Result;
use ndarray::{Array2, ArrayView2};
use rand::Rng;

/// Predicts the class whose feature column is largest.
pub struct FeatureArgmax(pub usize);

impl Oracle for FeatureArgmax {
    fn n_classes(&self) -> usize {
        self.0
    }
    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut p = Array2::zeros((x.nrows(), self.0));
        for (i, row) in x.rows().into_iter().enumerate() {
            p[[i, argmax(row.iter().take(self.0).copied())]] = 1.0;
        }
        Ok(p)
    }
}

/// Always predicts class 0.
pub struct ConstantOracle(pub usize);

impl Oracle for ConstantOracle {
    fn n_classes(&self) -> usize {
        self.0
    }
    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut p = Array2::zeros((x.nrows(), self.0));
        p.column_mut(0).fill(1.0);
        Ok(p)
    }
}

/// Generator that writes its conditioning one-hot into the output, so the
/// sample's largest coordinate is its label.
pub fn label_echo_generator(classes: usize) -> GanModel {
    let config = GanConfig {
        latent_dim: 2,
        gen_hidden: vec![classes],
        disc_hidden: vec![2],
        ..Default::default()
    };
    let mut model = GanModel::zeros(&config, classes, classes).unwrap();
    {
        let (mut w0, _) = model.gen_params.layer_mut(0);
        for c in 0..classes {
            w0[[2 + c, c]] = 1.0;
        }
    }
    let (mut w1, _) = model.gen_params.layer_mut(1);
    for c in 0..classes {
        w1[[c, c]] = 1.0;
    }
    model
}

/// Same manifest as `like`, entries uniform in [-scale, scale].
pub fn random_like<R: Rng + ?Sized>(like: &ParamVector, rng: &mut R, scale: f64) -> ParamVector {
    let mut out = like.zeros_like();
    out.values_mut()
        .iter_mut()
        .for_each(|v| *v = rng.random_range(-scale..=scale));
    out
}

pub fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for word in [0x0803, count, rows, cols] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for word in [0x0801, labels.len() as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend_from_slice(labels);
    out
}
