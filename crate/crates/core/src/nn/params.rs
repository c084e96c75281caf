use std::ops::Range;

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};

use crate::error::{Error, Result};

/// Shape of one dense layer inside a [`ParamVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerShape {
    pub layer: usize,
    /// Weight rows (fan-in).
    pub rows: usize,
    /// Weight columns (fan-out).
    pub cols: usize,
    pub bias: usize,
}

impl LayerShape {
    pub fn len(&self) -> usize {
        self.rows * self.cols + self.bias
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flattened model parameters plus the manifest that gives them shape.
///
/// Layout per layer: row-major weights followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    manifest: Vec<LayerShape>,
}

impl ParamVector {
    pub fn zeros(manifest: Vec<LayerShape>) -> Self {
        let len = manifest.iter().map(LayerShape::len).sum();
        ParamVector {
            values: vec![0.0; len],
            manifest,
        }
    }

    pub fn from_values(manifest: Vec<LayerShape>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = manifest.iter().map(LayerShape::len).sum();
        if values.len() != expected {
            return Err(Error::Contract(format!(
                "parameter vector has {} values but manifest describes {}",
                values.len(),
                expected
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite parameter at index {i}")));
        }
        Ok(ParamVector { values, manifest })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the raw values. Callers keep them finite.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn manifest(&self) -> &[LayerShape] {
        &self.manifest
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// A copy with the same manifest and every value set to zero.
    pub fn zeros_like(&self) -> Self {
        ParamVector::zeros(self.manifest.clone())
    }

    fn layer_range(&self, layer: usize) -> (Range<usize>, Range<usize>) {
        let offset: usize = self.manifest[..layer].iter().map(LayerShape::len).sum();
        let shape = self.manifest[layer];
        let w_end = offset + shape.rows * shape.cols;
        (offset..w_end, w_end..w_end + shape.bias)
    }

    pub fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        let shape = self.manifest[layer];
        let (w, _) = self.layer_range(layer);
        ArrayView2::from_shape((shape.rows, shape.cols), &self.values[w])
            .expect("manifest describes the slice")
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let (_, b) = self.layer_range(layer);
        ArrayView1::from(&self.values[b])
    }

    pub fn layer_mut(&mut self, layer: usize) -> (ArrayViewMut2<'_, f64>, ArrayViewMut1<'_, f64>) {
        let shape = self.manifest[layer];
        let (w, b) = self.layer_range(layer);
        let (head, tail) = self.values[w.start..b.end].split_at_mut(w.len());
        (
            ArrayViewMut2::from_shape((shape.rows, shape.cols), head)
                .expect("manifest describes the slice"),
            ArrayViewMut1::from(tail),
        )
    }

    /// Checks that `other` has an identical manifest, naming the first layer
    /// that differs.
    pub fn check_same_manifest(&self, other: &ParamVector) -> Result<()> {
        if let Some(i) = first_divergent_layer(&self.manifest, &other.manifest) {
            return Err(Error::Fusion {
                layer: i,
                reason: format!(
                    "manifest mismatch: {:?} vs {:?}",
                    self.manifest.get(i),
                    other.manifest.get(i)
                ),
            });
        }
        Ok(())
    }

    /// Order-sensitive hash of manifest and value bits, used to detect a
    /// forward cache that no longer belongs to these parameters.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01B3;
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        let mut mix = |x: u64| {
            h ^= x;
            h = h.wrapping_mul(PRIME);
        };
        for s in &self.manifest {
            mix(s.layer as u64);
            mix(s.rows as u64);
            mix(s.cols as u64);
            mix(s.bias as u64);
        }
        for v in &self.values {
            mix(v.to_bits());
        }
        h
    }
}

pub(crate) fn first_divergent_layer(a: &[LayerShape], b: &[LayerShape]) -> Option<usize> {
    let common = a.len().min(b.len());
    (0..common)
        .find(|&i| a[i] != b[i])
        .or((a.len() != b.len()).then_some(common))
}
