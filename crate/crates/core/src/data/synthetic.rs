use std::f64::consts::PI;

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Geometry of the labeled Gaussian mixture.
///
/// Class `c` is centred at angle `2*pi*c/classes` on a circle of `radius` in
/// the first two dimensions (zero elsewhere), with isotropic spread `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub radius: f64,
    pub sigma: f64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec {
            classes: 8,
            per_class: 500,
            dim: 2,
            radius: 0.8,
            sigma: 0.05,
        }
    }
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::config("classes", "need at least 2 classes"));
        }
        if self.per_class == 0 {
            return Err(Error::config("per_class", "must be >= 1"));
        }
        if self.dim < 2 {
            return Err(Error::config("dim", "must be >= 2"));
        }
        if !(self.radius > 0.0 && self.radius <= 0.9) {
            return Err(Error::config("radius", "must lie in (0, 0.9]"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("sigma", "must be > 0"));
        }
        Ok(())
    }

    pub fn class_mean(&self, class: usize) -> Vec<f64> {
        let angle = 2.0 * PI * class as f64 / self.classes as f64;
        let mut mean = vec![0.0; self.dim];
        mean[0] = self.radius * angle.cos();
        mean[1] = self.radius * angle.sin();
        mean
    }
}

/// `classes * per_class` samples, grouped by class, clamped to `[-1, 1]`.
pub fn gen_gaussian_mixture(spec: &MixtureSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = seeded(seed);
    let n = spec.classes * spec.per_class;
    let mut features = Array2::zeros((n, spec.dim));
    let mut labels = Vec::with_capacity(n);
    for class in 0..spec.classes {
        let mean = spec.class_mean(class);
        for i in 0..spec.per_class {
            let row = class * spec.per_class + i;
            for (j, &mu) in mean.iter().enumerate() {
                let noise: f64 = StandardNormal.sample(&mut rng);
                features[[row, j]] = (mu + spec.sigma * noise).clamp(-1.0, 1.0);
            }
            labels.push(class);
        }
    }
    LabeledDataset::new(features, labels, spec.classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_labels() {
        let spec = MixtureSpec {
            classes: 2,
            per_class: 1,
            ..MixtureSpec::default()
        };
        let d = gen_gaussian_mixture(&spec, 0).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.labels(), &[0, 1]);

        let d = gen_gaussian_mixture(&MixtureSpec::default(), 0).unwrap();
        assert_eq!(d.class_histogram(), vec![500; 8]);
        d.check_class_coverage().unwrap();
    }

    #[test]
    fn degenerate_spread_sits_on_means() {
        let spec = MixtureSpec {
            sigma: 1e-9,
            dim: 4,
            ..MixtureSpec::default()
        };
        let d = gen_gaussian_mixture(&spec, 3).unwrap();
        for (row, &y) in d.features().rows().into_iter().zip(d.labels()) {
            for (v, mu) in row.iter().zip(spec.class_mean(y)) {
                assert!((v - mu).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn invalid_geometry_rejected() {
        let bad = [
            MixtureSpec {
                classes: 1,
                ..MixtureSpec::default()
            },
            MixtureSpec {
                per_class: 0,
                ..MixtureSpec::default()
            },
            MixtureSpec {
                dim: 1,
                ..MixtureSpec::default()
            },
            MixtureSpec {
                radius: 0.95,
                ..MixtureSpec::default()
            },
            MixtureSpec {
                radius: 0.0,
                ..MixtureSpec::default()
            },
            MixtureSpec {
                sigma: 0.0,
                ..MixtureSpec::default()
            },
        ];
        for spec in bad {
            assert!(
                matches!(gen_gaussian_mixture(&spec, 0), Err(Error::Config { .. })),
                "{spec:?}"
            );
        }
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let a = gen_gaussian_mixture(&MixtureSpec::default(), 9).unwrap();
        let b = gen_gaussian_mixture(&MixtureSpec::default(), 9).unwrap();
        assert_eq!(a, b);
    }
}
