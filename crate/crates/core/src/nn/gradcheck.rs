use super::params::ParamVector;
use crate::error::{Error, Result};

/// Central-difference step used throughout the verification suites.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Coordinate where the maximum was attained.
    pub worst_index: usize,
}

/// Compares `analytic` against central finite differences of `loss`.
///
/// The relative error per coordinate is
/// `|analytic - fd| / max(|analytic|, |fd|, 1e-8)`.
pub fn grad_check<F>(
    mut loss: F,
    params: &ParamVector,
    analytic: &ParamVector,
    fd_step: f64,
) -> Result<GradCheck>
where
    F: FnMut(&ParamVector) -> f64,
{
    if fd_step.is_nan() || fd_step <= 0.0 {
        return Err(Error::config(
            "fd_step",
            format!("must be > 0, got {fd_step}"),
        ));
    }
    params.check_same_manifest(analytic).map_err(|_| {
        Error::Contract("analytic gradient manifest differs from parameters".into())
    })?;

    let mut probe = params.clone();
    let mut worst = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
    };
    for i in 0..params.len() {
        let orig = params.values()[i];
        probe.values_mut()[i] = orig + fd_step;
        let plus = loss(&probe);
        probe.values_mut()[i] = orig - fd_step;
        let minus = loss(&probe);
        probe.values_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "loss is non-finite when perturbing coordinate {i}"
            )));
        }
        let fd = (plus - minus) / (2.0 * fd_step);
        let a = analytic.values()[i];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
        if rel > worst.max_rel_error {
            worst = GradCheck {
                max_rel_error: rel,
                worst_index: i,
            };
        }
    }
    Ok(worst)
}
