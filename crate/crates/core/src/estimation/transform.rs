//! Unconstrained coordinates for the noise parameters:
//! `lambda = exp(l)` and `kappa = 1 / (1 + exp(-k))`.

use alloc::format;

use crate::choice::logistic;
use crate::error::{Error, Result};
use crate::math::{exp, ln};

/// Tremble probabilities are clamped into `[KAPPA_CLAMP, 1 - KAPPA_CLAMP]`
/// before the logit transform.
pub const KAPPA_CLAMP: f64 = 1e-12;

pub fn transform_params(lambda: f64, kappa: f64) -> Result<(f64, f64)> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
    }
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} must lie in [0, 1]")));
    }
    let k = kappa.clamp(KAPPA_CLAMP, 1.0 - KAPPA_CLAMP);
    Ok((ln(lambda), ln(k) - ln(1.0 - k)))
}

pub fn inverse_transform(lambda_tilde: f64, kappa_tilde: f64) -> (f64, f64) {
    (exp(lambda_tilde), logistic(kappa_tilde))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points() {
        assert_eq!(transform_params(1.0, 0.5).unwrap(), (0.0, 0.0));
        assert!(transform_params(0.0, 0.5).is_err());
        let (_, k) = transform_params(2.0, 0.0).unwrap();
        assert!((inverse_transform(0.0, k).1 - KAPPA_CLAMP).abs() < 1e-20);
    }

    #[test]
    fn round_trip() {
        for (l, k) in [(0.003, 0.05), (1e-4, 0.3), (250.0, 1e-6), (7.0, 0.999)] {
            let (lt, kt) = transform_params(l, k).unwrap();
            let (l2, k2) = inverse_transform(lt, kt);
            assert!(((l2 - l) / l).abs() < 1e-12 && (k2 - k).abs() < 1e-12);
        }
    }
}
