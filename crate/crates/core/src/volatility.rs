//! Log returns and normalized volatility.
//!
//! `R(t) = ln(x(t) / x(t-1))` over consecutive records, and
//! `nu(t) = |R(t)| / sigma` where `sigma` is the standard deviation of `|R|`
//! over the whole series. The same functions serve volume and price inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub values: Vec<f64>,
    pub source_len: usize,
    /// Steps dropped because one side of the ratio was zero.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolatilitySeries {
    pub values: Vec<f64>,
    /// Standard deviation of `|R|` used as the divisor.
    pub norm_std: f64,
}

impl VolatilitySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Divisor convention for the moments of `|R|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentConvention {
    /// Time averages, dividing by `N`.
    #[default]
    Population,
    /// Unbiased variance, dividing by `N - 1`.
    Sample,
}

/// Log returns of consecutive pairs. A zero on either side of a step makes
/// the step undefined; it is dropped and counted rather than imputed.
pub fn log_returns(x: &[f64]) -> Result<ReturnSeries> {
    if x.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 observations for returns, got {}",
            x.len()
        )));
    }
    if let Some(bad) = x.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "series values must be finite and non-negative, found {bad}"
        )));
    }
    let mut values = Vec::with_capacity(x.len() - 1);
    let mut dropped = 0;
    for w in x.windows(2) {
        if w[0] == 0.0 || w[1] == 0.0 {
            dropped += 1;
        } else {
            values.push((w[1] / w[0]).ln());
        }
    }
    Ok(ReturnSeries {
        values,
        source_len: x.len(),
        dropped,
    })
}

pub fn normalize_volatility(r: &ReturnSeries) -> Result<VolatilitySeries> {
    normalize_volatility_with(r, MomentConvention::Population)
}

pub fn normalize_volatility_with(
    r: &ReturnSeries,
    convention: MomentConvention,
) -> Result<VolatilitySeries> {
    let n = r.values.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 returns to normalize, got {n}"
        )));
    }
    let abs: Vec<f64> = r.values.iter().map(|v| v.abs()).collect();
    let first = abs[0];
    if abs.iter().all(|&a| a == first) {
        return Err(Error::Degenerate(
            "all absolute returns are equal; volatility is undefined".into(),
        ));
    }
    let mean = abs.iter().sum::<f64>() / n as f64;
    let ss: f64 = abs.iter().map(|a| (a - mean) * (a - mean)).sum();
    let denom = match convention {
        MomentConvention::Population => n as f64,
        MomentConvention::Sample => (n - 1) as f64,
    };
    let norm_std = (ss / denom).sqrt();
    if !(norm_std > 0.0 && norm_std.is_finite()) {
        return Err(Error::Degenerate(format!(
            "standard deviation of |R| is {norm_std}"
        )));
    }
    Ok(VolatilitySeries {
        values: abs.iter().map(|a| a / norm_std).collect(),
        norm_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::E;

    #[test]
    fn ln_identities() {
        let r = log_returns(&[1.0, E, E]).unwrap();
        assert_relative_eq!(r.values[0], 1.0, epsilon = 1e-15);
        assert_eq!(r.values[1], 0.0);
        assert_eq!(log_returns(&[2.0; 4]).unwrap().values, vec![0.0; 3]);
    }

    #[test]
    fn zero_steps_are_dropped() {
        let r = log_returns(&[1.0, 0.0, 1.0]).unwrap();
        assert!(r.values.is_empty());
        assert_eq!(r.dropped, 2);
        assert_eq!(r.source_len, 3);
    }

    #[test]
    fn too_short_is_degenerate() {
        assert!(matches!(log_returns(&[1.0]), Err(Error::Degenerate(_))));
        assert!(matches!(
            log_returns(&[1.0, -1.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn normalization_hand_example() {
        // |R| = [0, 2]: mean 1, mean of squares 2, std 1.
        let r = ReturnSeries {
            values: vec![0.0, -2.0],
            source_len: 3,
            dropped: 0,
        };
        let v = normalize_volatility(&r).unwrap();
        assert_eq!(v.values, vec![0.0, 2.0]);
        assert_eq!(v.norm_std, 1.0);
    }

    #[test]
    fn constant_magnitude_is_degenerate() {
        let r = ReturnSeries {
            values: vec![0.3, -0.3, 0.3],
            source_len: 4,
            dropped: 0,
        };
        assert!(matches!(
            normalize_volatility(&r),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn sample_convention_divides_by_n_minus_one() {
        let r = ReturnSeries {
            values: vec![0.0, 2.0],
            source_len: 3,
            dropped: 0,
        };
        let v = normalize_volatility_with(&r, MomentConvention::Sample).unwrap();
        assert_relative_eq!(v.norm_std, 2f64.sqrt());
    }

    #[test]
    fn geometric_series_has_constant_return() {
        let x: Vec<f64> = (0..20).map(|i| 3.0 * 1.1f64.powi(i)).collect();
        for r in log_returns(&x).unwrap().values {
            assert_relative_eq!(r, 1.1f64.ln(), epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn scale_invariant_and_unit_std(
            vals in prop::collection::vec(-5.0f64..5.0, 3..200),
            k in 0.01f64..100.0,
        ) {
            let r = ReturnSeries { values: vals.clone(), source_len: vals.len() + 1, dropped: 0 };
            let scaled = ReturnSeries { values: vals.iter().map(|v| v * k).collect(), ..r.clone() };
            let (a, b) = match (normalize_volatility(&r), normalize_volatility(&scaled)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => return Ok(()),
            };
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
            let n = a.values.len() as f64;
            let m = a.values.iter().sum::<f64>() / n;
            let m2 = a.values.iter().map(|v| v * v).sum::<f64>() / n;
            prop_assert!((m2 - m * m - 1.0).abs() < 1e-9);
            prop_assert!(a.values.iter().all(|v| *v >= 0.0));
        }
    }
}
