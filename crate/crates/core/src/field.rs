//! Nodal fields: plain value vectors whose layout is owned by a grid.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Nodal values of a function on a grid, boundary rows included
/// (and held at zero for homogeneous Dirichlet data).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(len: usize) -> Self {
        Field {
            values: vec![0.0; len],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Field { values }
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

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Errors out on NaN or infinite entries.
    pub fn ensure_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::domain("field contains non-finite values"))
        }
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            values: self.values.iter().map(|&v| s * v).collect(),
        }
    }

    pub fn negated(&self) -> Field {
        self.scaled(-1.0)
    }

    /// self + s * other, elementwise.
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        }
    }

    /// Nodewise clamp to [-1, 1].
    pub fn clamped_unit(&self) -> Field {
        Field {
            values: self.values.iter().map(|&v| v.clamp(-1.0, 1.0)).collect(),
        }
    }

    pub fn sup_distance(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Count of strict sign alternations along a slice, treating entries with
/// magnitude at or below `threshold` as no-signal.
pub fn sign_change_count(values: &[f64], threshold: f64) -> usize {
    let mut count = 0;
    let mut last = 0i8;
    for &v in values {
        let s = if v > threshold {
            1i8
        } else if v < -threshold {
            -1i8
        } else {
            0i8
        };
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_is_idempotent_and_odd() {
        let f = Field::from_values(vec![-2.0, -0.5, 0.0, 0.5, 2.0]);
        let c = f.clamped_unit();
        assert_eq!(c.values(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(c.clamped_unit().values(), c.values());
        let via_neg = f.negated().clamped_unit().negated();
        assert_eq!(via_neg.values(), c.values());
    }

    #[test]
    fn sign_changes_ignore_small_noise() {
        let v = [1.0, 1e-12, -1.0, -2.0, 1e-12, 3.0];
        assert_eq!(sign_change_count(&v, 1e-9), 2);
        assert_eq!(sign_change_count(&[0.0; 4], 1e-9), 0);
    }

    #[test]
    fn non_finite_detection() {
        assert!(Field::from_values(vec![1.0, f64::NAN]).ensure_finite().is_err());
        assert!(Field::from_values(vec![1.0, -2.0]).ensure_finite().is_ok());
    }
}
