//! Dense row-major tensor used by the network engine.
//!
//! Values are `f64` so that gradient checks against central finite
//! differences stay well below the 1e-4 relative-error bar.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{shape:?} ({n} elements)"),
                got: format!("{} elements", data.len()),
            });
        }
        let t = Tensor {
            shape: shape.to_vec(),
            data,
        };
        t.debug_check_finite();
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Elementwise map, shape preserved.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        let t = Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        };
        t.debug_check_finite();
        t
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    // Invariant: no NaN/Inf survives an operation. Checked in debug builds.
    #[inline]
    pub(crate) fn debug_check_finite(&self) {
        debug_assert!(self.all_finite(), "tensor contains non-finite values");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_element_count() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn shape_product_matches_len() {
        let t = Tensor::zeros(&[2, 3, 4]);
        assert_eq!(t.shape().iter().product::<usize>(), t.len());
    }

    #[test]
    fn map_preserves_shape() {
        let t = Tensor::from_vec(&[2, 2], vec![1.0, -2.0, 3.0, -4.0]).unwrap();
        let u = t.map(f64::abs);
        assert_eq!(u.shape(), t.shape());
        assert_eq!(u.data(), &[1.0, 2.0, 3.0, 4.0]);
    }
}
