use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// State coordinates stored as logarithms so their physical values stay
/// strictly positive.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositivityTransform {
    indices: Vec<usize>,
}

impl PositivityTransform {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::config(format!("positivity index {bad} outside state of dimension {dim}")));
        }
        Ok(Self { indices })
    }

    /// The last `count` coordinates of a `dim`-dimensional state.
    pub fn trailing(count: usize, dim: usize) -> Result<Self> {
        if count > dim {
            return Err(Error::config(format!("cannot transform {count} coordinates of a {dim}-dimensional state")));
        }
        Self::new(((dim - count)..dim).collect(), dim)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn to_physical_in_place<T: Real>(&self, v: &mut [T]) {
        for &i in &self.indices {
            v[i] = v[i].exp();
        }
    }

    pub fn to_latent_in_place<T: Real>(&self, v: &mut [T]) -> Result<()> {
        for &i in &self.indices {
            if !(v[i] > T::zero()) {
                return Err(Error::domain(format!(
                    "coordinate {i} must be strictly positive for the log transform, got {}",
                    v[i]
                )));
            }
        }
        for &i in &self.indices {
            v[i] = v[i].ln();
        }
        Ok(())
    }

    pub fn to_physical<T: Real>(&self, latent: &[T]) -> Vec<T> {
        let mut v = latent.to_vec();
        self.to_physical_in_place(&mut v);
        v
    }

    pub fn to_latent<T: Real>(&self, physical: &[T]) -> Result<Vec<T>> {
        let mut v = physical.to_vec();
        self.to_latent_in_place(&mut v)?;
        Ok(v)
    }
}
