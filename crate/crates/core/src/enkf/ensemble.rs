use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariance::Covariance;
use super::rng::{member_rng, Purpose};
use super::transform::PositivityTransform;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// `M` state vectors stored row-wise, in latent coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble<T> {
    members: Matrix<T>,
    step: u64,
    time: T,
}

impl<T: Real> Ensemble<T> {
    pub fn new(members: Matrix<T>, step: u64, time: T) -> Result<Self> {
        if members.rows() < 2 {
            return Err(Error::config(format!("ensemble needs at least 2 members, got {}", members.rows())));
        }
        if !members.is_finite() {
            return Err(Error::numerical("ensemble contains non-finite entries"));
        }
        Ok(Self { members, step, time })
    }

    pub fn size(&self) -> usize {
        self.members.rows()
    }

    pub fn dim(&self) -> usize {
        self.members.cols()
    }

    pub fn time(&self) -> T {
        self.time
    }

    /// Number of forecast steps taken since initialization.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn member(&self, i: usize) -> &[T] {
        self.members.row(i)
    }

    pub fn members(&self) -> &Matrix<T> {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut Matrix<T> {
        &mut self.members
    }

    pub(crate) fn advance_clock(&mut self, delta_t: T) {
        self.step += 1;
        self.time = T::from_count(self.step as usize) * delta_t;
    }

    pub fn mean(&self) -> Vec<T> {
        column_mean(&self.members)
    }

    /// Mean and per-coordinate variance (`1/(M-1)` normalization) in
    /// physical coordinates.
    pub fn physical_mean_and_variance(&self, transform: &PositivityTransform) -> (Vec<T>, Vec<T>) {
        let physical = self.physical_members(transform);
        let mean = column_mean(&physical);
        let m = physical.rows();
        let mut var = vec![T::zero(); mean.len()];
        for i in 0..m {
            for ((v, &x), &mu) in var.iter_mut().zip(physical.row(i)).zip(&mean) {
                let d = x - mu;
                *v += d * d;
            }
        }
        let denom = T::from_count(m - 1);
        var.iter_mut().for_each(|v| *v /= denom);
        (mean, var)
    }

    pub fn physical_members(&self, transform: &PositivityTransform) -> Matrix<T> {
        let mut physical = self.members.clone();
        if !transform.is_empty() {
            for i in 0..physical.rows() {
                transform.to_physical_in_place(physical.row_mut(i));
            }
        }
        physical
    }
}

fn column_mean<T: Real>(m: &Matrix<T>) -> Vec<T> {
    let mut mean = vec![T::zero(); m.cols()];
    for i in 0..m.rows() {
        for (acc, &x) in mean.iter_mut().zip(m.row(i)) {
            *acc += x;
        }
    }
    let n = T::from_count(m.rows());
    mean.iter_mut().for_each(|v| *v /= n);
    mean
}

/// Sample mean and covariance, the latter normalized by `1/(M-1)`.
pub fn ensemble_moments<T: Real>(ens: &Ensemble<T>) -> (Vec<T>, Matrix<T>) {
    moments_of(ens.members())
}

pub(crate) fn moments_of<T: Real>(members: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let mean = column_mean(members);
    let n = members.cols();
    let mut cov = Matrix::zeros(n, n);
    let mut d = vec![T::zero(); n];
    for i in 0..members.rows() {
        for ((dk, &x), &mu) in d.iter_mut().zip(members.row(i)).zip(&mean) {
            *dk = x - mu;
        }
        for p in 0..n {
            let dp = d[p];
            let row = cov.row_mut(p);
            for q in p..n {
                row[q] += dp * d[q];
            }
        }
    }
    let denom = T::from_count(members.rows() - 1);
    for p in 0..n {
        for q in p..n {
            let v = cov[(p, q)] / denom;
            cov[(p, q)] = v;
            cov[(q, p)] = v;
        }
    }
    (mean, cov)
}

/// Gaussian initial condition `N(mean, cov)` in latent coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianInit<T> {
    pub mean: Vec<T>,
    pub cov: Covariance<T>,
}

impl<T: Real> GaussianInit<T> {
    pub fn new(mean: Vec<T>, cov: Covariance<T>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::config(format!(
                "initial mean has dimension {} but covariance has {}",
                mean.len(),
                cov.dim()
            )));
        }
        Ok(Self { mean, cov })
    }

    /// `size` independent draws; member `i` uses its own seeded stream.
    pub fn sample(&self, size: usize, seed: u64) -> Result<Ensemble<T>> {
        if size < 2 {
            return Err(Error::config(format!("ensemble needs at least 2 members, got {size}")));
        }
        let dim = self.mean.len();
        let mut members = Matrix::zeros(size, dim);
        members
            .as_mut_slice()
            .par_chunks_mut(dim.max(1))
            .enumerate()
            .for_each(|(i, row)| {
                let mut rng = member_rng(seed, Purpose::Init, 0, i);
                self.cov.sample_into(&mut rng, row);
                for (x, &m) in row.iter_mut().zip(&self.mean) {
                    *x += m;
                }
            });
        Ensemble::new(members, 0, T::zero())
    }
}
