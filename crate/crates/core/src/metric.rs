//! Mass metric on the configuration space `R^{n d}`.
//!
//! Configurations are flat slices `[x_1, ..., x_n]` with `x_i ∈ R^d`.
//! All norms, inner products and gradients in the crate go through
//! [`MassMetric`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassMetric {
    masses: Vec<f64>,
    dim: usize,
}

impl MassMetric {
    pub fn new(masses: Vec<f64>, dim: usize) -> Result<Self> {
        if masses.is_empty() || dim == 0 {
            return Err(Error::InvalidInput("metric needs at least one body and dimension >= 1".into()));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidInput(format!("masses must be positive, got {m}")));
        }
        Ok(Self { masses, dim })
    }

    /// Unit masses.
    pub fn unit(n: usize, dim: usize) -> Self {
        Self { masses: vec![1.0; n], dim }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn bodies(&self) -> usize {
        self.masses.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length `n d` of a configuration vector.
    pub fn size(&self) -> usize {
        self.masses.len() * self.dim
    }

    /// Mass attached to coordinate `k` of the flat vector.
    #[inline]
    pub fn coord_mass(&self, k: usize) -> f64 {
        self.masses[k / self.dim]
    }

    pub fn body<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn dot(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.size());
        let d = self.dim;
        let mut acc = 0.0;
        for (i, m) in self.masses.iter().enumerate() {
            let mut s = 0.0;
            for k in i * d..(i + 1) * d {
                s += x[k] * y[k];
            }
            acc += m * s;
        }
        acc
    }

    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        self.dot(x, x)
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        self.norm_sq(x).sqrt()
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.norm(&diff)
    }

    /// Turn Euclidean partials `∂U/∂x` into the mass-metric gradient `M^{-1} ∂U/∂x`.
    pub fn raise(&self, covector: &mut [f64]) {
        for (k, g) in covector.iter_mut().enumerate() {
            *g /= self.coord_mass(k);
        }
    }

    /// Inverse of [`raise`](Self::raise).
    pub fn lower(&self, vector: &mut [f64]) {
        for (k, g) in vector.iter_mut().enumerate() {
            *g *= self.coord_mass(k);
        }
    }

    /// Total mass.
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Center of mass of a configuration.
    pub fn center_of_mass(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut c = vec![0.0; d];
        for (i, m) in self.masses.iter().enumerate() {
            for a in 0..d {
                c[a] += m * x[i * d + a];
            }
        }
        let total = self.total_mass();
        c.iter_mut().for_each(|v| *v /= total);
        c
    }

    /// Uniformly distributed unit configuration (mass metric).
    pub fn random_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        loop {
            let mut v: Vec<f64> = (0..self.size())
                .map(|k| rng.sample::<f64, _>(StandardNormal) / self.coord_mass(k).sqrt())
                .collect();
            let r = self.norm(&v);
            if r > 1e-8 {
                v.iter_mut().for_each(|c| *c /= r);
                return v;
            }
        }
    }
}
