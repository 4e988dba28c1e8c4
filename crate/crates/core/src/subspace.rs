//! Linear subspaces of the configuration space with mass-metric
//! orthonormal bases.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metric::MassMetric;

const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Subspace {
    metric: MassMetric,
    basis: Vec<Vec<f64>>,
}

impl Subspace {
    /// Orthonormalize `vectors` (mass metric); dependent vectors are dropped.
    pub fn from_spanning(metric: &MassMetric, vectors: &[Vec<f64>]) -> Result<Self> {
        let n = metric.size();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for v in vectors {
            if v.len() != n {
                return Err(Error::InvalidInput(format!(
                    "subspace vector has length {}, expected {n}",
                    v.len()
                )));
            }
            let scale = metric.norm(v);
            if scale == 0.0 {
                continue;
            }
            let mut u = v.clone();
            // two passes of Gram-Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let c = metric.dot(&u, b);
                    u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nu = metric.norm(&u);
            if nu > RANK_TOL * scale {
                u.iter_mut().for_each(|x| *x /= nu);
                basis.push(u);
            }
        }
        Ok(Self { metric: metric.clone(), basis })
    }

    /// The whole configuration space.
    pub fn full(metric: &MassMetric) -> Self {
        let n = metric.size();
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                e
            })
            .collect();
        Self::from_spanning(metric, &vectors).expect("unit vectors")
    }

    /// The zero subspace.
    pub fn zero(metric: &MassMetric) -> Self {
        Self { metric: metric.clone(), basis: Vec::new() }
    }

    /// `{x : x_i = x_j}` in the n-body configuration space.
    pub fn pair_coincidence(metric: &MassMetric, i: usize, j: usize) -> Self {
        Self::cluster_coincidence(metric, &[vec![i, j]])
    }

    /// Configurations in which every listed cluster of bodies coincides.
    pub fn cluster_coincidence(metric: &MassMetric, clusters: &[Vec<usize>]) -> Self {
        let n = metric.bodies();
        let d = metric.dim();
        let mut label: Vec<usize> = (0..n).collect();
        for c in clusters {
            if let Some(&first) = c.first() {
                let root = label[first];
                for &b in c {
                    let old = label[b];
                    for l in label.iter_mut() {
                        if *l == old {
                            *l = root;
                        }
                    }
                }
            }
        }
        let mut roots: Vec<usize> = label.clone();
        roots.sort_unstable();
        roots.dedup();
        let mut vectors = Vec::new();
        for r in roots {
            for a in 0..d {
                let mut v = vec![0.0; n * d];
                for (b, l) in label.iter().enumerate() {
                    if *l == r {
                        v[b * d + a] = 1.0;
                    }
                }
                vectors.push(v);
            }
        }
        Self::from_spanning(metric, &vectors).expect("cluster vectors")
    }

    pub fn metric(&self) -> &MassMetric {
        &self.metric
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.metric.size()
    }

    pub fn codim(&self) -> usize {
        self.ambient_dim() - self.dim()
    }

    /// Coordinates of the projection in the stored basis.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|b| self.metric.dot(x, b)).collect()
    }

    pub fn embed(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim()];
        for (c, b) in coords.iter().zip(&self.basis) {
            out.iter_mut().zip(b).for_each(|(o, v)| *o += c * v);
        }
        out
    }

    /// Orthogonal projection `p(x)`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.embed(&self.coordinates(x))
    }

    /// Orthogonal complement part `w(x) = x - p(x)`.
    pub fn complement(&self, x: &[f64]) -> Vec<f64> {
        let p = self.project(x);
        x.iter().zip(&p).map(|(a, b)| a - b).collect()
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.metric.norm(&self.complement(x))
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.distance(x) <= tol
    }

    /// Intersection with another subspace of the same ambient space.
    pub fn intersect(&self, other: &Subspace) -> Subspace {
        if self.dim() == 0 || other.dim() == 0 {
            return Subspace::zero(&self.metric);
        }
        let n = self.ambient_dim();
        let k = self.dim();
        // coordinates c with w_other(B c) = 0, in Euclidean-scaled form
        let cols: Vec<Vec<f64>> = self.basis.iter().map(|b| other.complement(b)).collect();
        let c = DMatrix::from_fn(n, k, |r, col| cols[col][r] * self.metric.coord_mass(r).sqrt());
        let svd = c.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut vectors = Vec::new();
        for (idx, sv) in svd.singular_values.iter().enumerate() {
            if *sv < 1e-9 {
                let coords: Vec<f64> = (0..k).map(|j| v_t[(idx, j)]).collect();
                vectors.push(self.embed(&coords));
            }
        }
        // zero singular values may be missing when n < k; those cannot happen here
        Subspace::from_spanning(&self.metric, &vectors).expect("same metric")
    }

    /// Whether `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Subspace, tol: f64) -> bool {
        self.basis.iter().all(|b| other.distance(b) <= tol)
    }

    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        self.dim() == other.dim() && self.is_subset_of(other, tol)
    }

    /// Projection of a configuration onto the orthogonal complement, in a
    /// fixed orthonormal basis of that complement.
    pub fn orthogonal_complement(&self) -> Subspace {
        let n = self.ambient_dim();
        let mut vectors = self.basis.clone();
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            vectors.push(e);
        }
        let all = Subspace::from_spanning(&self.metric, &vectors).expect("unit vectors");
        Subspace { metric: self.metric.clone(), basis: all.basis[self.dim()..].to_vec() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_is_orthogonal_in_mass_metric() {
        let metric = MassMetric::new(vec![1.0, 2.0, 3.0], 2).unwrap();
        let v = Subspace::pair_coincidence(&metric, 0, 1);
        assert_eq!(v.dim(), 4);
        let x = vec![0.3, -1.0, 2.0, 0.5, 1.5, -0.7];
        let p = v.project(&x);
        let w = v.complement(&x);
        assert!(metric.dot(&p, &w).abs() < 1e-12);
        let pp = v.project(&p);
        for (a, b) in p.iter().zip(&pp) {
            assert!((a - b).abs() < 1e-12);
        }
        // p has bodies 1 and 2 at their mass-weighted center
        assert!((p[0] - (0.3 + 2.0 * 2.0) / 3.0).abs() < 1e-12);
        assert!((p[0] - p[2]).abs() < 1e-12);
    }

    #[test]
    fn two_transverse_planes_meet_in_a_line() {
        let metric = MassMetric::unit(1, 4);
        let a = Subspace::from_spanning(&metric, &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]).unwrap();
        let b = Subspace::from_spanning(&metric, &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]]).unwrap();
        let c = a.intersect(&b);
        assert_eq!(c.dim(), 1);
        assert!(c.contains(&[2.0, 0.0, 0.0, 0.0], 1e-12));
        let e = Subspace::from_spanning(&metric, &[vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(a.intersect(&e).dim(), 0);
    }

    #[test]
    fn complement_has_complementary_dimension() {
        let metric = MassMetric::new(vec![1.0, 4.0], 3).unwrap();
        let v = Subspace::pair_coincidence(&metric, 0, 1);
        let c = v.orthogonal_complement();
        assert_eq!(c.dim(), 3);
        for b in c.basis() {
            assert!(v.project(b).iter().all(|x| x.abs() < 1e-12));
        }
    }
}
