//! Intersection lattice of the collision subspaces, minimal-member
//! assignment and the reduction of partial collisions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{CollisionEvent, CollisionKind};
use crate::error::{Error, Result};
use crate::integrator::OdeSolution;
use crate::metric::MassMetric;
use crate::potentials::{CustomPotential, Potential, PotentialSpec};
use crate::spline::CubicSpline;
use crate::subspace::Subspace;

const SAME_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LatticeMember {
    pub subspace: Subspace,
    /// Clusters forced to coincide, for n-body arrangements.
    pub partition: Option<Vec<Vec<usize>>>,
    /// One of the generating subspaces.
    pub maximal: bool,
}

/// Closure under intersection of the generating subspaces, plus the whole
/// space as the top element (always last).
#[derive(Debug, Clone)]
pub struct CollisionLattice {
    metric: MassMetric,
    members: Vec<LatticeMember>,
    /// `(a, b)` whenever `a ⊂ b` with nothing strictly between.
    hasse: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeDump {
    pub members: Vec<MemberDump>,
    pub hasse: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberDump {
    pub dim: usize,
    pub maximal: bool,
    pub partition: Option<Vec<Vec<usize>>>,
}

impl CollisionLattice {
    pub fn from_subspaces(metric: &MassMetric, generators: &[Subspace]) -> Result<Self> {
        let mut members: Vec<LatticeMember> = Vec::new();
        for g in generators {
            if g.ambient_dim() != metric.size() {
                return Err(Error::NotSubspaceArrangement);
            }
            if !members.iter().any(|m| m.subspace.same_as(g, SAME_TOL)) {
                members.push(LatticeMember { subspace: g.clone(), partition: None, maximal: true });
            }
        }
        let mut k = 0;
        while k < members.len() {
            for j in 0..k {
                let c = members[j].subspace.intersect(&members[k].subspace);
                if !members.iter().any(|m| m.subspace.same_as(&c, SAME_TOL)) {
                    members.push(LatticeMember { subspace: c, partition: None, maximal: false });
                }
            }
            k += 1;
        }
        members.sort_by_key(|m| std::cmp::Reverse(m.subspace.dim()));
        members.push(LatticeMember { subspace: Subspace::full(metric), partition: None, maximal: false });
        let mut lattice = Self { metric: metric.clone(), members, hasse: Vec::new() };
        lattice.label_partitions();
        lattice.hasse = lattice.compute_hasse();
        Ok(lattice)
    }

    fn label_partitions(&mut self) {
        let n = self.metric.bodies();
        if n < 2 {
            return;
        }
        let pairs: Vec<(usize, usize, Subspace)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, Subspace::pair_coincidence(&self.metric, i, j)))
            .collect();
        let generated_by_pairs = self
            .members
            .iter()
            .filter(|m| m.maximal)
            .all(|m| pairs.iter().any(|(_, _, p)| p.same_as(&m.subspace, SAME_TOL)));
        if !generated_by_pairs {
            return;
        }
        for m in self.members.iter_mut() {
            let mut label: Vec<usize> = (0..n).collect();
            for (i, j, p) in &pairs {
                if m.subspace.is_subset_of(p, SAME_TOL) {
                    let (a, b) = (label[*i], label[*j]);
                    label.iter_mut().filter(|l| **l == b).for_each(|l| *l = a);
                }
            }
            let mut roots = label.clone();
            roots.sort_unstable();
            roots.dedup();
            let partition: Vec<Vec<usize>> =
                roots.iter().map(|r| (0..n).filter(|b| label[*b] == *r).collect()).collect();
            m.partition = Some(partition);
        }
    }

    fn compute_hasse(&self) -> Vec<(usize, usize)> {
        let n = self.members.len();
        let sub = |a: usize, b: usize| {
            a != b
                && self.members[a].subspace.dim() < self.members[b].subspace.dim()
                && self.members[a].subspace.is_subset_of(&self.members[b].subspace, SAME_TOL)
        };
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if sub(a, b) && !(0..n).any(|c| sub(a, c) && sub(c, b)) {
                    edges.push((a, b));
                }
            }
        }
        edges
    }

    pub fn metric(&self) -> &MassMetric {
        &self.metric
    }

    /// All members, the top (whole space) last.
    pub fn members(&self) -> &[LatticeMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn top(&self) -> usize {
        self.members.len() - 1
    }

    pub fn member(&self, i: usize) -> &LatticeMember {
        &self.members[i]
    }

    pub fn hasse(&self) -> &[(usize, usize)] {
        &self.hasse
    }

    /// Index of the member equal to `s`, if any.
    pub fn find(&self, s: &Subspace) -> Option<usize> {
        self.members.iter().position(|m| m.subspace.same_as(s, SAME_TOL))
    }

    /// Distance from `x` to `Δ = ∪ V_μ`.
    pub fn distance_to_delta(&self, x: &[f64]) -> f64 {
        self.members[..self.top()].iter().map(|m| m.subspace.distance(x)).fold(f64::INFINITY, f64::min)
    }

    /// Check closure under intersection exhaustively.
    pub fn is_closed(&self) -> bool {
        let m = self.top();
        (0..m).all(|a| (0..m).all(|b| self.find(&self.members[a].subspace.intersect(&self.members[b].subspace)).is_some()))
    }

    pub fn dump(&self) -> LatticeDump {
        LatticeDump {
            members: self
                .members
                .iter()
                .map(|m| MemberDump { dim: m.subspace.dim(), maximal: m.maximal, partition: m.partition.clone() })
                .collect(),
            hasse: self.hasse.clone(),
        }
    }
}

/// The lattice generated by the singular subspaces of `spec`.
pub fn build_lattice(spec: &PotentialSpec) -> Result<CollisionLattice> {
    let subs = spec.potential().singular_subspaces().ok_or(Error::NotSubspaceArrangement)?;
    CollisionLattice::from_subspaces(spec.metric(), &subs)
}

/// Minimal member containing `ξ` and how far `ξ` is from the nearest
/// member that does not contain it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuAssignment {
    pub index: usize,
    pub margin: f64,
}

/// Default tolerance `1e-8 (1 + |ξ|)`.
pub fn default_tol(metric: &MassMetric, xi: &[f64]) -> f64 {
    1e-8 * (1.0 + metric.norm(xi))
}

/// `μ(ξ)`: the intersection of all members containing `ξ` within `tol`.
pub fn mu_of(lattice: &CollisionLattice, xi: &[f64], tol: f64) -> Result<MuAssignment> {
    let top = lattice.top();
    let containing: Vec<usize> = (0..top).filter(|&i| lattice.members[i].subspace.distance(xi) <= tol).collect();
    if containing.is_empty() {
        return Err(Error::NotOnDelta(lattice.distance_to_delta(xi)));
    }
    let mut inter = lattice.members[containing[0]].subspace.clone();
    for &i in &containing[1..] {
        inter = inter.intersect(&lattice.members[i].subspace);
    }
    let index = lattice.find(&inter).ok_or(Error::NotSubspaceArrangement)?;
    let margin = (0..top)
        .filter(|i| !containing.contains(i))
        .map(|i| lattice.members[i].subspace.distance(xi))
        .fold(f64::INFINITY, f64::min);
    Ok(MuAssignment { index, margin })
}

/// `x = p_μ(x) + w_μ(x)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterDecomposition {
    pub member: usize,
    pub p: Vec<f64>,
    pub w: Vec<f64>,
    pub partition: Option<Vec<Vec<usize>>>,
}

pub fn decompose(lattice: &CollisionLattice, member: usize, x: &[f64]) -> ClusterDecomposition {
    let m = &lattice.members[member];
    let p = m.subspace.project(x);
    let w = x.iter().zip(&p).map(|(a, b)| a - b).collect();
    ClusterDecomposition { member, p, w, partition: m.partition.clone() }
}

/// The colliding cluster seen as a total collision of its own.
#[derive(Debug, Clone)]
pub struct ReducedCollision {
    /// The `w` component as a standalone solution.
    pub window: OdeSolution,
    /// `U(t, p(t) + w)` with `p` frozen along the full solution.
    pub spec: PotentialSpec,
    pub member: usize,
    /// The `p` component along the window.
    pub p: Vec<Vec<f64>>,
    /// Largest mass norm of the second difference of `p` over steps of at
    /// least `1e-4` of the span (shorter ones only resolve roundoff).
    pub p_second_difference_max: f64,
    pub identity: bool,
}

/// Reduce a partial collision to a total one for the `w` component.
pub fn reduce_partial_collision(
    solution: &OdeSolution,
    event: &CollisionEvent,
    lattice: &CollisionLattice,
    spec: &PotentialSpec,
) -> Result<ReducedCollision> {
    let member = event.member.ok_or_else(|| Error::InvalidInput("event carries no lattice member".into()))?;
    let sub = lattice.members[member].subspace.clone();
    let metric = spec.metric().clone();
    let n = solution.len();
    if event.kind == CollisionKind::Total && sub.dim() == 0 {
        return Ok(ReducedCollision {
            window: solution.clone(),
            spec: spec.clone(),
            member,
            p: vec![vec![0.0; metric.size()]; n],
            p_second_difference_max: 0.0,
            identity: true,
        });
    }
    let part = spec
        .potential()
        .cluster_part(&sub)
        .ok_or_else(|| Error::violation("U5", "the potential exposes no cluster part for this member"))?;
    let p: Vec<Vec<f64>> = solution.x.iter().map(|x| sub.project(x)).collect();
    let w: Vec<Vec<f64>> = solution.x.iter().zip(&p).map(|(x, p)| x.iter().zip(p).map(|(a, b)| a - b).collect()).collect();
    let vw: Vec<Vec<f64>> = solution.v.iter().map(|v| sub.complement(v)).collect();

    let mut grid = Vec::with_capacity(n);
    let mut keep = Vec::with_capacity(n);
    for j in 0..n {
        if grid.last().is_none_or(|t: &f64| solution.times[j] > *t) {
            grid.push(solution.times[j]);
            keep.push(j);
        }
    }
    let coords: Vec<Vec<f64>> = keep.iter().map(|&j| sub.coordinates(&p[j])).collect();
    let splines: Vec<CubicSpline> = (0..sub.dim())
        .map(|c| CubicSpline::new(grid.clone(), coords.iter().map(|v| v[c]).collect()))
        .collect::<Result<_>>()?;
    let p_at = {
        let sub = sub.clone();
        let splines = splines.clone();
        move |t: f64| -> Vec<f64> {
            let c: Vec<f64> = splines.iter().map(|s| s.value(t)).collect();
            sub.embed(&c)
        }
    };
    let full = spec.potential().clone();
    let value = {
        let (full, p_at) = (full.clone(), p_at.clone());
        Arc::new(move |t: f64, w: &[f64]| {
            let x: Vec<f64> = p_at(t).iter().zip(w).map(|(a, b)| a + b).collect();
            full.value(t, &x)
        })
    };
    let partial = {
        let (full, p_at, sub) = (full.clone(), p_at.clone(), sub.clone());
        let metric = metric.clone();
        Arc::new(move |t: f64, w: &[f64], out: &mut [f64]| {
            let x: Vec<f64> = p_at(t).iter().zip(w).map(|(a, b)| a + b).collect();
            full.partial_x(t, &x, out);
            metric.raise(out);
            let c = sub.complement(out);
            out.copy_from_slice(&c);
            metric.lower(out);
        })
    };
    let distance = {
        let part = part.clone();
        Arc::new(move |w: &[f64]| part.singular_distance(w))
    };
    let reduced: Arc<dyn Potential> = Arc::new(
        CustomPotential::new("reduced-cluster", metric.clone(), part.scaling(), value, distance)
            .with_partial(partial)
            .with_log_coefficient(part.log_coefficient(0.0)),
    );
    let reduced_spec = PotentialSpec::new(reduced).with_constants(spec.constants);

    let mut p2 = 0.0f64;
    let h_floor = 1e-4 * (grid[grid.len() - 1] - grid[0]).abs();
    for k in 1..keep.len().saturating_sub(1) {
        let (a, b, c) = (keep[k - 1], keep[k], keep[k + 1]);
        let (h0, h1) = (solution.times[b] - solution.times[a], solution.times[c] - solution.times[b]);
        if h0.min(h1) < h_floor {
            continue;
        }
        let dd: Vec<f64> = (0..metric.size())
            .map(|i| 2.0 * ((p[c][i] - p[b][i]) / h1 - (p[b][i] - p[a][i]) / h0) / (h0 + h1))
            .collect();
        p2 = p2.max(metric.norm(&dd));
    }

    let window = OdeSolution {
        metric: metric.clone(),
        method: format!("{}-reduced", solution.method),
        times: solution.times.clone(),
        remaining: solution.remaining.clone(),
        x: w,
        v: vw,
        events: solution.events.clone(),
        accepted: solution.accepted,
        rejected: solution.rejected,
    };
    Ok(ReducedCollision { window, spec: reduced_spec, member, p, p_second_difference_max: p2, identity: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PairPower;

    fn three_body() -> PotentialSpec {
        PotentialSpec::new(Arc::new(PairPower::homogeneous(MassMetric::unit(3, 2), 1.0).unwrap()))
    }

    #[test]
    fn two_body_lattice() {
        let spec = PotentialSpec::new(Arc::new(PairPower::homogeneous(MassMetric::unit(2, 2), 1.0).unwrap()));
        let l = build_lattice(&spec).unwrap();
        assert_eq!(l.len(), 2);
    }

    #[test]
    fn three_body_lattice_is_partition_lattice() {
        let l = build_lattice(&three_body()).unwrap();
        assert_eq!(l.len(), 5);
        assert!(l.is_closed());
        let triple = l.members().iter().find(|m| m.partition.as_ref().is_some_and(|p| p.len() == 1)).unwrap();
        assert_eq!(triple.subspace.dim(), 2);
        assert_eq!(l.hasse().len(), 6);
    }

    #[test]
    fn transverse_planes_gain_their_intersection() {
        let m = MassMetric::unit(1, 4);
        let a = Subspace::from_spanning(&m, &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]).unwrap();
        let b = Subspace::from_spanning(&m, &[vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]]).unwrap();
        let l = CollisionLattice::from_subspaces(&m, &[a, b]).unwrap();
        assert_eq!(l.len(), 4);
        assert_eq!(l.member(2).subspace.dim(), 1);
    }

    #[test]
    fn mu_of_binary_and_triple() {
        let l = build_lattice(&three_body()).unwrap();
        let x = [0.5, 0.5, 0.5, 0.5, -1.0, 2.0];
        let mu = mu_of(&l, &x, 1e-8).unwrap();
        assert_eq!(l.member(mu.index).partition, Some(vec![vec![0, 1], vec![2]]));
        let y = [0.3, 0.1, 0.3, 0.1, 0.3, 0.1];
        let mu = mu_of(&l, &y, 1e-8).unwrap();
        assert_eq!(l.member(mu.index).partition, Some(vec![vec![0, 1, 2]]));
        assert!(matches!(mu_of(&l, &[0.0, 0.0, 1.0, 0.0, 2.0, 0.0], 1e-8), Err(Error::NotOnDelta(_))));
    }

    #[test]
    fn decomposition_is_orthogonal() {
        let l = build_lattice(&three_body()).unwrap();
        let x = [0.1, 0.7, -0.4, 0.2, 1.3, -0.9];
        let d = decompose(&l, 0, &x);
        let m = l.metric();
        assert!(m.dot(&d.p, &d.w).abs() < 1e-12);
        for k in 0..6 {
            assert!((d.p[k] + d.w[k] - x[k]).abs() < 1e-15);
        }
    }
}
