//! Relaxed Kaczmarz sweeps (the algorithmic operator `P_T`) and the
//! unperturbed ART iteration built from them.

use crate::error::{Error, Result};
use crate::evaluation::{IterateTrace, TraceRecord};
use crate::system::{ConstraintSystem, ImageVector};
use crate::target::Target;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderingScheme {
    Sequential,
    /// Projections visited in bit-reversed index order, rays in natural order.
    ProjectionBitReversal,
    /// Explicit permutation of candidate row ids.
    Explicit(Vec<usize>),
}

/// A permutation of candidate row ids `0..len`. Ids absent from a system
/// (dropped zero rows) are skipped when the ordering is resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowOrdering {
    scheme: OrderingScheme,
    permutation: Vec<usize>,
}

impl RowOrdering {
    pub fn new(scheme: OrderingScheme, projections: usize, rays: usize) -> Result<Self> {
        if projections == 0 || rays == 0 {
            return Err(Error::InvalidConfig("projections and rays must be positive".into()));
        }
        let len = projections * rays;
        let permutation = match &scheme {
            OrderingScheme::Sequential => (0..len).collect(),
            OrderingScheme::ProjectionBitReversal => bit_reversed(projections)
                .into_iter()
                .flat_map(|p| (0..rays).map(move |r| p * rays + r))
                .collect(),
            OrderingScheme::Explicit(perm) => {
                if perm.len() != len {
                    return Err(Error::InvalidConfig(format!(
                        "explicit ordering has {} entries, expected {len}",
                        perm.len()
                    )));
                }
                let mut seen = vec![false; len];
                for &i in perm {
                    if i >= len || std::mem::replace(&mut seen[i], true) {
                        return Err(Error::InvalidConfig("explicit ordering is not a permutation".into()));
                    }
                }
                perm.clone()
            }
        };
        Ok(Self { scheme, permutation })
    }

    /// Identity ordering over the rows of `system`.
    pub fn sequential_for(system: &ConstraintSystem) -> Self {
        let len = system.source_index().iter().max().map_or(0, |m| m + 1);
        Self { scheme: OrderingScheme::Sequential, permutation: (0..len).collect() }
    }

    pub fn scheme(&self) -> &OrderingScheme {
        &self.scheme
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// System row indices in processing order.
    pub fn resolve(&self, system: &ConstraintSystem) -> Result<Vec<usize>> {
        let mut row_of = vec![usize::MAX; self.permutation.len()];
        for (row, &id) in system.source_index().iter().enumerate() {
            if id >= row_of.len() {
                return Err(Error::InvalidConfig(format!(
                    "row id {id} outside ordering of length {}",
                    row_of.len()
                )));
            }
            row_of[id] = row;
        }
        Ok(self.permutation.iter().map(|&id| row_of[id]).filter(|&r| r != usize::MAX).collect())
    }
}

/// `0..n` in bit-reversed order over the next power of two, entries `>= n`
/// skipped.
pub fn bit_reversed(n: usize) -> Vec<usize> {
    let size = n.next_power_of_two();
    let bits = size.trailing_zeros();
    (0..size)
        .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
        .filter(|&i| i < n)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityConfig {
    pub lambda: f64,
    pub ordering: RowOrdering,
}

impl FeasibilityConfig {
    /// True when `lambda` lies outside `(0, 2)`, where convergence is not
    /// guaranteed. Such values are allowed.
    pub fn lambda_flagged(&self) -> bool {
        !(self.lambda > 0.0 && self.lambda < 2.0)
    }
}

/// `P_T` with the row order and inverse squared norms resolved once.
#[derive(Debug, Clone)]
pub struct ProjectionOperator<'a> {
    system: &'a ConstraintSystem,
    lambda: f64,
    order: Vec<usize>,
    inv_norm_sq: Vec<f64>,
}

impl<'a> ProjectionOperator<'a> {
    pub fn new(system: &'a ConstraintSystem, config: &FeasibilityConfig) -> Result<Self> {
        if !config.lambda.is_finite() {
            return Err(Error::InvalidConfig("relaxation parameter must be finite".into()));
        }
        let order = config.ordering.resolve(system)?;
        let inv_norm_sq = (0..system.num_rows()).map(|i| 1.0 / system.norm_sq(i)).collect();
        Ok(Self { system, lambda: config.lambda, order, inv_norm_sq })
    }

    pub fn system(&self) -> &ConstraintSystem {
        self.system
    }

    /// One sweep in place: `y <- y - lambda (<d^i,y> - h_i) / |d^i|^2 d^i`
    /// for every row in order.
    pub fn apply(&self, y: &mut [f64]) -> Result<()> {
        if y.len() != self.system.dim() {
            return Err(Error::DimensionMismatch { expected: self.system.dim(), actual: y.len() });
        }
        for &i in &self.order {
            let row = self.system.row(i);
            let r = row.dot(y) - self.system.rhs()[i];
            let c = self.lambda * r * self.inv_norm_sq[i];
            for (j, v) in row.iter() {
                y[j] -= c * v;
            }
        }
        Ok(())
    }
}

/// `P_T x` as a pure function.
pub fn apply_pt(system: &ConstraintSystem, config: &FeasibilityConfig, x: &ImageVector) -> Result<ImageVector> {
    let op = ProjectionOperator::new(system, config)?;
    let mut y = x.clone();
    op.apply(y.values_mut())?;
    Ok(y)
}

/// Unperturbed iteration `x^{k+1} = P_T x^k` for `sweeps` steps.
pub fn art_run<T: Target>(
    system: &ConstraintSystem,
    config: &FeasibilityConfig,
    target: &T,
    start: &[f64],
    sweeps: usize,
) -> Result<IterateTrace> {
    if sweeps == 0 {
        return Err(Error::InvalidConfig("at least one sweep is required".into()));
    }
    if start.len() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), actual: start.len() });
    }
    let op = ProjectionOperator::new(system, config)?;
    let mut x = start.to_vec();
    let mut trace = IterateTrace::default();
    trace.push(TraceRecord::new(0, system.proximity(&x)?, target.evaluate(&x)));
    for k in 1..=sweeps {
        op.apply(&mut x)?;
        trace.push(TraceRecord::new(k, system.proximity(&x)?, target.evaluate(&x)));
    }
    trace.final_iterate = x;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{SparseRow, ZeroRowPolicy};
    use crate::target::HalfSquaredNorm;

    fn sys(rows: &[&[(usize, f64)]], rhs: &[f64], dim: usize) -> ConstraintSystem {
        let rows = rows.iter().map(|r| SparseRow::new(r.to_vec()).unwrap()).collect();
        ConstraintSystem::build(rows, rhs.to_vec(), dim, ZeroRowPolicy::Reject).unwrap()
    }

    fn cfg(system: &ConstraintSystem, lambda: f64) -> FeasibilityConfig {
        FeasibilityConfig { lambda, ordering: RowOrdering::sequential_for(system) }
    }

    #[test]
    fn orderings() {
        let seq = RowOrdering::new(OrderingScheme::Sequential, 3, 2).unwrap();
        assert_eq!(seq.permutation(), &[0, 1, 2, 3, 4, 5]);
        let br = RowOrdering::new(OrderingScheme::ProjectionBitReversal, 4, 1).unwrap();
        assert_eq!(br.permutation(), &[0, 2, 1, 3]);
        let br = RowOrdering::new(OrderingScheme::ProjectionBitReversal, 8, 1).unwrap();
        assert_eq!(br.permutation(), &[0, 4, 2, 6, 1, 5, 3, 7]);
        let br = RowOrdering::new(OrderingScheme::ProjectionBitReversal, 3, 2).unwrap();
        assert_eq!(br.permutation(), &[0, 1, 4, 5, 2, 3]);
        assert_eq!(bit_reversed(1), vec![0]);
        assert!(RowOrdering::new(OrderingScheme::Sequential, 0, 2).is_err());
        assert!(RowOrdering::new(OrderingScheme::Explicit(vec![0, 0]), 2, 1).is_err());
        assert!(RowOrdering::new(OrderingScheme::Explicit(vec![1, 0, 2]), 2, 1).is_err());
    }

    #[test]
    fn bit_reversal_is_a_bijection() {
        for n in 1..200 {
            let mut v = bit_reversed(n);
            v.sort_unstable();
            assert_eq!(v, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn resolve_skips_dropped_rows() {
        let rows = vec![
            SparseRow::new(vec![(0, 1.0)]).unwrap(),
            SparseRow::empty(),
            SparseRow::new(vec![(1, 1.0)]).unwrap(),
            SparseRow::new(vec![(0, 2.0)]).unwrap(),
        ];
        let s = ConstraintSystem::build(rows, vec![1.0; 4], 2, ZeroRowPolicy::Drop).unwrap();
        let ord = RowOrdering::new(OrderingScheme::ProjectionBitReversal, 2, 2).unwrap();
        // candidate order [0,1,2,3]; ids [0,2,3] are rows [0,1,2]
        assert_eq!(ord.resolve(&s).unwrap(), vec![0, 1, 2]);
        let ord = RowOrdering::new(OrderingScheme::Explicit(vec![3, 1, 0, 2]), 4, 1).unwrap();
        assert_eq!(ord.resolve(&s).unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn single_row_projection() {
        let s = sys(&[&[(0, 1.0), (1, 1.0)]], &[2.0], 2);
        let x = ImageVector::new(2, 1, vec![0.0, 0.0]).unwrap();
        assert_eq!(apply_pt(&s, &cfg(&s, 1.0), &x).unwrap().values(), &[1.0, 1.0]);
        assert_eq!(apply_pt(&s, &cfg(&s, 0.0), &x).unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn two_half_steps() {
        let s = sys(&[&[(0, 1.0)], &[(1, 1.0)]], &[1.0, 1.0], 2);
        let x = ImageVector::new(2, 1, vec![0.0, 0.0]).unwrap();
        assert_eq!(apply_pt(&s, &cfg(&s, 0.5), &x).unwrap().values(), &[0.5, 0.5]);
    }

    #[test]
    fn row_exactness_with_unit_relaxation() {
        let s = sys(&[&[(0, 0.3), (2, -1.7), (3, 2.2)]], &[4.1], 4);
        let op = ProjectionOperator::new(&s, &cfg(&s, 1.0)).unwrap();
        let mut y = vec![1.0, -2.0, 0.5, 3.0];
        op.apply(&mut y).unwrap();
        let lhs = s.row(0).dot(&y);
        assert!((lhs - 4.1).abs() <= 1e-12 * 4.1);
        assert_eq!(y[1], -2.0);
    }

    #[test]
    fn zero_relaxation_run_is_stationary() {
        let s = sys(&[&[(0, 1.0)], &[(1, 2.0)]], &[1.0, 1.0], 2);
        let t = art_run(&s, &cfg(&s, 0.0), &HalfSquaredNorm, &[0.3, 0.4], 5).unwrap();
        assert_eq!(t.records().len(), 6);
        assert!(t.records().iter().all(|r| r.proximity == t.records()[0].proximity));
        assert_eq!(t.final_iterate, vec![0.3, 0.4]);
        assert!(art_run(&s, &cfg(&s, 0.0), &HalfSquaredNorm, &[0.3], 5).is_err());
        assert!(art_run(&s, &cfg(&s, 0.0), &HalfSquaredNorm, &[0.3, 0.4], 0).is_err());
    }

    #[test]
    fn lambda_flag() {
        let s = sys(&[&[(0, 1.0)]], &[1.0], 1);
        assert!(!cfg(&s, 0.05).lambda_flagged());
        assert!(cfg(&s, 2.0).lambda_flagged());
        assert!(cfg(&s, 0.0).lambda_flagged());
    }
}
