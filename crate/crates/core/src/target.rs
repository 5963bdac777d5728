//! Target functions with O(1) re-evaluation under single-component changes,
//! and the domain `Delta` in which perturbed points must stay.

use crate::error::{Error, Result};
use crate::parallel::{sum_indexed, CompensatedSum, Execution};

/// Effect of changing one component, as reported by [`Target::probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    /// `phi(z) - phi(x)`, computed from the affected terms only.
    pub delta: f64,
    /// Number of terms recomputed.
    pub terms: usize,
}

/// A target function `phi` that supports incremental evaluation.
pub trait Target: Sync {
    type Cache: Clone + std::fmt::Debug;

    /// Full evaluation, independent of any cache.
    fn evaluate(&self, x: &[f64]) -> f64;

    fn prepare(&self, x: &[f64]) -> Result<Self::Cache>;

    /// Current `phi` value held by the cache.
    fn cached_value(&self, cache: &Self::Cache) -> f64;

    /// Change in `phi` if `x[j]` were set to `new_value`. Neither `x` nor the
    /// cache is modified.
    fn probe(&self, cache: &Self::Cache, x: &[f64], j: usize, new_value: f64) -> Probe;

    /// Sets `x[j] = new_value` and brings the cache up to date.
    fn commit(&self, cache: &mut Self::Cache, x: &mut [f64], j: usize, new_value: f64);

    /// Re-sums the cached terms to shed accumulated rounding drift.
    fn refresh(&self, cache: &mut Self::Cache);

    /// Gradient at `x`, for targets that have one.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

#[inline]
pub fn median3(a: f64, b: f64, c: f64) -> f64 {
    a.min(b).max(a.max(b).min(c))
}

/// `phi(x) = sum over j in Theta of sqrt(|x_j - med{x_j, x_r(j), x_b(j)}|)`
/// where `Theta` excludes the rightmost column and bottom row, `r(j) = j + 1`
/// and `b(j) = j + width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MedianRoughnessTarget {
    width: usize,
    height: usize,
}

/// Per-term values (zero outside `Theta`) and their running total.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetCache {
    terms: Vec<f64>,
    total: f64,
}

impl TargetCache {
    pub fn terms(&self) -> &[f64] {
        &self.terms
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

impl MedianRoughnessTarget {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("grid dimensions must be positive".into()));
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `|Theta| = (W - 1)(H - 1)`.
    pub fn theta_len(&self) -> usize {
        (self.width - 1) * (self.height - 1)
    }

    #[inline]
    pub fn in_theta(&self, j: usize) -> bool {
        j % self.width + 1 < self.width && j / self.width + 1 < self.height
    }

    #[inline]
    fn term_at(&self, x: &[f64], j: usize, xj: f64, xr: f64, xb: f64) -> f64 {
        debug_assert!(self.in_theta(j) && x.len() == self.len());
        (xj - median3(xj, xr, xb)).abs().sqrt()
    }

    #[inline]
    fn term(&self, x: &[f64], j: usize) -> f64 {
        if !self.in_theta(j) {
            return 0.0;
        }
        self.term_at(x, j, x[j], x[j + 1], x[j + self.width])
    }

    /// Indices of the terms that read component `j`: at most three.
    #[inline]
    pub fn dependents(&self, j: usize) -> impl Iterator<Item = usize> {
        let w = self.width;
        let (row, col) = (j / w, j % w);
        let own = self.in_theta(j).then_some(j);
        let left = (col >= 1 && row + 1 < self.height).then(|| j - 1);
        let above = (row >= 1 && col + 1 < w).then(|| j - w);
        own.into_iter().chain(left).chain(above)
    }

    /// Value of term `t` with `x[j]` replaced by `v`.
    #[inline]
    fn term_with(&self, x: &[f64], t: usize, j: usize, v: f64) -> f64 {
        let get = |i: usize| if i == j { v } else { x[i] };
        self.term_at(x, t, get(t), get(t + 1), get(t + self.width))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), actual: x.len() });
        }
        Ok(())
    }

    /// Full evaluation together with a populated cache.
    pub fn phi_full(&self, x: &[f64]) -> Result<(f64, TargetCache)> {
        let cache = self.prepare(x)?;
        Ok((cache.total, cache))
    }

    /// Sets `x[j] = new_value`, updating at most three cached terms, and
    /// returns the new `phi`.
    pub fn phi_delta(
        &self,
        cache: &mut TargetCache,
        x: &mut [f64],
        j: usize,
        new_value: f64,
    ) -> Result<f64> {
        self.check(x)?;
        if j >= x.len() {
            return Err(Error::IndexOutOfRange { index: j, len: x.len() });
        }
        self.commit(cache, x, j, new_value);
        Ok(cache.total)
    }

    pub fn phi_full_with(&self, x: &[f64], exec: Execution) -> Result<f64> {
        self.check(x)?;
        Ok(sum_indexed(x.len(), exec, |j| self.term(x, j)))
    }
}

impl Target for MedianRoughnessTarget {
    type Cache = TargetCache;

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.phi_full_with(x, Execution::default()).expect("image matches target grid")
    }

    fn prepare(&self, x: &[f64]) -> Result<TargetCache> {
        self.check(x)?;
        let terms: Vec<f64> = (0..x.len()).map(|j| self.term(x, j)).collect();
        let mut acc = CompensatedSum::new();
        terms.iter().for_each(|&t| acc.add(t));
        Ok(TargetCache { terms, total: acc.value() })
    }

    fn cached_value(&self, cache: &TargetCache) -> f64 {
        cache.total
    }

    fn probe(&self, cache: &TargetCache, x: &[f64], j: usize, new_value: f64) -> Probe {
        let mut delta = 0.0;
        let mut terms = 0;
        for t in self.dependents(j) {
            delta += self.term_with(x, t, j, new_value) - cache.terms[t];
            terms += 1;
        }
        Probe { delta, terms }
    }

    fn commit(&self, cache: &mut TargetCache, x: &mut [f64], j: usize, new_value: f64) {
        x[j] = new_value;
        let mut delta = 0.0;
        for t in self.dependents(j) {
            let new = self.term(x, t);
            delta += new - cache.terms[t];
            cache.terms[t] = new;
        }
        cache.total += delta;
    }

    fn refresh(&self, cache: &mut TargetCache) {
        let mut acc = CompensatedSum::new();
        cache.terms.iter().for_each(|&t| acc.add(t));
        cache.total = acc.value();
    }
}

/// `phi(x) = |x|^2 / 2`: a smooth convex target with gradient `x`, used to
/// exercise gradient-based nonascent directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HalfSquaredNorm;

impl Target for HalfSquaredNorm {
    type Cache = f64;

    fn evaluate(&self, x: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        x.iter().for_each(|v| acc.add(0.5 * v * v));
        acc.value()
    }

    fn prepare(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate(x))
    }

    fn cached_value(&self, cache: &f64) -> f64 {
        *cache
    }

    fn probe(&self, _cache: &f64, x: &[f64], j: usize, new_value: f64) -> Probe {
        Probe { delta: 0.5 * (new_value * new_value - x[j] * x[j]), terms: 1 }
    }

    fn commit(&self, cache: &mut f64, x: &mut [f64], j: usize, new_value: f64) {
        *cache += 0.5 * (new_value * new_value - x[j] * x[j]);
        x[j] = new_value;
    }

    fn refresh(&self, _cache: &mut f64) {}

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.to_vec())
    }
}

/// The set `Delta` that perturbed iterates must belong to.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DomainSpec {
    #[default]
    AllOfSpace,
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl DomainSpec {
    pub fn uniform_box(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::boxed(vec![lo; dim], vec![hi; dim])
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), actual: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidConfig("box bounds need lo <= hi".into()));
        }
        Ok(DomainSpec::Box { lo, hi })
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::AllOfSpace => true,
            DomainSpec::Box { lo, hi } => {
                x.len() == lo.len() && x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l <= v && v <= h)
            }
        }
    }

    #[inline]
    fn violates(&self, j: usize, v: f64) -> bool {
        match self {
            DomainSpec::AllOfSpace => false,
            DomainSpec::Box { lo, hi } => !(lo[j] <= v && v <= hi[j]),
        }
    }
}

/// Counts box violations of the current iterate so that membership of a
/// single-component change is decided in O(1).
#[derive(Debug, Clone)]
pub struct DomainTracker<'a> {
    spec: &'a DomainSpec,
    violations: usize,
}

impl<'a> DomainTracker<'a> {
    pub fn new(spec: &'a DomainSpec, x: &[f64]) -> Result<Self> {
        if let DomainSpec::Box { lo, .. } = spec {
            if lo.len() != x.len() {
                return Err(Error::DimensionMismatch { expected: lo.len(), actual: x.len() });
            }
        }
        let violations = (0..x.len()).filter(|&j| spec.violates(j, x[j])).count();
        Ok(Self { spec, violations })
    }

    pub fn contains_current(&self) -> bool {
        self.violations == 0
    }

    /// Whether `x` with `x[j]` replaced by `v` lies in the domain.
    #[inline]
    pub fn admits(&self, x: &[f64], j: usize, v: f64) -> bool {
        match self.spec {
            DomainSpec::AllOfSpace => true,
            _ => {
                self.violations - usize::from(self.spec.violates(j, x[j]))
                    + usize::from(self.spec.violates(j, v))
                    == 0
            }
        }
    }

    #[inline]
    pub fn update(&mut self, old: f64, j: usize, new: f64) {
        if let DomainSpec::Box { .. } = self.spec {
            self.violations = self.violations - usize::from(self.spec.violates(j, old))
                + usize::from(self.spec.violates(j, new));
        }
    }

    /// Recounts after a bulk change of the iterate.
    pub fn reset(&mut self, x: &[f64]) {
        self.violations = (0..x.len()).filter(|&j| self.spec.violates(j, x[j])).count();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn median_of_three() {
        assert_eq!(median3(1.0, 4.0, 2.0), 2.0);
        assert_eq!(median3(4.0, 1.0, 2.0), 2.0);
        assert_eq!(median3(2.0, 2.0, 4.0), 2.0);
        assert_eq!(median3(3.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn hand_examples() {
        let t = MedianRoughnessTarget::new(2, 2).unwrap();
        assert_eq!(t.theta_len(), 1);
        assert_eq!(t.evaluate(&[5.0; 4]), 0.0);
        let mut x = vec![1.0, 4.0, 2.0, 0.0];
        let (phi, mut cache) = t.phi_full(&x).unwrap();
        assert_eq!(phi, 1.0);

        let mut y = x.clone();
        let mut c2 = cache.clone();
        assert_eq!(t.phi_delta(&mut c2, &mut y, 3, 100.0).unwrap(), 1.0);

        assert_eq!(t.phi_delta(&mut cache, &mut x, 0, 2.0).unwrap(), 0.0);
        assert!(t.phi_delta(&mut cache, &mut x, 4, 2.0).is_err());
        assert!(t.phi_full(&[1.0]).is_err());
    }

    #[test]
    fn dependents_are_local() {
        let t = MedianRoughnessTarget::new(5, 4).unwrap();
        for j in 0..t.len() {
            let deps: Vec<usize> = t.dependents(j).collect();
            assert!(deps.len() <= 3);
            // brute force: term t reads j iff j in {t, t+1, t+W}
            let brute: Vec<usize> = (0..t.len())
                .filter(|&k| t.in_theta(k) && (k == j || k + 1 == j || k + 5 == j))
                .collect();
            let mut d = deps.clone();
            d.sort_unstable();
            assert_eq!(d, brute, "pixel {j}");
        }
        assert_eq!((0..t.len()).filter(|&j| t.in_theta(j)).count(), t.theta_len());
    }

    #[test]
    fn incremental_matches_full_on_random_updates() {
        let t = MedianRoughnessTarget::new(32, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut x: Vec<f64> = (0..t.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, mut cache) = t.phi_full(&x).unwrap();
        for _ in 0..2000 {
            let j = rng.random_range(0..t.len());
            let v = rng.random_range(-1.0..1.0);
            let p = t.probe(&cache, &x, j, v);
            assert!(p.terms <= 3);
            let before = cache.total();
            let after = t.phi_delta(&mut cache, &mut x, j, v).unwrap();
            let full = t.evaluate(&x);
            assert!((after - full).abs() <= 1e-9 * full);
            assert!((before + p.delta - after).abs() <= 1e-12 * full);
        }
        let sum: f64 = cache.terms().iter().sum();
        assert!((sum - cache.total()).abs() <= 1e-10 * sum);
    }

    #[test]
    fn half_squared_norm() {
        let t = HalfSquaredNorm;
        let mut x = vec![3.0, 4.0];
        let mut c = t.prepare(&x).unwrap();
        assert_eq!(c, 12.5);
        assert_eq!(t.probe(&c, &x, 0, 1.0).delta, -4.0);
        t.commit(&mut c, &mut x, 0, 1.0);
        assert_eq!(c, 8.5);
        assert_eq!(t.gradient(&x), Some(vec![1.0, 4.0]));
        assert!(MedianRoughnessTarget::new(2, 2).unwrap().gradient(&x).is_none());
    }

    #[test]
    fn domains() {
        assert!(DomainSpec::AllOfSpace.in_domain(&[1e300, -4.0]));
        let b = DomainSpec::uniform_box(0.0, 1.0, 3).unwrap();
        assert!(b.in_domain(&[0.0; 3]));
        assert!(!b.in_domain(&[0.0, 1.5, 0.0]));
        assert!(DomainSpec::uniform_box(1.0, 0.0, 3).is_err());

        let x = [0.5, 1.5, 0.0];
        let mut tr = DomainTracker::new(&b, &x).unwrap();
        assert!(!tr.contains_current());
        assert!(tr.admits(&x, 1, 0.9));
        assert!(!tr.admits(&x, 0, 0.9));
        tr.update(1.5, 1, 0.9);
        assert!(tr.contains_current());
        assert!(DomainTracker::new(&b, &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn phi_nonnegative_and_shift_invariant(
            (w, h, x) in (1usize..6, 1usize..6).prop_flat_map(|(w, h)| {
                (Just(w), Just(h), prop::collection::vec(-10.0f64..10.0, w * h))
            }),
            shift in -100.0f64..100.0,
        ) {
            let t = MedianRoughnessTarget::new(w, h).unwrap();
            let phi = t.evaluate(&x);
            prop_assert!(phi >= 0.0);
            let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
            let phi2 = t.evaluate(&shifted);
            // terms are sqrt of rounding-perturbed differences
            prop_assert!((phi - phi2).abs() <= 1e-5 * (1.0 + phi));
            if w == 1 || h == 1 {
                prop_assert_eq!(phi, 0.0);
            }
        }
    }
}
