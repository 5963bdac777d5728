//! Exterior-penalty baseline: coordinate search on
//! `psi(x) = phi(x) + eta * Pr_T(x)`, with exact work counters.
//!
//! A single-component change touches at most three target terms but every
//! residual whose row crosses that pixel, which is what the counters expose.

use crate::error::{Error, Result};
use crate::evaluation::{IterateTrace, TraceRecord, WorkCounters};
use crate::parallel::CompensatedSum;
use crate::superiorizer::{DirectionSequence, StepSchedule};
use crate::system::ConstraintSystem;
use crate::target::{DomainSpec, DomainTracker, Target};

/// Probes between full recomputations of the residual cache.
pub const REFRESH_INTERVAL: u64 = 10_000;

#[derive(Debug, Clone)]
pub struct PenalizedObjective<'a, T: Target> {
    target: &'a T,
    system: &'a ConstraintSystem,
    eta: f64,
    residuals: Vec<f64>,
    proximity: f64,
    phi_cache: Option<T::Cache>,
    counters: WorkCounters,
    since_refresh: u64,
}

impl<'a, T: Target> PenalizedObjective<'a, T> {
    pub fn new(target: &'a T, system: &'a ConstraintSystem, eta: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("penalty parameter eta = {eta} must be nonnegative")));
        }
        Ok(Self {
            target,
            system,
            eta,
            residuals: Vec::new(),
            proximity: 0.0,
            phi_cache: None,
            counters: WorkCounters::default(),
            since_refresh: 0,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn counters(&self) -> WorkCounters {
        self.counters
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Cached proximity `sum r_i^2`.
    pub fn proximity(&self) -> f64 {
        self.proximity
    }

    /// Cached target value.
    pub fn phi(&self) -> f64 {
        self.phi_cache.as_ref().map_or(0.0, |c| self.target.cached_value(c))
    }

    pub fn psi(&self) -> f64 {
        self.phi() + self.eta * self.proximity
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.system.dim() {
            return Err(Error::DimensionMismatch { expected: self.system.dim(), actual: x.len() });
        }
        Ok(())
    }

    fn ready(&self) -> Result<&T::Cache> {
        self.phi_cache
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("psi_full must be called before incremental updates".into()))
    }

    fn refresh(&mut self, x: &[f64]) {
        self.residuals = self.system.residuals(x).expect("dimension checked");
        let mut acc = CompensatedSum::new();
        self.residuals.iter().for_each(|r| acc.add(r * r));
        self.proximity = acc.value();
        if let Some(c) = self.phi_cache.as_mut() {
            self.target.refresh(c);
        }
        self.since_refresh = 0;
    }

    /// `phi(x) + eta * Pr_T(x)` from scratch; (re)populates every cache.
    pub fn psi_full(&mut self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        self.phi_cache = Some(self.target.prepare(x)?);
        self.refresh(x);
        Ok(self.psi())
    }

    /// `psi(z) - psi(x)` for `z` equal to `x` with `x[j] = new_value`. Counts
    /// the work but leaves caches untouched.
    pub fn psi_probe(&mut self, x: &[f64], j: usize, new_value: f64) -> Result<f64> {
        if j >= x.len() {
            return Err(Error::IndexOutOfRange { index: j, len: x.len() });
        }
        if self.since_refresh >= REFRESH_INTERVAL {
            self.refresh(x);
        }
        let cache = self.ready()?;
        let probe = self.target.probe(cache, x, j, new_value);
        let step = new_value - x[j];
        let mut prox_delta = 0.0;
        let mut touched = 0u64;
        for (i, d) in self.system.column(j) {
            let change = d * step;
            prox_delta += change * (2.0 * self.residuals[i] + change);
            touched += 1;
        }
        self.counters.probes += 1;
        self.counters.phi_terms += probe.terms as u64;
        self.counters.residual_updates += touched;
        self.since_refresh += 1;
        Ok(probe.delta + self.eta * prox_delta)
    }

    fn commit(&mut self, x: &mut [f64], j: usize, new_value: f64) {
        let step = new_value - x[j];
        for (i, d) in self.system.column(j) {
            let old = self.residuals[i];
            let new = old + d * step;
            self.residuals[i] = new;
            self.proximity += new * new - old * old;
        }
        let cache = self.phi_cache.as_mut().expect("psi_full called");
        self.target.commit(cache, x, j, new_value);
    }

    /// Sets `x[j] = new_value`, updating at most three target terms and the
    /// residuals of every row through pixel `j`. Returns the new `psi`.
    pub fn psi_delta(&mut self, x: &mut [f64], j: usize, new_value: f64) -> Result<f64> {
        self.check(x)?;
        self.psi_probe(x, j, new_value)?;
        self.commit(x, j, new_value);
        Ok(self.psi())
    }
}

/// Coordinate search on the penalized objective. Each outer iteration
/// consumes one step size and probes up to `2J` coordinate directions,
/// accepting the first with `psi(z) < psi(x^k)`.
pub fn ep_coordinate_search<T: Target>(
    objective: &mut PenalizedObjective<'_, T>,
    schedule: &StepSchedule,
    domain: &DomainSpec,
    iterations: usize,
    start: &[f64],
) -> Result<IterateTrace> {
    if iterations == 0 {
        return Err(Error::InvalidConfig("at least one iteration is required".into()));
    }
    let mut x = start.to_vec();
    objective.psi_full(&x)?;
    let mut schedule = schedule.clone();
    let mut directions = DirectionSequence::new(x.len())?;
    let mut tracker = DomainTracker::new(domain, &x)?;

    let record = |k: usize, obj: &PenalizedObjective<'_, T>| {
        let mut r = TraceRecord::new(k, obj.proximity(), obj.phi());
        r.psi = Some(obj.psi());
        r
    };
    let mut trace = IterateTrace::default();
    trace.push(record(0, objective));
    for k in 0..iterations {
        let gamma = schedule.next_gamma();
        let mut probes = 0u64;
        let mut hit = None;
        for _ in 0..directions.period() {
            let c = directions.next_direction();
            probes += 1;
            let value = x[c.index] + gamma * c.sign();
            if !tracker.admits(&x, c.index, value) {
                objective.counters.probes += 1;
                continue;
            }
            if objective.psi_probe(&x, c.index, value)? < 0.0 {
                hit = Some((c.index, value));
                break;
            }
        }
        let mut rec;
        if let Some((j, value)) = hit {
            let old = x[j];
            objective.commit(&mut x, j, value);
            tracker.update(old, j, value);
            rec = record(k + 1, objective);
            rec.probes_accepted = 1;
            rec.probes_rejected = probes - 1;
        } else {
            rec = record(k + 1, objective);
            rec.probes_rejected = probes;
        }
        rec.gamma_consumed = gamma;
        trace.push(rec);
    }
    trace.work = Some(objective.counters());
    trace.final_iterate = x;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{SparseRow, ZeroRowPolicy};
    use crate::target::MedianRoughnessTarget;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn system(rows: &[&[(usize, f64)]], rhs: &[f64], dim: usize) -> ConstraintSystem {
        let rows = rows.iter().map(|r| SparseRow::new(r.to_vec()).unwrap()).collect();
        ConstraintSystem::build(rows, rhs.to_vec(), dim, ZeroRowPolicy::Reject).unwrap()
    }

    #[test]
    fn psi_full_examples() {
        let target = MedianRoughnessTarget::new(2, 2).unwrap();
        let s = system(&[&[(0, 1.0), (1, 1.0)]], &[2.0], 4);
        let x = [1.0, 4.0, 2.0, 0.0];
        assert_eq!(PenalizedObjective::new(&target, &s, 2.0).unwrap().psi_full(&x).unwrap(), 19.0);
        assert_eq!(PenalizedObjective::new(&target, &s, 0.0).unwrap().psi_full(&x).unwrap(), 1.0);
        let consistent = system(&[&[(0, 1.0), (1, 1.0)]], &[5.0], 4);
        assert_eq!(PenalizedObjective::new(&target, &consistent, 3.0).unwrap().psi_full(&x).unwrap(), 1.0);
        assert!(PenalizedObjective::new(&target, &s, -1.0).is_err());
        let mut obj = PenalizedObjective::new(&target, &s, 1.0).unwrap();
        assert!(obj.psi_probe(&x, 0, 1.0).is_err());
    }

    #[test]
    fn untouched_component_changes_nothing() {
        // pixel 3 of a 2x2 grid is in no target term; no row crosses it
        let target = MedianRoughnessTarget::new(2, 2).unwrap();
        let s = system(&[&[(0, 1.0), (1, 1.0)]], &[2.0], 4);
        let mut x = vec![1.0, 4.0, 2.0, 0.0];
        let mut obj = PenalizedObjective::new(&target, &s, 2.0).unwrap();
        let before = obj.psi_full(&x).unwrap();
        let after = obj.psi_delta(&mut x, 3, 7.0).unwrap();
        assert_eq!(before, after);
        assert_eq!(obj.counters(), WorkCounters { probes: 1, phi_terms: 0, residual_updates: 0 });
    }

    #[test]
    fn counters_match_instrumented_oracle() {
        let target = MedianRoughnessTarget::new(3, 3).unwrap();
        let s = system(&[&[(0, 1.0), (4, 2.0)], &[(4, 1.0), (8, 1.0)], &[(2, 1.0)]], &[1.0, 2.0, 3.0], 9);
        let mut x = vec![0.0; 9];
        let mut obj = PenalizedObjective::new(&target, &s, 1.0).unwrap();
        obj.psi_full(&x).unwrap();
        let mut expected = WorkCounters::default();
        for j in [4, 0, 8, 2, 5] {
            expected.probes += 1;
            expected.phi_terms += target.dependents(j).count() as u64;
            expected.residual_updates += s.column_nnz(j) as u64;
            obj.psi_delta(&mut x, j, 0.5).unwrap();
        }
        assert_eq!(obj.counters(), expected);
        assert_eq!(expected.residual_updates, 2 + 1 + 1 + 1);
    }

    #[test]
    fn incremental_matches_full_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (rows_n, w, h) = (50, 6, 5);
        let rows: Vec<SparseRow> = (0..rows_n)
            .map(|_| {
                let mut entries = Vec::new();
                for j in 0..w * h {
                    if rng.random_bool(0.3) {
                        entries.push((j, rng.random_range(0.1..2.0)));
                    }
                }
                SparseRow::new(entries).unwrap()
            })
            .collect();
        let rhs = (0..rows_n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s = ConstraintSystem::build(rows, rhs, w * h, ZeroRowPolicy::Drop).unwrap();
        let target = MedianRoughnessTarget::new(w, h).unwrap();
        let mut x: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut obj = PenalizedObjective::new(&target, &s, 1.7).unwrap();
        obj.psi_full(&x).unwrap();
        for _ in 0..1000 {
            let j = rng.random_range(0..w * h);
            let v = rng.random_range(-1.0..1.0);
            let inc = obj.psi_delta(&mut x, j, v).unwrap();
            let full = PenalizedObjective::new(&target, &s, 1.7).unwrap().psi_full(&x).unwrap();
            assert!((inc - full).abs() <= 1e-9 * full, "{inc} vs {full}");
        }
        let fresh = s.residuals(&x).unwrap();
        for (a, b) in obj.residuals().iter().zip(&fresh) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn one_pixel_hand_trace() {
        let target = MedianRoughnessTarget::new(1, 1).unwrap();
        let s = system(&[&[(0, 1.0)]], &[1.0], 1);
        let mut obj = PenalizedObjective::new(&target, &s, 1.0).unwrap();
        let sched = StepSchedule::new(0.5, 0.5).unwrap();
        let t = ep_coordinate_search(&mut obj, &sched, &DomainSpec::AllOfSpace, 1, &[0.0]).unwrap();
        assert_eq!(t.final_iterate, vec![0.5]);
        assert_eq!(t.records()[1].psi, Some(0.25));
        assert_eq!(t.records()[0].psi, Some(1.0));
    }

    #[test]
    fn no_improvement_keeps_iterate() {
        let target = MedianRoughnessTarget::new(2, 2).unwrap();
        let s = system(&[&[(0, 1.0)]], &[0.0], 4);
        let mut obj = PenalizedObjective::new(&target, &s, 1.0).unwrap();
        let sched = StepSchedule::new(0.1, 0.5).unwrap();
        let t = ep_coordinate_search(&mut obj, &sched, &DomainSpec::AllOfSpace, 3, &[0.0; 4]).unwrap();
        assert_eq!(t.final_iterate, vec![0.0; 4]);
        assert!(t.records()[1..].iter().all(|r| r.probes_accepted == 0 && r.probes_rejected == 8));
    }

    #[test]
    fn pure_coordinate_descent_with_zero_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let target = MedianRoughnessTarget::new(4, 4).unwrap();
        let s = system(&[&[(0, 1.0)]], &[0.0], 16);
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut obj = PenalizedObjective::new(&target, &s, 0.0).unwrap();
        let sched = StepSchedule::new(0.05, 0.99).unwrap();
        let t = ep_coordinate_search(&mut obj, &sched, &DomainSpec::AllOfSpace, 200, &x).unwrap();
        for w in t.records().windows(2) {
            assert!(w[1].target <= w[0].target);
            let (a, b) = (w[0].psi.unwrap(), w[1].psi.unwrap());
            if w[1].probes_accepted == 1 {
                assert!(b < a);
            } else {
                assert_eq!(a, b);
            }
        }
    }
}
