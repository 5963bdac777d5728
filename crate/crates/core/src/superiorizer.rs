//! Superiorized versions of the ART feasibility-seeking iteration.
//!
//! [`superiorize_cw`] is the derivative-free component-wise method: before
//! every sweep of `P_T` it performs `N` perturbation phases, each of which
//! consumes one step size `gamma` and probes coordinate directions `+-e^j`
//! until one strictly reduces the target. [`superiorize_nonascent`] is the
//! classical variant driven by a supplied nonascending vector.
//!
//! Both share the step-size cursor across all phases and sweeps; the
//! component-wise method also shares the direction cursor.

use crate::error::{Error, Result};
use crate::evaluation::{IterateTrace, PhaseRecord, TraceRecord, WorkCounters};
use crate::feasibility::{FeasibilityConfig, ProjectionOperator};
use crate::system::ConstraintSystem;
use crate::target::{DomainSpec, DomainTracker, Target};

/// Summable step sizes `gamma_l = b * a^l`, `l = 0, 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    b: f64,
    a: f64,
    cursor: i64,
}

impl StepSchedule {
    pub fn new(b: f64, a: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidConfig(format!("step scale b = {b} must be positive")));
        }
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidConfig(format!("step ratio a = {a} must lie in (0, 1)")));
        }
        Ok(Self { b, a, cursor: -1 })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Index of the last emitted step, `-1` before the first.
    pub fn cursor(&self) -> i64 {
        self.cursor
    }

    /// `b / (1 - a)`.
    pub fn sum_bound(&self) -> f64 {
        self.b / (1.0 - self.a)
    }

    pub fn next_gamma(&mut self) -> f64 {
        self.cursor += 1;
        self.b * self.a.powf(self.cursor as f64)
    }
}

/// Signed coordinate direction `sign * e^index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoordinateDirection {
    pub index: usize,
    pub negative: bool,
}

impl CoordinateDirection {
    pub fn sign(&self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }
}

/// The cycle `e^1, ..., e^J, -e^1, ..., -e^J` repeated forever; every window
/// of `2J` consecutive emissions contains each signed direction once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionSequence {
    dim: usize,
    cursor: i64,
}

impl DirectionSequence {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("direction sequence needs a positive dimension".into()));
        }
        Ok(Self { dim, cursor: -1 })
    }

    pub fn cursor(&self) -> i64 {
        self.cursor
    }

    pub fn period(&self) -> usize {
        2 * self.dim
    }

    pub fn next_direction(&mut self) -> CoordinateDirection {
        self.cursor += 1;
        let m = (self.cursor as u64 % (2 * self.dim as u64)) as usize;
        if m < self.dim {
            CoordinateDirection { index: m, negative: false }
        } else {
            CoordinateDirection { index: m - self.dim, negative: true }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperiorizationConfig {
    /// Perturbation phases `N` before each sweep.
    pub perturbations: usize,
    /// Outer iterations `K`.
    pub sweeps: usize,
    pub schedule: StepSchedule,
    pub domain: DomainSpec,
    /// Probe limit per phase for [`superiorize_nonascent`].
    pub probe_budget: u64,
    pub record_phases: bool,
    pub keep_snapshots: bool,
}

impl SuperiorizationConfig {
    pub fn new(perturbations: usize, sweeps: usize, schedule: StepSchedule) -> Self {
        Self {
            perturbations,
            sweeps,
            schedule,
            domain: DomainSpec::AllOfSpace,
            probe_budget: 1_000_000,
            record_phases: false,
            keep_snapshots: false,
        }
    }

    fn validate(&self, system: &ConstraintSystem, start: &[f64]) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::InvalidConfig("at least one sweep is required".into()));
        }
        if start.len() != system.dim() {
            return Err(Error::DimensionMismatch { expected: system.dim(), actual: start.len() });
        }
        if let DomainSpec::Box { lo, .. } = &self.domain {
            if lo.len() != start.len() {
                return Err(Error::DimensionMismatch { expected: start.len(), actual: lo.len() });
            }
        }
        Ok(())
    }
}

/// How [`superiorize_nonascent`] picks its nonascending vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonascentProvider {
    ZeroVector,
    /// `-grad / |grad|`, or zero where the gradient vanishes. Needs a target
    /// that supplies a gradient.
    NormalizedNegativeGradient,
}

impl NonascentProvider {
    pub fn direction<T: Target>(&self, target: &T, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            NonascentProvider::ZeroVector => Ok(vec![0.0; x.len()]),
            NonascentProvider::NormalizedNegativeGradient => {
                let g = target.gradient(x).ok_or(Error::GradientUnavailable)?;
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    Ok(g.iter().map(|v| -v / norm).collect())
                } else {
                    Ok(vec![0.0; x.len()])
                }
            }
        }
    }
}

/// An accepted component-wise probe, reported before it is applied.
#[derive(Debug)]
pub struct AcceptedProbe<'a> {
    pub k: usize,
    pub n: usize,
    /// The phase iterate `x^{k,n}`.
    pub point: &'a [f64],
    pub direction: CoordinateDirection,
    pub gamma: f64,
    /// `phi(z) - phi(x^{k,n})`.
    pub delta: f64,
}

fn outer_record<T: Target>(
    system: &ConstraintSystem,
    target: &T,
    k: usize,
    x: &[f64],
    keep: bool,
) -> Result<TraceRecord> {
    let mut rec = TraceRecord::new(k, system.proximity(x)?, target.evaluate(x));
    if keep {
        rec.snapshot = Some(x.to_vec());
    }
    Ok(rec)
}

/// Component-wise derivative-free superiorization.
pub fn superiorize_cw<T: Target>(
    system: &ConstraintSystem,
    config: &SuperiorizationConfig,
    feasibility: &FeasibilityConfig,
    target: &T,
    start: &[f64],
) -> Result<IterateTrace> {
    superiorize_cw_observed(system, config, feasibility, target, start, |_| {})
}

/// [`superiorize_cw`] with a callback invoked on every accepted probe.
pub fn superiorize_cw_observed<T, F>(
    system: &ConstraintSystem,
    config: &SuperiorizationConfig,
    feasibility: &FeasibilityConfig,
    target: &T,
    start: &[f64],
    mut observer: F,
) -> Result<IterateTrace>
where
    T: Target,
    F: FnMut(&AcceptedProbe<'_>),
{
    config.validate(system, start)?;
    let op = ProjectionOperator::new(system, feasibility)?;
    let dim = system.dim();
    let mut schedule = config.schedule.clone();
    let mut directions = DirectionSequence::new(dim)?;
    let mut x = start.to_vec();
    let mut domain = DomainTracker::new(&config.domain, &x)?;
    let mut cache = target.prepare(&x)?;
    let mut work = WorkCounters::default();
    let mut phases = config.record_phases.then(Vec::new);

    let mut trace = IterateTrace::default();
    trace.push(outer_record(system, target, 0, &x, config.keep_snapshots)?);

    for k in 0..config.sweeps {
        let (mut gamma_sum, mut accepted, mut rejected) = (0.0, 0u64, 0u64);
        for n in 0..config.perturbations {
            let gamma = schedule.next_gamma();
            gamma_sum += gamma;
            let phi_before = target.cached_value(&cache);
            let mut probes = 0u64;
            let mut hit = None;
            for _ in 0..directions.period() {
                let c = directions.next_direction();
                probes += 1;
                work.probes += 1;
                let value = x[c.index] + gamma * c.sign();
                if !domain.admits(&x, c.index, value) {
                    continue;
                }
                let probe = target.probe(&cache, &x, c.index, value);
                work.phi_terms += probe.terms as u64;
                // compare as stored: a decrease too small to change phi is not one
                if phi_before + probe.delta < phi_before {
                    hit = Some((c, value, probe.delta));
                    break;
                }
            }
            if let Some((c, value, delta)) = hit {
                observer(&AcceptedProbe { k, n, point: &x, direction: c, gamma, delta });
                let old = x[c.index];
                target.commit(&mut cache, &mut x, c.index, value);
                domain.update(old, c.index, value);
                accepted += 1;
                rejected += probes - 1;
            } else {
                rejected += probes;
            }
            if let Some(log) = phases.as_mut() {
                log.push(PhaseRecord {
                    k,
                    n,
                    gamma,
                    phi_before,
                    phi_after: target.cached_value(&cache),
                    probes,
                    accepted: hit.is_some(),
                });
            }
        }
        op.apply(&mut x)?;
        domain.reset(&x);
        if config.perturbations > 0 {
            cache = target.prepare(&x)?;
        }
        let mut rec = outer_record(system, target, k + 1, &x, config.keep_snapshots)?;
        rec.gamma_consumed = gamma_sum;
        rec.probes_accepted = accepted;
        rec.probes_rejected = rejected;
        trace.push(rec);
    }
    trace.phases = phases;
    trace.work = Some(work);
    trace.final_iterate = x;
    Ok(trace)
}

/// Superiorization with nonascending vectors. Each probe consumes a step
/// size; a probe `z = x^{k,n} + gamma v` is accepted when `z` is in the
/// domain and `phi(z) <= phi(x^k)`.
pub fn superiorize_nonascent<T: Target>(
    system: &ConstraintSystem,
    config: &SuperiorizationConfig,
    feasibility: &FeasibilityConfig,
    target: &T,
    provider: NonascentProvider,
    start: &[f64],
) -> Result<IterateTrace> {
    config.validate(system, start)?;
    if provider == NonascentProvider::NormalizedNegativeGradient && target.gradient(start).is_none() {
        return Err(Error::GradientUnavailable);
    }
    let op = ProjectionOperator::new(system, feasibility)?;
    let mut schedule = config.schedule.clone();
    let mut x = start.to_vec();
    let mut phases = config.record_phases.then(Vec::new);
    let mut work = WorkCounters::default();

    let mut trace = IterateTrace::default();
    trace.push(outer_record(system, target, 0, &x, config.keep_snapshots)?);

    for k in 0..config.sweeps {
        let phi_outer = target.evaluate(&x);
        let mut phi_current = phi_outer;
        let (mut gamma_sum, mut accepted, mut rejected) = (0.0, 0u64, 0u64);
        for n in 0..config.perturbations {
            let v = provider.direction(target, &x)?;
            let zero = v.iter().all(|&c| c == 0.0);
            let mut probes = 0u64;
            let mut z = x.clone();
            loop {
                if probes >= config.probe_budget {
                    return Err(Error::ProbeBudgetExhausted { budget: config.probe_budget, k, n });
                }
                let gamma = schedule.next_gamma();
                gamma_sum += gamma;
                probes += 1;
                work.probes += 1;
                for ((zi, xi), vi) in z.iter_mut().zip(&x).zip(&v) {
                    *zi = xi + gamma * vi;
                }
                if !config.domain.in_domain(&z) {
                    continue;
                }
                let phi_z = if zero {
                    phi_current
                } else {
                    work.phi_terms += x.len() as u64;
                    target.evaluate(&z)
                };
                if phi_z <= phi_outer {
                    if let Some(log) = phases.as_mut() {
                        log.push(PhaseRecord {
                            k,
                            n,
                            gamma,
                            phi_before: phi_current,
                            phi_after: phi_z,
                            probes,
                            accepted: true,
                        });
                    }
                    std::mem::swap(&mut x, &mut z);
                    phi_current = phi_z;
                    break;
                }
            }
            accepted += 1;
            rejected += probes - 1;
        }
        op.apply(&mut x)?;
        let mut rec = outer_record(system, target, k + 1, &x, config.keep_snapshots)?;
        rec.gamma_consumed = gamma_sum;
        rec.probes_accepted = accepted;
        rec.probes_rejected = rejected;
        trace.push(rec);
    }
    trace.phases = phases;
    trace.work = Some(work);
    trace.final_iterate = x;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::{art_run, RowOrdering};
    use crate::system::{SparseRow, ZeroRowPolicy};
    use crate::target::{HalfSquaredNorm, MedianRoughnessTarget};

    fn system(rows: &[&[(usize, f64)]], rhs: &[f64], dim: usize) -> ConstraintSystem {
        let rows = rows.iter().map(|r| SparseRow::new(r.to_vec()).unwrap()).collect();
        ConstraintSystem::build(rows, rhs.to_vec(), dim, ZeroRowPolicy::Reject).unwrap()
    }

    fn feas(s: &ConstraintSystem, lambda: f64) -> FeasibilityConfig {
        FeasibilityConfig { lambda, ordering: RowOrdering::sequential_for(s) }
    }

    #[test]
    fn schedule_emissions() {
        let mut s = StepSchedule::new(0.02, 0.5).unwrap();
        assert_eq!(s.cursor(), -1);
        assert_eq!(s.next_gamma(), 0.02);
        assert_eq!(s.next_gamma(), 0.01);
        assert_eq!(s.next_gamma(), 0.005);
        assert_eq!(s.cursor(), 2);
        let full = StepSchedule::new(0.02, 0.999999).unwrap();
        assert!((full.sum_bound() - 20000.0).abs() < 1e-6);
        assert!(StepSchedule::new(0.0, 0.5).is_err());
        assert!(StepSchedule::new(1.0, 1.0).is_err());
    }

    #[test]
    fn direction_cycle() {
        let mut d = DirectionSequence::new(2).unwrap();
        let got: Vec<_> = (0..5).map(|_| d.next_direction()).collect();
        let e = |index, negative| CoordinateDirection { index, negative };
        assert_eq!(got, vec![e(0, false), e(1, false), e(0, true), e(1, true), e(0, false)]);
        assert!(DirectionSequence::new(0).is_err());
    }

    #[test]
    fn direction_windows_cover_gamma() {
        let dim = 7;
        let mut d = DirectionSequence::new(dim).unwrap();
        let seq: Vec<_> = (0..10 * dim).map(|_| d.next_direction()).collect();
        for w in seq.windows(2 * dim) {
            let mut seen = vec![0; 2 * dim];
            for c in w {
                seen[c.index + if c.negative { dim } else { 0 }] += 1;
            }
            assert!(seen.iter().all(|&s| s == 1));
        }
    }

    #[test]
    fn hand_traced_two_by_two() {
        let s = system(&[&[(0, 1.0), (1, 1.0)]], &[2.0], 4);
        let target = MedianRoughnessTarget::new(2, 2).unwrap();
        let mut cfg = SuperiorizationConfig::new(1, 1, StepSchedule::new(0.02, 0.5).unwrap());
        cfg.record_phases = true;
        let t = superiorize_cw(&s, &cfg, &feas(&s, 1.0), &target, &[0.0; 4]).unwrap();
        let phases = t.phases.as_ref().unwrap();
        assert_eq!(phases.len(), 1);
        assert!(!phases[0].accepted);
        assert_eq!(phases[0].probes, 8);
        assert_eq!(t.final_iterate, vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(t.records()[1].probes_rejected, 8);
        assert_eq!(t.records()[1].gamma_consumed, 0.02);
    }

    #[test]
    fn single_pixel_never_accepts() {
        let s = system(&[&[(0, 1.0)]], &[1.0], 1);
        let target = MedianRoughnessTarget::new(1, 1).unwrap();
        let cfg = SuperiorizationConfig::new(5, 3, StepSchedule::new(0.1, 0.9).unwrap());
        let f = feas(&s, 0.5);
        let t = superiorize_cw(&s, &cfg, &f, &target, &[0.0]).unwrap();
        let a = art_run(&s, &f, &target, &[0.0], 3).unwrap();
        assert_eq!(t.final_iterate, a.final_iterate);
        assert!(t.records().iter().all(|r| r.probes_accepted == 0));
    }

    #[test]
    fn accepted_probe_strictly_decreases() {
        // x = (1, 0, 0, 0) on 2x2: phi = sqrt(1 - 0) = 1; -e^1 reduces it
        let s = system(&[&[(3, 1.0)]], &[0.0], 4);
        let target = MedianRoughnessTarget::new(2, 2).unwrap();
        let mut cfg = SuperiorizationConfig::new(3, 1, StepSchedule::new(0.25, 0.5).unwrap());
        cfg.record_phases = true;
        let mut seen = Vec::new();
        let t = superiorize_cw_observed(&s, &cfg, &feas(&s, 1.0), &target, &[1.0, 0.0, 0.0, 0.0], |p| {
            seen.push((p.direction, p.gamma, p.delta));
        })
        .unwrap();
        let ph = t.phases.clone().unwrap();
        assert!(ph.iter().all(|p| p.accepted && p.phi_after < p.phi_before));
        assert_eq!(seen.len(), 3);
        assert!(seen.iter().all(|(_, _, d)| *d < 0.0));
        let dirs: Vec<_> = seen.iter().map(|(c, _, _)| (c.index, c.negative)).collect();
        assert_eq!(dirs, vec![(1, false), (0, true), (1, false)]);
        assert_eq!(t.final_iterate, vec![0.875, 0.3125, 0.0, 0.0]);
        assert_eq!(ph.iter().map(|p| p.probes).collect::<Vec<_>>(), vec![2, 3, 5]);
    }

    #[test]
    fn box_domain_blocks_probes() {
        let s = system(&[&[(3, 1.0)]], &[0.0], 4);
        let target = MedianRoughnessTarget::new(2, 2).unwrap();
        let mut cfg = SuperiorizationConfig::new(1, 1, StepSchedule::new(0.25, 0.5).unwrap());
        cfg.domain = DomainSpec::uniform_box(0.9, 2.0, 4).unwrap();
        cfg.record_phases = true;
        // start outside the box in three components: no single change can enter it
        let t = superiorize_cw(&s, &cfg, &feas(&s, 1.0), &target, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(!t.phases.unwrap()[0].accepted);
    }

    #[test]
    fn nonascent_zero_vector_equals_art() {
        let s = system(&[&[(0, 1.0), (1, 2.0)], &[(1, 1.0), (2, -1.0)]], &[1.0, 0.5], 3);
        let f = feas(&s, 0.7);
        let cfg = SuperiorizationConfig::new(4, 5, StepSchedule::new(0.1, 0.9).unwrap());
        let start = [0.2, -0.1, 0.4];
        let t = superiorize_nonascent(&s, &cfg, &f, &HalfSquaredNorm, NonascentProvider::ZeroVector, &start)
            .unwrap();
        let a = art_run(&s, &f, &HalfSquaredNorm, &start, 5).unwrap();
        assert_eq!(t.final_iterate, a.final_iterate);
        for (r, q) in t.records().iter().zip(a.records()) {
            assert_eq!(r.proximity.to_bits(), q.proximity.to_bits());
        }
    }

    #[test]
    fn gradient_provider_requires_gradient() {
        let s = system(&[&[(0, 1.0)]], &[1.0], 4);
        let target = MedianRoughnessTarget::new(2, 2).unwrap();
        let cfg = SuperiorizationConfig::new(1, 1, StepSchedule::new(0.1, 0.9).unwrap());
        let r = superiorize_nonascent(
            &s,
            &cfg,
            &feas(&s, 1.0),
            &target,
            NonascentProvider::NormalizedNegativeGradient,
            &[0.0; 4],
        );
        assert_eq!(r.unwrap_err(), Error::GradientUnavailable);
    }

    /// Ascending direction: every probe fails, so the budget must trip.
    #[derive(Debug)]
    struct Uphill;

    impl Target for Uphill {
        type Cache = ();
        fn evaluate(&self, x: &[f64]) -> f64 {
            x.iter().sum()
        }
        fn prepare(&self, _x: &[f64]) -> Result<()> {
            Ok(())
        }
        fn cached_value(&self, _c: &()) -> f64 {
            0.0
        }
        fn probe(&self, _c: &(), _x: &[f64], _j: usize, _v: f64) -> crate::target::Probe {
            crate::target::Probe { delta: 0.0, terms: 0 }
        }
        fn commit(&self, _c: &mut (), x: &mut [f64], j: usize, v: f64) {
            x[j] = v;
        }
        fn refresh(&self, _c: &mut ()) {}
        fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
            Some(vec![-1.0; x.len()])
        }
    }

    #[test]
    fn probe_budget_trips_on_invalid_provider() {
        let s = system(&[&[(0, 1.0)]], &[1.0], 2);
        let mut cfg = SuperiorizationConfig::new(1, 1, StepSchedule::new(0.1, 0.9).unwrap());
        cfg.probe_budget = 50;
        let r = superiorize_nonascent(
            &s,
            &cfg,
            &feas(&s, 1.0),
            &Uphill,
            NonascentProvider::NormalizedNegativeGradient,
            &[0.0; 2],
        );
        assert_eq!(r.unwrap_err(), Error::ProbeBudgetExhausted { budget: 50, k: 0, n: 0 });
    }

    #[test]
    fn invalid_configs() {
        let s = system(&[&[(0, 1.0)]], &[1.0], 1);
        let target = HalfSquaredNorm;
        let cfg = SuperiorizationConfig::new(1, 0, StepSchedule::new(0.1, 0.9).unwrap());
        assert!(superiorize_cw(&s, &cfg, &feas(&s, 1.0), &target, &[0.0]).is_err());
        let cfg = SuperiorizationConfig::new(1, 1, StepSchedule::new(0.1, 0.9).unwrap());
        assert!(superiorize_cw(&s, &cfg, &feas(&s, 1.0), &target, &[0.0, 1.0]).is_err());
    }
}
