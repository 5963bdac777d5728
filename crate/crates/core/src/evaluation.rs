//! Iterate traces, epsilon-outputs, proximity-target curves and the
//! "better targeted" comparison between two runs.

use std::fmt;

use crate::error::{Error, Result};

/// One outer iterate `x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub proximity: f64,
    pub target: f64,
    /// Sum of step sizes consumed while producing this iterate.
    pub gamma_consumed: f64,
    pub probes_accepted: u64,
    pub probes_rejected: u64,
    /// Penalized objective, for exterior-penalty runs.
    pub psi: Option<f64>,
    pub snapshot: Option<Vec<f64>>,
}

impl TraceRecord {
    pub fn new(k: usize, proximity: f64, target: f64) -> Self {
        Self {
            k,
            proximity,
            target,
            gamma_consumed: 0.0,
            probes_accepted: 0,
            probes_rejected: 0,
            psi: None,
            snapshot: None,
        }
    }
}

/// One perturbation phase `x^{k,n} -> x^{k,n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub k: usize,
    pub n: usize,
    pub gamma: f64,
    pub phi_before: f64,
    pub phi_after: f64,
    pub probes: u64,
    pub accepted: bool,
}

/// Exact work counts for incremental evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WorkCounters {
    pub probes: u64,
    pub phi_terms: u64,
    pub residual_updates: u64,
}

impl WorkCounters {
    pub fn phi_terms_per_probe(&self) -> f64 {
        self.phi_terms as f64 / self.probes.max(1) as f64
    }

    pub fn residual_updates_per_probe(&self) -> f64 {
        self.residual_updates as f64 / self.probes.max(1) as f64
    }
}

impl fmt::Display for WorkCounters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "probes={} phi_terms={} residual_updates={}",
            self.probes, self.phi_terms, self.residual_updates
        )
    }
}

/// The sequence `(x^k)` of a run, as proximity/target records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterateTrace {
    records: Vec<TraceRecord>,
    pub phases: Option<Vec<PhaseRecord>>,
    pub work: Option<WorkCounters>,
    pub final_iterate: Vec<f64>,
}

impl IterateTrace {
    pub fn from_records(records: Vec<TraceRecord>) -> Result<Self> {
        let mut t = Self::default();
        for r in records {
            if let Some(last) = t.records.last() {
                if r.k <= last.k {
                    return Err(Error::InvalidConfig("trace indices must increase".into()));
                }
            } else if r.k != 0 {
                return Err(Error::InvalidConfig("trace must start at k = 0".into()));
            }
            t.records.push(r);
        }
        Ok(t)
    }

    /// Convenience for tests and tools: records `k = 0, 1, ...`.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let records =
            pairs.iter().enumerate().map(|(k, &(p, t))| TraceRecord::new(k, p, t)).collect();
        Self { records, ..Self::default() }
    }

    pub(crate) fn push(&mut self, record: TraceRecord) {
        debug_assert!(self.records.last().map_or(record.k == 0, |r| r.k < record.k));
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Total step size consumed over the run.
    pub fn gamma_total(&self) -> f64 {
        self.records.iter().map(|r| r.gamma_consumed).sum()
    }

    fn slice(&self, lo: usize, hi: usize) -> Result<&[TraceRecord]> {
        if lo >= hi || hi >= self.records.len() {
            return Err(Error::BadSlice { lo, hi, len: self.records.len() });
        }
        Ok(&self.records[lo..=hi])
    }
}

/// First record with proximity at most `epsilon`, if any.
pub fn epsilon_output(trace: &IterateTrace, epsilon: f64) -> Option<&TraceRecord> {
    trace.records.iter().find(|r| r.proximity <= epsilon)
}

/// Whether proximity strictly decreases at every step of positions `lo..=hi`.
pub fn is_monotone_proximity(trace: &IterateTrace, lo: usize, hi: usize) -> Result<bool> {
    Ok(first_non_decrease(trace.slice(lo, hi)?).is_none())
}

fn first_non_decrease(records: &[TraceRecord]) -> Option<usize> {
    records.windows(2).position(|w| !(w[0].proximity > w[1].proximity)).map(|i| i + 1)
}

/// Piecewise-linear polyline through `(proximity, target)` vertices with
/// strictly decreasing proximity.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityTargetCurve {
    vertices: Vec<(f64, f64)>,
}

impl ProximityTargetCurve {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::BadSlice { lo: 0, hi: vertices.len().saturating_sub(1), len: vertices.len() });
        }
        if let Some(i) = vertices.windows(2).position(|w| !(w[0].0 > w[1].0)) {
            return Err(Error::NotMonotone { lo: 0, hi: vertices.len() - 1, index: i + 1 });
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// Largest proximity (first vertex).
    pub fn start(&self) -> f64 {
        self.vertices[0].0
    }

    /// Smallest proximity (last vertex).
    pub fn end(&self) -> f64 {
        self.vertices[self.vertices.len() - 1].0
    }

    /// Target value on the curve at proximity `h`.
    pub fn value_at(&self, h: f64) -> Result<f64> {
        let (min, max) = (self.end(), self.start());
        if !(h >= min && h <= max) {
            return Err(Error::OutOfCurveRange { value: h, min, max });
        }
        // first vertex with proximity <= h
        let i = self.vertices.partition_point(|v| v.0 > h);
        let (p1, t1) = self.vertices[i];
        if p1 == h || i == 0 {
            return Ok(t1);
        }
        let (p0, t0) = self.vertices[i - 1];
        Ok(t1 + (t0 - t1) * (h - p1) / (p0 - p1))
    }
}

/// Curve of positions `lo..=hi` of a trace.
pub fn build_curve(trace: &IterateTrace, lo: usize, hi: usize) -> Result<ProximityTargetCurve> {
    let recs = trace.slice(lo, hi)?;
    if let Some(i) = first_non_decrease(recs) {
        return Err(Error::NotMonotone { lo, hi, index: lo + i });
    }
    ProximityTargetCurve::new(recs.iter().map(|r| (r.proximity, r.target)).collect())
}

pub fn curve_value(curve: &ProximityTargetCurve, h: f64) -> Result<f64> {
    curve.value_at(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Better,
    NotBetter,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Better => "better",
            Verdict::NotBetter => "not-better",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub verdict: Verdict,
    /// Larger of the two final proximities.
    pub t: f64,
    /// Smaller of the two initial proximities.
    pub u: f64,
    /// A proximity in `[t, u]` where the first curve lies above the second.
    pub witness: Option<f64>,
    pub reason: Option<String>,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} u={} verdict={} witness=", self.t, self.u, self.verdict)?;
        match self.witness {
            Some(h) => write!(f, "{h}")?,
            None => f.write_str("none")?,
        }
        if let Some(reason) = &self.reason {
            write!(f, " reason=\"{reason}\"")?;
        }
        Ok(())
    }
}

/// Whether curve `p` lies at or below curve `q` over their shared proximity
/// range. Checking every breakpoint of both curves is exact for piecewise
/// linear curves; `samples` uniform points are checked in addition.
pub fn compare_curves(
    p: &ProximityTargetCurve,
    q: &ProximityTargetCurve,
    samples: usize,
) -> Result<Comparison> {
    let t = p.end().max(q.end());
    let u = p.start().min(q.start());
    if t > u {
        return Ok(Comparison {
            verdict: Verdict::NotBetter,
            t,
            u,
            witness: None,
            reason: Some("no overlap".into()),
        });
    }
    let scale = p
        .vertices()
        .iter()
        .chain(q.vertices())
        .fold(1.0f64, |m, v| m.max(v.1.abs()));
    let tol = 1e-12 * scale;

    let mut points: Vec<f64> = vec![t, u];
    points.extend(p.vertices().iter().chain(q.vertices()).map(|v| v.0).filter(|&h| h >= t && h <= u));
    if samples > 1 {
        points.extend((0..samples).map(|i| t + (u - t) * i as f64 / (samples - 1) as f64));
    } else if samples == 1 {
        points.push(0.5 * (t + u));
    }
    points.sort_by(f64::total_cmp);
    points.dedup();

    for &h in &points {
        let h = h.clamp(t, u);
        if p.value_at(h)? > q.value_at(h)? + tol {
            return Ok(Comparison { verdict: Verdict::NotBetter, t, u, witness: Some(h), reason: None });
        }
    }
    Ok(Comparison { verdict: Verdict::Better, t, u, witness: None, reason: None })
}

/// Compares positions `r_lo..=r_hi` of `r` against `s_lo..=s_hi` of `s`.
pub fn better_targeted(
    r: &IterateTrace,
    (r_lo, r_hi): (usize, usize),
    s: &IterateTrace,
    (s_lo, s_hi): (usize, usize),
    samples: usize,
) -> Result<Comparison> {
    let p = build_curve(r, r_lo, r_hi)?;
    let q = build_curve(s, s_lo, s_hi)?;
    compare_curves(&p, &q, samples)
}
