//! Derivative-free superiorization of row-action feasibility seeking.
//!
//! The crate perturbs relaxed Kaczmarz (ART) sweeps over a sparse linear
//! system with component-wise steps that reduce a target function, and
//! provides the machinery to judge whether the perturbed run is better
//! targeted than the unperturbed one:
//!
//! - [`system`]: sparse constraint systems and the squared-residual proximity.
//! - [`tomo`]: fan-beam tomography simulation that generates such systems.
//! - [`feasibility`]: the sweep operator `P_T` and plain ART.
//! - [`target`]: the median-roughness target with O(1) incremental updates.
//! - [`superiorizer`]: component-wise and nonascent-vector superiorization.
//! - [`penalty`]: the exterior-penalty coordinate-search baseline.
//! - [`evaluation`]: epsilon-outputs, proximity-target curves, comparisons.
//! - [`desk`]: a small reference instance.

// `!(a > b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod desk;
pub mod error;
pub mod evaluation;
pub mod feasibility;
pub mod parallel;
pub mod penalty;
pub mod superiorizer;
pub mod system;
pub mod target;
pub mod tomo;

pub use error::{Error, Result};
pub use evaluation::{
    better_targeted, build_curve, compare_curves, curve_value, epsilon_output, is_monotone_proximity,
    Comparison, IterateTrace, PhaseRecord, ProximityTargetCurve, TraceRecord, Verdict, WorkCounters,
};
pub use feasibility::{apply_pt, art_run, FeasibilityConfig, OrderingScheme, ProjectionOperator, RowOrdering};
pub use parallel::Execution;
pub use penalty::{ep_coordinate_search, PenalizedObjective};
pub use superiorizer::{
    superiorize_cw, superiorize_cw_observed, superiorize_nonascent, AcceptedProbe, CoordinateDirection,
    DirectionSequence, NonascentProvider, StepSchedule, SuperiorizationConfig,
};
pub use system::{ConstraintSystem, ImageVector, SparseRow, ZeroRowPolicy};
pub use target::{DomainSpec, HalfSquaredNorm, MedianRoughnessTarget, Target, TargetCache};
pub use tomo::{generate, generate_with, rasterize, rasterize_with, trace_ray, Ellipse, EllipsePhantom, FanGeometry, NoiseModel, PixelGrid};
