//! The 64x64 desk instance used by the examples, benches and acceptance tests.

use crate::error::Result;
use crate::feasibility::{FeasibilityConfig, OrderingScheme, RowOrdering};
use crate::parallel::Execution;
use crate::superiorizer::{StepSchedule, SuperiorizationConfig};
use crate::system::{ConstraintSystem, ImageVector};
use crate::target::MedianRoughnessTarget;
use crate::tomo::{generate_with, EllipsePhantom, FanGeometry, NoiseModel, PixelGrid};

pub const SIZE: usize = 64;
pub const PROJECTIONS: usize = 120;
pub const RAYS: usize = 95;
pub const DENSITY_SCALE: f64 = 5.0;
pub const NOISE: NoiseModel = NoiseModel { seed: 2024, sigma: 0.01 };
pub const LAMBDA: f64 = 0.05;
pub const PERTURBATIONS: usize = 2000;
pub const B: f64 = 0.02;
pub const A: f64 = 0.99999;
pub const SWEEPS: usize = 30;

#[derive(Debug, Clone)]
pub struct DeskInstance {
    pub grid: PixelGrid,
    pub geometry: FanGeometry,
    pub phantom: EllipsePhantom,
    pub system: ConstraintSystem,
    pub x_hat: ImageVector,
    pub target: MedianRoughnessTarget,
}

impl DeskInstance {
    pub fn new(noise: Option<NoiseModel>) -> Result<Self> {
        Self::with(noise, Execution::default())
    }

    pub fn with(noise: Option<NoiseModel>, exec: Execution) -> Result<Self> {
        let grid = PixelGrid::new(SIZE, SIZE, 1.0)?;
        let geometry = FanGeometry::covering(&grid, PROJECTIONS, RAYS);
        let phantom = EllipsePhantom::head(&grid).scaled(DENSITY_SCALE);
        let (system, x_hat) = generate_with(&grid, &geometry, &phantom, noise, exec)?;
        let target = MedianRoughnessTarget::new(SIZE, SIZE)?;
        Ok(Self { grid, geometry, phantom, system, x_hat, target })
    }

    pub fn feasibility(&self) -> Result<FeasibilityConfig> {
        let ordering = RowOrdering::new(OrderingScheme::ProjectionBitReversal, PROJECTIONS, RAYS)?;
        Ok(FeasibilityConfig { lambda: LAMBDA, ordering })
    }

    pub fn superiorization(&self, sweeps: usize) -> Result<SuperiorizationConfig> {
        Ok(SuperiorizationConfig::new(PERTURBATIONS, sweeps, StepSchedule::new(B, A)?))
    }

    pub fn zero_start(&self) -> Vec<f64> {
        vec![0.0; self.grid.len()]
    }
}
