//! On-disk cache of generated constraint systems, keyed by a SHA-256 of the
//! generation parameters.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dfs_core::{generate, rasterize, ConstraintSystem, EllipsePhantom, FanGeometry, ImageVector, NoiseModel, PixelGrid};
use sha2::{Digest, Sha256};

pub const CACHE_ENV: &str = "DFS_CACHE_DIR";

/// Everything that determines a generated system.
#[derive(Debug, Clone)]
pub struct GenerationKey<'a> {
    pub grid: &'a PixelGrid,
    pub geometry: &'a FanGeometry,
    pub phantom: &'a EllipsePhantom,
    pub noise: Option<NoiseModel>,
}

impl GenerationKey<'_> {
    pub fn describe(&self) -> String {
        let (g, f) = (self.grid, self.geometry);
        let noise = self.noise.map_or_else(|| "none".to_string(), |n| format!("{} {}", n.seed, n.sigma));
        format!(
            "grid {} {} {}\ngeometry {} {} {} {} {}\nnoise {noise}\nphantom\n{}",
            g.width, g.height, g.pixel_size, f.projections, f.rays, f.source_radius, f.fan_increment, f.start_angle,
            self.phantom
        )
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.describe().as_bytes()))
    }
}

#[derive(Debug, Clone)]
pub struct SystemCache {
    dir: Option<PathBuf>,
}

impl SystemCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    /// Caching is skipped entirely.
    pub fn disabled() -> Self {
        Self { dir: None }
    }

    /// Uses the directory named by `DFS_CACHE_DIR`, or `.dfs-cache` in the
    /// working directory.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(CACHE_ENV).map_or_else(|| PathBuf::from(".dfs-cache"), PathBuf::from))
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn path_for(&self, key: &GenerationKey<'_>) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.sys", key.hash())))
    }

    /// Returns the system, the phantom image, and whether the system came
    /// from the cache.
    pub fn load_or_generate(&self, key: &GenerationKey<'_>) -> Result<(ConstraintSystem, ImageVector, bool)> {
        if let Some(path) = self.path_for(key) {
            if path.is_file() {
                let file = fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
                let system = ConstraintSystem::read_text(BufReader::new(file))
                    .with_context(|| format!("reading cached system {}", path.display()))?;
                return Ok((system, rasterize(key.grid, key.phantom), true));
            }
        }
        let (system, x_hat) = generate(key.grid, key.geometry, key.phantom, key.noise)?;
        if let Some(path) = self.path_for(key) {
            store(&path, &system).with_context(|| format!("writing cache entry {}", path.display()))?;
        }
        Ok((system, x_hat, false))
    }
}

fn store(path: &Path, system: &ConstraintSystem) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    let mut w = BufWriter::new(tmp.as_file());
    system.write_text(&mut w)?;
    w.flush()?;
    drop(w);
    tmp.persist(path)?;
    Ok(())
}
