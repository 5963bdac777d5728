//! Simulated fan-beam tomography: ellipse phantoms, pixel grids, exact
//! ray/pixel intersection lengths, and constraint-system generation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Execution};
use crate::system::{ConstraintSystem, ImageVector, SparseRow, ZeroRowPolicy};

/// A `width x height` grid of square pixels centred on the origin. Row 0 is
/// the top row; pixel `j = row * width + col`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGrid {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, pixel_size: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("grid dimensions must be positive".into()));
        }
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(Error::InvalidConfig("pixel size must be positive".into()));
        }
        Ok(Self { width, height, pixel_size })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width as f64 * self.pixel_size
    }

    pub fn half_height(&self) -> f64 {
        0.5 * self.height as f64 * self.pixel_size
    }

    pub fn half_diagonal(&self) -> f64 {
        self.half_width().hypot(self.half_height())
    }

    pub fn pixel_center(&self, j: usize) -> (f64, f64) {
        let (row, col) = (j / self.width, j % self.width);
        (
            -self.half_width() + (col as f64 + 0.5) * self.pixel_size,
            self.half_height() - (row as f64 + 0.5) * self.pixel_size,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub ax: f64,
    pub ay: f64,
    /// Counter-clockwise rotation in radians.
    pub rotation: f64,
    pub density: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.rotation.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.ax).powi(2) + (v / self.ay).powi(2) <= 1.0
    }
}

/// Additive overlay of ellipses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EllipsePhantom {
    ellipses: Vec<Ellipse>,
}

impl EllipsePhantom {
    pub fn new(ellipses: Vec<Ellipse>) -> Result<Self> {
        for (i, e) in ellipses.iter().enumerate() {
            let finite = [e.cx, e.cy, e.ax, e.ay, e.rotation, e.density].iter().all(|v| v.is_finite());
            if !finite || e.ax <= 0.0 || e.ay <= 0.0 {
                return Err(Error::InvalidConfig(format!("ellipse {i}: semi-axes must be positive")));
            }
        }
        Ok(Self { ellipses })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Default head-like phantom scaled to `grid`: a skull ring (outer
    /// ellipse minus brain ellipse) and two interior features.
    pub fn head(grid: &PixelGrid) -> Self {
        let (hw, hh) = (grid.half_width(), grid.half_height());
        let deg = PI / 180.0;
        let e = |cx: f64, cy: f64, ax: f64, ay: f64, rot: f64, density: f64| Ellipse {
            cx: cx * hw,
            cy: cy * hh,
            ax: ax * hw,
            ay: ay * hh,
            rotation: rot * deg,
            density,
        };
        Self {
            ellipses: vec![
                e(0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
                e(0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
                e(-0.22, 0.0, 0.16, 0.41, 18.0, 0.3),
                e(0.15, 0.35, 0.21, 0.25, 0.0, 0.15),
            ],
        }
    }

    pub fn ellipses(&self) -> &[Ellipse] {
        &self.ellipses
    }

    pub fn density_at(&self, x: f64, y: f64) -> f64 {
        self.ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.density).sum()
    }

    /// Multiplies every density by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { ellipses: self.ellipses.iter().map(|e| Ellipse { density: e.density * factor, ..*e }).collect() }
    }

    /// Rotates every ellipse counter-clockwise about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            ellipses: self
                .ellipses
                .iter()
                .map(|e| Ellipse {
                    cx: c * e.cx - s * e.cy,
                    cy: s * e.cx + c * e.cy,
                    rotation: e.rotation + angle,
                    ..*e
                })
                .collect(),
        }
    }
}

/// Phantom files hold one ellipse per line: `cx cy ax ay rot density`.
/// Blank lines and `#` comments are ignored.
impl FromStr for EllipsePhantom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut ellipses = Vec::new();
        for (n, line) in s.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: n + 1, msg: e.to_string() })?;
            let [cx, cy, ax, ay, rotation, density] = vals[..] else {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("expected 6 values, found {}", vals.len()),
                });
            };
            ellipses.push(Ellipse { cx, cy, ax, ay, rotation, density });
        }
        Self::new(ellipses)
    }
}

impl fmt::Display for EllipsePhantom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# cx cy ax ay rot density")?;
        for e in &self.ellipses {
            writeln!(f, "{} {} {} {} {} {}", e.cx, e.cy, e.ax, e.ay, e.rotation, e.density)?;
        }
        Ok(())
    }
}

/// Pixel-centre sampling of a phantom.
pub fn rasterize(grid: &PixelGrid, phantom: &EllipsePhantom) -> ImageVector {
    rasterize_with(grid, phantom, Execution::default())
}

pub fn rasterize_with(grid: &PixelGrid, phantom: &EllipsePhantom, exec: Execution) -> ImageVector {
    let values = map_indexed(grid.len(), exec, |j| {
        let (x, y) = grid.pixel_center(j);
        phantom.density_at(x, y)
    });
    ImageVector::new(grid.width, grid.height, values).expect("grid-sized finite image")
}

/// Divergent-beam geometry: `projections` source positions equally spaced on
/// a circle of `source_radius`, each emitting `rays` lines separated by
/// `fan_increment` radians and symmetric about the line to the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanGeometry {
    pub projections: usize,
    pub rays: usize,
    pub source_radius: f64,
    pub fan_increment: f64,
    pub start_angle: f64,
}

impl FanGeometry {
    /// Source circle at twice the grid's half-diagonal, fan just spanning the
    /// circle circumscribing the grid.
    pub fn covering(grid: &PixelGrid, projections: usize, rays: usize) -> Self {
        let source_radius = 2.0 * grid.half_diagonal();
        let half_fan = (grid.half_diagonal() / source_radius).asin();
        let fan_increment = if rays > 1 { 2.0 * half_fan / (rays - 1) as f64 } else { 0.0 };
        Self { projections, rays, source_radius, fan_increment, start_angle: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.projections == 0 || self.rays == 0 {
            return Err(Error::InvalidConfig("projections and rays must be positive".into()));
        }
        if !(self.source_radius > 0.0 && self.source_radius.is_finite()) {
            return Err(Error::InvalidConfig("source radius must be positive".into()));
        }
        if !self.fan_increment.is_finite() || !self.start_angle.is_finite() {
            return Err(Error::InvalidConfig("fan angles must be finite".into()));
        }
        Ok(())
    }

    pub fn num_rays(&self) -> usize {
        self.projections * self.rays
    }

    /// Source point and unit direction of candidate ray `index`
    /// (projection-major, ray-minor).
    pub fn ray(&self, index: usize) -> ([f64; 2], [f64; 2]) {
        let (p, r) = (index / self.rays, index % self.rays);
        let theta = self.start_angle + 2.0 * PI * p as f64 / self.projections as f64;
        let (st, ct) = theta.sin_cos();
        let source = [self.source_radius * ct, self.source_radius * st];
        let alpha = (r as f64 - 0.5 * (self.rays as f64 - 1.0)) * self.fan_increment;
        let (sa, ca) = alpha.sin_cos();
        let (cx, cy) = (-ct, -st);
        (source, [ca * cx - sa * cy, sa * cx + ca * cy])
    }
}

/// Intersection lengths of the half-line `source + t * direction`, `t >= 0`,
/// with every pixel of `grid`, computed from the sorted parametric crossings
/// of the pixel boundary lines.
pub fn trace_ray(grid: &PixelGrid, source: [f64; 2], direction: [f64; 2]) -> SparseRow {
    let norm = direction[0].hypot(direction[1]);
    if !(norm > 0.0 && norm.is_finite()) {
        return SparseRow::empty();
    }
    let d = [direction[0] / norm, direction[1] / norm];
    let s = grid.pixel_size;
    let lo = [-grid.half_width(), -grid.half_height()];
    let hi = [grid.half_width(), grid.half_height()];

    let mut t_lo = 0.0f64;
    let mut t_hi = f64::INFINITY;
    for a in 0..2 {
        if d[a] == 0.0 {
            if source[a] < lo[a] || source[a] > hi[a] {
                return SparseRow::empty();
            }
        } else {
            let ta = (lo[a] - source[a]) / d[a];
            let tb = (hi[a] - source[a]) / d[a];
            t_lo = t_lo.max(ta.min(tb));
            t_hi = t_hi.min(ta.max(tb));
        }
    }
    if !(t_hi > t_lo) {
        return SparseRow::empty();
    }

    let crossings = |a: usize, count: usize| -> Vec<f64> {
        if d[a] == 0.0 {
            return Vec::new();
        }
        let mut ts: Vec<f64> = (1..count)
            .map(|c| (lo[a] + c as f64 * s - source[a]) / d[a])
            .filter(|&t| t > t_lo && t < t_hi)
            .collect();
        if d[a] < 0.0 {
            ts.reverse();
        }
        ts
    };
    let xs = crossings(0, grid.width);
    let ys = crossings(1, grid.height);

    let mut ts = Vec::with_capacity(xs.len() + ys.len() + 2);
    ts.push(t_lo);
    let (mut i, mut k) = (0, 0);
    while i < xs.len() || k < ys.len() {
        if k == ys.len() || (i < xs.len() && xs[i] <= ys[k]) {
            ts.push(xs[i]);
            i += 1;
        } else {
            ts.push(ys[k]);
            k += 1;
        }
    }
    ts.push(t_hi);

    let mut entries = Vec::with_capacity(ts.len());
    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let xm = source[0] + tm * d[0];
        let ym = source[1] + tm * d[1];
        let col = (((xm - lo[0]) / s).floor() as isize).clamp(0, grid.width as isize - 1) as usize;
        let row = (((hi[1] - ym) / s).floor() as isize).clamp(0, grid.height as isize - 1) as usize;
        entries.push((row * grid.width + col, len));
    }
    entries.sort_by_key(|&(j, _)| j);
    entries.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    SparseRow::new(entries).expect("deduplicated entries")
}

/// Multiplicative Gaussian noise on each ray sum: `h_i * (1 + sigma * g_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub seed: u64,
    pub sigma: f64,
}

/// Traces every candidate ray (zero rows dropped), forms `h = A x_hat` from
/// the rasterized phantom, and optionally perturbs it with noise. Row order
/// is projection-major, ray-minor for every execution strategy.
pub fn generate(
    grid: &PixelGrid,
    geometry: &FanGeometry,
    phantom: &EllipsePhantom,
    noise: Option<NoiseModel>,
) -> Result<(ConstraintSystem, ImageVector)> {
    generate_with(grid, geometry, phantom, noise, Execution::default())
}

pub fn generate_with(
    grid: &PixelGrid,
    geometry: &FanGeometry,
    phantom: &EllipsePhantom,
    noise: Option<NoiseModel>,
    exec: Execution,
) -> Result<(ConstraintSystem, ImageVector)> {
    geometry.validate()?;
    let x_hat = rasterize_with(grid, phantom, exec);
    let rows = map_indexed(geometry.num_rays(), exec, |i| {
        let (src, dir) = geometry.ray(i);
        trace_ray(grid, src, dir)
    });
    let mut rhs: Vec<f64> = rows.iter().map(|r| r.dot(x_hat.values())).collect();
    if let Some(noise) = noise {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        for (h, row) in rhs.iter_mut().zip(&rows) {
            if row.is_empty() {
                continue;
            }
            let g: f64 = StandardNormal.sample(&mut rng);
            *h *= 1.0 + noise.sigma * g;
        }
    }
    let ids = (0..rows.len()).collect();
    let system = ConstraintSystem::build_with_ids(rows, rhs, ids, grid.len(), ZeroRowPolicy::Drop)?;
    Ok((system, x_hat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn unit(w: usize, h: usize) -> PixelGrid {
        PixelGrid::new(w, h, 1.0).unwrap()
    }

    #[test]
    fn rasterize_examples() {
        let g = unit(4, 3);
        assert!(rasterize(&g, &EllipsePhantom::empty()).values().iter().all(|&v| v == 0.0));
        let big = EllipsePhantom::new(vec![Ellipse {
            cx: 0.0,
            cy: 0.0,
            ax: 10.0,
            ay: 10.0,
            rotation: 0.3,
            density: 1.0,
        }])
        .unwrap();
        assert!(rasterize(&g, &big).values().iter().all(|&v| v == 1.0));

        let two = EllipsePhantom::new(vec![
            Ellipse { cx: -0.5, cy: 0.0, ax: 1.2, ay: 1.2, rotation: 0.0, density: 1.0 },
            Ellipse { cx: 0.5, cy: 0.0, ax: 1.2, ay: 1.2, rotation: 0.0, density: 0.5 },
        ])
        .unwrap();
        let img = rasterize(&unit(4, 4), &two);
        // pixels with centres (-0.5, +-0.5) and (0.5, +-0.5) lie in both
        assert_eq!(img.get(1, 1), 1.5);
        assert_eq!(img.get(2, 2), 1.5);
        assert_eq!(img.get(1, 0), 1.0);
        assert_eq!(img.get(1, 3), 0.5);
    }

    #[test]
    fn horizontal_ray_through_row_centres() {
        let g = PixelGrid::new(5, 3, 0.5).unwrap();
        // middle row centre is y = 0
        let row = trace_ray(&g, [-10.0, 0.0], [1.0, 0.0]);
        assert_eq!(row.indices(), &[5, 6, 7, 8, 9]);
        for &v in row.values() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn single_pixel_diagonal() {
        let g = unit(1, 1);
        let row = trace_ray(&g, [-1.0, -1.0], [1.0, 1.0]);
        assert_eq!(row.nnz(), 1);
        assert!((row.values()[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn missing_rays_are_empty() {
        let g = unit(4, 4);
        assert!(trace_ray(&g, [-10.0, 5.0], [1.0, 0.0]).is_empty());
        assert!(trace_ray(&g, [10.0, 0.0], [1.0, 0.0]).is_empty());
        assert!(trace_ray(&g, [0.0, 0.0], [0.0, 0.0]).is_empty());
    }

    /// Counts samples falling in each pixel along the chord.
    fn sampling_oracle(g: &PixelGrid, src: [f64; 2], dir: [f64; 2], t0: f64, t1: f64) -> Vec<f64> {
        let n = 100_000;
        let step = (t1 - t0) / n as f64;
        let mut out = vec![0.0; g.len()];
        for k in 0..n {
            let t = t0 + (k as f64 + 0.5) * step;
            let (x, y) = (src[0] + t * dir[0], src[1] + t * dir[1]);
            let col = ((x + g.half_width()) / g.pixel_size).floor();
            let row = ((g.half_height() - y) / g.pixel_size).floor();
            if col >= 0.0 && row >= 0.0 && (col as usize) < g.width && (row as usize) < g.height {
                out[row as usize * g.width + col as usize] += step;
            }
        }
        out
    }

    #[test]
    fn oblique_ray_matches_sampling_oracle() {
        let g = unit(4, 4);
        let src = [-5.0, -1.3];
        let norm = (1.0f64).hypot(0.37);
        let dir = [1.0 / norm, 0.37 / norm];
        let row = trace_ray(&g, src, dir);
        let oracle = sampling_oracle(&g, src, dir, 0.0, 12.0);
        let mut dense = vec![0.0; g.len()];
        for (j, v) in row.iter() {
            dense[j] = v;
        }
        for j in 0..g.len() {
            assert!((dense[j] - oracle[j]).abs() < 1e-3, "pixel {j}: {} vs {}", dense[j], oracle[j]);
        }
    }

    fn chord_length(g: &PixelGrid, src: [f64; 2], dir: [f64; 2]) -> f64 {
        // Liang-Barsky clipping of the half-line against the bounding box.
        let n = dir[0].hypot(dir[1]);
        let d = [dir[0] / n, dir[1] / n];
        let lo = [-g.half_width(), -g.half_height()];
        let hi = [g.half_width(), g.half_height()];
        let (mut a, mut b) = (0.0f64, f64::INFINITY);
        for k in 0..2 {
            if d[k] == 0.0 {
                if src[k] < lo[k] || src[k] > hi[k] {
                    return 0.0;
                }
                continue;
            }
            let (t1, t2) = ((lo[k] - src[k]) / d[k], (hi[k] - src[k]) / d[k]);
            a = a.max(t1.min(t2));
            b = b.min(t1.max(t2));
        }
        (b - a).max(0.0)
    }

    #[test]
    fn chord_sum_random_rays() {
        let g = PixelGrid::new(13, 9, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let th: f64 = rng.random_range(0.0..2.0 * PI);
            let src = [12.0 * th.cos(), 12.0 * th.sin()];
            let target = [rng.random_range(-6.0..6.0), rng.random_range(-4.0..4.0)];
            let dir = [target[0] - src[0], target[1] - src[1]];
            let row = trace_ray(&g, src, dir);
            let sum: f64 = row.values().iter().sum();
            let chord = chord_length(&g, src, dir);
            assert!((sum - chord).abs() <= 1e-9 * chord.max(1e-300), "{sum} vs {chord}");
            assert!(row.values().iter().all(|&v| v > 0.0));
            assert!(row.indices().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn noiseless_generation_is_consistent() {
        let g = unit(16, 16);
        let geo = FanGeometry::covering(&g, 12, 21);
        let phantom = EllipsePhantom::head(&g);
        let (sys, x_hat) = generate(&g, &geo, &phantom, None).unwrap();
        assert!(sys.proximity(x_hat.values()).unwrap() < 1e-20);
        let (sys0, _) = generate(&g, &geo, &phantom, Some(NoiseModel { seed: 99, sigma: 0.0 })).unwrap();
        assert_eq!(sys.rhs(), sys0.rhs());
        assert_eq!(sys.rows(), sys0.rows());
        // one row per ray that meets the grid
        let hits = (0..geo.num_rays())
            .filter(|&i| {
                let (s, d) = geo.ray(i);
                !trace_ray(&g, s, d).is_empty()
            })
            .count();
        assert_eq!(sys.num_rows(), hits);
        assert_eq!(sys.num_rows() + sys.dropped_rows(), geo.num_rays());
    }

    #[test]
    fn noisy_generation_is_deterministic() {
        let g = unit(16, 16);
        let geo = FanGeometry::covering(&g, 8, 15);
        let phantom = EllipsePhantom::head(&g);
        let noise = Some(NoiseModel { seed: 3, sigma: 0.01 });
        let (a, x_hat) = generate(&g, &geo, &phantom, noise).unwrap();
        let (b, _) = generate_with(&g, &geo, &phantom, noise, Execution::Sequential).unwrap();
        assert_eq!(a.rhs(), b.rhs());
        assert!(a.proximity(x_hat.values()).unwrap() > 0.0);
    }

    #[test]
    fn quarter_turn_symmetry() {
        let g = unit(20, 20);
        // even ray count: no ray runs exactly along a pixel boundary line
        let mut geo = FanGeometry::covering(&g, 16, 24);
        let phantom = EllipsePhantom::head(&g);
        let (a, _) = generate(&g, &geo, &phantom, None).unwrap();
        geo.start_angle = PI / 2.0;
        let (b, _) = generate(&g, &geo, &phantom.rotated(PI / 2.0), None).unwrap();
        let mut ha = a.rhs().to_vec();
        let mut hb = b.rhs().to_vec();
        ha.sort_by(f64::total_cmp);
        hb.sort_by(f64::total_cmp);
        assert_eq!(ha.len(), hb.len());
        let scale = ha.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in ha.iter().zip(&hb) {
            assert!((x - y).abs() <= 1e-2 * scale, "{x} vs {y} scale {scale}");
        }
    }

    #[test]
    fn phantom_file_round_trip() {
        let g = unit(10, 10);
        let p = EllipsePhantom::head(&g);
        let back: EllipsePhantom = p.to_string().parse().unwrap();
        assert_eq!(back, p);
        assert!("0 0 1 1 0".parse::<EllipsePhantom>().is_err());
        assert!("0 0 -1 1 0 1".parse::<EllipsePhantom>().is_err());
        assert!("0 0 1 x 0 1".parse::<EllipsePhantom>().is_err());
        assert_eq!("# nothing\n\n".parse::<EllipsePhantom>().unwrap(), EllipsePhantom::empty());
    }
}
