//! The `generate`, `run`, `compare` and `inspect` verbs.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use dfs_core::{
    art_run, better_targeted, ep_coordinate_search, is_monotone_proximity, superiorize_cw, superiorize_nonascent,
    Comparison, ConstraintSystem, DomainSpec, EllipsePhantom, FeasibilityConfig, HalfSquaredNorm, ImageVector,
    IterateTrace, MedianRoughnessTarget, NoiseModel, NonascentProvider, OrderingScheme, PenalizedObjective,
    RowOrdering, StepSchedule, SuperiorizationConfig, Target,
};
use thiserror::Error;

use crate::cache::{GenerationKey, SystemCache};
use crate::config::{ExperimentConfig, Mode, Ordering, PhantomSource, Provider, TargetKind};
use crate::pgm;
use crate::svg::{self, Series};
use crate::trace_csv;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0:#}")]
    Config(anyhow::Error),
    #[error("{0:#}")]
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Config(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

trait Runtime<T> {
    fn runtime(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Runtime<T> for Result<T, E> {
    fn runtime(self) -> CliResult<T> {
        self.map_err(|e| CliError::Runtime(e.into()))
    }
}

/// Writes files into a temporary directory next to `dest`, then moves the
/// directory into place so that `dest` never holds a partial bundle.
pub struct Bundle {
    dir: tempfile::TempDir,
    dest: PathBuf,
}

impl Bundle {
    pub fn create(dest: &Path) -> anyhow::Result<Self> {
        let parent = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        let dir = tempfile::Builder::new().prefix(".dfs-partial-").tempdir_in(parent)?;
        Ok(Self { dir, dest: dest.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        fs::write(self.path(name), contents).with_context(|| format!("writing {name}"))
    }

    pub fn writer(&self, name: &str) -> anyhow::Result<BufWriter<fs::File>> {
        Ok(BufWriter::new(fs::File::create(self.path(name)).with_context(|| format!("creating {name}"))?))
    }

    pub fn commit(self) -> anyhow::Result<PathBuf> {
        if self.dest.exists() {
            fs::remove_dir_all(&self.dest).with_context(|| format!("replacing {}", self.dest.display()))?;
        }
        let tmp = self.dir.keep();
        fs::rename(&tmp, &self.dest).with_context(|| format!("moving bundle to {}", self.dest.display()))?;
        Ok(self.dest)
    }
}

fn write_image(bundle: &Bundle, stem: &str, image: &ImageVector) -> anyhow::Result<()> {
    let mut w = bundle.writer(&format!("{stem}.pgm"))?;
    pgm::write_pgm(&mut w, image)?;
    w.flush()?;
    bundle.write(&format!("{stem}.range"), pgm::sidecar(image))
}

pub fn load_phantom(config: &ExperimentConfig) -> CliResult<EllipsePhantom> {
    let grid = config.grid().map_err(|e| CliError::Config(e.into()))?;
    let base = match &config.phantom {
        PhantomSource::Head => EllipsePhantom::head(&grid),
        PhantomSource::File(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading phantom {}", path.display()))
                .map_err(CliError::Config)?;
            text.parse()
                .with_context(|| format!("parsing phantom {}", path.display()))
                .map_err(CliError::Config)?
        }
    };
    Ok(base.scaled(config.density_scale))
}

fn noise(config: &ExperimentConfig) -> Option<NoiseModel> {
    (config.noise_sigma > 0.0).then_some(NoiseModel { seed: config.noise_seed, sigma: config.noise_sigma })
}

/// A generated (or cached) problem instance.
pub struct Problem {
    pub system: ConstraintSystem,
    pub x_hat: ImageVector,
    pub phantom: EllipsePhantom,
    pub candidates: usize,
    pub cache_hit: bool,
}

pub fn load_problem(config: &ExperimentConfig, cache: &SystemCache) -> CliResult<Problem> {
    config.validate()?;
    let phantom = load_phantom(config)?;
    let grid = config.grid().runtime()?;
    let geometry = config.geometry().runtime()?;
    let key = GenerationKey { grid: &grid, geometry: &geometry, phantom: &phantom, noise: noise(config) };
    let (system, x_hat, cache_hit) = cache.load_or_generate(&key).runtime()?;
    Ok(Problem { system, x_hat, phantom, candidates: geometry.num_rays(), cache_hit })
}

fn problem_summary(out: &mut String, p: &Problem) {
    let _ = writeln!(
        out,
        "rows = {}\ndropped_rows = {}\nnnz = {}\ndim = {}",
        p.system.num_rows(),
        p.candidates - p.system.num_rows(),
        p.system.nnz(),
        p.system.dim()
    );
}

pub fn generate(config: &ExperimentConfig, cache: &SystemCache) -> CliResult<PathBuf> {
    let problem = load_problem(config, cache)?;
    let bundle = Bundle::create(&config.output).runtime()?;
    let mut w = bundle.writer("system.txt").runtime()?;
    problem.system.write_text(&mut w).runtime()?;
    w.flush().runtime()?;
    bundle.write("phantom.txt", problem.phantom.to_string()).runtime()?;
    write_image(&bundle, "phantom", &problem.x_hat).runtime()?;
    let mut summary = String::new();
    problem_summary(&mut summary, &problem);
    let pr = problem.system.proximity(problem.x_hat.values()).runtime()?;
    let _ = writeln!(summary, "phantom_proximity = {pr}");
    bundle.write("summary.txt", summary).runtime()?;
    bundle.commit().runtime()
}

fn feasibility(config: &ExperimentConfig) -> CliResult<FeasibilityConfig> {
    let scheme = match config.ordering {
        Ordering::Sequential => OrderingScheme::Sequential,
        Ordering::BitReversal => OrderingScheme::ProjectionBitReversal,
    };
    let ordering = RowOrdering::new(scheme, config.projections, config.rays).runtime()?;
    Ok(FeasibilityConfig { lambda: config.lambda, ordering })
}

fn superiorization(config: &ExperimentConfig, dim: usize) -> CliResult<SuperiorizationConfig> {
    let schedule = StepSchedule::new(config.b, config.a).map_err(|e| CliError::Config(e.into()))?;
    let mut s = SuperiorizationConfig::new(config.perturbations, config.sweeps, schedule);
    s.probe_budget = config.probe_budget;
    s.domain = domain(config, dim)?;
    Ok(s)
}

fn domain(config: &ExperimentConfig, dim: usize) -> CliResult<DomainSpec> {
    match (config.domain_lo, config.domain_hi) {
        (Some(lo), Some(hi)) => DomainSpec::uniform_box(lo, hi, dim).map_err(|e| CliError::Config(e.into())),
        _ => Ok(DomainSpec::AllOfSpace),
    }
}

fn execute<T: Target>(
    config: &ExperimentConfig,
    system: &ConstraintSystem,
    target: &T,
    start: &[f64],
) -> CliResult<IterateTrace> {
    let feas = feasibility(config)?;
    let trace = match config.mode {
        Mode::None => art_run(system, &feas, target, start, config.sweeps),
        Mode::Cw => superiorize_cw(system, &superiorization(config, start.len())?, &feas, target, start),
        Mode::Nonascent => {
            let provider = match config.provider {
                Provider::Zero => NonascentProvider::ZeroVector,
                Provider::Gradient => NonascentProvider::NormalizedNegativeGradient,
            };
            superiorize_nonascent(system, &superiorization(config, start.len())?, &feas, target, provider, start)
        }
        Mode::Ep => {
            let mut objective = PenalizedObjective::new(target, system, config.eta).runtime()?;
            let schedule = StepSchedule::new(config.b, config.a).runtime()?;
            ep_coordinate_search(&mut objective, &schedule, &domain(config, start.len())?, config.ep_iterations, start)
        }
    };
    trace.runtime()
}

/// Endpoints and counters of a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output: PathBuf,
    pub text: String,
    pub monotone: bool,
}

pub fn run(config: &ExperimentConfig, cache: &SystemCache) -> CliResult<RunSummary> {
    let problem = load_problem(config, cache)?;
    let (w, h) = (config.width, config.height);
    let start = vec![0.0; w * h];
    let (trace, phantom_target) = match config.target {
        TargetKind::Median => {
            let t = MedianRoughnessTarget::new(w, h).runtime()?;
            (execute(config, &problem.system, &t, &start)?, t.evaluate(problem.x_hat.values()))
        }
        TargetKind::HalfSquaredNorm => {
            let t = HalfSquaredNorm;
            (execute(config, &problem.system, &t, &start)?, t.evaluate(problem.x_hat.values()))
        }
    };

    let header = experiment_header(config, &trace);
    let (lo, hi) = (config.slice_start(), config.slice_end());
    let monotone = is_monotone_proximity(&trace, lo, hi).runtime()?;
    let slice: Vec<(f64, f64)> = trace.records()[lo..=hi].iter().map(|r| (r.proximity, r.target)).collect();

    let mut text = String::new();
    let _ = writeln!(text, "mode = {}\ntarget = {}", config.mode.name(), config.target.name());
    if config.mode == Mode::Ep {
        let _ = writeln!(text, "eta = {}", config.eta);
    }
    problem_summary(&mut text, &problem);
    let _ = writeln!(
        text,
        "phantom_proximity = {}\nphantom_target = {phantom_target}",
        problem.system.proximity(problem.x_hat.values()).runtime()?
    );
    let first = &trace.records()[0];
    let last = trace.last().expect("trace has x^0");
    let _ = writeln!(text, "start: k={} proximity={} target={}", first.k, first.proximity, first.target);
    let _ = writeln!(text, "end: k={} proximity={} target={}", last.k, last.proximity, last.target);
    let _ = writeln!(text, "gamma_consumed = {}", trace.gamma_total());
    let _ = writeln!(text, "monotone[{lo},{hi}] = {monotone}");
    if let Some(work) = trace.work {
        let _ = writeln!(text, "{work}");
    }

    let bundle = Bundle::create(&config.output).runtime()?;
    let mut csv = bundle.writer("trace.csv").runtime()?;
    trace_csv::write_trace(&mut csv, &header, &trace).runtime()?;
    csv.flush().runtime()?;
    let final_image = ImageVector::new(w, h, trace.final_iterate.clone()).runtime()?;
    write_image(&bundle, "final", &final_image).runtime()?;
    write_image(&bundle, "phantom", &problem.x_hat).runtime()?;
    let title = format!("{} run, iterates {lo}..{hi}", config.mode.name());
    bundle.write("curve.svg", svg::plot(&[Series::new(config.mode.name(), slice, 0)], &title, config.flip)).runtime()?;
    bundle.write("summary.txt", &text).runtime()?;
    let output = bundle.commit().runtime()?;
    Ok(RunSummary { output, text, monotone })
}

/// Config block stored at the top of trace files. The output directory is
/// left out so that reruns elsewhere produce identical files.
fn experiment_header(config: &ExperimentConfig, trace: &IterateTrace) -> String {
    let mut header: String =
        config.render().lines().filter(|l| !l.starts_with("output =")).map(|l| format!("{l}\n")).collect();
    if let Some(work) = trace.work {
        let _ = writeln!(header, "{work}");
    }
    header
}

pub fn read_trace_file(path: &Path) -> CliResult<IterateTrace> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display())).map_err(CliError::Config)?;
    trace_csv::read_trace(file).with_context(|| format!("parsing {}", path.display())).map_err(CliError::Config)
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub lo: usize,
    pub hi: Option<usize>,
    pub samples: usize,
    pub flip: bool,
    pub output: Option<PathBuf>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { lo: 1, hi: None, samples: 1000, flip: false, output: None }
    }
}

/// Compares trace `a` (as R) against trace `b` (as S).
pub fn compare(a: &Path, b: &Path, opts: &CompareOptions) -> CliResult<Comparison> {
    let (ta, tb) = (read_trace_file(a)?, read_trace_file(b)?);
    let bounds = |t: &IterateTrace| (opts.lo, opts.hi.unwrap_or(t.len().saturating_sub(1)));
    let (ra, rb) = (bounds(&ta), bounds(&tb));
    let cmp = better_targeted(&ta, ra, &tb, rb, opts.samples).map_err(|e| match e {
        dfs_core::Error::NotMonotone { lo, hi, index } => CliError::Runtime(anyhow!(
            "slice [{lo},{hi}] is not of monotone proximity: proximity does not decrease at index {index}"
        )),
        other => CliError::Runtime(other.into()),
    })?;
    if let Some(out) = &opts.output {
        let series = |t: &IterateTrace, (lo, hi): (usize, usize), path: &Path, i| {
            let pts = t.records()[lo..=hi].iter().map(|r| (r.proximity, r.target)).collect();
            Series::new(path.display().to_string(), pts, i)
        };
        let plot = svg::plot(&[series(&ta, ra, a, 0), series(&tb, rb, b, 1)], &format!("verdict: {}", cmp.verdict), opts.flip);
        let bundle = Bundle::create(out).runtime()?;
        bundle.write("overlay.svg", plot).runtime()?;
        bundle.write("report.txt", format!("{cmp}\n")).runtime()?;
        bundle.commit().runtime()?;
    }
    Ok(cmp)
}

pub fn inspect_system(system: &ConstraintSystem) -> CliResult<String> {
    let norms: Vec<f64> = (0..system.num_rows()).map(|i| system.norm_sq(i).sqrt()).collect();
    let (nmin, nmax) = pgm::value_range(&norms);
    let cols: Vec<usize> = (0..system.dim()).map(|j| system.column_nnz(j)).collect();
    let empty_cols = cols.iter().filter(|&&c| c == 0).count();
    let zero = vec![0.0; system.dim()];
    let mut out = String::new();
    let _ = writeln!(out, "dim = {}\nrows = {}\nnnz = {}", system.dim(), system.num_rows(), system.nnz());
    let _ = writeln!(out, "row_norm_min = {nmin}\nrow_norm_max = {nmax}");
    let _ = writeln!(out, "mean_column_nnz = {}", system.nnz() as f64 / system.dim() as f64);
    let _ = writeln!(out, "empty_columns = {empty_cols}");
    let _ = writeln!(out, "proximity_at_zero = {}", system.proximity(&zero).runtime()?);
    Ok(out)
}

pub fn inspect_file(path: &Path) -> CliResult<String> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display())).map_err(CliError::Config)?;
    let system = ConstraintSystem::read_text(std::io::BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(CliError::Config)?;
    inspect_system(&system)
}

/// Summarizes the cached system for `config`, generating it if needed.
pub fn inspect_config(config: &ExperimentConfig, cache: &SystemCache) -> CliResult<String> {
    let problem = load_problem(config, cache)?;
    let mut out = inspect_system(&problem.system)?;
    let _ = writeln!(out, "cache = {}", if problem.cache_hit { "hit" } else { "miss" });
    Ok(out)
}
