//! Command-line flags, the optional `key = value` config file, and the
//! resolved [`RunConfig`].

use std::path::{Path, PathBuf};

use clap::Parser;
use nearwall_core::binning::{BinningOptions, DEFAULT_OVERLAP_FACTOR};
use nearwall_core::{
    Aabb, Backend, BinFraction, Dim, NearWallRadius, Point, RefineParams, Strategy,
};

use crate::error::CliError;

#[derive(Debug, Default, Parser)]
#[command(
    name = "nearwall",
    version,
    about = "Near-wall refinement of block-structured grids"
)]
pub struct Args {
    /// Spatial dimension (2 or 3).
    #[arg(long)]
    pub dim: Option<usize>,

    /// Domain corners: x0 y0 [z0] x1 y1 [z1].
    #[arg(long, num_args = 4..=6, allow_negative_numbers = true, value_name = "COORD")]
    pub domain: Option<Vec<f32>>,

    /// Root blocks per axis.
    #[arg(long, num_args = 2..=3, value_name = "N")]
    pub root_dims: Option<Vec<usize>>,

    /// STL file (ASCII or binary).
    #[arg(long, value_name = "PATH", conflicts_with = "primitives")]
    pub stl: Option<PathBuf>,

    /// Text file of circle/sphere primitives.
    #[arg(long, value_name = "PATH")]
    pub primitives: Option<PathBuf>,

    /// Near-wall distance.
    #[arg(long, value_name = "F")]
    pub dspec: Option<f32>,

    /// Total grid levels, the root level included.
    #[arg(long, value_name = "N")]
    pub levels: Option<usize>,

    #[arg(long, value_name = "naive|binned")]
    pub strategy: Option<Strategy>,

    /// Bins per axis.
    #[arg(long, value_name = "B")]
    pub bin_density: Option<usize>,

    /// Number of batches the bin fill is split into.
    #[arg(long, value_name = "BF")]
    pub bin_fraction: Option<usize>,

    /// Indicator slots per face and batch.
    #[arg(long, value_name = "N")]
    pub overlap_factor: Option<usize>,

    #[arg(long, value_name = "serial|parallel")]
    pub backend: Option<Backend>,

    /// Seed for the randomized validation checks.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    #[arg(long, value_name = "PATH", value_parser = any_path)]
    pub out_vtk: Option<PathBuf>,

    /// Timings CSV, or the sweep table with `--sweep`.
    #[arg(long, value_name = "PATH", value_parser = any_path)]
    pub out_csv: Option<PathBuf>,

    /// Per-bin counts and offsets as CSV.
    #[arg(long, value_name = "PATH", value_parser = any_path)]
    pub dump_bins: Option<PathBuf>,

    /// Run the cross-checks instead of a plain run.
    #[arg(long)]
    pub validate: bool,

    /// Run once per bin density and tabulate timings.
    #[arg(
        long,
        value_delimiter = ',',
        value_name = "B1,B2,...",
        conflicts_with = "validate"
    )]
    pub sweep: Option<Vec<usize>>,

    /// `key = value` file; keys are flag names without the dashes.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Empties the bins of the binned validation run.
    #[arg(long, hide = true)]
    pub corrupt_binned_for_testing: bool,
}

/// Output paths are taken verbatim; an unusable one fails when written.
fn any_path(s: &str) -> Result<PathBuf, std::convert::Infallible> {
    Ok(PathBuf::from(s))
}

impl Args {
    /// Fills every flag left unset from `file`.
    fn or(self, file: Args) -> Args {
        let (stl, primitives) = if self.stl.is_some() || self.primitives.is_some() {
            (self.stl, self.primitives)
        } else {
            (file.stl, file.primitives)
        };
        Args {
            dim: self.dim.or(file.dim),
            domain: self.domain.or(file.domain),
            root_dims: self.root_dims.or(file.root_dims),
            stl,
            primitives,
            dspec: self.dspec.or(file.dspec),
            levels: self.levels.or(file.levels),
            strategy: self.strategy.or(file.strategy),
            bin_density: self.bin_density.or(file.bin_density),
            bin_fraction: self.bin_fraction.or(file.bin_fraction),
            overlap_factor: self.overlap_factor.or(file.overlap_factor),
            backend: self.backend.or(file.backend),
            seed: self.seed.or(file.seed),
            out_vtk: self.out_vtk.or(file.out_vtk),
            out_csv: self.out_csv.or(file.out_csv),
            dump_bins: self.dump_bins.or(file.dump_bins),
            validate: self.validate || file.validate,
            sweep: self.sweep.or(file.sweep),
            config: None,
            corrupt_binned_for_testing: self.corrupt_binned_for_testing,
        }
    }
}

/// Reads a config file by turning each `key = value` line into `--key value`.
pub fn read_config_file(path: &Path) -> Result<Args, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut argv = vec!["nearwall".to_string()];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || {
            CliError::Config(format!(
                "{}:{}: expected key = value",
                path.display(),
                i + 1
            ))
        };
        let (key, value) = line.split_once('=').ok_or_else(bad)?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key == "config" || key.starts_with('-') {
            return Err(bad());
        }
        match key {
            "validate" => match value {
                "true" => argv.push("--validate".into()),
                "false" => {}
                _ => return Err(bad()),
            },
            _ => {
                argv.push(format!("--{key}"));
                argv.extend(value.split_whitespace().map(String::from));
            }
        }
    }
    Args::try_parse_from(argv)
        .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.kind())))
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometrySource {
    Stl(PathBuf),
    Primitives(PathBuf),
    /// Built-in circle (2D) or sphere (3D).
    Default,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Run,
    Validate,
    Sweep(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: Dim,
    pub domain: Aabb,
    pub root_dims: Vec<usize>,
    pub source: GeometrySource,
    pub d_spec: NearWallRadius,
    pub n_levels: usize,
    pub strategy: Strategy,
    pub bin_density: usize,
    pub bin_fraction: BinFraction,
    pub overlap_factor: usize,
    pub backend: Backend,
    pub seed: u64,
    pub out_vtk: Option<PathBuf>,
    pub out_csv: Option<PathBuf>,
    pub dump_bins: Option<PathBuf>,
    pub mode: Mode,
    pub corrupt_binned: bool,
}

/// Default circle: 12,800 edges of radius 0.25 centered in the unit square.
pub const DEFAULT_CIRCLE_EDGES: usize = 12_800;
/// Default sphere: 2 * 320 * 159 = 101,760 triangles of radius 0.3.
pub const DEFAULT_SPHERE_RINGS: (usize, usize) = (160, 320);

impl RunConfig {
    pub fn from_args(args: Args) -> Result<Self, CliError> {
        let args = match &args.config {
            Some(path) => {
                let file = read_config_file(path)?;
                args.or(file)
            }
            None => args,
        };
        let dim = resolve_dim(&args)?;
        let n = dim.n();
        let domain = match &args.domain {
            None => Aabb::unit(dim),
            Some(c) if c.len() == 2 * n => {
                let p = |s: &[f32]| Point([s[0], s[1], if n == 3 { s[2] } else { 0.0 }]);
                Aabb::new(p(&c[..n]), p(&c[n..]))?
            }
            Some(c) => {
                return Err(CliError::Config(format!(
                    "--domain needs {} values, got {}",
                    2 * n,
                    c.len()
                )))
            }
        };
        let root_dims = match args.root_dims {
            None => vec![if dim == Dim::Two { 64 } else { 16 }; n],
            Some(r) if r.len() == n => r,
            Some(r) => {
                return Err(CliError::Config(format!(
                    "--root-dims needs {n} values, got {}",
                    r.len()
                )))
            }
        };
        let source = match (args.stl, args.primitives) {
            (Some(p), _) => {
                if dim != Dim::Three {
                    return Err(CliError::Config("STL geometry requires --dim 3".into()));
                }
                GeometrySource::Stl(p)
            }
            (None, Some(p)) => GeometrySource::Primitives(p),
            (None, None) => GeometrySource::Default,
        };
        let d_spec =
            NearWallRadius::new(
                args.dspec
                    .unwrap_or(if dim == Dim::Two { 0.1 } else { 0.05 }),
            )?;
        let n_levels = args.levels.unwrap_or(3);
        if n_levels == 0 {
            return Err(CliError::Config("--levels must be at least 1".into()));
        }
        let bin_density = args.bin_density.unwrap_or(8);
        if bin_density == 0 {
            return Err(CliError::Config("--bin-density must be positive".into()));
        }
        let overlap_factor = args.overlap_factor.unwrap_or(DEFAULT_OVERLAP_FACTOR);
        if overlap_factor == 0 {
            return Err(CliError::Config("--overlap-factor must be positive".into()));
        }
        let mode = match (args.validate, args.sweep) {
            (true, _) => Mode::Validate,
            (false, Some(list)) => {
                if list.is_empty() || list.contains(&0) {
                    return Err(CliError::Config(
                        "--sweep needs positive bin densities".into(),
                    ));
                }
                Mode::Sweep(list)
            }
            (false, None) => Mode::Run,
        };
        Ok(RunConfig {
            dim,
            domain,
            root_dims,
            source,
            d_spec,
            n_levels,
            strategy: args.strategy.unwrap_or(Strategy::Binned),
            bin_density,
            bin_fraction: BinFraction::new(args.bin_fraction.unwrap_or(1))?,
            overlap_factor,
            backend: args.backend.unwrap_or_default(),
            seed: args.seed.unwrap_or(0),
            out_vtk: args.out_vtk,
            out_csv: args.out_csv,
            dump_bins: args.dump_bins,
            mode,
            corrupt_binned: args.corrupt_binned_for_testing,
        })
    }

    /// Bin density in effect; naive runs behave as a single bin.
    pub fn effective_density(&self) -> usize {
        match self.strategy {
            Strategy::Naive => 1,
            Strategy::Binned => self.bin_density,
        }
    }

    pub fn refine_params(&self) -> RefineParams {
        RefineParams {
            d_spec: self.d_spec,
            strategy: self.strategy,
            bin_density: self.effective_density(),
            bin_fraction: self.bin_fraction,
            binning: BinningOptions {
                overlap_factor: self.overlap_factor,
                ..BinningOptions::default()
            },
            n_levels: self.n_levels,
            backend: self.backend,
        }
    }
}

fn resolve_dim(args: &Args) -> Result<Dim, CliError> {
    let n = match args.dim {
        Some(n) => n,
        None => {
            if args.stl.is_some() {
                3
            } else if let Some(d) = &args.domain {
                d.len() / 2
            } else if let Some(r) = &args.root_dims {
                r.len()
            } else {
                2
            }
        }
    };
    Dim::from_n(n).ok_or_else(|| CliError::Config(format!("--dim must be 2 or 3, got {n}")))
}
