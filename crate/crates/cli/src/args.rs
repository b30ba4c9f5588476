use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "porous", version, about = "Porosity, dimension and cascade-measure experiments on dyadic trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Survivors of a set or cube masses of a measure.
    Construct(ConstructArgs),
    /// Porosity profiles at given or sampled points.
    Porosity(PorosityArgs),
    /// Fraction of porous scales at sampled points.
    MeanPorosity(MeanPorosityArgs),
    /// Packing dimension of a measure or box dimension of a set.
    Dimension(DimensionArgs),
    /// Max-collection certificate for a lower dimension bound.
    Certify(CertifyArgs),
    /// Constants and dimension bounds over a grid of alpha.
    Bound(BoundArgs),
    /// Sum inequality for the subcubes of one cube.
    Claim1(Claim1Args),
    /// Checks on the counterexample measure.
    #[command(subcommand)]
    Counterexample(CounterexampleCommand),
    /// Prints the report schema version.
    SchemaVersion,
}

#[derive(Subcommand, Debug)]
pub enum CounterexampleCommand {
    /// Set masses, weighted sums, eta chains and digit statistics.
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessArg {
    CornerAndChildCentres,
    Centre,
}

/// The object under study. At most one source; the default is the counterexample measure.
#[derive(Args, Debug, Clone, Serialize)]
pub struct ObjectArgs {
    /// Built-in measure: lebesgue, counterexample, bernoulli, comb, custom
    #[arg(long, group = "object")]
    pub measure: Option<String>,
    /// Built-in set: comb, example, digit-constraint, even-digits-zero, full
    #[arg(long, group = "object")]
    pub set: Option<String>,
    /// Measure spec file of `key = value` lines
    #[arg(long, group = "object")]
    pub measure_spec: Option<PathBuf>,
    /// Set spec file of `key = value` lines
    #[arg(long, group = "object")]
    pub set_spec: Option<PathBuf>,
    /// Extra spec entry, repeatable
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output file; stdout when absent
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub object: ObjectArgs,
    /// Depth in levels of the object's arity
    #[arg(long, default_value_t = 8)]
    pub depth: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Largest scale for the porous-scale count of an example set
    #[arg(long)]
    pub max_scale: Option<u64>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PointArgs {
    /// Explicit point in [0,1], repeatable
    #[arg(long = "x")]
    pub x: Vec<f64>,
    /// Number of sampled points when no --x is given
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Digits drawn per measure sample
    #[arg(long, default_value_t = 60)]
    pub sample_depth: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ProfileArgs {
    /// Number of scales `j = 1..=scales`
    #[arg(long, default_value_t = 20)]
    pub scales: usize,
    /// Offset `t` in `r_j = 2^{-kj+t}`
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub offset: i64,
    /// Scale step; defaults to the object's arity
    #[arg(long)]
    pub k: Option<u32>,
    /// Hole mass threshold for measures
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Guard bits below each radius
    #[arg(long, default_value_t = 8)]
    pub guard: u32,
    /// Fixed resolution depth in bits, overriding --guard
    #[arg(long)]
    pub resolution: Option<u32>,
}

#[derive(Args, Debug, Serialize)]
pub struct PorosityArgs {
    #[command(flatten)]
    pub object: ObjectArgs,
    #[command(flatten)]
    pub points: PointArgs,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Porosity level for the flag column
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    /// Compare flags with the analytic porous scales of an example set
    #[arg(long)]
    pub analytic_scales: bool,
    /// Required flag agreement with --analytic-scales
    #[arg(long, default_value_t = 0.95)]
    pub min_agreement: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct MeanPorosityArgs {
    #[command(flatten)]
    pub object: ObjectArgs,
    #[command(flatten)]
    pub points: PointArgs,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value_t = 0.4)]
    pub alpha: f64,
    /// Prefix lengths `i` at which fractions are reported
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 20])]
    pub depths: Vec<usize>,
    /// Required median fraction at the last depth
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct DimensionArgs {
    #[command(flatten)]
    pub object: ObjectArgs,
    /// Deepest level used
    #[arg(long, default_value_t = 24)]
    pub depth: usize,
    /// Shallowest level for set box counting; defaults to depth/2
    #[arg(long)]
    pub depth_lo: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.5)]
    pub quantile: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = porous_core::dimension::DEFAULT_WINDOW)]
    pub window: usize,
    /// Compare with the porosity dimension bound at this alpha
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Porous fraction for the bound
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Override of the doubling-type constant c
    #[arg(long)]
    pub c: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub object: ObjectArgs,
    /// Dimension to certify
    #[arg(long = "D")]
    pub big_d: f64,
    /// Constant exponent; defaults to D/2
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub i_min: usize,
    #[arg(long, default_value_t = 30)]
    pub depth: usize,
    /// Write the witness cubes to this CSV file
    #[arg(long)]
    #[serde(skip)]
    pub witness_csv: Option<PathBuf>,
    /// Exit 3 unless the verdict is this one
    #[arg(long, value_parser = ["certified", "refuted-at-depth", "inconclusive"])]
    pub expect: Option<String>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundArgs {
    /// Ambient dimension
    #[arg(long, default_value_t = 1)]
    pub d: u32,
    /// Single alpha, repeatable
    #[arg(long)]
    pub alpha: Vec<f64>,
    /// Evenly spaced alphas `lo:hi:count`, endpoints included
    #[arg(long)]
    pub alpha_grid: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Override of the doubling-type constant c
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct Claim1Args {
    #[command(flatten)]
    pub object: ObjectArgs,
    /// Porosity level; exclusive with --k
    #[arg(long, conflicts_with = "k")]
    pub alpha: Option<f64>,
    /// Use the alpha at which the scale step is exactly k
    #[arg(long)]
    pub k: Option<u32>,
    /// Dimension parameter; defaults to D0 + 0.01 at porous fraction --p
    #[arg(long = "D")]
    pub big_d: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Levels below the cube
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    /// Hole threshold; defaults to half of the admissible maximum
    #[arg(long)]
    pub eps: Option<f64>,
    /// Cube as `k:depth:d1.d2...`; defaults to the root
    #[arg(long)]
    pub cube: Option<String>,
    #[arg(long, default_value_t = 8)]
    pub guard: u32,
    #[arg(long, value_enum, default_value_t = WitnessArg::CornerAndChildCentres)]
    pub witness: WitnessArg,
    /// Also check the iterated sum over this many blocks
    #[arg(long)]
    pub blocks: Option<u32>,
    #[arg(long)]
    pub c: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    /// Binary depth of the weighted-sum checks
    #[arg(long, default_value_t = 24)]
    pub depth: usize,
    #[arg(long, default_value_t = 1)]
    pub l: u32,
    #[arg(long, default_value_t = 2)]
    pub m: u32,
    /// Logarithm base of the weights, or `e`
    #[arg(long, default_value = "e", value_parser = parse_log_base)]
    pub log_base: f64,
    /// Depth of the set-mass check
    #[arg(long, default_value_t = 40)]
    pub set_depth: usize,
    /// Required upper bound on the set mass
    #[arg(long, default_value_t = 0.01)]
    pub mass_bound: f64,
    /// Paths tested per chain length
    #[arg(long, default_value_t = 200)]
    pub chains: u64,
    /// Largest block index of the eta chains
    #[arg(long, default_value_t = 38)]
    pub chain_blocks: usize,
    #[arg(long, default_value_t = 9)]
    pub seed: u64,
    /// Digits per digit-statistics run; 0 skips the check
    #[arg(long, default_value_t = 100_000)]
    pub digit_run: usize,
    #[arg(long, default_value_t = 1)]
    pub digit_seeds: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

pub fn parse_log_base(s: &str) -> Result<f64, String> {
    if s == "e" {
        return Ok(std::f64::consts::E);
    }
    s.parse().map_err(|_| format!("log-base: cannot parse `{s}`"))
}
