use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use gbias_core::distributions::DistributionDescriptor;
use gbias_core::shape::ShapeVector;

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "gbias", version, about = "Meijer-G kernels, product laws and the gamma bias transformation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate G^{n,0}_{0,n}, G^{n,0}_{n,n} or the product-normal density.
    Eval(EvalArgs),
    /// Density or distribution function of a law.
    Density(DensityArgs),
    /// Draw a sample batch (CSV plus sidecar JSON).
    Sample(SampleArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Re-render saved verification reports.
    Report(ReportArgs),
}

/// Comma-separated list of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct List(pub Vec<f64>);

impl FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}

/// `lo:hi:count` (geometric) or a comma list.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [lo, hi, count] => {
                let lo: f64 = lo.trim().parse().map_err(|e| format!("grid start: {e}"))?;
                let hi: f64 = hi.trim().parse().map_err(|e| format!("grid end: {e}"))?;
                let count: usize = count.trim().parse().map_err(|e| format!("grid count: {e}"))?;
                if !(lo > 0.0 && hi > lo) || count < 2 {
                    return Err("geometric grid needs 0 < lo < hi and count >= 2".into());
                }
                let ratio = (hi / lo).ln() / (count - 1) as f64;
                Ok(Grid((0..count).map(|i| if i == count - 1 { hi } else { lo * (ratio * i as f64).exp() }).collect()))
            }
            [_] => s.parse::<List>().map(|l| Grid(l.0)),
            _ => Err("grid is lo:hi:count or a comma list".into()),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct PointArgs {
    /// Evaluation point(s), comma separated.
    #[arg(long, conflicts_with = "grid", allow_hyphen_values = true)]
    pub x: Option<List>,
    /// Evaluation grid: lo:hi:count (geometric) or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
}

impl PointArgs {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        match (&self.x, &self.grid) {
            (Some(x), _) => Ok(x.0.clone()),
            (None, Some(g)) => Ok(g.0.clone()),
            (None, None) => Err(CliError::Usage("give --x or --grid".into())),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("kernel").required(true).args(["g0n", "gnn", "pn"])))]
pub struct EvalArgs {
    /// G^{n,0}_{0,n}(x | a).
    #[arg(long)]
    pub g0n: bool,
    /// G^{n,0}_{n,n}(x | r; r-1), the V_n kernel.
    #[arg(long)]
    pub gnn: bool,
    /// Product-normal density of order n.
    #[arg(long)]
    pub pn: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<List>,
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<List>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Relative tolerance of the contour quadrature.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub points: PointArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    Pg,
    Vn,
    Pn,
    Gamma,
    Beta,
    PointMass,
    Empirical,
}

#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("law").required(true).args(["pg", "vn", "pn", "gamma", "beta", "point_mass", "empirical", "gbias"])))]
pub struct LawArgs {
    /// Product of Gamma(r_k, 1).
    #[arg(long)]
    pub pg: bool,
    /// Product of Beta(r_k, 1).
    #[arg(long)]
    pub vn: bool,
    /// Product of n standard normals.
    #[arg(long)]
    pub pn: bool,
    /// Gamma(shape, 1).
    #[arg(long)]
    pub gamma: bool,
    /// Beta(shape, 1).
    #[arg(long)]
    pub beta: bool,
    #[arg(long)]
    pub point_mass: bool,
    #[arg(long)]
    pub empirical: bool,
    /// Gamma bias of order n of the law given by --w.
    #[arg(long)]
    pub gbias: bool,
    /// Base law of --gbias.
    #[arg(long, value_enum)]
    pub w: Option<BaseKind>,
    /// Shape vector (for --gbias: the r of the transformation).
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<List>,
    /// Shapes of a pg/vn base law of --gbias, when they differ from --r.
    #[arg(long, allow_hyphen_values = true)]
    pub base_r: Option<List>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub shape: Option<f64>,
    #[arg(long)]
    pub value: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub values: Option<List>,
    #[arg(long, allow_hyphen_values = true)]
    pub weights: Option<List>,
}

fn shapes(r: &Option<List>, what: &str) -> Result<ShapeVector, CliError> {
    let r = r.as_ref().ok_or_else(|| CliError::Usage(format!("{what} needs --r")))?;
    Ok(ShapeVector::new(r.0.clone())?)
}

impl LawArgs {
    fn base(&self, kind: BaseKind, base_shapes: &Option<List>) -> Result<DistributionDescriptor, CliError> {
        use DistributionDescriptor as D;
        let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::Usage(format!("this law needs --{flag}")));
        let d = match kind {
            BaseKind::Pg => D::ProductGamma { shapes: shapes(base_shapes, "pg")? },
            BaseKind::Vn => D::ProductBetaVn { shapes: shapes(base_shapes, "vn")? },
            BaseKind::Pn => D::ProductNormal { n: self.n.ok_or_else(|| CliError::Usage("pn needs --n".into()))? },
            BaseKind::Gamma => D::Gamma { shape: need(self.shape, "shape")? },
            BaseKind::Beta => D::BetaR1 { shape: need(self.shape, "shape")? },
            BaseKind::PointMass => D::PointMass { value: need(self.value, "value")? },
            BaseKind::Empirical => D::Empirical {
                values: self.values.clone().ok_or_else(|| CliError::Usage("empirical needs --values".into()))?.0,
                weights: self.weights.clone().map(|w| w.0),
            },
        };
        d.validate()?;
        Ok(d)
    }

    pub fn descriptor(&self) -> Result<DistributionDescriptor, CliError> {
        let kind = if self.pg {
            BaseKind::Pg
        } else if self.vn {
            BaseKind::Vn
        } else if self.pn {
            BaseKind::Pn
        } else if self.gamma {
            BaseKind::Gamma
        } else if self.beta {
            BaseKind::Beta
        } else if self.point_mass {
            BaseKind::PointMass
        } else if self.empirical {
            BaseKind::Empirical
        } else {
            let w = self.w.ok_or_else(|| CliError::Usage("--gbias needs --w <base law>".into()))?;
            let base = self.base(w, if self.base_r.is_some() { &self.base_r } else { &self.r })?;
            let d = DistributionDescriptor::GammaBias { base: Box::new(base), shapes: shapes(&self.r, "gbias")? };
            d.validate()?;
            return Ok(d);
        };
        self.base(kind, &self.r)
    }
}

#[derive(Args, Debug)]
pub struct DensityArgs {
    #[command(flatten)]
    pub law: LawArgs,
    /// Distribution function instead of density.
    #[arg(long)]
    pub cdf: bool,
    #[command(flatten)]
    pub points: PointArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub law: LawArgs,
    /// Number of draws.
    #[arg(long = "N", default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = gbias_core::verifier::DEFAULT_SEED)]
    pub seed: u64,
    /// CSV destination; the sidecar goes next to it with extension .json.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Explicit sidecar path.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// theorem-general, theorem-distinct, theorem-equal, kernel, operators,
    /// stein, fixed-point, vn, wgn, product-normal or all.
    #[arg(long)]
    pub suite: String,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<List>,
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<List>,
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub points: PointArgs,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Monte Carlo sample size.
    #[arg(long = "N")]
    pub count: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = gbias_core::verifier::DEFAULT_SEED)]
    pub seed: u64,
    /// Number of random functions in the operator suite.
    #[arg(long)]
    pub functions: Option<usize>,
    /// Largest moment in the Stein suite.
    #[arg(long)]
    pub max_m: Option<usize>,
    /// Base law of the wgn suite (its parameters via --shape, --value, --values, --base-r).
    #[arg(long, value_enum)]
    pub w: Option<BaseKind>,
    #[arg(long)]
    pub shape: Option<f64>,
    #[arg(long)]
    pub value: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub values: Option<List>,
    #[arg(long, allow_hyphen_values = true)]
    pub base_r: Option<List>,
    /// Relative tolerance of right-hand-side quadratures.
    #[arg(long)]
    pub quad_rel: Option<f64>,
    /// Record wall-clock runtime in the reports.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

impl VerifyArgs {
    pub fn base(&self) -> Result<Option<DistributionDescriptor>, CliError> {
        let Some(kind) = self.w else { return Ok(None) };
        let law = LawArgs {
            pg: false,
            vn: false,
            pn: false,
            gamma: false,
            beta: false,
            point_mass: false,
            empirical: false,
            gbias: false,
            w: None,
            r: self.r.clone(),
            base_r: None,
            n: self.n,
            shape: self.shape,
            value: self.value,
            values: self.values.clone(),
            weights: None,
        };
        let base_shapes = if self.base_r.is_some() { &self.base_r } else { &self.r };
        law.base(kind, base_shapes).map(Some)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Summary,
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// JSON written by `verify`.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "summary")]
    pub format: ReportFormat,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_grids() {
        assert_eq!("1, 2.5,3".parse::<List>().unwrap(), List(vec![1.0, 2.5, 3.0]));
        assert!("1,x".parse::<List>().is_err());
        let g: Grid = "0.1:10:3".parse().unwrap();
        assert_eq!(g.0.len(), 3);
        assert!((g.0[1] - 1.0).abs() < 1e-15);
        assert_eq!(g.0[2], 10.0);
        assert_eq!("0.5,1".parse::<Grid>().unwrap(), Grid(vec![0.5, 1.0]));
        assert!("1:0.5:3".parse::<Grid>().is_err());
    }
}
