//! Empirical pipeline: gross returns to log excess returns, discretization,
//! and the comparison of optimal portfolios under the nonparametric and
//! Gaussian discretizations.

use crate::baselines::{fit_gaussian_mle, gauss_hermite_discretize, KernelDensity};
use crate::error::{Error, Result};
use crate::experiments::Method;
use crate::moments::mean_and_std;
use crate::portfolio::{solve_portfolio, PortfolioProblem};
use crate::quadrature::{DiscreteDistribution, DEFAULT_MAX_NODES};
use crate::scalar::compensated_sum;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Points on the curve grid of [`plot_data`].
pub const CURVE_POINTS: usize = 512;

/// Per-period gross returns. Without an inflation column the returns are
/// taken to be real already.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsDataset {
    stock: Vec<f64>,
    risk_free: Vec<f64>,
    inflation: Option<Vec<f64>>,
}

fn check_positive(name: &str, xs: &[f64]) -> Result<()> {
    match xs.iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
        Some(i) => Err(Error::invalid(format!(
            "{name} must be positive and finite (row {} is {})",
            i + 1,
            xs[i]
        ))),
        None => Ok(()),
    }
}

impl ReturnsDataset {
    pub fn new(stock: Vec<f64>, risk_free: Vec<f64>, inflation: Option<Vec<f64>>) -> Result<Self> {
        if stock.is_empty() {
            return Err(Error::invalid("returns dataset is empty"));
        }
        if risk_free.len() != stock.len()
            || inflation.as_ref().is_some_and(|v| v.len() != stock.len())
        {
            return Err(Error::invalid("return columns have different lengths"));
        }
        check_positive("stock returns", &stock)?;
        check_positive("risk-free returns", &risk_free)?;
        if let Some(infl) = &inflation {
            check_positive("inflation", infl)?;
        }
        Ok(Self {
            stock,
            risk_free,
            inflation,
        })
    }

    /// Builds a dataset from net rates (`0.05` for five percent).
    pub fn from_net(stock: &[f64], risk_free: &[f64], inflation: Option<&[f64]>) -> Result<Self> {
        let gross = |xs: &[f64]| xs.iter().map(|x| 1.0 + x).collect::<Vec<_>>();
        Self::new(gross(stock), gross(risk_free), inflation.map(gross))
    }

    pub fn len(&self) -> usize {
        self.stock.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stock.is_empty()
    }

    fn deflate(&self, xs: &[f64]) -> Vec<f64> {
        match &self.inflation {
            Some(infl) => xs.iter().zip(infl).map(|(x, p)| x / p).collect(),
            None => xs.to_vec(),
        }
    }

    pub fn real_stock(&self) -> Vec<f64> {
        self.deflate(&self.stock)
    }

    pub fn real_risk_free(&self) -> Vec<f64> {
        self.deflate(&self.risk_free)
    }

    /// `exp` of the average real log risk-free return.
    pub fn calibrated_risk_free(&self) -> f64 {
        let logs = self.real_risk_free();
        (compensated_sum(logs.iter().map(|r| r.ln())) / logs.len() as f64).exp()
    }

    /// `log R_t - log R_f` with the calibrated scalar `R_f`.
    pub fn log_excess_returns(&self) -> Vec<f64> {
        let log_rf = self.calibrated_risk_free().ln();
        self.real_stock().iter().map(|r| r.ln() - log_rf).collect()
    }
}

/// Outcome for one risk aversion.
#[derive(Debug, Clone, PartialEq)]
pub enum ComparisonRow {
    Solved {
        gamma: f64,
        theta_np: f64,
        theta_gaussian: f64,
    },
    /// The excess return is identically zero: both shares are 0.
    Degenerate {
        gamma: f64,
    },
    Failed {
        gamma: f64,
        reason: String,
    },
}

impl ComparisonRow {
    pub fn gamma(&self) -> f64 {
        match self {
            ComparisonRow::Solved { gamma, .. }
            | ComparisonRow::Degenerate { gamma }
            | ComparisonRow::Failed { gamma, .. } => *gamma,
        }
    }

    /// `theta_gaussian / theta_np - 1`, the Gaussian investor's overweight.
    pub fn error(&self) -> Option<f64> {
        match self {
            ComparisonRow::Solved {
                theta_np,
                theta_gaussian,
                ..
            } => Some(theta_gaussian / theta_np - 1.0),
            _ => None,
        }
    }
}

fn discretize_or_point_mass(
    method: Method,
    x: &[f64],
    n: usize,
) -> Result<DiscreteDistribution<f64>> {
    match method.discretize(x, n, DEFAULT_MAX_NODES.max(n)) {
        Err(Error::DegenerateData(_)) => {
            let (mean, _) = mean_and_std(x)?;
            DiscreteDistribution::point_mass(mean)
        }
        other => other,
    }
}

fn solve_share(
    dist: &DiscreteDistribution<f64>,
    risk_free: f64,
    gamma: f64,
) -> Result<(f64, bool)> {
    let sol = solve_portfolio(&PortfolioProblem::new(dist.clone(), risk_free, gamma)?)?;
    Ok((sol.theta, sol.degenerate))
}

/// Optimal shares under `method` and under an `n`-point Gauss–Hermite rule
/// on the fitted normal, for each risk aversion. Discretization errors are
/// fatal; solver errors are recorded per row.
pub fn compare_portfolios(
    data: &ReturnsDataset,
    gammas: &[f64],
    n: usize,
    method: Method,
) -> Result<Vec<ComparisonRow>> {
    let x = data.log_excess_returns();
    let rf = data.calibrated_risk_free();
    let np = discretize_or_point_mass(method, &x, n)?;
    let gaussian = match gauss_hermite_discretize(&x, n) {
        Err(Error::DegenerateData(_)) => np.clone(),
        other => other?,
    };
    let rows = gammas
        .iter()
        .map(|&gamma| {
            let shares = solve_share(&np, rf, gamma)
                .and_then(|a| Ok((a, solve_share(&gaussian, rf, gamma)?)));
            match shares {
                Ok(((_, true), (_, true))) => ComparisonRow::Degenerate { gamma },
                Ok(((theta_np, _), (theta_gaussian, _))) => ComparisonRow::Solved {
                    gamma,
                    theta_np,
                    theta_gaussian,
                },
                Err(e) => ComparisonRow::Failed {
                    gamma,
                    reason: e.to_string(),
                },
            }
        })
        .collect();
    Ok(rows)
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i + 1 == count {
                        hi
                    } else {
                        lo + step * i as f64
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    /// Densities: counts divided by `T` times the bin width.
    pub heights: Vec<f64>,
}

/// Density-normalized histogram over the data range; the last bin is closed.
pub fn histogram(data: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if data.is_empty() || data.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("histogram needs finite, nonempty data"));
    }
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(Error::DegenerateData("all observations are equal".into()));
    }
    let edges = linspace(lo, hi, bins + 1);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in data {
        let mut k = (((x - lo) / width) as usize).min(bins - 1);
        // Floating-point division can land one bin off near an edge.
        while k > 0 && x < edges[k] {
            k -= 1;
        }
        while k + 1 < bins && x >= edges[k + 1] {
            k += 1;
        }
        counts[k] += 1;
    }
    let total = data.len() as f64;
    let heights = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (total * (e[1] - e[0])))
        .collect();
    Ok(Histogram { edges, heights })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub histogram: Histogram,
    pub bandwidth: f64,
    pub gaussian_mean: f64,
    pub gaussian_std: f64,
    pub grid: Vec<f64>,
    pub kde: Vec<f64>,
    pub gaussian: Vec<f64>,
}

/// Histogram, Silverman kernel density and fitted normal density, the
/// curves sampled on [`CURVE_POINTS`] points over the data range widened by
/// three bandwidths on each side.
pub fn plot_data(data: &[f64], bins: usize) -> Result<PlotData> {
    let histogram = histogram(data, bins)?;
    let kde = KernelDensity::silverman(data.to_vec())?;
    let (mean, std) = fit_gaussian_mle(data)?;
    let h = kde.bandwidth();
    let lo = histogram.edges[0] - 3.0 * h;
    let hi = histogram.edges[bins] + 3.0 * h;
    let grid = linspace(lo, hi, CURVE_POINTS);
    let normal = |x: f64| {
        let z = (x - mean) / std;
        FRAC_1_SQRT_2PI / std * (-0.5 * z * z).exp()
    };
    Ok(PlotData {
        kde: grid.iter().map(|&x| kde.pdf(x)).collect(),
        gaussian: grid.iter().map(|&x| normal(x)).collect(),
        histogram,
        bandwidth: h,
        gaussian_mean: mean,
        gaussian_std: std,
        grid,
    })
}
