//! Monte Carlo accuracy study: sample from a Gaussian-mixture truth,
//! discretize each sample with every method, solve the portfolio problem,
//! and summarize the relative error of the optimal share.
//!
//! Replication `m` at sample size `T` draws from its own ChaCha stream
//! `(T << 32) | m` under the configured seed, so every cell sharing `T`
//! sees the same samples and results do not depend on thread scheduling.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc_inv;

use crate::baselines::{gauss_hermite_discretize, maxent_discretize};
use crate::error::{Error, Result};
use crate::moments::GaussianMixture;
use crate::numfmt::sig12;
use crate::portfolio::{solve_portfolio, theoretical_portfolio, PortfolioProblem};
use crate::quadrature::{discretize_data_with, DiscreteDistribution, DEFAULT_MAX_NODES};

/// Discretization methods compared by the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Gaussian quadrature from sample moments.
    NpGq,
    /// Gauss–Hermite rule on a maximum-likelihood normal fit.
    GaussHermite,
    /// Maximum-entropy tilt of a kernel density on an even grid.
    NpMe,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::NpGq, Method::GaussHermite, Method::NpMe];

    pub fn label(self) -> &'static str {
        match self {
            Method::NpGq => "NP-GQ",
            Method::GaussHermite => "Gauss-Hermite",
            Method::NpMe => "NP-ME",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Method::NpGq => "np-gq",
            Method::GaussHermite => "gauss-hermite",
            Method::NpMe => "np-me",
        }
    }

    pub fn discretize(
        self,
        data: &[f64],
        n: usize,
        max_nodes: usize,
    ) -> Result<DiscreteDistribution<f64>> {
        match self {
            Method::NpGq => discretize_data_with(data, n, max_nodes),
            Method::GaussHermite => gauss_hermite_discretize(data, n),
            Method::NpMe => maxent_discretize(data, n)?.distribution(),
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.slug() == key || m.label().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Mixture of annual log excess returns used as the default truth.
pub fn reference_mixture() -> GaussianMixture<f64> {
    GaussianMixture::new(
        vec![0.1392, 0.8608],
        vec![-0.2242, 0.1064],
        vec![0.2164, 0.1453],
    )
    .expect("valid reference mixture")
}

/// Default gross risk-free rate.
pub const DEFAULT_RISK_FREE: f64 = 1.0045;
pub const DEFAULT_SEED: u64 = 20_190_417;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mixture: GaussianMixture<f64>,
    pub risk_free: f64,
    pub sample_sizes: Vec<usize>,
    pub node_counts: Vec<usize>,
    pub risk_aversions: Vec<f64>,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub seed: u64,
    /// Node cap handed to the moment-based discretizer.
    pub max_nodes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mixture: reference_mixture(),
            risk_free: DEFAULT_RISK_FREE,
            sample_sizes: vec![100, 1_000, 10_000],
            node_counts: vec![3, 5, 7, 9],
            risk_aversions: vec![2.0, 4.0, 6.0],
            methods: Method::ALL.to_vec(),
            replications: 1_000,
            seed: DEFAULT_SEED,
            max_nodes: DEFAULT_MAX_NODES,
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::invalid(format!("cannot parse `{s}` in `{key}`")))
        })
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::invalid(format!("cannot parse `{value}` for `{key}`")))
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Quick run with ten replications.
    pub fn smoke() -> Self {
        Self {
            replications: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&t| t < 2) {
            return Err(Error::invalid("sample sizes must be nonempty and >= 2"));
        }
        if self
            .sample_sizes
            .iter()
            .any(|&t| t as u64 > u32::MAX as u64)
        {
            return Err(Error::invalid("sample sizes must fit in 32 bits"));
        }
        if self.replications as u64 > u32::MAX as u64 {
            return Err(Error::invalid("replications must fit in 32 bits"));
        }
        if self.node_counts.is_empty() || self.node_counts.contains(&0) {
            return Err(Error::invalid("node counts must be nonempty and >= 1"));
        }
        if self.risk_aversions.is_empty()
            || self
                .risk_aversions
                .iter()
                .any(|&g| !(g > 0.0) || !g.is_finite())
        {
            return Err(Error::invalid(
                "risk aversions must be nonempty and positive",
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("at least one method is required"));
        }
        if !(self.risk_free > 0.0) || !self.risk_free.is_finite() {
            return Err(Error::invalid("risk-free rate must be positive"));
        }
        Ok(())
    }

    /// Parses the flat `key = value` format written by [`Self::to_kv_string`].
    /// Missing keys keep their defaults; `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let (mut p, mut mu, mut sigma) = (
            cfg.mixture.proportions().to_vec(),
            cfg.mixture.means().to_vec(),
            cfg.mixture.stds().to_vec(),
        );
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            match key {
                "seed" => cfg.seed = parse_one(key, value)?,
                "replications" => cfg.replications = parse_one(key, value)?,
                "risk_free" => cfg.risk_free = parse_one(key, value)?,
                "max_nodes" => cfg.max_nodes = parse_one(key, value)?,
                "sample_sizes" => cfg.sample_sizes = parse_list(key, value)?,
                "nodes" => cfg.node_counts = parse_list(key, value)?,
                "gammas" => cfg.risk_aversions = parse_list(key, value)?,
                "methods" => cfg.methods = parse_list(key, value)?,
                "mixture_p" => p = parse_list(key, value)?,
                "mixture_mu" => mu = parse_list(key, value)?,
                "mixture_sigma" => sigma = parse_list(key, value)?,
                other => {
                    return Err(Error::invalid(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.mixture = GaussianMixture::new(p, mu, sigma)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        let methods: Vec<&str> = self.methods.iter().map(|m| m.slug()).collect();
        format!(
            "seed = {}\nreplications = {}\nrisk_free = {}\nmax_nodes = {}\nsample_sizes = {}\nnodes = {}\ngammas = {}\nmethods = {}\nmixture_p = {}\nmixture_mu = {}\nmixture_sigma = {}\n",
            self.seed,
            self.replications,
            self.risk_free,
            self.max_nodes,
            join(&self.sample_sizes),
            join(&self.node_counts),
            join(&self.risk_aversions),
            methods.join(", "),
            join(self.mixture.proportions()),
            join(self.mixture.means()),
            join(self.mixture.stds()),
        )
    }
}

/// Generator for replication `replication` at sample size `sample_size`.
pub fn replication_rng(seed: u64, sample_size: usize, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((sample_size as u64) << 32) | replication as u64);
    rng
}

/// Standard normal quantile.
fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// `T` i.i.d. draws: a component picked with probability `p_j`, then an
/// inverse-CDF normal draw from it. Consumes exactly two uniforms per draw.
pub fn sample_mixture<R: Rng + ?Sized>(
    mix: &GaussianMixture<f64>,
    t: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut cumulative = Vec::with_capacity(mix.components());
    let mut acc = 0.0;
    for &p in mix.proportions() {
        acc += p;
        cumulative.push(acc);
    }
    let last = mix.components() - 1;
    (0..t)
        .map(|_| {
            let pick: f64 = rng.sample(Open01);
            let u: f64 = rng.sample(Open01);
            let j = cumulative.iter().position(|&c| pick < c).unwrap_or(last);
            mix.means()[j] + mix.stds()[j] * normal_quantile(u)
        })
        .collect()
}

/// One cell of the result grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub method: Method,
    pub sample_size: usize,
    pub nodes: usize,
    pub gamma: f64,
    /// Mean of `theta_hat / theta_star - 1` over successful replications.
    pub bias: f64,
    /// Mean of `|theta_hat / theta_star - 1|`.
    pub mae: f64,
    /// Replications where discretization or solving failed (excluded).
    pub failures: usize,
    pub replications: usize,
    /// Standard error of `bias` across replications.
    pub bias_std_error: f64,
    pub mae_std_error: f64,
}

impl CellResult {
    fn from_ratios(
        method: Method,
        sample_size: usize,
        nodes: usize,
        gamma: f64,
        ratios: &[Option<f64>],
    ) -> Self {
        let ok: Vec<f64> = ratios.iter().flatten().copied().collect();
        let count = ok.len() as f64;
        let mean = |xs: &mut dyn Iterator<Item = f64>| crate::scalar::compensated_sum(xs) / count;
        let bias = mean(&mut ok.iter().copied());
        let mae = mean(&mut ok.iter().map(|x| x.abs()));
        let se = |center: f64, f: &dyn Fn(f64) -> f64| {
            if ok.len() < 2 {
                return f64::NAN;
            }
            let ss = crate::scalar::compensated_sum(ok.iter().map(|&x| (f(x) - center).powi(2)));
            (ss / (count - 1.0)).sqrt() / count.sqrt()
        };
        Self {
            method,
            sample_size,
            nodes,
            gamma,
            bias,
            mae,
            failures: ratios.len() - ok.len(),
            replications: ratios.len(),
            bias_std_error: se(bias, &|x| x),
            mae_std_error: se(mae, &|x: f64| x.abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Reference optimum per risk aversion, in config order.
    pub theta_star: Vec<(f64, f64)>,
    pub cells: Vec<CellResult>,
}

pub const CSV_HEADER: &str = "method,T,N,gamma,bias,mae,failures";

impl ExperimentReport {
    pub fn cell(
        &self,
        method: Method,
        sample_size: usize,
        nodes: usize,
        gamma: f64,
    ) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.method == method
                && c.sample_size == sample_size
                && c.nodes == nodes
                && c.gamma == gamma
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.method.slug(),
                c.sample_size,
                c.nodes,
                sig12(c.gamma),
                sig12(c.bias),
                sig12(c.mae),
                c.failures
            );
        }
        out
    }

    /// Bias and MAE tables: rows `(T, N)`, column groups per method, one
    /// column per risk aversion.
    pub fn format_tables(&self) -> String {
        let cfg = &self.config;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "theta* (reference optimum, {} nodes):",
            crate::portfolio::TRUTH_NODES
        );
        for (g, t) in &self.theta_star {
            let _ = writeln!(out, "  gamma = {g}: {t:.6}");
        }
        for (title, pick) in [
            (
                "Relative bias of the optimal portfolio",
                (|c: &CellResult| c.bias) as fn(&CellResult) -> f64,
            ),
            (
                "Relative mean absolute error of the optimal portfolio",
                |c: &CellResult| c.mae,
            ),
        ] {
            let _ = writeln!(out, "\n{title}");
            let group_width = 8 * cfg.risk_aversions.len();
            let _ = write!(out, "{:>8}{:>4} ", "", "");
            for m in &cfg.methods {
                let _ = write!(out, "| {:<w$}", m.label(), w = group_width);
            }
            out.push('\n');
            let _ = write!(out, "{:>8}{:>4} ", "T", "N");
            for _ in &cfg.methods {
                out.push_str("| ");
                for g in &cfg.risk_aversions {
                    let _ = write!(out, "{:<8}", format!("g={g}"));
                }
            }
            out.push('\n');
            for &t in &cfg.sample_sizes {
                for &n in &cfg.node_counts {
                    let _ = write!(out, "{t:>8}{n:>4} ");
                    for &m in &cfg.methods {
                        out.push_str("| ");
                        for &g in &cfg.risk_aversions {
                            let v = self.cell(m, t, n, g).map(pick).unwrap_or(f64::NAN);
                            let _ = write!(out, "{:<8}", format!("{v:.3}"));
                        }
                    }
                    out.push('\n');
                }
            }
        }
        let failed: Vec<&CellResult> = self.cells.iter().filter(|c| c.failures > 0).collect();
        if !failed.is_empty() {
            let _ = writeln!(out, "\nExcluded replications:");
            for c in failed {
                let _ = writeln!(
                    out,
                    "  {} T={} N={} gamma={}: {} of {}",
                    c.method, c.sample_size, c.nodes, c.gamma, c.failures, c.replications
                );
            }
        }
        let _ = writeln!(
            out,
            "\nReplications: {}, seed: {}",
            cfg.replications, cfg.seed
        );
        out
    }
}

fn reference_optima(cfg: &ExperimentConfig, gammas: &[f64]) -> Result<Vec<f64>> {
    gammas
        .iter()
        .map(|&g| {
            let theta = theoretical_portfolio(&cfg.mixture, cfg.risk_free, g).map_err(|e| {
                Error::invalid(format!("reference optimum failed for gamma = {g}: {e}"))
            })?;
            if theta == 0.0 {
                return Err(Error::invalid(format!(
                    "reference optimum is zero for gamma = {g}"
                )));
            }
            Ok(theta)
        })
        .collect()
}

/// Relative errors per replication for each `(method, N)` and gamma, at
/// one sample size. Indexed `[replication][group][gamma]`.
fn simulate(
    cfg: &ExperimentConfig,
    sample_size: usize,
    groups: &[(Method, usize)],
    gammas: &[f64],
    theta_star: &[f64],
) -> Vec<Vec<Vec<Option<f64>>>> {
    let one = |m: usize| {
        let mut rng = replication_rng(cfg.seed, sample_size, m);
        let data = sample_mixture(&cfg.mixture, sample_size, &mut rng);
        groups
            .iter()
            .map(
                |&(method, n)| match method.discretize(&data, n, cfg.max_nodes) {
                    Ok(dist) => gammas
                        .iter()
                        .zip(theta_star)
                        .map(|(&g, &star)| {
                            let problem =
                                PortfolioProblem::new(dist.clone(), cfg.risk_free, g).ok()?;
                            let sol = solve_portfolio(&problem).ok()?;
                            (!sol.degenerate).then(|| sol.theta / star - 1.0)
                        })
                        .collect(),
                    Err(_) => vec![None; gammas.len()],
                },
            )
            .collect()
    };
    (0..cfg.replications).into_par_iter().map(one).collect()
}

/// Bias, MAE and failure count for one `(method, T, N, gamma)` cell.
pub fn run_cell(
    cfg: &ExperimentConfig,
    method: Method,
    sample_size: usize,
    nodes: usize,
    gamma: f64,
) -> Result<CellResult> {
    let single = ExperimentConfig {
        sample_sizes: vec![sample_size],
        node_counts: vec![nodes],
        risk_aversions: vec![gamma],
        methods: vec![method],
        ..cfg.clone()
    };
    single.validate()?;
    let star = reference_optima(&single, &[gamma])?;
    let runs = simulate(&single, sample_size, &[(method, nodes)], &[gamma], &star);
    let ratios: Vec<Option<f64>> = runs.iter().map(|r| r[0][0]).collect();
    Ok(CellResult::from_ratios(
        method,
        sample_size,
        nodes,
        gamma,
        &ratios,
    ))
}

/// Full grid. Failures inside a cell are counted, never fatal; only a
/// failing reference optimum aborts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let gammas = &cfg.risk_aversions;
    let theta_star = reference_optima(cfg, gammas)?;
    let groups: Vec<(Method, usize)> = cfg
        .methods
        .iter()
        .flat_map(|&m| cfg.node_counts.iter().map(move |&n| (m, n)))
        .collect();

    let mut cells = Vec::new();
    for &t in &cfg.sample_sizes {
        let runs = simulate(cfg, t, &groups, gammas, &theta_star);
        for (gi, &(method, n)) in groups.iter().enumerate() {
            for (k, &g) in gammas.iter().enumerate() {
                let ratios: Vec<Option<f64>> = runs.iter().map(|r| r[gi][k]).collect();
                cells.push(CellResult::from_ratios(method, t, n, g, &ratios));
            }
        }
    }
    cells.sort_by(|a, b| {
        (a.method, a.sample_size, a.nodes)
            .cmp(&(b.method, b.sample_size, b.nodes))
            .then(a.gamma.total_cmp(&b.gamma))
    });
    Ok(ExperimentReport {
        config: cfg.clone(),
        theta_star: gammas.iter().copied().zip(theta_star).collect(),
        cells,
    })
}

/// [`run_experiment`] on a dedicated pool of `jobs` threads.
pub fn run_experiment_with_jobs(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}
