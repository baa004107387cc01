//! Competitor discretizers: Gauss–Hermite on a maximum-likelihood Gaussian
//! fit, and maximum-entropy moment matching on an even grid with a kernel
//! density prior.

use crate::error::{Error, Result};
use crate::moments::{
    gaussian_moments, mean_and_std, sample_moments, standardize, AffineTransform,
};
use crate::quadrature::{cholesky, golub_welsch, DiscreteDistribution};
use crate::scalar::compensated_sum;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Mean and population standard deviation (the Gaussian MLE).
pub fn fit_gaussian_mle(data: &[f64]) -> Result<(f64, f64)> {
    let (affine, _) = standardize(data)?;
    Ok((affine.shift(), affine.scale()))
}

/// `N`-point Gauss–Hermite rule for `N(mean, std^2)` fitted to the data.
pub fn gauss_hermite_discretize(data: &[f64], n: usize) -> Result<DiscreteDistribution<f64>> {
    let (mean, std) = fit_gaussian_mle(data)?;
    gauss_hermite_rule(mean, std, n)
}

/// Golub–Welsch on standard-normal moments, scaled to `N(mean, std^2)`.
pub fn gauss_hermite_rule(mean: f64, std: f64, n: usize) -> Result<DiscreteDistribution<f64>> {
    let affine = AffineTransform::new(mean, std)?;
    let rule = golub_welsch(&gaussian_moments(0.0, 1.0, 2 * n)?, n)?;
    rule.mapped(&affine)
}

/// Gaussian kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDensity {
    data: Vec<f64>,
    bandwidth: f64,
}

impl KernelDensity {
    pub fn new(data: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if data.is_empty() || data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("kernel density needs finite, nonempty data"));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid("bandwidth must be positive"));
        }
        Ok(Self { data, bandwidth })
    }

    /// Bandwidth from [`silverman_bandwidth`].
    pub fn silverman(data: Vec<f64>) -> Result<Self> {
        let h = silverman_bandwidth(&data)?;
        Self::new(data, h)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `(1 / (I h)) sum_i phi((x - x_i) / h)`.
    pub fn pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let total = compensated_sum(self.data.iter().map(|&xi| {
            let u = (x - xi) / h;
            (-0.5 * u * u).exp()
        }));
        FRAC_1_SQRT_2PI * total / (self.data.len() as f64 * h)
    }
}

pub fn kde_pdf(kd: &KernelDensity, x: f64) -> f64 {
    kd.pdf(x)
}

/// Silverman's rule of thumb, `1.06 * std * I^(-1/5)`.
pub fn silverman_bandwidth(data: &[f64]) -> Result<f64> {
    let (_, std) = mean_and_std(data)?;
    if !(std > 0.0) {
        return Err(Error::DegenerateData("zero standard deviation".into()));
    }
    Ok(1.06 * std * (data.len() as f64).powf(-0.2))
}

/// Half-width of the maximum-entropy grid in standard deviations.
fn grid_half_width(n: usize) -> f64 {
    (2.0 * (n as f64 - 1.0)).sqrt()
}

fn even_grid(center: f64, half: f64, n: usize) -> Vec<f64> {
    let step = 2.0 * half / (n as f64 - 1.0);
    (0..n).map(|i| center - half + step * i as f64).collect()
}

/// `N` even-spaced points centered at the sample mean spanning
/// `sqrt(2(N-1))` sample standard deviations on each side.
pub fn maxent_grid(data: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid("maximum-entropy grid needs N >= 2"));
    }
    let (mean, std) = fit_gaussian_mle(data)?;
    Ok(even_grid(mean, grid_half_width(n) * std, n))
}

/// Newton iteration cap for the dual problem.
pub const MAXENT_MAX_ITERATIONS: usize = 200;
/// Convergence threshold on the dual gradient (the moment residual).
pub const MAXENT_GRADIENT_TOL: f64 = 1e-10;
/// A dual vector this large means the targets sit on or outside the
/// boundary of what the grid can represent.
const MAXENT_DIVERGENCE: f64 = 1e8;

/// Exponential tilting of a prior on fixed nodes so that the tilted
/// expectations of `T(x) = (x, x^2, ..., x^L)` equal given targets.
///
/// The dual objective is `log sum_n q_n exp(lambda' (T(x_n) - T_bar))`; its
/// gradient is the moment residual of the tilted weights and its Hessian
/// their covariance matrix of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntProblem {
    prior: Vec<f64>,
    /// `T(x_n) - T_bar` per node.
    features: Vec<Vec<f64>>,
}

impl MaxEntProblem {
    pub fn new(nodes: &[f64], prior: &[f64], targets: &[f64]) -> Result<Self> {
        if nodes.len() != prior.len() || nodes.is_empty() {
            return Err(Error::invalid("nodes and prior differ in length"));
        }
        if prior.iter().any(|&q| !(q > 0.0)) {
            return Err(Error::invalid("prior weights must be positive"));
        }
        if targets.is_empty() {
            return Err(Error::invalid("need at least one moment target"));
        }
        let mass: f64 = compensated_sum(prior.iter().copied());
        let prior = prior.iter().map(|q| q / mass).collect();
        let features = nodes
            .iter()
            .map(|&x| {
                let mut power = 1.0;
                targets
                    .iter()
                    .map(|t| {
                        power *= x;
                        power - t
                    })
                    .collect()
            })
            .collect();
        Ok(Self { prior, features })
    }

    pub fn moments_matched(&self) -> usize {
        self.features[0].len()
    }

    fn exponents(&self, lambda: &[f64]) -> Vec<f64> {
        self.features
            .iter()
            .zip(&self.prior)
            .map(|(f, q)| q.ln() + f.iter().zip(lambda).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// Dual objective at `lambda`.
    pub fn dual(&self, lambda: &[f64]) -> f64 {
        let e = self.exponents(lambda);
        let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + compensated_sum(e.iter().map(|x| (x - top).exp())).ln()
    }

    /// Normalized tilted weights.
    pub fn weights(&self, lambda: &[f64]) -> Vec<f64> {
        let e = self.exponents(lambda);
        let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = e.iter().map(|x| (x - top).exp()).collect();
        let total = compensated_sum(raw.iter().copied());
        raw.into_iter().map(|w| w / total).collect()
    }

    /// Gradient of the dual: tilted expectation of `T(x) - T_bar`.
    pub fn gradient(&self, lambda: &[f64]) -> Vec<f64> {
        let w = self.weights(lambda);
        (0..self.moments_matched())
            .map(|l| compensated_sum(self.features.iter().zip(&w).map(|(f, wn)| wn * f[l])))
            .collect()
    }

    pub fn hessian(&self, lambda: &[f64]) -> Vec<Vec<f64>> {
        let w = self.weights(lambda);
        let g = self.gradient(lambda);
        let dim = self.moments_matched();
        (0..dim)
            .map(|a| {
                (0..dim)
                    .map(|b| {
                        compensated_sum(
                            self.features.iter().zip(&w).map(|(f, wn)| wn * f[a] * f[b]),
                        ) - g[a] * g[b]
                    })
                    .collect()
            })
            .collect()
    }

    /// Damped Newton with Armijo backtracking, starting from `lambda = 0`.
    /// Returns the dual optimum and the number of Newton steps taken.
    pub fn solve(&self) -> Result<(Vec<f64>, usize)> {
        let dim = self.moments_matched();
        let mut lambda = vec![0.0; dim];
        let mut value = self.dual(&lambda);
        for iter in 0..MAXENT_MAX_ITERATIONS {
            let g = self.gradient(&lambda);
            let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if gnorm <= MAXENT_GRADIENT_TOL {
                return Ok((lambda, iter));
            }
            let h = self.hessian(&lambda);
            let step = match solve_spd(&h, &g) {
                Some(s) => s,
                None => {
                    return Err(Error::Infeasible(
                        "tilted weights collapsed onto too few nodes".into(),
                    ))
                }
            };
            let slope: f64 = -g.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>();
            // Once the predicted decrease is below the rounding level of the
            // dual, Armijo cannot tell steps apart; take full Newton steps.
            if -slope <= 1e3 * f64::EPSILON * (1.0 + value.abs()) {
                lambda = lambda.iter().zip(&step).map(|(l, s)| l - s).collect();
                value = self.dual(&lambda);
                continue;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = lambda.iter().zip(&step).map(|(l, s)| l - t * s).collect();
                let trial_value = self.dual(&trial);
                if trial_value <= value + 1e-4 * t * slope {
                    lambda = trial;
                    value = trial_value;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if lambda
                .iter()
                .any(|l| !l.is_finite() || l.abs() > MAXENT_DIVERGENCE)
            {
                return Err(Error::Infeasible("dual vector diverged".into()));
            }
            if !accepted {
                // No descent possible at working precision.
                let g = self.gradient(&lambda);
                let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                if gnorm <= 1e3 * MAXENT_GRADIENT_TOL {
                    return Ok((lambda, iter + 1));
                }
                return Err(Error::Infeasible("line search stalled".into()));
            }
        }
        if lambda.iter().map(|l| l.abs()).fold(0.0, f64::max) > 1e3 {
            return Err(Error::Infeasible("dual vector diverged".into()));
        }
        Err(Error::NoConvergence {
            what: "maximum-entropy Newton iteration",
            iterations: MAXENT_MAX_ITERATIONS,
        })
    }
}

/// Solves `H x = g` for symmetric positive definite `H`.
fn solve_spd(h: &[Vec<f64>], g: &[f64]) -> Option<Vec<f64>> {
    let r = cholesky(h).ok()?;
    let n = g.len();
    // R'y = g, then R x = y.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| r.get(k, i) * y[k]).sum();
        y[i] = (g[i] - s) / r.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| r.get(i, k) * x[k]).sum();
        x[i] = (y[i] - s) / r.get(i, i);
    }
    Some(x)
}

/// Result of [`maxent_discretize`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntSolution {
    /// Grid in data units.
    pub grid: Vec<f64>,
    /// Normalized kernel-density prior on the grid.
    pub prior: Vec<f64>,
    /// Dual vector (standardized units).
    pub lambda: Vec<f64>,
    pub weights: Vec<f64>,
    /// Number of sample moments matched (4 or 2).
    pub moments_matched: usize,
    /// True when four moments were requested but infeasible on the grid.
    pub downgraded: bool,
    pub iterations: usize,
}

impl MaxEntSolution {
    pub fn distribution(&self) -> Result<DiscreteDistribution<f64>> {
        DiscreteDistribution::new(self.grid.clone(), self.weights.clone())
    }
}

/// Maximum-entropy discretization on [`maxent_grid`] with a Gaussian-kernel
/// prior. Four sample moments are matched when `N >= 5` (falling back to two
/// if four are infeasible on the grid), otherwise two.
pub fn maxent_discretize(data: &[f64], n: usize) -> Result<MaxEntSolution> {
    if n < 2 {
        return Err(Error::invalid(
            "maximum-entropy discretization needs N >= 2",
        ));
    }
    let (affine, z) = standardize(data)?;
    let grid_z = even_grid(0.0, grid_half_width(n), n);
    let kde = KernelDensity::silverman(z.clone())?;
    let prior: Vec<f64> = grid_z.iter().map(|&x| kde.pdf(x)).collect();
    if prior.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::Infeasible(
            "kernel density prior vanishes on the grid".into(),
        ));
    }
    let targets = sample_moments(&z, 4)?;

    let attempt = |moments: usize| -> Result<(MaxEntProblem, Vec<f64>, usize)> {
        let problem = MaxEntProblem::new(&grid_z, &prior, &targets.values()[1..=moments])?;
        let (lambda, iterations) = problem.solve()?;
        Ok((problem, lambda, iterations))
    };

    let wanted = if n >= 5 { 4 } else { 2 };
    let (problem, lambda, iterations, downgraded) = match attempt(wanted) {
        Ok((p, l, i)) => (p, l, i, false),
        Err(Error::Infeasible(_)) if wanted == 4 => {
            let (p, l, i) = attempt(2)?;
            (p, l, i, true)
        }
        Err(e) => return Err(e),
    };
    let weights = problem.weights(&lambda);
    let mass = compensated_sum(prior.iter().copied());
    Ok(MaxEntSolution {
        grid: grid_z.iter().map(|&x| affine.apply(x)).collect(),
        prior: prior.iter().map(|q| q / mass).collect(),
        lambda,
        weights,
        moments_matched: problem.moments_matched(),
        downgraded,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric_data() -> Vec<f64> {
        // Symmetric, standardized-friendly sample.
        let half: Vec<f64> = (1..=200).map(|i| (i as f64 / 60.0).powf(1.3)).collect();
        half.iter()
            .map(|x| -x)
            .chain(half.iter().copied())
            .collect()
    }

    #[test]
    fn mle_examples() {
        assert_eq!(fit_gaussian_mle(&[-1.0, 1.0]).unwrap(), (0.0, 1.0));
        let (m, s) = fit_gaussian_mle(&[0.0, 0.0, 0.0, 4.0]).unwrap();
        assert_eq!(m, 1.0);
        assert!((s - 3f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            fit_gaussian_mle(&[2.0; 4]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn gauss_hermite_examples() {
        let data = symmetric_data();
        let (mean, std) = fit_gaussian_mle(&data).unwrap();
        let z: Vec<f64> = data.iter().map(|x| (x - mean) / std).collect();
        let d = gauss_hermite_discretize(&z, 3).unwrap();
        let s3 = 3f64.sqrt();
        for (g, w) in d.nodes().iter().zip([-s3, 0.0, s3]) {
            assert!((g - w).abs() < 1e-10);
        }
        for (g, w) in d.weights().iter().zip([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]) {
            assert!((g - w).abs() < 1e-12);
        }

        let data = [0.5, 1.0, 4.0, 2.5];
        let (mean, std) = fit_gaussian_mle(&data).unwrap();
        let d1 = gauss_hermite_discretize(&data, 1).unwrap();
        assert!((d1.nodes()[0] - mean).abs() < 1e-14 && d1.weights() == [1.0]);
        let d2 = gauss_hermite_discretize(&data, 2).unwrap();
        assert!((d2.nodes()[0] - (mean - std)).abs() < 1e-12);
        assert!((d2.nodes()[1] - (mean + std)).abs() < 1e-12);
        assert!((d2.weights()[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gauss_hermite_symmetric_for_all_orders() {
        for n in 1..=9 {
            let d = gauss_hermite_rule(0.3, 2.0, n).unwrap();
            for i in 0..n {
                let j = n - 1 - i;
                assert!(
                    ((d.nodes()[i] - 0.3) + (d.nodes()[j] - 0.3)).abs() < 1e-12,
                    "n={n}"
                );
                assert!((d.weights()[i] - d.weights()[j]).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn kde_examples() {
        let kd = KernelDensity::new(vec![0.0], 1.0).unwrap();
        assert!((kd.pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);

        let kd = KernelDensity::new(vec![-2.0, -0.5, 0.5, 2.0], 0.7).unwrap();
        for x in [0.1, 0.9, 3.3] {
            assert!((kd.pdf(x) - kd.pdf(-x)).abs() < 1e-15);
        }

        let kd = KernelDensity::new(vec![0.0, 1.0, 1.5], 0.5).unwrap();
        let x = 9.0;
        let nearest = 7.5f64;
        let bound = FRAC_1_SQRT_2PI * (-0.5f64 * (nearest / 0.5).powi(2)).exp() / 0.5;
        assert!(kd.pdf(x) <= bound);

        assert!(KernelDensity::new(vec![0.0], 0.0).is_err());
        assert!(KernelDensity::new(vec![], 1.0).is_err());
    }

    #[test]
    fn kde_integrates_to_one() {
        let kd = KernelDensity::silverman(symmetric_data()).unwrap();
        let (lo, hi) = (-30.0, 30.0);
        let steps = 60_000;
        let h = (hi - lo) / steps as f64;
        let total: f64 = (0..steps)
            .map(|i| kd.pdf(lo + (i as f64 + 0.5) * h) * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn grid_examples() {
        let data = [-1.0, 1.0];
        let g = maxent_grid(&data, 5).unwrap();
        let edge = 2.0 * 2f64.sqrt();
        assert!((g[0] + edge).abs() < 1e-15 && (g[4] - edge).abs() < 1e-15);
        for w in g.windows(2) {
            assert!((w[1] - w[0] - edge / 2.0).abs() < 1e-14);
        }
        let data = [1.0, 2.0, 6.0];
        let (m, s) = fit_gaussian_mle(&data).unwrap();
        let g = maxent_grid(&data, 2).unwrap();
        assert!((g[0] - (m - 2f64.sqrt() * s)).abs() < 1e-14);
        assert!((g[1] - (m + 2f64.sqrt() * s)).abs() < 1e-14);
        assert!((maxent_grid(&data, 3).unwrap()[1] - m).abs() < 1e-14);
        assert!(maxent_grid(&data, 1).is_err());
    }

    #[test]
    fn maxent_symmetric_two_moments() {
        let data = symmetric_data();
        let sol = maxent_discretize(&data, 3).unwrap();
        assert_eq!(sol.moments_matched, 2);
        let (mean, std) = fit_gaussian_mle(&data).unwrap();
        let z: Vec<f64> = sol.grid.iter().map(|x| (x - mean) / std).collect();
        let m1: f64 = z.iter().zip(&sol.weights).map(|(x, w)| w * x).sum();
        let m2: f64 = z.iter().zip(&sol.weights).map(|(x, w)| w * x * x).sum();
        assert!(m1.abs() < 1e-8 && (m2 - 1.0).abs() < 1e-8);
        assert!((sol.weights[0] - sol.weights[2]).abs() < 1e-10);
    }

    #[test]
    fn maxent_five_nodes_symmetric() {
        let data = symmetric_data();
        let sol = maxent_discretize(&data, 5).unwrap();
        assert_eq!(sol.moments_matched, 4);
        assert!(!sol.downgraded);
        let d = sol.distribution().unwrap();
        let (mean, _) = fit_gaussian_mle(&data).unwrap();
        assert!((d.moment(1) - mean).abs() < 1e-8);
        for i in 0..5 {
            assert!((sol.weights[i] - sol.weights[4 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn maxent_prior_already_matching() {
        let nodes = [-1.0, 0.0, 1.0];
        let prior = [0.25, 0.5, 0.25];
        let p = MaxEntProblem::new(&nodes, &prior, &[0.0, 0.5]).unwrap();
        let (lambda, iters) = p.solve().unwrap();
        assert_eq!(iters, 0);
        assert_eq!(lambda, vec![0.0, 0.0]);
        assert_eq!(p.weights(&lambda), prior.to_vec());
    }

    #[test]
    fn maxent_infeasible_targets() {
        let nodes = [-1.0, 0.0, 1.0];
        let prior = [1.0, 1.0, 1.0];
        // Variance 2 is unreachable on [-1, 1].
        let p = MaxEntProblem::new(&nodes, &prior, &[0.0, 2.0]).unwrap();
        assert!(matches!(p.solve(), Err(Error::Infeasible(_))));
        // Two nodes cannot match mean 0 / variance 1 on +-sqrt(2).
        assert!(maxent_discretize(&[-1.0, 1.0, 0.5, -0.5], 2).is_err());
    }

    #[test]
    fn newton_finishes_when_the_dual_is_flat_at_rounding_level() {
        // Mixture samples whose optimum used to stall the line search with
        // a gradient near 1e-9.
        use crate::experiments::{reference_mixture, replication_rng, sample_mixture};
        let mix = reference_mixture();
        for m in 0..60 {
            let data = sample_mixture(&mix, 1000, &mut replication_rng(20_190_417, 1000, m));
            for n in [3, 5] {
                let sol = maxent_discretize(&data, n).unwrap();
                assert!(sol.iterations < MAXENT_MAX_ITERATIONS);
            }
        }
    }
}
