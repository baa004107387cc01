//! One-period CRRA portfolio choice between a risky asset and a risk-free
//! asset under a discrete distribution of log excess returns.

use crate::error::{Error, Result};
use crate::moments::GaussianMixture;
use crate::quadrature::{discretize_mixture, DiscreteDistribution};
use crate::scalar::compensated_sum;

/// Nodes used to discretize a known mixture law when computing the
/// reference optimum.
pub const TRUTH_NODES: usize = 11;

/// Relative margin kept from the bankruptcy boundary of the feasible set.
const BOUNDARY_MARGIN: f64 = 1e-12;
/// Relative bracket width at which bisection stops.
const BISECTION_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioProblem {
    /// Distribution of log excess returns `log R - log R_f`.
    log_excess: DiscreteDistribution<f64>,
    risk_free: f64,
    risk_aversion: f64,
}

/// Optimal risky share. `degenerate` is set when every state return equals
/// the risk-free rate and the objective is flat (then `theta = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioSolution {
    pub theta: f64,
    pub degenerate: bool,
}

impl PortfolioProblem {
    pub fn new(
        log_excess: DiscreteDistribution<f64>,
        risk_free: f64,
        risk_aversion: f64,
    ) -> Result<Self> {
        if !(risk_free > 0.0) || !risk_free.is_finite() {
            return Err(Error::invalid("gross risk-free rate must be positive"));
        }
        if !(risk_aversion > 0.0) || !risk_aversion.is_finite() {
            return Err(Error::invalid("risk aversion must be positive"));
        }
        Ok(Self {
            log_excess,
            risk_free,
            risk_aversion,
        })
    }

    pub fn risk_free(&self) -> f64 {
        self.risk_free
    }

    pub fn risk_aversion(&self) -> f64 {
        self.risk_aversion
    }

    pub fn distribution(&self) -> &DiscreteDistribution<f64> {
        &self.log_excess
    }

    fn excess(&self) -> Vec<f64> {
        state_returns(&self.log_excess, self.risk_free)
            .into_iter()
            .map(|r| r - self.risk_free)
            .collect()
    }

    /// Open interval of shares keeping wealth positive in every state.
    pub fn feasible_interval(&self) -> (f64, f64) {
        let excess = self.excess();
        let lo_e = excess.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi_e = excess.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let upper = if lo_e < 0.0 {
            self.risk_free / -lo_e
        } else {
            f64::INFINITY
        };
        let lower = if hi_e > 0.0 {
            -self.risk_free / hi_e
        } else {
            f64::NEG_INFINITY
        };
        (lower, upper)
    }

    /// Derivative of the objective with respect to `theta`:
    /// `sum_n w_n (R_n - R_f) W_n^(-gamma)`.
    pub fn marginal_utility(&self, theta: f64) -> f64 {
        self.foc_terms(theta).0
    }

    /// FOC value and the sum of absolute terms (its natural scale).
    fn foc_terms(&self, theta: f64) -> (f64, f64) {
        let gamma = self.risk_aversion;
        let terms: Vec<f64> = self
            .excess()
            .iter()
            .zip(self.log_excess.weights())
            .map(|(e, w)| w * e * (self.risk_free + theta * e).powf(-gamma))
            .collect();
        (
            compensated_sum(terms.iter().copied()),
            compensated_sum(terms.iter().map(|t| t.abs())),
        )
    }

    /// FOC residual scaled by the magnitude of its terms.
    pub fn scaled_foc(&self, theta: f64) -> f64 {
        let (g, scale) = self.foc_terms(theta);
        if scale > 0.0 {
            g / scale
        } else {
            0.0
        }
    }
}

/// `R_n = R_f exp(x_n)` for each node.
pub fn state_returns(d: &DiscreteDistribution<f64>, risk_free: f64) -> Vec<f64> {
    d.nodes().iter().map(|x| risk_free * x.exp()).collect()
}

/// `E[(R theta + R_f (1 - theta))^(1-gamma)] / (1 - gamma)`, or the
/// expected log for `gamma = 1`.
pub fn crra_objective(problem: &PortfolioProblem, theta: f64) -> Result<f64> {
    let rf = problem.risk_free;
    let gamma = problem.risk_aversion;
    let wealth: Vec<f64> = state_returns(&problem.log_excess, rf)
        .iter()
        .map(|r| r * theta + rf * (1.0 - theta))
        .collect();
    if wealth.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Domain(format!(
            "share {theta} leaves non-positive wealth in some state"
        )));
    }
    let weights = problem.log_excess.weights();
    let value = if gamma == 1.0 {
        compensated_sum(wealth.iter().zip(weights).map(|(w, p)| p * w.ln()))
    } else {
        compensated_sum(
            wealth
                .iter()
                .zip(weights)
                .map(|(w, p)| p * w.powf(1.0 - gamma)),
        ) / (1.0 - gamma)
    };
    Ok(value)
}

/// Maximizes [`crra_objective`] over the feasible open interval.
///
/// The first-order condition is strictly decreasing in `theta`, so the
/// optimum is bracketed by doubling steps from `theta = 0` (clipped at the
/// bankruptcy boundary) and refined by bisection on the FOC sign.
pub fn solve_portfolio(problem: &PortfolioProblem) -> Result<PortfolioSolution> {
    let excess = problem.excess();
    let tol = 4.0 * f64::EPSILON * problem.risk_free;
    if excess.iter().all(|e| e.abs() <= tol) {
        return Ok(PortfolioSolution {
            theta: 0.0,
            degenerate: true,
        });
    }
    let (lower, upper) = problem.feasible_interval();
    if upper.is_infinite() {
        return Err(Error::Unbounded(
            "no state returns less than the risk-free rate".into(),
        ));
    }
    if lower.is_infinite() {
        return Err(Error::Unbounded(
            "no state returns more than the risk-free rate".into(),
        ));
    }
    let upper = upper - BOUNDARY_MARGIN * upper.abs();
    let lower = lower + BOUNDARY_MARGIN * lower.abs();
    let g = |t: f64| problem.marginal_utility(t);

    let g0 = g(0.0);
    if g0 == 0.0 {
        return Ok(PortfolioSolution {
            theta: 0.0,
            degenerate: false,
        });
    }
    // Bracket [a, b] with g(a) > 0 > g(b).
    let (mut a, mut b) = if g0 > 0.0 {
        expand(&g, 0.0, upper, 1.0)?
    } else {
        let (b, a) = expand(&g, 0.0, lower, -1.0)?;
        (a, b)
    };
    if !(g(a) > 0.0 && g(b) < 0.0) {
        return Err(Error::BracketFailure(
            "first-order condition has no sign change".into(),
        ));
    }
    while b - a > BISECTION_WIDTH * a.abs().max(b.abs()).max(1.0) {
        let mid = a + 0.5 * (b - a);
        if mid <= a || mid >= b {
            break;
        }
        if g(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(PortfolioSolution {
        theta: a + 0.5 * (b - a),
        degenerate: false,
    })
}

/// Walks from `start` toward `limit` in doubling steps until the sign of `g`
/// flips; returns `(last point with the starting sign, first flipped point)`.
fn expand<F: Fn(f64) -> f64>(g: &F, start: f64, limit: f64, direction: f64) -> Result<(f64, f64)> {
    let sign = g(start).signum();
    let mut inner = start;
    let mut step = 1.0;
    loop {
        let mut outer = inner + direction * step;
        if (outer - limit) * direction >= 0.0 {
            outer = limit;
        }
        if g(outer).signum() != sign {
            return Ok((inner, outer));
        }
        if outer == limit {
            return Err(Error::Unbounded(
                "first-order condition keeps its sign up to the feasibility boundary".into(),
            ));
        }
        inner = outer;
        step *= 2.0;
    }
}

/// Optimal share under a known mixture law, discretized with
/// [`TRUTH_NODES`] Gaussian-quadrature nodes.
pub fn theoretical_portfolio(
    mix: &GaussianMixture<f64>,
    risk_free: f64,
    risk_aversion: f64,
) -> Result<f64> {
    let dist = discretize_mixture(mix, TRUTH_NODES)?;
    let problem = PortfolioProblem::new(dist, risk_free, risk_aversion)?;
    Ok(solve_portfolio(&problem)?.theta)
}
