//! Monic orthogonal polynomials built by the three-term recurrence, with
//! inner products evaluated exactly through the moment functional
//! `(f, g) = sum_ij f_i g_j m_{i+j}`.
//!
//! This is an independent route to the recurrence coefficients and nodes
//! produced by [`crate::quadrature`]: it never forms a Cholesky factor and
//! finds roots by bisection rather than by an eigensolver. The recurrence is
//! generic over [`Field`], so exact rational moments give exact polynomials.

use crate::error::{Error, Result};
use crate::moments::MomentSequence;
use crate::quadrature::JacobiMatrix;
use crate::scalar::{Field, Scalar};

/// Polynomial `c_0 + c_1 x + ... + x^n` with unit leading coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct MonicPolynomial<T> {
    coeffs: Vec<T>,
}

impl<T: Field> MonicPolynomial<T> {
    /// Coefficients in ascending order; the last must be exactly one.
    pub fn from_coefficients(coeffs: Vec<T>) -> Result<Self> {
        match coeffs.last() {
            Some(lead) if lead.is_one() => Ok(Self { coeffs }),
            _ => Err(Error::invalid(
                "monic polynomial needs leading coefficient 1",
            )),
        }
    }

    pub fn one() -> Self {
        Self {
            coeffs: vec![T::one()],
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coeffs
    }

    /// Horner evaluation.
    pub fn eval(&self, x: &T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    /// `(x - a) p(x) - b q(x)`, monic when `deg q < deg p`.
    fn recur(&self, a: &T, b: &T, prev: &Self) -> Self {
        let n = self.degree();
        let mut out = vec![T::zero(); n + 2];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i + 1] = out[i + 1].clone() + c.clone();
            out[i] = out[i].clone() - a.clone() * c.clone();
        }
        for (i, c) in prev.coeffs.iter().enumerate() {
            out[i] = out[i].clone() - b.clone() * c.clone();
        }
        Self { coeffs: out }
    }
}

/// Horner value of `p` at `x`.
pub fn poly_eval<T: Field>(p: &MonicPolynomial<T>, x: &T) -> T {
    p.eval(x)
}

/// Inner product on polynomials induced by a moment sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentFunctional<T> {
    moments: MomentSequence<T>,
}

impl<T: Field> MomentFunctional<T> {
    pub fn new(moments: MomentSequence<T>) -> Self {
        Self { moments }
    }

    pub fn moments(&self) -> &MomentSequence<T> {
        &self.moments
    }

    /// `(x^shift f, g)`. Also returns `sum |f_i g_j m_{i+j+shift}|` as the
    /// magnitude against which cancellation is judged.
    fn pairing(&self, f: &[T], g: &[T], shift: usize) -> Result<(T, T)> {
        let order = f.len() + g.len() - 2 + shift;
        self.moments.require_order(order)?;
        let mut value = T::zero();
        let mut magnitude = T::zero();
        for (i, a) in f.iter().enumerate() {
            for (j, b) in g.iter().enumerate() {
                let term = a.clone() * b.clone() * self.moments[i + j + shift].clone();
                magnitude = magnitude + term.abs();
                value = value + term;
            }
        }
        Ok((value, magnitude))
    }

    /// `(f, g)`; needs moments up to `deg f + deg g`.
    pub fn inner(&self, f: &MonicPolynomial<T>, g: &MonicPolynomial<T>) -> Result<T> {
        Ok(self.pairing(&f.coeffs, &g.coeffs, 0)?.0)
    }
}

/// The orthogonal family `p_0..p_N` with its recurrence data.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalFamily<T> {
    pub polynomials: Vec<MonicPolynomial<T>>,
    /// `||p_n||^2` for `n = 0..=N`.
    pub norms_sq: Vec<T>,
    /// `alpha_1..alpha_N`.
    pub alphas: Vec<T>,
    /// `beta_n^2 = ||p_n||^2 / ||p_{n-1}||^2` for `n = 1..N-1`.
    pub betas_sq: Vec<T>,
}

/// `p_0 = 1`, `p_{n+1} = (x - alpha_{n+1}) p_n - beta_n^2 p_{n-1}` with
/// `alpha_{n+1} = (x p_n, p_n) / ||p_n||^2` and
/// `beta_n^2 = ||p_n||^2 / ||p_{n-1}||^2`.
///
/// Requires moments up to order `2N`, since `||p_N||^2` is checked as well:
/// a measure with `N` or fewer support points is reported as degenerate.
pub fn ttrr_family<T: Field>(
    functional: &MomentFunctional<T>,
    n: usize,
) -> Result<OrthogonalFamily<T>> {
    if n == 0 {
        return Err(Error::invalid("degree must be at least 1"));
    }
    functional.moments().require_order(2 * n)?;

    let mut polys = vec![MonicPolynomial::one()];
    let mut norms_sq = Vec::with_capacity(n + 1);
    let mut alphas = Vec::with_capacity(n);
    let mut betas_sq = Vec::with_capacity(n.saturating_sub(1));

    for k in 0..=n {
        let p = &polys[k];
        let (norm_sq, magnitude) = functional.pairing(&p.coeffs, &p.coeffs, 0)?;
        if !(norm_sq > T::degeneracy_floor() * magnitude) {
            return Err(Error::DegenerateMeasure { degree: k });
        }
        norms_sq.push(norm_sq.clone());
        if k == n {
            break;
        }
        let (xpp, _) = functional.pairing(&p.coeffs, &p.coeffs, 1)?;
        let alpha = xpp / norm_sq.clone();
        let (beta_sq, prev) = if k == 0 {
            (
                T::zero(),
                MonicPolynomial {
                    coeffs: vec![T::zero()],
                },
            )
        } else {
            let b = norm_sq / norms_sq[k - 1].clone();
            betas_sq.push(b.clone());
            (b, polys[k - 1].clone())
        };
        let next = p.recur(&alpha, &beta_sq, &prev);
        alphas.push(alpha);
        polys.push(next);
    }

    Ok(OrthogonalFamily {
        polynomials: polys,
        norms_sq,
        alphas,
        betas_sq,
    })
}

/// Orthogonal polynomials `p_0..p_N` and the `N x N` Jacobi matrix with
/// `beta_n = ||p_n|| / ||p_{n-1}||`.
pub fn ttrr_build<T: Scalar>(
    functional: &MomentFunctional<T>,
    n: usize,
) -> Result<(Vec<MonicPolynomial<T>>, JacobiMatrix<T>)> {
    let family = ttrr_family(functional, n)?;
    let jacobi = family.jacobi()?;
    Ok((family.polynomials, jacobi))
}

impl<T: Scalar> OrthogonalFamily<T> {
    pub fn degree(&self) -> usize {
        self.alphas.len()
    }

    pub fn jacobi(&self) -> Result<JacobiMatrix<T>> {
        JacobiMatrix::new(
            self.alphas.clone(),
            self.betas_sq.iter().map(|b| b.sqrt()).collect(),
        )
    }

    /// `p_k(x)` for `k = 0..=N`, evaluated with the recurrence.
    fn eval_all(&self, x: T) -> Vec<T> {
        let n = self.degree();
        let mut vals = Vec::with_capacity(n + 1);
        vals.push(T::one());
        vals.push(x - self.alphas[0]);
        for k in 1..n {
            let next = (x - self.alphas[k]) * vals[k] - self.betas_sq[k - 1] * vals[k - 1];
            vals.push(next);
        }
        vals
    }

    /// Interval containing every zero of `p_1..p_N` (Gershgorin bound on
    /// the Jacobi matrix).
    pub fn root_interval(&self) -> (T, T) {
        let n = self.degree();
        let betas: Vec<T> = self.betas_sq.iter().map(|b| b.sqrt()).collect();
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..n {
            let mut radius = T::zero();
            if i > 0 {
                radius = radius + betas[i - 1];
            }
            if i + 1 < n {
                radius = radius + betas[i];
            }
            lo = lo.min(self.alphas[i] - radius);
            hi = hi.max(self.alphas[i] + radius);
        }
        let pad = (hi - lo).max(T::one()) * T::lit(1e-6);
        (lo - pad, hi + pad)
    }

    /// Ascending zeros of `p_N`. The zeros of `p_{k-1}` strictly interlace
    /// those of `p_k`, so each zero of `p_k` is bisected inside a bracket
    /// delimited by consecutive zeros of `p_{k-1}`.
    pub fn roots(&self) -> Result<Vec<T>> {
        let (lo, hi) = self.root_interval();
        let mut roots: Vec<T> = Vec::new();
        for k in 1..=self.degree() {
            let eval = |x: T| self.eval_all(x)[k];
            let mut edges = Vec::with_capacity(k + 1);
            edges.push(lo);
            edges.extend(roots.iter().copied());
            edges.push(hi);
            roots = edges
                .windows(2)
                .map(|w| bisect(&eval, w[0], w[1]))
                .collect::<Result<Vec<T>>>()?;
        }
        Ok(roots)
    }
}

const MAX_BISECTIONS: usize = 2000;

fn bisect<T: Scalar, F: Fn(T) -> T>(f: &F, mut lo: T, mut hi: T) -> Result<T> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == T::zero() {
        return Ok(lo);
    }
    if f_hi == T::zero() {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::BracketFailure(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    let two = T::lit(2.0);
    for _ in 0..MAX_BISECTIONS {
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == T::zero() {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + (hi - lo) / two)
}

/// Ascending real zeros of a polynomial whose zeros are all real, simple,
/// and inside `interval`.
///
/// Zeros of `p'` separate those of `p` (Rolle), so the derivative's zeros,
/// found recursively, supply the bisection brackets.
pub fn poly_roots_bracketed<T: Scalar>(p: &MonicPolynomial<T>, interval: (T, T)) -> Result<Vec<T>> {
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::invalid("root interval must satisfy lo < hi"));
    }
    let n = p.degree();
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = T::from_usize(n).expect("degree representable");
    let derivative = MonicPolynomial {
        coeffs: (1..=n)
            .map(|i| T::from_usize(i).expect("degree representable") * p.coeffs[i] / lead)
            .collect(),
    };
    let critical = poly_roots_bracketed(&derivative, interval)?;
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(lo);
    edges.extend(critical);
    edges.push(hi);
    let eval = |x: T| p.eval(&x);
    let roots = edges
        .windows(2)
        .map(|w| bisect(&eval, w[0], w[1]))
        .collect::<Result<Vec<T>>>()?;
    for &r in &roots {
        let scale = p.coeffs.iter().enumerate().fold(T::zero(), |acc, (i, c)| {
            acc + c.abs() * r.abs().powi(i as i32)
        });
        if p.eval(&r).abs() > T::lit(1e-10) * scale {
            return Err(Error::BracketFailure(format!("residual too large at {r}")));
        }
    }
    Ok(roots)
}
