//! Symmetric tridiagonal eigensolver (implicit QL with Wilkinson-type shifts,
//! after EISPACK `tql2`).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::JacobiMatrix;

/// Iteration cap per eigenvalue. Unreduced Jacobi matrices converge in a
/// handful of sweeps; hitting the cap means the input was not finite.
pub const MAX_QL_ITERATIONS: usize = 60;

/// Eigenpairs sorted by ascending eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalEigen<T> {
    pub values: Vec<T>,
    /// `vectors[j]` is the unit eigenvector for `values[j]`, with a
    /// non-negative first component.
    pub vectors: Vec<Vec<T>>,
}

pub fn tridiagonal_eigen<T: Scalar>(jacobi: &JacobiMatrix<T>) -> Result<TridiagonalEigen<T>> {
    let n = jacobi.size();
    let mut d: Vec<T> = jacobi.alphas().to_vec();
    // e[i] couples rows i and i+1; e[n-1] = 0 terminates the deflation scan.
    let mut e: Vec<T> = jacobi.betas().to_vec();
    e.push(T::zero());
    // v[k][j]: component k of eigenvector j.
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| if k == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect();

    let two = T::lit(2.0);
    let eps = T::epsilon();
    let mut shift_total = T::zero();
    let mut tst1 = T::zero();

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence {
                        what: "tridiagonal QL iteration",
                        iterations: MAX_QL_ITERATIONS,
                    });
                }

                let g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di = *di - h;
                }
                shift_total = shift_total + h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        let h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if !(e[l].abs() > eps * tst1) {
                    break;
                }
            }
        }
        d[l] = d[l] + shift_total;
        e[l] = T::zero();
    }

    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NoConvergence {
            what: "tridiagonal QL iteration",
            iterations: MAX_QL_ITERATIONS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("finite eigenvalues"));

    let values = order.iter().map(|&j| d[j]).collect();
    let vectors = order
        .iter()
        .map(|&j| {
            let mut col: Vec<T> = v.iter().map(|row| row[j]).collect();
            let norm = col.iter().fold(T::zero(), |acc, &x| acc.hypot(x));
            let sign = if col[0] < T::zero() {
                -T::one()
            } else {
                T::one()
            };
            for x in col.iter_mut() {
                *x = sign * *x / norm;
            }
            col
        })
        .collect();

    Ok(TridiagonalEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn jac(alphas: Vec<f64>, betas: Vec<f64>) -> JacobiMatrix<f64> {
        JacobiMatrix::new(alphas, betas).unwrap()
    }

    fn residual(j: &JacobiMatrix<f64>, lambda: f64, vec: &[f64]) -> f64 {
        let tv = j.mul_vec(vec);
        tv.iter()
            .zip(vec)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn two_by_two() {
        let j = jac(vec![0.0, 0.0], vec![1.0]);
        let eig = tridiagonal_eigen(&j).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((eig.vectors[0][0] - h).abs() < 1e-15 && (eig.vectors[0][1] + h).abs() < 1e-15);
        assert!((eig.vectors[1][0] - h).abs() < 1e-15 && (eig.vectors[1][1] - h).abs() < 1e-15);
    }

    #[test]
    fn one_by_one() {
        let eig = tridiagonal_eigen(&jac(vec![2.5], vec![])).unwrap();
        assert_eq!(eig.values, vec![2.5]);
        assert_eq!(eig.vectors, vec![vec![1.0]]);
    }

    #[test]
    fn hermite_three() {
        let j = jac(vec![0.0; 3], vec![1.0, 2f64.sqrt()]);
        let eig = tridiagonal_eigen(&j).unwrap();
        let s3 = 3f64.sqrt();
        for (got, want) in eig.values.iter().zip([-s3, 0.0, s3]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn non_finite_input_is_reported() {
        let j = JacobiMatrix {
            alphas: vec![f64::NAN, 0.0],
            betas: vec![1.0],
        };
        assert!(tridiagonal_eigen(&j).is_err());
    }

    proptest! {
        #[test]
        fn eigenpairs_have_small_residuals(
            alphas in proptest::collection::vec(-5.0f64..5.0, 1..12),
            raw_betas in proptest::collection::vec(0.01f64..3.0, 11),
        ) {
            let n = alphas.len();
            let j = jac(alphas, raw_betas[..n - 1].to_vec());
            let eig = tridiagonal_eigen(&j).unwrap();
            let norm = j.frobenius_norm();
            for w in eig.values.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            for (lambda, vec) in eig.values.iter().zip(&eig.vectors) {
                prop_assert!(residual(&j, *lambda, vec) <= 1e-10 * norm);
                prop_assert!(vec[0] > 0.0);
                let nrm: f64 = vec.iter().map(|x| x * x).sum();
                prop_assert!((nrm - 1.0).abs() < 1e-12);
            }
            // Orthogonality.
            for a in 0..n {
                for b in (a + 1)..n {
                    let dot: f64 = eig.vectors[a].iter().zip(&eig.vectors[b]).map(|(x, y)| x * y).sum();
                    prop_assert!(dot.abs() < 1e-10);
                }
            }
        }
    }
}
