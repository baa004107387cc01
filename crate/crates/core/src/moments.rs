//! Raw moments of data sets and of Gaussian / Gaussian-mixture laws.
//!
//! Sample moments use the population divisor `1/I`. High-order moments of
//! unstandardized data quickly overflow or make the Hankel matrix
//! ill-conditioned, so the discretizers standardize first (see
//! [`standardize`]) and map nodes back afterwards.

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, CompensatedSum, Field, Scalar};

/// Raw moments `m_0, m_1, ..., m_K` of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence<T> {
    values: Vec<T>,
}

impl<T: Field> MomentSequence<T> {
    /// Wraps raw moments. Requires at least `m_0`, with `m_0 > 0`.
    pub fn new(values: Vec<T>) -> Result<Self> {
        let Some(m0) = values.first() else {
            return Err(Error::invalid("moment sequence is empty"));
        };
        if !(m0.clone() > T::zero()) {
            return Err(Error::invalid("m_0 must be positive"));
        }
        if values.iter().any(|v| !v.is_finite_value()) {
            return Err(Error::invalid("moments must be finite"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Highest available order `K`.
    pub fn max_order(&self) -> usize {
        self.values.len() - 1
    }

    /// `m_0`, the total mass.
    pub fn mass(&self) -> T {
        self.values[0].clone()
    }

    pub fn get(&self, k: usize) -> Option<&T> {
        self.values.get(k)
    }

    /// Errors unless moments up to `order` are available.
    pub fn require_order(&self, order: usize) -> Result<()> {
        if self.max_order() < order {
            return Err(Error::InsufficientMoments {
                needed: order,
                available: self.max_order(),
            });
        }
        Ok(())
    }
}

impl<T> std::ops::Index<usize> for MomentSequence<T> {
    type Output = T;
    fn index(&self, k: usize) -> &T {
        &self.values[k]
    }
}

/// `x = shift + scale * z`, mapping standardized values `z` back to data units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform<T> {
    shift: T,
    scale: T,
}

impl<T: Scalar> AffineTransform<T> {
    pub fn new(shift: T, scale: T) -> Result<Self> {
        if !(scale > T::zero()) || !scale.is_finite() || !shift.is_finite() {
            return Err(Error::invalid("affine scale must be positive and finite"));
        }
        Ok(Self { shift, scale })
    }

    pub fn identity() -> Self {
        Self {
            shift: T::zero(),
            scale: T::one(),
        }
    }

    pub fn shift(&self) -> T {
        self.shift
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    /// Standardized to data units.
    pub fn apply(&self, z: T) -> T {
        self.shift + self.scale * z
    }

    /// Data units to standardized.
    pub fn invert(&self, x: T) -> T {
        (x - self.shift) / self.scale
    }
}

/// Finite mixture of normal laws.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture<T> {
    proportions: Vec<T>,
    means: Vec<T>,
    stds: Vec<T>,
}

impl<T: Scalar> GaussianMixture<T> {
    /// Proportions must lie in `[0, 1]` and sum to one within `1e-9`.
    pub fn new(proportions: Vec<T>, means: Vec<T>, stds: Vec<T>) -> Result<Self> {
        if proportions.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        if proportions.len() != means.len() || means.len() != stds.len() {
            return Err(Error::invalid("mixture parameter lists differ in length"));
        }
        let all = proportions.iter().chain(&means).chain(&stds);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mixture parameters must be finite"));
        }
        if proportions.iter().any(|&p| p < T::zero() || p > T::one()) {
            return Err(Error::invalid("mixture proportions must lie in [0, 1]"));
        }
        if stds.iter().any(|&s| s < T::zero()) {
            return Err(Error::invalid("mixture standard deviations must be >= 0"));
        }
        let total = compensated_sum(proportions.iter().copied());
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::invalid("mixture proportions must sum to 1"));
        }
        Ok(Self {
            proportions,
            means,
            stds,
        })
    }

    /// Single normal component.
    pub fn normal(mean: T, std: T) -> Result<Self> {
        Self::new(vec![T::one()], vec![mean], vec![std])
    }

    pub fn proportions(&self) -> &[T] {
        &self.proportions
    }

    pub fn means(&self) -> &[T] {
        &self.means
    }

    pub fn stds(&self) -> &[T] {
        &self.stds
    }

    pub fn components(&self) -> usize {
        self.proportions.len()
    }

    pub fn mean(&self) -> T {
        compensated_sum(
            self.proportions
                .iter()
                .zip(&self.means)
                .map(|(&p, &m)| p * m),
        )
    }

    pub fn variance(&self) -> T {
        let mu = self.mean();
        compensated_sum(
            self.proportions
                .iter()
                .zip(&self.means)
                .zip(&self.stds)
                .map(|((&p, &m), &s)| p * (s * s + (m - mu) * (m - mu))),
        )
    }

    /// The mixture of `(X - shift) / scale`.
    pub fn transformed(&self, affine: &AffineTransform<T>) -> Self {
        Self {
            proportions: self.proportions.clone(),
            means: self.means.iter().map(|&m| affine.invert(m)).collect(),
            stds: self.stds.iter().map(|&s| s / affine.scale()).collect(),
        }
    }

    /// Standardizing transform of the mixture law and the standardized mixture.
    pub fn standardized(&self) -> Result<(AffineTransform<T>, Self)> {
        let var = self.variance();
        if !(var > T::zero()) {
            return Err(Error::DegenerateData("mixture has zero variance".into()));
        }
        let affine = AffineTransform::new(self.mean(), var.sqrt())?;
        Ok((affine, self.transformed(&affine)))
    }
}

fn check_data<T: Scalar>(data: &[T]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("data is empty"));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("data contains non-finite values"));
    }
    Ok(())
}

/// `m_k = (1/I) sum_i x_i^k` for `k = 0..=max_order`, with `m_0 = 1` exactly.
pub fn sample_moments<T: Scalar>(data: &[T], max_order: usize) -> Result<MomentSequence<T>> {
    check_data(data)?;
    let mut acc = vec![CompensatedSum::<T>::new(); max_order + 1];
    for &x in data {
        let mut power = x;
        for slot in acc.iter_mut().skip(1) {
            slot.add(power);
            power = power * x;
        }
    }
    let count = T::from_usize(data.len()).expect("data length representable");
    let mut values = Vec::with_capacity(max_order + 1);
    values.push(T::one());
    values.extend(acc.iter().skip(1).map(|s| s.value() / count));
    MomentSequence::new(values)
}

/// Population mean and standard deviation (divisor `I`), two-pass.
pub fn mean_and_std<T: Scalar>(data: &[T]) -> Result<(T, T)> {
    check_data(data)?;
    let count = T::from_usize(data.len()).expect("data length representable");
    let mean = compensated_sum(data.iter().copied()) / count;
    let var = compensated_sum(data.iter().map(|&x| (x - mean) * (x - mean))) / count;
    Ok((mean, var.sqrt()))
}

/// Returns the standardizing transform and the data mapped to mean 0 / std 1.
///
/// Data whose spread is at the level of rounding noise is rejected as
/// degenerate.
pub fn standardize<T: Scalar>(data: &[T]) -> Result<(AffineTransform<T>, Vec<T>)> {
    let (mean, std) = mean_and_std(data)?;
    let magnitude = data.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    if !(std > T::lit(8.0) * T::epsilon() * magnitude) {
        return Err(Error::DegenerateData(
            "sample standard deviation is zero".into(),
        ));
    }
    let affine = AffineTransform::new(mean, std)?;
    let z = data.iter().map(|&x| affine.invert(x)).collect();
    Ok((affine, z))
}

/// Raw moments of `N(mean, std^2)` via `m_k = mean m_{k-1} + (k-1) std^2 m_{k-2}`.
pub fn gaussian_moments<T: Scalar>(mean: T, std: T, max_order: usize) -> Result<MomentSequence<T>> {
    if !mean.is_finite() || !std.is_finite() || std < T::zero() {
        return Err(Error::invalid(
            "gaussian moments need finite mean and std >= 0",
        ));
    }
    let var = std * std;
    let mut values = Vec::with_capacity(max_order + 1);
    values.push(T::one());
    if max_order >= 1 {
        values.push(mean);
    }
    for k in 2..=max_order {
        let km1 = T::from_usize(k - 1).expect("order representable");
        let next = mean * values[k - 1] + km1 * var * values[k - 2];
        values.push(next);
    }
    MomentSequence::new(values)
}

/// `m_k = sum_j p_j E[N(mu_j, sigma_j^2)^k]`.
pub fn mixture_moments<T: Scalar>(
    mix: &GaussianMixture<T>,
    max_order: usize,
) -> Result<MomentSequence<T>> {
    let mut acc = vec![CompensatedSum::<T>::new(); max_order + 1];
    for j in 0..mix.components() {
        let component = gaussian_moments(mix.means()[j], mix.stds()[j], max_order)?;
        let p = mix.proportions()[j];
        for (slot, &m) in acc.iter_mut().zip(component.values()) {
            slot.add(p * m);
        }
    }
    let mut values: Vec<T> = acc.iter().map(|s| s.value()).collect();
    values[0] = T::one();
    MomentSequence::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn constant_data_moments() {
        let m = sample_moments(&[1.0, 1.0, 1.0], 4).unwrap();
        assert_eq!(m.values(), &[1.0; 5]);
    }

    #[test]
    fn symmetric_two_point_moments() {
        let m = sample_moments(&[-1.0, 1.0], 4).unwrap();
        assert_eq!(m.values(), &[1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn sample_moments_rejects_bad_data() {
        assert!(matches!(
            sample_moments::<f64>(&[], 2),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            sample_moments(&[1.0, f64::NAN], 2),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            sample_moments(&[1.0, f64::INFINITY], 2),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn standardize_two_points() {
        let (t, z) = standardize(&[0.0, 2.0]).unwrap();
        assert_eq!(t.shift(), 1.0);
        assert_eq!(t.scale(), 1.0);
        assert_eq!(z, vec![-1.0, 1.0]);
    }

    #[test]
    fn standardize_three_points() {
        let (t, z) = standardize(&[1.0, 2.0, 3.0]).unwrap();
        assert!(close(t.shift(), 2.0, 1e-15));
        assert!(close(t.scale(), (2.0f64 / 3.0).sqrt(), 1e-15));
        let (m, s) = mean_and_std(&z).unwrap();
        assert!(m.abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_rejects_constant() {
        assert!(matches!(
            standardize(&[5.0, 5.0, 5.0]),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            standardize(&[0.1; 7]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn gaussian_standard_normal() {
        let m = gaussian_moments(0.0, 1.0, 6).unwrap();
        assert_eq!(m.values(), &[1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0]);
    }

    #[test]
    fn gaussian_point_mass() {
        let mu = 1.7;
        let m = gaussian_moments(mu, 0.0, 3).unwrap();
        assert_eq!(m.values(), &[1.0, mu, mu * mu, mu * mu * mu]);
    }

    #[test]
    fn gaussian_shifted_matches_quadrature_oracle() {
        // Midpoint rule of x^k phi((x-1)/2)/2 on [-40, 42].
        let (mu, sd) = (1.0f64, 2.0f64);
        let steps = 400_000;
        let (lo, hi) = (mu - 20.0 * sd, mu + 20.0 * sd);
        let h = (hi - lo) / steps as f64;
        let mut oracle = [0.0f64; 5];
        for i in 0..steps {
            let x = lo + (i as f64 + 0.5) * h;
            let dens = (-(x - mu).powi(2) / (2.0 * sd * sd)).exp()
                / (sd * (2.0 * std::f64::consts::PI).sqrt());
            for (k, o) in oracle.iter_mut().enumerate() {
                *o += x.powi(k as i32) * dens * h;
            }
        }
        let expected = [1.0, 1.0, 5.0, 13.0, 73.0];
        for k in 0..5 {
            assert!(
                close(oracle[k], expected[k], 1e-9),
                "oracle k={k}: {}",
                oracle[k]
            );
        }
        let m = gaussian_moments(mu, sd, 4).unwrap();
        assert_eq!(m.values(), &expected);
    }

    #[test]
    fn mixture_two_atoms() {
        let mix = GaussianMixture::new(vec![0.5, 0.5], vec![-1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let m = mixture_moments(&mix, 4).unwrap();
        assert_eq!(m.values(), &[1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn mixture_single_component_reduces() {
        let mix = GaussianMixture::normal(0.3, 1.4).unwrap();
        let a = mixture_moments(&mix, 8).unwrap();
        let b = gaussian_moments(0.3, 1.4, 8).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!(close(*x, *y, 1e-14));
        }
    }

    #[test]
    fn mixture_validation() {
        assert!(GaussianMixture::<f64>::new(vec![], vec![], vec![]).is_err());
        assert!(GaussianMixture::new(vec![0.5, 0.4], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(GaussianMixture::new(vec![1.0], vec![0.0], vec![-1.0]).is_err());
        assert!(GaussianMixture::new(vec![1.0], vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn mixture_standardized_has_unit_variance() {
        let mix = GaussianMixture::<f64>::new(
            vec![0.1392, 0.8608],
            vec![-0.2242, 0.1064],
            vec![0.2164, 0.1453],
        )
        .unwrap();
        let (affine, z) = mix.standardized().unwrap();
        assert!((affine.shift() - 0.0604).abs() < 1e-4);
        let m = mixture_moments(&z, 2).unwrap();
        assert!(m[1].abs() < 1e-14);
        assert!((m[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn moment_sequence_validation() {
        assert!(MomentSequence::<f64>::new(vec![]).is_err());
        assert!(MomentSequence::new(vec![0.0, 1.0]).is_err());
        assert!(MomentSequence::new(vec![1.0, f64::NAN]).is_err());
        let m = MomentSequence::new(vec![1.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.max_order(), 2);
        assert!(matches!(
            m.require_order(4),
            Err(Error::InsufficientMoments {
                needed: 4,
                available: 2
            })
        ));
    }

    #[test]
    fn affine_round_trip() {
        let t = AffineTransform::new(-3.2f64, 0.7).unwrap();
        for x in [-5.0f64, 0.0, 1e-3, 12.5] {
            assert!((t.apply(t.invert(x)) - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0));
        }
        assert!(AffineTransform::new(0.0, 0.0).is_err());
    }

    #[test]
    fn f32_path() {
        let m = gaussian_moments(0.0f32, 1.0, 4).unwrap();
        assert_eq!(m.values(), &[1.0f32, 0.0, 1.0, 0.0, 3.0]);
    }

    proptest! {
        #[test]
        fn moments_scale_homogeneously(
            data in proptest::collection::vec(-3.0f64..3.0, 1..60),
            c in 0.1f64..4.0,
            k in 0usize..9,
        ) {
            let scaled: Vec<f64> = data.iter().map(|x| c * x).collect();
            let a = sample_moments(&data, k).unwrap();
            let b = sample_moments(&scaled, k).unwrap();
            prop_assert_eq!(a[0], 1.0);
            let abs_scale: f64 = data.iter().map(|x| (c * x).abs().powi(k as i32)).sum::<f64>() / data.len() as f64;
            let lhs = b[k];
            let rhs = c.powi(k as i32) * a[k];
            prop_assert!((lhs - rhs).abs() <= 1e-10 * abs_scale.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn zero_variance_mixture_equals_weighted_atoms(
            atoms in proptest::collection::vec((-2.0f64..2.0, 0.05f64..1.0), 1..5),
            k in 0usize..8,
        ) {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            let p: Vec<f64> = atoms.iter().map(|a| a.1 / total).collect();
            let mu: Vec<f64> = atoms.iter().map(|a| a.0).collect();
            let mix = GaussianMixture::new(p.clone(), mu.clone(), vec![0.0; p.len()]).unwrap();
            let m = mixture_moments(&mix, k).unwrap();
            let brute: f64 = p.iter().zip(&mu).map(|(w, x)| w * x.powi(k as i32)).sum();
            prop_assert!((m[k] - brute).abs() <= 1e-12 * brute.abs().max(1.0));
        }

        #[test]
        fn centered_gaussian_odd_moments_vanish(sd in 0.0f64..5.0, k in 0usize..12) {
            let m = gaussian_moments(0.0, sd, 2 * k + 1).unwrap();
            prop_assert_eq!(m[2 * k + 1], 0.0);
        }
    }
}
