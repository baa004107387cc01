//! Discretize an empirical distribution into a few weighted points by
//! feeding sample moments into the Golub–Welsch Gaussian-quadrature
//! algorithm.
//!
//! The numerical core ([`moments`], [`quadrature`], [`orthopoly`]) is
//! generic over the scalar type; [`orthopoly`] also runs on exact rationals.
//! The applications ([`baselines`], [`portfolio`], [`experiments`],
//! [`returns`]) work in `f64`, and the aliases below name the common
//! concrete types.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod experiments;
pub mod moments;
pub mod numfmt;
pub mod orthopoly;
pub mod portfolio;
pub mod quadrature;
pub mod returns;
pub mod scalar;

pub use error::{Error, Result};
pub use experiments::{run_experiment, ExperimentConfig, Method};
pub use moments::{gaussian_moments, mixture_moments, sample_moments, standardize};
pub use quadrature::{discretize_data, golub_welsch};
pub use returns::ReturnsDataset;
pub use scalar::{Field, Scalar};

pub type MomentSequence = moments::MomentSequence<f64>;
pub type AffineTransform = moments::AffineTransform<f64>;
pub type GaussianMixture = moments::GaussianMixture<f64>;
pub type DiscreteDistribution = quadrature::DiscreteDistribution<f64>;
pub type JacobiMatrix = quadrature::JacobiMatrix<f64>;
pub type CholeskyFactor = quadrature::CholeskyFactor<f64>;
pub type MonicPolynomial = orthopoly::MonicPolynomial<f64>;
pub type MomentFunctional = orthopoly::MomentFunctional<f64>;

pub type DiscreteDistributionF32 = quadrature::DiscreteDistribution<f32>;
pub type MomentSequenceF32 = moments::MomentSequence<f32>;

/// Exact rational arithmetic for the orthogonal-polynomial recurrence.
pub type Rational = num_rational::BigRational;
pub type RationalMoments = moments::MomentSequence<Rational>;
pub type RationalPolynomial = orthopoly::MonicPolynomial<Rational>;
