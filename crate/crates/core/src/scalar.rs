//! Scalar abstraction for the numeric kernels.
//!
//! Everything that does arithmetic (impurities, demand algebra, the simplex
//! tableau) is written against [`Scalar`] so the same code runs in `f32` or
//! `f64`. Constants are lifted with [`Scalar::from_f64`].

use std::fmt::{Debug, Display};

use num_traits::Float;

/// Floating-point scalar used throughout the numeric core.
pub trait Scalar: Float + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from `f64`; the standard way to inject constants.
    fn from_f64(value: f64) -> Self;

    /// Lossy conversion to `f64`, used at reporting boundaries.
    fn as_f64(self) -> f64;

    fn from_usize(value: usize) -> Self {
        Self::from_f64(value as f64)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(value: f64) -> Self {
        value
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(value: f64) -> Self {
        value as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}
