//! Scalar abstraction: the whole crate is generic over the floating
//! type through this one trait, with `f32` and `f64` as the provided
//! implementations.

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating scalar used throughout the crate.
pub trait Scalar:
    Float
    + NumAssignOps
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + Sum<Self>
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy cast from `f64`, for literals and counts.
    fn cast(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to scalar")
    }

    /// Cast to `f64` for reporting.
    fn to_f64c(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// One draw from the standard normal distribution.
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for f32 {
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn casts_round_trip() {
        assert_eq!(<f64 as Scalar>::cast(1.5), 1.5);
        assert_eq!(<f32 as Scalar>::cast(1.5), 1.5f32);
        assert_eq!(2.25f64.to_f64c(), 2.25);
    }

    #[test]
    fn normal_draws_are_finite() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: f64 = Scalar::sample_standard_normal(&mut rng);
            assert!(x.is_finite());
            let y: f32 = Scalar::sample_standard_normal(&mut rng);
            assert!(y.is_finite());
        }
    }
}
