//! Floating-point abstraction so the numerical core can be instantiated at
//! f32 or f64. Everything downstream is written against this trait; the
//! crate root re-exports f64 aliases for the common case.

use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumCast
    + Sum
    + Send
    + Sync
    + Display
    + Debug
    + 'static
{
    /// Draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Draw from U[0, 1).
    fn standard_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn from_usize_(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
    fn from_f64_(x: f64) -> Self {
        Self::from_f64(x).expect("f64 representable")
    }
    fn to_f64_(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
    fn standard_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random()
    }
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
    fn standard_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random()
    }
}
