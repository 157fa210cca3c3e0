//! Floating-point abstraction shared by the numerical modules.

use std::fmt::Display;
use std::iter::Sum;
use num_traits::{Float, FloatConst, NumAssign};
use rustfft::FftNum;

/// A real scalar usable by the spectral machinery: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FftNum
    + Display
    + Default
    + Sum
    + NumAssign
{
    /// Roundoff unit scaled for accumulated FFT error checks.
    const ROUNDOFF: Self;

    /// Converts an `f64` literal into this precision.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty, $roundoff:expr) => {
        impl Real for $t {
            const ROUNDOFF: Self = $roundoff;

            #[inline(always)]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline(always)]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32, 1e-5);
impl_real!(f64, 1e-12);
