//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

use crate::policy::NumericPolicy;

/// Real floating-point type the library can be instantiated with (`f32` or `f64`).
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Send + Sync + 'static
{
    /// Tolerances appropriate for this precision.
    fn default_policy() -> NumericPolicy;

    /// Converts an `f64` literal. Panics only for non-representable values, which
    /// cannot happen for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn default_policy() -> NumericPolicy {
        NumericPolicy::f64_defaults()
    }
}

impl Real for f32 {
    fn default_policy() -> NumericPolicy {
        NumericPolicy::f32_defaults()
    }
}
