//! Scalar abstraction: every numeric kernel in this crate is generic over a
//! floating-point type. Training runs at `f32`; gradient checks and the DSP
//! oracle tests instantiate the same code at `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, Signed, ToPrimitive};

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Signed
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal or intermediate into the working scalar type.
#[inline]
pub fn real<F: Real>(v: f64) -> F {
    F::from_f64(v).expect("f64 -> scalar conversion")
}
