use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real number type used for vector components, distances and model costs.
///
/// Implemented for `f32` and `f64`. Everything numeric in the crate is generic
/// over this trait; the crate root exposes concrete aliases for both widths.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize fits in a float")
    }

    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 converts")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Little-endian bytes as stored in `fvecs` style files.
    fn to_le_f32_bytes(self) -> [u8; 4] {
        (self.to_f64_lossy() as f32).to_le_bytes()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Round half away from zero and convert to an integer count.
pub(crate) fn round_to_usize<T: Scalar>(x: T) -> usize {
    x.round().to_usize().unwrap_or(0)
}
