use num_traits::{Float, FromPrimitive, NumCast};

/// Floating-point scalar used by the similarity and metrics code.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Default + Send + Sync + std::fmt::Debug + std::fmt::Display + 'static
{
    fn of_count(n: usize) -> Self {
        <Self as NumCast>::from(n).expect("usize fits in a float")
    }

    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 literal fits")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
