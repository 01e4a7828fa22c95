//! Scalar abstraction shared by every scoring routine.
//!
//! Index statistics are integer counts; everything derived from them (BM25
//! contributions, term weights, fusion scores, metric values) is computed in
//! a caller-chosen floating point type.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable for scores and metric values.
pub trait Score:
    Float + FromPrimitive + ToPrimitive + Debug + Display + FromStr + Default + Send + Sync + 'static
{
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Score for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + FromStr
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Descending score order with ascending passage id as tie-break.
pub(crate) fn rank_order<S: Score>(a: (&str, S), b: (&str, S)) -> std::cmp::Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then_with(|| a.0.cmp(b.0))
}
