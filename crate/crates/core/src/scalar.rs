//! Scalar abstraction for the numeric core.
//!
//! Everything below the FEM/training layers is generic over [`Scalar`], a
//! thin alias over the `num-traits` float traits. `f32` and `f64` both
//! implement it; the shipped binaries instantiate `f64`.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the numeric core.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + std::fmt::Debug
        + std::fmt::Display
        + Send
        + Sync
        + 'static
{
}

/// Shorthand for lifting an `f64` literal into a generic scalar.
#[inline]
pub fn c<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Overflow-safe softplus, `ln(1 + e^x)`, computed as `max(x,0) + ln(1+e^{-|x|})`.
#[inline]
pub fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable logistic sigmoid.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Exponential with a linear extension above `cap`.
///
/// Below the cap this is `exp(x)`; above it the function continues with the
/// constant slope `exp(cap)`, staying convex, non-decreasing and C¹.
#[inline]
pub fn exp_capped<T: Scalar>(x: T, cap: T) -> T {
    if x <= cap {
        x.exp()
    } else {
        cap.exp() * (T::one() + (x - cap))
    }
}

/// Derivative of [`exp_capped`].
#[inline]
pub fn exp_capped_deriv<T: Scalar>(x: T, cap: T) -> T {
    if x <= cap {
        x.exp()
    } else {
        cap.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_matches_naive_form() {
        for &x in &[-30.0_f64, -2.5, 0.0, 1.0, 20.0] {
            let naive = (1.0 + x.exp()).ln();
            assert!((softplus(x) - naive).abs() < 1e-14, "x={x}");
        }
        // No overflow far beyond f64 exp range.
        assert!((softplus(800.0_f64) - 800.0).abs() < 1e-12);
        assert_eq!(softplus(-800.0_f64), 0.0);
    }

    #[test]
    fn sigmoid_symmetry() {
        for &x in &[-50.0_f64, -1.0, 0.0, 0.3, 40.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(sigmoid(0.0_f64), 0.5);
    }

    #[test]
    fn exp_capped_is_c1_at_cap() {
        let cap = 30.0_f64;
        let below = exp_capped(cap - 1e-9, cap);
        let above = exp_capped(cap + 1e-9, cap);
        assert!((below - above).abs() < 1e-8 * cap.exp());
        assert!(exp_capped(35.0, cap) > cap.exp());
        assert_eq!(exp_capped_deriv(35.0, cap), cap.exp());
    }
}
