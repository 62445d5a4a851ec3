//! Fixed-point conversions. Quantization rounds to nearest, ties away from
//! zero (`f64::round`).

use super::codec::EncodeError;

/// Scale for centiradians.
pub const CENTI: f64 = 100.0;
/// Scale for millimetres and gains ×1000.
pub const MILLI: f64 = 1000.0;
/// Scale for duties in per-mille.
pub const PER_MILLE: f64 = 1000.0;

pub(crate) fn quantize<T: TryFrom<i64>>(
    value: f64,
    scale: f64,
    field: &'static str,
) -> Result<T, EncodeError> {
    let scaled = (value * scale).round();
    if !scaled.is_finite() || scaled.abs() > i64::MAX as f64 / 2.0 {
        return Err(EncodeError::OutOfRange { field, value });
    }
    T::try_from(scaled as i64).map_err(|_| EncodeError::OutOfRange { field, value })
}

/// Like [`quantize`] but additionally bounded to `[lo, hi]` in SI units.
pub(crate) fn quantize_in<T: TryFrom<i64>>(
    value: f64,
    scale: f64,
    lo: f64,
    hi: f64,
    field: &'static str,
) -> Result<T, EncodeError> {
    if !(lo..=hi).contains(&value) {
        return Err(EncodeError::OutOfRange { field, value });
    }
    quantize(value, scale, field)
}

pub(crate) fn restore(raw: impl Into<i64>, scale: f64) -> f64 {
    raw.into() as f64 / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_round_away_from_zero() {
        assert_eq!(quantize::<i32>(0.005, CENTI, "x").unwrap(), 1);
        assert_eq!(quantize::<i32>(-0.005, CENTI, "x").unwrap(), -1);
        assert_eq!(quantize::<i16>(0.0005, PER_MILLE, "x").unwrap(), 1);
        assert_eq!(quantize::<i16>(0.0004, PER_MILLE, "x").unwrap(), 0);
    }

    #[test]
    fn overflow_names_field() {
        let err = quantize::<i16>(40.0, PER_MILLE, "duties").unwrap_err();
        assert_eq!(
            err,
            EncodeError::OutOfRange {
                field: "duties",
                value: 40.0
            }
        );
        assert!(quantize::<i32>(f64::NAN, MILLI, "depth_est").is_err());
        assert!(quantize::<u32>(-1.0, MILLI, "t").is_err());
    }
}
