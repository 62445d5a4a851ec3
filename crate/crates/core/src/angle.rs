//! Heading arithmetic on the circle.

use std::f64::consts::{PI, TAU};

/// Wraps an angle into (−π, π].
///
/// Values already in range are returned unchanged, so the function is exact
/// (and odd) for every in-range input.
pub fn wrap(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Shortest signed angular distance from `from` to `to`, in (−π, π].
pub fn shortest_arc(from: f64, to: f64) -> f64 {
    wrap(to - from)
}
