//! Built-in initial-data families: unit-mass Gaussians, optionally shifted,
//! anisotropic, and rotated. All satisfy the regularity and moment
//! requirements of the large-time analysis (smooth, integrable first and
//! second absolute moments).

use std::sync::Arc;

use crate::error::{Result, SqgError};
use crate::spectral::{Grid2D, PhysicalField};

/// Unit-mass anisotropic Gaussian centered at `center`:
/// `exp(-(x-c)_1^2/(2 s1^2) - (x-c)_2^2/(2 s2^2)) / (2 pi s1 s2)`.
pub fn gaussian(
    grid: &Arc<Grid2D>,
    center: (f64, f64),
    sigma: (f64, f64),
) -> Result<PhysicalField> {
    rotated_gaussian(grid, center, sigma, 0.0)
}

/// Unit-mass Gaussian with principal axes rotated by `angle` radians.
pub fn rotated_gaussian(
    grid: &Arc<Grid2D>,
    center: (f64, f64),
    sigma: (f64, f64),
    angle: f64,
) -> Result<PhysicalField> {
    let (s1, s2) = sigma;
    if !(s1 > 0.0 && s2 > 0.0 && s1.is_finite() && s2.is_finite()) {
        return Err(SqgError::DomainError(format!(
            "gaussian widths must be positive, got ({s1}, {s2})"
        )));
    }
    if !(center.0.is_finite() && center.1.is_finite() && angle.is_finite()) {
        return Err(SqgError::DomainError(
            "gaussian center/angle must be finite".into(),
        ));
    }
    let half = grid.box_length() / 2.0;
    if center.0.abs() > half || center.1.abs() > half {
        return Err(SqgError::DomainError(format!(
            "gaussian center ({}, {}) outside the box [-{half}, {half})^2",
            center.0, center.1
        )));
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s1 * s2);
    let (ca, sa) = (angle.cos(), angle.sin());
    PhysicalField::from_fn(grid, |x, y| {
        let dx = x - center.0;
        let dy = y - center.1;
        let u = ca * dx + sa * dy;
        let v = -sa * dx + ca * dy;
        norm * (-(u * u) / (2.0 * s1 * s1) - (v * v) / (2.0 * s2 * s2)).exp()
    })
}
