//! Smooth compactly-supported cutoff built from the classical `exp(-1/x)`
//! glue. Shared by the dyadic block bank and the cone-spectrum data builder.

/// `exp(-1/x)` for `x > 0`, zero otherwise. Smooth on all of R.
fn psi(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth transition: exactly 0 for `x <= 0`, exactly 1 for `x >= 1`,
/// strictly increasing in between, infinitely differentiable.
pub(crate) fn glue(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = psi(x);
        a / (a + psi(1.0 - x))
    }
}

/// Radial profile that is exactly 1 for `r <= 1`, exactly 0 for `r >= 2`,
/// and smooth in between. The building block of the dyadic partition.
pub(crate) fn radial_step(r: f64) -> f64 {
    glue(2.0 - r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glue_clamps_exactly() {
        assert_eq!(glue(-1.0), 0.0);
        assert_eq!(glue(0.0), 0.0);
        assert_eq!(glue(1.0), 1.0);
        assert_eq!(glue(7.5), 1.0);
    }

    #[test]
    fn glue_is_monotone_and_symmetric() {
        let mut prev = 0.0;
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let g = glue(x);
            assert!(g >= prev);
            prev = g;
            // glue(x) + glue(1-x) = 1 by construction
            assert!((g + glue(1.0 - x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn radial_step_plateaus() {
        assert_eq!(radial_step(0.0), 1.0);
        assert_eq!(radial_step(1.0), 1.0);
        assert_eq!(radial_step(2.0), 0.0);
        assert_eq!(radial_step(5.0), 0.0);
        let mid = radial_step(1.5);
        assert!(mid > 0.0 && mid < 1.0);
    }
}
