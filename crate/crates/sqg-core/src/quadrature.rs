//! Gauss–Legendre quadrature and the graded panel layout used for Duhamel
//! integrals of semigroup convolutions.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, memoized per order.
/// Nodes are found by Newton iteration on the Legendre recurrence; order is
/// capped at 128 (far above anything the integrators request).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!((1..=128).contains(&n), "quadrature order out of range: {n}");
    type RuleCache = Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>;
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| compute_gauss_legendre(n))
        .clone()
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th positive root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence: p_k(x) and derivative at x
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre nodes and weights mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|xi| mid + half * xi).collect(),
        w.iter().map(|wi| half * wi).collect(),
    )
}

/// Integrates a scalar function over `[a, b]` with an `n`-point rule.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre_on(n, a, b);
    x.iter().zip(&w).map(|(xi, wi)| wi * f(*xi)).sum()
}

/// Panel boundaries for Duhamel integrals `int_0^t e^{-(t-s)A} F(s) ds`:
/// a short head panel, a long middle panel, and dyadically shrinking panels
/// toward `s = t`, where the integrand develops a boundary layer once the
/// semigroup factor stops smoothing. Returns strictly increasing boundaries
/// from 0 to `t`.
pub fn graded_panels(t: f64) -> Vec<f64> {
    assert!(
        t > 0.0 && t.is_finite(),
        "panel layout needs t > 0, got {t}"
    );
    let mut bounds = vec![0.0];
    let head = 2.0f64.min(t / 4.0);
    if head < t / 2.0 {
        bounds.push(head);
    }
    bounds.push(t / 2.0);
    let mut w = t / 4.0;
    let mut s = t / 2.0;
    while w > 2.0 && s + w < t {
        s += w;
        bounds.push(s);
        w /= 2.0;
    }
    bounds.push(t);
    bounds
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_symmetric_weights_sum_to_two() {
        for n in [1, 2, 3, 8, 16, 33] {
            let (x, w) = gauss_legendre(n);
            assert_eq!(x.len(), n);
            let wsum: f64 = w.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-13, "n={n}: weight sum {wsum}");
            for i in 0..n {
                assert!((x[i] + x[n - 1 - i]).abs() < 1e-14, "n={n} asymmetric");
                assert!((w[i] - w[n - 1 - i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        // n = 4 integrates degree-7 polynomials exactly on [-1, 1]
        let exact = |k: u32| {
            if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k as f64 + 1.0)
            }
        };
        for k in 0..=7u32 {
            let got = integrate(|x| x.powi(k as i32), -1.0, 1.0, 4);
            assert!(
                (got - exact(k)).abs() < 1e-14,
                "x^{k}: {got} vs {}",
                exact(k)
            );
        }
        // degree 8 must show an error (sanity that the cap is sharp)
        let got = integrate(|x| x.powi(8), -1.0, 1.0, 4);
        assert!((got - 2.0 / 9.0).abs() > 1e-6);
    }

    #[test]
    fn mapped_interval_and_smooth_integrand() {
        let got = integrate(f64::exp, 0.0, 1.0, 12);
        let want = std::f64::consts::E - 1.0;
        assert!((got - want).abs() < 1e-14);
        let got = integrate(|x| (2.5 * x).sin(), 0.3, 2.1, 16);
        let want = ((2.5 * 0.3f64).cos() - (2.5 * 2.1f64).cos()) / 2.5;
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn refinement_agrees_on_smooth_integrand() {
        // entire integrand: both node counts must hit the closed form
        let f = |x: f64| (-x).exp() * (2.0 * x).cos();
        let anti = |x: f64| (-x).exp() * ((2.0 * x).sin() * 2.0 - (2.0 * x).cos()) / 5.0;
        let want = anti(3.0) - anti(0.0);
        let a = integrate(f, 0.0, 3.0, 16);
        let b = integrate(f, 0.0, 3.0, 32);
        assert!(
            (a - want).abs() < 1e-12 * want.abs(),
            "GL-16: {a} vs {want}"
        );
        assert!(
            (b - want).abs() < 1e-12 * want.abs(),
            "GL-32: {b} vs {want}"
        );
    }

    #[test]
    fn graded_panels_structure() {
        for t in [0.5, 1.0, 5.0, 20.0, 50.0] {
            let b = graded_panels(t);
            assert_eq!(b[0], 0.0);
            assert_eq!(*b.last().unwrap(), t);
            assert!(b.windows(2).all(|w| w[1] > w[0]), "t={t}: {b:?}");
            // long spans refine dyadically toward s = t; short spans keep
            // the plain head/half/tail layout whose last panel is t/2
            let last = b[b.len() - 1] - b[b.len() - 2];
            if t > 8.0 {
                assert!(last <= t / 4.0 + 1e-12, "t={t}: {b:?}");
            } else {
                assert!(last <= t / 2.0 + 1e-12, "t={t}: {b:?}");
            }
        }
        // large t: head panel short, tail dyadic
        let b = graded_panels(50.0);
        assert_eq!(b[1], 2.0);
        assert!(b.len() >= 6);
    }

    #[test]
    fn memoization_returns_consistent_rules() {
        let (x1, w1) = gauss_legendre(16);
        let (x2, w2) = gauss_legendre(16);
        assert_eq!(x1, x2);
        assert_eq!(w1, w2);
    }
}
