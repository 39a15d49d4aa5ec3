//! Quadrature and sweep-sampling helpers shared by the diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use crate::num;

/// Trapezoidal integral of samples `(t_i, v_i)` over the whole grid.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len());
    let mut acc = 0.0;
    for i in 1..times.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
    }
    acc
}

/// Cumulative trapezoidal integral: `out[i] = integral from t_0 to t_i`.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(times.len(), values.len());
    let mut out = vec![0.0; times.len()];
    for i in 1..times.len() {
        out[i] = out[i - 1] + 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
    }
    out
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute accuracy
/// `tol`. `a > b` integrates with the usual sign flip.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    simpson_recurse(f, a, b, fa, fm, fb, simpson_rule(a, b, fa, fm, fb), tol, 48)
}

fn simpson_rule(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_rule(a, m, fa, flm, fm);
    let right = simpson_rule(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || num::abs(delta) <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_recurse(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)
            + simpson_recurse(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)
    }
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical-inverse (van der Corput) value of `index` in base `base`.
fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut result = 0.0;
    while index > 0 {
        result += (index % base as u64) as f64 * inv;
        index /= base as u64;
        inv /= b;
    }
    result
}

/// `index`-th point (1-based) of the low-discrepancy Halton sequence in
/// `dim` dimensions, in the unit cube.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton supports up to {} dims", PRIMES.len());
    (0..dim).map(|k| radical_inverse(index, PRIMES[k])).collect()
}

/// Box in state space with an optional excluded ball around the origin,
/// which is how annular verification regions are declared.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SampleRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Samples with Euclidean norm below this are discarded (0 disables).
    #[serde(default)]
    pub min_norm: f64,
}

impl SampleRegion {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Deterministic low-discrepancy sweep of `count` points.
    pub fn sweep(&self, count: usize) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(count);
        let mut index = 1u64;
        // Bail out eventually if min_norm excludes nearly the whole box.
        let budget = (count as u64).saturating_mul(64).max(1024);
        while out.len() < count && index <= budget {
            let u = halton(index, dim);
            index += 1;
            let p: Vec<f64> =
                (0..dim).map(|k| self.lo[k] + u[k] * (self.hi[k] - self.lo[k])).collect();
            if self.min_norm > 0.0 && num::norm(&p) < self.min_norm {
                continue;
            }
            out.push(p);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_linear_exact() {
        let t = [0.0, 0.5, 1.0, 2.0];
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x).collect();
        assert!((trapezoid(&t, &v) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn cumulative_matches_total() {
        let t: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|x| x * x).collect();
        let c = cumulative_trapezoid(&t, &v);
        assert!((c[10] - trapezoid(&t, &v)).abs() < 1e-15);
        assert!(c.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn simpson_polynomial_exact() {
        // Simpson is exact through cubics.
        let f = |x: f64| 2.0 * x * x * x - x + 1.0;
        let got = adaptive_simpson(&f, 0.0, 2.0, 1e-12);
        assert!((got - (8.0 - 2.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn simpson_handles_reversed_limits() {
        let f = |x: f64| x;
        assert!((adaptive_simpson(&f, 1.0, 0.0, 1e-12) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn simpson_transcendental() {
        let f = |x: f64| crate::num::exp(-x);
        let got = adaptive_simpson(&f, 0.0, 5.0, 1e-10);
        let expect = 1.0 - crate::num::exp(-5.0);
        assert!((got - expect).abs() < 1e-9);
    }

    #[test]
    fn halton_in_unit_cube() {
        for i in 1..100 {
            for v in halton(i, 4) {
                assert!((0.0..1.0).contains(&v));
            }
        }
    }

    #[test]
    fn sweep_respects_min_norm() {
        let region = SampleRegion { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0], min_norm: 0.5 };
        let pts = region.sweep(200);
        assert_eq!(pts.len(), 200);
        assert!(pts.iter().all(|p| crate::num::norm(p) >= 0.5));
    }
}
