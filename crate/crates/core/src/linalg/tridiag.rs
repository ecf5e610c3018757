//! Sturm counts and bisection for symmetric tridiagonal matrices.

/// Symmetric tridiagonal matrix given by its diagonal and off-diagonal.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    d: Vec<f64>,
    e2: Vec<f64>,
    pivmin: f64,
    lower: f64,
    upper: f64,
}

impl Tridiagonal {
    pub fn new(d: Vec<f64>, e: &[f64]) -> Self {
        assert_eq!(e.len() + 1, d.len().max(1));
        let e2: Vec<f64> = e.iter().map(|x| x * x).collect();
        let emax = e2.iter().fold(1.0f64, |m, &x| m.max(x));
        let (mut lower, mut upper) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..d.len() {
            let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + e.get(i).map_or(0.0, |x| x.abs());
            lower = lower.min(d[i] - r);
            upper = upper.max(d[i] + r);
        }
        Self {
            d,
            e2,
            pivmin: f64::MIN_POSITIVE * emax,
            lower,
            upper,
        }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.d.len() {
            q = self.d[i] - x - if i > 0 { self.e2[i - 1] / q } else { 0.0 };
            if q.abs() < self.pivmin {
                q = -self.pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based), to about machine precision
    /// relative to the spectral radius.
    pub fn kth(&self, k: usize) -> f64 {
        self.kth_in(k, self.lower, self.upper)
    }

    fn kth_in(&self, k: usize, mut lo: f64, mut hi: f64) -> f64 {
        let scale = self.lower.abs().max(self.upper.abs());
        let tol = 2.0 * f64::EPSILON * scale + 2.0 * self.pivmin;
        lo -= tol;
        hi += tol;
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Ascending eigenvalues in `[lo, hi)`.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.d.is_empty() || hi <= lo {
            return vec![];
        }
        let a = self.count_below(lo);
        let b = self.count_below(hi);
        let mut out: Vec<f64> = Vec::with_capacity(b.saturating_sub(a));
        for k in a..b {
            let start = out.last().copied().unwrap_or(lo).max(lo);
            out.push(self.kth_in(k, start, hi));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn free_chain() {
        let n = 50;
        let t = Tridiagonal::new(vec![0.0; n], &vec![1.0; n - 1]);
        for k in 0..n {
            let want = 2.0 * (((n - k) as f64) * PI / (n as f64 + 1.0)).cos();
            assert!((t.kth(k) - want).abs() < 1e-13);
        }
        assert_eq!(t.count_below(0.0), n / 2);
        let mid = t.eigenvalues_in(-0.5, 0.5);
        assert!(mid.iter().all(|x| (-0.5..0.5).contains(x)));
        let expect = (0..n)
            .map(|k| 2.0 * (((k + 1) as f64) * PI / (n as f64 + 1.0)).cos())
            .filter(|x| (-0.5..0.5).contains(x))
            .count();
        assert_eq!(mid.len(), expect);
    }

    #[test]
    fn decoupled_blocks() {
        let t = Tridiagonal::new(vec![3.0, -1.0, 2.0], &[0.0, 0.0]);
        let v: Vec<f64> = (0..3).map(|k| t.kth(k)).collect();
        assert!((v[0] + 1.0).abs() < 1e-14 && (v[1] - 2.0).abs() < 1e-14 && (v[2] - 3.0).abs() < 1e-14);
        assert!((Tridiagonal::new(vec![1.5], &[]).kth(0) - 1.5).abs() < 1e-14);
    }
}
