//! Small numerical helpers shared by the analytic modules.

use num_complex::Complex64;

/// Compensated (Kahan–Babuška/Neumaier) running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(sum: f64, comp: f64) -> Self {
        KahanSum { sum, comp }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn parts(&self) -> (f64, f64) {
        (self.sum, self.comp)
    }
}

/// Pairwise (tree) summation; the result does not depend on how callers
/// chunk the work as long as the input order is fixed.
pub fn pairwise_sum(xs: &[Complex64]) -> Complex64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Adaptive Simpson quadrature for a complex-valued integrand.
///
/// `tol` is relative to the magnitude of the running estimate, with a small
/// absolute floor.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    // Split into panels first so that oscillatory integrands start from a
    // reasonable resolution.
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    let mut total = Complex64::new(0.0, 0.0);
    let mut coarse = Vec::with_capacity(PANELS);
    for i in 0..PANELS {
        let lo = a + h * i as f64;
        let hi = if i + 1 == PANELS { b } else { lo + h };
        let (flo, fmid, fhi) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += whole;
        coarse.push((lo, hi, flo, fmid, fhi, whole));
    }
    let scale = total.norm().max(1e-300);
    let abs_tol = tol * scale / PANELS as f64;
    coarse
        .into_iter()
        .map(|(lo, hi, flo, fmid, fhi, whole)| simpson_rec(&f, lo, hi, flo, fmid, fhi, whole, abs_tol, 48))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Log-spaced sample points, inclusive of both ends.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo, "log_space needs 0 < lo <= hi");
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i + 1 == count {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}


/// Maps `f` over `items` on a pool of `threads` workers, preserving order.
pub(crate) fn par_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads > 1 {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
            if let Ok(pool) = pool {
                return pool.install(|| items.par_iter().map(&f).collect());
            }
        }
    }
    let _ = threads;
    items.iter().map(f).collect()
}
