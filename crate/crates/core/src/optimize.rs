//! One-dimensional search helpers shared by metrology and estimation.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`,
/// stopping when the bracket is narrower than `tol`.
pub fn golden_section_min<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Minimizes `f` over `[lo, hi]` by scanning `points` evenly spaced samples
/// and refining the best one with golden-section search.
///
/// Returns `(argmin, min)`; the grid optimum is kept when refinement does not
/// improve on it, so the result never leaves `[lo, hi]`.
pub fn grid_then_golden_min<F>(mut f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if points < 2 || hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidArgument(format!("bad search interval [{lo}, {hi}] with {points} points")));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (lo, f64::INFINITY, 0usize);
    for k in 0..points {
        let x = if k + 1 == points { hi } else { lo + k as f64 * step };
        let v = f(x)?;
        if v < best.1 {
            best = (x, v, k);
        }
    }
    let k = best.2;
    let a = if k == 0 { lo } else { lo + (k - 1) as f64 * step };
    let b = if k + 1 >= points { hi } else { (lo + (k + 1) as f64 * step).min(hi) };
    let refined = golden_section_min(&mut f, a, b, tol)?;
    Ok(if refined.1 <= best.1 { refined } else { (best.0, best.1) })
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut f_lo, f_hi) = (f(lo)?, f(hi)?);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, v) = golden_section_min(|x| Ok((x - 0.3).powi(2) + 1.0), -1.0, 2.0, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_handles_multimodal_functions() {
        let f = |x: f64| Ok(-(3.0 * x).sin() - 0.2 * x);
        let (x, _) = grid_then_golden_min(f, 0.0, 6.0, 200, 1e-10).unwrap();
        // third crest of sin(3x) + 0.2x: cos(3x) = -1/15 with sin(3x) > 0
        assert!((x - (4.0 * std::f64::consts::PI + (-1.0f64 / 15.0).acos()) / 3.0).abs() < 1e-6, "{x}");
    }

    #[test]
    fn grid_keeps_boundary_optimum() {
        let (x, _) = grid_then_golden_min(Ok, 0.5, 1.0, 11, 1e-12).unwrap();
        assert!((0.5..0.5 + 1e-9).contains(&x));
    }

    #[test]
    fn bisect_requires_bracket() {
        let root = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-12).unwrap();
        assert!((root - 2f64.sqrt()).abs() < 1e-11);
        assert!(matches!(bisect(|x| Ok(x * x + 1.0), 0.0, 1.0, 1e-6), Err(Error::Bracket { .. })));
    }
}
