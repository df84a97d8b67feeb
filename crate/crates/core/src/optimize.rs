//! Scalar maximization: coarse grid scan to bracket, golden-section to refine.

const INV_PHI: f64 = 0.618_033_988_749_894_9; // (sqrt(5) - 1) / 2

/// Maximizer of `f` on `[lo, hi]` by golden-section search. Assumes `f` is
/// unimodal on the interval; stops once the bracket is narrower than `xtol`.
pub fn golden_section_max<F>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > xtol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Best of an `n`-point uniform grid on `[lo, hi]` (endpoints included),
/// returned as `(index, x, f(x))`. The first maximum wins on ties.
pub fn grid_argmax<F>(f: F, lo: f64, hi: f64, n: usize) -> (usize, f64, f64)
where
    F: Fn(f64) -> f64,
{
    assert!(n >= 2, "grid needs at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (0, lo, f(lo));
    for i in 1..n {
        let x = if i == n - 1 { hi } else { lo + step * i as f64 };
        let v = f(x);
        if v > best.2 {
            best = (i, x, v);
        }
    }
    best
}

/// Grid scan followed by golden-section refinement inside the cell pair
/// around the best grid point. The refined point is kept only if it does
/// not lose to the grid winner.
pub fn maximize_bracketed<F>(f: F, lo: f64, hi: f64, grid: usize, xtol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let (i, x_grid, f_grid) = grid_argmax(&f, lo, hi, grid);
    let step = (hi - lo) / (grid - 1) as f64;
    let a = if i == 0 { lo } else { lo + step * (i - 1) as f64 };
    let b = if i + 1 >= grid { hi } else { lo + step * (i + 1) as f64 };
    let (x, fx) = golden_section_max(&f, a, b, xtol);
    if fx >= f_grid {
        (x, fx)
    } else {
        (x_grid, f_grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
        assert!(fx.abs() < 1e-17);
    }

    #[test]
    fn peak_at_boundary() {
        let (x, _) = golden_section_max(|x| x, 0.0, 2.0, 1e-10);
        assert!((x - 2.0).abs() < 1e-9);
    }

    #[test]
    fn grid_includes_endpoints() {
        let (i, x, _) = grid_argmax(|x| x, 0.0, 2.0, 11);
        assert_eq!((i, x), (10, 2.0));
    }

    #[test]
    fn bracketed_handles_multiple_local_maxima() {
        // The global peak at 0.8 is narrower than the local one at 0.2.
        let f = |x: f64| (-(x - 0.2f64).powi(2) / 0.01).exp() + 1.5 * (-(x - 0.8f64).powi(2) / 0.001).exp();
        let (x, _) = maximize_bracketed(f, 0.0, 1.0, 200, 1e-10);
        assert!((x - 0.8).abs() < 1e-6);
    }
}
