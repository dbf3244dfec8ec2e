//! Log–log slope fits of error curves.

use serde::Serialize;

/// Errors at or below this are treated as round-off and left out of fits.
pub const NOISE_FLOOR: f64 = 1e-14;

/// Largest allowed deviation, in decades, of a point from the fitted line
/// within the asymptotic sub-range.
pub const LINEARITY_TOL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
    pub h_lo: f64,
    pub h_hi: f64,
    /// Largest |residual| in decades.
    pub max_residual: f64,
}

/// Ordinary least squares `y ≈ a + b x`; `None` with fewer than two distinct `x`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

fn usable(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut p: Vec<(f64, f64)> =
        points.iter().copied().filter(|&(h, e)| h > 0.0 && e.is_finite() && e > NOISE_FLOOR).collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    p
}

fn fit_sorted(p: &[(f64, f64)]) -> Option<Fit> {
    let xs: Vec<f64> = p.iter().map(|q| q.0.log10()).collect();
    let ys: Vec<f64> = p.iter().map(|q| q.1.log10()).collect();
    let (a, b) = least_squares(&xs, &ys)?;
    let max_residual = xs.iter().zip(&ys).map(|(x, y)| (y - a - b * x).abs()).fold(0.0, f64::max);
    Some(Fit { slope: b, intercept: a, n: p.len(), h_lo: p[0].0, h_hi: p[p.len() - 1].0, max_residual })
}

/// Slope of `log e` against `log h` over all usable points.
pub fn loglog_fit(points: &[(f64, f64)]) -> Option<Fit> {
    fit_sorted(&usable(points))
}

/// Fit over the longest run of consecutive step sizes (at least three) that
/// lies on a straight line to within [`LINEARITY_TOL`]; ties go to the
/// smaller step sizes.
pub fn asymptotic_fit(points: &[(f64, f64)]) -> Option<Fit> {
    let p = usable(points);
    let n = p.len();
    for len in (3..=n).rev() {
        for start in 0..=n - len {
            if let Some(f) = fit_sorted(&p[start..start + len]) {
                if f.max_residual <= LINEARITY_TOL {
                    return Some(f);
                }
            }
        }
    }
    None
}
