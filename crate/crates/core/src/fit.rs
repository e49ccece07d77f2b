//! Least-squares line fits for scaling exponents.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Ordinary least squares `y = slope * x + intercept`; `None` below two points
/// or when all `x` coincide.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(y).take(n) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        n_points: n,
    })
}

/// Fit of `ln y` against `ln x`; non-positive points are skipped.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(&a, &b)| a > 0.0 && b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    linear_fit(&lx, &ly)
}

/// Abscissae where two piecewise-linear curves cross over their common
/// range, ascending. Both curves must be sorted by `x`.
pub fn curve_crossings(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Vec::new();
    }
    let lo = a[0].0.max(b[0].0);
    let hi = a[a.len() - 1].0.min(b[b.len() - 1].0);
    if lo >= hi {
        return Vec::new();
    }
    let mut xs: Vec<f64> = a
        .iter()
        .chain(b)
        .map(|p| p.0)
        .filter(|&x| x >= lo && x <= hi)
        .collect();
    xs.push(lo);
    xs.push(hi);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let diff: Vec<f64> = xs
        .iter()
        .map(|&x| interpolate(a, x) - interpolate(b, x))
        .collect();
    let mut out = Vec::new();
    for k in 0..xs.len() {
        if diff[k] == 0.0 {
            out.push(xs[k]);
        } else if k + 1 < xs.len() && diff[k + 1] != 0.0 && diff[k].signum() != diff[k + 1].signum()
        {
            let t = diff[k] / (diff[k] - diff[k + 1]);
            out.push(xs[k] + t * (xs[k + 1] - xs[k]));
        }
    }
    out
}

/// Linear interpolation on a sorted curve; `x` inside its range.
fn interpolate(curve: &[(f64, f64)], x: f64) -> f64 {
    let k = curve.partition_point(|p| p.0 < x);
    if k == 0 {
        return curve[0].1;
    }
    if k == curve.len() {
        return curve[k - 1].1;
    }
    let (x0, y0) = curve[k - 1];
    let (x1, y1) = curve[k];
    if x1 == x0 {
        return y1;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        let fit = log_log_fit(&x, &y).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossings_of_two_polylines() {
        let a = [(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)];
        let b = [(0.5, 0.25), (2.5, 0.25)];
        let x = curve_crossings(&a, &b);
        assert_eq!(x.len(), 1);
        assert!((x[0] - 1.75).abs() < 1e-15);
        let level = [(0.0, 0.5), (2.0, 0.5)];
        let x = curve_crossings(&a, &level);
        assert_eq!(x.len(), 2);
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 1.5).abs() < 1e-15);
        assert!(curve_crossings(&a, &[(3.0, 0.0), (4.0, 1.0)]).is_empty());
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[1.0], &[2.0]).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }
}
