//! Finite-grid proxies for limits.
//!
//! A statement like "`v_j → 0`" cannot be decided from finitely many samples;
//! these helpers operationalise it as a final value below a tolerance plus a
//! non-increasing tail window. Differences smaller than a slack are treated as
//! ties so quadrature noise around zero does not break the monotonicity test.

/// Length of the tail window inspected by the trend tests.
pub const TAIL_WINDOW: usize = 4;

/// Fraction of the tolerance used as tie slack in the tail window.
pub const SLACK_FRACTION: f64 = 1e-2;

/// Index of the first pair in the last `window` values where the sequence
/// increases by more than `slack`, or `None` when the tail is non-increasing.
pub fn tail_increase(values: &[f64], window: usize, slack: f64) -> Option<usize> {
    let start = values.len().saturating_sub(window);
    (start..values.len().saturating_sub(1)).find(|&i| values[i + 1] > values[i] + slack)
}

/// Same as [`tail_increase`] for non-decreasing tails.
pub fn tail_decrease(values: &[f64], window: usize, slack: f64) -> Option<usize> {
    let start = values.len().saturating_sub(window);
    (start..values.len().saturating_sub(1)).find(|&i| values[i + 1] < values[i] - slack)
}

/// `values → 0`: last value below `tol` and a non-increasing tail window.
pub fn tends_to_zero(values: &[f64], tol: f64) -> bool {
    match values.last() {
        Some(&last) => last < tol && tail_increase(values, TAIL_WINDOW, tol * SLACK_FRACTION).is_none(),
        None => false,
    }
}

/// Scale-free decay: non-increasing tail and either the last value is at most
/// `ratio` times the first, or it is already below `floor`.
pub fn decays_relative(values: &[f64], ratio: f64, floor: f64) -> bool {
    let (Some(&first), Some(&last)) = (values.first(), values.last()) else {
        return false;
    };
    let slack = (floor * SLACK_FRACTION).max(first.abs() * 1e-12);
    let shrank = last < floor || last <= ratio * first;
    shrank && tail_increase(values, TAIL_WINDOW, slack).is_none()
}

/// Ordinary least-squares fit `y = intercept + slope x`; returns the slope and
/// its standard error (zero for exact fits or two points).
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let stderr = if n > 2 {
        let intercept = my - slope * mx;
        let ssr: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - intercept - slope * x;
                r * r
            })
            .sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, stderr))
}
