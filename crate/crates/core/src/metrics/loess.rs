use crate::error::{Error, Result};

/// Local linear regression with tricube weights, evaluated at every `x`.
///
/// The neighbourhood of each point holds the `ceil(span * n)` nearest
/// points; the bandwidth is the distance to the farthest of them.
pub fn loess_smooth(x: &[f64], y: &[f64], span: f64) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 5 {
        return Err(Error::TooFewValues { needed: 5, got: n });
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::invalid("span", format!("must lie in (0, 1], got {span}")));
    }
    let q = ((span * n as f64).ceil() as usize).clamp(3, n);

    let mut distances = vec![0.0; n];
    Ok((0..n)
        .map(|i| {
            for (d, xj) in distances.iter_mut().zip(x) {
                *d = (xj - x[i]).abs();
            }
            let mut sorted = distances.clone();
            sorted.sort_by(f64::total_cmp);
            // Widen slightly so the q-th neighbour keeps a small positive weight.
            let h = sorted[q - 1] * (1.0 + 1e-9) + f64::MIN_POSITIVE;
            let weights: Vec<f64> = distances.iter().map(|d| tricube(d / h)).collect();
            local_linear(x, y, &weights, x[i])
        })
        .collect())
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let c = 1.0 - u * u * u;
        c * c * c
    }
}

fn local_linear(x: &[f64], y: &[f64], w: &[f64], at: f64) -> f64 {
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for ((wi, xi), yi) in w.iter().zip(x).zip(y) {
        sxy += wi * (xi - mx) * (yi - my);
        sxx += wi * (xi - mx) * (xi - mx);
    }
    if sxx <= 1e-300 {
        my
    } else {
        my + sxy / sxx * (at - mx)
    }
}
