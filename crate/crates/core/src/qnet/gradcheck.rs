//! Central finite-difference check of [`QNet::backward`].

use super::{QNet, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

fn relative_error(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-9 {
        0.0
    } else {
        (a - n).abs() / scale
    }
}

/// Compares analytic gradients of `L = Σ dq · Q` against central
/// differences with step `h`, evaluated in `f64`.
///
/// The network is piecewise linear, so a central difference is exact unless
/// a perturbation crosses a rectifier or pooling boundary. When that happens
/// for a parameter the step is shrunk (down to `h / 1e4`) and the smallest
/// error seen is kept.
pub fn gradient_check(net: &QNet, params: &[f64], batch: &[f64], batch_size: usize, dq: &[f64], h: f64) -> Result<GradCheckReport> {
    let (_, cache) = net.forward(params, batch, batch_size)?;
    let grads = net.backward(params, &cache, dq)?;
    let loss = |p: &[f64]| -> Result<f64> {
        let q = net.predict(p, batch, batch_size)?;
        Ok(q.iter().zip(dq).map(|(a, b)| a * b).sum())
    };
    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: params.len(),
    };
    for i in 0..params.len() {
        let analytic = grads.values[i];
        let mut best = (f64::INFINITY, 0.0);
        let mut step = h;
        while step >= h * 1e-4 {
            work[i] = params[i] + step;
            let up = loss(&work)?;
            work[i] = params[i] - step;
            let down = loss(&work)?;
            work[i] = params[i];
            let numeric = (up - down) / (2.0 * step);
            let err = relative_error(analytic, numeric);
            if err < best.0 {
                best = (err, numeric);
            }
            if err < 1e-6 {
                break;
            }
            step /= 10.0;
        }
        if best.0 > report.max_rel_error {
            report.max_rel_error = best.0;
            report.worst_index = i;
            report.analytic = analytic;
            report.numeric = best.1;
        }
    }
    Ok(report)
}
