use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_sigma, FitResult};
use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub t: f64,
    pub v: f64,
    pub sigma: f64,
}

/// Fits `v(t) = exp(-t / tau)` by weighted regression of `ln v` on `t`
/// through the origin (the envelope is pinned to 1 at t = 0). The weight of
/// each point is `(v / sigma)^2`, the propagated variance of `ln v`.
pub fn fit_envelope(samples: &[EnvelopeSample]) -> Result<FitResult> {
    if samples.len() < 4 {
        return Err(Error::invalid("samples", "need at least 4 samples"));
    }
    let (mut stt, mut sty) = (0.0, 0.0);
    for s in samples {
        ensure_finite("t", s.t)?;
        check_sigma(s.sigma)?;
        if !(s.v > 0.0 && s.v <= 1.0) {
            return Err(Error::invalid(
                "v",
                format!("visibility must be in (0, 1], got {}", s.v),
            ));
        }
        let w = (s.v / s.sigma).powi(2);
        stt += w * s.t * s.t;
        sty += w * s.t * s.v.ln();
    }
    if stt == 0.0 {
        return Err(Error::RankDeficient("all samples at t = 0".into()));
    }
    let rate = -sty / stt;
    if !(rate > 0.0) {
        return Err(Error::invalid("samples", "visibility does not decay"));
    }
    let tau = 1.0 / rate;
    let chi_square: f64 = samples
        .iter()
        .map(|s| ((s.v.ln() + rate * s.t) * s.v / s.sigma).powi(2))
        .sum();
    // var(rate) = 1 / stt, d tau / d rate = -tau^2
    let var_tau = tau.powi(4) / stt;
    FitResult::new(
        vec!["tau"],
        vec![tau],
        DMatrix::from_element(1, 1, var_tau),
        chi_square,
        samples.len(),
    )
}
