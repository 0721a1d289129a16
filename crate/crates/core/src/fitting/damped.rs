//! Damped-sinusoid fit of Ramsey fringes,
//!
//! ```text
//! p(t) = offset + (V0 / 2) exp(-t / tau) cos(2 pi delta t + phi)
//! ```
//!
//! Levenberg–Marquardt on all five parameters, started from the peak of the
//! discrete spectrum (delta, phi) and a regression of the log fringe
//! amplitude measured in consecutive time windows (tau, V0).

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::linear::weighted_lsq;
use super::{check_sigma, FitResult};
use crate::error::{ensure_finite, Error, Result};

const MAX_ITERATIONS: usize = 200;
const STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseySample {
    pub t: f64,
    pub p: f64,
    pub sigma: f64,
}

type Params = SVector<f64, 5>;

/// Evaluates the fit model.
pub fn damped_sinusoid(v0: f64, tau: f64, delta: f64, phi: f64, offset: f64, t: f64) -> f64 {
    offset + 0.5 * v0 * (-t / tau).exp() * (TAU * delta * t + phi).cos()
}

fn model(p: &Params, t: f64) -> f64 {
    damped_sinusoid(p[0], p[1], p[2], p[3], p[4], t)
}

fn gradient(p: &Params, t: f64) -> Params {
    let (v0, tau, delta, phi) = (p[0], p[1], p[2], p[3]);
    let e = (-t / tau).exp();
    let theta = TAU * delta * t + phi;
    let (s, c) = theta.sin_cos();
    Params::new(
        0.5 * e * c,
        0.5 * v0 * e * c * t / (tau * tau),
        -0.5 * v0 * e * s * TAU * t,
        -0.5 * v0 * e * s,
        1.0,
    )
}

fn chi_square(p: &Params, data: &[RamseySample]) -> f64 {
    data.iter().map(|s| ((s.p - model(p, s.t)) / s.sigma).powi(2)).sum()
}

fn validate(samples: &[RamseySample]) -> Result<Vec<RamseySample>> {
    if samples.len() < 10 {
        return Err(Error::invalid(
            "samples",
            format!("need at least 10 samples, got {}", samples.len()),
        ));
    }
    for s in samples {
        ensure_finite("t", s.t)?;
        ensure_finite("p", s.p)?;
        check_sigma(s.sigma)?;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(sorted)
}

/// Linear fit of `c + a cos(2 pi f t) + b sin(2 pi f t)` with the envelope
/// `exp(-t / tau)` multiplied into the oscillating columns.
fn project(data: &[RamseySample], freq: f64, tau: f64) -> Result<(f64, f64, f64)> {
    let n = data.len();
    let design = DMatrix::from_fn(n, 3, |i, j| {
        let t = data[i].t;
        let e = (-t / tau).exp();
        match j {
            0 => 1.0,
            1 => e * (TAU * freq * t).cos(),
            _ => e * (TAU * freq * t).sin(),
        }
    });
    let y = DVector::from_iterator(n, data.iter().map(|s| s.p));
    let sigma = DVector::from_iterator(n, data.iter().map(|s| s.sigma));
    let sol = weighted_lsq(&design, &y, &sigma)?;
    Ok((sol.params[0], sol.params[1], sol.params[2]))
}

fn initial_guess(data: &[RamseySample]) -> Result<Params> {
    let n = data.len();
    let t0 = data[0].t;
    let span = data[n - 1].t - t0;
    if !(span > 0.0) {
        return Err(Error::FrequencyAmbiguity("samples span zero time".into()));
    }
    let mut gaps: Vec<f64> = data.windows(2).map(|w| w[1].t - w[0].t).filter(|g| *g > 0.0).collect();
    gaps.sort_by(f64::total_cmp);
    let nyquist = 0.5 / gaps[gaps.len() / 2];

    let wsum: f64 = data.iter().map(|s| 1.0 / (s.sigma * s.sigma)).sum();
    let mean = data.iter().map(|s| s.p / (s.sigma * s.sigma)).sum::<f64>() / wsum;

    // Weighted periodogram on a 4x oversampled grid up to Nyquist.
    let step = 0.25 / span;
    let bins = (nyquist / step).floor() as usize;
    if bins < 2 {
        return Err(Error::FrequencyAmbiguity("too few samples per oscillation".into()));
    }
    let power = |f: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for s in data {
            let w = (s.p - mean) / (s.sigma * s.sigma);
            let (sn, cs) = (TAU * f * (s.t - t0)).sin_cos();
            re += w * cs;
            im += w * sn;
        }
        re * re + im * im
    };
    let spectrum: Vec<f64> = (0..=bins).map(|k| power(k as f64 * step)).collect();
    // skip the DC lobe
    let start = 4.min(bins);
    let (k, _) = spectrum[start..]
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let k = k + start;
    if k >= bins {
        return Err(Error::FrequencyAmbiguity(format!(
            "spectral peak at the Nyquist limit {nyquist} Hz"
        )));
    }
    let mut freq = k as f64 * step;
    if k > 0 {
        let (a, b, c) = (spectrum[k - 1], spectrum[k], spectrum[k + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            freq += 0.5 * (a - c) / denom * step;
        }
    }
    if freq * span < 1.0 {
        return Err(Error::FrequencyAmbiguity(format!(
            "samples cover {:.3} periods of the {freq:.4} Hz peak, need >= 1",
            freq * span
        )));
    }

    // Fringe amplitude in consecutive windows, each a few periods long.
    let periods = freq * span;
    let windows = ((periods / 2.0).floor() as usize).clamp(2, 8).min(n / 5).max(2);
    let width = span / windows as f64;
    let mut centers = Vec::new();
    let mut log_amp = Vec::new();
    for w in 0..windows {
        let lo = t0 + w as f64 * width;
        let hi = if w + 1 == windows { f64::INFINITY } else { lo + width };
        let chunk: Vec<RamseySample> = data.iter().copied().filter(|s| s.t >= lo && s.t < hi).collect();
        if chunk.len() < 4 {
            continue;
        }
        if let Ok((_, a, b)) = project(&chunk, freq, f64::INFINITY) {
            let amp = a.hypot(b);
            if amp > 0.0 {
                centers.push(chunk.iter().map(|s| s.t).sum::<f64>() / chunk.len() as f64);
                log_amp.push(amp.ln());
            }
        }
    }
    let (mut tau, mut v0) = (10.0 * span, None);
    if centers.len() >= 2 {
        let m = centers.len() as f64;
        let tx = centers.iter().sum::<f64>() / m;
        let ly = log_amp.iter().sum::<f64>() / m;
        let sxx: f64 = centers.iter().map(|t| (t - tx).powi(2)).sum();
        let sxy: f64 = centers.iter().zip(&log_amp).map(|(t, l)| (t - tx) * (l - ly)).sum();
        let slope = sxy / sxx;
        if slope < 0.0 && slope.is_finite() {
            tau = (-1.0 / slope).min(10.0 * span);
            v0 = Some(2.0 * (ly - slope * tx).exp());
        }
    }

    // Phase (and offset) from a global projection with the envelope in place.
    let (offset, a, b) = project(data, freq, tau)?;
    let amp = a.hypot(b);
    let phi = (-b).atan2(a);
    Ok(Params::new(v0.unwrap_or(2.0 * amp), tau, freq, phi, offset))
}

fn canonical(mut p: Params) -> Params {
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[3] += PI;
    }
    p[3] = (p[3] + PI).rem_euclid(TAU) - PI;
    p
}

/// Fits the damped sinusoid; parameters are named `V0`, `tau`, `delta`,
/// `phi`, `offset`. The covariance takes the sigmas as absolute.
pub fn fit_damped_sinusoid(samples: &[RamseySample]) -> Result<FitResult> {
    let data = validate(samples)?;
    let mut p = initial_guess(&data)?;
    let mut chi = chi_square(&p, &data);
    let mut lambda = 1e-3;
    let mut last_step = f64::INFINITY;
    let mut converged = false;

    for _ in 0..MAX_ITERATIONS {
        let mut jtj = SMatrix::<f64, 5, 5>::zeros();
        let mut jtr = Params::zeros();
        for s in &data {
            let w = 1.0 / (s.sigma * s.sigma);
            let g = gradient(&p, s.t);
            jtj += g * g.transpose() * w;
            jtr += g * ((s.p - model(&p, s.t)) * w);
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for i in 0..5 {
                damped[(i, i)] *= 1.0 + lambda;
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            if !(trial[1] > 0.0) {
                lambda *= 10.0;
                continue;
            }
            let trial_chi = chi_square(&trial, &data);
            if trial_chi <= chi {
                last_step = (0..5)
                    .map(|i| step[i].abs() / p[i].abs().max(if i == 3 || i == 4 { 1.0 } else { 1e-300 }))
                    .fold(0.0, f64::max);
                let improvement = chi - trial_chi;
                p = trial;
                chi = trial_chi;
                lambda = (lambda * 0.1).max(1e-12);
                accepted = true;
                if last_step < STEP_TOL || improvement <= 1e-15 * chi.max(f64::MIN_POSITIVE) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: already at the minimum
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailure {
            iterations: MAX_ITERATIONS,
            chi_square: chi,
            last_step,
        });
    }

    let p = canonical(p);
    let mut jtj = DMatrix::<f64>::zeros(5, 5);
    for s in &data {
        let g = gradient(&p, s.t);
        let g = DVector::from_column_slice(g.as_slice());
        jtj += &g * g.transpose() / (s.sigma * s.sigma);
    }
    let covariance = jtj
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("singular Jacobian at the solution".into()))?;
    FitResult::new(
        vec!["V0", "tau", "delta", "phi", "offset"],
        p.iter().copied().collect(),
        covariance,
        chi,
        data.len(),
    )
}

/// Samples the model at `times` with Gaussian noise of standard deviation
/// `noise_sigma` (recorded as each sample's sigma; 1 when noiseless).
pub fn synth_ramsey(params: [f64; 5], times: &[f64], noise_sigma: f64, seed: u64) -> Result<Vec<RamseySample>> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
    }
    let [v0, tau, delta, phi, offset] = params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
    Ok(times
        .iter()
        .map(|&t| {
            let clean = damped_sinusoid(v0, tau, delta, phi, offset, t);
            let noise = if noise_sigma > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            RamseySample {
                t,
                p: clean + noise,
                sigma: if noise_sigma > 0.0 { noise_sigma } else { 1.0 },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;

    const STATIC: [f64; 5] = [1.0, 0.206, 50.0, 0.0, 0.5];

    fn grid(n: usize, span: f64) -> Vec<f64> {
        (0..n).map(|i| span * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn noiseless_fixed_point() {
        let data = synth_ramsey(STATIC, &grid(100, 0.4), 0.0, 0).unwrap();
        let fit = fit_damped_sinusoid(&data).unwrap();
        for (name, truth) in fit.names.iter().zip(STATIC) {
            let v = fit.value(name).unwrap();
            let err = if truth == 0.0 { v.abs() } else { (v / truth - 1.0).abs() };
            assert!(err < 1e-6, "{name}: {v} vs {truth}");
        }
    }

    #[test]
    fn noiseless_with_phase_and_detuning() {
        let truth = [0.8, 0.205, 23.0, 1.1, 0.48];
        let data = synth_ramsey(truth, &grid(150, 0.5), 0.0, 0).unwrap();
        let fit = fit_damped_sinusoid(&data).unwrap();
        for (i, t) in truth.iter().enumerate() {
            assert!(
                (fit.values[i] / t - 1.0).abs() < 1e-6,
                "{}: {}",
                fit.names[i],
                fit.values[i]
            );
        }
    }

    #[test]
    fn time_origin_shift() {
        let t0 = 0.05;
        let data = synth_ramsey([1.0, 0.206, 50.0, 0.3, 0.5], &grid(100, 0.4), 0.05, 17).unwrap();
        let shifted: Vec<RamseySample> = data.iter().map(|s| RamseySample { t: s.t - t0, ..*s }).collect();
        let a = fit_damped_sinusoid(&data).unwrap();
        let b = fit_damped_sinusoid(&shifted).unwrap();
        let pa = Params::from_column_slice(&a.values);
        let pb = Params::from_column_slice(&b.values);
        for (sa, sb) in data.iter().zip(&shifted) {
            assert!((model(&pa, sa.t) - model(&pb, sb.t)).abs() < 1e-9);
        }
        let expected_phi = (a.values[3] + TAU * a.values[2] * t0 + PI).rem_euclid(TAU) - PI;
        assert!((b.values[3] - expected_phi).abs() < 1e-6);
        assert!((b.values[0] - a.values[0] * (-t0 / a.values[1]).exp()).abs() < 1e-7);
        assert!((a.chi_square - b.chi_square).abs() < 1e-9 * a.chi_square);
    }

    #[test]
    fn noisy_tau_coverage() {
        let times = grid(100, 0.4);
        let hits = Execution::Parallel
            .map_indices(100, |seed| {
                let data = synth_ramsey(STATIC, &times, 0.05, 500 + seed as u64).unwrap();
                let fit = fit_damped_sinusoid(&data).unwrap();
                (fit.value("tau").unwrap() - 0.206).abs() <= 3.0 * fit.std_error("tau").unwrap()
            })
            .into_iter()
            .filter(|&b| b)
            .count();
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn rejects_short_or_undersampled_records() {
        let few = synth_ramsey(STATIC, &grid(8, 0.4), 0.0, 0).unwrap();
        assert_eq!(fit_damped_sinusoid(&few).unwrap_err().code(), "invalid-argument");
        // less than one period of a 50 Hz fringe
        let short = synth_ramsey(STATIC, &grid(40, 0.015), 0.0, 0).unwrap();
        assert_eq!(fit_damped_sinusoid(&short).unwrap_err().code(), "frequency-ambiguity");
        let mut bad = synth_ramsey(STATIC, &grid(40, 0.4), 0.0, 0).unwrap();
        bad[3].sigma = -1.0;
        assert!(fit_damped_sinusoid(&bad).is_err());
    }
}
