use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::linear::weighted_lsq;
use super::{check_sigma, FitResult};
use crate::dls::TrapCoefficients;
use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DlsPoint {
    /// Signed depth, Hz.
    pub depth: f64,
    /// Measured shift, Hz.
    pub dls: f64,
    /// One-sigma uncertainty of `dls`, Hz.
    pub sigma: f64,
}

/// Shift-versus-depth measurements at one bias field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlsDataset {
    pub b_field: f64,
    pub points: Vec<DlsPoint>,
}

fn flatten(datasets: &[DlsDataset]) -> Result<Vec<(f64, DlsPoint)>> {
    let mut rows = Vec::new();
    for ds in datasets {
        ensure_finite("b_field", ds.b_field)?;
        for p in &ds.points {
            ensure_finite("depth", p.depth)?;
            ensure_finite("dls", p.dls)?;
            check_sigma(p.sigma)?;
            if p.depth > 0.0 {
                return Err(Error::SignConvention(p.depth));
            }
            rows.push((ds.b_field, *p));
        }
    }
    let mut fields: Vec<f64> = datasets
        .iter()
        .filter(|d| !d.points.is_empty())
        .map(|d| d.b_field)
        .collect();
    fields.sort_by(f64::total_cmp);
    fields.dedup();
    if fields.len() < 2 {
        return Err(Error::RankDeficient(format!(
            "need datasets at >= 2 distinct bias fields, got {}",
            fields.len()
        )));
    }
    if rows.len() < 3 {
        return Err(Error::invalid("points", "need at least 3 points in total"));
    }
    Ok(rows)
}

/// Global fit of beta2 and beta4 with beta1 held fixed. The model is linear
/// in the free coefficients:
///
/// ```text
/// dnu - beta1 U = beta2 (B U) + beta4 U^2
/// ```
pub fn fit_dls_global(datasets: &[DlsDataset], beta1_fixed: f64) -> Result<FitResult> {
    ensure_finite("beta1", beta1_fixed)?;
    let rows = flatten(datasets)?;
    let n = rows.len();
    let design = DMatrix::from_fn(n, 2, |i, j| {
        let (b, p) = rows[i];
        if j == 0 {
            b * p.depth
        } else {
            p.depth * p.depth
        }
    });
    let y = DVector::from_iterator(n, rows.iter().map(|(_, p)| p.dls - beta1_fixed * p.depth));
    let sigma = DVector::from_iterator(n, rows.iter().map(|(_, p)| p.sigma));
    let sol = weighted_lsq(&design, &y, &sigma)?;
    FitResult::new(
        vec!["beta2", "beta4"],
        sol.params.iter().copied().collect(),
        sol.covariance,
        sol.chi_square,
        n,
    )
}

/// Same model with beta1 also free, for sensitivity studies.
pub fn fit_dls_global_free_beta1(datasets: &[DlsDataset]) -> Result<FitResult> {
    let rows = flatten(datasets)?;
    let n = rows.len();
    let design = DMatrix::from_fn(n, 3, |i, j| {
        let (b, p) = rows[i];
        match j {
            0 => p.depth,
            1 => b * p.depth,
            _ => p.depth * p.depth,
        }
    });
    let y = DVector::from_iterator(n, rows.iter().map(|(_, p)| p.dls));
    let sigma = DVector::from_iterator(n, rows.iter().map(|(_, p)| p.sigma));
    let sol = weighted_lsq(&design, &y, &sigma)?;
    FitResult::new(
        vec!["beta1", "beta2", "beta4"],
        sol.params.iter().copied().collect(),
        sol.covariance,
        sol.chi_square,
        n,
    )
}

/// Magic depth implied by a fit at `b_field` and its first-order standard
/// error from the (beta2, beta4) covariance.
pub fn magic_depth_uncertainty(fit: &FitResult, beta1: f64, b_field: f64) -> Result<(f64, f64)> {
    let (Some(beta2), Some(beta4)) = (fit.value("beta2"), fit.value("beta4")) else {
        return Err(Error::invalid("fit", "needs beta2 and beta4"));
    };
    let i2 = fit.index("beta2").unwrap_or(0);
    let i4 = fit.index("beta4").unwrap_or(1);
    if !(beta4 > 0.0) {
        return Err(Error::NoMagicPoint(beta4));
    }
    let slope = beta1 + beta2 * b_field;
    let um = -slope / (2.0 * beta4);
    let d2 = -b_field / (2.0 * beta4);
    let d4 = slope / (2.0 * beta4 * beta4);
    let c = &fit.covariance;
    let var = d2 * d2 * c[(i2, i2)] + 2.0 * d2 * d4 * c[(i2, i4)] + d4 * d4 * c[(i4, i4)];
    Ok((um, var.max(0.0).sqrt()))
}

/// Model shifts at `depths` plus i.i.d. Gaussian noise.
pub fn synth_dls(
    coeffs: &TrapCoefficients,
    b_field: f64,
    depths: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<DlsDataset> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
    }
    let normal = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = if noise_sigma > 0.0 { noise_sigma } else { 1.0 };
    let points = depths
        .iter()
        .map(|&u| {
            let clean = crate::dls::dls(coeffs, b_field, u)?;
            let noise = if noise_sigma > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            Ok(DlsPoint {
                depth: u,
                dls: clean + noise,
                sigma,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DlsDataset { b_field, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dls::{magic_depth, BETA1_CIRCULAR};
    use crate::exec::Execution;

    const FIELDS: [f64; 4] = [2.8, 3.0, 3.115, 3.3];

    fn depths_n(n: usize) -> Vec<f64> {
        (1..=n).map(|i| -9e6 * i as f64 / n as f64).collect()
    }

    fn depths() -> Vec<f64> {
        depths_n(12)
    }

    fn scenario_n(noise: f64, seed: u64, n: usize) -> Vec<DlsDataset> {
        let c = TrapCoefficients::experimental();
        FIELDS
            .iter()
            .enumerate()
            .map(|(k, &b)| synth_dls(&c, b, &depths_n(n), noise, seed * 16 + k as u64).unwrap())
            .collect()
    }

    fn scenario(noise: f64, seed: u64) -> Vec<DlsDataset> {
        scenario_n(noise, seed, 12)
    }

    #[test]
    fn noiseless_recovery() {
        let fit = fit_dls_global(&scenario(0.0, 0), BETA1_CIRCULAR).unwrap();
        assert!((fit.value("beta2").unwrap() / -0.99e-4 - 1.0).abs() < 1e-9);
        assert!((fit.value("beta4").unwrap() / 4.6e-12 - 1.0).abs() < 1e-9);
        assert!(fit.chi_square < 1e-12);
        assert_eq!(fit.dof, 46);

        let free = fit_dls_global_free_beta1(&scenario(0.0, 0)).unwrap();
        assert!((free.value("beta1").unwrap() / BETA1_CIRCULAR - 1.0).abs() < 1e-8);
    }

    #[test]
    fn single_field_is_rejected() {
        let one = vec![scenario(0.0, 0).remove(0)];
        assert_eq!(
            fit_dls_global(&one, BETA1_CIRCULAR).unwrap_err().code(),
            "rank-deficient"
        );
        let mut dup = scenario(0.0, 0);
        for d in &mut dup {
            d.b_field = 3.0;
        }
        assert!(fit_dls_global(&dup, BETA1_CIRCULAR).is_err());
    }

    #[test]
    fn bad_inputs() {
        let mut ds = scenario(0.0, 0);
        ds[0].points[0].sigma = 0.0;
        assert!(fit_dls_global(&ds, BETA1_CIRCULAR).is_err());
        let mut ds = scenario(0.0, 0);
        ds[1].points[2].depth = 1.0;
        assert_eq!(
            fit_dls_global(&ds, BETA1_CIRCULAR).unwrap_err().code(),
            "sign-convention"
        );
        assert!(synth_dls(&TrapCoefficients::experimental(), 3.0, &[1.0], 0.0, 0).is_err());
    }

    #[test]
    fn synth_properties() {
        let c = TrapCoefficients::experimental();
        let clean = synth_dls(&c, 3.115, &depths(), 0.0, 1).unwrap();
        for p in &clean.points {
            assert_eq!(p.dls, crate::dls::dls(&c, 3.115, p.depth).unwrap());
        }
        let a = synth_dls(&c, 3.115, &depths(), 2.0, 5).unwrap();
        assert_eq!(a, synth_dls(&c, 3.115, &depths(), 2.0, 5).unwrap());

        let many: Vec<f64> = (0..1000).map(|i| -1e4 * i as f64).collect();
        let noisy = synth_dls(&c, 3.115, &many, 2.0, 9).unwrap();
        let var = noisy
            .points
            .iter()
            .map(|p| (p.dls - c.shift(3.115, p.depth)).powi(2))
            .sum::<f64>()
            / 1000.0;
        assert!((var / 4.0 - 1.0).abs() < 0.2, "{var}");
    }

    #[test]
    fn noisy_coverage() {
        let hits = Execution::Parallel
            .map_indices(100, |seed| {
                let fit = fit_dls_global(&scenario(2.0, seed as u64), BETA1_CIRCULAR).unwrap();
                let ok2 = (fit.value("beta2").unwrap() + 0.99e-4).abs() <= 3.0 * fit.std_error("beta2").unwrap();
                let ok4 = (fit.value("beta4").unwrap() - 4.6e-12).abs() <= 3.0 * fit.std_error("beta4").unwrap();
                ok2 && ok4
            })
            .into_iter()
            .filter(|&b| b)
            .count();
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn covariance_scales_with_noise_variance() {
        let var = |noise: f64| {
            let fits: Vec<f64> = (0..200)
                .map(|s| fit_dls_global(&scenario(noise, s), BETA1_CIRCULAR).unwrap().values[1])
                .collect();
            let m = fits.iter().sum::<f64>() / fits.len() as f64;
            fits.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (fits.len() - 1) as f64
        };
        let reported = |noise: f64| fit_dls_global(&scenario(noise, 0), BETA1_CIRCULAR).unwrap().covariance[(1, 1)];
        assert!((reported(4.0) / reported(2.0) / 4.0 - 1.0).abs() < 1e-9);
        // empirical scatter follows the same law within sampling error
        assert!((var(4.0) / var(2.0) / 4.0 - 1.0).abs() < 0.35);
    }

    #[test]
    fn chi_square_per_dof_is_typical() {
        let good = (0..100)
            .filter(|&s| {
                let r = fit_dls_global(&scenario_n(2.0, 1000 + s, 25), BETA1_CIRCULAR)
                    .unwrap()
                    .reduced_chi_square();
                (0.5..=1.5).contains(&r)
            })
            .count();
        assert!(good >= 90, "{good}");
    }

    #[test]
    fn magic_depth_propagation() {
        let fit = fit_dls_global(&scenario(2.0, 3), BETA1_CIRCULAR).unwrap();
        let (um, sd) = magic_depth_uncertainty(&fit, BETA1_CIRCULAR, 3.115).unwrap();
        let exact = magic_depth(&TrapCoefficients::experimental(), 3.115).unwrap();
        assert!(sd > 0.0);
        assert!((um - exact).abs() < 4.0 * sd);
    }
}
