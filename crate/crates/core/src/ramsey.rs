//! Thermally averaged Ramsey signal of an atom ensemble in a trap operated
//! near its magic depth.
//!
//! An atom of total energy `E` samples the mean depth `U(E) = U0 + E/2`
//! (harmonic approximation), with `U0 = U_a - 3 kB T / 2` the depth at the
//! trap bottom. Its clock shift is the full parabola `dls(B, U(E))`; the
//! ensemble signal is that single-atom fringe averaged over the Boltzmann
//! energy law truncated at `|U0|`.
//!
//! All integrals are done in the reduced energy `x = E / (kB T / h)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dls::{dls, dls_minimum, magic_depth, TrapCoefficients};
use crate::error::{ensure_finite, Error, Result};
use crate::exec::Execution;
use crate::quadrature::{integrate, QuadratureOptions};
use crate::thermal::{gamma3_cdf, gamma3_density, ThermalEnsemble, SAMPLE_CHUNK};
use crate::units::thermal_hz;

/// Beyond this many kB T the Gamma(3) tail mass is below 1e-60.
const REDUCED_ENERGY_CAP: f64 = 160.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapFieldConfig {
    pub coeffs: TrapCoefficients,
    /// G
    pub b_field: f64,
    /// Thermally averaged depth `U_a`, Hz, <= 0.
    pub mean_depth: f64,
    /// K
    pub temperature: f64,
    /// Free-space detuning of the Ramsey pulses, Hz.
    #[serde(default)]
    pub detuning: f64,
}

impl TrapFieldConfig {
    /// Config sitting exactly at the magic depth for `b_field`.
    pub fn at_magic(coeffs: TrapCoefficients, b_field: f64, temperature: f64) -> Result<Self> {
        Ok(TrapFieldConfig {
            coeffs,
            b_field,
            mean_depth: magic_depth(&coeffs, b_field)?,
            temperature,
            detuning: 0.0,
        })
    }

    pub fn with_depth_ratio(&self, ratio: f64) -> Result<Self> {
        let um = magic_depth(&self.coeffs, self.b_field)?;
        Ok(TrapFieldConfig {
            mean_depth: ratio * um,
            ..*self
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.coeffs.validate()?;
        ensure_finite("b_field", self.b_field)?;
        ensure_finite("detuning", self.detuning)?;
        if self.b_field < 0.0 {
            return Err(Error::invalid("b_field", "must be >= 0 G"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(
                "temperature",
                format!("must be finite and > 0 K, got {}", self.temperature),
            ));
        }
        bottom_depth(self.mean_depth, self.temperature)?;
        Ok(())
    }

    pub fn bottom_depth(&self) -> Result<f64> {
        bottom_depth(self.mean_depth, self.temperature)
    }

    /// Energy distribution of the atoms, truncated at `|U0|`.
    pub fn ensemble(&self) -> Result<ThermalEnsemble> {
        ThermalEnsemble::new(self.temperature, self.bottom_depth()?.abs())
    }
}

/// Depth at the trap minimum, `U0 = U_a - 3 kB T / (2h)`.
pub fn bottom_depth(mean_depth: f64, temperature: f64) -> Result<f64> {
    let ua = ensure_finite("mean_depth", mean_depth)?;
    if ua > 0.0 {
        return Err(Error::SignConvention(ua));
    }
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(Error::invalid("temperature", "must be finite and >= 0 K"));
    }
    let u0 = ua - 1.5 * thermal_hz(temperature);
    if u0 >= 0.0 {
        return Err(Error::Unphysical(format!("bottom depth {u0} Hz is not a bound trap")));
    }
    Ok(u0)
}

/// Mean depth sampled by an atom of energy `energy` (Hz).
pub fn local_depth(bottom: f64, energy: f64) -> Result<f64> {
    let u0 = ensure_finite("bottom_depth", bottom)?;
    if u0 > 0.0 {
        return Err(Error::SignConvention(u0));
    }
    if !(energy >= 0.0 && energy <= u0.abs()) {
        return Err(Error::OutOfRange {
            value: energy,
            lo: 0.0,
            hi: u0.abs(),
        });
    }
    Ok(u0 + 0.5 * energy)
}

/// Shift of an atom with energy `energy` relative to the vertex value, for an
/// ensemble held exactly at the magic depth.
pub fn residual_shift(coeffs: &TrapCoefficients, temperature: f64, energy: f64) -> Result<f64> {
    if !(energy >= 0.0) {
        return Err(Error::invalid("energy", "must be >= 0"));
    }
    let d = 0.5 * (energy - 3.0 * thermal_hz(temperature));
    Ok(coeffs.beta4 * d * d)
}

/// Combined Ramsey decay time, `1/tau = 1/T1 + 1/T2' + 1/T2*`.
pub fn combine_coherence(t1: f64, t2_prime: f64, t2_star: f64) -> Result<f64> {
    let mut rate = 0.0;
    for (name, t) in [("t1", t1), ("t2_prime", t2_prime), ("t2_star", t2_star)] {
        if !(t > 0.0) {
            return Err(Error::invalid(name, format!("must be > 0 s, got {t}")));
        }
        rate += 1.0 / t;
    }
    Ok(1.0 / rate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamseyOptions {
    /// Divide by the truncated mass so the thermal weights sum to one.
    /// When false the untruncated density is integrated up to `|U0|` as is.
    pub renormalize: bool,
    pub quadrature: QuadratureOptions,
    /// Largest free-evolution time searched by [`Ramsey::t2_star`], s.
    pub horizon: f64,
    /// Relative bracket width at which the 1/e search stops.
    pub t2_rel_tol: f64,
}

impl Default for RamseyOptions {
    fn default() -> Self {
        RamseyOptions {
            renormalize: true,
            quadrature: QuadratureOptions::default(),
            horizon: 1e4,
            t2_rel_tol: 1e-4,
        }
    }
}

/// Evaluator for thermally averaged signals with fixed numerical options.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ramsey {
    pub options: RamseyOptions,
}

/// Per-config quantities shared by the integrals.
struct Prepared {
    coeffs: TrapCoefficients,
    b_field: f64,
    bottom: f64,
    kt: f64,
    upper: f64,
    weight: f64,
    reference: f64,
}

impl Prepared {
    fn new(cfg: &TrapFieldConfig, renormalize: bool) -> Result<Self> {
        cfg.validate()?;
        let bottom = cfg.bottom_depth()?;
        let kt = thermal_hz(cfg.temperature);
        let trunc = bottom.abs() / kt;
        let upper = trunc.min(REDUCED_ENERGY_CAP);
        let mass = gamma3_cdf(trunc);
        let weight = if renormalize { 1.0 / mass } else { 1.0 };
        // Shift of the mean-energy atom, factored out of the oscillating phase.
        let x_ref = 3.0f64.min(0.5 * upper);
        let reference = cfg.coeffs.shift(cfg.b_field, bottom + 0.5 * x_ref * kt);
        Ok(Prepared {
            coeffs: cfg.coeffs,
            b_field: cfg.b_field,
            bottom,
            kt,
            upper,
            weight,
            reference,
        })
    }

    #[inline]
    fn shift_at(&self, x: f64) -> f64 {
        self.coeffs.shift(self.b_field, self.bottom + 0.5 * x * self.kt)
    }

    /// Largest |shift - reference| over the integration domain.
    fn spread(&self) -> f64 {
        let mut worst = (self.shift_at(0.0) - self.reference)
            .abs()
            .max((self.shift_at(self.upper) - self.reference).abs());
        if self.coeffs.beta4 > 0.0 {
            let um = -self.coeffs.linear_slope(self.b_field) / (2.0 * self.coeffs.beta4);
            let xv = 2.0 * (um - self.bottom) / self.kt;
            if xv > 0.0 && xv < self.upper {
                worst = worst.max((self.shift_at(xv) - self.reference).abs());
            }
        }
        worst
    }
}

impl Ramsey {
    pub fn new(options: RamseyOptions) -> Self {
        Ramsey { options }
    }

    /// Thermal average of `exp(i 2 pi (dnu(E) - ref) t)` together with `ref`
    /// and the weighted mass of the domain.
    fn characteristic(&self, p: &Prepared, t: f64) -> Result<(Complex64, f64)> {
        let mass = gamma3_cdf(p.upper) * p.weight;
        if t == 0.0 {
            return Ok((Complex64::new(mass, 0.0), mass));
        }
        let cycles = p.spread() * t;
        let mut opts = self.options.quadrature;
        opts.initial_pieces = opts.initial_pieces.max((cycles.ceil() as usize).clamp(1, 8192));
        let omega = TAU * t;
        let est = integrate(
            |x| {
                let phase = omega * (p.shift_at(x) - p.reference);
                Complex64::from_polar(gamma3_density(x), phase)
            },
            0.0,
            p.upper,
            &opts,
        )?;
        Ok((est.value * p.weight, mass))
    }

    /// Population of the initial qubit state after a Ramsey sequence with
    /// free evolution `t` seconds.
    pub fn population(&self, cfg: &TrapFieldConfig, t: f64) -> Result<f64> {
        check_time(t)?;
        let p = Prepared::new(cfg, self.options.renormalize)?;
        let (phi, mass) = self.characteristic(&p, t)?;
        let carrier = Complex64::from_polar(1.0, TAU * (cfg.detuning + p.reference) * t);
        Ok((0.5 * (mass + (carrier * phi).re)).clamp(0.0, 1.0))
    }

    /// Fringe amplitude: modulus of the thermal dephasing characteristic
    /// function. Independent of the pulse detuning.
    pub fn visibility(&self, cfg: &TrapFieldConfig, t: f64) -> Result<f64> {
        check_time(t)?;
        let p = Prepared::new(cfg, self.options.renormalize)?;
        let (phi, _) = self.characteristic(&p, t)?;
        Ok(phi.norm().min(1.0))
    }

    /// First 1/e crossing of [`Ramsey::visibility`]; `f64::INFINITY` when
    /// the envelope stays above 1/e up to the horizon.
    pub fn t2_star(&self, cfg: &TrapFieldConfig) -> Result<f64> {
        let p = Prepared::new(cfg, self.options.renormalize)?;
        let target = (-1.0f64).exp();
        let excess = |t: f64| -> Result<f64> { Ok(self.characteristic(&p, t)?.0.norm() - target) };

        let mut hi = 1e-3;
        if excess(hi)? <= 0.0 {
            while excess(hi)? <= 0.0 {
                hi *= 0.5;
                if hi < 1e-12 {
                    return Ok(0.0);
                }
            }
            hi *= 2.0;
        } else {
            while excess(hi)? > 0.0 {
                if hi > self.options.horizon {
                    return Ok(f64::INFINITY);
                }
                hi *= 2.0;
            }
        }
        let mut lo = 0.5 * hi;
        while hi - lo > self.options.t2_rel_tol * lo {
            let mid = 0.5 * (lo + hi);
            if excess(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn trace(&self, cfg: &TrapFieldConfig, times: &[f64], exec: Execution) -> Result<RamseyTrace> {
        let population = exec
            .map(times, |&t| self.population(cfg, t))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(RamseyTrace {
            times: times.to_vec(),
            population,
            config: *cfg,
        })
    }

    pub fn visibility_curve(&self, cfg: &TrapFieldConfig, times: &[f64], exec: Execution) -> Result<VisibilityCurve> {
        let visibility = exec
            .map(times, |&t| self.visibility(cfg, t))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(VisibilityCurve {
            times: times.to_vec(),
            visibility,
        })
    }

    /// Coherence time against `U_a / U_M`, combining the computed T2* with
    /// fixed T1 and T2'.
    pub fn coherence_vs_depth(
        &self,
        base: &TrapFieldConfig,
        ratios: &[f64],
        t1: f64,
        t2_prime: f64,
        exec: Execution,
    ) -> Result<Vec<CoherencePoint>> {
        magic_depth(&base.coeffs, base.b_field)?;
        if let Some(&r) = ratios.iter().find(|r| !(**r > 0.0)) {
            return Err(Error::invalid("ratio", format!("must be > 0, got {r}")));
        }
        exec.map(ratios, |&ratio| {
            let cfg = base.with_depth_ratio(ratio)?;
            let t2_star = self.t2_star(&cfg)?;
            Ok(CoherencePoint {
                ratio,
                t2_star,
                tau: combine_coherence(t1, t2_prime, t2_star)?,
            })
        })
        .into_iter()
        .collect()
    }

    /// Monte Carlo estimate of [`Ramsey::population`] from `n` sampled
    /// energies; returns (mean, standard error). Always uses the
    /// renormalized truncated law.
    pub fn monte_carlo_population(
        &self,
        cfg: &TrapFieldConfig,
        t: f64,
        n: usize,
        seed: u64,
        exec: Execution,
    ) -> Result<(f64, f64)> {
        check_time(t)?;
        cfg.validate()?;
        if n < 2 {
            return Err(Error::invalid("n", "need at least 2 samples"));
        }
        let ens = cfg.ensemble()?;
        let bottom = cfg.bottom_depth()?;
        let chunks = n.div_ceil(SAMPLE_CHUNK);
        let sums = exec.map_indices(chunks, |k| {
            let len = SAMPLE_CHUNK.min(n - k * SAMPLE_CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            ens.fill_chunk(seed, k as u64, len, |e| {
                let u = bottom + 0.5 * e;
                let shift = cfg.coeffs.shift(cfg.b_field, u);
                let p = 0.5 + 0.5 * (TAU * (cfg.detuning + shift) * t).cos();
                s += p;
                s2 += p * p;
            });
            (s, s2)
        });
        let (s, s2) = sums.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let nf = n as f64;
        let mean = s / nf;
        let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
        Ok((mean, (var / nf).sqrt()))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("t", format!("must be finite and >= 0 s, got {t}")))
    }
}

pub fn ramsey_population(cfg: &TrapFieldConfig, t: f64) -> Result<f64> {
    Ramsey::default().population(cfg, t)
}

pub fn visibility(cfg: &TrapFieldConfig, t: f64) -> Result<f64> {
    Ramsey::default().visibility(cfg, t)
}

pub fn t2_star(cfg: &TrapFieldConfig) -> Result<f64> {
    Ramsey::default().t2_star(cfg)
}

pub fn coherence_vs_depth(
    base: &TrapFieldConfig,
    ratios: &[f64],
    t1: f64,
    t2_prime: f64,
) -> Result<Vec<CoherencePoint>> {
    Ramsey::default().coherence_vs_depth(base, ratios, t1, t2_prime, Execution::default())
}

/// Single-atom fringe `1/2 + cos(2 pi (delta + dnu) t) / 2`.
pub fn single_atom_population(cfg: &TrapFieldConfig, depth: f64, t: f64) -> Result<f64> {
    let shift = dls(&cfg.coeffs, cfg.b_field, depth)?;
    Ok(0.5 + 0.5 * (2.0 * PI * (cfg.detuning + shift) * t).cos())
}

/// Shift of an atom of energy `energy` in a magic-depth ensemble, expanded
/// about the vertex: `dnu_M + beta4 ((E - 3 kB T)/2)^2`.
pub fn vertex_expansion(cfg: &TrapFieldConfig, energy: f64) -> Result<f64> {
    Ok(dls_minimum(&cfg.coeffs, cfg.b_field)? + residual_shift(&cfg.coeffs, cfg.temperature, energy)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamseyTrace {
    pub times: Vec<f64>,
    pub population: Vec<f64>,
    pub config: TrapFieldConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityCurve {
    pub times: Vec<f64>,
    pub visibility: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherencePoint {
    pub ratio: f64,
    pub t2_star: f64,
    pub tau: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::hz_from_kelvin;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const B0: f64 = 3.115;

    fn magic(temp: f64) -> TrapFieldConfig {
        TrapFieldConfig::at_magic(TrapCoefficients::experimental(), B0, temp).unwrap()
    }

    #[test]
    fn bottom_depth_examples() {
        assert_relative_eq!(bottom_depth(-4.1973e6, 17e-6).unwrap(), -4.7286e6, max_relative = 1e-4);
        assert_eq!(bottom_depth(-4.1973e6, 0.0).unwrap(), -4.1973e6);
        let a = bottom_depth(-1e6, 10e-6).unwrap() + 1e6;
        let b = bottom_depth(-1e6, 20e-6).unwrap() + 1e6;
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-14);
        assert_eq!(bottom_depth(0.0, 0.0).unwrap_err().code(), "unphysical-configuration");
        assert!(bottom_depth(1.0, 1e-6).is_err());
    }

    #[test]
    fn local_depth_examples() {
        let u0 = bottom_depth(-4.197_282_6e6, 17e-6).unwrap();
        assert_eq!(local_depth(u0, 0.0).unwrap(), u0);
        let e = 3.0 * hz_from_kelvin(17e-6).unwrap();
        assert_relative_eq!(local_depth(u0, e).unwrap(), -4.197_282_6e6, max_relative = 1e-12);
        assert_eq!(local_depth(u0, u0.abs()).unwrap(), u0 / 2.0);
        assert_eq!(local_depth(u0, -1.0).unwrap_err().code(), "out-of-range");
        assert!(local_depth(u0, 2.0 * u0.abs()).is_err());
    }

    #[test]
    fn residual_shift_examples() {
        let c = TrapCoefficients::experimental();
        let kt = hz_from_kelvin(17e-6).unwrap();
        assert_eq!(residual_shift(&c, 17e-6, 3.0 * kt).unwrap(), 0.0);
        assert_relative_eq!(residual_shift(&c, 17e-6, 0.0).unwrap(), 1.2987, max_relative = 1e-3);

        let cfg = magic(17e-6);
        let u0 = cfg.bottom_depth().unwrap();
        let vmin = dls_minimum(&c, B0).unwrap();
        for e in [0.0, 0.3 * kt, 2.0 * kt, 7.5 * kt, 12.0 * kt] {
            let full = dls(&c, B0, local_depth(u0, e).unwrap()).unwrap() - vmin;
            let r = residual_shift(&c, 17e-6, e).unwrap();
            assert!((full - r).abs() <= 1e-9 * r.abs().max(vmin.abs()), "{e}: {full} vs {r}");
            assert_relative_eq!(vertex_expansion(&cfg, e).unwrap(), vmin + r, max_relative = 1e-15);
        }
    }

    #[test]
    fn combine_examples() {
        assert_relative_eq!(
            combine_coherence(4.0, 0.3, 1.5).unwrap(),
            0.235_294_1,
            max_relative = 1e-6
        );
        assert_eq!(combine_coherence(f64::INFINITY, f64::INFINITY, 0.7).unwrap(), 0.7);
        assert_relative_eq!(
            combine_coherence(4.0, 0.3, 6.6).unwrap(),
            0.267_748_5,
            max_relative = 1e-6
        );
        assert!(combine_coherence(0.0, 1.0, 1.0).is_err());
        assert!(combine_coherence(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn population_at_zero_time() {
        let cfg = magic(17e-6);
        assert_eq!(ramsey_population(&cfg, 0.0).unwrap(), 1.0);
        assert_eq!(visibility(&cfg, 0.0).unwrap(), 1.0);
        assert!(ramsey_population(&cfg, -1.0).is_err());
    }

    #[test]
    fn cold_limit_is_single_atom_fringe() {
        let mut cfg = magic(1e-9);
        cfg.detuning = 37.0;
        let u0 = cfg.bottom_depth().unwrap();
        for t in [0.013, 0.1, 0.77] {
            let expect = single_atom_population(&cfg, u0, t).unwrap();
            assert!((ramsey_population(&cfg, t).unwrap() - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn literal_integral_differs_by_missing_mass() {
        let mut cfg = magic(17e-6);
        cfg.mean_depth *= 0.2;
        let literal = Ramsey::new(RamseyOptions {
            renormalize: false,
            ..Default::default()
        });
        let mass = cfg.ensemble().unwrap().truncation_mass();
        assert!(mass < 1.0 - 1e-4);
        assert_relative_eq!(literal.population(&cfg, 0.0).unwrap(), mass, max_relative = 1e-12);
        assert_relative_eq!(
            literal.visibility(&cfg, 0.05).unwrap(),
            mass * visibility(&cfg, 0.05).unwrap(),
            max_relative = 1e-7
        );
    }

    #[test]
    fn magic_t2_star_near_quoted_values() {
        for (temp, quoted) in [(17e-6, 1.5), (8e-6, 6.6), (16e-6, 1.9)] {
            let t2 = t2_star(&magic(temp)).unwrap();
            assert!((t2 / quoted - 1.0).abs() <= 0.3, "{temp}: {t2}");
            let v = visibility(&magic(temp), t2).unwrap();
            assert!((v - (-1.0f64).exp()).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_temperature_never_dephases() {
        assert_eq!(t2_star(&magic(1e-9)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn curve_policies_agree() {
        let ratios: Vec<f64> = (0..7).map(|i| 0.7 + 0.1 * i as f64).collect();
        let r = Ramsey::default();
        let par = r
            .coherence_vs_depth(&magic(17e-6), &ratios, 4.0, 0.3, Execution::Parallel)
            .unwrap();
        let seq = r
            .coherence_vs_depth(&magic(17e-6), &ratios, 4.0, 0.3, Execution::Sequential)
            .unwrap();
        assert_eq!(par, seq);
        let at_one = par.iter().find(|p| (p.ratio - 1.0).abs() < 1e-12).unwrap();
        assert_relative_eq!(at_one.tau, 0.23, max_relative = 0.05);
        assert!(r
            .coherence_vs_depth(&magic(17e-6), &[0.0], 4.0, 0.3, Execution::Sequential)
            .is_err());
    }

    #[test]
    fn cold_ensemble_peaks_at_magic_ratio() {
        // The optimum sits about kB T / (2 |U_M|) below ratio 1, which is
        // inside half a grid step only for cold ensembles.
        let ratios: Vec<f64> = (0..=20).map(|i| 0.5 + 0.05 * i as f64).collect();
        let pts = coherence_vs_depth(&magic(1e-6), &ratios, 4.0, 0.3).unwrap();
        let best = pts.iter().max_by(|a, b| a.t2_star.total_cmp(&b.t2_star)).unwrap();
        assert!((best.ratio - 1.0).abs() < 1e-9, "{best:?}");
    }

    #[test]
    fn monte_carlo_matches_quadrature() {
        let cfg = TrapFieldConfig {
            detuning: 3.0,
            ..magic(17e-6).with_depth_ratio(0.9).unwrap()
        };
        let q = ramsey_population(&cfg, 0.1).unwrap();
        let (mc, se) = Ramsey::default()
            .monte_carlo_population(&cfg, 0.1, 200_000, 11, Execution::default())
            .unwrap();
        assert!((q - mc).abs() < 4.0 * se, "{q} vs {mc} +- {se}");
    }

    fn config_strategy() -> impl Strategy<Value = TrapFieldConfig> {
        (3e-6f64..40e-6, 0.6f64..1.4, -20.0f64..20.0).prop_map(|(temp, r, det)| TrapFieldConfig {
            detuning: det,
            ..magic(temp).with_depth_ratio(r).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn population_bounded_by_envelope(cfg in config_strategy(), t in 0.0f64..2.0) {
            let p = ramsey_population(&cfg, t).unwrap();
            let v = visibility(&cfg, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(v <= 1.0);
            prop_assert!((p - 0.5).abs() <= 0.5 * v + 1e-9);
        }

        #[test]
        fn envelope_ignores_detuning(cfg in config_strategy(), t in 0.0f64..2.0) {
            let a = visibility(&TrapFieldConfig { detuning: 0.0, ..cfg }, t).unwrap();
            let b = visibility(&TrapFieldConfig { detuning: 100.0, ..cfg }, t).unwrap();
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }
}
