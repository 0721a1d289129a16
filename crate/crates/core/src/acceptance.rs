//! Acceptance suite shared by the `acceptance` test target and the CLI
//! `selftest` subcommand. Each criterion yields a pass flag and a one-line
//! summary of the numbers it checked.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dls::{
    coeffs_from_atomic_rb87, effective_field, magic_depth, zero_crossing_field, AtomicInput, TrapCoefficients,
    BETA1_CIRCULAR, VECTOR_TO_SCALAR_RATIO_830NM,
};
use crate::error::Result;
use crate::exec::Execution;
use crate::fitting::{fit_damped_sinusoid, fit_dls_global, synth_dls, synth_ramsey, DlsDataset, FitResult};
use crate::ramsey::{combine_coherence, Ramsey, TrapFieldConfig};
use crate::transfer::{coherence_budget_with, BudgetOptions, Phase, TransferSegment, TransferTimeline};
use crate::units::{depth_hz_from_mk, depth_mk_from_hz, BOHR_MAGNETON_OVER_H, RB87_HYPERFINE_NU0};

pub const B_FIELD: f64 = 3.115;
pub const T1: f64 = 4.0;
pub const T2_PRIME: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

type Check = fn(Execution) -> Result<(bool, String)>;

pub const CRITERIA: [(u8, &str, Check); 10] = [
    (1, "zero-crossing field", zero_crossing),
    (2, "magic depth", magic),
    (3, "atomic coefficients", atomic),
    (4, "effective field", beff),
    (5, "T2* reproduction", t2_reproduction),
    (6, "coherence composition", composition),
    (7, "tau vs depth shape", tau_shape),
    (8, "transfer budget", transfer_budget),
    (9, "quadrature vs Monte Carlo", oracle_equivalence),
    (10, "fit round-trips", fit_round_trips),
];

pub fn run(id: u8, exec: Execution) -> Option<Outcome> {
    let &(id, name, check) = CRITERIA.iter().find(|c| c.0 == id)?;
    let (passed, detail) = match check(exec) {
        Ok(r) => r,
        Err(e) => (false, format!("error [{}]: {e}", e.code())),
    };
    Some(Outcome {
        id,
        name,
        passed,
        detail,
    })
}

pub fn run_all(exec: Execution) -> Vec<Outcome> {
    CRITERIA.iter().filter_map(|c| run(c.0, exec)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn zero_crossing(_: Execution) -> Result<(bool, String)> {
    let b = zero_crossing_field(&TrapCoefficients::experimental())?;
    let r = rel(b, 3.51);
    Ok((r <= 5e-3, format!("B = {b:.6} G, {:.3}% from 3.51 G", 100.0 * r)))
}

fn magic(_: Execution) -> Result<(bool, String)> {
    let exp = depth_mk_from_hz(magic_depth(&TrapCoefficients::experimental(), B_FIELD)?)?;
    let th = depth_mk_from_hz(magic_depth(&TrapCoefficients::theory(), B_FIELD)?)?;
    // closed-form values from the coefficient arithmetic
    let kb_h = crate::units::KB_OVER_H;
    let exp_ref = (3.47e-4 - 0.99e-4 * B_FIELD) / (2.0 * 4.6e-12) / kb_h * 1e3;
    let th_ref = (3.47e-4 - 1.03e-4 * B_FIELD) / (2.0 * 4.64e-12) / kb_h * 1e3;
    let ok = (0.13..=0.22).contains(&exp)
        && rel(exp, exp_ref) <= 1e-6
        && rel(th, th_ref) <= 1e-6
        && (exp - 0.201).abs() < 5e-4
        && (th - 0.135).abs() < 5e-4;
    Ok((ok, format!("|U_M| = {exp:.6} mK (experimental), {th:.6} mK (theory)")))
}

fn atomic(_: Execution) -> Result<(bool, String)> {
    let c = coeffs_from_atomic_rb87(&AtomicInput {
        vector_to_scalar_ratio: VECTOR_TO_SCALAR_RATIO_830NM,
        beta1: BETA1_CIRCULAR,
        polarization_a: 1.0,
    })?;
    let identity = 8.0 * BOHR_MAGNETON_OVER_H.powi(2) / RB87_HYPERFINE_NU0;
    let r2 = rel(c.beta2, -1.03e-4);
    let r4 = rel(c.beta4, 4.64e-12);
    let ri = rel(c.beta2 * c.beta2 / c.beta4, identity);
    let ok = r2 <= 5e-3 && r4 <= 5e-3 && ri <= 1e-9 && rel(identity, 2292.9) < 5e-5;
    Ok((
        ok,
        format!(
            "beta2 = {:.5e} /G, beta4 = {:.5e} /Hz, beta2^2/beta4 = {:.2} /G^2 (identity residual {ri:.1e})",
            c.beta2, c.beta4, identity
        ),
    ))
}

fn beff(_: Execution) -> Result<(bool, String)> {
    let b = effective_field(VECTOR_TO_SCALAR_RATIO_830NM, depth_hz_from_mk(0.6)?)?;
    let r = rel(b, 1.12);
    Ok((r <= 0.01, format!("B_eff = {b:.5} G, {:.2}% from 1.120 G", 100.0 * r)))
}

fn t2_at(temperature: f64) -> Result<f64> {
    Ramsey::default().t2_star(&TrapFieldConfig::at_magic(
        TrapCoefficients::experimental(),
        B_FIELD,
        temperature,
    )?)
}

fn t2_reproduction(exec: Execution) -> Result<(bool, String)> {
    let cases = [(17e-6, 1.5), (8e-6, 6.6), (16e-6, 1.9)];
    let got = exec
        .map(&cases, |&(t, _)| t2_at(t))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let ok = got.iter().zip(&cases).all(|(g, c)| rel(*g, c.1) <= 0.3);
    let detail = got
        .iter()
        .zip(&cases)
        .map(|(g, c)| format!("{:.0} uK: {g:.3} s (target {})", c.0 * 1e6, c.1))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((ok, detail))
}

fn composition(_: Execution) -> Result<(bool, String)> {
    let t2 = t2_at(17e-6)?;
    let tau = combine_coherence(T1, T2_PRIME, t2)?;
    Ok((
        (0.204..=0.246).contains(&tau),
        format!("tau = {:.1} ms with T2* = {t2:.3} s", tau * 1e3),
    ))
}

/// `tau` against `U_a / U_M` on the 0.5..1.5 grid at 17 uK.
pub fn tau_curve(exec: Execution) -> Result<Vec<(f64, f64)>> {
    let base = TrapFieldConfig::at_magic(TrapCoefficients::experimental(), B_FIELD, 17e-6)?;
    let ratios: Vec<f64> = (0..=20).map(|i| 0.5 + 0.05 * i as f64).collect();
    Ok(Ramsey::default()
        .coherence_vs_depth(&base, &ratios, T1, T2_PRIME, exec)?
        .into_iter()
        .map(|p| (p.ratio, p.tau))
        .collect())
}

fn tau_shape(exec: Execution) -> Result<(bool, String)> {
    let curve = tau_curve(exec)?;
    let centre = 10;
    let argmax = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let rising = curve[..=centre].windows(2).all(|w| w[1].1 > w[0].1);
    let falling = curve[centre..].windows(2).all(|w| w[1].1 < w[0].1);
    Ok((
        argmax == centre && rising && falling,
        format!(
            "max tau = {:.1} ms at ratio {:.2}; tau(1.00) = {:.1} ms; monotone halves: {rising}/{falling}",
            curve[argmax].1 * 1e3,
            curve[argmax].0,
            curve[centre].1 * 1e3
        ),
    ))
}

fn transfer_timeline() -> Result<TransferTimeline> {
    let register = TrapFieldConfig::at_magic(TrapCoefficients::experimental(), B_FIELD, 8e-6)?;
    let overlap = TrapFieldConfig {
        mean_depth: depth_hz_from_mk(0.37)?,
        ..register
    };
    let moving = TrapFieldConfig {
        mean_depth: depth_hz_from_mk(0.2)?,
        temperature: 14e-6,
        ..register
    };
    let seg = |phase, duration, config, t2_override| TransferSegment {
        phase,
        duration,
        config,
        t2_override,
    };
    Ok(TransferTimeline {
        segments: vec![
            seg(Phase::Overlap, 2e-4, overlap, Some(0.025)),
            seg(Phase::Move, 2e-3, moving, None),
            seg(Phase::Return, 2e-4, overlap, Some(0.025)),
        ],
        t1: T1,
        t2_prime: T2_PRIME,
        register: Some(register),
    })
}

fn transfer_budget(exec: Execution) -> Result<(bool, String)> {
    let tl = transfer_timeline()?;
    let quoted = coherence_budget_with(
        &tl,
        16e-6,
        &BudgetOptions {
            t2_star_static: Some(6.6),
            t2_star_mobile: Some(1.9),
            execution: exec,
            ..Default::default()
        },
    )?;
    let model = coherence_budget_with(
        &tl,
        16e-6,
        &BudgetOptions {
            execution: exec,
            ..Default::default()
        },
    )?;
    let loss = quoted.fractional_tau_loss;
    let overlap_loss = 1.0 - quoted.per_segment[0].amplitude_factor;
    Ok((
        (loss - 0.091).abs() <= 0.01 && overlap_loss < 0.01,
        format!(
            "loss = {:.2}% (T2* 6.6 -> 1.9 s); overlap amplitude loss {:.2}%; model T2* {:.2} -> {:.2} s gives {:.2}%",
            100.0 * loss,
            100.0 * overlap_loss,
            model.t2_star_static,
            model.t2_star_mobile,
            100.0 * model.fractional_tau_loss
        ),
    ))
}

fn oracle_equivalence(exec: Execution) -> Result<(bool, String)> {
    let ramsey = Ramsey::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for k in 0..20u64 {
        let temperature = rng.random_range(5e-6..40e-6);
        let ratio = rng.random_range(0.6..1.4);
        let t = rng.random_range(0.01..1.0);
        let cfg = TrapFieldConfig::at_magic(TrapCoefficients::experimental(), B_FIELD, temperature)?
            .with_depth_ratio(ratio)?;
        let quad = ramsey.population(&cfg, t)?;
        let (mc, se) = ramsey.monte_carlo_population(&cfg, t, 1_000_000, k, exec)?;
        let z = (quad - mc).abs() / se.max(1e-12);
        worst = worst.max(z);
        if z > 4.0 {
            failures += 1;
        }
    }
    Ok((
        failures == 0,
        format!("20 configs, worst deviation {worst:.2} standard errors"),
    ))
}

fn dls_scenario(noise: f64, seed: u64) -> Result<Vec<DlsDataset>> {
    let c = TrapCoefficients::experimental();
    let depths: Vec<f64> = (1..=12).map(|i| -9e6 * i as f64 / 12.0).collect();
    [2.8, 3.0, 3.115, 3.3]
        .iter()
        .enumerate()
        .map(|(k, &b)| synth_dls(&c, b, &depths, noise, seed * 16 + k as u64))
        .collect()
}

fn within(fit: &FitResult, name: &str, truth: f64, k: f64) -> bool {
    match (fit.value(name), fit.std_error(name)) {
        (Some(v), Some(s)) => (v - truth).abs() <= k * s,
        _ => false,
    }
}

fn fit_round_trips(exec: Execution) -> Result<(bool, String)> {
    let truth = TrapCoefficients::experimental();
    let clean = fit_dls_global(&dls_scenario(0.0, 0)?, BETA1_CIRCULAR)?;
    let dls_exact = rel(clean.value("beta2").unwrap_or(0.0), truth.beta2) <= 1e-6
        && rel(clean.value("beta4").unwrap_or(0.0), truth.beta4) <= 1e-6;

    let times: Vec<f64> = (0..100).map(|i| 0.4 * i as f64 / 99.0).collect();
    let scenarios = [[1.0, 0.206, 50.0, 0.0, 0.5], [1.0, 0.205, 50.0, 0.0, 0.5]];
    let mut ramsey_exact = true;
    for s in &scenarios {
        let fit = fit_damped_sinusoid(&synth_ramsey(*s, &times, 0.0, 0)?)?;
        for (v, t) in fit.values.iter().zip(s) {
            let err = if *t == 0.0 { v.abs() } else { rel(*v, *t) };
            ramsey_exact &= err <= 1e-6;
        }
    }

    let dls_hits = exec
        .map_indices(100, |seed| -> Result<bool> {
            let fit = fit_dls_global(&dls_scenario(2.0, seed as u64)?, BETA1_CIRCULAR)?;
            Ok(within(&fit, "beta2", truth.beta2, 3.0) && within(&fit, "beta4", truth.beta4, 3.0))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    let mut ramsey_hits = [0usize; 2];
    for (j, s) in scenarios.iter().enumerate() {
        ramsey_hits[j] = exec
            .map_indices(100, |seed| -> Result<bool> {
                let data = synth_ramsey(*s, &times, 0.05, 500 + 1000 * j as u64 + seed as u64)?;
                Ok(within(&fit_damped_sinusoid(&data)?, "tau", s[1], 3.0))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|&b| b)
            .count();
    }
    let ok = dls_exact && ramsey_exact && dls_hits >= 95 && ramsey_hits.iter().all(|&h| h >= 95);
    Ok((
        ok,
        format!(
            "noiseless exact: dls {dls_exact}, ramsey {ramsey_exact}; 3-sigma coverage: dls {dls_hits}/100, tau(206 ms) {}/100, tau(205 ms) {}/100",
            ramsey_hits[0], ramsey_hits[1]
        ),
    ))
}
