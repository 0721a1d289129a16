use std::path::Path;

use magictrap::acceptance;
use magictrap::dls::{dls_minimum, effective_field, magic_depth, zero_crossing_field, TrapCoefficients};
use magictrap::fitting::{
    damped_sinusoid, fit_damped_sinusoid, fit_dls_global, fit_dls_global_free_beta1, magic_depth_uncertainty, FitResult,
};
use magictrap::ramsey::{combine_coherence, Ramsey, RamseyOptions, TrapFieldConfig};
use magictrap::transfer::{coherence_budget_with, BudgetOptions};
use magictrap::units::{self, depth_hz_from_mk, depth_mk_from_hz, hz_from_kelvin, PhysicalConstants};
use magictrap::{Error, Execution};

use crate::io::{self, numeric_rows, Cell, CliResult};
use crate::report::Report;
use crate::svg::{Plot, Series, Style};
use crate::{CoeffArgs, Command, TimeGrid, TrapArgs};

pub struct Outcome {
    pub stdout: String,
    pub success: bool,
}

impl From<Report> for Outcome {
    fn from(r: Report) -> Self {
        Outcome {
            stdout: r.render().to_string(),
            success: true,
        }
    }
}

/// CSV columns never drop below nine significant digits.
fn csv_digits(precision: usize) -> usize {
    precision.max(9)
}

pub fn version(constants: bool, precision: usize) -> String {
    let mut r = Report::new(precision);
    r.text("magictrap", env!("CARGO_PKG_VERSION"));
    if constants {
        let c = PhysicalConstants::pinned();
        r.num("planck_h_js", c.planck_h)
            .num("boltzmann_kb_jk", c.boltzmann_kb)
            .num("bohr_magneton_over_h_hz_per_gauss", c.bohr_magneton_over_h)
            .num("rb87_hyperfine_nu0_hz", c.rb87_hyperfine_nu0)
            .num("kb_over_h_hz_per_k", c.kb_over_h());
    }
    r.render().to_string()
}

fn coeffs(args: &CoeffArgs) -> CliResult<TrapCoefficients> {
    io::load_coeffs(args.coeffs.as_deref())
}

fn ramsey(no_renormalize: bool) -> Ramsey {
    Ramsey::new(RamseyOptions {
        renormalize: !no_renormalize,
        ..Default::default()
    })
}

fn trap_config(args: &TrapArgs) -> CliResult<TrapFieldConfig> {
    let coeffs = coeffs(&args.coeffs)?;
    let mut cfg = TrapFieldConfig::at_magic(coeffs, args.b_field, args.temp_uk * 1e-6)?;
    if let Some(mk) = args.depth_mk {
        cfg.mean_depth = depth_hz_from_mk(mk)?;
    } else if let Some(r) = args.ratio {
        cfg = cfg.with_depth_ratio(r)?;
    }
    cfg.detuning = args.detuning_hz;
    cfg.validate()?;
    Ok(cfg)
}

fn trap_report(r: &mut Report, cfg: &TrapFieldConfig) -> CliResult<()> {
    let um = magic_depth(&cfg.coeffs, cfg.b_field)?;
    r.num("b_field_gauss", cfg.b_field)
        .num("temperature_uk", cfg.temperature * 1e6)
        .num("depth_mk", depth_mk_from_hz(cfg.mean_depth)?)
        .num("depth_hz", cfg.mean_depth)
        .num("depth_ratio", cfg.mean_depth / um)
        .num("detuning_hz", cfg.detuning);
    Ok(())
}

fn time_grid(g: &TimeGrid) -> CliResult<Vec<f64>> {
    if g.points < 2 || !(g.t_max > 0.0) {
        return Err(Error::InvalidArgument {
            name: "t_max",
            reason: "need t_max > 0 and at least 2 points".into(),
        }
        .into());
    }
    Ok((0..g.points)
        .map(|i| g.t_max * i as f64 / (g.points - 1) as f64)
        .collect())
}

fn save_plot(path: &Path, plot: Plot) -> CliResult<()> {
    io::write(path, &plot.render())
}

fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Series {
    Series {
        label: label.into(),
        points,
        style: Style::Line,
    }
}

fn markers(label: impl Into<String>, points: Vec<(f64, f64)>) -> Series {
    Series {
        label: label.into(),
        points,
        style: Style::Markers,
    }
}

pub fn run(command: Command, precision: usize) -> CliResult<Outcome> {
    let exec = Execution::default();
    let digits = csv_digits(precision);
    let mut r = Report::new(precision);
    match command {
        Command::DlsCurve {
            b_field,
            depth_max_mk,
            points,
            coeffs: c,
            outputs,
        } => {
            let coeffs = coeffs(&c)?;
            if points < 2 || !(depth_max_mk > 0.0) {
                return Err(Error::InvalidArgument {
                    name: "depth_max_mk",
                    reason: "need depth_max_mk > 0 and at least 2 points".into(),
                }
                .into());
            }
            let depths: Vec<f64> = (0..points)
                .map(|i| depth_max_mk * i as f64 / (points - 1) as f64)
                .collect();
            let mut rows = Vec::new();
            let mut series = Vec::new();
            for (k, &b) in b_field.iter().enumerate() {
                let mut curve = Vec::with_capacity(points);
                for &mk in &depths {
                    let shift = magictrap::dls::dls(&coeffs, b, depth_hz_from_mk(mk)?)?;
                    rows.push(vec![Cell::Num(b), Cell::Num(mk), Cell::Num(shift)]);
                    curve.push((mk, shift));
                }
                r.num(&format!("curve_{k}_b_field_gauss"), b);
                r.num(&format!("curve_{k}_dls_at_max_depth_hz"), curve[points - 1].1);
                if let Ok(um) = magic_depth(&coeffs, b) {
                    r.num(&format!("curve_{k}_magic_depth_mk"), depth_mk_from_hz(um)?)
                        .num(&format!("curve_{k}_dls_min_hz"), dls_minimum(&coeffs, b)?);
                }
                series.push(line(format!("B = {b} G"), curve));
            }
            r.int("curves", b_field.len()).int("points_per_curve", points);
            if let Some(out) = &outputs.out {
                io::write_csv(out, &["b_field_gauss", "depth_mk", "dls_hz"], &rows, digits)?;
            }
            if let Some(plot) = &outputs.plot {
                save_plot(
                    plot,
                    Plot {
                        title: "Differential light shift".into(),
                        x_label: "trap depth (mK)".into(),
                        y_label: "shift (Hz)".into(),
                        series,
                    },
                )?;
            }
        }
        Command::Magic { b_field, coeffs: c } => {
            let coeffs = coeffs(&c)?;
            let um = magic_depth(&coeffs, b_field)?;
            r.num("b_field_gauss", b_field)
                .num("u_m_hz", um)
                .num("depth_mk", depth_mk_from_hz(um)?)
                .num("dls_min_hz", dls_minimum(&coeffs, b_field)?);
            if let Ok(b0) = zero_crossing_field(&coeffs) {
                r.num("zero_crossing_gauss", b0);
            }
        }
        Command::Beff { depth_mk, ratio } => {
            let u = depth_hz_from_mk(depth_mk)?;
            r.num("depth_mk", depth_mk)
                .num("depth_hz", u)
                .num("ratio", ratio)
                .num("b_eff_gauss", effective_field(ratio, u)?);
        }
        Command::FitDls {
            input,
            beta1,
            free_beta1,
            magic_at,
            outputs,
        } => {
            let (sets, has_sigma) = io::read_dls_csv(&input)?;
            let raw = if free_beta1 {
                fit_dls_global_free_beta1(&sets)?
            } else {
                fit_dls_global(&sets, beta1)?
            };
            let fit = if has_sigma {
                raw
            } else {
                raw.scaled_by_reduced_chi_square()
            };
            let beta1 = fit.value("beta1").unwrap_or(beta1);
            r.text("model", if free_beta1 { "beta1 free" } else { "beta1 fixed" });
            r.text("sigma", if has_sigma { "column" } else { "residual scatter" });
            r.int("points", sets.iter().map(|s| s.points.len()).sum())
                .int("fields", sets.len());
            if !free_beta1 {
                r.num("beta1", beta1);
            }
            fit_report(&mut r, &fit);
            if let Some(b) = magic_at {
                let (um, sd) = magic_depth_uncertainty(&fit, beta1, b)?;
                r.num("magic_b_field_gauss", b)
                    .num("u_m_hz", um)
                    .num("u_m_err_hz", sd)
                    .num("magic_depth_mk", depth_mk_from_hz(um)?)
                    .num("magic_depth_err_mk", sd / units::KB_OVER_H * 1e3);
            }
            let fitted = TrapCoefficients::new(
                beta1,
                fit.value("beta2").unwrap_or(0.0),
                fit.value("beta4").unwrap_or(0.0),
            );
            if let Some(out) = &outputs.out {
                let mut rows = Vec::new();
                for s in &sets {
                    for p in &s.points {
                        let model = fitted.shift(s.b_field, p.depth);
                        rows.push(vec![
                            Cell::Num(s.b_field),
                            Cell::Num(depth_mk_from_hz(p.depth)?),
                            Cell::Num(p.dls),
                            Cell::Num(model),
                            Cell::Num(p.dls - model),
                        ]);
                    }
                }
                io::write_csv(
                    out,
                    &["b_field_gauss", "depth_mk", "dls_hz", "model_hz", "residual_hz"],
                    &rows,
                    digits,
                )?;
            }
            if let Some(plot) = &outputs.plot {
                let mut series = Vec::new();
                for s in &sets {
                    let pts = s
                        .points
                        .iter()
                        .map(|p| Ok((depth_mk_from_hz(p.depth)?, p.dls)))
                        .collect::<CliResult<Vec<_>>>()?;
                    let max = pts.iter().map(|p| p.0).fold(0.0, f64::max);
                    let curve = (0..=100)
                        .map(|i| {
                            let mk = max * i as f64 / 100.0;
                            Ok((mk, fitted.shift(s.b_field, depth_hz_from_mk(mk)?)))
                        })
                        .collect::<CliResult<Vec<_>>>()?;
                    series.push(markers(format!("{} G data", s.b_field), pts));
                    series.push(line(format!("{} G fit", s.b_field), curve));
                }
                save_plot(
                    plot,
                    Plot {
                        title: "Light-shift fit".into(),
                        x_label: "trap depth (mK)".into(),
                        y_label: "shift (Hz)".into(),
                        series,
                    },
                )?;
            }
        }
        Command::Ramsey {
            trap,
            grid,
            mc_samples,
            seed,
            outputs,
        } => {
            let cfg = trap_config(&trap)?;
            let engine = ramsey(trap.no_renormalize);
            let times = time_grid(&grid)?;
            let trace = engine.trace(&cfg, &times, exec)?;
            trap_report(&mut r, &cfg)?;
            r.flag("renormalized", !trap.no_renormalize).int("samples", times.len());
            let last = trace.population.len() - 1;
            r.num("population_at_t_max", trace.population[last]);
            if let Some(n) = mc_samples {
                let mc = Ramsey::default();
                let mut worst: f64 = 0.0;
                for (i, &t) in times.iter().enumerate().filter(|(i, _)| i % 10 == 0 || *i == last) {
                    let (mean, se) = mc.monte_carlo_population(&cfg, t, n, seed.wrapping_add(i as u64), exec)?;
                    let quad = mc.population(&cfg, t)?;
                    worst = worst.max((quad - mean).abs() / se.max(1e-15));
                }
                r.int("mc_samples", n)
                    .int("mc_seed", seed as usize)
                    .num("mc_max_deviation_se", worst);
            }
            if let Some(out) = &outputs.out {
                io::write_csv(
                    out,
                    &["t_s", "population"],
                    &numeric_rows(&[&times, &trace.population]),
                    digits,
                )?;
            }
            if let Some(plot) = &outputs.plot {
                save_plot(
                    plot,
                    Plot {
                        title: format!("Ramsey signal, {} uK", trap.temp_uk),
                        x_label: "free evolution time (s)".into(),
                        y_label: "population".into(),
                        series: vec![line("model", zip(&times, &trace.population))],
                    },
                )?;
            }
        }
        Command::Visibility { trap, grid, outputs } => {
            let cfg = trap_config(&trap)?;
            let engine = ramsey(trap.no_renormalize);
            let times = time_grid(&grid)?;
            let curve = engine.visibility_curve(&cfg, &times, exec)?;
            trap_report(&mut r, &cfg)?;
            r.flag("renormalized", !trap.no_renormalize)
                .int("samples", times.len())
                .num("t2_star_s", engine.t2_star(&cfg)?);
            if let Some(out) = &outputs.out {
                io::write_csv(
                    out,
                    &["t_s", "visibility"],
                    &numeric_rows(&[&times, &curve.visibility]),
                    digits,
                )?;
            }
            if let Some(plot) = &outputs.plot {
                save_plot(
                    plot,
                    Plot {
                        title: format!("Fringe visibility, {} uK", trap.temp_uk),
                        x_label: "free evolution time (s)".into(),
                        y_label: "visibility".into(),
                        series: vec![line("model", zip(&times, &curve.visibility))],
                    },
                )?;
            }
        }
        Command::T2star { trap, t1, t2prime } => {
            let cfg = trap_config(&trap)?;
            let t2 = ramsey(trap.no_renormalize).t2_star(&cfg)?;
            trap_report(&mut r, &cfg)?;
            r.flag("renormalized", !trap.no_renormalize)
                .num("t2_star_s", t2)
                .num("t1_s", t1)
                .num("t2prime_s", t2prime)
                .num("tau_s", combine_coherence(t1, t2prime, t2)?);
        }
        Command::CoherenceCurve {
            temp_uk,
            b_field,
            ratio_min,
            ratio_max,
            ratio_step,
            t1,
            t2prime,
            no_renormalize,
            coeffs: c,
            outputs,
        } => {
            if !(ratio_step > 0.0 && ratio_max >= ratio_min && ratio_min > 0.0) {
                return Err(Error::InvalidArgument {
                    name: "ratio_step",
                    reason: "need 0 < ratio_min <= ratio_max and ratio_step > 0".into(),
                }
                .into());
            }
            let n = ((ratio_max - ratio_min) / ratio_step + 1e-9).floor() as usize + 1;
            let ratios: Vec<f64> = (0..n).map(|i| ratio_min + ratio_step * i as f64).collect();
            let base = TrapFieldConfig::at_magic(coeffs(&c)?, b_field, temp_uk * 1e-6)?;
            let pts = ramsey(no_renormalize).coherence_vs_depth(&base, &ratios, t1, t2prime, exec)?;
            let best = pts
                .iter()
                .max_by(|a, b| a.tau.total_cmp(&b.tau))
                .copied()
                .expect("at least one ratio");
            r.num("temperature_uk", temp_uk)
                .num("b_field_gauss", b_field)
                .int("points", pts.len())
                .num("best_ratio", best.ratio)
                .num("tau_max_s", best.tau)
                .num("t2_star_at_best_s", best.t2_star);
            if let Some(at_magic) = pts.iter().find(|p| (p.ratio - 1.0).abs() < 1e-9) {
                r.num("tau_at_magic_s", at_magic.tau);
            }
            let rs: Vec<f64> = pts.iter().map(|p| p.ratio).collect();
            let taus: Vec<f64> = pts.iter().map(|p| p.tau).collect();
            if let Some(out) = &outputs.out {
                io::write_csv(out, &["ratio", "tau_s"], &numeric_rows(&[&rs, &taus]), digits)?;
            }
            if let Some(plot) = &outputs.plot {
                let ms: Vec<f64> = taus.iter().map(|t| t * 1e3).collect();
                save_plot(
                    plot,
                    Plot {
                        title: format!("Coherence time, {temp_uk} uK"),
                        x_label: "U_a / U_M".into(),
                        y_label: "tau (ms)".into(),
                        series: vec![line("model", zip(&rs, &ms))],
                    },
                )?;
            }
        }
        Command::FitRamsey { input, outputs } => {
            let (samples, has_sigma) = io::read_ramsey_csv(&input)?;
            let raw = fit_damped_sinusoid(&samples)?;
            let fit = if has_sigma {
                raw
            } else {
                raw.scaled_by_reduced_chi_square()
            };
            r.text("sigma", if has_sigma { "column" } else { "residual scatter" })
                .int("points", samples.len());
            fit_report(&mut r, &fit);
            let p = &fit.values;
            let model = |t: f64| damped_sinusoid(p[0], p[1], p[2], p[3], p[4], t);
            if let Some(out) = &outputs.out {
                let rows: Vec<Vec<Cell>> = samples
                    .iter()
                    .map(|s| {
                        let m = model(s.t);
                        vec![Cell::Num(s.t), Cell::Num(s.p), Cell::Num(m), Cell::Num(s.p - m)]
                    })
                    .collect();
                io::write_csv(out, &["t_s", "p", "model", "residual"], &rows, digits)?;
            }
            if let Some(plot) = &outputs.plot {
                let (t0, t1) = samples
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.t), b.max(s.t)));
                let curve = (0..=1000)
                    .map(|i| {
                        let t = t0 + (t1 - t0) * i as f64 / 1000.0;
                        (t, model(t))
                    })
                    .collect();
                save_plot(
                    plot,
                    Plot {
                        title: "Ramsey fit".into(),
                        x_label: "free evolution time (s)".into(),
                        y_label: "population".into(),
                        series: vec![
                            markers("data", samples.iter().map(|s| (s.t, s.p)).collect()),
                            line("fit", curve),
                        ],
                    },
                )?;
            }
        }
        Command::Transfer {
            timeline,
            post_temp_uk,
            t2_static_s,
            t2_mobile_s,
            coeffs: c,
            outputs,
        } => {
            let tl = io::load_timeline(&timeline)?.into_timeline(coeffs(&c)?)?;
            let report = coherence_budget_with(
                &tl,
                post_temp_uk * 1e-6,
                &BudgetOptions {
                    t2_star_static: t2_static_s,
                    t2_star_mobile: t2_mobile_s,
                    execution: exec,
                    ..Default::default()
                },
            )?;
            r.int("segments", report.per_segment.len());
            for (i, s) in report.per_segment.iter().enumerate() {
                r.text(&format!("segment_{i}_phase"), s.phase.name())
                    .num(&format!("segment_{i}_duration_s"), s.duration)
                    .num(&format!("segment_{i}_effective_t2_s"), s.effective_t2)
                    .num(&format!("segment_{i}_model_t2_s"), s.model_t2)
                    .num(&format!("segment_{i}_amplitude_factor"), s.amplitude_factor);
            }
            r.num("retained_coherence", report.retained_coherence)
                .num("t2_star_static_s", report.t2_star_static)
                .num("t2_star_mobile_s", report.t2_star_mobile)
                .num("tau_static_s", report.tau_static)
                .num("tau_mobile_s", report.tau_mobile)
                .num("fractional_tau_loss", report.fractional_tau_loss);
            for (i, note) in report.notes.iter().enumerate() {
                r.text(&format!("note_{i}"), note);
            }
            if let Some(out) = &outputs.out {
                let rows: Vec<Vec<Cell>> = report
                    .per_segment
                    .iter()
                    .map(|s| {
                        vec![
                            Cell::Text(s.phase.name()),
                            Cell::Num(s.duration),
                            Cell::Num(s.effective_t2),
                            Cell::Num(s.model_t2),
                            Cell::Num(s.amplitude_factor),
                        ]
                    })
                    .collect();
                io::write_csv(
                    out,
                    &[
                        "phase",
                        "duration_s",
                        "effective_t2_s",
                        "model_t2_s",
                        "amplitude_factor",
                    ],
                    &rows,
                    digits,
                )?;
            }
            if let Some(plot) = &outputs.plot {
                let mut t = 0.0;
                let mut v = 1.0;
                let mut pts = vec![(0.0, 1.0)];
                for s in &report.per_segment {
                    t += s.duration * 1e3;
                    v *= s.amplitude_factor;
                    pts.push((t, v));
                }
                save_plot(
                    plot,
                    Plot {
                        title: "Transfer coherence budget".into(),
                        x_label: "elapsed time (ms)".into(),
                        y_label: "retained coherence".into(),
                        series: vec![line("cumulative", pts)],
                    },
                )?;
            }
        }
        Command::Convert {
            depth_mk,
            depth_hz,
            temp_uk,
        } => {
            if depth_mk.is_none() && depth_hz.is_none() && temp_uk.is_none() {
                return Err(Error::InvalidArgument {
                    name: "convert",
                    reason: "give at least one of --depth-mk, --depth-hz, --temp-uk".into(),
                }
                .into());
            }
            if let Some(mk) = depth_mk {
                r.num("depth_mk", mk).num("depth_hz", depth_hz_from_mk(mk)?);
            }
            if let Some(hz) = depth_hz {
                r.num("depth_hz", hz).num("depth_mk", depth_mk_from_hz(hz)?);
            }
            if let Some(uk) = temp_uk {
                r.num("temperature_uk", uk)
                    .num("thermal_hz", hz_from_kelvin(uk * 1e-6)?);
            }
        }
        Command::Selftest { only, sequential } => {
            let exec = if sequential { Execution::Sequential } else { exec };
            let ids: Vec<u8> = if only.is_empty() {
                acceptance::CRITERIA.iter().map(|c| c.0).collect()
            } else {
                only
            };
            let mut out = String::new();
            let mut failed = 0;
            for id in ids {
                let outcome = acceptance::run(id, exec).ok_or(Error::InvalidArgument {
                    name: "only",
                    reason: format!("no criterion {id}"),
                })?;
                failed += usize::from(!outcome.passed);
                out.push_str(&format!("{outcome}\n"));
            }
            out.push_str(&format!("failed = {failed}\n"));
            return Ok(Outcome {
                stdout: out,
                success: failed == 0,
            });
        }
    }
    Ok(r.into())
}

fn zip(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    x.iter().copied().zip(y.iter().copied()).collect()
}

fn fit_report(r: &mut Report, fit: &FitResult) {
    for (i, name) in fit.names.iter().enumerate() {
        r.num(name, fit.values[i]);
        r.num(&format!("{name}_err"), fit.covariance[(i, i)].max(0.0).sqrt());
    }
    r.num("chi_square", fit.chi_square)
        .int("dof", fit.dof)
        .num("reduced_chi_square", fit.reduced_chi_square());
    for (i, a) in fit.names.iter().enumerate() {
        for (j, b) in fit.names.iter().enumerate().skip(i) {
            r.num(&format!("cov_{a}_{b}"), fit.covariance[(i, j)]);
        }
    }
}
