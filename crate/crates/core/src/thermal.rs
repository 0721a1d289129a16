//! Boltzmann energy distribution of atoms in a 3D harmonic trap,
//!
//! ```text
//! p(E) = E^2 / (2 (kB T)^3) exp(-E / kB T)
//! ```
//!
//! i.e. a Gamma(3, kB T) law, optionally truncated at the trap depth. Energies
//! are in Hz throughout. Most of the work happens in the reduced variable
//! `x = E / (kB T / h)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::units::thermal_hz;

/// Draws per independently seeded generator stream.
pub(crate) const SAMPLE_CHUNK: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalEnsemble {
    temperature: f64,
    truncation: f64,
}

impl ThermalEnsemble {
    /// `truncation` is the cut-off energy in Hz; pass `f64::INFINITY` for
    /// the untruncated distribution.
    pub fn new(temperature: f64, truncation: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::invalid(
                "temperature",
                format!("must be finite and > 0 K, got {temperature}"),
            ));
        }
        if !(truncation > 0.0) {
            return Err(Error::invalid(
                "truncation",
                format!("must be > 0 Hz or infinite, got {truncation}"),
            ));
        }
        Ok(ThermalEnsemble {
            temperature,
            truncation,
        })
    }

    pub fn untruncated(temperature: f64) -> Result<Self> {
        Self::new(temperature, f64::INFINITY)
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    /// kB T / h in Hz.
    pub fn energy_scale(&self) -> f64 {
        thermal_hz(self.temperature)
    }

    /// Truncation in units of kB T.
    pub fn reduced_truncation(&self) -> f64 {
        self.truncation / self.energy_scale()
    }

    /// Untruncated density in Hz^-1.
    pub fn raw_pdf(&self, energy: f64) -> Result<f64> {
        if !(energy >= 0.0) {
            return Err(Error::invalid("energy", format!("must be >= 0, got {energy}")));
        }
        let kt = self.energy_scale();
        Ok(gamma3_density(energy / kt) / kt)
    }

    /// Density renormalized over `[0, truncation]`; zero beyond it.
    pub fn pdf(&self, energy: f64) -> Result<f64> {
        let raw = self.raw_pdf(energy)?;
        if energy > self.truncation {
            return Ok(0.0);
        }
        Ok(raw / self.truncation_mass())
    }

    /// Probability mass of the untruncated law below the truncation energy.
    pub fn truncation_mass(&self) -> f64 {
        gamma3_cdf(self.reduced_truncation())
    }

    /// Mean energy of the (renormalized) truncated law, Hz.
    pub fn mean_energy(&self) -> f64 {
        let kt = self.energy_scale();
        let c = self.reduced_truncation();
        if c.is_infinite() {
            return 3.0 * kt;
        }
        // int_0^c x p(x) dx = 3 P(4, c)
        3.0 * kt * lower_regularized_gamma_int(4, c) / lower_regularized_gamma_int(3, c)
    }

    /// CDF of the truncated law.
    pub fn cdf(&self, energy: f64) -> f64 {
        if energy <= 0.0 {
            return 0.0;
        }
        if energy >= self.truncation {
            return 1.0;
        }
        gamma3_cdf(energy / self.energy_scale()) / self.truncation_mass()
    }

    /// `n` i.i.d. energies (Hz) from the truncated law, reproducible per seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.sample_with(n, seed, Execution::default())
    }

    pub fn sample_with(&self, n: usize, seed: u64, exec: Execution) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid("n", "sample count must be >= 1"));
        }
        let chunks = n.div_ceil(SAMPLE_CHUNK);
        let parts = exec.map_indices(chunks, |k| {
            let len = SAMPLE_CHUNK.min(n - k * SAMPLE_CHUNK);
            let mut out = Vec::with_capacity(len);
            self.fill_chunk(seed, k as u64, len, |e| out.push(e));
            out
        });
        Ok(parts.concat())
    }

    /// Streams one chunk of draws into `sink`. Chunk `k` of a seed is the
    /// same regardless of which thread produces it.
    pub(crate) fn fill_chunk(&self, seed: u64, chunk: u64, len: usize, mut sink: impl FnMut(f64)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let kt = self.energy_scale();
        let c = self.reduced_truncation();
        let mass = self.truncation_mass();
        for _ in 0..len {
            // Inverse CDF restricted to [0, c]: u is uniform on (0, mass).
            let u: f64 = rng.random::<f64>();
            let x = gamma3_quantile(u * mass, (1.0 - u) * mass + (1.0 - mass));
            sink(x.min(c) * kt);
        }
    }
}

/// Gamma(3) density in the reduced variable.
#[inline]
pub(crate) fn gamma3_density(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        0.5 * x * x * (-x).exp()
    }
}

/// P(3, x) = 1 - e^{-x} (1 + x + x^2/2).
pub fn gamma3_cdf(x: f64) -> f64 {
    lower_regularized_gamma_int(3, x)
}

/// Regularized lower incomplete gamma P(a, x) for a small positive integer a.
fn lower_regularized_gamma_int(a: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < 1.0 {
        // e^{-x} sum_k x^{a+k} / (a+k)!, no cancellation for small x.
        let mut term = (1..=a).fold(1.0, |acc, k| acc * x / k as f64);
        let mut sum = term;
        let mut k = a + 1;
        while term > 1e-18 * sum {
            term *= x / k as f64;
            sum += term;
            k += 1;
        }
        return (-x).exp() * sum;
    }
    let mut term = 1.0;
    let mut partial = 1.0;
    for k in 1..a {
        term *= x / k as f64;
        partial += term;
    }
    1.0 - (-x).exp() * partial
}

/// Solves P(3, x) = p; `q = 1 - p` is passed separately to keep precision in
/// the upper tail.
fn gamma3_quantile(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let upper = |x: f64| (-x).exp() * (1.0 + x + 0.5 * x * x);
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while gamma3_cdf(hi) < p && upper(hi) > q {
        hi *= 2.0;
        if hi > 800.0 {
            return hi;
        }
    }
    let mut x = if p < 0.05 {
        (6.0 * p).cbrt().min(hi)
    } else if q < 0.05 {
        // Q(3, x) ~ e^{-x} x^2 / 2 for large x
        let mut g = -q.ln();
        for _ in 0..3 {
            g = -(q.ln() - (0.5 * g * g + g + 1.0).ln());
        }
        g.clamp(lo, hi)
    } else {
        2.674
    };
    for _ in 0..100 {
        // residual measured on whichever tail is better conditioned
        let r = if p < 0.5 { gamma3_cdf(x) - p } else { q - upper(x) };
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = gamma3_density(x);
        let mut next = x - r / d;
        if !(next > lo && next < hi) || d == 0.0 {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-300) {
            return next;
        }
        x = next;
    }
    x
}
