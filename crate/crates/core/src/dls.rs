//! Differential light shift of the m_F = 0 clock pair in a (partially)
//! circularly polarized trap, including the hyperpolarizability term:
//!
//! ```text
//! dnu(B, U) = beta1 U + beta2 B U + beta4 U^2
//! ```
//!
//! `U` is the signed ground-state light shift in Hz (negative for a
//! red-detuned trap). Because `beta4 > 0` the shift is a parabola in `U` whose
//! vertex is the magic depth.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::units::{BOHR_MAGNETON_OVER_H, RB87_HYPERFINE_NU0};

/// beta1 for a linearly polarized 830 nm trap.
pub const BETA1_LINEAR: f64 = 3.67e-4;
/// beta1 for a circularly polarized 830 nm trap.
pub const BETA1_CIRCULAR: f64 = 3.47e-4;
/// alpha^a / alpha of the 5s ground state at 830 nm, obtained by inverting
/// the theoretical beta4.
pub const VECTOR_TO_SCALAR_RATIO_830NM: f64 = 0.2518;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapCoefficients {
    pub beta1: f64,
    /// G^-1
    #[serde(rename = "beta2_per_gauss")]
    pub beta2: f64,
    /// Hz^-1
    #[serde(rename = "beta4_per_hz")]
    pub beta4: f64,
    #[serde(rename = "polarization_A", default = "full_circular")]
    pub polarization_a: f64,
}

fn full_circular() -> f64 {
    1.0
}

impl TrapCoefficients {
    pub fn new(beta1: f64, beta2: f64, beta4: f64) -> Self {
        TrapCoefficients {
            beta1,
            beta2,
            beta4,
            polarization_a: 1.0,
        }
    }

    /// Fitted values for sigma+ light at 830 nm.
    pub fn experimental() -> Self {
        Self::new(BETA1_CIRCULAR, -0.99e-4, 4.6e-12)
    }

    /// Atomic-structure values for sigma+ light at 830 nm.
    pub fn theory() -> Self {
        Self::new(BETA1_CIRCULAR, -1.03e-4, 4.64e-12)
    }

    pub fn linear() -> Self {
        TrapCoefficients {
            beta1: BETA1_LINEAR,
            beta2: 0.0,
            beta4: 0.0,
            polarization_a: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("beta1", self.beta1)?;
        ensure_finite("beta2", self.beta2)?;
        ensure_finite("beta4", self.beta4)?;
        ensure_finite("polarization_A", self.polarization_a)?;
        if self.beta4 < 0.0 {
            return Err(Error::invalid("beta4", format!("must be >= 0, got {}", self.beta4)));
        }
        if self.polarization_a.abs() > 1.0 {
            return Err(Error::OutOfRange {
                value: self.polarization_a,
                lo: -1.0,
                hi: 1.0,
            });
        }
        Ok(())
    }

    /// Slope of the shift at `U = 0`, i.e. `beta1 + beta2 B`. Written as
    /// `beta2 (B - B_0)` so it vanishes exactly at the zero-crossing field.
    #[inline]
    pub fn linear_slope(&self, b_field: f64) -> f64 {
        if self.beta2 == 0.0 {
            self.beta1
        } else {
            self.beta2 * (b_field - (-self.beta1 / self.beta2))
        }
    }

    /// Unchecked evaluation of the parabola; used on hot paths after the
    /// inputs were validated once.
    #[inline]
    pub fn shift(&self, b_field: f64, depth: f64) -> f64 {
        (self.linear_slope(b_field) + self.beta4 * depth) * depth
    }
}

/// Atomic inputs from which beta2 and beta4 follow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomicInput {
    /// alpha^a_5s / alpha_5s at the trap wavelength.
    pub vector_to_scalar_ratio: f64,
    pub beta1: f64,
    #[serde(rename = "polarization_A")]
    pub polarization_a: f64,
}

fn check_depth(depth: f64) -> Result<f64> {
    let u = ensure_finite("depth", depth)?;
    if u > 0.0 {
        return Err(Error::SignConvention(u));
    }
    Ok(u)
}

/// Total differential light shift in Hz.
pub fn dls(coeffs: &TrapCoefficients, b_field: f64, depth: f64) -> Result<f64> {
    ensure_finite("b_field", b_field)?;
    if b_field < 0.0 {
        return Err(Error::invalid("b_field", format!("must be >= 0 G, got {b_field}")));
    }
    let u = check_depth(depth)?;
    Ok(coeffs.shift(b_field, u))
}

fn require_beta4(coeffs: &TrapCoefficients) -> Result<()> {
    if coeffs.beta4 > 0.0 && coeffs.beta4.is_finite() {
        Ok(())
    } else {
        Err(Error::NoMagicPoint(coeffs.beta4))
    }
}

/// Magic depth `U_M = -(beta1 + beta2 B) / (2 beta4)`.
pub fn magic_depth(coeffs: &TrapCoefficients, b_field: f64) -> Result<f64> {
    require_beta4(coeffs)?;
    ensure_finite("b_field", b_field)?;
    Ok(-coeffs.linear_slope(b_field) / (2.0 * coeffs.beta4))
}

/// Shift at the vertex, `-(beta1 + beta2 B)^2 / (4 beta4)`.
pub fn dls_minimum(coeffs: &TrapCoefficients, b_field: f64) -> Result<f64> {
    require_beta4(coeffs)?;
    ensure_finite("b_field", b_field)?;
    let s = coeffs.linear_slope(b_field);
    Ok(-s * s / (4.0 * coeffs.beta4))
}

/// Field at which the magic depth reaches zero, `-beta1 / beta2`.
pub fn zero_crossing_field(coeffs: &TrapCoefficients) -> Result<f64> {
    if coeffs.beta2 == 0.0 {
        return Err(Error::NoZeroCrossing);
    }
    // must stay bit-identical to the expression in `linear_slope`
    Ok(-coeffs.beta1 / coeffs.beta2)
}

/// Builds beta2 and beta4 from the vector/scalar polarizability ratio.
pub fn coeffs_from_atomic(input: &AtomicInput, nu0: f64) -> Result<TrapCoefficients> {
    let a = ensure_finite("polarization_A", input.polarization_a)?;
    let ratio = ensure_finite("vector_to_scalar_ratio", input.vector_to_scalar_ratio)?;
    ensure_finite("beta1", input.beta1)?;
    if a.abs() > 1.0 {
        return Err(Error::OutOfRange {
            value: a,
            lo: -1.0,
            hi: 1.0,
        });
    }
    if !(nu0 > 0.0 && nu0.is_finite()) {
        return Err(Error::invalid("nu0", format!("must be > 0, got {nu0}")));
    }
    Ok(TrapCoefficients {
        beta1: input.beta1,
        beta2: -2.0 * a * BOHR_MAGNETON_OVER_H * ratio / nu0,
        beta4: a * a / (2.0 * nu0) * ratio * ratio,
        polarization_a: a,
    })
}

/// [`coeffs_from_atomic`] with the Rb-87 splitting.
pub fn coeffs_from_atomic_rb87(input: &AtomicInput) -> Result<TrapCoefficients> {
    coeffs_from_atomic(input, RB87_HYPERFINE_NU0)
}

/// Zeeman field equivalent to the vector light shift, in G.
pub fn effective_field(ratio: f64, depth: f64) -> Result<f64> {
    let ratio = ensure_finite("ratio", ratio)?;
    let u = check_depth(depth)?;
    Ok(ratio * u.abs() / (2.0 * BOHR_MAGNETON_OVER_H))
}

/// Depth calibration from a shift measured in a linearly polarized trap.
pub fn depth_from_linear_dls(measured_dls: f64, beta1: f64) -> Result<f64> {
    ensure_finite("measured_dls", measured_dls)?;
    if beta1 == 0.0 || !beta1.is_finite() {
        return Err(Error::invalid("beta1", "must be finite and non-zero"));
    }
    Ok(measured_dls / beta1)
}
