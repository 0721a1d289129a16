//! Physical constants and the kelvin <-> hertz conversions used at the
//! library boundary. Internally every energy is carried as `E / h` in Hz.

use crate::error::{ensure_finite, Result};

/// Planck constant, J s (exact, SI 2019).
pub const PLANCK_H: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K (exact, SI 2019).
pub const BOLTZMANN_KB: f64 = 1.380_649e-23;
/// Bohr magneton over h, Hz/G.
pub const BOHR_MAGNETON_OVER_H: f64 = 1.399_624_604e6;
/// Rb-87 ground-state hyperfine splitting, Hz.
pub const RB87_HYPERFINE_NU0: f64 = 6.834_682_611e9;

/// kB / h in Hz/K.
pub const KB_OVER_H: f64 = BOLTZMANN_KB / PLANCK_H;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub planck_h: f64,
    pub boltzmann_kb: f64,
    pub bohr_magneton_over_h: f64,
    pub rb87_hyperfine_nu0: f64,
}

impl PhysicalConstants {
    pub const fn pinned() -> Self {
        PhysicalConstants {
            planck_h: PLANCK_H,
            boltzmann_kb: BOLTZMANN_KB,
            bohr_magneton_over_h: BOHR_MAGNETON_OVER_H,
            rb87_hyperfine_nu0: RB87_HYPERFINE_NU0,
        }
    }

    pub fn kb_over_h(&self) -> f64 {
        self.boltzmann_kb / self.planck_h
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::pinned()
    }
}

/// Signed conversion `T * kB / h`.
pub fn hz_from_kelvin(kelvin: f64) -> Result<f64> {
    Ok(ensure_finite("temperature", kelvin)? * KB_OVER_H)
}

pub fn kelvin_from_hz(hz: f64) -> Result<f64> {
    Ok(ensure_finite("frequency", hz)? / KB_OVER_H)
}

/// `kB T / h` for a temperature given in kelvin; no validation.
#[inline]
pub(crate) fn thermal_hz(kelvin: f64) -> f64 {
    kelvin * KB_OVER_H
}

/// Trap depth entered as a positive number in mK, returned as the signed
/// (negative) light shift in Hz.
pub fn depth_hz_from_mk(depth_mk: f64) -> Result<f64> {
    let mk = ensure_finite("depth_mk", depth_mk)?;
    Ok(-(mk * 1e-3) * KB_OVER_H)
}

/// Inverse of [`depth_hz_from_mk`]: the positive depth in mK.
pub fn depth_mk_from_hz(depth_hz: f64) -> Result<f64> {
    Ok(-kelvin_from_hz(depth_hz)? * 1e3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn constants_positive() {
        let c = PhysicalConstants::pinned();
        for v in [c.planck_h, c.boltzmann_kb, c.bohr_magneton_over_h, c.rb87_hyperfine_nu0] {
            assert!(v > 0.0);
        }
        assert_relative_eq!(c.kb_over_h(), 2.083_661_9e10, max_relative = 1e-7);
    }

    #[test]
    fn conversion_examples() {
        assert_eq!(hz_from_kelvin(0.0).unwrap(), 0.0);
        assert_relative_eq!(hz_from_kelvin(0.17e-3).unwrap(), 3.5422e6, max_relative = 1e-5);
        assert_relative_eq!(hz_from_kelvin(17e-6).unwrap(), 3.5422e5, max_relative = 1e-5);
        assert_eq!(kelvin_from_hz(0.0).unwrap(), 0.0);
        assert_relative_eq!(kelvin_from_hz(3.5422e6).unwrap(), 1.70e-4, max_relative = 1e-4);
        assert!(hz_from_kelvin(-1e-6).unwrap() < 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert_eq!(hz_from_kelvin(f64::NAN).unwrap_err().code(), "invalid-argument");
        assert!(kelvin_from_hz(f64::INFINITY).is_err());
        assert!(depth_hz_from_mk(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn mk_depth_is_negated() {
        let u = depth_hz_from_mk(0.2).unwrap();
        assert!(u < 0.0);
        assert_relative_eq!(depth_mk_from_hz(u).unwrap(), 0.2, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn round_trip(mag in -3.0f64..12.0, neg in any::<bool>()) {
            let x = if neg { -(10f64.powf(mag)) } else { 10f64.powf(mag) };
            let back = hz_from_kelvin(kelvin_from_hz(x).unwrap()).unwrap();
            prop_assert!(((back - x) / x).abs() < 1e-12);
        }

        #[test]
        fn linear(t in -1e-2f64..1e-2, a in -50.0f64..50.0) {
            let lhs = hz_from_kelvin(a * t).unwrap();
            let rhs = a * hz_from_kelvin(t).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
        }
    }
}
