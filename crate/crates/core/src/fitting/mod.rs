//! Parameter estimation: global light-shift fits across bias fields,
//! damped-sinusoid Ramsey fits and exponential envelope fits, plus the
//! synthetic data generators used to validate them.

mod damped;
mod envelope;
mod lightshift;
mod linear;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use damped::{damped_sinusoid, fit_damped_sinusoid, synth_ramsey, RamseySample};
pub use envelope::{fit_envelope, EnvelopeSample};
pub use lightshift::{
    fit_dls_global, fit_dls_global_free_beta1, magic_depth_uncertainty, synth_dls, DlsDataset, DlsPoint,
};

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<&'static str>,
    pub values: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub chi_square: f64,
    pub dof: usize,
}

impl FitResult {
    fn new(
        names: Vec<&'static str>,
        values: Vec<f64>,
        covariance: DMatrix<f64>,
        chi_square: f64,
        n_points: usize,
    ) -> Result<Self> {
        let n_params = names.len();
        if n_points <= n_params {
            return Err(Error::invalid(
                "points",
                format!("{n_points} points cannot constrain {n_params} parameters"),
            ));
        }
        Ok(FitResult {
            names,
            values,
            covariance,
            chi_square,
            dof: n_points - n_params,
        })
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| *n == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.values[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.covariance[(i, i)].max(0.0).sqrt())
    }

    pub fn reduced_chi_square(&self) -> f64 {
        self.chi_square / self.dof as f64
    }

    /// Covariance rescaled by chi2/dof, for data whose sigmas are only
    /// relative weights.
    pub fn scaled_by_reduced_chi_square(&self) -> Self {
        FitResult {
            covariance: &self.covariance * self.reduced_chi_square(),
            ..self.clone()
        }
    }
}

fn check_sigma(sigma: f64) -> Result<f64> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(sigma)
    } else {
        Err(Error::invalid("sigma", format!("must be finite and > 0, got {sigma}")))
    }
}
