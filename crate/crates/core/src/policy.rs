//! Numeric tolerances used across the crate, kept in one record so tests and
//! the CLI can tighten or loosen them uniformly.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericPolicy {
    /// Max |H - H^dag| entry accepted for a Hermitian input.
    pub hermitian_tol: f64,
    /// |Tr rho - 1| accepted for a density matrix.
    pub trace_tol: f64,
    /// Most negative eigenvalue accepted for a density matrix.
    pub psd_tol: f64,
    /// Max |U^dag U - 1| entry accepted for a unitary.
    pub unitary_tol: f64,
    /// Relative eigenvalue grouping tolerance (scaled by max |H_ij|).
    pub grouping_rel_tol: f64,
    /// Relative work-binning tolerance (scaled by max |E|).
    pub binning_rel_tol: f64,
}

impl NumericPolicy {
    pub const fn f64_defaults() -> Self {
        Self {
            hermitian_tol: 1e-9,
            trace_tol: 1e-10,
            psd_tol: 1e-10,
            unitary_tol: 1e-10,
            grouping_rel_tol: 1e-8,
            binning_rel_tol: 1e-9,
        }
    }

    pub const fn f32_defaults() -> Self {
        Self {
            hermitian_tol: 1e-4,
            trace_tol: 1e-5,
            psd_tol: 1e-5,
            unitary_tol: 1e-5,
            grouping_rel_tol: 1e-4,
            binning_rel_tol: 1e-5,
        }
    }

    /// Multiplies every tolerance by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            hermitian_tol: self.hermitian_tol * factor,
            trace_tol: self.trace_tol * factor,
            psd_tol: self.psd_tol * factor,
            unitary_tol: self.unitary_tol * factor,
            grouping_rel_tol: self.grouping_rel_tol * factor,
            binning_rel_tol: self.binning_rel_tol * factor,
        }
    }
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self::f64_defaults()
    }
}
