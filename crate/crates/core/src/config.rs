use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Max |ρ_ij − conj(ρ_ji)| accepted for a density matrix.
    pub hermitian: f64,
    /// Max |tr ρ − 1|.
    pub trace: f64,
    /// Most negative eigenvalue accepted for a PSD matrix.
    pub psd: f64,
    /// Tolerance for identities between computed information quantities.
    pub numeric: f64,
    /// Eigenvalues with magnitude below this are treated as exact zeros
    /// (entropy terms and projector sign decisions).
    pub spectral_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: 1e-9,
            trace: 1e-9,
            psd: 1e-9,
            numeric: 1e-7,
            spectral_floor: 1e-12,
        }
    }
}

/// Caps guarding the exponential-cost exact computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Largest output dimension d^N that may be materialized.
    pub max_dim: usize,
    /// Largest number of classical context assignments enumerated for one quantity.
    pub max_contexts: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_dim: 4096,
            max_contexts: 1 << 20,
        }
    }
}
