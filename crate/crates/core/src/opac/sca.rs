use crate::error::{Error, Result};

/// Coefficients of log2(1+γ) ≥ ζ log2 γ + Ω, tight at the anchor γ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaCoefficients {
    pub zeta: f64,
    pub omega: f64,
}

impl ScaCoefficients {
    pub fn lower_bound(&self, gamma: f64) -> f64 {
        self.zeta * gamma.log2() + self.omega
    }
}

pub fn sca_bound(gamma0: f64) -> Result<ScaCoefficients> {
    if !(gamma0 > 0.0 && gamma0.is_finite()) {
        return Err(Error::invalid(format!("SCA anchor must be a positive SINR, got {gamma0}")));
    }
    let zeta = gamma0 / (1.0 + gamma0);
    let omega = gamma0.ln_1p() / std::f64::consts::LN_2 - zeta * gamma0.log2();
    Ok(ScaCoefficients { zeta, omega })
}
