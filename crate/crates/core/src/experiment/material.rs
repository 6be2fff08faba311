use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaterialKind {
    Linear,
    /// eta(B) = eta_sat * tanh(B / B_sat), eta_sat = slope * B_sat.
    Saturating,
}

/// Magneto-optical response of the sample versus applied field (tesla).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialResponse {
    pub kind: MaterialKind,
    /// d eta_F / dB at B = 0, per tesla.
    pub slope: f64,
    /// Tesla; used by the saturating law only.
    pub saturation_field: f64,
    /// d theta_F / dB, radians per tesla. Does not affect the detected power
    /// in this geometry.
    pub theta_slope: f64,
}

impl MaterialResponse {
    pub fn linear(slope: f64) -> Self {
        Self {
            kind: MaterialKind::Linear,
            slope,
            saturation_field: 1.0,
            theta_slope: 0.0,
        }
    }

    pub fn saturating(slope: f64, saturation_field: f64) -> Self {
        Self {
            kind: MaterialKind::Saturating,
            slope,
            saturation_field,
            theta_slope: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.slope.is_finite() || !self.theta_slope.is_finite() {
            return Err(Error::invalid("material.slope", "must be finite"));
        }
        if self.kind == MaterialKind::Saturating && !(self.saturation_field > 0.0) {
            return Err(Error::invalid(
                "material.saturation_field",
                "must be > 0 for a saturating response",
            ));
        }
        Ok(())
    }

    pub fn eta_at(&self, field: f64) -> f64 {
        match self.kind {
            MaterialKind::Linear => self.slope * field,
            MaterialKind::Saturating => {
                self.slope * self.saturation_field * (field / self.saturation_field).tanh()
            }
        }
    }

    pub fn theta_at(&self, field: f64) -> f64 {
        self.theta_slope * field
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laws() {
        let lin = MaterialResponse::linear(0.03);
        assert_eq!(lin.eta_at(0.5), 0.015);
        let sat = MaterialResponse::saturating(0.03, 0.2);
        assert!((sat.eta_at(1e-6) - 0.03e-6).abs() < 1e-15);
        assert!((sat.eta_at(10.0) - 0.006).abs() < 1e-12);
        assert!(MaterialResponse::saturating(0.03, 0.0).validate().is_err());
    }
}
