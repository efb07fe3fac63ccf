use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the coupled elastic/magnetic system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub rho_m: f64,
    pub mu: f64,
    pub lambda: f64,
    pub nu1: f64,
    #[serde(default = "default_mu0")]
    pub mu0: f64,
    #[serde(default)]
    pub b0: f64,
}

fn default_mu0() -> f64 {
    1.0
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            rho_m: 1.0,
            mu: 1.0,
            lambda: 1.0,
            nu1: 1.0,
            mu0: 1.0,
            b0: 1.0,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("rho_m", self.rho_m),
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("nu1", self.nu1),
            ("mu0", self.mu0),
        ];
        for (name, v) in checks {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.b0.is_finite() {
            return Err(Error::Parameter("b0 must be finite".into()));
        }
        Ok(())
    }

    /// Coefficient of `grad div` in the Lame operator.
    pub fn grad_div(&self) -> f64 {
        self.lambda + self.mu
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        MaterialParams::default().validate().unwrap();
    }

    #[test]
    fn rejects_nonpositive() {
        let p = MaterialParams {
            nu1: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = MaterialParams {
            lambda: -0.1,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn json_defaults() {
        let p: MaterialParams =
            serde_json::from_str(r#"{"rho_m":1,"mu":2,"lambda":3,"nu1":0.5}"#).unwrap();
        assert_eq!(p.mu0, 1.0);
        assert_eq!(p.b0, 0.0);
    }
}
