use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::real::Real;

/// Hydrogen atomic mass (u).
pub const MASS_H: f64 = 1.007825;
/// Methyl cation mass (u).
pub const MASS_CH3: f64 = 15.0235;
/// Moment of inertia of the CH3+ rotor (u·Å²).
///
/// Not part of the potential definition; taken from the literature that set up
/// this reduced model. Potential-only results do not depend on it.
pub const INERTIA_CH3: f64 = 2.373409;

/// Physical constants of the model. Units: kcal/mol, Å, u.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct ModelParams<S> {
    /// C–H dissociation energy.
    #[serde(rename = "D_e")]
    pub de: S,
    /// Equilibrium bond length.
    #[serde(rename = "r_e")]
    pub re: S,
    pub c1: S,
    pub c2: S,
    /// Hindered-rotor barrier height.
    #[serde(rename = "U_e")]
    pub ue: S,
    /// Gaussian decay rate of the rotor barrier (Å⁻²).
    pub a: S,
    /// Reduced mass of H relative to CH3+.
    pub m: S,
    /// Moment of inertia of the rigid CH3+.
    #[serde(rename = "I")]
    pub inertia: S,
    /// Total (conserved) angular momentum.
    pub lambda: S,
    /// Radius below which the potential is not evaluated.
    pub r_cut: S,
}

impl<S: Real> Default for ModelParams<S> {
    fn default() -> Self {
        Self {
            de: S::lit(47.0),
            re: S::lit(1.1),
            c1: S::lit(7.37),
            c2: S::lit(1.61),
            ue: S::lit(55.0),
            a: S::lit(1.0),
            m: S::lit(MASS_H * MASS_CH3 / (MASS_H + MASS_CH3)),
            inertia: S::lit(INERTIA_CH3),
            lambda: S::zero(),
            r_cut: S::lit(0.9),
        }
    }
}

impl<S: Real> ModelParams<S> {
    pub fn validate(&self) -> Result<(), ModelError> {
        let checks = [
            ("D_e", self.de > S::zero()),
            ("r_e", self.re > S::zero()),
            ("c1", self.c1 > S::lit(6.0)),
            ("U_e", self.ue >= S::zero()),
            ("a", self.a > S::zero()),
            ("m", self.m > S::zero()),
            ("I", self.inertia > S::zero()),
            ("r_cut", self.r_cut > S::zero()),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(ModelError::InvalidParameter(name));
            }
        }
        if !self.lambda.is_finite() || !self.c2.is_finite() {
            return Err(ModelError::InvalidParameter("lambda/c2"));
        }
        Ok(())
    }

    pub fn with_lambda(mut self, lambda: S) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_inertia(mut self, inertia: S) -> Self {
        self.inertia = inertia;
        self
    }

    /// Converts to another scalar type.
    pub fn cast<T: Real>(&self) -> ModelParams<T> {
        let c = |x: S| T::lit(x.as_f64());
        ModelParams {
            de: c(self.de),
            re: c(self.re),
            c1: c(self.c1),
            c2: c(self.c2),
            ue: c(self.ue),
            a: c(self.a),
            m: c(self.m),
            inertia: c(self.inertia),
            lambda: c(self.lambda),
            r_cut: c(self.r_cut),
        }
    }

    /// Size of one model time unit in femtoseconds (u·Å²/(kcal/mol) under the square root).
    pub fn time_unit_fs() -> f64 {
        const AMU: f64 = 1.660_539_066_60e-27;
        const KCAL_PER_MOL: f64 = 4184.0 / 6.022_140_76e23;
        (AMU * 1e-20 / KCAL_PER_MOL).sqrt() * 1e15
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let p = ModelParams::<f64>::default();
        p.validate().unwrap();
        assert!((p.m - 0.944_465).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_c1() {
        let p = ModelParams::<f64> { c1: 6.0, ..Default::default() };
        assert!(matches!(p.validate(), Err(ModelError::InvalidParameter("c1"))));
    }

    #[test]
    fn time_unit() {
        let fs = ModelParams::<f64>::time_unit_fs();
        assert!((fs - 48.888).abs() < 0.01, "{fs}");
    }

    #[test]
    fn json_names() {
        let s = serde_json::to_string(&ModelParams::<f64>::default()).unwrap();
        assert!(s.contains("\"D_e\"") && s.contains("\"I\""));
        let back: ModelParams<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, ModelParams::default());
    }
}
