//! Closed-form poroelastic coefficient models and the simulation parameter set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds in a 365-day year.
pub const SECONDS_PER_YEAR: f64 = 365.0 * 24.0 * 3600.0;

/// Porosity is kept inside `[POROSITY_MIN, 1 - POROSITY_MIN]`.
pub const POROSITY_MIN: f64 = 1e-6;

/// Linear-model coefficients of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialParams {
    /// Young's modulus (Pa).
    pub young: f64,
    /// Poisson ratio.
    pub poisson: f64,
    /// Biot coefficient.
    pub biot: f64,
    /// Matrix storage `1/M` (1/Pa).
    pub a_m: f64,
    /// Fracture storage `b c_f`.
    pub a_f: f64,
    /// Matrix mobility `k_m / ν_f`.
    pub b_m: f64,
    /// Fracture mobility `b k_f / ν_f`.
    pub b_f: f64,
    /// Matrix–fracture transfer coefficient.
    pub beta: f64,
    /// Initial pressure (Pa).
    pub p0: f64,
    /// Source strength per source cell.
    pub q: f64,
    /// Final time (s).
    pub t_max: f64,
    pub n_steps: usize,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            young: 1e10,
            poisson: 0.3,
            biot: 0.1,
            a_m: 1e-6,
            a_f: 1e-7,
            b_m: 1e-11,
            b_f: 1e-6,
            beta: 1e-10,
            p0: 1e7,
            q: 0.01,
            t_max: 10.0 * SECONDS_PER_YEAR,
            n_steps: 50,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(what.to_string()))
            }
        };
        check(self.young > 0.0, "Young's modulus must be positive")?;
        check(
            (0.0..0.5).contains(&self.poisson),
            "Poisson ratio must lie in [0, 0.5)",
        )?;
        check((0.0..=1.0).contains(&self.biot), "Biot coefficient must lie in [0, 1]")?;
        for (v, name) in [
            (self.a_m, "a_m"),
            (self.a_f, "a_f"),
            (self.b_m, "b_m"),
            (self.b_f, "b_f"),
            (self.beta, "beta"),
        ] {
            check(v >= 0.0 && v.is_finite(), &format!("{name} must be non-negative"))?;
        }
        check(self.t_max > 0.0, "t_max must be positive")?;
        check(self.n_steps >= 1, "n_steps must be at least 1")
    }

    /// Time step `t_max / n_steps`.
    pub fn tau(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn lame(&self) -> Result<(f64, f64)> {
        lame(self.young, self.poisson)
    }
}

/// Reference state for the porosity / permeability update laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoroState {
    pub phi0: f64,
    /// Reference permeability (m²).
    pub k0: f64,
    /// Solid grain stiffness (Pa).
    pub ks: f64,
    /// Fluid compressibility (1/Pa).
    pub cf: f64,
    /// Power-law exponent.
    pub n_exp: f64,
}

impl PoroState {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi0 > 0.0 && self.phi0 < 1.0) {
            return Err(Error::invalid("reference porosity must lie in (0, 1)"));
        }
        if !(self.k0 > 0.0 && self.ks > 0.0) {
            return Err(Error::invalid("k0 and Ks must be positive"));
        }
        if self.cf < 0.0 {
            return Err(Error::invalid("fluid compressibility must be non-negative"));
        }
        Ok(())
    }

    /// `1/N = (α − Φ₀)/K_s`.
    pub fn inverse_n(&self, alpha: f64) -> f64 {
        (alpha - self.phi0) / self.ks
    }
}

/// Lamé parameters `(μ, λ)` from Young's modulus and Poisson ratio.
pub fn lame(young: f64, poisson: f64) -> Result<(f64, f64)> {
    if !(young > 0.0) {
        return Err(Error::invalid("Young's modulus must be positive"));
    }
    if !(0.0..0.5).contains(&poisson) {
        return Err(Error::invalid(format!(
            "Poisson ratio {poisson} outside [0, 0.5); 0.5 is the incompressible limit"
        )));
    }
    let mu = young / (2.0 * (1.0 + poisson));
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    Ok((mu, lambda))
}

/// Biot storage `1/M = Φ c_f + (α − Φ₀)/K_s`.
pub fn biot_inverse_modulus(ps: &PoroState, phi: f64, alpha: f64) -> f64 {
    phi * ps.cf + ps.inverse_n(alpha)
}

/// Porosity after deformation and pressure change, clamped to `(0, 1)`.
pub fn porosity_update(ps: &PoroState, alpha: f64, eps_v: f64, p_m: f64, p0: f64) -> f64 {
    let phi = ps.phi0 + alpha * eps_v + ps.inverse_n(alpha) * (p_m - p0);
    phi.clamp(POROSITY_MIN, 1.0 - POROSITY_MIN)
}

/// Power-law permeability `k₀ (Φ/Φ₀)ⁿ`.
pub fn permeability_update(ps: &PoroState, phi: f64) -> f64 {
    ps.k0 * (phi / ps.phi0).powf(ps.n_exp)
}

/// Fracture aperture `b = 2(1 − ν²)/E · p_f`.
pub fn aperture(p_f: f64, young: f64, poisson: f64) -> f64 {
    2.0 * (1.0 - poisson * poisson) / young * p_f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn lame_examples() {
        let (mu, lambda) = lame(1e10, 0.3).unwrap();
        assert!(close(mu, 3.846153846153846e9, 1e-12));
        assert!(close(lambda, 5.769230769230769e9, 1e-12));
        assert_eq!(lame(1.0, 0.0).unwrap(), (0.5, 0.0));
        let (mu, lambda) = lame(2.0, 0.25).unwrap();
        assert!(close(mu, 0.8, 1e-15) && close(lambda, 0.8, 1e-15));
        assert!(matches!(lame(1.0, 0.5), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn biot_modulus_examples() {
        let ps = PoroState { phi0: 0.2, k0: 1e-15, ks: 1e10, cf: 0.0, n_exp: 3.0 };
        assert_eq!(biot_inverse_modulus(&ps, 0.3, 0.2), 0.0);
        let ps = PoroState { cf: 1e-9, ..ps };
        assert!(close(biot_inverse_modulus(&ps, 0.2, 0.4), 2.2e-10, 1e-12));
        let ps = PoroState { phi0: 0.1, k0: 1e-15, ks: 1e9, cf: 1e-10, n_exp: 3.0 };
        assert!(close(biot_inverse_modulus(&ps, 0.1, 0.1), 1e-11, 1e-12));
    }

    #[test]
    fn porosity_examples() {
        let ps = PoroState { phi0: 0.2, k0: 1e-15, ks: 1e10, cf: 1e-9, n_exp: 3.0 };
        assert_eq!(porosity_update(&ps, 0.5, 0.0, 1e7, 1e7), 0.2);
        assert!(close(porosity_update(&ps, 0.5, 0.01, 1e7, 1e7), 0.205, 1e-14));
        assert_eq!(porosity_update(&ps, 0.5, -1e3, 1e7, 1e7), POROSITY_MIN);
    }

    #[test]
    fn permeability_examples() {
        let ps = PoroState { phi0: 0.15, k0: 2e-14, ks: 1e10, cf: 0.0, n_exp: 3.0 };
        assert_eq!(permeability_update(&ps, 0.15), 2e-14);
        assert!(close(permeability_update(&ps, 0.3), 8.0 * 2e-14, 1e-14));
        assert!(close(permeability_update(&ps, 0.18), 1.728 * 2e-14, 1e-12));
    }

    #[test]
    fn aperture_examples() {
        assert_eq!(aperture(0.0, 1e10, 0.3), 0.0);
        assert!(close(aperture(1e7, 1e10, 0.3), 1.82e-3, 1e-12));
        assert_eq!(aperture(1.0, 2.0, 0.0), 1.0);
    }

    #[test]
    fn preset_matches_reference_parameters() {
        let mp = MaterialParams::default();
        mp.validate().unwrap();
        assert!(close(mp.tau(), 6.3072e6, 1e-15));
        assert!(close(mp.t_max, 3.1536e8, 1e-15));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn lame_round_trip(young in 1e-3f64..1e12, poisson in 0.0f64..0.49) {
                let (mu, lambda) = lame(young, poisson).unwrap();
                let e = mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu);
                let nu = lambda / (2.0 * (lambda + mu));
                prop_assert!((e - young).abs() <= 1e-12 * young);
                prop_assert!((nu - poisson).abs() <= 1e-12 * poisson.max(1e-300) || (nu - poisson).abs() < 1e-15);
            }

            #[test]
            fn permeability_monotone(phi in 0.01f64..0.9, dphi in 1e-6f64..0.05, n in 0.5f64..5.0) {
                let ps = PoroState { phi0: 0.2, k0: 1e-13, ks: 1e10, cf: 0.0, n_exp: n };
                prop_assert!(permeability_update(&ps, phi + dphi) > permeability_update(&ps, phi));
            }
        }
    }
}
