//! Rock-physics chain from sonic and density logs to unconfined compressive
//! strength: dynamic Young's modulus, static modulus, then UCS.
//!
//! With density in g/cm³ and slowness in µs/mm (= s/km) the default `c = 1`
//! yields moduli in GPa and UCS in MPa.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConstants {
    /// Unit-conversion factor on the dynamic modulus.
    pub c: f64,
    pub a_stat: f64,
    pub b_stat: f64,
    pub a_ucs: f64,
    pub b_ucs: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self {
            c: 1.0,
            a_stat: 0.414,
            b_stat: -1.05,
            a_ucs: 4.1089,
            b_ucs: 2.28,
        }
    }
}

/// Density and sonic slownesses at one depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SonicSample {
    pub rho: f64,
    pub dts: f64,
    pub dtp: f64,
}

/// Smallest admissible shear/compressional slowness ratio, 2/√3.
pub const MIN_SLOWNESS_RATIO: f64 = 1.154_700_538_379_251_5;

impl SonicSample {
    pub fn new(rho: f64, dts: f64, dtp: f64) -> Self {
        Self { rho, dts, dtp }
    }

    pub fn validate(&self) -> Result<()> {
        let SonicSample { rho, dts, dtp } = *self;
        if !(rho.is_finite() && dts.is_finite() && dtp.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite sample (rho={rho}, dts={dts}, dtp={dtp})"
            )));
        }
        if rho <= 0.0 || dtp <= 0.0 {
            return Err(Error::Domain(format!(
                "density and compressional slowness must be positive (rho={rho}, dtp={dtp})"
            )));
        }
        // Both 3·dts² − 4·dtp² and dts² − dtp² must be positive.
        if 3.0 * dts * dts - 4.0 * dtp * dtp <= 0.0 || dts <= dtp {
            return Err(Error::Domain(format!(
                "dts/dtp = {} must exceed 2/sqrt(3)",
                dts / dtp
            )));
        }
        Ok(())
    }
}

pub fn dynamic_youngs_modulus(s: SonicSample, k: &PhysicsConstants) -> Result<f64> {
    s.validate()?;
    let dts2 = s.dts * s.dts;
    let dtp2 = s.dtp * s.dtp;
    Ok(k.c * (s.rho / dts2) * ((3.0 * dts2 - 4.0 * dtp2) / (dts2 - dtp2)))
}

pub fn static_from_dynamic(e_dyn: f64, k: &PhysicsConstants) -> f64 {
    k.a_stat * e_dyn + k.b_stat
}

pub fn ucs_from_static(e_stat: f64, k: &PhysicsConstants) -> f64 {
    k.b_ucs + k.a_ucs * e_stat
}

pub fn ucs_from_logs(s: SonicSample, k: &PhysicsConstants) -> Result<f64> {
    let e_dyn = dynamic_youngs_modulus(s, k)?;
    Ok(ucs_from_static(static_from_dynamic(e_dyn, k), k))
}

/// Sign of dUCS/dE_dyn, i.e. whether UCS rises or falls with the indirect label.
pub fn expected_correlation_sign(k: &PhysicsConstants) -> Result<f64> {
    let slope = k.a_stat * k.a_ucs;
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::Degenerate(format!(
            "composite UCS slope is {slope}; orientation is undefined"
        )));
    }
    Ok(slope.signum())
}
