// SPDX-License-Identifier: Apache-2.0

//! Thermal photon bath: occupation factor n(ω) = coth(βω/2) and its split
//! into the vacuum piece (1) and the thermal excess n − 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{self, Unit};

/// Default fraction of the particle rest energy used for the soft-photon cutoff.
pub const DEFAULT_CUTOFF_FRACTION: f64 = 1e-2;

/// How the frequency cutoff Ω_max is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffPolicy {
    /// Ω_max given directly, in eV.
    Explicit(f64),
    /// Ω_max = fraction × m_f.
    Auto { fraction: f64 },
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        CutoffPolicy::Auto { fraction: DEFAULT_CUTOFF_FRACTION }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    /// Photon temperature in kelvin.
    pub temperature_k: f64,
    pub cutoff: CutoffPolicy,
}

impl BathSpec {
    pub fn new(temperature_k: f64, cutoff: CutoffPolicy) -> Result<Self> {
        if !(temperature_k >= 0.0 && temperature_k.is_finite()) {
            return Err(Error::invalid(format!("temperature must be >= 0 K, got {temperature_k}")));
        }
        match cutoff {
            CutoffPolicy::Explicit(w) if !(w > 0.0 && w.is_finite()) => {
                return Err(Error::invalid(format!("omega_max must be > 0, got {w}")))
            }
            CutoffPolicy::Auto { fraction } if !(fraction > 0.0 && fraction.is_finite()) => {
                return Err(Error::invalid(format!("cutoff fraction must be > 0, got {fraction}")))
            }
            _ => {}
        }
        Ok(BathSpec { temperature_k, cutoff })
    }

    /// Vacuum bath with an explicit cutoff in eV.
    pub fn vacuum(omega_max_ev: f64) -> Self {
        BathSpec { temperature_k: 0.0, cutoff: CutoffPolicy::Explicit(omega_max_ev) }
    }

    /// Fix Ω_max for a particle of the given mass.
    pub fn resolve(&self, mass_ev: f64) -> Result<ResolvedBath> {
        let omega_max = match self.cutoff {
            CutoffPolicy::Explicit(w) => w,
            CutoffPolicy::Auto { fraction } => fraction * mass_ev,
        };
        if !(omega_max > 0.0 && omega_max.is_finite()) {
            return Err(Error::invalid(format!("resolved omega_max must be > 0, got {omega_max}")));
        }
        let beta = if self.temperature_k > 0.0 {
            Some(1.0 / units::to_natural(self.temperature_k, Unit::Kelvin))
        } else {
            None
        };
        Ok(ResolvedBath { beta, omega_max })
    }
}

/// Bath with the cutoff fixed: β in eV⁻¹ (`None` at zero temperature) and Ω_max in eV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedBath {
    pub beta: Option<f64>,
    pub omega_max: f64,
}

impl ResolvedBath {
    pub fn zero_temperature(omega_max: f64) -> Self {
        ResolvedBath { beta: None, omega_max }
    }

    pub fn with_beta(beta: f64, omega_max: f64) -> Self {
        ResolvedBath { beta: Some(beta), omega_max }
    }

    pub fn is_vacuum(&self) -> bool {
        self.beta.is_none()
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("photon frequency must be > 0, got {omega}")))
    }
}

/// n(ω) = coth(βω/2); exactly 1 at zero temperature.
pub fn photon_occupancy(omega: f64, beta: Option<f64>) -> Result<f64> {
    check_omega(omega)?;
    Ok(match beta {
        None => 1.0,
        Some(b) => occupancy_unchecked(b * omega),
    })
}

/// n(ω) − 1 = 2/(e^{βω} − 1); exactly 0 at zero temperature.
pub fn thermal_excess(omega: f64, beta: Option<f64>) -> Result<f64> {
    check_omega(omega)?;
    Ok(match beta {
        None => 0.0,
        Some(b) => excess_unchecked(b * omega),
    })
}

/// coth(x/2) for x = βω > 0.
#[inline]
pub(crate) fn occupancy_unchecked(x: f64) -> f64 {
    if x < 20.0 {
        1.0 / (0.5 * x).tanh()
    } else {
        1.0 + excess_unchecked(x)
    }
}

/// 2/(e^x − 1) for x = βω > 0.
#[inline]
pub(crate) fn excess_unchecked(x: f64) -> f64 {
    2.0 / x.exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_values() {
        assert_eq!(photon_occupancy(3.0, None).unwrap(), 1.0);
        assert_eq!(thermal_excess(3.0, None).unwrap(), 0.0);
    }

    #[test]
    fn coth_one() {
        // mpmath: coth(1)
        let n = photon_occupancy(2.0, Some(1.0)).unwrap();
        assert!((n - 1.313_035_285_499_331_3).abs() < 1e-15);
        let e = thermal_excess(2.0, Some(1.0)).unwrap();
        assert!((e - 0.313_035_285_499_331_3).abs() < 1e-15);
    }

    #[test]
    fn exact_ln2_point() {
        let e = thermal_excess(std::f64::consts::LN_2, Some(1.0)).unwrap();
        assert!((e - 2.0).abs() < 1e-14);
    }

    #[test]
    fn large_argument_asymptote() {
        let n = photon_occupancy(50.0, Some(1.0)).unwrap();
        assert!((n - (1.0 + 2.0 * (-50.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn pole_strength() {
        let x = 1e-8;
        let e = thermal_excess(x, Some(1.0)).unwrap();
        assert!((x * e / 2.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_nonpositive_frequency() {
        assert!(photon_occupancy(0.0, Some(1.0)).is_err());
        assert!(thermal_excess(-1.0, None).is_err());
    }

    #[test]
    fn auto_cutoff_resolution() {
        let bath = BathSpec::new(1.0, CutoffPolicy::default()).unwrap();
        let r = bath.resolve(1e6).unwrap();
        assert_eq!(r.omega_max, 1e4);
        assert!((r.beta.unwrap() * 8.617333262e-5 - 1.0).abs() < 1e-15);
        assert!(BathSpec::new(-1.0, CutoffPolicy::default()).is_err());
        assert!(BathSpec::new(1.0, CutoffPolicy::Explicit(0.0)).is_err());
    }

    proptest::proptest! {
        #[test]
        fn decomposition(x in 1e-6f64..200.0) {
            let n = occupancy_unchecked(x);
            let e = excess_unchecked(x);
            proptest::prop_assert!((n - (1.0 + e)).abs() <= 1e-14 * n);
        }

        #[test]
        fn excess_monotone(w in 1e-3f64..50.0, dw in 1e-3f64..5.0, beta in 0.1f64..10.0) {
            let lo = thermal_excess(w, Some(beta)).unwrap();
            let hi = thermal_excess(w + dw, Some(beta)).unwrap();
            proptest::prop_assert!(hi < lo);
            // hotter bath (smaller beta) has more thermal photons
            let hot = thermal_excess(w, Some(beta * 0.5)).unwrap();
            proptest::prop_assert!(hot > lo);
        }
    }
}
