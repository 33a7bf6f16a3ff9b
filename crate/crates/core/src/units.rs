// SPDX-License-Identifier: Apache-2.0

//! Physical constants, SI <-> natural unit conversion and the particle registry.
//!
//! Internally every quantity is expressed in natural units (ħ = c = k_B = 1)
//! with energies in eV: times and lengths carry eV⁻¹, temperatures and
//! angular frequencies carry eV.
//!
//! Constants (CODATA 2018):
//!
//! | quantity                 | value                  | unit  |
//! |--------------------------|------------------------|-------|
//! | ħ                        | 6.582119569e-16        | eV·s  |
//! | ħc                       | 1.973269804e-7         | eV·m  |
//! | k_B                      | 8.617333262e-5         | eV/K  |
//! | c                        | 299792458              | m/s   |
//! | α                        | 7.2973525693e-3        |       |
//! | m_e c²                   | 0.51099895000e6        | eV    |
//! | atomic mass unit (u c²)  | 931.49410242e6         | eV    |
//! | Euler-Mascheroni γ       | 0.5772156649015329     |       |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HBAR_EV_S: f64 = 6.582119569e-16;
pub const HBAR_C_EV_M: f64 = 1.973269804e-7;
pub const BOLTZMANN_EV_PER_K: f64 = 8.617333262e-5;
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;
pub const FINE_STRUCTURE: f64 = 7.2973525693e-3;
pub const ELECTRON_MASS_EV: f64 = 0.510_998_950_00e6;
pub const ATOMIC_MASS_UNIT_EV: f64 = 931.494_102_42e6;
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Atomic masses in u (AME 2016 / CODATA tables). Neutral-atom masses.
const RB87_MASS_U: f64 = 86.909_180_531;
const AG107_MASS_U: f64 = 106.905_091_6;
const NB93_MASS_U: f64 = 92.906_373_0;

/// Unit tags accepted at the SI boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Seconds,
    Meters,
    Kelvin,
    ElectronVolts,
    RadPerSecond,
}

impl Unit {
    /// Multiplier taking the SI value to natural units.
    fn factor(self) -> f64 {
        match self {
            Unit::Seconds => 1.0 / HBAR_EV_S,
            Unit::Meters => 1.0 / HBAR_C_EV_M,
            Unit::Kelvin => BOLTZMANN_EV_PER_K,
            Unit::ElectronVolts => 1.0,
            Unit::RadPerSecond => HBAR_EV_S,
        }
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s" | "seconds" => Ok(Unit::Seconds),
            "m" | "meters" => Ok(Unit::Meters),
            "K" | "kelvin" => Ok(Unit::Kelvin),
            "eV" | "ev" => Ok(Unit::ElectronVolts),
            "rad/s" | "rad_per_second" => Ok(Unit::RadPerSecond),
            other => Err(Error::invalid(format!("unknown unit tag `{other}`"))),
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::Seconds => "s",
            Unit::Meters => "m",
            Unit::Kelvin => "K",
            Unit::ElectronVolts => "eV",
            Unit::RadPerSecond => "rad/s",
        };
        f.write_str(s)
    }
}

/// Express an SI quantity in eV-based natural units.
pub fn to_natural(value: f64, unit: Unit) -> f64 {
    value * unit.factor()
}

/// Inverse of [`to_natural`].
pub fn from_natural(value: f64, unit: Unit) -> f64 {
    value / unit.factor()
}

/// Test particle: mass in eV and charge as a multiple of the elementary charge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSpec {
    pub label: String,
    pub mass_ev: f64,
    pub charge: f64,
}

impl ParticleSpec {
    pub fn new(label: impl Into<String>, mass_ev: f64, charge: f64) -> Result<Self> {
        if !(mass_ev > 0.0 && mass_ev.is_finite()) {
            return Err(Error::invalid(format!("particle mass must be positive, got {mass_ev}")));
        }
        if !charge.is_finite() {
            return Err(Error::invalid("particle charge must be finite"));
        }
        Ok(ParticleSpec { label: label.into(), mass_ev, charge })
    }

    /// Effective coupling q²α entering every dephasing formula.
    pub fn coupling(&self) -> f64 {
        self.charge * self.charge * FINE_STRUCTURE
    }
}

pub fn electron() -> ParticleSpec {
    ParticleSpec { label: "electron".into(), mass_ev: ELECTRON_MASS_EV, charge: -1.0 }
}

/// Look up a registry particle. `custom` (or any label when `mass_ev` is
/// given) takes the explicit mass. Atoms are registered with unit charge
/// multiple, the convention under which their spin-term curves are quoted.
pub fn particle_lookup(label: &str, mass_ev: Option<f64>) -> Result<ParticleSpec> {
    if let Some(m) = mass_ev {
        return ParticleSpec::new(label, m, 1.0);
    }
    let atom = |mass_u: f64| ParticleSpec::new(label, mass_u * ATOMIC_MASS_UNIT_EV, 1.0);
    match label {
        "electron" | "e" => Ok(electron()),
        "Rb87" | "rb87" => atom(RB87_MASS_U),
        "Ag107" | "ag107" | "Ag" => atom(AG107_MASS_U),
        "Nb" | "Nb93" | "nb93" => atom(NB93_MASS_U),
        "custom" => Err(Error::invalid("particle `custom` requires an explicit mass")),
        other => Err(Error::invalid(format!(
            "unknown particle `{other}` (known: electron, Rb87, Ag107, Nb, custom)"
        ))),
    }
}
