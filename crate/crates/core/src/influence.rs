// SPDX-License-Identifier: Apache-2.0

//! Classical-current decoherence functional for a closed loop of two
//! segments, and its closed forms.
//!
//! The loop runs for 2t_f; at its turning point the two arm four-velocities
//! u₂, u₄ differ by a boost of speed w = 2v (the relative speed of segments
//! moving at ±v to first order). In the rest frame of u₄, with c = cos θ,
//!
//! ω² [u₂/(q·u₂) − u₄/(q·u₄)]² = −w²(1 − c²)/(1 − wc)²,
//!
//! whose solid-angle integral is 8π(1 − artanh(w)/w).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bath::{excess_unchecked, ResolvedBath};
use crate::error::{Error, Result};
use crate::qbe::{
    Component, ComponentPair, InterferometerGeometry, Provenance, SeparationConvention, LN_G, OMEGA_QUADRATURE_LIMIT,
    THERMAL_TAIL_CUTOFF,
};
use crate::quadrature::{integrate_oscillatory, integrate_polar, Estimate, QuadratureSettings};
use crate::special::{artanh_ratio_minus_one, cin, ln_sinhc};
use crate::units::{FINE_STRUCTURE, HBAR_EV_S, SPEED_OF_LIGHT_M_PER_S};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    /// half-period in seconds; the loop spans 2t_f
    pub t_f: f64,
    /// arm speed v/c
    pub v: f64,
    pub convention: SeparationConvention,
}

impl LoopSpec {
    pub fn new(t_f: f64, v: f64, convention: SeparationConvention) -> Result<Self> {
        if !(t_f >= 0.0 && t_f.is_finite()) {
            return Err(Error::invalid(format!("t_f must be finite and >= 0 s, got {t_f}")));
        }
        if !(0.0..1.0).contains(&v) {
            return Err(Error::invalid(format!("v/c must lie in [0, 1), got {v}")));
        }
        Ok(LoopSpec { t_f, v, convention })
    }

    pub fn from_separation(t_f: f64, xi: f64, convention: SeparationConvention) -> Result<Self> {
        if !(t_f > 0.0) {
            return Err(Error::invalid("t_f must be > 0 with a fixed separation"));
        }
        Self::new(t_f, xi / (convention.factor() * SPEED_OF_LIGHT_M_PER_S * t_f), convention)
    }

    /// The loop equivalent to an interferometer geometry: the interferometer
    /// t_f is the full loop time, and arms at ±v separate at 2v/(1 + v²).
    pub fn matching(geom: &InterferometerGeometry) -> Result<Self> {
        let v = geom.velocity();
        Self::new(0.5 * geom.t_f, v / (1.0 + v * v), geom.convention)
    }

    /// Maximal separation ξ in meters.
    pub fn xi(&self) -> f64 {
        self.convention.factor() * self.v * SPEED_OF_LIGHT_M_PER_S * self.t_f
    }

    pub fn t_natural(&self) -> f64 {
        self.t_f / HBAR_EV_S
    }

    fn check_half_speed(&self) -> Result<()> {
        if self.v >= 0.5 {
            return Err(Error::domain(format!("relative speed 2v must be < 1, got v = {}", self.v)));
        }
        Ok(())
    }
}

/// (1 − cos ωt_f) − ¼(1 − cos 2ωt_f), evaluated as 2 sin⁴(ωt_f/2).
pub fn loop_time_kernel(omega: f64, t_f: f64) -> f64 {
    let s = (0.5 * omega * t_f).sin();
    let s2 = s * s;
    2.0 * s2 * s2
}

/// ω²[u₂/(q·u₂) − u₄/(q·u₄)]² at relative speed w and cos θ = c.
pub fn loop_angular_bracket(w: f64, c: f64) -> f64 {
    let d = 1.0 - w * c;
    -w * w * (1.0 - c * c) / (d * d)
}

/// The same quantity from explicit four-vectors (metric +−−−), u₄ at rest
/// and u₂ boosted along z.
pub fn loop_angular_bracket_four_vectors(w: f64, c: f64, omega: f64) -> f64 {
    let dot = |a: [f64; 4], b: [f64; 4]| a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3];
    let gamma = 1.0 / (1.0 - w * w).sqrt();
    let u2 = [gamma, 0.0, 0.0, gamma * w];
    let u4 = [1.0, 0.0, 0.0, 0.0];
    let s = (1.0 - c * c).sqrt();
    let q = [omega, omega * s, 0.0, omega * c];
    let (d2, d4) = (dot(q, u2), dot(q, u4));
    let b: Vec<f64> = (0..4).map(|i| u2[i] / d2 - u4[i] / d4).collect();
    omega * omega * dot([b[0], b[1], b[2], b[3]], [b[0], b[1], b[2], b[3]])
}

/// artanh(2v)/(2v) − 1.
pub fn velocity_factor(v: f64) -> f64 {
    artanh_ratio_minus_one(2.0 * v)
}

fn vacuum_omega(x_max: f64, s: &QuadratureSettings) -> Result<(Estimate, Provenance)> {
    if x_max <= OMEGA_QUADRATURE_LIMIT {
        let e = integrate_oscillatory(|x| loop_time_kernel(x, 1.0) / x, 0.0, x_max, 2.0, s)?;
        Ok((e, Provenance::Quadrature))
    } else {
        let w = cin(x_max) - 0.25 * cin(2.0 * x_max);
        Ok((Estimate { value: w, err_est: 8.0 * f64::EPSILON * w }, Provenance::AnalyticOmega))
    }
}

fn thermal_omega(x_max: f64, b: f64, s: &QuadratureSettings) -> Result<(Estimate, Provenance)> {
    let upper = x_max.min(750.0 / b);
    let integrand = |x: f64| loop_time_kernel(x, 1.0) / x * excess_unchecked(b * x);
    if upper <= OMEGA_QUADRATURE_LIMIT || b * x_max < THERMAL_TAIL_CUTOFF {
        let e = integrate_oscillatory(integrand, 0.0, upper, 2.0, s)?;
        return Ok((e, Provenance::Quadrature));
    }
    let w = ln_sinhc(PI / b) - 0.25 * ln_sinhc(2.0 * PI / b);
    Ok((Estimate { value: w, err_est: 8.0 * f64::EPSILON * w.abs() }, Provenance::AnalyticOmega))
}

/// −(α/π²) ∫₀^Ω dω/ω coth(βω/2) kernel ∫dΩ ω²[…]², vacuum and thermal parts.
pub fn gamma0_general(loop_: &LoopSpec, bath: &ResolvedBath, s: &QuadratureSettings) -> Result<ComponentPair> {
    loop_.check_half_speed()?;
    let t = loop_.t_natural();
    if loop_.v == 0.0 || t == 0.0 {
        return Ok(ComponentPair { vac: Component::degenerate(), th: Component::degenerate() });
    }
    let w = 2.0 * loop_.v;
    let ang = integrate_polar(|c| loop_angular_bracket(w, c), s)?;
    let pref = FINE_STRUCTURE / (PI * PI);
    let combine = |om: Estimate, prov: Provenance| {
        let raw = -pref * ang.value * om.value;
        let err = pref * (ang.value.abs() * om.err_est + ang.err_est * om.value.abs());
        Component { value: raw.abs(), raw, err_est: err, provenance: prov }
    };
    let x_max = bath.omega_max * t;
    let (om, prov) = vacuum_omega(x_max, s)?;
    let vac = combine(om, prov);
    let th = match bath.beta {
        None => Component::degenerate(),
        Some(beta) => {
            let (om, prov) = thermal_omega(x_max, beta / t, s)?;
            combine(om, prov)
        }
    };
    Ok(ComponentPair { vac, th })
}

fn closed(raw: f64) -> Component {
    Component { value: raw.abs(), raw, err_est: 8.0 * f64::EPSILON * raw.abs(), provenance: Provenance::ClosedForm }
}

/// −(6α/π) ln(gΩt_f)(artanh(2v)/2v − 1).
pub fn gamma_vac_closed(loop_: &LoopSpec, bath: &ResolvedBath) -> Result<Component> {
    loop_.check_half_speed()?;
    if loop_.v == 0.0 {
        return Ok(Component::degenerate());
    }
    let log = LN_G + (bath.omega_max * loop_.t_natural()).ln();
    if !(log > 0.0) {
        return Err(Error::domain("g * Omega_max * t_f <= 1: outside the logarithmic regime"));
    }
    Ok(closed(-(6.0 * FINE_STRUCTURE / PI) * log * velocity_factor(loop_.v)))
}

/// ln(sinh x/x) − ¼ ln(sinh 2x/2x) at x = t_f/τ_B, τ_B = β/π.
pub fn thermal_bracket(t_over_tau: f64) -> f64 {
    ln_sinhc(t_over_tau) - 0.25 * ln_sinhc(2.0 * t_over_tau)
}

/// −(8α/π)[ln(sinh(t_f/τ_B)/(t_f/τ_B)) − ¼ ln(…2t_f…)](artanh(2v)/2v − 1).
pub fn gamma_th_closed(loop_: &LoopSpec, bath: &ResolvedBath) -> Result<Component> {
    loop_.check_half_speed()?;
    let Some(beta) = bath.beta else {
        return Ok(Component::degenerate());
    };
    if loop_.v == 0.0 || loop_.t_f == 0.0 {
        return Ok(Component::degenerate());
    }
    let x = PI * loop_.t_natural() / beta;
    Ok(closed(-(8.0 * FINE_STRUCTURE / PI) * thermal_bracket(x) * velocity_factor(loop_.v)))
}

/// Nonrelativistic forms: −(2α/π) ln(gΩt_f) ξ²/t_f² and −(8α/3π)[…] ξ²/t_f².
pub fn gamma_nr_closed(loop_: &LoopSpec, bath: &ResolvedBath) -> Result<ComponentPair> {
    let xi = loop_.xi();
    let t = loop_.t_natural();
    if xi == 0.0 || t == 0.0 {
        return Ok(ComponentPair { vac: Component::degenerate(), th: Component::degenerate() });
    }
    let r = xi / (SPEED_OF_LIGHT_M_PER_S * loop_.t_f);
    let r2 = r * r;
    let log = LN_G + (bath.omega_max * t).ln();
    if !(log > 0.0) {
        return Err(Error::domain("g * Omega_max * t_f <= 1: outside the logarithmic regime"));
    }
    let vac = closed(-(2.0 * FINE_STRUCTURE / PI) * log * r2);
    let th = match bath.beta {
        None => Component::degenerate(),
        Some(beta) => closed(-(8.0 * FINE_STRUCTURE / (3.0 * PI)) * thermal_bracket(PI * t / beta) * r2),
    };
    Ok(ComponentPair { vac, th })
}
