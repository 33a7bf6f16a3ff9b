// SPDX-License-Identifier: Apache-2.0

//! Dephasing of a Stern-Gerlach superposition by soft Bremsstrahlung.
//!
//! All integrals are written in the dimensionless frequency x = ω t_f, with
//! X = Ω_max t_f and b = β / t_f, and the solid angle reduced to c = cos θ.
//! Returned decay exponents are nonnegative; the signed expression as
//! written lives in [`Component::raw`].

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::{excess_unchecked, ResolvedBath};
use crate::error::{Error, Result};
use crate::quadrature::{
    filon_legendre, gauss_legendre, integrate_adaptive, integrate_oscillatory, integrate_polar, CompensatedSum, Estimate,
    QuadratureSettings, Trig, TrigTerm,
};
use crate::special::{cin, coth_minus_inv, si, ln_sinhc, re_digamma_one_plus_iy, re_digamma_tail, symmetric_velocity_factor};
use crate::units::{ParticleSpec, EULER_GAMMA, HBAR_EV_S, SPEED_OF_LIGHT_M_PER_S};

/// Filon is used up to this speed; beyond it the weight's poles at c = ±1/v
/// come too close to the interval.
pub const FILON_MAX_V: f64 = 0.9;

/// Terms whose 1/(f0 + k v c) pole lies within this distance of [−1, 1] have
/// it subtracted before the Legendre expansion.
const POLE_MARGIN: f64 = 0.02;

/// Above this many x-units the frequency integral switches from adaptive
/// quadrature to its exact antiderivative.
pub const OMEGA_QUADRATURE_LIMIT: f64 = 1e5;

/// Smallest v·X at which the angle integral uses the Legendre-Filon rule.
pub const FILON_MIN_VX: f64 = 300.0;

/// e^{−βΩ} below e^{−45} is dropped and the thermal ω-integral runs to infinity.
pub const THERMAL_TAIL_CUTOFF: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedMode {
    /// v / c
    FixedVelocity(f64),
    /// maximal separation ξ in meters
    FixedSeparation(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationConvention {
    XiEqVTf,
    #[default]
    XiEq2VTf,
}

impl SeparationConvention {
    pub fn factor(self) -> f64 {
        match self {
            SeparationConvention::XiEqVTf => 1.0,
            SeparationConvention::XiEq2VTf => 2.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeparationConvention::XiEqVTf => "xi_eq_v_tf",
            SeparationConvention::XiEq2VTf => "xi_eq_2v_tf",
        }
    }
}

impl FromStr for SeparationConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xi_eq_v_tf" => Ok(SeparationConvention::XiEqVTf),
            "xi_eq_2v_tf" => Ok(SeparationConvention::XiEq2VTf),
            other => Err(Error::invalid(format!("unknown separation convention '{other}'"))),
        }
    }
}

/// Interferometer loop: arms split at t = 0, turn at t_f, recombine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerGeometry {
    /// seconds
    pub t_f: f64,
    pub speed: SpeedMode,
    pub convention: SeparationConvention,
}

impl InterferometerGeometry {
    pub fn new(t_f: f64, speed: SpeedMode, convention: SeparationConvention) -> Result<Self> {
        let g = InterferometerGeometry { t_f, speed, convention };
        g.validate()?;
        Ok(g)
    }

    pub fn with_velocity(t_f: f64, v: f64) -> Result<Self> {
        Self::new(t_f, SpeedMode::FixedVelocity(v), SeparationConvention::default())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_f >= 0.0 && self.t_f.is_finite()) {
            return Err(Error::invalid(format!("t_f must be finite and >= 0 s, got {}", self.t_f)));
        }
        match self.speed {
            SpeedMode::FixedVelocity(v) => {
                if !(0.0..1.0).contains(&v) {
                    return Err(Error::invalid(format!("v/c must lie in [0, 1), got {v}")));
                }
            }
            SpeedMode::FixedSeparation(xi) => {
                if !(xi >= 0.0 && xi.is_finite()) {
                    return Err(Error::invalid(format!("xi must be finite and >= 0 m, got {xi}")));
                }
                if xi > 0.0 && self.t_f == 0.0 {
                    return Err(Error::domain("a nonzero separation needs t_f > 0"));
                }
                let v = self.velocity();
                if !(v < 1.0) {
                    return Err(Error::domain(format!("separation {xi} m in t_f = {} s implies v/c = {v} >= 1", self.t_f)));
                }
            }
        }
        Ok(())
    }

    /// Arm speed v/c.
    pub fn velocity(&self) -> f64 {
        match self.speed {
            SpeedMode::FixedVelocity(v) => v,
            SpeedMode::FixedSeparation(xi) => {
                if xi == 0.0 {
                    0.0
                } else {
                    xi / (self.convention.factor() * SPEED_OF_LIGHT_M_PER_S * self.t_f)
                }
            }
        }
    }

    /// Maximal separation ξ in meters.
    pub fn separation_m(&self) -> f64 {
        match self.speed {
            SpeedMode::FixedVelocity(v) => self.convention.factor() * v * SPEED_OF_LIGHT_M_PER_S * self.t_f,
            SpeedMode::FixedSeparation(xi) => xi,
        }
    }

    /// t_f in eV⁻¹.
    pub fn t_natural(&self) -> f64 {
        self.t_f / HBAR_EV_S
    }
}

/// Momentum of the arm with spin index r at time t: the z component flips at t_f.
pub fn path_momentum(r: u8, t: f64, t_f: f64, k: [f64; 3]) -> Result<[f64; 3]> {
    let sign_r = match r {
        1 => -1.0,
        2 => 1.0,
        _ => return Err(Error::invalid(format!("spin index must be 1 or 2, got {r}"))),
    };
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("t must be >= 0, got {t}")));
    }
    // Heaviside with θ(0) = 1
    let theta = if t >= t_f { 1.0 } else { 0.0 };
    Ok([k[0], k[1], sign_r * (-1.0 + 2.0 * theta) * k[2]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
    /// angular integral by quadrature, frequency integral by its antiderivative
    AnalyticOmega,
    /// exact zero from a degenerate input
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Quadrature,
    ClosedForm,
}

impl FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(Engine::Quadrature),
            "closed_form" | "closed" => Ok(Engine::ClosedForm),
            other => Err(Error::invalid(format!("unknown engine '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Γ components: |raw|. The phase keeps its sign.
    pub value: f64,
    /// the expression's own sign
    pub raw: f64,
    pub err_est: f64,
    pub provenance: Provenance,
}

impl Component {
    pub fn degenerate() -> Self {
        Component { value: 0.0, raw: 0.0, err_est: 0.0, provenance: Provenance::Degenerate }
    }

    fn decay(raw: f64, err_est: f64, provenance: Provenance) -> Self {
        Component { value: raw.abs(), raw, err_est, provenance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentPair {
    pub vac: Component,
    pub th: Component,
}

impl ComponentPair {
    fn degenerate() -> Self {
        ComponentPair { vac: Component::degenerate(), th: Component::degenerate() }
    }
}

/// The requested subset of dephasing components at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DephasingResult {
    pub gamma_nonspin_vac: Option<Component>,
    pub gamma_nonspin_th: Option<Component>,
    pub gamma_spin_vac: Option<Component>,
    pub gamma_spin_th: Option<Component>,
    pub phase: Option<Component>,
}

impl DephasingResult {
    pub fn gamma_total(&self) -> f64 {
        [self.gamma_nonspin_vac, self.gamma_nonspin_th, self.gamma_spin_vac, self.gamma_spin_th]
            .iter()
            .flatten()
            .map(|c| c.value)
            .sum()
    }

    /// e^{−Γ} over the requested Γ components.
    pub fn visibility(&self) -> f64 {
        (-self.gamma_total()).exp()
    }
}

/// Two-level density matrix: coherence ρ12 and populations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    pub rho12: Complex64,
    pub rho_diag: [f64; 2],
}

impl Coherence {
    pub fn new(rho12: Complex64, rho_diag: [f64; 2]) -> Result<Self> {
        let [p1, p2] = rho_diag;
        if !((0.0..=1.0).contains(&p1) && (0.0..=1.0).contains(&p2)) || ((p1 + p2) - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("populations must lie in [0, 1] and sum to 1"));
        }
        if rho12.norm_sqr() > p1 * p2 * (1.0 + 1e-12) {
            return Err(Error::invalid("|rho12|^2 exceeds the product of populations"));
        }
        Ok(Coherence { rho12, rho_diag })
    }

    /// Equal superposition (|↑⟩ + |↓⟩)/√2.
    pub fn equal_superposition() -> Self {
        Coherence { rho12: Complex64::new(0.5, 0.0), rho_diag: [0.5, 0.5] }
    }
}

/// ρ12 → ρ12 e^{−Γ − iφ}; populations untouched.
pub fn evolve_coherence(c0: Coherence, gamma_total: f64, phase: f64) -> Result<Coherence> {
    if !(gamma_total >= 0.0) {
        return Err(Error::invalid(format!("gamma_total must be >= 0, got {gamma_total}")));
    }
    if !phase.is_finite() {
        return Err(Error::invalid("phase must be finite"));
    }
    let factor = Complex64::from_polar((-gamma_total).exp(), -phase);
    Ok(Coherence { rho12: c0.rho12 * factor, rho_diag: c0.rho_diag })
}

// ---------------------------------------------------------------------------
// non-spin term

/// (1 − cos(ωt_f/2)) − ¼(1 − cos ωt_f), evaluated as 2 sin⁴(ωt_f/4).
pub fn nonspin_time_kernel(omega: f64, t_f: f64) -> f64 {
    let s = (0.25 * omega * t_f).sin();
    let s2 = s * s;
    2.0 * s2 * s2
}

/// Angular bracket at q̂·v = v u, as printed.
pub fn nonspin_angular_bracket_direct(v: f64, u: f64) -> f64 {
    let vu = v * u;
    let v2 = v * v;
    (1.0 - v2) / ((1.0 + vu) * (1.0 + vu)) + (1.0 - v2) / ((1.0 - vu) * (1.0 - vu)) - 2.0 * (1.0 + v2) / (1.0 - vu * vu)
}

/// The same bracket with the cancellation removed: −4v²(1 − u²)/(1 − v²u²)².
pub fn nonspin_angular_bracket(v: f64, u: f64) -> f64 {
    let vu = v * u;
    let d = 1.0 - vu * vu;
    -4.0 * v * v * (1.0 - u * u) / (d * d)
}

fn check_speed(v: f64) -> Result<f64> {
    let a = v.abs();
    if !(a < 1.0) {
        return Err(Error::invalid(format!("|v| must be < 1, got {v}")));
    }
    Ok(a)
}

/// ∫dΩ of the angular bracket by polar quadrature.
pub fn nonspin_angular_kernel(v: f64, s: &QuadratureSettings) -> Result<Estimate> {
    let v = check_speed(v)?;
    if v == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    integrate_polar(|u| nonspin_angular_bracket(v, u), s)
}

/// ∫dΩ of the angular bracket in closed form: −8π(((1 + v²)/v) artanh v − 1).
pub fn nonspin_angular_kernel_closed(v: f64) -> Result<f64> {
    let v = check_speed(v)?;
    if v == 0.0 {
        return Ok(0.0);
    }
    Ok(-8.0 * PI * symmetric_velocity_factor(v))
}

/// ∫₀^X kernel(x)/x dx.
fn nonspin_vac_omega(x_max: f64, s: &QuadratureSettings) -> Result<(Estimate, Provenance)> {
    if x_max <= OMEGA_QUADRATURE_LIMIT {
        let e = integrate_oscillatory(|x| nonspin_time_kernel(x, 1.0) / x, 0.0, x_max, 1.0, s)?;
        Ok((e, Provenance::Quadrature))
    } else {
        let w = cin(0.5 * x_max) - 0.25 * cin(x_max);
        Ok((Estimate { value: w, err_est: 8.0 * f64::EPSILON * w }, Provenance::AnalyticOmega))
    }
}

/// ∫₀^X kernel(x)/x · 2/(e^{bx} − 1) dx.
fn nonspin_th_omega(x_max: f64, b: f64, s: &QuadratureSettings) -> Result<(Estimate, Provenance)> {
    // beyond bx = 750 the occupancy underflows
    let upper = x_max.min(750.0 / b);
    let integrand = |x: f64| nonspin_time_kernel(x, 1.0) / x * excess_unchecked(b * x);
    if upper <= OMEGA_QUADRATURE_LIMIT {
        let e = integrate_oscillatory(integrand, 0.0, upper, 1.0, s)?;
        return Ok((e, Provenance::Quadrature));
    }
    if b * x_max >= THERMAL_TAIL_CUTOFF {
        let w = ln_sinhc(0.5 * PI / b) - 0.25 * ln_sinhc(PI / b);
        return Ok((Estimate { value: w, err_est: 8.0 * f64::EPSILON * w.abs() }, Provenance::AnalyticOmega));
    }
    let e = integrate_oscillatory(integrand, 0.0, upper, 1.0, s)?;
    Ok((e, Provenance::Quadrature))
}

/// Non-spin dephasing by quadrature: −(q²α/π²) ∫₀^Ω dω/ω · kernel · n · ∫dΩ bracket.
pub fn gamma_nonspin(
    geom: &InterferometerGeometry,
    bath: &ResolvedBath,
    particle: &ParticleSpec,
    s: &QuadratureSettings,
) -> Result<ComponentPair> {
    geom.validate()?;
    let v = geom.velocity();
    let t = geom.t_natural();
    if v == 0.0 || t == 0.0 {
        return Ok(ComponentPair::degenerate());
    }
    let pref = particle.coupling() / (PI * PI);
    let ang = nonspin_angular_kernel(v, s)?;
    let x_max = bath.omega_max * t;
    let combine = |w: Estimate, prov: Provenance| {
        let raw = -pref * ang.value * w.value;
        let err = pref * (ang.value.abs() * w.err_est + ang.err_est * w.value.abs());
        Component::decay(raw, err, prov)
    };
    let (w_vac, prov_vac) = nonspin_vac_omega(x_max, s)?;
    let vac = combine(w_vac, prov_vac);
    let th = match bath.beta {
        None => Component::degenerate(),
        Some(beta) => {
            let (w_th, prov_th) = nonspin_th_omega(x_max, beta / t, s)?;
            combine(w_th, prov_th)
        }
    };
    Ok(ComponentPair { vac, th })
}

/// ln g with g = e^γ.
pub const LN_G: f64 = EULER_GAMMA;

/// Nonrelativistic closed forms in terms of ξ/t_f:
/// −(2q²α/π) ln(gΩt_f) ξ²/t_f² and −(8q²α/3π)[L(πt_f/β) − ¼L(2πt_f/β)] ξ²/t_f².
pub fn gamma_nonspin_closed(geom: &InterferometerGeometry, bath: &ResolvedBath, particle: &ParticleSpec) -> Result<ComponentPair> {
    geom.validate()?;
    let xi = geom.separation_m();
    let t = geom.t_natural();
    if xi == 0.0 || t == 0.0 {
        return Ok(ComponentPair::degenerate());
    }
    let ratio = xi / (SPEED_OF_LIGHT_M_PER_S * geom.t_f);
    let r2 = ratio * ratio;
    let alpha = particle.coupling();
    let log_arg = LN_G + (bath.omega_max * t).ln();
    if !(log_arg > 0.0) {
        return Err(Error::domain(format!(
            "g * Omega_max * t_f = {} <= 1: outside the logarithmic regime",
            log_arg.exp()
        )));
    }
    let raw_vac = -(2.0 * alpha / PI) * log_arg * r2;
    let vac = Component::decay(raw_vac, 4.0 * f64::EPSILON * raw_vac.abs(), Provenance::ClosedForm);
    let th = match bath.beta {
        None => Component::degenerate(),
        Some(beta) => {
            let x = PI * t / beta;
            let bracket = ln_sinhc(x) - 0.25 * ln_sinhc(2.0 * x);
            let raw = -(8.0 * alpha / (3.0 * PI)) * bracket * r2;
            Component::decay(raw, 8.0 * f64::EPSILON * raw.abs(), Provenance::ClosedForm)
        }
    };
    Ok(ComponentPair { vac, th })
}

// ---------------------------------------------------------------------------
// spin term

/// A ω-term a·trig((f0 + k v c) x).
type Term = (f64, f64, f64);

struct Family {
    cos_terms: &'static [Term],
    sin_terms: &'static [Term],
    /// angular weight as a function of (v, c)
    weight: fn(f64, f64) -> f64,
    /// weight / (v c)
    weight_over_vc: fn(f64, f64) -> f64,
    /// ∂w/∂c
    weight_dc: fn(f64, f64) -> f64,
    /// the printed x-bracket at (x, v, c)
    bracket: fn(f64, f64, f64) -> f64,
}

fn spin_weight(v: f64, c: f64) -> f64 {
    let d = 1.0 - v * v * c * c;
    v * c / (d * d)
}

fn spin_weight_over_vc(v: f64, c: f64) -> f64 {
    let d = 1.0 - v * v * c * c;
    1.0 / (d * d)
}

fn spin_weight_dc(v: f64, c: f64) -> f64 {
    let u = v * v * c * c;
    let d = 1.0 - u;
    v * (1.0 + 3.0 * u) / (d * d * d)
}

fn spin_bracket(x: f64, v: f64, c: f64) -> f64 {
    let a = v * c * x;
    let s = a.sin();
    8.0 * x.sin() * s * s * s - 2.0 * (2.0 * x).cos() * (2.0 * a).sin() + (4.0 * a).sin()
}

fn phase_weight(v: f64, c: f64) -> f64 {
    v * v * c / (1.0 - v * v * c * c)
}

fn phase_weight_over_vc(v: f64, c: f64) -> f64 {
    v / (1.0 - v * v * c * c)
}

fn phase_weight_dc(v: f64, c: f64) -> f64 {
    let u = v * v * c * c;
    let d = 1.0 - u;
    v * v * (1.0 + u) / (d * d)
}

fn phase_bracket(x: f64, v: f64, c: f64) -> f64 {
    let a = v * c * x;
    x.sin() * a.sin() - (2.0 * x).sin() * (2.0 * a).sin() + (3.0 * a).sin()
}

// 8 sin x sin³a − 2 cos 2x sin 2a + sin 4a after product-to-sum
const SPIN: Family = Family {
    cos_terms: &[(3.0, 1.0, -1.0), (-3.0, 1.0, 1.0), (-1.0, 1.0, -3.0), (1.0, 1.0, 3.0)],
    sin_terms: &[(-1.0, 2.0, 2.0), (1.0, 2.0, -2.0), (1.0, 0.0, 4.0)],
    weight: spin_weight,
    weight_over_vc: spin_weight_over_vc,
    weight_dc: spin_weight_dc,
    bracket: spin_bracket,
};

// sin x sin a − sin 2x sin 2a + sin 3a after product-to-sum
const PHASE: Family = Family {
    cos_terms: &[(0.5, 1.0, -1.0), (-0.5, 1.0, 1.0), (-0.5, 2.0, -2.0), (0.5, 2.0, 2.0)],
    sin_terms: &[(1.0, 0.0, 3.0)],
    weight: phase_weight,
    weight_over_vc: phase_weight_over_vc,
    weight_dc: phase_weight_dc,
    bracket: phase_bracket,
};

impl Family {
    fn terms(&self) -> impl Iterator<Item = (Trig, &Term)> {
        self.cos_terms.iter().map(|t| (Trig::Cos, t)).chain(self.sin_terms.iter().map(|t| (Trig::Sin, t)))
    }

    fn max_k(&self) -> f64 {
        self.terms().map(|(_, t)| t.2.abs()).fold(0.0, f64::max)
    }

    fn trig_term(kind: Trig, &(a, f0, k): &Term, v: f64, c: f64) -> TrigTerm {
        TrigTerm { amplitude: a, base: f0, offset: k * v * c, kind }
    }

    /// Σ terms at (x, c).
    fn eval(&self, x: f64, v: f64, c: f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for (kind, t) in self.terms() {
            acc.add(Self::trig_term(kind, t, v, c).eval(x));
        }
        acc.value()
    }

    /// w(c) ∫₀^X Σ terms dx, exactly.
    fn vacuum_inner(&self, v: f64, c: f64, x_max: f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for (kind, t) in self.terms() {
            acc.add(Self::trig_term(kind, t, v, c).integral(0.0, x_max));
        }
        (self.weight)(v, c) * acc.value()
    }

    /// a·w(c)/f(c), with the v c factor cancelled when f0 = 0.
    fn amplitude_over_frequency(&self, &(a, f0, k): &Term, v: f64, c: f64) -> f64 {
        if f0 == 0.0 {
            a * (self.weight_over_vc)(v, c) / k
        } else {
            a * (self.weight)(v, c) / (f0 + k * v * c)
        }
    }

    fn filon_eligible(&self, v: f64, x_max: f64) -> bool {
        v * x_max >= FILON_MIN_VX && v <= FILON_MAX_V
    }

    /// Pole c₀ = −f0/(k v) of a cos-kind term's a·w/f when it sits on or
    /// near [−1, 1].
    fn near_pole(&(_, f0, k): &Term, v: f64) -> Option<f64> {
        if f0 == 0.0 || k == 0.0 {
            return None;
        }
        let c0 = -f0 / (k * v);
        (c0.abs() <= 1.0 + POLE_MARGIN).then_some(c0)
    }

    /// (A(c) − A(c₀)) / (k v (c − c₀)) for A = a·w, through the mean of A'
    /// on [c₀, c] near the pole.
    fn pole_remainder(&self, &(a, _, k): &Term, v: f64, c: f64, c0: f64) -> f64 {
        static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
        let d = c - c0;
        if d.abs() > 0.05 {
            return a * ((self.weight)(v, c) - (self.weight)(v, c0)) / (k * v * d);
        }
        let (nodes, weights) = RULE.get_or_init(|| gauss_legendre(12));
        let mean: f64 = nodes
            .iter()
            .zip(weights)
            .map(|(&u, &w)| 0.5 * w * (self.weight_dc)(v, c0 + 0.5 * (1.0 + u) * d))
            .sum();
        a * mean / (k * v)
    }

    /// ∫₋₁¹ dc w(c) ∫₀^X dx Σ terms.
    fn vacuum_integral(&self, v: f64, x_max: f64, s: &QuadratureSettings) -> Result<Estimate> {
        if self.filon_eligible(v, x_max) {
            return self.vacuum_integral_filon(v, x_max, s);
        }
        integrate_oscillatory(|c| self.vacuum_inner(v, c, x_max), -1.0, 1.0, self.max_k() * v * x_max, s)
    }

    /// cos-kind: sin(fX)/f. sin-kind: 1/f − cos(fX)/f. The oscillating
    /// parts go through the Filon rule with λ = k v X and phase f0 X.
    fn vacuum_integral_filon(&self, v: f64, x_max: f64, s: &QuadratureSettings) -> Result<Estimate> {
        let mut total = integrate_adaptive(
            |c| {
                let mut acc = CompensatedSum::default();
                for t in self.sin_terms {
                    acc.add(self.amplitude_over_frequency(t, v, c));
                }
                acc.value()
            },
            -1.0,
            1.0,
            s,
        )?;
        for (kind, t) in self.terms() {
            let (sign, trig) = match kind {
                Trig::Cos => (1.0, Trig::Sin),
                Trig::Sin => (-1.0, Trig::Cos),
            };
            let lambda = t.2 * v * x_max;
            let phase = t.1 * x_max;
            let pole = if kind == Trig::Cos { Self::near_pole(t, v) } else { None };
            let part = match pole {
                // ∫ a w(c₀) sin(fX)/f dc = a w(c₀)/(k v) [Si(f(1) X) − Si(f(−1) X)]
                Some(c0) => {
                    let rest = filon_legendre(|c| self.pole_remainder(t, v, c, c0), lambda, phase, trig, s)?;
                    let kv = t.2 * v;
                    let a0 = t.0 * (self.weight)(v, c0);
                    let singular = a0 / kv * (si((t.1 + kv) * x_max) - si((t.1 - kv) * x_max));
                    Estimate { value: rest.value + singular, err_est: rest.err_est + 4.0 * f64::EPSILON * singular.abs() }
                }
                None => filon_legendre(|c| sign * self.amplitude_over_frequency(t, v, c), lambda, phase, trig, s)?,
            };
            total = total + part;
        }
        Ok(total)
    }

    /// Reference: 2D adaptive quadrature of the printed bracket.
    fn vacuum_integral_dense(&self, v: f64, x_max: f64, s: &QuadratureSettings) -> Result<Estimate> {
        let inner_freq = 2.0 + self.max_k() * v;
        let failure = std::cell::Cell::new(None);
        let outer = integrate_oscillatory(
            |c| match integrate_oscillatory(|x| (self.bracket)(x, v, c), 0.0, x_max, inner_freq, s) {
                Ok(e) => (self.weight)(v, c) * e.value,
                Err(err) => {
                    failure.set(Some(err));
                    f64::NAN
                }
            },
            -1.0,
            1.0,
            self.max_k() * v * x_max,
            s,
        );
        if let Some(err) = failure.take() {
            return Err(err);
        }
        outer
    }

    /// w(c) ∫₀^∞ Σ terms · 2/(e^{bx} − 1) dx via digamma and coth identities.
    fn thermal_inner_closed(&self, v: f64, c: f64, b: f64) -> f64 {
        // cosine amplitudes sum to zero, so Σ a Re ψ(1 + i f/b) is finite and
        // ∫₀^∞ Σ a cos(fx) 2/(e^{bx} − 1) dx = −(2/b) Σ a Re ψ(1 + i f/b)
        let ln_b = b.ln();
        let mut cos_acc = CompensatedSum::default();
        for &(a, f0, k) in self.cos_terms {
            let kvc = k * v * c;
            let f = f0 + kvc;
            let y = f.abs() / b;
            let g = if y >= 10.0 {
                let ln_f = if kvc / f0 > -1.0 { f0.ln() + (kvc / f0).ln_1p() } else { f.abs().ln() };
                ln_f + re_digamma_tail(y)
            } else {
                re_digamma_one_plus_iy(y) + ln_b
            };
            cos_acc.add(a * g);
        }
        // ∫₀^∞ sin(fx) 2/(e^{bx} − 1) dx = (π/b)(coth(πf/b) − b/(πf))
        let mut sin_acc = CompensatedSum::default();
        for &(a, f0, k) in self.sin_terms {
            let f = f0 + k * v * c;
            sin_acc.add(a * (PI / b) * coth_minus_inv(PI * f / b));
        }
        (self.weight)(v, c) * (-(2.0 / b) * cos_acc.value() + sin_acc.value())
    }

    /// ∫₋₁¹ dc w(c) ∫₀^X dx Σ terms · 2/(e^{bx} − 1).
    fn thermal_integral(&self, v: f64, x_max: f64, b: f64, s: &QuadratureSettings) -> Result<Estimate> {
        if b * x_max >= THERMAL_TAIL_CUTOFF {
            return integrate_adaptive(|c| self.thermal_inner_closed(v, c, b), -1.0, 1.0, s);
        }
        let inner_freq = 2.0 + self.max_k() * v;
        let failure = std::cell::Cell::new(None);
        let outer = integrate_adaptive(
            |c| {
                let e = integrate_oscillatory(
                    |x| excess_unchecked(b * x) * self.eval(x, v, c),
                    0.0,
                    x_max,
                    inner_freq,
                    s,
                );
                match e {
                    Ok(e) => (self.weight)(v, c) * e.value,
                    Err(err) => {
                        failure.set(Some(err));
                        f64::NAN
                    }
                }
            },
            -1.0,
            1.0,
            s,
        );
        if let Some(err) = failure.take() {
            return Err(err);
        }
        outer
    }
}

/// −(q²α/π t_f) J / m_f, the 1/m_f applied last so mass scaling is exact.
fn spin_component(j: Estimate, coupling: f64, t: f64, mass: f64) -> (f64, f64) {
    let pref = coupling / (PI * t);
    (-(pref * j.value) / mass, (pref * j.err_est) / mass)
}

/// Spin-term dephasing. Vacuum: occupation 1; thermal: n − 1.
pub fn gamma_spin(
    geom: &InterferometerGeometry,
    bath: &ResolvedBath,
    particle: &ParticleSpec,
    s: &QuadratureSettings,
) -> Result<ComponentPair> {
    geom.validate()?;
    let v = geom.velocity();
    let t = geom.t_natural();
    if v == 0.0 || t == 0.0 {
        return Ok(ComponentPair::degenerate());
    }
    let x_max = bath.omega_max * t;
    let j_vac = SPIN.vacuum_integral(v, x_max, s)?;
    let (raw, err) = spin_component(j_vac, particle.coupling(), t, particle.mass_ev);
    let vac = Component::decay(raw, err, Provenance::Quadrature);
    let th = match bath.beta {
        None => Component::degenerate(),
        Some(beta) => {
            let j_th = SPIN.thermal_integral(v, x_max, beta / t, s)?;
            let (raw, err) = spin_component(j_th, particle.coupling(), t, particle.mass_ev);
            Component::decay(raw, err, Provenance::Quadrature)
        }
    };
    Ok(ComponentPair { vac, th })
}

/// Vacuum spin dephasing by dense 2D quadrature of the printed integrand.
/// Practical only for Ω_max t_f up to ~1e3.
pub fn gamma_spin_vac_dense(
    geom: &InterferometerGeometry,
    bath: &ResolvedBath,
    particle: &ParticleSpec,
    s: &QuadratureSettings,
) -> Result<Component> {
    geom.validate()?;
    let v = geom.velocity();
    let t = geom.t_natural();
    if v == 0.0 || t == 0.0 {
        return Ok(Component::degenerate());
    }
    let j = SPIN.vacuum_integral_dense(v, bath.omega_max * t, s)?;
    let (raw, err) = spin_component(j, particle.coupling(), t, particle.mass_ev);
    Ok(Component::decay(raw, err, Provenance::Quadrature))
}

/// Spin phase φ with the full occupation n(ω) = 1 + (n − 1), entering as
/// ρ12 → ρ12 e^{−iφ}. Signed: φ = −(q²α/2π² m_f) ∫dω ∫dΩ (…).
pub fn phase_spin(
    geom: &InterferometerGeometry,
    bath: &ResolvedBath,
    particle: &ParticleSpec,
    s: &QuadratureSettings,
) -> Result<Component> {
    geom.validate()?;
    let v = geom.velocity();
    let t = geom.t_natural();
    if v == 0.0 || t == 0.0 {
        return Ok(Component::degenerate());
    }
    let x_max = bath.omega_max * t;
    let mut j = PHASE.vacuum_integral(v, x_max, s)?;
    if let Some(beta) = bath.beta {
        j = j + PHASE.thermal_integral(v, x_max, beta / t, s)?;
    }
    let (raw, err) = spin_component(j, particle.coupling(), t, particle.mass_ev);
    Ok(Component { value: raw, raw, err_est: err, provenance: Provenance::Quadrature })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{electron, particle_lookup};

    fn s() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn momentum_flips_at_turning_point() {
        let k = [1.0, 2.0, 3.0];
        assert_eq!(path_momentum(1, 0.5, 1.0, k).unwrap(), [1.0, 2.0, 3.0]);
        assert_eq!(path_momentum(1, 1.5, 1.0, k).unwrap(), [1.0, 2.0, -3.0]);
        assert_eq!(path_momentum(2, 0.5, 1.0, k).unwrap(), [1.0, 2.0, -3.0]);
        assert_eq!(path_momentum(2, 1.0, 1.0, k).unwrap(), [1.0, 2.0, 3.0]);
        assert_eq!(path_momentum(1, 1.0, 1.0, k).unwrap(), [1.0, 2.0, -3.0]);
        assert!(path_momentum(3, 0.0, 1.0, k).is_err());
    }

    #[test]
    fn time_kernel_values() {
        assert_eq!(nonspin_time_kernel(0.0, 3.0), 0.0);
        assert!((nonspin_time_kernel(2.0 * PI, 1.0) - 2.0).abs() < 1e-15);
        for (w, t) in [(0.3, 1.7), (12.0, 0.9), (1e3, 2.5)] {
            let x: f64 = w * t;
            let bracket = (1.0 - (x / 2.0).cos()) - 0.25 * (1.0 - x.cos());
            assert!((nonspin_time_kernel(w, t) - bracket).abs() < 1e-14);
        }
    }

    #[test]
    fn angular_bracket_reduction() {
        for v in [0.01, 0.3, 0.9] {
            for u in [-0.9, -0.2, 0.0, 0.5, 1.0] {
                let a = nonspin_angular_bracket(v, u);
                let b = nonspin_angular_bracket_direct(v, u);
                assert!((a - b).abs() < 1e-12, "v={v} u={u}");
            }
        }
    }

    #[test]
    fn angular_kernel_reference_values() {
        // mpmath: 8π(1 − ((1+v²)/v) artanh v)
        let a = nonspin_angular_kernel_closed(0.5).unwrap();
        assert!(rel(a, -9.381_181_723_513_681) < 1e-13);
        let q = nonspin_angular_kernel(0.5, &s()).unwrap();
        assert!(rel(q.value, a) < 1e-10);
        let a = nonspin_angular_kernel_closed(0.3).unwrap();
        assert!(rel(a, -3.131_235_332_084_393) < 1e-13);
        // small v: −(32π/3) v²
        let a = nonspin_angular_kernel_closed(1e-6).unwrap();
        assert!(rel(a, -3.351_032_163_830_453e-11) < 1e-10);
        assert!(rel(a, -32.0 * PI / 3.0 * 1e-12) < 1e-6);
        let q = nonspin_angular_kernel(1e-6, &s()).unwrap();
        assert!(rel(q.value, a) < 1e-9);
        assert_eq!(nonspin_angular_kernel_closed(0.0).unwrap(), 0.0);
        assert!(nonspin_angular_kernel_closed(1.0).is_err());
    }

    #[test]
    fn omega_integrals_quadrature_vs_closed() {
        let (q, p) = nonspin_vac_omega(5e4, &s()).unwrap();
        assert_eq!(p, Provenance::Quadrature);
        let exact = cin(2.5e4) - 0.25 * cin(5e4);
        assert!(rel(q.value, exact) < 1e-8, "{} vs {exact}", q.value);
        // b = 0.01, X = 5e4: bX = 500, the tail beyond X is negligible
        let b = 0.01;
        let (q, _) = nonspin_th_omega(5e4, b, &s()).unwrap();
        let exact = ln_sinhc(0.5 * PI / b) - 0.25 * ln_sinhc(PI / b);
        assert!(rel(q.value, exact) < 1e-8, "{} vs {exact}", q.value);
    }

    fn geom(t_f: f64, v: f64) -> InterferometerGeometry {
        InterferometerGeometry::with_velocity(t_f, v).unwrap()
    }

    #[test]
    fn nonspin_degenerate_and_sign() {
        let bath = ResolvedBath::with_beta(1e4, 1e3);
        let e = electron();
        let r = gamma_nonspin(&geom(1e-9, 0.0), &bath, &e, &s()).unwrap();
        assert_eq!((r.vac.value, r.th.value), (0.0, 0.0));
        let r = gamma_nonspin(&geom(0.0, 0.3), &bath, &e, &s()).unwrap();
        assert_eq!((r.vac.value, r.th.value), (0.0, 0.0));
        let r = gamma_nonspin(&geom(1e-12, 0.3), &bath, &e, &s()).unwrap();
        assert!(r.vac.raw > 0.0 && r.th.raw > 0.0);
        let cold = ResolvedBath::zero_temperature(1e3);
        let r = gamma_nonspin(&geom(1e-12, 0.3), &cold, &e, &s()).unwrap();
        assert_eq!(r.th.value, 0.0);
        assert_eq!(r.th.provenance, Provenance::Degenerate);
    }

    #[test]
    fn closed_nonspin_matches_quadrature_at_leading_order() {
        // Both grow as (8α/π) v² ln(Ω t_f); the constants inside the log differ
        let e = electron();
        let v = 1e-3;
        let t_f = 1e-6;
        let t = t_f / HBAR_EV_S;
        let bath = ResolvedBath::zero_temperature(1e12 / t);
        let q = gamma_nonspin(&geom(t_f, v), &bath, &e, &s()).unwrap();
        let c = gamma_nonspin_closed(&geom(t_f, v), &bath, &e).unwrap();
        let x: f64 = 1e12;
        let ratio = q.vac.value / c.vac.value;
        // exact large-X ratio: (ln X + γ − (4/3) ln 2) / (ln X + γ), times the v⁴ correction
        let want = (x.ln() + EULER_GAMMA - 4.0 / 3.0 * std::f64::consts::LN_2) / (x.ln() + EULER_GAMMA);
        assert!(rel(ratio, want) < 1e-5, "{ratio} vs {want}");
    }

    #[test]
    fn closed_nonspin_domain_and_zero() {
        let e = electron();
        let t_f = 1e-12;
        let t = t_f / HBAR_EV_S;
        let bath = ResolvedBath::zero_temperature(0.5 / t);
        assert!(matches!(gamma_nonspin_closed(&geom(t_f, 0.1), &bath, &e), Err(Error::Domain(_))));
        let r = gamma_nonspin_closed(&geom(t_f, 0.0), &bath, &e).unwrap();
        assert_eq!(r.vac.value, 0.0);
        let g = InterferometerGeometry::new(1e-2, SpeedMode::FixedSeparation(1e-3), SeparationConvention::XiEq2VTf).unwrap();
        let t = g.t_natural();
        let bath = ResolvedBath::with_beta(1.0 / crate::units::to_natural(1.0, crate::units::Unit::Kelvin), 1e6 / t);
        let r = gamma_nonspin_closed(&g, &bath, &e).unwrap();
        assert!(r.vac.value.is_finite() && r.vac.value > 0.0);
        assert!(r.th.value.is_finite() && r.th.value > 0.0);
    }

    #[test]
    fn separation_conventions() {
        let g = InterferometerGeometry::new(1e-3, SpeedMode::FixedSeparation(1e-3), SeparationConvention::XiEqVTf).unwrap();
        assert!(rel(g.velocity(), 1e-3 / (SPEED_OF_LIGHT_M_PER_S * 1e-3)) < 1e-15);
        let g2 = InterferometerGeometry { convention: SeparationConvention::XiEq2VTf, ..g };
        assert!(rel(g2.velocity(), 0.5 * g.velocity()) < 1e-15);
        let bad = InterferometerGeometry::new(1e-12, SpeedMode::FixedSeparation(1.0), SeparationConvention::XiEqVTf);
        assert!(matches!(bad, Err(Error::Domain(_))));
        assert!(InterferometerGeometry::with_velocity(1.0, 1.0).is_err());
    }

    #[test]
    fn spin_trigsum_matches_dense_oracle() {
        let e = electron();
        let t_f = 1e-15;
        let t = t_f / HBAR_EV_S;
        let tight = QuadratureSettings { rel_tol: 1e-11, abs_tol: 1e-16, ..s() };
        for (v, x) in [(0.1, 50.0), (0.3, 300.0), (0.02, 900.0)] {
            let bath = ResolvedBath::zero_temperature(x / t);
            let fast = gamma_spin(&geom(t_f, v), &bath, &e, &tight).unwrap();
            let dense = gamma_spin_vac_dense(&geom(t_f, v), &bath, &e, &tight).unwrap();
            assert!(rel(fast.vac.value, dense.value) < 1e-8, "v={v} X={x}: {} vs {}", fast.vac.value, dense.value);
        }
    }

    #[test]
    fn filon_path_matches_adaptive_path() {
        let tight = QuadratureSettings { rel_tol: 1e-12, abs_tol: 1e-16, ..s() };
        for (v, x) in [(1e-3, 4e5), (0.2, 2e3), (1e-6, 1e9), (0.33, 1e3), (1.0 / 3.0, 1.5e3), (0.34, 3e3), (0.5, 2e3), (0.85, 1e3)] {
            assert!(SPIN.filon_eligible(v, x));
            let filon = SPIN.vacuum_integral_filon(v, x, &tight).unwrap();
            let adaptive =
                integrate_oscillatory(|c| SPIN.vacuum_inner(v, c, x), -1.0, 1.0, SPIN.max_k() * v * x, &tight).unwrap();
            assert!(rel(filon.value, adaptive.value) < 1e-8, "v={v}: {} vs {}", filon.value, adaptive.value);
        }
    }

    #[test]
    fn spin_vacuum_large_vx_limit() {
        // J → 1/2 as vX → ∞ at small v
        let j = SPIN.vacuum_integral(1e-6, 1e12, &s()).unwrap();
        assert!((j.value - 0.5).abs() < 1e-5, "{}", j.value);
    }

    #[test]
    fn spin_thermal_closed_matches_dense() {
        let tight = QuadratureSettings { rel_tol: 1e-11, abs_tol: 1e-16, ..s() };
        for (v, b) in [(0.1, 0.5), (0.3, 2.0)] {
            let x = 200.0 / b;
            let closed = integrate_adaptive(|c| SPIN.thermal_inner_closed(v, c, b), -1.0, 1.0, &tight).unwrap();
            let dense = SPIN.thermal_integral(v, x, b, &QuadratureSettings { ..tight }).unwrap();
            // the dense path is only taken for bX < 45, call it on a shorter range to compare
            let dense_direct = integrate_adaptive(
                |c| {
                    let e = integrate_oscillatory(|xx| excess_unchecked(b * xx) * SPIN.eval(xx, v, c), 0.0, x, 2.0 + 3.0 * v, &tight)
                        .unwrap();
                    spin_weight(v, c) * e.value
                },
                -1.0,
                1.0,
                &tight,
            )
            .unwrap();
            assert_eq!(closed.value, dense.value);
            assert!(rel(closed.value, dense_direct.value) < 1e-8, "v={v} b={b}: {} vs {}", closed.value, dense_direct.value);
        }
        let v = 0.2;
        let b = 0.5;
        let closed = integrate_adaptive(|c| PHASE.thermal_inner_closed(v, c, b), -1.0, 1.0, &tight).unwrap();
        let dense = integrate_adaptive(
            |c| {
                let e = integrate_oscillatory(|xx| excess_unchecked(b * xx) * PHASE.eval(xx, v, c), 0.0, 400.0, 3.0, &tight).unwrap();
                phase_weight(v, c) * e.value
            },
            -1.0,
            1.0,
            &tight,
        )
        .unwrap();
        assert!(rel(closed.value, dense.value) < 1e-8);
    }

    #[test]
    fn spin_degenerate_zeros() {
        let e = electron();
        let bath = ResolvedBath::with_beta(1e4, 1e3);
        let r = gamma_spin(&geom(1e-9, 0.0), &bath, &e, &s()).unwrap();
        assert_eq!((r.vac.value, r.th.value), (0.0, 0.0));
        let r = gamma_spin(&geom(0.0, 0.1), &bath, &e, &s()).unwrap();
        assert_eq!((r.vac.value, r.th.value), (0.0, 0.0));
        assert_eq!(phase_spin(&geom(0.0, 0.1), &bath, &e, &s()).unwrap().value, 0.0);
        assert_eq!(phase_spin(&geom(1e-9, 0.0), &bath, &e, &s()).unwrap().value, 0.0);
    }

    #[test]
    fn doubling_mass_halves_spin_terms() {
        let bath = ResolvedBath::with_beta(1e4, 5e3);
        let g = geom(1e-9, 1e-3);
        let e = electron();
        let heavy = ParticleSpec::new("heavy", 2.0 * e.mass_ev, 1.0).unwrap();
        let a = gamma_spin(&g, &bath, &e, &s()).unwrap();
        let b = gamma_spin(&g, &bath, &heavy, &s()).unwrap();
        assert_eq!(a.vac.value, 2.0 * b.vac.value);
        assert_eq!(a.th.value, 2.0 * b.th.value);
        let ag = particle_lookup("Ag107", None).unwrap();
        let c = gamma_spin(&g, &bath, &ag, &s()).unwrap();
        assert!(rel(c.vac.value * ag.mass_ev, a.vac.value * e.mass_ev) < 1e-12);
    }

    #[test]
    fn phase_is_suppressed_by_v() {
        let e = electron();
        let t_f = 1e-6;
        let t = t_f / HBAR_EV_S;
        let bath = ResolvedBath::with_beta(1.0 / crate::units::to_natural(1.0, crate::units::Unit::Kelvin), 1e-2 * e.mass_ev);
        for v in [1e-3, 1e-6] {
            let g = geom(t_f, v);
            let gam = gamma_spin(&g, &bath, &e, &s()).unwrap();
            let ph = phase_spin(&g, &bath, &e, &s()).unwrap();
            let ratio = ph.value.abs() / (gam.vac.value + gam.th.value);
            assert!(ratio < 2.0 * v, "v={v}: ratio {ratio}");
            let _ = t;
        }
    }

    #[test]
    fn coherence_evolution() {
        let c0 = Coherence::equal_superposition();
        assert_eq!(evolve_coherence(c0, 0.0, 0.0).unwrap(), c0);
        let c = evolve_coherence(c0, std::f64::consts::LN_2, 0.0).unwrap();
        assert!((c.rho12.norm() - 0.25).abs() < 1e-15);
        assert_eq!(c.rho_diag, c0.rho_diag);
        let c = evolve_coherence(c0, 0.0, PI).unwrap();
        assert!((c.rho12 + c0.rho12).norm() < 1e-15);
        assert!(evolve_coherence(c0, -1.0, 0.0).is_err());
    }

    #[test]
    fn result_visibility() {
        let mut r = DephasingResult::default();
        assert_eq!(r.visibility(), 1.0);
        r.gamma_nonspin_vac = Some(Component::decay(-0.5, 0.0, Provenance::ClosedForm));
        r.phase = Some(Component { value: 3.0, raw: 3.0, err_est: 0.0, provenance: Provenance::Quadrature });
        assert!((r.visibility() - (-0.5f64).exp()).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn time_kernel_identity(w in 0.0f64..1e3, t in 0.0f64..10.0) {
            let x = w * t;
            let half = 0.5 * (1.0 - (0.5 * x).cos()).powi(2);
            proptest::prop_assert!((nonspin_time_kernel(w, t) - half).abs() <= 1e-14);
        }

        #[test]
        fn angular_kernel_nonpositive_and_even(v in -0.999f64..0.999) {
            let a = nonspin_angular_kernel_closed(v).unwrap();
            proptest::prop_assert!(a <= 0.0);
            proptest::prop_assert_eq!(a, nonspin_angular_kernel_closed(-v).unwrap());
        }

        #[test]
        fn coherence_stays_positive(g in 0.0f64..50.0, phi in -10.0f64..10.0, p in 0.0f64..1.0, frac in 0.0f64..1.0, arg in -3.0f64..3.0) {
            let r = frac * (p * (1.0 - p)).sqrt();
            let c0 = Coherence::new(Complex64::from_polar(r, arg), [p, 1.0 - p]).unwrap();
            let c = evolve_coherence(c0, g, phi).unwrap();
            proptest::prop_assert!(c.rho12.norm_sqr() <= c.rho_diag[0] * c.rho_diag[1] * (1.0 + 1e-12));
        }
    }
}
