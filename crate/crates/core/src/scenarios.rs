// SPDX-License-Identifier: Apache-2.0

//! Parameter sweeps and the figure presets.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{BathSpec, CutoffPolicy, ResolvedBath};
use crate::error::{Error, Result};
use crate::qbe::{
    gamma_nonspin, gamma_nonspin_closed, gamma_spin, phase_spin, ComponentPair, DephasingResult, Engine,
    InterferometerGeometry, SeparationConvention, SpeedMode,
};
use crate::quadrature::QuadratureSettings;
use crate::units::{self, electron, particle_lookup, ParticleSpec, Unit, ELECTRON_MASS_EV};

pub const DEFAULT_GRID_POINTS: usize = 61;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    NonspinVac,
    NonspinTh,
    SpinVac,
    SpinTh,
    Phase,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 5] = [
        ComponentKind::NonspinVac,
        ComponentKind::NonspinTh,
        ComponentKind::SpinVac,
        ComponentKind::SpinTh,
        ComponentKind::Phase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::NonspinVac => "nonspin_vac",
            ComponentKind::NonspinTh => "nonspin_th",
            ComponentKind::SpinVac => "spin_vac",
            ComponentKind::SpinTh => "spin_th",
            ComponentKind::Phase => "phase",
        }
    }

    fn is_nonspin(self) -> bool {
        matches!(self, ComponentKind::NonspinVac | ComponentKind::NonspinTh)
    }
}

impl FromStr for ComponentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ComponentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown component '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    TF,
    V,
    Xi,
    Temperature,
    OmegaMax,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::TF => "t_f",
            Axis::V => "v",
            Axis::Xi => "xi",
            Axis::Temperature => "temperature",
            Axis::OmegaMax => "omega_max",
        }
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t_f" | "tf" => Ok(Axis::TF),
            "v" => Ok(Axis::V),
            "xi" => Ok(Axis::Xi),
            "temperature" | "temp" => Ok(Axis::Temperature),
            "omega_max" | "cutoff" => Ok(Axis::OmegaMax),
            other => Err(Error::invalid(format!("unknown sweep axis '{other}'"))),
        }
    }
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced in log.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) || n == 0 {
        return Err(Error::invalid(format!("log grid needs 0 < lo < hi and n >= 1, got [{lo}, {hi}] x {n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    let step = (b - a) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => 10f64.powf(a + step * i as f64),
        })
        .collect())
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(hi > lo && lo.is_finite() && hi.is_finite()) || n == 0 {
        return Err(Error::invalid(format!("linear grid needs lo < hi and n >= 1, got [{lo}, {hi}] x {n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect())
}

/// One parameter point in SI units at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSpec {
    /// seconds
    pub t_f: f64,
    pub speed: SpeedMode,
    pub convention: SeparationConvention,
    /// kelvin
    pub temperature_k: f64,
    pub cutoff: CutoffPolicy,
}

impl PointSpec {
    fn with_axis(mut self, axis: Axis, value: f64) -> Self {
        match axis {
            Axis::TF => self.t_f = value,
            Axis::V => self.speed = SpeedMode::FixedVelocity(value),
            Axis::Xi => self.speed = SpeedMode::FixedSeparation(value),
            Axis::Temperature => self.temperature_k = value,
            Axis::OmegaMax => self.cutoff = CutoffPolicy::Explicit(units::to_natural(value, Unit::RadPerSecond)),
        }
        self
    }

    pub fn geometry(&self) -> Result<InterferometerGeometry> {
        InterferometerGeometry::new(self.t_f, self.speed, self.convention)
    }

    pub fn bath(&self, particle: &ParticleSpec) -> Result<ResolvedBath> {
        BathSpec::new(self.temperature_k, self.cutoff)?.resolve(particle.mass_ev)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub particle: ParticleSpec,
    pub template: PointSpec,
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub components: Vec<ComponentKind>,
    /// engine per component; missing entries use quadrature
    pub engines: BTreeMap<ComponentKind, Engine>,
    pub settings: QuadratureSettings,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::invalid("sweep grid is empty"));
        }
        if !self.grid.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("sweep grid contains a non-finite value"));
        }
        let up = self.grid.windows(2).all(|w| w[0] < w[1]);
        let down = self.grid.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return Err(Error::invalid("sweep grid must be strictly monotone"));
        }
        if self.components.is_empty() {
            return Err(Error::invalid("no components requested"));
        }
        check_engines(&self.engines)?;
        self.settings.validate()
    }

    pub fn engine(&self, kind: ComponentKind) -> Engine {
        self.engines.get(&kind).copied().unwrap_or_default()
    }

    pub fn point(&self, i: usize) -> PointSpec {
        self.template.with_axis(self.axis, self.grid[i])
    }
}

fn check_engines(engines: &BTreeMap<ComponentKind, Engine>) -> Result<()> {
    for (k, e) in engines {
        if *e == Engine::ClosedForm && !k.is_nonspin() {
            return Err(Error::invalid(format!("component {} has no closed form", k.as_str())));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Ok,
    Quadrature,
    Domain,
}

impl Quality {
    pub fn as_str(self) -> &'static str {
        match self {
            Quality::Ok => "ok",
            Quality::Quadrature => "quadrature",
            Quality::Domain => "domain",
        }
    }

    fn of(err: &Error) -> Self {
        match err {
            Error::Quadrature { .. } => Quality::Quadrature,
            _ => Quality::Domain,
        }
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inputs as resolved for one point, plus its result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t_f_s: f64,
    pub v_over_c: f64,
    pub xi_m: f64,
    pub temp_k: f64,
    /// rad/s
    pub omega_max: f64,
    pub result: DephasingResult,
    pub quality: Quality,
    /// first error met at this point
    pub error: Option<String>,
}

/// V = e^{−Γ}.
pub fn visibility(gamma_total: f64) -> Result<f64> {
    if !(gamma_total >= 0.0) {
        return Err(Error::invalid(format!("gamma_total must be >= 0, got {gamma_total}")));
    }
    Ok((-gamma_total).exp())
}

/// Evaluate the requested components at one point. Failing components are
/// left empty and the first failure is reported alongside.
pub fn compute_point(
    particle: &ParticleSpec,
    point: &PointSpec,
    components: &[ComponentKind],
    engines: &BTreeMap<ComponentKind, Engine>,
    s: &QuadratureSettings,
) -> Result<(SweepRow, Option<Error>)> {
    check_engines(engines)?;
    let geom = point.geometry()?;
    let bath = point.bath(particle)?;
    let engine = |k: ComponentKind| engines.get(&k).copied().unwrap_or_default();
    let mut result = DephasingResult::default();
    let mut first_err: Option<Error> = None;
    let mut note = |e: Error| {
        if first_err.is_none() {
            first_err = Some(e);
        }
    };

    let mut nonspin: BTreeMap<u8, Result<ComponentPair>> = BTreeMap::new();
    let mut nonspin_pair = |e: Engine| -> Result<ComponentPair> {
        let key = e as u8;
        nonspin
            .entry(key)
            .or_insert_with(|| match e {
                Engine::ClosedForm => gamma_nonspin_closed(&geom, &bath, particle),
                Engine::Quadrature => gamma_nonspin(&geom, &bath, particle, s),
            })
            .clone()
    };
    let mut spin: Option<Result<ComponentPair>> = None;
    let mut spin_pair = || spin.get_or_insert_with(|| gamma_spin(&geom, &bath, particle, s)).clone();

    for &k in components {
        let slot = match k {
            ComponentKind::NonspinVac => nonspin_pair(engine(k)).map(|p| p.vac),
            ComponentKind::NonspinTh => nonspin_pair(engine(k)).map(|p| p.th),
            ComponentKind::SpinVac => spin_pair().map(|p| p.vac),
            ComponentKind::SpinTh => spin_pair().map(|p| p.th),
            ComponentKind::Phase => phase_spin(&geom, &bath, particle, s),
        };
        let value = match slot {
            Ok(c) => Some(c),
            Err(e) => {
                note(e);
                None
            }
        };
        match k {
            ComponentKind::NonspinVac => result.gamma_nonspin_vac = value,
            ComponentKind::NonspinTh => result.gamma_nonspin_th = value,
            ComponentKind::SpinVac => result.gamma_spin_vac = value,
            ComponentKind::SpinTh => result.gamma_spin_th = value,
            ComponentKind::Phase => result.phase = value,
        }
    }

    let quality = first_err.as_ref().map(Quality::of).unwrap_or(Quality::Ok);
    let row = SweepRow {
        t_f_s: geom.t_f,
        v_over_c: geom.velocity(),
        xi_m: geom.separation_m(),
        temp_k: point.temperature_k,
        omega_max: units::from_natural(bath.omega_max, Unit::RadPerSecond),
        result,
        quality,
        error: first_err.as_ref().map(|e| e.to_string()),
    };
    Ok((row, first_err))
}

/// Evaluate every grid point, in grid order. `workers` caps the thread count.
/// Points whose inputs are invalid are reported with `Quality::Domain`.
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let eval = |i: usize| {
        let point = spec.point(i);
        match compute_point(&spec.particle, &point, &spec.components, &spec.engines, &spec.settings) {
            Ok((row, _)) => row,
            Err(e) => SweepRow {
                t_f_s: point.t_f,
                v_over_c: f64::NAN,
                xi_m: f64::NAN,
                temp_k: point.temperature_k,
                omega_max: f64::NAN,
                result: DephasingResult::default(),
                quality: Quality::of(&e),
                error: Some(e.to_string()),
            },
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..spec.grid.len()).into_par_iter().map(eval).collect()))
}

pub const PRESET_NAMES: [&str; 3] = ["fig4", "fig5a", "fig5b"];

/// Grids and parameters of the figure reproductions. Non-spin curves use
/// the closed forms, spin curves the quadrature.
pub fn figure_preset(name: &str) -> Result<SweepSpec> {
    let grid = log_grid(1e-6, 1e-3, DEFAULT_GRID_POINTS)?;
    let mut engines = BTreeMap::new();
    engines.insert(ComponentKind::NonspinVac, Engine::ClosedForm);
    engines.insert(ComponentKind::NonspinTh, Engine::ClosedForm);
    let base = |particle: ParticleSpec, speed: SpeedMode, cutoff: CutoffPolicy| SweepSpec {
        particle,
        template: PointSpec {
            t_f: grid[0],
            speed,
            convention: SeparationConvention::XiEq2VTf,
            temperature_k: 1.0,
            cutoff,
        },
        axis: Axis::TF,
        grid: grid.clone(),
        components: ComponentKind::ALL.to_vec(),
        engines: engines.clone(),
        settings: QuadratureSettings::default(),
    };
    match name {
        "fig4" => Ok(base(electron(), SpeedMode::FixedSeparation(1e-3), CutoffPolicy::default())),
        "fig5a" => Ok(base(electron(), SpeedMode::FixedVelocity(1e-11), CutoffPolicy::default())),
        // same Ω_max as fig5a, so rows differ only through 1/m_f
        "fig5b" => Ok(base(
            particle_lookup("Ag107", None)?,
            SpeedMode::FixedVelocity(1e-11),
            CutoffPolicy::Explicit(crate::bath::DEFAULT_CUTOFF_FRACTION * ELECTRON_MASS_EV),
        )),
        other => Err(Error::invalid(format!("unknown preset '{other}' (known: fig4, fig5a, fig5b)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn short(mut spec: SweepSpec, n: usize) -> SweepSpec {
        spec.grid = log_grid(spec.grid[0], *spec.grid.last().unwrap(), n).unwrap();
        spec
    }

    #[test]
    fn grids() {
        let g = log_grid(1e-6, 1e-3, 61).unwrap();
        assert_eq!(g.len(), 61);
        assert_eq!((g[0], g[60]), (1e-6, 1e-3));
        assert!(rel(g[20], 1e-5) < 1e-14);
        assert!(log_grid(1.0, 1.0, 3).is_err());
        let l = linear_grid(0.0, 1.0, 5).unwrap();
        assert_eq!(l, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn visibility_values() {
        assert_eq!(visibility(0.0).unwrap(), 1.0);
        assert!((visibility(std::f64::consts::LN_2).unwrap() - 0.5).abs() < 1e-15);
        assert!(rel(visibility(100.0).unwrap(), 3.720_075_976_020_836e-44) < 1e-14);
        assert!(visibility(-1.0).is_err());
        assert!(visibility(700.0).unwrap() > 0.0);
    }

    #[test]
    fn presets_parameters() {
        let a = figure_preset("fig5a").unwrap();
        assert_eq!(a.template.speed, SpeedMode::FixedVelocity(1e-11));
        assert_eq!((a.grid[0], *a.grid.last().unwrap()), (1e-6, 1e-3));
        let f4 = figure_preset("fig4").unwrap();
        assert_eq!(f4.template.temperature_k, 1.0);
        assert_eq!(f4.template.speed, SpeedMode::FixedSeparation(1e-3));
        assert!(figure_preset("fig6").is_err());
    }

    #[test]
    fn single_point_sweep_echoes_compute() {
        let mut spec = figure_preset("fig5a").unwrap();
        spec.grid = vec![2e-5];
        let rows = run_sweep(&spec, Some(1)).unwrap();
        assert_eq!(rows.len(), 1);
        let (row, err) = compute_point(&spec.particle, &spec.point(0), &spec.components, &spec.engines, &spec.settings)
            .unwrap();
        assert!(err.is_none());
        assert_eq!(rows[0], row);
        assert!(rel(row.omega_max, 1e-2 * ELECTRON_MASS_EV / units::HBAR_EV_S) < 1e-14);
    }

    #[test]
    fn zero_velocity_rows_vanish() {
        let mut spec = short(figure_preset("fig5a").unwrap(), 4);
        spec.template.speed = SpeedMode::FixedVelocity(0.0);
        for row in run_sweep(&spec, None).unwrap() {
            assert_eq!(row.result.gamma_total(), 0.0);
            assert_eq!(row.result.phase.unwrap().value, 0.0);
        }
    }

    #[test]
    fn fig5_mass_scaling_row_by_row() {
        let a = run_sweep(&short(figure_preset("fig5a").unwrap(), 5), None).unwrap();
        let b = run_sweep(&short(figure_preset("fig5b").unwrap(), 5), None).unwrap();
        let ratio = ELECTRON_MASS_EV / particle_lookup("Ag107", None).unwrap().mass_ev;
        for (ra, rb) in a.iter().zip(&b) {
            let (sa, sb) = (ra.result.gamma_spin_vac.unwrap().value, rb.result.gamma_spin_vac.unwrap().value);
            assert!(rel(sb, sa * ratio) < 1e-12);
            assert_eq!(ra.result.gamma_nonspin_vac, rb.result.gamma_nonspin_vac);
            assert_eq!(ra.result.gamma_nonspin_th, rb.result.gamma_nonspin_th);
        }
    }

    #[test]
    fn invalid_points_are_flagged_not_fatal() {
        let mut spec = short(figure_preset("fig4").unwrap(), 3);
        spec.grid = vec![1e-15, 1e-6, 1e-5];
        let rows = run_sweep(&spec, None).unwrap();
        assert_eq!(rows[0].quality, Quality::Domain);
        assert_eq!(rows[1].quality, Quality::Ok);
    }

    #[test]
    fn spin_closed_form_rejected() {
        let mut spec = figure_preset("fig5a").unwrap();
        spec.engines.insert(ComponentKind::SpinVac, Engine::ClosedForm);
        assert!(run_sweep(&spec, None).is_err());
    }

    #[test]
    fn worker_count_does_not_change_rows() {
        let spec = short(figure_preset("fig4").unwrap(), 7);
        assert_eq!(run_sweep(&spec, Some(1)).unwrap(), run_sweep(&spec, Some(4)).unwrap());
    }
}
