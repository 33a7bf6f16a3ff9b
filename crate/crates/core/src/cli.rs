// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: `compute`, `sweep`, `compare`, `presets`.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 domain error,
//! 3 quadrature budget failure, 4 comparison outside tolerance. A sweep
//! exits 3 when some rows failed and 2 when all of them did.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::bath::CutoffPolicy;
use crate::error::Error;
use crate::influence::{gamma_th_closed, gamma_vac_closed, LoopSpec};
use crate::qbe::{gamma_nonspin, Component, Engine, SeparationConvention, SpeedMode};
use crate::quadrature::QuadratureSettings;
use crate::scenarios::{
    compute_point, figure_preset, linear_grid, log_grid, run_sweep, Axis, ComponentKind, PointSpec, Quality,
    SweepRow, SweepSpec, PRESET_NAMES,
};
use crate::units::{self, particle_lookup, ParticleSpec, Unit};

/// Environment variable capping the sweep worker count.
pub const WORKERS_ENV: &str = "BREMS_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_QUADRATURE: i32 = 3;
pub const EXIT_COMPARE_FAILED: i32 = 4;

/// Column order of every CSV table and key set of every JSON row.
pub const CSV_COLUMNS: [&str; 11] = [
    "t_f_s",
    "v_over_c",
    "temp_K",
    "omega_max",
    "gamma_nonspin_vac",
    "gamma_nonspin_th",
    "gamma_spin_vac",
    "gamma_spin_th",
    "phase",
    "visibility",
    "quality",
];

#[derive(Parser, Debug)]
#[command(name = "bremsdephase", version, about = "Bremsstrahlung dephasing in Stern-Gerlach interferometers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one parameter point.
    Compute {
        #[command(flatten)]
        common: CommonArgs,
        /// Also report the loop closed forms at the same t_f and v.
        #[arg(long)]
        appendix: bool,
    },
    /// Evaluate a grid of points, from a preset or an explicit axis.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Compare the non-spin quadrature with the loop closed forms.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Relative tolerance for the pass/fail verdict.
        #[arg(long)]
        tolerance: Option<String>,
    },
    /// List the figure presets with their resolved parameters.
    Presets {
        #[arg(long)]
        format: Option<String>,
    },
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Flat key = value file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    particle: Option<String>,
    /// Particle mass in eV (custom particles).
    #[arg(long = "mass-ev")]
    mass_ev: Option<String>,
    /// Charge in units of e.
    #[arg(long)]
    charge: Option<String>,
    /// Recombination time t_f in seconds.
    #[arg(long)]
    tf: Option<String>,
    /// Arm speed v/c.
    #[arg(long)]
    v: Option<String>,
    /// Maximal separation in meters.
    #[arg(long)]
    xi: Option<String>,
    /// xi_eq_v_tf or xi_eq_2v_tf.
    #[arg(long)]
    convention: Option<String>,
    /// Bath temperature in kelvin.
    #[arg(long)]
    temp: Option<String>,
    /// "auto" or Ω_max in rad/s.
    #[arg(long)]
    cutoff: Option<String>,
    /// Fraction of the rest energy used by the auto cutoff.
    #[arg(long = "cutoff-fraction")]
    cutoff_fraction: Option<String>,
    /// Comma-separated subset of nonspin_vac,nonspin_th,spin_vac,spin_th,phase.
    #[arg(long)]
    components: Option<String>,
    /// quadrature or closed_form.
    #[arg(long = "nonspin-engine")]
    nonspin_engine: Option<String>,
    #[arg(long = "rel-tol")]
    rel_tol: Option<String>,
    #[arg(long = "abs-tol")]
    abs_tol: Option<String>,
    #[arg(long = "max-subdivisions")]
    max_subdivisions: Option<String>,
    #[arg(long = "osc-splitting")]
    osc_splitting: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct SweepArgs {
    #[arg(long)]
    preset: Option<String>,
    /// t_f, v, xi, temperature or omega_max.
    #[arg(long)]
    axis: Option<String>,
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    #[arg(long)]
    points: Option<String>,
    /// log or linear.
    #[arg(long)]
    spacing: Option<String>,
    /// Worker threads; overrides BREMS_WORKERS.
    #[arg(long)]
    workers: Option<String>,
}

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: msg.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) => EXIT_USAGE,
            Error::Domain(_) => EXIT_DOMAIN,
            Error::Quadrature { .. } => EXIT_QUADRATURE,
        };
        CliError { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Everything a single-point run needs, with defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub particle: ParticleSpec,
    pub point: PointSpec,
    pub components: Vec<ComponentKind>,
    pub engines: BTreeMap<ComponentKind, Engine>,
    pub settings: QuadratureSettings,
    pub format: Format,
    pub output: Option<PathBuf>,
}

/// Flat key → value settings merged from a config file and flags.
#[derive(Debug, Default, Clone)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    /// Parse a flat TOML document; nested tables are rejected.
    pub fn parse(text: &str) -> CliResult<Self> {
        let table: toml::Table = text.parse().map_err(|e| CliError::usage(format!("config: {e}")))?;
        let mut out = BTreeMap::new();
        for (k, v) in table {
            let s = match v {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => format!("{f:e}"),
                toml::Value::Boolean(b) => b.to_string(),
                toml::Value::Array(items) => items
                    .iter()
                    .map(|i| match i {
                        toml::Value::String(s) => Ok(s.clone()),
                        _ => Err(CliError::usage(format!("config: `{k}` must be a list of strings"))),
                    })
                    .collect::<CliResult<Vec<_>>>()?
                    .join(","),
                _ => return Err(CliError::usage(format!("config: `{k}` must be a plain value"))),
            };
            out.insert(k.replace('-', "_"), s);
        }
        Ok(KeyValues(out))
    }

    fn set(&mut self, key: &str, value: Option<&String>) {
        if let Some(v) = value {
            self.0.insert(key.to_string(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.get(key)
            .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::usage(format!("invalid value for `{key}`: '{s}'"))))
            .transpose()
    }

    fn usize(&self, key: &str) -> CliResult<Option<usize>> {
        self.get(key)
            .map(|s| s.trim().parse::<usize>().map_err(|_| CliError::usage(format!("invalid value for `{key}`: '{s}'"))))
            .transpose()
    }

    fn bool(&self, key: &str) -> CliResult<Option<bool>> {
        self.get(key)
            .map(|s| match s.trim() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(CliError::usage(format!("invalid value for `{key}`: '{other}'"))),
            })
            .transpose()
    }

    fn parse_with<T>(&self, key: &str, f: impl Fn(&str) -> crate::Result<T>) -> CliResult<Option<T>> {
        self.get(key)
            .map(|s| f(s.trim()).map_err(|e| CliError::usage(format!("invalid value for `{key}`: {e}"))))
            .transpose()
    }
}

fn gather(common: &CommonArgs) -> CliResult<KeyValues> {
    let mut kv = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
            KeyValues::parse(&text)?
        }
        None => KeyValues::default(),
    };
    kv.set("particle", common.particle.as_ref());
    kv.set("mass_ev", common.mass_ev.as_ref());
    kv.set("charge", common.charge.as_ref());
    kv.set("tf", common.tf.as_ref());
    kv.set("v", common.v.as_ref());
    kv.set("xi", common.xi.as_ref());
    kv.set("convention", common.convention.as_ref());
    kv.set("temp", common.temp.as_ref());
    kv.set("cutoff", common.cutoff.as_ref());
    kv.set("cutoff_fraction", common.cutoff_fraction.as_ref());
    kv.set("components", common.components.as_ref());
    kv.set("nonspin_engine", common.nonspin_engine.as_ref());
    kv.set("rel_tol", common.rel_tol.as_ref());
    kv.set("abs_tol", common.abs_tol.as_ref());
    kv.set("max_subdivisions", common.max_subdivisions.as_ref());
    kv.set("osc_splitting", common.osc_splitting.as_ref());
    kv.set("format", common.format.as_ref());
    if let Some(p) = &common.output {
        kv.0.insert("output".into(), p.display().to_string());
    }
    Ok(kv)
}

fn resolve_particle(kv: &KeyValues, base: Option<ParticleSpec>) -> CliResult<ParticleSpec> {
    let mass = kv.f64("mass_ev")?;
    let mut p = match (kv.get("particle"), base) {
        (Some(label), _) => particle_lookup(label, mass)?,
        (None, Some(b)) if mass.is_none() => b,
        (None, Some(b)) => ParticleSpec::new(b.label, mass.unwrap_or(b.mass_ev), b.charge)?,
        (None, None) => particle_lookup("electron", mass)?,
    };
    if let Some(q) = kv.f64("charge")? {
        p = ParticleSpec::new(p.label, p.mass_ev, q)?;
    }
    Ok(p)
}

fn overlay_point(kv: &KeyValues, mut p: PointSpec) -> CliResult<PointSpec> {
    if let Some(t) = kv.f64("tf")? {
        p.t_f = t;
    }
    match (kv.f64("v")?, kv.f64("xi")?) {
        (Some(_), Some(_)) => return Err(CliError::usage("`v` and `xi` are mutually exclusive")),
        (Some(v), None) => p.speed = SpeedMode::FixedVelocity(v),
        (None, Some(xi)) => p.speed = SpeedMode::FixedSeparation(xi),
        (None, None) => {}
    }
    if let Some(c) = kv.parse_with("convention", |s| s.parse::<SeparationConvention>())? {
        p.convention = c;
    }
    if let Some(t) = kv.f64("temp")? {
        p.temperature_k = t;
    }
    let fraction = kv.f64("cutoff_fraction")?;
    match kv.get("cutoff").map(str::trim) {
        Some("auto") => p.cutoff = CutoffPolicy::Auto { fraction: fraction.unwrap_or(crate::bath::DEFAULT_CUTOFF_FRACTION) },
        Some(s) => {
            let w: f64 = s.parse().map_err(|_| CliError::usage(format!("invalid value for `cutoff`: '{s}'")))?;
            p.cutoff = CutoffPolicy::Explicit(units::to_natural(w, Unit::RadPerSecond));
        }
        None => {
            if let Some(f) = fraction {
                p.cutoff = CutoffPolicy::Auto { fraction: f };
            }
        }
    }
    Ok(p)
}

fn overlay_components(kv: &KeyValues, base: Vec<ComponentKind>) -> CliResult<Vec<ComponentKind>> {
    let Some(list) = kv.get("components") else {
        return Ok(base);
    };
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let k: ComponentKind = item.parse().map_err(|e| CliError::usage(format!("invalid value for `components`: {e}")))?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(CliError::usage("`components` is empty"));
    }
    Ok(out)
}

fn overlay_engines(kv: &KeyValues, mut engines: BTreeMap<ComponentKind, Engine>) -> CliResult<BTreeMap<ComponentKind, Engine>> {
    if let Some(e) = kv.parse_with("nonspin_engine", |s| s.parse::<Engine>())? {
        engines.insert(ComponentKind::NonspinVac, e);
        engines.insert(ComponentKind::NonspinTh, e);
    }
    Ok(engines)
}

fn overlay_settings(kv: &KeyValues, mut s: QuadratureSettings) -> CliResult<QuadratureSettings> {
    if let Some(x) = kv.f64("rel_tol")? {
        s.rel_tol = x;
    }
    if let Some(x) = kv.f64("abs_tol")? {
        s.abs_tol = x;
    }
    if let Some(x) = kv.usize("max_subdivisions")? {
        s.max_subdivisions = x;
    }
    if let Some(x) = kv.bool("osc_splitting")? {
        s.osc_splitting = x;
    }
    s.validate()?;
    Ok(s)
}

fn resolve_format(kv: &KeyValues) -> CliResult<Format> {
    match kv.get("format").map(str::trim) {
        None | Some("csv") => Ok(Format::Csv),
        Some("json") => Ok(Format::Json),
        Some(other) => Err(CliError::usage(format!("invalid value for `format`: '{other}' (csv or json)"))),
    }
}

impl RunConfig {
    /// Resolve a single-point configuration; `tf` and one of `v`/`xi` are required.
    pub fn from_key_values(kv: &KeyValues) -> CliResult<Self> {
        if !kv.has("tf") {
            return Err(CliError::usage("missing required field `tf`"));
        }
        if !kv.has("v") && !kv.has("xi") {
            return Err(CliError::usage("one of `v` or `xi` is required"));
        }
        let base = PointSpec {
            t_f: f64::NAN,
            speed: SpeedMode::FixedVelocity(0.0),
            convention: SeparationConvention::default(),
            temperature_k: 0.0,
            cutoff: CutoffPolicy::default(),
        };
        Ok(RunConfig {
            particle: resolve_particle(kv, None)?,
            point: overlay_point(kv, base)?,
            components: overlay_components(kv, ComponentKind::ALL.to_vec())?,
            engines: overlay_engines(kv, BTreeMap::new())?,
            settings: overlay_settings(kv, QuadratureSettings::default())?,
            format: resolve_format(kv)?,
            output: kv.get("output").map(PathBuf::from),
        })
    }
}

fn resolve_sweep(kv: &KeyValues, args: &SweepArgs) -> CliResult<SweepSpec> {
    let spec = if let Some(name) = &args.preset {
        if args.axis.is_some() {
            return Err(CliError::usage("`preset` and `axis` are mutually exclusive"));
        }
        let p = figure_preset(name)?;
        SweepSpec {
            particle: resolve_particle(kv, Some(p.particle.clone()))?,
            template: overlay_point(kv, p.template)?,
            components: overlay_components(kv, p.components.clone())?,
            engines: overlay_engines(kv, p.engines.clone())?,
            settings: overlay_settings(kv, p.settings)?,
            ..p
        }
    } else {
        let axis: Axis = args
            .axis
            .as_deref()
            .ok_or_else(|| CliError::usage("sweep needs `--preset` or `--axis`"))?
            .parse()?;
        let num = |name: &str, v: &Option<String>| -> CliResult<f64> {
            let s = v.as_deref().ok_or_else(|| CliError::usage(format!("sweep axis needs `--{name}`")))?;
            s.parse().map_err(|_| CliError::usage(format!("invalid value for `{name}`: '{s}'")))
        };
        let (lo, hi) = (num("from", &args.from)?, num("to", &args.to)?);
        let n: usize = match &args.points {
            None => crate::scenarios::DEFAULT_GRID_POINTS,
            Some(s) => s.parse().map_err(|_| CliError::usage(format!("invalid value for `points`: '{s}'")))?,
        };
        let grid = match args.spacing.as_deref().unwrap_or("log") {
            "log" => log_grid(lo, hi, n)?,
            "linear" => linear_grid(lo, hi, n)?,
            other => return Err(CliError::usage(format!("invalid value for `spacing`: '{other}'"))),
        };
        let base = PointSpec {
            t_f: grid[0],
            speed: SpeedMode::FixedVelocity(0.0),
            convention: SeparationConvention::default(),
            temperature_k: 0.0,
            cutoff: CutoffPolicy::default(),
        };
        let template = overlay_point(kv, base)?;
        if axis != Axis::TF && !kv.has("tf") {
            return Err(CliError::usage("missing required field `tf`"));
        }
        if !matches!(axis, Axis::V | Axis::Xi) && !kv.has("v") && !kv.has("xi") {
            return Err(CliError::usage("one of `v` or `xi` is required"));
        }
        SweepSpec {
            particle: resolve_particle(kv, None)?,
            template,
            axis,
            grid,
            components: overlay_components(kv, ComponentKind::ALL.to_vec())?,
            engines: overlay_engines(kv, BTreeMap::new())?,
            settings: overlay_settings(kv, QuadratureSettings::default())?,
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn resolve_workers(flag: &Option<String>) -> CliResult<Option<usize>> {
    let parse = |src: &str, s: &str| -> CliResult<usize> {
        match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::usage(format!("invalid value for `{src}`: '{s}' (positive integer)"))),
        }
    };
    if let Some(s) = flag {
        return parse("workers", s).map(Some);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(s) if !s.trim().is_empty() => parse(WORKERS_ENV, &s).map(Some),
        _ => Ok(None),
    }
}

/// Shortest round-trip decimal; NaN for a value that could not be computed.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:e}")
    }
}

fn component_value(c: Option<Component>) -> f64 {
    c.map(|c| c.value).unwrap_or(f64::NAN)
}

fn row_values(row: &SweepRow) -> [f64; 10] {
    let r = &row.result;
    let complete = row.quality == Quality::Ok;
    [
        row.t_f_s,
        row.v_over_c,
        row.temp_k,
        row.omega_max,
        component_value(r.gamma_nonspin_vac),
        component_value(r.gamma_nonspin_th),
        component_value(r.gamma_spin_vac),
        component_value(r.gamma_spin_th),
        component_value(r.phase),
        if complete { r.visibility() } else { f64::NAN },
    ]
}

/// Rows as CSV with the fixed column order.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for row in rows {
        let mut rec: Vec<String> = row_values(row).iter().map(|&x| format_float(x)).collect();
        rec.push(row.quality.as_str().to_string());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Parse CSV produced by [`rows_to_csv`] back into numeric columns and quality.
pub fn csv_to_values(text: &str) -> crate::Result<Vec<([f64; 10], String)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> =
        r.headers().map_err(|e| Error::invalid(e.to_string()))?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::invalid("unexpected CSV header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::invalid(e.to_string()))?;
        let mut vals = [0.0; 10];
        for (i, v) in vals.iter_mut().enumerate() {
            *v = rec[i].parse().map_err(|_| Error::invalid(format!("bad number '{}'", &rec[i])))?;
        }
        out.push((vals, rec[10].to_string()));
    }
    Ok(out)
}

fn json_number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn row_to_json(row: &SweepRow) -> Map<String, Value> {
    let mut m = Map::new();
    for (k, x) in CSV_COLUMNS.iter().zip(row_values(row)) {
        m.insert((*k).to_string(), json_number(x));
    }
    m.insert("quality".into(), Value::String(row.quality.as_str().into()));
    m
}

fn detail_json(row: &SweepRow) -> Value {
    let r = &row.result;
    let mut err = Map::new();
    let mut raw = Map::new();
    let mut prov = Map::new();
    let parts = [
        ("gamma_nonspin_vac", r.gamma_nonspin_vac),
        ("gamma_nonspin_th", r.gamma_nonspin_th),
        ("gamma_spin_vac", r.gamma_spin_vac),
        ("gamma_spin_th", r.gamma_spin_th),
        ("phase", r.phase),
    ];
    for (k, c) in parts {
        if let Some(c) = c {
            err.insert(k.into(), json_number(c.err_est));
            raw.insert(k.into(), json_number(c.raw));
            prov.insert(k.into(), serde_json::to_value(c.provenance).expect("enum serializes"));
        }
    }
    json!({ "err_est": err, "raw": raw, "provenance": prov })
}

fn emit(text: &str, output: &Option<PathBuf>, out: &mut dyn Write) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display()))),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::usage(format!("cannot write output: {e}"))),
    }
}

fn cmd_compute(common: &CommonArgs, appendix: bool, out: &mut dyn Write) -> CliResult<i32> {
    let kv = gather(common)?;
    let cfg = RunConfig::from_key_values(&kv)?;
    let (row, err) = compute_point(&cfg.particle, &cfg.point, &cfg.components, &cfg.engines, &cfg.settings)?;
    let mut extra = Map::new();
    let mut appendix_err = None;
    if appendix {
        let loop_ = LoopSpec::new(cfg.point.t_f, row.v_over_c, cfg.point.convention)?;
        let bath = cfg.point.bath(&cfg.particle)?;
        match gamma_vac_closed(&loop_, &bath).and_then(|v| Ok((v, gamma_th_closed(&loop_, &bath)?))) {
            Ok((v, t)) => {
                extra.insert("appendix_gamma_vac".into(), json_number(v.value));
                extra.insert("appendix_gamma_th".into(), json_number(t.value));
            }
            Err(e) => appendix_err = Some(e),
        }
    }
    let text = match cfg.format {
        Format::Csv => rows_to_csv(std::slice::from_ref(&row)),
        Format::Json => {
            let mut m = row_to_json(&row);
            m.extend(extra);
            if let Value::Object(d) = detail_json(&row) {
                m.extend(d);
            }
            m.insert(
                "resolved".into(),
                json!({
                    "particle": cfg.particle.label,
                    "mass_ev": json_number(cfg.particle.mass_ev),
                    "charge": json_number(cfg.particle.charge),
                    "xi_m": json_number(row.xi_m),
                    "convention": cfg.point.convention.as_str(),
                    "components": cfg.components.iter().map(|c| c.as_str()).collect::<Vec<_>>(),
                }),
            );
            if let Some(e) = &row.error {
                m.insert("error".into(), Value::String(e.clone()));
            }
            let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("json");
            s.push('\n');
            s
        }
    };
    emit(&text, &cfg.output, out)?;
    if let Some(e) = appendix_err {
        return Err(e.into());
    }
    match err {
        Some(e) => Err(e.into()),
        None => Ok(EXIT_OK),
    }
}

fn cmd_sweep(common: &CommonArgs, args: &SweepArgs, out: &mut dyn Write, diag: &mut dyn Write) -> CliResult<i32> {
    let kv = gather(common)?;
    let spec = resolve_sweep(&kv, args)?;
    let format = resolve_format(&kv)?;
    let workers = resolve_workers(&args.workers)?;
    let rows = run_sweep(&spec, workers)?;
    let text = match format {
        Format::Csv => rows_to_csv(&rows),
        Format::Json => {
            let arr: Vec<Value> = rows.iter().map(|r| Value::Object(row_to_json(r))).collect();
            let mut s = serde_json::to_string_pretty(&Value::Array(arr)).expect("json");
            s.push('\n');
            s
        }
    };
    emit(&text, &kv.get("output").map(PathBuf::from), out)?;
    let failed = rows.iter().filter(|r| r.quality != Quality::Ok).count();
    for r in rows.iter().filter(|r| r.quality != Quality::Ok) {
        let _ = writeln!(diag, "t_f = {} s: {}", format_float(r.t_f_s), r.error.as_deref().unwrap_or("failed"));
    }
    Ok(if failed == 0 {
        EXIT_OK
    } else if failed == rows.len() {
        EXIT_DOMAIN
    } else {
        EXIT_QUADRATURE
    })
}

/// Relative deviation and verdict of one compared pair.
pub fn compare_pair(a: f64, b: f64, tolerance: f64) -> (f64, f64, bool) {
    let abs = (a - b).abs();
    if a == 0.0 && b == 0.0 {
        return (0.0, 0.0, true);
    }
    let rel = abs / a.abs().max(b.abs());
    (abs, rel, rel < tolerance)
}

fn cmd_compare(common: &CommonArgs, tolerance: &Option<String>, out: &mut dyn Write) -> CliResult<i32> {
    let kv = gather(common)?;
    let cfg = RunConfig::from_key_values(&kv)?;
    let tol: f64 = match tolerance {
        None => 0.02,
        Some(s) => match s.parse::<f64>() {
            Ok(t) if t >= 0.0 => t,
            _ => return Err(CliError::usage(format!("invalid value for `tolerance`: '{s}'"))),
        },
    };
    let geom = cfg.point.geometry()?;
    let bath = cfg.point.bath(&cfg.particle)?;
    let qbe = gamma_nonspin(&geom, &bath, &cfg.particle, &cfg.settings);
    let loop_ = LoopSpec::matching(&geom)?;
    let vac = gamma_vac_closed(&loop_, &bath);
    let th = gamma_th_closed(&loop_, &bath);

    let mut lines = Vec::new();
    let mut pass = true;
    let mut worst: Option<CliError> = None;
    let pairs = [
        ("vac", qbe.as_ref().map(|p| p.vac.value), vac.as_ref().map(|c| c.value)),
        ("th", qbe.as_ref().map(|p| p.th.value), th.as_ref().map(|c| c.value)),
    ];
    for (name, q, c) in pairs {
        match (q, c) {
            (Ok(q), Ok(c)) => {
                let (abs, rel, ok) = compare_pair(q, c, tol);
                pass &= ok;
                let verdict = if ok { "PASS" } else { "FAIL" };
                lines.push(format!(
                    "{name}: qbe={} closed={} abs_dev={} rel_dev={} tol={} {verdict}",
                    format_float(q),
                    format_float(c),
                    format_float(abs),
                    format_float(rel),
                    format_float(tol)
                ));
            }
            (q, c) => {
                pass = false;
                for (side, e) in [("qbe", q.err()), ("closed", c.err())] {
                    if let Some(e) = e {
                        lines.push(format!("{name}: {side} error: {e}"));
                        if worst.is_none() {
                            worst = Some(e.clone().into());
                        }
                    }
                }
            }
        }
    }
    lines.push(format!(
        "matched loop: t_f = {} s, v/c = {}, X = {}",
        format_float(loop_.t_f),
        format_float(loop_.v),
        format_float(bath.omega_max * loop_.t_natural())
    ));
    let mut text = lines.join("\n");
    text.push('\n');
    emit(&text, &cfg.output, out)?;
    if let Some(e) = worst {
        return Err(e);
    }
    Ok(if pass { EXIT_OK } else { EXIT_COMPARE_FAILED })
}

fn cmd_presets(format: &Option<String>, out: &mut dyn Write) -> CliResult<i32> {
    let mut kv = KeyValues::default();
    kv.set("format", format.as_ref());
    let fmt = resolve_format(&kv)?;
    let mut rows = Vec::new();
    for name in PRESET_NAMES {
        let p = figure_preset(name)?;
        let bath = p.template.bath(&p.particle)?;
        let (mode, value) = match p.template.speed {
            SpeedMode::FixedVelocity(v) => ("v_over_c", v),
            SpeedMode::FixedSeparation(xi) => ("xi_m", xi),
        };
        rows.push((name, p, bath, mode, value));
    }
    let text = match fmt {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "name", "particle", "mass_ev", "speed_mode", "speed_value", "convention", "temp_K", "omega_max", "t_f_min",
                "t_f_max", "points",
            ])
            .expect("in-memory write");
            for (name, p, bath, mode, value) in &rows {
                w.write_record([
                    name.to_string(),
                    p.particle.label.clone(),
                    format_float(p.particle.mass_ev),
                    mode.to_string(),
                    format_float(*value),
                    p.template.convention.as_str().to_string(),
                    format_float(p.template.temperature_k),
                    format_float(units::from_natural(bath.omega_max, Unit::RadPerSecond)),
                    format_float(p.grid[0]),
                    format_float(*p.grid.last().expect("nonempty")),
                    p.grid.len().to_string(),
                ])
                .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
        }
        Format::Json => {
            let arr: Vec<Value> = rows
                .iter()
                .map(|(name, p, bath, mode, value)| {
                    json!({
                        "name": name,
                        "particle": p.particle.label,
                        "mass_ev": json_number(p.particle.mass_ev),
                        "speed_mode": mode,
                        "speed_value": json_number(*value),
                        "convention": p.template.convention.as_str(),
                        "temp_K": json_number(p.template.temperature_k),
                        "omega_max": json_number(units::from_natural(bath.omega_max, Unit::RadPerSecond)),
                        "t_f_min": json_number(p.grid[0]),
                        "t_f_max": json_number(*p.grid.last().expect("nonempty")),
                        "points": p.grid.len(),
                        "components": p.components.iter().map(|c| c.as_str()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&Value::Array(arr)).expect("json");
            s.push('\n');
            s
        }
    };
    emit(&text, &None, out)?;
    Ok(EXIT_OK)
}

/// Run the CLI on `args` (including the program name) and return the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, diag: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(diag, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Compute { common, appendix } => cmd_compute(common, *appendix, out),
        Command::Sweep { common, sweep } => cmd_sweep(common, sweep, out, diag),
        Command::Compare { common, tolerance } => cmd_compare(common, tolerance, out),
        Command::Presets { format } => cmd_presets(format, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(diag, "error: {}", e.message);
            e.code
        }
    }
}
