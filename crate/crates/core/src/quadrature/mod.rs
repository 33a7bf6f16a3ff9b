// SPDX-License-Identifier: Apache-2.0

//! Numerical integration engine.
//!
//! * [`integrate_adaptive`] / [`integrate_oscillatory`]: globally adaptive
//!   21-point Gauss-Kronrod. The oscillatory variant pre-splits the interval so
//!   that no panel spans more than one period of the highest frequency.
//! * [`integrate_polar`]: solid-angle integrals of azimuthally symmetric
//!   functions, 2π ∫₋₁¹ g(u) du.
//! * [`integrate_trigsum`]: exact integration of Σ aᵢ trig(fᵢ x).
//! * [`filon_legendre`]: ∫₋₁¹ A(u) trig(λu + φ) du for smooth A and large λ.

mod filon;
mod gauss;
mod trigsum;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filon::filon_legendre;
pub(crate) use gauss::gauss_legendre;
pub use trigsum::{integrate_trigsum, Trig, TrigSum, TrigTerm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    /// Absolute tolerance relative to the problem scale ∫|f|.
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub osc_splitting: bool,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings { rel_tol: 1e-9, abs_tol: 1e-14, max_subdivisions: 100_000, osc_splitting: true }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol must be > 0"));
        }
        if !(self.abs_tol >= 0.0) {
            return Err(Error::invalid("abs_tol must be >= 0"));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::invalid("max_subdivisions must be >= 1"));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub err_est: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, err_est: 0.0 }
    }

    pub fn scale(self, k: f64) -> Self {
        Estimate { value: self.value * k, err_est: self.err_est * k.abs() }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate { value: self.value + rhs.value, err_est: self.err_est + rhs.err_est }
    }
}

/// Neumaier-compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    abs: f64,
}

struct HeapKey {
    err: f64,
    idx: usize,
}

impl PartialEq for HeapKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapKey {}
impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        // ties broken by index so the refinement order is fully determined
        self.err.total_cmp(&other.err).then_with(|| other.idx.cmp(&self.idx))
    }
}

fn eval_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let r = gauss::gk21(f, a, b);
    Panel { a, b, value: r.value, err: r.err, abs: r.abs }
}

fn totals(panels: &[Panel]) -> (f64, f64, f64) {
    let mut order: Vec<usize> = (0..panels.len()).collect();
    order.sort_by(|&i, &j| panels[i].a.total_cmp(&panels[j].a));
    let mut v = CompensatedSum::default();
    let mut e = CompensatedSum::default();
    let mut s = CompensatedSum::default();
    for i in order {
        v.add(panels[i].value);
        e.add(panels[i].err);
        s.add(panels[i].abs);
    }
    (v.value(), e.value(), s.value())
}

fn adaptive_from_breakpoints<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], s: &QuadratureSettings) -> Result<Estimate> {
    s.validate()?;
    let mut panels: Vec<Panel> = breaks.windows(2).map(|w| eval_panel(f, w[0], w[1])).collect();
    let mut heap: BinaryHeap<HeapKey> =
        panels.iter().enumerate().map(|(idx, p)| HeapKey { err: p.err, idx }).collect();
    let (mut value, mut err, mut scale) = totals(&panels);
    loop {
        if !value.is_finite() || !err.is_finite() {
            return Err(Error::Quadrature { estimate: value, err_est: err });
        }
        // the Kronrod error never drops below 50ε∫|f|, so neither may the target
        let tol = |v: f64, sc: f64| (s.rel_tol * v.abs()).max(s.abs_tol * sc).max(100.0 * f64::EPSILON * sc);
        if err <= tol(value, scale) {
            // running sums drift; confirm with an ordered resummation
            (value, err, scale) = totals(&panels);
            if err <= tol(value, scale) {
                return Ok(Estimate { value, err_est: err });
            }
        }
        if panels.len() >= s.max_subdivisions {
            let (v, e, _) = totals(&panels);
            return Err(Error::Quadrature { estimate: v, err_est: e });
        }
        let Some(top) = heap.pop() else {
            let (v, e, _) = totals(&panels);
            return Err(Error::Quadrature { estimate: v, err_est: e });
        };
        let p = panels[top.idx];
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // cannot resolve further in floating point
            let (v, e, _) = totals(&panels);
            return Err(Error::Quadrature { estimate: v, err_est: e });
        }
        let left = eval_panel(f, p.a, mid);
        let right = eval_panel(f, mid, p.b);
        value += left.value + right.value - p.value;
        err += left.err + right.err - p.err;
        scale += left.abs + right.abs - p.abs;
        panels[top.idx] = left;
        panels.push(right);
        heap.push(HeapKey { err: left.err, idx: top.idx });
        heap.push(HeapKey { err: right.err, idx: panels.len() - 1 });
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(Error::invalid(format!("integration interval must satisfy a < b, got [{a}, {b}]")))
    }
}

/// ∫ₐᵇ f(x) dx by globally adaptive Gauss-Kronrod.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, s: &QuadratureSettings) -> Result<Estimate> {
    check_interval(a, b)?;
    adaptive_from_breakpoints(&f, &[a, b], s)
}

/// ∫ₐᵇ f(x) dx where f oscillates with angular frequency at most `max_freq`.
/// With `osc_splitting` on, [a, b] is first cut into panels of at most one period.
pub fn integrate_oscillatory<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    max_freq: f64,
    s: &QuadratureSettings,
) -> Result<Estimate> {
    check_interval(a, b)?;
    let periods = if s.osc_splitting && max_freq.is_finite() && max_freq > 0.0 {
        ((b - a) * max_freq / (2.0 * PI)).ceil()
    } else {
        1.0
    };
    let n = (periods as usize).clamp(1, s.max_subdivisions.max(1));
    let breaks: Vec<f64> = (0..=n)
        .map(|i| if i == n { b } else { a + (b - a) * (i as f64) / (n as f64) })
        .collect();
    adaptive_from_breakpoints(&f, &breaks, s)
}

/// Number of one-period panels the oscillatory splitter would create.
pub fn oscillation_panels(a: f64, b: f64, max_freq: f64) -> f64 {
    ((b - a) * max_freq / (2.0 * PI)).ceil().max(1.0)
}

/// 2π ∫₋₁¹ g(u) du: a solid-angle integral of a function of u = cos θ only.
pub fn integrate_polar<G: Fn(f64) -> f64>(g: G, s: &QuadratureSettings) -> Result<Estimate> {
    integrate_adaptive(g, -1.0, 1.0, s).map(|e| e.scale(2.0 * PI))
}

/// [`integrate_polar`] for an integrand oscillating in u with frequency up to `max_freq`.
pub fn integrate_polar_oscillatory<G: Fn(f64) -> f64>(g: G, max_freq: f64, s: &QuadratureSettings) -> Result<Estimate> {
    integrate_oscillatory(g, -1.0, 1.0, max_freq, s).map(|e| e.scale(2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    #[test]
    fn textbook_integrals() {
        let r = integrate_adaptive(f64::sin, 0.0, PI, &s()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        let r = integrate_adaptive(|x| x * x, 0.0, 1.0, &s()).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-12);
        assert!(r.err_est >= 0.0);
    }

    #[test]
    fn oscillatory_cosine() {
        // antiderivative: sin(50x)/50; phase rounding at 50x ~ 5e4 limits agreement
        // to ~1e-13 of ∫|f| ≈ 637
        let want = (50_000.0f64).sin() / 50.0;
        let r = integrate_oscillatory(|x| (50.0 * x).cos(), 0.0, 1000.0, 50.0, &s()).unwrap();
        assert!((r.value - want).abs() <= 1e-9, "{} vs {want}", r.value);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        let r = integrate_adaptive(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &s()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn polar_moments() {
        let r = integrate_polar(|_| 1.0, &s()).unwrap();
        assert!((r.value - 4.0 * PI).abs() < 1e-13);
        let r = integrate_polar(|u| u, &s()).unwrap();
        assert!(r.value.abs() < 1e-14);
        let r = integrate_polar(|u| u * u, &s()).unwrap();
        assert!((r.value - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let tight = QuadratureSettings { max_subdivisions: 3, osc_splitting: false, ..s() };
        match integrate_adaptive(|x| (400.0 * x).sin().abs(), 0.0, 10.0, &tight) {
            Err(Error::Quadrature { estimate, err_est }) => {
                assert!(estimate.is_finite() && err_est > 0.0);
            }
            other => panic!("expected budget failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_interval_and_settings() {
        assert!(integrate_adaptive(|x| x, 1.0, 0.0, &s()).is_err());
        let bad = QuadratureSettings { rel_tol: 0.0, ..s() };
        assert!(integrate_adaptive(|x| x, 0.0, 1.0, &bad).is_err());
    }

    #[test]
    fn deterministic_bits() {
        let f = |x: f64| (x * 37.0).sin() * (-x).exp();
        let a = integrate_oscillatory(f, 0.0, 30.0, 37.0, &s()).unwrap();
        let handles: Vec<_> = (0..4)
            .map(|_| std::thread::spawn(move || integrate_oscillatory(f, 0.0, 30.0, 37.0, &s()).unwrap()))
            .collect();
        for h in handles {
            let b = h.join().unwrap();
            assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
    }
}
