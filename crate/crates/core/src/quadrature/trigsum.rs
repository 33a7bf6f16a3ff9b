// SPDX-License-Identifier: Apache-2.0

//! Exact integration of trigonometric sums Σ aᵢ trig(fᵢ x).
//!
//! Frequencies are stored as `base + offset` so that phases such as
//! (t ± v t cos θ) ω can be evaluated by angle addition: the product
//! base·x may be ~1e13 while offset·x stays O(1), and forming the sum first
//! would throw away the small part.

use super::CompensatedSum;
use crate::special::sinc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub base: f64,
    pub offset: f64,
    pub kind: Trig,
}

impl TrigTerm {
    pub fn cos(amplitude: f64, frequency: f64) -> Self {
        TrigTerm { amplitude, base: frequency, offset: 0.0, kind: Trig::Cos }
    }

    pub fn sin(amplitude: f64, frequency: f64) -> Self {
        TrigTerm { amplitude, base: frequency, offset: 0.0, kind: Trig::Sin }
    }

    pub fn frequency(&self) -> f64 {
        self.base + self.offset
    }

    /// Value of the term at x.
    pub fn eval(&self, x: f64) -> f64 {
        let (s, c) = split_sin_cos(self.base * x, self.offset * x);
        self.amplitude
            * match self.kind {
                Trig::Cos => c,
                Trig::Sin => s,
            }
    }

    /// Closed-form ∫ₐᵇ of the term, written about the midpoint so the
    /// zero-frequency limit is exact.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let (sm, cm) = split_sin_cos(self.base * m, self.offset * m);
        let fh = self.frequency() * h;
        let width = if fh.abs() < 1.0 {
            2.0 * h * sinc(fh)
        } else {
            2.0 * h * split_sin_cos(self.base * h, self.offset * h).0 / fh
        };
        self.amplitude
            * width
            * match self.kind {
                Trig::Cos => cm,
                Trig::Sin => sm,
            }
    }
}

#[inline]
fn split_sin_cos(big: f64, small: f64) -> (f64, f64) {
    if small == 0.0 {
        return big.sin_cos();
    }
    let (sb, cb) = big.sin_cos();
    let (ss, cs) = small.sin_cos();
    (sb * cs + cb * ss, cb * cs - sb * ss)
}

/// A finite list of trigonometric terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrigSum {
    pub terms: Vec<TrigTerm>,
}

impl TrigSum {
    pub fn new(terms: Vec<TrigTerm>) -> Self {
        TrigSum { terms }
    }

    pub fn push(&mut self, t: TrigTerm) {
        self.terms.push(t);
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for t in &self.terms {
            acc.add(t.eval(x));
        }
        acc.value()
    }

    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.frequency().abs()).fold(0.0, f64::max)
    }

    pub fn concat(&self, other: &TrigSum) -> TrigSum {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        TrigSum { terms }
    }
}

/// ∫ₐᵇ Σ aᵢ trig(fᵢ x) dx, summed term by term.
pub fn integrate_trigsum(ts: &TrigSum, a: f64, b: f64) -> f64 {
    let mut acc = CompensatedSum::default();
    for t in &ts.terms {
        acc.add(t.integral(a, b));
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::super::{integrate_oscillatory, QuadratureSettings};
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_and_vanishing() {
        let ts = TrigSum::new(vec![TrigTerm::cos(1.0, 0.0)]);
        assert_eq!(integrate_trigsum(&ts, 0.0, 5.0), 5.0);
        let ts = TrigSum::new(vec![TrigTerm::cos(1.0, 2.0)]);
        assert!(integrate_trigsum(&ts, 0.0, PI).abs() < 1e-15);
        let ts = TrigSum::new(vec![TrigTerm::sin(1.0, 0.0)]);
        assert_eq!(integrate_trigsum(&ts, 0.0, 5.0), 0.0);
    }

    #[test]
    fn sine_term() {
        let ts = TrigSum::new(vec![TrigTerm::sin(3.0, 4.0)]);
        let want = 3.0 * (1.0 - 4.0f64.cos()) / 4.0;
        let got = integrate_trigsum(&ts, 0.0, 1.0);
        assert!((got - 1.240_232_715_647_708_9).abs() < 1e-14);
        assert!((got - want).abs() < 1e-14);
        let q = integrate_oscillatory(|x| ts.eval(x), 0.0, 1.0, 4.0, &QuadratureSettings::default()).unwrap();
        assert!((q.value - want).abs() < 1e-12);
    }

    #[test]
    fn split_frequency_matches_plain() {
        let plain = TrigTerm::cos(1.5, 3.25);
        let split = TrigTerm { amplitude: 1.5, base: 3.0, offset: 0.25, kind: Trig::Cos };
        assert!((plain.integral(0.3, 7.0) - split.integral(0.3, 7.0)).abs() < 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn agrees_with_adaptive(
            amps in proptest::collection::vec(-3.0f64..3.0, 1..6),
            freqs in proptest::collection::vec(-40.0f64..40.0, 6),
            kinds in proptest::collection::vec(proptest::bool::ANY, 6),
            a in 0.0f64..5.0, len in 0.1f64..50.0,
        ) {
            let terms: Vec<TrigTerm> = amps.iter().enumerate().map(|(i, &amp)| {
                if kinds[i] { TrigTerm::cos(amp, freqs[i]) } else { TrigTerm::sin(amp, freqs[i]) }
            }).collect();
            let ts = TrigSum::new(terms);
            let b = a + len;
            let exact = integrate_trigsum(&ts, a, b);
            let s = QuadratureSettings { rel_tol: 1e-12, abs_tol: 1e-15, ..Default::default() };
            let q = integrate_oscillatory(|x| ts.eval(x), a, b, ts.max_frequency(), &s).unwrap();
            let scale = ts.terms.iter().map(|t| t.amplitude.abs()).sum::<f64>() * len;
            proptest::prop_assert!((q.value - exact).abs() <= 1e-8 * exact.abs().max(1e-6 * scale),
                "{} vs {}", q.value, exact);
        }

        #[test]
        fn linearity(
            amps in proptest::collection::vec(-3.0f64..3.0, 2..8),
            split in 1usize..7,
            b in 0.1f64..100.0,
        ) {
            let terms: Vec<TrigTerm> = amps.iter().enumerate()
                .map(|(i, &a)| if i % 2 == 0 { TrigTerm::cos(a, i as f64 * 1.7) } else { TrigTerm::sin(a, i as f64 * 0.9) })
                .collect();
            let k = split.min(terms.len() - 1);
            let left = TrigSum::new(terms[..k].to_vec());
            let right = TrigSum::new(terms[k..].to_vec());
            let whole = integrate_trigsum(&left.concat(&right), 0.0, b);
            let parts = integrate_trigsum(&left, 0.0, b) + integrate_trigsum(&right, 0.0, b);
            let mag: f64 = terms.iter().map(|t| t.integral(0.0, b).abs()).sum();
            proptest::prop_assert!((whole - parts).abs() <= 4.0 * f64::EPSILON * mag);
        }
    }
}
