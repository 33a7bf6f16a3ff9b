// SPDX-License-Identifier: Apache-2.0

//! Special functions needed by the closed-form frequency integrals.
//!
//! Every routine here is written for the ranges the dephasing integrals hit:
//! arguments up to ~1e16 (Ω_max t_f at atomic masses) and velocity ratios
//! down to 1e-11, where the naive formulas cancel catastrophically.

use num_complex::Complex64;

use crate::units::EULER_GAMMA;

/// sin(x)/x with the removable singularity filled in.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// Cin(x) = ∫₀ˣ (1 − cos u)/u du = γ + ln x − Ci(x).
pub fn cin(x: f64) -> f64 {
    let x = x.abs();
    if x <= 2.0 {
        // alternating series, terms decrease monotonically for x <= 2
        let x2 = x * x;
        let mut term = 1.0;
        let mut sum = 0.0;
        let mut k = 1.0f64;
        loop {
            term *= -x2 / ((2.0 * k - 1.0) * (2.0 * k));
            let add = -term / (2.0 * k);
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        EULER_GAMMA + x.ln() - cos_integral_large(x)
    }
}

/// E₁(ix) for x > 2 through its continued fraction (modified Lentz).
fn exp_integral_imaginary(x: f64) -> Complex64 {
    const TINY: f64 = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 2..100_000 {
        let a = -((i - 1) as f64).powi(2);
        b += 2.0;
        d = (d * a + b).inv();
        c = b + c.inv() * a;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < 1e-16 {
            break;
        }
    }
    let (s, co) = x.sin_cos();
    h * Complex64::new(co, -s)
}

/// Ci(x) for x > 2; E₁(ix) = −Ci(x) + i(Si(x) − π/2).
fn cos_integral_large(x: f64) -> f64 {
    -exp_integral_imaginary(x).re
}

/// Si(x) = ∫₀ˣ sin(u)/u du.
pub fn si(x: f64) -> f64 {
    let ax = x.abs();
    let value = if ax <= 2.0 {
        let x2 = ax * ax;
        let mut term = ax;
        let mut sum = ax;
        let mut k = 1.0f64;
        loop {
            term *= -x2 / ((2.0 * k) * (2.0 * k + 1.0));
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        std::f64::consts::FRAC_PI_2 + exp_integral_imaginary(ax).im
    };
    value.copysign(x)
}

/// ln(sinh x / x), overflow-safe and accurate for small x.
pub fn ln_sinhc(x: f64) -> f64 {
    let x = x.abs();
    if x < 0.1 {
        let x2 = x * x;
        // x²/6 − x⁴/180 + x⁶/2835 − x⁸/37800 + x¹⁰/467775
        x2 * (1.0 / 6.0
            + x2 * (-1.0 / 180.0 + x2 * (1.0 / 2835.0 + x2 * (-1.0 / 37800.0 + x2 / 467_775.0))))
    } else if x <= 30.0 {
        (x.sinh() / x).ln()
    } else {
        x - std::f64::consts::LN_2 - x.ln() + (-(-2.0 * x).exp()).ln_1p()
    }
}

/// coth z − 1/z, odd in z and regular at the origin.
pub fn coth_minus_inv(z: f64) -> f64 {
    let a = z.abs();
    let r = if a < 0.3 {
        let z2 = a * a;
        // z/3 − z³/45 + 2z⁵/945 − z⁷/4725 + 2z⁹/93555 − 1382z¹¹/638512875 + 4z¹³/18243225
        let tail = z2 * (-1382.0 / 638_512_875.0 + z2 * 4.0 / 18_243_225.0);
        a * (1.0 / 3.0
            + z2 * (-1.0 / 45.0 + z2 * (2.0 / 945.0 + z2 * (-1.0 / 4725.0 + z2 * (2.0 / 93555.0 + tail)))))
    } else {
        1.0 / a.tanh() - 1.0 / a
    };
    r.copysign(z)
}

/// coth x − coth y for x, y > 0, without cancellation when both are large.
pub fn coth_diff(x: f64, y: f64) -> f64 {
    if x == y {
        return 0.0;
    }
    if x.min(y) > 20.0 {
        // coth u = 1 + 2e^{-2u}/(1 − e^{-2u})
        let ex = (-2.0 * x).exp();
        let ey = (-2.0 * y).exp();
        2.0 * (ex / (1.0 - ex) - ey / (1.0 - ey))
    } else {
        (y - x).sinh() / (x.sinh() * y.sinh())
    }
}

/// artanh(x)/x − 1, accurate for small x. Requires |x| < 1.
pub fn artanh_ratio_minus_one(x: f64) -> f64 {
    let x2 = x * x;
    if x2 < 1e-2 {
        // Σ_{k≥1} x^{2k}/(2k+1)
        let mut sum = 0.0;
        let mut p = 1.0;
        for k in 1..40 {
            p *= x2;
            let add = p / (2 * k + 1) as f64;
            sum += add;
            if add < 1e-18 * sum {
                break;
            }
        }
        sum
    } else {
        x.atanh() / x - 1.0
    }
}

/// ((1 + v²)/v) artanh(v) − 1, the velocity factor of two arms moving at ±v.
pub fn symmetric_velocity_factor(v: f64) -> f64 {
    let v2 = v * v;
    if v2 < 1e-2 {
        // Σ_{k≥1} v^{2k} · 4k/(4k² − 1)
        let mut sum = 0.0;
        let mut p = 1.0;
        for k in 1..40 {
            p *= v2;
            let kf = k as f64;
            let add = p * 4.0 * kf / (4.0 * kf * kf - 1.0);
            sum += add;
            if add < 1e-18 * sum {
                break;
            }
        }
        sum
    } else {
        (1.0 + v2) / v * v.atanh() - 1.0
    }
}

/// Complex digamma ψ(z) for Re z >= 10 by the asymptotic series.
fn digamma_asymptotic(z: Complex64) -> Complex64 {
    // Bernoulli B_{2n}/(2n) for n = 1..7
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32760.0,
        1.0 / 12.0,
    ];
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut p = inv2;
    for c in C {
        series += p * c;
        p *= inv2;
    }
    z.ln() - inv * 0.5 - series
}

/// Re ψ(1 + iy).
pub fn re_digamma_one_plus_iy(y: f64) -> f64 {
    let y = y.abs();
    if y >= 10.0 {
        return y.ln() + re_digamma_tail(y);
    }
    // ψ(1 + iy) = ψ(11 + iy) − Σ_{k=1}^{10} 1/(k + iy)
    let mut acc = digamma_asymptotic(Complex64::new(11.0, y)).re;
    for k in 1..=10 {
        let kf = k as f64;
        acc -= kf / (kf * kf + y * y);
    }
    acc
}

/// Re ψ(1 + iy) − ln y for y >= 10 (asymptotic series in 1/y²).
pub fn re_digamma_tail(y: f64) -> f64 {
    const C: [f64; 7] = [
        1.0 / 12.0,
        1.0 / 120.0,
        1.0 / 252.0,
        1.0 / 240.0,
        1.0 / 132.0,
        691.0 / 32760.0,
        1.0 / 12.0,
    ];
    let u = 1.0 / (y * y);
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * u + c;
    }
    acc * u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn cin_reference_values() {
        // mpmath: γ + ln x − Ci(x)
        let cases = [
            (0.5, 0.061_852_563_148_200_45),
            (2.0, 0.847_382_016_686_613_2),
            (10.0, 2.925_257_190_900_034),
            (1e4, 9.787_586_588_794_44),
            (1e12, 28.208_236_780_830_69),
        ];
        for (x, want) in cases {
            assert!(rel(cin(x), want) < 1e-14, "Cin({x}) = {} want {want}", cin(x));
        }
        assert_eq!(cin(0.0), 0.0);
    }

    #[test]
    fn si_reference_values() {
        // mpmath si
        let cases = [
            (0.5, 0.49310741804306669),
            (2.0, 1.6054129768026948),
            (2.5, 1.7785201734438266),
            (30.0, 1.5667565400303511),
            (1e6, 1.5707953900431191),
        ];
        for (x, want) in cases {
            assert!(rel(si(x), want) < 1e-14, "x={x}: {} vs {want}", si(x));
            assert_eq!(si(-x), -si(x));
        }
        assert_eq!(si(0.0), 0.0);
    }

    #[test]
    fn cin_continuity_at_switch() {
        let a = cin(2.0);
        let b = cin(2.0 + 1e-12);
        assert!((a - b).abs() < 1e-11);
    }

    #[test]
    fn ln_sinhc_matches_direct_and_asymptote() {
        // mpmath
        let cases = [
            (0.05, 0.000_416_631_949_954_875_1),
            (0.099, 0.001_632_966_667_397_844_3),
            (0.101, 0.001_699_588_927_475_459_2),
            (1.0, 0.161_439_361_571_195_63),
            (5.0, 2.697_369_506_045_584),
            (29.0, 24.939_556_989_453_58),
        ];
        for (x, want) in cases {
            assert!(rel(ln_sinhc(x), want) < 1e-13, "x={x}");
        }
        // bracket L(1) − L(2)/4, mpmath
        assert!(rel(ln_sinhc(1.0) - 0.25 * ln_sinhc(2.0), 0.012_634_313_557_639_93) < 1e-13);
        // large argument: no overflow
        assert!(ln_sinhc(1e6).is_finite());
        let x = 100.0f64;
        let asym = x / 2.0 - 0.75 * x.ln() - 0.5 * std::f64::consts::LN_2;
        assert!(rel(ln_sinhc(x) - 0.25 * ln_sinhc(2.0 * x), asym) < 1e-12);
        assert!(rel(asym, 46.199_548_770_228_96) < 1e-14);
    }

    #[test]
    fn coth_minus_inv_branches() {
        // mpmath
        let cases = [
            (1e-6, 1e-6 / 3.0),
            (0.1, 0.033_311_132_253_989_61),
            (0.29, 0.096_128_993_672_641_98),
            (0.31, 0.102_677_312_522_707_63),
            (1.0, 0.313_035_285_499_331_3),
            (40.0, 0.975),
        ];
        for (z, want) in cases {
            assert!(rel(coth_minus_inv(z), want) < 1e-13, "z={z}");
            assert_eq!(coth_minus_inv(-z), -coth_minus_inv(z));
        }
        assert_eq!(coth_minus_inv(0.0), 0.0);
    }

    #[test]
    fn coth_diff_large_and_small() {
        let d = coth_diff(0.7, 1.3);
        assert!(rel(d, 1.0 / 0.7f64.tanh() - 1.0 / 1.3f64.tanh()) < 1e-13);
        // both saturated: ~2e^{-2x}
        let d = coth_diff(25.0, 400.0);
        assert!(rel(d, 2.0 * (-50.0f64).exp()) < 1e-12);
    }

    #[test]
    fn digamma_reference_values() {
        // mpmath Re ψ(1 + iy)
        let cases = [
            (0.0, -0.577_215_664_901_532_9),
            (0.5, -0.328_886_357_229_459_35),
            (1.0, 0.094_650_320_622_476_98),
            (3.0, 1.107_980_710_710_150_9),
            (10.0, 2.303_419_263_671_412_5),
            (1e5, 11.512_925_464_978_562),
        ];
        for (y, want) in cases {
            let got = re_digamma_one_plus_iy(y);
            assert!((got - want).abs() < 2e-15 * want.abs().max(1.0), "y={y}: {got} vs {want}");
        }
    }

    #[test]
    fn velocity_factors_series_vs_direct() {
        for x in [0.05f64, 0.0999, 0.1001, 0.3, 0.6] {
            let direct = x.atanh() / x - 1.0;
            assert!(rel(artanh_ratio_minus_one(x), direct) < 1e-12);
            let sym = (1.0 + x * x) / x * x.atanh() - 1.0;
            assert!(rel(symmetric_velocity_factor(x), sym) < 1e-12);
        }
        // (1/2v) artanh(2v) − 1 − 4v²/3 = O(v⁴) at v = 1e-2
        let v = 1e-2;
        assert!((artanh_ratio_minus_one(2.0 * v) - 4.0 * v * v / 3.0).abs() < 1e-7);
        // v = 0.25: (1/0.5) artanh(0.5) − 1
        assert!(rel(artanh_ratio_minus_one(0.5), 2.0 * 0.549_306_144_334_054_8 - 1.0) < 1e-14);
    }
}
