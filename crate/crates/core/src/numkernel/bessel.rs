use std::f64::consts::PI;

use super::NumError;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_CUTOFF: f64 = 2.0;
const EPS: f64 = 1e-16;
const MAX_TERMS: usize = 10_000;

/// Modified Bessel function of the second kind `K_ν(x)` for integer `ν ≥ 0`.
///
/// `K₀` and `K₁` use the power series for `x ≤ 2` and Steed's continued
/// fraction (Temme's normalization) above that. Higher orders follow from
/// the upward recurrence `K_{ν+1} = K_{ν−1} + (2ν/x) K_ν`, which is stable
/// for `K`.
pub fn bessel_k(nu: u32, x: f64) -> Result<f64, NumError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(NumError::DomainError(format!(
            "K_{nu}(x) requires finite x > 0, got {x}"
        )));
    }
    let (k0, k1) = if x <= SERIES_CUTOFF {
        (k0_series(x), k1_series(x))
    } else {
        k01_continued_fraction(x)
    };
    if nu == 0 {
        return Ok(k0);
    }
    let (mut km, mut k) = (k0, k1);
    for j in 1..nu {
        let next = km + 2.0 * j as f64 / x * k;
        km = k;
        k = next;
    }
    Ok(k)
}

/// `K₀(x) = −(ln(x/2) + γ) I₀(x) + Σ_{k≥1} H_k (x²/4)^k / (k!)²`
fn k0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += harmonic * term;
        if term < EPS * i0 {
            break;
        }
    }
    -lg * i0 + tail
}

/// `K₁(x) = 1/x + ln(x/2) I₁(x) − (x/4) Σ_{k≥0} (ψ(k+1) + ψ(k+2)) (x²/4)^k / (k!(k+1)!)`
fn k1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut digamma_sum = 1.0 - 2.0 * EULER_GAMMA;
    let mut i1_sum = 1.0;
    let mut tail = digamma_sum;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        digamma_sum = -2.0 * EULER_GAMMA + 2.0 * harmonic + 1.0 / (kf + 1.0);
        i1_sum += term;
        tail += digamma_sum * term;
        if term < EPS * i1_sum {
            break;
        }
    }
    1.0 / x + (0.5 * x).ln() * 0.5 * x * i1_sum - 0.25 * x * tail
}

/// Steed's continued fraction for `K₀`, `K₁` at moderate and large `x`.
fn k01_continued_fraction(x: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let (mut q1, mut q2) = (0.0, 1.0);
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_TERMS {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn unit_argument_values() {
        assert!(rel(bessel_k(0, 1.0).unwrap(), 0.421_024_438_240_708_3) < 1e-12);
        assert!(rel(bessel_k(1, 1.0).unwrap(), 0.601_907_230_197_234_6) < 1e-12);
        assert!(rel(bessel_k(2, 1.0).unwrap(), 1.624_838_898_635_177_4) < 1e-12);
    }

    #[test]
    fn branches_agree_at_switchover() {
        for nu in 0..3 {
            let lo = bessel_k(nu, 2.0).unwrap();
            let (k0, k1) = k01_continued_fraction(2.0);
            let hi = match nu {
                0 => k0,
                1 => k1,
                _ => k0 + k1,
            };
            assert!(rel(lo, hi) < 1e-13, "nu={nu}: {lo} vs {hi}");
        }
    }

    #[test]
    fn nonpositive_argument_is_rejected() {
        for x in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(bessel_k(0, x), Err(NumError::DomainError(_))));
        }
    }

    #[test]
    fn far_tail_underflows_to_zero() {
        assert_eq!(bessel_k(2, 2000.0).unwrap(), 0.0);
    }
}
