//! Modified Bessel function of the second kind, order one.
//!
//! `x ≤ 2` uses the ascending series
//!
//! ```text
//! K₁(x) = 1/x + ln(x/2) I₁(x) - (x/4) Σ_k [ψ(k+1) + ψ(k+2)] (x²/4)^k / (k! (k+1)!)
//! ```
//!
//! and `x > 2` uses Steed's continued-fraction method (Thompson & Barnett),
//! which returns `K₀` and `K₁` together. Both branches converge to machine
//! precision.

use super::SpatialError;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const MAX_TERMS: usize = 500;

/// `K₁(x)` for `x > 0`. Underflows to `0.0` for very large `x`.
pub fn bessel_k1(x: f64) -> Result<f64, SpatialError> {
    if !(x > 0.0) {
        return Err(SpatialError::BesselDomain(x));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(if x <= 2.0 { k1_series(x) } else { k1_continued_fraction(x) })
}

/// `x·K₁(x)`, continuous at zero with value one.
pub fn x_bessel_k1(x: f64) -> Result<f64, SpatialError> {
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok(x * bessel_k1(x)?)
}

fn k1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    // term_k = (x²/4)^k / (k! (k+1)!)
    let mut term = 1.0;
    let mut psi_k1 = -EULER_GAMMA; // ψ(k+1)
    let mut psi_k2 = 1.0 - EULER_GAMMA; // ψ(k+2)
    let mut i1_sum = 0.0;
    let mut k_sum = 0.0;
    for k in 0..MAX_TERMS {
        i1_sum += term;
        let inc = (psi_k1 + psi_k2) * term;
        k_sum += inc;
        if term < 1e-18 * i1_sum && inc.abs() < 1e-18 * k_sum.abs() {
            break;
        }
        let kf = k as f64;
        term *= q / ((kf + 1.0) * (kf + 2.0));
        psi_k1 += 1.0 / (kf + 1.0);
        psi_k2 += 1.0 / (kf + 2.0);
    }
    let i1 = 0.5 * x * i1_sum;
    1.0 / x + (0.5 * x).ln() * i1 - 0.25 * x * k_sum
}

fn k1_continued_fraction(x: f64) -> f64 {
    // Order mu = 0: the recurrence yields K_0 and K_1.
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..MAX_TERMS {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    h *= a1;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    k0 * (x + 0.5 - h) / x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive() {
        assert!(bessel_k1(0.0).is_err());
        assert!(bessel_k1(-1.0).is_err());
        assert!(bessel_k1(f64::NAN).is_err());
    }

    #[test]
    fn small_argument_limit() {
        for x in [1e-3, 1e-6, 1e-9] {
            assert!((x_bessel_k1(x).unwrap() - 1.0).abs() < 1e-4);
        }
        assert_eq!(x_bessel_k1(0.0).unwrap(), 1.0);
    }

    #[test]
    fn branches_agree_at_switch() {
        let lo = k1_series(2.0);
        let hi = k1_continued_fraction(2.0);
        assert!(((lo - hi) / lo).abs() < 1e-14, "{lo} vs {hi}");
    }

    #[test]
    fn underflows_gracefully() {
        assert_eq!(bessel_k1(1000.0).unwrap(), 0.0);
        assert!(bessel_k1(700.0).unwrap() >= 0.0);
    }

    #[test]
    fn strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 1..400 {
            let v = bessel_k1(i as f64 * 0.05).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }
}
