//! Closed-form constants: Gamma and digamma, the form constant of the
//! fractional Laplacian, the Riesz normalisation, the coupling map
//! `F(β) = 2^α Γ((α+β)/2) Γ((d−β)/2) / (Γ(β/2) Γ((d−α−β)/2))`, its inverse
//! on `[0, β_c]`, and the sharp Hardy constant `c* = F(β_c)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Γ(x) for real `x > 0` (Lanczos, g = 7, with reflection below 1/2).
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!("gamma_fn requires finite x > 0, got {x}")));
    }
    Ok(gamma_pos(x))
}

fn gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_pos(1.0 - x));
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * (acc.ln() + (z + 0.5) * t.ln() - t).exp()
}

/// Digamma Φ(x) = Γ'(x)/Γ(x) for `x > 0`: upward recurrence to `x ≥ 10`,
/// then the asymptotic Bernoulli series.
pub fn digamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!("digamma_fn requires finite x > 0, got {x}")));
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // B_2k / (2k) for k = 1..7
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32_760.0 - inv2 / 12.0))))));
    Ok(shift + x.ln() - 0.5 / x - series)
}

/// Model parameters `(d, α, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub alpha: f64,
    pub c: f64,
}

impl ModelParams {
    pub fn new(d: usize, alpha: f64, c: f64) -> Result<Self> {
        validate_dims(d, alpha)?;
        let c_star = hardy_best_constant(d, alpha)?;
        if !c.is_finite() || c < 0.0 || c > c_star * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "coupling c = {c} outside [0, c*] = [0, {c_star}]"
            )));
        }
        Ok(Self { d, alpha, c: c.min(c_star) })
    }

    /// Parameters with `c = fraction · c*`.
    pub fn with_fraction(d: usize, alpha: f64, fraction: f64) -> Result<Self> {
        validate_dims(d, alpha)?;
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::domain(format!("c fraction {fraction} outside [0, 1]")));
        }
        let c_star = hardy_best_constant(d, alpha)?;
        Ok(Self { d, alpha, c: if fraction == 1.0 { c_star } else { fraction * c_star } })
    }

    pub fn c_star(&self) -> f64 {
        hardy_best_constant(self.d, self.alpha).expect("validated at construction")
    }

    pub fn is_critical(&self) -> bool {
        self.c >= self.c_star()
    }

    /// Singularity exponent β(c) of the ground state (0 when c = 0).
    pub fn beta(&self) -> f64 {
        if self.c == 0.0 {
            0.0
        } else {
            beta_of_c(self.d, self.alpha, self.c).expect("validated at construction")
        }
    }
}

/// All `(d, α)`-dependent constants at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConstants {
    pub form_const: f64,
    pub riesz_const_std: f64,
    pub c_star: f64,
    pub beta_c: f64,
}

impl SpectralConstants {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        Ok(Self {
            form_const: form_constant(d, alpha)?,
            riesz_const_std: riesz_constant_std(d, alpha)?,
            c_star: hardy_best_constant(d, alpha)?,
            beta_c: critical_beta(d, alpha)?,
        })
    }
}

pub(crate) fn validate_dims(d: usize, alpha: f64) -> Result<()> {
    if !(1..=3).contains(&d) {
        return Err(Error::domain(format!("dimension d = {d} not in 1..=3")));
    }
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 2.0_f64.min(d as f64) {
        return Err(Error::domain(format!(
            "order α = {alpha} must satisfy 0 < α < min(2, d) = {}",
            2.0_f64.min(d as f64)
        )));
    }
    Ok(())
}

/// β_c = (d − α)/2.
pub fn critical_beta(d: usize, alpha: f64) -> Result<f64> {
    validate_dims(d, alpha)?;
    Ok(0.5 * (d as f64 - alpha))
}

/// The constant 𝒜(d,α) = αΓ((d+α)/2) / (2^{1−α} π^{d/2} Γ(1−α/2)) in front of
/// the hypersingular integral.
pub fn form_constant(d: usize, alpha: f64) -> Result<f64> {
    validate_dims(d, alpha)?;
    let df = d as f64;
    Ok(alpha * gamma_pos(0.5 * (df + alpha))
        / (2f64.powf(1.0 - alpha) * PI.powf(0.5 * df) * gamma_pos(1.0 - 0.5 * alpha)))
}

/// Standard Riesz normalisation Γ((d−α)/2) / (2^α π^{d/2} Γ(α/2)), so that
/// convolution with `riesz_constant_std · |x|^{α−d}` inverts `(−Δ)^{α/2}`.
pub fn riesz_constant_std(d: usize, alpha: f64) -> Result<f64> {
    validate_dims(d, alpha)?;
    let df = d as f64;
    Ok(gamma_pos(0.5 * (df - alpha)) / (2f64.powf(alpha) * PI.powf(0.5 * df) * gamma_pos(0.5 * alpha)))
}

/// Riesz prefactor written with `(2/π)^{d/2}` in place of `π^{-d/2}`, i.e.
/// `2^{d/2}` times the standard one. Only used to audit the convention.
pub fn riesz_constant_alt(d: usize, alpha: f64) -> Result<f64> {
    let std = riesz_constant_std(d, alpha)?;
    Ok(2f64.powf(0.5 * d as f64) * std)
}

/// The coupling map F(β) on `[0, d−α]`, zero at both endpoints.
pub fn coupling_f(d: usize, alpha: f64, beta: f64) -> Result<f64> {
    validate_dims(d, alpha)?;
    let top = d as f64 - alpha;
    if !beta.is_finite() || beta < 0.0 || beta > top {
        return Err(Error::domain(format!("β = {beta} outside [0, d−α] = [0, {top}]")));
    }
    if beta == 0.0 || beta == top {
        return Ok(0.0);
    }
    let df = d as f64;
    Ok(2f64.powf(alpha) * gamma_pos(0.5 * (alpha + beta)) * gamma_pos(0.5 * (df - beta))
        / (gamma_pos(0.5 * beta) * gamma_pos(0.5 * (df - alpha - beta))))
}

/// Sharp Hardy constant c* = 2^α Γ²((d+α)/4) / Γ²((d−α)/4).
pub fn hardy_best_constant(d: usize, alpha: f64) -> Result<f64> {
    validate_dims(d, alpha)?;
    let df = d as f64;
    let ratio = gamma_pos(0.25 * (df + alpha)) / gamma_pos(0.25 * (df - alpha));
    Ok(2f64.powf(alpha) * ratio * ratio)
}

/// The value `((d−α)/2)²`, which coincides with c* only in the limit α → 2.
pub fn squared_critical_beta(d: usize, alpha: f64) -> Result<f64> {
    critical_beta(d, alpha).map(|b| b * b)
}

/// The unique β ∈ (0, β_c] with F(β) = c, by bisection.
pub fn beta_of_c(d: usize, alpha: f64, c: f64) -> Result<f64> {
    let c_star = hardy_best_constant(d, alpha)?;
    let beta_c = critical_beta(d, alpha)?;
    if !c.is_finite() || c <= 0.0 || c > c_star * (1.0 + 1e-12) {
        return Err(Error::domain(format!("coupling c = {c} outside (0, c*] = (0, {c_star}]")));
    }
    if c >= c_star {
        return Ok(beta_c);
    }
    let (mut lo, mut hi) = (0.0, beta_c);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if coupling_f(d, alpha, mid)? < c {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Locate the stationary point of F on `(0, d−α)` from sign changes of a
/// central difference, then contract it by bisection. More than one sign
/// change is reported as a consistency error.
pub fn critical_point_check(d: usize, alpha: f64) -> Result<f64> {
    validate_dims(d, alpha)?;
    let top = d as f64 - alpha;
    let step = 1e-5 * top;
    let deriv = |b: f64| -> Result<f64> {
        Ok((coupling_f(d, alpha, b + step)? - coupling_f(d, alpha, b - step)?) / (2.0 * step))
    };
    let samples = 2000;
    let lo_edge = 10.0 * step;
    let hi_edge = top - 10.0 * step;
    let mut brackets = Vec::new();
    let mut prev_b = lo_edge;
    let mut prev_d = deriv(prev_b)?;
    for i in 1..=samples {
        let b = lo_edge + (hi_edge - lo_edge) * i as f64 / samples as f64;
        let dv = deriv(b)?;
        if prev_d > 0.0 && dv <= 0.0 || prev_d < 0.0 && dv >= 0.0 {
            brackets.push((prev_b, b));
        }
        prev_b = b;
        prev_d = dv;
    }
    match brackets.as_slice() {
        [] => Err(Error::Consistency("F' has no sign change on (0, d−α)".into())),
        [(a, b)] => {
            let (mut lo, mut hi) = (*a, *b);
            let d_lo = deriv(lo)?;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let dm = deriv(mid)?;
                if dm == 0.0 {
                    return Ok(mid);
                }
                if (dm > 0.0) == (d_lo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 {
                    break;
                }
            }
            Ok(0.5 * (lo + hi))
        }
        many => Err(Error::Consistency(format!(
            "F' changes sign {} times on (0, d−α); expected exactly once",
            many.len()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn gamma_values() {
        assert!(close(gamma_fn(1.0).unwrap(), 1.0, 1e-14));
        assert!(close(gamma_fn(0.5).unwrap(), PI.sqrt(), 1e-14));
        assert!(close(gamma_fn(5.0).unwrap(), 24.0, 1e-14));
        assert!(close(gamma_fn(0.05).unwrap(), 19.470_085_311_255_512, 1e-13));
        // Γ(50) = 49!
        let fact49: f64 = (1..50).map(|k| k as f64).product();
        assert!(close(gamma_fn(50.0).unwrap(), fact49, 1e-13));
    }

    #[test]
    fn gamma_rejects_bad_arguments() {
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-1.5).is_err());
        assert!(gamma_fn(f64::NAN).is_err());
        assert!(digamma_fn(0.0).is_err());
    }

    #[test]
    fn digamma_values() {
        assert!(close(digamma_fn(1.0).unwrap(), -EULER_GAMMA, 1e-13));
        assert!(close(digamma_fn(2.0).unwrap(), 1.0 - EULER_GAMMA, 1e-13));
        assert!(close(digamma_fn(0.5).unwrap(), -1.963_510_026_021_423_5, 1e-13));
    }

    #[test]
    fn form_constant_values() {
        assert!(close(form_constant(2, 1.0).unwrap(), 1.0 / (2.0 * PI), 1e-13));
        assert!(close(form_constant(1, 0.5).unwrap(), 1.0 / (2.0 * (2.0 * PI).sqrt()), 1e-13));
        assert!(close(form_constant(3, 1.0).unwrap(), 1.0 / (PI * PI), 1e-13));
    }

    #[test]
    fn riesz_constant_values() {
        assert!(close(riesz_constant_std(3, 1.0).unwrap(), 1.0 / (2.0 * PI * PI), 1e-13));
        assert!(close(riesz_constant_std(2, 1.0).unwrap(), 1.0 / (2.0 * PI), 1e-13));
        assert!(close(riesz_constant_std(1, 0.5).unwrap(), 1.0 / (2.0 * PI).sqrt(), 1e-13));
        let ratio = riesz_constant_alt(3, 1.0).unwrap() / riesz_constant_std(3, 1.0).unwrap();
        assert!(close(ratio, 2f64.powf(1.5), 1e-13));
    }

    #[test]
    fn coupling_values() {
        assert!(close(coupling_f(3, 1.0, 1.0).unwrap(), 2.0 / PI, 1e-13));
        assert!(close(coupling_f(3, 1.0, 0.5).unwrap(), 0.5, 1e-13));
        assert_eq!(coupling_f(2, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(coupling_f(2, 1.0, 1.0).unwrap(), 0.0);
        assert!(coupling_f(2, 1.0, 1.0 + 1e-9).is_err());
        assert!(coupling_f(2, 1.0, -1e-9).is_err());
    }

    #[test]
    fn hardy_constant_values() {
        assert!(close(hardy_best_constant(3, 1.0).unwrap(), 2.0 / PI, 1e-13));
        assert!(close(hardy_best_constant(2, 1.0).unwrap(), 0.228_473_290_522_231_8, 1e-12));
        assert!(close(hardy_best_constant(1, 0.5).unwrap(), 0.139_999_677_452_482_6, 1e-12));
    }

    #[test]
    fn beta_of_c_inverts() {
        assert!((beta_of_c(3, 1.0, 0.5).unwrap() - 0.5).abs() < 1e-12);
        let cs = hardy_best_constant(2, 1.0).unwrap();
        assert_eq!(beta_of_c(2, 1.0, cs).unwrap(), 0.5);
        assert!(beta_of_c(1, 0.5, 1e-12).unwrap() < 1e-6);
        assert!(beta_of_c(2, 1.0, 0.0).is_err());
        assert!(beta_of_c(2, 1.0, cs * 1.001).is_err());
    }

    #[test]
    fn critical_point_is_beta_c() {
        for (d, a) in [(3, 1.0), (2, 1.0), (1, 0.5), (2, 1.5), (3, 1.5)] {
            let root = critical_point_check(d, a).unwrap();
            assert!((root - 0.5 * (d as f64 - a)).abs() < 1e-8, "d={d} α={a} root={root}");
        }
    }

    #[test]
    fn validation() {
        assert!(validate_dims(1, 1.2).is_err());
        assert!(validate_dims(1, 1.0).is_err());
        assert!(validate_dims(2, 2.0).is_err());
        assert!(validate_dims(4, 1.0).is_err());
        assert!(validate_dims(2, 1.9).is_ok());
        assert!(ModelParams::new(2, 1.0, 0.3).is_err());
        let p = ModelParams::with_fraction(1, 0.5, 1.0).unwrap();
        assert!(p.is_critical());
        assert_eq!(p.beta(), 0.25);
    }
}
