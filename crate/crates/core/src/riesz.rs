//! Riesz potentials of radial power laws by direct quadrature, independent of
//! any discretised operator.
//!
//! In polar coordinates about the origin
//!
//! `∫_{ℝ^d} |x − y|^{α−d} |y|^{−p} dy = ∫_0^∞ s^{d−1−p} Φ(r, s) ds`,
//! `Φ(r, s) = ∫_{S^{d−1}} |x − sθ|^{α−d} dσ(θ)`, `r = |x|`.
//!
//! `Φ` is closed-form for `d = 1, 3` and an angular quadrature for `d = 2`.
//! The `s`-integral is split at `r/2, r, 2r` with dyadic grading towards the
//! singular points `0` and `r`, geometric panels up to `R = 2^{10} r` and the
//! two-term far-field expansion of `Φ` beyond.

use std::f64::consts::PI;

use serde::Serialize;

use crate::quad::GaussLegendre;
use crate::specfun::{coupling_f, riesz_constant_std, validate_dims};
use crate::{Error, Result};

const TAIL_OCTAVES: usize = 10;

/// Surface area of `S^{d−1}`.
fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

struct Radial {
    d: usize,
    alpha: f64,
    gl: GaussLegendre,
}

impl Radial {
    /// `Φ(r, s)` with `t = |r − s|` passed exactly.
    fn phi(&self, r: f64, s: f64, t: f64) -> f64 {
        let a = self.alpha;
        match self.d {
            1 => t.powf(a - 1.0) + (r + s).powf(a - 1.0),
            3 => {
                // 2π (|r−s|^{α−1} − (r+s)^{α−1}) / (rs(1 − α)), continuous at α = 1
                let eps = a - 1.0;
                let l = (t / (r + s)).ln();
                let ratio = if eps == 0.0 { l } else { (eps * l).exp_m1() / eps };
                -2.0 * PI * (r + s).powf(eps) * ratio / (r * s)
            }
            _ => {
                // 2 ∫_0^π ((r−s)² + 4rs sin²(θ/2))^{(α−2)/2} dθ, graded towards θ = 0
                let rs = r * s;
                let scale = t / rs.sqrt();
                let shells = if scale > 0.0 {
                    ((PI / scale).log2().max(0.0).ceil() as usize + 6).min(200)
                } else {
                    200
                };
                let e = 0.5 * (a - 2.0);
                2.0 * self.gl.graded_from_left(0.0, PI, shells, |th| {
                    let sn = (0.5 * th).sin();
                    (t * t + 4.0 * rs * sn * sn).powf(e)
                })
            }
        }
    }

    /// `∫_0^∞ s^{d−1−p} Φ(r, s) ds`.
    fn integral(&self, p: f64, r: f64) -> f64 {
        let d = self.d as f64;
        let q = d - 1.0 - p;
        let a = self.alpha;
        let omega = sphere_area(self.d);

        // [0, r/2]: graded at 0, remainder from Φ(r, 0) = ω r^{α−d}
        let inner_shells = 30;
        let eps = 0.5 * r * 0.5f64.powi(inner_shells as i32);
        let mut total = self.gl.graded_from_left(eps, 0.5 * r, inner_shells - 1, |u| {
            let s = eps + u;
            s.powf(q) * self.phi(r, s, r - s)
        });
        total += omega * r.powf(a - d) * eps.powf(d - p) / (d - p);

        // [r/2, 2r]: graded on both sides of s = r
        let near_shells = ((48.0 / a.min(1.0)).ceil() as usize).min(160);
        total += self.gl.graded_from_left(0.0, 0.5 * r, near_shells, |t| {
            let s = r - t;
            s.powf(q) * self.phi(r, s, t)
        });
        total += self.gl.graded_from_left(0.0, r, near_shells, |t| {
            let s = r + t;
            s.powf(q) * self.phi(r, s, t)
        });

        // [2r, R]: geometric panels
        let mut lo = 2.0 * r;
        for _ in 0..TAIL_OCTAVES {
            let hi = 2.0 * lo;
            total += self.gl.integrate(lo, hi, |s| s.powf(q) * self.phi(r, s, s - r));
            lo = hi;
        }

        // [R, ∞): Φ ≈ ω s^{α−d}(1 + c₂ (r/s)²)
        let big = lo;
        let gamma = a - d;
        let c2 = gamma * (d + gamma - 2.0) / (2.0 * d);
        total += omega
            * (big.powf(a - p) / (p - a) + c2 * r * r * big.powf(a - p - 2.0) / (p - a + 2.0));
        total
    }
}

/// `A_std(d, α) ∫_{ℝ^d} |x − y|^{α−d} |y|^{−p} dy` at `|x| = r`, for `α < p < d`.
pub fn riesz_potential_radial(d: usize, alpha: f64, p: f64, r: f64) -> Result<f64> {
    riesz_potential_radial_with(d, alpha, p, r, 20)
}

/// As [`riesz_potential_radial`] with `order`-point Gauss–Legendre panels.
pub fn riesz_potential_radial_with(d: usize, alpha: f64, p: f64, r: f64, order: usize) -> Result<f64> {
    validate_dims(d, alpha)?;
    if !(p > alpha && p < d as f64) {
        return Err(Error::domain(format!(
            "tail exponent p = {p} outside ({alpha}, {d}); the Riesz potential diverges"
        )));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("radius r = {r} must be positive")));
    }
    let radial = Radial { d, alpha, gl: GaussLegendre::new(order) };
    Ok(riesz_constant_std(d, alpha)? * radial.integral(p, r))
}

/// Quadrature check of `K(|·|^{−α} w) = F(β)^{−1} w` for `w = |x|^{−β}`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialCheck {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub radii: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl RadialCheck {
    pub fn pass(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// Tolerance used by [`verify_harmonic_identity`]: `1e−3`, relaxed to `1e−2`
/// within `0.1` of either end of `(0, d − α)`.
pub fn harmonic_tolerance(d: usize, alpha: f64, beta: f64) -> f64 {
    let top = d as f64 - alpha;
    if beta < 0.1 || beta > top - 0.1 {
        1e-2
    } else {
        1e-3
    }
}

pub fn verify_harmonic_identity(d: usize, alpha: f64, beta: f64, radii: &[f64]) -> Result<RadialCheck> {
    validate_dims(d, alpha)?;
    if !(beta > 0.0 && beta < d as f64 - alpha) {
        return Err(Error::domain(format!("β = {beta} outside (0, {})", d as f64 - alpha)));
    }
    if radii.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let f = coupling_f(d, alpha, beta)?;
    let lhs = radii
        .iter()
        .map(|&r| riesz_potential_radial(d, alpha, alpha + beta, r))
        .collect::<Result<Vec<_>>>()?;
    let rhs: Vec<f64> = radii.iter().map(|&r| r.powf(-beta) / f).collect();
    let max_rel_error = lhs.iter().zip(&rhs).map(|(l, r)| (l / r - 1.0).abs()).fold(0.0, f64::max);
    Ok(RadialCheck {
        d,
        alpha,
        beta,
        radii: radii.to_vec(),
        lhs,
        rhs,
        max_rel_error,
        tolerance: harmonic_tolerance(d, alpha, beta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use crate::specfun::hardy_best_constant;

    #[test]
    fn classical_value() {
        let v = riesz_potential_radial(3, 1.0, 2.0, 1.0).unwrap();
        assert!((v - PI / 2.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn homogeneity() {
        for (d, a, p) in [(1, 0.5, 0.8), (2, 1.0, 1.5), (3, 1.5, 2.0)] {
            let v1 = riesz_potential_radial(d, a, p, 1.0).unwrap();
            for r in [0.5, 2.0] {
                let v = riesz_potential_radial(d, a, p, r).unwrap();
                assert!((v / (r.powf(a - p) * v1) - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn critical_disk_value() {
        let v = riesz_potential_radial(2, 1.0, 1.5, 1.0).unwrap();
        let target = 1.0 / hardy_best_constant(2, 1.0).unwrap();
        assert!((v / target - 1.0).abs() < 1e-6, "{v} {target}");
    }

    #[test]
    fn disk_angular_integral_against_elliptic_k() {
        // α = 1: Φ(r, s) = 4K(k)/max(r, s), k = min/max
        fn ellip_k(k: f64) -> f64 {
            let (mut a, mut b) = (1.0f64, (1.0 - k * k).sqrt());
            for _ in 0..12 {
                let an = 0.5 * (a + b);
                b = (a * b).sqrt();
                a = an;
            }
            PI / (2.0 * a)
        }
        let rad = Radial { d: 2, alpha: 1.0, gl: GaussLegendre::new(20) };
        for (r, s) in [(1.0, 0.3), (1.0, 0.9), (1.0, 0.999), (0.7, 2.5)] {
            let got = rad.phi(r, s, (r - s).abs());
            let (lo, hi) = if r < s { (r, s) } else { (s, r) };
            let want = 4.0 * ellip_k(lo / hi) / hi;
            assert!((got / want - 1.0).abs() < 1e-10, "{r} {s}: {got} {want}");
        }
    }

    #[test]
    fn three_dim_angular_average_matches_quadrature() {
        let rad = Radial { d: 3, alpha: 1.4, gl: GaussLegendre::new(20) };
        let (r, s) = (1.0, 0.6);
        let direct = 2.0
            * PI
            * quad::adaptive(
                |t: f64| (r * r + s * s - 2.0 * r * s * t).powf(0.5 * (1.4 - 3.0)),
                -1.0,
                1.0,
                0.0,
                1e-13,
                40,
            )
            .0;
        assert!((rad.phi(r, s, r - s) / direct - 1.0).abs() < 1e-11);
        let rad1 = Radial { d: 3, alpha: 1.0, gl: GaussLegendre::new(20) };
        let log_form = 2.0 * PI * ((r + s) / (r - s)).ln() / (r * s);
        assert!((rad1.phi(r, s, r - s) / log_form - 1.0).abs() < 1e-14);
    }

    #[test]
    fn harmonic_identity_cases() {
        for (d, a, b) in [(3, 1.0, 1.0), (3, 1.0, 0.5), (2, 1.0, 0.5), (1, 0.5, 0.25)] {
            let c = verify_harmonic_identity(d, a, b, &[0.5, 1.0, 2.0]).unwrap();
            assert!(c.pass(), "{d} {a} {b}: {}", c.max_rel_error);
        }
    }

    #[test]
    fn harmonic_identity_near_endpoints() {
        for (d, a) in [(3, 1.0), (1, 0.5)] {
            for b in [0.05, d as f64 - a - 0.05] {
                let c = verify_harmonic_identity(d, a, b, &[1.0]).unwrap();
                assert!(c.max_rel_error <= 1e-2, "{d} {a} {b}: {}", c.max_rel_error);
            }
        }
    }

    #[test]
    fn divergent_exponents_rejected() {
        assert!(riesz_potential_radial(3, 1.0, 1.0, 1.0).is_err());
        assert!(riesz_potential_radial(3, 1.0, 3.0, 1.0).is_err());
        assert!(verify_harmonic_identity(3, 1.0, 2.0, &[1.0]).is_err());
    }
}
