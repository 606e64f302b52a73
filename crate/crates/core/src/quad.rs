//! One-dimensional quadrature: Gauss–Legendre panels, geometrically graded
//! (dyadic-shell) composite rules for endpoint singularities, and an
//! adaptive Gauss–Kronrod integrator.

use std::f64::consts::PI;

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Apply the rule on `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Integrate over `[a, b]` where the integrand may be singular at `a`
    /// (an integrable power or logarithmic singularity). The interval is cut
    /// into dyadic shells `[a + L 2^{-k-1}, a + L 2^{-k}]`, one Gauss panel per
    /// shell; the innermost remainder of width `L 2^{-shells}` gets a single
    /// panel as well.
    ///
    /// The integrand is evaluated as `f(a + s)` through `g(s)` so callers can
    /// keep full relative precision in the distance `s` to the singular point.
    pub fn graded_from_left<G: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        shells: usize,
        mut g: G,
    ) -> f64 {
        let len = b - a;
        let mut total = 0.0;
        let mut hi = len;
        for _ in 0..shells {
            let lo = 0.5 * hi;
            total += self.integrate(lo, hi, &mut g);
            hi = lo;
        }
        total + self.integrate(0.0, hi, &mut g)
    }

    /// Both endpoints singular: split at the midpoint and grade towards each
    /// end. `f` receives the pair of distances `(x − a, b − x)`, each exact
    /// near its own endpoint.
    pub fn graded_both<F: FnMut(f64, f64) -> f64>(&self, a: f64, b: f64, shells: usize, mut f: F) -> f64 {
        let len = b - a;
        let half = 0.5 * len;
        self.graded_from_left(0.0, half, shells, |s| f(s, len - s))
            + self.graded_from_left(0.0, half, shells, |s| f(len - s, s))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive 15-point Gauss–Kronrod quadrature by recursive bisection.
///
/// Stops when the Kronrod–Gauss difference falls under
/// `max(abs_tol, rel_tol·|I|)` on every panel or `max_depth` bisections
/// are reached. Returns `(integral, error_estimate)`.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: usize,
) -> (f64, f64) {
    let (whole, err) = gk15(&mut f, a, b);
    let tol = abs_tol.max(rel_tol * whole.abs());
    recurse(&mut f, a, b, whole, err, tol, max_depth)
}

fn recurse<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    err: f64,
    tol: f64,
    depth: usize,
) -> (f64, f64) {
    if err <= tol || depth == 0 || (b - a).abs() < 1e-14 * (a.abs() + b.abs()) {
        return (whole, err);
    }
    let m = 0.5 * (a + b);
    let (l, el) = gk15(f, a, m);
    let (r, er) = gk15(f, m, b);
    let (li, le) = recurse(f, a, m, l, el, 0.5 * tol, depth - 1);
    let (ri, re) = recurse(f, m, b, r, er, 0.5 * tol, depth - 1);
    (li + ri, le + re)
}

/// Adaptive quadrature over consecutive breakpoints.
pub fn adaptive_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> f64 {
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| adaptive(&mut f, w[0], w[1], abs_tol, rel_tol, 40).0)
        .sum()
}
