//! Adaptive quadrature: Gauss-Kronrod panels for smooth integrands and
//! Filon-Legendre panels for integrands carrying a fast linear phase.

use crate::arith::ComplexSum;
use num_complex::Complex64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

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

/// Tolerances and the hard panel cap of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-14, max_panels: 20_000 }
    }
}

/// Result of an adaptive integration. `converged` is false when the panel cap was hit.
#[derive(Clone, Copy, Debug)]
pub struct QuadOut {
    pub value: Complex64,
    pub error: f64,
    pub panels: usize,
    pub converged: bool,
}

impl QuadOut {
    pub fn zero() -> Self {
        Self { value: Complex64::new(0.0, 0.0), error: 0.0, panels: 0, converged: true }
    }

    /// Combine two independent pieces.
    pub fn plus(self, other: QuadOut) -> QuadOut {
        QuadOut {
            value: self.value + other.value,
            error: self.error + other.error,
            panels: self.panels + other.panels,
            converged: self.converged && other.converged,
        }
    }

    pub fn scale(self, c: Complex64) -> QuadOut {
        QuadOut { value: self.value * c, error: self.error * c.norm(), ..self }
    }
}

/// 15-point Kronrod rule with embedded 7-point Gauss estimate.
pub fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).norm())
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error).then(o.a.total_cmp(&self.a))
    }
}

/// Globally adaptive bisection driven by any panel rule returning `(value, error)`.
/// `breaks` must be increasing; each consecutive pair seeds one panel.
pub fn adaptive<R: Fn(f64, f64) -> (Complex64, f64)>(rule: R, breaks: &[f64], opts: QuadOptions) -> QuadOut {
    let mut heap = BinaryHeap::new();
    let mut done: Vec<Panel> = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, error) = rule(w[0], w[1]);
            heap.push(Panel { a: w[0], b: w[1], value, error });
        }
    }
    let total = |heap: &BinaryHeap<Panel>, done: &[Panel]| {
        let mut s = ComplexSum::default();
        let mut e = 0.0;
        for p in heap.iter().chain(done.iter()) {
            s.add(p.value);
            e += p.error;
        }
        (s.value(), e)
    };
    let mut count = heap.len();
    let mut converged = true;
    loop {
        let (value, error) = total(&heap, &done);
        if error <= opts.abs_tol.max(opts.rel_tol * value.norm()) {
            break;
        }
        if count >= opts.max_panels {
            converged = false;
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) < 1e-15 * worst.a.abs().max(worst.b.abs()) {
            done.push(worst);
            continue;
        }
        let (v1, e1) = rule(worst.a, mid);
        let (v2, e2) = rule(mid, worst.b);
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        count += 1;
    }
    // Sum in positional order so the result does not depend on heap layout.
    let mut all: Vec<Panel> = heap.into_vec();
    all.extend(done);
    all.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut s = ComplexSum::default();
    let mut e = 0.0;
    for p in &all {
        s.add(p.value);
        e += p.error;
    }
    if e > opts.abs_tol.max(opts.rel_tol * s.value().norm()) {
        converged = false;
    }
    QuadOut { value: s.value(), error: e, panels: all.len(), converged }
}

/// Adaptive Gauss-Kronrod over `breaks`.
pub fn integrate<F: Fn(f64) -> Complex64>(f: F, breaks: &[f64], opts: QuadOptions) -> QuadOut {
    adaptive(|a, b| gk15(&f, a, b), breaks, opts)
}

/// Real-valued convenience wrapper.
pub fn integrate_real<F: Fn(f64) -> f64>(f: F, breaks: &[f64], opts: QuadOptions) -> QuadOut {
    integrate(|x| Complex64::new(f(x), 0.0), breaks, opts)
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// Number of interpolation nodes per Filon panel.
pub const FILON_NODES: usize = 20;

struct FilonTable {
    t: Vec<f64>,
    w: Vec<f64>,
    /// `p[k][i] = (2k+1)/2 * w_i * P_k(t_i)`: maps samples to Legendre coefficients.
    proj: Vec<Vec<f64>>,
}

fn filon_table() -> &'static FilonTable {
    static T: OnceLock<FilonTable> = OnceLock::new();
    T.get_or_init(|| {
        let n = FILON_NODES;
        let (t, w) = gauss_legendre(n);
        let mut proj = vec![vec![0.0; n]; n];
        for i in 0..n {
            let (mut p0, mut p1) = (1.0, t[i]);
            for (k, row) in proj.iter_mut().enumerate() {
                let pk = match k {
                    0 => 1.0,
                    1 => t[i],
                    _ => {
                        let p2 = ((2 * k - 1) as f64 * t[i] * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                        p2
                    }
                };
                row[i] = (2 * k + 1) as f64 / 2.0 * w[i] * pk;
            }
        }
        FilonTable { t, w, proj }
    })
}

/// Spherical Bessel functions `j_0..j_{n-1}` at `x > 0`.
pub fn spherical_bessel(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    if x > n as f64 + 1.0 {
        out[0] = j0;
        if n > 1 {
            out[1] = j1;
        }
        for k in 1..n.saturating_sub(1) {
            out[k + 1] = (2 * k + 1) as f64 / x * out[k] - out[k - 1];
        }
        return out;
    }
    // Miller's downward recurrence, normalised against j0 or j1.
    let start = n + 30 + x as usize;
    let (mut above, mut cur) = (0.0f64, 1e-280f64);
    for k in (1..=start).rev() {
        let below = (2 * k + 1) as f64 / x * cur - above;
        above = cur;
        cur = below;
        if k - 1 < n {
            out[k - 1] = cur;
        }
        if k < n {
            out[k] = above;
        }
        if cur.abs() > 1e200 {
            cur *= 1e-200;
            above *= 1e-200;
            for v in out.iter_mut() {
                *v *= 1e-200;
            }
        }
    }
    let scale = if j0.abs() >= j1.abs() || n < 2 { j0 / out[0] } else { j1 / out[1] };
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// One Filon-Legendre panel: `∫_a^b g(y) e^{-i ω y} dy` with `g` interpolated at
/// Gauss-Legendre nodes and the oscillatory factor integrated exactly.
pub fn filon_panel<G: Fn(f64) -> Complex64>(g: &G, a: f64, b: f64, omega: f64) -> (Complex64, f64) {
    let tab = filon_table();
    let n = FILON_NODES;
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let big_omega = omega * h;
    let direct = big_omega.abs() <= 2.0;
    let samples: Vec<Complex64> = tab
        .t
        .iter()
        .map(|&t| {
            let y = c + h * t;
            let v = g(y);
            if direct {
                v * Complex64::from_polar(1.0, -omega * y)
            } else {
                v
            }
        })
        .collect();
    let coef: Vec<Complex64> = tab
        .proj
        .iter()
        .map(|row| row.iter().zip(&samples).map(|(p, s)| s * *p).sum())
        .collect();
    let tail = coef[n - 1].norm() + coef[n - 2].norm();
    let err = 2.0 * h.abs() * tail;
    if direct {
        let v: Complex64 = tab.w.iter().zip(&samples).map(|(w, s)| s * *w).sum();
        return (v * h, err);
    }
    let js = spherical_bessel(n, big_omega.abs());
    // ∫_{-1}^{1} P_k(t) e^{-iΩt} dt = 2 (-i sgn Ω)^k j_k(|Ω|)
    let rot = Complex64::new(0.0, -big_omega.signum());
    let mut pw = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..n {
        acc += coef[k] * pw * (2.0 * js[k]);
        pw *= rot;
    }
    (acc * h * Complex64::from_polar(1.0, -omega * c), err)
}

/// Adaptive Filon integration of `∫ g(y) e^{-iωy} dy` over `breaks`.
pub fn filon<G: Fn(f64) -> Complex64>(g: G, omega: f64, breaks: &[f64], opts: QuadOptions) -> QuadOut {
    adaptive(|a, b| filon_panel(&g, a, b, omega), breaks, opts)
}

/// Geometric breakpoints `lo, lo*r, lo*r^2, ..., hi` (requires `0 < lo < hi`).
pub fn geometric_breaks(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
    let mut v = vec![lo];
    let mut x = lo * ratio;
    while x < hi {
        v.push(x);
        x *= ratio;
    }
    v.push(hi);
    v
}
