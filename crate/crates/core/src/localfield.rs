//! Local fields ℝ, ℂ and ℚ_p: absolute values, additive characters, Haar
//! measures, Tate zeta integrals and Fourier transforms of test functions.
//!
//! Haar measures are self-dual for the characters below: `dx` on ℝ, twice
//! Lebesgue measure on ℂ, and `vol(ℤ_p) = 1` on ℚ_p. Multiplicative measures
//! are `dx/|x|` at infinite places and `(1 - 1/p)^{-1} dx/|x|` at `p`.

use crate::arith::{inv_mod, is_prime, ComplexSum};
use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Exact rationals used for p-adic elements and rational points.
pub type Rational = num_rational::Ratio<i128>;

/// A place of ℚ, or the complex place used by the oscillatory module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Place {
    Real,
    Complex,
    Finite(u64),
}

impl Place {
    /// The place at `p`, checking primality.
    pub fn finite(p: u64) -> Result<Place> {
        if is_prime(p) {
            Ok(Place::Finite(p))
        } else {
            Err(Error::Invalid(format!("{p} is not prime")))
        }
    }

    pub fn is_archimedean(self) -> bool {
        !matches!(self, Place::Finite(_))
    }

    pub fn prime(self) -> Option<u64> {
        match self {
            Place::Finite(p) => Some(p),
            _ => None,
        }
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Place::Real => f.write_str("inf"),
            Place::Complex => f.write_str("complex"),
            Place::Finite(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for Place {
    type Err = Error;
    fn from_str(s: &str) -> Result<Place> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "real" | "r" | "∞" => Ok(Place::Real),
            "complex" | "c" => Ok(Place::Complex),
            other => {
                let p: u64 = other.parse().map_err(|_| Error::Invalid(format!("unknown place '{s}'")))?;
                Place::finite(p)
            }
        }
    }
}

impl TryFrom<String> for Place {
    type Error = Error;
    fn try_from(s: String) -> Result<Place> {
        s.parse()
    }
}

impl From<Place> for String {
    fn from(p: Place) -> String {
        p.to_string()
    }
}

/// Exact arithmetic in ℚ ⊂ ℚ_p for a fixed prime.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PadicContext {
    p: u64,
}

impl PadicContext {
    pub fn new(p: u64) -> Result<Self> {
        Place::finite(p).map(|_| Self { p })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// `v_p(x)`, or `None` for `x = 0`.
    pub fn valuation(&self, x: &Rational) -> Option<i64> {
        if x.is_zero() {
            return None;
        }
        let p = self.p as i128;
        let count = |mut n: i128| {
            let mut v = 0i64;
            while n % p == 0 {
                n /= p;
                v += 1;
            }
            v
        };
        Some(count(*x.numer()) - count(*x.denom()))
    }

    /// `|x|_p = p^{-v_p(x)}` as an exact rational.
    pub fn abs(&self, x: &Rational) -> Rational {
        match self.valuation(x) {
            None => Rational::zero(),
            Some(v) => {
                let pv = Rational::from_integer(self.p as i128).pow(v.unsigned_abs() as i32);
                if v >= 0 {
                    pv.recip()
                } else {
                    pv
                }
            }
        }
    }

    /// The p-power-denominator fractional part of `x`, an exact rational in [0, 1).
    pub fn frac(&self, x: &Rational) -> Rational {
        let (n, d) = (*x.numer(), *x.denom());
        let p = self.p as i128;
        let mut pe = 1i128;
        let mut w = d;
        while w % p == 0 {
            w /= p;
            pe *= p;
        }
        if pe == 1 {
            return Rational::zero();
        }
        let winv = inv_mod(w, pe).expect("cofactor is prime to p");
        let t = (n.rem_euclid(pe) * winv).rem_euclid(pe);
        Rational::new(t, pe)
    }

    /// Residue of `x ∈ ℤ_(p)` modulo `p^e`.
    pub fn residue(&self, x: &Rational, e: u32) -> Result<u64> {
        let m = (self.p as i128)
            .checked_pow(e)
            .ok_or(Error::DepthOverflow { needed: e, ceiling: 0 })?;
        let d = *x.denom();
        if d % self.p as i128 == 0 {
            return Err(Error::Invalid(format!("{x} is not {}-integral", self.p)));
        }
        let dinv = inv_mod(d, m).expect("denominator prime to p");
        Ok(((x.numer().rem_euclid(m)) * dinv).rem_euclid(m) as u64)
    }
}

/// `|x|_v` for a rational `x`. At the complex place this is the square of the modulus.
pub fn abs_value(x: &Rational, place: Place) -> f64 {
    let r = rat_to_f64(x).abs();
    match place {
        Place::Real => r,
        Place::Complex => r * r,
        Place::Finite(p) => {
            let a = PadicContext { p }.abs(x);
            rat_to_f64(&a)
        }
    }
}

/// `|z|_ℂ = z z̄`.
pub fn abs_complex(z: Complex64) -> f64 {
    z.norm_sqr()
}

pub fn rat_to_f64(x: &Rational) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// `e^{2πi t}`.
pub fn cis_turns(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * t)
}

/// `e^{2πi r/m}` for integers, reducing first so the angle is exact up to rounding.
pub fn root_of_unity(r: i128, m: i128) -> Complex64 {
    let r = r.rem_euclid(m);
    cis_turns(r as f64 / m as f64)
}

/// Additive character `ψ_v` on a rational argument.
pub fn psi(place: Place, x: &Rational) -> Complex64 {
    match place {
        Place::Finite(p) => {
            let f = PadicContext { p }.frac(x);
            root_of_unity(*f.numer(), *f.denom())
        }
        Place::Real => psi_real(rat_to_f64(x)),
        Place::Complex => psi_complex(Complex64::new(rat_to_f64(x), 0.0)),
    }
}

/// `ψ_ℝ(x) = e^{-2πix}`; the integer part is removed before scaling.
pub fn psi_real(x: f64) -> Complex64 {
    cis_turns(-(x - x.round()))
}

/// `ψ_ℂ(z) = e^{-2πi·2Re z}`.
pub fn psi_complex(z: Complex64) -> Complex64 {
    psi_real(2.0 * z.re)
}

/// Sets whose Haar volume can be queried.
#[derive(Clone, Debug, PartialEq)]
pub enum HaarSet {
    /// `{x : |x|_v ≤ r}`.
    Ball(f64),
    /// `ξ + p^n ℤ_p`.
    Coset { center: Rational, depth: i64 },
}

pub fn haar_volume(place: Place, set: &HaarSet) -> Result<f64> {
    match (place, set) {
        (Place::Real, HaarSet::Ball(r)) => Ok(2.0 * r),
        (Place::Complex, HaarSet::Ball(r)) => Ok(2.0 * PI * r),
        (Place::Finite(p), HaarSet::Ball(r)) => {
            if *r == 0.0 {
                return Ok(0.0);
            }
            let k = r.ln() / (p as f64).ln();
            if (k - k.round()).abs() > 1e-9 {
                return Err(Error::Invalid(format!("radius {r} is not a power of {p}")));
            }
            Ok(*r)
        }
        (Place::Finite(p), HaarSet::Coset { depth, .. }) => Ok((p as f64).powi(-(*depth as i32))),
        (_, HaarSet::Coset { .. }) => Err(Error::Invalid("cosets of p^n ℤ_p need a finite place".into())),
    }
}

/// `ζ_v(s) = ∫_{|x|≤1} |x|^s d^×x`: `2/s`, `2π/s`, `1/(1-p^{-s})`.
pub fn zeta_local(place: Place, s: Complex64) -> Result<Complex64> {
    match place {
        Place::Real | Place::Complex => {
            if s == Complex64::new(0.0, 0.0) {
                return Err(Error::Pole(format!("s = 0 at {place}")));
            }
            let c = if place == Place::Real { 2.0 } else { 2.0 * PI };
            if s.im == 0.0 {
                return Ok(Complex64::new(c / s.re, 0.0));
            }
            Ok(Complex64::new(c, 0.0) / s)
        }
        Place::Finite(p) => {
            let lp = (p as f64).ln();
            if s.re == 0.0 {
                let k = s.im * lp / (2.0 * PI);
                if (k - k.round()).abs() < 1e-12 {
                    return Err(Error::Pole(format!("s = {s} at {p}")));
                }
            }
            // integer s: p^k/(p^k - 1) with a single rounding
            if s.im == 0.0 && s.re.fract() == 0.0 && s.re != 0.0 {
                if let Some(pk) = crate::arith::checked_pow(p, s.re.abs() as u32).filter(|&v| v < 1 << 53) {
                    let pk = pk as f64;
                    let v = if s.re > 0.0 { pk / (pk - 1.0) } else { 1.0 / (1.0 - pk) };
                    return Ok(Complex64::new(v, 0.0));
                }
            }
            Ok(Complex64::new(1.0, 0.0) / (1.0 - (-s * lp).exp()))
        }
    }
}

/// `c_v = lim_{s→0} s ζ_v(s)`.
pub fn residue_c(place: Place) -> f64 {
    match place {
        Place::Real => 2.0,
        Place::Complex => 2.0 * PI,
        Place::Finite(p) => 1.0 / (p as f64).ln(),
    }
}

/// A locally constant compactly supported function on ℚ_p.
///
/// The support lies in `p^{-k} ℤ_p` and the function is constant on cosets of
/// `p^m ℤ_p`. Entry `r` of the table is the value on `r p^{-k} + p^m ℤ_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    p: u64,
    level: u32,
    support: i32,
    values: Vec<Complex64>,
}

/// Largest table a step function may carry.
const MAX_TABLE: u64 = 1 << 24;

impl StepFunction {
    /// Build from a closure on table indices.
    pub fn from_fn<F: Fn(u64) -> Complex64>(p: u64, level: u32, support: i32, f: F) -> Result<Self> {
        PadicContext::new(p)?;
        let e = level as i64 + support as i64;
        if e < 0 {
            return Err(Error::Invalid("level + support must be nonnegative".into()));
        }
        let n = (p as u128).pow(e as u32);
        if n > MAX_TABLE as u128 {
            return Err(Error::DepthOverflow { needed: e as u32, ceiling: (MAX_TABLE as f64).log(p as f64) as u32 });
        }
        Ok(Self { p, level, support, values: (0..n as u64).map(f).collect() })
    }

    /// Indicator of `ξ + p^n ℤ_p`.
    pub fn indicator(p: u64, center: &Rational, n: i32) -> Result<Self> {
        let ctx = PadicContext::new(p)?;
        let vc = ctx.valuation(center).unwrap_or(i64::MAX);
        let support = if vc >= n as i64 { -n } else { (-n).max(-(vc as i32)) };
        let level = n.max(0) as u32;
        let mut f = Self::from_fn(p, level, support, |_| Complex64::new(0.0, 0.0))?;
        for r in 0..f.values.len() as u64 {
            let x = f.class_rep(r);
            let inside = match ctx.valuation(&(x - center)) {
                None => true,
                Some(v) => v >= n as i64,
            };
            if inside {
                f.values[r as usize] = Complex64::new(1.0, 0.0);
            }
        }
        Ok(f)
    }

    /// `1_{ℤ_p}`.
    pub fn unit_ball(p: u64) -> Result<Self> {
        Self::indicator(p, &Rational::zero(), 0).and_then(|f| f.with_level(1))
    }

    /// `1_{ℤ_p^*}`.
    pub fn units(p: u64) -> Result<Self> {
        Self::from_fn(p, 1, 0, |r| Complex64::new(if r == 0 { 0.0 } else { 1.0 }, 0.0))
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn level(&self) -> u32 {
        self.level
    }
    pub fn support(&self) -> i32 {
        self.support
    }
    pub fn table(&self) -> &[Complex64] {
        &self.values
    }

    fn modulus(&self) -> u64 {
        self.values.len() as u64
    }

    /// A rational representative of table class `r`.
    pub fn class_rep(&self, r: u64) -> Rational {
        let pk = Rational::from_integer(self.p as i128).pow(-self.support);
        Rational::from_integer(r as i128) * pk
    }

    /// `Φ(x)`.
    pub fn eval(&self, x: &Rational) -> Complex64 {
        let ctx = PadicContext { p: self.p };
        match ctx.valuation(x) {
            None => self.values[0],
            Some(v) if v < -(self.support as i64) => Complex64::new(0.0, 0.0),
            Some(_) => {
                let y = x * Rational::from_integer(self.p as i128).pow(self.support);
                let e = (self.level as i64 + self.support as i64) as u32;
                let r = ctx.residue(&y, e).expect("integral after scaling");
                self.values[r as usize]
            }
        }
    }

    /// Value on the class of `u p^j` where `u` is an integer taken mod the table modulus.
    /// `j` is measured against the support bound: the class index is `u p^{j+k}`.
    pub fn value_at_scaled(&self, u: u64, j: i64) -> Complex64 {
        let shift = j + self.support as i64;
        if shift < 0 {
            return Complex64::new(0.0, 0.0);
        }
        let m = self.modulus();
        let e = (self.level as i64 + self.support as i64) as u32;
        if shift as u32 >= e {
            return self.values[0];
        }
        let pj = self.p.pow(shift as u32);
        let r = ((u as u128 * pj as u128) % m as u128) as usize;
        self.values[r]
    }

    /// Same function expressed on the finer level `m + 1`.
    pub fn refine(&self) -> Self {
        self.with_level(self.level + 1).expect("refinement fits")
    }

    /// Re-express on any level at least the minimal one.
    pub fn with_level(&self, level: u32) -> Result<Self> {
        if level < self.schwartz_level_raw() {
            return Err(Error::Invalid(format!("function is not constant at level {level}")));
        }
        let old = self.modulus();
        Self::from_fn(self.p, level, self.support, |r| {
            if level >= self.level {
                self.values[(r % old) as usize]
            } else {
                self.values[r as usize]
            }
        })
    }

    /// Re-express with a larger support bound.
    pub fn with_support(&self, support: i32) -> Result<Self> {
        if support < self.support {
            return Err(Error::Invalid("support bound can only grow".into()));
        }
        let shift = self.p.pow((support - self.support) as u32);
        let old = self.modulus();
        Self::from_fn(self.p, self.level, support, |r| {
            if r % shift == 0 && r / shift < old {
                self.values[(r / shift) as usize]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    fn constant_mod(&self, e: u32) -> bool {
        let step = self.p.pow(e);
        let m = self.modulus();
        (0..step.min(m)).all(|r0| {
            let v = self.values[r0 as usize];
            (r0..m).step_by(step as usize).all(|r| self.values[r as usize] == v)
        })
    }

    fn schwartz_level_raw(&self) -> u32 {
        let k = self.support as i64;
        for n in 0..=self.level as i64 {
            if n + k < 0 {
                if self.values.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
                    return n as u32;
                }
                continue;
            }
            if self.constant_mod((n + k) as u32) {
                return n as u32;
            }
        }
        self.level
    }

    /// `n(Φ)`: least positive `n` with `Φ` constant on cosets of `p^n ℤ_p`.
    pub fn schwartz_level(&self) -> u32 {
        self.schwartz_level_raw().max(1)
    }

    /// Minimal support exponent: least `k` with `Φ` vanishing outside `p^{-k} ℤ_p`.
    pub fn minimal_support(&self) -> i32 {
        let mut k = self.support;
        loop {
            if k + self.level as i32 <= 0 {
                return k;
            }
            // classes outside p^{-(k-1)} ℤ_p are those with index not divisible by p^{k - self.support + 1}
            let step = self.p.pow((self.support - k + 1) as u32);
            let outside_zero = (0..self.modulus())
                .filter(|r| r % step != 0)
                .all(|r| self.values[r as usize] == Complex64::new(0.0, 0.0));
            if outside_zero {
                k -= 1;
            } else {
                return k;
            }
        }
    }

    /// Canonical form: minimal level (at least 1) and minimal support.
    pub fn canonical(&self) -> Self {
        let level = self.schwartz_level();
        let k = self.minimal_support().max(-(level as i32));
        let shift = self.p.pow((self.support - k) as u32);
        let src_mod = self.modulus();
        Self::from_fn(self.p, level, k, |r| {
            let idx = (r as u128 * shift as u128 % src_mod as u128) as usize;
            self.values[idx]
        })
        .expect("canonical form is no larger")
    }

    /// `Φ(0)`.
    pub fn at_zero(&self) -> Complex64 {
        self.values[0]
    }

    /// Pointwise scalar multiple.
    pub fn scale(&self, c: Complex64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    /// JSON fixture: `{p, level, support, values: {residue: [re, im]}}` with zero entries omitted.
    pub fn to_fixture(&self) -> StepFixture {
        let values = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
            .map(|(r, v)| (r as u64, [v.re, v.im]))
            .collect();
        StepFixture { p: self.p, level: self.level, support: self.support, values }
    }

    pub fn from_fixture(fx: &StepFixture) -> Result<Self> {
        let f = Self::from_fn(fx.p, fx.level, fx.support, |_| Complex64::new(0.0, 0.0))?;
        let mut f = f;
        for (&r, v) in &fx.values {
            let slot = f
                .values
                .get_mut(r as usize)
                .ok_or_else(|| Error::Invalid(format!("residue {r} out of range")))?;
            *slot = Complex64::new(v[0], v[1]);
        }
        Ok(f)
    }
}

/// Serialized form of a [`StepFunction`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFixture {
    pub p: u64,
    pub level: u32,
    pub support: i32,
    pub values: BTreeMap<u64, [f64; 2]>,
}

/// A smooth bump `A·exp(1 - 1/(1 - t²))`, `t = (x - c)/r`, supported on `[c - r, c + r]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub center: f64,
    pub radius: f64,
    pub amplitude: f64,
}

impl BumpFunction {
    pub fn new(center: f64, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0) || !center.is_finite() || !amplitude.is_finite() {
            return Err(Error::Invalid("bump needs a positive radius".into()));
        }
        Ok(Self { center, radius, amplitude })
    }

    /// The standard bump on [-1, 1] with value 1 at the origin.
    pub fn standard() -> Self {
        Self { center: 0.0, radius: 1.0, amplitude: 1.0 }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.radius;
        if t.abs() >= 1.0 {
            return 0.0;
        }
        self.amplitude * (1.0 - 1.0 / (1.0 - t * t)).exp()
    }

    /// `Φ^{(k)}(x)`, using `d^k/dt^k e^{h} = P_k(t) (1-t²)^{-2k} e^{h}` with
    /// `P_{k+1} = P_k' Q² + 4k t Q P_k - 2t P_k`, `Q = 1 - t²`.
    pub fn derivative(&self, k: usize, x: f64) -> f64 {
        let t = (x - self.center) / self.radius;
        if t.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - t * t;
        let pk = bump_poly(k);
        let pv = pk.iter().rev().fold(0.0, |acc, c| acc * t + c);
        self.amplitude * (1.0 - 1.0 / q).exp() * pv / q.powi(2 * k as i32) / self.radius.powi(k as i32)
    }

    /// `‖Φ‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        self.amplitude.abs()
    }

    /// Upper bound for `‖Φ^{(k)}‖_∞`: grid maximum plus a Lipschitz margin from the next derivative.
    pub fn derivative_bound(&self, k: usize) -> f64 {
        let n = 4000;
        let (lo, hi) = self.support();
        let h = (hi - lo) / n as f64;
        let mut m = 0.0f64;
        let mut m_next = 0.0f64;
        for i in 0..=n {
            let x = lo + h * i as f64;
            m = m.max(self.derivative(k, x).abs());
            m_next = m_next.max(self.derivative(k + 1, x).abs());
        }
        (m + h * m_next) * 1.01
    }

    /// Fourier transform `∫ Φ(x) e^{-2πiax} dx` by Filon quadrature.
    pub fn fourier(&self, a: f64) -> Complex64 {
        let (lo, hi) = self.support();
        let breaks: Vec<f64> = (0..=16).map(|i| lo + (hi - lo) * i as f64 / 16.0).collect();
        let out = quad::filon(|x| Complex64::new(self.eval(x), 0.0), 2.0 * PI * a, &breaks, tight());
        out.value
    }
}

fn bump_poly(k: usize) -> Vec<f64> {
    // coefficients in t, lowest first
    let mut p = vec![1.0];
    for j in 0..k {
        let deriv: Vec<f64> = p.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect();
        let q2 = [1.0, 0.0, -2.0, 0.0, 1.0];
        let mut next = vec![0.0; p.len() + 4];
        for (i, c) in deriv.iter().enumerate() {
            for (l, d) in q2.iter().enumerate() {
                next[i + l] += c * d;
            }
        }
        // 4j t (1 - t²) P - 2t P
        for (i, c) in p.iter().enumerate() {
            next[i + 1] += 4.0 * j as f64 * c - 2.0 * c;
            next[i + 3] -= 4.0 * j as f64 * c;
        }
        while next.len() > 1 && *next.last().unwrap() == 0.0 {
            next.pop();
        }
        p = next;
    }
    p
}

fn tight() -> QuadOptions {
    QuadOptions { rel_tol: 1e-12, abs_tol: 1e-16, max_panels: 20_000 }
}

/// Test functions of the two kinds. At the complex place a bump is used radially, `Φ(z) = φ(|z|)`.
#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    Step(StepFunction),
    Bump(BumpFunction),
}

impl TestFunction {
    pub fn check_place(&self, place: Place) -> Result<()> {
        match (self, place) {
            (TestFunction::Step(f), Place::Finite(p)) if f.p() == p => Ok(()),
            (TestFunction::Bump(_), Place::Real | Place::Complex) => Ok(()),
            _ => Err(Error::Invalid(format!("test function does not live on {place}"))),
        }
    }

    /// `Φ(0)`.
    pub fn at_zero(&self) -> Complex64 {
        match self {
            TestFunction::Step(f) => f.at_zero(),
            TestFunction::Bump(b) => Complex64::new(b.eval(0.0), 0.0),
        }
    }
}

/// `∫_0^R x^{σ-1} g(x) dx` for `Re σ > 0`, with `x = R u^m` to tame the origin.
pub(crate) fn power_weighted<G: Fn(f64) -> Complex64>(sigma: Complex64, g: G, r: f64, opts: QuadOptions) -> quad::QuadOut {
    let m = if sigma.re >= 2.0 { 1.0 } else { (2.0 / sigma.re).ceil() };
    let rs = Complex64::new(r, 0.0).powc(sigma);
    let f = |u: f64| {
        if u <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let w = (Complex64::new(m, 0.0) * sigma - 1.0) * u.ln();
        g(r * u.powf(m)) * w.exp() * m
    };
    let breaks: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
    quad::integrate(f, &breaks, opts).scale(rs)
}

/// `∫_{a}^{b} x^{σ-1} g(x) dx` on an interval of the positive half line.
pub(crate) fn weighted_interval<G: Fn(f64) -> Complex64>(sigma: Complex64, g: &G, a: f64, b: f64, opts: QuadOptions) -> quad::QuadOut {
    if b <= a {
        return quad::QuadOut::zero();
    }
    if a <= 0.0 {
        return power_weighted(sigma, g, b, opts);
    }
    let breaks: Vec<f64> = (0..=8).map(|i| a + (b - a) * i as f64 / 8.0).collect();
    quad::integrate(|x| g(x) * Complex64::new(x, 0.0).powc(sigma - 1.0), &breaks, opts)
}

/// `∫_ℝ |x|^{s-1} Φ(x) dx` for a bump.
pub(crate) fn bump_weighted_integral(b: &BumpFunction, s: Complex64, opts: QuadOptions) -> quad::QuadOut {
    let (lo, hi) = b.support();
    let pos = |x: f64| Complex64::new(b.eval(x), 0.0);
    let neg = |x: f64| Complex64::new(b.eval(-x), 0.0);
    let right = weighted_interval(s, &pos, lo.max(0.0), hi.max(0.0), opts);
    let left = weighted_interval(s, &neg, (-hi).max(0.0), (-lo).max(0.0), opts);
    right.plus(left)
}

/// `∫_{ℚ_p} |x|^{s-1} Φ(x) dx`, exactly as a finite shell sum plus a geometric tail.
pub(crate) fn step_weighted_integral(f: &StepFunction, s: Complex64) -> Complex64 {
    let p = f.p();
    let pf = p as f64;
    let k = f.support() as i64;
    let m = f.level() as i64;
    let modulus = f.table().len() as u64;
    let mut acc = ComplexSum::default();
    // shell |x| = p^{-j} for -k <= j < m: classes r with v_p(r) = j + k
    let mut shell = vec![ComplexSum::default(); (m + k).max(0) as usize];
    for r in 1..modulus {
        let mut v = 0usize;
        let mut q = r;
        while q % p == 0 {
            q /= p;
            v += 1;
        }
        shell[v].add(f.table()[r as usize]);
    }
    let cell = pf.powi(-(m as i32));
    for (v, sum) in shell.iter().enumerate() {
        let j = v as i64 - k;
        // |x|^{s-1} = p^{-j(s-1)}
        let w = (-(s - 1.0) * (j as f64) * pf.ln()).exp();
        acc.add(sum.value() * cell * w);
    }
    // x ∈ p^m ℤ_p: Φ(0) ∫ |x|^{s-1} dx = Φ(0) (1 - 1/p) p^{-ms} / (1 - p^{-s})
    let tail = (1.0 - 1.0 / pf) * (-s * (m as f64) * pf.ln()).exp() / (1.0 - (-s * pf.ln()).exp());
    acc.add(f.at_zero() * tail);
    acc.value()
}

/// Tate integral `ζ(Φ, |·|^s) = ∫ Φ(x) |x|^s d^×x` for `Re s > 0`.
pub fn tate_integral(place: Place, phi: &TestFunction, s: Complex64) -> Result<Complex64> {
    phi.check_place(place)?;
    if s.re <= 0.0 {
        return Err(Error::NonConvergence(format!("Tate integral needs Re s > 0, got {s}")));
    }
    match (place, phi) {
        (Place::Finite(p), TestFunction::Step(f)) => {
            let pf = p as f64;
            Ok(step_weighted_integral(&f.canonical(), s) / (1.0 - 1.0 / pf))
        }
        (Place::Real, TestFunction::Bump(b)) => finish(bump_weighted_integral(b, s, tight())),
        (Place::Complex, TestFunction::Bump(b)) => {
            // ∫_ℂ φ(|z|) |z|_ℂ^{s} dz/|z|_ℂ = 4π ∫_0^∞ φ(r) r^{2s-1} dr
            let (lo, hi) = b.support();
            let g = |r: f64| Complex64::new(b.eval(r), 0.0);
            let out = weighted_interval(2.0 * s, &g, lo.max(0.0), hi.max(0.0), tight());
            finish(out.scale(Complex64::new(4.0 * PI, 0.0)))
        }
        _ => unreachable!("checked by check_place"),
    }
}

pub(crate) fn finish(out: quad::QuadOut) -> Result<Complex64> {
    if out.converged {
        Ok(out.value)
    } else {
        Err(Error::Quadrature { value: out.value.norm(), error: out.error })
    }
}

/// Fourier transform of a test function.
#[derive(Clone, Debug, PartialEq)]
pub enum FourierTransform {
    /// Exact transform of a step function.
    Step(StepFunction),
    /// Numeric evaluator of the transform of a bump (real line or radial on ℂ).
    Numeric { place: Place, bump: BumpFunction },
}

impl FourierTransform {
    /// Evaluate at a real argument (at ℂ, the transform is radial so only `|a|` matters).
    pub fn eval_f64(&self, a: f64) -> Complex64 {
        match self {
            FourierTransform::Step(f) => f.eval(&rational_approx(a)),
            FourierTransform::Numeric { place: Place::Real, bump } => bump.fourier(a),
            FourierTransform::Numeric { bump, .. } => radial_fourier_complex(bump, a.abs()),
        }
    }
}

fn rational_approx(a: f64) -> Rational {
    let den = 1i128 << 40;
    Rational::new((a * den as f64).round() as i128, den)
}

/// `∫_ℂ φ(|z|) ψ_ℂ(az) dz` for real `a ≥ 0`: `4π ∫ φ(r) J_0(4π a r) r dr`.
fn radial_fourier_complex(b: &BumpFunction, a: f64) -> Complex64 {
    let (_, hi) = b.support();
    let k = 4.0 * PI * a;
    let n_theta = (64.0f64).max(2.0 * k * hi + 32.0) as usize;
    let j0 = |x: f64| {
        // trapezoid rule on the periodic integrand is spectrally accurate
        let s: f64 = (0..n_theta).map(|i| (x * (2.0 * PI * i as f64 / n_theta as f64).cos()).cos()).sum();
        s / n_theta as f64
    };
    let breaks: Vec<f64> = (0..=32).map(|i| hi * i as f64 / 32.0).collect();
    let out = quad::integrate(|r| Complex64::new(b.eval(r) * j0(k * r) * r, 0.0), &breaks, tight());
    out.value * (4.0 * PI)
}

/// `Φ̂(a) = ∫ Φ(x) ψ(ax) dx`.
pub fn fourier_test_fn(place: Place, phi: &TestFunction) -> Result<FourierTransform> {
    phi.check_place(place)?;
    match phi {
        TestFunction::Step(f) => Ok(FourierTransform::Step(step_fourier(f)?)),
        TestFunction::Bump(b) => Ok(FourierTransform::Numeric { place, bump: b.clone() }),
    }
}

/// Exact transform of a step function: support `p^{-m}`, level `max(k, 0)`.
fn step_fourier(f: &StepFunction) -> Result<StepFunction> {
    let p = f.p();
    let m = f.level() as i32;
    let k = f.support();
    let new_level = k.max(0) as u32;
    let new_support = m;
    let big = (p as i128).pow((m + k) as u32);
    let cell = (p as f64).powi(-m);
    let src = f.table();
    StepFunction::from_fn(p, new_level, new_support, |t| {
        // a = t p^{-m}, x_r = r p^{-k}: a x_r = t r / p^{m+k}
        let mut acc = ComplexSum::default();
        for (r, v) in src.iter().enumerate() {
            if *v != Complex64::new(0.0, 0.0) {
                acc.add(v * root_of_unity(t as i128 * r as i128 % big, big));
            }
        }
        acc.value() * cell
    })
}

/// Parse a rational like `3/4` or `-2`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Invalid(format!("cannot parse rational '{s}'"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i128 = n.trim().parse().map_err(|_| bad())?;
            let d: i128 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Absolute value at ∞ times all `|x|_p`, computed exactly.
pub fn product_formula(x: &Rational) -> Rational {
    let mut acc = x.abs();
    let mut primes = std::collections::BTreeSet::new();
    for n in [x.numer().unsigned_abs(), x.denom().unsigned_abs()] {
        for (p, _) in crate::arith::factorize(n as u64) {
            primes.insert(p);
        }
    }
    for p in primes {
        acc *= PadicContext { p }.abs(x);
    }
    acc
}

/// `gcd` helper re-exported for callers working with rational points.
pub fn gcd_i128(a: i128, b: i128) -> i128 {
    a.gcd(&b)
}

/// `Rational` one, for readability at call sites.
pub fn one() -> Rational {
    Rational::one()
}
