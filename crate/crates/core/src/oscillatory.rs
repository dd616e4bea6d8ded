//! Oscillatory integrals `∫ |x|^{s-1} ψ(a x^d) Φ(x) dx` and their inverse-phase
//! variants `∫ |x|^{s-1} ψ(a/x^d) Φ(x) dx`.
//!
//! At `p` everything reduces to exact sums over valuation shells: on the shell
//! `|x| = p^{-j}` the phase is trivial once `|a p^{dj}| ≤ 1`, and the remaining
//! shells are finite character sums collected as [`CyclotomicSum`]s. At ℝ the
//! integral is split at `ε^d |a| = 1`: the inner part is smooth and the outer part
//! is integrated in `y = x^d` with Filon panels. At ℂ radial test functions are
//! reduced to polar coordinates.

use crate::arith::{checked_pow, inv_mod, pow_mod, val_int, ComplexSum};
use crate::cyclotomic::CyclotomicSum;
use crate::error::{Error, Result};
use crate::localfield::{
    bump_weighted_integral, psi_real, rat_to_f64, weighted_interval, zeta_local, BumpFunction,
    PadicContext, Place, Rational, StepFunction, TestFunction,
};
use crate::quad::{self, QuadOptions, QuadOut};
use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Largest `p`-adic depth (exponent) a finite-place computation may enumerate.
pub const DEPTH_CEILING: u32 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Exactness {
    Exact,
    /// Quadrature with an error estimate (including any truncated tail).
    Quadrature(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatoryResult {
    pub value: Complex64,
    /// The `a`-dependent part of the bound the value is compared with.
    pub abs_bound_used: f64,
    pub exactness: Exactness,
}

/// The parameter `a`, in whichever field the place needs.
#[derive(Clone, Debug, PartialEq)]
pub enum LocalScalar {
    Rational(Rational),
    Real(f64),
    Complex(Complex64),
}

impl LocalScalar {
    fn rational(&self) -> Result<Rational> {
        match self {
            LocalScalar::Rational(r) => Ok(*r),
            _ => Err(Error::Invalid("finite places need a rational parameter".into())),
        }
    }

    fn real(&self) -> Result<f64> {
        match self {
            LocalScalar::Rational(r) => Ok(rat_to_f64(r)),
            LocalScalar::Real(x) => Ok(*x),
            LocalScalar::Complex(z) if z.im == 0.0 => Ok(z.re),
            LocalScalar::Complex(_) => Err(Error::Invalid("the real place needs a real parameter".into())),
        }
    }

    fn complex(&self) -> Complex64 {
        match self {
            LocalScalar::Rational(r) => Complex64::new(rat_to_f64(r), 0.0),
            LocalScalar::Real(x) => Complex64::new(*x, 0.0),
            LocalScalar::Complex(z) => *z,
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            LocalScalar::Rational(r) => r.is_zero(),
            LocalScalar::Real(x) => *x == 0.0,
            LocalScalar::Complex(z) => z.is_zero(),
        }
    }

    /// `|a|_v` (the square of the modulus at ℂ).
    pub fn abs_at(&self, place: Place) -> Result<f64> {
        Ok(match place {
            Place::Finite(p) => match PadicContext::new(p)?.valuation(&self.rational()?) {
                None => 0.0,
                Some(v) => (p as f64).powi(-v as i32),
            },
            Place::Real => self.real()?.abs(),
            Place::Complex => self.complex().norm_sqr(),
        })
    }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn p_pow(p: u64, e: Complex64) -> Complex64 {
    (e * (p as f64).ln()).exp()
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

fn default_opts() -> QuadOptions {
    QuadOptions { rel_tol: 1e-10, abs_tol: 1e-15, max_panels: 20_000 }
}

// ---------------------------------------------------------------------------
// finite places

/// `∫_{ξ + p^n ℤ_p} ψ(a x^d) dx` as an exact root-of-unity sum `p^{-L} Σ ζ^t`.
/// Returns the sum and the enumeration level `L`.
pub fn coset_phase_sum(p: u64, xi: &Rational, n: u32, a: &Rational, d: u32) -> Result<(CyclotomicSum, u32)> {
    let ctx = PadicContext::new(p)?;
    if ctx.valuation(xi) != Some(0) {
        return Err(Error::Invalid(format!("{xi} is not a {p}-adic unit")));
    }
    if n == 0 || d == 0 {
        return Err(Error::Invalid("n and d must be positive".into()));
    }
    let e = match ctx.valuation(a) {
        None => 0,
        Some(v) => -v,
    };
    if e <= 0 {
        let mut s = CyclotomicSum::new(p, 0);
        s.push(0);
        return Ok((s, n));
    }
    let e = e as u32;
    let level = n.max(e);
    if level > DEPTH_CEILING {
        return Err(Error::DepthOverflow { needed: level, ceiling: DEPTH_CEILING });
    }
    let overflow = Error::DepthOverflow { needed: level, ceiling: DEPTH_CEILING };
    let pe = checked_pow(p, e).ok_or(overflow.clone())?;
    let pn = checked_pow(p, n).ok_or(overflow.clone())?;
    let count = checked_pow(p, level - n).ok_or(overflow)?;
    let unit = a * Rational::from_integer(pe as i128);
    let r = ctx.residue(&unit, e)?;
    let x0 = ctx.residue(xi, n)?;
    let mut s = CyclotomicSum::new(p, e);
    for i in 0..count {
        let x = (x0 as u128 + pn as u128 * i as u128) % pe as u128;
        let t = r as u128 * pow_mod(x as u64, d as u64, pe) as u128 % pe as u128;
        s.push(t as u64);
    }
    Ok((s, level))
}

/// `∫_{ξ + p^n ℤ_p} ψ(a x^d) dx`. Exactly zero whenever the root-of-unity sum vanishes.
pub fn coset_phase_integral(p: u64, xi: &Rational, n: u32, a: &Rational, d: u32) -> Result<Complex64> {
    let (s, level) = coset_phase_sum(p, xi, n, a, d)?;
    Ok(s.to_complex() * (p as f64).powi(-(level as i32)))
}

/// `n(Φ)`, computed from the values rather than the stored level.
pub fn schwartz_level(f: &StepFunction) -> u32 {
    f.schwartz_level()
}

/// `T = max(p^{n(Φ)+c+1}, p^{2c+2})` with `c = v_p(d)`: the unit-shell integral of
/// `Φ ψ(a x^d)` vanishes for every `|a|_p ≥ T`.
pub fn vanishing_threshold(p: u64, d: u32, f: &StepFunction) -> Result<f64> {
    if f.p() != p {
        return Err(Error::Invalid(format!("test function lives on Q_{}", f.p())));
    }
    let g = f.canonical();
    if g.support() > 0 {
        return Err(Error::Invalid("test function must be supported in Z_p".into()));
    }
    if d == 0 {
        return Err(Error::Invalid("d must be positive".into()));
    }
    let n = g.schwartz_level() as i32;
    let cv = val_int(d as i128, p) as i32;
    Ok((p as f64).powi((n + cv + 1).max(2 * cv + 2)))
}

/// Valuation-shell data of a canonical step function.
struct Shells {
    f: StepFunction,
    p: u64,
    m: i64,
    k: i64,
    mass: Vec<Complex64>,
}

impl Shells {
    fn new(f: &StepFunction) -> Self {
        let f = f.canonical();
        let p = f.p();
        let m = f.level() as i64;
        let k = f.support() as i64;
        let mut sums = vec![ComplexSum::default(); (m + k).max(0) as usize];
        for (r, v) in f.table().iter().enumerate().skip(1) {
            let mut q = r as u64;
            let mut j = 0;
            while q % p == 0 {
                q /= p;
                j += 1;
            }
            sums[j].add(*v);
        }
        let cell = (p as f64).powi(-(m as i32));
        let mass = sums.iter().map(|s| s.value() * cell).collect();
        Self { f, p, m, k, mass }
    }

    /// `∫_{|x| = p^{-j}} Φ dx`.
    fn mass(&self, j: i64) -> Complex64 {
        if j < -self.k {
            c(0.0)
        } else if j < self.m {
            self.mass[(j + self.k) as usize]
        } else {
            self.f.at_zero() * (1.0 - 1.0 / self.p as f64) * (self.p as f64).powi(-(j as i32))
        }
    }

    /// `Σ_{j ≥ j0} ∫_{|x| = p^{-j}} |x|^{s-1} Φ dx`.
    fn weighted_from(&self, j0: i64, s: Complex64) -> Complex64 {
        let j0 = j0.max(-self.k);
        let mut acc = ComplexSum::default();
        for j in j0..self.m {
            acc.add(p_pow(self.p, -(s - 1.0) * j as f64) * self.mass(j));
        }
        let jt = j0.max(self.m);
        let pf = self.p as f64;
        let tail = (1.0 - 1.0 / pf) * p_pow(self.p, -s * jt as f64) / (1.0 - p_pow(self.p, -s));
        acc.add(self.f.at_zero() * tail);
        acc.value()
    }

    /// Schwartz level of `u ↦ Φ(p^j u)` on the units.
    fn level_at(&self, j: i64) -> i64 {
        (self.m - j).max(1)
    }

    fn value(&self, u: u64, j: i64) -> Complex64 {
        self.f.value_at_scaled(u, j)
    }
}

fn vanishing_exponent(level: i64, cv: i64) -> i64 {
    (level + cv + 1).max(2 * cv + 2)
}

/// `a = p^{-e} r` with `r` a unit; returns `(e, r)`.
fn split_scalar(p: u64, a: &Rational) -> (i64, Rational) {
    let ctx = PadicContext::new(p).expect("prime");
    let v = ctx.valuation(a).expect("nonzero");
    let r = a * Rational::from_integer(p as i128).pow(-v as i32);
    (-v, r)
}

fn enum_overflow(needed: i64) -> Error {
    Error::DepthOverflow { needed: needed.max(0) as u32, ceiling: DEPTH_CEILING }
}

/// `∫_{ℤ_p^*} Φ(p^j u) ψ(p^{-E} r u^{±d}) du`, exactly.
fn unit_shell(sh: &Shells, j: i64, r: &Rational, big_e: i64, d: u32, inverse: bool) -> Result<Complex64> {
    let p = sh.p;
    let level = sh.level_at(j).max(big_e);
    if level > DEPTH_CEILING as i64 {
        return Err(enum_overflow(level));
    }
    let pe = checked_pow(p, big_e as u32).ok_or(enum_overflow(level))?;
    let pl = checked_pow(p, level as u32).ok_or(enum_overflow(level))?;
    let rr = PadicContext::new(p)?.residue(r, big_e as u32)? as u128;
    let mut sum = CyclotomicSum::new(p, big_e as u32);
    for u in 1..pl {
        if u % p == 0 {
            continue;
        }
        let w = sh.value(u, j);
        if w.is_zero() {
            continue;
        }
        let base = if inverse { inv_mod((u % pe) as i128, pe as i128).expect("unit") as u64 } else { u % pe };
        let t = (rr * pow_mod(base, d as u64, pe) as u128 % pe as u128) as u64;
        sum.add(t, w);
    }
    Ok(sum.to_complex() * (p as f64).powi(-(level as i32)))
}

fn finite_osc_1d(f: &StepFunction, a: &Rational, d: u32, s: Complex64) -> Result<Complex64> {
    let sh = Shells::new(f);
    if a.is_zero() {
        return Ok(sh.weighted_from(-sh.k, s));
    }
    let (e, r) = split_scalar(sh.p, a);
    let di = d as i64;
    let cv = val_int(d as i128, sh.p) as i64;
    let first_flat = (-sh.k).max(ceil_div(e, di));
    let mut acc = ComplexSum::default();
    for j in -sh.k..first_flat {
        let big_e = e - di * j;
        if big_e >= vanishing_exponent(sh.level_at(j), cv) {
            continue;
        }
        acc.add(p_pow(sh.p, -s * j as f64) * unit_shell(&sh, j, &r, big_e, d, false)?);
    }
    acc.add(sh.weighted_from(first_flat, s));
    Ok(acc.value())
}

fn finite_osc_nd(fs: &[StepFunction], a: &Rational, d: &[u32], s: &[Complex64]) -> Result<Complex64> {
    let shells: Vec<Shells> = fs.iter().map(Shells::new).collect();
    let p = shells[0].p;
    let full: Complex64 = shells.iter().zip(s).map(|(sh, si)| sh.weighted_from(-sh.k, *si)).product();
    if a.is_zero() {
        return Ok(full);
    }
    let (e, r) = split_scalar(p, a);
    let n = shells.len();
    let di: Vec<i64> = d.iter().map(|&x| x as i64).collect();
    let cv: Vec<i64> = d.iter().map(|&x| val_int(x as i128, p) as i64).collect();
    // valuation tuples on which the phase is nontrivial: Σ d_i j_i < e
    let mut tuples = Vec::new();
    let mins: Vec<i64> = (0..n).map(|i| (i + 1..n).map(|l| -di[l] * shells[l].k).sum()).collect();
    fn rec(i: usize, partial: i64, j: &mut Vec<i64>, out: &mut Vec<Vec<i64>>, ks: &[i64], di: &[i64], mins: &[i64], e: i64) {
        if i == ks.len() {
            out.push(j.clone());
            return;
        }
        let mut ji = -ks[i];
        while partial + di[i] * ji + mins[i] < e {
            j[i] = ji;
            rec(i + 1, partial + di[i] * ji, j, out, ks, di, mins, e);
            ji += 1;
        }
    }
    let ks: Vec<i64> = shells.iter().map(|sh| sh.k).collect();
    rec(0, 0, &mut vec![0; n], &mut tuples, &ks, &di, &mins, e);

    let mut acc = ComplexSum::default();
    acc.add(full);
    for j in &tuples {
        let big_e = e - (0..n).map(|i| di[i] * j[i]).sum::<i64>();
        let flat: Complex64 =
            (0..n).map(|i| p_pow(p, -(s[i] - 1.0) * j[i] as f64) * shells[i].mass(j[i])).product();
        acc.add(-flat);
        // a coordinate whose unit-shell integral vanishes for every choice of the others
        if (0..n).any(|i| big_e >= vanishing_exponent(shells[i].level_at(j[i]), cv[i])) {
            continue;
        }
        let levels: Vec<i64> = (0..n).map(|i| shells[i].level_at(j[i]).max(big_e)).collect();
        let total: i64 = levels.iter().sum();
        if total > DEPTH_CEILING as i64 {
            return Err(enum_overflow(total));
        }
        let pe = checked_pow(p, big_e as u32).ok_or(enum_overflow(total))?;
        let rr = PadicContext::new(p)?.residue(&r, big_e as u32)? as u128;
        let mods: Vec<u64> = levels.iter().map(|&l| p.pow(l as u32)).collect();
        let mut sum = CyclotomicSum::new(p, big_e as u32);
        let mut u = vec![1u64; n];
        'outer: loop {
            if u.iter().all(|x| x % p != 0) {
                let w: Complex64 = (0..n).map(|i| shells[i].value(u[i], j[i])).product();
                if !w.is_zero() {
                    let mut t = rr;
                    for i in 0..n {
                        t = t * pow_mod(u[i] % pe, d[i] as u64, pe) as u128 % pe as u128;
                    }
                    sum.add(t as u64, w);
                }
            }
            for i in 0..n {
                u[i] += 1;
                if u[i] < mods[i] {
                    continue 'outer;
                }
                u[i] = 1;
            }
            break;
        }
        let weight: Complex64 = (0..n).map(|i| p_pow(p, -s[i] * j[i] as f64)).product();
        acc.add(sum.to_complex() * (p as f64).powi(-(total as i32)) * weight);
    }
    Ok(acc.value())
}

fn finite_inverse(f: &StepFunction, a: &Rational, d: u32, s: Complex64) -> Result<Complex64> {
    let sh = Shells::new(f);
    let (e, r) = split_scalar(sh.p, a);
    let di = d as i64;
    let cv = val_int(d as i128, sh.p) as i64;
    let mut acc = ComplexSum::default();
    let mut j = -sh.k;
    loop {
        let big_e = e + di * j;
        if big_e <= 0 {
            acc.add(p_pow(sh.p, -(s - 1.0) * j as f64) * sh.mass(j));
        } else if big_e >= vanishing_exponent(sh.level_at(j), cv) {
            if j >= sh.m {
                break;
            }
        } else {
            acc.add(p_pow(sh.p, -s * j as f64) * unit_shell(&sh, j, &r, big_e, d, true)?);
        }
        j += 1;
    }
    Ok(acc.value())
}

// ---------------------------------------------------------------------------
// archimedean places

/// `∫_lo^hi x^{σ-1} g(x) e^{-2πi b x^d} dx` on the positive half line.
fn half_line<G: Fn(f64) -> f64>(sigma: Complex64, g: &G, lo: f64, hi: f64, b: f64, d: u32, opts: QuadOptions) -> QuadOut {
    let lo = lo.max(0.0);
    if hi <= lo {
        return QuadOut::zero();
    }
    if b == 0.0 {
        return weighted_interval(sigma, &|x: f64| c(g(x)), lo, hi, opts);
    }
    let dd = d as f64;
    let near = |x: f64| psi_real(b * x.powi(d as i32)) * g(x);
    let split = b.abs().powf(-1.0 / dd);
    let mut out = weighted_interval(sigma, &near, lo, split.min(hi), opts);
    if split < hi {
        let y0 = split.max(lo).powi(d as i32);
        let y1 = hi.powi(d as i32);
        let far = |y: f64| c(y).powc(sigma / dd - 1.0) * (g(y.powf(1.0 / dd)) / dd);
        if y0 < y1 {
            let breaks = quad::geometric_breaks(y0, y1, 2.0);
            out = out.plus(quad::filon(far, 2.0 * PI * b, &breaks, opts));
        }
    }
    out
}

fn real_osc_1d(bump: &BumpFunction, a: f64, d: u32, s: Complex64, opts: QuadOptions) -> QuadOut {
    let (lo, hi) = bump.support();
    let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
    let right = half_line(s, &|x| bump.eval(x), lo, hi, a, d, opts);
    let left = half_line(s, &|u| bump.eval(-u), -hi, -lo, a * sign, d, opts);
    right.plus(left)
}

/// Angular breakpoints: a uniform grid plus the zeros of `cos(dθ + α)`.
fn angular_breaks(d: u32, alpha: f64) -> Vec<f64> {
    let two_pi = 2.0 * PI;
    let mut v: Vec<f64> = (0..=64).map(|i| two_pi * i as f64 / 64.0).collect();
    for k in 0..2 * d {
        let t = ((PI / 2.0 - alpha + k as f64 * PI) / d as f64).rem_euclid(two_pi);
        v.push(t);
    }
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    v
}

/// `2 ∫_0^{2π} F(θ) dθ` for an inner integral `F` that reports its own error.
fn angular<F: Fn(f64) -> QuadOut>(inner: F, breaks: &[f64]) -> QuadOut {
    let worst = Cell::new(0.0f64);
    let ok = Cell::new(true);
    let f = |theta: f64| {
        let o = inner(theta);
        worst.set(worst.get().max(o.error));
        ok.set(ok.get() && o.converged);
        o.value
    };
    let opts = QuadOptions { rel_tol: 1e-9, abs_tol: 1e-14, max_panels: 20_000 };
    let mut out = quad::integrate(f, breaks, opts).scale(c(2.0));
    out.error += 2.0 * 2.0 * PI * worst.get();
    out.converged &= ok.get();
    out
}

fn complex_osc_1d(bump: &BumpFunction, a: Complex64, d: u32, s: Complex64, opts: QuadOptions) -> QuadOut {
    let (lo, hi) = bump.support();
    let g = |r: f64| bump.eval(r);
    let w = a.norm();
    if w == 0.0 {
        return half_line(2.0 * s, &g, lo, hi, 0.0, d, opts).scale(c(4.0 * PI));
    }
    let alpha = a.arg();
    let inner = |theta: f64| half_line(2.0 * s, &g, lo, hi, 2.0 * w * (d as f64 * theta + alpha).cos(), d, opts);
    angular(inner, &angular_breaks(d, alpha))
}

fn real_osc_nd(bumps: &[BumpFunction], a: f64, d: &[u32], s: &[Complex64], opts: QuadOptions) -> QuadOut {
    if bumps.len() == 1 {
        return real_osc_1d(&bumps[0], a, d[0], s[0], opts);
    }
    let b0 = &bumps[0];
    let worst = Cell::new(0.0f64);
    let ok = Cell::new(true);
    let f = |x: f64| {
        let v = b0.eval(x);
        if v == 0.0 {
            return c(0.0);
        }
        let o = real_osc_nd(&bumps[1..], a * x.powi(d[0] as i32), &d[1..], &s[1..], opts);
        worst.set(worst.get().max(o.error));
        ok.set(ok.get() && o.converged);
        o.value * v
    };
    let (lo, hi) = b0.support();
    let right = weighted_interval(s[0], &f, lo.max(0.0), hi.max(0.0), opts);
    let left = weighted_interval(s[0], &|u: f64| f(-u), (-hi).max(0.0), (-lo).max(0.0), opts);
    let mut out = right.plus(left);
    let abs_bump = BumpFunction::new(b0.center, b0.radius, b0.amplitude.abs()).expect("valid bump");
    let mass = bump_weighted_integral(&abs_bump, c(s[0].re), opts).value.re;
    out.error += worst.get() * mass;
    out.converged &= ok.get();
    out
}

/// Smooth step: 1 on `|y| ≤ 1`, 0 on `|y| ≥ 2`, built from `e^{-1/t}`.
fn chi(y: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let t = 2.0 - y.abs();
    if t >= 1.0 {
        1.0
    } else if t <= 0.0 {
        0.0
    } else {
        f(t) / (f(t) + f(1.0 - t))
    }
}

/// Dyadic partition piece `θ(y) = χ(y) - χ(2y)`, supported on `1/2 ≤ |y| ≤ 2`;
/// `Σ_n θ(2^n x) = 1` for `x ≠ 0`.
pub fn dyadic_piece(y: f64) -> f64 {
    chi(y) - chi(2.0 * y)
}

/// Tolerances for the inverse-phase shell series.
#[derive(Clone, Copy, Debug)]
pub struct InverseOptions {
    /// Accept `Re s > -1 + delta`.
    pub delta: f64,
    /// Stop once the geometric tail bound is below this (absolute) level.
    pub tail_tol: f64,
    /// Largest tail bound reported as a value rather than an error.
    pub flag_tol: f64,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self { delta: 1e-3, tail_tol: 1e-13, flag_tol: 1e-6 }
    }
}

/// `∫_0^hi x^{σ-1} g(x) e^{-2πi b x^{-d}} dx` as the dyadic shell series.
/// Returns the value and the tail bound of the truncation.
fn inverse_half_line<G: Fn(f64) -> f64>(
    sigma: Complex64,
    g: &G,
    hi: f64,
    b: f64,
    d: u32,
    iopts: InverseOptions,
) -> (QuadOut, f64) {
    if hi <= 0.0 {
        return (QuadOut::zero(), 0.0);
    }
    let opts = default_opts();
    if b == 0.0 {
        return (weighted_interval(sigma, &|x: f64| c(g(x)), 0.0, hi, opts), 0.0);
    }
    let dd = d as f64;
    let rate = sigma.re + 1.0;
    let ab = b.abs().powf(1.0 / dd);
    let n_min = (-1.0 - hi.log2()).floor() as i32;
    let wbreaks = quad::geometric_breaks(2f64.powi(-(d as i32)), 2f64.powi(d as i32), 2f64.powf(dd / 8.0));
    let mut out = QuadOut::zero();
    let mut c_est = 0.0f64;
    let mut tail = f64::INFINITY;
    let mut n = n_min;
    while n < n_min + 400 {
        let scale = 2f64.powi(-n);
        let amp = b * 2f64.powi(d as i32 * n);
        // y = w^{-1/d}: ∫ y^{σ-1} h(y) e^{-2πiA y^{-d}} dy = (1/d) ∫ w^{-σ/d-1} h(w^{-1/d}) e^{-2πiAw} dw
        let h = |w: f64| {
            let y = w.powf(-1.0 / dd);
            c(w).powc(-sigma / dd - 1.0) * (g(scale * y) * dyadic_piece(y) / dd)
        };
        let shell = quad::filon(h, 2.0 * PI * amp, &wbreaks, opts);
        c_est = c_est.max(shell.value.norm() * 2f64.powi(n) * ab);
        out = out.plus(shell.scale(c(2.0).powc(-sigma * n as f64)));
        tail = c_est / ab * 2f64.powf(-(n as f64 + 1.0) * rate) / (1.0 - 2f64.powf(-rate));
        if n >= n_min + 4 && tail <= iopts.tail_tol.max(1e-10 * out.value.norm()) {
            break;
        }
        n += 1;
    }
    out.error += tail;
    (out, tail)
}

fn real_inverse(bump: &BumpFunction, a: f64, d: u32, s: Complex64, iopts: InverseOptions) -> (QuadOut, f64) {
    let (lo, hi) = bump.support();
    let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
    let (r, t1) = inverse_half_line(s, &|x| bump.eval(x), hi, a, d, iopts);
    let (l, t2) = inverse_half_line(s, &|u| bump.eval(-u), -lo, a * sign, d, iopts);
    (r.plus(l), t1 + t2)
}

fn complex_inverse(bump: &BumpFunction, a: Complex64, d: u32, s: Complex64, iopts: InverseOptions) -> (QuadOut, f64) {
    let (_, hi) = bump.support();
    let g = |r: f64| bump.eval(r);
    let (w, alpha) = (a.norm(), a.arg());
    let worst_tail = Cell::new(0.0f64);
    let inner = |theta: f64| {
        let (o, t) = inverse_half_line(2.0 * s, &g, hi, 2.0 * w * (alpha - d as f64 * theta).cos(), d, iopts);
        worst_tail.set(worst_tail.get().max(t));
        o
    };
    // zeros of cos(α - dθ) are zeros of cos(dθ - α)
    let out = angular(inner, &angular_breaks(d, -alpha));
    (out, 4.0 * PI * worst_tail.get())
}

// ---------------------------------------------------------------------------
// public entry points

/// `κ(s) = min(1/2, Re s_1/d_1, ..., Re s_n/d_n)`.
pub fn kappa(d: &[u32], s: &[Complex64]) -> f64 {
    d.iter().zip(s).fold(0.5f64, |k, (&dj, sj)| k.min(sj.re / dj as f64))
}

/// `∏ ζ_v(Re s_j)`.
pub fn zeta_factor(place: Place, s: &[Complex64]) -> Result<f64> {
    s.iter().try_fold(1.0, |acc, sj| Ok(acc * zeta_local(place, c(sj.re))?.re))
}

fn envelope_shape(abs_a: f64, kap: f64) -> f64 {
    if abs_a <= 1.0 {
        1.0
    } else {
        abs_a.powf(-kap)
    }
}

fn check_s(s: &[Complex64]) -> Result<()> {
    match s.iter().find(|z| z.re <= 0.0) {
        Some(z) => Err(Error::NonConvergence(format!("need Re s > 0, got {z}"))),
        None => Ok(()),
    }
}

fn from_quad(out: QuadOut, bound: f64) -> Result<OscillatoryResult> {
    if !out.converged || !out.value.re.is_finite() || !out.value.im.is_finite() {
        return Err(Error::Quadrature { value: out.value.norm(), error: out.error });
    }
    Ok(OscillatoryResult { value: out.value, abs_bound_used: bound, exactness: Exactness::Quadrature(out.error) })
}

/// `I(a) = ∫_F |x|^{s-1} ψ(a x^d) Φ(x) dx`.
pub fn osc_integral_1d(place: Place, phi: &TestFunction, a: &LocalScalar, d: u32, s: Complex64) -> Result<OscillatoryResult> {
    osc_integral_nd(place, std::slice::from_ref(phi), a, &[d], &[s])
}

/// `∫_{F^n} ∏|x_j|^{s_j-1} ψ(a x_1^{d_1}⋯x_n^{d_n}) Φ_1(x_1)⋯Φ_n(x_n) dx` for `n ≤ 3`.
pub fn osc_integral_nd(
    place: Place,
    phis: &[TestFunction],
    a: &LocalScalar,
    d: &[u32],
    s: &[Complex64],
) -> Result<OscillatoryResult> {
    let n = phis.len();
    if n == 0 || n > 3 || d.len() != n || s.len() != n {
        return Err(Error::Invalid("need 1 to 3 coordinates with matching d and s".into()));
    }
    if d.contains(&0) {
        return Err(Error::Invalid("exponents d must be positive".into()));
    }
    for phi in phis {
        phi.check_place(place)?;
    }
    check_s(s)?;
    let bound = zeta_factor(place, s)? * envelope_shape(a.abs_at(place)?, kappa(d, s));
    match place {
        Place::Finite(_) => {
            let steps: Vec<StepFunction> = phis
                .iter()
                .map(|f| match f {
                    TestFunction::Step(g) => g.clone(),
                    TestFunction::Bump(_) => unreachable!("checked"),
                })
                .collect();
            let ar = a.rational()?;
            let value =
                if n == 1 { finite_osc_1d(&steps[0], &ar, d[0], s[0])? } else { finite_osc_nd(&steps, &ar, d, s)? };
            Ok(OscillatoryResult { value, abs_bound_used: bound, exactness: Exactness::Exact })
        }
        Place::Real => {
            let bumps: Vec<BumpFunction> = phis
                .iter()
                .map(|f| match f {
                    TestFunction::Bump(b) => b.clone(),
                    TestFunction::Step(_) => unreachable!("checked"),
                })
                .collect();
            from_quad(real_osc_nd(&bumps, a.real()?, d, s, default_opts()), bound)
        }
        Place::Complex => {
            if n > 1 {
                return Err(Error::Unsupported("multi-dimensional integrals at the complex place".into()));
            }
            let TestFunction::Bump(b) = &phis[0] else { unreachable!("checked") };
            from_quad(complex_osc_1d(b, a.complex(), d[0], s[0], default_opts()), bound)
        }
    }
}

/// `η_a(s) = ∫_F |x|^{s-1} ψ(a/x^d) Φ(x) dx` through the dyadic shell series.
pub fn inverse_phase_integral(
    place: Place,
    phi: &TestFunction,
    a: &LocalScalar,
    d: u32,
    s: Complex64,
    iopts: InverseOptions,
) -> Result<OscillatoryResult> {
    phi.check_place(place)?;
    if a.is_zero() {
        return Err(Error::Invalid("inverse phase needs a nonzero parameter".into()));
    }
    if d == 0 {
        return Err(Error::Invalid("d must be positive".into()));
    }
    if s.re <= -1.0 + iopts.delta {
        return Err(Error::NonConvergence(format!("need Re s > -1 + {}, got {s}", iopts.delta)));
    }
    let bound = a.abs_at(place)?.powf(-1.0 / d as f64);
    let (out, tail) = match (place, phi) {
        (Place::Finite(_), TestFunction::Step(f)) => {
            let value = finite_inverse(f, &a.rational()?, d, s)?;
            return Ok(OscillatoryResult { value, abs_bound_used: bound, exactness: Exactness::Exact });
        }
        (Place::Real, TestFunction::Bump(b)) => real_inverse(b, a.real()?, d, s, iopts),
        (Place::Complex, TestFunction::Bump(b)) => {
            if s.re <= 0.0 {
                return Err(Error::Unsupported("inverse phase at the complex place needs Re s > 0".into()));
            }
            complex_inverse(b, a.complex(), d, s, iopts)
        }
        _ => unreachable!("checked by check_place"),
    };
    if tail > iopts.flag_tol {
        return Err(Error::NonConvergence(format!("shell series tail bound {tail:e} above tolerance")));
    }
    from_quad(out, bound)
}

/// `E(ν, ω) = ∫_1^∞ r^{-ν} e^{iωr} dr` for `Re ν > 0` (`Re ν > 1` when `ω = 0`).
///
/// Rotating the contour to `r = 1 + i sgn(ω) τ` gives a damped integrand:
/// `E = i sgn(ω) e^{iω} ∫_0^∞ (1 + i sgn(ω) τ)^{-ν} e^{-|ω|τ} dτ`.
pub fn power_exp_tail(nu: Complex64, omega: f64) -> Result<Complex64> {
    if omega == 0.0 {
        if nu.re <= 1.0 {
            return Err(Error::Pole(format!("divergent tail at nu = {nu}")));
        }
        return Ok(1.0 / (nu - 1.0));
    }
    if nu.re <= 0.0 {
        return Err(Error::NonConvergence(format!("need Re nu > 0, got {nu}")));
    }
    let sg = omega.signum();
    let w = omega.abs();
    // τ = u/|ω|
    let f = |u: f64| Complex64::new(1.0, sg * u / w).powc(-nu) * (-u).exp();
    let mut breaks = vec![0.0];
    breaks.extend(quad::geometric_breaks(1e-3 * w.min(1.0), 60.0, 2.0));
    let out = quad::integrate(f, &breaks, QuadOptions { rel_tol: 1e-12, abs_tol: 1e-17, max_panels: 20_000 });
    if !out.converged {
        return Err(Error::Quadrature { value: out.value.norm(), error: out.error });
    }
    Ok(Complex64::new(0.0, sg) * Complex64::from_polar(1.0, omega) * out.value / w)
}

// ---------------------------------------------------------------------------
// decay reports

/// Observed `|I(a)|` on a grid of `|a|` against the envelope `C ∏ζ_v(Re s_j) min(1, |a|^{-κ})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub place: Place,
    pub d: Vec<u32>,
    pub s: Vec<Complex64>,
    pub kappa: f64,
    pub zeta_factor: f64,
    pub abs_a: Vec<f64>,
    pub values: Vec<Complex64>,
    pub errors: Vec<f64>,
    pub envelope: Vec<f64>,
    pub fitted_c: f64,
    /// Least-squares slope of `-log|I|` against `log|a|` over points above the error floor;
    /// infinite when fewer than two points are resolved.
    pub fitted_exponent: f64,
    /// `sup_i C_i / C_0` with `C_i = |I(a_i)| max(1,|a_i|)^κ / ∏ζ_v`.
    pub stability_ratio: f64,
}

impl DecayReport {
    /// CSV with columns `abs_a,re,im,envelope`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("abs_a,re,im,envelope\n");
        for i in 0..self.abs_a.len() {
            let _ = writeln!(out, "{},{},{},{}", self.abs_a[i], self.values[i].re, self.values[i].im, self.envelope[i]);
        }
        out
    }

    /// Whether every observation sits under the fitted envelope.
    pub fn envelope_holds(&self) -> bool {
        self.values.iter().zip(&self.envelope).all(|(v, e)| v.norm() <= e * (1.0 + 1e-12))
    }
}

/// A parameter with `|a|_v` equal to the given size.
fn scalar_of_size(place: Place, size: f64) -> Result<LocalScalar> {
    if !(size > 0.0) {
        return Err(Error::Invalid("grid sizes must be positive".into()));
    }
    match place {
        Place::Real => Ok(LocalScalar::Real(size)),
        Place::Complex => Ok(LocalScalar::Complex(Complex64::from_polar(size.sqrt(), 0.3))),
        Place::Finite(p) => {
            let e = (size.ln() / (p as f64).ln()).round() as i32;
            if ((p as f64).powi(e) / size - 1.0).abs() > 1e-9 {
                return Err(Error::Invalid(format!("|a| = {size} is not a power of {p}")));
            }
            Ok(LocalScalar::Rational(Rational::from_integer(p as i128).pow(-e)))
        }
    }
}

pub fn decay_report(place: Place, phis: &[TestFunction], d: &[u32], s: &[Complex64], grid: &[f64]) -> Result<DecayReport> {
    if grid.is_empty() {
        return Err(Error::Invalid("empty grid".into()));
    }
    let results: Vec<Result<OscillatoryResult>> = grid
        .par_iter()
        .map(|&size| {
            let a = scalar_of_size(place, size)?;
            osc_integral_nd(place, phis, &a, d, s)
        })
        .collect();
    let results: Vec<OscillatoryResult> = results.into_iter().collect::<Result<_>>()?;
    let kap = kappa(d, s);
    let zf = zeta_factor(place, s)?;
    let values: Vec<Complex64> = results.iter().map(|r| r.value).collect();
    let errors: Vec<f64> = results
        .iter()
        .map(|r| match r.exactness {
            Exactness::Exact => 0.0,
            Exactness::Quadrature(e) => e,
        })
        .collect();
    let cs: Vec<f64> = grid.iter().zip(&values).map(|(g, v)| v.norm() / (zf * envelope_shape(*g, kap))).collect();
    let fitted_c = cs.iter().cloned().fold(0.0, f64::max);
    let envelope = grid.iter().map(|g| fitted_c * zf * envelope_shape(*g, kap)).collect();
    let stability_ratio = if cs[0] > 0.0 {
        fitted_c / cs[0]
    } else if fitted_c == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .zip(&values)
        .zip(&errors)
        .filter(|((_, v), e)| v.norm() > (100.0 * **e).max(1e-12 * scale) && v.norm() > 0.0)
        .map(|((g, v), _)| (g.ln(), v.norm().ln()))
        .collect();
    let fitted_exponent = if pts.len() < 2 {
        f64::INFINITY
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -sxy / sxx
    };
    Ok(DecayReport {
        place,
        d: d.to_vec(),
        s: s.to_vec(),
        kappa: kap,
        zeta_factor: zf,
        abs_a: grid.to_vec(),
        values,
        errors,
        envelope,
        fitted_c,
        fitted_exponent,
        stability_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfield::{root_of_unity, step_weighted_integral, tate_integral};

    fn rat(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    fn step(f: StepFunction) -> TestFunction {
        TestFunction::Step(f)
    }

    /// `Σ_{x mod p^L, x ∈ ξ + p^n} e^{2πi frac(a x^d)} p^{-L}` by plain complex summation.
    fn naive_coset(p: u64, xi: u64, n: u32, a: &Rational, d: u32, level: u32) -> Complex64 {
        let pl = p.pow(level);
        let pn = p.pow(n);
        let mut acc = c(0.0);
        for x in (0..pl).filter(|x| x % pn == xi % pn) {
            let t = a * Rational::from_integer(x as i128).pow(d as i32);
            acc += crate::localfield::psi(Place::Finite(p), &t);
        }
        acc / pl as f64
    }

    #[test]
    fn coset_examples() {
        let v = coset_phase_integral(3, &rat(1, 1), 1, &rat(1, 9), 1).unwrap();
        assert_eq!(v, c(0.0));
        let v = coset_phase_integral(2, &rat(1, 1), 2, &rat(1, 16), 1).unwrap();
        assert_eq!(v, c(0.0));
        let v = coset_phase_integral(5, &rat(2, 1), 1, &rat(7, 3), 1).unwrap();
        assert!((v - c(0.2)).norm() < 1e-15);
    }

    #[test]
    fn coset_sums_match_naive_sums() {
        for p in [2u64, 3, 5] {
            for d in 1..=3u32 {
                for n in 1..=2u32 {
                    for e in 0..=4i32 {
                        let a = rat(1 + p as i128, 1) * Rational::from_integer(p as i128).pow(-e);
                        let xi = 1 + (p - 1) / 2 * (p != 2) as u64;
                        let exact = coset_phase_integral(p, &rat(xi as i128, 1), n, &a, d).unwrap();
                        let naive = naive_coset(p, xi, n, &a, d, n.max(e as u32) + 1);
                        assert!((exact - naive).norm() < 1e-12, "p={p} d={d} n={n} e={e}");
                    }
                }
            }
        }
    }

    #[test]
    fn depth_overflow_is_reported() {
        let a = Rational::from_integer(2).pow(-20);
        assert!(matches!(coset_phase_integral(2, &rat(1, 1), 1, &a, 1), Err(Error::DepthOverflow { .. })));
    }

    #[test]
    fn schwartz_levels() {
        assert_eq!(schwartz_level(&StepFunction::unit_ball(7).unwrap()), 1);
        assert_eq!(schwartz_level(&StepFunction::indicator(2, &rat(1, 1), 2).unwrap()), 2);
        let f = StepFunction::unit_ball(3).unwrap().with_level(3).unwrap();
        assert_eq!(f.level(), 3);
        assert_eq!(schwartz_level(&f), 1);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(vanishing_threshold(5, 1, &StepFunction::unit_ball(5).unwrap()).unwrap(), 25.0);
        assert_eq!(vanishing_threshold(2, 2, &StepFunction::unit_ball(2).unwrap()).unwrap(), 16.0);
        let f = StepFunction::indicator(3, &rat(1, 1), 2).unwrap();
        assert_eq!(vanishing_threshold(3, 1, &f).unwrap(), 27.0);
    }

    /// `∫_{ℤ_p^*} Φ(x) ψ(a x^d) dx` by summing over all residues mod `p^L`.
    fn naive_unit_shell(f: &StepFunction, a: &Rational, d: u32, level: u32) -> Complex64 {
        let p = f.p();
        let pl = p.pow(level);
        let mut acc = c(0.0);
        for x in (1..pl).filter(|x| x % p != 0) {
            let xr = Rational::from_integer(x as i128);
            let t = a * xr.pow(d as i32);
            acc += f.eval(&xr) * crate::localfield::psi(Place::Finite(p), &t);
        }
        acc / pl as f64
    }

    #[test]
    fn threshold_is_a_true_vanishing_bound() {
        for p in [2u64, 3, 5] {
            let fns = [
                StepFunction::unit_ball(p).unwrap(),
                StepFunction::indicator(p, &rat(1, 1), 2).unwrap(),
                StepFunction::from_fn(p, 2, 0, |r| c((r % 7) as f64 - 2.0)).unwrap(),
            ];
            for f in &fns {
                for d in 1..=3u32 {
                    let t = vanishing_threshold(p, d, f).unwrap();
                    for m in 1..=6i32 {
                        let size = (p as f64).powi(m);
                        if size < t || (p == 5 && m > 5) {
                            continue;
                        }
                        for u in 1..p.min(4) {
                            let a = rat(u as i128, 1) * Rational::from_integer(p as i128).pow(-m);
                            let v = naive_unit_shell(f, &a, d, (m as u32).max(f.level()));
                            assert!(v.norm() < 1e-10, "p={p} d={d} m={m}: {v}");
                        }
                    }
                }
            }
        }
        // just below the threshold the shell need not vanish
        let f = StepFunction::unit_ball(2).unwrap();
        let v = naive_unit_shell(&f, &rat(1, 8), 2, 3);
        assert!(v.norm() > 0.1);
    }

    #[test]
    fn unit_ball_character_orthogonality() {
        for p in [2u64, 3, 7] {
            let f = step(StepFunction::unit_ball(p).unwrap());
            for (a, expect) in [(rat(5, 1), 1.0), (rat(1, p as i128), 0.0), (rat(3, (p * p) as i128), 0.0)] {
                let r = osc_integral_1d(Place::Finite(p), &f, &LocalScalar::Rational(a), 1, c(1.0)).unwrap();
                assert!((r.value - c(expect)).norm() < 1e-14, "p={p} a={a}");
                assert_eq!(r.exactness, Exactness::Exact);
            }
        }
    }

    /// Oracle for finite shells: sum the shell `|x| = p^{-j}` over residues of `p^j u` directly.
    fn naive_finite(f: &StepFunction, a: &Rational, d: u32, s: Complex64, jmax: i64) -> Complex64 {
        let p = f.p();
        let k = f.support() as i64;
        let mut acc = c(0.0);
        for j in -k..jmax {
            let level = 10u32.min((f.level() as i64 - j).max(1) as u32 + 4);
            let pl = p.pow(level);
            let pj = Rational::from_integer(p as i128).pow(j as i32);
            let mut sh = c(0.0);
            for u in (1..pl).filter(|u| u % p != 0) {
                let x = pj * Rational::from_integer(u as i128);
                sh += f.eval(&x) * crate::localfield::psi(Place::Finite(p), &(a * x.pow(d as i32)));
            }
            acc += sh / pl as f64 * p_pow(p, -s * j as f64);
        }
        // beyond jmax the phase is trivial and Φ is constant
        let pf = p as f64;
        acc + f.at_zero() * (1.0 - 1.0 / pf) * p_pow(p, -s * jmax as f64) / (1.0 - p_pow(p, -s))
    }

    #[test]
    fn finite_shells_match_direct_sums() {
        let p = 3u64;
        let f = StepFunction::from_fn(p, 2, 1, |r| Complex64::new((r % 5) as f64, (r % 2) as f64)).unwrap();
        for (a, d, s) in [(rat(1, 27), 1u32, c(1.0)), (rat(2, 9), 2, Complex64::new(0.7, 1.3)), (rat(1, 81), 3, c(2.0))] {
            let got = osc_integral_1d(Place::Finite(p), &step(f.clone()), &LocalScalar::Rational(a), d, s).unwrap();
            let want = naive_finite(&f, &a, d, s, 6);
            assert!((got.value - want).norm() < 1e-11, "a={a} d={d}: {} vs {}", got.value, want);
        }
    }

    #[test]
    fn zero_phase_is_the_plain_integral() {
        let f = StepFunction::from_fn(5, 2, 1, |r| c(((r * 7) % 11) as f64)).unwrap();
        let s = Complex64::new(0.8, -0.4);
        let got = osc_integral_1d(Place::Finite(5), &step(f.clone()), &LocalScalar::Rational(rat(0, 1)), 2, s).unwrap();
        assert!((got.value - step_weighted_integral(&f.canonical(), s)).norm() < 1e-13);
        let tate = tate_integral(Place::Finite(5), &step(f), s).unwrap() * (1.0 - 0.2);
        assert!((got.value - tate).norm() < 1e-12);

        let b = TestFunction::Bump(BumpFunction::new(0.2, 0.9, 1.3).unwrap());
        let got = osc_integral_1d(Place::Real, &b, &LocalScalar::Real(0.0), 2, s).unwrap();
        let tate = tate_integral(Place::Real, &b, s).unwrap();
        assert!((got.value - tate).norm() < 1e-10);
        let got = osc_integral_1d(Place::Complex, &b, &LocalScalar::Real(0.0), 2, s).unwrap();
        let tate = tate_integral(Place::Complex, &b, s).unwrap();
        assert!((got.value - tate).norm() < 1e-10);
    }

    #[test]
    fn refinement_is_bit_identical() {
        let f = StepFunction::from_fn(2, 3, 1, |r| c(((r * 5) % 3) as f64)).unwrap();
        let g = f.refine().refine();
        let a = LocalScalar::Rational(rat(3, 64));
        let s = Complex64::new(1.5, 0.5);
        let x = osc_integral_1d(Place::Finite(2), &step(f.clone()), &a, 2, s).unwrap();
        let y = osc_integral_1d(Place::Finite(2), &step(g.clone()), &a, 2, s).unwrap();
        assert_eq!(x.value, y.value);
        let x = inverse_phase_integral(Place::Finite(2), &step(f), &a, 1, s, InverseOptions::default()).unwrap();
        let y = inverse_phase_integral(Place::Finite(2), &step(g), &a, 1, s, InverseOptions::default()).unwrap();
        assert_eq!(x.value, y.value);
    }

    #[test]
    fn two_dimensional_finite_matches_brute_force() {
        let one = step(StepFunction::unit_ball(3).unwrap());
        let r = osc_integral_nd(
            Place::Finite(3),
            &[one.clone(), one.clone()],
            &LocalScalar::Rational(rat(1, 3)),
            &[1, 1],
            &[c(1.0), c(1.0)],
        )
        .unwrap();
        let mut brute = c(0.0);
        for x in 0..9i128 {
            for y in 0..9i128 {
                brute += root_of_unity(x * y, 3);
            }
        }
        brute /= 81.0;
        assert!((r.value - brute).norm() < 1e-14);
        assert!((r.value - c(1.0 / 3.0)).norm() < 1e-14);

        // a general pair of step functions on ℤ_2 with |a| = 8
        let f = StepFunction::from_fn(2, 2, 0, |r| c(1.0 + r as f64)).unwrap();
        let g = StepFunction::from_fn(2, 3, 0, |r| c((r % 3) as f64)).unwrap();
        let a = rat(5, 8);
        let r = osc_integral_nd(
            Place::Finite(2),
            &[step(f.clone()), step(g.clone())],
            &LocalScalar::Rational(a),
            &[1, 2],
            &[c(1.0), c(1.0)],
        )
        .unwrap();
        let mut brute = c(0.0);
        let pl = 64i128;
        for x in 0..pl {
            for y in 0..pl {
                let xr = Rational::from_integer(x);
                let yr = Rational::from_integer(y);
                let ph = crate::localfield::psi(Place::Finite(2), &(a * xr * yr * yr));
                brute += f.eval(&xr) * g.eval(&yr) * ph;
            }
        }
        brute /= (pl * pl) as f64;
        assert!((r.value - brute).norm() < 1e-12, "{} vs {}", r.value, brute);
    }

    #[test]
    fn separable_when_a_is_zero() {
        let f = StepFunction::unit_ball(5).unwrap();
        let s = [c(2.0), c(3.0)];
        let r = osc_integral_nd(Place::Finite(5), &[step(f.clone()), step(f)], &LocalScalar::Rational(rat(0, 1)), &[1, 2], &s)
            .unwrap();
        let z = |x: f64| (1.0 - 0.2) / (1.0 - 5f64.powf(-x));
        assert!((r.value - c(z(2.0) * z(3.0))).norm() < 1e-14);
    }

    /// Midpoint rule on a fine grid; exact enough for flat bumps and moderate `a`.
    fn midpoint<F: Fn(f64) -> Complex64>(f: F, lo: f64, hi: f64, n: usize) -> Complex64 {
        let h = (hi - lo) / n as f64;
        (0..n).map(|i| f(lo + h * (i as f64 + 0.5))).sum::<Complex64>() * h
    }

    #[test]
    fn real_integrals_match_direct_quadrature() {
        let b = BumpFunction::new(0.1, 0.8, 1.0).unwrap();
        let tf = TestFunction::Bump(b.clone());
        for (a, d, s) in [(3.0, 1u32, c(1.0)), (-7.5, 2, c(1.0)), (12.0, 3, Complex64::new(1.5, 0.4)), (40.0, 2, c(2.0))] {
            let got = osc_integral_1d(Place::Real, &tf, &LocalScalar::Real(a), d, s).unwrap();
            let f = |x: f64| c(x.abs()).powc(s - 1.0) * psi_real(a * x.powi(d as i32)) * b.eval(x);
            let want = midpoint(f, -0.7, 0.9, 400_000);
            assert!((got.value - want).norm() < 1e-8, "a={a} d={d}: {} vs {}", got.value, want);
        }
        // d = 1, s = 1 is the Fourier transform
        let got = osc_integral_1d(Place::Real, &tf, &LocalScalar::Real(2.5), 1, c(1.0)).unwrap();
        assert!((got.value - b.fourier(2.5)).norm() < 1e-10);
    }

    #[test]
    fn singular_weight_matches_closed_form_scaling() {
        // ∫ |x|^{s-1} ψ(a x^2) Φ dx ~ Γ(s/2) (2π|a|)^{-s/2} e^{-iπs/4} Φ(0) for large a > 0
        let b = TestFunction::Bump(BumpFunction::standard());
        let s = c(0.5);
        let a = 1e6;
        let got = osc_integral_1d(Place::Real, &b, &LocalScalar::Real(a), 2, s).unwrap();
        let gamma_quarter = 3.625_609_908_221_908;
        let want = Complex64::from_polar(gamma_quarter * (2.0 * PI * a).powf(-0.25), -PI * 0.5 / 4.0);
        assert!((got.value - want).norm() < 1e-3 * want.norm(), "{} vs {}", got.value, want);
    }

    #[test]
    fn complex_place_matches_planar_sum() {
        let b = BumpFunction::new(0.0, 1.0, 1.0).unwrap();
        let tf = TestFunction::Bump(b.clone());
        let a = Complex64::new(0.6, -0.9);
        for d in [1u32, 2] {
            let got = osc_integral_1d(Place::Complex, &tf, &LocalScalar::Complex(a), d, c(1.0)).unwrap();
            let n = 800;
            let h = 2.0 / n as f64;
            let mut want = c(0.0);
            for i in 0..n {
                for j in 0..n {
                    let z = Complex64::new(-1.0 + h * (i as f64 + 0.5), -1.0 + h * (j as f64 + 0.5));
                    let v = b.eval(z.norm());
                    if v != 0.0 {
                        want += crate::localfield::psi_complex(a * z.powu(d)) * v;
                    }
                }
            }
            want *= 2.0 * h * h;
            assert!((got.value - want).norm() < 1e-7, "d={d}: {} vs {}", got.value, want);
        }
    }

    #[test]
    fn real_nd_matches_iterated_midpoint() {
        let b = BumpFunction::new(0.0, 1.0, 1.0).unwrap();
        let tf = TestFunction::Bump(b.clone());
        let a = 6.0;
        let got = osc_integral_nd(Place::Real, &[tf.clone(), tf], &LocalScalar::Real(a), &[1, 2], &[c(1.0), c(1.0)]).unwrap();
        let n = 1500;
        let h = 2.0 / n as f64;
        let mut want = c(0.0);
        for i in 0..n {
            let x = -1.0 + h * (i as f64 + 0.5);
            for j in 0..n {
                let y = -1.0 + h * (j as f64 + 0.5);
                want += psi_real(a * x * y * y) * (b.eval(x) * b.eval(y));
            }
        }
        want *= h * h;
        assert!((got.value - want).norm() < 1e-8, "{} vs {}", got.value, want);
    }

    #[test]
    fn inverse_phase_finite_closed_form() {
        // Φ = 1_{ℤ_p}, d = 1, s = 1: shell j contributes p^{-j} times
        // (1 - 1/p, -1/p, 0) according as E = e + j is ≤ 0, = 1, ≥ 2.
        for p in [2u64, 3, 5] {
            for e in [-3i32, 0, 1, 2, 5] {
                let a = Rational::from_integer(p as i128).pow(-e) * rat(if p == 2 { 3 } else { 2 }, 1);
                let f = step(StepFunction::unit_ball(p).unwrap());
                let got = inverse_phase_integral(Place::Finite(p), &f, &LocalScalar::Rational(a), 1, c(1.0), InverseOptions::default())
                    .unwrap();
                let pf = p as f64;
                let mut want = 0.0;
                for j in 0..40 {
                    let big_e = e as i64 + j;
                    let unit = if big_e <= 0 { 1.0 - 1.0 / pf } else if big_e == 1 { -1.0 / pf } else { 0.0 };
                    want += pf.powi(-(j as i32)) * unit;
                }
                assert!((got.value - c(want)).norm() < 1e-13, "p={p} e={e}");
            }
        }
    }

    #[test]
    fn inverse_phase_away_from_origin_is_plain_quadrature() {
        let b = BumpFunction::new(1.2, 0.5, 1.0).unwrap();
        let tf = TestFunction::Bump(b.clone());
        for (a, d, s) in [(3.0, 1u32, c(1.0)), (-20.0, 2, Complex64::new(0.5, 1.0))] {
            let got = inverse_phase_integral(Place::Real, &tf, &LocalScalar::Real(a), d, s, InverseOptions::default()).unwrap();
            let f = |x: f64| c(x).powc(s - 1.0) * psi_real(a / x.powi(d as i32)) * b.eval(x);
            let want = midpoint(f, 0.7, 1.7, 200_000);
            assert!((got.value - want).norm() < 1e-9, "a={a}: {} vs {}", got.value, want);
        }
    }

    #[test]
    fn inverse_phase_below_zero_decays() {
        let tf = TestFunction::Bump(BumpFunction::standard());
        let s = c(-0.5);
        let vals: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&a| {
                inverse_phase_integral(Place::Real, &tf, &LocalScalar::Real(a), 1, s, InverseOptions::default())
                    .unwrap()
                    .value
                    .norm()
            })
            .collect();
        assert!(vals.iter().all(|v| v.is_finite()));
        assert!(vals[1] < vals[0] * 0.2 && vals[2] < vals[1] * 0.2, "{vals:?}");
    }

    #[test]
    fn power_exp_tail_matches_closed_forms() {
        // ν = 2: ∫_1^∞ r^{-2} e^{iωr} dr against a long Filon integration
        let nu = c(2.0);
        for w in [0.7, -3.0, 25.0] {
            let got = power_exp_tail(nu, w).unwrap();
            let brk = quad::geometric_breaks(1.0, 1e6, 1.5);
            let direct = quad::filon(|r| c(r.powi(-2)), -w, &brk, QuadOptions::default()).value;
            // remaining tail beyond 1e6 is O(1e-12)
            assert!((got - direct).norm() < 1e-9, "w={w}: {got} vs {direct}");
        }
        assert!((power_exp_tail(c(3.0), 0.0).unwrap() - c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn decay_report_for_quadratic_phase() {
        let tf = TestFunction::Bump(BumpFunction::standard());
        let grid: Vec<f64> = (1..=6).map(|k| 10f64.powi(k)).collect();
        let r = decay_report(Place::Real, &[tf], &[2], &[c(1.0)], &grid).unwrap();
        assert!(r.envelope_holds());
        assert!((r.fitted_exponent - 0.5).abs() < 0.05, "{}", r.fitted_exponent);
        assert!(r.stability_ratio < 10.0);
        assert!(r.to_csv().lines().count() == 7);
    }

    #[test]
    fn rejects_bad_input() {
        let tf = TestFunction::Bump(BumpFunction::standard());
        assert!(matches!(osc_integral_1d(Place::Real, &tf, &LocalScalar::Real(1.0), 1, c(0.0)), Err(Error::NonConvergence(_))));
        assert!(inverse_phase_integral(Place::Real, &tf, &LocalScalar::Real(0.0), 1, c(1.0), InverseOptions::default()).is_err());
        assert!(osc_integral_1d(Place::Finite(3), &tf, &LocalScalar::Real(1.0), 1, c(1.0)).is_err());
    }
}
