//! Local Fourier transforms of heights, Euler products and the leading constant Θ.
//!
//! All catalog models are products of projective spaces, so every local integral
//! factors over the projective factors. For one factor `ℙ^n` with exponent `t` the
//! building blocks are
//!
//! * at `p`: Denef's stratum sum, or for a nontrivial character the exact shell sum
//!   `Σ_k p^{-kt} ∫_{|x| = p^k} ψ(⟨a, x⟩) dx` (the shell integrals are lattice volumes);
//! * at ∞: `t ∫_1^∞ r^{-t-1} S(r) dr` with `S(r) = ∫_{|x|≤r} ψ(⟨a,x⟩) dx` a product of
//!   sines, expanded into exponentials and integrated by contour rotation.

use crate::arith::{neville_to_zero, primes_up_to, riemann_zeta, ComplexSum};
use crate::boundary::{clemens_complex, exponent_b, subsets};
use crate::catalog::{projective_count, CompactificationModel, Metric};
use crate::error::{Error, Result};
use crate::localfield::{rat_to_f64, residue_c, PadicContext, Place, Rational};
use crate::oscillatory::power_exp_tail;
use crate::quad::{self, QuadOptions};
use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn ppow(p: u64, x: Complex64) -> Complex64 {
    (x * (p as f64).ln()).exp()
}

/// `p^x - 1`, refusing the poles `x ∈ (2πi/log p) ℤ`.
fn pole_checked(p: u64, x: Complex64) -> Result<Complex64> {
    let turns = x.im * (p as f64).ln() / (2.0 * PI);
    if x.re == 0.0 && (turns - turns.round()).abs() < 1e-12 {
        return Err(Error::Pole(format!("p^({x}) = 1 at p = {p}")));
    }
    Ok(ppow(p, x) - 1.0)
}

fn check_exponents(model: &CompactificationModel, s: &[Complex64]) -> Result<()> {
    if s.len() != model.rank() {
        return Err(Error::Invalid(format!("{} needs {} exponents, got {}", model.id, model.rank(), s.len())));
    }
    Ok(())
}

/// `s λ` as an exponent vector.
pub fn along_lambda(model: &CompactificationModel, s: Complex64) -> Vec<Complex64> {
    model.lambda().iter().map(|&l| s * l as f64).collect()
}

// ---------------------------------------------------------------------------
// finite places, trivial character

/// `Ĥ_p(0; s)` with the integrality condition at `p`: Denef's formula
/// `p^{-n} Σ_{A ⊆ 𝒜∖𝒜_D} #D_A^∘(𝔽_p) ∏_{α ∈ A} (p-1)/(p^{s_α-ρ_α+1} - 1)`.
pub fn denef_density(model: &CompactificationModel, p: u64, s: &[Complex64]) -> Result<Complex64> {
    denef_sum(model, p, s, true)
}

/// `Ĥ_p(0; s)` without the integrality condition (places in `S`): the sum runs over all `A ⊆ 𝒜`.
pub fn denef_density_unrestricted(model: &CompactificationModel, p: u64, s: &[Complex64]) -> Result<Complex64> {
    denef_sum(model, p, s, false)
}

fn denef_sum(model: &CompactificationModel, p: u64, s: &[Complex64], restricted: bool) -> Result<Complex64> {
    PadicContext::new(p)?;
    check_exponents(model, s)?;
    let ds = model.divisor_scheme();
    let allowed: Vec<usize> = if restricted { ds.open_indices() } else { (0..ds.len()).collect() };
    for &a in &allowed {
        if s[a].re <= ds.rho[a] as f64 - 1.0 {
            return Err(Error::NonConvergence(format!("need Re s_{} > {}", a + 1, ds.rho[a] - 1)));
        }
    }
    let pf = p as f64;
    let mut acc = ComplexSum::default();
    for a in subsets(&allowed) {
        let mut term = c(model.stratum_counts(p, &a)? as f64);
        for &alpha in &a {
            term *= (pf - 1.0) / pole_checked(p, s[alpha] - ds.rho[alpha] as f64 + 1.0)?;
        }
        acc.add(term);
    }
    Ok(acc.value() * pf.powi(-(model.dim() as i32)))
}

/// The Denef sum as text, with `p` substituted and `s_α` symbolic.
pub fn denef_formula(model: &CompactificationModel, p: u64, restricted: bool) -> Result<String> {
    let ds = model.divisor_scheme();
    let allowed: Vec<usize> = if restricted { ds.open_indices() } else { (0..ds.len()).collect() };
    let mut terms = Vec::new();
    for a in subsets(&allowed) {
        let mut t = format!("{}", model.stratum_counts(p, &a)?);
        for &alpha in &a {
            let shift = ds.rho[alpha] as i64 - 1;
            t.push_str(&format!(" * {}/({p}^(s{} - {shift}) - 1)", p - 1, alpha + 1));
        }
        terms.push(t);
    }
    Ok(format!("{p}^-{} * [{}]", model.dim(), terms.join(" + ")))
}

/// Independent check of the Denef sum: integrates each factor over the classes of
/// `ℙ^n(ℤ/p^m)`. In normalized coordinates `(X_0 : … : X_n)` of `x`, the integrand
/// `max(1,|x|)^{-s} dx` is `|X_0|^{s-n-1}` times the standard measure, constant on
/// classes with `X_0 ≢ 0`; classes with `X_0 ≡ 0 (mod p^m)` are summed as a geometric tail.
pub fn brute_density_oracle(model: &CompactificationModel, p: u64, s: &[Complex64], m: u32, restricted: bool) -> Result<Complex64> {
    PadicContext::new(p)?;
    check_exponents(model, s)?;
    if m < 2 {
        return Err(Error::Invalid("depth must be at least 2".into()));
    }
    let mut total = c(1.0);
    for (j, f) in model.factors.iter().enumerate() {
        let need = m as u64 * f.dim as u64;
        if (p as f64).powi(need as i32) > 5e7 {
            return Err(Error::DepthOverflow { needed: need as u32, ceiling: (5e7f64.ln() / (p as f64).ln()) as u32 });
        }
        if !(restricted && f.in_d) && s[j].re <= f.dim as f64 {
            return Err(Error::NonConvergence(format!("need Re s_{} > {}", j + 1, f.dim)));
        }
        total *= factor_oracle(p, f.dim, s[j], m, restricted && f.in_d);
    }
    Ok(total)
}

fn factor_oracle(p: u64, n: usize, s: Complex64, m: u32, integral_only: bool) -> Complex64 {
    let pm = p.pow(m);
    let t = s - (n as f64 + 1.0);
    let pf = p as f64;
    let cell = pf.powi(-(m as i32 * n as i32));
    let deep = pf.powi(-(m as i32 * (n as i32 - 1))) * (1.0 - 1.0 / pf) * ppow(p, -(t + 1.0) * m as f64)
        / (1.0 - ppow(p, -(t + 1.0)));
    let mut acc = ComplexSum::default();
    // first unit coordinate i is normalized to 1; earlier ones are nonunits
    for i in 0..=n {
        let choices: Vec<u64> = (0..=n).map(|l| if l < i { pm / p } else if l == i { 1 } else { pm }).collect();
        let mut idx = vec![0u64; n + 1];
        'odometer: loop {
            let x0 = if i == 0 { 1 } else { idx[0] * p };
            if !(integral_only && x0 % p == 0) {
                if x0 % pm == 0 {
                    acc.add(deep);
                } else {
                    let mut v = 0;
                    let mut q = x0;
                    while q % p == 0 {
                        q /= p;
                        v += 1;
                    }
                    acc.add(ppow(p, -t * v as f64) * cell);
                }
            }
            for l in 0..=n {
                idx[l] += 1;
                if idx[l] < choices[l] {
                    continue 'odometer;
                }
                idx[l] = 0;
            }
            break;
        }
    }
    acc.value()
}

// ---------------------------------------------------------------------------
// finite places, nontrivial characters

/// `Ĥ_p(a; s) = ∫ δ_p(x) ∏ ‖f_α‖_p^{s_α} ψ_p(⟨a, x⟩) dx`, exactly.
///
/// On a factor `ℙ^n` outside `D` the shell `|x| = p^k` contributes
/// `p^{-ks}(vol(p^{-k}ℤ_p^n ∩ a^⊥-lattice) - …)`: the character integrates to the volume of
/// `p^{-k}ℤ_p^n` when `p^{-k} a ∈ ℤ_p^n` and to zero otherwise.
pub fn fourier_finite(model: &CompactificationModel, p: u64, a: &[Rational], s: &[Complex64], restricted: bool) -> Result<Complex64> {
    let ctx = PadicContext::new(p)?;
    check_exponents(model, s)?;
    if a.len() != model.dim() {
        return Err(Error::Invalid(format!("{} expects {} character coordinates", model.id, model.dim())));
    }
    let pf = p as f64;
    let mut total = c(1.0);
    for ((j, f), range) in model.factors.iter().enumerate().zip(model.coordinate_ranges()) {
        let aj = &a[range];
        let n = f.dim as i32;
        let integral_only = restricted && f.in_d;
        let v = aj.iter().filter_map(|x| ctx.valuation(x)).min();
        let factor = match v {
            None => {
                if integral_only {
                    c(1.0)
                } else {
                    if s[j].re <= n as f64 {
                        return Err(Error::NonConvergence(format!("need Re s_{} > {n}", j + 1)));
                    }
                    let x = ppow(p, c(n as f64) - s[j]);
                    1.0 + (1.0 - pf.powi(-n)) * x / (1.0 - x)
                }
            }
            Some(v) if v < 0 => return Ok(c(0.0)),
            Some(v) => {
                if integral_only {
                    c(1.0)
                } else {
                    let mut acc = ComplexSum::default();
                    acc.add(c(1.0));
                    for k in 1..=v {
                        let vol = pf.powi(k as i32 * n) - pf.powi((k as i32 - 1) * n);
                        acc.add(ppow(p, -s[j] * k as f64) * vol);
                    }
                    acc.add(-ppow(p, -s[j] * (v + 1) as f64) * pf.powi(v as i32 * n));
                    acc.value()
                }
            }
        };
        total *= factor;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// the real place

/// A density value with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityValue {
    pub value: Complex64,
    pub error: f64,
}

/// `∫_{ℝ^n} max(1, |x|_∞)^{-t} e^{-2πi⟨a,x⟩} dx` for `Re t > n`.
pub fn arch_factor_density(a: &[f64], t: Complex64) -> Result<DensityValue> {
    let n = a.len();
    if t.re <= n as f64 {
        return Err(Error::NonConvergence(format!("need Re t > {n}, got {t}")));
    }
    let nonzero: Vec<f64> = a.iter().cloned().filter(|x| *x != 0.0).collect();
    let z = (n - nonzero.len()) as f64;
    let mut acc = ComplexSum::default();
    let mut err = 0.0;
    // sin(2πar)/(πa) = (e^{2πiar} - e^{-2πiar}) / (2πi a)
    for mask in 0..1usize << nonzero.len() {
        let mut coef = Complex64::new(2f64.powf(z), 0.0);
        let mut omega = 0.0;
        for (i, ai) in nonzero.iter().enumerate() {
            let sign = if mask >> i & 1 == 0 { 1.0 } else { -1.0 };
            coef *= sign / Complex64::new(0.0, 2.0 * PI * ai);
            omega += sign * 2.0 * PI * ai;
        }
        if omega.abs() < 1e-14 * (1.0 + nonzero.iter().map(|x| x.abs()).sum::<f64>()) {
            omega = 0.0;
        }
        let e = power_exp_tail(t + 1.0 - z, omega)?;
        let term = coef * t * e;
        if omega != 0.0 {
            err += 1e-12 * term.norm();
        }
        acc.add(term);
    }
    Ok(DensityValue { value: acc.value(), error: err })
}

/// `∫_{ℝ^n} (1 + Σ|x_i|^{2k})^{-t/2k} dx = n V_n (1/2k) B(n/2k, (t-n)/2k)`,
/// `V_n = (2Γ(1 + 1/2k))^n / Γ(1 + n/2k)` the volume of the unit `ℓ^{2k}` ball.
pub fn smoothed_factor_density(n: usize, k: u32, t: f64) -> Result<f64> {
    if t <= n as f64 {
        return Err(Error::NonConvergence(format!("need t > {n}, got {t}")));
    }
    let q = 2.0 * k as f64;
    let nf = n as f64;
    let ln_v = nf * (2.0f64.ln() + ln_gamma(1.0 + 1.0 / q)) - ln_gamma(1.0 + nf / q);
    let ln_b = ln_gamma(nf / q) + ln_gamma((t - nf) / q) - ln_gamma(t / q);
    Ok(nf / q * (ln_v + ln_b).exp())
}

/// `Ĥ_∞(a; sλ) = ∫_{ℝ^n} ∏ ‖f_α‖^{sλ_α} ψ(⟨a, x⟩) dx`.
pub fn arch_density(model: &CompactificationModel, a: &[f64], s: Complex64) -> Result<DensityValue> {
    arch_density_vec(model, a, &along_lambda(model, s))
}

/// As [`arch_density`] with an arbitrary exponent vector.
pub fn arch_density_vec(model: &CompactificationModel, a: &[f64], s: &[Complex64]) -> Result<DensityValue> {
    check_exponents(model, s)?;
    if a.len() != model.dim() {
        return Err(Error::Invalid(format!("{} expects {} character coordinates", model.id, model.dim())));
    }
    let mut value = c(1.0);
    let mut rel = 0.0;
    for ((f, range), t) in model.factors.iter().zip(model.coordinate_ranges()).zip(s) {
        let aj = &a[range];
        let d = match model.metric {
            Metric::Max => arch_factor_density(aj, *t)?,
            Metric::Smoothed { k } => {
                if aj.iter().any(|x| *x != 0.0) || t.im != 0.0 {
                    return Err(Error::Unsupported(
                        "the smoothed metric supports the trivial character at real s only".into(),
                    ));
                }
                DensityValue { value: c(smoothed_factor_density(f.dim, k, t.re)?), error: 0.0 }
            }
        };
        rel += d.error / d.value.norm().max(1e-300);
        value *= d.value;
    }
    Ok(DensityValue { value, error: rel * value.norm() })
}

// ---------------------------------------------------------------------------
// local density records

/// `Ĥ_v(a; sλ)` on a grid of `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDensity {
    pub model: String,
    pub place: Place,
    pub a: Vec<String>,
    pub s: Vec<Complex64>,
    pub values: Vec<Complex64>,
    pub exact: bool,
    pub error: f64,
    /// Denef's sum as a rational function of `p^{-s}`, for the trivial character at `p`.
    pub rational_function: Option<String>,
}

/// Local density of `model` at `place` along `sλ` for every `s` in the grid. At finite
/// places `restricted` applies the integrality condition `δ_p`.
pub fn local_density(
    model: &CompactificationModel,
    place: Place,
    a: &[Rational],
    s_grid: &[Complex64],
    restricted: bool,
) -> Result<LocalDensity> {
    if s_grid.is_empty() {
        return Err(Error::Invalid("empty s grid".into()));
    }
    let trivial = a.iter().all(|x| x.is_zero());
    let mut values = Vec::new();
    let mut error = 0.0f64;
    let (exact, rational_function) = match place {
        Place::Finite(p) => {
            for &s in s_grid {
                let sv = along_lambda(model, s);
                values.push(if trivial {
                    denef_sum(model, p, &sv, restricted)?
                } else {
                    fourier_finite(model, p, a, &sv, restricted)?
                });
            }
            (true, if trivial { Some(denef_formula(model, p, restricted)?) } else { None })
        }
        Place::Real => {
            let af: Vec<f64> = a.iter().map(rat_to_f64).collect();
            for &s in s_grid {
                let d = arch_density(model, &af, s)?;
                error = error.max(d.error);
                values.push(d.value);
            }
            (false, None)
        }
        Place::Complex => return Err(Error::Unsupported("catalog models live over Q".into())),
    };
    Ok(LocalDensity {
        model: model.id.clone(),
        place,
        a: a.iter().map(|x| x.to_string()).collect(),
        s: s_grid.to_vec(),
        values,
        exact,
        error,
        rational_function,
    })
}

// ---------------------------------------------------------------------------
// Euler products and Θ

/// Regularized Euler product `∏_{p ∉ S, p ≤ P} φ_p(s)` with `φ_p = Ĥ_p ∏_{α ∉ 𝒜_D}(1 - p^{-(sλ_α-ρ_α+1)})`,
/// and the same product multiplied by the convergence factors `∏ ζ^S(sλ_α - ρ_α + 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerProductValue {
    pub truncation: u64,
    pub partial_product: f64,
    /// `∏_{α ∉ 𝒜_D} ζ^S(sλ_α - ρ_α + 1)`; absent at a pole.
    pub convergence_factor: Option<f64>,
    pub corrected: Option<f64>,
    /// `|V(P) - V(P/2)|` for the partial product.
    pub tail_estimate: f64,
}

pub(crate) fn finite_places(s_places: &[Place]) -> Vec<u64> {
    s_places.iter().filter_map(|v| v.prime()).collect()
}

pub(crate) fn check_s_places(s_places: &[Place]) -> Result<()> {
    if !s_places.contains(&Place::Real) {
        return Err(Error::Invalid("S must contain the real place".into()));
    }
    if s_places.contains(&Place::Complex) {
        return Err(Error::Invalid("places of Q are real or finite".into()));
    }
    Ok(())
}

/// `ζ^S(x) = ζ(x) ∏_{p ∈ S} (1 - p^{-x})`.
pub fn partial_zeta(x: f64, primes: &[u64]) -> f64 {
    primes.iter().fold(riemann_zeta(x), |acc, &p| acc * (1.0 - (p as f64).powf(-x)))
}

pub fn euler_product(model: &CompactificationModel, s_places: &[Place], s: f64, truncation: u64) -> Result<EulerProductValue> {
    check_s_places(s_places)?;
    let bad = finite_places(s_places);
    let ds = model.divisor_scheme();
    let open = ds.open_indices();
    let lam = model.lambda();
    let sv = along_lambda(model, c(s));
    let primes: Vec<u64> = primes_up_to(truncation).into_iter().filter(|p| !bad.contains(p)).collect();
    let factors: Vec<Result<f64>> = primes
        .par_iter()
        .map(|&p| {
            let h = denef_density(model, p, &sv)?.re;
            let reg: f64 =
                open.iter().map(|&a| 1.0 - (p as f64).powf(-(s * lam[a] as f64 - ds.rho[a] as f64 + 1.0))).product();
            Ok(h * reg)
        })
        .collect();
    let factors: Vec<f64> = factors.into_iter().collect::<Result<_>>()?;
    let mut full = 1.0;
    let mut half = 1.0;
    for (p, f) in primes.iter().zip(&factors) {
        full *= f;
        if *p <= truncation / 2 {
            half *= f;
        }
    }
    let mut conv = Some(1.0);
    for &a in &open {
        let x = s * lam[a] as f64 - ds.rho[a] as f64 + 1.0;
        conv = match conv {
            Some(v) if x > 0.0 && (x - 1.0).abs() > 1e-14 => Some(v * partial_zeta(x, &bad)),
            _ => None,
        };
    }
    Ok(EulerProductValue {
        truncation,
        partial_product: full,
        convergence_factor: conv,
        corrected: conv.map(|v| v * full),
        tail_estimate: (full - half).abs(),
    })
}

/// `Ĥ(0; sλ)` for real `s > 1`: archimedean and `S`-adic factors times the Euler product.
pub fn height_transform_at_zero(
    model: &CompactificationModel,
    s_places: &[Place],
    s: f64,
    truncation: u64,
) -> Result<(f64, EulerProductValue)> {
    check_s_places(s_places)?;
    let zeros = vec![0.0; model.dim()];
    let mut value = arch_density(model, &zeros, c(s))?.value.re;
    let sv = along_lambda(model, c(s));
    for p in finite_places(s_places) {
        value *= denef_density_unrestricted(model, p, &sv)?.re;
    }
    let euler = euler_product(model, s_places, s, truncation)?;
    let corrected = euler.corrected.ok_or(Error::Pole(format!("Euler product at s = {s}")))?;
    Ok((value * corrected, euler))
}

#[derive(Clone, Debug)]
pub struct ThetaOptions {
    pub truncation: u64,
    pub eps: Vec<f64>,
    /// Relative disagreement of the last two extrapolants that counts as unstable.
    pub instability: f64,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        Self { truncation: 10_000, eps: vec![0.1, 0.05, 0.02, 0.01], instability: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    pub model: String,
    pub places: Vec<Place>,
    pub b: usize,
    pub theta: f64,
    pub eps: Vec<f64>,
    /// `ε^b Ĥ(0; (1+ε)λ)` at each `ε`.
    pub samples: Vec<f64>,
    /// Extrapolants to `ε = 0` using the first `k+1` samples.
    pub extrapolants: Vec<f64>,
    pub unstable: bool,
    /// Euler product at the smallest `ε`.
    pub euler: EulerProductValue,
    /// Effect of the Euler-product tail on Θ.
    pub tail_bound: f64,
}

/// `Θ = lim_{s→1+} (s-1)^b Ĥ(0; sλ) / (b-1)!`.
pub fn theta_constant(model: &CompactificationModel, s_places: &[Place]) -> Result<ThetaReport> {
    theta_constant_with(model, s_places, &ThetaOptions::default())
}

pub fn theta_constant_with(model: &CompactificationModel, s_places: &[Place], opts: &ThetaOptions) -> Result<ThetaReport> {
    if opts.eps.len() < 2 {
        return Err(Error::Invalid("need at least two extrapolation points".into()));
    }
    let b = exponent_b(model, s_places)?;
    let mut samples = Vec::new();
    let mut euler = None;
    let mut rel_tail = 0.0f64;
    for &e in &opts.eps {
        let (h, ep) = height_transform_at_zero(model, s_places, 1.0 + e, opts.truncation)?;
        samples.push(e.powi(b as i32) * h);
        rel_tail = rel_tail.max(ep.tail_estimate / ep.partial_product.abs());
        euler = Some(ep);
    }
    let extrapolants = neville_to_zero(&opts.eps, &samples);
    let fact: f64 = (1..b).map(|k| k as f64).product();
    let last = extrapolants[extrapolants.len() - 1];
    let prev = extrapolants[extrapolants.len() - 2];
    let theta = last / fact;
    let unstable = (last - prev).abs() > opts.instability * last.abs();
    Ok(ThetaReport {
        model: model.id.clone(),
        places: s_places.to_vec(),
        b,
        theta,
        eps: opts.eps.clone(),
        samples,
        extrapolants,
        unstable,
        euler: euler.expect("at least one sample"),
        tail_bound: rel_tail * theta.abs(),
    })
}

/// `vol_τ(ℙ^m(F_v))` for the anticanonical max-metric: `∫_{F_v^m} max(1,|x|)^{-(m+1)} dx`.
/// At ∞ the integral is evaluated numerically in the sup-norm radius.
pub fn projective_volume(m: usize, place: Place) -> Result<f64> {
    match place {
        Place::Finite(p) => Ok(projective_count(p, m) as f64 / (p as f64).powi(m as i32)),
        Place::Real => {
            if m == 0 {
                return Ok(1.0);
            }
            // ∫_0^∞ m 2^m ρ^{m-1} max(1,ρ)^{-(m+1)} dρ, with ρ = 1/u beyond 1
            let mf = m as f64;
            let k = mf * 2f64.powi(m as i32);
            let opts = QuadOptions::default();
            let inner = quad::integrate_real(|r| k * r.powf(mf - 1.0), &[0.0, 1.0], opts);
            let outer = quad::integrate_real(|_| k, &[0.0, 1.0], opts);
            Ok(inner.value.re + outer.value.re)
        }
        Place::Complex => Err(Error::Unsupported("catalog models live over Q".into())),
    }
}

/// `τ_v^max(D(F_v))`: over the maximal faces `A` of the Clemens complex,
/// `∏_{α ∈ A} c_v u_v vol_τ(D_α ∩ ·)/(ρ_α - 1)` times `vol_τ` of the remaining factors,
/// with `u_∞ = 1` and `u_p = 1 - 1/p`.
pub fn tau_max_boundary(model: &CompactificationModel, place: Place) -> Result<f64> {
    if model.factors.iter().all(|f| !f.in_d) {
        return Err(Error::Unsupported(format!("{} has empty boundary", model.id)));
    }
    if model.metric != Metric::Max {
        return Err(Error::Unsupported("boundary measures are implemented for the max metric".into()));
    }
    let cx = clemens_complex(model, place, true);
    let cv = residue_c(place);
    let u = match place {
        Place::Real => 1.0,
        Place::Finite(p) => 1.0 - 1.0 / p as f64,
        Place::Complex => return Err(Error::Unsupported("catalog models live over Q".into())),
    };
    let mut total = 0.0;
    for face in &cx.maximal_faces {
        let mut term = 1.0;
        for (j, f) in model.factors.iter().enumerate() {
            if face.contains(&j) {
                term *= cv * u * projective_volume(f.dim - 1, place)? / (f.rho() as f64 - 1.0);
            } else {
                term *= projective_volume(f.dim, place)?;
            }
        }
        total += term;
    }
    Ok(total)
}

/// `∏_{α ∉ 𝒜_D} 1/ρ_α · [∏_{p ∈ S} (1 - 1/p)]^{rk} · φ^S(1) · ∏_{v ∈ S} τ_v^max / (b-1)!`.
pub fn theta_factorization(model: &CompactificationModel, s_places: &[Place], truncation: u64) -> Result<f64> {
    let b = exponent_b(model, s_places)?;
    let ds = model.divisor_scheme();
    let open = ds.open_indices();
    let mut value: f64 = open.iter().map(|&a| 1.0 / ds.rho[a] as f64).product();
    let local: f64 = finite_places(s_places).iter().map(|&p| 1.0 - 1.0 / p as f64).product();
    value *= local.powi(open.len() as i32);
    value *= euler_product(model, s_places, 1.0, truncation)?.partial_product;
    for &v in s_places {
        value *= tau_max_boundary(model, v)?;
    }
    let fact: f64 = (1..b).map(|k| k as f64).product();
    Ok(value / fact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfield::psi;

    fn m(id: &str) -> CompactificationModel {
        CompactificationModel::catalog(id).unwrap()
    }

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn denef_examples() {
        for p in [2u64, 3, 5, 7] {
            let pf = p as f64;
            for s in [1.5, 2.0, 3.7] {
                // ℙ¹ rational points: p^{-1}[p + (p-1)/(p^{s-1} - 1)]
                let got = denef_density(&m("E2"), p, &[c(s)]).unwrap().re;
                let want = (pf + (pf - 1.0) / (pf.powf(s - 1.0) - 1.0)) / pf;
                assert!((got - want).abs() < 1e-14 * want);
                assert_eq!(denef_density(&m("E1"), p, &[c(s)]).unwrap(), c(1.0));
                let got = denef_density(&m("E4"), p, &along_lambda(&m("E4"), c(s))).unwrap().re;
                let want = (1.0 - pf.powf(-2.0 * s)) / (1.0 - pf.powf(1.0 - 2.0 * s));
                assert!((got - want).abs() < 1e-14 * want);
            }
        }
        assert!(matches!(denef_density(&m("E2"), 3, &[c(1.0)]), Err(Error::NonConvergence(_))));
        // the poles p^{s-1} = 1 sit on the boundary of the convergence region
        let pole = Complex64::new(1.0, 2.0 * PI / 3f64.ln());
        assert!(denef_density_unrestricted(&m("E1"), 3, &[pole]).is_err());
        assert!(matches!(pole_checked(3, pole - 1.0), Err(Error::Pole(_))));
    }

    #[test]
    fn oracle_examples() {
        let v = brute_density_oracle(&m("E1"), 3, &[c(2.0)], 3, true).unwrap();
        assert_eq!(v, c(1.0));
        let s = along_lambda(&m("E6"), c(1.0));
        let a = brute_density_oracle(&m("E6"), 2, &s, 3, true).unwrap();
        let b = denef_density(&m("E6"), 2, &s).unwrap();
        assert!((a - b).norm() < 1e-13);
        let s = along_lambda(&m("E5"), c(2.0));
        let a = brute_density_oracle(&m("E5"), 5, &s, 3, false).unwrap();
        let b = denef_density_unrestricted(&m("E5"), 5, &s).unwrap();
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn denef_matches_oracle_everywhere() {
        let grid = [c(1.1), c(1.5), c(2.0), c(3.0), Complex64::new(1.3, 0.7), Complex64::new(2.5, -1.0)];
        for model in CompactificationModel::all() {
            for p in [2u64, 3, 5, 7] {
                for s in grid {
                    let sv = along_lambda(&model, s);
                    for restricted in [true, false] {
                        let formula = denef_sum(&model, p, &sv, restricted);
                        let oracle = brute_density_oracle(&model, p, &sv, 3, restricted);
                        match (formula, oracle) {
                            (Ok(f), Ok(o)) => assert!((f - o).norm() < 1e-12 * f.norm().max(1.0), "{} p={p} s={s}", model.id),
                            (Err(_), Err(_)) => {}
                            (f, o) => panic!("{} p={p} s={s}: {f:?} vs {o:?}", model.id),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn arch_closed_forms() {
        for s in [1.5, 2.0, 4.0] {
            let v = arch_density(&m("E1"), &[0.0], c(s)).unwrap().value.re;
            assert!((v - (2.0 + 2.0 / (s - 1.0))).abs() < 1e-12);
            let v = arch_density(&m("E3"), &[0.0, 0.0], c(s)).unwrap().value.re;
            assert!((v - (4.0 + 4.0 / (s - 1.0))).abs() < 1e-12);
            let v = arch_density(&m("E5"), &[0.0, 0.0], c(s)).unwrap().value.re;
            assert!((v - (2.0 + 2.0 / (s - 1.0)).powi(2)).abs() < 1e-11);
            let v = arch_density(&m("E4"), &[0.0, 0.0], c(s)).unwrap().value.re;
            assert!((v - (2.0 + 2.0 / (2.0 * s - 1.0)) * (2.0 + 2.0 / (s - 1.0))).abs() < 1e-11);
        }
    }

    #[test]
    fn arch_oscillatory_matches_reference_quadrature() {
        // ∫ max(1,|x|)^{-3} e^{-2πix} dx = 2∫_0^1 cos 2πx dx + 2 ∫_1^∞ x^{-3} cos 2πx dx
        let got = arch_density(&m("E1"), &[1.0], c(3.0)).unwrap().value;
        let brk = quad::geometric_breaks(1.0, 1e5, 1.25);
        let tail = quad::filon(|x| c(x.powi(-3)), 2.0 * PI, &brk, QuadOptions { rel_tol: 1e-13, abs_tol: 1e-17, max_panels: 40_000 });
        let want = 2.0 * tail.value.re; // the [0,1] part integrates cos over a full period
        assert!((got.re - want).abs() < 1e-9, "{got} vs {want}");
        assert!(got.im.abs() < 1e-12);

        // two dimensions with a cancelling frequency pair: a = (1, 1) on E3 against a direct
        // radial-shell evaluation of t∫ r^{-t-1} S(r) dr
        let t = 2.0 * 2.0;
        let got = arch_density(&m("E3"), &[0.5, 0.5], c(2.0)).unwrap().value;
        let sfun = |r: f64| (PI * r).sin().powi(2) / (PI * 0.5).powi(2);
        let brk = quad::geometric_breaks(1.0, 2e3, 1.02);
        let direct = quad::integrate_real(|r| t * r.powf(-t - 1.0) * sfun(r), &brk, QuadOptions::default());
        let rest = t * (1.0 / (PI * 0.5).powi(2)) * 0.5 * (2e3f64).powf(-t) / t; // mean of sin² is 1/2
        assert!((got.re - (direct.value.re + rest)).abs() < 1e-7, "{got} vs {}", direct.value.re);
    }

    #[test]
    fn smoothed_density_matches_quadrature() {
        let k = 2;
        let t = 3.0;
        let got = smoothed_factor_density(1, k, t).unwrap();
        let f = |x: f64| (1.0 + x.powi(4)).powf(-t / 4.0);
        let brk = quad::geometric_breaks(1.0, 1e6, 2.0);
        let mut want = quad::integrate_real(f, &[0.0, 1.0], QuadOptions::default()).value.re;
        want += quad::integrate_real(f, &brk, QuadOptions::default()).value.re;
        assert!((got - 2.0 * want).abs() < 1e-8, "{got} vs {}", 2.0 * want);
    }

    /// `∫_{ℚ_p} max(1,|x|)^{-s} ψ(ax) dx` for integral `a` by summing classes of `p^{-K}ℤ_p / p^3`.
    fn brute_p1(p: u64, a: &Rational, s: f64, big_k: u32) -> f64 {
        let modulus = (p as i128).pow(big_k + 3);
        let scale = Rational::from_integer(p as i128).pow(-(big_k as i32));
        let ctx = PadicContext::new(p).unwrap();
        let mut acc = c(0.0);
        for r0 in 0..modulus {
            let x = scale * Rational::from_integer(r0);
            let h = ctx.abs(&x).max(Rational::from_integer(1));
            let w = (rat_to_f64(&h)).powf(-s);
            acc += psi(Place::Finite(p), &(a * x)) * w;
        }
        (acc / (p as f64).powi(3)).re
    }

    #[test]
    fn finite_fourier_matches_brute_force() {
        let e2 = m("E2");
        for p in [2u64, 3] {
            for a in [r(1, 1), r(p as i128, 1), r(2 * (p * p) as i128 + 1, 1)] {
                let s = 2.0 * 1.3;
                let got = fourier_finite(&e2, p, &[a], &[c(s)], true).unwrap().re;
                let v = PadicContext::new(p).unwrap().valuation(&a).unwrap() as u32;
                let want = brute_p1(p, &a, s, v + 2);
                assert!((got - want).abs() < 1e-12, "p={p} a={a}: {got} vs {want}");
            }
        }
        // lattice vanishing
        for model in CompactificationModel::all() {
            let a: Vec<Rational> = (0..model.dim()).map(|i| if i == 0 { r(1, 3) } else { r(1, 1) }).collect();
            let v = fourier_finite(&model, 3, &a, &along_lambda(&model, c(2.0)), true).unwrap();
            assert_eq!(v, c(0.0));
        }
        assert_eq!(fourier_finite(&m("E1"), 5, &[r(3, 1)], &[c(2.0)], true).unwrap(), c(1.0));
    }

    #[test]
    fn finite_character_bound_is_uniform_in_p() {
        // |1 - Ĥ_p(a; s)| p^{3/2} for E2 at a = 6, s = 2.5 (no divisor with d_α = 0)
        let e2 = m("E2");
        let sup = |bound: u64| {
            primes_up_to(bound)
                .into_iter()
                .map(|p| {
                    let h = fourier_finite(&e2, p, &[r(6, 1)], &[c(2.5)], true).unwrap();
                    (c(1.0) - h).norm() * (p as f64).powf(1.5)
                })
                .fold(0.0, f64::max)
        };
        let (s50, s100) = (sup(50), sup(100));
        assert!(s100.is_finite() && s100 <= 2.0 * s50, "{s50} {s100}");
    }

    #[test]
    fn densities_at_zero_are_positive() {
        for model in CompactificationModel::all() {
            for s in [1.2, 2.0] {
                let ld = local_density(&model, Place::Finite(3), &vec![r(0, 1); model.dim()], &[c(s)], true).unwrap();
                assert!(ld.values[0].re > 0.0 && ld.values[0].im == 0.0);
                assert!(ld.rational_function.is_some());
                let ld = local_density(&model, Place::Real, &vec![r(0, 1); model.dim()], &[c(s)], true).unwrap();
                assert!(ld.values[0].re > 0.0 && ld.values[0].im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn euler_tail_estimate_covers_doubling() {
        let e4 = m("E4");
        let a = euler_product(&e4, &[Place::Real], 1.05, 2000).unwrap();
        let b = euler_product(&e4, &[Place::Real], 1.05, 4000).unwrap();
        assert!((a.corrected.unwrap() - b.corrected.unwrap()).abs() < a.tail_estimate * a.convergence_factor.unwrap());
    }

    #[test]
    fn theta_examples() {
        let t = theta_constant(&m("E1"), &[Place::Real]).unwrap();
        assert!((t.theta - 2.0).abs() < 1e-9 && t.b == 1);
        let t = theta_constant(&m("E3"), &[Place::Real]).unwrap();
        assert!((t.theta - 4.0).abs() < 1e-9);
        let t = theta_constant(&m("E5"), &[Place::Real]).unwrap();
        assert!((t.theta - 4.0).abs() < 1e-6 && t.b == 2);
        let t = theta_constant(&m("E4"), &[Place::Real]).unwrap();
        assert!((t.theta / (24.0 / (PI * PI)) - 1.0).abs() < 1e-3, "{}", t.theta);
        let t = theta_constant(&m("E2"), &[Place::Real]).unwrap();
        assert!((t.theta / (12.0 / (PI * PI)) - 1.0).abs() < 1e-3, "{}", t.theta);
        let t = theta_constant(&m("E6"), &[Place::Real]).unwrap();
        assert!((t.theta / (4.0 / riemann_zeta(3.0)) - 1.0).abs() < 1e-3, "{}", t.theta);
        let t = theta_constant(&m("E1"), &[Place::Real, Place::Finite(5)]).unwrap();
        assert!((t.theta / (1.6 / 5f64.ln()) - 1.0).abs() < 1e-4, "{}", t.theta);
        assert!(!t.unstable);
    }

    #[test]
    fn tau_max_examples() {
        assert!((tau_max_boundary(&m("E1"), Place::Real).unwrap() - 2.0).abs() < 1e-12);
        assert!((tau_max_boundary(&m("E5"), Place::Real).unwrap() - 4.0).abs() < 1e-12);
        assert!((tau_max_boundary(&m("E3"), Place::Real).unwrap() - 4.0).abs() < 1e-10);
        assert!(tau_max_boundary(&m("E2"), Place::Real).is_err());
        assert!((projective_volume(2, Place::Real).unwrap() - 12.0).abs() < 1e-10);
    }

    #[test]
    fn theta_factorizes() {
        for (id, places) in [
            ("E1", vec![Place::Real]),
            ("E3", vec![Place::Real]),
            ("E5", vec![Place::Real]),
            ("E4", vec![Place::Real]),
            ("E1", vec![Place::Real, Place::Finite(5)]),
            ("E3", vec![Place::Real, Place::Finite(2)]),
        ] {
            let model = m(id);
            let a = theta_constant(&model, &places).unwrap().theta;
            let b = theta_factorization(&model, &places, 10_000).unwrap();
            assert!((a / b - 1.0).abs() < 1e-2, "{id} {places:?}: {a} vs {b}");
        }
    }
}
