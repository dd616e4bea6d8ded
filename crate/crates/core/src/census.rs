//! Counting integral points of bounded height, volume asymptotics, fits, the Poisson
//! cross-check and equidistribution.
//!
//! With the max metric every factor height is an integer: for `x = y/d` with `d` the
//! common denominator, `H(x) = max(d, |y|_∞)`. Counting therefore reduces to per-factor
//! counts `c_j(h) = #{x_j : H_j(x_j) = h}` convolved along `∏ h_j^{λ_j} ≤ B`.

use crate::arith::{iroot, mobius_table, riemann_zeta, smooth_numbers, KahanSum};
use crate::catalog::{CompactificationModel, Factor, Metric};
use crate::density::{arch_density, check_s_places, finite_places, fourier_finite};
use crate::error::{Error, Result};
use crate::localfield::{Place, Rational};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

/// Outer heights handled by one parallel task.
const SLAB: u64 = 64;

#[derive(Clone, Copy, Debug)]
pub struct CensusOptions {
    /// Largest total number of per-factor heights (or cached points) a computation may touch.
    pub node_cap: u64,
}

impl Default for CensusOptions {
    fn default() -> Self {
        Self { node_cap: 50_000_000 }
    }
}

fn height_bound(b: f64) -> Result<u64> {
    if !b.is_finite() || b < 1.0 || b >= 1.8e19 {
        return Err(Error::Invalid(format!("height bound must be in [1, 1.8e19), got {b}")));
    }
    Ok(b.floor() as u64)
}

fn check_model(model: &CompactificationModel) -> Result<()> {
    if model.metric != Metric::Max {
        return Err(Error::Unsupported("exact counting needs integer heights (max metric)".into()));
    }
    Ok(())
}

fn squarefree_divisors(primes: &[u64]) -> Vec<(u64, i128)> {
    let mut out = vec![(1u64, 1i128)];
    for &p in primes {
        let more: Vec<_> = out.iter().map(|&(g, mu)| (g * p, -mu)).collect();
        out.extend(more);
    }
    out
}

fn ipow(x: u64, n: u32) -> i128 {
    (x as i128).pow(n)
}

/// `#{y ∈ ℤ^n : |y|_∞ = t}`.
fn cube_shell(n: u32, t: u64) -> i128 {
    if t == 0 {
        1
    } else {
        ipow(2 * t + 1, n) - ipow(2 * t - 1, n)
    }
}

/// `c(h)` for `h = 0..=hmax` (with `c(0) = 0`).
///
/// Factors in `D` take points `y/d` with `d` an `S`-unit denominator and `gcd(d, y) = 1`,
/// counted by Möbius inversion over squarefree `g | d`. Other factors take all rational
/// points: primitive `(X_0, …, X_n)` with `X_0 > 0`, by Möbius inversion over `gcd`.
fn factor_counts(f: &Factor, primes: &[u64], hmax: u64) -> Vec<u64> {
    let n = f.dim as u32;
    let len = hmax as usize + 1;
    let mut out = vec![0u64; len];
    if f.in_d {
        let smooth = smooth_numbers(primes, hmax);
        let sq = squarefree_divisors(primes);
        for h in 1..=hmax {
            let mut acc = 0i128;
            for &(g, mu) in &sq {
                if h % g != 0 {
                    continue;
                }
                let q = h / g;
                // denominators d = g e < h
                let below = smooth.partition_point(|&e| e < q) as i128;
                acc += mu * below * cube_shell(n, q);
            }
            if smooth.binary_search(&h).is_ok() {
                for &(g, mu) in &sq {
                    if h % g == 0 {
                        acc += mu * ipow(2 * (h / g) + 1, n);
                    }
                }
            }
            out[h as usize] = acc as u64;
        }
    } else {
        // e(t) = #{X_0 ∈ [1, t], X ∈ [-t, t]^n : max = t}
        let e = |t: u64| t as i128 * ipow(2 * t + 1, n) - (t as i128 - 1) * ipow(2 * t - 1, n);
        let mu = mobius_table(hmax as usize);
        let mut acc = vec![0i128; len];
        for g in 1..len {
            if mu[g] == 0 {
                continue;
            }
            let mut k = 1;
            while g * k < len {
                acc[g * k] += mu[g] as i128 * e(k as u64);
                k += 1;
            }
        }
        for h in 1..len {
            out[h] = acc[h] as u64;
        }
    }
    out
}

struct Prepared {
    lambdas: Vec<u32>,
    counts: Vec<Vec<u64>>,
    cum_last: Vec<u64>,
}

fn prepare(model: &CompactificationModel, places: &[Place], bmax: u64, opts: &CensusOptions) -> Result<Prepared> {
    check_model(model)?;
    check_s_places(places)?;
    let primes = finite_places(places);
    let lambdas = model.lambda();
    let hmax: Vec<u64> = lambdas.iter().map(|&l| iroot(bmax, l)).collect();
    let nodes: u64 = hmax.iter().sum();
    if nodes > opts.node_cap {
        return Err(Error::Budget(format!("{nodes} heights exceed the node cap {}", opts.node_cap)));
    }
    let counts: Vec<Vec<u64>> = model.factors.iter().zip(&hmax).map(|(f, &h)| factor_counts(f, &primes, h)).collect();
    let mut cum_last = counts.last().expect("models have factors").clone();
    for i in 1..cum_last.len() {
        cum_last[i] += cum_last[i - 1];
    }
    Ok(Prepared { lambdas, counts, cum_last })
}

impl Prepared {
    fn rest(&self, idx: usize, bound: u64) -> u128 {
        let l = self.lambdas[idx];
        let top = iroot(bound, l).min(self.counts[idx].len() as u64 - 1);
        if idx + 1 == self.lambdas.len() {
            return self.cum_last[top as usize] as u128;
        }
        (1..=top).map(|h| self.counts[idx][h as usize] as u128 * self.rest(idx + 1, bound / h.pow(l))).sum()
    }

    fn count(&self, bound: u64) -> u128 {
        if self.lambdas.len() == 1 {
            return self.rest(0, bound);
        }
        let l = self.lambdas[0];
        let top = iroot(bound, l).min(self.counts[0].len() as u64 - 1);
        let slabs: Vec<u64> = (0..top.div_ceil(SLAB)).collect();
        let partial: Vec<u128> = slabs
            .par_iter()
            .map(|&k| {
                let lo = k * SLAB + 1;
                let hi = ((k + 1) * SLAB).min(top);
                (lo..=hi).map(|h| self.counts[0][h as usize] as u128 * self.rest(1, bound / h.pow(l))).sum()
            })
            .collect();
        partial.into_iter().sum()
    }
}

/// `N(B) = #{x ∈ G(ℚ) ∩ 𝒰(ℤ_S) : H(x; λ) ≤ B}`, exactly.
pub fn count_points(model: &CompactificationModel, places: &[Place], b: f64) -> Result<u64> {
    count_points_with(model, places, b, &CensusOptions::default())
}

pub fn count_points_with(model: &CompactificationModel, places: &[Place], b: f64, opts: &CensusOptions) -> Result<u64> {
    let bound = height_bound(b)?;
    let prep = prepare(model, places, bound, opts)?;
    u64::try_from(prep.count(bound)).map_err(|_| Error::Budget("count exceeds 64 bits".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub b: f64,
    pub n: u64,
    pub v: Option<f64>,
    /// Seconds spent on this row; not serialized so outputs stay reproducible.
    #[serde(skip)]
    pub wall_clock: f64,
}

/// One row of a count table: `N(B)`, and `V(B)` where a volume formula exists.
pub fn enumerate_points(model: &CompactificationModel, places: &[Place], b: f64) -> Result<CountRow> {
    let start = Instant::now();
    let n = count_points(model, places, b)?;
    Ok(CountRow { b, n, v: volume_v(model, places, b).ok(), wall_clock: start.elapsed().as_secs_f64() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub model: String,
    pub places: Vec<Place>,
    pub rows: Vec<CountRow>,
}

/// `10^{lo}, 10^{lo+step}, …, 10^{hi}`.
pub fn geometric_grid(lo_exp: f64, hi_exp: f64, step: f64) -> Vec<f64> {
    let k = ((hi_exp - lo_exp) / step + 1e-9).floor() as usize;
    (0..=k).map(|i| 10f64.powf(lo_exp + i as f64 * step)).collect()
}

/// Exact counts over a grid of bounds. The per-factor tables are built once for the largest bound.
pub fn count_table(model: &CompactificationModel, places: &[Place], grid: &[f64], opts: &CensusOptions) -> Result<CountTable> {
    if grid.is_empty() {
        return Err(Error::Invalid("empty grid".into()));
    }
    let bounds: Vec<u64> = grid.iter().map(|&b| height_bound(b)).collect::<Result<_>>()?;
    let prep = prepare(model, places, *bounds.iter().max().expect("nonempty"), opts)?;
    let mut rows = Vec::new();
    for (&b, &bound) in grid.iter().zip(&bounds) {
        let start = Instant::now();
        let n = u64::try_from(prep.count(bound)).map_err(|_| Error::Budget("count exceeds 64 bits".into()))?;
        rows.push(CountRow { b, n, v: volume_v(model, places, b).ok(), wall_clock: start.elapsed().as_secs_f64() });
    }
    Ok(CountTable { model: model.id.clone(), places: places.to_vec(), rows })
}

// ---------------------------------------------------------------------------
// volumes

/// `V(B) = vol{x ∈ ℝ^n : H_∞(x; λ) ≤ B}` for models whose factors all lie in `D`, with `S = {∞}`.
///
/// Each factor contributes `vol{max(1,|x|_∞) ≤ r} = (2r)^n` for `r ≥ 1`; for two factors the
/// radial measure of the first is integrated against the second in closed form.
pub fn volume_v(model: &CompactificationModel, places: &[Place], b: f64) -> Result<f64> {
    check_model(model)?;
    check_s_places(places)?;
    if !finite_places(places).is_empty() {
        return Err(Error::Unsupported("volumes are implemented for S = {∞}".into()));
    }
    if model.factors.iter().any(|f| !f.in_d) {
        return Err(Error::Unsupported(format!("{} has rational factors; V(B) has no closed form here", model.id)));
    }
    if b < 1.0 {
        return Ok(0.0);
    }
    let lam = model.lambda();
    match model.factors.as_slice() {
        [f] => Ok((2.0 * b.powf(1.0 / lam[0] as f64)).powi(f.dim as i32)),
        [f1, f2] => {
            let (n1, n2) = (f1.dim as f64, f2.dim as f64);
            let (l1, l2) = (lam[0] as f64, lam[1] as f64);
            let top = b.powf(1.0 / l1);
            // atom at r = 1, then ∫_1^top n1 2^{n1} r^{n1-1} 2^{n2} (B r^{-l1})^{n2/l2} dr
            let atom = 2f64.powf(n1) * (2.0 * b.powf(1.0 / l2)).powf(n2);
            let e = n1 - 1.0 - l1 * n2 / l2;
            let k = n1 * 2f64.powf(n1 + n2) * b.powf(n2 / l2);
            let integral = if (e + 1.0).abs() < 1e-12 { top.ln() } else { (top.powf(e + 1.0) - 1.0) / (e + 1.0) };
            Ok(atom + k * integral)
        }
        _ => Err(Error::Unsupported("volumes for more than two factors".into())),
    }
}

// ---------------------------------------------------------------------------
// fits

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub b: usize,
    /// Leading coefficient of `N(B) / (B (log B)^{b-1})`.
    pub theta_hat: f64,
    /// Coefficient of `(log B)^{b-2}` when `b ≥ 2`.
    pub secondary: Option<f64>,
    /// Relative residuals of `N(B)/B` against the fitted curve, one per row.
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
    /// Approximate 95% half-width for `theta_hat`.
    pub half_width: f64,
}

impl AsymptoticFit {
    /// Fitted `N(B)`.
    pub fn predict(&self, b: f64) -> f64 {
        let l = b.ln();
        let mut y = self.theta_hat * l.powi(self.b as i32 - 1);
        if let Some(c0) = self.secondary {
            y += c0 * l.powi(self.b as i32 - 2);
        }
        y * b
    }
}

/// Fits `N(B)/B` by a constant (`b = 1`, the mean over the top half of the grid) or by
/// `c₁ (log B)^{b-1} + c₀ (log B)^{b-2}` in least squares (`b ≥ 2`).
pub fn fit_asymptotic(table: &CountTable, b: usize) -> Result<AsymptoticFit> {
    let rows = &table.rows;
    if rows.len() < 5 {
        return Err(Error::Invalid(format!("need at least 5 grid rows, got {}", rows.len())));
    }
    if b == 0 {
        return Err(Error::Invalid("b must be at least 1".into()));
    }
    if rows.iter().any(|r| r.b <= 1.0) {
        return Err(Error::Invalid("fits need B > 1".into()));
    }
    let y: Vec<f64> = rows.iter().map(|r| r.n as f64 / r.b).collect();
    let logs: Vec<f64> = rows.iter().map(|r| r.b.ln()).collect();
    let (theta, secondary, half_width) = if b == 1 {
        let top = &y[y.len() / 2..];
        let k = top.len() as f64;
        let mean = top.iter().sum::<f64>() / k;
        let var = top.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
        (mean, None, 2.0 * (var / k).sqrt())
    } else {
        let basis = |l: f64| (l.powi(b as i32 - 1), l.powi(b as i32 - 2));
        let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&l, &v) in logs.iter().zip(&y) {
            let (u, w) = basis(l);
            s11 += u * u;
            s12 += u * w;
            s22 += w * w;
            t1 += u * v;
            t2 += w * v;
        }
        let det = s11 * s22 - s12 * s12;
        if det.abs() <= 1e-12 * (s11 * s22) {
            return Err(Error::Invalid("ill-conditioned grid for a two-term fit".into()));
        }
        let c1 = (s22 * t1 - s12 * t2) / det;
        let c0 = (s11 * t2 - s12 * t1) / det;
        let rss: f64 = logs.iter().zip(&y).map(|(&l, &v)| {
            let (u, w) = basis(l);
            (v - c1 * u - c0 * w).powi(2)
        }).sum();
        let dof = (y.len() as f64 - 2.0).max(1.0);
        (c1, Some(c0), 2.0 * (rss / dof * s22 / det).sqrt())
    };
    let mut fit = AsymptoticFit { b, theta_hat: theta, secondary, residuals: Vec::new(), rms_residual: 0.0, half_width };
    fit.residuals = rows.iter().zip(&y).map(|(r, v)| (v - fit.predict(r.b) / r.b) / v).collect();
    fit.rms_residual = (fit.residuals.iter().map(|r| r * r).sum::<f64>() / rows.len() as f64).sqrt();
    Ok(fit)
}

/// Long-format CSV row: `B, N, V, N/B/logpow, fit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusCsvRow {
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "V")]
    pub v: Option<f64>,
    #[serde(rename = "N/B/logpow")]
    pub normalized: f64,
    pub fit: Option<f64>,
}

/// Rows normalized by `B (log B)^{b-1}`, with `b` taken from the fit (1 without one).
pub fn csv_rows(table: &CountTable, fit: Option<&AsymptoticFit>) -> Vec<CensusCsvRow> {
    let b = fit.map_or(1, |f| f.b);
    table
        .rows
        .iter()
        .map(|r| CensusCsvRow {
            b: r.b,
            n: r.n,
            v: r.v,
            normalized: r.n as f64 / (r.b * r.b.ln().powi(b as i32 - 1)),
            fit: fit.map(|f| f.predict(r.b)),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// point enumeration

fn odometer(domains: &[Vec<i64>], f: &mut dyn FnMut(&[i64])) {
    if domains.iter().any(|d| d.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; domains.len()];
    let mut v: Vec<i64> = domains.iter().map(|d| d[0]).collect();
    loop {
        f(&v);
        let mut k = 0;
        loop {
            if k == domains.len() {
                return;
            }
            idx[k] += 1;
            if idx[k] < domains[k].len() {
                v[k] = domains[k][idx[k]];
                break;
            }
            idx[k] = 0;
            v[k] = domains[k][0];
            k += 1;
        }
    }
}

fn range(lo: i64, hi: i64) -> Vec<i64> {
    (lo..=hi).collect()
}

/// Vectors of length `n` with `|y|_∞ = h` (`h ≥ 1`), split by the first coordinate attaining `h`.
fn sup_shell(n: usize, h: i64, f: &mut dyn FnMut(&[i64])) {
    for i in 0..n {
        let domains: Vec<Vec<i64>> = (0..n)
            .map(|l| if l < i { range(-(h - 1), h - 1) } else if l == i { vec![-h, h] } else { range(-h, h) })
            .collect();
        odometer(&domains, f);
    }
}

fn reduced(num: i64, den: i64) -> (i64, i64) {
    let g = num_integer::gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
    (num / g, den / g)
}

/// Points of one factor with `H_j = h`, as reduced fractions.
fn factor_points_at(f: &Factor, primes: &[u64], smooth: &[u64], h: u64, out: &mut dyn FnMut(&[(i64, i64)])) {
    let n = f.dim;
    let hi = h as i64;
    let mut buf = vec![(0i64, 1i64); n];
    if f.in_d {
        for &d in smooth.iter().take_while(|&&d| d <= h) {
            let di = d as i64;
            let mut emit = |y: &[i64]| {
                if primes.iter().all(|&p| d % p != 0 || y.iter().any(|v| v.rem_euclid(p as i64) != 0)) {
                    for (b, &v) in buf.iter_mut().zip(y) {
                        *b = reduced(v, di);
                    }
                    out(&buf);
                }
            };
            if d == h {
                odometer(&vec![range(-hi, hi); n], &mut emit);
            } else {
                sup_shell(n, hi, &mut emit);
            }
        }
    } else {
        let mut emit = |x: &[i64]| {
            let g = x.iter().fold(0u64, |g, v| num_integer::gcd(g, v.unsigned_abs()));
            if g == 1 {
                for (b, &v) in buf.iter_mut().zip(&x[1..]) {
                    *b = reduced(v, x[0]);
                }
                out(&buf);
            }
        };
        for i in 0..=n {
            let domains: Vec<Vec<i64>> = (0..=n)
                .map(|l| match (l, l.cmp(&i)) {
                    (0, std::cmp::Ordering::Equal) => vec![hi],
                    (0, _) => range(1, hi - 1),
                    (_, std::cmp::Ordering::Less) => range(-(hi - 1), hi - 1),
                    (_, std::cmp::Ordering::Equal) => vec![-hi, hi],
                    _ => range(-hi, hi),
                })
                .collect();
            odometer(&domains, &mut emit);
        }
    }
}

struct PointCache {
    dim: usize,
    offsets: Vec<usize>,
    coords: Vec<(i64, i64)>,
}

impl PointCache {
    fn build(f: &Factor, primes: &[u64], hmax: u64, cap: u64) -> Result<Self> {
        let smooth = smooth_numbers(primes, hmax);
        let mut offsets = vec![0, 0];
        let mut coords = Vec::new();
        for h in 1..=hmax {
            let mut over = false;
            factor_points_at(f, primes, &smooth, h, &mut |p| {
                if coords.len() as u64 >= cap {
                    over = true;
                } else {
                    coords.extend_from_slice(p);
                }
            });
            if over {
                return Err(Error::Budget(format!("more than {cap} cached coordinates")));
            }
            offsets.push(coords.len());
        }
        Ok(Self { dim: f.dim, offsets, coords })
    }

    fn at(&self, h: u64) -> impl Iterator<Item = &[(i64, i64)]> {
        self.coords[self.offsets[h as usize]..self.offsets[h as usize + 1]].chunks(self.dim)
    }
}

/// Visits every point counted by [`count_points`], as reduced fractions `(num, den)`.
///
/// The outermost factor is split into slabs of heights processed in parallel; each slab
/// folds into its own state and the states are reduced in slab order.
pub fn visit_points<T, I, V, R>(
    model: &CompactificationModel,
    places: &[Place],
    b: f64,
    opts: &CensusOptions,
    init: I,
    visit: V,
    reduce: R,
) -> Result<T>
where
    T: Send,
    I: Fn() -> T + Sync,
    V: Fn(&mut T, &[(i64, i64)]) + Sync,
    R: Fn(T, T) -> T,
{
    check_model(model)?;
    check_s_places(places)?;
    let bound = height_bound(b)?;
    let primes = finite_places(places);
    let lambdas = model.lambda();
    let caches: Vec<PointCache> = model.factors[1..]
        .iter()
        .zip(&lambdas[1..])
        .map(|(f, &l)| PointCache::build(f, &primes, iroot(bound, l), opts.node_cap))
        .collect::<Result<_>>()?;
    let f0 = &model.factors[0];
    let top = iroot(bound, lambdas[0]);
    let smooth = smooth_numbers(&primes, top);
    let dim = model.dim();

    fn inner<T, V: Fn(&mut T, &[(i64, i64)])>(
        caches: &[PointCache],
        lambdas: &[u32],
        bound: u64,
        buf: &mut Vec<(i64, i64)>,
        state: &mut T,
        visit: &V,
    ) {
        let Some(cache) = caches.first() else {
            visit(state, buf);
            return;
        };
        let l = lambdas[0];
        let hmax = iroot(bound, l).min(cache.offsets.len() as u64 - 2);
        for h in 1..=hmax {
            for p in cache.at(h) {
                let start = buf.len();
                buf.extend_from_slice(p);
                inner(&caches[1..], &lambdas[1..], bound / h.pow(l), buf, state, visit);
                buf.truncate(start);
            }
        }
    }

    let slabs: Vec<u64> = (0..top.div_ceil(SLAB)).collect();
    let states: Vec<T> = slabs
        .par_iter()
        .map(|&k| {
            let mut state = init();
            let mut buf = Vec::with_capacity(dim);
            for h in k * SLAB + 1..=((k + 1) * SLAB).min(top) {
                factor_points_at(f0, &primes, &smooth, h, &mut |p| {
                    buf.clear();
                    buf.extend_from_slice(p);
                    inner(&caches, &lambdas[1..], bound / h.pow(lambdas[0]), &mut buf, &mut state, &visit);
                });
            }
            state
        })
        .collect();
    Ok(states.into_iter().fold(init(), reduce))
}

// ---------------------------------------------------------------------------
// Poisson summation

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonCheck {
    pub model: String,
    pub s: f64,
    pub cutoff: u64,
    /// `Σ_x H(x; sλ)^{-1}`.
    pub lhs: f64,
    pub lhs_tail: f64,
    /// `Σ_{|a|_∞ ≤ A} Ĥ(a; sλ)`.
    pub rhs: f64,
    pub rhs_tail: f64,
    pub gap: f64,
    pub relative_gap: f64,
    /// Set when a tail estimate exceeds 1% of the left side.
    pub flagged: bool,
}

const POISSON_HEIGHTS: u64 = 1_000_000;

/// Both sides of `Z(sλ) = Σ_{a ∈ ℤ^n} Ĥ(a; sλ)` for one-factor models over `S = {∞}`.
///
/// The left side sums `c(h) h^{-sλ}` over heights up to 10⁶ with a power-law tail. On the
/// right, the finite places are multiplied out exactly: `∏_p Ĥ_p(a) = ζ(t)^{-1} ∏_{p | a} Ĥ_p(a)/(1 - p^{-t})`
/// for factors outside `D`, and 1 for factors in `D`.
pub fn poisson_crosscheck(model: &CompactificationModel, s: f64, cutoff: u64) -> Result<PoissonCheck> {
    check_model(model)?;
    let [f] = model.factors.as_slice() else {
        return Err(Error::Unsupported("the Poisson check is implemented for one-factor models".into()));
    };
    let n = f.dim;
    let t = s * f.lambda() as f64;
    let growth = if f.in_d { n as f64 - 1.0 } else { n as f64 };
    if t <= growth + 1.0 {
        return Err(Error::NonConvergence(format!("Z(s) diverges for s = {s}")));
    }
    if cutoff > 10_000 || (n > 1 && cutoff > 200) {
        return Err(Error::Budget(format!("cutoff {cutoff} is too large")));
    }

    let counts = factor_counts(f, &[], POISSON_HEIGHTS);
    let mut lhs = KahanSum::default();
    for h in (1..counts.len()).rev() {
        lhs.add(counts[h] as f64 * (h as f64).powf(-t));
    }
    let x = POISSON_HEIGHTS as f64;
    let c = (POISSON_HEIGHTS / 2..=POISSON_HEIGHTS).map(|h| counts[h as usize] as f64 / (h as f64).powf(growth)).fold(0.0, f64::max);
    let lhs_tail = c * x.powf(growth + 1.0 - t) / (t - growth - 1.0);

    let zeta_t = riemann_zeta(t);
    let finite = |a: &[i64]| -> Result<f64> {
        if f.in_d {
            return Ok(1.0);
        }
        let g = a.iter().fold(0u64, |g, v| num_integer::gcd(g, v.unsigned_abs()));
        if g == 0 {
            return Ok(riemann_zeta(t - n as f64) / zeta_t);
        }
        let ar: Vec<Rational> = a.iter().map(|&v| Rational::from_integer(v as i128)).collect();
        let mut v = 1.0 / zeta_t;
        for (p, _) in crate::arith::factorize(g) {
            let h = fourier_finite(model, p, &ar, &[Complex64::new(t, 0.0)], true)?;
            v *= h.re / (1.0 - (p as f64).powf(-t));
        }
        Ok(v)
    };
    // sums of |terms| by shell, for the tail estimate
    let mut shells = vec![0.0f64; cutoff as usize + 1];
    let mut rhs = KahanSum::default();
    let a_lim = cutoff as i64;
    let mut err = None;
    odometer(&vec![range(-a_lim, a_lim); n], &mut |a| {
        if err.is_some() {
            return;
        }
        let af: Vec<f64> = a.iter().map(|&v| v as f64).collect();
        let term = arch_density(model, &af, Complex64::new(s, 0.0)).and_then(|d| Ok(d.value.re * finite(a)?));
        match term {
            Ok(v) => {
                rhs.add(v);
                let shell = a.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as usize;
                shells[shell] += v.abs();
            }
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let rhs_tail = if cutoff >= 4 {
        let upper: f64 = shells[cutoff as usize / 2 + 1..].iter().sum();
        let lower: f64 = shells[cutoff as usize / 4 + 1..=cutoff as usize / 2].iter().sum();
        let ratio = upper / lower;
        if ratio < 1.0 { upper * ratio / (1.0 - ratio) } else { f64::INFINITY }
    } else {
        f64::INFINITY
    };
    let (lhs, rhs) = (lhs.value(), rhs.value());
    let gap = (lhs - rhs).abs();
    Ok(PoissonCheck {
        model: model.id.clone(),
        s,
        cutoff,
        lhs,
        lhs_tail,
        rhs,
        rhs_tail,
        gap,
        relative_gap: gap / lhs.abs(),
        flagged: lhs_tail.max(rhs_tail) > 1e-2 * lhs.abs(),
    })
}

// ---------------------------------------------------------------------------
// equidistribution

#[derive(Clone, Copy, Debug, PartialEq)]
enum Atom {
    Positive(usize),
    Negative(usize),
    AbsLeAbs(usize, usize),
    AbsLe(usize, f64),
}

/// A conjunction of sign and box conditions on the real coordinates, written with `&`:
/// `x1>0`, `x1<0`, `|x1|<=|x2|`, `|x1|<=c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub text: String,
    atoms: Vec<Atom>,
}

fn coord(s: &str) -> Result<usize> {
    let i: usize = s
        .strip_prefix('x')
        .and_then(|k| k.parse().ok())
        .ok_or_else(|| Error::Invalid(format!("expected a coordinate like x1, got {s:?}")))?;
    if i == 0 {
        return Err(Error::Invalid("coordinates are numbered from 1".into()));
    }
    Ok(i - 1)
}

fn abs_coord(s: &str) -> Option<&str> {
    s.strip_prefix('|')?.strip_suffix('|')
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        for raw in text.split('&') {
            let atom: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
            let parsed = if let Some((l, r)) = atom.split_once("<=") {
                let i = coord(abs_coord(l).ok_or_else(|| Error::Invalid(format!("bad atom {atom:?}")))?)?;
                match abs_coord(r) {
                    Some(j) => Atom::AbsLeAbs(i, coord(j)?),
                    None => Atom::AbsLe(i, r.parse().map_err(|_| Error::Invalid(format!("bad bound in {atom:?}")))?),
                }
            } else if let Some(l) = atom.strip_suffix(">0") {
                Atom::Positive(coord(l)?)
            } else if let Some(l) = atom.strip_suffix("<0") {
                Atom::Negative(coord(l)?)
            } else {
                return Err(Error::Invalid(format!("bad atom {atom:?}")));
            };
            atoms.push(parsed);
        }
        Ok(Region { text: text.to_string(), atoms })
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Region {
    fn max_coord(&self) -> usize {
        self.atoms
            .iter()
            .map(|a| match *a {
                Atom::Positive(i) | Atom::Negative(i) | Atom::AbsLe(i, _) => i,
                Atom::AbsLeAbs(i, j) => i.max(j),
            })
            .max()
            .unwrap_or(0)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.atoms.iter().all(|a| match *a {
            Atom::Positive(i) => x[i] > 0.0,
            Atom::Negative(i) => x[i] < 0.0,
            Atom::AbsLeAbs(i, j) => x[i].abs() <= x[j].abs(),
            Atom::AbsLe(i, c) => x[i].abs() <= c,
        })
    }
}

/// The four open quadrants of the first two coordinates.
pub fn quadrants() -> Vec<Region> {
    ["x1>0&x2>0", "x1<0&x2>0", "x1<0&x2<0", "x1>0&x2<0"].iter().map(|s| s.parse().expect("valid")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquiRow {
    pub region: String,
    pub count: u64,
    pub empirical: f64,
    pub predicted: f64,
    /// Monte Carlo standard error of the prediction.
    pub predicted_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquiReport {
    pub model: String,
    pub places: Vec<Place>,
    pub bound: f64,
    pub total: u64,
    pub seed: u64,
    pub samples: u64,
    pub rows: Vec<EquiRow>,
}

const MAX_DIM: usize = 16;

/// Distance from `s = 1` at which the limiting measure is sampled.
pub const EQUI_EPS: f64 = 1e-3;

/// A sampled coordinate stored as its sign and `log|x|`, so that the heavy tails near
/// `s = 1` never overflow to ties at infinity.
#[derive(Clone, Copy, Debug)]
struct LogCoord {
    negative: bool,
    log_abs: f64,
}

impl LogCoord {
    fn uniform(rng: &mut ChaCha8Rng) -> Self {
        let u: f64 = rng.gen_range(-1.0..1.0);
        LogCoord { negative: u < 0.0, log_abs: u.abs().ln() }
    }
}

/// Draws `x` from the probability density proportional to `max(1, |x|_∞)^{-t}` on `ℝ^n`.
fn sample_factor(rng: &mut ChaCha8Rng, n: usize, t: f64, out: &mut Vec<LogCoord>) {
    let nf = n as f64;
    let inner_mass = 1.0;
    let outer_mass = nf / (t - nf);
    if rng.gen::<f64>() * (inner_mass + outer_mass) < inner_mass {
        for _ in 0..n {
            out.push(LogCoord::uniform(rng));
        }
        return;
    }
    // P(|x|_∞ > r) = r^{n-t}, and x is uniform on the cube surface of radius r
    let u: f64 = 1.0 - rng.gen::<f64>();
    let log_r = -u.ln() / (t - nf);
    let face = rng.gen_range(0..n);
    let negative = rng.gen::<bool>();
    for i in 0..n {
        out.push(if i == face {
            LogCoord { negative, log_abs: log_r }
        } else {
            let c = LogCoord::uniform(rng);
            LogCoord { log_abs: log_r + c.log_abs, ..c }
        });
    }
}

impl Region {
    fn contains_log(&self, x: &[LogCoord]) -> bool {
        self.atoms.iter().all(|a| match *a {
            Atom::Positive(i) => !x[i].negative,
            Atom::Negative(i) => x[i].negative,
            Atom::AbsLeAbs(i, j) => x[i].log_abs <= x[j].log_abs,
            Atom::AbsLe(i, c) => c > 0.0 && x[i].log_abs <= c.ln(),
        })
    }
}

/// Predicted region masses under `H_∞(x; (1+ε)λ)^{-1} dx`, normalized, by seeded Monte Carlo.
pub fn predicted_fractions(model: &CompactificationModel, regions: &[Region], seed: u64, samples: u64) -> Result<Vec<(f64, f64)>> {
    check_model(model)?;
    if samples == 0 {
        return Err(Error::Invalid("need at least one sample".into()));
    }
    let lam = model.lambda();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0u64; regions.len()];
    let mut x = Vec::with_capacity(model.dim());
    for _ in 0..samples {
        x.clear();
        for (f, &l) in model.factors.iter().zip(&lam) {
            sample_factor(&mut rng, f.dim, (1.0 + EQUI_EPS) * l as f64, &mut x);
        }
        for (k, r) in regions.iter().enumerate() {
            hits[k] += r.contains_log(&x) as u64;
        }
    }
    let m = samples as f64;
    Ok(hits.iter().map(|&h| {
        let p = h as f64 / m;
        (p, (p * (1.0 - p) / m).sqrt())
    }).collect())
}

/// Empirical fractions of points of height `≤ B` in each region, against the prediction.
pub fn equidistribution_test(
    model: &CompactificationModel,
    places: &[Place],
    b: f64,
    regions: &[Region],
    seed: u64,
    samples: u64,
) -> Result<EquiReport> {
    if let Some(r) = regions.iter().find(|r| r.max_coord() >= model.dim()) {
        return Err(Error::Invalid(format!("region {r} refers to a coordinate beyond dimension {}", model.dim())));
    }
    if model.dim() > MAX_DIM {
        return Err(Error::Unsupported(format!("regions are tested in dimension at most {MAX_DIM}")));
    }
    let k = regions.len();
    let counts = visit_points(
        model,
        places,
        b,
        &CensusOptions::default(),
        || vec![0u64; k + 1],
        |acc, p| {
            let mut x = [0.0f64; MAX_DIM];
            for (xi, &(n, d)) in x.iter_mut().zip(p) {
                *xi = n as f64 / d as f64;
            }
            acc[k] += 1;
            for (i, r) in regions.iter().enumerate() {
                acc[i] += r.contains(&x[..p.len()]) as u64;
            }
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        },
    )?;
    let total = counts[k];
    let predicted = predicted_fractions(model, regions, seed, samples)?;
    let rows = regions
        .iter()
        .zip(&counts)
        .zip(predicted)
        .map(|((r, &c), (p, e))| EquiRow {
            region: r.text.clone(),
            count: c,
            empirical: if total > 0 { c as f64 / total as f64 } else { 0.0 },
            predicted: p,
            predicted_error: e,
        })
        .collect();
    Ok(EquiReport { model: model.id.clone(), places: places.to_vec(), bound: b, total, seed, samples, rows })
}
