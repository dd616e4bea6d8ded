//! Explicit compactifications of `𝔾_a^n` over ℚ.
//!
//! Every catalog model is a product `ℙ^{n_1} × ⋯ × ℙ^{n_r}` containing `𝔾_a^n` as
//! the product of the affine charts. Factor `j` carries one boundary divisor, its
//! hyperplane at infinity `D_j`, with `ρ_j = n_j + 1`. The divisor `D` removed for
//! integral points is a union of some of the `D_j`.

use crate::boundary::DivisorScheme;
use crate::error::{Error, Result};
use crate::localfield::{abs_value, PadicContext, Place, Rational};
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

/// One projective factor `ℙ^dim` of a model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
    /// Whether the hyperplane at infinity of this factor belongs to `D`.
    pub in_d: bool,
}

impl Factor {
    pub fn rho(&self) -> u32 {
        self.dim as u32 + 1
    }

    pub fn lambda(&self) -> u32 {
        self.rho() - self.in_d as u32
    }
}

/// Archimedean metric on the boundary sections; finite places always use the model metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// `‖f‖^{-1} = max(1, |x_1|, …, |x_n|)`.
    Max,
    /// `‖f‖^{-1} = (1 + Σ|x_i|^{2k})^{1/2k}`.
    Smoothed { k: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompactificationModel {
    pub id: String,
    pub description: String,
    pub factors: Vec<Factor>,
    pub metric: Metric,
}

fn factor(label: &str, dim: usize, in_d: bool) -> Factor {
    Factor { label: label.into(), dim, in_d }
}

/// Catalog ids in order.
pub const CATALOG_IDS: [&str; 6] = ["E1", "E2", "E3", "E4", "E5", "E6"];

impl CompactificationModel {
    /// Catalog entry by id (`E1` … `E6`, case-insensitive).
    pub fn catalog(id: &str) -> Result<Self> {
        let (desc, factors) = match id.to_ascii_uppercase().as_str() {
            "E1" => ("P^1 with D = {inf}", vec![factor("inf", 1, true)]),
            "E2" => ("P^1 with D empty (rational points)", vec![factor("inf", 1, false)]),
            "E3" => ("P^2 with D = line at infinity", vec![factor("H", 2, true)]),
            "E4" => ("P^1 x P^1 with D = {y = inf}", vec![factor("D1", 1, false), factor("D2", 1, true)]),
            "E5" => ("P^1 x P^1 with D = both rulings at infinity", vec![factor("D1", 1, true), factor("D2", 1, true)]),
            "E6" => ("P^2 with D empty (rational points)", vec![factor("H", 2, false)]),
            _ => return Err(Error::Invalid(format!("unknown model {id}"))),
        };
        Ok(Self { id: id.to_ascii_uppercase(), description: desc.into(), factors, metric: Metric::Max })
    }

    pub fn all() -> Vec<Self> {
        CATALOG_IDS.iter().map(|id| Self::catalog(id).expect("catalog id")).collect()
    }

    pub fn with_metric(mut self, metric: Metric) -> Result<Self> {
        if let Metric::Smoothed { k: 0 } = metric {
            return Err(Error::Invalid("smoothing exponent must be positive".into()));
        }
        self.metric = metric;
        Ok(self)
    }

    /// `n = dim X`.
    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).sum()
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn divisor_scheme(&self) -> DivisorScheme {
        DivisorScheme::new(
            self.factors.iter().map(|f| f.label.clone()).collect(),
            self.factors.iter().map(|f| f.rho()).collect(),
            self.factors.iter().map(|f| f.in_d).collect(),
        )
        .expect("catalog divisor data is valid")
    }

    pub fn lambda(&self) -> Vec<u32> {
        self.factors.iter().map(|f| f.lambda()).collect()
    }

    /// Coordinate ranges of the factors inside a point of `𝔾_a^n`.
    pub fn coordinate_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.factors
            .iter()
            .map(|f| {
                let r = start..start + f.dim;
                start += f.dim;
                r
            })
            .collect()
    }

    fn check_point<T>(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Invalid(format!("{} expects {} coordinates, got {}", self.id, self.dim(), x.len())));
        }
        Ok(())
    }

    /// `‖f_α‖_p(x) = 1/max(1, |x_i|_p)` over the coordinates of factor `α`, exactly.
    pub fn local_norm_finite(&self, p: u64, alpha: usize, x: &[Rational]) -> Result<Rational> {
        self.check_point(x)?;
        let ctx = PadicContext::new(p)?;
        let range = self.coordinate_ranges().get(alpha).cloned().ok_or(Error::Invalid(format!("no divisor {alpha}")))?;
        let mut m = Rational::from_integer(1);
        for xi in &x[range] {
            let a = ctx.abs(xi);
            if a > m {
                m = a;
            }
        }
        Ok(m.recip())
    }

    /// `‖f_α‖_v(x) ∈ (0, 1]`.
    pub fn local_height(&self, place: Place, alpha: usize, x: &[Rational]) -> Result<f64> {
        match place {
            Place::Finite(p) => {
                let r = self.local_norm_finite(p, alpha, x)?;
                Ok(*r.numer() as f64 / *r.denom() as f64)
            }
            Place::Real => {
                self.check_point(x)?;
                let range = self.coordinate_ranges().get(alpha).cloned().ok_or(Error::Invalid(format!("no divisor {alpha}")))?;
                let xs: Vec<f64> = x[range].iter().map(|v| abs_value(v, Place::Real)).collect();
                Ok(1.0 / self.arch_factor(&xs))
            }
            Place::Complex => Err(Error::Unsupported("catalog models live over Q".into())),
        }
    }

    /// Archimedean `‖f‖^{-1}` of one factor from the absolute values of its coordinates.
    pub fn arch_factor(&self, abs_coords: &[f64]) -> f64 {
        match self.metric {
            Metric::Max => abs_coords.iter().fold(1.0f64, |m, v| m.max(*v)),
            Metric::Smoothed { k } => {
                let k2 = 2 * k as i32;
                (1.0 + abs_coords.iter().map(|v| v.powi(k2)).sum::<f64>()).powf(1.0 / k2 as f64)
            }
        }
    }

    /// Global height of each factor, `H_α(x) = ∏_v ‖f_α‖_v(x)^{-1}`.
    ///
    /// With the max metric this is the integer `max(D, |D x_i|)` where `D` is the
    /// common denominator of the factor's coordinates.
    pub fn factor_heights(&self, x: &[Rational]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self
            .coordinate_ranges()
            .into_iter()
            .map(|r| {
                let coords = &x[r];
                let den = coords.iter().fold(1i128, |l, v| l.lcm(v.denom()));
                let abs: Vec<f64> = coords.iter().map(|v| v.abs().numer().to_owned() as f64 / *v.denom() as f64).collect();
                match self.metric {
                    Metric::Max => {
                        let top = coords.iter().map(|v| (v * Rational::from_integer(den)).numer().abs()).max().unwrap_or(0);
                        den.max(top) as f64
                    }
                    Metric::Smoothed { .. } => den as f64 * self.arch_factor(&abs),
                }
            })
            .collect())
    }

    /// Exact integer factor heights under the max metric.
    pub fn factor_heights_exact(&self, x: &[Rational]) -> Result<Vec<i128>> {
        self.check_point(x)?;
        Ok(self
            .coordinate_ranges()
            .into_iter()
            .map(|r| {
                let coords = &x[r];
                let den = coords.iter().fold(1i128, |l, v| l.lcm(v.denom()));
                let top = coords.iter().map(|v| (v * Rational::from_integer(den)).numer().abs()).max().unwrap_or(0);
                den.max(top)
            })
            .collect())
    }

    /// `H(x; sλ) = ∏_α H_α(x)^{s λ_α}`.
    pub fn height(&self, x: &[Rational], s: Complex64) -> Result<Complex64> {
        let hs = self.factor_heights(x)?;
        let log: Complex64 = hs.iter().zip(self.lambda()).map(|(h, l)| s * (l as f64 * h.ln())).sum();
        Ok(log.exp())
    }

    /// `∏_{v ∈ places} ∏_α ‖f_α‖_v(x)^{-s λ_α}` over an explicit list of places.
    pub fn height_over(&self, x: &[Rational], s: f64, places: &[Place]) -> Result<f64> {
        let mut log = 0.0;
        for &v in places {
            for (alpha, l) in self.lambda().into_iter().enumerate() {
                log -= s * l as f64 * self.local_height(v, alpha, x)?.ln();
            }
        }
        Ok(log.exp())
    }

    /// `δ_p(x)`: the reduction of `x` avoids `D`, i.e. `‖f_α‖_p(x) = 1` for every `α ∈ 𝒜_D`.
    pub fn is_integral(&self, place: Place, x: &[Rational]) -> Result<bool> {
        let Place::Finite(p) = place else {
            return Err(Error::Invalid("integrality is tested at finite places".into()));
        };
        for (alpha, f) in self.factors.iter().enumerate() {
            if f.in_d && !self.local_norm_finite(p, alpha, x)?.is_integer() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `#D_A^∘(𝔽_q)`: points lying on exactly the divisors in `A`.
    pub fn stratum_counts(&self, q: u64, a: &[usize]) -> Result<u64> {
        if a.iter().any(|&i| i >= self.rank()) {
            return Err(Error::Invalid("stratum index out of range".into()));
        }
        let mut n = 1u64;
        for (j, f) in self.factors.iter().enumerate() {
            n *= if a.contains(&j) { projective_count(q, f.dim - 1) } else { q.pow(f.dim as u32) };
        }
        Ok(n)
    }

    /// `#X(𝔽_q)`.
    pub fn total_count(&self, q: u64) -> u64 {
        self.factors.iter().map(|f| projective_count(q, f.dim)).product()
    }

    /// Incidence data: whether `D_A(F_v)` is nonempty. Intersections of hyperplanes at
    /// infinity of distinct factors are products of projective spaces, which always have
    /// rational points.
    pub fn has_points(&self, _place: Place, a: &[usize]) -> bool {
        a.iter().all(|&i| i < self.rank())
    }

    /// All catalog models have good reduction everywhere.
    pub fn good_reduction(&self, _p: u64) -> bool {
        true
    }

    pub fn describe(&self) -> ModelDescription {
        let ds = self.divisor_scheme();
        ModelDescription {
            id: self.id.clone(),
            description: self.description.clone(),
            dim: self.dim(),
            factors: self.factors.clone(),
            metric: self.metric,
            divisors: ds.labels.clone(),
            rho: ds.rho.clone(),
            boundary: ds.boundary_indices().iter().map(|i| ds.labels[*i].clone()).collect(),
            lambda: ds.lambda.clone(),
        }
    }
}

/// JSON view of a model for `model describe`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDescription {
    pub id: String,
    pub description: String,
    pub dim: usize,
    pub factors: Vec<Factor>,
    pub metric: Metric,
    pub divisors: Vec<String>,
    pub rho: Vec<u32>,
    pub boundary: Vec<String>,
    pub lambda: Vec<u32>,
}

/// `#ℙ^m(𝔽_q) = 1 + q + ⋯ + q^m`.
pub fn projective_count(q: u64, m: usize) -> u64 {
    (0..=m as u32).map(|i| q.pow(i)).sum()
}

/// Parse a point given as comma-separated rationals.
pub fn parse_point(s: &str) -> Result<Vec<Rational>> {
    s.split(',').map(|t| crate::localfield::parse_rational(t.trim())).collect()
}

/// Whether every coordinate is zero.
pub fn is_origin(x: &[Rational]) -> bool {
    x.iter().all(|v| v.is_zero())
}
