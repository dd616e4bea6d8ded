//! Boundary combinatorics: divisor data, analytic Clemens complexes, the exponent
//! `b`, pole orders of the height zeta function, and the pole multiplicities
//! `d_α(a)` of the linear forms `f_a`.

use crate::catalog::CompactificationModel;
use crate::error::{Error, Result};
use crate::localfield::{Place, Rational};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisorScheme {
    pub labels: Vec<String>,
    pub rho: Vec<u32>,
    /// Membership in `𝒜_D`.
    pub in_d: Vec<bool>,
    /// Residue degrees; always 1 over ℚ with geometrically irreducible components.
    pub residue_degree: Vec<u32>,
    /// `λ_α = ρ_α - [α ∈ 𝒜_D]`.
    pub lambda: Vec<u32>,
}

impl DivisorScheme {
    pub fn new(labels: Vec<String>, rho: Vec<u32>, in_d: Vec<bool>) -> Result<Self> {
        if labels.len() != rho.len() || labels.len() != in_d.len() {
            return Err(Error::Invalid("divisor data of unequal lengths".into()));
        }
        if rho.iter().any(|&r| r < 2) {
            return Err(Error::Invalid("every rho must be at least 2".into()));
        }
        let lambda: Vec<u32> = rho.iter().zip(&in_d).map(|(r, d)| r - *d as u32).collect();
        let residue_degree = vec![1; labels.len()];
        Ok(Self { labels, rho, in_d, residue_degree, lambda })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `𝒜_D`.
    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.in_d[i]).collect()
    }

    /// `𝒜 ∖ 𝒜_D`.
    pub fn open_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.in_d[i]).collect()
    }
}

/// A downward-closed simplicial complex stored through its maximal faces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClemensComplex {
    pub place: Place,
    pub vertices: Vec<usize>,
    pub maximal_faces: Vec<Vec<usize>>,
}

impl ClemensComplex {
    /// `max |A| - 1`; the empty complex has dimension -1.
    pub fn dimension(&self) -> i64 {
        self.maximal_faces.iter().map(|f| f.len() as i64).max().unwrap_or(0) - 1
    }

    pub fn is_face(&self, a: &[usize]) -> bool {
        !a.is_empty() && self.maximal_faces.iter().any(|f| a.iter().all(|v| f.contains(v)))
    }

    /// All nonempty faces, ordered by size and then lexicographically.
    pub fn faces(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for f in &self.maximal_faces {
            for sub in subsets(f) {
                if !sub.is_empty() && !out.contains(&sub) {
                    out.push(sub);
                }
            }
        }
        out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
        out
    }

    /// Largest face all of whose vertices satisfy `keep`; 0 if none.
    pub fn max_face_size<F: Fn(usize) -> bool>(&self, keep: F) -> usize {
        self.faces().iter().filter(|f| f.iter().all(|&v| keep(v))).map(|f| f.len()).max().unwrap_or(0)
    }
}

/// All subsets of a small vertex list, each sorted.
pub fn subsets(v: &[usize]) -> Vec<Vec<usize>> {
    (0..1usize << v.len()).map(|mask| (0..v.len()).filter(|i| mask >> i & 1 == 1).map(|i| v[i]).collect()).collect()
}

/// `𝒞^an_{F_v}`: faces are the sets `A` of vertices with `D_A(F_v) ≠ ∅`.
pub fn clemens_complex(model: &CompactificationModel, place: Place, restrict_to_d: bool) -> ClemensComplex {
    let ds = model.divisor_scheme();
    let vertices: Vec<usize> = if restrict_to_d { ds.boundary_indices() } else { (0..ds.len()).collect() };
    let faces: Vec<Vec<usize>> =
        subsets(&vertices).into_iter().filter(|a| !a.is_empty() && model.has_points(place, a)).collect();
    let maximal_faces: Vec<Vec<usize>> = faces
        .iter()
        .filter(|a| !faces.iter().any(|b| b.len() > a.len() && a.iter().all(|v| b.contains(v))))
        .cloned()
        .collect();
    ClemensComplex { place, vertices, maximal_faces }
}

/// JSON view of a Clemens complex with 1-based vertex labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClemensReport {
    pub model: String,
    pub place: Place,
    pub vertices: Vec<usize>,
    pub labels: Vec<String>,
    pub faces: Vec<Vec<usize>>,
    pub maximal_faces: Vec<Vec<usize>>,
    pub dimension: i64,
}

impl ClemensReport {
    pub fn new(model: &CompactificationModel, cx: &ClemensComplex) -> Self {
        let ds = model.divisor_scheme();
        let one = |f: &Vec<usize>| f.iter().map(|v| v + 1).collect::<Vec<_>>();
        Self {
            model: model.id.clone(),
            place: cx.place,
            vertices: cx.vertices.iter().map(|v| v + 1).collect(),
            labels: cx.vertices.iter().map(|v| ds.labels[*v].clone()).collect(),
            faces: cx.faces().iter().map(one).collect(),
            maximal_faces: cx.maximal_faces.iter().map(one).collect(),
            dimension: cx.dimension(),
        }
    }
}

/// Rank of the Euler-Poincaré module of `U`: `#(𝒜 ∖ 𝒜_D)` in the split case.
pub fn ep_rank(model: &CompactificationModel) -> usize {
    model.divisor_scheme().open_indices().len()
}

fn check_places(s: &[Place]) -> Result<()> {
    if !s.contains(&Place::Real) {
        return Err(Error::Invalid("S must contain the real place".into()));
    }
    if s.contains(&Place::Complex) {
        return Err(Error::Invalid("places of Q are real or finite".into()));
    }
    Ok(())
}

/// `b = rk EP(U) + Σ_{v ∈ S} (1 + dim 𝒞^an_{F_v}(D))`; an empty complex contributes 0.
pub fn exponent_b(model: &CompactificationModel, s: &[Place]) -> Result<usize> {
    check_places(s)?;
    let clemens: i64 = s.iter().map(|&v| 1 + clemens_complex(model, v, true).dimension()).sum();
    Ok(ep_rank(model) + clemens as usize)
}

/// `d_α(a)`: pole order of `f_a = Σ a_i x_i` along `D_α`. On a product of projective
/// spaces, `f_a` has a simple pole along the hyperplane at infinity of every factor
/// carrying a nonzero coefficient.
pub fn divisor_coefficients(model: &CompactificationModel, a: &[Rational]) -> Result<Vec<u32>> {
    if a.len() != model.dim() {
        return Err(Error::Invalid(format!("{} expects {} coordinates", model.id, model.dim())));
    }
    if a.iter().all(|v| v.is_zero()) {
        return Err(Error::Invalid("a must be nonzero".into()));
    }
    Ok(model.coordinate_ranges().into_iter().map(|r| a[r].iter().any(|v| !v.is_zero()) as u32).collect())
}

/// Pole orders `(b_0, b_a)` of `Ĥ(0; sλ)` and `Ĥ(a; sλ)` at `s = 1`. For `a ≠ 0` only the
/// divisors with `d_α(a) = 0` contribute.
pub fn pole_orders(model: &CompactificationModel, s: &[Place], a: &[Rational]) -> Result<(usize, usize)> {
    check_places(s)?;
    let ds = model.divisor_scheme();
    let b0 = exponent_b(model, s)?;
    if a.iter().all(|v| v.is_zero()) {
        return Ok((b0, b0));
    }
    let pattern = divisor_coefficients(model, a)?;
    Ok((b0, pole_order_for_pattern(model, s, &pattern, &ds)))
}

fn pole_order_for_pattern(model: &CompactificationModel, s: &[Place], pattern: &[u32], ds: &DivisorScheme) -> usize {
    let open = ds.open_indices().into_iter().filter(|&i| pattern[i] == 0).count();
    let boundary: usize = s.iter().map(|&v| clemens_complex(model, v, true).max_face_size(|i| pattern[i] == 0)).sum();
    open + boundary
}

/// A locus of linear forms on which `d_α(a)` is constant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterStratum {
    pub label: String,
    /// `d_α(a)` for each divisor.
    pub pattern: Vec<u32>,
}

impl CharacterStratum {
    pub fn contains(&self, model: &CompactificationModel, a: &[Rational]) -> bool {
        divisor_coefficients(model, a).map(|p| p == self.pattern).unwrap_or(false)
    }

    /// `b_a` for any `a` in this stratum.
    pub fn pole_order(&self, model: &CompactificationModel, s: &[Place]) -> Result<usize> {
        check_places(s)?;
        Ok(pole_order_for_pattern(model, s, &self.pattern, &model.divisor_scheme()))
    }
}

/// Character strata: one for each nonempty set of factors on which `a` is nonzero.
pub fn character_strata(model: &CompactificationModel) -> Vec<CharacterStratum> {
    let ranges = model.coordinate_ranges();
    let r = model.rank();
    (1..1usize << r)
        .map(|mask| {
            let pattern: Vec<u32> = (0..r).map(|i| (mask >> i & 1) as u32).collect();
            let label = ranges
                .iter()
                .enumerate()
                .map(|(i, rg)| {
                    let names: Vec<String> = rg.clone().map(|c| format!("a{}", c + 1)).collect();
                    let joined = names.join(",");
                    if pattern[i] == 1 {
                        format!("({joined})!=0")
                    } else {
                        format!("({joined})=0")
                    }
                })
                .collect::<Vec<_>>()
                .join(" ");
            CharacterStratum { label, pattern }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(id: &str) -> CompactificationModel {
        CompactificationModel::catalog(id).unwrap()
    }

    fn r(n: i128) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn clemens_examples() {
        let c = clemens_complex(&m("E3"), Place::Real, true);
        assert_eq!(c.vertices, vec![0]);
        assert_eq!(c.dimension(), 0);
        let c = clemens_complex(&m("E5"), Place::Real, true);
        assert_eq!(c.faces(), vec![vec![0], vec![1], vec![0, 1]]);
        assert_eq!(c.dimension(), 1);
        let rep = ClemensReport::new(&m("E5"), &c);
        assert_eq!(rep.faces, vec![vec![1], vec![2], vec![1, 2]]);
        let c = clemens_complex(&m("E1"), Place::Finite(5), true);
        assert_eq!(c.dimension(), 0);
        assert_eq!(clemens_complex(&m("E2"), Place::Real, true).dimension(), -1);
    }

    #[test]
    fn complexes_are_downward_closed() {
        for model in CompactificationModel::all() {
            for v in [Place::Real, Place::Finite(2), Place::Finite(3)] {
                for restrict in [true, false] {
                    let c = clemens_complex(&model, v, restrict);
                    for f in c.faces() {
                        for sub in subsets(&f) {
                            assert!(sub.is_empty() || c.is_face(&sub));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ep_rank_examples() {
        assert_eq!(ep_rank(&m("E3")), 0);
        assert_eq!(ep_rank(&m("E4")), 1);
        assert_eq!(ep_rank(&m("E2")), 1);
    }

    #[test]
    fn exponent_b_examples() {
        assert_eq!(exponent_b(&m("E1"), &[Place::Real]).unwrap(), 1);
        assert_eq!(exponent_b(&m("E5"), &[Place::Real]).unwrap(), 2);
        assert_eq!(exponent_b(&m("E1"), &[Place::Real, Place::Finite(5)]).unwrap(), 2);
        assert_eq!(exponent_b(&m("E4"), &[Place::Real]).unwrap(), 2);
        assert_eq!(exponent_b(&m("E6"), &[Place::Real]).unwrap(), 1);
        assert!(exponent_b(&m("E1"), &[Place::Finite(5)]).is_err());
    }

    #[test]
    fn exponent_b_is_additive_in_places() {
        for model in CompactificationModel::all() {
            let base = exponent_b(&model, &[Place::Real]).unwrap();
            for p in [2u64, 3, 5, 7] {
                let b = exponent_b(&model, &[Place::Real, Place::Finite(p)]).unwrap();
                let dim = clemens_complex(&model, Place::Finite(p), true).dimension();
                assert_eq!(b as i64, base as i64 + 1 + dim);
            }
        }
    }

    #[test]
    fn pole_order_examples() {
        assert_eq!(pole_orders(&m("E3"), &[Place::Real], &[r(0), r(0)]).unwrap().0, 1);
        let (b0, ba) = pole_orders(&m("E5"), &[Place::Real], &[r(1), r(0)]).unwrap();
        assert_eq!((b0, ba), (2, 1));
        let (b0, ba) = pole_orders(&m("E5"), &[Place::Real], &[r(1), r(1)]).unwrap();
        assert_eq!((b0, ba), (2, 0));
    }

    #[test]
    fn divisor_coefficient_examples() {
        assert_eq!(divisor_coefficients(&m("E3"), &[r(1), r(1)]).unwrap(), vec![1]);
        assert_eq!(divisor_coefficients(&m("E5"), &[r(1), r(0)]).unwrap(), vec![1, 0]);
        assert_eq!(divisor_coefficients(&m("E1"), &[r(1)]).unwrap(), vec![1]);
        assert!(divisor_coefficients(&m("E1"), &[r(0)]).is_err());
    }

    #[test]
    fn coefficients_are_homogeneous() {
        for model in CompactificationModel::all() {
            for a in [[3i128, 0], [0, -2], [5, 7], [1, 1]] {
                let a: Vec<Rational> = a[..model.dim()].iter().map(|v| r(*v)).collect();
                if a.iter().all(|v| v.is_zero()) {
                    continue;
                }
                let base = divisor_coefficients(&model, &a).unwrap();
                for t in [Rational::new(-3, 7), Rational::new(11, 2)] {
                    let ta: Vec<Rational> = a.iter().map(|v| v * t).collect();
                    assert_eq!(divisor_coefficients(&model, &ta).unwrap(), base);
                }
            }
        }
    }

    #[test]
    fn strata_partition_nonzero_forms() {
        assert_eq!(character_strata(&m("E5")).len(), 3);
        assert_eq!(character_strata(&m("E3")).len(), 1);
        assert_eq!(character_strata(&m("E1")).len(), 1);
        for model in CompactificationModel::all() {
            let strata = character_strata(&model);
            for x in -2i128..=2 {
                for y in -2i128..=2 {
                    let a: Vec<Rational> = [x, y][..model.dim()].iter().map(|v| r(*v)).collect();
                    if a.iter().all(|v| v.is_zero()) {
                        continue;
                    }
                    let hits: Vec<&CharacterStratum> = strata.iter().filter(|s| s.contains(&model, &a)).collect();
                    assert_eq!(hits.len(), 1);
                    assert_eq!(hits[0].pattern, divisor_coefficients(&model, &a).unwrap());
                }
            }
        }
    }

    #[test]
    fn scheme_invariants() {
        for model in CompactificationModel::all() {
            let ds = model.divisor_scheme();
            assert!(ds.rho.iter().all(|&r| r >= 2));
            assert!(ds.lambda.iter().all(|&l| l >= 1));
        }
        assert!(DivisorScheme::new(vec!["x".into()], vec![1], vec![false]).is_err());
    }
}
