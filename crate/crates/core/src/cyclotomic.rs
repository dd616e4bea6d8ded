//! Exact combinations of `p^M`-th roots of unity.
//!
//! The only linear relations among the `ζ^t` (`ζ = e^{2πi/p^M}`) are the coset sums
//! `Σ_j ζ^{r + j p^{M-1}} = 0`. Subtracting the first entry of every coset gives a
//! canonical form in which the zero element is the zero vector, so vanishing is
//! decided without any tolerance as long as the coefficients themselves are exact.

use crate::arith::ComplexSum;
use crate::localfield::root_of_unity;
use num_complex::Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct CyclotomicSum {
    p: u64,
    exponent: u32,
    coeffs: Vec<Complex64>,
}

impl CyclotomicSum {
    pub fn new(p: u64, exponent: u32) -> Self {
        Self { p, exponent, coeffs: vec![Complex64::new(0.0, 0.0); p.pow(exponent) as usize] }
    }

    pub fn order(&self) -> u64 {
        self.coeffs.len() as u64
    }

    /// Add `ζ^t`.
    pub fn push(&mut self, t: u64) {
        self.add(t, Complex64::new(1.0, 0.0));
    }

    /// Add `w ζ^t`.
    pub fn add(&mut self, t: u64, w: Complex64) {
        let n = self.coeffs.len() as u64;
        self.coeffs[(t % n) as usize] += w;
    }

    pub fn canonical(&self) -> Self {
        let mut out = self.clone();
        if self.exponent == 0 {
            return out;
        }
        let stride = self.p.pow(self.exponent - 1) as usize;
        for r in 0..stride {
            let m = out.coeffs[r];
            if m != Complex64::new(0.0, 0.0) {
                for j in 0..self.p as usize {
                    out.coeffs[r + j * stride] -= m;
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.canonical().coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }

    pub fn to_complex(&self) -> Complex64 {
        let n = self.coeffs.len() as i128;
        let mut acc = ComplexSum::default();
        for (t, c) in self.canonical().coeffs.iter().enumerate() {
            if *c != Complex64::new(0.0, 0.0) {
                acc.add(root_of_unity(t as i128, n) * c);
            }
        }
        acc.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_coset_is_zero() {
        let mut s = CyclotomicSum::new(3, 2);
        for t in [1, 4, 7] {
            s.push(t);
        }
        assert!(s.is_zero());
        assert_eq!(s.to_complex(), Complex64::new(0.0, 0.0));
        s.push(2);
        assert!(!s.is_zero());
        assert!((s.to_complex() - root_of_unity(2, 9)).norm() < 1e-15);
    }

    #[test]
    fn all_roots_sum_to_zero() {
        let mut s = CyclotomicSum::new(5, 2);
        for t in 0..25 {
            s.push(t);
        }
        assert!(s.is_zero());
    }

    #[test]
    fn weighted_sums_match_direct_evaluation() {
        let mut s = CyclotomicSum::new(2, 3);
        let w = [0.5, -1.0, 2.0, 0.25, 0.0, 1.0, -3.0, 1.5];
        let mut direct = Complex64::new(0.0, 0.0);
        for (t, x) in w.iter().enumerate() {
            s.add(t as u64, Complex64::new(*x, 0.0));
            direct += root_of_unity(t as i128, 8) * x;
        }
        assert!((s.to_complex() - direct).norm() < 1e-14);
    }
}
