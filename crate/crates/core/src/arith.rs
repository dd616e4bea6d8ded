//! Integer arithmetic, compensated summation and the real Riemann zeta function.

use num_complex::Complex64;

/// Deterministic primality test for 64-bit integers (Miller-Rabin with a fixed witness set).
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: i128, m: i128) -> Option<i128> {
    let (mut old_r, mut r) = (a.rem_euclid(m), m);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    (old_r == 1).then(|| old_s.rem_euclid(m))
}

/// `p^e` if it fits in a `u64`.
pub fn checked_pow(p: u64, e: u32) -> Option<u64> {
    p.checked_pow(e)
}

/// Primes up to and including `n`, by the sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Möbius function on `0..=n` (index 0 is unused and set to 0).
pub fn mobius_table(n: usize) -> Vec<i8> {
    let mut mu = vec![1i8; n + 1];
    if n == 0 {
        mu[0] = 0;
        return mu;
    }
    mu[0] = 0;
    let mut composite = vec![false; n + 1];
    for i in 2..=n {
        if !composite[i] {
            let mut j = i;
            while j <= n {
                if j > i {
                    composite[j] = true;
                }
                mu[j] = -mu[j];
                j += i;
            }
            let sq = i.saturating_mul(i);
            let mut j = sq;
            while j <= n {
                mu[j] = 0;
                j += sq;
            }
        }
    }
    mu
}

/// Prime factorisation by trial division.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Exponent of `p` in the nonzero integer `n`.
pub fn val_int(mut n: i128, p: u64) -> u32 {
    debug_assert!(n != 0);
    let p = p as i128;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// Largest `r` with `r^k <= n`.
pub fn iroot(n: u64, k: u32) -> u64 {
    if k == 1 || n < 2 {
        return n;
    }
    let mut r = (n as f64).powf(1.0 / k as f64).round() as u64;
    while r > 0 && r.checked_pow(k).map_or(true, |v| v > n) {
        r -= 1;
    }
    while (r + 1).checked_pow(k).is_some_and(|v| v <= n) {
        r += 1;
    }
    r
}

/// All positive integers up to `limit` whose prime factors lie in `primes`, sorted.
pub fn smooth_numbers(primes: &[u64], limit: u64) -> Vec<u64> {
    let mut out = vec![1u64];
    for &p in primes {
        let mut next = Vec::new();
        for &d in &out {
            let mut x = d;
            while x <= limit {
                next.push(x);
                match x.checked_mul(p) {
                    Some(y) => x = y,
                    None => break,
                }
            }
        }
        out = next;
    }
    out.retain(|&d| d <= limit);
    out.sort_unstable();
    out
}

/// Jordan's totient `J_k(n) = n^k ∏_{p | n} (1 - p^{-k})`, as a float.
pub fn jordan_totient(n: u64, k: u32) -> f64 {
    let mut acc = (n as f64).powi(k as i32);
    for (p, _) in factorize(n) {
        acc *= 1.0 - (p as f64).powi(-(k as i32));
    }
    acc
}

/// Neumaier compensated sum of reals.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of complex numbers, componentwise.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexSum {
    re: KahanSum,
    im: KahanSum,
}

impl ComplexSum {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

const BERNOULLI_2K: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Riemann zeta function for real `x > 0`, `x != 1`, by Euler-Maclaurin summation.
pub fn riemann_zeta(x: f64) -> f64 {
    assert!(x > 0.0 && x != 1.0, "riemann_zeta needs x > 0, x != 1");
    let n = 20.0f64;
    let mut acc = KahanSum::default();
    for k in 1..20 {
        acc.add((k as f64).powf(-x));
    }
    acc.add(n.powf(1.0 - x) / (x - 1.0));
    acc.add(0.5 * n.powf(-x));
    // B_{2k}/(2k)! * x(x+1)...(x+2k-2) * n^{-x-2k+1}
    let mut rising = x;
    let mut fact = 2.0;
    let mut npow = n.powf(-x - 1.0);
    for (k, b) in BERNOULLI_2K.iter().enumerate() {
        let k = k + 1;
        acc.add(b / fact * rising * npow);
        let a = (2 * k - 1) as f64;
        rising *= (x + a) * (x + a + 1.0);
        fact *= ((2 * k + 1) * (2 * k + 2)) as f64;
        npow /= n * n;
    }
    acc.value()
}

/// Polynomial extrapolation to zero (Neville) from samples `(h_i, f_i)`.
/// Returns the tableau diagonal: entry `k` uses the first `k+1` samples.
pub fn neville_to_zero(h: &[f64], f: &[f64]) -> Vec<f64> {
    let n = h.len();
    let mut p = f.to_vec();
    let mut diag = vec![p[0]];
    for k in 1..n {
        for i in (k..n).rev() {
            p[i] = (h[i] * p[i - 1] - h[i - k] * p[i]) / (h[i] - h[i - k]);
        }
        diag.push(p[k]);
    }
    diag
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes_and_primality_agree() {
        let ps = primes_up_to(2000);
        for n in 0..2000u64 {
            assert_eq!(is_prime(n), ps.binary_search(&n).is_ok(), "n = {n}");
        }
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(1_000_000_007 * 3));
    }

    #[test]
    fn mobius_small_values() {
        let mu = mobius_table(12);
        assert_eq!(&mu[1..], &[1, -1, -1, 0, -1, 1, -1, 0, 0, 1, -1, 0]);
    }

    #[test]
    fn zeta_known_values() {
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((riemann_zeta(2.0) - pi2 / 6.0).abs() < 1e-14);
        assert!((riemann_zeta(4.0) - pi2 * pi2 / 90.0).abs() < 1e-14);
        assert!((riemann_zeta(3.0) - 1.202_056_903_159_594_2).abs() < 1e-14);
        // Laurent expansion near 1: 1/(x-1) + gamma
        let e = 2f64.powi(-20);
        assert!((riemann_zeta(1.0 + e) - 1.0 / e - 0.577_215_664_901_532_9).abs() < 1e-5);
    }

    #[test]
    fn integer_roots() {
        for n in [0u64, 1, 2, 3, 4, 8, 9, 26, 27, 28, 999_999, 1_000_000, u64::MAX] {
            for k in 2..5 {
                let r = iroot(n, k);
                assert!(r.checked_pow(k).unwrap() <= n);
                assert!((r + 1).checked_pow(k).map_or(true, |v| v > n));
            }
        }
    }

    #[test]
    fn smooth_numbers_up_to_100() {
        let s = smooth_numbers(&[2, 5], 100);
        assert_eq!(s, vec![1, 2, 4, 5, 8, 10, 16, 20, 25, 32, 40, 50, 64, 80, 100]);
    }

    #[test]
    fn neville_recovers_polynomial_limit() {
        let h = [0.1, 0.05, 0.02, 0.01];
        let f: Vec<f64> = h.iter().map(|x| 3.0 + 2.0 * x - 5.0 * x * x).collect();
        let d = neville_to_zero(&h, &f);
        assert!((d[2] - 3.0).abs() < 1e-12);
    }
}
