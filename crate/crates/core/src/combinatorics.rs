//! Exact integer combinatorics: binomials, falling factorials, and the
//! permutation count `D(r,s,t,k,l,i,j)` together with its brute-force oracle.
//!
//! The element set `{0..n}` is split into consecutive blocks `A` (size `r`),
//! `B` (size `s`) and `C` (size `t`). `D` counts permutations whose first `k`
//! positions hold exactly `i` elements of `C` and whose first `k + l`
//! positions hold exactly `j` elements of `A`.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Longest permutation the enumeration oracles will walk (10! = 3,628,800).
pub const ENUMERATION_LIMIT: usize = 10;

/// Binomial coefficient with the convention `C(a, b) = 0` whenever `b < 0` or `a < b`.
pub fn binom_safe(a: i64, b: i64) -> BigUint {
    if b < 0 || a < b || a < 0 {
        return BigUint::zero();
    }
    let b = b.min(a - b) as u64;
    let a = a as u64;
    let mut acc = BigUint::one();
    for step in 0..b {
        acc *= a - step;
        acc /= step + 1;
    }
    acc
}

/// `binom_safe` for small arguments, as `f64`.
pub fn binom_f64(a: i64, b: i64) -> f64 {
    if b < 0 || a < b || a < 0 {
        return 0.0;
    }
    let b = b.min(a - b);
    let mut acc = 1.0;
    for step in 0..b {
        acc = acc * (a - step) as f64 / (step + 1) as f64;
    }
    acc.round()
}

/// Falling factorial `a (a-1) ... (a-b+1)`; equals 1 when `b = 0`.
pub fn falling_factorial(a: i64, b: u32) -> BigInt {
    let mut acc = BigInt::one();
    for step in 0..b as i64 {
        acc *= a - step;
    }
    acc
}

pub fn factorial(n: u64) -> BigUint {
    (2..=n).fold(BigUint::one(), |acc, v| acc * v)
}

/// Parameters of the permutation count. Negative entries are admitted and
/// describe an empty set of permutations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CountParams {
    pub r: i64,
    pub s: i64,
    pub t: i64,
    pub k: i64,
    pub ell: i64,
    pub i: i64,
    pub j: i64,
}

impl CountParams {
    pub fn new(r: i64, s: i64, t: i64, k: i64, ell: i64, i: i64, j: i64) -> Self {
        Self {
            r,
            s,
            t,
            k,
            ell,
            i,
            j,
        }
    }

    pub fn len(&self) -> i64 {
        self.r + self.s + self.t
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn is_degenerate(&self) -> bool {
        let n = self.len();
        [self.r, self.s, self.t, self.k, self.ell, self.i, self.j]
            .iter()
            .any(|&v| v < 0)
            || self.k + self.ell > n
            || self.i > self.t.min(self.k)
            || self.j > self.r.min(self.k + self.ell)
    }

    /// The same set of permutations described from the far end of the
    /// sequence, with the roles of `A` and `C` exchanged.
    pub fn reversed(&self) -> Self {
        let n = self.len();
        Self::new(
            self.t,
            self.s,
            self.r,
            n - self.k - self.ell,
            self.ell,
            self.r - self.j,
            self.t - self.i,
        )
    }
}

/// Closed-form count of permutations with the prescribed block hits.
pub fn count_d(p: &CountParams) -> BigUint {
    if p.is_degenerate() {
        return BigUint::zero();
    }
    let n = p.len();
    let CountParams {
        r,
        s,
        t,
        k,
        ell,
        i,
        j,
    } = *p;
    // n! / multinomial(n; k, l, n-k-l) after cancellation.
    let prefactor = factorial(k as u64) * factorial(ell as u64) * factorial((n - k - ell) as u64);
    let lo = 0.max(j - ell);
    let hi = j.min(k - i);
    let mut sum = BigUint::zero();
    for m in lo..=hi {
        sum += binom_safe(j, m) * binom_safe(s, k - i - m) * binom_safe(s + t + m - k, ell + m - j);
    }
    prefactor * binom_safe(t, i) * binom_safe(r, j) * sum
}

/// Table of oracle counts for every `(k, l, i, j)` at fixed block sizes.
#[derive(Clone, Debug)]
pub struct CountHistogram {
    n: usize,
    counts: Vec<u64>,
}

impl CountHistogram {
    fn index(&self, k: usize, ell: usize, i: usize, j: usize) -> usize {
        let d = self.n + 1;
        ((k * d + ell) * d + i) * d + j
    }

    /// Count for `(k, l, i, j)`; zero for any out-of-range argument.
    pub fn get(&self, k: i64, ell: i64, i: i64, j: i64) -> u64 {
        let n = self.n as i64;
        if [k, ell, i, j].iter().any(|&v| v < 0 || v > n) || k + ell > n {
            return 0;
        }
        self.counts[self.index(k as usize, ell as usize, i as usize, j as usize)]
    }
}

/// Walks all permutations of `{0..n}` in parallel, splitting on the first
/// element, and folds each into an accumulator. Aggregation order is fixed.
pub(crate) fn fold_permutations<A, F, M>(
    n: usize,
    init: impl Fn() -> A + Sync,
    visit: F,
    merge: M,
) -> Result<A>
where
    A: Send,
    F: Fn(&mut A, &[u8]) + Sync,
    M: Fn(&mut A, A),
{
    if n > ENUMERATION_LIMIT {
        return Err(Error::BudgetExceeded {
            requested: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    if n == 0 {
        let mut acc = init();
        visit(&mut acc, &[]);
        return Ok(acc);
    }
    let parts: Vec<A> = (0..n as u8)
        .into_par_iter()
        .map(|first| {
            let mut acc = init();
            let mut perm: Vec<u8> = std::iter::once(first)
                .chain((0..n as u8).filter(|&v| v != first))
                .collect();
            heap_permute_tail(&mut perm, |p| visit(&mut acc, p));
            acc
        })
        .collect();
    let mut iter = parts.into_iter();
    let mut total = iter.next().expect("n >= 1");
    for part in iter {
        merge(&mut total, part);
    }
    Ok(total)
}

/// Heap's algorithm over `perm[1..]`, keeping `perm[0]` fixed.
fn heap_permute_tail(perm: &mut [u8], mut visit: impl FnMut(&[u8])) {
    let len = perm.len() - 1;
    visit(perm);
    if len < 2 {
        return;
    }
    let mut c = vec![0usize; len];
    let mut idx = 0;
    while idx < len {
        if c[idx] < idx {
            if idx % 2 == 0 {
                perm.swap(1, 1 + idx);
            } else {
                perm.swap(1 + c[idx], 1 + idx);
            }
            visit(perm);
            c[idx] += 1;
            idx = 0;
        } else {
            c[idx] = 0;
            idx += 1;
        }
    }
}

/// Enumerates every permutation once and tallies all `(k, l, i, j)` at once.
pub fn count_d_oracle_histogram(r: usize, s: usize, t: usize) -> Result<CountHistogram> {
    let n = r + s + t;
    let d = n + 1;
    let size = d * d * d * d;
    let counts = fold_permutations(
        n,
        || vec![0u64; size],
        |acc, perm| {
            // prefix counts of C and A elements
            let mut c_hits = [0usize; ENUMERATION_LIMIT + 1];
            let mut a_hits = [0usize; ENUMERATION_LIMIT + 1];
            for (pos, &e) in perm.iter().enumerate() {
                let e = e as usize;
                c_hits[pos + 1] = c_hits[pos] + usize::from(e >= r + s);
                a_hits[pos + 1] = a_hits[pos] + usize::from(e < r);
            }
            for k in 0..=n {
                for ell in 0..=(n - k) {
                    acc[((k * d + ell) * d + c_hits[k]) * d + a_hits[k + ell]] += 1;
                }
            }
        },
        |total, part| total.iter_mut().zip(part).for_each(|(a, b)| *a += b),
    )?;
    Ok(CountHistogram { n, counts })
}

/// Brute-force count by enumerating all `(r+s+t)!` permutations.
pub fn count_d_oracle(p: &CountParams) -> Result<BigUint> {
    let n = p.len();
    if n < 0 || [p.r, p.s, p.t].iter().any(|&v| v < 0) {
        return Ok(BigUint::zero());
    }
    if n as usize > ENUMERATION_LIMIT {
        return Err(Error::BudgetExceeded {
            requested: n as usize,
            limit: ENUMERATION_LIMIT,
        });
    }
    if p.k < 0 || p.ell < 0 || p.k + p.ell > n {
        return Ok(BigUint::zero());
    }
    let (r, s, k, kl) = (p.r as u8, p.s as u8, p.k as usize, (p.k + p.ell) as usize);
    let (want_i, want_j) = (p.i, p.j);
    let hits = fold_permutations(
        n as usize,
        || 0u64,
        |acc, perm| {
            let c_in_k = perm[..k].iter().filter(|&&e| e >= r + s).count() as i64;
            let a_in_kl = perm[..kl].iter().filter(|&&e| e < r).count() as i64;
            if c_in_k == want_i && a_in_kl == want_j {
                *acc += 1;
            }
        },
        |total, part| *total += part,
    )?;
    Ok(BigUint::from(hits))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn binomial_convention() {
        assert_eq!(binom_safe(5, 2), big(10));
        assert_eq!(binom_safe(3, 5), big(0));
        assert_eq!(binom_safe(4, -1), big(0));
        assert_eq!(binom_safe(0, 0), big(1));
        assert_eq!(binom_safe(-2, 1), big(0));
        assert_eq!(binom_f64(10, 3), 120.0);
    }

    #[test]
    fn falling_factorials() {
        assert_eq!(falling_factorial(5, 2), BigInt::from(20));
        assert_eq!(falling_factorial(3, 0), BigInt::from(1));
        assert_eq!(falling_factorial(2, 3), BigInt::from(0));
    }

    #[test]
    fn binomial_absorption_identity() {
        for s in 0..=30i64 {
            for r in 0..=s {
                assert_eq!(
                    binom_safe(s - 1, r) * BigUint::from(s as u64),
                    binom_safe(s, r) * BigUint::from((s - r) as u64),
                    "s={s} r={r}"
                );
            }
        }
    }

    #[test]
    fn small_counts() {
        let p = CountParams::new(1, 1, 1, 1, 1, 0, 1);
        assert_eq!(count_d(&p), big(3));
        assert_eq!(count_d_oracle(&p).unwrap(), big(3));
        let q = CountParams::new(0, 2, 0, 1, 0, 0, 0);
        assert_eq!(count_d(&q), big(2));
        assert_eq!(count_d_oracle(&q).unwrap(), big(2));
    }

    #[test]
    fn six_element_case_matches_enumeration() {
        let p = CountParams::new(2, 2, 2, 2, 2, 1, 1);
        let oracle = count_d_oracle(&p).unwrap();
        assert_eq!(count_d(&p), oracle);
        // frozen from the enumeration oracle
        assert_eq!(oracle, big(224));
    }

    #[test]
    fn too_many_hits_is_empty() {
        for i in 0..5 {
            let p = CountParams::new(1, 1, 2, 1, 2, i, 0);
            if i > 1 {
                assert_eq!(count_d(&p), big(0));
            }
        }
        assert_eq!(count_d(&CountParams::new(1, 1, 1, 1, 1, 0, -1)), big(0));
    }

    #[test]
    fn budget_is_enforced() {
        let p = CountParams::new(4, 4, 3, 1, 1, 0, 0);
        assert!(matches!(
            count_d_oracle(&p),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn histogram_agrees_with_single_oracle() {
        let h = count_d_oracle_histogram(2, 1, 2).unwrap();
        for k in 0..=5 {
            for ell in 0..=(5 - k) {
                for i in 0..=2 {
                    for j in 0..=2 {
                        let p = CountParams::new(2, 1, 2, k, ell, i, j);
                        assert_eq!(
                            BigUint::from(h.get(k, ell, i, j)),
                            count_d_oracle(&p).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn total_mass_is_n_factorial() {
        for (r, s, t) in [(1, 2, 3), (2, 0, 2), (0, 3, 1)] {
            let n = r + s + t;
            for k in 0..=n {
                for ell in 0..=(n - k) {
                    let mut total = BigUint::zero();
                    for i in 0..=n {
                        for j in 0..=n {
                            total += count_d(&CountParams::new(r, s, t, k, ell, i, j));
                        }
                    }
                    assert_eq!(total, factorial(n as u64));
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn reversal_symmetry(r in 0i64..5, s in 0i64..5, t in 0i64..5, k in 0i64..64, ell in 0i64..64, i in 0i64..64, j in 0i64..64) {
            let n = r + s + t;
            let k = k % (n + 1);
            let ell = ell % (n - k + 1);
            let (i, j) = (i % (t + 1), j % (r + 1));
            let p = CountParams::new(r, s, t, k, ell, i, j);
            proptest::prop_assert_eq!(count_d(&p), count_d(&p.reversed()));
        }
    }
}
