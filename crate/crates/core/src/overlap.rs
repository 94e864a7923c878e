//! Exact tie probabilities for order statistics of two overlapping samples.
//!
//! With pooled observations `X_1..X_{n+r}`, the first sample is positions
//! `1..=m` and the second is `r+1..=r+n`. `p(k, l)` is the probability that
//! the `i`-th order statistic of the first sample is the `k`-th of the pool
//! while the `j`-th of the second sample is the `l`-th of the pool.

use std::fmt::Write as _;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binom_safe, count_d, factorial, fold_permutations, CountParams};
use crate::error::{Error, Result};
use crate::rational::ExactRational;

/// Largest pooled size accepted by [`p_table_oracle`].
pub const TABLE_ORACLE_LIMIT: usize = 9;

/// Two overlapping samples and the order-statistic index taken from each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OverlapSpec {
    pub r: u32,
    pub m: u32,
    pub n: u32,
    pub i: u32,
    pub j: u32,
}

impl OverlapSpec {
    pub fn new(r: u32, m: u32, n: u32, i: u32, j: u32) -> Result<Self> {
        let spec = Self { r, m, n, i, j };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { r, m, n, i, j } = *self;
        if m == 0 || n == 0 {
            return Err(Error::InvalidSpec(format!(
                "sample sizes must be positive (m={m}, n={n})"
            )));
        }
        if i == 0 || i > m {
            return Err(Error::InvalidSpec(format!("i={i} must lie in 1..={m}")));
        }
        if j == 0 || j > n {
            return Err(Error::InvalidSpec(format!("j={j} must lie in 1..={n}")));
        }
        if r >= m {
            return Err(Error::InvalidSpec(format!(
                "samples do not overlap: offset r={r} must be below m={m}"
            )));
        }
        if m > n + r {
            return Err(Error::InvalidSpec(format!(
                "first sample (m={m}) extends past the pooled sample (n+r={})",
                n + r
            )));
        }
        Ok(())
    }

    /// Size of the pooled sample `n + r`.
    pub fn pooled(&self) -> u32 {
        self.n + self.r
    }

    /// Sizes of the blocks only in the first sample, shared, and only in the second.
    pub fn blocks(&self) -> (u32, u32, u32) {
        (self.r, self.m - self.r, self.n + self.r - self.m)
    }

    /// The spec seen with the positions read backwards: the second sample
    /// becomes the first. `p(k, l)` for `self` equals `p(l, k)` for the result.
    pub fn reflected(&self) -> Self {
        Self {
            r: self.n + self.r - self.m,
            m: self.n,
            n: self.m,
            i: self.j,
            j: self.i,
        }
    }

    /// Whether `(k, l)` lies in the rectangle outside of which `p(k, l)` vanishes.
    pub fn in_support(&self, k: u32, ell: u32) -> bool {
        let Self { r, m, n, i, j } = *self;
        i <= k && k + m <= i + n + r && j <= ell && ell <= j + r
    }
}

/// Which branch of the closed form produced an entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieCase {
    /// `k < l`
    Below,
    /// `k = l`, the two order statistics coincide.
    Tie,
    /// `k > l`
    Above,
}

impl TieCase {
    pub fn of(k: u32, ell: u32) -> Self {
        match k.cmp(&ell) {
            std::cmp::Ordering::Less => Self::Below,
            std::cmp::Ordering::Equal => Self::Tie,
            std::cmp::Ordering::Greater => Self::Above,
        }
    }

    pub fn formula_tag(self) -> &'static str {
        match self {
            Self::Below => "tie-prob-below",
            Self::Tie => "tie-prob-diagonal",
            Self::Above => "tie-prob-above",
        }
    }
}

fn d(r: i64, s: i64, t: i64, k: i64, ell: i64, i: i64, j: i64) -> BigUint {
    count_d(&CountParams::new(r, s, t, k, ell, i, j))
}

/// `P(X_{i:m} = X_{k:n+r}, X^{(r)}_{j:n} = X_{l:n+r})`, exactly.
///
/// Zero outside the support rectangle (including `k` or `l` outside `1..=n+r`).
pub fn p_overlap(spec: &OverlapSpec, k: u32, ell: u32) -> ExactRational {
    if !spec.in_support(k, ell) || k > spec.pooled() || ell > spec.pooled() {
        return ExactRational::zero();
    }
    let (a, b, c) = spec.blocks();
    let (a, b, c) = (a as i64, b as i64, c as i64);
    let (m, n, r, i, j) = (
        spec.m as i64,
        spec.n as i64,
        spec.r as i64,
        spec.i as i64,
        spec.j as i64,
    );
    let (k, ell) = (k as i64, ell as i64);
    let pooled_fact = factorial((n + r) as u64);
    match k.cmp(&ell) {
        std::cmp::Ordering::Less => {
            let inner = BigUint::from(a as u64)
                * d(a - 1, b, c, k - 1, ell - k - 1, k - i, ell - j - 1)
                + BigUint::from(b as u64) * d(a, b - 1, c, k - 1, ell - k - 1, k - i, ell - j);
            let num = BigUint::from((n - j + 1) as u64) * inner;
            let den = BigUint::from((r + n - ell + 1) as u64) * pooled_fact;
            ExactRational::from_biguint(num, den)
        }
        std::cmp::Ordering::Equal => {
            let num = BigUint::from(b as u64) * d(a, b - 1, c, k - 1, 0, k - i, k - j);
            ExactRational::from_biguint(num, pooled_fact)
        }
        std::cmp::Ordering::Greater => {
            let inner = BigUint::from(c as u64)
                * d(c - 1, b, a, ell - 1, k - ell - 1, ell - j, k - i - 1)
                + BigUint::from(b as u64) * d(c, b - 1, a, ell - 1, k - ell - 1, ell - j, k - i);
            let num = BigUint::from((m - i + 1) as u64) * inner;
            let den = BigUint::from((r + n - k + 1) as u64) * pooled_fact;
            ExactRational::from_biguint(num, den)
        }
    }
}

/// `p(k, l)` computed through the reflected spec, so that the `k > l` branch
/// is evaluated by the `k < l` formula and vice versa.
pub fn p_overlap_by_reflection(spec: &OverlapSpec, k: u32, ell: u32) -> ExactRational {
    p_overlap(&spec.reflected(), ell, k)
}

/// `P(X_{i:m} = X_{k:n})` when the first sample is a subsample of size `m`
/// of a sample of size `n`.
pub fn p_marginal_r0(i: u32, m: u32, k: u32, n: u32) -> ExactRational {
    if i == 0 || i > m || m > n || k == 0 || k > n || k < i || k > n - m + i {
        return ExactRational::zero();
    }
    let (i, m, k, n) = (i as i64, m as i64, k as i64, n as i64);
    let num = binom_safe(k - 1, i - 1) * binom_safe(n - k, m - i);
    ExactRational::from_biguint(num, binom_safe(n, m))
}

/// The full `(n+r) x (n+r)` table of tie probabilities for one spec.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbabilityTable {
    spec: OverlapSpec,
    entries: Vec<ExactRational>,
}

#[derive(Serialize)]
struct EntryRepr<'a> {
    k: u32,
    l: u32,
    num: String,
    den: String,
    decimal: String,
    formula: &'a str,
}

impl ProbabilityTable {
    pub(crate) fn from_entries(spec: OverlapSpec, entries: Vec<ExactRational>) -> Self {
        let size = spec.pooled() as usize;
        assert_eq!(entries.len(), size * size);
        Self { spec, entries }
    }

    pub fn spec(&self) -> &OverlapSpec {
        &self.spec
    }

    pub fn size(&self) -> u32 {
        self.spec.pooled()
    }

    /// Entry `(k, l)`, 1-based. Panics outside `1..=n+r`.
    pub fn get(&self, k: u32, ell: u32) -> &ExactRational {
        let size = self.size();
        assert!(
            (1..=size).contains(&k) && (1..=size).contains(&ell),
            "({k}, {ell}) outside table"
        );
        &self.entries[((k - 1) * size + (ell - 1)) as usize]
    }

    /// All entries in row-major order as `(k, l, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, &ExactRational)> + '_ {
        let size = self.size();
        self.entries
            .iter()
            .enumerate()
            .map(move |(idx, v)| (idx as u32 / size + 1, idx as u32 % size + 1, v))
    }

    pub fn total(&self) -> ExactRational {
        self.entries.iter().sum()
    }

    /// Probability that the two order statistics coincide.
    pub fn tie_mass(&self) -> ExactRational {
        (1..=self.size()).map(|k| self.get(k, k).clone()).sum()
    }

    /// `sum_l p(k, l)` for each `k`.
    pub fn row_sums(&self) -> Vec<ExactRational> {
        (1..=self.size())
            .map(|k| (1..=self.size()).map(|l| self.get(k, l).clone()).sum())
            .collect()
    }

    /// `sum_k p(k, l)` for each `l`.
    pub fn column_sums(&self) -> Vec<ExactRational> {
        (1..=self.size())
            .map(|l| (1..=self.size()).map(|k| self.get(k, l).clone()).sum())
            .collect()
    }

    /// True when every nonzero entry lies in the support rectangle.
    pub fn respects_support(&self) -> bool {
        self.iter()
            .all(|(k, l, v)| v.is_zero() || self.spec.in_support(k, l))
    }

    /// Entries as `f64`, row-major.
    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(ExactRational::to_f64).collect()
    }

    /// Entries inside the support rectangle; everything else is zero.
    pub fn support_entries(&self) -> impl Iterator<Item = (u32, u32, &ExactRational)> + '_ {
        self.iter().filter(|(k, l, _)| self.spec.in_support(*k, *l))
    }

    /// CSV rows `k,l,num,den,decimal,formula` over the support rectangle.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,l,num,den,decimal,formula\n");
        for (k, l, v) in self.support_entries() {
            let _ = writeln!(
                out,
                "{k},{l},{},{},{},{}",
                v.numer(),
                v.denom(),
                v.to_decimal(),
                TieCase::of(k, l).formula_tag()
            );
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<EntryRepr> = self
            .support_entries()
            .map(|(k, l, v)| EntryRepr {
                k,
                l,
                num: v.numer().to_string(),
                den: v.denom().to_string(),
                decimal: v.to_decimal(),
                formula: TieCase::of(k, l).formula_tag(),
            })
            .collect();
        serde_json::json!({
            "spec": self.spec,
            "size": self.size(),
            "entries": entries,
            "total": self.total(),
            "tie_mass": self.tie_mass(),
        })
    }
}

/// Every `(k, l)` entry from the closed form.
pub fn probability_table(spec: &OverlapSpec) -> Result<ProbabilityTable> {
    spec.validate()?;
    let size = spec.pooled();
    let entries = (1..=size)
        .flat_map(|k| (1..=size).map(move |l| (k, l)))
        .map(|(k, l)| p_overlap(spec, k, l))
        .collect();
    Ok(ProbabilityTable::from_entries(*spec, entries))
}

/// Oracle tables for every `(i, j)` at fixed `(r, m, n)`, indexed
/// `[(i - 1) * n + (j - 1)]`. Walks all `(n+r)!` rank assignments once.
pub fn oracle_tables(r: u32, m: u32, n: u32) -> Result<Vec<ProbabilityTable>> {
    OverlapSpec::new(r, m, n, 1, 1)?;
    let size = (n + r) as usize;
    if size > TABLE_ORACLE_LIMIT {
        return Err(Error::BudgetExceeded {
            requested: size,
            limit: TABLE_ORACLE_LIMIT,
        });
    }
    let (mu, nu, ru) = (m as usize, n as usize, r as usize);
    let cells = mu * nu * size * size;
    let counts = fold_permutations(
        size,
        || vec![0u64; cells],
        |acc, ranks| {
            let mut first: Vec<u8> = ranks[..mu].to_vec();
            let mut second: Vec<u8> = ranks[ru..ru + nu].to_vec();
            first.sort_unstable();
            second.sort_unstable();
            for (i, &k) in first.iter().enumerate() {
                for (j, &l) in second.iter().enumerate() {
                    acc[((i * nu + j) * size + k as usize) * size + l as usize] += 1;
                }
            }
        },
        |total, part| total.iter_mut().zip(part).for_each(|(a, b)| *a += b),
    )?;
    let total = factorial(size as u64);
    let mut tables = Vec::with_capacity(mu * nu);
    for i in 1..=m {
        for j in 1..=n {
            let spec = OverlapSpec { r, m, n, i, j };
            let base = ((i - 1) as usize * nu + (j - 1) as usize) * size * size;
            let entries = counts[base..base + size * size]
                .iter()
                .map(|&c| ExactRational::from_biguint(BigUint::from(c), total.clone()))
                .collect();
            tables.push(ProbabilityTable::from_entries(spec, entries));
        }
    }
    Ok(tables)
}

/// Exact frequencies of `(k, l)` over all `(n+r)!` equally likely orderings.
pub fn p_table_oracle(spec: &OverlapSpec) -> Result<ProbabilityTable> {
    spec.validate()?;
    let tables = oracle_tables(spec.r, spec.m, spec.n)?;
    let idx = (spec.i - 1) as usize * spec.n as usize + (spec.j - 1) as usize;
    Ok(tables.into_iter().nth(idx).expect("index in range"))
}
