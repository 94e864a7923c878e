//! Monte Carlo verification of the exact and numerical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::Curve;
use crate::density::joint_overlap_density;
use crate::error::{Error, Result};
use crate::overlap::{OverlapSpec, ProbabilityTable};
use crate::parent::{open_unit_pair, ParentModel};
use crate::regression::{regress_ext_given_orig, regress_orig_given_ext, Direction};

/// Replicates per RNG stream. Fixed so that results do not depend on the
/// number of worker threads.
pub const CHUNK: usize = 1 << 16;

/// One simulated pair of order statistics on the uniform scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Replicate {
    /// Global rank of `X_{i:m}` in the pooled sample.
    pub k: u32,
    /// Global rank of `X^{(r)}_{j:n}` in the pooled sample.
    pub ell: u32,
    pub u_first: f64,
    pub c_first: f64,
    pub u_second: f64,
    pub c_second: f64,
}

impl Replicate {
    pub fn is_tie(&self) -> bool {
        self.k == self.ell
    }
}

/// Streaming statistic over replicates with an order-respecting merge.
pub trait Accumulator: Send {
    fn push(&mut self, rep: &Replicate);
    fn merge(&mut self, other: Self);
}

fn simulate_one(
    spec: &OverlapSpec,
    rng: &mut ChaCha8Rng,
    draws: &mut [(f64, f64, u32)],
) -> Replicate {
    for (pos, slot) in draws.iter_mut().enumerate() {
        let (u, c) = open_unit_pair(rng);
        *slot = (u, c, pos as u32);
    }
    draws.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let (mut seen_a, mut seen_b) = (0, 0);
    let mut first = None;
    let mut second = None;
    for (rank, &(u, c, pos)) in draws.iter().enumerate() {
        if pos < spec.m {
            seen_a += 1;
            if seen_a == spec.i {
                first = Some((rank as u32 + 1, u, c));
            }
        }
        if pos >= spec.r {
            seen_b += 1;
            if seen_b == spec.j {
                second = Some((rank as u32 + 1, u, c));
            }
        }
    }
    let (k, u_first, c_first) = first.expect("valid spec has an i-th order statistic");
    let (ell, u_second, c_second) = second.expect("valid spec has a j-th order statistic");
    Replicate {
        k,
        ell,
        u_first,
        c_first,
        u_second,
        c_second,
    }
}

/// Runs `count` replicates split into fixed chunks, each on its own stream
/// of a ChaCha8 generator seeded with `seed`, merging chunk results in order.
pub fn run<A, F>(spec: &OverlapSpec, count: u64, seed: u64, make: F) -> Result<A>
where
    A: Accumulator,
    F: Fn() -> A + Sync,
{
    spec.validate()?;
    let chunks = count.div_ceil(CHUNK as u64);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let mut acc = make();
            let mut draws = vec![(0.0, 0.0, 0u32); spec.pooled() as usize];
            let todo = (count - chunk * CHUNK as u64).min(CHUNK as u64);
            for _ in 0..todo {
                let rep = simulate_one(spec, &mut rng, &mut draws);
                acc.push(&rep);
            }
            acc
        })
        .collect();
    let mut parts = parts.into_iter();
    let mut total = parts.next().unwrap_or_else(&make);
    for p in parts {
        total.merge(p);
    }
    Ok(total)
}

struct Collect(Vec<Replicate>);

impl Accumulator for Collect {
    fn push(&mut self, rep: &Replicate) {
        self.0.push(*rep);
    }

    fn merge(&mut self, other: Self) {
        self.0.extend(other.0);
    }
}

/// The raw replicates, in stream order.
pub fn simulate_replicates(spec: &OverlapSpec, count: u64, seed: u64) -> Result<Vec<Replicate>> {
    Ok(run(spec, count, seed, || Collect(Vec::new()))?.0)
}

/// `(X_{i:m}, X^{(r)}_{j:n})` pairs mapped through the parent quantile.
pub fn simulate_pairs(
    spec: &OverlapSpec,
    model: &ParentModel,
    count: u64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    Ok(simulate_replicates(spec, count, seed)?
        .iter()
        .map(|r| {
            (
                model.quantile_split(r.u_first, r.c_first),
                model.quantile_split(r.u_second, r.c_second),
            )
        })
        .collect())
}

/// Frequencies of the realized global ranks `(k, ell)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTable {
    pub spec: OverlapSpec,
    pub total: u64,
    /// Row-major counts indexed by `(k - 1) * N + (ell - 1)`.
    pub counts: Vec<u64>,
    /// Replicates outside the support rectangle.
    pub support_violations: u64,
}

impl EmpiricalTable {
    pub fn count(&self, k: u32, ell: u32) -> u64 {
        let size = self.spec.pooled() as usize;
        self.counts[(k as usize - 1) * size + ell as usize - 1]
    }

    pub fn frequency(&self, k: u32, ell: u32) -> f64 {
        self.count(k, ell) as f64 / self.total as f64
    }

    pub fn tie_frequency(&self) -> f64 {
        (1..=self.spec.pooled())
            .map(|k| self.count(k, k))
            .sum::<u64>() as f64
            / self.total as f64
    }
}

impl Accumulator for EmpiricalTable {
    fn push(&mut self, rep: &Replicate) {
        let size = self.spec.pooled() as usize;
        self.counts[(rep.k as usize - 1) * size + rep.ell as usize - 1] += 1;
        self.total += 1;
        if !self.spec.in_support(rep.k, rep.ell) {
            self.support_violations += 1;
        }
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.total += other.total;
        self.support_violations += other.support_violations;
    }
}

/// Classifies each replicate by its global ranks. Ranks do not depend on
/// the parent, so `model` is accepted only for interface symmetry.
pub fn empirical_tie_table(
    spec: &OverlapSpec,
    _model: &ParentModel,
    count: u64,
    seed: u64,
) -> Result<EmpiricalTable> {
    let size = spec.pooled() as usize;
    run(spec, count, seed, || EmpiricalTable {
        spec: *spec,
        total: 0,
        counts: vec![0; size * size],
        support_violations: 0,
    })
}

/// One analytic-versus-empirical comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub analytic: f64,
    pub empirical: f64,
    pub se: f64,
    pub z: f64,
}

impl Comparison {
    /// A proportion over `total` trials; exact 0/1 probabilities must be
    /// matched exactly.
    pub fn proportion(name: String, analytic: f64, hits: u64, total: u64) -> Self {
        let n = total as f64;
        let empirical = hits as f64 / n;
        if analytic <= 0.0 || analytic >= 1.0 {
            let z = if empirical == analytic {
                0.0
            } else {
                f64::INFINITY
            };
            return Self {
                name,
                analytic,
                empirical,
                se: 1.0 / n,
                z,
            };
        }
        let se = (analytic * (1.0 - analytic) / n).sqrt();
        Self {
            name,
            analytic,
            empirical,
            se,
            z: (empirical - analytic) / se,
        }
    }

    pub fn passes(&self, zmax: f64) -> bool {
        self.z.abs() <= zmax
    }
}

/// Tie-table comparisons, one per cell of the pooled rank square plus a
/// hard check that no replicate leaves the support rectangle.
pub fn compare_tie_table(empirical: &EmpiricalTable, table: &ProbabilityTable) -> Vec<Comparison> {
    let mut out = Vec::new();
    for (k, ell, p) in table.iter() {
        if p.is_zero() && empirical.count(k, ell) == 0 && !empirical.spec.in_support(k, ell) {
            continue;
        }
        out.push(Comparison::proportion(
            format!("tie-table({k},{ell})"),
            p.to_f64(),
            empirical.count(k, ell),
            empirical.total,
        ));
    }
    let v = empirical.support_violations;
    out.push(Comparison {
        name: "support-violations".into(),
        analytic: 0.0,
        empirical: v as f64,
        se: 1.0,
        z: if v == 0 { 0.0 } else { f64::INFINITY },
    });
    out
}

struct Quadrants {
    levels: Vec<f64>,
    hits: Vec<u64>,
    total: u64,
}

impl Accumulator for Quadrants {
    fn push(&mut self, rep: &Replicate) {
        let g = self.levels.len();
        for (a, &la) in self.levels.iter().enumerate() {
            if rep.u_first > la {
                continue;
            }
            for (b, &lb) in self.levels.iter().enumerate() {
                if rep.u_second <= lb {
                    self.hits[a * g + b] += 1;
                }
            }
        }
        self.total += 1;
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.hits.iter_mut().zip(other.hits) {
            *a += b;
        }
        self.total += other.total;
    }
}

/// `P(X_{i:m} <= Q(a), X^{(r)}_{j:n} <= Q(b))` over a grid of parent
/// quantile levels, analytic (the `nu`-integral) against empirical.
pub fn compare_rectangles(
    spec: &OverlapSpec,
    model: &ParentModel,
    levels: &[f64],
    count: u64,
    seed: u64,
) -> Result<Vec<Comparison>> {
    let density = joint_overlap_density(spec, model)?;
    let g = levels.len();
    let acc = run(spec, count, seed, || Quadrants {
        levels: levels.to_vec(),
        hits: vec![0; g * g],
        total: 0,
    })?;
    let mut out = Vec::new();
    for (a, &la) in levels.iter().enumerate() {
        for (b, &lb) in levels.iter().enumerate() {
            let p = density.rectangle_probability(model.quantile(la), model.quantile(lb))?;
            out.push(Comparison::proportion(
                format!("rectangle({la},{lb})"),
                p,
                acc.hits[a * g + b],
                acc.total,
            ));
        }
    }
    Ok(out)
}

/// Probability-scale position of a conditioning order statistic: the cdf of
/// `U_{j:n}` at `u`.
fn beta_cdf_integer(j: u32, n: u32, u: f64, c: f64) -> f64 {
    let mut total = 0.0;
    let mut term = c.powi(n as i32);
    // binomial tail P(Bin(n, u) >= j) via the pmf recursion
    for s in 0..=n {
        if s >= j {
            total += term;
        }
        if s < n {
            term *= (n - s) as f64 / (s + 1) as f64 * u / c;
        }
    }
    total.clamp(0.0, 1.0)
}

/// Reference curve `g` sampled on the conditioning variable's uniform scale.
struct Reference {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl Reference {
    fn eval(&self, u: f64) -> f64 {
        let pos = ((u - self.lo) / self.step).clamp(0.0, (self.values.len() - 1) as f64);
        let g = (pos.floor() as usize).clamp(1, self.values.len() - 3);
        let t = pos - g as f64;
        let (p0, p1, p2, p3) = (
            self.values[g - 1],
            self.values[g],
            self.values[g + 1],
            self.values[g + 2],
        );
        // Catmull-Rom cubic through four neighbours
        p1 + 0.5
            * t
            * (p2 - p0
                + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
    }
}

/// Which reference the residuals are measured against.
pub enum Target<'a> {
    /// The conditioning value itself: `g(y) = y`.
    Identity,
    /// A function of the conditioning value, tabulated before the run.
    Function(&'a (dyn Fn(f64) -> Result<f64> + Sync)),
}

/// Per-bin conditional means of the response given the conditioning order
/// statistic, with residuals against a reference curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinnedMeans {
    pub bins: usize,
    pub trim: (f64, f64),
    pub counts: Vec<u64>,
    pub mean_given: Vec<f64>,
    pub mean_response: Vec<f64>,
    pub se_response: Vec<f64>,
    pub mean_residual: Vec<f64>,
    pub se_residual: Vec<f64>,
}

impl BinnedMeans {
    /// Bin means as a curve (abscissa: mean conditioning value per bin).
    pub fn curve(&self, meaning: &str) -> Result<Curve> {
        Curve::new(meaning, self.mean_given.clone(), self.mean_response.clone())
    }

    pub fn comparisons(&self, label: &str) -> Vec<Comparison> {
        (0..self.bins)
            .map(|b| {
                let (m, se) = (self.mean_residual[b], self.se_residual[b]);
                let z = if m == 0.0 { 0.0 } else { m / se };
                Comparison {
                    name: format!("{label}-bin{b}"),
                    analytic: 0.0,
                    empirical: m,
                    se: se.max(f64::MIN_POSITIVE),
                    z,
                }
            })
            .collect()
    }
}

#[derive(Clone)]
struct BinSums {
    n: u64,
    given: f64,
    resp: f64,
    resp2: f64,
    res: f64,
    res2: f64,
}

struct Binner<'a> {
    spec: OverlapSpec,
    model: &'a ParentModel,
    direction: Direction,
    trim: (f64, f64),
    reference: Option<&'a Reference>,
    sums: Vec<BinSums>,
}

impl Accumulator for Binner<'_> {
    fn push(&mut self, rep: &Replicate) {
        let (uy, cy, ux, cx, j, n) = match self.direction {
            Direction::OrigGivenExt => (
                rep.u_second,
                rep.c_second,
                rep.u_first,
                rep.c_first,
                self.spec.j,
                self.spec.n,
            ),
            Direction::ExtGivenOrig => (
                rep.u_first,
                rep.c_first,
                rep.u_second,
                rep.c_second,
                self.spec.i,
                self.spec.m,
            ),
        };
        let p = beta_cdf_integer(j, n, uy, cy);
        let (lo, hi) = self.trim;
        if !(p >= lo && p < hi) {
            return;
        }
        let bins = self.sums.len();
        let b = (((p - lo) / (hi - lo)) * bins as f64)
            .floor()
            .min((bins - 1) as f64) as usize;
        let y = self.model.quantile_split(uy, cy);
        let x = self.model.quantile_split(ux, cx);
        let g = match self.reference {
            Some(r) => r.eval(uy),
            None => y,
        };
        let r = x - g;
        let s = &mut self.sums[b];
        s.n += 1;
        s.given += y;
        s.resp += x;
        s.resp2 += x * x;
        s.res += r;
        s.res2 += r * r;
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.sums.iter_mut().zip(other.sums) {
            a.n += b.n;
            a.given += b.given;
            a.resp += b.resp;
            a.resp2 += b.resp2;
            a.res += b.res;
            a.res2 += b.res2;
        }
    }
}

/// Equal-probability bins of the conditioning variable restricted to the
/// probability range `trim`.
#[allow(clippy::too_many_arguments)]
pub fn binned_conditional_mean(
    spec: &OverlapSpec,
    model: &ParentModel,
    direction: Direction,
    target: Target<'_>,
    bins: usize,
    trim: (f64, f64),
    count: u64,
    seed: u64,
) -> Result<BinnedMeans> {
    if bins < 10 {
        return Err(Error::InvalidParameter(format!(
            "need at least 10 bins, got {bins}"
        )));
    }
    if !(0.0 <= trim.0 && trim.0 < trim.1 && trim.1 <= 1.0) {
        return Err(Error::InvalidParameter(format!("bad trim range {trim:?}")));
    }
    let (j, n) = match direction {
        Direction::OrigGivenExt => (spec.j, spec.n),
        Direction::ExtGivenOrig => (spec.i, spec.m),
    };
    let reference = match target {
        Target::Identity => None,
        Target::Function(g) => {
            // cover the trimmed range of the conditioning order statistic
            let lo_u = invert_beta_cdf(j, n, trim.0);
            let hi_u = invert_beta_cdf(j, n, trim.1);
            let points = 2001;
            let step = (hi_u - lo_u) / (points - 3) as f64;
            let start = lo_u - step;
            let values = (0..points)
                .into_par_iter()
                .map(|p| {
                    let u = (start + p as f64 * step).clamp(1e-15, 1.0 - 1e-15);
                    g(model.quantile(u))
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(Reference {
                lo: start,
                step,
                values,
            })
        }
    };
    let zero = BinSums {
        n: 0,
        given: 0.0,
        resp: 0.0,
        resp2: 0.0,
        res: 0.0,
        res2: 0.0,
    };
    let acc = run(spec, count, seed, || Binner {
        spec: *spec,
        model,
        direction,
        trim,
        reference: reference.as_ref(),
        sums: vec![zero.clone(); bins],
    })?;
    let mut out = BinnedMeans {
        bins,
        trim,
        counts: Vec::new(),
        mean_given: Vec::new(),
        mean_response: Vec::new(),
        se_response: Vec::new(),
        mean_residual: Vec::new(),
        se_residual: Vec::new(),
    };
    for (b, s) in acc.sums.iter().enumerate() {
        if s.n < 2 {
            return Err(Error::EmptyBin { bin: b });
        }
        let n = s.n as f64;
        let var = |sum: f64, sum2: f64| ((sum2 - sum * sum / n) / (n - 1.0)).max(0.0);
        out.counts.push(s.n);
        out.mean_given.push(s.given / n);
        out.mean_response.push(s.resp / n);
        out.se_response.push((var(s.resp, s.resp2) / n).sqrt());
        out.mean_residual.push(s.res / n);
        out.se_residual.push((var(s.res, s.res2) / n).sqrt());
    }
    Ok(out)
}

fn invert_beta_cdf(j: u32, n: u32, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if beta_cdf_integer(j, n, mid, 1.0 - mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Outcome of a verification run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub spec: OverlapSpec,
    pub model: String,
    pub sample_count: u64,
    pub seed: u64,
    pub zmax: f64,
    pub comparisons: Vec<Comparison>,
    pub max_abs_z: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl MCReport {
    pub fn new(
        spec: OverlapSpec,
        model: &ParentModel,
        sample_count: u64,
        seed: u64,
        zmax: f64,
        comparisons: Vec<Comparison>,
    ) -> Self {
        let max_abs_z = comparisons.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
        let verdict = if comparisons.iter().all(|c| c.passes(zmax)) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            spec,
            model: model.id(),
            sample_count,
            seed,
            zmax,
            comparisons,
            max_abs_z,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Knobs for [`verify_spec`].
#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// Replicates for tie tables and rectangle probabilities.
    pub reps: u64,
    /// Replicates for binned regression curves.
    pub regression_reps: u64,
    pub seed: u64,
    pub zmax: f64,
    pub bins: usize,
    pub trim: (f64, f64),
    pub rectangle_levels: [f64; 5],
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            reps: 1_000_000,
            regression_reps: 10_000_000,
            seed: 20_240_601,
            zmax: 4.0,
            bins: 50,
            trim: (0.05, 0.95),
            rectangle_levels: [0.1, 0.3, 0.5, 0.7, 0.9],
        }
    }
}

/// Tie table, 5x5 rectangle grid and both regression directions for one
/// specification and parent. Each family of comparisons uses its own seed
/// offset so the streams are distinct.
pub fn verify_spec(
    spec: &OverlapSpec,
    model: &ParentModel,
    opts: &VerifyOptions,
) -> Result<MCReport> {
    let table = crate::overlap::probability_table(spec)?;
    let empirical = empirical_tie_table(spec, model, opts.reps, opts.seed)?;
    let mut comparisons = compare_tie_table(&empirical, &table);
    comparisons.extend(compare_rectangles(
        spec,
        model,
        &opts.rectangle_levels,
        opts.reps,
        opts.seed.wrapping_add(1),
    )?);
    let regressions: [(Direction, &str, u64); 2] = [
        (Direction::OrigGivenExt, "regression-ce", 2),
        (Direction::ExtGivenOrig, "regression-ec", 3),
    ];
    for (direction, label, offset) in regressions {
        let g = |t: f64| match direction {
            Direction::OrigGivenExt => regress_orig_given_ext(spec, model, t),
            Direction::ExtGivenOrig => regress_ext_given_orig(spec, model, t),
        };
        let binned = binned_conditional_mean(
            spec,
            model,
            direction,
            Target::Function(&g),
            opts.bins,
            opts.trim,
            opts.regression_reps,
            opts.seed.wrapping_add(offset),
        )?;
        comparisons.extend(binned.comparisons(label));
    }
    Ok(MCReport::new(
        *spec,
        model,
        opts.reps,
        opts.seed,
        opts.zmax,
        comparisons,
    ))
}

/// `E(X_{j-1:n-2} | X_{j:n} = y) = y` for the parent whose quantile density
/// is forced by that identity, checked on the probability range `trim` of
/// the conditioning order statistic.
pub fn midsample_identity_check(
    j: u32,
    n: u32,
    reps: u64,
    seed: u64,
    zmax: f64,
    trim: (f64, f64),
) -> Result<MCReport> {
    let q = crate::reconstruct::qdf_from_midsample(j, n)?;
    let model = q.parent(0.0)?;
    let spec = OverlapSpec::new(0, n - 2, n, j - 1, j)?;
    let binned = binned_conditional_mean(
        &spec,
        &model,
        Direction::OrigGivenExt,
        Target::Identity,
        30,
        trim,
        reps,
        seed,
    )?;
    Ok(MCReport::new(
        spec,
        &model,
        reps,
        seed,
        zmax,
        binned.comparisons("identity"),
    ))
}

/// The built-in verification suite: full checks for several specs and
/// parents.
pub fn default_suite(seed: u64, zmax: f64) -> Result<Vec<MCReport>> {
    let full = VerifyOptions {
        seed,
        zmax,
        ..VerifyOptions::default()
    };
    let light = VerifyOptions {
        regression_reps: 1_000_000,
        ..full
    };
    let runs: [(&str, [u32; 5], &VerifyOptions); 6] = [
        ("uniform", [1, 2, 2, 2, 2], &full),
        ("exponential", [1, 2, 2, 2, 2], &full),
        ("exponential", [1, 2, 2, 1, 1], &light),
        ("logistic", [1, 3, 3, 2, 2], &light),
        ("uniform", [2, 3, 4, 2, 3], &light),
        ("exponential", [0, 2, 3, 1, 2], &light),
    ];
    let mut reports = Vec::new();
    for (family, [r, m, n, i, j], opts) in runs {
        let model = crate::parent::make_family(family, &[])?;
        reports.push(verify_spec(
            &OverlapSpec::new(r, m, n, i, j)?,
            &model,
            opts,
        )?);
    }
    Ok(reports)
}

/// Midsample identity checks for `(j, n)` in `(2, 4)`, `(3, 4)`, `(3, 5)`
/// at `reps` replicates on the central 60% of the conditioning law.
///
/// The response has infinite conditional variance for the first two, so
/// per-bin z-scores are skewed and need not stay within the usual bounds.
pub fn midsample_suite(reps: u64, seed: u64, zmax: f64) -> Result<Vec<MCReport>> {
    [(2, 4), (3, 4), (3, 5)]
        .into_iter()
        .map(|(j, n)| midsample_identity_check(j, n, reps, seed, zmax, (0.2, 0.8)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::overlap::probability_table;
    use crate::parent::make_family;

    fn uniform() -> ParentModel {
        make_family("uniform", &[]).unwrap()
    }

    #[test]
    fn seeded_streams_are_reproducible() {
        let spec = OverlapSpec::new(1, 2, 2, 1, 1).unwrap();
        let a = simulate_pairs(&spec, &uniform(), 200_000, 9).unwrap();
        let b = simulate_pairs(&spec, &uniform(), 200_000, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_pairs(&spec, &uniform(), 1000, 10).unwrap();
        assert_ne!(a[..1000], c[..]);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let spec = OverlapSpec::new(1, 3, 3, 2, 2).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let serial = one.install(|| empirical_tie_table(&spec, &uniform(), 300_000, 4).unwrap());
        let parallel = empirical_tie_table(&spec, &uniform(), 300_000, 4).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn identical_statistics_always_tie() {
        let spec = OverlapSpec::new(0, 3, 3, 2, 2).unwrap();
        let t = empirical_tie_table(&spec, &uniform(), 10_000, 1).unwrap();
        assert_eq!(t.tie_frequency(), 1.0);
        let b = binned_conditional_mean(
            &spec,
            &uniform(),
            Direction::OrigGivenExt,
            Target::Identity,
            10,
            (0.0, 1.0),
            10_000,
            1,
        )
        .unwrap();
        assert!(b.mean_residual.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn moving_ith_tie_frequency() {
        let spec = OverlapSpec::new(1, 2, 2, 1, 1).unwrap();
        let t = empirical_tie_table(&spec, &uniform(), 1_000_000, 3).unwrap();
        let table = probability_table(&spec).unwrap();
        let cmp = compare_tie_table(&t, &table);
        assert!(cmp.iter().all(|c| c.passes(4.0)), "{cmp:?}");
        let se = (1.0f64 / 3.0 * 2.0 / 3.0 / 1e6).sqrt();
        assert!((t.tie_frequency() - 1.0 / 3.0).abs() < 4.0 * se);
    }

    #[test]
    fn beta_cdf_matches_closed_forms() {
        // U_{1:2}: 1 - (1-u)^2 ; U_{2:2}: u^2
        assert!((beta_cdf_integer(1, 2, 0.3, 0.7) - (1.0 - 0.49)).abs() < 1e-15);
        assert!((beta_cdf_integer(2, 2, 0.3, 0.7) - 0.09).abs() < 1e-15);
        assert!((invert_beta_cdf(2, 2, 0.09) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn zmax_controls_verdict() {
        let spec = OverlapSpec::new(1, 2, 2, 2, 2).unwrap();
        let opts = VerifyOptions {
            reps: 200_000,
            regression_reps: 200_000,
            ..VerifyOptions::default()
        };
        let report = verify_spec(&spec, &uniform(), &opts).unwrap();
        assert!(report.passed(), "max |z| = {}", report.max_abs_z);
        let strict = MCReport::new(
            spec,
            &uniform(),
            opts.reps,
            opts.seed,
            0.01,
            report.comparisons.clone(),
        );
        assert!(!strict.passed());
    }
}
