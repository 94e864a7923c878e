//! Regression curves between order statistics of overlapping samples.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::combinatorics::binom_f64;
use crate::curve::{tabulate, Curve};
use crate::density::single_kernel;
use crate::error::{Error, Result};
use crate::overlap::{probability_table, OverlapSpec};
use crate::parent::ParentModel;
use crate::quadrature::Quadrature;

fn quad() -> Quadrature {
    Quadrature::with_tolerance(1e-13, 1e-12)
}

/// Beta(a, b) density for integer shapes at `z`, with `cz = 1 - z`.
fn beta_density(a: u32, b: u32, z: f64, cz: f64) -> f64 {
    let norm = (a + b - 1) as f64 * binom_f64((a + b - 2) as i64, (a - 1) as i64);
    norm * z.powi(a as i32 - 1) * cz.powi(b as i32 - 1)
}

fn interior_level(model: &ParentModel, y: f64) -> Result<(f64, f64)> {
    let (v, cv) = model.cdf_pair(y);
    if !(v > 0.0 && cv > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "point {y} lies outside the open support of {}",
            model.id()
        )));
    }
    Ok((v, cv))
}

/// `E(X_{k:N} | X_{ell:N} = y)`.
///
/// Below the conditioning rank the law is that of the `k`th order statistic
/// of `ell - 1` draws from the parent truncated to `(-inf, y)`; above it,
/// the `(k - ell)`th of `N - ell` draws truncated to `(y, inf)`.
pub fn cond_mean_os(model: &ParentModel, k: u32, ell: u32, big_n: u32, y: f64) -> Result<f64> {
    if !(1 <= k && k <= big_n && 1 <= ell && ell <= big_n) {
        return Err(Error::InvalidParameter(format!(
            "ranks must lie in 1..={big_n}, got k = {k}, ell = {ell}"
        )));
    }
    if k == ell {
        return Ok(y);
    }
    let (v, cv) = interior_level(model, y)?;
    cond_mean_at_level(model, k, ell, big_n, v, cv)
}

fn cond_mean_at_level(
    model: &ParentModel,
    k: u32,
    ell: u32,
    big_n: u32,
    v: f64,
    cv: f64,
) -> Result<f64> {
    let (left, right) = model.tail_exponents();
    if k < ell {
        if left >= (k + 1) as f64 {
            return Err(Error::InfiniteMean(format!(
                "E(X_{{{k}:{big_n}}} | X_{{{ell}:{big_n}}}) diverges for {}",
                model.id()
            )));
        }
        quad().integrate_unit(|z, cz| {
            model.quantile_split(v * z, cv + v * cz) * beta_density(k, ell - k, z, cz)
        })
    } else {
        if right >= (big_n - k + 2) as f64 {
            return Err(Error::InfiniteMean(format!(
                "E(X_{{{k}:{big_n}}} | X_{{{ell}:{big_n}}}) diverges for {}",
                model.id()
            )));
        }
        quad().integrate_unit(|z, cz| {
            model.quantile_split(v + cv * z, cv * cz) * beta_density(k - ell, big_n - k + 1, z, cz)
        })
    }
}

/// Mixture weights of `E(X_{i:m} | X^{(r)}_{j:n} = y)` at level `v = F(y)`:
/// `((k, ell), p * f_{ell:N}(y) / f_{j:n}(y))`, merged over equal pairs.
pub fn weights_orig_given_ext(
    spec: &OverlapSpec,
    v: f64,
    cv: f64,
) -> Result<Vec<((u32, u32), f64)>> {
    let table = probability_table(spec)?;
    let big_n = spec.pooled();
    let ratio = |ell: u32| single_kernel(ell, big_n, v, cv) / single_kernel(spec.j, spec.n, v, cv);
    let mut out = Vec::new();
    for (k, ell, p) in table.iter() {
        if !p.is_zero() {
            out.push(((k, ell), p.to_f64() * ratio(ell)));
        }
    }
    Ok(out)
}

/// Mixture weights of `E(X^{(r)}_{j:n} | X_{i:m} = x)` at level `v = F(x)`:
/// `((k, ell), p * f_{k:N}(x) / f_{i:m}(x))`.
pub fn weights_ext_given_orig(
    spec: &OverlapSpec,
    v: f64,
    cv: f64,
) -> Result<Vec<((u32, u32), f64)>> {
    let table = probability_table(spec)?;
    let big_n = spec.pooled();
    let ratio = |k: u32| single_kernel(k, big_n, v, cv) / single_kernel(spec.i, spec.m, v, cv);
    let mut out = Vec::new();
    for (k, ell, p) in table.iter() {
        if !p.is_zero() {
            out.push(((k, ell), p.to_f64() * ratio(k)));
        }
    }
    Ok(out)
}

fn mix(
    model: &ParentModel,
    big_n: u32,
    y: f64,
    v: f64,
    cv: f64,
    terms: BTreeMap<(u32, u32), f64>,
) -> Result<f64> {
    let mut total = 0.0;
    for ((target, given), w) in terms {
        let mean = if target == given {
            y
        } else {
            cond_mean_at_level(model, target, given, big_n, v, cv)?
        };
        total += w * mean;
    }
    Ok(total)
}

/// `E(X_{i:m} | X^{(r)}_{j:n} = y)`.
pub fn regress_orig_given_ext(spec: &OverlapSpec, model: &ParentModel, y: f64) -> Result<f64> {
    spec.validate()?;
    let (v, cv) = interior_level(model, y)?;
    let mut terms = BTreeMap::new();
    for ((k, ell), w) in weights_orig_given_ext(spec, v, cv)? {
        *terms.entry((k, ell)).or_insert(0.0) += w;
    }
    mix(model, spec.pooled(), y, v, cv, terms)
}

/// `E(X^{(r)}_{j:n} | X_{i:m} = x)`.
pub fn regress_ext_given_orig(spec: &OverlapSpec, model: &ParentModel, x: f64) -> Result<f64> {
    spec.validate()?;
    let (v, cv) = interior_level(model, x)?;
    let mut terms = BTreeMap::new();
    for ((k, ell), w) in weights_ext_given_orig(spec, v, cv)? {
        *terms.entry((ell, k)).or_insert(0.0) += w;
    }
    mix(model, spec.pooled(), x, v, cv, terms)
}

/// The four regressions for `r = 1`, `m = n = 2`, written `(i:m | j:n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum R1Item {
    /// `E(X_{2:2} | X^{(1)}_{2:2})`
    MaxGivenMax,
    /// `E(X_{1:2} | X^{(1)}_{1:2})`
    MinGivenMin,
    /// `E(X_{1:2} | X^{(1)}_{2:2})`
    MinGivenMax,
    /// `E(X_{2:2} | X^{(1)}_{1:2})`
    MaxGivenMin,
}

impl R1Item {
    pub const ALL: [R1Item; 4] = [
        R1Item::MaxGivenMax,
        R1Item::MinGivenMin,
        R1Item::MinGivenMax,
        R1Item::MaxGivenMin,
    ];

    pub fn spec(self) -> OverlapSpec {
        let (i, j) = match self {
            R1Item::MaxGivenMax => (2, 2),
            R1Item::MinGivenMin => (1, 1),
            R1Item::MinGivenMax => (1, 2),
            R1Item::MaxGivenMin => (2, 1),
        };
        OverlapSpec {
            r: 1,
            m: 2,
            n: 2,
            i,
            j,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            R1Item::MaxGivenMax => "r1-max-given-max",
            R1Item::MinGivenMin => "r1-min-given-min",
            R1Item::MinGivenMax => "r1-min-given-max",
            R1Item::MaxGivenMin => "r1-max-given-min",
        }
    }
}

impl fmt::Display for R1Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.spec();
        write!(f, "{}:2|{}:2", s.i, s.j)
    }
}

impl FromStr for R1Item {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        match key.as_str() {
            "2:2|2:2" | "2,2|2,2" | "max-given-max" | "i" => Ok(R1Item::MaxGivenMax),
            "1:2|1:2" | "1,2|1,2" | "min-given-min" | "ii" => Ok(R1Item::MinGivenMin),
            "1:2|2:2" | "1,2|2,2" | "min-given-max" | "iii" => Ok(R1Item::MinGivenMax),
            "2:2|1:2" | "2,2|1,2" | "max-given-min" | "iv" => Ok(R1Item::MaxGivenMin),
            _ => Err(Error::Parse(format!("unknown r = 1 regression {s:?}"))),
        }
    }
}

/// `int_0^v Q(u) w(u) du`.
fn lower_moment<W: Fn(f64, f64) -> f64>(model: &ParentModel, v: f64, cv: f64, w: W) -> Result<f64> {
    quad()
        .integrate_unit(|s, cs| {
            let (u, cu) = (v * s, cv + v * cs);
            model.quantile_split(u, cu) * w(u, cu)
        })
        .map(|r| r * v)
}

/// `int_v^1 Q(u) w(u) du`.
fn upper_moment<W: Fn(f64, f64) -> f64>(model: &ParentModel, v: f64, cv: f64, w: W) -> Result<f64> {
    quad()
        .integrate_unit(|s, cs| {
            let (u, cu) = (v + cv * s, cv * cs);
            model.quantile_split(u, cu) * w(u, cu)
        })
        .map(|r| r * cv)
}

/// Closed forms of the four `r = 1`, `m = n = 2` regressions at `y`.
pub fn closed_form_r1(item: R1Item, model: &ParentModel, y: f64) -> Result<f64> {
    let (v, cv) = interior_level(model, y)?;
    let low = |w: &dyn Fn(f64, f64) -> f64| lower_moment(model, v, cv, w);
    let high = |w: &dyn Fn(f64, f64) -> f64| upper_moment(model, v, cv, w);
    Ok(match item {
        R1Item::MaxGivenMax => 0.5 * y * v + high(&|_, _| 1.0)? + low(&|u, _| u)? / v,
        R1Item::MinGivenMin => 0.5 * y * cv + low(&|_, _| 1.0)? + high(&|_, c| c)? / cv,
        R1Item::MinGivenMax => {
            let first = low(&|_, _| 1.0)?;
            0.5 * y * cv + first / (2.0 * v) + first - low(&|u, _| u)? / v
        }
        R1Item::MaxGivenMin => {
            let first = high(&|_, _| 1.0)?;
            0.5 * y * v + first / (2.0 * cv) + first - high(&|_, c| c)? / cv
        }
    })
}

/// Special regressions of an extended-sample order statistic on an
/// original-sample one (`r = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum LemmaForm {
    /// `E(X_{1:n} | X_{1:m})`
    Min { m: u32, n: u32 },
    /// `E(X_{n:n} | X_{m:m})`
    Max { m: u32, n: u32 },
    /// `E(X_{i:m+1} | X_{i:m})`
    Adjacent { i: u32, m: u32 },
    /// `E(X_{j:n} | X_{1:1})`
    Single { j: u32, n: u32 },
}

impl LemmaForm {
    /// The overlap specification whose (ec) regression this form equals.
    pub fn spec(self) -> Result<OverlapSpec> {
        let s = match self {
            LemmaForm::Min { m, n } => OverlapSpec {
                r: 0,
                m,
                n,
                i: 1,
                j: 1,
            },
            LemmaForm::Max { m, n } => OverlapSpec {
                r: 0,
                m,
                n,
                i: m,
                j: n,
            },
            LemmaForm::Adjacent { i, m } => OverlapSpec {
                r: 0,
                m,
                n: m + 1,
                i,
                j: i,
            },
            LemmaForm::Single { j, n } => OverlapSpec {
                r: 0,
                m: 1,
                n,
                i: 1,
                j,
            },
        };
        if s.m >= s.n {
            return Err(Error::InvalidSpec(format!(
                "need m < n, got m = {}, n = {}",
                s.m, s.n
            )));
        }
        s.validate()?;
        Ok(s)
    }

    pub fn tag(self) -> &'static str {
        match self {
            LemmaForm::Min { .. } => "lemma-min",
            LemmaForm::Max { .. } => "lemma-max",
            LemmaForm::Adjacent { .. } => "lemma-adjacent",
            LemmaForm::Single { .. } => "lemma-single",
        }
    }
}

/// Closed-form integral representations of the [`LemmaForm`] regressions.
pub fn special_form(form: LemmaForm, model: &ParentModel, x: f64) -> Result<f64> {
    form.spec()?;
    let (v, cv) = interior_level(model, x)?;
    Ok(match form {
        LemmaForm::Min { m, n } => {
            let d = (n - m) as i32;
            x * cv.powi(d) + d as f64 * lower_moment(model, v, cv, |_, c| c.powi(d - 1))?
        }
        LemmaForm::Max { m, n } => {
            let d = (n - m) as i32;
            x * v.powi(d) + d as f64 * upper_moment(model, v, cv, |u, _| u.powi(d - 1))?
        }
        LemmaForm::Adjacent { i, .. } => {
            let e = i as i32 - 1;
            x * cv + i as f64 / v.powi(e) * lower_moment(model, v, cv, |u, _| u.powi(e))?
        }
        LemmaForm::Single { j, n } => {
            let below = if j < n {
                lower_moment(model, v, cv, |u, c| single_kernel(j, n - 1, u, c))?
            } else {
                0.0
            };
            let above = if j > 1 {
                upper_moment(model, v, cv, |u, c| single_kernel(j - 1, n - 1, u, c))?
            } else {
                0.0
            };
            let middle = x
                * binom_f64(n as i64 - 1, j as i64 - 1)
                * v.powi(j as i32 - 1)
                * cv.powi((n - j) as i32);
            below + middle + above
        }
    })
}

/// Which conditional expectation a tabulated curve holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `E(X_{i:m} | X^{(r)}_{j:n} = y)`
    OrigGivenExt,
    /// `E(X^{(r)}_{j:n} | X_{i:m} = x)`
    ExtGivenOrig,
}

impl Direction {
    pub fn tag(self) -> &'static str {
        match self {
            Direction::OrigGivenExt => "regression-ce",
            Direction::ExtGivenOrig => "regression-ec",
        }
    }
}

/// Tabulates a general regression on the quantile grid of size `size`.
pub fn regression_curve(
    spec: &OverlapSpec,
    model: &ParentModel,
    direction: Direction,
    size: usize,
) -> Result<Curve> {
    spec.validate()?;
    let meaning = match direction {
        Direction::OrigGivenExt => format!(
            "E(X_{{{}:{}}} | X^({})_{{{}:{}}} = y), {}",
            spec.i,
            spec.m,
            spec.r,
            spec.j,
            spec.n,
            model.id()
        ),
        Direction::ExtGivenOrig => format!(
            "E(X^({})_{{{}:{}}} | X_{{{}:{}}} = x), {}",
            spec.r,
            spec.j,
            spec.n,
            spec.i,
            spec.m,
            model.id()
        ),
    };
    tabulate(model, size, &meaning, |t| match direction {
        Direction::OrigGivenExt => regress_orig_given_ext(spec, model, t),
        Direction::ExtGivenOrig => regress_ext_given_orig(spec, model, t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parent::make_family;
    use approx::assert_abs_diff_eq;

    fn uniform() -> ParentModel {
        make_family("uniform", &[]).unwrap()
    }

    #[test]
    fn conditional_means_uniform() {
        let u = uniform();
        // max of one draw below 0.6 is uniform on (0, 0.6)
        assert_abs_diff_eq!(
            cond_mean_os(&u, 1, 2, 2, 0.6).unwrap(),
            0.3,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            cond_mean_os(&u, 2, 1, 2, 0.6).unwrap(),
            0.8,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            cond_mean_os(&u, 3, 1, 3, 0.4).unwrap(),
            0.8,
            epsilon = 1e-13
        );
        assert_eq!(cond_mean_os(&u, 2, 2, 3, 0.4).unwrap(), 0.4);
        assert!(cond_mean_os(&u, 1, 2, 2, 1.5).is_err());
    }

    #[test]
    fn max_given_max_uniform() {
        let u = uniform();
        let spec = R1Item::MaxGivenMax.spec();
        assert_abs_diff_eq!(
            regress_orig_given_ext(&spec, &u, 0.5).unwrap(),
            0.5 + 0.25 / 3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            closed_form_r1(R1Item::MaxGivenMax, &u, 0.5).unwrap(),
            0.5 + 0.25 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn self_conditioning_is_identity() {
        let e = make_family("exponential", &[]).unwrap();
        let spec = OverlapSpec::new(0, 3, 3, 2, 2).unwrap();
        for y in [0.1, 1.0, 3.0] {
            assert_eq!(regress_orig_given_ext(&spec, &e, y).unwrap(), y);
            assert_eq!(regress_ext_given_orig(&spec, &e, y).unwrap(), y);
        }
    }

    #[test]
    fn two_term_mixture() {
        // E(X_1 | X_{1:2} = y) = y/2 + (1 + y)/4 for uniform parents
        let spec = OverlapSpec::new(0, 1, 2, 1, 1).unwrap();
        for y in [0.2, 0.5, 0.9] {
            assert_abs_diff_eq!(
                regress_orig_given_ext(&spec, &uniform(), y).unwrap(),
                y / 2.0 + (1.0 + y) / 4.0,
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(
            regress_ext_given_orig(&spec, &uniform(), 0.5).unwrap(),
            0.375,
            epsilon = 1e-12
        );
    }

    #[test]
    fn weights_sum_to_one() {
        for spec in [
            OverlapSpec::new(1, 3, 4, 2, 3).unwrap(),
            OverlapSpec::new(2, 3, 3, 1, 2).unwrap(),
        ] {
            for v in [0.1, 0.5, 0.93] {
                let a: f64 = weights_orig_given_ext(&spec, v, 1.0 - v)
                    .unwrap()
                    .iter()
                    .map(|(_, w)| w)
                    .sum();
                let b: f64 = weights_ext_given_orig(&spec, v, 1.0 - v)
                    .unwrap()
                    .iter()
                    .map(|(_, w)| w)
                    .sum();
                assert_abs_diff_eq!(a, 1.0, epsilon = 1e-13);
                assert_abs_diff_eq!(b, 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn lemma_adjacent_uniform() {
        for i in 1..5 {
            for x in [0.2, 0.7] {
                let v = special_form(LemmaForm::Adjacent { i, m: 5 }, &uniform(), x).unwrap();
                assert_abs_diff_eq!(v, x - x * x / (i as f64 + 1.0), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lemma_single_logistic_slope() {
        let l = make_family("logistic", &[]).unwrap();
        let form = LemmaForm::Single { j: 2, n: 3 };
        let h = 1e-4;
        for x in [-1.0, 0.3, 2.0] {
            let slope = (special_form(form, &l, x + h).unwrap()
                - special_form(form, &l, x - h).unwrap())
                / (2.0 * h);
            let (f, fbar) = l.cdf_pair(x);
            assert_abs_diff_eq!(slope, 2.0 * f * fbar, epsilon = 1e-7);
        }
    }

    #[test]
    fn negation_duality() {
        let e = make_family("exponential", &[]).unwrap();
        let neg = e.negated();
        for y in [0.3, 1.0, 2.5] {
            let a = closed_form_r1(R1Item::MinGivenMin, &e, y).unwrap();
            let b = closed_form_r1(R1Item::MaxGivenMax, &neg, -y).unwrap();
            assert_abs_diff_eq!(a, -b, epsilon = 1e-10);
        }
    }

    #[test]
    fn heavy_tails_are_flagged() {
        let cb = crate::parent::make_cb(2.5, 0.0).unwrap();
        assert!(matches!(
            cond_mean_os(&cb, 1, 3, 3, 0.0),
            Err(Error::InfiniteMean(_))
        ));
        assert!(cond_mean_os(&cb, 2, 3, 3, 0.0).is_ok());
    }

    #[test]
    fn item_parsing() {
        assert_eq!("2:2|2:2".parse::<R1Item>().unwrap(), R1Item::MaxGivenMax);
        assert_eq!("iii".parse::<R1Item>().unwrap(), R1Item::MinGivenMax);
        assert!("x".parse::<R1Item>().is_err());
    }
}
