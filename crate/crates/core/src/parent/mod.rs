//! Parent distributions exposed through cdf, density, quantile and quantile
//! density.

mod qdf;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use qdf::{QdfFn, QdfModel, QdfOptions};

/// Standardized shapes. Every [`ParentModel`] is `location + scale * (±Z)`
/// for one of these.
#[derive(Clone, Debug)]
pub enum Family {
    Uniform,
    Exponential,
    /// `F(z) = z^alpha` on `(0, 1)`.
    Power {
        alpha: f64,
    },
    /// `F(z) = (1 + a (b - z))^-r` on `(-inf, b)`.
    NegPareto {
        a: f64,
        b: f64,
        r: f64,
    },
    /// `F(z) = exp(lambda z)` on `(-inf, 0)`.
    NegExp {
        lambda: f64,
    },
    Logistic,
    Numeric(Arc<QdfModel>),
}

impl Family {
    fn quantile(&self, u: f64, c: f64) -> f64 {
        let low = u <= 0.5;
        match *self {
            Family::Uniform => u,
            Family::Exponential => {
                if low {
                    -(-u).ln_1p()
                } else {
                    -c.ln()
                }
            }
            Family::Power { alpha } => {
                if low {
                    u.powf(1.0 / alpha)
                } else {
                    ((-c).ln_1p() / alpha).exp()
                }
            }
            Family::NegPareto { a, b, r } => {
                let excess = if low {
                    u.powf(-1.0 / r) - 1.0
                } else {
                    (-(-c).ln_1p() / r).exp_m1()
                };
                b - excess / a
            }
            Family::NegExp { lambda } => {
                if low {
                    u.ln() / lambda
                } else {
                    (-c).ln_1p() / lambda
                }
            }
            Family::Logistic => u.ln() - c.ln(),
            Family::Numeric(ref m) => m.quantile(u, c),
        }
    }

    fn qdf(&self, u: f64, c: f64) -> f64 {
        match *self {
            Family::Uniform => 1.0,
            Family::Exponential => 1.0 / c,
            Family::Power { alpha } => u.powf(1.0 / alpha - 1.0) / alpha,
            Family::NegPareto { a, r, .. } => u.powf(-1.0 / r - 1.0) / (r * a),
            Family::NegExp { lambda } => 1.0 / (lambda * u),
            Family::Logistic => 1.0 / (u * c),
            Family::Numeric(ref m) => m.qdf(u, c),
        }
    }

    fn cdf(&self, z: f64) -> (f64, f64) {
        let (lo, hi) = self.support();
        if z <= lo {
            return (0.0, 1.0);
        }
        if z >= hi {
            return (1.0, 0.0);
        }
        match *self {
            Family::Uniform => (z, 1.0 - z),
            Family::Exponential => (-(-z).exp_m1(), (-z).exp()),
            Family::Power { alpha } => {
                let l = alpha * z.ln();
                (l.exp(), -l.exp_m1())
            }
            Family::NegPareto { a, b, r } => {
                let l = -r * (a * (b - z)).ln_1p();
                (l.exp(), -l.exp_m1())
            }
            Family::NegExp { lambda } => ((lambda * z).exp(), -(lambda * z).exp_m1()),
            Family::Logistic => {
                if z >= 0.0 {
                    let e = (-z).exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                } else {
                    let e = z.exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                }
            }
            Family::Numeric(ref m) => m.cdf(z),
        }
    }

    fn pdf(&self, z: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(z > lo && z < hi) {
            return 0.0;
        }
        match *self {
            Family::Uniform => 1.0,
            Family::Exponential => (-z).exp(),
            Family::Power { alpha } => alpha * z.powf(alpha - 1.0),
            Family::NegPareto { a, b, r } => r * a * (1.0 + a * (b - z)).powf(-r - 1.0),
            Family::NegExp { lambda } => lambda * (lambda * z).exp(),
            Family::Logistic => {
                let (f, fbar) = self.cdf(z);
                f * fbar
            }
            Family::Numeric(ref m) => {
                let (u, c) = m.cdf(z);
                if u <= 0.0 || c <= 0.0 {
                    0.0
                } else {
                    1.0 / m.qdf(u, c)
                }
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            Family::Uniform | Family::Power { .. } => (0.0, 1.0),
            Family::Exponential => (0.0, f64::INFINITY),
            Family::NegPareto { b, .. } => (f64::NEG_INFINITY, b),
            Family::NegExp { .. } => (f64::NEG_INFINITY, 0.0),
            Family::Logistic => (f64::NEG_INFINITY, f64::INFINITY),
            Family::Numeric(ref m) => m.support(),
        }
    }

    fn tails(&self) -> (f64, f64) {
        match *self {
            Family::Uniform => (0.0, 0.0),
            Family::Exponential => (0.0, 1.0),
            Family::Power { alpha } => (1.0 - 1.0 / alpha, 0.0),
            Family::NegPareto { r, .. } => (1.0 + 1.0 / r, 0.0),
            Family::NegExp { .. } => (1.0, 0.0),
            Family::Logistic => (1.0, 1.0),
            Family::Numeric(ref m) => m.tails(),
        }
    }
}

/// Serializable description of a parent: `{family, params, location, scale}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub location: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn new(family: &str, params: &[f64]) -> Self {
        Self {
            family: family.to_string(),
            params: params.to_vec(),
            location: 0.0,
            scale: 1.0,
        }
    }

    pub fn build(&self) -> Result<ParentModel> {
        make_family(&self.family, &self.params)?.affine(self.location, self.scale)
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    /// Parses `name` or `name:p1,p2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (s.trim(), None),
        };
        let params = match rest {
            None => Vec::new(),
            Some(r) => r
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad model parameter {p:?}")))
                })
                .collect::<Result<_>>()?,
        };
        Ok(Self {
            family: name.to_string(),
            params,
            location: 0.0,
            scale: 1.0,
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if !self.params.is_empty() {
            let ps: Vec<String> = self.params.iter().map(|p| p.to_string()).collect();
            write!(f, ":{}", ps.join(","))?;
        }
        if self.location != 0.0 || self.scale != 1.0 {
            write!(f, "@{}x{}", self.location, self.scale)?;
        }
        Ok(())
    }
}

/// A continuous parent law on an open interval.
#[derive(Clone)]
pub struct ParentModel {
    family: Family,
    location: f64,
    scale: f64,
    negated: bool,
    spec: ModelSpec,
}

impl fmt::Debug for ParentModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ParentModel({})", self.id())
    }
}

fn expect_params(name: &str, params: &[f64], count: usize) -> Result<()> {
    if params.len() != count {
        return Err(Error::InvalidParameter(format!(
            "family {name} takes {count} parameter(s), got {}",
            params.len()
        )));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "family {name} needs finite parameters"
        )));
    }
    Ok(())
}

fn positive(name: &str, what: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!(
            "{name}: {what} must be positive, got {v}"
        )))
    }
}

/// Built-in families by name.
///
/// | name | params |
/// |------|--------|
/// | `uniform` | none |
/// | `exponential` | none |
/// | `power` | `alpha` |
/// | `neg-pareto` | `a, b, r` |
/// | `neg-exponential` | `lambda` |
/// | `logistic` | none |
/// | `cb` | `alpha, beta` |
/// | `midsample` | `j, n` (the quantile density of [`midsample_qdf`]) |
pub fn make_family(name: &str, params: &[f64]) -> Result<ParentModel> {
    let spec = ModelSpec::new(name, params);
    let family = match name {
        "uniform" => {
            expect_params(name, params, 0)?;
            Family::Uniform
        }
        "exponential" => {
            expect_params(name, params, 0)?;
            Family::Exponential
        }
        "logistic" => {
            expect_params(name, params, 0)?;
            Family::Logistic
        }
        "power" => {
            expect_params(name, params, 1)?;
            Family::Power {
                alpha: positive(name, "alpha", params[0])?,
            }
        }
        "neg-pareto" => {
            expect_params(name, params, 3)?;
            Family::NegPareto {
                a: positive(name, "a", params[0])?,
                b: params[1],
                r: positive(name, "r", params[2])?,
            }
        }
        "neg-exponential" => {
            expect_params(name, params, 1)?;
            Family::NegExp {
                lambda: positive(name, "lambda", params[0])?,
            }
        }
        "cb" => {
            expect_params(name, params, 2)?;
            let mut m = make_cb(params[0], params[1])?;
            m.spec = spec;
            return Ok(m);
        }
        "midsample" => {
            expect_params(name, params, 2)?;
            let (j, n) = (params[0], params[1]);
            if j.fract() != 0.0 || n.fract() != 0.0 || !(2.0 <= j && j <= n - 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "midsample needs integers 2 <= j <= n - 1, got j = {j}, n = {n}"
                )));
            }
            let (q, tails) = midsample_qdf(j as u32, n as u32);
            let model = QdfModel::new(q, Some(tails), QdfOptions::default())?;
            Family::Numeric(Arc::new(model))
        }
        other => return Err(Error::InvalidParameter(format!("unknown family {other:?}"))),
    };
    Ok(ParentModel {
        family,
        location: 0.0,
        scale: 1.0,
        negated: false,
        spec,
    })
}

/// Complementary beta `CB(alpha, beta)`: `q(u) = u^-alpha (1-u)^-beta`,
/// median 0. Apply [`ParentModel::affine`] for other gauges.
pub fn make_cb(alpha: f64, beta: f64) -> Result<ParentModel> {
    if !(alpha.is_finite() && beta.is_finite()) {
        return Err(Error::InvalidParameter(
            "CB exponents must be finite".into(),
        ));
    }
    let q: QdfFn = Arc::new(move |u: f64, c: f64| u.powf(-alpha) * c.powf(-beta));
    let model = QdfModel::new(q, Some((alpha, beta)), QdfOptions::default())?;
    Ok(ParentModel {
        family: Family::Numeric(Arc::new(model)),
        location: 0.0,
        scale: 1.0,
        negated: false,
        spec: ModelSpec::new("cb", &[alpha, beta]),
    })
}

/// Parent with quantile density `q` (scale taken as given) and median
/// `location`. Tail exponents are estimated from `q`.
pub fn make_from_qdf<Q>(q: Q, location: f64) -> Result<ParentModel>
where
    Q: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let q: QdfFn = Arc::new(move |u: f64, _c: f64| q(u));
    make_from_split_qdf(q, None, location)
}

/// As [`make_from_qdf`] with a density taking `(u, 1 - u)` and optional
/// known tail exponents.
pub fn make_from_split_qdf(
    q: QdfFn,
    tails: Option<(f64, f64)>,
    location: f64,
) -> Result<ParentModel> {
    let model = QdfModel::new(q, tails, QdfOptions::default())?;
    Ok(ParentModel {
        family: Family::Numeric(Arc::new(model)),
        location,
        scale: 1.0,
        negated: false,
        spec: ModelSpec {
            family: "qdf".into(),
            params: Vec::new(),
            location,
            scale: 1.0,
        },
    })
}

/// Weight `lambda = j(j-1) / ((n-j+1)(n-j) + j(j-1))`.
pub fn midsample_lambda(j: u32, n: u32) -> f64 {
    let (j, n) = (j as f64, n as f64);
    j * (j - 1.0) / ((n - j + 1.0) * (n - j) + j * (j - 1.0))
}

/// Quantile density `(j-1 + (n-2j+1)u) / (u^(1+(j-1)lambda) (1-u)^(1+(n-j)(1-lambda)))`
/// together with its tail exponents.
pub fn midsample_qdf(j: u32, n: u32) -> (QdfFn, (f64, f64)) {
    let lambda = midsample_lambda(j, n);
    let (jf, nf) = (j as f64, n as f64);
    let a = 1.0 + (jf - 1.0) * lambda;
    let b = 1.0 + (nf - jf) * (1.0 - lambda);
    let q: QdfFn = Arc::new(move |u: f64, c: f64| {
        (jf - 1.0 + (nf - 2.0 * jf + 1.0) * u) * u.powf(-a) * c.powf(-b)
    });
    (q, (a, b))
}

/// Draws `(u, 1 - u)` uniformly on the open unit interval, both exact.
pub(crate) fn open_unit_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let k = rng.next_u64() >> 11;
    let u = (k as f64 + 0.5) * SCALE;
    let c = (((1u64 << 53) - k) as f64 - 0.5) * SCALE;
    (u, c)
}

impl ParentModel {
    /// `location + scale * X`.
    pub fn affine(mut self, location: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && location.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "location/scale must be finite with scale > 0, got {location}, {scale}"
            )));
        }
        self.location = self.location * scale + location;
        self.scale *= scale;
        self.spec.location = self.spec.location * scale + location;
        self.spec.scale *= scale;
        Ok(self)
    }

    /// The law of `-X`.
    pub fn negated(&self) -> Self {
        let mut m = self.clone();
        m.negated = !m.negated;
        m.location = -m.location;
        m.spec.family = if self.negated {
            self.spec.family.trim_start_matches("neg:").to_string()
        } else {
            format!("neg:{}", self.spec.family)
        };
        m.spec.location = m.location;
        m
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn id(&self) -> String {
        self.spec.to_string()
    }

    fn sign(&self) -> f64 {
        if self.negated {
            -1.0
        } else {
            1.0
        }
    }

    /// `(F(x), 1 - F(x))`, each computed without cancellation.
    pub fn cdf_pair(&self, x: f64) -> (f64, f64) {
        let z = self.sign() * (x - self.location) / self.scale;
        let (f, fbar) = self.family.cdf(z);
        if self.negated {
            (fbar, f)
        } else {
            (f, fbar)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_pair(x).0
    }

    pub fn sf(&self, x: f64) -> f64 {
        self.cdf_pair(x).1
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = self.sign() * (x - self.location) / self.scale;
        self.family.pdf(z) / self.scale
    }

    /// Quantile at `u` given both `u` and `c = 1 - u`.
    pub fn quantile_split(&self, u: f64, c: f64) -> f64 {
        if self.negated {
            self.location - self.scale * self.family.quantile(c, u)
        } else {
            self.location + self.scale * self.family.quantile(u, c)
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.quantile_split(u, 1.0 - u)
    }

    /// `Q(1 - w)`, accurate for small `w`.
    pub fn quantile_upper(&self, w: f64) -> f64 {
        self.quantile_split(1.0 - w, w)
    }

    pub fn quantile_density_split(&self, u: f64, c: f64) -> f64 {
        if self.negated {
            self.scale * self.family.qdf(c, u)
        } else {
            self.scale * self.family.qdf(u, c)
        }
    }

    pub fn quantile_density(&self, u: f64) -> f64 {
        self.quantile_density_split(u, 1.0 - u)
    }

    /// Open support `(a, b)`; endpoints may be infinite.
    pub fn support(&self) -> (f64, f64) {
        let (a, b) = self.family.support();
        if self.negated {
            (
                self.location - self.scale * b,
                self.location - self.scale * a,
            )
        } else {
            (
                self.location + self.scale * a,
                self.location + self.scale * b,
            )
        }
    }

    /// Exponents `(a, b)` with `q(u) ~ u^-a` near 0 and `(1-u)^-b` near 1.
    pub fn tail_exponents(&self) -> (f64, f64) {
        let (a, b) = self.family.tails();
        if self.negated {
            (b, a)
        } else {
            (a, b)
        }
    }

    /// Whether an order statistic whose density carries `u^(k-1)` near 0 and
    /// `(1-u)^(n-k)` near 1 is integrable.
    pub fn os_mean_finite(&self, k: u32, n: u32) -> bool {
        let (a, b) = self.tail_exponents();
        a < (k + 1) as f64 && b < (n - k + 2) as f64
    }

    pub fn has_finite_mean(&self) -> bool {
        self.os_mean_finite(1, 1)
    }

    /// `count` draws via the quantile transform, reproducible from `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let (u, c) = open_unit_pair(&mut rng);
                self.quantile_split(u, c)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn builtins() -> Vec<ParentModel> {
        vec![
            make_family("uniform", &[]).unwrap(),
            make_family("exponential", &[]).unwrap(),
            make_family("power", &[2.0]).unwrap(),
            make_family("power", &[0.5]).unwrap(),
            make_family("neg-pareto", &[2.0, 1.0, 1.5]).unwrap(),
            make_family("neg-exponential", &[0.7]).unwrap(),
            make_family("logistic", &[]).unwrap(),
            make_family("exponential", &[])
                .unwrap()
                .affine(2.0, 3.0)
                .unwrap(),
            make_family("exponential", &[]).unwrap().negated(),
        ]
    }

    fn cbs() -> Vec<ParentModel> {
        let grid = [-0.5, 0.0, 0.5, 1.0, 1.5];
        let mut out = Vec::new();
        for a in grid {
            for b in grid {
                out.push(make_cb(a, b).unwrap());
            }
        }
        out
    }

    #[test]
    fn quantile_cdf_round_trip_and_duality() {
        for m in builtins().into_iter().chain(cbs()) {
            for g in 1..1000 {
                let u = g as f64 / 1000.0;
                let x = m.quantile(u);
                assert!((m.cdf(x) - u).abs() < 1e-8, "{} at {u}", m.id());
                let prod = m.quantile_density(u) * m.pdf(x);
                assert!(
                    (prod - 1.0).abs() < 1e-8,
                    "{} duality at {u}: {prod}",
                    m.id()
                );
            }
        }
    }

    #[test]
    fn simple_values() {
        let u = make_family("uniform", &[]).unwrap();
        assert_eq!(u.cdf(0.3), 0.3);
        let p = make_family("power", &[2.0]).unwrap();
        assert_abs_diff_eq!(p.pdf(0.3), 0.6, epsilon = 1e-15);
        let l = make_family("logistic", &[]).unwrap();
        assert_abs_diff_eq!(l.quantile_density(0.2), 1.0 / (0.2 * 0.8), epsilon = 1e-12);
    }

    #[test]
    fn cb_matches_closed_forms() {
        let m = make_cb(1.0, 1.0).unwrap();
        let e = make_cb(0.0, 1.0).unwrap();
        let flat = make_cb(0.0, 0.0).unwrap();
        for g in 1..1000 {
            let u = g as f64 / 1000.0;
            assert_abs_diff_eq!(m.quantile(u), (u / (1.0 - u)).ln(), epsilon = 1e-8);
            assert_abs_diff_eq!(e.quantile(u), -(1.0 - u).ln() - 2f64.ln(), epsilon = 1e-8);
            assert_abs_diff_eq!(flat.quantile(u), u - 0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn support_and_tail_flags() {
        let cases = [
            (0.5, 0.5, true, true),
            (1.0, 0.0, false, true),
            (1.5, 1.0, false, false),
        ];
        for (a, b, left, right) in cases {
            let m = make_cb(a, b).unwrap();
            let (lo, hi) = m.support();
            assert_eq!(lo.is_finite(), left);
            assert_eq!(hi.is_finite(), right);
        }
        let (q, tails) = midsample_qdf(2, 4);
        assert_abs_diff_eq!(tails.0, 1.25, epsilon = 1e-15);
        assert_abs_diff_eq!(tails.1, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            q(0.3, 0.7),
            1.3 / (0.3f64.powf(1.25) * 0.7f64.powf(2.5)),
            epsilon = 1e-12
        );
        let m = make_family("midsample", &[2.0, 4.0]).unwrap();
        assert!(!m.has_finite_mean());
        assert!(make_family("exponential", &[]).unwrap().has_finite_mean());
        assert!(!make_cb(2.0, 2.0).unwrap().has_finite_mean());
    }

    #[test]
    fn user_qdf_estimates_tails() {
        let m = make_from_qdf(|u| 1.0 / (u * (1.0 - u)), 0.0).unwrap();
        assert_eq!(m.tail_exponents(), (1.0, 1.0));
        let uni = make_from_qdf(|_| 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(uni.quantile(0.75), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(uni.support().0, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn sampling_is_seeded() {
        let m = make_family("uniform", &[]).unwrap();
        assert_eq!(m.sample(10, 7), m.sample(10, 7));
        assert_ne!(m.sample(10, 7), m.sample(10, 8));
        assert!(m.sample(1000, 1).iter().all(|&x| x > 0.0 && x < 1.0));
        let e = make_family("exponential", &[]).unwrap();
        let n = 1_000_000;
        let mean: f64 = e.sample(n, 3).iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt());
        let l = make_cb(1.0, 1.0).unwrap();
        let mut xs = l.sample(n, 5);
        xs.sort_by(f64::total_cmp);
        assert!(xs[n / 2].abs() < 0.005);
    }

    #[test]
    fn spec_parsing() {
        let s: ModelSpec = "power:2".parse().unwrap();
        assert_eq!(s.params, vec![2.0]);
        let j: ModelSpec =
            serde_json::from_str(r#"{"family":"cb","params":[1,1],"scale":2}"#).unwrap();
        assert_eq!(j.scale, 2.0);
        assert!(serde_json::from_str::<ModelSpec>(r#"{"family":"cb","bogus":1}"#).is_err());
        assert!(make_family("power", &[-1.0]).is_err());
        assert!(make_family("nope", &[]).is_err());
    }

    #[test]
    fn negation_mirrors() {
        let e = make_family("exponential", &[]).unwrap();
        let n = e.negated();
        assert_eq!(n.support(), (f64::NEG_INFINITY, 0.0));
        assert_abs_diff_eq!(n.cdf(-1.0), (-1f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(n.quantile(0.3), -e.quantile(0.7), epsilon = 1e-15);
        assert_eq!(n.tail_exponents(), (1.0, 0.0));
    }
}
