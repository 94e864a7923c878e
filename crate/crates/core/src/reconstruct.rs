//! Recovering a parent cdf (or quantile density) from a regression curve.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::combinatorics::binom_f64;
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::parent::{make_from_split_qdf, midsample_lambda, midsample_qdf, ParentModel, QdfFn};
use crate::quadrature::Quadrature;

/// A regression-type input: values and slopes at arbitrary points plus the
/// grid on which the reconstruction is reported.
pub trait RegressionCurve: Sync {
    fn grid(&self) -> Vec<f64>;
    /// `None` outside the domain of the curve.
    fn value(&self, x: f64) -> Option<f64>;
    fn derivative(&self, x: f64) -> Option<f64>;
}

/// A tabulated [`Curve`] with cached interpolation slopes.
#[derive(Clone, Debug)]
pub struct Tabulated {
    curve: Curve,
    slopes: Vec<f64>,
}

impl Tabulated {
    pub fn new(curve: Curve) -> Self {
        let slopes = curve.nodal_slopes();
        Self { curve, slopes }
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }
}

impl RegressionCurve for Tabulated {
    fn grid(&self) -> Vec<f64> {
        self.curve.x.clone()
    }

    fn value(&self, x: f64) -> Option<f64> {
        self.curve.value_with(&self.slopes, x)
    }

    fn derivative(&self, x: f64) -> Option<f64> {
        self.curve.derivative_with(&self.slopes, x)
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A regression given by a closure on the closed domain `[lo, hi]`
/// (endpoints may be infinite). Without an explicit derivative, slopes come
/// from central differences.
#[derive(Clone)]
pub struct AnalyticCurve {
    grid: Vec<f64>,
    domain: (f64, f64),
    f: RealFn,
    df: Option<RealFn>,
}

impl AnalyticCurve {
    pub fn new<F>(grid: Vec<f64>, domain: (f64, f64), f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            grid,
            domain,
            f: Arc::new(f),
            df: None,
        }
    }

    pub fn with_derivative<D>(mut self, df: D) -> Self
    where
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.df = Some(Arc::new(df));
        self
    }
}

impl RegressionCurve for AnalyticCurve {
    fn grid(&self) -> Vec<f64> {
        self.grid.clone()
    }

    fn value(&self, x: f64) -> Option<f64> {
        (x >= self.domain.0 && x <= self.domain.1).then(|| (self.f)(x))
    }

    fn derivative(&self, x: f64) -> Option<f64> {
        if !(x >= self.domain.0 && x <= self.domain.1) {
            return None;
        }
        if let Some(df) = &self.df {
            return Some(df(x));
        }
        let h = 1e-5 * x.abs().max(1.0);
        let lo = (x - h).max(self.domain.0);
        let hi = (x + h).min(self.domain.1);
        Some(((self.f)(hi) - (self.f)(lo)) / (hi - lo))
    }
}

/// Checks run on a reconstructed cdf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub in_unit_interval: bool,
    pub nondecreasing: bool,
    pub min_value: f64,
    pub max_value: f64,
    /// Largest drop between consecutive grid values (0 when monotone).
    pub max_decrease: f64,
    pub notes: Vec<String>,
}

/// A reconstructed cdf on the input grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub cdf: Curve,
    pub gauge: String,
    pub diagnostics: Diagnostics,
}

impl ReconstructionResult {
    fn build(
        meaning: &str,
        x: Vec<f64>,
        f: Vec<f64>,
        gauge: &str,
        notes: Vec<String>,
    ) -> Result<Self> {
        let cdf = Curve::new(meaning, x, f)?;
        let min_value = cdf.values.iter().copied().fold(f64::INFINITY, f64::min);
        let max_value = cdf.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let max_decrease = cdf
            .values
            .windows(2)
            .map(|w| (w[0] - w[1]).max(0.0))
            .fold(0.0, f64::max);
        let diagnostics = Diagnostics {
            in_unit_interval: min_value >= 0.0 && max_value <= 1.0,
            nondecreasing: max_decrease == 0.0,
            min_value,
            max_value,
            max_decrease,
            notes,
        };
        Ok(Self {
            cdf,
            gauge: gauge.to_string(),
            diagnostics,
        })
    }

    /// Largest `|F_hat(x) - F(x)|` over the grid.
    pub fn sup_error(&self, truth: impl Fn(f64) -> f64) -> f64 {
        self.cdf
            .x
            .iter()
            .zip(&self.cdf.values)
            .map(|(&x, &f)| (f - truth(x)).abs())
            .fold(0.0, f64::max)
    }
}

const SLACK: f64 = 1e-9;

fn slopes_on_grid(g: &dyn RegressionCurve) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = g.grid();
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidRegression(
            "grid must have two or more increasing points".into(),
        ));
    }
    let d = grid
        .iter()
        .map(|&x| {
            g.derivative(x)
                .ok_or_else(|| Error::InvalidRegression(format!("no derivative at {x}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((grid, d))
}

fn check_unit_slopes(d: &[f64], grid: &[f64], increasing: bool) -> Result<Vec<String>> {
    for (&x, &s) in grid.iter().zip(d) {
        if !(s > 0.0 && s <= 1.0 + SLACK) {
            return Err(Error::InvalidRegression(format!(
                "g'({x}) = {s} lies outside (0, 1]"
            )));
        }
    }
    if d.iter().all(|&s| s >= 1.0 - SLACK) {
        return Err(Error::InvalidRegression(
            "g' is identically 1: the cdf would be constant".into(),
        ));
    }
    let mut notes = Vec::new();
    let worst = d
        .windows(2)
        .map(|w| if increasing { w[0] - w[1] } else { w[1] - w[0] })
        .fold(0.0, f64::max);
    if worst > SLACK {
        notes.push(format!(
            "g' is not {} along the grid (worst step {worst:.3e})",
            if increasing {
                "increasing"
            } else {
                "decreasing"
            }
        ));
    }
    Ok(notes)
}

/// From `g(x) = E(X_{1:n} | X_{1:m} = x)`: `F = 1 - (g')^(1/(n-m))`.
pub fn from_min_regression(
    g: &dyn RegressionCurve,
    n: u32,
    m: u32,
) -> Result<ReconstructionResult> {
    if !(1 <= m && m < n) {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= m < n, got m = {m}, n = {n}"
        )));
    }
    let (grid, d) = slopes_on_grid(g)?;
    let notes = check_unit_slopes(&d, &grid, false)?;
    let p = 1.0 / (n - m) as f64;
    let f = d.iter().map(|&s| 1.0 - s.min(1.0).powf(p)).collect();
    ReconstructionResult::build(
        &format!("F from E(X_{{1:{n}}} | X_{{1:{m}}})"),
        grid,
        f,
        "none: the cdf is determined pointwise",
        notes,
    )
}

/// From `g(x) = E(X_{n:n} | X_{m:m} = x)`: `F = (g')^(1/(n-m))`.
pub fn from_max_regression(
    g: &dyn RegressionCurve,
    n: u32,
    m: u32,
) -> Result<ReconstructionResult> {
    if !(1 <= m && m < n) {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= m < n, got m = {m}, n = {n}"
        )));
    }
    let (grid, d) = slopes_on_grid(g)?;
    let notes = check_unit_slopes(&d, &grid, true)?;
    let p = 1.0 / (n - m) as f64;
    let f = d.iter().map(|&s| s.min(1.0).powf(p)).collect();
    ReconstructionResult::build(
        &format!("F from E(X_{{{n}:{n}}} | X_{{{m}:{m}}})"),
        grid,
        f,
        "none: the cdf is determined pointwise",
        notes,
    )
}

/// Least-squares line through `(s, t)` pairs; returns `(intercept, slope)`.
fn fit_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// `(int_{x_last}^b h^-kappa, h(b-)^-1/(i-1))` past the end of the grid.
fn adjacent_tail(
    h: &dyn RegressionCurve,
    grid: &[f64],
    i: u32,
    b: f64,
    quad: &Quadrature,
) -> Result<(f64, f64, Vec<String>)> {
    let kappa = i as f64 / (i - 1) as f64;
    let inv = 1.0 / (i - 1) as f64;
    let last = grid[grid.len() - 1];
    let mut notes = Vec::new();
    let power = |t: f64| -> f64 {
        match h.value(t) {
            Some(v) if v > 0.0 => v.powf(-kappa),
            _ => f64::NAN,
        }
    };
    if b.is_finite() {
        if let Some(hb) = h.value(b) {
            let tail = quad.integrate_singular(power, last, b)?;
            let cap = if hb.is_finite() && hb > 0.0 {
                hb.powf(-inv)
            } else {
                0.0
            };
            return Ok((tail, cap, notes));
        }
        // extend linearly from the last grid point to b
        let hl = h.value(last).unwrap_or(f64::NAN);
        let sl = h.derivative(last).unwrap_or(0.0);
        let hb = hl + sl * (b - last);
        if !(hb > 0.0) {
            return Err(Error::InvalidRegression(
                "linear extension of h to b is not positive".into(),
            ));
        }
        notes.push("h extended linearly from the last grid point to b".into());
        let tail = quad.integrate(|t| (hl + sl * (t - last)).powf(-kappa), last, b)?;
        return Ok((tail, hb.powf(-inv), notes));
    }
    if h.value(last + 1.0).is_some() {
        let tail = quad.integrate_to_infinity(power, last)?;
        if !tail.is_finite() {
            return Err(Error::InvalidRegression(
                "tail integral of h^(-i/(i-1)) diverges".into(),
            ));
        }
        return Ok((tail, 0.0, notes));
    }
    // tabulated input on an unbounded range: extrapolate the last decade
    let n = grid.len();
    let start = n - (n / 10).max(3).min(n);
    let pts: Vec<(f64, f64)> = grid[start..]
        .iter()
        .filter_map(|&t| h.value(t).filter(|v| *v > 0.0).map(|v| (t, v)))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidRegression(
            "too few positive points to extrapolate h".into(),
        ));
    }
    let hl = h.value(last).unwrap_or(f64::NAN);
    if pts.iter().all(|p| p.0 > 0.0) {
        let logs: Vec<(f64, f64)> = pts.iter().map(|(t, v)| (t.ln(), v.ln())).collect();
        let (_, p) = fit_line(&logs);
        if !(p * kappa > 1.0) {
            return Err(Error::InvalidRegression(format!(
                "h grows like x^{p:.3} at the end of the grid: the tail integral diverges"
            )));
        }
        notes.push(format!(
            "h extrapolated as a power law x^{p:.4} beyond the grid"
        ));
        let tail = hl.powf(-kappa) * last / (p * kappa - 1.0);
        return Ok((tail, 0.0, notes));
    }
    let linear: Vec<(f64, f64)> = pts.iter().map(|(t, v)| (*t, v.ln())).collect();
    let (_, beta) = fit_line(&linear);
    if !(beta > 0.0) {
        return Err(Error::InvalidRegression(
            "h does not grow at the end of the grid: the tail integral diverges".into(),
        ));
    }
    notes.push(format!(
        "h extrapolated as exp({beta:.4} x) beyond the grid"
    ));
    Ok((hl.powf(-kappa) / (kappa * beta), 0.0, notes))
}

/// From `E(X_{i:m+1} | X_{i:m} = x) = x - h(x)` on `(a, b)`:
/// `F(x) = h^(-1/(i-1))(x) / (h^(-1/(i-1))(b-) + (1/(i-1)) int_x^b h^(-i/(i-1)))`.
pub fn from_adjacent_regression(
    h: &dyn RegressionCurve,
    i: u32,
    b: f64,
) -> Result<ReconstructionResult> {
    if i < 2 {
        return Err(Error::InvalidParameter(format!("need i >= 2, got {i}")));
    }
    let grid = h.grid();
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidRegression(
            "grid must have two or more increasing points".into(),
        ));
    }
    if !(grid[grid.len() - 1] <= b) {
        return Err(Error::InvalidRegression(
            "grid extends beyond the right endpoint b".into(),
        ));
    }
    let hv = grid
        .iter()
        .map(|&x| match h.value(x) {
            Some(v) if v > 0.0 && v.is_finite() => Ok(v),
            other => Err(Error::InvalidRegression(format!(
                "h({x}) = {other:?} must be positive"
            ))),
        })
        .collect::<Result<Vec<f64>>>()?;
    let kappa = i as f64 / (i - 1) as f64;
    let inv = 1.0 / (i - 1) as f64;
    let quad = Quadrature::with_tolerance(1e-14, 1e-12);
    let (mut tail, cap, notes) = adjacent_tail(h, &grid, i, b, &quad)?;
    let mut f = vec![0.0; grid.len()];
    for g in (0..grid.len()).rev() {
        if g + 1 < grid.len() {
            let piece = quad.integrate(
                |t| h.value(t).map(|v| v.powf(-kappa)).unwrap_or(f64::NAN),
                grid[g],
                grid[g + 1],
            )?;
            tail += piece;
        }
        f[g] = hv[g].powf(-inv) / (cap + inv * tail);
    }
    ReconstructionResult::build(
        &format!("F from E(X_{{{i}:m+1}} | X_{{{i}:m}})"),
        grid,
        f,
        "none: the cdf is determined pointwise",
        notes,
    )
}

/// The quantile density forced by `E(X_{j-1:n-2} | X_{j:n}) = X_{j:n}`.
#[derive(Clone)]
pub struct MidsampleQdf {
    pub j: u32,
    pub n: u32,
    pub lambda: f64,
    /// `(a, b)` with `q(u) ~ u^-a` near 0 and `(1-u)^-b` near 1.
    pub exponents: (f64, f64),
    pub q: QdfFn,
}

impl MidsampleQdf {
    pub fn eval(&self, u: f64) -> f64 {
        (self.q)(u, 1.0 - u)
    }

    /// Parent with this quantile density and the given median.
    pub fn parent(&self, location: f64) -> Result<ParentModel> {
        make_from_split_qdf(self.q.clone(), Some(self.exponents), location)
    }
}

pub fn qdf_from_midsample(j: u32, n: u32) -> Result<MidsampleQdf> {
    if !(2 <= j && j + 1 <= n) {
        return Err(Error::InvalidParameter(format!(
            "need 2 <= j <= n - 1, got j = {j}, n = {n}"
        )));
    }
    let (q, exponents) = midsample_qdf(j, n);
    Ok(MidsampleQdf {
        j,
        n,
        lambda: midsample_lambda(j, n),
        exponents,
        q,
    })
}

/// Solves `C(n-1, j-1) F^(j-1) (1-F)^(n-j) = h'(x)` along the grid, taking
/// the lower root up to the maximum of `h'` and the upper root from there on.
#[allow(non_snake_case)]
pub fn F_from_hprime(hprime: &dyn RegressionCurve, j: u32, n: u32) -> Result<ReconstructionResult> {
    if !(1 <= j && j <= n && n >= 2) {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= j <= n, n >= 2, got j = {j}, n = {n}"
        )));
    }
    let grid = hprime.grid();
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidRegression(
            "grid must have two or more increasing points".into(),
        ));
    }
    let (a, b) = ((j - 1) as i32, (n - j) as i32);
    let coef = binom_f64(n as i64 - 1, j as i64 - 1);
    let phi = |t: f64| coef * t.powi(a) * (1.0 - t).powi(b);
    let top = (j - 1) as f64 / (n - 1) as f64;
    let peak = phi(top);
    let values = grid
        .iter()
        .map(|&x| {
            let v = hprime
                .value(x)
                .ok_or_else(|| Error::InvalidRegression(format!("no value at {x}")))?;
            if !(v > 0.0 && v <= peak * (1.0 + SLACK)) {
                return Err(Error::InvalidRegression(format!(
                    "h'({x}) = {v} lies outside (0, {peak}]"
                )));
            }
            Ok(v.min(peak))
        })
        .collect::<Result<Vec<f64>>>()?;
    let argmax = values
        .iter()
        .enumerate()
        .fold(0, |best, (g, &v)| if v > values[best] { g } else { best });
    let solve = |target: f64, lo: f64, hi: f64, rising: bool| {
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo < 1e-16 {
                break;
            }
            let above = phi(mid) > target;
            if above == rising {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let f: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(g, &v)| {
            if j == 1 {
                1.0 - (v / coef).powf(1.0 / (n - 1) as f64)
            } else if j == n {
                (v / coef).powf(1.0 / (n - 1) as f64)
            } else if g < argmax {
                solve(v, 0.0, top, true)
            } else {
                solve(v, top, 1.0, false)
            }
        })
        .collect();
    if f.windows(2).any(|w| w[1] < w[0] - SLACK) {
        return Err(Error::InvalidRegression(
            "h' admits no nondecreasing branch of solutions".into(),
        ));
    }
    let mut notes = Vec::new();
    if 1 < j && j < n {
        notes.push(format!(
            "branch switch at x = {} with F = {}",
            grid[argmax], f[argmax]
        ));
    }
    ReconstructionResult::build(
        &format!("F from h' with j = {j}, n = {n}"),
        grid,
        f,
        "none: the cdf is determined pointwise",
        notes,
    )
}

/// `Q(y) = c y^(lambda/A - 1) (1-y)^((1-lambda)/A - 1) (lambda - y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WgQuantile {
    pub lambda: f64,
    pub a: f64,
    pub c: f64,
}

pub fn wg_quantile(lambda: f64, a: f64, c: f64) -> Result<WgQuantile> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in (0, 1), got {lambda}"
        )));
    }
    if !(a > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need A > 0 and finite c, got A = {a}, c = {c}"
        )));
    }
    Ok(WgQuantile { lambda, a, c })
}

impl WgQuantile {
    fn exponents(&self) -> (f64, f64) {
        (
            self.lambda / self.a - 1.0,
            (1.0 - self.lambda) / self.a - 1.0,
        )
    }

    pub fn quantile(&self, y: f64) -> f64 {
        let (p, q) = self.exponents();
        self.c * y.powf(p) * (1.0 - y).powf(q) * (self.lambda - y)
    }

    pub fn quantile_density(&self, y: f64) -> f64 {
        self.density_split(y, 1.0 - y)
    }

    fn density_split(&self, y: f64, cy: f64) -> f64 {
        let (p, q) = self.exponents();
        let l = self.lambda;
        let bracket = p * cy * (l - y) - q * y * (l - y) - y * cy;
        self.c * y.powf(p - 1.0) * cy.powf(q - 1.0) * bracket
    }

    /// The parent with this quantile function; fails for `c = 0` or when
    /// `Q` is not increasing.
    pub fn parent(&self) -> Result<ParentModel> {
        if self.c == 0.0 {
            return Err(Error::InvalidParameter(
                "c = 0 gives a degenerate quantile function".into(),
            ));
        }
        let me = *self;
        let q: QdfFn = Arc::new(move |u: f64, c: f64| me.density_split(u, c));
        make_from_split_qdf(q, None, self.quantile(0.5))
    }
}
