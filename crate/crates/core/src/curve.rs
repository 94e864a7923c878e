//! Tabulated real functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parent::ParentModel;
use crate::rational::format_sig;

/// A function tabulated on a strictly increasing grid.
///
/// `u` carries the quantile levels of the grid when it was produced on a
/// quantile scale; `derivative` carries exact slopes when they are known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub meaning: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative: Option<Vec<f64>>,
}

impl Curve {
    pub fn new(meaning: impl Into<String>, x: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let curve = Self {
            meaning: meaning.into(),
            u: None,
            x,
            values,
            derivative: None,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn with_quantiles(mut self, u: Vec<f64>) -> Result<Self> {
        self.u = Some(u);
        self.validate()?;
        Ok(self)
    }

    pub fn with_derivative(mut self, d: Vec<f64>) -> Result<Self> {
        self.derivative = Some(d);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if n < 2 {
            return Err(Error::InvalidRegression(
                "a curve needs at least two points".into(),
            ));
        }
        if self.values.len() != n
            || self.u.as_ref().is_some_and(|u| u.len() != n)
            || self.derivative.as_ref().is_some_and(|d| d.len() != n)
        {
            return Err(Error::InvalidRegression(
                "curve columns differ in length".into(),
            ));
        }
        if self.x.iter().any(|v| !v.is_finite()) || self.x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidRegression(
                "curve grid must be finite and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Grid range `(x_first, x_last)`.
    pub fn range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Nodal slopes: the stored derivative, or second-order finite
    /// differences on the (possibly uneven) grid.
    pub fn nodal_slopes(&self) -> Vec<f64> {
        if let Some(d) = &self.derivative {
            return d.clone();
        }
        let (x, y) = (&self.x, &self.values);
        let n = x.len();
        if n == 2 {
            let s = (y[1] - y[0]) / (x[1] - x[0]);
            return vec![s, s];
        }
        let three = |a: usize, b: usize, c: usize, at: usize| {
            // derivative at x[at] of the parabola through a, b, c
            let (xa, xb, xc) = (x[a], x[b], x[c]);
            let t = x[at];
            y[a] * (2.0 * t - xb - xc) / ((xa - xb) * (xa - xc))
                + y[b] * (2.0 * t - xa - xc) / ((xb - xa) * (xb - xc))
                + y[c] * (2.0 * t - xa - xb) / ((xc - xa) * (xc - xb))
        };
        (0..n)
            .map(|g| {
                if g == 0 {
                    three(0, 1, 2, 0)
                } else if g == n - 1 {
                    three(n - 3, n - 2, n - 1, n - 1)
                } else {
                    three(g - 1, g, g + 1, g)
                }
            })
            .collect()
    }

    fn locate(&self, t: f64) -> Option<usize> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return None;
        }
        Some(
            self.x
                .partition_point(|&v| v <= t)
                .clamp(1, self.x.len() - 1)
                - 1,
        )
    }

    /// Cubic Hermite interpolation; `None` outside the grid.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let slopes = self.nodal_slopes();
        self.value_with(&slopes, t)
    }

    pub(crate) fn value_with(&self, slopes: &[f64], t: f64) -> Option<f64> {
        let g = self.locate(t)?;
        let h = self.x[g + 1] - self.x[g];
        let s = (t - self.x[g]) / h;
        let (s2, s3) = (s * s, s * s * s);
        Some(
            (2.0 * s3 - 3.0 * s2 + 1.0) * self.values[g]
                + (s3 - 2.0 * s2 + s) * h * slopes[g]
                + (-2.0 * s3 + 3.0 * s2) * self.values[g + 1]
                + (s3 - s2) * h * slopes[g + 1],
        )
    }

    /// Slope of the Hermite interpolant; `None` outside the grid.
    pub fn derivative_at(&self, t: f64) -> Option<f64> {
        let slopes = self.nodal_slopes();
        self.derivative_with(&slopes, t)
    }

    pub(crate) fn derivative_with(&self, slopes: &[f64], t: f64) -> Option<f64> {
        let g = self.locate(t)?;
        let h = self.x[g + 1] - self.x[g];
        let s = (t - self.x[g]) / h;
        let s2 = s * s;
        Some(
            (6.0 * s2 - 6.0 * s) / h * self.values[g]
                + (3.0 * s2 - 4.0 * s + 1.0) * slopes[g]
                + (-6.0 * s2 + 6.0 * s) / h * self.values[g + 1]
                + (3.0 * s2 - 2.0 * s) * slopes[g + 1],
        )
    }

    pub fn max_abs_difference(&self, other: &Curve) -> Result<f64> {
        if self.x != other.x {
            return Err(Error::InvalidRegression(
                "curves live on different grids".into(),
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    /// CSV with columns `u,x,value[,derivative]`; `u` is empty when unknown.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,x,value");
        if self.derivative.is_some() {
            out.push_str(",derivative");
        }
        out.push('\n');
        for g in 0..self.len() {
            let u = self
                .u
                .as_ref()
                .map(|u| format_sig(u[g], 12))
                .unwrap_or_default();
            out.push_str(&format!(
                "{u},{},{}",
                format_sig(self.x[g], 15),
                format_sig(self.values[g], 15)
            ));
            if let Some(d) = &self.derivative {
                out.push_str(&format!(",{}", format_sig(d[g], 15)));
            }
            out.push('\n');
        }
        out
    }

    /// Reads the layout written by [`Curve::to_csv`]. Lines starting with
    /// `#` are skipped; `x` and `value` columns are required.
    pub fn from_csv(meaning: &str, text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty curve file".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        let col = |name: &str| header.iter().position(|h| *h == name);
        let xi = col("x").ok_or_else(|| Error::Parse("curve file lacks an x column".into()))?;
        let vi =
            col("value").ok_or_else(|| Error::Parse("curve file lacks a value column".into()))?;
        let (ui, di) = (col("u"), col("derivative"));
        let (mut u, mut x, mut values, mut d) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (row, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let num = |idx: usize| -> Result<f64> {
                cells
                    .get(idx)
                    .ok_or_else(|| Error::Parse(format!("row {} is short", row + 1)))?
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: bad number", row + 1)))
            };
            x.push(num(xi)?);
            values.push(num(vi)?);
            if let Some(i) = ui {
                if cells.get(i).is_some_and(|c| !c.is_empty()) {
                    u.push(num(i)?);
                }
            }
            if let Some(i) = di {
                d.push(num(i)?);
            }
        }
        let mut curve = Curve::new(meaning, x, values)?;
        if !u.is_empty() {
            curve = curve.with_quantiles(u)?;
        }
        if di.is_some() {
            curve = curve.with_derivative(d)?;
        }
        Ok(curve)
    }
}

/// Quantile-spaced grid `u = g / (G + 1)`, `g = 1..=G`.
pub fn quantile_grid(size: usize) -> Vec<f64> {
    (1..=size).map(|g| g as f64 / (size + 1) as f64).collect()
}

/// Evaluates `producer` at `x = Q(u)` for each `u` of the quantile grid.
pub fn tabulate<F>(model: &ParentModel, size: usize, meaning: &str, producer: F) -> Result<Curve>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if size < 2 {
        return Err(Error::InvalidParameter(
            "grid needs at least two points".into(),
        ));
    }
    let u = quantile_grid(size);
    let x: Vec<f64> = u.iter().map(|&v| model.quantile(v)).collect();
    let values = x
        .par_iter()
        .map(|&t| producer(t))
        .collect::<Result<Vec<f64>>>()?;
    Curve::new(meaning, x, values)?.with_quantiles(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn interpolation_reproduces_cubics() {
        let x: Vec<f64> = (0..30).map(|g| g as f64 / 29.0).collect();
        let y: Vec<f64> = x.iter().map(|t| t * t * t - t).collect();
        let d: Vec<f64> = x.iter().map(|t| 3.0 * t * t - 1.0).collect();
        let c = Curve::new("cubic", x, y)
            .unwrap()
            .with_derivative(d)
            .unwrap();
        assert_abs_diff_eq!(
            c.value_at(0.37).unwrap(),
            0.37f64.powi(3) - 0.37,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            c.derivative_at(0.37).unwrap(),
            3.0 * 0.37 * 0.37 - 1.0,
            epsilon = 1e-13
        );
        assert!(c.value_at(1.5).is_none());
    }

    #[test]
    fn finite_difference_slopes() {
        let x: Vec<f64> = (0..50).map(|g| (g as f64 / 49.0).powi(2)).collect();
        let y: Vec<f64> = x.iter().map(|t| t * t).collect();
        let c = Curve::new("square", x.clone(), y).unwrap();
        for (s, t) in c.nodal_slopes().iter().zip(&x) {
            assert_abs_diff_eq!(*s, 2.0 * t, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Curve::new("bad", vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Curve::new("bad", vec![0.0], vec![1.0]).is_err());
        assert!(Curve::new("bad", vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let c = Curve::new("c", vec![0.1, 0.2, 0.4], vec![1.0, 2.5, -3.0])
            .unwrap()
            .with_quantiles(vec![0.25, 0.5, 0.75])
            .unwrap()
            .with_derivative(vec![0.0, 1.0, 2.0])
            .unwrap();
        let back = Curve::from_csv("c", &format!("# header\n{}", c.to_csv())).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn grid_is_open() {
        let g = quantile_grid(99);
        assert_eq!(g.len(), 99);
        assert_abs_diff_eq!(g[0], 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(g[98], 0.99, epsilon = 1e-15);
    }
}
