//! Parent distributions defined only through a quantile density.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;

/// Quantile density taking `(u, 1 - u)` so that both tails stay accurate.
pub type QdfFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Construction knobs for [`QdfModel`].
#[derive(Clone, Copy, Debug)]
pub struct QdfOptions {
    /// The table covers `u` in `(eps, 1 - eps)`; beyond that the quantile is
    /// integrated directly.
    pub eps: f64,
    /// Node spacing in the logit coordinate `s = ln(u / (1 - u))`.
    pub step: f64,
    pub quadrature: Quadrature,
}

impl Default for QdfOptions {
    fn default() -> Self {
        Self {
            eps: 1e-12,
            step: 0.01,
            quadrature: Quadrature::with_tolerance(1e-15, 1e-13),
        }
    }
}

fn logistic_pair(s: f64) -> (f64, f64) {
    if s >= 0.0 {
        let e = (-s).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = s.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

fn logit_pair(u: f64, c: f64) -> f64 {
    u.ln() - c.ln()
}

/// Standardized quantile function `Q` with `Q(1/2) = 0` and `Q' = q`,
/// tabulated with cubic Hermite interpolation in the logit coordinate.
pub struct QdfModel {
    q: QdfFn,
    tails: (f64, f64),
    s_max: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    support: (f64, f64),
    quadrature: Quadrature,
}

impl fmt::Debug for QdfModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QdfModel")
            .field("tails", &self.tails)
            .field("support", &self.support)
            .field("nodes", &self.values.len())
            .finish()
    }
}

impl QdfModel {
    /// Builds the table. `tails` are the exponents `(a, b)` with
    /// `q(u) ~ u^-a` at 0 and `q(u) ~ (1-u)^-b` at 1; they are estimated
    /// from `q` when not supplied.
    pub fn new(q: QdfFn, tails: Option<(f64, f64)>, options: QdfOptions) -> Result<Self> {
        if !(options.eps > 0.0 && options.eps < 0.5) || !(options.step > 0.0) {
            return Err(Error::InvalidParameter(
                "qdf table options out of range".into(),
            ));
        }
        for g in 1..1000 {
            let u = g as f64 / 1000.0;
            let v = q(u, 1.0 - u);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "quantile density must be positive and finite, got {v} at u = {u}"
                )));
            }
        }
        let tails = tails.unwrap_or_else(|| estimate_tails(&q));
        let half = (((1.0 - options.eps) / options.eps).ln() / options.step).ceil() as usize;
        let s_max = half as f64 * options.step;
        let dq = |s: f64| {
            let (u, c) = logistic_pair(s);
            q(u, c) * u * c
        };
        let piece = |a: f64| {
            let est = options.quadrature.estimate(dq, a, a + options.step);
            if est.value.is_finite() && est.error <= 1e-6 * est.value.abs().max(1e-300) {
                Ok(est.value)
            } else {
                Err(Error::InvalidParameter(format!(
                    "quantile density is not integrable near s = {a}"
                )))
            }
        };
        let nodes = 2 * half + 1;
        let mut values = vec![0.0; nodes];
        let mut slopes = vec![0.0; nodes];
        for (idx, slope) in slopes.iter_mut().enumerate() {
            *slope = dq(-s_max + idx as f64 * options.step);
        }
        // integrate outward from the median node
        for idx in half + 1..nodes {
            let s0 = -s_max + (idx - 1) as f64 * options.step;
            values[idx] = values[idx - 1] + piece(s0)?;
        }
        for idx in (0..half).rev() {
            let s0 = -s_max + idx as f64 * options.step;
            values[idx] = values[idx + 1] - piece(s0)?;
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "quantile density is not integrable".into(),
            ));
        }
        let mut model = Self {
            q,
            tails,
            s_max,
            step: options.step,
            values,
            slopes,
            support: (f64::NEG_INFINITY, f64::INFINITY),
            quadrature: options.quadrature,
        };
        model.support = (model.endpoint(false), model.endpoint(true));
        Ok(model)
    }

    pub fn tails(&self) -> (f64, f64) {
        self.tails
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn qdf(&self, u: f64, c: f64) -> f64 {
        (self.q)(u, c)
    }

    fn dq_ds(&self, s: f64) -> f64 {
        let (u, c) = logistic_pair(s);
        if u == 0.0 || c == 0.0 {
            return 0.0;
        }
        let v = (self.q)(u, c) * u * c;
        // subnormal tails overflow the density without contributing mass
        if v.is_finite() {
            v
        } else {
            0.0
        }
    }

    fn endpoint(&self, right: bool) -> f64 {
        let exponent = if right { self.tails.1 } else { self.tails.0 };
        if exponent >= 1.0 {
            return if right {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
        }
        let edge = if right { self.s_max } else { -self.s_max };
        let sign = if right { 1.0 } else { -1.0 };
        let tail = self
            .quadrature
            .integrate_to_infinity(|t| self.dq_ds(edge + sign * t), 0.0)
            .unwrap_or(f64::INFINITY);
        self.value_at(edge) + sign * tail
    }

    fn value_at(&self, s: f64) -> f64 {
        if s <= -self.s_max {
            if s == -self.s_max {
                return self.values[0];
            }
            let extra = self
                .quadrature
                .estimate(|t| self.dq_ds(t), s, -self.s_max)
                .value;
            return self.values[0] - extra;
        }
        if s >= self.s_max {
            let last = self.values.len() - 1;
            if s == self.s_max {
                return self.values[last];
            }
            let extra = self
                .quadrature
                .estimate(|t| self.dq_ds(t), self.s_max, s)
                .value;
            return self.values[last] + extra;
        }
        let pos = (s + self.s_max) / self.step;
        let idx = (pos.floor() as usize).min(self.values.len() - 2);
        self.hermite(idx, pos - idx as f64)
    }

    fn hermite(&self, idx: usize, t: f64) -> f64 {
        let (y0, y1) = (self.values[idx], self.values[idx + 1]);
        let (m0, m1) = (
            self.slopes[idx] * self.step,
            self.slopes[idx + 1] * self.step,
        );
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    /// Standardized quantile at `u`, with `c = 1 - u` supplied by the caller.
    pub fn quantile(&self, u: f64, c: f64) -> f64 {
        if u <= 0.0 {
            return self.support.0;
        }
        if c <= 0.0 {
            return self.support.1;
        }
        self.value_at(logit_pair(u, c))
    }

    /// Returns `(F, 1 - F)` at the standardized point `z`.
    pub fn cdf(&self, z: f64) -> (f64, f64) {
        if z.is_nan() {
            return (f64::NAN, f64::NAN);
        }
        if z <= self.support.0 {
            return (0.0, 1.0);
        }
        if z >= self.support.1 {
            return (1.0, 0.0);
        }
        let last = self.values.len() - 1;
        let s = if z < self.values[0] {
            self.invert_outside(z, false)
        } else if z > self.values[last] {
            self.invert_outside(z, true)
        } else {
            let idx = self.values.partition_point(|&v| v <= z).clamp(1, last) - 1;
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let mut t = {
                let span = self.values[idx + 1] - self.values[idx];
                if span > 0.0 {
                    ((z - self.values[idx]) / span).clamp(0.0, 1.0)
                } else {
                    0.5
                }
            };
            for _ in 0..100 {
                let val = self.hermite(idx, t) - z;
                if val > 0.0 {
                    hi = t;
                } else {
                    lo = t;
                }
                let s_here = -self.s_max + (idx as f64 + t) * self.step;
                let slope = self.dq_ds(s_here) * self.step;
                let mut next = t - val / slope;
                if !(next > lo && next < hi) {
                    next = 0.5 * (lo + hi);
                }
                if (next - t).abs() < 1e-15 {
                    t = next;
                    break;
                }
                t = next;
            }
            -self.s_max + (idx as f64 + t) * self.step
        };
        logistic_pair(s)
    }

    fn invert_outside(&self, z: f64, right: bool) -> f64 {
        let edge = if right { self.s_max } else { -self.s_max };
        let sign = if right { 1.0 } else { -1.0 };
        let mut inner = edge;
        let mut outer;
        let mut width = 1.0;
        loop {
            outer = edge + sign * width;
            let v = self.value_at(outer);
            let beyond = if right { v >= z } else { v <= z };
            if beyond || outer.abs() > 740.0 {
                break;
            }
            inner = outer;
            width *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (inner + outer);
            if (outer - inner).abs() < 1e-13 {
                break;
            }
            let v = self.value_at(mid);
            let beyond = if right { v >= z } else { v <= z };
            if beyond {
                outer = mid;
            } else {
                inner = mid;
            }
        }
        0.5 * (inner + outer)
    }
}

fn estimate_tails(q: &QdfFn) -> (f64, f64) {
    let slope = |a: f64, b: f64, va: f64, vb: f64| -(vb / va).ln() / (b / a).ln();
    let (a, b) = (1e-10, 1e-8);
    let left = slope(a, b, q(a, 1.0 - a), q(b, 1.0 - b));
    let right = slope(a, b, q(1.0 - a, a), q(1.0 - b, b));
    // snap to a grid so that exact exponents like 1 are not lost to noise
    let snap = |v: f64| (v * 1e4).round() / 1e4;
    (snap(left), snap(right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cb(alpha: f64, beta: f64) -> QdfModel {
        let q: QdfFn = Arc::new(move |u: f64, c: f64| u.powf(-alpha) * c.powf(-beta));
        QdfModel::new(q, None, QdfOptions::default()).unwrap()
    }

    #[test]
    fn logistic_table() {
        let m = cb(1.0, 1.0);
        assert_eq!(m.tails(), (1.0, 1.0));
        for g in 1..1000 {
            let u = g as f64 / 1000.0;
            let exact = (u / (1.0 - u)).ln();
            assert_abs_diff_eq!(m.quantile(u, 1.0 - u), exact, epsilon = 1e-10);
            let (f, fbar) = m.cdf(exact);
            assert_abs_diff_eq!(f, u, epsilon = 1e-12);
            assert_abs_diff_eq!(fbar, 1.0 - u, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(m.quantile(1e-15, 1.0), (1e-15f64).ln(), epsilon = 1e-8);
    }

    #[test]
    fn finite_endpoints() {
        let m = cb(0.0, 0.0);
        assert_abs_diff_eq!(m.support().0, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.support().1, 0.5, epsilon = 1e-12);
        let m = cb(0.5, -0.5);
        let (a, b) = m.support();
        assert!(a.is_finite() && b.is_finite());
        let m = cb(0.0, 1.0);
        assert!(m.support().1.is_infinite());
        assert_abs_diff_eq!(m.support().0, -(2f64.ln()), epsilon = 1e-10);
    }

    #[test]
    fn deep_tail_inversion() {
        let m = cb(1.0, 1.0);
        let (f, _) = m.cdf(-40.0);
        assert!((f.ln() + 40.0).abs() < 1e-6);
        let (_, fbar) = m.cdf(40.0);
        assert!((fbar.ln() + 40.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_nonpositive_qdf() {
        let q: QdfFn = Arc::new(|u: f64, _c: f64| u - 0.5);
        assert!(QdfModel::new(q, None, QdfOptions::default()).is_err());
    }
}
