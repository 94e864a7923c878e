//! Adaptive Gauss–Kronrod quadrature with endpoint-singularity substitution.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_056_930,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    resabs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut resabs = WGK[10] * fc.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for idx in 0..10 {
        let dx = half * XGK[idx];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[idx] = f1;
        fv2[idx] = f2;
        kronrod += WGK[idx] * (f1 + f2);
        resabs += WGK[idx] * (f1.abs() + f2.abs());
        if idx % 2 == 1 {
            gauss += WG[idx / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for idx in 0..10 {
        resasc += WGK[idx] * ((fv1[idx] - mean).abs() + (fv2[idx] - mean).abs());
    }
    let value = kronrod * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Panel {
        a,
        b,
        value,
        error,
        resabs,
    }
}

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
    pub converged: bool,
}

/// Adaptive 21-point Gauss–Kronrod integrator.
///
/// `endpoint_power` is the exponent `p` of the substitution used by
/// [`Quadrature::integrate_singular`]: near each end the variable behaves
/// like `t^p`, flattening integrable power and log singularities.
#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub endpoint_power: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-11,
            max_subdivisions: 2000,
            endpoint_power: 3.0,
        }
    }
}

impl Quadrature {
    pub fn with_tolerance(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    /// Best estimate after at most `max_subdivisions` bisections.
    pub fn estimate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Estimate {
        if a == b {
            return Estimate {
                value: 0.0,
                error: 0.0,
                panels: 0,
                converged: true,
            };
        }
        let first = gk21(&f, a, b);
        let mut heap = BinaryHeap::new();
        heap.push(first);
        let mut value = first.value;
        let mut error = first.error;
        let mut resabs = first.resabs;
        let mut panels = 1;
        loop {
            let tol = self.abs_tol.max(self.rel_tol * value.abs());
            let roundoff = 1e3 * f64::EPSILON * resabs;
            if error <= tol.max(roundoff) {
                break;
            }
            if panels >= self.max_subdivisions {
                break;
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
                // panel can no longer be split
                heap.push(Panel {
                    error: 0.0,
                    ..worst
                });
                error -= worst.error;
                continue;
            }
            let left = gk21(&f, worst.a, mid);
            let right = gk21(&f, mid, worst.b);
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            resabs += left.resabs + right.resabs - worst.resabs;
            heap.push(left);
            heap.push(right);
            panels += 1;
        }
        // resum to shed accumulated drift
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        let resabs: f64 = heap.iter().map(|p| p.resabs).sum();
        let tol = self.abs_tol.max(self.rel_tol * value.abs());
        let converged = value.is_finite() && error <= tol.max(1e3 * f64::EPSILON * resabs);
        Estimate {
            value,
            error,
            panels,
            converged,
        }
    }

    /// Integral of `f` over `[a, b]`; errors if the tolerance is not met.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        let est = self.estimate(f, a, b);
        if est.converged {
            Ok(est.value)
        } else {
            Err(Error::Quadrature {
                a,
                b,
                value: est.value,
                error: est.error,
            })
        }
    }

    /// Integral over `(0, 1)` of `f(z, 1 - z)` for integrands that may be
    /// singular at either end. Both `z` and its complement are formed
    /// directly from the substitution, so neither loses precision near its
    /// own endpoint.
    pub fn integrate_unit<F: Fn(f64, f64) -> f64>(&self, f: F) -> Result<f64> {
        let p = self.endpoint_power;
        let g = |t: f64| {
            let (z, c, dz) = if t <= 0.5 {
                let base = 2.0 * t;
                let z = 0.5 * base.powf(p);
                (z, 1.0 - z, p * base.powf(p - 1.0))
            } else {
                let base = 2.0 * (1.0 - t);
                let c = 0.5 * base.powf(p);
                (1.0 - c, c, p * base.powf(p - 1.0))
            };
            if z <= 0.0 || c <= 0.0 || dz == 0.0 {
                0.0
            } else {
                f(z, c) * dz
            }
        };
        let left = self.estimate(g, 0.0, 0.5);
        let right = self.estimate(g, 0.5, 1.0);
        let value = left.value + right.value;
        if left.converged && right.converged {
            Ok(value)
        } else {
            Err(Error::Quadrature {
                a: 0.0,
                b: 1.0,
                value,
                error: left.error + right.error,
            })
        }
    }

    /// Integral over the open interval `(a, b)` for integrands that may be
    /// singular at either end. Points that round onto an endpoint contribute 0.
    pub fn integrate_singular<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let width = b - a;
        let (lo, hi) = (a.min(b), a.max(b));
        self.integrate_unit(|z, c| {
            let x = if z <= 0.5 {
                a + width * z
            } else {
                b - width * c
            };
            if x <= lo || x >= hi {
                0.0
            } else {
                f(x)
            }
        })
        .map(|v| v * width)
        .map_err(|e| match e {
            Error::Quadrature { value, error, .. } => Error::Quadrature {
                a,
                b,
                value: value * width,
                error: error * width.abs(),
            },
            other => other,
        })
    }

    /// Integral of `f` over `(a, +inf)` through `x = a + s / (1 - s)`.
    pub fn integrate_to_infinity<F: Fn(f64) -> f64>(&self, f: F, a: f64) -> Result<f64> {
        self.integrate_unit(|s, c| {
            let x = a + s / c;
            if x.is_finite() {
                f(x) / (c * c)
            } else {
                0.0
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomials_are_exact() {
        let q = Quadrature::default();
        let v = q
            .integrate(|x| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0)
            .unwrap();
        assert_abs_diff_eq!(v, 63.0 / 6.0 - 9.0 + 3.0, epsilon = 1e-13);
    }

    #[test]
    fn smooth_oscillatory() {
        let q = Quadrature::default();
        let v = q.integrate(|x: f64| (10.0 * x).sin(), 0.0, 3.0).unwrap();
        assert_abs_diff_eq!(v, (1.0 - 30f64.cos()) / 10.0, epsilon = 1e-12);
    }

    #[test]
    fn endpoint_singularities() {
        let q = Quadrature::default();
        let v = q.integrate_singular(|x: f64| x.ln(), 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, -1.0, epsilon = 1e-11);
        let v = q
            .integrate_singular(|x: f64| (1.0 + x) / x.sqrt(), 0.0, 1.0)
            .unwrap();
        assert_abs_diff_eq!(v, 8.0 / 3.0, epsilon = 1e-10);
        let v = q.integrate_unit(|z, c| 1.0 / (z * c).sqrt()).unwrap();
        assert_abs_diff_eq!(v, std::f64::consts::PI, epsilon = 1e-10);
        let v = q
            .integrate_singular(|x: f64| -(1.0 - x).ln() * x, 0.0, 1.0)
            .unwrap();
        assert_abs_diff_eq!(v, 0.75, epsilon = 1e-11);
    }

    #[test]
    fn semi_infinite() {
        let q = Quadrature::default();
        let v = q.integrate_to_infinity(|x: f64| (-x).exp(), 0.0).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-11);
        let v = q
            .integrate_to_infinity(|x: f64| 1.0 / (x * x), 1.0)
            .unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let q = Quadrature::default();
        let v = q.integrate(|x| x, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(v, -0.5, epsilon = 1e-14);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let q = Quadrature {
            max_subdivisions: 3,
            ..Quadrature::default()
        };
        assert!(q
            .integrate(|x: f64| 1.0 / x.abs().sqrt(), -1.0, 1.0)
            .is_err());
    }
}
