//! Order-statistic densities and the joint law of two overlapping-sample
//! order statistics with respect to `nu` = planar Lebesgue measure plus
//! Lebesgue measure on the diagonal.

use crate::combinatorics::binom_f64;
use crate::error::{Error, Result};
use crate::overlap::{p_marginal_r0, probability_table, OverlapSpec};
use crate::parent::ParentModel;
use crate::quadrature::Quadrature;
use crate::rational::ExactRational;

/// Density of `X_{j:n}`.
pub fn f_single(model: &ParentModel, j: u32, n: u32, x: f64) -> f64 {
    assert!(1 <= j && j <= n, "need 1 <= j <= n");
    let f = model.pdf(x);
    if f == 0.0 {
        return 0.0;
    }
    let (u, c) = model.cdf_pair(x);
    single_kernel(j, n, u, c) * f
}

/// Density of the `j`th of `n` uniform order statistics at `u` (`c = 1 - u`).
pub fn single_kernel(j: u32, n: u32, u: f64, c: f64) -> f64 {
    n as f64 * binom_f64(n as i64 - 1, j as i64 - 1) * u.powi(j as i32 - 1) * c.powi((n - j) as i32)
}

fn pair_coefficient(k: u32, ell: u32, n: u32) -> f64 {
    let (k, ell, n) = (k as i64, ell as i64, n as i64);
    (n * (n - 1)) as f64 * binom_f64(n - 2, k - 1) * binom_f64(n - k - 1, ell - k - 1)
}

/// Joint density of uniform order statistics `(U_{k:n}, U_{ell:n})` at
/// `u < v`, given the complements `cu = 1 - u`, `cv = 1 - v` and the gap `v - u`.
fn pair_kernel(k: u32, ell: u32, n: u32, u: f64, gap: f64, cv: f64) -> f64 {
    if gap <= 0.0 {
        return 0.0;
    }
    pair_coefficient(k, ell, n)
        * u.powi(k as i32 - 1)
        * gap.powi((ell - k - 1) as i32)
        * cv.powi((n - ell) as i32)
}

/// `F(y) - F(x)` for `x < y` without cancellation in the upper tail.
fn cdf_gap(model: &ParentModel, x: f64, y: f64) -> f64 {
    let (fx, cx) = model.cdf_pair(x);
    let (fy, cy) = model.cdf_pair(y);
    if fx > 0.5 {
        cx - cy
    } else {
        fy - fx
    }
}

/// Joint density of `(X_{k:n}, X_{ell:n})`, `k < ell`; zero unless `x < y`.
pub fn f_bivariate(model: &ParentModel, k: u32, ell: u32, n: u32, x: f64, y: f64) -> Result<f64> {
    if !(1 <= k && k < ell && ell <= n) {
        return Err(Error::InvalidParameter(format!(
            "bivariate density needs 1 <= k < ell <= n, got k = {k}, ell = {ell}, n = {n}"
        )));
    }
    Ok(bivariate_unchecked(model, k, ell, n, x, y))
}

fn bivariate_unchecked(model: &ParentModel, k: u32, ell: u32, n: u32, x: f64, y: f64) -> f64 {
    if !(x < y) {
        return 0.0;
    }
    let fx = model.pdf(x);
    let fy = model.pdf(y);
    if fx == 0.0 || fy == 0.0 {
        return 0.0;
    }
    let u = model.cdf(x);
    let cv = model.sf(y);
    pair_kernel(k, ell, n, u, cdf_gap(model, x, y), cv) * fx * fy
}

/// One off-diagonal mixture component `coef * f_{lower,upper:N}`.
#[derive(Clone, Debug)]
pub struct PairTerm {
    pub weight: ExactRational,
    pub lower: u32,
    pub upper: u32,
    /// Whether the first coordinate is the smaller order statistic.
    pub first_is_lower: bool,
}

/// One diagonal mixture component `coef * f_{rank:N}` on `{x = y}`.
#[derive(Clone, Debug)]
pub struct AtomTerm {
    pub weight: ExactRational,
    pub rank: u32,
}

/// Density of `(X, Y)` with respect to `nu`.
///
/// `continuous` is the planar part (zero on the diagonal); `atom` is the
/// line density of the diagonal part.
#[derive(Clone, Debug)]
pub struct NuDensity {
    model: ParentModel,
    pooled: u32,
    pairs: Vec<(PairTerm, f64)>,
    atoms: Vec<(AtomTerm, f64)>,
}

impl NuDensity {
    fn from_terms(
        model: &ParentModel,
        pooled: u32,
        pairs: Vec<PairTerm>,
        atoms: Vec<AtomTerm>,
    ) -> Self {
        Self {
            model: model.clone(),
            pooled,
            pairs: pairs
                .into_iter()
                .map(|t| {
                    let w = t.weight.to_f64();
                    (t, w)
                })
                .collect(),
            atoms: atoms
                .into_iter()
                .map(|t| {
                    let w = t.weight.to_f64();
                    (t, w)
                })
                .collect(),
        }
    }

    pub fn model(&self) -> &ParentModel {
        &self.model
    }

    /// Size of the pooled sample whose order statistics are mixed.
    pub fn pooled(&self) -> u32 {
        self.pooled
    }

    pub fn pair_terms(&self) -> impl Iterator<Item = &PairTerm> {
        self.pairs.iter().map(|(t, _)| t)
    }

    pub fn atom_terms(&self) -> impl Iterator<Item = &AtomTerm> {
        self.atoms.iter().map(|(t, _)| t)
    }

    pub fn is_purely_atomic(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Exact diagonal mass: the sum of the atom weights.
    pub fn atom_weight(&self) -> ExactRational {
        self.atoms.iter().map(|(t, _)| t.weight.clone()).sum()
    }

    pub fn continuous(&self, x: f64, y: f64) -> f64 {
        if x == y {
            return 0.0;
        }
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        let fl = self.model.pdf(lo);
        let fh = self.model.pdf(hi);
        if fl == 0.0 || fh == 0.0 {
            return 0.0;
        }
        let u = self.model.cdf(lo);
        let cv = self.model.sf(hi);
        let gap = cdf_gap(&self.model, lo, hi);
        self.pairs
            .iter()
            .filter(|(t, _)| t.first_is_lower == (x < y))
            .map(|(t, w)| w * pair_kernel(t.lower, t.upper, self.pooled, u, gap, cv))
            .sum::<f64>()
            * fl
            * fh
    }

    pub fn atom(&self, x: f64) -> f64 {
        let f = self.model.pdf(x);
        if f == 0.0 {
            return 0.0;
        }
        let (u, c) = self.model.cdf_pair(x);
        self.atoms
            .iter()
            .map(|(t, w)| w * single_kernel(t.rank, self.pooled, u, c))
            .sum::<f64>()
            * f
    }

    /// `continuous(Q(u), Q(v)) q(u) q(v)` with the ordering decided on the
    /// quantile scale.
    fn continuous_quantile(&self, u: f64, cu: f64, v: f64, cv: f64) -> f64 {
        let x = self.model.quantile_split(u, cu);
        let y = self.model.quantile_split(v, cv);
        let jac =
            self.model.quantile_density_split(u, cu) * self.model.quantile_density_split(v, cv);
        self.continuous(x, y) * jac
    }

    /// `int atom` in quantile coordinates.
    pub fn atom_mass(&self, tol: f64) -> Result<f64> {
        if self.atoms.is_empty() {
            return Ok(0.0);
        }
        let quad = Quadrature::with_tolerance(tol * 1e-2, 1e-12);
        quad.integrate_unit(|u, c| {
            let x = self.model.quantile_split(u, c);
            self.atom(x) * self.model.quantile_density_split(u, c)
        })
    }

    /// `iint continuous` in quantile coordinates, split at the diagonal.
    pub fn continuous_mass(&self, tol: f64) -> Result<f64> {
        if self.pairs.is_empty() {
            return Ok(0.0);
        }
        let outer = Quadrature::with_tolerance(tol * 1e-2, 1e-10);
        let inner = Quadrature::with_tolerance(tol * 1e-4, 1e-12);
        let mut total = 0.0;
        for below in [true, false] {
            let has_terms = self.pairs.iter().any(|(t, _)| t.first_is_lower == below);
            if !has_terms {
                continue;
            }
            // outer variable is the larger quantile w; inner runs over (0, w)
            let value = outer.integrate_unit(|w, cw| {
                let row = inner.integrate_unit(|s, cs| {
                    let z = w * s;
                    let cz = cw + w * cs;
                    if below {
                        self.continuous_quantile(z, cz, w, cw)
                    } else {
                        self.continuous_quantile(w, cw, z, cz)
                    }
                });
                row.map(|r| r * w).unwrap_or(f64::NAN)
            })?;
            if !value.is_finite() {
                return Err(Error::Quadrature {
                    a: 0.0,
                    b: 1.0,
                    value,
                    error: f64::NAN,
                });
            }
            total += value;
        }
        Ok(total)
    }

    /// `iint continuous + int atom`.
    pub fn nu_total_mass(&self, tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(self.continuous_mass(tol)? + self.atom_mass(tol)?)
    }

    /// Density of the first coordinate, integrating `y` out.
    pub fn marginal_first(&self, x: f64) -> Result<f64> {
        self.marginal(x, true)
    }

    /// Density of the second coordinate, integrating `x` out.
    pub fn marginal_second(&self, y: f64) -> Result<f64> {
        self.marginal(y, false)
    }

    fn marginal(&self, t: f64, first: bool) -> Result<f64> {
        let (a, ca) = self.model.cdf_pair(t);
        let quad = Quadrature::with_tolerance(1e-12, 1e-11);
        let eval = |v: f64, cv: f64| {
            let y = self.model.quantile_split(v, cv);
            let d = if first {
                self.continuous(t, y)
            } else {
                self.continuous(y, t)
            };
            d * self.model.quantile_density_split(v, cv)
        };
        let below = quad.integrate_unit(|s, cs| eval(a * s, ca + a * cs) * a)?;
        let above = quad.integrate_unit(|s, cs| eval(a + ca * s, ca * cs) * ca)?;
        Ok(below + above + self.atom(t))
    }

    /// `P(X <= x, Y <= y)` as the `nu`-integral over the quadrant, evaluated
    /// in quantile coordinates.
    pub fn rectangle_probability(&self, x: f64, y: f64) -> Result<f64> {
        let a = self.model.cdf(x);
        let b = self.model.cdf(y);
        let quad = Quadrature::with_tolerance(1e-13, 1e-12);
        let n = self.pooled;
        let mut total = 0.0;
        for (t, w) in &self.pairs {
            // caps on the smaller and the larger uniform order statistic
            let (lo, hi) = if t.first_is_lower { (a, b) } else { (b, a) };
            let lo = lo.min(hi);
            let strip = |l: f64, h: f64| {
                quad.integrate(
                    |v| {
                        quad.integrate(
                            |u| pair_kernel(t.lower, t.upper, n, u, v - u, 1.0 - v),
                            0.0,
                            lo.min(v),
                        )
                        .unwrap_or(f64::NAN)
                    },
                    l,
                    h,
                )
            };
            let value = strip(0.0, lo)? + strip(lo, hi)?;
            if !value.is_finite() {
                return Err(Error::Quadrature {
                    a: 0.0,
                    b: hi,
                    value,
                    error: f64::NAN,
                });
            }
            total += w * value;
        }
        let cap = a.min(b);
        for (t, w) in &self.atoms {
            total += w * quad.integrate(|u| single_kernel(t.rank, n, u, 1.0 - u), 0.0, cap)?;
        }
        Ok(total)
    }
}

/// Joint law of `X_{i:m}` and `X^{(r)}_{j:n}` from overlapping samples.
pub fn joint_overlap_density(spec: &OverlapSpec, model: &ParentModel) -> Result<NuDensity> {
    let table = probability_table(spec)?;
    let mut pairs = Vec::new();
    let mut atoms = Vec::new();
    for (k, ell, p) in table.iter() {
        if p.is_zero() {
            continue;
        }
        if k == ell {
            atoms.push(AtomTerm {
                weight: p.clone(),
                rank: k,
            });
        } else {
            pairs.push(PairTerm {
                weight: p.clone(),
                lower: k.min(ell),
                upper: k.max(ell),
                first_is_lower: k < ell,
            });
        }
    }
    Ok(NuDensity::from_terms(model, spec.pooled(), pairs, atoms))
}

/// Joint law of `X_{i:m}` (first `m` observations) and `X_{j:n}` (all `n`).
pub fn joint_r0_density(i: u32, m: u32, j: u32, n: u32, model: &ParentModel) -> Result<NuDensity> {
    if !(1 <= i && i <= m && m <= n && 1 <= j && j <= n) {
        return Err(Error::InvalidSpec(format!(
            "need 1 <= i <= m <= n and 1 <= j <= n, got i = {i}, m = {m}, j = {j}, n = {n}"
        )));
    }
    let mut pairs = Vec::new();
    let mut atoms = Vec::new();
    for k in i..=(i + n - m) {
        let weight = p_marginal_r0(i, m, k, n);
        if weight.is_zero() {
            continue;
        }
        if k == j {
            atoms.push(AtomTerm { weight, rank: k });
        } else {
            pairs.push(PairTerm {
                weight,
                lower: k.min(j),
                upper: k.max(j),
                first_is_lower: k < j,
            });
        }
    }
    Ok(NuDensity::from_terms(model, n, pairs, atoms))
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
    fn single_densities() {
        let u = uniform();
        assert_abs_diff_eq!(f_single(&u, 1, 3, 0.5), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(f_single(&u, 1, 1, 0.3), 1.0, epsilon = 1e-15);
        let e = make_family("exponential", &[]).unwrap();
        let x = 0.8f64;
        assert_abs_diff_eq!(
            f_single(&e, 2, 2, x),
            2.0 * (1.0 - (-x).exp()) * (-x).exp(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn bivariate_densities() {
        let u = uniform();
        assert_abs_diff_eq!(
            f_bivariate(&u, 1, 2, 2, 0.2, 0.6).unwrap(),
            2.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            f_bivariate(&u, 1, 3, 3, 0.2, 0.6).unwrap(),
            2.4,
            epsilon = 1e-14
        );
        assert_eq!(f_bivariate(&u, 1, 2, 2, 0.6, 0.2).unwrap(), 0.0);
        assert!(f_bivariate(&u, 2, 2, 3, 0.1, 0.2).is_err());
        // middle order statistic integrated out of the trivariate density
        let q = Quadrature::default();
        let v = q.integrate(|_t| 6.0, 0.2, 0.6).unwrap();
        assert_abs_diff_eq!(v, 2.4, epsilon = 1e-13);
    }

    #[test]
    fn moving_ith_atom() {
        let spec = OverlapSpec::new(1, 2, 2, 1, 1).unwrap();
        let d = joint_overlap_density(&spec, &uniform()).unwrap();
        assert_abs_diff_eq!(d.atom(0.5), 0.25, epsilon = 1e-14);
        assert_eq!(d.continuous(0.4, 0.4), 0.0);
    }

    #[test]
    fn identical_order_statistics() {
        let spec = OverlapSpec::new(0, 3, 3, 2, 2).unwrap();
        let d = joint_overlap_density(&spec, &uniform()).unwrap();
        assert!(d.is_purely_atomic());
        assert_abs_diff_eq!(
            d.atom(0.3),
            f_single(&uniform(), 2, 3, 0.3),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(d.nu_total_mass(1e-8).unwrap(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn r0_density_forms() {
        let d = joint_r0_density(1, 1, 1, 2, &uniform()).unwrap();
        assert_abs_diff_eq!(d.atom(0.3), 0.7, epsilon = 1e-14);
        // j outside [i, i+n-m] leaves no atom
        let d = joint_r0_density(1, 2, 4, 4, &uniform()).unwrap();
        assert_eq!(d.atom_terms().count(), 0);
        let d = joint_r0_density(2, 3, 2, 3, &uniform()).unwrap();
        assert!(d.is_purely_atomic());
        // both constructions agree when r = 0
        let e = make_family("exponential", &[]).unwrap();
        let a = joint_r0_density(2, 3, 3, 5, &e).unwrap();
        let b = joint_overlap_density(&OverlapSpec::new(0, 3, 5, 2, 3).unwrap(), &e).unwrap();
        for (x, y) in [(0.3, 0.9), (1.2, 0.4), (0.5, 0.5)] {
            assert_abs_diff_eq!(a.continuous(x, y), b.continuous(x, y), epsilon = 1e-13);
            assert_abs_diff_eq!(a.atom(x), b.atom(x), epsilon = 1e-13);
        }
    }

    #[test]
    fn normalization_and_marginals() {
        let e = make_family("exponential", &[]).unwrap();
        let spec = OverlapSpec::new(1, 3, 3, 2, 2).unwrap();
        let d = joint_overlap_density(&spec, &e).unwrap();
        assert_abs_diff_eq!(d.nu_total_mass(1e-8).unwrap(), 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(
            d.atom_mass(1e-10).unwrap(),
            d.atom_weight().to_f64(),
            epsilon = 1e-9
        );
        for x in [0.2, 0.7, 1.9] {
            assert_abs_diff_eq!(
                d.marginal_first(x).unwrap(),
                f_single(&e, 2, 3, x),
                epsilon = 1e-7
            );
            assert_abs_diff_eq!(
                d.marginal_second(x).unwrap(),
                f_single(&e, 2, 3, x),
                epsilon = 1e-7
            );
        }
    }

    #[test]
    fn moving_maxima_piecewise_symmetry() {
        let spec = OverlapSpec::new(1, 2, 2, 2, 2).unwrap();
        let d = joint_overlap_density(&spec, &uniform()).unwrap();
        for (x, y) in [(0.2, 0.7), (0.5, 0.6)] {
            assert_abs_diff_eq!(d.continuous(x, y), d.continuous(y, x), epsilon = 1e-14);
        }
        // weight of f_{2,3:3} on x < y is C(1,1)/C(3,1)
        let expect = f_bivariate(&uniform(), 2, 3, 3, 0.2, 0.7).unwrap() / 3.0;
        assert_abs_diff_eq!(d.continuous(0.2, 0.7), expect, epsilon = 1e-14);
    }

    #[test]
    fn rectangle_limits() {
        let spec = OverlapSpec::new(1, 2, 3, 1, 2).unwrap();
        let d = joint_overlap_density(&spec, &uniform()).unwrap();
        assert_abs_diff_eq!(
            d.rectangle_probability(1.0, 1.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            d.rectangle_probability(0.0, 0.5).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        // one margin at the top recovers the other marginal cdf
        let marginal = 3.0 * 0.4f64.powi(2) * 0.6 + 0.4f64.powi(3);
        assert_abs_diff_eq!(
            d.rectangle_probability(1.0, 0.4).unwrap(),
            marginal,
            epsilon = 1e-12
        );
    }
}
