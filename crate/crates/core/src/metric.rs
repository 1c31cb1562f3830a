//! Connection and curvature of a metric field.
//!
//! Index conventions: `Γ^i_{jk}` is stored at `(i, j, k)`. The Riemann
//! operator is `R(u,v)w = ∇_u∇_v w − ∇_v∇_u w − ∇_{[u,v]}w`, and the stored
//! component `R^i_{jkl}` is the `∂_i` component of `R(∂_l, ∂_k)∂_j`, i.e.
//!
//! `R^i_{jkl} = ∂_l Γ^i_{kj} − ∂_k Γ^i_{lj} + Γ^i_{lm} Γ^m_{kj} − Γ^i_{km} Γ^m_{lj}`.
//!
//! With this placement the Ricci tensor `R_{jk} = R^i_{jki}` is positive on
//! the round sphere and the projective Weyl tensor vanishes for constant
//! curvature.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::field::MetricField;
use crate::jet::{Jet, Order};
use crate::linalg::{symmetric_eigenvalues, SqMat};

/// Condition number above which a metric counts as singular.
pub const CONDITION_CAP: f64 = 1e12;

/// Dense rank-3 array indexed `(i, j, k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Tensor3 {
        Tensor3 { n, data: vec![0.0; n * n * n] }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.n + j) * self.n + k] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_diff(&self, other: &Tensor3) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Dense rank-4 array indexed `(i, j, k, l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor4 {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Tensor4 {
        Tensor4 { n, data: vec![0.0; n * n * n * n] }
    }

    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.idx(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let at = self.idx(i, j, k, l);
        self.data[at] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_diff(&self, other: &Tensor4) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn check_condition(g: &SqMat<f64>, x: &[f64]) -> Result<()> {
    let ev = symmetric_eigenvalues(g);
    let lo = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let hi = ev.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= CONDITION_CAP) {
        return Err(GeomError::SingularMetric { point: x.to_vec(), condition });
    }
    Ok(())
}

/// Christoffel symbols from a jet-valued metric. The result is one order
/// lower than the input.
pub fn christoffel_jets(g: &SqMat<Jet>) -> Result<Vec<Jet>> {
    let n = g.dim();
    let ginv = g.inverse()?;
    // dg[k][i][j] = ∂_k g_ij
    let dg: Vec<SqMat<Jet>> = (0..n).map(|k| g.partial(k)).collect();
    let mut out = vec![Jet::constant(0.0); n * n * n];
    for j in 0..n {
        for k in j..n {
            // first kind Γ_{l,jk} = ½(∂_j g_lk + ∂_k g_lj − ∂_l g_jk)
            let first: Vec<Jet> = (0..n).map(|l| (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]) * 0.5).collect();
            for i in 0..n {
                let mut s = Jet::constant(0.0);
                for l in 0..n {
                    s += ginv[(i, l)] * first[l];
                }
                out[(i * n + j) * n + k] = s;
                out[(i * n + k) * n + j] = s;
            }
        }
    }
    Ok(out)
}

/// `Γ^i_{jk}` at `x`, from exact first partials of `g`.
pub fn christoffel(g: &MetricField, x: &[f64]) -> Result<Tensor3> {
    let gj = g.at(x, Order::First)?;
    check_condition(&gj.values(), x)?;
    let n = g.dim();
    let gam = christoffel_jets(&gj)?;
    Ok(Tensor3 { n, data: gam.iter().map(|j| j.v).collect() })
}

/// Riemann components from Christoffel jets carrying first derivatives.
pub fn riemann_from_christoffel(gam: &[Jet], n: usize) -> Tensor4 {
    let g = |i: usize, j: usize, k: usize| &gam[(i * n + j) * n + k];
    let mut r = Tensor4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    if k == l {
                        continue;
                    }
                    let mut v = g(i, k, j).d(l) - g(i, l, j).d(k);
                    for m in 0..n {
                        v += g(i, l, m).v * g(m, k, j).v - g(i, k, m).v * g(m, l, j).v;
                    }
                    r.set(i, j, k, l, v);
                }
            }
        }
    }
    r
}

pub fn riemann(g: &MetricField, x: &[f64]) -> Result<Tensor4> {
    let gj = g.at(x, Order::Second)?;
    check_condition(&gj.values(), x)?;
    let gam = christoffel_jets(&gj)?;
    Ok(riemann_from_christoffel(&gam, g.dim()))
}

/// `R_{jk} = R^i_{jki}`.
pub fn ricci_from_riemann(r: &Tensor4) -> SqMat<f64> {
    let n = r.n;
    SqMat::from_fn(n, |j, k| (0..n).map(|i| r.get(i, j, k, i)).sum())
}

pub fn ricci(g: &MetricField, x: &[f64]) -> Result<SqMat<f64>> {
    Ok(ricci_from_riemann(&riemann(g, x)?))
}

/// `R(u,v)w` as a vector.
pub fn riemann_apply(r: &Tensor4, u: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
    let n = r.n;
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s += r.get(i, j, k, l) * u[l] * v[k] * w[j];
                    }
                }
            }
            s
        })
        .collect()
}

/// Sectional curvature of the plane spanned by `u, v`.
pub fn sectional(g: &MetricField, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    let r = riemann(g, x)?;
    let gm = g.g(x)?;
    Ok(sectional_from(&r, &gm, u, v))
}

pub fn sectional_from(r: &Tensor4, g: &SqMat<f64>, u: &[f64], v: &[f64]) -> f64 {
    let ruvv = riemann_apply(r, u, v, v);
    let num = g.bilinear(&ruvv, u);
    let den = g.bilinear(u, u) * g.bilinear(v, v) - g.bilinear(u, v).powi(2);
    num / den
}

/// Sectional curvatures of all coordinate planes `(∂_a, ∂_b)`, `a < b`.
pub fn coordinate_sectionals(g: &MetricField, x: &[f64]) -> Result<Vec<f64>> {
    let r = riemann(g, x)?;
    let gm = g.g(x)?;
    let n = g.dim();
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let mut u = vec![0.0; n];
            let mut v = vec![0.0; n];
            u[a] = 1.0;
            v[b] = 1.0;
            out.push(sectional_from(&r, &gm, &u, &v));
        }
    }
    Ok(out)
}

/// Projective Weyl tensor `W^i_{jkl} = R^i_{jkl} − (δ^i_l R_{jk} − δ^i_k R_{jl})/(n−1)`.
pub fn weyl_from_riemann(r: &Tensor4) -> Tensor4 {
    let n = r.n;
    let ric = ricci_from_riemann(r);
    let c = 1.0 / (n as f64 - 1.0);
    let mut w = r.clone();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut corr = 0.0;
                    if i == l {
                        corr += ric[(j, k)];
                    }
                    if i == k {
                        corr -= ric[(j, l)];
                    }
                    w.set(i, j, k, l, r.get(i, j, k, l) - c * corr);
                }
            }
        }
    }
    w
}

pub fn projective_weyl(g: &MetricField, x: &[f64]) -> Result<Tensor4> {
    Ok(weyl_from_riemann(&riemann(g, x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Chart, ScalarField};
    use std::f64::consts::PI;

    fn sphere() -> MetricField {
        let c = Chart::new(vec![(0.05, PI - 0.05), (-4.0, 4.0)], vec!["th".into(), "ph".into()]).unwrap();
        MetricField::parse(c, &["1", "0", "sin(th)^2"]).unwrap()
    }

    /// Poincaré ball of curvature −1 in dimension n.
    fn hyperbolic(n: usize) -> MetricField {
        let c = Chart::cube(n, -0.5, 0.5).unwrap();
        let f = ScalarField::closed(n, move |x| {
            let mut r2 = Jet::constant(0.0);
            for xi in x {
                r2 += *xi * *xi;
            }
            (Jet::constant(1.0) - r2).powi(-2) * 4.0
        });
        MetricField::conformal(c, f)
    }

    #[test]
    fn euclidean_is_flat() {
        let g = MetricField::euclidean(Chart::cube(3, -1.0, 1.0).unwrap());
        let x = [0.1, 0.2, 0.3];
        assert_eq!(christoffel(&g, &x).unwrap().max_abs(), 0.0);
        assert_eq!(riemann(&g, &x).unwrap().max_abs(), 0.0);
        assert_eq!(ricci(&g, &x).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn sphere_christoffel_symbol() {
        let gam = christoffel(&sphere(), &[PI / 3.0, 0.2]).unwrap();
        assert!((gam.get(0, 1, 1) + 0.4330127018922193).abs() < 1e-14);
        assert!((gam.get(1, 0, 1) - (PI / 3.0).cos() / (PI / 3.0).sin()).abs() < 1e-14);
    }

    #[test]
    fn conformal_christoffels_vanish_at_critical_point() {
        let c = Chart::cube(2, -2.0, 2.0).unwrap();
        let g = MetricField::parse(c, &["x1^2+x2^2+1", "0", "x1^2+x2^2+1"]).unwrap();
        assert!(christoffel(&g, &[0.0, 0.0]).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn sphere_sectional_is_one_and_ricci_positive() {
        let g = sphere();
        for p in g.chart().halton(100, 0) {
            let k = sectional(&g, &p, &[1.0, 0.3], &[-0.2, 1.0]).unwrap();
            assert!((k - 1.0).abs() < 1e-10, "{k} at {p:?}");
        }
        let ric = ricci(&g, &[1.0, 0.0]).unwrap();
        assert!((ric[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_ball_has_curvature_minus_one() {
        let g = hyperbolic(3);
        for p in g.chart().halton(50, 0) {
            for k in coordinate_sectionals(&g, &p).unwrap() {
                assert!((k + 1.0).abs() < 1e-10);
            }
            assert!(projective_weyl(&g, &p).unwrap().max_abs() < 1e-9);
        }
    }

    #[test]
    fn singular_metric_is_reported() {
        let c = Chart::cube(2, -1.0, 1.0).unwrap();
        let g = MetricField::parse(c, &["1", "1", "1"]).unwrap();
        assert!(matches!(christoffel(&g, &[0.0, 0.0]), Err(GeomError::SingularMetric { .. })));
    }
}
