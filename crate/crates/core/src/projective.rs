//! Projective equivalence: the BM-structure equation, partner metrics,
//! `L` from a pair, `L` from a projective flow, Nijenhuis torsion and the
//! Beltrami construction on the sphere.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::field::{Chart, EndomorphismField, MatrixField, MetricField, VectorField};
use crate::jet::{Jet, Order};
use crate::linalg::{symmetric_eigenvalues, symmetric_pencil, SqMat};
use crate::metric::{christoffel_jets, projective_weyl, Tensor3};

/// Default relative self-adjointness tolerance.
pub const EPS_SYM: f64 = 1e-9;

/// Two metrics on the same chart.
#[derive(Clone, Debug)]
pub struct MetricPair {
    pub g: MetricField,
    pub gbar: MetricField,
}

impl MetricPair {
    pub fn new(g: MetricField, gbar: MetricField) -> Result<MetricPair> {
        if g.chart() != gbar.chart() {
            return Err(GeomError::InvalidChart("the two metrics live on different charts".into()));
        }
        Ok(MetricPair { g, gbar })
    }

    pub fn chart(&self) -> &Chart {
        self.g.chart()
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }
}

/// A vector field whose flow is claimed to act by projective transformations of `g`.
#[derive(Clone, Debug)]
pub struct ProjectiveFlowSpec {
    pub v: VectorField,
    pub g: MetricField,
}

/// Largest asymmetry of `g·L`, relative to its norm.
pub fn self_adjoint_defect(g: &SqMat<f64>, l: &SqMat<f64>) -> (f64, f64) {
    let gl = g.matmul(l);
    (gl.sub(&gl.transpose()).max_abs(), gl.frobenius())
}

fn check_self_adjoint(g: &SqMat<f64>, l: &SqMat<f64>, x: &[f64], eps_sym: f64) -> Result<()> {
    let (defect, norm) = self_adjoint_defect(g, l);
    if defect > eps_sym * norm {
        return Err(GeomError::NotSelfAdjoint { point: x.to_vec(), defect });
    }
    Ok(())
}

/// Eigenvalues of a `g`-self-adjoint `L` at `x`, ascending, from the
/// symmetric pencil `(g·L) w = λ g w`.
pub fn eigenvalues(g: &MetricField, l: &EndomorphismField, x: &[f64]) -> Result<Vec<f64>> {
    let gm = g.g(x)?;
    let lm = l.l(x)?;
    Ok(symmetric_pencil(&gm.matmul(&lm).symmetrize(), &gm)?.0)
}

/// `g`-orthonormal frame as the columns of `R⁻ᵀ`, where `g = R Rᵀ` (Cholesky).
pub fn orthonormal_frame(g: &SqMat<f64>) -> Result<DMatrix<f64>> {
    let chol = g.symmetrize().to_nalgebra().cholesky().ok_or(GeomError::SingularMatrix)?;
    let rinv = chol.l().try_inverse().ok_or(GeomError::SingularMatrix)?;
    Ok(rinv.transpose())
}

/// Coordinate components `T_{kji}` of
/// `T(u,v,w) = g((∇_u L)v, w) − ½ g(v,u) d(tr L)(w) − ½ g(w,u) d(tr L)(v)`
/// with `u = ∂_k, v = ∂_j, w = ∂_i`.
///
/// `g` must carry first derivatives and `l` first derivatives.
pub fn bm_tensor(g: &SqMat<Jet>, l: &SqMat<Jet>) -> Result<Tensor3> {
    let n = g.dim();
    let gam = christoffel_jets(g)?;
    let gv = g.values();
    let lv = l.values();
    let gm = |i: usize, j: usize, k: usize| gam[(i * n + j) * n + k].v;
    let dl: Vec<SqMat<f64>> = (0..n).map(|k| l.partial(k).values()).collect();
    let dtr: Vec<f64> = (0..n).map(|k| dl[k].trace()).collect();
    let mut out = Tensor3::zeros(n);
    for k in 0..n {
        // (∇_k L)^a_j = ∂_k L^a_j + Γ^a_{km} L^m_j − Γ^m_{kj} L^a_m
        let nabla = SqMat::from_fn(n, |a, j| {
            let mut s = dl[k][(a, j)];
            for m in 0..n {
                s += gm(a, k, m) * lv[(m, j)] - gm(m, k, j) * lv[(a, m)];
            }
            s
        });
        let lowered = gv.matmul(&nabla);
        for j in 0..n {
            for i in 0..n {
                let v = lowered[(i, j)] - 0.5 * gv[(j, k)] * dtr[i] - 0.5 * gv[(i, k)] * dtr[j];
                out.set(k, j, i, v);
            }
        }
    }
    Ok(out)
}

/// Max over a `g`-orthonormal frame of the BM-equation defect at `x`.
pub fn bm_residual(g: &MetricField, l: &EndomorphismField, x: &[f64]) -> Result<f64> {
    bm_residual_with(g, l, x, EPS_SYM)
}

pub fn bm_residual_with(g: &MetricField, l: &EndomorphismField, x: &[f64], eps_sym: f64) -> Result<f64> {
    let gj = g.at(x, Order::Second)?;
    let lj = l.at(x, Order::First)?;
    let gv = gj.values();
    check_self_adjoint(&gv, &lj.values(), x, eps_sym)?;
    let t = bm_tensor(&gj, &lj)?;
    let e = orthonormal_frame(&gv)?;
    let n = g.dim();
    let mut worst = 0.0_f64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    for j in 0..n {
                        for i in 0..n {
                            s += e[(k, a)] * e[(j, b)] * e[(i, c)] * t.get(k, j, i);
                        }
                    }
                }
                worst = worst.max(s.abs());
            }
        }
    }
    Ok(worst)
}

/// `L = (det ḡ / det g)^{1/(n+1)} ḡ⁻¹ g` on jets.
pub fn l_from_pair_jets(g: &SqMat<Jet>, gbar: &SqMat<Jet>) -> Result<SqMat<Jet>> {
    let n = g.dim();
    let ratio = gbar.det() / g.det();
    let factor = ratio.powf(1.0 / (n as f64 + 1.0));
    Ok(gbar.inverse()?.matmul(g).scale(factor))
}

fn check_nonsingular(m: &SqMat<f64>, x: &[f64]) -> Result<()> {
    let ev = symmetric_eigenvalues(m);
    let lo = ev.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let hi = ev.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let condition = hi / lo;
    if !(condition <= crate::metric::CONDITION_CAP) {
        return Err(GeomError::SingularMetric { point: x.to_vec(), condition });
    }
    Ok(())
}

pub fn l_from_pair(pair: &MetricPair, x: &[f64]) -> Result<SqMat<f64>> {
    let g = pair.g.g(x)?;
    let gb = pair.gbar.g(x)?;
    check_nonsingular(&g, x)?;
    check_nonsingular(&gb, x)?;
    let gj = g.map(|v| Jet::constant(*v));
    let gbj = gb.map(|v| Jet::constant(*v));
    Ok(l_from_pair_jets(&gj, &gbj)?.values())
}

/// `L` of a pair as a field, with exact derivatives inherited from both metrics.
pub fn l_from_pair_field(pair: &MetricPair) -> EndomorphismField {
    let (g, gb) = (pair.g.clone(), pair.gbar.clone());
    EndomorphismField::from_fn(pair.chart().clone(), move |x| {
        let a = g.jets(x).symmetrize();
        let b = gb.jets(x).symmetrize();
        l_from_pair_jets(&a, &b).unwrap_or_else(|_| SqMat::scalar(a.dim(), Jet::constant(f64::NAN)))
    })
}

/// `ḡ = (1/det L) · g L⁻¹`, symmetrized.
pub fn gbar_from_l_jets(g: &SqMat<Jet>, l: &SqMat<Jet>) -> Result<SqMat<Jet>> {
    let det = l.det();
    Ok(g.matmul(&l.inverse()?).scale(det.recip()).symmetrize())
}

/// Partner metric of `(g, L)`. The spectrum of `L` is checked at `samples`
/// Halton points and must stay above `eps`.
pub fn gbar_from_l(g: &MetricField, l: &EndomorphismField, samples: usize, eps: f64) -> Result<MetricField> {
    if g.chart() != l.chart() {
        return Err(GeomError::InvalidChart("metric and endomorphism live on different charts".into()));
    }
    for x in g.chart().halton(samples, 0) {
        let ev = eigenvalues(g, l, &x)?;
        if ev[0] <= eps {
            return Err(GeomError::NonPositiveSpectrum { point: x, eigenvalue: ev[0] });
        }
    }
    let (gf, lf) = (g.clone(), l.clone());
    Ok(MetricField::from_fn(g.chart().clone(), move |x| {
        let a = gf.jets(x).symmetrize();
        let b = lf.jets(x);
        gbar_from_l_jets(&a, &b).unwrap_or_else(|_| SqMat::scalar(a.dim(), Jet::constant(f64::NAN)))
    }))
}

/// `(𝓛_v g)_{ij} = v^k ∂_k g_ij + g_kj ∂_i v^k + g_ik ∂_j v^k`, one order
/// below the inputs.
pub fn lie_derivative_jets(g: &SqMat<Jet>, v: &[Jet]) -> SqMat<Jet> {
    let n = g.dim();
    let gl: SqMat<Jet> = SqMat::from_fn(n, |i, j| g[(i, j)].truncate(g[(i, j)].order().lower()));
    let dg: Vec<SqMat<Jet>> = (0..n).map(|k| g.partial(k)).collect();
    let vv: Vec<Jet> = v.iter().map(|c| c.truncate(c.order().lower())).collect();
    // dv[i][k] = ∂_i v^k
    let dv: Vec<Vec<Jet>> = (0..n).map(|i| v.iter().map(|c| c.partial(i)).collect()).collect();
    SqMat::from_fn(n, |i, j| {
        let mut s = Jet::constant(0.0);
        for k in 0..n {
            s += vv[k] * dg[k][(i, j)] + gl[(k, j)] * dv[i][k] + gl[(i, k)] * dv[j][k];
        }
        s
    })
}

/// The BM-structure generated by a projective flow:
/// `A − tr(A)/(n+1)·Id` with `A = g⁻¹ 𝓛_v g`.
///
/// Uses the `+d/dt` pull-back Lie derivative. The opposite sign convention
/// gives `−A`, which is a BM-structure exactly when `A` is.
/// The result carries first derivatives only.
pub fn bm_from_flow_jets(g: &SqMat<Jet>, v: &[Jet]) -> Result<SqMat<Jet>> {
    let n = g.dim();
    let lie = lie_derivative_jets(g, v);
    let gl: SqMat<Jet> = SqMat::from_fn(n, |i, j| g[(i, j)].truncate(g[(i, j)].order().lower()));
    let a = gl.inverse()?.matmul(&lie);
    let shift = a.trace() * (1.0 / (n as f64 + 1.0));
    Ok(a.sub(&SqMat::scalar(n, shift)))
}

pub fn bm_from_flow(spec: &ProjectiveFlowSpec, x: &[f64]) -> Result<SqMat<f64>> {
    spec.g.chart().check(x)?;
    let xs = Jet::vars(x, Order::First);
    let g = spec.g.jets(&xs).symmetrize();
    let v = spec.v.jets(&xs);
    Ok(bm_from_flow_jets(&g, &v)?.values())
}

/// [`bm_from_flow`] as a field with first derivatives. It must be evaluated
/// on coordinate seeds, which is how chart-level fields are always used.
pub fn bm_from_flow_field(spec: &ProjectiveFlowSpec) -> EndomorphismField {
    let n = spec.g.dim();
    let (g, v) = (spec.g.clone(), spec.v.clone());
    let field = MatrixField::with_order(n, n, Order::First, move |x| {
        let vals: Vec<f64> = x.iter().map(|j| j.v).collect();
        let order = x.iter().map(Jet::order).max().unwrap_or(Order::Value).raise();
        let xs = Jet::vars(&vals, order);
        let gj = g.jets(&xs).symmetrize();
        let vj = v.jets(&xs);
        bm_from_flow_jets(&gj, &vj).unwrap_or_else(|_| SqMat::scalar(n, Jet::constant(f64::NAN)))
    });
    EndomorphismField::new(spec.g.chart().clone(), field).expect("dimensions agree by construction")
}

/// `N^i_{jk} = L^m_j ∂_m L^i_k − L^m_k ∂_m L^i_j − L^i_m (∂_j L^m_k − ∂_k L^m_j)`.
pub fn nijenhuis_torsion(l: &EndomorphismField, x: &[f64]) -> Result<Tensor3> {
    let lj = l.at(x, Order::First)?;
    let n = l.dim();
    let lv = lj.values();
    let dl: Vec<SqMat<f64>> = (0..n).map(|k| lj.partial(k).values()).collect();
    let mut out = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for m in 0..n {
                    s += lv[(m, j)] * dl[m][(i, k)] - lv[(m, k)] * dl[m][(i, j)];
                    s -= lv[(i, m)] * (dl[j][(m, k)] - dl[k][(m, j)]);
                }
                out.set(i, j, k, s);
            }
        }
    }
    Ok(out)
}

/// Max componentwise difference of the projective Weyl tensors of a pair at `x`.
pub fn weyl_defect(pair: &MetricPair, x: &[f64]) -> Result<f64> {
    Ok(projective_weyl(&pair.g, x)?.max_diff(&projective_weyl(&pair.gbar, x)?))
}

/// Max distance of the Beltrami images of great-circle points from the image plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeltramiReport {
    pub defect: f64,
    pub image_normal: [f64; 3],
    pub samples: usize,
}

/// The Beltrami map `v ↦ Av/‖Av‖` of the unit sphere.
pub fn beltrami_map(a: &Matrix3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    let w = a * v;
    w / w.norm()
}

/// Points of the great circle with unit normal `normal`, equally spaced.
pub fn great_circle(normal: &Vector3<f64>, samples: usize) -> Vec<Vector3<f64>> {
    let n = normal.normalize();
    let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = (seed - n * n.dot(&seed)).normalize();
    let e2 = n.cross(&e1);
    (0..samples)
        .map(|k| {
            let s = std::f64::consts::TAU * k as f64 / samples as f64;
            e1 * s.cos() + e2 * s.sin()
        })
        .collect()
}

/// Images of a great circle under the Beltrami map lie on the great circle
/// with normal `A^{-T} n`; returns the largest deviation.
pub fn beltrami_check(a: &Matrix3<f64>, normal: &Vector3<f64>, samples: usize) -> Result<BeltramiReport> {
    let inv = a.try_inverse().ok_or(GeomError::SingularMatrix)?;
    if a.determinant().abs() < 1e-14 * a.norm().powi(3) {
        return Err(GeomError::SingularMatrix);
    }
    let np = (inv.transpose() * normal.normalize()).normalize();
    let defect = great_circle(normal, samples)
        .iter()
        .map(|v| beltrami_map(a, v).dot(&np).abs())
        .fold(0.0, f64::max);
    Ok(BeltramiReport { defect, image_normal: [np.x, np.y, np.z], samples })
}
