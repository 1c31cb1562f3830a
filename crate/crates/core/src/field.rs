//! Charts and smooth fields.
//!
//! Every field is evaluated on jets, so first and second partial derivatives
//! travel with the value. Composite fields built from other fields (partner
//! metrics, Lie derivatives, block sums) therefore keep exact derivatives.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::expr::{self, Expr, ExprError};
use crate::jet::{Jet, Order, MAX_DIM};
use crate::linalg::{symmetric_eigenvalues, SqMat};
use crate::sampling;

/// A coordinate box `∏ (lo_i, hi_i)` with named coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    bounds: Vec<(f64, f64)>,
    names: Vec<String>,
}

impl Chart {
    pub fn new(bounds: Vec<(f64, f64)>, names: Vec<String>) -> Result<Chart> {
        let n = bounds.len();
        if n < 2 {
            return Err(GeomError::InvalidChart(format!("dimension {n} < 2")));
        }
        if n > MAX_DIM {
            return Err(GeomError::InvalidChart(format!("dimension {n} exceeds {MAX_DIM}")));
        }
        if names.len() != n {
            return Err(GeomError::InvalidChart(format!("{} names for dimension {n}", names.len())));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GeomError::InvalidChart(format!("bounds of {} are ({lo}, {hi})", names[i])));
            }
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(GeomError::InvalidChart(format!("duplicate coordinate name {a}")));
            }
        }
        Ok(Chart { bounds, names })
    }

    /// Box with default names `x1, x2, ...`.
    pub fn boxed(bounds: &[(f64, f64)]) -> Result<Chart> {
        let names = (1..=bounds.len()).map(|i| format!("x{i}")).collect();
        Chart::new(bounds.to_vec(), names)
    }

    /// The cube `(lo, hi)^n` with default names.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Chart> {
        Chart::boxed(&vec![(lo, hi); n])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn names(&self) -> Vec<&str> {
        self.names.iter().map(String::as_str).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.bounds).all(|(&v, &(lo, hi))| v > lo && v < hi)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(GeomError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !self.contains(x) {
            return Err(GeomError::OutsideChart { point: x.to_vec() });
        }
        Ok(())
    }

    /// The concentric box scaled by `frac` in every direction.
    pub fn shrink(&self, frac: f64) -> Chart {
        let bounds = self
            .bounds
            .iter()
            .map(|&(lo, hi)| {
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo) * frac;
                (mid - half, mid + half)
            })
            .collect();
        Chart { bounds, names: self.names.clone() }
    }

    fn map_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.bounds).map(|(&t, &(lo, hi))| lo + t * (hi - lo)).collect()
    }

    /// Halton points strictly inside the box.
    pub fn halton(&self, count: usize, skip: u64) -> Vec<Vec<f64>> {
        sampling::halton(self.dim(), count, skip).iter().map(|u| self.map_unit(u)).collect()
    }

    pub fn random(&self, rng: &mut impl Rng, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                let u: Vec<f64> = (0..self.dim()).map(|_| rng.gen_range(1e-9..1.0 - 1e-9)).collect();
                self.map_unit(&u)
            })
            .collect()
    }
}

/// How a scalar field obtains its derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    ExpressionAst,
    FiniteDifference,
}

type JetFn = dyn Fn(&[Jet]) -> Jet + Send + Sync;
type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

enum ScalarKind {
    Constant(f64),
    Closed(Box<JetFn>),
    Expression { expr: Expr, d1: Vec<Expr>, d2: Vec<Vec<Expr>> },
    Numeric(Box<ValueFn>),
}

/// A smooth real function of `dim` variables.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    kind: Arc<ScalarKind>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.kind {
            ScalarKind::Constant(c) => write!(f, "ScalarField::Constant({c})"),
            ScalarKind::Closed(_) => write!(f, "ScalarField::ClosedForm(dim={})", self.dim),
            ScalarKind::Expression { expr, .. } => write!(f, "ScalarField::Expression({expr})"),
            ScalarKind::Numeric(_) => write!(f, "ScalarField::FiniteDifference(dim={})", self.dim),
        }
    }
}

impl ScalarField {
    pub fn constant(dim: usize, c: f64) -> ScalarField {
        ScalarField { dim, kind: Arc::new(ScalarKind::Constant(c)) }
    }

    /// The coordinate function `x_i`.
    pub fn coordinate(dim: usize, i: usize) -> ScalarField {
        ScalarField::closed(dim, move |x| x[i])
    }

    /// A closed-form field written directly on jets; derivatives are exact.
    pub fn closed(dim: usize, f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> ScalarField {
        ScalarField { dim, kind: Arc::new(ScalarKind::Closed(Box::new(f))) }
    }

    /// A value-only field; derivatives come from central differences.
    pub fn numeric(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> ScalarField {
        ScalarField { dim, kind: Arc::new(ScalarKind::Numeric(Box::new(f))) }
    }

    pub fn from_expr(expr: Expr, dim: usize) -> ScalarField {
        let d1: Vec<Expr> = (0..dim).map(|i| expr.derivative(i)).collect();
        let d2 = (0..dim).map(|i| (0..dim).map(|j| d1[i.min(j)].derivative(i.max(j))).collect()).collect();
        ScalarField { dim, kind: Arc::new(ScalarKind::Expression { expr, d1, d2 }) }
    }

    /// Parses `text` over the given variable names.
    pub fn parse(text: &str, names: &[&str]) -> std::result::Result<ScalarField, ExprError> {
        Ok(ScalarField::from_expr(expr::parse(text, names)?, names.len()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> Provenance {
        match &*self.kind {
            ScalarKind::Constant(_) | ScalarKind::Closed(_) => Provenance::ClosedForm,
            ScalarKind::Expression { .. } => Provenance::ExpressionAst,
            ScalarKind::Numeric(_) => Provenance::FiniteDifference,
        }
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &*self.kind {
            ScalarKind::Expression { expr, .. } => Some(expr),
            _ => None,
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match &*self.kind {
            ScalarKind::Constant(c) => Some(*c),
            ScalarKind::Expression { expr, .. } => expr.is_const(),
            _ => None,
        }
    }

    /// Evaluates on jets: the result carries derivatives with respect to
    /// whatever variables the input jets are seeded in.
    pub fn jet(&self, x: &[Jet]) -> Jet {
        debug_assert_eq!(x.len(), self.dim);
        match &*self.kind {
            ScalarKind::Constant(c) => Jet::constant(*c),
            ScalarKind::Closed(f) => f(x),
            ScalarKind::Expression { expr, .. } => expr.eval_jet(x),
            ScalarKind::Numeric(f) => {
                let order = x.iter().map(Jet::order).max().unwrap_or(Order::Value);
                let p: Vec<f64> = x.iter().map(|j| j.v).collect();
                let v = f(&p);
                if order == Order::Value {
                    return Jet::constant(v);
                }
                let g = fd_gradient(f.as_ref(), &p);
                let h = if order == Order::Second { Some(fd_hessian(f.as_ref(), &p)) } else { None };
                compose(v, &g, h.as_deref(), x)
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &*self.kind {
            ScalarKind::Constant(c) => *c,
            ScalarKind::Expression { expr, .. } => expr.eval(x),
            ScalarKind::Numeric(f) => f(x),
            ScalarKind::Closed(_) => self.jet(&Jet::vars(x, Order::Value)).v,
        }
    }

    pub fn d1(&self, x: &[f64]) -> Vec<f64> {
        match &*self.kind {
            ScalarKind::Expression { d1, .. } => d1.iter().map(|e| e.eval(x)).collect(),
            _ => self.jet(&Jet::vars(x, Order::First)).grad(self.dim),
        }
    }

    /// Second partials; symmetric by construction.
    pub fn d2(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match &*self.kind {
            ScalarKind::Expression { d2, .. } => d2.iter().map(|r| r.iter().map(|e| e.eval(x)).collect()).collect(),
            _ => self.jet(&Jet::vars(x, Order::Second)).hessian(self.dim),
        }
    }

    /// Rejects expressions whose `abs` arguments change sign (or touch 0) on
    /// the sampled box, where the symbolic derivative would be meaningless.
    pub fn check_abs(&self, chart: &Chart, samples: usize) -> std::result::Result<(), ExprError> {
        let Some(e) = self.expr() else { return Ok(()) };
        let args = e.abs_arguments();
        if args.is_empty() {
            return Ok(());
        }
        let pts = chart.halton(samples, 0);
        for a in args {
            let mut sign = 0.0;
            for p in &pts {
                let v = a.eval(p);
                if v == 0.0 || (sign != 0.0 && v.signum() != sign) {
                    return Err(ExprError::AbsAtZero);
                }
                sign = v.signum();
            }
        }
        Ok(())
    }

    /// Rebases a field of `k` block variables onto a larger coordinate system:
    /// block variable `a` is global coordinate `vars[a]`.
    pub fn lift(&self, dim: usize, vars: Vec<usize>) -> ScalarField {
        assert_eq!(vars.len(), self.dim);
        if let Some(c) = self.as_constant() {
            return ScalarField::constant(dim, c);
        }
        let inner = self.clone();
        ScalarField::closed(dim, move |x| {
            let sub: Vec<Jet> = vars.iter().map(|&i| x[i]).collect();
            inner.jet(&sub)
        })
    }
}

/// Multivariate chain rule: the function with value `v`, gradient `grad` and
/// Hessian `hess` at the values of `inputs`, composed with the input jets.
pub fn compose(v: f64, grad: &[f64], hess: Option<&[Vec<f64>]>, inputs: &[Jet]) -> Jet {
    let order = inputs.iter().map(Jet::order).max().unwrap_or(Order::Value);
    if order == Order::Value {
        return Jet::constant(v);
    }
    let mut d = [0.0; MAX_DIM];
    for (gi, xi) in grad.iter().zip(inputs) {
        for (k, dk) in d.iter_mut().enumerate() {
            *dk += gi * xi.d(k);
        }
    }
    if order == Order::First {
        return Jet::from_parts(v, &d, None);
    }
    let mut h = vec![vec![0.0; MAX_DIM]; MAX_DIM];
    for k in 0..MAX_DIM {
        for l in k..MAX_DIM {
            let mut s = 0.0;
            for (i, xi) in inputs.iter().enumerate() {
                s += grad[i] * xi.h(k, l);
                if let Some(hs) = hess {
                    for (j, xj) in inputs.iter().enumerate() {
                        s += hs[i][j] * xi.d(k) * xj.d(l);
                    }
                }
            }
            h[k][l] = s;
            h[l][k] = s;
        }
    }
    Jet::from_parts(v, &d, Some(&h))
}

fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h0 = f64::EPSILON.cbrt();
    (0..x.len())
        .map(|i| {
            let h = h0 * x[i].abs().max(1.0);
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (a[i] - b[i])
        })
        .collect()
}

fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<Vec<f64>> {
    let h0 = f64::EPSILON.powf(0.25);
    let n = x.len();
    let step: Vec<f64> = x.iter().map(|v| h0 * v.abs().max(1.0)).collect();
    let at = |di: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(i, s) in di {
            p[i] += s;
        }
        f(&p)
    };
    let f0 = f(x);
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        let hi = step[i];
        out[i][i] = (at(&[(i, hi)]) - 2.0 * f0 + at(&[(i, -hi)])) / (hi * hi);
        for j in 0..i {
            let hj = step[j];
            let v = (at(&[(i, hi), (j, hj)]) - at(&[(i, hi), (j, -hj)]) - at(&[(i, -hi), (j, hj)])
                + at(&[(i, -hi), (j, -hj)]))
                / (4.0 * hi * hj);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

type MatFn = dyn Fn(&[Jet]) -> SqMat<Jet> + Send + Sync;

/// A square-matrix-valued function of `dim` variables, not tied to a chart.
/// Used for block metrics, bases of warped products and composite tensors.
#[derive(Clone)]
pub struct MatrixField {
    dim: usize,
    size: usize,
    max_order: Order,
    f: Arc<MatFn>,
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixField({}x{} on {} variables)", self.size, self.size, self.dim)
    }
}

impl MatrixField {
    pub fn new(dim: usize, size: usize, f: impl Fn(&[Jet]) -> SqMat<Jet> + Send + Sync + 'static) -> MatrixField {
        MatrixField { dim, size, max_order: Order::Second, f: Arc::new(f) }
    }

    /// Same as [`MatrixField::new`] for fields whose derivatives are only
    /// available up to `max_order`.
    pub fn with_order(
        dim: usize,
        size: usize,
        max_order: Order,
        f: impl Fn(&[Jet]) -> SqMat<Jet> + Send + Sync + 'static,
    ) -> MatrixField {
        MatrixField { dim, size, max_order, f: Arc::new(f) }
    }

    /// Row-major `size × size` entries.
    pub fn from_entries(dim: usize, entries: Vec<ScalarField>) -> MatrixField {
        let size = (entries.len() as f64).sqrt().round() as usize;
        assert_eq!(size * size, entries.len(), "entry count is not a square");
        MatrixField::new(dim, size, move |x| SqMat::from_fn(size, |i, j| entries[i * size + j].jet(x)))
    }

    /// Symmetric matrix from its upper triangle, row-major.
    pub fn symmetric(dim: usize, upper: Vec<ScalarField>) -> MatrixField {
        let m = upper.len();
        let size = ((((8 * m + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
        assert_eq!(size * (size + 1) / 2, m, "entry count is not triangular");
        MatrixField::new(dim, size, move |x| {
            let mut out = SqMat::zeros(size);
            let mut k = 0;
            for i in 0..size {
                for j in i..size {
                    let v = upper[k].jet(x);
                    out[(i, j)] = v;
                    out[(j, i)] = v;
                    k += 1;
                }
            }
            out
        })
    }

    pub fn diagonal(dim: usize, diag: Vec<ScalarField>) -> MatrixField {
        let size = diag.len();
        MatrixField::new(dim, size, move |x| {
            let d: Vec<Jet> = diag.iter().map(|s| s.jet(x)).collect();
            SqMat::diag(&d)
        })
    }

    /// `c(x)·Id`.
    pub fn conformal(size: usize, factor: ScalarField) -> MatrixField {
        let dim = factor.dim();
        MatrixField::new(dim, size, move |x| SqMat::scalar(size, factor.jet(x)))
    }

    pub fn constant(dim: usize, m: SqMat<f64>) -> MatrixField {
        let size = m.dim();
        MatrixField::new(dim, size, move |_| m.map(|v| Jet::constant(*v)))
    }

    pub fn identity(dim: usize, size: usize) -> MatrixField {
        MatrixField::constant(dim, SqMat::identity(size))
    }

    /// A value-only matrix field; every entry gets central-difference derivatives.
    pub fn numeric(dim: usize, size: usize, f: impl Fn(&[f64]) -> SqMat<f64> + Send + Sync + 'static) -> MatrixField {
        let f: Arc<dyn Fn(&[f64]) -> SqMat<f64> + Send + Sync> = Arc::new(f);
        MatrixField::new(dim, size, move |x| {
            let p: Vec<f64> = x.iter().map(|j| j.v).collect();
            let order = x.iter().map(Jet::order).max().unwrap_or(Order::Value);
            let v = f(&p);
            if order == Order::Value {
                return v.map(|e| Jet::constant(*e));
            }
            let mut out = SqMat::zeros(size);
            for i in 0..size {
                for j in 0..size {
                    let fe = |q: &[f64]| f(q)[(i, j)];
                    let g = fd_gradient(&fe, &p);
                    let h = if order == Order::Second { Some(fd_hessian(&fe, &p)) } else { None };
                    out[(i, j)] = compose(v[(i, j)], &g, h.as_deref(), x);
                }
            }
            out
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn max_order(&self) -> Order {
        self.max_order
    }

    pub fn jets(&self, x: &[Jet]) -> SqMat<Jet> {
        (self.f)(x)
    }

    pub fn value(&self, x: &[f64]) -> SqMat<f64> {
        self.jets(&Jet::vars(x, Order::Value)).values()
    }

    pub fn at(&self, x: &[f64], order: Order) -> Result<SqMat<Jet>> {
        if order > self.max_order {
            return Err(GeomError::DerivativeUnavailable { requested: order.as_u8(), available: self.max_order.as_u8() });
        }
        let m = self.jets(&Jet::vars(x, order));
        if !m.all_finite() {
            return Err(GeomError::FieldEvaluation { point: x.to_vec() });
        }
        Ok(m)
    }

    /// Re-expresses the field on a larger coordinate system (see [`ScalarField::lift`]).
    pub fn lift(&self, dim: usize, vars: Vec<usize>) -> MatrixField {
        assert_eq!(vars.len(), self.dim);
        let inner = self.clone();
        MatrixField::with_order(dim, self.size, self.max_order, move |x| {
            let sub: Vec<Jet> = vars.iter().map(|&i| x[i]).collect();
            inner.jets(&sub)
        })
    }
}

/// Smallest eigenvalue of a metric over a sample, with the worst point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefinitenessReport {
    pub samples: usize,
    pub min_eigenvalue: f64,
    pub worst_point: Vec<f64>,
    pub threshold: f64,
    pub positive_definite: bool,
}

/// A Riemannian metric `g_ij(x)` on a chart.
#[derive(Clone, Debug)]
pub struct MetricField {
    chart: Chart,
    field: MatrixField,
}

impl MetricField {
    pub fn new(chart: Chart, field: MatrixField) -> Result<MetricField> {
        if field.dim() != chart.dim() || field.size() != chart.dim() {
            return Err(GeomError::DimensionMismatch { expected: chart.dim(), got: field.size() });
        }
        Ok(MetricField { chart, field })
    }

    pub fn from_fn(chart: Chart, f: impl Fn(&[Jet]) -> SqMat<Jet> + Send + Sync + 'static) -> MetricField {
        let n = chart.dim();
        MetricField { chart, field: MatrixField::new(n, n, f) }
    }

    /// Parses the upper triangle (row-major) of `g` over the chart's coordinate names.
    pub fn parse(chart: Chart, upper: &[&str]) -> std::result::Result<MetricField, ExprError> {
        let names = chart.names();
        let fields = upper.iter().map(|t| ScalarField::parse(t, &names)).collect::<std::result::Result<Vec<_>, _>>()?;
        for f in &fields {
            f.check_abs(&chart, 2000)?;
        }
        let n = chart.dim();
        if n * (n + 1) / 2 != fields.len() {
            return Err(ExprError::Arity { name: "metric".into(), expected: n * (n + 1) / 2, got: fields.len() });
        }
        Ok(MetricField { chart, field: MatrixField::symmetric(n, fields) })
    }

    pub fn conformal(chart: Chart, factor: ScalarField) -> MetricField {
        let n = chart.dim();
        MetricField { chart, field: MatrixField::conformal(n, factor) }
    }

    pub fn euclidean(chart: Chart) -> MetricField {
        let n = chart.dim();
        MetricField { chart, field: MatrixField::identity(n, n) }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn field(&self) -> &MatrixField {
        &self.field
    }

    /// Restricts to a smaller (or different) box.
    pub fn with_chart(&self, chart: Chart) -> Result<MetricField> {
        MetricField::new(chart, self.field.clone())
    }

    pub fn at(&self, x: &[f64], order: Order) -> Result<SqMat<Jet>> {
        self.chart.check(x)?;
        Ok(self.field.at(x, order)?.symmetrize())
    }

    pub fn g(&self, x: &[f64]) -> Result<SqMat<f64>> {
        Ok(self.at(x, Order::Value)?.values())
    }

    pub fn jets(&self, x: &[Jet]) -> SqMat<Jet> {
        self.field.jets(x)
    }

    /// Samples `count` Halton points and reports the smallest eigenvalue.
    pub fn definiteness(&self, count: usize, eps_pd: f64) -> Result<DefinitenessReport> {
        let pts = self.chart.halton(count, 0);
        let mut worst = (f64::INFINITY, vec![]);
        for p in pts {
            let g = self.g(&p)?;
            let lo = symmetric_eigenvalues(&g)[0];
            if lo < worst.0 {
                worst = (lo, p);
            }
        }
        Ok(DefinitenessReport {
            samples: count,
            min_eigenvalue: worst.0,
            worst_point: worst.1,
            threshold: eps_pd,
            positive_definite: worst.0 > eps_pd,
        })
    }

    /// `Ok` when the sampled smallest eigenvalue exceeds `eps_pd`.
    pub fn check_positive(&self, count: usize, eps_pd: f64) -> Result<()> {
        let r = self.definiteness(count, eps_pd)?;
        if r.positive_definite {
            Ok(())
        } else {
            Err(GeomError::NotPositiveDefinite { point: r.worst_point, min_eigenvalue: r.min_eigenvalue })
        }
    }
}

/// A (1,1)-tensor field `L^i_j(x)` on a chart.
#[derive(Clone, Debug)]
pub struct EndomorphismField {
    chart: Chart,
    field: MatrixField,
}

impl EndomorphismField {
    pub fn new(chart: Chart, field: MatrixField) -> Result<EndomorphismField> {
        if field.dim() != chart.dim() || field.size() != chart.dim() {
            return Err(GeomError::DimensionMismatch { expected: chart.dim(), got: field.size() });
        }
        Ok(EndomorphismField { chart, field })
    }

    pub fn from_fn(chart: Chart, f: impl Fn(&[Jet]) -> SqMat<Jet> + Send + Sync + 'static) -> EndomorphismField {
        let n = chart.dim();
        EndomorphismField { chart, field: MatrixField::new(n, n, f) }
    }

    /// Parses all `n²` entries, row-major.
    pub fn parse(chart: Chart, entries: &[&str]) -> std::result::Result<EndomorphismField, ExprError> {
        let names = chart.names();
        let n = chart.dim();
        if entries.len() != n * n {
            return Err(ExprError::Arity { name: "endomorphism".into(), expected: n * n, got: entries.len() });
        }
        let fields = entries.iter().map(|t| ScalarField::parse(t, &names)).collect::<std::result::Result<Vec<_>, _>>()?;
        for f in &fields {
            f.check_abs(&chart, 2000)?;
        }
        Ok(EndomorphismField { chart, field: MatrixField::from_entries(n, fields) })
    }

    pub fn identity(chart: Chart) -> EndomorphismField {
        let n = chart.dim();
        EndomorphismField { chart, field: MatrixField::identity(n, n) }
    }

    pub fn diagonal(chart: Chart, diag: Vec<ScalarField>) -> EndomorphismField {
        let n = chart.dim();
        EndomorphismField { chart, field: MatrixField::diagonal(n, diag) }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn field(&self) -> &MatrixField {
        &self.field
    }

    pub fn at(&self, x: &[f64], order: Order) -> Result<SqMat<Jet>> {
        self.chart.check(x)?;
        self.field.at(x, order)
    }

    pub fn l(&self, x: &[f64]) -> Result<SqMat<f64>> {
        Ok(self.at(x, Order::Value)?.values())
    }

    pub fn jets(&self, x: &[Jet]) -> SqMat<Jet> {
        self.field.jets(x)
    }

    pub fn max_order(&self) -> Order {
        self.field.max_order()
    }
}

/// A vector field `v^i(x)`.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    f: Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField(dim={})", self.dim)
    }
}

impl VectorField {
    pub fn new(dim: usize, f: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static) -> VectorField {
        VectorField { dim, f: Arc::new(f) }
    }

    pub fn from_components(comps: Vec<ScalarField>) -> VectorField {
        let dim = comps.len();
        VectorField::new(dim, move |x| comps.iter().map(|c| c.jet(x)).collect())
    }

    pub fn parse(texts: &[&str], names: &[&str]) -> std::result::Result<VectorField, ExprError> {
        if texts.len() != names.len() {
            return Err(ExprError::Arity { name: "vector field".into(), expected: names.len(), got: texts.len() });
        }
        let comps = texts.iter().map(|t| ScalarField::parse(t, names)).collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(VectorField::from_components(comps))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jets(&self, x: &[Jet]) -> Vec<Jet> {
        (self.f)(x)
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        self.jets(&Jet::vars(x, Order::Value)).iter().map(|j| j.v).collect()
    }
}

/// A point of the cotangent bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> PhaseState {
        PhaseState { x, p }
    }

    /// State from a velocity: `p = g v`.
    pub fn from_velocity(g: &MetricField, x: Vec<f64>, v: &[f64]) -> Result<PhaseState> {
        let p = g.g(&x)?.matvec(v);
        Ok(PhaseState { x, p })
    }

    /// Velocity `v = g⁻¹ p`.
    pub fn velocity(&self, g: &MetricField) -> Result<Vec<f64>> {
        Ok(g.g(&self.x)?.inverse()?.matvec(&self.p))
    }

    /// `H = ½ g^{ij} p_i p_j`.
    pub fn energy(&self, g: &MetricField) -> Result<f64> {
        let v = self.velocity(g)?;
        Ok(0.5 * v.iter().zip(&self.p).map(|(a, b)| a * b).sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_rejects_bad_input() {
        assert!(Chart::boxed(&[(0.0, 1.0)]).is_err());
        assert!(Chart::boxed(&[(0.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(Chart::new(vec![(0.0, 1.0); 2], vec!["x".into(), "x".into()]).is_err());
        let c = Chart::cube(3, -1.0, 1.0).unwrap();
        assert!(c.contains(&[0.0, 0.5, -0.99]));
        assert!(!c.contains(&[1.0, 0.0, 0.0]));
        assert!(c.halton(500, 3).iter().all(|p| c.contains(p)));
    }

    #[test]
    fn expression_derivatives_match_closed_form() {
        let f = ScalarField::parse("x^2*y + sin(x*y)", &["x", "y"]).unwrap();
        let (x, y) = (0.7, -1.3);
        let d1 = f.d1(&[x, y]);
        assert!((d1[0] - (2.0 * x * y + y * (x * y).cos())).abs() < 1e-14);
        assert!((d1[1] - (x * x + x * (x * y).cos())).abs() < 1e-14);
        let d2 = f.d2(&[x, y]);
        assert_eq!(d2[0][1], d2[1][0]);
        let jet = f.jet(&Jet::vars(&[x, y], Order::Second));
        assert!((jet.h(0, 1) - d2[0][1]).abs() < 1e-13);
    }

    #[test]
    fn finite_difference_fields_track_exact_ones() {
        let exact = ScalarField::closed(2, |x| (x[0] * x[1]).exp() + x[0].sin());
        let fd = ScalarField::numeric(2, |x| (x[0] * x[1]).exp() + x[0].sin());
        assert_eq!(fd.provenance(), Provenance::FiniteDifference);
        let p = [0.4, 0.9];
        for (a, b) in exact.d1(&p).iter().zip(fd.d1(&p)) {
            assert!((a - b).abs() < 1e-9);
        }
        for (ra, rb) in exact.d2(&p).iter().zip(fd.d2(&p)) {
            for (a, b) in ra.iter().zip(rb) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn abs_crossing_zero_is_rejected() {
        let c = Chart::cube(2, -1.0, 1.0).unwrap();
        let f = ScalarField::parse("abs(x) + 1", &["x1", "x2"]);
        assert!(f.is_err());
        let f = ScalarField::parse("abs(x1) + 1", &["x1", "x2"]).unwrap();
        assert_eq!(f.check_abs(&c, 200), Err(ExprError::AbsAtZero));
        let f = ScalarField::parse("abs(x1 + 3)", &["x1", "x2"]).unwrap();
        assert!(f.check_abs(&c, 200).is_ok());
    }

    #[test]
    fn lifted_fields_embed_derivatives() {
        let f = ScalarField::parse("t^3", &["t"]).unwrap();
        let lifted = f.lift(3, vec![2]);
        let j = lifted.jet(&Jet::vars(&[1.0, 2.0, 0.5], Order::Second));
        assert!((j.d(2) - 0.75).abs() < 1e-15);
        assert_eq!(j.d(0), 0.0);
        assert!((j.h(2, 2) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn metric_definiteness_report() {
        let c = Chart::cube(2, -2.0, 2.0).unwrap();
        let g = MetricField::parse(c.clone(), &["1", "0", "x1"]).unwrap();
        let r = g.definiteness(1000, 1e-10).unwrap();
        assert!(!r.positive_definite);
        assert!(r.worst_point[0] < 0.0);
        let e = MetricField::euclidean(c);
        assert!(e.check_positive(100, 1e-10).is_ok());
    }

    #[test]
    fn phase_state_energy() {
        let c = Chart::cube(2, -2.0, 2.0).unwrap();
        let g = MetricField::parse(c, &["2", "0", "8"]).unwrap();
        let s = PhaseState::new(vec![0.0, 0.0], vec![2.0, 4.0]);
        assert!((s.energy(&g).unwrap() - 2.0).abs() < 1e-15);
    }
}
