//! Surfaces: the quadratic integral of a pair, the principal form of a
//! quadratic integral in conformal coordinates `z = x + iy`, model
//! classification and flattening coordinates, Liouville metrics and the
//! built-in examples.
//!
//! Momenta are combined as `p = p_x − i·p_y`, so an integral reads
//! `I = a(z)p² + b(z)|p|² + ā(z)p̄²`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::field::{Chart, MatrixField, MetricField, PhaseState, ScalarField, VectorField};
use crate::integrable::MomentumQuadratic;
use crate::jet::{Jet, Order};
use crate::linalg::{symmetric_eigenvalues, SqMat};
use crate::projective::{lie_derivative_jets, MetricPair};

const FIT_SAMPLES: usize = 64;

/// `I = (det g / det ḡ)^{2/3} ḡ(ξ, ξ)` with `ξ = g⁻¹p`.
pub fn integral_from_pair2d(pair: &MetricPair) -> Result<MomentumQuadratic> {
    if pair.dim() != 2 {
        return Err(GeomError::WrongDimension { expected: 2, got: pair.dim() });
    }
    let (g, gbar) = (pair.g.clone(), pair.gbar.clone());
    let k = MatrixField::new(2, 2, move |x| {
        let gj = g.jets(x).symmetrize();
        let bj = gbar.jets(x).symmetrize();
        let Ok(gi) = gj.inverse() else { return SqMat::scalar(2, Jet::constant(f64::NAN)) };
        let c = (gj.det() / bj.det()).abs().powf(2.0 / 3.0);
        gi.matmul(&bj).matmul(&gi).scale(c)
    });
    Ok(MomentumQuadratic::new("I", pair.chart().clone(), k))
}

/// Coefficient fields of a quadratic integral on a surface chart.
#[derive(Clone, Debug)]
pub struct QuadraticIntegral2D {
    pub name: String,
    chart: Chart,
    pub re_a: ScalarField,
    pub im_a: ScalarField,
    pub b: ScalarField,
}

impl QuadraticIntegral2D {
    pub fn new(name: impl Into<String>, chart: Chart, re_a: ScalarField, im_a: ScalarField, b: ScalarField) -> Result<Self> {
        if chart.dim() != 2 {
            return Err(GeomError::WrongDimension { expected: 2, got: chart.dim() });
        }
        for f in [&re_a, &im_a, &b] {
            if f.dim() != 2 {
                return Err(GeomError::DimensionMismatch { expected: 2, got: f.dim() });
            }
        }
        Ok(QuadraticIntegral2D { name: name.into(), chart, re_a, im_a, b })
    }

    /// From `pᵀKp`: `Re a = (K₁₁ − K₂₂)/4`, `Im a = K₁₂/2`, `b = (K₁₁ + K₂₂)/2`.
    pub fn from_quadratic(q: &MomentumQuadratic) -> Result<Self> {
        let dim = q.chart().dim();
        if dim != 2 {
            return Err(GeomError::WrongDimension { expected: 2, got: dim });
        }
        let (q1, q2, q3) = (q.clone(), q.clone(), q.clone());
        QuadraticIntegral2D::new(
            q.name.clone(),
            q.chart().clone(),
            ScalarField::closed(2, move |x| {
                let k = q1.jets(x);
                (k[(0, 0)] - k[(1, 1)]) * 0.25
            }),
            ScalarField::closed(2, move |x| q2.jets(x)[(0, 1)] * 0.5),
            ScalarField::closed(2, move |x| {
                let k = q3.jets(x);
                (k[(0, 0)] + k[(1, 1)]) * 0.5
            }),
        )
    }

    /// An integral with `a(z) = −(αz² + βz + γ)` and the given `b`.
    pub fn from_polynomial(chart: Chart, alpha: Complex64, beta: Complex64, gamma: Complex64, b: ScalarField) -> Result<Self> {
        let poly = move |x: &[Jet]| {
            let (zr2, zi2) = (x[0] * x[0] - x[1] * x[1], x[0] * x[1] * 2.0);
            let re = zr2 * alpha.re - zi2 * alpha.im + x[0] * beta.re - x[1] * beta.im + gamma.re;
            let im = zr2 * alpha.im + zi2 * alpha.re + x[0] * beta.im + x[1] * beta.re + gamma.im;
            (-re, -im)
        };
        QuadraticIntegral2D::new(
            "polynomial",
            chart,
            ScalarField::closed(2, move |x| poly(x).0),
            ScalarField::closed(2, move |x| poly(x).1),
            b,
        )
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn a(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re_a.eval(x), self.im_a.eval(x))
    }

    pub fn to_quadratic(&self) -> MomentumQuadratic {
        let (ra, ia, b) = (self.re_a.clone(), self.im_a.clone(), self.b.clone());
        let k = MatrixField::new(2, 2, move |x| {
            let (r, i, b) = (ra.jet(x), ia.jet(x), b.jet(x));
            SqMat::from_fn(2, |p, q| match (p, q) {
                (0, 0) => b + r * 2.0,
                (1, 1) => b - r * 2.0,
                _ => i * 2.0,
            })
        });
        MomentumQuadratic::new(self.name.clone(), self.chart.clone(), k)
    }

    pub fn value(&self, s: &PhaseState) -> Result<f64> {
        self.chart.check(&s.x)?;
        let p = Complex64::new(s.p[0], -s.p[1]);
        let a = self.a(&s.x);
        Ok((a * p * p).re * 2.0 + self.b.eval(&s.x) * p.norm_sqr())
    }
}

/// `a(z) = −(αz² + βz + γ)`, fitted over sample points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrincipalForm {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    /// `max(|α|ρ², |β|ρ, |γ|)` with `ρ = max(1, max |z|)` over the sample.
    pub scale: f64,
    pub radius: f64,
    /// `max |fit − a| / max |a|` over the sample.
    pub residual: f64,
    pub samples: usize,
}

impl PrincipalForm {
    pub fn from_coefficients(alpha: Complex64, beta: Complex64, gamma: Complex64, radius: f64) -> Result<PrincipalForm> {
        let r = radius.max(1.0);
        let scale = (alpha.norm() * r * r).max(beta.norm() * r).max(gamma.norm());
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(GeomError::EnergyProportional);
        }
        Ok(PrincipalForm { alpha, beta, gamma, scale, radius: r, residual: 0.0, samples: 0 })
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (self.alpha * z + self.beta) * z + self.gamma
    }

    /// Coefficients divided by `scale`.
    pub fn normalized(&self) -> [Complex64; 3] {
        [self.alpha / self.scale, self.beta / self.scale, self.gamma / self.scale]
    }
}

/// Fits `a(z)` on `FIT_SAMPLES` Halton points of the chart.
pub fn principal_form(integral: &QuadraticIntegral2D, fit_tol: f64) -> Result<PrincipalForm> {
    let pts = integral.chart().halton(FIT_SAMPLES, 0);
    let zs: Vec<Complex64> = pts.iter().map(|x| Complex64::new(x[0], x[1])).collect();
    let avals: Vec<Complex64> = pts.iter().map(|x| integral.a(x)).collect();
    let amax = avals.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let bmax = pts.iter().map(|x| integral.b.eval(x).abs()).fold(0.0, f64::max);
    if avals.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(GeomError::FieldEvaluation { point: pts[0].clone() });
    }
    if amax <= fit_tol * bmax || amax == 0.0 {
        return Err(GeomError::EnergyProportional);
    }
    // fit in u = (z − c)/ρ for conditioning, then expand back
    let c = zs.iter().sum::<Complex64>() / zs.len() as f64;
    let rho = zs.iter().map(|z| (z - c).norm()).fold(0.0, f64::max).max(1e-300);
    let m = DMatrix::from_fn(zs.len(), 3, |i, j| {
        let u = (zs[i] - c) / rho;
        match j {
            0 => u * u,
            1 => u,
            _ => Complex64::new(1.0, 0.0),
        }
    });
    let rhs = DVector::from_iterator(zs.len(), avals.iter().map(|a| -a));
    let sol = m.svd(true, true).solve(&rhs, 1e-14).map_err(|_| GeomError::SingularMatrix)?;
    let (ua, ub, uc) = (sol[0], sol[1], sol[2]);
    let alpha = ua / (rho * rho);
    let beta = ub / rho - alpha * c * 2.0;
    let gamma = ua * (c / rho) * (c / rho) - ub * (c / rho) + uc;
    let radius = zs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut pf = PrincipalForm::from_coefficients(alpha, beta, gamma, radius)?;
    let residual = zs.iter().zip(&avals).map(|(z, a)| (pf.eval(*z) + a).norm()).fold(0.0, f64::max) / amax;
    pf.residual = residual;
    pf.samples = zs.len();
    if !(residual <= fit_tol) {
        return Err(GeomError::NotPolynomial { residual, tolerance: fit_tol });
    }
    Ok(pf)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelTag {
    Model1a,
    Model1b,
    Model2,
    Model3,
    Model4,
}

impl ModelTag {
    pub fn flattening(self) -> &'static str {
        match self {
            ModelTag::Model1a | ModelTag::Model1b => "w = z/sqrt(gamma)",
            ModelTag::Model2 => "w = 2*sqrt(z + gamma/beta)/sqrt(beta)",
            ModelTag::Model3 => "w = i*asin((2z - r1 - r2)/(r2 - r1))/sqrt(alpha)",
            ModelTag::Model4 => "w = log(z - r)/sqrt(alpha)",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelClass {
    pub tag: ModelTag,
    pub roots: Vec<Complex64>,
    pub flattening: String,
    pub form: PrincipalForm,
}

/// Decides the model from the root structure of `αz² + βz + γ`. A
/// coefficient counts as zero below `tau_root·scale` (after weighting by the
/// chart radius), and two roots coincide when `|r₁ − r₂| ≤ tau_root·(1 + |r₁| + |r₂|)`.
pub fn classify_model(pf: &PrincipalForm, has_linear_reduction: bool, tau_root: f64) -> ModelClass {
    let r = pf.radius;
    let zero = |v: f64| v <= tau_root * pf.scale;
    let (tag, roots) = if zero(pf.alpha.norm() * r * r) {
        if zero(pf.beta.norm() * r) {
            (if has_linear_reduction { ModelTag::Model1b } else { ModelTag::Model1a }, vec![])
        } else {
            (ModelTag::Model2, vec![-pf.gamma / pf.beta])
        }
    } else {
        let disc = (pf.beta * pf.beta - pf.alpha * pf.gamma * 4.0).sqrt();
        // pick the sign that avoids cancellation
        let q = if (pf.beta.conj() * disc).re >= 0.0 { -(pf.beta + disc) * 0.5 } else { -(pf.beta - disc) * 0.5 };
        let (r1, r2) = if q.norm() == 0.0 { (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)) } else { (q / pf.alpha, pf.gamma / q) };
        if (r1 - r2).norm() <= tau_root * (1.0 + r1.norm() + r2.norm()) {
            (ModelTag::Model4, vec![-pf.beta / (pf.alpha * 2.0)])
        } else {
            let (a, b) = if (r1.re, r1.im) <= (r2.re, r2.im) { (r1, r2) } else { (r2, r1) };
            (ModelTag::Model3, vec![a, b])
        }
    };
    ModelClass { tag, roots, flattening: tag.flattening().to_string(), form: pf.clone() }
}

fn near_cut(u: Complex64, margin: f64) -> bool {
    u.norm() < margin || (u.re < 0.0 && u.im.abs() < margin)
}

/// A coordinate `w(z)` with `A = dw⊗dw`, i.e. `w'(z)² (αz² + βz + γ) = 1`.
pub fn flatten_coordinates(mc: &ModelClass, z: Complex64, margin: f64) -> Result<Complex64> {
    let pf = &mc.form;
    let violation = || GeomError::BranchViolation { z: format!("{} + {}i", z.re, z.im), margin };
    match mc.tag {
        ModelTag::Model1a | ModelTag::Model1b => Ok(z / pf.gamma.sqrt()),
        ModelTag::Model2 => {
            let u = z + pf.gamma / pf.beta;
            if near_cut(u, margin) {
                return Err(violation());
            }
            Ok(u.sqrt() * 2.0 / pf.beta.sqrt())
        }
        ModelTag::Model3 => {
            let (r1, r2) = (mc.roots[0], mc.roots[1]);
            let zeta = (z * 2.0 - r1 - r2) / (r2 - r1);
            let one = Complex64::new(1.0, 0.0);
            if (zeta - one).norm() < margin || (zeta + one).norm() < margin || (zeta.re.abs() > 1.0 && zeta.im.abs() < margin) {
                return Err(violation());
            }
            Ok(Complex64::i() * zeta.asin() / pf.alpha.sqrt())
        }
        ModelTag::Model4 => {
            let u = z - mc.roots[0];
            if near_cut(u, margin) {
                return Err(violation());
            }
            Ok(u.ln() / pf.alpha.sqrt())
        }
    }
}

/// Liouville data `(X(x) − Y(y))(dx² + dy²)`; `X` and `Y` are one-variable fields.
#[derive(Clone, Debug)]
pub struct LiouvilleData {
    pub chart: Chart,
    pub x_fn: ScalarField,
    pub y_fn: ScalarField,
    /// Enforce `X > 0`, `Y > 0` on the sample so that the partner is a metric.
    pub require_partner: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointDefiniteness {
    pub point: Vec<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub positive_definite: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartnerDefiniteness {
    pub samples: usize,
    pub positive_points: usize,
    pub min_eigenvalue: f64,
    pub worst_point: Vec<f64>,
    pub positive_definite_everywhere: bool,
    pub points: Vec<PointDefiniteness>,
}

pub fn partner_definiteness(gbar: &MetricField, samples: usize, eps_pd: f64) -> Result<PartnerDefiniteness> {
    let mut points = Vec::with_capacity(samples);
    for x in gbar.chart().halton(samples, 0) {
        let ev = symmetric_eigenvalues(&gbar.g(&x)?);
        points.push(PointDefiniteness { min_eigenvalue: ev[0], max_eigenvalue: ev[1], positive_definite: ev[0] > eps_pd, point: x });
    }
    let worst = points.iter().min_by(|a, b| a.min_eigenvalue.total_cmp(&b.min_eigenvalue)).expect("nonempty sample");
    let positive_points = points.iter().filter(|p| p.positive_definite).count();
    Ok(PartnerDefiniteness {
        samples,
        positive_points,
        min_eigenvalue: worst.min_eigenvalue,
        worst_point: worst.point.clone(),
        positive_definite_everywhere: positive_points == samples,
        points,
    })
}

/// Least-squares fit `I_pair ≈ c_displayed·I_displayed + c_energy·H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleFit {
    pub c_displayed: f64,
    pub c_energy: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct LiouvilleBundle {
    pub g: MetricField,
    pub gbar: MetricField,
    /// The integral of the pair.
    pub integral: MomentumQuadratic,
    /// `(Y p_x² + X p_y²)/(X − Y)`.
    pub displayed: MomentumQuadratic,
    pub fit: LiouvilleFit,
    pub definiteness: PartnerDefiniteness,
}

const LIOUVILLE_SAMPLES: usize = 400;

/// `g = (X − Y)(dx² + dy²)`, `ḡ = (1/Y − 1/X)(dx²/X + dy²/Y)`.
pub fn liouville_build(data: &LiouvilleData, margin: f64) -> Result<LiouvilleBundle> {
    if data.chart.dim() != 2 {
        return Err(GeomError::WrongDimension { expected: 2, got: data.chart.dim() });
    }
    if data.x_fn.dim() != 1 || data.y_fn.dim() != 1 {
        return Err(GeomError::InvalidSpec("X and Y must be functions of one variable".into()));
    }
    for x in data.chart.halton(LIOUVILLE_SAMPLES, 0) {
        let (xv, yv) = (data.x_fn.eval(&x[..1]), data.y_fn.eval(&x[1..]));
        if !(xv - yv > margin) {
            return Err(GeomError::DomainViolation { point: x, what: format!("X − Y = {} ≤ {margin}", xv - yv) });
        }
        if data.require_partner && !(xv > margin && yv > margin) {
            return Err(GeomError::DomainViolation { point: x, what: format!("partner needs X, Y > {margin}; X = {xv}, Y = {yv}") });
        }
    }
    let (xf, yf) = (data.x_fn.clone(), data.y_fn.clone());
    let g = MetricField::from_fn(data.chart.clone(), move |x| {
        let d = xf.jet(&x[..1]) - yf.jet(&x[1..]);
        SqMat::diag(&[d, d])
    });
    let (xf, yf) = (data.x_fn.clone(), data.y_fn.clone());
    let gbar = MetricField::from_fn(data.chart.clone(), move |x| {
        let (xv, yv) = (xf.jet(&x[..1]), yf.jet(&x[1..]));
        let c = yv.recip() - xv.recip();
        SqMat::diag(&[c / xv, c / yv])
    });
    let (xf, yf) = (data.x_fn.clone(), data.y_fn.clone());
    let displayed = MomentumQuadratic::new(
        "liouville",
        data.chart.clone(),
        MatrixField::new(2, 2, move |x| {
            let (xv, yv) = (xf.jet(&x[..1]), yf.jet(&x[1..]));
            let d = (xv - yv).recip();
            SqMat::diag(&[yv * d, xv * d])
        }),
    );
    let integral = integral_from_pair2d(&MetricPair::new(g.clone(), gbar.clone())?)?;
    let energy = MomentumQuadratic::energy(&g);
    let fit = fit_combination(&integral, &[&displayed, &energy], &data.chart.halton(64, 3))?;
    let definiteness = partner_definiteness(&gbar, 200, 0.0)?;
    Ok(LiouvilleBundle {
        g,
        gbar,
        integral,
        displayed,
        fit: LiouvilleFit { c_displayed: fit.0[0], c_energy: fit.0[1], residual: fit.1 },
        definiteness,
    })
}

/// Least-squares coefficients of `target` in the span of `basis` over phase
/// points built from `points` and several momenta, with the relative max residual.
pub fn fit_combination(target: &MomentumQuadratic, basis: &[&MomentumQuadratic], points: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (i, x) in points.iter().enumerate() {
        for k in 0..3 {
            let ang = 0.7 * i as f64 + 2.1 * k as f64;
            let s = PhaseState::new(x.clone(), vec![ang.cos(), ang.sin()]);
            rhs.push(target.value(&s)?);
            rows.push(basis.iter().map(|q| q.value(&s)).collect::<Result<Vec<f64>>>()?);
        }
    }
    let m = DMatrix::from_fn(rows.len(), basis.len(), |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    let c = m.clone().svd(true, true).solve(&b, 1e-14).map_err(|_| GeomError::SingularMatrix)?;
    let scale = b.amax().max(f64::MIN_POSITIVE);
    let residual = (&m * &c - &b).amax() / scale;
    Ok((c.iter().copied().collect(), residual))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KillingReport {
    pub samples: usize,
    pub max_norm: f64,
    pub worst_point: Vec<f64>,
    pub threshold: f64,
    pub passed: bool,
}

/// Max Frobenius norm of `𝓛_v g` over Halton points.
pub fn killing_residual(g: &MetricField, v: &VectorField, samples: usize, threshold: f64) -> Result<KillingReport> {
    if v.dim() != g.dim() {
        return Err(GeomError::DimensionMismatch { expected: g.dim(), got: v.dim() });
    }
    let mut worst = (0.0_f64, Vec::new());
    for x in g.chart().halton(samples, 0) {
        let xs = Jet::vars(&x, Order::First);
        let lie = lie_derivative_jets(&g.jets(&xs).symmetrize(), &v.jets(&xs));
        let norm = lie.values().frobenius();
        if !norm.is_finite() {
            return Err(GeomError::FieldEvaluation { point: x });
        }
        if norm > worst.0 || worst.1.is_empty() {
            worst = (norm, x);
        }
    }
    Ok(KillingReport { samples, max_norm: worst.0, worst_point: worst.1, threshold, passed: worst.0 <= threshold })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub audit: String,
    pub pass: bool,
}

/// A named scenario: metric, optional partner, monitored integrals and the
/// audits it is expected to pass or fail.
#[derive(Clone, Debug)]
pub struct ExampleBundle {
    pub name: String,
    pub gamma: f64,
    pub metric: MetricField,
    pub partner: Option<MetricField>,
    pub integrals: Vec<MomentumQuadratic>,
    pub killing: Option<VectorField>,
    pub generator: Option<VectorField>,
    /// Isometry taking `metric` to `partner`, when there is one.
    pub swap: Option<fn(&[f64]) -> Vec<f64>>,
    pub expected: Vec<Expectation>,
}

pub const EXAMPLE_NAMES: [&str; 4] = ["example1", "example2", "torus", "sphere_beltrami"];

fn expect(items: &[(&str, bool)]) -> Vec<Expectation> {
    items.iter().map(|(a, p)| Expectation { audit: a.to_string(), pass: *p }).collect()
}

fn quadratic(name: &str, chart: &Chart, f: impl Fn(&[Jet]) -> [Jet; 3] + Send + Sync + 'static) -> MomentumQuadratic {
    MomentumQuadratic::new(
        name,
        chart.clone(),
        MatrixField::new(2, 2, move |x| {
            let [a, b, c] = f(x);
            SqMat::from_fn(2, |i, j| match (i, j) {
                (0, 0) => a,
                (1, 1) => c,
                _ => b,
            })
        }),
    )
}

/// `f = 3 + cos 2πt`, the torus example's profile.
pub fn torus_profile(t: Jet) -> Jet {
    (t * (2.0 * std::f64::consts::PI)).cos() + 3.0
}

pub fn torus_swap(x: &[f64]) -> Vec<f64> {
    vec![x[1], x[0]]
}

/// `min (f(x) − 1/f(y))` over Halton points, the conformal factor's margin.
pub fn torus_margin(chart: &Chart, samples: usize) -> f64 {
    chart
        .halton(samples, 0)
        .iter()
        .map(|x| torus_profile(Jet::constant(x[0])).v - 1.0 / torus_profile(Jet::constant(x[1])).v)
        .fold(f64::INFINITY, f64::min)
}

pub fn builtin_example(name: &str, gamma: f64) -> Result<ExampleBundle> {
    let chart = Chart::cube(2, -10.0, 10.0)?;
    let needs_gamma = || {
        if gamma > 0.0 {
            Ok(())
        } else {
            Err(GeomError::InvalidSpec(format!("{name} needs gamma > 0, got {gamma}")))
        }
    };
    match name {
        "example1" => {
            needs_gamma()?;
            let f = move |x: &[Jet]| x[0] * x[0] + x[1] * x[1] + gamma;
            let metric = MetricField::from_fn(chart.clone(), move |x| {
                let v = f(x);
                SqMat::diag(&[v, v])
            });
            let zero = Jet::constant(0.0);
            let integrals = vec![
                quadratic("H", &chart, move |x| {
                    let r = f(x).recip();
                    [r, zero, r]
                }),
                quadratic("F1", &chart, move |x| {
                    let r = f(x).recip();
                    [x[1] * x[1] * r, zero, -(x[0] * x[0] + gamma) * r]
                }),
                quadratic("F2", &chart, |x| [x[1] * x[1], -(x[0] * x[1]), x[0] * x[0]]),
                quadratic("F3", &chart, move |x| {
                    let d = x[0] * x[1] / f(x);
                    [d, Jet::constant(-0.5), d]
                }),
            ];
            let killing = VectorField::new(2, |x| vec![-x[1], x[0]]);
            Ok(ExampleBundle {
                name: name.into(),
                gamma,
                metric,
                partner: None,
                integrals,
                killing: Some(killing),
                generator: None,
                swap: None,
                expected: expect(&[("conservation", true), ("killing", true)]),
            })
        }
        "example2" => {
            needs_gamma()?;
            let f = move |x: &[Jet]| x[0] * x[0] + x[1] * x[1] * 0.25 + gamma;
            let metric = MetricField::from_fn(chart.clone(), move |x| {
                let v = f(x);
                SqMat::diag(&[v, v])
            });
            let zero = Jet::constant(0.0);
            let integrals = vec![
                quadratic("H", &chart, move |x| {
                    let r = f(x).recip();
                    [r, zero, r]
                }),
                quadratic("F1", &chart, move |x| {
                    let r = f(x).recip();
                    [x[1] * x[1] * 0.25 * r, zero, -(x[0] * x[0] + gamma) * r]
                }),
                quadratic("F2", &chart, move |x| {
                    let h = x[0] * x[1] * x[1] * 0.25 / f(x);
                    [h, x[1] * -0.5, h + x[0]]
                }),
            ];
            let killing = VectorField::new(2, |x| vec![-x[1], x[0]]);
            Ok(ExampleBundle {
                name: name.into(),
                gamma,
                metric,
                partner: None,
                integrals,
                killing: Some(killing),
                generator: None,
                swap: None,
                expected: expect(&[("conservation", true), ("killing", false)]),
            })
        }
        "torus" => {
            let g = MetricField::from_fn(chart.clone(), |x| {
                let (fx, fy) = (torus_profile(x[0]), torus_profile(x[1]));
                let c = fx - fy.recip();
                SqMat::diag(&[c * fx.sqrt(), c / fy.sqrt()])
            });
            let gbar = MetricField::from_fn(chart.clone(), |x| {
                let (fx, fy) = (torus_profile(x[0]), torus_profile(x[1]));
                let c = fy - fx.recip();
                SqMat::diag(&[c / fx.sqrt(), c * fy.sqrt()])
            });
            let integral = integral_from_pair2d(&MetricPair::new(g.clone(), gbar.clone())?)?;
            Ok(ExampleBundle {
                name: name.into(),
                gamma,
                integrals: vec![MomentumQuadratic::energy(&g), integral],
                metric: g,
                partner: Some(gbar),
                killing: None,
                generator: None,
                swap: Some(torus_swap),
                expected: expect(&[("conservation", true), ("bm_residual", true), ("partner_definite", true)]),
            })
        }
        "sphere_beltrami" => {
            let chart = Chart::new(vec![(0.2, std::f64::consts::PI - 0.2), (-3.0, 3.0)], vec!["theta".into(), "phi".into()])?;
            let metric = MetricField::from_fn(chart.clone(), |x| {
                let s = x[0].sin();
                SqMat::diag(&[Jet::constant(1.0), s * s])
            });
            let zero = Jet::constant(0.0);
            let angular = quadratic("p_phi^2", &chart, move |_| [zero, zero, Jet::constant(1.0)]);
            // projective, non-Killing: the Beltrami flow of diag(e^t, 1, 1) in (θ, φ)
            let generator = VectorField::new(2, |x| {
                let c = x[1].cos();
                vec![x[0].sin() * x[0].cos() * c * c, -(x[1].sin() * c)]
            });
            Ok(ExampleBundle {
                name: name.into(),
                gamma,
                integrals: vec![MomentumQuadratic::energy(&metric), angular],
                metric,
                partner: None,
                killing: Some(VectorField::new(2, |_| vec![Jet::constant(0.0), Jet::constant(1.0)])),
                generator: Some(generator),
                swap: None,
                expected: expect(&[("conservation", true), ("killing", true), ("bm_from_flow", true)]),
            })
        }
        other => Err(GeomError::UnknownName(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::EndomorphismField;
    use crate::integrable::{conservation_audit, poisson_quadratic, random_states};
    use crate::projective::{bm_from_flow_field, bm_residual, l_from_pair_field, ProjectiveFlowSpec};
    use rand::Rng;

    const TOL: f64 = 1e-8;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn synthetic(alpha: Complex64, beta: Complex64, gamma: Complex64) -> QuadraticIntegral2D {
        let b = ScalarField::closed(2, |x| x[0] * x[0] + 2.0);
        QuadraticIntegral2D::from_polynomial(Chart::cube(2, -1.0, 1.0).unwrap(), alpha, beta, gamma, b).unwrap()
    }

    #[test]
    fn example1_values_at_reference_point() {
        let b = builtin_example("example1", 1.0).unwrap();
        let s = PhaseState::new(vec![1.0, 0.0], vec![1.0, 1.0]);
        let v: Vec<f64> = b.integrals.iter().map(|q| q.value(&s).unwrap()).collect();
        for (got, want) in v.iter().zip([1.0, -1.0, 1.0, -1.0]) {
            assert!((got - want).abs() < 1e-15, "{v:?}");
        }
    }

    #[test]
    fn example_integrals_commute_with_energy() {
        for name in ["example1", "example2"] {
            let b = builtin_example(name, 1.3).unwrap();
            let mut rng = crate::sampling::rng(5);
            for _ in 0..50 {
                let x = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                let s = PhaseState::new(x, vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                for q in &b.integrals[1..] {
                    let br = poisson_quadratic(&b.integrals[0], q, &s).unwrap();
                    assert!(br.abs() < 1e-12, "{name} {} {br}", q.name);
                }
            }
        }
    }

    #[test]
    fn examples_are_linearly_independent() {
        for (name, rank) in [("example1", 4), ("example2", 3)] {
            let b = builtin_example(name, 1.0).unwrap();
            let mut rng = crate::sampling::rng(9);
            let rows: Vec<Vec<f64>> = (0..30)
                .map(|_| {
                    let s = PhaseState::new(
                        vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                        vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                    );
                    b.integrals.iter().map(|q| q.value(&s).unwrap()).collect()
                })
                .collect();
            let m = DMatrix::from_fn(rows.len(), rank, |i, j| rows[i][j]);
            let sv = m.singular_values();
            assert!(sv.min() > 1e-6 * sv.max(), "{name} {sv}");
        }
    }

    #[test]
    fn unknown_example_and_bad_gamma() {
        assert!(matches!(builtin_example("nope", 1.0), Err(GeomError::UnknownName(_))));
        assert!(builtin_example("example1", 0.0).is_err());
    }

    #[test]
    fn example2_conservation() {
        let b = builtin_example("example2", 1.0).unwrap();
        let states = random_states(&b.metric, 20, 17, 0.1).unwrap();
        let r = conservation_audit(&b.metric, &b.integrals, &states, 5.0, 1e-10, 1e-7).unwrap();
        assert!(r.passed && r.exited == 0, "{r:?}");
    }

    #[test]
    fn torus_pair() {
        let b = builtin_example("torus", 0.0).unwrap();
        let gbar = b.partner.clone().unwrap();
        let pair = MetricPair::new(b.metric.clone(), gbar.clone()).unwrap();
        let l = l_from_pair_field(&pair);
        for x in b.metric.chart().shrink(0.2).halton(50, 0) {
            assert!(bm_residual(&b.metric, &l, &x).unwrap() <= 1e-6);
            // the swap is an isometry onto the partner
            let y = torus_swap(&x);
            let gy = b.metric.g(&y).unwrap();
            let pulled = SqMat::from_fn(2, |i, j| gy[(1 - i, 1 - j)]);
            assert!(pulled.sub(&gbar.g(&x).unwrap()).max_abs() < 1e-12);
        }
        assert!(torus_margin(b.metric.chart(), 500) >= 1.5);
        let states = random_states(&b.metric, 8, 3, 0.1).unwrap();
        let r = conservation_audit(&b.metric, &b.integrals, &states, 5.0, 1e-10, 1e-7).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn trivial_pair_gives_twice_the_energy() {
        let chart = Chart::cube(2, -1.0, 1.0).unwrap();
        let g = MetricField::parse(chart, &["2 + x1^2", "0.1", "1 + x2^2"]).unwrap();
        let i = integral_from_pair2d(&MetricPair::new(g.clone(), g.clone()).unwrap()).unwrap();
        let h = MomentumQuadratic::energy(&g);
        let s = PhaseState::new(vec![0.3, -0.2], vec![0.7, 1.1]);
        assert!((i.value(&s).unwrap() - 2.0 * h.value(&s).unwrap()).abs() < 1e-14);
        let three = MetricField::euclidean(Chart::cube(3, -1.0, 1.0).unwrap());
        let p3 = MetricPair::new(three.clone(), three).unwrap();
        assert!(matches!(integral_from_pair2d(&p3), Err(GeomError::WrongDimension { .. })));
    }

    #[test]
    fn principal_form_examples() {
        let b = builtin_example("example1", 1.0).unwrap();
        let chart = Chart::cube(2, -1.0, 1.0).unwrap();
        let on_chart = |q: &MomentumQuadratic| {
            let q = MomentumQuadratic::new(q.name.clone(), chart.clone(), MatrixField::new(2, 2, {
                let q = q.clone();
                move |x| q.jets(x)
            }));
            QuadraticIntegral2D::from_quadratic(&q).unwrap()
        };
        // F2 = (x p_y − y p_x)²: a = −z²/4, a double root at 0
        let pf = principal_form(&on_chart(&b.integrals[2]), TOL).unwrap();
        assert!((pf.alpha - c(0.25, 0.0)).norm() < 1e-12 && pf.beta.norm() < 1e-12 && pf.gamma.norm() < 1e-12);
        let mc = classify_model(&pf, false, 1e-6);
        assert_eq!(mc.tag, ModelTag::Model4);
        assert!(mc.roots[0].norm() < 1e-10);
        // F1 has constant a
        let pf = principal_form(&on_chart(&b.integrals[1]), TOL).unwrap();
        assert_eq!(classify_model(&pf, false, 1e-6).tag, ModelTag::Model1a);
        assert!(matches!(principal_form(&on_chart(&b.integrals[0]), TOL), Err(GeomError::EnergyProportional)));
        // a ≡ −1 gives (0, 0, 1)
        let one = synthetic(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let pf = principal_form(&one, TOL).unwrap();
        let [a, b2, g] = pf.normalized();
        assert!(a.norm() < 1e-12 && b2.norm() < 1e-12 && (g - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn non_polynomial_a_is_rejected() {
        let chart = Chart::cube(2, -1.0, 1.0).unwrap();
        let q = QuadraticIntegral2D::new(
            "bad",
            chart,
            ScalarField::parse("exp(x)", &["x", "y"]).unwrap(),
            ScalarField::constant(2, 0.0),
            ScalarField::constant(2, 1.0),
        )
        .unwrap();
        assert!(matches!(principal_form(&q, TOL), Err(GeomError::NotPolynomial { .. })));
    }

    #[test]
    fn classification_examples() {
        let tag = |a, b, g| classify_model(&PrincipalForm::from_coefficients(a, b, g, 1.0).unwrap(), false, 1e-6).tag;
        let (z, o) = (c(0.0, 0.0), c(1.0, 0.0));
        assert_eq!(tag(z, z, o), ModelTag::Model1a);
        assert_eq!(tag(z, o, z), ModelTag::Model2);
        assert_eq!(tag(o, z, -o), ModelTag::Model3);
        assert_eq!(tag(o, z, z), ModelTag::Model4);
        assert_eq!(tag(o, z, c(1e-14, 0.0)), ModelTag::Model4);
        let pf = PrincipalForm::from_coefficients(z, z, o, 1.0).unwrap();
        assert_eq!(classify_model(&pf, true, 1e-6).tag, ModelTag::Model1b);
    }

    #[test]
    fn flattening_examples() {
        let mc = |a, b, g| classify_model(&PrincipalForm::from_coefficients(a, b, g, 1.0).unwrap(), false, 1e-6);
        let (z, o) = (c(0.0, 0.0), c(1.0, 0.0));
        let m1 = mc(z, z, o);
        assert_eq!(flatten_coordinates(&m1, c(0.3, 0.2), 1e-3).unwrap(), c(0.3, 0.2));
        let m2 = mc(z, o, z);
        assert!((flatten_coordinates(&m2, c(1.0, 0.0), 1e-3).unwrap() - c(2.0, 0.0)).norm() < 1e-15);
        assert!((flatten_coordinates(&m2, c(4.0, 0.0), 1e-3).unwrap() - c(4.0, 0.0)).norm() < 1e-15);
        assert!(matches!(flatten_coordinates(&m2, c(-1.0, 1e-4), 1e-3), Err(GeomError::BranchViolation { .. })));
        let m4 = mc(o, z, z);
        assert!((flatten_coordinates(&m4, c(std::f64::consts::E, 0.0), 1e-3).unwrap() - o).norm() < 1e-15);
        let m3 = mc(o, z, -o);
        assert!(matches!(flatten_coordinates(&m3, c(1.0005, 0.0), 1e-3), Err(GeomError::BranchViolation { .. })));
    }

    fn flat_defect(mc: &ModelClass, z: Complex64) -> f64 {
        let h = 1e-5;
        let w = |z| flatten_coordinates(mc, z, 1e-3).unwrap();
        let dw = (w(z + h) - w(z - h)) / (2.0 * h);
        (dw * dw * mc.form.eval(z) - 1.0).norm()
    }

    #[test]
    fn flattening_solves_the_form_equation() {
        let mut rng = crate::sampling::rng(21);
        for _ in 0..20 {
            let mut r = || c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let (a, b, g) = (r(), r(), r());
            let z = r();
            for mc in [
                classify_model(&PrincipalForm::from_coefficients(c(0.0, 0.0), c(0.0, 0.0), g, 1.0).unwrap(), false, 1e-6),
                classify_model(&PrincipalForm::from_coefficients(c(0.0, 0.0), b, g, 1.0).unwrap(), false, 1e-6),
                classify_model(&PrincipalForm::from_coefficients(a, b, g, 1.0).unwrap(), false, 1e-6),
                classify_model(&PrincipalForm::from_coefficients(a, -a * b * 2.0, a * b * b, 1.0).unwrap(), false, 1e-6),
            ] {
                if flatten_coordinates(&mc, z, 0.05).is_ok() {
                    assert!(flat_defect(&mc, z) < 1e-7, "{:?} {}", mc.tag, flat_defect(&mc, z));
                }
            }
        }
    }

    /// The conformal factor in flattening coordinates must separate as X(u) − Y(v).
    #[test]
    fn flattened_example1_is_liouville() {
        let gamma = 1.0;
        let b = builtin_example("example1", gamma).unwrap();
        let combo = b.integrals[1].combine(1.0, &b.integrals[2], 0.8).combine(1.0, &b.integrals[3], 0.6);
        let chart = Chart::cube(2, -1.0, 1.0).unwrap();
        let local = MomentumQuadratic::new("combo", chart, MatrixField::new(2, 2, move |x| combo.jets(x)));
        let pf = principal_form(&QuadraticIntegral2D::from_quadratic(&local).unwrap(), TOL).unwrap();
        let mc = classify_model(&pf, false, 1e-6);
        assert_eq!(mc.tag, ModelTag::Model3);
        let lambda = |z: Complex64| z.norm_sqr() + gamma;
        let w = |z| flatten_coordinates(&mc, z, 1e-3).unwrap();
        let dw = |z: Complex64| (w(z + 1e-6) - w(z - 1e-6)) / 2e-6;
        for z0 in [c(0.4, 0.3), c(-0.2, 0.5), c(0.1, -0.6)] {
            let w0 = w(z0);
            // invert w by Newton from z0, then read the transported factor
            let factor = |target: Complex64| {
                let mut z = z0;
                for _ in 0..50 {
                    z -= (w(z) - target) / dw(z);
                }
                lambda(z) / dw(z).norm_sqr()
            };
            let h = 1e-3;
            let f = |du: f64, dv: f64| factor(w0 + c(du, dv));
            let uv = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
            let uu = (f(h, 0.0) - 2.0 * f(0.0, 0.0) + f(-h, 0.0)) / (h * h);
            assert!(uv.abs() < 1e-4 * (1.0 + uu.abs()), "{uv} {uu}");
        }
    }

    #[test]
    fn classification_round_trip() {
        let mut rng = crate::sampling::rng(33);
        for tag in [ModelTag::Model1a, ModelTag::Model2, ModelTag::Model3, ModelTag::Model4] {
            for _ in 0..20 {
                let mut r = || c(rng.gen_range(0.5..1.5) * [-1.0, 1.0][rng.gen_range(0..2)], rng.gen_range(-1.0..1.0));
                let (a, b, g) = match tag {
                    ModelTag::Model1a => (c(0.0, 0.0), c(0.0, 0.0), r()),
                    ModelTag::Model2 => (c(0.0, 0.0), r(), r()),
                    ModelTag::Model3 => {
                        let (s, r1, r2) = (r(), r() * 2.0, r() * -2.0);
                        (s, -s * (r1 + r2), s * r1 * r2)
                    }
                    _ => {
                        let (s, r0) = (r(), r());
                        (s, -s * r0 * 2.0, s * r0 * r0)
                    }
                };
                let pf = principal_form(&synthetic(a, b, g), TOL).unwrap();
                assert_eq!(classify_model(&pf, false, 1e-6).tag, tag);
            }
        }
    }

    #[test]
    fn scale_covariance_under_energy_combinations() {
        let b = builtin_example("example1", 1.0).unwrap();
        let chart = Chart::cube(2, -1.0, 1.0).unwrap();
        let base = b.integrals[1].combine(1.0, &b.integrals[2], 0.5);
        let h = b.integrals[0].clone();
        let local = |q: MomentumQuadratic| {
            let m = MomentumQuadratic::new("q", chart.clone(), MatrixField::new(2, 2, move |x| q.jets(x)));
            QuadraticIntegral2D::from_quadratic(&m).unwrap()
        };
        let pf0 = principal_form(&local(base.clone()), TOL).unwrap();
        let m0 = classify_model(&pf0, false, 1e-6);
        let mut rng = crate::sampling::rng(2);
        for _ in 0..10 {
            let cc = rng.gen_range(0.2..3.0) * [-1.0, 1.0][rng.gen_range(0..2)];
            let d = rng.gen_range(-5.0..5.0);
            let pf = principal_form(&local(base.combine(cc, &h, d)), TOL).unwrap();
            assert!((pf.alpha - pf0.alpha * cc).norm() < 1e-10 * pf0.scale * cc.abs());
            assert!((pf.beta - pf0.beta * cc).norm() < 1e-10 * pf0.scale * cc.abs());
            assert!((pf.gamma - pf0.gamma * cc).norm() < 1e-10 * pf0.scale * cc.abs());
            let m = classify_model(&pf, false, 1e-6);
            assert_eq!(m.tag, m0.tag);
            for (r, r0) in m.roots.iter().zip(&m0.roots) {
                assert!((r - r0).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn liouville_examples() {
        let chart = Chart::cube(2, -1.0, 1.0).unwrap();
        let data = LiouvilleData {
            chart: chart.clone(),
            x_fn: ScalarField::parse("x^2 + 2", &["x"]).unwrap(),
            y_fn: ScalarField::parse("-y^2 - 1", &["y"]).unwrap(),
            require_partner: false,
        };
        let bundle = liouville_build(&data, 1e-6).unwrap();
        let x = [0.3, -0.4];
        assert!((bundle.g.g(&x).unwrap()[(0, 0)] - (0.09 + 0.16 + 3.0)).abs() < 1e-14);
        assert!(bundle.fit.residual <= 1e-9, "{:?}", bundle.fit);
        assert!(!bundle.definiteness.positive_definite_everywhere);
        // the displayed integral is conserved: it Poisson-commutes with the energy
        let h = MomentumQuadratic::energy(&bundle.g);
        let s = PhaseState::new(x.to_vec(), vec![0.4, -0.9]);
        assert!(poisson_quadratic(&h, &bundle.displayed, &s).unwrap().abs() < 1e-13);

        let flat = LiouvilleData {
            chart: chart.clone(),
            x_fn: ScalarField::constant(1, 2.0),
            y_fn: ScalarField::constant(1, 1.0),
            require_partner: true,
        };
        let bundle = liouville_build(&flat, 1e-6).unwrap();
        assert!(bundle.gbar.g(&x).unwrap().sub(&SqMat::diag(&[0.25, 0.5])).max_abs() < 1e-15);
        assert!(bundle.definiteness.positive_definite_everywhere);

        let bad = LiouvilleData { y_fn: ScalarField::constant(1, 5.0), ..flat.clone() };
        assert!(matches!(liouville_build(&bad, 1e-6), Err(GeomError::DomainViolation { .. })));
        let no_partner = LiouvilleData { y_fn: ScalarField::constant(1, -1.0), ..flat };
        assert!(matches!(liouville_build(&no_partner, 1e-6), Err(GeomError::DomainViolation { .. })));
    }

    #[test]
    fn example1_as_liouville_has_indefinite_partner() {
        let data = LiouvilleData {
            chart: Chart::cube(2, -2.0, 2.0).unwrap(),
            x_fn: ScalarField::parse("x^2 + 1.5", &["x"]).unwrap(),
            y_fn: ScalarField::parse("0.5 - y^2", &["y"]).unwrap(),
            require_partner: false,
        };
        let b = liouville_build(&data, 1e-6).unwrap();
        assert!(b.definiteness.positive_points > 0);
        assert!(b.definiteness.positive_points < b.definiteness.samples);
        assert!(b.fit.residual <= 1e-9);
    }

    #[test]
    fn liouville_conservation() {
        let data = LiouvilleData {
            chart: Chart::cube(2, -6.0, 6.0).unwrap(),
            x_fn: ScalarField::parse("3 + sin(x)", &["x"]).unwrap(),
            y_fn: ScalarField::parse("cos(y) - 0.5", &["y"]).unwrap(),
            require_partner: false,
        };
        let b = liouville_build(&data, 1e-6).unwrap();
        let states = random_states(&b.g, 10, 4, 0.2).unwrap();
        let h = MomentumQuadratic::energy(&b.g);
        let r = conservation_audit(&b.g, &[h, b.displayed.clone(), b.integral.clone()], &states, 5.0, 1e-10, 1e-7).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn killing_examples() {
        let e1 = builtin_example("example1", 1.0).unwrap();
        let e2 = builtin_example("example2", 1.0).unwrap();
        let rot = e1.killing.clone().unwrap();
        assert!(killing_residual(&e1.metric, &rot, 100, 1e-7).unwrap().passed);
        let r = killing_residual(&e2.metric, &rot, 100, 1e-7).unwrap();
        assert!(!r.passed && r.max_norm > 1e-3);
        let lin = LiouvilleData {
            chart: Chart::cube(2, -1.0, 1.0).unwrap(),
            x_fn: ScalarField::parse("2*x + 5", &["x"]).unwrap(),
            y_fn: ScalarField::parse("2*y", &["y"]).unwrap(),
            require_partner: false,
        };
        let g = liouville_build(&lin, 1e-6).unwrap().g;
        let diag = VectorField::new(2, |_| vec![Jet::constant(1.0), Jet::constant(1.0)]);
        assert!(killing_residual(&g, &diag, 100, 1e-7).unwrap().passed);
    }

    #[test]
    fn sphere_generator_is_projective() {
        let b = builtin_example("sphere_beltrami", 0.0).unwrap();
        let spec = ProjectiveFlowSpec { v: b.generator.clone().unwrap(), g: b.metric.clone() };
        let l = bm_from_flow_field(&spec);
        let mut nontrivial = 0.0_f64;
        for x in b.metric.chart().halton(60, 0) {
            assert!(bm_residual(&b.metric, &l, &x).unwrap() <= 1e-6);
            nontrivial = nontrivial.max(l.l(&x).unwrap().max_abs());
        }
        assert!(nontrivial > 0.1);
        let killing = ProjectiveFlowSpec { v: b.killing.clone().unwrap(), g: b.metric.clone() };
        let lk: EndomorphismField = bm_from_flow_field(&killing);
        assert!(lk.l(&[1.0, 0.5]).unwrap().max_abs() < 1e-14);
        assert!(!killing_residual(&b.metric, &b.generator.unwrap(), 50, 1e-7).unwrap().passed);
    }
}
