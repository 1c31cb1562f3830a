//! The commuting integrals `I_t(v) = g(S_t v, v)` with `S_t = adj(L − t·Id)`,
//! their roots, Poisson brackets, eigenvalue ordering and conservation audits.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::field::{Chart, EndomorphismField, MatrixField, MetricField, PhaseState};
use crate::geodesic::{integrate_geodesic, TrajectoryStatus};
use crate::jet::{Jet, Order};
use crate::linalg::{deflate, poly_eval, polynomial_roots, symmetric_pencil, SqMat};
use crate::sampling;

/// `S_t` of a BM-structure together with its metric.
#[derive(Clone, Debug)]
pub struct IntegralFamily {
    pub g: MetricField,
    pub l: EndomorphismField,
}

impl IntegralFamily {
    pub fn new(g: MetricField, l: EndomorphismField) -> Result<IntegralFamily> {
        if g.chart() != l.chart() {
            return Err(GeomError::InvalidChart("metric and endomorphism live on different charts".into()));
        }
        Ok(IntegralFamily { g, l })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// Coefficients `C_k` of `S_t = Σ_k t^k C_k` at `x`.
    pub fn coeffs(&self, x: &[f64]) -> Result<Vec<SqMat<f64>>> {
        Ok(self.l.l(x)?.adjugate_polynomial())
    }

    /// Coefficients `c_k` of the polynomial `t ↦ I_t(x, p)`.
    pub fn polynomial(&self, s: &PhaseState) -> Result<Vec<f64>> {
        let v = s.velocity(&self.g)?;
        Ok(self.coeffs(&s.x)?.iter().map(|c| dot(&s.p, &c.matvec(&v))).collect())
    }

    /// `I_t` as a quadratic form in momenta, `pᵀ S_t g⁻¹ p`.
    pub fn as_quadratic(&self, t: f64) -> MomentumQuadratic {
        let (g, l) = (self.g.clone(), self.l.clone());
        let n = self.dim();
        let field = MatrixField::with_order(n, n, l.max_order(), move |x| {
            let s = s_tensor_jets(&l.jets(x), t);
            let ginv = g.jets(x).symmetrize().inverse().unwrap_or_else(|_| SqMat::scalar(n, Jet::constant(f64::NAN)));
            s.matmul(&ginv).symmetrize()
        });
        MomentumQuadratic::new(format!("I({t})"), self.g.chart().clone(), field)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `adj(L − t·Id)` on jets.
pub fn s_tensor_jets(l: &SqMat<Jet>, t: f64) -> SqMat<Jet> {
    let coeffs = l.adjugate_polynomial();
    let n = l.dim();
    let mut out = SqMat::zeros(n);
    for c in coeffs.iter().rev() {
        out = out.scale(Jet::constant(t)).add(c);
    }
    out
}

/// `S_t = adj(L − t·Id)` at `x`, finite at eigenvalues of `L`.
pub fn s_tensor(l: &EndomorphismField, x: &[f64], t: f64) -> Result<SqMat<f64>> {
    let coeffs = l.l(x)?.adjugate_polynomial();
    let n = l.dim();
    let mut out = SqMat::zeros(n);
    for c in coeffs.iter().rev() {
        out = out.scale(t).add(c);
    }
    Ok(out)
}

/// `I_t(v) = g(S_t v, v)` with `v = g⁻¹ p`.
pub fn integral_value(fam: &IntegralFamily, s: &PhaseState, t: f64) -> Result<f64> {
    let c = fam.polynomial(s)?;
    Ok(poly_eval(&c, t).0)
}

/// Roots `t_1 ≤ … ≤ t_{n−1}` of `t ↦ I_t(x, p)`.
///
/// Eigenvalues of multiplicity `k` contribute the known factor `(λ − t)^{k−1}`,
/// which is divided out before the companion-matrix solve and reinstated
/// exactly. Imaginary parts up to `1e−9·(1 + |t|)` are discarded.
pub fn integral_roots(fam: &IntegralFamily, s: &PhaseState, tau_deg: f64) -> Result<Vec<f64>> {
    if s.p.iter().all(|v| *v == 0.0) {
        return Err(GeomError::ZeroVelocity);
    }
    let mut poly = fam.polynomial(s)?;
    let lead = poly.last().copied().unwrap_or(0.0);
    if lead == 0.0 || !lead.is_finite() {
        return Err(GeomError::ZeroVelocity);
    }
    let ev = eigenvalues_at(&fam.g, &fam.l, &s.x)?;
    let mut roots = Vec::new();
    for (value, mult) in cluster(&ev, tau_deg) {
        for _ in 1..mult {
            poly = deflate(&poly, value);
            roots.push(value);
        }
    }
    let reduced = poly.clone();
    for z in polynomial_roots(&reduced) {
        roots.push(real_root(z, &reduced)?);
    }
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

fn real_root(z: Complex64, poly: &[f64]) -> Result<f64> {
    if z.im.abs() > 1e-9 * (1.0 + z.re.abs()) {
        // near-double real roots split into a conjugate pair; accept only
        // when the real part is a genuine minimum of |p|
        let (p, _) = poly_eval(poly, z.re);
        let scale: f64 = poly.iter().enumerate().map(|(k, c)| c.abs() * z.re.abs().powi(k as i32)).sum();
        if p.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            return Err(GeomError::ComplexRoot { imag: z.im });
        }
    }
    let mut t = z.re;
    for _ in 0..3 {
        let (p, dp) = poly_eval(poly, t);
        if dp == 0.0 || !dp.is_finite() {
            break;
        }
        let step = p / dp;
        if !(step.abs() < 1e-6 * (1.0 + t.abs())) {
            break;
        }
        t -= step;
    }
    Ok(t)
}

/// Groups ascending eigenvalues whose neighbours are closer than
/// `tau_deg·(1 + spectral radius)`; returns (mean, multiplicity).
pub fn cluster(ev: &[f64], tau_deg: f64) -> Vec<(f64, usize)> {
    let radius = ev.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let gap = tau_deg * (1.0 + radius);
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=ev.len() {
        if i == ev.len() || ev[i] - ev[i - 1] > gap {
            let group = &ev[start..i];
            out.push((group.iter().sum::<f64>() / group.len() as f64, group.len()));
            start = i;
        }
    }
    out
}

fn eigenvalues_at(g: &MetricField, l: &EndomorphismField, x: &[f64]) -> Result<Vec<f64>> {
    Ok(eigen_at(g, l, x)?.0)
}

fn eigen_at(g: &MetricField, l: &EndomorphismField, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>, SqMat<f64>)> {
    let gm = g.g(x)?;
    let lm = l.l(x)?;
    let (vals, vecs) = symmetric_pencil(&gm.matmul(&lm).symmetrize(), &gm)?;
    Ok((vals, vecs, gm))
}

/// A function on phase space quadratic in momenta, `pᵀ K(x) p`.
#[derive(Clone)]
pub struct MomentumQuadratic {
    pub name: String,
    chart: Chart,
    k: Arc<MatrixField>,
}

impl fmt::Debug for MomentumQuadratic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MomentumQuadratic({})", self.name)
    }
}

impl MomentumQuadratic {
    pub fn new(name: impl Into<String>, chart: Chart, k: MatrixField) -> MomentumQuadratic {
        MomentumQuadratic { name: name.into(), chart, k: Arc::new(k) }
    }

    /// `H = ½ g^{ij} p_i p_j`.
    pub fn energy(g: &MetricField) -> MomentumQuadratic {
        let gf = g.clone();
        let n = g.dim();
        let k = MatrixField::new(n, n, move |x| {
            gf.jets(x)
                .symmetrize()
                .inverse()
                .map(|m| m.scale(Jet::constant(0.5)))
                .unwrap_or_else(|_| SqMat::scalar(n, Jet::constant(f64::NAN)))
        });
        MomentumQuadratic::new("H", g.chart().clone(), k)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn matrix(&self, x: &[f64]) -> Result<SqMat<f64>> {
        self.chart.check(x)?;
        Ok(self.k.at(x, Order::Value)?.values().symmetrize())
    }

    pub fn matrix_jets(&self, x: &[f64], order: Order) -> Result<SqMat<Jet>> {
        self.chart.check(x)?;
        Ok(self.k.at(x, order)?.symmetrize())
    }

    /// `K` on arbitrary jet inputs, without the chart check.
    pub fn jets(&self, x: &[Jet]) -> SqMat<Jet> {
        self.k.jets(x).symmetrize()
    }

    pub fn value(&self, s: &PhaseState) -> Result<f64> {
        let k = self.matrix(&s.x)?;
        Ok(k.bilinear(&s.p, &s.p))
    }

    /// `c₁·self + c₂·other`.
    pub fn combine(&self, c1: f64, other: &MomentumQuadratic, c2: f64) -> MomentumQuadratic {
        let (a, b) = (self.k.clone(), other.k.clone());
        let order = a.max_order().min(b.max_order());
        let n = a.size();
        let k = MatrixField::with_order(a.dim(), n, order, move |x| {
            a.jets(x).scale(Jet::constant(c1)).add(&b.jets(x).scale(Jet::constant(c2)))
        });
        MomentumQuadratic::new(format!("{c1}*{}+{c2}*{}", self.name, other.name), self.chart.clone(), k)
    }
}

/// `{F, G} = Σ_k ∂F/∂x_k ∂G/∂p_k − ∂F/∂p_k ∂G/∂x_k` for quadratic `F, G`.
pub fn poisson_quadratic(f: &MomentumQuadratic, g: &MomentumQuadratic, s: &PhaseState) -> Result<f64> {
    Ok(poisson_with_scale(f, g, s)?.0)
}

/// The bracket together with the sum of the absolute values of its terms,
/// the scale against which cancellation is judged.
pub fn poisson_with_scale(f: &MomentumQuadratic, g: &MomentumQuadratic, s: &PhaseState) -> Result<(f64, f64)> {
    let a = f.matrix_jets(&s.x, Order::First)?;
    let b = g.matrix_jets(&s.x, Order::First)?;
    let n = s.x.len();
    let av = a.values();
    let bv = b.values();
    let dfp = av.matvec(&s.p);
    let dgp = bv.matvec(&s.p);
    let (mut out, mut scale) = (0.0, 0.0);
    for k in 0..n {
        let dfx = a.partial(k).values().bilinear(&s.p, &s.p);
        let dgx = b.partial(k).values().bilinear(&s.p, &s.p);
        let (u, v) = (dfx * 2.0 * dgp[k], 2.0 * dfp[k] * dgx);
        out += u - v;
        scale += u.abs() + v.abs();
    }
    Ok((out, scale))
}

/// `{I_{t1}, I_{t2}}` at `s`.
pub fn poisson_bracket(fam: &IntegralFamily, t1: f64, t2: f64, s: &PhaseState) -> Result<f64> {
    poisson_quadratic(&fam.as_quadratic(t1), &fam.as_quadratic(t2), s)
}

/// Eigenvalue data of `L` with respect to `g`.
#[derive(Clone, Debug)]
pub struct SpectrumProfile {
    pub g: MetricField,
    pub l: EndomorphismField,
    pub tau_deg: f64,
}

impl SpectrumProfile {
    pub fn new(g: MetricField, l: EndomorphismField, tau_deg: f64) -> SpectrumProfile {
        SpectrumProfile { g, l, tau_deg }
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self, x: &[f64]) -> Result<Vec<f64>> {
        eigenvalues_at(&self.g, &self.l, x)
    }

    /// Multiplicities of the distinct eigenvalues, ascending.
    pub fn multiplicities(&self, x: &[f64]) -> Result<Vec<usize>> {
        Ok(cluster(&self.eigenvalues(x)?, self.tau_deg).into_iter().map(|(_, m)| m).collect())
    }

    /// `N_L(x)`, the number of distinct eigenvalues.
    pub fn distinct(&self, x: &[f64]) -> Result<usize> {
        Ok(self.multiplicities(x)?.len())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub pairs: usize,
    /// `max λ_i(x) − λ_{i+1}(y)` over pairs and indices (sorted eigenvalues).
    pub sorted_gap: f64,
    /// Largest amount by which an eigenvalue branch, followed continuously
    /// along the segment from `x` to `y`, rises above the branch that started
    /// directly above it.
    pub crossing_gap: f64,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub threshold: f64,
    pub passed: bool,
}

/// Checks `λ_i(x) ≤ λ_{i+1}(y)` over point pairs. Besides the sorted gap,
/// each segment `x → y` is walked in `steps` increments with eigenvector
/// matching, so branches that cross (which sorted values hide) are caught.
pub fn ordering_audit(
    profile: &SpectrumProfile,
    pairs: &[(Vec<f64>, Vec<f64>)],
    steps: usize,
    tau_ord: f64,
) -> Result<OrderingReport> {
    let per_pair: Vec<Result<(f64, f64)>> = pairs
        .par_iter()
        .map(|(x, y)| {
            let lx = profile.eigenvalues(x)?;
            let ly = profile.eigenvalues(y)?;
            let sorted = (0..lx.len() - 1).map(|i| lx[i] - ly[i + 1]).fold(f64::NEG_INFINITY, f64::max);
            Ok((sorted, branch_crossing(profile, x, y, steps)?))
        })
        .collect();
    let mut sorted_gap = f64::NEG_INFINITY;
    let mut crossing_gap = f64::NEG_INFINITY;
    let mut worst = None;
    let mut worst_val = f64::NEG_INFINITY;
    for (r, pair) in per_pair.into_iter().zip(pairs) {
        let (s, c) = r?;
        sorted_gap = sorted_gap.max(s);
        crossing_gap = crossing_gap.max(c);
        if s.max(c) > worst_val {
            worst_val = s.max(c);
            worst = Some(pair.clone());
        }
    }
    Ok(OrderingReport {
        pairs: pairs.len(),
        sorted_gap,
        crossing_gap,
        worst_pair: worst,
        threshold: tau_ord,
        passed: sorted_gap <= tau_ord && crossing_gap <= tau_ord,
    })
}

fn branch_crossing(profile: &SpectrumProfile, x: &[f64], y: &[f64], steps: usize) -> Result<f64> {
    let n = x.len();
    let point = |s: f64| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| a + s * (b - a)).collect() };
    let (_, mut vecs, _) = eigen_at(&profile.g, &profile.l, x)?;
    // branch b currently sits at eigen-index slot[b]
    let mut slot: Vec<usize> = (0..n).collect();
    let mut worst = f64::NEG_INFINITY;
    for k in 1..=steps.max(1) {
        let p = point(k as f64 / steps.max(1) as f64);
        let (nv, nw, gm) = eigen_at(&profile.g, &profile.l, &p)?;
        let g = gm.to_nalgebra();
        // greedy matching on |⟨w_old, w_new⟩_g|
        let overlap = vecs.transpose() * &g * &nw;
        let mut taken = vec![false; n];
        let mut new_slot = vec![0; n];
        let mut order: Vec<(usize, usize, f64)> = Vec::new();
        for b in 0..n {
            for j in 0..n {
                order.push((b, j, overlap[(slot[b], j)].abs()));
            }
        }
        order.sort_by(|a, b| b.2.total_cmp(&a.2));
        let mut assigned = vec![false; n];
        for (b, j, _) in order {
            if !assigned[b] && !taken[j] {
                assigned[b] = true;
                taken[j] = true;
                new_slot[b] = j;
            }
        }
        slot = new_slot;
        for b in 0..n - 1 {
            worst = worst.max(nv[slot[b]] - nv[slot[b + 1]]);
        }
        vecs = nw;
    }
    Ok(worst)
}

/// `count` point pairs drawn from two independent Halton streams.
pub fn halton_pairs(chart: &Chart, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let xs = chart.halton(count, 0);
    let ys = chart.halton(count, 7919);
    xs.into_iter().zip(ys.into_iter().rev()).collect()
}

/// Random initial states in `chart.shrink(frac)` with `H = ½`.
pub fn random_states(g: &MetricField, count: usize, seed: u64, frac: f64) -> Result<Vec<PhaseState>> {
    let mut rng = sampling::rng(seed);
    let inner = g.chart().shrink(frac);
    let n = g.dim();
    let mut out = Vec::with_capacity(count);
    for x in inner.random(&mut rng, count) {
        let v: Vec<f64> = (0..n).map(|_| sampling::normal(&mut rng)).collect();
        let s = PhaseState::from_velocity(g, x, &v)?;
        let h = s.energy(g)?;
        let c = (0.5 / h).sqrt();
        out.push(PhaseState { x: s.x, p: s.p.iter().map(|p| p * c).collect() });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub integral: String,
    pub max_relative_drift: f64,
    pub worst_state: usize,
    pub worst_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub states: usize,
    pub horizon: f64,
    pub integrator_tol: f64,
    pub exited: usize,
    pub rows: Vec<DriftRow>,
    pub bound: f64,
    pub passed: bool,
}

/// Relative drift `|I(τ) − I(0)| / max(|I(0)|, 1e−6·‖K(x₀)‖·|p₀|²)`; the floor
/// keeps the ratio meaningful when the initial value happens to vanish.
pub fn relative_drift(initial: f64, now: f64, floor: f64) -> f64 {
    (now - initial).abs() / initial.abs().max(floor)
}

/// Integrates each state over `[0, horizon]` and measures the drift of every
/// integral at all accepted steps.
pub fn conservation_audit(
    g: &MetricField,
    integrals: &[MomentumQuadratic],
    states: &[PhaseState],
    horizon: f64,
    tol: f64,
    bound: f64,
) -> Result<ConservationReport> {
    let runs: Vec<Result<(Vec<(f64, f64)>, bool)>> = states
        .par_iter()
        .map(|s0| {
            let tr = integrate_geodesic(g, s0, horizon, tol)?;
            let exited = matches!(tr.status, TrajectoryStatus::ExitedChart { .. });
            let mut per = Vec::with_capacity(integrals.len());
            for q in integrals {
                let i0 = q.value(s0)?;
                let floor = 1e-6 * q.matrix(&s0.x)?.frobenius() * dot(&s0.p, &s0.p);
                let mut worst = (0.0, 0.0);
                for (t, s) in tr.times.iter().zip(&tr.states) {
                    let d = relative_drift(i0, q.value(s)?, floor);
                    if d > worst.0 {
                        worst = (d, *t);
                    }
                }
                per.push(worst);
            }
            Ok((per, exited))
        })
        .collect();
    let mut rows: Vec<DriftRow> = integrals
        .iter()
        .map(|q| DriftRow { integral: q.name.clone(), max_relative_drift: 0.0, worst_state: 0, worst_time: 0.0 })
        .collect();
    let mut exited = 0;
    for (si, r) in runs.into_iter().enumerate() {
        let (per, ex) = r?;
        exited += ex as usize;
        for (row, (d, t)) in rows.iter_mut().zip(per) {
            if d > row.max_relative_drift {
                row.max_relative_drift = d;
                row.worst_state = si;
                row.worst_time = t;
            }
        }
    }
    let passed = rows.iter().all(|r| r.max_relative_drift <= bound);
    Ok(ConservationReport { states: states.len(), horizon, integrator_tol: tol, exited, rows, bound, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane() -> Chart {
        Chart::cube(2, -3.0, 3.0).unwrap()
    }

    fn diag_family(d: [&str; 2]) -> IntegralFamily {
        let c = plane();
        let g = MetricField::euclidean(c.clone());
        let l = EndomorphismField::parse(c, &[d[0], "0", "0", d[1]]).unwrap();
        IntegralFamily::new(g, l).unwrap()
    }

    #[test]
    fn s_tensor_of_identity_and_at_eigenvalue() {
        let c = Chart::cube(3, -1.0, 1.0).unwrap();
        let id = EndomorphismField::identity(c.clone());
        let s = s_tensor(&id, &[0.0; 3], 0.3).unwrap();
        assert!(s.sub(&SqMat::scalar(3, 0.49)).max_abs() < 1e-15);
        let l = EndomorphismField::parse(c, &["1", "0", "0", "0", "2", "0", "0", "0", "3"]).unwrap();
        let s = s_tensor(&l, &[0.0; 3], 2.0).unwrap();
        assert!(s.sub(&SqMat::diag(&[0.0, -1.0, 0.0])).max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_frame_value_and_root() {
        let fam = diag_family(["1", "3"]);
        let s = PhaseState::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        assert!(integral_value(&fam, &s, 2.0).unwrap().abs() < 1e-15);
        let r = integral_roots(&fam, &s, 1e-7).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 2.0).abs() < 1e-15);
        // eigenvector of λ₁ gives the root λ₂
        let s = PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        assert!((integral_roots(&fam, &s, 1e-7).unwrap()[0] - 3.0).abs() < 1e-14);
        let zero = PhaseState::new(vec![0.0, 0.0], vec![0.0, 0.0]);
        assert_eq!(integral_roots(&fam, &zero, 1e-7), Err(GeomError::ZeroVelocity));
    }

    #[test]
    fn identity_family_is_power_of_energy() {
        let c = Chart::cube(3, -1.0, 1.0).unwrap();
        let g = MetricField::parse(c.clone(), &["2", "0.1", "0", "1", "0", "3"]).unwrap();
        let fam = IntegralFamily::new(g.clone(), EndomorphismField::identity(c)).unwrap();
        let s = PhaseState::new(vec![0.1, 0.2, 0.3], vec![0.3, -1.0, 0.5]);
        let h = s.energy(&g).unwrap();
        for t in [-1.0, 0.0, 0.5, 2.0] {
            let want = (1.0 - t) * (1.0 - t) * 2.0 * h;
            assert!((integral_value(&fam, &s, t).unwrap() - want).abs() < 1e-13);
        }
    }

    #[test]
    fn multiple_eigenvalue_root_is_exact() {
        let c = Chart::cube(3, -1.0, 1.0).unwrap();
        let g = MetricField::euclidean(c.clone());
        let l = EndomorphismField::parse(c, &["1", "0", "0", "0", "2", "0", "0", "0", "2"]).unwrap();
        let fam = IntegralFamily::new(g, l).unwrap();
        let s = PhaseState::new(vec![0.0; 3], vec![0.7, -0.2, 1.3]);
        let r = integral_roots(&fam, &s, 1e-7).unwrap();
        assert_eq!(r[1], 2.0);
        assert!(r[0] >= 1.0 && r[0] <= 2.0);
    }

    #[test]
    fn self_bracket_vanishes() {
        let fam = diag_family(["x1 + 4", "x2^2 + 10"]);
        let s = PhaseState::new(vec![0.3, 0.1], vec![1.0, 2.0]);
        assert_eq!(poisson_bracket(&fam, 0.7, 0.7, &s).unwrap(), 0.0);
        // not a BM-structure, so brackets with the energy do not vanish
        let h = MomentumQuadratic::energy(&fam.g);
        assert!(poisson_quadratic(&h, &fam.as_quadratic(0.0), &s).unwrap().abs() > 1e-3);
    }

    #[test]
    fn ordering_identity_and_crossing() {
        let c = Chart::boxed(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let g = MetricField::euclidean(c.clone());
        let id = SpectrumProfile::new(g.clone(), EndomorphismField::identity(c.clone()), 1e-7);
        let pairs = halton_pairs(&c, 100);
        assert!(ordering_audit(&id, &pairs, 8, 1e-8).unwrap().passed);
        let l = EndomorphismField::parse(c.clone(), &["x1", "0", "0", "1 - x1"]).unwrap();
        let bad = SpectrumProfile::new(g, l, 1e-7);
        let r = ordering_audit(&bad, &pairs, 16, 1e-8).unwrap();
        assert!(r.sorted_gap < 0.0);
        assert!(!r.passed && r.crossing_gap > 0.5);
    }

    #[test]
    fn clustering() {
        assert_eq!(cluster(&[1.0, 1.0 + 1e-12, 2.0], 1e-7), vec![(1.0 + 0.5e-12, 2), (2.0, 1)]);
    }
}
