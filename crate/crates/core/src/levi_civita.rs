//! Levi-Civita normal forms and their partners, warped and adjusted metrics,
//! the constants `K_i`, the splitting tensor and the affine-equivalence test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::field::{Chart, EndomorphismField, MatrixField, MetricField, ScalarField};
use crate::integrable::cluster;
use crate::jet::{Jet, Order};
use crate::linalg::{symmetric_eigenvalues, symmetric_pencil, SqMat};
use crate::metric::christoffel;
use crate::projective::MetricPair;
use crate::sampling;

/// Eigenfunction of one block.
#[derive(Clone, Debug)]
pub enum Eigenfunction {
    Constant(f64),
    /// A function of the block's single coordinate.
    Function(ScalarField),
}

#[derive(Clone, Debug)]
pub struct LcBlock {
    pub size: usize,
    pub phi: Eigenfunction,
    /// Metric `A_i` in the block's own coordinates.
    pub metric: MatrixField,
}

impl LcBlock {
    pub fn constant(phi: f64, metric: MatrixField) -> LcBlock {
        LcBlock { size: metric.size(), phi: Eigenfunction::Constant(phi), metric }
    }

    pub fn varying(phi: ScalarField, metric: MatrixField) -> LcBlock {
        LcBlock { size: 1, phi: Eigenfunction::Function(phi), metric }
    }
}

/// Blocks occupy consecutive coordinates of the chart in the listed order.
#[derive(Clone, Debug)]
pub struct LeviCivitaSpec {
    pub chart: Chart,
    pub blocks: Vec<LcBlock>,
}

/// Minimum gap `φ_{i+1} − φ_i` enforced on sampled points.
pub const ORDERING_MARGIN: f64 = 1e-6;
const DOMAIN_SAMPLES: usize = 2000;

impl LeviCivitaSpec {
    pub fn new(chart: Chart, blocks: Vec<LcBlock>) -> Result<LeviCivitaSpec> {
        let n: usize = blocks.iter().map(|b| b.size).sum();
        if n != chart.dim() {
            return Err(GeomError::InvalidSpec(format!("block sizes sum to {n}, chart has dimension {}", chart.dim())));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.size == 0 || b.metric.size() != b.size || b.metric.dim() != b.size {
                return Err(GeomError::InvalidSpec(format!("block {} metric does not match its size {}", i + 1, b.size)));
            }
            if let Eigenfunction::Function(f) = &b.phi {
                if b.size != 1 || f.dim() != 1 {
                    return Err(GeomError::InvalidSpec(format!(
                        "block {} has a nonconstant eigenfunction but size {}",
                        i + 1,
                        b.size
                    )));
                }
            }
        }
        Ok(LeviCivitaSpec { chart, blocks })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut o = vec![0];
        for b in &self.blocks {
            o.push(o.last().unwrap() + b.size);
        }
        o
    }

    /// Global coordinate indices of block `i`.
    pub fn block_vars(&self, i: usize) -> Vec<usize> {
        let o = self.offsets();
        (o[i]..o[i + 1]).collect()
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.size).collect()
    }

    pub fn all_constant(&self) -> bool {
        self.blocks.iter().all(|b| matches!(b.phi, Eigenfunction::Constant(_)))
    }

    fn phi_jets(&self, x: &[Jet]) -> Vec<Jet> {
        let o = self.offsets();
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| match &b.phi {
                Eigenfunction::Constant(c) => Jet::constant(*c),
                Eigenfunction::Function(f) => f.jet(&x[o[i]..o[i] + 1]),
            })
            .collect()
    }

    pub fn phis(&self, x: &[f64]) -> Vec<f64> {
        self.phi_jets(&Jet::vars(x, Order::Value)).iter().map(|j| j.v).collect()
    }

    /// Checks `φ_{i+1} − φ_i ≥ margin` on sampled points.
    pub fn check_ordering(&self, samples: usize, margin: f64) -> Result<()> {
        for x in self.chart.halton(samples, 0) {
            let phi = self.phis(&x);
            for i in 0..phi.len().saturating_sub(1) {
                let gap = phi[i + 1] - phi[i];
                if !(gap >= margin) {
                    return Err(GeomError::OrderingViolated { point: x, index: i + 1, gap });
                }
            }
        }
        Ok(())
    }

    pub fn check_positive_phi(&self, samples: usize) -> Result<()> {
        for x in self.chart.halton(samples, 0) {
            for (i, v) in self.phis(&x).into_iter().enumerate() {
                if !(v > 0.0) {
                    return Err(GeomError::NonPositivePhi { point: x, index: i + 1, value: v });
                }
            }
        }
        Ok(())
    }

    /// `P_i = ∏_{j<i}(φ_i − φ_j) · ∏_{j>i}(φ_j − φ_i)`.
    pub fn p_jets(phi: &[Jet]) -> Vec<Jet> {
        (0..phi.len())
            .map(|i| {
                let mut p = Jet::constant(1.0);
                for (j, pj) in phi.iter().enumerate() {
                    if j < i {
                        p *= phi[i] - *pj;
                    } else if j > i {
                        p *= *pj - phi[i];
                    }
                }
                p
            })
            .collect()
    }

    /// `Σ w_i P_i A_i` as a block-diagonal jet matrix.
    fn assemble(&self, x: &[Jet], weight: impl Fn(usize, &[Jet]) -> Jet) -> SqMat<Jet> {
        let n = self.dim();
        let o = self.offsets();
        let phi = self.phi_jets(x);
        let p = Self::p_jets(&phi);
        let mut out = SqMat::zeros(n);
        for (i, b) in self.blocks.iter().enumerate() {
            let a = b.metric.jets(&x[o[i]..o[i + 1]]);
            let w = p[i] * weight(i, &phi);
            for r in 0..b.size {
                for c in 0..b.size {
                    out[(o[i] + r, o[i] + c)] = w * a[(r, c)];
                }
            }
        }
        out
    }

    fn g_jets(&self, x: &[Jet]) -> SqMat<Jet> {
        self.assemble(x, |_, _| Jet::constant(1.0))
    }

    /// `ρ_i = 1 / (φ_i ∏_j φ_j^{k_j})`.
    fn gbar_jets(&self, x: &[Jet]) -> SqMat<Jet> {
        let ks = self.multiplicities();
        self.assemble(x, move |i, phi| {
            let mut prod = phi[i];
            for (j, pj) in phi.iter().enumerate() {
                prod *= pj.powi(ks[j] as i32);
            }
            prod.recip()
        })
    }

    fn l_jets(&self, x: &[Jet]) -> SqMat<Jet> {
        let phi = self.phi_jets(x);
        let mut d = Vec::with_capacity(self.dim());
        for (i, b) in self.blocks.iter().enumerate() {
            for _ in 0..b.size {
                d.push(phi[i]);
            }
        }
        SqMat::diag(&d)
    }
}

/// The metric, its partner and the BM-structure of a Levi-Civita spec.
#[derive(Clone, Debug)]
pub struct LcPair {
    pub g: MetricField,
    pub gbar: MetricField,
    pub l: EndomorphismField,
}

impl LcPair {
    pub fn pair(&self) -> MetricPair {
        MetricPair { g: self.g.clone(), gbar: self.gbar.clone() }
    }
}

/// `g = Σ P_i A_i` and `L = diag(φ_i Id_{k_i})`, without a partner.
pub fn build_lc_metric(spec: &LeviCivitaSpec) -> Result<(MetricField, EndomorphismField)> {
    spec.check_ordering(DOMAIN_SAMPLES, ORDERING_MARGIN)?;
    let (s1, s2) = (spec.clone(), spec.clone());
    let g = MetricField::from_fn(spec.chart.clone(), move |x| s1.g_jets(x));
    let l = EndomorphismField::from_fn(spec.chart.clone(), move |x| s2.l_jets(x));
    Ok((g, l))
}

/// Builds `g`, `L` and the partner `ḡ = Σ ρ_i P_i A_i`.
pub fn build_lc_pair(spec: &LeviCivitaSpec) -> Result<LcPair> {
    let (g, l) = build_lc_metric(spec)?;
    spec.check_positive_phi(DOMAIN_SAMPLES)?;
    let s = spec.clone();
    let gbar = MetricField::from_fn(spec.chart.clone(), move |x| s.gbar_jets(x));
    Ok(LcPair { g, gbar, l })
}

/// Per-block statistics of `K_i = |dP_i|²_g / (4 P_i) + K·P_i` over samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KConstant {
    pub block: usize,
    pub size: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    /// Only blocks of size > 1 are required to be constant.
    pub must_be_constant: bool,
    pub constant: bool,
}

pub fn k_values(spec: &LeviCivitaSpec, k: f64, x: &[f64]) -> Result<Vec<f64>> {
    let (g, _) = build_lc_metric(spec)?;
    k_values_with(spec, &g, k, x)
}

fn k_values_with(spec: &LeviCivitaSpec, g: &MetricField, k: f64, x: &[f64]) -> Result<Vec<f64>> {
    let n = spec.dim();
    let ginv = g.g(x)?.inverse()?;
    let phi = spec.phi_jets(&Jet::vars(x, Order::First));
    let p = LeviCivitaSpec::p_jets(&phi);
    Ok(p.iter()
        .map(|pi| {
            let d = pi.grad(n);
            ginv.bilinear(&d, &d) / (4.0 * pi.v) + k * pi.v
        })
        .collect())
}

/// `K_1 … K_m` over `samples` Halton points, with constancy verdicts
/// (relative spread `≤ tol·(1 + |K_i|)`).
pub fn k_constants(spec: &LeviCivitaSpec, k: f64, samples: usize, tol: f64) -> Result<Vec<KConstant>> {
    let (g, _) = build_lc_metric(spec)?;
    let pts = spec.chart.halton(samples, 0);
    let vals: Vec<Vec<f64>> = pts.iter().map(|x| k_values_with(spec, &g, k, x)).collect::<Result<_>>()?;
    Ok((0..spec.blocks.len())
        .map(|i| {
            let col: Vec<f64> = vals.iter().map(|v| v[i]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            let std_dev = var.sqrt();
            KConstant {
                block: i + 1,
                size: spec.blocks[i].size,
                mean,
                std_dev,
                min: col.iter().copied().fold(f64::INFINITY, f64::min),
                max: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                must_be_constant: spec.blocks[i].size > 1,
                constant: std_dev <= tol * (1.0 + mean.abs()),
            }
        })
        .collect())
}

/// Base metric `g₀` with warp functions `σ_i` and fiber metrics `g_i`.
#[derive(Clone, Debug)]
pub struct WarpedSpec {
    pub base: MatrixField,
    pub sigmas: Vec<ScalarField>,
    pub fibers: Vec<MatrixField>,
}

impl WarpedSpec {
    pub fn new(base: MatrixField, sigmas: Vec<ScalarField>, fibers: Vec<MatrixField>) -> Result<WarpedSpec> {
        let k0 = base.size();
        if k0 == 0 || base.dim() != k0 {
            return Err(GeomError::InvalidSpec("base metric must be square in its own variables".into()));
        }
        if sigmas.len() != fibers.len() || sigmas.iter().any(|s| s.dim() != k0) {
            return Err(GeomError::InvalidSpec("one warp function of the base variables per fiber".into()));
        }
        Ok(WarpedSpec { base, sigmas, fibers })
    }

    pub fn base_dim(&self) -> usize {
        self.base.size()
    }
}

/// `g₀ + Σ σ_i dy_i²` on a chart of dimension `k₀ + m`.
pub fn adjusted_metric(spec: &WarpedSpec, chart: Chart) -> Result<MetricField> {
    let k0 = spec.base_dim();
    let m = spec.sigmas.len();
    if chart.dim() != k0 + m {
        return Err(GeomError::DimensionMismatch { expected: k0 + m, got: chart.dim() });
    }
    let s = spec.clone();
    Ok(MetricField::from_fn(chart, move |x| {
        let mut out = SqMat::zeros(k0 + m);
        let b = s.base.jets(&x[..k0]);
        for i in 0..k0 {
            for j in 0..k0 {
                out[(i, j)] = b[(i, j)];
            }
        }
        for (a, sig) in s.sigmas.iter().enumerate() {
            out[(k0 + a, k0 + a)] = sig.jet(&x[..k0]);
        }
        out
    }))
}

/// The warped product `g₀ + Σ σ_i g_i` on a chart of dimension `k₀ + Σ dim g_i`.
pub fn warped_metric(spec: &WarpedSpec, chart: Chart) -> Result<MetricField> {
    let k0 = spec.base_dim();
    let n = k0 + spec.fibers.iter().map(MatrixField::size).sum::<usize>();
    if chart.dim() != n {
        return Err(GeomError::DimensionMismatch { expected: n, got: chart.dim() });
    }
    let s = spec.clone();
    Ok(MetricField::from_fn(chart, move |x| {
        let mut out = SqMat::zeros(n);
        let b = s.base.jets(&x[..k0]);
        for i in 0..k0 {
            for j in 0..k0 {
                out[(i, j)] = b[(i, j)];
            }
        }
        let mut off = k0;
        for (sig, fib) in s.sigmas.iter().zip(&s.fibers) {
            let w = sig.jet(&x[..k0]);
            let k = fib.size();
            let f = fib.jets(&x[off..off + k]);
            for i in 0..k {
                for j in 0..k {
                    out[(off + i, off + j)] = w * f[(i, j)];
                }
            }
            off += k;
        }
        out
    }))
}

/// Splitting audit on the sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub r: usize,
    pub samples: usize,
    pub min_gap: f64,
    pub min_eigenvalue_h: f64,
    /// `max |∂_k h_ij|` with `i, j ≤ r < k`.
    pub first_block_dependence: f64,
    /// `max |∂_k h_ij|` with `k ≤ r < i, j`.
    pub second_block_dependence: f64,
    /// `max |h_ij|` with `i ≤ r < j`.
    pub off_block: f64,
}

fn split_c(l: &SqMat<f64>, ev: &[f64], r: usize) -> SqMat<f64> {
    let n = l.dim();
    let id = SqMat::identity(n);
    let mut a = id.clone();
    let mut b = id.clone();
    for (j, &lam) in ev.iter().enumerate() {
        if j < r {
            a = a.matmul(&l.sub(&id.scale(lam)));
        } else {
            b = b.matmul(&id.scale(lam).sub(l));
        }
    }
    a.add(&b)
}

/// The splitting tensor `C = ∏_{j≤r}(L − λ_j) + ∏_{j>r}(λ_j − L)` and the
/// metric `h(u, v) = g(C⁻¹u, v)`. The eigenvalues come from a numerical
/// eigensolver, so `h` carries central-difference derivatives.
pub fn split(g: &MetricField, l: &EndomorphismField, r: usize, samples: usize, tau_deg: f64) -> Result<(MetricField, SplitReport)> {
    let n = g.dim();
    if r == 0 || r >= n {
        return Err(GeomError::InvalidSpec(format!("split index r = {r} must satisfy 1 ≤ r < {n}")));
    }
    let pts = g.chart().halton(samples, 0);
    let mut min_gap = f64::INFINITY;
    for x in &pts {
        let gm = g.g(x)?;
        let (ev, _) = symmetric_pencil(&gm.matmul(&l.l(x)?).symmetrize(), &gm)?;
        let gap = ev[r] - ev[r - 1];
        let radius = ev.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if gap <= tau_deg * (1.0 + radius) {
            return Err(GeomError::GapViolated { point: x.clone(), r, gap });
        }
        min_gap = min_gap.min(gap);
    }
    let (gf, lf) = (g.clone(), l.clone());
    let field = MatrixField::numeric(n, n, move |x| {
        let nan = || SqMat::scalar(n, f64::NAN);
        let (Ok(gm), Ok(lm)) = (gf.field().at(x, Order::Value), lf.field().at(x, Order::Value)) else {
            return nan();
        };
        let (gm, lm) = (gm.values().symmetrize(), lm.values());
        let Ok((ev, _)) = symmetric_pencil(&gm.matmul(&lm).symmetrize(), &gm) else { return nan() };
        match split_c(&lm, &ev, r).inverse() {
            Ok(ci) => ci.transpose().matmul(&gm).symmetrize(),
            Err(_) => nan(),
        }
    });
    let h = MetricField::new(g.chart().clone(), field)?;
    let rows: Vec<Result<(f64, f64, f64, f64)>> = pts
        .par_iter()
        .map(|x| {
            let hj = h.at(x, Order::First)?;
            let hv = hj.values();
            let lo = symmetric_eigenvalues(&hv)[0];
            let (mut first, mut second, mut off) = (0.0_f64, 0.0_f64, 0.0_f64);
            for i in 0..n {
                for j in 0..n {
                    if (i < r) != (j < r) {
                        off = off.max(hv[(i, j)].abs());
                        continue;
                    }
                    for k in 0..n {
                        let d = hj[(i, j)].d(k).abs();
                        if i < r && k >= r {
                            first = first.max(d);
                        }
                        if i >= r && k < r {
                            second = second.max(d);
                        }
                    }
                }
            }
            Ok((lo, first, second, off))
        })
        .collect();
    let mut report = SplitReport {
        r,
        samples,
        min_gap,
        min_eigenvalue_h: f64::INFINITY,
        first_block_dependence: 0.0,
        second_block_dependence: 0.0,
        off_block: 0.0,
    };
    for row in rows {
        let (lo, a, b, c) = row?;
        report.min_eigenvalue_h = report.min_eigenvalue_h.min(lo);
        report.first_block_dependence = report.first_block_dependence.max(a);
        report.second_block_dependence = report.second_block_dependence.max(b);
        report.off_block = report.off_block.max(c);
    }
    Ok((h, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineReport {
    pub samples: usize,
    pub max_deviation: f64,
    pub worst_point: Vec<f64>,
    pub threshold: f64,
    pub passed: bool,
}

/// `max ‖Γ(g) − Γ(ḡ)‖` (componentwise) over the given points.
pub fn affine_equivalence_check(pair: &MetricPair, samples: &[Vec<f64>], threshold: f64) -> Result<AffineReport> {
    let mut worst = (0.0, Vec::new());
    for x in samples {
        let d = christoffel(&pair.g, x)?.max_diff(&christoffel(&pair.gbar, x)?);
        if d > worst.0 || worst.1.is_empty() {
            worst = (d, x.clone());
        }
    }
    Ok(AffineReport {
        samples: samples.len(),
        max_deviation: worst.0,
        worst_point: worst.1,
        threshold,
        passed: worst.0 <= threshold,
    })
}

/// Multiplicity pattern of `L`'s eigenvalues at `x` (via the pencil with `g`).
pub fn multiplicity_pattern(g: &MetricField, l: &EndomorphismField, x: &[f64], tau_deg: f64) -> Result<Vec<(f64, usize)>> {
    let gm = g.g(x)?;
    let (ev, _) = symmetric_pencil(&gm.matmul(&l.l(x)?).symmetrize(), &gm)?;
    Ok(cluster(&ev, tau_deg))
}

fn block_metric_1d(amp: f64, freq: f64, shift: f64) -> MatrixField {
    MatrixField::new(1, 1, move |x| {
        let s = (x[0] * freq + shift).sin();
        SqMat::scalar(1, s * s * amp + 1.0)
    })
}

fn block_metric_2d(a: f64, b: f64, c: f64) -> MatrixField {
    MatrixField::new(2, 2, move |x| {
        let u = x[0];
        let v = x[1];
        let m00 = (u * a).sin() + 2.0;
        let m01 = (v * b).cos() * 0.3;
        let m11 = u * u * c + 1.5;
        SqMat::from_fn(2, |i, j| match (i, j) {
            (0, 0) => m00,
            (1, 1) => m11,
            _ => m01,
        })
    })
}

/// Which size-1 blocks of a random spec get a nonconstant eigenfunction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenStyle {
    /// Each with probability ½.
    Mixed,
    Constant,
    /// All of them.
    Varying,
}

/// A randomized Levi-Civita spec with the given block sizes, on `(-half, half)^n`.
///
/// Eigenvalues live in disjoint bands `φ_i ∈ (2i + 1, 2i + 2)`, so ordering
/// and positivity hold everywhere.
pub fn random_spec(seed: u64, sizes: &[usize], half: f64, style: EigenStyle) -> Result<LeviCivitaSpec> {
    use rand::Rng;
    let mut rng = sampling::rng(seed);
    let n: usize = sizes.iter().sum();
    let chart = Chart::cube(n, -half, half)?;
    let mut blocks = Vec::new();
    for (i, &k) in sizes.iter().enumerate() {
        let centre = 2.0 * i as f64 + 1.5;
        let metric = if k == 1 {
            block_metric_1d(rng.gen_range(0.1..0.8), rng.gen_range(0.3..1.5), rng.gen_range(-1.0..1.0))
        } else if k == 2 {
            block_metric_2d(rng.gen_range(0.3..1.2), rng.gen_range(0.3..1.2), rng.gen_range(0.05..0.3))
        } else {
            let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..2.0)).collect();
            MatrixField::new(k, k, move |x| {
                SqMat::from_fn(k, |r, c| if r == c { (x[r] * 0.5).cos() * 0.3 + w[r] } else { Jet::constant(0.0) })
            })
        };
        let coin = rng.gen_bool(0.5);
        let varying = k == 1
            && match style {
                EigenStyle::Mixed => coin,
                EigenStyle::Constant => false,
                EigenStyle::Varying => true,
            };
        let block = if varying {
            let (amp, freq, shift) = (rng.gen_range(0.1..0.45), rng.gen_range(0.3..1.2), rng.gen_range(-1.0..1.0));
            let phi = ScalarField::closed(1, move |t| (t[0] * freq + shift).sin() * amp + centre);
            LcBlock::varying(phi, metric)
        } else {
            LcBlock::constant(centre + rng.gen_range(-0.4..0.4), metric)
        };
        blocks.push(block);
    }
    LeviCivitaSpec::new(chart, blocks)
}

/// `C(1 − tanh² y)dy² + (1 − tanh y)dy₁² + (1 + tanh y)dy₃²` in `(y, y₁, y₃)`,
/// an adjusted metric of constant curvature `1/(4C)`.
pub fn tanh_adjusted_metric(c: f64, chart: Chart) -> Result<MetricField> {
    if !(c > 0.0) {
        return Err(GeomError::InvalidSpec(format!("tanh metric needs C > 0, got {c}")));
    }
    let base = MatrixField::new(1, 1, move |x| {
        let t = x[0].tanh();
        SqMat::scalar(1, (Jet::constant(1.0) - t * t) * c)
    });
    let s1 = ScalarField::closed(1, |x| Jet::constant(1.0) - x[0].tanh());
    let s2 = ScalarField::closed(1, |x| x[0].tanh() + 1.0);
    let spec = WarpedSpec::new(base, vec![s1, s2], vec![MatrixField::identity(1, 1), MatrixField::identity(1, 1)])?;
    adjusted_metric(&spec, chart)
}
