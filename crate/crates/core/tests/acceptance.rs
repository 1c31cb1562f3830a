//! End-to-end acceptance suite: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use projeq_core::field::{Chart, EndomorphismField, MatrixField, MetricField, PhaseState, ScalarField};
use projeq_core::integrable::{
    conservation_audit, halton_pairs, integral_roots, ordering_audit, poisson_with_scale, random_states, IntegralFamily,
    MomentumQuadratic, SpectrumProfile,
};
use projeq_core::levi_civita::{affine_equivalence_check, build_lc_pair, random_spec, tanh_adjusted_metric, EigenStyle, LcPair};
use projeq_core::linalg::{symmetric_pencil, SqMat};
use projeq_core::metric::{projective_weyl, sectional};
use projeq_core::projective::{
    beltrami_check, bm_from_flow_field, bm_residual, l_from_pair_field, nijenhuis_torsion, weyl_defect, MetricPair,
    ProjectiveFlowSpec,
};
use projeq_core::sampling;
use projeq_core::surface2d::{
    builtin_example, classify_model, liouville_build, partner_definiteness, principal_form, torus_margin, LiouvilleData,
    ModelTag, QuadraticIntegral2D,
};
use projeq_core::{Jet, Result, Tolerances};

const SEED: u64 = 20240611;
const HALF: f64 = 10.0;
const T_GRID: [f64; 5] = [-1.0, 0.0, 2.0, 4.5, 9.0];

#[derive(Clone, Debug, PartialEq, Serialize)]
struct Outcome {
    id: u32,
    title: &'static str,
    passed: bool,
    measured: f64,
    threshold: f64,
    detail: Value,
}

fn outcome(id: u32, title: &'static str, passed: bool, measured: f64, threshold: f64, detail: Value) -> Outcome {
    Outcome { id, title, passed, measured, threshold, detail }
}

const SIZES: [&[usize]; 5] = [&[1, 1], &[2, 1], &[1, 1, 1], &[1, 2, 1], &[2, 2]];

fn specs(seed: u64) -> Result<Vec<(Vec<usize>, LcPair)>> {
    SIZES
        .iter()
        .enumerate()
        .map(|(i, s)| Ok((s.to_vec(), build_lc_pair(&random_spec(seed + i as u64, s, HALF, EigenStyle::Mixed)?)?)))
        .collect()
}

fn varying_3d(seed: u64) -> Result<LcPair> {
    build_lc_pair(&random_spec(seed ^ 0x3d, &[1, 1, 1], HALF, EigenStyle::Varying)?)
}

fn c1_bm(pairs: &[(Vec<usize>, LcPair)], tol: &Tolerances) -> Result<Outcome> {
    let mut worst = 0.0_f64;
    let mut per = Vec::new();
    for (sizes, p) in pairs {
        let mut m = 0.0_f64;
        for x in p.g.chart().halton(500, 0) {
            m = m.max(bm_residual(&p.g, &p.l, &x)?);
        }
        per.push(json!({"blocks": sizes, "max_residual": m}));
        worst = worst.max(m);
    }
    Ok(outcome(1, "BM construction soundness", worst <= tol.bm_tol, worst, tol.bm_tol, json!(per)))
}

fn c2_conservation(seed: u64, pairs: &[(Vec<usize>, LcPair)], tol: &Tolerances) -> Result<Outcome> {
    let mut runs: Vec<(String, MetricField, Vec<MomentumQuadratic>)> = Vec::new();
    for (sizes, p) in pairs {
        let fam = IntegralFamily::new(p.g.clone(), p.l.clone())?;
        let ints = T_GRID.iter().map(|&t| fam.as_quadratic(t)).collect();
        runs.push((format!("lc {sizes:?}"), p.g.clone(), ints));
    }
    for name in ["example1", "example2", "torus"] {
        let b = builtin_example(name, 1.0)?;
        runs.push((name.to_string(), b.metric, b.integrals));
    }
    let mut worst = 0.0_f64;
    let mut detail = Vec::new();
    for (i, (name, g, ints)) in runs.iter().enumerate() {
        let states = random_states(g, 20, seed + 100 + i as u64, 0.2)?;
        let r = conservation_audit(g, ints, &states, 5.0, tol.integrator_tol, tol.drift_bound)?;
        let m = r.rows.iter().map(|row| row.max_relative_drift).fold(0.0, f64::max);
        worst = worst.max(m);
        detail.push(json!({"scenario": name, "report": r}));
    }
    Ok(outcome(2, "integral conservation", worst <= tol.drift_bound, worst, tol.drift_bound, json!(detail)))
}

fn phase_points(g: &MetricField, count: usize, seed: u64) -> Vec<PhaseState> {
    let mut rng = sampling::rng(seed);
    g.chart()
        .shrink(0.3)
        .halton(count, 3)
        .into_iter()
        .map(|x| PhaseState::new(x, (0..g.dim()).map(|_| sampling::normal(&mut rng)).collect()))
        .collect()
}

fn c3_commutation(seed: u64, p: &LcPair, tol: &Tolerances) -> Result<Outcome> {
    let fam = IntegralFamily::new(p.g.clone(), p.l.clone())?;
    let quads: Vec<MomentumQuadratic> = T_GRID.iter().map(|&t| fam.as_quadratic(t)).collect();
    let mut worst = 0.0_f64;
    let mut at = Vec::new();
    for (k, s) in phase_points(&p.g, 1000, seed + 3).iter().enumerate() {
        let (i, j) = (k % 5, (k / 5 + 1 + k % 5) % 5);
        let (i, j) = if i == j { (i, (j + 1) % 5) } else { (i, j) };
        let (br, scale) = poisson_with_scale(&quads[i], &quads[j], s)?;
        let rel = br.abs() / scale.max(f64::MIN_POSITIVE);
        if rel > worst {
            worst = rel;
            at = s.x.clone();
        }
    }
    let thr = tol.commute_tol;
    Ok(outcome(3, "commutation", worst <= thr, worst, thr, json!({"phase_points": 1000, "worst_point": at})))
}

fn c4_interlacing(seed: u64, p: &LcPair, tol: &Tolerances) -> Result<Outcome> {
    let fam = IntegralFamily::new(p.g.clone(), p.l.clone())?;
    let mut worst = f64::NEG_INFINITY;
    for s in phase_points(&p.g, 1000, seed + 4) {
        let gm = p.g.g(&s.x)?;
        let (ev, _) = symmetric_pencil(&gm.matmul(&p.l.l(&s.x)?).symmetrize(), &gm)?;
        let roots = integral_roots(&fam, &s, tol.tau_deg)?;
        for (i, t) in roots.iter().enumerate() {
            worst = worst.max(ev[i] - t).max(t - ev[i + 1]);
        }
    }
    let profile = SpectrumProfile::new(p.g.clone(), p.l.clone(), tol.tau_deg);
    let ord = ordering_audit(&profile, &halton_pairs(p.g.chart(), 1000), 16, tol.tau_ord)?;
    let passed = worst <= tol.interlace_slack && ord.passed;
    Ok(outcome(
        4,
        "interlacing and global ordering",
        passed,
        worst,
        tol.interlace_slack,
        json!({"max_interlace_violation": worst, "ordering": ord}),
    ))
}

/// `4/(1 ± |x|²)² δ`: the round sphere (+) and the hyperbolic ball (−).
fn conformal(chart: Chart, sign: f64) -> MetricField {
    MetricField::from_fn(chart, move |x| {
        let r2 = x.iter().fold(Jet::constant(0.0), |acc, v| acc + *v * *v);
        SqMat::scalar(x.len(), (r2 * sign + 1.0).powi(2).recip() * 4.0)
    })
}

fn c5_weyl(p: &LcPair, tol: &Tolerances) -> Result<Outcome> {
    let pair = p.pair();
    let mut defect = 0.0_f64;
    let mut size = 0.0_f64;
    for x in p.g.chart().shrink(0.5).halton(200, 0) {
        defect = defect.max(weyl_defect(&pair, &x)?);
        size = size.max(projective_weyl(&p.g, &x)?.max_abs());
    }
    let ball = Chart::cube(3, -0.5, 0.5)?;
    let constant: Vec<(&str, MetricField)> = vec![
        ("sphere", conformal(ball.clone(), 1.0)),
        ("hyperbolic", conformal(ball, -1.0)),
        ("tanh", tanh_adjusted_metric(2.0, Chart::cube(3, -2.0, 2.0)?)?),
    ];
    let mut wmax = 0.0_f64;
    for (_, g) in &constant {
        for x in g.chart().halton(200, 0) {
            wmax = wmax.max(projective_weyl(g, &x)?.max_abs());
        }
    }
    let passed = defect <= tol.weyl_tol && wmax <= 1e-7 && size > 1e-3;
    Ok(outcome(
        5,
        "projective Weyl invariance",
        passed,
        defect,
        tol.weyl_tol,
        json!({"pair_defect": defect, "pair_weyl_size": size, "constant_curvature_weyl": wmax, "constant_curvature_threshold": 1e-7}),
    ))
}

fn c6_nijenhuis(pairs: &[(Vec<usize>, LcPair)], extra: &LcPair, tol: &Tolerances) -> Result<Outcome> {
    let mut fields: Vec<(String, EndomorphismField, Chart)> = pairs
        .iter()
        .map(|(s, p)| (format!("lc {s:?}"), p.l.clone(), p.g.chart().clone()))
        .collect();
    fields.push(("lc varying".into(), extra.l.clone(), extra.g.chart().clone()));
    let torus = builtin_example("torus", 0.0)?;
    let tpair = MetricPair::new(torus.metric.clone(), torus.partner.clone().expect("torus carries its partner"))?;
    fields.push(("torus".into(), l_from_pair_field(&tpair), torus.metric.chart().shrink(0.5)));
    let sphere = builtin_example("sphere_beltrami", 0.0)?;
    let spec = ProjectiveFlowSpec { v: sphere.generator.clone().expect("sphere carries a generator"), g: sphere.metric.clone() };
    fields.push(("sphere flow".into(), bm_from_flow_field(&spec), sphere.metric.chart().clone()));
    let mut worst = 0.0_f64;
    let mut per = Vec::new();
    for (name, l, chart) in &fields {
        let mut m = 0.0_f64;
        for x in chart.halton(200, 0) {
            m = m.max(nijenhuis_torsion(l, &x)?.max_abs());
        }
        per.push(json!({"structure": name, "max_torsion": m}));
        worst = worst.max(m);
    }
    Ok(outcome(6, "Nijenhuis torsion", worst <= tol.nijenhuis_tol, worst, tol.nijenhuis_tol, json!(per)))
}

fn c7_beltrami(seed: u64, tol: &Tolerances) -> Result<Outcome> {
    let mut rng = sampling::rng(seed + 7);
    let mut worst = 0.0_f64;
    let mut count = 0;
    while count < 5 {
        let a: Matrix3<f64> = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let ata = a.transpose() * a;
        let orth_defect = (ata - Matrix3::identity() * (ata.trace() / 3.0)).norm();
        if a.determinant().abs() < 0.05 || orth_defect < 0.1 {
            continue;
        }
        count += 1;
        for _ in 0..3 {
            let n = Vector3::from_fn(|_, _| sampling::normal(&mut rng));
            worst = worst.max(beltrami_check(&a, &n, 64)?.defect);
        }
    }
    Ok(outcome(7, "Beltrami coplanarity", worst <= tol.coplanarity_tol, worst, tol.coplanarity_tol, json!({"matrices": 5, "circles": 3})))
}

fn c8_classification(seed: u64, tol: &Tolerances) -> Result<Outcome> {
    let mut rng = sampling::rng(seed + 8);
    let chart = Chart::cube(2, -1.0, 1.0)?;
    let c = |re, im| Complex64::new(re, im);
    let mut wrong = Vec::new();
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
            let b_field = ScalarField::parse("3 + x^2 + y^2", &["x", "y"]).expect("fixed text parses");
            let q = QuadraticIntegral2D::from_polynomial(chart.clone(), a, b, g, b_field)?;
            let got = classify_model(&principal_form(&q, tol.fit_tol)?, false, tol.tau_root).tag;
            if got != tag {
                wrong.push(format!("{tag:?} -> {got:?}"));
            }
        }
    }
    let ex = builtin_example("example1", 1.0)?;
    let base = ex.integrals[1].combine(1.0, &ex.integrals[2], 0.5).combine(1.0, &ex.integrals[3], 0.3);
    let h = ex.integrals[0].clone();
    let local = |q: MomentumQuadratic| {
        QuadraticIntegral2D::from_quadratic(&MomentumQuadratic::new("q", chart.clone(), MatrixField::new(2, 2, move |x| q.jets(x))))
    };
    let pf0 = principal_form(&local(base.clone())?, tol.fit_tol)?;
    let m0 = classify_model(&pf0, false, tol.tau_root);
    let mut cov = 0.0_f64;
    for _ in 0..10 {
        let cc = rng.gen_range(0.2..3.0) * [-1.0, 1.0][rng.gen_range(0..2)];
        let d = rng.gen_range(-5.0..5.0);
        let pf = principal_form(&local(base.combine(cc, &h, d))?, tol.fit_tol)?;
        for (u, v) in [(pf.alpha, pf0.alpha), (pf.beta, pf0.beta), (pf.gamma, pf0.gamma)] {
            cov = cov.max((u - v * cc).norm() / (pf0.scale * cc.abs()));
        }
        let m = classify_model(&pf, false, tol.tau_root);
        if m.tag != m0.tag {
            wrong.push(format!("covariance changed {:?} -> {:?}", m0.tag, m.tag));
        }
        for (r, r0) in m.roots.iter().zip(&m0.roots) {
            cov = cov.max((r - r0).norm() / (1.0 + r0.norm()));
        }
    }
    let passed = wrong.is_empty() && cov <= tol.fit_tol;
    Ok(outcome(
        8,
        "2-D classification round-trip and covariance",
        passed,
        cov,
        tol.fit_tol,
        json!({"misclassified": wrong, "per_tag": 20, "covariance_draws": 10, "base_model": m0.tag}),
    ))
}

fn c9_definiteness(tol: &Tolerances) -> Result<Outcome> {
    let gamma = 1.0;
    let data = LiouvilleData {
        chart: Chart::cube(2, -2.0, 2.0)?,
        x_fn: ScalarField::parse(&format!("x^2 + {}", gamma + 0.5), &["x"]).expect("fixed text parses"),
        y_fn: ScalarField::parse("0.5 - y^2", &["y"]).expect("fixed text parses"),
        require_partner: false,
    };
    let lv = liouville_build(&data, tol.ordering_margin)?;
    let ex1 = builtin_example("example1", gamma)?;
    let mut same = 0.0_f64;
    for x in data.chart.halton(50, 0) {
        same = same.max(lv.g.g(&x)?.sub(&ex1.metric.g(&x)?).max_abs());
    }
    let torus = builtin_example("torus", 0.0)?;
    let tdef = partner_definiteness(torus.partner.as_ref().expect("torus carries its partner"), 500, tol.eps_pd)?;
    let margin = torus_margin(torus.metric.chart(), 500);
    let indefinite_found = lv.definiteness.positive_points < lv.definiteness.samples;
    let passed = indefinite_found && tdef.positive_definite_everywhere && margin >= 1.5 && same < 1e-12;
    Ok(outcome(
        9,
        "partner definiteness reports",
        passed,
        margin,
        1.5,
        json!({
            "example1_partner": {"samples": lv.definiteness.samples, "positive_points": lv.definiteness.positive_points,
                                 "min_eigenvalue": lv.definiteness.min_eigenvalue, "worst_point": lv.definiteness.worst_point},
            "example1_metric_match": same,
            "torus_partner_min_eigenvalue": tdef.min_eigenvalue,
            "torus_margin": margin,
        }),
    ))
}

fn c10_affine(seed: u64, tol: &Tolerances) -> Result<Outcome> {
    let constant = build_lc_pair(&random_spec(seed + 10, &[1, 2], HALF, EigenStyle::Constant)?)?;
    let pts = constant.g.chart().shrink(0.5).halton(200, 0);
    let rc = affine_equivalence_check(&constant.pair(), &pts, tol.affine_tol)?;
    let mut min_dev = f64::INFINITY;
    for (i, sizes) in [&[1usize, 1][..], &[1, 2], &[1, 1, 1]].iter().enumerate() {
        let p = build_lc_pair(&random_spec(seed + 20 + i as u64, sizes, HALF, EigenStyle::Varying)?)?;
        let pts = p.g.chart().shrink(0.5).halton(200, 0);
        min_dev = min_dev.min(affine_equivalence_check(&p.pair(), &pts, tol.affine_tol)?.max_deviation);
    }
    let passed = rc.passed && min_dev > 1e-3;
    Ok(outcome(
        10,
        "affine criterion",
        passed,
        rc.max_deviation,
        tol.affine_tol,
        json!({"constant": rc, "nonconstant_min_deviation": min_dev, "nonconstant_threshold": 1e-3}),
    ))
}

fn c11_flow(tol: &Tolerances) -> Result<Outcome> {
    let sphere = builtin_example("sphere_beltrami", 0.0)?;
    let g = sphere.metric.clone();
    let l = bm_from_flow_field(&ProjectiveFlowSpec { v: sphere.generator.clone().expect("generator"), g: g.clone() });
    let mut res = 0.0_f64;
    let mut size = 0.0_f64;
    for x in g.chart().halton(200, 0) {
        res = res.max(bm_residual(&g, &l, &x)?);
        size = size.max(l.l(&x)?.max_abs());
    }
    let mut killing = 0.0_f64;
    let lk = bm_from_flow_field(&ProjectiveFlowSpec { v: sphere.killing.clone().expect("killing"), g: g.clone() });
    for x in g.chart().halton(200, 0) {
        killing = killing.max(lk.l(&x)?.max_abs());
    }
    let ex1 = builtin_example("example1", 1.0)?;
    let lr = bm_from_flow_field(&ProjectiveFlowSpec { v: ex1.killing.clone().expect("killing"), g: ex1.metric.clone() });
    for x in ex1.metric.chart().shrink(0.3).halton(200, 0) {
        killing = killing.max(lr.l(&x)?.max_abs());
    }
    let passed = res <= 1e-6 && killing <= 1e-12 && size > 0.1;
    Ok(outcome(
        11,
        "infinitesimal construction",
        passed,
        res,
        1e-6,
        json!({"generator_structure_size": size, "killing_structure_max": killing, "killing_threshold": 1e-12,
               "bm_tol_default": tol.bm_tol}),
    ))
}

fn c12_tanh(seed: u64) -> Result<Outcome> {
    let chart = Chart::new(vec![(-2.0, 2.0); 3], vec!["y".into(), "y1".into(), "y3".into()])?;
    let g = tanh_adjusted_metric(2.0, chart)?;
    let mut rng = sampling::rng(seed + 12);
    let mut ks = Vec::new();
    for x in g.chart().halton(200, 0) {
        for _ in 0..3 {
            let u: Vec<f64> = (0..3).map(|_| sampling::normal(&mut rng)).collect();
            let v: Vec<f64> = (0..3).map(|_| sampling::normal(&mut rng)).collect();
            ks.push(sectional(&g, &x, &u, &v)?);
        }
    }
    let lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    let passed = spread <= 1e-6 && lo > 0.0;
    Ok(outcome(12, "adjusted-metric curvature", passed, spread, 1e-6, json!({"min": lo, "max": hi, "planes": ks.len()})))
}

fn suite(seed: u64) -> Result<Vec<Outcome>> {
    let tol = Tolerances::default();
    let pairs = specs(seed)?;
    let v3 = varying_3d(seed)?;
    Ok(vec![
        c1_bm(&pairs, &tol)?,
        c2_conservation(seed, &pairs, &tol)?,
        c3_commutation(seed, &v3, &tol)?,
        c4_interlacing(seed, &v3, &tol)?,
        c5_weyl(&v3, &tol)?,
        c6_nijenhuis(&pairs, &v3, &tol)?,
        c7_beltrami(seed, &tol)?,
        c8_classification(seed, &tol)?,
        c9_definiteness(&tol)?,
        c10_affine(seed, &tol)?,
        c11_flow(&tol)?,
        c12_tanh(seed)?,
    ])
}

fn line(o: &Outcome) {
    println!(
        "criterion {:>2} {} {}: measured {:.3e}, threshold {:.1e}",
        o.id,
        if o.passed { "PASS" } else { "FAIL" },
        o.title,
        o.measured,
        o.threshold
    );
}

fn main() -> ExitCode {
    let start = Instant::now();
    let first = match suite(SEED) {
        Ok(v) => v,
        Err(e) => {
            println!("acceptance suite aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    for o in &first {
        line(o);
        if !o.passed || std::env::var_os("ACCEPTANCE_DETAIL").is_some() {
            println!("    detail: {}", o.detail);
        }
    }
    let second = suite(SEED);
    let a = serde_json::to_string(&first).expect("reports serialize");
    let b = second.map(|s| serde_json::to_string(&s).expect("reports serialize"));
    let same = b.as_ref().map(|b| *b == a).unwrap_or(false);
    let det = outcome(13, "determinism", same, if same { 0.0 } else { 1.0 }, 0.0, json!({"bytes": a.len()}));
    line(&det);
    println!("acceptance suite finished in {:.1}s", start.elapsed().as_secs_f64());
    if first.iter().all(|o| o.passed) && det.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
