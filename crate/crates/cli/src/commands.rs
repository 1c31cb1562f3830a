//! One function per command; each returns the report and leaves file output
//! to the caller, except `geodesic`, which also writes its CSV.

use std::path::Path;

use serde_json::{json, Value};

use projeq_core::field::PhaseState;
use projeq_core::geodesic::{integrate_geodesic, TrajectoryStatus};
use projeq_core::integrable::{conservation_audit, random_states, relative_drift, IntegralFamily, MomentumQuadratic};
use projeq_core::levi_civita::{k_constants, split};
use projeq_core::linalg::SqMat;
use projeq_core::metric::projective_weyl;
use projeq_core::projective::{bm_residual_with, gbar_from_l, l_from_pair, nijenhuis_torsion, weyl_defect, MetricPair};
use projeq_core::surface2d::{
    classify_model, killing_residual, partner_definiteness, principal_form, torus_margin, QuadraticIntegral2D,
};
use projeq_core::GeomError;

use crate::manifest::{RunParams, Scene};
use crate::report::{write_csv, Audit, TRAJECTORY_FILE};
use crate::CliError;

/// Audits plus free-form data for the report.
pub type Outcome = (Vec<Audit>, Value);

fn need<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::Manifest(format!("this command needs {what}")))
}

fn rows(m: &SqMat<f64>) -> Vec<Vec<f64>> {
    m.as_rows()
}

/// Runs `f`; errors that are audit failures become a failed audit.
fn guarded(name: &str, f: impl FnOnce() -> Result<Vec<Audit>, GeomError>) -> Result<Vec<Audit>, CliError> {
    match f() {
        Ok(a) => Ok(a),
        Err(e) => Audit::from_error(name, &e).map(|a| vec![a]).ok_or(CliError::Geom(e)),
    }
}

fn bm_audit(scene: &Scene, run: &RunParams, threshold: f64) -> Result<Vec<Audit>, CliError> {
    let g = &scene.g;
    let l = need(&scene.l, "an endomorphism, a pair, a Levi-Civita spec or a vector field")?;
    let tol = &run.tolerances;
    guarded("bm_residual", || {
        let (mut worst, mut at, mut sum) = (0.0_f64, Vec::new(), 0.0);
        let pts = scene.chart.halton(run.samples, 0);
        for x in &pts {
            let r = bm_residual_with(g, l, x, tol.eps_sym)?;
            sum += r;
            if r > worst || at.is_empty() {
                worst = r;
                at = x.clone();
            }
        }
        let mean = sum / pts.len().max(1) as f64;
        Ok(vec![Audit::at_most("bm_residual", worst, threshold)
            .at(json!({ "point": at }))
            .with(json!({ "samples": pts.len(), "mean": mean, "source": scene.l_source }))])
    })
}

pub fn check_bm(scene: &Scene, run: &RunParams) -> Result<Outcome, CliError> {
    let audits = bm_audit(scene, run, run.tolerances.bm_tol)?;
    Ok((audits, json!({ "dimension": scene.chart.dim() })))
}

const ENTRY_POINTS: usize = 10;

pub fn pair(scene: &Scene, run: &RunParams) -> Result<Outcome, CliError> {
    let tol = &run.tolerances;
    let l = need(&scene.l, "an endomorphism, a pair, a Levi-Civita spec or a vector field")?;
    let mut audits = bm_audit(scene, run, tol.bm_tol)?;
    let pts = scene.chart.halton(ENTRY_POINTS, 0);
    let mut data = json!({ "source": scene.l_source });
    let gbar = match &scene.gbar {
        Some(gb) => Some(gb.clone()),
        None => match gbar_from_l(&scene.g, l, run.samples, tol.eps_spectrum) {
            Ok(gb) => {
                data["gbar_built"] = json!(true);
                Some(gb)
            }
            Err(e) => {
                audits.push(Audit::from_error("partner_construction", &e).ok_or(CliError::Geom(e))?);
                None
            }
        },
    };
    if let Some(gb) = gbar {
        let mut entries = Vec::new();
        let mut round = 0.0_f64;
        for x in &pts {
            let lp = l_from_pair(&MetricPair::new(scene.g.clone(), gb.clone())?, x)?;
            round = round.max(lp.sub(&l.l(x)?).max_abs());
            entries.push(json!({ "point": x, "g": rows(&scene.g.g(x)?), "gbar": rows(&gb.g(x)?), "l": rows(&lp) }));
        }
        let def = partner_definiteness(&gb, run.samples, tol.eps_pd)?;
        audits.push(
            Audit::new("partner_positive_definite", def.positive_definite_everywhere, def.min_eigenvalue, tol.eps_pd)
                .at(json!({ "point": def.worst_point }))
                .with(json!({ "positive_points": def.positive_points, "samples": def.samples })),
        );
        audits.push(Audit::at_most("l_round_trip", round, tol.bm_tol.max(1e-9)));
        data["entries"] = json!(entries);
    }
    Ok((audits, data))
}

fn initial_state(scene: &Scene, run: &RunParams) -> Result<PhaseState, CliError> {
    let init = need(&run.initial, "`run.initial` with x and v")?;
    let n = scene.chart.dim();
    if init.x.len() != n || init.v.len() != n {
        return Err(CliError::Manifest(format!("run.initial: x and v need {n} components")));
    }
    let s = PhaseState::from_velocity(&scene.g, init.x.clone(), &init.v)?;
    if !init.normalize {
        return Ok(s);
    }
    let h = s.energy(&scene.g)?;
    if !(h > 0.0) {
        return Err(GeomError::ZeroVelocity.into());
    }
    let c = (0.5 / h).sqrt();
    Ok(PhaseState::new(s.x, s.p.iter().map(|p| p * c).collect()))
}

fn monitored(scene: &Scene, run: &RunParams) -> Result<Vec<MomentumQuadratic>, CliError> {
    let h = MomentumQuadratic::energy(&scene.g);
    let extra: Vec<_> = scene.integrals.iter().filter(|q| q.name != h.name).cloned().collect();
    let mut out = vec![h];
    out.extend(extra);
    if scene.example.is_none() && scene.liouville.is_none() {
        if let Some(l) = &scene.l {
            let fam = IntegralFamily::new(scene.g.clone(), l.clone())?;
            for &t in &run.t_values {
                let mut q = fam.as_quadratic(t);
                q.name = format!("I_t={t}");
                out.push(q);
            }
        }
    }
    Ok(out)
}

pub fn geodesic(scene: &Scene, run: &RunParams, out: &Path) -> Result<Outcome, CliError> {
    let tol = &run.tolerances;
    let s0 = initial_state(scene, run)?;
    let ints = monitored(scene, run)?;
    let tr = integrate_geodesic(&scene.g, &s0, run.horizon, tol.integrator_tol)?;
    let n = scene.chart.dim();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("p{i}")));
    header.push("H".into());
    header.extend(ints.iter().skip(1).map(|q| q.name.clone()));
    let mut table = Vec::new();
    for (t, s) in tr.resample(run.csv_points.max(2) - 1) {
        let mut row = vec![t];
        row.extend(&s.x);
        row.extend(&s.p);
        for q in &ints {
            row.push(q.value(&s)?);
        }
        table.push(row);
    }
    write_csv(&out.join(TRAJECTORY_FILE), &header, &table)?;
    let mut audits = Vec::new();
    let completed = matches!(tr.status, TrajectoryStatus::Completed);
    let exit_time = match tr.status {
        TrajectoryStatus::ExitedChart { t } => json!({ "time": t, "point": tr.last().x }),
        TrajectoryStatus::Completed => Value::Null,
    };
    audits.push(Audit::new("completed", completed, tr.end_time(), run.horizon).at(exit_time));
    for q in &ints {
        let i0 = q.value(&s0)?;
        let floor = 1e-6 * q.matrix(&s0.x)?.frobenius() * s0.p.iter().map(|p| p * p).sum::<f64>();
        let (mut worst, mut when) = (0.0_f64, 0.0);
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let d = relative_drift(i0, q.value(s)?, floor);
            if d > worst {
                worst = d;
                when = *t;
            }
        }
        audits.push(Audit::at_most(format!("drift {}", q.name), worst, tol.drift_bound).at(json!({ "time": when })));
    }
    let data = json!({
        "csv": TRAJECTORY_FILE,
        "rows": table.len(),
        "accepted_steps": tr.accepted,
        "rejected_steps": tr.rejected,
        "status": tr.status,
    });
    Ok((audits, data))
}

fn conservation_audits(scene: &Scene, run: &RunParams, ints: &[MomentumQuadratic]) -> Result<Outcome, CliError> {
    let tol = &run.tolerances;
    let states = random_states(&scene.g, run.states, run.seed, run.start_fraction)?;
    let rep = conservation_audit(&scene.g, ints, &states, run.horizon, tol.integrator_tol, tol.drift_bound)?;
    let audits = rep
        .rows
        .iter()
        .map(|r| {
            Audit::at_most(format!("drift {}", r.integral), r.max_relative_drift, tol.drift_bound)
                .at(json!({ "state": r.worst_state, "time": r.worst_time, "x0": states[r.worst_state].x }))
        })
        .collect();
    Ok((audits, json!({ "states": rep.states, "horizon": rep.horizon, "exited_chart": rep.exited, "integrals": ints.len() })))
}

pub fn conserve(scene: &Scene, run: &RunParams) -> Result<Outcome, CliError> {
    let ints = monitored(scene, run)?;
    conservation_audits(scene, run, &ints)
}

pub fn weyl(scene: &Scene, run: &RunParams) -> Result<Outcome, CliError> {
    let tol = &run.tolerances;
    let pts = scene.chart.halton(run.samples, 0);
    let mut norm_g = 0.0_f64;
    let mut norm_gbar = 0.0_f64;
    let mut defect = (0.0_f64, Vec::new());
    for x in &pts {
        norm_g = norm_g.max(projective_weyl(&scene.g, x)?.max_abs());
        if let Some(gb) = &scene.gbar {
            norm_gbar = norm_gbar.max(projective_weyl(gb, x)?.max_abs());
            let d = weyl_defect(&MetricPair::new(scene.g.clone(), gb.clone())?, x)?;
            if d > defect.0 || defect.1.is_empty() {
                defect = (d, x.clone());
            }
        }
    }
    let mut audits = Vec::new();
    if scene.gbar.is_some() {
        audits.push(Audit::at_most("weyl_pair_invariance", defect.0, tol.weyl_tol).at(json!({ "point": defect.1 })));
    }
    let data = json!({
        "samples": pts.len(),
        "max_weyl_g": norm_g,
        "max_weyl_gbar": if scene.gbar.is_some() { json!(norm_gbar) } else { Value::Null },
    });
    Ok((audits, data))
}

pub fn classify2d(scene: &Scene, run: &RunParams) -> Result<Outcome, CliError> {
    let tol = &run.tolerances;
    if scene.chart.dim() != 2 {
        return Err(GeomError::WrongDimension { expected: 2, got: scene.chart.dim() }.into());
    }
    let name = need(&run.classify, "`run.classify` naming an integral")?;
    let q = scene
        .integrals
        .iter()
        .find(|q| &q.name == name)
        .ok_or_else(|| CliError::Manifest(format!("no integral named `{name}`")))?;
    let qi = QuadraticIntegral2D::from_quadratic(q)?;
    let mut data = Value::Null;
    let audits = guarded("principal_form", || {
        let pf = principal_form(&qi, tol.fit_tol)?;
        let mc = classify_model(&pf, run.has_linear_reduction, tol.tau_root);
        data = json!({
            "integral": name,
            "model": mc.tag,
            "roots": mc.roots,
            "flattening": mc.flattening,
            "alpha": pf.alpha,
            "beta": pf.beta,
            "gamma": pf.gamma,
            "scale": pf.scale,
        });
        Ok(vec![Audit::at_most("polynomial_fit", pf.residual, tol.fit_tol).with(json!({ "samples": pf.samples }))])
    })?;
    Ok((audits, data))
}

pub fn lc_build(scene: &Scene, run: &RunParams) -> Result<Outcome, CliError> {
    let tol = &run.tolerances;
    let spec = need(&scene.lc, "a `levi_civita` geometry")?;
    let l = need(&scene.l, "L")?;
    let mut audits = bm_audit(scene, run, tol.bm_tol)?;
    let mut tors = (0.0_f64, Vec::new());
    for x in scene.chart.halton(run.samples, 0) {
        let t = nijenhuis_torsion(l, &x)?.max_abs();
        if t > tors.0 || tors.1.is_empty() {
            tors = (t, x);
        }
    }
    audits.push(Audit::at_most("nijenhuis", tors.0, tol.nijenhuis_tol).at(json!({ "point": tors.1 })));
    let ks = k_constants(spec, run.curvature, run.samples, tol.constancy_tol)?;
    for k in ks.iter().filter(|k| k.must_be_constant) {
        audits.push(
            Audit::at_most(format!("k_constant block {}", k.block), k.std_dev, tol.constancy_tol * (1.0 + k.mean.abs()))
                .with(json!({ "mean": k.mean, "min": k.min, "max": k.max })),
        );
    }
    let mut data = json!({ "multiplicities": spec.multiplicities(), "k_constants": ks, "partner": scene.gbar.is_some() });
    match &scene.gbar {
        Some(gb) => {
            let def = partner_definiteness(gb, run.samples, tol.eps_pd)?;
            audits.push(
                Audit::new("partner_positive_definite", def.positive_definite_everywhere, def.min_eigenvalue, tol.eps_pd)
                    .at(json!({ "point": def.worst_point })),
            );
            let mut defect = (0.0_f64, Vec::new());
            for x in scene.chart.halton(run.samples.min(50), 0) {
                let d = weyl_defect(&MetricPair::new(scene.g.clone(), gb.clone())?, &x)?;
                if d > defect.0 || defect.1.is_empty() {
                    defect = (d, x);
                }
            }
            audits.push(Audit::at_most("weyl_pair_invariance", defect.0, tol.weyl_tol).at(json!({ "point": defect.1 })));
        }
        None => data["partner_reason"] = json!("some eigenfunction is not positive"),
    }
    Ok((audits, data))
}

pub fn split_cmd(scene: &Scene, run: &RunParams) -> Result<Outcome, CliError> {
    let tol = &run.tolerances;
    let l = need(&scene.l, "L")?;
    let r = *need(&run.split_r, "`run.split_r`")?;
    let mut data = Value::Null;
    let audits = guarded("split", || {
        let (_, rep) = split(&scene.g, l, r, run.samples, tol.tau_deg)?;
        let out = vec![
            Audit::new("h_positive_definite", rep.min_eigenvalue_h > tol.eps_pd, rep.min_eigenvalue_h, tol.eps_pd),
            Audit::at_most("first_block_independent_of_second", rep.first_block_dependence, tol.split_tol),
            Audit::at_most("second_block_independent_of_first", rep.second_block_dependence, tol.split_tol),
            Audit::at_most("block_diagonal", rep.off_block, tol.split_tol),
        ];
        data = json!(rep);
        Ok(out)
    })?;
    Ok((audits, data))
}

pub fn example(scene: &Scene, run: &RunParams) -> Result<Outcome, CliError> {
    let tol = &run.tolerances;
    let bundle = need(&scene.example, "an `example` geometry")?;
    let (mut audits, data) = conservation_audits(scene, run, &scene.integrals)?;
    let expected = |name: &str| bundle.expected.iter().find(|e| e.audit == name).map(|e| e.pass);
    if let Some(pass) = expected("conservation") {
        for a in &mut audits {
            a.expected = Some(pass);
        }
    }
    if let Some(v) = &scene.vector_field {
        let k = killing_residual(&scene.g, v, run.samples, tol.killing_tol)?;
        let mut a = Audit::at_most("killing", k.max_norm, tol.killing_tol).at(json!({ "point": k.worst_point }));
        a.expected = expected("killing");
        audits.push(a);
    }
    if expected("bm_residual").is_some() || expected("bm_from_flow").is_some() {
        let name = if expected("bm_residual").is_some() { "bm_residual" } else { "bm_from_flow" };
        let mut sub = bm_audit(scene, run, tol.bm_tol)?;
        for a in &mut sub {
            a.name = name.to_string();
            a.expected = expected(name);
        }
        audits.extend(sub);
    }
    if let (Some(pass), Some(gb)) = (expected("partner_definite"), &scene.gbar) {
        let def = partner_definiteness(gb, run.samples, tol.eps_pd)?;
        let mut detail = json!({ "positive_points": def.positive_points });
        if bundle.name == "torus" {
            detail["conformal_margin"] = json!(torus_margin(&scene.chart, run.samples));
        }
        audits.push(
            Audit::new("partner_definite", def.positive_definite_everywhere, def.min_eigenvalue, tol.eps_pd)
                .at(json!({ "point": def.worst_point }))
                .with(detail)
                .expecting(pass),
        );
    }
    let mut data = data;
    data["example"] = json!(bundle.name);
    data["gamma"] = json!(bundle.gamma);
    Ok((audits, data))
}
