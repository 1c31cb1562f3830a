//! Manifest format and its translation into core geometry.

use serde::{Deserialize, Serialize};

use projeq_core::field::{Chart, EndomorphismField, MatrixField, MetricField, ScalarField, VectorField};
use projeq_core::integrable::MomentumQuadratic;
use projeq_core::levi_civita::{build_lc_metric, build_lc_pair, Eigenfunction, LcBlock, LeviCivitaSpec};
use projeq_core::projective::{bm_from_flow_field, l_from_pair_field, MetricPair, ProjectiveFlowSpec};
use projeq_core::surface2d::{builtin_example, liouville_build, ExampleBundle, LiouvilleBundle, LiouvilleData};
use projeq_core::{GeomError, Tolerances};

use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    #[serde(default)]
    pub chart: Option<ChartSpec>,
    pub geometry: Geometry,
    /// Row-major `n²` entries of `L`.
    #[serde(default)]
    pub endomorphism: Option<Vec<String>>,
    /// Components of a vector field, for projective flows and Killing checks.
    #[serde(default)]
    pub vector_field: Option<Vec<String>>,
    #[serde(default)]
    pub integrals: Vec<IntegralSpec>,
    #[serde(default)]
    pub run: RunParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub names: Vec<String>,
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// Upper triangle of `g`, row by row.
    Metric { entries: Vec<String> },
    Pair { g: Vec<String>, gbar: Vec<String> },
    LeviCivita { blocks: Vec<BlockSpec> },
    Liouville {
        x: String,
        y: String,
        #[serde(default)]
        require_partner: bool,
    },
    Example {
        name: String,
        #[serde(default = "one")]
        gamma: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// One Levi-Civita block. `phi` is a number or an expression in the block's
/// single coordinate; `metric` is the upper triangle in the block's coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub phi: String,
    pub metric: Vec<String>,
}

/// `I = pᵀKp` with `K` given by its upper triangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralSpec {
    pub name: String,
    pub k: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x: Vec<f64>,
    /// Velocity; rescaled to `H = ½` when `normalize` is set.
    pub v: Vec<f64>,
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub seed: u64,
    pub samples: usize,
    pub states: usize,
    pub horizon: f64,
    /// Fraction of the chart box used for random initial points.
    pub start_fraction: f64,
    pub t_values: Vec<f64>,
    pub tolerances: Tolerances,
    pub initial: Option<InitialState>,
    /// Rows in the trajectory CSV, endpoints included.
    pub csv_points: usize,
    pub split_r: Option<usize>,
    /// Integral to classify (name from `integrals` or the example bundle).
    pub classify: Option<String>,
    pub has_linear_reduction: bool,
    /// Curvature `K` used for the constants `K_i`.
    pub curvature: f64,
}

impl Default for RunParams {
    fn default() -> RunParams {
        RunParams {
            seed: 0,
            samples: 200,
            states: 20,
            horizon: 5.0,
            start_fraction: 0.2,
            t_values: vec![-1.0, 0.0, 1.0, 2.5, 5.0],
            tolerances: Tolerances::default(),
            initial: None,
            csv_points: 201,
            split_r: None,
            classify: None,
            has_linear_reduction: false,
            curvature: 0.0,
        }
    }
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Manifest, CliError> {
        let m: Manifest = serde_json::from_str(text).map_err(|e| CliError::Manifest(e.to_string()))?;
        if m.version != MANIFEST_VERSION {
            return Err(CliError::Manifest(format!("unsupported manifest version {} (expected {MANIFEST_VERSION})", m.version)));
        }
        Ok(m)
    }
}

/// Everything a command may need, built once from the manifest.
#[derive(Clone, Debug)]
pub struct Scene {
    pub chart: Chart,
    pub g: MetricField,
    pub gbar: Option<MetricField>,
    pub l: Option<EndomorphismField>,
    /// Where `L` came from.
    pub l_source: Option<&'static str>,
    pub lc: Option<LeviCivitaSpec>,
    pub liouville: Option<LiouvilleBundle>,
    pub example: Option<ExampleBundle>,
    pub integrals: Vec<MomentumQuadratic>,
    pub vector_field: Option<VectorField>,
}

fn chart_of(spec: &ChartSpec) -> Result<Chart, CliError> {
    Ok(Chart::new(spec.bounds.iter().map(|b| (b[0], b[1])).collect(), spec.names.clone())?)
}

fn upper_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<(), CliError> {
    if got != expected {
        return Err(CliError::Manifest(format!("{what}: expected {expected} entries, got {got}")));
    }
    Ok(())
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn metric(chart: &Chart, entries: &[String], what: &str) -> Result<MetricField, CliError> {
    check_len(what, entries.len(), upper_len(chart.dim()))?;
    MetricField::parse(chart.clone(), &strs(entries)).map_err(|e| CliError::Expression(format!("{what}: {e}")))
}

fn required_chart(m: &Manifest) -> Result<Chart, CliError> {
    m.chart.as_ref().map(chart_of).transpose()?.ok_or_else(|| CliError::Manifest("this geometry needs a `chart` section".into()))
}

fn lc_spec(chart: &Chart, blocks: &[BlockSpec]) -> Result<LeviCivitaSpec, CliError> {
    let names = chart.names();
    let mut offset = 0;
    let mut out = Vec::new();
    for (i, b) in blocks.iter().enumerate() {
        // block size from the triangle length k(k+1)/2
        let k = (1..=chart.dim()).find(|k| upper_len(*k) == b.metric.len()).ok_or_else(|| {
            CliError::Manifest(format!("block {}: metric has {} entries, not a triangle", i + 1, b.metric.len()))
        })?;
        if offset + k > chart.dim() {
            return Err(CliError::Manifest(format!("block {} runs past the chart dimension", i + 1)));
        }
        let local: Vec<&str> = names[offset..offset + k].to_vec();
        let entries = b
            .metric
            .iter()
            .map(|t| ScalarField::parse(t, &local))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Expression(format!("block {} metric: {e}", i + 1)))?;
        let field = MatrixField::symmetric(k, entries);
        let phi = match b.phi.trim().parse::<f64>() {
            Ok(c) => Eigenfunction::Constant(c),
            Err(_) => {
                if k != 1 {
                    return Err(CliError::Manifest(format!("block {}: only 1-dimensional blocks may have a nonconstant phi", i + 1)));
                }
                let f = ScalarField::parse(&b.phi, &local).map_err(|e| CliError::Expression(format!("block {} phi: {e}", i + 1)))?;
                Eigenfunction::Function(f)
            }
        };
        out.push(LcBlock { size: k, phi, metric: field });
        offset += k;
    }
    Ok(LeviCivitaSpec::new(chart.clone(), out)?)
}

fn quadratic(chart: &Chart, spec: &IntegralSpec) -> Result<MomentumQuadratic, CliError> {
    check_len(&format!("integral {}", spec.name), spec.k.len(), upper_len(chart.dim()))?;
    let names = chart.names();
    let entries = spec
        .k
        .iter()
        .map(|t| ScalarField::parse(t, &names))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Expression(format!("integral {}: {e}", spec.name)))?;
    Ok(MomentumQuadratic::new(spec.name.clone(), chart.clone(), MatrixField::symmetric(chart.dim(), entries)))
}

pub fn build_scene(m: &Manifest) -> Result<Scene, CliError> {
    let tol = &m.run.tolerances;
    let mut scene = match &m.geometry {
        Geometry::Metric { entries } => {
            let chart = required_chart(m)?;
            let g = metric(&chart, entries, "metric")?;
            Scene::plain(chart, g)
        }
        Geometry::Pair { g, gbar } => {
            let chart = required_chart(m)?;
            let g = metric(&chart, g, "g")?;
            let gbar = metric(&chart, gbar, "gbar")?;
            let mut s = Scene::plain(chart, g.clone());
            s.l = Some(l_from_pair_field(&MetricPair::new(g, gbar.clone())?));
            s.l_source = Some("pair");
            s.gbar = Some(gbar);
            s
        }
        Geometry::LeviCivita { blocks } => {
            let chart = required_chart(m)?;
            let spec = lc_spec(&chart, blocks)?;
            let mut s = match build_lc_pair(&spec) {
                Ok(p) => {
                    let mut s = Scene::plain(chart, p.g);
                    s.gbar = Some(p.gbar);
                    s.l = Some(p.l);
                    s
                }
                Err(GeomError::NonPositivePhi { .. }) => {
                    let (g, l) = build_lc_metric(&spec)?;
                    let mut s = Scene::plain(chart, g);
                    s.l = Some(l);
                    s
                }
                Err(e) => return Err(e.into()),
            };
            s.l_source = Some("levi_civita");
            s.lc = Some(spec);
            s
        }
        Geometry::Liouville { x, y, require_partner } => {
            let chart = required_chart(m)?;
            if chart.dim() != 2 {
                return Err(CliError::Manifest("liouville geometry needs a 2-dimensional chart".into()));
            }
            let names = chart.names();
            let x_fn = ScalarField::parse(x, &names[..1]).map_err(|e| CliError::Expression(format!("X: {e}")))?;
            let y_fn = ScalarField::parse(y, &names[1..]).map_err(|e| CliError::Expression(format!("Y: {e}")))?;
            let data = LiouvilleData { chart: chart.clone(), x_fn, y_fn, require_partner: *require_partner };
            let b = liouville_build(&data, tol.ordering_margin)?;
            let mut s = Scene::plain(chart, b.g.clone());
            s.l = Some(l_from_pair_field(&MetricPair::new(b.g.clone(), b.gbar.clone())?));
            s.l_source = Some("pair");
            s.gbar = Some(b.gbar.clone());
            s.integrals = vec![b.displayed.clone(), b.integral.clone()];
            s.liouville = Some(b);
            s
        }
        Geometry::Example { name, gamma } => {
            let b = builtin_example(name, *gamma)?;
            let chart = match &m.chart {
                Some(c) => chart_of(c)?,
                None => b.metric.chart().clone(),
            };
            let g = b.metric.with_chart(chart.clone())?;
            let mut s = Scene::plain(chart.clone(), g.clone());
            if let Some(p) = &b.partner {
                let gbar = p.with_chart(chart.clone())?;
                s.l = Some(l_from_pair_field(&MetricPair::new(g.clone(), gbar.clone())?));
                s.l_source = Some("pair");
                s.gbar = Some(gbar);
            }
            s.integrals = b.integrals.iter().map(|q| rechart(q, &chart)).collect();
            if s.l.is_none() {
                if let Some(v) = &b.generator {
                    s.l = Some(bm_from_flow_field(&ProjectiveFlowSpec { v: v.clone(), g: g.clone() }));
                    s.l_source = Some("projective_flow");
                }
            }
            s.vector_field = b.killing.clone();
            s.example = Some(b);
            s
        }
    };
    let n = scene.chart.dim();
    let names = scene.chart.names();
    if let Some(v) = &m.vector_field {
        check_len("vector_field", v.len(), n)?;
        let field = VectorField::parse(&strs(v), &names).map_err(|e| CliError::Expression(format!("vector_field: {e}")))?;
        scene.vector_field = Some(field);
    }
    if let Some(entries) = &m.endomorphism {
        check_len("endomorphism", entries.len(), n * n)?;
        let l = EndomorphismField::parse(scene.chart.clone(), &strs(entries))
            .map_err(|e| CliError::Expression(format!("endomorphism: {e}")))?;
        scene.l = Some(l);
        scene.l_source = Some("manifest");
    } else if scene.l.is_none() {
        if let Some(v) = &scene.vector_field {
            scene.l = Some(bm_from_flow_field(&ProjectiveFlowSpec { v: v.clone(), g: scene.g.clone() }));
            scene.l_source = Some("projective_flow");
        }
    }
    for spec in &m.integrals {
        let chart = scene.chart.clone();
        scene.integrals.push(quadratic(&chart, spec)?);
    }
    Ok(scene)
}

fn rechart(q: &MomentumQuadratic, chart: &Chart) -> MomentumQuadratic {
    let inner = q.clone();
    let n = chart.dim();
    MomentumQuadratic::new(q.name.clone(), chart.clone(), MatrixField::new(n, n, move |x| inner.jets(x)))
}

impl Scene {
    fn plain(chart: Chart, g: MetricField) -> Scene {
        Scene {
            chart,
            g,
            gbar: None,
            l: None,
            l_source: None,
            lc: None,
            liouville: None,
            example: None,
            integrals: Vec::new(),
            vector_field: None,
        }
    }
}
