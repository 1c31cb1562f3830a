//! Geodesic flow as the Hamiltonian system `H(x,p) = ½ g^{ij}(x) p_i p_j`,
//! integrated with an adaptive Dormand–Prince 5(4) pair.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::field::{MetricField, PhaseState};
use crate::jet::Order;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum TrajectoryStatus {
    Completed,
    /// A stage left the open chart; the trajectory stops at `t`.
    ExitedChart { t: f64 },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    derivs: Vec<Vec<f64>>,
    pub status: TrajectoryStatus,
    pub accepted: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last(&self) -> &PhaseState {
        self.states.last().unwrap()
    }

    /// Cubic Hermite interpolation between accepted steps.
    pub fn dense(&self, t: f64) -> PhaseState {
        let n = self.states[0].x.len();
        let t = t.clamp(self.times[0], self.end_time());
        let k = match self.times.binary_search_by(|a| a.total_cmp(&t)) {
            Ok(k) => return self.states[k].clone(),
            Err(k) => k.clamp(1, self.times.len() - 1),
        };
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let y0 = pack(&self.states[k - 1]);
        let y1 = pack(&self.states[k]);
        let (f0, f1) = (&self.derivs[k - 1], &self.derivs[k]);
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        let y: Vec<f64> =
            (0..2 * n).map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i]).collect();
        unpack(&y, n)
    }

    /// `count + 1` equally spaced dense samples over the covered interval.
    pub fn resample(&self, count: usize) -> Vec<(f64, PhaseState)> {
        let (a, b) = (self.times[0], self.end_time());
        (0..=count)
            .map(|i| {
                let t = a + (b - a) * i as f64 / count as f64;
                (t, self.dense(t))
            })
            .collect()
    }
}

fn pack(s: &PhaseState) -> Vec<f64> {
    let mut y = s.x.clone();
    y.extend_from_slice(&s.p);
    y
}

fn unpack(y: &[f64], n: usize) -> PhaseState {
    PhaseState { x: y[..n].to_vec(), p: y[n..].to_vec() }
}

/// `H(x, p)`.
pub fn hamiltonian(g: &MetricField, s: &PhaseState) -> Result<f64> {
    s.energy(g)
}

/// Hamilton's equations: `ẋ = g⁻¹p`, `ṗ_k = ½ vᵀ(∂_k g)v` with `v = g⁻¹p`.
pub fn geodesic_rhs(g: &MetricField, y: &[f64]) -> Result<Vec<f64>> {
    let n = g.dim();
    let gj = g.at(&y[..n], Order::First)?;
    let gv = gj.values();
    let v = gv.inverse()?.matvec(&y[n..]);
    let mut out = v.clone();
    for k in 0..n {
        let dk = gj.partial(k).values();
        out.push(0.5 * dk.bilinear(&v, &v));
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(GeomError::FieldEvaluation { point: y[..n].to_vec() });
    }
    Ok(out)
}

// the flow is autonomous, so the stage nodes c_i are not needed
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// difference between the 5th- and 4th-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

enum StepOutcome {
    Done { y: Vec<f64>, f: Vec<f64>, err: f64 },
    Outside,
}

fn try_step(g: &MetricField, y: &[f64], f0: &[f64], h: f64, tol: f64) -> Result<StepOutcome> {
    let m = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(f0.to_vec());
    for s in 1..7 {
        let ys: Vec<f64> = (0..m).map(|i| y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>()).collect();
        match geodesic_rhs(g, &ys) {
            Ok(f) => k.push(f),
            Err(GeomError::OutsideChart { .. }) => return Ok(StepOutcome::Outside),
            Err(e) => return Err(e),
        }
    }
    // FSAL: stage 7 is evaluated at the 5th-order solution
    let y_new: Vec<f64> = (0..m).map(|i| y[i] + h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>()).collect();
    let mut acc = 0.0;
    for i in 0..m {
        let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
        let sc = tol + tol * y[i].abs().max(y_new[i].abs());
        acc += (e / sc).powi(2);
    }
    Ok(StepOutcome::Done { y: y_new, f: k.pop().unwrap(), err: (acc / m as f64).sqrt() })
}

/// Integrates the geodesic flow of `g` from `s0` over `[0, duration]`.
///
/// Error control uses an RMS norm with absolute and relative tolerance both
/// equal to `tol`. The run stops with [`TrajectoryStatus::ExitedChart`] when
/// the solution cannot stay inside the open chart.
pub fn integrate_geodesic(g: &MetricField, s0: &PhaseState, duration: f64, tol: f64) -> Result<Trajectory> {
    let n = g.dim();
    if s0.x.len() != n || s0.p.len() != n {
        return Err(GeomError::DimensionMismatch { expected: n, got: s0.x.len() });
    }
    g.chart().check(&s0.x)?;
    if !(tol > 0.0 && duration > 0.0) {
        return Err(GeomError::InvalidSpec(format!("tol = {tol}, T = {duration}")));
    }
    let h_min = 1e-12 * duration;
    let h_exit = 1e-9 * duration;
    let mut y = pack(s0);
    let mut f = geodesic_rhs(g, &y)?;
    let mut t = 0.0;

    // starting step from the scale of the solution and its derivative
    let norm = |v: &[f64], y: &[f64]| {
        (v.iter().zip(y).map(|(a, b)| (a / (tol + tol * b.abs())).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let d0 = norm(&y, &y);
    let d1 = norm(&f, &y);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(0.1 * duration).max(h_min);

    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![s0.clone()],
        derivs: vec![f.clone()],
        status: TrajectoryStatus::Completed,
        accepted: 0,
        rejected: 0,
    };
    let mut last_rejected = false;
    while t < duration {
        let last = duration - t <= h * (1.0 + 1e-12);
        if last {
            h = duration - t;
        }
        match try_step(g, &y, &f, h, tol)? {
            StepOutcome::Outside => {
                traj.rejected += 1;
                h *= 0.5;
                if h < h_exit {
                    traj.status = TrajectoryStatus::ExitedChart { t };
                    return Ok(traj);
                }
                last_rejected = true;
            }
            StepOutcome::Done { y: y_new, f: f_new, err } => {
                if err <= 1.0 {
                    t = if last { duration } else { t + h };
                    y = y_new;
                    f = f_new;
                    traj.times.push(t);
                    traj.states.push(unpack(&y, n));
                    traj.derivs.push(f.clone());
                    traj.accepted += 1;
                    let mut factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if last_rejected {
                        factor = factor.min(1.0);
                    }
                    h *= factor;
                    last_rejected = false;
                } else {
                    traj.rejected += 1;
                    h *= (0.9 * err.powf(-0.2)).max(0.2);
                    last_rejected = true;
                    if h < h_min {
                        return Err(GeomError::StepUnderflow { t, h_min });
                    }
                }
            }
        }
    }
    Ok(traj)
}
