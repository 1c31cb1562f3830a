//! The single table of numerical thresholds used by audits.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative gap below which two eigenvalues count as equal; scaled by `1 + spectral radius`.
    pub tau_deg: f64,
    pub tau_ord: f64,
    /// Double-root threshold for the principal polynomial; scaled by `1 + |roots|`.
    pub tau_root: f64,
    pub fit_tol: f64,
    pub drift_bound: f64,
    pub integrator_tol: f64,
    pub eps_pd: f64,
    /// Relative asymmetry allowed in `g·L`; scaled by `‖g·L‖`.
    pub eps_sym: f64,
    pub eps_spectrum: f64,
    pub bm_tol: f64,
    pub nijenhuis_tol: f64,
    pub weyl_tol: f64,
    pub affine_tol: f64,
    pub killing_tol: f64,
    pub coplanarity_tol: f64,
    pub commute_tol: f64,
    pub interlace_slack: f64,
    pub ordering_margin: f64,
    pub branch_margin: f64,
    pub constancy_tol: f64,
    /// Cross-block derivatives of the split metric; these come from finite differences.
    pub split_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances {
            tau_deg: 1e-7,
            tau_ord: 1e-8,
            tau_root: 1e-6,
            fit_tol: 1e-8,
            drift_bound: 1e-7,
            integrator_tol: 1e-10,
            eps_pd: 1e-10,
            eps_sym: 1e-9,
            eps_spectrum: 1e-12,
            bm_tol: 1e-8,
            nijenhuis_tol: 1e-6,
            weyl_tol: 1e-6,
            affine_tol: 1e-7,
            killing_tol: 1e-7,
            coplanarity_tol: 1e-12,
            commute_tol: 1e-8,
            interlace_slack: 1e-9,
            ordering_margin: 1e-6,
            branch_margin: 1e-3,
            constancy_tol: 1e-7,
            split_tol: 1e-7,
        }
    }
}

impl Tolerances {
    /// Overrides one entry by name.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "tau_deg" => &mut self.tau_deg,
            "tau_ord" => &mut self.tau_ord,
            "tau_root" => &mut self.tau_root,
            "fit_tol" => &mut self.fit_tol,
            "drift_bound" => &mut self.drift_bound,
            "integrator_tol" => &mut self.integrator_tol,
            "eps_pd" => &mut self.eps_pd,
            "eps_sym" => &mut self.eps_sym,
            "eps_spectrum" => &mut self.eps_spectrum,
            "bm_tol" => &mut self.bm_tol,
            "nijenhuis_tol" => &mut self.nijenhuis_tol,
            "weyl_tol" => &mut self.weyl_tol,
            "affine_tol" => &mut self.affine_tol,
            "killing_tol" => &mut self.killing_tol,
            "coplanarity_tol" => &mut self.coplanarity_tol,
            "commute_tol" => &mut self.commute_tol,
            "interlace_slack" => &mut self.interlace_slack,
            "ordering_margin" => &mut self.ordering_margin,
            "branch_margin" => &mut self.branch_margin,
            "constancy_tol" => &mut self.constancy_tol,
            "split_tol" => &mut self.split_tol,
            other => return Err(GeomError::InvalidSpec(format!("unknown tolerance `{other}`"))),
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(GeomError::InvalidSpec(format!("tolerance {key} = {value} must be positive")));
        }
        *slot = value;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_partial_json() {
        let mut t = Tolerances::default();
        t.set("fit_tol", 1e-6).unwrap();
        assert_eq!(t.fit_tol, 1e-6);
        assert!(t.set("nope", 1.0).is_err());
        assert!(t.set("tau_ord", -1.0).is_err());
        let parsed: Tolerances = serde_json::from_str(r#"{"drift_bound": 1e-5}"#).unwrap();
        assert_eq!(parsed.drift_bound, 1e-5);
        assert_eq!(parsed.tau_root, 1e-6);
    }
}
