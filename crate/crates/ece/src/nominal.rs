//! Nominal regret coefficients.
//!
//! A base learner is advertised with a known coefficient `R` such that, when
//! its model class is well-specified, its cumulative regret stays below
//! `R(d, H, log(T/delta)) * sqrt(t)` for all `t` with high probability. The
//! meta-algorithm treats `R` as an input; absolute constants are unspecified
//! by theory, so the concrete forms here carry a configurable scale.

use serde::{Deserialize, Serialize};

/// Closed-form families for the coefficient evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "form")]
pub enum CoefficientForm {
    /// Identically zero (scripted optimal learners).
    Zero,
    /// Constant, independent of `(d, H, log)`.
    Constant { value: f64 },
    /// `scale * sqrt(d^3 H^4) * (log_term + ln(d H))`: the optimism-based
    /// linear-MDP rate, with `log^2` pulled out of the square root.
    LinearMdp { scale: f64 },
}

/// A coefficient evaluator bound to a model complexity `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalCoefficient {
    pub complexity_d: usize,
    #[serde(flatten)]
    pub form: CoefficientForm,
}

impl NominalCoefficient {
    pub fn zero(complexity_d: usize) -> Self {
        NominalCoefficient { complexity_d, form: CoefficientForm::Zero }
    }

    pub fn constant(complexity_d: usize, value: f64) -> Self {
        NominalCoefficient { complexity_d, form: CoefficientForm::Constant { value } }
    }

    pub fn linear_mdp(complexity_d: usize, scale: f64) -> Self {
        NominalCoefficient { complexity_d, form: CoefficientForm::LinearMdp { scale } }
    }

    /// Evaluates `R(d, H, log_term)`; nonnegative and monotone nondecreasing
    /// in every argument.
    pub fn evaluate(&self, horizon: usize, log_term: f64) -> f64 {
        let d = self.complexity_d as f64;
        let h = horizon as f64;
        match self.form {
            CoefficientForm::Zero => 0.0,
            CoefficientForm::Constant { value } => value,
            CoefficientForm::LinearMdp { scale } => {
                scale * (d.powi(3) * h.powi(4)).sqrt() * (log_term + (d * h).ln()).max(0.0)
            }
        }
    }

    /// Samples a small grid and reports whether the evaluator is monotone
    /// nondecreasing in `d`, `H`, and the log argument.
    pub fn check_monotone(&self) -> bool {
        let ds = [1usize, 2, 4, 16, 64];
        let hs = [1usize, 2, 5, 20];
        let logs = [0.5f64, 1.0, 3.0, 10.0, 30.0];
        for (i, &d) in ds.iter().enumerate() {
            for (j, &h) in hs.iter().enumerate() {
                for (k, &x) in logs.iter().enumerate() {
                    let probe = NominalCoefficient { complexity_d: d, form: self.form };
                    let base = probe.evaluate(h, x);
                    if i + 1 < ds.len() {
                        let bigger = NominalCoefficient { complexity_d: ds[i + 1], form: self.form };
                        if bigger.evaluate(h, x) < base {
                            return false;
                        }
                    }
                    if j + 1 < hs.len() && probe.evaluate(hs[j + 1], x) < base {
                        return false;
                    }
                    if k + 1 < logs.len() && probe.evaluate(h, logs[k + 1]) < base {
                        return false;
                    }
                }
            }
        }
        true
    }
}
