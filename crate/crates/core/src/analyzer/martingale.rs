use serde::{Deserialize, Serialize};

use crate::protocol::{Evaluator, Transcript};
use crate::{Error, Result, Scalar};

/// Tolerance for the float-mode identities; exact mode compares with `==`.
const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoobCheck {
    pub c: f64,
    /// `Pr[max_k S_k >= c]`.
    pub sup_probability: f64,
    /// `E[S_ℓ]/c`.
    pub bound: f64,
    pub passed: bool,
}

/// Honest-play checks of the Doob martingale `S_k = E[out | prefix_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub exact: bool,
    pub prefixes_checked: usize,
    /// Prefixes where `Σ_m Q(m)·S(t∥m) ≠ S(t)`.
    pub tower_violations: usize,
    /// Prefixes where the jumps are not centered.
    pub centering_violations: usize,
    pub expected_outcome: f64,
    /// `Var[Σ X_k] = Var[output]`.
    pub output_variance: f64,
    /// `Σ_k E[Var[X_k | prefix]]`.
    pub increment_variance_sum: f64,
    pub orthogonality_holds: bool,
    pub doob: Vec<DoobCheck>,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.tower_violations == 0
            && self.centering_violations == 0
            && self.orthogonality_holds
            && self.doob.iter().all(|d| d.passed)
    }
}

/// Walks the whole honest tree. `grid` lists the Doob thresholds `c > 0`.
pub fn martingale_diagnostics<S: Scalar>(eval: &Evaluator<S>, grid: &[f64]) -> Result<MartingaleReport> {
    if grid.iter().any(|c| *c <= 0.0) {
        return Err(Error::InvalidParameter("Doob thresholds must be positive".into()));
    }
    let rounds = eval.protocol().num_rounds();
    let mut prefixes = 0usize;
    let mut tower = 0usize;
    let mut centering = 0usize;
    let mut inc_var = S::zero();
    let mut leaves: Vec<(S, S, bool)> = Vec::new();
    let root_value = eval.value(&Transcript::new())?;
    let mut stack = vec![(Transcript::new(), S::one(), root_value.clone())];
    while let Some((t, prob, running_max)) = stack.pop() {
        prefixes += 1;
        if prefixes > eval.budget() {
            return Err(Error::BudgetExceeded { budget: eval.budget() });
        }
        if t.len() == rounds {
            leaves.push((prob, running_max, eval.protocol().output(&t)?));
            continue;
        }
        let view = eval.view(&t)?;
        let mut mixed = S::zero();
        for (p, j) in view.probs.iter().zip(&view.jumps) {
            mixed = mixed + p.clone() * (view.value.clone() + j.clone());
        }
        if !mixed.approx_eq(&view.value, TOLERANCE) {
            tower += 1;
        }
        if !view.jump_mean().approx_eq(&S::zero(), TOLERANCE) {
            centering += 1;
        }
        inc_var = inc_var + prob.clone() * view.variance.clone();
        for ((m, p), j) in view.messages().zip(&view.probs).zip(&view.jumps) {
            let s = view.value.clone() + j.clone();
            let max = if s > running_max { s } else { running_max.clone() };
            stack.push((t.extended(m), prob.clone() * p.clone(), max));
        }
    }
    let mean = leaves.iter().filter(|l| l.2).fold(S::zero(), |a, l| a + l.0.clone());
    let out_var = leaves.iter().fold(S::zero(), |a, (p, _, out)| {
        let d = (if *out { S::one() } else { S::zero() }) - mean.clone();
        a + p.clone() * d.clone() * d
    });
    let doob = grid
        .iter()
        .map(|&c| {
            let cs = S::from_f64(c);
            let sup = leaves
                .iter()
                .filter(|l| l.1 >= cs)
                .fold(S::zero(), |a, l| a + l.0.clone());
            let bound = mean.clone() / cs;
            DoobCheck {
                c,
                sup_probability: sup.to_f64(),
                bound: bound.to_f64(),
                passed: sup <= bound || (!S::EXACT && sup.to_f64() <= bound.to_f64() + TOLERANCE),
            }
        })
        .collect();
    Ok(MartingaleReport {
        exact: S::EXACT,
        prefixes_checked: prefixes,
        tower_violations: tower,
        centering_violations: centering,
        expected_outcome: mean.to_f64(),
        output_variance: out_var.to_f64(),
        increment_variance_sum: inc_var.to_f64(),
        orthogonality_holds: out_var.approx_eq(&inc_var, TOLERANCE),
        doob,
    })
}
