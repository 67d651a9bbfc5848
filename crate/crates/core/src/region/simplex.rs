//! Exact primal simplex for `max c.x` subject to `A x <= b`, `x >= 0`, `b >= 0`.
//!
//! Dense tableau over arbitrary-precision rationals, slack basis as the
//! starting point, Bland's rule for both entering and leaving variables.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::dof::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("linear program dimensions disagree: {0}")]
    Dimension(String),
    #[error("right-hand side entry {0} is negative; the slack basis is not feasible")]
    NegativeRhs(usize),
    #[error("objective is unbounded")]
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub constraints: Vec<Vec<Rational>>,
    pub bounds: Vec<Rational>,
    pub objective: Vec<Rational>,
}

/// Optimal primal point, optimal dual point and the final basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub value: Rational,
    pub primal: Vec<Rational>,
    /// One multiplier per constraint row.
    pub dual: Vec<Rational>,
    /// Basic column per row; columns `>= primal.len()` are slacks.
    pub basis: Vec<usize>,
}

impl LinearProgram {
    pub fn new(constraints: Vec<Vec<Rational>>, bounds: Vec<Rational>, objective: Vec<Rational>) -> Result<Self, LpError> {
        if constraints.len() != bounds.len() {
            return Err(LpError::Dimension(format!("{} rows, {} bounds", constraints.len(), bounds.len())));
        }
        if let Some(i) = constraints.iter().position(|r| r.len() != objective.len()) {
            return Err(LpError::Dimension(format!(
                "row {i} has {} entries, objective has {}",
                constraints[i].len(),
                objective.len()
            )));
        }
        if let Some(i) = bounds.iter().position(|b| b.is_negative()) {
            return Err(LpError::NegativeRhs(i));
        }
        Ok(Self {
            constraints,
            bounds,
            objective,
        })
    }

    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn maximize(&self) -> Result<LpSolution, LpError> {
        let n = self.variables();
        let m = self.constraints.len();
        let width = n + m;
        let mut rows: Vec<Vec<Rational>> = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = r.clone();
                row.extend((0..m).map(|s| if s == i { Rational::one() } else { Rational::zero() }));
                row
            })
            .collect();
        let mut rhs = self.bounds.clone();
        // reduced costs: negative entries can still improve the objective
        let mut cost: Vec<Rational> = self.objective.iter().map(|c| -c).chain((0..m).map(|_| Rational::zero())).collect();
        let mut value = Rational::zero();
        let mut basis: Vec<usize> = (n..width).collect();

        while let Some(enter) = cost.iter().position(|c| c.is_negative()) {
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..m {
                if rows[i][enter].is_positive() {
                    let ratio = &rhs[i] / &rows[i][enter];
                    let better = match &leave {
                        None => true,
                        Some((l, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let (pivot_row, _) = leave.ok_or(LpError::Unbounded)?;

            let pivot = rows[pivot_row][enter].clone();
            for x in rows[pivot_row].iter_mut() {
                *x /= &pivot;
            }
            rhs[pivot_row] /= &pivot;
            let pr = rows[pivot_row].clone();
            let prhs = rhs[pivot_row].clone();
            for i in (0..m).filter(|&i| i != pivot_row) {
                let f = rows[i][enter].clone();
                if f.is_zero() {
                    continue;
                }
                for (x, p) in rows[i].iter_mut().zip(&pr) {
                    *x -= &f * p;
                }
                rhs[i] -= &f * &prhs;
            }
            let f = cost[enter].clone();
            for (x, p) in cost.iter_mut().zip(&pr) {
                *x -= &f * p;
            }
            value -= &f * &prhs;
            basis[pivot_row] = enter;
        }

        let mut primal = vec![Rational::zero(); n];
        for (i, &col) in basis.iter().enumerate() {
            if col < n {
                primal[col] = rhs[i].clone();
            }
        }
        Ok(LpSolution {
            value,
            primal,
            dual: cost[n..].to_vec(),
            basis,
        })
    }
}

impl LpSolution {
    /// Re-checks optimality by substitution: primal and dual feasibility and
    /// equal objective values.
    pub fn verify(&self, lp: &LinearProgram) -> bool {
        let dot = |a: &[Rational], b: &[Rational]| a.iter().zip(b).fold(Rational::zero(), |s, (x, y)| s + x * y);
        if self.primal.len() != lp.variables() || self.dual.len() != lp.constraints.len() {
            return false;
        }
        let primal_ok = self.primal.iter().all(|x| !x.is_negative())
            && lp.constraints.iter().zip(&lp.bounds).all(|(row, b)| dot(row, &self.primal) <= *b);
        let dual_ok = self.dual.iter().all(|y| !y.is_negative())
            && (0..lp.variables()).all(|j| {
                let col: Rational = lp.constraints.iter().zip(&self.dual).fold(Rational::zero(), |s, (row, y)| s + &row[j] * y);
                col >= lp.objective[j]
            });
        let primal_value = dot(&lp.objective, &self.primal);
        primal_ok && dual_ok && primal_value == self.value && dot(&lp.bounds, &self.dual) == self.value
    }
}
