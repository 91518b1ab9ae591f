//! Small dense two-phase simplex solver.
//!
//! Sized for the margin programs of the cell decomposition: a few dozen
//! variables and constraints at most. Bland's rule is used for both the
//! entering and leaving variable, so degenerate pivots cannot cycle.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const FEASIBILITY_EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize objective · x` subject to the constraints, with `x_k >= 0` unless
/// `free[k]` is set.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub free: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            free: vec![false; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    artificial_start: usize,
    /// Structural column index for each original variable: (positive, negative part).
    var_cols: Vec<(usize, Option<usize>)>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let mut var_cols = Vec::with_capacity(lp.num_vars());
        let mut next = 0;
        for &is_free in &lp.free {
            let pos = next;
            next += 1;
            let neg = if is_free {
                next += 1;
                Some(next - 1)
            } else {
                None
            };
            var_cols.push((pos, neg));
        }
        let structural = next;

        let m = lp.constraints.len();
        let slack_count = lp
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let artificial_start = structural + slack_count;
        // Every row gets an artificial unless it is a `<=` row with rhs >= 0 after normalisation.
        let cols = artificial_start + m;

        let mut a = vec![vec![0.0; cols + 1]; m];
        let mut basis = vec![0; m];
        let mut slack = structural;
        for (r, c) in lp.constraints.iter().enumerate() {
            let flip = c.rhs < 0.0;
            let sign = if flip { -1.0 } else { 1.0 };
            for (k, &coef) in c.coeffs.iter().enumerate() {
                let (pos, neg) = var_cols[k];
                a[r][pos] = sign * coef;
                if let Some(neg) = neg {
                    a[r][neg] = -sign * coef;
                }
            }
            a[r][cols] = sign * c.rhs;
            let relation = match (c.relation, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (rel, _) => rel,
            };
            match relation {
                Relation::Le => {
                    a[r][slack] = 1.0;
                    basis[r] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    a[r][slack] = -1.0;
                    slack += 1;
                    a[r][artificial_start + r] = 1.0;
                    basis[r] = artificial_start + r;
                }
                Relation::Eq => {
                    a[r][artificial_start + r] = 1.0;
                    basis[r] = artificial_start + r;
                }
            }
        }
        Tableau {
            a,
            basis,
            cols,
            artificial_start,
            var_cols,
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.cols + 1;
        let p = self.a[row][col];
        for k in 0..width {
            self.a[row][k] /= p;
        }
        self.a[row][col] = 1.0;
        let pivot_row = self.a[row].clone();
        for (r, line) in self.a.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = line[col];
            if factor != 0.0 {
                for k in 0..width {
                    line[k] -= factor * pivot_row[k];
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Maximises `cost · x` over the current basis using columns `< allowed`.
    /// Returns `false` if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<bool> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..allowed).find(|&j| self.reduced_cost(cost, j) > PIVOT_EPS);
            let Some(col) = entering else {
                return Ok(true);
            };
            let rhs = self.cols;
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.a.len() {
                let coef = self.a[r][col];
                if coef > PIVOT_EPS {
                    let ratio = self.a[r][rhs] / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((best, best_ratio)) => {
                            if ratio < best_ratio - 1e-13
                                || (ratio <= best_ratio + 1e-13 && self.basis[r] < self.basis[best])
                            {
                                Some((r, ratio))
                            } else {
                                Some((best, best_ratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((row, _)) => self.pivot(row, col),
            }
        }
        Err(Error::Solver(format!(
            "simplex did not terminate within {MAX_PIVOTS} pivots"
        )))
    }

    fn reduced_cost(&self, cost: &[f64], col: usize) -> f64 {
        let mut d = cost[col];
        for (r, &b) in self.basis.iter().enumerate() {
            d -= cost[b] * self.a[r][col];
        }
        d
    }

    fn objective_value(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(r, &b)| cost[b] * self.a[r][self.cols])
            .sum()
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpOutcome> {
        // Phase 1: maximise minus the sum of artificial variables.
        let mut phase1 = vec![0.0; self.cols];
        for c in phase1.iter_mut().skip(self.artificial_start) {
            *c = -1.0;
        }
        if !self.optimize(&phase1, self.cols)? {
            return Err(Error::Solver("phase one reported unbounded".into()));
        }
        if self.objective_value(&phase1) < -FEASIBILITY_EPS {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive remaining (zero-valued) artificials out of the basis where possible.
        for r in 0..self.basis.len() {
            if self.basis[r] >= self.artificial_start {
                if let Some(col) =
                    (0..self.artificial_start).find(|&j| self.a[r][j].abs() > PIVOT_EPS)
                {
                    self.pivot(r, col);
                }
            }
        }

        // Phase 2 on structural and slack columns only.
        let mut cost = vec![0.0; self.cols];
        for (k, &(pos, neg)) in self.var_cols.iter().enumerate() {
            cost[pos] = lp.objective[k];
            if let Some(neg) = neg {
                cost[neg] = -lp.objective[k];
            }
        }
        if !self.optimize(&cost, self.artificial_start)? {
            return Ok(LpOutcome::Unbounded);
        }

        let mut column_value = vec![0.0; self.cols];
        for (r, &b) in self.basis.iter().enumerate() {
            column_value[b] = self.a[r][self.cols];
        }
        let point: Vec<f64> = self
            .var_cols
            .iter()
            .map(|&(pos, neg)| column_value[pos] - neg.map_or(0.0, |n| column_value[n]))
            .collect();
        let value = lp.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
        Ok(LpOutcome::Optimal { value, point })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(outcome: LpOutcome) -> (f64, Vec<f64>) {
        match outcome {
            LpOutcome::Optimal { value, point } => (value, point),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), value 36
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.add(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add(vec![3.0, 2.0], Relation::Le, 18.0);
        let (value, point) = optimal(lp.solve().unwrap());
        assert!((value - 36.0).abs() < 1e-9);
        assert!((point[0] - 2.0).abs() < 1e-9 && (point[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_free_variable() {
        // max d s.t. q1 + q2 = 1, q1 - d >= 0, q2 - d >= 0, d free -> d = 0.5
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![0.0, 0.0, 1.0];
        lp.free[2] = true;
        lp.add(vec![1.0, 1.0, 0.0], Relation::Eq, 1.0);
        lp.add(vec![1.0, 0.0, -1.0], Relation::Ge, 0.0);
        lp.add(vec![0.0, 1.0, -1.0], Relation::Ge, 0.0);
        let (value, _) = optimal(lp.solve().unwrap());
        assert!((value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_optimum_through_free_variable() {
        // max d s.t. q1 + q2 = 1, -1 - d >= 0 (i.e. d <= -1)
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![0.0, 0.0, 1.0];
        lp.free[2] = true;
        lp.add(vec![1.0, 1.0, 0.0], Relation::Eq, 1.0);
        lp.add(vec![0.0, 0.0, -1.0], Relation::Ge, 1.0);
        let (value, _) = optimal(lp.solve().unwrap());
        assert!((value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::new(2);
        lp.add(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add(vec![1.0, 1.0], Relation::Ge, 2.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.free[0] = true;
        lp.add(vec![0.0, 1.0], Relation::Eq, 1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.add(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add(vec![2.0, 2.0], Relation::Eq, 2.0);
        lp.add(vec![0.0, 0.0], Relation::Eq, 0.0);
        let (value, point) = optimal(lp.solve().unwrap());
        assert!((value - 2.0).abs() < 1e-12);
        assert!((point[1] - 1.0).abs() < 1e-12);
    }
}
