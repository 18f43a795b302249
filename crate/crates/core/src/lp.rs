//! Small dense two-phase simplex.
//!
//! Variables are either non-negative or free (free ones are split
//! internally). Pricing is Dantzig's rule, falling back to Bland's rule after
//! a run of degenerate pivots so the method cannot cycle.

const EPS: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    NonNegative,
    Free,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    rel: Relation,
    rhs: f64,
}

/// `maximize c·x` subject to linear rows.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    kinds: Vec<VarKind>,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }
}

impl LinearProgram {
    pub fn new(kinds: Vec<VarKind>) -> Self {
        let n = kinds.len();
        Self { kinds, objective: vec![0.0; n], rows: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.kinds.len()
    }

    pub fn set_objective(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.kinds.len());
        self.objective = c;
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.kinds.len());
        self.rows.push(Row { coeffs, rel, rhs });
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    /// `m` constraint rows followed by the cost row; last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Column index of each original variable's positive / negative part.
    pos_col: Vec<usize>,
    neg_col: Vec<Option<usize>>,
    first_artificial: usize,
    ncols: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let m = lp.rows.len();
        let mut pos_col = Vec::with_capacity(lp.kinds.len());
        let mut neg_col = Vec::with_capacity(lp.kinds.len());
        let mut col = 0;
        for k in &lp.kinds {
            pos_col.push(col);
            col += 1;
            if *k == VarKind::Free {
                neg_col.push(Some(col));
                col += 1;
            } else {
                neg_col.push(None);
            }
        }
        let structural = col;

        // Normalize rows to rhs >= 0.
        let rows: Vec<Row> = lp
            .rows
            .iter()
            .map(|r| {
                if r.rhs < 0.0 {
                    let rel = match r.rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    Row { coeffs: r.coeffs.iter().map(|v| -v).collect(), rel, rhs: -r.rhs }
                } else {
                    r.clone()
                }
            })
            .collect();

        let n_slack = rows.iter().filter(|r| r.rel != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.rel != Relation::Le).count();
        let first_artificial = structural + n_slack;
        let ncols = first_artificial + n_art;

        let mut t = vec![vec![0.0; ncols + 1]; m + 1];
        let mut basis = vec![0; m];
        let mut slack = structural;
        let mut art = first_artificial;
        for (i, r) in rows.iter().enumerate() {
            for (j, a) in r.coeffs.iter().enumerate() {
                t[i][pos_col[j]] = *a;
                if let Some(nc) = neg_col[j] {
                    t[i][nc] = -*a;
                }
            }
            t[i][ncols] = r.rhs;
            match r.rel {
                Relation::Le => {
                    t[i][slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    t[i][slack] = -1.0;
                    slack += 1;
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Tableau { t, basis, pos_col, neg_col, first_artificial, ncols }
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    /// Loads `cost` (minimization) into the cost row as reduced costs.
    fn load_cost(&mut self, cost: &[f64]) {
        let m = self.m();
        let nc = self.ncols;
        let mut row = vec![0.0; nc + 1];
        row[..nc].copy_from_slice(&cost[..nc]);
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (r, a) in row.iter_mut().zip(&self.t[i]) {
                    *r -= cb * a;
                }
            }
        }
        self.t[m] = row;
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let nc = self.ncols;
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for j in 0..=nc {
                    row[j] -= f * pivot_row[j];
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes the loaded cost row over columns `< allowed`. Returns false
    /// when unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        let m = self.m();
        let nc = self.ncols;
        let mut degenerate = 0usize;
        let max_iter = 50 * (m + nc) + 1000;
        for _ in 0..max_iter {
            let bland = degenerate >= DEGENERATE_RUN;
            let cost = &self.t[m];
            let entering = if bland {
                (0..allowed).find(|&j| cost[j] < -EPS)
            } else {
                let mut best = None;
                let mut best_v = -EPS;
                for (j, &v) in cost.iter().enumerate().take(allowed) {
                    if v < best_v {
                        best_v = v;
                        best = Some(j);
                    }
                }
                best
            };
            let Some(c) = entering else { return true };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][c];
                if a > EPS {
                    let ratio = self.t[i][nc] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS || (ratio <= lr + EPS && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else { return false };
            if ratio.abs() <= EPS {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
        true
    }

    fn run(mut self, lp: &LinearProgram) -> LpOutcome {
        let m = self.m();
        let nc = self.ncols;
        if self.first_artificial < nc {
            let mut cost = vec![0.0; nc];
            for c in cost.iter_mut().skip(self.first_artificial) {
                *c = 1.0;
            }
            self.load_cost(&cost);
            self.optimize(nc);
            if -self.t[m][nc] > FEAS_TOL * (1.0 + self.max_rhs()) {
                return LpOutcome::Infeasible;
            }
            // Drive remaining artificials out of the basis where possible.
            for i in 0..m {
                if self.basis[i] >= self.first_artificial {
                    if let Some(c) = (0..self.first_artificial).find(|&j| self.t[i][j].abs() > 1e-9) {
                        self.pivot(i, c);
                    }
                }
            }
        }

        let mut cost = vec![0.0; nc];
        for (j, c) in lp.objective.iter().enumerate() {
            cost[self.pos_col[j]] = -c;
            if let Some(n) = self.neg_col[j] {
                cost[n] = *c;
            }
        }
        self.load_cost(&cost);
        if !self.optimize(self.first_artificial) {
            return LpOutcome::Unbounded;
        }

        let mut col_val = vec![0.0; nc];
        for (i, &b) in self.basis.iter().enumerate() {
            col_val[b] = self.t[i][nc];
        }
        let x: Vec<f64> = (0..lp.num_vars())
            .map(|j| col_val[self.pos_col[j]] - self.neg_col[j].map_or(0.0, |n| col_val[n]))
            .collect();
        let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpOutcome::Optimal { x, value }
    }

    fn max_rhs(&self) -> f64 {
        let nc = self.ncols;
        self.t[..self.m()].iter().map(|r| r[nc].abs()).fold(0.0, f64::max)
    }
}
