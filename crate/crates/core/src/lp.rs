//! Dense bounded-variable primal simplex (two phases, Bland's rule).
//!
//! Solves `min cᵀx` subject to row constraints `aᵢᵀx {≤,=,≥} bᵢ` and finite
//! lower / possibly infinite upper bounds on every variable.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowKind {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row<T> {
    pub coeffs: Vec<T>,
    pub kind: RowKind,
    pub rhs: T,
}

impl<T: Scalar> Row<T> {
    pub fn new(coeffs: Vec<T>, kind: RowKind, rhs: T) -> Self {
        Self { coeffs, kind, rhs }
    }

    pub fn activity(&self, x: &[T]) -> T {
        self.coeffs.iter().zip(x).fold(T::zero(), |acc, (a, v)| acc + *a * *v)
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[T]) -> T {
        let r = self.activity(x) - self.rhs;
        match self.kind {
            RowKind::Le => r.max(T::zero()),
            RowKind::Ge => (-r).max(T::zero()),
            RowKind::Eq => r.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub rows: Vec<Row<T>>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> LinearProgram<T> {
    /// Variables bounded below by 0 and unbounded above.
    pub fn new(objective: Vec<T>) -> Self {
        let n = objective.len();
        Self { objective, rows: Vec::new(), lower: vec![T::zero(); n], upper: vec![T::infinity(); n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, coeffs: Vec<T>, kind: RowKind, rhs: T) {
        self.rows.push(Row::new(coeffs, kind, rhs));
    }

    pub fn cost(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).fold(T::zero(), |acc, (c, v)| acc + *c * *v)
    }

    /// Largest row or bound violation at `x`.
    pub fn primal_residual(&self, x: &[T]) -> T {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(T::zero(), T::max);
        let bounds = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (*l - *v).max(*v - *u).max(T::zero()))
            .fold(T::zero(), T::max);
        rows.max(bounds)
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n || self.rows.iter().any(|r| r.coeffs.len() != n) {
            return Err(Error::InvalidInput("linear program dimensions do not match".into()));
        }
        let finite = self.objective.iter().chain(&self.lower).all(|v| v.is_finite())
            && self.rows.iter().all(|r| r.rhs.is_finite() && r.coeffs.iter().all(|a| a.is_finite()));
        if !finite || self.upper.iter().any(|u| u.is_nan()) {
            return Err(Error::InvalidInput("linear program data must be finite (upper bounds may be +inf)".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| u < l) {
            return Err(Error::LpInfeasible);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions<T> {
    pub pivot_tol: T,
    pub opt_tol: T,
    pub feas_tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for LpOptions<T> {
    fn default() -> Self {
        Self { pivot_tol: lit(1e-11), opt_tol: lit(1e-12), feas_tol: lit(1e-9), max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals<T> {
    pub primal: T,
    /// Sign violations of reduced costs and row multipliers.
    pub dual: T,
    pub complementarity: T,
}

impl<T: Scalar> KktResiduals<T> {
    pub fn max(&self) -> T {
        self.primal.max(self.dual).max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Row multipliers `y` with `c − Aᵀy` equal to the reduced costs.
    pub duals: Vec<T>,
    pub reduced_costs: Vec<T>,
    pub iterations: usize,
    pub kkt: KktResiduals<T>,
}

/// KKT residuals of `(x, y)` for `lp`.
pub fn kkt_residuals<T: Scalar>(lp: &LinearProgram<T>, x: &[T], y: &[T]) -> (KktResiduals<T>, Vec<T>) {
    let primal = lp.primal_residual(x);
    let n = lp.num_vars();
    let mut d = lp.objective.clone();
    for (row, &yi) in lp.rows.iter().zip(y) {
        for j in 0..n {
            d[j] = d[j] - yi * row.coeffs[j];
        }
    }
    let mut dual = T::zero();
    let mut comp = T::zero();
    for j in 0..n {
        let gap_lo = x[j] - lp.lower[j];
        let gap_hi = lp.upper[j] - x[j];
        let scale = T::one().max(x[j].abs());
        // Reduced cost must be ≥ 0 off the upper bound and ≤ 0 off the lower.
        let mut viol = T::zero();
        if gap_hi > lit::<T>(1e-9) * scale {
            viol = viol.max(-d[j]);
        }
        if gap_lo > lit::<T>(1e-9) * scale {
            viol = viol.max(d[j]);
        }
        dual = dual.max(viol);
        comp = comp.max(d[j].abs() * gap_lo.min(gap_hi));
    }
    for (row, &yi) in lp.rows.iter().zip(y) {
        let wrong = match row.kind {
            RowKind::Le => yi.max(T::zero()),
            RowKind::Ge => (-yi).max(T::zero()),
            RowKind::Eq => T::zero(),
        };
        dual = dual.max(wrong);
        comp = comp.max((yi * (row.activity(x) - row.rhs)).abs());
    }
    (KktResiduals { primal, dual, complementarity: comp }, d)
}

struct Tableau<T> {
    t: Vec<Vec<T>>,
    xb: Vec<T>,
    basis: Vec<usize>,
    basic: Vec<bool>,
    at_upper: Vec<bool>,
    ub: Vec<T>,
    iterations: usize,
}

enum Step {
    Optimal,
    Moved,
}

impl<T: Scalar> Tableau<T> {
    fn value(&self, j: usize) -> T {
        if self.basic[j] {
            let r = self.basis.iter().position(|&b| b == j).unwrap_or(0);
            self.xb[r]
        } else if self.at_upper[j] {
            self.ub[j]
        } else {
            T::zero()
        }
    }

    fn reduced_cost(&self, cost: &[T], j: usize) -> T {
        self.basis.iter().enumerate().fold(cost[j], |acc, (i, &b)| acc - cost[b] * self.t[i][j])
    }

    fn objective(&self, cost: &[T]) -> T {
        (0..cost.len()).fold(T::zero(), |acc, j| acc + cost[j] * self.value(j))
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.t[r][j];
        for v in self.t[r].iter_mut() {
            *v = *v / p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != T::zero() {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v = *v - f * *pv;
                }
                row[j] = T::zero();
            }
        }
        let leaving = self.basis[r];
        self.basic[leaving] = false;
        self.basis[r] = j;
        self.basic[j] = true;
        self.at_upper[j] = false;
    }

    /// One Bland step: smallest-index improving column, smallest-index
    /// blocking variable.
    fn step(&mut self, cost: &[T], allowed: &dyn Fn(usize) -> bool, opts: &LpOptions<T>) -> Result<Step> {
        let ncol = self.ub.len();
        let entering = (0..ncol).find(|&j| {
            if self.basic[j] || !allowed(j) {
                return false;
            }
            let d = self.reduced_cost(cost, j);
            if self.at_upper[j] {
                d > opts.opt_tol
            } else {
                d < -opts.opt_tol && self.ub[j] > T::zero()
            }
        });
        let Some(j) = entering else { return Ok(Step::Optimal) };
        let dir = if self.at_upper[j] { -T::one() } else { T::one() };

        let mut theta = self.ub[j];
        let mut leave: Option<(usize, bool)> = None;
        for i in 0..self.basis.len() {
            let alpha = dir * self.t[i][j];
            let b = self.basis[i];
            let (ratio, to_upper) = if alpha > opts.pivot_tol {
                (self.xb[i].max(T::zero()) / alpha, false)
            } else if alpha < -opts.pivot_tol && self.ub[b].is_finite() {
                ((self.ub[b] - self.xb[i]).max(T::zero()) / -alpha, true)
            } else {
                continue;
            };
            let better = match leave {
                _ if ratio < theta => true,
                Some((k, _)) => ratio == theta && b < self.basis[k],
                None => false,
            };
            if better {
                theta = ratio;
                leave = Some((i, to_upper));
            }
        }
        if !theta.is_finite() {
            return Err(Error::LpUnbounded);
        }
        for i in 0..self.basis.len() {
            self.xb[i] = self.xb[i] - dir * self.t[i][j] * theta;
        }
        let start = if self.at_upper[j] { self.ub[j] } else { T::zero() };
        match leave {
            None => self.at_upper[j] = !self.at_upper[j],
            Some((r, to_upper)) => {
                let leaving = self.basis[r];
                self.pivot(r, j);
                self.at_upper[leaving] = to_upper;
                self.xb[r] = start + dir * theta;
            }
        }
        self.iterations += 1;
        if self.iterations > opts.max_iter {
            return Err(Error::IterationLimit(opts.max_iter));
        }
        Ok(Step::Moved)
    }

    fn run(&mut self, cost: &[T], allowed: &dyn Fn(usize) -> bool, opts: &LpOptions<T>) -> Result<()> {
        while let Step::Moved = self.step(cost, allowed, opts)? {}
        Ok(())
    }
}

/// Solve `lp` to optimality.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>, opts: &LpOptions<T>) -> Result<LpSolution<T>> {
    lp.check()?;
    let n = lp.num_vars();
    let m = lp.rows.len();

    // Shift to zero lower bounds and make every right-hand side non-negative.
    let mut flipped = vec![false; m];
    let mut kinds = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (i, row) in lp.rows.iter().enumerate() {
        let b = row.rhs - row.activity(&lp.lower);
        if b < T::zero() {
            flipped[i] = true;
            rhs.push(-b);
            kinds.push(match row.kind {
                RowKind::Le => RowKind::Ge,
                RowKind::Ge => RowKind::Le,
                RowKind::Eq => RowKind::Eq,
            });
        } else {
            rhs.push(b);
            kinds.push(row.kind);
        }
    }
    let n_slack = kinds.iter().filter(|k| **k != RowKind::Eq).count();
    let n_art = kinds.iter().filter(|k| **k != RowKind::Le).count();
    let ncol = n + n_slack + n_art;
    let mut ub: Vec<T> = lp.lower.iter().zip(&lp.upper).map(|(l, u)| *u - *l).collect();
    ub.resize(ncol, T::infinity());

    let mut t = vec![vec![T::zero(); ncol]; m];
    let mut basis = vec![0usize; m];
    // Column carrying +e_i for row i, used for dual recovery.
    let mut unit_col = vec![0usize; m];
    let (mut s, mut a) = (n, n + n_slack);
    for i in 0..m {
        let sign = if flipped[i] { -T::one() } else { T::one() };
        for j in 0..n {
            t[i][j] = sign * lp.rows[i].coeffs[j];
        }
        match kinds[i] {
            RowKind::Le => {
                t[i][s] = T::one();
                basis[i] = s;
                unit_col[i] = s;
                s += 1;
            }
            RowKind::Ge => {
                t[i][s] = -T::one();
                t[i][a] = T::one();
                basis[i] = a;
                unit_col[i] = a;
                s += 1;
                a += 1;
            }
            RowKind::Eq => {
                t[i][a] = T::one();
                basis[i] = a;
                unit_col[i] = a;
                a += 1;
            }
        }
    }
    let art_start = n + n_slack;
    let mut basic = vec![false; ncol];
    basis.iter().for_each(|&b| basic[b] = true);
    let mut tab = Tableau { t, xb: rhs.clone(), basis, basic, at_upper: vec![false; ncol], ub, iterations: 0 };

    if n_art > 0 {
        let mut c1 = vec![T::zero(); ncol];
        c1[art_start..].iter_mut().for_each(|c| *c = T::one());
        tab.run(&c1, &|_| true, opts)?;
        let scale = rhs.iter().fold(T::one(), |m, b| m.max(b.abs()));
        if tab.objective(&c1) > opts.feas_tol * scale {
            return Err(Error::LpInfeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] < art_start {
                continue;
            }
            if let Some(j) = (0..art_start).find(|&j| !tab.basic[j] && tab.t[r][j].abs() > opts.pivot_tol) {
                let v = tab.value(j);
                tab.pivot(r, j);
                tab.xb[r] = v;
            }
        }
        for j in art_start..ncol {
            tab.ub[j] = T::zero();
        }
    }

    let mut c2 = lp.objective.clone();
    c2.resize(ncol, T::zero());
    tab.run(&c2, &|j| j < art_start, opts)?;

    let x: Vec<T> = (0..n).map(|j| lp.lower[j] + tab.value(j)).collect();
    let duals: Vec<T> = (0..m)
        .map(|i| {
            let y = -tab.reduced_cost(&c2, unit_col[i]);
            if flipped[i] {
                -y
            } else {
                y
            }
        })
        .collect();
    let (kkt, reduced_costs) = kkt_residuals(lp, &x, &duals);
    Ok(LpSolution { objective: lp.cost(&x), x, duals, reduced_costs, iterations: tab.iterations, kkt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> LpOptions<f64> {
        LpOptions::default()
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18.
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.push(vec![1.0, 0.0], RowKind::Le, 4.0);
        lp.push(vec![0.0, 2.0], RowKind::Le, 12.0);
        lp.push(vec![3.0, 2.0], RowKind::Le, 18.0);
        let s = solve(&lp, &opts()).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
        assert!((s.objective + 36.0).abs() < 1e-12);
        assert!((s.duals[1] + 1.5).abs() < 1e-12 && (s.duals[2] + 1.0).abs() < 1e-12);
        assert!(s.kkt.max() < 1e-12);
    }

    #[test]
    fn bounds_and_equalities() {
        // min x + 2y, x + y = 3, 0 ≤ x ≤ 2, 0.5 ≤ y ≤ 4.
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.push(vec![1.0, 1.0], RowKind::Eq, 3.0);
        lp.lower = vec![0.0, 0.5];
        lp.upper = vec![2.0, 4.0];
        let s = solve(&lp, &opts()).unwrap();
        assert_eq!(s.x, vec![2.0, 1.0]);
        assert!((s.duals[0] - 2.0).abs() < 1e-12);
        assert!((s.reduced_costs[0] + 1.0).abs() < 1e-12);
        assert!(s.kkt.max() < 1e-12);
    }

    #[test]
    fn ge_rows_and_negative_rhs() {
        // min 2x + 3y, x + y ≥ 2, x − y ≤ −1 (i.e. y ≥ x + 1).
        let mut lp = LinearProgram::new(vec![2.0, 3.0]);
        lp.push(vec![1.0, 1.0], RowKind::Ge, 2.0);
        lp.push(vec![1.0, -1.0], RowKind::Le, -1.0);
        let s = solve(&lp, &opts()).unwrap();
        assert!((s.x[0] - 0.5).abs() < 1e-12 && (s.x[1] - 1.5).abs() < 1e-12);
        assert!(s.duals[0] > 0.0 && s.duals[1] < 0.0);
        assert!(s.kkt.max() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.push(vec![1.0, 1.0], RowKind::Eq, 5.0);
        lp.upper = vec![2.0, 2.0];
        assert_eq!(solve(&lp, &opts()), Err(Error::LpInfeasible));
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.push(vec![1.0, -1.0], RowKind::Le, 1.0);
        assert_eq!(solve(&lp, &opts()), Err(Error::LpUnbounded));
    }

    #[test]
    fn beale_cycling_example_terminates() {
        let mut lp = LinearProgram::new(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.push(vec![0.25, -60.0, -0.04, 9.0], RowKind::Le, 0.0);
        lp.push(vec![0.5, -90.0, -0.02, 3.0], RowKind::Le, 0.0);
        lp.push(vec![0.0, 0.0, 1.0, 0.0], RowKind::Le, 1.0);
        let s = solve(&lp, &opts()).unwrap();
        assert!((s.objective + 0.05).abs() < 1e-12);
        assert!(s.kkt.max() < 1e-10);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 3.0, 2.0]);
        lp.push(vec![1.0, 1.0, 1.0], RowKind::Eq, 4.0);
        lp.push(vec![2.0, 2.0, 2.0], RowKind::Eq, 8.0);
        lp.push(vec![0.0, 1.0, 0.0], RowKind::Ge, 1.0);
        let s = solve(&lp, &opts()).unwrap();
        assert!((s.objective - 6.0).abs() < 1e-12);
        assert!(s.kkt.primal < 1e-12 && s.kkt.dual < 1e-12);
    }

    /// Vertex enumeration over all pairs of active constraints.
    fn brute_force_2d(lp: &LinearProgram<f64>) -> Option<f64> {
        let mut lines: Vec<([f64; 2], f64)> = lp.rows.iter().map(|r| ([r.coeffs[0], r.coeffs[1]], r.rhs)).collect();
        for j in 0..2 {
            let mut e = [0.0; 2];
            e[j] = 1.0;
            lines.push((e, lp.lower[j]));
            lines.push((e, lp.upper[j]));
        }
        let mut best: Option<f64> = None;
        for a in 0..lines.len() {
            for b in a + 1..lines.len() {
                let ((p, u), (q, v)) = (lines[a], lines[b]);
                let det = p[0] * q[1] - p[1] * q[0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = [(u * q[1] - p[1] * v) / det, (p[0] * v - u * q[0]) / det];
                if lp.primal_residual(&x) <= 1e-9 {
                    let c = lp.cost(&x);
                    best = Some(best.map_or(c, |b: f64| b.min(c)));
                }
            }
        }
        best
    }

    #[test]
    fn random_boxed_programs_match_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let mut lp = LinearProgram::new(vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
            lp.lower = vec![rng.gen_range(-2.0..0.0), rng.gen_range(-2.0..0.0)];
            lp.upper = vec![rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0)];
            for _ in 0..rng.gen_range(1..5) {
                let kind = [RowKind::Le, RowKind::Ge, RowKind::Eq][rng.gen_range(0..6) / 2 % 3];
                let kind = if kind == RowKind::Eq && rng.gen_bool(0.7) { RowKind::Le } else { kind };
                lp.push(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)], kind, rng.gen_range(-1.0..1.0));
            }
            match (solve(&lp, &opts()), brute_force_2d(&lp)) {
                (Ok(s), Some(b)) => {
                    assert!((s.objective - b).abs() < 1e-8, "{} vs {b}", s.objective);
                    assert!(s.kkt.max() < 1e-9, "{:?}", s.kkt);
                }
                (Err(Error::LpInfeasible), None) => {}
                (a, b) => panic!("solver {a:?} vs brute force {b:?}"),
            }
        }
    }
}
