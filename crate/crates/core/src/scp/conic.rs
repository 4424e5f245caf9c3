//! A solver-neutral conic program and the contract a backend must meet.
//!
//! Programs use the standard form
//!
//! ```text
//! minimize    ½ xᵀP x + cᵀx + c₀
//! subject to  s = b − A x,  s ∈ K
//! ```
//!
//! with `K` a product of zero, nonnegative and second-order cones, laid out
//! in row order. Builders describe each conic row as an affine expression of
//! the variables, which is turned into `A`/`b` rows here.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;

/// Index of a scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub usize);

/// Affine expression `Σ coef·x[var] + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Affine {
    pub terms: Vec<(Var, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Affine { terms: Vec::new(), constant: c }
    }

    pub fn var(v: Var) -> Self {
        Affine { terms: alloc::vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn term(v: Var, coef: f64) -> Self {
        Affine { terms: alloc::vec![(v, coef)], constant: 0.0 }
    }

    pub fn plus(mut self, v: Var, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// Every row equal to zero.
    Zero(usize),
    /// Every row nonnegative.
    Nonneg(usize),
    /// `s₀ ≥ ‖(s₁, …)‖`.
    SecondOrder(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(n) | Cone::Nonneg(n) | Cone::SecondOrder(n) => n,
        }
    }

    fn violation(&self, s: &[f64]) -> f64 {
        match self {
            Cone::Zero(_) => s.iter().fold(0.0, |m, v| m.max(v.abs())),
            Cone::Nonneg(_) => s.iter().fold(0.0, |m, v| m.max(-v)),
            Cone::SecondOrder(_) => {
                let tail = math::sqrt(s[1..].iter().map(|v| v * v).sum::<f64>());
                (tail - s[0]).max(0.0)
            }
        }
    }
}

/// A conic program in standard form, assembled row by row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConicProgram {
    n_vars: usize,
    /// Upper-triangular entries `(row, col, value)` of `P`, `row ≤ col`.
    p: Vec<(usize, usize, f64)>,
    c: Vec<f64>,
    c0: f64,
    /// Entries `(row, col, value)` of `A`.
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<Cone>,
}

impl ConicProgram {
    pub fn new() -> Self {
        ConicProgram::default()
    }

    pub fn add_var(&mut self) -> Var {
        self.n_vars += 1;
        self.c.push(0.0);
        Var(self.n_vars - 1)
    }

    pub fn add_vars<const N: usize>(&mut self) -> [Var; N] {
        core::array::from_fn(|_| self.add_var())
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn linear_cost(&self) -> &[f64] {
        &self.c
    }

    pub fn objective_constant(&self) -> f64 {
        self.c0
    }

    /// Upper triangle of `P` as triplets (duplicates are summed).
    pub fn quadratic_triplets(&self) -> &[(usize, usize, f64)] {
        &self.p
    }

    /// `A` as triplets (duplicates are summed).
    pub fn constraint_triplets(&self) -> &[(usize, usize, f64)] {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    /// Add `weight·expr` to the objective.
    pub fn add_linear_cost(&mut self, expr: &Affine, weight: f64) {
        for &(v, coef) in &expr.terms {
            self.c[v.0] += weight * coef;
        }
        self.c0 += weight * expr.constant;
    }

    /// Add `weight·expr²` to the objective (`weight ≥ 0`).
    pub fn add_squared_cost(&mut self, expr: &Affine, weight: f64) {
        debug_assert!(weight >= 0.0);
        // (g·x + h)² = xᵀ(g gᵀ)x + 2h g·x + h², and ½xᵀPx picks up P = 2w g gᵀ.
        let mut terms = expr.terms.clone();
        terms.sort_by_key(|t| t.0);
        terms.dedup_by(|later, kept| {
            if later.0 == kept.0 {
                kept.1 += later.1;
                true
            } else {
                false
            }
        });
        for (i, &(vi, gi)) in terms.iter().enumerate() {
            for &(vj, gj) in &terms[i..] {
                self.p.push((vi.0, vj.0, 2.0 * weight * gi * gj));
            }
        }
        for &(v, g) in &terms {
            self.c[v.0] += 2.0 * weight * expr.constant * g;
        }
        self.c0 += weight * expr.constant * expr.constant;
    }

    fn push_rows(&mut self, cone: Cone, rows: &[Affine]) {
        debug_assert_eq!(cone.dim(), rows.len());
        for row in rows {
            let r = self.b.len();
            // s = b − A x must equal the expression g·x + h.
            for &(v, coef) in &row.terms {
                self.a.push((r, v.0, -coef));
            }
            self.b.push(row.constant);
        }
        match (self.cones.last_mut(), cone) {
            (Some(Cone::Zero(n)), Cone::Zero(m)) => *n += m,
            (Some(Cone::Nonneg(n)), Cone::Nonneg(m)) => *n += m,
            _ => self.cones.push(cone),
        }
    }

    /// `expr = 0`.
    pub fn equal_zero(&mut self, expr: Affine) {
        self.push_rows(Cone::Zero(1), &[expr]);
    }

    /// `expr ≥ 0`.
    pub fn nonnegative(&mut self, expr: Affine) {
        self.push_rows(Cone::Nonneg(1), &[expr]);
    }

    /// `head ≥ ‖tail‖`.
    pub fn second_order(&mut self, head: Affine, tail: &[Affine]) {
        let mut rows = Vec::with_capacity(tail.len() + 1);
        rows.push(head);
        rows.extend_from_slice(tail);
        self.push_rows(Cone::SecondOrder(rows.len()), &rows);
    }

    /// `x·y ≥ ‖z‖²` with `x, y ≥ 0`, via `(x + y, x − y, 2z) ∈ SOC`.
    pub fn rotated_second_order(&mut self, x: Affine, y: Affine, z: &[Affine]) {
        let mut head = x.clone();
        head.terms.extend_from_slice(&y.terms);
        head.constant += y.constant;
        let mut diff = x;
        diff.terms.extend(y.terms.iter().map(|&(v, c)| (v, -c)));
        diff.constant -= y.constant;
        let mut tail = Vec::with_capacity(z.len() + 1);
        tail.push(diff);
        tail.extend(z.iter().map(|e| e.clone().scaled(2.0)));
        self.second_order(head, &tail);
    }

    /// Objective value at `x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let quad: f64 = self
            .p
            .iter()
            .map(|&(r, c, v)| if r == c { 0.5 * v * x[r] * x[r] } else { v * x[r] * x[c] })
            .sum();
        quad + self.c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.c0
    }

    /// Slack `s = b − A x`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.b.clone();
        for &(r, c, v) in &self.a {
            s[r] -= v * x[c];
        }
        s
    }

    /// Largest absolute cone violation of `x`.
    pub fn constraint_violation(&self, x: &[f64]) -> f64 {
        let s = self.slack(x);
        let mut offset = 0;
        let mut worst: f64 = 0.0;
        for cone in &self.cones {
            worst = worst.max(cone.violation(&s[offset..offset + cone.dim()]));
            offset += cone.dim();
        }
        worst
    }

    /// Violation relative to `max(1, ‖b‖∞, ‖x‖∞)`, the scaling interior-point
    /// codes report their feasibility residuals in.
    pub fn relative_violation(&self, x: &[f64]) -> f64 {
        let scale = self
            .b
            .iter()
            .chain(x.iter())
            .fold(1.0_f64, |m, v| m.max(v.abs()));
        self.constraint_violation(x) / scale
    }
}

/// A solved conic program.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Largest of the scaled primal and dual residuals reported by the
    /// backend.
    pub kkt_residual: f64,
    pub iterations: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("subproblem is infeasible")]
    Infeasible,
    #[error("subproblem is unbounded")]
    Unbounded,
    #[error("subproblem solver hit its iteration limit")]
    MaxIterations,
    #[error("subproblem solver failed: {0}")]
    Numerical(String),
}

/// A convex conic solver.
///
/// Implementations must be deterministic: identical programs produce
/// bitwise-identical solutions. A returned solution satisfies the
/// constraints and the stationarity conditions to `tolerance` in the
/// backend's scaled residual norms.
pub trait ConicSolver {
    fn solve(&self, program: &ConicProgram, tolerance: f64) -> Result<ConicSolution, SolveError>;
}

impl<S: ConicSolver + ?Sized> ConicSolver for &S {
    fn solve(&self, program: &ConicProgram, tolerance: f64) -> Result<ConicSolution, SolveError> {
        (**self).solve(program, tolerance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_cost_expands_correctly() {
        let mut p = ConicProgram::new();
        let [x, y] = p.add_vars();
        // (x − 2y + 3)²
        p.add_squared_cost(&Affine::var(x).plus(y, -2.0).offset(3.0), 1.0);
        for (xv, yv) in [(0.0, 0.0), (1.0, 2.0), (-3.0, 0.5)] {
            let expect = (xv - 2.0 * yv + 3.0) * (xv - 2.0 * yv + 3.0);
            assert!((p.objective(&[xv, yv]) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn rotated_cone_encodes_product() {
        let mut p = ConicProgram::new();
        let [x, y, z] = p.add_vars();
        p.rotated_second_order(Affine::var(x), Affine::var(y), &[Affine::var(z)]);
        assert_eq!(p.constraint_violation(&[2.0, 2.0, 2.0]), 0.0);
        assert!(p.constraint_violation(&[1.0, 1.0, 2.0]) > 0.0);
    }

    #[test]
    fn adjacent_linear_cones_merge() {
        let mut p = ConicProgram::new();
        let x = p.add_var();
        p.equal_zero(Affine::var(x));
        p.equal_zero(Affine::var(x).offset(1.0));
        p.nonnegative(Affine::var(x));
        assert_eq!(p.cones(), &[Cone::Zero(2), Cone::Nonneg(1)]);
        assert_eq!(p.constraint_violation(&[0.0]), 1.0);
    }
}
