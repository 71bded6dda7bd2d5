//! Solver-agnostic SDP construction and a single solve contract.
//!
//! Problems are stated over Hermitian (or real symmetric) PSD matrix
//! variables and free scalars, with a linear objective and affine
//! constraints `sum_i Tr(A_i X_i) + a^T s {<=,=} b`. Hermitian data is
//! lowered onto a real symmetric-cone form through the `2n x 2n` embedding
//! in [`crate::hermitian::real_embed`]; solutions are lifted back with
//! structure averaging and symmetrization.
//!
//! The backend is the Clarabel interior-point solver. Infeasibility and
//! unboundedness are reported as statuses, not errors; a solve that comes
//! back `AlmostSolved` (or worse) is retried once at a reduced tolerance
//! before the problem is declared failed.

use std::io::Write;
use std::time::{Duration, Instant};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT,
    SolverStatus, SupportedConeT, ZeroConeT,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermitian::{real_embed, real_unembed, CMat, Hermitian};

/// Default interior-point tolerance.
pub const DEFAULT_TOL: f64 = 1e-7;
/// Fallback tolerance for the automatic retry.
pub const RETRY_TOL: f64 = 1e-5;

/// Handle to a PSD matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatVar(pub usize);

/// Handle to a free scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalVar(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Complex Hermitian, embedded to dimension `2n` for the solver.
    Hermitian,
    /// Real symmetric, passed through unembedded.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
}

/// Affine expression `sum_i Tr(A_i X_i) + sum_j a_j s_j + c`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    mat_terms: Vec<(usize, CMat)>,
    scal_terms: Vec<(usize, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    /// Add `coeff * Tr(A X)` for matrix variable `v`. The coefficient matrix
    /// is symmetrized; pass Hermitian data.
    pub fn add_mat(&mut self, v: MatVar, a: CMat) -> &mut Self {
        let sym = (&a + a.adjoint()).scale(0.5);
        if let Some((_, existing)) = self.mat_terms.iter_mut().find(|(id, _)| *id == v.0) {
            *existing += sym;
        } else {
            self.mat_terms.push((v.0, sym));
        }
        self
    }

    pub fn add_scalar(&mut self, v: ScalVar, coeff: f64) -> &mut Self {
        if let Some((_, existing)) = self.scal_terms.iter_mut().find(|(id, _)| *id == v.0) {
            *existing += coeff;
        } else {
            self.scal_terms.push((v.0, coeff));
        }
        self
    }

    pub fn add_const(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    /// Evaluate at explicit variable values.
    pub fn eval(&self, mats: &[Hermitian], scals: &[f64]) -> f64 {
        let mut acc = self.constant;
        for (id, a) in &self.mat_terms {
            acc += crate::hermitian::re_trace_product(a, mats[*id].mat());
        }
        for (id, c) in &self.scal_terms {
            acc += c * scals[*id];
        }
        acc
    }
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Usable solution at reduced accuracy.
    Inaccurate,
    Infeasible,
    Unbounded,
    Failed,
}

impl SolveStatus {
    pub fn is_usable(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Inaccurate)
    }
}

/// Result of one solve: reconstructed variables plus diagnostics.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub mats: Vec<Hermitian>,
    pub scals: Vec<f64>,
    /// Objective in the problem's own sense (max problems report the max).
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: u32,
    pub wall_time: Duration,
    pub diagnostic: Option<String>,
}

/// SDP in matrix-variable form.
#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    mat_vars: Vec<(usize, VarKind)>,
    n_scal: usize,
    objective: LinExpr,
    maximize: bool,
    constraints: Vec<(LinExpr, Sense)>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_hermitian_var(&mut self, dim: usize) -> MatVar {
        self.mat_vars.push((dim, VarKind::Hermitian));
        MatVar(self.mat_vars.len() - 1)
    }

    pub fn add_symmetric_var(&mut self, dim: usize) -> MatVar {
        self.mat_vars.push((dim, VarKind::Symmetric));
        MatVar(self.mat_vars.len() - 1)
    }

    pub fn add_scalar_var(&mut self) -> ScalVar {
        self.n_scal += 1;
        ScalVar(self.n_scal - 1)
    }

    pub fn n_mat_vars(&self) -> usize {
        self.mat_vars.len()
    }

    pub fn n_scalar_vars(&self) -> usize {
        self.n_scal
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn mat_dim(&self, v: MatVar) -> usize {
        self.mat_vars[v.0].0
    }

    pub fn set_objective(&mut self, expr: LinExpr, maximize: bool) -> Result<()> {
        self.check_expr(&expr)?;
        self.objective = expr;
        self.maximize = maximize;
        Ok(())
    }

    pub fn add_constraint(&mut self, expr: LinExpr, sense: Sense) -> Result<()> {
        self.check_expr(&expr)?;
        self.constraints.push((expr, sense));
        Ok(())
    }

    fn check_expr(&self, expr: &LinExpr) -> Result<()> {
        for (id, a) in &expr.mat_terms {
            let (dim, kind) = *self
                .mat_vars
                .get(*id)
                .ok_or_else(|| Error::Config(format!("unknown matrix variable {id}")))?;
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::Config(format!(
                    "coefficient for matrix variable {id} is {}x{}, expected {dim}x{dim}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            if kind == VarKind::Symmetric && a.iter().any(|z| z.im.abs() > 1e-12) {
                return Err(Error::Config(format!(
                    "coefficient for real symmetric variable {id} has imaginary entries"
                )));
            }
            if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numeric("non-finite constraint coefficient".into()));
            }
        }
        for (id, c) in &expr.scal_terms {
            if *id >= self.n_scal {
                return Err(Error::Config(format!("unknown scalar variable {id}")));
            }
            if !c.is_finite() {
                return Err(Error::Numeric("non-finite constraint coefficient".into()));
            }
        }
        if !expr.constant.is_finite() {
            return Err(Error::Numeric("non-finite constraint constant".into()));
        }
        Ok(())
    }

    /// Signed residuals of every constraint at the given point
    /// (`<= 0` satisfied for inequalities, `|.|` for equalities).
    pub fn constraint_residuals(&self, mats: &[Hermitian], scals: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|(expr, sense)| {
                let v = expr.eval(mats, scals);
                match sense {
                    Sense::Eq => v.abs(),
                    Sense::Le => v,
                }
            })
            .collect()
    }

    /// Evaluate the objective expression at a point (in the problem sense).
    pub fn objective_value(&self, mats: &[Hermitian], scals: &[f64]) -> f64 {
        self.objective.eval(mats, scals)
    }

    // -- lowering -----------------------------------------------------------

    /// Embedded svec dimension of matrix variable `i`.
    fn block_len(&self, i: usize) -> usize {
        let (dim, kind) = self.mat_vars[i];
        let n = match kind {
            VarKind::Hermitian => 2 * dim,
            VarKind::Symmetric => dim,
        };
        n * (n + 1) / 2
    }

    fn block_offset(&self, i: usize) -> usize {
        self.n_scal + (0..i).map(|j| self.block_len(j)).sum::<usize>()
    }

    fn total_cols(&self) -> usize {
        self.n_scal + (0..self.mat_vars.len()).map(|j| self.block_len(j)).sum::<usize>()
    }

    /// svec coefficients of `Tr(A X_i)` in the embedded variable block.
    fn coeff_svec(&self, i: usize, a: &CMat) -> Vec<f64> {
        let (_, kind) = self.mat_vars[i];
        match kind {
            VarKind::Hermitian => {
                // Tr(A M) = 0.5 * <embed(A), embed(M)>
                let e = real_embed(&Hermitian::symmetrized(a.clone()).expect("validated")).scale(0.5);
                mat_to_svec(&e)
            }
            VarKind::Symmetric => {
                let r = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].re);
                mat_to_svec(&r)
            }
        }
    }

    /// Solve with the interior-point backend at tolerance `tol`.
    pub fn solve(&self, tol: f64) -> Result<SdpSolution> {
        if !(tol > 0.0) {
            return Err(Error::Config(format!("solver tolerance must be positive, got {tol}")));
        }
        let t0 = Instant::now();
        let first = self.solve_once(tol)?;
        let solution = match first.status {
            SolverStatus::Solved => self.extract(first, SolveStatus::Optimal, t0),
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                self.empty_solution(SolveStatus::Infeasible, first, t0)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                self.empty_solution(SolveStatus::Unbounded, first, t0)
            }
            _ => {
                // reduced-accuracy retry
                let second = self.solve_once(RETRY_TOL.max(tol))?;
                match second.status {
                    SolverStatus::Solved | SolverStatus::AlmostSolved => {
                        self.extract(second, SolveStatus::Inaccurate, t0)
                    }
                    SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                        self.empty_solution(SolveStatus::Infeasible, second, t0)
                    }
                    SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                        self.empty_solution(SolveStatus::Unbounded, second, t0)
                    }
                    other => {
                        let mut sol = self.empty_solution(SolveStatus::Failed, second, t0);
                        sol.diagnostic = Some(format!("backend status {other:?} after retry"));
                        sol
                    }
                }
            }
        };
        Ok(solution)
    }

    fn empty_solution(
        &self,
        status: SolveStatus,
        raw: RawSolve,
        t0: Instant,
    ) -> SdpSolution {
        SdpSolution {
            mats: self
                .mat_vars
                .iter()
                .map(|(d, _)| Hermitian::zeros(*d))
                .collect(),
            scals: vec![0.0; self.n_scal],
            objective: f64::NAN,
            status,
            iterations: raw.iterations,
            wall_time: t0.elapsed(),
            diagnostic: Some(format!("backend status {:?}", raw.status)),
        }
    }

    fn extract(&self, raw: RawSolve, status: SolveStatus, t0: Instant) -> SdpSolution {
        let scals = raw.x[..self.n_scal].to_vec();
        let mut mats = Vec::with_capacity(self.mat_vars.len());
        for (i, (dim, kind)) in self.mat_vars.iter().enumerate() {
            let off = self.block_offset(i);
            let len = self.block_len(i);
            let n = match kind {
                VarKind::Hermitian => 2 * dim,
                VarKind::Symmetric => *dim,
            };
            let x = svec_to_mat(&raw.x[off..off + len], n);
            let h = match kind {
                VarKind::Hermitian => real_unembed(&x).expect("embedded block is square"),
                VarKind::Symmetric => Hermitian::symmetrized(CMat::from_fn(n, n, |i, j| {
                    Complex64::new(x[(i, j)], 0.0)
                }))
                .expect("square"),
            };
            mats.push(h);
        }
        // clarabel minimizes q'x without the constant; restore sense + offset
        let solver_obj = if self.maximize { -raw.obj } else { raw.obj } + self.objective.constant;
        SdpSolution {
            mats,
            scals,
            objective: solver_obj,
            status,
            iterations: raw.iterations,
            wall_time: t0.elapsed(),
            diagnostic: None,
        }
    }

    fn solve_once(&self, tol: f64) -> Result<RawSolve> {
        let n = self.total_cols();

        // objective vector
        let mut q = vec![0.0; n];
        let sign = if self.maximize { -1.0 } else { 1.0 };
        for (id, c) in &self.objective.scal_terms {
            q[*id] += sign * c;
        }
        for (id, a) in &self.objective.mat_terms {
            let off = self.block_offset(*id);
            for (j, v) in self.coeff_svec(*id, a).into_iter().enumerate() {
                if v != 0.0 {
                    q[off + j] += sign * v;
                }
            }
        }

        // constraint rows: equalities first, then inequalities, then the PSD
        // cone rows that tie each variable block to a PSD triangle cone
        let mut trip: Vec<(usize, usize, f64)> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        let mut row = 0;
        let push_expr = |expr: &LinExpr, row: usize, trip: &mut Vec<(usize, usize, f64)>| {
            for (id, c) in &expr.scal_terms {
                trip.push((row, *id, *c));
            }
            for (id, a) in &expr.mat_terms {
                let off = self.block_offset(*id);
                for (j, v) in self.coeff_svec(*id, a).into_iter().enumerate() {
                    if v != 0.0 {
                        trip.push((row, off + j, v));
                    }
                }
            }
        };
        for (expr, sense) in self.constraints.iter().filter(|(_, s)| *s == Sense::Eq) {
            debug_assert_eq!(*sense, Sense::Eq);
            push_expr(expr, row, &mut trip);
            b.push(-expr.constant);
            row += 1;
        }
        let n_eq = row;
        for (expr, _) in self.constraints.iter().filter(|(_, s)| *s == Sense::Le) {
            push_expr(expr, row, &mut trip);
            b.push(-expr.constant);
            row += 1;
        }
        let n_le = row - n_eq;
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if n_eq > 0 {
            cones.push(ZeroConeT(n_eq));
        }
        if n_le > 0 {
            cones.push(NonnegativeConeT(n_le));
        }
        for (i, (dim, kind)) in self.mat_vars.iter().enumerate() {
            let off = self.block_offset(i);
            let len = self.block_len(i);
            for j in 0..len {
                trip.push((row, off + j, -1.0));
                b.push(0.0);
                row += 1;
            }
            let cone_dim = match kind {
                VarKind::Hermitian => 2 * dim,
                VarKind::Symmetric => *dim,
            };
            cones.push(PSDTriangleConeT(cone_dim));
        }

        let a = csc_from_triplets(row, n, &mut trip);
        let p = CscMatrix::<f64>::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .direct_solve_method("faer".to_string())
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .max_iter(100)
            .build()
            .map_err(|e| Error::Solver(format!("settings: {e}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings);
        solver.solve();
        Ok(RawSolve {
            x: std::mem::take(&mut solver.solution.x),
            obj: solver.solution.obj_val,
            status: solver.solution.status,
            iterations: solver.solution.iterations,
        })
    }

    /// Dump the lowered problem in a plain-text, SDPA-like sparse format:
    /// a header with dimensions, the objective as `obj <col> <value>` lines,
    /// and one `con <row> <col> <value> ; rhs <b> ; cone <name>` section per
    /// constraint row group.
    pub fn write_sdpa(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "* star-rsma sdp dump")?;
        writeln!(
            w,
            "* {} matrix vars, {} scalars, {} constraints",
            self.mat_vars.len(),
            self.n_scal,
            self.constraints.len()
        )?;
        for (i, (dim, kind)) in self.mat_vars.iter().enumerate() {
            writeln!(w, "var X{i} dim {dim} kind {kind:?} psd")?;
        }
        writeln!(w, "maximize {}", self.maximize)?;
        let dump_expr = |w: &mut dyn Write, e: &LinExpr| -> std::io::Result<()> {
            for (id, c) in &e.scal_terms {
                writeln!(w, "  s{id} {c}")?;
            }
            for (id, a) in &e.mat_terms {
                for r in 0..a.nrows() {
                    for c in r..a.ncols() {
                        let z = a[(r, c)];
                        if z.norm_sqr() > 0.0 {
                            writeln!(w, "  X{id} {r} {c} {} {}", z.re, z.im)?;
                        }
                    }
                }
            }
            if e.constant != 0.0 {
                writeln!(w, "  const {}", e.constant)?;
            }
            Ok(())
        };
        writeln!(w, "objective")?;
        dump_expr(w, &self.objective)?;
        for (i, (expr, sense)) in self.constraints.iter().enumerate() {
            writeln!(w, "constraint {i} {}", if *sense == Sense::Eq { "eq" } else { "le" })?;
            dump_expr(w, expr)?;
        }
        Ok(())
    }
}

struct RawSolve {
    x: Vec<f64>,
    obj: f64,
    status: SolverStatus,
    iterations: u32,
}

// svec packing in the backend's convention: upper triangle, column-major,
// off-diagonal entries scaled by sqrt(2)
fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn mat_to_svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    for c in 0..n {
        for r in 0..=c {
            if r == c {
                out.push(m[(r, c)]);
            } else {
                out.push((m[(r, c)] + m[(c, r)]) * std::f64::consts::FRAC_1_SQRT_2);
            }
        }
    }
    out
}

fn svec_to_mat(x: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut idx = 0;
    for c in 0..n {
        for r in 0..=c {
            if r == c {
                m[(r, c)] = x[idx];
            } else {
                let v = x[idx] * std::f64::consts::FRAC_1_SQRT_2;
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
            idx += 1;
        }
    }
    m
}

fn csc_from_triplets(rows: usize, cols: usize, trip: &mut Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    trip.sort_by_key(|&(r, c, _)| (c, r));
    let mut colptr = vec![0usize; cols + 1];
    let mut rowval: Vec<usize> = Vec::with_capacity(trip.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(trip.len());
    let mut last: Option<(usize, usize)> = None;
    for &(r, c, v) in trip.iter() {
        if last == Some((c, r)) {
            *nzval.last_mut().unwrap() += v;
        } else {
            colptr[c + 1] += 1;
            rowval.push(r);
            nzval.push(v);
            last = Some((c, r));
        }
    }
    for c in 0..cols {
        colptr[c + 1] += colptr[c];
    }
    CscMatrix::new(rows, cols, colptr, rowval, nzval)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
