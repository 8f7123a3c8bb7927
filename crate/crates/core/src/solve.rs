//! Exact rational linear algebra and the coefficient-ansatz solvers that
//! turn the conformal-Killing spaces into computed dimensions and bases.
//!
//! Everything here is exact: Gaussian elimination over arbitrary-precision
//! rationals with full pivoting, polynomial ansatz spaces split by
//! homogeneous degree (the defining equations have constant coefficients in
//! the reference splitting, so solution spaces are graded), and pointwise
//! fiber algebra on the tractor fiber `ℝ^{n+2}` for the constant-coefficient
//! symmetry spaces.

use serde::{Deserialize, Serialize};

use crate::arith::{rat, ratio, Mono, Poly, Rational, Scalar};
use crate::conformal::ScaleSpec;
use crate::error::{Error, Result};
use crate::prolong;
use crate::tensor::{multi_indices, Variance, WeightedTensorField};
use crate::tractor::{scale_tractor, MixedField, ScaleTractor};

// ---------------------------------------------------------------------
// Dense rational matrices
// ---------------------------------------------------------------------

/// Dense matrix of arbitrary-precision rationals, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> RationalMatrix {
        RationalMatrix {
            rows,
            cols,
            entries: vec![rat(0); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<RationalMatrix> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch {
                expected: ncols,
                got: rows.iter().map(Vec::len).find(|&l| l != ncols).unwrap_or(0),
            });
        }
        Ok(RationalMatrix {
            rows: nrows,
            cols: ncols,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Rational {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Rational) {
        self.entries[r * self.cols + c] = v;
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Rational]) -> Result<Vec<Rational>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| {
                let mut acc = rat(0);
                for c in 0..self.cols {
                    let e = self.get(r, c);
                    if *e != rat(0) {
                        acc += e * &v[c];
                    }
                }
                acc
            })
            .collect())
    }
}

/// Size proxy used to pick simple pivots: total bit length of numerator and
/// denominator.
fn complexity(r: &Rational) -> u64 {
    r.numer().bits() + r.denom().bits()
}

/// Reduce `a` to reduced row echelon form in place with full pivoting over
/// the first `eligible` columns (columns beyond that — e.g. an augmented
/// right-hand side — are carried along but never pivoted on).  Returns the
/// rank and the column permutation: `col_of[j]` is the original index of the
/// column now in position `j`.
fn rref(a: &mut [Vec<Rational>], ncols: usize, eligible: usize) -> (usize, Vec<usize>) {
    let nrows = a.len();
    let mut col_of: Vec<usize> = (0..ncols).collect();
    let zero = rat(0);
    let mut rank = 0;
    while rank < nrows && rank < eligible {
        // Full pivoting: pick the simplest nonzero entry in the remaining
        // block to keep intermediate entries small.
        let mut best: Option<(usize, usize, u64)> = None;
        for (i, row) in a.iter().enumerate().skip(rank) {
            for (j, entry) in row.iter().enumerate().take(eligible).skip(rank) {
                if *entry != zero {
                    let c = complexity(entry);
                    if best.map_or(true, |(_, _, bc)| c < bc) {
                        best = Some((i, j, c));
                    }
                    if c <= 2 {
                        break;
                    }
                }
            }
            if matches!(best, Some((_, _, c)) if c <= 2) {
                break;
            }
        }
        let Some((pi, pj, _)) = best else { break };
        a.swap(rank, pi);
        if pj != rank {
            for row in a.iter_mut() {
                row.swap(rank, pj);
            }
            col_of.swap(rank, pj);
        }
        let pivot = a[rank][rank].clone();
        for entry in a[rank].iter_mut() {
            if *entry != zero {
                *entry /= &pivot;
            }
        }
        for i in 0..nrows {
            if i == rank || a[i][rank] == zero {
                continue;
            }
            let factor = a[i][rank].clone();
            let (pivot_row, target) = if i < rank {
                let (head, tail) = a.split_at_mut(rank);
                (&tail[0], &mut head[i])
            } else {
                let (head, tail) = a.split_at_mut(i);
                (&head[rank], &mut tail[0])
            };
            for (t, p) in target.iter_mut().zip(pivot_row.iter()) {
                if *p != zero {
                    *t -= &factor * p;
                }
            }
            target[rank] = rat(0);
        }
        rank += 1;
    }
    (rank, col_of)
}

/// Exact rank and a basis of the (right) nullspace.  Every returned vector
/// `v` satisfies `M v = 0` exactly.
pub fn rank_nullspace(m: &RationalMatrix) -> (usize, Vec<Vec<Rational>>) {
    let mut a: Vec<Vec<Rational>> = (0..m.rows)
        .map(|r| (0..m.cols).map(|c| m.get(r, c).clone()).collect())
        .collect();
    let (rank, col_of) = rref(&mut a, m.cols, m.cols);
    let mut basis = Vec::with_capacity(m.cols - rank);
    for free in rank..m.cols {
        let mut v = vec![rat(0); m.cols];
        v[col_of[free]] = rat(1);
        for (i, row) in a.iter().enumerate().take(rank) {
            v[col_of[i]] = -row[free].clone();
        }
        basis.push(v);
    }
    (rank, basis)
}

/// A particular exact solution of `M x = b`, or `None` if the system is
/// inconsistent.  Free variables are set to zero.
pub fn solve_linear(m: &RationalMatrix, rhs: &[Rational]) -> Result<Option<Vec<Rational>>> {
    if rhs.len() != m.rows {
        return Err(Error::DimensionMismatch {
            expected: m.rows,
            got: rhs.len(),
        });
    }
    let mut a: Vec<Vec<Rational>> = (0..m.rows)
        .map(|r| {
            let mut row: Vec<Rational> = (0..m.cols).map(|c| m.get(r, c).clone()).collect();
            row.push(rhs[r].clone());
            row
        })
        .collect();
    let (rank, col_of) = rref(&mut a, m.cols + 1, m.cols);
    let zero = rat(0);
    for row in a.iter().skip(rank) {
        if row[m.cols] != zero {
            return Ok(None);
        }
    }
    let mut x = vec![rat(0); m.cols];
    for (i, row) in a.iter().enumerate().take(rank) {
        x[col_of[i]] = row[m.cols].clone();
    }
    Ok(Some(x))
}

// ---------------------------------------------------------------------
// Monomial bookkeeping
// ---------------------------------------------------------------------

/// All exponent vectors of total degree exactly `d` in `n` variables.
pub fn monomials_of_degree(n: usize, d: u32) -> Vec<Mono> {
    fn rec(out: &mut Vec<Mono>, prefix: &mut Vec<u32>, vars_left: usize, deg_left: u32) {
        if vars_left == 1 {
            prefix.push(deg_left);
            out.push(Mono(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=deg_left).rev() {
            prefix.push(e);
            rec(out, prefix, vars_left - 1, deg_left - e);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    rec(&mut out, &mut Vec::new(), n, d);
    out
}

fn monomial_scalar(n: usize, m: &Mono) -> Scalar {
    Scalar::from_poly(Poly::from_terms(n, [(m.0.clone(), rat(1))]))
}

// ---------------------------------------------------------------------
// Graded coefficient-ansatz solvers
// ---------------------------------------------------------------------

/// Sparse accumulation of one linear-system column keyed by
/// (flattened component index, monomial).
type RowKey = (usize, Mono);

fn push_poly_rows(
    col: &mut Vec<(RowKey, Rational)>,
    component: usize,
    value: &Scalar,
    scale_den: &Rational,
) {
    let p = value
        .as_poly()
        .expect("ansatz residuals stay polynomial over polynomial splittings");
    for (m, c) in p.terms() {
        col.push(((component, m.clone()), c * scale_den));
    }
}

/// Assemble sparse columns into a dense matrix, assigning row indices in
/// order of first appearance.
fn columns_to_matrix(columns: &[Vec<(RowKey, Rational)>]) -> RationalMatrix {
    use std::collections::BTreeMap;
    let mut row_index: BTreeMap<&RowKey, usize> = BTreeMap::new();
    for col in columns {
        for (key, _) in col {
            let next = row_index.len();
            row_index.entry(key).or_insert(next);
        }
    }
    let mut m = RationalMatrix::zeros(row_index.len(), columns.len());
    for (j, col) in columns.iter().enumerate() {
        for (key, value) in col {
            let i = row_index[key];
            let cur = m.get(i, j).clone();
            m.set(i, j, cur + value);
        }
    }
    m
}

/// Canonical flat index for a sorted multi-index, used to deduplicate the
/// rows of totally symmetric residuals.
fn sorted_flat(idx: &[usize], n: usize) -> usize {
    let mut s = idx.to_vec();
    s.sort_unstable();
    s.iter().fold(0, |acc, &v| acc * n + v)
}

/// One homogeneous-degree subproblem: its solutions and the exact shape and
/// rank of the coefficient matrix that produced them.
struct GradedSolve {
    solutions: Vec<WeightedTensorField>,
    rows: usize,
    cols: usize,
    rank: usize,
}

/// Homogeneous-degree-`d` solutions of the conformal Killing vector
/// equation: weight-2 1-forms `k` with `tracefree((∇k)_(ab)) = 0`.
fn ckv_graded(n: usize, d: u32, flat: &ScaleSpec) -> Result<GradedSolve> {
    let monos = monomials_of_degree(n, d);
    let mut columns = Vec::new();
    let mut unknowns = Vec::new();
    for a in 0..n {
        for m in &monos {
            let mut e = WeightedTensorField::zeros(n, vec![Variance::Co], 2);
            *e.get_mut(&[a]) = monomial_scalar(n, m);
            let residual = prolong::ck_vector_residual(&e, flat)?;
            let mut col = Vec::new();
            for idx in multi_indices(n, 2) {
                if idx[0] > idx[1] {
                    continue;
                }
                let v = residual.get(&idx);
                if !v.is_zero() {
                    push_poly_rows(&mut col, sorted_flat(&idx, n), v, &rat(1));
                }
            }
            columns.push(col);
            unknowns.push((a, m.clone()));
        }
    }
    let matrix = columns_to_matrix(&columns);
    let (rank, kernel) = rank_nullspace(&matrix);
    let solutions = kernel
        .into_iter()
        .map(|v| {
            let mut k = WeightedTensorField::zeros(n, vec![Variance::Co], 2);
            for (coeff, (a, m)) in v.iter().zip(&unknowns) {
                if *coeff != rat(0) {
                    let term = monomial_scalar(n, m).scale(coeff);
                    let cur = k.get(&[*a]).clone();
                    *k.get_mut(&[*a]) = &cur + &term;
                }
            }
            k
        })
        .collect();
    Ok(GradedSolve {
        solutions,
        rows: matrix.rows(),
        cols: matrix.cols(),
        rank,
    })
}

/// Homogeneous-degree-`d` solutions of the rank-2 conformal Killing
/// equation: symmetric trace-free weight-4 2-tensors `k` with
/// `tracefree(∇_(a k_bc)) = 0`.
fn ckt_graded(n: usize, d: u32, flat: &ScaleSpec) -> Result<GradedSolve> {
    let monos = monomials_of_degree(n, d);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a..n).map(move |b| (a, b)))
        .collect();
    // The trace constraint occupies component indices disjoint from the
    // rank-3 residual block.
    let trace_block = n * n * n;
    let mut columns = Vec::new();
    let mut unknowns = Vec::new();
    for &(a, b) in &pairs {
        for m in &monos {
            let mut e = WeightedTensorField::zeros(n, vec![Variance::Co, Variance::Co], 4);
            *e.get_mut(&[a, b]) = monomial_scalar(n, m);
            if a != b {
                *e.get_mut(&[b, a]) = monomial_scalar(n, m);
            }
            let mut col = Vec::new();
            // Residual of the conformal Killing equation (the trace-free
            // projector tolerates trace-carrying input; the trace itself is
            // constrained separately below).
            let residual = flat.covderiv(&e).symmetrize(&[0, 1, 2])?.tracefree_sym3()?;
            for idx in multi_indices(n, 3) {
                if !(idx[0] <= idx[1] && idx[1] <= idx[2]) {
                    continue;
                }
                let v = residual.get(&idx);
                if !v.is_zero() {
                    push_poly_rows(&mut col, sorted_flat(&idx, n), v, &rat(1));
                }
            }
            let trace = e.contract(0, 1)?;
            let t = trace.get(&[]);
            if !t.is_zero() {
                push_poly_rows(&mut col, trace_block, t, &rat(1));
            }
            columns.push(col);
            unknowns.push((a, b, m.clone()));
        }
    }
    let matrix = columns_to_matrix(&columns);
    let (rank, kernel) = rank_nullspace(&matrix);
    let solutions = kernel
        .into_iter()
        .map(|v| {
            let mut k = WeightedTensorField::zeros(n, vec![Variance::Co, Variance::Co], 4);
            for (coeff, (a, b, m)) in v.iter().zip(&unknowns) {
                if *coeff != rat(0) {
                    let term = monomial_scalar(n, m).scale(coeff);
                    let cur = k.get(&[*a, *b]).clone();
                    *k.get_mut(&[*a, *b]) = &cur + &term;
                    if a != b {
                        let cur = k.get(&[*b, *a]).clone();
                        *k.get_mut(&[*b, *a]) = &cur + &term;
                    }
                }
            }
            k
        })
        .collect();
    Ok(GradedSolve {
        solutions,
        rows: matrix.rows(),
        cols: matrix.cols(),
        rank,
    })
}

// ---------------------------------------------------------------------
// Basis reports
// ---------------------------------------------------------------------

/// The elements spanning a computed space.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Tensors(Vec<WeightedTensorField>),
    Tractors(Vec<MixedField>),
}

impl Basis {
    pub fn len(&self) -> usize {
        match self {
            Basis::Tensors(v) => v.len(),
            Basis::Tractors(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tensors(&self) -> Option<&[WeightedTensorField]> {
        match self {
            Basis::Tensors(v) => Some(v),
            Basis::Tractors(_) => None,
        }
    }

    pub fn tractors(&self) -> Option<&[MixedField]> {
        match self {
            Basis::Tractors(v) => Some(v),
            Basis::Tensors(_) => None,
        }
    }
}

/// A computed basis together with its exact-rank certificate.  For graded
/// polynomial solves the matrix shape and rank are aggregated over the
/// homogeneous-degree subproblems.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisReport {
    pub label: String,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree_bound: Option<u32>,
    pub matrix_rows: usize,
    pub matrix_cols: usize,
    pub rank: usize,
    pub basis: Basis,
}

/// Exact basis of conformal Killing 1-forms (weight 2) with polynomial
/// components of degree at most `degree_bound`.  The solve is split by
/// homogeneous degree; stability is asserted by re-solving one degree past
/// the bound and requiring no new solutions.
pub fn ckv_basis(n: usize, degree_bound: u32) -> Result<BasisReport> {
    let flat = ScaleSpec::reference(n);
    let mut basis = Vec::new();
    let mut rows = 0;
    let mut cols = 0;
    let mut rank = 0;
    for d in 0..=degree_bound {
        let solve = ckv_graded(n, d, &flat)?;
        rows += solve.rows;
        cols += solve.cols;
        rank += solve.rank;
        basis.extend(solve.solutions);
    }
    let extra = ckv_graded(n, degree_bound + 1, &flat)?;
    if !extra.solutions.is_empty() {
        return Err(Error::InternalInconsistency(format!(
            "conformal Killing 1-form space grows at degree {}: found {} new solutions",
            degree_bound + 1,
            extra.solutions.len()
        )));
    }
    for k in &basis {
        if !prolong::is_ck_vector(k, &flat)? {
            return Err(Error::InternalInconsistency(
                "computed basis element fails the conformal Killing equation".into(),
            ));
        }
    }
    Ok(BasisReport {
        label: "conformal Killing 1-forms".into(),
        dimension: basis.len(),
        degree_bound: Some(degree_bound),
        matrix_rows: rows,
        matrix_cols: cols,
        rank,
        basis: Basis::Tensors(basis),
    })
}

/// Exact basis of rank-2 conformal Killing tensors (symmetric trace-free,
/// weight 4) with polynomial components of degree at most `degree_bound`.
pub fn ckt_basis(n: usize, degree_bound: u32) -> Result<BasisReport> {
    let flat = ScaleSpec::reference(n);
    let mut basis = Vec::new();
    let mut rows = 0;
    let mut cols = 0;
    let mut rank = 0;
    for d in 0..=degree_bound {
        let solve = ckt_graded(n, d, &flat)?;
        rows += solve.rows;
        cols += solve.cols;
        rank += solve.rank;
        basis.extend(solve.solutions);
    }
    let extra = ckt_graded(n, degree_bound + 1, &flat)?;
    if !extra.solutions.is_empty() {
        return Err(Error::InternalInconsistency(format!(
            "rank-2 conformal Killing space grows at degree {}: found {} new solutions",
            degree_bound + 1,
            extra.solutions.len()
        )));
    }
    for k in &basis {
        if !prolong::is_ck_tensor(k, &flat)? {
            return Err(Error::InternalInconsistency(
                "computed basis element fails the rank-2 conformal Killing equation".into(),
            ));
        }
    }
    Ok(BasisReport {
        label: "rank-2 conformal Killing tensors".into(),
        dimension: basis.len(),
        degree_bound: Some(degree_bound),
        matrix_rows: rows,
        matrix_cols: cols,
        rank,
        basis: Basis::Tensors(basis),
    })
}

// ---------------------------------------------------------------------
// Fiber algebra on the tractor fiber ℝ^{n+2}
// ---------------------------------------------------------------------

/// Rank-4 tensor on the tractor fiber, stored dense with index
/// `((A·N + B)·N + C)·N + D`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Fiber4 {
    pub dim: usize,
    pub vals: Vec<Rational>,
}

impl Fiber4 {
    pub fn zeros(dim: usize) -> Fiber4 {
        Fiber4 {
            dim,
            vals: vec![rat(0); dim.pow(4)],
        }
    }

    pub fn idx(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.dim + b) * self.dim + c) * self.dim + d
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> &Rational {
        &self.vals[self.idx(a, b, c, d)]
    }

    pub fn is_zero(&self) -> bool {
        let zero = rat(0);
        self.vals.iter().all(|v| *v == zero)
    }

    pub fn add_scaled(&mut self, other: &Fiber4, factor: &Rational) {
        let zero = rat(0);
        for (t, o) in self.vals.iter_mut().zip(&other.vals) {
            if *o != zero {
                *t += factor * o;
            }
        }
    }

    pub fn scale(&self, factor: &Rational) -> Fiber4 {
        Fiber4 {
            dim: self.dim,
            vals: self.vals.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Tractor fiber metric: unit cross pairing between the top (0) and bottom
/// (N−1) slots, identity on the middle block.  It is its own inverse.
pub(crate) fn fiber_metric(dim: usize) -> Vec<Vec<Rational>> {
    let mut g = vec![vec![rat(0); dim]; dim];
    g[0][dim - 1] = rat(1);
    g[dim - 1][0] = rat(1);
    for i in 1..dim - 1 {
        g[i][i] = rat(1);
    }
    g
}

/// Raise an index with the fiber metric: swaps the extreme slots.
fn raise_vec(v: &[Rational]) -> Vec<Rational> {
    let mut out = v.to_vec();
    out.swap(0, v.len() - 1);
    out
}

/// `(Q ∧ P)_ABCD = Q_AC P_BD − Q_BC P_AD + Q_BD P_AC − Q_AD P_BC` for
/// symmetric fiber 2-tensors.
pub(crate) fn fiber_wedge(q: &[Vec<Rational>], p: &[Vec<Rational>]) -> Fiber4 {
    let dim = q.len();
    let mut out = Fiber4::zeros(dim);
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                for d in 0..dim {
                    let i = out.idx(a, b, c, d);
                    out.vals[i] = &q[a][c] * &p[b][d] - &q[b][c] * &p[a][d] + &q[b][d] * &p[a][c]
                        - &q[a][d] * &p[b][c];
                }
            }
        }
    }
    out
}

/// Trace `R_ABC{}^B` with the fiber metric, giving a symmetric 2-tensor in
/// the outer slots `(A, C)`.
fn fiber_ricci(r: &Fiber4) -> Vec<Vec<Rational>> {
    let dim = r.dim;
    let g = fiber_metric(dim);
    let mut out = vec![vec![rat(0); dim]; dim];
    let zero = rat(0);
    for a in 0..dim {
        for c in 0..dim {
            let mut acc = rat(0);
            for b in 0..dim {
                for d in 0..dim {
                    if g[b][d] != zero {
                        acc += &g[b][d] * r.get(a, b, c, d);
                    }
                }
            }
            out[a][c] = acc;
        }
    }
    out
}

/// Trace-free part of a fiber tensor with Riemann symmetries:
/// `R̊ = R − (g ∧ P)` with `P_AC = (1/N−2... )` — concretely
/// `P_AC = (Ric_AC − J g_AC)/n` and `J = Ric_A{}^A / (2(n+1))` on an
/// `(n+2)`-dimensional fiber.
pub(crate) fn fiber_tracefree(r: &Fiber4, n: usize) -> (Fiber4, Vec<Vec<Rational>>) {
    let dim = n + 2;
    let g = fiber_metric(dim);
    let ric = fiber_ricci(r);
    let mut scalar = rat(0);
    let zero = rat(0);
    for a in 0..dim {
        for c in 0..dim {
            if g[a][c] != zero {
                scalar += &g[a][c] * &ric[a][c];
            }
        }
    }
    let j = scalar / rat(2 * (n as i64 + 1));
    let mut p = vec![vec![rat(0); dim]; dim];
    for a in 0..dim {
        for c in 0..dim {
            p[a][c] = (&ric[a][c] - &j * &g[a][c]) / rat(n as i64);
        }
    }
    let mut out = r.clone();
    out.add_scaled(&fiber_wedge(&g, &p), &rat(-1));
    (out, p)
}

/// `I^A R_ABCD` for a fiber tensor and a covector `i` (stored components);
/// returns the rank-3 array flattened as `(B, C, D)`.
pub(crate) fn fiber_contract_first(r: &Fiber4, i: &[Rational]) -> Vec<Rational> {
    let dim = r.dim;
    let iu = raise_vec(i);
    let zero = rat(0);
    let mut out = vec![rat(0); dim.pow(3)];
    for b in 0..dim {
        for c in 0..dim {
            for d in 0..dim {
                let mut acc = rat(0);
                for (a, ia) in iu.iter().enumerate() {
                    if *ia != zero {
                        acc += ia * r.get(a, b, c, d);
                    }
                }
                out[(b * dim + c) * dim + d] = acc;
            }
        }
    }
    out
}

/// The Killing-scale obstruction `I^A R_AB[CD I_E]` of a fiber Weyl tensor,
/// flattened over `(B, C, D, E)`.
pub(crate) fn fiber_ks_obstruction(w: &Fiber4, i: &[Rational]) -> Vec<Rational> {
    let dim = w.dim;
    let iw = fiber_contract_first(w, i); // (B, C, D)
    let at = |b: usize, c: usize, d: usize| &iw[(b * dim + c) * dim + d];
    let mut out = vec![rat(0); dim.pow(4)];
    let sixth = ratio(1, 6);
    for b in 0..dim {
        for c in 0..dim {
            for d in 0..dim {
                for e in 0..dim {
                    // Antisymmetrize (C, D, E) over the product iw_BCD · i_E.
                    let v = (at(b, c, d) * &i[e] + at(b, d, e) * &i[c] + at(b, e, c) * &i[d]
                        - at(b, d, c) * &i[e]
                        - at(b, c, e) * &i[d]
                        - at(b, e, d) * &i[c])
                        * &sixth;
                    out[((b * dim + c) * dim + d) * dim + e] = v;
                }
            }
        }
    }
    out
}

/// Does the fiber tensor have full Riemann symmetries (pair skew, pair
/// exchange, first Bianchi)?
pub(crate) fn fiber_is_riemann(r: &Fiber4) -> bool {
    let dim = r.dim;
    let zero = rat(0);
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                for d in 0..dim {
                    if r.get(a, b, c, d) + r.get(b, a, c, d) != zero
                        || r.get(a, b, c, d) + r.get(a, b, d, c) != zero
                        || r.get(a, b, c, d) - r.get(c, d, a, b) != zero
                        || r.get(a, b, c, d) + r.get(a, c, d, b) + r.get(a, d, b, c) != zero
                    {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Constant-coefficient basis of the fiber symmetry spaces: tensors in
/// `Sym²Λ²` satisfying the first Bianchi identity (`riemann`), optionally
/// also trace-free (`weyl`).
fn fiber_symmetry_basis(n: usize, tracefree: bool) -> Vec<Fiber4> {
    let dim = n + 2;
    let g = fiber_metric(dim);
    // Coordinates: unordered pairs of antisymmetric index pairs.
    let mut duos = Vec::new();
    for a in 0..dim {
        for b in (a + 1)..dim {
            duos.push((a, b));
        }
    }
    let m = duos.len();
    let mut coords = Vec::new(); // (p, q) with p <= q over duo indices
    for p in 0..m {
        for q in p..m {
            coords.push((p, q));
        }
    }
    // Value of coordinate k at slot (a,b,c,d): sum over the symmetries.
    let duo_sign = |a: usize, b: usize, p: usize| -> i64 {
        let (x, y) = duos[p];
        if (a, b) == (x, y) {
            1
        } else if (a, b) == (y, x) {
            -1
        } else {
            0
        }
    };
    let coord_value = |k: usize, a: usize, b: usize, c: usize, d: usize| -> i64 {
        let (p, q) = coords[k];
        let mut v = duo_sign(a, b, p) * duo_sign(c, d, q);
        if p != q {
            v += duo_sign(a, b, q) * duo_sign(c, d, p);
        }
        v
    };
    // Constraint rows: first Bianchi on each 4-subset, then (optionally)
    // the Ricci trace on each symmetric slot pair.
    let mut rows = Vec::new();
    for a in 0..dim {
        for b in (a + 1)..dim {
            for c in (b + 1)..dim {
                for d in (c + 1)..dim {
                    let row: Vec<Rational> = (0..coords.len())
                        .map(|k| {
                            rat(coord_value(k, a, b, c, d)
                                + coord_value(k, a, c, d, b)
                                + coord_value(k, a, d, b, c))
                        })
                        .collect();
                    rows.push(row);
                }
            }
        }
    }
    if tracefree {
        let zero = rat(0);
        for a in 0..dim {
            for c in a..dim {
                let row: Vec<Rational> = (0..coords.len())
                    .map(|k| {
                        let mut acc = rat(0);
                        for b in 0..dim {
                            for d in 0..dim {
                                if g[b][d] != zero {
                                    acc += &g[b][d] * &rat(coord_value(k, a, b, c, d));
                                }
                            }
                        }
                        acc
                    })
                    .collect();
                rows.push(row);
            }
        }
    }
    let matrix = RationalMatrix::from_rows(rows).expect("constraint rows share a length");
    let (_, kernel) = rank_nullspace(&matrix);
    kernel
        .into_iter()
        .map(|v| {
            let mut t = Fiber4::zeros(dim);
            for a in 0..dim {
                for b in 0..dim {
                    for c in 0..dim {
                        for d in 0..dim {
                            let mut acc = rat(0);
                            for (k, coeff) in v.iter().enumerate() {
                                if *coeff != rat(0) {
                                    let cv = coord_value(k, a, b, c, d);
                                    if cv != 0 {
                                        acc += coeff * &rat(cv);
                                    }
                                }
                            }
                            let i = t.idx(a, b, c, d);
                            t.vals[i] = acc;
                        }
                    }
                }
            }
            t
        })
        .collect()
}

fn fiber_to_mixed(t: &Fiber4, splitting: &ScaleSpec) -> MixedField {
    let n = splitting.n();
    let dim = n + 2;
    let mut out = MixedField::zeros(splitting.clone(), 4, Vec::new(), 0);
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                for d in 0..dim {
                    let v = t.get(a, b, c, d);
                    if *v != rat(0) {
                        out.set(&[a, b, c, d], &[], Scalar::from_rational(n, v.clone()));
                    }
                }
            }
        }
    }
    out
}

/// Dimension of the classical fiber spaces, used as cross-checks:
/// Riemann tensors `N²(N²−1)/12` and Weyl tensors (Riemann minus
/// symmetric-pair traces).
pub fn riemann_space_dim(big_n: usize) -> usize {
    big_n * big_n * (big_n * big_n - 1) / 12
}

pub fn weyl_space_dim(big_n: usize) -> usize {
    riemann_space_dim(big_n) - big_n * (big_n + 1) / 2
}

/// Pointwise (constant-coefficient) basis of the space of algebraic Weyl
/// tensors on the tractor fiber `ℝ^{n+2}`, realized as rank-4 tractors in
/// the reference splitting.
pub fn weyl_space_basis(n: usize) -> Result<BasisReport> {
    let flat = ScaleSpec::reference(n);
    let fib = fiber_symmetry_basis(n, true);
    let expected = weyl_space_dim(n + 2);
    if fib.len() != expected {
        return Err(Error::InternalInconsistency(format!(
            "fiber Weyl space has dimension {}, expected {expected}",
            fib.len()
        )));
    }
    let duos = (n + 2) * (n + 1) / 2;
    let coords = duos * (duos + 1) / 2;
    let basis: Vec<MixedField> = fib.iter().map(|t| fiber_to_mixed(t, &flat)).collect();
    for b in &basis {
        if !prolong::is_weyl_symmetric(b)? {
            return Err(Error::InternalInconsistency(
                "fiber basis element fails the Weyl symmetry predicate".into(),
            ));
        }
    }
    Ok(BasisReport {
        label: "algebraic Weyl tensors on the tractor fiber".into(),
        dimension: basis.len(),
        degree_bound: None,
        matrix_rows: 0,
        matrix_cols: coords,
        rank: coords - basis.len(),
        basis: Basis::Tractors(basis),
    })
}

// ---------------------------------------------------------------------
// Einstein-compatible dimension
// ---------------------------------------------------------------------

fn constant_tractor_value(i: &ScaleTractor, n: usize) -> Result<Vec<Rational>> {
    let flat = ScaleSpec::reference(n);
    let field = i.in_splitting(&flat)?;
    let origin = vec![rat(0); n];
    (0..n + 2)
        .map(|a| field.get(&[a], &[]).eval(&origin))
        .collect()
}

/// Dimension (with certificate and fiber basis) of the space of algebraic
/// Weyl tensors annihilated by the Killing-scale obstruction of the given
/// Einstein scale — equivalently, of rank-2 conformal Killing tensors for
/// which the scale is a Killing scale.  Requires a parallel scale tractor
/// with nonzero square.
pub fn einstein_compatible_dim(n: usize, scale: &ScaleSpec) -> Result<BasisReport> {
    let i = scale_tractor(scale)?;
    if !i.is_parallel() {
        return Err(Error::PreconditionFailed(
            "the scale tractor is not parallel (the scale is not Einstein)".into(),
        ));
    }
    let iota = i
        .iota()
        .constant_value()
        .ok_or_else(|| Error::PreconditionFailed("scale tractor square is not constant".into()))?;
    if iota == rat(0) {
        return Err(Error::PreconditionFailed(
            "the scale tractor is null; the criterion assumes nonzero square".into(),
        ));
    }
    let i0 = constant_tractor_value(&i, n)?;
    let weyl = fiber_symmetry_basis(n, true);
    let columns: Vec<Vec<Rational>> = weyl
        .iter()
        .map(|w| fiber_ks_obstruction(w, &i0))
        .collect();
    let rows = columns.first().map_or(0, Vec::len);
    let mut m = RationalMatrix::zeros(rows, columns.len());
    for (j, col) in columns.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            if *v != rat(0) {
                m.set(r, j, v.clone());
            }
        }
    }
    let (rank, kernel) = rank_nullspace(&m);
    let expected = n * (n + 1) * (n + 1) * (n + 2) / 12 - 1;
    if kernel.len() != expected {
        return Err(Error::InternalInconsistency(format!(
            "Einstein-compatible space has dimension {}, expected {expected}",
            kernel.len()
        )));
    }

    // Cross-checks: each kernel element reconstructs to a fiber tensor with
    // Riemann symmetries, orthogonal to the scale tractor, whose trace-free
    // part returns the element; and the pure-trace kernel element of that
    // correspondence is the wedge square built from the metric and the scale
    // tractor.
    let dim = n + 2;
    let g = fiber_metric(dim);
    let mut members = Vec::new();
    for v in &kernel {
        let mut w = Fiber4::zeros(dim);
        for (coeff, basis_elt) in v.iter().zip(&weyl) {
            if *coeff != rat(0) {
                w.add_scaled(basis_elt, coeff);
            }
        }
        let r = fiber_reconstruct(&w, &i0, &iota);
        if !fiber_is_riemann(&r) {
            return Err(Error::InternalInconsistency(
                "reconstructed fiber tensor loses the Riemann symmetries".into(),
            ));
        }
        let zero = rat(0);
        if fiber_contract_first(&r, &i0).iter().any(|x| *x != zero) {
            return Err(Error::InternalInconsistency(
                "reconstructed fiber tensor is not orthogonal to the scale tractor".into(),
            ));
        }
        let (tf, _) = fiber_tracefree(&r, n);
        let mut back = tf;
        back.add_scaled(&w.scale(&iota), &rat(-1));
        if !back.is_zero() {
            return Err(Error::InternalInconsistency(
                "trace-free part of the reconstruction does not return the input".into(),
            ));
        }
        members.push(w);
    }
    // The pure-trace kernel element: g ∧ (g − (2/ι) I⊗I) is orthogonal to I
    // with vanishing trace-free part.
    let mut gi = vec![vec![rat(0); dim]; dim];
    let two_over_iota = rat(2) / &iota;
    for a in 0..dim {
        for b in 0..dim {
            gi[a][b] = &g[a][b] - &(&two_over_iota * &(&i0[a] * &i0[b]));
        }
    }
    let identity_elt = fiber_wedge(&g, &gi);
    let zero = rat(0);
    if fiber_contract_first(&identity_elt, &i0)
        .iter()
        .any(|x| *x != zero)
        || !fiber_tracefree(&identity_elt, n).0.is_zero()
    {
        return Err(Error::InternalInconsistency(
            "the pure-trace wedge element fails its defining identities".into(),
        ));
    }

    let flat = ScaleSpec::reference(n);
    let basis: Vec<MixedField> = members.iter().map(|w| fiber_to_mixed(w, &flat)).collect();
    Ok(BasisReport {
        label: "Einstein-compatible algebraic Weyl tensors".into(),
        dimension: kernel.len(),
        degree_bound: None,
        matrix_rows: rows,
        matrix_cols: weyl.len(),
        rank,
        basis: Basis::Tractors(basis),
    })
}

/// The reconstruction map: `R = ι W + g ∧ P` with `P_BD = −I^A I^C W_ABCD`.
pub(crate) fn fiber_reconstruct(w: &Fiber4, i: &[Rational], iota: &Rational) -> Fiber4 {
    let dim = w.dim;
    let g = fiber_metric(dim);
    let iw = fiber_contract_first(w, i); // (B, C, D) = I^A W_ABCD
    let iu = raise_vec(i);
    let zero = rat(0);
    let mut p = vec![vec![rat(0); dim]; dim];
    for b in 0..dim {
        for d in 0..dim {
            let mut acc = rat(0);
            for (c, ic) in iu.iter().enumerate() {
                if *ic != zero {
                    acc += ic * &iw[(b * dim + c) * dim + d];
                }
            }
            p[b][d] = -acc;
        }
    }
    let mut r = w.scale(iota);
    r.add_scaled(&fiber_wedge(&g, &p), &rat(1));
    r
}

/// Dimension of the space of fiber curvature tensors orthogonal to the
/// scale tractor — used as the quotient cross-check for
/// [`einstein_compatible_dim`]: it must exceed that dimension by exactly
/// one (the pure-trace wedge element).
pub fn iperp_riemann_dim(n: usize, scale: &ScaleSpec) -> Result<usize> {
    let i = scale_tractor(scale)?;
    if !i.is_parallel() {
        return Err(Error::PreconditionFailed(
            "the scale tractor is not parallel (the scale is not Einstein)".into(),
        ));
    }
    let i0 = constant_tractor_value(&i, n)?;
    let riemann = fiber_symmetry_basis(n, false);
    if riemann.len() != riemann_space_dim(n + 2) {
        return Err(Error::InternalInconsistency(format!(
            "fiber curvature space has dimension {}, expected {}",
            riemann.len(),
            riemann_space_dim(n + 2)
        )));
    }
    let columns: Vec<Vec<Rational>> = riemann
        .iter()
        .map(|r| fiber_contract_first(r, &i0))
        .collect();
    let rows = columns.first().map_or(0, Vec::len);
    let mut m = RationalMatrix::zeros(rows, columns.len());
    for (j, col) in columns.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            if *v != rat(0) {
                m.set(r, j, v.clone());
            }
        }
    }
    let (_, kernel) = rank_nullspace(&m);
    Ok(kernel.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::parse_poly;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poly(src: &str, n: usize) -> Scalar {
        Scalar::from_poly(parse_poly(src, n).unwrap())
    }

    #[test]
    fn elimination_handles_identity_zero_and_planted_kernels() {
        let mut id = RationalMatrix::zeros(3, 3);
        for k in 0..3 {
            id.set(k, k, rat(1));
        }
        let (rank, null) = rank_nullspace(&id);
        assert_eq!((rank, null.len()), (3, 0));

        let z = RationalMatrix::zeros(4, 6);
        let (rank, null) = rank_nullspace(&z);
        assert_eq!((rank, null.len()), (0, 6));

        // Plant a 5-dimensional kernel: M = [R | R·S] with R invertible.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let rows = 30;
        let extra = 5;
        loop {
            let r: Vec<Vec<Rational>> = (0..rows)
                .map(|_| (0..rows).map(|_| rat(rng.random_range(-4..5))).collect())
                .collect();
            let s: Vec<Vec<Rational>> = (0..rows)
                .map(|_| (0..extra).map(|_| rat(rng.random_range(-4..5))).collect())
                .collect();
            let mut m = RationalMatrix::zeros(rows, rows + extra);
            for i in 0..rows {
                for j in 0..rows {
                    m.set(i, j, r[i][j].clone());
                }
                for j in 0..extra {
                    let mut acc = rat(0);
                    for k in 0..rows {
                        acc += &r[i][k] * &s[k][j];
                    }
                    m.set(i, rows + j, acc);
                }
            }
            let (rank, null) = rank_nullspace(&m);
            if rank < rows {
                continue; // singular draw; re-plant
            }
            assert_eq!(null.len(), extra);
            for v in &null {
                let image = m.apply(v).unwrap();
                assert!(image.iter().all(|x| *x == rat(0)));
            }
            break;
        }
    }

    #[test]
    fn linear_solve_returns_exact_particular_solutions() {
        // x + y = 3, x - y = 1  →  x = 2, y = 1.
        let m = RationalMatrix::from_rows(vec![
            vec![rat(1), rat(1)],
            vec![rat(1), rat(-1)],
        ])
        .unwrap();
        let x = solve_linear(&m, &[rat(3), rat(1)]).unwrap().unwrap();
        assert_eq!(x, vec![rat(2), rat(1)]);

        // Inconsistent system.
        let m2 = RationalMatrix::from_rows(vec![vec![rat(1), rat(1)], vec![rat(2), rat(2)]])
            .unwrap();
        assert!(solve_linear(&m2, &[rat(1), rat(3)]).unwrap().is_none());

        // Underdetermined but consistent.
        let m3 = RationalMatrix::from_rows(vec![vec![rat(1), rat(1), rat(1)]]).unwrap();
        let x3 = solve_linear(&m3, &[rat(6)]).unwrap().unwrap();
        let back = m3.apply(&x3).unwrap();
        assert_eq!(back, vec![rat(6)]);
    }

    #[test]
    fn monomial_enumeration_counts_match_the_stars_and_bars_formula() {
        assert_eq!(monomials_of_degree(3, 0).len(), 1);
        assert_eq!(monomials_of_degree(3, 4).len(), 15);
        assert_eq!(monomials_of_degree(4, 5).len(), 56);
        for m in monomials_of_degree(4, 3) {
            assert_eq!(m.degree(), 3);
        }
    }

    #[test]
    fn conformal_killing_vector_space_has_the_conformal_group_dimension() {
        for n in [3usize, 4] {
            let report = ckv_basis(n, 2).unwrap();
            assert_eq!(report.dimension, (n + 1) * (n + 2) / 2);
            assert_eq!(report.basis.len(), report.dimension);
        }
        // A larger bound finds nothing new.
        let wide = ckv_basis(3, 3).unwrap();
        assert_eq!(wide.dimension, 10);
    }

    #[test]
    fn rank2_conformal_killing_space_matches_the_fiber_weyl_dimension() {
        let report = ckt_basis(3, 4).unwrap();
        assert_eq!(report.dimension, 35);
        assert_eq!(report.dimension, weyl_space_dim(5));
        let flat = ScaleSpec::reference(3);
        for k in report.basis.tensors().unwrap() {
            assert!(prolong::is_ck_tensor(k, &flat).unwrap());
        }
    }

    #[test]
    fn fiber_weyl_basis_has_the_classical_dimensions() {
        let report = weyl_space_basis(3).unwrap();
        assert_eq!(report.dimension, 35);
        assert_eq!(weyl_space_dim(4), 10);
        assert_eq!(riemann_space_dim(5), 50);
        assert_eq!(fiber_symmetry_basis(2, true).len(), 10);
        assert_eq!(fiber_symmetry_basis(3, false).len(), 50);

        // Negative control: a tensor violating the first Bianchi identity is
        // rejected by the Riemann predicate.
        let mut bad = Fiber4::zeros(5);
        let i = bad.idx(0, 1, 2, 3);
        bad.vals[i] = rat(1);
        let j = bad.idx(1, 0, 2, 3);
        bad.vals[j] = rat(-1);
        let k = bad.idx(0, 1, 3, 2);
        bad.vals[k] = rat(-1);
        let l = bad.idx(1, 0, 3, 2);
        bad.vals[l] = rat(1);
        let m = bad.idx(2, 3, 0, 1);
        bad.vals[m] = rat(1);
        let o = bad.idx(3, 2, 0, 1);
        bad.vals[o] = rat(-1);
        let p = bad.idx(2, 3, 1, 0);
        bad.vals[p] = rat(-1);
        let q = bad.idx(3, 2, 1, 0);
        bad.vals[q] = rat(1);
        assert!(!fiber_is_riemann(&bad));
    }

    #[test]
    fn einstein_compatible_dimension_matches_the_closed_formula() {
        let n = 3;
        for sigma in ["1 + |x|^2", "1 - |x|^2"] {
            let scale = ScaleSpec::from_sigma(poly(sigma, n)).unwrap();
            let report = einstein_compatible_dim(n, &scale).unwrap();
            assert_eq!(report.dimension, 19);
            // Quotient cross-check: curvature tensors orthogonal to the
            // scale tractor exceed the compatible space by exactly the
            // pure-trace element.
            assert_eq!(iperp_riemann_dim(n, &scale).unwrap(), 20);
            assert_eq!(riemann_space_dim(n + 1), 20);
        }
        // Non-Einstein scales are rejected.
        let crooked = ScaleSpec::from_sigma(poly("x1^2", n)).unwrap();
        assert!(matches!(
            einstein_compatible_dim(n, &crooked),
            Err(Error::PreconditionFailed(_))
        ));
    }
}
