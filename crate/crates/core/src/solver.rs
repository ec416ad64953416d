//! Sparse symmetric positive-definite solve by supernodal Cholesky with an
//! approximate-minimum-degree ordering.

use std::io::Write;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::solvers::LltError;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LltRef, SymbolicCholeskyRaw, SymmetricOrdering,
};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side};

use crate::error::{Error, Result};
use crate::sparse::{norm2, CsrMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    pub success: bool,
    pub dim: usize,
    /// Stored entries of the full symmetric matrix.
    pub nnz: usize,
    /// Entries of the Cholesky factor beyond the lower triangle of `A`.
    pub fill_in: usize,
    /// Smallest `L_jj^2`, i.e. the smallest pivot of the factorization.
    pub min_pivot: f64,
    /// `||A x - b|| / ||b||` after the solve.
    pub residual: f64,
}

/// Solves `A x = b` for symmetric positive-definite `A`.
///
/// Only the lower triangle of `A` is read. A non-positive pivot is reported
/// as [`Error::NotPositiveDefinite`] with the pivot index in the original
/// numbering.
pub fn solve_spd(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, FactorizationReport)> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::InvalidInput(format!(
            "right-hand side has length {}, matrix has dimension {n}",
            b.len()
        )));
    }
    if n == 0 {
        return Err(Error::SingularMatrix("empty system".into()));
    }
    if !a.values().iter().chain(b).all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("linear system has non-finite entries".into()));
    }
    // A symmetric CSR matrix is its own CSC transpose.
    let symbolic_a = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
    let mat = SparseColMatRef::new(symbolic_a, a.values());
    let params = CholeskySymbolicParams {
        supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
        ..Default::default()
    };
    let symbolic = factorize_symbolic_cholesky(symbolic_a, Side::Lower, SymmetricOrdering::Amd, params)
        .map_err(|e| Error::SingularMatrix(format!("symbolic analysis failed: {e:?}")))?;

    let mut l_values = vec![0.0f64; symbolic.len_val()];
    let mut buf = MemBuffer::new(symbolic.factorize_numeric_llt_scratch::<f64>(Par::Seq, Default::default()));
    let llt = symbolic.factorize_numeric_llt(
        &mut l_values,
        mat,
        Side::Lower,
        Default::default(),
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    );
    let llt = match llt {
        Ok(llt) => llt,
        Err(LltError::NonPositivePivot { index }) => {
            let pivot = symbolic.perm().map_or(index, |p| p.arrays().0[index]);
            return Err(Error::NotPositiveDefinite { pivot });
        }
    };
    let mut x = b.to_vec();
    solve_with(&llt, &mut x);
    let min_pivot = min_pivot(&symbolic, &l_values);
    if !(min_pivot > 0.0) {
        return Err(Error::NotPositiveDefinite { pivot: 0 });
    }
    let residual = galerkin_residual(a, b, &x);
    let report = FactorizationReport {
        success: true,
        dim: n,
        nnz: a.nnz(),
        fill_in: symbolic.len_val().saturating_sub(a.nnz_lower()),
        min_pivot,
        residual,
    };
    Ok((x, report))
}

fn solve_with(llt: &LltRef<'_, usize, f64>, x: &mut [f64]) {
    let mut buf = MemBuffer::new(llt.symbolic().solve_in_place_scratch::<f64>(1, Par::Seq));
    let rhs = MatMut::from_column_major_slice_mut(x, x.len(), 1);
    llt.solve_in_place_with_conj(Conj::No, rhs, Par::Seq, MemStack::new(&mut buf));
}

fn min_pivot(symbolic: &faer::sparse::linalg::cholesky::SymbolicCholesky<usize>, values: &[f64]) -> f64 {
    match symbolic.raw() {
        SymbolicCholeskyRaw::Supernodal(sym) => {
            let l = faer::sparse::linalg::cholesky::supernodal::SupernodalLltRef::new(sym, values);
            let mut best = f64::INFINITY;
            for s in 0..sym.n_supernodes() {
                let val = l.supernode(s).val();
                for j in 0..val.ncols() {
                    best = best.min(val[(j, j)] * val[(j, j)]);
                }
            }
            best
        }
        // Columns of L are stored with the diagonal entry first.
        SymbolicCholeskyRaw::Simplicial(sym) => sym.col_ptr()[..sym.ncols()]
            .iter()
            .map(|&start| values[start] * values[start])
            .fold(f64::INFINITY, f64::min),
    }
}

/// `||A x - b||_2 / ||b||_2` (or `||A x||` when `b = 0`).
pub fn galerkin_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| ax - bi).collect();
    let bn = norm2(b);
    if bn > 0.0 {
        norm2(&r) / bn
    } else {
        norm2(&r)
    }
}

/// Writes `A` as `i j value` lines followed by `b` as `i value` lines.
pub fn dump_system(a: &CsrMatrix, b: &[f64], out: &mut impl Write) -> std::io::Result<()> {
    a.write_coordinate(out)?;
    writeln!(out, "# rhs {}", b.len())?;
    for (i, v) in b.iter().enumerate() {
        writeln!(out, "{i} {v:.17e}")?;
    }
    Ok(())
}
