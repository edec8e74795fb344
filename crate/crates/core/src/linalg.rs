//! Dense least-squares helpers on top of nalgebra's column-pivoted QR.

use nalgebra::{DMatrix, DVector};

/// Largest admissible condition number of the Gram matrix `A'A`.
pub(crate) const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Rank {
    Deficient,
    IllConditioned(f64),
}

impl std::fmt::Display for Rank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rank::Deficient => f.write_str("matrix is rank deficient"),
            Rank::IllConditioned(c) => write!(
                f,
                "Gram matrix condition number {c:.3e} exceeds {MAX_GRAM_CONDITION:.0e}"
            ),
        }
    }
}

/// Column-pivoted QR of a tall matrix `A` (`A P = Q R`) with a condition
/// guard on `A'A`.
pub(crate) struct PivotedQr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    qr: nalgebra::linalg::ColPivQR<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl PivotedQr {
    pub(crate) fn new(a: &DMatrix<f64>) -> Result<Self, Rank> {
        let p = a.ncols();
        if a.nrows() < p || p == 0 {
            return Err(Rank::Deficient);
        }
        let qr = a.clone().col_piv_qr();
        let r = qr.r();
        let q = qr.q();
        let sv = r.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 0.0) || !smax.is_finite() {
            return Err(Rank::Deficient);
        }
        let cond = (smax / smin).powi(2);
        if cond > MAX_GRAM_CONDITION {
            return Err(Rank::IllConditioned(cond));
        }
        Ok(PivotedQr { q, r, qr })
    }

    /// Least-squares solution of `A b = y`.
    pub(crate) fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let qty = self.q.transpose() * y;
        let mut b = self
            .r
            .solve_upper_triangular(&qty)
            .expect("R has a non-zero diagonal after the condition check");
        self.qr.p().inv_permute_rows(&mut b);
        b
    }

    /// `(A'A)^-1 = P R^-1 R^-T P'`.
    pub(crate) fn gram_inverse(&self) -> DMatrix<f64> {
        let p = self.r.ncols();
        let r_inv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .expect("R has a non-zero diagonal after the condition check");
        let mut g = &r_inv * r_inv.transpose();
        let perm = self.qr.p();
        perm.inv_permute_rows(&mut g);
        perm.inv_permute_columns(&mut g);
        g
    }

    /// Thin orthonormal basis of the column space of `A`.
    pub(crate) fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
}
