//! Dense least-squares helpers shared by the solver and the proof checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{BompError, Result};

/// Relative singular-value floor below which a subdictionary counts as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// `σ_min / σ_max` of `matrix`; zero when it has more columns than rows.
pub fn condition_ratio(matrix: &DMatrix<f64>) -> f64 {
    if matrix.ncols() == 0 {
        return 1.0;
    }
    if matrix.ncols() > matrix.nrows() {
        return 0.0;
    }
    let sv = matrix.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Orthonormal basis of a growing set of columns, `S = Q R`.
///
/// Columns are orthogonalized by modified Gram-Schmidt applied twice, which
/// keeps `Q` orthonormal to working precision and is exact on already
/// orthonormal columns.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    rows: usize,
    q: Vec<DVector<f64>>,
    /// Columns of the upper-triangular factor; `r[j]` has `j + 1` entries.
    r: Vec<Vec<f64>>,
    rank_tol: f64,
}

impl OrthoBasis {
    pub fn new(rows: usize, rank_tol: f64) -> Self {
        Self {
            rows,
            q: Vec::new(),
            r: Vec::new(),
            rank_tol,
        }
    }

    /// Basis for the columns of `sub`.
    pub fn from_columns(sub: &DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        let mut basis = Self::new(sub.nrows(), rank_tol);
        basis.push_columns(sub)?;
        Ok(basis)
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    /// Appends every column of `cols`; on failure the basis is left unchanged.
    pub fn push_columns(&mut self, cols: &DMatrix<f64>) -> Result<()> {
        if cols.nrows() != self.rows {
            return Err(BompError::DimensionMismatch(format!(
                "columns have {} rows, basis has {}",
                cols.nrows(),
                self.rows
            )));
        }
        if self.q.len() + cols.ncols() > self.rows {
            return Err(BompError::RankDeficient { ratio: 0.0 });
        }
        let committed = self.q.len();
        for j in 0..cols.ncols() {
            let mut v = cols.column(j).into_owned();
            let mut coeffs = vec![0.0; self.q.len() + 1];
            for _ in 0..2 {
                for (i, qi) in self.q.iter().enumerate() {
                    let h = qi.dot(&v);
                    v.axpy(-h, qi, 1.0);
                    coeffs[i] += h;
                }
            }
            let norm = v.norm();
            if !(norm > 0.0) {
                self.truncate(committed);
                return Err(BompError::RankDeficient { ratio: 0.0 });
            }
            coeffs[self.q.len()] = norm;
            self.q.push(v / norm);
            self.r.push(coeffs);
        }
        let ratio = self.condition_ratio();
        if !(ratio >= self.rank_tol) {
            self.truncate(committed);
            return Err(BompError::RankDeficient { ratio });
        }
        Ok(())
    }

    fn truncate(&mut self, len: usize) {
        self.q.truncate(len);
        self.r.truncate(len);
    }

    fn r_matrix(&self) -> DMatrix<f64> {
        let k = self.r.len();
        DMatrix::from_fn(k, k, |i, j| if i <= j { self.r[j][i] } else { 0.0 })
    }

    /// `σ_min / σ_max` of the factored columns (equal to that of `R`).
    pub fn condition_ratio(&self) -> f64 {
        if self.q.is_empty() {
            return 1.0;
        }
        let sv = self.r_matrix().singular_values();
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            0.0
        } else {
            min / max
        }
    }

    /// Splits `v` into `(Qᵀv, P⊥ v)`, projecting one basis vector at a time, twice.
    pub fn decompose(&self, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let mut rest = v.clone();
        let mut z = DVector::zeros(self.q.len());
        for _ in 0..2 {
            for (i, qi) in self.q.iter().enumerate() {
                let h = qi.dot(&rest);
                rest.axpy(-h, qi, 1.0);
                z[i] += h;
            }
        }
        (z, rest)
    }

    /// `P⊥ v`.
    pub fn project_out(&self, v: &DVector<f64>) -> DVector<f64> {
        self.decompose(v).1
    }

    /// Least-squares coefficients and residual of `v` on the factored columns.
    pub fn solve(&self, v: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let (z, rest) = self.decompose(v);
        if self.q.is_empty() {
            return Ok((z, rest));
        }
        let coeffs = self
            .r_matrix()
            .solve_upper_triangular(&z)
            .ok_or(BompError::RankDeficient { ratio: 0.0 })?;
        Ok((coeffs, rest))
    }
}

/// Coefficients `c` minimizing `‖y − S c‖₂`.
///
/// Fails with [`BompError::RankDeficient`] when `σ_min(S) < rank_tol · σ_max(S)`.
pub fn least_squares(sub: &DMatrix<f64>, y: &DVector<f64>, rank_tol: f64) -> Result<DVector<f64>> {
    Ok(least_squares_with_residual(sub, y, rank_tol)?.0)
}

/// As [`least_squares`], also returning the residual `y − S c`.
pub fn least_squares_with_residual(
    sub: &DMatrix<f64>,
    y: &DVector<f64>,
    rank_tol: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if sub.nrows() != y.len() {
        return Err(BompError::DimensionMismatch(format!(
            "subdictionary has {} rows, vector has {} entries",
            sub.nrows(),
            y.len()
        )));
    }
    OrthoBasis::from_columns(sub, rank_tol)?.solve(y)
}

/// `P⊥ v = v − S (SᵀS)⁻¹ Sᵀ v`, the component of `v` orthogonal to `range(S)`.
pub fn orthogonal_residual(
    sub: &DMatrix<f64>,
    v: &DVector<f64>,
    rank_tol: f64,
) -> Result<DVector<f64>> {
    Ok(least_squares_with_residual(sub, v, rank_tol)?.1)
}

/// Applies `P⊥` to every column of `columns`.
pub fn orthogonal_residual_columns(
    sub: &DMatrix<f64>,
    columns: &DMatrix<f64>,
    rank_tol: f64,
) -> Result<DMatrix<f64>> {
    let mut out = columns.clone();
    for j in 0..columns.ncols() {
        let col = columns.column(j).into_owned();
        out.set_column(j, &orthogonal_residual(sub, &col, rank_tol)?);
    }
    Ok(out)
}
