//! Block layouts, block-sparse signals, and column-blocked matrices.
//!
//! Block indices are 1-based everywhere in the public API: block `ℓ` of a
//! layout with width `d` covers the flat coordinates `(ℓ-1)d .. ℓd`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{BompError, Result};

/// Default threshold below which a block norm counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

/// Partition of `n = M·d` coordinates into `M` blocks of uniform width `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockLayout {
    num_blocks: usize,
    block_width: usize,
}

impl BlockLayout {
    pub fn new(num_blocks: usize, block_width: usize) -> Result<Self> {
        if num_blocks == 0 || block_width == 0 {
            return Err(BompError::InvalidInput(format!(
                "block layout needs positive sizes, got M={num_blocks}, d={block_width}"
            )));
        }
        num_blocks.checked_mul(block_width).ok_or_else(|| {
            BompError::InvalidInput("ambient dimension M*d overflows".to_string())
        })?;
        Ok(Self {
            num_blocks,
            block_width,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn block_width(&self) -> usize {
        self.block_width
    }

    pub fn ambient_dim(&self) -> usize {
        self.num_blocks * self.block_width
    }

    /// Flat coordinate range of block `index` (1-based).
    pub fn block_range(&self, index: usize) -> Result<Range<usize>> {
        self.check_index(index)?;
        let start = (index - 1) * self.block_width;
        Ok(start..start + self.block_width)
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index == 0 || index > self.num_blocks {
            return Err(BompError::BlockIndexOutOfRange {
                index,
                num_blocks: self.num_blocks,
            });
        }
        Ok(())
    }

    /// Validates a set of block indices and returns it sorted ascending.
    pub fn normalize_support(&self, support: &[usize]) -> Result<Vec<usize>> {
        let mut sorted = support.to_vec();
        sorted.sort_unstable();
        for pair in sorted.windows(2) {
            if pair[0] == pair[1] {
                return Err(BompError::DuplicateBlockIndex(pair[0]));
            }
        }
        for &index in &sorted {
            self.check_index(index)?;
        }
        Ok(sorted)
    }

    /// All block indices `1..=M`.
    pub fn all_blocks(&self) -> Vec<usize> {
        (1..=self.num_blocks).collect()
    }
}

/// Order of a mixed `ℓ2/ℓp` norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixedNorm {
    L1,
    L2,
    Inf,
}

impl FromStr for MixedNorm {
    type Err = BompError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(MixedNorm::L1),
            "2" => Ok(MixedNorm::L2),
            "inf" | "infinity" | "∞" => Ok(MixedNorm::Inf),
            other => Err(BompError::UnsupportedNorm(other.to_string())),
        }
    }
}

impl fmt::Display for MixedNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MixedNorm::L1 => f.write_str("1"),
            MixedNorm::L2 => f.write_str("2"),
            MixedNorm::Inf => f.write_str("inf"),
        }
    }
}

/// A length-`n` vector viewed through a [`BlockLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSignal {
    layout: BlockLayout,
    values: DVector<f64>,
}

impl BlockSignal {
    pub fn new(layout: BlockLayout, values: DVector<f64>) -> Result<Self> {
        if values.len() != layout.ambient_dim() {
            return Err(BompError::DimensionMismatch(format!(
                "signal has {} entries, layout needs {}",
                values.len(),
                layout.ambient_dim()
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn from_slice(layout: BlockLayout, values: &[f64]) -> Result<Self> {
        Self::new(layout, DVector::from_column_slice(values))
    }

    pub fn zeros(layout: BlockLayout) -> Self {
        Self {
            layout,
            values: DVector::zeros(layout.ambient_dim()),
        }
    }

    /// Scatters `coefficients` (blocks of `support` concatenated in the given
    /// order) into an otherwise zero signal.
    pub fn from_support(
        layout: BlockLayout,
        support: &[usize],
        coefficients: &DVector<f64>,
    ) -> Result<Self> {
        let d = layout.block_width();
        if coefficients.len() != support.len() * d {
            return Err(BompError::DimensionMismatch(format!(
                "{} coefficients for {} blocks of width {d}",
                coefficients.len(),
                support.len()
            )));
        }
        layout.normalize_support(support)?;
        let mut values = DVector::zeros(layout.ambient_dim());
        for (slot, &index) in support.iter().enumerate() {
            let range = layout.block_range(index)?;
            values
                .rows_mut(range.start, d)
                .copy_from(&coefficients.rows(slot * d, d));
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> BlockLayout {
        self.layout
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    /// Block `index` (1-based).
    pub fn block(&self, index: usize) -> Result<DVectorView<'_, f64>> {
        let range = self.layout.block_range(index)?;
        Ok(self.values.rows(range.start, range.len()))
    }

    /// Euclidean norm of every block, in block order.
    pub fn block_norms(&self) -> DVector<f64> {
        let d = self.layout.block_width();
        DVector::from_iterator(
            self.layout.num_blocks(),
            (0..self.layout.num_blocks()).map(|b| self.values.rows(b * d, d).norm()),
        )
    }

    pub fn mixed_norm(&self, p: MixedNorm) -> f64 {
        let w = self.block_norms();
        match p {
            MixedNorm::L1 => w.iter().sum(),
            MixedNorm::L2 => w.norm(),
            MixedNorm::Inf => w.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Ascending list of blocks whose norm exceeds `zero_tol`.
    pub fn block_support(&self, zero_tol: f64) -> Vec<usize> {
        self.block_norms()
            .iter()
            .enumerate()
            .filter(|(_, &norm)| norm > zero_tol)
            .map(|(b, _)| b + 1)
            .collect()
    }

    /// Whether at most `k` blocks are nonzero (exact zero test).
    pub fn is_block_sparse(&self, k: usize) -> bool {
        self.block_support(0.0).len() <= k
    }

    /// Smallest block norm over `support`.
    pub fn min_block_norm_on(&self, support: &[usize]) -> Result<f64> {
        let mut min = f64::INFINITY;
        for &index in support {
            min = min.min(self.block(index)?.norm());
        }
        Ok(min)
    }
}

/// A real `m × n` matrix whose columns are grouped by a [`BlockLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedMatrix {
    layout: BlockLayout,
    entries: DMatrix<f64>,
}

impl BlockedMatrix {
    pub fn new(entries: DMatrix<f64>, layout: BlockLayout) -> Result<Self> {
        if entries.nrows() == 0 {
            return Err(BompError::InvalidInput(
                "matrix must have at least one row".to_string(),
            ));
        }
        if entries.ncols() != layout.ambient_dim() {
            return Err(BompError::DimensionMismatch(format!(
                "matrix has {} columns, layout needs {}",
                entries.ncols(),
                layout.ambient_dim()
            )));
        }
        Ok(Self { layout, entries })
    }

    pub fn identity(layout: BlockLayout) -> Self {
        let n = layout.ambient_dim();
        Self {
            layout,
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn layout(&self) -> BlockLayout {
        self.layout
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Column block `index` (1-based) as an `m × d` view.
    pub fn block(&self, index: usize) -> Result<DMatrixView<'_, f64>> {
        let range = self.layout.block_range(index)?;
        Ok(self.entries.columns(range.start, range.len()))
    }

    /// Horizontal concatenation of the blocks in `support`, ascending by index.
    pub fn extract_blocks(&self, support: &[usize]) -> Result<DMatrix<f64>> {
        let sorted = self.layout.normalize_support(support)?;
        Ok(self.gather(&sorted))
    }

    /// Concatenates blocks in the order given; indices must already be valid.
    pub(crate) fn gather(&self, support: &[usize]) -> DMatrix<f64> {
        let d = self.layout.block_width();
        let mut out = DMatrix::zeros(self.rows(), support.len() * d);
        for (slot, &index) in support.iter().enumerate() {
            out.columns_mut(slot * d, d)
                .copy_from(&self.entries.columns((index - 1) * d, d));
        }
        out
    }

    /// `A·x` for a signal laid out on this matrix's column blocks.
    pub fn apply(&self, x: &BlockSignal) -> Result<DVector<f64>> {
        if x.layout() != self.layout {
            return Err(BompError::DimensionMismatch(
                "signal layout differs from matrix layout".to_string(),
            ));
        }
        Ok(&self.entries * x.values())
    }

    /// `‖A[ℓ]ᵀ r‖₂` for every block ℓ, in block order.
    pub fn block_correlations(&self, r: &DVector<f64>) -> Result<Vec<f64>> {
        if r.len() != self.rows() {
            return Err(BompError::DimensionMismatch(format!(
                "vector has {} entries, matrix has {} rows",
                r.len(),
                self.rows()
            )));
        }
        let d = self.layout.block_width();
        let correlations = self.entries.tr_mul(r);
        Ok((0..self.layout.num_blocks())
            .map(|b| correlations.rows(b * d, d).norm())
            .collect())
    }
}

/// `y = A·x + e` with `‖e‖₂ ≤ ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingProblem {
    matrix: BlockedMatrix,
    observation: DVector<f64>,
    noise_bound: f64,
}

impl SensingProblem {
    pub fn new(matrix: BlockedMatrix, observation: DVector<f64>, noise_bound: f64) -> Result<Self> {
        if observation.len() != matrix.rows() {
            return Err(BompError::DimensionMismatch(format!(
                "observation has {} entries, matrix has {} rows",
                observation.len(),
                matrix.rows()
            )));
        }
        if !(noise_bound >= 0.0) || !noise_bound.is_finite() {
            return Err(BompError::InvalidInput(format!(
                "noise bound must be a finite nonnegative number, got {noise_bound}"
            )));
        }
        Ok(Self {
            matrix,
            observation,
            noise_bound,
        })
    }

    pub fn matrix(&self) -> &BlockedMatrix {
        &self.matrix
    }

    pub fn observation(&self) -> &DVector<f64> {
        &self.observation
    }

    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    pub fn layout(&self) -> BlockLayout {
        self.matrix.layout()
    }
}
