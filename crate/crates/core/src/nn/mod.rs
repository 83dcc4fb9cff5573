//! Spatially sparse 3D network engine: tensors, rulebooks, convolutions,
//! normalization, and the scatter fusion operation.

mod conv;
mod dense;
mod rulebook;

use std::collections::BTreeMap;

use ndarray::Array2;
use thiserror::Error;

use crate::grid::SparseVoxelGrid;

pub use conv::{norm_relu, sparse_conv, ConvMode, ConvParams, NormParams};
pub use dense::{densify, dense_oracle};
pub use rulebook::{build_rulebook, strided_extent, Rulebook, KERNEL_OFFSETS};

#[derive(Debug, Error)]
#[error("shape mismatch: {0}")]
pub struct ShapeError(pub String);

/// Active sites of a sparse 3D feature volume.
///
/// `coords` are unique and sorted lexicographically; `features` rows align
/// with `coords`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    pub shape: [u32; 3],
    pub coords: Vec<[u32; 3]>,
    pub features: Array2<f32>,
}

impl SparseTensor {
    pub fn new(
        shape: [u32; 3],
        coords: Vec<[u32; 3]>,
        features: Array2<f32>,
    ) -> Result<Self, ShapeError> {
        if features.nrows() != coords.len() {
            return Err(ShapeError(format!(
                "{} feature rows for {} sites",
                features.nrows(),
                coords.len()
            )));
        }
        for (i, c) in coords.iter().enumerate() {
            if (0..3).any(|a| c[a] >= shape[a]) {
                return Err(ShapeError(format!("site {c:?} outside shape {shape:?}")));
            }
            if i > 0 && coords[i - 1] >= *c {
                return Err(ShapeError("sites must be sorted and unique".into()));
            }
        }
        Ok(Self {
            shape,
            coords,
            features,
        })
    }

    pub fn empty(shape: [u32; 3], channels: usize) -> Self {
        Self {
            shape,
            coords: Vec::new(),
            features: Array2::zeros((0, channels)),
        }
    }

    /// Adopts a voxel grid's occupancy and features as network input.
    pub fn from_grid(grid: &SparseVoxelGrid) -> Result<Self, ShapeError> {
        let features = grid
            .features
            .clone()
            .ok_or_else(|| ShapeError("grid has no features to feed the network".into()))?;
        Self::new(grid.spec.dims, grid.coords.clone(), features)
    }

    pub fn channels(&self) -> usize {
        self.features.ncols()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Element-wise reduction applied to duplicate sites in [`scatter`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    Max,
    Min,
    Sum,
    Mean,
    Mul,
}

impl Reduce {
    fn fold(self, acc: &mut f32, v: f32) {
        match self {
            Reduce::Max => *acc = acc.max(v),
            Reduce::Min => *acc = acc.min(v),
            Reduce::Sum | Reduce::Mean => *acc += v,
            Reduce::Mul => *acc *= v,
        }
    }
}

/// Fuses tensors over the union of their active sets. A site present in k
/// inputs reduces its k feature rows element-wise; a site present once
/// copies through unchanged. Mean divides by k, not by the input count.
///
/// Inputs fold in list order, so results are deterministic for a given call.
pub fn scatter(tensors: &[&SparseTensor], reduce: Reduce) -> Result<SparseTensor, ShapeError> {
    let first = tensors
        .first()
        .ok_or_else(|| ShapeError("scatter of zero tensors".into()))?;
    let shape = first.shape;
    let channels = first.channels();
    for t in tensors {
        if t.shape != shape || t.channels() != channels {
            return Err(ShapeError(format!(
                "scatter inputs disagree: {:?}/{} vs {:?}/{}",
                t.shape,
                t.channels(),
                shape,
                channels
            )));
        }
    }
    let mut cells: BTreeMap<[u32; 3], (Vec<f32>, u32)> = BTreeMap::new();
    for t in tensors {
        for (i, &c) in t.coords.iter().enumerate() {
            let row = t.features.row(i);
            match cells.get_mut(&c) {
                None => {
                    cells.insert(c, (row.to_vec(), 1));
                }
                Some((acc, n)) => {
                    for (a, &v) in acc.iter_mut().zip(row) {
                        reduce.fold(a, v);
                    }
                    *n += 1;
                }
            }
        }
    }
    let mut coords = Vec::with_capacity(cells.len());
    let mut features = Array2::<f32>::zeros((cells.len(), channels));
    for (i, (c, (mut row, n))) in cells.into_iter().enumerate() {
        if reduce == Reduce::Mean && n > 1 {
            for v in &mut row {
                *v /= n as f32;
            }
        }
        coords.push(c);
        for (k, v) in row.into_iter().enumerate() {
            features[[i, k]] = v;
        }
    }
    Ok(SparseTensor {
        shape,
        coords,
        features,
    })
}
