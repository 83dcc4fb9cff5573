use ndarray::{Array2, Array3, Axis};

use super::rulebook::{build_rulebook, KERNEL_OFFSETS};
use super::{ShapeError, SparseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    /// Active set preserved exactly; stride must be 1.
    Submanifold,
    /// Active set dilates to every reachable output site; stride 1 or 2.
    SparseStrided,
}

/// 3x3x3 convolution parameters. Weights are indexed (kernel offset,
/// input channel, output channel); there is no bias term.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub in_channels: usize,
    pub out_channels: usize,
    pub mode: ConvMode,
    pub stride: u32,
    pub weights: Array3<f32>,
}

impl ConvParams {
    pub fn new(
        mode: ConvMode,
        stride: u32,
        weights: Array3<f32>,
    ) -> Result<Self, ShapeError> {
        let shape = weights.shape();
        if shape[0] != KERNEL_OFFSETS {
            return Err(ShapeError(format!(
                "weights must have {KERNEL_OFFSETS} kernel taps, got {}",
                shape[0]
            )));
        }
        if !(1..=2).contains(&stride) {
            return Err(ShapeError(format!("stride must be 1 or 2, got {stride}")));
        }
        if mode == ConvMode::Submanifold && stride != 1 {
            return Err(ShapeError("submanifold convolution requires stride 1".into()));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(ShapeError("weights must be finite".into()));
        }
        Ok(Self {
            in_channels: shape[1],
            out_channels: shape[2],
            mode,
            stride,
            weights,
        })
    }
}

/// Inference-mode normalization: y = gamma*(x - mean)/sqrt(var + eps) + beta.
#[derive(Debug, Clone, PartialEq)]
pub struct NormParams {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub eps: f32,
}

pub const NORM_EPS: f32 = 1e-3;

impl NormParams {
    pub fn new(
        gamma: Vec<f32>,
        beta: Vec<f32>,
        mean: Vec<f32>,
        var: Vec<f32>,
        eps: f32,
    ) -> Result<Self, ShapeError> {
        let n = gamma.len();
        if [beta.len(), mean.len(), var.len()] != [n, n, n] {
            return Err(ShapeError("normalization arrays must share one length".into()));
        }
        if var.iter().any(|&v| v < 0.0) {
            return Err(ShapeError("variance must be non-negative".into()));
        }
        Ok(Self {
            gamma,
            beta,
            mean,
            var,
            eps,
        })
    }

    /// gamma=1, beta=0, mean=0, var=1: near-identity up to the epsilon term.
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
            eps: NORM_EPS,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Executes one convolution by gather, per-offset matrix multiply, and
/// scatter-add in fixed offset order 0..27. For a fixed offset the
/// input-to-output map is injective, so the accumulation order per output
/// site is exactly the offset order and results are bitwise deterministic.
pub fn sparse_conv(t: &SparseTensor, p: &ConvParams) -> Result<SparseTensor, ShapeError> {
    if t.channels() != p.in_channels {
        return Err(ShapeError(format!(
            "tensor has {} channels, convolution expects {}",
            t.channels(),
            p.in_channels
        )));
    }
    let rb = build_rulebook(&t.coords, t.shape, p.mode, p.stride);
    let mut out = Array2::<f32>::zeros((rb.out_coords.len(), p.out_channels));
    for (k, rules) in rb.rules.iter().enumerate() {
        if rules.is_empty() {
            continue;
        }
        let mut gathered = Array2::<f32>::zeros((rules.len(), p.in_channels));
        for (r, &(i, _)) in rules.iter().enumerate() {
            gathered.row_mut(r).assign(&t.features.row(i as usize));
        }
        let tap = p.weights.index_axis(Axis(0), k);
        let product = gathered.dot(&tap);
        for (r, &(_, o)) in rules.iter().enumerate() {
            let mut row = out.row_mut(o as usize);
            row += &product.row(r);
        }
    }
    Ok(SparseTensor {
        shape: rb.out_shape,
        coords: rb.out_coords,
        features: out,
    })
}

/// Applies normalization followed by ReLU to every active site.
pub fn norm_relu(t: &SparseTensor, n: &NormParams) -> Result<SparseTensor, ShapeError> {
    if t.channels() != n.channels() {
        return Err(ShapeError(format!(
            "tensor has {} channels, normalization expects {}",
            t.channels(),
            n.channels()
        )));
    }
    let scale: Vec<f32> = n
        .gamma
        .iter()
        .zip(&n.var)
        .map(|(&g, &v)| g / (v + n.eps).sqrt())
        .collect();
    let mut features = t.features.clone();
    for mut row in features.rows_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (scale[c] * (*v - n.mean[c]) + n.beta[c]).max(0.0);
        }
    }
    Ok(SparseTensor {
        shape: t.shape,
        coords: t.coords.clone(),
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn identity_weights(channels: usize) -> Array3<f32> {
        let mut w = Array3::zeros((KERNEL_OFFSETS, channels, channels));
        for c in 0..channels {
            w[[13, c, c]] = 1.0;
        }
        w
    }

    fn tensor(shape: [u32; 3], sites: &[([u32; 3], Vec<f32>)]) -> SparseTensor {
        let coords: Vec<_> = sites.iter().map(|s| s.0).collect();
        let ch = sites.first().map_or(1, |s| s.1.len());
        let mut features = Array2::zeros((sites.len(), ch));
        for (i, (_, f)) in sites.iter().enumerate() {
            for (k, &v) in f.iter().enumerate() {
                features[[i, k]] = v;
            }
        }
        SparseTensor::new(shape, coords, features).unwrap()
    }

    #[test]
    fn identity_kernel_preserves_features_bitwise() {
        let t = tensor(
            [6, 6, 6],
            &[([0, 1, 2], vec![0.125, -3.5]), ([3, 3, 3], vec![7.0, 0.0])],
        );
        let p = ConvParams::new(ConvMode::Submanifold, 1, identity_weights(2)).unwrap();
        let out = sparse_conv(&t, &p).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn isolated_voxel_sees_only_center_tap() {
        let mut w = Array3::zeros((KERNEL_OFFSETS, 2, 3));
        // Noise on non-center taps must not contribute.
        w.fill(9.0);
        let center = arr2(&[[1.0, 2.0, 0.0], [0.0, -1.0, 4.0]]);
        w.index_axis_mut(Axis(0), 13).assign(&center);
        let t = tensor([8, 8, 8], &[([4, 4, 4], vec![2.0, 3.0])]);
        let p = ConvParams::new(ConvMode::SparseStrided, 1, w).unwrap();
        let out = sparse_conv(&t, &p).unwrap();
        let idx = out.coords.iter().position(|&c| c == [4, 4, 4]).unwrap();
        assert_eq!(out.features.row(idx).to_vec(), vec![2.0, 1.0, 12.0]);
        // Stride-1 sparse conv dilates to the full 3x3x3 neighborhood.
        assert_eq!(out.coords.len(), 27);
    }

    #[test]
    fn submanifold_requires_stride_one() {
        assert!(ConvParams::new(ConvMode::Submanifold, 2, identity_weights(1)).is_err());
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let t = tensor([4, 4, 4], &[([0, 0, 0], vec![1.0])]);
        let p = ConvParams::new(ConvMode::Submanifold, 1, identity_weights(2)).unwrap();
        assert!(sparse_conv(&t, &p).is_err());
    }

    #[test]
    fn identity_norm_is_noop_on_nonnegative_features() {
        let t = tensor([4, 4, 4], &[([1, 1, 1], vec![0.5, 2.0])]);
        // var = 1 - eps makes the scale exactly 1.
        let n = NormParams::new(
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0 - NORM_EPS, 1.0 - NORM_EPS],
            NORM_EPS,
        )
        .unwrap();
        let out = norm_relu(&t, &n).unwrap();
        for (a, b) in out.features.iter().zip(t.features.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn relu_clamps_negative_affine_output() {
        let t = tensor([4, 4, 4], &[([1, 1, 1], vec![0.5]), ([2, 2, 2], vec![3.0])]);
        let n = NormParams::new(vec![1.0], vec![-10.0], vec![0.0], vec![1.0], NORM_EPS).unwrap();
        let out = norm_relu(&t, &n).unwrap();
        assert!(out.features.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn norm_matches_scalar_reference() {
        let t = tensor([4, 4, 4], &[([0, 0, 0], vec![1.5, -2.0, 0.0])]);
        let n = NormParams::new(
            vec![2.0, 0.5, -1.0],
            vec![0.1, -0.2, 0.3],
            vec![1.0, 0.0, -0.5],
            vec![4.0, 0.25, 1.0],
            1e-3,
        )
        .unwrap();
        let out = norm_relu(&t, &n).unwrap();
        for c in 0..3 {
            let x = t.features[[0, c]];
            let expect =
                (n.gamma[c] * (x - n.mean[c]) / (n.var[c] + n.eps).sqrt() + n.beta[c]).max(0.0);
            assert!((out.features[[0, c]] - expect).abs() < 1e-6);
        }
    }
}
