//! Dense reference convolution used to verify the sparse engine. Kept as a
//! direct triple-loop translation of the padded convolution definition, with
//! no shared machinery with the rulebook path.

use ndarray::{Array4, ArrayView4};

use super::conv::ConvParams;
use super::rulebook::strided_extent;
use super::SparseTensor;

/// Expands a sparse tensor to a dense (x, y, z, channel) array with zeros at
/// inactive sites.
pub fn densify(t: &SparseTensor) -> Array4<f32> {
    let [nx, ny, nz] = t.shape.map(|v| v as usize);
    let mut dense = Array4::zeros((nx, ny, nz, t.channels()));
    for (i, &c) in t.coords.iter().enumerate() {
        for ch in 0..t.channels() {
            dense[[c[0] as usize, c[1] as usize, c[2] as usize, ch]] = t.features[[i, ch]];
        }
    }
    dense
}

/// Reference padded convolution on the densified input. Test-scale only.
pub fn dense_oracle(t: &SparseTensor, p: &ConvParams) -> Array4<f32> {
    let dense = densify(t);
    dense_conv(dense.view(), p)
}

fn dense_conv(input: ArrayView4<f32>, p: &ConvParams) -> Array4<f32> {
    let (nx, ny, nz, in_c) = input.dim();
    assert_eq!(in_c, p.in_channels);
    let s = p.stride as usize;
    let ox = strided_extent(nx as u32, p.stride) as usize;
    let oy = strided_extent(ny as u32, p.stride) as usize;
    let oz = strided_extent(nz as u32, p.stride) as usize;
    let mut out = Array4::zeros((ox, oy, oz, p.out_channels));
    for x in 0..ox {
        for y in 0..oy {
            for z in 0..oz {
                for kx in 0..3usize {
                    for ky in 0..3usize {
                        for kz in 0..3usize {
                            let px = (x * s + kx) as i64 - 1;
                            let py = (y * s + ky) as i64 - 1;
                            let pz = (z * s + kz) as i64 - 1;
                            if px < 0
                                || py < 0
                                || pz < 0
                                || px >= nx as i64
                                || py >= ny as i64
                                || pz >= nz as i64
                            {
                                continue;
                            }
                            let k = kx * 9 + ky * 3 + kz;
                            for ic in 0..in_c {
                                let v = input[[px as usize, py as usize, pz as usize, ic]];
                                if v == 0.0 {
                                    continue;
                                }
                                for oc in 0..p.out_channels {
                                    out[[x, y, z, oc]] += v * p.weights[[k, ic, oc]];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::conv::ConvMode;
    use ndarray::{Array2, Array3};

    #[test]
    fn zero_weights_give_zero_output() {
        let t = SparseTensor::new(
            [4, 4, 4],
            vec![[1, 1, 1]],
            Array2::from_shape_vec((1, 2), vec![1.0, 2.0]).unwrap(),
        )
        .unwrap();
        let p = ConvParams::new(ConvMode::SparseStrided, 2, Array3::zeros((27, 2, 3))).unwrap();
        let out = dense_oracle(&t, &p);
        assert_eq!(out.dim(), (2, 2, 2, 3));
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_reproduces_densified_input() {
        let t = SparseTensor::new(
            [4, 4, 4],
            vec![[0, 0, 0], [3, 2, 1]],
            Array2::from_shape_vec((2, 1), vec![5.0, -1.5]).unwrap(),
        )
        .unwrap();
        let mut w = Array3::zeros((27, 1, 1));
        w[[13, 0, 0]] = 1.0;
        let p = ConvParams::new(ConvMode::Submanifold, 1, w).unwrap();
        assert_eq!(dense_oracle(&t, &p), densify(&t));
    }
}
