//! Randomized invariants. Every oracle here recomputes the expected result
//! from first principles rather than reusing library internals.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, Array3};
use proptest::prelude::*;

use mrvox_core::codec::{
    bandwidth, decode, encode, truncate_tenths, Sublayout, VoxelGridMessage, MESSAGE_HEADER_BYTES,
};
use mrvox_core::grid::{
    merge_grids, regrid, voxelize, voxelize_with_stats, GridSpec, Level, Point, PointCloud, Pose,
    SparseVoxelGrid,
};
use mrvox_core::nn::{
    build_rulebook, dense_oracle, densify, scatter, sparse_conv, ConvMode, ConvParams, Reduce,
    SparseTensor,
};

fn coords_strategy(shape: [u32; 3], max_sites: usize) -> impl Strategy<Value = Vec<[u32; 3]>> {
    prop::collection::btree_set(
        (0..shape[0], 0..shape[1], 0..shape[2]).prop_map(|(x, y, z)| [x, y, z]),
        0..=max_sites,
    )
    .prop_map(|set| set.into_iter().collect())
}

fn tensor_strategy(
    shape: [u32; 3],
    channels: usize,
    max_sites: usize,
) -> impl Strategy<Value = SparseTensor> {
    coords_strategy(shape, max_sites).prop_flat_map(move |coords| {
        let n = coords.len();
        prop::collection::vec(-10.0f32..10.0, n * channels).prop_map(move |vals| {
            SparseTensor::new(
                shape,
                coords.clone(),
                Array2::from_shape_vec((n, channels), vals).unwrap(),
            )
            .unwrap()
        })
    })
}

fn small_spec(level: Level, nx: u32, ny: u32, nz: u32) -> GridSpec {
    let v = level.voxel_size();
    let extent = [
        nx as f64 * v[0],
        ny as f64 * v[1],
        nz as f64 * v[2],
    ];
    let spec = GridSpec::for_volume(level, [0.0, 0.0, 0.0], extent).unwrap();
    assert_eq!(spec.dims, [nx, ny, nz]);
    spec
}

/// Independent per-site fold over the union of active sites.
fn scatter_oracle(tensors: &[&SparseTensor], reduce: Reduce) -> BTreeMap<[u32; 3], Vec<f32>> {
    let channels = tensors[0].channels();
    let mut acc: BTreeMap<[u32; 3], (Vec<f32>, u32)> = BTreeMap::new();
    for t in tensors {
        for (i, &c) in t.coords.iter().enumerate() {
            let row: Vec<f32> = (0..channels).map(|ch| t.features[[i, ch]]).collect();
            match acc.entry(c) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert((row, 1));
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let (vals, count) = e.get_mut();
                    for ch in 0..channels {
                        vals[ch] = match reduce {
                            Reduce::Max => vals[ch].max(row[ch]),
                            Reduce::Min => vals[ch].min(row[ch]),
                            Reduce::Sum | Reduce::Mean => vals[ch] + row[ch],
                            Reduce::Mul => vals[ch] * row[ch],
                        };
                    }
                    *count += 1;
                }
            }
        }
    }
    acc.into_iter()
        .map(|(c, (mut vals, count))| {
            if reduce == Reduce::Mean {
                for v in &mut vals {
                    *v /= count as f32;
                }
            }
            (c, vals)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn codec_round_trips_every_layout(
        coords in coords_strategy([40, 24, 10], 60),
        sublayout_packed in any::<bool>(),
        with_features in any::<bool>(),
        sender in any::<u32>(),
        t_us in any::<u64>(),
        yaw in -3.1f64..3.1,
        tx in -50.0f64..50.0,
        ty in -20.0f64..20.0,
    ) {
        let spec = small_spec(Level::Low, 40, 24, 10);
        let n = coords.len();
        let grid = if with_features {
            let feats = Array2::from_shape_fn((n, 4), |(i, c)| (i * 7 + c) as f32 * 0.25 - 3.0);
            SparseVoxelGrid::with_features(spec, coords, feats).unwrap()
        } else {
            SparseVoxelGrid::from_coords(spec, coords).unwrap()
        };
        let sublayout = if sublayout_packed { Sublayout::Packed } else { Sublayout::Compat };
        let pose = Pose::from_yaw_translation(yaw, [tx, ty, 0.4].into());
        let msg = VoxelGridMessage::new(sender, t_us, &pose, grid, sublayout).unwrap();
        let bytes = encode(&msg).unwrap();
        prop_assert_eq!(bytes.len() as u64, msg.encoded_len());
        let per_voxel = if sublayout_packed { 6 } else { 12 } + if with_features { 16 } else { 0 };
        prop_assert_eq!(bytes.len() as u64, MESSAGE_HEADER_BYTES as u64 + n as u64 * per_voxel);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(&back, &msg);
        // Re-encoding is bitwise stable.
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn message_size_is_monotone_in_voxel_count(
        coords in coords_strategy([40, 24, 10], 50),
        extra in coords_strategy([40, 24, 10], 20),
    ) {
        let spec = small_spec(Level::Low, 40, 24, 10);
        let small = SparseVoxelGrid::from_coords(spec, coords.clone()).unwrap();
        let mut all: BTreeSet<[u32; 3]> = coords.into_iter().collect();
        all.extend(extra);
        let big = SparseVoxelGrid::from_coords(spec, all.into_iter().collect()).unwrap();
        let pose = Pose::identity();
        let a = encode(&VoxelGridMessage::new(0, 0, &pose, small, Sublayout::Compat).unwrap()).unwrap();
        let b = encode(&VoxelGridMessage::new(0, 0, &pose, big, Sublayout::Compat).unwrap()).unwrap();
        prop_assert!(b.len() >= a.len());
    }

    #[test]
    fn scatter_matches_independent_fold(
        a in tensor_strategy([6, 6, 4], 3, 24),
        b in tensor_strategy([6, 6, 4], 3, 24),
        c in tensor_strategy([6, 6, 4], 3, 24),
        reduce_idx in 0usize..5,
    ) {
        let reduce = [Reduce::Max, Reduce::Min, Reduce::Sum, Reduce::Mean, Reduce::Mul][reduce_idx];
        let out = scatter(&[&a, &b, &c], reduce).unwrap();
        let oracle = scatter_oracle(&[&a, &b, &c], reduce);
        prop_assert_eq!(out.len(), oracle.len());
        for (i, coord) in out.coords.iter().enumerate() {
            let expect = &oracle[coord];
            for ch in 0..3 {
                prop_assert_eq!(out.features[[i, ch]], expect[ch], "site {:?} ch {}", coord, ch);
            }
        }
    }

    #[test]
    fn scatter_max_is_permutation_invariant_and_idempotent(
        a in tensor_strategy([6, 6, 4], 2, 20),
        b in tensor_strategy([6, 6, 4], 2, 20),
        c in tensor_strategy([6, 6, 4], 2, 20),
    ) {
        let abc = scatter(&[&a, &b, &c], Reduce::Max).unwrap();
        let cab = scatter(&[&c, &a, &b], Reduce::Max).unwrap();
        prop_assert_eq!(&abc, &cab);
        // Folding in a pair at a time agrees with the flat fold.
        let ab = scatter(&[&a, &b], Reduce::Max).unwrap();
        let assoc = scatter(&[&ab, &c], Reduce::Max).unwrap();
        prop_assert_eq!(&abc, &assoc);
        let aa = scatter(&[&a, &a], Reduce::Max).unwrap();
        prop_assert_eq!(&aa, &a);
    }

    #[test]
    fn sparse_conv_agrees_with_dense_oracle(
        t in tensor_strategy([8, 8, 5], 3, 40),
        weights in prop::collection::vec(-1.0f32..1.0, 27 * 3 * 2),
        strided in any::<bool>(),
        stride_two in any::<bool>(),
    ) {
        let w = Array3::from_shape_vec((27, 3, 2), weights).unwrap();
        let (mode, stride) = if strided {
            (ConvMode::SparseStrided, if stride_two { 2 } else { 1 })
        } else {
            (ConvMode::Submanifold, 1)
        };
        let p = ConvParams::new(mode, stride, w).unwrap();
        let out = sparse_conv(&t, &p).unwrap();
        let expect = dense_oracle(&t, &p);
        if mode == ConvMode::Submanifold {
            // Active sites are preserved exactly.
            prop_assert_eq!(&out.coords, &t.coords);
            prop_assert_eq!(out.shape, t.shape);
            for (i, c) in out.coords.iter().enumerate() {
                for ch in 0..2 {
                    let got = out.features[[i, ch]];
                    let want = expect[[c[0] as usize, c[1] as usize, c[2] as usize, ch]];
                    prop_assert!((got - want).abs() <= 1e-4 + 1e-4 * want.abs(),
                        "site {:?} ch {}: {} vs {}", c, ch, got, want);
                }
            }
        } else {
            // Away from active outputs the dense result is zero, so the
            // densified sparse output must match everywhere.
            let got = densify(&out);
            prop_assert_eq!(got.dim(), expect.dim());
            for (g, e) in got.iter().zip(expect.iter()) {
                prop_assert!((g - e).abs() <= 1e-4 + 1e-4 * e.abs(), "{} vs {}", g, e);
            }
        }
    }

    #[test]
    fn conv_is_linear_in_the_input(
        t in tensor_strategy([6, 6, 4], 2, 25),
        weights in prop::collection::vec(-1.0f32..1.0, 27 * 2 * 2),
        alpha in -3.0f32..3.0,
    ) {
        let w = Array3::from_shape_vec((27, 2, 2), weights).unwrap();
        let p = ConvParams::new(ConvMode::Submanifold, 1, w).unwrap();
        let scaled = SparseTensor::new(t.shape, t.coords.clone(), t.features.mapv(|v| alpha * v)).unwrap();
        let out_scaled = sparse_conv(&scaled, &p).unwrap();
        let scaled_out = sparse_conv(&t, &p).unwrap().features.mapv(|v| alpha * v);
        for (a, b) in out_scaled.features.iter().zip(scaled_out.iter()) {
            prop_assert!((a - b).abs() <= 1e-3 + 1e-3 * b.abs(), "{} vs {}", a, b);
        }
    }

    #[test]
    fn rulebook_pairs_are_unique_per_offset(
        coords in coords_strategy([9, 7, 5], 40),
        strided in any::<bool>(),
        stride_two in any::<bool>(),
    ) {
        let (mode, stride) = if strided {
            (ConvMode::SparseStrided, if stride_two { 2 } else { 1 })
        } else {
            (ConvMode::Submanifold, 1)
        };
        let rb = build_rulebook(&coords, [9, 7, 5], mode, stride);
        for rules in &rb.rules {
            let ins: BTreeSet<u32> = rules.iter().map(|&(i, _)| i).collect();
            let outs: BTreeSet<u32> = rules.iter().map(|&(_, o)| o).collect();
            // Injective both ways per offset: accumulation order cannot
            // affect any single output element within one offset.
            prop_assert_eq!(ins.len(), rules.len());
            prop_assert_eq!(outs.len(), rules.len());
        }
    }

    #[test]
    fn voxelize_occupancy_is_a_set_union(
        xs1 in prop::collection::vec((-3.9f64..3.9, -3.9f64..3.9, -1.9f64..1.9), 0..40),
        xs2 in prop::collection::vec((-3.9f64..3.9, -3.9f64..3.9, -1.9f64..1.9), 0..40),
    ) {
        let spec = GridSpec::for_volume(Level::Low, [-4.0, -4.0, -2.0], [8.0, 8.0, 4.0]).unwrap();
        let to_cloud = |pts: &[(f64, f64, f64)]| {
            PointCloud::new(
                pts.iter().map(|&(x, y, z)| Point::new(x, y, z, 0.5)).collect(),
                Pose::identity(),
            ).unwrap()
        };
        let both: Vec<(f64, f64, f64)> = xs1.iter().chain(xs2.iter()).copied().collect();
        let g1 = voxelize(&to_cloud(&xs1), &spec);
        let g2 = voxelize(&to_cloud(&xs2), &spec);
        let gu = voxelize(&to_cloud(&both), &spec);
        let union: BTreeSet<[u32; 3]> = g1.coords.iter().chain(g2.coords.iter()).copied().collect();
        prop_assert_eq!(gu.coords, union.into_iter().collect::<Vec<_>>());
        let (_, stats) = voxelize_with_stats(&to_cloud(&both), &spec);
        prop_assert_eq!(stats.points_total, both.len());
        prop_assert_eq!(stats.points_kept, both.len());
    }

    #[test]
    fn merge_is_commutative_and_idempotent(
        c1 in coords_strategy([20, 20, 10], 30),
        c2 in coords_strategy([20, 20, 10], 30),
    ) {
        let spec = small_spec(Level::Low, 20, 20, 10);
        let a = SparseVoxelGrid::from_coords(spec, c1).unwrap();
        let b = SparseVoxelGrid::from_coords(spec, c2).unwrap();
        let ab = merge_grids(&[&a, &b]).unwrap();
        let ba = merge_grids(&[&b, &a]).unwrap();
        prop_assert_eq!(&ab, &ba);
        let aa = merge_grids(&[&a, &a]).unwrap();
        prop_assert_eq!(&aa, &a);
        // Merged occupancy is exactly the union.
        let union: BTreeSet<[u32; 3]> = a.coords.iter().chain(b.coords.iter()).copied().collect();
        prop_assert_eq!(ab.coords, union.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn regrid_identity_preserves_occupancy(
        coords in coords_strategy([20, 20, 10], 40),
    ) {
        let spec = small_spec(Level::Low, 20, 20, 10);
        let g = SparseVoxelGrid::from_coords(spec, coords).unwrap();
        let back = regrid(&g, &spec, &Pose::identity());
        prop_assert_eq!(back.coords, g.coords);
    }

    #[test]
    fn regrid_round_trip_keeps_sites(
        coords in coords_strategy([16, 16, 8], 30),
        dx in -2.0f64..2.0,
        dy in -2.0f64..2.0,
    ) {
        // Translating there and back can only move centers within their
        // cells, so occupancy survives a round trip.
        let spec = small_spec(Level::Low, 16, 16, 8);
        let g = SparseVoxelGrid::from_coords(spec, coords).unwrap();
        let shift = Pose::from_translation(dx, dy, 0.0);
        let there = regrid(&g, &spec, &shift);
        let back = regrid(&there, &spec, &shift.inverse());
        // Sites whose shifted center leaves the volume drop; the rest must
        // come back.
        for c in &back.coords {
            prop_assert!(g.coords.binary_search(c).is_ok());
        }
    }

    #[test]
    fn truncation_and_bandwidth_arithmetic(
        bytes in 0u64..3_000_000,
        extra in 0u64..500_000,
    ) {
        let r = bandwidth(bytes, 10.0);
        let exact = bytes as f64 * 8.0 * 10.0 / 1e6;
        prop_assert!((r.bandwidth_mbps - exact).abs() < 1e-9);
        let shown = truncate_tenths(r.bandwidth_mbps);
        prop_assert!(shown <= r.bandwidth_mbps + 1e-9);
        prop_assert!(r.bandwidth_mbps - shown < 0.1 + 1e-9);
        let bigger = bandwidth(bytes + extra, 10.0);
        prop_assert!(bigger.bandwidth_mbps >= r.bandwidth_mbps);
        prop_assert!(truncate_tenths(bigger.bandwidth_mbps) >= shown);
    }
}
