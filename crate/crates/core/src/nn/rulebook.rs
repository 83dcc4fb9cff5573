use std::collections::{BTreeMap, HashMap};

use super::conv::ConvMode;

/// The 27 kernel offsets in fixed execution order: index k decomposes as
/// (kx, ky, kz) with k = kx*9 + ky*3 + kz, each component in [0, 3).
pub const KERNEL_OFFSETS: usize = 27;

fn offset_components(k: usize) -> [i64; 3] {
    [(k / 9) as i64, (k / 3 % 3) as i64, (k % 3) as i64]
}

/// Gather/scatter plan for one convolution: for every kernel offset, the
/// (input site, output site) index pairs it connects.
///
/// For a fixed offset the input-to-output map is injective, so per-offset
/// scatter has no collisions; accumulating offsets in order 0..27 makes
/// execution bitwise deterministic.
#[derive(Debug, Clone)]
pub struct Rulebook {
    pub out_shape: [u32; 3],
    pub out_coords: Vec<[u32; 3]>,
    pub rules: Vec<Vec<(u32, u32)>>,
}

/// Output spatial extent of a padded (pad 1) kernel-3 convolution.
pub fn strided_extent(n: u32, stride: u32) -> u32 {
    (n + 2 - 3) / stride + 1
}

/// Builds the rulebook for a 3x3x3, padding-1 convolution over `coords`.
///
/// Submanifold: output sites equal input sites and a rule (k, i, o) exists
/// when input i sits at offset k inside output o's footprint. SparseStrided:
/// an output site is active when any input falls in its footprint, with
/// input = output * stride + offset - 1 per axis.
pub fn build_rulebook(
    coords: &[[u32; 3]],
    shape: [u32; 3],
    mode: ConvMode,
    stride: u32,
) -> Rulebook {
    match mode {
        ConvMode::Submanifold => {
            debug_assert_eq!(stride, 1);
            let index: HashMap<[u32; 3], u32> = coords
                .iter()
                .enumerate()
                .map(|(i, &c)| (c, i as u32))
                .collect();
            let mut rules = vec![Vec::new(); KERNEL_OFFSETS];
            for (o, &oc) in coords.iter().enumerate() {
                for (k, rule) in rules.iter_mut().enumerate() {
                    let d = offset_components(k);
                    let p = [
                        oc[0] as i64 + d[0] - 1,
                        oc[1] as i64 + d[1] - 1,
                        oc[2] as i64 + d[2] - 1,
                    ];
                    if (0..3).any(|a| p[a] < 0 || p[a] >= shape[a] as i64) {
                        continue;
                    }
                    if let Some(&i) = index.get(&[p[0] as u32, p[1] as u32, p[2] as u32]) {
                        rule.push((i, o as u32));
                    }
                }
            }
            Rulebook {
                out_shape: shape,
                out_coords: coords.to_vec(),
                rules,
            }
        }
        ConvMode::SparseStrided => {
            let out_shape = [
                strided_extent(shape[0], stride),
                strided_extent(shape[1], stride),
                strided_extent(shape[2], stride),
            ];
            let s = stride as i64;
            // Output coord reached by input c through offset k, if any:
            // o = (c + 1 - k) / s, exact division, within the output shape.
            let reach = |c: [u32; 3], k: usize| -> Option<[u32; 3]> {
                let d = offset_components(k);
                let mut o = [0u32; 3];
                for a in 0..3 {
                    let num = c[a] as i64 + 1 - d[a];
                    if num < 0 || num % s != 0 {
                        return None;
                    }
                    let v = num / s;
                    if v >= out_shape[a] as i64 {
                        return None;
                    }
                    o[a] = v as u32;
                }
                Some(o)
            };
            let mut active: BTreeMap<[u32; 3], u32> = BTreeMap::new();
            for &c in coords {
                for k in 0..KERNEL_OFFSETS {
                    if let Some(o) = reach(c, k) {
                        active.entry(o).or_insert(0);
                    }
                }
            }
            for (i, (_, idx)) in active.iter_mut().enumerate() {
                *idx = i as u32;
            }
            let mut rules = vec![Vec::new(); KERNEL_OFFSETS];
            for (i, &c) in coords.iter().enumerate() {
                for (k, rule) in rules.iter_mut().enumerate() {
                    if let Some(o) = reach(c, k) {
                        rule.push((i as u32, active[&o]));
                    }
                }
            }
            Rulebook {
                out_shape,
                out_coords: active.into_keys().collect(),
                rules,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_submanifold_has_one_center_rule() {
        let rb = build_rulebook(&[[2, 2, 2]], [8, 8, 8], ConvMode::Submanifold, 1);
        assert_eq!(rb.out_coords, vec![[2, 2, 2]]);
        let total: usize = rb.rules.iter().map(Vec::len).sum();
        assert_eq!(total, 1);
        // k = 13 is the center offset (1,1,1).
        assert_eq!(rb.rules[13], vec![(0, 0)]);
    }

    #[test]
    fn strided_extent_halves_even_axes() {
        assert_eq!(strided_extent(5600, 2), 2800);
        assert_eq!(strided_extent(40, 2), 20);
        assert_eq!(strided_extent(10, 2), 5);
        assert_eq!(strided_extent(7, 1), 7);
    }

    #[test]
    fn strided_output_covers_receptive_inputs() {
        // A corner site must appear in the footprint of the corner output.
        let rb = build_rulebook(&[[0, 0, 0]], [8, 8, 4], ConvMode::SparseStrided, 2);
        assert_eq!(rb.out_shape, [4, 4, 2]);
        assert_eq!(rb.out_coords, vec![[0, 0, 0]]);
        // Offsets reaching (0,0,0): c = o*2 + k - 1 => k = 1 on each axis.
        assert_eq!(rb.rules[13], vec![(0, 0)]);
    }

    #[test]
    fn submanifold_neighbors_produce_paired_rules() {
        let rb = build_rulebook(
            &[[1, 1, 1], [1, 1, 2]],
            [4, 4, 4],
            ConvMode::Submanifold,
            1,
        );
        let total: usize = rb.rules.iter().map(Vec::len).sum();
        // Each site sees itself (center) and its one neighbor: 4 rules.
        assert_eq!(total, 4);
        // Offset (1,1,0): input at z+(-1) relative to output.
        assert_eq!(rb.rules[9 + 3], vec![(0, 1)]);
        assert_eq!(rb.rules[9 + 3 + 2], vec![(1, 0)]);
    }
}
