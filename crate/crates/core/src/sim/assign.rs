use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::grid::{Level, Pose};

/// Level chosen for each in-range CAV. CAVs dropped by the budget strategy
/// are absent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    pub levels: BTreeMap<u32, Level>,
}

impl Assignment {
    pub fn level_of(&self, id: u32) -> Option<Level> {
        self.levels.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// A CAV that passed range gating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InRangeCav {
    pub id: u32,
    pub distance_m: f64,
}

/// Keeps CAVs whose planar x-y distance to the ego is at most `range_m`
/// (inclusive boundary). Result is sorted by id.
pub fn filter_in_range(ego: &Pose, others: &[(u32, Pose)], range_m: f64) -> Vec<InRangeCav> {
    let mut kept: Vec<InRangeCav> = others
        .iter()
        .filter_map(|(id, pose)| {
            let d = ego.planar_distance(pose);
            (d <= range_m).then_some(InRangeCav {
                id: *id,
                distance_m: d,
            })
        })
        .collect();
    kept.sort_by_key(|c| c.id);
    kept
}

/// Assigns each id one of the three levels uniformly at random from a
/// seeded generator, drawing in the order the ids are given.
pub fn assign_uniform(ids: &[u32], seed: u64) -> Assignment {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut levels = BTreeMap::new();
    for &id in ids {
        let level = match rng.random_range(0..3u8) {
            0 => Level::High,
            1 => Level::Medium,
            _ => Level::Low,
        };
        levels.insert(id, level);
    }
    Assignment { levels }
}

/// A budget-strategy candidate: projected message bytes at each level.
/// Costs must be monotone (High >= Medium >= Low), which holds for any
/// fixed cloud since finer grids occupy at least as many voxels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetCandidate {
    pub id: u32,
    pub distance_m: f64,
    /// Projected bytes at High, Medium, Low.
    pub level_bytes: [u64; 3],
}

impl BudgetCandidate {
    fn bytes_at(&self, level: Level) -> u64 {
        self.level_bytes[level.as_u8() as usize]
    }
}

fn projected_mbps(total_bytes: u64, frequency_hz: f64) -> f64 {
    total_bytes as f64 * 8.0 * frequency_hz / 1e6
}

/// Greedy budgeted assignment: start everyone at High, then walk CAVs in
/// descending id, degrading each step by step to Medium then Low until the
/// projected bandwidth fits `capacity_mbps`. If all-Low still exceeds the
/// budget, drop the farthest CAVs (ties to the higher id) until it fits.
/// The projection uses the same bytes-to-megabits arithmetic as reporting,
/// so the result never exceeds capacity.
pub fn assign_budget(
    cavs: &[BudgetCandidate],
    capacity_mbps: f64,
    frequency_hz: f64,
) -> Assignment {
    let mut levels: BTreeMap<u32, Level> =
        cavs.iter().map(|c| (c.id, Level::High)).collect();
    let by_id = |id: u32| cavs.iter().find(|c| c.id == id).unwrap();
    let total = |levels: &BTreeMap<u32, Level>| -> u64 {
        levels.iter().map(|(&id, &l)| by_id(id).bytes_at(l)).sum()
    };
    let fits = |levels: &BTreeMap<u32, Level>| {
        projected_mbps(total(levels), frequency_hz) <= capacity_mbps
    };

    let mut order: Vec<u32> = levels.keys().copied().collect();
    order.reverse();
    for &id in &order {
        while !fits(&levels) {
            let l = levels[&id];
            match l {
                Level::High => levels.insert(id, Level::Medium),
                Level::Medium => levels.insert(id, Level::Low),
                Level::Low => break,
            };
        }
        if fits(&levels) {
            break;
        }
    }
    while !fits(&levels) && !levels.is_empty() {
        let farthest = *levels
            .keys()
            .max_by(|a, b| {
                let (da, db) = (by_id(**a).distance_m, by_id(**b).distance_m);
                da.partial_cmp(&db).unwrap().then(a.cmp(b))
            })
            .unwrap();
        levels.remove(&farthest);
    }
    Assignment { levels }
}
