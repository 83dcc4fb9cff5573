//! Simulated V2X exchange: range gating, resolution assignment, message
//! encoding, channel accounting, and optional fusion of the received grids.

mod assign;
mod io;
mod scene;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::backbone::{forward, BackboneError, BackboneWeights, BevMap, FeatureMode};
use crate::codec::{
    bandwidth, encode, payload_size, CodecError, PayloadMode, SizeReport, Sublayout,
    VoxelGridMessage, MESSAGE_HEADER_BYTES,
};
use crate::grid::{
    mean_features, regrid, voxelize, GridError, Level, LevelSpecs, PointCloud, Pose,
    SparseVoxelGrid,
};

pub use assign::{
    assign_budget, assign_uniform, filter_in_range, Assignment, BudgetCandidate, InRangeCav,
};
pub use io::{read_scenario, write_scenario};
pub use scene::{frame_seed, gen_scenario, gen_scene};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Backbone(#[from] BackboneError),
}

/// One participant: its pose in the world and the cloud in its own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: u32,
    pub pose: Pose,
    pub cloud: PointCloud,
}

/// All vehicles sensing at the same instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFrame {
    pub timestamp_us: u64,
    pub ego_id: u32,
    pub vehicles: Vec<Vehicle>,
}

impl ScenarioFrame {
    pub fn new(timestamp_us: u64, ego_id: u32, vehicles: Vec<Vehicle>) -> Result<Self, SimError> {
        if !(2..=7).contains(&vehicles.len()) {
            return Err(SimError::InvalidScenario(format!(
                "frames hold 2 to 7 vehicles, got {}",
                vehicles.len()
            )));
        }
        let mut ids: Vec<u32> = vehicles.iter().map(|v| v.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(SimError::InvalidScenario("duplicate vehicle ids".into()));
        }
        if !ids.contains(&ego_id) {
            return Err(SimError::InvalidScenario(format!(
                "ego id {ego_id} is not among the vehicles"
            )));
        }
        Ok(Self {
            timestamp_us,
            ego_id,
            vehicles,
        })
    }

    pub fn ego(&self) -> &Vehicle {
        self.vehicles
            .iter()
            .find(|v| v.id == self.ego_id)
            .expect("validated at construction")
    }
}

/// Channel parameters and codec selection for the exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub frequency_hz: f64,
    pub comm_range_m: f64,
    /// Budget for the greedy strategy, Mbit/s.
    pub capacity_mbps: Option<f64>,
    pub mode: PayloadMode,
    pub sublayout: Sublayout,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 10.0,
            comm_range_m: 70.0,
            capacity_mbps: None,
            mode: PayloadMode::CoordsOnly,
            sublayout: Sublayout::Compat,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.frequency_hz > 0.0) || !(self.comm_range_m > 0.0) {
            return Err(SimError::InvalidConfig(
                "frequency and range must be positive".into(),
            ));
        }
        if let Some(c) = self.capacity_mbps {
            if !(c > 0.0) {
                return Err(SimError::InvalidConfig("capacity must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn feature_mode(&self) -> FeatureMode {
        match self.mode {
            PayloadMode::CoordsOnly => FeatureMode::Center,
            PayloadMode::CoordsPlusMeanFeatures => FeatureMode::Mean,
        }
    }
}

/// How in-range CAVs are assigned resolution levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Independent uniform draw per CAV from a per-frame seed.
    Uniform,
    /// Greedy capacity-constrained degradation.
    Budget,
    /// Everyone at one fixed level.
    Fixed(Level),
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Strategy::Uniform),
            "budget" => Ok(Strategy::Budget),
            "high" => Ok(Strategy::Fixed(Level::High)),
            "medium" => Ok(Strategy::Fixed(Level::Medium)),
            "low" => Ok(Strategy::Fixed(Level::Low)),
            other => Err(format!(
                "unknown strategy `{other}` (expected uniform|budget|high|medium|low)"
            )),
        }
    }
}

/// Channel accounting for one frame. Every byte count is the length of an
/// actually encoded message, never an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub timestamp_us: u64,
    pub per_cav_bytes: BTreeMap<u32, u64>,
    pub total_bytes: u64,
    pub bandwidth: SizeReport,
    pub assignment: Assignment,
    pub in_range: usize,
    pub out_of_range: usize,
    /// In-range CAVs left unassigned by the budget strategy.
    pub unassigned: usize,
}

/// Executes one exchange round: gate by range, assign levels, voxelize and
/// encode per CAV, account for bytes, and (when weights are given) decode,
/// regrid into the ego frame, and run the fusion backbone.
pub fn step(
    frame: &ScenarioFrame,
    cfg: &ChannelConfig,
    strategy: Strategy,
    specs: &LevelSpecs,
    weights: Option<&BackboneWeights>,
    assign_seed: u64,
) -> Result<(FrameReport, Option<BevMap>), SimError> {
    cfg.validate()?;
    let ego = frame.ego();
    let others: Vec<(u32, Pose)> = frame
        .vehicles
        .iter()
        .filter(|v| v.id != frame.ego_id)
        .map(|v| (v.id, v.pose))
        .collect();
    let in_range = filter_in_range(&ego.pose, &others, cfg.comm_range_m);
    let out_of_range = others.len() - in_range.len();
    let vehicle = |id: u32| {
        frame
            .vehicles
            .iter()
            .find(|v| v.id == id)
            .expect("in-range ids come from this frame")
    };

    let assignment = match strategy {
        Strategy::Uniform => {
            let ids: Vec<u32> = in_range.iter().map(|c| c.id).collect();
            assign_uniform(&ids, assign_seed)
        }
        Strategy::Fixed(level) => Assignment {
            levels: in_range.iter().map(|c| (c.id, level)).collect(),
        },
        Strategy::Budget => {
            let capacity = cfg.capacity_mbps.ok_or_else(|| {
                SimError::InvalidConfig("budget strategy requires a channel capacity".into())
            })?;
            let candidates: Vec<BudgetCandidate> = in_range
                .iter()
                .map(|c| {
                    let level_bytes = [Level::High, Level::Medium, Level::Low].map(|l| {
                        let grid = voxelize(&vehicle(c.id).cloud, specs.get(l));
                        MESSAGE_HEADER_BYTES as u64
                            + payload_size(grid.len() as u64, cfg.mode, cfg.sublayout)
                    });
                    BudgetCandidate {
                        id: c.id,
                        distance_m: c.distance_m,
                        level_bytes,
                    }
                })
                .collect();
            assign_budget(&candidates, capacity, cfg.frequency_hz)
        }
    };

    let mut per_cav_bytes = BTreeMap::new();
    let mut wire: Vec<Vec<u8>> = Vec::new();
    for (&id, &level) in &assignment.levels {
        let v = vehicle(id);
        let spec = specs.get(level);
        let grid = match cfg.mode {
            PayloadMode::CoordsOnly => voxelize(&v.cloud, spec),
            PayloadMode::CoordsPlusMeanFeatures => mean_features(&v.cloud, spec),
        };
        let msg = VoxelGridMessage::new(id, frame.timestamp_us, &v.pose, grid, cfg.sublayout)?;
        let bytes = encode(&msg)?;
        per_cav_bytes.insert(id, bytes.len() as u64);
        wire.push(bytes);
    }
    let total_bytes: u64 = per_cav_bytes.values().sum();
    let report = FrameReport {
        timestamp_us: frame.timestamp_us,
        total_bytes,
        bandwidth: bandwidth(total_bytes, cfg.frequency_hz),
        in_range: in_range.len(),
        out_of_range,
        unassigned: in_range.len() - assignment.len(),
        per_cav_bytes,
        assignment,
    };

    let bev = match weights {
        None => None,
        Some(w) => {
            let mut collective: Vec<(Level, SparseVoxelGrid)> = Vec::with_capacity(wire.len());
            for bytes in &wire {
                let msg = crate::codec::decode(bytes)?;
                let level = msg.spec().level;
                let rel = ego.pose.inverse().compose(&msg.sender_pose);
                let grid = regrid(&msg.grid, specs.get(level), &rel);
                collective.push((level, grid));
            }
            Some(forward(
                &ego.cloud,
                &collective,
                w,
                specs,
                cfg.feature_mode(),
            )?)
        }
    };
    Ok((report, bev))
}

/// Whole-scenario aggregation of per-frame channel reports.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub frames: Vec<FrameReport>,
    pub mean_mbps: f64,
    pub max_mbps: f64,
    pub total_bytes: u64,
    /// Messages sent at High, Medium, Low across all frames.
    pub level_usage: [u64; 3],
    pub out_of_range_total: u64,
    pub unassigned_total: u64,
}

/// Steps every frame in order. The uniform strategy draws from a per-frame
/// seed derived from `seed` and the frame index, so results are reproducible
/// for a fixed (scenario, config, seed) triple.
pub fn simulate(
    scenario: &[ScenarioFrame],
    cfg: &ChannelConfig,
    strategy: Strategy,
    specs: &LevelSpecs,
    weights: Option<&BackboneWeights>,
    seed: u64,
) -> Result<AggregateReport, SimError> {
    if scenario.is_empty() {
        return Err(SimError::InvalidScenario("no frames to simulate".into()));
    }
    let mut frames = Vec::with_capacity(scenario.len());
    for (i, frame) in scenario.iter().enumerate() {
        let (report, _) = step(frame, cfg, strategy, specs, weights, frame_seed(seed, i as u64))?;
        frames.push(report);
    }
    let mut level_usage = [0u64; 3];
    for r in &frames {
        for level in r.assignment.levels.values() {
            level_usage[level.as_u8() as usize] += 1;
        }
    }
    let mean_mbps =
        frames.iter().map(|r| r.bandwidth.bandwidth_mbps).sum::<f64>() / frames.len() as f64;
    let max_mbps = frames
        .iter()
        .map(|r| r.bandwidth.bandwidth_mbps)
        .fold(0.0, f64::max);
    Ok(AggregateReport {
        mean_mbps,
        max_mbps,
        total_bytes: frames.iter().map(|r| r.total_bytes).sum(),
        level_usage,
        out_of_range_total: frames.iter().map(|r| r.out_of_range as u64).sum(),
        unassigned_total: frames.iter().map(|r| r.unassigned as u64).sum(),
        frames,
    })
}

/// Renders an aggregate report as stable key=value text, one frame per line
/// after the summary block. This rendering is the golden-file surface.
pub fn render_report(report: &AggregateReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "frames={}", report.frames.len());
    let _ = writeln!(out, "total_bytes={}", report.total_bytes);
    let _ = writeln!(out, "mean_mbps={:.6}", report.mean_mbps);
    let _ = writeln!(
        out,
        "mean_mbps_display={:.1}",
        crate::codec::truncate_tenths(report.mean_mbps)
    );
    let _ = writeln!(
        out,
        "max_mbps_display={:.1}",
        crate::codec::truncate_tenths(report.max_mbps)
    );
    let _ = writeln!(out, "level_high={}", report.level_usage[0]);
    let _ = writeln!(out, "level_medium={}", report.level_usage[1]);
    let _ = writeln!(out, "level_low={}", report.level_usage[2]);
    let _ = writeln!(out, "out_of_range={}", report.out_of_range_total);
    let _ = writeln!(out, "unassigned={}", report.unassigned_total);
    for (i, f) in report.frames.iter().enumerate() {
        let _ = writeln!(
            out,
            "frame index={} t_us={} in_range={} assigned={} bytes={} mbps={}",
            i,
            f.timestamp_us,
            f.in_range,
            f.assignment.len(),
            f.total_bytes,
            f.bandwidth.display_mbps()
        );
    }
    out
}
