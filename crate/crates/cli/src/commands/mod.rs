pub mod bandwidth;
pub mod bench;
pub mod forward;
pub mod golden;
pub mod simulate;
pub mod synth;
pub mod voxelize;
pub mod weights;
