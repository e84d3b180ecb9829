//! Motion files, the synthetic corpus, windowing and multimodal grouping.

mod manifest;
mod sequence;
mod skeleton;
mod synth;
mod window;

pub use manifest::{LoadedManifest, Manifest};
pub use sequence::PoseSequence;
pub use skeleton::Skeleton;
pub use synth::{synth_generate, Primitive, SynthSequence};
pub use window::{
    build_multimodal_index, center_normalize, denormalize, denormalize_sequence, make_windows,
    zero_velocity_baseline, MotionWindow, NamedSequence, Offset, WindowDataset,
};
