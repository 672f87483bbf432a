//! Sequence and annotation I/O, the repetitive-video constructor and the
//! synthetic long-sequence generator.

pub mod annotations;
pub mod manifest;
pub mod netpbm;
pub mod repeat;
pub mod synth;

pub use annotations::{
    parse_annotations, write_annotations, AnnotationEntry, AnnotationTrack,
};
pub use manifest::{load_manifest, load_sequence, save_manifest, LoadedSequence, SequenceManifest};
pub use repeat::make_repetitive;
pub use synth::{
    generate_synthetic, parse_synth_spec, render_all, MotionKind, MotionSegment, SynthSpec,
    SynthVideo,
};
