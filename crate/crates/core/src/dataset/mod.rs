//! Samples, dense annotations, splitting, augmentation, and a procedural
//! scene generator.

pub mod augment;
pub mod io;
mod mask;
pub mod sample;
pub mod split;
pub mod synth;

pub use augment::{augment, apply_augmentation, sample_rng, AugmentConfig, AugmentDraws, HsvJitter};
pub use io::{load_dataset, load_sample, load_samples, read_manifest, write_dataset};
pub use mask::{argmax_mask, one_hot, one_hot_classes, ClassIndexMask};
pub use sample::{format_id, parse_id, Sample};
pub use split::{split_dataset, Split, SplitManifest};
pub use synth::{synth_generate, synth_scene, synth_scenes, PlantedInstance, SynthConfig, SynthScene};
