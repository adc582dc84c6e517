//! Recordings, their container format, preprocessing, crops and a synthetic
//! generator.

mod crops;
mod preprocess;
mod recording;
pub mod resample;
mod split;
mod synth;

pub use crops::{crop_batch, crop_starts, generate_crops, Crop};
pub use preprocess::{clip, preprocess, PreprocessConfig};
pub use recording::{
    decode_recording, encode_recording, load_recording, save_recording, Label, Manifest, Recording, Split,
};
pub use resample::resample;
pub use split::subject_split;
pub use synth::{synth_dataset, SignatureConfig, SynthDataset};

/// The 21-electrode 10-20 montage, in canonical order.
pub const STANDARD_ELECTRODES: [&str; 21] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz", "C4", "T4", "T5", "P3", "Pz", "P4", "T6", "O1", "O2",
    "A1", "A2",
];
