//! Toy-scale encoders, synthetic paired data and the two-stage distillation run.

mod encoder;
mod image;
mod synth;
mod train;

pub use encoder::{EncoderDims, EncoderOutput, ForwardCache, GlobalEncoder, ToyEncoder};
pub use image::GrayImage;
pub use synth::{
    synthesize_pairs, synthesize_triplets, PairedFrame, PairedFrameSet, SynthConfig, TripletFrame, GLYPH_RADIUS,
};
pub use train::{
    distill_stage, run_transitive, CropRecord, Stage, StageConfig, StepLosses, TrainTrace,
    TransitiveConfig, TransitiveOutcome, TransitiveSeeds,
};
