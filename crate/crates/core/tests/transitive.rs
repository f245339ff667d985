//! Two-stage distillation on synthetic pairs: frozen teachers, the
//! initialization chain, loss trend, crop policies and held-out alignment.

mod common;

use common::{ks_p_value, ks_uniform};
use embodi_core::analysis::cosine;
use embodi_core::distill::{DistillConfig, PrototypeHead};
use embodi_core::toy::{
    distill_stage, run_transitive, synthesize_pairs, synthesize_triplets, EncoderDims, GlobalEncoder, GrayImage,
    PairedFrame, Stage, StageConfig, SynthConfig, ToyEncoder, TransitiveConfig, TransitiveSeeds,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Held-out improvement the stage-2 student must show over the untrained baseline.
const HR_MARGIN: f64 = 0.05;

fn mean_cosine(a: &ToyEncoder, b: &ToyEncoder, pairs: &[(&GrayImage, &GrayImage)]) -> f64 {
    pairs
        .iter()
        .map(|(x, y)| {
            let fx = a.encode_global(&x.to_input()).unwrap();
            let fy = b.encode_global(&y.to_input()).unwrap();
            cosine(&fx, &fy).unwrap()
        })
        .sum::<f64>()
        / pairs.len() as f64
}

#[test]
fn full_run_on_fifty_pairs() {
    let data = synthesize_pairs(31, 5, 10, &SynthConfig::default()).unwrap();
    assert_eq!(data.stage1.len(), 50);
    let cfg = TransitiveConfig::default();
    assert_eq!(cfg.stage1.steps, 500);
    let seeds = TransitiveSeeds::from_base(5);
    let out = run_transitive(&data.stage1, &data.stage2, &cfg, seeds).unwrap();

    // the human teacher is exactly its calibrated initialization
    let mut fresh = ToyEncoder::init(cfg.dims, seeds.init).unwrap();
    let inputs: Vec<Vec<f64>> = data.stage1.iter().map(|p| p.first.to_input()).collect();
    fresh.center_outputs(&inputs).unwrap();
    assert_eq!(out.human.checksum(), fresh.checksum());
    assert_eq!(out.human.params(), fresh.params());

    // initialization chain
    assert_eq!(out.stage1.initial_params, out.human.params());
    assert_eq!(out.pseudo.params(), &out.stage1.final_params[..]);
    assert_eq!(out.stage2.initial_params, out.stage1.final_params);
    assert_eq!(out.robot.params(), &out.stage2.final_params[..]);
    assert_ne!(out.stage1.final_params, out.stage1.initial_params);

    // smoothed stage-1 loss trends downward
    let windows: Vec<f64> = out
        .stage1
        .steps
        .chunks(50)
        .map(|c| c.iter().map(|s| s.total).sum::<f64>() / c.len() as f64)
        .collect();
    let down = windows.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(down as f64 >= 0.9 * (windows.len() - 1) as f64, "window means {windows:?}");

    // stage 1 crops every local view around the contact pixel
    assert!(!out.stage1.crops.is_empty());
    for c in &out.stage1.crops {
        assert!(c.roint);
        let (u, v) = data.stage1[c.pair].interaction_center;
        assert_eq!(c.center, (u, v));
        assert!(c.rect.contains(u, v));
    }

    // stage 2 centers are uniform over the image
    assert!(out.stage2.crops.iter().all(|c| !c.roint));
    let size = cfg.dims.image as f64;
    let mut jitter = ChaCha8Rng::seed_from_u64(77);
    let first: Vec<_> = out.stage2.crops.iter().take(1000).collect();
    assert_eq!(first.len(), 1000);
    let us: Vec<f64> = first.iter().map(|c| c.center.0 as f64 + jitter.random::<f64>()).collect();
    let vs: Vec<f64> = first.iter().map(|c| c.center.1 as f64 + jitter.random::<f64>()).collect();
    for (name, s) in [("u", &us), ("v", &vs)] {
        let p = ks_p_value(ks_uniform(s, 0.0, size), s.len());
        assert!(p > 0.01, "stage-2 {name} center p = {p}");
    }

    // held-out alignment
    let held = synthesize_triplets(9031, 10, 8, &SynthConfig::default()).unwrap();
    let hp: Vec<_> = held.iter().map(|t| (&t.human, &t.pseudo)).collect();
    let hr: Vec<_> = held.iter().map(|t| (&t.human, &t.real)).collect();
    let hp_before = mean_cosine(&out.human, &out.human, &hp);
    let hp_after = mean_cosine(&out.human, &out.pseudo, &hp);
    assert!(hp_after > hp_before, "human/pseudo {hp_before} -> {hp_after}");
    let hr_before = mean_cosine(&out.human, &out.human, &hr);
    let hr_after = mean_cosine(&out.human, &out.robot, &hr);
    assert!(hr_after > hr_before + HR_MARGIN, "human/real {hr_before} -> {hr_after}");
}

fn small_setup() -> (Vec<PairedFrame>, ToyEncoder, PrototypeHead, DistillConfig) {
    let data = synthesize_pairs(41, 2, 6, &SynthConfig::default()).unwrap();
    let cfg = TransitiveConfig::default();
    let teacher = ToyEncoder::init(cfg.dims, 3).unwrap();
    let head = PrototypeHead::random(64, cfg.dims.feature, 0.9, 4).unwrap();
    let distill = DistillConfig { prototypes: 64, ..DistillConfig::default() };
    (data.stage1, teacher, head, distill)
}

#[test]
fn teacher_bytes_are_untouched_by_a_stage() {
    let (pairs, teacher, head, distill) = small_setup();
    let before: Vec<u64> = teacher.params().iter().map(|p| p.to_bits()).collect();
    let sum = teacher.checksum();
    let stage = StageConfig { steps: 15, batch_size: 8, ..StageConfig::stage1() };
    let trace = distill_stage(&teacher, &teacher.clone(), &head, &pairs, &distill, &stage, Stage::One, 1).unwrap();
    let after: Vec<u64> = teacher.params().iter().map(|p| p.to_bits()).collect();
    assert_eq!(before, after);
    assert_eq!(sum, teacher.checksum());
    assert_eq!(trace.steps.len(), 15);
    assert_ne!(trace.final_params, trace.initial_params);
}

#[test]
fn zero_steps_leave_the_student_unchanged() {
    let (pairs, teacher, head, distill) = small_setup();
    let student = ToyEncoder::init(teacher.dims(), 99).unwrap();
    let stage = StageConfig { steps: 0, ..StageConfig::stage2() };
    let trace = distill_stage(&teacher, &student, &head, &pairs, &distill, &stage, Stage::Two, 1).unwrap();
    assert_eq!(trace.final_params, student.params());
    assert_eq!(trace.initial_params, trace.final_params);
    assert!(trace.steps.is_empty() && trace.crops.is_empty());
}

#[test]
fn same_seed_same_run() {
    let data = synthesize_pairs(51, 2, 5, &SynthConfig::default()).unwrap();
    let mut cfg = TransitiveConfig::default();
    cfg.stage1.steps = 12;
    cfg.stage2.steps = 12;
    cfg.stage1.batch_size = 6;
    cfg.stage2.batch_size = 6;
    let a = run_transitive(&data.stage1, &data.stage2, &cfg, TransitiveSeeds::from_base(8)).unwrap();
    let b = run_transitive(&data.stage1, &data.stage2, &cfg, TransitiveSeeds::from_base(8)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.robot.checksum(), b.robot.checksum());
    let c = run_transitive(&data.stage1, &data.stage2, &cfg, TransitiveSeeds::from_base(9)).unwrap();
    assert_ne!(a.robot.checksum(), c.robot.checksum());
}

#[test]
fn mismatched_inputs_are_rejected() {
    let (pairs, teacher, head, distill) = small_setup();
    let stage = StageConfig::stage1();
    let other = ToyEncoder::init(EncoderDims { hidden: 16, ..teacher.dims() }, 1).unwrap();
    assert!(distill_stage(&teacher, &other, &head, &pairs, &distill, &stage, Stage::One, 0).is_err());
    assert!(distill_stage(&teacher, &teacher, &head, &[], &distill, &stage, Stage::One, 0).is_err());
    let narrow = PrototypeHead::random(8, 5, 0.9, 0).unwrap();
    assert!(distill_stage(&teacher, &teacher, &narrow, &pairs, &distill, &stage, Stage::One, 0).is_err());
    assert!(Stage::from_index(3).is_err());
}
