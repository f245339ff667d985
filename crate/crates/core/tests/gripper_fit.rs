//! Fingertip fitting and hybrid assembly against generated ground truth.

use std::f64::consts::PI;

use embodi_core::filter::{filter_human, filter_robot, DEFAULT_MARGIN};
use embodi_core::geometry::{unproject, PointCloud, RigidTransform, Vec3};
use embodi_core::gripper::{
    assemble_hybrid, fit_gripper_from_fingertips, fit_gripper_with_pairing, template_points, FingertipPairing,
    GripperState, GripperTemplate, HandObservation, BACKGROUND_FILL_COLOR, GRIPPER_MARKER_COLOR,
};
use embodi_core::scene::{sampling_pitch, SyntheticWorld};
use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::UnitQuaternion;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let rot = UnitQuaternion::from_scaled_axis(axis.normalize() * rng.random_range(0.0..PI));
    let t = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.3..1.5));
    RigidTransform::new(rot, t)
}

/// Fingertips and wrist generated from a known pose and opening.
fn observe(t: &GripperTemplate, pose: &RigidTransform, s: f64) -> HandObservation {
    HandObservation::new(
        pose.apply(&t.left_tip(s)),
        pose.apply(&t.right_tip(s)),
        Some(pose.apply(&t.approach_anchor())),
    )
    .unwrap()
}

#[test]
fn noise_free_recovery() {
    let t = GripperTemplate::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let t0 = random_transform(&mut rng);
        let fit = fit_gripper_from_fingertips(&observe(&t, &t0, 0.7), &t).unwrap();
        assert!(fit.state.pose.translation_distance(&t0) < 1e-9);
        assert!(fit.state.pose.rotation_distance(&t0) < 1e-9);
        assert!((fit.state.opening - 0.7).abs() < 1e-9);
        assert!(fit.residual < 1e-9);
    }
}

#[test]
fn millimeter_noise_study() {
    let t = GripperTemplate::default();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let noise = Normal::new(0.0, 0.001).unwrap();
    let mut total = 0.0;
    for _ in 0..100 {
        let t0 = random_transform(&mut rng);
        let clean = observe(&t, &t0, 0.7);
        let mut jitter = || Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        let noisy = HandObservation::new(clean.thumb_tip + jitter(), clean.index_tip + jitter(), clean.wrist).unwrap();
        let fit = fit_gripper_from_fingertips(&noisy, &t).unwrap();
        assert!(fit.residual > 0.0);
        total += fit.state.pose.translation_distance(&t0);
    }
    let mean = total / 100.0;
    assert!(mean < 0.002, "mean translation error {mean} m");
}

#[test]
fn fifty_rigid_motions_are_equivariant() {
    let t = GripperTemplate::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let t0 = random_transform(&mut rng);
    let noise = Normal::new(0.0, 0.002).unwrap();
    let base = observe(&t, &t0, 0.45);
    // noisy so that the residual is nonzero and its invariance is meaningful
    let hand = HandObservation::new(
        base.thumb_tip + Vec3::new(noise.sample(&mut rng), 0.0, noise.sample(&mut rng)),
        base.index_tip,
        base.wrist.map(|w| w + Vec3::new(0.0, noise.sample(&mut rng), 0.0)),
    )
    .unwrap();
    let fit = fit_gripper_from_fingertips(&hand, &t).unwrap();
    for _ in 0..50 {
        let g = random_transform(&mut rng);
        let moved = HandObservation::new(
            g.apply(&hand.thumb_tip),
            g.apply(&hand.index_tip),
            hand.wrist.map(|w| g.apply(&w)),
        )
        .unwrap();
        let f = fit_gripper_from_fingertips(&moved, &t).unwrap();
        let expect = g.compose(&fit.state.pose);
        assert!(f.state.pose.translation_distance(&expect) < 1e-9);
        assert!(f.state.pose.rotation_distance(&expect) < 1e-9);
        assert!((f.state.opening - fit.state.opening).abs() < 1e-9);
        assert!((f.residual - fit.residual).abs() < 1e-9);
    }
}

#[test]
fn mirrored_pairing_flips_about_the_approach_axis() {
    let t = GripperTemplate::default();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let t0 = random_transform(&mut rng);
    let obs = observe(&t, &t0, 0.3);
    let swapped = HandObservation::new(obs.index_tip, obs.thumb_tip, obs.wrist).unwrap();
    let fit = fit_gripper_with_pairing(&swapped, &t, FingertipPairing::ThumbRight).unwrap();
    assert!(fit.state.pose.translation_distance(&t0) < 1e-9);
    assert!(fit.state.pose.rotation_distance(&t0) < 1e-9);
}

fn chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    let one_way = |from: &[Vec3], to: &[Vec3]| {
        let pts: Vec<[f64; 3]> = to.iter().map(|p| [p.x, p.y, p.z]).collect();
        let tree = ImmutableKdTree::new_from_slice(&pts);
        from.iter()
            .map(|p| tree.nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z]).distance.sqrt())
            .sum::<f64>()
            / from.len() as f64
    };
    one_way(a, b) + one_way(b, a)
}

#[test]
fn human_and_robot_hybrids_coincide() {
    let world = SyntheticWorld::desk();
    let t = &world.template;
    for k in 0..10 {
        let human = world.render_human(k).unwrap();
        let (bg_h, _) = filter_human(&human.depth, &world.intrinsics, &human.mask).unwrap();
        let fit = fit_gripper_from_fingertips(&human.hand, t).unwrap();
        let hyb_h = assemble_hybrid(&bg_h, &fit.state, t).unwrap();

        let robot = world.render_robot(k).unwrap();
        let cloud = unproject(&robot.depth, &world.intrinsics, None).unwrap();
        let (bg_r, _) = filter_robot(&cloud, &world.chain, &world.occupancy, &robot.joints, DEFAULT_MARGIN).unwrap();
        let hyb_r = assemble_hybrid(&bg_r, &robot.gripper, t).unwrap();

        let pitch = sampling_pitch(bg_r.points(), &world.intrinsics);
        let d = chamfer(hyb_h.points(), hyb_r.points());
        assert!(d < 2.0 * pitch, "frame {k}: chamfer {d} vs pitch {pitch}");

        // identical state on both sides gives bit-identical gripper points
        let same_h = assemble_hybrid(&bg_h, &robot.gripper, t).unwrap();
        let m = t.len();
        assert_eq!(&same_h.points()[bg_h.len()..], &hyb_r.points()[bg_r.len()..]);
        assert_eq!(&same_h.colors().unwrap()[bg_h.len()..], &hyb_r.colors().unwrap()[bg_r.len()..]);
        assert_eq!(hyb_r.len(), bg_r.len() + m);
    }
}

#[test]
fn hybrid_cardinality_and_colors() {
    let t = GripperTemplate::default();
    let closed = template_points(&t, 0.0).unwrap();
    let state = GripperState::new(RigidTransform::identity(), 0.0).unwrap();
    assert_eq!(assemble_hybrid(&PointCloud::empty(), &state, &t).unwrap().points(), closed.points());

    let bg = PointCloud::new(vec![Vec3::new(0.0, 0.0, 1.0); 7]).unwrap();
    let h = assemble_hybrid(&bg, &state, &t).unwrap();
    assert_eq!(h.len(), 7 + t.len());
    let colors = h.colors().unwrap();
    assert!(colors[..7].iter().all(|c| *c == BACKGROUND_FILL_COLOR));
    assert!(colors[7..].iter().all(|c| *c == GRIPPER_MARKER_COLOR));
}

proptest! {
    #[test]
    fn template_is_mirror_symmetric(s in 0.0..=1.0f64) {
        let t = GripperTemplate::default();
        let pts = template_points(&t, s).unwrap();
        // `+ 0.0` folds -0.0 into 0.0 for points on the closing plane
        let key = |x: f64, y: f64, z: f64| [(x + 0.0).to_bits(), y.to_bits(), z.to_bits()];
        let mut original: Vec<[u64; 3]> = pts.points().iter().map(|p| key(p.x, p.y, p.z)).collect();
        let mut mirrored: Vec<[u64; 3]> = pts.points().iter().map(|p| key(-p.x, p.y, p.z)).collect();
        original.sort();
        mirrored.sort();
        prop_assert_eq!(original, mirrored);
        let d = (t.left_tip(s) - t.right_tip(s)).norm();
        prop_assert!((d - s * t.max_open).abs() < 1e-12);
    }

    #[test]
    fn equivariance_any_motion(
        axis in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
        angle in 0.01..3.1f64,
        shift in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
        s in 0.05..0.95f64,
    ) {
        let t = GripperTemplate::default();
        let axis = Vec3::new(axis.0, axis.1, axis.2);
        prop_assume!(axis.norm() > 1e-3);
        let g = RigidTransform::new(UnitQuaternion::from_scaled_axis(axis.normalize() * angle), Vec3::new(shift.0, shift.1, shift.2));
        let t0 = RigidTransform::new(UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1), Vec3::new(0.1, 0.0, 0.8));
        let hand = observe(&t, &t0, s);
        let moved = HandObservation::new(g.apply(&hand.thumb_tip), g.apply(&hand.index_tip), hand.wrist.map(|w| g.apply(&w))).unwrap();
        let a = fit_gripper_from_fingertips(&hand, &t).unwrap();
        let b = fit_gripper_from_fingertips(&moved, &t).unwrap();
        let expect = g.compose(&a.state.pose);
        prop_assert!(b.state.pose.translation_distance(&expect) < 1e-9);
        prop_assert!(b.state.pose.rotation_distance(&expect) < 1e-9);
        prop_assert!((a.state.opening - b.state.opening).abs() < 1e-9);
    }
}
