//! Embodiment filtering on labeled synthetic data.

use embodi_core::filter::{classify_robot_points, filter_human, filter_robot, SegmentationMask, DEFAULT_MARGIN};
use embodi_core::geometry::{unproject, BoolImage, CameraIntrinsics, DepthImage, PointCloud, Vec3};
use embodi_core::kinematics::{forward_kinematics, point_in_occupancy, Shape};
use embodi_core::scene::SyntheticWorld;
use proptest::prelude::*;

/// Per-pixel scalar unprojection of every valid pixel where `keep(u, v)`.
fn pixel_oracle(depth: &DepthImage, intr: &CameraIntrinsics, keep: impl Fn(usize, usize) -> bool) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            let raw = depth.get(u, v);
            if raw == 0 || !keep(u, v) {
                continue;
            }
            let z = intr.depth_scale * raw as f64;
            out.push([(u as f64 - intr.cx) * z / intr.fx, (v as f64 - intr.cy) * z / intr.fy, z]);
        }
    }
    out
}

fn sorted(points: impl IntoIterator<Item = [f64; 3]>) -> Vec<[f64; 3]> {
    let mut v: Vec<[f64; 3]> = points.into_iter().collect();
    v.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    v
}

fn arrays(cloud: &PointCloud) -> Vec<[f64; 3]> {
    cloud.points().iter().map(|p| [p.x, p.y, p.z]).collect()
}

#[test]
fn human_filter_equals_pixel_complement() {
    let world = SyntheticWorld::desk();
    for k in 0..10 {
        let frame = world.render_human(k).unwrap();
        let (kept, report) = filter_human(&frame.depth, &world.intrinsics, &frame.mask).unwrap();
        let oracle = pixel_oracle(&frame.depth, &world.intrinsics, |u, v| !frame.mask.0.get(u, v));
        assert_eq!(sorted(arrays(&kept)), sorted(oracle.clone()));
        assert_eq!(report.kept, oracle.len());
        assert_eq!(report.removed + report.kept, report.total);
        assert_eq!(report.total, frame.depth.valid_count());
    }
}

#[test]
fn rectangular_hand_mask_on_background() {
    let world = SyntheticWorld::desk();
    let bg = world.render_background();
    let (w, h) = (bg.depth.width(), bg.depth.height());
    let rect = |u: usize, v: usize| (40..70).contains(&u) && (30..55).contains(&v);
    let mask = BoolImage::new(w, h, (0..w * h).map(|i| rect(i % w, i / w)).collect()).unwrap();
    let (kept, report) = filter_human(&bg.depth, &world.intrinsics, &SegmentationMask(mask)).unwrap();
    let oracle = pixel_oracle(&bg.depth, &world.intrinsics, |u, v| !rect(u, v));
    assert_eq!(arrays(&kept), oracle);
    assert_eq!(report.removed, 30 * 25);

    let none = SegmentationMask(BoolImage::filled(w, h, false));
    let all = SegmentationMask(BoolImage::filled(w, h, true));
    let plain = unproject(&bg.depth, &world.intrinsics, None).unwrap();
    assert_eq!(filter_human(&bg.depth, &world.intrinsics, &none).unwrap().0, plain);
    let (empty, report) = filter_human(&bg.depth, &world.intrinsics, &all).unwrap();
    assert!(empty.is_empty());
    assert_eq!(report.removed, bg.depth.valid_count());
}

#[test]
fn robot_filter_removes_exactly_rendered_arm() {
    let world = SyntheticWorld::desk();
    for k in 0..10 {
        let frame = world.render_robot(k).unwrap();
        let cloud = unproject(&frame.depth, &world.intrinsics, None).unwrap();
        let (kept, report) =
            filter_robot(&cloud, &world.chain, &world.occupancy, &frame.joints, DEFAULT_MARGIN).unwrap();
        let scene = pixel_oracle(&frame.depth, &world.intrinsics, |u, v| !frame.arm_pixels.get(u, v));
        assert_eq!(arrays(&kept), scene, "frame {k}");
        assert_eq!(report.removed, frame.arm_pixels.count(), "frame {k}");
    }
}

/// Surface samples of a primitive in its local frame.
fn shell(shape: &Shape) -> Vec<Vec3> {
    let sphere = |r: f64, n: usize| -> Vec<Vec3> {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let rho = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                Vec3::new(rho * a.cos(), rho * a.sin(), z) * r
            })
            .collect()
    };
    match *shape {
        Shape::Sphere { radius } => sphere(radius, 200),
        Shape::Capsule { radius, length } => sphere(radius, 200)
            .into_iter()
            .map(|p| p + Vec3::new(0.0, 0.0, p.z.signum() * 0.5 * length))
            .chain((0..200).map(|i| {
                let a = i as f64 * 0.7;
                Vec3::new(radius * a.cos(), radius * a.sin(), length * ((i as f64 / 199.0) - 0.5))
            }))
            .collect(),
        Shape::Box { size } => {
            let mut out = Vec::new();
            for i in 0..10 {
                for j in 0..10 {
                    let a = i as f64 / 9.0 - 0.5;
                    let b = j as f64 / 9.0 - 0.5;
                    for s in [-0.5, 0.5] {
                        out.push(Vec3::new(s * size[0], a * size[1], b * size[2]));
                        out.push(Vec3::new(a * size[0], s * size[1], b * size[2]));
                        out.push(Vec3::new(a * size[0], b * size[1], s * size[2]));
                    }
                }
            }
            out
        }
    }
}

#[test]
fn painted_link_surfaces_are_removed_and_backdrop_kept() {
    let world = SyntheticWorld::desk();
    for k in [0, 3, 7] {
        let q = world.joint_state(k);
        let poses = forward_kinematics(&world.chain, &q).unwrap();
        let mut labeled: Vec<(Vec3, bool)> = Vec::new();
        for (link, prims) in world.occupancy.links() {
            for prim in prims {
                let pose = poses[link].compose(&prim.local_pose);
                labeled.extend(shell(&prim.shape).iter().map(|p| (pose.apply(p), true)));
            }
        }
        // A fronto-parallel backdrop 0.1 m behind the farthest arm sample.
        let far = labeled.iter().map(|(p, _)| p.z).fold(f64::MIN, f64::max) + 0.1;
        for i in 0..60 {
            for j in 0..40 {
                labeled.push((Vec3::new(-0.6 + 0.02 * i as f64, -0.4 + 0.02 * j as f64, far), false));
            }
        }
        // interleave so order preservation is exercised
        labeled.sort_by(|a, b| a.0.x.total_cmp(&b.0.x));
        let cloud = PointCloud::new(labeled.iter().map(|(p, _)| *p).collect()).unwrap();
        let (kept, report) = filter_robot(&cloud, &world.chain, &world.occupancy, &q, DEFAULT_MARGIN).unwrap();
        let expect: Vec<Vec3> = labeled.iter().filter(|(_, arm)| !arm).map(|(p, _)| *p).collect();
        assert_eq!(kept.points(), &expect[..]);
        assert_eq!(report.removed, labeled.iter().filter(|(_, arm)| *arm).count());
        for (p, _) in &labeled {
            let inside = point_in_occupancy(&world.occupancy, &poses, p, DEFAULT_MARGIN).unwrap();
            assert_eq!(inside, !kept.points().contains(p));
        }
    }
}

#[test]
fn trivial_robot_cases() {
    let world = SyntheticWorld::desk();
    let q = world.joint_state(0);
    let (kept, r) = filter_robot(&PointCloud::empty(), &world.chain, &world.occupancy, &q, 0.01).unwrap();
    assert!(kept.is_empty());
    assert_eq!((r.total, r.removed, r.kept), (0, 0, 0));
    let poses = forward_kinematics(&world.chain, &q).unwrap();
    let c = *poses["base"].translation();
    let blob = PointCloud::new((0..20).map(|i| c + Vec3::new(0.001 * i as f64, 0.0, 0.0)).collect()).unwrap();
    assert!(filter_robot(&blob, &world.chain, &world.occupancy, &q, 0.0).unwrap().0.is_empty());
}

#[test]
fn five_margin_sweep_is_nested() {
    let world = SyntheticWorld::desk();
    let frame = world.render_robot(4).unwrap();
    let cloud = unproject(&frame.depth, &world.intrinsics, None).unwrap();
    let margins = [0.0, 0.005, 0.01, 0.05, 0.1];
    let labels: Vec<Vec<bool>> = margins
        .iter()
        .map(|&m| classify_robot_points(&cloud, &world.chain, &world.occupancy, &frame.joints, m).unwrap())
        .collect();
    for w in labels.windows(2) {
        // removed at the smaller margin implies removed at the larger one
        assert!(w[0].iter().zip(&w[1]).all(|(small, large)| !small || *large));
    }
    let kept: Vec<usize> = labels.iter().map(|l| l.iter().filter(|r| !**r).count()).collect();
    assert!(kept.windows(2).all(|w| w[1] <= w[0]), "{kept:?}");
    assert!(kept[0] > kept[4]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn removed_plus_kept_is_total(k in 0usize..12, m in 0.0..0.08f64) {
        let world = SyntheticWorld::desk();
        let frame = world.render_robot(k).unwrap();
        let cloud = unproject(&frame.depth, &world.intrinsics, None).unwrap();
        let (kept, r) = filter_robot(&cloud, &world.chain, &world.occupancy, &frame.joints, m).unwrap();
        prop_assert_eq!(r.removed + r.kept, r.total);
        prop_assert_eq!(kept.len(), r.kept);
        prop_assert_eq!(r.margin, m);
    }
}
