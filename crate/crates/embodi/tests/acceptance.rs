//! Acceptance checks. Each criterion prints one PASS/FAIL line; the target
//! exits nonzero if any of them fails. Runs without the libtest harness so
//! the lines always show in `cargo test` output.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use embodi::config::PipelineConfig;
use embodi::encoder_file;
use embodi::urdf::parse_chain;
use embodi_core::distill::{
    dino_loss_logits, ibot_loss, koleo_loss, total_loss, DistillBatch, DistillConfig, FeatureVector, PrototypeHead,
    StudentView,
};
use embodi_core::filter::{classify_robot_points, filter_human, filter_robot, DEFAULT_MARGIN};
use embodi_core::geometry::{unproject, CameraIntrinsics, RigidTransform, Vec3};
use embodi_core::gripper::{assemble_hybrid, fit_gripper_from_fingertips, GripperTemplate, HandObservation};
use embodi_core::kinematics::{forward_kinematics, JointState};
use embodi_core::scene::{sampling_pitch, SyntheticWorld};
use embodi_core::toy::{run_transitive, synthesize_pairs, ToyEncoder, TransitiveSeeds};
use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::{DMatrix, DVector, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde_json::Value;
use tempfile::TempDir;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn embodi(args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_embodi")).args(args).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("embodi {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(out)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let rot = UnitQuaternion::from_scaled_axis(axis.normalize() * rng.random_range(0.0..PI));
    let t = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.3..1.5));
    RigidTransform::new(rot, t)
}

const PLANAR_URDF: &str = r#"<robot name="planar">
  <link name="base"/><link name="l1"/><link name="l2"/><link name="tip"/>
  <joint name="j1" type="revolute"><parent link="base"/><child link="l1"/>
    <axis xyz="0 0 1"/><limit lower="-3.2" upper="3.2"/></joint>
  <joint name="j2" type="revolute"><parent link="l1"/><child link="l2"/>
    <origin xyz="0.45 0 0"/><axis xyz="0 0 1"/><limit lower="-3.2" upper="3.2"/></joint>
  <joint name="j3" type="fixed"><parent link="l2"/><child link="tip"/>
    <origin xyz="0.3 0 0"/></joint>
</robot>"#;

fn geometry_oracles() -> Check {
    let start = Instant::now();
    let intr = CameraIntrinsics::new(615.3, 611.9, 321.7, 238.2, 640, 480, 0.00025).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..20_000 {
        let (u, v, z) = (rng.random_range(0.0..640.0), rng.random_range(0.0..480.0), rng.random_range(1e-3..50.0));
        let (pu, pv) = intr.project(&intr.unproject_pixel(u, v, z));
        worst = worst.max((pu - u).abs()).max((pv - v).abs());
    }
    ensure(worst < 1e-6, || format!("round trip {worst} px"))?;

    let chain = parse_chain(PLANAR_URDF).map_err(|e| e.to_string())?;
    let mut fk_worst: f64 = 0.0;
    for _ in 0..10 {
        let q = [rng.random_range(-PI..PI), rng.random_range(-PI..PI)];
        let poses = forward_kinematics(&chain, &JointState::new().with("j1", q[0]).with("j2", q[1]))
            .map_err(|e| e.to_string())?;
        let x = 0.45 * q[0].cos() + 0.3 * (q[0] + q[1]).cos();
        let y = 0.45 * q[0].sin() + 0.3 * (q[0] + q[1]).sin();
        fk_worst = fk_worst.max((poses["tip"].translation() - Vec3::new(x, y, 0.0)).norm());
    }
    ensure(fk_worst < 1e-9, || format!("planar FK error {fk_worst} m"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("round trip {worst:.1e} px, FK {fk_worst:.1e} m, {:.2} s", elapsed.as_secs_f64()))
}

fn observe(t: &GripperTemplate, pose: &RigidTransform, s: f64) -> HandObservation {
    HandObservation::new(pose.apply(&t.left_tip(s)), pose.apply(&t.right_tip(s)), Some(pose.apply(&t.approach_anchor())))
        .unwrap()
}

fn pose_fit() -> Check {
    let t = GripperTemplate::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let fit = |h: &HandObservation| fit_gripper_from_fingertips(h, &t).map_err(|e| e.to_string());
    let mut clean_worst: f64 = 0.0;
    for _ in 0..50 {
        let t0 = random_transform(&mut rng);
        let s0 = rng.random_range(0.05..0.95);
        let f = fit(&observe(&t, &t0, s0))?;
        clean_worst = clean_worst
            .max(f.state.pose.translation_distance(&t0))
            .max(f.state.pose.rotation_distance(&t0))
            .max((f.state.opening - s0).abs());
    }
    ensure(clean_worst < 1e-9, || format!("noise-free error {clean_worst}"))?;

    let noise = Normal::new(0.0, 0.001).unwrap();
    let mut total = 0.0;
    for _ in 0..100 {
        let t0 = random_transform(&mut rng);
        let c = observe(&t, &t0, 0.6);
        let mut j = || Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        let h = HandObservation::new(c.thumb_tip + j(), c.index_tip + j(), c.wrist).unwrap();
        total += fit(&h)?.state.pose.translation_distance(&t0);
    }
    let mean_mm = total / 100.0 * 1000.0;
    ensure(mean_mm < 2.0, || format!("mean noisy error {mean_mm} mm"))?;

    let base = fit(&observe(&t, &random_transform(&mut rng), 0.4))?;
    let h = observe(&t, &base.state.pose, 0.4);
    let mut eq_worst: f64 = 0.0;
    for _ in 0..50 {
        let g = random_transform(&mut rng);
        let moved = HandObservation::new(g.apply(&h.thumb_tip), g.apply(&h.index_tip), h.wrist.map(|w| g.apply(&w))).unwrap();
        let f = fit(&moved)?;
        let expect = g.compose(&base.state.pose);
        eq_worst = eq_worst.max(f.state.pose.translation_distance(&expect)).max(f.state.pose.rotation_distance(&expect));
    }
    ensure(eq_worst < 1e-9, || format!("equivariance error {eq_worst}"))?;
    Ok(format!("noise-free {clean_worst:.1e}, 1 mm noise mean {mean_mm:.3} mm, equivariance {eq_worst:.1e}"))
}

fn sorted_bits(points: impl Iterator<Item = Vec3>) -> Vec<[u64; 3]> {
    let mut v: Vec<[u64; 3]> = points.map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
    v.sort();
    v
}

fn filter_soundness() -> Check {
    let world = SyntheticWorld::desk();
    let intr = &world.intrinsics;
    let pixel = |u: usize, v: usize, raw: u16| {
        let z = intr.depth_scale * raw as f64;
        Vec3::new((u as f64 - intr.cx) * z / intr.fx, (v as f64 - intr.cy) * z / intr.fy, z)
    };
    let mut removed_total = 0;
    for k in 0..10 {
        let robot = world.render_robot(k).map_err(|e| e.to_string())?;
        let cloud = unproject(&robot.depth, intr, None).map_err(|e| e.to_string())?;
        let (kept, report) = filter_robot(&cloud, &world.chain, &world.occupancy, &robot.joints, DEFAULT_MARGIN)
            .map_err(|e| e.to_string())?;
        let mut expect = Vec::new();
        for v in 0..robot.depth.height() {
            for u in 0..robot.depth.width() {
                let raw = robot.depth.get(u, v);
                if raw != 0 && !robot.arm_pixels.get(u, v) {
                    expect.push(pixel(u, v, raw));
                }
            }
        }
        ensure(kept.points() == &expect[..], || format!("robot frame {k}: kept set differs from labels"))?;
        ensure(report.removed == robot.arm_pixels.count(), || format!("robot frame {k}: removed count"))?;
        removed_total += report.removed;

        let human = world.render_human(k).map_err(|e| e.to_string())?;
        let (bg, _) = filter_human(&human.depth, intr, &human.mask).map_err(|e| e.to_string())?;
        let mut oracle = Vec::new();
        for v in 0..human.depth.height() {
            for u in 0..human.depth.width() {
                let raw = human.depth.get(u, v);
                if raw != 0 && !human.mask.0.get(u, v) {
                    oracle.push(pixel(u, v, raw));
                }
            }
        }
        ensure(sorted_bits(bg.points().iter().copied()) == sorted_bits(oracle.into_iter()), || {
            format!("human frame {k}: not the pixel complement")
        })?;
    }

    let robot = world.render_robot(5).map_err(|e| e.to_string())?;
    let cloud = unproject(&robot.depth, intr, None).map_err(|e| e.to_string())?;
    let mut last: Option<Vec<bool>> = None;
    let mut kept_counts = Vec::new();
    for m in [0.0, 0.005, 0.01, 0.05, 0.1] {
        let labels = classify_robot_points(&cloud, &world.chain, &world.occupancy, &robot.joints, m)
            .map_err(|e| e.to_string())?;
        if let Some(prev) = &last {
            ensure(prev.iter().zip(&labels).all(|(a, b)| !a || *b), || format!("margin {m} un-removes a point"))?;
        }
        kept_counts.push(labels.iter().filter(|r| !**r).count());
        last = Some(labels);
    }
    Ok(format!("10 robot + 10 human frames exact ({removed_total} arm points), kept over margins {kept_counts:?}"))
}

fn chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    let one_way = |from: &[Vec3], to: &[Vec3]| {
        let pts: Vec<[f64; 3]> = to.iter().map(|p| [p.x, p.y, p.z]).collect();
        let tree = ImmutableKdTree::new_from_slice(&pts);
        from.iter().map(|p| tree.nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z]).distance.sqrt()).sum::<f64>()
            / from.len() as f64
    };
    one_way(a, b) + one_way(b, a)
}

fn hybrid_equivalence() -> Check {
    let world = SyntheticWorld::desk();
    let t = &world.template;
    let mut worst_ratio: f64 = 0.0;
    for k in 0..10 {
        let human = world.render_human(k).map_err(|e| e.to_string())?;
        let (bg_h, _) = filter_human(&human.depth, &world.intrinsics, &human.mask).map_err(|e| e.to_string())?;
        let fit = fit_gripper_from_fingertips(&human.hand, t).map_err(|e| e.to_string())?;
        let hyb_h = assemble_hybrid(&bg_h, &fit.state, t).map_err(|e| e.to_string())?;

        let robot = world.render_robot(k).map_err(|e| e.to_string())?;
        let cloud = unproject(&robot.depth, &world.intrinsics, None).map_err(|e| e.to_string())?;
        let (bg_r, _) = filter_robot(&cloud, &world.chain, &world.occupancy, &robot.joints, DEFAULT_MARGIN)
            .map_err(|e| e.to_string())?;
        let hyb_r = assemble_hybrid(&bg_r, &robot.gripper, t).map_err(|e| e.to_string())?;

        let pitch = sampling_pitch(bg_r.points(), &world.intrinsics);
        let d = chamfer(hyb_h.points(), hyb_r.points());
        worst_ratio = worst_ratio.max(d / pitch);
        ensure(d < 2.0 * pitch, || format!("frame {k}: chamfer {d} >= 2 x pitch {pitch}"))?;

        let same = assemble_hybrid(&bg_h, &robot.gripper, t).map_err(|e| e.to_string())?;
        let gh = &same.points()[bg_h.len()..];
        let gr = &hyb_r.points()[bg_r.len()..];
        ensure(sorted_bits(gh.iter().copied()) == sorted_bits(gr.iter().copied()) && gh == gr, || {
            format!("frame {k}: gripper subsets differ")
        })?;
    }
    Ok(format!("worst chamfer {worst_ratio:.3} x pitch over 10 frames, gripper subsets bit-identical"))
}

fn central_diff(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-5;
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let o = p[i];
            p[i] = o + h;
            let up = f(&p);
            p[i] = o - h;
            let down = f(&p);
            p[i] = o;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    n(&d) / n(a).max(n(b)).max(1e-12)
}

fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn vec_of(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    gauss(rng, n, 1).column(0).into_owned()
}

fn nn_margin(x: &DMatrix<f64>) -> f64 {
    let rows: Vec<DVector<f64>> = x.row_iter().map(|r| r.transpose().normalize()).collect();
    (0..rows.len())
        .map(|i| {
            let mut d: Vec<f64> = (0..rows.len()).filter(|&j| j != i).map(|j| (&rows[i] - &rows[j]).norm()).collect();
            d.sort_by(f64::total_cmp);
            d[1] - d[0]
        })
        .fold(f64::INFINITY, f64::min)
}

fn batch(rng: &mut ChaCha8Rng, head_dim: usize, locals: usize, globals: usize) -> DistillBatch {
    let fv = |rng: &mut ChaCha8Rng| FeatureVector::new(vec_of(rng, head_dim)).unwrap();
    let mut views = Vec::new();
    for i in 0..globals + locals {
        views.push(StudentView { features: fv(rng), is_local_crop: i >= globals, target: i % 2 });
    }
    DistillBatch {
        teacher_global: vec![fv(rng), fv(rng)],
        student_views: views,
        teacher_patches: gauss(rng, 6, head_dim),
        student_patch_preds: gauss(rng, 6, head_dim),
        patch_mask: vec![true, false, true, true, false, false],
        student_batch_embeddings: gauss(rng, 5, head_dim),
    }
}

fn loss_gradients() -> Check {
    let cfg = DistillConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = [0.0f64; 4];
    let (d, k) = (8, 24);

    for _ in 0..20 {
        let (t, c, sl) = (vec_of(&mut rng, k), vec_of(&mut rng, k) * 0.2, vec_of(&mut rng, k));
        let an = dino_loss_logits(&t, &c, &sl, &cfg).map_err(|e| e.to_string())?;
        let fd = central_diff(sl.as_slice(), |x| {
            dino_loss_logits(&t, &c, &DVector::from_column_slice(x), &cfg).unwrap().loss
        });
        worst[0] = worst[0].max(rel_err(an.grad_logits.as_slice(), &fd));
    }
    for _ in 0..20 {
        let head = PrototypeHead::random(k, d, 0.9, rng.random()).map_err(|e| e.to_string())?;
        let (tp, sp) = (gauss(&mut rng, 6, d), gauss(&mut rng, 6, d));
        let mask = [true, false, true, false, false, true];
        let an = ibot_loss(&head, &tp, &sp, &mask, &cfg).map_err(|e| e.to_string())?;
        let grad = &an.grad_logits * &head.weights;
        let fd = central_diff(sp.as_slice(), |x| {
            ibot_loss(&head, &tp, &DMatrix::from_column_slice(6, d, x), &mask, &cfg).unwrap().loss
        });
        worst[1] = worst[1].max(rel_err(grad.as_slice(), &fd));
    }
    let mut n = 0;
    while n < 20 {
        let x = gauss(&mut rng, 7, 5);
        if nn_margin(&x) < 1e-3 {
            continue; // neighbor ties make the loss non-differentiable
        }
        let (_, g) = koleo_loss(&x, cfg.koleo_epsilon).map_err(|e| e.to_string())?;
        let fd = central_diff(x.as_slice(), |v| koleo_loss(&DMatrix::from_column_slice(7, 5, v), 1e-8).unwrap().0);
        worst[2] = worst[2].max(rel_err(g.as_slice(), &fd));
        n += 1;
    }
    let mut n = 0;
    while n < 20 {
        let head = PrototypeHead::random(k, d, 0.9, rng.random()).map_err(|e| e.to_string())?;
        let b = batch(&mut rng, d, 2, 2);
        if nn_margin(&b.student_batch_embeddings) < 1e-3 {
            continue;
        }
        let out = total_loss(&b, &head, &cfg).map_err(|e| e.to_string())?;
        let eval = |b: &DistillBatch| total_loss(b, &head, &cfg).unwrap().total;
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for (v, g) in out.grad_student_views.iter().enumerate() {
            analytic.extend_from_slice(g.as_slice());
            numeric.extend(central_diff(b.student_views[v].features.as_slice(), |x| {
                let mut c = b.clone();
                c.student_views[v].features = FeatureVector::from_slice(x).unwrap();
                eval(&c)
            }));
        }
        analytic.extend_from_slice(out.grad_patch_preds.as_slice());
        numeric.extend(central_diff(b.student_patch_preds.as_slice(), |x| {
            let mut c = b.clone();
            c.student_patch_preds = DMatrix::from_column_slice(6, d, x);
            eval(&c)
        }));
        analytic.extend_from_slice(out.grad_batch_embeddings.as_slice());
        numeric.extend(central_diff(b.student_batch_embeddings.as_slice(), |x| {
            let mut c = b.clone();
            c.student_batch_embeddings = DMatrix::from_column_slice(5, d, x);
            eval(&c)
        }));
        worst[3] = worst[3].max(rel_err(&analytic, &numeric));
        n += 1;
    }
    for (name, w) in ["dino", "ibot", "koleo", "total"].iter().zip(worst) {
        ensure(w < 1e-4, || format!("{name} gradient relative error {w}"))?;
    }

    let head = PrototypeHead::random(k, d, 0.9, 9).map_err(|e| e.to_string())?;
    let local_only = batch(&mut rng, d, 3, 0);
    let out = total_loss(&local_only, &head, &cfg).map_err(|e| e.to_string())?;
    ensure(
        out.ibot == 0.0
            && out.koleo == 0.0
            && out.total == out.dino
            && out.grad_patch_preds.iter().all(|g| *g == 0.0)
            && out.grad_batch_embeddings.iter().all(|g| *g == 0.0),
        || "local-only batch leaks iBOT or KoLeo".into(),
    )?;

    ensure(cfg.lambda == 0.1, || format!("default lambda {}", cfg.lambda))?;
    let mixed = batch(&mut rng, d, 2, 2);
    let out = total_loss(&mixed, &head, &cfg).map_err(|e| e.to_string())?;
    let koleo = koleo_loss(&mixed.student_batch_embeddings, cfg.koleo_epsilon).map_err(|e| e.to_string())?.0;
    let ibot = ibot_loss(&head, &mixed.teacher_patches, &mixed.student_patch_preds, &mixed.patch_mask, &cfg)
        .map_err(|e| e.to_string())?
        .loss;
    ensure((out.total - (out.dino + ibot + 0.1 * koleo)).abs() < 1e-12, || "composition identity".into())?;
    Ok(format!(
        "worst relative errors dino {:.1e}, ibot {:.1e}, koleo {:.1e}, total {:.1e}; gating exact; lambda 0.1",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn curves_ordering(run: &Path, elapsed: Duration) -> Check {
    ensure(elapsed < Duration::from_secs(300), || format!("distill took {elapsed:?}"))?;
    let summary: Value = serde_json::from_str(&fs::read_to_string(run.join("summary.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let rows = summary["curves"].as_array().ok_or("summary has no curves")?;
    ensure(!rows.is_empty(), || "empty curves".into())?;
    let mut min_lead = f64::INFINITY;
    for r in rows {
        let get = |k: &str| r[k].as_f64().unwrap();
        let (blue, green, purple) =
            (get("in_sequence_mean"), get("cross_domain_aligned_mean"), get("cross_domain_unaligned_mean"));
        let frame = r["frame"].as_u64().unwrap();
        ensure(green > purple, || format!("frame {frame}: green {green} <= purple {purple}"))?;
        ensure((blue - green).abs() < (blue - purple).abs(), || {
            format!("frame {frame}: green gap {} >= purple gap {}", (blue - green).abs(), (blue - purple).abs())
        })?;
        min_lead = min_lead.min(green - purple);
    }
    Ok(format!("{} frames, min green-purple lead {min_lead:.4}, run {:.1} s", rows.len(), elapsed.as_secs_f64()))
}

fn frozen_teacher_chain(run: &Path) -> Check {
    let cfg = PipelineConfig::default();
    let tc = cfg.transitive().map_err(|e| e.to_string())?;
    let seed = cfg.seed;
    let data = synthesize_pairs(seed, cfg.data.train_sequences, cfg.data.frames_per_sequence, &cfg.data.synth())
        .map_err(|e| e.to_string())?;
    let out = run_transitive(&data.stage1, &data.stage2, &tc, TransitiveSeeds::from_base(seed))
        .map_err(|e| e.to_string())?;

    let bits = |p: &[f64]| p.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
    let mut fresh = ToyEncoder::init(tc.dims, seed).map_err(|e| e.to_string())?;
    let inputs: Vec<Vec<f64>> = data.stage1.iter().map(|p| p.first.to_input()).collect();
    fresh.center_outputs(&inputs).map_err(|e| e.to_string())?;
    ensure(bits(out.human.params()) == bits(fresh.params()), || "human teacher moved".into())?;
    ensure(bits(&out.stage1.initial_params) == bits(out.human.params()), || "stage-1 student not initialized from teacher".into())?;
    ensure(bits(out.pseudo.params()) == bits(&out.stage1.final_params), || "pseudo encoder is not the stage-1 result".into())?;
    ensure(bits(&out.stage2.initial_params) == bits(&out.stage1.final_params), || "stage-2 student not initialized from stage-1 result".into())?;
    ensure(bits(out.robot.params()) == bits(&out.stage2.final_params), || "robot encoder is not the stage-2 result".into())?;
    ensure(out.stage1.final_params != out.stage1.initial_params, || "stage 1 did not train".into())?;

    for (file, enc) in [("E_H.enc", &out.human), ("E_P.enc", &out.pseudo), ("E_R.enc", &out.robot)] {
        let saved = encoder_file::load(&run.join(file)).map_err(|e| e.to_string())?;
        ensure(bits(saved.encoder.params()) == bits(enc.params()), || format!("{file} differs from the in-process run"))?;
    }
    Ok(format!("teacher checksum {:016x}, chain bitwise, saved encoders match", out.human.checksum()))
}

/// Relative path and bytes of every file under a directory, sorted.
type Tree = Vec<(PathBuf, Vec<u8>)>;

fn tree(dir: &Path) -> Tree {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism(tmp: &Path, runs: [&Path; 2]) -> Check {
    let mut checked = vec!["distill".to_string()];
    ensure(tree(runs[0]) == tree(runs[1]), || "distill outputs differ".into())?;

    let twice = |name: &str, args: &dyn Fn(&Path) -> Vec<String>| -> Result<(), String> {
        let outs: Vec<(Vec<u8>, Tree)> = ["a", "b"]
            .iter()
            .map(|tag| {
                let dir = tmp.join(format!("{name}-{tag}"));
                let a = args(&dir);
                let refs: Vec<&str> = a.iter().map(String::as_str).collect();
                let out = embodi(&refs)?;
                Ok((out.stdout, if dir.exists() { tree(&dir) } else { Vec::new() }))
            })
            .collect::<Result<_, String>>()?;
        ensure(outs[0] == outs[1], || format!("{name} differs between runs"))
    };
    let st = |p: &Path| p.to_str().unwrap().to_string();

    twice("synth-scenes", &|d| vec!["synth-data".into(), "--output".into(), st(d), "--frames".into(), "4".into()])?;
    twice("synth-pairs", &|d| {
        ["synth-data", "--kind", "pairs", "--seed", "7", "--output"].iter().map(|x| x.to_string()).chain([st(d)]).collect()
    })?;
    checked.push("synth-data".into());

    let scenes = tmp.join("synth-scenes-a");
    let config = st(&scenes.join("config.toml"));
    for (cmd, sub) in [("align-human", "human"), ("align-robot", "robot")] {
        twice(cmd, &|d| {
            vec![cmd.into(), "--input".into(), st(&scenes.join(sub)), "--output".into(), st(d), "--config".into(), config.clone()]
        })?;
        checked.push(cmd.into());
    }
    twice("analyze", &|d| vec!["analyze".into(), "--input".into(), st(runs[0]), "--output".into(), st(d)])?;
    checked.push("analyze".into());
    twice("config", &|_| vec!["config".into(), "--print-defaults".into()])?;
    twice("config-check", &|_| vec!["config".into(), "--config".into(), config.clone()])?;
    checked.push("config".into());
    Ok(format!("byte-identical: {}", checked.join(", ")))
}

fn main() {
    let tmp = TempDir::new().unwrap();
    let run_a = tmp.path().join("distill-a");
    let run_b = tmp.path().join("distill-b");
    let start = Instant::now();
    let first = embodi(&["distill", "--output", s(&run_a)]);
    let elapsed = start.elapsed();
    let second = first.as_ref().map_err(Clone::clone).and_then(|_| embodi(&["distill", "--output", s(&run_b)]));

    let results: Vec<(&str, Check)> = vec![
        ("1 geometry oracles", geometry_oracles()),
        ("2 pose-fit recovery", pose_fit()),
        ("3 filter soundness and completeness", filter_soundness()),
        ("4 hybrid equivalence", hybrid_equivalence()),
        ("5 loss gradients", loss_gradients()),
        ("6 transitive alignment ordering", first.clone().and_then(|_| curves_ordering(&run_a, elapsed))),
        ("7 frozen teacher and init chain", first.clone().and_then(|_| frozen_teacher_chain(&run_a))),
        ("8 determinism", second.and_then(|_| determinism(tmp.path(), [&run_a, &run_b]))),
    ];
    let mut failed = Vec::new();
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                println!("criterion {name}: FAIL ({why})");
                failed.push(*name);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
