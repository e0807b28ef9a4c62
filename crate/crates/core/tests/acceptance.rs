//! One line per criterion; exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use decoupled_hands::geom::{
    alignment_target, animation_delta, azimuth, solve_yaw_calibration, AnchorPair, Angle, Pivot, Pose, RotationOffset, Vec3,
};
use decoupled_hands::harness::{analyze, run_scenario_file, MetricsEvent};
use decoupled_hands::scene::{occluded, Scene, SceneObject};
use decoupled_hands::session::{AlignOutcome, Session, SessionConfig, Snapshot, UserId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Oracle helpers, written from the definitions rather than the library.

fn yaw_about(p: Vec3, pivot: Vec3, theta: f64) -> Vec3 {
    let (s, c) = theta.sin_cos();
    let (dx, dz) = (p.x - pivot.x, p.z - pivot.z);
    Vec3::new(pivot.x + dx * c + dz * s, p.y, pivot.z - dx * s + dz * c)
}

fn bearing(p: Vec3, pivot: Vec3) -> f64 {
    (p.x - pivot.x).atan2(p.z - pivot.z)
}

fn wrapped_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r))
}

/// Session with one user per entry of `users` (head, hand, rho), restored
/// from a doctored snapshot so offsets can be arbitrary.
fn session_with(pivot: Vec3, users: &[(Vec3, Vec3, f64)], decoupling: bool) -> Session {
    let marker = SceneObject::new_sphere("marker", pivot + Vec3::new(0.0, -0.5, 0.0), 0.1);
    let scene = Scene::new("acceptance", Some(pivot), vec![marker]).unwrap();
    let config = SessionConfig { decoupling_enabled: decoupling, ..SessionConfig::default() };
    let mut s = Session::new(scene.clone(), config.clone()).unwrap();
    for i in 0..users.len() {
        s.join(&format!("u{i}")).unwrap();
    }
    let mut snap: Snapshot = s.snapshot();
    for (u, &(head, hand, rho)) in snap.users.iter_mut().zip(users) {
        u.head = Pose::at(head);
        u.left_hand = Pose::at(hand);
        u.right_hand = Pose::at(hand);
        u.rho = RotationOffset(rho);
    }
    Session::restore(scene, config, &snap).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn worked_example() -> Outcome {
    let pivot = Vec3::new(0.0, 0.75, 0.0);
    let on_ring = |deg: f64| {
        let a = deg.to_radians();
        Vec3::new(1.5 * a.sin(), 1.6, 1.5 * a.cos())
    };
    let (leader, follower) = (on_ring(0.0), on_ring(100.0));
    let target = alignment_target(
        azimuth(follower, Pivot::new(pivot)).unwrap(),
        azimuth(leader, Pivot::new(pivot)).unwrap(),
        RotationOffset::ZERO,
    );
    let want = bearing(follower, pivot) - bearing(leader, pivot);
    let target_ok = (target.radians() - want).abs() <= 1e-9 && (want - 100f64.to_radians()).abs() <= 1e-12;

    let hand = Vec3::new(0.1, 0.9, 0.6);
    let mut s = session_with(pivot, &[(leader, hand, 0.0), (follower, hand, 0.0)], true);
    let (l, f) = (UserId(1), UserId(2));
    let dir = (leader - follower).normalized().unwrap();
    let end = match s.request_alignment(f, follower, dir).unwrap() {
        AlignOutcome::Started(st) => st.t0 + st.duration,
        AlignOutcome::Completed { .. } => return check(false, "alignment completed instantly"),
    };
    s.tick(end + 1e-6).unwrap();
    let rho_f = s.user(f).unwrap().rho.radians();
    let seen_by_f = s.render_frame(f).unwrap().remote(l).unwrap().right_hand.position;
    let seen_by_l = s.render_frame(l).unwrap().remote(f).unwrap().right_hand.position;
    let off_f = bearing(seen_by_f, pivot) - bearing(hand, pivot);
    let off_l = bearing(seen_by_l, pivot) - bearing(hand, pivot);
    let e = 100f64.to_radians();
    let pass = target_ok
        && wrapped_diff(rho_f, e) <= 1e-9
        && wrapped_diff(off_f, e) <= 1e-9
        && wrapped_diff(off_l, -e) <= 1e-9
        && seen_by_f.distance(yaw_about(hand, pivot, e)) <= 1e-9;
    check(
        pass,
        format!(
            "target {:.9}°, follower hand copy {:+.9}°, leader hand copy {:+.9}°",
            target.radians().to_degrees(),
            off_f.to_degrees(),
            Angle::new(off_l).degrees()
        ),
    )
}

fn canonical_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let pivot = random_point(&mut rng, 3.0);
        let rho_o = rng.gen_range(-4.0 * PI..4.0 * PI);
        let rho_v = rng.gen_range(-4.0 * PI..4.0 * PI);
        let hand = pivot + random_point(&mut rng, 1.5);
        let s = session_with(
            pivot,
            &[(pivot + Vec3::new(0.0, 1.0, 1.5), hand, rho_o), (pivot + Vec3::new(1.5, 1.0, 0.0), hand, rho_v)],
            true,
        );
        let intended = yaw_about(hand, pivot, -rho_o);
        let seen = s.render_frame(UserId(2)).unwrap().remote(UserId(1)).unwrap().right_hand.position;
        let recovered = yaw_about(seen, pivot, -rho_v);
        worst = worst.max(recovered.distance(intended));
    }
    check(worst <= 1e-9, format!("10000 cases, worst {worst:.3e} m"))
}

fn shortest_path_grid() -> Outcome {
    let mut worst = 0.0f64;
    let mut bad = 0;
    for a in 0i32..360 {
        for b in 0..360 {
            let d = animation_delta(RotationOffset::from_degrees(a as f64), RotationOffset::from_degrees(b as f64));
            let mut want = (b - a).rem_euclid(360) as f64;
            if want > 180.0 {
                want -= 360.0;
            }
            let err = (d.degrees() - want).abs();
            worst = worst.max(err);
            if d.degrees().abs() > 180.0 + 1e-9 || err.to_radians() > 1e-9 {
                bad += 1;
            }
        }
    }
    let tie = animation_delta(RotationOffset::from_degrees(10.0), RotationOffset::from_degrees(190.0)).degrees();
    let example = animation_delta(RotationOffset::from_degrees(0.0), RotationOffset::from_degrees(350.0)).degrees();
    let pass = bad == 0 && (tie - 180.0).abs() < 1e-9 && (example + 10.0).abs() < 1e-9;
    check(pass, format!("129600 pairs, {bad} off, tie {tie:+.6}°, (0°, 350°) {example:+.6}°"))
}

fn calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut noiseless_worst = 0.0f64;
    for _ in 0..1000 {
        let yaw = rng.gen_range(-PI..PI);
        let t = random_point(&mut rng, 3.0);
        let n = rng.gen_range(2..12);
        let pairs: Vec<AnchorPair> = (0..n)
            .map(|_| {
                let l = random_point(&mut rng, 2.0);
                AnchorPair::new(l, yaw_about(l, Vec3::ZERO, yaw) + t)
            })
            .collect();
        let xf = solve_yaw_calibration(&pairs).unwrap();
        noiseless_worst = noiseless_worst.max(wrapped_diff(xf.yaw(), yaw)).max(xf.translation.max_abs_diff(t));
    }

    let gauss = |rng: &mut ChaCha8Rng| {
        let (u1, u2): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen_range(0.0..1.0));
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    };
    const SIGMA: f64 = 0.01;
    let mut within = 0;
    for _ in 0..1000 {
        let yaw = rng.gen_range(-PI..PI);
        let t = random_point(&mut rng, 3.0);
        let truth = |l: Vec3| yaw_about(l, Vec3::ZERO, yaw) + t;
        let pairs: Vec<AnchorPair> = (0..10)
            .map(|_| {
                let l = random_point(&mut rng, 1.0);
                let noise = Vec3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)) * SIGMA;
                AnchorPair::new(l, truth(l) + noise)
            })
            .collect();
        let xf = solve_yaw_calibration(&pairs).unwrap();
        let held_out = random_point(&mut rng, 1.0);
        if xf.apply_point(held_out).distance(truth(held_out)) <= 0.03 {
            within += 1;
        }
    }
    let pass = noiseless_worst <= 1e-9 && within >= 950;
    check(pass, format!("noiseless worst {noiseless_worst:.3e}, noisy held-out ≤ 3 cm in {within}/1000"))
}

enum Solid {
    Ball { c: Vec3, r: f64 },
    Cuboid { c: Vec3, yaw: f64, half: Vec3 },
}

impl Solid {
    fn sdf(&self, p: Vec3) -> f64 {
        match *self {
            Solid::Ball { c, r } => p.distance(c) - r,
            Solid::Cuboid { c, yaw, half } => {
                let l = yaw_about(p, c, -yaw) - c;
                let q = Vec3::new(l.x.abs() - half.x, l.y.abs() - half.y, l.z.abs() - half.z);
                let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
                outside + q.x.max(q.y).max(q.z).min(0.0)
            }
        }
    }
}

fn occlusion_oracle() -> Outcome {
    const STEP: f64 = 0.001;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut compared, mut grazing, mut agree, mut blocked) = (0, 0, 0, 0);
    for i in 0..1000 {
        let n = rng.gen_range(1..=10);
        let mut objects = Vec::new();
        let mut solids = Vec::new();
        for k in 0..n {
            let c = random_point(&mut rng, 1.5);
            if rng.gen_bool(0.5) {
                let r = rng.gen_range(0.05..0.6);
                objects.push(SceneObject::new_sphere(format!("s{k}"), c, r));
                solids.push(Solid::Ball { c, r });
            } else {
                let yaw_deg: f64 = rng.gen_range(-180.0..180.0);
                let dims = Vec3::new(rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0));
                objects.push(SceneObject::new_box(format!("b{k}"), c, yaw_deg, dims));
                solids.push(Solid::Cuboid { c, yaw: yaw_deg.to_radians(), half: dims * 0.5 });
            }
        }
        let scene = Scene::new(format!("random{i}"), Some(Vec3::ZERO), objects).unwrap();
        let (eye, target) = (random_point(&mut rng, 2.0), random_point(&mut rng, 2.0));
        let len = eye.distance(target);
        let dir = (target - eye) * (1.0 / len);
        let steps = (len / STEP).floor() as usize;
        let mut closest = f64::INFINITY;
        for k in 1..=steps {
            let t = k as f64 * STEP;
            if t >= len {
                break;
            }
            let p = eye + dir * t;
            for s in &solids {
                closest = closest.min(s.sdf(p));
            }
        }
        if closest.abs() < STEP {
            grazing += 1;
            continue;
        }
        let march = closest < 0.0;
        let got = occluded(eye, target, &scene, &BTreeSet::new()).unwrap().is_some();
        compared += 1;
        blocked += march as usize;
        agree += (march == got) as usize;
    }
    check(agree == compared, format!("{agree}/{compared} agree ({blocked} occluded), {grazing} grazing excluded"))
}

fn dyad_sim() -> Outcome {
    let path = common::fixture("dyad_100deg.json");
    let a = run_scenario_file(&path, None).unwrap();
    let b = run_scenario_file(&path, None).unwrap();
    let requested: Vec<f64> = a
        .events
        .iter()
        .filter_map(|e| match e {
            MetricsEvent::AlignRequested { t, error: None, .. } => Some(*t),
            _ => None,
        })
        .collect();
    let completed: Vec<f64> = a
        .events
        .iter()
        .filter_map(|e| match e {
            MetricsEvent::AlignCompleted { t, .. } => Some(*t),
            _ => None,
        })
        .collect();
    if requested.len() != 1 || completed.len() != 1 {
        return check(false, format!("{} requests, {} completions", requested.len(), completed.len()));
    }
    // 100 degrees at 90 degrees per second.
    let expected = requested[0] + 100.0 / 90.0;
    let lag = completed[0] - expected;
    let identical = a.log() == b.log() && a.snapshot.to_json() == b.snapshot.to_json();
    let pass = a.seed == 7 && lag.abs() <= 1.0 / 60.0 + 1e-9 && a.replica_rho_discrepancy <= 1e-9 && identical;
    check(
        pass,
        format!(
            "completion {:+.4} s from request + 1.111 s, replica gap {:.1e}, rerun identical {identical}",
            lag, a.replica_rho_discrepancy
        ),
    )
}

fn reference_contrast() -> Outcome {
    let pivot = Vec3::new(0.0, 0.75, 0.0);
    // Owner unrotated, viewer at 100 degrees, hand 1 m from the axis.
    let hand = Vec3::new(0.6, 0.9, 0.8);
    let error_for = |decoupling: bool| {
        let s = session_with(
            pivot,
            &[(Vec3::new(0.0, 1.6, 1.5), hand, 0.0), (Vec3::new(1.5, 1.6, 0.0), hand, 100f64.to_radians())],
            decoupling,
        );
        let seen = s.render_frame(UserId(2)).unwrap().remote(UserId(1)).unwrap().right_hand.position;
        yaw_about(seen, pivot, -100f64.to_radians()).distance(hand)
    };
    let (on, off) = (error_for(true), error_for(false));
    let chord = 2.0 * 50f64.to_radians().sin();
    check(on <= 1e-9 && (off - chord).abs() <= 1e-9, format!("on {on:.3e} m, off {off:.12} m, chord {chord:.12} m"))
}

fn metrics() -> Outcome {
    let out = run_scenario_file(common::fixture("metrics_3align_2gaze.json"), None).unwrap();
    let summary = analyze(&out.log()).unwrap();
    let (a, b) = (&summary.users["A"], &summary.users["B"]);
    let pass = b.alignments == 3
        && a.alignments == 0
        && a.gaze_episodes == 2
        && b.gaze_episodes == 2
        && (a.gaze_seconds - 4.0).abs() <= 1e-9
        && (b.gaze_seconds - 4.0).abs() <= 1e-9;
    check(
        pass,
        format!(
            "alignments A {} B {}, gaze episodes {}/{}, gaze seconds {:.6}/{:.6}",
            a.alignments, b.alignments, a.gaze_episodes, b.gaze_episodes, a.gaze_seconds, b.gaze_seconds
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("worked 100 degree example", Duration::from_secs(1), worked_example),
        ("canonical-point agreement", Duration::from_secs(5), canonical_agreement),
        ("shortest-path and wrap grid", Duration::from_secs(5), shortest_path_grid),
        ("calibration recovery", Duration::from_secs(10), calibration),
        ("occlusion vs ray-march", Duration::from_secs(30), occlusion_oracle),
        ("end-to-end dyad sim", Duration::from_secs(10), dyad_sim),
        ("reference-error contrast", Duration::from_secs(5), reference_contrast),
        ("metrics counts and durations", Duration::from_secs(10), metrics),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= limit;
        failed += !pass as usize;
        println!(
            "{} {name}: {} [{:.2} s of {} s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
