// Leader at azimuth 0°, follower at 100°: the follower aligns and then sees
// the leader's hand rotated onto its own replica.

use decoupled_hands::geom::{Pose, Vec3};
use decoupled_hands::scene::{Scene, SceneObject};
use decoupled_hands::session::{AlignOutcome, Session, SessionConfig};

fn on_ring(deg: f64) -> Vec3 {
    let a = deg.to_radians();
    Vec3::new(1.5 * a.sin(), 1.6, 1.5 * a.cos())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = Scene::new(
        "table",
        Some(Vec3::new(0.0, 0.75, 0.0)),
        vec![SceneObject::new_box("crate", Vec3::new(0.2, 0.85, 0.0), 15.0, Vec3::new(0.2, 0.2, 0.2))],
    )?;
    let mut session = Session::new(scene, SessionConfig::default())?;
    let (leader, _) = session.join("leader")?;
    let (follower, _) = session.join("follower")?;

    let hand = Pose::at(Vec3::new(0.2, 0.95, 0.1));
    session.update_pose(leader, Pose::at(on_ring(0.0)), hand, hand, 1)?;
    session.update_pose(follower, Pose::at(on_ring(100.0)), Pose::at(on_ring(100.0)), Pose::at(on_ring(100.0)), 1)?;

    // The follower points its controller at the leader's head.
    let origin = on_ring(100.0);
    let dir = (on_ring(0.0) - origin).normalized().unwrap();
    let started = match session.request_alignment(follower, origin, dir)? {
        AlignOutcome::Started(s) => s,
        AlignOutcome::Completed { .. } => unreachable!("offsets differ"),
    };
    println!("sweep {:+.1}° over {:.3} s starting at t={:.3}", started.delta.to_degrees(), started.duration, started.t0);

    let mut t = started.t0;
    loop {
        t += 0.25;
        let done = session.tick(t)?;
        let rho = session.user(follower).unwrap().rho.radians();
        println!("t={t:.2} follower offset {:.1}°", rho.to_degrees());
        if !done.is_empty() {
            break;
        }
    }

    let frame = session.render_frame(follower)?;
    let seen = frame.remote(leader).unwrap();
    println!("leader's right hand, true      {:?}", hand.position.to_array());
    println!("leader's right hand, as seen   {:?}", seen.right_hand.position.to_array());
    println!("leader's cap stays at its pose {:?}", seen.cap.position.to_array());
    println!("crate on the follower's replica {:?}", frame.objects[0].pose.position.to_array());
    Ok(())
}
