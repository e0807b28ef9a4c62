// Encode messages to wire text and classify bad frames.

use decoupled_hands::geom::{Pose, Vec3};
use decoupled_hands::protocol::{decode, encode, Message};
use decoupled_hands::session::UserId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hand = Pose::at(Vec3::new(0.1, 0.9, 0.3));
    let messages = [
        Message::Hello { name: "ana".into() },
        Message::Pose { head: Pose::at(Vec3::new(0.0, 1.6, 1.5)), lh: hand, rh: hand, seq: 42 },
        Message::AlignCompleted { follower: UserId(2), rho: 100f64.to_radians() },
    ];
    for m in &messages {
        let text = encode(m)?;
        assert_eq!(&decode(&text)?, m);
        println!("{text}");
    }

    for bad in [
        "not json",
        r#"{"type":"teleport","version":1}"#,
        r#"{"type":"hello","version":9,"name":"x"}"#,
        r#"{"type":"pose","version":1,"seq":-1}"#,
    ] {
        let err = decode(bad).unwrap_err();
        println!("{:<20} {err}", err.code());
    }
    Ok(())
}
