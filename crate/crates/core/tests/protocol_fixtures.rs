mod common;

use decoupled_hands::geom::{AnchorPair, Pose, UnitQuat, Vec3};
use decoupled_hands::protocol::{decode, decode_bytes, encode, Direction, Message, ReliabilityClass, CATALOG};
use decoupled_hands::session::{Pin, PinId, UserId};
use proptest::prelude::*;

#[test]
fn every_type_has_a_golden_that_round_trips_bit_exact() {
    for name in CATALOG {
        let text = common::read_fixture(&format!("protocol/{name}.json"));
        let text = text.trim_end_matches('\n');
        let msg = decode(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(msg.type_name(), name);
        assert_eq!(encode(&msg).unwrap(), text, "{name} re-encodes differently");
    }
    let files = std::fs::read_dir(common::fixture("protocol")).unwrap().count();
    assert_eq!(files, CATALOG.len(), "one golden per type, no strays");
}

#[test]
fn golden_values_decode_as_written() {
    let m = decode(&common::read_fixture("protocol/align_started.json")).unwrap();
    assert_eq!(
        m,
        Message::AlignStarted {
            follower: UserId(2),
            leader: UserId(1),
            rho_start: 0.0,
            delta: 100f64.to_radians(),
            duration: 1.1111111111111112,
            t0: 1.5
        }
    );
    let m = decode(&common::read_fixture("protocol/pin_added.json")).unwrap();
    assert_eq!(
        m,
        Message::PinAdded {
            pin: Pin { id: PinId(1), owner: UserId(1), canonical_position: Vec3::new(0.0, 0.85, 0.4), color: 0 }
        }
    );
    match decode(&common::read_fixture("protocol/welcome.json")).unwrap() {
        Message::Welcome { user_id, snapshot, .. } => {
            assert_eq!(user_id, UserId(2));
            assert_eq!(snapshot.users.len(), 2);
            assert!(snapshot.users[1].animation.is_some());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn catalog_is_total_and_authority_is_schema_level() {
    let c2s: Vec<&str> = CATALOG
        .iter()
        .map(|n| decode(&common::read_fixture(&format!("protocol/{n}.json"))).unwrap())
        .filter(|m| m.direction() == Direction::ClientToServer)
        .map(|m| m.type_name())
        .collect();
    assert_eq!(c2s, ["hello", "calibrate_request", "pose", "align_request", "pin_place", "leave"]);
    // Nothing a client sends names another user.
    for n in &c2s {
        let v: serde_json::Value = serde_json::from_str(&common::read_fixture(&format!("protocol/{n}.json"))).unwrap();
        for key in ["id", "user_id", "follower", "leader", "rho"] {
            assert!(v.get(key).is_none(), "{n} carries {key}");
        }
    }
    for n in CATALOG {
        let m = decode(&common::read_fixture(&format!("protocol/{n}.json"))).unwrap();
        let expect = if matches!(n, "pose" | "pose_update") { ReliabilityClass::Droppable } else { ReliabilityClass::Reliable };
        assert_eq!(m.reliability(), expect, "{n}");
    }
}

#[test]
fn error_codes_for_bad_frames() {
    let cases = [
        ("{", "malformed_frame"),
        ("[1,2]", "malformed_frame"),
        (r#"{"version":1}"#, "schema_violation"),
        (r#"{"type":"hello","version":2,"name":"a"}"#, "version_mismatch"),
        (r#"{"type":"teleport","version":1}"#, "unknown_type"),
        (r#"{"type":"hello","version":1}"#, "schema_violation"),
        (r#"{"type":"hello","version":1,"name":"a","extra":0}"#, "schema_violation"),
        (r#"{"type":"pin_place","version":1,"world":[0,"x",0]}"#, "schema_violation"),
        (
            r#"{"type":"pose","version":1,"head":{"p":[0,0,0],"q":[2,0,0,0]},"lh":{"p":[0,0,0],"q":[1,0,0,0]},"rh":{"p":[0,0,0],"q":[1,0,0,0]},"seq":1}"#,
            "schema_violation",
        ),
    ];
    for (text, code) in cases {
        assert_eq!(decode(text).unwrap_err().code(), code, "{text}");
    }
    assert_eq!(decode(r#"{"version":1}"#).unwrap_err().field(), Some("type"));
    let e = decode(r#"{"type":"pin_place","version":1,"world":[0,"x",0]}"#).unwrap_err();
    assert_eq!(e.field(), Some("world[1]"));
    assert_eq!(decode_bytes(&[0xff, 0xfe]).unwrap_err().code(), "malformed_frame");
}

fn finite() -> BoxedStrategy<f64> {
    prop_oneof![-1e3..1e3f64, Just(0.0), Just(-0.0), Just(1e-300), Just(f64::MAX), Just(f64::MIN_POSITIVE)].boxed()
}

fn vec3() -> BoxedStrategy<Vec3> {
    (finite(), finite(), finite()).prop_map(|(x, y, z)| Vec3::new(x, y, z)).boxed()
}

fn quat() -> BoxedStrategy<UnitQuat> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter_map("degenerate", |(w, x, y, z)| UnitQuat::normalize(w, x, y, z).ok())
        .boxed()
}

fn pose() -> BoxedStrategy<Pose> {
    (vec3(), quat()).prop_map(|(p, q)| Pose::new(p, q)).boxed()
}

fn name() -> impl Strategy<Value = String> {
    "[ -~\\u{e9}\\u{4e16}\"\\\\]{0,12}"
}

fn client_msg() -> BoxedStrategy<Message> {
    prop_oneof![
        name().prop_map(|name| Message::Hello { name }),
        prop::collection::vec((vec3(), vec3()), 0..5)
            .prop_map(|v| Message::CalibrateRequest { pairs: v.into_iter().map(|(l, s)| AnchorPair::new(l, s)).collect() }),
        (pose(), pose(), pose(), any::<u64>()).prop_map(|(head, lh, rh, seq)| Message::Pose { head, lh, rh, seq }),
        (vec3(), quat()).prop_map(|(o, q)| Message::AlignRequest { ray_origin: o, ray_dir: q.rotate(Vec3::FORWARD) }),
        vec3().prop_map(|world| Message::PinPlace { world }),
        Just(Message::Leave),
    ]
    .boxed()
}

fn server_msg() -> BoxedStrategy<Message> {
    let id = (0u32..1000).prop_map(UserId);
    prop_oneof![
        (finite(), vec3(), finite()).prop_map(|(yaw, translation, rms)| Message::CalibrateResult { yaw, translation, rms }),
        (id.clone(), name(), any::<u32>()).prop_map(|(id, name, color)| Message::UserJoined { id, name, color }),
        id.clone().prop_map(|id| Message::UserLeft { id }),
        (id.clone(), pose(), pose(), pose(), finite(), any::<u64>())
            .prop_map(|(id, head, lh, rh, rho, seq)| Message::PoseUpdate { id, head, lh, rh, rho, seq }),
        (id.clone(), id.clone(), finite(), finite(), finite(), finite()).prop_map(
            |(follower, leader, rho_start, delta, duration, t0)| {
                Message::AlignStarted { follower, leader, rho_start, delta, duration, t0 }
            }
        ),
        (id.clone(), finite()).prop_map(|(follower, rho)| Message::AlignCompleted { follower, rho }),
        (any::<u32>(), id, vec3(), any::<u32>()).prop_map(|(p, owner, canonical_position, color)| Message::PinAdded {
            pin: Pin { id: PinId(p), owner, canonical_position, color }
        }),
        (name(), name()).prop_map(|(code, detail)| Message::Error { code, detail }),
    ]
    .boxed()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn random_messages_round_trip(msg in prop_oneof![client_msg(), server_msg()]) {
        let text = encode(&msg).unwrap();
        let back = decode(&text).unwrap();
        prop_assert_eq!(&back, &msg);
        prop_assert_eq!(encode(&back).unwrap(), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, ..ProptestConfig::default() })]

    #[test]
    fn decoder_never_panics_on_bytes(bytes in prop::collection::vec(any::<u8>(), 0..4096)) {
        let _ = decode_bytes(&bytes);
    }

    #[test]
    fn decoder_never_panics_on_mutated_goldens(idx in 0usize..15, cut in any::<prop::sample::Index>(), junk in ".{0,8}") {
        let text = common::read_fixture(&format!("protocol/{}.json", CATALOG[idx]));
        let at = cut.index(text.len() + 1);
        let at = (0..=at).rev().find(|i| text.is_char_boundary(*i)).unwrap();
        let mutated = format!("{}{}{}", &text[..at], junk, &text[at..]);
        let _ = decode(&mutated);
        let _ = decode(&text[..at]);
    }
}

#[test]
fn decoder_survives_large_and_deep_input() {
    let big = vec![b'['; 64 * 1024];
    assert!(decode_bytes(&big).is_err());
    let mut deep = String::from(r#"{"type":"hello","version":1,"name":"#);
    deep.push_str(&"[".repeat(10_000));
    assert!(decode(&deep).is_err());
    let long_name = format!(r#"{{"type":"hello","version":1,"name":"{}"}}"#, "x".repeat(60_000));
    assert!(decode(&long_name).is_ok());
}
