use std::collections::BTreeMap;

use serde::Serialize;

use super::metrics::{MetricsEvent, GAZE_CONE_HALF_ANGLE_DEG, GAZE_MIN_EPISODE_S};
use super::HarnessError;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct UserSummary {
    pub alignments: u64,
    pub pins_placed: u64,
    pub gaze_episodes: u64,
    pub gaze_seconds: f64,
    /// Samples where this user was the viewer.
    pub reference_samples: u64,
    pub reference_error_mean: f64,
    pub reference_error_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LosResult {
    pub eye_user: String,
    pub target_object: String,
    pub occluded: bool,
    pub expect_occluded: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// Radians.
    pub gaze_cone_half_angle: f64,
    pub gaze_min_duration: f64,
    pub events: usize,
    pub users: BTreeMap<String, UserSummary>,
    pub los_checks: Vec<LosResult>,
    /// Every line-of-sight check passed (vacuously true with none).
    pub los_pass: bool,
}

impl Summary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Parses a JSON-lines metrics log. Blank lines are skipped.
pub fn parse_log(text: &str) -> Result<Vec<MetricsEvent>, HarnessError> {
    let mut events = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let ev: MetricsEvent =
            serde_json::from_str(line).map_err(|e| HarnessError::MalformedLog { line: line_no, reason: e.to_string() })?;
        let t = ev.t();
        if !t.is_finite() || t < last_t {
            return Err(HarnessError::MalformedLog { line: line_no, reason: format!("time {t} goes backwards from {last_t}") });
        }
        last_t = t;
        events.push(ev);
    }
    Ok(events)
}

pub fn analyze(text: &str) -> Result<Summary, HarnessError> {
    Ok(analyze_events(&parse_log(text)?))
}

pub fn analyze_events(events: &[MetricsEvent]) -> Summary {
    let mut summary = Summary {
        gaze_cone_half_angle: GAZE_CONE_HALF_ANGLE_DEG.to_radians(),
        gaze_min_duration: GAZE_MIN_EPISODE_S,
        events: events.len(),
        users: BTreeMap::new(),
        los_checks: Vec::new(),
        los_pass: true,
    };
    let mut error_sums: BTreeMap<String, f64> = BTreeMap::new();
    for ev in events {
        match ev {
            MetricsEvent::SessionInfo { gaze_cone_half_angle, gaze_min_duration, .. } => {
                summary.gaze_cone_half_angle = *gaze_cone_half_angle;
                summary.gaze_min_duration = *gaze_min_duration;
            }
            MetricsEvent::UserJoined { user, .. } => {
                summary.users.entry(user.clone()).or_default();
            }
            MetricsEvent::AlignCompleted { follower, .. } => summary.users.entry(follower.clone()).or_default().alignments += 1,
            MetricsEvent::PinPlaced { user, .. } => summary.users.entry(user.clone()).or_default().pins_placed += 1,
            MetricsEvent::GazeOff { a, b, duration, .. } => {
                for name in [a, b] {
                    let u = summary.users.entry(name.clone()).or_default();
                    u.gaze_episodes += 1;
                    u.gaze_seconds += duration;
                }
            }
            MetricsEvent::ReferenceSample { viewers, .. } => {
                for v in viewers {
                    let u = summary.users.entry(v.viewer.clone()).or_default();
                    u.reference_samples += 1;
                    u.reference_error_max = u.reference_error_max.max(v.error);
                    *error_sums.entry(v.viewer.clone()).or_default() += v.error;
                }
            }
            MetricsEvent::LosCheck { eye_user, target_object, occluded, expect_occluded, pass, .. } => {
                summary.los_pass &= *pass;
                summary.los_checks.push(LosResult {
                    eye_user: eye_user.clone(),
                    target_object: target_object.clone(),
                    occluded: *occluded,
                    expect_occluded: *expect_occluded,
                    pass: *pass,
                });
            }
            MetricsEvent::UserLeft { .. }
            | MetricsEvent::AlignRequested { .. }
            | MetricsEvent::AlignStarted { .. }
            | MetricsEvent::GazeOn { .. } => {}
        }
    }
    for (name, sum) in error_sums {
        let u = summary.users.get_mut(&name).expect("sampled users were inserted");
        u.reference_error_mean = sum / u.reference_samples as f64;
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::harness::metrics::{to_jsonl, ViewerSample};

    #[test]
    fn empty_log_is_all_zero() {
        let s = analyze("").unwrap();
        assert!(s.users.is_empty() && s.los_checks.is_empty() && s.los_pass);
        assert_eq!(s.events, 0);
        assert_eq!(s.gaze_cone_half_angle, 20f64.to_radians());
    }

    #[test]
    fn counts_and_durations() {
        let mut ev =
            vec![MetricsEvent::UserJoined { t: 0.0, user: "A".into() }, MetricsEvent::UserJoined { t: 0.0, user: "B".into() }];
        for i in 0..3 {
            ev.push(MetricsEvent::AlignCompleted { t: 1.0 + i as f64, follower: "B".into(), rho: 0.0 });
        }
        ev.push(MetricsEvent::GazeOff { t: 5.0, a: "A".into(), b: "B".into(), duration: 1.5 });
        ev.push(MetricsEvent::GazeOff { t: 8.0, a: "A".into(), b: "B".into(), duration: 2.5 });
        ev.push(MetricsEvent::ReferenceSample {
            t: 9.0,
            owner: "A".into(),
            intended: Vec3::ZERO,
            viewers: vec![ViewerSample { viewer: "B".into(), recovered: Vec3::ZERO, error: 0.5 }],
        });
        ev.push(MetricsEvent::ReferenceSample {
            t: 9.5,
            owner: "A".into(),
            intended: Vec3::ZERO,
            viewers: vec![ViewerSample { viewer: "B".into(), recovered: Vec3::ZERO, error: 1.5 }],
        });
        let s = analyze(&to_jsonl(&ev)).unwrap();
        let b = &s.users["B"];
        assert_eq!((b.alignments, b.gaze_episodes, b.gaze_seconds), (3, 2, 4.0));
        assert_eq!((b.reference_error_mean, b.reference_error_max), (1.0, 1.5));
        assert_eq!(s.users["A"].gaze_seconds, 4.0);
        assert_eq!(s.users["A"].alignments, 0);
    }

    #[test]
    fn malformed_lines_are_numbered() {
        let text = "{\"kind\":\"user_joined\",\"t\":0.0,\"user\":\"A\"}\n\n{\"kind\":\"nope\",\"t\":1.0}\n";
        assert!(matches!(analyze(text), Err(HarnessError::MalformedLog { line: 3, .. })));
        let text = "{\"kind\":\"user_joined\",\"t\":2.0,\"user\":\"A\"}\n{\"kind\":\"user_joined\",\"t\":1.0,\"user\":\"B\"}\n";
        assert!(matches!(analyze(text), Err(HarnessError::MalformedLog { line: 2, .. })));
    }
}
