use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::net::SimNetConfig;
use super::HarnessError;
use crate::geom::Vec3;
use crate::scene::{load_scene_file, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hand {
    Left,
    #[default]
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandRef {
    pub user: String,
    #[serde(default)]
    pub hand: Hand,
}

/// One scripted step. Points are in the bot's own world frame unless the
/// field says `canonical`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    /// Head glides linearly to `p`; hands follow.
    MoveTo {
        p: Vec3,
        duration: f64,
    },
    /// Sticky gaze target. `offset_deg` turns the head left (+) or right
    /// of the target about the vertical.
    LookAt {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        point: Option<Vec3>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        user: Option<String>,
        #[serde(default)]
        offset_deg: f64,
    },
    /// Holds a hand at the point until the next point_at for that hand.
    PointAt {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        world: Option<Vec3>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        canonical: Option<Vec3>,
        #[serde(default)]
        hand: Hand,
    },
    /// Blocks until the server reports this bot's alignment finished.
    AlignWith {
        user: String,
    },
    /// `hand_of` pins wherever that user's hand appears to this bot.
    PlacePin {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        world: Option<Vec3>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        canonical: Option<Vec3>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hand_of: Option<HandRef>,
    },
    Wait {
        s: f64,
    },
}

impl Command {
    pub fn op(&self) -> &'static str {
        match self {
            Command::MoveTo { .. } => "move_to",
            Command::LookAt { .. } => "look_at",
            Command::PointAt { .. } => "point_at",
            Command::AlignWith { .. } => "align_with",
            Command::PlacePin { .. } => "place_pin",
            Command::Wait { .. } => "wait",
        }
    }

    fn check(&self) -> Result<(), String> {
        let one_of =
            |n: usize, what: &str| if n == 1 { Ok(()) } else { Err(format!("{} needs exactly one of {what}", self.op())) };
        let finite = |t: f64, what: &str| {
            if t.is_finite() && t >= 0.0 {
                Ok(())
            } else {
                Err(format!("{what} must be a finite non-negative number, got {t}"))
            }
        };
        match self {
            Command::MoveTo { p, duration } => {
                if !p.is_finite() {
                    return Err("move_to target is not finite".into());
                }
                finite(*duration, "duration")
            }
            Command::LookAt { point, user, offset_deg } => {
                if !offset_deg.is_finite() {
                    return Err("offset_deg is not finite".into());
                }
                one_of(point.is_some() as usize + user.is_some() as usize, "point, user")
            }
            Command::PointAt { world, canonical, .. } => {
                one_of(world.is_some() as usize + canonical.is_some() as usize, "world, canonical")
            }
            Command::AlignWith { .. } => Ok(()),
            Command::PlacePin { world, canonical, hand_of } => one_of(
                world.is_some() as usize + canonical.is_some() as usize + hand_of.is_some() as usize,
                "world, canonical, hand_of",
            ),
            Command::Wait { s } => finite(*s, "wait"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BotSpec {
    pub name: String,
    /// Initial head position.
    pub start: Vec3,
    #[serde(default)]
    pub script: Vec<Command>,
}

impl BotSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !self.start.is_finite() {
            return Err(HarnessError::Config(format!("bot {} start is not finite", self.name)));
        }
        for (index, cmd) in self.script.iter().enumerate() {
            cmd.check().map_err(|reason| HarnessError::Scenario { bot: self.name.clone(), index, reason })?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LosCheck {
    pub eye_user: String,
    pub target_object: String,
    pub expect_occluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Scene file, relative to the scenario file.
    pub scene: PathBuf,
    #[serde(default)]
    pub net: SimNetConfig,
    pub duration_s: f64,
    pub bots: Vec<BotSpec>,
    #[serde(default)]
    pub los_checks: Vec<LosCheck>,
    /// Baseline mode when false: hands are shown unrotated.
    #[serde(default = "default_true")]
    pub decoupling: bool,
}

fn default_true() -> bool {
    true
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let sc: Self = serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.net.validate()?;
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return Err(HarnessError::Config(format!("duration_s must be >= 0, got {}", self.duration_s)));
        }
        for (i, bot) in self.bots.iter().enumerate() {
            if self.bots[..i].iter().any(|b| b.name == bot.name) {
                return Err(HarnessError::Config(format!("duplicate bot name {}", bot.name)));
            }
            bot.validate()?;
        }
        for check in &self.los_checks {
            if !self.bots.iter().any(|b| b.name == check.eye_user) {
                return Err(HarnessError::Config(format!("los check names unknown user {}", check.eye_user)));
            }
        }
        Ok(())
    }
}

/// Reads a scenario and the scene it names.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<(Scenario, Scene), HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.to_owned(), source: e })?;
    let mut scenario = Scenario::from_json(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    scenario.scene = base.join(&scenario.scene);
    let scene = load_scene_file(&scenario.scene)?;
    for check in &scenario.los_checks {
        if scene.object(&check.target_object).is_none() {
            return Err(HarnessError::Config(format!("los check names unknown object {}", check.target_object)));
        }
    }
    Ok((scenario, scene))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_command_form() {
        let text = r#"{"name":"B","start":[0,1.6,-1.5],"script":[
            {"op":"wait","s":1},
            {"op":"move_to","p":[1,1.6,0],"duration":0.5},
            {"op":"look_at","user":"A"},
            {"op":"look_at","point":[0,0.75,0],"offset_deg":30},
            {"op":"point_at","world":[0.1,0.8,0],"hand":"left"},
            {"op":"point_at","canonical":[0.1,0.8,0]},
            {"op":"align_with","user":"A"},
            {"op":"place_pin","world":[0,0.8,0]},
            {"op":"place_pin","hand_of":{"user":"A"}}
        ]}"#;
        let spec = BotSpec::from_json(text).unwrap();
        assert_eq!(spec.script.len(), 9);
        assert_eq!(spec.script[4], Command::PointAt { world: Some(Vec3::new(0.1, 0.8, 0.0)), canonical: None, hand: Hand::Left });
        assert!(matches!(&spec.script[8], Command::PlacePin { hand_of: Some(HandRef { hand: Hand::Right, .. }), .. }));
    }

    #[test]
    fn bad_commands_name_their_index() {
        let text = r#"{"name":"B","start":[0,0,0],"script":[{"op":"wait","s":1},{"op":"look_at"}]}"#;
        match BotSpec::from_json(text) {
            Err(HarnessError::Scenario { bot, index, .. }) => assert_eq!((bot.as_str(), index), ("B", 1)),
            other => panic!("{other:?}"),
        }
        let text = r#"{"name":"B","start":[0,0,0],"script":[{"op":"wait","s":-1}]}"#;
        assert!(matches!(BotSpec::from_json(text), Err(HarnessError::Scenario { index: 0, .. })));
        let text = r#"{"name":"B","start":[0,0,0],"script":[{"op":"jump"}]}"#;
        assert!(matches!(BotSpec::from_json(text), Err(HarnessError::Parse(_))));
        let text = r#"{"name":"B","start":[0,0,0],"script":[{"op":"wait","s":1,"extra":2}]}"#;
        assert!(matches!(BotSpec::from_json(text), Err(HarnessError::Parse(_))));
    }

    #[test]
    fn scenario_rules() {
        let ok = r#"{"scene":"s.json","duration_s":1,"bots":[{"name":"A","start":[0,0,0]}]}"#;
        let sc = Scenario::from_json(ok).unwrap();
        assert!(sc.decoupling);
        assert_eq!(sc.net, SimNetConfig::default());
        let dup = r#"{"scene":"s.json","duration_s":1,"bots":[{"name":"A","start":[0,0,0]},{"name":"A","start":[1,0,0]}]}"#;
        assert!(matches!(Scenario::from_json(dup), Err(HarnessError::Config(_))));
        let los = r#"{"scene":"s.json","duration_s":1,"bots":[],"los_checks":[{"eye_user":"Z","target_object":"x","expect_occluded":false}]}"#;
        assert!(matches!(Scenario::from_json(los), Err(HarnessError::Config(_))));
    }
}
