//! Canonical-frame scene: shared objects, the pivot they rotate about, and
//! line-of-sight queries against them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{centroid, segment_box_interval, segment_sphere_interval, Pivot, Pose, UnitQuat, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("scene file could not be read: {0}")]
    Io(#[from] std::io::Error),
    #[error("scene document does not parse: {0}")]
    Parse(String),
    #[error("invalid scene: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("segment endpoints coincide")]
    DegenerateSegment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Full edge lengths along the object's local axes.
    Box {
        dimensions: Vec3,
    },
    Sphere {
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: String,
    pub shape: Shape,
    /// Canonical-frame pose; orientation is the authored yaw.
    pub pose: Pose,
    pub label: String,
    yaw_deg: f64,
}

impl SceneObject {
    pub fn new_box(id: impl Into<String>, position: Vec3, yaw_deg: f64, dimensions: Vec3) -> Self {
        Self::new(id, Shape::Box { dimensions }, position, yaw_deg)
    }

    pub fn new_sphere(id: impl Into<String>, position: Vec3, radius: f64) -> Self {
        Self::new(id, Shape::Sphere { radius }, position, 0.0)
    }

    fn new(id: impl Into<String>, shape: Shape, position: Vec3, yaw_deg: f64) -> Self {
        Self {
            id: id.into(),
            shape,
            pose: Pose::new(position, UnitQuat::from_yaw(yaw_deg.to_radians())),
            label: String::new(),
            yaw_deg,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn position(&self) -> Vec3 {
        self.pose.position
    }

    /// Interval of the segment `origin + t·dir`, `t ∈ [0, len]`, inside the solid.
    fn segment_interval(&self, origin: Vec3, dir: Vec3, len: f64) -> Option<(f64, f64)> {
        match self.shape {
            Shape::Sphere { radius } => segment_sphere_interval(origin, dir, len, self.pose.position, radius),
            Shape::Box { dimensions } => {
                segment_box_interval(origin, dir, len, self.pose.position, self.pose.orientation, dimensions * 0.5)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub table_center: Option<Vec3>,
    objects: Vec<SceneObject>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ShapeKind {
    Box,
    Sphere,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDocument {
    name: String,
    table_center: Option<Vec3>,
    objects: Vec<ObjectDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDocument {
    id: String,
    shape: ShapeKind,
    position: Vec3,
    #[serde(default)]
    yaw_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dimensions: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default)]
    label: String,
}

impl Scene {
    /// Builds a scene from already constructed objects, applying the same
    /// validation as [`load_scene`].
    pub fn new(name: impl Into<String>, table_center: Option<Vec3>, objects: Vec<SceneObject>) -> Result<Self, SceneError> {
        let scene = Scene { name: name.into(), table_center, objects };
        let problems = scene.problems();
        if problems.is_empty() {
            Ok(scene)
        } else {
            Err(SceneError::Validation(problems))
        }
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.objects.is_empty() {
            problems.push("scene has no objects".to_owned());
        }
        if let Some(c) = self.table_center {
            if !c.is_finite() {
                problems.push("table_center is not finite".to_owned());
            }
        }
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, obj) in self.objects.iter().enumerate() {
            if let Some(first) = seen.insert(obj.id.as_str(), i) {
                problems.push(format!("duplicate id {:?} at objects[{first}] and objects[{i}]", obj.id));
            }
            if !obj.pose.position.is_finite() || !obj.yaw_deg.is_finite() {
                problems.push(format!("objects[{i}] ({}) has a non-finite position or yaw", obj.id));
            }
            match obj.shape {
                Shape::Box { dimensions: d } => {
                    if !(d.x > 0.0 && d.y > 0.0 && d.z > 0.0) || !d.is_finite() {
                        problems.push(format!("objects[{i}] ({}) has non-positive dimensions", obj.id));
                    }
                }
                Shape::Sphere { radius } => {
                    if !(radius > 0.0) || !radius.is_finite() {
                        problems.push(format!("objects[{i}] ({}) has non-positive radius", obj.id));
                    }
                }
            }
        }
        problems
    }

    pub fn to_document(&self) -> String {
        let doc = SceneDocument {
            name: self.name.clone(),
            table_center: self.table_center,
            objects: self
                .objects
                .iter()
                .map(|o| {
                    let (dimensions, radius) = match o.shape {
                        Shape::Box { dimensions } => (Some(dimensions), None),
                        Shape::Sphere { radius } => (None, Some(radius)),
                    };
                    ObjectDocument {
                        id: o.id.clone(),
                        shape: match o.shape {
                            Shape::Box { .. } => ShapeKind::Box,
                            Shape::Sphere { .. } => ShapeKind::Sphere,
                        },
                        position: o.pose.position,
                        yaw_deg: o.yaw_deg,
                        dimensions,
                        radius,
                        label: o.label.clone(),
                    }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("scene documents always serialize")
    }
}

/// Parses and validates a scene document. Validation reports every problem at once.
pub fn load_scene(document: &str) -> Result<Scene, SceneError> {
    let doc: SceneDocument = serde_json::from_str(document).map_err(|e| SceneError::Parse(e.to_string()))?;
    let mut problems = Vec::new();
    let mut objects = Vec::with_capacity(doc.objects.len());
    for (i, o) in doc.objects.into_iter().enumerate() {
        let shape = match (o.shape, o.dimensions, o.radius) {
            (ShapeKind::Box, Some(dimensions), None) => Shape::Box { dimensions },
            (ShapeKind::Sphere, None, Some(radius)) => Shape::Sphere { radius },
            (ShapeKind::Box, _, _) => {
                problems.push(format!("objects[{i}] ({}) is a box and needs exactly \"dimensions\"", o.id));
                continue;
            }
            (ShapeKind::Sphere, _, _) => {
                problems.push(format!("objects[{i}] ({}) is a sphere and needs exactly \"radius\"", o.id));
                continue;
            }
        };
        objects.push(SceneObject::new(o.id, shape, o.position, o.yaw_deg).with_label(o.label));
    }
    let scene = Scene { name: doc.name, table_center: doc.table_center, objects };
    problems.extend(scene.problems());
    if problems.is_empty() {
        Ok(scene)
    } else {
        Err(SceneError::Validation(problems))
    }
}

pub fn load_scene_file(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    load_scene(&std::fs::read_to_string(path)?)
}

/// Table center when authored, otherwise the unweighted centroid of object positions.
pub fn pivot_of(scene: &Scene) -> Pivot {
    if let Some(c) = scene.table_center {
        return Pivot::new(c);
    }
    let positions: Vec<Vec3> = scene.objects.iter().map(|o| o.pose.position).collect();
    // validated scenes are never empty
    Pivot::new(centroid(&positions).unwrap_or(Vec3::ZERO))
}

/// First object cutting the open segment between two points.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocker {
    pub id: String,
    /// Distance from the eye to where the segment enters the object.
    pub distance: f64,
}

/// Tests whether the open segment `eye → target` passes through any object
/// not listed in `ignore_ids`, reporting the nearest blocker.
pub fn occluded(eye: Vec3, target: Vec3, scene: &Scene, ignore_ids: &BTreeSet<String>) -> Result<Option<Blocker>, SceneError> {
    let delta = target - eye;
    let len = delta.norm();
    if len <= 1e-9 {
        return Err(SceneError::DegenerateSegment);
    }
    let dir = delta * (1.0 / len);
    let mut best: Option<Blocker> = None;
    for obj in &scene.objects {
        if ignore_ids.contains(&obj.id) {
            continue;
        }
        let Some((enter, exit)) = obj.segment_interval(eye, dir, len) else {
            continue;
        };
        // endpoints are excluded: the solid must reach strictly inside (0, len)
        if exit > 0.0 && enter < len && best.as_ref().is_none_or(|b| enter < b.distance) {
            best = Some(Blocker { id: obj.id.clone(), distance: enter });
        }
    }
    Ok(best)
}
