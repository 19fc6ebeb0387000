use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::shapes::{PrimitiveShape, ShapeKind};
use super::SimError;
use crate::geometry::{CameraIntrinsics, Frame, Pose6Dof};
use crate::io::{read_file, write_file};

/// Serialized form of a pose: `q = [w, x, y, z]`, `t = [x, y, z]` meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseDoc {
    pub q: [f64; 4],
    pub t: [f64; 3],
}

impl PoseDoc {
    pub fn from_pose(pose: &Pose6Dof) -> Self {
        Self {
            q: pose.wxyz(),
            t: pose.xyz(),
        }
    }

    pub fn to_pose(&self, frame: Frame) -> Pose6Dof {
        Pose6Dof::from_wxyz(self.q, self.t, frame)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartSpec {
    pub name: String,
    pub shape: PrimitiveShape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub name: String,
    pub tags: Vec<String>,
    pub parts: Vec<PartSpec>,
    /// Object frame in the world; z up, origin on the supporting surface.
    pub pose: Pose6Dof,
}

pub(crate) fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl ObjectSpec {
    /// Tags followed by the name, e.g. "red mug".
    pub fn label(&self) -> String {
        let mut words = self.tags.clone();
        words.push(self.name.clone());
        words.join(" ")
    }

    fn token_set(&self) -> BTreeSet<String> {
        tokens(&self.label()).into_iter().collect()
    }

    /// True when every token of `query` is one of the object's name or tag tokens.
    pub fn matches(&self, query: &str) -> bool {
        let own = self.token_set();
        let q = tokens(query);
        !q.is_empty() && q.iter().all(|t| own.contains(t))
    }

    pub fn part_index(&self, part: &str) -> Option<usize> {
        let wanted = tokens(part).join(" ");
        self.parts.iter().position(|p| tokens(&p.name).join(" ") == wanted)
    }

    /// World pose of a part's primitive frame.
    pub fn part_pose(&self, part: usize) -> Pose6Dof {
        let mut p = self.pose.compose(&self.parts[part].shape.local_pose);
        p.frame = Frame::World;
        p
    }

    /// Sphere enclosing every part, world frame.
    pub fn bounding_sphere(&self) -> (Vector3<f64>, f64) {
        let spheres: Vec<(Vector3<f64>, f64)> = (0..self.parts.len())
            .map(|i| {
                let (c, r) = self.parts[i].shape.kind.bounding_sphere();
                (self.part_pose(i).transform_point(&c), r)
            })
            .collect();
        let center = spheres.iter().map(|(c, _)| c).sum::<Vector3<f64>>() / spheres.len() as f64;
        let radius = spheres
            .iter()
            .map(|(c, r)| (c - center).norm() + r)
            .fold(0.0, f64::max);
        (center, radius)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub intrinsics: CameraIntrinsics,
    /// Camera frame expressed in the world (camera-to-world transform).
    pub camera_pose: Pose6Dof,
    pub objects: Vec<ObjectSpec>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |m: String| Err(SimError::InvalidScene(m));
        if self.width == 0 || self.height == 0 {
            return invalid("image dims must be positive".into());
        }
        self.intrinsics
            .validate()
            .map_err(|e| SimError::InvalidScene(e.to_string()))?;
        let mut labels = BTreeSet::new();
        for obj in &self.objects {
            if obj.parts.is_empty() {
                return invalid(format!("object {:?} has no parts", obj.label()));
            }
            let mut names = BTreeSet::new();
            for part in &obj.parts {
                part.shape.kind.validate().map_err(SimError::InvalidScene)?;
                if !names.insert(tokens(&part.name).join(" ")) {
                    return invalid(format!("object {:?} repeats part {:?}", obj.label(), part.name));
                }
            }
            if !labels.insert(obj.token_set()) {
                return invalid(format!("objects are not distinguishable: {:?}", obj.label()));
            }
        }
        for (i, a) in self.objects.iter().enumerate() {
            for b in &self.objects[i + 1..] {
                let ((ca, ra), (cb, rb)) = (a.bounding_sphere(), b.bounding_sphere());
                if (ca - cb).norm() < ra + rb {
                    return invalid(format!("{:?} and {:?} overlap", a.label(), b.label()));
                }
            }
        }
        Ok(())
    }

    /// Indices of objects matching `query` by token containment.
    pub fn find_objects(&self, query: &str) -> Vec<usize> {
        (0..self.objects.len())
            .filter(|i| self.objects[*i].matches(query))
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&SceneDoc::from_scene(self)).expect("scene serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let doc: SceneDoc = toml::from_str(text).map_err(|e| SimError::InvalidScene(e.to_string()))?;
        let scene = doc.into_scene()?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn read(path: &Path) -> Result<Self, SimError> {
        let bytes = read_file(path)?;
        let text = String::from_utf8(bytes).map_err(|e| SimError::InvalidScene(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| SimError::InvalidScene(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), SimError> {
        Ok(write_file(path, self.to_toml().as_bytes())?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    width: u32,
    height: u32,
    intrinsics: CameraIntrinsics,
    camera_pose: PoseDoc,
    #[serde(default)]
    objects: Vec<ObjectDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    name: String,
    #[serde(default)]
    tags: Vec<String>,
    pose: PoseDoc,
    parts: Vec<PartDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartDoc {
    name: String,
    pose: PoseDoc,
    shape: ShapeKind,
}

impl SceneDoc {
    fn from_scene(scene: &SceneSpec) -> Self {
        Self {
            width: scene.width,
            height: scene.height,
            intrinsics: scene.intrinsics,
            camera_pose: PoseDoc::from_pose(&scene.camera_pose),
            objects: scene
                .objects
                .iter()
                .map(|o| ObjectDoc {
                    name: o.name.clone(),
                    tags: o.tags.clone(),
                    pose: PoseDoc::from_pose(&o.pose),
                    parts: o
                        .parts
                        .iter()
                        .map(|p| PartDoc {
                            name: p.name.clone(),
                            pose: PoseDoc::from_pose(&p.shape.local_pose),
                            shape: p.shape.kind,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    fn into_scene(self) -> Result<SceneSpec, SimError> {
        Ok(SceneSpec {
            width: self.width,
            height: self.height,
            intrinsics: self.intrinsics,
            camera_pose: self.camera_pose.to_pose(Frame::World),
            objects: self
                .objects
                .into_iter()
                .map(|o| ObjectSpec {
                    name: o.name,
                    tags: o.tags,
                    pose: o.pose.to_pose(Frame::World),
                    parts: o
                        .parts
                        .into_iter()
                        .map(|p| PartSpec {
                            name: p.name,
                            shape: PrimitiveShape {
                                kind: p.shape,
                                local_pose: p.pose.to_pose(Frame::World),
                            },
                        })
                        .collect(),
                })
                .collect(),
        })
    }
}
