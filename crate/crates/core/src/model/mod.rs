//! Robot descriptions and the immutable kinematic/collision model built from them.
//!
//! A description is a JSON document:
//!
//! ```json
//! {
//!   "name": "planar2",
//!   "joints": [
//!     { "name": "j1", "kind": "revolute", "axis": [0, 0, 1],
//!       "origin": { "xyz": [0, 0, 0], "rpy": [0, 0, 0] },
//!       "limits": { "pos": [-3.14, 3.14], "vel": 2.0, "acc": 5.0 } }
//!   ],
//!   "links": [
//!     { "name": "base", "parent_joint": null },
//!     { "name": "l1", "parent_joint": "j1",
//!       "collision": [ { "type": "capsule", "dims": [0.05, 0.25],
//!                        "pose": { "xyz": [0.25, 0, 0], "rpy": [0, 1.5708, 0] } } ] }
//!   ],
//!   "end_effector": "l1",
//!   "never_collide": [["l1", "l3"]]
//! }
//! ```
//!
//! Collision `dims` are `[radius]` for spheres, `[radius, half_length]` for
//! capsules (axis along the primitive's z) and `[x, y, z]` full side lengths
//! for boxes. A joint may name its parent link with `"parent"`; otherwise it
//! hangs off the child link of the previous joint in the list (or the root).

mod acm;
mod spheres;

use std::collections::HashMap;

use nalgebra::{Isometry3, Unit, Vector3};
use serde::Deserialize;

pub use acm::{build_acm, AllowedCollisionMatrix, ArmRole, ObjectInfo};
pub use spheres::{decompose_link_spheres, CollisionPrimitive, Primitive, Sphere, SphereDecomposition};

use crate::error::{Error, Result};
use crate::geom::XyzRpy;

/// Sphere budget per link used unless a caller asks for another resolution.
pub const DEFAULT_MAX_SPHERES_PER_LINK: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
    /// rad/s
    pub velocity: f64,
    /// rad/s²
    pub acceleration: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub axis: Unit<Vector3<f64>>,
    /// Transform from the parent link frame to the joint frame at zero angle.
    pub origin: Isometry3<f64>,
    /// `None` for fixed joints.
    pub limits: Option<JointLimits>,
    pub parent_link: usize,
    pub child_link: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkSpec {
    pub name: String,
    /// Index into [`RobotModel::joints`]; `None` for the root.
    pub parent_joint: Option<usize>,
    pub collision: Vec<CollisionPrimitive>,
}

/// Parsed, validated robot. Joints and links are stored in chain order
/// (root link first, joint `k` connects link `k` to link `k + 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    pub name: String,
    pub joints: Vec<JointSpec>,
    pub links: Vec<LinkSpec>,
    pub spheres: SphereDecomposition,
    pub end_effector: usize,
    /// Link index pairs (lower first) that never need checking.
    pub never_collide: Vec<(usize, usize)>,
    /// Joint index of every actuated (revolute) joint, in order.
    actuated: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptionDoc {
    name: String,
    joints: Vec<JointDoc>,
    links: Vec<LinkDoc>,
    end_effector: String,
    #[serde(default)]
    never_collide: Vec<[String; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    name: String,
    kind: JointKind,
    #[serde(default)]
    parent: Option<String>,
    #[serde(default)]
    axis: Option<[f64; 3]>,
    #[serde(default)]
    origin: XyzRpy,
    #[serde(default)]
    limits: Option<LimitsDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitsDoc {
    pos: [f64; 2],
    vel: f64,
    acc: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    name: String,
    parent_joint: Option<String>,
    #[serde(default)]
    collision: Vec<PrimitiveDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PrimitiveDoc {
    #[serde(rename = "type")]
    kind: PrimitiveKind,
    dims: Vec<f64>,
    #[serde(default)]
    pose: XyzRpy,
}

#[derive(Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum PrimitiveKind {
    Sphere,
    Capsule,
    Box,
}

/// Parses a robot description with the default sphere budget.
pub fn parse_robot_description(text: &str) -> Result<RobotModel> {
    RobotModel::parse(text, DEFAULT_MAX_SPHERES_PER_LINK)
}

impl RobotModel {
    pub fn parse(text: &str, max_per_link: usize) -> Result<Self> {
        if max_per_link == 0 {
            return Err(Error::param("max_per_link", "must be at least 1"));
        }
        let doc: DescriptionDoc = serde_json::from_str(text).map_err(Error::from_json)?;
        build(doc, max_per_link)
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, DEFAULT_MAX_SPHERES_PER_LINK)
    }

    /// Same robot with its spheres regenerated at another resolution.
    pub fn with_max_spheres(&self, max_per_link: usize) -> Self {
        let mut out = self.clone();
        out.spheres = decompose_all(&self.links, max_per_link);
        out
    }

    /// Number of actuated joints.
    pub fn dof(&self) -> usize {
        self.actuated.len()
    }

    /// Actuated joints in joint-vector order.
    pub fn actuated_joints(&self) -> impl Iterator<Item = &JointSpec> {
        self.actuated.iter().map(|&j| &self.joints[j])
    }

    pub fn limits(&self) -> Vec<JointLimits> {
        self.actuated_joints().map(|j| j.limits.expect("revolute joints carry limits")).collect()
    }

    pub fn lower_bounds(&self) -> Vec<f64> {
        self.limits().iter().map(|l| l.lower).collect()
    }

    pub fn upper_bounds(&self) -> Vec<f64> {
        self.limits().iter().map(|l| l.upper).collect()
    }

    /// Center of every joint's position range.
    pub fn center_configuration(&self) -> Vec<f64> {
        self.limits().iter().map(|l| 0.5 * (l.lower + l.upper)).collect()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    /// True when one link is the direct parent of the other.
    pub fn links_adjacent(&self, a: usize, b: usize) -> bool {
        let parent_of = |l: usize| self.links[l].parent_joint.map(|j| self.joints[j].parent_link);
        parent_of(a) == Some(b) || parent_of(b) == Some(a)
    }

    pub fn never_collide(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.never_collide.contains(&key)
    }
}

fn decompose_all(links: &[LinkSpec], max_per_link: usize) -> SphereDecomposition {
    let mut per_link = Vec::with_capacity(links.len());
    let mut next = 0;
    for link in links {
        let spheres = decompose_link_spheres(&link.collision, max_per_link, next);
        next += spheres.len();
        per_link.push(spheres);
    }
    SphereDecomposition { per_link, max_per_link }
}

fn build(doc: DescriptionDoc, max_per_link: usize) -> Result<RobotModel> {
    let mut link_by_name = HashMap::new();
    for (i, l) in doc.links.iter().enumerate() {
        if link_by_name.insert(l.name.as_str(), i).is_some() {
            return Err(Error::semantic(format!("links[{i}].name"), format!("duplicate link {:?}", l.name)));
        }
    }
    let mut joint_by_name = HashMap::new();
    for (i, j) in doc.joints.iter().enumerate() {
        if joint_by_name.insert(j.name.as_str(), i).is_some() {
            return Err(Error::semantic(format!("joints[{i}].name"), format!("duplicate joint {:?}", j.name)));
        }
    }

    // child link of every joint
    let mut child_of_joint: Vec<Option<usize>> = vec![None; doc.joints.len()];
    let mut root = None;
    for (i, l) in doc.links.iter().enumerate() {
        match &l.parent_joint {
            None => {
                if root.replace(i).is_some() {
                    return Err(Error::semantic(format!("links[{i}].parent_joint"), "more than one root link"));
                }
            }
            Some(jn) => {
                let j = *joint_by_name.get(jn.as_str()).ok_or_else(|| {
                    Error::semantic(format!("links[{i}].parent_joint"), format!("unknown joint {jn:?}"))
                })?;
                if child_of_joint[j].replace(i).is_some() {
                    return Err(Error::semantic(
                        format!("links[{i}].parent_joint"),
                        format!("joint {jn:?} already has a child link"),
                    ));
                }
            }
        }
    }
    let root = root.ok_or_else(|| Error::semantic("links", "no root link (cycle in link graph)"))?;
    for (j, c) in child_of_joint.iter().enumerate() {
        if c.is_none() {
            return Err(Error::semantic(format!("joints[{j}]"), "joint has no child link"));
        }
    }

    // parent link of every joint
    let mut parent_of_joint = Vec::with_capacity(doc.joints.len());
    for (j, jd) in doc.joints.iter().enumerate() {
        let p = match &jd.parent {
            Some(name) => *link_by_name
                .get(name.as_str())
                .ok_or_else(|| Error::semantic(format!("joints[{j}].parent"), format!("unknown link {name:?}")))?,
            None if j == 0 => root,
            None => child_of_joint[j - 1].expect("checked above"),
        };
        parent_of_joint.push(p);
    }

    // walk the chain from the root
    let mut joint_order = Vec::with_capacity(doc.joints.len());
    let mut link_order = vec![root];
    let mut visited = vec![false; doc.links.len()];
    visited[root] = true;
    let mut current = root;
    loop {
        let mut next = (0..doc.joints.len()).filter(|&j| parent_of_joint[j] == current);
        let Some(j) = next.next() else { break };
        if next.next().is_some() {
            return Err(Error::semantic(
                format!("links[{current}]"),
                format!(
                    "link {:?} has several child joints; only serial chains are supported",
                    doc.links[current].name
                ),
            ));
        }
        let child = child_of_joint[j].expect("checked above");
        if visited[child] {
            return Err(Error::semantic(format!("joints[{j}]"), "cycle in link graph"));
        }
        visited[child] = true;
        joint_order.push(j);
        link_order.push(child);
        current = child;
    }
    if link_order.len() != doc.links.len() {
        let missing = visited.iter().position(|v| !v).expect("some link unvisited");
        return Err(Error::semantic(
            format!("links[{missing}]"),
            format!("link {:?} is not reachable from the root (cycle in link graph)", doc.links[missing].name),
        ));
    }

    let mut new_link_index = vec![0; doc.links.len()];
    for (new, &old) in link_order.iter().enumerate() {
        new_link_index[old] = new;
    }
    let mut new_joint_index = vec![0; doc.joints.len()];
    for (new, &old) in joint_order.iter().enumerate() {
        new_joint_index[old] = new;
    }

    let mut joints = Vec::with_capacity(doc.joints.len());
    let mut actuated = Vec::new();
    for (new, &old) in joint_order.iter().enumerate() {
        let jd = &doc.joints[old];
        let field = |f: &str| format!("joints[{old}].{f}");
        let axis = match (jd.kind, jd.axis) {
            (_, Some(a)) => {
                let v = Vector3::from(a);
                let norm = v.norm();
                if norm < 1e-12 || !norm.is_finite() {
                    return Err(Error::semantic(field("axis"), "zero-norm axis"));
                }
                Unit::new_normalize(v)
            }
            (JointKind::Revolute, None) => return Err(Error::semantic(field("axis"), "revolute joint needs an axis")),
            (JointKind::Fixed, None) => Vector3::z_axis(),
        };
        let limits = match (jd.kind, &jd.limits) {
            (JointKind::Revolute, Some(l)) => {
                let [lower, upper] = l.pos;
                if !(lower < upper) {
                    return Err(Error::semantic(field("limits.pos"), format!("degenerate limits [{lower}, {upper}]")));
                }
                if !(l.vel > 0.0) || !(l.acc > 0.0) {
                    return Err(Error::semantic(field("limits"), "velocity and acceleration limits must be positive"));
                }
                actuated.push(new);
                Some(JointLimits { lower, upper, velocity: l.vel, acceleration: l.acc })
            }
            (JointKind::Revolute, None) => return Err(Error::semantic(field("limits"), "revolute joint needs limits")),
            (JointKind::Fixed, Some(_)) => {
                return Err(Error::semantic(field("limits"), "fixed joints carry no limits"))
            }
            (JointKind::Fixed, None) => None,
        };
        joints.push(JointSpec {
            name: jd.name.clone(),
            kind: jd.kind,
            axis,
            origin: jd.origin.to_isometry(),
            limits,
            parent_link: new_link_index[parent_of_joint[old]],
            child_link: new_link_index[child_of_joint[old].expect("checked above")],
        });
    }

    let mut links = Vec::with_capacity(doc.links.len());
    for &old in &link_order {
        let ld = &doc.links[old];
        let mut collision = Vec::with_capacity(ld.collision.len());
        for (p, pd) in ld.collision.iter().enumerate() {
            let field = format!("links[{old}].collision[{p}].dims");
            let positive = |d: &[f64]| d.iter().all(|&x| x > 0.0 && x.is_finite());
            let shape = match (pd.kind, pd.dims.as_slice()) {
                (PrimitiveKind::Sphere, &[r]) if positive(&[r]) => Primitive::Sphere { radius: r },
                (PrimitiveKind::Capsule, &[r, h]) if positive(&[r]) && h >= 0.0 => {
                    Primitive::Capsule { radius: r, half_length: h }
                }
                (PrimitiveKind::Box, &[x, y, z]) if positive(&[x, y, z]) => Primitive::Box { size: [x, y, z] },
                _ => return Err(Error::semantic(field, "wrong number of dimensions or non-positive size")),
            };
            collision.push(CollisionPrimitive { shape, pose: pd.pose.to_isometry() });
        }
        links.push(LinkSpec {
            name: ld.name.clone(),
            parent_joint: ld.parent_joint.as_ref().map(|n| new_joint_index[joint_by_name[n.as_str()]]),
            collision,
        });
    }

    let end_effector = *link_by_name
        .get(doc.end_effector.as_str())
        .ok_or_else(|| Error::semantic("end_effector", format!("unknown link {:?}", doc.end_effector)))?;

    let mut never_collide = Vec::with_capacity(doc.never_collide.len());
    for (i, [a, b]) in doc.never_collide.iter().enumerate() {
        let look = |n: &String| {
            link_by_name
                .get(n.as_str())
                .map(|&l| new_link_index[l])
                .ok_or_else(|| Error::semantic(format!("never_collide[{i}]"), format!("unknown link {n:?}")))
        };
        let (a, b) = (look(a)?, look(b)?);
        never_collide.push((a.min(b), a.max(b)));
    }
    never_collide.sort_unstable();
    never_collide.dedup();

    if actuated.len() > crate::ad::MAX_VARS {
        return Err(Error::semantic(
            "joints",
            format!("at most {} actuated joints are supported", crate::ad::MAX_VARS),
        ));
    }

    let spheres = decompose_all(&links, max_per_link);
    Ok(RobotModel {
        name: doc.name,
        joints,
        links,
        spheres,
        end_effector: new_link_index[end_effector],
        never_collide,
        actuated,
    })
}
