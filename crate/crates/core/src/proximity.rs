//! Active collision pairs: ACM filtering, sort-and-sweep over inflated boxes,
//! then exact sphere gaps.
//!
//! A scene is a list of [`WorldSphere`]s indexed by global object id, so
//! `scene[i].object == i` and ids line up with the ACM.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::WorldSphere;
use crate::model::AllowedCollisionMatrix;

pub const DEFAULT_ACTIVATION_DISTANCE: f64 = 0.15;
pub const DEFAULT_INFLATION: f64 = 0.15;
pub const DEFAULT_MAX_PAIRS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= o.max[k] && o.min[k] <= self.max[k])
    }

    pub fn contains_sphere(&self, center: &Vector3<f64>, radius: f64) -> bool {
        (0..3).all(|k| self.min[k] <= center[k] - radius && center[k] + radius <= self.max[k])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ActivePair {
    /// Object on a controlled arm.
    pub id_a: usize,
    pub id_b: usize,
    pub center_a: Vector3<f64>,
    pub center_b: Vector3<f64>,
    pub r_a: f64,
    pub r_b: f64,
    /// Center distance.
    pub d_ab: f64,
    /// `d_ab - r_a - r_b`, negative when penetrating.
    pub gap: f64,
}

pub fn sphere_gap(ca: &Vector3<f64>, ra: f64, cb: &Vector3<f64>, rb: f64) -> f64 {
    (ca - cb).norm() - ra - rb
}

pub fn compute_aabbs(spheres: &[WorldSphere], inflation: f64) -> Result<Vec<Aabb>> {
    if !(inflation >= 0.0) {
        return Err(Error::param("inflation", format!("must be non-negative, got {inflation}")));
    }
    Ok(spheres
        .iter()
        .map(|s| {
            let h = Vector3::repeat(s.radius + inflation);
            Aabb { min: s.center - h, max: s.center + h }
        })
        .collect())
}

/// Object-id pairs whose boxes overlap and which the ACM does not skip.
///
/// Sweeps along x, then tests y and z. The first member of every returned
/// pair belongs to a controlled arm; pairs come back sorted.
pub fn broad_phase(boxes: &[Aabb], acm: &AllowedCollisionMatrix) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[a].min.x.total_cmp(&boxes[b].min.x).then(a.cmp(&b)));
    let mut out = Vec::new();
    for (k, &a) in order.iter().enumerate() {
        for &b in &order[k + 1..] {
            if boxes[b].min.x > boxes[a].max.x {
                break;
            }
            if acm.allowed(a, b) || !boxes[a].overlaps(&boxes[b]) {
                continue;
            }
            let (a, b) = orient(acm, a, b);
            out.push((a, b));
        }
    }
    out.sort_unstable();
    out
}

/// Puts the controlled member first; lower id first when both are controlled.
fn orient(acm: &AllowedCollisionMatrix, a: usize, b: usize) -> (usize, usize) {
    let (ca, cb) = (acm.object(a).controlled, acm.object(b).controlled);
    if ca == cb {
        (a.min(b), a.max(b))
    } else if ca {
        (a, b)
    } else {
        (b, a)
    }
}

/// Exact gaps for candidate pairs, sorted by ascending gap (ties by ids).
pub fn narrow_phase(pairs: &[(usize, usize)], scene: &[WorldSphere]) -> Vec<ActivePair> {
    let mut out: Vec<ActivePair> = pairs
        .iter()
        .map(|&(a, b)| {
            let (sa, sb) = (&scene[a], &scene[b]);
            let d_ab = (sa.center - sb.center).norm();
            ActivePair {
                id_a: a,
                id_b: b,
                center_a: sa.center,
                center_b: sb.center,
                r_a: sa.radius,
                r_b: sb.radius,
                d_ab,
                gap: d_ab - sa.radius - sb.radius,
            }
        })
        .collect();
    out.sort_by(|p, q| p.gap.total_cmp(&q.gap).then((p.id_a, p.id_b).cmp(&(q.id_a, q.id_b))));
    out
}

/// Keeps pairs with `gap <= activation_distance`, at most `max_pairs` of the
/// smallest gaps. Input must already be sorted by gap.
pub fn select_active_pairs(pairs: &[ActivePair], activation_distance: f64, max_pairs: usize) -> Vec<ActivePair> {
    pairs.iter().take_while(|p| p.gap <= activation_distance).take(max_pairs).copied().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProximityConfig {
    pub activation_distance: f64,
    pub inflation: f64,
    pub max_pairs: usize,
}

impl Default for ProximityConfig {
    fn default() -> Self {
        Self {
            activation_distance: DEFAULT_ACTIVATION_DISTANCE,
            inflation: DEFAULT_INFLATION,
            max_pairs: DEFAULT_MAX_PAIRS,
        }
    }
}

impl ProximityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.activation_distance >= 0.0) {
            return Err(Error::Config("activation_distance must be non-negative".into()));
        }
        // boxes inflated by less than the activation distance could hide active pairs
        if !(self.inflation >= self.activation_distance) {
            return Err(Error::Config(format!(
                "inflation {} is below activation_distance {}",
                self.inflation, self.activation_distance
            )));
        }
        Ok(())
    }

    /// Full pipeline over a scene indexed by object id.
    pub fn active_pairs(&self, scene: &[WorldSphere], acm: &AllowedCollisionMatrix) -> Result<Vec<ActivePair>> {
        self.validate()?;
        check_scene(scene, acm)?;
        let boxes = compute_aabbs(scene, self.inflation)?;
        let candidates = broad_phase(&boxes, acm);
        Ok(select_active_pairs(&narrow_phase(&candidates, scene), self.activation_distance, self.max_pairs))
    }
}

pub(crate) fn check_scene(scene: &[WorldSphere], acm: &AllowedCollisionMatrix) -> Result<()> {
    if scene.len() != acm.len() {
        return Err(Error::Dimension { expected: acm.len(), got: scene.len() });
    }
    if let Some((i, s)) = scene.iter().enumerate().find(|(i, s)| s.object != *i) {
        return Err(Error::Config(format!("scene entry {i} carries object id {}", s.object)));
    }
    Ok(())
}
