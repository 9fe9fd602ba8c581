//! Sphere decomposition of collision primitives.
//!
//! Every primitive is replaced by spheres whose union contains the whole
//! primitive, not only its medial axis: capsules get centers spread over the
//! segment (endpoints included), boxes get centers at the midpoints of equal
//! cells along their longest side. Radii are inflated by the half-spacing so
//! the gaps between consecutive spheres are covered.

use nalgebra::{Isometry3, Point3, Vector3};
use serde::{Deserialize, Serialize};

/// Collision geometry of a link, in the primitive's own frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Primitive {
    Sphere {
        radius: f64,
    },
    /// Segment along local z from `-half_length` to `+half_length`, swept by `radius`.
    Capsule {
        radius: f64,
        half_length: f64,
    },
    /// Full side lengths.
    Box {
        size: [f64; 3],
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionPrimitive {
    pub shape: Primitive,
    /// Pose of the primitive in the link frame.
    pub pose: Isometry3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sphere {
    /// Center in the link frame (m).
    pub center: Vector3<f64>,
    pub radius: f64,
    /// Index unique within one robot model.
    pub id: usize,
}

/// Spheres of every link, indexed like the model's links.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SphereDecomposition {
    pub per_link: Vec<Vec<Sphere>>,
    pub max_per_link: usize,
}

impl SphereDecomposition {
    pub fn len(&self) -> usize {
        self.per_link.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(link index, sphere)` in id order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Sphere)> {
        self.per_link.iter().enumerate().flat_map(|(l, s)| s.iter().map(move |s| (l, s)))
    }
}

/// Centers and radius for one primitive, in the primitive frame.
fn primitive_spheres(shape: &Primitive, budget: usize) -> (Vec<Vector3<f64>>, f64) {
    let budget = budget.max(1);
    match *shape {
        Primitive::Sphere { radius } => (vec![Vector3::zeros()], radius),
        Primitive::Capsule { radius, half_length } => {
            if half_length <= 0.0 {
                return (vec![Vector3::zeros()], radius);
            }
            let wanted = (2.0 * half_length / radius).ceil() as usize + 1;
            let k = wanted.min(budget);
            if k == 1 {
                return (vec![Vector3::zeros()], radius + half_length);
            }
            let spacing = 2.0 * half_length / (k - 1) as f64;
            let centers = (0..k).map(|i| Vector3::new(0.0, 0.0, -half_length + spacing * i as f64)).collect();
            (centers, radius.hypot(0.5 * spacing))
        }
        Primitive::Box { size } => {
            let mut order = [0usize, 1, 2];
            order.sort_by(|&a, &b| size[b].total_cmp(&size[a]));
            let (long_axis, length) = (order[0], size[order[0]]);
            let section_radius = 0.5 * size[order[1]] * std::f64::consts::SQRT_2;
            let k = ((length / (2.0 * section_radius)).ceil() as usize).clamp(1, budget);
            let cell = length / k as f64;
            let centers = (0..k)
                .map(|i| {
                    let mut c = Vector3::zeros();
                    c[long_axis] = -0.5 * length + cell * (i as f64 + 0.5);
                    c
                })
                .collect();
            (centers, section_radius.hypot(0.5 * cell))
        }
    }
}

/// Spheres for one link's primitives, expressed in the link frame.
///
/// `max_per_link` is shared evenly between the link's primitives (each gets at
/// least one sphere). Ids are assigned sequentially starting at `first_id`.
pub fn decompose_link_spheres(primitives: &[CollisionPrimitive], max_per_link: usize, first_id: usize) -> Vec<Sphere> {
    if primitives.is_empty() {
        return Vec::new();
    }
    let budget = (max_per_link / primitives.len()).max(1);
    let mut out = Vec::new();
    for p in primitives {
        let (centers, radius) = primitive_spheres(&p.shape, budget);
        for c in centers {
            out.push(Sphere {
                center: p.pose.transform_point(&Point3::from(c)).coords,
                radius,
                id: first_id + out.len(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn at_origin(shape: Primitive) -> [CollisionPrimitive; 1] {
        [CollisionPrimitive { shape, pose: Isometry3::identity() }]
    }

    #[test]
    fn sphere_passes_through() {
        let s = decompose_link_spheres(&at_origin(Primitive::Sphere { radius: 0.05 }), 3, 0);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].radius, 0.05);
        assert_eq!(s[0].center, Vector3::zeros());
    }

    #[test]
    fn capsule_centers_are_evenly_spaced_over_the_segment() {
        let cap = Primitive::Capsule { radius: 0.05, half_length: 0.1 };
        let s = decompose_link_spheres(&at_origin(cap), 3, 7);
        let z: Vec<f64> = s.iter().map(|s| s.center.z).collect();
        assert_eq!(z, vec![-0.1, 0.0, 0.1]);
        assert_eq!(s.iter().map(|s| s.id).collect::<Vec<_>>(), vec![7, 8, 9]);
        // spacing 0.1 leaves a 0.05 axial gap, covered by hypot(0.05, 0.05)
        assert_relative_eq!(s[0].radius, 0.05f64.hypot(0.05), epsilon = 1e-15);
    }

    #[test]
    fn short_capsule_needs_no_truncation() {
        let cap = Primitive::Capsule { radius: 0.05, half_length: 0.02 };
        let s = decompose_link_spheres(&at_origin(cap), 8, 0);
        // ceil(0.04 / 0.05) + 1 = 2 spheres at the segment ends
        assert_eq!(s.len(), 2);
        assert_relative_eq!(s[0].radius, 0.05f64.hypot(0.02), epsilon = 1e-15);
    }

    #[test]
    fn box_spheres_lie_along_the_longest_side() {
        let b = Primitive::Box { size: [0.2, 0.06, 0.04] };
        let s = decompose_link_spheres(&at_origin(b), 3, 0);
        assert_eq!(s.len(), 3);
        for sp in &s {
            assert_eq!(sp.center.y, 0.0);
            assert_eq!(sp.center.z, 0.0);
        }
        let section = 0.03 * std::f64::consts::SQRT_2;
        assert_relative_eq!(s[0].radius, section.hypot(0.2 / 6.0), epsilon = 1e-15);
        assert!(s[0].radius >= section);
    }

    #[test]
    fn primitive_pose_moves_centers() {
        let p = CollisionPrimitive {
            shape: Primitive::Sphere { radius: 0.1 },
            pose: Isometry3::translation(0.0, 0.0, 0.3),
        };
        let s = decompose_link_spheres(&[p], 3, 0);
        assert_eq!(s[0].center, Vector3::new(0.0, 0.0, 0.3));
    }

    #[test]
    fn budget_is_shared_between_primitives() {
        let cap = CollisionPrimitive {
            shape: Primitive::Capsule { radius: 0.01, half_length: 0.5 },
            pose: Isometry3::identity(),
        };
        let s = decompose_link_spheres(&[cap, cap], 6, 0);
        assert_eq!(s.len(), 6);
    }
}
