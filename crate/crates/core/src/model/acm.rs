//! Allowed-collision matrix over the spheres of several arms.
//!
//! Object ids are global: the spheres of arm 0 come first (in model id
//! order), then arm 1, and so on. A pair is *allowed* (never checked) when
//! neither member belongs to a controlled arm, or when both sit on the same
//! controlled arm and their links are identical, adjacent, or listed as
//! never colliding.

use super::RobotModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArmRole {
    Controlled,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObjectInfo {
    pub arm: usize,
    pub link: usize,
    /// Sphere id inside the arm's model.
    pub local_id: usize,
    pub controlled: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllowedCollisionMatrix {
    objects: Vec<ObjectInfo>,
    arm_offsets: Vec<usize>,
    /// Row-major `objects.len()²`, true = skip.
    skip: Vec<bool>,
}

impl AllowedCollisionMatrix {
    pub fn build(arms: &[(&RobotModel, ArmRole)]) -> Self {
        let mut objects = Vec::new();
        let mut arm_offsets = Vec::with_capacity(arms.len());
        for (arm, (model, role)) in arms.iter().enumerate() {
            arm_offsets.push(objects.len());
            for (link, sphere) in model.spheres.iter() {
                objects.push(ObjectInfo { arm, link, local_id: sphere.id, controlled: *role == ArmRole::Controlled });
            }
        }
        let n = objects.len();
        let mut skip = vec![true; n * n];
        for a in 0..n {
            for b in (a + 1)..n {
                let (oa, ob) = (objects[a], objects[b]);
                let allowed = if !oa.controlled && !ob.controlled {
                    true
                } else if oa.arm == ob.arm {
                    let model = arms[oa.arm].0;
                    oa.link == ob.link
                        || model.links_adjacent(oa.link, ob.link)
                        || model.never_collide(oa.link, ob.link)
                } else {
                    false
                };
                skip[a * n + b] = allowed;
                skip[b * n + a] = allowed;
            }
        }
        Self { objects, arm_offsets, skip }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// True when the pair is never checked.
    #[inline]
    pub fn allowed(&self, a: usize, b: usize) -> bool {
        self.skip[a * self.objects.len() + b]
    }

    pub fn object(&self, id: usize) -> &ObjectInfo {
        &self.objects[id]
    }

    pub fn objects(&self) -> &[ObjectInfo] {
        &self.objects
    }

    /// Global id of the first sphere of `arm`.
    pub fn arm_offset(&self, arm: usize) -> usize {
        self.arm_offsets[arm]
    }

    pub fn num_arms(&self) -> usize {
        self.arm_offsets.len()
    }

    /// Number of unordered pairs that will be checked.
    pub fn checked_pairs(&self) -> usize {
        let n = self.objects.len();
        (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).filter(|&(a, b)| !self.allowed(a, b)).count()
    }
}

/// ACM for one controlled arm (arm 0) surrounded by external arms (1..).
pub fn build_acm(controlled: &RobotModel, externals: &[&RobotModel]) -> AllowedCollisionMatrix {
    let mut arms = vec![(controlled, ArmRole::Controlled)];
    arms.extend(externals.iter().map(|m| (*m, ArmRole::External)));
    AllowedCollisionMatrix::build(&arms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_robot_description;

    fn planar() -> RobotModel {
        parse_robot_description(crate::model::tests::PLANAR2).unwrap()
    }

    #[test]
    fn two_link_arm_only_adjacent_pair_is_skipped() {
        let m = planar();
        let acm = build_acm(&m, &[]);
        assert_eq!(acm.len(), 2);
        assert!(acm.allowed(0, 1));
        assert!(acm.allowed(0, 0));
        assert_eq!(acm.checked_pairs(), 0);
    }

    #[test]
    fn external_pairs_are_skipped_and_cross_pairs_checked() {
        let m = planar();
        let acm = build_acm(&m, &[&m, &m]);
        assert_eq!(acm.len(), 6);
        // arm 1 vs arm 2: both external
        assert!(acm.allowed(2, 4));
        assert!(acm.allowed(3, 5));
        // inside one external arm
        assert!(acm.allowed(2, 3));
        // controlled vs external
        assert!(!acm.allowed(0, 2));
        assert!(!acm.allowed(1, 5));
        assert_eq!(acm.checked_pairs(), 2 * 4);
    }
}
