//! Small rigid-body algebra generic over [`Scalar`].
//!
//! nalgebra is used at the public `f64` boundary; these types exist so the
//! same chain code runs on [`crate::ad::Jet`].

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::ad::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct V3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Scalar> V3<S> {
    pub fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    pub fn cst(v: &Vector3<f64>) -> Self {
        Self::new(S::cst(v.x), S::cst(v.y), S::cst(v.z))
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn dot(&self, o: &Self) -> S {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_squared(&self) -> S {
        self.dot(self)
    }

    pub fn scale(&self, k: S) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn value(&self) -> Vector3<f64> {
        Vector3::new(self.x.value(), self.y.value(), self.z.value())
    }
}

/// Row-major 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct M3<S> {
    pub m: [[S; 3]; 3],
}

impl<S: Scalar> M3<S> {
    pub fn identity() -> Self {
        let (o, z) = (S::cst(1.0), S::zero());
        Self { m: [[o, z, z], [z, o, z], [z, z, o]] }
    }

    pub fn cst(r: &Matrix3<f64>) -> Self {
        let mut m = [[S::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = S::cst(r[(i, j)]);
            }
        }
        Self { m }
    }

    /// Rotation by `angle` about the unit `axis` (Rodrigues).
    pub fn axis_angle(axis: &Vector3<f64>, angle: S) -> Self {
        let (s, c) = (angle.sin(), angle.cos());
        let t = S::cst(1.0) - c;
        let (x, y, z) = (axis.x, axis.y, axis.z);
        Self {
            m: [
                [c + t.scale(x * x), t.scale(x * y) - s.scale(z), t.scale(x * z) + s.scale(y)],
                [t.scale(x * y) + s.scale(z), c + t.scale(y * y), t.scale(y * z) - s.scale(x)],
                [t.scale(x * z) - s.scale(y), t.scale(y * z) + s.scale(x), c + t.scale(z * z)],
            ],
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut m = [[S::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        Self { m }
    }

    pub fn mul_vec(&self, v: &V3<S>) -> V3<S> {
        let r = &self.m;
        V3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> Self {
        let r = &self.m;
        Self { m: [[r[0][0], r[1][0], r[2][0]], [r[0][1], r[1][1], r[2][1]], [r[0][2], r[1][2], r[2][2]]] }
    }

    pub fn value(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.m[i][j].value())
    }
}

/// Rigid transform `x -> rot * x + pos`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame<S> {
    pub rot: M3<S>,
    pub pos: V3<S>,
}

impl<S: Scalar> Frame<S> {
    pub fn identity() -> Self {
        Self { rot: M3::identity(), pos: V3::zero() }
    }

    pub fn cst(iso: &Isometry3<f64>) -> Self {
        Self { rot: M3::cst(iso.rotation.to_rotation_matrix().matrix()), pos: V3::cst(&iso.translation.vector) }
    }

    pub fn compose(&self, o: &Self) -> Self {
        Self { rot: self.rot.mul(&o.rot), pos: self.rot.mul_vec(&o.pos).add(&self.pos) }
    }

    /// `self` followed by a pure rotation.
    pub fn rotate(&self, r: &M3<S>) -> Self {
        Self { rot: self.rot.mul(r), pos: self.pos }
    }

    pub fn apply(&self, p: &V3<S>) -> V3<S> {
        self.rot.mul_vec(p).add(&self.pos)
    }

    pub fn value(&self) -> Isometry3<f64> {
        let rot = Rotation3::from_matrix_unchecked(self.rot.value());
        Isometry3::from_parts(Translation3::from(self.pos.value()), UnitQuaternion::from_rotation_matrix(&rot))
    }
}

/// Rotation vector (axis times angle, angle in `[0, pi]`) of a rotation matrix.
///
/// Goes through the quaternion so the result stays differentiable near the
/// identity, where the axis is undefined.
pub fn rotation_vector<S: Scalar>(r: &M3<S>) -> V3<S> {
    let m = &r.m;
    let one = S::cst(1.0);
    let quarter = S::cst(0.25);
    let (t00, t11, t22) = (m[0][0].value(), m[1][1].value(), m[2][2].value());
    let trace = t00 + t11 + t22;
    // Shepperd: pick the numerically largest quaternion component.
    let (w, x, y, z) = if trace > t00.max(t11).max(t22) {
        let s = (one + m[0][0] + m[1][1] + m[2][2]).sqrt().scale(2.0);
        (quarter * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s)
    } else if t00 >= t11 && t00 >= t22 {
        let s = (one + m[0][0] - m[1][1] - m[2][2]).sqrt().scale(2.0);
        ((m[2][1] - m[1][2]) / s, quarter * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s)
    } else if t11 >= t22 {
        let s = (one + m[1][1] - m[0][0] - m[2][2]).sqrt().scale(2.0);
        ((m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, quarter * s, (m[1][2] + m[2][1]) / s)
    } else {
        let s = (one + m[2][2] - m[0][0] - m[1][1]).sqrt().scale(2.0);
        ((m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, quarter * s)
    };
    quaternion_log(w, x, y, z)
}

/// Rotation vector of a (not necessarily hemisphere-normalized) unit quaternion.
pub fn quaternion_log<S: Scalar>(w: S, x: S, y: S, z: S) -> V3<S> {
    let (w, x, y, z) = if w.value() < 0.0 { (-w, -x, -y, -z) } else { (w, x, y, z) };
    let s2 = x * x + y * y + z * z;
    // angle = 2 atan2(s, w); factor = angle / s
    let factor = if s2.value() < 1e-12 {
        // 2/w * (1 - s^2 / (3 w^2)), the even series of 2 atan(s/w) / s
        let w2 = w * w;
        (S::cst(1.0) - s2 / (w2.scale(3.0))).scale(2.0) / w
    } else {
        let s = s2.sqrt();
        s.atan2(w).scale(2.0) / s
    };
    V3::new(x * factor, y * factor, z * factor)
}

/// Serialized pose `{xyz, rpy}`; rpy is fixed-axis roll, pitch, yaw.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct XyzRpy {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl XyzRpy {
    pub fn to_isometry(&self) -> Isometry3<f64> {
        let [x, y, z] = self.xyz;
        let [r, p, yaw] = self.rpy;
        Isometry3::from_parts(Translation3::new(x, y, z), UnitQuaternion::from_euler_angles(r, p, yaw))
    }
}
