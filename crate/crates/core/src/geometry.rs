//! Poses, distances and the voxel workspace map.
//!
//! All lengths are meters. The world frame is y-up (gravity along -y).

use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the quaternion norm accepted by [`Pose::validate`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 1e-12 && n.is_finite() {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Quaternion stored as (w, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl From<[f64; 4]> for Quat {
    fn from(a: [f64; 4]) -> Self {
        Quat::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Quat> for [f64; 4] {
    fn from(q: Quat) -> Self {
        q.to_array()
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat::new(1.0, 0.0, 0.0, 0.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Quat {
        let Some(a) = axis.normalized() else {
            return Quat::IDENTITY;
        };
        let (s, c) = (libm::sin(angle * 0.5), libm::cos(angle * 0.5));
        Quat::new(c, a.x * s, a.y * s, a.z * s)
    }

    /// Rotation whose axis is the direction of `v` and angle is `|v|`.
    pub fn from_rotation_vector(v: Vec3) -> Quat {
        let angle = v.norm();
        if angle < 1e-15 {
            return Quat::IDENTITY;
        }
        Quat::from_axis_angle(v, angle)
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn dot(self, o: Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn normalized(self) -> Option<Quat> {
        let n = self.norm();
        if n > 1e-12 && n.is_finite() {
            Some(self.scale(1.0 / n))
        } else {
            None
        }
    }

    pub fn scale(self, s: f64) -> Quat {
        Quat::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn conjugate(self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("position is not finite")]
    NonFinitePosition,
    #[error("quaternion norm {0} is not within 1e-9 of 1")]
    NonUnitQuaternion(f64),
}

impl Pose {
    pub const fn new(position: Vec3, orientation: Quat) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub const fn from_position(position: Vec3) -> Self {
        Self::new(position, Quat::IDENTITY)
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        if !self.position.is_finite() {
            return Err(PoseError::NonFinitePosition);
        }
        let n = self.orientation.norm();
        if !(libm::fabs(n - 1.0) <= UNIT_NORM_TOLERANCE) {
            return Err(PoseError::NonUnitQuaternion(n));
        }
        Ok(())
    }

    /// Expresses a pose given in this pose's frame in the parent frame.
    pub fn compose(&self, local: &Pose) -> Pose {
        Pose::new(
            self.position + self.orientation.rotate(local.position),
            self.orientation * local.orientation,
        )
    }

    pub fn translated(&self, offset: Vec3) -> Pose {
        Pose::new(self.position + offset, self.orientation)
    }
}

/// Euclidean distance between the positions of two poses. Orientation is ignored.
pub fn point_distance(a: &Pose, b: &Pose) -> f64 {
    (a.position - b.position).norm()
}

/// Geodesic angle between two orientations, in degrees, in `[0, 180]`.
pub fn angular_distance(a: &Pose, b: &Pose) -> f64 {
    let d = libm::fabs(a.orientation.dot(b.orientation)).min(1.0);
    (2.0 * libm::acos(d)).to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VoxelIndex {
    pub ix: usize,
    pub iy: usize,
    pub iz: usize,
}

impl VoxelIndex {
    pub const fn new(ix: usize, iy: usize, iz: usize) -> Self {
        Self { ix, iy, iz }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelMap {
    pub origin: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("all map dimensions must be at least 1, got {0:?}")]
    BadDims([usize; 3]),
    #[error("map origin is not finite")]
    BadOrigin,
    #[error("point ({0}, {1}, {2}) lies outside the map volume")]
    OutOfBounds(f64, f64, f64),
}

impl VoxelMap {
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Result<Self, MapError> {
        let map = Self {
            origin,
            resolution,
            dims,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), MapError> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(MapError::BadResolution(self.resolution));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(MapError::BadDims(self.dims));
        }
        if !self.origin.is_finite() {
            return Err(MapError::BadOrigin);
        }
        Ok(())
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Upper corner of the map volume (exclusive).
    pub fn upper(&self) -> Vec3 {
        self.origin
            + Vec3::new(
                self.dims[0] as f64 * self.resolution,
                self.dims[1] as f64 * self.resolution,
                self.dims[2] as f64 * self.resolution,
            )
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.voxel_index(p).is_ok()
    }

    /// Voxel containing `p`; lower faces are inclusive, upper faces exclusive.
    pub fn voxel_index(&self, p: Vec3) -> Result<VoxelIndex, MapError> {
        let rel = p - self.origin;
        let mut idx = [0usize; 3];
        for (axis, (r, &dim)) in [rel.x, rel.y, rel.z].iter().zip(self.dims.iter()).enumerate() {
            let f = libm::floor(r / self.resolution);
            if !(f >= 0.0 && f < dim as f64) {
                return Err(MapError::OutOfBounds(p.x, p.y, p.z));
            }
            idx[axis] = f as usize;
        }
        Ok(VoxelIndex::new(idx[0], idx[1], idx[2]))
    }

    pub fn voxel_center(&self, v: VoxelIndex) -> Vec3 {
        let r = self.resolution;
        self.origin
            + Vec3::new(
                (v.ix as f64 + 0.5) * r,
                (v.iy as f64 + 0.5) * r,
                (v.iz as f64 + 0.5) * r,
            )
    }

    /// Every voxel in x-major, then y, then z order.
    pub fn voxels(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        let [nx, ny, nz] = self.dims;
        (0..nx).flat_map(move |ix| {
            (0..ny).flat_map(move |iy| (0..nz).map(move |iz| VoxelIndex::new(ix, iy, iz)))
        })
    }
}

/// All voxels sorted by distance from their center to the hand position,
/// ties broken by voxel index.
pub fn voxels_by_hand_proximity(map: &VoxelMap, hand: &Pose) -> Vec<VoxelIndex> {
    let mut keyed: Vec<(f64, VoxelIndex)> = map
        .voxels()
        .map(|v| ((map.voxel_center(v) - hand.position).norm(), v))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, v)| v).collect()
}
