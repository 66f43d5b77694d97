use serde::{Deserialize, Serialize};

use super::{GeometryError, Shape, Vec3};

/// Rotation given as a unit axis and an angle in radians (right-hand rule).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    pub axis: Vec3,
    pub angle: f64,
}

impl AxisAngle {
    pub const ZERO: AxisAngle = AxisAngle {
        axis: Vec3::Z,
        angle: 0.0,
    };

    pub fn new(axis: Vec3, angle: f64) -> Self {
        AxisAngle { axis, angle }
    }

    pub fn about_z(angle: f64) -> Self {
        AxisAngle::new(Vec3::Z, angle)
    }
}

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Quat {
    w: f64,
    v: Vec3,
}

impl Quat {
    const IDENTITY: Quat = Quat { w: 1.0, v: Vec3::ZERO };

    fn from_axis_angle(r: AxisAngle) -> Result<Quat, GeometryError> {
        if r.angle == 0.0 {
            return Ok(Quat::IDENTITY);
        }
        if !r.angle.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let axis = r
            .axis
            .normalized()
            .ok_or(GeometryError::DegenerateShape("rotation axis is zero".into()))?;
        let half = r.angle * 0.5;
        Ok(Quat {
            w: half.cos(),
            v: axis * half.sin(),
        })
    }

    fn to_axis_angle(self) -> AxisAngle {
        let s = self.v.norm();
        if s == 0.0 {
            return AxisAngle::ZERO;
        }
        AxisAngle::new(self.v * (1.0 / s), 2.0 * s.atan2(self.w))
    }

    /// `self * other`: apply `other` first.
    fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.v.dot(o.v),
            v: o.v * self.w + self.v * o.w + self.v.cross(o.v),
        }
    }

    fn rotate(self, p: Vec3) -> Vec3 {
        if self == Quat::IDENTITY {
            return p;
        }
        // p + 2w(v × p) + 2 v × (v × p)
        let t = self.v.cross(p) * 2.0;
        p + t * self.w + self.v.cross(t)
    }
}

/// Similarity transform: uniform scale, then rotation, then translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub translation: Vec3,
    pub rotation: AxisAngle,
    pub scale: f64,
}

impl Default for Similarity {
    fn default() -> Self {
        Similarity::IDENTITY
    }
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        translation: Vec3::ZERO,
        rotation: AxisAngle::ZERO,
        scale: 1.0,
    };

    pub fn translation(t: Vec3) -> Self {
        Similarity {
            translation: t,
            ..Similarity::IDENTITY
        }
    }

    pub fn rotation(r: AxisAngle) -> Self {
        Similarity {
            rotation: r,
            ..Similarity::IDENTITY
        }
    }

    pub fn scaling(s: f64) -> Self {
        Similarity {
            scale: s,
            ..Similarity::IDENTITY
        }
    }

    /// The transform equivalent to applying `self` first and then `after`.
    pub fn then(self, after: Similarity) -> Result<Similarity, GeometryError> {
        let q1 = Quat::from_axis_angle(self.rotation)?;
        let q2 = Quat::from_axis_angle(after.rotation)?;
        let q = q2.mul(q1);
        Ok(Similarity {
            translation: q2.rotate(self.translation * after.scale) + after.translation,
            rotation: q.to_axis_angle(),
            scale: self.scale * after.scale,
        })
    }

    pub fn apply_point(&self, p: Vec3) -> Result<Vec3, GeometryError> {
        Ok(Compiled::new(self)?.point(p))
    }
}

struct Compiled {
    q: Quat,
    scale: f64,
    translation: Vec3,
}

impl Compiled {
    fn new(t: &Similarity) -> Result<Self, GeometryError> {
        if !(t.scale > 0.0 && t.scale.is_finite()) {
            return Err(GeometryError::InvalidScale(t.scale));
        }
        if !t.translation.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        Ok(Compiled {
            q: Quat::from_axis_angle(t.rotation)?,
            scale: t.scale,
            translation: t.translation,
        })
    }

    fn point(&self, p: Vec3) -> Vec3 {
        let scaled = if self.scale == 1.0 { p } else { p * self.scale };
        let rotated = self.q.rotate(scaled);
        if self.translation == Vec3::ZERO {
            rotated
        } else {
            rotated + self.translation
        }
    }

    fn direction(&self, d: Vec3) -> Vec3 {
        self.q.rotate(d)
    }

    fn length(&self, l: f64) -> f64 {
        if self.scale == 1.0 {
            l
        } else {
            l * self.scale
        }
    }

    fn shape(&self, s: &Shape) -> Shape {
        match s {
            Shape::Point { pos } => Shape::Point {
                pos: self.point(*pos),
            },
            Shape::Polyline { vertices, closed } => Shape::Polyline {
                vertices: vertices.iter().map(|v| self.point(*v)).collect(),
                closed: *closed,
            },
            Shape::Ellipse {
                center,
                major_radius,
                minor_radius,
                normal,
                major_axis,
            } => Shape::Ellipse {
                center: self.point(*center),
                major_radius: self.length(*major_radius),
                minor_radius: self.length(*minor_radius),
                normal: self.direction(*normal),
                major_axis: self.direction(*major_axis),
            },
            Shape::Extrusion { profile, height } => Shape::Extrusion {
                profile: Box::new(self.shape(profile)),
                height: self.length(*height),
            },
            Shape::Loft { profiles } => Shape::Loft {
                profiles: profiles.iter().map(|p| self.shape(p)).collect(),
            },
            Shape::Sweep { profile, path } => Shape::Sweep {
                profile: Box::new(self.shape(profile)),
                path: Box::new(self.shape(path)),
            },
            Shape::Group { children } => Shape::Group {
                children: children.iter().map(|c| self.shape(c)).collect(),
            },
        }
    }
}

/// Applies scale, then rotation, then translation to every stored coordinate of `shape`.
///
/// The output has the same variant as the input; lengths (radii, heights) scale and
/// directions (normals, axes) rotate.
pub fn transform(
    shape: &Shape,
    translation: Vec3,
    rotation: AxisAngle,
    scale: f64,
) -> Result<Shape, GeometryError> {
    transform_by(
        shape,
        &Similarity {
            translation,
            rotation,
            scale,
        },
    )
}

pub fn transform_by(shape: &Shape, t: &Similarity) -> Result<Shape, GeometryError> {
    let compiled = Compiled::new(t)?;
    Ok(compiled.shape(shape))
}

/// Rotation that takes unit vector `from` onto unit vector `to` about their common normal.
pub(crate) fn rotation_between(from: Vec3, to: Vec3) -> AxisAngle {
    let axis = from.cross(to);
    let s = axis.norm();
    let c = from.dot(to);
    if s <= 1e-15 {
        if c > 0.0 {
            return AxisAngle::ZERO;
        }
        // Anti-parallel: any perpendicular axis works.
        let helper = if from.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        let perp = from.cross(helper).normalized().unwrap_or(Vec3::Z);
        return AxisAngle::new(perp, std::f64::consts::PI);
    }
    AxisAngle::new(axis * (1.0 / s), s.atan2(c))
}

pub(crate) fn compose_rotations(first: AxisAngle, second: AxisAngle) -> AxisAngle {
    match (Quat::from_axis_angle(first), Quat::from_axis_angle(second)) {
        (Ok(a), Ok(b)) => b.mul(a).to_axis_angle(),
        _ => AxisAngle::ZERO,
    }
}

pub(crate) fn rotate_vector(r: AxisAngle, v: Vec3) -> Vec3 {
    Quat::from_axis_angle(r).map(|q| q.rotate(v)).unwrap_or(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn quarter_turn_about_z_maps_x_to_y() {
        let p = Similarity::rotation(AxisAngle::about_z(FRAC_PI_2))
            .apply_point(Vec3::X)
            .unwrap();
        assert!(p.max_abs_diff(Vec3::Y) < 1e-15);
    }

    #[test]
    fn order_is_scale_rotate_translate() {
        let t = Similarity {
            translation: Vec3::new(10.0, 0.0, 0.0),
            rotation: AxisAngle::about_z(FRAC_PI_2),
            scale: 2.0,
        };
        let p = t.apply_point(Vec3::X).unwrap();
        assert!(p.max_abs_diff(Vec3::new(10.0, 2.0, 0.0)) < 1e-12);
    }

    #[test]
    fn then_matches_sequential_application() {
        let a = Similarity {
            translation: Vec3::new(1.0, -2.0, 0.5),
            rotation: AxisAngle::new(Vec3::new(1.0, 1.0, 0.0), 0.7),
            scale: 1.5,
        };
        let b = Similarity {
            translation: Vec3::new(-3.0, 0.25, 2.0),
            rotation: AxisAngle::new(Vec3::new(0.0, 1.0, 2.0), -1.1),
            scale: 0.4,
        };
        let p = Vec3::new(0.3, 0.9, -1.7);
        let seq = b.apply_point(a.apply_point(p).unwrap()).unwrap();
        let composed = a.then(b).unwrap().apply_point(p).unwrap();
        assert!(seq.max_abs_diff(composed) < 1e-12);
    }

    #[test]
    fn rejects_non_positive_scale() {
        let s = Shape::point(Vec3::ZERO).unwrap();
        assert!(matches!(
            transform(&s, Vec3::ZERO, AxisAngle::ZERO, 0.0),
            Err(GeometryError::InvalidScale(_))
        ));
    }

    #[test]
    fn rotation_between_handles_antiparallel() {
        let r = rotation_between(Vec3::Z, -Vec3::Z);
        assert!(rotate_vector(r, Vec3::Z).max_abs_diff(-Vec3::Z) < 1e-12);
    }
}
