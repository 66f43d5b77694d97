use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Maximum nesting depth of [`Shape::Group`] values.
pub const MAX_GROUP_DEPTH: usize = 16;

const UNIT_TOLERANCE: f64 = 1e-9;
const PLANARITY_FACTOR: f64 = 1e-6;

/// The geometric value universe.
///
/// Shapes are plain immutable values; every constructor validates the invariants of the
/// variant it builds, and [`Shape::validate`] re-checks a value that arrived from outside
/// (JSON, the interpreter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Point {
        pos: Vec3,
    },
    Polyline {
        vertices: Vec<Vec3>,
        closed: bool,
    },
    /// An ellipse in the plane through `center` with unit `normal`.
    ///
    /// `major_axis` is the unit in-plane direction of the major radius; the minor axis is
    /// `normal × major_axis`.
    Ellipse {
        center: Vec3,
        major_radius: f64,
        minor_radius: f64,
        normal: Vec3,
        major_axis: Vec3,
    },
    /// The profile pushed along its own plane normal by `height`.
    Extrusion {
        profile: Box<Shape>,
        height: f64,
    },
    Loft {
        profiles: Vec<Shape>,
    },
    Sweep {
        profile: Box<Shape>,
        path: Box<Shape>,
    },
    Group {
        children: Vec<Shape>,
    },
}

impl Shape {
    pub fn point(pos: Vec3) -> Result<Shape, GeometryError> {
        let s = Shape::Point { pos };
        s.validate()?;
        Ok(s)
    }

    pub fn polyline(vertices: Vec<Vec3>) -> Result<Shape, GeometryError> {
        let s = Shape::Polyline {
            vertices,
            closed: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn closed_polyline(vertices: Vec<Vec3>) -> Result<Shape, GeometryError> {
        let s = Shape::Polyline {
            vertices,
            closed: true,
        };
        s.validate()?;
        Ok(s)
    }

    /// Axis-aligned rectangle in the XY plane with `corner` as its minimum corner,
    /// wound counter-clockwise seen from +Z.
    pub fn rect(corner: Vec3, width: f64, depth: f64) -> Result<Shape, GeometryError> {
        if !(width > 0.0 && depth > 0.0) {
            return Err(GeometryError::DegenerateShape(format!(
                "rectangle sides must be positive, got {width} x {depth}"
            )));
        }
        Shape::closed_polyline(vec![
            corner,
            corner + Vec3::new(width, 0.0, 0.0),
            corner + Vec3::new(width, depth, 0.0),
            corner + Vec3::new(0.0, depth, 0.0),
        ])
    }

    /// Ellipse in the plane parallel to XY, major axis along +X.
    pub fn ellipse(center: Vec3, major_radius: f64, minor_radius: f64) -> Result<Shape, GeometryError> {
        Shape::ellipse_in_plane(center, major_radius, minor_radius, Vec3::Z, Vec3::X)
    }

    pub fn ellipse_in_plane(
        center: Vec3,
        major_radius: f64,
        minor_radius: f64,
        normal: Vec3,
        major_axis: Vec3,
    ) -> Result<Shape, GeometryError> {
        let s = Shape::Ellipse {
            center,
            major_radius,
            minor_radius,
            normal,
            major_axis,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn extrusion(profile: Shape, height: f64) -> Result<Shape, GeometryError> {
        let s = Shape::Extrusion {
            profile: Box::new(profile),
            height,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn group(children: Vec<Shape>) -> Result<Shape, GeometryError> {
        let s = Shape::Group { children };
        s.validate()?;
        Ok(s)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Shape::Point { .. } => "point",
            Shape::Polyline { .. } => "polyline",
            Shape::Ellipse { .. } => "ellipse",
            Shape::Extrusion { .. } => "extrusion",
            Shape::Loft { .. } => "loft",
            Shape::Sweep { .. } => "sweep",
            Shape::Group { .. } => "group",
        }
    }

    /// True for curves usable as extrusion/loft/sweep profiles (closed polyline or ellipse).
    pub fn is_closed_curve(&self) -> bool {
        matches!(
            self,
            Shape::Polyline { closed: true, .. } | Shape::Ellipse { .. }
        )
    }

    pub fn is_curve(&self) -> bool {
        matches!(self, Shape::Polyline { .. } | Shape::Ellipse { .. })
    }

    /// Checks every invariant of this value and of all nested shapes.
    pub fn validate(&self) -> Result<(), GeometryError> {
        self.validate_at(0)
    }

    fn validate_at(&self, depth: usize) -> Result<(), GeometryError> {
        match self {
            Shape::Point { pos } => finite(*pos),
            Shape::Polyline { vertices, closed } => {
                for v in vertices {
                    finite(*v)?;
                }
                if vertices.len() < 2 {
                    return Err(GeometryError::TooFewVertices {
                        required: 2,
                        found: vertices.len(),
                    });
                }
                if *closed {
                    let distinct = distinct_count(vertices);
                    if distinct < 3 {
                        return Err(GeometryError::TooFewVertices {
                            required: 3,
                            found: distinct,
                        });
                    }
                }
                Ok(())
            }
            Shape::Ellipse {
                center,
                major_radius,
                minor_radius,
                normal,
                major_axis,
            } => {
                finite(*center)?;
                finite(*normal)?;
                finite(*major_axis)?;
                if !(*major_radius > 0.0 && major_radius.is_finite())
                    || !(*minor_radius > 0.0 && minor_radius.is_finite())
                {
                    return Err(GeometryError::InvalidRadius {
                        major: *major_radius,
                        minor: *minor_radius,
                    });
                }
                if (normal.norm() - 1.0).abs() > UNIT_TOLERANCE
                    || (major_axis.norm() - 1.0).abs() > UNIT_TOLERANCE
                    || normal.dot(*major_axis).abs() > UNIT_TOLERANCE
                {
                    return Err(GeometryError::BadEllipseFrame);
                }
                Ok(())
            }
            Shape::Extrusion { profile, height } => {
                if !(height.is_finite() && *height != 0.0) {
                    return Err(GeometryError::DegenerateShape(format!(
                        "extrusion height must be finite and non-zero, got {height}"
                    )));
                }
                check_profile(profile)
            }
            Shape::Loft { profiles } => {
                if profiles.len() < 2 {
                    return Err(GeometryError::TooFewProfiles(profiles.len()));
                }
                for p in profiles {
                    check_profile(p)?;
                }
                Ok(())
            }
            Shape::Sweep { profile, path } => {
                check_profile(profile)?;
                path.validate_at(depth + 1)?;
                match path.as_ref() {
                    Shape::Polyline { vertices, .. } => check_path(vertices),
                    other => Err(GeometryError::DegeneratePath(format!(
                        "sweep path must be a polyline, got {}",
                        other.kind_name()
                    ))),
                }
            }
            Shape::Group { children } => {
                if depth >= MAX_GROUP_DEPTH {
                    return Err(GeometryError::NestingTooDeep(MAX_GROUP_DEPTH));
                }
                for c in children {
                    c.validate_at(depth + 1)?;
                }
                Ok(())
            }
        }
    }
}

fn finite(v: Vec3) -> Result<(), GeometryError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::NonFinite)
    }
}

fn distinct_count(vertices: &[Vec3]) -> usize {
    let mut seen: Vec<Vec3> = Vec::with_capacity(vertices.len());
    for v in vertices {
        if !seen.iter().any(|s| s == v) {
            seen.push(*v);
        }
    }
    seen.len()
}

pub(crate) fn check_path(vertices: &[Vec3]) -> Result<(), GeometryError> {
    if vertices.len() < 2 {
        return Err(GeometryError::DegeneratePath(format!(
            "path needs at least 2 vertices, got {}",
            vertices.len()
        )));
    }
    for (i, w) in vertices.windows(2).enumerate() {
        if w[0] == w[1] {
            return Err(GeometryError::DegeneratePath(format!(
                "path vertices {i} and {} coincide",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Validates that `profile` is a planar closed curve with non-zero area.
pub(crate) fn check_profile(profile: &Shape) -> Result<(), GeometryError> {
    profile.validate()?;
    if !profile.is_closed_curve() {
        return Err(GeometryError::ProfileMismatch(format!(
            "profile must be a closed polyline or ellipse, got {}",
            if matches!(profile, Shape::Polyline { .. }) {
                "open polyline"
            } else {
                profile.kind_name()
            }
        )));
    }
    if let Shape::Polyline { vertices, .. } = profile {
        plane_of(vertices)?;
    }
    Ok(())
}

/// Best-fit plane of a closed polygon: `(centroid, unit normal)`.
///
/// The normal comes from Newell's method, so it follows the winding of the polygon.
pub(crate) fn plane_of(points: &[Vec3]) -> Result<(Vec3, Vec3), GeometryError> {
    let n = points.len();
    let mut newell = Vec3::ZERO;
    let mut centroid = Vec3::ZERO;
    let (mut lo, mut hi) = (points[0], points[0]);
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        newell += Vec3::new(
            (a.y - b.y) * (a.z + b.z),
            (a.z - b.z) * (a.x + b.x),
            (a.x - b.x) * (a.y + b.y),
        );
        centroid += a;
        lo = Vec3::new(lo.x.min(a.x), lo.y.min(a.y), lo.z.min(a.z));
        hi = Vec3::new(hi.x.max(a.x), hi.y.max(a.y), hi.z.max(a.z));
    }
    let centroid = centroid * (1.0 / n as f64);
    let diag = lo.distance(hi);
    // |newell| is twice the projected area.
    if diag == 0.0 || newell.norm() * 0.5 <= 1e-12 * diag * diag {
        return Err(GeometryError::DegenerateShape(
            "profile encloses zero area".into(),
        ));
    }
    let normal = newell.normalized().ok_or_else(|| {
        GeometryError::DegenerateShape("profile encloses zero area".into())
    })?;
    let tolerance = PLANARITY_FACTOR * diag;
    let worst = points
        .iter()
        .map(|p| (*p - centroid).dot(normal).abs())
        .fold(0.0, f64::max);
    if worst >= tolerance {
        return Err(GeometryError::NonPlanarProfile {
            deviation: worst,
            tolerance,
        });
    }
    Ok((centroid, normal))
}
