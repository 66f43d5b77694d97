//! Shape constructors that combine other shapes: loft, sweep, random distribution.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use super::shape::{check_path, check_profile, plane_of};
use super::tessellate::{oriented_profile, plane_basis, sample_curve};
use super::transform::{compose_rotations, rotate_vector, rotation_between, AxisAngle};
use super::{GeometryError, Shape, Vec3};

/// Upper bound on rejection-sampling draws per requested point.
const MAX_DRAWS_PER_POINT: usize = 10_000;

/// Skins `profiles` in order. Sampling counts are reconciled at tessellation time.
pub fn loft(profiles: Vec<Shape>) -> Result<Shape, GeometryError> {
    if profiles.len() < 2 {
        return Err(GeometryError::TooFewProfiles(profiles.len()));
    }
    for p in &profiles {
        check_profile(p)?;
    }
    Ok(Shape::Loft { profiles })
}

/// Transports `profile` along the polyline `path` using rotation-minimizing frames.
pub fn sweep(profile: Shape, path: Shape) -> Result<Shape, GeometryError> {
    check_profile(&profile)?;
    match &path {
        Shape::Polyline { vertices, .. } => check_path(vertices)?,
        other => {
            return Err(GeometryError::DegeneratePath(format!(
                "sweep path must be a polyline, got {}",
                other.kind_name()
            )))
        }
    }
    Ok(Shape::Sweep {
        profile: Box::new(profile),
        path: Box::new(path),
    })
}

/// Samples every profile and resamples the shorter ones by arc length so all rings
/// have the maximum vertex count.
pub fn loft_rings(profiles: &[Shape], resolution: u32) -> Result<Vec<Vec<Vec3>>, GeometryError> {
    if profiles.len() < 2 {
        return Err(GeometryError::TooFewProfiles(profiles.len()));
    }
    let sampled = profiles
        .iter()
        .map(|p| oriented_profile(p, resolution).map(|(ring, _)| ring))
        .collect::<Result<Vec<_>, _>>()?;
    let target = sampled.iter().map(Vec::len).max().unwrap_or(0);
    Ok(sampled
        .into_iter()
        .map(|ring| {
            if ring.len() == target {
                ring
            } else {
                resample_closed(&ring, target)
            }
        })
        .collect())
}

/// `n` points spaced uniformly by arc length around a closed polygon, starting at its
/// first vertex.
pub fn resample_closed(points: &[Vec3], n: usize) -> Vec<Vec3> {
    let m = points.len();
    let edge = |i: usize| (points[i], points[(i + 1) % m]);
    let lengths: Vec<f64> = (0..m).map(|i| edge(i).0.distance(edge(i).1)).collect();
    let total: f64 = lengths.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    let mut walked = 0.0;
    for k in 0..n {
        let target = total * k as f64 / n as f64;
        while i < m - 1 && walked + lengths[i] < target {
            walked += lengths[i];
            i += 1;
        }
        let (a, b) = edge(i);
        let t = if lengths[i] > 0.0 {
            ((target - walked) / lengths[i]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(if t == 0.0 { a } else { a.lerp(b, t) });
    }
    out
}

/// One ring per path vertex: `path[k] + R_k (p - path[0])` for every profile sample `p`.
///
/// `R_k` accumulates the minimal rotation between consecutive vertex tangents, where an
/// interior tangent bisects its two segments.
pub(crate) fn sweep_rings(
    profile: &Shape,
    path: &Shape,
    resolution: u32,
) -> Result<Vec<Vec<Vec3>>, GeometryError> {
    let (mut ring, normal) = oriented_profile(profile, resolution)?;
    let vertices = match path {
        Shape::Polyline { vertices, .. } => vertices,
        other => {
            return Err(GeometryError::DegeneratePath(format!(
                "sweep path must be a polyline, got {}",
                other.kind_name()
            )))
        }
    };
    check_path(vertices)?;
    let segments: Vec<Vec3> = vertices
        .windows(2)
        .map(|w| (w[1] - w[0]).normalized().expect("checked non-degenerate"))
        .collect();
    if segments[0].dot(normal) < 0.0 {
        ring.reverse();
    }
    let mut tangents = Vec::with_capacity(vertices.len());
    tangents.push(segments[0]);
    for w in segments.windows(2) {
        tangents.push((w[0] + w[1]).normalized().ok_or_else(|| {
            GeometryError::DegeneratePath("path doubles back on itself".into())
        })?);
    }
    tangents.push(*segments.last().unwrap());

    let origin = vertices[0];
    let mut frame = AxisAngle::ZERO;
    let mut rings = Vec::with_capacity(vertices.len());
    for (k, anchor) in vertices.iter().enumerate() {
        if k > 0 {
            frame = compose_rotations(frame, rotation_between(tangents[k - 1], tangents[k]));
        }
        rings.push(
            ring.iter()
                .map(|p| *anchor + rotate_vector(frame, *p - origin))
                .collect(),
        );
    }
    Ok(rings)
}

/// `count` points drawn uniformly inside a planar closed region, fully determined by
/// `(region, count, seed)`.
///
/// Uses a SplitMix64 generator seeded with `seed` and rejection sampling inside the
/// region's in-plane bounding box.
pub fn distribute_random(region: &Shape, count: usize, seed: u64) -> Result<Shape, GeometryError> {
    if count == 0 {
        return Err(GeometryError::InvalidCount(0));
    }
    let plane = RegionPlane::new(region)?;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut draws = 0usize;
    while points.len() < count {
        if draws >= count.saturating_mul(MAX_DRAWS_PER_POINT) {
            return Err(GeometryError::RegionDegenerate);
        }
        draws += 1;
        let a = plane.lo.0 + rng.gen::<f64>() * (plane.hi.0 - plane.lo.0);
        let b = plane.lo.1 + rng.gen::<f64>() * (plane.hi.1 - plane.lo.1);
        if plane.contains_2d(a, b) {
            points.push(Shape::Point {
                pos: plane.origin + plane.u * a + plane.v * b,
            });
        }
    }
    Ok(Shape::Group { children: points })
}

/// Region containment test used by [`distribute_random`].
pub fn region_contains(region: &Shape, p: Vec3) -> Result<bool, GeometryError> {
    let plane = RegionPlane::new(region)?;
    let d = p - plane.origin;
    Ok(plane.contains_2d(d.dot(plane.u), d.dot(plane.v)))
}

struct RegionPlane {
    origin: Vec3,
    u: Vec3,
    v: Vec3,
    lo: (f64, f64),
    hi: (f64, f64),
    outline: Outline,
}

enum Outline {
    Polygon(Vec<(f64, f64)>),
    Ellipse { a: f64, b: f64 },
}

impl RegionPlane {
    fn new(region: &Shape) -> Result<Self, GeometryError> {
        region.validate()?;
        match region {
            Shape::Ellipse {
                center,
                major_radius,
                minor_radius,
                normal,
                major_axis,
            } => Ok(RegionPlane {
                origin: *center,
                u: *major_axis,
                v: normal.cross(*major_axis),
                lo: (-major_radius, -minor_radius),
                hi: (*major_radius, *minor_radius),
                outline: Outline::Ellipse {
                    a: *major_radius,
                    b: *minor_radius,
                },
            }),
            Shape::Polyline { closed: true, .. } => {
                let pts = sample_curve(region, 3)?;
                let (origin, normal) = match plane_of(&pts) {
                    Ok(p) => p,
                    Err(GeometryError::DegenerateShape(_)) => {
                        return Err(GeometryError::RegionDegenerate)
                    }
                    Err(e) => return Err(e),
                };
                let (u, v) = plane_basis(normal);
                let poly: Vec<(f64, f64)> = pts
                    .iter()
                    .map(|p| ((*p - origin).dot(u), (*p - origin).dot(v)))
                    .collect();
                let mut lo = poly[0];
                let mut hi = poly[0];
                for p in &poly {
                    lo = (lo.0.min(p.0), lo.1.min(p.1));
                    hi = (hi.0.max(p.0), hi.1.max(p.1));
                }
                Ok(RegionPlane {
                    origin,
                    u,
                    v,
                    lo,
                    hi,
                    outline: Outline::Polygon(poly),
                })
            }
            other => Err(GeometryError::ProfileMismatch(format!(
                "distribution region must be a closed curve, got {}",
                other.kind_name()
            ))),
        }
    }

    fn contains_2d(&self, x: f64, y: f64) -> bool {
        match &self.outline {
            Outline::Ellipse { a, b } => (x / a).powi(2) + (y / b).powi(2) <= 1.0,
            Outline::Polygon(poly) => {
                // Even-odd crossing rule.
                let mut inside = false;
                let n = poly.len();
                let mut j = n - 1;
                for i in 0..n {
                    let (xi, yi) = poly[i];
                    let (xj, yj) = poly[j];
                    if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                    j = i;
                }
                inside
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tessellate;

    fn square_at(z: f64) -> Shape {
        Shape::rect(Vec3::new(0.0, 0.0, z), 1.0, 1.0).unwrap()
    }

    #[test]
    fn loft_of_one_profile_fails() {
        assert!(matches!(
            loft(vec![square_at(0.0)]),
            Err(GeometryError::TooFewProfiles(1))
        ));
    }

    #[test]
    fn loft_rejects_open_profile() {
        let open = Shape::polyline(vec![Vec3::ZERO, Vec3::X]).unwrap();
        assert!(matches!(
            loft(vec![square_at(0.0), open]),
            Err(GeometryError::ProfileMismatch(_))
        ));
    }

    #[test]
    fn resample_square_to_eight_hits_corners_and_midpoints() {
        let ring = sample_curve(&square_at(0.0), 3).unwrap();
        let r = resample_closed(&ring, 8);
        let expected = [
            (0.0, 0.0),
            (0.5, 0.0),
            (1.0, 0.0),
            (1.0, 0.5),
            (1.0, 1.0),
            (0.5, 1.0),
            (0.0, 1.0),
            (0.0, 0.5),
        ];
        for (p, e) in r.iter().zip(expected) {
            assert!(p.max_abs_diff(Vec3::new(e.0, e.1, 0.0)) < 1e-12, "{p:?} vs {e:?}");
        }
    }

    #[test]
    fn sweep_path_of_one_vertex_is_degenerate() {
        let path = Shape::Polyline {
            vertices: vec![Vec3::ZERO],
            closed: false,
        };
        assert!(matches!(
            sweep(square_at(0.0), path),
            Err(GeometryError::DegeneratePath(_))
        ));
    }

    #[test]
    fn sweep_rejects_repeated_path_vertex() {
        let path = Shape::polyline(vec![Vec3::ZERO, Vec3::ZERO, Vec3::Z]).unwrap();
        assert!(matches!(
            sweep(square_at(0.0), path),
            Err(GeometryError::DegeneratePath(_))
        ));
    }

    #[test]
    fn distribute_is_deterministic_and_seed_sensitive() {
        let a = distribute_random(&square_at(0.0), 10, 42).unwrap();
        let b = distribute_random(&square_at(0.0), 10, 42).unwrap();
        let c = distribute_random(&square_at(0.0), 10, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn distribute_in_ellipse_stays_inside() {
        let e = Shape::ellipse(Vec3::new(3.0, 1.0, 2.0), 2.0, 0.5).unwrap();
        let Shape::Group { children } = distribute_random(&e, 200, 9).unwrap() else {
            panic!("expected group")
        };
        for c in children {
            let Shape::Point { pos } = c else { panic!() };
            let d = pos - Vec3::new(3.0, 1.0, 2.0);
            assert!((d.x / 2.0).powi(2) + (d.y / 0.5).powi(2) <= 1.0 + 1e-12);
            assert!(d.z.abs() < 1e-12);
        }
    }

    #[test]
    fn distribute_rejects_zero_count_and_zero_area() {
        assert!(matches!(
            distribute_random(&square_at(0.0), 0, 1),
            Err(GeometryError::InvalidCount(0))
        ));
        let sliver = Shape::closed_polyline(vec![Vec3::ZERO, Vec3::X, Vec3::X * 2.0]).unwrap();
        assert!(matches!(
            distribute_random(&sliver, 3, 1),
            Err(GeometryError::RegionDegenerate)
        ));
    }

    #[test]
    fn l_path_sweep_counts_quads() {
        let path = Shape::polyline(vec![Vec3::ZERO, Vec3::Z, Vec3::new(1.0, 0.0, 1.0)]).unwrap();
        let profile = Shape::rect(Vec3::new(-0.25, -0.25, 0.0), 0.5, 0.5).unwrap();
        let m = tessellate(&sweep(profile, path).unwrap(), 8).unwrap();
        // 2 segments x 4 samples side quads, plus two 2-triangle caps.
        assert_eq!(m.vertices.len(), 12);
        assert_eq!(m.triangles.len(), 2 * 4 * 2 + 4);
    }
}
