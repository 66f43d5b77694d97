use serde::{Deserialize, Serialize};

use super::ops::{loft_rings, sweep_rings};
use super::shape::plane_of;
use super::{GeometryError, Shape, Vec3};

const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Triangle mesh, the render form of a [`Shape`].
///
/// Serializes as the native JSON mesh form `{vertices:[[x,y,z],...], triangles:[[a,b,c],...]}`;
/// `generation` is bookkeeping for the owning session and stays off the wire.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    #[serde(skip)]
    pub generation: u64,
}

impl TriMesh {
    pub fn triangle_area(&self, t: [u32; 3]) -> f64 {
        let a = self.vertices[t[0] as usize];
        let b = self.vertices[t[1] as usize];
        let c = self.vertices[t[2] as usize];
        (b - a).cross(c - a).norm() * 0.5
    }

    /// Checks index bounds and the minimum-area rule.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let n = self.vertices.len() as u32;
        for t in &self.triangles {
            if t.iter().any(|&i| i >= n) {
                return Err(GeometryError::DegenerateShape(format!(
                    "triangle {t:?} indexes past {n} vertices"
                )));
            }
            if self.triangle_area(*t) < MIN_TRIANGLE_AREA {
                return Err(GeometryError::DegenerateShape(format!(
                    "triangle {t:?} has zero area"
                )));
            }
        }
        Ok(())
    }

    fn append(&mut self, other: TriMesh) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend(other.vertices);
        self.triangles.extend(
            other
                .triangles
                .into_iter()
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
        );
    }

    /// Number of distinct undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }
}

/// Triangulates `shape` deterministically.
///
/// Ellipses are sampled at `resolution` uniform angular steps, polylines at their own
/// vertices. Curves and points produce vertex-only meshes. Side quads split along the
/// diagonal from their lower-left corner; caps are ear-clipped from the profile itself,
/// so they add no vertices.
pub fn tessellate(shape: &Shape, resolution: u32) -> Result<TriMesh, GeometryError> {
    shape.validate()?;
    let mesh = tessellate_inner(shape, resolution)?;
    mesh.validate()?;
    Ok(mesh)
}

fn tessellate_inner(shape: &Shape, resolution: u32) -> Result<TriMesh, GeometryError> {
    match shape {
        Shape::Point { pos } => Ok(TriMesh {
            vertices: vec![*pos],
            ..TriMesh::default()
        }),
        Shape::Polyline { .. } | Shape::Ellipse { .. } => Ok(TriMesh {
            vertices: sample_curve(shape, resolution)?,
            ..TriMesh::default()
        }),
        Shape::Extrusion { profile, height } => {
            let (mut ring, normal) = oriented_profile(profile, resolution)?;
            let (dir, h) = if *height < 0.0 {
                ring.reverse();
                (-normal, -height)
            } else {
                (normal, *height)
            };
            let top: Vec<Vec3> = ring.iter().map(|p| *p + dir * h).collect();
            skin(&[ring, top], true)
        }
        Shape::Loft { profiles } => {
            let rings = loft_rings(profiles, resolution)?;
            skin(&rings, false)
        }
        Shape::Sweep { profile, path } => {
            let rings = sweep_rings(profile, path, resolution)?;
            skin(&rings, true)
        }
        Shape::Group { children } => {
            let mut mesh = TriMesh::default();
            for c in children {
                mesh.append(tessellate_inner(c, resolution)?);
            }
            Ok(mesh)
        }
    }
}

/// Samples a curve into points; closed curves omit the repeated closing vertex.
pub fn sample_curve(shape: &Shape, resolution: u32) -> Result<Vec<Vec3>, GeometryError> {
    match shape {
        Shape::Polyline { vertices, closed } => {
            let mut pts: Vec<Vec3> = Vec::with_capacity(vertices.len());
            for v in vertices {
                if pts.last() != Some(v) {
                    pts.push(*v);
                }
            }
            if *closed && pts.len() > 1 && pts.first() == pts.last() {
                pts.pop();
            }
            Ok(pts)
        }
        Shape::Ellipse {
            center,
            major_radius,
            minor_radius,
            normal,
            major_axis,
        } => {
            if resolution < 3 {
                return Err(GeometryError::InvalidResolution(resolution));
            }
            let minor_axis = normal.cross(*major_axis);
            let step = std::f64::consts::TAU / resolution as f64;
            Ok((0..resolution)
                .map(|k| {
                    let a = step * k as f64;
                    *center + *major_axis * (major_radius * a.cos()) + minor_axis * (minor_radius * a.sin())
                })
                .collect())
        }
        other => Err(GeometryError::ProfileMismatch(format!(
            "expected a curve, got {}",
            other.kind_name()
        ))),
    }
}

/// Samples a closed profile and returns it with its plane normal (winding-consistent).
pub(crate) fn oriented_profile(
    profile: &Shape,
    resolution: u32,
) -> Result<(Vec<Vec3>, Vec3), GeometryError> {
    super::shape::check_profile(profile)?;
    let ring = sample_curve(profile, resolution)?;
    let normal = match profile {
        Shape::Ellipse { normal, .. } => *normal,
        _ => plane_of(&ring)?.1,
    };
    Ok((ring, normal))
}

/// Connects consecutive rings with quads and optionally caps both ends.
fn skin(rings: &[Vec<Vec3>], caps: bool) -> Result<TriMesh, GeometryError> {
    let n = rings[0].len();
    debug_assert!(rings.iter().all(|r| r.len() == n));
    let mut mesh = TriMesh {
        vertices: rings.iter().flatten().copied().collect(),
        ..TriMesh::default()
    };
    let idx = |ring: usize, j: usize| (ring * n + j % n) as u32;
    for i in 0..rings.len() - 1 {
        for j in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j));
            mesh.triangles.push([a, b, c]);
            mesh.triangles.push([a, c, d]);
        }
    }
    if caps {
        let (_, normal) = plane_of(&rings[0])?;
        let cap = ear_clip(&rings[0], normal)?;
        let last = (rings.len() - 1) * n;
        for t in &cap {
            mesh.triangles.push([t[2] as u32, t[1] as u32, t[0] as u32]);
        }
        for t in &cap {
            mesh.triangles
                .push([(last + t[0]) as u32, (last + t[1]) as u32, (last + t[2]) as u32]);
        }
    }
    Ok(mesh)
}

/// Triangulates a simple planar polygon; triangles wind counter-clockwise about `normal`.
pub(crate) fn ear_clip(points: &[Vec3], normal: Vec3) -> Result<Vec<[usize; 3]>, GeometryError> {
    let (u, v) = plane_basis(normal);
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.dot(u), p.dot(v))).collect();
    let scale = {
        let (mut lo, mut hi) = (pts[0], pts[0]);
        for p in &pts {
            lo = (lo.0.min(p.0), lo.1.min(p.1));
            hi = (hi.0.max(p.0), hi.1.max(p.1));
        }
        (hi.0 - lo.0).hypot(hi.1 - lo.1)
    };
    let eps = 1e-12 * scale * scale;
    let orient = |a: usize, b: usize, c: usize| {
        let (pa, pb, pc) = (pts[a], pts[b], pts[c]);
        (pb.0 - pa.0) * (pc.1 - pa.1) - (pb.1 - pa.1) * (pc.0 - pa.0)
    };

    let mut ring: Vec<usize> = (0..pts.len()).collect();
    let signed: f64 = (0..pts.len())
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    let reversed = signed < 0.0;
    if reversed {
        ring.reverse();
    }

    let mut out = Vec::with_capacity(pts.len().saturating_sub(2));
    while ring.len() > 3 {
        let m = ring.len();
        let mut clipped = false;
        for k in 0..m {
            let (a, b, c) = (ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]);
            let o = orient(a, b, c);
            if o.abs() <= eps {
                ring.remove(k);
                clipped = true;
                break;
            }
            if o > 0.0 && !ring.iter().any(|&p| p != a && p != b && p != c && inside(pts[p], pts[a], pts[b], pts[c])) {
                out.push([a, b, c]);
                ring.remove(k);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(GeometryError::DegenerateShape(
                "profile polygon is self-intersecting".into(),
            ));
        }
    }
    if ring.len() == 3 && orient(ring[0], ring[1], ring[2]).abs() > eps {
        out.push([ring[0], ring[1], ring[2]]);
    }
    Ok(out)
}

fn inside(p: (f64, f64), a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    let cross = |o: (f64, f64), x: (f64, f64), y: (f64, f64)| {
        (x.0 - o.0) * (y.1 - o.1) - (x.1 - o.1) * (y.0 - o.0)
    };
    if p == a || p == b || p == c {
        return false;
    }
    cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
}

/// Orthonormal in-plane basis `(u, v)` with `u × v = normal`.
pub(crate) fn plane_basis(normal: Vec3) -> (Vec3, Vec3) {
    let project = |axis: Vec3| axis - normal * axis.dot(normal);
    let u = project(Vec3::X)
        .normalized()
        .filter(|_| normal.x.abs() < 0.9)
        .or_else(|| project(Vec3::Y).normalized())
        .unwrap_or(Vec3::X);
    (u, normal.cross(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Shape {
        Shape::rect(Vec3::ZERO, 1.0, 1.0).unwrap()
    }

    #[test]
    fn point_is_single_vertex() {
        let m = tessellate(&Shape::point(Vec3::new(1.0, 2.0, 3.0)).unwrap(), 8).unwrap();
        assert_eq!(m.vertices.len(), 1);
        assert!(m.triangles.is_empty());
    }

    #[test]
    fn cube_has_eight_vertices_twelve_triangles() {
        let cube = Shape::extrusion(unit_square(), 1.0).unwrap();
        let m = tessellate(&cube, 16).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.triangles.len(), 12);
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn cube_faces_point_outward() {
        let cube = Shape::extrusion(unit_square(), 1.0).unwrap();
        let m = tessellate(&cube, 16).unwrap();
        let center = Vec3::new(0.5, 0.5, 0.5);
        for t in &m.triangles {
            let [a, b, c] = t.map(|i| m.vertices[i as usize]);
            let n = (b - a).cross(c - a);
            let mid = (a + b + c) * (1.0 / 3.0);
            assert!(n.dot(mid - center) > 0.0, "inward face {t:?}");
        }
    }

    #[test]
    fn negative_height_extrudes_downward() {
        let m = tessellate(&Shape::extrusion(unit_square(), -2.0).unwrap(), 8).unwrap();
        let min_z = m.vertices.iter().map(|v| v.z).fold(f64::MAX, f64::min);
        assert_eq!(min_z, -2.0);
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn ellipse_samples_exactly_resolution_points() {
        let e = Shape::ellipse(Vec3::ZERO, 2.0, 1.0).unwrap();
        assert_eq!(tessellate(&e, 24).unwrap().vertices.len(), 24);
        assert!(matches!(
            tessellate(&e, 2),
            Err(GeometryError::InvalidResolution(2))
        ));
    }

    #[test]
    fn concave_profile_caps_without_overlap() {
        let l_shape = Shape::closed_polyline(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(2.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(1.0, 2.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
        ])
        .unwrap();
        let m = tessellate(&Shape::extrusion(l_shape, 1.0).unwrap(), 8).unwrap();
        // Top cap area equals the L area of 3.
        let top: f64 = m.triangles[m.triangles.len() - 4..]
            .iter()
            .map(|t| m.triangle_area(*t))
            .sum();
        assert!((top - 3.0).abs() < 1e-12);
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn non_planar_profile_is_rejected() {
        let warped = Shape::closed_polyline(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.3),
            Vec3::new(0.0, 1.0, 0.0),
        ])
        .unwrap();
        assert!(matches!(
            Shape::extrusion(warped, 1.0),
            Err(GeometryError::NonPlanarProfile { .. })
        ));
    }

    #[test]
    fn zero_area_profile_is_degenerate() {
        let flat = Shape::closed_polyline(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ])
        .unwrap();
        assert!(matches!(
            Shape::extrusion(flat, 1.0),
            Err(GeometryError::DegenerateShape(_))
        ));
    }
}
