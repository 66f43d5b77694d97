//! Mesh serialization: Wavefront OBJ text and the native JSON mesh form.

use std::fmt::Write;

use sha2::{Digest, Sha256};

use super::TriMesh;

/// Single-object OBJ: `v x y z` lines, then `f i j k` lines with 1-based indices.
pub fn to_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    write_obj_body(&mut out, mesh, 0);
    out
}

/// Concatenated OBJ with one `o shape_<i>` group per mesh; indices are global.
pub fn to_obj_groups(meshes: &[TriMesh]) -> String {
    let mut out = String::new();
    let mut offset = 0usize;
    for (i, mesh) in meshes.iter().enumerate() {
        let _ = writeln!(out, "o shape_{i}");
        write_obj_body(&mut out, mesh, offset);
        offset += mesh.vertices.len();
    }
    out
}

fn write_obj_body(out: &mut String, mesh: &TriMesh, offset: usize) {
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(
            out,
            "f {} {} {}",
            t[0] as usize + offset + 1,
            t[1] as usize + offset + 1,
            t[2] as usize + offset + 1
        );
    }
}

pub fn to_json(mesh: &TriMesh) -> String {
    serde_json::to_string(mesh).expect("mesh serialization is infallible")
}

/// Canonical JSON of a mesh list, the input of [`mesh_digest`].
pub fn meshes_to_json(meshes: &[TriMesh]) -> String {
    serde_json::to_string(meshes).expect("mesh serialization is infallible")
}

/// Hex SHA-256 of the canonical JSON mesh form.
pub fn mesh_digest(meshes: &[TriMesh]) -> String {
    hex::encode(Sha256::digest(meshes_to_json(meshes).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn tri() -> TriMesh {
        TriMesh {
            vertices: vec![Vec3::ZERO, Vec3::X, Vec3::new(0.5, 1.0, 0.0)],
            triangles: vec![[0, 1, 2]],
            generation: 7,
        }
    }

    #[test]
    fn obj_is_one_based() {
        assert_eq!(to_obj(&tri()), "v 0 0 0\nv 1 0 0\nv 0.5 1 0\nf 1 2 3\n");
    }

    #[test]
    fn grouped_obj_offsets_indices() {
        let obj = to_obj_groups(&[tri(), tri()]);
        assert!(obj.starts_with("o shape_0\n"));
        assert!(obj.contains("o shape_1\n"));
        assert!(obj.ends_with("f 4 5 6\n"));
    }

    #[test]
    fn json_form_omits_generation() {
        assert_eq!(
            to_json(&tri()),
            r#"{"vertices":[[0.0,0.0,0.0],[1.0,0.0,0.0],[0.5,1.0,0.0]],"triangles":[[0,1,2]]}"#
        );
    }
}
