//! Builds shapes directly with the geometry kernel: a lofted vase, a swept rail and
//! trees scattered in a lot, then tessellates and exports them.

use parlogue::geometry::{
    distribute_random, loft, mesh_digest, sweep, tessellate, to_obj_groups, transform, AxisAngle, Shape,
    ShapeRegistry, Vec3,
};

fn main() -> Result<(), parlogue::geometry::GeometryError> {
    let origin = Vec3::new(0.0, 0.0, 0.0);
    let up = |z: f64| Vec3::new(0.0, 0.0, z);

    let rings = vec![
        Shape::ellipse(origin, 2.0, 2.0)?,
        Shape::ellipse(up(3.0), 1.0, 1.0)?,
        Shape::ellipse(up(6.0), 1.5, 1.5)?,
    ];
    let vase = loft(rings)?;

    let profile = Shape::rect(Vec3::new(-0.1, -0.1, 0.0), 0.2, 0.2)?;
    let path = Shape::polyline(vec![origin, Vec3::new(0.0, 0.0, 2.0), Vec3::new(4.0, 0.0, 2.0)])?;
    let rail = transform(&sweep(profile, path)?, Vec3::new(6.0, 0.0, 0.0), AxisAngle::about_z(0.0), 1.0)?;

    let lot = Shape::rect(Vec3::new(-10.0, -10.0, 0.0), 8.0, 8.0)?;
    let trees = distribute_random(&lot, 12, 42)?;

    let mut scene = ShapeRegistry::new();
    for shape in [vase, rail, Shape::extrusion(lot, 0.1)?, trees] {
        let kind = shape.kind_name();
        let id = scene.add(shape)?;
        println!("{id}: {kind}");
    }

    let mut meshes = Vec::new();
    for (_, shape) in scene.list() {
        let mesh = tessellate(&shape, 32)?;
        println!(
            "{:>12}: {} vertices, {} triangles, euler {}",
            shape.kind_name(),
            mesh.vertices.len(),
            mesh.triangles.len(),
            mesh.euler_characteristic()
        );
        meshes.push(mesh);
    }
    println!("digest {}", mesh_digest(&meshes));
    let obj = to_obj_groups(&meshes);
    println!("obj export: {} lines", obj.lines().count());
    Ok(())
}
