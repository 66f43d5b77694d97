//! Methods are registered before logic links against them. Logic that calls a method
//! nobody registered is a link error.

use parlogue::geometry::ShapeRegistry;
use parlogue::params::{ParamKind, ParamSet, ParamSpec, ParamUpdate};
use parlogue::pdl::{self, MethodRegistry};

const RING: &str = "method ring(c: point, r: number) -> shape {
  return ellipse(c, r, r);
}";

const LOGIC: &str = "param Count: integer in [1, 10]
logic {
  for i in 0..Count {
    emit(ring(point(0, 0, 0), 1 + i));
  }
}";

fn main() {
    let program = pdl::parse(LOGIC).expect("logic parses");
    let mut params = ParamSet::new();
    params
        .declare(ParamSpec::new("Count", ParamKind::Integer).with_range(1.0, 10.0))
        .unwrap();
    params
        .apply_update(&ParamUpdate::number("Count", 4.0), &ShapeRegistry::new())
        .unwrap();

    let mut registry = MethodRegistry::new();
    println!("before registration:");
    for d in pdl::check(&program, &registry, &params) {
        println!("  {d}");
    }

    let method = pdl::parse_method(RING).expect("method parses");
    let keys = pdl::register_methods(&[method], &mut registry).expect("method registers");
    println!("registered ring as {}", keys[0].0);

    assert!(pdl::check(&program, &registry, &params).is_empty());
    let result = pdl::evaluate(&program, &params, &registry, 0).expect("logic evaluates");
    println!("after registration: {} shapes", result.shapes.len());
}
