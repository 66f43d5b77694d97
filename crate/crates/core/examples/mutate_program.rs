//! Applies each seeded mutation operator to a PDL program and shows what the checker
//! says about the mutant.

use parlogue::cli::{mutate_program, MutationOp};
use parlogue::params::ParamSet;
use parlogue::pdl::{self, MethodRegistry};

const PROGRAM: &str = "param Count: integer = 3 in [1, 10]
param Size: number = 1 in [0.5, 5]
method square(corner: point, size: number) -> shape {
  return rect(corner, size, size);
}
logic {
  for i in 0..Count {
    emit(square(point(2 * i, 0, 0), Size));
  }
}";

fn main() {
    for op in MutationOp::ALL {
        for seed in 0..2 {
            let (mutant, m) = match mutate_program(PROGRAM, op, seed) {
                Ok(r) => r,
                Err(e) => {
                    println!("{}/{seed}: {e}", op.name());
                    continue;
                }
            };
            println!("{}/{seed}: {:?} -> {:?} at {}:{}", op.name(), m.original, m.replacement, m.span.line, m.span.col);
            let verdict = match pdl::parse(&mutant) {
                Err(diags) => diags,
                Ok(program) => {
                    let mut registry = MethodRegistry::new();
                    match registry.register_methods(&program.methods) {
                        Err(diags) => diags,
                        Ok(_) => pdl::check(&program, &registry, &ParamSet::new()),
                    }
                }
            };
            for d in verdict.iter().take(2) {
                println!("    {d}");
            }
        }
    }
}
