use serde::Serialize;

use crate::geometry::{mesh_digest, tessellate, to_obj_groups, GeometryError, TriMesh};
use crate::params::ParamSet;
use crate::pdl::{EvalResult, Program, RegistryKey};

/// The result of one successful generation or parameter update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignArtifact {
    pub generation: u64,
    /// Hex SHA-256 of the canonical JSON mesh list.
    pub digest: String,
    pub seed: u64,
    /// Canonical source of the logic program.
    pub source: String,
    pub keys: Vec<RegistryKey>,
    pub params: ParamSet,
    pub eval: EvalResult,
    /// One mesh per emitted shape, in emit order.
    pub meshes: Vec<TriMesh>,
    #[serde(skip)]
    pub program: Program,
}

impl DesignArtifact {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        generation: u64,
        program: Program,
        keys: Vec<RegistryKey>,
        params: ParamSet,
        eval: EvalResult,
        seed: u64,
        resolution: u32,
    ) -> Result<Self, GeometryError> {
        let mut meshes = eval
            .shapes
            .iter()
            .map(|s| tessellate(s, resolution))
            .collect::<Result<Vec<_>, _>>()?;
        for m in &mut meshes {
            m.generation = generation;
        }
        Ok(DesignArtifact {
            generation,
            digest: mesh_digest(&meshes),
            seed,
            source: crate::pdl::format(&program),
            keys,
            params,
            eval,
            meshes,
            program,
        })
    }

    /// The native JSON document: meshes, parameter snapshot and program source.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("artifact serializes")
    }

    /// Concatenated OBJ with one object group per emitted shape.
    pub fn to_obj(&self) -> String {
        to_obj_groups(&self.meshes)
    }
}
