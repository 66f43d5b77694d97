use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Shape};

/// Identifier of a shape in a [`ShapeRegistry`]. Ids are never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShapeId(pub u64);

impl fmt::Display for ShapeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "shape#{}", self.0)
    }
}

/// Insertion-ordered store of the shapes a session can reference.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeRegistry {
    shapes: IndexMap<ShapeId, Shape>,
    next_id: u64,
}

/// A single registry command; see [`ShapeRegistry::apply`].
#[derive(Debug, Clone, PartialEq)]
pub enum RegistryCommand {
    Add(Shape),
    Replace(ShapeId, Shape),
    Remove(ShapeId),
    Get(ShapeId),
    List,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegistryOutput {
    Id(ShapeId),
    Shape(Shape),
    Shapes(Vec<(ShapeId, Shape)>),
}

impl ShapeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, shape: Shape) -> Result<ShapeId, GeometryError> {
        shape.validate()?;
        self.next_id += 1;
        let id = ShapeId(self.next_id);
        self.shapes.insert(id, shape);
        Ok(id)
    }

    pub fn get(&self, id: ShapeId) -> Result<&Shape, GeometryError> {
        self.shapes.get(&id).ok_or(GeometryError::UnknownShapeId(id))
    }

    /// Swaps the shape stored under `id`, keeping its position and id.
    pub fn replace(&mut self, id: ShapeId, shape: Shape) -> Result<Shape, GeometryError> {
        shape.validate()?;
        let slot = self
            .shapes
            .get_mut(&id)
            .ok_or(GeometryError::UnknownShapeId(id))?;
        Ok(std::mem::replace(slot, shape))
    }

    pub fn remove(&mut self, id: ShapeId) -> Result<Shape, GeometryError> {
        self.shapes
            .shift_remove(&id)
            .ok_or(GeometryError::UnknownShapeId(id))
    }

    pub fn list(&self) -> Vec<(ShapeId, Shape)> {
        self.shapes.iter().map(|(k, v)| (*k, v.clone())).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = ShapeId> + '_ {
        self.shapes.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn apply(&mut self, command: RegistryCommand) -> Result<RegistryOutput, GeometryError> {
        match command {
            RegistryCommand::Add(s) => self.add(s).map(RegistryOutput::Id),
            RegistryCommand::Replace(id, s) => self.replace(id, s).map(|_| RegistryOutput::Id(id)),
            RegistryCommand::Remove(id) => self.remove(id).map(RegistryOutput::Shape),
            RegistryCommand::Get(id) => self.get(id).cloned().map(RegistryOutput::Shape),
            RegistryCommand::List => Ok(RegistryOutput::Shapes(self.list())),
        }
    }
}
