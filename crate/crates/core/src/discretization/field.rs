use crate::discretization::grid::{Grid, GridId, Node};
use crate::error::{Error, Result};

/// Real-valued grid function on the interior nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridId,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Field {
            grid: grid.id(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Field {
            grid: grid.id(),
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&Node) -> f64) -> Self {
        let values = grid.nodes().map(|n| f(&n)).collect();
        Field {
            grid: grid.id(),
            values,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!("non-finite value at node {i}")));
        }
        Ok(Field {
            grid: grid.id(),
            values,
        })
    }

    /// Builds a field from values already known to match the grid.
    pub(crate) fn from_raw(grid: GridId, values: Vec<f64>) -> Self {
        Field { grid, values }
    }

    pub fn grid_id(&self) -> GridId {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.grid.to_string(),
                right: other.grid.to_string(),
            })
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Ok(self.zip_map_unchecked(other, f))
    }

    pub(crate) fn zip_map_unchecked(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field {
            grid: self.grid,
            values,
        }
    }

    pub fn scaled(&self, factor: f64) -> Field {
        self.map(|v| factor * v)
    }

    pub fn abs(&self) -> Field {
        self.map(f64::abs)
    }

    /// `self + factor * other`
    pub fn add_scaled(&self, factor: f64, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + factor * b)
    }

    /// Positive part max(u, 0).
    pub fn positive_part(&self) -> Field {
        self.map(|v| v.max(0.0))
    }

    /// Negative part max(-u, 0), returned as a nonnegative field.
    pub fn negative_part(&self) -> Field {
        self.map(|v| (-v).max(0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Grid {
    pub fn check_field(&self, field: &Field) -> Result<()> {
        self.check(field.grid_id())
    }
}

impl std::ops::Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|v| -v)
    }
}

impl std::ops::Neg for Field {
    type Output = Field;
    fn neg(mut self) -> Field {
        self.values.iter_mut().for_each(|v| *v = -*v);
        self
    }
}
