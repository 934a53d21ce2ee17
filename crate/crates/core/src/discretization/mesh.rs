use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of (0, 1) into `n_cells` cells of width `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub n_cells: usize,
    pub h: f64,
}

impl Mesh {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::param("n_cells", format!("need at least 2 cells, got {n_cells}")));
        }
        Ok(Mesh {
            n_cells,
            h: 1.0 / n_cells as f64,
        })
    }

    pub fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.h
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|k| self.center(k)).collect()
    }

    /// Interior edge positions `x_{K+1/2}`, `K = 0..n-2`.
    pub fn interior_edges(&self) -> Vec<f64> {
        (1..self.n_cells).map(|k| k as f64 * self.h).collect()
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len == self.n_cells {
            Ok(())
        } else {
            Err(Error::FieldLength {
                expected: self.n_cells,
                got: len,
            })
        }
    }

    /// Samples `f` at cell centers.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.centers().into_iter().map(f).collect()
    }
}

/// Cell values with optional traces at x = 0 and x = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub cells: Vec<f64>,
    pub traces: Option<[f64; 2]>,
}

impl Field {
    pub fn new(mesh: &Mesh, cells: Vec<f64>) -> Result<Self> {
        mesh.check_len(cells.len())?;
        Ok(Field {
            cells,
            traces: None,
        })
    }

    pub fn with_traces(mesh: &Mesh, cells: Vec<f64>, traces: [f64; 2]) -> Result<Self> {
        mesh.check_len(cells.len())?;
        Ok(Field {
            cells,
            traces: Some(traces),
        })
    }
}
