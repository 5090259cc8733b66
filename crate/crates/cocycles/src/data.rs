//! Observational data: rows of (covariates z, treatment x, outcomes y).

use serde::{Deserialize, Serialize};

use crate::cocycle::ContextLayout;
use crate::error::{CocycleError, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub z: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(z: Vec<Vec<f64>>, x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> Result<Self> {
        if x.len() != y.len() || (!z.is_empty() && z.len() != x.len()) {
            return Err(CocycleError::ShapeMismatch(format!(
                "column groups disagree on row count: z={}, x={}, y={}",
                z.len(),
                x.len(),
                y.len()
            )));
        }
        let d = Dataset { z, x, y };
        for i in 0..d.n() {
            let finite = d.x[i].iter().chain(&d.y[i]).chain(d.z_row(i)).all(|v| v.is_finite());
            if !finite {
                return Err(CocycleError::Degenerate(format!("non-finite value in row {i}")));
            }
        }
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x_dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn z_dim(&self) -> usize {
        self.z.first().map_or(0, Vec::len)
    }

    pub fn y_dim(&self) -> usize {
        self.y.first().map_or(0, Vec::len)
    }

    fn z_row(&self, i: usize) -> &[f64] {
        if self.z.is_empty() {
            &[]
        } else {
            &self.z[i]
        }
    }

    pub fn layout(&self) -> ContextLayout {
        ContextLayout { x_dim: self.x_dim(), z_dim: self.z_dim() }
    }

    /// Context vector `(x_i, z_i)` for unit `i`.
    pub fn context(&self, i: usize) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.x_dim() + self.z_dim());
        c.extend_from_slice(&self.x[i]);
        c.extend_from_slice(self.z_row(i));
        c
    }

    /// Context with the treatment replaced by `x_new`.
    pub fn context_at(&self, i: usize, x_new: &[f64]) -> Vec<f64> {
        assert_eq!(x_new.len(), self.x_dim());
        let mut c = Vec::with_capacity(self.x_dim() + self.z_dim());
        c.extend_from_slice(x_new);
        c.extend_from_slice(self.z_row(i));
        c
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            z: if self.z.is_empty() {
                Vec::new()
            } else {
                indices.iter().map(|&i| self.z[i].clone()).collect()
            },
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i].clone()).collect(),
        }
    }
}
