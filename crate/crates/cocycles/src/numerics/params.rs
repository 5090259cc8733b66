//! Named, flattened parameter storage shared by models and optimizers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CocycleError, Result};

/// Flat parameter storage partitioned into uniquely named blocks.
///
/// The flat layout is what the tape and optimizer see; block names exist for
/// diagnostics and serialization. Blocks keep their insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    names: Vec<String>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new() -> Self {
        ParameterVector { names: Vec::new(), offsets: vec![0], values: Vec::new() }
    }

    /// Appends a named block; block names must be unique.
    pub fn push_block(&mut self, name: impl Into<String>, values: &[f64]) {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "duplicate parameter block `{name}`"
        );
        self.names.push(name);
        self.values.extend_from_slice(values);
        self.offsets.push(self.values.len());
    }

    pub fn total_dim(&self) -> usize {
        self.values.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.names.len()
    }

    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Replaces all values, keeping the block structure.
    pub fn set_flat(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.values.len(), "flat size mismatch");
        self.values.copy_from_slice(values);
    }

    pub fn block_names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&self.values[self.offsets[i]..self.offsets[i + 1]])
    }

    pub fn block_range(&self, index: usize) -> std::ops::Range<usize> {
        self.offsets[index]..self.offsets[index + 1]
    }

    pub fn block_name(&self, index: usize) -> &str {
        &self.names[index]
    }

    /// Name of the block containing flat index `i`.
    pub fn block_of(&self, i: usize) -> &str {
        let b = match self.offsets.binary_search(&i) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        &self.names[b.min(self.names.len() - 1)]
    }

    /// A vector with the same block structure and all values zero.
    pub fn zeros_like(&self) -> Self {
        ParameterVector {
            names: self.names.clone(),
            offsets: self.offsets.clone(),
            values: vec![0.0; self.values.len()],
        }
    }

    /// Same structure, values taken from `flat`.
    pub fn with_values(&self, flat: Vec<f64>) -> Self {
        assert_eq!(flat.len(), self.values.len(), "flat size mismatch");
        ParameterVector {
            names: self.names.clone(),
            offsets: self.offsets.clone(),
            values: flat,
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.names == other.names && self.offsets == other.offsets
    }

    /// Errors with the offending block name if any value is non-finite.
    pub fn check_finite(&self) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(CocycleError::NonFiniteParam {
                    block: self.block_of(i).to_string(),
                });
            }
        }
        Ok(())
    }

    /// Flat JSON document mapping block name to its scalar list.
    pub fn to_json_map(&self) -> BTreeMap<String, Vec<f64>> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), self.values[self.block_range(i)].to_vec()))
            .collect()
    }

    /// Rebuilds values from a block-name map; the structure must match.
    pub fn load_json_map(&mut self, map: &BTreeMap<String, Vec<f64>>) -> Result<()> {
        for (i, name) in self.names.clone().iter().enumerate() {
            let vals = map.get(name).ok_or_else(|| {
                CocycleError::ShapeMismatch(format!("missing parameter block `{name}`"))
            })?;
            let range = self.block_range(i);
            if vals.len() != range.len() {
                return Err(CocycleError::ShapeMismatch(format!(
                    "block `{name}` expects {} values, got {}",
                    range.len(),
                    vals.len()
                )));
            }
            self.values[range].copy_from_slice(vals);
        }
        Ok(())
    }
}

impl Default for ParameterVector {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_flatten_in_order() {
        let mut p = ParameterVector::new();
        p.push_block("a", &[1.0, 2.0]);
        p.push_block("b", &[3.0]);
        assert_eq!(p.total_dim(), 3);
        assert_eq!(p.flat(), &[1.0, 2.0, 3.0]);
        assert_eq!(p.block("b"), Some(&[3.0][..]));
        assert_eq!(p.block_of(0), "a");
        assert_eq!(p.block_of(2), "b");
    }

    #[test]
    fn json_round_trip() {
        let mut p = ParameterVector::new();
        p.push_block("w", &[0.5, -0.25]);
        p.push_block("b", &[0.0]);
        let map = p.to_json_map();
        let mut q = p.zeros_like();
        q.load_json_map(&map).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn non_finite_names_block() {
        let mut p = ParameterVector::new();
        p.push_block("ok", &[1.0]);
        p.push_block("bad", &[f64::NAN]);
        match p.check_finite() {
            Err(CocycleError::NonFiniteParam { block }) => assert_eq!(block, "bad"),
            other => panic!("expected NonFiniteParam, got {other:?}"),
        }
    }
}
