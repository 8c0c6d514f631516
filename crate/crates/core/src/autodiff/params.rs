use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::tape::{Adjoints, Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat trainable values with a named block layout.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Vec<ParamBlock>,
}

impl ParamVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a block; `values.len()` must equal the shape product.
    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], values: &[f64]) {
        let len: usize = shape.iter().product();
        assert_eq!(len, values.len(), "param block length");
        self.layout.push(ParamBlock {
            name: name.into(),
            offset: self.values.len(),
            shape: shape.to_vec(),
        });
        self.values.extend_from_slice(values);
    }

    /// Appends every block of `other` with a name prefix.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &ParamVector) {
        for b in &other.layout {
            let mut name = String::from(prefix);
            name.push_str(&b.name);
            self.push(name, &b.shape, &other.values[b.offset..b.offset + b.len()]);
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.layout.iter().find(|b| b.name == name)
    }

    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.block(name).map(|b| &self.values[b.offset..b.offset + b.len()])
    }

    pub fn slice_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let b = self.block(name)?.clone();
        Some(&mut self.values[b.offset..b.offset + b.len()])
    }

    pub fn block_values(&self, index: usize) -> &[f64] {
        let b = &self.layout[index];
        &self.values[b.offset..b.offset + b.len()]
    }

    /// Checks that blocks tile the value array contiguously.
    pub fn validate(&self) -> Result<()> {
        let mut expected = 0;
        for b in &self.layout {
            if b.offset != expected {
                return Err(Error::Shape(alloc::format!(
                    "block {} starts at {} instead of {}",
                    b.name,
                    b.offset,
                    expected
                )));
            }
            expected += b.len();
        }
        if expected != self.values.len() {
            return Err(Error::LengthMismatch {
                what: "parameter values",
                expected,
                got: self.values.len(),
            });
        }
        Ok(())
    }

    /// Records every block as a trainable leaf.
    pub fn record(&self, tape: &mut Tape) -> ParamLeaves {
        let vars = (0..self.layout.len())
            .map(|i| tape.param(self.block_values(i)))
            .collect();
        ParamLeaves { vars }
    }

    /// Records every block as a constant leaf (no gradient requested).
    pub fn record_const(&self, tape: &mut Tape) -> ParamLeaves {
        let vars = (0..self.layout.len())
            .map(|i| tape.constant(self.block_values(i)))
            .collect();
        ParamLeaves { vars }
    }
}

/// Tape leaves of one [`ParamVector`], one per block, in layout order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLeaves {
    pub vars: Vec<Var>,
}

impl ParamLeaves {
    /// Gradient aligned with the flat parameter values.
    pub fn gather(&self, adj: &Adjoints) -> Vec<f64> {
        adj.gather(&self.vars)
    }
}
