//! Optimal and ranked assignment, and k-best subset selection.

mod kbest;
mod lsap;
mod murty;

pub use kbest::{kbest_subsets, SubsetSolution};
pub use lsap::{solve, Assignment};
pub use murty::{ranked_assignments, RankedAssignments};

/// Dense row-major cost matrix. `f64::INFINITY` marks a forbidden pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost matrix data has the wrong length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Total cost of a row-to-column assignment.
    pub fn cost_of(&self, cols: &[usize]) -> f64 {
        cols.iter().enumerate().map(|(r, &c)| self.get(r, c)).sum()
    }
}
