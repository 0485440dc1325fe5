use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sde::ControlSetLabel;

/// A uniform axis `lo, lo + h, ..., lo + (count - 1) h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceAxis {
    pub lo: f64,
    pub h: f64,
    pub count: usize,
}

impl SpaceAxis {
    pub fn hi(&self) -> f64 {
        self.lo + self.h * (self.count - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + self.h * i as f64
    }

    /// Nearest node index, clamped to the axis.
    pub fn nearest(&self, x: f64) -> usize {
        if self.count == 1 {
            return 0;
        }
        let r = libm::round((x - self.lo) / self.h);
        if r <= 0.0 {
            0
        } else {
            (r as usize).min(self.count - 1)
        }
    }
}

/// A Markov feedback map `(t, x) ↦ control index`, tabulated per time layer
/// and spatial node.
///
/// Layer `k` covers `[t0 + k·dt, t0 + (k+1)·dt)`; the last layer extends to
/// the end of time. Space is read at the nearest node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackMap {
    target: ControlSetLabel,
    t0: f64,
    dt: f64,
    layers: usize,
    axes: Vec<SpaceAxis>,
    table: Vec<u32>,
}

impl FeedbackMap {
    pub fn new(target: ControlSetLabel, t0: f64, dt: f64, axes: Vec<SpaceAxis>, table: Vec<u32>) -> Result<Self> {
        let nodes: usize = axes.iter().map(|a| a.count).product();
        if axes.is_empty() || nodes == 0 || table.is_empty() || !table.len().is_multiple_of(nodes) {
            return Err(Error::InvalidInput("feedback table does not match its grid".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidInput("feedback layer width must be positive".into()));
        }
        Ok(Self {
            target,
            t0,
            dt,
            layers: table.len() / nodes,
            axes,
            table,
        })
    }

    /// The map that always returns `index`.
    pub fn constant(target: ControlSetLabel, dim: usize, index: usize) -> Self {
        Self {
            target,
            t0: 0.0,
            dt: 1.0,
            layers: 1,
            axes: vec![
                SpaceAxis {
                    lo: 0.0,
                    h: 1.0,
                    count: 1
                };
                dim
            ],
            table: vec![index as u32],
        }
    }

    pub fn target(&self) -> ControlSetLabel {
        self.target
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn axes(&self) -> &[SpaceAxis] {
        &self.axes
    }

    pub fn nodes_per_layer(&self) -> usize {
        self.table.len() / self.layers
    }

    pub fn layer_of(&self, t: f64) -> usize {
        let k = libm::floor((t - self.t0) / self.dt + 1e-9);
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.layers - 1)
        }
    }

    pub fn node_of(&self, x: &[f64]) -> usize {
        let mut node = 0;
        for (axis, xi) in self.axes.iter().zip(x) {
            node = node * axis.count + axis.nearest(*xi);
        }
        node
    }

    pub fn at(&self, layer: usize, node: usize) -> usize {
        self.table[layer * self.nodes_per_layer() + node] as usize
    }

    pub fn lookup(&self, t: f64, x: &[f64]) -> usize {
        self.at(self.layer_of(t), self.node_of(x))
    }

    /// Largest control index used anywhere in the table.
    pub fn max_index(&self) -> usize {
        self.table.iter().copied().max().unwrap_or(0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_uses_layer_interval_and_nearest_node() {
        let axes = vec![SpaceAxis {
            lo: -1.0,
            h: 1.0,
            count: 3,
        }];
        // two layers on [0, 0.5), [0.5, 1]
        let map = FeedbackMap::new(ControlSetLabel::U, 0.0, 0.5, axes, vec![0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(map.lookup(0.0, &[-1.0]), 0);
        assert_eq!(map.lookup(0.49, &[0.2]), 1);
        assert_eq!(map.lookup(0.5, &[0.6]), 5);
        assert_eq!(map.lookup(1.0, &[-7.0]), 3);
        assert_eq!(map.lookup(3.0, &[9.0]), 5);
    }

    #[test]
    fn constant_map() {
        let map = FeedbackMap::constant(ControlSetLabel::V, 2, 3);
        assert_eq!(map.lookup(0.7, &[1.0, -4.0]), 3);
    }

    #[test]
    fn rejects_mismatched_table() {
        let axes = vec![SpaceAxis {
            lo: 0.0,
            h: 1.0,
            count: 3,
        }];
        assert!(FeedbackMap::new(ControlSetLabel::U, 0.0, 0.5, axes, vec![0, 1]).is_err());
    }
}
