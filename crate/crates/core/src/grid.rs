//! Uniform tensor-product grids: the channel cross section (an interval or
//! a rectangle, Dirichlet on the whole boundary) and truncated channels
//! carrying the exponential axial weight.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Cross-section domain with a uniform grid per dimension.
/// Boundary nodes are part of the layout and hold Dirichlet zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum CrossSectionGrid {
    Interval { length: f64, nodes: usize },
    Rectangle { lengths: [f64; 2], nodes: [usize; 2] },
}

impl CrossSectionGrid {
    pub fn interval(length: f64, nodes: usize) -> Result<Self> {
        let g = CrossSectionGrid::Interval { length, nodes };
        g.validate()?;
        Ok(g)
    }

    pub fn rectangle(lengths: [f64; 2], nodes: [usize; 2]) -> Result<Self> {
        let g = CrossSectionGrid::Rectangle { lengths, nodes };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |length: f64, nodes: usize| -> Result<()> {
            if !(length.is_finite() && length > 0.0) {
                return Err(Error::config("cross-section length must be positive"));
            }
            if nodes < 3 {
                return Err(Error::config("cross-section needs at least 3 nodes"));
            }
            Ok(())
        };
        match *self {
            CrossSectionGrid::Interval { length, nodes } => check(length, nodes),
            CrossSectionGrid::Rectangle { lengths, nodes } => {
                check(lengths[0], nodes[0])?;
                check(lengths[1], nodes[1])
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CrossSectionGrid::Interval { .. } => 1,
            CrossSectionGrid::Rectangle { .. } => 2,
        }
    }

    /// Grid spacings per dimension; spacing * (nodes - 1) recovers the
    /// length up to rounding.
    pub fn spacings(&self) -> Vec<f64> {
        match *self {
            CrossSectionGrid::Interval { length, nodes } => vec![length / (nodes - 1) as f64],
            CrossSectionGrid::Rectangle { lengths, nodes } => vec![
                lengths[0] / (nodes[0] - 1) as f64,
                lengths[1] / (nodes[1] - 1) as f64,
            ],
        }
    }

    pub fn total_nodes(&self) -> usize {
        match *self {
            CrossSectionGrid::Interval { nodes, .. } => nodes,
            CrossSectionGrid::Rectangle { nodes, .. } => nodes[0] * nodes[1],
        }
    }

    pub fn interior_nodes(&self) -> usize {
        match *self {
            CrossSectionGrid::Interval { nodes, .. } => nodes - 2,
            CrossSectionGrid::Rectangle { nodes, .. } => (nodes[0] - 2) * (nodes[1] - 2),
        }
    }

    /// Area (or length) of the cross-section domain.
    pub fn measure(&self) -> f64 {
        match *self {
            CrossSectionGrid::Interval { length, .. } => length,
            CrossSectionGrid::Rectangle { lengths, .. } => lengths[0] * lengths[1],
        }
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        match *self {
            CrossSectionGrid::Interval { nodes, .. } => idx == 0 || idx == nodes - 1,
            CrossSectionGrid::Rectangle { nodes, .. } => {
                let (i, j) = (idx / nodes[1], idx % nodes[1]);
                i == 0 || i == nodes[0] - 1 || j == 0 || j == nodes[1] - 1
            }
        }
    }

    /// Trapezoidal quadrature weight of node `idx` (product rule).
    pub fn quad_weight(&self, idx: usize) -> f64 {
        fn w1(i: usize, n: usize, h: f64) -> f64 {
            if i == 0 || i == n - 1 {
                0.5 * h
            } else {
                h
            }
        }
        match *self {
            CrossSectionGrid::Interval { length, nodes } => {
                w1(idx, nodes, length / (nodes - 1) as f64)
            }
            CrossSectionGrid::Rectangle { lengths, nodes } => {
                let (i, j) = (idx / nodes[1], idx % nodes[1]);
                w1(i, nodes[0], lengths[0] / (nodes[0] - 1) as f64)
                    * w1(j, nodes[1], lengths[1] / (nodes[1] - 1) as f64)
            }
        }
    }

    /// Coordinate of node `idx` (one value per dimension).
    pub fn coordinate(&self, idx: usize) -> Vec<f64> {
        match *self {
            CrossSectionGrid::Interval { length, nodes } => {
                vec![idx as f64 * length / (nodes - 1) as f64]
            }
            CrossSectionGrid::Rectangle { lengths, nodes } => {
                let (i, j) = (idx / nodes[1], idx % nodes[1]);
                vec![
                    i as f64 * lengths[0] / (nodes[0] - 1) as f64,
                    j as f64 * lengths[1] / (nodes[1] - 1) as f64,
                ]
            }
        }
    }
}

/// Truncated channel [x_min, x_max] x cross section. The axial weight at
/// station i is exp(x_i), always computed from the station coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub axial_nodes: usize,
    pub cross: CrossSectionGrid,
}

impl ChannelGrid {
    pub fn new(x_min: f64, x_max: f64, axial_nodes: usize, cross: CrossSectionGrid) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::config("channel needs x_min < x_max, both finite"));
        }
        if axial_nodes < 3 {
            return Err(Error::config("channel needs at least 3 axial stations"));
        }
        cross.validate()?;
        Ok(ChannelGrid {
            x_min,
            x_max,
            axial_nodes,
            cross,
        })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.axial_nodes - 1) as f64
    }

    pub fn x(&self, ix: usize) -> f64 {
        debug_assert!(ix < self.axial_nodes);
        self.x_min + ix as f64 * self.dx()
    }

    /// Axial trapezoid weight (dx, halved at the two end stations).
    pub fn axial_quad_weight(&self, ix: usize) -> f64 {
        let dx = self.dx();
        if ix == 0 || ix == self.axial_nodes - 1 {
            0.5 * dx
        } else {
            dx
        }
    }

    pub fn weight(&self, ix: usize) -> f64 {
        self.x(ix).exp()
    }

    pub fn total_nodes(&self) -> usize {
        self.axial_nodes * self.cross.total_nodes()
    }

    /// Flat index of (axial station, cross node): row-major in x then y.
    pub fn index(&self, ix: usize, ic: usize) -> usize {
        ix * self.cross.total_nodes() + ic
    }

    /// Half-cylinder configuration: fields of the weighted class vanish at
    /// the right end as well.
    pub fn is_half_cylinder(&self) -> bool {
        self.x_max == 0.0
    }

    /// True if the node lies on any Dirichlet row of the configuration:
    /// the cross-section boundary at every station, plus both axial ends
    /// (values there are data, not unknowns).
    pub fn is_boundary(&self, ix: usize, ic: usize) -> bool {
        ix == 0 || ix == self.axial_nodes - 1 || self.cross.is_boundary(ic)
    }

    /// Station nearest to coordinate `x`, clamped to the grid.
    pub fn nearest_station(&self, x: f64) -> usize {
        let t = (x - self.x_min) / self.dx();
        (t.round().max(0.0) as usize).min(self.axial_nodes - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_layout_and_weights() {
        let g = CrossSectionGrid::interval(4.0, 5).unwrap();
        assert_eq!(g.total_nodes(), 5);
        assert_eq!(g.interior_nodes(), 3);
        assert_eq!(g.spacings(), vec![1.0]);
        assert!(g.is_boundary(0) && g.is_boundary(4) && !g.is_boundary(2));
        // Trapezoid weights sum to the length.
        let s: f64 = (0..5).map(|i| g.quad_weight(i)).sum();
        assert!((s - 4.0).abs() < 1e-15);
    }

    #[test]
    fn rectangle_layout() {
        let g = CrossSectionGrid::rectangle([2.0, 3.0], [5, 7]).unwrap();
        assert_eq!(g.total_nodes(), 35);
        assert_eq!(g.interior_nodes(), 15);
        let s: f64 = (0..35).map(|i| g.quad_weight(i)).sum();
        assert!((s - 6.0).abs() < 1e-12);
        assert!(g.is_boundary(0) && g.is_boundary(6) && g.is_boundary(34));
        assert!(!g.is_boundary(8)); // (1,1)
    }

    #[test]
    fn channel_stations_and_exact_weight() {
        let cross = CrossSectionGrid::interval(4.0, 5).unwrap();
        let ch = ChannelGrid::new(-40.0, 0.0, 401, cross).unwrap();
        assert!((ch.dx() - 0.1).abs() < 1e-15);
        assert_eq!(ch.x(0), -40.0);
        assert_eq!(ch.x(400), 0.0);
        assert!((ch.weight(400) - 1.0).abs() < 1e-15);
        assert!(ch.is_half_cylinder());
        assert_eq!(ch.nearest_station(-39.96), 0);
        assert_eq!(ch.nearest_station(17.0), 400);
    }

    #[test]
    fn grid_validation_errors() {
        assert!(CrossSectionGrid::interval(-1.0, 5).is_err());
        assert!(CrossSectionGrid::interval(4.0, 2).is_err());
        let cross = CrossSectionGrid::interval(4.0, 5).unwrap();
        assert!(ChannelGrid::new(0.0, 0.0, 10, cross.clone()).is_err());
        assert!(ChannelGrid::new(-1.0, 1.0, 2, cross).is_err());
    }
}
