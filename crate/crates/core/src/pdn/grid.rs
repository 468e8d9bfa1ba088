// SPDX-License-Identifier: Apache-2.0

use super::solver::{conjugate_gradient, CgOptions, CsrMatrix, Solution};
use crate::design::DesignBundle;
use crate::error::{Error, Result};

/// Electrical parameters of the synthetic power grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdnConfig {
    /// Mesh node spacing, µm. Must divide both chip dimensions.
    pub pitch: f64,
    /// Resistance of one mesh segment between adjacent nodes, Ω.
    pub segment_resistance: f64,
    /// Resistance of a via stack from the ideal supply to its mesh node, Ω.
    pub via_resistance: f64,
    /// Resistance from a mesh node down to an attached instance's rail pin, Ω.
    pub attach_resistance: f64,
}

impl Default for PdnConfig {
    fn default() -> Self {
        Self {
            pitch: crate::TILE_SIZE,
            segment_resistance: 30.0,
            via_resistance: 60.0,
            attach_resistance: 250.0,
        }
    }
}

/// Reduced nodal system `G·d = i` of a resistive mesh, in drop variables
/// `d = V_dd − v`. Supply (pad) nodes are eliminated: their connection
/// conductances land on the diagonal.
#[derive(Debug, Clone)]
pub struct GridModel {
    matrix: CsrMatrix,
    pads: usize,
    /// Mesh node per instance; empty for hand-built grids.
    pub attach: Vec<u32>,
    pub attach_resistance: f64,
    /// Mesh dimensions when built from a design.
    pub mesh: Option<(usize, usize, f64)>,
}

impl GridModel {
    /// Builds from an explicit graph. `edges` are `(a, b, conductance)`,
    /// `pads` are `(node, conductance to the ideal supply)`.
    pub fn from_graph(nodes: usize, edges: &[(usize, usize, f64)], pads: &[(usize, f64)]) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::Grid("grid has no nodes".into()));
        }
        if pads.is_empty() {
            return Err(Error::Grid("no pads: nothing holds the grid at V_dd".into()));
        }
        let positive = |g: f64| g > 0.0 && g.is_finite();
        let mut triplets = Vec::with_capacity(4 * edges.len() + pads.len());
        let mut adj = vec![Vec::new(); nodes];
        for &(a, b, g) in edges {
            if a >= nodes || b >= nodes || a == b {
                return Err(Error::Grid(format!("bad edge ({a}, {b})")));
            }
            if !positive(g) {
                return Err(Error::Grid(format!("edge ({a}, {b}) conductance {g} is not positive")));
            }
            triplets.extend([(a, a, g), (b, b, g), (a, b, -g), (b, a, -g)]);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut reached = vec![false; nodes];
        let mut stack = Vec::new();
        for &(n, g) in pads {
            if n >= nodes {
                return Err(Error::Grid(format!("pad on missing node {n}")));
            }
            if !positive(g) {
                return Err(Error::Grid(format!("pad at node {n} conductance {g} is not positive")));
            }
            triplets.push((n, n, g));
            if !reached[n] {
                reached[n] = true;
                stack.push(n);
            }
        }
        while let Some(n) = stack.pop() {
            for &m in &adj[n] {
                if !reached[m] {
                    reached[m] = true;
                    stack.push(m);
                }
            }
        }
        if let Some(n) = reached.iter().position(|r| !r) {
            return Err(Error::Grid(format!("node {n} has no resistive path to a pad")));
        }
        Ok(Self {
            matrix: CsrMatrix::from_triplets(nodes, triplets),
            pads: pads.len(),
            attach: Vec::new(),
            attach_resistance: 0.0,
            mesh: None,
        })
    }

    /// Single-layer mesh over the chip with one node per `pitch × pitch` cell,
    /// each via stack tied to its nearest node, each instance attached to its
    /// nearest node.
    pub fn build(design: &DesignBundle, config: &PdnConfig) -> Result<Self> {
        let cells = |extent: f64| -> Result<usize> {
            let n = (extent / config.pitch).round();
            if n < 1.0 || (n * config.pitch - extent).abs() > 1e-9 * extent.max(1.0) {
                return Err(Error::Grid(format!(
                    "pitch {} does not divide chip extent {extent}",
                    config.pitch
                )));
            }
            Ok(n as usize)
        };
        let nx = cells(design.width)?;
        let ny = cells(design.length)?;
        for (name, r) in [
            ("segment", config.segment_resistance),
            ("via", config.via_resistance),
            ("attach", config.attach_resistance),
        ] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Grid(format!("{name} resistance must be positive, got {r}")));
            }
        }
        let node = |ix: usize, iy: usize| iy * nx + ix;
        let nearest = |x: f64, y: f64| {
            let ix = ((x / config.pitch).floor().max(0.0) as usize).min(nx - 1);
            let iy = ((y / config.pitch).floor().max(0.0) as usize).min(ny - 1);
            node(ix, iy)
        };
        let g = 1.0 / config.segment_resistance;
        let mut edges = Vec::with_capacity(2 * nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                if ix + 1 < nx {
                    edges.push((node(ix, iy), node(ix + 1, iy), g));
                }
                if iy + 1 < ny {
                    edges.push((node(ix, iy), node(ix, iy + 1), g));
                }
            }
        }
        let pads: Vec<(usize, f64)> = design
            .vias()
            .iter()
            .map(|v| (nearest(v.x, v.y), 1.0 / config.via_resistance))
            .collect();
        let mut grid = Self::from_graph(nx * ny, &edges, &pads)?;
        grid.attach = design.instances().iter().map(|i| nearest(i.x, i.y) as u32).collect();
        grid.attach_resistance = config.attach_resistance;
        grid.mesh = Some((nx, ny, config.pitch));
        Ok(grid)
    }

    pub fn nodes(&self) -> usize {
        self.matrix.dim()
    }

    pub fn pads(&self) -> usize {
        self.pads
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Node drops for the given node current sinks, A → V.
    pub fn solve_dc(&self, currents: &[f64]) -> Result<Solution> {
        if currents.len() != self.nodes() {
            return Err(Error::Grid(format!(
                "{} currents for {} nodes",
                currents.len(),
                self.nodes()
            )));
        }
        conjugate_gradient(&self.matrix, currents, CgOptions::default())
    }
}
