use std::str::FromStr;

use super::{CellGeometry, Face, PerforatedDomain};
use crate::error::{Error, Result};

const INACTIVE: usize = usize::MAX;

/// Label carried by a boundary facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FacetLabel {
    /// ∂Ω, the outer boundary of the macroscopic domain.
    Outer,
    /// Insulated part of the pore surface.
    GammaN,
    /// Robin part of the pore surface.
    GammaR,
    /// ∂Y of a cell mesh; identified with the opposite face.
    Periodic,
}

/// A selection of boundary facets for surface integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfacePart {
    Outer,
    GammaN,
    GammaR,
    /// The whole pore surface Γ^ε = Γ_N^ε ∪ Γ_R^ε.
    Gamma,
}

impl SurfacePart {
    pub fn contains(self, label: FacetLabel) -> bool {
        match self {
            SurfacePart::Outer => label == FacetLabel::Outer,
            SurfacePart::GammaN => label == FacetLabel::GammaN,
            SurfacePart::GammaR => label == FacetLabel::GammaR,
            SurfacePart::Gamma => matches!(label, FacetLabel::GammaN | FacetLabel::GammaR),
        }
    }
}

impl FromStr for SurfacePart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "outer" | "Outer" => Ok(SurfacePart::Outer),
            "gamma_n" | "GammaN" => Ok(SurfacePart::GammaN),
            "gamma_r" | "GammaR" => Ok(SurfacePart::GammaR),
            "gamma" | "Gamma" => Ok(SurfacePart::Gamma),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshKind {
    /// Mesh of the unit cell Y₁ with periodic identification of ∂Y.
    Cell,
    /// Mesh of Ω^ε (or of Ω when the cell has no hole).
    Domain { epsilon: f64 },
}

/// Active Q1 element; nodes are counter-clockwise from the lower-left corner.
#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub grid: [usize; 2],
    pub nodes: [usize; 4],
    pub origin: [f64; 2],
}

#[derive(Debug, Clone, Copy)]
pub struct Facet {
    pub nodes: [usize; 2],
    pub label: FacetLabel,
    /// The hole face this facet belongs to (pore facets only).
    pub hole_face: Option<Face>,
    pub length: f64,
}

/// Periodic identification of the nodes of a cell mesh.
#[derive(Debug, Clone)]
pub struct PeriodicMap {
    dof_of_node: Vec<usize>,
    n_dofs: usize,
    pairs: Vec<(usize, usize)>,
    boundary: Vec<(usize, usize)>,
}

impl PeriodicMap {
    /// Reduced (periodic) degree of freedom of every mesh node.
    pub fn dof_of_node(&self) -> &[usize] {
        &self.dof_of_node
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// `(slave, master)` node pairs: every node on the right or top face of Y
    /// with the node it is identified with.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Every node of ∂Y with its periodic partner on the opposite face
    /// (corners are paired diagonally).
    pub fn boundary_pairing(&self) -> &[(usize, usize)] {
        &self.boundary
    }
}

/// Structured mesh of axis-aligned square Q1 elements over the unit square,
/// with elements inside holes removed.
#[derive(Debug, Clone)]
pub struct Mesh {
    kind: MeshKind,
    cells: usize,
    h: f64,
    n_per_cell: usize,
    grid_node: Vec<usize>,
    grid_element: Vec<usize>,
    nodes: Vec<[f64; 2]>,
    node_grid: Vec<[usize; 2]>,
    elements: Vec<Element>,
    facets: Vec<Facet>,
    surface_nodes: Vec<usize>,
    surface_index: Vec<usize>,
    periodic: Option<PeriodicMap>,
}

impl Mesh {
    /// Mesh of Y₁ with `n` subdivisions per axis and periodic pairing.
    pub fn cell(cell: &CellGeometry, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one subdivision"));
        }
        let hole = cell.grid_hole(n)?;
        let mut mesh = Self::build(MeshKind::Cell, n, n, hole, cell, FacetLabel::Periodic);
        mesh.periodic = Some(mesh.periodic_map());
        Ok(mesh)
    }

    /// Mesh of Ω^ε with `n_per_cell` subdivisions per cell edge, h = ε/n_per_cell.
    pub fn perforated(domain: &PerforatedDomain, n_per_cell: usize) -> Result<Self> {
        if n_per_cell == 0 {
            return Err(Error::invalid("n_per_cell", "need at least one subdivision"));
        }
        let hole = domain.cell().grid_hole(n_per_cell)?;
        let cells = domain.cells_per_axis() * n_per_cell;
        Ok(Self::build(
            MeshKind::Domain {
                epsilon: domain.epsilon(),
            },
            cells,
            n_per_cell,
            hole,
            domain.cell(),
            FacetLabel::Outer,
        ))
    }

    /// Unperforated mesh of Ω with `cells` elements per axis.
    pub fn unit_square(cells: usize) -> Self {
        assert!(cells > 0, "unit square mesh needs at least one element");
        Self::build(
            MeshKind::Domain { epsilon: 1.0 },
            cells,
            cells,
            None,
            &CellGeometry::without_hole(),
            FacetLabel::Outer,
        )
    }

    fn build(
        kind: MeshKind,
        cells: usize,
        n_per_cell: usize,
        hole: Option<([usize; 2], [usize; 2])>,
        cell: &CellGeometry,
        outer_label: FacetLabel,
    ) -> Self {
        let h = 1.0 / cells as f64;
        let in_hole = |i: usize, j: usize| -> bool {
            hole.is_some_and(|(lo, hi)| {
                let (a, b) = (i % n_per_cell, j % n_per_cell);
                a >= lo[0] && a < hi[0] && b >= lo[1] && b < hi[1]
            })
        };
        let stride = cells + 1;

        let mut grid_element = vec![INACTIVE; cells * cells];
        let mut grid_node = vec![INACTIVE; stride * stride];
        // Mark nodes first so the numbering is lexicographic (x fastest).
        for j in 0..cells {
            for i in 0..cells {
                if !in_hole(i, j) {
                    for (di, dj) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
                        grid_node[(j + dj) * stride + i + di] = 0;
                    }
                }
            }
        }
        let mut nodes = Vec::new();
        let mut node_grid = Vec::new();
        for j in 0..stride {
            for i in 0..stride {
                let g = j * stride + i;
                if grid_node[g] != INACTIVE {
                    grid_node[g] = nodes.len();
                    nodes.push([i as f64 * h, j as f64 * h]);
                    node_grid.push([i, j]);
                }
            }
        }
        let node_at = |i: usize, j: usize| grid_node[j * stride + i];

        let mut elements = Vec::new();
        for j in 0..cells {
            for i in 0..cells {
                if in_hole(i, j) {
                    continue;
                }
                grid_element[j * cells + i] = elements.len();
                elements.push(Element {
                    grid: [i, j],
                    nodes: [node_at(i, j), node_at(i + 1, j), node_at(i + 1, j + 1), node_at(i, j + 1)],
                    origin: [i as f64 * h, j as f64 * h],
                });
            }
        }

        let pore_label = |face: Face| {
            if cell.is_robin(face) {
                FacetLabel::GammaR
            } else {
                FacetLabel::GammaN
            }
        };
        let mut facets = Vec::new();
        for e in &elements {
            let [i, j] = e.grid;
            // (edge nodes, neighbour grid cell, hole face seen from this element)
            let sides: [([usize; 2], Option<(usize, usize)>, Face); 4] = [
                ([e.nodes[0], e.nodes[1]], j.checked_sub(1).map(|jj| (i, jj)), Face::Top),
                ([e.nodes[1], e.nodes[2]], (i + 1 < cells).then_some((i + 1, j)), Face::Left),
                ([e.nodes[2], e.nodes[3]], (j + 1 < cells).then_some((i, j + 1)), Face::Bottom),
                ([e.nodes[3], e.nodes[0]], i.checked_sub(1).map(|ii| (ii, j)), Face::Right),
            ];
            for (fnodes, neighbour, face) in sides {
                match neighbour {
                    None => facets.push(Facet {
                        nodes: fnodes,
                        label: outer_label,
                        hole_face: None,
                        length: h,
                    }),
                    Some((ni, nj)) if in_hole(ni, nj) => facets.push(Facet {
                        nodes: fnodes,
                        label: pore_label(face),
                        hole_face: Some(face),
                        length: h,
                    }),
                    Some(_) => {}
                }
            }
        }

        let mut surface_index = vec![INACTIVE; nodes.len()];
        for f in facets
            .iter()
            .filter(|f| SurfacePart::Gamma.contains(f.label))
        {
            for &n in &f.nodes {
                surface_index[n] = 0;
            }
        }
        let mut surface_nodes = Vec::new();
        for (n, s) in surface_index.iter_mut().enumerate() {
            if *s != INACTIVE {
                *s = surface_nodes.len();
                surface_nodes.push(n);
            }
        }

        Self {
            kind,
            cells,
            h,
            n_per_cell,
            grid_node,
            grid_element,
            nodes,
            node_grid,
            elements,
            facets,
            surface_nodes,
            surface_index,
            periodic: None,
        }
    }

    fn periodic_map(&self) -> PeriodicMap {
        let n = self.cells;
        let mut dof_of_grid = vec![INACTIVE; n * n];
        let mut n_dofs = 0;
        let mut dof_of_node = vec![0; self.nodes.len()];
        for (node, &[i, j]) in self.node_grid.iter().enumerate() {
            if i < n && j < n {
                dof_of_grid[j * n + i] = n_dofs;
                dof_of_node[node] = n_dofs;
                n_dofs += 1;
            }
        }
        let mut pairs = Vec::new();
        let mut boundary = Vec::new();
        for (node, &[i, j]) in self.node_grid.iter().enumerate() {
            let (mi, mj) = (i % n, j % n);
            if i == n || j == n {
                let master = self.node_at_grid(mi, mj).expect("cell boundary nodes are active");
                dof_of_node[node] = dof_of_grid[mj * n + mi];
                pairs.push((node, master));
            }
            if i == 0 || j == 0 || i == n || j == n {
                let pi = if i == 0 { n } else if i == n { 0 } else { i };
                let pj = if j == 0 { n } else if j == n { 0 } else { j };
                let partner = self.node_at_grid(pi, pj).expect("cell boundary nodes are active");
                boundary.push((node, partner));
            }
        }
        PeriodicMap {
            dof_of_node,
            n_dofs,
            pairs,
            boundary,
        }
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    /// ε for domain meshes, 1 for cell meshes (coefficients are then evaluated at y = x).
    pub fn epsilon(&self) -> f64 {
        match self.kind {
            MeshKind::Cell => 1.0,
            MeshKind::Domain { epsilon } => epsilon,
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Elements per axis of the underlying grid.
    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn n_per_cell(&self) -> usize {
        self.n_per_cell
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node_grid(&self) -> &[[usize; 2]] {
        &self.node_grid
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facets_in(&self, part: SurfacePart) -> impl Iterator<Item = &Facet> {
        self.facets.iter().filter(move |f| part.contains(f.label))
    }

    /// Nodes incident to pore-surface facets (Γ_N ∪ Γ_R), ascending.
    pub fn surface_nodes(&self) -> &[usize] {
        &self.surface_nodes
    }

    /// Position of `node` in [`Mesh::surface_nodes`], if it lies on Γ^ε.
    pub fn surface_index(&self, node: usize) -> Option<usize> {
        let s = self.surface_index[node];
        (s != INACTIVE).then_some(s)
    }

    pub fn periodic(&self) -> Option<&PeriodicMap> {
        self.periodic.as_ref()
    }

    pub fn has_holes(&self) -> bool {
        self.elements.len() < self.cells * self.cells
    }

    pub fn node_at_grid(&self, i: usize, j: usize) -> Option<usize> {
        if i > self.cells || j > self.cells {
            return None;
        }
        let n = self.grid_node[j * (self.cells + 1) + i];
        (n != INACTIVE).then_some(n)
    }

    pub fn element_at_grid(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.cells || j >= self.cells {
            return None;
        }
        let e = self.grid_element[j * self.cells + i];
        (e != INACTIVE).then_some(e)
    }

    /// Total area of active elements.
    pub fn area(&self) -> f64 {
        self.elements.len() as f64 * self.h * self.h
    }

    /// Total length of the facets in `part`.
    pub fn surface_length(&self, part: SurfacePart) -> f64 {
        self.facets_in(part).map(|f| f.length).sum()
    }

    /// Active element containing `p` and the local coordinates of `p` in it.
    ///
    /// Points on shared edges resolve to any adjacent active element.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 2])> {
        let tol = 1e-9;
        let scaled = [p[0] / self.h, p[1] / self.h];
        let n = self.cells as f64;
        if scaled.iter().any(|&s| !s.is_finite() || s < -tol || s > n + tol) {
            return None;
        }
        let base = [
            (scaled[0].floor().max(0.0) as usize).min(self.cells - 1),
            (scaled[1].floor().max(0.0) as usize).min(self.cells - 1),
        ];
        let mut candidates = vec![base];
        for (di, dj) in [(-1i64, 0i64), (0, -1), (-1, -1), (1, 0), (0, 1), (1, 1), (1, -1), (-1, 1)] {
            let ci = base[0] as i64 + di;
            let cj = base[1] as i64 + dj;
            if ci >= 0 && cj >= 0 && (ci as usize) < self.cells && (cj as usize) < self.cells {
                candidates.push([ci as usize, cj as usize]);
            }
        }
        for [ci, cj] in candidates {
            let Some(e) = self.element_at_grid(ci, cj) else {
                continue;
            };
            let xi = scaled[0] - ci as f64;
            let eta = scaled[1] - cj as f64;
            if (-tol..=1.0 + tol).contains(&xi) && (-tol..=1.0 + tol).contains(&eta) {
                return Some((e, [xi.clamp(0.0, 1.0), eta.clamp(0.0, 1.0)]));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cell_mesh_counts() {
        let m = Mesh::cell(&CellGeometry::default(), 8).unwrap();
        assert_eq!(m.elements().len(), 48);
        assert_eq!(
            Mesh::cell(&CellGeometry::default(), 6).unwrap_err(),
            Error::HoleNotGridAligned(6)
        );
        let plain = Mesh::cell(&CellGeometry::without_hole(), 4).unwrap();
        assert_eq!(plain.elements().len(), 16);
        assert_eq!(plain.facets_in(SurfacePart::Gamma).count(), 0);
    }

    #[test]
    fn periodic_pairing_covers_boundary() {
        let n = 8;
        let m = Mesh::cell(&CellGeometry::default(), n).unwrap();
        let p = m.periodic().unwrap();
        assert_eq!(p.boundary_pairing().len(), 4 * n);
        assert_eq!(p.pairs().len(), 2 * n + 1);
        for &(node, partner) in p.boundary_pairing() {
            assert_eq!(p.dof_of_node()[node], p.dof_of_node()[partner]);
        }
        let mut seen = std::collections::HashSet::new();
        for &(node, _) in p.boundary_pairing() {
            assert!(seen.insert(node), "node paired twice");
        }
    }

    #[test]
    fn perforated_counts_and_measures() {
        let d = PerforatedDomain::new(0.5, CellGeometry::default()).unwrap();
        let m = Mesh::perforated(&d, 8).unwrap();
        assert_eq!(m.elements().len(), 192);
        assert_abs_diff_eq!(m.area(), d.pore_area(), epsilon = 1e-14);

        let d = PerforatedDomain::new(0.25, CellGeometry::default()).unwrap();
        let m = Mesh::perforated(&d, 8).unwrap();
        assert_abs_diff_eq!(m.surface_length(SurfacePart::Gamma), 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.surface_length(SurfacePart::GammaR), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.surface_length(SurfacePart::Outer), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn pore_facets_face_the_hole() {
        let d = PerforatedDomain::new(1.0, CellGeometry::default()).unwrap();
        let m = Mesh::perforated(&d, 4).unwrap();
        for f in m.facets_in(SurfacePart::Gamma) {
            let a = m.nodes()[f.nodes[0]];
            let b = m.nodes()[f.nodes[1]];
            let face = f.hole_face.unwrap();
            match face {
                Face::Left => assert!(a[0] == 0.25 && b[0] == 0.25),
                Face::Right => assert!(a[0] == 0.75 && b[0] == 0.75),
                Face::Bottom => assert!(a[1] == 0.25 && b[1] == 0.25),
                Face::Top => assert!(a[1] == 0.75 && b[1] == 0.75),
            }
            let robin = matches!(face, Face::Top | Face::Right);
            assert_eq!(f.label == FacetLabel::GammaR, robin);
        }
    }

    #[test]
    fn locate_handles_edges_and_holes() {
        let d = PerforatedDomain::new(1.0, CellGeometry::default()).unwrap();
        let m = Mesh::perforated(&d, 4).unwrap();
        assert!(m.locate([0.5, 0.5]).is_none());
        let (e, _) = m.locate([0.25, 0.5]).unwrap();
        assert_eq!(m.elements()[e].grid, [0, 2]);
        assert!(m.locate([1.0, 1.0]).is_some());
        assert!(m.locate([1.1, 0.0]).is_none());
    }

    #[test]
    fn surface_part_parsing() {
        assert_eq!("gamma_r".parse::<SurfacePart>().unwrap(), SurfacePart::GammaR);
        assert_eq!(
            "pores".parse::<SurfacePart>().unwrap_err(),
            Error::UnknownLabel("pores".into())
        );
    }
}
