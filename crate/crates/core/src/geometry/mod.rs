//! Unit cell with a rectangular hole, the ε-periodic perforated domain and
//! their structured quad meshes.
//!
//! The macroscopic domain is always the unit square Ω = (0,1)². The cell
//! Y = (0,1)² contains an axis-aligned hole Y₀ strictly in its interior; its
//! boundary Γ = ∂Y₀ is split face-by-face into a Robin part Γ_R and a Neumann
//! part Γ_N. The perforated domain Ω^ε removes the copies ε(Y₀ + k) from Ω.

mod mesh;

pub use mesh::{Element, Facet, FacetLabel, Mesh, MeshKind, PeriodicMap, SurfacePart};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A face of the rectangular hole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Left,
    Right,
    Bottom,
    Top,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::Left, Face::Right, Face::Bottom, Face::Top];
}

impl FromStr for Face {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Face::Left),
            "right" => Ok(Face::Right),
            "bottom" => Ok(Face::Bottom),
            "top" => Ok(Face::Top),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Face::Left => "left",
            Face::Right => "right",
            Face::Bottom => "bottom",
            Face::Top => "top",
        };
        f.write_str(s)
    }
}

/// Axis-aligned hole `[lo, hi]` inside the unit cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Hole {
    pub fn width(&self) -> f64 {
        self.hi[0] - self.lo[0]
    }

    pub fn height(&self) -> f64 {
        self.hi[1] - self.lo[1]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn face_length(&self, face: Face) -> f64 {
        match face {
            Face::Left | Face::Right => self.height(),
            Face::Bottom | Face::Top => self.width(),
        }
    }

    /// True when `y` (already wrapped into the cell) is in the open hole.
    pub fn contains_open(&self, y: [f64; 2]) -> bool {
        y[0] > self.lo[0] && y[0] < self.hi[0] && y[1] > self.lo[1] && y[1] < self.hi[1]
    }
}

/// The reference cell Y with its (optional) hole and boundary split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    hole: Option<Hole>,
    robin_faces: Vec<Face>,
}

impl CellGeometry {
    /// Cell with hole `[hole_lo, hole_hi]` whose `robin_faces` form Γ_R.
    pub fn new(hole_lo: [f64; 2], hole_hi: [f64; 2], robin_faces: &[Face]) -> Result<Self> {
        for k in 0..2 {
            let ok = hole_lo[k].is_finite()
                && hole_hi[k].is_finite()
                && 0.0 < hole_lo[k]
                && hole_lo[k] < hole_hi[k]
                && hole_hi[k] < 1.0;
            if !ok {
                return Err(Error::HoleTouchesCellBoundary);
            }
        }
        let mut faces = robin_faces.to_vec();
        faces.sort();
        faces.dedup();
        if faces.is_empty() {
            return Err(Error::EmptyRobinPart);
        }
        if faces.len() == Face::ALL.len() {
            return Err(Error::EmptyNeumannPart);
        }
        Ok(Self {
            hole: Some(Hole {
                lo: hole_lo,
                hi: hole_hi,
            }),
            robin_faces: faces,
        })
    }

    /// Hole `[0.25, 0.75]²` with Robin faces top and right.
    pub fn default_cell() -> Self {
        Self::new([0.25, 0.25], [0.75, 0.75], &[Face::Top, Face::Right])
            .expect("default cell is valid")
    }

    /// Degenerate cell without a hole (Y₁ = Y, Γ = ∅).
    pub fn without_hole() -> Self {
        Self {
            hole: None,
            robin_faces: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        2
    }

    pub fn hole(&self) -> Option<&Hole> {
        self.hole.as_ref()
    }

    pub fn robin_faces(&self) -> &[Face] {
        &self.robin_faces
    }

    pub fn is_robin(&self, face: Face) -> bool {
        self.robin_faces.contains(&face)
    }

    /// |Y₁| = 1 − |Y₀|.
    pub fn pore_area(&self) -> f64 {
        1.0 - self.hole.map_or(0.0, |h| h.area())
    }

    /// |Γ|, the hole perimeter.
    pub fn surface_measure(&self) -> f64 {
        self.hole
            .map_or(0.0, |h| Face::ALL.iter().map(|&f| h.face_length(f)).sum())
    }

    /// |Γ_R|.
    pub fn robin_measure(&self) -> f64 {
        self.hole.map_or(0.0, |h| {
            self.robin_faces.iter().map(|&f| h.face_length(f)).sum()
        })
    }

    /// |Γ_N|.
    pub fn neumann_measure(&self) -> f64 {
        self.surface_measure() - self.robin_measure()
    }

    /// Hole corners in units of `n` subdivisions, if grid aligned.
    pub(crate) fn grid_hole(&self, n: usize) -> Result<Option<([usize; 2], [usize; 2])>> {
        let Some(hole) = self.hole else {
            return Ok(None);
        };
        let snap = |v: f64| -> Result<usize> {
            let s = v * n as f64;
            let r = s.round();
            if (s - r).abs() > 1e-9 * n as f64 {
                Err(Error::HoleNotGridAligned(n))
            } else {
                Ok(r as usize)
            }
        };
        let lo = [snap(hole.lo[0])?, snap(hole.lo[1])?];
        let hi = [snap(hole.hi[0])?, snap(hole.hi[1])?];
        if lo[0] == 0 || lo[1] == 0 || hi[0] >= n || hi[1] >= n || lo[0] >= hi[0] || lo[1] >= hi[1] {
            // The hole must be resolved by at least one element and stay off ∂Y.
            return Err(Error::HoleNotGridAligned(n));
        }
        Ok(Some((lo, hi)))
    }
}

impl Default for CellGeometry {
    fn default() -> Self {
        Self::default_cell()
    }
}

/// Ω^ε: the unit square perforated by the ε-scaled copies of the cell hole.
#[derive(Debug, Clone, PartialEq)]
pub struct PerforatedDomain {
    epsilon: f64,
    cells_per_axis: usize,
    cell: CellGeometry,
}

impl PerforatedDomain {
    pub fn new(epsilon: f64, cell: CellGeometry) -> Result<Self> {
        let cells_per_axis = unit_fraction_denominator(epsilon)?;
        Ok(Self {
            epsilon: 1.0 / cells_per_axis as f64,
            cells_per_axis,
            cell,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// 1/ε.
    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn cell(&self) -> &CellGeometry {
        &self.cell
    }

    pub fn hole_count(&self) -> usize {
        if self.cell.hole().is_some() {
            self.cells_per_axis * self.cells_per_axis
        } else {
            0
        }
    }

    /// |Ω^ε| = |Y₁| (whole cells tile the unit square).
    pub fn pore_area(&self) -> f64 {
        let k = self.cells_per_axis as f64;
        1.0 - k * k * self.epsilon * self.epsilon * (1.0 - self.cell.pore_area())
    }

    /// |Γ^ε| = |Γ| / ε.
    pub fn surface_measure(&self) -> f64 {
        let k = self.cells_per_axis as f64;
        k * k * self.epsilon * self.cell.surface_measure()
    }

    pub fn robin_measure(&self) -> f64 {
        let k = self.cells_per_axis as f64;
        k * k * self.epsilon * self.cell.robin_measure()
    }
}

/// Returns k when `epsilon == 1/k` for a positive integer k.
pub fn unit_fraction_denominator(epsilon: f64) -> Result<usize> {
    if !(epsilon.is_finite() && epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::EpsilonNotUnitFraction(epsilon));
    }
    let k = (1.0 / epsilon).round();
    if (k * epsilon - 1.0).abs() > 1e-9 {
        return Err(Error::EpsilonNotUnitFraction(epsilon));
    }
    Ok(k as usize)
}
