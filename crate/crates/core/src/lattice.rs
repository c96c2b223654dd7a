//! Periodic planar truss lattices: generation, notching, strut kinematics and
//! node-wise energies.
//!
//! Kinematics are linearized: the elongation of a strut is the projection of the
//! relative displacement of its end nodes onto the initial strut direction.

use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::geometry::{Rect, Vec2};

/// Truss material and section constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// Young's modulus E (MPa).
    pub young_modulus: f64,
    /// Tensile failure stress σ_y (MPa).
    pub yield_stress: f64,
    /// Lattice spacing l0 (mm).
    pub strut_length: f64,
    /// Strut cross-section A (mm²).
    pub cross_section: f64,
}

impl Default for Material {
    /// E = 70 GPa, σ_y = 134 MPa, l0 = 10 mm, A = 1 mm².
    fn default() -> Self {
        Material {
            young_modulus: 70e3,
            yield_stress: 134.0,
            strut_length: 10.0,
            cross_section: 1.0,
        }
    }
}

impl Material {
    pub fn new(
        young_modulus: f64,
        yield_stress: f64,
        strut_length: f64,
        cross_section: f64,
    ) -> Result<Self> {
        let m = Material {
            young_modulus,
            yield_stress,
            strut_length,
            cross_section,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("young_modulus", self.young_modulus),
            ("yield_stress", self.yield_stress),
            ("strut_length", self.strut_length),
            ("cross_section", self.cross_section),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(QcError::InvalidMaterial(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Axial stiffness EA/l of a strut of the given rest length.
    pub fn axial_stiffness(&self, rest_length: f64) -> f64 {
        self.young_modulus * self.cross_section / rest_length
    }
}

/// Sides of the lattice bounding box a node lies on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct BoundaryTags(u8);

impl BoundaryTags {
    pub const LEFT: BoundaryTags = BoundaryTags(1);
    pub const RIGHT: BoundaryTags = BoundaryTags(2);
    pub const BOTTOM: BoundaryTags = BoundaryTags(4);
    pub const TOP: BoundaryTags = BoundaryTags(8);

    pub fn contains(self, other: BoundaryTags) -> bool {
        self.0 & other.0 == other.0 && other.0 != 0
    }

    pub fn insert(&mut self, other: BoundaryTags) {
        self.0 |= other.0;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Parses one of `left`, `right`, `bottom`, `top`.
    pub fn from_name(name: &str) -> Option<BoundaryTags> {
        match name {
            "left" => Some(Self::LEFT),
            "right" => Some(Self::RIGHT),
            "bottom" => Some(Self::BOTTOM),
            "top" => Some(Self::TOP),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeNode {
    pub id: usize,
    /// Initial position (mm).
    pub position: Vec2,
    pub boundary: BoundaryTags,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Strut {
    pub id: usize,
    /// End nodes `(α, β)` with `α < β`.
    pub nodes: (usize, usize),
    pub rest_length: f64,
    /// Unit vector from α to β.
    pub direction: Vec2,
    /// `r_β0 − r_α0`.
    pub offset: Vec2,
    pub alive: bool,
}

/// Which family a lattice belongs to, kept for reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bracing {
    None,
    XBraced,
}

/// Orientation of the close-packed rows of a triangular lattice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOrientation {
    /// Rows run along x, spaced √3/2·l0 in y.
    #[default]
    Horizontal,
    /// Rows run along y, spaced √3/2·l0 in x.
    Vertical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeKind {
    Square(Bracing),
    Triangular(RowOrientation),
}

/// Regular grid underlying a generated lattice. Element corners may only be
/// placed on lines `origin + k · stride · pitch` along each axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeGrid {
    pub origin: Vec2,
    /// Distance between neighbouring node lines along x and y.
    pub pitch: [f64; 2],
    /// Line stride on which every intersection carries a node.
    pub corner_stride: [usize; 2],
    /// Number of pitches spanned along x and y.
    pub extent: [usize; 2],
}

#[derive(Clone, Debug)]
pub struct LatticeModel {
    pub nodes: Vec<LatticeNode>,
    pub struts: Vec<Strut>,
    /// Node id → incident strut ids (live and dead).
    pub adjacency: Vec<Vec<usize>>,
    pub material: Material,
    pub bounds: Rect,
    pub grid: LatticeGrid,
    pub kind: LatticeKind,
}

/// Geometric tolerance relative to the lattice spacing.
pub(crate) const GEOM_TOL: f64 = 1e-9;

impl LatticeModel {
    fn assemble(
        positions: Vec<Vec2>,
        pairs: Vec<(usize, usize)>,
        material: Material,
        grid: LatticeGrid,
        kind: LatticeKind,
    ) -> Self {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &positions {
            min = min.inf(p);
            max = max.sup(p);
        }
        let bounds = Rect { min, max };
        let nodes = positions
            .into_iter()
            .enumerate()
            .map(|(id, position)| LatticeNode {
                id,
                position,
                boundary: boundary_tags(&bounds, &position, material.strut_length * GEOM_TOL),
            })
            .collect::<Vec<_>>();
        let struts = pairs
            .into_iter()
            .enumerate()
            .map(|(id, (a, b))| {
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                let offset = nodes[b].position - nodes[a].position;
                let rest_length = offset.norm();
                Strut {
                    id,
                    nodes: (a, b),
                    rest_length,
                    direction: offset / rest_length,
                    offset,
                    alive: true,
                }
            })
            .collect::<Vec<_>>();
        let mut model = LatticeModel {
            nodes,
            struts,
            adjacency: Vec::new(),
            material,
            bounds,
            grid,
            kind,
        };
        model.rebuild_adjacency();
        model
    }

    pub fn rebuild_adjacency(&mut self) {
        let mut adjacency = vec![Vec::new(); self.nodes.len()];
        for s in &self.struts {
            adjacency[s.nodes.0].push(s.id);
            adjacency[s.nodes.1].push(s.id);
        }
        self.adjacency = adjacency;
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn live_strut_count(&self) -> usize {
        self.struts.iter().filter(|s| s.alive).count()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.nodes.iter().map(|n| n.position)
    }

    /// The node at the end of strut `s` opposite to `node`.
    pub fn other_end(&self, s: usize, node: usize) -> usize {
        let (a, b) = self.struts[s].nodes;
        if a == node {
            b
        } else {
            a
        }
    }

    /// Live neighbours of a node.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[node]
            .iter()
            .filter(|&&s| self.struts[s].alive)
            .map(move |&s| self.other_end(s, node))
    }

    pub fn live_degree(&self, node: usize) -> usize {
        self.adjacency[node]
            .iter()
            .filter(|&&s| self.struts[s].alive)
            .count()
    }

    /// Maximum live coordination over all nodes.
    pub fn max_degree(&self) -> usize {
        (0..self.nodes.len())
            .map(|n| self.live_degree(n))
            .max()
            .unwrap_or(0)
    }

    /// Ids of nodes carrying every one of the given boundary tags.
    pub fn boundary_nodes(&self, tags: BoundaryTags) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.boundary.contains(tags))
            .map(|n| n.id)
            .collect()
    }

    /// Node whose position is closest to `p`.
    pub fn nearest_node(&self, p: &Vec2) -> Option<usize> {
        self.nodes
            .iter()
            .map(|n| (n.id, (n.position - p).norm_squared()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(id, _)| id)
    }

    /// Small-strain elongation `e = (u_β − u_α) · n̂` of a live strut.
    pub fn strut_elongation(&self, strut: usize, u: &[Vec2]) -> Result<f64> {
        let s = &self.struts[strut];
        if !s.alive {
            return Err(QcError::DeadStrut(strut));
        }
        Ok(elongation(s, u))
    }

    /// Axial stress `σ = E e / l` of a live strut (tension positive).
    pub fn strut_axial_stress(&self, strut: usize, u: &[Vec2]) -> Result<f64> {
        let e = self.strut_elongation(strut, u)?;
        Ok(self.material.young_modulus * e / self.struts[strut].rest_length)
    }

    /// Elastic energy `½ (EA/l) e²` stored in a strut; zero for dead struts.
    pub fn strut_energy(&self, strut: usize, u: &[Vec2]) -> f64 {
        let s = &self.struts[strut];
        if !s.alive {
            return 0.0;
        }
        let e = elongation(s, u);
        0.5 * self.material.axial_stiffness(s.rest_length) * e * e
    }

    /// Node-wise energy: half of the energy of every live incident strut.
    pub fn node_energy(&self, node: usize, u: &[Vec2]) -> f64 {
        self.adjacency[node]
            .iter()
            .map(|&s| 0.5 * self.strut_energy(s, u))
            .sum()
    }

    pub fn node_energies(&self, u: &[Vec2]) -> Vec<f64> {
        let mut energies = vec![0.0; self.nodes.len()];
        for s in self.struts.iter().filter(|s| s.alive) {
            let half = 0.5 * self.strut_energy(s.id, u);
            energies[s.nodes.0] += half;
            energies[s.nodes.1] += half;
        }
        energies
    }

    /// `Σ_α U_α` over all nodes.
    pub fn total_lattice_energy(&self, u: &[Vec2]) -> f64 {
        (0..self.nodes.len()).map(|n| self.node_energy(n, u)).sum()
    }

    /// Marks a live strut as failed.
    pub fn remove_strut(&mut self, strut: usize) -> Result<()> {
        let s = self
            .struts
            .get_mut(strut)
            .ok_or_else(|| QcError::InvalidLattice(format!("no strut with id {strut}")))?;
        if !s.alive {
            return Err(QcError::DeadStrut(strut));
        }
        s.alive = false;
        Ok(())
    }
}

#[inline]
pub(crate) fn elongation(s: &Strut, u: &[Vec2]) -> f64 {
    (u[s.nodes.1] - u[s.nodes.0]).dot(&s.direction)
}

fn boundary_tags(bounds: &Rect, p: &Vec2, tol: f64) -> BoundaryTags {
    let mut tags = BoundaryTags::default();
    if (p.x - bounds.min.x).abs() <= tol {
        tags.insert(BoundaryTags::LEFT);
    }
    if (p.x - bounds.max.x).abs() <= tol {
        tags.insert(BoundaryTags::RIGHT);
    }
    if (p.y - bounds.min.y).abs() <= tol {
        tags.insert(BoundaryTags::BOTTOM);
    }
    if (p.y - bounds.max.y).abs() <= tol {
        tags.insert(BoundaryTags::TOP);
    }
    tags
}

/// Square lattice of `nx × ny` cells with spacing `material.strut_length`.
pub fn generate_square_lattice(
    nx: usize,
    ny: usize,
    bracing: Bracing,
    material: Material,
) -> Result<LatticeModel> {
    material.validate()?;
    if nx == 0 || ny == 0 {
        return Err(QcError::InvalidLattice(format!(
            "square lattice needs at least one cell per axis, got {nx} x {ny}"
        )));
    }
    let l0 = material.strut_length;
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut positions = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            positions.push(Vec2::new(i as f64 * l0, j as f64 * l0));
        }
    }
    let mut pairs = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if i < nx {
                pairs.push((id(i, j), id(i + 1, j)));
            }
            if j < ny {
                pairs.push((id(i, j), id(i, j + 1)));
            }
            if bracing == Bracing::XBraced && i < nx && j < ny {
                pairs.push((id(i, j), id(i + 1, j + 1)));
                pairs.push((id(i + 1, j), id(i, j + 1)));
            }
        }
    }
    let grid = LatticeGrid {
        origin: Vec2::zeros(),
        pitch: [l0, l0],
        corner_stride: [1, 1],
        extent: [nx, ny],
    };
    Ok(LatticeModel::assemble(
        positions,
        pairs,
        material,
        grid,
        LatticeKind::Square(bracing),
    ))
}

/// Triangular lattice with `rows` close-packed rows. Even rows hold
/// `width_cells + 1` nodes, odd rows `width_cells` nodes offset by l0/2.
pub fn generate_triangular_lattice(
    width_cells: usize,
    rows: usize,
    orientation: RowOrientation,
    material: Material,
) -> Result<LatticeModel> {
    material.validate()?;
    if width_cells == 0 || rows == 0 {
        return Err(QcError::InvalidLattice(format!(
            "triangular lattice needs width >= 1 and rows >= 1, got {width_cells} x {rows}"
        )));
    }
    let l0 = material.strut_length;
    let row_pitch = 0.5 * 3f64.sqrt() * l0;
    let mut row_start = Vec::with_capacity(rows + 1);
    let mut positions = Vec::new();
    for r in 0..rows {
        row_start.push(positions.len());
        let (count, shift) = if r % 2 == 0 {
            (width_cells + 1, 0.0)
        } else {
            (width_cells, 0.5)
        };
        for i in 0..count {
            let along = (i as f64 + shift) * l0;
            let across = r as f64 * row_pitch;
            positions.push(match orientation {
                RowOrientation::Horizontal => Vec2::new(along, across),
                RowOrientation::Vertical => Vec2::new(across, along),
            });
        }
    }
    row_start.push(positions.len());
    let row_len = |r: usize| row_start[r + 1] - row_start[r];

    let mut pairs = Vec::new();
    for r in 0..rows {
        let n = row_len(r);
        for i in 0..n {
            let me = row_start[r] + i;
            if i + 1 < n {
                pairs.push((me, me + 1));
            }
            if r + 1 < rows {
                let up = row_start[r + 1];
                let up_len = row_len(r + 1);
                // indices in the next row of the two nodes at x ∓ l0/2
                let (left, right) = if r % 2 == 0 {
                    (i.checked_sub(1), Some(i))
                } else {
                    (Some(i), Some(i + 1))
                };
                for k in [left, right].into_iter().flatten() {
                    if k < up_len {
                        pairs.push((me, up + k));
                    }
                }
            }
        }
    }
    let (pitch, corner_stride, extent) = match orientation {
        RowOrientation::Horizontal => ([l0, row_pitch], [1, 2], [width_cells, rows - 1]),
        RowOrientation::Vertical => ([row_pitch, l0], [2, 1], [rows - 1, width_cells]),
    };
    let grid = LatticeGrid {
        origin: Vec2::zeros(),
        pitch,
        corner_stride,
        extent,
    };
    Ok(LatticeModel::assemble(
        positions,
        pairs,
        material,
        grid,
        LatticeKind::Triangular(orientation),
    ))
}

/// Removes the nodes strictly inside `notch` and every strut that loses an end
/// node or crosses the open interior of `notch`. Returns the carved model and
/// the old → new node id map.
pub fn carve_notch(model: &LatticeModel, notch: &Rect) -> (LatticeModel, Vec<Option<usize>>) {
    let tol = model.material.strut_length * GEOM_TOL;
    let identity = (0..model.nodes.len()).map(Some).collect::<Vec<_>>();
    if notch.is_degenerate(tol) || !notch.intersects(&model.bounds) {
        return (model.clone(), identity);
    }
    let mut map = vec![None; model.nodes.len()];
    let mut nodes = Vec::new();
    for n in &model.nodes {
        if !notch.contains_strictly(&n.position, tol) {
            map[n.id] = Some(nodes.len());
            nodes.push(LatticeNode {
                id: nodes.len(),
                position: n.position,
                boundary: n.boundary,
            });
        }
    }
    let mut struts = Vec::new();
    for s in &model.struts {
        let (Some(a), Some(b)) = (map[s.nodes.0], map[s.nodes.1]) else {
            continue;
        };
        let pa = &model.nodes[s.nodes.0].position;
        let pb = &model.nodes[s.nodes.1].position;
        if notch.segment_crosses_interior(pa, pb, tol) {
            continue;
        }
        struts.push(Strut {
            id: struts.len(),
            nodes: (a, b),
            ..s.clone()
        });
    }
    let mut carved = LatticeModel {
        nodes,
        struts,
        adjacency: Vec::new(),
        material: model.material,
        bounds: model.bounds,
        grid: model.grid,
        kind: model.kind,
    };
    carved.rebuild_adjacency();
    (carved, map)
}
