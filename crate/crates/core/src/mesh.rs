//! Coarse-graining: axis-aligned bilinear quadrilaterals over the lattice
//! complement of the full-resolution regions, node roles and interpolation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::geometry::{Rect, Vec2};
use crate::lattice::{LatticeModel, GEOM_TOL};

/// Role of a lattice node in the reduced model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    /// Element corner: carries DOFs and drives interpolation.
    Irn,
    /// Full-resolution node: carries DOFs, not used for interpolation.
    Nirn,
    /// Ghost node: displacement interpolated from the owning element.
    Gn,
}

impl NodeRole {
    pub fn is_rep(self) -> bool {
        !matches!(self, NodeRole::Gn)
    }
}

/// How nodes on the boundary of a full-resolution region are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrBoundary {
    /// The closed region is fully resolved: boundary nodes are NIRNs.
    #[default]
    Closed,
    /// Boundary nodes lying on element edges are ghost nodes of those elements.
    Open,
}

/// Full-resolution block in grid-line indices `[i0, i1] × [j0, j1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    /// Target element size in lattice pitches, applied along each axis.
    pub element_size: f64,
    #[serde(default)]
    pub fr_regions: Vec<GridBlock>,
    #[serde(default)]
    pub fr_boundary: FrBoundary,
}

#[derive(Clone, Debug)]
pub struct QuadElement {
    pub id: usize,
    /// Corner node ids, counter-clockwise from the lower-left corner.
    pub corners: [usize; 4],
    pub corner_positions: [Vec2; 4],
    pub rect: Rect,
    /// Nodes owned by this element (its ghost nodes and the corners for which
    /// it is the lowest-id containing element).
    pub members: Vec<usize>,
}

impl QuadElement {
    /// Bilinear shape functions at `p`, ordered like `corners`.
    pub fn shape(&self, p: &Vec2) -> Result<[f64; 4]> {
        let tol = GEOM_TOL * self.rect.width().max(self.rect.height());
        if !self.rect.contains(p, tol) {
            return Err(QcError::OutsideElement {
                element: self.id,
                x: p.x,
                y: p.y,
            });
        }
        Ok(bilinear(&self.rect, p))
    }

    pub fn centroid(&self) -> Vec2 {
        self.rect.center()
    }

    /// Whether `p` lies on the element boundary.
    pub fn on_edge(&self, p: &Vec2, tol: f64) -> bool {
        self.rect.contains(p, tol) && !self.rect.contains_strictly(p, tol)
    }
}

fn bilinear(rect: &Rect, p: &Vec2) -> [f64; 4] {
    let s = ((p.x - rect.min.x) / rect.width()).clamp(0.0, 1.0);
    let t = ((p.y - rect.min.y) / rect.height()).clamp(0.0, 1.0);
    [
        (1.0 - s) * (1.0 - t),
        s * (1.0 - t),
        s * t,
        (1.0 - s) * t,
    ]
}

/// Bilinear shape functions of an arbitrary axis-aligned rectangle.
pub fn bilinear_shape_eval(element: &QuadElement, p: &Vec2) -> Result<[f64; 4]> {
    element.shape(p)
}

/// RN id ↔ contiguous slot; DOF `2·slot + axis`.
#[derive(Clone, Debug)]
pub struct DofMap {
    rn_ids: Vec<usize>,
    slot_of: Vec<Option<usize>>,
}

impl DofMap {
    fn new(rn_ids: Vec<usize>, node_count: usize) -> Self {
        let mut slot_of = vec![None; node_count];
        for (k, &n) in rn_ids.iter().enumerate() {
            slot_of[n] = Some(k);
        }
        DofMap { rn_ids, slot_of }
    }

    pub fn rn_count(&self) -> usize {
        self.rn_ids.len()
    }

    pub fn dof_count(&self) -> usize {
        2 * self.rn_ids.len()
    }

    pub fn rn_ids(&self) -> &[usize] {
        &self.rn_ids
    }

    pub fn slot(&self, node: usize) -> Option<usize> {
        self.slot_of.get(node).copied().flatten()
    }

    pub fn node(&self, slot: usize) -> usize {
        self.rn_ids[slot]
    }

    pub fn dof(&self, node: usize, axis: usize) -> Option<usize> {
        self.slot(node).map(|s| 2 * s + axis)
    }
}

/// Sparse interpolation row: `u_α = Σ w · u_slot`.
pub type InterpRow = Vec<(usize, f64)>;

#[derive(Clone, Debug)]
pub struct CoarseMesh {
    pub elements: Vec<QuadElement>,
    pub roles: Vec<NodeRole>,
    /// Owning element of every ghost node.
    pub owner: Vec<Option<usize>>,
    pub dofs: DofMap,
    /// Per node, the RN slots and weights producing its displacement.
    pub interp: Vec<InterpRow>,
    pub fr_regions: Vec<Rect>,
    pub fr_boundary: FrBoundary,
    /// Node → ids of every element whose closed rectangle contains it.
    pub containing: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RoleCounts {
    pub irn: usize,
    pub nirn: usize,
    pub gn: usize,
}

impl CoarseMesh {
    /// Degenerate mesh: every node is a full-resolution node.
    pub fn full_resolution(model: &LatticeModel) -> Self {
        let n = model.nodes.len();
        let roles = vec![NodeRole::Nirn; n];
        let dofs = DofMap::new((0..n).collect(), n);
        CoarseMesh {
            elements: Vec::new(),
            roles,
            owner: vec![None; n],
            dofs,
            interp: (0..n).map(|k| vec![(k, 1.0)]).collect(),
            fr_regions: vec![model.bounds],
            fr_boundary: FrBoundary::Closed,
            containing: vec![Vec::new(); n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.roles.len()
    }

    pub fn role_counts(&self) -> RoleCounts {
        classify_dof_roles(self)
    }

    pub fn is_full_resolution(&self) -> bool {
        self.elements.is_empty()
    }

    /// Displacement of every lattice node from the RN DOF vector.
    pub fn interpolate(&self, u_rn: &[f64]) -> Vec<Vec2> {
        self.interp
            .iter()
            .map(|row| {
                row.iter().fold(Vec2::zeros(), |acc, &(slot, w)| {
                    acc + Vec2::new(u_rn[2 * slot], u_rn[2 * slot + 1]) * w
                })
            })
            .collect()
    }

    /// Projects nodal forces onto the RN DOFs through the interpolation.
    pub fn project_forces(&self, f_nodes: &[Vec2]) -> Vec<f64> {
        let mut f = vec![0.0; self.dofs.dof_count()];
        for (row, fa) in self.interp.iter().zip(f_nodes) {
            for &(slot, w) in row {
                f[2 * slot] += w * fa.x;
                f[2 * slot + 1] += w * fa.y;
            }
        }
        f
    }

    /// RN DOF vector sampled from a full nodal field.
    pub fn restrict(&self, u_full: &[Vec2]) -> Vec<f64> {
        let mut u = vec![0.0; self.dofs.dof_count()];
        for (slot, &n) in self.dofs.rn_ids().iter().enumerate() {
            u[2 * slot] = u_full[n].x;
            u[2 * slot + 1] = u_full[n].y;
        }
        u
    }

    pub fn in_fr_region(&self, p: &Vec2, tol: f64) -> bool {
        self.fr_regions.iter().any(|r| r.contains(p, tol))
    }
}

pub fn classify_dof_roles(mesh: &CoarseMesh) -> RoleCounts {
    let mut c = RoleCounts::default();
    for r in &mesh.roles {
        match r {
            NodeRole::Irn => c.irn += 1,
            NodeRole::Nirn => c.nirn += 1,
            NodeRole::Gn => c.gn += 1,
        }
    }
    c
}

/// Full displacement field from RN DOFs.
pub fn interpolate_full_field(mesh: &CoarseMesh, u_rn: &[f64]) -> Result<Vec<Vec2>> {
    if u_rn.len() != mesh.dofs.dof_count() {
        return Err(QcError::Mismatch(format!(
            "expected {} RN DOFs, got {}",
            mesh.dofs.dof_count(),
            u_rn.len()
        )));
    }
    Ok(mesh.interpolate(u_rn))
}

/// Element boundaries along one axis in grid-line indices.
fn axis_breaks(
    extent: usize,
    stride: usize,
    element_lines: f64,
    fr: &[(usize, usize)],
) -> Vec<usize> {
    let mut anchors = vec![0, extent];
    for &(a, b) in fr {
        anchors.push(a);
        anchors.push(b);
    }
    anchors.sort_unstable();
    anchors.dedup();
    let mut lines = vec![0];
    for w in anchors.windows(2) {
        let (a, b) = (w[0], w[1]);
        let span = (b - a) as f64;
        let n = ((span / element_lines).round() as usize).max(1);
        for k in 1..n {
            let raw = a as f64 + span * k as f64 / n as f64;
            let snapped = ((raw / stride as f64).round() as usize) * stride;
            if snapped > *lines.last().unwrap() && snapped < b {
                lines.push(snapped);
            }
        }
        lines.push(b);
    }
    lines
}

/// Builds the bilinear mesh over the complement of the full-resolution blocks.
pub fn build_coarse_mesh(model: &LatticeModel, spec: &MeshSpec) -> Result<CoarseMesh> {
    if !(spec.element_size.is_finite() && spec.element_size > 0.0) {
        return Err(QcError::Mesh(format!(
            "element size must be positive, got {}",
            spec.element_size
        )));
    }
    let grid = model.grid;
    let tol = model.material.strut_length * GEOM_TOL;
    let line = |axis: usize, k: usize| grid.origin[axis] + k as f64 * grid.pitch[axis];

    let mut fr_x = Vec::new();
    let mut fr_y = Vec::new();
    let mut fr_rects = Vec::new();
    for b in &spec.fr_regions {
        if b.i0 >= b.i1 || b.j0 >= b.j1 || b.i1 > grid.extent[0] || b.j1 > grid.extent[1] {
            return Err(QcError::Mesh(format!(
                "full-resolution block {b:?} is empty or exceeds the lattice extent {:?}",
                grid.extent
            )));
        }
        let aligned = [b.i0, b.i1].iter().all(|i| i % grid.corner_stride[0] == 0)
            && [b.j0, b.j1].iter().all(|j| j % grid.corner_stride[1] == 0);
        if !aligned {
            return Err(QcError::Mesh(format!(
                "full-resolution block {b:?} is not aligned to corner lines (stride {:?})",
                grid.corner_stride
            )));
        }
        fr_x.push((b.i0, b.i1));
        fr_y.push((b.j0, b.j1));
        fr_rects.push(Rect::new(line(0, b.i0), line(0, b.i1), line(1, b.j0), line(1, b.j1)));
    }

    let xs = axis_breaks(grid.extent[0], grid.corner_stride[0], spec.element_size, &fr_x);
    let ys = axis_breaks(grid.extent[1], grid.corner_stride[1], spec.element_size, &fr_y);
    for (axis, lines) in [(0, &xs), (1, &ys)] {
        if let Some(k) = lines.iter().find(|&&k| k % grid.corner_stride[axis] != 0) {
            return Err(QcError::Mesh(format!(
                "element boundary on line {k} along axis {axis} carries no corner nodes"
            )));
        }
    }

    // spatial hash on half-pitch keys
    let key = |p: &Vec2| {
        (
            ((p.x - grid.origin.x) * 2.0 / grid.pitch[0]).round() as i64,
            ((p.y - grid.origin.y) * 2.0 / grid.pitch[1]).round() as i64,
        )
    };
    let mut by_key: HashMap<(i64, i64), usize> = HashMap::with_capacity(model.nodes.len());
    for n in &model.nodes {
        by_key.insert(key(&n.position), n.id);
    }
    let find_node = |p: &Vec2| -> Result<usize> {
        by_key
            .get(&key(p))
            .copied()
            .filter(|&id| (model.nodes[id].position - p).norm() <= tol)
            .ok_or_else(|| {
                QcError::Mesh(format!(
                    "no lattice node at element corner ({:.6}, {:.6})",
                    p.x, p.y
                ))
            })
    };

    let mut elements = Vec::new();
    for wy in ys.windows(2) {
        for wx in xs.windows(2) {
            let rect = Rect::new(line(0, wx[0]), line(0, wx[1]), line(1, wy[0]), line(1, wy[1]));
            let c = rect.center();
            if fr_rects.iter().any(|r| r.contains_strictly(&c, tol)) {
                continue;
            }
            let corner_positions = [
                rect.min,
                Vec2::new(rect.max.x, rect.min.y),
                rect.max,
                Vec2::new(rect.min.x, rect.max.y),
            ];
            let mut corners = [0; 4];
            for (k, p) in corner_positions.iter().enumerate() {
                corners[k] = find_node(p)?;
            }
            let corner_positions = corners.map(|id| model.nodes[id].position);
            elements.push(QuadElement {
                id: elements.len(),
                corners,
                corner_positions,
                rect,
                members: Vec::new(),
            });
        }
    }

    let n = model.nodes.len();
    let mut is_corner = vec![false; n];
    for e in &elements {
        for &c in &e.corners {
            is_corner[c] = true;
        }
    }
    let mut containing = vec![Vec::new(); n];
    for e in &elements {
        let etol = GEOM_TOL * e.rect.width().max(e.rect.height());
        for node in &model.nodes {
            if e.rect.contains(&node.position, etol) {
                containing[node.id].push(e.id);
            }
        }
    }

    let mut roles = vec![NodeRole::Nirn; n];
    let mut owner = vec![None; n];
    for node in &model.nodes {
        let id = node.id;
        let in_fr = match spec.fr_boundary {
            FrBoundary::Closed => fr_rects.iter().any(|r| r.contains(&node.position, tol)),
            FrBoundary::Open => fr_rects.iter().any(|r| r.contains_strictly(&node.position, tol)),
        };
        roles[id] = if is_corner[id] {
            NodeRole::Irn
        } else if in_fr || containing[id].is_empty() {
            NodeRole::Nirn
        } else {
            NodeRole::Gn
        };
        if let Some(&e) = containing[id].first() {
            if roles[id] != NodeRole::Nirn {
                owner[id] = Some(e);
                elements[e].members.push(id);
            }
        }
        if roles[id] == NodeRole::Irn {
            owner[id] = None;
        }
    }

    let rn_ids = (0..n).filter(|&i| roles[i].is_rep()).collect::<Vec<_>>();
    let dofs = DofMap::new(rn_ids, n);
    let mut interp = Vec::with_capacity(n);
    for node in &model.nodes {
        let id = node.id;
        let row = match roles[id] {
            NodeRole::Gn => {
                let e = &elements[owner[id].ok_or(QcError::MissingOwner(id))?];
                let phi = e.shape(&node.position)?;
                let mut row = Vec::with_capacity(4);
                for (k, &c) in e.corners.iter().enumerate() {
                    if phi[k].abs() > 1e-14 {
                        row.push((dofs.slot(c).expect("corner is a rep node"), phi[k]));
                    }
                }
                row
            }
            _ => vec![(dofs.slot(id).expect("rep node has a slot"), 1.0)],
        };
        interp.push(row);
    }

    Ok(CoarseMesh {
        elements,
        roles,
        owner,
        dofs,
        interp,
        fr_regions: fr_rects,
        fr_boundary: spec.fr_boundary,
        containing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{
        generate_square_lattice, generate_triangular_lattice, Bracing, Material, RowOrientation,
    };
    use approx::assert_relative_eq;

    fn unit_element() -> QuadElement {
        let rect = Rect::new(0.0, 1.0, 0.0, 1.0);
        QuadElement {
            id: 0,
            corners: [0, 1, 2, 3],
            corner_positions: [
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
            rect,
            members: Vec::new(),
        }
    }

    #[test]
    fn shape_values() {
        let e = unit_element();
        let phi = e.shape(&Vec2::new(0.25, 0.5)).unwrap();
        for (a, b) in phi.iter().zip([0.375, 0.125, 0.125, 0.375]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(e.shape(&e.centroid()).unwrap(), [0.25; 4]);
        for k in 0..4 {
            let phi = e.shape(&e.corner_positions[k]).unwrap();
            for j in 0..4 {
                assert_eq!(phi[j], if j == k { 1.0 } else { 0.0 });
            }
        }
        assert!(e.shape(&Vec2::new(1.1, 0.5)).is_err());
    }

    #[test]
    fn axis_breaks_cases() {
        assert_eq!(axis_breaks(60, 1, 20.0, &[]), vec![0, 20, 40, 60]);
        assert_eq!(axis_breaks(60, 1, 20.0, &[(20, 40)]), vec![0, 20, 40, 60]);
        assert_eq!(axis_breaks(48, 2, 12.0, &[]), vec![0, 12, 24, 36, 48]);
        assert_eq!(axis_breaks(48, 2, 16.0, &[]), vec![0, 16, 32, 48]);
        assert_eq!(axis_breaks(24, 2, 8.0, &[]), vec![0, 8, 16, 24]);
        assert_eq!(axis_breaks(38, 1, 16.0, &[]), vec![0, 19, 38]);
    }

    #[test]
    fn whole_box_fr_has_no_elements() {
        let m = generate_square_lattice(6, 6, Bracing::XBraced, Material::default()).unwrap();
        let spec = MeshSpec {
            element_size: 3.0,
            fr_regions: vec![GridBlock { i0: 0, i1: 6, j0: 0, j1: 6 }],
            fr_boundary: FrBoundary::Closed,
        };
        let mesh = build_coarse_mesh(&m, &spec).unwrap();
        assert!(mesh.elements.is_empty());
        assert_eq!(mesh.role_counts().nirn, m.nodes.len());
    }

    #[test]
    fn square_with_central_block() {
        let m = generate_square_lattice(60, 60, Bracing::XBraced, Material::default()).unwrap();
        let spec = MeshSpec {
            element_size: 20.0,
            fr_regions: vec![GridBlock { i0: 20, i1: 40, j0: 20, j1: 40 }],
            fr_boundary: FrBoundary::Closed,
        };
        let mesh = build_coarse_mesh(&m, &spec).unwrap();
        assert_eq!(mesh.elements.len(), 8);
        let c = mesh.role_counts();
        assert_eq!(c.irn, 16);
        assert_eq!(c.nirn, 21 * 21 - 4);
        assert_eq!(c.irn + c.nirn + c.gn, 3721);
        for (id, role) in mesh.roles.iter().enumerate() {
            assert_eq!(*role == NodeRole::Gn, mesh.owner[id].is_some());
        }
    }

    #[test]
    fn triangular_four_elements() {
        let m = generate_triangular_lattice(48, 49, RowOrientation::Horizontal, Material::default())
            .unwrap();
        let spec = MeshSpec {
            element_size: 24.0,
            fr_regions: Vec::new(),
            fr_boundary: FrBoundary::Closed,
        };
        let mesh = build_coarse_mesh(&m, &spec).unwrap();
        assert_eq!(mesh.elements.len(), 4);
        assert_eq!(mesh.role_counts().irn, 9);
        for e in &mesh.elements {
            for (k, &c) in e.corners.iter().enumerate() {
                assert_eq!(m.nodes[c].position, e.corner_positions[k]);
            }
        }
    }

    #[test]
    fn affine_field_is_reproduced() {
        let m = generate_triangular_lattice(24, 25, RowOrientation::Horizontal, Material::default())
            .unwrap();
        let spec = MeshSpec {
            element_size: 8.0,
            fr_regions: vec![GridBlock { i0: 8, i1: 16, j0: 8, j1: 16 }],
            fr_boundary: FrBoundary::Closed,
        };
        let mesh = build_coarse_mesh(&m, &spec).unwrap();
        let affine = |p: &Vec2| Vec2::new(0.3 + 1e-3 * p.x - 2e-3 * p.y, -0.1 + 4e-3 * p.x + 5e-4 * p.y);
        let full = m.nodes.iter().map(|n| affine(&n.position)).collect::<Vec<_>>();
        let u = mesh.restrict(&full);
        let back = interpolate_full_field(&mesh, &u).unwrap();
        for (a, b) in back.iter().zip(&full) {
            assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }
    }
}
