//! Sampled energy over RN DOFs: energy, residual forces, stiffness and the
//! static solve.
//!
//! Node α carries the energy of half of every live incident strut, so the
//! sampled energy `Σ_α w_α U_α` equals `Σ_s c_s ½ k_s e_s²` with
//! `c_s = ½ (w_α + w_β)`. Elongations depend on RN DOFs through the
//! interpolation rows, `e_s = Σ_j (N_βj − N_αj) n̂·u_j`.

use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::geometry::{Axis, Vec2};
use crate::lattice::{elongation, LatticeModel};
use crate::mesh::{CoarseMesh, NodeRole};
use crate::sampling::{SamplingAssignment, SamplingRole};
use crate::solver::{solve_constrained, SolverOptions, SparseMatrix};

/// Prescribed displacement component of one lattice node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub node: usize,
    pub axis: Axis,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub stiffness: SparseMatrix,
    /// Projected external loads.
    pub load: Vec<f64>,
    /// `(dof, value)` pairs.
    pub constraints: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u_rn: Vec<f64>,
    pub u_full: Vec<Vec2>,
    /// Sampled energy of the solved state.
    pub total_energy: f64,
    /// `(dof, force)` at every constrained RN DOF.
    pub reactions: Vec<(usize, f64)>,
    pub solver_residual: f64,
}

impl Solution {
    /// Sum of the reactions on the constrained DOFs of the given nodes and axis.
    pub fn reaction_on(&self, mesh: &CoarseMesh, nodes: &[usize], axis: Axis) -> f64 {
        let dofs: Vec<usize> = nodes
            .iter()
            .filter_map(|&n| mesh.dofs.dof(n, axis.index()))
            .collect();
        self.reactions
            .iter()
            .filter(|(d, _)| dofs.contains(d))
            .map(|(_, f)| f)
            .sum()
    }
}

/// Sampling coefficient `½(w_α + w_β)` of every strut (0 when dead).
pub fn strut_coefficients(model: &LatticeModel, assignment: &SamplingAssignment) -> Vec<f64> {
    model
        .struts
        .iter()
        .map(|s| {
            if s.alive {
                0.5 * (assignment.weights[s.nodes.0] + assignment.weights[s.nodes.1])
            } else {
                0.0
            }
        })
        .collect()
}

/// `(slot, N_βj − N_αj)` of a strut, merged over shared slots.
fn strut_stencil(mesh: &CoarseMesh, a: usize, b: usize, out: &mut Vec<(usize, f64)>) {
    out.clear();
    for (row, sign) in [(&mesh.interp[b], 1.0), (&mesh.interp[a], -1.0)] {
        for &(slot, w) in row {
            match out.iter_mut().find(|(s, _)| *s == slot) {
                Some(entry) => entry.1 += sign * w,
                None => out.push((slot, sign * w)),
            }
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out.sort_by_key(|&(s, _)| s);
}

/// `Ũ = Σ_{SSN} U_i + Σ_{PSN} w_i U_i` evaluated at the interpolated field.
pub fn sampled_total_energy(
    model: &LatticeModel,
    mesh: &CoarseMesh,
    assignment: &SamplingAssignment,
    u_rn: &[f64],
) -> f64 {
    let u = mesh.interpolate(u_rn);
    sampled_energy_of_field(model, assignment, &u)
}

pub(crate) fn sampled_energy_of_field(
    model: &LatticeModel,
    assignment: &SamplingAssignment,
    u: &[Vec2],
) -> f64 {
    let c = strut_coefficients(model, assignment);
    model
        .struts
        .iter()
        .filter(|s| s.alive)
        .map(|s| {
            let e = elongation(s, u);
            c[s.id] * 0.5 * model.material.axial_stiffness(s.rest_length) * e * e
        })
        .sum()
}

/// Same energy written as the weighted node sum, used as a cross-check.
pub fn sampled_energy_by_nodes(
    model: &LatticeModel,
    assignment: &SamplingAssignment,
    u: &[Vec2],
) -> f64 {
    let energies = model.node_energies(u);
    energies
        .iter()
        .zip(&assignment.roles)
        .zip(&assignment.weights)
        .map(|((&e, &r), &w)| match r {
            SamplingRole::Ssn => e,
            SamplingRole::Psn => w * e,
            SamplingRole::Nsn => 0.0,
        })
        .sum()
}

/// `F = −∂Ũ/∂u + Pᵀ f_ext` over RN DOFs.
pub fn residual_forces(
    model: &LatticeModel,
    mesh: &CoarseMesh,
    assignment: &SamplingAssignment,
    u_rn: &[f64],
    f_ext: &[Vec2],
) -> Vec<f64> {
    let u = mesh.interpolate(u_rn);
    let c = strut_coefficients(model, assignment);
    let mut r = mesh.project_forces(f_ext);
    let mut stencil = Vec::with_capacity(8);
    for s in model.struts.iter().filter(|s| s.alive) {
        if c[s.id] == 0.0 {
            continue;
        }
        let t = c[s.id] * model.material.axial_stiffness(s.rest_length) * elongation(s, &u);
        strut_stencil(mesh, s.nodes.0, s.nodes.1, &mut stencil);
        for &(slot, coef) in &stencil {
            r[2 * slot] -= t * coef * s.direction.x;
            r[2 * slot + 1] -= t * coef * s.direction.y;
        }
    }
    r
}

/// Hessian of the sampled energy with respect to the RN DOFs.
pub fn assemble_reduced_stiffness(
    model: &LatticeModel,
    mesh: &CoarseMesh,
    assignment: &SamplingAssignment,
) -> SparseMatrix {
    let c = strut_coefficients(model, assignment);
    let mut triplets = Vec::new();
    let mut stencil = Vec::with_capacity(8);
    let mut g = Vec::with_capacity(16);
    for s in model.struts.iter().filter(|s| s.alive) {
        if c[s.id] == 0.0 {
            continue;
        }
        let k = c[s.id] * model.material.axial_stiffness(s.rest_length);
        strut_stencil(mesh, s.nodes.0, s.nodes.1, &mut stencil);
        g.clear();
        for &(slot, coef) in &stencil {
            g.push((2 * slot, coef * s.direction.x));
            g.push((2 * slot + 1, coef * s.direction.y));
        }
        for &(i, gi) in &g {
            for &(j, gj) in &g {
                triplets.push((i, j, k * gi * gj));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.dofs.dof_count(), triplets)
}

/// Maps node constraints to RN DOFs. A constraint on a ghost node is accepted
/// only when every RN interpolating it is constrained on the same axis with
/// values reproducing the prescribed one.
pub fn resolve_constraints(
    mesh: &CoarseMesh,
    constraints: &[Constraint],
) -> Result<Vec<(usize, f64)>> {
    let mut dofs: Vec<(usize, f64)> = Vec::new();
    let mut value_of = std::collections::HashMap::new();
    for c in constraints {
        if mesh.roles[c.node].is_rep() {
            let d = mesh.dofs.dof(c.node, c.axis.index()).expect("rep node");
            if let Some(&v) = value_of.get(&d) {
                if v != c.value {
                    return Err(QcError::BoundaryCondition(format!(
                        "node {} axis {:?} prescribed twice ({v} and {})",
                        c.node, c.axis, c.value
                    )));
                }
                continue;
            }
            value_of.insert(d, c.value);
            dofs.push((d, c.value));
        }
    }
    for c in constraints {
        if mesh.roles[c.node] != NodeRole::Gn {
            continue;
        }
        let mut interpolated = 0.0;
        let mut magnitude = 0.0;
        for &(slot, w) in &mesh.interp[c.node] {
            let d = 2 * slot + c.axis.index();
            let Some(&v) = value_of.get(&d) else {
                return Err(QcError::BoundaryCondition(format!(
                    "ghost node {} is constrained but its interpolating node {} is not",
                    c.node,
                    mesh.dofs.node(slot)
                )));
            };
            interpolated += w * v;
            magnitude += (w * v).abs();
        }
        let scale = c.value.abs().max(magnitude).max(f64::MIN_POSITIVE);
        if (interpolated - c.value).abs() > 1e-9 * scale {
            return Err(QcError::BoundaryCondition(format!(
                "ghost node {} prescribed {} but its element interpolates {}",
                c.node, c.value, interpolated
            )));
        }
    }
    Ok(dofs)
}

pub fn build_reduced_system(
    model: &LatticeModel,
    mesh: &CoarseMesh,
    assignment: &SamplingAssignment,
    constraints: &[Constraint],
    f_ext: &[Vec2],
) -> Result<ReducedSystem> {
    if f_ext.len() != model.nodes.len() {
        return Err(QcError::Mismatch(format!(
            "{} nodal loads for {} nodes",
            f_ext.len(),
            model.nodes.len()
        )));
    }
    Ok(ReducedSystem {
        stiffness: assemble_reduced_stiffness(model, mesh, assignment),
        load: mesh.project_forces(f_ext),
        constraints: resolve_constraints(mesh, constraints)?,
    })
}

pub fn solve_linear_static(
    model: &LatticeModel,
    mesh: &CoarseMesh,
    assignment: &SamplingAssignment,
    system: &ReducedSystem,
    options: &SolverOptions,
) -> Result<Solution> {
    let sol = solve_constrained(&system.stiffness, &system.load, &system.constraints, options)
        .map_err(|e| match e {
            QcError::SingularSystem(msg) if assignment.weights.iter().any(|&w| w < 0.0) => {
                QcError::SingularSystem(format!("{msg}; negative sampling weights are present"))
            }
            other => other,
        })?;
    let u_full = mesh.interpolate(&sol.u);
    let total_energy = sampled_energy_of_field(model, assignment, &u_full);
    Ok(Solution {
        u_rn: sol.u,
        u_full,
        total_energy,
        reactions: sol.reactions,
        solver_residual: sol.residual,
    })
}

/// Assembles and solves the sampled model in one call.
pub fn solve_static(
    model: &LatticeModel,
    mesh: &CoarseMesh,
    assignment: &SamplingAssignment,
    constraints: &[Constraint],
    f_ext: &[Vec2],
    options: &SolverOptions,
) -> Result<Solution> {
    let system = build_reduced_system(model, mesh, assignment, constraints, f_ext)?;
    solve_linear_static(model, mesh, assignment, &system, options)
}

/// Reference solve with every node as a DOF and every energy explicit.
pub fn solve_full_resolution(
    model: &LatticeModel,
    constraints: &[Constraint],
    f_ext: &[Vec2],
    options: &SolverOptions,
) -> Result<Solution> {
    let mesh = CoarseMesh::full_resolution(model);
    let assignment = SamplingAssignment::full(model.nodes.len(), 0);
    solve_static(model, &mesh, &assignment, constraints, f_ext, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{generate_square_lattice, Bracing, Material};
    use approx::assert_relative_eq;

    #[test]
    fn single_strut_under_force() {
        let m = generate_square_lattice(1, 1, Bracing::None, Material::default()).unwrap();
        // keep only the bottom strut 0-1
        let mut m = m;
        for s in 1..m.struts.len() {
            m.remove_strut(s).unwrap();
        }
        let mut f = vec![Vec2::zeros(); 4];
        f[1] = Vec2::new(5.0, 0.0);
        let bcs = [
            Constraint { node: 0, axis: Axis::X, value: 0.0 },
            Constraint { node: 0, axis: Axis::Y, value: 0.0 },
            Constraint { node: 1, axis: Axis::Y, value: 0.0 },
            Constraint { node: 2, axis: Axis::X, value: 0.0 },
            Constraint { node: 2, axis: Axis::Y, value: 0.0 },
            Constraint { node: 3, axis: Axis::X, value: 0.0 },
            Constraint { node: 3, axis: Axis::Y, value: 0.0 },
        ];
        let s = solve_full_resolution(&m, &bcs, &f, &SolverOptions::default()).unwrap();
        // u = F l / (E A)
        assert_relative_eq!(s.u_full[1].x, 5.0 * 10.0 / 70e3, max_relative = 1e-12);
        assert_relative_eq!(s.reaction_on(&CoarseMesh::full_resolution(&m), &[0], Axis::X), -5.0, max_relative = 1e-12);
    }

    #[test]
    fn fs_full_resolution_matches_direct_assembly() {
        let m = generate_square_lattice(2, 1, Bracing::XBraced, Material::default()).unwrap();
        let mesh = CoarseMesh::full_resolution(&m);
        let a = SamplingAssignment::full(m.nodes.len(), 0);
        let k = assemble_reduced_stiffness(&m, &mesh, &a);
        let n = 2 * m.nodes.len();
        let mut direct = vec![vec![0.0; n]; n];
        for s in &m.struts {
            let kk = m.material.axial_stiffness(s.rest_length);
            let d = [s.direction.x, s.direction.y];
            let (a_, b_) = s.nodes;
            for i in 0..2 {
                for j in 0..2 {
                    let v = kk * d[i] * d[j];
                    direct[2 * a_ + i][2 * a_ + j] += v;
                    direct[2 * b_ + i][2 * b_ + j] += v;
                    direct[2 * a_ + i][2 * b_ + j] -= v;
                    direct[2 * b_ + i][2 * a_ + j] -= v;
                }
            }
        }
        let dense = k.to_dense();
        for i in 0..n {
            for j in 0..n {
                assert_relative_eq!(dense[i][j], direct[i][j], epsilon = 1e-9);
            }
        }
        assert!(k.asymmetry() <= 1e-12);
    }
}
