//! Energy sampling: sampling schemes, primary sampling node selection, the
//! quadratic interpolants ψ and the sampling weights.
//!
//! Within an element the node-wise energy of a regular node is a quadratic
//! polynomial of its initial position, so the energies of all non-secondary
//! members are recovered from six primary nodes: `Σ_α U_α = Σ_i w_i U_i`,
//! `w_i = Σ_α ψ_i(r_α)`.

use log::warn;
use nalgebra::{DMatrix, Matrix6, Vector6, LU, U6};
use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::geometry::Vec2;
use crate::lattice::{LatticeModel, GEOM_TOL};
use crate::mesh::{CoarseMesh, NodeRole, QuadElement};

/// Number of primary sampling nodes per bilinear element.
pub const PSN_COUNT: usize = 6;

/// Largest accepted condition number of the scaled Vandermonde matrix.
pub const MAX_VANDERMONDE_CONDITION: f64 = 1e8;

/// Monomial exponents spanning the node-wise energy of a bilinear element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialBasis {
    pub exponents: Vec<(u32, u32)>,
}

impl MonomialBasis {
    /// `{1, x, y, x², y², xy}`.
    pub fn bilinear() -> Self {
        MonomialBasis {
            exponents: vec![(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1)],
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn eval(&self, p: &Vec2) -> Vec<f64> {
        self.exponents
            .iter()
            .map(|&(a, b)| p.x.powi(a as i32) * p.y.powi(b as i32))
            .collect()
    }
}

#[inline]
fn monomials(p: &Vec2) -> Vector6<f64> {
    Vector6::new(1.0, p.x, p.y, p.x * p.x, p.y * p.y, p.x * p.y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Fs,
    Ess,
    Iss,
    Nas,
    Nss,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Fs, Scheme::Ess, Scheme::Iss, Scheme::Nas, Scheme::Nss];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Fs => "fs",
            Scheme::Ess => "ess",
            Scheme::Iss => "iss",
            Scheme::Nas => "nas",
            Scheme::Nss => "nss",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = QcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fs" => Ok(Scheme::Fs),
            "ess" => Ok(Scheme::Ess),
            "iss" => Ok(Scheme::Iss),
            "nas" => Ok(Scheme::Nas),
            "nss" => Ok(Scheme::Nss),
            other => Err(QcError::Sampling(format!("unknown sampling scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplingRole {
    Psn,
    Ssn,
    Nsn,
}

/// How the seed of the farthest-point PSN search is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsnSelection {
    /// Seed at the eligible node nearest the element centroid.
    #[default]
    Spread,
    /// Seed at the k-th nearest eligible node to the centroid.
    Perturbed(usize),
}

/// Six primary sampling nodes of one element and the factorized interpolant.
#[derive(Clone, Debug)]
pub struct PsnSet {
    pub element: usize,
    pub nodes: [usize; PSN_COUNT],
    pub positions: [Vec2; PSN_COUNT],
    /// Condition number of the scaled Vandermonde matrix.
    pub vandermonde_condition: f64,
    center: Vec2,
    half: Vec2,
    lu_t: LU<f64, U6, U6>,
}

impl PsnSet {
    /// Builds the set and factorizes `Aᵀ` in coordinates centered on `center`
    /// and scaled by `half`.
    pub fn new(
        element: usize,
        nodes: [usize; PSN_COUNT],
        positions: [Vec2; PSN_COUNT],
        center: Vec2,
        half: Vec2,
    ) -> Result<Self> {
        let scaled = positions.map(|p| scale(&p, &center, &half));
        let a = vandermonde(&scaled)?;
        let cond = condition_number(&a);
        if !cond.is_finite() || cond > 1e14 {
            return Err(QcError::SingularVandermonde(format!(
                "element {element}: condition number {cond:e}"
            )));
        }
        Ok(PsnSet {
            element,
            nodes,
            positions,
            vandermonde_condition: cond,
            center,
            half,
            lu_t: a.transpose().lu(),
        })
    }

    /// ψ_1..ψ_6 at `p`, obtained from `Aᵀ ψ = m(p)`.
    pub fn psi(&self, p: &Vec2) -> Result<[f64; PSN_COUNT]> {
        let m = monomials(&scale(p, &self.center, &self.half));
        let sol = self.lu_t.solve(&m).ok_or_else(|| {
            QcError::SingularVandermonde(format!("element {}", self.element))
        })?;
        Ok([sol[0], sol[1], sol[2], sol[3], sol[4], sol[5]])
    }
}

#[inline]
fn scale(p: &Vec2, center: &Vec2, half: &Vec2) -> Vec2 {
    Vec2::new((p.x - center.x) / half.x, (p.y - center.y) / half.y)
}

/// Vandermonde matrix with row `i` = `[1, x, y, x², y², xy]` at point `i`.
pub fn build_vandermonde(points: &[Vec2; PSN_COUNT]) -> Result<Matrix6<f64>> {
    vandermonde(points)
}

fn vandermonde(points: &[Vec2; PSN_COUNT]) -> Result<Matrix6<f64>> {
    for i in 0..PSN_COUNT {
        for j in 0..i {
            if points[i] == points[j] {
                return Err(QcError::SingularVandermonde(format!(
                    "duplicate sampling positions {i} and {j}"
                )));
            }
        }
    }
    let mut a = Matrix6::zeros();
    for (i, p) in points.iter().enumerate() {
        a.set_row(i, &monomials(p).transpose());
    }
    Ok(a)
}

fn condition_number(a: &Matrix6<f64>) -> f64 {
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Condition number of a k×6 partial Vandermonde matrix (ratio of extreme
/// non-trivial singular values).
fn partial_condition(points: &[Vec2]) -> f64 {
    let k = points.len();
    let mut a = DMatrix::zeros(k, PSN_COUNT);
    for (i, p) in points.iter().enumerate() {
        a.set_row(i, &monomials(p).transpose());
    }
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.iter().take(k).fold(f64::INFINITY, |m, &v| m.min(v));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Roles and weights of every lattice node.
#[derive(Clone, Debug)]
pub struct SamplingAssignment {
    pub scheme: Scheme,
    pub roles: Vec<SamplingRole>,
    pub weights: Vec<f64>,
    /// PSN set per element; `None` for explicit elements and before selection.
    pub psn_sets: Vec<Option<PsnSet>>,
    /// Elements whose members are all sampled explicitly.
    pub explicit: Vec<bool>,
}

impl SamplingAssignment {
    pub fn count(&self, role: SamplingRole) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }

    /// Number of nodes whose energy is evaluated (SSNs and PSNs).
    pub fn sampling_node_count(&self) -> usize {
        self.roles
            .iter()
            .filter(|&&r| r != SamplingRole::Nsn)
            .count()
    }

    /// Unit weights on every node.
    pub fn full(node_count: usize, element_count: usize) -> Self {
        SamplingAssignment {
            scheme: Scheme::Fs,
            roles: vec![SamplingRole::Ssn; node_count],
            weights: vec![1.0; node_count],
            psn_sets: vec![None; element_count],
            explicit: vec![false; element_count],
        }
    }
}

/// Secondary sampling roles for a scheme; PSNs are not chosen yet and every
/// non-secondary ghost node is provisionally a non-sampling node.
pub fn assign_sampling_scheme(
    model: &LatticeModel,
    mesh: &CoarseMesh,
    scheme: Scheme,
) -> SamplingAssignment {
    let n = model.nodes.len();
    let tol = model.material.strut_length * GEOM_TOL;
    let mut roles = vec![SamplingRole::Nsn; n];
    for id in 0..n {
        let role = mesh.roles[id];
        let ssn = match (role, scheme) {
            (NodeRole::Irn | NodeRole::Nirn, _) => true,
            (NodeRole::Gn, Scheme::Fs) => true,
            (NodeRole::Gn, Scheme::Ess) => {
                on_element_edge(model, mesh, id, tol)
                    || model.neighbors(id).any(|b| mesh.roles[b] == NodeRole::Nirn)
            }
            (NodeRole::Gn, Scheme::Iss) => {
                model
                    .neighbors(id)
                    .any(|b| mesh.roles[b] == NodeRole::Nirn)
                    || (on_element_edge(model, mesh, id, tol)
                        && mesh.in_fr_region(&model.nodes[id].position, tol))
            }
            (NodeRole::Gn, Scheme::Nas) => model.neighbors(id).any(|b| mesh.roles[b].is_rep()),
            (NodeRole::Gn, Scheme::Nss) => false,
        };
        if ssn {
            roles[id] = SamplingRole::Ssn;
        }
    }
    let weights = roles
        .iter()
        .map(|r| if *r == SamplingRole::Ssn { 1.0 } else { 0.0 })
        .collect();
    SamplingAssignment {
        scheme,
        roles,
        weights,
        psn_sets: vec![None; mesh.elements.len()],
        explicit: vec![false; mesh.elements.len()],
    }
}

fn on_element_edge(model: &LatticeModel, mesh: &CoarseMesh, id: usize, tol: f64) -> bool {
    let p = &model.nodes[id].position;
    mesh.containing[id]
        .iter()
        .any(|&e| mesh.elements[e].on_edge(p, tol))
}

/// Members of `element` that may serve as PSNs: owned ghost nodes strictly
/// inside the element, not secondary, with full coordination and every
/// neighbour inside the closed element and interpolated by it.
pub fn eligible_psn_candidates(
    model: &LatticeModel,
    mesh: &CoarseMesh,
    roles: &[SamplingRole],
    element: &QuadElement,
) -> Vec<usize> {
    let tol = model.material.strut_length * GEOM_TOL;
    let full_degree = model.max_degree();
    element
        .members
        .iter()
        .copied()
        .filter(|&id| {
            mesh.roles[id] == NodeRole::Gn
                && roles[id] != SamplingRole::Ssn
                && element.rect.contains_strictly(&model.nodes[id].position, tol)
                && model.adjacency[id].len() == full_degree
                && model.adjacency[id].iter().all(|&s| model.struts[s].alive)
                && model.neighbors(id).all(|b| {
                    mesh.roles[b] != NodeRole::Nirn
                        && element.rect.contains(&model.nodes[b].position, tol)
                })
        })
        .collect()
}

/// Farthest-point selection of six well-conditioned PSNs. Returns `None` when
/// fewer than six candidates exist or no acceptable set is found.
pub fn select_primary_sampling_nodes(
    model: &LatticeModel,
    element: &QuadElement,
    candidates: &[usize],
    selection: PsnSelection,
) -> Result<Option<PsnSet>> {
    if candidates.len() < PSN_COUNT {
        return Ok(None);
    }
    let center = element.centroid();
    let half = Vec2::new(element.rect.width() * 0.5, element.rect.height() * 0.5);
    let pos = |id: usize| model.nodes[id].position;
    let scaled = |id: usize| scale(&pos(id), &center, &half);

    let mut by_center = candidates.to_vec();
    by_center.sort_by(|&a, &b| {
        (pos(a) - center)
            .norm_squared()
            .total_cmp(&(pos(b) - center).norm_squared())
            .then(a.cmp(&b))
    });
    let seed_rank = match selection {
        PsnSelection::Spread => 0,
        PsnSelection::Perturbed(k) => k.min(by_center.len() - 1),
    };

    for start in (seed_rank..by_center.len()).chain(0..seed_rank) {
        let mut chosen = vec![by_center[start]];
        let mut rejected = vec![false; candidates.len()];
        while chosen.len() < PSN_COUNT {
            let mut best: Option<(usize, f64)> = None;
            for (k, &c) in candidates.iter().enumerate() {
                if rejected[k] || chosen.contains(&c) {
                    continue;
                }
                let d = chosen
                    .iter()
                    .map(|&s| (scaled(c) - scaled(s)).norm_squared())
                    .fold(f64::INFINITY, f64::min);
                let better = match best {
                    None => true,
                    Some((bk, bd)) => d > bd * (1.0 + 1e-12) || (d >= bd * (1.0 - 1e-12) && c < candidates[bk]),
                };
                if better {
                    best = Some((k, d));
                }
            }
            let Some((k, _)) = best else { break };
            let mut trial = chosen.iter().map(|&s| scaled(s)).collect::<Vec<_>>();
            trial.push(scaled(candidates[k]));
            if partial_condition(&trial) <= MAX_VANDERMONDE_CONDITION {
                chosen.push(candidates[k]);
            } else {
                rejected[k] = true;
            }
        }
        if chosen.len() == PSN_COUNT {
            let nodes: [usize; PSN_COUNT] = chosen.try_into().expect("six nodes");
            let positions = nodes.map(pos);
            let set = PsnSet::new(element.id, nodes, positions, center, half)?;
            if set.vandermonde_condition <= MAX_VANDERMONDE_CONDITION {
                return Ok(Some(set));
            }
        }
    }
    warn!(
        "element {}: no well-conditioned primary sampling set among {} candidates",
        element.id,
        candidates.len()
    );
    Ok(None)
}

/// Selects PSNs in every element and fills in the weights
/// `w_i = Σ_{α ∈ members \ SSN} ψ_i(r_α)`.
pub fn compute_sampling_weights(
    model: &LatticeModel,
    mesh: &CoarseMesh,
    mut assignment: SamplingAssignment,
    selection: PsnSelection,
) -> Result<SamplingAssignment> {
    let roles_before = assignment.roles.clone();
    for element in &mesh.elements {
        let e = element.id;
        let unsampled = element
            .members
            .iter()
            .copied()
            .filter(|&id| roles_before[id] != SamplingRole::Ssn)
            .collect::<Vec<_>>();
        if unsampled.is_empty() {
            continue;
        }
        let candidates = eligible_psn_candidates(model, mesh, &roles_before, element);
        let set = select_primary_sampling_nodes(model, element, &candidates, selection)?;
        let Some(set) = set else {
            assignment.explicit[e] = true;
            for &id in &unsampled {
                assignment.roles[id] = SamplingRole::Ssn;
                assignment.weights[id] = 1.0;
            }
            continue;
        };
        let mut w = [0.0; PSN_COUNT];
        for &id in &unsampled {
            let psi = set.psi(&model.nodes[id].position)?;
            for i in 0..PSN_COUNT {
                w[i] += psi[i];
            }
        }
        for &id in &unsampled {
            assignment.roles[id] = SamplingRole::Nsn;
            assignment.weights[id] = 0.0;
        }
        for (i, &id) in set.nodes.iter().enumerate() {
            assignment.roles[id] = SamplingRole::Psn;
            assignment.weights[id] = w[i];
            if w[i] < 0.0 {
                warn!("element {e}: primary sampling node {id} has negative weight {:.4}", w[i]);
            }
        }
        assignment.psn_sets[e] = Some(set);
    }
    Ok(assignment)
}

/// Scheme roles followed by PSN selection and weights.
pub fn build_sampling(
    model: &LatticeModel,
    mesh: &CoarseMesh,
    scheme: Scheme,
    selection: PsnSelection,
) -> Result<SamplingAssignment> {
    let assignment = assign_sampling_scheme(model, mesh, scheme);
    compute_sampling_weights(model, mesh, assignment, selection)
}
