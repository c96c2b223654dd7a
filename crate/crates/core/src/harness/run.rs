use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::Serialize;

use super::config::{BoundarySpec, CaseConfig, LatticeSpec, LatticeType, Loading, Reference, Selector};
use crate::assembly::{solve_full_resolution, solve_static, Constraint, Solution};
use crate::error::{QcError, Result};
use crate::error_analysis::{fit_convergence_order, split_errors, ConvergenceFit, ErrorReport};
use crate::fracture::{run_quasistatic_fracture, FractureHistory, LoadingSpec};
use crate::geometry::{Axis, Rect, Vec2};
use crate::lattice::{
    carve_notch, generate_square_lattice, generate_triangular_lattice, BoundaryTags, LatticeModel,
};
use crate::mesh::{build_coarse_mesh, CoarseMesh, MeshSpec};
use crate::sampling::{build_sampling, PsnSelection, SamplingAssignment, SamplingRole, Scheme};
use crate::solver::SolverOptions;

/// Lattice, boundary data and loads of a case, independent of the mesh.
#[derive(Clone, Debug)]
pub struct PreparedCase {
    pub model: LatticeModel,
    pub constraints: Vec<Constraint>,
    pub loads: Vec<Vec2>,
    pub fracture: Option<LoadingSpec>,
}

pub fn build_lattice(spec: &LatticeSpec) -> Result<LatticeModel> {
    let model = match spec.kind {
        LatticeType::Square => generate_square_lattice(spec.nx, spec.ny, spec.bracing, spec.material)?,
        LatticeType::Triangular => {
            generate_triangular_lattice(spec.nx, spec.ny, spec.orientation, spec.material)?
        }
    };
    Ok(match &spec.notch {
        Some(n) => {
            let l0 = spec.material.strut_length;
            let rect = Rect::new(n.x0 * l0, n.x1 * l0, n.y0 * l0, n.y1 * l0);
            carve_notch(&model, &rect).0
        }
        None => model,
    })
}

pub fn select_nodes(model: &LatticeModel, selector: &Selector) -> Result<Vec<usize>> {
    selector.validate()?;
    if let Some(set) = &selector.set {
        let nodes: Vec<usize> = match set.as_str() {
            "all" => (0..model.nodes.len()).collect(),
            "outer" => model
                .nodes
                .iter()
                .filter(|n| !n.boundary.is_empty())
                .map(|n| n.id)
                .collect(),
            name => {
                let tag = BoundaryTags::from_name(name)
                    .ok_or_else(|| QcError::Config(format!("unknown node set '{name}'")))?;
                model.boundary_nodes(tag)
            }
        };
        return Ok(nodes);
    }
    if let Some([x, y]) = selector.near {
        let l0 = model.material.strut_length;
        let id = model
            .nearest_node(&Vec2::new(x * l0, y * l0))
            .ok_or_else(|| QcError::Config("empty lattice".into()))?;
        return Ok(vec![id]);
    }
    let ids = selector.nodes.clone().unwrap_or_default();
    if let Some(&bad) = ids.iter().find(|&&id| id >= model.nodes.len()) {
        return Err(QcError::Config(format!("node id {bad} out of range")));
    }
    Ok(ids)
}

fn boundary_constraints(
    model: &LatticeModel,
    specs: &[BoundarySpec],
) -> Result<BTreeMap<(usize, usize), f64>> {
    let mut out = BTreeMap::new();
    for b in specs {
        for id in select_nodes(model, &b.selector())? {
            let r = model.nodes[id].position;
            let (gx, gy) = match b.gradient {
                Some(g) => (
                    Some(g[0][0] * r.x + g[0][1] * r.y),
                    Some(g[1][0] * r.x + g[1][1] * r.y),
                ),
                None => (None, None),
            };
            for (axis, base, grad) in [(0, b.ux, gx), (1, b.uy, gy)] {
                if base.is_some() || grad.is_some() {
                    out.insert((id, axis), base.unwrap_or(0.0) + grad.unwrap_or(0.0));
                }
            }
        }
    }
    Ok(out)
}

fn axis_of(index: usize) -> Axis {
    if index == 0 {
        Axis::X
    } else {
        Axis::Y
    }
}

pub fn prepare_case(config: &CaseConfig) -> Result<PreparedCase> {
    config.validate()?;
    let model = build_lattice(&config.lattice)?;
    let mut fixed = boundary_constraints(&model, &config.boundary)?;
    let mut loads = vec![Vec2::zeros(); model.nodes.len()];
    for l in &config.loads {
        for id in select_nodes(&model, &l.selector())? {
            loads[id] += Vec2::new(l.fx, l.fy);
        }
    }
    let fracture = match &config.loading {
        Loading::Static => None,
        Loading::Fracture {
            axis,
            total,
            steps,
            batch,
            ..
        } => {
            let selector = config.loading.selector().expect("fracture selector");
            let nodes = select_nodes(&model, &selector)?;
            for &n in &nodes {
                fixed.remove(&(n, axis.index()));
            }
            Some(LoadingSpec {
                nodes,
                axis: *axis,
                total: *total,
                steps: *steps,
                batch: *batch,
            })
        }
    };
    let constraints = fixed
        .into_iter()
        .map(|((node, axis), value)| Constraint {
            node,
            axis: axis_of(axis),
            value,
        })
        .collect();
    Ok(PreparedCase {
        model,
        constraints,
        loads,
        fracture,
    })
}

pub fn build_mesh(model: &LatticeModel, spec: Option<&MeshSpec>) -> Result<CoarseMesh> {
    let Some(spec) = spec else {
        return Ok(CoarseMesh::full_resolution(model));
    };
    let l0 = model.material.strut_length;
    let smallest = spec.element_size * model.grid.pitch[0].min(model.grid.pitch[1]);
    if smallest < 10.0 * l0 {
        warn!(
            "element size {:.2} l0 is below the recommended 10 l0",
            smallest / l0
        );
    }
    build_coarse_mesh(model, spec)
}

pub fn build_assignment(
    model: &LatticeModel,
    mesh: &CoarseMesh,
    scheme: Scheme,
    selection: PsnSelection,
) -> Result<SamplingAssignment> {
    if mesh.is_full_resolution() {
        let mut a = SamplingAssignment::full(model.nodes.len(), 0);
        a.scheme = scheme;
        return Ok(a);
    }
    build_sampling(model, mesh, scheme, selection)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CaseCounts {
    pub nodes: usize,
    pub live_struts: usize,
    pub elements: usize,
    pub explicit_elements: usize,
    pub irn: usize,
    pub nirn: usize,
    pub gn: usize,
    pub dofs: usize,
    pub psn: usize,
    pub ssn: usize,
    pub nsn: usize,
    pub sampling_nodes: usize,
}

impl CaseCounts {
    pub fn new(model: &LatticeModel, mesh: &CoarseMesh, assignment: &SamplingAssignment) -> Self {
        let roles = mesh.role_counts();
        CaseCounts {
            nodes: model.nodes.len(),
            live_struts: model.live_strut_count(),
            elements: mesh.elements.len(),
            explicit_elements: assignment.explicit.iter().filter(|&&e| e).count(),
            irn: roles.irn,
            nirn: roles.nirn,
            gn: roles.gn,
            dofs: mesh.dofs.dof_count(),
            psn: assignment.count(SamplingRole::Psn),
            ssn: assignment.count(SamplingRole::Ssn),
            nsn: assignment.count(SamplingRole::Nsn),
            sampling_nodes: assignment.sampling_node_count(),
        }
    }
}

/// Comparison of a fracture history against the full-resolution one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FractureComparison {
    /// External work relative to the reference.
    pub work_ratio: f64,
    /// Reaction at the final recorded step relative to the reference.
    pub final_reaction_ratio: f64,
    /// Largest `|F − F_ref| / |F_ref|` over steps with a non-zero reference.
    pub max_step_deviation: f64,
    /// Largest `|F − F_ref|` over steps, relative to the peak reference force.
    pub max_peak_deviation: f64,
    /// `|A ∩ B| / max(|A|, |B|)` of the failed-strut sets.
    pub failed_overlap: f64,
}

/// Reactions smaller than this fraction of the reference peak count as zero.
pub const ZERO_REACTION: f64 = 1e-6;

pub fn compare_fracture(test: &FractureHistory, reference: &FractureHistory) -> FractureComparison {
    let peak = reference
        .steps
        .iter()
        .map(|s| s.reaction.abs())
        .fold(0.0, f64::max);
    // reactions below this are numerically zero (a severed or mechanism state)
    let floor = ZERO_REACTION * peak;
    let mut max_step: f64 = 0.0;
    let mut max_peak: f64 = 0.0;
    for (a, b) in test.steps.iter().zip(&reference.steps) {
        let d = (a.reaction - b.reaction).abs();
        let scale = b.reaction.abs().max(floor);
        if scale > 0.0 {
            max_step = max_step.max(d / scale);
        } else if d != 0.0 {
            max_step = f64::INFINITY;
        }
        if peak > 0.0 {
            max_peak = max_peak.max(d / peak);
        }
    }
    if test.steps.len() != reference.steps.len() {
        max_step = f64::INFINITY;
        max_peak = f64::INFINITY;
    }
    let set_a: std::collections::BTreeSet<_> = test.failed.iter().copied().collect();
    let set_b: std::collections::BTreeSet<_> = reference.failed.iter().copied().collect();
    let common = set_a.intersection(&set_b).count();
    let largest = set_a.len().max(set_b.len());
    let ratio = |a: f64, b: f64| if b != 0.0 { a / b } else if a == 0.0 { 1.0 } else { f64::INFINITY };
    let final_a = test.steps.last().map_or(0.0, |s| s.reaction);
    let final_b = reference.steps.last().map_or(0.0, |s| s.reaction);
    FractureComparison {
        work_ratio: ratio(test.external_work, reference.external_work),
        final_reaction_ratio: ratio(final_a, final_b),
        max_step_deviation: max_step,
        max_peak_deviation: max_peak,
        failed_overlap: if largest == 0 { 1.0 } else { common as f64 / largest as f64 },
    }
}

#[derive(Clone, Debug, Default)]
pub struct Timing {
    pub setup: Duration,
    pub solve: Duration,
    pub reference: Duration,
}

#[derive(Clone, Debug)]
pub struct CaseResult {
    pub name: String,
    pub scheme: Scheme,
    /// Lattice in its final state (failed struts marked dead).
    pub model: LatticeModel,
    pub mesh: CoarseMesh,
    pub assignment: SamplingAssignment,
    /// Static solution, or the last solved state of a fracture run.
    pub solution: Solution,
    pub reference: Option<Solution>,
    pub full_sampling: Option<Solution>,
    pub errors: Option<ErrorReport>,
    pub fracture: Option<FractureHistory>,
    pub reference_fracture: Option<FractureHistory>,
    pub fracture_comparison: Option<FractureComparison>,
    pub counts: CaseCounts,
    pub timing: Timing,
}

pub fn run_case(config: &CaseConfig) -> Result<CaseResult> {
    let t0 = Instant::now();
    let prepared = prepare_case(config)?;
    let mesh = build_mesh(&prepared.model, config.mesh.as_ref())?;
    let assignment = build_assignment(&prepared.model, &mesh, config.scheme, config.psn_selection)?;
    let counts = CaseCounts::new(&prepared.model, &mesh, &assignment);
    info!(
        "{}: {} nodes, {} elements, {} DOFs, {} sampling nodes ({})",
        config.name, counts.nodes, counts.elements, counts.dofs, counts.sampling_nodes, config.scheme
    );
    let mut timing = Timing {
        setup: t0.elapsed(),
        ..Default::default()
    };
    let context = |e: QcError| match e {
        QcError::Config(m) => QcError::Config(format!("case '{}': {m}", config.name)),
        other => other,
    };

    if let Some(loading) = &prepared.fracture {
        let t1 = Instant::now();
        let mut model = prepared.model.clone();
        let history = run_quasistatic_fracture(
            &mut model,
            &mesh,
            &assignment,
            &prepared.constraints,
            loading,
            &config.solver,
        )
        .map_err(context)?;
        let solution = final_state(&model, &mesh, &assignment, &prepared, loading, &history, &config.solver)?;
        timing.solve = t1.elapsed();

        let t2 = Instant::now();
        let reference_fracture = if config.reference == Reference::Fr {
            let mut fr_model = prepared.model.clone();
            let fr_mesh = CoarseMesh::full_resolution(&fr_model);
            let fr_assign = SamplingAssignment::full(fr_model.nodes.len(), 0);
            Some(run_quasistatic_fracture(
                &mut fr_model,
                &fr_mesh,
                &fr_assign,
                &prepared.constraints,
                loading,
                &config.solver,
            )?)
        } else {
            None
        };
        timing.reference = t2.elapsed();
        let fracture_comparison = reference_fracture
            .as_ref()
            .map(|r| compare_fracture(&history, r));
        let counts = CaseCounts {
            live_struts: model.live_strut_count(),
            ..counts
        };
        return Ok(CaseResult {
            name: config.name.clone(),
            scheme: config.scheme,
            model,
            mesh,
            assignment,
            solution,
            reference: None,
            full_sampling: None,
            errors: None,
            fracture: Some(history),
            reference_fracture,
            fracture_comparison,
            counts,
            timing,
        });
    }

    let t1 = Instant::now();
    let model = prepared.model;
    let solution = solve_static(
        &model,
        &mesh,
        &assignment,
        &prepared.constraints,
        &prepared.loads,
        &config.solver,
    )
    .map_err(context)?;
    timing.solve = t1.elapsed();

    let t2 = Instant::now();
    let full_sampling = match config.reference {
        Reference::None => None,
        _ if config.scheme == Scheme::Fs => Some(solution.clone()),
        _ => {
            let fs = build_assignment(&model, &mesh, Scheme::Fs, config.psn_selection)?;
            Some(solve_static(
                &model,
                &mesh,
                &fs,
                &prepared.constraints,
                &prepared.loads,
                &config.solver,
            )?)
        }
    };
    let reference = match config.reference {
        Reference::Fr => Some(solve_full_resolution(
            &model,
            &prepared.constraints,
            &prepared.loads,
            &config.solver,
        )?),
        _ => None,
    };
    let errors = match (&reference, &full_sampling) {
        (Some(fr), Some(fs)) => Some(split_errors(&model, &fr.u_full, &fs.u_full, &solution.u_full)?),
        (None, Some(fs)) => Some(split_errors(&model, &fs.u_full, &fs.u_full, &solution.u_full)?),
        _ => None,
    };
    timing.reference = t2.elapsed();
    if let Some(e) = &errors {
        if !e.triangle_ok() {
            warn!("{}: triangle inequality violated: {e:?}", config.name);
        }
    }
    Ok(CaseResult {
        name: config.name.clone(),
        scheme: config.scheme,
        model,
        mesh,
        assignment,
        solution,
        reference,
        full_sampling,
        errors,
        fracture: None,
        reference_fracture: None,
        fracture_comparison: None,
        counts,
        timing,
    })
}

fn final_state(
    model: &LatticeModel,
    mesh: &CoarseMesh,
    assignment: &SamplingAssignment,
    prepared: &PreparedCase,
    loading: &LoadingSpec,
    history: &FractureHistory,
    options: &SolverOptions,
) -> Result<Solution> {
    let delta = history.steps.last().map_or(0.0, |s| s.displacement);
    let mut constraints = prepared.constraints.clone();
    constraints.extend(loading.nodes.iter().map(|&node| Constraint {
        node,
        axis: loading.axis,
        value: delta,
    }));
    solve_static(model, mesh, assignment, &constraints, &prepared.loads, options)
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteRow {
    pub scheme: Scheme,
    pub element_size: f64,
    pub dofs: usize,
    pub sampling_nodes: usize,
    pub errors: ErrorReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct SchemeFit {
    pub scheme: Scheme,
    pub displacement: ConvergenceFit,
    pub energy: ConvergenceFit,
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: String,
    pub rows: Vec<SuiteRow>,
    /// Present when at least three sizes were run.
    pub fits: Vec<SchemeFit>,
}

impl SuiteResult {
    pub fn norms(&self, scheme: Scheme) -> Vec<(f64, ErrorReport)> {
        self.rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| (r.element_size, r.errors))
            .collect()
    }

    pub fn fit(&self, scheme: Scheme) -> Option<&SchemeFit> {
        self.fits.iter().find(|f| f.scheme == scheme)
    }
}

/// Runs a static case for every size and scheme against one full-resolution
/// reference, and fits convergence orders of the total errors.
pub fn run_convergence_suite(
    base: &CaseConfig,
    sizes: &[f64],
    schemes: &[Scheme],
) -> Result<SuiteResult> {
    if prepare_case(base)?.fracture.is_some() {
        return Err(QcError::Config("convergence suites need a static case".into()));
    }
    let Some(base_mesh) = base.mesh.clone() else {
        return Err(QcError::Config("convergence suites need a [mesh] section".into()));
    };
    let prepared = prepare_case(base)?;
    let model = &prepared.model;
    let fr = solve_full_resolution(model, &prepared.constraints, &prepared.loads, &base.solver)?;
    let mut rows = Vec::new();
    for &size in sizes {
        let spec = MeshSpec {
            element_size: size,
            ..base_mesh.clone()
        };
        let mesh = build_mesh(model, Some(&spec))?;
        let fs_assign = build_assignment(model, &mesh, Scheme::Fs, base.psn_selection)?;
        let fs = solve_static(model, &mesh, &fs_assign, &prepared.constraints, &prepared.loads, &base.solver)?;
        for &scheme in schemes {
            let (assign, sol) = if scheme == Scheme::Fs {
                (fs_assign.clone(), fs.clone())
            } else {
                let a = build_assignment(model, &mesh, scheme, base.psn_selection)?;
                let s = solve_static(model, &mesh, &a, &prepared.constraints, &prepared.loads, &base.solver)?;
                (a, s)
            };
            let errors = split_errors(model, &fr.u_full, &fs.u_full, &sol.u_full)?;
            info!(
                "{} size {size}: {scheme} e_disp {:.4e} e_U {:.4e}",
                base.name, errors.e_disp, errors.e_u
            );
            rows.push(SuiteRow {
                scheme,
                element_size: size,
                dofs: mesh.dofs.dof_count(),
                sampling_nodes: assign.sampling_node_count(),
                errors,
            });
        }
    }
    let mut fits = Vec::new();
    if sizes.len() >= 3 {
        for &scheme in schemes {
            let pts: Vec<&SuiteRow> = rows.iter().filter(|r| r.scheme == scheme).collect();
            let h: Vec<f64> = pts.iter().map(|r| r.element_size).collect();
            let d: Vec<f64> = pts.iter().map(|r| r.errors.e_disp).collect();
            let u: Vec<f64> = pts.iter().map(|r| r.errors.e_u).collect();
            fits.push(SchemeFit {
                scheme,
                displacement: fit_convergence_order(&h, &d)?,
                energy: fit_convergence_order(&h, &u)?,
            });
        }
    }
    Ok(SuiteResult {
        name: base.name.clone(),
        rows,
        fits,
    })
}
