use std::collections::HashSet;

use approx::assert_relative_eq;

use qc_lattice::assembly::Constraint;
use qc_lattice::fracture::{external_work, run_quasistatic_fracture, LoadingSpec};
use qc_lattice::harness::{run_case, CaseConfig};
use qc_lattice::lattice::{generate_square_lattice, Bracing};
use qc_lattice::mesh::CoarseMesh;
use qc_lattice::solver::SolverOptions;
use qc_lattice::{Axis, LatticeModel, Material, SamplingAssignment};

/// Nodes 0-1-2 joined by two horizontal struts. Node 0 and the detached top
/// row are held; the transverse modes of nodes 1 and 2 are pinned by the
/// solver regularization so that neither counts as a support.
fn two_strut_chain(tethered: bool) -> (LatticeModel, Vec<Constraint>) {
    let mut m = generate_square_lattice(2, 1, Bracing::None, Material::default()).unwrap();
    let mut keep: HashSet<(usize, usize)> = [(0, 1), (1, 2)].into();
    if tethered {
        // vertical struts to the held top row carry no load under x pulling
        keep.extend([(1, 4), (2, 5)]);
    }
    for s in 0..m.struts.len() {
        if !keep.contains(&m.struts[s].nodes) {
            m.remove_strut(s).unwrap();
        }
    }
    let mut c = Vec::new();
    for node in [0, 3, 4, 5] {
        c.push(Constraint { node, axis: Axis::X, value: 0.0 });
        c.push(Constraint { node, axis: Axis::Y, value: 0.0 });
    }
    (m, c)
}

fn run_chain(batch: bool) -> (LatticeModel, qc_lattice::fracture::FractureHistory) {
    let (mut m, supports) = two_strut_chain(batch);
    let mesh = CoarseMesh::full_resolution(&m);
    let a = SamplingAssignment::full(m.nodes.len(), 0);
    let loading = LoadingSpec {
        nodes: vec![2],
        axis: Axis::X,
        total: 0.1,
        steps: 10,
        batch,
    };
    let options = SolverOptions {
        regularization: 1e-12,
        ..Default::default()
    };
    let h = run_quasistatic_fracture(&mut m, &mesh, &a, &supports, &loading, &options).unwrap();
    (m, h)
}

#[test]
fn series_chain_breaks_at_the_analytic_threshold() {
    let mat = Material::default();
    // each strut carries half the imposed displacement
    let u_star = 2.0 * mat.yield_stress * mat.strut_length / mat.young_modulus;
    let k = mat.young_modulus * mat.cross_section / (2.0 * mat.strut_length);
    let (m, h) = run_chain(false);

    let first_failing = (1..=10).find(|&i| 0.01 * i as f64 >= u_star).unwrap();
    assert_eq!(h.steps.len(), first_failing + 1);
    assert!(h.terminated);
    for s in &h.steps[1..first_failing] {
        assert_relative_eq!(s.reaction, k * s.displacement, max_relative = 1e-9);
        assert!(s.newly_failed.is_empty());
    }
    let last = h.steps.last().unwrap();
    assert_eq!(last.newly_failed, vec![0]);
    assert!(last.reaction.abs() < 1e-9 * k);
    assert_eq!(h.failed, vec![0]);
    assert!(!m.struts[0].alive);
    assert!(m.struts[2].alive);

    let expected: f64 = (1..first_failing)
        .map(|i| {
            let (a, b) = ((i - 1) as f64 * 0.01, i as f64 * 0.01);
            0.5 * k * (a + b) * 0.01
        })
        .sum::<f64>()
        + 0.5 * k * (first_failing - 1) as f64 * 0.01 * 0.01;
    assert_relative_eq!(h.external_work, expected, max_relative = 1e-9);
    assert_relative_eq!(h.external_work, external_work(&h.curve()).unwrap(), max_relative = 1e-14);
}

#[test]
fn batch_mode_removes_tied_struts_together() {
    let (_, h) = run_chain(true);
    assert_eq!(h.failed, vec![0, 2]);
    assert!(!h.terminated);
    assert_eq!(h.steps.len(), 11);
    let broke = h.steps.iter().position(|s| !s.newly_failed.is_empty()).unwrap();
    assert_eq!(h.steps[broke].newly_failed, vec![0, 2]);
    for s in &h.steps[broke..] {
        assert!(s.reaction.abs() < 1e-6);
    }
}

const SHEET: &str = r#"
name = "small-sheet"
reference = "none"

[lattice]
type = "triangular"
nx = 12
ny = 15

[[boundary]]
set = "bottom"
ux = 0.0
uy = 0.0

[loading]
kind = "fracture"
set = "top"
axis = "y"
total = 0.4
steps = 40
"#;

#[test]
fn damage_is_monotone_and_failures_are_unique() {
    let cfg = CaseConfig::from_toml_str(SHEET).unwrap();
    let r = run_case(&cfg).unwrap();
    let h = r.fracture.as_ref().unwrap();
    assert!(!h.failed.is_empty());
    let unique: HashSet<_> = h.failed.iter().collect();
    assert_eq!(unique.len(), h.failed.len());
    for w in h.steps.windows(2) {
        assert!(w[1].failed_count >= w[0].failed_count);
        assert_eq!(w[1].failed_count - w[0].failed_count, w[1].newly_failed.len());
        assert!(w[1].displacement > w[0].displacement);
    }
    for &s in &h.failed {
        assert!(!r.model.struts[s].alive);
    }
    assert_eq!(r.model.live_strut_count(), r.model.struts.len() - h.failed.len());
    assert!(h.external_work > 0.0);
}
