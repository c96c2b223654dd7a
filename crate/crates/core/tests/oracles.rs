use approx::assert_relative_eq;
use nalgebra::{Matrix6, Vector6};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qc_lattice::assembly::{
    assemble_reduced_stiffness, residual_forces, sampled_energy_by_nodes, sampled_total_energy,
};
use qc_lattice::error_analysis::{
    displacement_error, energy_error, fit_convergence_order, split_errors,
};
use qc_lattice::harness::presets;
use qc_lattice::harness::run::{build_assignment, build_lattice, build_mesh};
use qc_lattice::mesh::CoarseMesh;
use qc_lattice::sampling::{PsnSet, SamplingAssignment, SamplingRole, PSN_COUNT};
use qc_lattice::{LatticeModel, Scheme, Vec2};

fn monomials(p: &Vec2) -> Vector6<f64> {
    Vector6::new(1.0, p.x, p.y, p.x * p.x, p.y * p.y, p.x * p.y)
}

/// ψ by Cramer's rule on `Aᵀ ψ = m(p)`.
fn psi_cramer(points: &[Vec2; PSN_COUNT], p: &Vec2) -> [f64; PSN_COUNT] {
    let mut at = Matrix6::zeros();
    for (i, q) in points.iter().enumerate() {
        at.set_column(i, &monomials(q));
    }
    let det = at.determinant();
    let rhs = monomials(p);
    let mut out = [0.0; PSN_COUNT];
    for (i, o) in out.iter_mut().enumerate() {
        let mut m = at;
        m.set_column(i, &rhs);
        *o = m.determinant() / det;
    }
    out
}

fn unit_set(points: [Vec2; PSN_COUNT]) -> Option<PsnSet> {
    PsnSet::new(0, [0, 1, 2, 3, 4, 5], points, Vec2::zeros(), Vec2::new(1.0, 1.0))
        .ok()
        .filter(|s| s.vandermonde_condition < 1e6)
}

fn point() -> impl Strategy<Value = Vec2> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y)| Vec2::new(x, y))
}

fn six_points() -> impl Strategy<Value = [Vec2; PSN_COUNT]> {
    prop::array::uniform6(point())
}

proptest! {
    #[test]
    fn psi_matches_cramer(points in six_points(), p in point()) {
        let set = unit_set(points);
        prop_assume!(set.is_some());
        let set = set.unwrap();
        let psi = set.psi(&p).unwrap();
        let oracle = psi_cramer(&points, &p);
        let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..PSN_COUNT {
            prop_assert!((psi[i] - oracle[i]).abs() <= 1e-7 * scale, "{psi:?} vs {oracle:?}");
        }
    }

    #[test]
    fn psi_kronecker_and_partition(points in six_points(), p in point()) {
        let set = unit_set(points);
        prop_assume!(set.is_some());
        let set = set.unwrap();
        for (j, q) in points.iter().enumerate() {
            let psi = set.psi(q).unwrap();
            for (i, v) in psi.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((v - expect).abs() < 1e-8);
            }
        }
        let psi = set.psi(&p).unwrap();
        let sum: f64 = psi.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-8);
    }

    #[test]
    fn psi_reproduces_quadratics(
        points in six_points(),
        p in point(),
        c in prop::array::uniform6(-2.0..2.0f64),
    ) {
        let set = unit_set(points);
        prop_assume!(set.is_some());
        let set = set.unwrap();
        let f = |q: &Vec2| c[0] + c[1] * q.x + c[2] * q.y + c[3] * q.x * q.x + c[4] * q.y * q.y + c[5] * q.x * q.y;
        let psi = set.psi(&p).unwrap();
        let interp: f64 = psi.iter().zip(&points).map(|(w, q)| w * f(q)).sum();
        prop_assert!((interp - f(&p)).abs() < 1e-7);
    }
}

fn preset_model(name: &str) -> (LatticeModel, CoarseMesh) {
    let cfg = presets::load(name).unwrap();
    let model = build_lattice(&cfg.lattice).unwrap();
    let mesh = build_mesh(&model, cfg.mesh.as_ref()).unwrap();
    (model, mesh)
}

#[test]
fn weights_match_moments_of_unsampled_members() {
    let (model, mesh) = preset_model("tri-tension-fs-24");
    for scheme in [Scheme::Ess, Scheme::Iss, Scheme::Nas, Scheme::Nss] {
        let base = qc_lattice::sampling::assign_sampling_scheme(&model, &mesh, scheme);
        let a = build_assignment(&model, &mesh, scheme, Default::default()).unwrap();
        let mut checked = 0;
        for el in &mesh.elements {
            let Some(set) = &a.psn_sets[el.id] else { continue };
            let unsampled: Vec<usize> = el
                .members
                .iter()
                .copied()
                .filter(|&id| base.roles[id] != SamplingRole::Ssn)
                .collect();
            let c = el.centroid();
            let h = Vec2::new(el.rect.width() * 0.5, el.rect.height() * 0.5);
            let local = |id: usize| {
                let p = model.nodes[id].position;
                Vec2::new((p.x - c.x) / h.x, (p.y - c.y) / h.y)
            };
            let mut lhs = Vector6::zeros();
            for &id in &set.nodes {
                lhs += a.weights[id] * monomials(&local(id));
                assert_eq!(a.roles[id], SamplingRole::Psn);
            }
            checked += 1;
            let mut rhs = Vector6::zeros();
            for &id in &unsampled {
                rhs += monomials(&local(id));
            }
            for i in 0..PSN_COUNT {
                assert!(
                    (lhs[i] - rhs[i]).abs() <= 1e-9 * rhs[0].max(1.0),
                    "{scheme} element {} moment {i}: {} vs {}",
                    el.id,
                    lhs[i],
                    rhs[i]
                );
            }
        }
        assert!(checked > 0, "{scheme}: no element has primary sampling nodes");
    }
}

fn random_rn(mesh: &CoarseMesh, rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
    (0..mesh.dofs.dof_count())
        .map(|_| rng.random_range(-scale..scale))
        .collect()
}

fn schemes_on(model: &LatticeModel, mesh: &CoarseMesh) -> Vec<SamplingAssignment> {
    Scheme::ALL
        .iter()
        .map(|&s| build_assignment(model, mesh, s, Default::default()).unwrap())
        .collect()
}

#[test]
fn strut_and_node_energy_sums_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["square-stretch-iss", "tri-tension-fs-24"] {
        let (model, mesh) = preset_model(name);
        for a in schemes_on(&model, &mesh) {
            for _ in 0..3 {
                let u_rn = random_rn(&mesh, &mut rng, 0.05);
                let by_struts = sampled_total_energy(&model, &mesh, &a, &u_rn);
                let by_nodes = sampled_energy_by_nodes(&model, &a, &mesh.interpolate(&u_rn));
                assert_relative_eq!(by_struts, by_nodes, max_relative = 1e-11);
            }
        }
    }
}

#[test]
fn stiffness_is_the_residual_jacobian() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (model, mesh) = preset_model("tri-tension-fs-24");
    let f0 = vec![Vec2::zeros(); model.nodes.len()];
    for a in schemes_on(&model, &mesh) {
        let k = assemble_reduced_stiffness(&model, &mesh, &a);
        assert!(k.asymmetry() <= 1e-12 * k.norm());
        let u = random_rn(&mesh, &mut rng, 0.05);
        let d = random_rn(&mesh, &mut rng, 0.01);
        let shifted: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + b).collect();
        let r0 = residual_forces(&model, &mesh, &a, &u, &f0);
        let r1 = residual_forces(&model, &mesh, &a, &shifted, &f0);
        let kd = k.mul_vec(&d);
        let norm = kd.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = kd
            .iter()
            .zip(r0.iter().zip(&r1))
            .map(|(kd, (a, b))| (kd - (a - b)).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-10 * norm, "{}: {diff:e} vs {norm:e}", a.scheme);
    }
}

fn field() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16)
}

fn to_vec2(v: &[(f64, f64)]) -> Vec<Vec2> {
    v.iter().map(|&(x, y)| Vec2::new(x, y)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identical_fields_have_zero_error(a in field()) {
        let model = qc_lattice::lattice::generate_square_lattice(
            3, 3, qc_lattice::lattice::Bracing::XBraced, Default::default()).unwrap();
        let u = to_vec2(&a);
        prop_assume!(u.iter().any(|v| v.norm() > 1e-3));
        prop_assert_eq!(displacement_error(&u, &u).unwrap(), 0.0);
        prop_assert_eq!(energy_error(&model, &u, &u).unwrap(), 0.0);
    }

    #[test]
    fn split_obeys_triangle_inequality(a in field(), b in field(), c in field()) {
        let model = qc_lattice::lattice::generate_square_lattice(
            3, 3, qc_lattice::lattice::Bracing::XBraced, Default::default()).unwrap();
        let (fr, fs, rr) = (to_vec2(&a), to_vec2(&b), to_vec2(&c));
        prop_assume!(fr.iter().any(|v| v.norm() > 1e-3));
        let r = split_errors(&model, &fr, &fs, &rr).unwrap();
        prop_assert!(r.triangle_ok());
        prop_assert!(r.e_disp >= 0.0 && r.e_u >= 0.0);
    }

    #[test]
    fn fit_recovers_power_law(order in 0.2..3.0f64, c in 1e-4..1e2f64) {
        let sizes = [32.0, 24.0, 16.0, 12.0];
        let norms: Vec<f64> = sizes.iter().map(|h: &f64| c * h.powf(order)).collect();
        let fit = fit_convergence_order(&sizes, &norms).unwrap();
        prop_assert!((fit.order - order).abs() < 1e-10);
        prop_assert!(fit.r_squared > 1.0 - 1e-10);
    }
}
