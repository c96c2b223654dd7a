//! Relative displacement and energy error norms, their split into
//! discretization and sampling parts, and convergence-order fits.

use serde::Serialize;

use crate::error::{QcError, Result};
use crate::geometry::Vec2;
use crate::lattice::LatticeModel;

/// Slack allowed in the triangle-inequality checks.
pub const TRIANGLE_SLACK: f64 = 1e-12;

fn check_lengths(a: &[Vec2], b: &[Vec2]) -> Result<()> {
    if a.len() != b.len() {
        return Err(QcError::Mismatch(format!(
            "fields have {} and {} nodes",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `‖u_test − u_ref‖₂ / ‖u_ref‖₂` over all nodes.
pub fn displacement_error(u_ref: &[Vec2], u_test: &[Vec2]) -> Result<f64> {
    check_lengths(u_ref, u_test)?;
    let den: f64 = u_ref.iter().map(|u| u.norm_squared()).sum();
    if den == 0.0 {
        return Err(QcError::ZeroReference);
    }
    let num: f64 = u_ref
        .iter()
        .zip(u_test)
        .map(|(a, b)| (b - a).norm_squared())
        .sum();
    Ok((num / den).sqrt())
}

/// Relative norm of the relative displacements `u_j − u_i` over live struts.
pub fn energy_error(model: &LatticeModel, u_ref: &[Vec2], u_test: &[Vec2]) -> Result<f64> {
    check_lengths(u_ref, u_test)?;
    if u_ref.len() != model.nodes.len() {
        return Err(QcError::Mismatch(format!(
            "field has {} nodes, lattice {}",
            u_ref.len(),
            model.nodes.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for s in model.struts.iter().filter(|s| s.alive) {
        let (i, j) = s.nodes;
        let dr = u_ref[j] - u_ref[i];
        let dt = u_test[j] - u_test[i];
        den += dr.norm_squared();
        num += (dt - dr).norm_squared();
    }
    if den == 0.0 {
        return Err(QcError::ZeroReference);
    }
    Ok((num / den).sqrt())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ErrorReport {
    pub e_disp: f64,
    pub e_disp_disc: f64,
    pub e_disp_sam: f64,
    pub e_u: f64,
    pub e_u_disc: f64,
    pub e_u_sam: f64,
    pub triangle_ok_disp: bool,
    pub triangle_ok_energy: bool,
}

impl ErrorReport {
    pub fn triangle_ok(&self) -> bool {
        self.triangle_ok_disp && self.triangle_ok_energy
    }
}

/// Total (FR vs RR), discretization (FR vs FS) and sampling (FS vs RR) errors,
/// all normalized by the full-resolution field.
pub fn split_errors(
    model: &LatticeModel,
    u_fr: &[Vec2],
    u_fs: &[Vec2],
    u_rr: &[Vec2],
) -> Result<ErrorReport> {
    check_lengths(u_fs, u_rr)?;
    check_lengths(u_fr, u_fs)?;
    let e_disp = displacement_error(u_fr, u_rr)?;
    let e_disp_disc = displacement_error(u_fr, u_fs)?;
    let e_u = energy_error(model, u_fr, u_rr)?;
    let e_u_disc = energy_error(model, u_fr, u_fs)?;

    let den_disp: f64 = u_fr.iter().map(|u| u.norm_squared()).sum::<f64>().sqrt();
    let num_disp: f64 = u_fs
        .iter()
        .zip(u_rr)
        .map(|(a, b)| (b - a).norm_squared())
        .sum::<f64>()
        .sqrt();
    let e_disp_sam = num_disp / den_disp;

    let mut den_u = 0.0;
    let mut num_u = 0.0;
    for s in model.struts.iter().filter(|s| s.alive) {
        let (i, j) = s.nodes;
        den_u += (u_fr[j] - u_fr[i]).norm_squared();
        num_u += ((u_rr[j] - u_rr[i]) - (u_fs[j] - u_fs[i])).norm_squared();
    }
    let e_u_sam = (num_u / den_u).sqrt();

    Ok(ErrorReport {
        e_disp,
        e_disp_disc,
        e_disp_sam,
        e_u,
        e_u_disc,
        e_u_sam,
        triangle_ok_disp: e_disp <= e_disp_disc + e_disp_sam + TRIANGLE_SLACK,
        triangle_ok_energy: e_u <= e_u_disc + e_u_sam + TRIANGLE_SLACK,
    })
}

/// Per-node displacement error magnitude `‖u_test − u_ref‖`.
pub fn nodal_errors(u_ref: &[Vec2], u_test: &[Vec2]) -> Vec<f64> {
    u_ref
        .iter()
        .zip(u_test)
        .map(|(a, b)| (b - a).norm())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceFit {
    pub sizes: Vec<f64>,
    pub norms: Vec<f64>,
    /// Slope of `log(norm)` against `log(size)`.
    pub order: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log norm = p log size + c`.
pub fn fit_convergence_order(sizes: &[f64], norms: &[f64]) -> Result<ConvergenceFit> {
    if sizes.len() != norms.len() {
        return Err(QcError::Fit(format!(
            "{} sizes but {} norms",
            sizes.len(),
            norms.len()
        )));
    }
    if sizes.len() < 3 {
        return Err(QcError::Fit(format!(
            "at least 3 points are needed, got {}",
            sizes.len()
        )));
    }
    if sizes.iter().chain(norms).any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(QcError::Fit("sizes and norms must be positive".into()));
    }
    let x: Vec<f64> = sizes.iter().map(|s| s.ln()).collect();
    let y: Vec<f64> = norms.iter().map(|s| s.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(QcError::Fit("all sizes are equal".into()));
    }
    let order = sxy / sxx;
    let intercept = my - order * mx;
    let ss_res: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - (order * a + intercept)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(ConvergenceFit {
        sizes: sizes.to_vec(),
        norms: norms.to_vec(),
        order,
        r_squared,
    })
}
