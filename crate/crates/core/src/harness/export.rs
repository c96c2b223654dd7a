//! CSV and VTK exports. Floats are written in shortest round-trip form, lines
//! end with LF, and each file is written to a temporary name then renamed.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::OutputSpec;
use super::run::{CaseResult, SuiteResult};
use super::vtk::write_vtk;
use crate::error::{QcError, Result};
use crate::fracture::FractureHistory;
use crate::geometry::Vec2;
use crate::lattice::LatticeModel;

pub const FIELD_HEADER: [&str; 6] = ["node_id", "x0", "y0", "ux", "uy", "energy"];
pub const CURVE_HEADER: [&str; 4] = ["step", "u", "F", "failed_count"];

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| QcError::Config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> QcError {
    QcError::Config(format!("csv: {e}"))
}

/// Node table `node_id,x0,y0,ux,uy,energy` with the node-wise lattice energy.
pub fn field_csv(model: &LatticeModel, u: &[Vec2]) -> Result<String> {
    let energies = model.node_energies(u);
    let mut w = csv_writer();
    w.write_record(FIELD_HEADER).map_err(csv_err)?;
    for n in &model.nodes {
        let d = u[n.id];
        w.write_record([
            n.id.to_string(),
            n.position.x.to_string(),
            n.position.y.to_string(),
            d.x.to_string(),
            d.y.to_string(),
            energies[n.id].to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Force–displacement table `step,u,F,failed_count`.
pub fn curve_csv(history: Option<&FractureHistory>) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(CURVE_HEADER).map_err(csv_err)?;
    for s in history.map(|h| h.steps.as_slice()).unwrap_or_default() {
        w.write_record([
            s.step.to_string(),
            s.displacement.to_string(),
            s.reaction.to_string(),
            s.failed_count.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One-row summary of counts, error norms and fracture measures.
pub fn summary_csv(result: &CaseResult) -> Result<String> {
    let c = &result.counts;
    let e = result.errors;
    let h = result.fracture.as_ref();
    let r = result.reference_fracture.as_ref();
    let cmp = result.fracture_comparison;
    let mut w = csv_writer();
    w.write_record([
        "case",
        "scheme",
        "nodes",
        "live_struts",
        "elements",
        "explicit_elements",
        "irn",
        "nirn",
        "gn",
        "dofs",
        "psn",
        "ssn",
        "nsn",
        "sampling_nodes",
        "e_disp",
        "e_disp_disc",
        "e_disp_sam",
        "e_u",
        "e_u_disc",
        "e_u_sam",
        "triangle_ok_disp",
        "triangle_ok_energy",
        "total_energy",
        "solver_residual",
        "external_work",
        "reference_external_work",
        "work_ratio",
        "final_reaction_ratio",
        "failed_count",
        "failed_overlap",
    ])
    .map_err(csv_err)?;
    w.write_record([
        result.name.clone(),
        result.scheme.to_string(),
        c.nodes.to_string(),
        c.live_struts.to_string(),
        c.elements.to_string(),
        c.explicit_elements.to_string(),
        c.irn.to_string(),
        c.nirn.to_string(),
        c.gn.to_string(),
        c.dofs.to_string(),
        c.psn.to_string(),
        c.ssn.to_string(),
        c.nsn.to_string(),
        c.sampling_nodes.to_string(),
        opt(e.map(|e| e.e_disp)),
        opt(e.map(|e| e.e_disp_disc)),
        opt(e.map(|e| e.e_disp_sam)),
        opt(e.map(|e| e.e_u)),
        opt(e.map(|e| e.e_u_disc)),
        opt(e.map(|e| e.e_u_sam)),
        e.map(|e| e.triangle_ok_disp.to_string()).unwrap_or_default(),
        e.map(|e| e.triangle_ok_energy.to_string()).unwrap_or_default(),
        result.solution.total_energy.to_string(),
        result.solution.solver_residual.to_string(),
        opt(h.map(|h| h.external_work)),
        opt(r.map(|r| r.external_work)),
        opt(cmp.map(|c| c.work_ratio)),
        opt(cmp.map(|c| c.final_reaction_ratio)),
        h.map(|h| h.failed.len().to_string()).unwrap_or_default(),
        opt(cmp.map(|c| c.failed_overlap)),
    ])
    .map_err(csv_err)?;
    finish(w)
}

/// Per-size, per-scheme norms followed by fitted orders.
pub fn convergence_csv(suite: &SuiteResult) -> Result<String> {
    let mut w = csv_writer();
    w.write_record([
        "scheme",
        "element_size",
        "dofs",
        "sampling_nodes",
        "e_disp",
        "e_disp_disc",
        "e_disp_sam",
        "e_u",
        "e_u_disc",
        "e_u_sam",
    ])
    .map_err(csv_err)?;
    for r in &suite.rows {
        let e = &r.errors;
        w.write_record([
            r.scheme.to_string(),
            r.element_size.to_string(),
            r.dofs.to_string(),
            r.sampling_nodes.to_string(),
            e.e_disp.to_string(),
            e.e_disp_disc.to_string(),
            e.e_disp_sam.to_string(),
            e.e_u.to_string(),
            e.e_u_disc.to_string(),
            e.e_u_sam.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn fits_csv(suite: &SuiteResult) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["scheme", "norm", "order", "r_squared"])
        .map_err(csv_err)?;
    for f in &suite.fits {
        for (norm, fit) in [("disp", &f.displacement), ("energy", &f.energy)] {
            w.write_record([
                f.scheme.to_string(),
                norm.to_string(),
                fit.order.to_string(),
                fit.r_squared.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| QcError::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| QcError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| QcError::io(path, e))
}

/// Writes the enabled outputs of a case into `dir` and returns the paths.
pub fn export_outputs(result: &CaseResult, dir: &Path, spec: &OutputSpec) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut emit = |suffix: &str, text: String| -> Result<()> {
        let path = dir.join(format!("{}{suffix}", result.name));
        write_atomic(&path, &text)?;
        written.push(path);
        Ok(())
    };
    if spec.fields {
        emit("_fields.csv", field_csv(&result.model, &result.solution.u_full)?)?;
        if let Some(fr) = &result.reference {
            emit("_reference_fields.csv", field_csv(&result.model, &fr.u_full)?)?;
        }
    }
    if spec.curve {
        emit("_curve.csv", curve_csv(result.fracture.as_ref())?)?;
        if let Some(r) = &result.reference_fracture {
            emit("_reference_curve.csv", curve_csv(Some(r))?)?;
        }
    }
    if spec.summary {
        emit("_summary.csv", summary_csv(result)?)?;
    }
    if spec.vtk {
        emit(".vtk", write_vtk(&result.model, &result.solution.u_full, &result.name))?;
    }
    Ok(written)
}

pub fn export_suite(suite: &SuiteResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (suffix, text) in [
        ("_convergence.csv", convergence_csv(suite)?),
        ("_fits.csv", fits_csv(suite)?),
    ] {
        let path = dir.join(format!("{}{suffix}", suite.name));
        write_atomic(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}
