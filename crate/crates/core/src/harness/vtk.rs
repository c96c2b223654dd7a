//! Legacy ASCII VTK unstructured grid: lattice nodes as points, live struts as
//! line cells.

use std::fmt::Write as _;

use crate::geometry::Vec2;
use crate::lattice::{elongation, LatticeModel};

const VTK_LINE: u8 = 3;

pub fn write_vtk(model: &LatticeModel, u: &[Vec2], title: &str) -> String {
    let live: Vec<_> = model.struts.iter().filter(|s| s.alive).collect();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    // the title line must not contain a newline
    out.push_str(&title.replace('\n', " "));
    out.push('\n');
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");

    let _ = writeln!(out, "POINTS {} double", model.nodes.len());
    for n in &model.nodes {
        let _ = writeln!(out, "{} {} 0", n.position.x, n.position.y);
    }
    let _ = writeln!(out, "CELLS {} {}", live.len(), 3 * live.len());
    for s in &live {
        let _ = writeln!(out, "2 {} {}", s.nodes.0, s.nodes.1);
    }
    let _ = writeln!(out, "CELL_TYPES {}", live.len());
    for _ in &live {
        let _ = writeln!(out, "{VTK_LINE}");
    }

    let _ = writeln!(out, "POINT_DATA {}", model.nodes.len());
    out.push_str("VECTORS displacement double\n");
    for d in u {
        let _ = writeln!(out, "{} {} 0", d.x, d.y);
    }

    let _ = writeln!(out, "CELL_DATA {}", live.len());
    out.push_str("SCALARS alive int 1\nLOOKUP_TABLE default\n");
    for s in &live {
        let _ = writeln!(out, "{}", u8::from(s.alive));
    }
    out.push_str("SCALARS stress double 1\nLOOKUP_TABLE default\n");
    for s in &live {
        let sigma = model.material.young_modulus * elongation(s, u) / s.rest_length;
        let _ = writeln!(out, "{sigma}");
    }
    out
}
