use std::fs;

use approx::assert_relative_eq;

use qc_lattice::harness::config::OutputSpec;
use qc_lattice::harness::export::{curve_csv, field_csv, CURVE_HEADER, FIELD_HEADER};
use qc_lattice::harness::vtk::write_vtk;
use qc_lattice::harness::{export_outputs, presets, run_case, CaseConfig, Reference};
use qc_lattice::sampling::SamplingRole;

fn parse(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn field_csv_reproduces_the_sampled_energy() {
    let mut cfg = presets::load("square-stretch-iss").unwrap();
    cfg.reference = Reference::None;
    let r = run_case(&cfg).unwrap();
    let text = field_csv(&r.model, &r.solution.u_full).unwrap();
    let (header, rows) = parse(&text);
    assert_eq!(header, FIELD_HEADER);
    assert_eq!(rows.len(), r.model.nodes.len());

    let mut sampled = 0.0;
    for row in &rows {
        let id = row[0] as usize;
        let n = &r.model.nodes[id];
        assert_eq!(row[1], n.position.x);
        assert_eq!(row[2], n.position.y);
        assert_eq!(row[3], r.solution.u_full[id].x);
        assert_eq!(row[4], r.solution.u_full[id].y);
        sampled += match r.assignment.roles[id] {
            SamplingRole::Ssn => row[5],
            SamplingRole::Psn => r.assignment.weights[id] * row[5],
            SamplingRole::Nsn => 0.0,
        };
    }
    assert_relative_eq!(sampled, r.solution.total_energy, max_relative = 1e-12);
}

#[test]
fn vtk_lists_live_struts_as_cells() {
    let cfg = CaseConfig::from_toml_str(
        r#"
name = "tiny"
reference = "none"
[lattice]
type = "square"
nx = 4
ny = 3
bracing = "x_braced"
[[boundary]]
set = "bottom"
ux = 0.0
uy = 0.0
[[boundary]]
set = "top"
uy = 0.1
"#,
    )
    .unwrap();
    let mut r = run_case(&cfg).unwrap();
    r.model.remove_strut(0).unwrap();
    let text = write_vtk(&r.model, &r.solution.u_full, "tiny\nsheet");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "tiny sheet");
    let live = r.model.live_strut_count();
    assert_eq!(live, r.model.struts.len() - 1);
    assert!(lines.contains(&format!("POINTS {} double", r.model.nodes.len()).as_str()));
    assert!(lines.contains(&format!("CELLS {live} {}", 3 * live).as_str()));
    assert!(lines.contains(&format!("CELL_TYPES {live}").as_str()));
}

#[test]
fn curve_of_a_static_case_is_header_only() {
    let text = curve_csv(None).unwrap();
    assert_eq!(text, format!("{}\n", CURVE_HEADER.join(",")));
}

#[test]
fn config_survives_a_toml_round_trip() {
    for name in presets::list() {
        let cfg = presets::load(name).unwrap();
        let again = CaseConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}

#[test]
fn repeated_runs_write_identical_files() {
    let mut cfg = presets::load("tri-tension-fs-24").unwrap();
    cfg.scheme = "nas".parse().unwrap();
    let spec = OutputSpec {
        vtk: true,
        ..Default::default()
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let written: Vec<_> = dirs
        .iter()
        .map(|d| export_outputs(&run_case(&cfg).unwrap(), d.path(), &spec).unwrap())
        .collect();
    assert_eq!(written[0].len(), written[1].len());
    assert!(written[0].len() >= 4);
    for (a, b) in written[0].iter().zip(&written[1]) {
        assert_eq!(a.file_name(), b.file_name());
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap(), "{}", a.display());
    }
}
