//! Case configuration (TOML).
//!
//! Lengths in `near` selectors and notches are in units of the lattice spacing
//! l0; full-resolution blocks are grid-line indices; element sizes are in
//! lattice pitches along each axis; prescribed displacements are in mm.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::geometry::Axis;
use crate::lattice::{Bracing, Material, RowOrientation};
use crate::mesh::MeshSpec;
use crate::sampling::{PsnSelection, Scheme};
use crate::solver::SolverOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub lattice: LatticeSpec,
    /// Absent: the case is solved at full resolution only.
    #[serde(default)]
    pub mesh: Option<MeshSpec>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub psn_selection: PsnSelection,
    #[serde(default)]
    pub boundary: Vec<BoundarySpec>,
    #[serde(default)]
    pub loads: Vec<PointLoad>,
    #[serde(default)]
    pub loading: Loading,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputSpec,
    /// Seed for randomized checks driven from a configuration.
    #[serde(default)]
    pub seed: u64,
}

fn default_scheme() -> Scheme {
    Scheme::Fs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeType {
    Square,
    Triangular,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    #[serde(rename = "type")]
    pub kind: LatticeType,
    /// Square: cells along x. Triangular: cells along a row.
    pub nx: usize,
    /// Square: cells along y. Triangular: number of rows.
    pub ny: usize,
    #[serde(default = "default_bracing")]
    pub bracing: Bracing,
    #[serde(default)]
    pub orientation: RowOrientation,
    #[serde(default)]
    pub material: Material,
    #[serde(default)]
    pub notch: Option<NotchSpec>,
}

fn default_bracing() -> Bracing {
    Bracing::XBraced
}

/// Rectangle in units of l0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotchSpec {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

/// Node selection: a named side of the bounding box, the node nearest a point,
/// or explicit ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Selector {
    pub set: Option<String>,
    pub near: Option<[f64; 2]>,
    pub nodes: Option<Vec<usize>>,
}

/// Dirichlet data `u = u0 + G r` (per prescribed axis) on the selected nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    /// `left`, `right`, `bottom`, `top`, `outer` or `all`.
    #[serde(default)]
    pub set: Option<String>,
    /// Point in units of l0.
    #[serde(default)]
    pub near: Option<[f64; 2]>,
    #[serde(default)]
    pub nodes: Option<Vec<usize>>,
    #[serde(default)]
    pub ux: Option<f64>,
    #[serde(default)]
    pub uy: Option<f64>,
    /// Displacement gradient `[[∂ux/∂x, ∂ux/∂y], [∂uy/∂x, ∂uy/∂y]]`, added
    /// to `ux`/`uy` (which default to 0 when a gradient is given).
    #[serde(default)]
    pub gradient: Option<[[f64; 2]; 2]>,
}

/// Point force on the selected nodes (N, per node).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLoad {
    /// `left`, `right`, `bottom`, `top`, `outer` or `all`.
    #[serde(default)]
    pub set: Option<String>,
    /// Point in units of l0.
    #[serde(default)]
    pub near: Option<[f64; 2]>,
    #[serde(default)]
    pub nodes: Option<Vec<usize>>,
    #[serde(default)]
    pub fx: f64,
    #[serde(default)]
    pub fy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Loading {
    /// One linear solve with the boundary data as given.
    #[default]
    Static,
    /// Displacement-controlled loading with strut failure.
    Fracture {
        #[serde(default)]
        set: Option<String>,
        #[serde(default)]
        near: Option<[f64; 2]>,
        #[serde(default)]
        nodes: Option<Vec<usize>>,
        axis: Axis,
        total: f64,
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default)]
        batch: bool,
    },
}

fn default_steps() -> usize {
    100
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// Full-resolution and full-sampling references; complete error split.
    #[default]
    Fr,
    /// Full-sampling reference only; sampling errors normalized by it.
    Fs,
    None,
}

impl std::str::FromStr for Reference {
    type Err = QcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fr" => Ok(Reference::Fr),
            "fs" => Ok(Reference::Fs),
            "none" => Ok(Reference::None),
            other => Err(QcError::Config(format!("unknown reference '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub fields: bool,
    pub curve: bool,
    pub summary: bool,
    pub vtk: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            fields: true,
            curve: true,
            summary: true,
            vtk: false,
        }
    }
}

impl CaseConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: CaseConfig =
            toml::from_str(text).map_err(|e| QcError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| QcError::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| QcError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| QcError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.material.validate()?;
        if self.lattice.nx == 0 || self.lattice.ny == 0 {
            return Err(QcError::Config("lattice dimensions must be positive".into()));
        }
        if let Some(mesh) = &self.mesh {
            if !(mesh.element_size > 0.0) {
                return Err(QcError::Config("mesh.element_size must be positive".into()));
            }
        }
        for b in &self.boundary {
            b.selector().validate()?;
            if b.ux.is_none() && b.uy.is_none() && b.gradient.is_none() {
                return Err(QcError::Config(
                    "boundary entry prescribes neither ux, uy nor gradient".into(),
                ));
            }
        }
        for l in &self.loads {
            l.selector().validate()?;
        }
        if let Loading::Fracture { steps, .. } = &self.loading {
            self.loading.selector().expect("fracture loading").validate()?;
            if *steps == 0 {
                return Err(QcError::Config("fracture loading needs steps >= 1".into()));
            }
        }
        if !(self.solver.tolerance > 0.0) || self.solver.regularization < 0.0 {
            return Err(QcError::Config("invalid solver options".into()));
        }
        Ok(())
    }
}

impl BoundarySpec {
    pub fn selector(&self) -> Selector {
        Selector {
            set: self.set.clone(),
            near: self.near,
            nodes: self.nodes.clone(),
        }
    }
}

impl PointLoad {
    pub fn selector(&self) -> Selector {
        Selector {
            set: self.set.clone(),
            near: self.near,
            nodes: self.nodes.clone(),
        }
    }
}

impl Loading {
    /// Selector of the loaded nodes of a fracture loading.
    pub fn selector(&self) -> Option<Selector> {
        match self {
            Loading::Static => None,
            Loading::Fracture { set, near, nodes, .. } => Some(Selector {
                set: set.clone(),
                near: *near,
                nodes: nodes.clone(),
            }),
        }
    }
}

impl Selector {
    pub(crate) fn validate(&self) -> Result<()> {
        let given = [self.set.is_some(), self.near.is_some(), self.nodes.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if given != 1 {
            return Err(QcError::Config(
                "a selector needs exactly one of 'set', 'near' or 'nodes'".into(),
            ));
        }
        if let Some(set) = &self.set {
            if !matches!(
                set.as_str(),
                "left" | "right" | "bottom" | "top" | "outer" | "all"
            ) {
                return Err(QcError::Config(format!("unknown node set '{set}'")));
            }
        }
        Ok(())
    }
}
