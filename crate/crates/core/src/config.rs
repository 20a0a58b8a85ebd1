//! Scenario configuration files (TOML) and their validation.
//!
//! A configuration names a mesh (a built-in scenario generator or a mesh
//! file), the material of every domain tag, boundary conditions by node-set
//! name, the load schedule and the outputs. Every key can be overridden from
//! the command line with a dotted path, e.g. `materials.M0.gamma=1e-6`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, BoundaryConditions, MaterialTable, Prescribed, Problem};
use crate::element::ElementMaterial;
use crate::error::ConfigError;
use crate::material::{DerivativeProvider, Regularization, SolidParams, ThirdMediumParams};
use crate::mesh::{
    build_actuator, build_box_self_contact, build_pneumatic_box, build_punch, load_mesh, ActuatorSpec,
    BoxSelfContactSpec, DomainTag, Mesh, MeshFormat, PneumaticBoxSpec, PunchSpec,
};
use crate::post::{GapProbe, ProbePoint};
use crate::solver::{NewtonSettings, Solver};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    BoxSelfContact(BoxSelfContactSpec),
    PneumaticBox(PneumaticBoxSpec),
    Punch(PunchSpec),
    Actuator(ActuatorSpec),
    /// Mesh file; a relative path is resolved against the config file.
    Mesh {
        path: PathBuf,
        #[serde(default)]
        format: MeshFormat,
    },
}

impl Scenario {
    pub fn build_mesh(&self, base_dir: &Path) -> Result<Mesh, ConfigError> {
        Ok(match self {
            Scenario::BoxSelfContact(s) => build_box_self_contact(s)?,
            Scenario::PneumaticBox(s) => build_pneumatic_box(s)?,
            Scenario::Punch(s) => build_punch(s)?,
            Scenario::Actuator(s) => build_actuator(s)?,
            Scenario::Mesh { path, format } => load_mesh(base_dir.join(path), *format)?,
        })
    }
}

/// Parameters of one domain tag. Third-medium tags (`M<id>`) need `gamma`
/// and `alpha_r`; solid tags (`S<id>`) take only the moduli.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub bulk: f64,
    pub shear: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub alpha_r: Option<f64>,
    #[serde(default)]
    pub pbar: f64,
    #[serde(default)]
    pub reg_kind: Regularization,
    /// Load group ramping `pbar`; the default ramp when absent.
    #[serde(default)]
    pub pressure_group: Option<String>,
}

impl MaterialConfig {
    fn to_material(&self, tag: DomainTag) -> Result<ElementMaterial, String> {
        match tag {
            DomainTag::SolidBody(_) => {
                if self.gamma.is_some() || self.alpha_r.is_some() || self.pbar != 0.0 || self.pressure_group.is_some() {
                    return Err(format!("solid domain {tag} takes only `bulk` and `shear`"));
                }
                let p = SolidParams {
                    bulk: self.bulk,
                    shear: self.shear,
                };
                p.validate().map_err(|e| format!("{tag}: {e}"))?;
                Ok(ElementMaterial::Solid(p))
            }
            DomainTag::ThirdMedium(_) => {
                let (Some(gamma), Some(alpha_r)) = (self.gamma, self.alpha_r) else {
                    return Err(format!("third-medium domain {tag} needs `gamma` and `alpha_r`"));
                };
                let p = ThirdMediumParams {
                    bulk: self.bulk,
                    shear: self.shear,
                    gamma,
                    alpha_r,
                    pbar: self.pbar,
                    reg_kind: self.reg_kind,
                };
                p.validate().map_err(|e| format!("{tag}: {e}"))?;
                Ok(ElementMaterial::ThirdMedium(p))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub n_steps: usize,
    /// Gauss points per axis.
    pub quadrature: usize,
    pub provider: DerivativeProvider,
    pub newton: NewtonSettings,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_steps: 50,
            quadrature: 3,
            provider: DerivativeProvider::Analytic,
            newton: NewtonSettings::default(),
        }
    }
}

/// A probe location: a reference point, or the first node of a node set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbeRef {
    Point([f64; 3]),
    NodeSet(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    pub a: ProbeRef,
    pub b: ProbeRef,
}

/// Displacement of a material point, reported at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackConfig {
    pub name: String,
    pub at: ProbeRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub write_vtk: bool,
    /// Write a VTK file every this many accepted steps; 0 writes only the
    /// reference and final states.
    pub vtk_every: usize,
    pub gap: Option<GapConfig>,
    pub track: Vec<TrackConfig>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("output"),
            write_vtk: true,
            vtk_every: 0,
            gap: None,
            track: Vec::new(),
        }
    }
}

/// Parameter grid for the regularization study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Config {
    /// Third-medium tag whose parameters are varied.
    #[serde(default = "default_medium")]
    pub medium: String,
    pub alpha_r: Vec<f64>,
    pub gamma: Vec<f64>,
}

fn default_medium() -> String {
    "M0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub title: String,
    pub scenario: Scenario,
    pub materials: BTreeMap<String, MaterialConfig>,
    #[serde(default)]
    pub bcs: BoundaryConditions,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub table1: Option<Table1Config>,
}

/// Configurations shipped with the library, addressable by name.
pub const BUILTIN: [(&str, &str); 6] = [
    ("box_self_contact", include_str!("../../../configs/box_self_contact.toml")),
    ("pneumatic_box", include_str!("../../../configs/pneumatic_box.toml")),
    ("pneumatic_box_inflation", include_str!("../../../configs/pneumatic_box_inflation.toml")),
    ("rotating_box", include_str!("../../../configs/rotating_box.toml")),
    ("punch", include_str!("../../../configs/punch.toml")),
    ("actuator", include_str!("../../../configs/actuator.toml")),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Applies `key.path=value` to a parsed TOML document. The value is read as
/// a TOML value when possible and as a bare string otherwise. Numeric path
/// segments index arrays.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let bad = || ConfigError::BadOverride(assignment.to_string());
    let (key, raw) = assignment.split_once('=').ok_or_else(bad)?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(bad());
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let mut root = toml::Value::Table(std::mem::take(doc));
    let result = set_path(&mut root, &path, value);
    if let toml::Value::Table(t) = root {
        *doc = t;
    }
    result.ok_or_else(bad)
}

fn set_path(node: &mut toml::Value, path: &[&str], value: toml::Value) -> Option<()> {
    let (seg, rest) = path.split_first()?;
    let child = match node {
        toml::Value::Table(t) if rest.is_empty() => {
            t.insert(seg.to_string(), value);
            return Some(());
        }
        toml::Value::Table(t) => t.entry(seg.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new())),
        toml::Value::Array(items) => items.get_mut(seg.parse::<usize>().ok()?)?,
        _ => return None,
    };
    if rest.is_empty() {
        *child = value;
        return Some(());
    }
    set_path(child, rest, value)
}

impl ScenarioConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        doc.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    /// Reads a config file, or a built-in config when `source` is not an
    /// existing path. Returns the config and the directory that relative
    /// paths inside it refer to.
    pub fn load(source: &str, overrides: &[String]) -> Result<(Self, PathBuf), ConfigError> {
        let path = Path::new(source);
        if !path.exists() {
            if let Some(text) = builtin(source) {
                return Ok((Self::from_toml(text, overrides)?, PathBuf::from(".")));
            }
        }
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_toml(&text, overrides)?, base))
    }

    /// Builds the mesh and checks every reference in the config against it.
    /// Nothing is written to disk.
    pub fn prepare(&self, base_dir: &Path) -> Result<PreparedRun, ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        let mesh = self.scenario.build_mesh(base_dir)?;

        if self.solver.n_steps == 0 {
            return Err(invalid("solver.n_steps must be at least 1".into()));
        }
        if !(2..=4).contains(&self.solver.quadrature) {
            return Err(invalid(format!("solver.quadrature must be 2, 3 or 4 (got {})", self.solver.quadrature)));
        }
        self.solver.newton.validate().map_err(|e| invalid(format!("solver.newton: {e}")))?;

        let mut table = MaterialTable::default();
        for (key, m) in &self.materials {
            let tag: DomainTag = key.parse().map_err(invalid)?;
            if !mesh.elements.iter().any(|e| e.tag == tag) {
                return Err(invalid(format!("material given for domain {tag}, which the mesh does not contain")));
            }
            table.by_tag.insert(tag, m.to_material(tag).map_err(invalid)?);
            if let Some(g) = &m.pressure_group {
                table.pressure_groups.insert(tag, g.clone());
            }
        }
        if let Some(e) = mesh.elements.iter().find(|e| !table.by_tag.contains_key(&e.tag)) {
            return Err(invalid(format!("no material for domain {}", e.tag)));
        }

        let known_group = |g: &Option<String>| g.as_ref().map_or(true, |g| self.bcs.groups.contains_key(g));
        for bc in &self.bcs.dirichlet {
            mesh.node_set(bc.prescribed.node_set())?;
            if let Prescribed::Component { component, .. } = bc.prescribed {
                if component > 2 {
                    return Err(invalid(format!("component {component} out of range (0, 1 or 2)")));
                }
            }
            if !known_group(&bc.group) {
                return Err(invalid(format!("unknown load group `{}`", bc.group.as_deref().unwrap_or(""))));
            }
        }
        for t in &self.bcs.tractions {
            mesh.side_set(&t.side_set)?;
            if !known_group(&t.group) {
                return Err(invalid(format!("unknown load group `{}`", t.group.as_deref().unwrap_or(""))));
            }
        }
        for g in table.pressure_groups.values() {
            if !self.bcs.groups.contains_key(g) {
                return Err(invalid(format!("unknown load group `{g}`")));
            }
        }
        if let Some(t) = &self.table1 {
            let m = self.materials.get(&t.medium).ok_or_else(|| invalid(format!("table1.medium `{}` has no material", t.medium)))?;
            if m.gamma.is_none() {
                return Err(invalid(format!("table1.medium `{}` is not a third medium", t.medium)));
            }
            if t.alpha_r.is_empty() || t.gamma.is_empty() {
                return Err(invalid("table1 needs at least one alpha_r and one gamma".into()));
            }
        }

        let resolve = |p: &ProbeRef| -> Result<ProbePoint, ConfigError> {
            match p {
                ProbeRef::NodeSet(name) => {
                    let nodes = mesh.node_set(name)?;
                    nodes
                        .first()
                        .map(|&n| ProbePoint::Node(n))
                        .ok_or_else(|| invalid(format!("node set `{name}` is empty")))
                }
                ProbeRef::Point(x) => ProbePoint::locate(&mesh, *x).map_err(|e| invalid(e.to_string())),
            }
        };
        let gap = match &self.outputs.gap {
            Some(g) => Some(GapProbe {
                a: resolve(&g.a)?,
                b: resolve(&g.b)?,
            }),
            None => None,
        };
        let tracks = self
            .outputs
            .track
            .iter()
            .map(|t| Ok((t.name.clone(), resolve(&t.at)?)))
            .collect::<Result<Vec<_>, ConfigError>>()?;

        let problem = Problem {
            mesh,
            materials: table,
            bcs: self.bcs.clone(),
            provider: self.solver.provider,
            quadrature: self.solver.quadrature,
        };
        let assembler = Assembler::new(problem).map_err(|e| invalid(e.to_string()))?;
        let solver = Solver::new(assembler, self.solver.newton).map_err(|e| invalid(e.to_string()))?;
        Ok(PreparedRun { solver, gap, tracks })
    }
}

/// A validated configuration ready to solve.
pub struct PreparedRun {
    pub solver: Solver,
    pub gap: Option<GapProbe>,
    pub tracks: Vec<(String, ProbePoint)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_validate() {
        for (name, text) in BUILTIN {
            let cfg = ScenarioConfig::from_toml(text, &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.prepare(Path::new(".")).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let cfg = ScenarioConfig::from_toml(
            builtin("box_self_contact").unwrap(),
            &[
                "materials.M0.gamma = 1e-6".into(),
                "solver.n_steps=7".into(),
                "bcs.dirichlet.0.value=-0.5".into(),
                "outputs.directory=somewhere/else".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.materials["M0"].gamma, Some(1e-6));
        assert_eq!(cfg.solver.n_steps, 7);
        assert!(matches!(cfg.bcs.dirichlet[0].prescribed, Prescribed::Component { value, .. } if value == -0.5));
        assert_eq!(cfg.outputs.directory, PathBuf::from("somewhere/else"));
    }

    #[test]
    fn malformed_override_is_rejected() {
        let r = ScenarioConfig::from_toml(builtin("box_self_contact").unwrap(), &["no_equals_sign".into()]);
        assert!(matches!(r, Err(ConfigError::BadOverride(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r = ScenarioConfig::from_toml(builtin("box_self_contact").unwrap(), &["solver.n_stpes=3".into()]);
        assert!(matches!(r, Err(ConfigError::Parse(_))));
    }

    #[test]
    fn missing_node_set_is_a_config_error() {
        let cfg = ScenarioConfig::from_toml(
            builtin("box_self_contact").unwrap(),
            &["bcs.dirichlet.0.node_set=nowhere".into()],
        )
        .unwrap();
        let err = cfg.prepare(Path::new(".")).err().unwrap();
        assert!(err.to_string().contains("nowhere"), "{err}");
    }

    #[test]
    fn solid_material_rejects_medium_parameters() {
        let cfg = ScenarioConfig::from_toml(builtin("box_self_contact").unwrap(), &["materials.S0.gamma=1e-3".into()]).unwrap();
        assert!(matches!(cfg.prepare(Path::new(".")), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig::from_toml(builtin("pneumatic_box").unwrap(), &[]).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_toml(&text, &[]).unwrap(), cfg);
    }
}
