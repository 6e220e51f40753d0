//! Scenario configuration: a JSON document describing mesh, boundaries,
//! law, data fields (as expressions or CSV paths), time grid and solver
//! knobs, validated and lowered into a runnable scenario.

use crate::energy::{Coercivity, EnergyLaw, LawFamily, SpatialParams, TabulatedLaw};
use crate::error::Error;
use crate::evolution::{Scenario, TimeTable};
use crate::expr::Expr;
use crate::grid::{
    BoundaryData, BoundaryPartition, Mesh, ScalarField, Side, SourceData, VectorField,
};
use crate::step::SolverConfig;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

/// A JSON value that is either a number or an expression in x, y.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Number(f64),
    Expression(String),
}

impl FieldSpec {
    fn expr(&self) -> Result<Expr, Error> {
        match self {
            FieldSpec::Number(v) => Ok(Expr::Number(*v)),
            FieldSpec::Expression(s) => Expr::parse(s),
        }
    }

    fn nodal(&self, mesh: &Mesh) -> Result<ScalarField, Error> {
        let e = self.expr()?;
        Ok(ScalarField::from_fn(mesh, |p| e.eval(p)))
    }

}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub dimension: usize,
    /// 1-D: [a, b]; 2-D: [[x0, x1], [y0, y1]].
    pub bounds: serde_json::Value,
    /// 1-D: cells; 2-D: [nx, ny].
    pub resolution: serde_json::Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, FieldSpec>,
    #[serde(default)]
    pub table: Option<TabulatedConfig>,
    #[serde(default)]
    pub coercivity: Option<CoercivityConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoercivityConfig {
    #[serde(rename = "C")]
    pub big_c: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntryConfig {
    pub t: f64,
    #[serde(default)]
    pub f0: Option<[FieldSpec; 2]>,
    #[serde(default)]
    pub fbar: Option<[Vec<FieldSpec>; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftEntryConfig {
    pub t: f64,
    pub v: [Vec<FieldSpec>; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryDataConfig {
    #[serde(default)]
    pub g: Option<[FieldSpec; 2]>,
    #[serde(default)]
    pub pi: Option<[FieldSpec; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub tau: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub gap_tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub over_relaxation: Option<f64>,
    #[serde(default)]
    pub power_iterations: Option<usize>,
    #[serde(default)]
    pub check_interval: Option<usize>,
    #[serde(default)]
    pub feasibility_tol: Option<f64>,
    #[serde(default)]
    pub step_sizes: Option<(f64, f64)>,
}

impl SolverSection {
    pub fn build(&self) -> Result<SolverConfig, Error> {
        let mut config = SolverConfig::default();
        if let Some(v) = self.gap_tol {
            if !(v > 0.0) {
                return Err(Error::Config(format!("solver.gap_tol must be positive, got {v}")));
            }
            config.gap_tolerance = v;
        }
        if let Some(v) = self.max_iter {
            config.max_iterations = v;
        }
        if let Some(v) = self.over_relaxation {
            config.over_relaxation = v;
        }
        if let Some(v) = self.power_iterations {
            config.power_iterations = v;
        }
        if let Some(v) = self.check_interval {
            if v == 0 {
                return Err(Error::Config("solver.check_interval must be >= 1".into()));
            }
            config.check_interval = v;
        }
        if let Some(v) = self.feasibility_tol {
            if !(v > 0.0) {
                return Err(Error::Config("solver.feasibility_tol must be positive".into()));
            }
            config.feasibility_tolerance = v;
        }
        config.step_sizes = self.step_sizes;
        Ok(config)
    }
}

/// Initial data: per-species expression or a CSV file reference.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    Expressions([FieldSpec; 2]),
    Csv { csv: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mesh: MeshConfig,
    pub boundaries: BTreeMap<String, BTreeMap<String, String>>,
    pub law: LawConfig,
    pub sigma: [FieldSpec; 2],
    pub initial: InitialConfig,
    #[serde(default)]
    pub drift: Option<serde_json::Value>,
    #[serde(default)]
    pub source: Option<serde_json::Value>,
    #[serde(default)]
    pub boundary_data: Option<BoundaryDataConfig>,
    pub time: TimeConfig,
    #[serde(default)]
    pub weights: Option<[f64; 2]>,
    #[serde(default)]
    pub solver: Option<SolverSection>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

pub struct LoadedScenario {
    pub scenario: Scenario,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_str(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self, base_dir: &Path) -> Result<LoadedScenario, Error> {
        let mesh = build_mesh(&self.mesh)?;
        let partition = build_partition(&mesh, &self.boundaries)?;
        let law = build_law(&mesh, &self.law)?;
        let sigma = [self.sigma[0].nodal(&mesh)?, self.sigma[1].nodal(&mesh)?];
        let rho0 = match &self.initial {
            InitialConfig::Expressions(specs) => {
                [specs[0].nodal(&mesh)?, specs[1].nodal(&mesh)?]
            }
            InitialConfig::Csv { csv } => {
                let path = base_dir.join(csv);
                let (_, fields) = crate::csvio::read_field_pair(&path)?;
                if fields[0].len() != mesh.n_nodes() {
                    return Err(Error::Config(format!(
                        "initial csv {} has {} rows, mesh has {} nodes",
                        path.display(),
                        fields[0].len(),
                        mesh.n_nodes()
                    )));
                }
                [ScalarField(fields[0].clone()), ScalarField(fields[1].clone())]
            }
        };
        let drift = build_drift(&mesh, self.drift.as_ref())?;
        let source = build_source(&mesh, self.source.as_ref())?;
        let boundary = build_boundary(&mesh, &partition, self.boundary_data.as_ref())?;
        let solver = match &self.solver {
            Some(section) => section.build()?,
            None => SolverConfig::default(),
        };
        let scenario = Scenario {
            mesh,
            partition,
            law,
            sigma,
            rho0,
            drift,
            source,
            boundary,
            tau: self.time.tau,
            horizon: self.time.horizon,
            alpha: self.weights,
            snapshot_stride: self.time.snapshot_stride,
        };
        scenario.validate()?;
        Ok(LoadedScenario { scenario, solver, seed: self.seed })
    }
}

fn build_mesh(config: &MeshConfig) -> Result<Mesh, Error> {
    match config.dimension {
        1 => {
            let bounds: [f64; 2] = serde_json::from_value(config.bounds.clone())
                .map_err(|e| Error::Config(format!("mesh.bounds: {e}")))?;
            let cells: usize = serde_json::from_value(config.resolution.clone())
                .map_err(|e| Error::Config(format!("mesh.resolution: {e}")))?;
            Mesh::interval(bounds[0], bounds[1], cells)
        }
        2 => {
            let bounds: [[f64; 2]; 2] = serde_json::from_value(config.bounds.clone())
                .map_err(|e| Error::Config(format!("mesh.bounds: {e}")))?;
            let res: [usize; 2] = serde_json::from_value(config.resolution.clone())
                .map_err(|e| Error::Config(format!("mesh.resolution: {e}")))?;
            Mesh::rectangle(
                ((bounds[0][0], bounds[0][1]), (bounds[1][0], bounds[1][1])),
                res[0],
                res[1],
            )
        }
        d => Err(Error::Config(format!("mesh.dimension must be 1 or 2, got {d}"))),
    }
}

fn parse_side(name: &str) -> Result<Side, Error> {
    match name {
        "left" => Ok(Side::Left),
        "right" => Ok(Side::Right),
        "top" => Ok(Side::Top),
        "bottom" => Ok(Side::Bottom),
        other => Err(Error::Config(format!("unknown boundary side '{other}'"))),
    }
}

fn build_partition(
    mesh: &Mesh,
    boundaries: &BTreeMap<String, BTreeMap<String, String>>,
) -> Result<BoundaryPartition, Error> {
    let mut dirichlet: [Vec<Side>; 2] = [Vec::new(), Vec::new()];
    for (species, sides) in boundaries {
        let k = match species.as_str() {
            "species1" => 0,
            "species2" => 1,
            other => {
                return Err(Error::Config(format!(
                    "boundaries keys must be species1/species2, got '{other}'"
                )))
            }
        };
        for (side, kind) in sides {
            let side = parse_side(side)?;
            match kind.as_str() {
                "dirichlet" => dirichlet[k].push(side),
                "neumann" => {}
                other => {
                    return Err(Error::Config(format!(
                        "boundary kind must be dirichlet or neumann, got '{other}'"
                    )))
                }
            }
        }
    }
    BoundaryPartition::from_sides(mesh, [&dirichlet[0], &dirichlet[1]])
}

fn param_scalar_or_field(
    mesh: &Mesh,
    params: &BTreeMap<String, FieldSpec>,
    key: &str,
    default: Option<f64>,
) -> Result<(f64, Option<Vec<f64>>), Error> {
    match params.get(key) {
        None => match default {
            Some(v) => Ok((v, None)),
            None => Err(Error::Config(format!("law parameter '{key}' is required"))),
        },
        Some(FieldSpec::Number(v)) => Ok((*v, None)),
        Some(spec @ FieldSpec::Expression(_)) => {
            let field = spec.nodal(mesh)?;
            let first = field[0];
            let constant = field.0.iter().all(|&v| v == first);
            if constant {
                Ok((first, None))
            } else {
                Ok((first, Some(field.0)))
            }
        }
    }
}

fn build_law(mesh: &Mesh, config: &LawConfig) -> Result<EnergyLaw, Error> {
    let mut spatial = SpatialParams::default();
    let family = match config.family.as_str() {
        "porous_medium" => {
            let (m, field) = param_scalar_or_field(mesh, &config.params, "m", None)?;
            spatial.exponent = field;
            LawFamily::PorousMedium { exponent: m }
        }
        "crowd_motion" => {
            let (cap, field) = param_scalar_or_field(mesh, &config.params, "cap", None)?;
            spatial.capacity = field;
            LawFamily::CrowdMotion { capacity: cap }
        }
        "quadratic" => LawFamily::QuadraticShifted { weight: 0.5, threshold: 0.0 },
        "quadratic_shifted" => {
            let (c, cf) = param_scalar_or_field(mesh, &config.params, "c", None)?;
            let (m0, mf) = param_scalar_or_field(mesh, &config.params, "M", Some(0.0))?;
            spatial.weight = cf;
            spatial.threshold = mf;
            LawFamily::QuadraticShifted { weight: c, threshold: m0 }
        }
        "tabulated" => {
            let table = config.table.as_ref().ok_or_else(|| {
                Error::Config("tabulated law needs a 'table' object with r and beta arrays".into())
            })?;
            let mut law = build_tabulated(table)?;
            if let Some(c) = &config.coercivity {
                law.set_coercivity(Coercivity { big_c: c.big_c, big_m: c.big_m });
            }
            return Ok(law);
        }
        other => return Err(Error::Config(format!("unknown law family '{other}'"))),
    };
    let mut law = EnergyLaw::with_spatial(family, spatial)?;
    if let Some(c) = &config.coercivity {
        law.set_coercivity(Coercivity { big_c: c.big_c, big_m: c.big_m });
    }
    Ok(law)
}

/// Tabulated laws carry arrays, which ride alongside the family tag.
#[derive(Debug, Deserialize)]
pub struct TabulatedConfig {
    pub r: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub extend: bool,
}

pub fn build_tabulated(table: &TabulatedConfig) -> Result<EnergyLaw, Error> {
    let t = TabulatedLaw::new(table.r.clone(), table.beta.clone(), table.extend)?;
    EnergyLaw::new(LawFamily::Tabulated(t))
}

fn eval_vector(mesh: &Mesh, specs: &[FieldSpec]) -> Result<VectorField, Error> {
    if specs.is_empty() || specs.len() > 2 {
        return Err(Error::Config("vector fields need 1 or 2 component expressions".into()));
    }
    let ex = specs[0].expr()?;
    let ey = if specs.len() == 2 { Some(specs[1].expr()?) } else { None };
    Ok(VectorField::from_fn(mesh, |p| {
        [ex.eval(p), ey.as_ref().map(|e| e.eval(p)).unwrap_or(0.0)]
    }))
}

fn build_drift(
    mesh: &Mesh,
    config: Option<&serde_json::Value>,
) -> Result<TimeTable<[VectorField; 2]>, Error> {
    let zero = || [VectorField::zeros(mesh.n_elems()), VectorField::zeros(mesh.n_elems())];
    let Some(value) = config else {
        return Ok(TimeTable::constant(zero()));
    };
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct DriftConfig {
        #[serde(default)]
        constant: Option<[Vec<FieldSpec>; 2]>,
        #[serde(default)]
        table: Option<Vec<DriftEntryConfig>>,
    }
    let parsed: DriftConfig = serde_json::from_value(value.clone())
        .map_err(|e| Error::Config(format!("drift: {e}")))?;
    match (parsed.constant, parsed.table) {
        (Some(c), None) => Ok(TimeTable::constant([
            eval_vector(mesh, &c[0])?,
            eval_vector(mesh, &c[1])?,
        ])),
        (None, Some(entries)) => {
            let mut rows = Vec::new();
            for entry in &entries {
                rows.push((
                    entry.t,
                    [eval_vector(mesh, &entry.v[0])?, eval_vector(mesh, &entry.v[1])?],
                ));
            }
            TimeTable::new(rows)
        }
        (None, None) => Ok(TimeTable::constant(zero())),
        (Some(_), Some(_)) => {
            Err(Error::Config("drift: give either 'constant' or 'table', not both".into()))
        }
    }
}

fn build_source(
    mesh: &Mesh,
    config: Option<&serde_json::Value>,
) -> Result<TimeTable<SourceData>, Error> {
    let Some(value) = config else {
        return Ok(TimeTable::constant(SourceData::zeros(mesh)));
    };
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct SourceConfig {
        #[serde(default)]
        constant: Option<SourceEntryFields>,
        #[serde(default)]
        table: Option<Vec<SourceEntryConfig>>,
    }
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct SourceEntryFields {
        #[serde(default)]
        f0: Option<[FieldSpec; 2]>,
        #[serde(default)]
        fbar: Option<[Vec<FieldSpec>; 2]>,
    }
    let parsed: SourceConfig = serde_json::from_value(value.clone())
        .map_err(|e| Error::Config(format!("source: {e}")))?;
    let assemble = |f0: &Option<[FieldSpec; 2]>,
                    fbar: &Option<[Vec<FieldSpec>; 2]>|
     -> Result<SourceData, Error> {
        let mut data = SourceData::zeros(mesh);
        if let Some(f0) = f0 {
            data.f0 = [f0[0].nodal(mesh)?, f0[1].nodal(mesh)?];
        }
        if let Some(fbar) = fbar {
            data.fbar = [eval_vector(mesh, &fbar[0])?, eval_vector(mesh, &fbar[1])?];
        }
        Ok(data)
    };
    match (parsed.constant, parsed.table) {
        (Some(c), None) => Ok(TimeTable::constant(assemble(&c.f0, &c.fbar)?)),
        (None, Some(entries)) => {
            let mut rows = Vec::new();
            for entry in &entries {
                rows.push((entry.t, assemble(&entry.f0, &entry.fbar)?));
            }
            TimeTable::new(rows)
        }
        (None, None) => Ok(TimeTable::constant(SourceData::zeros(mesh))),
        (Some(_), Some(_)) => {
            Err(Error::Config("source: give either 'constant' or 'table', not both".into()))
        }
    }
}

fn build_boundary(
    mesh: &Mesh,
    partition: &BoundaryPartition,
    config: Option<&BoundaryDataConfig>,
) -> Result<BoundaryData, Error> {
    let mut data = BoundaryData::zeros(mesh);
    let Some(config) = config else {
        return Ok(data);
    };
    if let Some(g) = &config.g {
        for k in 0..2 {
            let e = g[k].expr()?;
            for i in 0..mesh.n_nodes() {
                if partition.is_dirichlet_node(k, i) {
                    data.g[k][i] = e.eval(mesh.node(i));
                }
            }
        }
    }
    if let Some(pi) = &config.pi {
        for k in 0..2 {
            let e = pi[k].expr()?;
            for &fi in partition.neumann_facets(k) {
                let f = &mesh.facets()[fi];
                let mut centroid = [0.0, 0.0];
                for &v in &f.nodes {
                    centroid[0] += mesh.node(v)[0];
                    centroid[1] += mesh.node(v)[1];
                }
                centroid[0] /= f.nodes.len() as f64;
                centroid[1] /= f.nodes.len() as f64;
                data.pi[k][fi] = e.eval(centroid);
            }
        }
    }
    Ok(data)
}

/// Parse only the mesh, boundaries and sigma sections of a config document
/// (extra sections are ignored); used by field-level commands.
pub fn load_spatial_context(
    text: &str,
) -> Result<(Mesh, BoundaryPartition, [ScalarField; 2]), Error> {
    #[derive(Deserialize)]
    struct Spatial {
        mesh: MeshConfig,
        boundaries: BTreeMap<String, BTreeMap<String, String>>,
        sigma: [FieldSpec; 2],
    }
    let parsed: Spatial =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mesh = build_mesh(&parsed.mesh)?;
    let partition = build_partition(&mesh, &parsed.boundaries)?;
    let sigma = [parsed.sigma[0].nodal(&mesh)?, parsed.sigma[1].nodal(&mesh)?];
    Ok((mesh, partition, sigma))
}

/// Build a law from a config document: either a bare law object or a full
/// config with a "law" section.
pub fn load_law(text: &str) -> Result<EnergyLaw, Error> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let law_value = value.get("law").cloned().unwrap_or(value);
    let config: LawConfig =
        serde_json::from_value(law_value).map_err(|e| Error::Config(format!("law: {e}")))?;
    let sample_mesh = Mesh::interval(0.0, 1.0, 2)?;
    build_law(&sample_mesh, &config)
}

/// Configuration of one standalone resolvent problem.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepFileConfig {
    pub mesh: MeshConfig,
    pub boundaries: BTreeMap<String, BTreeMap<String, String>>,
    pub law: LawConfig,
    pub sigma: [FieldSpec; 2],
    pub mu: [FieldSpec; 2],
    #[serde(default)]
    pub chi: Option<[Vec<FieldSpec>; 2]>,
    #[serde(default)]
    pub boundary_data: Option<BoundaryDataConfig>,
    #[serde(default)]
    pub solver: Option<SolverSection>,
}

pub struct LoadedStep {
    pub mesh: Mesh,
    pub partition: BoundaryPartition,
    pub law: EnergyLaw,
    pub sigma: [ScalarField; 2],
    pub mu: [ScalarField; 2],
    pub chi: [VectorField; 2],
    pub boundary: BoundaryData,
    pub solver: SolverConfig,
}

impl StepFileConfig {
    pub fn from_path(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn build(&self) -> Result<LoadedStep, Error> {
        let mesh = build_mesh(&self.mesh)?;
        let partition = build_partition(&mesh, &self.boundaries)?;
        let law = build_law(&mesh, &self.law)?;
        let sigma = [self.sigma[0].nodal(&mesh)?, self.sigma[1].nodal(&mesh)?];
        let mu = [self.mu[0].nodal(&mesh)?, self.mu[1].nodal(&mesh)?];
        let chi = match &self.chi {
            Some(c) => [eval_vector(&mesh, &c[0])?, eval_vector(&mesh, &c[1])?],
            None => [VectorField::zeros(mesh.n_elems()), VectorField::zeros(mesh.n_elems())],
        };
        let boundary = build_boundary(&mesh, &partition, self.boundary_data.as_ref())?;
        let solver = match &self.solver {
            Some(section) => section.build()?,
            None => SolverConfig::default(),
        };
        Ok(LoadedStep { mesh, partition, law, sigma, mu, chi, boundary, solver })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"{
        "mesh": {"dimension": 1, "bounds": [0.0, 1.0], "resolution": 16},
        "boundaries": {
            "species1": {"left": "dirichlet", "right": "neumann"},
            "species2": {"left": "dirichlet", "right": "neumann"}
        },
        "law": {"family": "quadratic"},
        "sigma": [1.0, 1.0],
        "initial": ["max(1 - (4*(x - 0.5))^2, 0)", "0.25"],
        "time": {"tau": 0.01, "T": 0.05},
        "solver": {"gap_tol": 1e-9}
    }"#;

    #[test]
    fn demo_config_builds_and_runs() {
        let config = ScenarioConfig::from_str(DEMO).unwrap();
        let loaded = config.build(Path::new(".")).unwrap();
        assert_eq!(loaded.scenario.mesh.n_nodes(), 17);
        assert_eq!(loaded.seed, 42);
        assert!((loaded.solver.gap_tolerance - 1e-9).abs() < 1e-24);
        let trajectory =
            crate::evolution::run(&loaded.scenario, &loaded.solver).unwrap();
        assert!(trajectory.completed);
        assert_eq!(trajectory.reports.len(), 5);
    }

    #[test]
    fn tau_exceeding_horizon_is_a_config_error() {
        let text = DEMO.replace("\"tau\": 0.01", "\"tau\": 0.2");
        let config = ScenarioConfig::from_str(&text).unwrap();
        match config.build(Path::new(".")) {
            Err(err) => {
                let message = err.to_string();
                assert!(message.contains("tau"), "{message}");
            }
            Ok(_) => panic!("oversized tau must be rejected"),
        }
    }

    #[test]
    fn negative_initial_density_is_rejected() {
        let text = DEMO.replace("\"0.25\"", "\"-0.25\"");
        let config = ScenarioConfig::from_str(&text).unwrap();
        assert!(config.build(Path::new(".")).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = DEMO.replace("\"seed\": 42", "").replace(
            "\"solver\": {\"gap_tol\": 1e-9}",
            "\"solver\": {\"gap_tol\": 1e-9}, \"extra\": 1",
        );
        assert!(ScenarioConfig::from_str(&text).is_err());
    }

    #[test]
    fn spatial_law_parameters_build_nodal_fields() {
        let text = DEMO.replace(
            "{\"family\": \"quadratic\"}",
            "{\"family\": \"porous_medium\", \"params\": {\"m\": \"1 + x\"}}",
        );
        let config = ScenarioConfig::from_str(&text).unwrap();
        let loaded = config.build(Path::new(".")).unwrap();
        // at x = 1 the exponent is 2
        let p = loaded.scenario.law.at(16);
        assert!((p.beta(2.0) - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn drift_and_source_tables_lower_correctly() {
        let text = DEMO.replace(
            "\"time\":",
            r#""drift": {"constant": [["-1"], ["0"]]},
            "source": {"table": [
                {"t": 0.0, "f0": ["1", "0"]},
                {"t": 0.02, "f0": ["0", "0"]}
            ]},
            "time":"#,
        );
        let config = ScenarioConfig::from_str(&text).unwrap();
        let loaded = config.build(Path::new(".")).unwrap();
        assert!(!loaded.scenario.is_drift_free());
        assert!(!loaded.scenario.source.is_constant());
        // the second slab (0.01, 0.02] still averages the first table entry
        let avg = loaded.scenario.source.slab_weights(0.01, 0.02);
        assert_eq!(avg.len(), 1);
    }

    #[test]
    fn two_dimensional_mesh_config() {
        let text = DEMO
            .replace(
                "{\"dimension\": 1, \"bounds\": [0.0, 1.0], \"resolution\": 16}",
                "{\"dimension\": 2, \"bounds\": [[0.0, 1.0], [0.0, 1.0]], \"resolution\": [4, 4]}",
            )
            .replace("max(1 - (4*(x - 0.5))^2, 0)", "max(1 - 4*((x-0.5)^2 + (y-0.5)^2), 0)");
        let config = ScenarioConfig::from_str(&text).unwrap();
        let loaded = config.build(Path::new(".")).unwrap();
        assert_eq!(loaded.scenario.mesh.n_nodes(), 25);
        assert_eq!(loaded.scenario.mesh.dim(), 2);
    }
}
