//! Pipeline behind the `mdp-plan` command: load a mesh, decompose it, grow
//! supports, validate and write the parts, supports, plan and report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use mdp_core::candidates::{generate_candidates, CandidateError, DofMode, SamplerConfig};
use mdp_core::manufacturability::{risk, SelfSupportParams};
use mdp_core::mesh::io::{load_mesh, load_path, stl_bytes, MeshFormat};
use mdp_core::search::{
    beam_search_with, greedy_constrained_with, greedy_unconstrained_with, invert_to_sequence, validate_plan,
    DecompositionPlan, PlanComponent, SearchConfig, SearchError, ThinPartFilter, Violation,
};
use mdp_core::support::{emit_cell_supports, progressive_projection, SupportConfig, SupportError, SupportTree};
use mdp_core::{HalfSpaceCell, MeshError, Plane, Side, TriMesh};
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

pub const PLAN_FILE: &str = "plan.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Greedy,
    GreedyConstrained,
    Beam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Text,
}

/// Nozzle diameter; it fixes the support sampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Nozzle {
    #[serde(rename = "0.4")]
    Fine,
    #[serde(rename = "0.8")]
    Coarse,
}

impl Nozzle {
    pub fn diameter(self) -> f64 {
        match self {
            Nozzle::Fine => 0.4,
            Nozzle::Coarse => 0.8,
        }
    }

    pub fn sample_interval(self) -> f64 {
        match self {
            Nozzle::Fine => 2.0,
            Nozzle::Coarse => 3.0,
        }
    }
}

/// Everything that shapes the result. Paths and the thread count are kept
/// out of `plan.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSettings {
    pub mode: Mode,
    pub beam_width: usize,
    pub w: u32,
    pub alpha_max_deg: f64,
    pub dof: u8,
    pub axis: Option<[f64; 3]>,
    pub max_tilt_deg: Option<f64>,
    pub normals: usize,
    pub offset_step: f64,
    pub delta0: f64,
    pub delta_mult: f64,
    pub nozzle: Nozzle,
    pub supports: bool,
    pub thin_filter: bool,
}

impl Default for PlanSettings {
    fn default() -> Self {
        let search = SearchConfig::default();
        Self {
            mode: Mode::Beam,
            beam_width: search.beam_width,
            w: search.volume_divisor,
            alpha_max_deg: search.self_support.alpha_max_deg,
            dof: 5,
            axis: None,
            max_tilt_deg: None,
            normals: search.sampler.normal_count,
            offset_step: search.sampler.offset_step,
            delta0: search.delta0,
            delta_mult: search.delta_mult,
            nozzle: Nozzle::Coarse,
            supports: true,
            thin_filter: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    pub settings: PlanSettings,
    pub threads: Option<usize>,
    pub report_format: ReportFormat,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            output_dir: output_dir.into(),
            settings: PlanSettings::default(),
            threads: None,
            report_format: ReportFormat::Json,
        }
    }
}

impl PlanSettings {
    pub fn dof_mode(&self) -> Result<DofMode, PipelineError> {
        match (self.dof, self.axis) {
            (5, _) => Ok(DofMode::FiveDof),
            (4, Some(a)) => Ok(DofMode::four_dof(Vector3::from(a))),
            (4, None) => Err(PipelineError::Config("--dof 4 needs --axis".into())),
            (d, _) => Err(PipelineError::Config(format!("dof must be 4 or 5, got {d}"))),
        }
    }

    pub fn search_config(&self, platform: Plane) -> Result<SearchConfig, PipelineError> {
        let defaults = SearchConfig::default();
        let sampler = SamplerConfig {
            normal_count: self.normals,
            offset_step: self.offset_step,
            dof: self.dof_mode()?,
            max_tilt_deg: self.max_tilt_deg,
        };
        let config = SearchConfig {
            mode: match self.mode {
                Mode::Greedy => mdp_core::search::SearchMode::GreedyUnconstrained,
                Mode::GreedyConstrained => mdp_core::search::SearchMode::GreedyConstrained,
                Mode::Beam => mdp_core::search::SearchMode::Beam,
            },
            beam_width: self.beam_width,
            volume_divisor: self.w,
            delta0: self.delta0,
            delta_mult: self.delta_mult,
            self_support: SelfSupportParams::new(self.alpha_max_deg),
            sampler,
            platform,
            thin_part_filter: self.thin_filter.then(|| ThinPartFilter::new(self.nozzle.diameter())),
            dedup: mdp_core::search::DedupRule {
                offset_mm: 2.0 * self.offset_step,
                ..defaults.dedup
            },
            contact_eps: defaults.contact_eps,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn support_config(&self) -> SupportConfig {
        SupportConfig {
            sample_interval: self.nozzle.sample_interval(),
            ..SupportConfig::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {source}")]
    Input { path: PathBuf, source: MeshError },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("plan failed validation: {0:?}")]
    Validation(Vec<Violation>),
    #[error("support generation failed: {0}")]
    Support(#[from] SupportError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error("malformed plan file: {0}")]
    PlanFile(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input { .. } | PipelineError::Config(_) => EXIT_INFEASIBLE,
            PipelineError::Search(SearchError::Config(_)) => EXIT_INFEASIBLE,
            _ => EXIT_INTERNAL,
        }
    }
}

/// Table-style summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub model: String,
    pub triangles: usize,
    pub dof: String,
    pub compute_time_s: f64,
    pub parts: usize,
    pub j_global_before: f64,
    pub j_global_after: f64,
    pub support_volume_before_mm3: Option<f64>,
    pub support_volume_after_mm3: Option<f64>,
}

impl PlanReport {
    pub fn to_text(&self) -> String {
        let vol = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        let mut s = String::new();
        let _ = writeln!(s, "model            {}", self.model);
        let _ = writeln!(s, "triangles        {}", self.triangles);
        let _ = writeln!(s, "dof              {}", self.dof);
        let _ = writeln!(s, "time (s)         {:.2}", self.compute_time_s);
        let _ = writeln!(s, "parts            {}", self.parts);
        let _ = writeln!(s, "J_G before/after {:.2} / {:.2}", self.j_global_before, self.j_global_after);
        let _ = writeln!(
            s,
            "support before/after (mm3) {} / {}",
            vol(self.support_volume_before_mm3),
            vol(self.support_volume_after_mm3)
        );
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneEntry {
    pub anchor: [f64; 3],
    pub normal: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceEntry {
    pub anchor: [f64; 3],
    pub normal: [f64; 3],
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEntry {
    pub index: usize,
    pub mesh_file: String,
    pub base_plane: PlaneEntry,
    pub direction: [f64; 3],
    pub risky_area_mm2: f64,
    pub cell: Vec<HalfSpaceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportsEntry {
    pub volume_mm3: f64,
    pub files: Vec<String>,
}

/// Contents of `plan.json`; field order is the key order on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub units: String,
    pub mode: Mode,
    pub config: PlanSettings,
    pub j_global: f64,
    pub components: Vec<ComponentEntry>,
    pub supports: SupportsEntry,
}

/// Rounds to nine significant digits.
pub fn sig9(x: f64) -> f64 {
    let r: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    r + 0.0
}

fn vec3(v: &Vector3<f64>) -> [f64; 3] {
    [sig9(v.x), sig9(v.y), sig9(v.z)]
}

fn point3(p: &Point3<f64>) -> [f64; 3] {
    [sig9(p.x), sig9(p.y), sig9(p.z)]
}

pub fn part_file(index: usize) -> String {
    format!("part_{index}.stl")
}

pub fn supports_file(index: usize) -> String {
    format!("supports_{index}.stl")
}

impl PlanFile {
    pub fn new(plan: &DecompositionPlan, settings: &PlanSettings, tree: Option<&SupportTree>) -> Self {
        let components = plan
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| ComponentEntry {
                index: i + 1,
                mesh_file: part_file(i + 1),
                base_plane: PlaneEntry {
                    anchor: point3(&c.base.anchor),
                    normal: vec3(&c.base.normal),
                },
                direction: vec3(&c.direction),
                risky_area_mm2: sig9(c.risky_area),
                cell: c
                    .cell
                    .halves
                    .iter()
                    .map(|(p, side)| HalfSpaceEntry {
                        anchor: point3(&p.anchor),
                        normal: vec3(&p.normal),
                        side: *side,
                    })
                    .collect(),
            })
            .collect();
        let files = tree.map_or_else(Vec::new, |t| {
            (0..plan.len())
                .filter(|&i| t.struts.iter().any(|s| s.cell == i))
                .map(|i| supports_file(i + 1))
                .collect()
        });
        PlanFile {
            units: "mm".into(),
            mode: settings.mode,
            config: settings.clone(),
            j_global: sig9(plan.j_global),
            components,
            supports: SupportsEntry {
                volume_mm3: sig9(tree.map_or(0.0, |t| t.volume())),
                files,
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }
}

/// Everything a run produces, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub plan: DecompositionPlan,
    pub supports: Option<SupportTree>,
    pub report: PlanReport,
    pub plan_file: PlanFile,
}

fn model_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
}

/// Runs the scheme given by `settings` on an already loaded mesh resting
/// on its lowest point.
pub fn plan_mesh(mesh: &TriMesh, settings: &PlanSettings) -> Result<(DecompositionPlan, SearchConfig), PipelineError> {
    let platform = Plane::horizontal(mesh.aabb().min.z);
    let config = settings.search_config(platform)?;
    let plan = match generate_candidates(mesh, &config.sampler) {
        Ok(set) => {
            info!("{} candidate planes", set.len());
            match settings.mode {
                Mode::Greedy => greedy_unconstrained_with(mesh, &config, &set),
                Mode::GreedyConstrained => greedy_constrained_with(mesh, &config, &set),
                Mode::Beam => beam_search_with(mesh, &config, &set).0,
            }
        }
        Err(CandidateError::NoCandidates) => {
            warn!("no candidate planes fit inside the model; printing it whole");
            invert_to_sequence(mesh, &[], &platform, &config.self_support)?
        }
        Err(e) => return Err(PipelineError::Config(e.to_string())),
    };
    Ok((plan, config))
}

/// Computes the plan, supports and report without writing anything.
pub fn compute(config: &RunConfig) -> Result<PipelineOutput, PipelineError> {
    let started = Instant::now();
    let mesh = load_path(&config.input).map_err(|source| PipelineError::Input {
        path: config.input.clone(),
        source,
    })?;
    info!("loaded {} triangles from {}", mesh.triangle_count(), config.input.display());
    let settings = &config.settings;
    let (plan, search) = plan_mesh(&mesh, settings)?;
    let params = &search.self_support;
    let report = validate_plan(&plan, &mesh, &search.platform, params);
    if !report.is_valid() {
        return Err(PipelineError::Validation(report.violations));
    }
    let (supports, before) = if settings.supports {
        let support_config = settings.support_config();
        let single = invert_to_sequence(&mesh, &[], &search.platform, params)?;
        let before = progressive_projection(&single, params, &support_config)?;
        let after = progressive_projection(&plan, params, &support_config)?;
        (Some(after), Some(before.volume()))
    } else {
        (None, None)
    };
    let j_before = risk(&mesh, &search.platform, params);
    let report = PlanReport {
        model: model_name(&config.input),
        triangles: mesh.triangle_count(),
        dof: format!("{}DOF", settings.dof),
        compute_time_s: started.elapsed().as_secs_f64(),
        parts: plan.len(),
        j_global_before: j_before,
        j_global_after: plan.j_global,
        support_volume_before_mm3: before,
        support_volume_after_mm3: supports.as_ref().map(|t| t.volume()),
    };
    let plan_file = PlanFile::new(&plan, settings, supports.as_ref());
    Ok(PipelineOutput {
        plan,
        supports,
        report,
        plan_file,
    })
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|source| PipelineError::Output { path, source })
}

/// Writes the parts, supports, `plan.json` and the report into `dir`.
pub fn emit(output: &PipelineOutput, dir: &Path, format: ReportFormat) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Output {
        path: dir.to_path_buf(),
        source,
    })?;
    for (i, c) in output.plan.components.iter().enumerate() {
        write(dir, &part_file(i + 1), &stl_bytes(&c.mesh))?;
    }
    if let Some(tree) = &output.supports {
        for i in 0..output.plan.len() {
            let mesh = emit_cell_supports(tree, i);
            if !mesh.is_empty() {
                write(dir, &supports_file(i + 1), &stl_bytes(&mesh))?;
            }
        }
    }
    write(dir, PLAN_FILE, output.plan_file.to_json().as_bytes())?;
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&output.report).expect("report serializes");
            s.push('\n');
            write(dir, "report.json", s.as_bytes())
        }
        ReportFormat::Text => write(dir, "report.txt", output.report.to_text().as_bytes()),
    }
}

/// Full run: compute, then emit. Nothing is written when computing fails.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutput, PipelineError> {
    let work = || {
        let out = compute(config)?;
        emit(&out, &config.output_dir, config.report_format)?;
        Ok(out)
    };
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Maps a run to a process exit code, printing the reason on failure.
pub fn exit_code(result: &Result<PipelineOutput, PipelineError>) -> i32 {
    match result {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn plane_from(anchor: [f64; 3], normal: [f64; 3]) -> Result<Plane, PipelineError> {
    Plane::new(Point3::from(anchor), Vector3::from(normal)).map_err(|e| PipelineError::PlanFile(e.to_string()))
}

/// Rebuilds a plan from `plan.json` and the part files next to it. Risky
/// areas are recomputed from the reloaded meshes.
pub fn load_plan(dir: &Path) -> Result<(PlanFile, DecompositionPlan), PipelineError> {
    let path = dir.join(PLAN_FILE);
    let text = fs::read_to_string(&path).map_err(|source| PipelineError::Output { path, source })?;
    let file: PlanFile = serde_json::from_str(&text).map_err(|e| PipelineError::PlanFile(e.to_string()))?;
    let params = SelfSupportParams::new(file.config.alpha_max_deg);
    let mut components = Vec::with_capacity(file.components.len());
    for c in &file.components {
        let path = dir.join(&c.mesh_file);
        let bytes = fs::read(&path).map_err(|source| PipelineError::Output { path: path.clone(), source })?;
        let mesh = load_mesh(&bytes, MeshFormat::StlBinary).map_err(|source| PipelineError::Input { path, source })?;
        let base = plane_from(c.base_plane.anchor, c.base_plane.normal)?;
        let mut cell = HalfSpaceCell::new();
        for h in &c.cell {
            cell = cell.with(plane_from(h.anchor, h.normal)?, h.side);
        }
        components.push(PlanComponent {
            risky_area: risk(&mesh, &base, &params),
            mesh,
            base,
            direction: plane_from(c.base_plane.anchor, c.direction)?.normal,
            cell,
        });
    }
    let j_global = components.iter().fold(0.0, |acc, c| acc + c.risky_area);
    Ok((file, DecompositionPlan { components, j_global }))
}

/// Reloads the written plan and validates it against the input mesh. Also
/// checks that the stored risky areas match the reloaded parts.
pub fn revalidate(dir: &Path, input: &Path) -> Result<(), PipelineError> {
    let mesh = load_path(input).map_err(|source| PipelineError::Input {
        path: input.to_path_buf(),
        source,
    })?;
    let (file, plan) = load_plan(dir)?;
    let params = SelfSupportParams::new(file.config.alpha_max_deg);
    let platform = Plane::horizontal(mesh.aabb().min.z);
    let mut violations = validate_plan(&plan, &mesh, &platform, &params).violations;
    for (i, (entry, comp)) in file.components.iter().zip(&plan.components).enumerate() {
        let tol = 1e-6 * comp.mesh.surface_area().max(1.0);
        if (entry.risky_area_mm2 - comp.risky_area).abs() > tol {
            violations.push(Violation::RiskMismatch {
                component: i,
                stored: entry.risky_area_mm2,
                actual: comp.risky_area,
            });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(PipelineError::Validation(violations))
    }
}
