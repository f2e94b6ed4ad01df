//! Decomposition planning: feasibility of a clipping plane, the greedy and
//! beam-guided schemes, inversion of a clip history into a printing
//! sequence, and plan validation.

mod beam;
mod criteria;
mod evaluate;
mod greedy;
mod plan;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::{CandidateError, SamplerConfig};
use crate::manufacturability::SelfSupportParams;
use crate::mesh::{Plane, TriMesh};

pub use beam::{beam_search, beam_search_traced, beam_search_with, Admission, BeamTrace};
pub use criteria::{check_criteria, platform_footprint, Feasible, Infeasible};
pub use evaluate::{CandidateScore, Evaluator};
pub use greedy::{greedy_constrained, greedy_constrained_with, greedy_unconstrained, greedy_unconstrained_with};
pub use plan::{invert_to_sequence, validate_plan, DecompositionPlan, PlanComponent, ValidationReport, Violation};

/// Risky areas at or below this are treated as zero (mm²).
pub const ZERO_AREA: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Candidates(#[from] CandidateError),
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("inconsistent clip history: {0}")]
    InconsistentHistory(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    GreedyUnconstrained,
    GreedyConstrained,
    Beam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinPartFilter {
    pub nozzle_resolution: f64,
    pub parallel_dot: f64,
}

impl ThinPartFilter {
    pub fn new(nozzle_resolution: f64) -> Self {
        Self {
            nozzle_resolution,
            parallel_dot: 0.9,
        }
    }
}

/// Two candidates from the same parent are duplicates when their normals
/// are within `angle_deg` and their offsets within `offset_mm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupRule {
    pub angle_deg: f64,
    pub offset_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mode: SearchMode,
    pub beam_width: usize,
    pub volume_divisor: u32,
    pub delta0: f64,
    pub delta_mult: f64,
    pub self_support: SelfSupportParams,
    pub sampler: SamplerConfig,
    pub platform: Plane,
    pub thin_part_filter: Option<ThinPartFilter>,
    pub dedup: DedupRule,
    /// Distance within which a vertex counts as touching the platform (mm).
    pub contact_eps: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let sampler = SamplerConfig::default();
        Self {
            mode: SearchMode::Beam,
            beam_width: 10,
            volume_divisor: 10,
            delta0: 0.1,
            delta_mult: 5.0,
            self_support: SelfSupportParams::default(),
            sampler,
            platform: Plane::horizontal(0.0),
            thin_part_filter: None,
            dedup: DedupRule {
                angle_deg: 10.0,
                offset_mm: 2.0 * sampler.offset_step,
            },
            contact_eps: 1e-3,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::Config(m.to_string()));
        if self.beam_width < 1 {
            return bad("beam width must be at least 1");
        }
        if self.volume_divisor < 2 {
            return bad("volume divisor w must be at least 2");
        }
        if !(self.delta0 > 0.0) {
            return bad("delta0 must be positive");
        }
        if !(self.delta_mult > 1.0) {
            return bad("delta multiplier must exceed 1");
        }
        if !self.self_support.is_valid() {
            return bad("alpha_max must lie in (0, 90) degrees");
        }
        if !self.platform.is_unit() {
            return bad("platform normal must be unit length");
        }
        Ok(())
    }
}

/// One forward clip: the plane and the upper part it removed.
#[derive(Debug, Clone)]
pub struct ClipRecord {
    pub plane: Plane,
    pub component: TriMesh,
    pub risky_area_at_clip: f64,
}

#[derive(Debug)]
struct HistoryNode {
    record: ClipRecord,
    parent: Option<Arc<HistoryNode>>,
}

/// Clip history shared between beams by prefix.
#[derive(Debug, Clone, Default)]
pub struct History {
    head: Option<Arc<HistoryNode>>,
    len: usize,
    risky_sum: f64,
}

impl History {
    pub fn push(&self, record: ClipRecord) -> Self {
        Self {
            risky_sum: self.risky_sum + record.risky_area_at_clip,
            len: self.len + 1,
            head: Some(Arc::new(HistoryNode {
                record,
                parent: self.head.clone(),
            })),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Sum of upper-part risky areas over all clips.
    pub fn risky_sum(&self) -> f64 {
        self.risky_sum
    }

    /// Records in clipping order.
    pub fn to_vec(&self) -> Vec<ClipRecord> {
        let mut out = Vec::with_capacity(self.len);
        let mut node = self.head.as_ref();
        while let Some(n) = node {
            out.push(n.record.clone());
            node = n.parent.as_ref();
        }
        out.reverse();
        out
    }
}

/// Search state: the model still to be decomposed and the clips so far.
#[derive(Debug, Clone)]
pub struct Beam {
    pub remaining: Option<TriMesh>,
    pub history: History,
}

/// Runs the scheme selected by `config.mode`.
pub fn plan(mesh: &TriMesh, config: &SearchConfig) -> Result<DecompositionPlan, SearchError> {
    match config.mode {
        SearchMode::GreedyUnconstrained => greedy_unconstrained(mesh, config),
        SearchMode::GreedyConstrained => greedy_constrained(mesh, config),
        SearchMode::Beam => beam_search(mesh, config),
    }
}

/// Stopping rule shared by all schemes: too little volume left, or nothing
/// risky left on the platform.
pub(crate) fn is_terminal(remaining: &TriMesh, input_volume: f64, config: &SearchConfig) -> bool {
    remaining.volume() < input_volume / config.volume_divisor as f64
        || crate::manufacturability::risk(remaining, &config.platform, &config.self_support) <= ZERO_AREA
}

/// Indices of candidates that keep the input's platform footprint strictly
/// below them (Criterion III). Clipping only shrinks the footprint region,
/// so the filter holds for every later state too.
pub(crate) fn platform_safe_candidates(mesh: &TriMesh, set: &crate::candidates::CandidateSet, config: &SearchConfig) -> Vec<usize> {
    let footprint = platform_footprint(mesh, &config.platform, config.contact_eps);
    (0..set.len())
        .filter(|&i| criteria::platform_below(&footprint, &set.candidates[i].plane))
        .collect()
}

/// Clip that is actually applied to the model once a plane is chosen.
pub(crate) struct AppliedClip {
    pub upper: TriMesh,
    pub lower: TriMesh,
    pub upper_risk: f64,
}

pub(crate) fn apply_clip(remaining: &TriMesh, gamma: &Plane, config: &SearchConfig) -> Option<AppliedClip> {
    let (upper, lower) = crate::mesh::clip(remaining, gamma).ok()?;
    let (upper, lower) = (upper?, lower?);
    if upper.validate_closed().is_err() || lower.validate_closed().is_err() {
        log::debug!("discarding clip with invalid output at {gamma:?}");
        return None;
    }
    let upper_risk = crate::manufacturability::risk(&upper, gamma, &config.self_support);
    Some(AppliedClip {
        upper,
        lower,
        upper_risk,
    })
}
