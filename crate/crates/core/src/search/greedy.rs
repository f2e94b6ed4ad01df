use super::evaluate::{score_candidates, Evaluator};
use super::plan::assemble;
use super::{apply_clip, is_terminal, platform_safe_candidates, ClipRecord, DecompositionPlan, SearchConfig, SearchError, ZERO_AREA};
use crate::candidates::{generate_candidates, CandidateSet};
use crate::mesh::TriMesh;

/// Repeatedly applies the feasible clip with the largest local descent
/// `J_L`, ties to the lower candidate index, until no clip reduces the
/// risky area or the remainder is terminal.
pub fn greedy_unconstrained(mesh: &TriMesh, config: &SearchConfig) -> Result<DecompositionPlan, SearchError> {
    config.validate()?;
    let set = generate_candidates(mesh, &config.sampler)?;
    Ok(greedy(mesh, config, &set, false))
}

/// Greedy restricted to clips whose upper part is support-free; a step with
/// no such clip falls back to the unconstrained choice.
pub fn greedy_constrained(mesh: &TriMesh, config: &SearchConfig) -> Result<DecompositionPlan, SearchError> {
    config.validate()?;
    let set = generate_candidates(mesh, &config.sampler)?;
    Ok(greedy(mesh, config, &set, true))
}

pub fn greedy_unconstrained_with(mesh: &TriMesh, config: &SearchConfig, set: &CandidateSet) -> DecompositionPlan {
    greedy(mesh, config, set, false)
}

pub fn greedy_constrained_with(mesh: &TriMesh, config: &SearchConfig, set: &CandidateSet) -> DecompositionPlan {
    greedy(mesh, config, set, true)
}

fn greedy(mesh: &TriMesh, config: &SearchConfig, set: &CandidateSet, constrained: bool) -> DecompositionPlan {
    let input_volume = mesh.volume();
    let ids = platform_safe_candidates(mesh, set, config);
    let mut remaining = mesh.clone();
    let mut history: Vec<ClipRecord> = Vec::new();
    while !is_terminal(&remaining, input_volume, config) {
        let ev = Evaluator::new(&remaining, config, input_volume);
        let base = ev.platform_risk();
        let scored = score_candidates(&ev, set, &ids);
        let mut ranked: Vec<(f64, usize, bool)> = scored
            .iter()
            .map(|(i, s)| (base - s.lower_risk - s.upper_risk, *i, s.upper_risk <= ZERO_AREA))
            .filter(|(jl, _, _)| *jl > ZERO_AREA)
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let support_free: Vec<_> = ranked.iter().filter(|r| r.2).copied().collect();
        let order = if constrained && !support_free.is_empty() {
            support_free
        } else {
            ranked
        };
        let mut step = None;
        for (jl, i, _) in order {
            let plane = set.candidates[i].plane;
            if let Some(c) = apply_clip(&remaining, &plane, config) {
                log::debug!("greedy clip {} with J_L = {jl:.6}", i);
                step = Some((plane, c));
                break;
            }
        }
        let Some((plane, c)) = step else { break };
        history.push(ClipRecord {
            plane,
            component: c.upper,
            risky_area_at_clip: c.upper_risk,
        });
        remaining = c.lower;
    }
    assemble(remaining, &history, &config.platform, &config.self_support)
}
