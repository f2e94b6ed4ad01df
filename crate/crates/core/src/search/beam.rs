use rayon::prelude::*;

use super::evaluate::{score_candidates, CandidateScore, Evaluator};
use super::plan::assemble;
use super::{apply_clip, is_terminal, platform_safe_candidates, Beam, ClipRecord, DecompositionPlan, History, SearchConfig, SearchError};
use crate::candidates::{generate_candidates, CandidateSet};
use crate::manufacturability::risk;
use crate::mesh::TriMesh;

/// One admitted clip, recorded for inspection of the relaxation schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Admission {
    pub round: usize,
    pub parent: usize,
    pub candidate: usize,
    pub upper_risk: f64,
    /// Threshold in force when the clip was admitted.
    pub delta: f64,
    pub running_objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BeamTrace {
    pub admissions: Vec<Admission>,
    pub rounds: usize,
    pub finished: usize,
}

pub fn beam_search(mesh: &TriMesh, config: &SearchConfig) -> Result<DecompositionPlan, SearchError> {
    config.validate()?;
    let set = generate_candidates(mesh, &config.sampler)?;
    Ok(beam_search_with(mesh, config, &set).0)
}

pub fn beam_search_traced(mesh: &TriMesh, config: &SearchConfig) -> Result<(DecompositionPlan, BeamTrace), SearchError> {
    config.validate()?;
    let set = generate_candidates(mesh, &config.sampler)?;
    Ok(beam_search_with(mesh, config, &set))
}

#[derive(Clone, Copy)]
struct Scored {
    beam: usize,
    candidate: usize,
    running: f64,
    score: CandidateScore,
}

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pending,
    Taken,
    Rejected,
}

struct Finished {
    objective: f64,
    beam: Beam,
}

/// Beam-guided search. Each round scores every feasible (beam, plane) pair
/// by the running objective of the extended partial plan and refills the
/// beam by progressive relaxation: pairs whose upper part has risky area
/// below `δ` are admitted best-first, and `δ` grows by `delta_mult` until
/// the beam is full or no pairs remain. Near-duplicate planes from the
/// same parent are dropped.
pub fn beam_search_with(mesh: &TriMesh, config: &SearchConfig, set: &CandidateSet) -> (DecompositionPlan, BeamTrace) {
    let input_volume = mesh.volume();
    let params = &config.self_support;
    let ids = platform_safe_candidates(mesh, set, config);
    let mut trace = BeamTrace::default();
    let start = Beam {
        remaining: Some(mesh.clone()),
        history: History::default(),
    };
    let mut finished: Vec<Finished> = Vec::new();
    let mut live: Vec<Beam> = Vec::new();
    if is_terminal(mesh, input_volume, config) {
        finished.push(finish(start, config));
    } else {
        live.push(start);
    }
    let cos_dedup = config.dedup.angle_deg.to_radians().cos();

    while !live.is_empty() {
        trace.rounds += 1;
        let round = trace.rounds;
        let per_beam: Vec<Vec<(usize, CandidateScore)>> = live
            .iter()
            .map(|b| {
                let rem = b.remaining.as_ref().expect("live beams have a remainder");
                let ev = Evaluator::new(rem, config, input_volume);
                score_candidates(&ev, set, &ids)
            })
            .collect();

        let mut pairs: Vec<Scored> = Vec::new();
        let mut dead_ends = Vec::new();
        for (j, scores) in per_beam.iter().enumerate() {
            if scores.is_empty() {
                dead_ends.push(j);
            }
            let h = live[j].history.risky_sum();
            pairs.extend(scores.iter().map(|(i, s)| Scored {
                beam: j,
                candidate: *i,
                running: h + s.upper_risk + s.lower_risk,
                score: *s,
            }));
        }
        pairs.par_sort_by(|a, b| {
            a.running
                .total_cmp(&b.running)
                .then(a.candidate.cmp(&b.candidate))
                .then(a.beam.cmp(&b.beam))
        });

        let mut status = vec![Status::Pending; pairs.len()];
        let mut taken: Vec<usize> = Vec::new();
        let mut next: Vec<Beam> = Vec::new();
        let mut delta = config.delta0;
        'fill: loop {
            for (k, p) in pairs.iter().enumerate() {
                if next.len() >= config.beam_width {
                    break 'fill;
                }
                if status[k] != Status::Pending || !(p.score.upper_risk < delta) {
                    continue;
                }
                let plane = &set.candidates[p.candidate].plane;
                let duplicate = taken.iter().any(|&t| {
                    let q = &pairs[t];
                    let other = &set.candidates[q.candidate];
                    q.beam == p.beam
                        && other.plane.normal.dot(&plane.normal) >= cos_dedup
                        && (other.offset - set.candidates[p.candidate].offset).abs() <= config.dedup.offset_mm
                });
                if duplicate {
                    status[k] = Status::Rejected;
                    continue;
                }
                let parent = &live[p.beam];
                let Some(c) = apply_clip(parent.remaining.as_ref().unwrap(), plane, config) else {
                    status[k] = Status::Rejected;
                    continue;
                };
                status[k] = Status::Taken;
                taken.push(k);
                trace.admissions.push(Admission {
                    round,
                    parent: p.beam,
                    candidate: p.candidate,
                    upper_risk: p.score.upper_risk,
                    delta,
                    running_objective: p.running,
                });
                next.push(Beam {
                    remaining: Some(c.lower),
                    history: parent.history.push(ClipRecord {
                        plane: *plane,
                        component: c.upper,
                        risky_area_at_clip: c.upper_risk,
                    }),
                });
            }
            if next.len() >= config.beam_width || !status.contains(&Status::Pending) {
                break;
            }
            delta *= config.delta_mult;
        }

        for j in dead_ends {
            finished.push(finish(live[j].clone(), config));
        }
        live.clear();
        for b in next {
            if is_terminal(b.remaining.as_ref().unwrap(), input_volume, config) {
                finished.push(finish(b, config));
            } else {
                live.push(b);
            }
        }
        log::debug!("beam round {round}: {} live, {} finished", live.len(), finished.len());
    }

    trace.finished = finished.len();
    let best = finished
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.objective.total_cmp(&b.objective).then(ia.cmp(ib)))
        .map(|(_, f)| f.beam)
        .expect("at least the start state finishes");
    let history = best.history.to_vec();
    let plan = assemble(best.remaining.unwrap(), &history, &config.platform, params);
    (plan, trace)
}

fn finish(beam: Beam, config: &SearchConfig) -> Finished {
    let rem = beam.remaining.as_ref().unwrap();
    Finished {
        objective: beam.history.risky_sum() + risk(rem, &config.platform, &config.self_support),
        beam,
    }
}
