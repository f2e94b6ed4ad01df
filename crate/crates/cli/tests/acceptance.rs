use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use mdp_core::candidates::{generate_candidates, SamplerConfig};
use mdp_core::fixtures;
use mdp_core::manufacturability::{risk, SelfSupportParams};
use mdp_core::mesh::io::stl_bytes;
use mdp_core::mesh::{clip, ClipError};
use mdp_core::search::{
    beam_search_with, greedy_constrained_with, greedy_unconstrained_with, invert_to_sequence, validate_plan,
    DecompositionPlan, SearchConfig,
};
use mdp_core::support::{progressive_projection, SupportConfig, SupportTree, TipKind};
use mdp_core::{Plane, TriMesh};
use mdp_planner::{run_pipeline, RunConfig, PLAN_FILE};
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn write_stl(dir: &Path, name: &str, mesh: &TriMesh) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, stl_bytes(mesh)).unwrap();
    path
}

struct SuiteRun {
    name: &'static str,
    mesh: TriMesh,
    greedy: DecompositionPlan,
    constrained: DecompositionPlan,
    beam: DecompositionPlan,
}

fn suite_runs() -> Vec<SuiteRun> {
    let config = SearchConfig::default();
    fixtures::suite()
        .into_iter()
        .map(|(name, mesh)| {
            let set = generate_candidates(&mesh, &config.sampler).unwrap();
            SuiteRun {
                name,
                greedy: greedy_unconstrained_with(&mesh, &config, &set),
                constrained: greedy_constrained_with(&mesh, &config, &set),
                beam: beam_search_with(&mesh, &config, &set).0,
                mesh,
            }
        })
        .collect()
}

fn clip_conservation() -> Outcome {
    let started = Instant::now();
    let suite = fixtures::suite();
    let sampler = SamplerConfig::default();
    let sets: Vec<_> = suite.iter().map(|(_, m)| generate_candidates(m, &sampler).unwrap()).collect();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let (mut pairs, mut coplanar, mut worst) = (0, 0, 0.0f64);
    while pairs < 1000 {
        let k = rng.gen_range(0..suite.len());
        let mesh = &suite[k].1;
        let plane = sets[k].candidates[rng.gen_range(0..sets[k].len())].plane;
        let (upper, lower) = match clip(mesh, &plane) {
            Ok(parts) => parts,
            Err(ClipError::CoplanarFace) => {
                coplanar += 1;
                continue;
            }
            Err(e) => return Err(format!("{}: {e}", suite[k].0)),
        };
        let v = mesh.volume();
        let sum = upper.as_ref().map_or(0.0, |m| m.volume()) + lower.as_ref().map_or(0.0, |m| m.volume());
        worst = worst.max((sum - v).abs() / v);
        for part in upper.iter().chain(lower.iter()) {
            if let Err(e) = part.validate_closed() {
                return Err(format!("{}: output not watertight: {e}", suite[k].0));
            }
        }
        pairs += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        worst <= 1e-6 && secs < 60.0,
        format!("{pairs} pairs ({coplanar} coplanar rejects), worst relative volume error {worst:.2e}, {secs:.1} s"),
    )
}

fn risky_area_oracle() -> Outcome {
    let started = Instant::now();
    let r = 10.0;
    let sphere = fixtures::rest_on_platform(&fixtures::icosphere(r, 5));
    let got = risk(&sphere, &Plane::horizontal(0.0), &SelfSupportParams::default());
    let secs = started.elapsed().as_secs_f64();
    let cap = 2.0 * std::f64::consts::PI * (1.0 - 45f64.to_radians().cos()) * r * r;
    let err = (got - cap).abs() / cap;
    check(
        sphere.triangle_count() >= 20_000 && err <= 0.02 && secs < 5.0,
        format!("{} facets, R {got:.3} vs cap {cap:.3} ({:.2}%), {secs:.2} s", sphere.triangle_count(), 100.0 * err),
    )
}

fn plan_validity(runs: &[SuiteRun]) -> Outcome {
    let config = SearchConfig::default();
    let mut bad = Vec::new();
    for run in runs {
        for (mode, plan) in [("greedy", &run.greedy), ("constrained", &run.constrained), ("beam", &run.beam)] {
            let report = validate_plan(plan, &run.mesh, &config.platform, &config.self_support);
            if !report.is_valid() {
                bad.push(format!("{} {mode}: {:?}", run.name, report.violations));
            }
        }
    }
    check(bad.is_empty(), if bad.is_empty() { format!("{} plans valid", 3 * runs.len()) } else { bad.join("; ") })
}

fn scheme_dominance(runs: &[SuiteRun]) -> Outcome {
    let mut ok = true;
    let mut rows = Vec::new();
    for run in runs {
        let best = run.greedy.j_global.min(run.constrained.j_global);
        ok &= run.beam.j_global <= best + 1e-6;
        rows.push(format!(
            "{} {:.3}/{:.3}/{:.3}",
            run.name, run.greedy.j_global, run.constrained.j_global, run.beam.j_global
        ));
    }
    check(ok, format!("greedy/constrained/beam J_G: {}", rows.join(", ")))
}

fn snowman_reduction(dir: &Path) -> Outcome {
    let input = write_stl(dir, "snowman.stl", &fixtures::snowman(1.0, 32));
    let config = RunConfig::new(&input, dir.join("snowman"));
    let started = Instant::now();
    let out = run_pipeline(&config).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let (before, after) = (out.report.j_global_before, out.report.j_global_after);
    check(
        after <= 0.2 * before && secs < 600.0,
        format!("J_G {before:.3} -> {after:.3} over {} parts, {secs:.1} s", out.report.parts),
    )
}

fn high_genus(runs: &[SuiteRun]) -> Outcome {
    let config = SearchConfig::default();
    let run = runs.iter().find(|r| r.name == "torus").unwrap();
    let single = risk(&run.mesh, &config.platform, &config.self_support);
    let valid = validate_plan(&run.beam, &run.mesh, &config.platform, &config.self_support).is_valid();
    check(
        valid && run.beam.j_global < single,
        format!("valid {valid}, J_G {:.3} < R {single:.3}, {} parts", run.beam.j_global, run.beam.len()),
    )
}

fn candidate_count() -> Outcome {
    let ball = fixtures::icosphere(40.0, 3);
    let set = generate_candidates(&ball, &SamplerConfig::default()).map_err(|e| e.to_string())?;
    check((10_000..=25_000).contains(&set.len()), format!("{} candidates on an 80 mm sphere", set.len()))
}

fn tree_violations(tree: &SupportTree, plan: &DecompositionPlan, config: &SupportConfig) -> Vec<String> {
    let mut bad = Vec::new();
    let cos_limit = (config.tree_angle_deg + 1e-6).to_radians().cos();
    for (k, s) in tree.struts.iter().enumerate() {
        let comp = &plan.components[s.cell];
        let (a, b) = (tree.nodes[s.upper], tree.nodes[s.lower]);
        if (0..=10).any(|j| !comp.cell.contains(&(a + (b - a) * (j as f64 / 10.0)), 1e-3)) {
            bad.push(format!("strut {k} leaves cell {}", s.cell));
        }
        if (b - a).normalize().dot(&-comp.direction) < cos_limit {
            bad.push(format!("strut {k} too steep"));
        }
        if s.torque == 0.0 && s.radius != config.base_radius() {
            bad.push(format!("strut {k} has no torque but radius {}", s.radius));
        }
    }
    let down = tree.downward();
    for t in tree.tips.iter().filter(|t| matches!(t.kind, TipKind::Overhang { .. })) {
        let mut node = t.node;
        let mut steps = 0;
        while let Some(s) = down[node] {
            node = tree.struts[s].lower;
            steps += 1;
            if steps > tree.struts.len() {
                break;
            }
        }
        let landed = tree
            .tips
            .iter()
            .any(|l| l.node == node && matches!(l.kind, TipKind::Platform | TipKind::Model { .. }));
        if !landed {
            bad.push(format!("overhang at {:?} hangs free", tree.nodes[t.node]));
        }
    }
    bad
}

fn support_invariants(runs: &[SuiteRun]) -> Outcome {
    let config = SearchConfig::default();
    let supports = SupportConfig::default();
    let mut bad = Vec::new();
    let mut checked = Vec::new();
    for run in runs {
        let single = invert_to_sequence(&run.mesh, &[], &config.platform, &config.self_support).unwrap();
        for (mode, plan) in [("single", &single), ("beam", &run.beam)] {
            if plan.j_global <= 0.0 {
                continue;
            }
            let tree = progressive_projection(plan, &config.self_support, &supports).map_err(|e| format!("{} {mode}: {e}", run.name))?;
            checked.push(format!("{} {mode} ({} struts)", run.name, tree.struts.len()));
            bad.extend(tree_violations(&tree, plan, &supports).into_iter().map(|v| format!("{} {mode}: {v}", run.name)));
        }
    }
    check(
        bad.is_empty() && !checked.is_empty(),
        if bad.is_empty() { format!("checked {}", checked.join(", ")) } else { bad.join("; ") },
    )
}

fn determinism(dir: &Path) -> Outcome {
    let input = write_stl(dir, "torus.stl", &fixtures::upright_torus(10.0, 4.0, 36, 16, 1.0));
    let mut bytes = Vec::new();
    for threads in [1, 3, 8] {
        let mut config = RunConfig::new(&input, dir.join(format!("torus_{threads}")));
        config.threads = Some(threads);
        run_pipeline(&config).map_err(|e| e.to_string())?;
        bytes.push(std::fs::read(config.output_dir.join(PLAN_FILE)).unwrap());
    }
    check(
        bytes.windows(2).all(|w| w[0] == w[1]),
        format!("plan.json identical across 1, 3 and 8 threads ({} bytes)", bytes[0].len()),
    )
}

fn runtime_envelope() -> Outcome {
    let mesh = fixtures::snowman(2.4, 100);
    let config = SearchConfig::default();
    let started = Instant::now();
    let set = generate_candidates(&mesh, &config.sampler).map_err(|e| e.to_string())?;
    let (plan, _) = beam_search_with(&mesh, &config, &set);
    let secs = started.elapsed().as_secs_f64();
    check(
        mesh.triangle_count() <= 20_000 && secs < 600.0,
        format!(
            "{} triangles, {} candidates, {} parts, J_G {:.3}, {secs:.1} s",
            mesh.triangle_count(),
            set.len(),
            plan.len(),
            plan.j_global
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let runs = suite_runs();
    let criteria: Vec<Criterion> = vec![
        ("clip conservation", Box::new(clip_conservation)),
        ("risky-area oracle", Box::new(risky_area_oracle)),
        ("plan validity", Box::new(|| plan_validity(&runs))),
        ("scheme dominance", Box::new(|| scheme_dominance(&runs))),
        ("snowman reduction", Box::new(|| snowman_reduction(dir.path()))),
        ("high genus", Box::new(|| high_genus(&runs))),
        ("candidate count", Box::new(candidate_count)),
        ("support invariants", Box::new(|| support_invariants(&runs))),
        ("determinism", Box::new(|| determinism(dir.path()))),
        ("runtime envelope", Box::new(runtime_envelope)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
