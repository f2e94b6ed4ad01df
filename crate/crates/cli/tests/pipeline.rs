use std::path::Path;
use std::process::Command;

use mdp_core::fixtures;
use mdp_core::mesh::io::{ascii_stl, stl_bytes};
use mdp_core::TriMesh;
use mdp_planner::{load_plan, revalidate, run_pipeline, sig9, Mode, PlanFile, ReportFormat, RunConfig, EXIT_INFEASIBLE, PLAN_FILE};

fn write_stl(dir: &Path, name: &str, mesh: &TriMesh) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, stl_bytes(mesh)).unwrap();
    path
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mdp-plan"))
}

#[test]
fn cube_prints_in_one_piece() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("cube.stl");
    std::fs::write(&input, ascii_stl(&fixtures::cube(10.0))).unwrap();
    let out = dir.path().join("out");
    let status = binary()
        .args(["--input", input.to_str().unwrap(), "--out", out.to_str().unwrap(), "--mode", "beam"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let plan: PlanFile = serde_json::from_str(&std::fs::read_to_string(out.join(PLAN_FILE)).unwrap()).unwrap();
    assert_eq!(plan.components.len(), 1);
    assert_eq!(plan.j_global, 0.0);
    assert_eq!(plan.mode, Mode::Beam);
    assert!(out.join("part_1.stl").exists());
    assert!(out.join("report.json").exists());
    assert!(plan.supports.files.is_empty());
}

#[test]
fn corrupt_input_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("broken.stl");
    let mut bytes = stl_bytes(&fixtures::cube(10.0));
    bytes.truncate(200);
    std::fs::write(&input, bytes).unwrap();
    let out = dir.path().join("out");
    let result = binary()
        .args(["--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(EXIT_INFEASIBLE));
    assert!(!String::from_utf8_lossy(&result.stderr).is_empty());
    assert!(!out.exists());
}

#[test]
fn open_mesh_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("open.stl");
    let cube = fixtures::cube(10.0);
    let open = cube.submesh(0..cube.triangle_count() - 1);
    std::fs::write(&input, stl_bytes(&open)).unwrap();
    let err = run_pipeline(&RunConfig::new(&input, dir.path().join("out"))).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_INFEASIBLE);
}

#[test]
fn bad_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_stl(dir.path(), "cube.stl", &fixtures::cube(10.0));
    for extra in [&["--nozzle", "0.6"][..], &["--dof", "4"][..], &["--w", "1"][..]] {
        let status = binary()
            .args(["--input", input.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
            .args(extra)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(2), "{extra:?}");
    }
}

#[test]
fn rerun_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_stl(dir.path(), "l.stl", &fixtures::l_prism(8.0, 24.0, 20.0, 5.0, 8.0));
    let mut config = RunConfig::new(&input, dir.path().join("a"));
    config.settings.normals = 80;
    run_pipeline(&config).unwrap();
    config.output_dir = dir.path().join("b");
    run_pipeline(&config).unwrap();
    let names: Vec<_> = std::fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(names.len() >= 3);
    for name in names.iter().filter(|n| *n != "report.json") {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name:?}");
    }
}

#[test]
fn written_plan_reloads_and_revalidates() {
    let dir = tempfile::tempdir().unwrap();
    for (name, mesh) in fixtures::suite() {
        let input = write_stl(dir.path(), &format!("{name}.stl"), &mesh);
        let out = dir.path().join(name);
        let mut config = RunConfig::new(&input, &out);
        config.settings.normals = 100;
        let result = run_pipeline(&config).unwrap();
        revalidate(&out, &input).unwrap_or_else(|e| panic!("{name}: {e}"));
        let (file, plan) = load_plan(&out).unwrap();
        assert_eq!(plan.len(), result.plan.len());
        assert_eq!(file.j_global, sig9(result.plan.j_global));
        for f in &file.supports.files {
            assert!(out.join(f).exists(), "{name}: {f}");
        }
    }
}

#[test]
fn report_tracks_before_and_after() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = fixtures::snowman(1.0, 32);
    let input = write_stl(dir.path(), "snowman.stl", &mesh);
    let mut config = RunConfig::new(&input, dir.path().join("out"));
    config.report_format = ReportFormat::Text;
    let out = run_pipeline(&config).unwrap();
    let reloaded = mdp_core::mesh::io::load_path(&input).unwrap();
    let params = mdp_core::manufacturability::SelfSupportParams::default();
    let platform = mdp_core::Plane::horizontal(reloaded.aabb().min.z);
    assert_eq!(out.report.j_global_before, mdp_core::manufacturability::risk(&reloaded, &platform, &params));
    assert!(out.report.j_global_after <= out.report.j_global_before);
    assert_eq!(out.report.parts, out.plan.len());
    assert!(out.report.support_volume_before_mm3.unwrap() > 0.0);
    let text = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(text.contains("J_G before/after"));
}

#[test]
fn supports_off_writes_no_support_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_stl(dir.path(), "sphere.stl", &fixtures::rest_on_platform(&fixtures::icosphere(10.0, 3)));
    let out = dir.path().join("out");
    let status = binary()
        .args(["--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(["--supports", "off", "--mode", "greedy", "--normals", "60", "--report", "text"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let files: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(files.iter().all(|f| !f.starts_with("supports_")));
    assert!(files.contains(&"report.txt".to_string()));
}

#[test]
fn four_dof_directions_stay_normal_to_the_axis() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_stl(dir.path(), "l.stl", &fixtures::l_prism(8.0, 24.0, 20.0, 5.0, 8.0));
    let out = dir.path().join("out");
    let status = binary()
        .args(["--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(["--dof", "4", "--axis", "0,1,0", "--normals", "72"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let plan: PlanFile = serde_json::from_str(&std::fs::read_to_string(out.join(PLAN_FILE)).unwrap()).unwrap();
    assert!(plan.components.len() >= 2);
    for c in &plan.components[1..] {
        assert!(c.direction[1].abs() < 1e-8, "{:?}", c.direction);
    }
}

#[test]
fn nine_significant_digits() {
    assert_eq!(sig9(1.0 / 3.0), 0.333333333);
    assert_eq!(sig9(123456789.123), 123456789.0);
    assert_eq!(sig9(-0.0).to_bits(), 0.0f64.to_bits());
}
