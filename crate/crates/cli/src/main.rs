use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use mdp_planner::{exit_code, run_pipeline, Mode, Nozzle, PlanSettings, ReportFormat, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Greedy,
    GreedyConstrained,
    Beam,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

fn parse_axis(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] if x != 0.0 || y != 0.0 || z != 0.0 => Ok([x, y, z]),
        [_, _, _] => Err("axis must be non-zero".into()),
        _ => Err("expected x,y,z".into()),
    }
}

fn parse_nozzle(s: &str) -> Result<Nozzle, String> {
    match s {
        "0.4" => Ok(Nozzle::Fine),
        "0.8" => Ok(Nozzle::Coarse),
        _ => Err("nozzle must be 0.4 or 0.8".into()),
    }
}

fn parse_dof(s: &str) -> Result<u8, String> {
    match s {
        "5" => Ok(5),
        "4" => Ok(4),
        _ => Err("dof must be 4 or 5".into()),
    }
}

/// Decompose a mesh into parts printable along different directions and
/// grow tree supports for the rest.
#[derive(Debug, Parser)]
#[command(name = "mdp-plan", version)]
struct Args {
    /// Input mesh (STL or OBJ).
    #[arg(long)]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "beam")]
    mode: ModeArg,
    #[arg(long, default_value_t = 10)]
    beam_width: usize,
    /// Parts smaller than V/w are not clipped off.
    #[arg(long, default_value_t = 10)]
    w: u32,
    /// Maximal self-supporting angle (degrees).
    #[arg(long, default_value_t = 45.0)]
    alpha_max: f64,
    #[arg(long, value_parser = parse_dof, default_value = "5")]
    dof: u8,
    /// Rotation axis for 4-DOF, as x,y,z.
    #[arg(long, value_parser = parse_axis)]
    axis: Option<[f64; 3]>,
    /// Largest tilt of a printing direction from +z (degrees).
    #[arg(long)]
    max_tilt: Option<f64>,
    #[arg(long, default_value_t = 250)]
    normals: usize,
    /// Spacing of parallel candidate planes (mm).
    #[arg(long, default_value_t = 1.0)]
    offset_step: f64,
    #[arg(long, default_value_t = 0.1)]
    delta0: f64,
    #[arg(long, default_value_t = 5.0)]
    delta_mult: f64,
    #[arg(long, value_parser = parse_nozzle, default_value = "0.8")]
    nozzle: Nozzle,
    #[arg(long, value_enum, default_value = "on")]
    supports: Switch,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    report: FormatArg,
    /// Reject cuts leaving faces thinner than the nozzle next to the plane.
    #[arg(long)]
    thin_filter: bool,
}

impl Args {
    fn into_config(self) -> RunConfig {
        RunConfig {
            input: self.input,
            output_dir: self.out,
            settings: PlanSettings {
                mode: match self.mode {
                    ModeArg::Greedy => Mode::Greedy,
                    ModeArg::GreedyConstrained => Mode::GreedyConstrained,
                    ModeArg::Beam => Mode::Beam,
                },
                beam_width: self.beam_width,
                w: self.w,
                alpha_max_deg: self.alpha_max,
                dof: self.dof,
                axis: self.axis,
                max_tilt_deg: self.max_tilt,
                normals: self.normals,
                offset_step: self.offset_step,
                delta0: self.delta0,
                delta_mult: self.delta_mult,
                nozzle: self.nozzle,
                supports: matches!(self.supports, Switch::On),
                thin_filter: self.thin_filter,
            },
            threads: self.threads,
            report_format: match self.report {
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Text => ReportFormat::Text,
            },
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MDP_LOG", "warn")).init();
    let config = Args::parse().into_config();
    let result = run_pipeline(&config);
    if let Ok(out) = &result {
        log::info!("{} parts, J_G {:.3} -> {:.3}", out.report.parts, out.report.j_global_before, out.report.j_global_after);
    }
    ExitCode::from(exit_code(&result) as u8)
}
