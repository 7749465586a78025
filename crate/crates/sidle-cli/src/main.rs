//! Command-line harness: plan scenarios, batch directories, and validate
//! exported trajectories against maps.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sidle::geometry::RobotShape;
use sidle::gridmap::OccupancyGrid;
use sidle::scenario::{
    self, corridor_dump, diagnostics_csv, trajectory_csv, validate_trajectory_csv,
    PipelineError, RunOutput, Scenario,
};
use sidle::svg::{render_svg, RenderOptions};

#[derive(Parser)]
#[command(
    name = "sidle",
    about = "Whole-body motion planning for rectangular robots in tight 2D spaces"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its artifacts.
    Plan {
        /// Scenario TOML file.
        scenario: PathBuf,
        /// Output directory for CSV, corridor, and report artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Also render an SVG of map, path, corridor, and footprints.
        #[arg(long)]
        svg: bool,
        /// Pipeline repetitions; timings are medians across them.
        #[arg(long, default_value_t = 5)]
        repeat: usize,
    },
    /// Run every scenario TOML in a directory, sorted by name.
    Batch {
        /// Directory containing scenario TOML files.
        dir: PathBuf,
        /// Output directory for per-scenario artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also render SVGs.
        #[arg(long)]
        svg: bool,
        /// Pipeline repetitions per scenario.
        #[arg(long, default_value_t = 1)]
        repeat: usize,
    },
    /// Re-check an exported trajectory CSV against a map.
    Validate {
        /// Map file (ASCII grid or bitmap).
        map: PathBuf,
        /// Trajectory CSV produced by `plan`.
        trajectory: PathBuf,
        /// Robot rectangle as LENGTHxWIDTH in meters, e.g. 1.2x0.6.
        shape: String,
        /// Cell size for bitmap maps, meters.
        #[arg(long, default_value_t = 0.1)]
        resolution: f64,
        /// World x of the bitmap's lower-left corner.
        #[arg(long, default_value_t = 0.0)]
        origin_x: f64,
        /// World y of the bitmap's lower-left corner.
        #[arg(long, default_value_t = 0.0)]
        origin_y: f64,
    },
}

struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    fn other(message: String) -> Self {
        Failure { message, code: 1 }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e.stage() {
            "config" => 2,
            "search" => 3,
            "corridor" => 4,
            "optimize" => 5,
            "validate" => 6,
            _ => 1,
        };
        Failure {
            message: format!("[stage {}] {e}", e.stage()),
            code,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::other(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Plan {
            scenario,
            out,
            svg,
            repeat,
        } => {
            let sc = Scenario::load(&scenario)?;
            let (output, search_med, opt_med) = run_repeated(&sc, repeat)?;
            write_artifacts(&sc, &output, &out, svg)?;
            print!(
                "{}",
                report_text(&sc, &output, search_med, opt_med, repeat)
            );
            Ok(())
        }
        Cmd::Batch {
            dir,
            out,
            svg,
            repeat,
        } => batch(&dir, out.as_deref(), svg, repeat),
        Cmd::Validate {
            map,
            trajectory,
            shape,
            resolution,
            origin_x,
            origin_y,
        } => {
            let grid = OccupancyGrid::load(&map, Some((resolution, [origin_x, origin_y])))
                .map_err(PipelineError::from)?;
            let shape = parse_shape(&shape)?;
            let text = std::fs::read_to_string(&trajectory)?;
            let v = validate_trajectory_csv(&grid, &shape, &text)?;
            println!(
                "checked {} poses: {}",
                v.rows,
                if v.contacts == 0 {
                    "collision-free".to_string()
                } else {
                    format!("{} in collision", v.contacts)
                }
            );
            if v.contacts == 0 {
                Ok(())
            } else {
                Err(Failure {
                    message: format!("{} colliding poses", v.contacts),
                    code: 6,
                })
            }
        }
    }
}

fn parse_shape(text: &str) -> Result<RobotShape, Failure> {
    let parts: Vec<&str> = text.split(['x', 'X']).collect();
    let bad = || Failure::other(format!("shape must be LENGTHxWIDTH, got `{text}`"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let length: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let width: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    RobotShape::new(length, width).map_err(|e| Failure::other(e.to_string()))
}

/// Run the pipeline `repeat` times; keep the first output and the median
/// stage timings.
fn run_repeated(sc: &Scenario, repeat: usize) -> Result<(RunOutput, f64, f64), Failure> {
    let repeat = repeat.max(1);
    let mut search_times = Vec::with_capacity(repeat);
    let mut opt_times = Vec::with_capacity(repeat);
    let mut first: Option<RunOutput> = None;
    for _ in 0..repeat {
        let out = scenario::run(sc)?;
        search_times.push(out.report.search_time_s);
        opt_times.push(out.report.optimize_time_s);
        first.get_or_insert(out);
    }
    Ok((first.unwrap(), median(search_times), median(opt_times)))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn report_text(
    sc: &Scenario,
    output: &RunOutput,
    search_med: f64,
    opt_med: f64,
    repeat: usize,
) -> String {
    let r = &output.report;
    format!(
        "scenario:   {}\n\
         search:     {:.3} s (median of {}), cost {:.3}, {} expansions\n\
         corridor:   {} regions\n\
         optimize:   {:.3} s (median of {}), {} iterations, {} evaluations, objective {:.4}, {} escalations\n\
         trajectory: duration {:.3} s, length {:.3} m, dispersed jerk {:.4}\n\
         limits:     max speed {:.3} m/s, max acc {:.3} m/s^2, max yaw rate {:.3} rad/s\n\
         validation: collision-free at the export rate\n\
         numeric:    {}\n",
        sc.name,
        search_med,
        repeat,
        r.search_cost,
        r.search_expansions,
        r.corridor_regions,
        opt_med,
        repeat,
        r.optimizer_iterations,
        r.optimizer_evaluations,
        r.objective,
        r.escalations,
        r.duration_s,
        r.length_m,
        r.dispersed_jerk,
        r.max_speed,
        r.max_acceleration,
        r.max_yaw_rate,
        r.numeric_summary(),
    )
}

fn write_artifacts(
    sc: &Scenario,
    output: &RunOutput,
    out_dir: &Path,
    svg: bool,
) -> Result<(), Failure> {
    std::fs::create_dir_all(out_dir)?;
    let base = out_dir.join(&sc.name);
    std::fs::write(
        base.with_extension("trajectory.csv"),
        trajectory_csv(&output.trajectory, sc.csv_dt),
    )?;
    std::fs::write(
        base.with_extension("corridor.txt"),
        corridor_dump(&output.regions),
    )?;
    std::fs::write(
        base.with_extension("diagnostics.csv"),
        diagnostics_csv(&output.diagnostics),
    )?;
    if svg {
        let opts = RenderOptions {
            footprint_interval: sc.footprint_interval,
            ..RenderOptions::default()
        };
        let doc = render_svg(
            Some(&output.grid),
            Some(&output.search.samples),
            Some(&output.regions),
            Some(&output.trajectory),
            Some(&sc.shape),
            &opts,
        );
        std::fs::write(base.with_extension("svg"), doc)?;
    }
    Ok(())
}

fn batch(
    dir: &Path,
    out: Option<&Path>,
    svg: bool,
    repeat: usize,
) -> Result<(), Failure> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("toml"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::other(format!(
            "no scenario files in {}",
            dir.display()
        )));
    }
    let mut first_failure: Option<Failure> = None;
    for file in &files {
        let result = (|| -> Result<(), Failure> {
            let sc = Scenario::load(file)?;
            let (output, _, _) = run_repeated(&sc, repeat)?;
            if let Some(out_dir) = out {
                write_artifacts(&sc, &output, out_dir, svg)?;
            }
            println!(
                "{}: ok  {}",
                sc.name,
                output.report.numeric_summary()
            );
            Ok(())
        })();
        if let Err(f) = result {
            let name = file
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("scenario");
            println!("{name}: FAILED  {}", f.message);
            first_failure.get_or_insert(f);
        }
    }
    match first_failure {
        None => Ok(()),
        Some(f) => Err(Failure {
            message: "one or more scenarios failed".to_string(),
            code: f.code,
        }),
    }
}
