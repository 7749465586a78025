//! Scenario files and the end-to-end planning pipeline.
//!
//! A scenario is a flat key-value TOML document naming the map, the robot
//! rectangle, start and goal states, and any tuning overrides. `run`
//! executes search, anchor selection, corridor growth, optimization, and a
//! final standalone validation, and reports metrics split into
//! deterministic numbers and wall-clock timings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::collision::pose_in_collision;
use crate::corridor::{
    grow_corridor, select_anchors, Anchor, CorridorError, CorridorParams, CorridorRegion,
};
use crate::geometry::{wrap_angle, Pose2, RobotShape};
use crate::gridmap::{MapError, OccupancyGrid};
use crate::metrics::trajectory_stats;
use crate::optimizer::{
    optimize, IterationRecord, OptimizeError, OptimizerParams,
};
use crate::search::{
    optimal_connection, search, SearchError, SearchOutcome, SearchParams, SearchState,
};
use crate::trajectory::QuinticTrajectory;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("map load failed: {0}")]
    Map(#[from] MapError),
    #[error("search failed: {0}")]
    Search(#[from] SearchError),
    #[error("corridor generation failed: {0}")]
    Corridor(#[from] CorridorError),
    #[error("optimization failed: {0}")]
    Optimize(#[from] OptimizeError),
    #[error("final validation found {contacts} colliding poses")]
    Validation { contacts: usize },
}

impl PipelineError {
    /// Name of the pipeline stage that failed.
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Config(_) | PipelineError::Map(_) => "config",
            PipelineError::Search(_) => "search",
            PipelineError::Corridor(_) => "corridor",
            PipelineError::Optimize(_) => "optimize",
            PipelineError::Validation { .. } => "validate",
        }
    }
}

/// Fully resolved scenario. Every tunable falls back to the library
/// default when the file does not override it.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub map_path: PathBuf,
    /// Geometry for bitmap maps, which carry no header of their own.
    pub bitmap_geometry: Option<(f64, [f64; 2])>,
    pub shape: RobotShape,
    pub start: SearchState,
    pub goal: SearchState,
    pub search: SearchParams,
    pub corridor: CorridorParams,
    pub optimizer: OptimizerParams,
    /// Export and validation sampling step, seconds.
    pub csv_dt: f64,
    /// Footprint spacing in rendered SVGs, seconds.
    pub footprint_interval: f64,
}

struct KeyTable {
    table: toml::Table,
}

impl KeyTable {
    fn f64_req(&mut self, key: &str) -> Result<f64, PipelineError> {
        self.f64_opt(key)?
            .ok_or_else(|| PipelineError::Config(format!("missing required key `{key}`")))
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>, PipelineError> {
        match self.table.remove(key) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(v)),
            Some(toml::Value::Integer(v)) => Ok(Some(v as f64)),
            Some(other) => Err(PipelineError::Config(format!(
                "key `{key}` must be a number, got {other}"
            ))),
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, PipelineError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, PipelineError> {
        match self.table.remove(key) {
            None => Ok(default),
            Some(toml::Value::Integer(v)) if v >= 0 => Ok(v as usize),
            Some(other) => Err(PipelineError::Config(format!(
                "key `{key}` must be a non-negative integer, got {other}"
            ))),
        }
    }

    fn str_req(&mut self, key: &str) -> Result<String, PipelineError> {
        match self.table.remove(key) {
            Some(toml::Value::String(s)) => Ok(s),
            Some(other) => Err(PipelineError::Config(format!(
                "key `{key}` must be a string, got {other}"
            ))),
            None => Err(PipelineError::Config(format!(
                "missing required key `{key}`"
            ))),
        }
    }
}

impl Scenario {
    /// Parse a scenario document. Relative map paths resolve against
    /// `base_dir`.
    pub fn from_toml_str(
        text: &str,
        name: &str,
        base_dir: &Path,
    ) -> Result<Self, PipelineError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| PipelineError::Config(format!("TOML parse error: {e}")))?;
        let mut kt = KeyTable { table };

        let map = kt.str_req("map")?;
        let map_path = {
            let p = PathBuf::from(&map);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        let bitmap_geometry = match (
            kt.f64_opt("map_resolution")?,
            kt.f64_opt("map_origin_x")?,
            kt.f64_opt("map_origin_y")?,
        ) {
            (None, None, None) => None,
            (res, ox, oy) => Some((
                res.unwrap_or(0.1),
                [ox.unwrap_or(0.0), oy.unwrap_or(0.0)],
            )),
        };

        let shape = RobotShape::new(kt.f64_req("robot_length")?, kt.f64_req("robot_width")?)
            .map_err(|e| PipelineError::Config(e.to_string()))?;

        let start = SearchState {
            pos: [kt.f64_req("start_x")?, kt.f64_req("start_y")?],
            yaw: kt.f64_req("start_yaw")?,
            vel: [kt.f64_or("start_vx", 0.0)?, kt.f64_or("start_vy", 0.0)?],
        };
        let goal = SearchState {
            pos: [kt.f64_req("goal_x")?, kt.f64_req("goal_y")?],
            yaw: kt.f64_req("goal_yaw")?,
            vel: [kt.f64_or("goal_vx", 0.0)?, kt.f64_or("goal_vy", 0.0)?],
        };

        let mut search = SearchParams::default();
        search.limits.v_max = kt.f64_or("v_max", search.limits.v_max)?;
        search.limits.a_max = kt.f64_or("a_max", search.limits.a_max)?;
        search.limits.yaw_rate_max =
            kt.f64_or("yaw_rate_max", search.limits.yaw_rate_max)?;
        if search.limits.v_max <= 0.0
            || search.limits.a_max <= 0.0
            || search.limits.yaw_rate_max <= 0.0
        {
            return Err(PipelineError::Config("limits must be positive".into()));
        }
        search.tau = kt.f64_or("tau", search.tau)?;
        search.duration_samples =
            kt.usize_or("duration_samples", search.duration_samples)?;
        search.input_radius = kt.usize_or("input_radius", search.input_radius)?;
        search.rho = kt.f64_or("rho", search.rho)?;
        search.lambda_align = kt.f64_or("lambda_align", search.lambda_align)?;
        search.align_speed_floor =
            kt.f64_or("align_speed_floor", search.align_speed_floor)?;
        search.checks_per_primitive =
            kt.usize_or("checks_per_primitive", search.checks_per_primitive)?;
        search.node_budget = kt.usize_or("node_budget", search.node_budget)?;
        search.prune_pos_bin = kt.f64_or("prune_pos_bin", search.prune_pos_bin)?;
        search.prune_yaw_bin = kt.f64_or("prune_yaw_bin", search.prune_yaw_bin)?;
        search.goal_vel_tol = kt.f64_or("goal_vel_tol", search.goal_vel_tol)?;
        search.connect_radius = kt.f64_or("connect_radius", search.connect_radius)?;
        search.connect_every = kt.usize_or("connect_every", search.connect_every)?;

        let mut corridor = CorridorParams::default();
        corridor.anchor_spacing =
            kt.f64_or("anchor_spacing", corridor.anchor_spacing)?;
        corridor.max_expand = kt.f64_or("max_expand", corridor.max_expand)?;

        let mut optimizer = OptimizerParams {
            limits: search.limits,
            ..OptimizerParams::default()
        };
        optimizer.weights.time = kt.f64_or("w_time", optimizer.weights.time)?;
        optimizer.weights.velocity =
            kt.f64_or("w_velocity", optimizer.weights.velocity)?;
        optimizer.weights.acceleration =
            kt.f64_or("w_acceleration", optimizer.weights.acceleration)?;
        optimizer.weights.yaw_rate =
            kt.f64_or("w_yaw_rate", optimizer.weights.yaw_rate)?;
        optimizer.weights.corridor =
            kt.f64_or("w_corridor", optimizer.weights.corridor)?;
        optimizer.checkpoint_dt = kt.f64_or("checkpoint_dt", optimizer.checkpoint_dt)?;
        optimizer.smoothing_mu = kt.f64_or("smoothing_mu", optimizer.smoothing_mu)?;
        optimizer.min_duration = kt.f64_or("min_duration", optimizer.min_duration)?;
        optimizer.escalation_factor =
            kt.f64_or("escalation_factor", optimizer.escalation_factor)?;
        optimizer.max_escalations =
            kt.usize_or("max_escalations", optimizer.max_escalations)?;
        optimizer.solver.max_iterations =
            kt.usize_or("max_iterations", optimizer.solver.max_iterations)?;
        optimizer.solver.gradient_tol =
            kt.f64_or("gradient_tol", optimizer.solver.gradient_tol)?;

        let csv_dt = kt.f64_or("csv_dt", 0.01)?;
        let footprint_interval = kt.f64_or("footprint_interval", 0.5)?;
        if csv_dt <= 0.0 || footprint_interval <= 0.0 {
            return Err(PipelineError::Config(
                "sampling steps must be positive".into(),
            ));
        }

        if !kt.table.is_empty() {
            let mut keys: Vec<&str> = kt.table.keys().map(|k| k.as_str()).collect();
            keys.sort_unstable();
            return Err(PipelineError::Config(format!(
                "unknown keys: {}",
                keys.join(", ")
            )));
        }

        Ok(Scenario {
            name: name.to_string(),
            map_path,
            bitmap_geometry,
            shape,
            start,
            goal,
            search,
            corridor,
            optimizer,
            csv_dt,
            footprint_interval,
        })
    }

    /// Load a scenario from a file; the scenario name is the file stem.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scenario");
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, name, base)
    }
}

/// Metrics of one successful pipeline run. Timing fields vary between
/// runs; everything else is deterministic for a fixed scenario.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub search_time_s: f64,
    pub optimize_time_s: f64,
    pub dispersed_jerk: f64,
    pub length_m: f64,
    pub duration_s: f64,
    pub max_speed: f64,
    pub max_acceleration: f64,
    pub max_yaw_rate: f64,
    pub collision_valid: bool,
    pub search_cost: f64,
    pub search_expansions: usize,
    pub corridor_regions: usize,
    pub optimizer_iterations: usize,
    pub optimizer_evaluations: usize,
    pub objective: f64,
    pub escalations: usize,
}

impl RunReport {
    /// Every deterministic field, formatted with shortest-roundtrip float
    /// notation. Two runs of the same scenario must produce identical
    /// bytes here; wall-clock timings are deliberately excluded.
    pub fn numeric_summary(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "dispersed_jerk={:?} length_m={:?} duration_s={:?} max_speed={:?} \
             max_acceleration={:?} max_yaw_rate={:?} collision_valid={} \
             search_cost={:?} search_expansions={} corridor_regions={} \
             optimizer_iterations={} optimizer_evaluations={} objective={:?} \
             escalations={}",
            self.dispersed_jerk,
            self.length_m,
            self.duration_s,
            self.max_speed,
            self.max_acceleration,
            self.max_yaw_rate,
            self.collision_valid,
            self.search_cost,
            self.search_expansions,
            self.corridor_regions,
            self.optimizer_iterations,
            self.optimizer_evaluations,
            self.objective,
            self.escalations,
        );
        s
    }
}

/// Everything a successful run produces, for reporting and rendering.
#[derive(Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub grid: OccupancyGrid,
    pub search: SearchOutcome,
    pub regions: Vec<CorridorRegion>,
    pub trajectory: QuinticTrajectory,
    pub diagnostics: Vec<IterationRecord>,
}

/// Execute the full pipeline for one scenario.
pub fn run(scenario: &Scenario) -> Result<RunOutput, PipelineError> {
    let grid = OccupancyGrid::load(&scenario.map_path, scenario.bitmap_geometry)?;

    let t0 = Instant::now();
    let search_out = search(
        &grid,
        &scenario.shape,
        &scenario.start,
        &scenario.goal,
        &scenario.search,
    )?;
    let search_time_s = t0.elapsed().as_secs_f64();

    let mut anchors = select_anchors(&search_out.samples, scenario.corridor.anchor_spacing);

    // The search may stop one prune cell short of the goal; pin the final
    // anchor to the exact goal pose so the optimizer's endpoint is right.
    let goal_pose = scenario.goal.pose();
    let last = *anchors.last().expect("search returns at least one sample");
    let pos_err = ((last.pose.x - goal_pose.x).powi(2)
        + (last.pose.y - goal_pose.y).powi(2))
    .sqrt();
    let yaw_err = wrap_angle(last.pose.psi - goal_pose.psi).abs();
    if pos_err > 1e-9 || yaw_err > 1e-9 {
        let last_sample = search_out.samples.last().unwrap();
        let reach = SearchState {
            pos: [last_sample.pose.x, last_sample.pose.y],
            yaw: last_sample.pose.psi,
            vel: last_sample.vel,
        };
        let (_, t_conn) = optimal_connection(&reach, &scenario.goal, scenario.search.rho);
        anchors.push(Anchor {
            pose: goal_pose,
            time: last.time + t_conn.max(scenario.optimizer.min_duration),
        });
    }
    if anchors.len() == 1 {
        // Degenerate start-equals-goal run: one short hold segment.
        anchors.push(Anchor {
            pose: anchors[0].pose,
            time: anchors[0].time + scenario.optimizer.min_duration,
        });
    }

    let regions = grow_corridor(&grid, &scenario.shape, &anchors, &scenario.corridor)?;

    let t1 = Instant::now();
    let opt = optimize(
        &grid,
        &scenario.shape,
        &regions,
        [scenario.start.vel[0], scenario.start.vel[1], 0.0],
        [scenario.goal.vel[0], scenario.goal.vel[1], 0.0],
        &scenario.optimizer,
    )?;
    let optimize_time_s = t1.elapsed().as_secs_f64();

    let stats = trajectory_stats(&opt.trajectory, scenario.csv_dt);

    // Standalone validation at the export rate, endpoint included.
    let total = opt.trajectory.total_time();
    let steps = (total / scenario.csv_dt).ceil() as usize;
    let mut contacts = 0usize;
    for k in 0..=steps {
        let t = (k as f64 * scenario.csv_dt).min(total);
        let s = opt.trajectory.sample(t);
        if pose_in_collision(&grid, &scenario.shape, &Pose2::new(s.x, s.y, s.psi)) {
            contacts += 1;
        }
    }
    if contacts > 0 {
        return Err(PipelineError::Validation { contacts });
    }

    let report = RunReport {
        search_time_s,
        optimize_time_s,
        dispersed_jerk: stats.dispersed_jerk,
        length_m: stats.length,
        duration_s: stats.duration,
        max_speed: stats.max_speed,
        max_acceleration: stats.max_acceleration,
        max_yaw_rate: stats.max_yaw_rate,
        collision_valid: true,
        search_cost: search_out.cost,
        search_expansions: search_out.expansions,
        corridor_regions: regions.len(),
        optimizer_iterations: opt.iterations,
        optimizer_evaluations: opt.evaluations,
        objective: opt.objective,
        escalations: opt.escalations,
    };
    Ok(RunOutput {
        report,
        grid,
        search: search_out,
        regions,
        trajectory: opt.trajectory,
        diagnostics: opt.diagnostics,
    })
}

/// Trajectory samples as CSV, one row per `dt` plus the exact endpoint.
pub fn trajectory_csv(traj: &QuinticTrajectory, dt: f64) -> String {
    assert!(dt > 0.0);
    let mut out = String::from("t,x,y,psi,vx,vy,omega,ax,ay\n");
    let total = traj.total_time();
    let steps = (total / dt).floor() as usize;
    let mut emit = |t: f64| {
        let s = traj.sample(t);
        let _ = writeln!(
            out,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            s.t, s.x, s.y, s.psi, s.vx, s.vy, s.omega, s.ax, s.ay
        );
    };
    for k in 0..=steps {
        emit(k as f64 * dt);
    }
    if steps as f64 * dt < total - 1e-12 {
        emit(total);
    }
    out
}

/// One corridor polygon per line: space-separated vertex coordinates in
/// world meters, counterclockwise.
pub fn corridor_dump(regions: &[CorridorRegion]) -> String {
    let mut out = String::new();
    for r in regions {
        let verts = r.polygon.vertices();
        for (i, v) in verts.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:?} {:?}", v[0], v[1]);
        }
        out.push('\n');
    }
    out
}

/// Solver progress as CSV: objective, gradient norm, and the weighted
/// value of each penalty term per accepted iterate.
pub fn diagnostics_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from(
        "iteration,objective,gradient_norm,smoothness,time,velocity,acceleration,yaw_rate,corridor\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.iteration,
            r.objective,
            r.gradient_norm,
            r.breakdown.smoothness,
            r.breakdown.time,
            r.breakdown.velocity,
            r.breakdown.acceleration,
            r.breakdown.yaw_rate,
            r.breakdown.corridor,
        );
    }
    out
}

/// Outcome of replaying an exported trajectory CSV against a map.
#[derive(Clone, Copy, Debug)]
pub struct CsvValidation {
    pub rows: usize,
    pub contacts: usize,
}

/// Re-check an exported trajectory CSV pose by pose with the whole-body
/// collision test.
pub fn validate_trajectory_csv(
    grid: &OccupancyGrid,
    shape: &RobotShape,
    text: &str,
) -> Result<CsvValidation, PipelineError> {
    let mut rows = 0usize;
    let mut contacts = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(PipelineError::Config(format!(
                "CSV line {}: expected 9 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |idx: usize| -> Result<f64, PipelineError> {
            fields[idx].trim().parse().map_err(|_| {
                PipelineError::Config(format!(
                    "CSV line {}: field {} is not a number",
                    lineno + 1,
                    idx + 1
                ))
            })
        };
        let pose = Pose2::new(parse(1)?, parse(2)?, parse(3)?);
        rows += 1;
        if pose_in_collision(grid, shape, &pose) {
            contacts += 1;
        }
    }
    Ok(CsvValidation { rows, contacts })
}
