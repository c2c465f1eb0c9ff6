//! Discrete-time simulation of the full exploration loop: sensing, map
//! merging, frontier extraction, sequential hierarchical choice, ticked
//! motion with reactive replanning, and completion bookkeeping.
//!
//! The loop is single-threaded and fully deterministic for a fixed
//! (config, seed); sweeps parallelize across independent experiments only.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::SimConfig;
use crate::coordination::{
    choose_frontier, ChoiceContext, ChoiceMode, ChoiceResult, PassDownPath,
};
use crate::error::{Error, Result};
use crate::frontier::{extract_frontiers, frontier_pose, FrontierList};
use crate::grid::{
    completion_percentage, load_world, merge_maps, GridGeometry, GridIndex, GroundTruthWorld,
    OccupancyGrid, Pose,
};
use crate::nav::{astar, inflate, NavGrid};
use crate::sensing::{apply_scan, cast_scan, cast_scan_with_noise};
use crate::trace::TraceWriter;

/// Planner tolerance (cells) used for all goal motion.
const GOAL_TOLERANCE: usize = 1;
/// Replan attempts when another robot blocks the next cell, before waiting.
const REPLAN_ATTEMPTS: usize = 3;

/// One robot in the team.
#[derive(Debug, Clone)]
pub struct RobotState {
    pub id: usize,
    pub rank: usize,
    pub pose: Pose,
    pub start_pose: Pose,
    pub local_map: OccupancyGrid,
    pub path: VecDeque<GridIndex>,
    pub goal: Option<Pose>,
    pub done: bool,
}

impl RobotState {
    pub fn cell(&self, geom: GridGeometry) -> GridIndex {
        geom.world_to_grid(&self.pose).expect("robot pose stays in bounds")
    }
}

/// One robot's decision in one iteration.
#[derive(Debug, Clone)]
pub struct RobotChoiceRecord {
    pub robot: usize,
    pub mode: ChoiceMode,
    pub chosen: Pose,
    pub relay_chain: Vec<Pose>,
    pub relay_cost: Option<f64>,
}

/// Everything observable about one iteration.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub iteration: usize,
    pub robots: Vec<RobotChoiceRecord>,
    pub frontiers_available: usize,
    pub completion_pct: f64,
    pub connectivity_ok: bool,
}

/// One sweep cell, one row of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub num_robots: usize,
    pub wifi_range: f64,
    pub iterations: usize,
    pub completion_pct: f64,
}

/// Full output of one experiment.
pub struct ExperimentOutput {
    pub record: ExperimentRecord,
    pub traces: Vec<IterationTrace>,
    pub final_map: OccupancyGrid,
    pub trace_log: String,
    /// (iteration, PGM bytes) merged-map snapshots, present when requested.
    pub snapshots: Vec<(usize, Vec<u8>)>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub record_snapshots: bool,
}

/// True iff every consecutive pair in [robot_goal] + chain + [source] is
/// within `wifi_range` plus `slack` (slack covers grid-snapped relay poses;
/// pass 0 for exact checks).
pub fn relay_chain_valid(
    robot_goal: &Pose,
    chain: &[Pose],
    source: &Pose,
    wifi_range: f64,
    slack: f64,
) -> bool {
    let mut prev = robot_goal;
    for pose in chain.iter().chain(std::iter::once(source)) {
        if prev.distance(pose) > wifi_range + slack {
            return false;
        }
        prev = pose;
    }
    true
}

/// Run one experiment; the reference map is built internally by a one-robot
/// unlimited-range run on the same world.
pub fn run_experiment(config: &SimConfig) -> Result<ExperimentOutput> {
    let reference = build_reference_map(config)?;
    run_experiment_with_reference(config, Some(&reference), &RunOptions::default())
}

/// Run one experiment against a prebuilt reference map (used by sweeps so the
/// reference run happens once per world).
pub fn run_experiment_with_reference(
    config: &SimConfig,
    reference: Option<&OccupancyGrid>,
    options: &RunOptions,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut sim = Simulation::new(config, options)?;
    sim.run_to_completion(reference, config.max_iterations)?;
    Ok(sim.finish())
}

/// The completed-exploration map: one robot, unlimited WiFi range, run until
/// no frontiers remain.
pub fn build_reference_map(config: &SimConfig) -> Result<OccupancyGrid> {
    let mut reference_config = config.clone();
    reference_config.num_robots = 1;
    reference_config.wifi_range = f64::INFINITY;
    reference_config.validate()?;
    let cap = 10 * reference_config.max_iterations.max(100);
    let mut sim = Simulation::new(&reference_config, &RunOptions::default())?;
    sim.run_to_completion(None, cap)?;
    Ok(sim.finish().final_map)
}

/// Cartesian sweep (robot counts outer, ranges inner), experiments run in
/// parallel; outputs keep table order.
pub fn run_sweep(
    template: &SimConfig,
    robots: &[usize],
    ranges: &[f64],
) -> Result<Vec<ExperimentOutput>> {
    if robots.is_empty() || ranges.is_empty() {
        return Err(Error::Config("sweep needs nonempty robot and range lists".into()));
    }
    let reference = build_reference_map(template)?;
    let mut combos = Vec::new();
    for &n in robots {
        for &r in ranges {
            let mut config = template.clone();
            config.num_robots = n;
            config.wifi_range = r;
            combos.push(config);
        }
    }
    combos
        .par_iter()
        .map(|config| {
            run_experiment_with_reference(config, Some(&reference), &RunOptions::default())
        })
        .collect()
}

/// Results table matching the sweep schema.
pub fn results_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(
        "Number of Robots,Number of Iterations,Map Completion Percentage,Simulated WiFi Range\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{:.2},{}\n",
            r.num_robots, r.iterations, r.completion_pct, r.wifi_range
        ));
    }
    out
}

/// Per-robot-count means over the ranges, computed from the 2-decimal values
/// a reader of the results CSV sees.
pub fn summary_csv(records: &[ExperimentRecord]) -> String {
    let mut out =
        String::from("Number of Robots,Mean Map Completion Percentage,Mean Number of Iterations\n");
    let mut seen: Vec<usize> = Vec::new();
    for r in records {
        if !seen.contains(&r.num_robots) {
            seen.push(r.num_robots);
        }
    }
    for n in seen {
        let group: Vec<&ExperimentRecord> =
            records.iter().filter(|r| r.num_robots == n).collect();
        let mean_pct = group
            .iter()
            .map(|r| (r.completion_pct * 100.0).round() / 100.0)
            .sum::<f64>()
            / group.len() as f64;
        let mean_iter =
            group.iter().map(|r| r.iterations as f64).sum::<f64>() / group.len() as f64;
        out.push_str(&format!("{n},{mean_pct:.4},{mean_iter:.2}\n"));
    }
    out
}

fn load_world_file(config: &SimConfig) -> Result<GroundTruthWorld> {
    let text = std::fs::read_to_string(&config.world_file).map_err(|e| {
        Error::Config(format!("cannot read world file {}: {e}", config.world_file.display()))
    })?;
    load_world(&text)
}

/// The running state of one experiment: the ground-truth world, the team, and
/// the accumulated traces. Drive it iteration by iteration with
/// [`Simulation::run_iteration`], or use the `run_*` helpers above.
pub struct Simulation {
    world: GroundTruthWorld,
    config: SimConfig,
    geom: GridGeometry,
    source: Pose,
    source_cell: GridIndex,
    robots: Vec<RobotState>,
    rng: ChaCha8Rng,
    trace: TraceWriter,
    global_tick: usize,
    iteration: usize,
    traces: Vec<IterationTrace>,
    snapshots: Vec<(usize, Vec<u8>)>,
    record_snapshots: bool,
}

impl Simulation {
    pub fn new(config: &SimConfig, options: &RunOptions) -> Result<Self> {
        let world = load_world_file(config)?;
        Self::from_world(world, config, options)
    }

    pub fn from_world(
        world: GroundTruthWorld,
        config: &SimConfig,
        options: &RunOptions,
    ) -> Result<Self> {
        let geom = world.geometry();
        let spawn_cells = spawn_column(&world, config)?;
        let spawn_poses: Vec<Pose> = spawn_cells.iter().map(|&c| geom.grid_to_world(c)).collect();

        let source = match config.source {
            Some((x, y)) => Pose::xy(x, y),
            None => {
                let n = spawn_poses.len() as f64;
                Pose::xy(
                    spawn_poses.iter().map(|p| p.x).sum::<f64>() / n,
                    spawn_poses.iter().map(|p| p.y).sum::<f64>() / n,
                )
            }
        };
        let source_cell = geom
            .world_to_grid(&source)
            .map_err(|_| Error::Config(format!("source ({}, {}) out of bounds", source.x, source.y)))?;
        if world.is_occupied(source_cell) {
            return Err(Error::Config("source lies inside an obstacle".into()));
        }

        let robots = spawn_poses
            .into_iter()
            .enumerate()
            .map(|(rank, pose)| RobotState {
                id: rank,
                rank,
                pose,
                start_pose: pose,
                local_map: OccupancyGrid::new(geom),
                path: VecDeque::new(),
                goal: None,
                done: true,
            })
            .collect();

        let mut trace = TraceWriter::new();
        trace.header(
            &config.world_file.to_string_lossy(),
            geom.resolution,
            config.num_robots,
            config.wifi_range,
            config.seed,
            &source,
        );

        Ok(Simulation {
            world,
            config: config.clone(),
            geom,
            source,
            source_cell,
            robots,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            trace,
            global_tick: 0,
            iteration: 0,
            traces: Vec::new(),
            snapshots: Vec::new(),
            record_snapshots: options.record_snapshots,
        })
    }

    pub fn source(&self) -> Pose {
        self.source
    }

    pub fn robots(&self) -> &[RobotState] {
        &self.robots
    }

    pub fn iteration_traces(&self) -> &[IterationTrace] {
        &self.traces
    }

    pub fn merged_map(&self) -> Result<OccupancyGrid> {
        self.merge_all()
    }

    /// One full cycle: sense, merge, extract, sequential choice, ticked
    /// motion with sensing, completion bookkeeping.
    pub fn run_iteration(&mut self, reference: Option<&OccupancyGrid>) -> Result<IterationTrace> {
        debug_assert!(self.robots.iter().all(|r| r.done), "previous iteration still moving");
        self.iteration += 1;
        let iteration = self.iteration;

        self.trace.begin_iteration(iteration);
        self.sense_all()?;
        let merged = self.merge_all()?;
        let frontiers = self.extract(&merged);
        let reps: Vec<(Pose, usize)> = frontiers
            .frontiers
            .iter()
            .map(|f| (frontier_pose(f, self.geom), f.size()))
            .collect();
        self.trace.frontiers(iteration, &reps);
        let frontiers_available = frontiers.len();

        let nav = inflate(&merged, self.config.robot_radius);
        let mut records = self.choose_all(&frontiers, &nav);
        self.plan_all(&nav, &mut records, iteration);
        for record in &records {
            self.trace.choice(
                iteration,
                record.robot,
                record.mode,
                &record.chosen,
                &record.relay_chain,
                record.relay_cost,
            );
        }
        let connectivity_ok = self.connectivity(&records);

        self.move_all(&nav, iteration)?;

        for robot in &self.robots {
            self.trace.robot_end(iteration, robot.id, robot.cell(self.geom), &robot.pose);
        }
        debug_assert!(
            {
                let mut cells: Vec<GridIndex> =
                    self.robots.iter().map(|r| r.cell(self.geom)).collect();
                cells.sort();
                cells.windows(2).all(|w| w[0] != w[1])
            },
            "robots co-located at iteration end"
        );

        let merged_end = self.merge_all()?;
        let completion_pct = match reference {
            Some(reference) => completion_percentage(&merged_end, reference)?,
            None => 100.0 * merged_end.known_cell_count() as f64 / self.geom.cell_count() as f64,
        };
        if self.record_snapshots {
            let file = format!("snapshots/iter_{iteration:03}.pgm");
            self.trace.snapshot(iteration, &file);
            self.snapshots.push((iteration, crate::pgm::write_pgm(&merged_end)));
        }
        self.trace.end_iteration(iteration, completion_pct, connectivity_ok);

        let trace = IterationTrace {
            iteration,
            robots: records,
            frontiers_available,
            completion_pct,
            connectivity_ok,
        };
        self.traces.push(trace.clone());
        Ok(trace)
    }

    /// Iterate until the merged map yields no frontiers and every robot sits
    /// in Default mode, or the iteration budget runs out.
    pub fn run_to_completion(
        &mut self,
        reference: Option<&OccupancyGrid>,
        max_iterations: usize,
    ) -> Result<()> {
        for _ in 0..max_iterations {
            let trace = self.run_iteration(reference)?;
            let all_default = trace.robots.iter().all(|r| r.mode == ChoiceMode::Default);
            if trace.frontiers_available == 0 && all_default {
                break;
            }
        }
        Ok(())
    }

    /// Consume the simulation into its experiment record, traces, final
    /// merged map, trace log, and snapshots.
    pub fn finish(mut self) -> ExperimentOutput {
        let final_map = self.merge_all().expect("team nonempty with shared geometry");
        let completion_pct = self.traces.last().map(|t| t.completion_pct).unwrap_or(0.0);
        let iterations = self.traces.len();
        self.trace.end_run(iterations, completion_pct);

        ExperimentOutput {
            record: ExperimentRecord {
                num_robots: self.config.num_robots,
                wifi_range: self.config.wifi_range,
                iterations,
                completion_pct,
            },
            traces: self.traces,
            final_map,
            trace_log: self.trace.finish(),
            snapshots: self.snapshots,
        }
    }

    fn sense_all(&mut self) -> Result<()> {
        let noisy = self.config.sensor.noise_std > 0.0;
        for robot in &mut self.robots {
            let scan = if noisy {
                cast_scan_with_noise(&self.world, &robot.pose, &self.config.sensor, &mut self.rng)?
            } else {
                cast_scan(&self.world, &robot.pose, &self.config.sensor)?
            };
            apply_scan(&mut robot.local_map, &scan, &self.config.sensor)?;
        }
        Ok(())
    }

    fn merge_all(&self) -> Result<OccupancyGrid> {
        let maps: Vec<&OccupancyGrid> = self.robots.iter().map(|r| &r.local_map).collect();
        merge_maps(&maps)
    }

    /// Frontier extraction seeded at the source-nearest robot cell (ties by
    /// rank). An unusable seed yields an empty list rather than a failure.
    fn extract(&self, merged: &OccupancyGrid) -> FrontierList {
        let seed_robot = self
            .robots
            .iter()
            .min_by(|a, b| {
                a.pose
                    .distance(&self.source)
                    .total_cmp(&b.pose.distance(&self.source))
                    .then_with(|| a.rank.cmp(&b.rank))
            })
            .expect("team is nonempty");
        extract_frontiers(
            merged,
            seed_robot.cell(self.geom),
            self.config.min_frontier_size,
        )
        .unwrap_or_default()
    }

    fn choose_all(&mut self, frontiers: &FrontierList, nav: &NavGrid) -> Vec<RobotChoiceRecord> {
        let n = self.robots.len();
        let mut working = frontiers.clone();
        let mut pass = PassDownPath::default();
        let mut records = Vec::with_capacity(n);

        for rank in 0..n {
            let ctx = ChoiceContext {
                source: self.source,
                source_cell: self.source_cell,
                robots_below: n - 1 - rank,
                wifi_range: self.config.wifi_range,
                weights: self.config.weights,
                nav,
                start: self.robots[rank].start_pose,
            };
            let ChoiceResult { chosen, updated_frontiers, pass_down, mode, relay_cost } =
                choose_frontier(&working, &pass, &ctx);
            records.push(RobotChoiceRecord {
                robot: self.robots[rank].id,
                mode,
                chosen,
                relay_chain: pass_down.poses.clone(),
                relay_cost,
            });
            self.robots[rank].goal = Some(chosen);
            working = updated_frontiers;
            pass = pass_down;
        }
        records
    }

    /// Path planning for every robot; a failed plan reverts the robot to its
    /// start pose for this iteration.
    fn plan_all(&mut self, nav: &NavGrid, records: &mut [RobotChoiceRecord], iteration: usize) {
        for rank in 0..self.robots.len() {
            let goal = self.robots[rank].goal.expect("goal assigned in choose_all");
            if self.try_plan(nav, rank, &goal) {
                continue;
            }
            self.trace.plan_failed(iteration, rank);
            records[rank].mode = ChoiceMode::Default;
            records[rank].relay_chain.clear();
            records[rank].relay_cost = None;
            let start = self.robots[rank].start_pose;
            records[rank].chosen = start;
            self.robots[rank].goal = Some(start);
            if !self.try_plan(nav, rank, &start) {
                // cut off even from home: sit this iteration out
                self.robots[rank].path.clear();
                self.robots[rank].done = true;
            }
        }
    }

    fn try_plan(&mut self, nav: &NavGrid, rank: usize, goal: &Pose) -> bool {
        let Ok(goal_cell) = self.geom.world_to_grid(goal) else {
            return false;
        };
        let start_cell = self.robots[rank].cell(self.geom);
        let mut nav_for_robot = nav.clone();
        nav_for_robot.set_traversable(start_cell, true);
        let path = astar(&nav_for_robot, start_cell, goal_cell, 1.0, GOAL_TOLERANCE);
        if path.is_empty() {
            return false;
        }
        let robot = &mut self.robots[rank];
        robot.path = path.cells.into_iter().skip(1).collect();
        robot.done = robot.path.is_empty();
        true
    }

    fn connectivity(&self, records: &[RobotChoiceRecord]) -> bool {
        let slack = self.geom.cell_diagonal();
        records.iter().all(|record| {
            record.mode == ChoiceMode::Default
                || relay_chain_valid(
                    &record.chosen,
                    &record.relay_chain,
                    &self.source,
                    self.config.wifi_range,
                    slack,
                )
        })
    }

    fn robot_at(&self, cell: GridIndex, excluding: usize) -> Option<usize> {
        self.robots
            .iter()
            .position(|r| r.rank != excluding && r.cell(self.geom) == cell)
    }

    /// Ticked synchronous motion; robots sense after every tick. A robot
    /// blocked by a teammate replans around it, waiting a tick when replans
    /// run out.
    fn move_all(&mut self, nav: &NavGrid, iteration: usize) -> Result<()> {
        let tick_budget = 4 * (self.geom.width + self.geom.height);
        let mut ticks_used = 0;

        while self.robots.iter().any(|r| !r.done) {
            if ticks_used >= tick_budget {
                self.trace.budget_exhausted(iteration, self.global_tick);
                for robot in &mut self.robots {
                    robot.done = true;
                    robot.path.clear();
                }
                break;
            }
            ticks_used += 1;
            self.global_tick += 1;
            let tick = self.global_tick;

            for rank in 0..self.robots.len() {
                let mut steps = 0;
                while steps < self.config.motion_budget && !self.robots[rank].done {
                    let Some(&next) = self.robots[rank].path.front() else {
                        self.robots[rank].done = true;
                        break;
                    };
                    if self.robot_at(next, rank).is_some() {
                        if !self.reactive_replan(nav, rank, next, tick) {
                            if !self.robots[rank].done {
                                self.trace.wait(tick, rank);
                            }
                            break;
                        }
                        continue; // re-read the (replanned) next cell
                    }
                    self.step_robot(rank, next);
                    self.trace.motion(tick, rank, next);
                    steps += 1;
                    if self.robots[rank].path.is_empty() {
                        self.robots[rank].done = true;
                    }
                }
            }
            self.sense_all()?;
        }
        Ok(())
    }

    fn step_robot(&mut self, rank: usize, next: GridIndex) {
        let robot = &mut self.robots[rank];
        let from = self.geom.world_to_grid(&robot.pose).expect("robot in bounds");
        debug_assert!(
            from.row.abs_diff(next.row) <= 1 && from.col.abs_diff(next.col) <= 1,
            "robot teleported"
        );
        debug_assert!(!self.world.is_occupied(next), "robot moved into a wall");
        let target = self.geom.grid_to_world(next);
        let theta = (target.y - robot.pose.y).atan2(target.x - robot.pose.x);
        robot.pose = Pose::new(target.x, target.y, theta);
        robot.path.pop_front();
    }

    /// Replan around blockers, accumulating their cells as obstacles; up to
    /// [`REPLAN_ATTEMPTS`] tries before giving up (caller then waits a tick).
    fn reactive_replan(
        &mut self,
        nav: &NavGrid,
        rank: usize,
        first_blocker: GridIndex,
        tick: usize,
    ) -> bool {
        let goal = self.robots[rank].goal.expect("moving robot has a goal");
        let Ok(goal_cell) = self.geom.world_to_grid(&goal) else {
            return false;
        };
        let start_cell = self.robots[rank].cell(self.geom);
        let mut blocked = first_blocker;
        let mut nav_patched = nav.clone();
        nav_patched.set_traversable(start_cell, true);

        for attempt in 1..=REPLAN_ATTEMPTS {
            nav_patched.set_traversable(blocked, false);
            let path = astar(&nav_patched, start_cell, goal_cell, 1.0, GOAL_TOLERANCE);
            if path.is_empty() {
                self.trace.replan(tick, rank, blocked, attempt, false);
                return false;
            }
            self.trace.replan(tick, rank, blocked, attempt, true);
            let rest: VecDeque<GridIndex> = path.cells.into_iter().skip(1).collect();
            let Some(&next) = rest.front() else {
                // already within tolerance of the goal
                self.robots[rank].path.clear();
                self.robots[rank].done = true;
                return false;
            };
            self.robots[rank].path = rest;
            if self.robot_at(next, rank).is_some() {
                blocked = next;
                continue;
            }
            return true;
        }
        false
    }
}

/// Spawn cells: a free column starting at the configured spawn cell (or the
/// first free cell in row-major order), one row per rank.
fn spawn_column(world: &GroundTruthWorld, config: &SimConfig) -> Result<Vec<GridIndex>> {
    let geom = world.geometry();
    let top = match config.spawn {
        Some((x, y)) => geom
            .world_to_grid(&Pose::xy(x, y))
            .map_err(|_| Error::Config(format!("spawn ({x}, {y}) out of bounds")))?,
        None => {
            let mut found = None;
            'scan: for row in 0..geom.height {
                for col in 0..geom.width {
                    if !world.is_occupied(GridIndex::new(row, col)) {
                        found = Some(GridIndex::new(row, col));
                        break 'scan;
                    }
                }
            }
            found.ok_or_else(|| Error::Config("world has no free cells".into()))?
        }
    };

    let mut cells = Vec::with_capacity(config.num_robots);
    for rank in 0..config.num_robots {
        let cell = GridIndex::new(top.row + rank, top.col);
        if !geom.contains(cell) || world.is_occupied(cell) {
            return Err(Error::Config(format!(
                "spawn column needs {} free cells below ({}, {})",
                config.num_robots, top.row, top.col
            )));
        }
        cells.push(cell);
    }
    Ok(cells)
}
