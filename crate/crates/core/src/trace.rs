//! Line-oriented run trace: one record per event, written identically for
//! identical runs so trace files can be hash-compared. The renderer parses
//! traces back to draw per-iteration overlays.

use crate::coordination::ChoiceMode;
use crate::error::{Error, Result};
use crate::grid::{GridIndex, Pose};

/// Accumulates trace lines in memory; the caller persists the finished text.
#[derive(Debug, Default)]
pub struct TraceWriter {
    buf: String,
}

fn fmt_pose(p: &Pose) -> String {
    format!("{:.3},{:.3}", p.x, p.y)
}

impl TraceWriter {
    pub fn new() -> Self {
        TraceWriter { buf: String::from("trace v1\n") }
    }

    pub fn header(
        &mut self,
        world: &str,
        resolution: f64,
        robots: usize,
        wifi_range: f64,
        seed: u64,
        source: &Pose,
    ) {
        self.buf.push_str(&format!("world {world}\n"));
        self.buf.push_str(&format!("resolution {resolution:.3}\n"));
        self.buf.push_str(&format!("robots {robots}\n"));
        self.buf.push_str(&format!("wifi_range {wifi_range:.3}\n"));
        self.buf.push_str(&format!("seed {seed}\n"));
        self.buf.push_str(&format!("source {:.3} {:.3}\n", source.x, source.y));
    }

    pub fn begin_iteration(&mut self, iteration: usize) {
        self.buf.push_str(&format!("begin_iteration {iteration}\n"));
    }

    pub fn frontiers(&mut self, iteration: usize, reps: &[(Pose, usize)]) {
        let list = reps
            .iter()
            .map(|(p, size)| format!("{:.3},{:.3},{size}", p.x, p.y))
            .collect::<Vec<_>>()
            .join(";");
        self.buf
            .push_str(&format!("frontiers {iteration} count={} reps={list}\n", reps.len()));
    }

    pub fn choice(
        &mut self,
        iteration: usize,
        robot: usize,
        mode: ChoiceMode,
        chosen: &Pose,
        chain: &[Pose],
        cost: Option<f64>,
    ) {
        let chain_s = chain.iter().map(fmt_pose).collect::<Vec<_>>().join("|");
        let cost_s = match cost {
            Some(c) => format!("{c:.3}"),
            None => "-".to_string(),
        };
        self.buf.push_str(&format!(
            "choice {iteration} robot={robot} mode={mode} chosen={} chain={chain_s} cost={cost_s}\n",
            fmt_pose(chosen)
        ));
    }

    pub fn motion(&mut self, tick: usize, robot: usize, cell: GridIndex) {
        self.buf
            .push_str(&format!("move {tick} robot={robot} cell={},{}\n", cell.row, cell.col));
    }

    pub fn replan(&mut self, tick: usize, robot: usize, blocked: GridIndex, attempt: usize, ok: bool) {
        self.buf.push_str(&format!(
            "replan {tick} robot={robot} blocked={},{} attempt={attempt} ok={ok}\n",
            blocked.row, blocked.col
        ));
    }

    pub fn wait(&mut self, tick: usize, robot: usize) {
        self.buf.push_str(&format!("wait {tick} robot={robot}\n"));
    }

    pub fn plan_failed(&mut self, iteration: usize, robot: usize) {
        self.buf
            .push_str(&format!("plan_failed {iteration} robot={robot}\n"));
    }

    pub fn budget_exhausted(&mut self, iteration: usize, tick: usize) {
        self.buf
            .push_str(&format!("budget_exhausted {iteration} tick={tick}\n"));
    }

    pub fn robot_end(&mut self, iteration: usize, robot: usize, cell: GridIndex, pose: &Pose) {
        self.buf.push_str(&format!(
            "robot_end {iteration} robot={robot} cell={},{} pose={}\n",
            cell.row,
            cell.col,
            fmt_pose(pose)
        ));
    }

    pub fn snapshot(&mut self, iteration: usize, file: &str) {
        self.buf
            .push_str(&format!("snapshot {iteration} file={file}\n"));
    }

    pub fn end_iteration(&mut self, iteration: usize, completion: f64, connectivity: bool) {
        self.buf.push_str(&format!(
            "end_iteration {iteration} completion={completion:.2} connectivity={connectivity}\n"
        ));
    }

    pub fn end_run(&mut self, iterations: usize, completion: f64) {
        self.buf.push_str(&format!(
            "end_run iterations={iterations} completion={completion:.2}\n"
        ));
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Per-iteration drawable content recovered from a trace.
#[derive(Debug, Default, Clone)]
pub struct IterationSketch {
    pub iteration: usize,
    pub representatives: Vec<Pose>,
    /// Per choosing robot: the chosen pose followed by its relay chain.
    pub chains: Vec<Vec<Pose>>,
    pub robot_poses: Vec<Pose>,
    pub snapshot: Option<String>,
}

#[derive(Debug, Default, Clone)]
pub struct ParsedTrace {
    pub source: Pose,
    pub resolution: f64,
    pub iterations: Vec<IterationSketch>,
}

/// Recover the renderable skeleton of a trace.
pub fn parse_trace(text: &str) -> Result<ParsedTrace> {
    let mut lines = text.lines();
    match lines.next() {
        Some("trace v1") => {}
        other => return Err(Error::Trace(format!("bad magic line {other:?}"))),
    }

    let mut parsed = ParsedTrace::default();
    let mut current: Option<IterationSketch> = None;

    for (no, line) in text.lines().enumerate().skip(1) {
        let line_no = no + 1;
        let mut words = line.split_whitespace();
        let Some(kind) = words.next() else { continue };
        let err = |msg: &str| Error::Trace(format!("line {line_no}: {msg}"));
        match kind {
            "source" => {
                let x = parse_float(words.next(), line_no)?;
                let y = parse_float(words.next(), line_no)?;
                parsed.source = Pose::xy(x, y);
            }
            "resolution" => parsed.resolution = parse_float(words.next(), line_no)?,
            "begin_iteration" => {
                if let Some(done) = current.take() {
                    parsed.iterations.push(done);
                }
                let iteration = words
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err("bad iteration"))?;
                current = Some(IterationSketch { iteration, ..Default::default() });
            }
            "frontiers" => {
                let sketch = current.as_mut().ok_or_else(|| err("frontiers outside iteration"))?;
                let _ = words.next();
                for field in words {
                    if let Some(reps) = field.strip_prefix("reps=") {
                        for item in reps.split(';').filter(|s| !s.is_empty()) {
                            let mut nums = item.split(',');
                            let x: f64 = nums
                                .next()
                                .and_then(|t| t.parse().ok())
                                .ok_or_else(|| err("bad rep x"))?;
                            let y: f64 = nums
                                .next()
                                .and_then(|t| t.parse().ok())
                                .ok_or_else(|| err("bad rep y"))?;
                            sketch.representatives.push(Pose::xy(x, y));
                        }
                    }
                }
            }
            "choice" => {
                let sketch = current.as_mut().ok_or_else(|| err("choice outside iteration"))?;
                let _ = words.next();
                let mut chain = Vec::new();
                let mut chosen = None;
                let mut is_default = false;
                for field in words {
                    if let Some(v) = field.strip_prefix("chosen=") {
                        chosen = parse_xy_pair(v);
                    } else if let Some(v) = field.strip_prefix("chain=") {
                        for item in v.split('|').filter(|s| !s.is_empty()) {
                            chain.extend(parse_xy_pair(item));
                        }
                    } else if field == "mode=Default" {
                        is_default = true;
                    }
                }
                if let Some(chosen) = chosen {
                    if !is_default {
                        let mut full = vec![chosen];
                        full.extend(chain);
                        sketch.chains.push(full);
                    }
                }
            }
            "robot_end" => {
                let sketch =
                    current.as_mut().ok_or_else(|| err("robot_end outside iteration"))?;
                for field in words {
                    if let Some(v) = field.strip_prefix("pose=") {
                        sketch
                            .robot_poses
                            .extend(parse_xy_pair(v));
                    }
                }
            }
            "snapshot" => {
                let sketch = current.as_mut().ok_or_else(|| err("snapshot outside iteration"))?;
                for field in words {
                    if let Some(v) = field.strip_prefix("file=") {
                        sketch.snapshot = Some(v.to_string());
                    }
                }
            }
            "end_iteration" => {
                if let Some(done) = current.take() {
                    parsed.iterations.push(done);
                }
            }
            _ => {}
        }
    }
    if let Some(done) = current.take() {
        parsed.iterations.push(done);
    }
    Ok(parsed)
}

fn parse_float(token: Option<&str>, line_no: usize) -> Result<f64> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Trace(format!("line {line_no}: expected a number")))
}

fn parse_xy_pair(v: &str) -> Option<Pose> {
    let mut nums = v.split(',');
    let x: f64 = nums.next()?.parse().ok()?;
    let y: f64 = nums.next()?.parse().ok()?;
    Some(Pose::xy(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_minimal_trace() {
        let mut w = TraceWriter::new();
        w.header("maps/test.world", 0.5, 2, 3.0, 7, &Pose::xy(1.25, 1.75));
        w.begin_iteration(1);
        w.frontiers(1, &[(Pose::xy(3.25, 0.75), 12), (Pose::xy(0.75, 3.25), 7)]);
        w.choice(
            1,
            0,
            ChoiceMode::Primary,
            &Pose::xy(3.25, 0.75),
            &[Pose::xy(2.25, 0.75)],
            Some(2.0),
        );
        w.choice(1, 1, ChoiceMode::Default, &Pose::xy(1.25, 1.75), &[], None);
        w.robot_end(1, 0, GridIndex::new(1, 6), &Pose::xy(3.25, 0.75));
        w.robot_end(1, 1, GridIndex::new(3, 2), &Pose::xy(1.25, 1.75));
        w.snapshot(1, "snapshots/iter_001.pgm");
        w.end_iteration(1, 43.21, true);
        w.end_run(1, 43.21);
        let text = w.finish();

        let parsed = parse_trace(&text).unwrap();
        assert_eq!(parsed.resolution, 0.5);
        assert_eq!(parsed.source, Pose::xy(1.25, 1.75));
        assert_eq!(parsed.iterations.len(), 1);
        let it = &parsed.iterations[0];
        assert_eq!(it.representatives.len(), 2);
        assert_eq!(it.chains.len(), 1, "Default choices draw no chain");
        assert_eq!(it.chains[0].len(), 2);
        assert_eq!(it.robot_poses.len(), 2);
        assert_eq!(it.snapshot.as_deref(), Some("snapshots/iter_001.pgm"));
    }

    #[test]
    fn rejects_foreign_text() {
        assert!(parse_trace("not a trace\n").is_err());
    }
}
