//! Executable schedules: McNaughton wrap-around realization of workload
//! plans, validation against the fluid scheduling constraints, and
//! materialization of feasible minor-grid points.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::formulations::{Instance, WorkloadPlan};
use crate::power::PowerModel;
use crate::rat::{format_rat, parse_rat, rat, rat_to_f64, JsonRat, Rat};

/// A contiguous run of one job on one processor at one speed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    /// Processor, 1-based.
    pub proc: u32,
    pub job_index: usize,
    pub speed: Rat,
    pub start: Rat,
    pub end: Rat,
}

impl Segment {
    pub fn duration(&self) -> Rat {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub m: u32,
    pub horizon: Rat,
    /// Sorted by (proc, start).
    pub segments: Vec<Segment>,
}

impl Schedule {
    pub fn segments_on(&self, proc: u32) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(move |s| s.proc == proc)
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RealizeError {
    #[error("interval {mu}: workload {load} exceeds capacity {cap}")]
    Capacity { mu: usize, load: String, cap: String },
    #[error("interval {mu}: job {job} busy time {len} exceeds the interval length {dt}")]
    JobOverfull {
        mu: usize,
        job: usize,
        len: String,
        dt: String,
    },
    #[error("bad schedule file: {0}")]
    BadFile(String),
}

/// Packing statistics of one realized interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalStats {
    pub mu: usize,
    /// Chunks laid out (non-zero plan entries).
    pub chunks: usize,
    /// Chunks split across a processor boundary; each split is one migration.
    pub splits: usize,
}

/// McNaughton's wrap-around packing of one interval: chunks are laid
/// end-to-end along a number line of length m * dt in (job, descending
/// speed) order; a chunk crossing a processor boundary is split into a
/// tail on processor k and a head on processor k+1. Per-job totals never
/// exceed dt, so the two pieces of a split chunk cannot overlap in time.
pub fn mcnaughton_interval(
    chunks: &[(usize, Rat, Rat)],
    m: u32,
    interval_start: Rat,
    dt: Rat,
) -> Result<(Vec<Segment>, usize), RealizeError> {
    let capacity = rat_int_local(m as i128) * dt;
    let total: Rat = chunks.iter().map(|c| c.2).sum();
    if total > capacity {
        return Err(RealizeError::Capacity {
            mu: usize::MAX,
            load: format_rat(&total),
            cap: format_rat(&capacity),
        });
    }
    let mut per_job: BTreeMap<usize, Rat> = BTreeMap::new();
    for &(job, _, len) in chunks {
        *per_job.entry(job).or_insert_with(Rat::zero) += len;
    }
    if let Some((job, len)) = per_job.iter().find(|(_, len)| **len > dt) {
        return Err(RealizeError::JobOverfull {
            mu: usize::MAX,
            job: *job,
            len: format_rat(len),
            dt: format_rat(&dt),
        });
    }

    let mut segments = Vec::new();
    let mut splits = 0usize;
    let mut pos = Rat::zero();
    for &(job, speed, len) in chunks {
        if len.is_zero() {
            continue;
        }
        let end = pos + len;
        let k = (pos / dt).floor().to_integer() as u32; // 0-based processor
        let proc_end = rat_int_local((k + 1) as i128) * dt;
        if end <= proc_end {
            segments.push(Segment {
                proc: k + 1,
                job_index: job,
                speed,
                start: interval_start + (pos - rat_int_local(k as i128) * dt),
                end: interval_start + (end - rat_int_local(k as i128) * dt),
            });
        } else {
            splits += 1;
            segments.push(Segment {
                proc: k + 1,
                job_index: job,
                speed,
                start: interval_start + (pos - rat_int_local(k as i128) * dt),
                end: interval_start + dt,
            });
            segments.push(Segment {
                proc: k + 2,
                job_index: job,
                speed,
                start: interval_start,
                end: interval_start + (end - proc_end),
            });
        }
        pos = end;
    }
    Ok((segments, splits))
}

fn rat_int_local(n: i128) -> Rat {
    Rat::from_integer(n)
}

/// Realize a workload plan as an executable schedule by concatenating
/// per-interval McNaughton packings. Adjacent same-speed runs of a job
/// on the same processor merge across interval boundaries.
pub fn realize(plan: &WorkloadPlan, inst: &Instance) -> Result<Schedule, RealizeError> {
    Ok(realize_with_stats(plan, inst)?.0)
}

pub fn realize_with_stats(
    plan: &WorkloadPlan,
    inst: &Instance,
) -> Result<(Schedule, Vec<IntervalStats>), RealizeError> {
    let mut segments = Vec::new();
    let mut stats = Vec::new();
    for mu in 0..inst.grid.interval_count() {
        let chunks = plan.interval_chunks(inst, mu);
        let (start, _) = inst.grid.interval(mu);
        let dt = inst.grid.interval_len(mu);
        let (mut segs, splits) =
            mcnaughton_interval(&chunks, plan.m, start, dt).map_err(|e| match e {
                RealizeError::Capacity { load, cap, .. } => {
                    RealizeError::Capacity { mu, load, cap }
                }
                RealizeError::JobOverfull { job, len, dt, .. } => {
                    RealizeError::JobOverfull { mu, job, len, dt }
                }
                other => other,
            })?;
        stats.push(IntervalStats {
            mu,
            chunks: chunks.len(),
            splits,
        });
        segments.append(&mut segs);
    }
    segments.sort_by(|a, b| (a.proc, a.start).cmp(&(b.proc, b.start)));
    // Merge contiguous same-job same-speed runs.
    let mut merged: Vec<Segment> = Vec::with_capacity(segments.len());
    for seg in segments {
        match merged.last_mut() {
            Some(last)
                if last.proc == seg.proc
                    && last.job_index == seg.job_index
                    && last.speed == seg.speed
                    && last.end == seg.start =>
            {
                last.end = seg.end;
            }
            _ => merged.push(seg),
        }
    }
    Ok((
        Schedule {
            m: plan.m,
            horizon: inst.horizon,
            segments: merged,
        },
        stats,
    ))
}

/// Validation against the continuous-time scheduling constraints: window
/// containment and completed work per job, single-processor occupancy,
/// no intra-job parallelism, and platform speed bounds/levels.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(
    schedule: &Schedule,
    inst: &Instance,
    pm: &PowerModel,
    m: u32,
) -> ValidationReport {
    let mut violations = Vec::new();
    let one = Rat::one();
    let completion_tol = rat(1, 1_000_000);

    for seg in &schedule.segments {
        let label = |inst: &Instance| inst.jobs[seg.job_index].label(&inst.taskset);
        if seg.proc == 0 || seg.proc > m {
            violations.push(format!(
                "segment of {} uses processor {} outside 1..={m}",
                label(inst),
                seg.proc
            ));
        }
        if seg.end <= seg.start {
            violations.push(format!("empty or reversed segment of {}", label(inst)));
        }
        if seg.start < Rat::zero() || seg.end > schedule.horizon {
            violations.push(format!("segment of {} leaves [0, horizon]", label(inst)));
        }
        if seg.job_index >= inst.jobs.len() {
            violations.push(format!("segment references unknown job {}", seg.job_index));
            continue;
        }
        let job = &inst.jobs[seg.job_index];
        if seg.start < job.arrival {
            violations.push(format!(
                "(3b) release: {} starts at {} before its arrival {}",
                label(inst),
                format_rat(&seg.start),
                format_rat(&job.arrival)
            ));
        }
        if seg.end > job.absolute_deadline {
            violations.push(format!(
                "(3c) deadline: {} runs until {} past its deadline {}",
                label(inst),
                format_rat(&seg.end),
                format_rat(&job.absolute_deadline)
            ));
        }
        if pm.is_discrete() {
            if !pm.speed_levels.contains(&seg.speed) {
                violations.push(format!(
                    "(3g) speed: {} uses {} which is not a platform level",
                    label(inst),
                    format_rat(&seg.speed)
                ));
            }
        } else if seg.speed < pm.s_min || seg.speed > one {
            violations.push(format!(
                "(3g) speed: {} uses {} outside [s_min, 1]",
                label(inst),
                format_rat(&seg.speed)
            ));
        }
    }

    // (3e): each processor runs at most one job at a time.
    for proc in 1..=m {
        let mut segs: Vec<&Segment> = schedule.segments_on(proc).collect();
        segs.sort_by_key(|s| s.start);
        for pair in segs.windows(2) {
            if pair[1].start < pair[0].end {
                violations.push(format!(
                    "(3e) processor overlap: processor {proc} runs {} and {} concurrently",
                    inst.jobs[pair[0].job_index].label(&inst.taskset),
                    inst.jobs[pair[1].job_index].label(&inst.taskset),
                ));
            }
        }
    }

    // (3d): a job never runs on two processors at once.
    let mut by_job: BTreeMap<usize, Vec<&Segment>> = BTreeMap::new();
    for seg in &schedule.segments {
        by_job.entry(seg.job_index).or_default().push(seg);
    }
    for (job, mut segs) in by_job {
        segs.sort_by_key(|s| s.start);
        for pair in segs.windows(2) {
            if pair[1].start < pair[0].end {
                violations.push(format!(
                    "(3d) parallelism: {} runs on processors {} and {} concurrently",
                    inst.jobs[job].label(&inst.taskset),
                    pair[0].proc,
                    pair[1].proc
                ));
            }
        }
    }

    // (3b)+(3c): delivered work matches the job's execution requirement.
    for (job_index, job) in inst.jobs.iter().enumerate() {
        let delivered: Rat = schedule
            .segments
            .iter()
            .filter(|s| s.job_index == job_index)
            .map(|s| s.duration() * s.speed)
            .sum();
        if (delivered - job.work).abs() > completion_tol {
            violations.push(format!(
                "(3b/3c) work completion: {} delivered {} of required {}",
                job.label(&inst.taskset),
                format_rat(&delivered),
                format_rat(&job.work)
            ));
        }
    }

    ValidationReport { violations }
}

// ---------------------------------------------------------------------------
// Minor-grid point materialization
// ---------------------------------------------------------------------------

/// A feasible point of the minor-grid formulation distilled from a
/// schedule: per major interval a variable-step minor grid with binary
/// processor assignments and per-slot speeds.
#[derive(Debug, Clone)]
pub struct MinlpPoint {
    /// Per major interval: the minor instants (first = interval start,
    /// last = interval end).
    pub minor_instants: Vec<Vec<Rat>>,
    /// Per major interval, per slot: active (proc, job, speed) triples.
    pub assignments: Vec<Vec<Vec<(u32, usize, Rat)>>>,
}

impl MinlpPoint {
    /// Largest per-interval slot count (the M the point needs).
    pub fn max_steps(&self) -> usize {
        self.minor_instants
            .iter()
            .map(|v| v.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct MinlpReport {
    pub steps_per_interval: Vec<usize>,
    pub max_steps: usize,
    pub violations: Vec<String>,
}

impl MinlpReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Collect the distinct segment endpoints inside each major interval as
/// the minor grid, mark which (job, processor) pairs cover each slot,
/// rebuild the remaining-work recursion, and verify every constraint of
/// the minor-grid formulation.
pub fn minlp_point(
    schedule: &Schedule,
    inst: &Instance,
    pm: &PowerModel,
) -> (MinlpPoint, MinlpReport) {
    let n_intervals = inst.grid.interval_count();
    let mut minor_instants: Vec<Vec<Rat>> = Vec::with_capacity(n_intervals);
    let mut assignments: Vec<Vec<Vec<(u32, usize, Rat)>>> = Vec::with_capacity(n_intervals);
    let mut violations = Vec::new();

    for mu in 0..n_intervals {
        let (lo, hi) = inst.grid.interval(mu);
        let mut cuts: BTreeSet<Rat> = BTreeSet::new();
        cuts.insert(lo);
        cuts.insert(hi);
        for seg in &schedule.segments {
            for t in [seg.start, seg.end] {
                if t > lo && t < hi {
                    cuts.insert(t);
                }
            }
        }
        let instants: Vec<Rat> = cuts.into_iter().collect();
        let mut slots: Vec<Vec<(u32, usize, Rat)>> = vec![Vec::new(); instants.len() - 1];
        for seg in &schedule.segments {
            if seg.end <= lo || seg.start >= hi {
                continue;
            }
            for (nu, w) in instants.windows(2).enumerate() {
                if seg.start <= w[0] && seg.end >= w[1] {
                    slots[nu].push((seg.proc, seg.job_index, seg.speed));
                }
            }
        }
        minor_instants.push(instants);
        assignments.push(slots);
    }

    // (6i)-(6j): positive steps summing to the interval length.
    for mu in 0..n_intervals {
        let instants = &minor_instants[mu];
        let mut sum = Rat::zero();
        for w in instants.windows(2) {
            let h = w[1] - w[0];
            if h <= Rat::zero() {
                violations.push(format!("interval {mu}: non-positive minor step"));
            }
            sum += h;
        }
        if sum != inst.grid.interval_len(mu) {
            violations.push(format!(
                "interval {mu}: minor steps sum to {} instead of {}",
                format_rat(&sum),
                format_rat(&inst.grid.interval_len(mu))
            ));
        }
    }

    // (6e)/(6f)/(6g): per-slot assignment discipline and speed bounds.
    let one = Rat::one();
    for (mu, slots) in assignments.iter().enumerate() {
        for (nu, slot) in slots.iter().enumerate() {
            let mut procs = BTreeSet::new();
            let mut jobs = BTreeSet::new();
            for &(proc, job, speed) in slot {
                if !procs.insert(proc) {
                    violations.push(format!(
                        "interval {mu} slot {nu}: processor {proc} assigned twice"
                    ));
                }
                if !jobs.insert(job) {
                    violations.push(format!(
                        "interval {mu} slot {nu}: job {job} on more than one processor"
                    ));
                }
                if speed < pm.s_min || speed > one {
                    violations.push(format!(
                        "interval {mu} slot {nu}: speed {} outside [s_min, 1]",
                        format_rat(&speed)
                    ));
                }
            }
        }
    }

    // (6a)-(6c): remaining-work recursion hits zero at every deadline.
    let tol = rat(1, 1_000_000);
    for (job_index, job) in inst.jobs.iter().enumerate() {
        let mut x = job.work;
        let window = &inst.windows[job_index];
        for mu in window.intervals() {
            for (nu, w) in minor_instants[mu].windows(2).enumerate() {
                let h = w[1] - w[0];
                let rate: Rat = assignments[mu][nu]
                    .iter()
                    .filter(|&&(_, j, _)| j == job_index)
                    .map(|&(_, _, s)| s)
                    .sum();
                x -= h * rate;
            }
        }
        if x.abs() > tol {
            violations.push(format!(
                "job {}: remaining work {} at the deadline",
                job.label(&inst.taskset),
                format_rat(&x)
            ));
        }
    }

    let point = MinlpPoint {
        minor_instants,
        assignments,
    };
    let steps_per_interval: Vec<usize> = point
        .minor_instants
        .iter()
        .map(|v| v.len() - 1)
        .collect();
    let report = MinlpReport {
        max_steps: point.max_steps(),
        steps_per_interval,
        violations,
    };
    (point, report)
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ScheduleFile {
    m: u32,
    horizon: String,
    segments: Vec<SegmentFile>,
}

#[derive(Serialize, Deserialize)]
struct SegmentFile {
    proc: u32,
    task: String,
    job: u32,
    speed: JsonRat,
    start: String,
    end: String,
}

/// Schedule JSON: exact rational endpoints as "num/den" strings.
pub fn schedule_to_json(schedule: &Schedule, inst: &Instance) -> String {
    let file = ScheduleFile {
        m: schedule.m,
        horizon: format_rat(&schedule.horizon),
        segments: schedule
            .segments
            .iter()
            .map(|s| {
                let job = &inst.jobs[s.job_index];
                SegmentFile {
                    proc: s.proc,
                    task: inst.taskset.tasks[job.task_index].id.clone(),
                    job: job.instance,
                    speed: JsonRat(s.speed),
                    start: format_rat(&s.start),
                    end: format_rat(&s.end),
                }
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("schedule serialization")
}

pub fn schedule_from_json(text: &str, inst: &Instance) -> Result<Schedule, RealizeError> {
    let file: ScheduleFile =
        serde_json::from_str(text).map_err(|e| RealizeError::BadFile(e.to_string()))?;
    let horizon = parse_rat(&file.horizon).map_err(|e| RealizeError::BadFile(e.to_string()))?;
    let mut segments = Vec::with_capacity(file.segments.len());
    for seg in file.segments {
        let job_index = inst
            .jobs
            .iter()
            .position(|j| {
                inst.taskset.tasks[j.task_index].id == seg.task && j.instance == seg.job
            })
            .ok_or_else(|| {
                RealizeError::BadFile(format!("unknown job {}#{}", seg.task, seg.job))
            })?;
        segments.push(Segment {
            proc: seg.proc,
            job_index,
            speed: seg.speed.0,
            start: parse_rat(&seg.start).map_err(|e| RealizeError::BadFile(e.to_string()))?,
            end: parse_rat(&seg.end).map_err(|e| RealizeError::BadFile(e.to_string()))?,
        });
    }
    segments.sort_by(|a, b| (a.proc, a.start).cmp(&(b.proc, b.start)));
    Ok(Schedule {
        m: file.m,
        horizon,
        segments,
    })
}

/// One CSV row per segment for external plotting.
pub fn gantt_csv(schedule: &Schedule, inst: &Instance) -> String {
    let mut out = String::from("proc,task,job,speed,start,end\n");
    for s in &schedule.segments {
        let job = &inst.jobs[s.job_index];
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.proc,
            inst.taskset.tasks[job.task_index].id,
            job.instance,
            rat_to_f64(&s.speed),
            rat_to_f64(&s.start),
            rat_to_f64(&s.end),
        ));
    }
    out
}
