//! The algorithm families: a time-indexed LP over discrete speed levels,
//! a dense-grid relaxation for continuous speeds, and the three
//! constant-speed baselines. Each returns a `WorkloadPlan` whose entries
//! are exact rationals, ready for McNaughton realization.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::lpcore::{self, CertifyReport, LpProblem, LpStatus, Relation};
use crate::optim::golden_min;
use crate::power::PowerModel;
use crate::rat::{rat_int, rat_to_f64, snap_unit, Rat};
use crate::taskmodel::{Job, Taskset};
use crate::timegrid::{build_major_grid, job_windows, JobWindow, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    LpDvfs,
    NlpDvfs,
    GpSvfs,
    GpNoDvfs,
    GpSDiscrete,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::LpDvfs,
        Algorithm::NlpDvfs,
        Algorithm::GpSvfs,
        Algorithm::GpNoDvfs,
        Algorithm::GpSDiscrete,
    ];

    pub fn needs_discrete_levels(self) -> bool {
        matches!(self, Algorithm::LpDvfs | Algorithm::GpSDiscrete)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        let s = match self {
            Algorithm::LpDvfs => "lp-dvfs",
            Algorithm::NlpDvfs => "nlp-dvfs",
            Algorithm::GpSvfs => "gp-svfs",
            Algorithm::GpNoDvfs => "gp-nodvfs",
            Algorithm::GpSDiscrete => "gp-sdiscrete",
        };
        f.write_str(s)
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lp-dvfs" => Ok(Algorithm::LpDvfs),
            "nlp-dvfs" => Ok(Algorithm::NlpDvfs),
            "gp-svfs" => Ok(Algorithm::GpSvfs),
            "gp-nodvfs" => Ok(Algorithm::GpNoDvfs),
            "gp-sdiscrete" => Ok(Algorithm::GpSDiscrete),
            other => Err(format!(
                "unknown algorithm `{other}` (expected lp-dvfs | nlp-dvfs | gp-svfs | gp-nodvfs | gp-sdiscrete)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleReason {
    /// A single job cannot fit its own window even at full speed.
    Window,
    /// The platform capacity (m processors) is exceeded.
    Capacity,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("infeasible ({reason:?}): {detail}")]
    Infeasible {
        reason: InfeasibleReason,
        detail: String,
    },
    #[error("LP solver failed: {0}")]
    Lp(#[from] lpcore::LpError),
    #[error("{0}")]
    Unsupported(String),
    #[error("grid construction failed: {0}")]
    Grid(#[from] crate::timegrid::GridError),
    #[error("plan repair failed: {0}")]
    Repair(String),
}

/// A taskset instantiated on a platform: jobs, grid and windows, shared
/// by every solver and by schedule realization.
#[derive(Debug, Clone)]
pub struct Instance {
    pub taskset: Taskset,
    pub m: u32,
    pub hyperperiod: Rat,
    pub horizon: Rat,
    pub jobs: Vec<Job>,
    pub grid: TimeGrid,
    pub windows: Vec<JobWindow>,
}

impl Instance {
    pub fn new(taskset: Taskset, m: u32) -> Result<Self, SolveError> {
        assert!(m >= 1);
        let hyperperiod = taskset.hyperperiod();
        let horizon = taskset.horizon();
        let jobs = taskset.expand_jobs(hyperperiod);
        let grid = build_major_grid(&jobs, horizon)?;
        let windows = job_windows(&jobs, &grid)?;
        Ok(Instance {
            taskset,
            m,
            hyperperiod,
            horizon,
            jobs,
            grid,
            windows,
        })
    }

    /// Window length of a job in time units (arrival to deadline).
    fn window_len(&self, job: usize) -> Rat {
        self.jobs[job].absolute_deadline - self.jobs[job].arrival
    }
}

/// One (speed, fraction) execution entry of a job within an interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanEntry {
    pub speed: Rat,
    pub fraction: Rat,
}

/// Per-job, per-interval execution fractions at given speeds. All values
/// are exact rationals; the completion equalities hold with equality.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadPlan {
    pub algorithm: Algorithm,
    pub m: u32,
    /// entries[job] maps interval index -> entries sorted by ascending speed.
    pub entries: Vec<BTreeMap<usize, Vec<PlanEntry>>>,
    /// Above-idle energy of the plan in mW * time-unit.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("plan invariant violated: {0}")]
pub struct PlanViolation(pub String);

impl WorkloadPlan {
    /// Exact invariant check: per-pair fraction sums, interval capacity,
    /// window confinement and work completion.
    pub fn check_invariants(&self, inst: &Instance) -> Result<(), PlanViolation> {
        let one = Rat::one();
        let cap = rat_int(self.m as i128);
        if self.entries.len() != inst.jobs.len() {
            return Err(PlanViolation("job count mismatch".to_string()));
        }
        let mut interval_totals: BTreeMap<usize, Rat> = BTreeMap::new();
        for (job, per_mu) in self.entries.iter().enumerate() {
            let mut work = Rat::zero();
            for (&mu, entries) in per_mu {
                if !inst.windows[job].contains(mu) {
                    return Err(PlanViolation(format!(
                        "job {job} has execution outside its window (interval {mu})"
                    )));
                }
                let mut pair_sum = Rat::zero();
                for e in entries {
                    if e.fraction < Rat::zero() || e.fraction > one {
                        return Err(PlanViolation(format!(
                            "job {job} interval {mu}: fraction outside [0,1]"
                        )));
                    }
                    if e.speed <= Rat::zero() || e.speed > one {
                        return Err(PlanViolation(format!(
                            "job {job} interval {mu}: speed outside (0,1]"
                        )));
                    }
                    pair_sum += e.fraction;
                    work += inst.grid.interval_len(mu) * e.speed * e.fraction;
                }
                if pair_sum > one {
                    return Err(PlanViolation(format!(
                        "job {job} interval {mu}: fractions sum to more than 1"
                    )));
                }
                *interval_totals.entry(mu).or_insert_with(Rat::zero) += pair_sum;
            }
            if work != inst.jobs[job].work {
                return Err(PlanViolation(format!(
                    "job {job}: delivered work {} != required {}",
                    work,
                    inst.jobs[job].work
                )));
            }
        }
        for (mu, total) in interval_totals {
            if total > cap {
                return Err(PlanViolation(format!(
                    "interval {mu}: total workload {total} exceeds capacity {cap}"
                )));
            }
        }
        Ok(())
    }

    /// Remaining-work trajectory of a job at the grid instants of its
    /// window (starts at the job's work, ends at zero).
    pub fn remaining_work(&self, inst: &Instance, job: usize) -> Vec<(usize, Rat)> {
        let window = &inst.windows[job];
        let mut x = inst.jobs[job].work;
        let mut out = vec![(window.first_interval, x)];
        for mu in window.intervals() {
            let executed: Rat = self.entries[job]
                .get(&mu)
                .map(|entries| {
                    entries
                        .iter()
                        .map(|e| inst.grid.interval_len(mu) * e.speed * e.fraction)
                        .sum()
                })
                .unwrap_or_else(Rat::zero);
            x -= executed;
            out.push((mu + 1, x));
        }
        out
    }

    /// Above-idle energy recomputed from the exact entries.
    pub fn recompute_objective(&self, inst: &Instance, pm: &PowerModel) -> f64 {
        let mut total = 0.0;
        for per_mu in &self.entries {
            for (&mu, entries) in per_mu {
                let dt = rat_to_f64(&inst.grid.interval_len(mu));
                for e in entries {
                    total += dt
                        * rat_to_f64(&e.fraction)
                        * pm.net_power(rat_to_f64(&e.speed));
                }
            }
        }
        total
    }

    /// Workload chunks of one interval in McNaughton packing order:
    /// ascending job index, descending speed within a job.
    pub fn interval_chunks(&self, inst: &Instance, mu: usize) -> Vec<(usize, Rat, Rat)> {
        let dt = inst.grid.interval_len(mu);
        let mut chunks = Vec::new();
        for (job, per_mu) in self.entries.iter().enumerate() {
            if let Some(entries) = per_mu.get(&mu) {
                for e in entries.iter().rev() {
                    if !e.fraction.is_zero() {
                        chunks.push((job, e.speed, e.fraction * dt));
                    }
                }
            }
        }
        chunks
    }
}

// ---------------------------------------------------------------------------
// Exact plan construction from float solver output
// ---------------------------------------------------------------------------

/// Turns float (speed, fraction) drafts into an exact rational plan:
/// fractions snap to the 1e-9 grid, the <=-constraints are re-established
/// exactly by trimming, and each job's completion equality is restored by
/// adjusting its chunks (fastest available entry first). `top_level` is
/// the speed used when extra work headroom must be created (the platform
/// top level for discrete plans, full speed for continuous ones).
fn exact_plan(
    inst: &Instance,
    draft: Vec<BTreeMap<usize, Vec<(Rat, f64)>>>,
    top_level: Rat,
) -> Result<Vec<BTreeMap<usize, Vec<PlanEntry>>>, SolveError> {
    let one = Rat::one();
    let cap = rat_int(inst.m as i128);

    // Snap to rationals, drop dust.
    let mut entries: Vec<BTreeMap<usize, Vec<PlanEntry>>> = draft
        .into_iter()
        .map(|per_mu| {
            per_mu
                .into_iter()
                .map(|(mu, list)| {
                    let mut snapped: Vec<PlanEntry> = list
                        .into_iter()
                        .map(|(speed, fraction)| PlanEntry {
                            speed,
                            fraction: snap_unit(fraction).min(one),
                        })
                        .filter(|e| !e.fraction.is_zero())
                        .collect();
                    snapped.sort_by(|a, b| a.speed.cmp(&b.speed));
                    (mu, snapped)
                })
                .collect()
        })
        .collect();

    // Per-pair cap: sum of fractions <= 1, trimming the fast end.
    for per_mu in entries.iter_mut() {
        for list in per_mu.values_mut() {
            let mut sum: Rat = list.iter().map(|e| e.fraction).sum();
            while sum > one {
                let excess = sum - one;
                let last = list.last_mut().expect("nonempty while sum positive");
                let cut = excess.min(last.fraction);
                last.fraction -= cut;
                sum -= cut;
                if last.fraction.is_zero() {
                    list.pop();
                }
            }
        }
    }

    // Interval capacity: total <= m, trimming later jobs first.
    let mut totals: BTreeMap<usize, Rat> = BTreeMap::new();
    for per_mu in &entries {
        for (&mu, list) in per_mu {
            let s: Rat = list.iter().map(|e| e.fraction).sum();
            *totals.entry(mu).or_insert_with(Rat::zero) += s;
        }
    }
    for (&mu, total) in totals.iter_mut() {
        let mut excess = *total - cap;
        if excess <= Rat::zero() {
            continue;
        }
        for per_mu in entries.iter_mut().rev() {
            if excess <= Rat::zero() {
                break;
            }
            if let Some(list) = per_mu.get_mut(&mu) {
                while excess > Rat::zero() {
                    let Some(last) = list.last_mut() else { break };
                    let cut = excess.min(last.fraction);
                    last.fraction -= cut;
                    excess -= cut;
                    *total -= cut;
                    if last.fraction.is_zero() {
                        list.pop();
                    }
                }
            }
        }
    }

    // Work completion, exactly.
    for job in 0..inst.jobs.len() {
        let target = inst.jobs[job].work;
        let delivered = |entries: &Vec<BTreeMap<usize, Vec<PlanEntry>>>| -> Rat {
            entries[job]
                .iter()
                .map(|(&mu, list)| {
                    let dt = inst.grid.interval_len(mu);
                    list.iter().map(|e| dt * e.speed * e.fraction).sum::<Rat>()
                })
                .sum()
        };
        let mut delta = target - delivered(&entries);

        if delta < Rat::zero() {
            // Remove surplus work, slowest entries of the latest intervals first.
            let mus: Vec<usize> = entries[job].keys().copied().rev().collect();
            'outer: for mu in mus {
                let dt = inst.grid.interval_len(mu);
                let list = entries[job].get_mut(&mu).unwrap();
                let mut idx = 0;
                while idx < list.len() {
                    if delta >= Rat::zero() {
                        break 'outer;
                    }
                    let e = &mut list[idx];
                    let removable = (-delta) / (dt * e.speed);
                    let cut = removable.min(e.fraction);
                    e.fraction -= cut;
                    delta += cut * dt * e.speed;
                    if e.fraction.is_zero() {
                        list.remove(idx);
                    } else {
                        idx += 1;
                    }
                }
            }
        } else if delta > Rat::zero() {
            // Add missing work where fraction and capacity headroom exist.
            let window: Vec<usize> = inst.windows[job].intervals().collect();
            for mu in window {
                if delta <= Rat::zero() {
                    break;
                }
                let dt = inst.grid.interval_len(mu);
                let interval_total: Rat = entries
                    .iter()
                    .map(|per_mu| {
                        per_mu
                            .get(&mu)
                            .map(|l| l.iter().map(|e| e.fraction).sum())
                            .unwrap_or_else(Rat::zero)
                    })
                    .sum();
                let list = entries[job].entry(mu).or_default();
                let pair_total: Rat = list.iter().map(|e| e.fraction).sum();
                let headroom = (one - pair_total).min(cap - interval_total);
                if headroom <= Rat::zero() {
                    continue;
                }
                // Fastest entry carries the correction; create a top-level
                // entry when the pair has none fast enough.
                if list.last().map(|e| e.speed) != Some(top_level) {
                    list.push(PlanEntry {
                        speed: top_level,
                        fraction: Rat::zero(),
                    });
                }
                let e = list.last_mut().unwrap();
                let add = (delta / (dt * e.speed)).min(headroom);
                e.fraction += add;
                delta -= add * dt * e.speed;
                if e.fraction.is_zero() {
                    list.pop();
                }
            }
            if delta > Rat::zero() {
                return Err(SolveError::Repair(format!(
                    "job {job}: missing work {delta} could not be placed"
                )));
            }
        }
        entries[job].retain(|_, list| !list.is_empty());
        for list in entries[job].values_mut() {
            list.sort_by(|a, b| a.speed.cmp(&b.speed));
        }
    }

    Ok(entries)
}

/// Merges level usage of interchangeable jobs (identical task parameters
/// and identical windows) so that earlier jobs absorb whole slow-speed
/// allocations. This shrinks the number of distinct chunks per interval,
/// which keeps the minor grids of the realized schedule small, without
/// changing interval level totals or the objective. Groups where the
/// greedy refill does not work out are left untouched.
fn consolidate_identical_jobs(inst: &Instance, plan: &mut WorkloadPlan) {
    let mut groups: BTreeMap<(String, usize, usize), Vec<usize>> = BTreeMap::new();
    for (idx, job) in inst.jobs.iter().enumerate() {
        let t = &inst.taskset.tasks[job.task_index];
        let key = (
            format!("{}|{}|{}|{}", t.work, t.deadline, t.period, job.arrival),
            inst.windows[idx].first_interval,
            inst.windows[idx].last_interval,
        );
        groups.entry(key).or_default().push(idx);
    }

    for jobs in groups.values() {
        if jobs.len() < 2 {
            continue;
        }
        // Pool per (speed, interval) the group's total fraction.
        let mut pool: BTreeMap<(Rat, usize), Rat> = BTreeMap::new();
        for &job in jobs {
            for (&mu, list) in &plan.entries[job] {
                for e in list {
                    *pool.entry((e.speed, mu)).or_insert_with(Rat::zero) += e.fraction;
                }
            }
        }
        // Refill greedily: each job takes the slowest available level
        // time until its work target is met.
        let one = Rat::one();
        let mut assigned: Vec<BTreeMap<usize, Vec<PlanEntry>>> =
            vec![BTreeMap::new(); jobs.len()];
        let mut ok = true;
        let mut remaining = pool.clone();
        for (slot, &job) in jobs.iter().enumerate() {
            let mut need = inst.jobs[job].work;
            let mut used: BTreeMap<usize, Rat> = BTreeMap::new();
            for ((speed, mu), avail) in remaining.iter_mut() {
                if need <= Rat::zero() {
                    break;
                }
                if avail.is_zero() {
                    continue;
                }
                let dt = inst.grid.interval_len(*mu);
                let pair_used = used.entry(*mu).or_insert_with(Rat::zero);
                let headroom = one - *pair_used;
                if headroom <= Rat::zero() {
                    continue;
                }
                let take = (need / (dt * *speed)).min(*avail).min(headroom);
                if take <= Rat::zero() {
                    continue;
                }
                *avail -= take;
                *pair_used += take;
                need -= take * dt * *speed;
                assigned[slot]
                    .entry(*mu)
                    .or_default()
                    .push(PlanEntry {
                        speed: *speed,
                        fraction: take,
                    });
            }
            if !need.is_zero() {
                ok = false;
                break;
            }
        }
        if ok && remaining.values().all(|v| v.is_zero()) {
            for (slot, &job) in jobs.iter().enumerate() {
                let mut per_mu = std::mem::take(&mut assigned[slot]);
                for list in per_mu.values_mut() {
                    list.sort_by(|a, b| a.speed.cmp(&b.speed));
                }
                plan.entries[job] = per_mu;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// LP-DVFS
// ---------------------------------------------------------------------------

struct LpLayout {
    /// var index -> (job, interval, level position)
    vars: Vec<(usize, usize, usize)>,
}

fn build_speed_lp(
    inst: &Instance,
    pm: &PowerModel,
    levels: &[Rat],
) -> (LpProblem, LpLayout) {
    let mut vars = Vec::new();
    let mut completion_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.jobs.len()];
    let mut pair_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut capacity_rows: Vec<Vec<(usize, f64)>> =
        vec![Vec::new(); inst.grid.interval_count()];
    for (job, window) in inst.windows.iter().enumerate() {
        for mu in window.intervals() {
            let mut pair = Vec::with_capacity(levels.len());
            for (q, level) in levels.iter().enumerate() {
                let v = vars.len();
                vars.push((job, mu, q));
                completion_rows[job]
                    .push((v, rat_to_f64(&(inst.grid.interval_len(mu) * *level))));
                pair.push((v, 1.0));
                capacity_rows[mu].push((v, 1.0));
            }
            pair_rows.push(pair);
        }
    }
    let mut p = LpProblem::new(vars.len());
    for (v, &(_, mu, q)) in vars.iter().enumerate() {
        let dt = rat_to_f64(&inst.grid.interval_len(mu));
        p.objective[v] = dt * pm.net_power(rat_to_f64(&levels[q]));
        p.upper[v] = 1.0;
    }
    for (job, coeffs) in completion_rows.into_iter().enumerate() {
        p.add_row(coeffs, Relation::Eq, rat_to_f64(&inst.jobs[job].work));
    }
    for coeffs in pair_rows {
        p.add_row(coeffs, Relation::Le, 1.0);
    }
    for coeffs in capacity_rows {
        if !coeffs.is_empty() {
            p.add_row(coeffs, Relation::Le, inst.m as f64);
        }
    }
    (p, LpLayout { vars })
}

fn diagnose_infeasible(inst: &Instance) -> SolveError {
    let one = Rat::one();
    for task in &inst.taskset.tasks {
        if task.density(one) > one {
            return SolveError::Infeasible {
                reason: InfeasibleReason::Window,
                detail: format!(
                    "task `{}` cannot finish inside its own window even at full speed",
                    task.id
                ),
            };
        }
    }
    SolveError::Infeasible {
        reason: InfeasibleReason::Capacity,
        detail: format!(
            "workload exceeds the capacity of m = {} processors in some interval",
            inst.m
        ),
    }
}

fn solve_speed_lp(
    inst: &Instance,
    pm: &PowerModel,
    levels: &[Rat],
) -> Result<Vec<BTreeMap<usize, Vec<(Rat, f64)>>>, SolveError> {
    let (p, layout) = build_speed_lp(inst, pm, levels);
    let sol = lpcore::solve_lp(&p)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(diagnose_infeasible(inst)),
        LpStatus::Unbounded => {
            return Err(SolveError::Lp(lpcore::LpError::Numerical(
                "speed-assignment LP cannot be unbounded".to_string(),
            )))
        }
    }
    let mut draft: Vec<BTreeMap<usize, Vec<(Rat, f64)>>> =
        vec![BTreeMap::new(); inst.jobs.len()];
    for (v, &(job, mu, q)) in layout.vars.iter().enumerate() {
        let a = sol.x[v];
        if a > 1e-12 {
            draft[job]
                .entry(mu)
                .or_default()
                .push((levels[q], a));
        }
    }
    Ok(draft)
}

/// Energy-optimal workload plan on a discrete speed-level platform.
pub fn solve_lp_dvfs(inst: &Instance, pm: &PowerModel) -> Result<WorkloadPlan, SolveError> {
    if !pm.is_discrete() {
        return Err(SolveError::Unsupported(
            "lp-dvfs needs a platform with discrete speed levels".to_string(),
        ));
    }
    let levels = pm.speed_levels.clone();
    let draft = solve_speed_lp(inst, pm, &levels)?;
    let top = *levels.last().expect("non-empty level set");
    let entries = exact_plan(inst, draft, top)?;
    let mut plan = WorkloadPlan {
        algorithm: Algorithm::LpDvfs,
        m: inst.m,
        entries,
        objective: 0.0,
    };
    consolidate_identical_jobs(inst, &mut plan);
    plan.objective = plan.recompute_objective(inst, pm);
    plan.check_invariants(inst)
        .map_err(|v| SolveError::Repair(v.0))?;
    Ok(plan)
}

/// Optimality certificate for the LP behind `solve_lp_dvfs`.
pub fn lp_dvfs_certificate(inst: &Instance, pm: &PowerModel) -> Result<CertifyReport, SolveError> {
    let (p, _) = build_speed_lp(inst, pm, &pm.speed_levels);
    let sol = lpcore::solve_lp(&p)?;
    if sol.status != LpStatus::Optimal {
        return Err(diagnose_infeasible(inst));
    }
    Ok(lpcore::certify(&p, &sol))
}

// ---------------------------------------------------------------------------
// NLP-DVFS by dense-grid relaxation
// ---------------------------------------------------------------------------

/// Continuous-speed plan: LP relaxation on a uniform speed grid, then a
/// per-(job, interval) merge into a single (fraction, speed) pair with
/// the same work. The merged speed is refined by golden-section over
/// `[mean speed, 1]`; staying at or above the mean speed keeps the
/// merged fraction no larger than the LP's, so per-job and capacity
/// bounds survive the merge, and by convexity of the power law the
/// merged energy never exceeds the LP's.
pub fn solve_nlp_dvfs(
    inst: &Instance,
    pm: &PowerModel,
    grid_levels: usize,
) -> Result<WorkloadPlan, SolveError> {
    if grid_levels < 2 {
        return Err(SolveError::Unsupported(
            "nlp-dvfs needs at least 2 grid levels".to_string(),
        ));
    }
    let s_min = pm.s_min;
    let span = Rat::one() - s_min;
    let steps = rat_int((grid_levels - 1) as i128);
    let levels: Vec<Rat> = (0..grid_levels)
        .map(|k| s_min + span * rat_int(k as i128) / steps)
        .collect();
    let draft = solve_speed_lp(inst, pm, &levels)?;

    let mut merged: Vec<BTreeMap<usize, Vec<(Rat, f64)>>> = vec![BTreeMap::new(); inst.jobs.len()];
    for (job, per_mu) in draft.into_iter().enumerate() {
        for (mu, list) in per_mu {
            let dt = rat_to_f64(&inst.grid.interval_len(mu));
            let total_fraction: f64 = list.iter().map(|&(_, a)| a).sum();
            let work: f64 = list
                .iter()
                .map(|&(s, a)| rat_to_f64(&s) * a * dt)
                .sum();
            if work <= 1e-12 || total_fraction <= 1e-12 {
                continue;
            }
            let mean_speed = (work / (dt * total_fraction)).clamp(rat_to_f64(&s_min), 1.0);
            let per_work_energy = |s: f64| pm.net_power(s) / s;
            let (mut s_star, f_star) = golden_min(per_work_energy, mean_speed, 1.0, 1e-9);
            // Equal-energy ties go to the larger speed (shorter busy time).
            if per_work_energy(1.0) <= f_star + 1e-12 * (1.0 + f_star.abs()) {
                s_star = 1.0;
            }
            let fraction = work / (dt * s_star);
            merged[job].entry(mu).or_default().push((
                snap_speed_at_least(s_star, mean_speed),
                fraction,
            ));
        }
    }

    let entries = exact_plan(inst, merged, Rat::one())?;
    let mut plan = WorkloadPlan {
        algorithm: Algorithm::NlpDvfs,
        m: inst.m,
        entries,
        objective: 0.0,
    };
    consolidate_identical_jobs(inst, &mut plan);
    plan.objective = plan.recompute_objective(inst, pm);
    plan.check_invariants(inst)
        .map_err(|v| SolveError::Repair(v.0))?;
    Ok(plan)
}

/// Snap a merged speed to the 1e-9 grid without dropping below the mean
/// speed that guarantees fraction feasibility.
fn snap_speed_at_least(s: f64, floor: f64) -> Rat {
    let snapped = snap_unit(s).min(Rat::one());
    let floor_up = {
        let scaled = (floor * 1e9).ceil() as i128;
        Rat::new(scaled, 1_000_000_000)
    };
    snapped.max(floor_up).min(Rat::one())
}

// ---------------------------------------------------------------------------
// Constant-speed baselines
// ---------------------------------------------------------------------------

/// Static workload split: per-processor constant speeds, per-(task,
/// processor) density shares, and for the discrete variant the workload
/// fractions behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticAllocation {
    pub algorithm: Algorithm,
    pub m: u32,
    pub processor_speeds: Vec<Rat>,
    /// shares[task][proc]: density carried by `proc` for `task`.
    pub shares: Vec<Vec<Rat>>,
    /// Discrete variant only: workload fraction y of each task on each
    /// processor.
    pub workload_fractions: Option<Vec<Vec<Rat>>>,
    /// Static-model energy over the hyperperiod, mW * time-unit.
    pub objective: f64,
}

fn feasible_speed_floor(inst: &Instance) -> Result<Rat, SolveError> {
    let one = Rat::one();
    let density = inst.taskset.minimum_density();
    let cap = rat_int(inst.m as i128);
    let max_task_density = inst
        .taskset
        .tasks
        .iter()
        .map(|t| t.density(one))
        .max()
        .expect("non-empty taskset");
    if max_task_density > one {
        return Err(SolveError::Infeasible {
            reason: InfeasibleReason::Window,
            detail: "a task has density above 1 at full speed".to_string(),
        });
    }
    if density > cap {
        return Err(SolveError::Infeasible {
            reason: InfeasibleReason::Capacity,
            detail: format!(
                "taskset density {density} exceeds processor count {}",
                inst.m
            ),
        });
    }
    Ok(max_task_density.max(density / cap))
}

/// McNaughton-style filling of task densities across processors at a
/// common speed. shares[task][proc].
fn fill_shares(inst: &Instance, speed: Rat) -> Vec<Vec<Rat>> {
    let one = Rat::one();
    let mut shares = vec![vec![Rat::zero(); inst.m as usize]; inst.taskset.len()];
    let mut proc = 0usize;
    let mut level = Rat::zero(); // filled amount of current processor
    for (i, task) in inst.taskset.tasks.iter().enumerate() {
        let mut remaining = task.density(speed);
        while remaining > Rat::zero() && proc < inst.m as usize {
            let room = one - level;
            let put = remaining.min(room);
            shares[i][proc] += put;
            remaining -= put;
            level += put;
            if level == one {
                proc += 1;
                level = Rat::zero();
            }
        }
        debug_assert!(remaining.is_zero(), "fill exceeded platform capacity");
    }
    shares
}

fn svfs_energy(inst: &Instance, pm: &PowerModel, s: f64) -> f64 {
    let density = rat_to_f64(&inst.taskset.minimum_density());
    rat_to_f64(&inst.hyperperiod) * density / s * pm.net_power(s)
}

/// Single constant speed for all processors, chosen on the feasible
/// range by golden-section over the static energy model. A flat
/// objective resolves to the lowest feasible speed.
pub fn solve_gp_svfs(inst: &Instance, pm: &PowerModel) -> Result<StaticAllocation, SolveError> {
    let floor = feasible_speed_floor(inst)?.max(pm.s_min);
    if floor > Rat::one() {
        return Err(SolveError::Infeasible {
            reason: InfeasibleReason::Capacity,
            detail: "no feasible constant speed at or below full speed".to_string(),
        });
    }
    let lo = rat_to_f64(&floor);
    let (s_star, f_star) = golden_min(|s| svfs_energy(inst, pm, s), lo, 1.0, 1e-9);
    let f_lo = svfs_energy(inst, pm, lo);
    let speed = if f_lo <= f_star + 1e-12 * (1.0 + f_star.abs()) {
        floor
    } else {
        snap_speed_at_least(s_star, lo)
    };
    let shares = fill_shares(inst, speed);
    Ok(StaticAllocation {
        algorithm: Algorithm::GpSvfs,
        m: inst.m,
        processor_speeds: vec![speed; inst.m as usize],
        shares,
        workload_fractions: None,
        objective: svfs_energy(inst, pm, rat_to_f64(&speed)),
    })
}

/// Workload split at full speed, no frequency scaling.
pub fn solve_gp_nodvfs(inst: &Instance, pm: &PowerModel) -> Result<StaticAllocation, SolveError> {
    feasible_speed_floor(inst)?;
    let one = Rat::one();
    let shares = fill_shares(inst, one);
    Ok(StaticAllocation {
        algorithm: Algorithm::GpNoDvfs,
        m: inst.m,
        processor_speeds: vec![one; inst.m as usize],
        shares,
        workload_fractions: None,
        objective: svfs_energy(inst, pm, 1.0),
    })
}

/// Advance a non-decreasing index tuple to the next level multiset.
fn next_level_multiset(assignment: &mut [usize], level_count: usize) -> bool {
    for pos in (0..assignment.len()).rev() {
        if assignment[pos] + 1 < level_count {
            let v = assignment[pos] + 1;
            for a in assignment.iter_mut().skip(pos) {
                *a = v;
            }
            return true;
        }
    }
    false
}

/// One discrete speed level per processor plus a workload split:
/// enumerate level multisets (processors are interchangeable), solve the
/// inner workload LP for each, keep the best feasible assignment.
pub fn solve_gp_sdiscrete(
    inst: &Instance,
    pm: &PowerModel,
) -> Result<StaticAllocation, SolveError> {
    if !pm.is_discrete() {
        return Err(SolveError::Unsupported(
            "gp-sdiscrete needs a platform with discrete speed levels".to_string(),
        ));
    }
    let levels = &pm.speed_levels;
    let m = inst.m as usize;
    if (levels.len() as f64).powi(m as i32) > 1e6 {
        return Err(SolveError::Unsupported(format!(
            "level enumeration too large: {}^{m}",
            levels.len()
        )));
    }
    let n = inst.taskset.len();
    let hp = rat_to_f64(&inst.hyperperiod);
    let one = Rat::one();

    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut assignment = vec![0usize; m]; // non-decreasing level indices
    loop {
        // Inner LP over y[task][proc].
        let mut p = LpProblem::new(n * m);
        let var = |i: usize, k: usize| i * m + k;
        let density: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..m)
                    .map(|k| rat_to_f64(&inst.taskset.tasks[i].density(levels[assignment[k]])))
                    .collect()
            })
            .collect();
        for i in 0..n {
            for k in 0..m {
                let s = rat_to_f64(&levels[assignment[k]]);
                p.objective[var(i, k)] = hp * density[i][k] * pm.net_power(s);
                p.upper[var(i, k)] = 1.0;
            }
        }
        for i in 0..n {
            p.add_row((0..m).map(|k| (var(i, k), 1.0)).collect(), Relation::Eq, 1.0);
            p.add_row(
                (0..m).map(|k| (var(i, k), density[i][k])).collect(),
                Relation::Le,
                1.0,
            );
        }
        for k in 0..m {
            p.add_row(
                (0..n).map(|i| (var(i, k), density[i][k])).collect(),
                Relation::Le,
                1.0,
            );
        }
        let sol = lpcore::solve_lp(&p)?;
        if sol.status == LpStatus::Optimal {
            let better = match &best {
                Some((obj, _, _)) => sol.objective < obj - 1e-12,
                None => true,
            };
            if better {
                best = Some((sol.objective, assignment.clone(), sol.x.clone()));
            }
        }

        if !next_level_multiset(&mut assignment, levels.len()) {
            break;
        }
    }

    let Some((objective, level_idx, y)) = best else {
        return Err(SolveError::Infeasible {
            reason: InfeasibleReason::Capacity,
            detail: "no speed-level assignment admits a feasible workload split".to_string(),
        });
    };

    // Exact workload fractions: snap, then restore sum_k y = 1 on the
    // largest entry of each task.
    let mut fractions = vec![vec![Rat::zero(); m]; n];
    for i in 0..n {
        for k in 0..m {
            fractions[i][k] = snap_unit(y[i * m + k]).min(one);
        }
        let sum: Rat = fractions[i].iter().copied().sum();
        let deficit = one - sum;
        if !deficit.is_zero() {
            let main = (0..m)
                .max_by_key(|&k| fractions[i][k])
                .expect("m >= 1");
            fractions[i][main] += deficit;
        }
    }
    let speeds: Vec<Rat> = level_idx.iter().map(|&q| levels[q]).collect();
    let shares: Vec<Vec<Rat>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|k| fractions[i][k] * inst.taskset.tasks[i].density(speeds[k]))
                .collect()
        })
        .collect();
    Ok(StaticAllocation {
        algorithm: Algorithm::GpSDiscrete,
        m: inst.m,
        processor_speeds: speeds,
        shares,
        workload_fractions: Some(fractions),
        objective,
    })
}

/// Turns a static allocation into a per-interval plan: each job runs at
/// its task's per-processor speeds for the constant in-window rate that
/// completes its work by the deadline. For constrained deadlines this
/// uses less energy than the static model charges (the model prices
/// densities over the whole hyperperiod), which is exactly the gap the
/// time-indexed formulations exploit.
pub fn induced_plan(
    alloc: &StaticAllocation,
    inst: &Instance,
    pm: &PowerModel,
) -> Result<WorkloadPlan, SolveError> {
    let mut draft: Vec<BTreeMap<usize, Vec<(Rat, f64)>>> = vec![BTreeMap::new(); inst.jobs.len()];
    for (job_idx, job) in inst.jobs.iter().enumerate() {
        if job.work.is_zero() {
            continue;
        }
        let window_len = inst.window_len(job_idx);
        let task = job.task_index;
        for (k, speed) in alloc.processor_speeds.iter().enumerate() {
            // Work carried by processor k for this task's jobs.
            let weight = match &alloc.workload_fractions {
                Some(y) => y[task][k],
                None => {
                    let total: Rat = alloc.shares[task].iter().copied().sum();
                    if total.is_zero() {
                        continue;
                    }
                    alloc.shares[task][k] / total
                }
            };
            if weight.is_zero() {
                continue;
            }
            let fraction = weight * job.work / (window_len * *speed);
            for mu in inst.windows[job_idx].intervals() {
                draft[job_idx]
                    .entry(mu)
                    .or_default()
                    .push((*speed, rat_to_f64(&fraction)));
            }
        }
    }
    let top = alloc
        .processor_speeds
        .iter()
        .max()
        .copied()
        .unwrap_or_else(Rat::one);
    let entries = exact_plan(inst, draft, top)?;
    let mut plan = WorkloadPlan {
        algorithm: alloc.algorithm,
        m: inst.m,
        entries,
        objective: 0.0,
    };
    plan.objective = plan.recompute_objective(inst, pm);
    plan.check_invariants(inst)
        .map_err(|v| SolveError::Repair(v.0))?;
    Ok(plan)
}

/// Solve with any algorithm and return an executable plan (baselines go
/// through their induced plans).
pub fn solve_plan(
    inst: &Instance,
    pm: &PowerModel,
    algorithm: Algorithm,
    grid_levels: usize,
) -> Result<WorkloadPlan, SolveError> {
    match algorithm {
        Algorithm::LpDvfs => solve_lp_dvfs(inst, pm),
        Algorithm::NlpDvfs => solve_nlp_dvfs(inst, pm, grid_levels),
        Algorithm::GpSvfs => induced_plan(&solve_gp_svfs(inst, pm)?, inst, pm),
        Algorithm::GpNoDvfs => induced_plan(&solve_gp_nodvfs(inst, pm)?, inst, pm),
        Algorithm::GpSDiscrete => induced_plan(&solve_gp_sdiscrete(inst, pm)?, inst, pm),
    }
}

/// The algorithm's reported objective: the LP/NLP plan energy, or the
/// static-model energy for the baselines.
pub fn solve_objective(
    inst: &Instance,
    pm: &PowerModel,
    algorithm: Algorithm,
    grid_levels: usize,
) -> Result<f64, SolveError> {
    match algorithm {
        Algorithm::LpDvfs => Ok(solve_lp_dvfs(inst, pm)?.objective),
        Algorithm::NlpDvfs => Ok(solve_nlp_dvfs(inst, pm, grid_levels)?.objective),
        Algorithm::GpSvfs => Ok(solve_gp_svfs(inst, pm)?.objective),
        Algorithm::GpNoDvfs => Ok(solve_gp_nodvfs(inst, pm)?.objective),
        Algorithm::GpSDiscrete => Ok(solve_gp_sdiscrete(inst, pm)?.objective),
    }
}
