//! Deadline-partitioned time structure: the major grid and job windows.
//!
//! The major grid collects every distinct job arrival and absolute
//! deadline, so within one interval the set of alive jobs is constant.

use std::collections::BTreeSet;

use num_traits::Zero;

use crate::rat::{format_rat, Rat};
use crate::taskmodel::Job;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeGrid {
    /// Strictly increasing instants, first 0, last = horizon.
    instants: Vec<Rat>,
}

impl TimeGrid {
    pub fn instants(&self) -> &[Rat] {
        &self.instants
    }

    /// Number of intervals (N).
    pub fn interval_count(&self) -> usize {
        self.instants.len() - 1
    }

    pub fn horizon(&self) -> Rat {
        *self.instants.last().expect("grid has at least two instants")
    }

    /// Interval `mu` as half-open `[start, end)`.
    pub fn interval(&self, mu: usize) -> (Rat, Rat) {
        (self.instants[mu], self.instants[mu + 1])
    }

    pub fn interval_len(&self, mu: usize) -> Rat {
        self.instants[mu + 1] - self.instants[mu]
    }

    fn index_of(&self, t: &Rat) -> Option<usize> {
        self.instants.binary_search(t).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GridError {
    #[error("job instant {0} not on the major grid (internal consistency failure)")]
    InstantNotOnGrid(String),
    #[error("horizon {horizon} is smaller than the latest deadline {deadline}")]
    HorizonTooShort { horizon: String, deadline: String },
}

/// Builds the major grid: `{0, horizon}` plus all job arrivals and deadlines,
/// deduplicated and sorted. Simultaneous arrival/deadline instants merge
/// into one grid point, so zero-length intervals cannot occur.
pub fn build_major_grid(jobs: &[Job], horizon: Rat) -> Result<TimeGrid, GridError> {
    let mut set = BTreeSet::new();
    set.insert(Rat::zero());
    set.insert(horizon);
    for job in jobs {
        if job.absolute_deadline > horizon {
            return Err(GridError::HorizonTooShort {
                horizon: format_rat(&horizon),
                deadline: format_rat(&job.absolute_deadline),
            });
        }
        set.insert(job.arrival);
        set.insert(job.absolute_deadline);
    }
    Ok(TimeGrid {
        instants: set.into_iter().collect(),
    })
}

/// A job's alive span on the grid: the contiguous run of intervals from
/// its arrival to its deadline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobWindow {
    pub job_index: usize,
    /// Index of the interval whose start is the job arrival.
    pub first_interval: usize,
    /// Index of the interval whose end is the job deadline.
    pub last_interval: usize,
}

impl JobWindow {
    pub fn intervals(&self) -> std::ops::RangeInclusive<usize> {
        self.first_interval..=self.last_interval
    }

    pub fn contains(&self, mu: usize) -> bool {
        (self.first_interval..=self.last_interval).contains(&mu)
    }
}

pub fn job_windows(jobs: &[Job], grid: &TimeGrid) -> Result<Vec<JobWindow>, GridError> {
    jobs.iter()
        .enumerate()
        .map(|(job_index, job)| {
            let first = grid
                .index_of(&job.arrival)
                .ok_or_else(|| GridError::InstantNotOnGrid(format_rat(&job.arrival)))?;
            let last = grid
                .index_of(&job.absolute_deadline)
                .ok_or_else(|| GridError::InstantNotOnGrid(format_rat(&job.absolute_deadline)))?;
            debug_assert!(first < last);
            Ok(JobWindow {
                job_index,
                first_interval: first,
                last_interval: last - 1,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat_int, Rat};
    use crate::taskmodel::{Task, Taskset};

    fn set(specs: &[(&str, i128, i128, i128)]) -> Taskset {
        Taskset::new(
            "grid-test",
            specs
                .iter()
                .map(|(id, w, d, p)| {
                    Task::new(*id, rat_int(*w), rat_int(*d), rat_int(*p)).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn table_row_grid_has_two_intervals() {
        let ts = set(&[
            ("t1", 1, 5, 10),
            ("t2", 1, 5, 10),
            ("t3", 1, 10, 10),
            ("t4", 1, 10, 10),
        ]);
        let jobs = ts.expand_jobs(ts.hyperperiod());
        let grid = build_major_grid(&jobs, ts.horizon()).unwrap();
        assert_eq!(grid.instants(), &[rat_int(0), rat_int(5), rat_int(10)]);
        assert_eq!(grid.interval_count(), 2);
    }

    #[test]
    fn single_task_grid() {
        let ts = set(&[("t", 1, 10, 10)]);
        let jobs = ts.expand_jobs(ts.hyperperiod());
        let grid = build_major_grid(&jobs, ts.horizon()).unwrap();
        assert_eq!(grid.instants(), &[rat_int(0), rat_int(10)]);
        assert_eq!(grid.interval_count(), 1);
    }

    #[test]
    fn constrained_deadline_inserts_instant() {
        let ts = set(&[("t", 1, 3, 5)]);
        let jobs = ts.expand_jobs(ts.hyperperiod());
        let grid = build_major_grid(&jobs, ts.horizon()).unwrap();
        assert_eq!(grid.instants(), &[rat_int(0), rat_int(3), rat_int(5)]);
    }

    #[test]
    fn grid_lengths_sum_to_horizon() {
        let ts = set(&[("a", 1, 3, 6), ("b", 1, 4, 4), ("c", 1, 12, 12)]);
        let jobs = ts.expand_jobs(ts.hyperperiod());
        let grid = build_major_grid(&jobs, ts.horizon()).unwrap();
        let total: Rat = (0..grid.interval_count()).map(|mu| grid.interval_len(mu)).sum();
        assert_eq!(total, ts.horizon());
        for w in grid.instants().windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn windows_cover_alive_intervals_only() {
        let ts = set(&[("a", 1, 5, 10), ("b", 1, 10, 10)]);
        let jobs = ts.expand_jobs(ts.hyperperiod());
        let grid = build_major_grid(&jobs, ts.horizon()).unwrap();
        let windows = job_windows(&jobs, &grid).unwrap();
        // a#1 alive in interval 0 only; b#1 alive in both
        assert_eq!(windows[0].intervals().collect::<Vec<_>>(), vec![0]);
        assert_eq!(windows[1].intervals().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn second_instance_window() {
        let ts = set(&[("a", 1, 5, 5), ("b", 1, 10, 10)]);
        let jobs = ts.expand_jobs(ts.hyperperiod());
        let grid = build_major_grid(&jobs, ts.horizon()).unwrap();
        let windows = job_windows(&jobs, &grid).unwrap();
        // a#2 arrives at 5: interval index 1 only
        assert_eq!(jobs[1].arrival, rat_int(5));
        assert_eq!(windows[1].intervals().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn dead_time_after_constrained_deadline() {
        let ts = set(&[("a", 1, 3, 5)]);
        let jobs = ts.expand_jobs(ts.hyperperiod());
        let grid = build_major_grid(&jobs, ts.horizon()).unwrap();
        let windows = job_windows(&jobs, &grid).unwrap();
        assert_eq!(windows[0].intervals().collect::<Vec<_>>(), vec![0]);
        assert!(!windows[0].contains(1));
    }

    #[test]
    fn no_job_instant_strictly_inside_an_interval() {
        let ts = set(&[("a", 1, 4, 8), ("b", 1, 8, 8), ("c", 1, 2, 4)]);
        let jobs = ts.expand_jobs(ts.hyperperiod());
        let grid = build_major_grid(&jobs, ts.horizon()).unwrap();
        for job in &jobs {
            for t in [job.arrival, job.absolute_deadline] {
                assert!(grid.instants().contains(&t));
            }
        }
    }
}
