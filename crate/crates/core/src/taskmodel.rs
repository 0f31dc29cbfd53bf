//! Periodic task model: tasks, job expansion, densities, hyperperiod.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::rat::{format_rat, rats_lcm, JsonRat, Rat};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("task `{id}`: {message}")]
    InvalidTask { id: String, message: String },
    #[error("taskset: {0}")]
    InvalidTaskset(String),
    #[error("bad taskset file: {0}")]
    BadFile(String),
}

/// A periodic task. `work` is the minimum execution time in time units
/// (execution at full speed); cycle counts are recovered by multiplying
/// with the platform's maximum frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub work: Rat,
    pub deadline: Rat,
    pub period: Rat,
}

impl Task {
    pub fn new(
        id: impl Into<String>,
        work: Rat,
        deadline: Rat,
        period: Rat,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        let err = |message: &str| ModelError::InvalidTask {
            id: id.clone(),
            message: message.to_string(),
        };
        if work < Rat::zero() {
            return Err(err("work must be non-negative"));
        }
        if deadline <= Rat::zero() {
            return Err(err("deadline must be positive"));
        }
        if period <= Rat::zero() {
            return Err(err("period must be positive"));
        }
        Ok(Task {
            id,
            work,
            deadline,
            period,
        })
    }

    /// Execution-time density at speed `s`: `work / (s * min(deadline, period))`.
    ///
    /// Panics if `s <= 0`; callers validate speeds at the boundary.
    pub fn density(&self, s: Rat) -> Rat {
        assert!(s > Rat::zero(), "density requires a positive speed");
        let window = self.deadline.min(self.period);
        self.work / (s * window)
    }
}

/// One activation of a task: the j-th instance, j >= 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub task_index: usize,
    /// Instance number within the hyperperiod, starting at 1.
    pub instance: u32,
    pub arrival: Rat,
    pub absolute_deadline: Rat,
    pub work: Rat,
}

impl Job {
    pub fn label(&self, ts: &Taskset) -> String {
        format!("{}#{}", ts.tasks[self.task_index].id, self.instance)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taskset {
    pub name: String,
    pub tasks: Vec<Task>,
}

impl Taskset {
    pub fn new(name: impl Into<String>, tasks: Vec<Task>) -> Result<Self, ModelError> {
        if tasks.is_empty() {
            return Err(ModelError::InvalidTaskset("no tasks".to_string()));
        }
        for (i, a) in tasks.iter().enumerate() {
            for b in &tasks[i + 1..] {
                if a.id == b.id {
                    return Err(ModelError::InvalidTaskset(format!(
                        "duplicate task id `{}`",
                        a.id
                    )));
                }
            }
        }
        Ok(Taskset {
            name: name.into(),
            tasks,
        })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Least common multiple of all task periods.
    pub fn hyperperiod(&self) -> Rat {
        let periods: Vec<Rat> = self.tasks.iter().map(|t| t.period).collect();
        rats_lcm(&periods)
    }

    /// Sum of task densities at a common speed `s`.
    pub fn density(&self, s: Rat) -> Rat {
        self.tasks.iter().map(|t| t.density(s)).sum()
    }

    /// Taskset density at full speed, the quantity compared against the
    /// processor count for feasibility.
    pub fn minimum_density(&self) -> Rat {
        self.density(Rat::from_integer(1))
    }

    /// All jobs arriving within `[0, hyperperiod)`, ordered by (task, instance).
    pub fn expand_jobs(&self, hyperperiod: Rat) -> Vec<Job> {
        let mut jobs = Vec::new();
        for (task_index, task) in self.tasks.iter().enumerate() {
            let count = hyperperiod / task.period;
            debug_assert_eq!(*count.denom(), 1, "hyperperiod must be a period multiple");
            let count = *count.numer() as u32;
            for j in 1..=count {
                let arrival = Rat::from_integer((j - 1) as i128) * task.period;
                jobs.push(Job {
                    task_index,
                    instance: j,
                    arrival,
                    absolute_deadline: arrival + task.deadline,
                    work: task.work,
                });
            }
        }
        jobs
    }

    /// Scheduling horizon: the hyperperiod, extended when an
    /// arbitrary-deadline job's window crosses it. No arrivals occur
    /// after the hyperperiod.
    pub fn horizon(&self) -> Rat {
        let hp = self.hyperperiod();
        let max_deadline = self
            .expand_jobs(hp)
            .iter()
            .map(|j| j.absolute_deadline)
            .max()
            .unwrap_or(hp);
        hp.max(max_deadline)
    }

    pub fn feasibility_check(&self, m: u32) -> FeasibilityReport {
        assert!(m >= 1);
        let total = self.minimum_density();
        let mut violations = Vec::new();
        let one = Rat::from_integer(1);
        for task in &self.tasks {
            let d = task.density(one);
            if d > one {
                violations.push(format!(
                    "task `{}` has density {} > 1 at full speed; no single processor window can hold it",
                    task.id,
                    format_rat(&d),
                ));
            }
        }
        if total > Rat::from_integer(m as i128) {
            violations.push(format!(
                "taskset density D = {} exceeds the processor count m = {}; D <= m is required for a valid schedule",
                format_rat(&total),
                m
            ));
        }
        FeasibilityReport {
            total_density: total,
            m,
            violations,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub total_density: Rat,
    pub m: u32,
    pub violations: Vec<String>,
}

impl FeasibilityReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct TasksetFile {
    name: String,
    tasks: Vec<TaskFile>,
}

#[derive(Serialize, Deserialize)]
struct TaskFile {
    id: String,
    work: JsonRat,
    deadline: JsonRat,
    period: JsonRat,
}

impl Taskset {
    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let file: TasksetFile =
            serde_json::from_str(text).map_err(|e| ModelError::BadFile(e.to_string()))?;
        let tasks = file
            .tasks
            .into_iter()
            .map(|t| Task::new(t.id, t.work.0, t.deadline.0, t.period.0))
            .collect::<Result<Vec<_>, _>>()?;
        Taskset::new(file.name, tasks)
    }

    pub fn to_json_string(&self) -> String {
        let file = TasksetFile {
            name: self.name.clone(),
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskFile {
                    id: t.id.clone(),
                    work: JsonRat(t.work),
                    deadline: JsonRat(t.deadline),
                    period: JsonRat(t.period),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("taskset serialization")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat, rat_int};

    fn task(id: &str, work: Rat, d: Rat, p: Rat) -> Task {
        Task::new(id, work, d, p).unwrap()
    }

    fn simple_set(specs: &[(&str, Rat, Rat, Rat)]) -> Taskset {
        Taskset::new(
            "test",
            specs
                .iter()
                .map(|(id, w, d, p)| task(id, *w, *d, *p))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hyperperiod_of_table_periods() {
        let ts = simple_set(&[
            ("t1", rat(3, 4), rat_int(5), rat_int(10)),
            ("t2", rat(3, 4), rat_int(5), rat_int(10)),
            ("t3", rat(1, 2), rat_int(10), rat_int(10)),
            ("t4", rat(1, 2), rat_int(10), rat_int(10)),
        ]);
        // periods {10,10,10,10}; mixed 5 and 10 below
        assert_eq!(ts.hyperperiod(), rat_int(10));
        let ts = simple_set(&[
            ("a", rat_int(1), rat_int(5), rat_int(5)),
            ("b", rat_int(1), rat_int(10), rat_int(10)),
        ]);
        assert_eq!(ts.hyperperiod(), rat_int(10));
    }

    #[test]
    fn hyperperiod_single_task() {
        let ts = simple_set(&[("only", rat_int(1), rat_int(7), rat_int(7))]);
        assert_eq!(ts.hyperperiod(), rat_int(7));
    }

    #[test]
    fn hyperperiod_fractional_periods() {
        let ts = simple_set(&[
            ("a", rat_int(1), rat(3, 2), rat(3, 2)),
            ("b", rat_int(1), rat_int(2), rat_int(2)),
        ]);
        let hp = ts.hyperperiod();
        assert_eq!(hp, rat_int(6));
        // brute force over multiples of 1/2: no smaller valid L
        let mut k = rat(1, 2);
        while k < hp {
            let q1 = k / rat(3, 2);
            let q2 = k / rat_int(2);
            assert!(
                *q1.denom() != 1 || *q2.denom() != 1,
                "found smaller common multiple {k}"
            );
            k += rat(1, 2);
        }
    }

    #[test]
    fn density_examples() {
        let t = task("t", rat(3, 4), rat_int(5), rat_int(10));
        assert_eq!(t.density(rat_int(1)), rat(3, 20)); // 0.15
        let t = task("t", rat_int(1), rat_int(1), rat_int(1));
        assert_eq!(t.density(rat_int(1)), rat_int(1));
        let t = task("t", rat_int(1), rat_int(4), rat_int(2));
        assert_eq!(t.density(rat(1, 2)), rat_int(1));
    }

    #[test]
    #[should_panic]
    fn density_rejects_nonpositive_speed() {
        let t = task("t", rat_int(1), rat_int(1), rat_int(1));
        t.density(rat_int(0));
    }

    #[test]
    fn density_times_speed_is_invariant() {
        let t = task("t", rat(7, 3), rat_int(4), rat_int(6));
        for s in [rat(1, 4), rat(1, 2), rat(3, 4), rat_int(1)] {
            assert_eq!(t.density(s) * s, t.density(rat_int(1)));
        }
    }

    #[test]
    fn taskset_density_rows() {
        // Table-style row with D = 0.4
        let ts = simple_set(&[
            ("t1", rat(3, 4), rat_int(5), rat_int(10)),
            ("t2", rat(3, 4), rat_int(5), rat_int(10)),
            ("t3", rat(1, 2), rat_int(10), rat_int(10)),
            ("t4", rat(1, 2), rat_int(10), rat_int(10)),
        ]);
        assert_eq!(ts.minimum_density(), rat(2, 5));
        // row with D = 2.0
        let ts = simple_set(&[
            ("t1", rat_int(4), rat_int(5), rat_int(10)),
            ("t2", rat_int(4), rat_int(5), rat_int(10)),
            ("t3", rat_int(2), rat_int(10), rat_int(10)),
            ("t4", rat_int(2), rat_int(10), rat_int(10)),
        ]);
        assert_eq!(ts.minimum_density(), rat_int(2));
        let ts = simple_set(&[("t", rat_int(1), rat_int(10), rat_int(10))]);
        assert_eq!(ts.minimum_density(), rat(1, 10));
    }

    #[test]
    fn density_monotone_in_tasks() {
        let mut tasks = vec![task("a", rat(1, 2), rat_int(5), rat_int(5))];
        let d0 = Taskset::new("x", tasks.clone()).unwrap().minimum_density();
        tasks.push(task("b", rat(1, 4), rat_int(10), rat_int(10)));
        let d1 = Taskset::new("x", tasks).unwrap().minimum_density();
        assert!(d1 >= d0);
    }

    #[test]
    fn expand_jobs_counts_and_windows() {
        let ts = simple_set(&[
            ("a", rat_int(1), rat_int(5), rat_int(5)),
            ("b", rat_int(1), rat_int(10), rat_int(10)),
        ]);
        let jobs = ts.expand_jobs(rat_int(10));
        assert_eq!(jobs.len(), 3);
        assert_eq!(jobs[0].arrival, rat_int(0));
        assert_eq!(jobs[1].arrival, rat_int(5));
        assert_eq!(jobs[1].absolute_deadline, rat_int(10));
        assert_eq!(jobs[2].arrival, rat_int(0));
        assert_eq!(jobs[2].absolute_deadline, rat_int(10));
        // consecutive arrivals of one task differ by exactly the period
        assert_eq!(jobs[1].arrival - jobs[0].arrival, rat_int(5));
    }

    #[test]
    fn arbitrary_deadline_job_crosses_hyperperiod() {
        let ts = simple_set(&[("a", rat_int(1), rat_int(4), rat_int(2))]);
        let jobs = ts.expand_jobs(rat_int(2));
        assert_eq!(jobs.len(), 1);
        assert_eq!(jobs[0].absolute_deadline, rat_int(4));
        assert_eq!(ts.horizon(), rat_int(4));
    }

    #[test]
    fn feasibility_pass_and_fail() {
        let row20 = simple_set(&[
            ("t1", rat_int(4), rat_int(5), rat_int(10)),
            ("t2", rat_int(4), rat_int(5), rat_int(10)),
            ("t3", rat_int(2), rat_int(10), rat_int(10)),
            ("t4", rat_int(2), rat_int(10), rat_int(10)),
        ]);
        assert!(row20.feasibility_check(2).passes());

        let single = simple_set(&[("t", rat_int(2), rat_int(1), rat_int(1))]);
        let report = single.feasibility_check(4);
        assert!(!report.passes());
        assert!(report.violations[0].contains("density"));

        // scale the D = 2.0 row by 1.025 -> D = 2.05 > m = 2
        let scaled = simple_set(&[
            ("t1", rat_int(4) * rat(41, 40), rat_int(5), rat_int(10)),
            ("t2", rat_int(4) * rat(41, 40), rat_int(5), rat_int(10)),
            ("t3", rat_int(2) * rat(41, 40), rat_int(10), rat_int(10)),
            ("t4", rat_int(2) * rat(41, 40), rat_int(10), rat_int(10)),
        ]);
        assert_eq!(scaled.minimum_density(), rat(41, 20));
        assert!(!scaled.feasibility_check(2).passes());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{
            "name": "demo",
            "tasks": [
                {"id": "t1", "work": "3/4", "deadline": 5, "period": 10},
                {"id": "t2", "work": 0.5, "deadline": 10, "period": 10}
            ]
        }"#;
        let ts = Taskset::from_json_str(text).unwrap();
        assert_eq!(ts.tasks[0].work, rat(3, 4));
        assert_eq!(ts.tasks[1].work, rat(1, 2));
        let back = Taskset::from_json_str(&ts.to_json_string()).unwrap();
        assert_eq!(back, ts);
    }

    #[test]
    fn rejects_duplicate_ids() {
        let tasks = vec![
            task("x", rat_int(1), rat_int(2), rat_int(2)),
            task("x", rat_int(1), rat_int(2), rat_int(2)),
        ];
        assert!(Taskset::new("dup", tasks).is_err());
    }
}
