//! Branch-and-bound over active schedules.
//!
//! Each node extends a partial serial schedule: an eligible task (all
//! predecessors placed) is put at its earliest precedence- and
//! resource-feasible start. Fixed tasks are placed before the search starts
//! and never move. Every active schedule is produced by exactly one list in
//! which the placements are non-decreasing in `(start, topological rank)`,
//! so branches that would break that order are skipped. The optimum and the
//! lexicographically smallest optimal start vector are both active, so the
//! enumeration stays exact.

use std::time::Instant;

use crate::model::{FixedAssignments, Instance, TaskId, Time};

use super::SolveConfig;

pub(crate) struct Outcome {
    pub best: Option<Vec<Time>>,
    pub nodes: u64,
    pub aborted: bool,
}

pub(crate) struct Search<'a> {
    inst: &'a Instance,
    cfg: &'a SolveConfig,
    started: Instant,
    n: usize,
    horizon: Time,
    pred: Vec<Vec<TaskId>>,
    succ: Vec<Vec<TaskId>>,
    topo: Vec<TaskId>,
    rank: Vec<usize>,
    /// Longest path from a task's start to the end dummy's start.
    tail: Vec<Time>,
    /// Latest start allowed by the horizon and fixed successors.
    latest: Vec<i64>,
    fixed: Vec<Option<Time>>,
    start: Vec<Option<Time>>,
    /// `usage[r][t]` of placed tasks.
    usage: Vec<Vec<u32>>,
    unplaced: usize,
    best: Option<(Time, Vec<Time>)>,
    nodes: u64,
    aborted: bool,
    infeasible: bool,
}

impl<'a> Search<'a> {
    pub fn new(inst: &'a Instance, fixed: &FixedAssignments, cfg: &'a SolveConfig, started: Instant) -> Self {
        let n = inst.task_count();
        let topo = inst.topological_order().expect("validated instance is acyclic");
        let mut rank = vec![0; n];
        for (k, &j) in topo.iter().enumerate() {
            rank[j] = k;
        }
        let pred = inst.predecessor_lists();
        let succ = inst.successor_lists();
        let mut tail = vec![0 as Time; n];
        for &j in topo.iter().rev() {
            let after = succ[j].iter().map(|&s| tail[s]).max().unwrap_or(0);
            tail[j] = inst.duration(j) + after;
        }
        let mut fixed_vec = vec![None; n];
        for (j, t) in fixed.iter() {
            fixed_vec[j] = Some(t);
        }
        fixed_vec[0] = Some(0);

        let horizon = inst.horizon();
        let mut latest = vec![0i64; n];
        for &j in topo.iter().rev() {
            let p = inst.duration(j) as i64;
            let mut l = horizon as i64 - p;
            for &s in &succ[j] {
                l = l.min(latest[s] - p);
            }
            if let Some(t) = fixed_vec[j] {
                l = l.min(t as i64);
            }
            latest[j] = l;
        }

        let m = inst.resources().len();
        let mut search = Search {
            inst,
            cfg,
            started,
            n,
            horizon,
            pred,
            succ,
            topo,
            rank,
            tail,
            latest,
            fixed: fixed_vec.clone(),
            start: vec![None; n],
            usage: vec![vec![0; horizon as usize]; m],
            unplaced: n,
            best: None,
            nodes: 0,
            aborted: false,
            infeasible: false,
        };
        for (j, t) in fixed_vec.iter().enumerate() {
            if let Some(t) = *t {
                if !search.fits(j, t) {
                    search.infeasible = true;
                }
                search.place(j, t);
            }
        }
        if !search.fixed_precedences_hold() {
            search.infeasible = true;
        }
        search
    }

    pub fn run(mut self) -> Outcome {
        if !self.infeasible {
            self.dfs(None);
        }
        Outcome {
            best: self.best.map(|(_, s)| s),
            nodes: self.nodes,
            aborted: self.aborted,
        }
    }

    fn fixed_precedences_hold(&self) -> bool {
        for j in 0..self.n {
            let Some(tj) = self.fixed[j] else { continue };
            if (tj as i64) > self.latest[j] {
                return false;
            }
            for &s in &self.succ[j] {
                if let Some(ts) = self.fixed[s] {
                    if ts < tj + self.inst.duration(j) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn fits(&self, j: TaskId, t: Time) -> bool {
        let p = self.inst.duration(j);
        if t + p > self.horizon {
            return false;
        }
        self.inst.requirement_row(j).iter().enumerate().all(|(r, &u)| {
            u == 0
                || self.usage[r][t as usize..(t + p) as usize]
                    .iter()
                    .all(|&used| used + u <= self.inst.capacity(r))
        })
    }

    fn place(&mut self, j: TaskId, t: Time) {
        let p = self.inst.duration(j);
        for (r, &u) in self.inst.requirement_row(j).iter().enumerate() {
            if u > 0 {
                for cell in &mut self.usage[r][t as usize..(t + p) as usize] {
                    *cell += u;
                }
            }
        }
        self.start[j] = Some(t);
        self.unplaced -= 1;
    }

    fn unplace(&mut self, j: TaskId) {
        let t = self.start[j].take().expect("placed task");
        let p = self.inst.duration(j);
        for (r, &u) in self.inst.requirement_row(j).iter().enumerate() {
            if u > 0 {
                for cell in &mut self.usage[r][t as usize..(t + p) as usize] {
                    *cell -= u;
                }
            }
        }
        self.unplaced += 1;
    }

    /// Earliest resource-feasible start at or after `from`.
    fn earliest_fit(&self, j: TaskId, from: Time) -> Option<Time> {
        let p = self.inst.duration(j);
        let row = self.inst.requirement_row(j);
        let mut t = from;
        'outer: while t + p <= self.horizon {
            for (r, &u) in row.iter().enumerate() {
                if u == 0 {
                    continue;
                }
                let cap = self.inst.capacity(r);
                for tau in (t..t + p).rev() {
                    if self.usage[r][tau as usize] + u > cap {
                        t = tau + 1;
                        continue 'outer;
                    }
                }
            }
            return Some(t);
        }
        None
    }

    fn out_of_budget(&mut self) -> bool {
        if let Some(limit) = self.cfg.node_limit {
            if self.nodes > limit {
                self.aborted = true;
            }
        }
        if let Some(limit) = self.cfg.time_limit {
            if self.nodes.is_multiple_of(256) && self.started.elapsed() >= limit {
                self.aborted = true;
            }
        }
        self.aborted
    }

    fn record_leaf(&mut self) {
        let starts: Vec<Time> = self.start.iter().map(|s| s.expect("complete schedule")).collect();
        let makespan = starts[self.n - 1];
        let better = match &self.best {
            None => true,
            Some((m, s)) => (makespan, &starts) < (*m, s),
        };
        if better {
            self.best = Some((makespan, starts));
        }
    }

    /// `last` is the `(start, rank)` of the most recent list placement.
    fn dfs(&mut self, last: Option<(Time, usize)>) {
        self.nodes += 1;
        if self.out_of_budget() {
            return;
        }
        if self.unplaced == 0 {
            self.record_leaf();
            return;
        }
        let bound = self.best.as_ref().map(|(m, _)| *m);
        let last_start = last.map_or(0, |(t, _)| t);

        // Earliest starts of unplaced tasks given placed ones.
        let mut est = vec![0 as Time; self.n];
        for &j in &self.topo {
            let e = self.pred[j]
                .iter()
                .map(|&i| self.start[i].unwrap_or(est[i]) + self.inst.duration(i))
                .max()
                .unwrap_or(0);
            est[j] = self.start[j].unwrap_or(e);
        }
        for j in 0..self.n {
            if self.start[j].is_some() {
                continue;
            }
            let from = est[j].max(last_start);
            if from as i64 > self.latest[j] {
                return;
            }
            if let Some(m) = bound {
                if from + self.tail[j] > m {
                    return;
                }
            }
        }
        if !self.energy_fits(last_start, bound.unwrap_or(self.horizon)) {
            return;
        }

        for k in 0..self.topo.len() {
            let j = self.topo[k];
            if self.start[j].is_some() || self.pred[j].iter().any(|&i| self.start[i].is_none()) {
                continue;
            }
            let Some(t) = self.earliest_fit(j, est[j]) else {
                continue;
            };
            if last.is_some_and(|prev| (t, self.rank[j]) <= prev) {
                continue;
            }
            if t as i64 > self.latest[j] {
                continue;
            }
            if let Some(m) = self.best.as_ref().map(|(m, _)| *m) {
                if t + self.tail[j] > m {
                    continue;
                }
            }
            self.place(j, t);
            self.dfs(Some((t, self.rank[j])));
            self.unplace(j);
            if self.aborted {
                return;
            }
        }
    }

    /// Remaining work of unplaced tasks must fit in the free capacity of
    /// `[from, until)`.
    fn energy_fits(&self, from: Time, until: Time) -> bool {
        let until = until.min(self.horizon);
        for r in 0..self.inst.resources().len() {
            let need: u64 = (0..self.n)
                .filter(|&j| self.start[j].is_none())
                .map(|j| self.inst.requirement(j, r) as u64 * self.inst.duration(j) as u64)
                .sum();
            if need == 0 {
                continue;
            }
            let cap = self.inst.capacity(r) as u64;
            let free: u64 = (from..until.max(from))
                .map(|t| cap - self.usage[r][t as usize] as u64)
                .sum();
            if need > free {
                return false;
            }
        }
        true
    }
}
