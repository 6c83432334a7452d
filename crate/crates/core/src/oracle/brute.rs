//! Exhaustive multi-dimensional assignment.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

/// Largest number of feasible assignments the enumerator will visit.
pub const MAX_FEASIBLE: usize = 1_000_000;
/// Feasible assignments are listed individually only up to this count.
pub const MAX_LISTED: usize = 100_000;

/// Feasibility rules: which slot of each frame, if any, is a virtual candidate
/// that may be used any number of times. Every other candidate is used exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraints {
    pub virtual_slots: Vec<Option<usize>>,
}

impl Constraints {
    pub fn exact(frames: usize) -> Self {
        Self { virtual_slots: vec![None; frames] }
    }
}

/// A full assignment: the selected trajectories, sorted.
pub type Assignment = Vec<Vec<usize>>;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult<T> {
    pub best_assignment: Assignment,
    pub best_value: T,
    /// Feasible assignments whose value ties the best within `1e-12` relative.
    pub tie_count: usize,
    pub feasible_count: usize,
    pub all_values: Option<Vec<(Assignment, T)>>,
}

/// Sum of `c` over the given trajectories.
pub fn objective<T: Scalar>(c: &DenseTensor<T>, trajectories: &[Vec<usize>]) -> T {
    trajectories.iter().map(|t| c.get(t)).sum()
}

struct Search<'a, T> {
    c: &'a DenseTensor<T>,
    virtual_slots: &'a [Option<usize>],
    covered: Vec<Vec<bool>>,
    chosen: Vec<Vec<usize>>,
    feasible: Vec<(Assignment, T)>,
    count: usize,
    overflow: bool,
    keep_all: bool,
    best: Option<(Assignment, T)>,
}

impl<T: Scalar> Search<'_, T> {
    fn is_virtual(&self, k: usize, i: usize) -> bool {
        self.virtual_slots[k] == Some(i)
    }

    fn first_uncovered(&self) -> Option<(usize, usize)> {
        for (k, row) in self.covered.iter().enumerate() {
            for (i, &done) in row.iter().enumerate() {
                if !done && !self.is_virtual(k, i) {
                    return Some((k, i));
                }
            }
        }
        None
    }

    fn run(&mut self) {
        if self.overflow {
            return;
        }
        let Some((pk, pi)) = self.first_uncovered() else {
            self.record();
            return;
        };
        let frames = self.covered.len();
        let mut traj = vec![0usize; frames];
        traj[pk] = pi;
        self.fill(0, pk, &mut traj);
    }

    fn fill(&mut self, k: usize, pivot: usize, traj: &mut Vec<usize>) {
        if self.overflow {
            return;
        }
        if k == traj.len() {
            for (f, &i) in traj.iter().enumerate() {
                if !self.is_virtual(f, i) {
                    self.covered[f][i] = true;
                }
            }
            self.chosen.push(traj.clone());
            self.run();
            self.chosen.pop();
            for (f, &i) in traj.iter().enumerate() {
                if !self.is_virtual(f, i) {
                    self.covered[f][i] = false;
                }
            }
            return;
        }
        if k == pivot {
            self.fill(k + 1, pivot, traj);
            return;
        }
        for i in 0..self.covered[k].len() {
            if self.covered[k][i] && !self.is_virtual(k, i) {
                continue;
            }
            traj[k] = i;
            self.fill(k + 1, pivot, traj);
        }
    }

    fn record(&mut self) {
        self.count += 1;
        if self.count > MAX_FEASIBLE {
            self.overflow = true;
            return;
        }
        let mut assignment = self.chosen.clone();
        assignment.sort();
        let value = objective(self.c, &assignment);
        let better = match &self.best {
            None => true,
            Some((best_a, best_v)) => value > *best_v || (value == *best_v && assignment < *best_a),
        };
        if self.keep_all {
            self.feasible.push((assignment.clone(), value));
            if self.feasible.len() > MAX_LISTED {
                self.keep_all = false;
                self.feasible.clear();
            }
        }
        if better {
            self.best = Some((assignment, value));
        }
    }
}

/// Enumerates every assignment satisfying `constraints` and returns the one
/// maximizing the summed affinity, ties broken by lexicographic order of the
/// sorted trajectory list.
pub fn brute_force_mda<T: Scalar>(c: &DenseTensor<T>, constraints: &Constraints) -> Result<BruteForceResult<T>> {
    let sizes = c.shape();
    if constraints.virtual_slots.len() != sizes.len() {
        return Err(Error::Contract("constraints must name one virtual slot option per frame".into()));
    }
    let mut search = Search {
        c,
        virtual_slots: &constraints.virtual_slots,
        covered: sizes.iter().map(|&n| vec![false; n]).collect(),
        chosen: Vec::new(),
        feasible: Vec::new(),
        count: 0,
        overflow: false,
        keep_all: true,
        best: None,
    };
    search.run();
    if search.overflow {
        return Err(Error::SizeGuard(format!("more than {MAX_FEASIBLE} feasible assignments for sizes {sizes:?}")));
    }
    let Some((best_assignment, best_value)) = search.best.take() else {
        return Err(Error::Contract(format!("no feasible assignment for sizes {sizes:?}")));
    };
    let tol = T::lit(1e-12) * best_value.abs().max(T::one());
    let all_values = search.keep_all.then(|| std::mem::take(&mut search.feasible));
    let tie_count = match &all_values {
        Some(list) => list.iter().filter(|(_, v)| (*v - best_value).abs() <= tol).count(),
        None => 1,
    };
    Ok(BruteForceResult { best_assignment, best_value, tie_count, feasible_count: search.count, all_values })
}
