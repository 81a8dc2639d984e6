//! Random small instances for oracle comparisons and property tests.

use rand::Rng;

use crate::model::{FixedAssignments, Instance, Resource, ResourceId, Time};

#[derive(Debug, Clone)]
pub struct GeneratorParams {
    pub min_tasks: usize,
    pub max_tasks: usize,
    pub resources: usize,
    pub min_capacity: u32,
    pub max_capacity: u32,
    pub max_duration: Time,
    /// Probability of an edge `i → j` for each pair `i < j`.
    pub edge_probability: f64,
    pub max_horizon: Time,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            min_tasks: 3,
            max_tasks: 6,
            resources: 2,
            min_capacity: 2,
            max_capacity: 4,
            max_duration: 3,
            edge_probability: 0.3,
            max_horizon: 18,
        }
    }
}

/// Draws an acyclic instance. The horizon lies between the critical path
/// and `min(Σp, max_horizon)`, so a feasible schedule may or may not exist
/// under tight horizons.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, params: &GeneratorParams) -> Instance {
    let n = rng.gen_range(params.min_tasks..=params.max_tasks);
    let resources: Vec<Resource> = (0..params.resources)
        .map(|r| Resource {
            id: r as ResourceId + 1,
            capacity: rng.gen_range(params.min_capacity..=params.max_capacity),
        })
        .collect();
    let mut b = Instance::builder(resources.clone());
    let mut total: Time = 0;
    for _ in 0..n {
        let room = params.max_horizon.saturating_sub(total).max(1);
        let p = rng.gen_range(1..=params.max_duration.min(room));
        total += p;
        let reqs: Vec<(ResourceId, u32)> = resources
            .iter()
            .map(|res| (res.id, rng.gen_range(0..=res.capacity)))
            .filter(|&(_, u)| u > 0)
            .collect();
        b.task(p, reqs);
    }
    for i in 1..=n {
        for j in i + 1..=n {
            if rng.gen_bool(params.edge_probability) {
                b.precedence(i, j);
            }
        }
    }
    let draft = b.build().expect("generated resources are distinct");
    let lo = draft.critical_path_length().expect("edges point forward").max(1);
    let hi = draft.total_duration().min(params.max_horizon).max(lo);
    draft.with_horizon(rng.gen_range(lo..=hi))
}

/// Up to `max_entries` real tasks fixed at random starts within the horizon.
pub fn random_fixed<R: Rng + ?Sized>(rng: &mut R, inst: &Instance, max_entries: usize) -> FixedAssignments {
    let mut fixed = FixedAssignments::new();
    let count = rng.gen_range(0..=max_entries.min(inst.real_task_count()));
    for _ in 0..count {
        let j = rng.gen_range(1..=inst.real_task_count());
        let latest = inst.horizon().saturating_sub(inst.duration(j));
        fixed.insert(j, rng.gen_range(0..=latest));
    }
    fixed
}
