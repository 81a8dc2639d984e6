use crate::model::{FixedAssignments, Instance, Time};

/// Longest duration-weighted path from the start dummy to the end dummy,
/// where a fixed task's path contribution starts no earlier than its fixed
/// time. Admissible for every feasible schedule honoring `fixed`.
pub fn critical_path_lower_bound(inst: &Instance, fixed: &FixedAssignments) -> Time {
    let order = inst
        .topological_order()
        .expect("critical path bound needs an acyclic precedence graph");
    let succ = inst.successor_lists();
    let mut earliest = vec![0 as Time; inst.task_count()];
    for &j in &order {
        if let Some(t) = fixed.get(j) {
            earliest[j] = earliest[j].max(t);
        }
        for &s in &succ[j] {
            earliest[s] = earliest[s].max(earliest[j] + inst.duration(j));
        }
    }
    earliest[inst.end_task()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Resource;

    #[test]
    fn empty_instance_bound_is_zero() {
        let inst = Instance::builder(vec![]).build().unwrap();
        assert_eq!(critical_path_lower_bound(&inst, &FixedAssignments::new()), 0);
    }

    #[test]
    fn chain_contributes_its_length() {
        let mut b = Instance::builder(vec![Resource { id: 1, capacity: 3 }]);
        let one = b.task(5, [(1, 3)]);
        let three = b.task(1, []);
        b.precedence(one, three);
        let inst = b.build().unwrap();
        assert_eq!(critical_path_lower_bound(&inst, &FixedAssignments::new()), 6);
    }

    #[test]
    fn fixed_task_forces_its_tail() {
        let mut b = Instance::builder(vec![]);
        let t = b.task(3, []);
        b.task(2, []);
        b.horizon(20);
        let inst = b.build().unwrap();
        let fixed: FixedAssignments = [(t, 10)].into_iter().collect();
        assert!(critical_path_lower_bound(&inst, &fixed) >= 13);
    }
}
