use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use resched_core::fixture;
use resched_core::generate::{random_instance, GeneratorParams};
use resched_core::model::{
    check_schedule, parse_instance, serialize_instance, FixedAssignments, Format, Instance, Schedule, ViolationKind,
};

#[test]
fn native_fixture_has_table_values() {
    let inst = parse_instance(fixture::native_document(), Format::Native).unwrap();
    assert_eq!(inst.real_task_count(), 10);
    assert_eq!(inst.task_count(), 12);
    assert_eq!(inst.duration(1), 5);
    let r3 = inst.resource_index(3).unwrap();
    assert_eq!(inst.requirement(4, r3), 3);
    let succ: Vec<usize> = inst.precedences().iter().filter(|e| e.0 == 4).map(|e| e.1).collect();
    assert_eq!(succ, vec![5, 6]);
    assert_eq!(inst.horizon(), fixture::FIXTURE_HORIZON);
    assert_eq!(inst, fixture::instance());
}

#[test]
fn psplib_fixture_matches_native() {
    let native = parse_instance(fixture::native_document(), Format::Native).unwrap();
    let sm = parse_instance(include_str!("../fixtures/vertiport.sm"), Format::PsplibSm).unwrap();
    assert_eq!(sm, native);
}

#[test]
fn serialization_is_canonical() {
    let inst = fixture::instance();
    assert_eq!(serialize_instance(&inst), fixture::native_document());
}

/// Direct reading of the time-indexed constraints: `x[j][t] = 1` iff task
/// `j` starts at `t`; usage at `t` sums `u_jr · x[j][τ]` over
/// `τ ∈ (t − p_j, t]`.
fn literal_capacity_ok(inst: &Instance, starts: &[u32]) -> bool {
    let h = inst.horizon() as usize;
    let n = inst.task_count();
    let max_t = starts
        .iter()
        .enumerate()
        .map(|(j, &s)| s as usize + inst.duration(j) as usize)
        .max()
        .unwrap_or(0)
        .max(h);
    let mut x = vec![vec![0u32; max_t + 1]; n];
    for j in 0..n {
        x[j][starts[j] as usize] = 1;
    }
    for (r, res) in inst.resources().iter().enumerate() {
        for t in 0..max_t {
            let mut usage = 0;
            for j in 0..n {
                let p = inst.duration(j) as usize;
                let lo = (t + 1).saturating_sub(p);
                for tau in lo..=t {
                    if p > 0 {
                        usage += inst.requirement(j, r) * x[j][tau];
                    }
                }
            }
            if usage > res.capacity {
                return false;
            }
        }
    }
    true
}

fn params() -> GeneratorParams {
    GeneratorParams::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn native_round_trip(seed: u64) {
        let inst = random_instance(&mut StdRng::seed_from_u64(seed), &params());
        let text = serialize_instance(&inst);
        let back = parse_instance(&text, Format::Native).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(serialize_instance(&back), text);
    }

    #[test]
    fn capacity_check_matches_time_indexed_reading(seed: u64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, &params());
        let mut starts: Vec<u32> = (0..inst.task_count())
            .map(|j| rng.gen_range(0..=inst.horizon().saturating_sub(inst.duration(j))))
            .collect();
        starts[0] = 0;
        let end = inst.end_task();
        starts[end] = (0..end).map(|j| starts[j] + inst.duration(j)).max().unwrap();
        let report = check_schedule(&inst, &Schedule::new(starts.clone()), &FixedAssignments::new());
        prop_assert_eq!(!report.has(ViolationKind::Capacity), literal_capacity_ok(&inst, &starts));
    }

    // Extra precedences can only add violations.
    #[test]
    fn adding_a_precedence_never_repairs_a_schedule(seed: u64, a in 1usize..7, b in 1usize..7) {
        let mut rng = StdRng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, &params());
        let (a, b) = (a.min(inst.real_task_count()), b.min(inst.real_task_count()));
        prop_assume!(a < b);
        let starts: Vec<u32> = {
            let mut s: Vec<u32> = (0..inst.task_count()).map(|j| rng.gen_range(0..=inst.horizon().saturating_sub(inst.duration(j)))).collect();
            s[0] = 0;
            let end = inst.end_task();
            s[end] = (0..end).map(|j| s[j] + inst.duration(j)).max().unwrap();
            s
        };
        let sched = Schedule::new(starts);
        let mut more = inst.precedences().clone();
        more.insert((a, b));
        let tighter = inst.with_precedences(more);
        let fixed = FixedAssignments::new();
        if check_schedule(&tighter, &sched, &fixed).ok {
            prop_assert!(check_schedule(&inst, &sched, &fixed).ok);
        }
    }
}
