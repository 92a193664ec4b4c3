mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coldsim::gc::{run_partial_gc, select_collection_set, GcConfig};
use coldsim::heap::{footprint, Heap, HeapConfig, ObjectId, ObjectKind, RegionState, SLOT_BYTES};
use coldsim::oracle::convergence_time;
use coldsim::policy::{update_mma, PolicyConfig, Strategy};
use coldsim::sampling::{FrameTrace, MutatorThread, SamplingConfig};
use coldsim::{emit_reports, run_scenario, RunReport, ScenarioConfig};

use common::{median, par_map, planted};

const SEEDS: u64 = 20;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mma_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        // prev = a / 2^k with small enough numerators that 7*prev + r and the
        // division by 8 are exact in binary floating point.
        let k: u32 = rng.gen_range(0..20);
        let a: u64 = rng.gen_range(0..1u64 << 30);
        let r: u64 = rng.gen_range(0..1u64 << 20);
        let prev = a as f64 / (1u64 << k) as f64;
        let numer = 7 * a + (r << k);
        let expect = numer as f64 / (1u64 << (k + 3)) as f64;
        let got = update_mma(prev, r);
        ensure(got.to_bits() == expect.to_bits(), || {
            format!("update_mma({prev}, {r}) = {got}, want {expect}")
        })?;
    }
    for _ in 0..200 {
        let r: u64 = rng.gen_range(1..1_000_000);
        let mut mma = rng.gen_range(0.0..2.0 * r as f64).min(r as f64);
        mma = if rng.gen_bool(0.5) { 0.0 } else { mma };
        let mut bound = r as f64;
        for k in 1..=200 {
            mma = update_mma(mma, r);
            bound *= 0.875;
            ensure((mma - r as f64).abs() <= bound + 1e-9, || {
                format!("r={r} k={k}: |mma - r| = {} > {bound}", (mma - r as f64).abs())
            })?;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 1.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!("10000 pairs exact, 200 contraction runs, {elapsed:.3}s"))
}

fn pick_kind(rng: &mut ChaCha8Rng) -> ObjectKind {
    match rng.gen_range(0..4) {
        0 => ObjectKind::PrimitiveArray,
        1 => ObjectKind::Leaf,
        2 => ObjectKind::Internal,
        _ => ObjectKind::PrimitiveFieldsOnly,
    }
}

/// Fills one nursery region with random objects, tenures the survivors with
/// a partial GC, pins the resulting regions and scribbles on their mark and
/// activity maps. Returns the number of pinned regions checked.
fn bitmap_case(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let slots: u32 = rng.gen_range(64..=4096);
    let region_size = slots * SLOT_BYTES;
    let primitive_fields_collectible = rng.gen_bool(0.3);
    let mut heap = Heap::new(HeapConfig {
        region_size,
        region_count: 8,
        cold_region_count: 1,
        tenure_age: 1,
        survivor_reserve: 2,
        primitive_fields_collectible,
    })
    .map_err(|e| e.to_string())?;
    let size_cap = region_size.min(512);
    let mut used = 0;
    let mut ids: Vec<ObjectId> = Vec::new();
    loop {
        let size = rng.gen_range(1..=size_cap);
        if used + footprint(size) > region_size {
            break;
        }
        used += footprint(size);
        let kind = pick_kind(rng);
        let refs = if kind == ObjectKind::Internal && !ids.is_empty() {
            (0..rng.gen_range(0..3))
                .map(|_| ids[rng.gen_range(0..ids.len())])
                .collect()
        } else {
            vec![]
        };
        ids.push(heap.allocate(kind, size, refs, 0).map_err(|e| e.to_string())?);
    }
    for id in &ids {
        if rng.gen_bool(0.2) {
            heap.unroot(*id).map_err(|e| e.to_string())?;
        }
    }
    let policy = PolicyConfig::default();
    let gc = GcConfig {
        cset_cap_fraction: 1.0,
        ..GcConfig::default()
    };
    let cs = select_collection_set(&heap, 1, &policy, &gc);
    run_partial_gc(&mut heap, &cs, 1, &[], 1, &policy).map_err(|e| e.to_string())?;

    let tenured: Vec<_> = heap
        .regions()
        .iter()
        .filter(|r| r.state() == RegionState::Unpinned)
        .map(|r| r.id())
        .collect();
    for &region in &tenured {
        heap.pin_region(region, 2).map_err(|e| e.to_string())?;
        let residents = heap.region(region).residents().to_vec();
        let mut unmarked = BTreeSet::new();
        let mut active = BTreeSet::new();
        let (p_active, p_unmark) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.5));
        for &id in &residents {
            if rng.gen_bool(p_active) {
                heap.set_activity(region, id, 3).map_err(|e| e.to_string())?;
                active.insert(id);
            }
        }
        for &id in &residents {
            if rng.gen_bool(p_unmark) {
                heap.unmark(id).map_err(|e| e.to_string())?;
                unmarked.insert(id);
                active.remove(&id);
            }
        }

        let collectible = |kind| {
            matches!(kind, ObjectKind::PrimitiveArray | ObjectKind::Leaf)
                || (primitive_fields_collectible && kind == ObjectKind::PrimitiveFieldsOnly)
        };
        let r = heap.region(region);
        let mark = r.mark_map();
        let act = r.activity_map().ok_or("pinned region without activity map")?;
        let mut per_slot = Vec::new();
        for slot in 0..r.slot_count() {
            if !mark.get(slot) || act.get(slot) {
                continue;
            }
            if let Some(id) = heap.resident_at(region, slot as u32 * SLOT_BYTES) {
                if collectible(heap.object(id).unwrap().kind) {
                    per_slot.push(id);
                }
            }
        }
        let modelled: Vec<ObjectId> = residents
            .iter()
            .copied()
            .filter(|id| !unmarked.contains(id) && !active.contains(id))
            .filter(|id| collectible(heap.object(*id).unwrap().kind))
            .collect();
        let got = heap.cold_candidates(region);
        ensure(got == per_slot, || {
            format!("region of {slots} slots: {got:?} vs per-slot {per_slot:?}")
        })?;
        ensure(got == modelled, || {
            format!("region of {slots} slots: {got:?} vs model {modelled:?}")
        })?;
    }
    Ok(tenured.len())
}

fn bitmap_subtraction() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut checked = 0;
    let mut cases = 0;
    while checked < 1000 {
        checked += bitmap_case(&mut rng)?;
        cases += 1;
        ensure(cases < 5000, || "too few tenured regions produced".into())?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 5.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!("{checked} pinned regions exact, {elapsed:.2}s"))
}

struct Run {
    seed: u64,
    strategy: Strategy,
    cfg: ScenarioConfig,
    report: Result<RunReport, String>,
    secs: f64,
}

fn sweep(tweak: impl Fn(&mut ScenarioConfig) + Sync) -> Vec<Run> {
    let jobs: Vec<(u64, Strategy)> = (1..=SEEDS)
        .flat_map(|s| [(s, Strategy::Unselective), (s, Strategy::Selective)])
        .collect();
    par_map(&jobs, |&(seed, strategy)| {
        let mut cfg = planted(seed, strategy);
        tweak(&mut cfg);
        let start = Instant::now();
        let report = run_scenario(&cfg).map_err(|e| e.to_string());
        Run {
            seed,
            strategy,
            cfg,
            report,
            secs: start.elapsed().as_secs_f64(),
        }
    })
}

fn ok_runs(runs: &[Run]) -> Result<Vec<(&Run, &RunReport)>, String> {
    runs.iter()
        .map(|r| match &r.report {
            Ok(rep) => Ok((r, rep)),
            Err(e) => Err(format!("seed {} {}: {e}", r.seed, r.strategy)),
        })
        .collect()
}

fn invariants(runs: &[Run]) -> Outcome {
    let runs = ok_runs(runs)?;
    let mut cold_events = 0;
    for (run, rep) in &runs {
        let tag = format!("seed {} {}", run.seed, run.strategy);
        let cfg = &run.cfg;
        ensure(rep.summary.partial_gcs == 500, || {
            format!("{tag}: {} partial GCs", rep.summary.partial_gcs)
        })?;
        ensure(rep.violations.is_empty(), || format!("{tag}: {}", rep.violations[0]))?;
        for row in &rep.cycles {
            ensure(row.pinned <= cfg.policy.p_max as usize, || {
                format!("{tag}: cycle {} has {} pinned", row.cycle, row.pinned)
            })?;
            ensure(row.cold == cfg.heap.cold_region_count as usize, || {
                format!("{tag}: cycle {} has {} cold regions", row.cycle, row.cold)
            })?;
        }
        // Every cold collection must fall inside a pinning episode that had
        // been quiet for longer than T_cold.
        for ev in &rep.cold_events {
            let episode = rep.stack_log.episodes().find(|e| {
                e.region.0 == ev.region && e.t_pinned <= ev.time_ms && e.ended_at.is_none_or(|t| t >= ev.time_ms)
            });
            let Some(e) = episode else {
                return Err(format!(
                    "{tag}: cold event in region {} at {} outside any pinning",
                    ev.region, ev.time_ms
                ));
            };
            ensure(ev.time_ms - e.last_transition > cfg.policy.t_cold, || {
                format!(
                    "{tag}: region {} cold-collected {} ms after its last transition",
                    ev.region,
                    ev.time_ms - e.last_transition
                )
            })?;
        }
        cold_events += rep.cold_events.len();
    }
    ensure(cold_events > 0, || "no cold collections happened".into())?;
    Ok(format!(
        "{} runs x 500 GCs, p_max 3, {cold_events} cold collections checked",
        runs.len()
    ))
}

fn inclusion(runs: &[Run]) -> Outcome {
    let runs = ok_runs(runs)?;
    let mut common_regions = 0;
    for (run, rep) in &runs {
        let tag = format!("seed {} {}", run.seed, run.strategy);
        let oracle = rep
            .oracle_log
            .as_ref()
            .ok_or_else(|| format!("{tag}: oracle did not run"))?;
        let stack_eps: BTreeMap<_, _> = rep.stack_log.episodes().map(|e| ((e.region, e.t_pinned), e)).collect();
        let oracle_eps: BTreeMap<_, _> = oracle.episodes().map(|e| ((e.region, e.t_pinned), e)).collect();
        for (key, s) in &stack_eps {
            let Some(st) = convergence_time(s) else { continue };
            let o = oracle_eps
                .get(key)
                .ok_or_else(|| format!("{tag}: oracle never pinned {key:?}"))?;
            let ot = convergence_time(o).ok_or_else(|| format!("{tag}: {key:?} stack-collectible only"))?;
            ensure(ot <= st, || format!("{tag}: {key:?} oracle {ot} ms > stack {st} ms"))?;
            common_regions += 1;
        }
        let inc = rep
            .inclusion
            .as_ref()
            .ok_or_else(|| format!("{tag}: no inclusion report"))?;
        ensure(inc.fully_included && inc.oracle_not_slower(), || {
            format!("{tag}: inclusion report disagrees")
        })?;
    }
    ensure(common_regions > 0, || "no region converged".into())?;
    Ok(format!("{} runs, {common_regions} converged regions", runs.len()))
}

fn false_inactivity(runs: &[Run]) -> Outcome {
    let runs = ok_runs(runs)?;
    let mut ratios = Vec::new();
    let mut slowest: f64 = 0.0;
    for (run, rep) in &runs {
        let tag = format!("seed {} {}", run.seed, run.strategy);
        let w = &run.cfg.workload;
        ensure(
            run.cfg.sampling.poll_interval == 1 && w.frame_surface_fraction == 1.0,
            || format!("{tag}: sampling not at full resolution"),
        )?;
        let per_window = w.hot_access_rate * (run.cfg.policy.t_cold as f64 / 10.0);
        ensure(per_window >= w.hot_set_size as f64, || {
            format!("{tag}: hot objects accessed less than once per T_cold/10")
        })?;
        let fi = rep.summary.false_inactivity;
        ensure(fi.total > 0, || format!("{tag}: no inactive objects were examined"))?;
        let ratio = fi.count as f64 / fi.total as f64;
        ensure(ratio <= 0.02, || {
            format!("{tag}: FalseInactivity {:.2}%", ratio * 100.0)
        })?;
        ratios.push(ratio);
        slowest = slowest.max(run.secs);
    }
    let med = median(&ratios);
    ensure(med <= 0.005, || format!("median FalseInactivity {:.3}%", med * 100.0))?;
    ensure(slowest < 60.0, || format!("slowest run {slowest:.1}s"))?;
    let max = ratios.iter().copied().fold(0.0, f64::max);
    Ok(format!(
        "{} runs, max {:.3}%, median {:.3}%, slowest {slowest:.1}s",
        runs.len(),
        max * 100.0,
        med * 100.0
    ))
}

fn recall(runs: &[Run]) -> Outcome {
    let runs = ok_runs(runs)?;
    let mut worst: f64 = 1.0;
    let mut n = 0;
    for (run, rep) in runs.iter().filter(|(r, _)| r.strategy == Strategy::Unselective) {
        let tag = format!("seed {}", run.seed);
        let s = &rep.summary;
        ensure(run.cfg.workload.cold_access_rate == 0.0, || {
            format!("{tag}: cold set is accessed")
        })?;
        ensure(s.final_time_ms >= 4 * run.cfg.policy.t_cold, || {
            format!("{tag}: run shorter than 4 T_cold")
        })?;
        ensure(s.planted_cold_bytes_exposed > 0, || format!("{tag}: nothing exposed"))?;
        let r = s.planted_cold_bytes_harvested as f64 / s.planted_cold_bytes_exposed as f64;
        ensure(r >= 0.9, || format!("{tag}: recall {:.1}%", r * 100.0))?;
        ensure(s.planted_hot_in_cold == 0, || {
            format!("{tag}: {} hot objects in cold area", s.planted_hot_in_cold)
        })?;
        worst = worst.min(r);
        n += 1;
    }
    Ok(format!("{n} unselective runs, worst recall {:.1}%", worst * 100.0))
}

fn strategy_trend(runs: &[Run]) -> Outcome {
    let runs = ok_runs(runs)?;
    let by = |seed: u64, strategy: Strategy| {
        runs.iter()
            .find(|(r, _)| r.seed == seed && r.strategy == strategy)
            .map(|(_, rep)| &rep.summary)
    };
    for (run, _) in &runs {
        let w = &run.cfg.workload;
        ensure(w.cold_dispersion > 0.0 && w.cold_set_size > 0, || {
            format!("seed {}: cold set not dispersed", run.seed)
        })?;
    }
    let mut more_or_equal = 0;
    for seed in 1..=SEEDS {
        let (u, s) = (
            by(seed, Strategy::Unselective).unwrap(),
            by(seed, Strategy::Selective).unwrap(),
        );
        if u.cold_bytes >= s.cold_bytes {
            more_or_equal += 1;
        }
        ensure(s.mean_pinned < u.mean_pinned, || {
            format!(
                "seed {seed}: selective mean pinned {:.3} vs unselective {:.3}",
                s.mean_pinned, u.mean_pinned
            )
        })?;
    }
    ensure(more_or_equal * 10 >= SEEDS * 8, || {
        format!("unselective collected at least as much in {more_or_equal}/{SEEDS} seeds")
    })?;
    Ok(format!(
        "unselective >= selective bytes in {more_or_equal}/{SEEDS}, fewer pins in {SEEDS}/{SEEDS}"
    ))
}

/// Walker that remembers every frame of the previous walk.
#[derive(Default)]
struct UnboundedWalker {
    prev: Vec<FrameTrace>,
}

impl UnboundedWalker {
    fn walk(&mut self, thread: &MutatorThread) -> BTreeSet<ObjectId> {
        let mut sampled = BTreeSet::new();
        let mut curr = Vec::new();
        let mut tail: &[FrameTrace] = &[];
        for frame in thread.stack().iter().rev() {
            let t = frame.trace();
            if let Some(j) = self.prev.iter().position(|p| *p == t) {
                tail = &self.prev[j..];
                break;
            }
            sampled.extend(frame.refs());
            curr.push(t);
        }
        curr.extend_from_slice(tail);
        self.prev = curr;
        sampled
    }
}

fn splice_case(seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fanout = rng.gen_range(1..6);
    let cap = rng.gen_range(2..10);
    let cfg = SamplingConfig {
        ref_buffer_capacity: 1 << 24,
        trace_capacity: cap,
        poll_interval: 1,
    };
    let mut thread = MutatorThread::new(0, fanout);
    let mut reference = UnboundedWalker::default();
    let (mut bounded_bits, mut reference_bits) = (BTreeSet::new(), BTreeSet::new());
    let mut max_depth = 0;
    let mut next_obj = 0u64;
    for now in 0..300u64 {
        // Drift towards deep stacks, well past the trace capacity.
        let target = 3 * cap;
        for _ in 0..rng.gen_range(0..4) {
            let depth = thread.depth();
            let push = depth == 0 || (depth < 4 * cap && rng.gen_bool(if depth < target { 0.7 } else { 0.4 }));
            if push {
                thread.push_frame(rng.gen_range(0..4));
            } else {
                thread.pop_frame();
            }
        }
        if thread.depth() > 0 && rng.gen_bool(0.8) {
            for _ in 0..rng.gen_range(1..=fanout) {
                let obj = if rng.gen_bool(0.3) && next_obj > 0 {
                    rng.gen_range(0..next_obj)
                } else {
                    next_obj
                };
                next_obj = next_obj.max(obj + 1);
                thread
                    .write_ref(rng.gen_range(0..fanout), ObjectId(obj), now)
                    .map_err(|e| e.to_string())?;
            }
        }
        max_depth = max_depth.max(thread.depth());
        thread.walk_pending = true;
        let walk = thread.walk_stack(now, 0, &cfg).map_err(|e| e.to_string())?;
        bounded_bits.extend(walk.samples);
        reference_bits.extend(reference.walk(&thread));
        ensure(bounded_bits == reference_bits, || {
            format!(
                "case {seed} (cap {cap}) diverged at tick {now}: {:?}",
                bounded_bits.symmetric_difference(&reference_bits).collect::<Vec<_>>()
            )
        })?;
    }
    ensure(max_depth > cap, || {
        format!("case {seed}: stack never exceeded capacity {cap}")
    })?;
    Ok(max_depth)
}

fn splice_equivalence() -> Outcome {
    let mut deepest = 0;
    for seed in 0..100 {
        deepest = deepest.max(splice_case(seed)?);
    }
    Ok(format!("100 scripted cases, max depth {deepest}"))
}

fn determinism() -> Outcome {
    let mut cfg = planted(7, Strategy::Unselective);
    cfg.oracle_enabled = true;
    cfg.max_partial_gcs = Some(150);
    let dirs: Vec<tempfile::TempDir> = (0..2)
        .map(|_| tempfile::tempdir().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    for dir in &dirs {
        let report = run_scenario(&cfg).map_err(|e| e.to_string())?;
        emit_reports(&report, dir.path()).map_err(|e| e.to_string())?;
    }
    let files = ["activity.csv", "cold_events.csv", "summary.csv", "convergence.csv"];
    let mut bytes = 0;
    for f in files {
        let a = std::fs::read(dirs[0].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = std::fs::read(dirs[1].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure(a == b, || format!("{f} differs between runs"))?;
        bytes += a.len();
    }
    Ok(format!("{} files, {bytes} bytes identical", files.len()))
}

fn hygiene(sweeps: &[&[Run]]) -> Outcome {
    let mut n = 0;
    let mut cold_objects = 0;
    for runs in sweeps {
        for (run, rep) in ok_runs(runs)? {
            let tag = format!("seed {} {}", run.seed, run.strategy);
            let s = &rep.summary;
            ensure(s.cold_area_non_collectible == 0, || {
                format!("{tag}: {} non-collectible cold objects", s.cold_area_non_collectible)
            })?;
            ensure(s.marker_cold_ref_field_reads == 0, || {
                format!("{tag}: {} cold reference-field reads", s.marker_cold_ref_field_reads)
            })?;
            ensure(s.marker_ref_field_reads > 0, || {
                format!("{tag}: marker probe never fired")
            })?;
            cold_objects += s.cold_objects;
            n += 1;
        }
    }
    ensure(cold_objects > 0, || "cold area never used".into())?;
    Ok(format!(
        "{n} runs, {cold_objects} objects sequestered, 0 cold reference reads"
    ))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "mma exactness", mma_exactness()));
    results.push((2, "bitmap subtraction", bitmap_subtraction()));

    let capped = sweep(|c| {
        c.policy.p_max = 3;
        c.gc.rs_overflow_prob = 0.02;
    });
    results.push((3, "pin cap and exclusion", invariants(&capped)));

    let observed = sweep(|c| c.oracle_enabled = true);
    results.push((4, "oracle inclusion", inclusion(&observed)));
    results.push((5, "false inactivity", false_inactivity(&observed)));
    results.push((6, "planted recall", recall(&observed)));
    results.push((7, "strategy trend", strategy_trend(&observed)));
    results.push((8, "splice equivalence", splice_equivalence()));
    results.push((9, "determinism", determinism()));
    results.push((10, "cold-area hygiene", hygiene(&[&capped, &observed])));

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
