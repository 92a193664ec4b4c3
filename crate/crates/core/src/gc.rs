//! Partial and global collections: collection-set selection, copy-forward
//! with aging, cold collection of quiescent pinned regions, and the global
//! mark that never looks inside the cold area.

use std::collections::BTreeSet;

use rustc_hash::FxHashSet as HashSet;

use rand::Rng;

use crate::error::{Result, SimError};
use crate::heap::{footprint, Heap, Millis, ObjectId, Region, RegionId, RegionState, RememberedSet, MAX_AGE};
use crate::policy::{self, PinAction, PinDecision, PolicyConfig, UnpinReason};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollectionKind {
    Partial,
    Global,
}

impl CollectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CollectionKind::Partial => "partial",
            CollectionKind::Global => "global",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollectionSet {
    pub regions: Vec<RegionId>,
    pub kind: CollectionKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcConfig {
    /// A global GC follows every this many partial GCs.
    pub global_gc_every: u32,
    /// Cap on young plus compactable unpinned regions per partial GC, as a
    /// fraction of all regions. Cold-collect-ready pinned regions are extra.
    pub cset_cap_fraction: f64,
    /// Per-cycle chance that a pinned region's remembered set overflows.
    pub rs_overflow_prob: f64,
}

impl Default for GcConfig {
    fn default() -> Self {
        GcConfig {
            global_gc_every: 32,
            cset_cap_fraction: 0.25,
            rs_overflow_prob: 0.0,
        }
    }
}

impl GcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.global_gc_every == 0 {
            return Err(SimError::Config("global_gc_every must be positive".into()));
        }
        if !(self.cset_cap_fraction > 0.0 && self.cset_cap_fraction <= 1.0) {
            return Err(SimError::Config("cset_cap_fraction must be in (0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.rs_overflow_prob) {
            return Err(SimError::Config("rs_overflow_prob must be in [0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GcStats {
    pub cycle_index: u64,
    pub time: Millis,
    pub kind: Option<CollectionKind>,
    pub objects_copied: u64,
    pub bytes_copied: u64,
    pub regions_tenured: u64,
    pub cold_collected_regions: u64,
    pub cold_objects_moved: u64,
    pub cold_bytes_moved: u64,
    pub objects_freed: u64,
    pub bytes_freed: u64,
    pub cold_objects_reclaimed: u64,
    pub cold_bytes_reclaimed: u64,
    pub evacuation_failures: u64,
}

/// One pinned region emptied into the cold area.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColdCollection {
    pub region: RegionId,
    pub t_pinned: Millis,
    pub t_inactive: Millis,
    pub objects: u64,
    pub bytes: u64,
    pub moved: Vec<ObjectId>,
}

#[derive(Clone, Debug, Default)]
pub struct PartialOutcome {
    pub stats: GcStats,
    pub cold_collections: Vec<ColdCollection>,
    pub decisions: Vec<PinDecision>,
    pub cold_area_full: bool,
}

#[derive(Clone, Debug, Default)]
pub struct GlobalOutcome {
    pub stats: GcStats,
    pub decisions: Vec<PinDecision>,
    pub reclaimed_cold: Vec<ObjectId>,
}

/// Quiescent for longer than `t_cold`, with an exact remembered set and no
/// critical section holding the region.
pub fn cold_collect_ready(region: &Region, now: Millis, t_cold: Millis) -> bool {
    region.state() == RegionState::Pinned
        && now.saturating_sub(region.t_inactive) > t_cold
        && region.remembered_set == RememberedSet::Accurate
        && !region.critical_in_use
}

pub fn select_collection_set(heap: &Heap, now: Millis, policy: &PolicyConfig, gc: &GcConfig) -> CollectionSet {
    let regions = heap.regions();
    let mut young: Vec<&Region> = regions
        .iter()
        .filter(|r| r.state() == RegionState::Young && !r.residents().is_empty())
        .collect();
    young.sort_by(|a, b| b.age().cmp(&a.age()).then(a.id().cmp(&b.id())));
    let mut sparse: Vec<&Region> = regions
        .iter()
        .filter(|r| r.state() == RegionState::Unpinned && r.density() < policy.d_lo)
        .collect();
    sparse.sort_by(|a, b| a.density().total_cmp(&b.density()).then(a.id().cmp(&b.id())));

    let cap = ((gc.cset_cap_fraction * regions.len() as f64).floor() as usize).max(1);
    let mut chosen: Vec<RegionId> = young.iter().chain(sparse.iter()).take(cap).map(|r| r.id()).collect();
    chosen.extend(
        regions
            .iter()
            .filter(|r| cold_collect_ready(r, now, policy.t_cold))
            .map(|r| r.id()),
    );
    CollectionSet {
        regions: chosen,
        kind: CollectionKind::Partial,
    }
}

/// Randomly degrades remembered sets of pinned regions.
pub fn overflow_remembered_sets<R: Rng>(heap: &mut Heap, prob: f64, rng: &mut R) {
    if prob <= 0.0 {
        return;
    }
    for id in heap.pinned_ids() {
        let region = heap.region_mut(id);
        if region.remembered_set == RememberedSet::Accurate && rng.gen_bool(prob) {
            region.remembered_set = RememberedSet::Overflowed;
        }
    }
}

struct Destinations {
    by_age: [Option<RegionId>; MAX_AGE as usize + 1],
}

impl Destinations {
    fn new() -> Self {
        Destinations {
            by_age: [None; MAX_AGE as usize + 1],
        }
    }

    fn get(&mut self, heap: &mut Heap, age: u8, fp: u32) -> Option<RegionId> {
        let slot = &mut self.by_age[age as usize];
        if let Some(d) = *slot {
            if heap.region(d).room() >= fp {
                return Some(d);
            }
        }
        let fresh = heap.claim_free_region(age)?;
        *slot = Some(fresh);
        Some(fresh)
    }
}

/// Live set inside the collection set: roots and remembered references in,
/// transitive closure restricted to collection-set regions.
fn trace_partial(heap: &mut Heap, in_cs: &[bool], stack_roots: &[ObjectId]) -> HashSet<ObjectId> {
    let cs_of = |heap: &Heap, id: ObjectId| heap.region_of(id).map(|r| in_cs[r.index()]).unwrap_or(false);
    let mut work: Vec<ObjectId> = Vec::new();
    for id in heap.rooted_ids() {
        if cs_of(heap, id) {
            work.push(id);
        }
    }
    work.extend(stack_roots.iter().copied().filter(|id| cs_of(heap, *id)));

    let outside: Vec<ObjectId> = heap
        .regions()
        .iter()
        .filter(|r| !in_cs[r.id().index()] && r.state() != RegionState::Cold)
        .flat_map(|r| r.residents().iter().copied())
        .collect();
    for id in outside {
        if heap.entry_kind(id).may_hold_refs() && heap.is_marked(id) {
            for target in heap.read_refs(id) {
                if cs_of(heap, target) {
                    work.push(target);
                }
            }
        }
    }

    let mut live = HashSet::default();
    while let Some(id) = work.pop() {
        if !live.insert(id) {
            continue;
        }
        if heap.entry_kind(id).may_hold_refs() {
            for target in heap.read_refs(id) {
                if cs_of(heap, target) && !live.contains(&target) {
                    work.push(target);
                }
            }
        }
    }
    live
}

/// Simulated first-fit over the cold area. Returns false if any object in
/// `batch` would not fit; `rooms` is only updated on success.
fn plan_cold_placement(rooms: &mut [u32], sizes: &[u32]) -> bool {
    let mut trial = rooms.to_vec();
    for &fp in sizes {
        match trial.iter_mut().find(|room| **room >= fp) {
            Some(room) => *room -= fp,
            None => return false,
        }
    }
    rooms.copy_from_slice(&trial);
    true
}

pub fn run_partial_gc(
    heap: &mut Heap,
    cs: &CollectionSet,
    now: Millis,
    stack_roots: &[ObjectId],
    cycle_index: u64,
    policy: &PolicyConfig,
) -> Result<PartialOutcome> {
    if cs.kind != CollectionKind::Partial {
        return Err(SimError::Usage("run_partial_gc needs a partial collection set".into()));
    }
    let mut in_cs = vec![false; heap.regions().len()];
    let mut ready: BTreeSet<RegionId> = BTreeSet::new();
    for &id in &cs.regions {
        let r = heap.region(id);
        match r.state() {
            RegionState::Cold => {
                return Err(SimError::Invariant(format!(
                    "cold region {id} in partial collection set"
                )))
            }
            RegionState::Pinned => {
                if !cold_collect_ready(r, now, policy.t_cold) {
                    return Err(SimError::Invariant(format!(
                        "pinned region {id} in collection set before it is cold-collect-ready"
                    )));
                }
                ready.insert(id);
            }
            _ => {}
        }
        in_cs[id.index()] = true;
    }

    let mut out = PartialOutcome {
        stats: GcStats {
            cycle_index,
            time: now,
            kind: Some(CollectionKind::Partial),
            ..GcStats::default()
        },
        ..PartialOutcome::default()
    };

    let live = trace_partial(heap, &in_cs, stack_roots);

    // Decide which ready regions can be emptied into the cold area.
    let mut cold_rooms: Vec<u32> = heap.cold_regions().map(|r| r.room()).collect();
    let mut cold_moves: HashSet<ObjectId> = HashSet::default();
    let mut collecting: Vec<RegionId> = Vec::new();
    for &id in &ready {
        let movers: Vec<ObjectId> = heap
            .cold_candidates(id)
            .into_iter()
            .filter(|o| live.contains(o))
            .collect();
        let sizes: Vec<u32> = movers.iter().map(|o| heap.entry_footprint(*o)).collect();
        if out.cold_area_full || !plan_cold_placement(&mut cold_rooms, &sizes) {
            out.cold_area_full = true;
            continue;
        }
        cold_moves.extend(movers);
        collecting.push(id);
    }
    if out.cold_area_full {
        for id in &ready {
            if !collecting.contains(id) {
                in_cs[id.index()] = false;
            }
        }
        out.decisions
            .extend(policy::unpin_all_except(heap, UnpinReason::ColdAreaFull, &collecting));
    }

    let mut dests = Destinations::new();
    let tenure = heap.config().tenure_age;
    for &src in &cs.regions {
        if !in_cs[src.index()] {
            continue;
        }
        let (src_age, src_state, t_pinned, t_inactive) = {
            let r = heap.region(src);
            (r.age(), r.state(), r.t_pinned, r.t_inactive)
        };
        let cold_collecting = collecting.contains(&src);
        let target_age = match src_state {
            RegionState::Young if src_age + 1 < tenure => src_age + 1,
            _ => MAX_AGE,
        };
        let mut event = ColdCollection {
            region: src,
            t_pinned,
            t_inactive,
            objects: 0,
            bytes: 0,
            moved: Vec::new(),
        };
        let mut stranded = Vec::new();
        for id in heap.take_residents(src) {
            let fp = heap.entry_footprint(id);
            if !live.contains(&id) {
                out.stats.objects_freed += 1;
                out.stats.bytes_freed += heap.object(id).map(|o| o.size as u64).unwrap_or(0);
                heap.free_object(id);
                continue;
            }
            if cold_collecting && cold_moves.contains(&id) {
                let dest = heap
                    .cold_region_with_room(fp)
                    .ok_or_else(|| SimError::Invariant("planned cold placement failed".into()))?;
                let size = heap.object(id).map(|o| o.size as u64).unwrap_or(0);
                heap.place(id, dest);
                event.objects += 1;
                event.bytes += size;
                event.moved.push(id);
                continue;
            }
            let dest_age = if target_age >= tenure { MAX_AGE } else { target_age };
            match dests.get(heap, dest_age, fp) {
                Some(dest) => {
                    let fresh_tenured =
                        heap.region(dest).residents().is_empty() && heap.region(dest).state() == RegionState::Unpinned;
                    heap.place(id, dest);
                    if fresh_tenured {
                        out.stats.regions_tenured += 1;
                    }
                    out.stats.objects_copied += 1;
                    out.stats.bytes_copied += heap.object(id).map(|o| o.size as u64).unwrap_or(0);
                }
                None => stranded.push(id),
            }
        }
        if stranded.is_empty() {
            heap.reset_region(src);
        } else {
            // Nowhere to copy to: keep survivors in place and age the region.
            out.stats.evacuation_failures += 1;
            if src_state == RegionState::Pinned {
                heap.unpin_region(src)?;
            }
            if target_age >= tenure {
                heap.set_region_state(src, RegionState::Unpinned, MAX_AGE);
            } else {
                heap.set_region_state(src, RegionState::Young, target_age);
            }
            heap.compact_in_place(src, stranded);
        }
        if cold_collecting {
            out.stats.cold_collected_regions += 1;
            out.stats.cold_objects_moved += event.objects;
            out.stats.cold_bytes_moved += event.bytes;
            out.decisions.push(PinDecision {
                region: src,
                metric: 0.0,
                action: PinAction::Unpin(UnpinReason::WentCold),
            });
            out.cold_collections.push(event);
        }
    }
    heap.clear_alloc_cursor();
    Ok(out)
}

/// Full mark from the roots. Cold residents are marked when reached but
/// their reference fields are never read.
fn trace_global(heap: &mut Heap, stack_roots: &[ObjectId]) -> HashSet<ObjectId> {
    let mut work = heap.rooted_ids();
    work.extend(stack_roots.iter().copied().filter(|id| heap.object(*id).is_some()));
    let mut live = HashSet::default();
    while let Some(id) = work.pop() {
        if !live.insert(id) {
            continue;
        }
        let in_cold = heap
            .region_of(id)
            .map(|r| heap.region(r).state() == RegionState::Cold)
            .unwrap_or(false);
        if in_cold || !heap.entry_kind(id).may_hold_refs() {
            continue;
        }
        for target in heap.read_refs(id) {
            if !live.contains(&target) {
                work.push(target);
            }
        }
    }
    live
}

pub fn run_global_gc(
    heap: &mut Heap,
    now: Millis,
    stack_roots: &[ObjectId],
    cycle_index: u64,
) -> Result<GlobalOutcome> {
    let mut out = GlobalOutcome {
        stats: GcStats {
            cycle_index,
            time: now,
            kind: Some(CollectionKind::Global),
            ..GcStats::default()
        },
        ..GlobalOutcome::default()
    };
    out.decisions = policy::on_global_gc_or_cold_full(heap, UnpinReason::GlobalGc);
    let live = trace_global(heap, stack_roots);

    let ids: Vec<RegionId> = heap.regions().iter().map(|r| r.id()).collect();
    for id in ids {
        if heap.region(id).residents().is_empty() {
            continue;
        }
        if heap.region(id).state() == RegionState::Cold {
            let dead: Vec<ObjectId> = heap
                .region(id)
                .residents()
                .iter()
                .copied()
                .filter(|o| !live.contains(o))
                .collect();
            for o in dead {
                out.stats.cold_objects_reclaimed += 1;
                out.stats.cold_bytes_reclaimed += heap.object(o).map(|x| x.size as u64).unwrap_or(0);
                heap.reclaim_cold(o);
                out.reclaimed_cold.push(o);
            }
            continue;
        }
        let residents = heap.take_residents(id);
        let mut survivors = Vec::with_capacity(residents.len());
        for o in residents {
            if live.contains(&o) {
                survivors.push(o);
            } else {
                out.stats.objects_freed += 1;
                out.stats.bytes_freed += heap.object(o).map(|x| x.size as u64).unwrap_or(0);
                heap.free_object(o);
            }
        }
        if survivors.is_empty() {
            heap.reset_region(id);
        } else {
            heap.compact_in_place(id, survivors);
        }
    }
    for r in 0..heap.regions().len() {
        heap.region_mut(RegionId(r as u32)).remembered_set = RememberedSet::Accurate;
    }
    heap.clear_alloc_cursor();
    Ok(out)
}

/// Bytes a set of objects will need in the cold area.
pub fn cold_footprint(heap: &Heap, ids: &[ObjectId]) -> u64 {
    ids.iter()
        .filter_map(|id| heap.object(*id))
        .map(|o| footprint(o.size) as u64)
        .sum()
}
