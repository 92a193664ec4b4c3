//! Runs one scenario on the simulated clock.
//!
//! Each tick: collect first if the tick's allocations might not fit, apply
//! the workload's events (the oracle sees every access), let mutators with a
//! pending request walk their stacks at the tick's end safepoint, then poll
//! the daemon on interval ticks.

use rustc_hash::FxHasher;
use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ScenarioConfig;
use crate::error::{Result, SimError};
use crate::gc::{self, ColdCollection};
use crate::heap::{footprint, Heap, Millis, ObjectId, ObjectKind, RegionState};
use crate::oracle::{compare_detectors, DetectorLog, FalseInactivity, InclusionReport, OracleLog};
use crate::policy::{self, PinAction, PinDecision};
use crate::sampling::{daemon_poll, HarvestStats, MutatorThread};
use crate::trace::{Replay, TraceHeader, TraceWriter};
use crate::workload::{self, GroundTruth, TraceEvent, Workload};

pub enum EventSource {
    Live(Box<Workload>),
    Replay(Replay),
}

impl EventSource {
    fn step(&mut self, now: Millis) -> Vec<TraceEvent> {
        match self {
            EventSource::Live(w) => w.step(now),
            EventSource::Replay(r) => r.step(now),
        }
    }

    fn truth(&self) -> GroundTruth {
        match self {
            EventSource::Live(w) => w.ground_truth().clone(),
            EventSource::Replay(r) => r.truth.clone(),
        }
    }
}

/// One row per partial GC.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleRow {
    pub cycle: u64,
    pub time_ms: Millis,
    pub young: usize,
    pub unpinned: usize,
    pub pinned: usize,
    pub cold: usize,
    /// Indexed by `RegionState::index`.
    pub refs: [u64; 4],
}

impl CycleRow {
    pub fn refs_total(&self) -> u64 {
        self.refs.iter().sum()
    }

    /// Reference proportions per region class; zeros when nothing was sampled.
    pub fn fractions(&self) -> [f64; 4] {
        let total = self.refs_total();
        if total == 0 {
            return [0.0; 4];
        }
        self.refs.map(|r| r as f64 / total as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColdEventRow {
    pub cycle: u64,
    pub time_ms: Millis,
    pub region: u32,
    pub objects: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub final_time_ms: Millis,
    pub partial_gcs: u64,
    pub global_gcs: u64,
    pub mid_tick_gcs: u64,
    pub evacuation_failures: u64,
    pub cold_objects: u64,
    pub cold_bytes: u64,
    pub cold_bytes_reclaimed: u64,
    pub cold_area_refs: u64,
    pub distinct_cold_objects_referenced: u64,
    pub false_inactivity: FalseInactivity,
    pub pins: u64,
    pub unpins: u64,
    pub max_pinned: usize,
    pub mean_pinned: f64,
    pub frames_walked: u64,
    pub walks: u64,
    pub bits_tested: u64,
    pub bits_set: u64,
    pub samples_harvested: u64,
    pub samples_discarded_stale: u64,
    pub oracle_accesses: u64,
    pub oracle_bits_set: u64,
    pub stack_collectible_regions: u64,
    pub oracle_collectible_regions: u64,
    pub stack_mean_convergence_ms: Option<f64>,
    pub oracle_mean_convergence_ms: Option<f64>,
    pub planted_cold_bytes: u64,
    pub planted_cold_bytes_exposed: u64,
    pub planted_cold_bytes_harvested: u64,
    pub planted_hot_in_cold: u64,
    pub cold_area_non_collectible: u64,
    pub marker_ref_field_reads: u64,
    pub marker_cold_ref_field_reads: u64,
}

impl Summary {
    /// Share of exposed planted cold bytes that reached the cold area.
    pub fn planted_recall(&self) -> f64 {
        if self.planted_cold_bytes_exposed == 0 {
            1.0
        } else {
            self.planted_cold_bytes_harvested as f64 / self.planted_cold_bytes_exposed as f64
        }
    }

    /// Key/value rows for `summary.csv`.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "none".into());
        vec![
            ("final_time_ms", self.final_time_ms.to_string()),
            ("partial_gcs", self.partial_gcs.to_string()),
            ("global_gcs", self.global_gcs.to_string()),
            ("mid_tick_gcs", self.mid_tick_gcs.to_string()),
            ("evacuation_failures", self.evacuation_failures.to_string()),
            ("cold_objects", self.cold_objects.to_string()),
            ("cold_bytes", self.cold_bytes.to_string()),
            ("cold_bytes_reclaimed", self.cold_bytes_reclaimed.to_string()),
            ("cold_area_refs", self.cold_area_refs.to_string()),
            (
                "distinct_cold_objects_referenced",
                self.distinct_cold_objects_referenced.to_string(),
            ),
            ("false_inactive_objects", self.false_inactivity.count.to_string()),
            ("inactive_objects", self.false_inactivity.total.to_string()),
            ("false_inactivity", format!("{:.6}", self.false_inactivity.ratio)),
            ("pins", self.pins.to_string()),
            ("unpins", self.unpins.to_string()),
            ("max_pinned", self.max_pinned.to_string()),
            ("mean_pinned", format!("{:.3}", self.mean_pinned)),
            ("walks", self.walks.to_string()),
            ("frames_walked", self.frames_walked.to_string()),
            ("bits_tested", self.bits_tested.to_string()),
            ("bits_set", self.bits_set.to_string()),
            ("samples_harvested", self.samples_harvested.to_string()),
            ("samples_discarded_stale", self.samples_discarded_stale.to_string()),
            ("oracle_accesses", self.oracle_accesses.to_string()),
            ("oracle_bits_set", self.oracle_bits_set.to_string()),
            ("stack_collectible_regions", self.stack_collectible_regions.to_string()),
            (
                "oracle_collectible_regions",
                self.oracle_collectible_regions.to_string(),
            ),
            ("stack_mean_convergence_ms", opt(self.stack_mean_convergence_ms)),
            ("oracle_mean_convergence_ms", opt(self.oracle_mean_convergence_ms)),
            ("average_cold_duration_ms", opt(self.stack_mean_convergence_ms)),
            ("planted_cold_bytes", self.planted_cold_bytes.to_string()),
            (
                "planted_cold_bytes_exposed",
                self.planted_cold_bytes_exposed.to_string(),
            ),
            (
                "planted_cold_bytes_harvested",
                self.planted_cold_bytes_harvested.to_string(),
            ),
            ("planted_hot_in_cold", self.planted_hot_in_cold.to_string()),
            ("cold_area_non_collectible", self.cold_area_non_collectible.to_string()),
            ("marker_ref_field_reads", self.marker_ref_field_reads.to_string()),
            (
                "marker_cold_ref_field_reads",
                self.marker_cold_ref_field_reads.to_string(),
            ),
        ]
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub cycles: Vec<CycleRow>,
    pub cold_events: Vec<ColdEventRow>,
    pub summary: Summary,
    pub inclusion: Option<InclusionReport>,
    pub stack_log: DetectorLog,
    pub oracle_log: Option<DetectorLog>,
    /// Policy or collector rule breaches observed while running. Empty on a
    /// healthy run.
    pub violations: Vec<String>,
    pub truth: GroundTruth,
    pub trace_digest: u64,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    heap: Heap,
    threads: Vec<MutatorThread>,
    oracle: Option<OracleLog>,
    stack_log: DetectorLog,
    oracle_log: DetectorLog,
    rng: ChaCha8Rng,
    gc_epoch: u64,
    cold_full: bool,
    truth: GroundTruth,
    report: RunReport,
    cycle_harvest: HarvestStats,
    total_harvest: HarvestStats,
    exposed_cold: BTreeSet<ObjectId>,
    moved_to_cold: BTreeSet<ObjectId>,
    cold_bytes_moved: u64,
    pinned_sum: u64,
}

/// Runs the configured workload live.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    run_with(config, None, None)
}

/// Runs a scenario from `replay` (or the configured workload when `None`),
/// optionally recording the event stream to `record`.
pub fn run_with(config: &ScenarioConfig, replay: Option<Replay>, record: Option<&mut dyn Write>) -> Result<RunReport> {
    config.validate()?;
    let (source, header) = match replay {
        Some(r) => {
            let header = r.header;
            (EventSource::Replay(r), header)
        }
        None => {
            let w = workload::build(&config.workload, &config.heap)?;
            let header = TraceHeader {
                threads: config.workload.thread_count,
                fanout: config.workload.frame_ref_fanout,
                duration_ms: config.workload.duration_ms,
            };
            (EventSource::Live(Box::new(w)), header)
        }
    };
    let truth = source.truth();
    let mut sim = Sim {
        cfg: config,
        heap: Heap::new(config.heap.clone())?,
        threads: (0..header.threads)
            .map(|i| MutatorThread::new(i, header.fanout as usize))
            .collect(),
        oracle: config.oracle_enabled.then(OracleLog::new),
        stack_log: DetectorLog::new(0),
        oracle_log: DetectorLog::new(0),
        rng: ChaCha8Rng::seed_from_u64(config.workload.seed ^ 0x9e37_79b9_7f4a_7c15),
        gc_epoch: 0,
        cold_full: false,
        truth: truth.clone(),
        report: RunReport::default(),
        cycle_harvest: HarvestStats::default(),
        total_harvest: HarvestStats::default(),
        exposed_cold: BTreeSet::new(),
        moved_to_cold: BTreeSet::new(),
        cold_bytes_moved: 0,
        pinned_sum: 0,
    };
    let mut writer = match record {
        Some(out) => Some(TraceWriter::new(out, &header, &truth)?),
        None => None,
    };
    let digest = sim.run(source, header.duration_ms, writer.as_mut())?;
    if let Some(w) = writer {
        w.finish()?;
    }
    sim.finish(digest)
}

fn alloc_demand(events: &[TraceEvent]) -> (u64, u32) {
    let mut bytes = 0;
    let mut max = 0;
    for e in events {
        if let TraceEvent::Alloc { size, .. } = e {
            bytes += footprint(*size) as u64;
            max = max.max(*size);
        }
    }
    (bytes, max)
}

impl<'a> Sim<'a> {
    fn run<W: Write>(
        &mut self,
        mut source: EventSource,
        duration: Millis,
        mut writer: Option<&mut TraceWriter<W>>,
    ) -> Result<u64> {
        let mut hasher = FxHasher::default();
        let mut now = 0;
        while now < duration {
            if let Some(limit) = self.cfg.max_partial_gcs {
                if self.report.summary.partial_gcs >= limit {
                    break;
                }
            }
            let events = source.step(now);
            events.hash(&mut hasher);
            if let Some(w) = writer.as_mut() {
                for e in &events {
                    w.event(e)?;
                }
            }

            let (bytes, max) = alloc_demand(&events);
            if !self.heap.can_absorb(bytes, max) {
                let ran_global = self.collect(now)?;
                if !ran_global && !self.heap.can_absorb(bytes, max) {
                    self.global(now)?;
                }
            }
            for e in &events {
                self.apply(e, now)?;
            }

            let mut walk_stats = (0u64, 0u64);
            for t in self.threads.iter_mut() {
                if t.walk_pending {
                    let r = t.walk_stack(now, self.gc_epoch, &self.cfg.sampling)?;
                    walk_stats.0 += 1;
                    walk_stats.1 += r.frames_walked as u64;
                }
            }
            self.report.summary.walks += walk_stats.0;
            self.report.summary.frames_walked += walk_stats.1;
            if now % self.cfg.sampling.poll_interval == 0 {
                let h = daemon_poll(&mut self.threads, &mut self.heap, now, self.gc_epoch)?;
                self.cycle_harvest.absorb(&h);
                self.total_harvest.absorb(&h);
            }
            now += 1;
        }
        self.report.summary.final_time_ms = now;
        Ok(hasher.finish())
    }

    fn apply(&mut self, e: &TraceEvent, now: Millis) -> Result<()> {
        match e {
            TraceEvent::Alloc {
                id, kind, size, refs, ..
            } => {
                let got = match self.heap.allocate(*kind, *size, refs.clone(), now) {
                    Err(SimError::GcRequired) => {
                        self.report.summary.mid_tick_gcs += 1;
                        self.collect(now)?;
                        match self.heap.allocate(*kind, *size, refs.clone(), now) {
                            Err(SimError::GcRequired) => {
                                self.global(now)?;
                                self.heap
                                    .allocate(*kind, *size, refs.clone(), now)
                                    .map_err(|e| match e {
                                        SimError::GcRequired => SimError::HeapExhausted(format!(
                                            "no room for a {size}-byte object at {now} ms"
                                        )),
                                        other => other,
                                    })?
                            }
                            other => other?,
                        }
                    }
                    other => other?,
                };
                if got != *id {
                    return Err(SimError::Usage(format!(
                        "trace allocates {id} but the heap assigned {got}"
                    )));
                }
            }
            TraceEvent::Kill { id, .. } => self.heap.unroot(*id)?,
            TraceEvent::Read { thread, id, slot, .. } | TraceEvent::Write { thread, id, slot, .. } => {
                if self.heap.object(*id).is_none() {
                    return Err(SimError::Usage(format!("access to dead object {id} at {now} ms")));
                }
                if let Some(oracle) = self.oracle.as_mut() {
                    oracle.record_access(&self.heap, *id, now);
                }
                if let Some(s) = slot {
                    self.thread(*thread)?.write_ref(*s as usize, *id, now)?;
                }
            }
            TraceEvent::Push { thread, tag, .. } => self.thread(*thread)?.push_frame(*tag),
            TraceEvent::Pop { thread, .. } => {
                if self.thread(*thread)?.pop_frame().is_none() {
                    return Err(SimError::Usage(format!("pop on empty stack of thread {thread}")));
                }
            }
        }
        Ok(())
    }

    fn thread(&mut self, id: u32) -> Result<&mut MutatorThread> {
        self.threads
            .get_mut(id as usize)
            .ok_or_else(|| SimError::Usage(format!("unknown thread {id}")))
    }

    fn stack_roots(&self) -> Vec<ObjectId> {
        let mut roots: Vec<ObjectId> = self.threads.iter().flat_map(|t| t.stack_refs()).collect();
        roots.sort_unstable();
        roots.dedup();
        roots
    }

    fn rebaseline(&mut self) {
        for t in self.threads.iter_mut() {
            t.rebaseline(self.cfg.sampling.trace_capacity);
        }
    }

    /// Marks readiness for both detectors on every open episode.
    fn check_readiness(&mut self, now: Millis) {
        let t_cold = self.cfg.policy.t_cold;
        for id in self.heap.pinned_ids() {
            let region = self.heap.region(id);
            self.stack_log.note_transition(id, region.t_inactive);
            if gc::cold_collect_ready(region, now, t_cold) {
                self.stack_log.check_ready(id, now, t_cold);
            }
            if let Some(mirror) = self.oracle.as_ref().and_then(|o| o.region(id)) {
                self.oracle_log.note_transition(id, mirror.last_transition);
                let quiet_enough = gc::cold_collect_ready(region, now, 0) && now - mirror.last_transition > t_cold;
                if quiet_enough {
                    self.oracle_log.check_ready(id, now, t_cold);
                }
            }
        }
    }

    fn apply_decisions(&mut self, decisions: &[PinDecision], now: Millis) {
        for d in decisions {
            match d.action {
                PinAction::Pin => {
                    self.report.summary.pins += 1;
                    self.stack_log.open(d.region, now);
                    if let Some(o) = self.oracle.as_mut() {
                        o.open_region(&self.heap, d.region, now);
                        self.oracle_log.open(d.region, now);
                    }
                }
                PinAction::Unpin(_) => {
                    self.report.summary.unpins += 1;
                    self.stack_log.close(d.region, now);
                    if let Some(o) = self.oracle.as_mut() {
                        o.close_region(d.region);
                        self.oracle_log.close(d.region, now);
                    }
                }
                PinAction::Hold => {}
            }
        }
    }

    /// A partial GC, followed by a global one when it is due or the cold
    /// area filled up. Returns whether the global GC ran.
    fn collect(&mut self, now: Millis) -> Result<bool> {
        self.partial(now)?;
        let every = self.cfg.gc.global_gc_every as u64;
        if self.cold_full || self.report.summary.partial_gcs.is_multiple_of(every) {
            self.global(now)?;
            return Ok(true);
        }
        Ok(false)
    }

    fn partial(&mut self, now: Millis) -> Result<()> {
        let cfg = self.cfg;
        let policy_cfg = &cfg.policy;
        self.gc_epoch += 1;
        let cycle = self.report.summary.partial_gcs + 1;
        gc::overflow_remembered_sets(&mut self.heap, self.cfg.gc.rs_overflow_prob, &mut self.rng);
        self.check_readiness(now);
        let cs = gc::select_collection_set(&self.heap, now, policy_cfg, &self.cfg.gc);

        for &id in &cs.regions {
            let r = self.heap.region(id);
            match r.state() {
                RegionState::Cold => self
                    .report
                    .violations
                    .push(format!("cycle {cycle}: cold region {id} in collection set")),
                RegionState::Pinned => {
                    if now - r.t_inactive <= policy_cfg.t_cold
                        || r.remembered_set != crate::heap::RememberedSet::Accurate
                    {
                        self.report.violations.push(format!(
                            "cycle {cycle}: pinned region {id} collected before it went cold"
                        ));
                    }
                    let inactive: BTreeSet<ObjectId> = self.heap.cold_candidates(id).into_iter().collect();
                    if let Some(o) = self.oracle.as_ref() {
                        let active = o.active_objects(&self.heap, id);
                        let fi = crate::oracle::false_inactivity(&inactive, &active, inactive.len() as u64);
                        self.report.summary.false_inactivity = self.report.summary.false_inactivity.merge(&fi);
                    }
                }
                _ => {}
            }
        }

        let roots = self.stack_roots();
        let out = gc::run_partial_gc(&mut self.heap, &cs, now, &roots, cycle, policy_cfg)?;
        self.report.summary.partial_gcs = cycle;
        self.report.summary.evacuation_failures += out.stats.evacuation_failures;
        for c in &out.cold_collections {
            self.record_cold(cycle, now, c);
        }
        self.apply_decisions(&out.decisions, now);
        if out.cold_area_full {
            self.cold_full = true;
        }

        let decisions = policy::end_of_partial_gc(&mut self.heap, now, policy_cfg, !self.cold_full);
        self.apply_decisions(&decisions, now);
        self.note_exposure(&decisions);

        let count = |s| self.heap.count_in_state(s);
        let row = CycleRow {
            cycle,
            time_ms: now,
            young: count(RegionState::Young),
            unpinned: count(RegionState::Unpinned),
            pinned: count(RegionState::Pinned),
            cold: count(RegionState::Cold),
            refs: self.cycle_harvest.per_class_refs,
        };
        self.cycle_harvest = HarvestStats::default();
        if row.pinned > policy_cfg.p_max as usize {
            self.report
                .violations
                .push(format!("cycle {cycle}: {} pinned regions exceed p_max", row.pinned));
        }
        self.report.summary.max_pinned = self.report.summary.max_pinned.max(row.pinned);
        self.pinned_sum += row.pinned as u64;
        self.report.cycles.push(row);
        self.check_heap(cycle)?;
        self.rebaseline();
        Ok(())
    }

    fn global(&mut self, now: Millis) -> Result<()> {
        self.gc_epoch += 1;
        let roots = self.stack_roots();
        let cycle = self.report.summary.partial_gcs;
        let out = gc::run_global_gc(&mut self.heap, now, &roots, cycle)?;
        self.report.summary.global_gcs += 1;
        self.report.summary.evacuation_failures += out.stats.evacuation_failures;
        self.report.summary.cold_bytes_reclaimed += out.stats.cold_bytes_reclaimed;
        self.apply_decisions(&out.decisions, now);
        self.cold_full = false;
        self.check_heap(cycle)?;
        self.rebaseline();
        Ok(())
    }

    fn check_heap(&mut self, cycle: u64) -> Result<()> {
        let problems = self.heap.check_invariants();
        if let Some(p) = problems.first() {
            return Err(SimError::Invariant(format!("after cycle {cycle}: {p}")));
        }
        Ok(())
    }

    fn record_cold(&mut self, cycle: u64, now: Millis, c: &ColdCollection) {
        self.report.cold_events.push(ColdEventRow {
            cycle,
            time_ms: now,
            region: c.region.0,
            objects: c.objects,
            bytes: c.bytes,
        });
        self.report.summary.cold_objects += c.objects;
        self.cold_bytes_moved += c.bytes;
        self.moved_to_cold.extend(c.moved.iter().copied());
    }

    /// Planted cold objects sitting in a region that is selectable right
    /// now count as exposed to the detector.
    fn note_exposure(&mut self, decisions: &[PinDecision]) {
        if self.truth.cold_ids.is_empty() {
            return;
        }
        let cfg = self.cfg;
        let policy_cfg = &cfg.policy;
        let mut selectable: Vec<_> = decisions
            .iter()
            .filter(|d| d.action == PinAction::Pin)
            .map(|d| d.region)
            .collect();
        for r in self.heap.regions() {
            if r.state() == RegionState::Unpinned {
                let mut probe = r.clone();
                probe.census = self.heap.census_of(r.id());
                if policy::is_selectable(&probe, policy_cfg) {
                    selectable.push(r.id());
                }
            }
        }
        for id in selectable {
            for o in self.heap.region(id).residents() {
                if self.truth.cold_ids.contains(o) {
                    self.exposed_cold.insert(*o);
                }
            }
        }
    }

    fn finish(mut self, digest: u64) -> Result<RunReport> {
        self.report.trace_digest = digest;
        self.stack_log.trace_digest = digest;
        self.oracle_log.trace_digest = digest;
        let s = &mut self.report.summary;
        s.cold_bytes = self.cold_bytes_moved - s.cold_bytes_reclaimed;
        s.cold_area_refs = self.total_harvest.refs_in(RegionState::Cold);
        s.distinct_cold_objects_referenced = self.total_harvest.cold_hits.iter().collect::<BTreeSet<_>>().len() as u64;
        s.bits_tested = self.total_harvest.bits_tested;
        s.bits_set = self.total_harvest.activity_transitions;
        s.samples_harvested = self.total_harvest.samples_harvested;
        s.samples_discarded_stale = self.total_harvest.samples_discarded_stale;
        s.mean_pinned = if s.partial_gcs == 0 {
            0.0
        } else {
            self.pinned_sum as f64 / s.partial_gcs as f64
        };
        if let Some(o) = &self.oracle {
            s.oracle_accesses = o.accesses;
            s.oracle_bits_set = o.bits_set;
        }
        s.stack_collectible_regions = self.stack_log.collectible().len() as u64;
        s.stack_mean_convergence_ms = self.stack_log.mean_convergence();

        let size_of = |heap: &Heap, id: &ObjectId| heap.object(*id).map(|o| o.size as u64);
        let mut planted = 0;
        for id in &self.truth.cold_ids {
            planted += size_of(&self.heap, id).unwrap_or(0);
        }
        s.planted_cold_bytes = planted;
        for id in &self.exposed_cold {
            let Some(bytes) = size_of(&self.heap, id) else { continue };
            s.planted_cold_bytes_exposed += bytes;
            if self.moved_to_cold.contains(id) {
                s.planted_cold_bytes_harvested += bytes;
            }
        }
        s.planted_hot_in_cold = self.truth.hot_ids.intersection(&self.moved_to_cold).count() as u64;
        s.cold_area_non_collectible = self
            .heap
            .cold_area_objects()
            .iter()
            .filter(|id| {
                !matches!(
                    self.heap.object(**id).map(|o| o.kind),
                    Some(ObjectKind::PrimitiveArray | ObjectKind::Leaf)
                )
            })
            .count() as u64;
        let probe = self.heap.probe();
        s.marker_ref_field_reads = probe.ref_field_reads;
        s.marker_cold_ref_field_reads = probe.cold_ref_field_reads;

        if self.oracle.is_some() {
            let inclusion = compare_detectors(&self.stack_log, &self.oracle_log)?;
            s.oracle_collectible_regions = inclusion.oracle_collectible.len() as u64;
            s.oracle_mean_convergence_ms = self.oracle_log.mean_convergence();
            self.report.inclusion = Some(inclusion);
            self.report.oracle_log = Some(self.oracle_log);
        }
        self.report.stack_log = self.stack_log;
        self.report.truth = self.truth;
        Ok(self.report)
    }
}
