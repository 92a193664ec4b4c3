//! Mutator stacks and the activity sampler.
//!
//! Each mutator keeps the frame traces of its previous walk and walks its
//! stack top-down only until it reaches a frame that has not changed since
//! then. The daemon harvests completed walks, bumps region reference
//! counters and sets activity bits in pinned and cold regions.

use rustc_hash::FxHasher;
use std::hash::{Hash, Hasher};

use crate::error::{Result, SimError};
use crate::heap::{Heap, Millis, ObjectId, RegionState};

/// Frames built by `push_frame` start with a tag slot and a write-stamp slot.
pub const FRAME_HEADER: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    Ref(ObjectId),
    Prim(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    /// Grows with stack depth; unique within a live stack.
    pub base: u64,
    pub slots: Vec<Slot>,
    last_write: Option<Millis>,
}

impl Frame {
    pub fn new(base: u64, slots: Vec<Slot>) -> Frame {
        Frame {
            base,
            slots,
            last_write: None,
        }
    }

    pub fn refs(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.slots.iter().filter_map(|s| match s {
            Slot::Ref(o) => Some(*o),
            Slot::Prim(_) => None,
        })
    }

    pub fn trace(&self) -> FrameTrace {
        FrameTrace {
            base: self.base,
            hash: frame_fingerprint(self),
        }
    }
}

/// Stable 64-bit digest of a frame's slot values. Each hashing step is a
/// bijection of the running state, so frames differing in exactly one slot
/// always get different digests.
pub fn frame_fingerprint(frame: &Frame) -> u64 {
    let mut h = FxHasher::default();
    frame.slots.len().hash(&mut h);
    for slot in &frame.slots {
        slot.hash(&mut h);
    }
    h.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FrameTrace {
    pub base: u64,
    pub hash: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplingConfig {
    pub ref_buffer_capacity: usize,
    pub trace_capacity: usize,
    pub poll_interval: Millis,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            ref_buffer_capacity: 512,
            trace_capacity: 128,
            poll_interval: 1,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ref_buffer_capacity == 0 || self.trace_capacity == 0 {
            return Err(SimError::Config("sampling buffers must have positive capacity".into()));
        }
        if self.poll_interval == 0 {
            return Err(SimError::Config("sample_interval_ms must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sample {
    pub object: ObjectId,
    pub time: Millis,
}

#[derive(Clone, Debug)]
pub struct MutatorThread {
    pub id: u32,
    stack: Vec<Frame>,
    ref_slots: usize,
    ref_buffer: Vec<Sample>,
    prev_traces: Vec<FrameTrace>,
    pub w_start: Option<Millis>,
    pub w_end: Option<Millis>,
    walk_epoch: u64,
    pub instrumented: bool,
    pub walk_pending: bool,
    walk_complete: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WalkResult {
    pub samples: Vec<ObjectId>,
    pub frames_walked: usize,
    pub new_traces: usize,
    /// The reference buffer filled before a matching frame was reached.
    pub stopped_early: bool,
    /// More changed frames than the trace array holds.
    pub trace_overflow: bool,
}

impl MutatorThread {
    /// A thread whose frames carry the header plus `ref_slots` reference
    /// slots.
    pub fn new(id: u32, ref_slots: usize) -> MutatorThread {
        MutatorThread {
            id,
            stack: Vec::new(),
            ref_slots,
            ref_buffer: Vec::new(),
            prev_traces: Vec::new(),
            w_start: None,
            w_end: None,
            walk_epoch: 0,
            instrumented: false,
            walk_pending: false,
            walk_complete: false,
        }
    }

    pub fn stack(&self) -> &[Frame] {
        &self.stack
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    pub fn ref_buffer(&self) -> &[Sample] {
        &self.ref_buffer
    }

    pub fn prev_traces(&self) -> &[FrameTrace] {
        &self.prev_traces
    }

    pub fn walk_complete(&self) -> bool {
        self.walk_complete
    }

    fn frame_bytes(&self) -> u64 {
        (self.ref_slots as u64 + FRAME_HEADER as u64) * 8
    }

    /// Pushes a fresh frame whose only non-null content is `tag`.
    pub fn push_frame(&mut self, tag: u64) {
        let base = (self.stack.len() as u64 + 1) * self.frame_bytes();
        let mut slots = Vec::with_capacity(self.ref_slots + FRAME_HEADER);
        slots.push(Slot::Prim(tag));
        slots.resize(self.ref_slots + FRAME_HEADER, Slot::Prim(0));
        self.stack.push(Frame::new(base, slots));
    }

    /// Pushes an arbitrary frame (scripted stacks in tests and tools).
    pub fn push_raw(&mut self, slots: Vec<Slot>) {
        let base = self.stack.last().map(|f| f.base).unwrap_or(0) + (slots.len() as u64 + 1) * 8;
        self.stack.push(Frame::new(base, slots));
    }

    pub fn pop_frame(&mut self) -> Option<Frame> {
        self.stack.pop()
    }

    /// Mutable access to a frame counted from the top (0 = top).
    pub fn frame_from_top_mut(&mut self, depth: usize) -> Option<&mut Frame> {
        let n = self.stack.len();
        if depth >= n {
            return None;
        }
        self.stack.get_mut(n - 1 - depth)
    }

    /// Stores a reference into reference slot `slot` of the top frame. The
    /// first write into a frame during a tick clears the frame's other
    /// reference slots and stamps the tick into the header, so a frame only
    /// ever holds references touched in the tick it was last written and a
    /// rewrite of an identical value still changes the frame.
    pub fn write_ref(&mut self, slot: usize, object: ObjectId, now: Millis) -> Result<()> {
        let ref_slots = self.ref_slots;
        let frame = self
            .stack
            .last_mut()
            .ok_or_else(|| SimError::Usage(format!("thread {} has no frame", self.id)))?;
        if slot >= ref_slots {
            return Err(SimError::Usage(format!("frame slot {slot} out of range")));
        }
        if frame.last_write != Some(now) {
            for s in frame.slots.iter_mut().skip(FRAME_HEADER) {
                *s = Slot::Prim(0);
            }
            frame.slots[1] = Slot::Prim(now);
            frame.last_write = Some(now);
        }
        frame.slots[slot + FRAME_HEADER] = Slot::Ref(object);
        Ok(())
    }

    /// Every reference held anywhere on the stack (GC roots).
    pub fn stack_refs(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.stack.iter().flat_map(|f| f.refs())
    }

    /// Replaces the previous-walk traces with the current stack, as the
    /// collector does at its safe point. Samples already buffered are left
    /// for the daemon to discard.
    pub fn rebaseline(&mut self, trace_capacity: usize) {
        self.prev_traces = self.stack.iter().rev().take(trace_capacity).map(Frame::trace).collect();
    }

    /// Walks the stack top-down, collecting references from frames changed
    /// since the previous walk. See the module docs.
    pub fn walk_stack(&mut self, now: Millis, gc_epoch: u64, config: &SamplingConfig) -> Result<WalkResult> {
        if !self.walk_pending {
            return Err(SimError::Usage(format!("thread {} has no walk pending", self.id)));
        }
        self.walk_pending = false;
        self.w_start = Some(now);
        self.walk_epoch = gc_epoch;

        let cap = config.trace_capacity;
        let mut result = WalkResult::default();
        let mut curr: Vec<FrameTrace> = Vec::new();
        let mut matched_at = None;
        'frames: for frame in self.stack.iter().rev() {
            let trace = frame.trace();
            if let Some(j) = self.prev_traces.iter().position(|t| *t == trace) {
                matched_at = Some(j);
                break;
            }
            result.frames_walked += 1;
            for object in frame.refs() {
                if self.ref_buffer.len() >= config.ref_buffer_capacity {
                    result.stopped_early = true;
                    break 'frames;
                }
                self.ref_buffer.push(Sample { object, time: now });
                result.samples.push(object);
            }
            if curr.len() < cap {
                curr.push(trace);
            } else {
                result.trace_overflow = true;
            }
        }
        result.new_traces = curr.len();

        // A discontinued walk keeps the old traces so the unwalked frames are
        // still seen as changed next time.
        if !result.stopped_early {
            let tail: &[FrameTrace] = match matched_at {
                Some(j) => &self.prev_traces[j..],
                None => &[],
            };
            let keep_tail = if tail.is_empty() {
                0
            } else {
                tail.len().min((cap - curr.len().min(cap)).max((cap / 2).max(1)))
            };
            let keep_head = curr.len().min(cap - keep_tail);
            let mut next = Vec::with_capacity(keep_head + keep_tail);
            next.extend_from_slice(&curr[..keep_head]);
            next.extend_from_slice(&tail[..keep_tail]);
            self.prev_traces = next;
        }
        self.w_end = Some(now);
        self.walk_complete = true;
        Ok(result)
    }

    fn take_completed(&mut self) -> Option<(u64, Vec<Sample>)> {
        if !self.walk_complete {
            return None;
        }
        self.walk_complete = false;
        Some((self.walk_epoch, std::mem::take(&mut self.ref_buffer)))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HarvestStats {
    pub samples_harvested: u64,
    pub samples_discarded_stale: u64,
    pub activity_transitions: u64,
    /// Activity bits tested (samples landing in pinned or cold regions).
    pub bits_tested: u64,
    /// Indexed by `RegionState::index`.
    pub per_class_refs: [u64; 4],
    /// Objects sampled while resident in the cold area.
    pub cold_hits: Vec<ObjectId>,
}

impl HarvestStats {
    pub fn refs_in(&self, state: RegionState) -> u64 {
        self.per_class_refs[state.index()]
    }

    pub fn absorb(&mut self, other: &HarvestStats) {
        self.samples_harvested += other.samples_harvested;
        self.samples_discarded_stale += other.samples_discarded_stale;
        self.activity_transitions += other.activity_transitions;
        self.bits_tested += other.bits_tested;
        for i in 0..4 {
            self.per_class_refs[i] += other.per_class_refs[i];
        }
        self.cold_hits.extend_from_slice(&other.cold_hits);
    }
}

/// One daemon polling round over all threads. Samples from walks that
/// started before the latest GC epoch are discarded.
pub fn daemon_poll(threads: &mut [MutatorThread], heap: &mut Heap, now: Millis, gc_epoch: u64) -> Result<HarvestStats> {
    let mut stats = HarvestStats::default();
    for thread in threads.iter_mut() {
        if !thread.instrumented {
            thread.instrumented = true;
            thread.walk_pending = true;
            continue;
        }
        let Some((epoch, samples)) = thread.take_completed() else {
            continue;
        };
        thread.walk_pending = true;
        if epoch < gc_epoch {
            stats.samples_discarded_stale += samples.len() as u64;
            continue;
        }
        for sample in samples {
            let Some(region) = heap.region_of(sample.object) else {
                return Err(SimError::Invariant(format!(
                    "fresh sample of freed object {}",
                    sample.object
                )));
            };
            stats.samples_harvested += 1;
            let state = heap.region(region).state();
            heap.region_mut(region).refs += 1;
            stats.per_class_refs[state.index()] += 1;
            if matches!(state, RegionState::Pinned | RegionState::Cold) {
                stats.bits_tested += 1;
                if state == RegionState::Cold {
                    stats.cold_hits.push(sample.object);
                }
                if heap
                    .set_activity(region, sample.object, now)
                    .map_err(|e| SimError::Invariant(e.to_string()))?
                {
                    stats.activity_transitions += 1;
                }
            }
        }
    }
    Ok(stats)
}
