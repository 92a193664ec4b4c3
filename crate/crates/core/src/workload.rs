//! Seeded synthetic mutator. Plants a hot set and a cold set early, then
//! churns short-lived objects, touches hot objects at a steady rate and
//! cold objects rarely (or never). Every access that surfaces is written
//! into the acting thread's top frame.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};
use crate::heap::{footprint, HeapConfig, Millis, ObjectId, ObjectKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KindMix {
    pub primitive_array: f64,
    pub leaf: f64,
    pub internal: f64,
    pub primitive_fields: f64,
}

impl Default for KindMix {
    fn default() -> Self {
        KindMix {
            primitive_array: 0.4,
            leaf: 0.4,
            internal: 0.2,
            primitive_fields: 0.0,
        }
    }
}

impl KindMix {
    fn weights(&self) -> [(ObjectKind, f64); 4] {
        [
            (ObjectKind::PrimitiveArray, self.primitive_array),
            (ObjectKind::Leaf, self.leaf),
            (ObjectKind::Internal, self.internal),
            (ObjectKind::PrimitiveFieldsOnly, self.primitive_fields),
        ]
    }

    fn draw(&self, rng: &mut ChaCha8Rng, cold: bool) -> ObjectKind {
        let weights: Vec<(ObjectKind, f64)> = self
            .weights()
            .into_iter()
            .filter(|(k, _)| !cold || matches!(k, ObjectKind::PrimitiveArray | ObjectKind::Leaf))
            .collect();
        let total: f64 = weights.iter().map(|w| w.1).sum();
        if total <= 0.0 {
            return ObjectKind::Leaf;
        }
        let mut x = rng.gen::<f64>() * total;
        for (k, w) in &weights {
            if x < *w {
                return *k;
            }
            x -= w;
        }
        weights.last().map(|w| w.0).unwrap_or(ObjectKind::Leaf)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadSpec {
    pub seed: u64,
    pub duration_ms: Millis,
    pub thread_count: u32,
    /// Churn allocations per ms, once the planted sets are in place.
    pub alloc_rate: f64,
    pub size_min: u32,
    pub size_max: u32,
    pub kind_mix: KindMix,
    pub hot_set_size: u32,
    pub hot_access_rate: f64,
    pub cold_set_size: u32,
    pub cold_access_rate: f64,
    pub call_depth_min: u32,
    pub call_depth_max: u32,
    pub frame_ref_fanout: u32,
    /// Fraction of accesses written into a frame.
    pub frame_surface_fraction: f64,
    pub churn_lifetime_min_ms: Millis,
    pub churn_lifetime_max_ms: Millis,
    /// Per-thread probability of a push or pop each ms.
    pub call_rate: f64,
    /// Fraction of cold objects shuffled among hot ones; the rest are
    /// allocated first as one block.
    pub cold_dispersion: f64,
    /// Planted-set bytes allocated per ms during setup.
    pub setup_bytes_per_tick: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            seed: 1,
            duration_ms: 60_000,
            thread_count: 4,
            alloc_rate: 20.0,
            size_min: 16,
            size_max: 256,
            kind_mix: KindMix::default(),
            hot_set_size: 2000,
            hot_access_rate: 8.0,
            cold_set_size: 2000,
            cold_access_rate: 0.0,
            call_depth_min: 2,
            call_depth_max: 12,
            frame_ref_fanout: 8,
            frame_surface_fraction: 1.0,
            churn_lifetime_min_ms: 1,
            churn_lifetime_max_ms: 200,
            call_rate: 0.2,
            cold_dispersion: 1.0,
            setup_bytes_per_tick: 64 * 1024,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(SimError::Config(m));
        let mix: f64 = self.kind_mix.weights().iter().map(|w| w.1).sum();
        if self.kind_mix.weights().iter().any(|w| w.1 < 0.0) || (mix - 1.0).abs() > 1e-9 {
            return err(format!(
                "kind_mix fractions must be non-negative and sum to 1, got {mix}"
            ));
        }
        for (name, rate) in [
            ("alloc_rate", self.alloc_rate),
            ("hot_access_rate", self.hot_access_rate),
            ("cold_access_rate", self.cold_access_rate),
        ] {
            if !(rate >= 0.0 && rate.is_finite()) {
                return err(format!("{name} must be a finite non-negative rate"));
            }
        }
        for (name, p) in [
            ("frame_surface_fraction", self.frame_surface_fraction),
            ("call_rate", self.call_rate),
            ("cold_dispersion", self.cold_dispersion),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return err(format!("{name} must be in [0, 1]"));
            }
        }
        if self.thread_count == 0 {
            return err("thread_count must be positive".into());
        }
        if self.size_min == 0 || self.size_min > self.size_max {
            return err("size range must satisfy 0 < size_min <= size_max".into());
        }
        if self.call_depth_min == 0 || self.call_depth_min > self.call_depth_max {
            return err("call depth must satisfy 0 < call_depth_min <= call_depth_max".into());
        }
        if self.frame_ref_fanout == 0 {
            return err("frame_ref_fanout must be positive".into());
        }
        if self.churn_lifetime_min_ms > self.churn_lifetime_max_ms {
            return err("churn lifetime range is inverted".into());
        }
        if self.setup_bytes_per_tick == 0 {
            return err("setup_bytes_per_tick must be positive".into());
        }
        if self.hot_access_rate > 0.0 && self.hot_set_size == 0 {
            return err("hot_access_rate needs a non-empty hot set".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TraceEvent {
    Alloc {
        time: Millis,
        thread: u32,
        id: ObjectId,
        kind: ObjectKind,
        size: u32,
        refs: Vec<ObjectId>,
    },
    Kill {
        time: Millis,
        id: ObjectId,
    },
    Read {
        time: Millis,
        thread: u32,
        id: ObjectId,
        slot: Option<u32>,
    },
    Write {
        time: Millis,
        thread: u32,
        id: ObjectId,
        slot: Option<u32>,
    },
    Push {
        time: Millis,
        thread: u32,
        tag: u64,
    },
    Pop {
        time: Millis,
        thread: u32,
    },
}

impl TraceEvent {
    pub fn time(&self) -> Millis {
        match self {
            TraceEvent::Alloc { time, .. }
            | TraceEvent::Kill { time, .. }
            | TraceEvent::Read { time, .. }
            | TraceEvent::Write { time, .. }
            | TraceEvent::Push { time, .. }
            | TraceEvent::Pop { time, .. } => *time,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub cold_ids: BTreeSet<ObjectId>,
    pub hot_ids: BTreeSet<ObjectId>,
}

#[derive(Clone, Copy, Debug)]
struct Planted {
    kind: ObjectKind,
    size: u32,
    cold: bool,
}

#[derive(Clone, Debug)]
pub struct Workload {
    spec: WorkloadSpec,
    rng: ChaCha8Rng,
    setup: VecDeque<Planted>,
    setup_emitted: Vec<ObjectId>,
    truth: GroundTruth,
    hot: Vec<ObjectId>,
    cold: Vec<ObjectId>,
    hot_order: Vec<ObjectId>,
    hot_cursor: usize,
    next_id: u64,
    alloc_carry: f64,
    hot_carry: f64,
    cold_carry: f64,
    deaths: BTreeMap<Millis, Vec<ObjectId>>,
    depths: Vec<u32>,
    next_tag: u64,
    next_thread: u32,
    writes: Vec<u32>,
}

/// Generator for `spec`. Fails if the spec is invalid or the planted sets
/// cannot fit in the heap outside the cold area.
pub fn build(spec: &WorkloadSpec, heap: &HeapConfig) -> Result<Workload> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let planted = |cold: bool, rng: &mut ChaCha8Rng| Planted {
        kind: spec.kind_mix.draw(rng, cold),
        size: rng.gen_range(spec.size_min..=spec.size_max),
        cold,
    };
    let cold: Vec<Planted> = (0..spec.cold_set_size).map(|_| planted(true, &mut rng)).collect();
    let hot: Vec<Planted> = (0..spec.hot_set_size).map(|_| planted(false, &mut rng)).collect();
    let setup_bytes: u64 = cold.iter().chain(&hot).map(|p| footprint(p.size) as u64).sum();
    let usable = heap.main_capacity() - heap.survivor_reserve as u64 * heap.region_size as u64;
    if setup_bytes > usable {
        return Err(SimError::Config(format!(
            "planted sets need {setup_bytes} bytes but the heap offers {usable}"
        )));
    }
    if spec.size_max > heap.region_size {
        return Err(SimError::Config("size_max exceeds region_size".into()));
    }

    let dispersed = (spec.cold_dispersion * cold.len() as f64).round() as usize;
    let (block, mixed) = cold.split_at(cold.len() - dispersed);
    let mut shuffled: Vec<Planted> = mixed.iter().chain(&hot).copied().collect();
    shuffled.shuffle(&mut rng);
    let setup: VecDeque<Planted> = block.iter().chain(&shuffled).copied().collect();

    let mut truth = GroundTruth::default();
    for (i, p) in setup.iter().enumerate() {
        let id = ObjectId(i as u64);
        if p.cold {
            truth.cold_ids.insert(id);
        } else {
            truth.hot_ids.insert(id);
        }
    }
    let hot_ids: Vec<ObjectId> = truth.hot_ids.iter().copied().collect();
    let cold_ids: Vec<ObjectId> = truth.cold_ids.iter().copied().collect();
    Ok(Workload {
        spec: spec.clone(),
        rng,
        setup,
        setup_emitted: Vec::new(),
        truth,
        hot_order: hot_ids.clone(),
        hot: hot_ids,
        cold: cold_ids,
        hot_cursor: usize::MAX,
        next_id: 0,
        alloc_carry: 0.0,
        hot_carry: 0.0,
        cold_carry: 0.0,
        deaths: BTreeMap::new(),
        depths: vec![0; spec.thread_count as usize],
        next_tag: 1,
        next_thread: 0,
        writes: vec![0; spec.thread_count as usize],
    })
}

impl Workload {
    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn setup_done(&self) -> bool {
        self.setup.is_empty()
    }

    fn fresh_id(&mut self) -> ObjectId {
        let id = ObjectId(self.next_id);
        self.next_id += 1;
        id
    }

    fn round_robin(&mut self) -> u32 {
        let t = self.next_thread;
        self.next_thread = (t + 1) % self.spec.thread_count;
        t
    }

    /// Frame slot for the next access by `thread`, or `None` when the
    /// access does not surface or the top frame is already full this tick.
    fn surface(&mut self, thread: u32) -> Option<u32> {
        if self.spec.frame_surface_fraction < 1.0 && self.rng.gen::<f64>() >= self.spec.frame_surface_fraction {
            return None;
        }
        let w = &mut self.writes[thread as usize];
        if *w >= self.spec.frame_ref_fanout {
            return None;
        }
        *w += 1;
        Some(*w - 1)
    }

    /// Thread with spare frame slots this tick, round-robin.
    fn pick_thread(&mut self) -> u32 {
        for _ in 0..self.spec.thread_count {
            let t = self.round_robin();
            if self.writes[t as usize] < self.spec.frame_ref_fanout {
                return t;
            }
        }
        self.round_robin()
    }

    fn access(&mut self, now: Millis, id: ObjectId, out: &mut Vec<TraceEvent>) {
        let thread = self.pick_thread();
        let slot = self.surface(thread);
        let read = self.rng.gen_bool(0.5);
        out.push(if read {
            TraceEvent::Read {
                time: now,
                thread,
                id,
                slot,
            }
        } else {
            TraceEvent::Write {
                time: now,
                thread,
                id,
                slot,
            }
        });
    }

    fn take_rate(carry: &mut f64, rate: f64) -> u64 {
        *carry += rate;
        let n = carry.floor();
        *carry -= n;
        n as u64
    }

    /// Events for tick `now`, in application order: stack motion, deaths,
    /// allocations, then accesses.
    pub fn step(&mut self, now: Millis) -> Vec<TraceEvent> {
        let mut out = Vec::new();
        self.writes.iter_mut().for_each(|w| *w = 0);

        for thread in 0..self.spec.thread_count {
            let depth = self.depths[thread as usize];
            let (lo, hi) = (self.spec.call_depth_min, self.spec.call_depth_max);
            if depth < lo {
                for _ in depth..lo {
                    out.push(TraceEvent::Push {
                        time: now,
                        thread,
                        tag: self.next_tag,
                    });
                    self.next_tag += 1;
                }
                self.depths[thread as usize] = lo;
                continue;
            }
            if self.spec.call_rate > 0.0 && self.rng.gen::<f64>() < self.spec.call_rate {
                let push = depth == lo || (depth < hi && self.rng.gen_bool(0.5));
                if push && depth < hi {
                    out.push(TraceEvent::Push {
                        time: now,
                        thread,
                        tag: self.next_tag,
                    });
                    self.next_tag += 1;
                    self.depths[thread as usize] += 1;
                } else if depth > lo {
                    out.push(TraceEvent::Pop { time: now, thread });
                    self.depths[thread as usize] -= 1;
                }
            }
        }

        if let Some(dying) = self.deaths.remove(&now) {
            for id in dying {
                out.push(TraceEvent::Kill { time: now, id });
            }
        }

        if !self.setup.is_empty() {
            let mut bytes = 0u64;
            while let Some(p) = self.setup.front().copied() {
                if bytes > 0 && bytes + footprint(p.size) as u64 > self.spec.setup_bytes_per_tick {
                    break;
                }
                self.setup.pop_front();
                bytes += footprint(p.size) as u64;
                let refs = if p.kind == ObjectKind::Internal && !self.setup_emitted.is_empty() {
                    let n = self.rng.gen_range(1..=3usize);
                    (0..n)
                        .map(|_| self.setup_emitted[self.rng.gen_range(0..self.setup_emitted.len())])
                        .collect()
                } else {
                    Vec::new()
                };
                let id = self.fresh_id();
                let thread = self.round_robin();
                out.push(TraceEvent::Alloc {
                    time: now,
                    thread,
                    id,
                    kind: p.kind,
                    size: p.size,
                    refs,
                });
                self.setup_emitted.push(id);
            }
            return out;
        }

        for _ in 0..Self::take_rate(&mut self.alloc_carry, self.spec.alloc_rate) {
            let kind = self.spec.kind_mix.draw(&mut self.rng, false);
            let size = self.rng.gen_range(self.spec.size_min..=self.spec.size_max);
            let refs = if kind == ObjectKind::Internal && !self.hot.is_empty() {
                vec![self.hot[self.rng.gen_range(0..self.hot.len())]]
            } else {
                Vec::new()
            };
            let id = self.fresh_id();
            let thread = self.pick_thread();
            out.push(TraceEvent::Alloc {
                time: now,
                thread,
                id,
                kind,
                size,
                refs,
            });
            let slot = self.surface(thread);
            out.push(TraceEvent::Write {
                time: now,
                thread,
                id,
                slot,
            });
            let life = self
                .rng
                .gen_range(self.spec.churn_lifetime_min_ms..=self.spec.churn_lifetime_max_ms)
                .max(1);
            self.deaths.entry(now + life).or_default().push(id);
        }

        for _ in 0..Self::take_rate(&mut self.hot_carry, self.spec.hot_access_rate) {
            if self.hot_cursor >= self.hot_order.len() {
                self.hot_order.shuffle(&mut self.rng);
                self.hot_cursor = 0;
            }
            let id = self.hot_order[self.hot_cursor];
            self.hot_cursor += 1;
            self.access(now, id, &mut out);
        }

        if !self.cold.is_empty() {
            for _ in 0..Self::take_rate(&mut self.cold_carry, self.spec.cold_access_rate) {
                let id = self.cold[self.rng.gen_range(0..self.cold.len())];
                self.access(now, id, &mut out);
            }
        }
        out
    }
}
