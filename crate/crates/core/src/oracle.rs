//! Access-barrier oracle: sees every read and write the workload performs
//! and keeps its own activity maps for pinned regions, so the stack
//! sampler can be scored against ground truth.

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap as HashMap;

use crate::bitmap::SlotBitmap;
use crate::error::{Result, SimError};
use crate::heap::{Heap, Millis, ObjectId, RegionId, RegionState, SLOT_BYTES};

#[derive(Clone, Debug)]
pub struct OracleRegion {
    pub t_pinned: Millis,
    pub bits: SlotBitmap,
    pub last_transition: Millis,
}

#[derive(Clone, Debug, Default)]
pub struct OracleLog {
    last_access: HashMap<ObjectId, Millis>,
    regions: BTreeMap<RegionId, OracleRegion>,
    cold_accessed: BTreeSet<ObjectId>,
    pub accesses: u64,
    pub bits_set: u64,
}

impl OracleLog {
    pub fn new() -> OracleLog {
        OracleLog::default()
    }

    /// Starts mirroring a freshly pinned region.
    pub fn open_region(&mut self, heap: &Heap, region: RegionId, now: Millis) {
        let slots = heap.region(region).slot_count();
        self.regions.insert(
            region,
            OracleRegion {
                t_pinned: now,
                bits: SlotBitmap::new(slots),
                last_transition: now,
            },
        );
    }

    pub fn close_region(&mut self, region: RegionId) -> Option<OracleRegion> {
        self.regions.remove(&region)
    }

    pub fn region(&self, region: RegionId) -> Option<&OracleRegion> {
        self.regions.get(&region)
    }

    pub fn open_regions(&self) -> impl Iterator<Item = (&RegionId, &OracleRegion)> {
        self.regions.iter()
    }

    /// Records one access. Returns true when it flips an oracle bit.
    pub fn record_access(&mut self, heap: &Heap, object: ObjectId, now: Millis) -> bool {
        self.accesses += 1;
        let stamp = self.last_access.entry(object).or_insert(now);
        *stamp = (*stamp).max(now);
        let Some((region, offset)) = heap.location(object) else {
            return false;
        };
        if heap.region(region).state() == RegionState::Cold {
            self.cold_accessed.insert(object);
        }
        let Some(mirror) = self.regions.get_mut(&region) else {
            return false;
        };
        let flipped = !mirror.bits.set((offset / SLOT_BYTES) as usize);
        if flipped {
            mirror.last_transition = now;
            self.bits_set += 1;
        }
        flipped
    }

    pub fn last_access(&self, object: ObjectId) -> Option<Millis> {
        self.last_access.get(&object).copied()
    }

    /// Residents of an open region whose oracle bit is set.
    pub fn active_objects(&self, heap: &Heap, region: RegionId) -> BTreeSet<ObjectId> {
        let Some(mirror) = self.regions.get(&region) else {
            return BTreeSet::new();
        };
        mirror
            .bits
            .iter_ones()
            .filter_map(|slot| heap.resident_at(region, slot as u32 * SLOT_BYTES))
            .collect()
    }

    /// Objects accessed while resident in the cold area.
    pub fn cold_accessed(&self) -> &BTreeSet<ObjectId> {
        &self.cold_accessed
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FalseInactivity {
    pub count: u64,
    pub total: u64,
    pub ratio: f64,
}

impl FalseInactivity {
    pub fn from_counts(count: u64, total: u64) -> FalseInactivity {
        let ratio = if total == 0 { 0.0 } else { count as f64 / total as f64 };
        FalseInactivity { count, total, ratio }
    }

    pub fn merge(&self, other: &FalseInactivity) -> FalseInactivity {
        FalseInactivity::from_counts(self.count + other.count, self.total + other.total)
    }
}

/// Stack-inactive objects the oracle saw accessed, over all inactive objects.
pub fn false_inactivity(
    stack_inactive: &BTreeSet<ObjectId>,
    oracle_active: &BTreeSet<ObjectId>,
    all_inactive_count: u64,
) -> FalseInactivity {
    let count = stack_inactive.intersection(oracle_active).count() as u64;
    FalseInactivity::from_counts(count, all_inactive_count)
}

/// One pinning of one region, as seen by one detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Episode {
    pub region: RegionId,
    pub t_pinned: Millis,
    pub last_transition: Millis,
    pub ready_at: Option<Millis>,
    pub ended_at: Option<Millis>,
}

/// Time from pinning to the last activity transition, for episodes that
/// reached cold-collect readiness. `None` means not converged.
pub fn convergence_time(episode: &Episode) -> Option<Millis> {
    episode.ready_at.map(|_| episode.last_transition - episode.t_pinned)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DetectorLog {
    /// Digest of the event stream the detector ran on.
    pub trace_digest: u64,
    episodes: BTreeMap<(RegionId, Millis), Episode>,
    open: BTreeMap<RegionId, Millis>,
}

impl DetectorLog {
    pub fn new(trace_digest: u64) -> DetectorLog {
        DetectorLog {
            trace_digest,
            ..DetectorLog::default()
        }
    }

    pub fn open(&mut self, region: RegionId, now: Millis) {
        self.open.insert(region, now);
        self.episodes.insert(
            (region, now),
            Episode {
                region,
                t_pinned: now,
                last_transition: now,
                ready_at: None,
                ended_at: None,
            },
        );
    }

    fn current_mut(&mut self, region: RegionId) -> Option<&mut Episode> {
        let t = *self.open.get(&region)?;
        self.episodes.get_mut(&(region, t))
    }

    pub fn current(&self, region: RegionId) -> Option<&Episode> {
        let t = *self.open.get(&region)?;
        self.episodes.get(&(region, t))
    }

    pub fn open_regions(&self) -> Vec<RegionId> {
        self.open.keys().copied().collect()
    }

    pub fn note_transition(&mut self, region: RegionId, now: Millis) {
        if let Some(ep) = self.current_mut(region) {
            ep.last_transition = ep.last_transition.max(now);
        }
    }

    /// Marks the open episode ready if it has been quiet for more than
    /// `t_cold`. Returns true if it is ready (now or earlier).
    pub fn check_ready(&mut self, region: RegionId, now: Millis, t_cold: Millis) -> bool {
        match self.current_mut(region) {
            Some(ep) => {
                if ep.ready_at.is_none() && now - ep.last_transition > t_cold {
                    ep.ready_at = Some(now);
                }
                ep.ready_at.is_some()
            }
            None => false,
        }
    }

    pub fn close(&mut self, region: RegionId, now: Millis) {
        if let Some(ep) = self.current_mut(region) {
            ep.ended_at = Some(now);
        }
        self.open.remove(&region);
    }

    pub fn episodes(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.values()
    }

    /// Episodes that reached readiness.
    pub fn collectible(&self) -> BTreeSet<(RegionId, Millis)> {
        self.episodes
            .values()
            .filter(|e| e.ready_at.is_some())
            .map(|e| (e.region, e.t_pinned))
            .collect()
    }

    /// Mean convergence time over converged episodes.
    pub fn mean_convergence(&self) -> Option<f64> {
        let times: Vec<Millis> = self.episodes.values().filter_map(convergence_time).collect();
        if times.is_empty() {
            None
        } else {
            Some(times.iter().sum::<Millis>() as f64 / times.len() as f64)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvergencePair {
    pub region: RegionId,
    pub t_pinned: Millis,
    pub stack: Millis,
    pub oracle: Millis,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InclusionReport {
    pub stack_collectible: BTreeSet<(RegionId, Millis)>,
    pub oracle_collectible: BTreeSet<(RegionId, Millis)>,
    pub fully_included: bool,
    pub pairs: Vec<ConvergencePair>,
}

impl InclusionReport {
    /// Common regions where the oracle converged no later than the sampler.
    pub fn oracle_not_slower(&self) -> bool {
        self.pairs.iter().all(|p| p.oracle <= p.stack)
    }
}

pub fn compare_detectors(stack: &DetectorLog, oracle: &DetectorLog) -> Result<InclusionReport> {
    if stack.trace_digest != oracle.trace_digest {
        return Err(SimError::Usage("detector logs come from different traces".into()));
    }
    let stack_collectible = stack.collectible();
    let oracle_collectible = oracle.collectible();
    let fully_included = stack_collectible.is_subset(&oracle_collectible);
    let pairs = stack_collectible
        .intersection(&oracle_collectible)
        .filter_map(|key| {
            let s = convergence_time(&stack.episodes[key])?;
            let o = convergence_time(&oracle.episodes[key])?;
            Some(ConvergencePair {
                region: key.0,
                t_pinned: key.1,
                stack: s,
                oracle: o,
            })
        })
        .collect();
    Ok(InclusionReport {
        stack_collectible,
        oracle_collectible,
        fully_included,
        pairs,
    })
}
