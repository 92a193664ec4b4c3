//! Region pinning: the smoothed reference-rate metric, selectability and
//! unpinning predicates, and the selective / unselective strategies.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SimError};
use crate::heap::{Heap, Millis, Region, RegionId, RegionState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    None,
    Selective,
    Unselective,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Strategy::None),
            "selective" => Ok(Strategy::Selective),
            "unselective" => Ok(Strategy::Unselective),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::None => "none",
            Strategy::Selective => "selective",
            Strategy::Unselective => "unselective",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyConfig {
    pub strategy: Strategy,
    pub d_hi: f64,
    pub d_lo: f64,
    pub p_max: u32,
    pub t_cold: Millis,
    /// Fraction of the region size that collectible mass must exceed.
    pub collectible_floor: f64,
    /// Threshold for the cumulative reference count in selective pinning.
    /// `None` compares against the region size in bytes.
    pub sum_r_floor: Option<u64>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            strategy: Strategy::Unselective,
            d_hi: 0.75,
            d_lo: 0.25,
            p_max: 256,
            t_cold: 900_000,
            collectible_floor: 0.01,
            sum_r_floor: None,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.d_lo && self.d_lo < self.d_hi && self.d_hi <= 1.0) {
            return Err(SimError::Config(
                "density thresholds must satisfy 0 <= d_lo < d_hi <= 1".into(),
            ));
        }
        if self.p_max == 0 {
            return Err(SimError::Config("p_max must be at least 1".into()));
        }
        if self.t_cold == 0 {
            return Err(SimError::Config("t_cold_ms must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.collectible_floor) {
            return Err(SimError::Config("collectible_floor must be in [0,1]".into()));
        }
        Ok(())
    }

    fn sum_floor(&self, region: &Region) -> u64 {
        self.sum_r_floor.unwrap_or(region.size() as u64)
    }

    fn mass_floor(&self, region: &Region) -> f64 {
        self.collectible_floor * region.size() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnpinReason {
    LowDensity,
    LowCollectibleMass,
    WentCold,
    GlobalGc,
    ColdAreaFull,
}

impl UnpinReason {
    pub fn as_str(self) -> &'static str {
        match self {
            UnpinReason::LowDensity => "low_density",
            UnpinReason::LowCollectibleMass => "low_collectible_mass",
            UnpinReason::WentCold => "went_cold",
            UnpinReason::GlobalGc => "global_gc",
            UnpinReason::ColdAreaFull => "cold_area_full",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PinAction {
    Pin,
    Unpin(UnpinReason),
    Hold,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinDecision {
    pub region: RegionId,
    pub metric: f64,
    pub action: PinAction,
}

impl PinDecision {
    pub fn reason(&self) -> Option<UnpinReason> {
        match self.action {
            PinAction::Unpin(r) => Some(r),
            _ => None,
        }
    }
}

/// Modified moving average with smoothing factor 7/8.
pub fn update_mma(prev_mma: f64, r: u64) -> f64 {
    (7.0 * prev_mma + r as f64) / 8.0
}

pub fn pinning_metric(mma_r: f64, density: f64) -> f64 {
    mma_r * density
}

/// Unpinned region dense enough and holding enough collectible mass to be
/// considered for pinning.
pub fn is_selectable(region: &Region, config: &PolicyConfig) -> bool {
    region.density() > config.d_hi && region.census.m_collectible as f64 > config.mass_floor(region)
}

fn by_metric_desc(a: &(f64, RegionId), b: &(f64, RegionId)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Chooses which selectable regions to pin at the end of a partial GC.
/// Pure: the heap is not touched.
pub fn select_to_pin(candidates: &[&Region], n_pinned: usize, config: &PolicyConfig) -> Vec<PinDecision> {
    let budget = (config.p_max as usize).saturating_sub(n_pinned);
    if budget == 0 || candidates.is_empty() {
        return Vec::new();
    }
    let scored: Vec<(f64, RegionId, &Region)> = candidates
        .iter()
        .map(|r| (pinning_metric(r.mma, r.density()), r.id(), *r))
        .collect();

    let mut chosen: Vec<(f64, RegionId)> = match config.strategy {
        Strategy::None => return Vec::new(),
        Strategy::Unselective => scored.iter().map(|(p, id, _)| (*p, *id)).collect(),
        Strategy::Selective => {
            let nonzero: Vec<f64> = scored.iter().map(|s| s.0).filter(|p| *p > 0.0).collect();
            if nonzero.is_empty() {
                return Vec::new();
            }
            let p_avg = nonzero.iter().sum::<f64>() / nonzero.len() as f64;
            scored
                .iter()
                .filter(|(p, _, r)| {
                    let r_now = r.refs as f64;
                    r.mma > r_now && r.refs > 0 && r.sum_refs > config.sum_floor(r) && *p > p_avg
                })
                .map(|(p, id, _)| (*p, *id))
                .collect()
        }
    };
    chosen.sort_by(by_metric_desc);
    chosen.truncate(budget);
    chosen
        .into_iter()
        .map(|(metric, region)| PinDecision {
            region,
            metric,
            action: PinAction::Pin,
        })
        .collect()
}

/// Why a pinned region should leave the pinned set, if it should. `WentCold`
/// regions stay pinned until the collector moves their cold objects out.
pub fn unpin_reason(region: &Region, now: Millis, config: &PolicyConfig) -> Option<UnpinReason> {
    if region.density() < config.d_lo {
        Some(UnpinReason::LowDensity)
    } else if (region.census.m_collectible as f64) < config.mass_floor(region) {
        Some(UnpinReason::LowCollectibleMass)
    } else if now.saturating_sub(region.t_inactive) > config.t_cold {
        Some(UnpinReason::WentCold)
    } else {
        None
    }
}

pub fn needs_walk(region: &Region, now: Millis, config: &PolicyConfig) -> bool {
    now.saturating_sub(region.t_walked) as f64 > config.t_cold as f64 / 4.0
}

/// Unpins every pinned region. Used when a global GC starts or the cold
/// area has filled up.
pub fn on_global_gc_or_cold_full(heap: &mut Heap, reason: UnpinReason) -> Vec<PinDecision> {
    unpin_all_except(heap, reason, &[])
}

/// Unpins every pinned region not listed in `keep`.
pub fn unpin_all_except(heap: &mut Heap, reason: UnpinReason, keep: &[RegionId]) -> Vec<PinDecision> {
    let decisions: Vec<PinDecision> = heap
        .pinned_ids()
        .into_iter()
        .filter(|id| !keep.contains(id))
        .map(|region| PinDecision {
            region,
            metric: pinning_metric(heap.region(region).mma, heap.region(region).density()),
            action: PinAction::Unpin(reason),
        })
        .collect();
    for d in &decisions {
        heap.unpin_region(d.region).expect("listed region is pinned");
    }
    decisions
}

/// End-of-partial-GC policy pass: folds this cycle's reference counts into
/// the smoothed rates, re-walks and unpins pinned regions whose rules fire,
/// pins new regions, then clears the per-cycle counters.
pub fn end_of_partial_gc(
    heap: &mut Heap,
    now: Millis,
    config: &PolicyConfig,
    pinning_allowed: bool,
) -> Vec<PinDecision> {
    let mut decisions = Vec::new();
    let ids: Vec<RegionId> = heap.regions().iter().map(|r| r.id()).collect();
    for &id in &ids {
        let r = heap.region_mut(id);
        r.mma = update_mma(r.mma, r.refs);
        r.sum_refs += r.refs;
    }

    for id in heap.pinned_ids() {
        if needs_walk(heap.region(id), now, config) {
            heap.walk_region(id, now).expect("pinned region is walkable");
        }
        let region = heap.region(id);
        if let Some(reason @ (UnpinReason::LowDensity | UnpinReason::LowCollectibleMass)) =
            unpin_reason(region, now, config)
        {
            decisions.push(PinDecision {
                region: id,
                metric: pinning_metric(region.mma, region.density()),
                action: PinAction::Unpin(reason),
            });
            heap.unpin_region(id).expect("pinned");
        }
    }

    if pinning_allowed && config.strategy != Strategy::None {
        let unpinned: Vec<RegionId> = ids
            .iter()
            .copied()
            .filter(|id| heap.region(*id).state() == RegionState::Unpinned)
            .collect();
        for &id in &unpinned {
            let census = heap.census_of(id);
            heap.region_mut(id).census = census;
        }
        let candidates: Vec<&Region> = unpinned
            .iter()
            .map(|id| heap.region(*id))
            .filter(|r| is_selectable(r, config))
            .collect();
        let n_pinned = heap.count_in_state(RegionState::Pinned);
        let pins = select_to_pin(&candidates, n_pinned, config);
        for d in &pins {
            heap.pin_region(d.region, now).expect("candidate is unpinned");
        }
        decisions.extend(pins);
    }

    for &id in &ids {
        heap.region_mut(id).refs = 0;
    }
    decisions
}
