//! Region-partitioned heap: objects, mark/activity maps and the per-region
//! bookkeeping the pinning policy and collector work from.

use rustc_hash::FxHashMap as HashMap;
use std::fmt;

use crate::bitmap::SlotBitmap;
use crate::error::{Result, SimError};

/// Simulated time in milliseconds.
pub type Millis = u64;

/// Bitmap granularity. An object's mark and activity bits live at its base slot.
pub const SLOT_BYTES: u32 = 16;

/// Logical age of a tenured region.
pub const MAX_AGE: u8 = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(pub u64);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionId(pub u32);

impl RegionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    PrimitiveArray,
    /// No reference-valued fields.
    Leaf,
    Internal,
    /// Plain object whose fields are all primitives. Only collectible when
    /// `HeapConfig::primitive_fields_collectible` is set.
    PrimitiveFieldsOnly,
}

impl ObjectKind {
    pub fn may_hold_refs(self) -> bool {
        matches!(self, ObjectKind::Internal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::PrimitiveArray => "primitive_array",
            ObjectKind::Leaf => "leaf",
            ObjectKind::Internal => "internal",
            ObjectKind::PrimitiveFieldsOnly => "primitive_fields",
        }
    }

    pub fn parse(s: &str) -> Option<ObjectKind> {
        match s {
            "primitive_array" => Some(ObjectKind::PrimitiveArray),
            "leaf" => Some(ObjectKind::Leaf),
            "internal" => Some(ObjectKind::Internal),
            "primitive_fields" => Some(ObjectKind::PrimitiveFieldsOnly),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeapObject {
    pub id: ObjectId,
    pub kind: ObjectKind,
    pub size: u32,
    pub refs: Vec<ObjectId>,
    pub birth_time: Millis,
}

impl HeapObject {
    /// Bytes the object occupies in a region (size rounded up to a slot).
    pub fn footprint(&self) -> u32 {
        footprint(self.size)
    }
}

pub fn footprint(size: u32) -> u32 {
    size.div_ceil(SLOT_BYTES) * SLOT_BYTES
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionState {
    Young,
    Unpinned,
    Pinned,
    Cold,
}

impl RegionState {
    pub const ALL: [RegionState; 4] = [
        RegionState::Young,
        RegionState::Unpinned,
        RegionState::Pinned,
        RegionState::Cold,
    ];

    pub fn index(self) -> usize {
        match self {
            RegionState::Young => 0,
            RegionState::Unpinned => 1,
            RegionState::Pinned => 2,
            RegionState::Cold => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RememberedSet {
    Accurate,
    Overflowed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RegionCensus {
    pub n_marked: u64,
    pub n_collectible: u64,
    pub m_marked: u64,
    pub m_collectible: u64,
    pub density: f64,
}

#[derive(Clone, Debug)]
pub struct Region {
    id: RegionId,
    size: u32,
    age: u8,
    state: RegionState,
    mark_map: SlotBitmap,
    activity_map: Option<SlotBitmap>,
    allocated_bytes: u32,
    /// Resident objects in address order.
    residents: Vec<ObjectId>,

    /// Reference samples since the end of the previous partial GC.
    pub refs: u64,
    pub mma: f64,
    pub sum_refs: u64,
    pub t_pinned: Millis,
    pub t_inactive: Millis,
    pub t_walked: Millis,
    pub census: RegionCensus,
    pub remembered_set: RememberedSet,
    pub critical_in_use: bool,
}

impl Region {
    /// A detached, empty young region. Mostly useful for exercising the
    /// pinning predicates in isolation.
    pub fn new(id: RegionId, size: u32) -> Region {
        Region {
            id,
            size,
            age: 0,
            state: RegionState::Young,
            mark_map: SlotBitmap::new((size / SLOT_BYTES) as usize),
            activity_map: None,
            allocated_bytes: 0,
            residents: Vec::new(),
            refs: 0,
            mma: 0.0,
            sum_refs: 0,
            t_pinned: 0,
            t_inactive: 0,
            t_walked: 0,
            census: RegionCensus::default(),
            remembered_set: RememberedSet::Accurate,
            critical_in_use: false,
        }
    }

    /// Detached region in an arbitrary state with a given fill level, for
    /// policy experiments that never touch the object graph.
    pub fn synthetic(id: RegionId, size: u32, state: RegionState, allocated_bytes: u32) -> Region {
        let mut region = Region::new(id, size);
        region.state = state;
        region.age = if state == RegionState::Young { 0 } else { MAX_AGE };
        region.allocated_bytes = allocated_bytes.min(size);
        if matches!(state, RegionState::Pinned | RegionState::Cold) {
            region.activity_map = Some(SlotBitmap::new(region.mark_map.len()));
        }
        region.census.density = region.density();
        region
    }

    pub fn id(&self) -> RegionId {
        self.id
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn age(&self) -> u8 {
        self.age
    }

    pub fn state(&self) -> RegionState {
        self.state
    }

    pub fn allocated_bytes(&self) -> u32 {
        self.allocated_bytes
    }

    pub fn room(&self) -> u32 {
        self.size - self.allocated_bytes
    }

    pub fn residents(&self) -> &[ObjectId] {
        &self.residents
    }

    pub fn mark_map(&self) -> &SlotBitmap {
        &self.mark_map
    }

    pub fn activity_map(&self) -> Option<&SlotBitmap> {
        self.activity_map.as_ref()
    }

    pub fn slot_count(&self) -> usize {
        self.mark_map.len()
    }

    /// Allocated bytes over region size.
    pub fn density(&self) -> f64 {
        self.allocated_bytes as f64 / self.size as f64
    }

    /// Empty age-0 young region, available for allocation or as a copy
    /// destination.
    pub fn is_free(&self) -> bool {
        self.state == RegionState::Young && self.age == 0 && self.allocated_bytes == 0 && self.residents.is_empty()
    }

    fn reset(&mut self) {
        let slots = self.mark_map.len();
        *self = Region::new(self.id, self.size);
        debug_assert_eq!(self.mark_map.len(), slots);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeapConfig {
    pub region_size: u32,
    pub region_count: u32,
    pub cold_region_count: u32,
    pub tenure_age: u8,
    /// Empty regions held back from allocation so evacuation has somewhere
    /// to copy to.
    pub survivor_reserve: u32,
    /// Widens collectible eligibility to `ObjectKind::PrimitiveFieldsOnly`.
    pub primitive_fields_collectible: bool,
}

impl Default for HeapConfig {
    fn default() -> Self {
        HeapConfig {
            region_size: 512 * 1024,
            region_count: 256,
            cold_region_count: 8,
            tenure_age: MAX_AGE,
            survivor_reserve: 16,
            primitive_fields_collectible: false,
        }
    }
}

impl HeapConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(SimError::Config(m.to_string()));
        if self.region_count == 0 {
            return err("region_count must be positive");
        }
        if self.cold_region_count == 0 {
            return err("cold_region_count must be at least 1");
        }
        if self.region_count <= self.cold_region_count {
            return err("region_count must exceed cold_region_count");
        }
        if self.region_size == 0 || !self.region_size.is_multiple_of(SLOT_BYTES) {
            return err("region_size must be a positive multiple of 16");
        }
        if self.tenure_age == 0 || self.tenure_age > MAX_AGE {
            return err("tenure_age must be in 1..=24");
        }
        if self.survivor_reserve >= self.region_count - self.cold_region_count {
            return err("survivor_reserve must leave at least one allocatable region");
        }
        Ok(())
    }

    pub fn is_collectible(&self, kind: ObjectKind) -> bool {
        match kind {
            ObjectKind::PrimitiveArray | ObjectKind::Leaf => true,
            ObjectKind::PrimitiveFieldsOnly => self.primitive_fields_collectible,
            ObjectKind::Internal => false,
        }
    }

    /// Bytes available outside the cold area.
    pub fn main_capacity(&self) -> u64 {
        (self.region_count - self.cold_region_count) as u64 * self.region_size as u64
    }

    pub fn cold_capacity(&self) -> u64 {
        self.cold_region_count as u64 * self.region_size as u64
    }
}

#[derive(Clone, Debug)]
struct ObjectEntry {
    object: HeapObject,
    region: RegionId,
    offset: u32,
    rooted: bool,
}

/// Counts reference-field reads made by the marker. Reads of objects
/// resident in the cold area must stay at zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MarkerProbe {
    pub ref_field_reads: u64,
    pub cold_ref_field_reads: u64,
}

#[derive(Clone, Debug)]
pub struct Heap {
    config: HeapConfig,
    regions: Vec<Region>,
    objects: HashMap<ObjectId, ObjectEntry>,
    next_object: u64,
    alloc_cursor: Option<RegionId>,
    probe: MarkerProbe,
}

impl Heap {
    pub fn new(config: HeapConfig) -> Result<Heap> {
        config.validate()?;
        let first_cold = config.region_count - config.cold_region_count;
        let regions = (0..config.region_count)
            .map(|i| {
                let mut r = Region::new(RegionId(i), config.region_size);
                if i >= first_cold {
                    r.state = RegionState::Cold;
                    r.age = MAX_AGE;
                    r.activity_map = Some(SlotBitmap::new(r.mark_map.len()));
                }
                r
            })
            .collect();
        Ok(Heap {
            config,
            regions,
            objects: HashMap::default(),
            next_object: 0,
            alloc_cursor: None,
            probe: MarkerProbe::default(),
        })
    }

    pub fn config(&self) -> &HeapConfig {
        &self.config
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, id: RegionId) -> &Region {
        &self.regions[id.index()]
    }

    pub fn region_mut(&mut self, id: RegionId) -> &mut Region {
        &mut self.regions[id.index()]
    }

    pub fn probe(&self) -> MarkerProbe {
        self.probe
    }

    pub fn object(&self, id: ObjectId) -> Option<&HeapObject> {
        self.objects.get(&id).map(|e| &e.object)
    }

    pub fn location(&self, id: ObjectId) -> Option<(RegionId, u32)> {
        self.objects.get(&id).map(|e| (e.region, e.offset))
    }

    pub fn region_of(&self, id: ObjectId) -> Option<RegionId> {
        self.objects.get(&id).map(|e| e.region)
    }

    pub fn is_rooted(&self, id: ObjectId) -> bool {
        self.objects.get(&id).map(|e| e.rooted).unwrap_or(false)
    }

    pub fn live_object_count(&self) -> usize {
        self.objects.len()
    }

    /// Every object id currently held by the heap, sorted.
    pub fn object_ids(&self) -> Vec<ObjectId> {
        let mut ids: Vec<ObjectId> = self.objects.keys().copied().collect();
        ids.sort_unstable();
        ids
    }

    pub fn is_marked(&self, id: ObjectId) -> bool {
        match self.objects.get(&id) {
            Some(e) => self.regions[e.region.index()]
                .mark_map
                .get((e.offset / SLOT_BYTES) as usize),
            None => false,
        }
    }

    pub fn is_active(&self, id: ObjectId) -> bool {
        match self.objects.get(&id) {
            Some(e) => self.regions[e.region.index()]
                .activity_map
                .as_ref()
                .map(|m| m.get((e.offset / SLOT_BYTES) as usize))
                .unwrap_or(false),
            None => false,
        }
    }

    pub fn is_collectible(&self, kind: ObjectKind) -> bool {
        self.config.is_collectible(kind)
    }

    pub fn cold_regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| r.state == RegionState::Cold)
    }

    pub fn count_in_state(&self, state: RegionState) -> usize {
        self.regions.iter().filter(|r| r.state == state).count()
    }

    pub fn pinned_ids(&self) -> Vec<RegionId> {
        self.regions
            .iter()
            .filter(|r| r.state == RegionState::Pinned)
            .map(|r| r.id)
            .collect()
    }

    pub fn free_region_count(&self) -> usize {
        self.regions.iter().filter(|r| r.is_free()).count()
    }

    /// Allocates into an age-0 region. Returns `GcRequired` when no age-0
    /// region outside the survivor reserve has room.
    pub fn allocate(&mut self, kind: ObjectKind, size: u32, refs: Vec<ObjectId>, now: Millis) -> Result<ObjectId> {
        if size == 0 || size > self.config.region_size {
            return Err(SimError::Usage(format!(
                "object size {size} outside 1..={}",
                self.config.region_size
            )));
        }
        if !kind.may_hold_refs() && !refs.is_empty() {
            return Err(SimError::Usage(format!(
                "{} objects cannot hold references",
                kind.as_str()
            )));
        }
        if let Some(missing) = refs.iter().find(|r| !self.objects.contains_key(r)) {
            return Err(SimError::Usage(format!("reference to unknown object {missing}")));
        }
        let fp = footprint(size);
        let region = self.nursery_region_for(fp).ok_or(SimError::GcRequired)?;
        self.alloc_cursor = Some(region);

        let id = ObjectId(self.next_object);
        self.next_object += 1;
        let object = HeapObject {
            id,
            kind,
            size,
            refs,
            birth_time: now,
        };
        self.objects.insert(
            id,
            ObjectEntry {
                object,
                region,
                offset: 0,
                rooted: true,
            },
        );
        self.place(id, region);
        Ok(id)
    }

    /// Id the next successful allocation will receive.
    pub fn next_object_id(&self) -> ObjectId {
        ObjectId(self.next_object)
    }

    fn nursery_region_for(&self, fp: u32) -> Option<RegionId> {
        if let Some(c) = self.alloc_cursor {
            let r = &self.regions[c.index()];
            if r.state == RegionState::Young && r.age == 0 && r.room() >= fp {
                return Some(c);
            }
        }
        if self.free_region_count() > self.config.survivor_reserve as usize {
            return self.regions.iter().find(|r| r.is_free()).map(|r| r.id);
        }
        None
    }

    /// Conservative test that a burst of allocations totalling `bytes`, none
    /// larger than `max_object`, will succeed without a collection.
    pub fn can_absorb(&self, bytes: u64, max_object: u32) -> bool {
        if bytes == 0 {
            return true;
        }
        let cursor_room = self
            .alloc_cursor
            .map(|c| &self.regions[c.index()])
            .filter(|r| r.state == RegionState::Young && r.age == 0)
            .map(|r| r.room() as u64)
            .unwrap_or(0);
        let usable_free = self
            .free_region_count()
            .saturating_sub(self.config.survivor_reserve as usize) as u64;
        let r = self.config.region_size as u64;
        let slack = (bytes / r + 2) * footprint(max_object) as u64;
        cursor_room + usable_free * r >= bytes + slack
    }

    /// Drops the workload's root on an object. It stays resident until a
    /// collection proves it unreachable.
    pub fn unroot(&mut self, id: ObjectId) -> Result<()> {
        match self.objects.get_mut(&id) {
            Some(e) if e.rooted => {
                e.rooted = false;
                Ok(())
            }
            Some(_) => Err(SimError::Usage(format!("object {id} already unrooted"))),
            None => Err(SimError::Usage(format!("unknown object {id}"))),
        }
    }

    pub fn set_critical(&mut self, region: RegionId, in_use: bool) {
        self.regions[region.index()].critical_in_use = in_use;
    }

    /// Total size of marked collectible objects in the region.
    pub fn collectible_mass(&self, region: RegionId) -> u64 {
        self.census_of(region).m_collectible
    }

    /// Census over current mark-map contents, for a region in any state.
    pub fn census_of(&self, region: RegionId) -> RegionCensus {
        let r = &self.regions[region.index()];
        let mut c = RegionCensus {
            density: r.density(),
            ..RegionCensus::default()
        };
        for id in &r.residents {
            let e = &self.objects[id];
            if !r.mark_map.get((e.offset / SLOT_BYTES) as usize) {
                continue;
            }
            let size = e.object.size as u64;
            c.n_marked += 1;
            c.m_marked += size;
            if self.config.is_collectible(e.object.kind) {
                c.n_collectible += 1;
                c.m_collectible += size;
            }
        }
        c
    }

    /// Recomputes the census of a pinned or cold region and stamps `t_walked`.
    pub fn walk_region(&mut self, region: RegionId, now: Millis) -> Result<RegionCensus> {
        let state = self.regions[region.index()].state;
        if !matches!(state, RegionState::Pinned | RegionState::Cold) {
            return Err(SimError::Usage(format!("cannot walk {state:?} region {region}")));
        }
        let census = self.census_of(region);
        let r = &mut self.regions[region.index()];
        r.census = census;
        r.t_walked = now;
        Ok(census)
    }

    /// Sets the activity bit of a marked resident object. Returns true on a
    /// 0 to 1 transition, which also stamps `t_inactive`.
    pub fn set_activity(&mut self, region: RegionId, object: ObjectId, now: Millis) -> Result<bool> {
        let entry = self
            .objects
            .get(&object)
            .filter(|e| e.region == region)
            .ok_or_else(|| SimError::Usage(format!("object {object} is not resident in region {region}")))?;
        let slot = (entry.offset / SLOT_BYTES) as usize;
        let r = &mut self.regions[region.index()];
        if !r.mark_map.get(slot) {
            return Err(SimError::Usage(format!(
                "object {object} is not marked in region {region}"
            )));
        }
        let map = r
            .activity_map
            .as_mut()
            .ok_or_else(|| SimError::Usage(format!("region {region} has no activity map")))?;
        let changed = !map.set(slot);
        if changed {
            r.t_inactive = now;
        }
        Ok(changed)
    }

    /// Marked, inactive, collectible residents: the mark map minus the
    /// activity map, filtered by kind. Returned in address order.
    pub fn cold_candidates(&self, region: RegionId) -> Vec<ObjectId> {
        let r = &self.regions[region.index()];
        let inactive = match &r.activity_map {
            Some(act) => r.mark_map.difference(act),
            None => r.mark_map.clone(),
        };
        inactive
            .iter_ones()
            .filter_map(|slot| self.resident_at(region, slot as u32 * SLOT_BYTES))
            .filter(|id| self.config.is_collectible(self.objects[id].object.kind))
            .collect()
    }

    /// Object whose base address is `offset` in the region, if any.
    pub fn resident_at(&self, region: RegionId, offset: u32) -> Option<ObjectId> {
        let r = &self.regions[region.index()];
        r.residents
            .binary_search_by_key(&offset, |id| self.objects[id].offset)
            .ok()
            .map(|i| r.residents[i])
    }

    /// Clears an object's mark (and activity) bit without freeing it.
    pub fn unmark(&mut self, id: ObjectId) -> Result<()> {
        let e = self
            .objects
            .get(&id)
            .ok_or_else(|| SimError::Usage(format!("unknown object {id}")))?;
        let slot = (e.offset / SLOT_BYTES) as usize;
        let r = &mut self.regions[e.region.index()];
        r.mark_map.clear(slot);
        if let Some(act) = r.activity_map.as_mut() {
            act.clear(slot);
        }
        Ok(())
    }

    /// Pins a tenured region: fresh activity map, all timestamps set to
    /// `now`, initial census walk.
    pub fn pin_region(&mut self, region: RegionId, now: Millis) -> Result<()> {
        let r = &mut self.regions[region.index()];
        if r.state != RegionState::Unpinned {
            return Err(SimError::Usage(format!("cannot pin {:?} region {region}", r.state)));
        }
        r.state = RegionState::Pinned;
        r.activity_map = Some(SlotBitmap::new(r.mark_map.len()));
        r.t_pinned = now;
        r.t_inactive = now;
        self.walk_region(region, now)?;
        Ok(())
    }

    /// Returns a pinned region to the unpinned pool; its activity map is
    /// discarded.
    pub fn unpin_region(&mut self, region: RegionId) -> Result<()> {
        let r = &mut self.regions[region.index()];
        if r.state != RegionState::Pinned {
            return Err(SimError::Usage(format!("cannot unpin {:?} region {region}", r.state)));
        }
        r.state = RegionState::Unpinned;
        r.activity_map = None;
        Ok(())
    }

    // ---- collector primitives ----

    /// Reference fields of an object, as read by the marker. Reads of cold
    /// residents are counted on the probe; callers are expected never to
    /// make them.
    pub(crate) fn read_refs(&mut self, id: ObjectId) -> Vec<ObjectId> {
        let e = &self.objects[&id];
        self.probe.ref_field_reads += 1;
        if self.regions[e.region.index()].state == RegionState::Cold {
            self.probe.cold_ref_field_reads += 1;
        }
        e.object.refs.clone()
    }

    pub(crate) fn entry_kind(&self, id: ObjectId) -> ObjectKind {
        self.objects[&id].object.kind
    }

    pub(crate) fn entry_footprint(&self, id: ObjectId) -> u32 {
        self.objects[&id].object.footprint()
    }

    pub(crate) fn set_region_state(&mut self, region: RegionId, state: RegionState, age: u8) {
        let r = &mut self.regions[region.index()];
        r.state = state;
        r.age = age;
    }

    /// Lowest-id free region, retagged with the given age.
    pub(crate) fn claim_free_region(&mut self, age: u8) -> Option<RegionId> {
        let tenure = self.config.tenure_age;
        let r = self.regions.iter_mut().find(|r| r.is_free())?;
        r.age = age.min(tenure);
        if r.age >= tenure {
            r.age = MAX_AGE;
            r.state = RegionState::Unpinned;
        }
        Some(r.id)
    }

    /// Appends a resident object to `dest` at its bump pointer. The caller
    /// owns removal from the source region's resident list.
    pub(crate) fn place(&mut self, id: ObjectId, dest: RegionId) {
        let fp = self.objects[&id].object.footprint();
        let r = &mut self.regions[dest.index()];
        debug_assert!(r.room() >= fp);
        let offset = r.allocated_bytes;
        r.allocated_bytes += fp;
        r.residents.push(id);
        r.mark_map.set((offset / SLOT_BYTES) as usize);
        let e = self.objects.get_mut(&id).expect("placed object exists");
        e.region = dest;
        e.offset = offset;
    }

    /// Removes the resident list from a region, leaving its other state intact.
    pub(crate) fn take_residents(&mut self, region: RegionId) -> Vec<ObjectId> {
        std::mem::take(&mut self.regions[region.index()].residents)
    }

    pub(crate) fn free_object(&mut self, id: ObjectId) {
        self.objects.remove(&id);
    }

    pub(crate) fn reset_region(&mut self, region: RegionId) {
        self.regions[region.index()].reset();
        if self.alloc_cursor == Some(region) {
            self.alloc_cursor = None;
        }
    }

    pub(crate) fn clear_alloc_cursor(&mut self) {
        self.alloc_cursor = None;
    }

    /// Re-lays out `survivors` from offset 0 in the region (sliding
    /// compaction); mark map rebuilt, activity map dropped unless the region
    /// is cold.
    pub(crate) fn compact_in_place(&mut self, region: RegionId, survivors: Vec<ObjectId>) {
        let r = &mut self.regions[region.index()];
        r.allocated_bytes = 0;
        r.mark_map.clear_all();
        r.residents.clear();
        for id in survivors {
            self.place(id, region);
        }
    }

    /// First-fit placement into the lowest-indexed cold region with room.
    pub(crate) fn cold_region_with_room(&self, fp: u32) -> Option<RegionId> {
        self.regions
            .iter()
            .find(|r| r.state == RegionState::Cold && r.room() >= fp)
            .map(|r| r.id)
    }

    /// Removes a dead object from a cold region without moving anything
    /// else. An emptied cold region has its bump pointer rewound.
    pub(crate) fn reclaim_cold(&mut self, id: ObjectId) {
        let (region, offset) = {
            let e = &self.objects[&id];
            (e.region, e.offset)
        };
        let slot = (offset / SLOT_BYTES) as usize;
        let r = &mut self.regions[region.index()];
        r.mark_map.clear(slot);
        if let Some(act) = r.activity_map.as_mut() {
            act.clear(slot);
        }
        r.residents.retain(|o| *o != id);
        if r.residents.is_empty() {
            r.allocated_bytes = 0;
            if let Some(act) = r.activity_map.as_mut() {
                act.clear_all();
            }
        }
        self.objects.remove(&id);
    }

    pub(crate) fn rooted_ids(&self) -> Vec<ObjectId> {
        let mut ids: Vec<ObjectId> = self
            .objects
            .iter()
            .filter(|(_, e)| e.rooted)
            .map(|(id, _)| *id)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Full scan of the structural invariants. Returns one message per
    /// violation.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        let tenure = self.config.tenure_age;
        for r in &self.regions {
            let id = r.id;
            match r.state {
                RegionState::Young if r.age >= tenure => out.push(format!("region {id}: young with age {}", r.age)),
                RegionState::Unpinned | RegionState::Pinned if r.age != MAX_AGE => {
                    out.push(format!("region {id}: {:?} with age {}", r.state, r.age))
                }
                _ => {}
            }
            if r.allocated_bytes > r.size {
                out.push(format!("region {id}: allocated {} > size", r.allocated_bytes));
            }
            match (&r.activity_map, r.state) {
                (Some(act), RegionState::Pinned | RegionState::Cold) => {
                    if !act.is_subset_of(&r.mark_map) {
                        out.push(format!("region {id}: activity map not within mark map"));
                    }
                }
                (Some(_), s) => out.push(format!("region {id}: {s:?} region has activity map")),
                (None, RegionState::Pinned | RegionState::Cold) => {
                    out.push(format!("region {id}: missing activity map"))
                }
                (None, _) => {}
            }
            if r.state == RegionState::Pinned && r.t_pinned > r.t_inactive {
                out.push(format!("region {id}: t_pinned after t_inactive"));
            }
            let mut last_end = 0u32;
            for oid in &r.residents {
                let Some(e) = self.objects.get(oid) else {
                    out.push(format!("region {id}: dangling resident {oid}"));
                    continue;
                };
                if e.region != id {
                    out.push(format!("object {oid}: resident list / location mismatch"));
                }
                if e.offset < last_end {
                    out.push(format!("object {oid}: overlaps previous resident"));
                }
                last_end = e.offset + e.object.footprint();
                if r.state == RegionState::Cold && !self.config.is_collectible(e.object.kind) {
                    out.push(format!(
                        "object {oid}: {} object in cold region {id}",
                        e.object.kind.as_str()
                    ));
                }
            }
            if last_end > r.allocated_bytes {
                out.push(format!("region {id}: residents extend past bump pointer"));
            }
        }
        out
    }

    pub fn cold_area_objects(&self) -> Vec<ObjectId> {
        self.cold_regions().flat_map(|r| r.residents.iter().copied()).collect()
    }
}
