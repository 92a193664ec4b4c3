//! Scenario configuration: `key = value` lines, `#` comments.

use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Result, SimError};
use crate::gc::GcConfig;
use crate::heap::HeapConfig;
use crate::policy::{PolicyConfig, Strategy};
use crate::sampling::SamplingConfig;
use crate::workload::WorkloadSpec;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScenarioConfig {
    pub heap: HeapConfig,
    pub policy: PolicyConfig,
    pub gc: GcConfig,
    pub sampling: SamplingConfig,
    pub workload: WorkloadSpec,
    pub oracle_enabled: bool,
    pub output_dir: Option<PathBuf>,
    /// Stop after this many partial GCs even if the workload has time left.
    pub max_partial_gcs: Option<u64>,
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("region_size", "region size in bytes (multiple of 16)"),
    ("region_count", "total regions including the cold area"),
    ("cold_region_count", "regions reserved for cold objects"),
    ("tenure_age", "age at which survivors are tenured (1..=24)"),
    (
        "survivor_reserve",
        "free regions held back from allocation for evacuation",
    ),
    (
        "primitive_fields_collectible",
        "treat primitive-fields-only objects as collectible",
    ),
    ("strategy", "pinning strategy: none, selective or unselective"),
    ("d_hi", "density above which an unpinned region is selectable"),
    ("d_lo", "density below which a pinned region is unpinned"),
    ("p_max", "maximum number of pinned regions"),
    ("t_cold_ms", "quiescence threshold in simulated ms"),
    (
        "collectible_floor",
        "collectible mass floor as a fraction of region size",
    ),
    (
        "sum_r_floor",
        "selective pinning floor on cumulative references (default: region size)",
    ),
    ("global_gc_every", "partial GCs between global GCs"),
    ("cset_cap_fraction", "collection-set cap as a fraction of all regions"),
    (
        "rs_overflow_prob",
        "per-cycle chance a pinned region's remembered set overflows",
    ),
    ("sample_interval_ms", "daemon polling interval in simulated ms"),
    ("ref_buffer_capacity", "per-thread sampled reference buffer size"),
    ("trace_capacity", "per-thread frame trace array size"),
    ("seed", "workload seed"),
    ("duration_ms", "simulated run length"),
    ("thread_count", "mutator threads"),
    ("alloc_rate", "churn allocations per ms"),
    ("size_min", "smallest object size in bytes"),
    ("size_max", "largest object size in bytes"),
    ("kind_primitive_array", "share of primitive arrays"),
    ("kind_leaf", "share of leaf objects"),
    ("kind_internal", "share of reference-holding objects"),
    ("kind_primitive_fields", "share of primitive-fields-only objects"),
    ("hot_set_size", "planted hot objects"),
    ("hot_access_rate", "hot accesses per ms"),
    ("cold_set_size", "planted cold objects"),
    ("cold_access_rate", "cold accesses per ms"),
    ("call_depth_min", "minimum stack depth"),
    ("call_depth_max", "maximum stack depth"),
    ("frame_ref_fanout", "reference slots per frame"),
    ("frame_surface_fraction", "fraction of accesses written into a frame"),
    ("churn_lifetime_min_ms", "shortest churn object lifetime"),
    ("churn_lifetime_max_ms", "longest churn object lifetime"),
    ("call_rate", "per-thread push/pop probability per ms"),
    ("cold_dispersion", "fraction of cold objects interleaved with hot ones"),
    ("setup_bytes_per_tick", "planted-set bytes allocated per ms"),
    ("oracle", "run the access-barrier oracle alongside the sampler"),
    ("output_dir", "directory for CSV reports"),
    ("max_partial_gcs", "stop after this many partial GCs"),
];

fn parse<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("invalid value '{value}'"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("invalid boolean '{value}'")),
    }
}

fn opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_else(|| "none".into())
}

fn parse_opt<T: FromStr>(value: &str) -> std::result::Result<Option<T>, String> {
    if value == "none" {
        Ok(None)
    } else {
        parse(value).map(Some)
    }
}

impl ScenarioConfig {
    /// Sets one key. The message of the error names the problem but not
    /// the line; `parse_config` adds that.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let w = &mut self.workload;
        match key {
            "region_size" => self.heap.region_size = parse(value)?,
            "region_count" => self.heap.region_count = parse(value)?,
            "cold_region_count" => self.heap.cold_region_count = parse(value)?,
            "tenure_age" => self.heap.tenure_age = parse(value)?,
            "survivor_reserve" => self.heap.survivor_reserve = parse(value)?,
            "primitive_fields_collectible" => self.heap.primitive_fields_collectible = parse_bool(value)?,
            "strategy" => self.policy.strategy = value.parse::<Strategy>()?,
            "d_hi" => self.policy.d_hi = parse(value)?,
            "d_lo" => self.policy.d_lo = parse(value)?,
            "p_max" => self.policy.p_max = parse(value)?,
            "t_cold_ms" => self.policy.t_cold = parse(value)?,
            "collectible_floor" => self.policy.collectible_floor = parse(value)?,
            "sum_r_floor" => self.policy.sum_r_floor = parse_opt(value)?,
            "global_gc_every" => self.gc.global_gc_every = parse(value)?,
            "cset_cap_fraction" => self.gc.cset_cap_fraction = parse(value)?,
            "rs_overflow_prob" => self.gc.rs_overflow_prob = parse(value)?,
            "sample_interval_ms" => self.sampling.poll_interval = parse(value)?,
            "ref_buffer_capacity" => self.sampling.ref_buffer_capacity = parse(value)?,
            "trace_capacity" => self.sampling.trace_capacity = parse(value)?,
            "seed" => w.seed = parse(value)?,
            "duration_ms" => w.duration_ms = parse(value)?,
            "thread_count" => w.thread_count = parse(value)?,
            "alloc_rate" => w.alloc_rate = parse(value)?,
            "size_min" => w.size_min = parse(value)?,
            "size_max" => w.size_max = parse(value)?,
            "kind_primitive_array" => w.kind_mix.primitive_array = parse(value)?,
            "kind_leaf" => w.kind_mix.leaf = parse(value)?,
            "kind_internal" => w.kind_mix.internal = parse(value)?,
            "kind_primitive_fields" => w.kind_mix.primitive_fields = parse(value)?,
            "hot_set_size" => w.hot_set_size = parse(value)?,
            "hot_access_rate" => w.hot_access_rate = parse(value)?,
            "cold_set_size" => w.cold_set_size = parse(value)?,
            "cold_access_rate" => w.cold_access_rate = parse(value)?,
            "call_depth_min" => w.call_depth_min = parse(value)?,
            "call_depth_max" => w.call_depth_max = parse(value)?,
            "frame_ref_fanout" => w.frame_ref_fanout = parse(value)?,
            "frame_surface_fraction" => w.frame_surface_fraction = parse(value)?,
            "churn_lifetime_min_ms" => w.churn_lifetime_min_ms = parse(value)?,
            "churn_lifetime_max_ms" => w.churn_lifetime_max_ms = parse(value)?,
            "call_rate" => w.call_rate = parse(value)?,
            "cold_dispersion" => w.cold_dispersion = parse(value)?,
            "setup_bytes_per_tick" => w.setup_bytes_per_tick = parse(value)?,
            "oracle" => self.oracle_enabled = parse_bool(value)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "max_partial_gcs" => self.max_partial_gcs = parse_opt(value)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Current value of a key in the form `set` accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        let w = &self.workload;
        Some(match key {
            "region_size" => self.heap.region_size.to_string(),
            "region_count" => self.heap.region_count.to_string(),
            "cold_region_count" => self.heap.cold_region_count.to_string(),
            "tenure_age" => self.heap.tenure_age.to_string(),
            "survivor_reserve" => self.heap.survivor_reserve.to_string(),
            "primitive_fields_collectible" => self.heap.primitive_fields_collectible.to_string(),
            "strategy" => self.policy.strategy.to_string(),
            "d_hi" => self.policy.d_hi.to_string(),
            "d_lo" => self.policy.d_lo.to_string(),
            "p_max" => self.policy.p_max.to_string(),
            "t_cold_ms" => self.policy.t_cold.to_string(),
            "collectible_floor" => self.policy.collectible_floor.to_string(),
            "sum_r_floor" => opt(&self.policy.sum_r_floor),
            "global_gc_every" => self.gc.global_gc_every.to_string(),
            "cset_cap_fraction" => self.gc.cset_cap_fraction.to_string(),
            "rs_overflow_prob" => self.gc.rs_overflow_prob.to_string(),
            "sample_interval_ms" => self.sampling.poll_interval.to_string(),
            "ref_buffer_capacity" => self.sampling.ref_buffer_capacity.to_string(),
            "trace_capacity" => self.sampling.trace_capacity.to_string(),
            "seed" => w.seed.to_string(),
            "duration_ms" => w.duration_ms.to_string(),
            "thread_count" => w.thread_count.to_string(),
            "alloc_rate" => w.alloc_rate.to_string(),
            "size_min" => w.size_min.to_string(),
            "size_max" => w.size_max.to_string(),
            "kind_primitive_array" => w.kind_mix.primitive_array.to_string(),
            "kind_leaf" => w.kind_mix.leaf.to_string(),
            "kind_internal" => w.kind_mix.internal.to_string(),
            "kind_primitive_fields" => w.kind_mix.primitive_fields.to_string(),
            "hot_set_size" => w.hot_set_size.to_string(),
            "hot_access_rate" => w.hot_access_rate.to_string(),
            "cold_set_size" => w.cold_set_size.to_string(),
            "cold_access_rate" => w.cold_access_rate.to_string(),
            "call_depth_min" => w.call_depth_min.to_string(),
            "call_depth_max" => w.call_depth_max.to_string(),
            "frame_ref_fanout" => w.frame_ref_fanout.to_string(),
            "frame_surface_fraction" => w.frame_surface_fraction.to_string(),
            "churn_lifetime_min_ms" => w.churn_lifetime_min_ms.to_string(),
            "churn_lifetime_max_ms" => w.churn_lifetime_max_ms.to_string(),
            "call_rate" => w.call_rate.to_string(),
            "cold_dispersion" => w.cold_dispersion.to_string(),
            "setup_bytes_per_tick" => w.setup_bytes_per_tick.to_string(),
            "oracle" => self.oracle_enabled.to_string(),
            "output_dir" => self
                .output_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "none".into()),
            "max_partial_gcs" => opt(&self.max_partial_gcs),
            _ => return None,
        })
    }

    /// The whole configuration as parseable text.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .filter(|(k, _)| !(*k == "output_dir" && self.output_dir.is_none()))
            .map(|(k, _)| format!("{k} = {}\n", self.get(k).unwrap_or_default()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.heap.validate()?;
        self.policy.validate()?;
        self.gc.validate()?;
        self.sampling.validate()?;
        self.workload.validate()?;
        if self.workload.size_max > self.heap.region_size {
            return Err(SimError::Config("size_max exceeds region_size".into()));
        }
        Ok(())
    }
}

/// Key table with current defaults, for `--help`.
pub fn describe_keys() -> String {
    let defaults = ScenarioConfig::default();
    KEYS.iter()
        .map(|(k, d)| format!("  {k:<30} {d} [default: {}]\n", defaults.get(k).unwrap_or_default()))
        .collect()
}

/// Parses a configuration file on top of the defaults. Errors name the
/// offending line; cross-field checks run after all lines are read.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut config = ScenarioConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| SimError::ConfigLine {
            line,
            message: format!("expected 'key = value', got '{content}'"),
        })?;
        let key = key.trim();
        config.set(key, value.trim()).map_err(|message| SimError::ConfigLine {
            line,
            message: format!("{key}: {message}"),
        })?;
    }
    config.validate()?;
    Ok(config)
}
