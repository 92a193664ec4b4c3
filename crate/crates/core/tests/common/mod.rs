#![allow(dead_code)]

use coldsim::policy::Strategy;
use coldsim::{parse_config, ScenarioConfig};

/// Small heap with a dispersed planted cold set; 500 partial GCs take a
/// couple of seconds in an optimized build.
pub const PLANTED: &str = "
region_size = 16384
region_count = 128
cold_region_count = 16
survivor_reserve = 4
tenure_age = 2
t_cold_ms = 1000
duration_ms = 1000000
max_partial_gcs = 500
thread_count = 4
frame_ref_fanout = 16
alloc_rate = 10
churn_lifetime_max_ms = 60
hot_set_size = 800
hot_access_rate = 10
cold_set_size = 1500
size_max = 192
";

pub fn planted(seed: u64, strategy: Strategy) -> ScenarioConfig {
    let mut cfg = parse_config(PLANTED).expect("fixture config parses");
    cfg.workload.seed = seed;
    cfg.policy.strategy = strategy;
    cfg
}

/// Runs `f` over `items` on all available cores, keeping input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Twenty seconds of simulated time on a tiny heap; runs in well under a
/// second.
pub const SMALL: &str = "
region_size = 16384
region_count = 64
cold_region_count = 8
survivor_reserve = 4
tenure_age = 2
t_cold_ms = 400
duration_ms = 20000
thread_count = 2
frame_ref_fanout = 8
alloc_rate = 10
churn_lifetime_max_ms = 60
hot_set_size = 200
hot_access_rate = 5
cold_set_size = 400
size_max = 128
";

pub fn small(seed: u64) -> ScenarioConfig {
    let mut cfg = parse_config(SMALL).expect("fixture config parses");
    cfg.workload.seed = seed;
    cfg
}
