//! Process-wide cache of Monte-Carlo Heisenberg volume constants.

use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};

use sublap_core::group::heisenberg::monte_carlo_ball_volume;
use sublap_core::group::GroupInstance;

use crate::error::LabError;

static CACHE: OnceLock<Mutex<BTreeMap<(usize, u64), f64>>> = OnceLock::new();

/// `c_V` for `(samples, seed)`, computed once per process.
pub fn heisenberg_volume_constant(samples: usize, seed: u64) -> Result<f64, LabError> {
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut map = cache.lock().expect("volume cache poisoned");
    if let Some(&c) = map.get(&(samples, seed)) {
        return Ok(c);
    }
    let c = monte_carlo_ball_volume(1.0, samples, seed)?;
    map.insert((samples, seed), c);
    Ok(c)
}

pub fn heisenberg(samples: usize, seed: u64) -> Result<GroupInstance, LabError> {
    Ok(GroupInstance::heisenberg1_with_volume_constant(
        heisenberg_volume_constant(samples, seed)?,
    )?)
}
