//! Channel hopping sequences.
//!
//! An end device hops over the `n_cf_per_ed` channels of one grid lane:
//! `{ g + j * channels_per_grid : j = 0..n_cf_per_ed }` with lane offset
//! `g = seq_id mod channels_per_grid`. The lane position `j` of each block
//! is drawn from a SplitMix64 stream keyed by `(seq_id, n_cf, n_cf_per_ed)`;
//! every step after the first adds `1 + (x mod (n - 1))` modulo `n`, which
//! rules out hopping onto the channel just used.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DataRateProfile;
use crate::txchain::phdr::MAX_SEQ_ID;

/// Longest plan the generator accepts. Standard profiles need at most 37 blocks.
pub const MAX_PLAN_BLOCKS: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoppingPlan {
    pub channel_indices: Vec<u32>,
    pub seq_id: u16,
    pub n_cf: u32,
    pub n_cf_per_ed: u32,
}

impl HoppingPlan {
    pub fn len(&self) -> usize {
        self.channel_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channel_indices.is_empty()
    }

    pub fn channels_per_grid(&self) -> u32 {
        self.n_cf / self.n_cf_per_ed
    }

    /// The channel subset allotted to this plan's end device.
    pub fn allotted_channels(&self) -> Vec<u32> {
        let cpg = self.channels_per_grid();
        let lane = u32::from(self.seq_id) % cpg;
        (0..self.n_cf_per_ed).map(|j| lane + j * cpg).collect()
    }
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

pub fn generate_hopping_plan(
    seq_id: u16,
    profile: &DataRateProfile,
    n_blocks: usize,
) -> Result<HoppingPlan> {
    if seq_id > MAX_SEQ_ID {
        return Err(Error::InvalidPhdr(format!("hopping sequence id {seq_id} exceeds 9 bits")));
    }
    if n_blocks == 0 {
        return Err(Error::InvalidLength {
            expected: "at least one hopping block".into(),
            actual: 0,
        });
    }
    if n_blocks > MAX_PLAN_BLOCKS {
        return Err(Error::PlanTooLong {
            requested: n_blocks,
            cap: MAX_PLAN_BLOCKS,
        });
    }
    let n = profile.n_cf_per_ed;
    if n < 2 || !profile.n_cf.is_multiple_of(n) {
        return Err(Error::InvalidProfile(format!(
            "cannot hop over {n} channels of a {}-channel band",
            profile.n_cf
        )));
    }
    let cpg = profile.channels_per_grid();
    let lane = u32::from(seq_id) % cpg;
    let key = u64::from(seq_id)
        | (u64::from(profile.n_cf) << 16)
        | (u64::from(profile.n_cf_per_ed) << 40);
    let mut rng = SplitMix64(key ^ 0x4C52_4648_5353_0001);

    let mut j = (rng.next() % u64::from(n)) as u32;
    let mut channel_indices = Vec::with_capacity(n_blocks);
    channel_indices.push(lane + j * cpg);
    for _ in 1..n_blocks {
        let step = 1 + (rng.next() % u64::from(n - 1)) as u32;
        j = (j + step) % n;
        channel_indices.push(lane + j * cpg);
    }
    Ok(HoppingPlan {
        channel_indices,
        seq_id,
        n_cf: profile.n_cf,
        n_cf_per_ed: profile.n_cf_per_ed,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::params::ProfileRegistry;

    #[test]
    fn deterministic() {
        let p = DataRateProfile::simulation();
        assert_eq!(
            generate_hopping_plan(17, &p, 19).unwrap(),
            generate_hopping_plan(17, &p, 19).unwrap()
        );
    }

    #[test]
    fn plans_stay_in_subset_without_repeats() {
        let reg = ProfileRegistry::with_standard();
        let profiles: Vec<_> = reg.iter().cloned().collect();
        let mut count = 0;
        for profile in &profiles {
            for seq in 0..=MAX_SEQ_ID {
                for n_blocks in [2usize, 19, 37] {
                    let plan = generate_hopping_plan(seq, profile, n_blocks).unwrap();
                    let allowed: HashSet<u32> = plan.allotted_channels().into_iter().collect();
                    assert_eq!(allowed.len(), profile.n_cf_per_ed as usize);
                    assert_eq!(plan.len(), n_blocks);
                    for w in plan.channel_indices.windows(2) {
                        assert_ne!(w[0], w[1]);
                    }
                    assert!(plan
                        .channel_indices
                        .iter()
                        .all(|c| allowed.contains(c) && *c < profile.n_cf));
                    count += 1;
                }
            }
        }
        assert!(count >= 10_000);
    }

    #[test]
    fn every_seq_id_gives_a_distinct_plan() {
        for profile in ProfileRegistry::with_standard().iter() {
            let plans: HashSet<Vec<u32>> = (0..=MAX_SEQ_ID)
                .map(|s| generate_hopping_plan(s, profile, 19).unwrap().channel_indices)
                .collect();
            assert_eq!(plans.len(), 512);
        }
    }

    #[test]
    fn plan_cap_and_bad_inputs() {
        let p = DataRateProfile::simulation();
        assert!(matches!(
            generate_hopping_plan(1, &p, MAX_PLAN_BLOCKS + 1),
            Err(Error::PlanTooLong { .. })
        ));
        assert!(generate_hopping_plan(1, &p, 0).is_err());
        assert!(generate_hopping_plan(512, &p, 4).is_err());
    }
}
