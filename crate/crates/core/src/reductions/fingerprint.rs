use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::chem::MolecularGraph;

use super::ReductionError;

/// Identifies the hashing scheme; bump when identifiers change.
pub const ECFP_HASH_VERSION: &str = "ximp-ecfp-splitmix64-v1";

const SEED: u64 = 0x5851_f42d_4c95_7f2d;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn hash_seq(items: impl IntoIterator<Item = u64>) -> u64 {
    items.into_iter().fold(SEED, |h, x| splitmix64(h ^ x))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub bits: Vec<bool>,
    pub n_bits: usize,
    pub radius: u32,
}

impl Fingerprint {
    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn on_bits(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn as_vector(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// All Morgan identifiers up to `radius` rounds, before folding.
pub fn ecfp_identifiers(g: &MolecularGraph, radius: u32) -> BTreeSet<u64> {
    let mut ids: Vec<u64> = g
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            hash_seq([
                a.element.ordinal() as u64,
                g.degree(i) as u64,
                (a.formal_charge as i64 + 2) as u64,
                a.implicit_h_count as u64,
                g.atom_in_ring(i) as u64,
                a.aromatic as u64,
            ])
        })
        .collect();
    let mut all: BTreeSet<u64> = ids.iter().copied().collect();
    for round in 1..=radius {
        ids = (0..g.n_atoms())
            .map(|i| {
                let mut env: Vec<(u64, u64)> = g
                    .neighbors(i)
                    .iter()
                    .map(|&(n, b)| (g.bonds()[b].order.ordinal() as u64, ids[n]))
                    .collect();
                env.sort_unstable();
                hash_seq(
                    [round as u64, ids[i]]
                        .into_iter()
                        .chain(env.into_iter().flat_map(|(o, id)| [o, id])),
                )
            })
            .collect();
        all.extend(ids.iter().copied());
    }
    all
}

/// Extended-connectivity fingerprint folded to `n_bits`.
pub fn ecfp(g: &MolecularGraph, radius: u32, n_bits: usize) -> Result<Fingerprint, ReductionError> {
    if !(2..=4).contains(&radius) {
        return Err(ReductionError::InvalidRadius(radius));
    }
    if ![16, 32, 1024, 2048].contains(&n_bits) {
        return Err(ReductionError::InvalidWidth(n_bits));
    }
    let mut bits = vec![false; n_bits];
    for id in ecfp_identifiers(g, radius) {
        bits[(id % n_bits as u64) as usize] = true;
    }
    Ok(Fingerprint {
        bits,
        n_bits,
        radius,
    })
}
