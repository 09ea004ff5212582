//! Seeded generators for fuzz corpora and the synthetic regression set.

use rand::{RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::chem::{parse_smiles, Element, MolecularGraph};

use super::Record;

const CORES: &[&str] = &[
    "c1cc*ccc1",
    "c1c*cncc1",
    "C1CC*CCC1",
    "C1C*CCC1",
    "c1ccc2cc*ccc2c1",
    "C1CCC2CC*CCC2C1",
    "C1C*C1",
    "c1cc*oc1",
    "c1cc[nH]c1",
    "C1CC*NCC1",
    "C1CC*OC1",
    "C1CCC(C1)C1CCCC1",
    "C1CC2CCC1C2",
    "c1ccc(cc1)-c1ccccc1",
];

const CHAINS: &[&str] = &[
    "C", "CC", "CCC", "C*C", "CC(C)C", "CCO", "CN", "CC(=O)", "C(=O)N", "OCC", "CSC", "C=C", "C#C",
    "N", "O",
];

const SUBSTITUENTS: &[&str] = &[
    "C", "O", "N", "F", "Cl", "Br", "C(=O)O", "CC", "OC", "C#N", "S", "CCC", "C(F)(F)F", "CN",
];

fn pick<'a>(rng: &mut Xoshiro256PlusPlus, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

fn fill(template: &str, rng: &mut Xoshiro256PlusPlus) -> String {
    let mut out = String::new();
    for ch in template.chars() {
        if ch == '*' {
            if rng.random_bool(0.5) {
                out.push('(');
                out.push_str(pick(rng, SUBSTITUENTS));
                out.push(')');
            }
        } else {
            out.push(ch);
        }
    }
    out
}

/// One random molecule assembled from ring cores, chain linkers and
/// substituents. `allow_fragments` occasionally appends a second component.
pub fn random_smiles(rng: &mut Xoshiro256PlusPlus, max_pieces: usize, allow_fragments: bool) -> String {
    let n = rng.random_range(1..=max_pieces.max(1));
    let mut smiles = String::new();
    let mut want_core = rng.random_bool(0.6);
    for _ in 0..n {
        let template = if want_core { pick(rng, CORES) } else { pick(rng, CHAINS) };
        smiles.push_str(&fill(template, rng));
        want_core = !want_core || rng.random_bool(0.3);
    }
    if allow_fragments && rng.random_bool(0.05) {
        smiles.push('.');
        smiles.push_str(&fill(pick(rng, CHAINS), rng));
    }
    smiles
}

/// `n` distinct valid SMILES strings, deterministic in `seed`.
pub fn fuzz_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let s = random_smiles(&mut rng, 4, true);
        if parse_smiles(&s).is_ok() && !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Number of N or O atoms carrying at least one hydrogen.
pub fn donor_count(g: &MolecularGraph) -> usize {
    g.atoms()
        .iter()
        .filter(|a| matches!(a.element, Element::N | Element::O) && a.implicit_h_count > 0)
        .count()
}

/// Synthetic regression target: ring count plus half the donor count.
pub fn synthetic_target(g: &MolecularGraph) -> f64 {
    g.rings().len() as f64 + 0.5 * donor_count(g) as f64
}

/// `n` single-component molecules labelled with [`synthetic_target`].
pub fn synthetic_records(n: usize, seed: u64) -> Vec<Record> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut out: Vec<Record> = Vec::with_capacity(n);
    while out.len() < n {
        let s = random_smiles(&mut rng, 3, false);
        let Ok(g) = parse_smiles(&s) else { continue };
        if out.iter().any(|r| r.smiles == s) {
            continue;
        }
        out.push(Record {
            smiles: s,
            target: synthetic_target(&g),
            id: Some(format!("syn{}", out.len())),
        });
    }
    out
}
