use crate::chem::MolecularGraph;

use super::fingerprint::hash_seq;

/// Canonical key of the ring-system skeleton left after repeatedly removing
/// non-ring atoms of degree at most one. Acyclic molecules give `""`.
pub fn murcko_scaffold(g: &MolecularGraph) -> String {
    let n = g.n_atoms();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|a| g.degree(a)).collect();
    let mut stack: Vec<usize> = (0..n)
        .filter(|&a| degree[a] <= 1 && !g.atom_in_ring(a))
        .collect();
    while let Some(a) = stack.pop() {
        if !alive[a] {
            continue;
        }
        alive[a] = false;
        for &(nb, _) in g.neighbors(a) {
            if alive[nb] {
                degree[nb] -= 1;
                if degree[nb] <= 1 && !g.atom_in_ring(nb) {
                    stack.push(nb);
                }
            }
        }
    }
    if !(0..n).any(|a| alive[a]) {
        return String::new();
    }

    let describe = |a: usize| {
        (
            g.atoms()[a].element.ordinal() as u64,
            degree[a] as u64,
            g.atom_in_ring(a) as u64,
        )
    };
    let mut atoms: Vec<String> = (0..n)
        .filter(|&a| alive[a])
        .map(|a| {
            let (_, d, r) = describe(a);
            format!("{}{}{}", g.atoms()[a].element.symbol(), d, if r == 1 { "R" } else { "" })
        })
        .collect();
    atoms.sort();

    let mut edges: Vec<[u64; 8]> = g
        .bonds()
        .iter()
        .enumerate()
        .filter(|(_, b)| alive[b.begin] && alive[b.end])
        .map(|(i, b)| {
            let (x, y) = (describe(b.begin), describe(b.end));
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            [
                lo.0,
                lo.1,
                lo.2,
                hi.0,
                hi.1,
                hi.2,
                b.order.ordinal() as u64,
                g.bond_in_ring(i) as u64,
            ]
        })
        .collect();
    edges.sort_unstable();
    let digest = hash_seq(edges.into_iter().flatten());
    format!("{}|{:016x}", atoms.join("."), digest)
}
