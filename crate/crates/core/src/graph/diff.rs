//! Which survivor rows changed between an old and a new graph.

use super::{Graph, IdMap, NodeId};

/// Survivors whose stored out-links differ once old targets are mapped to
/// new IDs. This is source-independent and can be shared by every source
/// updated over the same batch.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RowDelta {
    candidates: Vec<NodeId>,
}

impl RowDelta {
    pub fn compute(old: &Graph, new: &Graph, map: &IdMap) -> RowDelta {
        let candidates = map
            .survivors()
            .filter(|&(u, nu)| !mapped_equal(old.out_links(u), new.out_links(nu), map))
            .map(|(u, _)| u)
            .collect();
        RowDelta { candidates }
    }

    /// Old IDs of survivors whose stored rows differ, ascending.
    pub fn candidates(&self) -> &[NodeId] {
        &self.candidates
    }

    /// Narrows the stored differences to effective-row differences for one source.
    pub fn effective_changes(
        &self,
        old: &Graph,
        new: &Graph,
        map: &IdMap,
        source_old: NodeId,
        source_new: NodeId,
    ) -> Vec<NodeId> {
        let restart_old = [source_old];
        let restart_new = [source_new];
        self.candidates
            .iter()
            .copied()
            .filter(|&u| {
                let nu = map.to_new(u).expect("candidate is a survivor");
                let before = match old.out_links(u) {
                    [] => &restart_old[..],
                    links => links,
                };
                let after = match new.out_links(nu) {
                    [] => &restart_new[..],
                    links => links,
                };
                !mapped_equal(before, after, map)
            })
            .collect()
    }
}

/// True when `old_row` mapped through `map` equals `new_row`. Survivors keep
/// their relative order, so a sorted old row maps to a sorted list.
fn mapped_equal(old_row: &[NodeId], new_row: &[NodeId], map: &IdMap) -> bool {
    old_row.len() == new_row.len()
        && old_row
            .iter()
            .zip(new_row)
            .all(|(&t, &nt)| map.to_new(t) == Some(nt))
}

/// Survivors (old IDs, ascending) whose effective transition row differs
/// between the two webs, the dangling patch included.
pub fn changed_rows(
    old: &Graph,
    new: &Graph,
    map: &IdMap,
    source_old: NodeId,
    source_new: NodeId,
) -> Vec<NodeId> {
    RowDelta::compute(old, new, map).effective_changes(old, new, map, source_old, source_new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{apply_batch, out_neighbors_effective, PerturbationBatch};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn path() -> Graph {
        // s=0 -> 1 -> 2, plus 0 -> 2
        Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn batch_deleting(edges: &[(NodeId, NodeId)]) -> PerturbationBatch {
        PerturbationBatch {
            deleted_edges: edges.iter().copied().collect(),
            ..Default::default()
        }
    }

    #[test]
    fn no_perturbation() {
        let g = path();
        let map = IdMap::identity(3);
        assert!(changed_rows(&g, &g, &map, 0, 0).is_empty());
    }

    #[test]
    fn deleting_one_of_several_edges() {
        let g = path();
        let (h, map) = apply_batch(&g, &batch_deleting(&[(0, 1)])).unwrap();
        assert_eq!(changed_rows(&g, &h, &map, 0, 0), vec![0]);
    }

    #[test]
    fn deleting_only_edge_flips_to_dangling() {
        let g = path();
        let (h, map) = apply_batch(&g, &batch_deleting(&[(1, 2)])).unwrap();
        assert_eq!(changed_rows(&g, &h, &map, 0, 0), vec![1]);
    }

    #[test]
    fn dangling_flip_onto_the_source_is_not_a_change() {
        // 1's only link points at the source; dropping it leaves the same effective row.
        let g = Graph::from_edges(3, [(0, 1), (1, 0), (0, 2)]).unwrap();
        let (h, map) = apply_batch(&g, &batch_deleting(&[(1, 0)])).unwrap();
        assert_eq!(RowDelta::compute(&g, &h, &map).candidates(), &[1]);
        assert!(changed_rows(&g, &h, &map, 0, 0).is_empty());
        // Under another source the row does change.
        assert_eq!(changed_rows(&g, &h, &map, 2, 2), vec![1]);
    }

    #[test]
    fn rows_pointing_at_deleted_or_inserted_nodes_change() {
        let g = path();
        let b = PerturbationBatch {
            deleted_nodes: [2].into_iter().collect(),
            ..Default::default()
        };
        let (h, map) = apply_batch(&g, &b).unwrap();
        assert_eq!(changed_rows(&g, &h, &map, 0, 0), vec![0, 1]);
    }

    /// Brute-force: materialize each survivor's effective row as a map of
    /// new-ID target to probability and compare.
    fn brute_force(old: &Graph, new: &Graph, map: &IdMap, s_old: NodeId, s_new: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        for (u, nu) in map.survivors() {
            let mut before: BTreeMap<Option<NodeId>, f64> = BTreeMap::new();
            let row = out_neighbors_effective(old, u, s_old);
            for t in row.targets() {
                *before.entry(map.to_new(t)).or_default() += row.weight();
            }
            let mut after: BTreeMap<Option<NodeId>, f64> = BTreeMap::new();
            let row = out_neighbors_effective(new, nu, s_new);
            for t in row.targets() {
                *after.entry(Some(t)).or_default() += row.weight();
            }
            if before != after {
                out.push(u);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 2usize..200, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = crate::synth::random_digraph(n, 2.5, 0.15, &mut rng);
            let s = rng.gen_range(0..n as NodeId);
            let b = crate::synth::random_batch(&g, &crate::synth::BatchShape::default(), Some(s), &mut rng);
            let (h, map) = apply_batch(&g, &b).unwrap();
            let sn = map.to_new(s).unwrap();
            prop_assert_eq!(
                changed_rows(&g, &h, &map, s, sn),
                brute_force(&g, &h, &map, s, sn)
            );
        }
    }
}
