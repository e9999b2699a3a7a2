use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::synth::{random_batch, random_digraph, BatchShape};

fn path(n: usize) -> Graph {
    Graph::from_edges(n, (0..n as NodeId - 1).map(|u| (u, u + 1))).unwrap()
}

fn full_edges_in_dataset_ids(g: &Graph, ids: &[NodeId]) -> BTreeSet<(NodeId, NodeId)> {
    g.edges().map(|(u, v)| (ids[u as usize], ids[v as usize])).collect()
}

#[test]
fn bfs_follows_out_links_in_order() {
    let g = Graph::from_edges(5, [(0, 2), (0, 1), (1, 3), (2, 4)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(bfs_sample(&g, 0, 5, &mut rng).unwrap(), vec![0, 1, 2, 3, 4]);
    assert_eq!(bfs_sample(&g, 0, 3, &mut rng).unwrap(), vec![0, 1, 2]);
}

#[test]
fn bfs_restarts_when_reachable_set_is_exhausted() {
    // 0 -> 1, then nodes 2..6 are unreachable.
    let g = Graph::from_edges(6, [(0, 1), (3, 4)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = bfs_sample(&g, 0, 6, &mut rng).unwrap();
    assert_eq!(&s[..2], &[0, 1]);
    let distinct: BTreeSet<_> = s.iter().copied().collect();
    assert_eq!(distinct.len(), 6);
}

#[test]
fn bfs_rejects_oversized_samples() {
    let g = path(3);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(bfs_sample(&g, 0, 4, &mut rng).is_err());
    assert!(bfs_sample(&g, 0, 0, &mut rng).is_err());
    assert!(bfs_sample(&g, 9, 1, &mut rng).is_err());
}

#[test]
fn plan_json_round_trip_and_warnings() {
    let plan = PerturbPlan {
        insert_nodes: 3,
        delete_nodes: 2,
        insert_edge_fraction: 0.01,
        delete_edge_fraction: 0.02,
        rng_seed: 99,
    };
    assert_eq!(PerturbPlan::from_json(&plan.to_json()).unwrap(), plan);
    let g = path(20);
    assert_eq!(plan.validate(&g).unwrap().len(), 1);
    assert!(plan.validate(&path(200)).unwrap().is_empty());
    let bad = PerturbPlan {
        insert_edge_fraction: 1.5,
        ..plan.clone()
    };
    assert!(bad.validate(&g).is_err());
    let too_many = PerturbPlan {
        insert_nodes: 15,
        delete_nodes: 6,
        ..plan
    };
    assert!(too_many.validate(&g).is_err());
}

#[test]
fn zero_plan_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = random_digraph(40, 3.0, 0.1, &mut rng);
    let ev = make_evolution(&g, &PerturbPlan::default()).unwrap();
    assert!(ev.batch.is_empty());
    assert_eq!(ev.original, g);
    assert_eq!(ev.updated, g);
}

#[test]
fn generation_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = random_digraph(300, 4.0, 0.05, &mut rng);
    let plan = PerturbPlan {
        insert_nodes: 10,
        delete_nodes: 10,
        insert_edge_fraction: 0.02,
        delete_edge_fraction: 0.02,
        rng_seed: 5,
    };
    let a = make_evolution(&g, &plan).unwrap();
    let b = make_evolution(&g, &plan).unwrap();
    assert_eq!(a.batch, b.batch);
    assert_eq!(a.updated, b.updated);
    let c = make_evolution(&g, &PerturbPlan { rng_seed: 6, ..plan }).unwrap();
    assert_ne!(a.batch, c.batch);
}

#[test]
fn edge_deletions_fail_when_supply_runs_out() {
    let g = path(10);
    let plan = PerturbPlan {
        insert_nodes: 4,
        delete_nodes: 4,
        delete_edge_fraction: 0.9,
        ..PerturbPlan::default()
    };
    assert!(make_evolution(&g, &plan).is_err());
}

fn arb_case() -> impl Strategy<Value = (Graph, PerturbPlan)> {
    (20usize..120, 1.0f64..5.0, any::<u64>(), 0usize..6, 0usize..6, 0.0f64..0.1, 0.0f64..0.1).prop_map(
        |(n, deg, seed, a, d, fi, fd)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_digraph(n, deg, 0.1, &mut rng);
            let plan = PerturbPlan {
                insert_nodes: a,
                delete_nodes: d,
                insert_edge_fraction: fi,
                delete_edge_fraction: fd,
                rng_seed: seed ^ 0x5eed,
            };
            (g, plan)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evolution_invariants((g, plan) in arb_case()) {
        let ev = match make_evolution(&g, &plan) {
            Ok(ev) => ev,
            Err(_) => return Ok(()),
        };
        let n = g.node_count();
        let m = g.edge_count();
        let a: BTreeSet<NodeId> = ev.inserted.iter().copied().collect();
        let d: BTreeSet<NodeId> = ev.deleted.iter().copied().collect();
        prop_assert_eq!(a.len(), plan.insert_nodes);
        prop_assert_eq!(d.len(), plan.delete_nodes);
        prop_assert!(a.is_disjoint(&d));
        prop_assert_eq!(ev.original.node_count(), n - plan.insert_nodes);
        prop_assert_eq!(ev.updated.node_count(), n - plan.delete_nodes);

        let k = (plan.insert_edge_fraction * m as f64).floor() as usize;
        let l = (plan.delete_edge_fraction * m as f64).floor() as usize;
        prop_assert!(ev.batch.inserted_edges.len() + ev.withheld_discarded.len() <= k);
        prop_assert_eq!(ev.batch.deleted_edges.len(), l);

        // Original web: S \ A minus withheld edges.
        let full = full_edges_in_dataset_ids(&g, &(0..n as NodeId).collect::<Vec<_>>());
        let original = full_edges_in_dataset_ids(&ev.original, &ev.original_ids);
        let oid = |u: NodeId| ev.original_ids[u as usize];
        let mut withheld: BTreeSet<_> = ev.batch.inserted_edges.iter().map(|&(u, v)| (oid(u), oid(v))).collect();
        for &(u, v) in &ev.withheld_discarded {
            prop_assert!(d.contains(&u) || d.contains(&v));
            withheld.insert((u, v));
        }
        let expected_original: BTreeSet<_> = full
            .iter()
            .copied()
            .filter(|(u, v)| !a.contains(u) && !a.contains(v) && !withheld.contains(&(*u, *v)))
            .collect();
        prop_assert_eq!(&original, &expected_original);

        // Updated web: S \ D minus deleted edges.
        let deleted: BTreeSet<_> = ev.batch.deleted_edges.iter().map(|&(u, v)| (oid(u), oid(v))).collect();
        let updated = full_edges_in_dataset_ids(&ev.updated, &ev.updated_ids);
        let expected_updated: BTreeSet<_> = full
            .iter()
            .copied()
            .filter(|(u, v)| !d.contains(u) && !d.contains(v) && !deleted.contains(&(*u, *v)))
            .collect();
        prop_assert_eq!(&updated, &expected_updated);

        for &(u, v) in ev.batch.inserted_edges.iter().chain(&ev.batch.deleted_edges) {
            prop_assert!(!ev.batch.deleted_nodes.contains(&u) && !ev.batch.deleted_nodes.contains(&v));
        }
        for (k, node) in ev.batch.inserted_nodes.iter().enumerate() {
            prop_assert_eq!(node.label, Some(u64::from(ev.inserted[k])));
        }
    }

    #[test]
    fn batch_text_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_digraph(30, 3.0, 0.1, &mut rng);
        let mut b = random_batch(&g, &BatchShape::default(), None, &mut rng);
        if let Some(node) = b.inserted_nodes.first_mut() {
            node.label = Some(seed);
        }
        let mut buf = Vec::new();
        write_batch(&b, &mut buf).unwrap();
        let back = read_batch(buf.as_slice()).unwrap();
        prop_assert_eq!(back, b);
    }
}

#[test]
fn batch_text_errors_carry_line_numbers() {
    let cases = [
        ("5\n", 1),
        ("[insert_edges]\n1 2 3\n", 2),
        ("[bogus]\n", 1),
        ("[insert_nodes]\n1 out=\n", 2),
        ("[insert_nodes]\n0 out=+x\n", 2),
        ("# header\n[delete_nodes]\nabc\n", 3),
    ];
    for (text, line) in cases {
        match read_batch(text.as_bytes()) {
            Err(crate::Error::Parse { line: got, .. }) => assert_eq!(got, line, "{text:?}"),
            other => panic!("{text:?} gave {other:?}"),
        }
    }
}

#[test]
fn batch_text_accepts_comments_and_empty_lists() {
    let text = "[insert_nodes]\n0 label=- out= in=2 # new page\n[delete_nodes]\n[insert_edges]\n\n[delete_edges]\n0 1\n";
    let b = read_batch(text.as_bytes()).unwrap();
    assert_eq!(b.inserted_nodes.len(), 1);
    assert_eq!(b.inserted_nodes[0].in_edges, vec![Endpoint::Existing(2)]);
    assert!(b.inserted_nodes[0].out_edges.is_empty());
    assert_eq!(b.deleted_edges.len(), 1);
}
