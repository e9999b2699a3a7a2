use super::*;
use crate::graph::{apply_batch, Endpoint, InsertedNode, PerturbationBatch};
use crate::solver::{oracle_dense, ppr_from_scratch, residual_of, l1_error_bound};
use crate::synth::{random_batch, random_digraph, BatchShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const A: f64 = 0.85;

fn cfg(eps: f64) -> SolverConfig {
    SolverConfig::new(A, eps).unwrap()
}

fn prior(g: &Graph, s: NodeId, eps: f64) -> PprSolution {
    ppr_from_scratch(g, s, &cfg(eps)).unwrap()
}

fn fig1() -> (Graph, PerturbationBatch) {
    let g = Graph::from_edges(
        6,
        [(0, 1), (0, 2), (1, 2), (1, 3), (2, 0), (2, 4), (3, 5), (4, 0), (4, 5), (5, 1)],
    )
    .unwrap();
    let batch = PerturbationBatch {
        inserted_nodes: vec![
            InsertedNode {
                label: None,
                out_edges: vec![Endpoint::Existing(0), Endpoint::Inserted(1)],
                in_edges: vec![Endpoint::Existing(2)],
            },
            InsertedNode {
                label: None,
                out_edges: vec![Endpoint::Existing(1)],
                in_edges: vec![Endpoint::Inserted(0)],
            },
        ],
        deleted_nodes: [3, 5].into_iter().collect(),
        inserted_edges: [(4, 1)].into_iter().collect(),
        deleted_edges: [(0, 2)].into_iter().collect(),
    };
    (g, batch)
}

#[test]
fn tracking_identity_case() {
    let g = Graph::from_edges(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
    let sol = prior(&g, 0, 1e-8);
    let map = IdMap::identity(3);
    let p = UpdateProblem::new(&g, &g, &map, 0, &sol.pi, &sol.r, cfg(1e-8)).unwrap();
    let (pi0, r0) = tracking_init(&p).unwrap();
    assert_eq!(pi0, sol.pi);
    assert_eq!(r0, sol.r);
}

#[test]
fn tracking_inserted_back_edge_is_exact() {
    // s -> a -> b, then insert a -> s
    let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    let b = PerturbationBatch {
        inserted_edges: [(1, 0)].into_iter().collect(),
        ..Default::default()
    };
    let (h, map) = apply_batch(&g, &b).unwrap();
    let sol = prior(&g, 0, 1e-9);
    let p = UpdateProblem::new(&g, &h, &map, 0, &sol.pi, &sol.r, cfg(1e-9)).unwrap();
    let (pi0, r0) = tracking_init(&p).unwrap();
    let exact = residual_of(&h, 0, &pi0, A);
    assert!(exact.max_abs_distance(&r0) <= 1e-12);
}

#[test]
fn tracking_source_becomes_dangling() {
    let g = Graph::from_edges(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
    let b = PerturbationBatch {
        deleted_edges: [(0, 1)].into_iter().collect(),
        ..Default::default()
    };
    let (h, map) = apply_batch(&g, &b).unwrap();
    let sol = prior(&g, 0, 1e-9);
    let p = UpdateProblem::new(&g, &h, &map, 0, &sol.pi, &sol.r, cfg(1e-9)).unwrap();
    let (_, r0) = tracking_init(&p).unwrap();
    // Row of s moves from {1} to {s}: only entries 0 and 1 change.
    let x = sol.pi.get(0);
    let mut expected = sol.r.clone();
    expected.as_mut_slice()[1] -= A * x;
    expected.as_mut_slice()[0] += A * x;
    assert!(r0.max_abs_distance(&expected) <= 1e-15);
    assert_eq!(r0.get(2), sol.r.get(2));
    assert!(residual_of(&h, 0, &sol.pi, A).max_abs_distance(&r0) <= 1e-12);
}

#[test]
fn tracking_rejects_node_changes() {
    let (g, b) = fig1();
    let (h, map) = apply_batch(&g, &b).unwrap();
    let sol = prior(&g, 0, 1e-8);
    let p = UpdateProblem::new(&g, &h, &map, 0, &sol.pi, &sol.r, cfg(1e-8)).unwrap();
    assert!(matches!(tracking_init(&p), Err(Error::Precondition(_))));
}

#[test]
fn problem_validation() {
    let (g, b) = fig1();
    let (h, map) = apply_batch(&g, &b).unwrap();
    let sol = prior(&g, 3, 1e-8);
    // source 3 is deleted
    assert!(matches!(
        UpdateProblem::new(&g, &h, &map, 3, &sol.pi, &sol.r, cfg(1e-8)),
        Err(Error::Unsupported(_))
    ));
    // prior that does not satisfy the residual identity
    let sol = prior(&g, 0, 1e-8);
    let bogus = NodeScores::zeros(6);
    assert!(UpdateProblem::new(&g, &h, &map, 0, &sol.pi, &bogus, cfg(1e-8)).is_err());
    // mismatched id map
    let wrong = IdMap::identity(6);
    assert!(UpdateProblem::new(&g, &g, &wrong, 0, &sol.pi, &sol.r, cfg(1e-8)).is_ok());
    assert!(UpdateProblem::new(&g, &h, &IdMap::identity(5), 0, &sol.pi, &sol.r, cfg(1e-8)).is_err());
}

#[test]
fn vw_identity_case() {
    let (g, _) = fig1();
    let sol = prior(&g, 0, 1e-8);
    let map = IdMap::identity(6);
    let p = UpdateProblem::new(&g, &g, &map, 0, &sol.pi, &sol.r, cfg(1e-8)).unwrap();
    let (pi0, r0) = vw_init(&p).unwrap();
    assert_eq!(pi0, sol.pi);
    assert_eq!(r0, sol.r);
}

#[test]
fn vw_isolated_insertion_pads_with_zero() {
    let (g, _) = fig1();
    let b = PerturbationBatch {
        inserted_nodes: vec![InsertedNode::default()],
        ..Default::default()
    };
    let (h, map) = apply_batch(&g, &b).unwrap();
    let sol = prior(&g, 0, 1e-8);
    let p = UpdateProblem::new(&g, &h, &map, 0, &sol.pi, &sol.r, cfg(1e-8)).unwrap();
    let (pi0, r0) = vw_init(&p).unwrap();
    let mut padded = sol.pi.clone().into_vec();
    padded.push(0.0);
    assert_eq!(pi0.as_slice(), padded.as_slice());
    let mut padded = sol.r.clone().into_vec();
    padded.push(0.0);
    assert_eq!(r0.as_slice(), padded.as_slice());
}

#[test]
fn vw_single_in_link_to_new_node() {
    // j = 2 has links {0, 4}; a new node w gains the link 2 -> w.
    let (g, _) = fig1();
    let b = PerturbationBatch {
        inserted_nodes: vec![InsertedNode {
            in_edges: vec![Endpoint::Existing(2)],
            ..Default::default()
        }],
        ..Default::default()
    };
    let (h, map) = apply_batch(&g, &b).unwrap();
    let sol = prior(&g, 0, 1e-8);
    let p = UpdateProblem::new(&g, &h, &map, 0, &sol.pi, &sol.r, cfg(1e-8)).unwrap();
    let (_, r0) = vw_init(&p).unwrap();
    let xj = sol.pi.get(2);
    let dj = 2.0;
    let w = map.inserted()[0];
    assert!((r0.get(w) - A * xj / (dj + 1.0)).abs() <= 1e-15);
    let adjust = A * xj * (1.0 / (dj + 1.0) - 1.0 / dj);
    for old_nb in [0u32, 4] {
        let nb = map.to_new(old_nb).unwrap();
        assert!((r0.get(nb) - (sol.r.get(old_nb) + adjust)).abs() <= 1e-15);
    }
    assert!(residual_of(&h, 0, &vw_init(&p).unwrap().0, A).max_abs_distance(&r0) <= 1e-12);
}

/// `-alpha x_d P_{d,0}` built from dense effective rows of the old graph.
fn deletion_term(g: &Graph, map: &IdMap, s: NodeId, pi: &PprVector) -> Vec<f64> {
    let mut term = vec![0.0; map.new_count()];
    for &u in map.deleted() {
        let targets: Vec<NodeId> = if g.out_links(u).is_empty() { vec![s] } else { g.out_links(u).to_vec() };
        let p = 1.0 / targets.len() as f64;
        for t in targets {
            if let Some(nt) = map.to_new(t) {
                term[nt as usize] -= A * pi.get(u) * p;
            }
        }
    }
    term
}

#[test]
fn vw_residual_discrepancy_and_correction() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..60 {
        let n = rng.gen_range(2..80);
        let g = random_digraph(n, 3.0, 0.15, &mut rng);
        let s = rng.gen_range(0..n as NodeId);
        let b = random_batch(&g, &BatchShape::default(), Some(s), &mut rng);
        let (h, map) = apply_batch(&g, &b).unwrap();
        let sol = prior(&g, s, 1e-7);
        let p = UpdateProblem::new(&g, &h, &map, s, &sol.pi, &sol.r, cfg(1e-7)).unwrap();
        let sn = p.source_new;

        let (pi0, r0) = vw_init(&p).unwrap();
        let exact = residual_of(&h, sn, &pi0, A);
        let term = deletion_term(&g, &map, s, &sol.pi);
        for i in 0..h.node_count() {
            let gap = exact.as_slice()[i] - r0.as_slice()[i];
            assert!((gap - term[i]).abs() <= 1e-12, "gap {gap} term {}", term[i]);
        }

        let p = p.with_exact_deletion_correction(true);
        let (pi0, r0) = vw_init(&p).unwrap();
        assert!(residual_of(&h, sn, &pi0, A).max_abs_distance(&r0) <= 1e-12);
    }
}

#[test]
fn vw_init_is_local() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let n = rng.gen_range(2..120);
        let g = random_digraph(n, 3.0, 0.1, &mut rng);
        let s = rng.gen_range(0..n as NodeId);
        let b = random_batch(&g, &BatchShape::default(), Some(s), &mut rng);
        let (h, map) = apply_batch(&g, &b).unwrap();
        let sol = prior(&g, s, 1e-7);
        let p = UpdateProblem::new(&g, &h, &map, s, &sol.pi, &sol.r, cfg(1e-7))
            .unwrap()
            .with_exact_deletion_correction(true);
        let (_, r0) = vw_init(&p).unwrap();

        // Allowed: targets of changed rows (old and new) and of deleted rows, plus inserted nodes.
        let mut allowed = vec![false; h.node_count()];
        let mut allow_old = |t: NodeId| {
            if let Some(nt) = map.to_new(t) {
                allowed[nt as usize] = true;
            }
        };
        for i in p.changed_rows().into_iter().chain(map.deleted().iter().copied()) {
            out_neighbors_effective(&g, i, s).targets().for_each(&mut allow_old);
        }
        for i in p.changed_rows() {
            for t in out_neighbors_effective(&h, map.to_new(i).unwrap(), p.source_new).targets() {
                allowed[t as usize] = true;
            }
        }
        for &w in map.inserted() {
            allowed[w as usize] = true;
        }
        for (u, nu) in map.survivors() {
            if r0.get(nu) != sol.r.get(u) {
                assert!(allowed[nu as usize], "entry {nu} changed outside the local bound");
            }
        }
    }
}

#[test]
fn single_edge_initial_residual_is_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n = rng.gen_range(2..100);
        let g = random_digraph(n, 3.0, 0.1, &mut rng);
        let s = rng.gen_range(0..n as NodeId);
        let b = random_batch(&g, &BatchShape::links_only(1), None, &mut rng);
        if b.inserted_edges.len() + b.deleted_edges.len() != 1 {
            continue;
        }
        let (h, map) = apply_batch(&g, &b).unwrap();
        let sol = prior(&g, s, 1e-7);
        let p = UpdateProblem::new(&g, &h, &map, s, &sol.pi, &sol.r, cfg(1e-7)).unwrap();
        let (_, r0) = tracking_init(&p).unwrap();
        let xmax = sol.pi.max_abs();
        assert!(r0.l1() <= sol.r.l1() + 2.0 * A * xmax + 1e-15);
    }
}

#[test]
fn noop_update_does_no_work() {
    let (g, _) = fig1();
    let sol = prior(&g, 0, 1e-8);
    let map = IdMap::identity(6);
    let p = UpdateProblem::new(&g, &g, &map, 0, &sol.pi, &sol.r, cfg(1e-8)).unwrap();
    assert_eq!(vwppr_update(&p).unwrap().solution.stats.pushes, 0);
    assert_eq!(per_edge_baseline(&p).unwrap().solution.stats.pushes, 0);
}

#[test]
fn single_edge_baseline_equals_tracking() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 30 {
        let n = rng.gen_range(2..60);
        let g = random_digraph(n, 3.0, 0.1, &mut rng);
        let s = rng.gen_range(0..n as NodeId);
        let b = random_batch(&g, &BatchShape::links_only(1), None, &mut rng);
        if b.inserted_edges.len() + b.deleted_edges.len() != 1 {
            continue;
        }
        checked += 1;
        let (h, map) = apply_batch(&g, &b).unwrap();
        let sol = prior(&g, s, 1e-9);
        let p = UpdateProblem::new(&g, &h, &map, s, &sol.pi, &sol.r, cfg(1e-9)).unwrap();
        let tracked = tracking_update(&p).unwrap().solution;
        let baseline = per_edge_baseline(&p).unwrap().solution;
        assert_eq!(tracked.stats.pushes, baseline.stats.pushes);
        assert!(tracked.pi.max_abs_distance(&baseline.pi) <= 1e-15);
        assert!(tracked.r.max_abs_distance(&baseline.r) <= 1e-15);
    }
}

#[test]
fn fig1_end_to_end() {
    let (g, b) = fig1();
    let (h, map) = apply_batch(&g, &b).unwrap();
    let eps = 1e-9;
    let sol = prior(&g, 0, eps);
    let p = UpdateProblem::new(&g, &h, &map, 0, &sol.pi, &sol.r, cfg(eps)).unwrap();
    let exact = oracle_dense(&h, 0, A).unwrap();
    let n_star = h.node_count() as f64;

    let plain = vwppr_update(&p).unwrap().solution;
    let xd: f64 = map.deleted().iter().map(|&u| sol.pi.get(u)).sum();
    assert!(plain.pi.l1_distance(&exact) <= l1_error_bound(&plain.r, A) + A * xd / (1.0 - A));

    let corrected = vwppr_update(&p.clone().with_exact_deletion_correction(true)).unwrap().solution;
    let (d, b) = (corrected.pi.l1_distance(&exact), l1_error_bound(&corrected.r, A));
    assert!(d <= b * (1.0 + 1e-9) + 1e-13, "corrected {d:e} > {b:e}");

    let baseline = per_edge_baseline(&p).unwrap().solution;
    let (d, b) = (baseline.pi.l1_distance(&exact), l1_error_bound(&baseline.r, A));
    assert!(d <= b * (1.0 + 1e-9) + 1e-13, "baseline {d:e} > {b:e}");
    assert!(baseline.pi.l1_distance(&corrected.pi) <= 2.0 * n_star * eps / (1.0 - A));
    assert!(residual_of(&h, 0, &baseline.pi, A).max_abs_distance(&baseline.r) <= 1e-12);
}

#[test]
fn mutation_plan_order() {
    let (g, b) = fig1();
    let (h, map) = apply_batch(&g, &b).unwrap();
    let plan = EdgeMutationPlan::build(&g, &h, &map);
    use EdgeMutation::*;
    // union ids: old 0..6, inserted 6, 7
    assert_eq!(
        plan.steps(),
        &[
            DeleteEdge(1, 3),
            DeleteEdge(3, 5),
            DropNode(3),
            DeleteEdge(4, 5),
            DeleteEdge(5, 1),
            DropNode(5),
            DeleteEdge(0, 2),
            AddNode(6),
            AddNode(7),
            InsertEdge(2, 6),
            InsertEdge(6, 0),
            InsertEdge(6, 7),
            InsertEdge(7, 1),
            InsertEdge(4, 1),
        ]
    );
    assert_eq!(plan.link_changes(), 10);
}

#[test]
fn corrected_update_matches_from_scratch() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let eps = 1e-8;
    for _ in 0..30 {
        let n = rng.gen_range(2..150);
        let g = random_digraph(n, 4.0, 0.1, &mut rng);
        let s = rng.gen_range(0..n as NodeId);
        let b = random_batch(&g, &BatchShape::default(), Some(s), &mut rng);
        let (h, map) = apply_batch(&g, &b).unwrap();
        let sol = prior(&g, s, eps);
        let p = UpdateProblem::new(&g, &h, &map, s, &sol.pi, &sol.r, cfg(eps))
            .unwrap()
            .with_exact_deletion_correction(true);
        let upd = vwppr_update(&p).unwrap().solution;
        let scratch = ppr_from_scratch(&h, p.source_new, &cfg(eps)).unwrap();
        let bound = 2.0 * h.node_count() as f64 * eps / (1.0 - A);
        assert!(upd.pi.l1_distance(&scratch.pi) <= bound);
    }
}
