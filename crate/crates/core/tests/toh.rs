use hdcml::experiments::{derive_rng, golden_run, trace_mode};
use hdcml::graph::TohState;
use hdcml::hdc::{bind, cosine, permute, random_bipolar, recover, Hypervector};
use hdcml::toh::{
    build_composite, build_maps, build_monolithic_policy, build_partial_policies, build_toh_planner, format_trace, run_composite,
    run_mapping, run_monolithic, run_partial, Method, RingConfig, RingSystem, TargetMode, MAPPING_THRESHOLD, SOLUTION, SOLUTION_MOVES,
};

fn system(key: u64) -> RingSystem {
    RingSystem::build(&RingConfig::default(), &mut derive_rng(11, key)).unwrap()
}

fn cos(a: &Hypervector, b: &Hypervector) -> f64 {
    cosine(a.as_slice(), b.as_slice())
}

#[test]
fn solution_moves_replay_the_optimal_sequence() {
    let mut board = TohState::new(1, 1, 1);
    let mut seen = vec![board.to_string()];
    for (ring, peg) in SOLUTION_MOVES {
        let mut p = board.pegs();
        p[ring] = peg;
        let next = TohState::from_pegs(p);
        assert!(hdcml::graph::legal_toh_moves(board).contains(&next));
        board = next;
        seen.push(board.to_string());
    }
    assert_eq!(seen, SOLUTION);
}

#[test]
fn ring_system_invariants() {
    let rs = system(1);
    assert!(rs.designated_max_similarity() < 0.1);
    for ring in &rs.rings {
        assert_eq!(ring.model.n(), 7);
        assert_eq!(ring.model.e(), 20);
        for p in 1..=3u8 {
            assert_eq!(ring.peg_of_node(ring.node_of_peg(p)), p);
            assert!(ring.peg(p).is_bipolar());
        }
    }
    for b in TohState::all() {
        assert_eq!(rs.board(rs.nodes_for(b)), Some(b));
    }
}

#[test]
fn rings_follow_clean_commands_and_ignore_noise() {
    let rs = system(2);
    let mut rng = derive_rng(11, 99);
    for ring in &rs.rings {
        for mode in TargetMode::ALL {
            for from in 0..7 {
                for p in 1..=3u8 {
                    let r = ring.respond(from, ring.peg(p), mode, 0.1, 0.3);
                    assert!(r.recognized && !r.exhausted);
                    assert_eq!(r.node, ring.node_of_peg(p));
                }
            }
            let junk = random_bipolar(rs.d(), &mut rng).unwrap();
            let r = ring.respond(3, &junk, mode, 0.1, 0.3);
            assert!(!r.recognized);
            assert_eq!(r.node, 3);
            assert!(ring.response_vector(&r).is_zero());
        }
    }
}

/// With the ideal response fed back at every step, the monolithic query
/// decodes the prescribed peg near 0.3 and no other peg symbol above noise.
#[test]
fn monolithic_policy_decodes_each_step() {
    let rs = system(3);
    let policy = build_monolithic_policy(&rs, &mut derive_rng(11, 30)).unwrap();
    let mut r_t = Hypervector::ones(rs.d());
    for (t, &(ring, peg)) in SOLUTION_MOVES.iter().enumerate() {
        let q = bind(&r_t, &permute(&policy, -(t as i64))).unwrap();
        let want = cos(&q, rs.rings[ring].peg(peg));
        assert!((want - 0.3).abs() < 0.12, "step {t}: {want}");
        r_t = rs.rings[ring].peg(peg).clone();
    }
    let tail = bind(&r_t, &permute(&policy, -7)).unwrap();
    let leak = rs.rings.iter().flat_map(|r| r.vectors.iter()).map(|v| cos(&tail, v)).fold(0.0f64, f64::max);
    assert!(leak < 0.15, "{leak}");
}

/// Sign of an odd sum of k bipolar terms agrees with one term with
/// probability 1/2 + C(k-1, (k-1)/2) / 2^k: 1 term gives 1, three give 0.5,
/// five give 0.375.
#[test]
fn partial_policies_decode_each_step() {
    let expected = [1.0, 0.5, 0.375];
    let rs = system(4);
    let pols = build_partial_policies(&rs, &mut derive_rng(11, 40)).unwrap();
    let mut r_t = Hypervector::ones(rs.d());
    for &(ring, peg) in &SOLUTION_MOVES {
        let q = permute(&bind(&r_t, &pols[ring]).unwrap(), -1);
        let got = cos(&q, rs.rings[ring].peg(peg));
        assert!((got - expected[ring]).abs() < 0.1, "ring {ring}: {got}");
        r_t = rs.rings[ring].peg(peg).clone();
    }
}

#[test]
fn composite_states_resemble_their_parts() {
    let rs = system(5);
    let t = rs.composite_states();
    for b in TohState::all() {
        let col: Vec<f64> = t.column(b.index()).iter().copied().collect();
        for r in 0..3 {
            let s = cosine(&col, rs.symbol(r, b).as_slice());
            assert!((s - 0.5).abs() < 0.1, "{b} ring {r}: {s}");
        }
    }
    let cs = build_composite(&rs).unwrap();
    assert_eq!(cs.n(), 27);
    assert_eq!(cs.theta, 0.55);
}

#[test]
fn maps_decode_near_the_lowered_threshold() {
    let rs = system(6);
    let mut rng = derive_rng(11, 60);
    let ct = build_toh_planner(rs.d(), &mut rng).unwrap();
    let maps = build_maps(&ct, &rs, &mut rng).unwrap();
    let mut sims = Vec::new();
    let mut correct = 0;
    for b in TohState::all() {
        for r in 0..3 {
            let dec = bind(&ct.state_vector(b.index()), &maps[r]).unwrap();
            sims.push(cos(&dec, rs.symbol(r, b)));
            let hit = recover(&dec, &rs.rings[r].dictionary, MAPPING_THRESHOLD);
            correct += hit.is_some_and(|h| h.index == rs.nodes_for(b)[r]) as usize;
        }
    }
    let mean = sims.iter().sum::<f64>() / sims.len() as f64;
    assert!((mean - 0.155).abs() < 0.03, "{mean}");
    assert!(correct >= 75, "{correct}/81");
}

#[test]
fn golden_runs_match_the_optimal_sequence() {
    for seed in 1..=3 {
        for method in Method::ALL {
            let run = golden_run(seed, 1000, method, trace_mode(method)).unwrap();
            assert_eq!(run.board_sequence(), SOLUTION, "{} seed {seed}", method.name());
            assert!(run.solved);
        }
    }
}

#[test]
fn monolithic_and_partial_stop_the_right_way() {
    let rs = system(7);
    let mut rng = derive_rng(11, 70);
    let policy = build_monolithic_policy(&rs, &mut rng).unwrap();
    let run = run_monolithic(&rs, &policy, TargetMode::Raw, 12);
    assert_eq!(run.steps.len(), 8);
    assert_eq!(run.steps[7].responders(), 0);
    assert!(run.steps[..7].iter().all(|s| s.responders() == 1));

    let pols = build_partial_policies(&rs, &mut rng).unwrap();
    let run = run_partial(&rs, &pols, TargetMode::Raw, 7);
    assert_eq!(run.steps.len(), 7);
    assert!(run.solved);
}

#[test]
fn planner_driven_runs_between_arbitrary_boards() {
    let rs = system(8);
    let mut rng = derive_rng(11, 80);
    let ct = build_toh_planner(rs.d(), &mut rng).unwrap();
    let maps = build_maps(&ct, &rs, &mut rng).unwrap();
    let cs = build_composite(&rs).unwrap();
    let (a, b) = (TohState::new(3, 1, 2), TohState::new(1, 2, 3));
    for mode in [TargetMode::Sign, TargetMode::Recover] {
        let run = run_composite(&cs, &rs, mode, a, b);
        assert!(run.solved, "composite {}", mode.name());
        assert_eq!(run.commands, 3 * run.steps.len());
    }
    let run = run_mapping(&ct, &rs, &maps, TargetMode::Recover, a, b);
    assert_eq!(*run.boards.last().unwrap(), Some(b));
}

#[test]
fn trace_format() {
    let run = golden_run(1, 1000, Method::Monolithic, TargetMode::Raw).unwrap();
    let text = format_trace(&run);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,board,similarity,responders,mode");
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("0,112,S:0."));
    assert!(lines[1].ends_with(",S,raw"));
    assert!(lines[8].ends_with(",-,0,raw"));
}
