use coopsim_core::dbpc::{truncated_reweighted_law, OffspringLaw, TailPolicy};
use coopsim_core::epidemic::{
    build_complete_graph, DestinationTape, EpidemicParams, EpidemicState, GeometricTopology, Mode, Status,
    Topology,
};
use coopsim_core::geometry::sphere_point_from_uniforms;
use coopsim_core::oracles::{
    balls_boxes_event_prob, exact_dbpc_step_law, exact_first_generation_law, no_collision_probability,
    to_f64, total_mass,
};
use coopsim_core::rng::stream;
use coopsim_core::{GeometricGraph, GridIndex, GridIndex32, PointSet, PointSet32, Probability, SpaceSpec};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn space_strategy() -> impl Strategy<Value = SpaceSpec> {
    prop_oneof![
        (1usize..=3).prop_map(|dimension| SpaceSpec::Cube { dimension }),
        Just(SpaceSpec::Sphere2),
    ]
}

fn positions(space: SpaceSpec, raw: &[(f64, f64, f64)]) -> Vec<Vec<f64>> {
    raw.iter()
        .map(|&(x, y, z)| match space {
            SpaceSpec::Sphere2 => sphere_point_from_uniforms(x, y).to_vec(),
            SpaceSpec::Cube { dimension } => [x, y, z][..dimension].to_vec(),
        })
        .collect()
}

fn brute(ps: &PointSet, id: usize, r: f64) -> Vec<usize> {
    (0..ps.len())
        .filter(|&j| j != id && ps.distance(id, j) <= r)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_matches_brute_force(
        space in space_strategy(),
        raw in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64), 1..300),
        r in 0.01..0.6f64,
        shrink in 0.1..1.0f64,
    ) {
        let ps = PointSet::from_positions(space, raw.len() as f64, &positions(space, &raw)).unwrap();
        let index = GridIndex::build(&ps, r).unwrap();
        for id in 0..ps.len() {
            for q in [r, r * shrink] {
                let mut got = index.neighbors_within(id, q).unwrap();
                got.sort_unstable();
                prop_assert_eq!(got, brute(&ps, id, q));
            }
            prop_assert_eq!(index.degree(id).unwrap(), brute(&ps, id, r).len());
        }
    }

    #[test]
    fn single_precision_index_matches_brute_force(
        raw in prop::collection::vec((0.0..1.0f32, 0.0..1.0f32), 1..200),
        r in 0.02..0.5f32,
    ) {
        let space = SpaceSpec::Cube { dimension: 2 };
        let pos: Vec<Vec<f32>> = raw.iter().map(|&(x, y)| vec![x, y]).collect();
        let ps = PointSet32::from_positions(space, pos.len() as f64, &pos).unwrap();
        let index = GridIndex32::build(&ps, r).unwrap();
        for id in 0..ps.len() {
            let mut got = index.neighbors_within(id, r).unwrap();
            got.sort_unstable();
            let want: Vec<usize> = (0..ps.len()).filter(|&j| j != id && ps.distance(id, j) <= r).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn neighbor_relation_is_symmetric(
        space in space_strategy(),
        raw in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64), 2..200),
        r in 0.05..0.5f64,
    ) {
        let ps = PointSet::from_positions(space, raw.len() as f64, &positions(space, &raw)).unwrap();
        let g = GeometricGraph::with_radius(ps, r).unwrap();
        for v in 0..g.vertex_count() {
            for w in g.neighbors(v).unwrap() {
                prop_assert!(g.neighbors(w).unwrap().contains(&v));
            }
        }
    }

    #[test]
    fn first_generation_law_is_a_distribution(d in 2u64..9, v in 0u64..7) {
        let law = exact_first_generation_law(d, v).unwrap();
        prop_assert_eq!(total_mass(&law), Probability::one());
        prop_assert!((to_f64(law[0]) - no_collision_probability(d, v)).abs() < 1e-12);
    }

    #[test]
    fn balls_boxes_events_partition_the_collision_free_placements(balls in 0u64..6, boxes in 1u64..5) {
        // With every box protected the event is "all balls land in distinct boxes".
        let total: Probability = (0..=balls / 2)
            .map(|k| balls_boxes_event_prob(balls, boxes, k, 0).unwrap())
            .fold(Probability::zero(), |a, b| a + b);
        prop_assert!(total <= Probability::one());
        let all_protected = balls_boxes_event_prob(balls, boxes, 0, boxes).unwrap();
        let distinct = (0..balls).fold(Probability::one(), |p, i| {
            if i >= boxes { Probability::zero() } else { p * Probability::new(boxes - i, boxes) }
        });
        prop_assert_eq!(all_protected, distinct);
    }

    #[test]
    fn exact_step_law_has_unit_mass_and_the_right_mean(
        off in prop::collection::vec(1u64..10, 1..4),
        coop in prop::collection::vec(1u64..10, 1..4),
        k in 0u64..6,
    ) {
        let norm = |w: &[u64]| -> Vec<Probability> {
            let s: u64 = w.iter().sum();
            w.iter().map(|&x| Probability::new(x, s)).collect()
        };
        let (o, c) = (norm(&off), norm(&coop));
        let law = exact_dbpc_step_law(&o, &c, k).unwrap();
        prop_assert_eq!(total_mass(&law), Probability::one());
        let mean = |p: &[Probability]| p.iter().enumerate().map(|(j, &q)| to_f64(q) * j as f64).sum::<f64>();
        let expect = k as f64 * mean(&o) + (k * k.saturating_sub(1) / 2) as f64 * mean(&c);
        prop_assert!((mean(&law) - expect).abs() < 1e-9);
    }

    #[test]
    fn truncated_laws_sum_to_one(
        lambda in 0.01..20.0f64,
        cutoff in 1usize..40,
        damping in 0.01..=1.0f64,
        lower in any::<bool>(),
    ) {
        let policy = if lower { TailPolicy::MassAtZero } else { TailPolicy::MassAtCutoffPlusOne };
        let law = truncated_reweighted_law(lambda, cutoff, damping, policy).unwrap();
        match law {
            OffspringLaw::Table { weights } => {
                prop_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(weights.iter().all(|&w| w >= 0.0));
            }
            other => prop_assert!(false, "unexpected law {:?}", other),
        }
    }

    #[test]
    fn epidemic_partition_and_growth(
        seed in any::<u64>(),
        space in space_strategy(),
        count in 1usize..150,
        r in 0.05..0.5f64,
        v in 1u32..10,
    ) {
        let mut rng = stream(seed, 1, 0);
        let raw: Vec<(f64, f64, f64)> = (0..count)
            .map(|_| (rand::Rng::random(&mut rng), rand::Rng::random(&mut rng), rand::Rng::random(&mut rng)))
            .collect();
        let ps = PointSet::from_positions(space, count as f64, &positions(space, &raw)).unwrap();
        let g = GeometricGraph::with_radius(ps, r).unwrap();
        let topo = GeometricTopology::new(&g).unwrap();
        let params = EpidemicParams::new(v, 10_000).unwrap();
        let mut state = EpidemicState::new(&topo).unwrap().track_boxes(&topo).unwrap();
        let n = state.vertex_count() as u64;
        while !state.is_extinct() {
            let before: Vec<Status> = (0..g.vertex_count()).map(|w| state.status(w)).collect();
            let removed = state.removed_count();
            let rep = state.step_generation(&topo, &params, &mut rng).unwrap();
            state.check_invariants().unwrap();
            prop_assert_eq!(state.infected_count() + state.susceptible_count() + state.removed_count(), n);
            prop_assert!(state.removed_count() >= removed);
            prop_assert_eq!(rep.newly_infected, rep.cosame_count + rep.codiff_count);
            for w in state.infected() {
                prop_assert_eq!(before[w], Status::Susceptible);
                let parents = topo.neighbors(w);
                prop_assert!(parents.iter().any(|&p| before[p] == Status::Infected));
            }
        }
    }

    #[test]
    fn cosame_only_is_dominated_under_a_shared_tape(
        seed in any::<u64>(),
        size in 2usize..60,
        v in 2u32..15,
    ) {
        let g = build_complete_graph(size).unwrap();
        let mut rng = stream(seed, 2, 0);
        let tape = DestinationTape::record(&g, v, &mut rng);
        let full = EpidemicParams::new(v, 10_000).unwrap();
        let same = full.with_mode(Mode::CoSameOnly);
        let mut a = EpidemicState::new(&g).unwrap();
        let mut b = EpidemicState::new(&g).unwrap();
        let (mut ta, mut tb) = (tape.clone(), tape);
        while !(a.is_extinct() && b.is_extinct()) {
            if !a.is_extinct() {
                a.step_with(&g, &full, &mut ta).unwrap();
            }
            if !b.is_extinct() {
                b.step_with(&g, &same, &mut tb).unwrap();
            }
            for w in 0..size {
                if b.status(w) != Status::Susceptible {
                    prop_assert_ne!(a.status(w), Status::Susceptible);
                }
            }
        }
        prop_assert!(b.cumulative() <= a.cumulative());
    }
}

#[test]
fn streams_are_reproducible() {
    use rand::Rng;
    let draw = |replicate: u64| -> Vec<u64> {
        let mut r = stream(1, 2, replicate);
        (0..8).map(|_| r.random()).collect()
    };
    assert_eq!(draw(3), draw(3));
    assert_ne!(draw(3), draw(4));
}
