//! Property tests over seeded random corpora.

use itertools::Itertools;
use num_traits::One;
use proptest::prelude::*;

use acvass::classify::{classify_machine, profile, Verdict};
use acvass::cvass::{self, admissible, build_admissible_run, support_pump, CvassOptions, CvassError};
use acvass::gen::{self, gen_random, random_machine, random_matrix, random_run, random_values, Family, GenConfig};
use acvass::io::{machine_from_str, machine_to_string};
use acvass::matrix::Matrix;
use acvass::model::{marking_equation, replay, rep_half, run, scale_seq, Config, CounterSet, Machine};
use acvass::num::{rat, vec_add, vec_ge, vec_scale, Rational};
use acvass::oracle::{bounded_decide, OracleOptions, Target};
use acvass::permreach::{self, build_product};
use acvass::reductions::boolean::compile_boolean_to_reset;
use acvass::reductions::Layout;
use acvass::selfloopcover::{self, pumped_per_step, CoverOptions};
use acvass::statereach::{self, abstract_edge, abstract_search, concretize, max_successor, support_minus, StateReachError};

fn family_strategy() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::ALL.to_vec())
}

fn fraction_strategy() -> impl Strategy<Value = Rational> {
    (1i64..=4, 1i64..=4).prop_map(|(a, b)| rat(a.min(b), a.max(b)))
}

fn self_loop(seed: u64) -> GenConfig {
    GenConfig { seed, family: Family::SelfLoop, dims: 1..=3, states: 1..=2, transitions: 1..=4, ..GenConfig::default() }
}

/// A machine, a start configuration and a feasible run from it.
fn sample_run(cfg: &GenConfig) -> (Machine, Config, Vec<acvass::model::Step>) {
    let mut rng = gen::rng(cfg.seed);
    let machine = random_machine(&mut rng, cfg);
    let from = Config::new(0, random_values(&mut rng, machine.dim));
    let seq = random_run(&mut rng, &machine, &from, 8);
    (machine, from, seq)
}

proptest! {
    #[test]
    fn replay_matches_marking_equation(seed in any::<u64>(), family in family_strategy()) {
        let (machine, from, seq) = sample_run(&GenConfig { seed, family, dims: 1..=4, ..GenConfig::default() });
        let end = run(&machine, &from, &seq).unwrap();
        prop_assert_eq!(end.values, marking_equation(&machine, &from.values, &seq));
    }

    #[test]
    fn scaling_is_exact(seed in any::<u64>(), family in family_strategy(), alpha in fraction_strategy()) {
        let (machine, from, seq) = sample_run(&GenConfig { seed, family, ..GenConfig::default() });
        let end = run(&machine, &from, &seq).unwrap();
        let scaled = run(&machine, &Config::new(0, vec_scale(&from.values, &alpha)), &scale_seq(&seq, &alpha)).unwrap();
        prop_assert_eq!(scaled.state, end.state);
        prop_assert_eq!(scaled.values, vec_scale(&end.values, &alpha));
    }

    #[test]
    fn self_loop_runs_are_monotone(seed in any::<u64>()) {
        let (machine, from, seq) = sample_run(&self_loop(seed));
        let end = run(&machine, &from, &seq).unwrap();
        let extra = random_values(&mut gen::rng(seed ^ 1), machine.dim);
        let bigger = run(&machine, &Config::new(0, vec_add(&from.values, &extra)), &seq).unwrap();
        prop_assert!(vec_ge(&bigger.values, &vec_add(&end.values, &extra)));
    }

    #[test]
    fn self_loop_runs_are_convex(seed in any::<u64>(), alpha in fraction_strategy()) {
        let (machine, from, seq) = sample_run(&self_loop(seed));
        let end = run(&machine, &from, &seq).unwrap();
        let scaled = run(&machine, &from, &scale_seq(&seq, &alpha)).unwrap();
        let mixed = vec_add(&vec_scale(&end.values, &alpha), &vec_scale(&from.values, &(Rational::one() - &alpha)));
        prop_assert!(vec_ge(&scaled.values, &mixed));
    }

    #[test]
    fn repeated_halving_keeps_supports(seed in any::<u64>()) {
        let (machine, from, seq) = sample_run(&self_loop(seed));
        let cut = seq.iter().rposition(|s| machine.transitions[s.transition].to == from.state).map_or(0, |i| i + 1);
        let seq = &seq[..cut];
        let pumped = pumped_per_step(&machine, &from, &seq.to_vec()).unwrap();
        let end = run(&machine, &from, &rep_half(seq)).unwrap();
        let w = end.support();
        prop_assert!(from.support().is_subset(w));
        for (s, pumped) in seq.iter().zip(pumped) {
            let t = &machine.transitions[s.transition];
            prop_assert!(t.incremented().is_subset(w));
            for x in t.decremented().iter() {
                prop_assert!(!support_minus(t, x).intersect(w).is_empty());
            }
            for x in pumped.iter() {
                prop_assert!(!support_pump(t, x).intersect(w).is_empty());
            }
        }
    }

    #[test]
    fn adding_transitions_keeps_undecidable_verdicts(seed in any::<u64>(), family in family_strategy(), extra in family_strategy()) {
        let mut rng = gen::rng(seed);
        let mut machine = random_machine(&mut rng, &GenConfig { seed, family, ..GenConfig::default() });
        let before = classify_machine(&machine);
        let perm: Vec<usize> = (0..machine.dim).rev().collect();
        let m = random_matrix(&mut rng, extra, machine.dim, 2, &perm);
        machine.add_affine(0, m, vec![Rational::from_integer(0.into()); machine.dim], 0);
        let after = classify_machine(&machine);
        for (b, a) in [(before.reach, after.reach), (before.cover, after.cover), (before.state_reach, after.state_reach)] {
            prop_assert!(b.verdict != Verdict::Undecidable || a.verdict == Verdict::Undecidable);
        }
    }

    #[test]
    fn solvers_refuse_unlicensed_machines(seed in any::<u64>()) {
        let machine = random_machine(&mut gen::rng(seed), &GenConfig { seed, family: Family::Arbitrary, ..GenConfig::default() });
        let from = Config::new(0, vec![Rational::from_integer(0.into()); machine.dim]);
        let profiles: Vec<_> = machine.matrices().map(profile).collect();
        if profiles.iter().any(|p| !p.non_negative) {
            prop_assert!(matches!(statereach::state_reach(&machine, &from, 0), Err(StateReachError::NegativeMatrix(_))));
        }
        if profiles.iter().any(|p| !p.is_identity) {
            prop_assert!(matches!(cvass::reach(&machine, &from, &from, CvassOptions::default()), Err(CvassError::NotIdentity(_))));
        }
        if profiles.iter().any(|p| !p.is_permutation) {
            prop_assert!(permreach::reach(&machine, &from, &from, CvassOptions::default()).is_err());
        }
        if profiles.iter().any(|p| !(p.non_negative && p.is_self_loop)) {
            prop_assert!(selfloopcover::cover(&machine, &from, &from, CoverOptions::default()).is_err());
        }
    }

    #[test]
    fn machines_round_trip_through_json(seed in any::<u64>(), family in family_strategy()) {
        let inst = gen_random(&GenConfig { seed, family, ..GenConfig::default() });
        let text = machine_to_string(&inst.machine);
        prop_assert_eq!(machine_from_str(&text).unwrap(), inst.machine);
    }

    #[test]
    fn layouts_round_trip(values in prop::collection::vec((0i64..=4).prop_map(|n| rat(n, 4)), 1..4)) {
        let d = values.len();
        let layout = Layout { dim: 2 * d + 1, primary: (0..d).map(|i| 2 * i).collect(), complement: (0..d).map(|i| Some(2 * i + 1)).collect() };
        let encoded = layout.encode(&values);
        prop_assert!(layout.is_encoding(&encoded));
        prop_assert_eq!(layout.decode(&encoded), values);
    }

    #[test]
    fn boolean_encodings_round_trip(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let bp = gen::random_boolean_program(&mut rng, 1..=3, 1..=3, 1..=4);
        let c = compile_boolean_to_reset(&bp);
        for bits in 0..1u32 << bp.vars {
            let values: Vec<bool> = (0..bp.vars).map(|i| bits >> i & 1 == 1).collect();
            prop_assert_eq!(c.decode(&c.encode(0, &values).values), Some(values));
        }
    }

    #[test]
    fn abstract_search_is_deterministic(seed in any::<u64>()) {
        let inst = gen_random(&GenConfig { seed, family: Family::NonNegative, ..GenConfig::default() });
        for q in 0..inst.machine.states.len() {
            prop_assert_eq!(abstract_search(&inst.machine, &inst.start, q).unwrap(), abstract_search(&inst.machine, &inst.start, q).unwrap());
        }
    }

    #[test]
    fn abstract_edges_concretize(seed in any::<u64>(), support in 0u64..8) {
        let inst = gen_random(&GenConfig { seed, family: Family::NonNegative, dims: 3..=3, ..GenConfig::default() });
        let m = &inst.machine;
        let from = CounterSet(support);
        let values: Vec<Rational> = (0..3).map(|x| if from.contains(x) { Rational::one() } else { Rational::from_integer(0.into()) }).collect();
        for t in 0..m.transitions.len() {
            let start = Config::new(m.transitions[t].from, values.clone());
            if let Some(next) = max_successor(m, t, from) {
                prop_assert!(abstract_edge(m, t, from, next));
                let seq = concretize(m, &start, &[(t, next)]);
                prop_assert!(next.is_subset(run(m, &start, &seq).unwrap().support()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oracle_witnesses_replay_and_induce_abstract_edges(seed in any::<u64>()) {
        let inst = gen_random(&GenConfig { seed, family: Family::NonNegative, dims: 1..=2, states: 1..=2, transitions: 1..=3, ..GenConfig::default() });
        let m = &inst.machine;
        for to in &inst.samples {
            let target = Target::Cover(to.values.clone());
            let short = bounded_decide(m, &inst.start, to.state, &target, OracleOptions { max_len: 3, one_bounded: false });
            let long = bounded_decide(m, &inst.start, to.state, &target, OracleOptions { max_len: 5, one_bounded: false });
            prop_assert!(!short.is_witness() || long.is_witness());
            if let Some(w) = long.witness() {
                let configs = replay(m, &inst.start, w).unwrap();
                let end = configs.last().unwrap();
                prop_assert_eq!(end.state, to.state);
                prop_assert!(vec_ge(&end.values, &to.values));
                for (s, pair) in w.iter().zip(configs.windows(2)) {
                    prop_assert!(abstract_edge(m, s.transition, pair[0].support(), pair[1].support()));
                }
            }
        }
    }

    #[test]
    fn admissible_orders_build_runs(seed in any::<u64>()) {
        let inst = gen_random(&GenConfig { seed, family: Family::Identity, dims: 1..=3, states: 1..=3, transitions: 1..=4, ..GenConfig::default() });
        let m = &inst.machine;
        let all: Vec<usize> = (0..m.transitions.len()).collect();
        for size in 1..=all.len() {
            for set in all.iter().copied().combinations(size) {
                let anchor = m.transitions[set[0]].from;
                let initial = inst.start.support();
                for end in 0..m.states.len() {
                    if let Some(order) = admissible(m, anchor, initial, &set, CounterSet::EMPTY, end) {
                        let seq = build_admissible_run(m, anchor, &order, &inst.start.values, CounterSet::EMPTY, end);
                        prop_assert!(seq.is_some());
                        let reached = run(m, &Config::new(anchor, inst.start.values.clone()), &seq.unwrap()).unwrap();
                        prop_assert_eq!(reached.state, end);
                    }
                }
            }
        }
    }

    #[test]
    fn identity_cover_is_scale_invariant(seed in any::<u64>(), alpha in fraction_strategy()) {
        let inst = gen_random(&GenConfig { seed, family: Family::Identity, dims: 1..=2, states: 1..=2, transitions: 1..=3, ..GenConfig::default() });
        let m = &inst.machine;
        for to in &inst.samples {
            let plain = selfloopcover::cover(m, &inst.start, to, CoverOptions::default()).unwrap();
            let from = Config::new(inst.start.state, vec_scale(&inst.start.values, &alpha));
            let goal = Config::new(to.state, vec_scale(&to.values, &alpha));
            prop_assert_eq!(plain.is_yes(), selfloopcover::cover(m, &from, &goal, CoverOptions::default()).unwrap().is_yes());
        }
    }

    #[test]
    fn permutation_witnesses_pull_back(seed in any::<u64>()) {
        let inst = gen_random(&GenConfig { seed, family: Family::Permutation, dims: 2..=3, states: 1..=2, transitions: 1..=3, ..GenConfig::default() });
        for to in &inst.samples {
            if let Some(w) = permreach::reach(&inst.machine, &inst.start, to, CvassOptions::default()).unwrap().witness() {
                prop_assert_eq!(&run(&inst.machine, &inst.start, w).unwrap(), to);
            }
        }
        let product = build_product(&inst.machine, inst.start.state).unwrap();
        let states = product.states.iter().map(|s| s.state).unique().count();
        prop_assert!(product.states.len() <= states * product.group_size());
    }
}

/// Every factor of a product of non-negative self-loop matrices is dominated
/// entrywise by the product.
#[test]
fn self_loop_products_dominate_factors() {
    fn all(dim: usize, diag: &[i64], off: &[i64]) -> Vec<Matrix> {
        let cells: Vec<(usize, usize)> = (0..dim).cartesian_product(0..dim).collect();
        cells
            .iter()
            .map(|&(i, j)| if i == j { diag.to_vec() } else { off.to_vec() })
            .multi_cartesian_product()
            .map(|entries| {
                let mut m = Matrix::zero(dim);
                for (&(i, j), v) in cells.iter().zip(entries) {
                    m.set(i, j, v);
                }
                m
            })
            .collect()
    }
    let dominated = |b: &Matrix, a: &Matrix| (0..a.dim()).all(|i| (0..a.dim()).all(|j| b.get(i, j) >= a.get(i, j)));
    let two = all(2, &[1, 2], &[0, 1, 2]);
    for (a, b, c) in itertools::iproduct!(&two, &two, &two) {
        let p = a.mul(b).mul(c);
        assert!(dominated(&p, a) && dominated(&p, b) && dominated(&p, c));
    }
    let three = all(3, &[1, 2], &[0, 1]);
    for (a, b) in itertools::iproduct!(&three, &three) {
        let p = a.mul(b);
        assert!(dominated(&p, a) && dominated(&p, b));
    }
}

/// Renaming by a permutation is conjugation by its matrix.
#[test]
fn renaming_is_conjugation() {
    let mut rng = gen::rng(5);
    for dim in 1..=4 {
        for sigma in (0..dim).permutations(dim) {
            let p = Matrix::permutation(&sigma);
            let inverse = Matrix::permutation(&acvass::matrix::perm::inverse(&sigma));
            for _ in 0..4 {
                let a = random_matrix(&mut rng, Family::Arbitrary, dim, 3, &sigma);
                assert_eq!(a.renamed(&sigma), p.mul(&a).mul(&inverse));
            }
        }
    }
}

/// The product over the swap keeps exactly two copies of each state.
#[test]
fn product_size_is_states_times_group() {
    let mut m = Machine::with_states(3, 2);
    m.add_affine(0, Matrix::permutation(&[1, 2, 0]), vec![Rational::from_integer(0.into()); 3], 1);
    m.add_affine(1, Matrix::identity(3), vec![Rational::from_integer(0.into()); 3], 0);
    let product = build_product(&m, 0).unwrap();
    assert_eq!(product.group_size(), 3);
    assert_eq!(product.states.len(), 2 * 3);
}

/// On one-counter toys the oracle matches hand analysis.
#[test]
fn oracle_on_hand_checked_toys() {
    let opts = OracleOptions { max_len: 4, one_bounded: false };
    // a single decrement from 1 reaches any value in [0, 1)
    let mut m = Machine::with_states(1, 1);
    m.add_additive(0, &[-1], 0);
    let from = Config::new(0, vec![Rational::one()]);
    assert!(bounded_decide(&m, &from, 0, &Target::Exact(vec![rat(1, 3)]), opts).is_witness());
    assert!(bounded_decide(&m, &from, 0, &Target::Exact(vec![Rational::from_integer(0.into())]), opts).is_witness());
    assert!(!bounded_decide(&m, &from, 0, &Target::Cover(vec![rat(3, 2)]), opts).is_witness());
    // doubling from 1/2 covers 2 after two steps, never from zero
    let mut d = Machine::with_states(1, 1);
    d.add_affine(0, Matrix::from_rows(&[vec![2]]).unwrap(), vec![Rational::from_integer(0.into())], 0);
    assert!(bounded_decide(&d, &Config::new(0, vec![rat(1, 2)]), 0, &Target::Cover(vec![Rational::from_integer(2.into())]), opts).is_witness());
    assert!(!bounded_decide(&d, &Config::new(0, vec![Rational::from_integer(0.into())]), 0, &Target::Cover(vec![rat(1, 2)]), opts).is_witness());
}
