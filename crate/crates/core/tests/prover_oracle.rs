mod oracle;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safe_core::logic::{solve, Answer, IndexMode, IndexedContext, Literal, SolveOptions, Statement, Term};
use safe_core::time::Timestamp;

fn answers(prog: &[Statement], q: &[Literal], index: IndexMode) -> BTreeSet<Answer> {
    let ctx = IndexedContext::build(prog.to_vec(), Timestamp(0)).expect("generated programs are well-formed");
    let opts = SolveOptions { index, ..Default::default() };
    solve(&ctx, q, &opts).expect("no limits bind on small programs").answers.into_iter().collect()
}

#[test]
fn matches_bottom_up_fixpoint_on_random_programs() {
    let start = Instant::now();
    let mut nonempty = 0;
    for seed in 0..300u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (prog, q) = oracle::random_program(&mut rng, &oracle::GenConfig::default());
        let expected = oracle::query(&oracle::fixpoint(&prog), &q);
        let got = answers(&prog, &q, IndexMode::Secondary);
        assert_eq!(got, expected, "seed {seed}\nprogram:\n{}\nquery: {}", render(&prog), q[0]);
        nonempty += usize::from(!got.is_empty());
    }
    // Guard against a generator that only produces trivially empty queries.
    assert!(nonempty > 60, "only {nonempty} queries had answers");
    assert!(start.elapsed() < Duration::from_secs(60));
}

fn render(prog: &[Statement]) -> String {
    prog.iter().map(|s| format!("  {s}\n")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_choice_never_changes_answers(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (prog, q) = oracle::random_program(&mut rng, &oracle::GenConfig::default());
        prop_assert_eq!(answers(&prog, &q, IndexMode::Primary), answers(&prog, &q, IndexMode::Secondary));
    }

    #[test]
    fn adding_statements_never_removes_answers(seed in any::<u64>(), extra in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (prog, q) = oracle::random_program(&mut rng, &oracle::GenConfig::default());
        let (more, _) = oracle::random_program(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed), &oracle::GenConfig::default());
        let before = answers(&prog, &q, IndexMode::Secondary);
        let mut bigger = prog.clone();
        // Only append statements whose predicates keep their arity.
        let base = IndexedContext::build(prog.clone(), Timestamp(0)).unwrap();
        for st in more.into_iter().take(extra) {
            let mut trial = bigger.clone();
            trial.push(st);
            if IndexedContext::build(trial.clone(), Timestamp(0)).is_ok() {
                bigger = trial;
            }
        }
        drop(base);
        let after = answers(&bigger, &q, IndexMode::Secondary);
        prop_assert!(before.is_subset(&after));
    }

    #[test]
    fn derived_speakers_come_from_heads(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (prog, _) = oracle::random_program(&mut rng, &oracle::GenConfig::default());
        let ctx = IndexedContext::build(prog.clone(), Timestamp(0)).unwrap();
        for st in &prog {
            let mut goal = st.head.clone();
            goal.speaker = Term::var("Spk");
            for (i, a) in goal.args.iter_mut().enumerate() {
                *a = Term::var(&format!("A{i}"));
            }
            let out = solve(&ctx, &[Literal::Atom(goal.clone())], &SolveOptions::default()).unwrap();
            let heads: BTreeSet<String> = prog
                .iter()
                .filter(|s| s.head.predicate == goal.predicate && s.head.arity() == goal.arity())
                .map(|s| s.head.speaker.to_string())
                .collect();
            for a in out.answers {
                let spk = a.iter().find(|(v, _)| v.name() == "Spk").unwrap().1.to_string();
                prop_assert!(heads.contains(&spk), "speaker {} not among rule heads {:?}", spk, heads);
            }
        }
    }
}
