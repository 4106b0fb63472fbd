use std::collections::BTreeSet;

use p2a_asp::{
    check_model, enumerate_models, ground_program, parse_program, GroundAtom, GroundProgram,
};
use p2a_oracle::{Assignment, OracleGround};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEARCH_LIMIT: f64 = 1e6;

fn as_sets(g: &GroundProgram) -> OracleGround {
    OracleGround {
        facts: g.facts.clone(),
        choices: g
            .choices
            .iter()
            .map(|c| {
                let binding: Assignment = c.binding.clone();
                (
                    c.rule,
                    binding,
                    c.cardinality,
                    c.candidates.iter().cloned().collect(),
                )
            })
            .collect(),
        nogoods: g.nogoods.iter().map(|n| n.atoms.clone()).collect(),
    }
}

struct Case {
    src: String,
    ours: GroundProgram,
    reference: OracleGround,
}

fn case(seed: u64) -> Option<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = p2a_oracle::random_program(&mut rng);
    let program = parse_program(&src).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
    let reference =
        p2a_oracle::ground(&program).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
    if p2a_oracle::search_space(&reference) > SEARCH_LIMIT {
        return None;
    }
    let ours = ground_program(&program).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
    Some(Case {
        src,
        ours,
        reference,
    })
}

#[test]
fn grounding_and_models_match_the_oracle() {
    let mut checked = 0;
    let mut with_models = 0;
    let mut seed = 0u64;
    while checked < 300 {
        seed += 1;
        let Some(Case {
            src,
            ours,
            reference,
        }) = case(seed)
        else {
            continue;
        };
        assert_eq!(
            ours.choices.len(),
            reference.choices.len(),
            "seed {seed}\n{src}"
        );
        assert_eq!(as_sets(&ours), reference, "seed {seed}\n{src}");

        let expected = p2a_oracle::models(&reference);
        let result = enumerate_models(&ours, usize::MAX).unwrap();
        assert!(result.exhausted);
        let got: BTreeSet<BTreeSet<GroundAtom>> =
            result.models.iter().map(|m| m.atoms.clone()).collect();
        assert_eq!(
            got.len(),
            result.models.len(),
            "duplicate model, seed {seed}\n{src}"
        );
        assert_eq!(got, expected, "seed {seed}\n{src}");
        for m in &result.models {
            assert_eq!(check_model(&ours, &m.atoms), Ok(()), "seed {seed}");
        }
        checked += 1;
        with_models += usize::from(!expected.is_empty());
    }
    // the generator should not degenerate into all-unsatisfiable programs
    assert!(with_models > 50, "{with_models}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn limit_is_monotone(seed in any::<u64>(), n in 1usize..4) {
        if let Some(c) = case(seed) {
            let shorter = enumerate_models(&c.ours, n).unwrap();
            let longer = enumerate_models(&c.ours, n + 1).unwrap();
            prop_assert!(longer.models.starts_with(&shorter.models));
            if shorter.models.len() < n {
                prop_assert!(shorter.exhausted);
            }
        }
    }

    #[test]
    fn grounding_and_solving_are_deterministic(seed in any::<u64>()) {
        if let Some(c) = case(seed) {
            let again = ground_program(&parse_program(&c.src).unwrap()).unwrap();
            prop_assert_eq!(c.ours.dump(), again.dump());
            let a = enumerate_models(&c.ours, usize::MAX).unwrap();
            let b = enumerate_models(&again, usize::MAX).unwrap();
            prop_assert_eq!(a.models, b.models);
        }
    }

    #[test]
    fn check_model_agrees_with_the_oracle_on_arbitrary_sets(seed in any::<u64>(), mask in any::<u64>()) {
        if let Some(c) = case(seed) {
            let candidates: Vec<GroundAtom> = c.reference.candidates().into_iter().collect();
            let mut atoms = c.ours.facts.clone();
            for (i, a) in candidates.iter().enumerate() {
                if mask >> (i % 64) & 1 == 1 {
                    atoms.insert(a.clone());
                }
            }
            prop_assert_eq!(check_model(&c.ours, &atoms).is_ok(), p2a_oracle::is_model(&c.reference, &atoms));

            // nogood soundness against the unground test rules
            let program = parse_program(&c.src).unwrap();
            let violated = !p2a_oracle::satisfies_tests(&program, &atoms).unwrap();
            let contains_nogood = c.ours.nogoods.iter().any(|n| n.atoms.is_subset(&atoms));
            prop_assert_eq!(violated, contains_nogood, "{}", c.src);
        }
    }
}
