use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use p2a_asp::{
    check_model, enumerate_models, ground_program, parse_program, GroundAtom, GroundProgram, Value,
    Violation,
};

fn ground(src: &str) -> GroundProgram {
    ground_program(&parse_program(src).unwrap()).unwrap()
}

fn atom(pred: &str, args: &[Value]) -> GroundAtom {
    GroundAtom::new(pred, args.to_vec())
}

fn s(v: &str) -> Value {
    Value::str(v)
}

fn i(v: i64) -> Value {
    Value::Int(v)
}

fn chosen(g: &GroundProgram, atoms: &BTreeSet<GroundAtom>) -> BTreeSet<GroundAtom> {
    atoms.difference(&g.facts).cloned().collect()
}

fn unique_model(src: &str, within: Duration) -> (GroundProgram, BTreeSet<GroundAtom>) {
    let start = Instant::now();
    let g = ground(src);
    let r = enumerate_models(&g, 2).unwrap();
    assert!(start.elapsed() <= within, "{:?}", start.elapsed());
    assert!(r.exhausted);
    assert_eq!(r.models.len(), 1);
    let atoms = r.models.into_iter().next().unwrap().atoms;
    (g, atoms)
}

#[test]
fn foodie_club() {
    let (g, model) = unique_model(include_str!("programs/foodie.lp"), Duration::from_secs(1));
    let expected: BTreeSet<GroundAtom> = [
        ("chianti", 24, "Priscilla"),
        ("shiraz", 25, "Isabel"),
        ("riesling", 26, "Kurt"),
        ("port", 27, "Robin"),
    ]
    .iter()
    .map(|(w, p, n)| atom("match", &[s(w), i(*p), s(n)]))
    .collect();
    assert_eq!(chosen(&g, &model), expected);
    assert_eq!(check_model(&g, &model), Ok(()));
}

#[test]
fn foodie_club_with_swapped_prices_violates_a_nogood() {
    let g = ground(include_str!("programs/foodie.lp"));
    let mut atoms = g.facts.clone();
    atoms.extend([
        atom("match", &[s("chianti"), i(24), s("Priscilla")]),
        atom("match", &[s("shiraz"), i(25), s("Isabel")]),
        atom("match", &[s("riesling"), i(27), s("Kurt")]),
        atom("match", &[s("port"), i(26), s("Robin")]),
    ]);
    assert!(matches!(
        check_model(&g, &atoms),
        Err(Violation::Nogood { .. })
    ));
}

#[test]
fn weight_loss() {
    let (g, model) = unique_model(
        include_str!("programs/weight_loss.lp"),
        Duration::from_secs(1),
    );
    let expected: BTreeSet<GroundAtom> = [
        ("Tom", 3, "low-fat"),
        ("Celia", 5, "gluten-free"),
        ("Mandy", 7, "vegan"),
        ("Raymond", 9, "dairy-free"),
    ]
    .iter()
    .map(|(n, p, d)| atom("match", &[s(n), i(*p), s(d)]))
    .collect();
    assert_eq!(chosen(&g, &model), expected);
}

#[test]
fn against_the_grain() {
    let (g, model) = unique_model(include_str!("programs/grain.lp"), Duration::from_secs(1));
    let expected: BTreeSet<GroundAtom> = [
        ("Bonita", 325, "poplar"),
        ("Yvette", 275, "sandalwood"),
        ("Tabitha", 225, "ash"),
    ]
    .iter()
    .map(|(e, p, w)| atom("match", &[s(e), i(*p), s(w)]))
    .collect();
    assert_eq!(chosen(&g, &model), expected);
}

#[test]
fn jobs_puzzle() {
    let (g, model) = unique_model(include_str!("programs/jobs.lp"), Duration::from_secs(5));
    let expected: BTreeSet<GroundAtom> = [
        ("Thelma", "chef", "female"),
        ("Thelma", "boxer", "female"),
        ("Steve", "nurse", "male"),
        ("Steve", "police officer", "male"),
        ("Pete", "telephone operator", "male"),
        ("Pete", "actor", "male"),
        ("Roberta", "guard", "female"),
        ("Roberta", "teacher", "female"),
    ]
    .iter()
    .map(|(p, j, gd)| atom("assign", &[s(p), s(j), s(gd)]))
    .collect();
    assert_eq!(chosen(&g, &model), expected);
    assert_eq!(check_model(&g, &model), Ok(()));
}

/// Independent count: permutations with no two queens on a diagonal.
fn queens_solutions(n: usize) -> Vec<Vec<usize>> {
    fn extend(n: usize, cols: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cols.len() == n {
            out.push(cols.clone());
            return;
        }
        for c in 0..n {
            let r = cols.len();
            if cols
                .iter()
                .enumerate()
                .all(|(r2, &c2)| c2 != c && r.abs_diff(r2) != c.abs_diff(c2))
            {
                cols.push(c);
                extend(n, cols, out);
                cols.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(n, &mut Vec::new(), &mut out);
    out
}

#[test]
fn eight_queens() {
    let start = Instant::now();
    let g = ground(include_str!("programs/queens.lp"));
    let r = enumerate_models(&g, usize::MAX).unwrap();
    assert!(start.elapsed() < Duration::from_secs(10));
    assert!(r.exhausted);
    let oracle = queens_solutions(8);
    assert_eq!(oracle.len(), 92);
    let expected: BTreeSet<BTreeSet<GroundAtom>> = oracle
        .iter()
        .map(|cols| {
            cols.iter()
                .enumerate()
                .map(|(r, c)| atom("assign", &[i(r as i64 + 1), i(*c as i64 + 1)]))
                .collect()
        })
        .collect();
    let got: BTreeSet<BTreeSet<GroundAtom>> =
        r.models.iter().map(|m| chosen(&g, &m.atoms)).collect();
    assert_eq!(r.models.len(), 92);
    assert_eq!(got, expected);
}

fn grid_atoms(grid: &[Vec<i64>]) -> Vec<GroundAtom> {
    let mut out = Vec::new();
    for (r, row) in grid.iter().enumerate() {
        for (c, n) in row.iter().enumerate() {
            out.push(atom("assign", &[i(r as i64 + 1), i(c as i64 + 1), i(*n)]));
        }
    }
    out
}

fn valid_sudoku() -> Vec<Vec<i64>> {
    (0..9)
        .map(|r| {
            (0..9)
                .map(|c| ((r * 3 + r / 3 + c) % 9 + 1) as i64)
                .collect()
        })
        .collect()
}

fn is_valid_grid(grid: &[Vec<i64>], box_size: usize) -> bool {
    let n = grid.len();
    let distinct = |cells: Vec<i64>| cells.iter().collect::<BTreeSet<_>>().len() == n;
    (0..n).all(|r| distinct(grid[r].clone()))
        && (0..n).all(|c| distinct((0..n).map(|r| grid[r][c]).collect()))
        && (0..n).all(|b| {
            let (r0, c0) = (b / box_size * box_size, b % box_size * box_size);
            distinct(
                (0..n)
                    .map(|k| grid[r0 + k / box_size][c0 + k % box_size])
                    .collect(),
            )
        })
}

#[test]
fn sudoku_accepts_a_valid_grid_and_rejects_row_duplicates() {
    let start = Instant::now();
    let g = ground(include_str!("programs/sudoku.lp"));
    let grid = valid_sudoku();
    assert!(is_valid_grid(&grid, 3));
    let mut atoms = g.facts.clone();
    atoms.extend(grid_atoms(&grid));
    assert_eq!(check_model(&g, &atoms), Ok(()));

    // every single-cell change that duplicates a value within its row
    for r in 0..9 {
        for c in 0..9 {
            let mut broken = grid.clone();
            broken[r][c] = grid[r][(c + 1) % 9];
            let mut atoms = g.facts.clone();
            atoms.extend(grid_atoms(&broken));
            assert!(
                matches!(check_model(&g, &atoms), Err(Violation::Nogood { .. })),
                "{r},{c}"
            );
        }
    }
    assert!(start.elapsed() < Duration::from_secs(30));
}

#[test]
fn sudoku_with_clues_is_solved() {
    let grid = valid_sudoku();
    let mut src = include_str!("programs/sudoku.lp").to_string();
    // keep roughly half the cells as clues
    for (r, row) in grid.iter().enumerate() {
        for (c, n) in row.iter().enumerate() {
            if (r * 9 + c) % 2 == 0 {
                src.push_str(&format!(
                    "N={} :- assign(Ir,Ic,N), Ir={}, Ic={}.\n",
                    n,
                    r + 1,
                    c + 1
                ));
            }
        }
    }
    let g = ground(&src);
    let r = enumerate_models(&g, 2).unwrap();
    assert!(!r.models.is_empty());
    for m in &r.models {
        assert_eq!(check_model(&g, &m.atoms), Ok(()));
        let mut solved = vec![vec![0i64; 9]; 9];
        for a in m.with_predicate("assign") {
            let idx = |k: usize| a.args[k].as_int().unwrap();
            solved[idx(0) as usize - 1][idx(1) as usize - 1] = idx(2);
        }
        assert!(is_valid_grid(&solved, 3));
    }
}

#[test]
fn shidoku_has_288_solutions() {
    let start = Instant::now();
    let g = ground(include_str!("programs/shidoku.lp"));
    let r = enumerate_models(&g, usize::MAX).unwrap();
    assert!(r.exhausted);

    // brute force over all 4x4 grids whose rows are permutations
    let perms: Vec<Vec<i64>> = {
        let mut out = Vec::new();
        for a in 1..=4 {
            for b in 1..=4 {
                for c in 1..=4 {
                    for d in 1..=4 {
                        let row = vec![a, b, c, d];
                        if row.iter().collect::<BTreeSet<_>>().len() == 4 {
                            out.push(row);
                        }
                    }
                }
            }
        }
        out
    };
    let mut expected = BTreeSet::new();
    for r0 in &perms {
        for r1 in &perms {
            for r2 in &perms {
                for r3 in &perms {
                    let grid = vec![r0.clone(), r1.clone(), r2.clone(), r3.clone()];
                    if is_valid_grid(&grid, 2) {
                        expected.insert(grid_atoms(&grid).into_iter().collect::<BTreeSet<_>>());
                    }
                }
            }
        }
    }
    assert_eq!(expected.len(), 288);
    let got: BTreeSet<BTreeSet<GroundAtom>> =
        r.models.iter().map(|m| chosen(&g, &m.atoms)).collect();
    assert_eq!(r.models.len(), 288);
    assert_eq!(got, expected);
    assert!(start.elapsed() < Duration::from_secs(30));
}

#[test]
fn sudoku_variant_rules_parse_and_ground() {
    let variants = [
        "{N1=N2}=0 :- assign(Ir1,Ic1,N1), assign(Ir2,Ic2,N2), |Ir1-Ir2|+|Ic1-Ic2|=3, (Ir1,Ic1,N1)!=(Ir2,Ic2,N2).",
        "{N1=N2}=0 :- assign(Ir1,Ic1,N1), assign(Ir2,Ic2,N2), Ir1=Ic1, Ir2=Ic2, (Ir1,Ic1,N1)!=(Ir2,Ic2,N2).",
        "{N1=N2}=0 :- assign(Ir1,Ic1,N1), assign(Ir2,Ic2,N2), Ir1+Ic1=8, Ir2+Ic2=8, (Ir1,Ic1,N1)!=(Ir2,Ic2,N2).",
        "{N1=N2}=0 :- assign(Ir1,Ic1,N1), assign(Ir2,Ic2,N2), Ir1\\3=Ir2\\3, Ic1\\3=Ic2\\3, (Ir1,Ic1,N1)!=(Ir2,Ic2,N2).",
    ];
    let base = include_str!("programs/shidoku.lp");
    let plain = ground(base).nogoods.len();
    for v in variants {
        let g = ground(&format!("{base}\n{v}\n"));
        assert!(g.nogoods.len() >= plain, "{v}");
    }
}

#[test]
fn ground_dump_is_byte_identical_across_runs() {
    for src in [
        include_str!("programs/foodie.lp"),
        include_str!("programs/jobs.lp"),
    ] {
        assert_eq!(ground(src).dump(), ground(src).dump());
    }
}
