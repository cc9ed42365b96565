use edp_core::grid_model::{LabelSpace, Prior, SmoothnessModel};
use edp_core::minplus::Operator;
use edp_core::oracle::{oracle_chain, random_grid};
use edp_core::scanline::{self, ScanlineProblem};
use proptest::prelude::*;

fn problem_strategy() -> impl Strategy<Value = ScanlineProblem> {
    (1usize..8, 2u32..6, 1u32..3, 1u32..4, 0i64..25).prop_flat_map(|(len, q, l1, g, lambda)| {
        let space = LabelSpace::stereo(q - 1).unwrap();
        let model = SmoothnessModel::new(Prior::from_exponent(l1).unwrap(), g, lambda).unwrap();
        (
            prop::collection::vec(0i64..60, len * q as usize),
            prop::collection::vec(1i64..3, len - 1),
        )
            .prop_map(move |(costs, weights)| ScanlineProblem::new(space.clone(), model.clone(), costs, weights).unwrap())
    })
}

fn ops(problem: &ScanlineProblem) -> Vec<Operator> {
    Operator::ALL.into_iter().filter(|op| op.supports(problem.model().prior)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn backtrack_energy_three_way_equality(problem in problem_strategy()) {
        let best = oracle_chain(&problem).unwrap();
        for op in ops(&problem) {
            let pass = scanline::forward_pass(&problem, op).unwrap();
            let last = pass.sums.slice(problem.len() - 1);
            let min = *last.iter().min().unwrap();
            let (path, energy) = scanline::backtrack(&pass.sums, &pass.table);
            prop_assert_eq!(energy, min);
            prop_assert_eq!(problem.path_energy(&path), min);
            prop_assert_eq!(min, best.energy);
        }
    }

    #[test]
    fn unique_optimum_is_found_by_marginals(problem in problem_strategy()) {
        let best = oracle_chain(&problem).unwrap();
        prop_assume!(best.is_unique());
        for op in ops(&problem) {
            let pass = scanline::forward_pass(&problem, op).unwrap();
            let (path, _) = scanline::backtrack(&pass.sums, &pass.table);
            let marginals = scanline::bidirectional_marginals(&problem, op).unwrap();
            prop_assert_eq!(&path, &best.paths[0]);
            prop_assert_eq!(scanline::marginal_argmin_solution(&marginals, problem.labels()), path);
        }
    }

    #[test]
    fn forward_sums_are_operator_independent(problem in problem_strategy()) {
        let reference = scanline::forward_pass(&problem, Operator::Sfms).unwrap();
        for op in ops(&problem) {
            let pass = scanline::forward_pass(&problem, op).unwrap();
            prop_assert_eq!(pass.sums.as_slice(), reference.sums.as_slice());
            prop_assert_eq!(
                scanline::bidirectional_marginals(&problem, op).unwrap(),
                scanline::bidirectional_marginals(&problem, Operator::Sfms).unwrap()
            );
        }
    }
}

#[test]
fn rows_are_solved_independently() {
    for seed in 0..10 {
        let (volume, model) = random_grid(seed, 6, 4, 3).unwrap();
        let op = Operator::fastest_for(model.prior);
        let field = scanline::solve_rows(&volume, &model, op, 1.0).unwrap();
        for y in 0..4 {
            let problem = ScanlineProblem::from_row(&volume, &model, y).unwrap();
            let pass = scanline::forward_pass(&problem, op).unwrap();
            let (path, _) = scanline::backtrack(&pass.sums, &pass.table);
            let row: Vec<u32> = (0..6).map(|x| field.label(x, y)).collect();
            assert_eq!(row, path, "seed {seed} row {y}");
        }
    }
}

#[test]
fn worked_chain_example() {
    let space = LabelSpace::stereo(1).unwrap();
    let model = SmoothnessModel::new(Prior::Linear, 1, 1).unwrap();
    let problem = ScanlineProblem::uniform(space, model, vec![0, 3, 2, 0, 0, 2]).unwrap();
    let best = oracle_chain(&problem).unwrap();
    assert_eq!(best.energy, 2);
    assert_eq!(best.paths, vec![vec![0, 0, 0], vec![0, 1, 0]]);
    let pass = scanline::forward_pass(&problem, Operator::Lrms).unwrap();
    assert_eq!(scanline::backtrack(&pass.sums, &pass.table), (vec![0, 0, 0], 2));
}
