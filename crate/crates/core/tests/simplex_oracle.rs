use proptest::prelude::*;
use qswitch_core::linalg::{self, DenseMatrix};
use qswitch_core::simplex::{solve, Constraint, LinearProgram, LpError, Relation, Sense};

/// Best vertex of `{Ax ≤ b, x ≥ 0}` by trying every choice of `n` tight rows.
fn vertex_enumeration(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let n = c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = -1.0;
        rows.push((e, 0.0));
    }
    let total = rows.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..1 << total {
        if mask.count_ones() as usize != n {
            continue;
        }
        let chosen: Vec<&(Vec<f64>, f64)> = (0..total)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| &rows[i])
            .collect();
        let m = DenseMatrix::from_rows(&chosen.iter().map(|r| r.0.clone()).collect::<Vec<_>>());
        let rhs: Vec<f64> = chosen.iter().map(|r| r.1).collect();
        let Some(x) = linalg::solve(&m, &rhs, 1e-10) else {
            continue;
        };
        let feasible = rows
            .iter()
            .all(|(r, rb)| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= rb + 1e-9);
        if feasible {
            let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}

fn lp_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..=3, 1usize..=4).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-3i32..=5, n),
            prop::collection::vec(prop::collection::vec(-2i32..=4, n), m),
            prop::collection::vec(-3i32..=8, m),
        )
            .prop_map(move |(c, a, b)| {
                let c: Vec<f64> = c.into_iter().map(f64::from).collect();
                let mut a: Vec<Vec<f64>> = a
                    .into_iter()
                    .map(|r| r.into_iter().map(f64::from).collect())
                    .collect();
                let mut b: Vec<f64> = b.into_iter().map(f64::from).collect();
                // Box the region so every feasible instance has an optimal vertex.
                a.push(vec![1.0; n]);
                b.push(10.0);
                (c, a, b)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn maximum_matches_vertex_enumeration((c, a, b) in lp_strategy()) {
        let lp = LinearProgram {
            sense: Sense::Maximize,
            objective: c.clone(),
            constraints: a.iter().zip(&b).map(|(r, &rb)| Constraint::le(r.clone(), rb)).collect(),
        };
        match (solve(&lp), vertex_enumeration(&c, &a, &b)) {
            (Ok(out), Some(best)) => {
                prop_assert!((out.value - best).abs() < 1e-9, "{} vs {}", out.value, best);
                prop_assert!(out.x.iter().all(|&v| v >= -1e-12));
                prop_assert!(out.primal_residual <= 1e-9);
                prop_assert!(out.duality_gap <= 1e-9 * out.value.abs().max(1.0));
                prop_assert!(out.duals.iter().all(|&y| y >= -1e-9));
            }
            (Err(LpError::Infeasible(_)), None) => {}
            (got, want) => prop_assert!(false, "solver {:?}, enumeration {:?}", got, want),
        }
    }

    #[test]
    fn minimization_is_negated_maximization((c, a, b) in lp_strategy()) {
        let cons: Vec<Constraint> = a.iter().zip(&b).map(|(r, &rb)| Constraint::le(r.clone(), rb)).collect();
        let max = solve(&LinearProgram { sense: Sense::Maximize, objective: c.clone(), constraints: cons.clone() });
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let min = solve(&LinearProgram { sense: Sense::Minimize, objective: neg, constraints: cons });
        match (max, min) {
            (Ok(p), Ok(q)) => prop_assert!((p.value + q.value).abs() < 1e-9),
            (Err(e1), Err(e2)) => prop_assert_eq!(std::mem::discriminant(&e1), std::mem::discriminant(&e2)),
            (p, q) => prop_assert!(false, "{:?} / {:?}", p, q),
        }
    }

    #[test]
    fn equality_rows_are_respected(x0 in prop::collection::vec(0u32..4, 3), c in prop::collection::vec(-2i32..3, 3)) {
        // Feasible by construction: rows evaluated at the integer point x0.
        let rows = [vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 2.0]];
        let cons: Vec<Constraint> = rows
            .iter()
            .map(|r| Constraint::eq(r.clone(), r.iter().zip(&x0).map(|(p, &q)| p * q as f64).sum()))
            .collect();
        let lp = LinearProgram { sense: Sense::Maximize, objective: c.iter().map(|&v| v as f64).collect(), constraints: cons.clone() };
        let out = solve(&lp).unwrap();
        for con in &cons {
            prop_assert_eq!(con.relation, Relation::Eq);
            let lhs: f64 = con.coeffs.iter().zip(&out.x).map(|(p, q)| p * q).sum();
            prop_assert!((lhs - con.rhs).abs() < 1e-9);
        }
        let at_x0: f64 = c.iter().zip(&x0).map(|(&p, &q)| f64::from(p) * f64::from(q)).sum();
        prop_assert!(out.value >= at_x0 - 1e-9);
    }
}
