//! Round trips of the CSV schema and the grid syntax.

use dsmrf_cli::config::parse_grid;
use dsmrf_cli::table::{format_f64, read_rows, write_rows, Draws, ResultRow, RowKind, Status, HEADER};
use proptest::prelude::*;

fn any_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        8 => any::<f64>(),
        1 => Just(f64::NAN),
        1 => Just(f64::INFINITY),
        1 => Just(0.0),
        2 => 1e-320f64..1e300,
    ]
}

fn any_row() -> impl Strategy<Value = ResultRow> {
    (
        (
            prop_oneof![Just(RowKind::TheoryMinf), Just(RowKind::TheoryM1), Just(RowKind::Mc)],
            prop::array::uniform5(any_f64()),
            prop_oneof![Just(Draws::Inf), (1usize..10_000).prop_map(Draws::Finite)],
            prop::option::of(1usize..100_000),
        ),
        (
            prop::array::uniform4(any_f64()),
            prop::array::uniform3(prop::option::of(any_f64())),
            prop_oneof![Just(Status::Ok), Just(Status::SolverFailure), Just(Status::NumericError)],
            prop::option::of(any::<u64>()),
            "[ -~\n]{0,40}",
        ),
    )
        .prop_map(|((regime, [t, psi_n, psi_p, psi_d, lambda], m, d), (eps, se, status, seed, message))| ResultRow {
            regime,
            t,
            psi_n,
            psi_p,
            psi_d,
            lambda,
            m,
            d,
            eps_test_par: eps[0],
            eps_test_perp: eps[1],
            eps_test_total: eps[2],
            eps_train: eps[3],
            std_err_test: se[0],
            std_err_train: se[1],
            solver_residual: se[2],
            status,
            seed,
            message,
        })
}

fn same_f64(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits() || (a == 0.0 && b == 0.0)
}

fn same_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => same_f64(a, b),
        (None, None) => true,
        _ => false,
    }
}

fn same_row(a: &ResultRow, b: &ResultRow) -> bool {
    a.regime == b.regime
        && [
            (a.t, b.t),
            (a.psi_n, b.psi_n),
            (a.psi_p, b.psi_p),
            (a.psi_d, b.psi_d),
            (a.lambda, b.lambda),
            (a.eps_test_par, b.eps_test_par),
            (a.eps_test_perp, b.eps_test_perp),
            (a.eps_test_total, b.eps_test_total),
            (a.eps_train, b.eps_train),
        ]
        .iter()
        .all(|&(x, y)| same_f64(x, y))
        && same_opt(a.std_err_test, b.std_err_test)
        && same_opt(a.std_err_train, b.std_err_train)
        && same_opt(a.solver_residual, b.solver_residual)
        && a.m == b.m
        && a.d == b.d
        && a.status == b.status
        && a.seed == b.seed
        && a.message == b.message
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rows_parse_back_losslessly(rows in prop::collection::vec(any_row(), 0..6)) {
        let text = write_rows(&rows).unwrap();
        let back = read_rows(&text).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            prop_assert!(same_row(a, b), "{:?} vs {:?}", a, b);
        }
        // writing again gives the same bytes
        prop_assert_eq!(write_rows(&back).unwrap(), text);
    }

    #[test]
    fn float_text_is_shortest_round_trip(x in any::<f64>()) {
        let s = format_f64(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!(same_f64(x, back));
        prop_assert!(!s.contains(','));
    }

    #[test]
    fn logspace_has_exact_ends_and_ratio(lo in -6.0f64..3.0, span in 0.1f64..6.0, n in 2usize..80) {
        let (a, b) = (10f64.powf(lo), 10f64.powf(lo + span));
        let g = parse_grid(&format!("logspace:{a:e},{b:e},{n}")).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert_eq!(g[0], a);
        prop_assert_eq!(g[n - 1], b);
        let r = (b / a).powf(1.0 / (n - 1) as f64);
        for w in g.windows(2) {
            prop_assert!((w[1] / w[0] / r - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn header_is_fixed() {
    assert_eq!(
        HEADER.join(","),
        "regime,t,psi_n,psi_p,psi_D,lambda,m,d,eps_test_par,eps_test_perp,eps_test_total,eps_train,\
         std_err_test,std_err_train,solver_residual,status,seed,message"
    );
}
