use std::sync::Arc;

use proptest::prelude::*;
use spatial_iv::basisdecomp::*;
use spatial_iv::numkernel::{covariance, dot, norm2, sym_eigen, variance, Matrix};
use spatial_iv::spatialdata::{graph_laplacian, knn_graph, SpatialDataset};

/// Solves the normal equations `BᵀB γ = Bᵀa` by Gauss–Jordan elimination.
fn normal_equations_projection(b: &Matrix, a: &[f64]) -> Vec<f64> {
    let m = b.cols();
    let cols = b.columns();
    let mut aug: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = (0..m).map(|j| dot(&cols[i], &cols[j])).collect();
            row.push(dot(&cols[i], a));
            row
        })
        .collect();
    for k in 0..m {
        let piv = (k..m).max_by(|&i, &j| aug[i][k].abs().total_cmp(&aug[j][k].abs())).unwrap();
        aug.swap(k, piv);
        for i in 0..m {
            if i != k {
                let f = aug[i][k] / aug[k][k];
                for j in k..=m {
                    aug[i][j] -= f * aug[k][j];
                }
            }
        }
    }
    let gamma: Vec<f64> = (0..m).map(|i| aug[i][m] / aug[i][i]).collect();
    (0..b.rows()).map(|i| dot(b.row(i), &gamma)).collect()
}

#[test]
fn random_three_column_basis_matches_normal_equations() {
    let xs = [0.3, -1.2, 0.8, 2.0, -0.4, 1.1, 0.0, -2.2, 0.6, 1.7];
    let a: Vec<f64> = (0..10).map(|i| ((i * 7) % 5) as f64 - 1.3 * xs[i]).collect();
    let b = Matrix::from_fn(10, 3, |i, j| match j {
        0 => xs[i],
        1 => xs[i] * xs[i] - 0.5,
        _ => ((i + 3) as f64).sin(),
    });
    let oracle = normal_equations_projection(&b, &a);
    let basis = Arc::new(SpatialBasis::from_matrix(BasisKind::ThinPlateSpline, b, BasisMeta::None).unwrap());
    let dec = decompose(&a, &basis).unwrap();
    for (x, y) in dec.a_c.iter().zip(&oracle) {
        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
    }
}

#[test]
fn a_in_span_has_zero_instrument() {
    let d = SpatialDataset::new(
        (0..12).map(|i| [(i % 4) as f64, (i / 4) as f64]).collect(),
        vec![0.0; 12],
    )
    .unwrap();
    let b = Arc::new(tps_basis(&d, 6).unwrap());
    let a: Vec<f64> = d.coords().iter().map(|c| 2.0 - c[0] + 0.5 * c[1]).collect();
    let dec = decompose(&a, &b).unwrap();
    assert!(dec.zero_instrument);
    assert!(dec.a_uc.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn variance_target_selection_on_a_laplacian() {
    let n = 120;
    let halton = |mut i: usize, base: usize| {
        let (mut f, mut r) = (1.0, 0.0);
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    };
    let coords: Vec<[f64; 2]> = (1..=n).map(|i| [1.2 * halton(i, 2), 0.9 * halton(i, 3)]).collect();
    let mut state = 12345u64;
    let a: Vec<f64> = coords
        .iter()
        .map(|c| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            0.3 * (3.0 * c[0]).sin() + (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();
    let d = SpatialDataset::new(coords, a.clone()).unwrap();
    let g = knn_graph(&d, 6).unwrap();
    assert!(g.is_connected());
    let e = sym_eigen(&graph_laplacian(&g)).unwrap();
    let choice = eigen_dimension_for_target(&e, &a, 0.2, EigenEnd::Smoothest, 1..=n).unwrap();
    assert!((choice.share - 0.2).abs() < 0.02, "{choice:?}");
    let b = Arc::new(eigen_basis_from(&e, choice.dim, EigenEnd::Smoothest, BasisKind::LaplacianEigen).unwrap());
    let dec = decompose(&a, &b).unwrap();
    assert!((variance(&dec.a_c) / variance(&a) - choice.share).abs() < 1e-10);
    let shares: Vec<f64> = choice.shares.iter().map(|s| s.1).collect();
    assert!(shares.windows(2).all(|w| w[1] >= w[0] - 1e-12));

    let tps = tps_dimension_for_target(&d, &a, 0.2, 4..=20).unwrap();
    assert!(tps.shares.len() == 17 && (4..=20).contains(&tps.dim));
}

#[derive(Debug, Clone)]
enum Kind {
    Tps(usize),
    Laplacian(usize, usize),
    Precision(usize),
    Region(Vec<u8>),
}

fn case() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<f64>, Kind)> {
    (12usize..60).prop_flat_map(|n| {
        let kind = prop_oneof![
            (4usize..=(n / 2)).prop_map(Kind::Tps),
            (1usize..=(n / 2), 3usize..7).prop_map(|(m, k)| Kind::Laplacian(m, k)),
            (1usize..=(n / 2)).prop_map(Kind::Precision),
            prop::collection::vec(0u8..4, n).prop_map(Kind::Region),
        ];
        (
            prop::collection::vec((0.0f64..1.2, 0.0f64..0.9), n),
            prop::collection::vec(-3.0f64..3.0, n),
            kind,
        )
    })
}

fn build(coords: &[(f64, f64)], a: &[f64], kind: &Kind) -> Option<SpatialBasis> {
    let d = SpatialDataset::new(coords.iter().map(|&(x, y)| [x, y]).collect(), a.to_vec()).unwrap();
    let b = match kind {
        Kind::Tps(df) => tps_basis(&d, *df),
        Kind::Laplacian(m, k) => eigen_basis(&graph_laplacian(&knn_graph(&d, *k).unwrap()), *m, EigenEnd::Smoothest),
        Kind::Precision(m) => {
            let e = sym_eigen(&graph_laplacian(&knn_graph(&d, 4).unwrap())).unwrap();
            eigen_basis_from(&e, *m, EigenEnd::Smoothest, BasisKind::PrecisionEigen)
        }
        Kind::Region(r) => {
            let d = d.with_region(r.iter().map(|v| format!("s{v}")).collect()).unwrap();
            region_basis(&d)
        }
    };
    b.ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decomposition_invariants((coords, a, kind) in case()) {
        let Some(b) = build(&coords, &a, &kind) else { return Ok(()) };
        let b = Arc::new(b);
        let dec = decompose(&a, &b).unwrap();
        let amax = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..a.len() {
            prop_assert!((dec.a_c[i] + dec.a_uc[i] - a[i]).abs() < 1e-10 * (1.0 + amax));
        }
        let n = a.len() as f64;
        let ru = norm2(&dec.a_uc);
        for col in b.matrix().columns() {
            prop_assert!(dot(&dec.a_uc, &col).abs() <= 1e-8 * n * norm2(&col) * ru + 1e-300);
        }
        let again = decompose(&dec.a_c, &b).unwrap();
        for (x, y) in again.a_c.iter().zip(&dec.a_c) {
            prop_assert!((x - y).abs() < 1e-10 * (1.0 + amax));
        }
        if b.includes_constant() {
            let sc = variance(&dec.a_c).sqrt();
            let su = variance(&dec.a_uc).sqrt();
            prop_assert!(covariance(&dec.a_c, &dec.a_uc).abs() <= 1e-8 * sc * su + 1e-13 * (1.0 + amax) * su);
            let va = variance(&a);
            prop_assert!((variance(&dec.a_c) + variance(&dec.a_uc) - va).abs() < 1e-8 * va);
        }
    }

    #[test]
    fn eigen_nesting_is_monotone(
        coords in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 15..40),
        seed in any::<u64>(),
    ) {
        let n = coords.len();
        let a: Vec<f64> = (0..n).map(|i| ((seed.wrapping_mul(i as u64 + 1) >> 20) % 1000) as f64 / 100.0).collect();
        let d = SpatialDataset::new(coords.iter().map(|&(x, y)| [x, y]).collect(), a.clone()).unwrap();
        let g = knn_graph(&d, 5).unwrap();
        prop_assume!(g.is_connected());
        let e = sym_eigen(&graph_laplacian(&g)).unwrap();
        let mut prev = f64::INFINITY;
        for m in 1..=n {
            let b = Arc::new(eigen_basis_from(&e, m, EigenEnd::Smoothest, BasisKind::LaplacianEigen).unwrap());
            let v = variance(&decompose(&a, &b).unwrap().a_uc);
            prop_assert!(v <= prev + 1e-10);
            prev = v;
        }
    }
}
