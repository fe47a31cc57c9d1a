#![allow(clippy::excessive_precision)]

use proptest::prelude::*;
use spatial_iv::numkernel::*;

// (x, K0, K1, K2) from a 120-digit power-series evaluation, cross-checked
// against an arbitrary-precision library to 30 digits.
const BESSEL_ORACLE: [(f64, f64, f64, f64); 12] = [
    (0.1, 2.4270690247020166, 9.8538447808706061, 199.50396464211414),
    (0.5, 0.92441907122766586, 1.6564411200033009, 7.5501835512408694),
    (1.0, 0.42102443824070833, 0.60190723019723457, 1.6248388986351775),
    (1.5, 0.21380556264752574, 0.27738780045684382, 0.58365596325665082),
    (2.0, 0.11389387274953344, 0.13986588181652243, 0.25375975456605586),
    (2.5, 0.062347553200366186, 0.073890816347747064, 0.12146020627856384),
    (3.0, 0.034739504386279248, 0.040156431128194184, 0.061510458471742038),
    (5.0, 0.0036910983340425943, 0.0040446134454521642, 0.00530894371222346),
    (7.5, 0.00024917761635611439, 0.00026529739012528953, 0.0003199235870561916),
    (10.0, 1.7780062316167652e-5, 1.8648773453825585e-5, 2.1509817006932769e-5),
    (20.0, 5.7412378153365243e-10, 5.8830579695570382e-10, 6.3295436122922281e-10),
    (40.0, 8.392861100099567e-19, 8.4971319548610387e-19, 8.817717697842619e-19),
];

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// K_ν(x) = ∫₀^∞ exp(−x cosh t) cosh(νt) dt, trapezoid rule. The integrand is
/// analytic and decays double-exponentially, so the trapezoid rule converges
/// geometrically in the step size.
fn bessel_k_integral(nu: u32, x: f64) -> f64 {
    let h = 1e-3f64;
    let mut sum = 0.5 * (-x).exp();
    let mut t = h;
    loop {
        let f = (-x * t.cosh()).exp() * (nu as f64 * t).cosh();
        sum += f;
        if f < 1e-300 || t > 50.0 {
            break;
        }
        t += h;
    }
    sum * h
}

#[test]
fn bessel_matches_frozen_oracle() {
    for &(x, k0, k1, k2) in &BESSEL_ORACLE {
        for (nu, want) in [(0, k0), (1, k1), (2, k2)] {
            let got = bessel_k(nu, x).unwrap();
            assert!(rel(got, want) < 1e-8, "K{nu}({x}) = {got}, want {want}");
        }
    }
}

#[test]
fn bessel_matches_integral_representation() {
    for x in [0.3, 0.9, 1.7, 2.2, 4.0, 12.0] {
        for nu in 0..3 {
            let got = bessel_k(nu, x).unwrap();
            let want = bessel_k_integral(nu, x);
            assert!(rel(got, want) < 1e-9, "K{nu}({x}) = {got}, integral {want}");
        }
    }
}

#[test]
fn bessel_recurrence_identity() {
    for x in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let k0 = bessel_k(0, x).unwrap();
        let k1 = bessel_k(1, x).unwrap();
        let k2 = bessel_k(2, x).unwrap();
        assert!((k2 - k0 - 2.0 / x * k1).abs() < 1e-10 * k2.max(1.0));
    }
}

#[test]
fn bessel_strictly_decreasing() {
    for nu in 0..3 {
        let mut prev = f64::INFINITY;
        for i in 1..=400 {
            let x = i as f64 * 0.05;
            let k = bessel_k(nu, x).unwrap();
            assert!(k < prev, "K{nu} not decreasing at {x}");
            prev = k;
        }
    }
}

fn sym_strategy(max_n: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-1.0f64..1.0, n * n)
            .prop_map(move |v| SymMatrix::new(Matrix::from_row_major(n, n, v).unwrap()).unwrap())
    })
}

fn psd_strategy(max_n: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_n, 1..=max_n).prop_flat_map(|(n, k)| {
        prop::collection::vec(-1.0f64..1.0, n * k).prop_map(move |v| {
            let b = Matrix::from_row_major(n, k, v).unwrap();
            SymMatrix::new(b.matmul(&b.transpose()).unwrap()).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cholesky_reconstructs_psd(m in psd_strategy(50)) {
        let f = cholesky_jittered(&m, &DEFAULT_JITTER_LADDER).unwrap();
        let llt = f.lower.matmul(&f.lower.transpose()).unwrap();
        let n = m.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let shift = if i == j { f.jitter } else { 0.0 };
                worst = worst.max((llt[(i, j)] - m[(i, j)] - shift).abs());
            }
            for j in (i + 1)..n {
                prop_assert_eq!(f.lower[(i, j)], 0.0);
            }
        }
        prop_assert!(worst < 1e-8 * (1.0 + m.max_abs()), "worst {}", worst);
    }

    #[test]
    fn eigen_reconstructs_and_is_orthonormal(m in sym_strategy(40)) {
        let e = sym_eigen(&m).unwrap();
        let n = m.n();
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let v = &e.eigenvectors;
        let vtv = v.transpose().matmul(v).unwrap();
        let orth = vtv.sub(&Matrix::identity(n)).unwrap().max_abs();
        prop_assert!(orth < 1e-8, "orthogonality {}", orth);
        let recon = e.reconstruct().sub(m.matrix()).unwrap().max_abs();
        prop_assert!(recon < 1e-6 * m.max_abs().max(f64::MIN_POSITIVE), "recon {}", recon);
        for j in 0..n {
            let col = e.eigenvector(j);
            let max = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let first = col.iter().find(|x| x.abs() >= max * (1.0 - 1e-9)).unwrap();
            prop_assert!(*first > 0.0);
        }
    }

    #[test]
    fn residuals_orthogonal_to_design(
        (n, p, x, y) in (2usize..60, 1usize..8).prop_flat_map(|(n, p)| (
            Just(n),
            Just(p),
            prop::collection::vec(-3.0f64..3.0, n * p),
            prop::collection::vec(-5.0f64..5.0, n),
        ))
    ) {
        let design = Matrix::from_row_major(n, p, x).unwrap();
        let f = least_squares(&design, &y).unwrap();
        let rnorm = norm2(&f.residuals);
        for j in 0..p {
            let col = design.column(j);
            let lhs = dot(&col, &f.residuals).abs();
            prop_assert!(lhs <= 1e-8 * n as f64 * norm2(&col) * rnorm + 1e-300);
        }
        for i in 0..n {
            prop_assert!((f.fitted[i] + f.residuals[i] - y[i]).abs() < 1e-12 * (1.0 + y[i].abs()));
        }
    }

    #[test]
    fn duplicated_columns_match_pseudo_inverse_oracle(
        (n, x, y) in (4usize..30).prop_flat_map(|n| (
            Just(n),
            prop::collection::vec(-2.0f64..2.0, n * 2),
            prop::collection::vec(-2.0f64..2.0, n),
        ))
    ) {
        // Design [u, v, u]: the oracle solves normal equations on [u, v] and
        // spreads the u-coefficient evenly across both copies, which is the
        // minimum-norm solution.
        let u: Vec<f64> = (0..n).map(|i| x[2 * i]).collect();
        let v: Vec<f64> = (0..n).map(|i| x[2 * i + 1]).collect();
        let (uu, uv, vv) = (dot(&u, &u), dot(&u, &v), dot(&v, &v));
        let (uy, vy) = (dot(&u, &y), dot(&v, &y));
        let det = uu * vv - uv * uv;
        prop_assume!(det > 1e-6 * uu * vv);
        let bu = (vv * uy - uv * vy) / det;
        let bv = (uu * vy - uv * uy) / det;

        let design = Matrix::from_columns(&[u.clone(), v.clone(), u.clone()]).unwrap();
        let f = least_squares(&design, &y).unwrap();
        prop_assert_eq!(f.rank, 2);
        prop_assert!((f.coefficients[0] - bu / 2.0).abs() < 1e-8 * (1.0 + bu.abs()));
        prop_assert!((f.coefficients[2] - bu / 2.0).abs() < 1e-8 * (1.0 + bu.abs()));
        prop_assert!((f.coefficients[1] - bv).abs() < 1e-8 * (1.0 + bv.abs()));
        for i in 0..n {
            let want = bu * u[i] + bv * v[i];
            prop_assert!((f.fitted[i] - want).abs() < 1e-8 * (1.0 + want.abs()));
        }
    }
}
