use nalgebra::{DMatrix, DVector};
use newton_incl::minstep::{min_norm_step, LinearInclusionSubproblem, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL};
use newton_incl::ProductCone;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
struct Case {
    j: DMatrix<f64>,
    f: Vec<f64>,
    cone: ProductCone,
}

/// Random subproblem with a known feasible point `z0`.
fn case() -> impl Strategy<Value = Case> {
    (1usize..=3, 0usize..=2, 0usize..=1, any::<u64>())
        .prop_filter("nonempty cone", |(_, p, q, _)| p + q >= 1)
        .prop_map(|(n, p, q, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = p + q;
            let j = DMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0));
            let z0 = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let jz = &j * &z0;
            let f = (0..m)
                .map(|i| {
                    let slack = if i < p { rng.random_range(0.0..1.0) } else { 0.0 };
                    -jz[i] - slack
                })
                .collect();
            Case {
                j,
                f,
                cone: ProductCone::new(p, q).unwrap(),
            }
        })
}

fn sub(c: &Case) -> LinearInclusionSubproblem {
    LinearInclusionSubproblem::new(c.j.clone(), c.f.clone(), c.cone).unwrap()
}

fn solve(c: &Case) -> Vec<f64> {
    min_norm_step(&sub(c), DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL).unwrap().d
}

/// Points of the feasible polyhedron near `d`: random box samples projected onto the
/// equality set, kept when they satisfy the inequalities.
fn feasible_samples(c: &Case, d: &[f64], count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p, q, n) = (c.cone.p(), c.cone.q(), c.j.ncols());
    let je = c.j.rows(p, q).into_owned();
    let pinv = if q > 0 {
        je.clone().pseudo_inverse(1e-12).unwrap()
    } else {
        DMatrix::zeros(n, 0)
    };
    let fe = DVector::from_column_slice(&c.f[p..]);
    let center = DVector::from_column_slice(d);
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < count && tries < 50 * count {
        tries += 1;
        let scale = [0.01, 0.3, 3.0][tries % 3];
        let mut z = &center + DVector::from_fn(n, |_, _| rng.random_range(-scale..scale));
        if q > 0 {
            z -= &pinv * (&je * &z + &fe);
        }
        let lin = &c.j * &z;
        let ok = (0..p).all(|i| lin[i] + c.f[i] <= 0.0)
            && (p..p + q).all(|i| (lin[i] + c.f[i]).abs() <= 1e-9);
        if ok {
            out.push(z);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kkt_and_variational_inequality(c in case()) {
        let s = sub(&c);
        let step = min_norm_step(&s, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL).unwrap();
        let kkt = step.kkt_residuals(&s);
        prop_assert!(kkt.max() <= 1e-9, "{kkt:?}");
        let d = DVector::from_column_slice(&step.d);
        for z in feasible_samples(&c, &step.d, 300, 1) {
            prop_assert!(step.norm_d <= z.norm() + 1e-9);
            prop_assert!((&z - &d).dot(&d) >= -1e-8);
        }
    }

    #[test]
    fn step_is_the_multiplier_combination(c in case()) {
        let s = sub(&c);
        let step = min_norm_step(&s, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL).unwrap();
        let p = c.cone.p();
        let y = DVector::from_column_slice(&step.multipliers);
        let recon = -(c.j.transpose() * y);
        for (a, b) in recon.iter().zip(&step.d) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        for i in 0..p {
            if !step.active_set.contains(&i) {
                prop_assert!(step.multipliers[i].abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn positive_row_scaling_leaves_step_unchanged(c in case(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = c.f.len();
        let s: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..10.0)).collect();
        let scaled = Case {
            j: DMatrix::from_fn(m, c.j.ncols(), |i, k| s[i] * c.j[(i, k)]),
            f: c.f.iter().zip(&s).map(|(a, b)| a * b).collect(),
            cone: c.cone,
        };
        for (a, b) in solve(&c).iter().zip(solve(&scaled)) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn positively_homogeneous_in_f(c in case(), alpha in 0.1f64..10.0) {
        let scaled = Case { f: c.f.iter().map(|v| alpha * v).collect(), ..c.clone() };
        for (a, b) in solve(&c).iter().zip(solve(&scaled)) {
            prop_assert!((alpha * a - b).abs() <= 1e-9 * alpha.max(1.0));
        }
    }
}

#[test]
fn infeasible_random_systems_certify() {
    // x <= -1 - r and -x <= -1 - r for random directions make an empty set
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n = rng.random_range(1..=3);
        let a = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let mut j = DMatrix::zeros(2, n);
        j.set_row(0, &a.transpose());
        j.set_row(1, &(-a.transpose()));
        let f = vec![rng.random_range(0.1..1.0), rng.random_range(0.1..1.0)];
        let s = LinearInclusionSubproblem::new(j, f, ProductCone::new(2, 0).unwrap()).unwrap();
        match min_norm_step(&s, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL) {
            Err(newton_incl::Error::Infeasible(cert)) => {
                assert!(cert.gap > 0.0);
                assert!(cert.stationarity <= 1e-12);
                assert!(cert.multipliers.iter().all(|&l| l >= 0.0));
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }
}
