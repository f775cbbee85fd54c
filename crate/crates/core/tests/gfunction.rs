use cotlab::gfunction::*;
use cotlab::numthy::gcd;
use cotlab::Error;
use proptest::prelude::*;

fn direct_g(alpha: f64, cap: u64) -> f64 {
    (1..=cap)
        .map(|s| {
            let x = s as f64 * alpha;
            (1.0 - 2.0 * (x - x.floor())) / s as f64
        })
        .sum()
}

fn totient(n: u64) -> u64 {
    (1..=n).filter(|&k| gcd(k, n) == 1).count() as u64
}

#[test]
fn g_trunc_examples() {
    assert!((g_trunc(0.5, 4) - 0.75).abs() < 1e-15);
    assert!((g_trunc(1.0 / 3.0, 2) - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn piecewise_small_caps() {
    let g1 = build_piecewise(1).unwrap();
    assert_eq!(g1.breakpoints(), &[(0, 1), (1, 1)]);
    let seg: Vec<Segment> = g1.segments().collect();
    assert_eq!(seg.len(), 1);
    assert!((seg[0].intercept - 1.0).abs() < 1e-15 && seg[0].slope == -2.0);

    let g2 = build_piecewise(2).unwrap();
    assert_eq!(g2.breakpoints(), &[(0, 1), (1, 2), (1, 1)]);
    let seg: Vec<Segment> = g2.segments().collect();
    assert!((seg[0].eval(0.25) - (1.5 - 4.0 * 0.25)).abs() < 1e-15);
    assert!((seg[1].eval(0.75) - (2.5 - 4.0 * 0.75)).abs() < 1e-15);
}

#[test]
fn breakpoint_count_is_farey_length() {
    for cap in [1u64, 2, 5, 16, 64, 200] {
        let g = build_piecewise(cap).unwrap();
        let want = 1 + (1..=cap).map(totient).sum::<u64>();
        assert_eq!(g.breakpoints().len() as u64, want, "cap={cap}");
        assert!(g.segments().all(|s| s.slope == -2.0 * cap as f64));
    }
    assert!(matches!(
        build_piecewise(4097),
        Err(Error::CapTooLarge { .. })
    ));
}

#[test]
fn piecewise_matches_direct_at_random_points() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for cap in [3u64, 32, 256] {
        let g = build_piecewise(cap).unwrap();
        for _ in 0..1000 {
            let a: f64 = rng.gen_range(1e-9..1.0 - 1e-9);
            assert!(
                (g.eval(a) - direct_g(a, cap)).abs() < 1e-12,
                "cap={cap} a={a}"
            );
        }
        for s in g.segments() {
            let (k0, l0) = s.left;
            let (k1, l1) = s.right;
            let mid = 0.5 * (k0 as f64 / l0 as f64 + k1 as f64 / l1 as f64);
            assert!((s.eval(mid) - direct_g(mid, cap)).abs() < 1e-12);
        }
    }
}

#[test]
fn moments_examples() {
    assert!(moment_exact(16, 1).unwrap().abs() < 1e-12);
    assert!((moment_exact(2, 2).unwrap() - 7.0 / 12.0).abs() < 1e-14);
    assert!((second_moment_gcd_oracle(1) - 1.0 / 3.0).abs() < 1e-15);
    assert!((second_moment_gcd_oracle(2) - 7.0 / 12.0).abs() < 1e-15);
    assert!(moment_exact(4, 17).is_err());
}

#[test]
fn second_moment_matches_gcd_oracle() {
    for cap in 1..=256u64 {
        let exact = moment_exact(cap, 2).unwrap();
        assert!(
            (exact - second_moment_gcd_oracle(cap)).abs() < 1e-10,
            "cap={cap}"
        );
    }
    let gaps: Vec<f64> = [16u64, 64, 256]
        .iter()
        .map(|&c| SECOND_MOMENT_LIMIT - moment_exact(c, 2).unwrap())
        .collect();
    assert!(
        gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] > 0.0,
        "{gaps:?}"
    );
}

#[test]
fn odd_moments_vanish() {
    for cap in [1u64, 7, 64, 4096] {
        assert!(moment_exact(cap, 1).unwrap().abs() < 1e-12);
    }
    for cap in [3u64, 17, 128] {
        for k in [3u32, 5, 7] {
            assert!(
                moment_exact(cap, k).unwrap().abs() < 1e-10,
                "cap={cap} k={k}"
            );
        }
    }
}

#[test]
fn exact_moments_agree_with_monte_carlo() {
    for cap in [4u64, 64] {
        for k in 2..=6u32 {
            let exact = moment_exact(cap, k).unwrap();
            let (mean, se) = moment_mc(cap, k, 200_000, 17 + k as u64);
            assert!(
                (mean - exact).abs() <= 3.0 * se,
                "cap={cap} k={k}: {mean} ± {se} vs {exact}"
            );
        }
    }
}

#[test]
fn mu_integral_examples() {
    let n = 100_000;
    assert_eq!(mu_integral(|_| 1.0, 64, n).value, 1.0);
    let id = mu_integral(|x| x, 64, n);
    assert!(id.value.abs() <= 3.0 / (n as f64).sqrt());
    assert_eq!((id.cap, id.n), (64, n));
    let sq = mu_integral(|x| x * x, 2, n);
    assert!((sq.value - 7.0 / 12.0).abs() < 1e-3);
}

#[test]
fn ks_examples() {
    let e = |v: &[f64]| EmpiricalCdf::new(v.to_vec()).unwrap();
    assert_eq!(ks_distance(&e(&[0.3, 0.1]), &e(&[0.1, 0.3])), 0.0);
    assert_eq!(ks_distance(&e(&[0.0, 1.0]), &e(&[2.0, 3.0])), 1.0);
    assert_eq!(ks_distance(&e(&[0.0, 1.0]), &e(&[0.0, 0.0, 1.0, 1.0])), 0.0);
    assert!(matches!(EmpiricalCdf::new(vec![]), Err(Error::EmptySample)));
}

proptest! {
    #[test]
    fn g_is_antisymmetric(a in 0.001f64..0.999, cap in 1u64..200) {
        prop_assume!((1..=cap).all(|l| {
            let x = l as f64 * a;
            (x - x.round()).abs() > 1e-9
        }));
        prop_assert!((g_trunc(a, cap) + g_trunc(1.0 - a, cap)).abs() < 1e-9);
    }

    #[test]
    fn cdf_is_monotone(v in prop::collection::vec(-10.0f64..10.0, 1..50), z1 in -12.0f64..12.0, z2 in -12.0f64..12.0) {
        let e = EmpiricalCdf::new(v).unwrap();
        let (lo, hi) = if z1 <= z2 { (z1, z2) } else { (z2, z1) };
        prop_assert!(e.eval(lo) <= e.eval(hi));
        prop_assert!((0.0..=1.0).contains(&e.eval(lo)));
    }

    #[test]
    fn ks_is_a_bounded_symmetric_distance(
        a in prop::collection::vec(-5.0f64..5.0, 1..40),
        b in prop::collection::vec(-5.0f64..5.0, 1..40),
    ) {
        let (ea, eb) = (EmpiricalCdf::new(a).unwrap(), EmpiricalCdf::new(b).unwrap());
        let d = ks_distance(&ea, &eb);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_distance(&eb, &ea));
        prop_assert_eq!(ks_distance(&ea, &ea), 0.0);
    }
}
