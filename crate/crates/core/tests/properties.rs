mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use starcop::*;

fn shuffle_from(seed: u64, bits: u32) -> IntervalExchange {
    common::random_shuffle(&mut ChaCha8Rng::seed_from_u64(seed), 8, bits)
}

fn corpus_item(k: usize) -> CopulaDescriptor {
    let all = common::corpus();
    all[k % all.len()].1.clone()
}

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn frechet_bounds(k in 0usize..64, x in unit(), y in unit()) {
        let c = corpus_item(k).eval_cdf(x, y).unwrap();
        prop_assert!(c >= (x + y - 1.0).max(0.0) - 1e-12);
        prop_assert!(c <= x.min(y) + 1e-12);
    }

    #[test]
    fn lipschitz(k in 0usize..64, x1 in unit(), y1 in unit(), x2 in unit(), y2 in unit()) {
        let d = corpus_item(k);
        let gap = (d.eval_cdf(x1, y1).unwrap() - d.eval_cdf(x2, y2).unwrap()).abs();
        prop_assert!(gap <= (x1 - x2).abs() + (y1 - y2).abs() + 1e-12);
    }

    #[test]
    fn two_increasing(k in 0usize..64, a in unit(), b in unit(), c in unit(), e in unit()) {
        let d = corpus_item(k);
        let (x1, x2) = (a.min(b), a.max(b));
        let (y1, y2) = (c.min(e), c.max(e));
        let f = |x, y| d.eval_cdf(x, y).unwrap();
        prop_assert!(f(x2, y2) - f(x1, y2) - f(x2, y1) + f(x1, y1) >= -1e-12);
    }

    #[test]
    fn grids_are_doubly_stochastic(k in 0usize..64) {
        let g = corpus_item(k).to_grid(32).unwrap();
        prop_assert!(g.stochastic_violation().is_none());
    }

    #[test]
    fn shuffle_star_matches_grid(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (f, g) = (shuffle_from(s1, 5), shuffle_from(s2, 5));
        let (a, b) = (CopulaDescriptor::Shuffle(f), CopulaDescriptor::Shuffle(g));
        let r = star(&a, &b, 32).unwrap();
        prop_assert_eq!(r.exactness, Exactness::Exact);
        prop_assert!(r.copula.as_exchange().is_some());
        let oracle = a.to_grid(32).unwrap().star(&b.to_grid(32).unwrap()).unwrap();
        prop_assert!(r.copula.to_grid(32).unwrap().max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn shuffle_star_is_associative(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let (f, g, h) = (shuffle_from(s1, 12), shuffle_from(s2, 12), shuffle_from(s3, 12));
        let left = f.then(&g).then(&h);
        let right = f.then(&g.then(&h));
        prop_assert!(shuffle_dist_sq(&left, &right) < 1e-12);
    }

    #[test]
    fn sorting_shuffle_is_measure_preserving(cuts in proptest::collection::vec(0u32..64, 0..10)) {
        let mut cuts = cuts;
        cuts.sort_unstable();
        cuts.dedup();
        let parts: Vec<(f64, f64)> = cuts.chunks(2).filter(|p| p.len() == 2).map(|p| (p[0] as f64 / 64.0, p[1] as f64 / 64.0)).collect();
        let a = IntervalUnion::new(parts).unwrap();
        let s = sorting_shuffle(&a);
        let total: f64 = s.pieces().iter().map(|p| p.len()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for &(lo, hi) in a.intervals() {
            if hi > lo {
                prop_assert!(s.eval(0.5 * (lo + hi)) < a.measure());
            }
        }
    }

    #[test]
    fn serialization_round_trip(seed in any::<u64>(), k in 0usize..64) {
        for d in [CopulaDescriptor::Shuffle(shuffle_from(seed, 20)), corpus_item(k)] {
            let back = parse_descriptor(&descriptor_to_json(&d)).unwrap();
            prop_assert_eq!(back, d);
        }
    }

    #[test]
    fn distance_to_independence(k in 0usize..64) {
        let g = corpus_item(k).to_grid(32).unwrap();
        let dist = g.dist_sq(&GridCopula::independence(32)).unwrap();
        prop_assert!((dist - (g.norm_sq() - 2.0 / 3.0)).abs() < 1e-12, "{} vs {}", dist, g.norm_sq() - 2.0 / 3.0);
    }

    #[test]
    fn convex_distance_scales(s1 in any::<u64>(), s2 in any::<u64>(), alpha in 0.0..=1.0f64) {
        let (a, b) = (CopulaDescriptor::Shuffle(shuffle_from(s1, 10)), CopulaDescriptor::Shuffle(shuffle_from(s2, 10)));
        let mix = CopulaDescriptor::convex(alpha, a.clone(), b.clone()).unwrap();
        let lhs = sobolev_dist_sq(&mix, &b, 64).unwrap().dist_sq;
        let rhs = alpha * alpha * sobolev_dist_sq(&a, &b, 64).unwrap().dist_sq;
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn push_forward_matches_grid(seed in any::<u64>(), theta in -1.0..=1.0f64, left in any::<bool>()) {
        let t = shuffle_from(seed, 5);
        let d = CopulaDescriptor::Grid(CopulaDescriptor::fgm(theta).unwrap().to_grid(32).unwrap());
        let side = if left { Side::Left } else { Side::Right };
        let got = shuffle_of(&d, &t, side, 32).unwrap().copula.to_grid(32).unwrap();
        let s = CopulaDescriptor::Shuffle(t).to_grid(32).unwrap();
        let g = d.to_grid(32).unwrap();
        let oracle = if left { s.star(&g).unwrap() } else { g.star(&s).unwrap() };
        prop_assert!(got.max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn shuffle_partials_are_indicators(seed in any::<u64>(), x in unit(), y in unit()) {
        let d = CopulaDescriptor::Shuffle(shuffle_from(seed, 20));
        for p in [d.partial1(x, y).unwrap(), d.partial2(x, y).unwrap()] {
            prop_assert!(p.value == 0.0 || p.value == 1.0);
        }
    }

    #[test]
    fn pseudo_observations_inside(rows in proptest::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..60)) {
        let p = pseudo_observations(&SamplePairs::new(rows).unwrap()).unwrap();
        for (u, v) in p.points {
            prop_assert!(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0);
        }
    }
}

#[test]
fn fgm_resolution_consistency() {
    for theta in [-1.0, 0.3, 1.0] {
        let c = CopulaDescriptor::fgm(theta).unwrap();
        let coarse = sobolev_norm_sq(&c, 128).unwrap().norm_sq;
        let fine = sobolev_norm_sq(&c, 256).unwrap().norm_sq;
        assert!((coarse - fine).abs() <= 5e-4);
    }
}

#[test]
fn selfsimilar_cauchy_bound() {
    let s: Vec<_> = (0..=10).map(|k| CopulaDescriptor::Shuffle(selfsimilar(k).unwrap())).collect();
    let r2 = 2f64.sqrt();
    for m in 0..10 {
        for n in m + 1..=10 {
            let d = sobolev_dist_sq(&s[n], &s[m], 64).unwrap().dist_sq.sqrt();
            let bound = (r2.powi(-(m as i32) - 1) - r2.powi(-(n as i32) - 1)) / (2.0 - r2);
            assert!(d <= bound + 1e-12, "m={m} n={n}: {d} > {bound}");
        }
    }
}
