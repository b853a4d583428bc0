#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use starcop::{selfsimilar, CopulaDescriptor, ExchangePiece, IntervalExchange, PiecewiseAffineMap, Slope};

pub fn corpus() -> Vec<(&'static str, CopulaDescriptor)> {
    let half = CopulaDescriptor::Shuffle(IntervalExchange::half_swap());
    let quarter = CopulaDescriptor::Shuffle(IntervalExchange::cyclic_shift(0.75).unwrap());
    vec![
        ("Pi", CopulaDescriptor::pi()),
        ("M", CopulaDescriptor::m()),
        ("W", CopulaDescriptor::w()),
        ("FGM(1)", CopulaDescriptor::fgm(1.0).unwrap()),
        ("FGM(-0.5)", CopulaDescriptor::fgm(-0.5).unwrap()),
        ("FGM(0.1)", CopulaDescriptor::fgm(0.1).unwrap()),
        ("half-swap", half.clone()),
        ("quarter-cycle", quarter.clone()),
        ("selfsimilar(4)", CopulaDescriptor::Shuffle(selfsimilar(4).unwrap())),
        ("doubling", CopulaDescriptor::doubling()),
        ("doubling^T", CopulaDescriptor::doubling().transpose()),
        ("tent", CopulaDescriptor::Map(PiecewiseAffineMap::tent())),
        ("0.3 half-swap + 0.7 Pi", CopulaDescriptor::convex(0.3, half, CopulaDescriptor::pi()).unwrap()),
        ("0.5 M + 0.5 W", CopulaDescriptor::convex(0.5, CopulaDescriptor::m(), CopulaDescriptor::w()).unwrap()),
        (
            "ordinal(FGM(0.5), W)",
            CopulaDescriptor::ordinal_sum(
                vec![0.0, 0.4, 1.0],
                vec![CopulaDescriptor::fgm(0.5).unwrap(), CopulaDescriptor::w()],
            )
            .unwrap(),
        ),
        ("grid FGM(0.7)", CopulaDescriptor::Grid(CopulaDescriptor::fgm(0.7).unwrap().to_grid(32).unwrap())),
        ("grid quarter-cycle", CopulaDescriptor::Grid(quarter.to_grid(32).unwrap())),
    ]
}

/// Random exchange with breakpoints on multiples of `2^-bits`.
pub fn random_shuffle<R: Rng>(rng: &mut R, max_pieces: usize, bits: u32) -> IntervalExchange {
    let scale = (1u64 << bits) as f64;
    let k = rng.gen_range(1..=max_pieces);
    let mut cuts: Vec<u64> = (0..k - 1).map(|_| rng.gen_range(1..(1u64 << bits))).collect();
    cuts.push(0);
    cuts.push(1 << bits);
    cuts.sort_unstable();
    cuts.dedup();
    let lens: Vec<u64> = cuts.windows(2).map(|w| w[1] - w[0]).collect();
    let mut order: Vec<usize> = (0..lens.len()).collect();
    order.shuffle(rng);
    let mut target = vec![0u64; lens.len()];
    let mut acc = 0;
    for &i in &order {
        target[i] = acc;
        acc += lens[i];
    }
    let pieces = (0..lens.len())
        .map(|i| ExchangePiece {
            start: cuts[i] as f64 / scale,
            end: cuts[i + 1] as f64 / scale,
            target: target[i] as f64 / scale,
            slope: if rng.gen_bool(0.5) { Slope::Up } else { Slope::Down },
        })
        .collect();
    IntervalExchange::new(pieces).unwrap()
}
