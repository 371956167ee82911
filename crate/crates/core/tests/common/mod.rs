#![allow(dead_code)]

use fbaqc::hamiltonians::{sample_problem, BiasSpec, HamiltonianPair, ProblemSpec};

pub fn two_level(eps: f64, z: f64) -> HamiltonianPair {
    HamiltonianPair::with_bias(&ProblemSpec::explicit(1, vec![eps]).unwrap(), BiasSpec { n: 1, z }).unwrap()
}

pub fn random_pair(n: usize, seed: u64) -> HamiltonianPair {
    HamiltonianPair::from_problem(&sample_problem(n, seed).unwrap()).unwrap()
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_KRONROD: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const GK_GAUSS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_KRONROD[7] * fc;
    let mut gauss = GK_GAUSS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        kronrod += GK_KRONROD[i] * s;
        if i % 2 == 1 {
            gauss += GK_GAUSS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature to relative tolerance `rtol`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rtol: f64) -> f64 {
    let mut pieces = vec![(a, b, gk15(&mut f, a, b))];
    loop {
        let total: f64 = pieces.iter().map(|p| p.2 .0).sum();
        let err: f64 = pieces.iter().map(|p| p.2 .1).sum();
        if err <= rtol * total.abs() || pieces.len() > 20_000 {
            return total;
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        pieces.push((lo, mid, gk15(&mut f, lo, mid)));
        pieces.push((mid, hi, gk15(&mut f, mid, hi)));
    }
}
