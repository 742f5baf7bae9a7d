//! Reference integrators used only by the tests. Deliberately a different
//! method from the library's tanh-sinh engine.

#![allow(dead_code, clippy::excessive_precision)]

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (K15 estimate, |K15 − G7|).
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod on `[a, b]`, splitting the worst panel
/// until the summed error estimate is below `tol`.
pub fn gauss_kronrod(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    gauss_kronrod_breaks(&mut f, &[a, b], tol)
}

/// As [`gauss_kronrod`] with the initial panels split at `breaks` (sorted).
pub fn gauss_kronrod_breaks(f: &mut impl FnMut(f64) -> f64, breaks: &[f64], tol: f64) -> f64 {
    let mut panels: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    for _ in 0..200_000 {
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err < tol {
            break;
        }
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (a, b, _, _) = panels.swap_remove(i);
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(f, a, m);
        let (v2, e2) = gk15(f, m, b);
        panels.push((a, m, v1, e1));
        panels.push((m, b, v2, e2));
    }
    panels.iter().map(|p| p.2).sum()
}

/// Richardson extrapolation to ε → 0 of values at ε, ε/2, ε/4 assuming an
/// expansion in integer powers of ε.
pub fn richardson3(f1: f64, f2: f64, f4: f64) -> f64 {
    let r1 = 2.0 * f2 - f1;
    let r2 = 2.0 * f4 - f2;
    (4.0 * r2 - r1) / 3.0
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
