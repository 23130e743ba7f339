//! Adaptive Gauss–Kronrod (7/15) integration.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 40;

/// One 15-point Kronrod estimate and its difference from the embedded
/// 7-point Gauss rule.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
    let (value, err) = whole;
    if err <= tol || depth >= MAX_DEPTH || (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
        return value;
    }
    let mid = 0.5 * (a + b);
    let left = gk15(f, a, mid);
    let right = gk15(f, mid, b);
    adapt(f, a, mid, left, tol * 0.5, depth + 1) + adapt(f, mid, b, right, tol * 0.5, depth + 1)
}

/// Integrates `f` over `[a, b]` to roughly `tol` absolute error.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let whole = gk15(&f, a, b);
    adapt(&f, a, b, whole, tol, 0)
}

/// Integrates over `pieces` equal sub-intervals, each adaptively.
pub(crate) fn integrate_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let width = (b - a) / pieces as f64;
    let piece_tol = tol / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == pieces { b } else { lo + width };
            integrate(&f, lo, hi, piece_tol)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        // A 15-point Kronrod rule integrates degree <= 22 polynomials exactly.
        let v = integrate(|x| x.powi(10) - 3.0 * x * x + 1.0, -1.0, 2.0, 1e-13);
        let exact = (2f64.powi(11) + 1.0) / 11.0 - (8.0 + 1.0) + 3.0;
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
    }

    #[test]
    fn gaussian_mass() {
        let v = integrate_split(
            |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -10.0,
            10.0,
            8,
            1e-13,
        );
        assert!((v - 1.0).abs() < 1e-12);
        let w = integrate(|x| x.sqrt(), 0.0, 1.0, 1e-12);
        assert!((w - 2.0 / 3.0).abs() < 1e-10);
    }
}
