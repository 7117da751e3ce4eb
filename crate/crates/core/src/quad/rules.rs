//! Embedded rule pairs on a single cell: Gauss–Kronrod 7/15 in one dimension,
//! Genz–Malik degree 7/5 in two and three.

/// Kronrod abscissae on `[0, 1)`, descending; odd indices are the Gauss nodes.
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
/// Gauss weights for `XGK[1], XGK[3], XGK[5], 0`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

pub(crate) struct CellEstimate {
    pub value: f64,
    pub error: f64,
    /// Axis along which the cell should be bisected.
    pub split_axis: usize,
    pub evaluations: usize,
}

/// Gauss–Kronrod 7/15 on `[center − half, center + half]`.
pub(crate) fn gauss_kronrod<F: FnMut(&[f64]) -> f64 + ?Sized>(f: &mut F, center: f64, half: f64) -> CellEstimate {
    let fc = f(&[center]);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(&[center - dx]) + f(&[center + dx]);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    CellEstimate {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
        split_axis: 0,
        evaluations: 15,
    }
}

const GM_L2: f64 = 0.358_568_582_800_318_1; // sqrt(9/70)
const GM_L3: f64 = 0.948_683_298_050_513_8; // sqrt(9/10)
const GM_L5: f64 = 0.688_247_201_611_685_3; // sqrt(9/19)

/// Genz–Malik degree-7 rule with embedded degree-5 error estimate on the box
/// `center ± half` in `n ∈ {2, 3}` dimensions.
pub(crate) fn genz_malik<F: FnMut(&[f64]) -> f64 + ?Sized>(f: &mut F, center: &[f64], half: &[f64]) -> CellEstimate {
    let n = center.len();
    let nf = n as f64;
    let mut x = center.to_vec();
    let mut evaluations = 0;

    let f1 = f(&x);
    evaluations += 1;

    let (mut f2, mut f3) = (0.0, 0.0);
    let mut best_axis = 0;
    let mut best_diff = -1.0;
    for i in 0..n {
        x[i] = center[i] - GM_L2 * half[i];
        let a = f(&x);
        x[i] = center[i] + GM_L2 * half[i];
        let b = f(&x);
        x[i] = center[i] - GM_L3 * half[i];
        let c = f(&x);
        x[i] = center[i] + GM_L3 * half[i];
        let d = f(&x);
        x[i] = center[i];
        evaluations += 4;
        f2 += a + b;
        f3 += c + d;
        let ratio = (GM_L2 / GM_L3) * (GM_L2 / GM_L3);
        let diff = (a + b - 2.0 * f1 - ratio * (c + d - 2.0 * f1)).abs();
        if diff > best_diff {
            best_diff = diff;
            best_axis = i;
        }
    }

    let mut f4 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            for (si, sj) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                x[i] = center[i] + si * GM_L3 * half[i];
                x[j] = center[j] + sj * GM_L3 * half[j];
                f4 += f(&x);
                evaluations += 1;
            }
            x[i] = center[i];
            x[j] = center[j];
        }
    }

    let mut f5 = 0.0;
    for mask in 0..(1usize << n) {
        for i in 0..n {
            let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            x[i] = center[i] + s * GM_L5 * half[i];
        }
        f5 += f(&x);
        evaluations += 1;
    }

    let w1 = (12824.0 - 9120.0 * nf + 400.0 * nf * nf) / 19683.0;
    let w2 = 980.0 / 6561.0;
    let w3 = (1820.0 - 400.0 * nf) / 19683.0;
    let w4 = 200.0 / 19683.0;
    let w5 = 6859.0 / 19683.0 / (1u32 << n) as f64;
    let v1 = (729.0 - 950.0 * nf + 50.0 * nf * nf) / 729.0;
    let v2 = 245.0 / 486.0;
    let v3 = (265.0 - 100.0 * nf) / 1458.0;
    let v4 = 25.0 / 729.0;

    let volume: f64 = half.iter().map(|h| 2.0 * h).product();
    let deg7 = w1 * f1 + w2 * f2 + w3 * f3 + w4 * f4 + w5 * f5;
    let deg5 = v1 * f1 + v2 * f2 + v3 * f3 + v4 * f4;
    CellEstimate {
        value: volume * deg7,
        error: volume * (deg7 - deg5).abs(),
        split_axis: best_axis,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_degree_22() {
        let mut f = |x: &[f64]| x[0].powi(22) - 3.0 * x[0].powi(7);
        let e = gauss_kronrod(&mut f, 0.5, 0.5);
        assert!((e.value - 1.0 / 23.0 + 3.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn genz_malik_is_exact_for_degree_7() {
        for n in [2, 3] {
            let mut f = |x: &[f64]| {
                let mut v = x[0].powi(7) + x[0].powi(3) * x[1].powi(4) + 1.0;
                if x.len() == 3 {
                    v += x[0] * x[1] * x[2].powi(5);
                }
                v
            };
            let center = vec![0.5; n];
            let half = vec![0.5; n];
            let e = genz_malik(&mut f, &center, &half);
            let mut exact = 1.0 / 8.0 + 1.0 / 20.0 + 1.0;
            if n == 3 {
                exact += 1.0 / 24.0;
            }
            assert!((e.value - exact).abs() < 1e-14, "n={n}: {} vs {exact}", e.value);
            assert_eq!(e.evaluations, 1 + 4 * n + 2 * n * (n - 1) + (1 << n));
        }
    }
}
