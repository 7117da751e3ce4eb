use dslt_core::fbm::{
    derive_seed, fbm_covariance, fgn_autocovariance, read_path, write_path, FbmGenerator, HurstModel,
    SynthesisMethod, TimeGrid,
};

fn model(h: f64, d: usize) -> HurstModel {
    HurstModel::first_order(h, d, 1.0).unwrap()
}

/// Empirical covariance of `(B(t_i), B(t_j))` pooled over paths and
/// components, with its standard error.
fn empirical_cov(gen: &FbmGenerator, i: usize, j: usize, n_paths: u64, seed: u64) -> (f64, f64) {
    let mut prods = Vec::new();
    for k in 0..n_paths {
        let p = gen.generate(derive_seed(seed, k));
        for c in 0..p.dim() {
            let b = p.component(c);
            prods.push(b[i] * b[j]);
        }
    }
    let n = prods.len() as f64;
    let mean = prods.iter().sum::<f64>() / n;
    let var = prods.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn covariance_matches_the_model_for_both_backends() {
    for &h in &[0.2, 1.0 / 3.0, 0.75] {
        let m = model(h, 2);
        let grid = TimeGrid::new(64, 1.0).unwrap();
        for method in [SynthesisMethod::CirculantEmbedding, SynthesisMethod::Cholesky] {
            let gen = FbmGenerator::with_method(&m, &grid, method).unwrap();
            for &(i, j) in &[(16, 16), (16, 48), (32, 64), (63, 64)] {
                let (c, se) = empirical_cov(&gen, i, j, 3000, 21);
                let exact = fbm_covariance(grid.node(i), grid.node(j), h).unwrap();
                assert!(
                    (c - exact).abs() < 4.0 * se,
                    "H={h} {method:?} ({i},{j}): {c} vs {exact} (se {se})"
                );
            }
        }
    }
}

#[test]
fn increments_have_the_noise_autocovariance() {
    let h = 0.3;
    let grid = TimeGrid::new(256, 2.0).unwrap();
    let gen = FbmGenerator::new(&model(h, 1), &grid).unwrap();
    let step = grid.step();
    for lag in [0usize, 1, 5] {
        let mut prods = Vec::new();
        for k in 0..400 {
            let b = gen.generate(derive_seed(3, k)).component(0).to_vec();
            let inc: Vec<f64> = b.windows(2).map(|w| w[1] - w[0]).collect();
            prods.extend((0..inc.len() - lag).step_by(8).map(|i| inc[i] * inc[i + lag]));
        }
        let n = prods.len() as f64;
        let mean = prods.iter().sum::<f64>() / n;
        let sd = (prods.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        let exact = fgn_autocovariance(lag, h, step);
        // neighbouring products are correlated; allow a generous band
        assert!((mean - exact).abs() < 6.0 * sd / n.sqrt(), "lag {lag}: {mean} vs {exact}");
    }
}

#[test]
fn paths_start_at_zero_and_are_seed_determined() {
    let m = model(0.4, 3);
    let grid = TimeGrid::new(100, 1.5).unwrap();
    let gen = FbmGenerator::new(&m, &grid).unwrap();
    let a = gen.generate(17);
    let b = gen.generate(17);
    let c = gen.generate(18);
    assert_eq!(a.components(), b.components());
    assert_ne!(a.components(), c.components());
    for comp in a.components() {
        assert_eq!(comp.len(), 101);
        assert_eq!(comp[0], 0.0);
    }
    // components are driven by distinct streams
    assert_ne!(a.component(0), a.component(1));
}

#[test]
fn path_files_round_trip() {
    let m = model(0.25, 2);
    let grid = TimeGrid::new(33, 1.0).unwrap();
    let p = FbmGenerator::new(&m, &grid).unwrap().generate(5);
    let mut buf = Vec::new();
    write_path(&p, &mut buf).unwrap();
    let q = read_path(buf.as_slice()).unwrap();
    assert_eq!(p, q);
    buf.truncate(buf.len() - 3);
    assert!(read_path(buf.as_slice()).is_err());
}
