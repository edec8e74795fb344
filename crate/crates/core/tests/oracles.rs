//! Library output against the slow reference implementations in `common`.

mod common;

use common::*;
use rand::Rng;
use rankql::{
    center_kernel, central_moments, correlate, embed, fit_2sls, fit_ql, fit_weighted, hessian_and_info, score_matrix,
    DesignEmbedding, TiePolicy,
};

#[test]
fn embedding_matches_dense_definition() {
    let mut rng = rng(1);
    for case in 0..400 {
        let n = rng.random_range(2..=35);
        let x = if case % 2 == 0 { normals(&mut rng, n) } else { tied(&mut rng, n, 4) };
        for (policy, paper) in [(TiePolicy::KemenyZero, false), (TiePolicy::PaperLiteral, true)] {
            let got = embed(&x, policy).unwrap().values;
            let want = naive_embedding(&x, paper);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "case {case} {policy:?}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn untied_embedding_is_rescaled_rank() {
    let mut rng = rng(2);
    for _ in 0..300 {
        let n = rng.random_range(2..=80);
        let x = normals(&mut rng, n);
        let got = embed(&x, TiePolicy::KemenyZero).unwrap().values;
        for (g, w) in got.iter().zip(untied_embedding(&x)) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

#[test]
fn kernel_column_sums_are_embedding() {
    let mut rng = rng(3);
    for _ in 0..100 {
        let n = rng.random_range(2..=30);
        let x = tied(&mut rng, n, 5);
        let k = center_kernel(&score_matrix(&x, TiePolicy::KemenyZero).unwrap());
        assert_eq!(k.column_sums(), embed(&x, TiePolicy::KemenyZero).unwrap().values);
    }
}

#[test]
fn ranked_pearson_agrees_on_untied_data() {
    let mut rng = rng(4);
    for _ in 0..300 {
        let n = rng.random_range(3..=60);
        let x = normals(&mut rng, n);
        let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
        let rho = correlate(&x, &y, TiePolicy::KemenyZero).unwrap().rho_hat;
        assert!((rho - spearman_ranked_pearson(&x, &y)).abs() < 1e-12);
        assert!((rho - spearman_textbook(&x, &y)).abs() < 1e-12);
    }
}

#[test]
fn moments_match_direct_sums() {
    let mut rng = rng(5);
    for _ in 0..100 {
        let n = rng.random_range(3..=40);
        let x = tied(&mut rng, n, 7);
        let e = embed(&x, TiePolicy::KemenyZero).unwrap();
        let m = central_moments(&e);
        for (r, got) in [(2, m.mu2), (3, m.mu3), (4, m.mu4)] {
            let want = e.values.iter().map(|v| v.powi(r)).sum::<f64>() / (n - 1) as f64;
            assert!((got - want).abs() < 1e-12);
        }
    }
}

#[test]
fn hessian_is_symmetric_and_info_nonnegative() {
    let mut rng = rng(6);
    for _ in 0..100 {
        let n = rng.random_range(4..=40);
        let mx = central_moments(&embed(&normals(&mut rng, n), TiePolicy::KemenyZero).unwrap());
        let my = central_moments(&embed(&normals(&mut rng, n), TiePolicy::KemenyZero).unwrap());
        let (h, info) = hessian_and_info(&mx, &my).unwrap();
        for r in 0..3 {
            for s in 0..3 {
                assert_eq!(h[r][s], h[s][r]);
            }
        }
        assert!(info >= 0.0 && info.is_finite());
    }
}

#[test]
fn fits_match_normal_equations() {
    let mut rng = rng(7);
    for _ in 0..150 {
        let p = rng.random_range(1..=4);
        let n = rng.random_range(p + 5..=60);
        let cols: Vec<Vec<f64>> = (0..p).map(|_| tied(&mut rng, n, 12)).collect();
        let y = normals(&mut rng, n);
        let Ok(d) = DesignEmbedding::from_raw(&cols, &y, TiePolicy::KemenyZero) else { continue };
        let emb: Vec<Vec<f64>> = (0..p).map(|j| d.columns.column(j).iter().copied().collect()).collect();
        let yemb: Vec<f64> = d.response.iter().copied().collect();
        let Ok(ols) = fit_ql(&d) else { continue };
        for (b, o) in ols.beta.iter().zip(normal_equations(&emb, &yemb, None)) {
            assert!((b - o).abs() < 1e-10);
        }
        let s2: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..5.0)).collect();
        let w: Vec<f64> = s2.iter().map(|s| 1.0 / s).collect();
        let wls = fit_weighted(&d, &s2).unwrap();
        for (b, o) in wls.beta.iter().zip(normal_equations(&emb, &yemb, Some(&w))) {
            assert!((b - o).abs() < 1e-10);
        }
        let iv = fit_2sls(&d, &d.columns).unwrap();
        for (a, b) in iv.beta_2sls.iter().zip(&ols.beta) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn two_stage_matches_explicit_projection() {
    // beta = (X'PX)^-1 X'Py with P = Z (Z'Z)^-1 Z', composed from the
    // normal-equation oracle: first-stage fitted values, then a second OLS.
    let mut rng = rng(8);
    for _ in 0..50 {
        let n = rng.random_range(20..=60);
        let zs: Vec<Vec<f64>> = (0..3).map(|_| normals(&mut rng, n)).collect();
        let x: Vec<f64> = (0..n).map(|i| zs[0][i] + 0.5 * zs[1][i] + rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i] + rng.random_range(-1.0..1.0)).collect();
        let d = DesignEmbedding::from_raw(&[x], &y, TiePolicy::KemenyZero).unwrap();
        let zemb: Vec<Vec<f64>> = zs.iter().map(|z| embed(z, TiePolicy::KemenyZero).unwrap().values).collect();
        let xemb: Vec<f64> = d.columns.column(0).iter().copied().collect();
        let pi = normal_equations(&zemb, &xemb, None);
        let xhat: Vec<f64> = (0..n).map(|i| (0..3).map(|j| pi[j] * zemb[j][i]).sum()).collect();
        let yemb: Vec<f64> = d.response.iter().copied().collect();
        let want = normal_equations(&[xhat], &yemb, None)[0];

        let z = nalgebra::DMatrix::from_fn(n, 3, |i, j| zemb[j][i]);
        let got = fit_2sls(&d, &z).unwrap();
        assert!((got.beta_2sls[0] - want).abs() < 1e-10);
        assert!((got.projection_trace - 3.0).abs() < 1e-10);
    }
}
