//! Vector autoregression and pairwise-conditional Granger causality.
//!
//! Series are passed as `n × T` matrices (one row per channel, one column per
//! sample), the same layout as [`Trajectory::states`](crate::dynsim::Trajectory).
//! Several trials may be pooled; no regression row ever straddles two trials.
//!
//! The G-causality from `j` to `i` is `ln(RSS_reduced / RSS_full)` for the
//! single equation predicting `x_i`, where the reduced model drops every lag
//! of `x_j`. Under the null, `T_eff · F` is asymptotically `χ²(p)`; the
//! `n(n-1)` p-values are then thresholded with Benjamini–Hochberg.

use nalgebra::DMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{param, Error, Result};
use crate::network::DirectedNetwork;

/// Relative rank tolerance on the diagonal of R.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    pub order: usize,
    /// `coeffs[k][(i, j)]` weighs `x_j` at lag `k + 1` in the equation for `x_i`.
    pub coeffs: Vec<DMatrix<f64>>,
    pub residual_cov: DMatrix<f64>,
    pub sample_count: usize,
}

/// Significance results with `(target, source)` indexing, matching the
/// adjacency convention.
#[derive(Debug, Clone, PartialEq)]
pub struct GcResult {
    pub f_stat: DMatrix<f64>,
    pub p_values: DMatrix<f64>,
    pub significant: DirectedNetwork,
    pub order: usize,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderSelection {
    Fixed(usize),
    /// Minimize AIC over `1..=max`.
    Auto { max: usize },
}

struct Design {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

fn check_series(series: &[DMatrix<f64>], order: usize) -> Result<usize> {
    if order == 0 {
        return param("model order must be at least 1");
    }
    let Some(first) = series.first() else {
        return param("no trials supplied");
    };
    let n = first.nrows();
    if n == 0 {
        return param("series has no channels");
    }
    for (k, s) in series.iter().enumerate() {
        if s.nrows() != n {
            return param(format!("series {k} has {} channels, expected {n}", s.nrows()));
        }
        if s.ncols() <= order + n * order {
            return param(format!(
                "series {k} has {} samples; order {order} with {n} channels needs more than {}",
                s.ncols(),
                order + n * order
            ));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return param(format!("series {k} contains non-finite values"));
        }
    }
    Ok(n)
}

/// Lagged regressors. Column `k * n + j` holds `x_j` at lag `k + 1`. The first
/// `order + skip` samples of every trial only serve as lags.
fn build_design(series: &[DMatrix<f64>], order: usize, skip: usize) -> Design {
    let n = series[0].nrows();
    let rows: usize = series.iter().map(|s| s.ncols() - order - skip).sum();
    let mut x = DMatrix::zeros(rows, n * order);
    let mut y = DMatrix::zeros(rows, n);
    let mut r = 0;
    for s in series {
        for t in (order + skip)..s.ncols() {
            for i in 0..n {
                y[(r, i)] = s[(i, t)];
            }
            for k in 0..order {
                for j in 0..n {
                    x[(r, k * n + j)] = s[(j, t - k - 1)];
                }
            }
            r += 1;
        }
    }
    Design { x, y }
}

struct LeastSquares {
    coef: DMatrix<f64>,
    rss: Vec<f64>,
}

/// QR least squares of every column of `y` on `x`.
fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LeastSquares> {
    let cols = x.ncols();
    if x.nrows() <= cols {
        return param(format!("{} regression rows for {cols} regressors", x.nrows()));
    }
    let largest = x.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let qr = x.clone().qr();
    let r = qr.r();
    let rank = (0..cols).filter(|&i| r[(i, i)].abs() > RANK_TOL * largest).count();
    if rank < cols || largest == 0.0 {
        return Err(Error::Singular { rank, cols });
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, cols).into_owned();
    let coef = r
        .solve_upper_triangular(&head)
        .ok_or(Error::Singular { rank, cols })?;
    let tail = qty.rows(cols, qty.nrows() - cols);
    let rss = tail.column_iter().map(|c| c.norm_squared()).collect();
    Ok(LeastSquares { coef, rss })
}

/// Subtracts each channel's mean, trial by trial.
pub fn demean(series: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = series.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    out
}

/// Pooled OLS fit of a VAR of the given order.
pub fn fit_var(series: &[DMatrix<f64>], order: usize) -> Result<VarModel> {
    let n = check_series(series, order)?;
    let d = build_design(series, order, 0);
    let ls = least_squares(&d.x, &d.y)?;
    let resid = &d.y - &d.x * &ls.coef;
    let rows = d.x.nrows();
    let dof = (rows - n * order) as f64;
    let mut cov = resid.transpose() * &resid / dof;
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = m;
            cov[(j, i)] = m;
        }
    }
    let coeffs = (0..order)
        .map(|k| DMatrix::from_fn(n, n, |i, j| ls.coef[(k * n + j, i)]))
        .collect();
    Ok(VarModel {
        order,
        coeffs,
        residual_cov: cov,
        sample_count: rows,
    })
}

/// `ln|Σ_p| + 2 p n² / T_eff` for each `p` in `1..=max_order`, all fitted on
/// the same rows so that the criteria are comparable. Σ is the maximum
/// likelihood residual covariance.
pub fn aic_curve(series: &[DMatrix<f64>], max_order: usize) -> Result<Vec<f64>> {
    let n = check_series(series, max_order)?;
    let mut out = Vec::with_capacity(max_order);
    for order in 1..=max_order {
        let d = build_design(series, order, max_order - order);
        let ls = least_squares(&d.x, &d.y)?;
        let resid = &d.y - &d.x * &ls.coef;
        let rows = d.x.nrows() as f64;
        let cov = resid.transpose() * &resid / rows;
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Parameter(format!("residual covariance at order {order} is singular; noise-free data?")))?;
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        out.push(logdet + 2.0 * (order * n * n) as f64 / rows);
    }
    Ok(out)
}

/// Order in `1..=max_order` minimizing the Akaike information criterion.
pub fn select_model_order(series: &[DMatrix<f64>], max_order: usize) -> Result<usize> {
    if max_order == 0 {
        return param("maximum model order must be at least 1");
    }
    if max_order == 1 {
        check_series(series, 1)?;
        return Ok(1);
    }
    let aic = aic_curve(series, max_order)?;
    let best = aic
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i + 1)
        .unwrap_or(1);
    Ok(best)
}

/// Benjamini–Hochberg step-up procedure at false discovery rate `q`.
pub fn benjamini_hochberg(p_values: &[f64], q: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut cutoff = 0;
    for (rank, &i) in idx.iter().enumerate() {
        if p_values[i] <= q * (rank + 1) as f64 / m as f64 {
            cutoff = rank + 1;
        }
    }
    let mut out = vec![false; m];
    for &i in &idx[..cutoff] {
        out[i] = true;
    }
    out
}

/// G-causality for every ordered pair, conditioned on all other channels.
pub fn pairwise_conditional_gc(series: &[DMatrix<f64>], order: usize, alpha: f64) -> Result<GcResult> {
    let n = check_series(series, order)?;
    if n < 2 {
        return param("pairwise G-causality needs at least two channels");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return param(format!("significance level {alpha} outside (0, 1)"));
    }
    let d = build_design(series, order, 0);
    let rows = d.x.nrows();
    let full = least_squares(&d.x, &d.y)?;

    let mut f_stat = DMatrix::zeros(n, n);
    for source in 0..n {
        let keep: Vec<usize> = (0..n * order).filter(|c| c % n != source).collect();
        let reduced_x = d.x.select_columns(&keep);
        let reduced = least_squares(&reduced_x, &d.y)?;
        for target in 0..n {
            if target == source {
                continue;
            }
            let f = if full.rss[target] > 0.0 {
                (reduced.rss[target] / full.rss[target]).ln()
            } else if reduced.rss[target] > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            f_stat[(target, source)] = f.max(0.0);
        }
    }

    let chi2 = ChiSquared::new(order as f64).expect("positive degrees of freedom");
    let mut p_values = DMatrix::from_element(n, n, 1.0);
    let mut pairs = Vec::with_capacity(n * (n - 1));
    let mut flat = Vec::with_capacity(n * (n - 1));
    for target in 0..n {
        for source in 0..n {
            if target != source {
                let stat = rows as f64 * f_stat[(target, source)];
                let p = if stat.is_infinite() { 0.0 } else { chi2.sf(stat).clamp(0.0, 1.0) };
                p_values[(target, source)] = p;
                pairs.push((source, target));
                flat.push(p);
            }
        }
    }
    let mut significant = DirectedNetwork::empty(n)?;
    for (&(s, t), keep) in pairs.iter().zip(benjamini_hochberg(&flat, alpha)) {
        if keep {
            significant.add_edge(s, t)?;
        }
    }
    Ok(GcResult {
        f_stat,
        p_values,
        significant,
        order,
        sample_count: rows,
    })
}

/// Infers the network as the set of significant pairwise-conditional
/// G-causalities. Each trial is demeaned per channel first.
pub fn gc_infer_network(trials: &[DMatrix<f64>], order: OrderSelection, alpha: f64) -> Result<(DirectedNetwork, GcResult)> {
    let centered: Vec<DMatrix<f64>> = trials.iter().map(demean).collect();
    let p = match order {
        OrderSelection::Fixed(p) => p,
        OrderSelection::Auto { max } => select_model_order(&centered, max)?,
    };
    let result = pairwise_conditional_gc(&centered, p, alpha)?;
    Ok((result.significant.clone(), result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn white(n: usize, t: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, t, |_, _| noise(&mut rng))
    }

    /// x_1 white, x_2[t] = 0.8 x_1[t-1] + e
    fn one_way(t: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = DMatrix::zeros(2, t);
        for c in 0..t {
            s[(0, c)] = noise(&mut rng);
            let prev = if c > 0 { s[(0, c - 1)] } else { 0.0 };
            s[(1, c)] = 0.8 * prev + noise(&mut rng);
        }
        s
    }

    #[test]
    fn ar1_coefficient_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = DMatrix::zeros(1, 100_000);
        for c in 1..100_000 {
            s[(0, c)] = 0.5 * s[(0, c - 1)] + noise(&mut rng);
        }
        let m = fit_var(&[s], 1).unwrap();
        assert!((m.coeffs[0][(0, 0)] - 0.5).abs() < 0.01);
        assert!((m.residual_cov[(0, 0)] - 1.0).abs() < 0.02);
    }

    #[test]
    fn white_noise_coefficients_near_zero() {
        let t = 4000;
        let m = fit_var(&[white(3, t, 2)], 1).unwrap();
        let se = 1.0 / (t as f64).sqrt();
        assert!(m.coeffs[0].iter().all(|c| c.abs() < 5.0 * se));
        let cov = &m.residual_cov;
        assert!((cov - cov.transpose()).abs().max() <= 1e-10);
    }

    #[test]
    fn duplicated_trials_give_same_fit() {
        let s = white(2, 500, 3);
        let a = fit_var(std::slice::from_ref(&s), 2).unwrap();
        let b = fit_var(&[s.clone(), s], 2).unwrap();
        for k in 0..2 {
            assert!((&a.coeffs[k] - &b.coeffs[k]).abs().max() < 1e-10);
        }
    }

    #[test]
    fn short_and_degenerate_inputs_rejected() {
        // n = 2, p = 2 needs more than 6 samples per trial
        assert!(fit_var(&[white(2, 6, 1)], 2).is_err());
        assert!(fit_var(&[white(2, 500, 1), white(2, 6, 2)], 2).is_err());
        assert!(fit_var(&[white(2, 7, 1)], 2).is_ok());
        assert!(fit_var(&[white(2, 500, 1), white(3, 500, 2)], 1).is_err());

        let base = white(1, 300, 4);
        let dup = DMatrix::from_fn(2, 300, |_, c| base[(0, c)]);
        assert!(matches!(fit_var(&[dup], 1), Err(Error::Singular { .. })));
    }

    #[test]
    fn aic_prefers_true_order() {
        let mut hits = 0;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let t = 1000;
            let mut s = DMatrix::zeros(3, t);
            for c in 2..t {
                let e: [f64; 3] = std::array::from_fn(|_| noise(&mut rng));
                s[(0, c)] = 0.2 * s[(0, c - 1)] - 0.6 * s[(0, c - 2)] + 0.3 * s[(1, c - 2)] + e[0];
                s[(1, c)] = 0.1 * s[(1, c - 1)] - 0.5 * s[(1, c - 2)] + e[1];
                s[(2, c)] = -0.5 * s[(2, c - 2)] + 0.4 * s[(0, c - 1)] + e[2];
            }
            if select_model_order(&[s], 6).unwrap() == 2 {
                hits += 1;
            }
        }
        assert!(hits >= 45, "order 2 picked {hits}/50 times");
        assert_eq!(select_model_order(&[white(3, 2000, 9)], 4).unwrap(), 1);
        assert_eq!(select_model_order(&[white(3, 50, 9)], 1).unwrap(), 1);
    }

    #[test]
    fn one_way_coupling_detected() {
        let mut hits = 0;
        for seed in 0..100 {
            let r = pairwise_conditional_gc(&[one_way(10_000, seed)], 1, 0.05).unwrap();
            if r.significant.has_edge(0, 1) && !r.significant.has_edge(1, 0) {
                hits += 1;
            }
        }
        // The reverse test is calibrated at alpha, so the expected hit rate
        // is 1 - alpha; allow three binomial standard deviations below it.
        assert!(hits >= 89, "{hits}/100");
    }

    #[test]
    fn null_rejection_rate_matches_alpha() {
        let mut false_pos = 0;
        for seed in 0..1000 {
            let r = pairwise_conditional_gc(&[one_way(10_000, 1000 + seed)], 1, 0.05).unwrap();
            assert!(r.significant.has_edge(0, 1));
            if r.significant.has_edge(1, 0) {
                false_pos += 1;
            }
        }
        assert!((30..=70).contains(&false_pos), "{false_pos}/1000");
    }

    #[test]
    fn bh_procedure() {
        assert_eq!(benjamini_hochberg(&[0.01, 0.03, 0.02, 0.2], 0.05), vec![true, true, true, false]);
        assert_eq!(benjamini_hochberg(&[0.02, 0.5], 0.05), vec![true, false]);
        assert_eq!(benjamini_hochberg(&[0.04, 0.5], 0.05), vec![false, false]);
        // Neither 0.03 nor 0.04 meets its rank cutoff.
        assert_eq!(benjamini_hochberg(&[0.01, 0.04, 0.03, 0.2], 0.05), vec![true, false, false, false]);
        // Step-up: a larger p-value can pull smaller ones in.
        assert_eq!(benjamini_hochberg(&[0.03, 0.026, 0.2, 0.037], 0.05), vec![true, true, false, true]);
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = 2000;
        let mut s = DMatrix::zeros(3, t);
        for c in 1..t {
            s[(0, c)] = 0.5 * s[(0, c - 1)] + noise(&mut rng);
            s[(1, c)] = 0.4 * s[(0, c - 1)] + noise(&mut rng);
            s[(2, c)] = 0.3 * s[(1, c - 1)] + 0.2 * s[(2, c - 1)] + noise(&mut rng);
        }
        let perm = [2usize, 0, 1];
        let mut sp = DMatrix::zeros(3, t);
        for (i, &to) in perm.iter().enumerate() {
            sp.row_mut(to).copy_from(&s.row(i));
        }
        let a = pairwise_conditional_gc(&[s], 2, 0.05).unwrap();
        let b = pairwise_conditional_gc(&[sp], 2, 0.05).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.f_stat[(i, j)] - b.f_stat[(perm[i], perm[j])]).abs() < 1e-9);
            }
        }
        assert_eq!(a.significant.permuted(&perm).unwrap(), b.significant);
    }

    #[test]
    fn scale_invariance() {
        let s = one_way(3000, 8);
        let a = pairwise_conditional_gc(std::slice::from_ref(&s), 2, 0.05).unwrap();
        let b = pairwise_conditional_gc(&[s * 37.5], 2, 0.05).unwrap();
        assert!((&a.f_stat - &b.f_stat).abs().max() < 1e-8);
        assert!(a.f_stat.iter().all(|&f| f >= 0.0));
        assert!(a.p_values.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn deterministic() {
        let s = white(4, 800, 12);
        let a = pairwise_conditional_gc(std::slice::from_ref(&s), 2, 0.05).unwrap();
        let b = pairwise_conditional_gc(&[s], 2, 0.05).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn isolated_pair_edge_recovered() {
        let (net, _) = gc_infer_network(&[one_way(5000, 77)], OrderSelection::Auto { max: 4 }, 0.05).unwrap();
        assert!(net.has_edge(0, 1));
    }
}
