//! Convergent cross mapping baseline.
//!
//! If `y` drives `x`, the delay-embedded manifold of `x` carries information
//! about `y`: neighbors on the `x` manifold have similar contemporaneous `y`
//! values, and the cross-map skill improves as the library grows.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Result};
use crate::network::DirectedNetwork;

#[derive(Debug, Clone, PartialEq)]
pub struct DelayEmbedding {
    pub dim: usize,
    pub tau: usize,
    /// `(s_t, s_{t-τ}, …, s_{t-(E-1)τ})` for each valid `t`.
    pub points: Vec<Vec<f64>>,
    /// Series index `t` of each point.
    pub times: Vec<usize>,
}

pub fn delay_embed(series: &[f64], dim: usize, tau: usize) -> Result<DelayEmbedding> {
    if dim == 0 || tau == 0 {
        return param("embedding dimension and lag must be at least 1");
    }
    let span = (dim - 1) * tau;
    if series.len() <= span {
        return param(format!("series of length {} too short for E = {dim}, tau = {tau}", series.len()));
    }
    let times: Vec<usize> = (span..series.len()).collect();
    let points = times
        .iter()
        .map(|&t| (0..dim).map(|k| series[t - k * tau]).collect())
        .collect();
    Ok(DelayEmbedding {
        dim,
        tau,
        points,
        times,
    })
}

/// Pearson correlation; zero when either side has no variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (da, db) = (a[i] - ma, b[i] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Simplex-projection skill of predicting `y` from the delay manifold of `x`
/// using a random library of `library_size` points.
pub fn cross_map_correlation(x: &[f64], y: &[f64], dim: usize, tau: usize, library_size: usize, seed: u64) -> Result<f64> {
    if x.len() != y.len() {
        return param("cross-mapped series differ in length");
    }
    let emb = delay_embed(x, dim, tau)?;
    let total = emb.points.len();
    if library_size > total {
        return param(format!("library of {library_size} exceeds {total} embedded points"));
    }
    if library_size < dim + 2 {
        return param(format!("library needs at least {} points for E = {dim}", dim + 2));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut library: Vec<usize> = sample(&mut rng, total, library_size).into_vec();
    library.sort_unstable();

    let k = dim + 1;
    let mut predicted = Vec::with_capacity(total);
    let mut truth = Vec::with_capacity(total);
    let mut neighbors: Vec<(f64, usize)> = Vec::with_capacity(library_size);
    for (target, point) in emb.points.iter().enumerate() {
        neighbors.clear();
        neighbors.extend(
            library
                .iter()
                .filter(|&&l| l != target)
                .map(|&l| (sq_dist(point, &emb.points[l]), l)),
        );
        let take = k.min(neighbors.len());
        neighbors.select_nth_unstable_by(take - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &mut neighbors[..take];
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let d0 = nearest[0].0.sqrt();
        let mut wsum = 0.0;
        let mut acc = 0.0;
        for &(d2, l) in nearest.iter() {
            let w = if d0 > 0.0 {
                (-d2.sqrt() / d0).exp()
            } else if d2 == 0.0 {
                1.0
            } else {
                0.0
            };
            wsum += w;
            acc += w * y[emb.times[l]];
        }
        predicted.push(acc / wsum);
        truth.push(y[emb.times[target]]);
    }
    Ok(pearson(&predicted, &truth))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcmParams {
    pub dim: usize,
    pub tau: usize,
    pub rho_threshold: f64,
    /// Required skill gain from the smallest to the full library.
    pub margin: f64,
    pub seed: u64,
}

impl Default for CcmParams {
    fn default() -> Self {
        Self {
            dim: 3,
            tau: 1,
            rho_threshold: 0.7,
            margin: 0.05,
            seed: 0,
        }
    }
}

/// Number of random draws averaged for the smallest library.
const SMALL_LIBRARY_DRAWS: u64 = 5;

/// Cross-map skill at full and minimal library for every ordered pair.
/// Entry `(i, j)` maps `j`'s series from `i`'s manifold, i.e. tests `j → i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CcmScores {
    pub full: DMatrix<f64>,
    pub small: DMatrix<f64>,
}

/// `series` is `n × T`, one row per node.
pub fn ccm_scores(series: &DMatrix<f64>, params: &CcmParams) -> Result<CcmScores> {
    let n = series.nrows();
    let rows: Vec<Vec<f64>> = series.row_iter().map(|r| r.iter().copied().collect()).collect();
    let points = series.ncols().saturating_sub((params.dim.max(1) - 1) * params.tau);
    let small_lib = params.dim + 2;
    let mut full = DMatrix::zeros(n, n);
    let mut small = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pair_seed = params.seed ^ ((i * n + j) as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            full[(i, j)] = cross_map_correlation(&rows[i], &rows[j], params.dim, params.tau, points, pair_seed)?;
            let mut acc = 0.0;
            for draw in 0..SMALL_LIBRARY_DRAWS {
                acc += cross_map_correlation(&rows[i], &rows[j], params.dim, params.tau, small_lib, pair_seed.wrapping_add(draw + 1))?;
            }
            small[(i, j)] = acc / SMALL_LIBRARY_DRAWS as f64;
        }
    }
    Ok(CcmScores { full, small })
}

/// Edge `j → i` when the full-library skill exceeds the threshold and beats
/// the smallest library by at least the margin.
pub fn scores_to_network(scores: &CcmScores, params: &CcmParams) -> DirectedNetwork {
    let n = scores.full.nrows();
    let mut net = DirectedNetwork::empty(n).expect("n >= 1");
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let rho = scores.full[(i, j)];
                if rho > params.rho_threshold && rho - scores.small[(i, j)] >= params.margin {
                    net.add_edge(j, i).expect("in range");
                }
            }
        }
    }
    net
}

pub fn ccm_infer_network(series: &DMatrix<f64>, params: &CcmParams) -> Result<DirectedNetwork> {
    if series.nrows() == 0 {
        return param("no channels to cross map");
    }
    Ok(scores_to_network(&ccm_scores(series, params)?, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn logistic(len: usize, x0: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(len);
        let mut x = x0;
        for _ in 0..len {
            v.push(x);
            x = 3.8 * x * (1.0 - x);
        }
        v
    }

    /// y drives x (Sugihara-style coupled logistic maps).
    fn coupled(len: usize) -> (Vec<f64>, Vec<f64>) {
        let (mut x, mut y) = (0.4, 0.2);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for _ in 0..len {
            xs.push(x);
            ys.push(y);
            let nx = x * (3.8 - 3.8 * x - 0.1 * y);
            let ny = y * (3.5 - 3.5 * y);
            x = nx;
            y = ny;
        }
        (xs, ys)
    }

    #[test]
    fn embedding_layout() {
        let e = delay_embed(&[1.0, 2.0, 3.0, 4.0], 2, 1).unwrap();
        assert_eq!(e.points, vec![vec![2.0, 1.0], vec![3.0, 2.0], vec![4.0, 3.0]]);
        let s = [5.0, 1.0, 2.0];
        let e1 = delay_embed(&s, 1, 3).unwrap();
        assert_eq!(e1.points.iter().map(|p| p[0]).collect::<Vec<_>>(), s.to_vec());
        let c = delay_embed(&[2.0; 10], 3, 2).unwrap();
        assert!(c.points.iter().all(|p| p == &vec![2.0; 3]));
        assert_eq!(c.points.len(), 10 - 4);
        assert!(delay_embed(&[1.0, 2.0], 3, 1).is_err());
    }

    #[test]
    fn self_map_on_chaos() {
        let x = logistic(600, 0.3);
        let rho = cross_map_correlation(&x, &x, 3, 1, 598, 1).unwrap();
        assert!(rho >= 0.95, "rho {rho}");
    }

    #[test]
    fn white_noise_target_is_unpredictable() {
        let x = logistic(400, 0.3);
        let mut total = 0.0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
            total += cross_map_correlation(&x, &y, 3, 1, 398, seed).unwrap();
        }
        assert!((total / 20.0).abs() <= 0.2);
    }

    #[test]
    fn skill_converges_with_library() {
        let (x, y) = coupled(1000);
        let skill = |l| {
            (0..5)
                .map(|s| cross_map_correlation(&x, &y, 2, 1, l, s).unwrap())
                .sum::<f64>()
                / 5.0
        };
        let sizes = [10, 50, 200, 998];
        let rhos: Vec<f64> = sizes.iter().map(|&l| skill(l)).collect();
        for w in rhos.windows(2) {
            assert!(w[1] >= w[0] - 0.02, "{rhos:?}");
        }
        assert!(rhos[3] > rhos[0]);
    }

    #[test]
    fn constant_prediction_gives_zero() {
        let x = logistic(100, 0.3);
        assert_eq!(cross_map_correlation(&x, &[1.0; 100], 2, 1, 50, 0).unwrap(), 0.0);
        assert!(cross_map_correlation(&x, &[1.0; 99], 2, 1, 50, 0).is_err());
        assert!(cross_map_correlation(&x, &x, 2, 1, 3, 0).is_err());
    }

    #[test]
    fn duplicated_channels_map_both_ways() {
        let x = logistic(500, 0.3);
        let series = DMatrix::from_fn(2, 500, |_, c| x[c]);
        let net = ccm_infer_network(&series, &CcmParams::default()).unwrap();
        assert!(net.has_edge(0, 1) && net.has_edge(1, 0));
    }

    #[test]
    fn independent_noise_gives_no_edges() {
        let mut empty = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 40);
            let series = DMatrix::from_fn(3, 300, |_, _| rng.random::<f64>());
            let net = ccm_infer_network(&series, &CcmParams { seed, ..CcmParams::default() }).unwrap();
            if net.edge_count() == 0 {
                empty += 1;
            }
        }
        assert!(empty >= 18, "{empty}/20");
    }

    #[test]
    fn rho_bounded_and_deterministic() {
        let (x, y) = coupled(300);
        let a = cross_map_correlation(&x, &y, 3, 2, 100, 9).unwrap();
        let b = cross_map_correlation(&x, &y, 3, 2, 100, 9).unwrap();
        assert_eq!(a, b);
        assert!((-1.0..=1.0).contains(&a));
    }
}
