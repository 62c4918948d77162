use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix};

use crate::error::{param, Result};
use crate::network::DirectedNetwork;

/// Fraction of off-diagonal adjacency entries on which the two graphs agree.
pub fn accuracy(truth: &DirectedNetwork, predicted: &DirectedNetwork) -> Result<f64> {
    let n = truth.n();
    if predicted.n() != n {
        return param(format!("graphs differ in size ({n} vs {})", predicted.n()));
    }
    if n < 2 {
        return Ok(1.0);
    }
    let mut agree = 0usize;
    for s in 0..n {
        for t in 0..n {
            if s != t && truth.has_edge(s, t) == predicted.has_edge(s, t) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / (n * (n - 1)) as f64)
}

/// Shifts tried when the plain QR iteration stalls; the transposed matrix
/// has the same spectrum and is tried alongside.
const SHIFTS: [f64; 7] = [0.0, 0.5, -0.75, 1.25, std::f64::consts::FRAC_1_PI, -std::f64::consts::E, std::f64::consts::SQRT_2];
const MAX_SWEEPS: usize = 10_000;

fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    for shift in SHIFTS {
        for base in [m.clone(), m.transpose()] {
            let shifted = base + DMatrix::identity(n, n) * shift;
            if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, MAX_SWEEPS) {
                return Ok(schur.complex_eigenvalues().iter().map(|z| z - shift).collect());
            }
        }
    }
    param("eigenvalue iteration did not converge")
}

fn sorted_spectrum(net: &DirectedNetwork) -> Result<Vec<Complex<f64>>> {
    // Round away solver noise so that conjugate pairs and repeated zeros sort
    // the same way for isomorphic graphs.
    let snap = |v: f64| {
        let r = (v * 1e9).round() / 1e9;
        if r == 0.0 {
            0.0
        } else {
            r
        }
    };
    let mut eig: Vec<Complex<f64>> = eigenvalues(&net.to_matrix())?
        .iter()
        .map(|z| Complex::new(snap(z.re), snap(z.im)))
        .collect();
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(eig)
}

/// Mean modulus of the difference between the lexicographically sorted
/// adjacency spectra.
pub fn spectral_distance(truth: &DirectedNetwork, predicted: &DirectedNetwork) -> Result<f64> {
    if truth.n() != predicted.n() {
        return param(format!("graphs differ in size ({} vs {})", truth.n(), predicted.n()));
    }
    let a = sorted_spectrum(truth)?;
    let b = sorted_spectrum(predicted)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).norm()).sum::<f64>() / a.len() as f64)
}
