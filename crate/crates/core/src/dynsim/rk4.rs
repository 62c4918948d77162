/// One classical fourth-order Runge–Kutta step of `y' = f(t, y)`.
///
/// `scratch` must hold five buffers of `y.len()`; it is reused between steps
/// to avoid reallocating.
pub fn rk4_step<F>(y: &mut [f64], t: f64, dt: f64, scratch: &mut Rk4Scratch, mut f: F)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let Rk4Scratch { k1, k2, k3, k4, tmp } = scratch;
    let n = y.len();
    f(t, y, k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    f(t + 0.5 * dt, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    f(t + 0.5 * dt, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(t + dt, tmp, k4);
    for i in 0..n {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

pub struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}
