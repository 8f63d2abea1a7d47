//! Fixed-step integration kernels shared by the flow and cocycle engines.

use crate::algebra::Scalar;

/// Uniform grid on `[0, t_end]` with `ceil(t_end / h)` cells; the last node
/// is exactly `t_end`. `t_end = 0` gives the single node `0`.
pub fn time_grid(t_end: f64, h: f64) -> Vec<f64> {
    if t_end <= 0.0 {
        return vec![0.0];
    }
    let cells = ((t_end / h) - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..cells).map(|i| t_end * i as f64 / cells as f64).collect();
    grid.push(t_end);
    grid
}

/// One classical Runge-Kutta step for the autonomous system `y' = f(y)`.
pub fn rk4_step<F>(f: &F, y: &[Scalar], h: f64) -> Vec<Scalar>
where
    F: Fn(&[Scalar]) -> Vec<Scalar> + ?Sized,
{
    let half = Scalar::new(h / 2.0, 0.0);
    let full = Scalar::new(h, 0.0);
    let axpy = |a: Scalar, k: &[Scalar]| -> Vec<Scalar> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
    let k1 = f(y);
    let k2 = f(&axpy(half, &k1));
    let k3 = f(&axpy(half, &k2));
    let k4 = f(&axpy(full, &k3));
    let sixth = Scalar::new(h / 6.0, 0.0);
    y.iter()
        .enumerate()
        .map(|(i, yi)| yi + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Running integral `∫₀^{t_i} g` at every node of a uniform grid.
///
/// Even nodes use composite Simpson; an odd node adds the last cell with the
/// three-point rule through the two preceding nodes (the first cell uses the
/// following node). Two-node grids fall back to the trapezoid.
pub fn running_simpson<T>(values: &[T], dt: f64) -> Vec<T>
where
    T: Clone + SimpsonValue,
{
    let n = values.len();
    assert!(n >= 1, "empty series");
    let zero = values[0].zero_like();
    let mut out = vec![zero.clone(); n];
    if n == 1 {
        return out;
    }
    if n == 2 {
        out[1] = values[0].combine(&[(0.5 * dt, &values[0]), (0.5 * dt, &values[1])]);
        return out;
    }
    for i in 1..n {
        if i % 2 == 0 {
            let panel = zero.combine(&[
                (dt / 3.0, &values[i - 2]),
                (4.0 * dt / 3.0, &values[i - 1]),
                (dt / 3.0, &values[i]),
            ]);
            out[i] = out[i - 2].combine(&[(1.0, &panel)]);
        } else if i == 1 {
            let cell = zero.combine(&[
                (5.0 * dt / 12.0, &values[0]),
                (8.0 * dt / 12.0, &values[1]),
                (-dt / 12.0, &values[2]),
            ]);
            out[1] = cell;
        } else {
            let cell = zero.combine(&[
                (-dt / 12.0, &values[i - 2]),
                (8.0 * dt / 12.0, &values[i - 1]),
                (5.0 * dt / 12.0, &values[i]),
            ]);
            out[i] = out[i - 1].combine(&[(1.0, &cell)]);
        }
    }
    out
}

/// Linear-combination interface so quadrature works for scalars and matrices.
pub trait SimpsonValue {
    fn zero_like(&self) -> Self;
    /// `self + Σ wᵢ·vᵢ`.
    fn combine(&self, terms: &[(f64, &Self)]) -> Self;
}

impl SimpsonValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }

    fn combine(&self, terms: &[(f64, &Self)]) -> Self {
        terms.iter().fold(*self, |acc, (w, v)| acc + w * *v)
    }
}

impl SimpsonValue for crate::algebra::AlgebraElement {
    fn zero_like(&self) -> Self {
        Self::zeros(self.dim(), self.tag())
    }

    fn combine(&self, terms: &[(f64, &Self)]) -> Self {
        let mut entries = self.entries().to_vec();
        for (w, v) in terms {
            for (e, x) in entries.iter_mut().zip(v.entries()) {
                *e += x * *w;
            }
        }
        Self::from_entries(self.dim(), entries, self.tag())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_end_exactly() {
        assert_eq!(time_grid(0.0, 0.1), vec![0.0]);
        let g = time_grid(1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(time_grid(1.0, 1e-3).len(), 1001);
    }

    #[test]
    fn rk4_is_fourth_order_on_exponential() {
        let f = |y: &[Scalar]| vec![-y[0]];
        let err = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut y = vec![Scalar::new(1.0, 0.0)];
            for _ in 0..n {
                y = rk4_step(&f, &y, h);
            }
            (y[0].re - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn simpson_exactness() {
        let dt = 0.1;
        // quadratics on every node
        let quad: Vec<f64> = (0..8).map(|i| (i as f64 * dt).powi(2)).collect();
        for (i, v) in running_simpson(&quad, dt).iter().enumerate() {
            let t = i as f64 * dt;
            assert!((v - t.powi(3) / 3.0).abs() < 1e-14, "node {i}");
        }
        // cubics on even nodes
        let cubic: Vec<f64> = (0..8).map(|i| (i as f64 * dt).powi(3)).collect();
        for (i, v) in running_simpson(&cubic, dt).iter().enumerate().step_by(2) {
            let t = i as f64 * dt;
            assert!((v - t.powi(4) / 4.0).abs() < 1e-14, "node {i}");
        }
    }
}
