use filterlab::Model;
use nalgebra::{DMatrix, DVector};

/// Newton's method on `step(s) - s` with a finite-difference Jacobian and
/// step halving, started from a state that knows nothing of the closed form.
pub fn newton_fixed_point(m: &Model) -> Vec<f64> {
    let n = m.dim();
    let residual = |s: &[f64]| -> DVector<f64> {
        let next = m.step(s).unwrap();
        DVector::from_iterator(n, next.iter().zip(s).map(|(a, b)| a - b))
    };
    let mut s = vec![m.x_in().sqrt().max(1.0); n];
    for _ in 0..200 {
        let f = residual(&s);
        if f.amax() < 1e-14 * (1.0 + m.x_in()) {
            break;
        }
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * s[j].abs().max(1.0);
            let mut hi = s.clone();
            let mut lo = s.clone();
            hi[j] += h;
            lo[j] -= h;
            let col = (residual(&hi) - residual(&lo)) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let dx = jac.lu().solve(&(-&f)).expect("singular Jacobian");
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = s.iter().zip(dx.iter()).map(|(a, d)| a + t * d).collect();
            if trial.iter().all(|v| *v > 0.0) && residual(&trial).norm() < f.norm() {
                s = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return s;
            }
        }
    }
    s
}
