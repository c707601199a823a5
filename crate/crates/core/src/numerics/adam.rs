use super::matrix::{Matrix, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    pub first: Matrix<T>,
    pub second: Matrix<T>,
}

impl<T: Real> Moments<T> {
    pub fn zeros_like(param: &Matrix<T>) -> Self {
        Self {
            first: Matrix::zeros(param.rows(), param.cols()),
            second: Matrix::zeros(param.rows(), param.cols()),
        }
    }
}

/// Adam with bias correction, over an ordered list of parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub moments: Vec<Moments<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Matrix<T>>) -> Self {
        Self {
            config,
            step: 0,
            moments: params.into_iter().map(Moments::zeros_like).collect(),
        }
    }

    /// One update. `params` and `grads` must line up with the tensors the
    /// state was created from.
    pub fn step<'a, 'b>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Matrix<T>>,
        grads: impl IntoIterator<Item = &'b Matrix<T>>,
    ) {
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (T::from_f64_lossy(c.beta1), T::from_f64_lossy(c.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let step_size = T::from_f64_lossy(c.lr / bc1);
        let inv_bc2_sqrt = T::from_f64_lossy(1.0 / bc2.sqrt());
        let eps = T::from_f64_lossy(c.eps);

        let mut count = 0;
        for ((p, g), m) in params.into_iter().zip(grads).zip(self.moments.iter_mut()) {
            assert_eq!(p.shape(), g.shape(), "adam gradient shape");
            assert_eq!(p.shape(), m.first.shape(), "adam moment shape");
            let pd = p.data_mut();
            let (md, vd) = (m.first.data_mut(), m.second.data_mut());
            for i in 0..pd.len() {
                let gi = g.data()[i];
                md[i] = b1 * md[i] + one_b1 * gi;
                vd[i] = b2 * vd[i] + one_b2 * gi * gi;
                pd[i] = pd[i] - step_size * md[i] / (vd[i].sqrt() * inv_bc2_sqrt + eps);
            }
            count += 1;
        }
        assert_eq!(count, self.moments.len(), "adam parameter count");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix<f64> {
        Matrix::filled(1, 1, v)
    }

    #[test]
    fn first_step_is_unit_lr() {
        let mut p = scalar(1.0);
        let mut state = AdamState::new(AdamConfig::default(), [&p]);
        state.step([&mut p], [&scalar(1.0)]);
        // m̂ = 1, v̂ = 1 → Δ = lr · 1 / (1 + ε)
        assert!((p.get(0, 0) - 0.999).abs() < 1e-9);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_gradient_is_null_update() {
        let mut p = Matrix::from_rows(&[vec![0.5, -1.5]]);
        let before = p.clone();
        let mut state = AdamState::new(AdamConfig::default(), [&p]);
        state.step([&mut p], [&Matrix::zeros(1, 2)]);
        assert_eq!(p, before);
    }

    #[test]
    fn constant_gradient_descends() {
        let mut p = Matrix::from_rows(&[vec![0.0, 0.0]]);
        let g = Matrix::from_rows(&[vec![2.0, -0.5]]);
        let mut state = AdamState::new(AdamConfig::default(), [&p]);
        for k in 1..=50 {
            state.step([&mut p], [&g]);
            assert_eq!(state.step, k);
        }
        assert!(p.get(0, 0) < 0.0 && p.get(0, 1) > 0.0);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = Matrix::from_rows(&[vec![0.1f32, 0.2, 0.3]]);
            let mut state = AdamState::new(AdamConfig::default(), [&p]);
            for k in 0..10 {
                let g = Matrix::from_rows(&[vec![k as f32, -0.3, 0.01 * k as f32]]);
                state.step([&mut p], [&g]);
            }
            p
        };
        assert_eq!(run().data(), run().data());
    }
}
