//! Adam, global-norm clipping, and the small dense kernels shared by the
//! LSTM and MLP. Matrices are row-major `Vec<f64>`.

/// A fixed, ordered list of flat parameter tensors. Gradients use the same
/// type as the parameters they belong to.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

pub fn global_norm<P: Parameters>(grads: &P) -> f64 {
    grads.tensors().iter().flat_map(|t| t.iter()).map(|g| g * g).sum::<f64>().sqrt()
}

/// Rescales `grads` so the global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm<P: Parameters>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for t in grads.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) {
        let grads = grads.tensors();
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads).zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// `out += M x` for `M` of shape `rows × cols`.
#[inline]
pub fn gemv_acc(out: &mut [f64], m: &[f64], cols: usize, x: &[f64]) {
    debug_assert_eq!(x.len(), cols);
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Mᵀ v` for `M` of shape `rows × cols`.
#[inline]
pub fn gemv_t_acc(out: &mut [f64], m: &[f64], cols: usize, v: &[f64]) {
    debug_assert_eq!(out.len(), cols);
    for (&vi, row) in v.iter().zip(m.chunks_exact(cols)) {
        if vi != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += vi * a;
            }
        }
    }
}

/// `g += a xᵀ` for `g` of shape `a.len() × x.len()`.
#[inline]
pub fn outer_acc(g: &mut [f64], a: &[f64], x: &[f64]) {
    for (&ai, row) in a.iter().zip(g.chunks_exact_mut(x.len())) {
        if ai != 0.0 {
            for (gi, xi) in row.iter_mut().zip(x) {
                *gi += ai * xi;
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable two-class log-softmax.
pub fn log_softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    [logits[0] - lse, logits[1] - lse]
}

pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let l = log_softmax2(logits);
    [l[0].exp(), l[1].exp()]
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flat(Vec<f64>);

    impl Parameters for Flat {
        fn tensors(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = Flat(vec![1.0, -1.0]);
        let g = Flat(vec![0.5, -2.0]);
        let mut adam = Adam::new(0.1);
        adam.step(&mut p, &g);
        assert!((p.0[0] - 0.9).abs() < 1e-6);
        assert!((p.0[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn adam_zero_lr_is_identity() {
        let mut p = Flat(vec![0.3, 0.7]);
        let mut adam = Adam::new(0.0);
        for _ in 0..5 {
            adam.step(&mut p, &Flat(vec![1.0, -3.0]));
        }
        assert_eq!(p.0, vec![0.3, 0.7]);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = Flat(vec![3.0, 4.0]);
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((global_norm(&g) - 1.0).abs() < 1e-15);
        let mut small = Flat(vec![0.3, 0.4]);
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small.0, vec![0.3, 0.4]);
    }

    #[test]
    fn kernels() {
        let m = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut out = [0.0; 2];
        gemv_acc(&mut out, &m, 3, &[1.0, 0.0, -1.0]);
        assert_eq!(out, [-2.0, -2.0]);
        let mut out = [0.0; 3];
        gemv_t_acc(&mut out, &m, 3, &[1.0, 1.0]);
        assert_eq!(out, [5.0, 7.0, 9.0]);
        let mut g = [0.0; 6];
        outer_acc(&mut g, &[1.0, 2.0], &[1.0, 2.0, 3.0]);
        assert_eq!(g, [1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax2([1000.0, 0.0]);
        assert_eq!(p[0], 1.0);
        assert!(p[1] >= 0.0);
        let l = log_softmax2([0.0, 0.0]);
        assert!((l[0] + std::f64::consts::LN_2).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) == 1.0);
    }
}
