//! Adam with per-network moment state.

use num_traits::Float;

use crate::nn::{Grads, Network, Real};

#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Grads<T>,
    v: Grads<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(net: &Network<T>, beta1: f64, beta2: f64) -> Self {
        Adam {
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            m: Grads::zeros_like(net.spec()),
            v: Grads::zeros_like(net.spec()),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update with learning rate `lr`.
    pub fn step(&mut self, net: &mut Network<T>, grads: &Grads<T>, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - Float::powi(self.beta1, t);
        let bc2 = 1.0 - Float::powi(self.beta2, t);
        let (b1, b2) = (self.beta1, self.beta2);
        let cast = |v: f64| T::from(v).unwrap_or_else(T::zero);
        let (b1t, b2t) = (cast(b1), cast(b2));
        let (ob1, ob2) = (cast(1.0 - b1), cast(1.0 - b2));
        let step_size = cast(lr / bc1);
        let inv_bc2 = cast(1.0 / bc2);
        let eps = cast(self.eps);

        let layers = net.params_mut().iter_mut();
        let moments = self.m.layers.iter_mut().zip(self.v.layers.iter_mut());
        for ((p, g), (m, v)) in layers.zip(&grads.layers).zip(moments) {
            let params = p.weight.iter_mut().chain(p.bias.iter_mut());
            let gs = g.weight.iter().chain(g.bias.iter());
            let ms = m.weight.iter_mut().chain(m.bias.iter_mut());
            let vs = v.weight.iter_mut().chain(v.bias.iter_mut());
            for (((w, &gv), mv), vv) in params.zip(gs).zip(ms).zip(vs) {
                *mv = b1t * *mv + ob1 * gv;
                *vv = b2t * *vv + ob2 * gv * gv;
                *w = *w - step_size * *mv / ((*vv * inv_bc2).sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{build_ppnn_width, ResolutionMode};
    use rand::SeedableRng;

    #[test]
    fn first_step_moves_each_weight_by_lr() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut net: Network<f64> = Network::init(build_ppnn_width(ResolutionMode::High, 2), &mut rng);
        let before = net.clone();
        let mut grads = Grads::zeros_like(net.spec());
        grads.layers[0].weight[0] = 3.0;
        grads.layers[0].weight[1] = -0.5;
        let mut adam = Adam::new(&net, 0.9, 0.999);
        adam.step(&mut net, &grads, 1e-3);
        let d0 = net.params()[0].weight[0] - before.params()[0].weight[0];
        let d1 = net.params()[0].weight[1] - before.params()[0].weight[1];
        assert!((d0 + 1e-3).abs() < 1e-9);
        assert!((d1 - 1e-3).abs() < 1e-9);
        assert_eq!(net.params()[1], before.params()[1]);
        assert_eq!(adam.steps_taken(), 1);
    }
}
