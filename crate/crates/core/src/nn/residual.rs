use super::activation::ActCache;
use super::sequential::SeqCache;
use super::{join, Activation, Mode, Module, Sequential, Tensor, Visitor};
use crate::Float;

/// `post(main(x) + shortcut(x))`; an empty shortcut is the identity.
#[derive(Clone, Debug)]
pub struct Residual<F> {
    pub main: Sequential<F>,
    pub shortcut: Sequential<F>,
    pub post: Activation,
}

pub struct ResidualCache<F> {
    main: SeqCache<F>,
    shortcut: SeqCache<F>,
    post: ActCache<F>,
}

impl<F: Float> Module<F> for Residual<F> {
    type Cache = ResidualCache<F>;

    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> (Tensor<F>, ResidualCache<F>) {
        let (m, main) = self.main.forward(x, mode);
        let (s, shortcut) = self.shortcut.forward(x, mode);
        let (y, post) = Module::<F>::forward(&mut self.post, &(m + s), mode);
        (
            y,
            ResidualCache {
                main,
                shortcut,
                post,
            },
        )
    }

    fn backward(&mut self, cache: &ResidualCache<F>, grad: &Tensor<F>) -> Tensor<F> {
        let g = Module::<F>::backward(&mut self.post, &cache.post, grad);
        let dm = self.main.backward(&cache.main, &g);
        let ds = self.shortcut.backward(&cache.shortcut, &g);
        dm + ds
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<F>) {
        self.main.visit(&join(prefix, "main"), v);
        self.shortcut.visit(&join(prefix, "shortcut"), v);
    }
}
