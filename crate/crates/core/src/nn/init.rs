//! Weight initialisers. All draws go through a caller-supplied RNG so that a
//! network is a pure function of its seed.

use crate::Float;
use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

/// Kaiming-uniform with negative slope `sqrt(5)`, i.e. `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn kaiming_uniform<F: Float, R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    rng: &mut R,
) -> ArrayD<F> {
    uniform(shape, 1.0 / (fan_in.max(1) as f64).sqrt(), rng)
}

pub fn uniform<F: Float, R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> ArrayD<F> {
    ArrayD::from_shape_simple_fn(IxDyn(shape), || {
        F::of(rng.random_range(-bound..=bound))
    })
}

pub fn normal<F: Float, R: Rng + ?Sized>(
    shape: &[usize],
    mean: f64,
    std: f64,
    rng: &mut R,
) -> ArrayD<F> {
    let dist = Normal::new(mean, std).expect("finite std");
    ArrayD::from_shape_simple_fn(IxDyn(shape), || F::of(dist.sample(rng)))
}

pub fn standard_normal_vec<F: Float, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<F> {
    (0..n)
        .map(|_| F::of(StandardNormal.sample(rng)))
        .collect()
}
