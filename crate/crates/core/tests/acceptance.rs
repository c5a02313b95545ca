//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any fails. `ACCEPTANCE_ONLY=1,5` restricts the run.

mod common;

use anomaly_gan::data::{generate_phantoms, PhantomConfig};
use anomaly_gan::experiments::{run_experiment, Experiment, ExperimentConfig};
use anomaly_gan::metrics::{delong_paired, roc_auc, youden_point};
use anomaly_gan::networks::{
    images_to_tensor, ArchConfig, ArchitectureTag, Discriminator, Model, NetworkBundle, GRADCAM_LAYER,
};
use anomaly_gan::nn::{Layer, Mode, Param, Sequential, SpectralNorm, Visitor};
use anomaly_gan::scoring::{
    gradcampp_map, read_scores_csv, score_attn, score_rec, target_layer_gradients, AttributionMap, MapSource,
    ScoreType,
};
use anomaly_gan::training::losses::{kl_analytic, mse, neg_log, neg_log1m, recon_l1, recon_l2, svdd_distance, LOG_EPS};
use anomaly_gan::training::*;
use anomaly_gan::Error;
use nalgebra::DMatrix;
use ndarray::{Array2, Array3, Array4, ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Check = fn() -> Result<String, String>;

/// Channel width of the networks in the end-to-end separation run. Full
/// width does not fit the time budget on one CPU core.
const SEPARATION_BASE_CHANNELS: usize = 16;
/// Median s_attn AUC the separation run must reach.
const SEPARATION_AUC: f64 = 0.85;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let criteria: [(usize, &str, Check, Option<Duration>); 9] = [
        (1, "metrics oracle equivalence", metrics_oracles, Some(Duration::from_secs(10))),
        (2, "DeLong correctness", delong, Some(Duration::from_secs(10))),
        (3, "gradient suite", gradients, Some(Duration::from_secs(60))),
        (4, "analytic loss values", loss_values, None),
        (5, "score invariants", score_invariants, None),
        (6, "training-loop contract", training_contract, Some(Duration::from_secs(300))),
        (7, "end-to-end phantom separation", separation, None),
        (8, "subject fusion consistency", fusion, None),
        (9, "determinism", determinism, None),
    ];
    let mut failed = 0;
    for (id, name, check, budget) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.1?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("criterion {id} PASS  {name} ({elapsed:.1?}) {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {id} FAIL  {name} ({elapsed:.1?}) {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn metrics_oracles() -> Result<String, String> {
    let mut rng = common::rng(101);
    for k in 0..200 {
        let (scores, labels) = common::random_instance(&mut rng, 50);
        let curve = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        let brute = common::auc_by_pairs(&scores, &labels);
        ensure!(curve.auc == brute, "instance {k}: auc {} vs {brute}", curve.auc);
        let op = youden_point(&curve, &scores, &labels).map_err(|e| e.to_string())?;
        let b = common::youden_by_enumeration(&scores, &labels);
        let c = op.confusion;
        ensure!(
            op.threshold == b.threshold && (c.tp, c.fp, c.tn, c.fn_) == (b.tp, b.fp, b.tn, b.fn_),
            "instance {k}: youden {op:?} vs {b:?}"
        );
    }
    Ok("200 instances".into())
}

fn delong() -> Result<String, String> {
    let mut rng = common::rng(202);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 50 {
        let (a, labels) = common::random_instance(&mut rng, 30);
        let b: Vec<f64> = labels
            .iter()
            .map(|&l| rng.random_range(0..8) as f64 / 8.0 + if l { 0.05 } else { 0.0 })
            .collect();
        let Ok(r) = delong_paired(&a, &b, &labels) else {
            continue;
        };
        let (_, _, z) = common::delong_structural(&a, &b, &labels);
        worst = worst.max((r.z - z).abs());
        ensure!((r.z - z).abs() <= 1e-10, "z {} vs structural {z}", r.z);
        let swapped = delong_paired(&b, &a, &labels).map_err(|e| e.to_string())?;
        ensure!(swapped.z == -r.z, "z(a,b) = {} but z(b,a) = {}", r.z, swapped.z);
        let t: Vec<f64> = a.iter().map(|v| (2.0 * v).exp() - 3.0).collect();
        ensure!(
            matches!(delong_paired(&a, &t, &labels), Err(Error::DegenerateVariance)),
            "monotone pairing did not raise the degenerate-variance error"
        );
        done += 1;
    }
    Ok(format!("50 instances, max |dz| {worst:.1e}"))
}

struct Grads(Vec<(String, Vec<f64>)>);

impl Visitor<f64> for Grads {
    fn param(&mut self, name: &str, p: &mut Param<f64>) {
        self.0.push((name.to_string(), p.grad.iter().copied().collect()));
    }
}

struct Apply<G>(G);

impl<G: FnMut(&str, &mut Param<f64>)> Visitor<f64> for Apply<G> {
    fn param(&mut self, name: &str, p: &mut Param<f64>) {
        (self.0)(name, p)
    }
}

fn each_param(b: &mut NetworkBundle<f64>, f: impl FnMut(&str, &mut Param<f64>)) {
    b.visit(&mut Apply(f));
}

fn nudge(b: &mut NetworkBundle<f64>, target: &str, i: usize, delta: f64) {
    each_param(b, |n, p| {
        if n == target {
            p.value.as_slice_mut().unwrap()[i] += delta;
        }
    });
}

/// Compares the gradients left by `analytic` on every parameter under
/// `checked` with central differences of `loss`. Parameters outside
/// `checked` and `ignored` must receive no gradient.
fn fd_check(
    what: &str,
    b: &mut NetworkBundle<f64>,
    checked: &[&str],
    ignored: &[&str],
    analytic: impl FnOnce(&mut NetworkBundle<f64>),
    mut loss: impl FnMut(&mut NetworkBundle<f64>) -> f64,
) -> Result<usize, String> {
    each_param(b, |_, p| p.zero_grad());
    analytic(b);
    let mut grads = Grads(Vec::new());
    b.visit(&mut grads);
    let mut compared = 0;
    for (name, g) in &grads.0 {
        if ignored.iter().any(|c| name.starts_with(c)) {
            continue;
        }
        if !checked.iter().any(|c| name.starts_with(c)) {
            ensure!(g.iter().all(|&v| v == 0.0), "{what}: {name} received a gradient");
            continue;
        }
        for k in 0..g.len().min(3) {
            let i = (k * 7919 + 3) % g.len();
            // A leaky unit within `h` of its kink spoils one step size.
            let mut seen = Vec::new();
            let ok = [1e-6, 1e-7].into_iter().any(|h| {
                nudge(b, name, i, h);
                let lp = loss(b);
                nudge(b, name, i, -2.0 * h);
                let lm = loss(b);
                nudge(b, name, i, h);
                let numeric = (lp - lm) / (2.0 * h);
                seen.push(numeric);
                let floor = 1e-6 + 1e-8 * lp.abs().max(1.0);
                (g[i] - numeric).abs() <= 1e-3 * g[i].abs().max(numeric.abs()) + floor
            });
            ensure!(ok, "{what}: {name}[{i}] analytic {} vs numeric {seen:?}", g[i]);
            compared += 1;
        }
    }
    ensure!(compared > 0, "{what}: nothing compared");
    Ok(compared)
}

fn stub(tag: ArchitectureTag) -> NetworkBundle<f64> {
    let arch = ArchConfig {
        latent_dim: 4,
        base_channels: 2,
    };
    NetworkBundle::build(tag, arch, 5).unwrap()
}

fn images(n: usize, seed: u64) -> Array4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array4::from_shape_simple_fn((n, 1, 64, 64), || rng.random_range(-1.0..1.0))
}

fn latents(n: usize, d: usize, seed: u64) -> Array4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::StandardNormal;
    Array4::from_shape_simple_fn((n, d, 1, 1), || rng.sample::<f64, _>(normal))
}

macro_rules! model {
    ($b:expr, $variant:ident) => {
        match &mut $b.model {
            Model::$variant(m) => m,
            _ => unreachable!(),
        }
    };
}

fn gradients() -> Result<String, String> {
    let mut n = 0;
    let x = images(2, 3);
    let z = latents(2, 4, 4);

    let mut b = stub(ArchitectureTag::AlphaGan);
    n += fd_check(
        "L_E + L_G",
        &mut b,
        &["encoder", "generator"],
        &[],
        |b| {
            joint_eg_grads(model!(b, AlphaGan), &x, &z, 25.0, 1, Mode::PROBE);
        },
        |b| joint_eg_grads(model!(b, AlphaGan), &x, &z, 25.0, 1, Mode::PROBE).combined(),
    )?;
    n += fd_check(
        "L_G",
        &mut b,
        &["generator"],
        &[],
        |b| {
            generator_grads(model!(b, AlphaGan), &x, &z, 25.0, 1, Mode::PROBE);
        },
        |b| generator_grads(model!(b, AlphaGan), &x, &z, 25.0, 1, Mode::PROBE).0,
    )?;
    let (_, out) = generator_grads(model!(b, AlphaGan), &x, &z, 25.0, 1, Mode::PROBE);
    n += fd_check(
        "L_D",
        &mut b,
        &["discriminator"],
        &[],
        |b| {
            discriminator_grads(model!(b, AlphaGan), &x, &out.xhat, &out.xtilde, Mode::PROBE);
        },
        |b| discriminator_grads(model!(b, AlphaGan), &x, &out.xhat, &out.xtilde, Mode::PROBE).0,
    )?;
    n += fd_check(
        "L_LD",
        &mut b,
        &["latent_discriminator"],
        &[],
        |b| {
            latent_discriminator_grads(model!(b, AlphaGan), &out.zhat, &z, Mode::PROBE);
        },
        |b| latent_discriminator_grads(model!(b, AlphaGan), &out.zhat, &z, Mode::PROBE),
    )?;

    let mut b = stub(ArchitectureTag::VaeGan);
    let eps = latents(2, 4, 6);
    let zp = latents(2, 4, 7);
    let run = |b: &mut NetworkBundle<f64>| {
        vae_grads(model!(b, VaeGan), &x, &eps, &zp, 10.0, 5.0, 2, Mode::PROBE).unwrap().0
    };
    n += fd_check("VAE encoder", &mut b, &["encoder"], &["generator"], |b| {
        run(b);
    }, |b| run(b).encoder)?;
    n += fd_check("VAE generator", &mut b, &["generator"], &["encoder"], |b| {
        run(b);
    }, |b| run(b).generator)?;

    let mut b = stub(ArchitectureTag::DeepSvdd);
    model!(b, DeepSvdd).center = ArrayD::from_elem(IxDyn(&[4]), 0.3);
    n += fd_check(
        "SVDD",
        &mut b,
        &["encoder"],
        &[],
        |b| {
            svdd_grads(model!(b, DeepSvdd), &x, 1e-2, Mode::PROBE);
        },
        |b| svdd_grads(model!(b, DeepSvdd), &x, 1e-2, Mode::PROBE).0,
    )?;

    let mut b = stub(ArchitectureTag::Dcae);
    n += fd_check(
        "DCAE",
        &mut b,
        &["encoder", "decoder"],
        &[],
        |b| {
            dcae_grads(model!(b, Dcae), &x, Mode::PROBE);
        },
        |b| dcae_grads(model!(b, Dcae), &x, Mode::PROBE),
    )?;

    let mut b = stub(ArchitectureTag::AlphaGan);
    n += gradcam_gradients(&mut model!(b, AlphaGan).discriminator)?;
    Ok(format!("{n} parameter and activation entries"))
}

fn gradcam_gradients(d: &mut Discriminator<f64>) -> Result<usize, String> {
    let x = images(2, 9);
    let (act, _, g) = target_layer_gradients(d, &x, GRADCAM_LAYER).map_err(|e| e.to_string())?;
    let (_, rest) = d.split(GRADCAM_LAYER).map_err(|e| e.to_string())?;
    let mut n = 0;
    for (idx, &gv) in g.indexed_iter().step_by(3) {
        let h = 1e-6;
        let mut p = act.clone();
        p[idx] += h;
        let lp = d.forward_from(&p, rest.clone(), Mode::EVAL).0[[idx.0, 0, 0, 0]];
        p[idx] -= 2.0 * h;
        let lm = d.forward_from(&p, rest.clone(), Mode::EVAL).0[[idx.0, 0, 0, 0]];
        let numeric = (lp - lm) / (2.0 * h);
        ensure!(
            (gv - numeric).abs() <= 1e-3 * gv.abs().max(numeric.abs()) + 1e-9,
            "GradCAM++ target gradient at {idx:?}: {gv} vs {numeric}"
        );
        n += 1;
    }
    Ok(n)
}

fn close(what: &str, got: f64, want: f64) -> Result<(), String> {
    ensure!((got - want).abs() <= 1e-9, "{what}: {got} vs {want}");
    Ok(())
}

fn loss_values() -> Result<String, String> {
    let x = Array4::from_shape_vec((1, 1, 2, 2), vec![1.0, -1.0, 0.0, 0.5]).unwrap();
    let zero = Array4::zeros((1, 1, 2, 2));
    close("L1 reconstruction", recon_l1(&x, &zero, 1.0).0, 1.25)?;
    close("L2 reconstruction", recon_l2(&x, &zero, 2.0).0, 1.125)?;
    close("MSE", mse(&x, &zero).0, 2.25 / 4.0)?;
    let half = Array4::<f64>::zeros((4, 1, 1, 1));
    close("-log D at 0.5", neg_log(&half, 1.0).0, LN_2)?;
    close("-log(1-D) at 0.5", neg_log1m(&half, 2.0).0, 2.0 * LN_2)?;
    let saturated = Array4::from_elem((1, 1, 1, 1), -200.0);
    close("clamped log", neg_log(&saturated, 1.0).0, -LOG_EPS.ln())?;
    close("KL(1, 1)", kl_analytic(&[1.0], &[1.0]).unwrap(), 0.5)?;
    close("KL(0, 2)", kl_analytic(&[0.0], &[2.0]).unwrap(), 1.5 - 2f64.ln())?;
    let f = Array4::from_shape_vec((2, 2, 1, 1), vec![1.0, 0.0, 0.0, 2.0]).unwrap();
    close("SVDD distance", svdd_distance(&f, &[0.0, 1.0]).0, 1.5)?;

    // Zero output heads put every discriminator at 0.5.
    let mut b = stub(ArchitectureTag::AlphaGan);
    each_param(&mut b, |n, p| {
        if n.starts_with("discriminator.head") || n.starts_with("latent_discriminator.logit") {
            p.value.fill(0.0);
        }
    });
    let x = images(2, 1);
    let z = latents(2, 4, 2);
    let m = model!(b, AlphaGan);
    let (l_d, probs) = discriminator_grads(m, &x, &x, &x, Mode::PROBE);
    close("L_D", l_d, 4.0 * LN_2)?;
    ensure!(probs.iter().all(|&p| p == 0.5), "D outputs {probs:?}");
    close("L_LD", latent_discriminator_grads(m, &z, &z, Mode::PROBE), 2.0 * LN_2)?;
    close("L_G without reconstruction", generator_grads(m, &x, &z, 0.0, 1, Mode::PROBE).0, 2.0 * LN_2)?;
    let (_, out) = generator_grads(m, &x, &z, 0.0, 1, Mode::PROBE);
    let rec = recon_l1(&x, &out.xhat, 25.0).0;
    let eg = joint_eg_grads(m, &x, &z, 25.0, 1, Mode::PROBE);
    close("L_E", eg.encoder, rec + LN_2)?;
    close("L_G", eg.generator, rec + 2.0 * LN_2)?;
    Ok("all cases within 1e-9".into())
}

fn random_image(rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((64, 64), || rng.random::<f64>())
}

fn score_invariants() -> Result<String, String> {
    let mut rng = common::rng(505);
    for _ in 0..50 {
        let (x, xhat) = (random_image(&mut rng), random_image(&mut rng));
        let a = Array3::from_shape_simple_fn((4, 4, 4), || rng.random_range(0.0..2.0));
        let g = Array3::from_shape_simple_fn((4, 4, 4), || rng.random_range(-1.0..1.0));
        let sm = gradcampp_map(a.view(), g.view(), rng.random_range(-3.0..3.0)).map_err(|e| e.to_string())?;
        ensure!(sm.iter().all(|&v| v >= 0.0), "negative map entry");
        let values = anomaly_gan::data::resize_bilinear(&sm, 64, 64);
        let map = AttributionMap {
            values,
            source: MapSource::Combined,
        };
        ensure!(score_attn(&x, &x, &map).unwrap() == 0.0, "s_attn(x, x) != 0");
        ensure!(score_rec(&x, &x).unwrap() == 0.0, "s_rec(x, x) != 0");
        let s = score_attn(&x, &xhat, &map).unwrap();
        for c in [1e-4, 0.37, 3.0, 1e5] {
            let scaled = AttributionMap {
                values: &map.values * c,
                source: map.source,
            };
            let sc = score_attn(&x, &xhat, &scaled).unwrap();
            ensure!((s - sc).abs() <= 1e-10 * s.abs(), "s_attn {s} vs {sc} with M scaled by {c}");
        }
    }
    for _ in 0..100 {
        // Integer-valued scores, so that no two distinct scores round to the
        // same value under the transforms.
        let (scores, labels) = common::random_instance(&mut rng, 50);
        let scores: Vec<f64> = scores.iter().map(|s| (s * 1320.0).round()).collect();
        let auc = roc_auc(&scores, &labels).unwrap().auc;
        for t in [
            scores.iter().map(|s| (s / 100.0).exp()).collect::<Vec<_>>(),
            scores.iter().map(|s| 7.0 * s - 2.0).collect(),
            scores.iter().map(|s| (s - 500.0).powi(3)).collect(),
        ] {
            ensure!(roc_auc(&t, &labels).unwrap().auc == auc, "AUC changed under a monotone transform");
        }
    }
    ensure!(kl_analytic(&[0.0; 8], &[1.0; 8]).unwrap() == 0.0, "KL(0, 1) != 0");
    for _ in 0..1000 {
        let m: Vec<f64> = (0..4).map(|_| rng.random_range(-4.0..4.0)).collect();
        let s: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..6.0)).collect();
        let kl = kl_analytic(&m, &s).unwrap();
        ensure!(kl >= 0.0, "KL({m:?}, {s:?}) = {kl}");
    }
    Ok(String::new())
}

/// Largest singular value of every spectrally normalised weight, as the
/// next training forward pass applies it (one power iteration on the
/// current weight).
fn spectral_norms(s: &Sequential<f32>) -> Vec<(String, f64)> {
    let sigma = |w: &ArrayD<f32>, sn: &SpectralNorm<f32>| {
        let w = w.view().into_shape_with_order((w.shape()[0], w.len() / w.shape()[0])).unwrap();
        let mut sn = sn.clone();
        sn.power_iteration(w, 1);
        let (w, _) = sn.normalized(w);
        let m = DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| w[[i, j]] as f64);
        m.singular_values().max()
    };
    s.layers
        .iter()
        .filter_map(|(name, layer)| match layer {
            Layer::Conv(c) => Some((name.clone(), sigma(&c.weight.value, c.spectral.as_ref()?))),
            Layer::ConvT(c) => Some((name.clone(), sigma(&c.weight.value, c.spectral.as_ref()?))),
            _ => None,
        })
        .collect()
}

fn training_contract() -> Result<String, String> {
    let frames = generate_phantoms(&PhantomConfig::default(), 64, 0, 606).map_err(|e| e.to_string())?;
    let views: Vec<_> = frames.iter().map(|f| f.pixels().view()).collect();
    let batches: Vec<_> = views
        .chunks(16)
        .map(|c| images_to_tensor::<f32>(c).unwrap())
        .collect();
    let cfg = TrainConfig {
        batch_size: 16,
        seed: 6,
        ..TrainConfig::default()
    };
    let mut bundle = NetworkBundle::<f32>::build(ArchitectureTag::AlphaGan, ArchConfig::default(), 6)
        .map_err(|e| e.to_string())?;
    let m = model!(bundle, AlphaGan);
    let mut trainer = AlphaGanTrainer::new(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_sigma: f64 = 0.0;
    let mut d_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut violations = Vec::new();
    for it in 0..200 {
        let values: BTreeMap<_, _> = trainer.step(m, &batches[it % batches.len()], &mut rng).into_iter().collect();
        ensure!(values.values().all(|v| v.is_finite()), "iteration {it}: non-finite loss {values:?}");
        d_range = (d_range.0.min(values["D_min"]), d_range.1.max(values["D_max"]));
        ensure!(
            values["D_min"] > 0.0 && values["D_max"] < 1.0,
            "iteration {it}: discriminator outputs reach {d_range:?}"
        );
        for (name, s) in spectral_norms(&m.encoder).into_iter().chain(spectral_norms(&m.generator)) {
            worst_sigma = worst_sigma.max(s);
            if s > 1.01 {
                violations.push((it, name, s));
            }
        }
    }
    let steps = (trainer.opt_g.steps, trainer.opt_e.steps, trainer.opt_d.steps, trainer.opt_ld.steps);
    ensure!(steps == (400, 200, 200, 200), "G:E:D:LD steps {steps:?}");
    if let (Some(first), Some(last)) = (violations.first(), violations.last()) {
        return Err(format!(
            "{} spectral norms above 1.01 between iterations {} and {} (max {worst_sigma:.4}, first {} = {:.4}); \
             losses finite, D outputs in [{:.3e}, {:.6}], step counts {steps:?}",
            violations.len(),
            first.0,
            last.0,
            first.1,
            first.2,
            d_range.0,
            d_range.1
        ));
    }
    Ok(format!(
        "max sigma {worst_sigma:.4}, D outputs in [{:.3e}, {:.6}]",
        d_range.0, d_range.1
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn separation() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        experiment: Experiment::Exp1,
        seeds: vec![0, 1, 2, 3, 4],
        epochs: 50,
        base_channels: SEPARATION_BASE_CHANNELS,
        n_train: 500,
        n_test_normal: 93,
        n_test_abnormal: 93,
        top_k: 0,
        out_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let aucs = |t: ScoreType| -> Vec<f64> {
        report.score_types[t.as_str()].per_seed.values().map(|u| u.auc).collect()
    };
    let (attn, discr) = (aucs(ScoreType::Attn), aucs(ScoreType::Discr));
    let (ma, md) = (median(attn.clone()), median(discr.clone()));
    let detail = format!("median s_attn AUC {ma:.4} {attn:.3?}, median s_discr AUC {md:.4} {discr:.3?}");
    ensure!(ma >= SEPARATION_AUC && ma >= md, "{detail}");
    Ok(detail)
}

fn fusion() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        experiment: Experiment::Exp3,
        seeds: vec![0, 1],
        epochs: 1,
        batch_size: 16,
        base_channels: 4,
        latent_dim: 16,
        n_train: 32,
        n_test_normal: 20,
        n_subjects: 12,
        n_subject_frames: 30,
        top_k: 0,
        out_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let frames = read_scores_csv(&dir.path().join("scores.csv")).map_err(|e| e.to_string())?;
    ensure!(report.samples.total == 32, "{} evaluation units", report.samples.total);
    for (seed, unit) in &report.primary().per_seed {
        let mut subjects: BTreeMap<&str, (f64, usize, bool)> = BTreeMap::new();
        for r in frames
            .iter()
            .filter(|r| r.score_type == ScoreType::Attn && r.seed.to_string() == *seed)
        {
            let e = subjects.entry(&r.frame.subject_id).or_insert((0.0, 0, r.label.is_abnormal()));
            e.0 += r.normalized.unwrap();
            e.1 += 1;
        }
        let scores: Vec<f64> = subjects.values().map(|(s, n, _)| s / *n as f64).collect();
        let labels: Vec<bool> = subjects.values().map(|v| v.2).collect();
        let manual = roc_auc(&scores, &labels).map_err(|e| e.to_string())?.auc;
        ensure!(manual == unit.auc, "seed {seed}: pipeline AUC {} vs manual {manual}", unit.auc);
    }
    Ok(format!("{} subjects", report.samples.total))
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        experiment: Experiment::Exp1,
        seeds: vec![0, 1],
        epochs: 2,
        batch_size: 8,
        base_channels: 4,
        latent_dim: 16,
        n_train: 24,
        n_test_normal: 10,
        n_test_abnormal: 10,
        compare: vec!["discr".into()],
        out_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let run = || -> Result<Vec<u8>, String> {
        run_experiment(&cfg).map_err(|e| e.to_string())?;
        std::fs::read(dir.path().join("report.json")).map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    ensure!(a == b, "report.json differs between identical runs");
    Ok(format!("{} bytes identical", a.len()))
}
