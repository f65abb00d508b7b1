//! End-to-end acceptance run. Prints one `PASS`/`FAIL` line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::f64::consts::{LN_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{
    all_kinds, column_stats, domain_point, fd_grad, fd_log_det, gaussian_baseline_nll,
    random_chain, rel_err,
};
use nflow::bijectors::{Bijector, Chain, Layer, SquareScale1D};
use nflow::data::{dequantize, gen_glyph_dataset, gen_pipeline_dataset, quantize, Dataset};
use nflow::density::{Base, FlowModel, Uniform1D};
use nflow::ndcore::Tensor;
use nflow::rng::CounterRng;
use nflow::training::{coin_mle, loss_and_grads, FlowSpec, TrainConfig, Trainer};

const ROUND_TRIP_TOL: f64 = 1e-9;
const INVERTIBILITY_BUDGET: Duration = Duration::from_secs(30);
const LOG_DET_REL_TOL: f64 = 1e-4;
const LOG_DET_FD_STEP: f64 = 1e-5;
const LOG_DET_POINTS: usize = 5;
const RECOVERY_MEAN_TOL: f64 = 0.05;
const RECOVERY_STD: (f64, f64) = (0.95, 1.05);
const DISC_TOL: f64 = 1e-9;
const DISC_ENDPOINT_TOL: f64 = 5e-7;
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_FD_STEP: f64 = 1e-6;
const LATENT_MEAN_TOL: f64 = 0.1;
const LATENT_STD: (f64, f64) = (0.85, 1.15);
const QUADRATURE: (f64, f64) = (0.98, 1.02);
const TRAINING_BUDGET: Duration = Duration::from_secs(600);
const TRAINING_SEED: u64 = 1;
const IMAGE_BPD_RATIO: f64 = 0.9;
const IMAGE_MAX_STEPS: usize = 3000;
const IMAGE_SEGMENT: usize = 50;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn invertibility() -> Outcome {
    let dims = [2, 4, 8, 16];
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let mut rng = CounterRng::stream(2024, i);
        let dim = dims[rng.below(4)];
        let couplings = 2 + rng.below(7);
        let lu = rng.below(2) == 1;
        let chain = random_chain(dim, couplings, lu, rng.next_u64());
        let x = Tensor::matrix(1000, dim, rng.normals(1000 * dim)).unwrap();
        let (z, _) = chain.forward(&x).unwrap();
        let (back, _) = chain.inverse(&z).unwrap();
        worst = worst.max(back.max_abs_diff(&x));
    }
    let elapsed = start.elapsed();
    outcome(
        worst < ROUND_TRIP_TOL && elapsed < INVERTIBILITY_BUDGET,
        format!(
            "100 chains x 1000 probes: max round-trip {worst:.2e} (< {ROUND_TRIP_TOL:e}), {:.2}s (< {}s)",
            elapsed.as_secs_f64(),
            INVERTIBILITY_BUDGET.as_secs()
        ),
    )
}

fn log_det_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut kinds = std::collections::BTreeSet::new();
    let mut checks = 0;
    for dim in [1, 2, 4, 8] {
        for inst in 0..20u64 {
            let seed = 100 * dim as u64 + inst;
            let mut rng = CounterRng::stream(seed, 1);
            for (kind, layer) in all_kinds(dim, seed) {
                kinds.insert(kind);
                for _ in 0..LOG_DET_POINTS {
                    let x = domain_point(kind, dim, &mut rng);
                    let (_, ld) = layer.forward_point(&x).unwrap();
                    let fd = fd_log_det(&layer, &x, LOG_DET_FD_STEP);
                    worst = worst.max(rel_err(ld, fd));
                    checks += 1;
                }
            }
        }
    }
    outcome(
        worst < LOG_DET_REL_TOL,
        format!(
            "{} kinds, {checks} points over dims 1,2,4,8: max relative error {worst:.2e} (< {LOG_DET_REL_TOL:e})",
            kinds.len()
        ),
    )
}

fn pipeline_recovery() -> Outcome {
    let s = gen_pipeline_dataset(5000, 0).unwrap();
    let mut x = s.dataset.points().clone();
    for step in s.chain.steps().iter().rev() {
        x = step.inverse(&x).unwrap().0;
    }
    let err = x.max_abs_diff(&s.base_draws);
    let stats = column_stats(&x);
    let moments_ok = stats.iter().all(|&(m, sd)| {
        m.abs() <= RECOVERY_MEAN_TOL && (RECOVERY_STD.0..=RECOVERY_STD.1).contains(&sd)
    });
    outcome(
        err < ROUND_TRIP_TOL && moments_ok,
        format!(
            "5000 draws: recovery error {err:.2e}; mean ({:.4}, {:.4}), std ({:.4}, {:.4})",
            stats[0].0, stats[1].0, stats[0].1, stats[1].1
        ),
    )
}

fn disc_density() -> Outcome {
    let chain = Chain::new(vec![Layer::from(SquareScale1D::disc_area()).inverted()]).unwrap();
    let model = FlowModel::new(Base::Uniform(Uniform1D::new(5.0, 6.0).unwrap()), chain).unwrap();
    let (lo, hi) = (25.0 * PI / 4.0, 9.0 * PI);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let a = lo + (hi - lo) * i as f64 / 99.0;
        let p = model.log_prob(&[a]).unwrap().exp();
        worst = worst.max((p - 1.0 / (a * PI).sqrt()).abs());
    }
    let p_lo = model.log_prob(&[lo]).unwrap().exp();
    let p_hi = model.log_prob(&[hi]).unwrap().exp();
    let ends_ok =
        (p_lo - 0.127324).abs() < DISC_ENDPOINT_TOL && (p_hi - 0.106103).abs() < DISC_ENDPOINT_TOL;
    outcome(
        worst < DISC_TOL && ends_ok,
        format!("100 grid points: max error {worst:.2e}; p(25π/4) = {p_lo:.6}, p(9π) = {p_hi:.6}"),
    )
}

fn coin() -> Outcome {
    let t = coin_mle(2, 4, 0.1).unwrap();
    let at = |p: f64| {
        t.rows
            .iter()
            .find(|(q, _)| (q - p).abs() < 1e-12)
            .map(|r| r.1)
            .unwrap_or(f64::NAN)
    };
    let (l4, l5, l6) = (at(0.4), at(0.5), at(0.6));
    outcome(
        l4 == 0.0576 && l5 == 0.0625 && l6 == 0.0576 && t.p_hat == 0.5,
        format!(
            "L(0.4) = {l4}, L(0.5) = {l5}, L(0.6) = {l6}, p_hat = {}",
            t.p_hat
        ),
    )
}

fn gradient_check() -> Outcome {
    let model = FlowModel::standard(random_chain(2, 2, false, 17));
    let mut rng = CounterRng::new(2);
    let batch = Tensor::matrix(8, 2, rng.normals(16)).unwrap();
    let lg = loss_and_grads(&model, &batch).unwrap();
    let sizes: Vec<usize> = model.chain().params().iter().map(|p| p.len()).collect();
    let flat: Vec<f64> = model
        .chain()
        .params()
        .iter()
        .flat_map(|p| p.data().to_vec())
        .collect();
    let loss_at = |theta: &[f64]| {
        let mut m = model.clone();
        let mut off = 0;
        for (p, n) in m.chain_mut().params_mut().into_iter().zip(&sizes) {
            p.data_mut().copy_from_slice(&theta[off..off + n]);
            off += n;
        }
        m.mean_nll(&batch).unwrap()
    };
    let want = fd_grad(loss_at, &flat, GRAD_FD_STEP);
    let got: Vec<f64> = lg.grads.iter().flat_map(|g| g.data().to_vec()).collect();
    let worst = got
        .iter()
        .zip(&want)
        .map(|(a, b)| rel_err(*a, *b))
        .fold(0.0, f64::max);
    outcome(
        got.len() == want.len() && worst < GRAD_REL_TOL,
        format!(
            "{} parameters: max relative error {worst:.2e} (< {GRAD_REL_TOL:e})",
            got.len()
        ),
    )
}

fn training() -> Outcome {
    let start = Instant::now();
    let data = gen_pipeline_dataset(5000, 7).unwrap().dataset;
    let model = FlowSpec::new(2, 6, 64).build(TRAINING_SEED).unwrap();
    let cfg = TrainConfig {
        seed: TRAINING_SEED,
        ..TrainConfig::default()
    };
    let base = FlowModel::standard(Chain::identity(2));
    let mut t = Trainer::new(model, &data, cfg).unwrap();
    let first_batch = t.train_set().select(&t.batch_indices(0)).unwrap();
    let base_nll = base.mean_nll(&first_batch).unwrap();
    let r0 = t.step().unwrap();
    let a = r0.train_nll == base_nll;
    t.run().unwrap();

    let baseline = gaussian_baseline_nll(t.train_set().points());
    let final_nll = t.model().mean_nll(t.train_set().points()).unwrap();
    let b = final_nll <= baseline;

    let fresh = gen_pipeline_dataset(1000, 1000 + TRAINING_SEED)
        .unwrap()
        .dataset;
    let (z, _) = t.model().chain().forward(fresh.points()).unwrap();
    let stats = column_stats(&z);
    let c = stats
        .iter()
        .all(|&(m, sd)| m.abs() <= LATENT_MEAN_TOL && (LATENT_STD.0..=LATENT_STD.1).contains(&sd));

    let q = t
        .model()
        .grid_integral(&[(-60.0, 60.0), (-60.0, 60.0)], 0.25)
        .unwrap();
    let d = (QUADRATURE.0..=QUADRATURE.1).contains(&q);
    let elapsed = start.elapsed();
    outcome(
        a && b && c && d && elapsed <= TRAINING_BUDGET,
        format!(
            "(a) step-0 loss {} base NLL [{}]; (b) final NLL {final_nll:.4} vs Gaussian {baseline:.4} [{}]; \
             (c) latent mean ({:.3}, {:.3}) std ({:.3}, {:.3}) [{}]; (d) quadrature {q:.5} [{}]; {} steps in {:.1}s",
            if a { "==" } else { "!=" },
            ok(a),
            ok(b),
            stats[0].0,
            stats[1].0,
            stats[0].1,
            stats[1].1,
            ok(c),
            ok(d),
            t.steps_done(),
            elapsed.as_secs_f64()
        ),
    )
}

fn image_path() -> Outcome {
    let start = Instant::now();
    let images = gen_glyph_dataset(2000, 16, 5).unwrap();
    let data = Dataset::from_images(&images, 11).unwrap();
    let dim = data.dim() as f64;
    let bpd = |nll: f64| (nll + dim * 256f64.ln()) / (dim * LN_2);
    let mut spec = FlowSpec::new(data.dim(), 6, 64);
    spec.logit_eps = Some(0.05);
    let model = spec.build(1).unwrap();
    let cfg = TrainConfig {
        seed: 1,
        max_steps: 0,
        eval_every: 0,
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(model, &data, cfg).unwrap();
    let held_out = t
        .validation_set()
        .expect("2000 rows leave a validation split")
        .points()
        .clone();
    let initial = bpd(t.model().mean_nll(&held_out).unwrap());
    let mut current = initial;
    while t.steps_done() < IMAGE_MAX_STEPS && current > IMAGE_BPD_RATIO * initial {
        for _ in 0..IMAGE_SEGMENT {
            t.step().unwrap();
        }
        current = bpd(t.model().mean_nll(&held_out).unwrap());
    }
    let dropped = current <= IMAGE_BPD_RATIO * initial;

    let chain = t.model().chain();
    let mut mismatches = 0;
    for (i, img) in images.iter().enumerate() {
        let x = Tensor::matrix(1, data.dim(), dequantize(img, 11 + i as u64)).unwrap();
        let (z, _) = chain.forward(&x).unwrap();
        let (back, _) = chain.inverse(&z).unwrap();
        let restored = quantize(back.row(0), img.width(), img.height()).unwrap();
        if restored != *img {
            mismatches += 1;
        }
    }
    outcome(
        dropped && mismatches == 0,
        format!(
            "held-out bpd {initial:.3} -> {current:.3} after {} steps ({:.1}% drop, need >= 10%); \
             {mismatches}/{} images differ after round trip; {:.1}s",
            t.steps_done(),
            100.0 * (1.0 - current / initial),
            images.len(),
            start.elapsed().as_secs_f64()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("invertibility suite", invertibility),
        ("log-det oracle", log_det_oracle),
        ("stretch-rotate-shear recovery", pipeline_recovery),
        ("disc area density", disc_density),
        ("coin grid MLE", coin),
        ("end-to-end gradient check", gradient_check),
        ("training on pipeline samples", training),
        ("image path", image_path),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "acceptance {} {name}: {} | {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance 9 full-scale image training: NOT REPRODUCED | 512x128 Glow training on \
         108,416 bridge photographs and its generated figures are out of reach at desk scale and \
         carry no quantitative metrics; criteria 1-8 stand in for them"
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
