use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nflow::audit::audit;
use nflow::bijectors::{Bijector, Chain, Layer, LogitSquash, SquareScale1D};
use nflow::data::{
    gen_pipeline_dataset, load_csv, load_pgm, quantize, save_pgm, write_csv, Dataset,
};
use nflow::density::{Base, FlowModel, Uniform1D};
use nflow::training::{coin_mle, write_history_csv, Checkpoint, FlowSpec, TrainConfig, Trainer};
use nflow::Error;

use crate::TrainArgs;

pub const ROUND_TRIP_TOL: f64 = 1e-9;
pub const LOG_DET_TOL: f64 = 1e-4;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Lib(Error),
    Audit(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Audit(_) => 4,
            Failure::Lib(e) => match e {
                Error::NonFiniteLoss { .. }
                | Error::NumericOverflow { .. }
                | Error::OpDomain { .. } => 3,
                _ => 2,
            },
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Audit(m) => f.write_str(m),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn demo_transforms(count: usize, seed: u64, out: &Path) -> Outcome {
    fs::create_dir_all(out)?;
    let sample = gen_pipeline_dataset(count, seed)?;
    let chain = &sample.chain;
    let mut stages = vec![sample.base_draws.clone(), sample.base_draws.clone()];
    for step in chain.steps() {
        let (next, _) = step.forward(stages.last().expect("non-empty"))?;
        stages.push(next);
    }
    for step in chain.steps().iter().rev() {
        let (prev, _) = step.inverse(stages.last().expect("non-empty"))?;
        stages.push(prev);
    }
    for (i, pts) in stages.iter().enumerate() {
        let ds = Dataset::new(pts.clone(), format!("stage {i}"))?;
        write_csv(&ds, out.join(format!("step{i}.csv")))?;
    }
    let err = stages[7].max_abs_diff(&stages[0]);
    println!(
        "wrote step0.csv .. step7.csv ({count} points each) to {}",
        out.display()
    );
    println!("max round-trip error: {err:.3e}");
    Ok(())
}

pub fn disc_model() -> nflow::Result<FlowModel> {
    let chain = Chain::new(vec![Layer::from(SquareScale1D::disc_area()).inverted()])?;
    FlowModel::new(Base::Uniform(Uniform1D::new(5.0, 6.0)?), chain)
}

pub fn demo_disc(out: &Path) -> Outcome {
    let model = disc_model()?;
    let pi = std::f64::consts::PI;
    let (lo, hi) = (25.0 * pi / 4.0, 9.0 * pi);
    let mut csv = String::from("A,p_analytic,p_flow\n");
    let mut worst: f64 = 0.0;
    let mut rows = Vec::with_capacity(100);
    for i in 0..100 {
        let a = lo + (hi - lo) * i as f64 / 99.0;
        let analytic = 1.0 / (a * pi).sqrt();
        let flow = model.log_prob(&[a])?.exp();
        worst = worst.max((analytic - flow).abs());
        csv.push_str(&format!("{a:.16e},{analytic:.16e},{flow:.16e}\n"));
        rows.push((a, flow));
    }
    fs::write(out, csv)?;
    let integral: f64 = rows
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum();
    println!("p(25π/4) = {:.6}", rows[0].1);
    println!("p(9π)    = {:.6}", rows[99].1);
    println!("max |analytic − flow| = {worst:.3e}");
    println!("trapezoid integral = {integral:.6}");
    Ok(())
}

pub fn demo_coin(successes: u64, trials: u64, grid: f64) -> Outcome {
    if successes > trials {
        return Err(usage("--successes must not exceed --trials"));
    }
    if !(grid > 0.0 && grid < 1.0) {
        return Err(usage("--grid must be in (0, 1)"));
    }
    let table = coin_mle(successes, trials, grid)?;
    println!("p,likelihood");
    for (p, l) in &table.rows {
        println!("{p},{l}");
    }
    println!("p_hat = {}", table.p_hat);
    Ok(())
}

fn load_image_dir(dir: &Path, seed: u64) -> Result<Dataset, Failure> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Lib(Error::Invalid(format!(
            "no .pgm files in {}",
            dir.display()
        ))));
    }
    let imgs = paths
        .iter()
        .map(load_pgm)
        .collect::<nflow::Result<Vec<_>>>()?;
    Ok(Dataset::from_images(&imgs, seed)?)
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        learning_rate: a.lr,
        clip_norm: a.clip_norm,
        batch_size: a.batch_size,
        max_steps: a.max_steps,
        seed: a.seed,
        checkpoint_every: a.checkpoint_every,
        eval_every: a.eval_every,
        ..TrainConfig::default()
    }
}

pub fn train(a: TrainArgs) -> Outcome {
    let cfg = train_config(&a);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if a.couplings == 0 || a.hidden == 0 {
        return Err(usage("--couplings and --hidden must be positive"));
    }
    if a.image && !a.data.is_dir() {
        return Err(usage(
            "--image needs --data to be a directory of .pgm files",
        ));
    }
    if !a.image && a.data.is_dir() {
        return Err(usage(
            "--data is a directory; pass --image to train on PGM files",
        ));
    }
    let data = if a.image {
        load_image_dir(&a.data, a.seed)?
    } else {
        load_csv(&a.data)?
    };
    if data.dim() < 2 {
        return Err(Failure::Lib(Error::Invalid(
            "coupling flows need at least 2 columns".into(),
        )));
    }
    let spec = FlowSpec {
        dim: data.dim(),
        couplings: a.couplings,
        hidden: a.hidden,
        lu_mixing: a.lu_mixing,
        logit_eps: a.image.then_some(LogitSquash::DEFAULT_EPS),
    };
    let model = spec.build(a.seed)?;
    fs::create_dir_all(&a.out)?;
    let mut trainer = Trainer::new(model, &data, cfg)?.with_checkpoint_dir(&a.out);
    let initial = trainer.model().mean_nll(trainer.train_set().points())?;
    let outcome = trainer.run();
    write_history_csv(trainer.history(), a.out.join("loss.csv"))?;
    outcome?;
    trainer.checkpoint().save(a.out.join("final.json"))?;
    let fin = trainer.model().mean_nll(trainer.train_set().points())?;
    println!(
        "dataset: {} ({} rows, dim {})",
        data.provenance(),
        data.len(),
        data.dim()
    );
    println!("steps: {}", trainer.steps_done());
    println!("train NLL: {initial:.6} -> {fin:.6}");
    if let Some(v) = trainer.validation_nll()? {
        println!("validation NLL: {v:.6}");
    }
    println!("checkpoint: {}", a.out.join("final.json").display());
    Ok(())
}

fn load_model(path: &Path) -> Result<FlowModel, Failure> {
    Ok(Checkpoint::load(path)?.model()?)
}

fn image_side(model: &FlowModel) -> Option<usize> {
    let first = model.chain().steps().first()?;
    if !matches!(first, Layer::Logit(_)) {
        return None;
    }
    let side = (model.dim() as f64).sqrt().round() as usize;
    (side * side == model.dim()).then_some(side)
}

pub fn sample(checkpoint: &Path, count: usize, seed: u64, out: &Path) -> Outcome {
    let model = load_model(checkpoint)?;
    let x = model.sample(count, seed)?;
    match image_side(&model) {
        Some(side) => {
            fs::create_dir_all(out)?;
            for i in 0..x.rows() {
                let img = quantize(x.row(i), side, side)?;
                save_pgm(&img, out.join(format!("sample_{i:05}.pgm")))?;
            }
            println!("wrote {count} {side}x{side} images to {}", out.display());
        }
        None => {
            write_csv(&Dataset::new(x, "samples")?, out)?;
            println!("wrote {count} samples to {}", out.display());
        }
    }
    Ok(())
}

pub fn logprob(checkpoint: &Path, data: &Path, out: &Path) -> Outcome {
    let model = load_model(checkpoint)?;
    let ds = load_csv(data)?;
    if ds.dim() != model.dim() {
        return Err(Failure::Lib(Error::DimensionMismatch {
            expected: model.dim(),
            found: ds.dim(),
        }));
    }
    let lp = model.log_prob_batch(ds.points())?;
    let mut csv = String::from("log_prob\n");
    for v in &lp {
        csv.push_str(&format!("{v:.16e}\n"));
    }
    fs::write(out, csv)?;
    let mean: f64 = lp.iter().sum::<f64>() / lp.len() as f64;
    println!("rows: {}", lp.len());
    println!("mean NLL: {:.6}", -mean);
    Ok(())
}

pub fn check(checkpoint: &Path, probes: usize, seed: u64) -> Outcome {
    let model = load_model(checkpoint)?;
    let pts = model.sample(probes, seed)?;
    let report = audit(model.chain(), &pts)?;
    println!("probes: {}", report.probes);
    println!(
        "max round-trip error: {:.3e} (limit {ROUND_TRIP_TOL:e})",
        report.max_round_trip
    );
    println!(
        "max log-det relative error: {:.3e} (limit {LOG_DET_TOL:e}, probe {})",
        report.max_log_det_error, report.worst_probe
    );
    if report.passes(ROUND_TRIP_TOL, LOG_DET_TOL) {
        println!("check: pass");
        Ok(())
    } else {
        Err(Failure::Audit(format!(
            "audit failed: round-trip {:.3e}, log-det {:.3e}",
            report.max_round_trip, report.max_log_det_error
        )))
    }
}
