use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use polycf::diagnostics::{
    build_ablation, transfer_kernel, verify_rank_bound, verify_theorem2, AblationVariant,
    EmbeddingSim, TransferOptions,
};
use polycf::evaluation::{evaluate_with, score_user, top_k};
use polycf::synthetic::{block_dataset, random_interactions, BlockConfig};
use polycf::training::write_loss_log;
use polycf::{
    load_dataset, train as train_filter, truncated_svd, Checkpoint, Dataset, FilterSpec,
    InteractionMatrix, KernelInit, LowPassProjector, PolyCfError, TrainConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

type Result<T = ()> = std::result::Result<T, CliError>;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result {
    fs::write(path, contents).map_err(|e| PolyCfError::io(path, e).into())
}

fn ensure_dir(path: &Path) -> Result {
    fs::create_dir_all(path).map_err(|e| PolyCfError::io(path, e).into())
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn out(text: &str) -> Result {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(PolyCfError::io("<stdout>", e).into()),
        _ => Ok(()),
    }
}

fn short_hash(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0]);
    }
    hex::encode(&h.finalize()[..8])
}

fn dataset(cfg: &RunConfig) -> Result<Dataset> {
    if let Some(train) = cfg.optional_path("train_file") {
        let test = cfg
            .optional_path("test_file")
            .ok_or_else(|| CliError::Usage("train_file needs test_file".into()))?;
        return Ok(load_dataset(train, test)?);
    }
    let name = cfg.raw("dataset");
    if name == "synthetic" {
        let seed = cfg.get("synthetic_seed")?;
        return Ok(block_dataset(&BlockConfig {
            seed,
            ..Default::default()
        })?);
    }
    let dir = PathBuf::from(cfg.raw("data_dir")).join(name);
    Ok(load_dataset(dir.join("train.txt"), dir.join("test.txt"))?)
}

/// Loads the projector from the cache keyed by (dataset hash, s, seed), or
/// computes and stores it. A cached file of the wrong shape is rebuilt.
fn projector(
    cfg: &RunConfig,
    ds: &Dataset,
    s: usize,
    seed: u64,
) -> Result<Option<LowPassProjector<f64>>> {
    if s == 0 {
        return Ok(None);
    }
    let dir = cfg.cache_dir();
    let path = dir.join(format!("svd-{}-s{s}-seed{seed}.bin", ds.content_hash()));
    if path.exists() {
        match LowPassProjector::load(&path) {
            Ok(p) if p.num_items() == ds.num_items() && p.cutoff() == s => {
                info!("using cached projector {}", path.display());
                return Ok(Some(p));
            }
            Ok(_) => warn!(
                "cached projector {} does not match; rebuilding",
                path.display()
            ),
            Err(e) => warn!(
                "cannot read cached projector {}: {e}; rebuilding",
                path.display()
            ),
        }
    }
    let p = truncated_svd(&ds.train, s, seed)?;
    ensure_dir(&dir)?;
    p.save(&path)?;
    Ok(Some(p))
}

fn train_config(cfg: &RunConfig) -> Result<TrainConfig> {
    let c = TrainConfig {
        learning_rate: cfg.get("lr")?,
        epochs: cfg.get("epochs")?,
        batch_users: cfg.get("batch_users")?,
        noise_eps: cfg.get("noise_eps")?,
        kernel_dropout: cfg.get("dropout")?,
        negatives_per_positive: cfg.get("negatives")?,
        rng_seed: cfg.get("seed")?,
        init_jitter: cfg.get("init_jitter")?,
        batches_per_epoch: cfg.batches_per_epoch()?,
        deterministic: !cfg.flag("fast")?,
        validate: cfg.flag("validate")?,
        eval_k: cfg.get("k")?,
    };
    c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(c)
}

fn filter_spec(cfg: &RunConfig, ds: &Dataset) -> Result<FilterSpec<f64>> {
    let omega: f64 = cfg.get("omega")?;
    let s = if omega == 0.0 { 0 } else { cfg.get("s")? };
    Ok(FilterSpec {
        basis: cfg.basis()?,
        order: cfg.get("K")?,
        gammas: cfg.gammas()?,
        omega,
        low_pass: projector(cfg, ds, s, cfg.get("seed")?)?,
        init: KernelInit::JitteredIdentity,
        trainable: true,
    })
}

fn load_checkpoint(path: &Path, ds: &Dataset) -> Result<Checkpoint> {
    let ckpt = Checkpoint::load(path)?;
    if ckpt.dataset_hash != ds.content_hash() {
        warn!(
            "checkpoint was trained on dataset {} but {} is {}; evaluating in transfer mode",
            ckpt.dataset_hash,
            ds.name,
            ds.content_hash()
        );
    }
    Ok(ckpt)
}

fn json_text(value: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value).map_err(PolyCfError::from)? + "\n")
}

pub fn train(cfg: &RunConfig) -> Result {
    let ds = dataset(cfg)?;
    let tc = train_config(cfg)?;
    let spec = filter_spec(cfg, &ds)?;
    let out_dir = cfg.output_dir();
    ensure_dir(&out_dir)?;
    let hash = cfg.content_hash(&ds.content_hash());
    let header = format!(
        "# dataset {} ({} users, {} items)\n# dataset_hash = {}\n# config_hash = {hash}\n",
        ds.name,
        ds.num_users(),
        ds.num_items(),
        ds.content_hash()
    );
    write(&out_dir.join("resolved_config"), header + &cfg.to_text())?;

    let outcome = train_filter(&ds, &tc, &spec)?;
    let ckpt = Checkpoint::from_filter(&outcome.filter, tc.rng_seed, &ds.content_hash());
    write(&out_dir.join("checkpoint.json"), ckpt.to_json()?)?;
    let mut log = Vec::new();
    write_loss_log(&outcome.log, &mut log)
        .map_err(|e| PolyCfError::io(out_dir.join("loss.csv"), e))?;
    write(&out_dir.join("loss.csv"), log)?;
    out(&format!(
        "trained {} epochs on {}; checkpoint {}\n",
        outcome.log.len(),
        ds.name,
        out_dir.join("checkpoint.json").display()
    ))
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path) -> Result {
    let ds = dataset(cfg)?;
    let ckpt = load_checkpoint(checkpoint, &ds)?;
    let k: usize = cfg.get("k")?;
    let low_pass = projector(cfg, &ds, ckpt.svd_cutoff, ckpt.svd_seed)?;
    let f = ckpt.filter(low_pass)?;
    let bank = f.operators(&ds.train)?;
    let res = evaluate_with(&f, &bank, &ds, k, true)?;
    let hash = short_hash(&[&ckpt.to_json()?, &ds.content_hash(), &k.to_string()]);
    let report = res.report(&ds.name, &hash);
    let out_dir = cfg.output_dir();
    ensure_dir(&out_dir)?;
    let text = json_text(&report)?;
    write(&out_dir.join("metrics.json"), &text)?;
    let mut csv = Vec::new();
    res.write_per_user_csv(&mut csv)
        .map_err(|e| PolyCfError::io(out_dir.join("per_user.csv"), e))?;
    write(&out_dir.join("per_user.csv"), csv)?;
    if res.cold_users > 0 {
        warn!(
            "{} users with test items but no train items were skipped",
            res.cold_users
        );
    }
    out(&text)
}

pub fn recommend(cfg: &RunConfig, checkpoint: &Path, user: usize) -> Result {
    let ds = dataset(cfg)?;
    if user >= ds.num_users() {
        return Err(PolyCfError::invalid(format!(
            "unknown user {user} (dataset has {})",
            ds.num_users()
        ))
        .into());
    }
    let ckpt = load_checkpoint(checkpoint, &ds)?;
    let low_pass = projector(cfg, &ds, ckpt.svd_cutoff, ckpt.svd_seed)?;
    let f = ckpt.filter(low_pass)?;
    let bank = f.operators(&ds.train)?;
    let scores = score_user(&f, &bank, &ds.train, user)?;
    let mut text = String::new();
    for item in top_k(&scores, cfg.get("k")?) {
        text += &format!("{item}\t{}\n", scores[item]);
    }
    out(&text)
}

fn parse_pairs(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (a, b) = p
                .split_once(',')
                .ok_or_else(|| CliError::Usage(format!("gamma pair `{p}` is not `a,b`")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::Usage(format!("invalid gamma `{v}`: {e}")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

fn emit(cfg: &RunConfig, file: &str, summary: &str, value: &serde_json::Value) -> Result {
    let out_dir = cfg.output_dir();
    ensure_dir(&out_dir)?;
    let text = json_text(value)?;
    write(&out_dir.join(file), &text)?;
    out(&format!("{summary}\n{text}"))
}

pub fn theorem2(cfg: &RunConfig, pairs: &str, random: Option<(usize, usize, f64)>) -> Result {
    let pairs = parse_pairs(pairs)?;
    let r: InteractionMatrix = match random {
        Some((m, n, density)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.get("seed")?);
            random_interactions(m, n, density, &mut rng)?
        }
        None => dataset(cfg)?.train,
    };
    let rep = verify_theorem2(&r, &pairs)?;
    let summary = format!(
        "max eigenvalue gap {:.3e}, max eigenvector-map residual {:.3e}, eigenvalues in [{:.3e}, {:.6}], {} range violations",
        rep.max_eigenvalue_gap(),
        rep.max_map_residual(),
        rep.min_eigenvalue,
        rep.max_eigenvalue,
        rep.range_violations
    );
    emit(
        cfg,
        "theorem2.json",
        &summary,
        &serde_json::to_value(&rep).map_err(PolyCfError::from)?,
    )
}

pub fn rankbound(cfg: &RunConfig, dim: usize, order: usize, trials: usize) -> Result {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.get("seed")?);
    let (mut violations, mut max_rank) = (0, 0);
    for _ in 0..trials {
        let r = random_interactions(20, 20, 0.3, &mut rng)?;
        let sim = EmbeddingSim::random(dim, 20, 20, order, &mut rng)?;
        let rep = verify_rank_bound(&sim, &r)?;
        violations += usize::from(!rep.bound_holds);
        max_rank = max_rank.max(rep.numerical_rank);
    }
    let summary = format!(
        "{trials} trials with d = {dim}: max numerical rank {max_rank}, {violations} violations"
    );
    let value = json!({
        "embedding_dim": dim,
        "order": order,
        "trials": trials,
        "max_rank": max_rank,
        "violations": violations,
    });
    emit(cfg, "rankbound.json", &summary, &value)
}

pub fn response(cfg: &RunConfig, checkpoint: &Path, points: usize) -> Result {
    let ckpt = Checkpoint::load(checkpoint)?;
    let curve = ckpt.kernel::<f64>()?.response_curve(points)?;
    let out_dir = cfg.output_dir();
    ensure_dir(&out_dir)?;
    let path = out_dir.join("response.csv");
    let mut buf = Vec::new();
    curve
        .write_csv(&mut buf)
        .map_err(|e| PolyCfError::io(&path, e))?;
    write(&path, buf)?;
    out(&format!("response curves written to {}\n", path.display()))
}

pub fn transfer(cfg: &RunConfig, checkpoint: &Path) -> Result {
    let ds = dataset(cfg)?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let low_pass = projector(cfg, &ds, ckpt.svd_cutoff, ckpt.svd_seed)?;
    let opts = TransferOptions {
        k: cfg.get("k")?,
        expected: Some((cfg.basis()?, cfg.get("K")?)),
        init_jitter: cfg.get("init_jitter")?,
        ..TransferOptions::default()
    };
    let res = transfer_kernel(&ckpt, &ds, low_pass, &opts)?;
    let rep = res.report();
    let summary = format!(
        "transferred Recall@{k} {:.4} vs random-init {:.4} (relative improvement {:+.2}%)",
        rep.transferred_recall,
        rep.random_recall,
        100.0 * rep.relative_improvement_recall,
        k = opts.k
    );
    emit(
        cfg,
        "transfer.json",
        &summary,
        &serde_json::to_value(&rep).map_err(PolyCfError::from)?,
    )
}

pub fn ablation(cfg: &RunConfig) -> Result {
    let ds = dataset(cfg)?;
    let tc = train_config(cfg)?;
    let base = filter_spec(cfg, &ds)?;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for v in AblationVariant::ALL {
        let spec = build_ablation(v, &base);
        let out = train_filter(&ds, &tc, &spec)?;
        let bank = out.filter.operators(&ds.train)?;
        let res = evaluate_with(&out.filter, &bank, &ds, tc.eval_k, false)?;
        lines.push(format!(
            "{v}: Recall@{k} {:.4} NDCG@{k} {:.4}",
            res.recall_at_k,
            res.ndcg_at_k,
            k = tc.eval_k
        ));
        rows.push(json!({ "variant": v, "recall": res.recall_at_k, "ndcg": res.ndcg_at_k }));
    }
    emit(
        cfg,
        "ablation.json",
        &lines.join("\n"),
        &json!({ "k": tc.eval_k, "variants": rows }),
    )
}
