use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nnssgd::bench::{bench_iterations, BenchConfig};
use nnssgd::completion::{fit, Centering, CompletionConfig, CompletionModel, ModelSelection};
use nnssgd::data::{
    decode_model, encode_model, gen_synthetic, parse_ratings, write_ratings, DuplicatePolicy, IdMap, Rating, Separator,
};
use nnssgd::loss::LossKind;
use nnssgd::probing::{ProbeKind, ProbeScaling};
use nnssgd::Error;

use crate::output::{format_sig10, write_atomic, CsvMetrics};
use crate::{BenchArgs, EvalArgs, LossArg, PredictArgs, ProbeArg, SelectArg, SeparatorArg, SynthArgs, TrainArgs};

const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

fn sidecar(model: &Path, suffix: &str) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize, Deserialize)]
struct IdSidecar {
    rows: Vec<String>,
    cols: Vec<String>,
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'static str,
    command: &'static str,
    seed: u64,
    threads: Option<usize>,
    config: &'a TrainArgs,
    resolved_k: usize,
    inputs: Vec<InputDigest>,
}

fn separator(arg: SeparatorArg) -> Option<Separator> {
    match arg {
        SeparatorArg::Auto => None,
        SeparatorArg::Tab => Some(Separator::Tab),
        SeparatorArg::Comma => Some(Separator::Comma),
        SeparatorArg::Colons => Some(Separator::DoubleColon),
        SeparatorArg::Space => Some(Separator::Whitespace),
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(Error::from).with_context(|| format!("reading {}", path.display()))
}

fn parse_file(path: &Path, bytes: &[u8], sep: Option<Separator>) -> Result<Vec<Rating<f64>>> {
    let ratings = parse_ratings(bytes, sep).with_context(|| format!("parsing {}", path.display()))?;
    if ratings.is_empty() {
        return Err(Error::Data(format!("{} contains no ratings", path.display())).into());
    }
    Ok(ratings)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn load_model_with_ids(path: &Path) -> Result<(CompletionModel<f64>, IdMap)> {
    let bytes = read_input(path)?;
    let model: CompletionModel<f64> = decode_model(&bytes).with_context(|| format!("loading model {}", path.display()))?;
    let ids_path = sidecar(path, ".ids");
    let ids = if ids_path.exists() {
        let raw = read_input(&ids_path)?;
        let side: IdSidecar = serde_json::from_slice(&raw).map_err(|e| Error::Format(format!("{}: {e}", ids_path.display())))?;
        IdMap::from_ids(side.rows, side.cols)?
    } else {
        log::info!("no id sidecar next to {}; using ids 1..m and 1..n", path.display());
        IdMap::sequential(model.nrows(), model.ncols())
    };
    if (ids.nrows(), ids.ncols()) != (model.nrows(), model.ncols()) {
        return Err(Error::Format(format!("id sidecar does not match the {}x{} model", model.nrows(), model.ncols())).into());
    }
    Ok((model, ids))
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let sep = separator(a.separator);
    let dup = if a.lenient { DuplicatePolicy::LastWins } else { DuplicatePolicy::Reject };
    let train_bytes = read_input(&a.train)?;
    let train_ratings = parse_file(&a.train, &train_bytes, sep)?;
    let test_input = match &a.test {
        Some(p) => {
            let bytes = read_input(p)?;
            let ratings = parse_file(p, &bytes, sep)?;
            Some((p, bytes, ratings))
        }
        None => None,
    };

    // Test-only users and items get rows/columns with no training data, so
    // the model predicts them from the means alone.
    let mut ids = IdMap::new();
    ids.extend_with(&train_ratings);
    if let Some((_, _, r)) = &test_input {
        ids.extend_with(r);
    }
    let z = ids.observations(&train_ratings, dup).with_context(|| format!("indexing {}", a.train.display()))?;
    let test = match &test_input {
        Some((p, _, r)) => Some(ids.observations(r, dup).with_context(|| format!("indexing {}", p.display()))?),
        None => None,
    };

    let config = CompletionConfig {
        rank: a.rank,
        super_iters: a.super_iters,
        delta: a.delta,
        nu: a.nu,
        k: a.k,
        probe: match a.probe {
            ProbeArg::Columns => ProbeKind::ColumnSampling,
            ProbeArg::Rademacher => ProbeKind::Rademacher,
            ProbeArg::Gaussian => ProbeKind::Gaussian,
        },
        loss: match a.loss {
            LossArg::Squared => LossKind::Squared,
            LossArg::Absolute => LossKind::Absolute,
            LossArg::Hinge => LossKind::SmoothedHinge,
        },
        seed: a.seed,
        masked: a.masked,
        scaling: if a.single_scale { ProbeScaling::SingleScale } else { ProbeScaling::Unbiased },
        selection: match a.select {
            SelectArg::Final => ModelSelection::Final,
            SelectArg::Best => ModelSelection::BestObjective,
        },
        metrics_every: 1,
        timing: !a.no_timing,
    };
    log::info!("training on {}x{} with {} ratings", z.nrows(), z.ncols(), z.nnz());
    let mut metrics = CsvMetrics::new();
    let model = fit(&z, test.as_ref(), &config, !a.no_center, &mut metrics)?;

    let train_rmse = model.rmse(&z)?;
    let test_rmse = test.as_ref().filter(|t| !t.is_empty()).map(|t| model.rmse(t)).transpose()?;

    let mut inputs = vec![InputDigest { path: a.train.display().to_string(), sha256: sha256_hex(&train_bytes) }];
    if let Some((p, bytes, _)) = &test_input {
        inputs.push(InputDigest { path: p.display().to_string(), sha256: sha256_hex(bytes) });
    }
    let manifest = RunManifest {
        version: ARTIFACT_VERSION,
        command: "train",
        seed: a.seed,
        threads: rayon::current_num_threads().into(),
        config: a,
        resolved_k: config.probe_width(),
        inputs,
    };
    let side = IdSidecar { rows: ids.row_ids().to_vec(), cols: ids.col_ids().to_vec() };

    let model_bytes = encode_model(&model);
    let ids_json = serde_json::to_vec_pretty(&side)?;
    let manifest_json = serde_json::to_vec_pretty(&manifest)?;
    write_atomic(&a.model_out, &model_bytes).with_context(|| format!("writing {}", a.model_out.display()))?;
    write_atomic(&sidecar(&a.model_out, ".ids"), &ids_json)?;
    write_atomic(&sidecar(&a.model_out, ".manifest.json"), &manifest_json)?;
    if let Some(p) = &a.metrics_out {
        write_atomic(p, &metrics.buf).with_context(|| format!("writing {}", p.display()))?;
    }

    println!("train_rmse {train_rmse:.6}");
    if let Some(t) = test_rmse {
        println!("test_rmse {t:.6}");
    }
    println!("rank {}", model.factors.rank());
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let (model, ids) = load_model_with_ids(&a.model)?;
    let mut out = Vec::new();
    let mut unknown = 0usize;
    if a.all {
        for i in 0..model.nrows() {
            for j in 0..model.ncols() {
                let p = model.predict(i, j)?;
                writeln!(out, "{} {} {}", ids.row_ids()[i], ids.col_ids()[j], format_sig10(p))?;
            }
        }
    } else {
        let path = a.pairs.as_ref().expect("clap requires --pairs or --all");
        let bytes = read_input(path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::Data(format!("{} is not UTF-8", path.display())))?;
        let mut sep = None;
        for (idx, line) in text.lines().enumerate() {
            let content = line.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let s = *sep.get_or_insert_with(|| Separator::detect(content));
            let fields: Vec<&str> = match s {
                Separator::DoubleColon => content.split("::").map(str::trim).collect(),
                Separator::Tab => content.split('\t').map(str::trim).collect(),
                Separator::Comma => content.split(',').map(str::trim).collect(),
                Separator::Whitespace => content.split_whitespace().collect(),
            };
            if fields.len() < 2 || fields[0].is_empty() || fields[1].is_empty() {
                return Err(Error::Parse { line: idx + 1, message: "expected 'user item'".into() }.into());
            }
            let (i, j) = (ids.row_index(fields[0]), ids.col_index(fields[1]));
            if i.is_none() || j.is_none() {
                unknown += 1;
            }
            writeln!(out, "{} {} {}", fields[0], fields[1], format_sig10(model.predict_with_fallback(i, j)))?;
        }
        writeln!(out, "# unknown_ids: {unknown}")?;
    }
    match &a.out {
        Some(p) => write_atomic(p, &out).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(&out)?,
    }
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let (model, ids) = load_model_with_ids(&a.model)?;
    let bytes = read_input(&a.test)?;
    let ratings = parse_file(&a.test, &bytes, separator(a.separator))?;
    let mut sse = 0.0;
    let mut unknown = 0usize;
    for r in &ratings {
        let (i, j) = (ids.row_index(&r.row), ids.col_index(&r.col));
        if i.is_none() || j.is_none() {
            unknown += 1;
        }
        let d = model.predict_with_fallback(i, j) - r.value;
        sse += d * d;
    }
    if unknown > 0 {
        log::warn!("{unknown} ratings use unknown ids and were predicted from means");
    }
    println!("{:.6}", (sse / ratings.len() as f64).sqrt());
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let p = gen_synthetic::<f64>(a.m, a.n, a.rank, a.density, a.noise, a.seed)?;
    let ids = IdMap::sequential(a.m, a.n);
    let mut train = Vec::new();
    write_ratings(&mut train, &p.train, &ids)?;
    let mut test = Vec::new();
    write_ratings(&mut test, &p.test, &ids)?;
    let truth = CompletionModel::new(p.truth, Centering::none(a.m, a.n))?;
    let prefix = a.out_prefix.as_os_str();
    let with = |ext: &str| {
        let mut s = prefix.to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    write_atomic(&with(".train"), &train)?;
    write_atomic(&with(".test"), &test)?;
    write_atomic(&with(".truth"), &encode_model(&truth))?;
    eprintln!("{} train and {} test ratings", p.train.nnz(), p.test.nnz());
    Ok(())
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let cfg =
        BenchConfig { m_list: a.m_list.clone(), n: a.n, rank: a.rank, k: a.k.unwrap_or(a.rank), iters: a.iters, seed: a.seed };
    let rows = bench_iterations(&cfg)?;
    let mut csv = String::from("m,median_seconds\n");
    for r in &rows {
        csv.push_str(&format!("{},{:.9}\n", r.m, r.median_seconds));
    }
    for w in rows.windows(2) {
        eprintln!(
            "m {} -> {}: time ratio {:.2} vs row ratio {:.2}",
            w[0].m,
            w[1].m,
            w[1].median_seconds / w[0].median_seconds,
            w[1].m as f64 / w[0].m as f64
        );
    }
    print!("{csv}");
    if let Some(p) = &a.out {
        write_atomic(p, csv.as_bytes())?;
    }
    Ok(())
}
