//! Flat `section.key = value` configuration with CLI flag overrides, plus
//! the stage hashes that make artifacts self-describing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use urntopics::embedding::{Scaling, Weighting};
use urntopics::neighbors::Strategy;
use urntopics::promotion::PromotionMode;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub embedding: Option<PathBuf>,
    pub out: PathBuf,
    pub min_count: usize,
    pub drop_top: usize,
    pub lsa_k: usize,
    pub weighting: Weighting,
    pub scaling: Scaling,
    pub local: Strategy,
    pub global: Strategy,
    pub mode: PromotionMode,
    pub cooc_topn: usize,
    pub symmetrize: bool,
    pub topics: usize,
    /// None means the 50/K default, resolved at use.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub random_order: bool,
    pub top_m: usize,
    pub grid_values: Vec<f64>,
    pub grid_folds: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: PathBuf::new(),
            lexicon: None,
            stopwords: None,
            embedding: None,
            out: PathBuf::from("out"),
            min_count: 5,
            drop_top: 10,
            lsa_k: 300,
            weighting: Weighting::Raw,
            scaling: Scaling::None,
            local: Strategy::Threshold(0.7),
            global: Strategy::Threshold(0.8),
            mode: PromotionMode::Context,
            cooc_topn: 10,
            symmetrize: false,
            topics: 70,
            alpha: None,
            beta: 0.01,
            iterations: 1500,
            seed: 42,
            random_order: false,
            top_m: 10,
            grid_values: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            grid_folds: 5,
        }
    }
}

impl PipelineConfig {
    pub fn alpha_for(&self, topics: usize) -> f64 {
        self.alpha.unwrap_or(50.0 / topics as f64)
    }

    /// Loads a config file if given and layers it over the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = PipelineConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').with_context(|| {
                    format!("{}:{}: expected key = value", path.display(), idx + 1)
                })?;
                config
                    .apply(key.trim(), value.trim())
                    .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
            }
        }
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn path(value: &str) -> Option<PathBuf> {
            if value.is_empty() {
                None
            } else {
                Some(PathBuf::from(value))
            }
        }
        match key {
            "paths.corpus" => self.corpus = PathBuf::from(value),
            "paths.lexicon" => self.lexicon = path(value),
            "paths.stopwords" => self.stopwords = path(value),
            "paths.embedding" => self.embedding = path(value),
            "paths.out" => self.out = PathBuf::from(value),
            "preprocess.min_count" => self.min_count = value.parse()?,
            "preprocess.drop_top" => self.drop_top = value.parse()?,
            "lsa.k" => self.lsa_k = value.parse()?,
            "lsa.weighting" => self.weighting = value.parse()?,
            "lsa.scaling" => self.scaling = value.parse()?,
            "neighbors.local" => self.local = parse_strategy(value)?,
            "neighbors.global" => self.global = parse_strategy(value)?,
            "promotion.mode" => self.mode = parse_mode(value)?,
            "promotion.cooc_topn" => self.cooc_topn = value.parse()?,
            "promotion.symmetrize" => self.symmetrize = value.parse()?,
            "sampler.topics" => self.topics = value.parse()?,
            "sampler.alpha" => self.alpha = Some(value.parse()?),
            "sampler.beta" => self.beta = value.parse()?,
            "sampler.iterations" => self.iterations = value.parse()?,
            "sampler.seed" => self.seed = value.parse()?,
            "sampler.random_order" => self.random_order = value.parse()?,
            "evaluation.top_m" => self.top_m = value.parse()?,
            "grid.values" => {
                self.grid_values = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(anyhow::Error::from))
                    .collect::<Result<_>>()?;
            }
            "grid.folds" => self.grid_folds = value.parse()?,
            other => bail!("unknown config key: {other}"),
        }
        Ok(())
    }

    /// Referenced input files must exist before any stage runs.
    pub fn validate_paths(&self) -> Result<()> {
        if self.corpus.as_os_str().is_empty() {
            bail!("no corpus file configured (paths.corpus)");
        }
        let mut required: Vec<&Path> = vec![&self.corpus];
        required.extend(self.lexicon.as_deref());
        required.extend(self.stopwords.as_deref());
        if self.mode == PromotionMode::Context {
            match self.embedding.as_deref() {
                Some(p) => required.push(p),
                None => bail!("promotion mode context needs an embedding file (paths.embedding)"),
            }
        }
        for p in required {
            if !p.exists() {
                bail!("input file does not exist: {}", p.display());
            }
        }
        Ok(())
    }
}

fn parse_strategy(value: &str) -> Result<Strategy> {
    let strategy: Strategy = value
        .parse()
        .map_err(|e| anyhow::anyhow!("{e} (use threshold(T) or topn(N))"))?;
    if matches!(strategy, Strategy::Imported) {
        bail!("neighbor strategy must be threshold(T) or topn(N)");
    }
    Ok(strategy)
}

pub fn parse_mode(value: &str) -> Result<PromotionMode> {
    let mode: PromotionMode = value.parse()?;
    if matches!(mode, PromotionMode::Custom) {
        bail!("promotion mode must be identity, context, or idf");
    }
    Ok(mode)
}

/// FNV-1a over the bytes; fast, stable, and good enough to fingerprint
/// configurations (these hashes gate staleness, not security).
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn chain(stage: &str, params: &str, upstream: &[u64]) -> u64 {
    let mut buf = String::new();
    buf.push_str(stage);
    buf.push('\x1f');
    buf.push_str(params);
    for h in upstream {
        let _ = write!(buf, "\x1f{h:016x}");
    }
    fnv1a(buf.as_bytes())
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or_else(|| "-".to_owned(), |p| p.display().to_string())
}

/// Stage fingerprints, chained so a change anywhere upstream invalidates
/// everything downstream. Hashes cover configuration, not file contents:
/// editing an input file in place requires --force.
pub struct StageHashes {
    pub preprocess: u64,
    pub lsa: u64,
    pub neighbors_local: u64,
    pub neighbors_global: u64,
    pub promote: u64,
    pub train: u64,
    pub coherence: u64,
    pub grid: u64,
}

pub fn stage_hashes(c: &PipelineConfig) -> StageHashes {
    let preprocess = chain(
        "preprocess",
        &format!(
            "{};{};{};{};{}",
            c.corpus.display(),
            opt_path(&c.lexicon),
            opt_path(&c.stopwords),
            c.min_count,
            c.drop_top
        ),
        &[],
    );
    let lsa = chain(
        "lsa",
        &format!("{};{};{}", c.lsa_k, c.weighting, c.scaling),
        &[preprocess],
    );
    let neighbors_local = chain(
        "neighbors_local",
        &format!("{};{}", c.local, opt_path(&c.embedding)),
        &[preprocess],
    );
    let neighbors_global = chain("neighbors_global", &c.global.to_string(), &[lsa]);
    let promote = match c.mode {
        PromotionMode::Context => chain(
            "promote",
            &format!("context;{}", c.symmetrize),
            &[neighbors_local, neighbors_global],
        ),
        PromotionMode::Idf => chain(
            "promote",
            &format!("idf;{};{}", c.cooc_topn, c.symmetrize),
            &[preprocess],
        ),
        _ => chain("promote", "identity", &[preprocess]),
    };
    let alpha = c.alpha_for(c.topics);
    let train = chain(
        "train",
        &format!(
            "{};{};{};{};{};{}",
            c.topics, alpha, c.beta, c.iterations, c.seed, c.random_order
        ),
        &[promote],
    );
    let coherence = chain("coherence", &c.top_m.to_string(), &[train]);
    let grid_values: Vec<String> = c.grid_values.iter().map(f64::to_string).collect();
    let grid = chain(
        "grid",
        &format!(
            "{};{};{};{};{};{};{};{};{}",
            grid_values.join(","),
            c.grid_folds,
            c.topics,
            alpha,
            c.beta,
            c.iterations,
            c.seed,
            c.top_m,
            opt_path(&c.embedding)
        ),
        &[lsa],
    );
    StageHashes {
        preprocess,
        lsa,
        neighbors_local,
        neighbors_global,
        promote,
        train,
        coherence,
        grid,
    }
}
