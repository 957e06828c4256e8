//! Line-oriented experiment configuration.
//!
//! ```text
//! # comment
//! variant = resmooth_log
//! seeds = 0, 1, 2
//!
//! [strategy]
//! kind = rand_augment
//! p = 0.5
//! ```
//!
//! Top-level keys come before the first section header. Unknown keys,
//! unknown sections, duplicate keys and unparsable values are errors naming
//! the offending key and line.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::glyphs::GlyphSpec;
use crate::pipelines::{DataSource, ExperimentConfig};

/// First 16 hex digits of the SHA-256 of `text`.
pub fn hash_text(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(digest)[..16].to_string()
}

const SECTIONS: [&str; 9] = [
    "", "data", "model", "strategy", "pretrain", "train", "em", "daood", "sweep",
];

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Config {
            line: self.line,
            key: self.key.to_string(),
            msg: msg.into(),
        }
    }

    fn parse<T: FromStr>(&self) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.value
            .parse()
            .map_err(|e: T::Err| self.err(format!("cannot parse `{}`: {e}", self.value)))
    }

    fn list<T: FromStr>(&self) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|e: T::Err| self.err(format!("cannot parse `{s}`: {e}")))
            })
            .collect()
    }
}

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut section = "";
    let mut seen = HashSet::new();
    let mut glyphs = GlyphSpec::default();
    let mut source = "glyphs".to_string();
    let mut files: (Option<PathBuf>, Option<PathBuf>) = (None, None);
    let mut source_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.split('#').next().unwrap_or("").trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| Error::Config {
                line,
                key: trimmed.to_string(),
                msg: "unterminated section header".into(),
            })?;
            let name = name.trim();
            section = SECTIONS.iter().find(|s| **s == name && !s.is_empty()).ok_or_else(|| {
                Error::Config {
                    line,
                    key: name.to_string(),
                    msg: "unknown section".into(),
                }
            })?;
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Config {
            line,
            key: trimmed.to_string(),
            msg: "expected `key = value`".into(),
        })?;
        let e = Entry {
            line,
            key: key.trim(),
            value: value.trim(),
        };
        let full = if section.is_empty() {
            e.key.to_string()
        } else {
            format!("{section}.{}", e.key)
        };
        if !seen.insert(full.clone()) {
            return Err(e.err("duplicate key"));
        }
        match (section, e.key) {
            ("", "variant") => cfg.variant = e.parse()?,
            ("", "seeds") => cfg.seeds = e.list()?,
            ("", "alpha_max") => cfg.alpha_max = e.parse()?,
            ("", "alpha_mode") => cfg.alpha_mode = e.parse()?,
            ("", "alpha_const") => cfg.alpha_const = Some(e.parse()?),
            ("", "tau") => cfg.tau = e.parse()?,
            ("", "refit_per_epoch") => cfg.refit_per_epoch = e.parse()?,
            ("", "output_dir") => cfg.output_dir = PathBuf::from(e.value),
            ("data", "source") => {
                source = e.value.to_string();
                source_line = line;
            }
            ("data", "classes") => glyphs.classes = e.parse()?,
            ("data", "train_per_class") => glyphs.train_per_class = e.parse()?,
            ("data", "test_per_class") => glyphs.test_per_class = e.parse()?,
            ("data", "size") => glyphs.size = e.parse()?,
            ("data", "noise") => glyphs.noise = e.parse()?,
            ("data", "orientation_sensitive") => glyphs.orientation_sensitive = e.parse()?,
            ("data", "seed") => glyphs.seed = e.parse()?,
            ("data", "train") => files.0 = Some(PathBuf::from(e.value)),
            ("data", "test") => files.1 = Some(PathBuf::from(e.value)),
            ("model", "kind") => cfg.model.kind = e.value.to_string(),
            ("model", "hidden") => cfg.model.hidden = e.parse()?,
            ("strategy", "kind") => cfg.strategy.kind = e.parse()?,
            ("strategy", "p") => cfg.strategy.p = e.parse()?,
            ("strategy", "n_ops") => cfg.strategy.n_ops = e.parse()?,
            ("strategy", "magnitude") => cfg.strategy.magnitude = e.parse()?,
            ("strategy", "grid_k") => cfg.strategy.grid_k = e.parse()?,
            ("strategy", "cut_size") => cfg.strategy.cut_size = e.parse()?,
            ("pretrain" | "train", key) => {
                let t = if section == "pretrain" {
                    &mut cfg.pretrain
                } else {
                    &mut cfg.train
                };
                match key {
                    "epochs" => t.epochs = e.parse()?,
                    "batch_size" => t.batch_size = e.parse()?,
                    "lr0" => t.lr0 = e.parse()?,
                    "momentum" => t.momentum = e.parse()?,
                    "weight_decay" => t.weight_decay = e.parse()?,
                    "schedule" => t.schedule = e.parse()?,
                    _ => return Err(e.err("unknown key")),
                }
            }
            ("em", "tolerance") => cfg.em.tolerance = e.parse()?,
            ("em", "max_iterations") => cfg.em.max_iterations = e.parse()?,
            ("daood", "target") => cfg.daood.target = e.parse()?,
            ("daood", "max_attempts") => cfg.daood.max_attempts = Some(e.parse()?),
            ("daood", "cap") => cfg.daood.cap = e.parse()?,
            ("daood", "flag") => cfg.daood.flag = e.parse()?,
            ("sweep", "p_grid") => cfg.sweep.p_grid = e.list()?,
            ("sweep", "alpha_grid") => cfg.sweep.alpha_grid = e.list()?,
            _ => return Err(e.err("unknown key")),
        }
    }

    cfg.data = match source.as_str() {
        "glyphs" => DataSource::Glyphs(glyphs),
        "files" => match files {
            (Some(train), Some(test)) => DataSource::Files { train, test },
            _ => {
                return Err(Error::Config {
                    line: source_line,
                    key: "data.source".into(),
                    msg: "files source needs both `train` and `test`".into(),
                })
            }
        },
        other => {
            return Err(Error::Config {
                line: source_line,
                key: "data.source".into(),
                msg: format!("unknown source `{other}`"),
            })
        }
    };
    Ok(cfg)
}

/// The part of a config that identifies an experiment: everything except
/// the seed list and the output location, which only select runs and where
/// they land.
pub fn identity_text(cfg: &ExperimentConfig) -> String {
    render(cfg)
        .lines()
        .filter(|l| !l.starts_with("seeds =") && !l.starts_with("output_dir ="))
        .map(|l| format!("{l}\n"))
        .collect()
}

/// Hash of the experiment a config file describes.
pub fn hash_file(path: &Path) -> Result<String> {
    Ok(load(path)?.hash())
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    parse(&std::fs::read_to_string(path)?)
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

/// Canonical text of a config. Parsing the result gives back an equal
/// config, so the text is what gets hashed and stored with artifacts.
pub fn render(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "variant = {}", cfg.variant);
    let _ = writeln!(s, "seeds = {}", join(&cfg.seeds));
    let _ = writeln!(s, "alpha_max = {}", cfg.alpha_max);
    let _ = writeln!(s, "alpha_mode = {}", cfg.alpha_mode);
    if let Some(c) = cfg.alpha_const {
        let _ = writeln!(s, "alpha_const = {c}");
    }
    let _ = writeln!(s, "tau = {}", cfg.tau);
    let _ = writeln!(s, "refit_per_epoch = {}", cfg.refit_per_epoch);
    let _ = writeln!(s, "output_dir = {}", cfg.output_dir.display());

    s.push_str("\n[data]\n");
    match &cfg.data {
        DataSource::Glyphs(g) => {
            s.push_str("source = glyphs\n");
            let _ = writeln!(s, "classes = {}", g.classes);
            let _ = writeln!(s, "train_per_class = {}", g.train_per_class);
            let _ = writeln!(s, "test_per_class = {}", g.test_per_class);
            let _ = writeln!(s, "size = {}", g.size);
            let _ = writeln!(s, "noise = {}", g.noise);
            let _ = writeln!(s, "orientation_sensitive = {}", g.orientation_sensitive);
            let _ = writeln!(s, "seed = {}", g.seed);
        }
        DataSource::Files { train, test } => {
            s.push_str("source = files\n");
            let _ = writeln!(s, "train = {}", train.display());
            let _ = writeln!(s, "test = {}", test.display());
        }
    }

    let _ = write!(s, "\n[model]\nkind = {}\nhidden = {}\n", cfg.model.kind, cfg.model.hidden);

    let st = &cfg.strategy;
    let _ = write!(
        s,
        "\n[strategy]\nkind = {}\np = {}\nn_ops = {}\nmagnitude = {}\ngrid_k = {}\ncut_size = {}\n",
        st.kind, st.p, st.n_ops, st.magnitude, st.grid_k, st.cut_size
    );

    for (name, t) in [("pretrain", &cfg.pretrain), ("train", &cfg.train)] {
        let _ = write!(
            s,
            "\n[{name}]\nepochs = {}\nbatch_size = {}\nlr0 = {}\nmomentum = {}\nweight_decay = {}\nschedule = {}\n",
            t.epochs, t.batch_size, t.lr0, t.momentum, t.weight_decay, t.schedule
        );
    }

    let _ = write!(
        s,
        "\n[em]\ntolerance = {}\nmax_iterations = {}\n",
        cfg.em.tolerance, cfg.em.max_iterations
    );

    let d = &cfg.daood;
    let _ = write!(s, "\n[daood]\ntarget = {}\n", d.target);
    if let Some(m) = d.max_attempts {
        let _ = writeln!(s, "max_attempts = {m}");
    }
    let _ = write!(s, "cap = {}\nflag = {}\n", d.cap, d.flag);

    let _ = write!(
        s,
        "\n[sweep]\np_grid = {}\nalpha_grid = {}\n",
        join(&cfg.sweep.p_grid),
        join(&cfg.sweep.alpha_grid)
    );
    s
}
