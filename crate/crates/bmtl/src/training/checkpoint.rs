//! Checkpoint files: model config, asset references with content hashes,
//! parameter snapshot, optimizer state, and loop counters in one file.
//!
//! Layout: a magic line, then three length-prefixed sections (key=value
//! header, parameter archive, optimizer archive). Floats that must
//! round-trip exactly are stored as hex bit patterns.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{allocate, DecoderSpec, ModelConfig};
use crate::nn::{AdamConfig, AdamState, ParameterStore, Scalar};
use crate::rng::fnv1a64;
use crate::training::EarlyStopper;

const MAGIC: &str = "#bmtl-checkpoint v1";

/// A vocabulary or merge-table file the checkpointed model depends on,
/// with the content hash recorded at save time. Paths are relative to the
/// checkpoint file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssetRef {
    pub name: String,
    pub path: PathBuf,
    pub hash: u64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub update: u64,
    pub best_bleu: Vec<(String, f64)>,
    pub stopper_best_average: f64,
    pub stopper_stale_evals: usize,
    pub assets: Vec<AssetRef>,
    pub adam_config: AdamConfig,
}

impl Checkpoint {
    /// Re-hashes every referenced asset file and fails on the first
    /// mismatch, naming it.
    pub fn verify_assets(&self, checkpoint_dir: &Path) -> Result<()> {
        for asset in &self.assets {
            let full = checkpoint_dir.join(&asset.path);
            let bytes = fs::read(&full)?;
            let actual = fnv1a64(&bytes);
            if actual != asset.hash {
                return Err(Error::HashMismatch {
                    name: asset.name.clone(),
                    expected: asset.hash,
                    actual,
                });
            }
        }
        Ok(())
    }

    pub fn stopper(&self, patience: usize) -> EarlyStopper {
        EarlyStopper {
            patience,
            best_average: self.stopper_best_average,
            stale_evals: self.stopper_stale_evals,
        }
    }
}

/// Hashes an asset file for inclusion in a checkpoint.
pub fn hash_file(path: &Path) -> Result<u64> {
    Ok(fnv1a64(&fs::read(path)?))
}

fn push_section(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(format!("{}\n", bytes.len()).as_bytes());
    out.extend_from_slice(bytes);
}

#[allow(clippy::too_many_arguments)]
pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    config: &ModelConfig,
    store: &ParameterStore<T>,
    adam: &AdamState<T>,
    update: u64,
    best_bleu: &[(String, f64)],
    stopper: &EarlyStopper,
    assets: &[AssetRef],
) -> Result<()> {
    let mut header = String::new();
    header.push_str(&format!("embed_dim={}\n", config.embed_dim));
    header.push_str(&format!("enc_hidden={}\n", config.enc_hidden));
    header.push_str(&format!("enc_layers={}\n", config.enc_layers));
    header.push_str(&format!("dec_hidden={}\n", config.dec_hidden));
    header.push_str(&format!("dropout_bits={:016x}\n", config.dropout.to_bits()));
    header.push_str(&format!("src_vocab_size={}\n", config.src_vocab_size));
    let decs: Vec<String> = config
        .decoders
        .iter()
        .map(|d| format!("{}:{}", d.name, d.vocab_size))
        .collect();
    header.push_str(&format!("decoders={}\n", decs.join(",")));
    header.push_str(&format!("update={update}\n"));
    for (name, bleu) in best_bleu {
        header.push_str(&format!("best_bleu.{name}={:016x}\n", bleu.to_bits()));
    }
    header.push_str(&format!(
        "stopper.best_average={:016x}\n",
        stopper.best_average.to_bits()
    ));
    header.push_str(&format!("stopper.stale_evals={}\n", stopper.stale_evals));
    header.push_str(&format!("adam.lr_bits={:016x}\n", adam.config.learning_rate.to_bits()));
    header.push_str(&format!("adam.beta1_bits={:016x}\n", adam.config.beta1.to_bits()));
    header.push_str(&format!("adam.beta2_bits={:016x}\n", adam.config.beta2.to_bits()));
    header.push_str(&format!("adam.epsilon_bits={:016x}\n", adam.config.epsilon.to_bits()));
    for asset in assets {
        header.push_str(&format!("asset.{}.path={}\n", asset.name, asset.path.display()));
        header.push_str(&format!("asset.{}.hash={:016x}\n", asset.name, asset.hash));
    }

    let mut out = format!("{MAGIC}\n").into_bytes();
    push_section(&mut out, header.as_bytes());
    push_section(&mut out, &store.to_archive());
    push_section(&mut out, &adam.to_bytes(store));
    fs::write(path, out)?;
    Ok(())
}

struct Sections<'a> {
    rest: &'a [u8],
}

impl<'a> Sections<'a> {
    fn line(&mut self) -> Result<&'a str> {
        let nl = self
            .rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Truncated("checkpoint".into()))?;
        let line = std::str::from_utf8(&self.rest[..nl]).map_err(|_| Error::Format {
            path: "checkpoint".into(),
            detail: "non-UTF-8 header".into(),
        })?;
        self.rest = &self.rest[nl + 1..];
        Ok(line)
    }

    fn section(&mut self) -> Result<&'a [u8]> {
        let len: usize = self.line()?.parse().map_err(|_| Error::Format {
            path: "checkpoint".into(),
            detail: "bad section length".into(),
        })?;
        if self.rest.len() < len {
            return Err(Error::Truncated("checkpoint section".into()));
        }
        let (head, tail) = self.rest.split_at(len);
        self.rest = tail;
        Ok(head)
    }
}

fn parse_bits(map: &std::collections::HashMap<&str, &str>, key: &str) -> Result<f64> {
    let raw = map.get(key).ok_or_else(|| Error::Format {
        path: "checkpoint".into(),
        detail: format!("missing key {key}"),
    })?;
    let bits = u64::from_str_radix(raw, 16).map_err(|_| Error::Format {
        path: "checkpoint".into(),
        detail: format!("bad bits for {key}"),
    })?;
    Ok(f64::from_bits(bits))
}

fn parse_num<N: std::str::FromStr>(
    map: &std::collections::HashMap<&str, &str>,
    key: &str,
) -> Result<N> {
    map.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format {
            path: "checkpoint".into(),
            detail: format!("missing or bad key {key}"),
        })
}

pub fn load_checkpoint<T: Scalar>(
    path: &Path,
) -> Result<(Checkpoint, ParameterStore<T>, AdamState<T>)> {
    let bytes = fs::read(path)?;
    let mut sections = Sections { rest: &bytes };
    let magic = sections.line()?;
    if magic != MAGIC {
        return Err(Error::VersionMismatch {
            found: magic.to_string(),
            expected: MAGIC.to_string(),
        });
    }
    let header = sections.section()?;
    let header = std::str::from_utf8(header).map_err(|_| Error::Format {
        path: "checkpoint".into(),
        detail: "non-UTF-8 header".into(),
    })?;
    let map: std::collections::HashMap<&str, &str> = header
        .lines()
        .filter_map(|l| l.split_once('='))
        .collect();

    let decoders = map
        .get("decoders")
        .ok_or_else(|| Error::Format {
            path: "checkpoint".into(),
            detail: "missing decoders".into(),
        })?
        .split(',')
        .map(|part| {
            let (name, size) = part.split_once(':').ok_or_else(|| Error::Format {
                path: "checkpoint".into(),
                detail: format!("bad decoder entry {part:?}"),
            })?;
            Ok(DecoderSpec {
                name: name.to_string(),
                vocab_size: size.parse().map_err(|_| Error::Format {
                    path: "checkpoint".into(),
                    detail: format!("bad decoder size {size:?}"),
                })?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let config = ModelConfig {
        embed_dim: parse_num(&map, "embed_dim")?,
        enc_hidden: parse_num(&map, "enc_hidden")?,
        enc_layers: parse_num(&map, "enc_layers")?,
        dec_hidden: parse_num(&map, "dec_hidden")?,
        dropout: parse_bits(&map, "dropout_bits")?,
        src_vocab_size: parse_num(&map, "src_vocab_size")?,
        decoders,
    };
    config.validate()?;

    let adam_config = AdamConfig {
        learning_rate: parse_bits(&map, "adam.lr_bits")?,
        beta1: parse_bits(&map, "adam.beta1_bits")?,
        beta2: parse_bits(&map, "adam.beta2_bits")?,
        epsilon: parse_bits(&map, "adam.epsilon_bits")?,
    };

    let mut best_bleu = Vec::new();
    for spec in &config.decoders {
        let key = format!("best_bleu.{}", spec.name);
        if let Some(raw) = map.get(key.as_str()) {
            let bits = u64::from_str_radix(raw, 16).map_err(|_| Error::Format {
                path: "checkpoint".into(),
                detail: format!("bad bits for {key}"),
            })?;
            best_bleu.push((spec.name.clone(), f64::from_bits(bits)));
        }
    }

    let mut assets = Vec::new();
    let mut asset_names: Vec<&str> = map
        .keys()
        .filter_map(|k| k.strip_prefix("asset.")?.strip_suffix(".path"))
        .collect();
    asset_names.sort_unstable();
    for name in asset_names {
        let path_key = format!("asset.{name}.path");
        let hash_key = format!("asset.{name}.hash");
        let p = map.get(path_key.as_str()).expect("derived from keys");
        let h = map.get(hash_key.as_str()).ok_or_else(|| Error::Format {
            path: "checkpoint".into(),
            detail: format!("missing {hash_key}"),
        })?;
        assets.push(AssetRef {
            name: name.to_string(),
            path: PathBuf::from(p),
            hash: u64::from_str_radix(h, 16).map_err(|_| Error::Format {
                path: "checkpoint".into(),
                detail: format!("bad hash for {name}"),
            })?,
        });
    }

    let params_bytes = sections.section()?;
    let mut store = allocate::<T>(&config, 0)?;
    store.load_values(params_bytes)?;

    let adam_bytes = sections.section()?;
    let adam = AdamState::from_bytes(adam_bytes, &store, adam_config)?;

    let checkpoint = Checkpoint {
        config,
        update: parse_num(&map, "update")?,
        best_bleu,
        stopper_best_average: parse_bits(&map, "stopper.best_average")?,
        stopper_stale_evals: parse_num(&map, "stopper.stale_evals")?,
        assets,
        adam_config,
    };
    Ok((checkpoint, store, adam))
}
