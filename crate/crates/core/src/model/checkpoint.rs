//! Checkpoint directories: `manifest.json`, `vocab.txt` and one raw
//! little-endian file per tensor (parameters plus optional optimizer moments).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{param_shapes, validate_params, ModelConfig};
use crate::optim::{AdamConfig, AdamState, AttenuationSchedule, BranchState};
use crate::scalar::Scalar;
use crate::tensor::{ParamStore, Tensor};
use crate::text::Vocabulary;

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const VOCAB: &str = "vocab.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    pub vocab: Vocabulary,
    pub optimizer: Option<AdamState<T>>,
    pub schedule: AttenuationSchedule,
    /// Epochs completed when this checkpoint was taken.
    pub epoch: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct BranchEntry {
    t: u64,
    m: Vec<TensorEntry>,
    n: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OptimizerEntry {
    config: AdamConfig,
    event: BranchEntry,
    post: BranchEntry,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    dtype: String,
    epoch: usize,
    config: ModelConfig,
    schedule: AttenuationSchedule,
    vocab_file: String,
    vocab_max_size: usize,
    tensors: Vec<TensorEntry>,
    optimizer: Option<OptimizerEntry>,
}

fn write_tensor<T: Scalar>(dir: &Path, file: &str, t: &Tensor<T>) -> Result<()> {
    let mut buf = Vec::with_capacity(t.len() * T::BYTES);
    for &v in t.data() {
        v.write_le(&mut buf);
    }
    let path = dir.join(file);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, buf)?;
    Ok(())
}

fn read_tensor<T: Scalar>(dir: &Path, entry: &TensorEntry) -> Result<Tensor<T>> {
    if entry.file.contains("..") || Path::new(&entry.file).is_absolute() {
        return Err(Error::Checkpoint(format!("tensor file {} escapes the checkpoint", entry.file)));
    }
    let bytes = fs::read(dir.join(&entry.file))?;
    let n: usize = entry.shape.iter().product();
    if bytes.len() != n * T::BYTES {
        return Err(Error::Checkpoint(format!(
            "{}: expected {} bytes for shape {:?}, found {}",
            entry.file,
            n * T::BYTES,
            entry.shape,
            bytes.len()
        )));
    }
    let data = bytes.chunks_exact(T::BYTES).map(T::read_le).collect();
    Tensor::new(entry.shape.clone(), data)
}

fn entries<'a, T: Scalar>(
    names: &'a [String],
    tensors: impl Iterator<Item = &'a Tensor<T>> + 'a,
    subdir: &'a str,
) -> impl Iterator<Item = (TensorEntry, &'a Tensor<T>)> + 'a {
    names.iter().zip(tensors).map(move |(name, t)| {
        (
            TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                file: format!("{subdir}/{name}.bin"),
            },
            t,
        )
    })
}

impl<T: Scalar> Checkpoint<T> {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut tensors = Vec::new();
        for (entry, t) in entries(self.params.names(), self.params.iter().map(|(_, t)| t), "tensors") {
            write_tensor(dir, &entry.file, t)?;
            tensors.push(entry);
        }
        let optimizer = match &self.optimizer {
            None => None,
            Some(opt) => {
                let save_branch = |label: &str, b: &BranchState<T>| -> Result<BranchEntry> {
                    let mut m = Vec::new();
                    let mut n = Vec::new();
                    let (dm, dn) = (format!("adam/{label}/m"), format!("adam/{label}/n"));
                    for (e, t) in entries(&opt.names, b.m.iter(), &dm) {
                        write_tensor(dir, &e.file, t)?;
                        m.push(e);
                    }
                    for (e, t) in entries(&opt.names, b.n.iter(), &dn) {
                        write_tensor(dir, &e.file, t)?;
                        n.push(e);
                    }
                    Ok(BranchEntry { t: b.t, m, n })
                };
                Some(OptimizerEntry {
                    config: opt.config,
                    event: save_branch("event", &opt.event)?,
                    post: save_branch("post", &opt.post)?,
                })
            }
        };
        self.vocab.save(&dir.join(VOCAB))?;
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            dtype: T::DTYPE.to_string(),
            epoch: self.epoch,
            config: self.config.clone(),
            schedule: self.schedule,
            vocab_file: VOCAB.to_string(),
            vocab_max_size: self.vocab.max_size(),
            tensors,
            optimizer,
        };
        fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    /// Loads and validates every tensor shape against the stored
    /// configuration and the vocabulary size.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                manifest.format_version
            )));
        }
        if manifest.dtype != T::DTYPE {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} tensors, requested {}",
                manifest.dtype,
                T::DTYPE
            )));
        }
        manifest.config.validate()?;
        let vocab = Vocabulary::load(&dir.join(&manifest.vocab_file), manifest.vocab_max_size)?;
        if vocab.len() != manifest.config.vocab_size {
            return Err(Error::Checkpoint(format!(
                "vocabulary has {} ids, configuration expects {}",
                vocab.len(),
                manifest.config.vocab_size
            )));
        }
        let mut params = ParamStore::new();
        for e in &manifest.tensors {
            params.insert(e.name.clone(), read_tensor(dir, e)?);
        }
        validate_params(&params, &manifest.config)?;

        let optimizer = match manifest.optimizer {
            None => None,
            Some(o) => {
                let load_branch = |b: &BranchEntry| -> Result<BranchState<T>> {
                    let read_all = |list: &[TensorEntry]| -> Result<Vec<Tensor<T>>> {
                        let want = param_shapes(&manifest.config);
                        if list.len() != want.len() {
                            return Err(Error::Checkpoint("optimizer moment count mismatch".into()));
                        }
                        list.iter()
                            .zip(&want)
                            .map(|(e, (name, shape))| {
                                if &e.name != name || &e.shape != shape {
                                    return Err(Error::Checkpoint(format!(
                                        "optimizer tensor {} does not match parameter {name}",
                                        e.name
                                    )));
                                }
                                read_tensor(dir, e)
                            })
                            .collect()
                    };
                    Ok(BranchState {
                        m: read_all(&b.m)?,
                        n: read_all(&b.n)?,
                        t: b.t,
                    })
                };
                Some(AdamState {
                    config: o.config,
                    names: params.names().to_vec(),
                    event: load_branch(&o.event)?,
                    post: load_branch(&o.post)?,
                })
            }
        };
        Ok(Self {
            config: manifest.config,
            params,
            vocab,
            optimizer,
            schedule: manifest.schedule,
            epoch: manifest.epoch,
        })
    }
}
