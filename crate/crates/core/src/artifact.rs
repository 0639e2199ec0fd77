//! Versioned binary persistence for model parameters and indexes, plus the
//! textual manifests that record how an artifact was produced.
//!
//! Blob layout: 4-byte magic, u32 version, shape header, then row-major f64
//! little-endian arrays. Re-running a command with the same seed and inputs
//! rewrites byte-identical blobs; manifests differ only in their timestamp.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::encoder::{EncoderParams, Fnv1a};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::reader::ReaderModel;
use crate::retriever::LogIndex;

pub const FORMAT_VERSION: u32 = 1;

const ENCODER_MAGIC: &[u8; 4] = b"LQEN";
const READER_MAGIC: &[u8; 4] = b"LQRD";
const INDEX_MAGIC: &[u8; 4] = b"LQIX";

fn bad(path: &Path, reason: impl Into<String>) -> Error {
    Error::BadArtifact { path: path.to_path_buf(), reason: reason.into() }
}

struct BlobWriter<W: Write> {
    inner: W,
}

impl<W: Write> BlobWriter<W> {
    fn header(mut inner: W, magic: &[u8; 4]) -> std::io::Result<Self> {
        inner.write_all(magic)?;
        inner.write_all(&FORMAT_VERSION.to_le_bytes())?;
        Ok(BlobWriter { inner })
    }

    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }

    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }

    fn array<'a, S: Scalar, I: IntoIterator<Item = &'a S>>(&mut self, values: I) -> std::io::Result<()> {
        for v in values {
            self.inner.write_all(&v.as_f64().to_le_bytes())?;
        }
        Ok(())
    }
}

struct BlobReader<R: Read> {
    inner: R,
}

impl<R: Read> BlobReader<R> {
    fn check_header(mut inner: R, magic: &[u8; 4], path: &Path) -> Result<Self> {
        let mut m = [0u8; 4];
        inner.read_exact(&mut m).map_err(|e| Error::io(path, e))?;
        if &m != magic {
            return Err(bad(path, format!("wrong magic {m:?}")));
        }
        let mut v = [0u8; 4];
        inner.read_exact(&mut v).map_err(|e| Error::io(path, e))?;
        let version = u32::from_le_bytes(v);
        if version != FORMAT_VERSION {
            return Err(bad(path, format!("unsupported version {version}")));
        }
        Ok(BlobReader { inner })
    }

    fn u32(&mut self, path: &Path) -> Result<u32> {
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, path: &Path) -> Result<u64> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
        Ok(u64::from_le_bytes(b))
    }

    fn matrix<S: Scalar>(&mut self, rows: usize, cols: usize, path: &Path) -> Result<Array2<S>> {
        let mut data = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            self.inner.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
            data.push(S::cast(f64::from_le_bytes(b)));
        }
        Array2::from_shape_vec((rows, cols), data).map_err(|e| bad(path, e.to_string()))
    }

    fn vector<S: Scalar>(&mut self, len: usize, path: &Path) -> Result<Array1<S>> {
        Ok(self.matrix::<S>(1, len, path)?.row(0).to_owned())
    }
}

pub fn save_encoder<S: Scalar>(params: &EncoderParams<S>, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BlobWriter::header(BufWriter::new(f), ENCODER_MAGIC).map_err(|e| Error::io(path, e))?;
    let write = |w: &mut BlobWriter<_>| -> std::io::Result<()> {
        w.u32(params.dim() as u32)?;
        w.u32(params.vocab_size() as u32)?;
        w.array(params.embedding.iter())?;
        w.array(params.projection.iter())
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

pub fn load_encoder<S: Scalar>(path: &Path) -> Result<EncoderParams<S>> {
    let f = open_artifact(path, "train-retriever")?;
    let mut r = BlobReader::check_header(BufReader::new(f), ENCODER_MAGIC, path)?;
    let dim = r.u32(path)? as usize;
    let vocab = r.u32(path)? as usize;
    Ok(EncoderParams {
        embedding: r.matrix(vocab, dim, path)?,
        projection: r.matrix(dim, dim, path)?,
    })
}

pub fn save_reader<S: Scalar>(model: &ReaderModel<S>, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BlobWriter::header(BufWriter::new(f), READER_MAGIC).map_err(|e| Error::io(path, e))?;
    let write = |w: &mut BlobWriter<_>| -> std::io::Result<()> {
        w.u32(model.dim() as u32)?;
        w.u32(model.vocab_size() as u32)?;
        w.u32(model.window_radius as u32)?;
        w.array(model.embedding.iter())?;
        w.array(model.w_state.iter())?;
        w.array(model.w_question.iter())?;
        w.array(model.w_start.iter())?;
        w.array(model.w_end.iter())?;
        w.array(model.w_param.iter())
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

pub fn load_reader<S: Scalar>(path: &Path) -> Result<ReaderModel<S>> {
    let f = open_artifact(path, "train-reader")?;
    let mut r = BlobReader::check_header(BufReader::new(f), READER_MAGIC, path)?;
    let dim = r.u32(path)? as usize;
    let vocab = r.u32(path)? as usize;
    let window_radius = r.u32(path)? as usize;
    Ok(ReaderModel {
        embedding: r.matrix(vocab, dim, path)?,
        w_state: r.matrix(dim, dim, path)?,
        w_question: r.matrix(dim, dim, path)?,
        w_start: r.vector(dim, path)?,
        w_end: r.vector(dim, path)?,
        w_param: r.vector(dim, path)?,
        window_radius,
    })
}

pub fn save_index<S: Scalar>(index: &LogIndex<S>, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BlobWriter::header(BufWriter::new(f), INDEX_MAGIC).map_err(|e| Error::io(path, e))?;
    let write = |w: &mut BlobWriter<_>| -> std::io::Result<()> {
        w.u32(index.vectors.nrows() as u32)?;
        w.u32(index.vectors.ncols() as u32)?;
        w.u64(index.model_checksum)?;
        w.array(index.vectors.iter())
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

pub fn load_index<S: Scalar>(path: &Path) -> Result<LogIndex<S>> {
    let f = open_artifact(path, "build-index")?;
    let mut r = BlobReader::check_header(BufReader::new(f), INDEX_MAGIC, path)?;
    let rows = r.u32(path)? as usize;
    let cols = r.u32(path)? as usize;
    let model_checksum = r.u64(path)?;
    Ok(LogIndex { vectors: r.matrix(rows, cols, path)?, model_checksum })
}

fn open_artifact(path: &Path, producing_stage: &str) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact { path: path.to_path_buf(), stage: producing_stage.to_string() }
        } else {
            Error::io(path, e)
        }
    })
}

/// Textual sidecar recording what produced an artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub kind: String,
    pub version: u32,
    pub config_checksum: String,
    pub seed: u64,
    pub created_unix: u64,
}

impl Manifest {
    pub fn new(kind: &str, config_checksum: &str, seed: u64) -> Manifest {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Manifest {
            kind: kind.to_string(),
            version: FORMAT_VERSION,
            config_checksum: config_checksum.to_string(),
            seed,
            created_unix,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = format!(
            "kind = {}\nversion = {}\nconfig_checksum = {}\nseed = {}\ncreated_unix = {}\n",
            self.kind, self.version, self.config_checksum, self.seed, self.created_unix
        );
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut kind = None;
        let mut version = None;
        let mut config_checksum = None;
        let mut seed = None;
        let mut created_unix = None;
        for line in body.lines() {
            let Some((key, value)) = line.split_once('=') else { continue };
            let value = value.trim();
            match key.trim() {
                "kind" => kind = Some(value.to_string()),
                "version" => version = value.parse().ok(),
                "config_checksum" => config_checksum = Some(value.to_string()),
                "seed" => seed = value.parse().ok(),
                "created_unix" => created_unix = value.parse().ok(),
                _ => {}
            }
        }
        Ok(Manifest {
            kind: kind.ok_or_else(|| bad(path, "missing kind"))?,
            version: version.ok_or_else(|| bad(path, "missing version"))?,
            config_checksum: config_checksum.ok_or_else(|| bad(path, "missing config_checksum"))?,
            seed: seed.ok_or_else(|| bad(path, "missing seed"))?,
            created_unix: created_unix.unwrap_or(0),
        })
    }

    /// Fails when the manifest was produced by a different kind of artifact,
    /// an incompatible format version, or another configuration.
    pub fn verify(&self, path: &Path, kind: &str, config_checksum: &str) -> Result<()> {
        if self.kind != kind {
            return Err(bad(path, format!("kind {} != expected {kind}", self.kind)));
        }
        if self.version != FORMAT_VERSION {
            return Err(bad(path, format!("version {} != {FORMAT_VERSION}", self.version)));
        }
        if self.config_checksum != config_checksum {
            return Err(bad(
                path,
                format!(
                    "artifact was built with config {} but the current config is {config_checksum}; re-run the producing stage",
                    self.config_checksum
                ),
            ));
        }
        Ok(())
    }
}

/// Hex FNV-1a checksum of arbitrary text (used for configs).
pub fn text_checksum(text: &str) -> String {
    let mut h = Fnv1a::new();
    h.write(text.as_bytes());
    format!("{:016x}", h.finish())
}
