//! Flat binary snapshot layout.
//!
//! Every file is
//!
//! ```text
//! magic    4 bytes   b"CDEM"
//! version  u8        1
//! kind     u8        1 = autoencoder, 2 = linear encoder, 3 = clusters, 4 = bandit
//! dims     u64 LE ×  (kind-specific count, listed below)
//! [bandit only: generator state, 32-byte seed + u64 LE stream + u128 LE word position]
//! payload  f64 LE, row-major
//! ```
//!
//! | kind | dims | payload |
//! |------|------|---------|
//! | autoencoder | `D, n` | scaling offset, scaling range, `W1` (n×D), `b1`, `W2` (D×n), `b2` |
//! | linear | `D, m` | mean (D), `P` (m×D) |
//! | clusters | `k, D` | counts (k, integral values), centroids (k×D) |
//! | bandit | `K, d, refresh_every, seed` | `R, ε, γ, scale override (NaN when unset)`, then per arm: update count, `B`, `B⁻¹`, `f`, `μ̂` |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clustering::ClusterModel;
use crate::cts::{ArmPosterior, CtsBandit, CtsConfig};
use crate::encoders::{Autoencoder, AutoencoderParams, Encoder, LinearEncoder, MinMax};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"CDEM";
pub const VERSION: u8 = 1;

const KIND_AUTOENCODER: u8 = 1;
const KIND_LINEAR: u8 = 2;
const KIND_CLUSTERS: u8 = 3;
const KIND_BANDIT: u8 = 4;

/// Largest dimension accepted when reading, to fail fast on corrupt headers.
const MAX_DIM: u64 = 1 << 24;

struct Writer<'a, W: Write> {
    w: &'a mut W,
}

impl<W: Write> Writer<'_, W> {
    fn header(&mut self, kind: u8, dims: &[u64]) -> std::io::Result<()> {
        self.w.write_all(MAGIC)?;
        self.w.write_all(&[VERSION, kind])?;
        for &d in dims {
            self.w.write_all(&d.to_le_bytes())?;
        }
        Ok(())
    }

    fn floats<T: Scalar>(&mut self, values: &[T]) -> std::io::Result<()> {
        for &v in values {
            self.w.write_all(&v.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    fn float(&mut self, v: f64) -> std::io::Result<()> {
        self.w.write_all(&v.to_le_bytes())
    }
}

struct Reader<'a, R: Read> {
    r: &'a mut R,
}

impl<R: Read> Reader<'_, R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.r
            .read_exact(&mut buf)
            .map_err(|e| Error::Format(format!("truncated snapshot: {e}")))?;
        Ok(buf)
    }

    /// Reads magic and version, returning the kind byte.
    fn prelude(&mut self) -> Result<u8> {
        let magic = self.bytes::<4>()?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let [version, kind] = self.bytes::<2>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        Ok(kind)
    }

    fn expect_kind(&mut self, expected: u8) -> Result<()> {
        let kind = self.prelude()?;
        if kind != expected {
            return Err(Error::Format(format!(
                "snapshot kind {kind}, expected {expected}"
            )));
        }
        Ok(())
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes::<8>()?))
    }

    fn dims(&mut self, n: usize) -> Result<Vec<usize>> {
        (0..n)
            .map(|_| {
                let v = self.u64()?;
                if v > MAX_DIM {
                    return Err(Error::Format(format!("implausible dimension {v}")));
                }
                Ok(v as usize)
            })
            .collect()
    }

    fn float(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>()?))
    }

    fn floats<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        (0..n).map(|_| self.float().map(T::of)).collect()
    }

    fn matrix<T: Scalar>(&mut self, rows: usize, cols: usize) -> Result<Matrix<T>> {
        Matrix::from_vec(rows, cols, self.floats(rows * cols)?)
    }

    fn finish(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.r.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(Error::Format("trailing bytes after snapshot".into())),
            Err(e) => Err(Error::Format(e.to_string())),
        }
    }
}

/// Types with a flat binary snapshot.
pub trait Snapshot: Sized {
    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()>;
    fn read_from<R: Read>(r: &mut R) -> Result<Self>;

    fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }
}

impl<T: Scalar> Snapshot for Encoder<T> {
    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut w = Writer { w };
        match self {
            Encoder::Autoencoder(m) => {
                w.header(KIND_AUTOENCODER, &[m.input_dim() as u64, m.hidden() as u64])?;
                let s = m.scaling();
                w.floats(&[s.offset, s.range])?;
                let p = m.params();
                w.floats(p.w1.as_slice())?;
                w.floats(&p.b1)?;
                w.floats(p.w2.as_slice())?;
                w.floats(&p.b2)
            }
            Encoder::Linear(m) => {
                w.header(KIND_LINEAR, &[m.input_dim() as u64, m.output_dim() as u64])?;
                w.floats(m.mean())?;
                w.floats(m.projection().as_slice())
            }
        }
    }

    fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut rd = Reader { r };
        let enc = match rd.prelude()? {
            KIND_AUTOENCODER => {
                let dims = rd.dims(2)?;
                let (d, n) = (dims[0], dims[1]);
                let scaling = MinMax {
                    offset: T::of(rd.float()?),
                    range: T::of(rd.float()?),
                };
                let params = AutoencoderParams {
                    w1: rd.matrix(n, d)?,
                    b1: rd.floats(n)?,
                    w2: rd.matrix(d, n)?,
                    b2: rd.floats(d)?,
                };
                Encoder::Autoencoder(Autoencoder::from_params(params, scaling)?)
            }
            KIND_LINEAR => {
                let dims = rd.dims(2)?;
                let (d, m) = (dims[0], dims[1]);
                let mean = rd.floats(d)?;
                let projection = rd.matrix(m, d)?;
                Encoder::Linear(LinearEncoder::from_parts(mean, projection)?)
            }
            other => return Err(Error::Format(format!("kind {other} is not an encoder"))),
        };
        rd.finish()?;
        Ok(enc)
    }
}

impl<T: Scalar> Snapshot for ClusterModel<T> {
    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut w = Writer { w };
        w.header(KIND_CLUSTERS, &[self.k() as u64, self.dim() as u64])?;
        for &c in self.counts() {
            w.float(c as f64)?;
        }
        for c in self.centroids() {
            w.floats(c)?;
        }
        Ok(())
    }

    fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut rd = Reader { r };
        rd.expect_kind(KIND_CLUSTERS)?;
        let dims = rd.dims(2)?;
        let (k, d) = (dims[0], dims[1]);
        let counts = (0..k)
            .map(|_| {
                let c = rd.float()?;
                if c < 0.0 || c.fract() != 0.0 || !c.is_finite() {
                    return Err(Error::Format(format!("bad cluster count {c}")));
                }
                Ok(c as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        let centroids = (0..k).map(|_| rd.floats(d)).collect::<Result<Vec<_>>>()?;
        rd.finish()?;
        ClusterModel::from_parts(centroids, counts)
    }
}

impl<T: Scalar> Snapshot for CtsBandit<T> {
    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let cfg = self.config();
        let d = cfg.dim;
        let mut w = Writer { w };
        w.header(
            KIND_BANDIT,
            &[
                cfg.arms as u64,
                d as u64,
                cfg.refresh_every as u64,
                cfg.seed,
            ],
        )?;
        let rng = self.rng();
        w.w.write_all(&rng.get_seed())?;
        w.w.write_all(&rng.get_stream().to_le_bytes())?;
        w.w.write_all(&rng.get_word_pos().to_le_bytes())?;
        w.floats(&[cfg.r, cfg.epsilon, cfg.gamma])?;
        w.float(cfg.scale_override.map_or(f64::NAN, Scalar::as_f64))?;
        for arm in self.arms() {
            w.float(arm.updates() as f64)?;
            w.floats(arm.design().as_slice())?;
            w.floats(arm.design_inverse().as_slice())?;
            w.floats(arm.reward_sum())?;
            w.floats(arm.mean())?;
        }
        Ok(())
    }

    fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut rd = Reader { r };
        rd.expect_kind(KIND_BANDIT)?;
        // The seed is a full u64, so these are not range-checked as dims.
        let dims = [rd.u64()?, rd.u64()?, rd.u64()?, rd.u64()?];
        let [arms, dim, refresh, seed] = dims;
        if arms > MAX_DIM || dim > MAX_DIM || refresh > u32::MAX as u64 {
            return Err(Error::Format("implausible bandit dimensions".into()));
        }
        let (arms, dim) = (arms as usize, dim as usize);
        let mut rng = ChaCha8Rng::from_seed(rd.bytes::<32>()?);
        rng.set_stream(u64::from_le_bytes(rd.bytes::<8>()?));
        rng.set_word_pos(u128::from_le_bytes(rd.bytes::<16>()?));
        let r_ = T::of(rd.float()?);
        let epsilon = T::of(rd.float()?);
        let gamma = T::of(rd.float()?);
        let ov = rd.float()?;
        let config = CtsConfig {
            arms,
            dim,
            r: r_,
            epsilon,
            gamma,
            seed,
            scale_override: if ov.is_nan() { None } else { Some(T::of(ov)) },
            refresh_every: refresh as usize,
        };
        let posteriors = (0..arms)
            .map(|_| {
                let updates = rd.float()? as u64;
                Ok(ArmPosterior {
                    updates,
                    b: rd.matrix(dim, dim)?,
                    b_inv: rd.matrix(dim, dim)?,
                    f: rd.floats(dim)?,
                    mu_hat: rd.floats(dim)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rd.finish()?;
        CtsBandit::from_parts(config, posteriors, rng)
    }
}
