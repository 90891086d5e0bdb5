//! The action network: a dense feed-forward net mapping state features to a
//! single unconstrained weight. Position limits come from the environment's
//! risk terms, not from the network, so there is no output activation.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{gemm_nn_acc, Gradients, Tape, Var};
use crate::error::{Error, Result};

/// Network shape. The default policy uses two hidden layers of 300 ReLU
/// units and a linear scalar output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Result<Architecture> {
        let arch = Architecture { input_dim, hidden, output_dim: 1 };
        arch.validate()?;
        Ok(arch)
    }

    /// The standard 2×300 ReLU network.
    pub fn default_for_inputs(input_dim: usize) -> Architecture {
        Architecture { input_dim, hidden: vec![300, 300], output_dim: 1 }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden.iter().any(|&w| w == 0) || self.output_dim != 1 {
            return Err(Error::Config(format!(
                "invalid architecture: input {}, hidden {:?}, output {}",
                self.input_dim, self.hidden, self.output_dim
            )));
        }
        Ok(())
    }

    /// Layer dimensions as `(out, in)` pairs, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((h, prev));
            prev = h;
        }
        dims.push((self.output_dim, prev));
        dims
    }

    /// Total parameter count: `(in + 1) · out` per layer.
    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(out, inp)| (inp + 1) * out).sum()
    }
}

/// Network parameters as one flat vector: per layer, the row-major weight
/// matrix followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    arch: Architecture,
    theta: Vec<f64>,
}

/// Fan-in uniform initialization: weights in `[-1/√fan_in, 1/√fan_in]`,
/// biases zero. Deterministic for a given seed.
pub fn init_policy(arch: &Architecture, seed: u64) -> PolicyParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = Vec::with_capacity(arch.param_count());
    for (out, inp) in arch.layer_dims() {
        let bound = 1.0 / (inp as f64).sqrt();
        for _ in 0..out * inp {
            theta.push(rng.random_range(-bound..=bound));
        }
        theta.extend(std::iter::repeat(0.0).take(out));
    }
    PolicyParams { arch: arch.clone(), theta }
}

/// Parameter-block tape leaves for one forward/backward pass.
pub struct PolicyLeaves<'t> {
    layers: Vec<(Var<'t>, Var<'t>)>,
}

impl<'t> PolicyLeaves<'t> {
    /// Flatten the gradients of every block back into theta layout.
    pub fn grad_theta(&self, grads: &Gradients) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(grads.dense(*w));
            out.extend(grads.dense(*b));
        }
        out
    }
}

impl PolicyParams {
    pub fn from_theta(arch: Architecture, theta: Vec<f64>) -> Result<PolicyParams> {
        arch.validate()?;
        if theta.len() != arch.param_count() {
            return Err(Error::Usage(format!(
                "theta length {} does not match architecture ({} parameters)",
                theta.len(),
                arch.param_count()
            )));
        }
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("policy parameters contain non-finite values".into()));
        }
        Ok(PolicyParams { arch, theta })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Weight/bias slices per layer, in order.
    fn layer_slices(&self) -> Vec<(&[f64], &[f64], usize, usize)> {
        let mut slices = Vec::new();
        let mut offset = 0;
        for (out, inp) in self.arch.layer_dims() {
            let w = &self.theta[offset..offset + out * inp];
            offset += out * inp;
            let b = &self.theta[offset..offset + out];
            offset += out;
            slices.push((w, b, out, inp));
        }
        slices
    }

    /// Forward pass without a tape. Runs the exact same kernels as the taped
    /// batched pass, so the two agree bit for bit.
    pub fn forward(&self, features: &[f64]) -> f64 {
        assert_eq!(
            features.len(),
            self.arch.input_dim,
            "feature vector length does not match the network input"
        );
        let mut x = features.to_vec();
        let last = self.arch.hidden.len();
        for (layer, (w, b, out, inp)) in self.layer_slices().into_iter().enumerate() {
            let mut y = b.to_vec();
            gemm_nn_acc(&mut y, w, &x, out, inp, 1);
            if layer < last {
                for v in &mut y {
                    if !(*v > 0.0) {
                        *v = 0.0;
                    }
                }
            }
            x = y;
        }
        x[0]
    }

    /// Forward pass that also reports how close any ReLU pre-activation came
    /// to its kink. Used to qualify points for finite-difference checks.
    pub fn forward_min_relu_margin(&self, features: &[f64]) -> (f64, f64) {
        assert_eq!(features.len(), self.arch.input_dim);
        let mut x = features.to_vec();
        let mut margin = f64::INFINITY;
        let last = self.arch.hidden.len();
        for (layer, (w, b, out, inp)) in self.layer_slices().into_iter().enumerate() {
            let mut y = b.to_vec();
            gemm_nn_acc(&mut y, w, &x, out, inp, 1);
            if layer < last {
                for v in &mut y {
                    margin = margin.min(v.abs());
                    if !(*v > 0.0) {
                        *v = 0.0;
                    }
                }
            }
            x = y;
        }
        (x[0], margin)
    }

    /// Record the parameter blocks as tape leaves.
    pub fn leaves<'t>(&self, tape: &'t Tape) -> Result<PolicyLeaves<'t>> {
        let mut layers = Vec::new();
        for (w, b, out, inp) in self.layer_slices() {
            let wv = tape.matrix(out, inp, w)?;
            let bv = tape.matrix(out, 1, b)?;
            layers.push((wv, bv));
        }
        Ok(PolicyLeaves { layers })
    }

    /// Taped forward pass over a k×n feature matrix (one column per batch
    /// element); returns the 1×n action row.
    pub fn forward_tape<'t>(
        &self,
        tape: &'t Tape,
        leaves: &PolicyLeaves<'t>,
        features: Var<'t>,
    ) -> Result<Var<'t>> {
        let (rows, _) = tape.shape(features);
        if rows != self.arch.input_dim {
            return Err(Error::Usage(format!(
                "feature matrix has {} rows, network expects {}",
                rows, self.arch.input_dim
            )));
        }
        let mut x = features;
        let last = leaves.layers.len() - 1;
        for (i, (w, b)) in leaves.layers.iter().enumerate() {
            x = if i < last {
                tape.affine_relu(*w, x, *b)?
            } else {
                tape.affine(*w, x, *b)?
            };
        }
        Ok(x)
    }
}

/// Anything that maps a feature vector to an action weight.
pub trait ActionPolicy {
    fn action(&self, features: &[f64]) -> f64;
}

impl ActionPolicy for PolicyParams {
    fn action(&self, features: &[f64]) -> f64 {
        self.forward(features)
    }
}

/// Training metadata carried inside a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub env_hash: String,
    pub seed: u64,
    pub epochs: u32,
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"DTPC";
const CHECKPOINT_VERSION: u32 = 1;

/// Write a checkpoint: architecture, flat parameter vector (little-endian
/// f64 bits, so the round trip is bit-exact) and training metadata.
pub fn save_checkpoint(
    path: &Path,
    params: &PolicyParams,
    meta: &CheckpointMeta,
) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.arch.input_dim as u32).to_le_bytes());
    buf.extend_from_slice(&(params.arch.hidden.len() as u32).to_le_bytes());
    for &h in &params.arch.hidden {
        buf.extend_from_slice(&(h as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(params.theta.len() as u64).to_le_bytes());
    for v in &params.theta {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let hash = meta.env_hash.as_bytes();
    buf.extend_from_slice(&(hash.len() as u32).to_le_bytes());
    buf.extend_from_slice(hash);
    buf.extend_from_slice(&meta.seed.to_le_bytes());
    buf.extend_from_slice(&meta.epochs.to_le_bytes());
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(PolicyParams, CheckpointMeta)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
        if *cursor + n > bytes.len() {
            return Err(Error::Config("checkpoint file is truncated".into()));
        }
        let s = &bytes[*cursor..*cursor + n];
        *cursor += n;
        Ok(s)
    };
    if take(&mut cursor, 4)? != CHECKPOINT_MAGIC {
        return Err(Error::Config("not a policy checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Config(format!("unsupported checkpoint version {version}")));
    }
    let input_dim = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let n_hidden = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden.push(u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize);
    }
    let n_params = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
    let mut theta = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        theta.push(f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()));
    }
    let hash_len = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let env_hash = String::from_utf8(take(&mut cursor, hash_len)?.to_vec())
        .map_err(|_| Error::Config("checkpoint metadata is not valid UTF-8".into()))?;
    let seed = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
    let epochs = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
    let arch = Architecture::new(input_dim, hidden)?;
    let params = PolicyParams::from_theta(arch, theta)?;
    Ok((params, CheckpointMeta { env_hash, seed, epochs }))
}
