//! Variational autoencoders over radar data.
//!
//! Four variants share a 32-dimensional isotropic Gaussian latent:
//!
//! - `rd` / `ra` — convolutional encoder/decoder over one squashed
//!   128×128 map (range-Doppler or range-azimuth).
//! - `chirp` — 1-D convolutional encoder over the raw ADC samples of the
//!   first two chirps (8 channels × 256), with *two* decoder heads that
//!   reconstruct the RD and RA maps.
//! - `chirp_fft` — same, but the two chirps are range-FFT'd first
//!   (16 channels × 128: log-squashed amplitudes and π-scaled phases).
//!
//! A `scale_div` of 8 builds a miniature model (all spatial sizes /8) with
//! identical channel counts, used for f64 finite-difference checks.

pub mod chirp;
pub mod geco;
pub mod io;
pub mod train;

use crate::error::Error;
use crate::nn::layers::{
    upsample2x_forward, Act, Conv1d, Conv2d, Dense, ParamArena, Scratch,
};
use crate::nn::real::Real;
use crate::Result;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Latent dimensionality (means and standard deviations).
pub const LATENT_DIM: usize = 32;

/// Lower bound added to the softplus standard deviations.
pub const STD_FLOOR: f64 = 1e-6;

/// Initial bias on the encoder's pre-softplus std outputs: the posterior
/// opens nearly deterministic (softplus(−4) ≈ 0.018). With a zero bias the
/// latent starts as softplus(0) ≈ 0.69 noise, the decoder learns to ignore
/// it before the means differentiate, and the posterior collapses.
pub const STD_RAW_BIAS_INIT: f64 = -4.0;

/// Samples processed together by one worker.
pub const CHUNK: usize = 16;

/// Model variant tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Rd,
    Ra,
    Chirp,
    ChirpFft,
}

impl Variant {
    pub fn tag(self) -> u8 {
        match self {
            Variant::Rd => 0,
            Variant::Ra => 1,
            Variant::Chirp => 2,
            Variant::ChirpFft => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => Variant::Rd,
            1 => Variant::Ra,
            2 => Variant::Chirp,
            3 => Variant::ChirpFft,
            other => return Err(Error::Variant(format!("unknown variant tag {other}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Rd => "rd",
            Variant::Ra => "ra",
            Variant::Chirp => "chirp",
            Variant::ChirpFft => "chirp-fft",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "rd" => Variant::Rd,
            "ra" => Variant::Ra,
            "chirp" => Variant::Chirp,
            "chirp-fft" | "chirp_fft" => Variant::ChirpFft,
            other => return Err(Error::Variant(format!("unknown variant {other:?}"))),
        })
    }

    /// Decoder heads this variant carries.
    pub fn heads(self) -> &'static [DecoderHead] {
        match self {
            Variant::Rd => &[DecoderHead::Rd],
            Variant::Ra => &[DecoderHead::Ra],
            Variant::Chirp | Variant::ChirpFft => &[DecoderHead::Rd, DecoderHead::Ra],
        }
    }
}

/// Which map a decoder reconstructs. The RD head is linear, the RA head
/// ends in a sigmoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderHead {
    Rd,
    Ra,
}

impl DecoderHead {
    fn act(self) -> Act {
        match self {
            DecoderHead::Rd => Act::None,
            DecoderHead::Ra => Act::Sigmoid,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DecoderHead::Rd => "rd",
            DecoderHead::Ra => "ra",
        }
    }
}

/// Encoder output: a diagonal Gaussian over the latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPosterior {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl LatentPosterior {
    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != LATENT_DIM || self.std.len() != LATENT_DIM {
            return Err(Error::shape(
                format!("{LATENT_DIM} means and stds"),
                format!("{} / {}", self.mean.len(), self.std.len()),
            ));
        }
        for (&m, &s) in self.mean.iter().zip(&self.std) {
            if !m.is_finite() || !s.is_finite() {
                return Err(Error::Numeric {
                    range_bin: 0,
                    msg: "non-finite posterior".into(),
                });
            }
            if !(s > 0.0) {
                return Err(Error::validation(format!("non-positive std {s}")));
            }
        }
        Ok(())
    }
}

/// KL(q ‖ N(0, I)) in closed form: ½ Σ (μ² + σ² − 1 − 2 ln σ).
pub fn kl_to_standard_normal(q: &LatentPosterior) -> f64 {
    q.mean
        .iter()
        .zip(&q.std)
        .map(|(&m, &s)| 0.5 * (m * m + s * s - 1.0 - 2.0 * s.ln()))
        .sum()
}

/// Draw z = μ + σ ⊙ ε with ε ~ N(0, I) from the seed.
pub fn reparameterize(q: &LatentPosterior, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    q.mean
        .iter()
        .zip(&q.std)
        .map(|(&m, &s)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            m + s * e
        })
        .collect()
}

/// MSE-per-element reconstruction term (summed across heads) plus the
/// closed-form KL term.
pub fn elbo_loss(inputs: &[&[f64]], recons: &[&[f64]], q: &LatentPosterior) -> Result<(f64, f64)> {
    if inputs.len() != recons.len() {
        return Err(Error::shape(
            format!("{} reconstruction heads", inputs.len()),
            recons.len().to_string(),
        ));
    }
    let mut recon_term = 0.0;
    for (x, r) in inputs.iter().zip(recons) {
        if x.len() != r.len() {
            return Err(Error::shape(x.len().to_string(), r.len().to_string()));
        }
        let sum: f64 = x.iter().zip(r.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        recon_term += sum / x.len() as f64;
    }
    Ok((recon_term, kl_to_standard_normal(q)))
}

// ---------------------------------------------------------------------
// architecture
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MapEncoder {
    pub convs: Vec<Conv2d>,
    pub fc1: Dense,
    pub fc2: Dense,
    pub side: usize,
}

impl MapEncoder {
    fn build<T: Real>(arena: &mut ParamArena<T>, side: usize) -> Self {
        let chans = [(1usize, 16usize), (16, 16), (16, 32), (32, 32)];
        let mut convs = Vec::new();
        let mut h = side;
        for (i, &(cin, cout)) in chans.iter().enumerate() {
            let conv = Conv2d::new(
                arena,
                &format!("encoder.conv{}", i + 1),
                cin,
                cout,
                h,
                h,
                2,
                Act::LeakyRelu,
            );
            h = conv.hout;
            convs.push(conv);
        }
        let flat = h * h * 32;
        let fc1 = Dense::new(arena, "encoder.fc1", flat, 1024, Act::LeakyRelu);
        let fc2 = Dense::new(arena, "encoder.fc2", 1024, 2 * LATENT_DIM, Act::None);
        MapEncoder {
            convs,
            fc1,
            fc2,
            side,
        }
    }

    pub fn input_len(&self) -> usize {
        self.side * self.side
    }
}

#[derive(Debug, Clone)]
pub struct ChirpEncoder {
    pub convs: Vec<Conv1d>,
    pub fc1: Dense,
    pub fc2: Dense,
    pub channels: usize,
    pub len: usize,
}

impl ChirpEncoder {
    fn build<T: Real>(arena: &mut ParamArena<T>, channels: usize, len: usize) -> Self {
        let chans = [(channels, 512usize), (512, 512), (512, 32)];
        let mut convs = Vec::new();
        let mut l = len;
        for (i, &(cin, cout)) in chans.iter().enumerate() {
            let conv = Conv1d::new(
                arena,
                &format!("encoder.conv{}", i + 1),
                cin,
                cout,
                l,
                2,
                Act::LeakyRelu,
            );
            l = conv.lout;
            convs.push(conv);
        }
        let flat = l * 32;
        let fc1 = Dense::new(arena, "encoder.fc1", flat, 512, Act::LeakyRelu);
        let fc2 = Dense::new(arena, "encoder.fc2", 512, 2 * LATENT_DIM, Act::None);
        ChirpEncoder {
            convs,
            fc1,
            fc2,
            channels,
            len,
        }
    }

    pub fn input_len(&self) -> usize {
        self.channels * self.len
    }
}

#[derive(Debug, Clone)]
pub struct MapDecoder {
    pub fc1: Dense,
    pub fc2: Dense,
    /// Convs after each ×2 upsampling: 64→32, 32→32, 32→16, 16→16.
    pub convs: Vec<Conv2d>,
    pub head: Conv2d,
    pub base: usize,
    pub side: usize,
}

impl MapDecoder {
    fn build<T: Real>(
        arena: &mut ParamArena<T>,
        prefix: &str,
        side: usize,
        head: DecoderHead,
    ) -> Self {
        let base = side / 16;
        assert!(base >= 1 && base * 16 == side);
        let fc1 = Dense::new(arena, &format!("{prefix}.fc1"), LATENT_DIM, 1024, Act::LeakyRelu);
        let fc2 = Dense::new(
            arena,
            &format!("{prefix}.fc2"),
            1024,
            64 * base * base,
            Act::LeakyRelu,
        );
        let chans = [(64usize, 32usize), (32, 32), (32, 16), (16, 16)];
        let mut convs = Vec::new();
        let mut h = base;
        for (i, &(cin, cout)) in chans.iter().enumerate() {
            h *= 2; // upsample precedes each conv
            convs.push(Conv2d::new(
                arena,
                &format!("{prefix}.conv{}", i + 1),
                cin,
                cout,
                h,
                h,
                1,
                Act::LeakyRelu,
            ));
        }
        let head_conv = Conv2d::new(arena, &format!("{prefix}.head"), 16, 1, h, h, 1, head.act());
        MapDecoder {
            fc1,
            fc2,
            convs,
            head: head_conv,
            base,
            side,
        }
    }

    pub fn output_len(&self) -> usize {
        self.side * self.side
    }
}

// ---------------------------------------------------------------------
// activations workspace
// ---------------------------------------------------------------------

#[derive(Debug)]
pub struct MapEncActs<T> {
    pub a: Vec<Vec<T>>, // conv outputs
    pub f1: Vec<T>,
    pub f2: Vec<T>,
}

#[derive(Debug)]
pub struct ChirpEncActs<T> {
    pub a: Vec<Vec<T>>,
    pub f1: Vec<T>,
    pub f2: Vec<T>,
}

#[derive(Debug)]
pub struct MapDecActs<T> {
    pub g1: Vec<T>,
    pub g2: Vec<T>,
    pub u: Vec<Vec<T>>,
    pub c: Vec<Vec<T>>,
    pub out: Vec<T>,
}

/// Per-chunk forward activations plus gradient ping-pong buffers.
#[derive(Debug)]
pub struct VaeActs<T> {
    pub chunk: usize,
    pub map_enc: Option<MapEncActs<T>>,
    pub chirp_enc: Option<ChirpEncActs<T>>,
    pub decs: Vec<MapDecActs<T>>,
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub eps: Vec<T>,
    pub z: Vec<T>,
    pub da: Vec<T>,
    pub db: Vec<T>,
}

// ---------------------------------------------------------------------
// model
// ---------------------------------------------------------------------

/// A VAE: encoder(s), decoder head(s), and one flat parameter arena.
#[derive(Debug, Clone)]
pub struct VaeModel<T> {
    pub variant: Variant,
    pub scale_div: usize,
    pub map_encoder: Option<MapEncoder>,
    pub chirp_encoder: Option<ChirpEncoder>,
    pub decoders: Vec<(DecoderHead, MapDecoder)>,
    pub arena: ParamArena<T>,
    /// Named normalization statistics carried with the model
    /// (e.g. squash stats of the training maps).
    pub stats: Vec<(String, [f64; 2])>,
}

impl<T: Real> VaeModel<T> {
    /// Build a zero-initialized model. `scale_div` of 1 is the full
    /// architecture; 8 is the miniature used for gradient checks.
    pub fn new(variant: Variant, scale_div: usize) -> Self {
        assert!(
            scale_div == 1 || scale_div == 8,
            "supported scale divisors: 1 (full) and 8 (miniature)"
        );
        let mut arena = ParamArena::new();
        let side = 128 / scale_div;
        let (map_encoder, chirp_encoder) = match variant {
            Variant::Rd | Variant::Ra => (Some(MapEncoder::build(&mut arena, side)), None),
            Variant::Chirp => (
                None,
                Some(ChirpEncoder::build(&mut arena, 8, 256 / scale_div)),
            ),
            Variant::ChirpFft => (
                None,
                Some(ChirpEncoder::build(&mut arena, 16, 128 / scale_div)),
            ),
        };
        let decoders = variant
            .heads()
            .iter()
            .map(|&h| {
                let prefix = match (variant, h) {
                    (Variant::Rd, _) | (Variant::Ra, _) => "decoder".to_string(),
                    (_, DecoderHead::Rd) => "decoder_rd".to_string(),
                    (_, DecoderHead::Ra) => "decoder_ra".to_string(),
                };
                (h, MapDecoder::build(&mut arena, &prefix, side, h))
            })
            .collect();
        VaeModel {
            variant,
            scale_div,
            map_encoder,
            chirp_encoder,
            decoders,
            arena,
            stats: Vec::new(),
        }
    }

    /// Uniform fan-in initialization: weights U(±1/√fan_in), biases zero
    /// except the encoder std head (see [`STD_RAW_BIAS_INIT`]).
    pub fn init(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries: Vec<_> = self.arena.entries().to_vec();
        for e in &entries {
            if e.name.ends_with(".weight") {
                let fan_in = e.shape[0] as f64;
                let bound = 1.0 / fan_in.sqrt();
                for v in &mut self.arena.data[e.offset..e.offset + e.len] {
                    let u: f64 = rng.random();
                    *v = T::from_f64((2.0 * u - 1.0) * bound);
                }
            } else {
                for v in &mut self.arena.data[e.offset..e.offset + e.len] {
                    *v = T::ZERO;
                }
                if e.name == "encoder.fc2.bias" {
                    let std_half =
                        &mut self.arena.data[e.offset + LATENT_DIM..e.offset + e.len];
                    for v in std_half.iter_mut() {
                        *v = T::from_f64(STD_RAW_BIAS_INIT);
                    }
                }
            }
        }
    }

    /// Flat input length per sample for this variant.
    pub fn input_len(&self) -> usize {
        match (&self.map_encoder, &self.chirp_encoder) {
            (Some(e), _) => e.input_len(),
            (_, Some(e)) => e.input_len(),
            _ => unreachable!(),
        }
    }

    /// Output length per decoder head.
    pub fn output_len(&self) -> usize {
        self.decoders[0].1.output_len()
    }

    pub fn decoder(&self, head: DecoderHead) -> Result<&MapDecoder> {
        self.decoders
            .iter()
            .find(|(h, _)| *h == head)
            .map(|(_, d)| d)
            .ok_or_else(|| {
                Error::Variant(format!(
                    "variant {} has no {} decoder head",
                    self.variant.name(),
                    head.name()
                ))
            })
    }

    /// Allocate reusable activation buffers for chunks of `chunk` samples.
    pub fn make_acts(&self, chunk: usize) -> VaeActs<T> {
        let mut max_per_sample = self.input_len();
        let map_enc = self.map_encoder.as_ref().map(|e| {
            let a = e
                .convs
                .iter()
                .map(|c| {
                    max_per_sample = max_per_sample.max(c.out_len());
                    vec![T::ZERO; chunk * c.out_len()]
                })
                .collect();
            MapEncActs {
                a,
                f1: vec![T::ZERO; chunk * e.fc1.nout],
                f2: vec![T::ZERO; chunk * e.fc2.nout],
            }
        });
        let chirp_enc = self.chirp_encoder.as_ref().map(|e| {
            let a = e
                .convs
                .iter()
                .map(|c| {
                    max_per_sample = max_per_sample.max(c.out_len());
                    vec![T::ZERO; chunk * c.out_len()]
                })
                .collect();
            ChirpEncActs {
                a,
                f1: vec![T::ZERO; chunk * e.fc1.nout],
                f2: vec![T::ZERO; chunk * e.fc2.nout],
            }
        });
        let decs = self
            .decoders
            .iter()
            .map(|(_, d)| {
                let mut u = Vec::new();
                let mut c = Vec::new();
                for conv in &d.convs {
                    max_per_sample = max_per_sample.max(conv.in_len().max(conv.out_len()));
                    u.push(vec![T::ZERO; chunk * conv.in_len()]);
                    c.push(vec![T::ZERO; chunk * conv.out_len()]);
                }
                MapDecActs {
                    g1: vec![T::ZERO; chunk * d.fc1.nout],
                    g2: vec![T::ZERO; chunk * d.fc2.nout],
                    u,
                    c,
                    out: vec![T::ZERO; chunk * d.output_len()],
                }
            })
            .collect();
        let dense_max = 64 * (128 / self.scale_div / 16).pow(2);
        let max_len = max_per_sample.max(dense_max).max(1024);
        VaeActs {
            chunk,
            map_enc,
            chirp_enc,
            decs,
            mean: vec![T::ZERO; chunk * LATENT_DIM],
            std: vec![T::ZERO; chunk * LATENT_DIM],
            eps: vec![T::ZERO; chunk * LATENT_DIM],
            z: vec![T::ZERO; chunk * LATENT_DIM],
            da: vec![T::ZERO; chunk * max_len],
            db: vec![T::ZERO; chunk * max_len],
        }
    }

    /// Encoder forward over `mb ≤ chunk` samples stored contiguously in
    /// `xs`. Fills `acts.mean` / `acts.std`.
    pub fn encode_chunk(
        &self,
        params: &[T],
        xs: &[T],
        mb: usize,
        acts: &mut VaeActs<T>,
        scratch: &mut Scratch<T>,
    ) {
        let in_len = self.input_len();
        debug_assert!(xs.len() >= mb * in_len);
        if let Some(enc) = &self.map_encoder {
            let ea = acts.map_enc.as_mut().unwrap();
            for s in 0..mb {
                for (ci, conv) in enc.convs.iter().enumerate() {
                    let (prev, cur) = if ci == 0 {
                        (&xs[s * in_len..(s + 1) * in_len], &mut ea.a[0])
                    } else {
                        let (lo, hi) = ea.a.split_at_mut(ci);
                        (
                            &lo[ci - 1][s * enc.convs[ci - 1].out_len()
                                ..(s + 1) * enc.convs[ci - 1].out_len()],
                            &mut hi[0],
                        )
                    };
                    let out = &mut cur[s * conv.out_len()..(s + 1) * conv.out_len()];
                    conv.forward(&self.arena, params, prev, out, scratch);
                }
            }
            let flat = enc.fc1.nin;
            let last = enc.convs.len() - 1;
            enc.fc1.forward(
                &self.arena,
                params,
                &ea.a[last][..mb * flat],
                &mut ea.f1[..mb * enc.fc1.nout],
                mb,
            );
            enc.fc2.forward(
                &self.arena,
                params,
                &ea.f1[..mb * enc.fc1.nout],
                &mut ea.f2[..mb * enc.fc2.nout],
                mb,
            );
            let nout = enc.fc2.nout;
            split_posterior(&ea.f2, nout, mb, &mut acts.mean, &mut acts.std);
        } else {
            let enc = self.chirp_encoder.as_ref().unwrap();
            let ea = acts.chirp_enc.as_mut().unwrap();
            for s in 0..mb {
                for (ci, conv) in enc.convs.iter().enumerate() {
                    let (prev, cur) = if ci == 0 {
                        (&xs[s * in_len..(s + 1) * in_len], &mut ea.a[0])
                    } else {
                        let (lo, hi) = ea.a.split_at_mut(ci);
                        (
                            &lo[ci - 1][s * enc.convs[ci - 1].out_len()
                                ..(s + 1) * enc.convs[ci - 1].out_len()],
                            &mut hi[0],
                        )
                    };
                    let out = &mut cur[s * conv.out_len()..(s + 1) * conv.out_len()];
                    conv.forward(&self.arena, params, prev, out, scratch);
                }
            }
            let flat = enc.fc1.nin;
            let last = enc.convs.len() - 1;
            enc.fc1.forward(
                &self.arena,
                params,
                &ea.a[last][..mb * flat],
                &mut ea.f1[..mb * enc.fc1.nout],
                mb,
            );
            enc.fc2.forward(
                &self.arena,
                params,
                &ea.f1[..mb * enc.fc1.nout],
                &mut ea.f2[..mb * enc.fc2.nout],
                mb,
            );
            let nout = enc.fc2.nout;
            split_posterior(&ea.f2, nout, mb, &mut acts.mean, &mut acts.std);
        }
    }

    /// Decoder forward for head index `di` over `mb` samples of `acts.z`.
    pub fn decode_chunk(
        &self,
        params: &[T],
        di: usize,
        mb: usize,
        acts: &mut VaeActs<T>,
        scratch: &mut Scratch<T>,
    ) {
        let dec = &self.decoders[di].1;
        let da = &mut acts.decs[di];
        dec.fc1.forward(
            &self.arena,
            params,
            &acts.z[..mb * LATENT_DIM],
            &mut da.g1[..mb * dec.fc1.nout],
            mb,
        );
        dec.fc2.forward(
            &self.arena,
            params,
            &da.g1[..mb * dec.fc1.nout],
            &mut da.g2[..mb * dec.fc2.nout],
            mb,
        );
        for s in 0..mb {
            let mut h = dec.base;
            let mut c_in = 64usize;
            for (ci, conv) in dec.convs.iter().enumerate() {
                {
                    let (x, u) = if ci == 0 {
                        (
                            &da.g2[s * dec.fc2.nout..(s + 1) * dec.fc2.nout],
                            &mut da.u[0],
                        )
                    } else {
                        let prev_len = dec.convs[ci - 1].out_len();
                        let (c_bufs, u_bufs) = (&da.c, &mut da.u);
                        (
                            &c_bufs[ci - 1][s * prev_len..(s + 1) * prev_len],
                            &mut u_bufs[ci],
                        )
                    };
                    let u = &mut u[s * conv.in_len()..(s + 1) * conv.in_len()];
                    upsample2x_forward(x, u, h, h, c_in);
                }
                let u = &da.u[ci][s * conv.in_len()..(s + 1) * conv.in_len()];
                let c_out_buf = &mut da.c[ci][s * conv.out_len()..(s + 1) * conv.out_len()];
                conv.forward(&self.arena, params, u, c_out_buf, scratch);
                h *= 2;
                c_in = conv.cout;
            }
            let last = dec.convs.len() - 1;
            let x = &da.c[last][s * dec.convs[last].out_len()..(s + 1) * dec.convs[last].out_len()];
            let out = &mut da.out[s * dec.output_len()..(s + 1) * dec.output_len()];
            dec.head.forward(&self.arena, params, x, out, scratch);
        }
    }

    /// Encode a single input into a posterior (public inference path).
    pub fn encode(&self, x: &[T]) -> Result<LatentPosterior> {
        if x.len() != self.input_len() {
            return Err(Error::shape(
                format!("{} input values", self.input_len()),
                x.len().to_string(),
            ));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric {
                range_bin: 0,
                msg: "non-finite encoder input".into(),
            });
        }
        let mut acts = self.make_acts(1);
        let mut scratch = Scratch::new();
        self.encode_chunk(&self.arena.data, x, 1, &mut acts, &mut scratch);
        let q = LatentPosterior {
            mean: acts.mean[..LATENT_DIM].iter().map(|v| v.to_f64()).collect(),
            std: acts.std[..LATENT_DIM].iter().map(|v| v.to_f64()).collect(),
        };
        q.validate()?;
        Ok(q)
    }

    /// Decode one latent vector through the requested head.
    pub fn decode(&self, z: &[f64], head: DecoderHead) -> Result<Vec<f64>> {
        if z.len() != LATENT_DIM {
            return Err(Error::shape(
                format!("{LATENT_DIM} latent values"),
                z.len().to_string(),
            ));
        }
        let di = self
            .decoders
            .iter()
            .position(|(h, _)| *h == head)
            .ok_or_else(|| {
                Error::Variant(format!(
                    "variant {} has no {} decoder head",
                    self.variant.name(),
                    head.name()
                ))
            })?;
        let mut acts = self.make_acts(1);
        let mut scratch = Scratch::new();
        for (i, &v) in z.iter().enumerate() {
            acts.z[i] = T::from_f64(v);
        }
        let params: Vec<T> = self.arena.data.clone();
        self.decode_chunk(&params, di, 1, &mut acts, &mut scratch);
        Ok(acts.decs[di].out[..self.output_len()]
            .iter()
            .map(|v| v.to_f64())
            .collect())
    }
}

fn split_posterior<T: Real>(f2: &[T], nout: usize, mb: usize, mean: &mut [T], std: &mut [T]) {
    let floor = T::from_f64(STD_FLOOR);
    for s in 0..mb {
        let row = &f2[s * nout..(s + 1) * nout];
        for i in 0..LATENT_DIM {
            mean[s * LATENT_DIM + i] = row[i];
            std[s * LATENT_DIM + i] = softplus(row[LATENT_DIM + i]) + floor;
        }
    }
}

pub fn softplus<T: Real>(x: T) -> T {
    // max(x, 0) + ln(1 + exp(−|x|))
    let zero = T::ZERO;
    let pos = if x > zero { x } else { zero };
    pos + (T::ONE + (-x.abs()).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_examples() {
        let q = LatentPosterior {
            mean: vec![0.0; 32],
            std: vec![1.0; 32],
        };
        assert_eq!(kl_to_standard_normal(&q), 0.0);

        let q = LatentPosterior {
            mean: vec![1.0; 32],
            std: vec![1.0; 32],
        };
        assert!((kl_to_standard_normal(&q) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn kl_nonnegative_and_zero_only_at_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let mean: Vec<f64> = (0..32).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let std: Vec<f64> = (0..32).map(|_| rng.random::<f64>() * 2.0 + 0.05).collect();
            let q = LatentPosterior { mean, std };
            let kl = kl_to_standard_normal(&q);
            assert!(kl >= 0.0);
            let at_prior = q.mean.iter().all(|&m| m == 0.0) && q.std.iter().all(|&s| s == 1.0);
            if kl == 0.0 {
                assert!(at_prior);
            }
        }
    }

    #[test]
    fn kl_matches_monte_carlo() {
        // E_q[ln q − ln p] over 10^6 samples, one shared generator
        let mean: Vec<f64> = (0..32)
            .map(|i| ((i * 37) % 19) as f64 * 0.1 - 0.9)
            .collect();
        let std: Vec<f64> = (0..32).map(|i| 0.3 + ((i * 11) % 17) as f64 * 0.1).collect();
        let q = LatentPosterior { mean, std };
        let closed = kl_to_standard_normal(&q);

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000usize;
        let mut acc = 0.0f64;
        for _ in 0..n {
            for i in 0..32 {
                let e: f64 = StandardNormal.sample(&mut rng);
                let z = q.mean[i] + q.std[i] * e;
                // ln q(z) − ln p(z), shared Gaussian constants cancel
                let lq = -0.5 * e * e - q.std[i].ln();
                let lp = -0.5 * z * z;
                acc += lq - lp;
            }
        }
        let mc = acc / n as f64;
        assert!(
            (mc - closed).abs() / closed < 0.01,
            "MC {mc} vs closed {closed}"
        );
    }

    #[test]
    fn reparameterize_is_seeded_and_centred() {
        let q = LatentPosterior {
            mean: (0..32).map(|i| i as f64 * 0.1).collect(),
            std: vec![0.5; 32],
        };
        assert_eq!(reparameterize(&q, 3), reparameterize(&q, 3));
        assert_ne!(reparameterize(&q, 3), reparameterize(&q, 4));

        // tiny std → z ≈ mean
        let tight = LatentPosterior {
            mean: q.mean.clone(),
            std: vec![STD_FLOOR; 32],
        };
        let z = reparameterize(&tight, 0);
        for (zi, mi) in z.iter().zip(&tight.mean) {
            assert!((zi - mi).abs() < 1e-4);
        }

        // moment check over many draws
        let n = 100_000;
        let mut sum = vec![0.0; 32];
        let mut sum_sq = vec![0.0; 32];
        for seed in 0..n {
            let z = reparameterize(&q, seed);
            for i in 0..32 {
                sum[i] += z[i];
                sum_sq[i] += z[i] * z[i];
            }
        }
        for i in 0..32 {
            let m = sum[i] / n as f64;
            let v = sum_sq[i] / n as f64 - m * m;
            assert!((m - q.mean[i]).abs() < 0.02 * (1.0 + q.mean[i].abs()));
            assert!((v.sqrt() - 0.5).abs() / 0.5 < 0.02);
        }
    }

    #[test]
    fn elbo_loss_examples() {
        let q = LatentPosterior {
            mean: vec![0.0; 32],
            std: vec![1.0; 32],
        };
        let x = vec![0.25; 64];
        let (recon, kl) = elbo_loss(&[&x], &[&x], &q).unwrap();
        assert_eq!(recon, 0.0);
        assert_eq!(kl, 0.0);

        // chirp-style: recon term is the sum of the per-head MSEs
        let a = vec![0.0; 10];
        let b = vec![1.0; 10];
        let (recon, _) = elbo_loss(&[&a, &a], &[&b, &a], &q).unwrap();
        assert!((recon - 1.0).abs() < 1e-12);

        // brute-force double loop oracle
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let r: Vec<f64> = (0..50).map(|i| (i as f64 * 0.21).cos()).collect();
        let mut manual = 0.0;
        for i in 0..50 {
            manual += (x[i] - r[i]) * (x[i] - r[i]);
        }
        manual /= 50.0;
        let (recon, _) = elbo_loss(&[&x], &[&r], &q).unwrap();
        assert!((recon - manual).abs() < 1e-12);

        assert!(elbo_loss(&[&a], &[&b, &a], &q).is_err());
    }

    #[test]
    fn variant_round_trip() {
        for v in [Variant::Rd, Variant::Ra, Variant::Chirp, Variant::ChirpFft] {
            assert_eq!(Variant::from_tag(v.tag()).unwrap(), v);
            assert_eq!(Variant::parse(v.name()).unwrap(), v);
        }
        assert!(Variant::parse("bogus").is_err());
        assert!(Variant::from_tag(9).is_err());
    }

    #[test]
    fn encode_decode_shapes_and_determinism() {
        let mut model = VaeModel::<f32>::new(Variant::Rd, 8);
        model.init(42);
        let x = vec![0.5f32; model.input_len()];
        let q1 = model.encode(&x).unwrap();
        let q2 = model.encode(&x).unwrap();
        assert_eq!(q1, q2);
        assert_eq!(q1.mean.len(), 32);
        assert!(q1.std.iter().all(|&s| s > 0.0));
        assert!(q1.mean.iter().all(|&m| m.abs() < 1e3));

        let z = vec![0.1; 32];
        let rd = model.decode(&z, DecoderHead::Rd).unwrap();
        assert_eq!(rd.len(), 16 * 16);
        // rd variant has no ra head
        assert!(model.decode(&z, DecoderHead::Ra).is_err());

        // wrong input size → shape error
        assert!(model.encode(&x[1..]).is_err());
    }

    #[test]
    fn random_inputs_give_sane_posteriors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for variant in [Variant::Rd, Variant::Chirp, Variant::ChirpFft] {
            let mut model = VaeModel::<f32>::new(variant, 8);
            model.init(7);
            for trial in 0..10 {
                let x: Vec<f32> = (0..model.input_len())
                    .map(|_| rng.random::<f32>() * 2.0 - 1.0)
                    .collect();
                let q = model.encode(&x).unwrap();
                assert!(
                    q.mean.iter().all(|&m| m.abs() < 1e3),
                    "{variant:?} trial {trial}"
                );
                assert!(q.std.iter().all(|&s| s > 0.0 && s < 1e3));
            }
        }
    }

    #[test]
    fn zero_params_decode_constants() {
        // zero weights/biases: RD head emits 0, RA head sigmoid(0) = 0.5
        let model = VaeModel::<f64>::new(Variant::Chirp, 8);
        let z = vec![0.0; 32];
        let rd = model.decode(&z, DecoderHead::Rd).unwrap();
        assert!(rd.iter().all(|&v| v == 0.0));
        let ra = model.decode(&z, DecoderHead::Ra).unwrap();
        assert!(ra.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn chirp_variant_has_both_heads() {
        let model = VaeModel::<f32>::new(Variant::Chirp, 8);
        assert!(model.decoder(DecoderHead::Rd).is_ok());
        assert!(model.decoder(DecoderHead::Ra).is_ok());
        let rd_only = VaeModel::<f32>::new(Variant::Rd, 8);
        assert!(rd_only.decoder(DecoderHead::Ra).is_err());
    }

    #[test]
    fn softplus_behaviour() {
        assert!((softplus(0.0f64) - (2.0f64).ln()).abs() < 1e-15);
        assert!((softplus(30.0f64) - 30.0).abs() < 1e-12);
        assert!(softplus(-30.0f64) > 0.0);
        assert!(softplus(-30.0f64) < 1e-12);
    }
}
