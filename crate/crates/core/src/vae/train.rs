//! GECO-weighted VAE training.
//!
//! One optimizer step processes a shuffled mini-batch in fixed chunks of
//! [`CHUNK`] samples. Chunks run on their own workers and accumulate
//! gradients into per-chunk buffers that are combined with a fixed pairwise
//! tree, so a run is bit-reproducible for a given seed regardless of how
//! the chunks were scheduled. The loss is `kl + λ·recon` with λ driven by
//! the GECO controller from the batch reconstruction error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Error;
use crate::nn::adam::Adam;
use crate::nn::layers::Scratch;
use crate::nn::real::Real;
use crate::Result;

use super::geco::{geco_step, GecoState};
use super::{VaeActs, VaeModel, Variant, CHUNK, LATENT_DIM, STD_FLOOR};

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainHyper {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub geco: GecoState,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            lr: 1e-4,
            epochs: 500,
            batch: 32,
            seed: 0,
            geco: GecoState::default(),
        }
    }
}

/// Per-epoch averages and the controller state after the epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub recon: f64,
    pub kl: f64,
    pub multiplier: f64,
}

/// Reconstruction targets.
#[derive(Debug, Clone)]
pub enum TrainTargets {
    /// Map variants reconstruct their own input.
    SameAsInput,
    /// Chirp variants reconstruct both squashed maps.
    Maps {
        rd: Vec<Vec<f32>>,
        ra: Vec<Vec<f32>>,
    },
}

/// A prepared training set: preprocessed inputs plus targets.
#[derive(Debug, Clone)]
pub struct VaeDataset {
    pub inputs: Vec<Vec<f32>>,
    pub targets: TrainTargets,
}

impl VaeDataset {
    fn validate(&self, model: &VaeModel<f32>) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::validation("empty training dataset"));
        }
        let in_len = model.input_len();
        for (i, x) in self.inputs.iter().enumerate() {
            if x.len() != in_len {
                return Err(Error::shape(
                    format!("sample {i}: {in_len} values"),
                    x.len().to_string(),
                ));
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::validation(format!("non-finite value in sample {i}")));
            }
        }
        let out_len = model.output_len();
        match (&self.targets, model.variant) {
            (TrainTargets::SameAsInput, Variant::Rd | Variant::Ra) => {
                if in_len != out_len {
                    return Err(Error::shape(out_len.to_string(), in_len.to_string()));
                }
            }
            (TrainTargets::Maps { rd, ra }, Variant::Chirp | Variant::ChirpFft) => {
                if rd.len() != self.inputs.len() || ra.len() != self.inputs.len() {
                    return Err(Error::shape(
                        format!("{} target maps", self.inputs.len()),
                        format!("{} rd / {} ra", rd.len(), ra.len()),
                    ));
                }
                for m in rd.iter().chain(ra) {
                    if m.len() != out_len {
                        return Err(Error::shape(out_len.to_string(), m.len().to_string()));
                    }
                }
            }
            _ => {
                return Err(Error::Variant(format!(
                    "target kind does not match variant {}",
                    model.variant.name()
                )))
            }
        }
        Ok(())
    }

    fn target(&self, head_idx: usize, sample: usize) -> &[f32] {
        match &self.targets {
            TrainTargets::SameAsInput => &self.inputs[sample],
            TrainTargets::Maps { rd, ra } => {
                if head_idx == 0 {
                    &rd[sample]
                } else {
                    &ra[sample]
                }
            }
        }
    }
}

fn mix_seed(a: u64, b: u64, c: u64) -> u64 {
    let mut x = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ c.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Reusable buffers for one chunk's forward/backward pass.
pub struct GradWorker<T> {
    pub acts: VaeActs<T>,
    pub scratch: Scratch<T>,
    pub grads: Vec<T>,
    dg: Vec<T>,
    dz: Vec<T>,
}

impl<T: Real> GradWorker<T> {
    pub fn new(model: &VaeModel<T>) -> Self {
        let dg_len = model
            .decoders
            .iter()
            .map(|(_, d)| d.fc2.nout)
            .chain(model.map_encoder.as_ref().map(|e| e.fc1.nin))
            .chain(model.chirp_encoder.as_ref().map(|e| e.fc1.nin))
            .max()
            .unwrap()
            .max(2 * LATENT_DIM);
        GradWorker {
            acts: model.make_acts(CHUNK),
            scratch: Scratch::new(),
            grads: model.arena.zeros_like(),
            dg: vec![T::ZERO; CHUNK * dg_len],
            dz: vec![T::ZERO; CHUNK * LATENT_DIM],
        }
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = T::ZERO);
    }
}

/// Forward + backward over `mb` samples with explicit parameters and
/// reparameterization noise. `targets` is head-major (`targets[di·mb+s]`).
/// Gradients of `kl_mean + λ·recon_mean` (means over `batch_size`)
/// accumulate into `w.grads`; returns the summed per-sample
/// (recon, kl) terms.
pub fn chunk_grads<T: Real>(
    model: &VaeModel<T>,
    params: &[T],
    xs: &[T],
    targets: &[&[T]],
    eps: &[T],
    lambda: f64,
    batch_size: usize,
    w: &mut GradWorker<T>,
) -> (f64, f64) {
    let n_heads = model.decoders.len();
    let in_len = model.input_len();
    let out_len = model.output_len();
    let mb = xs.len() / in_len;
    debug_assert_eq!(targets.len(), n_heads * mb);
    debug_assert_eq!(eps.len(), mb * LATENT_DIM);

    model.encode_chunk(params, xs, mb, &mut w.acts, &mut w.scratch);
    w.acts.eps[..mb * LATENT_DIM].copy_from_slice(eps);
    for o in 0..mb * LATENT_DIM {
        w.acts.z[o] = w.acts.mean[o] + w.acts.std[o] * w.acts.eps[o];
    }
    for di in 0..n_heads {
        model.decode_chunk(params, di, mb, &mut w.acts, &mut w.scratch);
    }

    // loss terms
    let mut recon_sum = 0.0f64;
    let mut kl_sum = 0.0f64;
    for s in 0..mb {
        for di in 0..n_heads {
            let out = &w.acts.decs[di].out[s * out_len..(s + 1) * out_len];
            let target = targets[di * mb + s];
            let se: f64 = out
                .iter()
                .zip(target)
                .map(|(&o, &t)| {
                    let d = (o - t).to_f64();
                    d * d
                })
                .sum();
            recon_sum += se / out_len as f64;
        }
        for i in 0..LATENT_DIM {
            let m = w.acts.mean[s * LATENT_DIM + i].to_f64();
            let sd = w.acts.std[s * LATENT_DIM + i].to_f64();
            kl_sum += 0.5 * (m * m + sd * sd - 1.0 - 2.0 * sd.ln());
        }
    }

    // ---- backward ----
    // the optimized loss weighs the reconstruction per sample (summed over
    // elements): with a per-element average, the KL's σ-gradient (-1/σ)
    // out-muscles any multiplier the clamp allows and the posterior
    // collapses; reported terms stay per-element for the controller
    let arena = &model.arena;
    w.dz[..mb * LATENT_DIM].iter_mut().for_each(|v| *v = T::ZERO);
    let recon_scale = T::from_f64(2.0 * lambda / batch_size as f64);

    for (di, (_, dec)) in model.decoders.iter().enumerate() {
        // conv-chain backward per sample, d(fc2 out) staged into w.dg
        for s in 0..mb {
            let target = targets[di * mb + s];
            let max_len = w.acts.da.len() / w.acts.chunk;
            let (da, db) = (&mut w.acts.da, &mut w.acts.db);
            let da_s = &mut da[s * max_len..s * max_len + max_len];
            let db_s = &mut db[s * max_len..s * max_len + max_len];
            let dacts = &w.acts.decs[di];

            let out = &dacts.out[s * out_len..(s + 1) * out_len];
            for ((d, &o), &t) in da_s.iter_mut().zip(out).zip(target) {
                *d = (o - t) * recon_scale;
            }

            let head_in_len = dec.head.in_len();
            let x = &dacts.c[3][s * head_in_len..(s + 1) * head_in_len];
            dec.head.backward(
                arena,
                params,
                x,
                out,
                &mut da_s[..out_len],
                Some(&mut db_s[..head_in_len]),
                &mut w.grads,
                &mut w.scratch,
            );

            // convs 4..1; the upsample bounce keeps d in db_s
            let mut h_out = dec.side;
            for ci in (0..dec.convs.len()).rev() {
                let conv = &dec.convs[ci];
                let x = &dacts.u[ci][s * conv.in_len()..(s + 1) * conv.in_len()];
                let y = &dacts.c[ci][s * conv.out_len()..(s + 1) * conv.out_len()];
                conv.backward(
                    arena,
                    params,
                    x,
                    y,
                    &mut db_s[..conv.out_len()],
                    Some(&mut da_s[..conv.in_len()]),
                    &mut w.grads,
                    &mut w.scratch,
                );
                let h_prev = h_out / 2;
                let c_prev = conv.cin;
                crate::nn::layers::upsample2x_backward(
                    &da_s[..conv.in_len()],
                    &mut db_s[..h_prev * h_prev * c_prev],
                    h_prev,
                    h_prev,
                    c_prev,
                );
                h_out = h_prev;
            }
            let nf = dec.fc2.nout;
            w.dg[s * nf..(s + 1) * nf].copy_from_slice(&db_s[..nf]);
        }

        // dense stage over the chunk
        let dacts = &w.acts.decs[di];
        dec.fc2.backward(
            arena,
            params,
            &dacts.g1[..mb * dec.fc1.nout],
            &dacts.g2[..mb * dec.fc2.nout],
            &mut w.dg[..mb * dec.fc2.nout],
            Some(&mut w.acts.da[..mb * dec.fc1.nout]),
            &mut w.grads,
            mb,
        );
        dec.fc1.backward(
            arena,
            params,
            &w.acts.z[..mb * LATENT_DIM],
            &dacts.g1[..mb * dec.fc1.nout],
            &mut w.acts.da[..mb * dec.fc1.nout],
            Some(&mut w.acts.db[..mb * LATENT_DIM]),
            &mut w.grads,
            mb,
        );
        for (dz, &d) in w.dz[..mb * LATENT_DIM]
            .iter_mut()
            .zip(&w.acts.db[..mb * LATENT_DIM])
        {
            *dz += d;
        }
    }

    // reparameterization + KL → d over the encoder's fc2 output
    let kl_scale = T::from_f64(1.0 / batch_size as f64);
    let floor = T::from_f64(STD_FLOOR);
    for s in 0..mb {
        for i in 0..LATENT_DIM {
            let o = s * LATENT_DIM + i;
            let mean = w.acts.mean[o];
            let std = w.acts.std[o];
            let dz = w.dz[o];
            let d_mean = dz + mean * kl_scale;
            let d_std = dz * w.acts.eps[o] + (std - T::ONE / std) * kl_scale;
            // softplus'(raw) through the stored std: 1 − exp(−softplus)
            let sp = std - floor;
            let d_raw = d_std * (T::ONE - (-sp).exp());
            let row = s * 2 * LATENT_DIM;
            w.dg[row + i] = d_mean;
            w.dg[row + LATENT_DIM + i] = d_raw;
        }
    }

    // encoder backward
    enum EncRef<'a> {
        Map(&'a super::MapEncoder),
        Chirp(&'a super::ChirpEncoder),
    }
    let (enc, n_convs, flat, fc1, fc2) = if let Some(e) = &model.map_encoder {
        (EncRef::Map(e), e.convs.len(), e.fc1.nin, &e.fc1, &e.fc2)
    } else {
        let e = model.chirp_encoder.as_ref().unwrap();
        (EncRef::Chirp(e), e.convs.len(), e.fc1.nin, &e.fc1, &e.fc2)
    };
    {
        let (f1, f2, a_last): (&[T], &[T], &[T]) = match (&enc, &w.acts.map_enc, &w.acts.chirp_enc)
        {
            (EncRef::Map(_), Some(ea), _) => (&ea.f1, &ea.f2, &ea.a[n_convs - 1]),
            (EncRef::Chirp(_), _, Some(ea)) => (&ea.f1, &ea.f2, &ea.a[n_convs - 1]),
            _ => unreachable!(),
        };
        fc2.backward(
            arena,
            params,
            &f1[..mb * fc1.nout],
            &f2[..mb * fc2.nout],
            &mut w.dg[..mb * fc2.nout],
            Some(&mut w.acts.da[..mb * fc1.nout]),
            &mut w.grads,
            mb,
        );
        fc1.backward(
            arena,
            params,
            &a_last[..mb * flat],
            &f1[..mb * fc1.nout],
            &mut w.acts.da[..mb * fc1.nout],
            Some(&mut w.acts.db[..mb * flat]),
            &mut w.grads,
            mb,
        );
    }

    // stage each sample's d(a_last) row before the per-sample chains can
    // overwrite the chunk-flat layout in db
    let dg_len = w.dg.len() / w.acts.chunk;
    debug_assert!(dg_len >= flat);
    for s in 0..mb {
        let (src, dst) = (&w.acts.db[s * flat..(s + 1) * flat], &mut w.dg);
        dst[s * dg_len..s * dg_len + flat].copy_from_slice(src);
    }

    for s in 0..mb {
        let max_len = w.acts.da.len() / w.acts.chunk;
        for (k, ci) in (0..n_convs).rev().enumerate() {
            let (conv_in_len, conv_out_len) = match &enc {
                EncRef::Map(e) => (e.convs[ci].in_len(), e.convs[ci].out_len()),
                EncRef::Chirp(e) => (e.convs[ci].in_len(), e.convs[ci].out_len()),
            };
            let need_dx = ci != 0;
            // dy source: staged dg row for the top layer, then da/db ping-pong
            enum Buf {
                Dg,
                Da,
                Db,
            }
            let dy_side = if k == 0 {
                Buf::Dg
            } else if k % 2 == 1 {
                Buf::Da
            } else {
                Buf::Db
            };
            let dx_side = if k % 2 == 0 { Buf::Da } else { Buf::Db };
            let (dg_buf, da_buf, db_buf) = (&mut w.dg, &mut w.acts.da, &mut w.acts.db);
            let (dy, dx_buf): (&mut [T], &mut Vec<T>) = match (dy_side, dx_side) {
                (Buf::Dg, Buf::Da) => (
                    &mut dg_buf[s * dg_len..s * dg_len + conv_out_len],
                    da_buf,
                ),
                (Buf::Da, Buf::Db) => (
                    &mut da_buf[s * max_len..s * max_len + conv_out_len],
                    db_buf,
                ),
                (Buf::Db, Buf::Da) => (
                    &mut db_buf[s * max_len..s * max_len + conv_out_len],
                    da_buf,
                ),
                _ => unreachable!(),
            };
            let dx = if need_dx {
                Some(&mut dx_buf[s * max_len..s * max_len + conv_in_len])
            } else {
                None
            };
            match (&enc, &w.acts.map_enc, &w.acts.chirp_enc) {
                (EncRef::Map(e), Some(ea), _) => {
                    let conv = &e.convs[ci];
                    let x = if ci == 0 {
                        &xs[s * in_len..(s + 1) * in_len]
                    } else {
                        &ea.a[ci - 1][s * conv.in_len()..(s + 1) * conv.in_len()]
                    };
                    let y = &ea.a[ci][s * conv.out_len()..(s + 1) * conv.out_len()];
                    conv.backward(arena, params, x, y, dy, dx, &mut w.grads, &mut w.scratch);
                }
                (EncRef::Chirp(e), _, Some(ea)) => {
                    let conv = &e.convs[ci];
                    let x = if ci == 0 {
                        &xs[s * in_len..(s + 1) * in_len]
                    } else {
                        &ea.a[ci - 1][s * conv.in_len()..(s + 1) * conv.in_len()]
                    };
                    let y = &ea.a[ci][s * conv.out_len()..(s + 1) * conv.out_len()];
                    conv.backward(arena, params, x, y, dy, dx, &mut w.grads, &mut w.scratch);
                }
                _ => unreachable!(),
            }
        }
    }

    (recon_sum, kl_sum)
}

/// Forward-only loss of one chunk at explicit parameters: returns summed
/// per-sample (recon, kl). Used by the finite-difference checks.
pub fn chunk_loss<T: Real>(
    model: &VaeModel<T>,
    params: &[T],
    xs: &[T],
    targets: &[&[T]],
    eps: &[T],
    acts: &mut VaeActs<T>,
    scratch: &mut Scratch<T>,
) -> (f64, f64) {
    let n_heads = model.decoders.len();
    let in_len = model.input_len();
    let out_len = model.output_len();
    let mb = xs.len() / in_len;

    model.encode_chunk(params, xs, mb, acts, scratch);
    acts.eps[..mb * LATENT_DIM].copy_from_slice(eps);
    for o in 0..mb * LATENT_DIM {
        acts.z[o] = acts.mean[o] + acts.std[o] * acts.eps[o];
    }
    for di in 0..n_heads {
        model.decode_chunk(params, di, mb, acts, scratch);
    }
    let mut recon_sum = 0.0f64;
    let mut kl_sum = 0.0f64;
    for s in 0..mb {
        for di in 0..n_heads {
            let out = &acts.decs[di].out[s * out_len..(s + 1) * out_len];
            let target = targets[di * mb + s];
            let se: f64 = out
                .iter()
                .zip(target)
                .map(|(&o, &t)| {
                    let d = (o - t).to_f64();
                    d * d
                })
                .sum();
            recon_sum += se / out_len as f64;
        }
        for i in 0..LATENT_DIM {
            let m = acts.mean[s * LATENT_DIM + i].to_f64();
            let sd = acts.std[s * LATENT_DIM + i].to_f64();
            kl_sum += 0.5 * (m * m + sd * sd - 1.0 - 2.0 * sd.ln());
        }
    }
    (recon_sum, kl_sum)
}

struct TrainWorker {
    gw: GradWorker<f32>,
    xbuf: Vec<f32>,
    eps: Vec<f32>,
    recon_sum: f64,
    kl_sum: f64,
}

/// Train a freshly initialized model of `variant` on `dataset`.
///
/// Deterministic for a given seed: shuffling, initialization and the
/// reparameterization noise all derive from it, and gradient reduction
/// order is fixed.
pub fn train_vae(
    variant: Variant,
    dataset: &VaeDataset,
    hyper: &TrainHyper,
) -> Result<(VaeModel<f32>, Vec<EpochLog>)> {
    let mut model = VaeModel::<f32>::new(variant, 1);
    model.init(hyper.seed);
    let logs = train_model(&mut model, dataset, hyper)?;
    Ok((model, logs))
}

/// Train an already-initialized model in place.
pub fn train_model(
    model: &mut VaeModel<f32>,
    dataset: &VaeDataset,
    hyper: &TrainHyper,
) -> Result<Vec<EpochLog>> {
    dataset.validate(model)?;
    if hyper.batch == 0 {
        return Err(Error::validation("batch size must be >= 1"));
    }
    let n = dataset.inputs.len();
    let in_len = model.input_len();
    let n_heads = model.decoders.len();
    let mut adam = Adam::<f32>::new(model.arena.len(), hyper.lr);
    let mut geco = hyper.geco;
    let max_chunks = hyper.batch.div_ceil(CHUNK);
    let mut workers: Vec<TrainWorker> = (0..max_chunks)
        .map(|_| TrainWorker {
            gw: GradWorker::new(model),
            xbuf: vec![0.0; CHUNK * in_len],
            eps: vec![0.0; CHUNK * LATENT_DIM],
            recon_sum: 0.0,
            kl_sum: 0.0,
        })
        .collect();
    let mut logs = Vec::with_capacity(hyper.epochs);

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..hyper.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(hyper.seed, epoch as u64, 0x5u64));
        order.shuffle(&mut rng);

        let mut epoch_recon = 0.0f64;
        let mut epoch_kl = 0.0f64;

        let mut start = 0usize;
        while start < n {
            let bs = (n - start).min(hyper.batch);
            let batch = &order[start..start + bs];
            let lambda = geco.multiplier;
            let n_chunks = bs.div_ceil(CHUNK);

            {
                let model_ref: &VaeModel<f32> = model;
                // one OS thread per core, striped over per-chunk workers;
                // gradients stay in per-chunk buffers so the reduction tree
                // (and therefore the result) is independent of the stripe
                let n_threads = std::thread::available_parallelism()
                    .map(|p| p.get())
                    .unwrap_or(1)
                    .min(n_chunks);
                std::thread::scope(|scope| {
                    let mut stripes: Vec<Vec<(usize, &mut TrainWorker)>> =
                        (0..n_threads).map(|_| Vec::new()).collect();
                    for (ci, w) in workers[..n_chunks].iter_mut().enumerate() {
                        stripes[ci % n_threads].push((ci, w));
                    }
                    for stripe in stripes {
                        let batch_ref = batch;
                        scope.spawn(move || {
                            for (ci, w) in stripe {
                                let lo = ci * CHUNK;
                                let hi = (lo + CHUNK).min(bs);
                                let idx = &batch_ref[lo..hi];
                                let pos0 = start + lo;
                                let mb = idx.len();
                                for (s, &di) in idx.iter().enumerate() {
                                    w.xbuf[s * in_len..(s + 1) * in_len]
                                        .copy_from_slice(&dataset.inputs[di]);
                                }
                                for s in 0..mb {
                                    let mut erng = ChaCha8Rng::seed_from_u64(mix_seed(
                                        hyper.seed,
                                        epoch as u64,
                                        (pos0 + s) as u64,
                                    ));
                                    for i in 0..LATENT_DIM {
                                        let e: f64 = StandardNormal.sample(&mut erng);
                                        w.eps[s * LATENT_DIM + i] = e as f32;
                                    }
                                }
                                let targets: Vec<&[f32]> = (0..n_heads)
                                    .flat_map(|di| {
                                        idx.iter().map(move |&sample| dataset.target(di, sample))
                                    })
                                    .collect();
                                w.gw.zero_grads();
                                let (recon, kl) = chunk_grads(
                                    model_ref,
                                    &model_ref.arena.data,
                                    &w.xbuf[..mb * in_len],
                                    &targets,
                                    &w.eps[..mb * LATENT_DIM],
                                    lambda,
                                    bs,
                                    &mut w.gw,
                                );
                                w.recon_sum = recon;
                                w.kl_sum = kl;
                            }
                        });
                    }
                });
            }

            // fixed pairwise-tree gradient reduction
            let mut stride = 1usize;
            while stride < n_chunks {
                let mut i = 0;
                while i + stride < n_chunks {
                    let (lo, hi) = workers.split_at_mut(i + stride);
                    let dst = &mut lo[i].gw.grads;
                    let src = &hi[0].gw.grads;
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                    i += 2 * stride;
                }
                stride *= 2;
            }

            let batch_recon: f64 = workers[..n_chunks]
                .iter()
                .map(|w| w.recon_sum)
                .sum::<f64>()
                / bs as f64;
            let batch_kl: f64 =
                workers[..n_chunks].iter().map(|w| w.kl_sum).sum::<f64>() / bs as f64;
            if !batch_recon.is_finite() || !batch_kl.is_finite() {
                return Err(Error::Numeric {
                    range_bin: 0,
                    msg: format!(
                        "non-finite loss at epoch {epoch}, batch offset {start}: recon {batch_recon}, kl {batch_kl}, lambda {lambda:.3e}"
                    ),
                });
            }

            adam.step(&mut model.arena.data, &workers[0].gw.grads);
            geco = geco_step(&geco, batch_recon);

            epoch_recon += batch_recon * bs as f64;
            epoch_kl += batch_kl * bs as f64;
            start += bs;
        }

        logs.push(EpochLog {
            epoch,
            recon: epoch_recon / n as f64,
            kl: epoch_kl / n as f64,
            multiplier: geco.multiplier,
        });
    }
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vae::DecoderHead;

    fn toy_dataset(n: usize, len: usize) -> VaeDataset {
        // two blob classes so there is something to encode
        let inputs = (0..n)
            .map(|i| {
                let mut v = vec![0.1f32; len];
                let pos = if i % 2 == 0 { len / 4 } else { 3 * len / 4 };
                for d in 0..len / 8 {
                    v[pos + d] = 0.9;
                }
                v
            })
            .collect();
        VaeDataset {
            inputs,
            targets: TrainTargets::SameAsInput,
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = toy_dataset(8, 128 * 128);
        let hyper = TrainHyper {
            epochs: 0,
            seed: 9,
            ..TrainHyper::default()
        };
        let (model, logs) = train_vae(Variant::Rd, &data, &hyper).unwrap();
        assert!(logs.is_empty());
        let mut reference = VaeModel::<f32>::new(Variant::Rd, 1);
        reference.init(9);
        assert_eq!(model.arena.data, reference.arena.data);
    }

    #[test]
    fn same_seed_identical_loss_curves() {
        let data = toy_dataset(16, 128 * 128);
        let hyper = TrainHyper {
            epochs: 2,
            batch: 8,
            seed: 4,
            ..TrainHyper::default()
        };
        let (m1, l1) = train_vae(Variant::Rd, &data, &hyper).unwrap();
        let (m2, l2) = train_vae(Variant::Rd, &data, &hyper).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(m1.arena.data, m2.arena.data);
    }

    #[test]
    fn loss_decreases_on_tiny_problem() {
        let data = toy_dataset(32, 128 * 128);
        let hyper = TrainHyper {
            epochs: 12,
            batch: 16,
            seed: 1,
            lr: 3e-4,
            ..TrainHyper::default()
        };
        let (_, logs) = train_vae(Variant::Rd, &data, &hyper).unwrap();
        let first = logs.first().unwrap().recon;
        let last = logs.last().unwrap().recon;
        assert!(
            last < first,
            "reconstruction did not improve: {first} → {last}"
        );
    }

    #[test]
    fn empty_dataset_rejected() {
        let data = VaeDataset {
            inputs: vec![],
            targets: TrainTargets::SameAsInput,
        };
        assert!(train_vae(Variant::Rd, &data, &TrainHyper::default()).is_err());
    }

    #[test]
    fn chirp_variant_trains_against_both_maps() {
        let n = 8;
        let inputs: Vec<Vec<f32>> = (0..n).map(|i| vec![0.01 * i as f32; 8 * 256]).collect();
        let maps: Vec<Vec<f32>> = (0..n)
            .map(|i| vec![0.3 + 0.05 * i as f32; 128 * 128])
            .collect();
        let data = VaeDataset {
            inputs,
            targets: TrainTargets::Maps {
                rd: maps.clone(),
                ra: maps,
            },
        };
        let hyper = TrainHyper {
            epochs: 1,
            batch: 8,
            seed: 2,
            ..TrainHyper::default()
        };
        let (model, logs) = train_vae(Variant::Chirp, &data, &hyper).unwrap();
        assert_eq!(logs.len(), 1);
        assert!(logs[0].recon.is_finite());
        assert!(model.decoder(DecoderHead::Ra).is_ok());
    }

    #[test]
    fn divergence_aborts_with_diagnostics() {
        // an absurd learning rate blows the f32 forward up within a few
        // steps; the trainer must stop with a numeric error, not NaN-loop
        let data = toy_dataset(8, 128 * 128);
        let hyper = TrainHyper {
            epochs: 50,
            batch: 8,
            seed: 3,
            lr: 1e12,
            ..TrainHyper::default()
        };
        match train_vae(Variant::Rd, &data, &hyper) {
            Err(crate::error::Error::Numeric { msg, .. }) => {
                assert!(msg.contains("epoch"), "diagnostic should locate the step: {msg}");
            }
            Ok(_) => panic!("training at lr 1e12 should diverge"),
            Err(other) => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn target_variant_mismatch_rejected() {
        let data = VaeDataset {
            inputs: vec![vec![0.0; 8 * 256]],
            targets: TrainTargets::SameAsInput,
        };
        assert!(train_vae(Variant::Chirp, &data, &TrainHyper::default()).is_err());
    }

    /// Full-model f64 finite-difference check of `chunk_grads` on the
    /// miniature architecture, both variants.
    #[test]
    fn chunk_grads_matches_finite_differences() {
        use rand::Rng;
        for variant in [Variant::Rd, Variant::Chirp] {
            let mut model = VaeModel::<f64>::new(variant, 8);
            model.init(21);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mb = 2usize;
            let in_len = model.input_len();
            let out_len = model.output_len();
            let n_heads = model.decoders.len();
            let xs: Vec<f64> = (0..mb * in_len).map(|_| rng.random::<f64>()).collect();
            let tdata: Vec<Vec<f64>> = (0..n_heads * mb)
                .map(|_| (0..out_len).map(|_| rng.random::<f64>()).collect())
                .collect();
            let targets: Vec<&[f64]> = tdata.iter().map(|t| t.as_slice()).collect();
            let eps: Vec<f64> = (0..mb * LATENT_DIM)
                .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                .collect();
            let lambda = 2.37;
            let bs = mb;

            let mut gw = GradWorker::new(&model);
            gw.zero_grads();
            let params = model.arena.data.clone();
            chunk_grads(&model, &params, &xs, &targets, &eps, lambda, bs, &mut gw);

            let mut acts = model.make_acts(CHUNK);
            let mut scratch = Scratch::new();
            let out_len_f = out_len as f64;
            let mut loss_at = |p: &[f64]| -> f64 {
                let (recon, kl) =
                    chunk_loss(&model, p, &xs, &targets, &eps, &mut acts, &mut scratch);
                (kl + lambda * recon * out_len_f) / bs as f64
            };

            let n_params = params.len();
            let stride = (n_params / 60).max(1);
            let mut checked = 0;
            for i in (0..n_params).step_by(stride) {
                // small h loses tiny gradients to f64 cancellation, large h
                // trips leaky-ReLU kinks; accept the best of three scales.
                // gradients below 1e-5 get an absolute floor: the loss is
                // O(numel·recon) ≈ 1e2, so central differences resolve
                // gradients only down to ~eps·|L|/h ≈ 3e-10
                let ana = gw.grads[i];
                let mut best = f64::INFINITY;
                let mut best_num = f64::NAN;
                for h_scale in [1e-5, 1e-4, 1e-6] {
                    let h = h_scale * (1.0 + params[i].abs());
                    let mut p = params.clone();
                    p[i] += h;
                    let up = loss_at(&p);
                    p[i] -= 2.0 * h;
                    let dn = loss_at(&p);
                    let num = (up - dn) / (2.0 * h);
                    let rel = (num - ana).abs() / (num.abs() + ana.abs()).max(1e-5);
                    if rel < best {
                        best = rel;
                        best_num = num;
                    }
                    if best < 1e-4 {
                        break;
                    }
                }
                assert!(
                    best < 1e-4,
                    "{variant:?} param {i}: numeric {best_num:.6e} vs analytic {ana:.6e} (rel {best:.2e})"
                );
                checked += 1;
            }
            assert!(checked >= 50);
        }
    }
}
