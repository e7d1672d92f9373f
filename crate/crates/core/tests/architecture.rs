//! Regression audit of the model architectures against a stored manifest:
//! layer names, shapes and parameter counts must not drift.

use radar_repr::vae::{reparameterize, LatentPosterior, VaeModel, Variant};

type Manifest = &'static [(&'static str, &'static [usize])];

/// Map encoder/decoder at full scale (shared by the rd and ra variants).
const MAP_VAE: Manifest = &[
    ("encoder.conv1.weight", &[9, 16]),
    ("encoder.conv1.bias", &[16]),
    ("encoder.conv2.weight", &[144, 16]),
    ("encoder.conv2.bias", &[16]),
    ("encoder.conv3.weight", &[144, 32]),
    ("encoder.conv3.bias", &[32]),
    ("encoder.conv4.weight", &[288, 32]),
    ("encoder.conv4.bias", &[32]),
    ("encoder.fc1.weight", &[2048, 1024]),
    ("encoder.fc1.bias", &[1024]),
    ("encoder.fc2.weight", &[1024, 64]),
    ("encoder.fc2.bias", &[64]),
    ("decoder.fc1.weight", &[32, 1024]),
    ("decoder.fc1.bias", &[1024]),
    ("decoder.fc2.weight", &[1024, 4096]),
    ("decoder.fc2.bias", &[4096]),
    ("decoder.conv1.weight", &[576, 32]),
    ("decoder.conv1.bias", &[32]),
    ("decoder.conv2.weight", &[288, 32]),
    ("decoder.conv2.bias", &[32]),
    ("decoder.conv3.weight", &[288, 16]),
    ("decoder.conv3.bias", &[16]),
    ("decoder.conv4.weight", &[144, 16]),
    ("decoder.conv4.bias", &[16]),
    ("decoder.head.weight", &[144, 1]),
    ("decoder.head.bias", &[1]),
];

/// Chirp encoder (raw mode) plus the two decoder heads.
const CHIRP_ENCODER: Manifest = &[
    ("encoder.conv1.weight", &[24, 512]),
    ("encoder.conv1.bias", &[512]),
    ("encoder.conv2.weight", &[1536, 512]),
    ("encoder.conv2.bias", &[512]),
    ("encoder.conv3.weight", &[1536, 32]),
    ("encoder.conv3.bias", &[32]),
    ("encoder.fc1.weight", &[1024, 512]),
    ("encoder.fc1.bias", &[512]),
    ("encoder.fc2.weight", &[512, 64]),
    ("encoder.fc2.bias", &[64]),
];

const CHIRP_FFT_ENCODER: Manifest = &[
    ("encoder.conv1.weight", &[48, 512]),
    ("encoder.conv1.bias", &[512]),
    ("encoder.conv2.weight", &[1536, 512]),
    ("encoder.conv2.bias", &[512]),
    ("encoder.conv3.weight", &[1536, 32]),
    ("encoder.conv3.bias", &[32]),
    ("encoder.fc1.weight", &[512, 512]),
    ("encoder.fc1.bias", &[512]),
    ("encoder.fc2.weight", &[512, 64]),
    ("encoder.fc2.bias", &[64]),
];

fn check(model: &VaeModel<f32>, expected: Manifest) {
    let entries = model.arena.entries();
    assert_eq!(
        entries.len(),
        expected.len(),
        "{}: layer count {} != {}",
        model.variant.name(),
        entries.len(),
        expected.len()
    );
    for (entry, &(name, shape)) in entries.iter().zip(expected) {
        assert_eq!(entry.name, name, "{}: layer name drift", model.variant.name());
        assert_eq!(
            entry.shape, shape,
            "{}: {} shape {:?} != {:?}",
            model.variant.name(),
            name,
            entry.shape,
            shape
        );
        assert_eq!(entry.len, shape.iter().product::<usize>());
    }
}

fn decoder_manifest(prefix: &str) -> Vec<(String, Vec<usize>)> {
    MAP_VAE
        .iter()
        .filter(|(name, _)| name.starts_with("decoder."))
        .map(|(name, shape)| (name.replace("decoder.", prefix), shape.to_vec()))
        .collect()
}

#[test]
fn map_vae_matches_manifest() {
    for variant in [Variant::Rd, Variant::Ra] {
        let model = VaeModel::<f32>::new(variant, 1);
        check(&model, MAP_VAE);
        let total: usize = model.arena.entries().iter().map(|e| e.len).sum();
        assert_eq!(total, model.arena.len());
        // conv stack + two dense blocks
        assert_eq!(total, 6_447_137, "{}: parameter count", variant.name());
    }
}

#[test]
fn chirp_vae_matches_manifest() {
    for (variant, enc, total) in [
        (Variant::Chirp, CHIRP_ENCODER, 9_940_546usize),
        (Variant::ChirpFft, CHIRP_FFT_ENCODER, 9_690_690),
    ] {
        let model = VaeModel::<f32>::new(variant, 1);
        let mut expected: Vec<(String, Vec<usize>)> = enc
            .iter()
            .map(|(n, s)| (n.to_string(), s.to_vec()))
            .collect();
        expected.extend(decoder_manifest("decoder_rd."));
        expected.extend(decoder_manifest("decoder_ra."));
        let entries = model.arena.entries();
        assert_eq!(entries.len(), expected.len(), "{}", variant.name());
        for (entry, (name, shape)) in entries.iter().zip(&expected) {
            assert_eq!(&entry.name, name);
            assert_eq!(&entry.shape, shape, "{name}");
        }
        let got: usize = entries.iter().map(|e| e.len).sum();
        assert_eq!(got, total, "{}: parameter count", variant.name());
    }
}

/// z = μ + σ⊙ε is linear, so the sampling path's derivatives are the
/// constants 1 and ε; central differences reproduce them to rounding.
#[test]
fn reparameterization_derivatives_are_exact()
{
    let q = LatentPosterior {
        mean: (0..32).map(|i| 0.25 * i as f64 - 4.0).collect(),
        std: (0..32).map(|i| 0.5 + 0.125 * i as f64).collect(),
    };
    let seed = 9;
    let z0 = reparameterize(&q, seed);
    let eps: Vec<f64> = z0
        .iter()
        .zip(q.mean.iter().zip(&q.std))
        .map(|(z, (m, s))| (z - m) / s)
        .collect();

    let h = 0.25; // power of two: the linear difference quotient is exact
    for i in 0..32 {
        let mut up = q.clone();
        up.mean[i] += h;
        let mut dn = q.clone();
        dn.mean[i] -= h;
        let dz = (reparameterize(&up, seed)[i] - reparameterize(&dn, seed)[i]) / (2.0 * h);
        assert!((dz - 1.0).abs() < 1e-12, "d(sample)/d(mean) at {i}: {dz}");

        let mut up = q.clone();
        up.std[i] += h;
        let mut dn = q.clone();
        dn.std[i] -= h;
        let dz = (reparameterize(&up, seed)[i] - reparameterize(&dn, seed)[i]) / (2.0 * h);
        assert!(
            (dz - eps[i]).abs() < 1e-12,
            "d(sample)/d(std) at {i}: {dz} vs ε {}",
            eps[i]
        );
    }
}
