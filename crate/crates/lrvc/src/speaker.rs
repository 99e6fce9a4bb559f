//! Trainable speaker encoder: a conv stack over mel frames, temporal mean
//! pooling, a residual fully-connected stack, and a projection head for
//! speaker classification.

use rand::RngExt;
use rand_chacha::ChaCha20Rng;

use crate::compute::{NodeId, ParamId, ParamStore, Real, Tape, Tensor};
use crate::error::{Error, Result};

pub(crate) struct ConvParams {
    pub w: ParamId,
    pub b: ParamId,
    pub residual: bool,
}

pub(crate) struct LinearParams {
    pub w: ParamId,
    pub b: ParamId,
    pub residual: bool,
    pub relu: bool,
}

pub(crate) fn init_weight(
    store: &mut ParamStore,
    name: &str,
    shape: Vec<usize>,
    fan_in: usize,
    rng: &mut ChaCha20Rng,
) -> Result<ParamId> {
    let bound = 1.0 / (fan_in as f32).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<f32> = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    store.insert(name, Tensor::new(shape, data)?)
}

pub(crate) fn init_bias(store: &mut ParamStore, name: &str, dim: usize) -> Result<ParamId> {
    store.insert(name, Tensor::zeros(vec![dim]))
}

/// E_s: mel frames [T×bands] → embedding [d_s]. Length-invariant by
/// construction (mean pooling between the conv and FC stacks).
pub struct SpeakerEncoder {
    convs: Vec<ConvParams>,
    fcs: Vec<LinearParams>,
    proj_w: ParamId,
    proj_b: ParamId,
    pub kernel: usize,
    pub hidden: usize,
    pub d_s: usize,
    pub num_speakers: usize,
}

impl SpeakerEncoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha20Rng,
        mel_bands: usize,
        conv_layers: usize,
        fc_layers: usize,
        hidden: usize,
        kernel: usize,
        d_s: usize,
        num_speakers: usize,
    ) -> Result<Self> {
        if conv_layers == 0 || fc_layers == 0 {
            return Err(Error::Config("speaker encoder needs ≥ 1 conv and ≥ 1 fc layer".into()));
        }
        if num_speakers < 2 {
            return Err(Error::Config(format!(
                "projection head needs ≥ 2 speakers, got {num_speakers}"
            )));
        }
        let mut convs = Vec::with_capacity(conv_layers);
        for i in 0..conv_layers {
            let c_in = if i == 0 { mel_bands } else { hidden };
            let w = init_weight(
                store,
                &format!("spk.conv{i:02}.w"),
                vec![kernel, c_in, hidden],
                kernel * c_in,
                rng,
            )?;
            let b = init_bias(store, &format!("spk.conv{i:02}.b"), hidden)?;
            convs.push(ConvParams { w, b, residual: c_in == hidden });
        }
        let mut fcs = Vec::with_capacity(fc_layers);
        for i in 0..fc_layers {
            let last = i + 1 == fc_layers;
            let d_out = if last { d_s } else { hidden };
            let w = init_weight(
                store,
                &format!("spk.fc{i:02}.w"),
                vec![hidden, d_out],
                hidden,
                rng,
            )?;
            let b = init_bias(store, &format!("spk.fc{i:02}.b"), d_out)?;
            fcs.push(LinearParams { w, b, residual: d_out == hidden, relu: !last });
        }
        let proj_w = init_weight(store, "spk.proj.w", vec![d_s, num_speakers], d_s, rng)?;
        let proj_b = init_bias(store, "spk.proj.b", num_speakers)?;
        Ok(SpeakerEncoder {
            convs,
            fcs,
            proj_w,
            proj_b,
            kernel,
            hidden,
            d_s,
            num_speakers,
        })
    }

    /// Forward pass on the tape; `mel` must be ≥ 1 frame.
    pub fn encode<T: Real>(
        &self,
        tape: &mut Tape<T>,
        bindings: &[NodeId],
        mel: NodeId,
    ) -> Result<NodeId> {
        let pad = (self.kernel - 1) / 2;
        let mut x = mel;
        for layer in &self.convs {
            let y = tape.conv1d(x, bindings[layer.w.index()], bindings[layer.b.index()], 1, pad)?;
            let y = tape.relu(y);
            x = if layer.residual { tape.add(y, x)? } else { y };
        }
        let mut v = tape.mean_over_time(x)?;
        for layer in &self.fcs {
            let y = tape.linear(v, bindings[layer.w.index()], bindings[layer.b.index()])?;
            let y = if layer.relu { tape.relu(y) } else { y };
            v = if layer.residual { tape.add(y, v)? } else { y };
        }
        Ok(v)
    }

    /// Projection head: embedding [d_s] → speaker logits [K].
    pub fn project<T: Real>(
        &self,
        tape: &mut Tape<T>,
        bindings: &[NodeId],
        embedding: NodeId,
    ) -> Result<NodeId> {
        tape.linear(
            embedding,
            bindings[self.proj_w.index()],
            bindings[self.proj_b.index()],
        )
    }

    /// Names of the projection-head parameters (mode-exclusivity checks).
    pub fn projection_param_ids(&self) -> [ParamId; 2] {
        [self.proj_w, self.proj_b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn tiny_encoder(store: &mut ParamStore) -> SpeakerEncoder {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        SpeakerEncoder::new(store, &mut rng, 8, 2, 2, 6, 5, 4, 3).unwrap()
    }

    #[test]
    fn output_is_always_d_s_for_any_length() {
        let mut store = ParamStore::new();
        let enc = tiny_encoder(&mut store);
        for t in [1usize, 2, 7, 40] {
            let mut tape = Tape::<f32>::new();
            let bindings = store.bind(&mut tape);
            let mel = tape.leaf(Tensor::new(vec![t, 8], vec![0.3; t * 8]).unwrap());
            let s = enc.encode(&mut tape, &bindings, mel).unwrap();
            assert_eq!(tape.value(s).shape(), &[4], "T={t}");
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let mut store = ParamStore::new();
        let enc = tiny_encoder(&mut store);
        let mel = Tensor::new(vec![10, 8], (0..80).map(|i| (i as f32).sin()).collect()).unwrap();
        let run = |store: &ParamStore| {
            let mut tape = Tape::<f32>::new();
            let bindings = store.bind(&mut tape);
            let m = tape.leaf(mel.clone());
            let s = enc.encode(&mut tape, &bindings, m).unwrap();
            tape.value(s).data().to_vec()
        };
        assert_eq!(run(&store), run(&store));
    }

    #[test]
    fn projection_gives_k_logits_and_bias_passthrough() {
        let mut store = ParamStore::new();
        let enc = tiny_encoder(&mut store);
        // zero the embedding path: zero embedding in, weights irrelevant
        let mut tape = Tape::<f32>::new();
        let bindings = store.bind(&mut tape);
        let zero_s = tape.leaf(Tensor::zeros(vec![4]));
        let logits = enc.project(&mut tape, &bindings, zero_s).unwrap();
        assert_eq!(tape.value(logits).shape(), &[3]);
        // zero embedding → logits equal the bias (zero-initialized here)
        assert_eq!(tape.value(logits).data(), store.get(enc.proj_b).value.data());
    }

    #[test]
    fn gradients_flow_into_every_layer() {
        let mut store = ParamStore::new();
        let enc = tiny_encoder(&mut store);
        let mut tape = Tape::<f32>::new();
        let bindings = store.bind(&mut tape);
        let mel = tape.leaf(Tensor::new(vec![12, 8], (0..96).map(|i| (i as f32 * 0.3).cos()).collect()).unwrap());
        let s = enc.encode(&mut tape, &bindings, mel).unwrap();
        let logits = enc.project(&mut tape, &bindings, s).unwrap();
        let loss = tape.softmax_cross_entropy(logits, 1).unwrap();
        tape.backward(loss).unwrap();
        for (i, p) in store.iter().enumerate() {
            let g = tape.grad(bindings[i]);
            assert!(
                g.is_some_and(|g| g.iter().any(|&v| v != 0.0)),
                "no gradient reached {}",
                p.name
            );
        }
    }

    #[test]
    fn projection_gradient_passes_grad_check() {
        let mut store = ParamStore::new();
        let enc = tiny_encoder(&mut store);
        let mel = Tensor::new(vec![6, 8], (0..48).map(|i| (i as f32 * 0.21).sin()).collect()).unwrap();
        let report = crate::compute::grad_check(
            &store,
            |tape, bindings| {
                let m = tape.leaf(mel.cast());
                let s = enc.encode(tape, bindings, m)?;
                let logits = enc.project(tape, bindings, s)?;
                tape.softmax_cross_entropy(logits, 2)
            },
            crate::compute::GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-3, "max rel {}", report.max_rel_error);
    }
}
