//! Length-resampling decoder: fuses the speaker embedding into every content
//! frame, runs a conv stack interleaved with sub-pixel ×r stages totalling a
//! ×q upsample, projects to mel bands, and average-pools with window p, so
//! T_inp frames come out as T_inp·q/p mel frames.

use rand_chacha::ChaCha20Rng;

use crate::compute::{NodeId, ParamId, ParamStore, Real, Tape};
use crate::error::{Error, Result};
use crate::speaker::{init_bias, init_weight, ConvParams};

/// Rational resampling ratio: ×q sub-pixel upsampling then window-p average
/// pooling. p and q must be coprime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ResampleSpec {
    pub p: usize,
    pub q: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

impl ResampleSpec {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::Argument(format!("resample spec needs p,q ≥ 1, got ({p},{q})")));
        }
        if gcd(p, q) != 1 {
            return Err(Error::Argument(format!(
                "resample spec ({p},{q}) is not in lowest terms"
            )));
        }
        Ok(ResampleSpec { p, q })
    }

    /// Prime factors of q, ascending; one sub-pixel stage each.
    pub fn stage_factors(&self) -> Vec<usize> {
        let mut factors = Vec::new();
        let mut q = self.q;
        let mut d = 2;
        while q > 1 {
            while q % d == 0 {
                factors.push(d);
                q /= d;
            }
            d += 1;
        }
        factors
    }
}

/// Output length d_inp·q/p; errors if the division is not exact.
pub fn resample_length(d_inp: usize, spec: &ResampleSpec) -> Result<usize> {
    let scaled = d_inp * spec.q;
    if scaled % spec.p != 0 {
        return Err(Error::Shape(format!(
            "input length {d_inp} × q={} not divisible by p={}",
            spec.q, spec.p
        )));
    }
    Ok(scaled / spec.p)
}

struct DecoderLayer {
    conv: ConvParams,
    /// Sub-pixel factors applied right after this layer.
    shuffles: Vec<usize>,
}

/// D(c, s): content frames conditioned on a broadcast speaker embedding.
pub struct Decoder {
    layers: Vec<DecoderLayer>,
    out_w: ParamId,
    out_b: ParamId,
    pub spec: ResampleSpec,
    pub kernel: usize,
    pub hidden: usize,
    pub d_c: usize,
    pub d_s: usize,
    pub mel_bands: usize,
}

impl Decoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha20Rng,
        d_c: usize,
        d_s: usize,
        mel_bands: usize,
        conv_layers: usize,
        hidden: usize,
        kernel: usize,
        spec: ResampleSpec,
    ) -> Result<Self> {
        if conv_layers == 0 {
            return Err(Error::Config("decoder needs ≥ 1 conv layer".into()));
        }
        let factors = spec.stage_factors();
        let n_stages = factors.len();
        // stage i (1-based) lands after layer ceil(i·L/S); stages may stack
        // on the same layer in very small configs
        let mut shuffles_after: Vec<Vec<usize>> = vec![Vec::new(); conv_layers];
        for (i, &f) in factors.iter().enumerate() {
            let layer = ((i + 1) * conv_layers).div_ceil(n_stages).min(conv_layers);
            shuffles_after[layer - 1].push(f);
        }

        let mut layers = Vec::with_capacity(conv_layers);
        let mut c_in = d_c + d_s;
        for (i, shuffles) in shuffles_after.into_iter().enumerate() {
            let expand: usize = shuffles.iter().product();
            let c_out = hidden * expand;
            let w = init_weight(
                store,
                &format!("dec.conv{i:02}.w"),
                vec![kernel, c_in, c_out],
                kernel * c_in,
                rng,
            )?;
            let b = init_bias(store, &format!("dec.conv{i:02}.b"), c_out)?;
            layers.push(DecoderLayer {
                conv: ConvParams { w, b, residual: c_in == c_out },
                shuffles,
            });
            c_in = hidden;
        }
        let out_w = init_weight(store, "dec.out.w", vec![hidden, mel_bands], hidden, rng)?;
        let out_b = init_bias(store, "dec.out.b", mel_bands)?;
        Ok(Decoder { layers, out_w, out_b, spec, kernel, hidden, d_c, d_s, mel_bands })
    }

    /// Broadcast-concatenate the speaker embedding onto every content frame.
    pub fn fuse_speaker<T: Real>(
        &self,
        tape: &mut Tape<T>,
        content: NodeId,
        speaker: NodeId,
    ) -> Result<NodeId> {
        tape.concat_broadcast(content, speaker)
    }

    /// Full decode: fused input → conv/shuffle stack → linear → avg pool.
    /// Output is [T_inp·q/p × mel_bands].
    pub fn decode<T: Real>(
        &self,
        tape: &mut Tape<T>,
        bindings: &[NodeId],
        content: NodeId,
        speaker: NodeId,
    ) -> Result<NodeId> {
        let t_inp = tape.value(content).shape()[0];
        resample_length(t_inp, &self.spec)?; // fail fast on divisibility
        let pad = (self.kernel - 1) / 2;
        let mut x = self.fuse_speaker(tape, content, speaker)?;
        for layer in &self.layers {
            let y = tape.conv1d(
                x,
                bindings[layer.conv.w.index()],
                bindings[layer.conv.b.index()],
                1,
                pad,
            )?;
            let y = tape.relu(y);
            x = if layer.conv.residual { tape.add(y, x)? } else { y };
            for &r in &layer.shuffles {
                x = tape.pixel_shuffle_1d(x, r)?;
            }
        }
        let x = tape.linear(x, bindings[self.out_w.index()], bindings[self.out_b.index()])?;
        tape.avg_pool_1d(x, self.spec.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compute::Tensor;
    use rand::RngExt;
    use rand_chacha::rand_core::SeedableRng;

    fn build(
        store: &mut ParamStore,
        d_c: usize,
        d_s: usize,
        layers: usize,
        hidden: usize,
        spec: ResampleSpec,
    ) -> Decoder {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        Decoder::new(store, &mut rng, d_c, d_s, 10, layers, hidden, 5, spec).unwrap()
    }

    fn run_decode(dec: &Decoder, store: &ParamStore, t_inp: usize, seed: u64) -> Result<Vec<usize>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut tape = Tape::<f32>::new();
        let bindings = store.bind(&mut tape);
        let content = tape.leaf(Tensor::new(
            vec![t_inp, dec.d_c],
            (0..t_inp * dec.d_c).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
        )?);
        let s = tape.leaf(Tensor::new(
            vec![dec.d_s],
            (0..dec.d_s).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
        )?);
        let out = dec.decode(&mut tape, &bindings, content, s)?;
        Ok(tape.value(out).shape().to_vec())
    }

    #[test]
    fn resample_length_canonical_and_identity() {
        assert_eq!(resample_length(100, &ResampleSpec::new(5, 8).unwrap()).unwrap(), 160);
        assert_eq!(resample_length(37, &ResampleSpec::new(1, 1).unwrap()).unwrap(), 37);
    }

    #[test]
    fn resample_length_indivisible_names_values() {
        let spec = ResampleSpec::new(5, 8).unwrap();
        match resample_length(7, &spec) {
            Err(Error::Shape(msg)) => {
                assert!(msg.contains('7') && msg.contains('5') && msg.contains('8'));
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn spec_must_be_coprime() {
        assert!(ResampleSpec::new(2, 4).is_err());
        assert!(ResampleSpec::new(0, 1).is_err());
        assert!(ResampleSpec::new(3, 4).is_ok());
    }

    #[test]
    fn stage_factors_cover_all_q() {
        for (q, expected) in [(1usize, vec![]), (2, vec![2]), (3, vec![3]), (4, vec![2, 2]), (8, vec![2, 2, 2]), (12, vec![2, 2, 3])] {
            let spec = ResampleSpec { p: 1, q };
            assert_eq!(spec.stage_factors(), expected, "q={q}");
        }
    }

    #[test]
    fn canonical_decode_is_100_to_160() {
        let mut store = ParamStore::new();
        let dec = build(&mut store, 12, 6, 6, 8, ResampleSpec::new(5, 8).unwrap());
        let shape = run_decode(&dec, &store, 100, 1).unwrap();
        assert_eq!(shape, vec![160, 10]);
    }

    #[test]
    fn identity_spec_preserves_length() {
        let mut store = ParamStore::new();
        let dec = build(&mut store, 8, 4, 3, 6, ResampleSpec::new(1, 1).unwrap());
        let shape = run_decode(&dec, &store, 23, 2).unwrap();
        assert_eq!(shape, vec![23, 10]);
    }

    #[test]
    fn speaker_path_is_live() {
        let mut store = ParamStore::new();
        let dec = build(&mut store, 8, 4, 4, 6, ResampleSpec::new(5, 8).unwrap());
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let content = Tensor::new(
            vec![10, 8],
            (0..80).map(|_| rng.random_range(-1.0f32..1.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        let s1: Vec<f32> = (0..4).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let s2: Vec<f32> = (0..4).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let run = |s: &[f32]| {
            let mut tape = Tape::<f32>::new();
            let bindings = store.bind(&mut tape);
            let c = tape.leaf(content.clone());
            let sv = tape.leaf(Tensor::new(vec![4], s.to_vec()).unwrap());
            let out = dec.decode(&mut tape, &bindings, c, sv).unwrap();
            tape.value(out).data().to_vec()
        };
        let (a, b) = (run(&s1), run(&s2));
        assert_ne!(a, b, "different speaker vectors must change the output");
    }

    #[test]
    fn length_law_across_specs_and_lengths() {
        for (p, q) in [(1usize, 1usize), (1, 2), (2, 3), (3, 4), (5, 8)] {
            let spec = ResampleSpec::new(p, q).unwrap();
            let mut store = ParamStore::new();
            let dec = build(&mut store, 6, 3, 4, 4, spec);
            for t in (1..=200 / p).map(|m| m * p).take(8) {
                let shape = run_decode(&dec, &store, t, 3).unwrap();
                assert_eq!(shape[0], t * q / p, "spec ({p},{q}) T={t}");
            }
        }
    }

    #[test]
    fn fuse_shapes_and_zero_speaker_columns() {
        let mut store = ParamStore::new();
        let dec = build(&mut store, 5, 3, 2, 4, ResampleSpec::new(1, 2).unwrap());
        let mut tape = Tape::<f32>::new();
        let content = tape.leaf(Tensor::new(vec![4, 5], vec![1.0; 20]).unwrap());
        let s = tape.leaf(Tensor::zeros(vec![3]));
        let fused = dec.fuse_speaker(&mut tape, content, s).unwrap();
        assert_eq!(tape.value(fused).shape(), &[4, 8]);
        for row in tape.value(fused).data().chunks_exact(8) {
            assert_eq!(&row[5..], &[0.0, 0.0, 0.0]);
        }
    }
}
