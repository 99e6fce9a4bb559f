//! Central-difference verification of reverse-mode gradients.
//!
//! The function under test is rebuilt in `f64` so finite-difference noise
//! stays far below the comparison tolerance.

use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::compute::params::ParamStore;
use crate::compute::tape::{NodeId, Tape};
use crate::compute::tensor::Tensor;
use crate::error::Result;

/// Outcome of one gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// "param_name[entry]" of the worst entry.
    pub worst_entry: String,
    pub entries_checked: usize,
    /// (parameter name, max relative error within it)
    pub per_param: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Options for `grad_check`.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Above this many total entries, check a seeded subsample per parameter.
    pub max_entries: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { epsilon: 1e-5, max_entries: 4000, seed: 0 }
    }
}

/// Compare the reverse-mode gradient of a deterministic scalar function
/// against central differences, entry by entry.
///
/// `build` receives a tape pre-loaded with the parameter leaves (in store
/// order) and must return the scalar loss node. It is re-invoked for every
/// perturbed evaluation, so it must be deterministic.
pub fn grad_check<F>(params: &ParamStore, build: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[NodeId]) -> Result<NodeId>,
{
    let mut values: Vec<Tensor<f64>> = params.iter().map(|p| p.value.cast::<f64>()).collect();

    // Reverse-mode gradients at the unperturbed point.
    let analytic: Vec<Vec<f64>> = {
        let mut tape = Tape::<f64>::new();
        let bindings: Vec<NodeId> = values.iter().map(|v| tape.leaf(v.clone())).collect();
        let loss = build(&mut tape, &bindings)?;
        tape.backward(loss)?;
        bindings
            .iter()
            .zip(&values)
            .map(|(&b, v)| match tape.grad(b) {
                Some(g) => g.to_vec(),
                None => vec![0.0; v.len()],
            })
            .collect()
    };

    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::<f64>::new();
        let bindings: Vec<NodeId> = values.iter().map(|v| tape.leaf(v.clone())).collect();
        let loss = build(&mut tape, &bindings)?;
        tape.value(loss).item()
    };

    let total_entries: usize = values.iter().map(|v| v.len()).sum();
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_entry: String::new(),
        entries_checked: 0,
        per_param: Vec::new(),
    };

    for pi in 0..values.len() {
        let name = params.get(crate::compute::params::ParamId(pi)).name.clone();
        let n = values[pi].len();
        let indices: Vec<usize> = if total_entries <= opts.max_entries {
            (0..n).collect()
        } else {
            // proportional seeded subsample, at least one entry per parameter
            let quota = ((n as f64 / total_entries as f64) * opts.max_entries as f64).ceil() as usize;
            let quota = quota.clamp(1, n);
            let mut picked: Vec<usize> = (0..quota).map(|_| rng.random_range(0..n)).collect();
            picked.sort_unstable();
            picked.dedup();
            picked
        };

        let mut param_worst = 0.0f64;
        for &ei in &indices {
            let orig = values[pi].data()[ei];
            values[pi].data_mut()[ei] = orig + opts.epsilon;
            let f_plus = eval(&values)?;
            values[pi].data_mut()[ei] = orig - opts.epsilon;
            let f_minus = eval(&values)?;
            values[pi].data_mut()[ei] = orig;

            let fd = (f_plus - f_minus) / (2.0 * opts.epsilon);
            let ad = analytic[pi][ei];
            let rel = (fd - ad).abs() / fd.abs().max(ad.abs()).max(1e-6);
            report.entries_checked += 1;
            if rel > param_worst {
                param_worst = rel;
            }
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_entry = format!("{name}[{ei}]");
            }
        }
        report.per_param.push((name, param_worst));
    }
    Ok(report)
}
