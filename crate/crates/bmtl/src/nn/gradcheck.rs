//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};
use crate::nn::params::ParameterStore;
use crate::nn::tape::{Id, Tape};

const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_parameter: String,
    pub entries_checked: usize,
    pub passed: bool,
}

/// Compares the tape's gradients against central differences on every
/// parameter entry. `build` must construct the forward pass and return the
/// scalar loss node; it runs once for the analytic pass and twice per
/// entry for the numeric one, so keep the model tiny. 64-bit only: the
/// step size drowns in f32 rounding.
pub fn check_gradients<F>(
    store: &mut ParameterStore<f64>,
    tolerance: f64,
    build: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &ParameterStore<f64>) -> Result<Id>,
{
    let mut tape = Tape::new();
    let loss = build(&mut tape, store)?;
    if !tape.value(loss).item().is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    let grads = tape.backward(loss)?;

    store.zero_grads();
    let pairs: Vec<(usize, crate::nn::tensor::Tensor<f64>)> = tape
        .param_grads(&grads)
        .into_iter()
        .map(|(idx, g)| (idx, g.clone()))
        .collect();
    for (idx, g) in &pairs {
        store.accumulate_grad(*idx, g);
    }

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_parameter: String::new(),
        entries_checked: 0,
        passed: true,
    };

    for idx in 0..store.len() {
        let name = store.get(idx).name.clone();
        let entries = store.get(idx).value.data.len();
        for i in 0..entries {
            let analytic = store.get(idx).grad.data[i];
            if !analytic.is_finite() {
                return Err(Error::NonFinite(format!("gradient of {name}")));
            }
            let original = store.get(idx).value.data[i];

            store.get_mut(idx).value.data[i] = original + FD_STEP;
            let plus = eval_loss(store, &build)?;
            store.get_mut(idx).value.data[i] = original - FD_STEP;
            let minus = eval_loss(store, &build)?;
            store.get_mut(idx).value.data[i] = original;

            let numeric = (plus - minus) / (2.0 * FD_STEP);
            if !numeric.is_finite() {
                return Err(Error::NonFinite(format!("finite difference of {name}")));
            }
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            report.entries_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_parameter = format!("{name}[{i}]");
            }
        }
    }
    report.passed = report.max_rel_err < tolerance;
    Ok(report)
}

fn eval_loss<F>(store: &ParameterStore<f64>, build: &F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &ParameterStore<f64>) -> Result<Id>,
{
    let mut tape = Tape::new();
    let loss = build(&mut tape, store)?;
    Ok(tape.value(loss).item())
}
