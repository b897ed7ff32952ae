use rand::Rng;

use super::{NeuralError, NodeId, ParamSet, Tape};

/// Result of a finite-difference comparison.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter and coordinate where the largest error occurred.
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Number of coordinates compared.
    pub checked: usize,
}

/// Compares tape gradients against central finite differences.
///
/// `build` must construct the same deterministic loss graph on every call
/// (draw any dropout masks or inputs beforehand and capture them). Each
/// parameter contributes at most `coords_per_param` coordinates, sampled with
/// `rng` when the parameter is larger than that.
///
/// The relative error for a coordinate is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`.
pub fn grad_check<F>(
    params: &mut ParamSet,
    mut build: F,
    eps: f64,
    coords_per_param: usize,
    rng: &mut impl Rng,
) -> Result<GradCheckReport, NeuralError>
where
    F: FnMut(&ParamSet, &mut Tape) -> NodeId,
{
    params.zero_grad();
    let mut tape = Tape::new();
    let loss = build(params, &mut tape);
    tape.backward(params, loss)?;
    let analytic: Vec<Vec<f64>> = params.iter().map(|p| p.grad.data.clone()).collect();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for id in 0..params.len() {
        let dim = params.get(id).value.len();
        let coords: Vec<usize> = if dim <= coords_per_param {
            (0..dim).collect()
        } else {
            (0..coords_per_param).map(|_| rng.gen_range(0..dim)).collect()
        };
        for j in coords {
            let orig = params.get(id).value.data[j];
            params.get_mut(id).value.data[j] = orig + eps;
            let mut plus_tape = Tape::new();
            let plus_node = build(params, &mut plus_tape);
            let plus = plus_tape.scalar(plus_node);
            params.get_mut(id).value.data[j] = orig - eps;
            let mut minus_tape = Tape::new();
            let minus_node = build(params, &mut minus_tape);
            let minus = minus_tape.scalar(minus_node);
            params.get_mut(id).value.data[j] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[id][j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = params.get(id).name.clone();
                report.worst_index = j;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    params.zero_grad();
    Ok(report)
}
