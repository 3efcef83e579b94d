//! Central finite-difference verification of graph gradients.

use crate::error::{Error, Result};
use crate::numeric::{Graph, NodeId, Tensor};

/// Denominator floor of the relative error.
pub const REL_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat element index of the worst disagreement.
    pub offending: Option<(String, usize)>,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

fn scalar_loss(graph: &mut Graph, loss: NodeId) -> Result<f64> {
    graph.forward()?;
    graph.value(loss)?.item()
}

/// Central differences `(f(p+ε) − f(p−ε)) / 2ε` for every element of `param`.
/// The parameter is restored exactly afterwards.
pub fn numeric_gradient(graph: &mut Graph, loss: NodeId, param: NodeId, epsilon: f64) -> Result<Tensor> {
    if graph.shape(loss) != (1, 1) {
        return Err(Error::Contract(format!(
            "gradient check needs a scalar loss, `{}` is {:?}",
            graph.name(loss),
            graph.shape(loss)
        )));
    }
    let (r, c) = graph.shape(param);
    let mut out = Tensor::zeros(r, c);
    for e in 0..r * c {
        let original = graph.leaf_mut(param)?.data()[e];
        graph.leaf_mut(param)?.data_mut()[e] = original + epsilon;
        let plus = scalar_loss(graph, loss)?;
        graph.leaf_mut(param)?.data_mut()[e] = original - epsilon;
        let minus = scalar_loss(graph, loss)?;
        graph.leaf_mut(param)?.data_mut()[e] = original;
        out.data_mut()[e] = (plus - minus) / (2.0 * epsilon);
    }
    graph.forward()?;
    Ok(out)
}

/// Compares named analytic and numeric gradients element by element.
pub fn compare(analytic: &[(String, Tensor)], numeric: &[Tensor], tolerance: f64) -> GradCheckReport {
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        offending: None,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        checked: 0,
        tolerance,
        passed: true,
    };
    for ((name, a), n) in analytic.iter().zip(numeric) {
        for (e, (&av, &nv)) in a.data().iter().zip(n.data()).enumerate() {
            report.checked += 1;
            let rel = relative_error(av, nv);
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = rel;
                report.offending = Some((name.clone(), e));
                report.analytic_at_worst = av;
                report.numeric_at_worst = nv;
            }
        }
    }
    report.passed = report.max_rel_error < tolerance;
    report
}

/// Checks the analytic gradient of scalar `loss` with respect to every
/// element of every node in `params` against central differences.
pub fn grad_check(
    graph: &mut Graph,
    loss: NodeId,
    params: &[NodeId],
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    graph.forward()?;
    for &p in params {
        if !graph.value(p)?.all_finite() {
            return Err(Error::Contract(format!(
                "parameter `{}` is not finite",
                graph.name(p)
            )));
        }
    }
    graph.backward_scalar(loss)?;
    let analytic: Vec<(String, Tensor)> = params
        .iter()
        .map(|&p| Ok((graph.name(p).to_string(), graph.grad(p)?)))
        .collect::<Result<_>>()?;
    let numeric: Vec<Tensor> = params
        .iter()
        .map(|&p| numeric_gradient(graph, loss, p, epsilon))
        .collect::<Result<_>>()?;
    Ok(compare(&analytic, &numeric, tolerance))
}
