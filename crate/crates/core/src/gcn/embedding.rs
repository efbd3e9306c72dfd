use std::io::Write;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, NodeRole};

/// Writes `node_id,label,h0..h{h-1}` for every paper node.
pub fn write_embeddings_csv<W: Write>(out: W, graph: &AttributedGraph, hidden: &Array2<f64>) -> Result<()> {
    if hidden.nrows() != graph.n() {
        return Err(Error::Shape(format!("{} hidden rows for {} nodes", hidden.nrows(), graph.n())));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["node_id".to_string(), "label".to_string()];
    header.extend((0..hidden.ncols()).map(|k| format!("h{k}")));
    w.write_record(&header)?;
    for i in graph.paper_nodes() {
        let mut row = vec![graph.node_ids[i].clone(), graph.classes[graph.labels[i]].clone()];
        row.extend(hidden.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Top `k` principal-component scores of the rows of `data` (centered).
///
/// Components come from power iteration with deflation on the covariance
/// matrix, starting from a fixed vector, so the result is deterministic. Each
/// component's sign is fixed so that its largest-magnitude loading is positive.
pub fn pca(data: &Array2<f64>, k: usize) -> Result<Array2<f64>> {
    let (n, d) = data.dim();
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput("PCA needs a non-empty matrix".into()));
    }
    let mean = data.mean_axis(Axis(0)).expect("non-empty");
    let centered = data - &mean;
    let mut cov = centered.t().dot(&centered) / (n.max(2) - 1) as f64;
    let mut out = Array2::zeros((n, k));
    for c in 0..k.min(d) {
        let mut v = Array1::from_shape_fn(d, |j| 1.0 + j as f64 / d as f64);
        v /= v.dot(&v).sqrt();
        let mut lambda = 0.0;
        for _ in 0..1000 {
            let next = cov.dot(&v);
            let norm = next.dot(&next).sqrt();
            if norm < 1e-300 {
                break;
            }
            let next = next / norm;
            let delta = (&next - &v).mapv(f64::abs).sum();
            v = next;
            lambda = norm;
            if delta < 1e-12 {
                break;
            }
        }
        if lambda == 0.0 {
            break;
        }
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        out.column_mut(c).assign(&centered.dot(&v));
        let outer = v.view().insert_axis(Axis(1)).dot(&v.view().insert_axis(Axis(0)));
        cov.scaled_add(-lambda, &outer);
    }
    Ok(out)
}

/// Writes `node_id,label,pc1,pc2` computed from the paper nodes' hidden rows.
pub fn write_projection_csv<W: Write>(out: W, graph: &AttributedGraph, hidden: &Array2<f64>) -> Result<()> {
    if hidden.nrows() != graph.n() {
        return Err(Error::Shape(format!("{} hidden rows for {} nodes", hidden.nrows(), graph.n())));
    }
    let papers: Vec<usize> = (0..graph.n()).filter(|&i| graph.roles[i] == NodeRole::Paper).collect();
    let rows = hidden.select(Axis(0), &papers);
    let scores = pca(&rows, 2)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_id", "label", "pc1", "pc2"])?;
    for (r, &i) in papers.iter().enumerate() {
        w.write_record([
            graph.node_ids[i].as_str(),
            graph.classes[graph.labels[i]].as_str(),
            &scores[[r, 0]].to_string(),
            &scores[[r, 1]].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pca_recovers_dominant_axis() {
        // Points on the line y = 2x plus a small orthogonal wobble.
        let data = array![[-2.0, -4.0], [-1.0, -2.0], [0.0, 0.1], [1.0, 2.0], [2.0, 4.0]];
        let s = pca(&data, 2).unwrap();
        let pc1: Vec<f64> = s.column(0).to_vec();
        assert!(pc1.windows(2).all(|w| w[0] < w[1]));
        let var1 = s.column(0).mapv(|x| x * x).sum();
        let var2 = s.column(1).mapv(|x| x * x).sum();
        assert!(var1 > 100.0 * var2);
    }

    #[test]
    fn pca_constant_data_is_zero() {
        let s = pca(&Array2::ones((4, 3)), 2).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }
}
