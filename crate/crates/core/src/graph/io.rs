use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde_json::{json, Value};

use super::{Graph, Labels};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn parse_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { field: field.into(), message: message.into() }
}

fn as_index(v: &Value, field: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| parse_err(field, format!("expected a non-negative integer, found {v}")))
}

/// Parses one JSON graph container.
pub fn graph_from_json<T: Scalar>(value: &Value) -> Result<Graph<T>> {
    graph_from_json_at(value, "")
}

fn graph_from_json_at<T: Scalar>(value: &Value, prefix: &str) -> Result<Graph<T>> {
    let field = |name: &str| format!("{prefix}{name}");
    let obj = value.as_object().ok_or_else(|| parse_err(field("<root>"), "expected an object"))?;
    let n = as_index(obj.get("n").ok_or_else(|| parse_err(field("n"), "missing"))?, &field("n"))?;

    let edges_v = obj.get("edges").ok_or_else(|| parse_err(field("edges"), "missing"))?;
    let edges_a = edges_v.as_array().ok_or_else(|| parse_err(field("edges"), "expected an array"))?;
    let mut edges = Vec::with_capacity(edges_a.len());
    for (i, e) in edges_a.iter().enumerate() {
        let name = field(&format!("edges[{i}]"));
        match e.as_array().map(Vec::as_slice) {
            Some([u, v]) => edges.push((as_index(u, &name)?, as_index(v, &name)?)),
            _ => return Err(parse_err(name, "expected a pair [u, v]")),
        }
    }

    let feats_v = obj.get("features").ok_or_else(|| parse_err(field("features"), "missing"))?;
    let rows = feats_v.as_array().ok_or_else(|| parse_err(field("features"), "expected an array of rows"))?;
    let dim = rows.first().and_then(Value::as_array).map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(rows.len() * dim);
    for (i, row) in rows.iter().enumerate() {
        let name = field(&format!("features[{i}]"));
        let r = row.as_array().ok_or_else(|| parse_err(&name, "expected an array"))?;
        if r.len() != dim {
            return Err(parse_err(name, format!("row has {} entries, expected {dim}", r.len())));
        }
        for (j, x) in r.iter().enumerate() {
            let f = x
                .as_f64()
                .filter(|f| f.is_finite())
                .ok_or_else(|| parse_err(format!("{name}[{j}]"), "expected a finite number"))?;
            flat.push(T::lit(f));
        }
    }
    let features = Array2::from_shape_vec((rows.len(), dim), flat)
        .map_err(|e| parse_err(field("features"), e.to_string()))?;

    let labels = match obj.get("labels") {
        None | Some(Value::Null) => Labels::None,
        Some(Value::Array(a)) => Labels::Node(
            a.iter()
                .enumerate()
                .map(|(i, x)| as_index(x, &field(&format!("labels[{i}]"))))
                .collect::<Result<_>>()?,
        ),
        Some(x) => Labels::Graph(as_index(x, &field("labels"))?),
    };
    Graph::new(n, edges, features, labels)
}

pub fn graph_to_json<T: Scalar>(g: &Graph<T>) -> Value {
    let features: Vec<Vec<f64>> =
        g.features().rows().into_iter().map(|r| r.iter().map(|x| x.to_f64_lossy()).collect()).collect();
    let labels = match g.labels() {
        Labels::None => Value::Null,
        Labels::Node(l) => json!(l),
        Labels::Graph(c) => json!(c),
    };
    json!({
        "n": g.n(),
        "edges": g.edges().iter().map(|&(u, v)| [u, v]).collect::<Vec<_>>(),
        "features": features,
        "labels": labels,
    })
}

pub fn dataset_from_json<T: Scalar>(value: &Value) -> Result<Vec<Graph<T>>> {
    let arr = value.as_array().ok_or_else(|| parse_err("<root>", "expected an array of graphs"))?;
    arr.iter().enumerate().map(|(i, g)| graph_from_json_at(g, &format!("[{i}]."))).collect()
}

pub fn dataset_to_json<T: Scalar>(graphs: &[Graph<T>]) -> Value {
    Value::Array(graphs.iter().map(graph_to_json).collect())
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err("<document>", e.to_string()))
}

pub fn load_graph<T: Scalar>(path: impl AsRef<Path>) -> Result<Graph<T>> {
    graph_from_json(&read_json(path.as_ref())?)
}

pub fn save_graph<T: Scalar>(path: impl AsRef<Path>, g: &Graph<T>) -> Result<()> {
    fs::write(path, serde_json::to_string(&graph_to_json(g))?)?;
    Ok(())
}

pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Graph<T>>> {
    dataset_from_json(&read_json(path.as_ref())?)
}

pub fn save_dataset<T: Scalar>(path: impl AsRef<Path>, graphs: &[Graph<T>]) -> Result<()> {
    fs::write(path, serde_json::to_string(&dataset_to_json(graphs))?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_round_trip() {
        let x = Array2::from_shape_vec((3, 2), vec![0.1, -2.5e-300, 1.0 / 3.0, 7.0, f64::MIN_POSITIVE, -0.0])
            .unwrap();
        let g = Graph::new(3, vec![(0, 1), (2, 1), (0, 2)], x, Labels::Node(vec![0, 1, 0])).unwrap();
        let back: Graph<f64> = graph_from_json(&graph_to_json(&g)).unwrap();
        assert_eq!(back.edges(), g.edges());
        for (a, b) in back.features().iter().zip(g.features()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.labels(), g.labels());
    }

    #[test]
    fn out_of_range_is_validation() {
        let v = json!({"n": 3, "edges": [[0, 5]], "features": [[0.0], [0.0], [0.0]], "labels": null});
        assert!(matches!(graph_from_json::<f64>(&v), Err(Error::Validation(_))));
    }

    #[test]
    fn parse_errors_name_field() {
        let v = json!({"n": 2, "edges": [[0]], "features": [[0.0], [0.0]]});
        match graph_from_json::<f64>(&v) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "edges[0]"),
            other => panic!("{other:?}"),
        }
        let v = json!([{"n": 1, "edges": [], "features": [["x"]]}]);
        match dataset_from_json::<f64>(&v) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "[0].features[0][0]"),
            other => panic!("{other:?}"),
        }
        let v = json!({"edges": [], "features": []});
        assert!(matches!(graph_from_json::<f64>(&v), Err(Error::Parse { .. })));
    }
}
