use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{exp0, project_to_domain, Curvature};
use crate::graph::WeightedGraph;
use crate::network::Snapshot;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSnapshot {
    t: f64,
    features: Vec<Vec<f64>>,
    edges: Vec<RawEdge>,
}

/// `[i, j, w]`; indices are accepted as integral floats.
#[derive(Clone, Copy, Debug, PartialEq)]
struct RawEdge(usize, usize, f64);

impl Serialize for RawEdge {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.0, self.1, self.2).serialize(s)
    }
}

impl<'de> Deserialize<'de> for RawEdge {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (i, j, w) = <(f64, f64, f64)>::deserialize(d)?;
        let index = |x: f64| {
            if x >= 0.0 && x.fract() == 0.0 && x < u32::MAX as f64 {
                Ok(x as usize)
            } else {
                Err(serde::de::Error::custom(format!("edge endpoint {x} is not a node index")))
            }
        };
        Ok(RawEdge(index(i)?, index(j)?, w))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    name: String,
    kappa: f64,
    feature_dim: usize,
    num_nodes: usize,
    sequences: Vec<Vec<RawSnapshot>>,
}

/// Sequences of snapshots sharing a node set, feature dimension and
/// curvature. Each snapshot keeps its raw features next to the ingested
/// manifold points.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    pub name: String,
    pub kappa: Curvature,
    pub feature_dim: usize,
    pub num_nodes: usize,
    pub sequences: Vec<Vec<Snapshot>>,
}

/// Maps a raw feature row onto the manifold through `Exp_o`.
pub fn ingest_row(row: &[f64], kappa: Curvature) -> Result<crate::geometry::ManifoldPoint> {
    project_to_domain(exp0(row, kappa)?, kappa)
}

/// Builds a snapshot from raw features and weighted edges.
pub fn make_snapshot(
    t: f64,
    raw: Vec<Vec<f64>>,
    edges: &[(usize, usize, f64)],
    kappa: Curvature,
) -> Result<Snapshot> {
    let points = raw
        .iter()
        .map(|r| ingest_row(r, kappa))
        .collect::<Result<Vec<_>>>()?;
    let graph = WeightedGraph::from_edges(raw.len(), edges)?;
    Ok(Snapshot {
        t,
        points,
        raw,
        graph,
    })
}

fn parse_err(location: String, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        location,
        message: e.to_string(),
    }
}

impl TrajectoryDataset {
    /// Parses and validates a dataset document, then ingests its features
    /// at the document's curvature.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawDataset = serde_json::from_str(text)
            .map_err(|e| parse_err(format!("line {} column {}", e.line(), e.column()), e))?;
        let kappa = Curvature::new(raw.kappa).map_err(|e| parse_err("kappa".into(), e))?;
        Self::ingest(raw, kappa)
    }

    fn ingest(raw: RawDataset, kappa: Curvature) -> Result<Self> {
        if raw.feature_dim < 2 {
            return Err(parse_err("feature_dim".into(), "must be at least 2"));
        }
        let mut sequences = Vec::with_capacity(raw.sequences.len());
        for (s, seq) in raw.sequences.into_iter().enumerate() {
            let mut out = Vec::with_capacity(seq.len());
            let mut prev = f64::NEG_INFINITY;
            for (k, snap) in seq.into_iter().enumerate() {
                let at = |field: &str| format!("sequences[{s}][{k}].{field}");
                if !snap.t.is_finite() || snap.t <= prev {
                    return Err(parse_err(at("t"), format!("{} is not finite and increasing", snap.t)));
                }
                prev = snap.t;
                if snap.features.len() != raw.num_nodes {
                    return Err(parse_err(
                        at("features"),
                        format!("{} rows for {} nodes", snap.features.len(), raw.num_nodes),
                    ));
                }
                if let Some(r) = snap.features.iter().position(|r| r.len() != raw.feature_dim) {
                    return Err(parse_err(
                        format!("{}[{r}]", at("features")),
                        format!("expected {} values", raw.feature_dim),
                    ));
                }
                if let Some(r) = snap.features.iter().position(|r| r.iter().any(|x| !x.is_finite())) {
                    return Err(parse_err(format!("{}[{r}]", at("features")), "non-finite value"));
                }
                let edges: Vec<_> = snap.edges.iter().map(|e| (e.0, e.1, e.2)).collect();
                let made = make_snapshot(snap.t, snap.features, &edges, kappa)
                    .map_err(|e| parse_err(at("edges/features"), e))?;
                out.push(made);
            }
            sequences.push(out);
        }
        Ok(Self {
            name: raw.name,
            kappa,
            feature_dim: raw.feature_dim,
            num_nodes: raw.num_nodes,
            sequences,
        })
    }

    /// Re-ingests the raw features at another curvature.
    pub fn with_kappa(&self, kappa: Curvature) -> Result<Self> {
        Self::ingest(self.to_raw(), kappa)
    }

    fn to_raw(&self) -> RawDataset {
        RawDataset {
            name: self.name.clone(),
            kappa: self.kappa.value(),
            feature_dim: self.feature_dim,
            num_nodes: self.num_nodes,
            sequences: self
                .sequences
                .iter()
                .map(|seq| {
                    seq.iter()
                        .map(|s| RawSnapshot {
                            t: s.t,
                            features: s.raw.clone(),
                            edges: s.graph.edges().map(|(i, j, w)| RawEdge(i, j, w)).collect(),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("dataset serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::log0;

    const DOC: &str = r#"{"name":"tiny","kappa":-1.0,"feature_dim":2,"num_nodes":2,
        "sequences":[[{"t":0.0,"features":[[0.0,0.0],[0.3,-0.2]],"edges":[[0,1,0.5]]},
                      {"t":0.5,"features":[[0.1,0.0],[0.3,-0.1]],"edges":[[0,1.0,0.7]]}]]}"#;

    #[test]
    fn parses_and_ingests() {
        let d = TrajectoryDataset::from_json(DOC).unwrap();
        assert_eq!(d.sequences[0].len(), 2);
        let s = &d.sequences[0][0];
        assert!(s.points[0].coords().iter().all(|&x| x == 0.0));
        let back = log0(s.points[1].coords(), d.kappa);
        for (a, b) in back.iter().zip(&s.raw[1]) {
            assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn flat_ingest_is_identity() {
        let d = TrajectoryDataset::from_json(DOC).unwrap().with_kappa(Curvature::FLAT).unwrap();
        for s in &d.sequences[0] {
            for (p, r) in s.points.iter().zip(&s.raw) {
                assert_eq!(p.coords(), r.as_slice());
            }
        }
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let d = TrajectoryDataset::from_json(DOC).unwrap();
        let text = d.to_json();
        let again = TrajectoryDataset::from_json(&text).unwrap();
        assert_eq!(again, d);
        assert_eq!(again.to_json(), text);
    }

    #[test]
    fn schema_errors_carry_locations() {
        let bad_t = DOC.replace("\"t\":0.5", "\"t\":0.0");
        match TrajectoryDataset::from_json(&bad_t) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "sequences[0][1].t"),
            other => panic!("{other:?}"),
        }
        let bad_row = DOC.replace("[0.3,-0.2]", "[0.3]");
        match TrajectoryDataset::from_json(&bad_row) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "sequences[0][0].features[1]"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            TrajectoryDataset::from_json("{\"name\": 3}"),
            Err(Error::Parse { .. })
        ));
        let bad_w = DOC.replace("[0,1,0.5]", "[0,1,-0.5]");
        assert!(matches!(TrajectoryDataset::from_json(&bad_w), Err(Error::Parse { .. })));
        let bad_idx = DOC.replace("[0,1,0.5]", "[0,1.5,0.5]");
        assert!(matches!(TrajectoryDataset::from_json(&bad_idx), Err(Error::Parse { .. })));
    }
}
