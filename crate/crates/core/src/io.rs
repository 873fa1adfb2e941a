//! JSON documents for meshes and spaces.
//!
//! Mesh: `{"domain": [x_min, x_max, y_min, y_max], "bidegree": [p1, p2],
//! "lines": [{"dir": 1|2, "fixed": d, "span": [d, d], "mult": m}, ...]}` where
//! every coordinate `d` is a dyadic `[numerator, exponent]`.
//! Space: the mesh fields plus `"functions": [{"x": [d..], "y": [d..], "w": real}]`.

use std::collections::BTreeMap;
use std::path::Path;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::bspline::FunctionKey;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Meshline, Rect};
use crate::space::LRSpace;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshDoc {
    domain: [Dyadic; 4],
    bidegree: [u32; 2],
    lines: Vec<Meshline>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionDoc {
    x: Vec<Dyadic>,
    y: Vec<Dyadic>,
    w: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceDoc {
    domain: [Dyadic; 4],
    bidegree: [u32; 2],
    lines: Vec<Meshline>,
    functions: Vec<FunctionDoc>,
}

/// A parsed document of either kind.
#[derive(Clone, Debug)]
pub enum Document {
    Mesh(Mesh),
    Space(LRSpace),
}

fn domain_of(mesh: &Mesh) -> [Dyadic; 4] {
    let d = mesh.domain();
    [d.x_min, d.x_max, d.y_min, d.y_max]
}

fn build_mesh(domain: [Dyadic; 4], bidegree: [u32; 2], lines: &[Meshline]) -> Result<Mesh> {
    let rect = Rect::new(domain[0], domain[1], domain[2], domain[3])?;
    Mesh::from_lines(rect, (bidegree[0], bidegree[1]), lines)
}

pub fn mesh_to_json(mesh: &Mesh) -> String {
    let doc = MeshDoc {
        domain: domain_of(mesh),
        bidegree: [mesh.bidegree().0, mesh.bidegree().1],
        lines: mesh.meshlines(),
    };
    serde_json::to_string_pretty(&doc).expect("mesh serializes")
}

pub fn mesh_from_json(text: &str) -> Result<Mesh> {
    let doc: MeshDoc = serde_json::from_str(text)?;
    build_mesh(doc.domain, doc.bidegree, &doc.lines)
}

pub fn space_to_json(space: &LRSpace) -> String {
    let mesh = space.mesh();
    let doc = SpaceDoc {
        domain: domain_of(mesh),
        bidegree: [mesh.bidegree().0, mesh.bidegree().1],
        lines: mesh.meshlines(),
        functions: space
            .weights()
            .iter()
            .map(|(k, w)| FunctionDoc { x: k.x.clone(), y: k.y.clone(), w: w.to_f64().unwrap_or(f64::NAN) })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("space serializes")
}

/// Weights are stored as reals. When the mesh regenerates the same function
/// set with matching weights, the exact weights of the regenerated space are
/// used; otherwise the stored reals are taken as exact.
pub fn space_from_json(text: &str) -> Result<LRSpace> {
    let doc: SpaceDoc = serde_json::from_str(text)?;
    space_from_doc(doc)
}

fn space_from_doc(doc: SpaceDoc) -> Result<LRSpace> {
    let mesh = build_mesh(doc.domain, doc.bidegree, &doc.lines)?;
    let mut stored = BTreeMap::new();
    for (i, f) in doc.functions.into_iter().enumerate() {
        let key = FunctionKey::new(f.x, f.y).map_err(|e| Error::Parse(format!("functions[{i}]: {e}")))?;
        if !(f.w.is_finite() && f.w > 0.0) {
            return Err(Error::Parse(format!("functions[{i}]: weight must be positive")));
        }
        if stored.insert(key.clone(), f.w).is_some() {
            return Err(Error::Parse(format!("functions[{i}]: duplicate function {key}")));
        }
    }
    if let Ok(regenerated) = LRSpace::from_mesh(&mesh) {
        let same = regenerated.len() == stored.len()
            && regenerated.weights().iter().all(|(k, w)| {
                stored
                    .get(k)
                    .is_some_and(|&s| (w.to_f64().unwrap_or(f64::NAN) - s).abs() <= 1e-12 * s.max(1.0))
            });
        if same {
            return Ok(regenerated);
        }
    }
    let exact = stored
        .into_iter()
        .map(|(k, w)| {
            BigRational::from_float(w)
                .map(|r| (k, r))
                .ok_or_else(|| Error::Parse("weight is not finite".into()))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    LRSpace::from_parts(mesh, exact)
}

/// Parses a space if the document has `"functions"`, a mesh otherwise.
pub fn document_from_json(text: &str) -> Result<Document> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("functions").is_some() {
        Ok(Document::Space(space_from_json(text)?))
    } else {
        Ok(Document::Mesh(mesh_from_json(text)?))
    }
}

pub fn read_document(path: &Path) -> Result<Document> {
    document_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_space(space: &LRSpace, path: &Path) -> Result<()> {
    std::fs::write(path, space_to_json(space) + "\n")?;
    Ok(())
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, mesh_to_json(mesh) + "\n")?;
    Ok(())
}
