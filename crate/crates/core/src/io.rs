//! Flat-file formats: graphs (`.mg.json`), maps (`.gm.json`), walks
//! (`.walk.json`), reports (`.report.json`) and convergence certificates
//! (`.cert.json` manifests referencing package and witness files). All
//! rationals serialize as `"p/q"` strings so files round-trip bit-exactly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkers::{CharacterizeReport, PropertyReport};
use crate::convergence::{Certificate, MappingPackage, QiWitness, Sample, Stage};
use crate::error::CoreError;
use crate::graph::{GraphPoint, GraphSpec, MetricGraph, Segment, Walk};
use crate::map::{GraphMap, MapSpec};
use crate::rational::{fmt_rat, parse_rat, Rat};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid json at {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid rational `{0}`")]
    BadRational(String),
    #[error("invalid direction `{0}` (expected \"+\" or \"-\")")]
    BadDirection(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type IoResult<T> = std::result::Result<T, IoError>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> IoResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| IoError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.into(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> IoResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|source| IoError::Json { path: path.into(), source })?;
    std::fs::write(path, text + "\n").map_err(|source| IoError::Io { path: path.into(), source })
}

fn rat_field(s: &str) -> IoResult<Rat> {
    parse_rat(s).ok_or_else(|| IoError::BadRational(s.to_string()))
}

/// Point syntax: `{"vertex":"a"}`, `{"edge":"e1","offset":"1/2"}`, or a
/// bare vertex name string.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointFile {
    Named(String),
    Vertex { vertex: String },
    Edge { edge: String, offset: String },
}

pub fn point_from_file(g: &MetricGraph, p: &PointFile) -> IoResult<GraphPoint> {
    match p {
        PointFile::Named(name) | PointFile::Vertex { vertex: name } => {
            Ok(GraphPoint::Vertex(g.vertex_by_name(name)?))
        }
        PointFile::Edge { edge, offset } => {
            let e = g.edge_by_name(edge)?;
            Ok(g.point_on_edge(e, rat_field(offset)?)?)
        }
    }
}

pub fn point_to_file(g: &MetricGraph, p: &GraphPoint) -> PointFile {
    match p {
        GraphPoint::Vertex(v) => PointFile::Vertex { vertex: g.vertex_name(*v).to_string() },
        GraphPoint::Interior(e, off) => PointFile::Edge {
            edge: g.edge(*e).name.clone(),
            offset: fmt_rat(off),
        },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeFile {
    pub id: String,
    pub from: String,
    pub to: String,
    pub len: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<PointFile>,
}

pub fn load_graph(path: &Path) -> IoResult<(Arc<MetricGraph>, Option<GraphPoint>)> {
    let file: GraphFile = read_json(path)?;
    let mut spec = GraphSpec { vertices: file.vertices.clone(), edges: Vec::new() };
    for e in &file.edges {
        spec.edges.push((e.id.clone(), e.from.clone(), e.to.clone(), rat_field(&e.len)?));
    }
    let g = Arc::new(MetricGraph::build(&spec)?);
    let basepoint = match &file.basepoint {
        Some(p) => Some(point_from_file(&g, p)?),
        None => None,
    };
    Ok((g, basepoint))
}

pub fn graph_to_file(g: &MetricGraph, basepoint: Option<&GraphPoint>) -> GraphFile {
    GraphFile {
        vertices: g.vertices().map(|v| g.vertex_name(v).to_string()).collect(),
        edges: g
            .edge_ids()
            .map(|e| {
                let edge = g.edge(e);
                EdgeFile {
                    id: edge.name.clone(),
                    from: g.vertex_name(edge.u).to_string(),
                    to: g.vertex_name(edge.v).to_string(),
                    len: fmt_rat(&edge.len),
                }
            })
            .collect(),
        basepoint: basepoint.map(|p| point_to_file(g, p)),
    }
}

pub fn save_graph(path: &Path, g: &MetricGraph, basepoint: Option<&GraphPoint>) -> IoResult<()> {
    write_json(path, &graph_to_file(g, basepoint))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepFile {
    pub edge: String,
    pub dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapFile {
    /// Path to the source graph file, relative to this file.
    pub source: String,
    pub target: String,
    pub vertex_map: BTreeMap<String, String>,
    pub edge_map: BTreeMap<String, Vec<StepFile>>,
}

/// Loads a map together with its graphs; relative paths resolve against
/// the map file's directory.
pub fn load_map(path: &Path) -> IoResult<GraphMap> {
    let file: MapFile = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let (source, _) = load_graph(&dir.join(&file.source))?;
    let (target, _) = load_graph(&dir.join(&file.target))?;
    let mut spec = MapSpec { vertex_map: file.vertex_map.clone(), edge_map: BTreeMap::new() };
    for (edge, steps) in &file.edge_map {
        let mut parsed = Vec::new();
        for s in steps {
            let forward = match s.dir.as_str() {
                "+" => true,
                "-" => false,
                other => return Err(IoError::BadDirection(other.to_string())),
            };
            parsed.push((s.edge.clone(), forward));
        }
        spec.edge_map.insert(edge.clone(), parsed);
    }
    Ok(GraphMap::build(source, target, &spec)?)
}

/// Writes a map plus its two graph files next to it.
pub fn save_map(path: &Path, f: &GraphMap, source_name: &str, target_name: &str) -> IoResult<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    save_graph(&dir.join(source_name), f.source(), None)?;
    save_graph(&dir.join(target_name), f.target(), None)?;
    let mut vertex_map = BTreeMap::new();
    for v in f.source().vertices() {
        vertex_map.insert(
            f.source().vertex_name(v).to_string(),
            f.target().vertex_name(f.vertex_image(v)).to_string(),
        );
    }
    let mut edge_map = BTreeMap::new();
    for e in f.source().edge_ids() {
        let walk = f.edge_walk(e);
        let mut steps = Vec::new();
        for seg in walk.segments() {
            let edge = f.target().edge(seg.edge);
            // maps are stored as full-edge traversals; interior-offset
            // segments require pre-subdivided targets
            if seg.len() != edge.len {
                return Err(IoError::Core(CoreError::Precondition(format!(
                    "edge walk of `{}` contains a partial segment; subdivide the target first",
                    f.source().edge(e).name
                ))));
            }
            steps.push(StepFile {
                edge: edge.name.clone(),
                dir: if seg.sign() == crate::graph::Sign::Pos { "+" } else { "-" }.to_string(),
            });
        }
        edge_map.insert(f.source().edge(e).name.clone(), steps);
    }
    write_json(
        path,
        &MapFile {
            source: source_name.to_string(),
            target: target_name.to_string(),
            vertex_map,
            edge_map,
        },
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentFile {
    pub edge: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkFile {
    pub start: PointFile,
    pub segments: Vec<SegmentFile>,
}

pub fn load_walk(path: &Path, g: &MetricGraph) -> IoResult<Walk> {
    let file: WalkFile = read_json(path)?;
    walk_from_file(g, &file)
}

pub fn walk_from_file(g: &MetricGraph, file: &WalkFile) -> IoResult<Walk> {
    let start = point_from_file(g, &file.start)?;
    let mut walk = Walk::empty_at(start);
    for s in &file.segments {
        let e = g.edge_by_name(&s.edge)?;
        walk.push_segment(
            g,
            Segment { edge: e, from: rat_field(&s.from)?, to: rat_field(&s.to)? },
        )?;
    }
    Ok(walk)
}

pub fn walk_to_file(g: &MetricGraph, w: &Walk) -> WalkFile {
    WalkFile {
        start: point_to_file(g, w.start()),
        segments: w
            .segments()
            .iter()
            .map(|s| SegmentFile {
                edge: g.edge(s.edge).name.clone(),
                from: fmt_rat(&s.from),
                to: fmt_rat(&s.to),
            })
            .collect(),
    }
}

pub fn save_walk(path: &Path, g: &MetricGraph, w: &Walk) -> IoResult<()> {
    write_json(path, &walk_to_file(g, w))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<PointFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<PointFile>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub property: String,
    pub verdict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant_given: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant_minimal: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessFile>,
    pub discrete: bool,
    pub open: bool,
    pub branched_cover: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u128>,
}

pub fn report_to_file(
    f: &GraphMap,
    rep: &PropertyReport,
    minimal: Option<&Rat>,
    elapsed_ms: Option<u128>,
) -> ReportFile {
    ReportFile {
        property: rep.property.as_str().to_string(),
        verdict: rep.verdict,
        constant_given: rep.given_constant.as_ref().map(fmt_rat),
        constant_minimal: minimal.map(fmt_rat),
        r0: rep.r0.as_ref().map(fmt_rat),
        witness: rep.witness.as_ref().map(|w| WitnessFile {
            center: w.center.as_ref().map(|p| point_to_file(f.source(), p)),
            radius: w.radius.as_ref().map(fmt_rat),
            point: w.point.as_ref().map(|p| point_to_file(f.target(), p)),
            detail: w.detail.clone(),
        }),
        discrete: rep.topology.discrete,
        open: rep.topology.open,
        branched_cover: rep.topology.branched_cover,
        elapsed_ms,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacterizeFile {
    pub discrete: bool,
    pub open: bool,
    pub branched_cover: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bld: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lq: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coradial: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<bool>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u128>,
}

pub fn characterize_to_file(rep: &CharacterizeReport, elapsed_ms: Option<u128>) -> CharacterizeFile {
    CharacterizeFile {
        discrete: rep.topology.discrete,
        open: rep.topology.open,
        branched_cover: rep.topology.branched_cover,
        bld: rep.bld.as_ref().map(fmt_rat),
        lq: rep.lq.as_ref().map(fmt_rat),
        radial: rep.radial.as_ref().map(fmt_rat),
        coradial: rep.coradial.as_ref().map(fmt_rat),
        equivalence: rep.equivalence,
        notes: rep.notes.clone(),
        elapsed_ms,
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> IoResult<()> {
    write_json(path, value)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackageFile {
    pub map: String,
    pub source_basepoint: PointFile,
    pub target_basepoint: PointFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssignmentFile {
    pub at: PointFile,
    pub to: PointFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QiWitnessFile {
    pub epsilon: String,
    pub delta: String,
    pub assignments: Vec<AssignmentFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageFile {
    pub eps: Vec<String>,
    pub g: Vec<QiWitnessFile>,
    pub h: Vec<QiWitnessFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleFile {
    pub point: PointFile,
    pub track: Vec<PointFile>,
    pub radius: String,
    pub tails: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateFile {
    pub packages: Vec<PackageFile>,
    pub limit: PackageFile,
    pub radii: Vec<String>,
    pub stages: Vec<StageFile>,
    pub samples: Vec<SampleFile>,
    pub rate_c: String,
    pub monotone_from: usize,
}

fn load_package(dir: &Path, file: &PackageFile) -> IoResult<MappingPackage> {
    let map = load_map(&dir.join(&file.map))?;
    let x0 = point_from_file(map.source(), &file.source_basepoint)?;
    let y0 = point_from_file(map.target(), &file.target_basepoint)?;
    Ok(MappingPackage::new(map, x0, y0)?)
}

pub fn qi_witness_from_file(
    src: &MetricGraph,
    dst: &MetricGraph,
    w: &QiWitnessFile,
) -> IoResult<QiWitness> {
    let mut net = Vec::new();
    let mut images = Vec::new();
    for a in &w.assignments {
        net.push(point_from_file(src, &a.at)?);
        images.push(point_from_file(dst, &a.to)?);
    }
    Ok(QiWitness {
        epsilon: rat_field(&w.epsilon)?,
        delta: rat_field(&w.delta)?,
        net,
        images,
    })
}

pub fn qi_witness_to_file(src: &MetricGraph, dst: &MetricGraph, w: &QiWitness) -> QiWitnessFile {
    QiWitnessFile {
        epsilon: fmt_rat(&w.epsilon),
        delta: fmt_rat(&w.delta),
        assignments: w
            .net
            .iter()
            .zip(&w.images)
            .map(|(a, b)| AssignmentFile {
                at: point_to_file(src, a),
                to: point_to_file(dst, b),
            })
            .collect(),
    }
}

pub fn load_certificate(path: &Path) -> IoResult<Certificate> {
    let file: CertificateFile = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let packages: Vec<MappingPackage> = file
        .packages
        .iter()
        .map(|p| load_package(dir, p))
        .collect::<IoResult<_>>()?;
    let limit = load_package(dir, &file.limit)?;
    let radii = file.radii.iter().map(|r| rat_field(r)).collect::<IoResult<Vec<_>>>()?;
    let mut stages = Vec::new();
    for (i, st) in file.stages.iter().enumerate() {
        let pkg = packages.get(i).ok_or_else(|| {
            IoError::Core(CoreError::ScheduleIncomplete("more stages than packages".into()))
        })?;
        let eps = st.eps.iter().map(|r| rat_field(r)).collect::<IoResult<Vec<_>>>()?;
        let g = st
            .g
            .iter()
            .map(|w| qi_witness_from_file(&pkg.source.space, &limit.source.space, w))
            .collect::<IoResult<Vec<_>>>()?;
        let h = st
            .h
            .iter()
            .map(|w| qi_witness_from_file(&pkg.target.space, &limit.target.space, w))
            .collect::<IoResult<Vec<_>>>()?;
        stages.push(Stage { eps, g, h });
    }
    let mut samples = Vec::new();
    for s in &file.samples {
        let point = point_from_file(&limit.source.space, &s.point)?;
        let track = s
            .track
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let pkg = packages.get(i).ok_or_else(|| {
                    IoError::Core(CoreError::ScheduleIncomplete(
                        "track longer than the package list".into(),
                    ))
                })?;
                point_from_file(&pkg.source.space, p)
            })
            .collect::<IoResult<Vec<_>>>()?;
        samples.push(Sample {
            point,
            track,
            radius: rat_field(&s.radius)?,
            tails: s.tails.iter().map(|t| rat_field(t)).collect::<IoResult<Vec<_>>>()?,
        });
    }
    Ok(Certificate {
        packages,
        limit,
        radii,
        stages,
        samples,
        rate_c: rat_field(&file.rate_c)?,
        monotone_from: file.monotone_from,
    })
}

/// Writes a certificate into `dir` as `{stem}.cert.json` plus one
/// package/map/graph file set per entry. Returns the manifest path.
pub fn save_certificate(dir: &Path, stem: &str, cert: &Certificate) -> IoResult<PathBuf> {
    std::fs::create_dir_all(dir)
        .map_err(|source| IoError::Io { path: dir.into(), source })?;
    let mut package_files = Vec::new();
    let write_pkg = |tag: &str, pkg: &MappingPackage| -> IoResult<PackageFile> {
        let map_name = format!("{stem}.{tag}.gm.json");
        save_map(
            &dir.join(&map_name),
            &pkg.map,
            &format!("{stem}.{tag}.source.mg.json"),
            &format!("{stem}.{tag}.target.mg.json"),
        )?;
        Ok(PackageFile {
            map: map_name,
            source_basepoint: point_to_file(&pkg.source.space, &pkg.source.basepoint),
            target_basepoint: point_to_file(&pkg.target.space, &pkg.target.basepoint),
        })
    };
    for (i, pkg) in cert.packages.iter().enumerate() {
        package_files.push(write_pkg(&format!("pkg{}", i + 1), pkg)?);
    }
    let limit_file = write_pkg("limit", &cert.limit)?;
    let stages = cert
        .stages
        .iter()
        .enumerate()
        .map(|(i, st)| StageFile {
            eps: st.eps.iter().map(fmt_rat).collect(),
            g: st
                .g
                .iter()
                .map(|w| {
                    qi_witness_to_file(
                        &cert.packages[i].source.space,
                        &cert.limit.source.space,
                        w,
                    )
                })
                .collect(),
            h: st
                .h
                .iter()
                .map(|w| {
                    qi_witness_to_file(
                        &cert.packages[i].target.space,
                        &cert.limit.target.space,
                        w,
                    )
                })
                .collect(),
        })
        .collect();
    let samples = cert
        .samples
        .iter()
        .map(|s| SampleFile {
            point: point_to_file(&cert.limit.source.space, &s.point),
            track: s
                .track
                .iter()
                .enumerate()
                .map(|(i, p)| point_to_file(&cert.packages[i].source.space, p))
                .collect(),
            radius: fmt_rat(&s.radius),
            tails: s.tails.iter().map(fmt_rat).collect(),
        })
        .collect();
    let manifest = CertificateFile {
        packages: package_files,
        limit: limit_file,
        radii: cert.radii.iter().map(fmt_rat).collect(),
        stages,
        samples,
        rate_c: fmt_rat(&cert.rate_c),
        monotone_from: cert.monotone_from,
    };
    let path = dir.join(format!("{stem}.cert.json"));
    write_json(&path, &manifest)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence;
    use crate::fixtures;
    use crate::graph::{EdgeId, VertexId};
    use crate::rational::{rat, rat_int};

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("bldgraph-io-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn graph_round_trip() {
        let dir = tmpdir("graph");
        let g = fixtures::cycle_graph(3, rat(1, 3));
        let bp = g.point_on_edge(EdgeId(1), rat(1, 6)).unwrap();
        let path = dir.join("c3.mg.json");
        save_graph(&path, &g, Some(&bp)).unwrap();
        let (g2, bp2) = load_graph(&path).unwrap();
        assert_eq!(g2.vertex_count(), 3);
        assert_eq!(g2.edge_count(), 3);
        assert_eq!(bp2, Some(bp));
        for e in g.edge_ids() {
            assert_eq!(g.edge(e).len, g2.edge(e).len);
        }
    }

    #[test]
    fn map_round_trip() {
        let dir = tmpdir("map");
        let f = fixtures::winding(2, 3);
        let path = dir.join("w2.gm.json");
        save_map(&path, &f, "w2.source.mg.json", "w2.target.mg.json").unwrap();
        let f2 = load_map(&path).unwrap();
        assert_eq!(f2.speeds(), f.speeds());
        assert!(f2.is_branched_cover());
        // collapsed edges round-trip as empty lists
        let c = fixtures::const_map();
        let path = dir.join("const.gm.json");
        save_map(&path, &c, "const.source.mg.json", "const.target.mg.json").unwrap();
        let c2 = load_map(&path).unwrap();
        assert!(!c2.is_discrete().0);
    }

    #[test]
    fn walk_round_trip() {
        let dir = tmpdir("walk");
        let g = fixtures::path_graph(3);
        let w = g
            .geodesic(
                &g.point_on_edge(EdgeId(0), rat(1, 2)).unwrap(),
                &GraphPoint::Vertex(VertexId(3)),
            )
            .unwrap();
        let path = dir.join("walk.walk.json");
        save_walk(&path, &g, &w).unwrap();
        let w2 = load_walk(&path, &g).unwrap();
        assert_eq!(w, w2);
    }

    #[test]
    fn certificate_round_trip() {
        let dir = tmpdir("cert");
        let cert = convergence::winding_demo(2, 2).unwrap();
        let path = save_certificate(&dir, "demo", &cert).unwrap();
        let cert2 = load_certificate(&path).unwrap();
        assert_eq!(cert2.packages.len(), 2);
        assert_eq!(cert2.radii, cert.radii);
        let rep = convergence::check_package_convergence(&cert2).unwrap();
        assert!(rep.pass, "issues: {:?}", rep.issues);
    }

    #[test]
    fn report_serialization() {
        let f = fixtures::speed2();
        let rep = crate::checkers::check_bld(&f, &rat_int(1)).unwrap();
        let file = report_to_file(&f, &rep, Some(&rat_int(2)), None);
        let text = serde_json::to_string(&file).unwrap();
        assert!(text.contains("\"verdict\":false"));
        assert!(text.contains("\"constant_minimal\":\"2\""));
    }
}
