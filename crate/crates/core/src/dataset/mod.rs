//! On-disk containers.
//!
//! A dataset directory holds `manifest.json` and `data.shard`. The shard
//! starts with a 12-byte header (`BRPG`, `u32` version, `u32` item count)
//! followed by the items back to back; the manifest records each item's byte
//! range and CRC-32. All integers are little-endian `i32` unless noted, all
//! tensor values little-endian `f32`. Item layout:
//!
//! ```text
//! i32 node_count, i32 arc_count, i32 has_tokens
//! per node: i32 face, i32 g_u, i32 g_v, i32 rows, rows × 10 f32
//! per arc:  i32 src, i32 dst, i32 edge, i32 rows, rows × 8 f32
//! if has_tokens: i32 n, n × 128 f32 tokens, 128 f32 h_cls, n f32 alpha
//! ```
//!
//! Embedding batches and encoder parameters have their own single-file
//! containers in [`containers`].

mod bytes;
pub mod containers;

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use bytes::{ByteReader, ByteWriter};

use crate::encoder::{EncoderOutput, D_TOKEN};
use crate::graph::{BrepGraph, GraphArc, GraphNode};
use crate::sampler::{EdgeTensor, FaceTensor, SamplerConfig, EDGE_COLUMNS, FACE_COLUMNS};

pub const MAGIC: &[u8; 4] = b"BRPG";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SHARD_FILE: &str = "data.shard";
pub const SHARD_HEADER_LEN: usize = 12;
/// Items must fit in a signed 32-bit byte count.
pub const MAX_ITEM_BYTES: u64 = 1 << 31;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error on {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("bad magic: expected BRPG")]
    Magic,
    #[error("truncated: {0}")]
    Truncated(String),
    #[error("checksum mismatch in item {item}: manifest {expected:08x}, shard {found:08x}")]
    Checksum {
        item: usize,
        expected: u32,
        found: u32,
    },
    #[error("item {item} is {bytes} bytes, limit is 2^31")]
    ItemTooLarge { item: usize, bytes: u64 },
    #[error("corrupt data: {0}")]
    Corrupt(String),
    #[error("value {value} in {tensor} is not exactly representable as f32")]
    NotF32 { tensor: String, value: f64 },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub face: i32,
    pub g_u: i32,
    pub g_v: i32,
    /// `rows × 10`.
    pub rows: Array2<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcRecord {
    pub src: i32,
    pub dst: i32,
    pub edge: i32,
    /// `rows × 8`.
    pub rows: Array2<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenRecord {
    /// `n × 128`.
    pub tokens: Array2<f32>,
    pub h_cls: Array1<f32>,
    pub alpha: Array1<f32>,
}

/// One graph as stored in a shard. Values are `f32`; the name lives in the
/// manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub name: String,
    pub nodes: Vec<NodeRecord>,
    pub arcs: Vec<ArcRecord>,
    pub tokens: Option<TokenRecord>,
}

fn to_f32(a: &Array2<f64>) -> Array2<f32> {
    a.mapv(|v| v as f32)
}

fn index(v: usize) -> i32 {
    i32::try_from(v).expect("index fits in i32")
}

impl DatasetItem {
    /// Narrow a graph (and optionally its encoder output) to `f32` records.
    pub fn from_graph(graph: &BrepGraph, encoded: Option<&EncoderOutput>) -> Self {
        Self {
            name: graph.name.clone(),
            nodes: graph
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    face: index(n.face),
                    g_u: index(n.tensor.g_u),
                    g_v: index(n.tensor.g_v),
                    rows: to_f32(&n.tensor.rows),
                })
                .collect(),
            arcs: graph
                .arcs
                .iter()
                .map(|a| ArcRecord {
                    src: index(a.src),
                    dst: index(a.dst),
                    edge: index(a.edge),
                    rows: to_f32(&a.tensor.rows),
                })
                .collect(),
            tokens: encoded.map(|e| TokenRecord {
                tokens: to_f32(&e.tokens.h),
                h_cls: e.global.h_cls.mapv(|v| v as f32),
                alpha: e.global.alpha.mapv(|v| v as f32),
            }),
        }
    }

    /// Widen back to an `f64` graph. Seam counts are not stored and come back as 0.
    pub fn to_graph(&self) -> BrepGraph {
        BrepGraph {
            name: self.name.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| GraphNode {
                    face: n.face as usize,
                    tensor: FaceTensor {
                        face: n.face as usize,
                        g_u: n.g_u as usize,
                        g_v: n.g_v as usize,
                        rows: n.rows.mapv(f64::from),
                    },
                })
                .collect(),
            arcs: self
                .arcs
                .iter()
                .map(|a| GraphArc {
                    src: a.src as usize,
                    dst: a.dst as usize,
                    edge: a.edge as usize,
                    tensor: EdgeTensor {
                        edge: a.edge as usize,
                        rows: a.rows.mapv(f64::from),
                    },
                })
                .collect(),
            seam_edges: 0,
        }
    }

    fn encode(&self, w: &mut ByteWriter) {
        w.i32(index(self.nodes.len()));
        w.i32(index(self.arcs.len()));
        w.i32(self.tokens.is_some() as i32);
        for n in &self.nodes {
            w.i32(n.face);
            w.i32(n.g_u);
            w.i32(n.g_v);
            w.i32(index(n.rows.nrows()));
            w.f32s(n.rows.iter());
        }
        for a in &self.arcs {
            w.i32(a.src);
            w.i32(a.dst);
            w.i32(a.edge);
            w.i32(index(a.rows.nrows()));
            w.f32s(a.rows.iter());
        }
        if let Some(t) = &self.tokens {
            w.i32(index(t.tokens.nrows()));
            w.f32s(t.tokens.iter());
            w.f32s(t.h_cls.iter());
            w.f32s(t.alpha.iter());
        }
    }

    fn decode(name: String, r: &mut ByteReader) -> Result<Self, DatasetError> {
        let node_count = r.count("node count")?;
        let arc_count = r.count("arc count")?;
        let has_tokens = match r.i32()? {
            0 => false,
            1 => true,
            v => return Err(DatasetError::Corrupt(format!("has_tokens flag {v}"))),
        };
        let matrix = |r: &mut ByteReader, rows: usize, cols: usize| {
            let data = r.f32s(rows.checked_mul(cols).ok_or_else(|| {
                DatasetError::Corrupt("row count overflow".into())
            })?)?;
            Ok::<_, DatasetError>(Array2::from_shape_vec((rows, cols), data).expect("sized"))
        };
        let mut nodes = Vec::new();
        for _ in 0..node_count {
            let face = r.i32()?;
            let g_u = r.i32()?;
            let g_v = r.i32()?;
            let rows = r.count("row count")?;
            if i64::from(g_u) * i64::from(g_v) != rows as i64 {
                return Err(DatasetError::Corrupt(format!(
                    "node grid {g_u}×{g_v} does not match {rows} rows"
                )));
            }
            nodes.push(NodeRecord {
                face,
                g_u,
                g_v,
                rows: matrix(r, rows, FACE_COLUMNS)?,
            });
        }
        let mut arcs = Vec::new();
        for _ in 0..arc_count {
            let src = r.i32()?;
            let dst = r.i32()?;
            let edge = r.i32()?;
            let rows = r.count("row count")?;
            let in_range = |v: i32| (0..node_count as i64).contains(&i64::from(v));
            if !in_range(src) || !in_range(dst) {
                return Err(DatasetError::Corrupt(format!(
                    "arc endpoints ({src}, {dst}) outside 0..{node_count}"
                )));
            }
            arcs.push(ArcRecord {
                src,
                dst,
                edge,
                rows: matrix(r, rows, EDGE_COLUMNS)?,
            });
        }
        let tokens = if has_tokens {
            let n = r.count("token count")?;
            let tokens = matrix(r, n, D_TOKEN)?;
            let h_cls = Array1::from(r.f32s(D_TOKEN)?);
            let alpha = Array1::from(r.f32s(n)?);
            Some(TokenRecord {
                tokens,
                h_cls,
                alpha,
            })
        } else {
            None
        };
        r.finish()?;
        Ok(Self {
            name,
            nodes,
            arcs,
            tokens,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub node_count: usize,
    pub arc_count: usize,
    /// Byte offset of the item in the shard.
    pub offset: u64,
    pub length: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub item_count: usize,
    pub sampler: Option<SamplerConfig>,
    pub items: Vec<ManifestEntry>,
}

/// Serialize items into shard bytes and the matching manifest.
pub fn encode_dataset(
    items: &[DatasetItem],
    sampler: Option<&SamplerConfig>,
) -> Result<(Vec<u8>, DatasetManifest), DatasetError> {
    let mut w = ByteWriter::default();
    w.bytes(MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(u32::try_from(items.len()).map_err(|_| DatasetError::Corrupt("too many items".into()))?);
    let mut entries = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let offset = w.buf.len();
        item.encode(&mut w);
        let length = (w.buf.len() - offset) as u64;
        if length > MAX_ITEM_BYTES {
            return Err(DatasetError::ItemTooLarge {
                item: i,
                bytes: length,
            });
        }
        entries.push(ManifestEntry {
            name: item.name.clone(),
            node_count: item.nodes.len(),
            arc_count: item.arcs.len(),
            offset: offset as u64,
            length,
            crc32: crc32fast::hash(&w.buf[offset..]),
        });
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        item_count: items.len(),
        sampler: sampler.copied(),
        items: entries,
    };
    Ok((w.buf, manifest))
}

/// Decode a shard against its manifest, verifying layout and checksums.
pub fn decode_dataset(
    shard: &[u8],
    manifest: &DatasetManifest,
) -> Result<Vec<DatasetItem>, DatasetError> {
    check_manifest(manifest)?;
    let mut header = ByteReader::new(shard, "shard header");
    if header.take(4)? != MAGIC {
        return Err(DatasetError::Magic);
    }
    let version = header.u32()?;
    if version != FORMAT_VERSION {
        return Err(DatasetError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = header.u32()? as usize;
    if count != manifest.item_count {
        return Err(DatasetError::Manifest(format!(
            "shard holds {count} items, manifest lists {}",
            manifest.item_count
        )));
    }
    let mut items = Vec::with_capacity(count);
    for (i, e) in manifest.items.iter().enumerate() {
        let end = e.offset + e.length;
        if end > shard.len() as u64 {
            return Err(DatasetError::Truncated(format!(
                "item {i} ends at byte {end}, shard has {}",
                shard.len()
            )));
        }
        let bytes = &shard[e.offset as usize..end as usize];
        let found = crc32fast::hash(bytes);
        if found != e.crc32 {
            return Err(DatasetError::Checksum {
                item: i,
                expected: e.crc32,
                found,
            });
        }
        let mut r = ByteReader::new(bytes, format!("item {i}"));
        let item = DatasetItem::decode(e.name.clone(), &mut r)?;
        if item.nodes.len() != e.node_count || item.arcs.len() != e.arc_count {
            return Err(DatasetError::Manifest(format!(
                "item {i}: manifest counts ({}, {}) differ from shard ({}, {})",
                e.node_count,
                e.arc_count,
                item.nodes.len(),
                item.arcs.len()
            )));
        }
        items.push(item);
    }
    let last = manifest
        .items
        .last()
        .map_or(SHARD_HEADER_LEN as u64, |e| e.offset + e.length);
    if last != shard.len() as u64 {
        return Err(DatasetError::Corrupt(format!(
            "shard is {} bytes, items end at {last}",
            shard.len()
        )));
    }
    Ok(items)
}

fn check_manifest(m: &DatasetManifest) -> Result<(), DatasetError> {
    if m.format_version != FORMAT_VERSION {
        return Err(DatasetError::Version {
            found: m.format_version,
            expected: FORMAT_VERSION,
        });
    }
    if m.item_count != m.items.len() {
        return Err(DatasetError::Manifest(format!(
            "item_count {} but {} entries",
            m.item_count,
            m.items.len()
        )));
    }
    let mut next = SHARD_HEADER_LEN as u64;
    for (i, e) in m.items.iter().enumerate() {
        if e.offset != next {
            return Err(DatasetError::Manifest(format!(
                "item {i} starts at {} but the previous item ends at {next}",
                e.offset
            )));
        }
        if e.length > MAX_ITEM_BYTES {
            return Err(DatasetError::ItemTooLarge {
                item: i,
                bytes: e.length,
            });
        }
        next = e.offset + e.length;
    }
    Ok(())
}

/// Write `manifest.json` and `data.shard` into `dir`, creating it if needed.
pub fn write_dataset(
    items: &[DatasetItem],
    sampler: Option<&SamplerConfig>,
    dir: &Path,
) -> Result<DatasetManifest, DatasetError> {
    let (shard, manifest) = encode_dataset(items, sampler)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let shard_path = dir.join(SHARD_FILE);
    fs::write(&shard_path, &shard).map_err(io_err(&shard_path))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, json + "\n").map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    // Version first, so a future manifest is reported as such even if its
    // other fields changed shape.
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    match raw.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(DatasetError::Version {
                found: u32::try_from(v).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            })
        }
        None => return Err(DatasetError::Manifest("missing format_version".into())),
    }
    serde_json::from_value(raw).map_err(|e| DatasetError::Manifest(e.to_string()))
}

/// Read and verify a dataset directory. The manifest is checked before the
/// shard is opened.
pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<DatasetItem>), DatasetError> {
    let manifest = read_manifest(dir)?;
    check_manifest(&manifest)?;
    let path = dir.join(SHARD_FILE);
    let shard = fs::read(&path).map_err(io_err(&path))?;
    let items = decode_dataset(&shard, &manifest)?;
    Ok((manifest, items))
}
