//! Binary persistence for roadmaps and dual roadmaps.
//!
//! Layout (all integers little-endian, ids stored as u64):
//!
//! ```text
//! header   magic "DUALDRM\0" | version u32 | kind u32 | compat u64 | payload_len u64 | checksum u64
//! payload  kind 1: torso grid, roadmap block
//!          kind 2: torso grid, roadmap block (arm1), roadmap block (arm2),
//!                  inter-arm map 1, inter-arm map 2
//! ```
//!
//! The checksum covers the first 32 header bytes and the payload. `compat`
//! hashes the voxel grid, padding and metric weights; it is what a scenario
//! has to match before the file can be used. See `docs/format.md`.

use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::ChainId;
use crate::error::{Error, Result};
use crate::roadmap::{JointGrid, NodeId, Roadmap, RoadmapParams};
use crate::voxel::VoxelGrid;

pub const MAGIC: [u8; 8] = *b"DUALDRM\0";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum FileKind {
    Roadmap = 1,
    Dual = 2,
}

impl FileKind {
    fn from_u32(v: u32) -> Option<Self> {
        match v {
            1 => Some(FileKind::Roadmap),
            2 => Some(FileKind::Dual),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("not a roadmap file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported format version {found} (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("file kind {found} where kind {expected} was expected")]
    WrongKind { found: u32, expected: u32 },
    #[error("checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("truncated file: needed {needed} bytes at offset {offset}")]
    Truncated { needed: usize, offset: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("corrupt payload: {0}")]
    Corrupt(String),
}

fn corrupt(msg: impl Into<String>) -> FormatError {
    FormatError::Corrupt(msg.into())
}

fn digest64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}

/// Hash of everything a scenario must agree with: grid origin, voxel size,
/// dims, padding and metric weights (bit patterns, not rounded values).
pub fn compatibility_hash(grid: &VoxelGrid, padding: f64, weights: &[f64]) -> u64 {
    let mut bytes = Vec::with_capacity(64 + 8 * weights.len());
    grid.fingerprint_bytes(&mut bytes);
    bytes.extend_from_slice(&padding.to_le_bytes());
    bytes.extend_from_slice(&(weights.len() as u64).to_le_bytes());
    for w in weights {
        bytes.extend_from_slice(&w.to_le_bytes());
    }
    digest64(&[b"compat", &bytes])
}

/// What a stored roadmap or a scenario pins down. `None` means the scenario
/// does not constrain that field.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatMeta {
    pub grid: VoxelGrid,
    pub padding: Option<f64>,
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Compatibility {
    Compatible,
    Mismatch { field: &'static str, detail: String },
}

/// Compares field by field; the first mismatch wins. Equality is exact.
pub fn hash_compatibility(stored: &CompatMeta, requested: &CompatMeta) -> Compatibility {
    let (a, b) = (&stored.grid, &requested.grid);
    let bits = |x: &[f64]| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    if a.voxel_size.to_bits() != b.voxel_size.to_bits() {
        return Compatibility::Mismatch {
            field: "voxel_size",
            detail: format!("{} vs {}", a.voxel_size, b.voxel_size),
        };
    }
    if bits(&a.min_corner) != bits(&b.min_corner) || a.dims != b.dims {
        return Compatibility::Mismatch {
            field: "grid",
            detail: format!(
                "origin {:?} dims {:?} vs origin {:?} dims {:?}",
                a.min_corner, a.dims, b.min_corner, b.dims
            ),
        };
    }
    if let (Some(p), Some(q)) = (stored.padding, requested.padding) {
        if p.to_bits() != q.to_bits() {
            return Compatibility::Mismatch {
                field: "padding",
                detail: format!("{p} vs {q}"),
            };
        }
    }
    if let (Some(w), Some(v)) = (&stored.weights, &requested.weights) {
        if bits(w) != bits(v) {
            return Compatibility::Mismatch {
                field: "weights",
                detail: format!("{w:?} vs {v:?}"),
            };
        }
    }
    Compatibility::Compatible
}

#[derive(Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub(crate) fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }

    pub(crate) fn joint_grid(&mut self, g: &JointGrid) {
        self.u32(g.dof() as u32);
        for j in 0..g.dof() {
            let v = g.joint_values(j);
            self.u64(v.len() as u64);
            self.f64s(v);
        }
    }

    pub(crate) fn voxel_grid(&mut self, g: &VoxelGrid) {
        self.f64s(&g.min_corner);
        self.f64(g.voxel_size);
        for d in g.dims {
            self.u64(d as u64);
        }
    }

    /// Row offsets followed by the flat id array, all as u64.
    pub(crate) fn csr(&mut self, offsets: &[usize], ids: &[NodeId]) {
        for &o in offsets {
            self.u64(o as u64);
        }
        for &id in ids {
            self.u64(id as u64);
        }
    }

    pub(crate) fn finish(self, kind: FileKind, compat: u64) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.buf.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(kind as u32).to_le_bytes());
        out.extend_from_slice(&compat.to_le_bytes());
        out.extend_from_slice(&(self.buf.len() as u64).to_le_bytes());
        let checksum = digest64(&[&out, &self.buf]);
        out.extend_from_slice(&checksum.to_le_bytes());
        out.extend_from_slice(&self.buf);
        out
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    /// Absolute offset of `buf[0]` in the file, for error messages.
    base: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.buf.len() - self.pos < n {
            return Err(FormatError::Truncated {
                needed: n,
                offset: self.base + self.pos,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A length that is about to drive an allocation of `elem` bytes each.
    fn count(&mut self, elem: usize) -> Result<usize, FormatError> {
        let n = self.u64()?;
        self.ensure(n, elem)
    }

    fn ensure(&self, n: u64, elem: usize) -> Result<usize, FormatError> {
        let left = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(elem as u64) > left {
            return Err(FormatError::Truncated {
                needed: usize::try_from(n.saturating_mul(elem as u64)).unwrap_or(usize::MAX),
                offset: self.base + self.pos,
            });
        }
        Ok(n as usize)
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        self.ensure(n as u64, 8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub(crate) fn joint_grid(&mut self) -> Result<JointGrid, FormatError> {
        let dof = self.u32()? as usize;
        let mut values = Vec::new();
        for _ in 0..dof {
            let n = self.count(8)?;
            values.push(self.f64s(n)?);
        }
        JointGrid::from_values(values).map_err(|e| corrupt(e.to_string()))
    }

    pub(crate) fn voxel_grid(&mut self) -> Result<VoxelGrid, FormatError> {
        let min = [self.f64()?, self.f64()?, self.f64()?];
        let size = self.f64()?;
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = usize::try_from(self.u64()?).map_err(|_| corrupt("grid dimension overflow"))?;
        }
        VoxelGrid::new(min, size, dims).map_err(|e| corrupt(e.to_string()))
    }

    /// `rows + 1` offsets and the id array; ids must be `< bound`.
    pub(crate) fn csr(&mut self, rows: usize, bound: usize) -> Result<(Vec<usize>, Vec<NodeId>), FormatError> {
        self.ensure(rows as u64 + 1, 8)?;
        let mut offsets = Vec::with_capacity(rows + 1);
        for _ in 0..=rows {
            offsets.push(self.u64()?);
        }
        if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(corrupt("row offsets are not non-decreasing from zero"));
        }
        let total = self.ensure(offsets[rows], 8)?;
        let mut ids = Vec::with_capacity(total);
        for _ in 0..total {
            let id = self.u64()?;
            if id >= bound as u64 {
                return Err(corrupt(format!("id {id} out of range (< {bound})")));
            }
            ids.push(id as NodeId);
        }
        Ok((offsets.into_iter().map(|o| o as usize).collect(), ids))
    }

    pub(crate) fn done(&self) -> Result<(), FormatError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(FormatError::TrailingBytes(n)),
        }
    }
}

/// Validates the header and checksum; returns the stored compatibility hash
/// and a reader over the payload.
pub(crate) fn open(bytes: &[u8], kind: FileKind) -> Result<(u64, Reader<'_>), FormatError> {
    if bytes.len() < 8 || bytes[..8] != MAGIC {
        return Err(if bytes.len() < 8 && MAGIC.starts_with(bytes) {
            FormatError::Truncated {
                needed: HEADER_LEN,
                offset: 0,
            }
        } else {
            FormatError::BadMagic
        });
    }
    let mut head = Reader {
        buf: &bytes[..bytes.len().min(HEADER_LEN)],
        pos: 8,
        base: 0,
    };
    let version = head.u32()?;
    if version != FORMAT_VERSION {
        return Err(FormatError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let found_kind = head.u32()?;
    let compat = head.u64()?;
    let payload_len = head.u64()?;
    let stored = head.u64()?;
    let payload = &bytes[HEADER_LEN..];
    if (payload.len() as u64) < payload_len {
        return Err(FormatError::Truncated {
            needed: (payload_len - payload.len() as u64) as usize,
            offset: bytes.len(),
        });
    }
    if payload.len() as u64 > payload_len {
        return Err(FormatError::TrailingBytes(payload.len() - payload_len as usize));
    }
    let computed = digest64(&[&bytes[..32], payload]);
    if computed != stored {
        return Err(FormatError::ChecksumMismatch { stored, computed });
    }
    if FileKind::from_u32(found_kind) != Some(kind) {
        return Err(FormatError::WrongKind {
            found: found_kind,
            expected: kind as u32,
        });
    }
    Ok((
        compat,
        Reader {
            buf: payload,
            pos: 0,
            base: HEADER_LEN,
        },
    ))
}

pub(crate) fn write_roadmap_block(w: &mut Writer, r: &Roadmap) {
    w.u32(r.chain.number());
    w.joint_grid(&r.arm_grid);
    w.f64(r.params.padding);
    w.u32(r.params.max_moving_joints as u32);
    w.u64(r.params.node_cap as u64);
    w.u32(r.params.weights.len() as u32);
    w.f64s(&r.params.weights);
    w.voxel_grid(&r.grid);
    w.u64(r.node_count() as u64);
    w.f64s(&r.configs);
    for &o in &r.torso_offsets {
        w.u64(o as u64);
    }
    w.csr(&r.adj_offsets, &r.adj);
    w.csr(&r.coll_offsets, &r.coll_nodes);
}

pub(crate) fn read_roadmap_block(rd: &mut Reader<'_>, torso_grid: &Arc<JointGrid>) -> Result<Roadmap, FormatError> {
    let chain = ChainId::from_number(rd.u32()?).ok_or_else(|| corrupt("chain number must be 1 or 2"))?;
    let arm_grid = rd.joint_grid()?;
    let padding = rd.f64()?;
    let max_moving_joints = rd.u32()? as usize;
    let node_cap = usize::try_from(rd.u64()?).map_err(|_| corrupt("node cap overflow"))?;
    let wn = rd.u32()? as usize;
    let weights = rd.f64s(wn)?;
    let dof = torso_grid.dof() + arm_grid.dof();
    if wn != dof {
        return Err(corrupt(format!("{wn} weights for {dof} joints")));
    }
    let grid = rd.voxel_grid()?;
    let n = rd.count(8 * dof.max(1))?;
    if n > NodeId::MAX as usize {
        return Err(corrupt("too many nodes"));
    }
    let configs = rd.f64s(n * dof)?;

    let cells = torso_grid.cell_count();
    rd.ensure(cells as u64 + 1, 8)?;
    let mut torso_offsets = Vec::with_capacity(cells + 1);
    for _ in 0..=cells {
        torso_offsets.push(rd.u64()?);
    }
    if torso_offsets[0] != 0 || torso_offsets[cells] != n as u64 || torso_offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(corrupt("torso offsets do not partition the node range"));
    }
    let torso_offsets: Vec<NodeId> = torso_offsets.into_iter().map(|o| o as NodeId).collect();
    let mut torso_of = Vec::with_capacity(n);
    for t in 0..cells {
        let len = torso_offsets[t + 1] - torso_offsets[t];
        torso_of.extend(std::iter::repeat(t as u32).take(len as usize));
    }

    let (adj_offsets, adj) = rd.csr(n, n)?;
    let (coll_offsets, coll_nodes) = rd.csr(grid.voxel_count(), n)?;

    let t_dof = torso_grid.dof();
    for (node, &t) in torso_of.iter().enumerate() {
        let stored = &configs[node * dof..node * dof + t_dof];
        let expect = torso_grid.values_of(t as usize);
        if stored.iter().zip(&expect).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(corrupt(format!("node {node} torso values do not match its torso cell")));
        }
    }

    Ok(Roadmap {
        chain,
        torso_grid: Arc::clone(torso_grid),
        arm_grid,
        params: RoadmapParams {
            padding,
            max_moving_joints,
            weights,
            node_cap,
        },
        grid,
        configs,
        torso_offsets,
        torso_of,
        adj_offsets,
        adj,
        coll_offsets,
        coll_nodes,
    })
}

pub fn roadmap_compat_hash(r: &Roadmap) -> u64 {
    compatibility_hash(&r.grid, r.params.padding, &r.params.weights)
}

pub fn roadmap_to_bytes(r: &Roadmap) -> Vec<u8> {
    let mut w = Writer::default();
    w.joint_grid(&r.torso_grid);
    write_roadmap_block(&mut w, r);
    w.finish(FileKind::Roadmap, roadmap_compat_hash(r))
}

pub fn roadmap_from_bytes(bytes: &[u8]) -> Result<Roadmap> {
    let (compat, mut rd) = open(bytes, FileKind::Roadmap)?;
    let torso = Arc::new(rd.joint_grid()?);
    let r = read_roadmap_block(&mut rd, &torso)?;
    rd.done()?;
    if roadmap_compat_hash(&r) != compat {
        return Err(corrupt("stored compatibility hash does not match contents").into());
    }
    Ok(r)
}

pub fn save_roadmap(path: impl AsRef<Path>, r: &Roadmap) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, roadmap_to_bytes(r)).map_err(|e| Error::io(path, e))
}

pub fn load_roadmap(path: impl AsRef<Path>) -> Result<Roadmap> {
    let path = path.as_ref();
    roadmap_from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Reads only the header of a file: kind and compatibility hash.
pub fn peek_header(bytes: &[u8]) -> Result<(FileKind, u64), FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            needed: HEADER_LEN,
            offset: 0,
        });
    }
    if bytes[..8] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let mut head = Reader {
        buf: &bytes[..HEADER_LEN],
        pos: 8,
        base: 0,
    };
    let version = head.u32()?;
    if version != FORMAT_VERSION {
        return Err(FormatError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let kind = head.u32()?;
    let kind = FileKind::from_u32(kind).ok_or(FormatError::WrongKind { found: kind, expected: 0 })?;
    Ok((kind, head.u64()?))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::demo;
    use crate::roadmap::build_roadmap;

    fn sample() -> Roadmap {
        let m = demo::tiny_description().into_model().unwrap();
        let grid = VoxelGrid::new([-0.6, -0.6, 0.0], 0.1, [12, 12, 10]).unwrap();
        let torso = Arc::new(JointGrid::uniform(&[[-PI / 6.0, PI / 6.0]], &[PI / 6.0]).unwrap());
        let arm = JointGrid::uniform(&[[-PI / 3.0, PI / 3.0]], &[PI / 6.0]).unwrap();
        build_roadmap(&m, ChainId::Arm1, torso, arm, &grid, RoadmapParams::for_grid(&grid, 2), None).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let r = sample();
        let bytes = roadmap_to_bytes(&r);
        assert_eq!(&bytes[..8], b"DUALDRM\0");
        let back = roadmap_from_bytes(&bytes).unwrap();
        assert_eq!(back, r);
        assert_eq!(roadmap_to_bytes(&back), bytes);
        assert_eq!(peek_header(&bytes).unwrap(), (FileKind::Roadmap, roadmap_compat_hash(&r)));
    }

    fn format_err(bytes: &[u8]) -> FormatError {
        match roadmap_from_bytes(bytes) {
            Err(Error::Format(e)) => e,
            other => panic!("expected a format error, got {other:?}"),
        }
    }

    #[test]
    fn version_two_rejected() {
        let mut bytes = roadmap_to_bytes(&sample());
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert_eq!(format_err(&bytes), FormatError::VersionMismatch { found: 2, expected: 1 });
    }

    #[test]
    fn flipped_byte_detected() {
        let bytes = roadmap_to_bytes(&sample());
        for pos in [HEADER_LEN, bytes.len() / 2, bytes.len() - 1, 20] {
            let mut b = bytes.clone();
            b[pos] ^= 0x10;
            assert!(matches!(format_err(&b), FormatError::ChecksumMismatch { .. }), "byte {pos}");
        }
    }

    #[test]
    fn truncation_and_magic() {
        let bytes = roadmap_to_bytes(&sample());
        assert!(matches!(format_err(&bytes[..bytes.len() - 3]), FormatError::Truncated { .. }));
        assert!(matches!(format_err(&bytes[..4]), FormatError::Truncated { .. }));
        let mut b = bytes.clone();
        b[0] = b'X';
        assert_eq!(format_err(&b), FormatError::BadMagic);
        let mut b = bytes;
        b.push(0);
        assert_eq!(format_err(&b), FormatError::TrailingBytes(1));
    }

    #[test]
    fn wrong_kind_after_valid_checksum() {
        let r = sample();
        let mut w = Writer::default();
        w.joint_grid(&r.torso_grid);
        write_roadmap_block(&mut w, &r);
        let bytes = w.finish(FileKind::Dual, 0);
        assert_eq!(format_err(&bytes), FormatError::WrongKind { found: 2, expected: 1 });
    }

    #[test]
    fn compatibility_fields() {
        let grid = VoxelGrid::new([-1.02, -1.02, 0.0], 0.06, [35, 35, 32]).unwrap();
        let meta = CompatMeta {
            grid,
            padding: Some(0.03),
            weights: Some(vec![1.0; 5]),
        };
        assert_eq!(hash_compatibility(&meta, &meta), Compatibility::Compatible);
        let mut other = meta.clone();
        other.grid.voxel_size = 0.05;
        assert!(matches!(
            hash_compatibility(&meta, &other),
            Compatibility::Mismatch { field: "voxel_size", .. }
        ));
        let mut other = meta.clone();
        other.padding = Some(0.0);
        assert!(matches!(
            hash_compatibility(&meta, &other),
            Compatibility::Mismatch { field: "padding", .. }
        ));
        other.padding = None;
        assert_eq!(hash_compatibility(&meta, &other), Compatibility::Compatible);
        let mut other = meta.clone();
        other.weights = Some(vec![1.0, 1.0, 1.0, 1.0, 2.0]);
        assert!(matches!(
            hash_compatibility(&meta, &other),
            Compatibility::Mismatch { field: "weights", .. }
        ));
        let mut other = meta.clone();
        other.grid.dims = [35, 35, 31];
        assert!(matches!(
            hash_compatibility(&meta, &other),
            Compatibility::Mismatch { field: "grid", .. }
        ));
        assert_ne!(
            compatibility_hash(&grid, 0.03, &[1.0; 5]),
            compatibility_hash(&grid, 0.03, &[1.0; 4])
        );
    }
}
