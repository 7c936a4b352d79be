//! Packed, copy-ready scene file.
//!
//! ```text
//! header   magic "GSVMSCN1" | version u32 | section count u32 (= 4)
//!          4 x { kind u32 | reserved u32 | offset u64 | length u64 }
//! META     page_size u32 | lod_levels u32 | record_count u64
//!          bounds center 3 x f32 | bounds half-extent f32
//!          page count per level, lod_levels x u32
//! MESH     vertex count u32 | face count u32 | vertices 3 x f32
//!          faces 3 x u32 | face page IDs u32
//! LINKS    page count u32 | CSR offsets (pages + 1) x u32 | targets u32
//! GAUSSIANS  flat array of 59 x f32 records, 64-byte aligned;
//!          level 0 pages 1..N, then level 1 pages 1..N, ...
//! ```
//!
//! All integers and floats are little-endian. A level-`k` page holds
//! `page_size >> k` records, so any page's byte range follows from the
//! metadata alone (see [`SceneLayout`]). A `page_size` of 0 marks an
//! unpaged scene whose Gaussian section is a plain list of records.

use std::fs;
use std::ops::Range;
use std::path::Path;

use thiserror::Error;

use crate::gaussian::{Gaussian, RECORD_BYTES, RECORD_SCALARS};
use crate::proxy_mesh::ProxyMesh;

pub const MAGIC: &[u8; 8] = b"GSVMSCN1";
pub const VERSION: u32 = 1;
pub const MAX_LOD_LEVELS: u32 = 16;

const SECTION_META: u32 = 1;
const SECTION_MESH: u32 = 2;
const SECTION_LINKS: u32 = 3;
const SECTION_GAUSSIANS: u32 = 4;
const SECTION_KINDS: [u32; 4] = [SECTION_META, SECTION_MESH, SECTION_LINKS, SECTION_GAUSSIANS];
const HEADER_BYTES: usize = 16 + 24 * SECTION_KINDS.len();

#[derive(Debug, Error)]
pub enum SceneFormatError {
    #[error("not a scene file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("section {section} truncated or out of bounds")]
    Truncated { section: &'static str },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invariant(msg: impl Into<String>) -> SceneFormatError {
    SceneFormatError::Invariant(msg.into())
}

/// Axis-aligned cube enclosing the scene.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bounds {
    pub center: [f32; 3],
    pub half_extent: f32,
}

impl Bounds {
    pub fn of_gaussians(gaussians: &[Gaussian]) -> Bounds {
        if gaussians.is_empty() {
            return Bounds::default();
        }
        let mut lo = [f32::INFINITY; 3];
        let mut hi = [f32::NEG_INFINITY; 3];
        for g in gaussians {
            for i in 0..3 {
                lo[i] = lo[i].min(g.position[i]);
                hi[i] = hi[i].max(g.position[i]);
            }
        }
        let center = [0, 1, 2].map(|i| 0.5 * (lo[i] + hi[i]));
        let half_extent = (0..3).map(|i| 0.5 * (hi[i] - lo[i])).fold(0.0f32, f32::max);
        Bounds { center, half_extent }
    }
}

/// Page geometry of the Gaussian section, derived from metadata only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SceneLayout {
    pub page_size: u32,
    pub lod_levels: u32,
    pub page_count: u32,
}

impl SceneLayout {
    pub fn records_per_page(&self, level: u32) -> usize {
        (self.page_size >> level) as usize
    }

    pub fn level_records(&self, level: u32) -> usize {
        self.page_count as usize * self.records_per_page(level)
    }

    pub fn total_records(&self) -> usize {
        (0..self.lod_levels).map(|k| self.level_records(k)).sum()
    }

    /// Record range of page `page` (1-based) at `level`, relative to the
    /// start of the Gaussian section.
    pub fn page_records(&self, level: u32, page: u32) -> Range<usize> {
        debug_assert!(page >= 1 && page <= self.page_count && level < self.lod_levels);
        let base: usize = (0..level).map(|k| self.level_records(k)).sum();
        let n = self.records_per_page(level);
        let start = base + (page as usize - 1) * n;
        start..start + n
    }

    pub fn page_bytes(&self, level: u32, page: u32) -> Range<usize> {
        let r = self.page_records(level, page);
        r.start * RECORD_BYTES..r.end * RECORD_BYTES
    }
}

/// In-memory image of a scene file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SceneFile {
    /// Records per level-0 page; 0 for an unpaged scene.
    pub page_size: u32,
    pub lod_levels: u32,
    /// Pages per level (identical across levels for a paged scene).
    pub page_counts: Vec<u32>,
    pub bounds: Bounds,
    pub mesh: ProxyMesh,
    /// Outgoing links of page `i + 1`.
    pub links: Vec<Vec<u32>>,
    pub gaussians: Vec<Gaussian>,
}

impl SceneFile {
    /// A scene that has not been paged yet.
    pub fn unpaged(gaussians: Vec<Gaussian>) -> SceneFile {
        SceneFile {
            page_size: 0,
            lod_levels: 1,
            page_counts: vec![0],
            bounds: Bounds::of_gaussians(&gaussians),
            mesh: ProxyMesh::default(),
            links: Vec::new(),
            gaussians,
        }
    }

    pub fn is_paged(&self) -> bool {
        self.page_size > 0
    }

    pub fn page_count(&self) -> u32 {
        self.page_counts.first().copied().unwrap_or(0)
    }

    pub fn layout(&self) -> SceneLayout {
        SceneLayout { page_size: self.page_size, lod_levels: self.lod_levels, page_count: self.page_count() }
    }

    /// Records of one page at one level.
    pub fn page(&self, level: u32, page: u32) -> &[Gaussian] {
        &self.gaussians[self.layout().page_records(level, page)]
    }

    pub fn links_of(&self, page: u32) -> &[u32] {
        self.links.get(page as usize - 1).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn link_count(&self) -> usize {
        self.links.iter().map(Vec::len).sum()
    }

    /// Checks every structural invariant the reader relies on.
    pub fn validate(&self) -> Result<(), SceneFormatError> {
        self.validate_structure()?;
        let expected = if self.is_paged() { self.layout().total_records() } else { self.gaussians.len() };
        if self.gaussians.len() != expected {
            return Err(invariant(format!(
                "{} records stored, layout requires {expected}",
                self.gaussians.len()
            )));
        }
        Ok(())
    }

    /// Everything except the Gaussian payload size.
    fn validate_structure(&self) -> Result<(), SceneFormatError> {
        if self.lod_levels == 0 || self.lod_levels > MAX_LOD_LEVELS {
            return Err(invariant(format!("lod_levels {} out of range", self.lod_levels)));
        }
        if self.page_counts.len() != self.lod_levels as usize {
            return Err(invariant("one page count per level required"));
        }
        let n = self.page_count();
        if self.page_counts.iter().any(|&c| c != n) {
            return Err(invariant("page counts differ between levels"));
        }
        if self.page_size == 0 {
            if n != 0 || self.lod_levels != 1 {
                return Err(invariant("unpaged scene must have one level and no pages"));
            }
        } else {
            let divisor = 1u32 << (self.lod_levels - 1);
            if self.page_size % divisor != 0 {
                return Err(invariant(format!(
                    "page size {} not divisible by {divisor}",
                    self.page_size
                )));
            }
        }
        self.mesh.validate().map_err(invariant)?;
        if let Some(f) = self.mesh.face_page.iter().position(|&p| p > n) {
            return Err(invariant(format!("face {f} references page {} of {n}", self.mesh.face_page[f])));
        }
        if self.links.len() != n as usize {
            return Err(invariant(format!("{} link lists for {n} pages", self.links.len())));
        }
        for (i, targets) in self.links.iter().enumerate() {
            let page = i as u32 + 1;
            for &t in targets {
                if t == 0 || t > n {
                    return Err(invariant(format!("page {page} links to invalid page {t}")));
                }
                if t == page {
                    return Err(invariant(format!("page {page} links to itself")));
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, SceneFormatError> {
        self.validate()?;
        let mut meta = Vec::new();
        put_u32(&mut meta, self.page_size);
        put_u32(&mut meta, self.lod_levels);
        put_u64(&mut meta, self.gaussians.len() as u64);
        for c in self.bounds.center {
            put_f32(&mut meta, c);
        }
        put_f32(&mut meta, self.bounds.half_extent);
        for &c in &self.page_counts {
            put_u32(&mut meta, c);
        }

        let mut mesh = Vec::new();
        put_u32(&mut mesh, self.mesh.vertices.len() as u32);
        put_u32(&mut mesh, self.mesh.faces.len() as u32);
        for v in &self.mesh.vertices {
            v.iter().for_each(|&x| put_f32(&mut mesh, x));
        }
        for f in &self.mesh.faces {
            f.iter().for_each(|&x| put_u32(&mut mesh, x));
        }
        for &p in &self.mesh.face_page {
            put_u32(&mut mesh, p);
        }

        let mut links = Vec::new();
        put_u32(&mut links, self.links.len() as u32);
        let mut offset = 0u32;
        put_u32(&mut links, 0);
        for l in &self.links {
            offset += l.len() as u32;
            put_u32(&mut links, offset);
        }
        for l in &self.links {
            l.iter().for_each(|&t| put_u32(&mut links, t));
        }

        let mut gaussians = Vec::with_capacity(self.gaussians.len() * RECORD_BYTES);
        for g in &self.gaussians {
            g.as_scalars().iter().for_each(|&x| put_f32(&mut gaussians, x));
        }

        let bodies = [meta, mesh, links, gaussians];
        let mut out = Vec::with_capacity(HEADER_BYTES + bodies.iter().map(Vec::len).sum::<usize>() + 256);
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, SECTION_KINDS.len() as u32);
        let mut table = Vec::new();
        let mut cursor = HEADER_BYTES;
        for (kind, body) in SECTION_KINDS.iter().zip(&bodies) {
            let align = if *kind == SECTION_GAUSSIANS { 64 } else { 16 };
            cursor = cursor.next_multiple_of(align);
            table.push((*kind, cursor, body.len()));
            cursor += body.len();
        }
        for &(kind, off, len) in &table {
            put_u32(&mut out, kind);
            put_u32(&mut out, 0);
            put_u64(&mut out, off as u64);
            put_u64(&mut out, len as u64);
        }
        for ((_, off, _), body) in table.iter().zip(&bodies) {
            out.resize(*off, 0);
            out.extend_from_slice(body);
        }
        Ok(out)
    }

    pub fn from_bytes(data: &[u8]) -> Result<SceneFile, SceneFormatError> {
        let sections = parse_sections(data)?;
        let meta = parse_meta(&data[sections[0].clone()])?;
        let mesh = parse_mesh(&data[sections[1].clone()])?;
        let links = parse_links(&data[sections[2].clone()])?;
        let gaussian_bytes = &data[sections[3].clone()];
        if gaussian_bytes.len() as u64 != meta.record_count.saturating_mul(RECORD_BYTES as u64) {
            return Err(SceneFormatError::Truncated { section: "gaussians" });
        }
        let gaussians = gaussian_bytes
            .chunks_exact(RECORD_BYTES)
            .map(|chunk| {
                let mut scalars = [0f32; RECORD_SCALARS];
                for (s, b) in scalars.iter_mut().zip(chunk.chunks_exact(4)) {
                    *s = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                }
                bytemuck::cast(scalars)
            })
            .collect();
        let scene = SceneFile {
            page_size: meta.page_size,
            lod_levels: meta.lod_levels,
            page_counts: meta.page_counts,
            bounds: meta.bounds,
            mesh,
            links,
            gaussians,
        };
        scene.validate()?;
        Ok(scene)
    }
}

pub fn write_scene(scene: &SceneFile, path: impl AsRef<Path>) -> Result<(), SceneFormatError> {
    fs::write(path, scene.to_bytes()?)?;
    Ok(())
}

pub fn read_scene(path: impl AsRef<Path>) -> Result<SceneFile, SceneFormatError> {
    SceneFile::from_bytes(&fs::read(path)?)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32(out: &mut Vec<u8>, v: f32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Bounds-checked little-endian cursor.
struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8], section: &'static str) -> Self {
        Reader { data, pos: 0, section }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], SceneFormatError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or(SceneFormatError::Truncated { section: self.section })?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, SceneFormatError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, SceneFormatError> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32, SceneFormatError> {
        Ok(f32::from_bits(self.u32()?))
    }

    /// Ensures `count` items of `size` bytes remain before allocating.
    fn expect(&self, count: u64, size: u64) -> Result<usize, SceneFormatError> {
        let bytes = count.checked_mul(size).ok_or(SceneFormatError::Truncated { section: self.section })?;
        if bytes > (self.data.len() - self.pos) as u64 {
            return Err(SceneFormatError::Truncated { section: self.section });
        }
        Ok(count as usize)
    }

    fn finish(&self) -> Result<(), SceneFormatError> {
        if self.pos != self.data.len() {
            return Err(invariant(format!("{} trailing bytes in {} section", self.data.len() - self.pos, self.section)));
        }
        Ok(())
    }
}

fn parse_sections(data: &[u8]) -> Result<[Range<usize>; 4], SceneFormatError> {
    if data.len() < 8 || &data[..8] != MAGIC {
        return Err(SceneFormatError::BadMagic);
    }
    let mut r = Reader::new(data, "header");
    r.take(8)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(SceneFormatError::Version(version));
    }
    let count = r.u32()?;
    if count as usize != SECTION_KINDS.len() {
        return Err(invariant(format!("expected {} sections, found {count}", SECTION_KINDS.len())));
    }
    let names = ["meta", "mesh", "links", "gaussians"];
    let mut out: [Range<usize>; 4] = Default::default();
    let mut prev_end = HEADER_BYTES as u64;
    for (i, &kind) in SECTION_KINDS.iter().enumerate() {
        let k = r.u32()?;
        let _reserved = r.u32()?;
        let off = r.u64()?;
        let len = r.u64()?;
        if k != kind {
            return Err(invariant(format!("section {i} has kind {k}, expected {kind}")));
        }
        let end = off.checked_add(len).ok_or(SceneFormatError::Truncated { section: names[i] })?;
        if off < prev_end || end > data.len() as u64 {
            return Err(SceneFormatError::Truncated { section: names[i] });
        }
        prev_end = end;
        out[i] = off as usize..end as usize;
    }
    Ok(out)
}

struct Meta {
    page_size: u32,
    lod_levels: u32,
    record_count: u64,
    bounds: Bounds,
    page_counts: Vec<u32>,
}

fn parse_meta(data: &[u8]) -> Result<Meta, SceneFormatError> {
    let mut r = Reader::new(data, "meta");
    let page_size = r.u32()?;
    let lod_levels = r.u32()?;
    if lod_levels == 0 || lod_levels > MAX_LOD_LEVELS {
        return Err(invariant(format!("lod_levels {lod_levels} out of range")));
    }
    let record_count = r.u64()?;
    let center = [r.f32()?, r.f32()?, r.f32()?];
    let half_extent = r.f32()?;
    let page_counts = (0..lod_levels).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok(Meta { page_size, lod_levels, record_count, bounds: Bounds { center, half_extent }, page_counts })
}

fn parse_mesh(data: &[u8]) -> Result<ProxyMesh, SceneFormatError> {
    let mut r = Reader::new(data, "mesh");
    let nv = r.u32()? as u64;
    let nf = r.u32()? as u64;
    let nv = r.expect(nv, 12)?;
    let vertices = (0..nv)
        .map(|_| Ok([r.f32()?, r.f32()?, r.f32()?]))
        .collect::<Result<Vec<_>, SceneFormatError>>()?;
    let nf = r.expect(nf, 16)?;
    let faces = (0..nf)
        .map(|_| Ok([r.u32()?, r.u32()?, r.u32()?]))
        .collect::<Result<Vec<_>, SceneFormatError>>()?;
    let face_page = (0..nf).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok(ProxyMesh { vertices, faces, face_page })
}

fn parse_links(data: &[u8]) -> Result<Vec<Vec<u32>>, SceneFormatError> {
    let mut r = Reader::new(data, "links");
    let pages = r.u32()? as u64;
    let offset_count = r.expect(pages + 1, 4)?;
    let offsets = (0..offset_count).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    if offsets[0] != 0 || offsets.windows(2).any(|w| w[1] < w[0]) {
        return Err(invariant("link offsets are not monotone"));
    }
    let total = r.expect(*offsets.last().expect("non-empty") as u64, 4)?;
    let targets = (0..total).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok(offsets.windows(2).map(|w| targets[w[0] as usize..w[1] as usize].to_vec()).collect())
}

/// Read-only view of a scene whose Gaussian section stays memory-mapped;
/// pages are faulted in by the OS when copied.
pub struct MappedScene {
    map: memmap2::Mmap,
    gaussians: Range<usize>,
    pub layout: SceneLayout,
    pub bounds: Bounds,
    pub mesh: ProxyMesh,
    pub links: Vec<Vec<u32>>,
}

impl MappedScene {
    pub fn open(path: impl AsRef<Path>) -> Result<MappedScene, SceneFormatError> {
        let file = fs::File::open(path)?;
        // SAFETY: the file is opened read-only and treated as immutable input;
        // concurrent truncation by another process is outside our contract.
        let map = unsafe { memmap2::Mmap::map(&file)? };
        let sections = parse_sections(&map)?;
        let meta = parse_meta(&map[sections[0].clone()])?;
        let mesh = parse_mesh(&map[sections[1].clone()])?;
        let links = parse_links(&map[sections[2].clone()])?;
        let header = SceneFile {
            page_size: meta.page_size,
            lod_levels: meta.lod_levels,
            page_counts: meta.page_counts,
            bounds: meta.bounds,
            mesh,
            links,
            gaussians: Vec::new(),
        };
        if !header.is_paged() {
            return Err(invariant("scene is not paged"));
        }
        let layout = header.layout();
        if sections[3].len() != layout.total_records() * RECORD_BYTES
            || meta.record_count != layout.total_records() as u64
        {
            return Err(SceneFormatError::Truncated { section: "gaussians" });
        }
        header.validate_structure()?;
        Ok(MappedScene {
            map,
            gaussians: sections[3].clone(),
            layout,
            bounds: header.bounds,
            mesh: header.mesh,
            links: header.links,
        })
    }

    pub fn page_count(&self) -> u32 {
        self.layout.page_count
    }

    /// Raw little-endian bytes of one page.
    pub fn page_bytes(&self, level: u32, page: u32) -> &[u8] {
        let r = self.layout.page_bytes(level, page);
        &self.map[self.gaussians.start + r.start..self.gaussians.start + r.end]
    }

    pub fn links_of(&self, page: u32) -> &[u32] {
        self.links.get(page as usize - 1).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All records of one level, copied out of the mapping in page order.
    pub fn level_gaussians(&self, level: u32) -> Vec<Gaussian> {
        if self.layout.page_count == 0 {
            return Vec::new();
        }
        let first = self.layout.page_bytes(level, 1).start;
        let last = self.layout.page_bytes(level, self.layout.page_count).end;
        let bytes = &self.map[self.gaussians.start + first..self.gaussians.start + last];
        let mut out = vec![Gaussian::PADDING; bytes.len() / RECORD_BYTES];
        bytemuck::cast_slice_mut::<Gaussian, u8>(&mut out).copy_from_slice(bytes);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_page_scene() -> SceneFile {
        let page_size = 4;
        let levels = 2;
        let mut gaussians = Vec::new();
        for level in 0..levels {
            for page in 0..2 {
                for i in 0..(page_size >> level) {
                    let v = (level * 100 + page * 10 + i) as f32;
                    gaussians.push(Gaussian::new([v, -v, 0.5 * v], [0.1, 0.2, 0.3], 0.25, [v, 0.0, 1.0]));
                }
            }
        }
        let mut mesh = ProxyMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
            vec![[0, 1, 2], [1, 3, 2]],
        );
        mesh.face_page = vec![1, 2];
        SceneFile {
            page_size: page_size as u32,
            lod_levels: levels as u32,
            page_counts: vec![2, 2],
            bounds: Bounds { center: [0.5, 0.5, 0.0], half_extent: 0.5 },
            mesh,
            links: vec![vec![2], vec![]],
            gaussians,
        }
    }

    #[test]
    fn empty_scene_roundtrips() {
        let s = SceneFile::unpaged(Vec::new());
        let bytes = s.to_bytes().unwrap();
        assert_eq!(SceneFile::from_bytes(&bytes).unwrap(), s);
    }

    #[test]
    fn two_page_scene_roundtrips_bit_exactly() {
        let s = two_page_scene();
        let bytes = s.to_bytes().unwrap();
        let back = SceneFile::from_bytes(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn page_offsets_match_section_positions() {
        let s = two_page_scene();
        let bytes = s.to_bytes().unwrap();
        let sections = parse_sections(&bytes).unwrap();
        let layout = s.layout();
        for level in 0..2 {
            for page in 1..=2 {
                let r = layout.page_bytes(level, page);
                let chunk = &bytes[sections[3].start + r.start..sections[3].start + r.end];
                let first = f32::from_le_bytes(chunk[..4].try_into().unwrap());
                assert_eq!(first, s.page(level, page)[0].position[0]);
                assert_eq!(chunk.len(), (4 >> level) * RECORD_BYTES);
            }
        }
        assert_eq!(sections[3].start % 64, 0);
    }

    #[test]
    fn level_one_page_holds_half_the_records() {
        let layout = SceneLayout { page_size: 2048, lod_levels: 4, page_count: 3 };
        assert_eq!(layout.records_per_page(1), 1024);
        assert_eq!(layout.page_records(1, 1), 6144..7168);
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = two_page_scene().to_bytes().unwrap();
        assert!(matches!(SceneFile::from_bytes(&bytes[..4]), Err(SceneFormatError::BadMagic)));
        bytes[8] = 9;
        assert!(matches!(SceneFile::from_bytes(&bytes), Err(SceneFormatError::Version(9))));
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = two_page_scene().to_bytes().unwrap();
        for cut in [20, HEADER_BYTES + 3, bytes.len() - 1] {
            assert!(SceneFile::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn invalid_link_target_is_rejected_on_write_and_read() {
        let mut s = two_page_scene();
        s.links[0] = vec![1];
        assert!(matches!(s.to_bytes(), Err(SceneFormatError::Invariant(_))));
        let good = two_page_scene().to_bytes().unwrap();
        let mut bytes = good.clone();
        let links = parse_sections(&good).unwrap()[2].clone();
        // First target sits after the page count and three CSR offsets.
        bytes[links.start + 16..links.start + 20].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(SceneFile::from_bytes(&bytes), Err(SceneFormatError::Invariant(_))));
    }

    #[test]
    fn face_page_out_of_range_is_rejected() {
        let mut s = two_page_scene();
        s.mesh.face_page[1] = 3;
        assert!(s.validate().is_err());
    }

    #[test]
    fn mapped_scene_serves_page_bytes() {
        let s = two_page_scene();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.gsv");
        write_scene(&s, &path).unwrap();
        let m = MappedScene::open(&path).unwrap();
        assert_eq!(m.page_count(), 2);
        let bytes = m.page_bytes(1, 2);
        let expected: &[u8] = bytemuck::cast_slice(s.page(1, 2));
        assert_eq!(bytes, expected);
        assert_eq!(m.links_of(1), &[2]);
    }
}
