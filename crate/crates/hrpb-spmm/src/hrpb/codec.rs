//! Byte layout of serialized blocks and the HRPB file format.
//!
//! Block layout (little-endian, counts derivable from `col_ptr`):
//! `active_cols: u32[tk]`, `col_ptr: u32[tk/4 + 1]`, `rows: u32[bricks]`,
//! `patterns: u64[bricks]`, `nnz_array: f32[sum popcount]`, zero-padded to
//! an 8-byte extent so offsets in `size_ptr` stay aligned.
//!
//! File layout: magic `HRPB1\0\0\0`, then a body of
//! `u32 version, u32 M, u32 K, u32 tm, u32 tk, u64 num_blocks,
//! u64 packed_len`, `blocked_row_ptr: u64[panels + 1]`, per-panel
//! active-column counts `u32[panels]`, `size_ptr: u64[num_blocks + 1]`, the
//! packed blocks, and a trailing CRC-32 of the whole body.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Block, Hrpb, HrpbConfig, HrpbError};

pub const HRPB_MAGIC: [u8; 8] = *b"HRPB1\0\0\0";
const HRPB_VERSION: u32 = 1;

pub(super) fn encode_block(block: &Block, config: HrpbConfig) -> Vec<u8> {
    let bricks = block.patterns.len();
    let raw =
        (config.tk + config.brick_cols() + 1 + bricks) * 4 + bricks * 8 + block.nnz_array.len() * 4;
    let mut buf = Vec::with_capacity(raw.next_multiple_of(8));
    for &c in &block.active_cols {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    for &p in &block.col_ptr {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    for &r in &block.rows {
        buf.extend_from_slice(&r.to_le_bytes());
    }
    for &p in &block.patterns {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    for &v in &block.nnz_array {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.resize(buf.len().next_multiple_of(8), 0);
    buf
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], HrpbError> {
        if self.pos + n > self.buf.len() {
            return Err(HrpbError::Truncated);
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, HrpbError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, HrpbError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, HrpbError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn integrity(msg: impl Into<String>) -> HrpbError {
    HrpbError::Integrity(msg.into())
}

pub(super) fn decode_block(
    bytes: &[u8],
    config: HrpbConfig,
    num_cols: usize,
) -> Result<Block, HrpbError> {
    let mut cur = Cursor::new(bytes);
    let fail = |msg: &str| integrity(format!("block: {msg}"));

    let mut active_cols = Vec::with_capacity(config.tk);
    for _ in 0..config.tk {
        active_cols.push(cur.u32().map_err(|_| fail("truncated metadata"))?);
    }
    let sentinel = num_cols as u32;
    let mut in_padding = false;
    for pair in active_cols.windows(2) {
        if pair[0] == sentinel {
            in_padding = true;
        }
        if pair[0] > sentinel
            || (in_padding && pair[1] != sentinel)
            || (!in_padding && pair[1] != sentinel && pair[1] <= pair[0])
        {
            return Err(fail("active column ids not compacted ascending"));
        }
    }
    if let Some(&last) = active_cols.last() {
        if last > sentinel {
            return Err(fail("active column id out of range"));
        }
    }

    let brick_cols = config.brick_cols();
    let mut col_ptr = Vec::with_capacity(brick_cols + 1);
    for _ in 0..=brick_cols {
        col_ptr.push(cur.u32().map_err(|_| fail("truncated metadata"))?);
    }
    if col_ptr[0] != 0 || col_ptr.windows(2).any(|w| w[0] > w[1]) {
        return Err(fail("col_ptr not a nondecreasing offset array"));
    }
    let bricks = col_ptr[brick_cols] as usize;
    if bricks == 0 {
        return Err(fail("block with no active bricks"));
    }
    if bricks > config.brick_cols() * config.brick_rows() {
        return Err(fail("brick count exceeds block capacity"));
    }

    let mut rows = Vec::with_capacity(bricks);
    for _ in 0..bricks {
        rows.push(cur.u32().map_err(|_| fail("truncated metadata"))?);
    }
    let mut patterns = Vec::with_capacity(bricks);
    for _ in 0..bricks {
        patterns.push(cur.u64().map_err(|_| fail("truncated metadata"))?);
    }
    for bcol in 0..brick_cols {
        let seg = &rows[col_ptr[bcol] as usize..col_ptr[bcol + 1] as usize];
        if seg.iter().any(|&r| r as usize >= config.brick_rows()) {
            return Err(fail("brick row index out of range"));
        }
        if seg.windows(2).any(|w| w[0] >= w[1]) {
            return Err(fail("brick rows not strictly increasing in a column"));
        }
    }
    if patterns.contains(&0) {
        return Err(fail("active brick with empty pattern"));
    }

    let nnz: usize = patterns.iter().map(|p| p.count_ones() as usize).sum();
    let mut nnz_array = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        nnz_array.push(
            cur.f32()
                .map_err(|_| fail("value array shorter than pattern popcount"))?,
        );
    }
    if cur.remaining() >= 8 || cur.pos.next_multiple_of(8) != bytes.len() {
        return Err(fail("size does not match metadata"));
    }

    Ok(Block {
        active_cols,
        col_ptr,
        rows,
        patterns,
        nnz_array,
    })
}

/// Serializes `h` to the HRPB binary format.
pub fn write_hrpb<W: Write>(w: &mut W, h: &Hrpb) -> Result<(), HrpbError> {
    let mut body = Vec::new();
    body.extend_from_slice(&HRPB_VERSION.to_le_bytes());
    body.extend_from_slice(&(h.num_rows as u32).to_le_bytes());
    body.extend_from_slice(&(h.num_cols as u32).to_le_bytes());
    body.extend_from_slice(&(h.config.tm as u32).to_le_bytes());
    body.extend_from_slice(&(h.config.tk as u32).to_le_bytes());
    body.extend_from_slice(&(h.num_blocks() as u64).to_le_bytes());
    body.extend_from_slice(&(h.packed_blocks.len() as u64).to_le_bytes());
    for &p in &h.blocked_row_ptr {
        body.extend_from_slice(&p.to_le_bytes());
    }
    let sentinel = h.sentinel();
    for p in 0..h.num_panels() {
        let blocks = h.panel_blocks(p);
        let count = h.active_cols[blocks.start * h.config.tk..blocks.end * h.config.tk]
            .iter()
            .filter(|&&c| c != sentinel)
            .count();
        body.extend_from_slice(&(count as u32).to_le_bytes());
    }
    for &p in &h.size_ptr {
        body.extend_from_slice(&p.to_le_bytes());
    }
    body.extend_from_slice(&h.packed_blocks);

    w.write_all(&HRPB_MAGIC)?;
    w.write_all(&body)?;
    w.write_all(&crc32fast::hash(&body).to_le_bytes())?;
    Ok(())
}

/// Reads and fully validates an HRPB stream.
pub fn read_hrpb<R: Read>(r: &mut R) -> Result<Hrpb, HrpbError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() < HRPB_MAGIC.len() {
        return Err(HrpbError::Truncated);
    }
    if data[..HRPB_MAGIC.len()] != HRPB_MAGIC {
        return Err(HrpbError::BadMagic);
    }
    if data.len() < HRPB_MAGIC.len() + 4 {
        return Err(HrpbError::Truncated);
    }
    let body = &data[HRPB_MAGIC.len()..data.len() - 4];

    let mut cur = Cursor::new(body);
    let version = cur.u32()?;
    if version != HRPB_VERSION {
        return Err(HrpbError::Version(version));
    }
    let num_rows = cur.u32()? as usize;
    let num_cols = cur.u32()? as usize;
    let tm = cur.u32()? as usize;
    let tk = cur.u32()? as usize;
    let config = HrpbConfig::new(tm, tk).map_err(|e| integrity(e.to_string()))?;
    let num_blocks = cur.u64()? as usize;
    let packed_len = cur.u64()? as usize;

    let num_panels = num_rows.div_ceil(config.tm);
    // Length budget up front, in wide arithmetic: a hostile num_blocks or
    // packed_len must not drive allocations past the actual stream size.
    let needed = (num_panels as u128 + 1) * 8
        + num_panels as u128 * 4
        + (num_blocks as u128 + 1) * 8
        + packed_len as u128;
    if (cur.remaining() as u128) < needed {
        return Err(HrpbError::Truncated);
    }
    let mut blocked_row_ptr = Vec::with_capacity(num_panels + 1);
    for _ in 0..=num_panels {
        blocked_row_ptr.push(cur.u64()?);
    }
    let mut panel_counts = Vec::with_capacity(num_panels);
    for _ in 0..num_panels {
        panel_counts.push(cur.u32()? as usize);
    }
    let mut size_ptr = Vec::with_capacity(num_blocks + 1);
    for _ in 0..=num_blocks {
        size_ptr.push(cur.u64()?);
    }
    let packed_blocks = cur.take(packed_len)?.to_vec();
    if cur.remaining() != 0 {
        return Err(integrity("trailing bytes after packed blocks"));
    }

    let stored = u32::from_le_bytes(data[data.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(HrpbError::Checksum { stored, computed });
    }

    if blocked_row_ptr[0] != 0
        || blocked_row_ptr.windows(2).any(|w| w[0] > w[1])
        || blocked_row_ptr[num_panels] != num_blocks as u64
    {
        return Err(integrity("blocked_row_ptr inconsistent with block count"));
    }
    if size_ptr[0] != 0
        || size_ptr.windows(2).any(|w| w[0] >= w[1])
        || size_ptr[num_blocks] != packed_len as u64
    {
        return Err(integrity("size_ptr inconsistent with packed length"));
    }

    let mut h = Hrpb {
        num_rows,
        num_cols,
        config,
        blocked_row_ptr,
        active_cols: Vec::with_capacity(num_blocks * config.tk),
        size_ptr,
        packed_blocks,
    };
    // Decode every block once: validates the packed buffer and rebuilds the
    // concatenated active-column table.
    for b in 0..num_blocks {
        let block = h.block(b)?;
        h.active_cols.extend_from_slice(&block.active_cols);
    }
    let sentinel = h.sentinel();
    for (p, &count) in panel_counts.iter().enumerate() {
        let blocks = h.panel_blocks(p);
        let real = h.active_cols[blocks.start * config.tk..blocks.end * config.tk]
            .iter()
            .filter(|&&c| c != sentinel)
            .count();
        if real != count {
            return Err(integrity(format!(
                "panel {p}: active-column count {count} does not match blocks ({real})"
            )));
        }
        let expected_blocks = count.div_ceil(config.tk) as u64;
        if blocks.len() as u64 != expected_blocks {
            return Err(integrity(format!("panel {p}: block count mismatch")));
        }
    }
    Ok(h)
}

/// Writes `h` to a file.
pub fn save_hrpb(path: impl AsRef<Path>, h: &Hrpb) -> Result<(), HrpbError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_hrpb(&mut w, h)?;
    w.flush()?;
    Ok(())
}

/// Loads an HRPB file.
pub fn load_hrpb(path: impl AsRef<Path>) -> Result<Hrpb, HrpbError> {
    read_hrpb(&mut BufReader::new(File::open(path)?))
}
