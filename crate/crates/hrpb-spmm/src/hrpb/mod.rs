//! The HRPB (Hierarchical Row-Panel-Blocking) sparse container.
//!
//! A matrix is cut into row panels of `tm` rows. Within a panel, the columns
//! holding at least one nonzero (the active columns) are compacted to the
//! left and grouped into blocks of `tk` compacted columns. Each block is
//! stored brick-CSC: its 16x4 bricks are walked column-major, and every
//! active brick contributes a 64-bit occupancy pattern (row-major element
//! order, LSB = element 0), its brick-row index, and its nonzero values in
//! row-major order. `col_ptr` delimits each brick column's run of active
//! bricks.
//!
//! The whole-matrix container keeps the serialized blocks back to back in
//! `packed_blocks`; `blocked_row_ptr` maps panels to block ranges and
//! `size_ptr` maps blocks to byte ranges, mirroring how the SpMM kernel
//! locates its working set.

mod codec;
mod convert;

pub use codec::{load_hrpb, read_hrpb, save_hrpb, write_hrpb, HRPB_MAGIC};
pub use convert::{compact_active_columns, csr_to_hrpb, hrpb_to_csr};

use std::ops::Range;

use thiserror::Error;

/// Rows of an A-matrix MMA fragment (brick height).
pub const BRICK_M: usize = 16;
/// Columns of an A-matrix MMA fragment (brick width).
pub const BRICK_K: usize = 4;
/// Columns of a B-matrix MMA fragment.
pub const BRICK_N: usize = 8;
/// Elements per brick; one occupancy bit each in the 64-bit pattern.
pub const BRICK_ELEMS: usize = BRICK_M * BRICK_K;
/// Adjacent 16x8 output subtiles computed by one warp.
pub const WARP_COARSENING: usize = 4;

#[derive(Debug, Error)]
pub enum HrpbError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("corrupt HRPB data: {0}")]
    Integrity(String),
    #[error("bad magic: not an HRPB stream")]
    BadMagic,
    #[error("unsupported HRPB version {0}")]
    Version(u32),
    #[error("truncated HRPB stream")]
    Truncated,
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Tiling parameters. Brick shape and warp coarsening are fixed by the MMA
/// fragment geometry; only the panel height `tm` and block width `tk` vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HrpbConfig {
    pub tm: usize,
    pub tk: usize,
}

impl Default for HrpbConfig {
    fn default() -> Self {
        Self { tm: 16, tk: 16 }
    }
}

impl HrpbConfig {
    pub fn new(tm: usize, tk: usize) -> Result<Self, HrpbError> {
        if tm == 0 || !tm.is_multiple_of(BRICK_M) {
            return Err(HrpbError::Config(format!(
                "tm must be a multiple of {BRICK_M}, got {tm}"
            )));
        }
        if tk == 0 || !tk.is_multiple_of(BRICK_K) {
            return Err(HrpbError::Config(format!(
                "tk must be a multiple of {BRICK_K}, got {tk}"
            )));
        }
        Ok(Self { tm, tk })
    }

    /// Brick rows per panel (`tm / 16`).
    pub fn brick_rows(&self) -> usize {
        self.tm / BRICK_M
    }

    /// Brick columns per block (`tk / 4`).
    pub fn brick_cols(&self) -> usize {
        self.tk / BRICK_K
    }
}

/// One compressed (tm x tk) tile. Active bricks appear in brick-CSC order:
/// `col_ptr[i]..col_ptr[i+1]` indexes the active bricks of brick column `i`,
/// `rows` holds their brick-row indices (strictly increasing per column),
/// `patterns` their occupancy bitmaps, and `nnz_array` the concatenated
/// row-major values of every active brick.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// Original column id per compacted slot; length `tk`, padded with the
    /// sentinel id `K` when the block holds fewer than `tk` active columns.
    pub active_cols: Vec<u32>,
    pub col_ptr: Vec<u32>,
    pub rows: Vec<u32>,
    pub patterns: Vec<u64>,
    pub nnz_array: Vec<f32>,
}

impl Block {
    pub fn num_active_bricks(&self) -> usize {
        self.patterns.len()
    }

    /// Active-brick indices of brick column `i`.
    pub fn brick_col(&self, i: usize) -> Range<usize> {
        self.col_ptr[i] as usize..self.col_ptr[i + 1] as usize
    }
}

/// Whole-matrix HRPB container. Blocks live serialized in `packed_blocks`
/// and are decoded on demand with [`Hrpb::block`].
#[derive(Debug, Clone, PartialEq)]
pub struct Hrpb {
    pub num_rows: usize,
    pub num_cols: usize,
    pub config: HrpbConfig,
    /// Starting block index per row panel; length `ceil(M / tm) + 1`.
    pub blocked_row_ptr: Vec<u64>,
    /// Per-block compacted-column ids, `tk` per block, sentinel-padded.
    pub active_cols: Vec<u32>,
    /// Byte offset of each block inside `packed_blocks`; blocks are padded
    /// to 8-byte extents, so offsets stay 8-aligned.
    pub size_ptr: Vec<u64>,
    pub packed_blocks: Vec<u8>,
}

impl Hrpb {
    /// Column id that marks a padded `active_cols` slot.
    pub fn sentinel(&self) -> u32 {
        self.num_cols as u32
    }

    pub fn num_panels(&self) -> usize {
        self.blocked_row_ptr.len() - 1
    }

    pub fn num_blocks(&self) -> usize {
        self.size_ptr.len() - 1
    }

    /// Block indices owned by row panel `p`.
    pub fn panel_blocks(&self, p: usize) -> Range<usize> {
        self.blocked_row_ptr[p] as usize..self.blocked_row_ptr[p + 1] as usize
    }

    /// Row range covered by panel `p`, clipped to the matrix height.
    pub fn panel_rows(&self, p: usize) -> Range<usize> {
        let start = p * self.config.tm;
        start..((p + 1) * self.config.tm).min(self.num_rows)
    }

    pub fn block_bytes(&self, block_id: usize) -> &[u8] {
        &self.packed_blocks[self.size_ptr[block_id] as usize..self.size_ptr[block_id + 1] as usize]
    }

    /// Decodes and validates block `block_id` from the packed buffer.
    pub fn block(&self, block_id: usize) -> Result<Block, HrpbError> {
        codec::decode_block(self.block_bytes(block_id), self.config, self.num_cols)
    }

    /// Total nonzeros, by summing pattern popcounts over all blocks.
    pub fn nnz(&self) -> Result<u64, HrpbError> {
        let mut total = 0u64;
        for b in 0..self.num_blocks() {
            total += self
                .block(b)?
                .patterns
                .iter()
                .map(|p| u64::from(p.count_ones()))
                .sum::<u64>();
        }
        Ok(total)
    }
}

/// Packs a 16x4 occupancy grid into the 64-bit brick pattern. Bit `i`
/// (LSB-first) corresponds to row-major element `i = local_row * 4 +
/// local_col`.
pub fn encode_brick_pattern(presence: &[[bool; BRICK_K]; BRICK_M]) -> u64 {
    let mut pattern = 0u64;
    for (local_row, row) in presence.iter().enumerate() {
        for (local_col, &set) in row.iter().enumerate() {
            if set {
                pattern |= 1u64 << (local_row * BRICK_K + local_col);
            }
        }
    }
    pattern
}

/// Number of set bits strictly below `position`: the offset of that
/// element's value within the brick's slice of the value array.
#[inline]
pub fn prefix_index(pattern: u64, position: u32) -> u32 {
    debug_assert!(position < 64);
    (pattern & ((1u64 << position) - 1)).count_ones()
}
