//! CSR -> HRPB conversion and its exact inverse.
//!
//! Conversion runs in two phases split by a prefix sum, matching the
//! parallel builder the container was designed for: phase 1 counts blocks
//! per row panel, phase 2 fills each panel independently, and the per-panel
//! outputs are joined by prefix-summed offsets. Panel outputs are
//! order-independent, so the result is identical at any parallelism level.

use std::collections::HashMap;

use rayon::prelude::*;

use super::{codec, Block, Hrpb, HrpbConfig, HrpbError, BRICK_K, BRICK_M};
use crate::sparse_io::CsrMatrix;

/// Ascending list of columns holding at least one nonzero among the panel's
/// rows, plus the inverse map from original column id to compacted position.
pub fn compact_active_columns(
    csr: &CsrMatrix,
    panel_index: usize,
    config: HrpbConfig,
) -> (Vec<usize>, HashMap<usize, usize>) {
    let active = panel_active_cols(csr, panel_index, config);
    let col_rank = active.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    (active, col_rank)
}

fn panel_active_cols(csr: &CsrMatrix, panel_index: usize, config: HrpbConfig) -> Vec<usize> {
    let start = panel_index * config.tm;
    let end = ((panel_index + 1) * config.tm).min(csr.num_rows);
    let mut cols: Vec<usize> = (start..end)
        .flat_map(|r| csr.row(r).0.iter().copied())
        .collect();
    cols.sort_unstable();
    cols.dedup();
    cols
}

struct PanelOut {
    packed: Vec<u8>,
    sizes: Vec<u64>,
    active_cols: Vec<u32>,
}

/// Builds the HRPB representation of `csr`. Row panels are processed
/// concurrently; the output is deterministic.
pub fn csr_to_hrpb(csr: &CsrMatrix, config: HrpbConfig) -> Result<Hrpb, HrpbError> {
    let config = HrpbConfig::new(config.tm, config.tk)?;
    if csr.num_rows >= u32::MAX as usize || csr.num_cols >= u32::MAX as usize {
        return Err(HrpbError::Config(
            "matrix dimensions exceed the u32 container limit".into(),
        ));
    }
    let num_panels = csr.num_rows.div_ceil(config.tm);

    // Phase 1: active columns and block counts per panel.
    let panel_active: Vec<Vec<usize>> = (0..num_panels)
        .into_par_iter()
        .map(|p| panel_active_cols(csr, p, config))
        .collect();
    let mut blocked_row_ptr = vec![0u64; num_panels + 1];
    for (p, active) in panel_active.iter().enumerate() {
        blocked_row_ptr[p + 1] = blocked_row_ptr[p] + active.len().div_ceil(config.tk) as u64;
    }
    let num_blocks = blocked_row_ptr[num_panels] as usize;

    // Phase 2: fill panels independently, then join with prefix sums.
    let outputs: Vec<PanelOut> = (0..num_panels)
        .into_par_iter()
        .map(|p| build_panel(csr, p, &panel_active[p], config))
        .collect();

    let mut size_ptr = vec![0u64; num_blocks + 1];
    let mut packed = Vec::new();
    let mut active_cols = Vec::with_capacity(num_blocks * config.tk);
    let mut bi = 0usize;
    for out in outputs {
        for size in out.sizes {
            size_ptr[bi + 1] = size_ptr[bi] + size;
            bi += 1;
        }
        packed.extend_from_slice(&out.packed);
        active_cols.extend_from_slice(&out.active_cols);
    }

    Ok(Hrpb {
        num_rows: csr.num_rows,
        num_cols: csr.num_cols,
        config,
        blocked_row_ptr,
        active_cols,
        size_ptr,
        packed_blocks: packed,
    })
}

#[derive(Default)]
struct BrickBuf {
    pattern: u64,
    values: Vec<f32>,
}

fn build_panel(csr: &CsrMatrix, p: usize, active: &[usize], config: HrpbConfig) -> PanelOut {
    let num_blocks = active.len().div_ceil(config.tk);
    let mut out = PanelOut {
        packed: Vec::new(),
        sizes: Vec::with_capacity(num_blocks),
        active_cols: Vec::with_capacity(num_blocks * config.tk),
    };
    if num_blocks == 0 {
        return out;
    }
    let brick_rows = config.brick_rows();
    let brick_cols = config.brick_cols();
    let sentinel = csr.num_cols as u32;

    // Bricks indexed [block][bcol * brick_rows + brow]. CSR iteration visits
    // rows then columns ascending, so each brick's values arrive in
    // row-major order.
    let mut bricks: Vec<Vec<Option<BrickBuf>>> = (0..num_blocks)
        .map(|_| (0..brick_rows * brick_cols).map(|_| None).collect())
        .collect();
    let panel_start = p * config.tm;
    let panel_end = ((p + 1) * config.tm).min(csr.num_rows);
    for r in panel_start..panel_end {
        let local_row = r - panel_start;
        let brow = local_row / BRICK_M;
        let bit_row = (local_row % BRICK_M) * BRICK_K;
        let (cols, vals) = csr.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            let rank = active.binary_search(&c).expect("active column");
            let block = rank / config.tk;
            let within = rank % config.tk;
            let slot = (within / BRICK_K) * brick_rows + brow;
            let brick = bricks[block][slot].get_or_insert_with(BrickBuf::default);
            brick.pattern |= 1u64 << (bit_row + within % BRICK_K);
            brick.values.push(v);
        }
    }

    for (b, block_bricks) in bricks.iter_mut().enumerate() {
        let mut block = Block {
            active_cols: Vec::with_capacity(config.tk),
            col_ptr: vec![0u32; brick_cols + 1],
            rows: Vec::new(),
            patterns: Vec::new(),
            nnz_array: Vec::new(),
        };
        for slot in b * config.tk..(b + 1) * config.tk {
            block
                .active_cols
                .push(active.get(slot).map_or(sentinel, |&c| c as u32));
        }
        // Emit active bricks in CSC order, brick rows ascending per column.
        for bcol in 0..brick_cols {
            for brow in 0..brick_rows {
                if let Some(buf) = block_bricks[bcol * brick_rows + brow].take() {
                    block.rows.push(brow as u32);
                    block.patterns.push(buf.pattern);
                    block.nnz_array.extend_from_slice(&buf.values);
                }
            }
            block.col_ptr[bcol + 1] = block.patterns.len() as u32;
        }
        let bytes = codec::encode_block(&block, config);
        out.sizes.push(bytes.len() as u64);
        out.packed.extend_from_slice(&bytes);
        out.active_cols.extend_from_slice(&block.active_cols);
    }
    out
}

/// Exact inverse of [`csr_to_hrpb`]: reconstructs the source CSR, values
/// bit-identical. Sentinel-padded column slots contribute nothing; metadata
/// inconsistencies surface as [`HrpbError::Integrity`].
pub fn hrpb_to_csr(h: &Hrpb) -> Result<CsrMatrix, HrpbError> {
    let panels: Vec<Vec<Vec<(u32, f32)>>> = (0..h.num_panels())
        .into_par_iter()
        .map(|p| expand_panel(h, p))
        .collect::<Result<_, _>>()?;

    let mut row_ptr = vec![0usize; h.num_rows + 1];
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut r = 0usize;
    for panel in panels {
        for row in panel {
            for (c, v) in row {
                col_idx.push(c as usize);
                values.push(v);
            }
            row_ptr[r + 1] = col_idx.len();
            r += 1;
        }
    }
    Ok(CsrMatrix {
        num_rows: h.num_rows,
        num_cols: h.num_cols,
        row_ptr,
        col_idx,
        values,
    })
}

fn expand_panel(h: &Hrpb, p: usize) -> Result<Vec<Vec<(u32, f32)>>, HrpbError> {
    let rows_range = h.panel_rows(p);
    let mut rows_buf: Vec<Vec<(u32, f32)>> = vec![Vec::new(); rows_range.len()];
    let sentinel = h.sentinel();
    for block_id in h.panel_blocks(p) {
        let block = h.block(block_id)?;
        let mut nnz_offset = 0usize;
        for bcol in 0..h.config.brick_cols() {
            for j in block.brick_col(bcol) {
                let brow = block.rows[j] as usize;
                let pattern = block.patterns[j];
                let mut bits = pattern;
                let mut rank = 0usize;
                while bits != 0 {
                    let idx = bits.trailing_zeros() as usize;
                    let col = block.active_cols[bcol * BRICK_K + idx % BRICK_K];
                    if col == sentinel {
                        return Err(HrpbError::Integrity(format!(
                            "block {block_id}: nonzero in a sentinel column slot"
                        )));
                    }
                    let local_row = brow * BRICK_M + idx / BRICK_K;
                    if rows_range.start + local_row >= h.num_rows {
                        return Err(HrpbError::Integrity(format!(
                            "block {block_id}: nonzero beyond row bound"
                        )));
                    }
                    rows_buf[local_row].push((col, block.nnz_array[nnz_offset + rank]));
                    rank += 1;
                    bits &= bits - 1;
                }
                nnz_offset += pattern.count_ones() as usize;
            }
        }
    }
    // Blocks cover ascending compacted columns and bricks are walked in
    // CSC order, so each row's pushes were already ascending by column.
    Ok(rows_buf)
}
