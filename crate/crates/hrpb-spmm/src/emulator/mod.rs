//! Instrumented emulation of the tensor-core SpMM kernel over HRPB, plus a
//! brute-force CSR reference oracle.
//!
//! The emulator walks the format exactly as the kernel does: per row panel,
//! per block, it stages the block's B rows into a `tk x n` buffer (zero rows
//! for sentinel column slots), then traverses the brick columns; each brick
//! column's B fragments are fetched once per 8-wide output subtile and
//! reused by every active brick in the column, while `nnz_offset` advances
//! through the block's value array by pattern popcount. A-fragments are
//! reconstructed dense (absent positions zero-filled) so they participate in
//! the 16x4 times 4x8 fragment multiply like the hardware's would.
//!
//! Warp and thread geometry never touch the numerics; they exist only in the
//! counters of [`ExecStats`].

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::hrpb::{self, csr_to_hrpb, Hrpb, HrpbConfig, HrpbError, BRICK_K, BRICK_M, BRICK_N};
use crate::sparse_io::{CsrMatrix, DenseMatrix};

/// Per-element comparison tolerance of the emulator against the oracle:
/// `|delta| <= REL_TOL * (1 + |reference|)`.
pub const REL_TOL: f32 = 1e-4;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid execution config: {0}")]
    Config(String),
    #[error(transparent)]
    Hrpb(#[from] HrpbError),
}

/// Execution geometry. `n` is the dense width of B; internal padding lifts
/// it to a multiple of 8 (`brick_n`). `parallel` only selects whether row
/// panels run on the rayon pool -- each panel owns a disjoint row range of
/// C, so the output is bit-identical either way.
#[derive(Debug, Clone, Copy)]
pub struct ExecConfig {
    pub n: usize,
    pub parallel: bool,
}

impl ExecConfig {
    /// Output width of one warp (4 coarsened 16x8 subtiles).
    pub const TN_PER_WARP: usize = 32;

    pub fn new(n: usize) -> Result<Self, ExecError> {
        if n == 0 {
            return Err(ExecError::Config("n must be at least 1".into()));
        }
        Ok(Self { n, parallel: true })
    }

    pub fn n_padded(&self) -> usize {
        self.n.next_multiple_of(BRICK_N)
    }

    /// Warps assigned per thread block: narrow B widths shrink the warp
    /// count instead of idling lanes.
    pub fn warps_per_block(&self) -> usize {
        (self.n / (hrpb::WARP_COARSENING * BRICK_N)).clamp(1, 4)
    }
}

/// Data-movement and work counters accumulated by [`spmm_hrpb`].
///
/// Exact identities, by construction:
/// - `mma_count = sum over blocks of active_bricks * ceil(n/8)`
/// - `b_fragment_loads = num_blocks * (tk/4) * ceil(n/8)` (empty brick
///   columns included, as in the kernel's unconditional fragment fetch)
/// - `b_fragment_loads_active`: same, restricted to brick columns holding
///   at least one active brick
/// - `b_staging_elements = num_blocks * tk * n_padded`
/// - `decode_ops = 2 * total active bricks` (one per 32-bit pattern half)
/// - `useful_macs = sum over bricks of popcount * 8 * ceil(n/8)` --
///   multiply-accumulates fed by an actual nonzero of A
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExecStats {
    pub mma_count: u64,
    pub b_fragment_loads: u64,
    pub b_fragment_loads_active: u64,
    pub b_staging_elements: u64,
    pub a_block_bytes: u64,
    pub decode_ops: u64,
    pub useful_macs: u64,
    /// Histogram: blocks-per-panel -> number of panels.
    pub per_panel_blocks: BTreeMap<u64, u64>,
}

impl ExecStats {
    fn merge(mut self, other: ExecStats) -> ExecStats {
        self.mma_count += other.mma_count;
        self.b_fragment_loads += other.b_fragment_loads;
        self.b_fragment_loads_active += other.b_fragment_loads_active;
        self.b_staging_elements += other.b_staging_elements;
        self.a_block_bytes += other.a_block_bytes;
        self.decode_ops += other.decode_ops;
        self.useful_macs += other.useful_macs;
        for (k, v) in other.per_panel_blocks {
            *self.per_panel_blocks.entry(k).or_insert(0) += v;
        }
        self
    }
}

/// Brute-force oracle: `C[i][j] = sum_k A[i][k] * B[k][j]`, accumulating in
/// ascending column order of each CSR row.
pub fn spmm_reference(csr: &CsrMatrix, b: &DenseMatrix) -> Result<DenseMatrix, ExecError> {
    if csr.num_cols != b.num_rows {
        return Err(ExecError::DimensionMismatch(format!(
            "A is {}x{} but B has {} rows",
            csr.num_rows, csr.num_cols, b.num_rows
        )));
    }
    let n = b.num_cols;
    let mut c = DenseMatrix::zeros(csr.num_rows, n);
    for i in 0..csr.num_rows {
        let out = &mut c.data[i * n..(i + 1) * n];
        let (cols, vals) = csr.row(i);
        for (&k, &v) in cols.iter().zip(vals) {
            for (o, &bv) in out.iter_mut().zip(b.row(k)) {
                *o += v * bv;
            }
        }
    }
    Ok(c)
}

/// One fragment multiply-accumulate: `c += a * b` for a 16x4 A fragment, a
/// 4x8 B fragment, and a 16x8 accumulator, all row-major. The k-extent is
/// accumulated in ascending order.
pub fn brick_mma(
    a_frag: &[f32; BRICK_M * BRICK_K],
    b_frag: &[f32; BRICK_K * BRICK_N],
    c_frag: &mut [f32; BRICK_M * BRICK_N],
) {
    for r in 0..BRICK_M {
        for j in 0..BRICK_N {
            let mut acc = c_frag[r * BRICK_N + j];
            for k in 0..BRICK_K {
                acc += a_frag[r * BRICK_K + k] * b_frag[k * BRICK_N + j];
            }
            c_frag[r * BRICK_N + j] = acc;
        }
    }
}

/// Executes C = A * B over the HRPB form of A, returning C and the
/// traversal counters. Output rows beyond M and columns beyond `cfg.n` are
/// trimmed away; results are bit-identical across parallelism levels.
pub fn spmm_hrpb(
    h: &Hrpb,
    b: &DenseMatrix,
    cfg: &ExecConfig,
) -> Result<(DenseMatrix, ExecStats), ExecError> {
    if h.num_cols != b.num_rows {
        return Err(ExecError::DimensionMismatch(format!(
            "A is {}x{} but B has {} rows",
            h.num_rows, h.num_cols, b.num_rows
        )));
    }
    if b.num_cols != cfg.n {
        return Err(ExecError::DimensionMismatch(format!(
            "config n = {} but B has {} columns",
            cfg.n, b.num_cols
        )));
    }
    if cfg.n == 0 {
        return Err(ExecError::Config("n must be at least 1".into()));
    }

    let n = cfg.n;
    let mut c = DenseMatrix::zeros(h.num_rows, n);
    let chunk = h.config.tm * n;
    let stats = if cfg.parallel {
        c.data
            .par_chunks_mut(chunk)
            .enumerate()
            .map(|(p, rows)| run_panel(h, b, cfg, p, rows))
            .try_reduce(ExecStats::default, |a, b| Ok(a.merge(b)))?
    } else {
        let mut acc = ExecStats::default();
        for (p, rows) in c.data.chunks_mut(chunk).enumerate() {
            acc = acc.merge(run_panel(h, b, cfg, p, rows)?);
        }
        acc
    };
    Ok((c, stats))
}

fn run_panel(
    h: &Hrpb,
    b: &DenseMatrix,
    cfg: &ExecConfig,
    panel: usize,
    c_rows: &mut [f32],
) -> Result<ExecStats, ExecError> {
    let tk = h.config.tk;
    let brick_cols = h.config.brick_cols();
    let n = cfg.n;
    let n_padded = cfg.n_padded();
    let subtiles = n_padded / BRICK_N;
    let sentinel = h.sentinel();

    let mut stats = ExecStats::default();
    let blocks = h.panel_blocks(panel);
    *stats
        .per_panel_blocks
        .entry(blocks.len() as u64)
        .or_insert(0) += 1;

    let mut acc = vec![0.0f32; h.config.tm * n_padded];
    let mut staging = vec![0.0f32; tk * n_padded];
    let mut b_frags: Vec<[f32; BRICK_K * BRICK_N]> = vec![[0.0; BRICK_K * BRICK_N]; subtiles];

    for block_id in blocks {
        stats.a_block_bytes += h.block_bytes(block_id).len() as u64;
        let block = h.block(block_id)?;

        // Stage the block's B rows into the contiguous buffer; sentinel
        // slots become zero rows.
        for (i, row) in staging.chunks_mut(n_padded).enumerate() {
            let col = block.active_cols[i];
            if col == sentinel {
                row.fill(0.0);
            } else {
                row[..n].copy_from_slice(b.row(col as usize));
                row[n..].fill(0.0);
            }
        }
        stats.b_staging_elements += (tk * n_padded) as u64;

        let mut nnz_offset = 0usize;
        for bcol in 0..brick_cols {
            // The kernel fetches B fragments before looking at col_ptr, so
            // the fetch is counted even for empty brick columns.
            for (s, frag) in b_frags.iter_mut().enumerate() {
                for k in 0..BRICK_K {
                    let row = &staging[(bcol * BRICK_K + k) * n_padded..];
                    frag[k * BRICK_N..(k + 1) * BRICK_N]
                        .copy_from_slice(&row[s * BRICK_N..(s + 1) * BRICK_N]);
                }
            }
            stats.b_fragment_loads += subtiles as u64;
            let bricks = block.brick_col(bcol);
            if !bricks.is_empty() {
                stats.b_fragment_loads_active += subtiles as u64;
            }

            for j in bricks {
                let brow = block.rows[j] as usize;
                let pattern = block.patterns[j];
                let popcount = pattern.count_ones();

                // Decode the brick: both 32-bit pattern halves are scanned,
                // and each set bit's value offset is its prefix popcount.
                stats.decode_ops += 2;
                let mut a_frag = [0.0f32; BRICK_M * BRICK_K];
                let mut bits = pattern;
                let mut rank = 0u32;
                while bits != 0 {
                    let idx = bits.trailing_zeros();
                    debug_assert_eq!(rank, hrpb::prefix_index(pattern, idx));
                    a_frag[idx as usize] = block.nnz_array[nnz_offset + rank as usize];
                    rank += 1;
                    bits &= bits - 1;
                }
                nnz_offset += popcount as usize;

                for (s, frag) in b_frags.iter().enumerate() {
                    let mut c_frag = [0.0f32; BRICK_M * BRICK_N];
                    for r in 0..BRICK_M {
                        let base = (brow * BRICK_M + r) * n_padded + s * BRICK_N;
                        c_frag[r * BRICK_N..(r + 1) * BRICK_N]
                            .copy_from_slice(&acc[base..base + BRICK_N]);
                    }
                    brick_mma(&a_frag, frag, &mut c_frag);
                    for r in 0..BRICK_M {
                        let base = (brow * BRICK_M + r) * n_padded + s * BRICK_N;
                        acc[base..base + BRICK_N]
                            .copy_from_slice(&c_frag[r * BRICK_N..(r + 1) * BRICK_N]);
                    }
                    stats.mma_count += 1;
                    stats.useful_macs += u64::from(popcount) * BRICK_N as u64;
                }
            }
        }
    }

    // Single write-back per panel; rows >= M and columns >= n are trimmed.
    for (r, out) in c_rows.chunks_mut(n).enumerate() {
        out.copy_from_slice(&acc[r * n_padded..r * n_padded + n]);
    }
    Ok(stats)
}

/// Outcome of an oracle comparison. `max_rel_err` is the largest
/// `|delta| / (1 + |reference|)` over all elements; `pass` holds when it
/// stays within [`REL_TOL`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VerifyReport {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub pass: bool,
}

/// Runs the emulator and the oracle on the same inputs and compares.
pub fn verify(
    csr: &CsrMatrix,
    b: &DenseMatrix,
    cfg: &ExecConfig,
) -> Result<VerifyReport, ExecError> {
    let h = csr_to_hrpb(csr, HrpbConfig::default())?;
    verify_against(&h, csr, b, cfg)
}

/// [`verify`] for an already-built HRPB (its CSR expansion must be `csr`).
pub fn verify_against(
    h: &Hrpb,
    csr: &CsrMatrix,
    b: &DenseMatrix,
    cfg: &ExecConfig,
) -> Result<VerifyReport, ExecError> {
    let reference = spmm_reference(csr, b)?;
    let (c, _) = spmm_hrpb(h, b, cfg)?;
    Ok(compare_outputs(&reference, &c))
}

/// Element-wise comparison of an emulator output against the oracle's.
pub fn compare_outputs(reference: &DenseMatrix, got: &DenseMatrix) -> VerifyReport {
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for (&r, &g) in reference.data.iter().zip(&got.data) {
        let abs = (f64::from(g) - f64::from(r)).abs();
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(abs / (1.0 + f64::from(r).abs()));
    }
    VerifyReport {
        max_abs_err: max_abs,
        max_rel_err: max_rel,
        pass: max_rel <= f64::from(REL_TOL),
    }
}
