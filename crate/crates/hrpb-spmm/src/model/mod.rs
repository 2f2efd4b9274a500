//! Analytical quantities of an HRPB build and the TCU-synergy classifier.
//!
//! Definitions, with `bricks` the number of active bricks and `brick_cols`
//! the number of brick columns holding at least one active brick:
//!
//! - `alpha = nnz / (64 * bricks)`: mean nonzero fraction per brick column
//!   slot; equivalently the mean per-column density over active bricks.
//! - `beta = bricks / brick_cols`: average active bricks per active brick
//!   column, the vertical B-fragment reuse factor.
//! - `oi_shmem = 512 * alpha`: multiply-accumulates per 32-element staged
//!   B transaction (one 4x8 fragment) at beta = 1.
//! - `shmem_trans_b = nnz / (32 * alpha * 16 * beta)`: modeled staged-B
//!   transaction count per dense column of B; algebraically
//!   `brick_cols / 8` for sentinel-free builds.
//!
//! Synergy thresholds on alpha: Low `[0, 0.125)`, Medium `[0.125, 0.25)`,
//! High `[0.25, 1]`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::hrpb::{csr_to_hrpb, Hrpb, HrpbConfig, HrpbError, BRICK_ELEMS, BRICK_K, BRICK_M};
use crate::sparse_io::CsrMatrix;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("alpha is undefined for a matrix with no nonzeros")]
    EmptyMatrix,
    #[error("tm candidate {0} is not a multiple of 16")]
    BadCandidate(usize),
    #[error(transparent)]
    Hrpb(#[from] HrpbError),
}

/// Expected benefit from tensor-core SpMM, thresholded on alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Synergy {
    Low,
    Medium,
    High,
}

impl fmt::Display for Synergy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Synergy::Low => "Low",
            Synergy::Medium => "Medium",
            Synergy::High => "High",
        })
    }
}

/// `Low` below 12.5%, `Medium` in [12.5%, 25%), `High` from 25% up.
pub fn classify_synergy(alpha: f64) -> Synergy {
    if alpha < 0.125 {
        Synergy::Low
    } else if alpha < 0.25 {
        Synergy::Medium
    } else {
        Synergy::High
    }
}

/// MACs per 32-element staged B transaction.
pub fn oi_shmem(alpha: f64) -> f64 {
    512.0 * alpha
}

/// Modeled staged-B transactions per dense column of B.
pub fn shmem_trans_b(nnz: u64, alpha: f64, beta: f64) -> f64 {
    nnz as f64 / (32.0 * alpha * BRICK_M as f64 * beta)
}

struct HrpbScan {
    nnz: u64,
    bricks: u64,
    brick_cols: u64,
    /// (brick, column-in-brick) pairs where the column holds >= 1 nonzero.
    column_segments: u64,
    /// Non-sentinel compacted column slots over all blocks.
    active_columns: u64,
    per_panel_blocks: BTreeMap<u64, u64>,
    brick_density_histogram: Vec<u64>,
}

fn scan(h: &Hrpb) -> Result<HrpbScan, HrpbError> {
    let mut s = HrpbScan {
        nnz: 0,
        bricks: 0,
        brick_cols: 0,
        column_segments: 0,
        active_columns: 0,
        per_panel_blocks: BTreeMap::new(),
        brick_density_histogram: vec![0; BRICK_ELEMS + 1],
    };
    // Bits of one brick column: rows 0..16 of the brick's column k.
    const COLUMN_MASK: u64 = 0x1111_1111_1111_1111;
    let sentinel = h.sentinel();
    for p in 0..h.num_panels() {
        *s.per_panel_blocks
            .entry(h.panel_blocks(p).len() as u64)
            .or_insert(0) += 1;
    }
    for b in 0..h.num_blocks() {
        let block = h.block(b)?;
        s.active_columns += block.active_cols.iter().filter(|&&c| c != sentinel).count() as u64;
        for bcol in 0..h.config.brick_cols() {
            let range = block.brick_col(bcol);
            if !range.is_empty() {
                s.brick_cols += 1;
            }
            for j in range {
                let pattern = block.patterns[j];
                s.bricks += 1;
                s.nnz += u64::from(pattern.count_ones());
                s.brick_density_histogram[pattern.count_ones() as usize] += 1;
                for k in 0..BRICK_K {
                    if pattern & (COLUMN_MASK << k) != 0 {
                        s.column_segments += 1;
                    }
                }
            }
        }
    }
    Ok(s)
}

/// Brick-column density: `nnz / (64 * active bricks)`. Sentinel-padded
/// column slots still count toward each brick's 64-element denominator.
pub fn compute_alpha(h: &Hrpb) -> Result<f64, ModelError> {
    let s = scan(h)?;
    if s.bricks == 0 {
        return Err(ModelError::EmptyMatrix);
    }
    Ok(s.nnz as f64 / (BRICK_ELEMS as f64 * s.bricks as f64))
}

/// Vertical reuse: active bricks per active brick column.
pub fn compute_beta(h: &Hrpb) -> Result<f64, ModelError> {
    let s = scan(h)?;
    if s.brick_cols == 0 {
        return Err(ModelError::EmptyMatrix);
    }
    Ok(s.bricks as f64 / s.brick_cols as f64)
}

/// Full analytical report over one HRPB build.
#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    pub nnz: u64,
    pub num_active_bricks: u64,
    pub num_active_brick_columns: u64,
    pub alpha: f64,
    pub beta: f64,
    pub oi_shmem: f64,
    pub shmem_trans_b: f64,
    pub synergy: Synergy,
    /// Histogram: blocks-per-panel -> number of panels.
    pub per_panel_block_histogram: BTreeMap<u64, u64>,
    /// Histogram over active bricks indexed by pattern popcount (0..=64).
    pub brick_density_histogram: Vec<u64>,
}

impl ModelReport {
    /// Header matching [`ModelReport::to_csv_row`]; the scalar fields in
    /// declaration order (histograms are JSON-only).
    pub fn csv_header() -> &'static str {
        "nnz,num_active_bricks,num_active_brick_columns,alpha,beta,oi_shmem,shmem_trans_b,synergy"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.nnz,
            self.num_active_bricks,
            self.num_active_brick_columns,
            self.alpha,
            self.beta,
            self.oi_shmem,
            self.shmem_trans_b,
            self.synergy
        )
    }
}

/// Computes the model quantities for `h`. Empty matrices have no active
/// bricks and therefore no defined alpha.
pub fn model_report(h: &Hrpb) -> Result<ModelReport, ModelError> {
    let s = scan(h)?;
    if s.bricks == 0 {
        return Err(ModelError::EmptyMatrix);
    }
    let alpha = s.nnz as f64 / (BRICK_ELEMS as f64 * s.bricks as f64);
    let beta = s.bricks as f64 / s.brick_cols as f64;
    Ok(ModelReport {
        nnz: s.nnz,
        num_active_bricks: s.bricks,
        num_active_brick_columns: s.brick_cols,
        alpha,
        beta,
        oi_shmem: oi_shmem(alpha),
        shmem_trans_b: shmem_trans_b(s.nnz, alpha, beta),
        synergy: classify_synergy(alpha),
        per_panel_block_histogram: s.per_panel_blocks,
        brick_density_histogram: s.brick_density_histogram,
    })
}

/// Alpha/reuse trade-off of one panel-height candidate, relative to the
/// tm = 16 baseline.
#[derive(Debug, Clone, Serialize)]
pub struct TmAnalysis {
    pub tm: usize,
    pub alpha: f64,
    /// Per-column vertical reuse: the average number of bricks that hold a
    /// nonzero in a given compacted column. Unlike the raw brick-count ratio
    /// of [`compute_beta`], a brick that never touches a column contributes
    /// no reuse to it, so disjoint sub-panels packed together report 1.
    pub beta: f64,
    /// `alpha(tm) * beta(tm) / alpha(16)`.
    pub oi_gain: f64,
}

/// Rebuilds the matrix at each candidate panel height and reports how the
/// packed density and vertical reuse trade off against tm = 16.
pub fn analyze_tm(csr: &CsrMatrix, tm_candidates: &[usize]) -> Result<Vec<TmAnalysis>, ModelError> {
    for &tm in tm_candidates {
        if tm == 0 || tm % BRICK_M != 0 {
            return Err(ModelError::BadCandidate(tm));
        }
    }
    let baseline = scan(&csr_to_hrpb(csr, HrpbConfig::default())?)?;
    if baseline.bricks == 0 {
        return Err(ModelError::EmptyMatrix);
    }
    let alpha16 = baseline.nnz as f64 / (BRICK_ELEMS as f64 * baseline.bricks as f64);

    let mut out = Vec::with_capacity(tm_candidates.len());
    for &tm in tm_candidates {
        let h = csr_to_hrpb(csr, HrpbConfig::new(tm, HrpbConfig::default().tk)?)?;
        let s = scan(&h)?;
        let alpha = s.nnz as f64 / (BRICK_ELEMS as f64 * s.bricks as f64);
        let beta = s.column_segments as f64 / s.active_columns as f64;
        out.push(TmAnalysis {
            tm,
            alpha,
            beta,
            oi_gain: alpha * beta / alpha16,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse_io::{generate_synthetic, CooMatrix, SyntheticKind};

    fn to_hrpb(csr: &CsrMatrix) -> Hrpb {
        csr_to_hrpb(csr, HrpbConfig::default()).unwrap()
    }

    fn identity(nr: usize) -> CsrMatrix {
        CooMatrix::from_entries(nr, nr, (0..nr).map(|i| (i, i, 1.0)).collect())
            .unwrap()
            .to_csr()
    }

    /// Rows `rows`, each dense over `cols`.
    fn dense_rect(m: usize, k: usize, rows: std::ops::Range<usize>, cols: &[usize]) -> CsrMatrix {
        let mut entries = Vec::new();
        for r in rows {
            for &c in cols {
                entries.push((r, c, 1.0 + (r * k + c) as f32 / 1000.0));
            }
        }
        CooMatrix::from_entries(m, k, entries).unwrap().to_csr()
    }

    #[test]
    fn alpha_of_dense_matrix_is_one() {
        let csr = dense_rect(32, 32, 0..32, &(0..32).collect::<Vec<_>>());
        assert_eq!(compute_alpha(&to_hrpb(&csr)).unwrap(), 1.0);
    }

    #[test]
    fn alpha_of_identity_is_brick_density_floor() {
        for n in [16, 64, 256] {
            let h = to_hrpb(&identity(n));
            assert_eq!(compute_alpha(&h).unwrap(), 4.0 / 64.0, "n={n}");
            assert_eq!(classify_synergy(compute_alpha(&h).unwrap()), Synergy::Low);
        }
    }

    #[test]
    fn alpha_of_full_clusters_is_one() {
        let csr = generate_synthetic(
            SyntheticKind::BlockClustered {
                clusters_per_panel: 2,
                fill: 1.0,
            },
            64,
            32,
            3,
        )
        .unwrap();
        assert_eq!(compute_alpha(&to_hrpb(&csr)).unwrap(), 1.0);
    }

    #[test]
    fn alpha_undefined_on_empty_matrix() {
        let empty = CooMatrix::from_entries(32, 32, vec![]).unwrap().to_csr();
        assert!(matches!(
            compute_alpha(&to_hrpb(&empty)),
            Err(ModelError::EmptyMatrix)
        ));
        assert!(model_report(&to_hrpb(&empty)).is_err());
    }

    #[test]
    fn beta_is_one_at_single_brick_row() {
        let csr = generate_synthetic(SyntheticKind::RandomUniform { density: 0.04 }, 128, 128, 4)
            .unwrap();
        assert_eq!(compute_beta(&to_hrpb(&csr)).unwrap(), 1.0);
    }

    #[test]
    fn beta_two_when_both_bricks_of_every_column_are_active() {
        // Both 16-row halves dense over the same 16 columns.
        let csr = dense_rect(32, 16, 0..32, &(0..16).collect::<Vec<_>>());
        let h = csr_to_hrpb(&csr, HrpbConfig::new(32, 16).unwrap()).unwrap();
        assert_eq!(compute_beta(&h).unwrap(), 2.0);
    }

    #[test]
    fn beta_one_on_disjoint_half_panels() {
        // Top half dense over columns 0..8, bottom half over 8..16: after
        // packing at tm = 32, no brick column holds bricks from both halves.
        let mut entries = Vec::new();
        for r in 0..16 {
            for c in 0..8 {
                entries.push((r, c, 1.0));
            }
        }
        for r in 16..32 {
            for c in 8..16 {
                entries.push((r, c, 1.0));
            }
        }
        let csr = CooMatrix::from_entries(32, 16, entries).unwrap().to_csr();
        let h = csr_to_hrpb(&csr, HrpbConfig::new(32, 16).unwrap()).unwrap();
        assert_eq!(compute_beta(&h).unwrap(), 1.0);
    }

    #[test]
    fn oi_shmem_is_linear_in_alpha() {
        assert_eq!(oi_shmem(1.0), 512.0);
        assert_eq!(oi_shmem(0.25), 128.0);
        assert_eq!(oi_shmem(0.0625), 32.0);
    }

    #[test]
    fn shmem_trans_b_formula_and_proportionality() {
        assert_eq!(shmem_trans_b(1024, 0.5, 1.0), 4.0);
        let once = shmem_trans_b(4096, 0.3, 1.0);
        let doubled = shmem_trans_b(4096, 0.3, 2.0);
        assert!((once / doubled - 2.0).abs() < 1e-12);
    }

    #[test]
    fn shmem_trans_b_equals_brick_columns_over_eight_when_sentinel_free() {
        // Fully dense matrices have no sentinel slots at K % 16 == 0.
        for (m, k, seed) in [(64, 64, 1), (48, 128, 2), (160, 32, 3)] {
            let csr = dense_rect(m, k, 0..m, &(0..k).collect::<Vec<_>>());
            let report = model_report(&to_hrpb(&csr)).unwrap();
            let want = report.num_active_brick_columns as f64 / 8.0;
            assert!(
                (report.shmem_trans_b - want).abs() <= 1e-9 * want,
                "m={m} k={k} seed={seed}"
            );
        }
    }

    #[test]
    fn synergy_boundaries_per_table() {
        assert_eq!(classify_synergy(0.10), Synergy::Low);
        assert_eq!(classify_synergy(0.124999), Synergy::Low);
        assert_eq!(classify_synergy(0.125), Synergy::Medium);
        assert_eq!(classify_synergy(0.249999), Synergy::Medium);
        assert_eq!(classify_synergy(0.25), Synergy::High);
        assert_eq!(classify_synergy(0.30), Synergy::High);
        assert_eq!(classify_synergy(1.0), Synergy::High);
        assert_eq!(classify_synergy(0.0), Synergy::Low);
    }

    #[test]
    fn report_consistency_on_random_matrix() {
        let csr = generate_synthetic(SyntheticKind::RandomUniform { density: 0.03 }, 300, 200, 5)
            .unwrap();
        let report = model_report(&to_hrpb(&csr)).unwrap();
        assert_eq!(report.nnz, csr.nnz() as u64);
        assert_eq!(
            report.alpha,
            report.nnz as f64 / (64.0 * report.num_active_bricks as f64)
        );
        assert_eq!(report.oi_shmem, 512.0 * report.alpha);
        assert_eq!(
            report.brick_density_histogram.iter().sum::<u64>(),
            report.num_active_bricks
        );
        assert_eq!(report.brick_density_histogram[0], 0);
        assert_eq!(
            report.per_panel_block_histogram.values().sum::<u64>(),
            to_hrpb(&csr).num_panels() as u64
        );
        let total_alpha_range = 0.0 < report.alpha && report.alpha <= 1.0;
        assert!(total_alpha_range);
    }

    #[test]
    fn csv_row_matches_header_arity() {
        let csr = identity(64);
        let report = model_report(&to_hrpb(&csr)).unwrap();
        let row = report.to_csv_row();
        assert_eq!(
            row.split(',').count(),
            ModelReport::csv_header().split(',').count()
        );
        assert!(row.ends_with("Low"));
    }

    #[test]
    fn analyze_tm_shared_columns_doubles_oi() {
        // Both halves share all 16 active columns, fully dense: packing at
        // tm = 32 doubles the vertical reuse at unchanged density.
        let csr = dense_rect(32, 16, 0..32, &(0..16).collect::<Vec<_>>());
        let out = analyze_tm(&csr, &[16, 32]).unwrap();
        assert_eq!(out[0].oi_gain, 1.0);
        assert_eq!(out[1].alpha, 1.0);
        assert_eq!(out[1].beta, 2.0);
        assert_eq!(out[1].oi_gain, 2.0);
    }

    #[test]
    fn analyze_tm_disjoint_columns_halves_oi() {
        // Interleaved disjoint halves: top rows dense on even columns,
        // bottom rows dense on odd columns. Packing at tm = 32 doubles the
        // compacted width and the brick count at constant nnz, so alpha
        // halves while no column gains reuse.
        let mut entries = Vec::new();
        for r in 0..16 {
            for c in (0..32).step_by(2) {
                entries.push((r, c, 2.0));
            }
        }
        for r in 16..32 {
            for c in (1..32).step_by(2) {
                entries.push((r, c, 3.0));
            }
        }
        let csr = CooMatrix::from_entries(32, 32, entries).unwrap().to_csr();
        let out = analyze_tm(&csr, &[32]).unwrap();
        assert_eq!(out[0].alpha, 0.5);
        assert_eq!(out[0].beta, 1.0);
        assert_eq!(out[0].oi_gain, 0.5);
    }

    #[test]
    fn analyze_tm_dense_matrix_scales_beta_with_tm() {
        let csr = dense_rect(64, 32, 0..64, &(0..32).collect::<Vec<_>>());
        let out = analyze_tm(&csr, &[16, 32, 64]).unwrap();
        for (entry, want_beta) in out.iter().zip([1.0, 2.0, 4.0]) {
            assert_eq!(entry.alpha, 1.0, "tm={}", entry.tm);
            assert_eq!(entry.beta, want_beta);
            assert_eq!(entry.oi_gain, want_beta);
        }
    }

    #[test]
    fn analyze_tm_rejects_bad_candidates() {
        let csr = identity(32);
        assert!(matches!(
            analyze_tm(&csr, &[20]),
            Err(ModelError::BadCandidate(20))
        ));
    }
}
