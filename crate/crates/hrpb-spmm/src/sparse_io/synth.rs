//! Seeded synthetic matrix generators.
//!
//! All kinds draw from a single ChaCha8 stream keyed by the seed and visit
//! cells in a fixed order, so equal arguments produce bit-identical matrices
//! on every run and platform (no libm calls on the sampling path).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CooMatrix, CsrMatrix, SparseIoError};

const PANEL_ROWS: usize = 16;
const CLUSTER_COLS: usize = 4;

/// Nonzero placement strategy for [`generate_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticKind {
    /// Independent Bernoulli(`density`) draw per cell.
    RandomUniform { density: f64 },
    /// Bernoulli(`density`) draws restricted to |row - col| <= bandwidth.
    Banded { bandwidth: usize, density: f64 },
    /// Dense 16x4-aligned clusters, left-packed per 16-row panel: panel `p`
    /// gets clusters covering columns `[0, 4*clusters_per_panel)`. Each
    /// cluster cell is kept with probability `fill`, so the brick-column
    /// density of the converted matrix is controllable near 1.0.
    BlockClustered {
        clusters_per_panel: usize,
        fill: f64,
    },
}

/// Generates a reproducible sparse matrix of the requested kind.
pub fn generate_synthetic(
    kind: SyntheticKind,
    num_rows: usize,
    num_cols: usize,
    seed: u64,
) -> Result<CsrMatrix, SparseIoError> {
    if num_rows == 0 || num_cols == 0 {
        return Err(SparseIoError::InvalidParameter(format!(
            "degenerate matrix shape {num_rows}x{num_cols}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries: Vec<(usize, usize, f32)> = Vec::new();

    match kind {
        SyntheticKind::RandomUniform { density } => {
            check_unit_interval("density", density)?;
            for r in 0..num_rows {
                for c in 0..num_cols {
                    if rng.gen::<f64>() < density {
                        entries.push((r, c, rng.gen_range(-1.0f32..1.0)));
                    }
                }
            }
        }
        SyntheticKind::Banded { bandwidth, density } => {
            check_unit_interval("density", density)?;
            for r in 0..num_rows {
                let lo = r.saturating_sub(bandwidth);
                let hi = (r + bandwidth + 1).min(num_cols);
                for c in lo..hi {
                    if rng.gen::<f64>() < density {
                        entries.push((r, c, rng.gen_range(-1.0f32..1.0)));
                    }
                }
            }
        }
        SyntheticKind::BlockClustered {
            clusters_per_panel,
            fill,
        } => {
            check_unit_interval("fill", fill)?;
            if clusters_per_panel == 0 {
                return Err(SparseIoError::InvalidParameter(
                    "clusters_per_panel must be at least 1".into(),
                ));
            }
            if clusters_per_panel * CLUSTER_COLS > num_cols {
                return Err(SparseIoError::InvalidParameter(format!(
                    "{clusters_per_panel} clusters need {} columns, matrix has {num_cols}",
                    clusters_per_panel * CLUSTER_COLS
                )));
            }
            let num_panels = num_rows.div_ceil(PANEL_ROWS);
            for p in 0..num_panels {
                let row_end = ((p + 1) * PANEL_ROWS).min(num_rows);
                for k in 0..clusters_per_panel {
                    for r in p * PANEL_ROWS..row_end {
                        for c in k * CLUSTER_COLS..(k + 1) * CLUSTER_COLS {
                            if fill >= 1.0 || rng.gen::<f64>() < fill {
                                entries.push((r, c, rng.gen_range(-1.0f32..1.0)));
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(CooMatrix::from_entries(num_rows, num_cols, entries)?.to_csr())
}

fn check_unit_interval(name: &str, value: f64) -> Result<(), SparseIoError> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(SparseIoError::InvalidParameter(format!(
            "{name} must be in (0, 1], got {value}"
        )))
    }
}
