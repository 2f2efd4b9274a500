//! Cross-checks between the emulator's measured counters and the analytical
//! model: on sentinel-free builds the measured MACs per active-brick-column
//! fragment transaction must equal 512 * alpha * beta, and the modeled
//! staged-B transaction count must collapse to brick_columns / 8.

use hrpb_spmm::emulator::{spmm_hrpb, ExecConfig};
use hrpb_spmm::hrpb::{csr_to_hrpb, HrpbConfig};
use hrpb_spmm::model::{model_report, shmem_trans_b};
use hrpb_spmm::sparse_io::{generate_synthetic, CooMatrix, CsrMatrix, DenseMatrix, SyntheticKind};

/// Random matrix with no sentinel-padded column slots: one dense row per
/// panel makes every column active, and K is a multiple of tk.
fn sentinel_free(m: usize, k: usize, density: f64, tm: usize, seed: u64) -> CsrMatrix {
    assert_eq!(k % 16, 0);
    let base = generate_synthetic(SyntheticKind::RandomUniform { density }, m, k, seed).unwrap();
    let mut entries = base.to_coo().entries;
    for p in 0..m.div_ceil(tm) {
        for c in 0..k {
            entries.push((p * tm, c, 0.5));
        }
    }
    CooMatrix::from_entries(m, k, entries).unwrap().to_csr()
}

fn assert_close(got: f64, want: f64, what: &str) {
    assert!(
        (got - want).abs() <= 1e-9 * want.abs(),
        "{what}: got {got}, want {want}"
    );
}

#[test]
fn measured_intensity_matches_model_at_tm16() {
    for seed in 0..8 {
        let m = 32 + (seed as usize * 61) % 200;
        let k = 16 * (1 + (seed as usize) % 6);
        let csr = sentinel_free(m, k, 0.03, 16, seed);
        let h = csr_to_hrpb(&csr, HrpbConfig::default()).unwrap();
        let report = model_report(&h).unwrap();
        for n in [8, 32] {
            let b = DenseMatrix::seeded_uniform(k, n, seed);
            let (_, stats) = spmm_hrpb(&h, &b, &ExecConfig::new(n).unwrap()).unwrap();
            let measured = stats.useful_macs as f64 / stats.b_fragment_loads_active as f64;
            assert_close(measured, 512.0 * report.alpha, "OI at beta = 1");
            assert_eq!(report.beta, 1.0);
        }
        // Full blocks at tm = 16 carry >= 4 nonzeros per brick.
        assert!(report.alpha >= 1.0 / 16.0 && report.alpha <= 1.0);
    }
}

#[test]
fn measured_intensity_matches_model_at_tm32() {
    for seed in 0..6 {
        let m = 64 + (seed as usize * 37) % 160;
        let k = 16 * (2 + (seed as usize) % 4);
        let csr = sentinel_free(m, k, 0.05, 32, seed + 100);
        let h = csr_to_hrpb(&csr, HrpbConfig::new(32, 16).unwrap()).unwrap();
        let report = model_report(&h).unwrap();
        let b = DenseMatrix::seeded_uniform(k, 16, seed);
        let (_, stats) = spmm_hrpb(&h, &b, &ExecConfig::new(16).unwrap()).unwrap();
        let measured = stats.useful_macs as f64 / stats.b_fragment_loads_active as f64;
        assert_close(
            measured,
            512.0 * report.alpha * report.beta,
            "OI at general beta",
        );
        assert!(report.beta > 1.0, "dense rows must create vertical reuse");
    }
}

#[test]
fn shmem_trans_b_collapses_to_brick_columns_over_eight() {
    for seed in 0..8 {
        let m = 48 + (seed as usize * 53) % 300;
        let k = 16 * (1 + (seed as usize) % 8);
        let tm = if seed % 2 == 0 { 16 } else { 32 };
        let csr = sentinel_free(m, k, 0.08, tm, seed + 50);
        let h = csr_to_hrpb(&csr, HrpbConfig::new(tm, 16).unwrap()).unwrap();
        let report = model_report(&h).unwrap();
        assert_close(
            shmem_trans_b(report.nnz, report.alpha, report.beta),
            report.num_active_brick_columns as f64 / 8.0,
            "modeled staged-B transactions",
        );
    }
}

#[test]
fn counter_identities_hold_with_sentinel_padding_too() {
    // The structural counter identities do not require sentinel-free input.
    for seed in 0..6 {
        let csr = generate_synthetic(
            SyntheticKind::RandomUniform { density: 0.02 },
            100 + seed as usize * 31,
            70 + seed as usize * 17,
            seed,
        )
        .unwrap();
        let h = csr_to_hrpb(&csr, HrpbConfig::default()).unwrap();
        let report = model_report(&h).unwrap();
        for n in [8, 24, 32] {
            let b = DenseMatrix::seeded_uniform(csr.num_cols, n, seed);
            let (_, stats) = spmm_hrpb(&h, &b, &ExecConfig::new(n).unwrap()).unwrap();
            let subtiles = n.div_ceil(8) as u64;
            assert_eq!(stats.mma_count, report.num_active_bricks * subtiles);
            assert_eq!(stats.b_fragment_loads, h.num_blocks() as u64 * 4 * subtiles);
            assert_eq!(
                stats.b_fragment_loads_active,
                report.num_active_brick_columns * subtiles
            );
            assert_eq!(stats.decode_ops, 2 * report.num_active_bricks);
            assert_eq!(stats.useful_macs, report.nnz * 8 * subtiles);
            assert_eq!(
                stats.b_staging_elements,
                h.num_blocks() as u64 * 16 * (subtiles * 8)
            );
            assert_eq!(stats.a_block_bytes, h.packed_blocks.len() as u64);
        }
    }
}
