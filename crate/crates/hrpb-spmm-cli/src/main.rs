//! Command-line front end: format conversion, emulated SpMM with optional
//! oracle verification, synergy classification, and corpus sweeps.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod bench;

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use hrpb_spmm::emulator::{compare_outputs, spmm_hrpb, spmm_reference, ExecConfig, ExecError};
use hrpb_spmm::hrpb::{
    csr_to_hrpb, hrpb_to_csr, load_hrpb, save_hrpb, Hrpb, HrpbConfig, HrpbError, HRPB_MAGIC,
};
use hrpb_spmm::model::{model_report, ModelError};
use hrpb_spmm::sparse_io::{read_matrix_market, CsrMatrix, DenseMatrix, SparseIoError};

#[derive(Parser)]
#[command(
    name = "hrpb-spmm",
    version,
    about = "HRPB sparse format tools and emulated tensor-core SpMM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a Matrix Market file to the binary HRPB format.
    Convert {
        /// Input .mtx file (coordinate real/pattern, general/symmetric).
        #[arg(long)]
        input: PathBuf,
        /// Output .hrpb file.
        #[arg(long)]
        output: PathBuf,
        /// Row-panel height; multiple of 16.
        #[arg(long, default_value_t = 16)]
        tm: usize,
        /// Block width in columns; multiple of 4.
        #[arg(long, default_value_t = 16)]
        tk: usize,
        /// Emit the summary as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run emulated SpMM over a matrix with a seeded dense B.
    Spmm {
        /// Input matrix: .mtx or .hrpb (detected by content).
        #[arg(long)]
        matrix: PathBuf,
        /// Dense width of B.
        #[arg(long)]
        n: usize,
        /// Seed for the B generator (uniform in [-1, 1)).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also run the brute-force oracle and compare.
        #[arg(long)]
        verify: bool,
        /// Emit a JSON report instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Report alpha, beta, OI, and the synergy class of a matrix.
    Classify {
        /// Input .mtx file.
        #[arg(long)]
        input: PathBuf,
        /// Emit the full model report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Sweep a directory of .mtx files and write one CSV row per (matrix, n).
    Bench {
        /// Directory containing .mtx files.
        #[arg(long)]
        dir: PathBuf,
        /// Comma-separated list of dense widths.
        #[arg(long, default_value = "32,128")]
        n: String,
        /// Output CSV path.
        #[arg(long)]
        csv: PathBuf,
        /// Worker threads; 0 means one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Also emit the records and failures as JSON on stdout.
        #[arg(long)]
        json: bool,
    },
}

enum CliError {
    Usage(String),
    Data(String),
}

impl From<SparseIoError> for CliError {
    fn from(e: SparseIoError) -> Self {
        match e {
            SparseIoError::InvalidParameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<HrpbError> for CliError {
    fn from(e: HrpbError) -> Self {
        match e {
            HrpbError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ExecError> for CliError {
    fn from(e: ExecError) -> Self {
        match e {
            ExecError::Config(_) => CliError::Usage(e.to_string()),
            ExecError::DimensionMismatch(_) => CliError::Data(e.to_string()),
            ExecError::Hrpb(inner) => inner.into(),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::BadCandidate(_) => CliError::Usage(e.to_string()),
            ModelError::Hrpb(inner) => inner.into(),
            ModelError::EmptyMatrix => CliError::Data(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Convert {
            input,
            output,
            tm,
            tk,
            json,
        } => cmd_convert(&input, &output, tm, tk, json),
        Command::Spmm {
            matrix,
            n,
            seed,
            verify,
            json,
        } => cmd_spmm(&matrix, n, seed, verify, json),
        Command::Classify { input, json } => cmd_classify(&input, json),
        Command::Bench {
            dir,
            n,
            csv,
            jobs,
            json,
        } => bench::cmd_bench(&dir, &n, &csv, jobs, json),
    }
}

fn cmd_convert(
    input: &Path,
    output: &Path,
    tm: usize,
    tk: usize,
    json: bool,
) -> Result<(), CliError> {
    let config = HrpbConfig::new(tm, tk)?;
    let csr = read_matrix_market(input)?.to_csr();
    let start = Instant::now();
    let h = csr_to_hrpb(&csr, config)?;
    let elapsed = start.elapsed().as_secs_f64();
    save_hrpb(output, &h)?;

    let bricks: u64 = (0..h.num_blocks())
        .map(|b| h.block(b).map(|blk| blk.num_active_bricks() as u64))
        .sum::<Result<u64, _>>()?;
    if json {
        let doc = json!({
            "output": output.display().to_string(),
            "num_rows": h.num_rows,
            "num_cols": h.num_cols,
            "nnz": csr.nnz(),
            "tm": tm,
            "tk": tk,
            "num_panels": h.num_panels(),
            "num_blocks": h.num_blocks(),
            "active_bricks": bricks,
            "packed_bytes": h.packed_blocks.len(),
            "convert_wall_time": elapsed,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        println!(
            "wrote {}: {}x{}, nnz {}, {} panels, {} blocks, {} active bricks, {} packed bytes ({:.3}s)",
            output.display(),
            h.num_rows,
            h.num_cols,
            csr.nnz(),
            h.num_panels(),
            h.num_blocks(),
            bricks,
            h.packed_blocks.len(),
            elapsed
        );
    }
    Ok(())
}

/// Loads either input format; HRPB files are recognized by their magic bytes.
fn load_matrix(path: &Path) -> Result<(Hrpb, CsrMatrix), CliError> {
    let mut head = [0u8; 8];
    let is_hrpb = File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
        .map(|mut f| matches!(f.read(&mut head), Ok(8) if head == HRPB_MAGIC))?;
    if is_hrpb {
        let h = load_hrpb(path)?;
        let csr = hrpb_to_csr(&h)?;
        Ok((h, csr))
    } else {
        let csr = read_matrix_market(path)?.to_csr();
        let h = csr_to_hrpb(&csr, HrpbConfig::default())?;
        Ok((h, csr))
    }
}

fn cmd_spmm(matrix: &Path, n: usize, seed: u64, verify: bool, json: bool) -> Result<(), CliError> {
    let cfg = ExecConfig::new(n)?;
    let (h, csr) = load_matrix(matrix)?;
    let b = DenseMatrix::seeded_uniform(h.num_cols, n, seed);

    let start = Instant::now();
    let (c, stats) = spmm_hrpb(&h, &b, &cfg)?;
    let spmm_time = start.elapsed().as_secs_f64();

    let report = if verify {
        Some(compare_outputs(&spmm_reference(&csr, &b)?, &c))
    } else {
        None
    };

    if json {
        let doc = json!({
            "matrix": {
                "path": matrix.display().to_string(),
                "num_rows": h.num_rows,
                "num_cols": h.num_cols,
                "nnz": csr.nnz(),
                "tm": h.config.tm,
                "tk": h.config.tk,
            },
            "n": n,
            "n_padded": cfg.n_padded(),
            "warps_per_block": cfg.warps_per_block(),
            "seed": seed,
            "spmm_wall_time": spmm_time,
            "stats": stats,
            "verify": report,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        println!(
            "spmm: {}x{} (nnz {}) times {}x{} B (seed {seed}) in {:.3}s",
            h.num_rows,
            h.num_cols,
            csr.nnz(),
            h.num_cols,
            n,
            spmm_time
        );
        println!(
            "  mma_count {}  b_fragment_loads {}  b_staging_elements {}  decode_ops {}  a_block_bytes {}",
            stats.mma_count,
            stats.b_fragment_loads,
            stats.b_staging_elements,
            stats.decode_ops,
            stats.a_block_bytes
        );
        if let Some(r) = &report {
            println!(
                "  verify: {} (max_abs_err {:.3e}, max_rel_err {:.3e})",
                if r.pass { "pass" } else { "FAIL" },
                r.max_abs_err,
                r.max_rel_err
            );
        }
    }
    if let Some(r) = report {
        if !r.pass {
            return Err(CliError::Data(format!(
                "verification failed: max_rel_err {:.3e}",
                r.max_rel_err
            )));
        }
    }
    Ok(())
}

fn cmd_classify(input: &Path, json: bool) -> Result<(), CliError> {
    let csr = read_matrix_market(input)?.to_csr();
    let h = csr_to_hrpb(&csr, HrpbConfig::default())?;
    let report = model_report(&h)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    } else {
        println!(
            "{}x{}: nnz {}, active bricks {}, active brick columns {}",
            csr.num_rows,
            csr.num_cols,
            report.nnz,
            report.num_active_bricks,
            report.num_active_brick_columns
        );
        println!(
            "alpha {:.6}  beta {:.6}  oi_shmem {:.3}  shmem_trans_b {:.3}  synergy {}",
            report.alpha, report.beta, report.oi_shmem, report.shmem_trans_b, report.synergy
        );
    }
    Ok(())
}
