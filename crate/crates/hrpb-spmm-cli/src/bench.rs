//! Corpus sweep: convert, classify, and run emulated SpMM with oracle
//! verification over every .mtx file in a directory, one CSV row per
//! (matrix, n) pair.
//!
//! Per-matrix failures are reported on stderr and do not abort the sweep.
//! Rows are sorted by (matrix_name, n), so apart from the two wall-time
//! columns the CSV is identical at any --jobs level.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use hrpb_spmm::emulator::{compare_outputs, spmm_hrpb, spmm_reference, ExecConfig};
use hrpb_spmm::hrpb::{csr_to_hrpb, HrpbConfig};
use hrpb_spmm::model::{model_report, Synergy};
use hrpb_spmm::sparse_io::{read_matrix_market, DenseMatrix};

use crate::CliError;

/// Seed for every generated B operand, so sweeps are reproducible.
const BENCH_SEED: u64 = 0;

pub const CSV_HEADER: &str = "matrix_name,M,K,nnz,n,alpha,beta,synergy,oi_shmem,\
mma_count,b_fragment_loads,convert_wall_time,spmm_wall_time,verify_pass";

#[derive(Serialize)]
struct BenchRecord {
    matrix_name: String,
    m: usize,
    k: usize,
    nnz: u64,
    n: usize,
    alpha: f64,
    beta: f64,
    synergy: Synergy,
    oi_shmem: f64,
    mma_count: u64,
    b_fragment_loads: u64,
    convert_wall_time: f64,
    spmm_wall_time: f64,
    verify_pass: bool,
}

impl BenchRecord {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&self.matrix_name),
            self.m,
            self.k,
            self.nnz,
            self.n,
            self.alpha,
            self.beta,
            self.synergy,
            self.oi_shmem,
            self.mma_count,
            self.b_fragment_loads,
            self.convert_wall_time,
            self.spmm_wall_time,
            self.verify_pass
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn parse_n_list(list: &str) -> Result<Vec<usize>, CliError> {
    let ns: Vec<usize> = list
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| CliError::Usage(format!("bad dense width '{t}' in --n list")))
        })
        .collect::<Result<_, _>>()?;
    if ns.is_empty() {
        return Err(CliError::Usage("--n list is empty".into()));
    }
    Ok(ns)
}

pub fn cmd_bench(
    dir: &Path,
    n_list: &str,
    csv_path: &Path,
    jobs: usize,
    json: bool,
) -> Result<(), CliError> {
    let ns = parse_n_list(n_list)?;
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "mtx"))
        .collect();
    files.sort();

    let mut csv = fs::File::create(csv_path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", csv_path.display())))?;
    writeln!(csv, "{CSV_HEADER}").map_err(|e| CliError::Data(e.to_string()))?;

    if files.is_empty() {
        eprintln!("warning: no .mtx files in {}", dir.display());
        if json {
            println!("{}", serde_json::json!({"records": [], "failures": []}));
        }
        return Ok(());
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot build worker pool: {e}")))?;
    let results: Vec<Result<Vec<BenchRecord>, (String, String)>> =
        pool.install(|| files.par_iter().map(|path| bench_one(path, &ns)).collect());

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(rows) => records.extend(rows),
            Err(fail) => failures.push(fail),
        }
    }
    records.sort_by(|a, b| (&a.matrix_name, a.n).cmp(&(&b.matrix_name, b.n)));
    for record in &records {
        writeln!(csv, "{}", record.to_csv()).map_err(|e| CliError::Data(e.to_string()))?;
    }
    for (name, err) in &failures {
        eprintln!("FAIL {name}: {err}");
    }
    if json {
        let doc = serde_json::json!({
            "records": records,
            "failures": failures
                .iter()
                .map(|(name, err)| serde_json::json!({"matrix_name": name, "error": err}))
                .collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        println!(
            "bench: {} rows over {} matrices ({} failed) -> {}",
            records.len(),
            files.len() - failures.len(),
            failures.len(),
            csv_path.display()
        );
    }
    Ok(())
}

fn bench_one(path: &Path, ns: &[usize]) -> Result<Vec<BenchRecord>, (String, String)> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let fail = |e: String| (name.clone(), e);

    let csr = read_matrix_market(path)
        .map_err(|e| fail(e.to_string()))?
        .to_csr();
    let start = Instant::now();
    let h = csr_to_hrpb(&csr, HrpbConfig::default()).map_err(|e| fail(e.to_string()))?;
    let convert_time = start.elapsed().as_secs_f64();
    let report = model_report(&h).map_err(|e| fail(e.to_string()))?;

    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let cfg = ExecConfig::new(n).map_err(|e| fail(e.to_string()))?;
        let b = DenseMatrix::seeded_uniform(csr.num_cols, n, BENCH_SEED);
        let start = Instant::now();
        let (c, stats) = spmm_hrpb(&h, &b, &cfg).map_err(|e| fail(e.to_string()))?;
        let spmm_time = start.elapsed().as_secs_f64();
        let reference = spmm_reference(&csr, &b).map_err(|e| fail(e.to_string()))?;
        let verify = compare_outputs(&reference, &c);
        rows.push(BenchRecord {
            matrix_name: name.clone(),
            m: csr.num_rows,
            k: csr.num_cols,
            nnz: report.nnz,
            n,
            alpha: report.alpha,
            beta: report.beta,
            synergy: report.synergy,
            oi_shmem: report.oi_shmem,
            mma_count: stats.mma_count,
            b_fragment_loads: stats.b_fragment_loads,
            convert_wall_time: convert_time,
            spmm_wall_time: spmm_time,
            verify_pass: verify.pass,
        });
    }
    Ok(rows)
}
