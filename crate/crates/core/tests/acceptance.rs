//! Acceptance suite: one test per release criterion, each printing a
//! PASS/SKIP line. Run with
//! `cargo test -p scseg --test acceptance -- --nocapture`.

// The reference oracle below is written as plain index loops on purpose; it
// must stay obviously independent of the library's vector kernels.
#![allow(clippy::needless_range_loop)]

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scseg::basis::{zigzag_order, BasisMatrix, ScaledBasis};
use scseg::eval::precision_recall;
use scseg::io::GrayImage;
use scseg::segment::{segment_image, PathCounts, SegmenterConfig};
use scseg::solver::{kkt_residual, solve_lasso, SolverState};
use scseg::synth::{blockwise_smooth, smooth_with_strokes};

/// Independent LASSO reference: cyclic coordinate descent on the dense
/// matrix, run until its own optimality measure drops below `tol`.
struct CoordinateDescentOracle {
    g: Vec<f64>, // row-major, rows x cols
    rows: usize,
    cols: usize,
    col_norms: Vec<f64>,
}

impl CoordinateDescentOracle {
    fn new(g: Vec<f64>, rows: usize, cols: usize) -> Self {
        let col_norms = (0..cols)
            .map(|j| (0..rows).map(|i| g[i * cols + j] * g[i * cols + j]).sum())
            .collect();
        CoordinateDescentOracle {
            g,
            rows,
            cols,
            col_norms,
        }
    }

    fn column_dot(&self, j: usize, v: &[f64]) -> f64 {
        (0..self.rows)
            .map(|i| self.g[i * self.cols + j] * v[i])
            .sum()
    }

    fn solve(&self, f: &[f64], lambda: f64, tol: f64, max_sweeps: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.cols];
        let mut residual = f.to_vec();
        for _ in 0..max_sweeps {
            for j in 0..self.cols {
                let d = self.col_norms[j];
                if d == 0.0 {
                    continue;
                }
                let rho = self.column_dot(j, &residual) + d * x[j];
                let new = soft(rho, lambda) / d;
                let delta = new - x[j];
                if delta != 0.0 {
                    for i in 0..self.rows {
                        residual[i] -= delta * self.g[i * self.cols + j];
                    }
                    x[j] = new;
                }
            }
            if self.kkt(&x, &residual, lambda) <= tol {
                break;
            }
        }
        x
    }

    fn kkt(&self, x: &[f64], residual: &[f64], lambda: f64) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.cols {
            let grad = self.column_dot(j, residual);
            let violation = if x[j] != 0.0 {
                (grad - lambda * x[j].signum()).abs()
            } else {
                (grad.abs() - lambda).max(0.0)
            };
            worst = worst.max(violation);
        }
        worst
    }

    fn objective(&self, f: &[f64], x: &[f64], lambda: f64) -> f64 {
        let mut fit = 0.0;
        for i in 0..self.rows {
            let mut gx = 0.0;
            for j in 0..self.cols {
                gx += self.g[i * self.cols + j] * x[j];
            }
            let d = f[i] - gx;
            fit += d * d;
        }
        0.5 * fit + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    }
}

fn soft(x: f64, kappa: f64) -> f64 {
    if x > kappa {
        x - kappa
    } else if x < -kappa {
        x + kappa
    } else {
        0.0
    }
}

#[test]
fn criterion_1_solver_matches_coordinate_descent_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut instances = 0;
    while instances < 50 {
        let n = if instances % 2 == 0 { 2 } else { 4 };
        let k = 1 + instances % 4;
        let basis = BasisMatrix::build(n, k).unwrap();
        let scaled = ScaledBasis::new(&basis, 1.0).unwrap();
        let state = SolverState::new(scaled, 1.0).unwrap();
        let system = state.system();
        let f: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..255.0)).collect();
        let lambda = 0.1 * scseg::solver::lambda_max(system, &f);

        let admm = solve_lasso(&f, &state, lambda, 2000).unwrap();
        let oracle = CoordinateDescentOracle::new(system.to_dense(), n * n, system.width());
        let reference = oracle.solve(&f, lambda, 1e-10, 100_000);

        let obj_admm = oracle.objective(&f, &admm.stacked(), lambda);
        let obj_ref = oracle.objective(&f, &reference, lambda);
        let gap = (obj_admm - obj_ref).abs() / obj_ref.max(1.0);
        assert!(
            gap <= 1e-6,
            "instance {instances} (n={n}, k={k}): objective gap {gap:e}"
        );

        let kkt = kkt_residual(&admm, system, &f, lambda).unwrap();
        assert!(
            kkt <= 1e-3 * lambda,
            "instance {instances} (n={n}, k={k}): kkt {kkt:e} vs lambda {lambda:e}"
        );
        instances += 1;
    }
    println!(
        "criterion 1 PASS: 50 instances match the coordinate-descent oracle \
         (objective gap <= 1e-6, kkt <= 1e-3*lambda) in {:?}",
        start.elapsed()
    );
}

#[test]
fn criterion_2_basis_orthonormal_and_zigzag_prefix_pinned() {
    let start = Instant::now();
    for n in [2usize, 4, 8, 16, 64] {
        let k = (n * n).min(16);
        let basis = BasisMatrix::build(n, k).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = basis
                    .column(i)
                    .iter()
                    .zip(basis.column(j))
                    .map(|(a, b)| a * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        assert!(worst <= 1e-10, "n={n}, k={k}: |P^T P - I| = {worst:e}");
    }
    let expected: Vec<(usize, usize)> = vec![
        (0, 0),
        (0, 1),
        (1, 0),
        (2, 0),
        (1, 1),
        (0, 2),
        (0, 3),
        (1, 2),
        (2, 1),
        (3, 0),
    ];
    let got: Vec<(usize, usize)> = zigzag_order(64, 10)
        .unwrap()
        .iter()
        .map(|p| (p.u, p.v))
        .collect();
    assert_eq!(got, expected);
    println!(
        "criterion 2 PASS: orthonormality <= 1e-10 for n in {{2,4,8,16,64}} and the \
         10-term zig-zag prefix is pinned ({:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_3_structured_solve_matches_dense_factorization() {
    let start = Instant::now();
    let basis = BasisMatrix::build(16, 10).unwrap();
    let scaled = ScaledBasis::new(&basis, 0.01).unwrap();
    let structured = SolverState::new(scaled.clone(), 1.0).unwrap();
    let dense = SolverState::new_dense(scaled, 1.0).unwrap();
    let width = structured.system().width();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..20 {
        let rhs: Vec<f64> = (0..width)
            .map(|_| rng.random_range(-1000.0..1000.0))
            .collect();
        let a = structured.apply_inverse(&rhs);
        let b = dense.apply_inverse(&rhs);
        let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        let den: f64 = b.iter().map(|v| v * v).sum();
        let rel = (num / den).sqrt();
        assert!(rel <= 1e-8, "trial {trial}: relative error {rel:e}");
    }
    println!(
        "criterion 3 PASS: reduced y-update matches dense factorization within 1e-8 \
         on 20 right-hand sides at n=16, k=10 ({:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_4_synthetic_end_to_end_precision_recall() {
    let start = Instant::now();
    let config = SegmenterConfig::default();
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for seed in 0..20u64 {
        let synth = smooth_with_strokes(128, 128, 14, 60.0, seed);
        let seg = segment_image(&synth.image, &config).unwrap();
        let report = precision_recall(&seg.mask, &synth.truth).unwrap();
        println!(
            "  image {seed:2}: precision {:.3} recall {:.3} (tp={} fp={} fn={})",
            report.precision, report.recall, report.tp, report.fp, report.fn_
        );
        precisions.push(report.precision);
        recalls.push(report.recall);
    }
    let mean_p = precisions.iter().sum::<f64>() / precisions.len() as f64;
    let mean_r = recalls.iter().sum::<f64>() / recalls.len() as f64;
    assert!(mean_r >= 0.90, "mean recall {mean_r:.4} < 0.90");
    assert!(mean_p >= 0.80, "mean precision {mean_p:.4} < 0.80");
    println!(
        "criterion 4 PASS: 20 synthetic images, mean precision {mean_p:.3} (>= 0.80), \
         mean recall {mean_r:.3} (>= 0.90) in {:?}",
        start.elapsed()
    );
}

#[test]
fn criterion_5_reference_dataset_when_available() {
    let root = match dataset_root() {
        Some(root) => root,
        None => {
            println!(
                "criterion 5 SKIP: reference dataset not present (set SCSEG_DATASET_DIR \
                 to a directory with images/ and truth/); criterion 4 governs"
            );
            return;
        }
    };
    let images_dir = root.join("images");
    let truth_dir = root.join("truth");
    let mut names: Vec<String> = std::fs::read_dir(&images_dir)
        .expect("dataset images directory")
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert!(!names.is_empty(), "dataset directory contains no images");
    let config = SegmenterConfig::default();
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for name in &names {
        let image = scseg::io::load_image(images_dir.join(name)).expect("dataset image loads");
        let truth = scseg::io::load_mask(truth_dir.join(name)).expect("dataset truth loads");
        let seg = segment_image(&image, &config).unwrap();
        let report = precision_recall(&seg.mask, &truth).unwrap();
        precisions.push(report.precision);
        recalls.push(report.recall);
    }
    let mean_p = precisions.iter().sum::<f64>() / precisions.len() as f64;
    let mean_r = recalls.iter().sum::<f64>() / recalls.len() as f64;
    assert!(
        (mean_p - 0.64).abs() <= 0.05,
        "aggregate precision {mean_p:.4} outside 0.64 +/- 0.05"
    );
    assert!(
        (mean_r - 0.95).abs() <= 0.03,
        "aggregate recall {mean_r:.4} outside 0.95 +/- 0.03"
    );
    println!(
        "criterion 5 PASS: {} blocks, aggregate precision {mean_p:.3}, recall {mean_r:.3}",
        names.len()
    );
}

fn dataset_root() -> Option<PathBuf> {
    let candidate = std::env::var_os("SCSEG_DATASET_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../dataset"));
    (candidate.join("images").is_dir() && candidate.join("truth").is_dir()).then_some(candidate)
}

#[test]
fn criterion_6_fast_paths_skip_the_solver() {
    let config = SegmenterConfig::default();

    let constant = GrayImage::from_fn(1024, 1024, |_, _| 200.0).unwrap();
    let start = Instant::now();
    let seg = segment_image(&constant, &config).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(
        seg.counts,
        PathCounts {
            flat: 256,
            least_squares: 0,
            sparse: 0
        },
        "constant image must take only the flat path"
    );
    assert_eq!(seg.mask.foreground_count(), 0);
    assert!(
        elapsed.as_millis() < 50,
        "constant 1024x1024 took {elapsed:?}, budget 50 ms"
    );

    let smooth = blockwise_smooth(128, 128, config.n, config.k, 99);
    let seg = segment_image(&smooth, &config).unwrap();
    assert_eq!(
        seg.counts,
        PathCounts {
            flat: 0,
            least_squares: 4,
            sparse: 0
        },
        "pure-smooth image must take only the least-squares path"
    );
    assert_eq!(seg.mask.foreground_count(), 0);
    println!(
        "criterion 6 PASS: constant 1024x1024 all-background via flat path in {elapsed:?} \
         (< 50 ms); exact-basis image takes only the least-squares path"
    );
}

#[test]
fn criterion_7_cli_segment_is_byte_deterministic() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("determinism");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let synth = smooth_with_strokes(192, 128, 25, 60.0, 17);
    let input = dir.join("input.pgm");
    scseg::io::save_gray(&input, &synth.image).unwrap();

    let run = |out: &Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_scseg"))
            .args([
                "segment",
                "--input",
                input.to_str().unwrap(),
                "--output",
                out.to_str().unwrap(),
            ])
            .output()
            .expect("binary runs");
        assert_eq!(status.status.code(), Some(0));
    };
    let out_a = dir.join("a.pgm");
    let out_b = dir.join("b.pgm");
    run(&out_a);
    run(&out_b);
    let bytes_a = std::fs::read(&out_a).unwrap();
    let bytes_b = std::fs::read(&out_b).unwrap();
    assert_eq!(
        bytes_a, bytes_b,
        "two identical runs produced different mask bytes"
    );
    println!(
        "criterion 7 PASS: two `segment` runs with internal parallelism produced \
         byte-identical masks ({} bytes)",
        bytes_a.len()
    );
}
