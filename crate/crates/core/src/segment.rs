//! Three-step block segmentation.
//!
//! The image is split into non-overlapping `n x n` blocks. Each block takes
//! the cheapest path that can classify it:
//!
//! 1. entirely flat blocks are deferred and later declared background or
//!    foreground from their neighbors' background colors;
//! 2. blocks whose pixels are all predicted by a least-squares fit of the
//!    `k` DCT bases within `eps3` are declared background outright;
//! 3. everything else is decomposed into smooth + sparse layers by the
//!    solver, and each pixel is background exactly when the smooth model
//!    reproduces it within `eps1`.
//!
//! Pass 1 (steps 1-3 per block) is independent across blocks and runs on a
//! rayon pool when the `rayon` feature is enabled; pass 2 (flat-block
//! resolution) is a sequential raster scan, so results never depend on
//! scheduling.

use std::sync::OnceLock;

use crate::basis::{BasisMatrix, ScaledBasis};
use crate::error::{Error, Result};
use crate::io::GrayImage;
use crate::linalg::max_abs;
use crate::solver::{solve_lasso, Decomposition, SolverState};

#[cfg(feature = "rayon")]
use rayon::prelude::*;

/// One `n x n` luminance block in the project-wide row-major vectorization
/// (`i = row * n + col`).
#[derive(Debug, Clone)]
pub struct Block {
    n: usize,
    origin: (usize, usize),
    pixels: Vec<f64>,
}

impl Block {
    pub fn new(n: usize, origin: (usize, usize), pixels: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("block side must be at least 1"));
        }
        if pixels.len() != n * n {
            return Err(Error::invalid(format!(
                "block has {} pixels, expected {}",
                pixels.len(),
                n * n
            )));
        }
        if pixels
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0 || *v > 255.0)
        {
            return Err(Error::invalid(
                "block values must be finite and within [0, 255]",
            ));
        }
        Ok(Block { n, origin, pixels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// (block-row, block-col) position in the block grid.
    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }
}

/// How the per-block regularization weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// `lambda = factor * max |f_i|` of the block. Keeps the threshold in
    /// luminance units so the sparse layer captures strokes without biasing
    /// the smooth fit.
    Relative(f64),
    /// A fixed lambda for every block.
    Absolute(f64),
}

impl LambdaRule {
    fn lambda_for(&self, pixels: &[f64]) -> f64 {
        match *self {
            // A block of zeros admits any lambda; keep it positive.
            LambdaRule::Relative(factor) => (factor * max_abs(pixels)).max(1e-12),
            LambdaRule::Absolute(value) => value,
        }
    }
}

/// Segmentation parameters. `Default` matches the reference parameterization:
/// 64x64 blocks, 10 bases, q = 1/100, eps1 = eps2 = 10, eps3 = 3, rho = 1,
/// 100 solver iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterConfig {
    /// Block side length in pixels.
    pub n: usize,
    /// Number of retained DCT bases.
    pub k: usize,
    /// Trade-off weight folded into the scaled basis.
    pub q: f64,
    /// Per-pixel background threshold for the sparse path.
    pub eps1: f64,
    /// Flat-block neighbor color tolerance.
    pub eps2: f64,
    /// Least-squares max-error threshold.
    pub eps3: f64,
    pub lambda_rule: LambdaRule,
    pub rho: f64,
    pub iterations: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            n: 64,
            k: 10,
            q: 0.01,
            eps1: 10.0,
            eps2: 10.0,
            eps3: 3.0,
            lambda_rule: LambdaRule::Relative(0.1),
            rho: 1.0,
            iterations: 100,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("block size must be at least 1"));
        }
        if self.k == 0 || self.k > self.n * self.n {
            return Err(Error::invalid(format!(
                "basis count must satisfy 1 <= k <= n^2, got k={} for n={}",
                self.k, self.n
            )));
        }
        if self.q <= 0.0 || !self.q.is_finite() {
            return Err(Error::invalid("q must be positive"));
        }
        for (name, v) in [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("eps3", self.eps3),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be nonnegative")));
            }
        }
        match self.lambda_rule {
            LambdaRule::Relative(f) if f <= 0.0 || !f.is_finite() => {
                return Err(Error::invalid("lambda factor must be positive"));
            }
            LambdaRule::Absolute(v) if v <= 0.0 || !v.is_finite() => {
                return Err(Error::invalid("lambda must be positive"));
            }
            _ => {}
        }
        if self.rho <= 0.0 || !self.rho.is_finite() {
            return Err(Error::invalid("rho must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iteration count must be at least 1"));
        }
        Ok(())
    }
}

/// Which path classified a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockPath {
    Flat,
    LeastSquares,
    Sparse,
}

/// Per-block outcome. For `Flat` blocks the mask and background color are
/// placeholders until [`resolve_flat_blocks`] runs.
#[derive(Debug, Clone)]
pub struct BlockResult {
    /// Per-pixel foreground bits in block vectorization order.
    pub mask: Vec<bool>,
    pub path: BlockPath,
    /// Mean luminance of the background-classified pixels; `None` when the
    /// block has no background pixel.
    pub background_color: Option<f64>,
    /// The constant value of a flat block; `None` on other paths.
    pub flat_value: Option<f64>,
}

/// Whole-image binary mask, `true` = foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask dimensions must be nonzero"));
        }
        if bits.len() != width * height {
            return Err(Error::invalid(format!(
                "mask has {} bits, expected {}",
                bits.len(),
                width * height
            )));
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Number of blocks classified by each path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PathCounts {
    pub flat: usize,
    pub least_squares: usize,
    pub sparse: usize,
}

/// Segmentation output: the cropped mask plus per-path block counts.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub mask: Mask,
    pub counts: PathCounts,
}

/// True exactly when every pixel of the block has the same value.
pub fn is_flat(block: &Block) -> bool {
    let first = block.pixels[0];
    block.pixels.iter().all(|&v| v == first)
}

/// Least-squares fit of the block against the orthonormal basis:
/// `alpha = P^T f`, and the maximum absolute pixel error of `P alpha`.
pub fn least_squares_fit(block: &Block, basis: &BasisMatrix) -> (Vec<f64>, f64) {
    assert_eq!(
        block.pixels.len(),
        basis.n() * basis.n(),
        "basis does not match block"
    );
    let alpha = basis.project_coeffs(&block.pixels);
    let fitted = basis.reconstruct(&alpha);
    let max_err = block
        .pixels
        .iter()
        .zip(&fitted)
        .fold(0.0_f64, |m, (f, p)| m.max((f - p).abs()));
    (alpha, max_err)
}

/// Runs the sparse-smooth decomposition on the block with the configured
/// lambda rule.
pub fn sparse_decompose(
    block: &Block,
    state: &SolverState,
    config: &SegmenterConfig,
) -> Result<Decomposition> {
    let lambda = config.lambda_rule.lambda_for(&block.pixels);
    solve_lasso(&block.pixels, state, lambda, config.iterations)
}

/// Pixel `i` is background exactly when `|f_i - smooth_i| < eps1`.
/// Returns foreground bits.
pub fn classify_pixels(block: &Block, smooth: &[f64], eps1: f64) -> Vec<bool> {
    assert_eq!(
        block.pixels.len(),
        smooth.len(),
        "smooth layer does not match block"
    );
    block
        .pixels
        .iter()
        .zip(smooth)
        .map(|(f, s)| (f - s).abs() >= eps1)
        .collect()
}

/// Applies the three-step algorithm to a single block. Flat blocks are
/// returned with `path = Flat` and a placeholder mask; call
/// [`resolve_flat_blocks`] on the full grid to finalize them.
pub fn segment_block(
    block: &Block,
    state: &SolverState,
    basis: &BasisMatrix,
    config: &SegmenterConfig,
) -> Result<BlockResult> {
    segment_block_with(block, basis, config, || state)
}

fn segment_block_with<'a>(
    block: &Block,
    basis: &BasisMatrix,
    config: &SegmenterConfig,
    solver: impl FnOnce() -> &'a SolverState,
) -> Result<BlockResult> {
    let n2 = block.pixels.len();
    if is_flat(block) {
        return Ok(BlockResult {
            mask: vec![false; n2],
            path: BlockPath::Flat,
            background_color: None,
            flat_value: Some(block.pixels[0]),
        });
    }
    let (_, max_err) = least_squares_fit(block, basis);
    if max_err < config.eps3 {
        return Ok(BlockResult {
            mask: vec![false; n2],
            path: BlockPath::LeastSquares,
            background_color: Some(block.mean()),
            flat_value: None,
        });
    }
    let decomp = sparse_decompose(block, solver(), config)?;
    let mask = classify_pixels(block, &decomp.smooth, config.eps1);
    let background_color = mean_where(&block.pixels, &mask, false);
    Ok(BlockResult {
        mask,
        path: BlockPath::Sparse,
        background_color,
        flat_value: None,
    })
}

fn mean_where(pixels: &[f64], mask: &[bool], value: bool) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, &m) in pixels.iter().zip(mask) {
        if m == value {
            sum += p;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Grid of per-block results in block-row-major order.
#[derive(Debug, Clone)]
pub struct BlockGrid {
    rows: usize,
    cols: usize,
    cells: Vec<BlockResult>,
}

impl BlockGrid {
    pub fn new(rows: usize, cols: usize, cells: Vec<BlockResult>) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(Error::invalid(format!(
                "grid has {} cells, expected {}",
                cells.len(),
                rows * cols
            )));
        }
        Ok(BlockGrid { rows, cols, cells })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell(&self, row: usize, col: usize) -> &BlockResult {
        &self.cells[row * self.cols + col]
    }

    pub fn cells(&self) -> &[BlockResult] {
        &self.cells
    }
}

/// Finalizes flat blocks in raster order. A flat block becomes background
/// when some 8-neighbor exposes a background color within `eps2` of its
/// constant value; blocks resolved as background immediately expose that
/// value to later flat blocks in the same pass. A flat block with no
/// resolved neighbor information at all (an entirely flat image, or a single
/// isolated block) defaults to background; a flat block whose resolved
/// neighbors are all foreground or all too far in color becomes foreground.
pub fn resolve_flat_blocks(grid: &mut BlockGrid, eps2: f64) {
    let rows = grid.rows;
    let cols = grid.cols;
    for index in 0..grid.cells.len() {
        if grid.cells[index].path != BlockPath::Flat {
            continue;
        }
        let value = grid.cells[index]
            .flat_value
            .expect("flat block carries its constant value");
        let row = index / cols;
        let col = index % cols;
        let mut close_background = false;
        let mut resolved_neighbor = false;
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (nr, nc) = (row as i64 + dr, col as i64 + dc);
                if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                    continue;
                }
                let n_index = nr as usize * cols + nc as usize;
                let neighbor = &grid.cells[n_index];
                // Flat neighbors later in raster order are not yet resolved.
                let resolved = neighbor.path != BlockPath::Flat || n_index < index;
                if !resolved {
                    continue;
                }
                resolved_neighbor = true;
                if let Some(bg) = neighbor.background_color {
                    if (bg - value).abs() < eps2 {
                        close_background = true;
                    }
                }
            }
        }
        let background = close_background || !resolved_neighbor;
        let cell = &mut grid.cells[index];
        if background {
            cell.mask.fill(false);
            cell.background_color = Some(value);
        } else {
            cell.mask.fill(true);
            cell.background_color = None;
        }
    }
}

/// Splits the image into `n x n` blocks, padding by edge replication when
/// the dimensions are not multiples of `n`.
pub(crate) fn extract_blocks(image: &GrayImage, n: usize) -> (usize, usize, Vec<Block>) {
    let block_rows = image.height().div_ceil(n);
    let block_cols = image.width().div_ceil(n);
    let mut blocks = Vec::with_capacity(block_rows * block_cols);
    for br in 0..block_rows {
        for bc in 0..block_cols {
            let mut pixels = Vec::with_capacity(n * n);
            for r in 0..n {
                let src_row = (br * n + r).min(image.height() - 1);
                for c in 0..n {
                    let src_col = (bc * n + c).min(image.width() - 1);
                    pixels.push(image.pixel(src_row, src_col));
                }
            }
            blocks.push(Block {
                n,
                origin: (br, bc),
                pixels,
            });
        }
    }
    (block_rows, block_cols, blocks)
}

struct BlockContext<'a> {
    basis: &'a BasisMatrix,
    config: &'a SegmenterConfig,
    scaled: &'a ScaledBasis,
    solver: OnceLock<SolverState>,
}

impl BlockContext<'_> {
    fn solver(&self) -> &SolverState {
        self.solver.get_or_init(|| {
            SolverState::new(self.scaled.clone(), self.config.rho)
                .expect("config validated before use")
        })
    }
}

fn map_blocks(
    blocks: &[Block],
    ctx: &BlockContext<'_>,
    parallel: bool,
) -> Result<Vec<BlockResult>> {
    #[cfg(feature = "rayon")]
    {
        if parallel {
            return blocks
                .par_iter()
                .map(|b| segment_block_with(b, ctx.basis, ctx.config, || ctx.solver()))
                .collect();
        }
    }
    #[cfg(not(feature = "rayon"))]
    let _ = parallel;
    blocks
        .iter()
        .map(|b| segment_block_with(b, ctx.basis, ctx.config, || ctx.solver()))
        .collect()
}

/// Segments a whole image. Block classification runs in parallel when the
/// `rayon` feature is enabled; the output is identical either way.
pub fn segment_image(image: &GrayImage, config: &SegmenterConfig) -> Result<Segmentation> {
    segment_image_inner(image, config, true)
}

/// Sequential variant of [`segment_image`], available regardless of the
/// `rayon` feature. Produces bit-identical output.
pub fn segment_image_serial(image: &GrayImage, config: &SegmenterConfig) -> Result<Segmentation> {
    segment_image_inner(image, config, false)
}

fn segment_image_inner(
    image: &GrayImage,
    config: &SegmenterConfig,
    parallel: bool,
) -> Result<Segmentation> {
    config.validate()?;
    let basis = BasisMatrix::build(config.n, config.k)?;
    let scaled = ScaledBasis::new(&basis, config.q)?;
    let ctx = BlockContext {
        basis: &basis,
        config,
        scaled: &scaled,
        solver: OnceLock::new(),
    };
    let (rows, cols, blocks) = extract_blocks(image, config.n);
    let results = map_blocks(&blocks, &ctx, parallel)?;
    let mut grid = BlockGrid::new(rows, cols, results)?;
    resolve_flat_blocks(&mut grid, config.eps2);

    let mut counts = PathCounts::default();
    for cell in grid.cells() {
        match cell.path {
            BlockPath::Flat => counts.flat += 1,
            BlockPath::LeastSquares => counts.least_squares += 1,
            BlockPath::Sparse => counts.sparse += 1,
        }
    }

    let n = config.n;
    let mut bits = vec![false; image.width() * image.height()];
    for (index, cell) in grid.cells().iter().enumerate() {
        let br = index / cols;
        let bc = index % cols;
        for r in 0..n {
            let row = br * n + r;
            if row >= image.height() {
                break;
            }
            for c in 0..n {
                let col = bc * n + c;
                if col >= image.width() {
                    break;
                }
                bits[row * image.width() + col] = cell.mask[r * n + c];
            }
        }
    }
    Ok(Segmentation {
        mask: Mask::new(image.width(), image.height(), bits)?,
        counts,
    })
}

/// The two layers produced by [`decompose_image`].
#[derive(Debug, Clone)]
pub struct LayerImages {
    /// Smooth reconstruction, clamped to `[0, 255]`.
    pub smooth: GrayImage,
    /// Magnitude of the sparse layer, clamped to `[0, 255]`.
    pub sparse: GrayImage,
}

/// Decomposes an image into its smooth and sparse layers for inspection.
/// Blocks that never reach the solver contribute their reconstruction to the
/// smooth layer and zeros to the sparse layer.
pub fn decompose_image(image: &GrayImage, config: &SegmenterConfig) -> Result<LayerImages> {
    config.validate()?;
    let basis = BasisMatrix::build(config.n, config.k)?;
    let scaled = ScaledBasis::new(&basis, config.q)?;
    let ctx = BlockContext {
        basis: &basis,
        config,
        scaled: &scaled,
        solver: OnceLock::new(),
    };
    let (_, cols, blocks) = extract_blocks(image, config.n);

    let layer = |block: &Block| -> Result<(Vec<f64>, Vec<f64>)> {
        let n2 = block.pixels.len();
        if is_flat(block) {
            return Ok((block.pixels.clone(), vec![0.0; n2]));
        }
        let (alpha, max_err) = least_squares_fit(block, &basis);
        if max_err < config.eps3 {
            return Ok((basis.reconstruct(&alpha), vec![0.0; n2]));
        }
        let decomp = sparse_decompose(block, ctx.solver(), config)?;
        let smooth = decomp.smooth.iter().map(|v| v.clamp(0.0, 255.0)).collect();
        let sparse = decomp
            .sparse
            .iter()
            .map(|v| v.abs().clamp(0.0, 255.0))
            .collect();
        Ok((smooth, sparse))
    };

    let layers: Vec<(Vec<f64>, Vec<f64>)> = {
        #[cfg(feature = "rayon")]
        {
            blocks.par_iter().map(layer).collect::<Result<_>>()?
        }
        #[cfg(not(feature = "rayon"))]
        {
            blocks.iter().map(layer).collect::<Result<_>>()?
        }
    };

    let n = config.n;
    let mut smooth = vec![0.0; image.width() * image.height()];
    let mut sparse = vec![0.0; image.width() * image.height()];
    for (index, (sm, sp)) in layers.iter().enumerate() {
        let br = index / cols;
        let bc = index % cols;
        for r in 0..n {
            let row = br * n + r;
            if row >= image.height() {
                break;
            }
            for c in 0..n {
                let col = bc * n + c;
                if col >= image.width() {
                    break;
                }
                smooth[row * image.width() + col] = sm[r * n + c];
                sparse[row * image.width() + col] = sp[r * n + c];
            }
        }
    }
    Ok(LayerImages {
        smooth: GrayImage::new(image.width(), image.height(), smooth)?,
        sparse: GrayImage::new(image.width(), image.height(), sparse)?,
    })
}
