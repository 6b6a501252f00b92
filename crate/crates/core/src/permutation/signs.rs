use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2};
use rand::RngCore;

use super::TestConfig;
use crate::rng::{bounded_from_word, substream, Domain};
use crate::{Error, Result};

/// A `rows × N` block of sign rows, each with exactly `n_plus` entries `+1`
/// and the rest `−1`.
///
/// Entries are kept as f64 so the block can go straight into a matrix product.
#[derive(Clone, Debug, PartialEq)]
pub struct SignBlock {
    signs: Array2<f64>,
    n_plus: usize,
}

impl SignBlock {
    /// Validates an explicit sign matrix.
    pub fn from_matrix(signs: Array2<f64>, n_plus: usize) -> Result<Self> {
        for (b, row) in signs.rows().into_iter().enumerate() {
            let mut plus = 0;
            for &s in row {
                if s == 1.0 {
                    plus += 1;
                } else if s != -1.0 {
                    return Err(Error::InvalidShape(format!(
                        "sign row {b} contains {s}, expected ±1"
                    )));
                }
            }
            if plus != n_plus {
                return Err(Error::InvalidShape(format!(
                    "sign row {b} has {plus} entries +1, expected {n_plus}"
                )));
            }
        }
        Ok(Self { signs, n_plus })
    }

    /// A zero-row placeholder for [`SignStream::fill_block`] to fill.
    pub(crate) fn empty() -> Self {
        Self {
            signs: Array2::zeros((0, 0)),
            n_plus: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.signs.nrows()
    }

    pub fn n_total(&self) -> usize {
        self.signs.ncols()
    }

    pub fn n_plus(&self) -> usize {
        self.n_plus
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.signs.view()
    }

    pub fn row(&self, b: usize) -> ArrayView1<'_, f64> {
        self.signs.row(b)
    }

    /// Positions assigned to group 1 by row `b`.
    pub fn group_one(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        self.signs
            .row(b)
            .into_iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.0)
            .map(|(i, _)| i)
    }
}

/// Fills every row of `out` with an independent uniformly random arrangement
/// of `n` entries `+1` among `n + m` slots.
///
/// `scratch` must be a permutation of `0..n + m`; any permutation works, since
/// a partial Fisher–Yates pass selects a uniform subset whatever the starting
/// order.
fn fill_sign_rows<R: RngCore + ?Sized>(
    n: usize,
    m: usize,
    mut out: ArrayViewMut2<'_, f64>,
    scratch: &mut [u32],
    rng: &mut R,
) {
    let total = n + m;
    debug_assert_eq!(out.ncols(), total);
    debug_assert_eq!(scratch.len(), total);
    // Draw the smaller group and paint it over a background of the larger one.
    let (picked, picked_sign, background) = if n <= m {
        (n, 1.0, -1.0)
    } else {
        (m, -1.0, 1.0)
    };
    for mut row in out.rows_mut() {
        // Two draws per 64-bit output.
        let mut i = 0;
        while i < picked {
            let x = rng.next_u64();
            for word in [(x >> 32) as u32, x as u32] {
                if i == picked {
                    break;
                }
                let j = i + bounded_from_word(word, (total - i) as u32, rng) as usize;
                scratch.swap(i, j);
                i += 1;
            }
        }
        let row = row.as_slice_mut().expect("sign blocks are standard-layout");
        row.fill(background);
        for &k in &scratch[..picked] {
            row[k as usize] = picked_sign;
        }
    }
}

/// Generates a block of `rows` sign rows, advancing `rng`.
pub fn generate_sign_block<R: RngCore + ?Sized>(
    n: usize,
    m: usize,
    rows: usize,
    rng: &mut R,
) -> SignBlock {
    let total = n + m;
    let mut signs = Array2::zeros((rows, total));
    let mut scratch: Vec<u32> = (0..total as u32).collect();
    fill_sign_rows(n, m, signs.view_mut(), &mut scratch, rng);
    SignBlock { signs, n_plus: n }
}

/// The sequence of sign blocks for one test.
///
/// Block `k` depends only on `(seed, k)`, so blocks can be produced in any
/// order and any number of consumers see identical partitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignStream {
    seed: u64,
    n: usize,
    m: usize,
    n_permutations: usize,
    block_size: usize,
}

impl SignStream {
    pub fn new(config: &TestConfig, n: usize, m: usize) -> Self {
        Self {
            seed: config.seed,
            n,
            m,
            n_permutations: config.n_permutations,
            block_size: config.effective_block_size(),
        }
    }

    pub fn block_count(&self) -> usize {
        self.n_permutations.div_ceil(self.block_size)
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn block_rows(&self, k: usize) -> usize {
        let start = k * self.block_size;
        self.block_size
            .min(self.n_permutations.saturating_sub(start))
    }

    pub fn block(&self, k: usize) -> SignBlock {
        let mut block = SignBlock::empty();
        self.fill_block(k, &mut block);
        block
    }

    /// Overwrites `block` with block `k`, reusing its buffer when the shape allows.
    pub fn fill_block(&self, k: usize, block: &mut SignBlock) {
        let shape = (self.block_rows(k), self.n + self.m);
        if block.signs.dim() != shape {
            // Release the old buffer before allocating the new one.
            block.signs = Array2::zeros((0, 0));
            block.signs = Array2::zeros(shape);
        }
        block.n_plus = self.n;
        let mut scratch: Vec<u32> = (0..shape.1 as u32).collect();
        let mut rng = substream(self.seed, Domain::Signs, k as u64);
        fill_sign_rows(
            self.n,
            self.m,
            block.signs.view_mut(),
            &mut scratch,
            &mut rng,
        );
    }

    pub fn blocks(&self) -> impl Iterator<Item = SignBlock> + '_ {
        (0..self.block_count()).map(|k| self.block(k))
    }
}
