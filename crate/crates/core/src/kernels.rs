//! Vector kernels with `f64` accumulation over `f32` or `f64` storage.
//!
//! Hot loops convert their operands to `f64` once and call the `_many_wide`
//! entry points, which take one row against a block of rows and reuse each
//! loaded chunk of the first row four times.
//!
//! Sums are split across eight independent accumulators so the compiler can
//! keep several lanes in flight; the lane split is fixed, so results are
//! deterministic for a given input.

const LANES: usize = 8;

#[inline(always)]
fn lanes_reduce(acc: [f64; LANES]) -> f64 {
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))
}

/// Squared Euclidean distance, the reference for [`sq_dist_many_wide`].
#[cfg(test)]
#[inline(always)]
pub fn sq_dist<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; LANES];
    let chunks = a.len() / LANES * LANES;
    for (ca, cb) in a[..chunks]
        .chunks_exact(LANES)
        .zip(b[..chunks].chunks_exact(LANES))
    {
        for l in 0..LANES {
            let diff = ca[l].into() - cb[l].into();
            acc[l] += diff * diff;
        }
    }
    let mut tail = 0f64;
    for (&x, &y) in a[chunks..].iter().zip(&b[chunks..]) {
        let diff = x.into() - y.into();
        tail += diff * diff;
    }
    lanes_reduce(acc) + tail
}

#[inline(always)]
pub fn dot<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; LANES];
    let chunks = a.len() / LANES * LANES;
    for (ca, cb) in a[..chunks]
        .chunks_exact(LANES)
        .zip(b[..chunks].chunks_exact(LANES))
    {
        for l in 0..LANES {
            acc[l] += ca[l].into() * cb[l].into();
        }
    }
    let mut tail = 0f64;
    for (&x, &y) in a[chunks..].iter().zip(&b[chunks..]) {
        tail += x.into() * y.into();
    }
    lanes_reduce(acc) + tail
}

#[inline(always)]
pub fn sq_norm<T: Copy + Into<f64>>(a: &[T]) -> f64 {
    dot(a, a)
}

/// One row against `R` rows, with the same lane split and order as the
/// single-pair kernels, so every output matches them bit for bit.
#[inline(always)]
fn fold_rows<const R: usize>(x: &[f64], rows: [&[f64]; R], term: impl Fn(f64, f64) -> f64) -> [f64; R] {
    let chunks = x.len() / LANES * LANES;
    let mut acc = [[0f64; LANES]; R];
    for (c, xc) in x[..chunks].chunks_exact(LANES).enumerate() {
        let base = c * LANES;
        for (r, row) in rows.iter().enumerate() {
            let yc = &row[base..base + LANES];
            for l in 0..LANES {
                acc[r][l] += term(xc[l], yc[l]);
            }
        }
    }
    let mut out = [0f64; R];
    for (r, row) in rows.iter().enumerate() {
        let mut tail = 0f64;
        for (&a, &b) in x[chunks..].iter().zip(&row[chunks..]) {
            tail += term(a, b);
        }
        out[r] = lanes_reduce(acc[r]) + tail;
    }
    out
}

/// Writes `term`-sums of `x` against consecutive `x.len()`-wide rows of
/// `rows` into `out`, four rows per pass.
#[inline(always)]
fn fold_many(x: &[f64], rows: &[f64], out: &mut [f64], term: impl Fn(f64, f64) -> f64 + Copy) {
    let dim = x.len();
    assert_eq!(rows.len(), out.len() * dim, "row block does not match output length");
    if dim == 0 {
        out.fill(0.0);
        return;
    }
    let mut blocks = rows.chunks_exact(4 * dim);
    let mut outs = out.chunks_exact_mut(4);
    for (block, o) in (&mut blocks).zip(&mut outs) {
        let (r0, rest) = block.split_at(dim);
        let (r1, rest) = rest.split_at(dim);
        let (r2, r3) = rest.split_at(dim);
        o.copy_from_slice(&fold_rows(x, [r0, r1, r2, r3], term));
    }
    for (row, o) in blocks.remainder().chunks_exact(dim).zip(outs.into_remainder()) {
        *o = fold_rows(x, [row], term)[0];
    }
}

#[inline(always)]
fn dot_many_portable(x: &[f64], rows: &[f64], out: &mut [f64]) {
    fold_many(x, rows, out, |a, b| a * b);
}

#[inline(always)]
fn sq_dist_many_portable(x: &[f64], rows: &[f64], out: &mut [f64]) {
    fold_many(x, rows, out, |a, b| {
        let diff = a - b;
        diff * diff
    });
}

/// `out[r] = dot(x, row r)` over rows stored back to back in `rows`.
///
/// Runs an AVX2 build when the CPU has it. Rust never fuses or reorders
/// floating-point operations, so both builds agree with [`dot`] exactly.
pub fn dot_many_wide(x: &[f64], rows: &[f64], out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: AVX2 support was checked just above.
        return unsafe { avx2::dot_many(x, rows, out) };
    }
    dot_many_portable(x, rows, out);
}

/// `out[r] = sq_dist(x, row r)`, dispatched like [`dot_many_wide`].
pub fn sq_dist_many_wide(x: &[f64], rows: &[f64], out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: AVX2 support was checked just above.
        return unsafe { avx2::sq_dist_many(x, rows, out) };
    }
    sq_dist_many_portable(x, rows, out);
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    #[target_feature(enable = "avx2")]
    pub unsafe fn dot_many(x: &[f64], rows: &[f64], out: &mut [f64]) {
        super::dot_many_portable(x, rows, out)
    }

    #[target_feature(enable = "avx2")]
    pub unsafe fn sq_dist_many(x: &[f64], rows: &[f64], out: &mut [f64]) {
        super::sq_dist_many_portable(x, rows, out)
    }
}

/// Cosine from a dot product and two squared norms, clamped to `[-1, 1]`.
///
/// Uses `dot / sqrt(|a|²·|b|²)` so that identical vectors give exactly 1.
#[inline(always)]
pub fn cosine_from_parts(dot: f64, sq_norm_a: f64, sq_norm_b: f64) -> f64 {
    (dot / (sq_norm_a * sq_norm_b).sqrt()).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_sums() {
        let a: Vec<f32> = (0..21).map(|i| (i as f32 * 0.37).sin()).collect();
        let b: Vec<f32> = (0..21).map(|i| (i as f32 * 0.11).cos()).collect();
        let naive_sq: f64 = a
            .iter()
            .zip(&b)
            .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
            .sum();
        let naive_dot: f64 = a.iter().zip(&b).map(|(&x, &y)| x as f64 * y as f64).sum();
        assert!((sq_dist(&a, &b) - naive_sq).abs() < 1e-12);
        assert!((dot(&a, &b) - naive_dot).abs() < 1e-12);
    }

    #[test]
    fn identical_vectors_have_unit_cosine() {
        for v in [vec![0.3f32, -1.7, 2.2], vec![1e-3; 17], vec![123.0, 4.0]] {
            let n = sq_norm(&v);
            assert_eq!(cosine_from_parts(dot(&v, &v), n, n), 1.0);
        }
    }

    #[test]
    fn row_blocks_match_single_pairs_bitwise() {
        for (dim, rows) in [(0, 3), (1, 5), (7, 4), (8, 9), (9, 1), (901, 6)] {
            let x: Vec<f64> = (0..dim).map(|i| (i as f64 * 0.73).sin() * 1e3).collect();
            let m: Vec<f64> = (0..dim * rows).map(|i| (i as f64 * 1.9).cos() / 7.0).collect();
            let mut dots = vec![f64::NAN; rows];
            let mut dists = vec![f64::NAN; rows];
            dot_many_wide(&x, &m, &mut dots);
            sq_dist_many_wide(&x, &m, &mut dists);
            for r in 0..rows {
                let row = &m[r * dim..(r + 1) * dim];
                assert_eq!(dots[r].to_bits(), dot(&x, row).to_bits(), "dim {dim} row {r}");
                assert_eq!(dists[r].to_bits(), sq_dist(&x, row).to_bits(), "dim {dim} row {r}");
            }
        }
    }

    #[test]
    fn distance_is_symmetric() {
        let a = [0.1f32, 5.0, -2.0, 7.5, 1.0, 1.0, 3.0, 2.0, 9.0];
        let b = [1.1f32, -5.0, 2.5, 0.5, 1.0, 0.0, 3.5, 2.0, -9.0];
        assert_eq!(sq_dist(&a, &b), sq_dist(&b, &a));
    }
}
