//! Small dense matrix kernels used by the tape's affine nodes.
//!
//! Row-major `f64` everywhere. The accumulation order is fixed by
//! construction: every output element is a single fused chain over the inner
//! dimension, so `C[i][j]` does not depend on how many other columns are
//! computed in the same call. That property is what lets a batched forward
//! pass reproduce a single-sample forward pass bit for bit.
//!
//! Dispatch picks an AVX-512 or AVX2+FMA tile at runtime and falls back to a
//! plain scalar loop elsewhere. The FMA paths use `mul_add`; the fallback
//! uses separate multiply/add (one machine only ever sees one flavor).

use std::sync::OnceLock;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Kernel {
    Avx512,
    Avx2Fma,
    Generic,
}

fn kernel() -> Kernel {
    static KERNEL: OnceLock<Kernel> = OnceLock::new();
    *KERNEL.get_or_init(|| {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx512f") {
                return Kernel::Avx512;
            }
            if std::arch::is_x86_feature_detected!("avx2")
                && std::arch::is_x86_feature_detected!("fma")
            {
                return Kernel::Avx2Fma;
            }
        }
        Kernel::Generic
    })
}

/// `out (m×n) += a (m×k) · b (k×n)`.
pub fn gemm_nn_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    assert_eq!(out.len(), m * n, "output shape mismatch");
    assert_eq!(a.len(), m * k, "lhs shape mismatch");
    assert_eq!(b.len(), k * n, "rhs shape mismatch");
    match kernel() {
        #[cfg(target_arch = "x86_64")]
        // Safety: feature presence was checked by `kernel()`.
        Kernel::Avx512 => unsafe { gemm_nn_acc_avx512(out, a, b, m, k, n) },
        #[cfg(target_arch = "x86_64")]
        Kernel::Avx2Fma => unsafe { gemm_nn_acc_avx2(out, a, b, m, k, n) },
        _ => gemm_nn_acc_impl::<4, 4, false>(out, a, b, m, k, n),
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn gemm_nn_acc_avx512(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    // 6 rows × 4 zmm of accumulators leaves room for the loads; measured
    // fastest among tile shapes on AVX-512 hardware.
    gemm_nn_acc_impl::<6, 32, true>(out, a, b, m, k, n);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn gemm_nn_acc_avx2(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    gemm_nn_acc_impl::<4, 8, true>(out, a, b, m, k, n);
}

#[inline(always)]
fn gemm_nn_acc_impl<const MR: usize, const NC: usize, const FMA: bool>(
    out: &mut [f64],
    a: &[f64],
    b: &[f64],
    m: usize,
    k: usize,
    n: usize,
) {
    // MR rows of `a` are repacked p-major once per row block, so the tile's
    // inner loop reads one contiguous group of row values per p instead of
    // MR strided cache lines. Column remainders cascade through narrower
    // tiles before falling back to scalar cells.
    let mut panel = vec![0.0f64; k * MR];
    let mut i0 = 0;
    while i0 + MR <= m {
        for p in 0..k {
            for r in 0..MR {
                panel[p * MR + r] = a[(i0 + r) * k + p];
            }
        }
        let mut j0 = 0;
        while j0 + NC <= n {
            nn_tile::<MR, NC, FMA>(out, &panel, b, k, n, i0, j0);
            j0 += NC;
        }
        while j0 + 8 <= n {
            nn_tile::<MR, 8, FMA>(out, &panel, b, k, n, i0, j0);
            j0 += 8;
        }
        while j0 + 4 <= n {
            nn_tile::<MR, 4, FMA>(out, &panel, b, k, n, i0, j0);
            j0 += 4;
        }
        for j in j0..n {
            for (r, row) in (i0..i0 + MR).enumerate() {
                scalar_cell_panel::<MR, FMA>(out, &panel, b, k, n, row, r, j);
            }
        }
        i0 += MR;
    }
    for i in i0..m {
        for j in 0..n {
            scalar_cell::<FMA>(out, a, b, k, n, i, j);
        }
    }
}

/// MR×NC register tile: one accumulator chain per output element, iterated
/// over the full inner dimension in ascending order.
#[inline(always)]
fn nn_tile<const MR: usize, const NC: usize, const FMA: bool>(
    out: &mut [f64],
    panel: &[f64],
    b: &[f64],
    k: usize,
    n: usize,
    i0: usize,
    j0: usize,
) {
    let mut acc = [[0.0f64; NC]; MR];
    for p in 0..k {
        let arow: &[f64; MR] = panel[p * MR..p * MR + MR].try_into().unwrap();
        let brow: &[f64; NC] = b[p * n + j0..p * n + j0 + NC].try_into().unwrap();
        for r in 0..MR {
            let av = arow[r];
            for c in 0..NC {
                acc[r][c] = if FMA {
                    av.mul_add(brow[c], acc[r][c])
                } else {
                    av * brow[c] + acc[r][c]
                };
            }
        }
    }
    for (r, accrow) in acc.iter().enumerate() {
        let orow = &mut out[(i0 + r) * n + j0..(i0 + r) * n + j0 + NC];
        for c in 0..NC {
            orow[c] += accrow[c];
        }
    }
}

#[inline(always)]
fn scalar_cell_panel<const MR: usize, const FMA: bool>(
    out: &mut [f64],
    panel: &[f64],
    b: &[f64],
    k: usize,
    n: usize,
    i: usize,
    r: usize,
    j: usize,
) {
    let mut acc = 0.0f64;
    for p in 0..k {
        let av = panel[p * MR + r];
        let bv = b[p * n + j];
        acc = if FMA { av.mul_add(bv, acc) } else { av * bv + acc };
    }
    out[i * n + j] += acc;
}

#[inline(always)]
fn scalar_cell<const FMA: bool>(
    out: &mut [f64],
    a: &[f64],
    b: &[f64],
    k: usize,
    n: usize,
    i: usize,
    j: usize,
) {
    let arow = &a[i * k..i * k + k];
    let mut acc = 0.0f64;
    for (p, &av) in arow.iter().enumerate() {
        let bv = b[p * n + j];
        acc = if FMA { av.mul_add(bv, acc) } else { av * bv + acc };
    }
    out[i * n + j] += acc;
}

/// Cache-blocked transpose into a caller-provided buffer: `src` is
/// rows×cols, `dst` becomes cols×rows.
pub fn transpose_into(dst: &mut Vec<f64>, src: &[f64], rows: usize, cols: usize) {
    assert_eq!(src.len(), rows * cols);
    dst.clear();
    dst.resize(rows * cols, 0.0);
    const BLK: usize = 16;
    let mut i0 = 0;
    while i0 < rows {
        let i1 = (i0 + BLK).min(rows);
        let mut j0 = 0;
        while j0 < cols {
            let j1 = (j0 + BLK).min(cols);
            for i in i0..i1 {
                for j in j0..j1 {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
            j0 = j1;
        }
        i0 = i1;
    }
}

/// Row-major transpose: `src` is rows×cols, result is cols×rows.
pub fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut dst = Vec::new();
    transpose_into(&mut dst, src, rows, cols);
    dst
}
