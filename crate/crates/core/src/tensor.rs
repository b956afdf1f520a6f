//! Index arithmetic for rank-N tensors stored row-major (particle 1 slowest).

use num_complex::Complex64 as C64;

/// `m^n`, or `None` on overflow.
pub(crate) fn checked_len(m: usize, n: usize) -> Option<usize> {
    let mut len: usize = 1;
    for _ in 0..n {
        len = len.checked_mul(m)?;
    }
    Some(len)
}

/// Stride of particle axis `axis` (0-based).
#[inline]
pub(crate) fn stride(m: usize, n: usize, axis: usize) -> usize {
    m.pow((n - 1 - axis) as u32)
}

/// Writes the per-particle indices of flat index `idx` into `digits`.
#[cfg(test)]
pub(crate) fn digits(mut idx: usize, m: usize, digits: &mut [usize]) {
    for d in digits.iter_mut().rev() {
        *d = idx % m;
        idx /= m;
    }
}

/// Calls `f(flat, digits)` for every multi-index, in flat order.
pub(crate) fn for_each_index(m: usize, n: usize, mut f: impl FnMut(usize, &[usize])) {
    let len = m.pow(n as u32);
    let mut d = vec![0usize; n];
    for flat in 0..len {
        f(flat, &d);
        for slot in d.iter_mut().rev() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
}

/// Applies `f` to every fiber along `axis`, gathering into a contiguous buffer.
pub(crate) fn for_each_fiber(
    data: &mut [C64],
    m: usize,
    n: usize,
    axis: usize,
    mut f: impl FnMut(&mut [C64]),
) {
    let s = stride(m, n, axis);
    if s == 1 {
        data.chunks_exact_mut(m).for_each(f);
        return;
    }
    let block = s * m;
    let mut buf = vec![C64::new(0.0, 0.0); m];
    for outer in data.chunks_exact_mut(block) {
        for inner in 0..s {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = outer[inner + i * s];
            }
            f(&mut buf);
            for (i, b) in buf.iter().enumerate() {
                outer[inner + i * s] = *b;
            }
        }
    }
}

/// Applies the `m × m` row-major matrix `op` to particle axis `axis`.
pub(crate) fn apply_one_body(data: &mut [C64], m: usize, n: usize, axis: usize, op: &[C64]) {
    let mut out = vec![C64::new(0.0, 0.0); m];
    for_each_fiber(data, m, n, axis, |fiber| {
        for (r, o) in out.iter_mut().enumerate() {
            *o = op[r * m..(r + 1) * m].iter().zip(fiber.iter()).map(|(a, b)| a * b).sum();
        }
        fiber.copy_from_slice(&out);
    });
}
