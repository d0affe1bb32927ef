//! Small dense linear algebra and multi-index combinatorics.
//!
//! Everything here targets the low dimensions of the experiment corpus
//! (n <= 8, typically n <= 3), so dense row-major `&[f64]` buffers and
//! enumeration-based determinants are the right tools.

pub const MAX_DIM: usize = 8;

/// Binomial coefficient as usize; small arguments only.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Visit every strictly increasing multi-index of length `p` drawn from
/// `0..n`, in lexicographic order, without allocating per index.
pub fn for_each_increasing(n: usize, p: usize, mut f: impl FnMut(&[usize])) {
    assert!(n <= MAX_DIM, "dimension above supported maximum");
    if p > n {
        return;
    }
    let mut idx = [0usize; MAX_DIM];
    for (i, v) in idx.iter_mut().take(p).enumerate() {
        *v = i;
    }
    if p == 0 {
        f(&idx[..0]);
        return;
    }
    loop {
        f(&idx[..p]);
        // lexicographic successor
        let mut a = p;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            if idx[a] != a + n - p {
                break;
            }
            if a == 0 {
                return;
            }
        }
        idx[a] += 1;
        for b in a + 1..p {
            idx[b] = idx[b - 1] + 1;
        }
    }
}

/// All strictly increasing multi-indices of length `p` from `0..n`.
pub fn increasing_indices(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(n, p));
    for_each_increasing(n, p, |idx| out.push(idx.to_vec()));
    out
}

/// Lexicographic rank of a strictly increasing multi-index among all
/// C(n, p) indices with entries below `n`.
pub fn lex_rank(n: usize, idx: &[usize]) -> usize {
    let p = idx.len();
    let mut rank = 0usize;
    let mut prev: isize = -1;
    for (a, &i) in idx.iter().enumerate() {
        for j in (prev + 1) as usize..i {
            rank += binomial(n - 1 - j, p - 1 - a);
        }
        prev = i as isize;
    }
    rank
}

/// Determinant of a p x p row-major matrix by permutation expansion.
///
/// Column swaps negate every permutation product bit-exactly (the
/// factors are identical, only the tracked sign flips), so the result is
/// exactly antisymmetric as long as the summation treats a multiset and
/// its negation symmetrically. The accumulation below groups terms of
/// equal magnitude into a signed count times the magnitude (exact and
/// odd) and folds the groups in ascending magnitude; round-to-nearest is
/// odd under negation, so the fold of the negated sequence is the exact
/// negation of the fold.
pub fn det(m: &[f64], p: usize) -> f64 {
    debug_assert_eq!(m.len(), p * p);
    match p {
        0 => 1.0,
        1 => m[0],
        2 => {
            let ad = m[0] * m[3];
            let bc = m[1] * m[2];
            ad - bc
        }
        _ => det_permutation(m, p),
    }
}

fn det_permutation(m: &[f64], p: usize) -> f64 {
    // Heap's algorithm over column assignments, sign tracked per swap.
    let mut perm = [0usize; MAX_DIM];
    for (i, v) in perm.iter_mut().take(p).enumerate() {
        *v = i;
    }
    let mut counters = [0usize; MAX_DIM];
    let mut sign = 1.0f64;
    let mut terms = Vec::with_capacity((2..=p).product());
    let term = |perm: &[usize], sign: f64| -> f64 {
        let mut prod = sign;
        for (i, &c) in perm.iter().take(p).enumerate() {
            prod *= m[i * p + c];
        }
        prod
    };
    terms.push(term(&perm, sign));
    let mut i = 1usize;
    while i < p {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            sign = -sign;
            terms.push(term(&perm, sign));
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    // even comparator: magnitudes only, so the sorted sequence of the
    // negated multiset mirrors the original elementwise
    terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut total = 0.0f64;
    let mut i = 0;
    while i < terms.len() {
        let magnitude = terms[i].abs();
        let mut net = 0.0f64;
        while i < terms.len() && terms[i].abs() == magnitude {
            net += terms[i].signum();
            i += 1;
        }
        total += net * magnitude;
    }
    total
}

/// out = a * b for n x n row-major matrices.
pub fn mat_mul(a: &[f64], b: &[f64], out: &mut [f64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = s;
        }
    }
}

/// out = a * v for an n x n row-major matrix and an n-vector.
pub fn mat_vec(a: &[f64], v: &[f64], out: &mut [f64], n: usize) {
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += a[i * n + j] * v[j];
        }
        out[i] = s;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}
