//! Regular grids on probability simplices and barycentric interpolation over
//! the Freudenthal triangulation.

/// All vectors of `n` non-negative integers summing to `k`, in
/// lexicographically decreasing order of the first coordinate.
pub fn compositions(n: usize, k: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if n == 1 {
            prefix.push(k);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=k).rev() {
            prefix.push(first);
            rec(n - 1, k - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, k, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// Number of compositions of `k` into `n` parts, or `None` on overflow.
pub fn composition_count(n: usize, k: u32) -> Option<usize> {
    if n == 0 {
        return Some(0);
    }
    // C(k + n - 1, n - 1)
    let (a, b) = (k as u128 + n as u128 - 1, n as u128 - 1);
    let mut c: u128 = 1;
    for i in 0..b {
        c = c.checked_mul(a - i)? / (i + 1);
    }
    usize::try_from(c).ok()
}

/// Grid vertices (as counts summing to `k`) whose convex combination with the
/// returned weights reproduces `b`. Weights are non-negative and sum to 1.
pub fn freudenthal(b: &[f64], k: u32) -> Vec<(Vec<u32>, f64)> {
    let n = b.len();
    assert!(n > 0, "empty point");
    if n == 1 {
        return vec![(vec![k], 1.0)];
    }
    let kf = k as f64;
    // Cumulative coordinates y_i = k Σ_{j ≥ i} b_j for i = 1..n-1.
    let d = n - 1;
    let mut y = vec![0.0; d];
    let mut acc = 0.0;
    for i in (1..n).rev() {
        acc += kf * b[i].max(0.0);
        y[i - 1] = acc.min(kf);
    }
    let base: Vec<u32> = y.iter().map(|v| (v.floor() as u32).min(k)).collect();
    let frac: Vec<f64> = y.iter().zip(&base).map(|(v, f)| v - *f as f64).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| frac[b].partial_cmp(&frac[a]).unwrap().then(a.cmp(&b)));

    let to_counts = |yy: &[u32]| -> Vec<u32> {
        let mut c = Vec::with_capacity(n);
        c.push(k - yy[0]);
        for i in 0..d - 1 {
            c.push(yy[i] - yy[i + 1]);
        }
        c.push(yy[d - 1]);
        c
    };

    let mut out = Vec::with_capacity(n);
    let mut cur = base.clone();
    let w0 = 1.0 - frac[order[0]];
    if w0 > 0.0 {
        out.push((to_counts(&cur), w0));
    }
    for j in 0..d {
        let next = if j + 1 < d { frac[order[j + 1]] } else { 0.0 };
        let w = frac[order[j]] - next;
        if w <= 0.0 {
            // Fractions are sorted, so the remaining vertices carry no weight.
            if frac[order[j]] == 0.0 {
                break;
            }
            cur[order[j]] += 1;
            continue;
        }
        cur[order[j]] += 1;
        out.push((to_counts(&cur), w));
    }
    out
}
