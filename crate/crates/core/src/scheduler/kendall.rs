//! Kendall's rank correlation over two top-K lists.
//!
//! Lists are aligned over the union of their ids. An id missing from one list
//! takes rank `len + 1` in that list, so all ids missing from the same list
//! are tied there. Tied pairs count as neither concordant nor discordant, and
//! the denominator is always `n (n - 1) / 2` over the union size `n`.

use std::collections::HashMap;
use std::hash::Hash;

/// Correlation of two ranked lists in `[-1, 1]`; unions of fewer than two
/// ids yield 1.0.
pub fn kendall_tau<T: Eq + Hash>(a: &[T], b: &[T]) -> f64 {
    let (x, y) = aligned_ranks(a, b);
    tau_from_ranks(&x, &y)
}

/// Rank vectors of the union of `a` and `b` (ids of `a` first, then ids
/// only in `b`).
pub fn aligned_ranks<T: Eq + Hash>(a: &[T], b: &[T]) -> (Vec<usize>, Vec<usize>) {
    let mut pos_b: HashMap<&T, usize> = HashMap::with_capacity(b.len());
    for (r, id) in b.iter().enumerate() {
        pos_b.entry(id).or_insert(r + 1);
    }
    let mut seen: HashMap<&T, ()> = HashMap::with_capacity(a.len());
    let mut x = Vec::with_capacity(a.len() + b.len());
    let mut y = Vec::with_capacity(a.len() + b.len());
    for (r, id) in a.iter().enumerate() {
        if seen.insert(id, ()).is_none() {
            x.push(r + 1);
            y.push(pos_b.get(id).copied().unwrap_or(b.len() + 1));
        }
    }
    for (r, id) in b.iter().enumerate() {
        if !seen.contains_key(id) {
            seen.insert(id, ());
            x.push(a.len() + 1);
            y.push(r + 1);
        }
    }
    (x, y)
}

/// `(C - D) / (n (n - 1) / 2)` for paired rank vectors, computed in
/// `O(n log n)` by counting inversions with a merge sort.
pub fn tau_from_ranks(x: &[usize], y: &[usize]) -> f64 {
    assert_eq!(x.len(), y.len(), "rank vectors differ in length");
    let n = x.len();
    if n < 2 {
        return 1.0;
    }

    let mut pairs: Vec<(usize, usize)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_unstable();

    let tie_pairs = |run: u64| run * (run - 1) / 2;
    let mut ties_x = 0u64;
    let mut ties_xy = 0u64;
    let mut run_x = 1u64;
    let mut run_xy = 1u64;
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            run_x += 1;
            if w[0].1 == w[1].1 {
                run_xy += 1;
            } else {
                ties_xy += tie_pairs(run_xy);
                run_xy = 1;
            }
        } else {
            ties_x += tie_pairs(run_x);
            ties_xy += tie_pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    ties_x += tie_pairs(run_x);
    ties_xy += tie_pairs(run_xy);

    let mut ys: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0usize; n];
    let discordant = count_inversions(&mut ys, &mut buf);

    // ys is now sorted; count ties in y
    let mut ties_y = 0u64;
    let mut run_y = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_y += 1;
        } else {
            ties_y += tie_pairs(run_y);
            run_y = 1;
        }
    }
    ties_y += tie_pairs(run_y);

    let total = (n as u64) * (n as u64 - 1) / 2;
    let untied = total - ties_x - ties_y + ties_xy;
    let numerator = untied as i64 - 2 * discordant as i64;
    numerator as f64 / total as f64
}

// strict inversions (i < j, v[i] > v[j]); sorts `v` ascending
fn count_inversions(v: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        count_inversions(left, bl) + count_inversions(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = v[i];
        i += 1;
        k += 1;
    }
    while j < n {
        buf[k] = v[j];
        j += 1;
        k += 1;
    }
    v.copy_from_slice(&buf[..n]);
    count
}
