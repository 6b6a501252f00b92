//! Brute-force reference computations, written without the library's code paths.

#![allow(dead_code)]

pub const TIE: f64 = 1e-9;

/// Concentration from a resultant length, `r` clamped below one.
pub fn kappa(r: f64, d: usize) -> f64 {
    let r = r.min(1.0 - 1e-9);
    let d = d as f64;
    r * (d - r * r) / (1.0 - r * r)
}

/// `ln(1/κ)` of the group whose rows sum to `sum`; infinite for a vanishing resultant.
pub fn group_log_breadth(sum: &[f64], count: usize) -> f64 {
    let r = sum.iter().map(|v| v * v).sum::<f64>().sqrt() / count as f64;
    if r < 1e-12 {
        f64::INFINITY
    } else {
        (1.0 / kappa(r, sum.len())).ln()
    }
}

/// `T` for the split where `in_first[i]` puts row `i` in group 1.
pub fn split_statistic(rows: &[Vec<f64>], in_first: &[bool]) -> f64 {
    let d = rows[0].len();
    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    let mut n1 = 0;
    for (row, &first) in rows.iter().zip(in_first) {
        let target = if first {
            n1 += 1;
            &mut s1
        } else {
            &mut s2
        };
        for (t, v) in target.iter_mut().zip(row) {
            *t += v;
        }
    }
    let a = group_log_breadth(&s1, n1);
    let b = group_log_breadth(&s2, rows.len() - n1);
    if a.is_infinite() && b.is_infinite() {
        0.0
    } else {
        a - b
    }
}

/// `T` for every split of `rows` with `n` rows in group 1.
pub fn all_split_statistics(rows: &[Vec<f64>], n: usize) -> Vec<f64> {
    let total = rows.len();
    (0u32..1 << total)
        .filter(|mask| mask.count_ones() as usize == n)
        .map(|mask| {
            let in_first: Vec<bool> = (0..total).map(|i| mask >> i & 1 == 1).collect();
            split_statistic(rows, &in_first)
        })
        .collect()
}

pub fn exceeds(t: f64, t_obs: f64, two_sided: bool) -> bool {
    if two_sided {
        t.abs() >= t_obs.abs() - TIE
    } else {
        t >= t_obs - TIE
    }
}

/// Exact permutation p-value: the share of all splits at least as extreme as `t_obs`.
pub fn exact_p(stats: &[f64], t_obs: f64, two_sided: bool) -> f64 {
    stats
        .iter()
        .filter(|&&t| exceeds(t, t_obs, two_sided))
        .count() as f64
        / stats.len() as f64
}

pub fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
