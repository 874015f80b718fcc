//! Index combinatorics for antisymmetric storage: sorted combinations,
//! permutation signs, and (p,q)-shuffles.

/// All strictly increasing k-subsets of 0..n in lexicographic order.
/// combinations(n, 0) = [[]] so degree-0 forms have exactly one slot.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Position of a sorted combination in the lexicographic enumeration.
pub fn combination_rank(combos: &[Vec<usize>], key: &[usize]) -> usize {
    combos
        .binary_search_by(|c| c.as_slice().cmp(key))
        .unwrap_or_else(|_| panic!("combination {key:?} not found"))
}

/// Sorts indices, returning (sorted, sign) or None when an index repeats.
pub fn sort_with_sign(indices: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = indices.to_vec();
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    for w in v.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    Some((v, sign))
}

/// All permutations of 0..k with their signs (Heap's algorithm).
pub fn permutations_signed(k: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    let mut a: Vec<usize> = (0..k).collect();
    let mut c = vec![0usize; k];
    let mut sign = 1.0;
    out.push((a.clone(), sign));
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            sign = -sign;
            out.push((a.clone(), sign));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// (p,q)-shuffles of 0..p+q: returns (first block, second block, sign).
pub fn shuffles(p: usize, q: usize) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
    let n = p + q;
    let mut out = Vec::new();
    for first in combinations(n, p) {
        let mut second = Vec::with_capacity(q);
        for i in 0..n {
            if !first.contains(&i) {
                second.push(i);
            }
        }
        let mut seq = first.clone();
        seq.extend_from_slice(&second);
        let mut inversions = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                if seq[i] > seq[j] {
                    inversions += 1;
                }
            }
        }
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        out.push((first, second, sign));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_counts() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 4).len(), 0);
        let c = combinations(4, 2);
        assert_eq!(c[0], vec![0, 1]);
        assert_eq!(c[5], vec![2, 3]);
    }

    #[test]
    fn sort_sign() {
        assert_eq!(sort_with_sign(&[2, 0, 1]), Some((vec![0, 1, 2], 1.0)));
        assert_eq!(sort_with_sign(&[1, 0]), Some((vec![0, 1], -1.0)));
        assert_eq!(sort_with_sign(&[1, 1]), None);
    }

    #[test]
    fn permutation_signs_sum_to_zero() {
        let perms = permutations_signed(4);
        assert_eq!(perms.len(), 24);
        let total: f64 = perms.iter().map(|(_, s)| s).sum();
        assert_eq!(total, 0.0);
        for (p, s) in &perms {
            let (_, check) = sort_with_sign(p).unwrap();
            assert_eq!(*s, check);
        }
    }

    #[test]
    fn shuffle_count() {
        assert_eq!(shuffles(2, 1).len(), 3);
        assert_eq!(shuffles(2, 2).len(), 6);
    }
}
