//! Small enumeration helpers over coordinates.

/// All permutations of `0..t` in lexicographic order.
pub fn permutations(t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..t).collect();
    loop {
        out.push(cur.clone());
        // Next lexicographic permutation.
        let Some(i) = (1..t).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..t).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

/// All sign vectors in `{+1,-1}^t`, ordered by the assignment index convention.
pub fn sign_vectors(t: usize) -> Vec<Vec<i8>> {
    (0..1usize << t)
        .map(|x| (0..t).map(|i| crate::predicate::sign(x, i)).collect())
        .collect()
}

/// Coordinates (0-based, increasing) of a subset mask.
pub fn coords(s: u32) -> Vec<usize> {
    (0..32).filter(|i| (s >> i) & 1 == 1).collect()
}

pub fn subsets_of_size(k: usize, t: usize) -> Vec<u32> {
    (0..1u32 << k).filter(|s| s.count_ones() as usize == t).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(permutations(0), vec![Vec::<usize>::new()]);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(3)[1], vec![0, 2, 1]);
        assert_eq!(sign_vectors(2), vec![vec![1, 1], vec![-1, 1], vec![1, -1], vec![-1, -1]]);
        assert_eq!(coords(0b1010), vec![1, 3]);
        assert_eq!(subsets_of_size(4, 2).len(), 6);
    }
}
