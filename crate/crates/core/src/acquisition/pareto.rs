//! Dominance, non-dominated sorting, crowding distance and 2-D hypervolume.
//! All objectives are minimized.

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Fronts of indices; front 0 is the non-dominated set. Indices within a
/// front are ascending.
pub fn non_dominated_sort(objectives: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&objectives[i], &objectives[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&objectives[j], &objectives[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front` (same order). Boundary
/// members get infinity.
pub fn crowding_distance(objectives: &[Vec<f64>], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = objectives[front[0]].len();
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        order.sort_by(|&a, &b| objectives[front[a]][k].total_cmp(&objectives[front[b]][k]).then(a.cmp(&b)));
        let lo = objectives[front[order[0]]][k];
        let hi = objectives[front[order[n - 1]]][k];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let gap = objectives[front[order[w + 1]]][k] - objectives[front[order[w - 1]]][k];
            dist[order[w]] += gap / span;
        }
    }
    dist
}

/// Area dominated by `points` and bounded by `reference` (2 objectives).
/// Points not strictly better than the reference in both objectives add nothing.
pub fn hypervolume_2d(points: &[Vec<f64>], reference: [f64; 2]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p[0], p[1]))
        .filter(|&(a, b)| a < reference[0] && b < reference[1])
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut best_y = reference[1];
    for (x, y) in pts {
        if y < best_y {
            area += (reference[0] - x) * (best_y - y);
            best_y = y;
        }
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        assert_eq!(non_dominated_sort(&[vec![1.0, 1.0]]), vec![vec![0]]);
    }

    #[test]
    fn four_point_example() {
        let pts = vec![vec![0.0, 2.0], vec![2.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert_eq!(non_dominated_sort(&pts), vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn identical_points_share_a_front() {
        let pts = vec![vec![1.0, 1.0]; 4];
        assert_eq!(non_dominated_sort(&pts), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn crowding_boundaries_infinite() {
        let pts = vec![vec![0.0, 3.0], vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 0.0]];
        let d = crowding_distance(&pts, &[0, 1, 2, 3]);
        assert!(d[0].is_infinite() && d[3].is_infinite());
        assert!((d[1] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hypervolume_staircase() {
        let pts = vec![vec![0.0, 2.0], vec![1.0, 1.0], vec![2.0, 0.0]];
        // unit squares under a 3x3 reference box
        assert!((hypervolume_2d(&pts, [3.0, 3.0]) - 6.0).abs() < 1e-12);
        assert_eq!(hypervolume_2d(&[vec![5.0, 5.0]], [3.0, 3.0]), 0.0);
    }
}
