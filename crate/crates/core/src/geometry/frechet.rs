//! Strong Fréchet distance between polylines (decision by free-space
//! reachability, value by bisection) and the discrete variant used as a
//! test oracle.

use super::{dedup_points, segment_disk, Point, INTERVAL_SLACK};

pub const DEFAULT_REL_TOL: f64 = 1e-3;

type Span = Option<(f64, f64)>;

fn clip_from(span: Span, from: f64) -> Span {
    let (lo, hi) = span?;
    if hi < from - INTERVAL_SLACK {
        return None;
    }
    let lo = lo.max(from);
    Some((lo, hi.max(lo)))
}

fn starts_at_zero(span: Span) -> bool {
    span.is_some_and(|(lo, _)| lo <= INTERVAL_SLACK)
}

fn reaches_one(span: Span) -> bool {
    span.is_some_and(|(_, hi)| hi >= 1.0 - INTERVAL_SLACK)
}

/// Returns true iff the strong Fréchet distance between `p` and `q` is at
/// most `eps`.
pub fn frechet_decision(p: &[Point], q: &[Point], eps: f64) -> bool {
    let p = dedup_points(p);
    let q = dedup_points(q);
    if p.is_empty() || q.is_empty() || eps < 0.0 {
        return false;
    }
    let eps2 = eps * eps * (1.0 + 1e-12) + 1e-24;
    let within = |a: Point, b: Point| (a - b).norm2() <= eps2;
    if p.len() == 1 {
        return q.iter().all(|&x| within(x, p[0]));
    }
    if q.len() == 1 {
        return p.iter().all(|&x| within(x, q[0]));
    }
    if !within(p[0], q[0]) || !within(p[p.len() - 1], q[q.len() - 1]) {
        return false;
    }
    let n = p.len();
    let m = q.len();

    // Horizontal axis follows `p` (vertices i), vertical axis follows `q`.
    // vfree[i][j]: p_i against segment q_j q_{j+1} (local parameter of q).
    // hfree[i][j]: q_j against segment p_i p_{i+1} (local parameter of p).
    let vfree = |i: usize, j: usize| segment_disk(q[j], q[j + 1], p[i], eps);
    let hfree = |i: usize, j: usize| segment_disk(p[i], p[i + 1], q[j], eps);

    // Row-by-row over q segments; `bottom[i]` is the reachable span on the
    // horizontal boundary of cell (i, j).
    let mut bottom: Vec<Span> = vec![None; n - 1];
    let mut prefix_open = true;
    for (i, b) in bottom.iter_mut().enumerate() {
        let span = hfree(i, 0);
        if prefix_open && starts_at_zero(span) {
            *b = span;
            prefix_open = reaches_one(span);
        } else {
            prefix_open = false;
        }
    }
    let mut left_open = true;
    let mut last_right: Span = None;
    for j in 0..m - 1 {
        let span = vfree(0, j);
        let mut left: Span = if left_open && starts_at_zero(span) {
            left_open = reaches_one(span);
            span
        } else {
            left_open = false;
            None
        };
        let mut top_row: Vec<Span> = vec![None; n - 1];
        for i in 0..n - 1 {
            let bot = bottom[i];
            let right = if bot.is_some() {
                vfree(i + 1, j)
            } else if let Some((lo, _)) = left {
                clip_from(vfree(i + 1, j), lo)
            } else {
                None
            };
            let top = if left.is_some() {
                hfree(i, j + 1)
            } else if let Some((lo, _)) = bot {
                clip_from(hfree(i, j + 1), lo)
            } else {
                None
            };
            top_row[i] = top;
            left = right;
        }
        last_right = left;
        bottom = top_row;
    }
    reaches_one(last_right) || reaches_one(bottom[n - 2])
}

/// Fréchet distance approximated by bisection over [`frechet_decision`].
///
/// The returned `d` satisfies `d_F ∈ [d (1 - rel_tol), d]`.
pub fn frechet_value(p: &[Point], q: &[Point], rel_tol: f64) -> f64 {
    assert!(rel_tol > 0.0, "rel_tol must be positive");
    let p = dedup_points(p);
    let q = dedup_points(q);
    assert!(!p.is_empty() && !q.is_empty(), "empty polyline");
    let mut lo = p[0].dist(q[0]).max(p[p.len() - 1].dist(q[q.len() - 1]));
    if frechet_decision(&p, &q, lo) {
        return lo;
    }
    let mut hi = p
        .iter()
        .flat_map(|a| q.iter().map(move |b| a.dist(*b)))
        .fold(0.0, f64::max);
    while !frechet_decision(&p, &q, hi) {
        hi = hi * (1.0 + 1e-9) + 1e-12;
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if frechet_decision(&p, &q, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Discrete Fréchet distance over the vertex sequences.
pub fn discrete_frechet(p: &[Point], q: &[Point]) -> f64 {
    assert!(!p.is_empty() && !q.is_empty(), "empty point sequence");
    let m = q.len();
    let mut prev = vec![0.0; m];
    let mut cur = vec![0.0; m];
    prev[0] = p[0].dist(q[0]);
    for j in 1..m {
        prev[j] = prev[j - 1].max(p[0].dist(q[j]));
    }
    for a in &p[1..] {
        cur[0] = prev[0].max(a.dist(q[0]));
        for j in 1..m {
            let reach = prev[j].min(prev[j - 1]).min(cur[j - 1]);
            cur[j] = reach.max(a.dist(q[j]));
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// Inserts points so that consecutive samples are at most `h` apart.
pub fn densify(pts: &[Point], h: f64) -> Vec<Point> {
    assert!(h > 0.0);
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let steps = (w[0].dist(w[1]) / h).ceil().max(1.0) as usize;
        for s in 0..steps {
            out.push(w[0].lerp(w[1], s as f64 / steps as f64));
        }
    }
    if let Some(&last) = pts.last() {
        out.push(last);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn identity_is_zero() {
        let p = pts(&[(0.0, 0.0), (3.0, 1.0), (5.0, -2.0)]);
        for eps in [0.0, 0.5, 10.0] {
            assert!(frechet_decision(&p, &p, eps));
        }
        assert_eq!(frechet_value(&p, &p, 1e-3), 0.0);
    }

    #[test]
    fn parallel_translate() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0)]);
        let q = pts(&[(0.0, 1.0), (1.0, 1.0)]);
        assert!(!frechet_decision(&p, &q, 0.99));
        assert!(frechet_decision(&p, &q, 1.0));
        let d = frechet_value(&p, &q, 1e-3);
        assert!((d - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn apex() {
        let p = pts(&[(0.0, 0.0), (4.0, 0.0)]);
        let q = pts(&[(0.0, 0.0), (2.0, 1.0), (4.0, 0.0)]);
        assert!(frechet_decision(&p, &q, 1.0));
        assert!(!frechet_decision(&p, &q, 0.9));
        let d = frechet_value(&p, &q, 1e-3);
        assert!((d - 1.0).abs() <= 1e-3);
        // Densified oracle brackets the value from above within h.
        let h = 0.01;
        let disc = discrete_frechet(&densify(&p, h), &densify(&q, h));
        assert!(disc >= 1.0 - 1e-9 && disc <= 1.0 + h);
    }

    #[test]
    fn backtracking_curve_is_far() {
        // q walks forward, back, forward: monotone matching needs to wait.
        let p = pts(&[(0.0, 0.0), (10.0, 0.0)]);
        let q = pts(&[(0.0, 0.0), (8.0, 0.0), (2.0, 0.0), (10.0, 0.0)]);
        assert!(!frechet_decision(&p, &q, 2.9));
        assert!(frechet_decision(&p, &q, 3.0 + 1e-9));
        assert!(frechet_decision(&q, &p, 3.0 + 1e-9));
    }

    #[test]
    fn discrete_basics() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(3.0, 4.0);
        assert_eq!(discrete_frechet(&[a], &[b]), 5.0);
        let p = pts(&[(0.0, 0.0), (1.0, 2.0), (3.0, 3.0)]);
        assert_eq!(discrete_frechet(&p, &p), 0.0);
        let q = pts(&[(0.0, 0.0), (1.0, 0.0)]);
        let r = pts(&[(0.0, 1.0), (1.0, 1.0)]);
        let d = discrete_frechet(&densify(&q, 0.01), &densify(&r, 0.01));
        assert!((1.0..=1.01).contains(&d));
    }

    #[test]
    fn single_point_curves() {
        let p = pts(&[(0.0, 0.0)]);
        let q = pts(&[(0.0, 1.0), (1.0, 1.0)]);
        assert!(frechet_decision(&p, &q, 2f64.sqrt()));
        assert!(!frechet_decision(&p, &q, 1.4));
    }
}
