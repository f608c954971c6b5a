use super::gaussian::Vec2;
use super::ModelError;

/// Lloyd iterations stop here even if assignments are still changing.
pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec2>,
    /// Cluster index per input point.
    pub assignments: Vec<usize>,
    /// Lloyd iterations run after seeding.
    pub iterations: usize,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia: Vec<f64>,
}

impl KMeans {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Points belonging to `cluster`, in input order.
    pub fn members<'a>(&'a self, points: &'a [Vec2], cluster: usize) -> impl Iterator<Item = Vec2> + 'a {
        points
            .iter()
            .zip(&self.assignments)
            .filter(move |(_, a)| **a == cluster)
            .map(|(p, _)| *p)
    }
}

fn dist2(a: Vec2, b: Vec2) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn nearest(p: Vec2, centroids: &[Vec2]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(p, *c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Deterministic farthest-point seeding: the point nearest the data mean,
/// then repeatedly the point farthest from all chosen seeds. Stops early
/// once every point coincides with a seed.
fn seed_centroids(points: &[Vec2], k: usize) -> Vec<Vec2> {
    let n = points.len() as f64;
    let mean = points
        .iter()
        .fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
    let mean = [mean[0] / n, mean[1] / n];
    let first = points
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, p)| {
            let d = dist2(*p, mean);
            if d < best.1 {
                (i, d)
            } else {
                best
            }
        })
        .0;
    let mut seeds = vec![points[first]];
    let mut gap: Vec<f64> = points.iter().map(|p| dist2(*p, points[first])).collect();
    while seeds.len() < k {
        let (far, d) = gap
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        if d <= 0.0 {
            break;
        }
        let s = points[far];
        seeds.push(s);
        for (g, p) in gap.iter_mut().zip(points) {
            *g = g.min(dist2(*p, s));
        }
    }
    seeds
}

fn assign(points: &[Vec2], centroids: &[Vec2]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let assignments = points
        .iter()
        .map(|p| {
            let (i, d) = nearest(*p, centroids);
            inertia += d;
            i
        })
        .collect();
    (assignments, inertia)
}

/// Cluster means of the current assignment. Empty clusters are dropped and
/// `assignments` is renumbered to match.
fn recenter(points: &[Vec2], assignments: &mut [usize], k: usize) -> Vec<Vec2> {
    let mut sum = vec![[0.0, 0.0]; k];
    let mut count = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments.iter()) {
        sum[a][0] += p[0];
        sum[a][1] += p[1];
        count[a] += 1;
    }
    let mut remap = vec![usize::MAX; k];
    let mut centroids = Vec::with_capacity(k);
    for c in 0..k {
        if count[c] > 0 {
            remap[c] = centroids.len();
            let n = count[c] as f64;
            centroids.push([sum[c][0] / n, sum[c][1] / n]);
        }
    }
    if centroids.len() < k {
        log::debug!("k-means dropped {} empty cluster(s)", k - centroids.len());
        for a in assignments.iter_mut() {
            *a = remap[*a];
        }
    }
    centroids
}

/// Lloyd's algorithm on 2-D points with farthest-point seeding.
///
/// If `k` exceeds the number of points it is reduced with a warning. Every
/// returned cluster is non-empty.
pub fn kmeans(points: &[Vec2], k: usize) -> Result<KMeans, ModelError> {
    if points.is_empty() {
        return Err(ModelError::NoSamples);
    }
    if k == 0 {
        return Err(ModelError::InvalidParameter("k must be at least 1".into()));
    }
    let k = if k > points.len() {
        log::warn!(
            "k-means asked for {k} clusters but only {} points are available",
            points.len()
        );
        points.len()
    } else {
        k
    };

    let mut centroids = seed_centroids(points, k);
    let (mut assignments, inertia0) = assign(points, &centroids);
    let mut inertia = vec![inertia0];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        centroids = recenter(points, &mut assignments, centroids.len());
        let (next, j) = assign(points, &centroids);
        inertia.push(j);
        if next == assignments {
            break;
        }
        assignments = next;
    }
    // Identical to the current centroids after convergence; after a capped
    // run this keeps centroids equal to the means of non-empty clusters.
    let centroids = recenter(points, &mut assignments, centroids.len());
    Ok(KMeans {
        centroids,
        assignments,
        iterations,
        inertia,
    })
}
