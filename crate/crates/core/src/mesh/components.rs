use nalgebra::Point3;

use super::{edge_key, TriMesh};

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Labels each triangle with its edge-connected shell, numbered in order of
/// first appearance. Returns the labels and the shell count.
pub fn shell_labels(mesh: &TriMesh) -> (Vec<usize>, usize) {
    let tris = mesh.triangles();
    let mut edges: Vec<(u64, u32)> = Vec::with_capacity(tris.len() * 3);
    for (i, t) in tris.iter().enumerate() {
        for k in 0..3 {
            edges.push((edge_key(t[k], t[(k + 1) % 3]), i as u32));
        }
    }
    edges.sort_unstable();
    let mut dsu = DisjointSet::new(tris.len());
    for w in edges.windows(2) {
        if w[0].0 == w[1].0 {
            dsu.union(w[0].1, w[1].1);
        }
    }
    let mut label_of_root = vec![usize::MAX; tris.len()];
    let mut labels = Vec::with_capacity(tris.len());
    let mut count = 0;
    for i in 0..tris.len() as u32 {
        let r = dsu.find(i) as usize;
        if label_of_root[r] == usize::MAX {
            label_of_root[r] = count;
            count += 1;
        }
        labels.push(label_of_root[r]);
    }
    (labels, count)
}

/// Labels each triangle with its solid. Inward-oriented shells (cavities)
/// join the smallest outer shell that encloses them. Solids are numbered by
/// the lexicographic minimum corner of their bounding boxes.
pub fn solid_labels(mesh: &TriMesh) -> (Vec<usize>, usize) {
    let (labels, count) = shell_labels(mesh);
    if count <= 1 {
        return (labels, count);
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let shells: Vec<TriMesh> = members.iter().map(|ids| mesh.submesh(ids.iter().copied())).collect();
    let volumes: Vec<f64> = shells.iter().map(|s| s.volume()).collect();

    let mut owner: Vec<usize> = (0..count).collect();
    for c in (0..count).filter(|&c| volumes[c] < 0.0) {
        let probe = shells[c].vertices()[0];
        let enclosing = (0..count)
            .filter(|&o| volumes[o] > 0.0 && shells[o].winding_number(&probe) > 0.5)
            .min_by(|&a, &b| volumes[a].total_cmp(&volumes[b]));
        if let Some(o) = enclosing {
            owner[c] = o;
        }
    }

    let mut corner: Vec<Option<Point3<f64>>> = vec![None; count];
    for c in 0..count {
        let o = owner[c];
        let m = shells[c].aabb().min;
        corner[o] = Some(match corner[o] {
            None => m,
            Some(p) => p.inf(&m),
        });
    }
    let mut solids: Vec<usize> = (0..count).filter(|&c| owner[c] == c).collect();
    solids.sort_by(|&a, &b| {
        let (pa, pb) = (corner[a].unwrap(), corner[b].unwrap());
        pa.x.total_cmp(&pb.x)
            .then(pa.y.total_cmp(&pb.y))
            .then(pa.z.total_cmp(&pb.z))
            .then(a.cmp(&b))
    });
    let mut rank = vec![usize::MAX; count];
    for (r, &c) in solids.iter().enumerate() {
        rank[c] = r;
    }
    let out = labels.iter().map(|&l| rank[owner[l]]).collect();
    (out, solids.len())
}

/// Splits a mesh into closed solids, ordered as in [`solid_labels`].
pub fn connected_components(mesh: &TriMesh) -> Vec<TriMesh> {
    let (labels, count) = solid_labels(mesh);
    if count <= 1 {
        return vec![mesh.clone()];
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    groups.into_iter().map(|g| mesh.submesh(g)).collect()
}
