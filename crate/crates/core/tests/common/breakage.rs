use rubble_forge::collection::{Fragment, GeometryCollection, Joint, Material, MaterialKind};
use rubble_forge::geometry::{ConvexPolyhedron, Vec3};
use rubble_forge::rng::SplitMix64;
use std::collections::BTreeSet;

/// Graph input for the release-rule oracle.
#[derive(Clone, Debug)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub anchored: Vec<bool>,
}

/// Random connected graph on `n` fragments: a random spanning tree plus up to
/// `n` extra edges, thresholds in [0.5, 10).
pub fn random_graph(rng: &mut SplitMix64, n: usize) -> Graph {
    let mut pairs = BTreeSet::new();
    for child in 1..n {
        pairs.insert((rng.below(child as u64) as usize, child));
    }
    for _ in 0..rng.below(n as u64 + 1) {
        let (a, b) = (rng.below(n as u64) as usize, rng.below(n as u64) as usize);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let edges = pairs.into_iter().map(|(a, b)| (a, b, rng.range(0.5, 10.0))).collect();
    let anchored = (0..n).map(|_| rng.below(2) == 1).collect();
    Graph { n, edges, anchored }
}

pub fn to_collection(g: &Graph) -> GeometryCollection {
    let cube = ConvexPolyhedron::unit_cube();
    let fragments = (0..g.n)
        .map(|i| Fragment { polyhedron: cube.clone(), solid_id: 0, anchored: g.anchored[i], released: false })
        .collect();
    let joints = g
        .edges
        .iter()
        .map(|&(a, b, t)| Joint {
            a,
            b,
            contact_area: 1.0,
            position: Vec3::ZERO,
            threshold: t,
            accumulated_strain: 0.0,
            broken: false,
        })
        .collect();
    GeometryCollection::from_parts(0, Material::preset(MaterialKind::Concrete), fragments, joints)
}

/// Brute-force replay of the breakage rule written from its statement: a
/// fragment is released when one of its joints that was intact when the
/// strain arrived carries more strain than its threshold; releasing breaks all
/// its joints; then every fragment cut off from all anchored, intact
/// fragments collapses. Reachability by naive relaxation to a fixpoint.
pub struct Oracle {
    pub released: Vec<bool>,
    pub broken: Vec<bool>,
    acc: Vec<f64>,
}

impl Oracle {
    pub fn new(g: &Graph) -> Oracle {
        Oracle { released: vec![false; g.n], broken: vec![false; g.edges.len()], acc: vec![0.0; g.edges.len()] }
    }

    pub fn apply(&mut self, g: &Graph, strain: &[f64]) -> (BTreeSet<usize>, BTreeSet<usize>) {
        for (a, s) in self.acc.iter_mut().zip(strain) {
            *a += s;
        }
        let broken_before = self.broken.clone();
        let mut by_strain = BTreeSet::new();
        loop {
            let mut changed = false;
            for f in 0..g.n {
                if self.released[f] {
                    continue;
                }
                let fires = g.edges.iter().enumerate().any(|(k, &(a, b, t))| {
                    (a == f || b == f) && !broken_before[k] && self.acc[k] > t
                });
                if fires {
                    self.released[f] = true;
                    by_strain.insert(f);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.break_joints_of_released(g);

        let mut supported: Vec<bool> = (0..g.n).map(|f| g.anchored[f] && !self.released[f]).collect();
        loop {
            let mut changed = false;
            for (k, &(a, b, _)) in g.edges.iter().enumerate() {
                if self.broken[k] || self.released[a] || self.released[b] {
                    continue;
                }
                if supported[a] != supported[b] {
                    supported[a] = true;
                    supported[b] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut collapsed = BTreeSet::new();
        for (f, released) in self.released.iter_mut().enumerate() {
            if !*released && !supported[f] {
                *released = true;
                collapsed.insert(f);
            }
        }
        self.break_joints_of_released(g);
        (by_strain, collapsed)
    }

    fn break_joints_of_released(&mut self, g: &Graph) {
        for (k, &(a, b, _)) in g.edges.iter().enumerate() {
            if self.released[a] || self.released[b] {
                self.broken[k] = true;
            }
        }
    }
}
