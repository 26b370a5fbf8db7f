//! Geometry collections: fragments of one room joined by breakable joints.
//!
//! Release rule: if any unbroken joint of a fragment carries accumulated strain
//! strictly above its threshold, every joint of that fragment breaks and the
//! fragment becomes an independent body. Exceedance is evaluated on the joint
//! state at the start of a strain application, so the outcome does not depend
//! on the order joints are visited.

use crate::fracture::{FracturePattern, FractureResult};
use crate::geometry::{shared_face_contact, ConvexPolyhedron, Vec3, ANTI_ALIGN_TOL, COPLANAR_TOL};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};

/// Contacts smaller than this never become joints (m²).
pub const MIN_JOINT_AREA: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Brick,
    Concrete,
    Wood,
}

impl MaterialKind {
    pub const ALL: [MaterialKind; 3] = [MaterialKind::Brick, MaterialKind::Concrete, MaterialKind::Wood];

    pub fn name(self) -> &'static str {
        match self {
            MaterialKind::Brick => "brick",
            MaterialKind::Concrete => "concrete",
            MaterialKind::Wood => "wood",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    pub kind: MaterialKind,
    /// kg/m³
    pub density: f64,
    pub strain_threshold: f64,
    pub default_pattern: FracturePattern,
}

impl Material {
    /// Built-in material parameters.
    pub fn preset(kind: MaterialKind) -> Material {
        match kind {
            MaterialKind::Brick => Material {
                kind,
                density: 1900.0,
                strain_threshold: 8.0,
                default_pattern: FracturePattern::Brick { brick_dims: Vec3::new(1.0, 0.5, 1.0), row_offset: None },
            },
            MaterialKind::Concrete => Material {
                kind,
                density: 2400.0,
                strain_threshold: 15.0,
                default_pattern: FracturePattern::UniformVoronoi { site_count: 8, seed: 0 },
            },
            MaterialKind::Wood => Material {
                kind,
                density: 600.0,
                strain_threshold: 4.0,
                default_pattern: FracturePattern::UniformVoronoi { site_count: 4, seed: 0 },
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fragment {
    pub polyhedron: ConvexPolyhedron,
    /// Index of the solid (wall, slab, pillar...) this fragment came from.
    pub solid_id: usize,
    pub anchored: bool,
    pub released: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub a: usize,
    pub b: usize,
    pub contact_area: f64,
    /// Centroid of the contact region.
    pub position: Vec3,
    pub threshold: f64,
    pub accumulated_strain: f64,
    pub broken: bool,
}

impl Joint {
    pub fn other(&self, f: usize) -> usize {
        if self.a == f {
            self.b
        } else {
            self.a
        }
    }
}

/// Per-joint strain increments, indexed like `GeometryCollection::joints`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StrainField(pub Vec<f64>);

impl StrainField {
    pub fn zeros(n: usize) -> StrainField {
        StrainField(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> StrainField {
        StrainField(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometryCollection {
    pub room_id: usize,
    pub material: Material,
    pub fragments: Vec<Fragment>,
    pub joints: Vec<Joint>,
    /// Archetype of the room this collection was built from, when known.
    pub archetype: Option<crate::scene::Archetype>,
    /// Joint indices incident to each fragment.
    adjacency: Vec<Vec<usize>>,
}

/// Assembles the fragments of one or more fractured solids, joining every pair
/// whose shared face area exceeds [`MIN_JOINT_AREA`].
pub fn build_collection(results: &[FractureResult], material: &Material, room_id: usize) -> GeometryCollection {
    let fragments = results
        .iter()
        .flat_map(|r| r.fragments.iter().map(move |p| (r.source_solid_id, p.clone())))
        .collect();
    GeometryCollection::from_fragments(fragments, material.clone(), room_id, MIN_JOINT_AREA)
}

impl GeometryCollection {
    pub fn from_fragments(
        pieces: Vec<(usize, ConvexPolyhedron)>,
        material: Material,
        room_id: usize,
        min_joint_area: f64,
    ) -> GeometryCollection {
        let fragments: Vec<Fragment> = pieces
            .into_iter()
            .map(|(solid_id, polyhedron)| Fragment {
                anchored: touches_ground(&polyhedron),
                polyhedron,
                solid_id,
                released: false,
            })
            .collect();

        // Sweep along x over AABBs, then exact face contact.
        let boxes: Vec<_> = fragments.iter().map(|f| f.polyhedron.aabb()).collect();
        let mut order: Vec<usize> = (0..fragments.len()).collect();
        order.sort_by(|&i, &j| boxes[i].min.x.total_cmp(&boxes[j].min.x).then(i.cmp(&j)));
        let mut pairs = Vec::new();
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                if boxes[j].min.x > boxes[i].max.x + COPLANAR_TOL {
                    break;
                }
                if boxes[i].overlaps(&boxes[j], COPLANAR_TOL) {
                    pairs.push((i.min(j), i.max(j)));
                }
            }
        }
        pairs.sort_unstable();

        let threshold = material.strain_threshold;
        let joints = pairs
            .into_iter()
            .filter_map(|(a, b)| {
                let c = shared_face_contact(&fragments[a].polyhedron, &fragments[b].polyhedron)?;
                (c.area > min_joint_area).then_some(Joint {
                    a,
                    b,
                    contact_area: c.area,
                    position: c.centroid,
                    threshold,
                    accumulated_strain: 0.0,
                    broken: false,
                })
            })
            .collect();
        GeometryCollection::from_parts(room_id, material, fragments, joints)
    }

    /// Builds a collection from explicit fragments and joints.
    pub fn from_parts(room_id: usize, material: Material, fragments: Vec<Fragment>, joints: Vec<Joint>) -> Self {
        let mut adjacency = vec![Vec::new(); fragments.len()];
        for (ji, j) in joints.iter().enumerate() {
            assert!(j.a < fragments.len() && j.b < fragments.len() && j.a != j.b, "joint {ji} endpoints invalid");
            adjacency[j.a].push(ji);
            adjacency[j.b].push(ji);
        }
        GeometryCollection { room_id, material, fragments, joints, archetype: None, adjacency }
    }

    pub fn joints_of(&self, fragment: usize) -> &[usize] {
        &self.adjacency[fragment]
    }

    pub fn neighbors(&self, fragment: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[fragment].iter().map(move |&j| self.joints[j].other(fragment))
    }

    pub fn released_count(&self) -> usize {
        self.fragments.iter().filter(|f| f.released).count()
    }

    pub fn broken_joint_count(&self) -> usize {
        self.joints.iter().filter(|j| j.broken).count()
    }

    /// Zeroes every strain accumulator (start of a new destruction event).
    pub fn reset_strain(&mut self) {
        for j in &mut self.joints {
            j.accumulated_strain = 0.0;
        }
    }

    /// Adds `strain` to the accumulators and applies the release rule. Returns the
    /// fragments released by this call.
    pub fn apply_strain(&mut self, strain: &StrainField) -> BTreeSet<usize> {
        assert_eq!(strain.len(), self.joints.len(), "strain field does not match joint count");
        for (j, &s) in self.joints.iter_mut().zip(&strain.0) {
            debug_assert!(s >= 0.0, "negative strain");
            j.accumulated_strain += s;
        }
        let mut released = BTreeSet::new();
        for j in &self.joints {
            if !j.broken && j.accumulated_strain > j.threshold {
                for f in [j.a, j.b] {
                    if !self.fragments[f].released {
                        released.insert(f);
                    }
                }
            }
        }
        for &f in &released {
            self.release(f);
        }
        released
    }

    /// Releases every unreleased fragment that has no path of unbroken joints to
    /// an anchored, unreleased fragment.
    pub fn structural_support_pass(&mut self) -> BTreeSet<usize> {
        let n = self.fragments.len();
        let mut supported = vec![false; n];
        let mut queue: VecDeque<usize> = (0..n)
            .filter(|&f| self.fragments[f].anchored && !self.fragments[f].released)
            .collect();
        for &f in &queue {
            supported[f] = true;
        }
        while let Some(f) = queue.pop_front() {
            for &ji in &self.adjacency[f] {
                let j = &self.joints[ji];
                if j.broken {
                    continue;
                }
                let g = j.other(f);
                if !supported[g] && !self.fragments[g].released {
                    supported[g] = true;
                    queue.push_back(g);
                }
            }
        }
        let orphans: BTreeSet<usize> =
            (0..n).filter(|&f| !supported[f] && !self.fragments[f].released).collect();
        for &f in &orphans {
            self.release(f);
        }
        orphans
    }

    fn release(&mut self, f: usize) {
        self.fragments[f].released = true;
        for &ji in &self.adjacency[f] {
            self.joints[ji].broken = true;
        }
    }

    /// Total volume of all fragments.
    pub fn volume(&self) -> f64 {
        self.fragments.iter().map(|f| f.polyhedron.volume()).sum()
    }
}

/// A fragment is anchored when one of its faces lies on the ground plane y = 0,
/// facing down.
pub fn touches_ground(p: &ConvexPolyhedron) -> bool {
    (0..p.faces.len()).any(|f| {
        p.face_normal(f).y < -1.0 + ANTI_ALIGN_TOL && p.face_points(f).all(|v| v.y.abs() <= COPLANAR_TOL)
    })
}
