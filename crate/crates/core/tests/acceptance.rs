//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

// `ensure!(x <= tol)` is written positively so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use common::breakage::{random_graph, to_collection, Oracle};
use common::bridge::{check_golden, scene as bridge_scene, script, transcript_lines, Client, NEW_POSE};
use common::raycast::analytic_depth;
use rubble_forge::bridge::{decode_image_data, serve, Hub, SimSession};
use rubble_forge::cli;
use rubble_forge::collection::{
    build_collection, Fragment, GeometryCollection, Joint, Material, MaterialKind, StrainField, MIN_JOINT_AREA,
};
use rubble_forge::events::*;
use rubble_forge::fracture::{fracture_solid, sample_sites, FracturePattern};
use rubble_forge::geometry::{ConvexPolyhedron, HalfSpace, Quat, Transform, Vec3};
use rubble_forge::physics::{FragmentRef, WorldState};
use rubble_forge::rng::{derive_seed, SplitMix64};
use rubble_forge::scene::{instantiate, parse_scene, serialize_scene, EnvironmentConfig, Weather};
use rubble_forge::sensors::{render, Camera, CameraIntrinsics, DEPTH_MISS};
use serde_json::Value;
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn slab() -> ConvexPolyhedron {
    ConvexPolyhedron::cuboid(Vec3::ZERO, Vec3::new(4.0, 1.0, 4.0))
}

fn random_unit(rng: &mut SplitMix64) -> Vec3 {
    loop {
        let v = Vec3::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

fn voronoi_nearest_site() -> Outcome {
    let start = Instant::now();
    let solid = slab();
    let (mut checked, mut agree, mut excluded) = (0u64, 0u64, 0u64);
    for c in 0..20u64 {
        let n = 3 + (c as usize * 47) / 19;
        let seed = derive_seed(0xACCE, &[c]);
        let sites = sample_sites(&solid, n, seed).map_err(|e| e.to_string())?.sites;
        let frags = fracture_solid(&solid, &FracturePattern::UniformVoronoi { site_count: n, seed })
            .map_err(|e| e.to_string())?
            .fragments;
        let planes: Vec<Vec<HalfSpace>> = frags.iter().map(|f| f.planes()).collect();
        let inside = |k: usize, p: Vec3| planes[k].iter().all(|h| h.signed_distance(p) <= 1e-9);
        // Cell of each site: the fragment holding it.
        let cell_of: Vec<Option<usize>> =
            sites.iter().map(|&s| (0..frags.len()).find(|&k| inside(k, s))).collect();

        let mut rng = SplitMix64::new(seed ^ 0x5EED);
        for _ in 0..100_000 {
            let p = Vec3::new(rng.range(0.0, 4.0), rng.range(0.0, 1.0), rng.range(0.0, 4.0));
            let d2: Vec<f64> = sites.iter().map(|s| (p - *s).norm_squared()).collect();
            let i = (0..n).min_by(|&a, &b| d2[a].total_cmp(&d2[b])).unwrap();
            let bisector = (0..n)
                .filter(|&j| j != i)
                .map(|j| (d2[j] - d2[i]) / (2.0 * (sites[j] - sites[i]).norm()))
                .fold(f64::INFINITY, f64::min);
            if bisector < 1e-6 {
                excluded += 1;
                continue;
            }
            checked += 1;
            if cell_of[i].is_some_and(|k| inside(k, p)) {
                agree += 1;
            }
        }
    }
    let ratio = agree as f64 / checked as f64;
    let elapsed = start.elapsed();
    ensure!(ratio >= 0.999, "only {:.5} of points lie in their nearest site's cell", ratio);
    ensure!(elapsed < Duration::from_secs(30), "took {:.1?}", elapsed);
    Ok(format!("{agree}/{checked} points in nearest cell ({excluded} near bisectors excluded), {elapsed:.1?}"))
}

fn volume_conservation() -> Outcome {
    let start = Instant::now();
    let wall = ConvexPolyhedron::cuboid(Vec3::new(-1.5, 0.0, -0.15), Vec3::new(1.5, 2.7, 0.15))
        .transformed(&Transform::new(Vec3::new(2.0, 0.0, 1.0), Quat::from_axis_angle(Vec3::Y, 0.4)));
    let mut worst = 0.0f64;
    let mut runs = 0;
    for seed in 0..20u64 {
        let mut rng = SplitMix64::new(derive_seed(0xF00D, &[seed]));
        let solid = if seed % 2 == 0 { slab() } else { wall.clone() };
        let bb = solid.aabb();
        let planes = (0..1 + rng.below(4))
            .filter_map(|_| {
                let p = bb.min.lerp(bb.max, rng.range(0.2, 0.8));
                HalfSpace::through_point(random_unit(&mut rng), p)
            })
            .collect();
        let patterns = [
            FracturePattern::UniformVoronoi { site_count: 3 + rng.below(48) as usize, seed },
            FracturePattern::Planar { planes, jitter_amplitude: rng.range(0.0, 0.2), seed },
            FracturePattern::Brick {
                brick_dims: Vec3::new(rng.range(0.2, 0.6), rng.range(0.08, 0.3), rng.range(0.1, 0.3)),
                row_offset: None,
            },
        ];
        for pattern in &patterns {
            let r = fracture_solid(&solid, pattern).map_err(|e| format!("{pattern:?}: {e}"))?;
            let err = (r.total_volume() - r.source_volume).abs() / r.source_volume;
            ensure!(err <= 0.01, "{pattern:?} seed {seed}: relative volume error {err:.3e}");
            worst = worst.max(err);
            runs += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {:.1?}", elapsed);
    Ok(format!("{runs} fractures, worst relative error {worst:.2e}, {elapsed:.1?}"))
}

fn breakage_rule_oracle() -> Outcome {
    let mut rng = SplitMix64::new(0xB2EA);
    let mut rounds_total = 0;
    for case in 0..1000 {
        let n = 1 + rng.below(6) as usize;
        let g = random_graph(&mut rng, n);
        let mut gc = to_collection(&g);
        let mut oracle = Oracle::new(&g);
        for _ in 0..1 + rng.below(3) {
            let s: Vec<f64> =
                g.edges.iter().map(|_| if rng.below(4) == 0 { 0.0 } else { rng.range(0.0, 8.0) }).collect();
            let got_strain = gc.apply_strain(&StrainField(s.clone()));
            let got_support = gc.structural_support_pass();
            let (want_strain, want_support) = oracle.apply(&g, &s);
            ensure!(got_strain == want_strain, "case {case}: strain release {got_strain:?} vs {want_strain:?}");
            ensure!(got_support == want_support, "case {case}: collapse {got_support:?} vs {want_support:?}");
            let released: Vec<bool> = gc.fragments.iter().map(|f| f.released).collect();
            let broken: Vec<bool> = gc.joints.iter().map(|j| j.broken).collect();
            ensure!(released == oracle.released && broken == oracle.broken, "case {case}: final state differs");
            rounds_total += 1;
        }
    }
    Ok(format!("1000 graphs, {rounds_total} strain rounds, all identical to the brute-force replay"))
}

fn event_formulas() -> Outcome {
    let mut rng = SplitMix64::new(0xE7E7);
    let center = Vec3::new(1.0, 1.5, -2.0);
    let radius = 3.0;
    let strain_magnitude = 25.0;
    let mut joints = Vec::new();
    let (mut inside, mut outside) = (0, 0);
    while inside < 1000 || outside < 1000 {
        let p = center + random_unit(&mut rng) * rng.range(0.0, 2.0 * radius);
        let count = if (p - center).norm() <= radius { &mut inside } else { &mut outside };
        if *count == 1000 {
            continue;
        }
        *count += 1;
        joints.push(Joint {
            a: 0,
            b: 1,
            contact_area: 1.0,
            position: p,
            threshold: 1.0,
            accumulated_strain: 0.0,
            broken: false,
        });
    }
    let frag = |_| Fragment { polyhedron: ConvexPolyhedron::unit_cube(), solid_id: 0, anchored: true, released: false };
    let gc = GeometryCollection::from_parts(0, Material::preset(MaterialKind::Brick), (0..2).map(frag).collect(), joints);
    let mut worst = 0.0f64;
    for falloff in [Falloff::Squared, Falloff::Linear] {
        let e = Explosion { center, strain_magnitude, force_magnitude: 1.0, radius, falloff };
        let field = strain_field_explosion(&e, &gc);
        for (j, s) in gc.joints.iter().zip(&field.0) {
            let q = j.position;
            let d = ((q.x - center.x).powi(2) + (q.y - center.y).powi(2) + (q.z - center.z).powi(2)).sqrt();
            if d > radius {
                ensure!(*s == 0.0, "strain {s} outside the radius at distance {d}");
                continue;
            }
            let dc = d.max(0.01);
            let want = match falloff {
                Falloff::Squared => strain_magnitude / (dc * dc),
                Falloff::Linear => strain_magnitude / dc,
            };
            let err = (s - want).abs() / want.max(1.0);
            ensure!(err <= 1e-12, "strain {s} vs {want} at distance {d}");
            worst = worst.max(err);
        }
    }

    // Impulse norms: the force magnitude away from the center, zero at it.
    let mut worst_ulps = 0.0f64;
    for k in 0..1000 {
        let force_magnitude = rng.range(0.0, 500.0);
        let e = Explosion { center, strain_magnitude, force_magnitude, radius, falloff: Falloff::Squared };
        let pos = center + random_unit(&mut rng) * rng.range(1e-3, radius);
        let norm = explosion_impulse(&e, pos).norm();
        let ulps = (norm - force_magnitude).abs() / (f64::EPSILON * force_magnitude.max(f64::MIN_POSITIVE));
        ensure!(ulps <= 4.0, "impulse #{k}: |J| = {norm} for M_f = {force_magnitude}");
        worst_ulps = worst_ulps.max(ulps);
        ensure!(explosion_impulse(&e, center) == Vec3::ZERO, "non-zero impulse at the center");
    }

    // Buildup break step for random real (T, M).
    let base = build_collection(
        &[fracture_solid(&slab(), &FracturePattern::UniformVoronoi { site_count: 8, seed: 2 }).unwrap()],
        &Material::preset(MaterialKind::Concrete),
        0,
    );
    for k in 0..100 {
        let t = rng.range(0.1, 50.0);
        let m = rng.range(0.1, 10.0);
        let want = (t / m).ceil() as u32 - 1;
        let mut gc = base.clone();
        for j in &mut gc.joints {
            j.threshold = t;
        }
        let e = StrainBuildup {
            region: Sphere { center: Vec3::new(2.0, 0.5, 2.0), radius: 100.0 },
            per_step_magnitude: m,
            duration: want + 2,
        };
        let mut broke_at = vec![None; gc.joints.len()];
        for step in 0..e.duration {
            gc.apply_strain(&strain_buildup_step(&e, &gc, step));
            for (b, j) in broke_at.iter_mut().zip(&gc.joints) {
                if j.broken && b.is_none() {
                    *b = Some(step);
                }
            }
        }
        ensure!(
            broke_at.iter().all(|b| *b == Some(want)),
            "pair #{k} T={t} M={m}: expected step {want}, got {:?}",
            broke_at.iter().collect::<BTreeSet<_>>()
        );
    }
    Ok(format!(
        "1000 joints inside and 1000 outside R for both falloffs (worst rel. error {worst:.1e}), 1000 impulses (worst {worst_ulps:.1} ulp), 100 buildup pairs"
    ))
}

fn monotonicity() -> Outcome {
    let scene = parse_scene(
        br#"{"seed":4,"rooms":[
            {"archetype":"simple_door","position":[0,0],"material":"wood"},
            {"archetype":"pillar_room","position":[1,0],"material":"concrete"}]}"#,
    )
    .map_err(|e| e.to_string())?;
    let base = instantiate(&scene).map_err(|e| e.to_string())?;
    let center = base.bounds().center();
    let released = |event: DestructionEvent| -> Result<BTreeSet<FragmentRef>, String> {
        let mut w = base.clone();
        Ok(apply_event(&mut w, &event).map_err(|e| e.to_string())?.released.into_iter().collect())
    };
    let mut summary = Vec::new();
    let universal = [1.0, 3.0, 4.5, 6.0, 8.0, 11.0, 14.0, 15.5, 20.0, 40.0];
    let explosion = [1.0, 3.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0, 1280.0];
    for (name, mags) in [("universal", universal), ("explosion", explosion)] {
        let mut prev = BTreeSet::new();
        let mut counts = Vec::new();
        for m in mags {
            let event = if name == "universal" {
                DestructionEvent::UniversalStrain(UniversalStrain { magnitude: m })
            } else {
                DestructionEvent::Explosion(Explosion {
                    center,
                    strain_magnitude: m,
                    force_magnitude: 20.0,
                    radius: 4.0,
                    falloff: Falloff::Squared,
                })
            };
            let now = released(event)?;
            ensure!(prev.is_subset(&now), "{name}: released set shrank at magnitude {m}");
            counts.push(now.len());
            prev = now;
        }
        ensure!(counts[0] < counts[9], "{name}: magnitudes never released anything new: {counts:?}");
        summary.push(format!("{name} {counts:?}"));
    }
    Ok(summary.join("; "))
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let scene = common::sample_scene();
    ensure!(scene.rooms.len() == 4 && scene.cameras.len() == 2, "sample scene shape changed");
    let mut trees = Vec::new();
    let mut times = Vec::new();
    let mut manifest = None;
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let start = Instant::now();
        let m = cli::generate(&scene, "sample", dir.path(), 1, &AtomicBool::new(false)).map_err(|e| e.message)?;
        times.push(start.elapsed());
        trees.push(dir_contents(&dir.path().join("sample")));
        manifest = Some(m);
    }
    let m = manifest.unwrap();
    ensure!(trees[0] == trees[1], "outputs differ between runs");
    ensure!(trees[0].len() == 9, "expected 2 frame sets and a manifest, found {} files", trees[0].len());
    let slowest = times.iter().max().unwrap();
    ensure!(*slowest < Duration::from_secs(60), "generate took {slowest:.1?}");
    for cam in &scene.cameras {
        ensure!((cam.intrinsics.width, cam.intrinsics.height) == (320, 240), "camera is not 320x240");
    }
    Ok(format!(
        "{} fragments, {} released, {} files byte-identical; slowest run {slowest:.2?}",
        m.fragment_count,
        m.released_count,
        trees[0].len()
    ))
}

fn renderer_oracle() -> Outcome {
    let lo = Vec3::new(-0.5, 0.0, -0.5);
    let hi = Vec3::new(0.5, 1.0, 0.5);
    let gc = GeometryCollection::from_fragments(
        vec![(0, ConvexPolyhedron::cuboid(lo, hi))],
        Material::preset(MaterialKind::Concrete),
        0,
        MIN_JOINT_AREA,
    );
    let world = WorldState::new(vec![gc], 0);
    let k = CameraIntrinsics { width: 64, height: 64, horizontal_fov: 1.1, near: 0.1, far: 30.0 };
    let (eye, target) = (Vec3::new(1.7, 2.1, 2.6), Vec3::new(0.0, 0.5, 0.0));
    let frame = render(&world, &Camera { pose: Transform::look_at(eye, target, Vec3::Y), intrinsics: k }, &EnvironmentConfig::default());
    let want = analytic_depth(eye, target, &k, lo, hi);
    let mut worst = 0.0f64;
    let mut hits = 0;
    for (i, (got, want)) in frame.depth.iter().zip(&want).enumerate() {
        match want {
            Some(z) => {
                let err = (*got as f64 - z).abs();
                ensure!(err <= 1e-5, "pixel {i}: depth {got} vs analytic {z}");
                worst = worst.max(err);
                hits += 1;
            }
            None => ensure!(*got == DEPTH_MISS, "pixel {i}: expected a miss, got {got}"),
        }
    }

    let scene = common::sample_scene();
    let mut w = instantiate(&scene).map_err(|e| e.to_string())?;
    for ev in &scene.events {
        apply_event(&mut w, ev).map_err(|e| e.to_string())?;
    }
    let envs = [
        EnvironmentConfig { weather: Weather::Sunshine, time_of_day: 12.0 },
        EnvironmentConfig { weather: Weather::Fog { density: 0.5 }, time_of_day: 12.0 },
        EnvironmentConfig { weather: Weather::Sunshine, time_of_day: 6.25 },
        EnvironmentConfig { weather: Weather::Rain { intensity: 0.8 }, time_of_day: 21.0 },
    ];
    let frames: Vec<_> = envs.iter().map(|e| render(&w, &scene.cameras[0], e)).collect();
    for (e, f) in envs.iter().zip(&frames).skip(1) {
        ensure!(f.depth_bytes() == frames[0].depth_bytes(), "depth changed under {e:?}");
        ensure!(f.segmentation == frames[0].segmentation, "segmentation changed under {e:?}");
    }
    Ok(format!("{hits} cube pixels, worst depth error {worst:.1e} m; depth and labels identical across {} environments", envs.len()))
}

fn physics_sanity() -> Outcome {
    let pieces = fracture_solid(
        &ConvexPolyhedron::cuboid(Vec3::new(-1.0, 0.0, -0.2), Vec3::new(1.0, 1.2, 0.2)),
        &FracturePattern::UniformVoronoi { site_count: 10, seed: 77 },
    )
    .map_err(|e| e.to_string())?
    .fragments;
    let mut rng = SplitMix64::new(0xD209);
    let mut worst_rest = 0.0f64;
    let mut worst_depth = 0.0f64;
    let mut contacts = Vec::new();
    for (k, piece) in pieces.into_iter().enumerate() {
        let rot = Quat::from_axis_angle(random_unit(&mut rng), rng.range(0.0, 3.1));
        let c = piece.centroid();
        let frag = piece.translated(-c).transformed(&Transform::new(Vec3::ZERO, rot));
        let lift = rng.range(0.3, 3.0) - frag.aabb().min.y;
        let frag = frag.translated(Vec3::new(0.0, lift, 0.0));

        let gc = GeometryCollection::from_fragments(vec![(0, frag)], Material::preset(MaterialKind::Concrete), 0, MIN_JOINT_AREA);
        let mut w = WorldState::new(vec![gc], k as u64);
        w.collections[0].fragments[0].released = true;
        w.spawn_body(FragmentRef { collection: 0, fragment: 0 });
        let dt = w.config.dt;
        let min_y = |w: &WorldState| w.bodies[0].min_y();

        let mut contact = None;
        let mut ke = Vec::new();
        for step in 0..4000 {
            w.step(dt).map_err(|e| e.to_string())?;
            let y = min_y(&w);
            worst_depth = worst_depth.min(y);
            ensure!(y >= -0.01, "fragment {k}: vertex at {y} m on step {step}");
            if contact.is_none() && y <= 1e-9 {
                contact = Some(step);
            }
            if contact.is_some() {
                ke.push(w.kinetic_energy());
            }
        }
        let Some(contact) = contact else {
            return Err(format!("fragment {k} never reached the ground"));
        };
        contacts.push(contact);
        for s in 0..ke.len().saturating_sub(50) {
            ensure!(ke[s + 50] <= ke[s] + 1e-9, "fragment {k}: KE rose over window at contact+{s}: {} -> {}", ke[s], ke[s + 50]);
        }
        let out = w.settle_default().map_err(|e| e.to_string())?;
        ensure!(out.settled, "fragment {k} did not settle");
        let rest = min_y(&w).abs();
        ensure!(rest <= 1e-3, "fragment {k} rests with lowest vertex at {}", min_y(&w));
        worst_rest = worst_rest.max(rest);
    }
    Ok(format!(
        "10 dropped fragments touched down after {}..{} steps and settled (worst rest offset {worst_rest:.1e} m, deepest vertex {worst_depth:.1e} m); KE windows after contact non-increasing",
        contacts.iter().min().unwrap(),
        contacts.iter().max().unwrap()
    ))
}

fn bridge_conformance() -> Outcome {
    let mut hub = Hub::new(SimSession::new(bridge_scene()).map_err(|e| e.to_string())?);
    let direct: Vec<(String, Vec<Value>)> = script()
        .into_iter()
        .map(|line| {
            let out = hub.handle_line(1, line.as_bytes()).into_iter().map(|(_, m)| m).collect();
            (line, out)
        })
        .collect();
    let transcript = transcript_lines(&direct);
    catch_unwind(|| check_golden("bridge_session.jsonl", &transcript)).map_err(|_| "in-process transcript differs from golden".to_string())?;

    let handle = serve(SimSession::new(bridge_scene()).unwrap(), "127.0.0.1:0").map_err(|e| e.to_string())?;
    let mut client = Client::connect(&handle);
    let mut noisy = Client::connect(&handle);
    let mut over_tcp = Vec::new();
    for (i, line) in script().into_iter().enumerate() {
        // A misbehaving second client interleaves garbage between every line.
        let junk = ["{", "[1,2]", r#"{"op":"publish","topic":"/camera/depth"}"#, "null"][i % 4];
        let reply = noisy.exchange(junk);
        ensure!(
            reply.len() == 1 && reply[0]["op"] == "status" && reply[0]["level"] == "error",
            "malformed `{junk}` got {reply:?}"
        );
        let r = client.exchange(&line);
        over_tcp.push((line, r));
    }
    ensure!(transcript_lines(&over_tcp) == transcript, "TCP transcript differs from the in-process one");

    client.exchange(r#"{"op":"subscribe","topic":"/camera/depth"}"#);
    let replies = client.exchange(r#"{"op":"call_service","service":"/sim/step","args":{"n":3}}"#);
    let hub = handle.shutdown();
    let depth = replies
        .iter()
        .find(|m| m["topic"] == "/camera/depth")
        .ok_or("no depth publish after step")?;
    let world = hub.session.world().ok_or("session lost its world")?;
    let scene = bridge_scene();
    let camera = Camera { pose: serde_json::from_str(NEW_POSE).unwrap(), intrinsics: scene.cameras[0].intrinsics };
    let direct_frame = render(world, &camera, &scene.environment);
    ensure!(
        decode_image_data(&depth["msg"]) == Some(direct_frame.depth_bytes()),
        "published depth differs from direct render"
    );
    Ok(format!("{} scripted lines match golden in-process and over TCP; depth publish byte-equal; malformed input isolated", direct.len()))
}

fn scene_roundtrip() -> Outcome {
    let scene = common::sample_scene();
    let text = serialize_scene(&scene);
    let again = parse_scene(text.as_bytes()).map_err(|e| e.to_string())?;
    ensure!(again == scene, "parse(serialize(scene)) differs");
    ensure!(serialize_scene(&again) == text, "serialization is not stable");
    let overlap = parse_scene(
        br#"{"rooms":[{"archetype":"beam_room","position":[0,0],"material":"brick"},
                      {"archetype":"simple_door","position":[1,0],"material":"wood"}]}"#,
    );
    let unknown = parse_scene(br#"{"rooms":[],"colour":"red"}"#);
    let (o, u) = match (overlap, unknown) {
        (Err(o), Err(u)) => (o.kind(), u.kind()),
        _ => return Err("invalid documents were accepted".into()),
    };
    ensure!(o == "overlap" && u == "unknown_key", "error kinds were {o} and {u}");
    Ok(format!("{} rooms roundtrip; errors `{o}` and `{u}`", scene.rooms.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Voronoi nearest-site correctness", voronoi_nearest_site),
        ("volume conservation", volume_conservation),
        ("breakage-rule oracle", breakage_rule_oracle),
        ("event formulas", event_formulas),
        ("release monotonicity", monotonicity),
        ("generate determinism and runtime", determinism),
        ("renderer oracle and environment invariance", renderer_oracle),
        ("physics sanity", physics_sanity),
        ("bridge conformance", bridge_conformance),
        ("scene roundtrip and error kinds", scene_roundtrip),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
