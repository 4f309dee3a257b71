use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SynthError;
use crate::io::{ModelDatabase, ModelEntry, UpAxis};
use crate::registration::stable_hash;

pub const CATALOG_CATEGORIES: [&str; 6] = ["chair", "table", "sofa", "bed", "shelf", "desk"];

/// Axis-aligned part, z-up, meters.
type Part = ([f64; 3], [f64; 3]);

fn chair(r: &mut ChaCha8Rng) -> Vec<Part> {
    let (w, d) = (r.random_range(0.4..0.55), r.random_range(0.4..0.55));
    let seat = r.random_range(0.4..0.48);
    let back = seat + r.random_range(0.35..0.5);
    let leg = 0.04;
    vec![
        ([0.0, 0.0, seat - 0.04], [w, d, seat]),
        ([0.0, d - 0.04, seat], [w, d, back]),
        ([0.0, 0.0, 0.0], [leg, leg, seat - 0.04]),
        ([w - leg, 0.0, 0.0], [w, leg, seat - 0.04]),
        ([0.0, d - leg, 0.0], [leg, d, seat - 0.04]),
        ([w - leg, d - leg, 0.0], [w, d, seat - 0.04]),
    ]
}

fn table(r: &mut ChaCha8Rng) -> Vec<Part> {
    let (w, d, h) = (r.random_range(0.9..1.6), r.random_range(0.6..0.9), r.random_range(0.7..0.78));
    let (leg, inset) = (0.06, r.random_range(0.0..0.08));
    let mut parts = vec![([0.0, 0.0, h - 0.04], [w, d, h])];
    for (x, y) in [(inset, inset), (w - inset - leg, inset), (inset, d - inset - leg), (w - inset - leg, d - inset - leg)] {
        parts.push(([x, y, 0.0], [x + leg, y + leg, h - 0.04]));
    }
    parts
}

fn sofa(r: &mut ChaCha8Rng) -> Vec<Part> {
    let (w, d) = (r.random_range(1.6..2.2), r.random_range(0.8..0.95));
    let (seat, back, arm) = (r.random_range(0.38..0.45), r.random_range(0.75..0.9), r.random_range(0.15..0.22));
    let arm_h = seat + r.random_range(0.15..0.25);
    vec![
        ([arm, 0.0, 0.0], [w - arm, d - 0.2, seat]),
        ([0.0, d - 0.2, 0.0], [w, d, back]),
        ([0.0, 0.0, 0.0], [arm, d - 0.2, arm_h]),
        ([w - arm, 0.0, 0.0], [w, d - 0.2, arm_h]),
    ]
}

fn bed(r: &mut ChaCha8Rng) -> Vec<Part> {
    let (w, d) = (r.random_range(1.0..1.9), r.random_range(1.9..2.1));
    let base = r.random_range(0.4..0.55);
    let head = r.random_range(0.9..1.2);
    let pillow = r.random_range(0.45..0.6);
    vec![
        ([0.0, 0.0, 0.0], [w, d - 0.08, base]),
        ([0.0, d - 0.08, 0.0], [w, d, head]),
        ([0.1, d - 0.08 - pillow, base], [w - 0.1, d - 0.1, base + 0.12]),
    ]
}

fn shelf(r: &mut ChaCha8Rng) -> Vec<Part> {
    let (w, d, h) = (r.random_range(0.6..1.0), r.random_range(0.25..0.4), r.random_range(1.2..1.9));
    let t = 0.025;
    let levels = r.random_range(2..5usize);
    let mut parts = vec![
        ([0.0, 0.0, 0.0], [t, d, h]),
        ([w - t, 0.0, 0.0], [w, d, h]),
        ([t, d - t, 0.0], [w - t, d, h]),
        ([t, 0.0, 0.0], [w - t, d - t, t]),
        ([t, 0.0, h - t], [w - t, d - t, h]),
    ];
    for i in 1..levels {
        let z = h * i as f64 / levels as f64;
        parts.push(([t, 0.0, z - t / 2.0], [w - t, d - t, z + t / 2.0]));
    }
    parts
}

fn desk(r: &mut ChaCha8Rng) -> Vec<Part> {
    let (w, d, h) = (r.random_range(1.0..1.5), r.random_range(0.55..0.75), r.random_range(0.72..0.76));
    let ped = r.random_range(0.35..0.45);
    vec![
        ([0.0, 0.0, h - 0.03], [w, d, h]),
        ([0.0, 0.0, 0.0], [0.03, d, h - 0.03]),
        ([w - ped, 0.0, 0.0], [w, d, h - 0.03]),
        ([0.03, d - 0.02, 0.3], [w - ped, d, h - 0.03]),
    ]
}

/// Writes the parts as a y-up OBJ (file axes `(x, z, −y)`) with quad faces.
fn parts_to_obj(parts: &[Part], name: &str) -> String {
    let mut s = format!("# procedural {name}\no {name}\n");
    for (k, (lo, hi)) in parts.iter().enumerate() {
        let _ = writeln!(s, "g part{k}");
        for i in 0..8 {
            let x = if i & 1 == 0 { lo[0] } else { hi[0] };
            let y = if i & 2 == 0 { lo[1] } else { hi[1] };
            let z = if i & 4 == 0 { lo[2] } else { hi[2] };
            let _ = writeln!(s, "v {x} {z} {}", -y);
        }
        let base = 8 * k + 1;
        for q in [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]] {
            let _ = writeln!(s, "f {} {} {} {}", base + q[0], base + q[1], base + q[2], base + q[3]);
        }
    }
    s
}

/// Writes `per_category` procedural models for each of
/// [`CATALOG_CATEGORIES`] under `root` and returns the opened database.
pub fn generate_model_database(root: &Path, per_category: usize, seed: u64) -> Result<ModelDatabase, SynthError> {
    let mut entries = Vec::new();
    for cat in CATALOG_CATEGORIES {
        let dir = root.join(cat);
        std::fs::create_dir_all(&dir).map_err(|e| crate::io::FormatError::Io {
            path: dir.clone(),
            source: e,
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stable_hash(cat.as_bytes()));
        for i in 0..per_category {
            let parts = match cat {
                "chair" => chair(&mut rng),
                "table" => table(&mut rng),
                "sofa" => sofa(&mut rng),
                "bed" => bed(&mut rng),
                "shelf" => shelf(&mut rng),
                _ => desk(&mut rng),
            };
            let id = format!("{cat}-{i:03}");
            let rel = PathBuf::from(cat).join(format!("{id}.obj"));
            crate::io::write_bytes(&root.join(&rel), parts_to_obj(&parts, &id).as_bytes())?;
            entries.push(ModelEntry {
                id,
                category: cat.to_string(),
                mesh: rel,
                up: UpAxis::Y,
            });
        }
    }
    ModelDatabase::create(root, entries)?;
    Ok(ModelDatabase::open(root)?)
}
