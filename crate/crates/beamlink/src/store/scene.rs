//! Structured-text scene files: materials and surface polygons.
//!
//! Line-oriented, whitespace-separated tokens, `#` starts a comment.
//! Top-level lines define materials; a `surface` line opens a block that
//! runs to the matching `end`:
//!
//! ```text
//! material concrete 0.35
//!
//! surface wall-1
//!   object bldg-1
//!   class WallSurface
//!   function 1000          # optional
//!   material concrete      # optional, references a material line
//!   vertex 0 0 0
//!   vertex 4 0 0
//!   vertex 4 0 3
//!   vertex 0 0 3
//! end
//! ```
//!
//! Vertex winding defines the outward normal (counter-clockwise seen from
//! the normal side). Coordinates are printed with round-trip precision.

use super::StoreError;
use crate::geom::{Surface, Vec3};
use crate::sim::{Material, Scene};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

fn bad(file: &str, line: usize, reason: impl Into<String>) -> StoreError {
    StoreError::Corrupt {
        file: file.to_owned(),
        reason: format!("line {line}: {}", reason.into()),
    }
}

/// Fields of one `surface … end` block under construction.
#[derive(Default)]
struct Block {
    id: String,
    opened_at: usize,
    object: Option<String>,
    class: Option<String>,
    function: Option<String>,
    material: Option<String>,
    vertices: Vec<Vec3>,
}

pub fn read_scene(path: &Path) -> Result<Scene, StoreError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let mut materials = Vec::new();
    let mut surfaces = Vec::new();
    let mut seen_ids = BTreeSet::new();
    let mut block: Option<Block> = None;

    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let set_once = |slot: &mut Option<String>, value: &str, what: &str| {
            if slot.is_some() {
                return Err(bad(&file, no, format!("{what} given twice")));
            }
            *slot = Some(value.to_owned());
            Ok(())
        };
        if block.is_none() {
            match tokens[0] {
                "material" => {
                    if tokens.len() != 3 {
                        return Err(bad(&file, no, "expected: material <name> <reflectance>"));
                    }
                    let reflectance: f64 = tokens[2]
                        .parse()
                        .map_err(|_| bad(&file, no, "reflectance is not a number"))?;
                    materials.push(Material::new(tokens[1], reflectance));
                }
                "surface" => {
                    if tokens.len() != 2 {
                        return Err(bad(&file, no, "expected: surface <id>"));
                    }
                    if !seen_ids.insert(tokens[1].to_owned()) {
                        return Err(bad(
                            &file,
                            no,
                            format!("duplicate surface id {:?}", tokens[1]),
                        ));
                    }
                    block = Some(Block {
                        id: tokens[1].to_owned(),
                        opened_at: no,
                        ..Block::default()
                    });
                }
                other => {
                    return Err(bad(
                        &file,
                        no,
                        format!("unexpected {other:?} outside a surface block"),
                    ))
                }
            }
        } else if tokens[0] == "end" {
            let b = block.take().expect("checked above");
            let object = b
                .object
                .ok_or_else(|| bad(&file, b.opened_at, "surface block lacks an object line"))?;
            let class = b
                .class
                .ok_or_else(|| bad(&file, b.opened_at, "surface block lacks a class line"))?;
            let surface = Surface::new(b.id, object, class, b.function, b.material, b.vertices)
                .map_err(|e| bad(&file, b.opened_at, e.to_string()))?;
            surfaces.push(surface);
        } else {
            let b = block.as_mut().expect("checked above");
            match tokens[0] {
                "object" if tokens.len() == 2 => set_once(&mut b.object, tokens[1], "object")?,
                "class" if tokens.len() == 2 => set_once(&mut b.class, tokens[1], "class")?,
                "function" if tokens.len() == 2 => {
                    set_once(&mut b.function, tokens[1], "function")?
                }
                "material" if tokens.len() == 2 => {
                    set_once(&mut b.material, tokens[1], "material")?
                }
                "vertex" => {
                    if tokens.len() != 4 {
                        return Err(bad(&file, no, "expected: vertex <x> <y> <z>"));
                    }
                    let coord = |t: &str| -> Result<f64, StoreError> {
                        t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                            bad(&file, no, "vertex coordinates must be finite numbers")
                        })
                    };
                    b.vertices.push(Vec3::new(
                        coord(tokens[1])?,
                        coord(tokens[2])?,
                        coord(tokens[3])?,
                    ));
                }
                other => {
                    return Err(bad(
                        &file,
                        no,
                        format!("unexpected {other:?} inside a surface block"),
                    ))
                }
            }
        }
    }
    if let Some(b) = block {
        return Err(bad(&file, b.opened_at, "surface block never closed with end"));
    }
    Scene::new(surfaces, materials).map_err(|e| StoreError::Corrupt {
        file: file.clone(),
        reason: e.to_string(),
    })
}

pub fn write_scene(path: &Path, scene: &Scene) -> Result<(), StoreError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (name, reflectance) in scene.materials() {
        writeln!(out, "material {name} {reflectance}")?;
    }
    if !scene.materials().is_empty() {
        writeln!(out)?;
    }
    for s in scene.surfaces() {
        writeln!(out, "surface {}", s.id)?;
        writeln!(out, "object {}", s.object_id)?;
        writeln!(out, "class {}", s.class_name)?;
        if let Some(f) = &s.function {
            writeln!(out, "function {f}")?;
        }
        if let Some(m) = &s.material {
            writeln!(out, "material {m}")?;
        }
        for v in s.vertices() {
            writeln!(out, "vertex {} {} {}", v.x, v.y, v.z)?;
        }
        writeln!(out, "end")?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod test {
    use super::*;

    fn sample_scene() -> Scene {
        let wall = Surface::new(
            "wall-1",
            "bldg-1",
            "WallSurface",
            Some("1000".to_owned()),
            Some("concrete".to_owned()),
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(4.0, 0.0, 0.0),
                Vec3::new(4.0, 0.0, 3.0),
                Vec3::new(0.0, 0.0, 3.0),
            ],
        )
        .unwrap();
        let ground = Surface::new(
            "gnd-1",
            "terrain",
            "GroundSurface",
            None,
            None,
            vec![
                Vec3::new(-10.0, -10.0, 0.0),
                Vec3::new(10.0, -10.0, 0.0),
                Vec3::new(10.0, 10.0, 0.0),
                Vec3::new(-10.5, 10.25, 0.0),
            ],
        )
        .unwrap();
        Scene::new(vec![wall, ground], vec![Material::new("concrete", 0.35)]).unwrap()
    }

    #[test]
    fn scene_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.txt");
        let scene = sample_scene();
        write_scene(&path, &scene).unwrap();
        let back = read_scene(&path).unwrap();
        assert_eq!(back.materials(), scene.materials());
        assert_eq!(back.surfaces().len(), scene.surfaces().len());
        for (a, b) in back.surfaces().iter().zip(scene.surfaces()) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.object_id, b.object_id);
            assert_eq!(a.class_name, b.class_name);
            assert_eq!(a.function, b.function);
            assert_eq!(a.material, b.material);
            assert_eq!(a.vertices(), b.vertices());
            assert_eq!(a.normal(), b.normal());
        }
    }

    #[test]
    fn comments_and_whitespace_are_tolerated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.txt");
        std::fs::write(
            &path,
            "# a scene\nmaterial brick 0.5   # red\n\nsurface s-1\n  object o-1\n  class X\n  \
             material brick\n  vertex 0 0 0\n  vertex 1 0 0 # corner\n  vertex 1 1 0\nend\n",
        )
        .unwrap();
        let scene = read_scene(&path).unwrap();
        assert_eq!(scene.surfaces().len(), 1);
        assert_eq!(scene.reflectance_of(&scene.surfaces()[0]), 0.5);
    }

    #[test]
    fn structural_errors_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.txt");
        let cases = [
            "vertex 0 0 0\n",                                     // outside a block
            "surface s\nobject o\nclass X\nvertex 0 0 0\n",       // unclosed
            "surface s\nobject o\nobject o2\nclass X\nend\n",     // duplicate key
            "surface s\nclass X\nvertex 0 0 0\nvertex 1 0 0\nvertex 1 1 0\nend\n", // no object
            "surface s\nobject o\nclass X\nvertex 0 0 0\nvertex 1 0 0\nvertex 1 1 0\nend\n\
             surface s\nobject o\nclass X\nvertex 0 0 0\nvertex 1 0 0\nvertex 1 1 0\nend\n", // dup id
            "surface s\nobject o\nclass X\nmaterial ghost\nvertex 0 0 0\nvertex 1 0 0\n\
             vertex 1 1 0\nend\n",                                // unknown material
            "material m nope\n",                                  // bad reflectance
        ];
        for case in cases {
            std::fs::write(&path, case).unwrap();
            assert!(read_scene(&path).is_err(), "case should fail: {case:?}");
        }
    }
}
