//! Line-oriented text container for a meshed solid.
//!
//! ```text
//! cadloop-mesh v1
//! category <id>
//! params <n>
//! <v0> <v1> ...
//! volume_mm3 <v>
//! nodes <n>
//! <x> <y> <z>                                 (n lines)
//! elements <n>
//! <n0> ... <n7>                               (n lines)
//! faces <n>
//! <element> <tag> <nx> <ny> <nz> <a> <b> <c> <d>   (n lines)
//! anchors <n>
//! <role> <x> <y> <z>                          (n lines)
//! end
//! ```
//!
//! Reals are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every coordinate bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{AnchorPoint, AnchorRole, BoundaryFace, Mesh, ParamVector, SolidModel};
use crate::error::{Error, Result};

pub const MAGIC: &str = "cadloop-mesh v1";

pub fn write_solid(solid: &SolidModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "category {}", solid.category_id);
    let _ = writeln!(s, "params {}", solid.params.len());
    let _ = writeln!(s, "{}", join(solid.params.values()));
    let _ = writeln!(s, "volume_mm3 {}", solid.volume_mm3);
    let _ = writeln!(s, "nodes {}", solid.mesh.nodes.len());
    for p in &solid.mesh.nodes {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "elements {}", solid.mesh.elements.len());
    for e in &solid.mesh.elements {
        let _ = writeln!(s, "{}", e.map(|n| n.to_string()).join(" "));
    }
    let _ = writeln!(s, "faces {}", solid.boundary_faces.len());
    for f in &solid.boundary_faces {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {}",
            f.element, f.tag, f.normal[0], f.normal[1], f.normal[2], f.nodes[0], f.nodes[1], f.nodes[2], f.nodes[3]
        );
    }
    let _ = writeln!(s, "anchors {}", solid.anchors.len());
    for a in &solid.anchors {
        let _ = writeln!(s, "{} {} {} {}", a.role.as_str(), a.position[0], a.position[1], a.position[2]);
    }
    s.push_str("end\n");
    s
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| Error::Format("unexpected end of mesh file".into()))
    }

    fn header(&mut self, key: &str) -> Result<&'a str> {
        let (no, line) = self.next_line()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| Error::Format(format!("line {no}: expected `{key}`")))
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let v = self.header(key)?;
        v.parse().map_err(|_| Error::Format(format!("bad count for `{key}`: {v}")))
    }
}

fn parse<T: std::str::FromStr>(tok: &str, no: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Format(format!("line {no}: cannot parse `{tok}`")))
}

fn fields(line: &str, n: usize, no: usize) -> Result<Vec<&str>> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != n {
        return Err(Error::Format(format!("line {no}: expected {n} fields, found {}", f.len())));
    }
    Ok(f)
}

pub fn read_solid(text: &str) -> Result<SolidModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, magic) = lines.next_line()?;
    if magic != MAGIC {
        return Err(Error::Format(format!("not a mesh file (header `{magic}`)")));
    }
    let category_id = lines.header("category")?.to_string();
    let n_params = lines.count("params")?;
    let (no, line) = lines.next_line()?;
    let params = fields(line, n_params, no)?
        .into_iter()
        .map(|t| parse::<f64>(t, no))
        .collect::<Result<Vec<_>>>()?;
    let volume_mm3 = parse(lines.header("volume_mm3")?, 0)?;

    let n_nodes = lines.count("nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (no, line) = lines.next_line()?;
        let f = fields(line, 3, no)?;
        nodes.push([parse(f[0], no)?, parse(f[1], no)?, parse(f[2], no)?]);
    }
    let n_el = lines.count("elements")?;
    let mut elements = Vec::with_capacity(n_el);
    for _ in 0..n_el {
        let (no, line) = lines.next_line()?;
        let f = fields(line, 8, no)?;
        let mut e = [0usize; 8];
        for (slot, tok) in e.iter_mut().zip(f) {
            *slot = parse(tok, no)?;
            if *slot >= n_nodes {
                return Err(Error::Format(format!("line {no}: node index {slot} out of range")));
            }
        }
        elements.push(e);
    }
    let n_faces = lines.count("faces")?;
    let mut boundary_faces = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let (no, line) = lines.next_line()?;
        let f = fields(line, 9, no)?;
        let element: usize = parse(f[0], no)?;
        if element >= n_el {
            return Err(Error::Format(format!("line {no}: element {element} out of range")));
        }
        let mut face_nodes = [0usize; 4];
        for (slot, tok) in face_nodes.iter_mut().zip(&f[5..]) {
            *slot = parse(tok, no)?;
            if *slot >= n_nodes {
                return Err(Error::Format(format!("line {no}: node index {slot} out of range")));
            }
        }
        boundary_faces.push(BoundaryFace {
            nodes: face_nodes,
            element,
            normal: [parse(f[2], no)?, parse(f[3], no)?, parse(f[4], no)?],
            tag: f[1].to_string(),
        });
    }
    let n_anchors = lines.count("anchors")?;
    let mut anchors = Vec::with_capacity(n_anchors);
    for _ in 0..n_anchors {
        let (no, line) = lines.next_line()?;
        let f = fields(line, 4, no)?;
        let role = AnchorRole::parse(f[0]).ok_or_else(|| Error::Format(format!("line {no}: bad role `{}`", f[0])))?;
        anchors.push(AnchorPoint {
            role,
            position: [parse(f[1], no)?, parse(f[2], no)?, parse(f[3], no)?],
        });
    }
    let (no, last) = lines.next_line()?;
    if last != "end" {
        return Err(Error::Format(format!("line {no}: expected `end`")));
    }
    Ok(SolidModel {
        category_id,
        params: ParamVector::new(params),
        mesh: Mesh { nodes, elements },
        boundary_faces,
        anchors,
        volume_mm3,
    })
}

pub fn save(solid: &SolidModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_solid(solid))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<SolidModel> {
    read_solid(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{default_registry, generate_solid};

    #[test]
    fn round_trip_is_exact() {
        let reg = default_registry();
        for (id, p) in [("annular_flange", vec![47.3, 18.1, 9.7]), ("l_bracket", vec![80.0, 60.0, 30.0, 8.0])] {
            let s = generate_solid(reg.get(id).unwrap(), &ParamVector::new(p), 2).unwrap();
            let text = write_solid(&s);
            let back = read_solid(&text).unwrap();
            assert_eq!(back, s);
            assert_eq!(write_solid(&back), text);
        }
    }

    #[test]
    fn generation_is_byte_deterministic() {
        let c = default_registry().get("cantilever_box_beam").unwrap();
        let p = ParamVector::new(vec![210.0, 40.0, 55.5, 4.25]);
        let a = write_solid(&generate_solid(c, &p, 3).unwrap());
        let b = write_solid(&generate_solid(c, &p, 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_solid("hello"), Err(Error::Format(_))));
        let s = generate_solid(
            default_registry().get("flat_plate").unwrap(),
            &ParamVector::new(vec![100.0, 50.0, 5.0]),
            1,
        )
        .unwrap();
        let text = write_solid(&s);
        let truncated = &text[..text.len() / 2];
        assert!(read_solid(truncated).is_err());
    }
}
