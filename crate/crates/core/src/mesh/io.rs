//! Mesh and contour file formats: OBJ, binary PLY, SVG and line-loop text.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::contour::{Contour, Vec2};
use super::surface::{SurfaceMesh, Vec3};
use crate::error::{Error, Result};

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// Writes `v`, optional `vn` and `f` records (1-based; `f a//a ...` with normals).
pub fn write_obj(mesh: &SurfaceMesh, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    for v in mesh.vertices() {
        writeln!(w, "v {:?} {:?} {:?}", v[0], v[1], v[2])?;
    }
    if let Some(ns) = mesh.normals() {
        for n in ns {
            writeln!(w, "vn {:?} {:?} {:?}", n[0], n[1], n[2])?;
        }
    }
    for t in mesh.triangles() {
        let [a, b, c] = t.map(|i| i + 1);
        if mesh.normals().is_some() {
            writeln!(w, "f {a}//{a} {b}//{b} {c}//{c}")?;
        } else {
            writeln!(w, "f {a} {b} {c}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `v`, `vn` and `f` records; polygons are fan-triangulated, negative
/// indices count from the end, other records are ignored. Normals are kept
/// only when there is exactly one per vertex.
pub fn read_obj(r: impl Read) -> Result<SurfaceMesh> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut normals: Vec<Vec3> = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        let bad = |what: &str| format_err(format!("obj line {}: {what}", lineno + 1));
        match it.next() {
            Some(tag @ ("v" | "vn")) => {
                let mut p = [0.0; 3];
                for x in &mut p {
                    *x = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("expected three coordinates"))?;
                }
                if tag == "v" {
                    vertices.push(p);
                } else {
                    normals.push(p);
                }
            }
            Some("f") => {
                let idx = it
                    .map(|tok| {
                        let i: i64 = tok
                            .split('/')
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| bad("bad face index"))?;
                        let n = vertices.len() as i64;
                        let k = if i < 0 { n + i } else { i - 1 };
                        if k < 0 || k >= n {
                            return Err(bad("face index out of range"));
                        }
                        Ok(k as usize)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(bad("face with fewer than 3 vertices"));
                }
                triangles.extend((1..idx.len() - 1).map(|k| [idx[0], idx[k], idx[k + 1]]));
            }
            _ => {}
        }
    }
    let mesh = SurfaceMesh::new(vertices, triangles)?;
    if !normals.is_empty() && normals.len() == mesh.vertex_count() {
        return mesh.with_normals(normals);
    }
    Ok(mesh)
}

/// Binary little-endian PLY with double vertex coordinates (plus normals when
/// present) and `uchar`/`int` face lists.
pub fn write_ply(mesh: &SurfaceMesh, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    let mut header = String::from("ply\nformat binary_little_endian 1.0\ncomment hybridshape\n");
    let _ = writeln!(header, "element vertex {}", mesh.vertex_count());
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if mesh.normals().is_some() {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    let _ = writeln!(header, "element face {}", mesh.face_count());
    header.push_str("property list uchar int vertex_indices\nend_header\n");
    w.write_all(header.as_bytes())?;
    for (i, v) in mesh.vertices().iter().enumerate() {
        for x in v {
            w.write_all(&x.to_le_bytes())?;
        }
        if let Some(ns) = mesh.normals() {
            for x in ns[i] {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    for t in mesh.triangles() {
        w.write_all(&[3u8])?;
        for &i in t {
            let i = i32::try_from(i).map_err(|_| format_err("vertex index exceeds PLY int range"))?;
            w.write_all(&i.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            other => return Err(format_err(format!("unknown PLY type {other}"))),
        })
    }

    fn read(self, r: &mut impl Read) -> Result<f64> {
        macro_rules! rd {
            ($t:ty) => {{
                let mut b = [0u8; std::mem::size_of::<$t>()];
                r.read_exact(&mut b)?;
                <$t>::from_le_bytes(b) as f64
            }};
        }
        Ok(match self {
            Self::I8 => rd!(i8),
            Self::U8 => rd!(u8),
            Self::I16 => rd!(i16),
            Self::U16 => rd!(u16),
            Self::I32 => rd!(i32),
            Self::U32 => rd!(u32),
            Self::F32 => rd!(f32),
            Self::F64 => rd!(f64),
        })
    }
}

enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Reads binary little-endian PLY (`vertex` x/y/z with optional nx/ny/nz,
/// `face` vertex index lists). Unknown elements and properties are skipped.
pub fn read_ply(r: impl Read) -> Result<SurfaceMesh> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    let mut next_line = |r: &mut BufReader<_>| -> Result<String> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(format_err("unexpected end of PLY header"));
        }
        Ok(line.trim().to_string())
    };
    if next_line(&mut r)? != "ply" {
        return Err(format_err("missing ply magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let l = next_line(&mut r)?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", f, _] => return Err(format_err(format!("unsupported PLY format {f}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| format_err("bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", c, t, name] => elements
                .last_mut()
                .ok_or_else(|| format_err("property before element"))?
                .props
                .push(Property::List(name.to_string(), Scalar::parse(c)?, Scalar::parse(t)?)),
            ["property", t, name] => elements
                .last_mut()
                .ok_or_else(|| format_err("property before element"))?
                .props
                .push(Property::Scalar(name.to_string(), Scalar::parse(t)?)),
            ["end_header"] => break,
            _ => {}
        }
    }
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut triangles = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let mut p = [0.0; 3];
            let mut n = [0.0; 3];
            let mut has_n = false;
            let mut face: Vec<usize> = Vec::new();
            for prop in &el.props {
                match prop {
                    Property::Scalar(name, t) => {
                        let x = t.read(&mut r)?;
                        match name.as_str() {
                            "x" => p[0] = x,
                            "y" => p[1] = x,
                            "z" => p[2] = x,
                            "nx" | "ny" | "nz" => {
                                has_n = true;
                                n[(name.as_bytes()[1] - b'x') as usize] = x;
                            }
                            _ => {}
                        }
                    }
                    Property::List(name, c, t) => {
                        let len = c.read(&mut r)? as usize;
                        let vals = (0..len).map(|_| t.read(&mut r)).collect::<Result<Vec<_>>>()?;
                        if name == "vertex_indices" || name == "vertex_index" {
                            face = vals.into_iter().map(|v| v as usize).collect();
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    vertices.push(p);
                    if has_n {
                        normals.push(n);
                    }
                }
                "face" if face.len() >= 3 => {
                    triangles.extend((1..face.len() - 1).map(|k| [face[0], face[k], face[k + 1]]))
                }
                _ => {}
            }
        }
    }
    let mesh = SurfaceMesh::new(vertices, triangles)?;
    if !normals.is_empty() {
        return mesh.with_normals(normals);
    }
    Ok(mesh)
}

/// Loads a mesh, choosing the format by extension (`.obj` or `.ply`).
pub fn load_mesh(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    let path = path.as_ref();
    let f = File::open(path)?;
    match extension(path).as_str() {
        "obj" => read_obj(f),
        "ply" => read_ply(f),
        e => Err(format_err(format!("unsupported mesh extension '{e}'"))),
    }
}

pub fn save_mesh(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = extension(path);
    if ext != "obj" && ext != "ply" {
        return Err(format_err(format!("unsupported mesh extension '{ext}'")));
    }
    let f = File::create(path)?;
    if ext == "obj" {
        write_obj(mesh, f)
    } else {
        write_ply(mesh, f)
    }
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Line-loop text: a `loop <n>` header followed by `n` rows of `x y`.
pub fn write_loops(contour: &Contour, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    for lp in contour.loops() {
        writeln!(w, "loop {}", lp.len())?;
        for v in lp {
            writeln!(w, "{:?} {:?}", v[0], v[1])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_loops(r: impl Read) -> Result<Contour> {
    let mut loops: Vec<Vec<Vec2>> = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if t.starts_with("loop") {
            loops.push(Vec::new());
            continue;
        }
        let xy: Vec<f64> = t
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format_err(format!("loop line {}: bad coordinates", lineno + 1)))?;
        let lp = loops
            .last_mut()
            .ok_or_else(|| format_err("coordinates before first loop header"))?;
        match xy.as_slice() {
            [x, y] => lp.push([*x, *y]),
            _ => return Err(format_err(format!("loop line {}: expected x y", lineno + 1))),
        }
    }
    Contour::new(loops)
}

/// One layer of an SVG overlay.
#[derive(Clone, Debug)]
pub struct SvgLayer<'a> {
    pub contour: &'a Contour,
    pub stroke: &'a str,
    pub width: f64,
}

/// Renders contours into a square SVG, mapping `[0,1]²` to `size` pixels with
/// the second axis pointing up.
pub fn contours_to_svg(layers: &[SvgLayer<'_>], size: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    for layer in layers {
        let mut d = String::new();
        for lp in layer.contour.loops() {
            for (i, v) in lp.iter().enumerate() {
                let _ = write!(
                    d,
                    "{}{:.3},{:.3} ",
                    if i == 0 { "M" } else { "L" },
                    v[0] * size,
                    (1.0 - v[1]) * size
                );
            }
            d.push_str("Z ");
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="{}"/>"#,
            d.trim_end(),
            layer.stroke,
            layer.width
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn obj_roundtrip() {
        let m = fixtures::icosphere(1, [0.5; 3], 0.3);
        let mut buf = Vec::new();
        write_obj(&m, &mut buf).unwrap();
        assert_eq!(read_obj(&buf[..]).unwrap(), m);
        let n = m.clone().with_normals(m.compute_vertex_normals()).unwrap();
        buf.clear();
        write_obj(&n, &mut buf).unwrap();
        assert_eq!(read_obj(&buf[..]).unwrap(), n);
    }

    #[test]
    fn obj_quads_and_negative_indices() {
        let src = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\nf -4 -3 -2\n";
        let m = read_obj(src.as_bytes()).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3], [0, 1, 2]]);
        assert!(read_obj("v 0 0 0\nf 1 2 3\n".as_bytes()).is_err());
    }

    #[test]
    fn ply_roundtrip() {
        let m = fixtures::icosphere(2, [0.4; 3], 0.2);
        let mut buf = Vec::new();
        write_ply(&m, &mut buf).unwrap();
        assert_eq!(read_ply(&buf[..]).unwrap(), m);
        let n = m.clone().with_normals(m.compute_vertex_normals()).unwrap();
        buf.clear();
        write_ply(&n, &mut buf).unwrap();
        assert_eq!(read_ply(&buf[..]).unwrap(), n);
    }

    #[test]
    fn ply_float_vertices() {
        let mut buf = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n".to_vec();
        for v in [[0f32, 0., 0.], [1., 0., 0.], [0., 1., 0.]] {
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        buf.push(3);
        for i in [0u32, 1, 2] {
            buf.extend_from_slice(&i.to_le_bytes());
        }
        let m = read_ply(&buf[..]).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
        assert_eq!(m.vertices()[1], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn loops_roundtrip_and_svg() {
        let c = fixtures::circle_contour(40, [0.5, 0.5], 0.25);
        let mut buf = Vec::new();
        write_loops(&c, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("loop 40\n"));
        assert_eq!(read_loops(&buf[..]).unwrap(), c);
        let svg = contours_to_svg(&[SvgLayer { contour: &c, stroke: "black", width: 1.0 }], 256.0);
        assert!(svg.starts_with("<svg") && svg.contains("<path d=\"M"));
    }
}
