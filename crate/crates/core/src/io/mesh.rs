//! PLY (binary little-endian writer; ASCII and binary reader) and OBJ meshes.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use super::{read_file, write_file, IoError};
use crate::mesh::TriangleMesh;

/// Binary little-endian PLY with float positions, optional float normals and
/// `uchar`/`int` face lists.
pub fn encode_ply(mesh: &TriangleMesh) -> Vec<u8> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    let _ = writeln!(header, "element vertex {}", mesh.vertices.len());
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if mesh.normals.is_some() {
        header.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    let _ = writeln!(header, "element face {}", mesh.triangles.len());
    header.push_str("property list uchar int vertex_indices\nend_header\n");
    let mut out = header.into_bytes();
    for (i, v) in mesh.vertices.iter().enumerate() {
        for c in v.coords.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        if let Some(n) = &mesh.normals {
            for c in n[i].iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
    }
    for t in &mesh.triangles {
        out.push(3);
        for &i in t {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    out
}

pub fn write_ply(path: &Path, mesh: &TriangleMesh) -> Result<(), IoError> {
    write_file(path, &encode_ply(mesh))
}

pub fn encode_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    if let Some(normals) = &mesh.normals {
        for n in normals {
            let _ = writeln!(s, "vn {:?} {:?} {:?}", n.x, n.y, n.z);
        }
        for t in &mesh.triangles {
            let _ = writeln!(
                s,
                "f {a}//{a} {b}//{b} {c}//{c}",
                a = t[0] + 1,
                b = t[1] + 1,
                c = t[2] + 1
            );
        }
    } else {
        for t in &mesh.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
    }
    s
}

pub fn write_obj(path: &Path, mesh: &TriangleMesh) -> Result<(), IoError> {
    write_file(path, encode_obj(mesh).as_bytes())
}

/// Reads `v` and `f` records; polygons are fan-triangulated, negative
/// (relative) indices are supported.
pub fn read_obj(path: &Path) -> Result<TriangleMesh, IoError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| IoError::format(path, "OBJ: not UTF-8"))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let bad = |m: &str| IoError::format(path, format!("OBJ line {}: {m}", lineno + 1));
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| bad("bad vertex")))
                    .collect::<Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(bad("vertex needs 3 coordinates"));
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in it {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| bad("bad face index"))?;
                    let n = vertices.len() as i64;
                    let resolved = if i > 0 { i - 1 } else { n + i };
                    if resolved < 0 || resolved >= n {
                        return Err(bad("face index out of range"));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(bad("face needs 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriangleMesh::new(vertices, triangles))
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8], big: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let a: [u8; $n] = b[..$n].try_into().unwrap();
                (if big {
                    <$t>::from_be_bytes(a)
                } else {
                    <$t>::from_le_bytes(a)
                }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => num!(i16, 2),
            Scalar::U16 => num!(u16, 2),
            Scalar::I32 => num!(i32, 4),
            Scalar::U32 => num!(u32, 4),
            Scalar::F32 => num!(f32, 4),
            Scalar::F64 => num!(f64, 8),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Clone, Copy, PartialEq)]
enum Encoding {
    Ascii,
    Little,
    Big,
}

/// Reads vertex positions (and normals when present) plus triangle faces.
/// Files without a face element load as a point set with no triangles.
pub fn read_ply(path: &Path) -> Result<TriangleMesh, IoError> {
    let bytes = read_file(path)?;
    let bad = |m: String| IoError::format(path, format!("PLY: {m}"));
    let end = bytes
        .windows(10)
        .position(|w| w == b"end_header")
        .ok_or_else(|| bad("missing end_header".into()))?;
    let mut body = end + 10;
    // header line ending: \n or \r\n
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    body += 1;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header not UTF-8".into()))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing 'ply' magic".into()));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", f, _] => {
                encoding = Some(match *f {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::Little,
                    "binary_big_endian" => Encoding::Big,
                    other => return Err(bad(format!("unknown format {other}"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad(format!("bad count {count}")))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let (c, i) = Scalar::parse(ct)
                    .zip(Scalar::parse(it))
                    .ok_or_else(|| bad(format!("bad list types {ct} {it}")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| bad("property before element".into()))?
                    .props
                    .push(Property::List(name.to_string(), c, i));
            }
            ["property", ty, name] => {
                let s = Scalar::parse(ty).ok_or_else(|| bad(format!("bad type {ty}")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| bad("property before element".into()))?
                    .props
                    .push(Property::Scalar(name.to_string(), s));
            }
            _ => {}
        }
    }
    let encoding = encoding.ok_or_else(|| bad("missing format line".into()))?;

    let mut vertices = Vec::new();
    let mut normals: Vec<Vector3<f64>> = Vec::new();
    let mut triangles = Vec::new();
    let mut reader = ValueReader::new(&bytes[body..], encoding);
    for el in &elements {
        for _ in 0..el.count {
            let mut pos = [0.0; 3];
            let mut nrm = [0.0; 3];
            let mut has_normal = false;
            for p in &el.props {
                match p {
                    Property::Scalar(name, ty) => {
                        let v = reader.next(*ty).ok_or_else(|| bad("truncated data".into()))?;
                        match name.as_str() {
                            "x" => pos[0] = v,
                            "y" => pos[1] = v,
                            "z" => pos[2] = v,
                            "nx" => {
                                nrm[0] = v;
                                has_normal = true
                            }
                            "ny" => nrm[1] = v,
                            "nz" => nrm[2] = v,
                            _ => {}
                        }
                    }
                    Property::List(name, ct, it) => {
                        let n = reader.next(*ct).ok_or_else(|| bad("truncated data".into()))? as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            idx.push(reader.next(*it).ok_or_else(|| bad("truncated data".into()))? as i64);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") && n >= 3
                        {
                            for k in 1..n - 1 {
                                triangles.push([idx[0] as u32, idx[k] as u32, idx[k + 1] as u32]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Point3::from(pos));
                if has_normal {
                    normals.push(Vector3::from(nrm));
                }
            }
        }
    }
    let mut mesh = TriangleMesh::new(vertices, triangles);
    if !normals.is_empty() && normals.len() == mesh.vertices.len() {
        mesh.normals = Some(normals);
    }
    mesh.validate().map_err(bad)?;
    Ok(mesh)
}

struct ValueReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    encoding: Encoding,
}

impl<'a> ValueReader<'a> {
    fn new(bytes: &'a [u8], encoding: Encoding) -> Self {
        Self {
            bytes,
            pos: 0,
            encoding,
        }
    }

    fn next(&mut self, ty: Scalar) -> Option<f64> {
        match self.encoding {
            Encoding::Ascii => {
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                    self.pos += 1;
                }
                let start = self.pos;
                while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
                    self.pos += 1;
                }
                std::str::from_utf8(&self.bytes[start..self.pos])
                    .ok()?
                    .parse()
                    .ok()
            }
            enc => {
                let n = ty.size();
                let slice = self.bytes.get(self.pos..self.pos + n)?;
                self.pos += n;
                Some(ty.read(slice, enc == Encoding::Big))
            }
        }
    }
}

/// Loads a mesh by extension (`.ply` or `.obj`).
pub fn read_mesh(path: &Path) -> Result<TriangleMesh, IoError> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
    {
        Some(e) if e == "ply" => read_ply(path),
        Some(e) if e == "obj" => read_obj(path),
        _ => Err(IoError::format(
            path,
            "unsupported mesh format (use .ply or .obj)",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::box_mesh;

    #[test]
    fn ply_binary_round_trip_with_normals() {
        let mut m = box_mesh([0.5, 0.25, -1.0], [1.0, 0.5, 0.25]);
        m.compute_normals();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ply");
        write_ply(&p, &m).unwrap();
        let back = read_ply(&p).unwrap();
        assert_eq!(back.triangles, m.triangles);
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            assert!((a - b).norm() < 1e-6);
        }
        assert!(back.normals.is_some());
    }

    #[test]
    fn ply_ascii_with_quads_and_extra_props() {
        let text = "ply\nformat ascii 1.0\ncomment x\nelement vertex 4\nproperty double x\nproperty double y\nproperty double z\nproperty uchar red\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n0 0 0 1\n1 0 0 2\n1 1 0 3\n0 1 0 4\n4 0 1 2 3\n";
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.ply");
        std::fs::write(&p, text).unwrap();
        let m = read_ply(&p).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_round_trip() {
        let m = box_mesh([0.0; 3], [1.0; 3]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.obj");
        write_obj(&p, &m).unwrap();
        assert_eq!(read_mesh(&p).unwrap(), m);
        std::fs::write(&p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 -1\n").unwrap();
        assert_eq!(read_obj(&p).unwrap().triangles, vec![[0, 1, 2]]);
    }
}
