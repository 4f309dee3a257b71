use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use super::{read_bytes, write_bytes, FormatError};
use crate::geom::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
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

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header, FormatError> {
    let mut offset = 0usize;
    let mut line_no = 0usize;
    let next_line = |offset: &mut usize| -> Option<String> {
        if *offset >= bytes.len() {
            return None;
        }
        let end = bytes[*offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| *offset + p)
            .unwrap_or(bytes.len());
        let line = String::from_utf8_lossy(&bytes[*offset..end])
            .trim_end_matches('\r')
            .to_string();
        *offset = (end + 1).min(bytes.len());
        Some(line)
    };

    line_no += 1;
    match next_line(&mut offset) {
        Some(l) if l.trim() == "ply" => {}
        _ => return Err(FormatError::parse(path, "line 1", "missing 'ply' magic")),
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line_no += 1;
        let loc = format!("line {line_no}");
        let line = next_line(&mut offset)
            .ok_or_else(|| FormatError::parse(path, &loc, "header ended without 'end_header'"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => {
                        return Err(FormatError::Unsupported {
                            path: path.to_path_buf(),
                            what: format!("PLY format '{other}'"),
                        })
                    }
                });
            }
            ["element", name, count] => {
                let count = count.parse::<usize>().map_err(|_| {
                    FormatError::parse(path, &loc, format!("element {name}: invalid count '{count}'"))
                })?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["element", name, ..] => {
                return Err(FormatError::parse(
                    path,
                    &loc,
                    format!("element {name}: expected 'element <name> <count>'"),
                ))
            }
            ["property", "list", count, item, name] => {
                let el = elements.last_mut().ok_or_else(|| {
                    FormatError::parse(path, &loc, format!("property {name} before any element"))
                })?;
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(FormatError::parse(
                        path,
                        &loc,
                        format!("element {}: property {name} has an unknown type", el.name),
                    ));
                };
                el.properties.push(Property::List { count, item });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| {
                    FormatError::parse(path, &loc, format!("property {name} before any element"))
                })?;
                let ty = Scalar::parse(ty).ok_or_else(|| {
                    FormatError::parse(
                        path,
                        &loc,
                        format!("element {}: property {name} has unknown type '{ty}'", el.name),
                    )
                })?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            ["end_header"] => break,
            _ => {
                return Err(FormatError::parse(
                    path,
                    &loc,
                    format!("unrecognized header line '{line}'"),
                ))
            }
        }
    }
    let encoding =
        encoding.ok_or_else(|| FormatError::parse(path, "header", "missing 'format' line"))?;
    Ok(Header {
        encoding,
        elements,
        body_offset: offset,
    })
}

struct VertexLayout {
    xyz: [usize; 3],
    rgb: Option<([usize; 3], bool)>,
}

fn vertex_layout(path: &Path, el: &Element) -> Result<VertexLayout, FormatError> {
    let find = |names: &[&str]| {
        el.properties.iter().position(|p| match p {
            Property::Scalar { name, .. } => names.contains(&name.as_str()),
            _ => false,
        })
    };
    let xyz = [find(&["x"]), find(&["y"]), find(&["z"])];
    let [Some(x), Some(y), Some(z)] = xyz else {
        return Err(FormatError::parse(
            path,
            "header",
            "element vertex: missing x/y/z properties",
        ));
    };
    let rgb = match (
        find(&["red", "r", "diffuse_red"]),
        find(&["green", "g", "diffuse_green"]),
        find(&["blue", "b", "diffuse_blue"]),
    ) {
        (Some(r), Some(g), Some(b)) => {
            let integer = matches!(&el.properties[r], Property::Scalar { ty, .. } if ty.is_integer());
            Some(([r, g, b], integer))
        }
        _ => None,
    };
    Ok(VertexLayout {
        xyz: [x, y, z],
        rgb,
    })
}

/// Reads the `vertex` element of a PLY file. Other elements are skipped.
pub fn read_point_cloud(path: &Path) -> Result<PointCloud, FormatError> {
    let bytes = read_bytes(path)?;
    let header = parse_header(path, &bytes)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| FormatError::parse(path, "header", "no 'vertex' element"))?;
    let layout = vertex_layout(path, &header.elements[vertex_pos])?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let body = &bytes[header.body_offset..];
    match header.encoding {
        PlyEncoding::Ascii => {
            let text = String::from_utf8_lossy(body);
            let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
            let header_lines = bytes[..header.body_offset].iter().filter(|&&b| b == b'\n').count();
            for (ei, el) in header.elements.iter().enumerate() {
                for k in 0..el.count {
                    let (ln, line) = lines.next().ok_or_else(|| {
                        FormatError::parse(
                            path,
                            "end of file",
                            format!("element {}: expected {} rows, found {k}", el.name, el.count),
                        )
                    })?;
                    if ei != vertex_pos {
                        continue;
                    }
                    let loc = format!("line {}", header_lines + ln + 1);
                    let vals: Result<Vec<f64>, _> =
                        line.split_whitespace().map(str::parse::<f64>).collect();
                    let vals = vals.map_err(|e| {
                        FormatError::parse(path, &loc, format!("element vertex: {e}"))
                    })?;
                    if vals.len() < el.properties.len() {
                        return Err(FormatError::parse(
                            path,
                            &loc,
                            format!(
                                "element vertex: expected {} values, found {}",
                                el.properties.len(),
                                vals.len()
                            ),
                        ));
                    }
                    rows.push(vals);
                }
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            let mut cur = 0usize;
            let take = |cur: &mut usize, n: usize, what: &str| -> Result<usize, FormatError> {
                if *cur + n > body.len() {
                    return Err(FormatError::parse(
                        path,
                        format!("byte {}", header.body_offset + *cur),
                        format!("unexpected end of data in element {what}"),
                    ));
                }
                let at = *cur;
                *cur += n;
                Ok(at)
            };
            for (ei, el) in header.elements.iter().enumerate() {
                for _ in 0..el.count {
                    let mut row = Vec::with_capacity(el.properties.len());
                    for prop in &el.properties {
                        match prop {
                            Property::Scalar { ty, .. } => {
                                let at = take(&mut cur, ty.size(), &el.name)?;
                                row.push(ty.read_le(&body[at..]));
                            }
                            Property::List { count, item, .. } => {
                                let at = take(&mut cur, count.size(), &el.name)?;
                                let n = count.read_le(&body[at..]) as usize;
                                take(&mut cur, n * item.size(), &el.name)?;
                                row.push(f64::NAN);
                            }
                        }
                    }
                    if ei == vertex_pos {
                        rows.push(row);
                    }
                }
            }
        }
    }

    let mut points = Vec::with_capacity(rows.len());
    let mut colors = layout.rgb.map(|_| Vec::with_capacity(rows.len()));
    for row in &rows {
        points.push(Point3::new(row[layout.xyz[0]], row[layout.xyz[1]], row[layout.xyz[2]]));
        if let (Some(colors), Some((idx, integer))) = (colors.as_mut(), layout.rgb) {
            let scale = if integer { 1.0 / 255.0 } else { 1.0 };
            colors.push(idx.map(|i| (row[i] * scale).clamp(0.0, 1.0)));
        }
    }
    let cloud = PointCloud { points, colors };
    cloud
        .validate()
        .map_err(|e| FormatError::parse(path, "vertex data", e.to_string()))?;
    Ok(cloud)
}

pub(crate) fn quantize_color(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_point_cloud(cloud: &PointCloud, path: &Path) -> Result<(), FormatError> {
    write_point_cloud_with(cloud, path, PlyEncoding::BinaryLittleEndian)
}

/// Writes `x y z` as doubles and colors, when present, as 8-bit channels.
pub fn write_point_cloud_with(
    cloud: &PointCloud,
    path: &Path,
    encoding: PlyEncoding,
) -> Result<(), FormatError> {
    let mut header = String::from("ply\n");
    header.push_str(match encoding {
        PlyEncoding::Ascii => "format ascii 1.0\n",
        PlyEncoding::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    let _ = writeln!(header, "element vertex {}", cloud.len());
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("end_header\n");

    let mut out = header.into_bytes();
    for (i, p) in cloud.points.iter().enumerate() {
        let rgb = cloud.colors.as_ref().map(|c| c[i].map(quantize_color));
        match encoding {
            PlyEncoding::Ascii => {
                let mut line = format!("{} {} {}", p.x, p.y, p.z);
                if let Some([r, g, b]) = rgb {
                    let _ = write!(line, " {r} {g} {b}");
                }
                line.push('\n');
                out.extend_from_slice(line.as_bytes());
            }
            PlyEncoding::BinaryLittleEndian => {
                for c in [p.x, p.y, p.z] {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                if let Some(rgb) = rgb {
                    out.extend_from_slice(&rgb);
                }
            }
        }
    }
    write_bytes(path, &out)
}
