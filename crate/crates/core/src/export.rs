//! Artifact I/O: field snapshots (text header + raw f64), merit history
//! tables, potential maps, kernel dumps, and contour/mesh extraction for
//! visualization.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{GridDims, Vec3};
use crate::kernel::ConvolutionKernel;
use crate::levelset::LevelSetField;
use crate::optim::OptimizationState;

const FIELD_MAGIC: &str = "cpforge-field v1";

/// Header of a field snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub config_hash: u64,
    pub dim: usize,
    pub dims: GridDims,
    pub spacing: f64,
    pub origin: Vec3,
    pub quantity: String,
}

/// Write a scalar grid as a small text header followed by little-endian
/// f64 values.
pub fn write_scalar_field(
    path: &Path,
    header: &FieldHeader,
    data: &[f64],
) -> Result<()> {
    if data.len() != header.dims.len() {
        return Err(Error::InvalidConfig("field payload does not match dims".into()));
    }
    let mut text = String::new();
    let _ = writeln!(text, "{FIELD_MAGIC}");
    let _ = writeln!(text, "config_hash {:016x}", header.config_hash);
    let _ = writeln!(text, "dim {}", header.dim);
    let _ = writeln!(text, "shape {} {} {}", header.dims.nx, header.dims.ny, header.dims.nz);
    let _ = writeln!(text, "spacing {}", header.spacing);
    let _ = writeln!(text, "origin {} {} {}", header.origin.x, header.origin.y, header.origin.z);
    let _ = writeln!(text, "quantity {}", header.quantity);
    let _ = writeln!(text, "data f64 le {}", data.len());
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    for v in data {
        f.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_scalar_field(path: &Path) -> Result<(FieldHeader, Vec<f64>)> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    // header ends after the `data` line
    let mut pos = 0;
    let mut lines = Vec::new();
    while lines.len() < 8 {
        let end = buf[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("truncated field header".into()))?;
        let line = std::str::from_utf8(&buf[pos..pos + end])
            .map_err(|_| Error::Format("field header not utf-8".into()))?;
        lines.push(line.to_string());
        pos += end + 1;
    }
    if lines[0] != FIELD_MAGIC {
        return Err(Error::Format("not a field snapshot".into()));
    }
    let field_after = |line: &str, tag: &str| -> Result<String> {
        line.strip_prefix(tag)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| Error::Format(format!("expected '{tag}' line")))
    };
    let config_hash = u64::from_str_radix(&field_after(&lines[1], "config_hash")?, 16)
        .map_err(|_| Error::Format("bad config hash".into()))?;
    let dim: usize = field_after(&lines[2], "dim")?
        .parse()
        .map_err(|_| Error::Format("bad dim".into()))?;
    let shape: Vec<usize> = field_after(&lines[3], "shape")?
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format("bad shape".into()))?;
    if shape.len() != 3 {
        return Err(Error::Format("shape needs three extents".into()));
    }
    let spacing: f64 = field_after(&lines[4], "spacing")?
        .parse()
        .map_err(|_| Error::Format("bad spacing".into()))?;
    let ov: Vec<f64> = field_after(&lines[5], "origin")?
        .split_whitespace()
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format("bad origin".into()))?;
    if ov.len() != 3 {
        return Err(Error::Format("origin needs three coordinates".into()));
    }
    let quantity = field_after(&lines[6], "quantity")?;
    let count: usize = field_after(&lines[7], "data f64 le")?
        .parse()
        .map_err(|_| Error::Format("bad data count".into()))?;
    let dims = GridDims::new(shape[0], shape[1], shape[2]);
    if count != dims.len() || buf.len() - pos < count * 8 {
        return Err(Error::Format("field payload truncated".into()));
    }
    let mut data = Vec::with_capacity(count);
    for q in 0..count {
        let s = &buf[pos + q * 8..pos + q * 8 + 8];
        data.push(f64::from_le_bytes(s.try_into().unwrap()));
    }
    let header = FieldHeader {
        config_hash,
        dim,
        dims,
        spacing,
        origin: Vec3::new(ov[0], ov[1], ov[2]),
        quantity,
    };
    Ok((header, data))
}

pub fn write_level_set(path: &Path, field: &LevelSetField, config_hash: u64) -> Result<()> {
    let header = FieldHeader {
        config_hash,
        dim: if field.two_d { 2 } else { 3 },
        dims: field.dims,
        spacing: field.h,
        origin: field.origin,
        quantity: "phi".into(),
    };
    write_scalar_field(path, &header, &field.phi)
}

pub fn read_level_set(path: &Path) -> Result<(LevelSetField, FieldHeader)> {
    let (header, data) = read_scalar_field(path)?;
    if header.quantity != "phi" {
        return Err(Error::Format(format!(
            "expected a level-set snapshot, found quantity '{}'",
            header.quantity
        )));
    }
    Ok((
        LevelSetField {
            dims: header.dims,
            h: header.spacing,
            origin: header.origin,
            two_d: header.dim == 2,
            phi: data,
            tau: 0.0,
            reinit_age: 0,
        },
        header,
    ))
}

/// Merit history table: `iteration,merit,normalized_merit,accepted`.
pub fn merit_history_csv(state: &OptimizationState, config_hash: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_hash = {config_hash:016x}");
    let _ = writeln!(s, "iteration,merit,normalized_merit,accepted");
    let norm = state.normalized_history();
    for (i, (m, n)) in state.merit_history.iter().zip(&norm).enumerate() {
        let acc = state.accepted.get(i).copied().unwrap_or(true);
        let _ = writeln!(s, "{i},{m:.9e},{n:.9e},{acc}");
    }
    s
}

/// Potential map rows: `x,y,z,U` with 9 significant digits; rows that
/// could not be evaluated carry a status instead of a number.
pub fn potential_table(
    rows: &[(Vec3, std::result::Result<f64, String>)],
    config_hash: u64,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_hash = {config_hash:016x}");
    let _ = writeln!(s, "x,y,z,U");
    for (p, r) in rows {
        match r {
            Ok(u) => {
                let _ = writeln!(s, "{:.9e},{:.9e},{:.9e},{:.9e}", p.x, p.y, p.z, u);
            }
            Err(status) => {
                let _ = writeln!(s, "{:.9e},{:.9e},{:.9e},error:{}", p.x, p.y, p.z, status);
            }
        }
    }
    s
}

/// Two-column kernel dump `t,K`.
pub fn kernel_table(kernel: &ConvolutionKernel, config_hash: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_hash = {config_hash:016x}");
    let _ = writeln!(s, "t,K");
    for (n, k) in kernel.samples.iter().enumerate() {
        let _ = writeln!(s, "{:.9e},{:.9e}", (n as f64 + 1.0) * kernel.dt, k);
    }
    s
}

/// Scan a directory for artifacts stamped with a different configuration.
pub fn check_provenance(dir: &Path, expected: u64) -> Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let mut head = vec![0u8; 256];
        let n = fs::File::open(&path)?.read(&mut head)?;
        head.truncate(n);
        let text = String::from_utf8_lossy(&head);
        for line in text.lines().take(4) {
            if let Some(idx) = line.find("config_hash") {
                let tail = line[idx + "config_hash".len()..].trim_start_matches([' ', '=']);
                let hex: String = tail.trim().chars().take(16).collect();
                if let Ok(found) = u64::from_str_radix(&hex, 16) {
                    if found != expected {
                        return Err(Error::Format(format!(
                            "{} carries config {found:016x}, current run is {expected:016x}",
                            path.display()
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// contour / mesh extraction

/// 2D: polylines of the zero contour (chained marching-squares segments).
pub fn contour_polylines(field: &LevelSetField) -> Vec<Vec<(f64, f64)>> {
    assert!(field.two_d, "contour extraction is 2D only");
    let dims = field.dims;
    let h = field.h;
    let at = |i: usize, j: usize| field.phi[dims.idx(i, j, 0)];
    let pos = |i: usize, j: usize| {
        (field.origin.x + (i as f64 + 0.5) * h, field.origin.y + (j as f64 + 0.5) * h)
    };
    let mut segments: Vec<[(f64, f64); 2]> = Vec::new();
    for j in 0..dims.ny - 1 {
        for i in 0..dims.nx - 1 {
            let corners = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let pts = [pos(i, j), pos(i + 1, j), pos(i + 1, j + 1), pos(i, j + 1)];
            let mut case = 0usize;
            for (q, &c) in corners.iter().enumerate() {
                if c < 0.0 {
                    case |= 1 << q;
                }
            }
            if case == 0 || case == 15 {
                continue;
            }
            let edge_pt = |a: usize, b: usize| -> (f64, f64) {
                let t = corners[a] / (corners[a] - corners[b]);
                (
                    pts[a].0 + t * (pts[b].0 - pts[a].0),
                    pts[a].1 + t * (pts[b].1 - pts[a].1),
                )
            };
            // edges: 0 = (0,1), 1 = (1,2), 2 = (2,3), 3 = (3,0)
            let crossings: Vec<(f64, f64)> = [(0usize, 1usize), (1, 2), (2, 3), (3, 0)]
                .iter()
                .filter(|(a, b)| (corners[*a] < 0.0) != (corners[*b] < 0.0))
                .map(|&(a, b)| edge_pt(a, b))
                .collect();
            match crossings.len() {
                2 => segments.push([crossings[0], crossings[1]]),
                4 => {
                    // ambiguous saddle: split by the center average
                    let center = corners.iter().sum::<f64>() / 4.0;
                    if (center < 0.0) == (corners[0] < 0.0) {
                        segments.push([crossings[0], crossings[3]]);
                        segments.push([crossings[1], crossings[2]]);
                    } else {
                        segments.push([crossings[0], crossings[1]]);
                        segments.push([crossings[2], crossings[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    chain_segments(segments, 1e-9 * h)
}

fn chain_segments(segments: Vec<[(f64, f64); 2]>, tol: f64) -> Vec<Vec<(f64, f64)>> {
    let quant = |p: (f64, f64)| -> (i64, i64) {
        ((p.0 / tol / 16.0).round() as i64, (p.1 / tol / 16.0).round() as i64)
    };
    let mut by_end: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for (q, seg) in segments.iter().enumerate() {
        by_end.entry(quant(seg[0])).or_default().push(q);
        by_end.entry(quant(seg[1])).or_default().push(q);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut line = vec![segments[start][0], segments[start][1]];
        loop {
            let tail = *line.last().unwrap();
            let mut advanced = false;
            if let Some(cands) = by_end.get(&quant(tail)) {
                for &c in cands {
                    if used[c] {
                        continue;
                    }
                    let seg = segments[c];
                    let next = if quant(seg[0]) == quant(tail) {
                        seg[1]
                    } else if quant(seg[1]) == quant(tail) {
                        seg[0]
                    } else {
                        continue;
                    };
                    used[c] = true;
                    line.push(next);
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
        out.push(line);
    }
    out
}

pub fn polylines_to_text(lines: &[Vec<(f64, f64)>], config_hash: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_hash = {config_hash:016x}");
    let _ = writeln!(s, "# zero contour polylines; blank line separates loops");
    for line in lines {
        for (x, y) in line {
            let _ = writeln!(s, "{x:.9e} {y:.9e}");
        }
        let _ = writeln!(s);
    }
    s
}

/// Indexed triangle mesh with welded vertices.
#[derive(Debug, Clone, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// `V - E + F` over unique undirected edges.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Every edge shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        let mut count = std::collections::HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *count.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
            }
        }
        !count.is_empty() && count.values().all(|&c| c == 2)
    }

    pub fn to_obj(&self, config_hash: u64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# config_hash = {config_hash:016x}");
        for v in &self.vertices {
            let _ = writeln!(s, "v {:.9e} {:.9e} {:.9e}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }
}

/// Zero-isosurface triangulation by marching tetrahedra (six per cube,
/// welded vertices).
pub fn isosurface(field: &LevelSetField) -> Result<TriangleMesh> {
    if field.two_d {
        return Err(Error::InvalidConfig("isosurface extraction is 3D only".into()));
    }
    if !field.phi.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidConfig("level set has an empty interior".into()));
    }
    let dims = field.dims;
    let h = field.h;

    // cube corners: bit 0 = +x, bit 1 = +y, bit 2 = +z
    const RING: [usize; 6] = [1, 3, 2, 6, 4, 5];

    let mut mesh = TriangleMesh::default();
    let mut weld: std::collections::HashMap<(i64, i64, i64), u32> =
        std::collections::HashMap::new();
    let quant = 1.0 / (1e-7 * h);
    let mut vertex = |p: Vec3, mesh: &mut TriangleMesh| -> u32 {
        let key = (
            (p.x * quant).round() as i64,
            (p.y * quant).round() as i64,
            (p.z * quant).round() as i64,
        );
        *weld.entry(key).or_insert_with(|| {
            mesh.vertices.push(p);
            (mesh.vertices.len() - 1) as u32
        })
    };

    for k in 0..dims.nz - 1 {
        for j in 0..dims.ny - 1 {
            for i in 0..dims.nx - 1 {
                let corner_pos = |bits: usize| -> Vec3 {
                    Vec3::new(
                        field.origin.x + (i as f64 + (bits & 1) as f64 + 0.5) * h,
                        field.origin.y + (j as f64 + ((bits >> 1) & 1) as f64 + 0.5) * h,
                        field.origin.z + (k as f64 + ((bits >> 2) & 1) as f64 + 0.5) * h,
                    )
                };
                let corner_val = |bits: usize| -> f64 {
                    field.phi[dims.idx(i + (bits & 1), j + ((bits >> 1) & 1), k + ((bits >> 2) & 1))]
                };
                // skip uniform cubes quickly
                let any_neg = (0..8).any(|b| corner_val(b) < 0.0);
                let any_pos = (0..8).any(|b| corner_val(b) >= 0.0);
                if !(any_neg && any_pos) {
                    continue;
                }
                for t in 0..6 {
                    let tet = [0usize, RING[t], RING[(t + 1) % 6], 7];
                    let vals = [
                        corner_val(tet[0]),
                        corner_val(tet[1]),
                        corner_val(tet[2]),
                        corner_val(tet[3]),
                    ];
                    let inside: Vec<usize> = (0..4).filter(|&q| vals[q] < 0.0).collect();
                    if inside.is_empty() || inside.len() == 4 {
                        continue;
                    }
                    let mut cut = |a: usize, b: usize, mesh: &mut TriangleMesh| -> u32 {
                        let pa = corner_pos(tet[a]);
                        let pb = corner_pos(tet[b]);
                        let t = vals[a] / (vals[a] - vals[b]);
                        vertex(
                            Vec3::new(
                                pa.x + t * (pb.x - pa.x),
                                pa.y + t * (pb.y - pa.y),
                                pa.z + t * (pb.z - pa.z),
                            ),
                            mesh,
                        )
                    };
                    match inside.len() {
                        1 => {
                            let a = inside[0];
                            let others: Vec<usize> = (0..4).filter(|&q| q != a).collect();
                            let v0 = cut(a, others[0], &mut mesh);
                            let v1 = cut(a, others[1], &mut mesh);
                            let v2 = cut(a, others[2], &mut mesh);
                            mesh.triangles.push([v0, v1, v2]);
                        }
                        3 => {
                            let a = (0..4).find(|q| !inside.contains(q)).unwrap();
                            let others: Vec<usize> = (0..4).filter(|&q| q != a).collect();
                            let v0 = cut(others[0], a, &mut mesh);
                            let v1 = cut(others[1], a, &mut mesh);
                            let v2 = cut(others[2], a, &mut mesh);
                            mesh.triangles.push([v0, v1, v2]);
                        }
                        2 => {
                            let (a, b) = (inside[0], inside[1]);
                            let outs: Vec<usize> = (0..4).filter(|q| !inside.contains(q)).collect();
                            let v00 = cut(a, outs[0], &mut mesh);
                            let v01 = cut(a, outs[1], &mut mesh);
                            let v10 = cut(b, outs[0], &mut mesh);
                            let v11 = cut(b, outs[1], &mut mesh);
                            mesh.triangles.push([v00, v01, v11]);
                            mesh.triangles.push([v00, v11, v10]);
                        }
                        _ => unreachable!(),
                    }
                }
            }
        }
    }
    // drop degenerate (welded) triangles
    mesh.triangles.retain(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2]);
    Ok(mesh)
}
