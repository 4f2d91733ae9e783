//! Triangle meshes with tagged boundary edges: validation, ASCII I/O, and
//! generators for the channel-with-cylinder domain.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const CHANNEL_LENGTH: f64 = 2.2;
pub const CHANNEL_HEIGHT: f64 = 0.41;
pub const CYLINDER_CENTER: [f64; 2] = [0.2, 0.2];
pub const CYLINDER_RADIUS: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    Inlet,
    Wall,
    Cylinder,
    Outflow,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [Self::Inlet, Self::Wall, Self::Cylinder, Self::Outflow];

    pub fn label(self) -> &'static str {
        match self {
            Self::Inlet => "INLET",
            Self::Wall => "WALL",
            Self::Cylinder => "CYLINDER",
            Self::Outflow => "OUTFLOW",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.label() == s)
    }

    /// Inlet, walls and cylinder carry Dirichlet data; the outflow is natural.
    pub fn is_dirichlet(self) -> bool {
        self != Self::Outflow
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    h_min: f64,
    h_max: f64,
}

fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Longest edge of a triangle.
pub fn triangle_diameter(p: [[f64; 2]; 3]) -> f64 {
    dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]))
}

impl Mesh {
    /// Validates and builds a mesh.
    ///
    /// Triangles are reoriented counter-clockwise. Every edge used by exactly
    /// one triangle must appear exactly once in `boundary`, and nothing else may.
    pub fn new(nodes: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>, boundary: Vec<BoundaryEdge>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Topology("mesh has no triangles".into()));
        }
        for (k, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::Topology(format!("triangle {k} references a missing node")));
            }
            let a = signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
            if a == 0.0 || !a.is_finite() {
                return Err(Error::Topology(format!("triangle {k} is degenerate")));
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
        }
        let mut use_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &triangles {
            for e in 0..3 {
                *use_count.entry(edge_key(t[e], t[(e + 1) % 3])).or_default() += 1;
            }
        }
        if let Some((e, _)) = use_count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::Topology(format!("edge {e:?} is shared by more than two triangles")));
        }
        let mut tagged: BTreeMap<(usize, usize), BoundaryTag> = BTreeMap::new();
        for be in &boundary {
            let key = edge_key(be.nodes[0], be.nodes[1]);
            match use_count.get(&key) {
                Some(1) => {}
                _ => return Err(Error::Topology(format!("boundary edge {key:?} is not on the mesh boundary"))),
            }
            if tagged.insert(key, be.tag).is_some() {
                return Err(Error::Topology(format!("boundary edge {key:?} is tagged twice")));
            }
        }
        if let Some((e, _)) = use_count.iter().find(|(e, &c)| c == 1 && !tagged.contains_key(e)) {
            return Err(Error::Topology(format!("boundary edge {e:?} carries no tag")));
        }
        let mut mesh = Self { nodes, triangles, boundary, h_min: 0.0, h_max: 0.0 };
        let (lo, hi) = mesh_metrics(&mesh);
        mesh.h_min = lo;
        mesh.h_max = hi;
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_coords(&self, k: usize) -> [[f64; 2]; 3] {
        let t = self.triangles[k];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        let p = self.triangle_coords(k);
        signed_area(p[0], p[1], p[2])
    }

    pub fn count_tag(&self, tag: BoundaryTag) -> usize {
        self.boundary.iter().filter(|e| e.tag == tag).count()
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.count_tag(tag) > 0
    }

    pub fn to_ascii(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "NODES {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:.16e} {:.16e}", p[0], p[1]);
        }
        let _ = writeln!(s, "TRIANGLES {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "BOUNDARY {}", self.boundary.len());
        for e in &self.boundary {
            let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.tag.label());
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_ascii())?;
        Ok(())
    }
}

/// Smallest and largest triangle diameter.
pub fn mesh_metrics(m: &Mesh) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for k in 0..m.triangles.len() {
        let d = triangle_diameter(m.triangle_coords(k));
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    fn header<'a>(
        lines: &mut impl Iterator<Item = (usize, &'a str)>,
        keyword: &str,
    ) -> Result<usize> {
        let (ln, l) = lines.next().ok_or(Error::Parse { line: 0, msg: format!("missing {keyword} section") })?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(Error::Parse { line: ln, msg: format!("expected {keyword}") });
        }
        let n = parts.next().and_then(|s| s.parse().ok());
        match (n, parts.next()) {
            (Some(n), None) => Ok(n),
            _ => Err(Error::Parse { line: ln, msg: format!("malformed {keyword} header") }),
        }
    }

    fn fields<'a>(
        lines: &mut impl Iterator<Item = (usize, &'a str)>,
        count: usize,
    ) -> Result<(usize, Vec<&'a str>)> {
        let (ln, l) = lines.next().ok_or(Error::Parse { line: 0, msg: "unexpected end of file".into() })?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != count {
            return Err(Error::Parse { line: ln, msg: format!("expected {count} fields, found {}", f.len()) });
        }
        Ok((ln, f))
    }

    fn num<T: std::str::FromStr>(ln: usize, s: &str) -> Result<T> {
        s.parse().map_err(|_| Error::Parse { line: ln, msg: format!("cannot parse '{s}'") })
    }

    let n_nodes = header(&mut lines, "NODES")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, f) = fields(&mut lines, 2)?;
        let p = [num::<f64>(ln, f[0])?, num::<f64>(ln, f[1])?];
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::Parse { line: ln, msg: "non-finite coordinate".into() });
        }
        nodes.push(p);
    }
    let n_tris = header(&mut lines, "TRIANGLES")?;
    let mut triangles = Vec::with_capacity(n_tris);
    for _ in 0..n_tris {
        let (ln, f) = fields(&mut lines, 3)?;
        triangles.push([num(ln, f[0])?, num(ln, f[1])?, num(ln, f[2])?]);
    }
    let n_bnd = header(&mut lines, "BOUNDARY")?;
    let mut boundary = Vec::with_capacity(n_bnd);
    for _ in 0..n_bnd {
        let (ln, f) = fields(&mut lines, 3)?;
        let tag = BoundaryTag::from_label(f[2])
            .ok_or_else(|| Error::Topology(format!("unknown boundary tag '{}' on line {ln}", f[2])))?;
        let a: usize = num(ln, f[0])?;
        let b: usize = num(ln, f[1])?;
        if a >= nodes.len() || b >= nodes.len() {
            return Err(Error::Topology(format!("boundary edge on line {ln} references a missing node")));
        }
        boundary.push(BoundaryEdge { nodes: [a, b], tag });
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse { line: ln, msg: "trailing content".into() });
    }
    Mesh::new(nodes, triangles, boundary)
}

/// Collects the topological boundary edges in a deterministic order and tags
/// each one with `tag_of(midpoint, a, b)`.
fn tag_boundary(
    nodes: &[[f64; 2]],
    triangles: &[[usize; 3]],
    tag_of: impl Fn([f64; 2], usize, usize) -> Result<BoundaryTag>,
) -> Result<Vec<BoundaryEdge>> {
    let mut use_count: BTreeMap<(usize, usize), (usize, [usize; 2])> = BTreeMap::new();
    for t in triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            use_count.entry(edge_key(a, b)).or_insert((0, [a, b])).0 += 1;
        }
    }
    let mut out = Vec::new();
    for (_, (count, [a, b])) in use_count {
        if count == 1 {
            let mid = [0.5 * (nodes[a][0] + nodes[b][0]), 0.5 * (nodes[a][1] + nodes[b][1])];
            out.push(BoundaryEdge { nodes: [a, b], tag: tag_of(mid, a, b)? });
        }
    }
    Ok(out)
}

/// Structured mesh of `[x0,x1]×[y0,y1]`, each cell split along its diagonal.
/// `tags` are for the bottom, right, top and left sides.
pub fn generate_rectangle(
    nx: usize,
    ny: usize,
    x: [f64; 2],
    y: [f64; 2],
    tags: [BoundaryTag; 4],
) -> Result<Mesh> {
    if nx == 0 || ny == 0 || !(x[1] > x[0]) || !(y[1] > y[0]) {
        return Err(Error::InvalidInput("rectangle needs positive extent and cell counts".into()));
    }
    let hx = (x[1] - x[0]) / nx as f64;
    let hy = (y[1] - y[0]) / ny as f64;
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let px = if i == nx { x[1] } else { x[0] + i as f64 * hx };
            let py = if j == ny { y[1] } else { y[0] + j as f64 * hy };
            nodes.push([px, py]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let tol = 1e-9 * (hx.min(hy));
    let boundary = tag_boundary(&nodes, &triangles, |m, _, _| {
        Ok(if (m[1] - y[0]).abs() < tol {
            tags[0]
        } else if (m[0] - x[1]).abs() < tol {
            tags[1]
        } else if (m[1] - y[1]).abs() < tol {
            tags[2]
        } else {
            tags[3]
        })
    })?;
    Mesh::new(nodes, triangles, boundary)
}

/// The empty channel `[0,2.2]×[0,0.41]` with inlet, walls and outflow.
pub fn generate_channel(nx: usize, ny: usize) -> Result<Mesh> {
    use BoundaryTag::*;
    generate_rectangle(nx, ny, [0.0, CHANNEL_LENGTH], [0.0, CHANNEL_HEIGHT], [Wall, Outflow, Wall, Inlet])
}

/// Unit square with every side tagged as wall.
pub fn generate_unit_square(n: usize) -> Result<Mesh> {
    use BoundaryTag::Wall;
    generate_rectangle(n, n, [0.0, 1.0], [0.0, 1.0], [Wall; 4])
}

/// Channel with the cylinder cut out.
///
/// A uniform `nx × ny` background grid has a block of cells around the
/// cylinder removed. Inside the block, `n_circle` rays carry an O-grid of
/// concentric rings starting on the circle, and the outermost ring is zipped
/// to the block perimeter.
pub fn generate_channel_cylinder(nx: usize, ny: usize, n_circle: usize) -> Result<Mesh> {
    if nx < 8 || ny < 4 || n_circle < 8 {
        return Err(Error::InvalidInput(format!(
            "generator needs nx >= 8, ny >= 4, n_circle >= 8 (got {nx}, {ny}, {n_circle})"
        )));
    }
    let [cx, cy] = CYLINDER_CENTER;
    let r = CYLINDER_RADIUS;
    let hx = CHANNEL_LENGTH / nx as f64;
    let hy = CHANNEL_HEIGHT / ny as f64;
    let gap = 1.5 * r;
    // hole block in cell indices; sides at least 1.5 r from the center
    let ib = ((cx - gap) / hx + 1e-9).floor() as isize;
    let ie = ((cx + gap) / hx - 1e-9).ceil() as isize;
    let jb = ((cy - gap) / hy + 1e-9).floor() as isize;
    let je = ((cy + gap) / hy - 1e-9).ceil() as isize;
    if ib < 1 || jb < 1 || ie > nx as isize - 1 || je > ny as isize - 1 {
        return Err(Error::Resolution(format!(
            "background cells ({hx:.4} x {hy:.4}) too large to fit a block around the cylinder"
        )));
    }
    let (ib, ie, jb, je) = (ib as usize, ie as usize, jb as usize, je as usize);
    let in_hole_cell = |i: usize, j: usize| i >= ib && i < ie && j >= jb && j < je;
    let strictly_inside = |i: usize, j: usize| i > ib && i < ie && j > jb && j < je;

    let mut nodes = Vec::new();
    let mut grid_id = vec![usize::MAX; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            if strictly_inside(i, j) {
                continue;
            }
            let px = if i == nx { CHANNEL_LENGTH } else { i as f64 * hx };
            let py = if j == ny { CHANNEL_HEIGHT } else { j as f64 * hy };
            grid_id[j * (nx + 1) + i] = nodes.len();
            nodes.push([px, py]);
        }
    }
    let gid = |i: usize, j: usize| grid_id[j * (nx + 1) + i];
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if in_hole_cell(i, j) {
                continue;
            }
            triangles.push([gid(i, j), gid(i + 1, j), gid(i + 1, j + 1)]);
            triangles.push([gid(i, j), gid(i + 1, j + 1), gid(i, j + 1)]);
        }
    }

    // O-grid rings
    let box_x = [ib as f64 * hx, ie as f64 * hx];
    let box_y = [jb as f64 * hy, je as f64 * hy];
    let min_side = (cx - box_x[0]).min(box_x[1] - cx).min(cy - box_y[0]).min(box_y[1] - cy);
    let r_outer = 0.8 * min_side;
    let chord = 2.0 * PI * r / n_circle as f64;
    let layers = (((r_outer - r) / chord).ceil() as usize).max(1);
    let ring_start = nodes.len();
    let ring = |l: usize, k: usize| ring_start + l * n_circle + (k % n_circle);
    for l in 0..=layers {
        let rl = r + (r_outer - r) * l as f64 / layers as f64;
        for k in 0..n_circle {
            let th = 2.0 * PI * k as f64 / n_circle as f64;
            nodes.push([cx + rl * th.cos(), cy + rl * th.sin()]);
        }
    }
    for l in 0..layers {
        for k in 0..n_circle {
            triangles.push([ring(l, k), ring(l + 1, k + 1), ring(l, k + 1)]);
            triangles.push([ring(l, k), ring(l + 1, k), ring(l + 1, k + 1)]);
        }
    }

    // zipper between the outer ring and the block perimeter
    let mut perimeter: Vec<usize> = Vec::new();
    for i in ib..ie {
        perimeter.push(gid(i, jb));
    }
    for j in jb..je {
        perimeter.push(gid(ie, j));
    }
    for i in (ib + 1..=ie).rev() {
        perimeter.push(gid(i, je));
    }
    for j in (jb + 1..=je).rev() {
        perimeter.push(gid(ib, j));
    }
    let angle = |p: [f64; 2]| {
        let a = (p[1] - cy).atan2(p[0] - cx);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    };
    let mut per: Vec<(f64, usize)> = perimeter.iter().map(|&n| (angle(nodes[n]), n)).collect();
    per.sort_by(|a, b| a.0.total_cmp(&b.0));
    let np = per.len();
    let ring_angle = |k: usize| 2.0 * PI * k as f64 / n_circle as f64;
    let per_angle = |j: usize| per[j % np].0 + if j >= np { 2.0 * PI } else { 0.0 };
    let (mut i, mut j) = (0usize, 0usize);
    while i < n_circle || j < np {
        let advance_ring = j == np || (i < n_circle && ring_angle(i + 1) < per_angle(j + 1));
        if advance_ring {
            triangles.push([ring(layers, i), per[j % np].1, ring(layers, i + 1)]);
            i += 1;
        } else {
            triangles.push([ring(layers, i), per[j % np].1, per[(j + 1) % np].1]);
            j += 1;
        }
    }

    for t in &triangles {
        let a = signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
        if a.abs() < 1e-12 {
            return Err(Error::Resolution("degenerate triangle between rings and background grid".into()));
        }
    }
    // every zipper triangle must be counter-clockwise as built
    for t in &triangles[triangles.len() - n_circle - np..] {
        if signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]) <= 0.0 {
            return Err(Error::Resolution("folded triangle between rings and background grid".into()));
        }
    }
    for t in &triangles {
        if t.iter().any(|&n| n >= ring_start && n < ring_start + n_circle) {
            let d = triangle_diameter([nodes[t[0]], nodes[t[1]], nodes[t[2]]]);
            if d > 0.05 {
                return Err(Error::Resolution(format!("triangle of diameter {d:.4} touches the cylinder")));
            }
        }
    }

    let tol = 1e-9;
    let is_ring0 = |n: usize| n >= ring_start && n < ring_start + n_circle;
    let boundary = tag_boundary(&nodes, &triangles, |m, a, b| {
        use BoundaryTag::*;
        if is_ring0(a) && is_ring0(b) {
            Ok(Cylinder)
        } else if m[0].abs() < tol {
            Ok(Inlet)
        } else if (m[0] - CHANNEL_LENGTH).abs() < tol {
            Ok(Outflow)
        } else if m[1].abs() < tol || (m[1] - CHANNEL_HEIGHT).abs() < tol {
            Ok(Wall)
        } else {
            Err(Error::Topology(format!("unexpected boundary edge at ({:.4}, {:.4})", m[0], m[1])))
        }
    })?;
    Mesh::new(nodes, triangles, boundary)
}
