use std::collections::BTreeMap;

use super::quadrature::{p1_values, p2_ref_grads, p2_values, AffineMap};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

/// Taylor-Hood P2 velocity / P1 pressure space.
///
/// P2 nodes are numbered vertices first, then edges in order of first
/// appearance over the triangle list. Velocity DOF `c * n_p2 + k` is component
/// `c` at P2 node `k`: all x-components come before all y-components.
/// Pressure DOF `k` is the value at vertex `k`.
#[derive(Clone, Debug)]
pub struct TaylorHoodSpace {
    mesh: Mesh,
    edges: Vec<[usize; 2]>,
    p2_coords: Vec<[f64; 2]>,
    elem_nodes: Vec<[usize; 6]>,
    maps: Vec<AffineMap>,
    /// Sorted P2 nodes lying on Dirichlet edges, with the tag supplying their value.
    dirichlet_nodes: Vec<(usize, BoundaryTag)>,
    dirichlet_vel_dofs: Vec<usize>,
}

/// Precedence when a node touches edges with different tags: no-slip walls
/// first, so corner values are unambiguous.
fn tag_priority(t: BoundaryTag) -> u8 {
    match t {
        BoundaryTag::Wall => 0,
        BoundaryTag::Cylinder => 1,
        BoundaryTag::Inlet => 2,
        BoundaryTag::Outflow => 3,
    }
}

pub fn build_taylor_hood(m: &Mesh) -> TaylorHoodSpace {
    let nv = m.n_nodes();
    let mut edge_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut edges = Vec::new();
    let mut elem_nodes = Vec::with_capacity(m.n_triangles());
    for t in m.triangles() {
        let mut local = [t[0], t[1], t[2], 0, 0, 0];
        for (e, (a, b)) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])].into_iter().enumerate() {
            let key = (a.min(b), a.max(b));
            let idx = *edge_index.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                edges.len() - 1
            });
            local[3 + e] = nv + idx;
        }
        elem_nodes.push(local);
    }
    let mut p2_coords: Vec<[f64; 2]> = m.nodes().to_vec();
    for e in &edges {
        let (p, q) = (m.nodes()[e[0]], m.nodes()[e[1]]);
        p2_coords.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
    }
    let maps = (0..m.n_triangles()).map(|k| AffineMap::new(m.triangle_coords(k))).collect();

    let mut node_tag: BTreeMap<usize, BoundaryTag> = BTreeMap::new();
    for be in m.boundary().iter().filter(|e| e.tag.is_dirichlet()) {
        let [a, b] = be.nodes;
        let mid = nv + edge_index[&(a.min(b), a.max(b))];
        for n in [a, b, mid] {
            node_tag
                .entry(n)
                .and_modify(|t| {
                    if tag_priority(be.tag) < tag_priority(*t) {
                        *t = be.tag
                    }
                })
                .or_insert(be.tag);
        }
    }
    let dirichlet_nodes: Vec<(usize, BoundaryTag)> = node_tag.into_iter().collect();
    let n_p2 = p2_coords.len();
    let mut dirichlet_vel_dofs: Vec<usize> = dirichlet_nodes.iter().map(|&(n, _)| n).collect();
    dirichlet_vel_dofs.extend(dirichlet_nodes.iter().map(|&(n, _)| n_p2 + n));

    TaylorHoodSpace {
        mesh: m.clone(),
        edges,
        p2_coords,
        elem_nodes,
        maps,
        dirichlet_nodes,
        dirichlet_vel_dofs,
    }
}

impl TaylorHoodSpace {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn n_p2(&self) -> usize {
        self.p2_coords.len()
    }

    pub fn n_vel_dofs(&self) -> usize {
        2 * self.n_p2()
    }

    pub fn n_pre_dofs(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elem_nodes.len()
    }

    pub fn p2_coords(&self) -> &[[f64; 2]] {
        &self.p2_coords
    }

    pub fn element_nodes(&self, k: usize) -> [usize; 6] {
        self.elem_nodes[k]
    }

    pub fn element_vertices(&self, k: usize) -> [usize; 3] {
        self.mesh.triangles()[k]
    }

    pub fn element_map(&self, k: usize) -> &AffineMap {
        &self.maps[k]
    }

    /// P2 nodes with Dirichlet data, sorted, each with the tag supplying its value.
    pub fn dirichlet_nodes(&self) -> &[(usize, BoundaryTag)] {
        &self.dirichlet_nodes
    }

    /// Sorted velocity DOFs with Dirichlet data.
    pub fn dirichlet_vel_dofs(&self) -> &[usize] {
        &self.dirichlet_vel_dofs
    }

    /// Sorted velocity DOFs without Dirichlet data.
    pub fn free_vel_dofs(&self) -> Vec<usize> {
        let mut mask = vec![true; self.n_vel_dofs()];
        for &d in &self.dirichlet_vel_dofs {
            mask[d] = false;
        }
        (0..self.n_vel_dofs()).filter(|&i| mask[i]).collect()
    }

    /// Sorted scalar P2 nodes without Dirichlet data.
    pub fn free_nodes(&self) -> Vec<usize> {
        let mut mask = vec![true; self.n_p2()];
        for &(n, _) in &self.dirichlet_nodes {
            mask[n] = false;
        }
        (0..self.n_p2()).filter(|&i| mask[i]).collect()
    }

    /// True when no outflow boundary fixes the pressure level.
    pub fn pressure_needs_gauge(&self) -> bool {
        !self.mesh.has_tag(BoundaryTag::Outflow)
    }

    /// Interpolates a vector function at the P2 nodes.
    pub fn interpolate_velocity(&self, f: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
        let n = self.n_p2();
        let mut u = vec![0.0; 2 * n];
        for (k, p) in self.p2_coords.iter().enumerate() {
            let v = f(p[0], p[1]);
            u[k] = v[0];
            u[n + k] = v[1];
        }
        u
    }

    /// Interpolates a scalar function at the vertices.
    pub fn interpolate_pressure(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.mesh.nodes().iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Velocity of the P2 field `u` at reference point `x` of element `k`.
    pub fn eval_velocity_ref(&self, u: &[f64], k: usize, x: [f64; 2]) -> [f64; 2] {
        let n = self.n_p2();
        let nodes = self.elem_nodes[k];
        let phi = p2_values(x);
        let mut v = [0.0; 2];
        for a in 0..6 {
            v[0] += u[nodes[a]] * phi[a];
            v[1] += u[n + nodes[a]] * phi[a];
        }
        v
    }

    /// Velocity gradient `[[∂x u, ∂y u], [∂x v, ∂y v]]` at reference point `x` of element `k`.
    pub fn eval_velocity_grad_ref(&self, u: &[f64], k: usize, x: [f64; 2]) -> [[f64; 2]; 2] {
        let n = self.n_p2();
        let nodes = self.elem_nodes[k];
        let g = p2_ref_grads(x);
        let map = &self.maps[k];
        let mut out = [[0.0; 2]; 2];
        for a in 0..6 {
            let ga = map.grad(g[a]);
            for c in 0..2 {
                let coef = u[c * n + nodes[a]];
                out[c][0] += coef * ga[0];
                out[c][1] += coef * ga[1];
            }
        }
        out
    }

    pub fn eval_pressure_ref(&self, p: &[f64], k: usize, x: [f64; 2]) -> f64 {
        let v = self.element_vertices(k);
        let l = p1_values(x);
        (0..3).map(|a| p[v[a]] * l[a]).sum()
    }

    pub fn check_velocity(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n_vel_dofs() {
            return Err(Error::InvalidInput(format!(
                "velocity vector has length {}, space has {} DOFs",
                u.len(),
                self.n_vel_dofs()
            )));
        }
        Ok(())
    }

    pub fn check_pressure(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_pre_dofs() {
            return Err(Error::InvalidInput(format!(
                "pressure vector has length {}, space has {} DOFs",
                p.len(),
                self.n_pre_dofs()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_channel_cylinder, parse_mesh};

    const SQUARE: &str = "NODES 4\n0 0\n1 0\n1 1\n0 1\nTRIANGLES 2\n0 1 2\n0 2 3\n\
                          BOUNDARY 4\n0 1 WALL\n1 2 OUTFLOW\n2 3 WALL\n3 0 INLET\n";

    #[test]
    fn unit_square_dof_counts() {
        let s = build_taylor_hood(&parse_mesh(SQUARE).unwrap());
        assert_eq!(s.n_vel_dofs(), 18);
        assert_eq!(s.n_pre_dofs(), 4);
        // every node except the outflow edge midpoint is Dirichlet
        assert_eq!(s.dirichlet_nodes().len(), 7);
    }

    #[test]
    fn corner_priority_prefers_walls() {
        let s = build_taylor_hood(&parse_mesh(SQUARE).unwrap());
        let tag0 = s.dirichlet_nodes().iter().find(|(n, _)| *n == 0).unwrap().1;
        assert_eq!(tag0, BoundaryTag::Wall);
    }

    #[test]
    fn pressure_dofs_are_vertices() {
        let m = generate_channel_cylinder(44, 8, 16).unwrap();
        let s = build_taylor_hood(&m);
        assert_eq!(s.n_pre_dofs(), m.n_nodes());
        assert_eq!(s.n_p2(), m.n_nodes() + s.n_edges());
    }

    #[test]
    fn dirichlet_dofs_sit_on_dirichlet_edges() {
        let m = generate_channel_cylinder(30, 6, 12).unwrap();
        let s = build_taylor_hood(&m);
        for &(n, _) in s.dirichlet_nodes() {
            let p = s.p2_coords()[n];
            let on_wall = p[1].abs() < 1e-12 || (p[1] - 0.41).abs() < 1e-12;
            let on_inlet = p[0].abs() < 1e-12;
            // edge midpoints sit on the chord, inside the circle
            let on_cyl = ((p[0] - 0.2).hypot(p[1] - 0.2) - 0.05).abs() < 2.0e-3;
            assert!(on_wall || on_inlet || on_cyl, "node at {p:?}");
        }
    }

    #[test]
    fn interpolation_of_quadratics_is_exact() {
        let m = generate_channel_cylinder(30, 6, 12).unwrap();
        let s = build_taylor_hood(&m);
        let f = |x: f64, y: f64| [x * y - y * y, 2.0 * x * x + y];
        let u = s.interpolate_velocity(f);
        let v = s.eval_velocity_ref(&u, 7, [0.2, 0.3]);
        let p = s.element_map(7).to_physical([0.2, 0.3]);
        let e = f(p[0], p[1]);
        assert!((v[0] - e[0]).abs() < 1e-13 && (v[1] - e[1]).abs() < 1e-13);
        let g = s.eval_velocity_grad_ref(&u, 7, [0.2, 0.3]);
        assert!((g[0][0] - p[1]).abs() < 1e-12 && (g[1][0] - 4.0 * p[0]).abs() < 1e-12);
    }
}
