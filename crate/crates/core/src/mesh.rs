//! Structured simplex meshes with precomputed P1 basis gradients.
//!
//! A [`Mesh`] stores geometry and connectivity as flat row-major arrays
//! (`nodes2coord` is `nn × dim`, `elems2nodes` is `ne × (dim+1)`), the
//! element measures and the constant gradients of the local barycentric
//! basis functions. Indices are 0-based in memory; the plain-text format
//! written by [`Mesh::write_text`] uses 1-based connectivity.

use std::io::{BufRead, Write};

use log::warn;

use crate::error::{Error, Result};

/// Partition of nodes and interleaved dofs into Dirichlet and free sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DofPartition {
    /// Number of field components `d`.
    pub ncomp: usize,
    /// Nodes with every component prescribed.
    pub nodes_dirichlet: Vec<usize>,
    /// Nodes with at least one free component.
    pub nodes_minim: Vec<usize>,
    pub dofs_dirichlet: Vec<usize>,
    pub dofs_minim: Vec<usize>,
}

impl DofPartition {
    pub fn all_free(nn: usize, ncomp: usize) -> Self {
        DofPartition {
            ncomp,
            nodes_dirichlet: Vec::new(),
            nodes_minim: (0..nn).collect(),
            dofs_dirichlet: Vec::new(),
            dofs_minim: (0..nn * ncomp).collect(),
        }
    }
}

/// A triangle or tetrahedron mesh with P1 data.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub level: usize,
    pub nodes2coord: Vec<f64>,
    pub elems2nodes: Vec<usize>,
    pub volumes: Vec<f64>,
    /// `dphi[m][k * (dim+1) + l]` is the derivative of the `l`-th local basis
    /// function of element `k` with respect to `x_m`.
    pub dphi: Vec<Vec<f64>>,
    pub partition: DofPartition,
}

type Predicate = Box<dyn Fn(&[f64]) -> bool + Send + Sync>;
type ValueFn = Box<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

/// One boundary region with prescribed components.
pub struct DirichletRegion {
    pub name: String,
    pub selects: Predicate,
    /// 0-based fixed components.
    pub components: Vec<usize>,
    /// Value of all `d` components at a node for load parameter `t`.
    pub value: ValueFn,
}

impl std::fmt::Debug for DirichletRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletRegion")
            .field("name", &self.name)
            .field("components", &self.components)
            .finish_non_exhaustive()
    }
}

/// Collection of Dirichlet regions.
#[derive(Debug, Default)]
pub struct DirichletSpec {
    pub regions: Vec<DirichletRegion>,
}

impl DirichletSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn region(
        mut self,
        name: &str,
        selects: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
        components: &[usize],
        value: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.regions.push(DirichletRegion {
            name: name.to_owned(),
            selects: Box::new(selects),
            components: components.to_vec(),
            value: Box::new(value),
        });
        self
    }

    /// Fixes all components of the selected nodes to the identity map `v(x) = x`.
    pub fn identity_region(
        self,
        name: &str,
        selects: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
        dim: usize,
    ) -> Self {
        let comps: Vec<usize> = (0..dim).collect();
        self.region(name, selects, &comps, |x, _| x.to_vec())
    }

    /// Fixes all `d` components of the selected nodes to zero.
    pub fn zero_region(
        self,
        name: &str,
        selects: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
        d: usize,
    ) -> Self {
        let comps: Vec<usize> = (0..d).collect();
        self.region(name, selects, &comps, move |_, _| vec![0.0; d])
    }
}

impl Mesh {
    /// Builds a mesh from raw arrays, computing volumes and basis gradients.
    pub fn from_arrays(
        dim: usize,
        level: usize,
        nodes2coord: Vec<f64>,
        elems2nodes: Vec<usize>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument(format!("dimension {dim} not supported")));
        }
        if !nodes2coord.len().is_multiple_of(dim) || !elems2nodes.len().is_multiple_of(dim + 1) {
            return Err(Error::InvalidArgument("array length mismatch".into()));
        }
        let nn = nodes2coord.len() / dim;
        for (k, el) in elems2nodes.chunks(dim + 1).enumerate() {
            for (a, &i) in el.iter().enumerate() {
                if i >= nn {
                    return Err(Error::InvalidArgument(format!(
                        "element {k} references node {i} but mesh has {nn} nodes"
                    )));
                }
                if el[..a].contains(&i) {
                    return Err(Error::InvalidArgument(format!(
                        "element {k} repeats node {i}"
                    )));
                }
            }
        }
        let (volumes, dphi) = compute_p1_gradients(dim, &nodes2coord, &elems2nodes)?;
        Ok(Mesh {
            dim,
            level,
            nodes2coord,
            elems2nodes,
            volumes,
            dphi,
            partition: DofPartition::all_free(nn, 1),
        })
    }

    pub fn nn(&self) -> usize {
        self.nodes2coord.len() / self.dim
    }

    pub fn ne(&self) -> usize {
        self.volumes.len()
    }

    /// Nodes per element.
    pub fn nloc(&self) -> usize {
        self.dim + 1
    }

    pub fn coord(&self, i: usize) -> &[f64] {
        &self.nodes2coord[i * self.dim..(i + 1) * self.dim]
    }

    pub fn elem(&self, k: usize) -> &[usize] {
        let n = self.nloc();
        &self.elems2nodes[k * n..(k + 1) * n]
    }

    pub fn total_measure(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Flags nodes lying on boundary facets (facets owned by one element).
    pub fn boundary_nodes(&self) -> Vec<bool> {
        let n = self.nloc();
        let mut facets: Vec<[usize; 3]> = Vec::with_capacity(self.ne() * n);
        for el in self.elems2nodes.chunks(n) {
            for skip in 0..n {
                let mut f = [usize::MAX; 3];
                let mut c = 0;
                for (a, &i) in el.iter().enumerate() {
                    if a != skip {
                        f[c] = i;
                        c += 1;
                    }
                }
                f[..c].sort_unstable();
                facets.push(f);
            }
        }
        facets.sort_unstable();
        let mut on_boundary = vec![false; self.nn()];
        let mut i = 0;
        while i < facets.len() {
            let mut j = i + 1;
            while j < facets.len() && facets[j] == facets[i] {
                j += 1;
            }
            if j - i == 1 {
                for &node in facets[i].iter().take(self.dim) {
                    on_boundary[node] = true;
                }
            }
            i = j;
        }
        on_boundary
    }

    /// Sorted node-to-node adjacency (including the node itself) in CSR form.
    pub fn node_adjacency(&self) -> (Vec<usize>, Vec<usize>) {
        let nn = self.nn();
        let n = self.nloc();
        let mut lists: Vec<Vec<usize>> = (0..nn).map(|i| vec![i]).collect();
        for el in self.elems2nodes.chunks(n) {
            for &a in el {
                for &b in el {
                    if a != b {
                        lists[a].push(b);
                    }
                }
            }
        }
        let mut ptr = Vec::with_capacity(nn + 1);
        let mut idx = Vec::new();
        ptr.push(0);
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            idx.extend_from_slice(&l);
            ptr.push(idx.len());
        }
        (ptr, idx)
    }

    /// Elements adjacent to each node in ascending element order (CSR form).
    pub fn node_elements(&self) -> (Vec<usize>, Vec<usize>) {
        let nn = self.nn();
        let mut ptr = vec![0usize; nn + 1];
        for &i in &self.elems2nodes {
            ptr[i + 1] += 1;
        }
        for i in 0..nn {
            ptr[i + 1] += ptr[i];
        }
        let mut fill = ptr.clone();
        let mut elems = vec![0usize; self.elems2nodes.len()];
        for (k, el) in self.elems2nodes.chunks(self.nloc()).enumerate() {
            for &i in el {
                elems[fill[i]] = k;
                fill[i] += 1;
            }
        }
        (ptr, elems)
    }

    /// Fills the node/dof partition for a `d`-component field.
    ///
    /// A node belongs to `nodes_dirichlet` only when all its components are
    /// fixed; nodes with at least one free component are free nodes.
    pub fn with_dirichlet(mut self, spec: &DirichletSpec, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("component count must be positive".into()));
        }
        let nn = self.nn();
        let boundary = self.boundary_nodes();
        let mut fixed = vec![false; nn * d];
        for region in &spec.regions {
            if let Some(&c) = region.components.iter().find(|&&c| c >= d) {
                return Err(Error::InvalidArgument(format!(
                    "region '{}' fixes component {c} of a {d}-component field",
                    region.name
                )));
            }
            let mut matched = 0usize;
            for i in 0..nn {
                if !(region.selects)(self.coord(i)) {
                    continue;
                }
                if !boundary[i] {
                    return Err(Error::InvalidArgument(format!(
                        "region '{}' selects interior node {i}",
                        region.name
                    )));
                }
                matched += 1;
                for &c in &region.components {
                    fixed[i * d + c] = true;
                }
            }
            if matched == 0 {
                warn!("Dirichlet region '{}' matches no nodes", region.name);
            }
        }
        let mut p = DofPartition {
            ncomp: d,
            nodes_dirichlet: Vec::new(),
            nodes_minim: Vec::new(),
            dofs_dirichlet: Vec::new(),
            dofs_minim: Vec::new(),
        };
        for i in 0..nn {
            if fixed[i * d..(i + 1) * d].iter().all(|&f| f) {
                p.nodes_dirichlet.push(i);
            } else {
                p.nodes_minim.push(i);
            }
        }
        for (n, &f) in fixed.iter().enumerate() {
            if f {
                p.dofs_dirichlet.push(n);
            } else {
                p.dofs_minim.push(n);
            }
        }
        self.partition = p;
        Ok(self)
    }

    /// Writes `dim nn ne`, the coordinates and the 1-based connectivity.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.dim, self.nn(), self.ne())?;
        for c in self.nodes2coord.chunks(self.dim) {
            let line: Vec<String> = c.iter().map(|x| format!("{x:?}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        for el in self.elems2nodes.chunks(self.nloc()) {
            let line: Vec<String> = el.iter().map(|i| (i + 1).to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Mesh::write_text`].
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            loop {
                match lines.next() {
                    Some(l) => {
                        let l = l?;
                        if !l.trim().is_empty() {
                            return Ok(l);
                        }
                    }
                    None => return Err(Error::Parse("unexpected end of mesh file".into())),
                }
            }
        };
        let header: Vec<usize> = parse_fields(&next()?)?;
        if header.len() != 3 {
            return Err(Error::Parse("header must be `dim nn ne`".into()));
        }
        let (dim, nn, ne) = (header[0], header[1], header[2]);
        let mut coords = Vec::with_capacity(nn * dim);
        for _ in 0..nn {
            let row: Vec<f64> = parse_fields(&next()?)?;
            if row.len() != dim {
                return Err(Error::Parse(format!("expected {dim} coordinates")));
            }
            coords.extend(row);
        }
        let mut elems = Vec::with_capacity(ne * (dim + 1));
        for _ in 0..ne {
            let row: Vec<usize> = parse_fields(&next()?)?;
            if row.len() != dim + 1 || row.contains(&0) {
                return Err(Error::Parse(format!("expected {} 1-based indices", dim + 1)));
            }
            elems.extend(row.into_iter().map(|i| i - 1));
        }
        Mesh::from_arrays(dim, 0, coords, elems)
    }
}

fn parse_fields<T: std::str::FromStr>(line: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|s| s.parse::<T>().map_err(|_| Error::Parse(format!("bad field '{s}'"))))
        .collect()
}

/// Element measures and constant basis gradients of all simplices.
///
/// For each element the edge matrix `D` (rows `x_l - x_0`) is inverted in
/// closed form; the gradient of local basis function `l ≥ 1` is column
/// `l-1` of `D⁻¹` and the first gradient closes the partition of unity.
pub fn compute_p1_gradients(
    dim: usize,
    nodes2coord: &[f64],
    elems2nodes: &[usize],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = dim + 1;
    let ne = elems2nodes.len() / n;
    let mut volumes = vec![0.0; ne];
    let mut dphi = vec![vec![0.0; ne * n]; dim];
    let x = |i: usize, m: usize| nodes2coord[i * dim + m];
    for k in 0..ne {
        let el = &elems2nodes[k * n..(k + 1) * n];
        match dim {
            2 => {
                let (a, b, c) = (el[0], el[1], el[2]);
                let (d00, d01) = (x(b, 0) - x(a, 0), x(b, 1) - x(a, 1));
                let (d10, d11) = (x(c, 0) - x(a, 0), x(c, 1) - x(a, 1));
                let det = d00 * d11 - d01 * d10;
                let scale = (d00.abs() + d01.abs() + d10.abs() + d11.abs()).powi(2);
                if !(det > 1e-14 * scale) {
                    return Err(Error::DegenerateElement { element: k, measure: det / 2.0 });
                }
                volumes[k] = det / 2.0;
                let g1 = [d11 / det, -d10 / det];
                let g2 = [-d01 / det, d00 / det];
                for m in 0..2 {
                    dphi[m][k * 3 + 1] = g1[m];
                    dphi[m][k * 3 + 2] = g2[m];
                    dphi[m][k * 3] = -g1[m] - g2[m];
                }
            }
            3 => {
                let o = el[0];
                let e: [[f64; 3]; 3] = std::array::from_fn(|a| {
                    std::array::from_fn(|m| x(el[a + 1], m) - x(o, m))
                });
                let c0 = cross(e[1], e[2]);
                let c1 = cross(e[2], e[0]);
                let c2 = cross(e[0], e[1]);
                let det = dot(e[0], c0);
                let scale = e.iter().flatten().map(|v| v.abs()).sum::<f64>().powi(3);
                if !(det > 1e-14 * scale) {
                    return Err(Error::DegenerateElement { element: k, measure: det / 6.0 });
                }
                volumes[k] = det / 6.0;
                for m in 0..3 {
                    let g = [c0[m] / det, c1[m] / det, c2[m] / det];
                    dphi[m][k * 4 + 1] = g[0];
                    dphi[m][k * 4 + 2] = g[1];
                    dphi[m][k * 4 + 3] = g[2];
                    dphi[m][k * 4] = -(g[0] + g[1] + g[2]);
                }
            }
            _ => return Err(Error::InvalidArgument(format!("dimension {dim} not supported"))),
        }
    }
    Ok((volumes, dphi))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Kuhn-subdivided bar `(0,lx) × (−ly/2,ly/2) × (−lz/2,lz/2)`.
///
/// Level 1 has `80 × 2 × 2` cubes; every level halves the mesh size.
pub fn generate_bar_mesh_3d(lx: f64, ly: f64, lz: f64, level: usize) -> Result<Mesh> {
    if !(lx > 0.0 && ly > 0.0 && lz > 0.0) {
        return Err(Error::InvalidArgument("bar dimensions must be positive".into()));
    }
    if level < 1 {
        return Err(Error::InvalidArgument("bar level must be at least 1".into()));
    }
    let r = 1usize << (level - 1);
    let (nx, ny, nz) = (80 * r, 2 * r, 2 * r);
    let mut coords = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1) * 3);
    for iz in 0..=nz {
        for iy in 0..=ny {
            for ix in 0..=nx {
                coords.push(lx * ix as f64 / nx as f64);
                coords.push(-ly / 2.0 + ly * iy as f64 / ny as f64);
                coords.push(-lz / 2.0 + lz * iz as f64 / nz as f64);
            }
        }
    }
    let id = |ix: usize, iy: usize, iz: usize| ix + (nx + 1) * (iy + (ny + 1) * iz);
    // each permutation of axis steps walks from (0,0,0) to (1,1,1); odd
    // permutations come out negatively oriented and get their last two nodes swapped
    const PERMS: [([usize; 3], bool); 6] = [
        ([0, 1, 2], false),
        ([0, 2, 1], true),
        ([1, 0, 2], true),
        ([1, 2, 0], false),
        ([2, 0, 1], false),
        ([2, 1, 0], true),
    ];
    let mut elems = Vec::with_capacity(nx * ny * nz * 24);
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                for (perm, odd) in PERMS {
                    let mut c = [ix, iy, iz];
                    let mut tet = [id(ix, iy, iz), 0, 0, 0];
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = id(c[0], c[1], c[2]);
                    }
                    if odd {
                        tet.swap(2, 3);
                    }
                    elems.extend_from_slice(&tet);
                }
            }
        }
    }
    Mesh::from_arrays(3, level, coords, elems)
}

/// Structured triangulation of `(−1,1)² \ [0,1]×[−1,0]` with `h = 2^{−(level+1)}`.
///
/// Squares are split along their lower-left to upper-right diagonal.
pub fn generate_lshape_mesh_2d(level: usize) -> Result<Mesh> {
    let n = 4usize << level;
    let h = 2.0 / n as f64;
    let half = n / 2;
    // grid node (i, j) is removed when it lies strictly inside the cut quadrant
    let removed = |i: usize, j: usize| i > half && j < half;
    let mut ids = vec![usize::MAX; (n + 1) * (n + 1)];
    let mut coords = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            if !removed(i, j) {
                ids[i + (n + 1) * j] = coords.len() / 2;
                coords.push(-1.0 + h * i as f64);
                coords.push(-1.0 + h * j as f64);
            }
        }
    }
    let id = |i: usize, j: usize| ids[i + (n + 1) * j];
    let mut elems = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if i >= half && j < half {
                continue;
            }
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elems.extend_from_slice(&[a, b, c, a, c, d]);
        }
    }
    Mesh::from_arrays(2, level, coords, elems)
}

/// Grid cells per side of the perforated-square mesh at `level`.
pub fn hole_mesh_cells(level: usize) -> usize {
    12usize << (level.saturating_sub(1))
}

/// Triangulation of `(0,2)²` minus the open disk of `radius` around `(1,1)`.
///
/// A structured grid of [`hole_mesh_cells`] squares per side is cut by the
/// disk: nodes close to the circle are snapped onto it, triangles with a
/// vertex or centroid inside the disk are dropped and the remaining cavity
/// nodes are projected radially onto the circle.
pub fn generate_square_with_hole_mesh_2d(level: usize, radius: f64) -> Result<Mesh> {
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::InvalidArgument(format!("radius {radius} outside (0,1)")));
    }
    if level < 1 {
        return Err(Error::InvalidArgument("hole mesh level must be at least 1".into()));
    }
    let n = hole_mesh_cells(level);
    let h = 2.0 / n as f64;
    let (cx, cy) = (1.0, 1.0);
    let mut xy: Vec<[f64; 2]> = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            xy.push([h * i as f64, h * j as f64]);
        }
    }
    let dist = |p: [f64; 2]| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();
    let project = |p: [f64; 2]| {
        let d = dist(p);
        [cx + (p[0] - cx) * radius / d, cy + (p[1] - cy) * radius / d]
    };
    let tol = 1e-12 * radius;
    for p in xy.iter_mut() {
        let d = dist(*p);
        if d > 0.0 && (d - radius).abs() <= 0.35 * h {
            *p = project(*p);
        }
    }
    let mut tris: Vec<[usize; 3]> = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let a = i + (n + 1) * j;
            let (b, c, d) = (a + 1, a + n + 2, a + n + 1);
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    loop {
        let inside = |p: [f64; 2]| dist(p) < radius - tol;
        tris.retain(|t| {
            let g = [
                (xy[t[0]][0] + xy[t[1]][0] + xy[t[2]][0]) / 3.0,
                (xy[t[0]][1] + xy[t[1]][1] + xy[t[2]][1]) / 3.0,
            ];
            !(t.iter().any(|&v| inside(xy[v])) || inside(g))
        });
        // cavity nodes: boundary nodes of the kept triangles that are not on the square
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(tris.len() * 3);
        for t in &tris {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        let mut moved = false;
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j] == edges[i] {
                j += 1;
            }
            if j - i == 1 {
                for v in [edges[i].0, edges[i].1] {
                    let p = xy[v];
                    let on_square = p.iter().any(|&c| c.abs() < tol || (c - 2.0).abs() < tol);
                    if !on_square && dist(p) > radius + tol {
                        xy[v] = project(p);
                        moved = true;
                    }
                }
            }
            i = j;
        }
        if !moved {
            break;
        }
    }
    let mut ids = vec![usize::MAX; xy.len()];
    for t in &tris {
        for &v in t {
            ids[v] = 0;
        }
    }
    let mut coords = Vec::new();
    for (v, id) in ids.iter_mut().enumerate() {
        if *id == 0 {
            *id = coords.len() / 2;
            coords.extend_from_slice(&xy[v]);
        }
    }
    let elems: Vec<usize> = tris.iter().flat_map(|t| t.map(|v| ids[v])).collect();
    Mesh::from_arrays(2, level, coords, elems)
}

/// Boundary of the L-shape produced by [`generate_lshape_mesh_2d`].
pub fn lshape_boundary(x: &[f64]) -> bool {
    const TOL: f64 = 1e-12;
    let (a, b) = (x[0], x[1]);
    (a.abs() - 1.0).abs() < TOL
        || (b.abs() - 1.0).abs() < TOL
        || (a.abs() < TOL && b <= TOL)
        || (b.abs() < TOL && a >= -TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_triangle() -> Mesh {
        Mesh::from_arrays(2, 0, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0], vec![0, 1, 2]).unwrap()
    }

    #[test]
    fn reference_triangle_gradients() {
        let m = reference_triangle();
        assert_eq!(m.volumes, vec![0.5]);
        assert_eq!(m.dphi[0], vec![-1.0, 1.0, 0.0]);
        assert_eq!(m.dphi[1], vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn reference_tetrahedron_gradients() {
        let coords = vec![0., 0., 0., 1., 0., 0., 0., 1., 0., 0., 0., 1.];
        let m = Mesh::from_arrays(3, 0, coords, vec![0, 1, 2, 3]).unwrap();
        assert!((m.volumes[0] - 1.0 / 6.0).abs() < 1e-15);
        for d in &m.dphi {
            assert_eq!(d[0], -1.0);
        }
    }

    #[test]
    fn degenerate_and_inverted_elements_are_rejected() {
        let flat = Mesh::from_arrays(2, 0, vec![0., 0., 1., 0., 2., 0.], vec![0, 1, 2]);
        assert!(matches!(flat, Err(Error::DegenerateElement { element: 0, .. })));
        let inverted = Mesh::from_arrays(2, 0, vec![0., 0., 1., 0., 0., 1.], vec![0, 2, 1]);
        assert!(matches!(inverted, Err(Error::DegenerateElement { .. })));
    }

    #[test]
    fn bar_counts_and_volume() {
        let m = generate_bar_mesh_3d(0.4, 0.01, 0.01, 1).unwrap();
        assert_eq!((m.nn(), m.ne()), (729, 1920));
        assert!((m.total_measure() - 4e-5).abs() < 1e-12 * 4e-5);
        let m2 = generate_bar_mesh_3d(0.4, 0.01, 0.01, 2).unwrap();
        assert_eq!((m2.nn(), m2.ne()), (4025, 15360));
        assert_eq!(m2.ne(), 8 * m.ne());
    }

    #[test]
    fn bar_rejects_bad_input() {
        assert!(generate_bar_mesh_3d(0.0, 1.0, 1.0, 1).is_err());
        assert!(generate_bar_mesh_3d(1.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn lshape_counts() {
        let m0 = generate_lshape_mesh_2d(0).unwrap();
        assert_eq!((m0.ne(), m0.nn()), (24, 21));
        for level in 0..4 {
            let m = generate_lshape_mesh_2d(level).unwrap();
            assert!((m.total_measure() - 3.0).abs() < 1e-12 * 3.0);
            if level > 0 {
                let coarse = generate_lshape_mesh_2d(level - 1).unwrap();
                assert_eq!(m.ne(), 4 * coarse.ne());
            }
        }
    }

    #[test]
    fn lshape_full_boundary_free_dofs() {
        let m = generate_lshape_mesh_2d(1).unwrap();
        let everything = DirichletSpec::new().zero_region("all", |_| true, 1);
        assert!(m.clone().with_dirichlet(&everything, 1).is_err());
        let spec = DirichletSpec::new().zero_region("boundary", lshape_boundary, 1);
        let m = m.with_dirichlet(&spec, 1).unwrap();
        assert_eq!(m.partition.dofs_minim.len(), 33);
        assert_eq!(m.partition.nodes_dirichlet.len(), 32);
    }

    #[test]
    fn bar_dirichlet_partition() {
        let m = generate_bar_mesh_3d(0.4, 0.01, 0.01, 1).unwrap();
        let spec = DirichletSpec::new()
            .identity_region("left", |x| x[0] < 1e-12, 3)
            .identity_region("right", |x| x[0] > 0.4 - 1e-12, 3);
        let m = m.with_dirichlet(&spec, 3).unwrap();
        let p = &m.partition;
        assert_eq!(p.nodes_dirichlet.len(), 18);
        assert_eq!(p.nodes_minim.len(), 711);
        assert_eq!(p.dofs_dirichlet.len(), 54);
        assert_eq!(p.dofs_minim.len(), 2133);
    }

    #[test]
    fn empty_spec_leaves_everything_free() {
        let m = generate_lshape_mesh_2d(0)
            .unwrap()
            .with_dirichlet(&DirichletSpec::new(), 2)
            .unwrap();
        assert_eq!(m.partition.dofs_minim.len(), 42);
        assert!(m.partition.nodes_dirichlet.is_empty());
    }

    #[test]
    fn partially_fixed_node_stays_free() {
        let m = reference_triangle();
        let spec = DirichletSpec::new().region("corner", |x| x == [0.0, 0.0], &[1], |_, _| vec![0.0, 0.0]);
        let m = m.with_dirichlet(&spec, 2).unwrap();
        assert_eq!(m.partition.nodes_minim, vec![0, 1, 2]);
        assert_eq!(m.partition.dofs_dirichlet, vec![1]);
        assert_eq!(m.partition.dofs_minim, vec![0, 2, 3, 4, 5]);
    }

    #[test]
    fn hole_mesh_is_valid() {
        let r = 1.0 / 3.0;
        for level in 1..=3 {
            let m = generate_square_with_hole_mesh_2d(level, r).unwrap();
            assert!(m.volumes.iter().all(|&v| v > 0.0));
            for i in 0..m.nn() {
                let c = m.coord(i);
                let d = ((c[0] - 1.0).powi(2) + (c[1] - 1.0).powi(2)).sqrt();
                assert!(d >= r * (1.0 - 1e-12), "node {i} inside the disk");
            }
        }
        assert!(generate_square_with_hole_mesh_2d(1, 1.0).is_err());
        assert!(generate_square_with_hole_mesh_2d(1, 0.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = generate_lshape_mesh_2d(1).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.nodes2coord, m.nodes2coord);
        assert_eq!(back.elems2nodes, m.elems2nodes);
        assert!(Mesh::read_text(std::io::Cursor::new("2 1 1\n0 0\n1 2 3\n")).is_err());
    }
}
