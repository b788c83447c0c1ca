//! Flat, prefix-indexed concatenation of the nodal patches of all free nodes.
//!
//! Rows `prefix[i]..prefix[i+1]` of every flat array describe the elements
//! adjacent to the `i`-th free node, in ascending element order. The
//! `logical` mask marks, per row, the local position of the patch owner.

use crate::error::{Error, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, PartialEq)]
pub struct Patches {
    pub dim: usize,
    /// Number of field components the patches were built for.
    pub ncomp: usize,
    /// Owner node of each patch (the free nodes, ascending).
    pub nodes: Vec<usize>,
    pub lengths: Vec<usize>,
    /// `p_0 = 0, p_i = lengths[0] + … + lengths[i-1]`, length `|M| + 1`.
    pub prefix: Vec<usize>,
    pub elems: Vec<usize>,
    pub volumes: Vec<f64>,
    pub elems2nodes: Vec<usize>,
    pub dphi: Vec<Vec<f64>>,
    pub logical: Vec<bool>,
    /// For every entry of `mesh.partition.dofs_minim`, its position in the
    /// patch-local interleaved dof numbering `i * ncomp + j`.
    pub dofs_local: Vec<usize>,
}

impl Patches {
    /// Number of free nodes `|M|`.
    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// Total row count `‖T‖`.
    pub fn rows(&self) -> usize {
        self.elems.len()
    }

    pub fn nloc(&self) -> usize {
        self.dim + 1
    }

    /// Local position of the owner node in row `r`.
    pub fn owner_position(&self, r: usize) -> usize {
        let n = self.nloc();
        self.logical[r * n..(r + 1) * n]
            .iter()
            .position(|&b| b)
            .expect("every patch row marks its owner")
    }

    /// Extended prefix indices `indx` for `d` stacked component blocks.
    pub fn prefix_indices(&self, d: usize) -> Vec<usize> {
        patch_prefix_indices(&self.lengths, d)
    }
}

/// Builds the patches of all free nodes of `mesh`.
pub fn build_patches(mesh: &Mesh) -> Result<Patches> {
    let nloc = mesh.nloc();
    let (ptr, node_elems) = mesh.node_elements();
    let free = &mesh.partition.nodes_minim;
    let mut lengths = Vec::with_capacity(free.len());
    let mut prefix = Vec::with_capacity(free.len() + 1);
    prefix.push(0);
    for &i in free {
        let len = ptr[i + 1] - ptr[i];
        if len == 0 {
            return Err(Error::IsolatedNode { node: i });
        }
        lengths.push(len);
        prefix.push(prefix.last().unwrap() + len);
    }
    let rows = *prefix.last().unwrap();
    let mut elems = Vec::with_capacity(rows);
    let mut logical = Vec::with_capacity(rows * nloc);
    for &i in free {
        for &k in &node_elems[ptr[i]..ptr[i + 1]] {
            elems.push(k);
            logical.extend(mesh.elem(k).iter().map(|&node| node == i));
        }
    }
    let volumes = elems.iter().map(|&k| mesh.volumes[k]).collect();
    let elems2nodes = elems.iter().flat_map(|&k| mesh.elem(k).iter().copied()).collect();
    let dphi = mesh
        .dphi
        .iter()
        .map(|dm| {
            elems
                .iter()
                .flat_map(|&k| dm[k * nloc..(k + 1) * nloc].iter().copied())
                .collect()
        })
        .collect();

    let d = mesh.partition.ncomp;
    let mut free_pos = vec![usize::MAX; mesh.nn()];
    for (pos, &i) in free.iter().enumerate() {
        free_pos[i] = pos;
    }
    let dofs_local = mesh
        .partition
        .dofs_minim
        .iter()
        .map(|&n| free_pos[n / d] * d + n % d)
        .collect();

    Ok(Patches {
        dim: mesh.dim,
        ncomp: d,
        nodes: free.clone(),
        lengths,
        prefix,
        elems,
        volumes,
        elems2nodes,
        dphi,
        logical,
        dofs_local,
    })
}

/// Prefix indices `p_1 … p_{d|M|}` of `d` stacked copies of the patch rows.
///
/// Block `b` continues block `b-1`: `p_{n + b|M|} = p_n + b‖T‖`.
pub fn patch_prefix_indices(lengths: &[usize], d: usize) -> Vec<usize> {
    let total: usize = lengths.iter().sum();
    let mut indx = Vec::with_capacity(d * lengths.len());
    for b in 0..d {
        let mut acc = b * total;
        for &len in lengths {
            acc += len;
            indx.push(acc);
        }
    }
    indx
}

/// Sums `values` over the consecutive segments ending at `indx` (exclusive
/// upper bounds, first segment starting at 0), each segment in row order.
pub fn segment_sums(values: &[f64], indx: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(indx.len());
    let mut start = 0;
    for &end in indx {
        out.push(values[start..end].iter().sum());
        start = end;
    }
    out
}

/// Segment sums through a running cumulative sum differenced at `indx`.
///
/// Algebraically equal to [`segment_sums`] but subject to cancellation when
/// the running total grows large; the gradient engines use the direct form.
pub fn segment_sums_cumulative(values: &[f64], indx: &[usize]) -> Vec<f64> {
    let mut csum = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for &v in values {
        acc += v;
        csum.push(acc);
    }
    let at = |p: usize| if p == 0 { 0.0 } else { csum[p - 1] };
    let mut prev = 0.0;
    indx.iter()
        .map(|&p| {
            let c = at(p);
            let s = c - prev;
            prev = c;
            s
        })
        .collect()
}
