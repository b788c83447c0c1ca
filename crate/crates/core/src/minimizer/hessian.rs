//! Hessian sparsity over free dofs, distance-2 coloring and colored
//! finite-difference Hessians.

use super::Objective;
use crate::error::Result;
use crate::mesh::Mesh;
use crate::sparse::CsrMatrix;

/// Symmetric pattern over the free dofs, rows sorted, diagonal included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl SparsityPattern {
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    pub fn to_matrix(&self) -> CsrMatrix {
        CsrMatrix::from_pattern(self.n, self.row_ptr.clone(), self.col_idx.clone())
    }
}

/// Dofs `(i, j)` and `(i', j')` couple iff nodes `i` and `i'` share an element.
pub fn hessian_sparsity(mesh: &Mesh, d: usize) -> SparsityPattern {
    let (ptr, adj) = mesh.node_adjacency();
    let dofs = &mesh.partition.dofs_minim;
    let mut free_index = vec![usize::MAX; mesh.nn() * d];
    for (k, &n) in dofs.iter().enumerate() {
        free_index[n] = k;
    }
    let mut row_ptr = Vec::with_capacity(dofs.len() + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    for &n in dofs {
        let node = n / d;
        // adjacency is sorted by node, so the expanded columns come out sorted
        for &other in &adj[ptr[node]..ptr[node + 1]] {
            for c in 0..d {
                let k = free_index[other * d + c];
                if k != usize::MAX {
                    col_idx.push(k);
                }
            }
        }
        row_ptr.push(col_idx.len());
    }
    SparsityPattern { n: dofs.len(), row_ptr, col_idx }
}

/// Greedy distance-2 coloring: columns of one color never share a row.
pub fn distance2_coloring(pattern: &SparsityPattern) -> Vec<usize> {
    let n = pattern.n;
    let mut color = vec![usize::MAX; n];
    let mut mark: Vec<usize> = Vec::new();
    for v in 0..n {
        for &u in pattern.row(v) {
            for &w in pattern.row(u) {
                let c = color[w];
                if c != usize::MAX {
                    if c >= mark.len() {
                        mark.resize(c + 1, usize::MAX);
                    }
                    mark[c] = v;
                }
            }
        }
        let c = (0..).find(|&c| c >= mark.len() || mark[c] != v).unwrap();
        color[v] = c;
    }
    color
}

/// Number of colors used by `coloring`.
pub fn color_count(coloring: &[usize]) -> usize {
    coloring.iter().max().map_or(0, |&c| c + 1)
}

/// Hessian by central differences of the gradient along one direction per
/// color, symmetrized.
pub fn colored_hessian<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    pattern: &SparsityPattern,
    coloring: &[usize],
    step: f64,
) -> Result<CsrMatrix> {
    let n = pattern.n;
    let ncolors = color_count(coloring);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncolors];
    for (v, &c) in coloring.iter().enumerate() {
        members[c].push(v);
    }
    let mut h = pattern.to_matrix();
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for cols in &members {
        for &j in cols {
            xp[j] = x[j] + step;
            xm[j] = x[j] - step;
        }
        let gp = obj.gradient(&xp)?;
        let gm = obj.gradient(&xm)?;
        for &j in cols {
            xp[j] = x[j];
            xm[j] = x[j];
            for &i in pattern.row(j) {
                let p = h.find(i, j).expect("symmetric pattern");
                h.values[p] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
    }
    let mut sym = h.clone();
    for i in 0..n {
        for p in h.row_ptr[i]..h.row_ptr[i + 1] {
            let j = h.col_idx[p];
            sym.values[p] = 0.5 * (h.values[p] + h.get(j, i));
        }
    }
    Ok(sym)
}
