//! The multiscale engine: constrained patch corrector solves, corrected
//! basis construction, upscaled coarse systems, the localized Galerkin
//! solve, and decay diagnostics.
//!
//! Every coarse element T owns one patch problem per patch size k: the
//! fine stiffness restricted to dofs supported inside the k-layer element
//! neighborhood, constrained to the interpolation kernel. The problem is
//! factored once and solved for the (up to three) coarse basis functions
//! with support on T. Patch jobs are independent and run in parallel;
//! their results are merged in element order, so outputs are bitwise
//! reproducible regardless of thread count.

use crate::assembly::{apply_restricted_stiffness, AssembledForms};
use crate::exec;
use crate::field::{GridField, InterfaceData};
use crate::interp::{InterpolationOperator, Variant};
use crate::linalg::dense::{cholesky_factor, cholesky_solve, DenseMatrix};
use crate::linalg::{
    energy_norm, factor_saddle, solve_spd, spmv, DenseVector, SparseMatrix, SparseVec,
};
use crate::mesh::{neighborhood, patch_layers, FractureTrace, MeshHierarchy, TriMesh};
use crate::{Error, Result};

/// Shared data for corrector computation between two hierarchy levels.
pub struct LodContext<'a> {
    pub hier: &'a MeshHierarchy,
    pub coarse_level: usize,
    pub fine_level: usize,
    /// Forms assembled on the fine level.
    pub forms: &'a AssembledForms,
    pub interp: &'a InterpolationOperator,
    pub field: &'a GridField,
    pub fine_iface: Option<(&'a FractureTrace, &'a InterfaceData)>,
    pub coarse_trace: Option<&'a FractureTrace>,
    /// Fine free dof -> interpolation rows with a nonzero entry there.
    col_rows: Vec<Vec<usize>>,
    /// Coarse element -> fine trace segments (fine tri, segment index)
    /// whose arclength piece it owns.
    owned_segments: Vec<Vec<(usize, usize)>>,
}

impl<'a> LodContext<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        hier: &'a MeshHierarchy,
        coarse_level: usize,
        fine_level: usize,
        forms: &'a AssembledForms,
        interp: &'a InterpolationOperator,
        field: &'a GridField,
        fine_iface: Option<(&'a FractureTrace, &'a InterfaceData)>,
        coarse_trace: Option<&'a FractureTrace>,
    ) -> Result<Self> {
        let n_fine = interp.fine_dofs.num_free();
        let mut col_rows = vec![Vec::new(); n_fine];
        for row in 0..interp.matrix.nrows() {
            let (cols, _) = interp.matrix.row(row);
            for &c in cols {
                col_rows[c].push(row);
            }
        }
        let n_coarse_elems = hier.level(coarse_level).num_triangles();
        let mut owned_segments = vec![Vec::new(); n_coarse_elems];
        if let (Some((fine_trace, _)), Some(coarse_trace)) = (fine_iface, coarse_trace) {
            let fine = hier.level(fine_level);
            for tf in 0..fine.num_triangles() {
                for (si, seg) in fine_trace.segments(tf).iter().enumerate() {
                    let mid = 0.5 * (seg.arc_start + seg.arc_end);
                    let owner = coarse_trace.owner_at(seg.polyline, mid).ok_or_else(|| {
                        Error::InvalidParameter(
                            "fine trace piece not covered by the coarse trace".into(),
                        )
                    })?;
                    owned_segments[owner].push((tf, si));
                }
            }
        }
        Ok(Self {
            hier,
            coarse_level,
            fine_level,
            forms,
            interp,
            field,
            fine_iface,
            coarse_trace,
            col_rows,
            owned_segments,
        })
    }

    fn coarse(&self) -> &TriMesh {
        self.hier.level(self.coarse_level)
    }

    fn fine(&self) -> &TriMesh {
        self.hier.level(self.fine_level)
    }

    fn descendants(&self, tc: usize) -> std::ops::Range<usize> {
        self.hier
            .elem_descendants(self.coarse_level, self.fine_level, tc)
    }

    /// Right-hand side a_T(lambda_node, .) on all fine free dofs: bulk
    /// integration over the descendants of T, interface integration over
    /// the trace pieces owned by T.
    fn element_rhs(&self, tc: usize, node: usize) -> Result<DenseVector> {
        let fine = self.fine();
        // lambda_node is linear on T: its fine vertex values inside T are
        // the barycentric coordinates.
        let coarse_tri = self.coarse().tri_vertices(tc);
        let local = self
            .coarse()
            .triangle(tc)
            .iter()
            .position(|&v| v == node)
            .expect("node must belong to the element");
        let mut x_vertex = vec![0.0; fine.num_vertices()];
        let mut touched = Vec::new();
        for tf in self.descendants(tc) {
            for &v in &fine.triangle(tf) {
                if x_vertex[v] == 0.0 {
                    let bary = crate::mesh::barycentric(fine.vertex(v), coarse_tri);
                    x_vertex[v] = bary[local];
                    touched.push(v);
                }
            }
        }
        let mut rhs = DenseVector::zeros(self.forms.dofs.num_free());
        apply_restricted_stiffness(
            fine,
            &self.forms.dofs,
            self.field,
            None,
            self.descendants(tc),
            &x_vertex,
            &mut rhs,
        )?;
        // Interface part over owned pieces only.
        if let Some((fine_trace, iface)) = self.fine_iface {
            for &(tf, si) in &self.owned_segments[tc] {
                let seg = &fine_trace.segments(tf)[si];
                let verts = fine.triangle(tf);
                let tri = fine.tri_vertices(tf);
                let grads = crate::mesh::p1_gradients(tri);
                let len = seg.length();
                let tangent = seg.end.sub(seg.start).scale(1.0 / len);
                let conductivity = iface.polyline(seg.polyline).conductivity;
                let g: Vec<f64> = grads.iter().map(|gr| gr.dot(tangent)).collect();
                for i in 0..3 {
                    let Some(d) = self.forms.dofs.free_of_vertex(verts[i]) else {
                        continue;
                    };
                    let mut acc = 0.0;
                    for j in 0..3 {
                        acc += conductivity * len * g[i] * g[j] * x_vertex[verts[j]];
                    }
                    rhs[d] += acc;
                }
            }
        }
        let _ = touched;
        Ok(rhs)
    }

    /// Patch problem for coarse element tc: fine dofs interior to the
    /// k-layer neighborhood, restricted stiffness, and the interpolation
    /// rows active on those dofs (zero rows dropped).
    fn patch_problem(&self, tc: usize, k: usize) -> PatchProblem {
        let coarse = self.coarse();
        let fine = self.fine();
        let elems = neighborhood(coarse, &[tc], k);
        let mut in_patch = vec![false; fine.num_triangles()];
        for &e in &elems {
            for tf in self.descendants(e) {
                in_patch[tf] = true;
            }
        }
        // Free fine vertices whose whole hat support lies in the patch.
        let mut dofs = Vec::new();
        let mut seen = vec![false; fine.num_vertices()];
        for &e in &elems {
            for tf in self.descendants(e) {
                for &v in &fine.triangle(tf) {
                    if seen[v] {
                        continue;
                    }
                    seen[v] = true;
                    let Some(d) = self.forms.dofs.free_of_vertex(v) else {
                        continue;
                    };
                    if fine.tris_of_vertex(v).iter().all(|&t| in_patch[t]) {
                        dofs.push(d);
                    }
                }
            }
        }
        dofs.sort_unstable();
        // Constraint rows with support on the patch dofs.
        let mut rows: Vec<usize> = dofs
            .iter()
            .flat_map(|&d| self.col_rows[d].iter().copied())
            .collect();
        rows.sort_unstable();
        rows.dedup();
        let mut local_of = vec![usize::MAX; self.forms.dofs.num_free()];
        for (l, &d) in dofs.iter().enumerate() {
            local_of[d] = l;
        }
        let mut triplets = Vec::new();
        let mut kept_rows = Vec::new();
        for &r in &rows {
            let (cols, vals) = self.interp.matrix.row(r);
            let mut local_entries = Vec::new();
            let mut norm_sq = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                if local_of[c] != usize::MAX {
                    local_entries.push((local_of[c], v));
                    norm_sq += v * v;
                }
            }
            if norm_sq.sqrt() >= 1e-14 {
                let row_idx = kept_rows.len();
                kept_rows.push(r);
                for (c, v) in local_entries {
                    triplets.push((row_idx, c, v));
                }
            }
        }
        let constraints = SparseMatrix::from_triplets(kept_rows.len(), dofs.len(), &triplets)
            .expect("constraint triplets are in range");
        let stiffness = self.forms.stiffness.principal_submatrix(&dofs);
        PatchProblem {
            element: tc,
            k,
            dofs,
            stiffness,
            constraints,
        }
    }
}

/// Localized corrector problem on one element patch.
pub struct PatchProblem {
    pub element: usize,
    pub k: usize,
    /// Global fine free dofs of the patch interior, sorted.
    pub dofs: Vec<usize>,
    pub stiffness: SparseMatrix,
    pub constraints: SparseMatrix,
}

impl PatchProblem {
    /// Factors once and solves the corrector for each requested coarse
    /// node of the element; returns (node, solution on patch dofs).
    fn solve_for_nodes(&self, ctx: &LodContext, nodes: &[usize]) -> Result<Vec<(usize, Vec<f64>)>> {
        if self.dofs.is_empty() {
            return Ok(nodes.iter().map(|&n| (n, Vec::new())).collect());
        }
        let context = format!("patch element {} (k = {})", self.element, self.k);
        let factor =
            factor_saddle(&self.stiffness, &self.constraints, &context).map_err(|e| match e {
                Error::Singular { .. } | Error::NotSpd { .. } => Error::SingularPatch {
                    element: self.element,
                    node: nodes.first().copied().unwrap_or(0),
                    k: self.k,
                },
                other => other,
            })?;
        let zero_dual = DenseVector::zeros(self.constraints.nrows());
        let mut out = Vec::with_capacity(nodes.len());
        for &node in nodes {
            let rhs_full = ctx.element_rhs(self.element, node)?;
            let rhs = DenseVector::from_vec(self.dofs.iter().map(|&d| rhs_full[d]).collect());
            let (w, _mu) = factor
                .solve(&rhs, &zero_dual, &context)
                .map_err(|e| match e {
                    Error::Singular { .. } => Error::SingularPatch {
                        element: self.element,
                        node,
                        k: self.k,
                    },
                    other => other,
                })?;
            out.push((node, w.as_slice().to_vec()));
        }
        Ok(out)
    }
}

/// Corrector of a single (element, coarse node) pair, as a vector over
/// the fine free dofs.
pub fn element_corrector(
    ctx: &LodContext,
    tc: usize,
    node: usize,
    k: usize,
) -> Result<DenseVector> {
    if !ctx.coarse().triangle(tc).contains(&node) {
        return Err(Error::InvalidParameter(format!(
            "node {node} is not a vertex of element {tc}"
        )));
    }
    let problem = ctx.patch_problem(tc, k);
    let solved = problem.solve_for_nodes(ctx, &[node])?;
    let mut out = DenseVector::zeros(ctx.forms.dofs.num_free());
    for (d, v) in problem.dofs.iter().zip(&solved[0].1) {
        out[*d] = *v;
    }
    Ok(out)
}

/// Corrected multiscale basis: per free coarse node i, the fine-space
/// vector of lambda_i - Q_k lambda_i.
pub struct CorrectedBasis {
    pub k: usize,
    pub sigma: f64,
    pub variant: Variant,
    /// One sparse fine-dof vector per free coarse node.
    pub vectors: Vec<SparseVec>,
    /// Coarse-element support of each basis vector (k-neighborhood of the
    /// node support), sorted.
    pub supports: Vec<Vec<usize>>,
    pub fine_free: usize,
}

/// Computes the corrected basis with patch jobs running through the
/// default executor (rayon under the `parallel` feature).
pub fn corrected_basis(ctx: &LodContext, k: usize) -> Result<CorrectedBasis> {
    corrected_basis_impl(ctx, k, false)
}

/// Sequential variant: identical output, no thread pool.
pub fn corrected_basis_seq(ctx: &LodContext, k: usize) -> Result<CorrectedBasis> {
    corrected_basis_impl(ctx, k, true)
}

fn corrected_basis_impl(ctx: &LodContext, k: usize, force_seq: bool) -> Result<CorrectedBasis> {
    let coarse = ctx.coarse();
    let coarse_dofs = &ctx.interp.coarse_dofs;
    let elements: Vec<usize> = (0..coarse.num_triangles()).collect();
    type PatchResult = Result<(usize, Vec<usize>, Vec<(usize, Vec<f64>)>)>;
    let job = |&tc: &usize| -> PatchResult {
        let nodes: Vec<usize> = coarse
            .triangle(tc)
            .iter()
            .copied()
            .filter(|&v| coarse_dofs.free_of_vertex(v).is_some())
            .collect();
        if nodes.is_empty() {
            return Ok((tc, Vec::new(), Vec::new()));
        }
        let problem = ctx.patch_problem(tc, k);
        let solved = problem.solve_for_nodes(ctx, &nodes)?;
        Ok((tc, problem.dofs, solved))
    };
    let results = if force_seq {
        exec::run_jobs_seq(&elements, job)
    } else {
        exec::run_jobs(&elements, job)
    };

    // Merge in element order: per-node pair lists, hat first.
    let n_coarse = coarse_dofs.num_free();
    let mut pairs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_coarse];
    // Prolongation columns (the uncorrected hats).
    for df in 0..ctx.interp.prolongation.nrows() {
        let (cols, vals) = ctx.interp.prolongation.row(df);
        for (&c, &v) in cols.iter().zip(vals) {
            pairs[c].push((df, v));
        }
    }
    for result in results {
        let (_tc, dofs, solved) = result?;
        for (node, w) in solved {
            let i = coarse_dofs.free_of_vertex(node).expect("free node");
            for (d, v) in dofs.iter().zip(&w) {
                if *v != 0.0 {
                    pairs[i].push((*d, -*v));
                }
            }
        }
    }
    let vectors: Vec<SparseVec> = pairs.into_iter().map(SparseVec::from_pairs).collect();
    let supports: Vec<Vec<usize>> = (0..n_coarse)
        .map(|i| {
            let v = coarse_dofs.vertex_of_free(i);
            neighborhood(coarse, coarse.tris_of_vertex(v), k)
        })
        .collect();
    Ok(CorrectedBasis {
        k,
        sigma: ctx.interp.sigma,
        variant: ctx.interp.variant,
        vectors,
        supports,
        fine_free: ctx.forms.dofs.num_free(),
    })
}

/// Upscaled coarse operators in the corrected basis.
pub struct CoarseSystem {
    pub stiffness: CoarseMatrix,
    pub load: DenseVector,
    pub mass: Option<CoarseMatrix>,
}

pub enum CoarseMatrix {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

impl CoarseMatrix {
    pub fn n(&self) -> usize {
        match self {
            CoarseMatrix::Dense(m) => m.nrows(),
            CoarseMatrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn mul_vec(&self, x: &DenseVector) -> Result<DenseVector> {
        match self {
            CoarseMatrix::Dense(m) => Ok(DenseVector::from_vec(m.mul_vec(x.as_slice()))),
            CoarseMatrix::Sparse(m) => spmv(m, x),
        }
    }

    /// CSR copy (dense systems included) for solvers that want sparse.
    pub fn to_sparse(&self) -> SparseMatrix {
        match self {
            CoarseMatrix::Sparse(m) => m.clone(),
            CoarseMatrix::Dense(m) => {
                let mut triplets = Vec::new();
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        let v = m[(i, j)];
                        if v != 0.0 {
                            triplets.push((i, j, v));
                        }
                    }
                }
                SparseMatrix::from_triplets(m.nrows(), m.ncols(), &triplets)
                    .expect("dense conversion")
            }
        }
    }
}

/// Threshold below which the coarse system is stored densely.
const DENSE_COARSE_LIMIT: usize = 4000;

/// Galerkin projection of the fine operators onto the corrected basis:
/// stiffness a(b_i, b_j), load F(b_i), and optionally the mass form.
pub fn assemble_coarse_system(
    ctx: &LodContext,
    basis: &CorrectedBasis,
    with_mass: bool,
) -> Result<CoarseSystem> {
    let n = basis.vectors.len();
    let load = DenseVector::from_vec(
        basis
            .vectors
            .iter()
            .map(|b| b.dot_dense(ctx.forms.load.as_slice()))
            .collect(),
    );
    let stiffness = project_matrix(&ctx.forms.stiffness, basis, n)?;
    let mass = if with_mass {
        let m = ctx.forms.mass.as_ref().ok_or_else(|| {
            Error::InvalidParameter("coarse mass requested but fine mass not assembled".into())
        })?;
        Some(project_matrix(m, basis, n)?)
    } else {
        None
    };
    Ok(CoarseSystem {
        stiffness,
        load,
        mass,
    })
}

fn project_matrix(
    fine_matrix: &SparseMatrix,
    basis: &CorrectedBasis,
    n: usize,
) -> Result<CoarseMatrix> {
    // Inverted index: fine dof -> basis vectors supported there.
    let mut dof_nodes: Vec<Vec<u32>> = vec![Vec::new(); basis.fine_free];
    for (i, b) in basis.vectors.iter().enumerate() {
        for &d in &b.indices {
            dof_nodes[d].push(i as u32);
        }
    }
    let jobs: Vec<usize> = (0..n).collect();
    let rows = exec::run_jobs(&jobs, |&i| {
        let bi = &basis.vectors[i];
        // y = A b_i on a dense scratch.
        let mut scratch = vec![0.0; basis.fine_free];
        let mut touched = Vec::new();
        for (&d, &v) in bi.indices.iter().zip(&bi.values) {
            let (cols, vals) = fine_matrix.row(d);
            for (&c, &av) in cols.iter().zip(vals) {
                if scratch[c] == 0.0 {
                    touched.push(c);
                }
                scratch[c] += v * av;
            }
        }
        // Candidate partners share a fine dof with y.
        let mut candidates: Vec<u32> = touched
            .iter()
            .flat_map(|&d| dof_nodes[d].iter().copied())
            .filter(|&j| j as usize >= i)
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        let mut entries = Vec::with_capacity(candidates.len());
        for j in candidates {
            let bj = &basis.vectors[j as usize];
            let s = bj.dot_dense(&scratch);
            if s != 0.0 {
                entries.push((j as usize, s));
            }
        }
        entries
    });
    if n <= DENSE_COARSE_LIMIT {
        let mut m = DenseMatrix::zeros(n, n);
        for (i, entries) in rows.into_iter().enumerate() {
            for (j, s) in entries {
                m[(i, j)] = s;
                m[(j, i)] = s;
            }
        }
        Ok(CoarseMatrix::Dense(m))
    } else {
        let mut triplets = Vec::new();
        for (i, entries) in rows.into_iter().enumerate() {
            for (j, s) in entries {
                triplets.push((i, j, s));
                if j != i {
                    triplets.push((j, i, s));
                }
            }
        }
        Ok(CoarseMatrix::Sparse(SparseMatrix::from_triplets(
            n, n, &triplets,
        )?))
    }
}

/// Solution of the upscaled problem.
pub struct LodSolution {
    /// Coefficients in the corrected basis.
    pub coeffs: DenseVector,
    /// Fine-space representation sum_i c_i b_i.
    pub fine: DenseVector,
}

/// Solves a coarse SPD system.
pub fn solve_coarse(matrix: &CoarseMatrix, rhs: &DenseVector) -> Result<DenseVector> {
    match matrix {
        CoarseMatrix::Dense(m) => {
            let l = cholesky_factor(m)?;
            Ok(DenseVector::from_vec(cholesky_solve(&l, rhs.as_slice())))
        }
        CoarseMatrix::Sparse(m) => solve_spd(m, rhs),
    }
}

/// Galerkin solve in the corrected basis plus fine-space reconstruction.
pub fn lod_solve(ctx: &LodContext, basis: &CorrectedBasis) -> Result<LodSolution> {
    let system = assemble_coarse_system(ctx, basis, false)?;
    lod_solve_with(&system, basis)
}

/// Solve against a preassembled coarse system.
pub fn lod_solve_with(system: &CoarseSystem, basis: &CorrectedBasis) -> Result<LodSolution> {
    let coeffs = solve_coarse(&system.stiffness, &system.load)?;
    Ok(LodSolution {
        fine: reconstruct(basis, &coeffs),
        coeffs,
    })
}

/// Fine representation of coarse coefficients, accumulated in node order.
pub fn reconstruct(basis: &CorrectedBasis, coeffs: &DenseVector) -> DenseVector {
    let mut fine = DenseVector::zeros(basis.fine_free);
    for (i, b) in basis.vectors.iter().enumerate() {
        if coeffs[i] != 0.0 {
            b.add_into(coeffs[i], fine.as_mut_slice());
        }
    }
    fine
}

impl CorrectedBasis {
    /// Writes the basis as CSV rows (node index, fine dof, value).
    pub fn write_csv(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "node,fine_dof,value")?;
        for (i, b) in self.vectors.iter().enumerate() {
            for (&d, &v) in b.indices.iter().zip(&b.values) {
                writeln!(out, "{i},{d},{v}")?;
            }
        }
        Ok(())
    }
}

/// Global (non-localized) corrector of the coarse hat at `node`: one
/// whole-domain constrained solve per adjacent element, summed.
pub fn global_corrector_for_node(ctx: &LodContext, node: usize) -> Result<DenseVector> {
    let coarse = ctx.coarse();
    let k_cover = coarse.num_triangles();
    let tris: Vec<usize> = coarse.tris_of_vertex(node).to_vec();
    let problem = ctx.patch_problem(tris[0], k_cover);
    let mut out = DenseVector::zeros(ctx.forms.dofs.num_free());
    for &tc in &tris {
        // Same patch (whole mesh) for every adjacent element; rebuild the
        // rhs per element but reuse the factorization through one
        // PatchProblem by pointing its element at tc.
        let shifted = PatchProblem {
            element: tc,
            k: k_cover,
            dofs: problem.dofs.clone(),
            stiffness: problem.stiffness.clone(),
            constraints: problem.constraints.clone(),
        };
        let solved = shifted.solve_for_nodes(ctx, &[node])?;
        for (d, v) in shifted.dofs.iter().zip(&solved[0].1) {
            out[*d] += *v;
        }
    }
    Ok(out)
}

/// Ring decay profile: entry m holds the energy norm (and sup norm) of v
/// restricted to the dofs first reached at patch layer m around the
/// center coarse element.
pub fn decay_profile(
    ctx: &LodContext,
    v: &DenseVector,
    center: usize,
    layers: usize,
) -> Result<Vec<(f64, f64)>> {
    let coarse = ctx.coarse();
    let fine = ctx.fine();
    let elem_layer = patch_layers(coarse, &[center], layers);
    // Fine dof layer: minimum layer over incident fine triangles.
    let mut dof_layer = vec![usize::MAX; ctx.forms.dofs.num_free()];
    for tf in 0..fine.num_triangles() {
        let layer = elem_layer[ctx.hier.elem_ancestor(ctx.fine_level, ctx.coarse_level, tf)];
        for &vert in &fine.triangle(tf) {
            if let Some(d) = ctx.forms.dofs.free_of_vertex(vert) {
                dof_layer[d] = dof_layer[d].min(layer);
            }
        }
    }
    let mut out = Vec::with_capacity(layers + 1);
    for m in 0..=layers {
        let mut ring = DenseVector::zeros(v.len());
        let mut sup = 0.0f64;
        for d in 0..v.len() {
            if dof_layer[d] == m {
                ring[d] = v[d];
                sup = sup.max(v[d].abs());
            }
        }
        out.push((energy_norm(&ctx.forms.stiffness, &ring)?, sup));
    }
    Ok(out)
}
