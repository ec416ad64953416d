//! Patch reconstruction: element patches, the anchored least-squares fit and
//! the resulting reconstructed space with one unknown per interior element.
//!
//! For an interior element `K` on side `i` the patch grows by whole Moore
//! rings inside `T_h^i` until it holds at least `#S` elements, is sorted by
//! barycenter distance to `x_K` and truncated. A cut element reuses the patch
//! (and therefore the local polynomial) of its anchor `M^i(K)`.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Classification, ElementTag};
use crate::poly::{dim, Jet, ScaledMonomials};
use crate::Point;

/// Relative singular-value threshold below which a patch is rank deficient.
pub const RANK_TOL: f64 = 1e-10;
/// Patch growth per retry after a rank-deficient fit, and the number of retries.
const RETRY_STEP: usize = 5;
const MAX_RETRIES: usize = 3;

/// Default patch size for degree `m` (2D values recommended for the
/// reference examples).
pub fn default_patch_size(m: usize) -> usize {
    match m {
        0..=2 => 12,
        3 => 18,
        4 => 25,
        5 => 32,
        _ => 55,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementPatch {
    pub owner: usize,
    pub side: usize,
    /// `S^i(K)`, nearest first.
    pub elements: Vec<usize>,
    /// Interior elements of the patch in patch order; their barycenters are
    /// the collocation points `I^i(K)`.
    pub collocation: Vec<usize>,
    /// `M^i(K)`.
    pub anchor: usize,
}

/// Grows `S^i(K)` for an interior element `K` by Moore rings within `T_h^i`.
fn grow_patch(cls: &Classification, k: usize, side: usize, size: usize) -> ElementPatch {
    let mesh = cls.mesh();
    let mut members = vec![k];
    let mut seen: HashSet<usize> = HashSet::from([k]);
    let mut frontier = vec![k];
    while members.len() < size && !frontier.is_empty() {
        let mut next = Vec::new();
        for &e in &frontier {
            for nb in mesh.moore_neighbors(e) {
                if cls.has_side(nb, side) && seen.insert(nb) {
                    next.push(nb);
                }
            }
        }
        next.sort_unstable();
        members.extend_from_slice(&next);
        frontier = next;
    }
    let xk = mesh.barycenter(k);
    let mut keyed: Vec<([i64; 3], usize)> = members.iter().map(|&e| (mesh.nearness_key(&xk, e), e)).collect();
    keyed.sort_unstable();
    keyed.truncate(size);
    let elements: Vec<usize> = keyed.into_iter().map(|(_, e)| e).collect();
    let collocation = elements
        .iter()
        .copied()
        .filter(|&e| cls.element_tag(e) == ElementTag::Interior(side))
        .collect();
    ElementPatch {
        owner: k,
        side,
        elements,
        collocation,
        anchor: k,
    }
}

/// Builds `S^i(K)` with threshold `size`. Cut elements inherit the patch of
/// their anchor; `K` itself is appended if the inherited patch misses it
/// (it carries no collocation point, so the fit is unchanged).
pub fn build_patch(cls: &Classification, k: usize, side: usize, size: usize) -> Result<ElementPatch> {
    match cls.element_tag(k) {
        ElementTag::Interior(s) if s == side => Ok(grow_patch(cls, k, side, size)),
        ElementTag::Interior(_) => Err(Error::EmptyRegion { element: k, side }),
        ElementTag::Cut => {
            let m = cls
                .anchor(k, side)
                .expect("classification guarantees anchors of cut elements");
            let mut patch = grow_patch(cls, m, side, size);
            if !patch.elements.contains(&k) {
                patch.elements.push(k);
            }
            patch.owner = k;
            patch.anchor = m;
            Ok(patch)
        }
    }
}

/// Linear map from samples at `points` to the coefficients (in `basis`) of the
/// least-squares polynomial that interpolates the sample at `points[anchor]`.
///
/// The constraint is eliminated by writing `q = g(x_M) + sum_j c_j psi_j` with
/// `psi_j = phi_j - phi_j(x_M)`; the reduced problem is solved through the
/// SVD pseudo-inverse. Returns `None` if the reduced design matrix has
/// `sigma_min / sigma_max <= RANK_TOL` or too few points.
pub fn constrained_ls_operator(basis: &ScaledMonomials, points: &[Point], anchor: usize) -> Option<DMatrix<f64>> {
    let n = points.len();
    let d = basis.dim();
    if n < d || anchor >= n {
        return None;
    }
    let phi_m = basis.values_vec(&points[anchor]);
    let mut psi = DMatrix::zeros(n, d - 1);
    let mut row = vec![0.0; d];
    for (r, p) in points.iter().enumerate() {
        basis.values(p, &mut row);
        for j in 1..d {
            psi[(r, j - 1)] = row[j] - phi_m[j];
        }
    }
    let svd = psi.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin / smax <= RANK_TOL {
        return None;
    }
    let pinv = svd.pseudo_inverse(0.0).ok()?;
    // c = pinv (g - g_M 1): fold the -g_M 1 part into the anchor column.
    let mut red = pinv;
    let row_sums: Vec<f64> = (0..d - 1).map(|j| red.row(j).sum()).collect();
    for (j, s) in row_sums.iter().enumerate() {
        red[(j, anchor)] -= s;
    }
    let mut op = DMatrix::zeros(d, n);
    op[(0, anchor)] = 1.0;
    for j in 1..d {
        for c in 0..n {
            op[(j, c)] = red[(j - 1, c)];
            op[(0, c)] -= phi_m[j] * red[(j - 1, c)];
        }
    }
    Some(op)
}

/// Coefficients of the anchored least-squares fit of `values` at `points`.
pub fn fit_constrained_ls(
    basis: &ScaledMonomials,
    points: &[Point],
    anchor: usize,
    values: &[f64],
) -> Result<Vec<f64>> {
    let op = constrained_ls_operator(basis, points, anchor).ok_or(Error::RankDeficient {
        element: anchor,
        side: 0,
    })?;
    Ok((0..op.nrows())
        .map(|j| op.row(j).iter().zip(values).map(|(a, b)| a * b).sum())
        .collect())
}

/// The local reconstruction on an interior element: a polynomial basis and
/// the map from the patch's DOF values to its coefficients.
#[derive(Debug, Clone)]
pub struct LocalFit {
    pub patch: ElementPatch,
    pub basis: ScaledMonomials,
    /// Global DOF indices aligned with `patch.collocation`.
    pub dofs: Vec<usize>,
    /// `dim P_m x #I` coefficient map.
    pub operator: DMatrix<f64>,
    /// Patch threshold actually used (after any rank-deficiency retries).
    pub patch_size: usize,
}

impl LocalFit {
    /// Polynomial coefficients for a global DOF vector.
    pub fn coefficients(&self, u: &[f64]) -> Vec<f64> {
        (0..self.operator.nrows())
            .map(|j| {
                self.dofs
                    .iter()
                    .enumerate()
                    .map(|(c, &g)| self.operator[(j, c)] * u[g])
                    .sum()
            })
            .collect()
    }

    /// Coefficients of the basis function attached to patch-local DOF `c`.
    pub fn basis_coefficients(&self, c: usize) -> Vec<f64> {
        self.operator.column(c).iter().copied().collect()
    }

    /// Jets at `p` of every basis function `lambda_{dofs[c]}` restricted to this fit.
    pub fn basis_jets(&self, p: &Point, out: &mut Vec<Jet>) {
        let mono = self.basis.jets_vec(p);
        out.clear();
        for c in 0..self.dofs.len() {
            let mut j = Jet::default();
            for (a, m) in mono.iter().enumerate() {
                j.axpy(self.operator[(a, c)], m);
            }
            out.push(j);
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionSpace {
    degree: usize,
    patch_size: usize,
    dof_of_element: Vec<Option<usize>>,
    element_of_dof: Vec<usize>,
    side_of_dof: Vec<usize>,
    /// Fits indexed by interior element id.
    fits: Vec<Option<LocalFit>>,
    anchors: Vec<[Option<usize>; 2]>,
    has_side: Vec<[bool; 2]>,
}

impl ReconstructionSpace {
    pub fn build(cls: &Classification, degree: usize, patch_size: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidInput("polynomial degree must be at least 1".into()));
        }
        let d = dim(degree);
        let mesh = cls.mesh();
        let ne = mesh.num_elements();
        let mut dof_of_element = vec![None; ne];
        let mut element_of_dof = Vec::new();
        let mut side_of_dof = Vec::new();
        let mut counts = [0usize; 2];
        for (k, dof) in dof_of_element.iter_mut().enumerate() {
            if let ElementTag::Interior(s) = cls.element_tag(k) {
                *dof = Some(element_of_dof.len());
                element_of_dof.push(k);
                side_of_dof.push(s);
                counts[s] += 1;
            }
        }
        for (side, &count) in counts.iter().enumerate() {
            // A side with no elements at all (no interface in the domain)
            // needs no reconstruction.
            if patch_size < d || (count > 0 && count < d) {
                return Err(Error::PatchTooSmall {
                    side,
                    available: count.min(patch_size),
                    required: d,
                });
            }
        }

        let fits: Vec<Result<Option<LocalFit>>> = (0..ne)
            .into_par_iter()
            .map(|k| match cls.element_tag(k) {
                ElementTag::Interior(side) => build_fit(cls, k, side, degree, patch_size, &dof_of_element).map(Some),
                ElementTag::Cut => Ok(None),
            })
            .collect();
        let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;
        let retried = fits.iter().flatten().filter(|f| f.patch_size > patch_size).count();
        if retried > 0 {
            log::info!("{retried} patches were enlarged after a rank-deficient fit");
        }
        let anchors = (0..ne).map(|k| [cls.anchor(k, 0), cls.anchor(k, 1)]).collect();
        let has_side = (0..ne).map(|k| [cls.has_side(k, 0), cls.has_side(k, 1)]).collect();
        Ok(Self {
            degree,
            patch_size,
            dof_of_element,
            element_of_dof,
            side_of_dof,
            fits,
            anchors,
            has_side,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn num_dofs(&self) -> usize {
        self.element_of_dof.len()
    }

    pub fn dof_of_element(&self, k: usize) -> Option<usize> {
        self.dof_of_element[k]
    }

    pub fn element_of_dof(&self, dof: usize) -> usize {
        self.element_of_dof[dof]
    }

    pub fn side_of_dof(&self, dof: usize) -> usize {
        self.side_of_dof[dof]
    }

    /// The fit that defines the side-`side` polynomial on element `k`, if
    /// `k` has a part on that side.
    pub fn fit(&self, k: usize, side: usize) -> Option<&LocalFit> {
        if !self.has_side[k][side] {
            return None;
        }
        let m = self.anchors[k][side]?;
        self.fits[m].as_ref()
    }

    /// Coefficients of `R^side_K u` in the basis of `fit(k, side)`.
    pub fn local_coefficients(&self, k: usize, side: usize, u: &[f64]) -> Option<Vec<f64>> {
        self.fit(k, side).map(|f| f.coefficients(u))
    }

    /// Jet of the reconstructed function on element `k`, side `side`, at `p`.
    pub fn eval(&self, k: usize, side: usize, u: &[f64], p: &Point) -> Option<Jet> {
        let fit = self.fit(k, side)?;
        Some(fit.basis.eval_jet(&fit.coefficients(u), p))
    }

    /// Value at `p` of the basis function attached to `dof`, using the
    /// side-`side` polynomial of element `k`; exactly zero outside its support.
    pub fn eval_basis(&self, dof: usize, k: usize, side: usize, p: &Point) -> f64 {
        let Some(fit) = self.fit(k, side) else {
            return 0.0;
        };
        match fit.dofs.iter().position(|&g| g == dof) {
            Some(c) => fit.basis.eval(&fit.basis_coefficients(c), p),
            None => 0.0,
        }
    }

    /// Global DOF values of `g` sampled at the collocation points.
    pub fn interpolate(&self, mesh: &crate::Mesh, g: impl Fn(&Point, usize) -> f64) -> Vec<f64> {
        self.element_of_dof
            .iter()
            .zip(&self.side_of_dof)
            .map(|(&k, &s)| g(&mesh.barycenter(k), s))
            .collect()
    }

    /// `supp(lambda_dof)`: the (element, side) pairs whose local polynomial depends on `dof`.
    pub fn support(&self, dof: usize) -> Vec<(usize, usize)> {
        let side = self.side_of_dof[dof];
        (0..self.fits.len())
            .filter(|&k| self.fit(k, side).is_some_and(|f| f.dofs.contains(&dof)))
            .map(|k| (k, side))
            .collect()
    }

    /// Iterator over all interior fits.
    pub fn fits(&self) -> impl Iterator<Item = &LocalFit> {
        self.fits.iter().flatten()
    }
}

fn build_fit(
    cls: &Classification,
    k: usize,
    side: usize,
    degree: usize,
    patch_size: usize,
    dof_of_element: &[Option<usize>],
) -> Result<LocalFit> {
    let mesh = cls.mesh();
    let basis = ScaledMonomials::new(mesh.barycenter(k), mesh.element_diameter(k), degree);
    for attempt in 0..=MAX_RETRIES {
        let size = patch_size + attempt * RETRY_STEP;
        let patch = grow_patch(cls, k, side, size);
        let points: Vec<Point> = patch.collocation.iter().map(|&e| mesh.barycenter(e)).collect();
        let anchor = patch
            .collocation
            .iter()
            .position(|&e| e == k)
            .expect("owner is its own collocation point");
        if let Some(operator) = constrained_ls_operator(&basis, &points, anchor) {
            let dofs = patch
                .collocation
                .iter()
                .map(|&e| dof_of_element[e].expect("collocation elements carry DOFs"))
                .collect();
            return Ok(LocalFit {
                patch,
                basis,
                dofs,
                operator,
                patch_size: size,
            });
        }
        log::debug!("rank-deficient patch for element {k} side {side} at #S = {size}");
    }
    Err(Error::RankDeficient { element: k, side })
}

/// Stability diagnostics of one patch.
#[derive(Debug, Clone)]
pub struct PatchDiagnostics {
    pub element: usize,
    pub side: usize,
    /// Sampled lower estimate of `Lambda(m, S)`.
    pub lambda: f64,
    pub num_collocation: usize,
    /// Distance from `x_K` to the patch boundary.
    pub inner_radius: f64,
    /// Largest distance from `x_K` to a patch vertex.
    pub outer_radius: f64,
    /// 3 if the patch contains cut elements, else 1.
    pub c_s: u8,
}

#[derive(Debug, Clone)]
pub struct ReconstructionDiagnostics {
    pub patches: Vec<PatchDiagnostics>,
    /// `max (1 + Lambda sqrt(#I))` over all patches.
    pub lambda_m: f64,
}

/// Estimates `Lambda(m, S)` for every interior patch by sampling.
///
/// For each sample point `y` the polynomial maximising `|p(y)|` subject to
/// `sum_I p^2 <= 1` is formed, and its actual sup-ratio over the samples is
/// recorded. The result is a lower estimate, not a certified bound.
pub fn estimate_lambda_constants(space: &ReconstructionSpace, cls: &Classification) -> ReconstructionDiagnostics {
    let patches: Vec<PatchDiagnostics> = space
        .fits
        .par_iter()
        .flatten()
        .map(|fit| patch_diagnostics(fit, cls))
        .collect();
    let lambda_m = patches
        .iter()
        .map(|p| 1.0 + p.lambda * (p.num_collocation as f64).sqrt())
        .fold(0.0, f64::max);
    ReconstructionDiagnostics { patches, lambda_m }
}

fn patch_diagnostics(fit: &LocalFit, cls: &Classification) -> PatchDiagnostics {
    const GRID: usize = 20;
    let mesh = cls.mesh();
    let patch = &fit.patch;
    let xk = mesh.barycenter(patch.owner);
    let colloc: Vec<Point> = patch.collocation.iter().map(|&e| mesh.barycenter(e)).collect();

    let (mut lo, mut hi) = (xk, xk);
    for &e in &patch.elements {
        for p in mesh.triangle_points(e) {
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
    }
    let mut samples = colloc.clone();
    for i in 0..GRID {
        for j in 0..GRID {
            let p = Point::new(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / GRID as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / GRID as f64,
            );
            if patch.elements.iter().any(|&e| mesh.contains(e, &p)) {
                samples.push(p);
            }
        }
    }
    let lambda = sampled_lambda(&fit.basis, &colloc, &samples);

    let members: HashSet<usize> = patch.elements.iter().copied().collect();
    let mut inner_radius = f64::INFINITY;
    let mut outer_radius: f64 = 0.0;
    for &e in &patch.elements {
        for (j, &f) in mesh.element_faces(e).iter().enumerate() {
            let face = mesh.face(f);
            let other = face.neighbour_of(e);
            if other.is_none_or(|o| !members.contains(&o)) {
                let [a, b] = mesh.face_points(f);
                inner_radius = inner_radius.min(point_segment_distance(&xk, &a, &b));
            }
            let v = mesh.triangle_points(e)[j];
            outer_radius = outer_radius.max((v - xk).norm());
        }
    }
    let c_s = if patch.elements.iter().any(|&e| cls.is_cut(e)) {
        3
    } else {
        1
    };
    PatchDiagnostics {
        element: patch.owner,
        side: patch.side,
        lambda,
        num_collocation: colloc.len(),
        inner_radius,
        outer_radius,
        c_s,
    }
}

/// Sampled estimate of `max_p max_S |p| / max_I |p|`.
pub fn sampled_lambda(basis: &ScaledMonomials, colloc: &[Point], samples: &[Point]) -> f64 {
    let d = basis.dim();
    let vi = DMatrix::from_fn(colloc.len(), d, |r, c| basis.values_vec(&colloc[r])[c]);
    let vs = DMatrix::from_fn(samples.len(), d, |r, c| basis.values_vec(&samples[r])[c]);
    let gram = vi.transpose() * &vi;
    let Some(chol) = gram.cholesky() else {
        return f64::INFINITY;
    };
    // Column y of `cand` holds the coefficients of the extremal polynomial for sample y.
    let cand = chol.solve(&vs.transpose());
    let on_samples = &vs * &cand;
    let on_colloc = &vi * &cand;
    let mut best: f64 = 1.0;
    for y in 0..samples.len() {
        let top = on_samples.column(y).amax();
        let bottom = on_colloc.column(y).amax();
        if bottom > 0.0 {
            best = best.max(top / bottom);
        }
    }
    best
}

fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}
