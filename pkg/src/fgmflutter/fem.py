"""Element stiffness/mass/aerodynamic matrices and constrained global assembly.

Bilinear quadrilateral with five fields per node (u, v, w, tx, ty). Membrane,
coupling and bending terms use full 2x2 integration; transverse shear uses the
edge-midpoint assumed-strain interpolation that removes locking on thin
plates. Enriched DOF blocks reuse the same strain operators applied to the
enriched shape derivatives. Cut elements integrate over the crack module's
sub-cell points for all three matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .crack import (KIND_HEAVISIDE, CrackData, ElementCut, EnrichedDofMap,
                    subcell_quadrature)
from .materials import FgmPlate, SectionProperties
from .mesh import DofMap, Mesh, N_FIELDS

# Shear interpolation for enriched columns: "ans" samples every column at the
# edge midpoints; "ans-standard" keeps the substitute interpolation for the
# standard columns and evaluates enriched columns directly at the quadrature
# points so the discontinuity is not smeared across the crack.
SHEAR_MODES = ("ans", "ans-standard")

_ANS_SAMPLES = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])  # A, B, C, D


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class NondimScales:
    """Reference quantities for nondimensionalization (ceramic properties)."""

    a: float
    b: float
    h: float
    d_c: float
    rho_c: float

    @classmethod
    def from_plate(cls, plate: FgmPlate) -> "NondimScales":
        return cls(a=plate.a, b=plate.b, h=plate.h,
                   d_c=plate.bending_rigidity_ceramic(), rho_c=plate.ceramic.rho)

    @property
    def lambda_factor(self) -> float:
        """Multiply a dimensional pressure parameter by this to nondimensionalize."""
        return self.a**3 / self.d_c

    @property
    def omega_factor(self) -> float:
        """Multiply a circular frequency [rad/s] by this to nondimensionalize."""
        return self.a**2 * np.sqrt(self.rho_c * self.h / self.d_c)


@dataclass(frozen=True)
class ElementMatrices:
    k_e: np.ndarray
    m_e: np.ndarray
    a_e: np.ndarray


@dataclass(frozen=True)
class GlobalSystem:
    """Assembled constrained system: K, M symmetric, Abar unsymmetric (free DOFs)."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    Abar: sp.csr_matrix
    dof_map: EnrichedDofMap
    scales: NondimScales
    info: dict = field(default_factory=dict)

    @property
    def n_free(self) -> int:
        return self.K.shape[0]


# ---------------------------------------------------------------------------
# geometry and basis evaluation


def _shape_functions(pts_nat: np.ndarray):
    xi = pts_nat[:, 0][:, None]
    eta = pts_nat[:, 1][:, None]
    signs_xi = np.array([-1.0, 1.0, 1.0, -1.0])
    signs_eta = np.array([-1.0, -1.0, 1.0, 1.0])
    n = 0.25 * (1.0 + xi * signs_xi) * (1.0 + eta * signs_eta)
    dn_dxi = 0.25 * signs_xi * (1.0 + eta * signs_eta)
    dn_deta = 0.25 * signs_eta * (1.0 + xi * signs_xi)
    return n, np.stack([dn_dxi, dn_deta], axis=1)  # (np, 4), (np, 2, 4)


def _geometry(coords: np.ndarray, pts_nat: np.ndarray):
    """Shape values, cartesian gradients, Jacobians, detJ and physical points."""
    n, dn_nat = _shape_functions(pts_nat)
    jac = dn_nat @ coords  # (np, 2, 2): [[x_xi, y_xi], [x_eta, y_eta]]
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    if np.any(det <= 0.0):
        raise AssemblyError("non-positive Jacobian determinant in element geometry")
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1]
    inv[:, 0, 1] = -jac[:, 0, 1]
    inv[:, 1, 0] = -jac[:, 1, 0]
    inv[:, 1, 1] = jac[:, 0, 0]
    inv /= det[:, None, None]
    dn_cart = inv @ dn_nat  # (np, 2, 4)
    pts_xy = n @ coords
    return n, dn_cart, jac, det, pts_xy


def natural_coords(coords: np.ndarray, pts_xy: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Invert the bilinear map with Newton iteration (points assumed inside)."""
    pts_xy = np.atleast_2d(pts_xy)
    nat = np.zeros_like(pts_xy)
    scale = np.max(np.abs(coords - coords.mean(axis=0)))
    for _ in range(40):
        n, dn_nat = _shape_functions(nat)
        res = n @ coords - pts_xy
        if np.max(np.abs(res)) < tol * scale:
            break
        jac = dn_nat @ coords  # d(x)/d(nat) transposed blocks
        # res_i = x(nat_i) - p_i ; step solves J^T delta = res per point
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        dxi = (res[:, 0] * jac[:, 1, 1] - res[:, 1] * jac[:, 1, 0]) / det
        deta = (-res[:, 0] * jac[:, 0, 1] + res[:, 1] * jac[:, 0, 0]) / det
        nat[:, 0] -= dxi
        nat[:, 1] -= deta
    else:
        raise AssemblyError("bilinear map inversion did not converge")
    return nat


# ---------------------------------------------------------------------------
# enrichment context


@dataclass(frozen=True)
class ElementContext:
    """Per-element enrichment data: records active on its nodes plus crack fields."""

    entries: tuple  # ((local_node, record_index, EnrRecord), ...)
    data: CrackData
    cut: ElementCut
    node_h: np.ndarray  # (4,) nodal sign values
    node_f: dict  # tip index -> (4, 4) nodal branch values
    r_floor: float

    @property
    def n_extra(self) -> int:
        return len(self.entries)


def element_context(mesh: Mesh, e: int, data: CrackData | None,
                    dof_map: EnrichedDofMap) -> ElementContext | None:
    """Build the enrichment context of element e; None when nothing is enriched."""
    if data is None:
        return None
    conn = mesh.elements[e]
    entries = []
    for ln, node in enumerate(conn):
        for r in dof_map.node_records.get(int(node), ()):
            entries.append((ln, r, dof_map.records[r]))
    cut = data.cuts[e]
    if not entries and cut.kind == "standard":
        return None

    coords = mesh.element_coords(e)
    node_h = np.sign(data.phi(coords))
    node_h[node_h == 0.0] = 1.0
    node_f = {}
    for t, frame in enumerate(data.tip_frames):
        node_f[t] = frame.branch_values(coords)
    d1 = coords[2] - coords[0]
    d2 = coords[3] - coords[1]
    size = np.sqrt(abs(d1[0] * d2[1] - d1[1] * d2[0]) / 2.0)
    return ElementContext(entries=tuple(entries), data=data, cut=cut,
                          node_h=node_h, node_f=node_f, r_floor=1e-12 * size)


def _basis(coords: np.ndarray, pts_nat: np.ndarray, ctx: ElementContext | None):
    """All scalar basis functions at the given points.

    Returns values (np, nb), cartesian gradients (np, nb, 2), the per-basis
    element column offsets (nb,), and the geometry tuple.
    """
    geo = _geometry(coords, pts_nat)
    n, dn_cart, jac, det, pts_xy = geo
    npts = pts_nat.shape[0]
    n_extra = ctx.n_extra if ctx is not None else 0
    nb = 4 + n_extra

    val = np.zeros((npts, nb))
    grad = np.zeros((npts, nb, 2))
    col = np.zeros(nb, dtype=int)
    val[:, :4] = n
    grad[:, :4, :] = np.transpose(dn_cart, (0, 2, 1))
    col[:4] = N_FIELDS * np.arange(4)

    if n_extra:
        h_pts = None
        f_cache = {}
        for k, (ln, _ridx, rec) in enumerate(ctx.entries):
            b = 4 + k
            col[b] = N_FIELDS * (4 + k)
            if rec.kind == KIND_HEAVISIDE:
                if h_pts is None:
                    h_pts = np.sign(ctx.data.phi(pts_xy))
                    h_pts[h_pts == 0.0] = 1.0
                dv = h_pts - ctx.node_h[ln]
                val[:, b] = n[:, ln] * dv
                grad[:, b, :] = dn_cart[:, :, ln] * dv[:, None]
            else:
                key = rec.tip
                if key not in f_cache:
                    frame = ctx.data.tip_frames[key]
                    f_cache[key] = (frame.branch_values(pts_xy),
                                    frame.branch_gradients(pts_xy, ctx.r_floor))
                f_vals, f_grads = f_cache[key]
                dv = f_vals[:, rec.branch] - ctx.node_f[key][ln, rec.branch]
                val[:, b] = n[:, ln] * dv
                grad[:, b, :] = dn_cart[:, :, ln] * dv[:, None] \
                    + n[:, ln, None] * f_grads[:, rec.branch, :]
    return val, grad, col, geo


# ---------------------------------------------------------------------------
# element matrices


def _strain_matrices(val_p, grad_p, col):
    """Membrane and bending operators at one point."""
    nb = val_p.shape[0]
    ncol = N_FIELDS * nb
    bp = np.zeros((3, ncol))
    bb = np.zeros((3, ncol))
    cu, cv, ctx_, cty = col + 0, col + 1, col + 3, col + 4
    bp[0, cu] = grad_p[:, 0]
    bp[2, cu] = grad_p[:, 1]
    bp[1, cv] = grad_p[:, 1]
    bp[2, cv] = grad_p[:, 0]
    bb[0, ctx_] = grad_p[:, 0]
    bb[2, ctx_] = grad_p[:, 1]
    bb[1, cty] = grad_p[:, 1]
    bb[2, cty] = grad_p[:, 0]
    return bp, bb


def _shear_direct(val_p, grad_p, col, ncol):
    bs = np.zeros((2, ncol))
    cw, ctx_, cty = col + 2, col + 3, col + 4
    bs[0, cw] = grad_p[:, 0]
    bs[1, cw] = grad_p[:, 1]
    bs[0, ctx_] = val_p
    bs[1, cty] = val_p
    return bs


def _ans_natural_rows(coords, ctx):
    """Natural-direction shear rows sampled at the four edge midpoints."""
    val, grad, col, geo = _basis(coords, _ANS_SAMPLES, ctx)
    _, _, jac, _, _ = geo
    nb = val.shape[1]
    ncol = N_FIELDS * nb
    rows = np.zeros((4, 2, ncol))  # sample, (gamma_xi, gamma_eta), col
    for s in range(4):
        cw, ctx_, cty = col + 2, col + 3, col + 4
        for comp in range(2):  # 0: xi-row, 1: eta-row
            g = jac[s, comp]  # (x_,c , y_,c)
            rows[s, comp, cw] = grad[s, :, 0] * g[0] + grad[s, :, 1] * g[1]
            rows[s, comp, ctx_] = val[s] * g[0]
            rows[s, comp, cty] = val[s] * g[1]
    return rows


def _element_matrices(coords, section: SectionProperties, flow_angle: float,
                      ctx: ElementContext | None, pts_nat, w_phys,
                      shear_mode: str) -> ElementMatrices:
    if shear_mode not in SHEAR_MODES:
        raise ValueError(f"unknown shear mode {shear_mode!r}")
    val, grad, col, geo = _basis(coords, pts_nat, ctx)
    _, _, jac, _, _ = geo
    npts, nb = val.shape
    ncol = N_FIELDS * nb

    ans_rows = _ans_natural_rows(coords, ctx)

    ke = np.zeros((ncol, ncol))
    me = np.zeros((ncol, ncol))
    ae = np.zeros((ncol, ncol))

    a_m, b_m, db_m, es_m = section.A, section.B, section.Db, section.Es
    has_coupling = np.any(np.abs(b_m) > 1e-8 * max(np.abs(db_m).max(), 1e-300))
    inertia = np.array([section.i0, section.i0, section.i0, section.i1, section.i1])
    cos_t, sin_t = np.cos(flow_angle), np.sin(flow_angle)

    for q in range(npts):
        w = w_phys[q]
        bp, bb = _strain_matrices(val[q], grad[q], col)

        # Substitute shear interpolation from the edge-midpoint samples.
        xi, eta = pts_nat[q]
        row_xi = 0.5 * (1.0 - eta) * ans_rows[0, 0] + 0.5 * (1.0 + eta) * ans_rows[2, 0]
        row_eta = 0.5 * (1.0 - xi) * ans_rows[3, 1] + 0.5 * (1.0 + xi) * ans_rows[1, 1]
        jq = jac[q]
        det = jq[0, 0] * jq[1, 1] - jq[0, 1] * jq[1, 0]
        bs = np.empty((2, ncol))
        bs[0] = (jq[1, 1] * row_xi - jq[0, 1] * row_eta) / det
        bs[1] = (-jq[1, 0] * row_xi + jq[0, 0] * row_eta) / det
        if shear_mode == "ans-standard" and ncol > 20:
            bs_direct = _shear_direct(val[q], grad[q], col, ncol)
            bs[:, 20:] = bs_direct[:, 20:]

        ke += w * (bp.T @ (a_m @ bp) + bb.T @ (db_m @ bb) + bs.T @ (es_m @ bs))
        if has_coupling:
            cross = bp.T @ (b_m @ bb)
            ke += w * (cross + cross.T)

        for f in range(N_FIELDS):
            nf = np.zeros(ncol)
            nf[col + f] = val[q]
            me += (w * inertia[f]) * np.outer(nf, nf)

        nw = np.zeros(ncol)
        dw = np.zeros(ncol)
        nw[col + 2] = val[q]
        dw[col + 2] = cos_t * grad[q, :, 0] + sin_t * grad[q, :, 1]
        ae += w * np.outer(nw, dw)

    return ElementMatrices(k_e=ke, m_e=me, a_e=ae)


def _element_quadrature(coords, ctx: ElementContext | None):
    """Natural points and physical weights for an element."""
    if ctx is not None and ctx.cut.kind != "standard":
        pts_xy, wts = subcell_quadrature(coords, ctx.cut)
        return natural_coords(coords, pts_xy), wts
    n1d = 2
    if ctx is not None and any(rec.kind != KIND_HEAVISIDE for _, _, rec in ctx.entries):
        n1d = 4  # tip blending: non-polynomial branch tails
    g, w = np.polynomial.legendre.leggauss(n1d)
    xi, eta = np.meshgrid(g, g, indexing="ij")
    pts_nat = np.column_stack([xi.ravel(), eta.ravel()])
    _, _, _, det, _ = _geometry(coords, pts_nat)
    w2 = (np.outer(w, w)).ravel() * det
    return pts_nat, w2


def element_stiffness(coords, section, ctx=None, shear_mode="ans") -> np.ndarray:
    pts, w = _element_quadrature(coords, ctx)
    return _element_matrices(coords, section, 0.0, ctx, pts, w, shear_mode).k_e


def element_mass(coords, section, ctx=None) -> np.ndarray:
    pts, w = _element_quadrature(coords, ctx)
    return _element_matrices(coords, section, 0.0, ctx, pts, w, "ans").m_e


def element_aero(coords, flow_angle, ctx=None) -> np.ndarray:
    pts, w = _element_quadrature(coords, ctx)
    return _element_matrices(coords, section_unit_dummy(), flow_angle, ctx, pts, w, "ans").a_e


def section_unit_dummy() -> SectionProperties:
    """Unit section used where only geometry integrals are needed."""
    return SectionProperties(A=np.eye(3), B=np.zeros((3, 3)), Db=np.eye(3),
                             Es=np.eye(2), i0=1.0, i1=1.0)


# ---------------------------------------------------------------------------
# assembly


def _element_dofs(conn, ctx: ElementContext | None, dof_map: EnrichedDofMap) -> np.ndarray:
    dofs = np.empty(N_FIELDS * (4 + (ctx.n_extra if ctx else 0)), dtype=int)
    for ln, node in enumerate(conn):
        dofs[N_FIELDS * ln:N_FIELDS * (ln + 1)] = N_FIELDS * int(node) + np.arange(N_FIELDS)
    if ctx is not None:
        for k, (_ln, ridx, _rec) in enumerate(ctx.entries):
            base = dof_map.record_base(ridx)
            dofs[N_FIELDS * (4 + k):N_FIELDS * (5 + k)] = base + np.arange(N_FIELDS)
    return dofs


def assemble(mesh: Mesh, plate: FgmPlate, section: SectionProperties,
             dof_map: DofMap | EnrichedDofMap, flow_angle: float = 0.0,
             crack_data: CrackData | None = None,
             shear_mode: str = "ans") -> GlobalSystem:
    """Scatter-add element blocks into sparse global matrices over free DOFs."""
    if isinstance(dof_map, DofMap):
        dof_map = EnrichedDofMap.from_base(dof_map)
    if crack_data is not None and len(crack_data.cuts) != mesh.n_elements:
        raise AssemblyError("crack classification does not match the mesh")

    n_dofs = dof_map.n_dofs
    rows, cols = [], []
    vals_k, vals_m, vals_a = [], [], []
    cache: dict[bytes, ElementMatrices] = {}
    n_split = n_tip = 0

    for e in range(mesh.n_elements):
        coords = mesh.element_coords(e)
        conn = mesh.elements[e]
        ctx = element_context(mesh, e, crack_data, dof_map)

        if ctx is None:
            rel = coords - coords[0]
            key = np.round(rel / max(plate.a, plate.b), 12).tobytes()
            em = cache.get(key)
            if em is None:
                pts, w = _element_quadrature(coords, None)
                em = _element_matrices(coords, section, flow_angle, None, pts, w, shear_mode)
                cache[key] = em
        else:
            if ctx.cut.kind == "split":
                n_split += 1
            elif ctx.cut.kind == "tip":
                n_tip += 1
            pts, w = _element_quadrature(coords, ctx)
            em = _element_matrices(coords, section, flow_angle, ctx, pts, w, shear_mode)

        dofs = _element_dofs(conn, ctx, dof_map)
        nloc = dofs.size
        rows.append(np.repeat(dofs, nloc))
        cols.append(np.tile(dofs, nloc))
        vals_k.append(em.k_e.ravel())
        vals_m.append(em.m_e.ravel())
        vals_a.append(em.a_e.ravel())

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    free = dof_map.free

    def build(vals):
        m = sp.coo_matrix((np.concatenate(vals), (rows, cols)), shape=(n_dofs, n_dofs)).tocsr()
        return m[free][:, free].tocsr()

    k_mat = build(vals_k)
    m_mat = build(vals_m)
    a_mat = build(vals_a)
    info = {
        "n_dofs": int(n_dofs),
        "n_free": int(free.size),
        "n_heaviside_dofs": dof_map.n_heaviside_dofs(),
        "n_tip_dofs": dof_map.n_tip_dofs(),
        "n_split_elements": n_split,
        "n_tip_elements": n_tip,
        "shear_mode": shear_mode,
        "flow_angle": float(flow_angle),
    }
    return GlobalSystem(K=k_mat, M=m_mat, Abar=a_mat, dof_map=dof_map,
                        scales=NondimScales.from_plate(plate), info=info)


def assemble_damping_diagnostic(mesh: Mesh, dof_map: DofMap | EnrichedDofMap,
                                crack_data: CrackData | None = None) -> sp.csr_matrix:
    """Geometric part of the piston-theory velocity term, integral of Nw^T Nw.

    The physical damping matrix is this integral times
    lambda * (M^2 - 2) / ((M^2 - 1) * U_a); it is excluded from the flutter
    eigenproblem and provided for reporting only.
    """
    if isinstance(dof_map, DofMap):
        dof_map = EnrichedDofMap.from_base(dof_map)
    n_dofs = dof_map.n_dofs
    rows, cols, vals = [], [], []
    for e in range(mesh.n_elements):
        coords = mesh.element_coords(e)
        ctx = element_context(mesh, e, crack_data, dof_map)
        pts, w = _element_quadrature(coords, ctx)
        val, _grad, col, _geo = _basis(coords, pts, ctx)
        ncol = N_FIELDS * val.shape[1]
        de = np.zeros((ncol, ncol))
        for q in range(val.shape[0]):
            nw = np.zeros(ncol)
            nw[col + 2] = val[q]
            de += w[q] * np.outer(nw, nw)
        dofs = _element_dofs(mesh.elements[e], ctx, dof_map)
        rows.append(np.repeat(dofs, dofs.size))
        cols.append(np.tile(dofs, dofs.size))
        vals.append(de.ravel())
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_dofs, n_dofs)).tocsr()
    free = dof_map.free
    return m[free][:, free].tocsr()
