"""Mesh-independent through-crack representation.

Level sets describe the crack line, elements are classified geometrically
(standard / split / tip), nodal supports that are fully bisected receive
sign-function degrees of freedom and tip-element nodes receive the four
asymptotic branch functions. Cut elements are integrated over crack-conforming
sub-triangles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import DofMap, Mesh, N_FIELDS

CRACK_KINDS = ("center", "edge")

# Enrichment kinds, in per-node storage order.
KIND_HEAVISIDE = "H"
KIND_TIP = "T"


class CrackGeometryError(ValueError):
    """Crack geometry incompatible with the mesh (degenerate or unresolvable)."""


@dataclass(frozen=True)
class CrackGeometry:
    """Straight through crack given by center, length and orientation.

    theta is measured from the +x axis in radians. 'center' cracks must have
    both tips inside the plate; 'edge' cracks have exactly one interior tip.
    """

    cx: float
    cy: float
    d: float
    theta: float
    kind: str = "center"

    def __post_init__(self):
        if self.d <= 0.0:
            raise ValueError(f"crack length must be positive, got {self.d}")
        if self.kind not in CRACK_KINDS:
            raise ValueError(f"unknown crack kind {self.kind!r}; expected one of {CRACK_KINDS}")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    @property
    def direction(self) -> np.ndarray:
        return np.array([np.cos(self.theta), np.sin(self.theta)])

    @property
    def normal(self) -> np.ndarray:
        return np.array([-np.sin(self.theta), np.cos(self.theta)])

    @property
    def tips(self) -> tuple[np.ndarray, np.ndarray]:
        half = 0.5 * self.d * self.direction
        return self.center - half, self.center + half


def level_sets(crack: CrackGeometry, p) -> tuple:
    """Signed normal distance phi and tangential distance psi at point(s) p.

    psi is the signed distance along the crack axis from the nearer tip,
    negative strictly inside the crack span.
    """
    p_arr = np.asarray(p, dtype=float)
    single = p_arr.ndim == 1
    rel = np.atleast_2d(p_arr) - crack.center
    phi = rel @ crack.normal
    s = rel @ crack.direction
    psi = np.maximum(s - 0.5 * crack.d, -s - 0.5 * crack.d)
    if single:
        return float(phi[0]), float(psi[0])
    return phi, psi


def heaviside(phi):
    """Generalized sign function: +1 for phi >= 0, -1 otherwise."""
    out = np.where(np.asarray(phi) >= 0.0, 1.0, -1.0)
    return float(out) if out.ndim == 0 else out


def tip_branch(r, theta):
    """Four asymptotic branch functions in crack-tip polar coordinates.

    Returns (..., 4): sqrt(r)*[sin(t/2), cos(t/2), sin(t/2)sin(t), cos(t/2)sin(t)].
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sr = np.sqrt(r)
    st2 = np.sin(theta / 2.0)
    ct2 = np.cos(theta / 2.0)
    st = np.sin(theta)
    return np.stack([sr * st2, sr * ct2, sr * st2 * st, sr * ct2 * st], axis=-1)


@dataclass(frozen=True)
class TipFrame:
    """Local frame of one interior crack tip: e_t points along the crack continuation."""

    tip_id: int
    xy: np.ndarray
    e_t: np.ndarray
    e_n: np.ndarray

    def polar(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rel = np.atleast_2d(pts) - self.xy
        xl = rel @ self.e_t
        yl = rel @ self.e_n
        return np.hypot(xl, yl), np.arctan2(yl, xl)

    def branch_values(self, pts: np.ndarray) -> np.ndarray:
        r, t = self.polar(pts)
        return tip_branch(r, t)

    def branch_gradients(self, pts: np.ndarray, r_floor: float) -> np.ndarray:
        """Gradients of the four branch functions in global coordinates, shape (n, 4, 2)."""
        r, t = self.polar(pts)
        r = np.maximum(r, r_floor)
        sr = np.sqrt(r)
        st2, ct2 = np.sin(t / 2.0), np.cos(t / 2.0)
        st, ct = np.sin(t), np.cos(t)

        dr = np.stack([st2, ct2, st2 * st, ct2 * st], axis=-1) / (2.0 * sr)[:, None]
        dt = np.stack(
            [
                0.5 * ct2,
                -0.5 * st2,
                0.5 * ct2 * st + st2 * ct,
                -0.5 * st2 * st + ct2 * ct,
            ],
            axis=-1,
        ) * sr[:, None]

        # Polar-to-local-cartesian, then rotate into the global frame.
        dx_l = dr * ct[:, None] - dt * (st / r)[:, None]
        dy_l = dr * st[:, None] + dt * (ct / r)[:, None]
        grad = np.empty((pts.shape[0], 4, 2))
        grad[:, :, 0] = dx_l * self.e_t[0] + dy_l * self.e_n[0]
        grad[:, :, 1] = dx_l * self.e_t[1] + dy_l * self.e_n[1]
        return grad


@dataclass(frozen=True)
class ElementCut:
    """Classification of one element against the crack."""

    element: int
    kind: str  # "standard" | "split" | "tip"
    chord: np.ndarray | None = None  # (2, 2) intersection segment endpoints
    tip: int | None = None  # index into CrackData.tip_frames
    tip_xy: np.ndarray | None = None


@dataclass(frozen=True)
class CrackData:
    """Resolved crack geometry against a mesh: analysis segment, tips, cuts."""

    crack: CrackGeometry
    p0: np.ndarray
    p1: np.ndarray
    tip_frames: tuple[TipFrame, ...]
    cuts: tuple[ElementCut, ...]

    @property
    def direction(self) -> np.ndarray:
        d = self.p1 - self.p0
        return d / np.linalg.norm(d)

    @property
    def normal(self) -> np.ndarray:
        d = self.direction
        return np.array([-d[1], d[0]])

    def phi(self, pts) -> np.ndarray:
        return (np.atleast_2d(pts) - self.p0) @ self.normal

    def sign(self, pts) -> np.ndarray:
        return heaviside(self.phi(pts))


# ---------------------------------------------------------------------------
# geometric primitives


def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _clip_segment_params(p0, p1, poly, eps) -> tuple[float, float] | None:
    """Parameter interval of segment p0->p1 inside a convex CCW polygon."""
    t0, t1 = 0.0, 1.0
    d = p1 - p0
    n_vert = len(poly)
    for i in range(n_vert):
        a = poly[i]
        b = poly[(i + 1) % n_vert]
        edge = b - a
        inward = np.array([-edge[1], edge[0]])  # CCW polygon: inward normal
        denom = d @ inward
        num = (a - p0) @ inward
        if abs(denom) < eps:
            if num < -eps:
                return None  # parallel and outside
            continue
        t = num / denom
        if denom > 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 > t1:
            return None
    return t0, t1


def _clip_polygon_halfplane(poly: np.ndarray, q: np.ndarray, n: np.ndarray, tol: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon to n . (x - q) >= 0."""
    out = []
    m = len(poly)
    dist = (poly - q) @ n
    for i in range(m):
        a, da = poly[i], dist[i]
        b, db = poly[(i + 1) % m], dist[(i + 1) % m]
        if da >= -tol:
            out.append(a)
        if (da > tol and db < -tol) or (da < -tol and db > tol):
            t = da / (da - db)
            out.append(a + t * (b - a))
    if len(out) < 3:
        return np.empty((0, 2))
    return np.array(out)


def _point_in_poly(p: np.ndarray, poly: np.ndarray, tol: float) -> bool:
    """Point in convex CCW polygon; `tol` is an absolute signed-distance slack."""
    m = len(poly)
    for i in range(m):
        a = poly[i]
        b = poly[(i + 1) % m]
        edge = b - a
        inward = np.array([-edge[1], edge[0]])
        if (p - a) @ inward < -tol * np.linalg.norm(inward):
            return False
    return True


def _fan_triangles(poly: np.ndarray, apex: np.ndarray, insert: np.ndarray | None, area_tol: float):
    """Triangles (apex, b_i, b_i+1) over the polygon boundary, optionally inserting a point."""
    boundary = [np.asarray(v, dtype=float) for v in poly]
    if insert is not None:
        m = len(boundary)
        best = None
        for i in range(m):
            a, b = boundary[i], boundary[(i + 1) % m]
            edge = b - a
            ln2 = edge @ edge
            t = np.clip(((insert - a) @ edge) / ln2, 0.0, 1.0)
            dist = np.linalg.norm(insert - (a + t * edge))
            if best is None or dist < best[0]:
                best = (dist, i, t)
        _, i, t = best
        if 1e-9 < t < 1.0 - 1e-9:
            boundary.insert(i + 1, np.asarray(insert, dtype=float))
    tris = []
    m = len(boundary)
    for i in range(m):
        tri = np.array([apex, boundary[i], boundary[(i + 1) % m]])
        if abs(_polygon_area(tri)) > area_tol:
            tris.append(tri)
    return tris


# Symmetric triangle rules in barycentric coordinates (degree 2 and degree 5).
_TRI3_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_TRI3_W = np.array([1 / 3, 1 / 3, 1 / 3])

_a1, _b1 = 0.059715871789770, 0.470142064105115
_a2, _b2 = 0.797426985353087, 0.101286507323456
_TRI7_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_a1, _b1, _b1],
        [_b1, _a1, _b1],
        [_b1, _b1, _a1],
        [_a2, _b2, _b2],
        [_b2, _a2, _b2],
        [_b2, _b2, _a2],
    ]
)
_TRI7_W = np.array(
    [0.225, 0.132394152788506, 0.132394152788506, 0.132394152788506,
     0.125939180544827, 0.125939180544827, 0.125939180544827]
)

_GP2 = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def _triangle_points(tris, bary, w):
    pts, wts = [], []
    for tri in tris:
        area = abs(_polygon_area(tri))
        pts.append(bary @ tri)
        wts.append(w * area)
    if not pts:
        return np.empty((0, 2)), np.empty(0)
    return np.vstack(pts), np.concatenate(wts)


def _quad_gauss_physical(coords: np.ndarray, n1d: int = 2):
    """Tensor Gauss rule mapped to physical coordinates of a bilinear quad."""
    g, w = np.polynomial.legendre.leggauss(n1d)
    pts, wts = [], []
    for i in range(n1d):
        for j in range(n1d):
            xi, eta = g[i], g[j]
            shp = 0.25 * np.array(
                [(1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)]
            )
            dxi = 0.25 * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
            deta = 0.25 * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
            jac = np.array([dxi @ coords, deta @ coords])
            pts.append(shp @ coords)
            wts.append(w[i] * w[j] * np.linalg.det(jac))
    return np.array(pts), np.array(wts)


def subcell_quadrature(coords: np.ndarray, cut: ElementCut) -> tuple[np.ndarray, np.ndarray]:
    """Physical quadrature points and weights for one element under a cut.

    Standard elements get the plain 2x2 Gauss rule. Split elements are divided
    into crack-conforming sub-polygons with a 3-point triangle rule; tip
    elements are fanned around the tip with a 7-point rule. Weights always sum
    to the element area and no point lies on the crack segment.
    """
    coords = np.asarray(coords, dtype=float)
    if cut.kind == "standard":
        return _quad_gauss_physical(coords, 2)

    size = np.sqrt(abs(_polygon_area(coords)))
    tol = 1e-12 * size**2

    if cut.kind == "split":
        q0, q1 = cut.chord
        d = q1 - q0
        n = np.array([-d[1], d[0]])
        n = n / np.linalg.norm(n)
        plus = _clip_polygon_halfplane(coords, q0, n, 1e-12 * size)
        minus = _clip_polygon_halfplane(coords, q0, -n, 1e-12 * size)
        tris = []
        for poly in (plus, minus):
            if len(poly) >= 3:
                tris.extend(_fan_triangles(poly, poly[0], None, tol))
        pts, wts = _triangle_points(tris, _TRI3_BARY, _TRI3_W)
    elif cut.kind == "tip":
        q0, q1 = cut.chord
        tip = cut.tip_xy
        entry = q0 if np.linalg.norm(q0 - tip) > np.linalg.norm(q1 - tip) else q1
        tris = _fan_triangles(coords, tip, entry, tol)
        pts, wts = _triangle_points(tris, _TRI7_BARY, _TRI7_W)
    else:
        raise ValueError(f"unknown cut kind {cut.kind!r}")

    area = abs(_polygon_area(coords))
    if pts.size == 0 or abs(wts.sum() - area) > 1e-9 * area:
        raise CrackGeometryError(
            f"sub-cell partition of element {cut.element} failed: weight sum "
            f"{wts.sum():.3e} vs area {area:.3e}"
        )
    return pts, wts


# ---------------------------------------------------------------------------
# classification


def _element_size(mesh: Mesh) -> float:
    coords = mesh.element_coords(0)
    return float(np.sqrt(abs(_polygon_area(coords))))


def _segment_point_distance(p, a, b) -> float:
    ab = b - a
    t = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def classify_elements(mesh: Mesh, crack: CrackGeometry) -> CrackData:
    """Classify every element against the crack and build tip frames.

    Validates tip placement for the crack kind, refuses cracks below the mesh
    resolution, and perturbs the crack normal to itself when its line or tips
    pass too close to a node (classification degeneracy).
    """
    esize = _element_size(mesh)
    xmin, ymin = mesh.nodes.min(axis=0)
    xmax, ymax = mesh.nodes.max(axis=0)
    diag = float(np.hypot(xmax - xmin, ymax - ymin))

    if crack.d < 1e-3 * esize:
        raise CrackGeometryError(f"crack length {crack.d} is below the mesh-size tolerance")

    def strictly_inside(p):
        m = 1e-9 * diag
        return xmin + m < p[0] < xmax - m and ymin + m < p[1] < ymax - m

    t_a, t_b = crack.tips
    inside = (strictly_inside(t_a), strictly_inside(t_b))
    if crack.kind == "center":
        if not all(inside):
            raise CrackGeometryError("center crack must have both tips strictly inside the plate")
        p0, p1 = t_a.copy(), t_b.copy()
        interior = [0, 1]
    else:
        if sum(inside) != 1:
            raise CrackGeometryError("edge crack must have exactly one tip strictly inside the plate")
        inner, mouth = (t_a, t_b) if inside[0] else (t_b, t_a)
        out_dir = (mouth - inner) / np.linalg.norm(mouth - inner)
        mouth_ext = inner + out_dir * (np.linalg.norm(mouth - inner) + diag)
        # Keep the p0 -> p1 orientation of the original axis so phi keeps its sign.
        if inside[0]:
            p0, p1 = t_a.copy(), mouth_ext
            interior = [0]
        else:
            p0, p1 = mouth_ext, t_b.copy()
            interior = [1]

    # Perturb away from nodes: crack line or endpoints within 1e-8 * element
    # size of a node shift the whole segment by 1e-6 * element size.
    normal = crack.normal
    for _ in range(4):
        dmin = np.inf
        for node in mesh.nodes:
            dmin = min(dmin, _segment_point_distance(node, p0, p1))
            for idx in interior:
                tip_pt = (p0, p1)[idx]
                dmin = min(dmin, float(np.linalg.norm(node - tip_pt)))
        if dmin > 1e-8 * esize:
            break
        p0 = p0 + 1e-6 * esize * normal
        p1 = p1 + 1e-6 * esize * normal
    else:
        raise CrackGeometryError("could not perturb crack away from mesh nodes")

    axis = (p1 - p0) / np.linalg.norm(p1 - p0)
    frames = []
    for k, idx in enumerate(interior):
        xy = (p0, p1)[idx]
        e_t = axis if idx == 1 else -axis
        e_n = np.array([-e_t[1], e_t[0]])
        frames.append(TipFrame(tip_id=k, xy=xy, e_t=e_t, e_n=e_n))

    tol_len = 1e-6 * esize
    eps = 1e-14 * max(diag, 1.0)

    candidates = {}
    for e in range(mesh.n_elements):
        coords = mesh.element_coords(e)
        span = _clip_segment_params(p0, p1, coords, eps)
        if span is None:
            continue
        t0, t1 = span
        q0 = p0 + t0 * (p1 - p0)
        q1 = p0 + t1 * (p1 - p0)
        ln = float(np.linalg.norm(q1 - q0))
        if ln > tol_len:
            candidates[e] = (q0, q1, ln)

    # Assign each interior tip to the containing element with the longest chord.
    tip_elem: dict[int, int] = {}
    tol_in = 1e-9 * esize
    for k, frame in enumerate(frames):
        best = None
        for e, (q0, q1, ln) in candidates.items():
            if _point_in_poly(frame.xy, mesh.element_coords(e), tol_in):
                if best is None or ln > best[1]:
                    best = (e, ln)
        if best is None:
            raise CrackGeometryError(f"crack tip {k} could not be located in any element")
        e = best[0]
        if e in tip_elem:
            raise CrackGeometryError(
                "both crack tips fall in one element; the crack is below the mesh resolution"
            )
        tip_elem[e] = k

    cuts = []
    for e in range(mesh.n_elements):
        if e in tip_elem:
            k = tip_elem[e]
            q0, q1, _ = candidates[e]
            cuts.append(ElementCut(element=e, kind="tip", chord=np.array([q0, q1]),
                                   tip=k, tip_xy=frames[k].xy.copy()))
        elif e in candidates:
            q0, q1, _ = candidates[e]
            cuts.append(ElementCut(element=e, kind="split", chord=np.array([q0, q1])))
        else:
            cuts.append(ElementCut(element=e, kind="standard"))

    return CrackData(crack=crack, p0=p0, p1=p1, tip_frames=tuple(frames), cuts=tuple(cuts))


# ---------------------------------------------------------------------------
# enriched DOF bookkeeping


@dataclass(frozen=True)
class EnrRecord:
    """One enrichment function at one node; owns five consecutive DOFs (all fields)."""

    node: int
    kind: str  # KIND_HEAVISIDE | KIND_TIP
    tip: int = -1
    branch: int = -1


@dataclass(frozen=True)
class EnrichedDofMap:
    """DofMap extended with Heaviside and tip-branch DOF blocks.

    Enriched DOFs are appended after the standard block; record r owns DOFs
    [n_std + 5r, n_std + 5r + 5). Constrained fields of a node constrain the
    same fields of all its enrichment records.
    """

    base: DofMap
    records: tuple[EnrRecord, ...]
    constrained: np.ndarray
    free: np.ndarray
    node_records: dict

    @classmethod
    def from_base(cls, base: DofMap, records=(), ) -> "EnrichedDofMap":
        records = tuple(records)
        n_std = base.n_dofs
        n_dofs = n_std + N_FIELDS * len(records)
        constrained_std = set(int(i) for i in base.constrained)
        constrained = sorted(constrained_std)
        for r, rec in enumerate(records):
            for f in range(N_FIELDS):
                if N_FIELDS * rec.node + f in constrained_std:
                    constrained.append(n_std + N_FIELDS * r + f)
        constrained = np.array(sorted(constrained), dtype=int)
        mask = np.ones(n_dofs, dtype=bool)
        mask[constrained] = False
        free = np.nonzero(mask)[0]
        node_records: dict = {}
        for r, rec in enumerate(records):
            node_records.setdefault(rec.node, []).append(r)
        return cls(base=base, records=records, constrained=constrained, free=free,
                   node_records={k: tuple(v) for k, v in node_records.items()})

    @property
    def n_nodes(self) -> int:
        return self.base.n_nodes

    @property
    def n_dofs(self) -> int:
        return self.base.n_dofs + N_FIELDS * len(self.records)

    @property
    def n_free(self) -> int:
        return self.free.size

    def record_base(self, r: int) -> int:
        return self.base.n_dofs + N_FIELDS * r

    def n_heaviside_dofs(self) -> int:
        return N_FIELDS * sum(1 for r in self.records if r.kind == KIND_HEAVISIDE)

    def n_tip_dofs(self) -> int:
        return N_FIELDS * sum(1 for r in self.records if r.kind == KIND_TIP)


def _side_areas(coords: np.ndarray, chord: np.ndarray, normal: np.ndarray) -> tuple[float, float]:
    size = np.sqrt(abs(_polygon_area(coords)))
    plus = _clip_polygon_halfplane(coords, chord[0], normal, 1e-12 * size)
    minus = _clip_polygon_halfplane(coords, chord[0], -normal, 1e-12 * size)
    a_plus = abs(_polygon_area(plus)) if len(plus) >= 3 else 0.0
    a_minus = abs(_polygon_area(minus)) if len(minus) >= 3 else 0.0
    return a_plus, a_minus


def build_enrichment_map(mesh: Mesh, data: CrackData, base: DofMap,
                         area_tol: float = 1e-4) -> EnrichedDofMap:
    """Select enriched nodes and append their DOF blocks to the base map.

    Tip-element nodes carry the four branch functions of their tip; nodes whose
    support is fully bisected by the crack (both side areas above `area_tol`
    of the support area) carry a sign-function block. No node carries both.
    """
    node_elems: dict[int, list[int]] = {}
    for e, conn in enumerate(mesh.elements):
        for n in conn:
            node_elems.setdefault(int(n), []).append(e)

    tip_nodes: dict[int, int] = {}
    for cut in data.cuts:
        if cut.kind != "tip":
            continue
        for n in mesh.elements[cut.element]:
            n = int(n)
            if n in tip_nodes and tip_nodes[n] != cut.tip:
                raise CrackGeometryError(
                    "crack tips share support nodes; the crack is below the mesh resolution"
                )
            tip_nodes[n] = cut.tip

    normal = data.normal
    h_nodes = []
    h_candidates = set()
    for cut in data.cuts:
        if cut.kind == "split":
            h_candidates.update(int(n) for n in mesh.elements[cut.element])
    for n in sorted(h_candidates - set(tip_nodes)):
        a_plus = a_minus = 0.0
        for e in node_elems[n]:
            coords = mesh.element_coords(e)
            cut = data.cuts[e]
            if cut.kind == "standard":
                centroid = coords.mean(axis=0)
                if data.phi(centroid)[0] >= 0.0:
                    a_plus += abs(_polygon_area(coords))
                else:
                    a_minus += abs(_polygon_area(coords))
            else:
                ap, am = _side_areas(coords, cut.chord, normal)
                a_plus += ap
                a_minus += am
        support = a_plus + a_minus
        if min(a_plus, a_minus) > area_tol * support:
            h_nodes.append(n)

    records = [EnrRecord(node=n, kind=KIND_HEAVISIDE) for n in h_nodes]
    for n in sorted(tip_nodes):
        for j in range(4):
            records.append(EnrRecord(node=n, kind=KIND_TIP, tip=tip_nodes[n], branch=j))
    records.sort(key=lambda r: (r.node, r.kind, r.tip, r.branch))
    return EnrichedDofMap.from_base(base, records)
